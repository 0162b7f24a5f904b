//! Model file parsing.
//!
//! The text format, line by line (blank lines ignored, tokens separated by
//! whitespace):
//!
//! ```text
//! <state_dim> <input_dim> <grid_count>
//! <state_var_names> <input_var_names>
//! <state_ode.1> .. <state_ode.state_dim>
//! <input_equa.1> .. <input_equa.input_dim>
//! <period> <step_size>
//! <m> <k>
//! <safe_state.1> .. <safe_state.state_dim>          ("lo hi" per line)
//! <initial_state.1> .. <initial_state.state_dim>
//! ```

use thiserror::Error;

use crate::expr::{parse_expr, Expr};
use crate::interval::{BoxRegion, Interval};
use crate::scalar::{scalar, Scalar};

/// Hard cap on the total grid count, to fail fast on absurd inputs before
/// allocating bitsets of that many bits per grid.
const MAX_TOTAL_GRIDS: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct ModelError {
    pub line: usize,
    pub msg: String,
}

fn err<T>(line: usize, msg: impl Into<String>) -> Result<T, ModelError> {
    Err(ModelError {
        line,
        msg: msg.into(),
    })
}

/// A parsed and validated problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    pub state_dim: usize,
    pub input_dim: usize,
    /// Partitions per dimension; the grid has `grid_count^state_dim` cells.
    pub grid_count: usize,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    /// One ODE right-hand side per state variable, over state then input
    /// variables (indices `0..d` are states, `d..d+q` inputs).
    pub odes: Vec<Expr<S>>,
    /// One control law per input variable, over state variables only.
    pub input_laws: Vec<Expr<S>>,
    /// Sampling period (seconds).
    pub period: S,
    /// Requested integrator micro-step (seconds).
    pub step_size: S,
    /// Maximum deadline misses allowed in any window (`m`).
    pub miss_budget: usize,
    /// Window length in periods (`K`).
    pub window: usize,
    pub safe_box: BoxRegion<S>,
    pub initial_box: BoxRegion<S>,
    /// Non-fatal issues found during validation.
    pub warnings: Vec<String>,
}

impl<S: Scalar> Model<S> {
    /// All variable names in evaluation order: states then inputs.
    pub fn all_names(&self) -> Vec<String> {
        let mut names = self.state_names.clone();
        names.extend(self.input_names.iter().cloned());
        names
    }

    /// Number of integrator micro-steps per sampling period: `period /
    /// step_size` rounded to the nearest positive integer. Exact divisors
    /// land on the intended count despite floating-point dust; for a
    /// non-divisible step size the integrator uses the closest uniform
    /// subdivision of the period.
    pub fn micro_steps(&self) -> usize {
        let ratio = (self.period / self.step_size).to_f64().unwrap();
        ratio.round().max(1.0) as usize
    }

    /// Step actually used by the integrator: `period / micro_steps()`.
    pub fn effective_step(&self) -> S {
        self.period / scalar(self.micro_steps() as f64)
    }

    /// Total number of grid cells, `grid_count^state_dim`.
    pub fn total_grids(&self) -> usize {
        self.grid_count.pow(self.state_dim as u32)
    }

    /// Per-dimension tolerance for testing containment in the safe box.
    ///
    /// Any overapproximating flowpipe of a grid that touches the boundary of
    /// the safe set also touches its complement by a rounding-level margin;
    /// a zero-tolerance test would misclassify every boundary grid of an
    /// inward-flowing system. The margin is scaled to the safe-set
    /// coordinates.
    pub fn safe_tolerance(&self) -> Vec<S> {
        self.safe_box
            .iter()
            .map(|iv| scalar::<S>(1e-6) * S::one().max(iv.magnitude()))
            .collect()
    }

    /// Per-dimension margin below which an end-box/grid overlap is treated
    /// as face touching rather than proper overlap when building successor
    /// edges.
    ///
    /// A sample-time state on a shared face belongs to the neighboring cell
    /// that overlaps properly, so edges for measure-zero contact add no
    /// covered behavior; dropping them stops degenerate boundary contact
    /// (e.g. coordinates with zero velocity frozen on a grid line) from
    /// poisoning the reachability abstraction.
    pub fn edge_margin(&self) -> Vec<S> {
        self.safe_box
            .iter()
            .map(|iv| scalar::<S>(1e-9) * S::one().max(iv.magnitude()))
            .collect()
    }

    /// Canonical text form; `parse_model(to_text(m))` reproduces `m`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} {}\n",
            self.state_dim, self.input_dim, self.grid_count
        ));
        out.push_str(&self.all_names().join(" "));
        out.push('\n');
        let all = self.all_names();
        for ode in &self.odes {
            out.push_str(&ode.to_text(&all));
            out.push('\n');
        }
        for law in &self.input_laws {
            out.push_str(&law.to_text(&self.state_names));
            out.push('\n');
        }
        out.push_str(&format!("{} {}\n", self.period, self.step_size));
        out.push_str(&format!("{} {}\n", self.miss_budget, self.window));
        for iv in self.safe_box.iter() {
            out.push_str(&format!("{} {}\n", iv.lo, iv.hi));
        }
        for iv in self.initial_box.iter() {
            out.push_str(&format!("{} {}\n", iv.lo, iv.hi));
        }
        out
    }
}

struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Lines { lines, pos: 0 }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), ModelError> {
        match self.lines.get(self.pos) {
            Some(&(n, l)) => {
                self.pos += 1;
                Ok((n, l))
            }
            None => {
                let last = self.lines.last().map(|&(n, _)| n).unwrap_or(0);
                err(last + 1, format!("unexpected end of file, expected {what}"))
            }
        }
    }
}

fn parse_number<S: Scalar>(tok: &str, line: usize) -> Result<S, ModelError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| ModelError {
            line,
            msg: format!("non-numeric token `{tok}`"),
        })?;
    if !v.is_finite() {
        return err(line, format!("non-finite number `{tok}`"));
    }
    Ok(scalar(v))
}

fn parse_count(tok: &str, line: usize, what: &str) -> Result<usize, ModelError> {
    tok.parse().map_err(|_| ModelError {
        line,
        msg: format!("{what} must be a nonnegative integer, got `{tok}`"),
    })
}

fn expect_tokens<'a>(
    line: usize,
    text: &'a str,
    count: usize,
    what: &str,
) -> Result<Vec<&'a str>, ModelError> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != count {
        return err(
            line,
            format!("expected {count} token(s) for {what}, found {}", toks.len()),
        );
    }
    Ok(toks)
}

fn parse_range<S: Scalar>(line: usize, text: &str, what: &str) -> Result<Interval<S>, ModelError> {
    let toks = expect_tokens(line, text, 2, what)?;
    let lo: S = parse_number(toks[0], line)?;
    let hi: S = parse_number(toks[1], line)?;
    if lo > hi {
        return err(line, format!("{what}: lower bound exceeds upper bound"));
    }
    Ok(Interval::new(lo, hi))
}

fn valid_ident(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses the model file format into a validated [`Model`].
pub fn parse_model<S: Scalar>(text: &str) -> Result<Model<S>, ModelError> {
    let mut lines = Lines::new(text);

    let (n, header) = lines.next("header line")?;
    let toks = expect_tokens(n, header, 3, "header `state_dim input_dim grid_count`")?;
    let state_dim = parse_count(toks[0], n, "state_dim")?;
    let input_dim = parse_count(toks[1], n, "input_dim")?;
    let grid_count = parse_count(toks[2], n, "grid_count")?;
    if state_dim == 0 {
        return err(n, "state_dim must be positive");
    }
    if grid_count == 0 {
        return err(n, "grid_count must be positive");
    }
    match grid_count.checked_pow(state_dim as u32) {
        Some(total) if total <= MAX_TOTAL_GRIDS => {}
        _ => {
            return err(
                n,
                format!("grid_count^state_dim exceeds the supported limit of {MAX_TOTAL_GRIDS}"),
            )
        }
    }

    let (n, names_line) = lines.next("variable names")?;
    let names = expect_tokens(n, names_line, state_dim + input_dim, "variable names")?;
    for name in &names {
        if !valid_ident(name) {
            return err(n, format!("invalid variable name `{name}`"));
        }
    }
    for (i, a) in names.iter().enumerate() {
        if names[..i].contains(a) {
            return err(n, format!("duplicate variable name `{a}`"));
        }
    }
    let state_names: Vec<String> = names[..state_dim].iter().map(|s| s.to_string()).collect();
    let input_names: Vec<String> = names[state_dim..].iter().map(|s| s.to_string()).collect();
    let all_names: Vec<String> = names.iter().map(|s| s.to_string()).collect();

    let mut odes = Vec::with_capacity(state_dim);
    for name in &state_names {
        let (n, line) = lines.next("state ODE")?;
        let e = parse_expr(line, &all_names).map_err(|e| ModelError {
            line: n,
            msg: format!("ODE for {name}: {e}"),
        })?;
        odes.push(e);
    }

    let mut input_laws = Vec::with_capacity(input_dim);
    for name in &input_names {
        let (n, line) = lines.next("input law")?;
        let e = parse_expr(line, &state_names).map_err(|e| ModelError {
            line: n,
            msg: format!("input law for {name}: {e}"),
        })?;
        input_laws.push(e);
    }

    let (n, timing) = lines.next("`period step_size` line")?;
    let toks = expect_tokens(n, timing, 2, "`period step_size`")?;
    let period: S = parse_number(toks[0], n)?;
    let step_size: S = parse_number(toks[1], n)?;
    if period <= S::zero() {
        return err(n, "period must be positive");
    }
    if step_size <= S::zero() {
        return err(n, "step_size must be positive");
    }
    if step_size > period {
        return err(n, "step_size exceeds period");
    }

    let (n, mk) = lines.next("`m K` line")?;
    let toks = expect_tokens(n, mk, 2, "`m K`")?;
    let miss_budget = parse_count(toks[0], n, "m")?;
    let window = parse_count(toks[1], n, "K")?;
    if window == 0 {
        return err(n, "K must be positive");
    }
    if miss_budget > window {
        return err(n, "m exceeds K");
    }

    let mut safe = Vec::with_capacity(state_dim);
    for name in &state_names {
        let (n, line) = lines.next("safe range")?;
        let iv = parse_range(n, line, &format!("safe range for {name}"))?;
        if iv.width() <= S::zero() {
            return err(n, format!("safe range for {name} has zero width"));
        }
        safe.push(iv);
    }
    let mut initial = Vec::with_capacity(state_dim);
    for name in &state_names {
        let (n, line) = lines.next("initial range")?;
        initial.push(parse_range(n, line, &format!("initial range for {name}"))?);
    }

    if lines.pos != lines.lines.len() {
        let (n, _) = lines.lines[lines.pos];
        return err(n, "unexpected trailing content");
    }

    let safe_box = BoxRegion::new(safe);
    let initial_box = BoxRegion::new(initial);
    let mut warnings = Vec::new();
    if !safe_box.contains(&initial_box) {
        warnings.push(
            "initial box is not contained in the safe box; the verdict will be unsafe".to_string(),
        );
    }

    Ok(Model {
        state_dim,
        input_dim,
        grid_count,
        state_names,
        input_names,
        odes,
        input_laws,
        period,
        step_size,
        miss_budget,
        window,
        safe_box,
        initial_box,
        warnings,
    })
}
