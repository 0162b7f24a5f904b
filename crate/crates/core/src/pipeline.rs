//! End-to-end orchestration: parse, build grids, one-step graph, DP,
//! inductiveness, verdict.
//!
//! All report lines go to the supplied writer. Progress milestones are
//! printed exactly once each, in order, under a lock, so standard output is
//! byte-identical for any worker count. Timing goes to standard error to
//! keep standard output comparable.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use thiserror::Error;

use crate::dp::{local_safety, KStepGraph};
use crate::graph::{build_one_step, OneStepGraph};
use crate::grid::GridSet;
use crate::inductive::inductiveness;
use crate::model::{parse_model, Model, ModelError};
use crate::reach::{ReachEngine, ReachError, DEFAULT_ORDER};
use crate::report::{
    area_lines, check_initial, edges_line, k_step_lines, progress_line, safe_region_line,
    RunStats, Verdict, LINE_AREA, LINE_CLOSED, LINE_CONFIG, LINE_GRIDS, LINE_K_STEP,
    LINE_ONE_STEP, LINE_PARSING,
};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("model error: {0}")]
    Parse(#[from] ModelError),
    #[error("engine configuration: {0}")]
    Config(ReachError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct PipelineOptions {
    /// Taylor expansion order of the integrator.
    pub order: usize,
    /// Worker threads; 0 means all available parallelism.
    pub threads: usize,
    /// Suppress intermediate progress updates and timing lines.
    pub quiet: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            order: DEFAULT_ORDER,
            threads: 0,
            quiet: false,
        }
    }
}

/// Command-line overrides applied on top of the parsed model file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub miss_budget: Option<usize>,
    pub window: Option<usize>,
    pub grid_count: Option<usize>,
    pub step_size: Option<f64>,
}

fn override_err(msg: impl Into<String>) -> ModelError {
    ModelError {
        line: 0,
        msg: format!("override: {}", msg.into()),
    }
}

/// Applies overrides and re-checks the model invariants they touch.
pub fn apply_overrides<S: Scalar>(
    model: &mut Model<S>,
    overrides: &Overrides,
) -> Result<(), ModelError> {
    if let Some(m) = overrides.miss_budget {
        model.miss_budget = m;
    }
    if let Some(k) = overrides.window {
        model.window = k;
    }
    if let Some(p) = overrides.grid_count {
        model.grid_count = p;
    }
    if let Some(h) = overrides.step_size {
        if h <= 0.0 {
            return Err(override_err("step_size must be positive"));
        }
        model.step_size = crate::scalar::scalar(h);
    }
    if model.window == 0 {
        return Err(override_err("K must be positive"));
    }
    if model.miss_budget > model.window {
        return Err(override_err("m exceeds K"));
    }
    if model.grid_count == 0 {
        return Err(override_err("grid count must be positive"));
    }
    match model.grid_count.checked_pow(model.state_dim as u32) {
        Some(total) if total <= (1 << 22) => {}
        _ => return Err(override_err("grid count too large")),
    }
    if model.step_size > model.period {
        return Err(override_err("step_size exceeds period"));
    }
    Ok(())
}

/// Everything later stages and tests may want from a run.
pub struct PipelineOutcome<S> {
    pub model: Model<S>,
    pub one_step: OneStepGraph,
    pub k_step: KStepGraph,
    pub gamma_s: GridSet,
    pub gamma_i: GridSet,
    pub verdict: Verdict<S>,
    pub stats: RunStats,
}

struct Emitter<W> {
    out: Mutex<(W, usize)>,
    quiet: bool,
    /// Progress milestones per run (prints are 1/units of the total each).
    units: usize,
}

impl<W: Write> Emitter<W> {
    fn line(&self, text: &str) -> std::io::Result<()> {
        let mut guard = self.out.lock().unwrap();
        writeln!(guard.0, "{text}")
    }

    /// Prints every progress milestone crossed by `done/total` exactly once
    /// and in order, regardless of which worker reports it.
    fn progress(&self, done: usize, total: usize) {
        let milestone = done * self.units / total.max(1);
        let mut guard = self.out.lock().unwrap();
        let (writer, printed) = &mut *guard;
        while *printed < milestone {
            *printed += 1;
            let last = *printed == self.units;
            if self.quiet && !last {
                continue;
            }
            let text = progress_line(*printed, self.units);
            let result = if last {
                if self.quiet {
                    writeln!(writer, "{text}")
                } else {
                    writeln!(writer, "\r{text}")
                }
            } else {
                write!(writer, "\r{text}")
            };
            result.expect("progress write failed");
        }
    }
}

/// Runs the whole pipeline on model file text, streaming the report to
/// `out`. The caller decides exit codes and SVG rendering from the outcome.
pub fn run_pipeline<S: Scalar, W: Write + Send>(
    text: &str,
    overrides: &Overrides,
    options: &PipelineOptions,
    out: W,
) -> Result<PipelineOutcome<S>, PipelineError> {
    let threads = if options.threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        options.threads
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PipelineError::Io(std::io::Error::other(e)))?;

    let mut emitter = Emitter {
        out: Mutex::new((out, 0)),
        quiet: options.quiet,
        units: 0,
    };

    emitter.line(LINE_PARSING)?;
    let mut model: Model<S> = parse_model(text)?;
    apply_overrides(&mut model, overrides)?;
    for warning in &model.warnings {
        eprintln!("[Warning] {warning}");
    }

    emitter.line(LINE_CONFIG)?;
    let engine = ReachEngine::new(&model, options.order).map_err(PipelineError::Config)?;

    emitter.line(LINE_GRIDS)?;
    let total = model.total_grids();
    emitter.units = total.min(10_000);

    emitter.line(LINE_ONE_STEP)?;
    let t0 = Instant::now();
    let one_step = pool.install(|| {
        build_one_step(&engine, &|done, total| emitter.progress(done, total))
    });
    if !options.quiet {
        eprintln!("[Time] one-step graph: {:.3} s", t0.elapsed().as_secs_f64());
    }
    emitter.line(&edges_line(one_step.edge_count()))?;

    emitter.line(LINE_K_STEP)?;
    let t1 = Instant::now();
    let (gamma_s, k_step) =
        pool.install(|| local_safety(&one_step, model.miss_budget, model.window));
    if !options.quiet {
        eprintln!("[Time] K-step graph: {:.3} s", t1.elapsed().as_secs_f64());
    }
    for line in k_step_lines(k_step.start_size, k_step.end_size, k_step.edge_count) {
        emitter.line(&line)?;
    }

    emitter.line(LINE_CLOSED)?;
    let t2 = Instant::now();
    let gamma_i = inductiveness(&k_step, &gamma_s, total);
    if !options.quiet {
        eprintln!("[Time] closed subgraph: {:.3} s", t2.elapsed().as_secs_f64());
    }
    emitter.line(&safe_region_line(gamma_i.count()))?;

    emitter.line(LINE_AREA)?;
    let verdict = check_initial(&model, &gamma_i);
    let stats = RunStats::new(&one_step, &k_step, &gamma_i, &verdict);
    for line in area_lines(stats.initial_area, stats.intersection_area, stats.safe) {
        emitter.line(&line)?;
    }

    Ok(PipelineOutcome {
        model,
        one_step,
        k_step,
        gamma_s,
        gamma_i,
        verdict,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::render_text;

    const TOY: &str = "1 0 6\nx\n-2 * x\n0.2 0.02\n1 2\n-1 1\n-0.4 0.4\n";

    #[test]
    fn quiet_stream_matches_render_text() {
        let opts = PipelineOptions {
            quiet: true,
            ..Default::default()
        };
        let mut buf = Vec::new();
        let outcome =
            run_pipeline::<f64, _>(TOY, &Overrides::default(), &opts, &mut buf).unwrap();
        let streamed = String::from_utf8(buf).unwrap();
        let rendered = render_text(&outcome.stats, outcome.model.total_grids());
        assert_eq!(streamed, rendered);
    }

    #[test]
    fn thread_counts_do_not_change_output() {
        let run = |threads: usize| {
            let opts = PipelineOptions {
                threads,
                ..Default::default()
            };
            let mut buf = Vec::new();
            run_pipeline::<f64, _>(TOY, &Overrides::default(), &opts, &mut buf).unwrap();
            buf
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn overrides_equal_edited_file() {
        let opts = PipelineOptions {
            quiet: true,
            ..Default::default()
        };
        let overrides = Overrides {
            miss_budget: Some(0),
            window: Some(3),
            grid_count: Some(8),
            step_size: Some(0.04),
        };
        let mut with_flags = Vec::new();
        run_pipeline::<f64, _>(TOY, &overrides, &opts, &mut with_flags).unwrap();

        let edited = "1 0 8\nx\n-2 * x\n0.2 0.04\n0 3\n-1 1\n-0.4 0.4\n";
        let mut with_edit = Vec::new();
        run_pipeline::<f64, _>(edited, &Overrides::default(), &opts, &mut with_edit).unwrap();
        assert_eq!(with_flags, with_edit);
    }

    #[test]
    fn invalid_override_is_a_parse_error() {
        let overrides = Overrides {
            miss_budget: Some(5),
            window: Some(2),
            ..Default::default()
        };
        let result = run_pipeline::<f64, _>(
            TOY,
            &overrides,
            &PipelineOptions::default(),
            &mut Vec::new(),
        );
        assert!(matches!(result, Err(PipelineError::Parse(_))));
    }

    #[test]
    fn single_precision_instantiation() {
        let opts = PipelineOptions {
            quiet: true,
            ..Default::default()
        };
        let mut buf = Vec::new();
        let outcome =
            run_pipeline::<f32, _>(TOY, &Overrides::default(), &opts, &mut buf).unwrap();
        assert!(outcome.verdict.safe);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("       Result: safe\n"));
    }

    #[test]
    fn contractive_toy_is_safe() {
        let mut buf = Vec::new();
        let outcome = run_pipeline::<f64, _>(
            TOY,
            &Overrides::default(),
            &PipelineOptions {
                quiet: true,
                ..Default::default()
            },
            &mut buf,
        )
        .unwrap();
        assert!(outcome.verdict.safe);
        assert!(outcome.gamma_i.count() >= 2);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("       Result: safe\n"));
    }
}
