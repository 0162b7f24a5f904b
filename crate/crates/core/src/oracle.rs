//! Non-validated simulation and enumeration oracles for the property
//! suites. Nothing here is part of the verification trust base: the
//! simulator applies the control law at the exact sampled point and
//! integrates with plain RK4, which is the semantic ground truth the
//! validated engine must enclose.

#![allow(clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::Model;
use crate::scalar::{scalar, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("pattern enumeration is limited to K <= 20")]
    WindowTooLarge,
    #[error("m exceeds K")]
    BudgetExceedsWindow,
}

/// All miss patterns of length `K` with at most `m` misses, in
/// lexicographic order (`0 < 1`).
pub fn enumerate_patterns(m: usize, k: usize) -> Result<Vec<Vec<u8>>, PatternError> {
    if k > 20 {
        return Err(PatternError::WindowTooLarge);
    }
    if m > k {
        return Err(PatternError::BudgetExceedsWindow);
    }
    let mut out = Vec::new();
    for bits in 0u32..(1 << k) {
        if bits.count_ones() as usize > m {
            continue;
        }
        // Lexicographic order over sequences equals numeric order when the
        // first element is the most significant bit.
        let seq: Vec<u8> = (0..k).map(|i| ((bits >> (k - 1 - i)) & 1) as u8).collect();
        out.push(seq);
    }
    out.sort();
    Ok(out)
}

/// Sliding-window validator: every window of `K` consecutive entries has at
/// most `m` ones.
pub fn window_ok(pattern: &[u8], m: usize, k: usize) -> bool {
    if pattern.iter().any(|&b| b > 1) {
        return false;
    }
    if pattern.len() < k {
        return pattern.iter().map(|&b| b as usize).sum::<usize>() <= m;
    }
    pattern
        .windows(k)
        .all(|w| w.iter().map(|&b| b as usize).sum::<usize>() <= m)
}

/// Random admissible pattern: each new bit is a coin flip unless the
/// trailing window forces a meet. Deterministic for a fixed seed.
pub fn sample_admissible_pattern(m: usize, k: usize, len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<u8> = Vec::with_capacity(len);
    for i in 0..len {
        let window_start = (i + 1).saturating_sub(k);
        let recent: usize = out[window_start..].iter().map(|&b| b as usize).sum();
        let bit = if recent < m && rng.gen::<bool>() {
            1
        } else {
            0
        };
        out.push(bit);
    }
    out
}

/// Dense simulation record.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    /// `(time, state)` samples, starting at `t = 0`, one per RK4 step.
    pub samples: Vec<(S, Vec<S>)>,
    /// Time of the first sample outside the safe box, if any; the
    /// simulation stops there.
    pub left_safe_at: Option<S>,
}

/// Reusable RK4 state: one combined (state, input) evaluation buffer plus
/// the four stage slopes.
struct Rk4<S> {
    full: Vec<S>,
    stages: [Vec<S>; 4],
    tmp: Vec<S>,
}

impl<S: Scalar> Rk4<S> {
    fn new(d: usize, q: usize) -> Self {
        Rk4 {
            full: vec![S::zero(); d + q],
            stages: std::array::from_fn(|_| vec![S::zero(); d]),
            tmp: vec![S::zero(); d],
        }
    }

    fn eval_field(&mut self, model: &Model<S>, x: &[S], u: &[S], stage: usize) {
        let d = x.len();
        self.full[..d].copy_from_slice(x);
        self.full[d..].copy_from_slice(u);
        for (i, ode) in model.odes.iter().enumerate() {
            self.stages[stage][i] = ode
                .eval_real(&self.full)
                .expect("oracle simulation hit an evaluation error");
        }
    }

    fn step(&mut self, model: &Model<S>, x: &mut [S], u: &[S], dt: S) {
        let d = x.len();
        let half = scalar::<S>(0.5);
        let sixth = S::one() / scalar::<S>(6.0);
        let two = scalar::<S>(2.0);

        self.eval_field(model, x, u, 0);
        for i in 0..d {
            self.tmp[i] = x[i] + half * dt * self.stages[0][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.eval_field(model, &tmp, u, 1);
        self.tmp = tmp;
        for i in 0..d {
            self.tmp[i] = x[i] + half * dt * self.stages[1][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.eval_field(model, &tmp, u, 2);
        self.tmp = tmp;
        for i in 0..d {
            self.tmp[i] = x[i] + dt * self.stages[2][i];
        }
        let tmp = std::mem::take(&mut self.tmp);
        self.eval_field(model, &tmp, u, 3);
        self.tmp = tmp;
        for i in 0..d {
            x[i] = x[i]
                + dt * sixth
                    * (self.stages[0][i]
                        + two * self.stages[1][i]
                        + two * self.stages[2][i]
                        + self.stages[3][i]);
        }
    }
}

/// Simulates `periods` sampling periods from `x0` under the given miss
/// pattern (one bit per period, `1` = miss). The input is recomputed from
/// the exact state at each period start and held for the period; RK4 runs
/// at one hundredth of the integrator micro-step. Leaving the safe box is a
/// recorded outcome, not an error: the trajectory stops at the offending
/// sample.
pub fn simulate<S: Scalar>(
    model: &Model<S>,
    x0: &[S],
    pattern: &[u8],
    periods: usize,
) -> Trajectory<S> {
    assert!(pattern.len() >= periods, "pattern shorter than horizon");
    assert_eq!(x0.len(), model.state_dim);

    let substeps = model.micro_steps() * 100;
    let dt = model.period / scalar(substeps as f64);

    let mut rk4 = Rk4::new(model.state_dim, model.input_dim);
    let mut x = x0.to_vec();
    let mut u = vec![S::zero(); model.input_dim];
    let mut samples = vec![(S::zero(), x.clone())];
    let mut left_safe_at = None;

    'outer: for (p, &bit) in pattern.iter().take(periods).enumerate() {
        if bit == 0 {
            for (ui, law) in u.iter_mut().zip(model.input_laws.iter()) {
                *ui = law.eval_real(&x).expect("control law evaluation failed");
            }
        } else {
            u.fill(S::zero());
        }
        let t_base = model.period * scalar(p as f64);
        for s in 1..=substeps {
            rk4.step(model, &mut x, &u, dt);
            let t = t_base + dt * scalar(s as f64);
            samples.push((t, x.clone()));
            if !model.safe_box.contains_point(&x) {
                left_safe_at = Some(t);
                break 'outer;
            }
        }
    }

    Trajectory {
        samples,
        left_safe_at,
    }
}
