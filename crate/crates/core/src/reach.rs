//! Validated one-period reachability.
//!
//! For a start box and a miss/meet event this module produces a guaranteed
//! flowpipe overapproximation of every trajectory over one sampling period,
//! plus a tight enclosure of the states at exactly time `period`.
//!
//! Per micro-step the integrator:
//! 1. verifies an a-priori enclosure `B` with the interval Picard operator
//!    (`x + [0,h]*f(B) ⊆ B`),
//! 2. bounds the variational flow (the Jacobian of the flow map) over the
//!    step with a matrix Picard operator,
//! 3. evaluates the order-`N` Taylor expansion with symbolic Lie
//!    derivatives, both directly over the current box (inclusion-isotone)
//!    and in mean-value form.
//!
//! Across the micro-steps of a period the set is carried in Lohner form
//! `center ⊕ A·Δ`, where `Δ` is the deviation of the initial cell from its
//! midpoint and `A` the accumulated interval Jacobian: widths propagate
//! through signed Jacobian products instead of being re-boxed every step,
//! which keeps contracting dynamics contracting.
//!
//! A met deadline holds `u = π(x(0))` constant for the period. That
//! correlation between the input and the start point is kept by
//! integrating the augmented system `(x, z)` with `ż = 0` and `u := π(z)`
//! from the diagonal initial set `{(x0, x0)}`: the mean-value form then
//! applies the combined `x`- and `z`-columns of `A` to one shared
//! deviation. Time enters the expansion as the point `h` for the end box
//! and as the interval `[0,h]` for the segment enclosure, which therefore
//! covers interior overshoot of the Taylor polynomial as well.

#![allow(clippy::needless_range_loop)]

use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::interval::{BoxRegion, Interval};
use crate::model::Model;
use crate::scalar::{scalar, Scalar};

/// Default Taylor expansion order.
pub const DEFAULT_ORDER: usize = 4;

const MAX_ORDER: usize = 20;
const PICARD_ITERATIONS: usize = 20;

/// Deadline outcome for one sampling period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MissEvent {
    /// Deadline met: the control law output is applied for the period.
    Meet = 0,
    /// Deadline missed: zero input is applied for the period.
    Miss = 1,
}

impl MissEvent {
    pub const BOTH: [MissEvent; 2] = [MissEvent::Meet, MissEvent::Miss];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn bit(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("a-priori enclosure not verified within the iteration budget")]
    EnclosureFailure,
    #[error("interval evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("taylor order must be in 1..={MAX_ORDER}")]
    BadOrder,
}

impl From<crate::interval::NumericError> for ReachError {
    fn from(e: crate::interval::NumericError) -> Self {
        ReachError::Eval(e.into())
    }
}

/// Time-ordered sequence of enclosure boxes over one sampling period.
#[derive(Debug, Clone, PartialEq)]
pub struct Flowpipe<S> {
    /// `(time subinterval within [0, period], state enclosure)`, tiling
    /// `[0, period]` in order with one entry per micro-step.
    pub segments: Vec<(Interval<S>, BoxRegion<S>)>,
    /// Enclosure of exactly the time-`period` states.
    pub end_box: BoxRegion<S>,
    pub event: MissEvent,
}

type Matrix<S> = Vec<Vec<Interval<S>>>;
/// Taylor coefficient levels `a_1..a_{N-1}` plus the remainder level.
type CoefficientTable<S> = (Vec<Vec<Interval<S>>>, Vec<Interval<S>>);

fn identity_interval<S: Scalar>(i: usize, j: usize) -> Interval<S> {
    Interval::point(if i == j { S::one() } else { S::zero() })
}

/// An autonomous system of `dims` integrated coordinates followed by
/// `params` held-constant evaluation dimensions, with precomputed symbolic
/// Lie derivatives and their Jacobians.
struct System<S> {
    dims: usize,
    params: usize,
    /// `lie[k][i]`, `k <= order`, over `dims + params` variables.
    lie: Vec<Vec<Expr<S>>>,
    /// `jac[k][i][j] = d lie[k][i] / d x_j` for `j < dims`.
    jac: Vec<Vec<Vec<Expr<S>>>>,
}

impl<S: Scalar> System<S> {
    fn build(odes: Vec<Expr<S>>, dims: usize, params: usize, order: usize) -> Self {
        debug_assert_eq!(odes.len(), dims);
        let mut lie: Vec<Vec<Expr<S>>> = vec![(0..dims).map(Expr::Var).collect()];
        let mut jac: Vec<Vec<Vec<Expr<S>>>> = Vec::new();
        for k in 0..=order {
            let level: Vec<Vec<Expr<S>>> = (0..dims)
                .map(|i| (0..dims).map(|j| lie[k][i].differentiate(j)).collect())
                .collect();
            if k < order {
                let next: Vec<Expr<S>> = (0..dims)
                    .map(|i| {
                        let mut sum = Expr::Const(S::zero());
                        for j in 0..dims {
                            sum = Expr::add(sum, Expr::mul(level[i][j].clone(), odes[j].clone()));
                        }
                        sum
                    })
                    .collect();
                lie.push(next);
            }
            jac.push(level);
        }
        System {
            dims,
            params,
            lie,
            jac,
        }
    }

    fn extend(&self, state: &BoxRegion<S>, params: &[Interval<S>]) -> Vec<Interval<S>> {
        debug_assert_eq!(state.dim(), self.dims);
        debug_assert_eq!(params.len(), self.params);
        let mut full = Vec::with_capacity(self.dims + self.params);
        full.extend_from_slice(state.intervals());
        full.extend_from_slice(params);
        full
    }
}

/// Reusable per-model integrator state.
pub struct ReachEngine<'m, S> {
    pub model: &'m Model<S>,
    pub order: usize,
    steps: usize,
    step: S,
    /// Outward-rounded `1/k!`.
    inv_fact: Vec<Interval<S>>,
    /// The plain dynamics over state variables with the inputs as trailing
    /// constant parameters. Serves miss periods (`u = 0`) and the public
    /// held-input operations.
    raw: System<S>,
    /// The augmented closed loop `(x, z)` with `ż = 0`, `u := π(z)`;
    /// present when the model has inputs.
    closed: Option<System<S>>,
}

impl<'m, S: Scalar> ReachEngine<'m, S> {
    pub fn new(model: &'m Model<S>, order: usize) -> Result<Self, ReachError> {
        if order == 0 || order > MAX_ORDER {
            return Err(ReachError::BadOrder);
        }
        let d = model.state_dim;
        let q = model.input_dim;

        let raw = System::build(model.odes.clone(), d, q, order);

        let closed = if q > 0 {
            // Substitute u_j := π_j(z) with z occupying variables d..2d.
            let substituted: Vec<Expr<S>> = model
                .odes
                .iter()
                .map(|f| {
                    f.substitute(&|v| {
                        if v < d {
                            Expr::Var(v)
                        } else {
                            model.input_laws[v - d].shift_vars(d)
                        }
                    })
                })
                .collect();
            let mut odes = substituted;
            odes.extend((0..d).map(|_| Expr::Const(S::zero())));
            Some(System::build(odes, 2 * d, 0, order))
        } else {
            None
        };

        let mut inv_fact = vec![Interval::point(S::one())];
        let mut fact = Interval::point(S::one());
        for k in 1..=order {
            fact = fact.checked_mul(&Interval::point(scalar(k as f64)))?;
            inv_fact.push(Interval::point(S::one()).checked_div(&fact)?);
        }

        Ok(ReachEngine {
            model,
            order,
            steps: model.micro_steps(),
            step: model.effective_step(),
            inv_fact,
            raw,
            closed,
        })
    }

    pub fn micro_steps(&self) -> usize {
        self.steps
    }

    pub fn step_size(&self) -> S {
        self.step
    }

    /// Interval of each control law over the start box of the period; the
    /// inputs are held constant for the whole period (zero-order hold).
    pub fn control_input(&self, start: &BoxRegion<S>) -> Result<Vec<Interval<S>>, ReachError> {
        self.model
            .input_laws
            .iter()
            .map(|law| law.eval_interval(start.intervals()).map_err(ReachError::from))
            .collect()
    }

    fn field(
        &self,
        system: &System<S>,
        state: &BoxRegion<S>,
        params: &[Interval<S>],
    ) -> Result<Vec<Interval<S>>, ReachError> {
        let full = system.extend(state, params);
        system.lie[1]
            .iter()
            .map(|f| f.eval_interval(&full).map_err(ReachError::from))
            .collect()
    }

    fn apriori_system(
        &self,
        system: &System<S>,
        start: &BoxRegion<S>,
        params: &[Interval<S>],
        h: S,
    ) -> Result<BoxRegion<S>, ReachError> {
        let span = Interval::new(S::zero(), h);
        let picard = |b: &BoxRegion<S>| -> Option<BoxRegion<S>> {
            let f = self.field(system, b, params).ok()?;
            let mut image = Vec::with_capacity(start.dim());
            for i in 0..start.dim() {
                let drift = span.checked_mul(&f[i]).ok()?;
                image.push(start[i].checked_add(&drift).ok()?);
            }
            Some(BoxRegion::new(image))
        };

        let mut inflate: Vec<S> = start
            .widths()
            .iter()
            .map(|&w| scalar::<S>(0.1) * w + scalar::<S>(1e-4))
            .collect();
        for _ in 0..PICARD_ITERATIONS {
            let candidate = start.widen_each(&inflate);
            if candidate.iter().any(|iv| !iv.lo.is_finite() || !iv.hi.is_finite()) {
                break;
            }
            match picard(&candidate) {
                Some(image) if candidate.contains(&image) => {
                    // The Picard image of a verified box is itself verified
                    // and smaller; tighten a few rounds.
                    let mut enclosure = image;
                    for _ in 0..3 {
                        match picard(&enclosure) {
                            Some(refined) => {
                                enclosure =
                                    refined.intersect(&enclosure).unwrap_or(enclosure);
                            }
                            None => break,
                        }
                    }
                    return Ok(enclosure);
                }
                Some(image) => {
                    // Grow only the dimensions whose containment failed:
                    // inflating settled dimensions (constants in
                    // particular) only enlarges the field's range.
                    for i in 0..start.dim() {
                        if !candidate[i].contains(&image[i]) {
                            inflate[i] = inflate[i] + inflate[i];
                        }
                    }
                }
                None => {
                    for e in inflate.iter_mut() {
                        *e = *e + *e;
                    }
                }
            }
        }
        Err(ReachError::EnclosureFailure)
    }

    /// Encloses the variational flow `M(t) = DΦ_t` over `[0,h]`: a matrix
    /// `M` with `I + [0,h]*(Df(B)·M) ⊆ M`.
    fn variational_system(
        &self,
        system: &System<S>,
        enclosure: &BoxRegion<S>,
        params: &[Interval<S>],
        h: S,
    ) -> Result<Matrix<S>, ReachError> {
        let n = system.dims;
        let full = system.extend(enclosure, params);
        let mut df = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(system.jac[1][i][j].eval_interval(&full)?);
            }
            df.push(row);
        }

        let span = Interval::new(S::zero(), h);
        let picard = |m: &Matrix<S>| -> Option<Matrix<S>> {
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let mut row = Vec::with_capacity(n);
                for j in 0..n {
                    let mut sum = Interval::zero();
                    for k in 0..n {
                        sum = sum.checked_add(&df[i][k].checked_mul(&m[k][j]).ok()?).ok()?;
                    }
                    row.push(
                        identity_interval::<S>(i, j)
                            .checked_add(&span.checked_mul(&sum).ok()?)
                            .ok()?,
                    );
                }
                out.push(row);
            }
            Some(out)
        };

        let base: Matrix<S> = (0..n)
            .map(|i| (0..n).map(|j| identity_interval(i, j)).collect())
            .collect();
        let seed = picard(&base).ok_or(ReachError::EnclosureFailure)?;
        let mut pad = scalar::<S>(1e-6);
        for _ in 0..PICARD_ITERATIONS {
            let candidate: Matrix<S> = seed
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|iv| iv.widen(pad + scalar::<S>(0.1) * iv.width()))
                        .collect()
                })
                .collect();
            if let Some(image) = picard(&candidate) {
                let contained = candidate.iter().zip(image.iter()).all(|(crow, irow)| {
                    crow.iter().zip(irow.iter()).all(|(c, i)| c.contains(i))
                });
                if contained {
                    return Ok(image);
                }
            }
            pad = pad + pad;
        }
        Err(ReachError::EnclosureFailure)
    }

    /// Taylor coefficients `lie[k]/k!` for `k in 1..order` over `at`, plus
    /// the remainder `lie[order]/order!` over `rem_at`.
    fn coefficients(
        &self,
        system: &System<S>,
        at: &[Interval<S>],
        rem_at: &[Interval<S>],
    ) -> Result<CoefficientTable<S>, ReachError> {
        let n = system.dims;
        let mut coeffs = Vec::with_capacity(self.order.saturating_sub(1));
        for k in 1..self.order {
            let mut level = Vec::with_capacity(n);
            for i in 0..n {
                level.push(
                    system.lie[k][i]
                        .eval_interval(at)?
                        .checked_mul(&self.inv_fact[k])?,
                );
            }
            coeffs.push(level);
        }
        let mut rem = Vec::with_capacity(n);
        for i in 0..n {
            rem.push(
                system.lie[self.order][i]
                    .eval_interval(rem_at)?
                    .checked_mul(&self.inv_fact[self.order])?,
            );
        }
        Ok((coeffs, rem))
    }

    /// Horner evaluation `a0 + T*(a1 + T*(... + T*rem))` per dimension.
    fn horner(
        a0: &[Interval<S>],
        coeffs: &[Vec<Interval<S>>],
        rem: &[Interval<S>],
        t: &Interval<S>,
    ) -> Result<Vec<Interval<S>>, ReachError> {
        let n = a0.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let mut acc = rem[i];
            for level in coeffs.iter().rev() {
                acc = level[i].checked_add(&t.checked_mul(&acc)?)?;
            }
            out.push(a0[i].checked_add(&t.checked_mul(&acc)?)?);
        }
        Ok(out)
    }

    /// Jacobian Taylor coefficients `D lie[k]/k!` over `at`, plus the
    /// remainder `D lie[order](rem_at) · M / order!`.
    fn jacobian_coefficients(
        &self,
        system: &System<S>,
        at: &[Interval<S>],
        rem_at: &[Interval<S>],
        m_enc: &Matrix<S>,
    ) -> Result<(Vec<Matrix<S>>, Matrix<S>), ReachError> {
        let n = system.dims;
        let mut coeffs = Vec::with_capacity(self.order.saturating_sub(1));
        for k in 1..self.order {
            let mut level = Vec::with_capacity(n);
            for i in 0..n {
                let mut row = Vec::with_capacity(n);
                for j in 0..n {
                    row.push(
                        system.jac[k][i][j]
                            .eval_interval(at)?
                            .checked_mul(&self.inv_fact[k])?,
                    );
                }
                level.push(row);
            }
            coeffs.push(level);
        }
        let mut rem = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let mut sum = Interval::zero();
                for k in 0..n {
                    let dl = system.jac[self.order][i][k].eval_interval(rem_at)?;
                    sum = sum.checked_add(&dl.checked_mul(&m_enc[k][j])?)?;
                }
                row.push(sum.checked_mul(&self.inv_fact[self.order])?);
            }
            rem.push(row);
        }
        Ok((coeffs, rem))
    }

    /// Horner evaluation of the Jacobian series `I + T*(A1 + T*(...))`.
    fn horner_jacobian(
        coeffs: &[Matrix<S>],
        rem: &Matrix<S>,
        t: &Interval<S>,
    ) -> Result<Matrix<S>, ReachError> {
        let n = rem.len();
        let mut acc = rem.clone();
        for level in coeffs.iter().rev() {
            for i in 0..n {
                for j in 0..n {
                    acc[i][j] = level[i][j].checked_add(&t.checked_mul(&acc[i][j])?)?;
                }
            }
        }
        for (i, row) in acc.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = identity_interval::<S>(i, j).checked_add(&t.checked_mul(entry)?)?;
            }
        }
        Ok(acc)
    }

    fn mat_mul(a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>, ReachError> {
        let rows = a.len();
        let inner = b.len();
        let cols = b[0].len();
        let mut out = vec![vec![Interval::zero(); cols]; rows];
        for i in 0..rows {
            for j in 0..cols {
                let mut sum = Interval::zero();
                for k in 0..inner {
                    sum = sum.checked_add(&a[i][k].checked_mul(&b[k][j])?)?;
                }
                out[i][j] = sum;
            }
        }
        Ok(out)
    }

    fn mat_vec(a: &Matrix<S>, v: &[Interval<S>]) -> Result<Vec<Interval<S>>, ReachError> {
        let mut out = Vec::with_capacity(a.len());
        for row in a {
            let mut sum = Interval::zero();
            for (entry, x) in row.iter().zip(v.iter()) {
                sum = sum.checked_add(&entry.checked_mul(x)?)?;
            }
            out.push(sum);
        }
        Ok(out)
    }

    fn add_vecs(a: &[Interval<S>], b: &[Interval<S>]) -> Result<Vec<Interval<S>>, ReachError> {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.checked_add(y).map_err(ReachError::from))
            .collect()
    }

    /// One Lohner micro-step: returns the updated state. `deviation` is the
    /// fixed initial deviation; `center`/`transport` carry the affine set
    /// `center ⊕ transport·deviation`. `current` is the (possibly tighter)
    /// box enclosure of the same set.
    #[allow(clippy::too_many_arguments)]
    fn lohner_step(
        &self,
        system: &System<S>,
        params: &[Interval<S>],
        h: S,
        current: &BoxRegion<S>,
        center: &BoxRegion<S>,
        transport: &Matrix<S>,
        deviation: &[Interval<S>],
    ) -> Result<LohnerStep<S>, ReachError> {
        let enclosure = self.apriori_system(system, current, params, h)?;
        let m_enc = self.variational_system(system, &enclosure, params, h)?;

        let full_now = system.extend(current, params);
        let full_encl = system.extend(&enclosure, params);
        let center_mid = center.midpoint();
        let center_mid_box: BoxRegion<S> =
            center_mid.iter().map(|&x| Interval::point(x)).collect();
        let full_mid = system.extend(&center_mid_box, params);

        let t_end = Interval::point(h);
        let t_seg = Interval::new(S::zero(), h);

        let (coeff_now, rem) = self.coefficients(system, &full_now, &full_encl)?;
        let (coeff_mid, _) = self.coefficients(system, &full_mid, &full_encl)?;
        let (jac_coeff, jac_rem) =
            self.jacobian_coefficients(system, &full_now, &full_encl, &m_enc)?;

        let direct_end = Self::horner(&full_now[..system.dims], &coeff_now, &rem, &t_end)?;
        let direct_seg = Self::horner(&full_now[..system.dims], &coeff_now, &rem, &t_seg)?;
        let centered_end = Self::horner(&full_mid[..system.dims], &coeff_mid, &rem, &t_end)?;
        let centered_seg = Self::horner(&full_mid[..system.dims], &coeff_mid, &rem, &t_seg)?;
        let jac_end = Self::horner_jacobian(&jac_coeff, &jac_rem, &t_end)?;
        let jac_seg = Self::horner_jacobian(&jac_coeff, &jac_rem, &t_seg)?;

        // Deviation of the center box around its own midpoint.
        let center_dev: Vec<Interval<S>> = (0..system.dims)
            .map(|i| center[i].checked_sub(&Interval::point(center_mid[i])))
            .collect::<Result<_, _>>()?;

        let next_center = Self::add_vecs(&centered_end, &Self::mat_vec(&jac_end, &center_dev)?)?;
        let next_transport = Self::mat_mul(&jac_end, transport)?;
        let lohner_end =
            Self::add_vecs(&next_center, &Self::mat_vec(&next_transport, deviation)?)?;

        let seg_center = Self::add_vecs(&centered_seg, &Self::mat_vec(&jac_seg, &center_dev)?)?;
        let seg_transport = Self::mat_mul(&jac_seg, transport)?;
        let lohner_seg =
            Self::add_vecs(&seg_center, &Self::mat_vec(&seg_transport, deviation)?)?;

        let mut segment = Vec::with_capacity(system.dims);
        let mut next = Vec::with_capacity(system.dims);
        for i in 0..system.dims {
            let seg = direct_seg[i]
                .intersect(&lohner_seg[i])
                .and_then(|iv| iv.intersect(&enclosure[i]))
                .ok_or(ReachError::EnclosureFailure)?;
            let end = direct_end[i]
                .intersect(&lohner_end[i])
                .and_then(|iv| iv.intersect(&seg))
                .ok_or(ReachError::EnclosureFailure)?;
            segment.push(seg);
            next.push(end);
        }
        Ok(LohnerStep {
            segment: BoxRegion::new(segment),
            next: BoxRegion::new(next),
            next_center: BoxRegion::new(next_center),
            next_transport,
        })
    }

    /// Searches a box `B` with `start + [0,h]*f(B, u) ⊆ B`, so every
    /// trajectory from `start` under the held input stays in `B` for the
    /// whole micro-step.
    pub fn apriori_enclosure(
        &self,
        start: &BoxRegion<S>,
        input: &[Interval<S>],
        h: S,
    ) -> Result<BoxRegion<S>, ReachError> {
        self.apriori_system(&self.raw, start, input, h)
    }

    /// One validated Taylor micro-step from `start` under the held input.
    ///
    /// Returns `(enclosure over [0,h], enclosure at exactly h)`; both are
    /// guaranteed enclosures and the end box is contained in the segment.
    pub fn taylor_step(
        &self,
        start: &BoxRegion<S>,
        input: &[Interval<S>],
        h: S,
    ) -> Result<(BoxRegion<S>, BoxRegion<S>), ReachError> {
        let d = self.raw.dims;
        let mid = start.midpoint();
        let center: BoxRegion<S> = mid.iter().map(|&x| Interval::point(x)).collect();
        let deviation: Vec<Interval<S>> = (0..d)
            .map(|i| start[i].checked_sub(&Interval::point(mid[i])))
            .collect::<Result<_, _>>()?;
        let transport: Matrix<S> = (0..d)
            .map(|i| (0..d).map(|j| identity_interval(i, j)).collect())
            .collect();
        let step = self.lohner_step(
            &self.raw, input, h, start, &center, &transport, &deviation,
        )?;
        Ok((step.segment, step.next))
    }

    fn time_point(&self, i: usize) -> S {
        if i == 0 {
            S::zero()
        } else if i == self.steps {
            self.model.period
        } else {
            self.model.period * scalar(i as f64) / scalar(self.steps as f64)
        }
    }

    fn project(region: &BoxRegion<S>, dims: usize) -> BoxRegion<S> {
        region.intervals()[..dims].iter().copied().collect()
    }

    /// Guaranteed flowpipe over one sampling period under event `e`.
    pub fn flowpipe(
        &self,
        start: &BoxRegion<S>,
        event: MissEvent,
    ) -> Result<Flowpipe<S>, ReachError> {
        let d = self.model.state_dim;
        let q = self.model.input_dim;
        debug_assert_eq!(start.dim(), d);

        // Assemble the initial Lohner state for the chosen event.
        let (system, params, mut current): (&System<S>, Vec<Interval<S>>, BoxRegion<S>) =
            match (event, &self.closed) {
                (MissEvent::Meet, Some(closed)) => {
                    let mut dims = start.intervals().to_vec();
                    dims.extend_from_slice(start.intervals());
                    (closed, Vec::new(), BoxRegion::new(dims))
                }
                // Missed deadline: zero input. Autonomous models behave
                // identically for both events.
                _ => (
                    &self.raw,
                    vec![Interval::zero(); q],
                    start.clone(),
                ),
            };

        let n = system.dims;
        let mid = start.midpoint();
        let deviation: Vec<Interval<S>> = (0..d)
            .map(|i| start[i].checked_sub(&Interval::point(mid[i])))
            .collect::<Result<_, _>>()?;
        // For the augmented system both the x- and z-blocks vary with the
        // same initial deviation: stack two identity blocks.
        let mut transport: Matrix<S> = vec![vec![Interval::zero(); d]; n];
        for block in 0..(n / d) {
            for j in 0..d {
                transport[block * d + j][j] = Interval::point(S::one());
            }
        }
        let mut center: BoxRegion<S> = (0..n)
            .map(|i| Interval::point(mid[i % d]))
            .collect();

        let mut segments = Vec::with_capacity(self.steps);
        for i in 0..self.steps {
            let step = self.lohner_step(
                system,
                &params,
                self.step,
                &current,
                &center,
                &transport,
                &deviation,
            )?;
            let span = Interval::new(self.time_point(i), self.time_point(i + 1));
            segments.push((span, Self::project(&step.segment, d)));
            current = step.next;
            center = step.next_center;
            transport = step.next_transport;
        }
        Ok(Flowpipe {
            segments,
            end_box: Self::project(&current, d),
            event,
        })
    }
}

struct LohnerStep<S> {
    segment: BoxRegion<S>,
    next: BoxRegion<S>,
    next_center: BoxRegion<S>,
    next_transport: Matrix<S>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;

    fn model(text: &str) -> Model<f64> {
        parse_model(text).unwrap()
    }

    fn unit_box(lo: f64, hi: f64) -> BoxRegion<f64> {
        BoxRegion::new(vec![Interval::new(lo, hi)])
    }

    #[test]
    fn control_input_interval() {
        let m = model(
            "2 1 50\nx1 x2 u\nx2\n-0.1 * x2 + u\n-0.375 * x1 - 1.15 * x2\n0.2 0.01\n2 5\n-3 3\n-3 3\n-1 1\n-1 1",
        );
        let engine = ReachEngine::new(&m, 4).unwrap();
        let start = BoxRegion::new(vec![Interval::new(-1.0, 1.0), Interval::new(-1.0, 1.0)]);
        let u = engine.control_input(&start).unwrap();
        assert_eq!(u.len(), 1);
        assert!(u[0].lo <= -1.525 && 1.525 <= u[0].hi);
        assert!(u[0].width() <= 3.05 + 1e-9);
    }

    #[test]
    fn control_input_empty_for_autonomous() {
        let m = model("1 0 4\nx\n0 - x\n0.2 0.01\n0 1\n-1 1\n-1 1");
        let engine = ReachEngine::new(&m, 4).unwrap();
        assert!(engine.control_input(&unit_box(0.0, 1.0)).unwrap().is_empty());
    }

    #[test]
    fn control_input_projection() {
        let m = model(
            "2 1 10\nx1 x2 u\nx2\nu\nx1\n0.2 0.01\n0 1\n-3 3\n-3 3\n-1 1\n-1 1",
        );
        let engine = ReachEngine::new(&m, 4).unwrap();
        let start = BoxRegion::new(vec![Interval::new(2.0, 3.0), Interval::new(0.0, 1.0)]);
        let u = engine.control_input(&start).unwrap();
        assert!(u[0].lo <= 2.0 && 3.0 <= u[0].hi && u[0].width() <= 1.0 + 1e-12);
    }

    #[test]
    fn apriori_fixed_point_for_zero_field() {
        let m = model("1 0 4\nx\n0\n0.2 0.01\n0 1\n-1 1\n-1 1");
        let engine = ReachEngine::new(&m, 4).unwrap();
        let b = engine
            .apriori_enclosure(&unit_box(0.25, 0.5), &[], 0.01)
            .unwrap();
        assert!(b.contains(&unit_box(0.25, 0.5)));
        assert!(b[0].width() <= 0.25 + 1e-3);
    }

    #[test]
    fn apriori_decay_verifies() {
        let m = model("1 0 4\nx\n0 - x\n0.2 0.1\n0 1\n-4 4\n-1 1");
        let engine = ReachEngine::new(&m, 4).unwrap();
        let start = unit_box(1.0, 2.0);
        let b = engine.apriori_enclosure(&start, &[], 0.1).unwrap();
        // The returned box must satisfy the Picard containment test.
        let f = b[0].neg();
        let image = start[0]
            .checked_add(&Interval::new(0.0, 0.1).checked_mul(&f).unwrap())
            .unwrap();
        assert!(b[0].contains(&image));
    }

    #[test]
    fn apriori_blowup_fails() {
        let m = model("1 0 4\nx\nx^2\n1 1\n0 1\n-200 200\n-1 1");
        let engine = ReachEngine::new(&m, 4).unwrap();
        let r = engine.apriori_enclosure(&unit_box(100.0, 100.0), &[], 1.0);
        assert_eq!(r, Err(ReachError::EnclosureFailure));
    }

    #[test]
    fn taylor_step_stationary() {
        let m = model("1 0 4\nx\n0\n0.2 0.01\n0 1\n-1 1\n-1 1");
        for order in [1, 4, 8] {
            let engine = ReachEngine::new(&m, order).unwrap();
            let (seg, end) = engine.taylor_step(&unit_box(0.5, 0.6), &[], 0.01).unwrap();
            assert!(end[0].lo <= 0.5 && 0.6 <= end[0].hi);
            assert!(end[0].width() <= 0.1 + 1e-9);
            assert!(seg[0].contains(&end[0]));
        }
    }

    #[test]
    fn taylor_step_exponential_decay_point() {
        let m = model("1 0 4\nx\n0 - x\n0.2 0.1\n0 1\n-4 4\n-1 1");
        let engine = ReachEngine::new(&m, 4).unwrap();
        let (_, end) = engine.taylor_step(&unit_box(1.0, 1.0), &[], 0.1).unwrap();
        let exact = (-0.1f64).exp();
        assert!(end[0].contains_point(exact));
        assert!(end[0].width() <= 1e-5);
    }

    #[test]
    fn taylor_step_exponential_decay_box() {
        let m = model("1 0 4\nx\n0 - x\n0.2 0.2\n0 1\n-4 4\n-1 1");
        let engine = ReachEngine::new(&m, 4).unwrap();
        let (_, end) = engine.taylor_step(&unit_box(1.0, 2.0), &[], 0.2).unwrap();
        let lo = (-0.2f64).exp();
        let hi = 2.0 * (-0.2f64).exp();
        assert!(end[0].lo <= lo && hi <= end[0].hi);
        // The mean-value form keeps the image close to the exact width.
        assert!(end[0].width() <= (hi - lo) * 1.1);
    }

    #[test]
    fn flowpipe_stationary_segments() {
        let m = model("1 0 4\nx\n0\n0.2 0.01\n0 1\n-1 1\n-1 1");
        let engine = ReachEngine::new(&m, 4).unwrap();
        for event in MissEvent::BOTH {
            let fp = engine.flowpipe(&unit_box(0.5, 0.6), event).unwrap();
            assert_eq!(fp.segments.len(), 20);
            for (_, seg) in &fp.segments {
                assert!(seg[0].lo <= 0.5 && 0.6 <= seg[0].hi);
                assert!(seg[0].width() <= 0.1 + 1e-6);
            }
            assert!(fp.end_box[0].lo <= 0.5 && 0.6 <= fp.end_box[0].hi);
        }
    }

    #[test]
    fn flowpipe_segments_tile_period() {
        let m = model("1 0 4\nx\n0 - x\n0.2 0.01\n0 1\n-4 4\n-1 1");
        let engine = ReachEngine::new(&m, 4).unwrap();
        let fp = engine.flowpipe(&unit_box(1.0, 1.5), MissEvent::Meet).unwrap();
        assert_eq!(fp.segments.len(), 20);
        assert_eq!(fp.segments[0].0.lo, 0.0);
        assert_eq!(fp.segments.last().unwrap().0.hi, 0.2);
        for w in fp.segments.windows(2) {
            assert_eq!(w[0].0.hi, w[1].0.lo);
            assert!((w[0].0.width() - 0.01).abs() < 1e-12);
        }
        let last = &fp.segments.last().unwrap().1;
        assert!(last.contains(&fp.end_box));
    }

    #[test]
    fn held_input_correlation_is_kept() {
        // Closed loop x' = -x via u = -x held from the sampled point: after
        // one period every trajectory is x0*(1 - period-contraction-ish);
        // the coupled enclosure must stay near the exact image width while
        // an uncoupled hold would more than double it.
        let m = model("1 1 10\nx u\nu\n-1 * x\n0.2 0.01\n0 1\n-3 3\n-1 1");
        let engine = ReachEngine::new(&m, 4).unwrap();
        let start = unit_box(1.0, 1.2);
        let fp = engine.flowpipe(&start, MissEvent::Meet).unwrap();
        // Exact: x(δ) = x0 (1 - δ) for the held input u = -x0.
        let exact_lo = 1.0 * (1.0 - 0.2);
        let exact_hi = 1.2 * (1.0 - 0.2);
        assert!(fp.end_box[0].lo <= exact_lo && exact_hi <= fp.end_box[0].hi);
        assert!(fp.end_box[0].width() <= (exact_hi - exact_lo) * 1.2);
    }

    #[test]
    fn flowpipe_determinism() {
        let m = model(
            "2 1 50\nx1 x2 u\nx2\n-0.1 * x2 + u\n-0.375 * x1 - 1.15 * x2\n0.2 0.01\n2 5\n-3 3\n-3 3\n-1 1\n-1 1",
        );
        let engine = ReachEngine::new(&m, 4).unwrap();
        let start = BoxRegion::new(vec![Interval::new(0.3, 0.42), Interval::new(-0.12, 0.0)]);
        let a = engine.flowpipe(&start, MissEvent::Meet).unwrap();
        let b = engine.flowpipe(&start, MissEvent::Meet).unwrap();
        assert_eq!(a, b);
    }
}
