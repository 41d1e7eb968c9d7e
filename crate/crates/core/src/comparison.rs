//! Monotone iteration, the renewal iteration for the boundary value, and
//! sub/supersolution and sandwich checks.
//!
//! The discrete fixed-point map works on a candidate trajectory `v` over a
//! window of steps starting from a fixed state `x`:
//!
//! ```text
//! u^0 = x
//! u^{n+1}_j = e u^n_{j-1} + (K_j(v^n) - e I) v^n_{j-1},   e = exp(-gamma da)
//! u^{n+1}_0 = boundary map evaluated on v^{n+1}
//! ```
//!
//! with the scalar compartments advanced from `v^n`. A fixed point of this
//! map is exactly the directly stepped trajectory, and the map preserves
//! order whenever `K_j >= e I` entrywise and the boundary map and scalar
//! update are monotone (frozen linear models).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::{AgeGrid, AgeProfile, ORDER_TOL_FACTOR};
use crate::error::{Error, Result};
use crate::sir::SirParams;
use crate::trajectory::{CharacteristicModel, ModelState, Trajectory};

/// Relative stopping threshold on the sup-norm gap between iterates.
pub const GAP_TOL: f64 = 1e-10;
/// Consecutive growing gaps that count as non-contraction.
pub const DIVERGENCE_RUN: usize = 5;
const GAMMA_SAMPLES: usize = 32;

/// Ordering of one iterate against the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderVerdict {
    Increasing,
    Decreasing,
    Equal,
    Unordered,
}

impl OrderVerdict {
    pub fn is_ordered(self) -> bool {
        self != OrderVerdict::Unordered
    }
}

fn verdict_of(prev: &[f64], next: &[f64], tol: f64) -> OrderVerdict {
    let up = prev.iter().zip(next).all(|(a, b)| *a <= b + tol);
    let down = prev.iter().zip(next).all(|(a, b)| *b <= a + tol);
    match (up, down) {
        (true, true) => OrderVerdict::Equal,
        (true, false) => OrderVerdict::Increasing,
        (false, true) => OrderVerdict::Decreasing,
        (false, false) => OrderVerdict::Unordered,
    }
}

fn flatten<S: ModelState>(states: &[S]) -> Vec<f64> {
    let mut out = Vec::new();
    for s in states {
        out.extend(s.scalars());
        out.extend_from_slice(s.profile().values());
    }
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn order_tol(a: &[f64], b: &[f64]) -> f64 {
    ORDER_TOL_FACTOR * (1.0 + max_abs(a).max(max_abs(b)))
}

#[derive(Debug, Clone)]
pub struct IterateOptions {
    /// Shift `gamma`; the model's suggestion when absent.
    pub gamma: Option<f64>,
    /// Iteration cap per window.
    pub max_iter: usize,
    pub keep_iterates: bool,
    /// Seed for the sampled order check of `gamma`.
    pub seed: u64,
}

impl Default for IterateOptions {
    fn default() -> Self {
        IterateOptions {
            gamma: None,
            max_iter: 500,
            keep_iterates: false,
            seed: 0,
        }
    }
}

/// One stored iterate restricted to its window.
#[derive(Debug, Clone)]
pub struct WindowIterate<S> {
    pub window: usize,
    pub start_step: usize,
    pub states: Vec<S>,
}

#[derive(Debug, Clone)]
pub struct IterationReport<S> {
    pub fixed_point: Trajectory<S>,
    pub iterates: Vec<WindowIterate<S>>,
    /// Verdict for every consecutive pair, the starting candidate included.
    pub monotone_flags: Vec<OrderVerdict>,
    pub converged: bool,
    pub final_gap: f64,
    pub iterations: usize,
    pub windows: usize,
    /// Windows that were split after non-contraction.
    pub window_splits: usize,
    pub gamma: f64,
    /// Whether the sampled order check of the shifted source passed.
    pub gamma_verified: bool,
}

impl<S> IterationReport<S> {
    pub fn all_increasing(&self) -> bool {
        self.monotone_flags
            .iter()
            .all(|f| matches!(f, OrderVerdict::Increasing | OrderVerdict::Equal))
    }

    pub fn all_decreasing(&self) -> bool {
        self.monotone_flags
            .iter()
            .all(|f| matches!(f, OrderVerdict::Decreasing | OrderVerdict::Equal))
    }
}

/// Every step holds the same state.
pub fn constant_candidate<S: ModelState>(state: &S, grid: AgeGrid, horizon: f64) -> Result<Vec<S>> {
    let steps = grid.steps_for(horizon)?;
    Ok(vec![state.clone(); steps + 1])
}

/// Transport of the model's initial profile with zero inflow, scalars
/// advanced by the model. A subsolution for frozen models with a
/// nonnegative boundary map.
pub fn transport_candidate<M: CharacteristicModel>(model: &M, horizon: f64) -> Result<Vec<M::State>> {
    let steps = model.grid().steps_for(horizon)?;
    let dim = model.dim();
    let mut out = vec![model.initial().clone()];
    for _ in 0..steps {
        let old = out.last().expect("nonempty");
        let scalars = model.advance_scalars(old);
        let props = model.cell_propagators(old);
        let profile = crate::trajectory::propagate(old.profile(), &props, dim);
        out.push(M::State::from_parts(&scalars, profile));
    }
    Ok(out)
}

/// `(K_j(v) - e I) v_{j-1}` at every node `j >= 1`.
fn shifted_source<M: CharacteristicModel>(model: &M, v: &M::State, e: f64) -> Vec<f64> {
    let dim = model.dim();
    let props = model.cell_propagators(v);
    let grid = model.grid();
    let mut out = vec![0.0; grid.len() * dim];
    for j in 1..grid.len() {
        let k = &props[(j - 1) * dim * dim..j * dim * dim];
        let src = v.profile().at(j - 1);
        for r in 0..dim {
            let mut acc = -e * src[r];
            for c in 0..dim {
                acc += k[r * dim + c] * src[c];
            }
            out[j * dim + r] = acc;
        }
    }
    out
}

fn psi_window<M: CharacteristicModel>(model: &M, cand: &[M::State], e: f64) -> Vec<M::State> {
    let dim = model.dim();
    let grid = model.grid();
    let mut out = Vec::with_capacity(cand.len());
    out.push(cand[0].clone());
    for n in 0..cand.len() - 1 {
        let scalars = model.advance_scalars(&cand[n]);
        let source = shifted_source(model, &cand[n], e);
        let prev = out[n].profile();
        let mut profile = AgeProfile::zeros(grid, dim);
        for j in 1..grid.len() {
            let before = prev.at(j - 1).to_vec();
            let dst = profile.at_mut(j);
            for r in 0..dim {
                dst[r] = e * before[r] + source[j * dim + r];
            }
        }
        let head = model.boundary_value(&cand[n], &scalars, cand[n + 1].profile());
        profile.at_mut(0).copy_from_slice(&head);
        out.push(M::State::from_parts(&scalars, profile));
    }
    out
}

/// Sampled check that `v -> (K(v) - e I) v` preserves order on pairs within
/// the norm bound.
fn verify_gamma<M: CharacteristicModel>(model: &M, e: f64, norm_bound: f64, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = model.grid();
    let dim = model.dim();
    let base = model.initial().scalars();
    for _ in 0..GAMMA_SAMPLES {
        let lo: Vec<f64> = (0..grid.len() * dim)
            .map(|_| rng.gen::<f64>() * 0.5 * norm_bound)
            .collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + rng.gen::<f64>() * 0.5 * norm_bound).collect();
        let phi = M::State::from_parts(&base, AgeProfile::new(grid, dim, lo).expect("shape"));
        let psi = M::State::from_parts(&base, AgeProfile::new(grid, dim, hi).expect("shape"));
        let a = shifted_source(model, &phi, e);
        let b = shifted_source(model, &psi, e);
        let tol = order_tol(&a, &b);
        if a.iter().zip(&b).any(|(x, y)| *x > y + tol) {
            return false;
        }
    }
    true
}

/// Iterates the discrete fixed-point map from the candidate `v0`
/// (one state per step up to `horizon`), window by window.
///
/// Windows span `max(1, floor(1 / (2 gamma da)))` steps. A window whose gap
/// grows [`DIVERGENCE_RUN`] times in a row is halved and restarted; at a
/// single step the divergence error is returned.
pub fn monotone_iterate<M: CharacteristicModel>(
    model: &M,
    v0: &[M::State],
    horizon: f64,
    opts: &IterateOptions,
) -> Result<IterationReport<M::State>> {
    let grid = model.grid();
    let steps = grid.steps_for(horizon)?;
    if v0.len() != steps + 1 {
        return Err(Error::invalid(format!(
            "candidate has {} states, horizon needs {}",
            v0.len(),
            steps + 1
        )));
    }
    for s in v0 {
        s.profile().grid().ensure_same(&grid)?;
    }
    let h = grid.da();
    let gamma = opts.gamma.unwrap_or_else(|| model.suggested_gamma());
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be nonnegative, got {gamma}")));
    }
    let e = (-gamma * h).exp();
    let norm_bound = 2.0 * v0.iter().map(|s| s.profile().max_abs()).fold(1.0, f64::max);
    let gamma_verified = verify_gamma(model, e, norm_bound, opts.seed);
    if !gamma_verified {
        log::info!("gamma = {gamma} not certified by sampling");
    }

    let full_window = if gamma * h > 0.0 {
        ((1.0 / (2.0 * gamma * h)).floor() as usize).max(1)
    } else {
        steps.max(1)
    };

    let mut states = vec![model.initial().clone()];
    let mut report = IterationReport {
        fixed_point: Trajectory {
            grid,
            states: Vec::new(),
            diagnostics: Vec::new(),
        },
        iterates: Vec::new(),
        monotone_flags: Vec::new(),
        converged: true,
        final_gap: 0.0,
        iterations: 0,
        windows: 0,
        window_splits: 0,
        gamma,
        gamma_verified,
    };

    let mut start = 0;
    let mut width = full_window;
    while start < steps {
        let w = width.min(steps - start);
        let x = states.last().expect("nonempty").clone();
        let mut cand: Vec<M::State> = v0[start..=start + w].to_vec();
        cand[0] = x;
        let mut flags = Vec::new();
        let mut kept = Vec::new();
        let mut gaps: Vec<f64> = Vec::new();
        let mut growing = 0;
        let mut converged = false;
        let mut diverged = false;
        let mut iters = 0;
        if opts.keep_iterates {
            kept.push(WindowIterate {
                window: report.windows,
                start_step: start,
                states: cand.clone(),
            });
        }
        while iters < opts.max_iter {
            let next = psi_window(model, &cand, e);
            iters += 1;
            let a = flatten(&cand);
            let b = flatten(&next);
            flags.push(verdict_of(&a, &b, order_tol(&a, &b)));
            let gap = a.iter().zip(&b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()));
            if opts.keep_iterates {
                kept.push(WindowIterate {
                    window: report.windows,
                    start_step: start,
                    states: next.clone(),
                });
            }
            if let Some(&last) = gaps.last() {
                growing = if gap > last { growing + 1 } else { 0 };
            }
            gaps.push(gap);
            cand = next;
            if !gap.is_finite() || growing >= DIVERGENCE_RUN {
                diverged = true;
                break;
            }
            if gap <= GAP_TOL * (1.0 + max_abs(&b)) {
                converged = true;
                break;
            }
        }
        if diverged {
            if w > 1 {
                width = (w / 2).max(1);
                report.window_splits += 1;
                continue;
            }
            return Err(Error::Divergence {
                iteration: report.iterations + iters,
                window_start: start,
                gaps: gaps.iter().rev().take(DIVERGENCE_RUN + 1).rev().copied().collect(),
            });
        }
        report.iterations += iters;
        report.windows += 1;
        report.monotone_flags.extend(flags);
        report.iterates.extend(kept);
        report.converged &= converged;
        report.final_gap = report.final_gap.max(*gaps.last().unwrap_or(&0.0));
        states.extend(cand.into_iter().skip(1));
        start += w;
    }

    let mut dropped = 0.0;
    let mut diagnostics = Vec::with_capacity(states.len());
    for (n, s) in states.iter().enumerate() {
        if n > 0 {
            dropped += h * states[n - 1].profile().at(grid.n_cells()).iter().sum::<f64>();
        }
        diagnostics.push(crate::trajectory::diagnostics_for(model, s, n, dropped));
    }
    report.fixed_point = Trajectory {
        grid,
        states,
        diagnostics,
    };
    Ok(report)
}

/// Iterates of the renewal map for the boundary value at frozen `S_+`.
#[derive(Debug, Clone, Serialize)]
pub struct VolterraReport {
    pub iterates: Vec<Vec<f64>>,
    pub monotone_flags: Vec<OrderVerdict>,
    pub converged: bool,
    pub final_gap: f64,
    /// Exact solution of the discrete renewal equation.
    pub limit: Vec<f64>,
}

/// `n_iter` applications of
///
/// ```text
/// B_n <- eta S_+ ( w_0 beta_0 B_n + sum_{j=1}^{n-1} w_j beta_j P_j B_{n-j} + f_n ),  n >= 1
/// ```
///
/// starting from `b0` (one value per step), where `P_j` is the cumulative
/// survival to node `j` and `f_n` the contribution of the transported
/// initial data. `B_0 = i0(0)` is kept fixed.
pub fn volterra_iterate_b(
    i0: &AgeProfile,
    s_plus: f64,
    p: &SirParams,
    g: &AgeGrid,
    horizon: f64,
    n_iter: usize,
    b0: &[f64],
) -> Result<VolterraReport> {
    p.grid().ensure_same(g)?;
    i0.ensure_compatible(&p.beta)?;
    let steps = g.steps_for(horizon)?;
    if b0.len() != steps + 1 {
        return Err(Error::invalid(format!(
            "starting boundary trace has {} values, horizon needs {}",
            b0.len(),
            steps + 1
        )));
    }
    let n_nodes = g.n_cells();
    let surv = p.survival();
    let cum = surv.cumulative();
    let kernel: Vec<f64> = (0..g.len()).map(|j| g.weight(j) * p.beta.get(j, 0)).collect();
    let scale = p.eta * s_plus;

    // forcing by the initial data transported with zero inflow
    let mut forcing = vec![0.0; steps + 1];
    let mut moved = i0.values().to_vec();
    for f in forcing.iter_mut().skip(1) {
        for j in (1..=n_nodes).rev() {
            moved[j] = surv.factor(j) * moved[j - 1];
        }
        moved[0] = 0.0;
        *f = (0..=n_nodes).map(|j| kernel[j] * moved[j]).sum();
    }

    let apply = |b: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; steps + 1];
        out[0] = i0.get(0, 0);
        for n in 1..=steps {
            let memory: f64 = (1..n.min(n_nodes + 1)).map(|j| kernel[j] * cum[j] * b[n - j]).sum();
            out[n] = scale * (kernel[0] * b[n] + memory + forcing[n]);
        }
        out
    };

    let mut limit = vec![0.0; steps + 1];
    limit[0] = i0.get(0, 0);
    let denom = 1.0 - scale * kernel[0];
    if denom <= 0.0 {
        return Err(Error::StepSize {
            coupling: scale * kernel[0],
            da: g.da(),
            suggested_da: 0.5 * g.da() / (scale * kernel[0]),
        });
    }
    for n in 1..=steps {
        let memory: f64 = (1..n.min(n_nodes + 1)).map(|j| kernel[j] * cum[j] * limit[n - j]).sum();
        limit[n] = scale * (memory + forcing[n]) / denom;
    }

    let mut iterates = vec![b0.to_vec()];
    let mut flags = Vec::with_capacity(n_iter);
    let mut final_gap = 0.0;
    for _ in 0..n_iter {
        let prev = iterates.last().expect("nonempty");
        let next = apply(prev);
        flags.push(verdict_of(prev, &next, order_tol(prev, &next)));
        final_gap = prev.iter().zip(&next).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        iterates.push(next);
    }
    let last = iterates.last().expect("nonempty");
    Ok(VolterraReport {
        converged: final_gap <= GAP_TOL * (1.0 + max_abs(last)),
        iterates,
        monotone_flags: flags,
        final_gap,
        limit,
    })
}

/// Where a check is tightest.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Location {
    pub step: usize,
    pub t: f64,
    /// Age of the node, absent for scalar compartments.
    pub a: Option<f64>,
    pub component: String,
}

/// Worst margin of one family of inequalities; negative means violated.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintMargin {
    pub constraint: String,
    pub worst_margin: f64,
    pub location: Option<Location>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionCheck {
    pub passed: bool,
    pub constraints: Vec<ConstraintMargin>,
    /// The most violated constraint, when the check fails.
    pub violation: Option<ConstraintMargin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Sub,
    Super,
}

struct MarginTracker {
    constraint: &'static str,
    worst: f64,
    location: Option<Location>,
}

impl MarginTracker {
    fn new(constraint: &'static str) -> Self {
        MarginTracker {
            constraint,
            worst: f64::INFINITY,
            location: None,
        }
    }

    fn record(&mut self, margin: f64, loc: impl FnOnce() -> Location) {
        if margin < self.worst {
            self.worst = margin;
            self.location = Some(loc());
        }
    }

    fn finish(self) -> ConstraintMargin {
        ConstraintMargin {
            constraint: self.constraint.to_string(),
            worst_margin: if self.worst.is_finite() { self.worst } else { 0.0 },
            location: self.location,
        }
    }
}

fn component_name<S: ModelState>(s: &S, scalar: Option<usize>, comp: usize) -> String {
    match scalar {
        Some(k) => s.scalar_names()[k].to_string(),
        None if s.profile().dim() == 1 => "i".to_string(),
        None => format!("u{comp}"),
    }
}

fn check_solution<M: CharacteristicModel>(model: &M, w: &[M::State], tol: f64, side: Side) -> Result<SolutionCheck> {
    let grid = model.grid();
    let dim = model.dim();
    let sign = if side == Side::Sub { 1.0 } else { -1.0 };
    for (n, s) in w.iter().enumerate() {
        s.profile().grid().ensure_same(&grid)?;
        if !s.profile().is_nonnegative(0.0) || s.scalars().iter().any(|v| *v < 0.0) {
            return Err(Error::Precondition(format!("candidate is negative at step {n}")));
        }
    }
    let Some(first) = w.first() else {
        return Err(Error::invalid("empty candidate"));
    };

    let mut initial = MarginTracker::new("initial");
    let mut interior = MarginTracker::new("interior");
    let mut boundary = MarginTracker::new("boundary");
    let mut scalars = MarginTracker::new("scalars");

    let x = model.initial();
    for (k, (a, b)) in first.scalars().iter().zip(x.scalars()).enumerate() {
        initial.record(sign * (b - a), || Location {
            step: 0,
            t: 0.0,
            a: None,
            component: component_name(first, Some(k), 0),
        });
    }
    for j in 0..grid.len() {
        for r in 0..dim {
            let m = sign * (x.profile().get(j, r) - first.profile().get(j, r));
            initial.record(m, || Location {
                step: 0,
                t: 0.0,
                a: Some(grid.node(j)),
                component: component_name(first, None, r),
            });
        }
    }

    for n in 0..w.len().saturating_sub(1) {
        let (old, new) = (&w[n], &w[n + 1]);
        let t = grid.time(n + 1);
        let adv = model.advance_scalars(old);
        for (k, (a, b)) in new.scalars().iter().zip(&adv).enumerate() {
            scalars.record(sign * (b - a), || Location {
                step: n + 1,
                t,
                a: None,
                component: component_name(new, Some(k), 0),
            });
        }
        let props = model.cell_propagators(old);
        for j in 1..grid.len() {
            let k = &props[(j - 1) * dim * dim..j * dim * dim];
            let src = old.profile().at(j - 1);
            for r in 0..dim {
                let rhs: f64 = (0..dim).map(|c| k[r * dim + c] * src[c]).sum();
                interior.record(sign * (rhs - new.profile().get(j, r)), || Location {
                    step: n + 1,
                    t,
                    a: Some(grid.node(j)),
                    component: component_name(new, None, r),
                });
            }
        }
        let head = model.boundary_value(old, new.scalars().as_slice(), new.profile());
        for (r, b) in head.iter().enumerate() {
            boundary.record(sign * (b - new.profile().get(0, r)), || Location {
                step: n + 1,
                t,
                a: Some(0.0),
                component: component_name(new, None, r),
            });
        }
    }

    let constraints: Vec<ConstraintMargin> = [initial, interior, boundary, scalars]
        .into_iter()
        .map(MarginTracker::finish)
        .collect();
    let violation = constraints
        .iter()
        .filter(|c| c.worst_margin < -tol)
        .min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))
        .cloned();
    Ok(SolutionCheck {
        passed: violation.is_none(),
        constraints,
        violation,
    })
}

/// Checks the discrete inequalities of a subsolution: `w^0 <= x`,
/// `w^{n+1}_j <= K_j(w^n) w^n_{j-1}`, the boundary value at most the
/// boundary map and the scalars at most their update, all within `tol`.
pub fn check_subsolution<M: CharacteristicModel>(model: &M, w: &[M::State], tol: f64) -> Result<SolutionCheck> {
    check_solution(model, w, tol, Side::Sub)
}

/// The reversed inequalities of [`check_subsolution`].
pub fn check_supersolution<M: CharacteristicModel>(model: &M, w: &[M::State], tol: f64) -> Result<SolutionCheck> {
    check_solution(model, w, tol, Side::Super)
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub passed: bool,
    pub tol: f64,
    /// `min (mid - lower)` over all steps, nodes and compartments.
    pub lower_margin: f64,
    pub lower_location: Option<Location>,
    /// `min (upper - mid)`.
    pub upper_margin: f64,
    pub upper_location: Option<Location>,
    /// `max(0, -lower_margin, -upper_margin)`.
    pub worst_violation: f64,
}

/// Checks `lower <= mid <= upper` on scalars and profiles at every step.
pub fn sandwich_verify<S: ModelState>(
    lower: &Trajectory<S>,
    mid: &Trajectory<S>,
    upper: &Trajectory<S>,
    tol: f64,
) -> Result<SandwichReport> {
    lower.grid.ensure_same(&mid.grid)?;
    upper.grid.ensure_same(&mid.grid)?;
    if lower.len() != mid.len() || upper.len() != mid.len() {
        return Err(Error::GridMismatch(format!(
            "trajectory lengths {}, {}, {} differ",
            lower.len(),
            mid.len(),
            upper.len()
        )));
    }
    let grid = mid.grid;
    let mut lo = MarginTracker::new("lower");
    let mut hi = MarginTracker::new("upper");
    for n in 0..mid.len() {
        let (l, m, u) = (&lower.states[n], &mid.states[n], &upper.states[n]);
        l.profile().ensure_compatible(m.profile())?;
        u.profile().ensure_compatible(m.profile())?;
        let t = grid.time(n);
        let (ls, ms, us) = (l.scalars(), m.scalars(), u.scalars());
        for k in 0..ms.len() {
            let loc = || Location {
                step: n,
                t,
                a: None,
                component: component_name(m, Some(k), 0),
            };
            lo.record(ms[k] - ls[k], loc);
            hi.record(us[k] - ms[k], loc);
        }
        let dim = m.profile().dim();
        for j in 0..grid.len() {
            for r in 0..dim {
                let loc = || Location {
                    step: n,
                    t,
                    a: Some(grid.node(j)),
                    component: component_name(m, None, r),
                };
                let mv = m.profile().get(j, r);
                lo.record(mv - l.profile().get(j, r), loc);
                hi.record(u.profile().get(j, r) - mv, loc);
            }
        }
    }
    let (lo, hi) = (lo.finish(), hi.finish());
    let worst_violation = 0.0f64.max(-lo.worst_margin).max(-hi.worst_margin);
    Ok(SandwichReport {
        passed: worst_violation <= tol,
        tol,
        lower_margin: lo.worst_margin,
        lower_location: lo.location,
        upper_margin: hi.worst_margin,
        upper_location: hi.location,
        worst_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::make_grid;
    use crate::sir::{sir_frozen_simulate, SirModel, SirState};

    fn frozen_setup(a_max: f64, n: usize) -> (AgeGrid, SirParams, AgeProfile) {
        let g = make_grid(a_max, n).unwrap();
        let p = SirParams::new(
            1.0,
            0.5,
            1.0,
            AgeProfile::constant(g, 1.0),
            AgeProfile::constant(g, 1.0),
            1.0,
        )
        .unwrap();
        let i0 = AgeProfile::from_fn(g, |a| if a < 1.0 { 1.0 } else { 0.0 });
        (g, p, i0)
    }

    #[test]
    fn zero_model_converges_immediately() {
        let (g, p, _) = frozen_setup(5.0, 50);
        let model = SirModel::frozen(p, AgeProfile::zeros(g, 1), 1.0).unwrap();
        let v0 = constant_candidate(model.initial(), g, 1.0).unwrap();
        let rep = monotone_iterate(&model, &v0, 1.0, &IterateOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.fixed_point.states.iter().all(|s| s.i.max_abs() == 0.0));
        assert!(rep.monotone_flags.iter().all(|f| *f == OrderVerdict::Equal));
    }

    #[test]
    fn fixed_point_equals_direct_stepping() {
        let (g, p, i0) = frozen_setup(5.0, 500);
        let model = SirModel::frozen(p.clone(), i0.clone(), 2.0).unwrap();
        let v0 = constant_candidate(model.initial(), g, 1.0).unwrap();
        let rep = monotone_iterate(&model, &v0, 1.0, &IterateOptions::default()).unwrap();
        let direct = sir_frozen_simulate(&i0, 2.0, &p, &g, 1.0).unwrap();
        for (a, b) in rep.fixed_point.states.iter().zip(&direct.states) {
            assert!(a.i.sup_distance(&b.i).unwrap() < 1e-9);
        }
    }

    #[test]
    fn subsolution_start_gives_increasing_iterates() {
        let (_, p, i0) = frozen_setup(5.0, 200);
        let model = SirModel::frozen(p, i0, 2.0).unwrap();
        let v0 = transport_candidate(&model, 1.0).unwrap();
        assert!(check_subsolution(&model, &v0, 1e-12).unwrap().passed);
        let rep = monotone_iterate(&model, &v0, 1.0, &IterateOptions::default()).unwrap();
        assert!(rep.all_increasing(), "{:?}", rep.monotone_flags);
        assert!(rep.gamma_verified);
    }

    #[test]
    fn scaled_output_is_not_a_subsolution() {
        let (g, p, i0) = frozen_setup(5.0, 100);
        let model = SirModel::frozen(p.clone(), i0.clone(), 2.0).unwrap();
        let traj = sir_frozen_simulate(&i0, 2.0, &p, &g, 1.0).unwrap();
        assert!(check_subsolution(&model, &traj.states, 1e-9).unwrap().passed);
        assert!(check_supersolution(&model, &traj.states, 1e-9).unwrap().passed);
        let scaled: Vec<SirState> = traj
            .states
            .iter()
            .map(|s| SirState {
                s: s.s,
                i: s.i.scaled(1.5),
            })
            .collect();
        let check = check_subsolution(&model, &scaled, 1e-9).unwrap();
        assert!(!check.passed);
        let v = check.violation.unwrap();
        assert_eq!(v.constraint, "initial");
        assert!(v.location.unwrap().a.is_some());
    }

    #[test]
    fn negative_candidate_is_rejected() {
        let (g, p, i0) = frozen_setup(2.0, 20);
        let model = SirModel::frozen(p, i0, 2.0).unwrap();
        let bad = vec![SirState {
            s: 2.0,
            i: AgeProfile::constant(g, -1.0),
        }];
        assert!(matches!(
            check_subsolution(&model, &bad, 0.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn volterra_limit_matches_frozen_trace() {
        let (g, p, i0) = frozen_setup(5.0, 100);
        let traj = sir_frozen_simulate(&i0, 1.5, &p, &g, 2.0).unwrap();
        let zero = vec![0.0; traj.len()];
        let rep = volterra_iterate_b(&i0, 1.5, &p, &g, 2.0, 5, &zero).unwrap();
        for (a, b) in rep.limit.iter().zip(traj.boundary_trace()) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
        assert!(rep.monotone_flags.iter().all(|f| *f == OrderVerdict::Increasing));
    }

    #[test]
    fn volterra_of_zero_data_is_zero() {
        let (g, p, _) = frozen_setup(5.0, 50);
        let zero = vec![0.0; 11];
        let rep = volterra_iterate_b(&AgeProfile::zeros(g, 1), 1.5, &p, &g, 1.0, 4, &zero).unwrap();
        assert!(rep.iterates.iter().all(|b| b.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn sandwich_of_identical_runs() {
        let (g, p, i0) = frozen_setup(2.0, 20);
        let traj = sir_frozen_simulate(&i0, 1.0, &p, &g, 1.0).unwrap();
        let rep = sandwich_verify(&traj, &traj, &traj, 0.0).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.worst_violation, 0.0);
        assert_eq!(rep.lower_margin, 0.0);
    }
}
