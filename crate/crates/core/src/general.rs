//! General nonlinear age-structured system with up to three components:
//!
//! ```text
//! (d/dt + d/da) u = mu(G(t), a) u,         G(t) = int alpha(a) u(t, a) da
//! u(t, 0) = int beta(Sigma(t), a) u(t, a) da,  Sigma(t) = int sigma(a) u(t, a) da
//! ```
//!
//! `mu` and `beta` are matrix-valued closures. Along a cell the propagator is
//! the matrix exponential of the trapezoid integral of `mu`, with `G` and
//! `Sigma` taken at the old time level; the boundary value is solved
//! semi-implicitly as for the epidemic models.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agefn::AgeFunction;
use crate::discretization::{integrate, AgeGrid, AgeProfile, MatrixKernel, ORDER_TOL_FACTOR};
use crate::error::{Error, Result};
use crate::linalg::{SmallMat, MAX_DIM};
use crate::trajectory::{march, CharacteristicModel, ModelState, Trajectory};

/// Matrix-valued coefficient of a population functional and age.
pub type CoefficientFn = Arc<dyn Fn(&[f64], f64) -> SmallMat + Send + Sync>;

/// Scalar response `chi(x)` of a summed population functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarResponse {
    /// `value`
    Constant { value: f64 },
    /// `intercept + slope x`
    Linear { intercept: f64, slope: f64 },
    /// `1 / (1 + scale x)`
    InverseLinear { scale: f64 },
    /// `exp(rate x)`
    Exponential { rate: f64 },
}

impl ScalarResponse {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarResponse::Constant { value } => value,
            ScalarResponse::Linear { intercept, slope } => intercept + slope * x,
            ScalarResponse::InverseLinear { scale } => 1.0 / (1.0 + scale * x),
            ScalarResponse::Exponential { rate } => (rate * x).exp(),
        }
    }
}

/// `mu(G, a) = -chi(sum G) Mu0(a)` and `beta(Sigma, a) = psi(sum Sigma) Beta0(a)`,
/// with the matrix entries of `Mu0`, `Beta0`, `alpha` and `sigma` given
/// row-major as age functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableSpec {
    pub dim: usize,
    pub mu0: Vec<AgeFunction>,
    pub chi: ScalarResponse,
    pub beta0: Vec<AgeFunction>,
    pub psi: ScalarResponse,
    pub alpha: Vec<AgeFunction>,
    pub sigma: Vec<AgeFunction>,
}

impl SeparableSpec {
    /// Scalar system `mu = -chi(G) mu0`, `beta = psi(Sigma) beta0` with
    /// `alpha = sigma = 1`.
    pub fn scalar(mu0: AgeFunction, chi: ScalarResponse, beta0: AgeFunction, psi: ScalarResponse) -> Self {
        SeparableSpec {
            dim: 1,
            mu0: vec![mu0],
            chi,
            beta0: vec![beta0],
            psi,
            alpha: vec![AgeFunction::constant(1.0)],
            sigma: vec![AgeFunction::constant(1.0)],
        }
    }
}

#[derive(Clone)]
pub struct GeneralParams {
    pub grid: AgeGrid,
    pub dim: usize,
    pub alpha: MatrixKernel,
    pub sigma: MatrixKernel,
    pub mu_fn: CoefficientFn,
    pub beta_fn: CoefficientFn,
    /// Exponent of the state space; numerics always use the discrete L1 norm.
    pub p_exponent: u32,
}

impl fmt::Debug for GeneralParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralParams")
            .field("grid", &self.grid)
            .field("dim", &self.dim)
            .field("alpha", &self.alpha)
            .field("sigma", &self.sigma)
            .field("p_exponent", &self.p_exponent)
            .finish_non_exhaustive()
    }
}

fn matrix_from_fns(entries: &[AgeFunction], dim: usize, a: f64) -> SmallMat {
    let vals: Vec<f64> = entries.iter().map(|f| f.eval(a)).collect();
    SmallMat::from_row_major(dim, &vals)
}

impl GeneralParams {
    pub fn new(
        grid: AgeGrid,
        alpha: MatrixKernel,
        sigma: MatrixKernel,
        mu_fn: CoefficientFn,
        beta_fn: CoefficientFn,
    ) -> Result<Self> {
        let dim = alpha.dim();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::invalid(format!("dimension must be 1..=3, got {dim}")));
        }
        if sigma.dim() != dim {
            return Err(Error::invalid("alpha and sigma dimensions differ"));
        }
        grid.ensure_same(alpha.grid())?;
        grid.ensure_same(sigma.grid())?;
        if alpha.min_entry() < 0.0 {
            return Err(Error::invalid("alpha must be entrywise nonnegative"));
        }
        if sigma.min_entry() < 0.0 {
            return Err(Error::invalid("sigma must be entrywise nonnegative"));
        }
        Ok(GeneralParams {
            grid,
            dim,
            alpha,
            sigma,
            mu_fn,
            beta_fn,
            p_exponent: 1,
        })
    }

    pub fn separable(grid: AgeGrid, spec: &SeparableSpec) -> Result<Self> {
        let dim = spec.dim;
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::invalid(format!("dimension must be 1..=3, got {dim}")));
        }
        for (name, v) in [
            ("mu0", &spec.mu0),
            ("beta0", &spec.beta0),
            ("alpha", &spec.alpha),
            ("sigma", &spec.sigma),
        ] {
            if v.len() != dim * dim {
                return Err(Error::invalid(format!(
                    "{name} needs {} entries, got {}",
                    dim * dim,
                    v.len()
                )));
            }
        }
        let kernel = |entries: &[AgeFunction]| MatrixKernel::from_fn(grid, dim, |a, r, c| entries[r * dim + c].eval(a));
        let alpha = kernel(&spec.alpha);
        let sigma = kernel(&spec.sigma);
        let (mu0, chi) = (spec.mu0.clone(), spec.chi);
        let (beta0, psi) = (spec.beta0.clone(), spec.psi);
        let mu_fn: CoefficientFn =
            Arc::new(move |g: &[f64], a: f64| matrix_from_fns(&mu0, dim, a).scale(-chi.eval(g.iter().sum())));
        let beta_fn: CoefficientFn =
            Arc::new(move |s: &[f64], a: f64| matrix_from_fns(&beta0, dim, a).scale(psi.eval(s.iter().sum())));
        Self::new(grid, alpha, sigma, mu_fn, beta_fn)
    }

    /// `1 + max_a max_k (-mu_kk(0, a))^+`: the shift making `gamma + mu(0, a)`
    /// diagonally positive.
    pub fn suggested_gamma(&self) -> f64 {
        let zero = vec![0.0; self.dim];
        let mut worst = 0.0f64;
        for j in 0..self.grid.len() {
            let m = (self.mu_fn)(&zero, self.grid.node(j));
            for k in 0..self.dim {
                worst = worst.max(-m.get(k, k));
            }
        }
        worst + 1.0
    }

    fn functional(&self, phi: &AgeProfile, kernel: &MatrixKernel) -> Result<Vec<f64>> {
        if phi.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "profile has {} components, model has {}",
                phi.dim(),
                self.dim
            )));
        }
        integrate(phi, Some(kernel))
    }

    pub fn g_of(&self, phi: &AgeProfile) -> Result<Vec<f64>> {
        self.functional(phi, &self.alpha)
    }

    pub fn sigma_of(&self, phi: &AgeProfile) -> Result<Vec<f64>> {
        self.functional(phi, &self.sigma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralState {
    pub u: AgeProfile,
}

impl ModelState for GeneralState {
    fn scalar_names(&self) -> Vec<&'static str> {
        Vec::new()
    }

    fn scalars(&self) -> Vec<f64> {
        Vec::new()
    }

    fn profile(&self) -> &AgeProfile {
        &self.u
    }

    fn from_parts(_scalars: &[f64], profile: AgeProfile) -> Self {
        GeneralState { u: profile }
    }
}

/// `C(phi) = int beta(Sigma(phi), a) phi(a) da`.
pub fn birth_c(phi: &AgeProfile, p: &GeneralParams) -> Result<Vec<f64>> {
    p.grid.ensure_same(phi.grid())?;
    let sig = p.sigma_of(phi)?;
    let mut out = vec![0.0; p.dim];
    let mut tmp = vec![0.0; p.dim];
    for j in 0..p.grid.len() {
        let b = (p.beta_fn)(&sig, p.grid.node(j));
        b.mul_vec(phi.at(j), &mut tmp);
        let w = p.grid.weight(j);
        for (o, v) in out.iter_mut().zip(&tmp) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// `D(phi)(a) = mu(G(phi), a) phi(a)`.
pub fn mortality_d(phi: &AgeProfile, p: &GeneralParams) -> Result<AgeProfile> {
    p.grid.ensure_same(phi.grid())?;
    let g = p.g_of(phi)?;
    let mut out = AgeProfile::zeros(p.grid, p.dim);
    let mut tmp = vec![0.0; p.dim];
    for j in 0..p.grid.len() {
        let m = (p.mu_fn)(&g, p.grid.node(j));
        m.mul_vec(phi.at(j), &mut tmp);
        out.at_mut(j).copy_from_slice(&tmp);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GeneralModel {
    params: GeneralParams,
    initial: GeneralState,
}

impl GeneralModel {
    pub fn new(params: GeneralParams, initial: GeneralState) -> Result<Self> {
        params.grid.ensure_same(initial.u.grid())?;
        if initial.u.dim() != params.dim {
            return Err(Error::invalid(format!(
                "initial profile has {} components, model has {}",
                initial.u.dim(),
                params.dim
            )));
        }
        if !initial.u.is_nonnegative(0.0) {
            return Err(Error::invalid("initial profile must be nonnegative"));
        }
        Ok(GeneralModel { params, initial })
    }

    pub fn params(&self) -> &GeneralParams {
        &self.params
    }

    fn betas(&self, old: &GeneralState) -> Vec<SmallMat> {
        let sig = self.params.sigma_of(&old.u).expect("checked dimensions");
        let g = self.params.grid;
        (0..g.len()).map(|j| (self.params.beta_fn)(&sig, g.node(j))).collect()
    }
}

impl CharacteristicModel for GeneralModel {
    type State = GeneralState;

    fn grid(&self) -> AgeGrid {
        self.params.grid
    }

    fn dim(&self) -> usize {
        self.params.dim
    }

    fn initial(&self) -> &GeneralState {
        &self.initial
    }

    fn cell_propagators(&self, old: &GeneralState) -> Vec<f64> {
        let p = &self.params;
        let g = p.g_of(&old.u).expect("checked dimensions");
        let h = p.grid.da();
        let mus: Vec<SmallMat> = (0..p.grid.len()).map(|j| (p.mu_fn)(&g, p.grid.node(j))).collect();
        let mut out = Vec::with_capacity(p.grid.n_cells() * p.dim * p.dim);
        for j in 1..p.grid.len() {
            let avg = mus[j - 1].add(&mus[j]).scale(0.5 * h);
            out.extend(avg.exp().to_row_major());
        }
        out
    }

    fn advance_scalars(&self, _old: &GeneralState) -> Vec<f64> {
        Vec::new()
    }

    fn boundary_value(&self, old: &GeneralState, _new_scalars: &[f64], new_profile: &AgeProfile) -> Vec<f64> {
        let g = self.params.grid;
        let mut out = vec![0.0; self.params.dim];
        let mut tmp = vec![0.0; self.params.dim];
        for (j, b) in self.betas(old).iter().enumerate() {
            b.mul_vec(new_profile.at(j), &mut tmp);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o += g.weight(j) * v;
            }
        }
        out
    }

    fn boundary_coupling(&self, old: &GeneralState, _new_scalars: &[f64]) -> SmallMat {
        let sig = self.params.sigma_of(&old.u).expect("checked dimensions");
        (self.params.beta_fn)(&sig, 0.0).scale(self.params.grid.weight(0))
    }

    fn weighted_mass(&self, state: &GeneralState) -> f64 {
        birth_c(&state.u, &self.params)
            .map(|v| v.iter().sum())
            .unwrap_or(f64::NAN)
    }

    fn suggested_gamma(&self) -> f64 {
        self.params.suggested_gamma()
    }
}

pub fn general_simulate(
    u0: &GeneralState,
    p: &GeneralParams,
    g: &AgeGrid,
    horizon: f64,
) -> Result<Trajectory<GeneralState>> {
    p.grid.ensure_same(g)?;
    march(&GeneralModel::new(p.clone(), u0.clone())?, horizon)
}

/// A sampled pair that breaks an assumption.
#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    /// `birth_negative`, `birth_not_monotone`, `shifted_mortality_negative`
    /// or `shifted_mortality_not_monotone`.
    pub kind: String,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub dim: usize,
    /// Node of the violation (absent for the birth functional).
    pub node: Option<usize>,
    pub component: usize,
    pub margin: f64,
    /// Shift at which the mortality violation was observed.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub certified: bool,
    pub birth_nonnegative: bool,
    pub birth_monotone: bool,
    /// Smallest shift that passed on every sample.
    pub gamma: Option<f64>,
    pub gammas_tried: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub counterexample: Option<Counterexample>,
}

const GAMMA_DOUBLINGS: usize = 20;
const PROBE_KNOTS: usize = 8;

/// Random piecewise-linear nonnegative profile with L1 norm at most `bound`.
pub fn random_profile(rng: &mut ChaCha8Rng, grid: AgeGrid, dim: usize, bound: f64) -> AgeProfile {
    let knots: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..=PROBE_KNOTS).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let a_max = grid.a_max();
    let mut p = AgeProfile::from_fn_vec(grid, dim, |a, out| {
        let x = a / a_max * PROBE_KNOTS as f64;
        let k = (x.floor() as usize).min(PROBE_KNOTS - 1);
        let t = x - k as f64;
        for (c, o) in out.iter_mut().enumerate() {
            *o = knots[c][k] * (1.0 - t) + knots[c][k + 1] * t;
        }
    });
    let norm = p.l1_norm();
    if norm > 0.0 {
        let target = rng.gen::<f64>() * bound;
        p = p.scaled(target / norm);
    }
    p
}

/// Samples ordered pairs `phi <= psi` and checks that `C` is nonnegative and
/// increasing, then searches `gamma` in `suggested * 2^k` such that
/// `gamma phi + D(phi)` is nonnegative and increasing on every sample.
pub fn assumption_probe(p: &GeneralParams, norm_bound: f64, samples: usize, seed: u64) -> Result<ProbeReport> {
    if samples == 0 {
        return Err(Error::invalid("samples must be at least 1"));
    }
    if !(norm_bound.is_finite() && norm_bound > 0.0) {
        return Err(Error::invalid(format!("norm bound must be positive, got {norm_bound}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let phi = random_profile(&mut rng, p.grid, p.dim, 0.5 * norm_bound);
        let bump = random_profile(&mut rng, p.grid, p.dim, 0.5 * norm_bound);
        let psi = phi.try_add(&bump)?;
        pairs.push((phi, psi));
    }

    let mut report = ProbeReport {
        certified: false,
        birth_nonnegative: true,
        birth_monotone: true,
        gamma: None,
        gammas_tried: Vec::new(),
        samples,
        seed,
        counterexample: None,
    };
    let counter = |kind: &str, phi: &AgeProfile, psi: &AgeProfile, node, component, margin, gamma| Counterexample {
        kind: kind.to_string(),
        phi: phi.values().to_vec(),
        psi: psi.values().to_vec(),
        dim: p.dim,
        node,
        component,
        margin,
        gamma,
    };

    let mut mort = Vec::with_capacity(samples);
    for (phi, psi) in &pairs {
        let (c_phi, c_psi) = (birth_c(phi, p)?, birth_c(psi, p)?);
        let tol = ORDER_TOL_FACTOR * (1.0 + c_phi.iter().chain(&c_psi).fold(0.0f64, |m, v| m.max(v.abs())));
        for k in 0..p.dim {
            if c_phi[k] < -tol && report.counterexample.is_none() {
                report.birth_nonnegative = false;
                report.counterexample = Some(counter("birth_negative", phi, psi, None, k, c_phi[k], None));
            }
            if c_phi[k] > c_psi[k] + tol && report.counterexample.is_none() {
                report.birth_monotone = false;
                report.counterexample = Some(counter(
                    "birth_not_monotone",
                    phi,
                    psi,
                    None,
                    k,
                    c_psi[k] - c_phi[k],
                    None,
                ));
            }
        }
        mort.push((mortality_d(phi, p)?, mortality_d(psi, p)?));
    }
    if report.counterexample.is_some() {
        return Ok(report);
    }

    let mut gamma = p.suggested_gamma();
    let mut last_failure = None;
    for _ in 0..=GAMMA_DOUBLINGS {
        report.gammas_tried.push(gamma);
        let mut failure = None;
        'pairs: for ((phi, psi), (d_phi, d_psi)) in pairs.iter().zip(&mort) {
            let scale = 1.0 + gamma * phi.max_abs().max(psi.max_abs()) + d_phi.max_abs().max(d_psi.max_abs());
            let tol = ORDER_TOL_FACTOR * scale;
            for (idx, ((a, b), (da, db))) in phi
                .values()
                .iter()
                .zip(psi.values())
                .zip(d_phi.values().iter().zip(d_psi.values()))
                .enumerate()
            {
                let lo = gamma * a + da;
                let hi = gamma * b + db;
                let (node, comp) = (idx / p.dim, idx % p.dim);
                if lo < -tol {
                    failure = Some(counter(
                        "shifted_mortality_negative",
                        phi,
                        psi,
                        Some(node),
                        comp,
                        lo,
                        Some(gamma),
                    ));
                    break 'pairs;
                }
                if lo > hi + tol {
                    failure = Some(counter(
                        "shifted_mortality_not_monotone",
                        phi,
                        psi,
                        Some(node),
                        comp,
                        hi - lo,
                        Some(gamma),
                    ));
                    break 'pairs;
                }
            }
        }
        match failure {
            None => {
                report.certified = true;
                report.gamma = Some(gamma);
                return Ok(report);
            }
            Some(f) => last_failure = Some(f),
        }
        gamma *= 2.0;
    }
    report.counterexample = last_failure;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMonotonicity {
    Increasing,
    Decreasing,
    Neither,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotoneCheck {
    pub classification: TimeMonotonicity,
    /// Verdict of the inequalities on the initial datum alone.
    pub initial_class: TimeMonotonicity,
    /// Whether the simulation confirmed the initial verdict at every step.
    pub verified: bool,
    /// Largest step-over-step move against the claimed direction.
    pub worst_reversal: f64,
    pub worst_step: Option<usize>,
}

/// Direction `+1` checks `phi_j <= K_j phi_{j-1}` and `phi_0 <= C(phi)`;
/// `-1` the reverse.
fn datum_satisfies(model: &GeneralModel, phi: &AgeProfile, direction: f64) -> Result<bool> {
    let p = model.params();
    let dim = p.dim;
    let state = GeneralState { u: phi.clone() };
    let props = model.cell_propagators(&state);
    let tol = ORDER_TOL_FACTOR * (1.0 + phi.max_abs());
    for j in 1..p.grid.len() {
        let k = &props[(j - 1) * dim * dim..j * dim * dim];
        let src = phi.at(j - 1);
        for r in 0..dim {
            let moved: f64 = (0..dim).map(|c| k[r * dim + c] * src[c]).sum();
            if direction * (phi.get(j, r) - moved) > tol {
                return Ok(false);
            }
        }
    }
    let c = birth_c(phi, p)?;
    Ok((0..dim).all(|r| direction * (phi.get(0, r) - c[r]) <= tol))
}

/// Classifies `u0` by the discrete inequalities and then verifies the
/// claimed direction on the simulated trajectory step over step.
pub fn trajectory_monotone_check(
    u0: &GeneralState,
    p: &GeneralParams,
    g: &AgeGrid,
    horizon: f64,
) -> Result<MonotoneCheck> {
    p.grid.ensure_same(g)?;
    let model = GeneralModel::new(p.clone(), u0.clone())?;
    let initial_class = if datum_satisfies(&model, &u0.u, 1.0)? {
        TimeMonotonicity::Increasing
    } else if datum_satisfies(&model, &u0.u, -1.0)? {
        TimeMonotonicity::Decreasing
    } else {
        TimeMonotonicity::Neither
    };
    if initial_class == TimeMonotonicity::Neither {
        return Ok(MonotoneCheck {
            classification: TimeMonotonicity::Neither,
            initial_class,
            verified: false,
            worst_reversal: 0.0,
            worst_step: None,
        });
    }
    let sign = if initial_class == TimeMonotonicity::Increasing {
        1.0
    } else {
        -1.0
    };
    let traj = march(&model, horizon)?;
    let mut worst = 0.0f64;
    let mut worst_step = None;
    let mut verified = true;
    for (n, w) in traj.states.windows(2).enumerate() {
        let (a, b) = (&w[0].u, &w[1].u);
        let tol = ORDER_TOL_FACTOR * (1.0 + a.max_abs().max(b.max_abs()));
        for (x, y) in a.values().iter().zip(b.values()) {
            let reversal = sign * (x - y);
            if reversal > worst {
                worst = reversal;
                worst_step = Some(n + 1);
            }
            if reversal > tol {
                verified = false;
            }
        }
    }
    Ok(MonotoneCheck {
        classification: if verified {
            initial_class
        } else {
            TimeMonotonicity::Neither
        },
        initial_class,
        verified,
        worst_reversal: worst,
        worst_step,
    })
}
