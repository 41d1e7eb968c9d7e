//! Characteristic roots of the frozen linear systems, their adjoint
//! eigenprofiles, and the conserved exponential functionals.
//!
//! For a removal rate `nu` and a kernel `beta`, the adjoint profile is
//!
//! ```text
//! Gamma(a) = scale * int_a^inf exp(-int_a^theta (nu + lambda)) beta(theta) dtheta
//! ```
//!
//! and the characteristic equation is `Gamma(0) = 1`. On each grid cell the
//! kernel and the rate are taken linear between samples and the exponential
//! is integrated exactly, so constant coefficients give the closed-form root
//! to rounding. Beyond `a_max` both are held at their last samples.

use crate::discretization::{integrate, AgeGrid, AgeProfile};
use crate::error::{Error, Result};
use crate::hiv::HivParams;
use crate::sir::SirParams;
use crate::trajectory::{ModelState, Trajectory};

/// Offset above the integrability limit where root bracketing starts.
const BRACKET_OFFSET: f64 = 1e-6;
const ROOT_TOL: f64 = 1e-12;
const FUNCTIONAL_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone)]
pub struct SpectralData {
    pub lambda: f64,
    /// Adjoint eigenprofile with `Gamma(0) = 1`.
    pub gamma_profile: AgeProfile,
    /// Coefficient of `V` in the HIV functional, `k T / (lambda + c)`.
    pub head_coeff: Option<f64>,
}

impl SpectralData {
    /// `head_coeff * head + int Gamma i`.
    pub fn functional(&self, head: f64, i: &AgeProfile) -> Result<f64> {
        i.ensure_compatible(&self.gamma_profile)?;
        let body = integrate(&self.gamma_profile_product(i), None)?[0];
        Ok(self.head_coeff.unwrap_or(0.0) * head + body)
    }

    fn gamma_profile_product(&self, i: &AgeProfile) -> AgeProfile {
        let values = i
            .values()
            .iter()
            .zip(self.gamma_profile.values())
            .map(|(a, b)| a * b)
            .collect();
        AgeProfile::new(*i.grid(), 1, values).expect("same shape")
    }
}

/// `(1 - e^{-c}) / c`
fn phi1(c: f64) -> f64 {
    if c.abs() < 1e-4 {
        1.0 - c / 2.0 + c * c / 6.0 - c * c * c / 24.0
    } else {
        -(-c).exp_m1() / c
    }
}

/// `(1 - (1 + c) e^{-c}) / c^2`
fn phi2(c: f64) -> f64 {
    if c.abs() < 1e-3 {
        0.5 - c / 3.0 + c * c / 8.0 - c * c * c / 30.0
    } else {
        (1.0 - (1.0 + c) * (-c).exp()) / (c * c)
    }
}

/// Backward recurrence for `Gamma` at every node.
fn adjoint_profile(rate: &AgeProfile, kernel: &AgeProfile, lambda: f64, scale: f64) -> Vec<f64> {
    let grid = *rate.grid();
    let n = grid.n_cells();
    let h = grid.da();
    let mut out = vec![0.0; n + 1];
    let tail_rate = rate.get(n, 0) + lambda;
    out[n] = scale * kernel.get(n, 0) / tail_rate;
    for j in (1..=n).rev() {
        let c = h * (0.5 * (rate.get(j - 1, 0) + rate.get(j, 0)) + lambda);
        let (b0, b1) = (kernel.get(j - 1, 0), kernel.get(j, 0));
        let cell = h * (b0 * phi1(c) + (b1 - b0) * phi2(c));
        out[j - 1] = (-c).exp() * out[j] + scale * cell;
    }
    out
}

/// Bisection for the root of the decreasing function `g - 1` on `(lo, inf)`.
fn solve_root(lower_limit: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let lo0 = lower_limit + BRACKET_OFFSET;
    let g_lo = g(lo0);
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(g_lo >= 1.0) {
        return Err(Error::NoRoot {
            reason: "g stays below 1 on the admissible range".into(),
            lo: lo0,
            hi: f64::INFINITY,
            g_lo,
            g_hi: f64::NAN,
        });
    }
    let mut width = 1.0;
    let mut hi = lo0 + width;
    let mut g_hi = g(hi);
    let mut expansions = 0;
    while g_hi >= 1.0 {
        expansions += 1;
        if expansions > 60 || !g_hi.is_finite() {
            return Err(Error::NoRoot {
                reason: "bracket expansion failed".into(),
                lo: lo0,
                hi,
                g_lo,
                g_hi,
            });
        }
        width *= 2.0;
        hi = lo0 + width;
        g_hi = g(hi);
    }
    let mut lo = lo0;
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn ensure_nonzero(kernel: &AgeProfile, name: &str) -> Result<()> {
    if kernel.max_abs() == 0.0 {
        return Err(Error::NoRoot {
            reason: format!("{name} vanishes identically"),
            lo: f64::NAN,
            hi: f64::NAN,
            g_lo: 0.0,
            g_hi: 0.0,
        });
    }
    Ok(())
}

fn ensure_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("{name} must be positive, got {v}")))
    }
}

/// SIR characteristic function `eta S int exp(-int (nu_I + lambda)) beta`.
pub fn characteristic_sir(lambda: f64, s_frozen: f64, p: &SirParams) -> f64 {
    adjoint_profile(&p.nu_i, &p.beta, lambda, p.eta * s_frozen)[0]
}

/// HIV characteristic function `k T / (lambda + c) int exp(-int (delta + lambda)) p`.
pub fn characteristic_hiv(lambda: f64, t_frozen: f64, p: &HivParams) -> f64 {
    adjoint_profile(&p.delta_a, &p.p_prod, lambda, p.k * t_frozen / (lambda + p.c))[0]
}

pub fn solve_lambda_sir(s_frozen: f64, p: &SirParams, g: &AgeGrid) -> Result<f64> {
    p.grid().ensure_same(g)?;
    ensure_positive("frozen S", s_frozen)?;
    ensure_nonzero(&p.beta, "beta")?;
    solve_root(-p.nu_i.min_value(), |l| characteristic_sir(l, s_frozen, p))
}

pub fn solve_lambda_hiv(t_frozen: f64, p: &HivParams, g: &AgeGrid) -> Result<f64> {
    p.grid().ensure_same(g)?;
    ensure_positive("frozen T", t_frozen)?;
    ensure_nonzero(&p.p_prod, "p")?;
    let limit = (-p.c).max(-p.delta_a.min_value());
    solve_root(limit, |l| characteristic_hiv(l, t_frozen, p))
}

pub fn gamma_profile_sir(lambda: f64, s_frozen: f64, p: &SirParams, g: &AgeGrid) -> Result<AgeProfile> {
    p.grid().ensure_same(g)?;
    if lambda + p.nu_i.min_value() <= 0.0 {
        return Err(Error::OutOfResolventSet {
            lambda,
            gamma: p.nu_i.min_value(),
        });
    }
    AgeProfile::new(*g, 1, adjoint_profile(&p.nu_i, &p.beta, lambda, p.eta * s_frozen))
}

/// `Gamma_I` including the factor `k T / (lambda + c)`.
pub fn gamma_profile_hiv(lambda: f64, t_frozen: f64, p: &HivParams, g: &AgeGrid) -> Result<AgeProfile> {
    p.grid().ensure_same(g)?;
    let limit = p.c.min(p.delta_a.min_value());
    if lambda + limit <= 0.0 {
        return Err(Error::OutOfResolventSet { lambda, gamma: limit });
    }
    let scale = p.k * t_frozen / (lambda + p.c);
    AgeProfile::new(*g, 1, adjoint_profile(&p.delta_a, &p.p_prod, lambda, scale))
}

pub fn spectral_sir(s_frozen: f64, p: &SirParams, g: &AgeGrid) -> Result<SpectralData> {
    let lambda = solve_lambda_sir(s_frozen, p, g)?;
    Ok(SpectralData {
        lambda,
        gamma_profile: gamma_profile_sir(lambda, s_frozen, p, g)?,
        head_coeff: None,
    })
}

pub fn spectral_hiv(t_frozen: f64, p: &HivParams, g: &AgeGrid) -> Result<SpectralData> {
    let lambda = solve_lambda_hiv(t_frozen, p, g)?;
    Ok(SpectralData {
        lambda,
        gamma_profile: gamma_profile_hiv(lambda, t_frozen, p, g)?,
        head_coeff: Some(p.k * t_frozen / (lambda + p.c)),
    })
}

/// `k T / (lambda + c) V + int Gamma_I i`.
pub fn gamma_functional_hiv(sd: &SpectralData, v: f64, i: &AgeProfile) -> Result<f64> {
    sd.functional(v, i)
}

/// Functional value at every step of a trajectory.
pub fn functional_series<S: ModelState>(traj: &Trajectory<S>, sd: &SpectralData) -> Result<Vec<f64>> {
    traj.states
        .iter()
        .map(|s| sd.functional(s.head_value(), s.profile()))
        .collect()
}

/// Drift of the conserved quantity, `max_n |e^{-lambda t_n} F(t_n) - F(0)| / max(|F(0)|, floor)`.
pub fn conservation_residual<S: ModelState>(traj: &Trajectory<S>, sd: &SpectralData) -> Result<f64> {
    let series = functional_series(traj, sd)?;
    let f0 = series.first().copied().unwrap_or(0.0);
    let denom = f0.abs().max(FUNCTIONAL_FLOOR);
    let times = traj.times();
    Ok(series
        .iter()
        .zip(&times)
        .map(|(f, t)| ((-sd.lambda * t).exp() * f - f0).abs() / denom)
        .fold(0.0, f64::max))
}
