//! SIR epidemic model with infection age.
//!
//! ```text
//! S' = gamma - nu_S S - eta S int beta i
//! (d/dt + d/da) i = -nu_I(a) i,    i(t, 0) = eta S int beta i
//! ```
//!
//! Stepping is aligned (`dt = da`): `i` moves one node per step with the cell
//! survival, `S` is advanced implicitly in its linear terms, and the
//! boundary value is solved from the renewal condition at the new level.

use crate::discretization::{weighted_integral, AgeGrid, AgeProfile};
use crate::error::{Error, Result};
use crate::linalg::SmallMat;
use crate::operator::SurvivalFactors;
use crate::trajectory::{march, CharacteristicModel, ModelState, Trajectory};

#[derive(Debug, Clone)]
pub struct SirParams {
    /// Recruitment rate `gamma`.
    pub gamma_in: f64,
    pub nu_s: f64,
    pub eta: f64,
    /// Infectiousness `beta(a) >= 0`.
    pub beta: AgeProfile,
    /// Removal rate `nu_I(a) >= delta`.
    pub nu_i: AgeProfile,
    pub delta_floor: f64,
}

impl SirParams {
    pub fn new(
        gamma_in: f64,
        nu_s: f64,
        eta: f64,
        beta: AgeProfile,
        nu_i: AgeProfile,
        delta_floor: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("gamma", gamma_in),
            ("nu_S", nu_s),
            ("eta", eta),
            ("delta", delta_floor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        beta.ensure_compatible(&nu_i)?;
        if beta.dim() != 1 {
            return Err(Error::invalid("beta must be a scalar profile"));
        }
        if let Some(v) = beta.values().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "beta must be nonnegative and finite, found {v}"
            )));
        }
        if let Some(v) = nu_i
            .values()
            .iter()
            .find(|&&v| !(v.is_finite() && v >= delta_floor * (1.0 - 1e-12)))
        {
            return Err(Error::invalid(format!(
                "nu_I must stay above delta = {delta_floor}, found {v}"
            )));
        }
        Ok(SirParams {
            gamma_in,
            nu_s,
            eta,
            beta,
            nu_i,
            delta_floor,
        })
    }

    pub fn grid(&self) -> AgeGrid {
        *self.beta.grid()
    }

    pub fn beta_sup(&self) -> f64 {
        self.beta.max_abs()
    }

    pub fn survival(&self) -> SurvivalFactors {
        SurvivalFactors::from_rate(&self.nu_i).expect("nu_I is a scalar profile")
    }

    /// `int beta i` at one time level.
    pub fn force_of_infection(&self, i: &AgeProfile) -> f64 {
        weighted_integral(i, &self.beta).map(|v| v[0]).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirState {
    pub s: f64,
    pub i: AgeProfile,
}

impl ModelState for SirState {
    fn scalar_names(&self) -> Vec<&'static str> {
        vec!["S"]
    }

    fn scalars(&self) -> Vec<f64> {
        vec![self.s]
    }

    fn profile(&self) -> &AgeProfile {
        &self.i
    }

    fn from_parts(scalars: &[f64], profile: AgeProfile) -> Self {
        SirState {
            s: scalars[0],
            i: profile,
        }
    }
}

/// The SIR system on a grid, either fully nonlinear or with `S` frozen.
#[derive(Debug, Clone)]
pub struct SirModel {
    params: SirParams,
    initial: SirState,
    survival: SurvivalFactors,
    frozen: Option<f64>,
}

impl SirModel {
    pub fn new(params: SirParams, initial: SirState) -> Result<Self> {
        Self::build(params, initial, None)
    }

    /// Linear renewal system with `S` held at `s_frozen`.
    pub fn frozen(params: SirParams, i0: AgeProfile, s_frozen: f64) -> Result<Self> {
        if !(s_frozen.is_finite() && s_frozen > 0.0) {
            return Err(Error::Precondition(format!(
                "frozen S must be positive, got {s_frozen}"
            )));
        }
        let initial = SirState { s: s_frozen, i: i0 };
        Self::build(params, initial, Some(s_frozen))
    }

    fn build(params: SirParams, initial: SirState, frozen: Option<f64>) -> Result<Self> {
        initial.i.ensure_compatible(&params.beta)?;
        if !(initial.s.is_finite() && initial.s >= 0.0) {
            return Err(Error::invalid(format!("S must be nonnegative, got {}", initial.s)));
        }
        if !initial.i.is_nonnegative(0.0) {
            return Err(Error::invalid("initial i must be nonnegative"));
        }
        let survival = params.survival();
        Ok(SirModel {
            params,
            initial,
            survival,
            frozen,
        })
    }

    pub fn params(&self) -> &SirParams {
        &self.params
    }

    pub fn survival(&self) -> &SurvivalFactors {
        &self.survival
    }

    pub fn frozen_s(&self) -> Option<f64> {
        self.frozen
    }
}

impl CharacteristicModel for SirModel {
    type State = SirState;

    fn grid(&self) -> AgeGrid {
        self.params.grid()
    }

    fn dim(&self) -> usize {
        1
    }

    fn initial(&self) -> &SirState {
        &self.initial
    }

    fn cell_propagators(&self, _old: &SirState) -> Vec<f64> {
        self.survival.factors().to_vec()
    }

    fn advance_scalars(&self, old: &SirState) -> Vec<f64> {
        if let Some(s) = self.frozen {
            return vec![s];
        }
        let p = &self.params;
        let h = self.grid().da();
        let lambda = p.force_of_infection(&old.i);
        vec![(old.s + h * p.gamma_in) / (1.0 + h * (p.nu_s + p.eta * lambda))]
    }

    fn boundary_value(&self, _old: &SirState, new_scalars: &[f64], new_profile: &AgeProfile) -> Vec<f64> {
        vec![self.params.eta * new_scalars[0] * self.params.force_of_infection(new_profile)]
    }

    fn boundary_coupling(&self, _old: &SirState, new_scalars: &[f64]) -> SmallMat {
        let g = self.grid();
        SmallMat::scalar(self.params.eta * new_scalars[0] * g.weight(0) * self.params.beta.get(0, 0))
    }

    fn weighted_mass(&self, state: &SirState) -> f64 {
        self.params.force_of_infection(&state.i)
    }

    fn suggested_gamma(&self) -> f64 {
        self.params.nu_i.max_abs() + 1.0
    }
}

fn check_grid(p: &SirParams, g: &AgeGrid, i: &AgeProfile) -> Result<()> {
    p.grid().ensure_same(g)?;
    i.grid().ensure_same(g)
}

/// One aligned step of the nonlinear system.
pub fn sir_step(st: &SirState, p: &SirParams, g: &AgeGrid) -> Result<SirState> {
    check_grid(p, g, &st.i)?;
    let model = SirModel::new(p.clone(), st.clone())?;
    model.step(st).map(|(next, _)| next)
}

pub fn sir_simulate(st0: &SirState, p: &SirParams, g: &AgeGrid, horizon: f64) -> Result<Trajectory<SirState>> {
    check_grid(p, g, &st0.i)?;
    march(&SirModel::new(p.clone(), st0.clone())?, horizon)
}

/// Linear system with `S` frozen at `s_frozen`.
pub fn sir_frozen_simulate(
    i0: &AgeProfile,
    s_frozen: f64,
    p: &SirParams,
    g: &AgeGrid,
    horizon: f64,
) -> Result<Trajectory<SirState>> {
    check_grid(p, g, i0)?;
    march(&SirModel::frozen(p.clone(), i0.clone(), s_frozen)?, horizon)
}

/// A priori bounds `S_- <= S(t) <= S_+` and `S + I <= M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirBounds {
    pub s_minus: f64,
    pub s_plus: f64,
    pub m: f64,
}

pub fn sir_bounds(st0: &SirState, p: &SirParams) -> Result<SirBounds> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN fails too
    if !(st0.s > 0.0) {
        return Err(Error::Precondition(format!(
            "S_0 must be positive (got {}); restart from a small positive time",
            st0.s
        )));
    }
    let i0 = st0.i.total()[0];
    let s_plus = st0.s + p.gamma_in / p.nu_s;
    let m = (st0.s + i0).max(p.gamma_in / p.nu_s.min(p.delta_floor));
    let s_minus = st0.s.min(p.gamma_in / (p.nu_s + p.eta * p.beta_sup() * m));
    Ok(SirBounds { s_minus, s_plus, m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::make_grid;

    fn params(g: AgeGrid, gamma: f64, nu_s: f64, eta: f64, beta: f64, nu: f64) -> SirParams {
        SirParams::new(
            gamma,
            nu_s,
            eta,
            AgeProfile::constant(g, beta),
            AgeProfile::constant(g, nu),
            nu,
        )
        .unwrap()
    }

    #[test]
    fn disease_free_equilibrium_is_fixed() {
        let g = make_grid(10.0, 100).unwrap();
        let p = params(g, 1.0, 1.0, 1.0, 0.0, 1.0);
        let st = SirState {
            s: 1.0,
            i: AgeProfile::zeros(g, 1),
        };
        let next = sir_step(&st, &p, &g).unwrap();
        assert!((next.s - 1.0).abs() < 1e-15);
        assert!(next.i.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn susceptibles_relax_to_equilibrium_without_infection() {
        let g = make_grid(10.0, 1000).unwrap();
        let p = params(g, 1.0, 1.0, 1.0, 1.0, 1.0);
        let st = SirState {
            s: 0.0,
            i: AgeProfile::zeros(g, 1),
        };
        let traj = sir_simulate(&st, &p, &g, 1.0).unwrap();
        let exact = 1.0 - (-1.0f64).exp();
        assert!((traj.last().s - exact).abs() < 0.01 * 2.0);
        assert!(traj.states.windows(2).all(|w| w[1].s >= w[0].s));
        assert!(traj.states.iter().all(|s| s.i.max_abs() == 0.0));
    }

    #[test]
    fn rejects_invalid_parameters() {
        let g = make_grid(1.0, 10).unwrap();
        let err = SirParams::new(
            1.0,
            -0.5,
            1.0,
            AgeProfile::constant(g, 1.0),
            AgeProfile::constant(g, 1.0),
            1.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("nu_S"));
        let err = SirParams::new(
            1.0,
            0.5,
            1.0,
            AgeProfile::constant(g, 1.0),
            AgeProfile::constant(g, 0.5),
            1.0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("nu_I"));
    }

    #[test]
    fn boundary_solvability_violation_suggests_smaller_step() {
        let g = make_grid(10.0, 10).unwrap();
        let p = params(g, 1.0, 1.0, 10.0, 1.0, 1.0);
        let st = SirState {
            s: 1.0,
            i: AgeProfile::zeros(g, 1),
        };
        let err = sir_step(&st, &p, &g).unwrap_err();
        match err {
            Error::StepSize { suggested_da, da, .. } => assert!(suggested_da < da),
            other => panic!("unexpected {other}"),
        }
        let err = sir_simulate(&st, &p, &g, 2.0).unwrap_err();
        assert_eq!(err.step(), Some(1));
    }

    #[test]
    fn bounds_follow_closed_forms() {
        let g = make_grid(10.0, 100).unwrap();
        let p = params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
        let st = SirState {
            s: 1.0,
            i: AgeProfile::zeros(g, 1),
        };
        assert!((sir_bounds(&st, &p).unwrap().s_plus - 3.0).abs() < 1e-15);

        // I_0 = 0.5 from a constant 0.05 density on [0, 10]
        let st = SirState {
            s: 1.0,
            i: AgeProfile::constant(g, 0.05),
        };
        let b = sir_bounds(&st, &p).unwrap();
        assert!((b.m - 2.0).abs() < 1e-12);
        assert!((b.s_minus - 0.4).abs() < 1e-12);
    }

    #[test]
    fn bounds_require_positive_s0() {
        let g = make_grid(1.0, 10).unwrap();
        let p = params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
        let st = SirState {
            s: 0.0,
            i: AgeProfile::zeros(g, 1),
        };
        assert!(matches!(sir_bounds(&st, &p), Err(Error::Precondition(_))));
    }

    #[test]
    fn frozen_zero_data_stays_zero() {
        let g = make_grid(5.0, 50).unwrap();
        let p = params(g, 1.0, 0.5, 1.0, 1.0, 1.0);
        let traj = sir_frozen_simulate(&AgeProfile::zeros(g, 1), 2.0, &p, &g, 2.0).unwrap();
        assert!(traj.states.iter().all(|s| s.i.max_abs() == 0.0));
    }
}
