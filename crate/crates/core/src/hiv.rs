//! Within-host HIV model with infection age.
//!
//! ```text
//! T' = s - d T - k T V
//! (d/dt + d/da) i = -delta(a) i,    i(t, 0) = k T V
//! V' = int p i - c V
//! ```
//!
//! Each step updates `T`, then `V`, then the boundary value from the new
//! `T` and `V`, so the renewal condition holds at the new level without a
//! nonlinear solve.

use crate::discretization::{weighted_integral, AgeGrid, AgeProfile};
use crate::error::{Error, Result};
use crate::linalg::SmallMat;
use crate::operator::SurvivalFactors;
use crate::trajectory::{march, CharacteristicModel, ModelState, Trajectory};

#[derive(Debug, Clone)]
pub struct HivParams {
    pub s_in: f64,
    pub d: f64,
    pub k: f64,
    pub c: f64,
    /// Virion production per infected cell, `p(a) >= 0`.
    pub p_prod: AgeProfile,
    /// Infected-cell death rate, `delta(a) >= delta0`.
    pub delta_a: AgeProfile,
    pub delta0: f64,
}

impl HivParams {
    pub fn new(
        s_in: f64,
        d: f64,
        k: f64,
        c: f64,
        p_prod: AgeProfile,
        delta_a: AgeProfile,
        delta0: f64,
    ) -> Result<Self> {
        for (name, v) in [("s", s_in), ("d", d), ("k", k), ("c", c), ("delta0", delta0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        p_prod.ensure_compatible(&delta_a)?;
        if p_prod.dim() != 1 {
            return Err(Error::invalid("p must be a scalar profile"));
        }
        if let Some(v) = p_prod.values().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("p must be nonnegative and finite, found {v}")));
        }
        if let Some(v) = delta_a
            .values()
            .iter()
            .find(|&&v| !(v.is_finite() && v >= delta0 * (1.0 - 1e-12)))
        {
            return Err(Error::invalid(format!(
                "delta must stay above delta0 = {delta0}, found {v}"
            )));
        }
        Ok(HivParams {
            s_in,
            d,
            k,
            c,
            p_prod,
            delta_a,
            delta0,
        })
    }

    pub fn grid(&self) -> AgeGrid {
        *self.p_prod.grid()
    }

    pub fn p_sup(&self) -> f64 {
        self.p_prod.max_abs()
    }

    pub fn survival(&self) -> SurvivalFactors {
        SurvivalFactors::from_rate(&self.delta_a).expect("delta is a scalar profile")
    }

    /// Virion production `int p i`.
    pub fn production(&self, i: &AgeProfile) -> f64 {
        weighted_integral(i, &self.p_prod).map(|v| v[0]).unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HivState {
    pub t: f64,
    pub v: f64,
    pub i: AgeProfile,
}

impl ModelState for HivState {
    fn scalar_names(&self) -> Vec<&'static str> {
        vec!["T", "V"]
    }

    fn scalars(&self) -> Vec<f64> {
        vec![self.t, self.v]
    }

    fn profile(&self) -> &AgeProfile {
        &self.i
    }

    fn from_parts(scalars: &[f64], profile: AgeProfile) -> Self {
        HivState {
            t: scalars[0],
            v: scalars[1],
            i: profile,
        }
    }

    fn head_value(&self) -> f64 {
        self.v
    }

    fn head_name(&self) -> Option<&'static str> {
        Some("V")
    }
}

/// The HIV system on a grid, either fully nonlinear or with `T` frozen.
#[derive(Debug, Clone)]
pub struct HivModel {
    params: HivParams,
    initial: HivState,
    survival: SurvivalFactors,
    frozen: Option<f64>,
}

impl HivModel {
    pub fn new(params: HivParams, initial: HivState) -> Result<Self> {
        Self::build(params, initial, None)
    }

    /// Linear `(V, i)` system with `T` held at `t_frozen`.
    pub fn frozen(params: HivParams, i0: AgeProfile, v0: f64, t_frozen: f64) -> Result<Self> {
        if !(t_frozen.is_finite() && t_frozen > 0.0) {
            return Err(Error::Precondition(format!(
                "frozen T must be positive, got {t_frozen}"
            )));
        }
        let initial = HivState {
            t: t_frozen,
            v: v0,
            i: i0,
        };
        Self::build(params, initial, Some(t_frozen))
    }

    fn build(params: HivParams, initial: HivState, frozen: Option<f64>) -> Result<Self> {
        initial.i.ensure_compatible(&params.p_prod)?;
        for (name, v) in [("T", initial.t), ("V", initial.v)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if !initial.i.is_nonnegative(0.0) {
            return Err(Error::invalid("initial i must be nonnegative"));
        }
        let survival = params.survival();
        Ok(HivModel {
            params,
            initial,
            survival,
            frozen,
        })
    }

    pub fn params(&self) -> &HivParams {
        &self.params
    }

    pub fn frozen_t(&self) -> Option<f64> {
        self.frozen
    }
}

impl CharacteristicModel for HivModel {
    type State = HivState;

    fn grid(&self) -> AgeGrid {
        self.params.grid()
    }

    fn dim(&self) -> usize {
        1
    }

    fn initial(&self) -> &HivState {
        &self.initial
    }

    fn cell_propagators(&self, _old: &HivState) -> Vec<f64> {
        self.survival.factors().to_vec()
    }

    fn advance_scalars(&self, old: &HivState) -> Vec<f64> {
        let p = &self.params;
        let h = self.grid().da();
        let t = match self.frozen {
            Some(t) => t,
            None => (old.t + h * p.s_in) / (1.0 + h * (p.d + p.k * old.v)),
        };
        let v = (old.v + h * p.production(&old.i)) / (1.0 + h * p.c);
        vec![t, v]
    }

    fn boundary_value(&self, _old: &HivState, new_scalars: &[f64], _new_profile: &AgeProfile) -> Vec<f64> {
        vec![self.params.k * new_scalars[0] * new_scalars[1]]
    }

    fn boundary_coupling(&self, _old: &HivState, _new_scalars: &[f64]) -> SmallMat {
        SmallMat::zeros(1)
    }

    fn weighted_mass(&self, state: &HivState) -> f64 {
        self.params.production(&state.i)
    }

    fn suggested_gamma(&self) -> f64 {
        self.params.delta_a.max_abs() + 1.0
    }
}

fn check_grid(p: &HivParams, g: &AgeGrid, i: &AgeProfile) -> Result<()> {
    p.grid().ensure_same(g)?;
    i.grid().ensure_same(g)
}

pub fn hiv_step(st: &HivState, p: &HivParams, g: &AgeGrid) -> Result<HivState> {
    check_grid(p, g, &st.i)?;
    HivModel::new(p.clone(), st.clone())?.step(st).map(|(next, _)| next)
}

pub fn hiv_simulate(st0: &HivState, p: &HivParams, g: &AgeGrid, horizon: f64) -> Result<Trajectory<HivState>> {
    check_grid(p, g, &st0.i)?;
    march(&HivModel::new(p.clone(), st0.clone())?, horizon)
}

/// Coupled linear `(V, i)` system with `T` frozen at `t_frozen`.
pub fn hiv_frozen_simulate(
    i0: &AgeProfile,
    v0: f64,
    t_frozen: f64,
    p: &HivParams,
    g: &AgeGrid,
    horizon: f64,
) -> Result<Trajectory<HivState>> {
    check_grid(p, g, i0)?;
    march(&HivModel::frozen(p.clone(), i0.clone(), v0, t_frozen)?, horizon)
}

/// A priori bounds on `T` and `V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HivBounds {
    pub t_minus: f64,
    pub t_plus: f64,
    /// Upper bound on `V(t)`.
    pub v_cap: f64,
    /// Effective loss rate of `T` used for `t_minus`.
    pub d_1: f64,
}

/// `T_+ = max(T0 + I0, s/d0)` with `d0 = min(d, delta0)`, `V_cap = max(V0, |p| T_+ / c)`,
/// `d_1 = d + k V_cap`, `T_- = min(T0, s/d_1)`.
pub fn hiv_bounds(st0: &HivState, p: &HivParams) -> Result<HivBounds> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN fails too
    if !(st0.t > 0.0) {
        return Err(Error::Precondition(format!(
            "T_0 must be positive (got {}); restart from a small positive time",
            st0.t
        )));
    }
    let i0 = st0.i.total()[0];
    let d0 = p.d.min(p.delta0);
    let t_plus = (st0.t + i0).max(p.s_in / d0);
    let v_cap = st0.v.max(p.p_sup() / p.c * t_plus);
    let d_1 = p.d + p.k * v_cap;
    let t_minus = st0.t.min(p.s_in / d_1);
    Ok(HivBounds {
        t_minus,
        t_plus,
        v_cap,
        d_1,
    })
}
