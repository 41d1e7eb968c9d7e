//! The age operator made concrete: its resolvent in closed form and the
//! one-step transport along characteristics.

use crate::discretization::{AgeGrid, AgeProfile};
use crate::error::{Error, Result};

/// Per-cell survival `s_j = exp(-int_{a_{j-1}}^{a_j} nu)`, the integral taken
/// by the trapezoid rule on the cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalFactors {
    grid: AgeGrid,
    factors: Vec<f64>,
}

impl SurvivalFactors {
    pub fn from_rate(rate: &AgeProfile) -> Result<Self> {
        if rate.dim() != 1 {
            return Err(Error::invalid("survival rate must be a scalar profile"));
        }
        let grid = *rate.grid();
        let h = grid.da();
        let factors = (1..grid.len())
            .map(|j| (-0.5 * h * (rate.get(j - 1, 0) + rate.get(j, 0))).exp())
            .collect();
        Ok(SurvivalFactors { grid, factors })
    }

    /// Factors for a constant rate.
    pub fn constant(grid: AgeGrid, rate: f64) -> Self {
        SurvivalFactors {
            grid,
            factors: vec![(-rate * grid.da()).exp(); grid.n_cells()],
        }
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    /// Factor for the cell ending at node `j` (`1 <= j <= n_cells`).
    pub fn factor(&self, j: usize) -> f64 {
        self.factors[j - 1]
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }

    /// Survival from age 0 to every node: `prod_{k <= j} s_k`, with 1 at node 0.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.len());
        let mut acc = 1.0;
        out.push(acc);
        for s in &self.factors {
            acc *= s;
            out.push(acc);
        }
        out
    }
}

/// Result of a transport step: the new profile and the mass that left `a_max`.
#[derive(Debug, Clone)]
pub struct Transported {
    pub profile: AgeProfile,
    /// Outflux `da * p(a_max)` per component.
    pub dropped: Vec<f64>,
}

/// One characteristic step of length `da`: `out_j = s_j p_{j-1}`, `out_0 = inflow`.
pub fn transport_step(p: &AgeProfile, surv: &SurvivalFactors, inflow: &[f64]) -> Result<Transported> {
    p.grid().ensure_same(surv.grid())?;
    let dim = p.dim();
    if inflow.len() != dim {
        return Err(Error::invalid(format!(
            "inflow has {} components, profile has {dim}",
            inflow.len()
        )));
    }
    let grid = *p.grid();
    let n = grid.n_cells();
    let mut out = AgeProfile::zeros(grid, dim);
    out.at_mut(0).copy_from_slice(inflow);
    for j in 1..=n {
        let s = surv.factor(j);
        let (src, dst) = (p.at(j - 1), j);
        for (o, v) in out.at_mut(dst).iter_mut().zip(src) {
            *o = s * v;
        }
    }
    let dropped = p.at(n).iter().map(|v| grid.da() * v).collect();
    Ok(Transported { profile: out, dropped })
}

/// `phi(a) = e^{-(lambda+gamma) a} head + int_0^a e^{-(lambda+gamma)(a-l)} tail(l) dl`.
///
/// The convolution is the composite trapezoid on `[0, a_j]`, accumulated by
/// the recurrence `I_j = e^{-kh} I_{j-1} + h/2 (e^{-kh} tail_{j-1} + tail_j)`.
pub fn resolvent_apply(lambda: f64, gamma: f64, head: &[f64], tail: &AgeProfile) -> Result<AgeProfile> {
    if lambda <= -gamma {
        return Err(Error::OutOfResolventSet { lambda, gamma });
    }
    let dim = tail.dim();
    if head.len() != dim {
        return Err(Error::invalid("head and tail dimensions differ"));
    }
    let grid = *tail.grid();
    let kappa = lambda + gamma;
    let h = grid.da();
    let decay = (-kappa * h).exp();
    let mut out = AgeProfile::zeros(grid, dim);
    let mut conv = vec![0.0; dim];
    for j in 0..grid.len() {
        if j > 0 {
            for (k, c) in conv.iter_mut().enumerate() {
                *c = decay * *c + 0.5 * h * (decay * tail.get(j - 1, k) + tail.get(j, k));
            }
        }
        let e = (-kappa * grid.node(j)).exp();
        for (k, o) in out.at_mut(j).iter_mut().enumerate() {
            *o = e * head[k] + conv[k];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{le, make_grid};

    #[test]
    fn survival_factors_are_exact_for_constant_rate() {
        let g = make_grid(5.0, 50).unwrap();
        let s = SurvivalFactors::from_rate(&AgeProfile::constant(g, 0.7)).unwrap();
        for &f in s.factors() {
            assert!((f - (-0.07f64).exp()).abs() < 1e-15);
            assert!(f > 0.0 && f <= 1.0);
        }
        let cum = s.cumulative();
        assert!((cum[50] - (-3.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn factors_bounded_by_floor_decay() {
        let g = make_grid(4.0, 40).unwrap();
        let delta = 0.3;
        let rate = AgeProfile::from_fn(g, |a| delta + a.sin().abs());
        let s = SurvivalFactors::from_rate(&rate).unwrap();
        assert!(s.factors().iter().all(|&f| f <= (-delta * g.da()).exp() + 1e-16));
    }

    #[test]
    fn transport_shifts_an_indicator() {
        let g = make_grid(1.0, 10).unwrap();
        let surv = SurvivalFactors::constant(g, 1.0);
        let mut p = AgeProfile::zeros(g, 1);
        p.values_mut()[3] = 1.0;
        let out = transport_step(&p, &surv, &[0.0]).unwrap().profile;
        for j in 0..g.len() {
            let expect = if j == 4 { (-0.1f64).exp() } else { 0.0 };
            assert!((out.get(j, 0) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn transport_inflow_only() {
        let g = make_grid(1.0, 10).unwrap();
        let surv = SurvivalFactors::constant(g, 1.0);
        let out = transport_step(&AgeProfile::zeros(g, 1), &surv, &[2.5]).unwrap().profile;
        assert_eq!(out.get(0, 0), 2.5);
        assert!(out.values()[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_steps_compose() {
        let g = make_grid(1.0, 10).unwrap();
        let surv = SurvivalFactors::from_rate(&AgeProfile::from_fn(g, |a| 1.0 + a)).unwrap();
        let zero = AgeProfile::zeros(g, 1);
        let one = transport_step(&zero, &surv, &[3.0]).unwrap().profile;
        let two = transport_step(&one, &surv, &[5.0]).unwrap().profile;
        assert_eq!(two.get(0, 0), 5.0);
        assert!((two.get(1, 0) - surv.factor(1) * 3.0).abs() < 1e-15);
        assert!(two.values()[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dropped_mass_is_the_outflux() {
        let g = make_grid(1.0, 10).unwrap();
        let surv = SurvivalFactors::constant(g, 0.0);
        let p = AgeProfile::constant(g, 2.0);
        let t = transport_step(&p, &surv, &[0.0]).unwrap();
        assert!((t.dropped[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn resolvent_closed_forms() {
        let g = make_grid(10.0, 1000).unwrap();
        let zero = AgeProfile::zeros(g, 1);
        let phi = resolvent_apply(0.0, 1.0, &[2.0], &zero).unwrap();
        for j in 0..g.len() {
            assert!((phi.get(j, 0) - 2.0 * (-g.node(j)).exp()).abs() < 1e-13);
        }
        let one = AgeProfile::constant(g, 1.0);
        let phi = resolvent_apply(0.0, 1.0, &[0.0], &one).unwrap();
        for j in 0..g.len() {
            let exact = 1.0 - (-g.node(j)).exp();
            assert!((phi.get(j, 0) - exact).abs() < 1e-5);
        }
        assert!(le(&zero, &phi, 0.0).unwrap());
    }

    #[test]
    fn resolvent_rejects_lambda_outside_resolvent_set() {
        let g = make_grid(1.0, 10).unwrap();
        let err = resolvent_apply(-2.0, 1.0, &[1.0], &AgeProfile::zeros(g, 1)).unwrap_err();
        assert!(matches!(err, Error::OutOfResolventSet { .. }));
    }

    #[test]
    fn resolvent_converges_at_second_order() {
        // psi(l) = cos(l), kappa = 1.5: phi(a) = int_0^a e^{-k(a-l)} cos l dl in closed form.
        let kappa: f64 = 1.5;
        let exact = |a: f64| (kappa * a.cos() + a.sin() - kappa * (-kappa * a).exp()) / (kappa * kappa + 1.0);
        let errs: Vec<f64> = [40usize, 80, 160]
            .iter()
            .map(|&n| {
                let g = make_grid(4.0, n).unwrap();
                let psi = AgeProfile::from_fn(g, f64::cos);
                let phi = resolvent_apply(0.5, 1.0, &[0.0], &psi).unwrap();
                (0..g.len())
                    .map(|j| (phi.get(j, 0) - exact(g.node(j))).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.7 && ratio < 4.3, "ratio {ratio}");
        }
    }
}
