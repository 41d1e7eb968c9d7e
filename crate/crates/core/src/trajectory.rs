//! Model states, trajectories, and the common characteristic stepping.
//!
//! A model on the aligned grid is described by four pieces, all evaluated on
//! the state at the old time level except the boundary map:
//!
//! * per-cell propagators `K_j` moving node `j-1` to node `j`,
//! * the update of the scalar compartments,
//! * the boundary map, linear in the new node-0 value,
//! * the self-coupling of that node-0 value.
//!
//! Direct stepping solves the boundary equation for node 0; the monotone
//! iteration in [`crate::comparison`] evaluates the same pieces on a candidate
//! trajectory instead.

use crate::discretization::{AgeGrid, AgeProfile};
use crate::error::{Error, Result};
use crate::linalg::SmallMat;

/// A state made of scalar compartments plus an age profile.
pub trait ModelState: Clone {
    fn scalar_names(&self) -> Vec<&'static str>;
    fn scalars(&self) -> Vec<f64>;
    fn profile(&self) -> &AgeProfile;
    fn from_parts(scalars: &[f64], profile: AgeProfile) -> Self;

    /// Scalar paired with the head coefficient of a spectral functional.
    fn head_value(&self) -> f64 {
        0.0
    }

    /// Name of the head compartment, if the model has one.
    fn head_name(&self) -> Option<&'static str> {
        None
    }
}

/// Per-step diagnostic scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    /// Trapezoid mass summed over components.
    pub total_mass: f64,
    /// Model-specific weighted mass (`int beta i` for SIR, `int p i` for HIV,
    /// birth total for the general model).
    pub weighted_mass: f64,
    /// Cumulative outflux through `a_max`.
    pub dropped_mass: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub grid: AgeGrid,
    pub states: Vec<S>,
    pub diagnostics: Vec<Diagnostics>,
}

impl<S: ModelState> Trajectory<S> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.grid.da()
    }

    pub fn times(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.t).collect()
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn dropped_mass(&self) -> f64 {
        self.diagnostics.last().map_or(0.0, |d| d.dropped_mass)
    }

    /// Whether the outflux exceeded `1e-8` times the initial mass.
    pub fn dropped_exceeds_threshold(&self) -> bool {
        let m0 = self.diagnostics.first().map_or(0.0, |d| d.total_mass);
        self.dropped_mass() > 1e-8 * m0
    }

    /// Values of `i(t, 0)` (first component) at every step.
    pub fn boundary_trace(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.profile().get(0, 0)).collect()
    }
}

pub trait CharacteristicModel {
    type State: ModelState;

    fn grid(&self) -> AgeGrid;

    fn dim(&self) -> usize;

    fn initial(&self) -> &Self::State;

    /// `dim * dim` row-major entries per cell, cells `1..=n_cells` in order.
    fn cell_propagators(&self, old: &Self::State) -> Vec<f64>;

    fn advance_scalars(&self, old: &Self::State) -> Vec<f64>;

    /// Boundary value at the new level, evaluated explicitly on a candidate
    /// new profile (its node-0 value included).
    fn boundary_value(&self, old: &Self::State, new_scalars: &[f64], new_profile: &AgeProfile) -> Vec<f64>;

    /// Matrix `A` with `boundary_value = A u_0 + (terms without u_0)`.
    fn boundary_coupling(&self, old: &Self::State, new_scalars: &[f64]) -> SmallMat;

    fn weighted_mass(&self, state: &Self::State) -> f64;

    /// Quasi-monotonicity shift used by the monotone iteration.
    fn suggested_gamma(&self) -> f64;

    /// One aligned time step; returns the new state and the outflux.
    fn step(&self, old: &Self::State) -> Result<(Self::State, f64)> {
        let grid = self.grid();
        let dim = self.dim();
        let scalars = self.advance_scalars(old);
        let props = self.cell_propagators(old);
        let mut profile = propagate(old.profile(), &props, dim);
        let coupling = self.boundary_coupling(old, &scalars);
        let norm = coupling.inf_norm();
        if norm >= 1.0 {
            let h = grid.da();
            return Err(Error::StepSize {
                coupling: norm,
                da: h,
                suggested_da: 0.5 * h / norm,
            });
        }
        let rhs = self.boundary_value(old, &scalars, &profile);
        let lhs = SmallMat::identity(dim).add(&coupling.scale(-1.0));
        let head = lhs.solve(&rhs)?;
        profile.at_mut(0).copy_from_slice(&head);
        let dropped = grid.da() * old.profile().at(grid.n_cells()).iter().sum::<f64>();
        Ok((Self::State::from_parts(&scalars, profile), dropped))
    }
}

/// Interior transport `out_j = K_j in_{j-1}`, node 0 left at zero.
pub(crate) fn propagate(input: &AgeProfile, props: &[f64], dim: usize) -> AgeProfile {
    let grid = *input.grid();
    let mut out = AgeProfile::zeros(grid, dim);
    let block = dim * dim;
    for j in 1..grid.len() {
        let k = &props[(j - 1) * block..j * block];
        let src = input.at(j - 1).to_vec();
        let dst = out.at_mut(j);
        for r in 0..dim {
            dst[r] = (0..dim).map(|c| k[r * dim + c] * src[c]).sum();
        }
    }
    out
}

pub(crate) fn diagnostics_for<M: CharacteristicModel>(
    model: &M,
    state: &M::State,
    step: usize,
    dropped: f64,
) -> Diagnostics {
    let grid = model.grid();
    Diagnostics {
        t: grid.time(step),
        total_mass: state.profile().total().iter().sum(),
        weighted_mass: model.weighted_mass(state),
        dropped_mass: dropped,
    }
}

/// Marches until `horizon`; on failure returns the partial trajectory with the
/// error tagged by its step index.
pub fn march_partial<M: CharacteristicModel>(model: &M, horizon: f64) -> (Trajectory<M::State>, Option<Error>) {
    let grid = model.grid();
    let mut traj = Trajectory {
        grid,
        states: vec![model.initial().clone()],
        diagnostics: vec![diagnostics_for(model, model.initial(), 0, 0.0)],
    };
    let steps = match grid.steps_for(horizon) {
        Ok(s) => s,
        Err(e) => return (traj, Some(e)),
    };
    let mut dropped_total = 0.0;
    for n in 0..steps {
        match model.step(traj.last()) {
            Ok((next, dropped)) => {
                dropped_total += dropped;
                traj.diagnostics
                    .push(diagnostics_for(model, &next, n + 1, dropped_total));
                traj.states.push(next);
            }
            Err(e) => {
                return (
                    traj,
                    Some(Error::AtStep {
                        step: n + 1,
                        source: Box::new(e),
                    }),
                )
            }
        }
    }
    if traj.dropped_exceeds_threshold() {
        log::warn!(
            "mass leaving a_max = {} reached {:.3e}, above 1e-8 of the initial mass",
            grid.a_max(),
            traj.dropped_mass()
        );
    }
    (traj, None)
}

pub fn march<M: CharacteristicModel>(model: &M, horizon: f64) -> Result<Trajectory<M::State>> {
    match march_partial(model, horizon) {
        (traj, None) => Ok(traj),
        (_, Some(e)) => Err(e),
    }
}
