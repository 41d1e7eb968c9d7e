//! The last active age of an infectivity kernel and the split of the state
//! space into the interior region, where infection can regrow, and the
//! boundary region, where the infected profile only ages and decays.

use serde::{Serialize, Serializer};

use crate::discretization::{weighted_integral, AgeGrid, AgeProfile};
use crate::error::{Error, Result};
use crate::operator::{transport_step, SurvivalFactors};
use crate::trajectory::{ModelState, Trajectory};

/// Last age at which the kernel is active.
///
/// On a truncated grid this is the node following the last positive sample;
/// a kernel still positive at `a_max` gives [`AStar::Infinite`], which is only
/// an approximation of the continuum value when the kernel's support extends
/// past the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AStar {
    Finite(f64),
    Infinite,
}

impl AStar {
    pub fn value(self) -> f64 {
        match self {
            AStar::Finite(a) => a,
            AStar::Infinite => f64::INFINITY,
        }
    }

    /// Index of the last node at or below `a_star`.
    pub fn node_index(self, grid: &AgeGrid) -> usize {
        match self {
            AStar::Infinite => grid.n_cells(),
            AStar::Finite(a) => {
                let j = (a / grid.da() + 1e-9).floor() as usize;
                j.min(grid.n_cells())
            }
        }
    }
}

impl Serialize for AStar {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AStar::Finite(a) => s.serialize_f64(*a),
            AStar::Infinite => s.serialize_str("infinity"),
        }
    }
}

pub fn a_star(kernel: &AgeProfile) -> Result<AStar> {
    if !kernel.is_nonnegative(0.0) {
        return Err(Error::Precondition("kernel must be nonnegative".into()));
    }
    let grid = *kernel.grid();
    let last = (0..grid.len()).rev().find(|&j| kernel.at(j).iter().any(|v| *v > 0.0));
    match last {
        None => Err(Error::Undefined("a* of a kernel that vanishes identically".into())),
        Some(j) if j == grid.n_cells() => Ok(AStar::Infinite),
        Some(j) => Ok(AStar::Finite(grid.node(j + 1))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interior,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionVerdict {
    pub region: Region,
    /// Trapezoid mass of the profile on `[0, a_star]`.
    pub mass_below_astar: f64,
    /// Head compartment counted with the mass (`V` for HIV).
    pub head: Option<f64>,
}

/// Trapezoid integral of all components over `[0, a_{k}]`.
fn mass_up_to(p: &AgeProfile, k: usize) -> f64 {
    let grid = p.grid();
    let h = grid.da();
    let mut total = 0.0;
    for j in 0..=k {
        let w = if j == 0 || j == k { 0.5 * h } else { h };
        total += w * p.at(j).iter().sum::<f64>();
    }
    if k == 0 {
        0.0
    } else {
        total
    }
}

pub fn classify<S: ModelState>(state: &S, astar: AStar, tol_mass: f64) -> RegionVerdict {
    let k = astar.node_index(state.profile().grid());
    let mass = mass_up_to(state.profile(), k);
    let head = state.head_name().map(|_| state.head_value());
    let total = mass + head.unwrap_or(0.0);
    RegionVerdict {
        region: if total <= tol_mass {
            Region::Boundary
        } else {
            Region::Interior
        },
        mass_below_astar: mass,
        head,
    }
}

/// Pure aging of `i0` for time `t`: shifted with survival, zero below the
/// characteristic `a = t`.
pub fn boundary_explicit(i0: &AgeProfile, surv: &SurvivalFactors, t: f64) -> Result<AgeProfile> {
    let steps = i0.grid().steps_for(t)?;
    let zero = vec![0.0; i0.dim()];
    let mut p = i0.clone();
    for _ in 0..steps {
        p = transport_step(&p, surv, &zero)?.profile;
    }
    Ok(p)
}

/// Default mass tolerance, `1e-12` times the initial total mass.
pub fn default_tol_mass<S: ModelState>(initial: &S) -> f64 {
    let mass = initial.profile().total().iter().sum::<f64>() + initial.head_value().abs();
    1e-12 * mass
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionFlip {
    pub step: usize,
    pub t: f64,
    pub verdict: RegionVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    pub passed: bool,
    pub astar: AStar,
    pub tol_mass: f64,
    pub initial_region: Region,
    /// First step whose region differs from the initial one.
    pub first_flip: Option<RegionFlip>,
    /// Smallest `head + mass below a*` over the run and its step.
    pub min_mass: f64,
    pub min_mass_step: usize,
    /// Largest `|int kernel i|` over a boundary run.
    pub max_kernel_mass: Option<f64>,
    /// Largest `|i(t)| / (e^{-delta t} |i0|) - 1` over a boundary run.
    pub decay_excess: Option<f64>,
}

/// Optional extra checks for boundary runs.
#[derive(Debug, Clone, Default)]
pub struct BoundaryChecks<'a> {
    /// Kernel whose integral against the profile must vanish.
    pub kernel: Option<&'a AgeProfile>,
    /// Decay floor `delta` for `|i(t)| <= e^{-delta t} |i0|`.
    pub decay_rate: Option<f64>,
}

pub fn invariance_check<S: ModelState>(
    traj: &Trajectory<S>,
    astar: AStar,
    tol_mass: f64,
    extra: &BoundaryChecks<'_>,
) -> Result<InvarianceReport> {
    let first = traj.states.first().ok_or_else(|| Error::invalid("empty trajectory"))?;
    let initial = classify(first, astar, tol_mass);
    let mut first_flip = None;
    let mut min_mass = f64::INFINITY;
    let mut min_step = 0;
    for (n, s) in traj.states.iter().enumerate() {
        let v = classify(s, astar, tol_mass);
        let total = v.mass_below_astar + v.head.unwrap_or(0.0);
        if total < min_mass {
            min_mass = total;
            min_step = n;
        }
        if v.region != initial.region && first_flip.is_none() {
            first_flip = Some(RegionFlip {
                step: n,
                t: traj.grid.time(n),
                verdict: v,
            });
        }
    }

    let mut passed = first_flip.is_none();
    let mut max_kernel_mass = None;
    let mut decay_excess = None;
    if initial.region == Region::Boundary {
        if let Some(kernel) = extra.kernel {
            let mut worst = 0.0f64;
            for s in &traj.states {
                let m = weighted_integral(s.profile(), kernel)?;
                worst = worst.max(m.iter().map(|v| v.abs()).sum());
            }
            passed &= worst <= tol_mass;
            max_kernel_mass = Some(worst);
        }
        if let Some(delta) = extra.decay_rate {
            let n0 = first.profile().l1_norm();
            let mut worst = f64::NEG_INFINITY;
            for (n, s) in traj.states.iter().enumerate() {
                let bound = (-delta * traj.grid.time(n)).exp() * n0;
                let excess = if bound > 0.0 {
                    s.profile().l1_norm() / bound - 1.0
                } else {
                    s.profile().l1_norm()
                };
                worst = worst.max(excess);
            }
            passed &= worst <= 1e-9;
            decay_excess = Some(worst);
        }
    }

    Ok(InvarianceReport {
        passed,
        astar,
        tol_mass,
        initial_region: initial.region,
        first_flip,
        min_mass,
        min_mass_step: min_step,
        max_kernel_mass,
        decay_excess,
    })
}
