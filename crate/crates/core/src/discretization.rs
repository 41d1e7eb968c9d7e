//! Age mesh, trapezoid quadrature and the componentwise order on sampled
//! profiles.
//!
//! Every solver in the crate works on a uniform mesh `a_j = j * da` with the
//! time step locked to `da`, so transport along characteristics is an exact
//! shift by one node per step.

use crate::error::{Error, Result};

/// Relative factor used by [`default_order_tol`].
pub const ORDER_TOL_FACTOR: f64 = 1e-9;

/// Uniform age mesh on `[0, a_max]` with trapezoid weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgeGrid {
    a_max: f64,
    n_cells: usize,
    da: f64,
}

impl AgeGrid {
    pub fn new(a_max: f64, n_cells: usize) -> Result<Self> {
        if !(a_max.is_finite() && a_max > 0.0) {
            return Err(Error::invalid(format!("a_max must be positive, got {a_max}")));
        }
        if n_cells == 0 {
            return Err(Error::invalid("n_cells must be at least 1"));
        }
        Ok(AgeGrid {
            a_max,
            n_cells,
            da: a_max / n_cells as f64,
        })
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Age step; also the time step of every solver on this grid.
    pub fn da(&self) -> f64 {
        self.da
    }

    /// Number of nodes, `n_cells + 1`.
    pub fn len(&self) -> usize {
        self.n_cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        if j == self.n_cells {
            self.a_max
        } else {
            j as f64 * self.da
        }
    }

    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.n_cells {
            0.5 * self.da
        } else {
            self.da
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.node(j)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.weight(j)).collect()
    }

    /// Index of the node at `age`, if `age` is a node up to rounding.
    pub fn node_index(&self, age: f64) -> Option<usize> {
        let x = age / self.da;
        let j = x.round();
        if j < 0.0 || j as usize > self.n_cells {
            return None;
        }
        ((x - j).abs() <= 1e-9 * x.abs().max(1.0)).then_some(j as usize)
    }

    /// Number of time steps covering `horizon`, which must be a multiple of `da`.
    pub fn steps_for(&self, horizon: f64) -> Result<usize> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::invalid(format!("horizon must be nonnegative, got {horizon}")));
        }
        let x = horizon / self.da;
        let k = x.round();
        if (x - k).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "horizon {horizon} is not a multiple of the step {}; nearest multiple is {}",
                self.da,
                k * self.da
            )));
        }
        Ok(k as usize)
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.da
    }

    pub(crate) fn ensure_same(&self, other: &AgeGrid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "grid (a_max={}, n_cells={}) vs (a_max={}, n_cells={})",
                self.a_max, self.n_cells, other.a_max, other.n_cells
            )))
        }
    }
}

pub fn make_grid(a_max: f64, n_cells: usize) -> Result<AgeGrid> {
    AgeGrid::new(a_max, n_cells)
}

/// Vector-valued density sampled at the grid nodes, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AgeProfile {
    grid: AgeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl AgeProfile {
    pub fn new(grid: AgeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("profile dimension must be at least 1"));
        }
        if values.len() != grid.len() * dim {
            return Err(Error::invalid(format!(
                "profile needs {} values, got {}",
                grid.len() * dim,
                values.len()
            )));
        }
        Ok(AgeProfile { grid, dim, values })
    }

    pub fn zeros(grid: AgeGrid, dim: usize) -> Self {
        AgeProfile {
            grid,
            dim,
            values: vec![0.0; grid.len() * dim],
        }
    }

    pub fn constant(grid: AgeGrid, value: f64) -> Self {
        AgeProfile {
            grid,
            dim: 1,
            values: vec![value; grid.len()],
        }
    }

    /// Scalar profile sampled from `f` at every node.
    pub fn from_fn(grid: AgeGrid, f: impl Fn(f64) -> f64) -> Self {
        AgeProfile {
            grid,
            dim: 1,
            values: (0..grid.len()).map(|j| f(grid.node(j))).collect(),
        }
    }

    /// Vector profile; `f(a, out)` fills the `dim` components at age `a`.
    pub fn from_fn_vec(grid: AgeGrid, dim: usize, f: impl Fn(f64, &mut [f64])) -> Self {
        let mut values = vec![0.0; grid.len() * dim];
        for (j, chunk) in values.chunks_mut(dim).enumerate() {
            f(grid.node(j), chunk);
        }
        AgeProfile { grid, dim, values }
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Components at node `j`.
    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn at_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.dim + k]
    }

    /// Component `k` as a scalar profile.
    pub fn component(&self, k: usize) -> AgeProfile {
        AgeProfile {
            grid: self.grid,
            dim: 1,
            values: self.values.iter().skip(k).step_by(self.dim).copied().collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> AgeProfile {
        AgeProfile {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn try_add(&self, other: &AgeProfile) -> Result<AgeProfile> {
        self.ensure_compatible(other)?;
        Ok(AgeProfile {
            grid: self.grid,
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= -tol)
    }

    /// Sup-norm distance to `other`.
    pub fn sup_distance(&self, other: &AgeProfile) -> Result<f64> {
        self.ensure_compatible(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Trapezoid L1 norm summed over components.
    pub fn l1_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|j| self.grid.weight(j) * self.at(j).iter().map(|v| v.abs()).sum::<f64>())
            .sum()
    }

    /// Trapezoid integral of each component over `[0, a_max]`.
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for j in 0..self.grid.len() {
            let w = self.grid.weight(j);
            for (o, v) in out.iter_mut().zip(self.at(j)) {
                *o += w * v;
            }
        }
        out
    }

    pub(crate) fn ensure_compatible(&self, other: &AgeProfile) -> Result<()> {
        self.grid.ensure_same(&other.grid)?;
        if self.dim != other.dim {
            return Err(Error::GridMismatch(format!(
                "profile dimension {} vs {}",
                self.dim, other.dim
            )));
        }
        Ok(())
    }
}

/// Per-node `dim x dim` matrix weights, row-major within each node.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixKernel {
    grid: AgeGrid,
    dim: usize,
    entries: Vec<f64>,
}

impl MatrixKernel {
    pub fn new(grid: AgeGrid, dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 || entries.len() != grid.len() * dim * dim {
            return Err(Error::invalid(format!(
                "matrix kernel needs {} entries, got {}",
                grid.len() * dim * dim,
                entries.len()
            )));
        }
        Ok(MatrixKernel { grid, dim, entries })
    }

    /// `weight(a) * I` from a scalar profile.
    pub fn scalar(weight: &AgeProfile, dim: usize) -> Result<Self> {
        if weight.dim() != 1 {
            return Err(Error::invalid("scalar kernel needs a one-component profile"));
        }
        let grid = *weight.grid();
        let mut entries = vec![0.0; grid.len() * dim * dim];
        for j in 0..grid.len() {
            for k in 0..dim {
                entries[j * dim * dim + k * dim + k] = weight.get(j, 0);
            }
        }
        Ok(MatrixKernel { grid, dim, entries })
    }

    pub fn from_fn(grid: AgeGrid, dim: usize, f: impl Fn(f64, usize, usize) -> f64) -> Self {
        let mut entries = Vec::with_capacity(grid.len() * dim * dim);
        for j in 0..grid.len() {
            let a = grid.node(j);
            for r in 0..dim {
                for c in 0..dim {
                    entries.push(f(a, r, c));
                }
            }
        }
        MatrixKernel { grid, dim, entries }
    }

    pub fn grid(&self) -> &AgeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, j: usize) -> &[f64] {
        let s = self.dim * self.dim;
        &self.entries[j * s..(j + 1) * s]
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Trapezoid sum `sum_j w_j K_j p_j`; without a kernel, the plain integral.
pub fn integrate(p: &AgeProfile, kernel: Option<&MatrixKernel>) -> Result<Vec<f64>> {
    let Some(k) = kernel else {
        return Ok(p.total());
    };
    p.grid().ensure_same(k.grid())?;
    if k.dim() != p.dim() {
        return Err(Error::GridMismatch(format!(
            "kernel dimension {} vs profile dimension {}",
            k.dim(),
            p.dim()
        )));
    }
    let n = p.dim();
    let mut out = vec![0.0; n];
    for j in 0..p.grid().len() {
        let w = p.grid().weight(j);
        let m = k.at(j);
        let v = p.at(j);
        for r in 0..n {
            let row: f64 = (0..n).map(|c| m[r * n + c] * v[c]).sum();
            out[r] += w * row;
        }
    }
    Ok(out)
}

/// Trapezoid integral of each component of `p` against a scalar weight.
pub fn weighted_integral(p: &AgeProfile, weight: &AgeProfile) -> Result<Vec<f64>> {
    p.grid().ensure_same(weight.grid())?;
    if weight.dim() != 1 {
        return Err(Error::invalid("weight must be a one-component profile"));
    }
    let mut out = vec![0.0; p.dim()];
    for j in 0..p.grid().len() {
        let w = p.grid().weight(j) * weight.get(j, 0);
        for (o, v) in out.iter_mut().zip(p.at(j)) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// `1e-9 * (1 + max |operand|)`.
pub fn default_order_tol(p: &AgeProfile, q: &AgeProfile) -> f64 {
    ORDER_TOL_FACTOR * (1.0 + p.max_abs().max(q.max_abs()))
}

/// `p <= q + tol` at every node and component.
pub fn le(p: &AgeProfile, q: &AgeProfile, tol: f64) -> Result<bool> {
    p.ensure_compatible(q)?;
    Ok(p.values().iter().zip(q.values()).all(|(a, b)| *a <= b + tol))
}

/// Largest excess `p - q` and where it occurs, as `(excess, node, component)`.
pub fn worst_excess(p: &AgeProfile, q: &AgeProfile) -> Result<(f64, usize, usize)> {
    p.ensure_compatible(q)?;
    let dim = p.dim();
    let mut worst = (f64::NEG_INFINITY, 0, 0);
    for (idx, (a, b)) in p.values().iter().zip(q.values()).enumerate() {
        let d = a - b;
        if d > worst.0 {
            worst = (d, idx / dim, idx % dim);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_weights_follow_trapezoid_rule() {
        let g = make_grid(10.0, 100).unwrap();
        assert!((g.da() - 0.1).abs() < 1e-15);
        assert!((g.weight(0) - 0.05).abs() < 1e-15);
        assert!((g.weight(50) - 0.1).abs() < 1e-15);
        assert!((g.weight(100) - 0.05).abs() < 1e-15);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 10.0).abs() <= 101.0 * f64::EPSILON * 10.0);
    }

    #[test]
    fn single_cell_grid() {
        let g = make_grid(1.0, 1).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 1.0]);
        assert_eq!(g.weights(), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(matches!(make_grid(0.0, 5), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(-1.0, 5), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_grid(1.0, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn nodes_strictly_increase() {
        let g = make_grid(3.7, 37).unwrap();
        let n = g.nodes();
        assert!(n.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*n.last().unwrap(), 3.7);
    }

    #[test]
    fn integrates_constants_and_linear_exactly() {
        let g = make_grid(10.0, 100).unwrap();
        let one = AgeProfile::constant(g, 1.0);
        assert!((integrate(&one, None).unwrap()[0] - 10.0).abs() < 1e-12);

        let g2 = make_grid(2.0, 40).unwrap();
        let one = AgeProfile::constant(g2, 1.0);
        let beta = MatrixKernel::scalar(&AgeProfile::from_fn(g2, |a| a), 1).unwrap();
        assert!((integrate(&one, Some(&beta)).unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_integral_converges_at_second_order() {
        // Richardson check: errors against 1 - e^{-10} shrink by ~4 per halving.
        let exact = 1.0 - (-10.0f64).exp();
        let errs: Vec<f64> = [50usize, 100, 200, 400]
            .iter()
            .map(|&n| {
                let g = make_grid(10.0, n).unwrap();
                let p = AgeProfile::from_fn(g, |a| (-a).exp());
                (integrate(&p, None).unwrap()[0] - exact).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.05, "ratio {ratio}");
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let a = AgeProfile::constant(make_grid(1.0, 10).unwrap(), 1.0);
        let b = AgeProfile::constant(make_grid(1.0, 20).unwrap(), 1.0);
        assert!(matches!(le(&a, &b, 0.0), Err(Error::GridMismatch(_))));
        let k = MatrixKernel::scalar(&b, 1).unwrap();
        assert!(matches!(integrate(&a, Some(&k)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn order_examples() {
        let g = make_grid(1.0, 10).unwrap();
        let q = AgeProfile::from_fn(g, |a| a * a);
        assert!(le(&q, &q, 0.0).unwrap());
        let lower = AgeProfile::from_fn(g, |a| a * a - 0.5);
        assert!(le(&lower, &q, 0.0).unwrap());
        let tol = 1e-6;
        let mut bumped = q.clone();
        bumped.values_mut()[4] += 2.0 * tol;
        assert!(!le(&bumped, &q, tol).unwrap());
        let (excess, node, comp) = worst_excess(&bumped, &q).unwrap();
        assert_eq!((node, comp), (4, 0));
        assert!((excess - 2.0 * tol).abs() < 1e-15);
    }

    #[test]
    fn steps_for_rejects_fractional_horizon() {
        let g = make_grid(1.0, 10).unwrap();
        assert_eq!(g.steps_for(2.0).unwrap(), 20);
        let err = g.steps_for(0.25).unwrap_err().to_string();
        assert!(err.contains("nearest multiple"), "{err}");
    }
}
