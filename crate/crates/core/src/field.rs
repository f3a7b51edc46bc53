//! Macroscopic grid functions on `[-1, 1]` and time-indexed paths of them.
//!
//! A [`DensityField`] stores nodal values on a uniform grid that includes both
//! endpoints. Between nodes it is read as the piecewise-linear interpolant, which
//! is what the trapezoid quadrature used throughout the crate integrates exactly.
//! The endpoint values are the Dirichlet data of the field.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::scalar::{lit, trapezoid_weights, Real};

/// Admissible overshoot outside `[0, 1]` before a field is rejected.
pub const BAND_TOLERANCE: f64 = 1e-6;

/// Uniform grid `u_j = -1 + j h`, `j = 0..=cells`, `h = 2 / cells`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    cells: usize,
}

impl Grid {
    pub fn new(cells: usize) -> Result<Self> {
        if cells < 2 {
            return invalid(format!("grid needs at least 2 cells, got {cells}"));
        }
        Ok(Self { cells })
    }

    /// Grid whose nodes are the macroscopic positions `x / N` of the lattice `{-N..N}`.
    pub fn lattice(half_width: usize) -> Result<Self> {
        Self::new(2 * half_width)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn len(&self) -> usize {
        self.cells + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h<T: Real>(&self) -> T {
        lit::<T>(2.0) / T::from_usize_lossy(self.cells)
    }

    pub fn node<T: Real>(&self, j: usize) -> T {
        -T::one() + T::from_usize_lossy(j) * self.h::<T>()
    }

    pub fn nodes<T: Real>(&self) -> Vec<T> {
        (0..self.len()).map(|j| self.node(j)).collect()
    }

    pub fn weights<T: Real>(&self) -> Vec<T> {
        trapezoid_weights(self.cells, self.h::<T>())
    }

    /// True when every node of `self` is also a node of `finer`.
    pub fn divides(&self, finer: &Grid) -> bool {
        finer.cells % self.cells == 0
    }
}

/// Density profile on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField<T> {
    grid: Grid,
    values: Vec<T>,
}

impl<T: Real> DensityField<T> {
    /// Validates length and the `[0, 1]` band (with [`BAND_TOLERANCE`]).
    pub fn new(grid: Grid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return mismatch(format!(
                "field has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            ));
        }
        check_band(&values, T::zero())?;
        Ok(Self { grid, values })
    }

    /// Builds a field without the band check; for signed differences and test functions.
    pub fn unchecked(grid: Grid, values: Vec<T>) -> Self {
        assert_eq!(values.len(), grid.len(), "field length must match grid");
        Self { grid, values }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(T) -> T) -> Result<Self> {
        let values = grid.nodes::<T>().into_iter().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Grid, c: T) -> Result<Self> {
        Self::new(grid, vec![c; grid.len()])
    }

    /// The stationary heat profile: linear interpolation between the reservoir densities.
    pub fn linear(grid: Grid, rho_minus: T, rho_plus: T) -> Result<Self> {
        let half = lit::<T>(0.5);
        Self::from_fn(grid, |u| {
            (rho_plus + rho_minus) * half + (rho_plus - rho_minus) * half * u
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn rho_minus(&self) -> T {
        self.values[0]
    }

    pub fn rho_plus(&self) -> T {
        self.values[self.grid.cells()]
    }

    /// Replaces the endpoint values with the given Dirichlet data.
    pub fn with_boundary(mut self, rho_minus: T, rho_plus: T) -> Result<Self> {
        let n = self.grid.cells();
        self.values[0] = rho_minus;
        self.values[n] = rho_plus;
        check_band(&self.values, T::zero())?;
        Ok(self)
    }

    /// Piecewise-linear evaluation at `u` in `[-1, 1]`.
    pub fn eval(&self, u: T) -> T {
        let h = self.grid.h::<T>();
        let s = ((u + T::one()) / h).max(T::zero());
        let n = self.grid.cells();
        let j = s.floor().to_usize().unwrap_or(0).min(n - 1);
        let frac = (s - T::from_usize_lossy(j)).min(T::one());
        self.values[j] * (T::one() - frac) + self.values[j + 1] * frac
    }

    /// Exact integral of the piecewise-linear interpolant over `[a, b] ∩ [-1, 1]`.
    pub fn integral(&self, a: T, b: T) -> T {
        let a = a.max(-T::one());
        let b = b.min(T::one());
        if b <= a {
            return T::zero();
        }
        let h = self.grid.h::<T>();
        let n = self.grid.cells();
        let half = lit::<T>(0.5);
        let ja = ((a + T::one()) / h).floor().to_usize().unwrap_or(0).min(n - 1);
        let jb = ((b + T::one()) / h).ceil().to_usize().unwrap_or(n).clamp(1, n);
        let mut total = T::zero();
        for j in ja..jb {
            let left = self.grid.node::<T>(j);
            let lo = a.max(left);
            let hi = b.min(left + h);
            if hi <= lo {
                continue;
            }
            total = total + (self.eval(lo) + self.eval(hi)) * half * (hi - lo);
        }
        total
    }

    /// Trapezoid integral of the field.
    pub fn mass(&self) -> T {
        self.dot_weights(|v| v)
    }

    /// `<field, g>` by the trapezoid rule.
    pub fn pairing(&self, g: &[T]) -> T {
        assert_eq!(g.len(), self.values.len());
        let w = self.grid.weights::<T>();
        self.values
            .iter()
            .zip(g)
            .zip(&w)
            .map(|((v, g), w)| *v * *g * *w)
            .sum()
    }

    fn dot_weights(&self, f: impl Fn(T) -> T) -> T {
        let w = self.grid.weights::<T>();
        self.values.iter().zip(&w).map(|(v, w)| f(*v) * *w).sum()
    }

    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        self.same_grid(other)?;
        let w = self.grid.weights::<T>();
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(&w)
            .map(|((a, b), w)| (*a - *b).abs() * *w)
            .sum())
    }

    pub fn l2_distance(&self, other: &Self) -> Result<T> {
        self.same_grid(other)?;
        let w = self.grid.weights::<T>();
        let s: T = self
            .values
            .iter()
            .zip(&other.values)
            .zip(&w)
            .map(|((a, b), w)| (*a - *b) * (*a - *b) * *w)
            .sum();
        Ok(s.sqrt())
    }

    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max))
    }

    /// Cell averages over the dual cells `[u_j - H/2, u_j + H/2] ∩ [-1, 1]` of `target`.
    pub fn project(&self, target: Grid) -> Result<Self> {
        let big_h = target.h::<T>();
        let half = big_h * lit(0.5);
        let values = (0..target.len())
            .map(|j| {
                let u = target.node::<T>(j);
                let a = (u - half).max(-T::one());
                let b = (u + half).min(T::one());
                self.integral(a, b) / (b - a)
            })
            .collect();
        Self::new(target, values)
    }

    pub(crate) fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return mismatch(format!(
                "grids differ: {} vs {} cells",
                self.grid.cells(),
                other.grid.cells()
            ));
        }
        Ok(())
    }
}

pub(crate) fn check_band<T: Real>(values: &[T], time: T) -> Result<()> {
    let lo = lit::<T>(-BAND_TOLERANCE);
    let hi = lit::<T>(1.0 + BAND_TOLERANCE);
    for (node, v) in values.iter().enumerate() {
        if !(*v >= lo && *v <= hi) {
            return Err(Error::OutOfRange {
                node,
                value: v.to_f64_lossy(),
                time: time.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Time-indexed sequence of fields sharing one spatial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPath<T> {
    times: Vec<T>,
    fields: Vec<DensityField<T>>,
}

impl<T: Real> DensityPath<T> {
    pub fn new(times: Vec<T>, fields: Vec<DensityField<T>>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return mismatch(format!(
                "path has {} times and {} fields",
                times.len(),
                fields.len()
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("path times must be strictly increasing");
        }
        let grid = fields[0].grid();
        if fields.iter().any(|f| f.grid() != grid) {
            return mismatch("all fields of a path must share one grid");
        }
        Ok(Self { times, fields })
    }

    /// Holds `field` fixed on the uniform time grid with `steps` intervals over `[0, t_end]`.
    pub fn frozen(field: DensityField<T>, t_end: T, steps: usize) -> Result<Self> {
        let dt = t_end / T::from_usize_lossy(steps);
        let times = (0..=steps).map(|n| T::from_usize_lossy(n) * dt).collect();
        Self::new(times, vec![field; steps + 1])
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn fields(&self) -> &[DensityField<T>] {
        &self.fields
    }

    pub fn grid(&self) -> Grid {
        self.fields[0].grid()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t_end(&self) -> T {
        self.times[self.times.len() - 1]
    }

    pub fn first(&self) -> &DensityField<T> {
        &self.fields[0]
    }

    pub fn last(&self) -> &DensityField<T> {
        &self.fields[self.fields.len() - 1]
    }

    /// Keeps every `stride`-th time plus the final one.
    pub fn subsample(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        let mut idx: Vec<usize> = (0..self.times.len()).step_by(stride).collect();
        if *idx.last().unwrap() != self.times.len() - 1 {
            idx.push(self.times.len() - 1);
        }
        Self {
            times: idx.iter().map(|&i| self.times[i]).collect(),
            fields: idx.iter().map(|&i| self.fields[i].clone()).collect(),
        }
    }
}

/// Largest boundary value accepted as a zero trace.
pub const TRACE_TOLERANCE: f64 = 1e-12;

/// Space-time function `F_t(u)` stored on a grid at a list of times, vanishing at
/// `u = ±1`. Between stored times it is linearly interpolated; outside it is held
/// constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField<T> {
    grid: Grid,
    times: Vec<T>,
    values: Vec<Vec<T>>,
}

impl<T: Real> SpaceTimeField<T> {
    pub fn new(grid: Grid, times: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return mismatch("space-time field needs one value row per time");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("space-time field times must be strictly increasing");
        }
        let n = grid.cells();
        for row in &values {
            if row.len() != grid.len() {
                return mismatch("space-time field row does not match its grid");
            }
            let trace = row[0].abs().max(row[n].abs());
            if trace > lit(TRACE_TOLERANCE) {
                return Err(Error::InvalidArgument(format!(
                    "space-time field must vanish at u = ±1 (found {:e})", trace.to_f64_lossy()
                )));
            }
        }
        Ok(Self {
            grid,
            times,
            values,
        })
    }

    pub fn zero(grid: Grid, times: Vec<T>) -> Result<Self> {
        let rows = vec![vec![T::zero(); grid.len()]; times.len()];
        Self::new(grid, times, rows)
    }

    /// Samples `f(t, u)` at the grid nodes; the endpoint samples must already vanish.
    pub fn from_fn(grid: Grid, times: Vec<T>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let nodes = grid.nodes::<T>();
        let values = times
            .iter()
            .map(|&t| nodes.iter().map(|&u| f(t, u)).collect())
            .collect();
        Self::new(grid, times, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            grid: self.grid,
            times: self.times.clone(),
            values: self
                .values
                .iter()
                .map(|r| r.iter().map(|v| *v * s).collect())
                .collect(),
        }
    }

    /// Nodal values at time `t`.
    pub fn at(&self, t: T) -> Vec<T> {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[last] {
            return self.values[last].clone();
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(a, b)| *a * (T::one() - w) + *b * w)
            .collect()
    }

    /// Value at node `j` and time `t`, interpolated as in [`at`](Self::at).
    pub fn value_at(&self, t: T, j: usize) -> T {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.values[0][j];
        }
        if t >= self.times[last] {
            return self.values[last][j];
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.values[k][j] * (T::one() - w) + self.values[k + 1][j] * w
    }

    /// Largest nodal value of `|F(u_{j+1}) - F(u_j)|` over all stored times.
    pub fn max_increment(&self) -> T {
        self.values
            .iter()
            .flat_map(|r| r.windows(2).map(|w| (w[1] - w[0]).abs()))
            .fold(T::zero(), T::max)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|r| r.iter().all(|v| *v == T::zero()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_values_outside_band() {
        let g = Grid::new(4).unwrap();
        let err = DensityField::new(g, vec![0.0, 0.5, 1.1, 0.5, 1.0]).unwrap_err();
        assert!(matches!(err, Error::OutOfRange { node: 2, .. }));
        assert!(DensityField::new(g, vec![-5e-7, 0.5, 0.5, 0.5, 1.0 + 5e-7]).is_ok());
    }

    #[test]
    fn integral_matches_closed_form_for_linear_profile() {
        let g = Grid::new(10).unwrap();
        let f = DensityField::linear(g, 0.2, 0.8).unwrap();
        // ∫_{-0.33}^{0.71} (0.5 + 0.3u) du
        let exact = 0.5 * (0.71 + 0.33) + 0.15 * (0.71f64.powi(2) - 0.33f64.powi(2));
        assert!((f.integral(-0.33, 0.71) - exact).abs() < 1e-14);
        assert!((f.mass() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projection_preserves_linear_profiles_in_the_interior() {
        let fine = Grid::new(200).unwrap();
        let f = DensityField::linear(fine, 0.2, 0.8).unwrap();
        let p = f.project(Grid::new(20).unwrap()).unwrap();
        for (j, v) in p.values().iter().enumerate().skip(1).take(19) {
            let u = -1.0 + j as f64 * 0.1;
            assert!((v - (0.5 + 0.3 * u)).abs() < 1e-13);
        }
    }

    #[test]
    fn path_requires_shared_grid() {
        let a = DensityField::constant(Grid::new(4).unwrap(), 0.5).unwrap();
        let b = DensityField::constant(Grid::new(8).unwrap(), 0.5).unwrap();
        assert!(DensityPath::new(vec![0.0, 1.0], vec![a, b]).is_err());
    }
}
