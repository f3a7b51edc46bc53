use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::field::{Grid, SpaceTimeField};
use crate::scalar::Real;

/// Separable test functions `G_{k,m}(t, u) = ψ_m(t) φ_k(u)` with
/// `φ_k(u) = sin(kπ(u + 1)/2)`, `k = 1..=K`, and `ψ_m` the hat functions on `M` equal
/// intervals of `[0, T]`, `m = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestBasis {
    pub modes: usize,
    pub intervals: usize,
    pub t_end: f64,
}

impl TestBasis {
    pub fn new(modes: usize, intervals: usize, t_end: f64) -> Result<Self> {
        if intervals == 0 {
            return invalid("the temporal basis needs at least one interval");
        }
        if !(t_end > 0.0) {
            return invalid(format!("basis horizon must be positive, got {t_end}"));
        }
        Ok(Self {
            modes,
            intervals,
            t_end,
        })
    }

    pub fn dim(&self) -> usize {
        self.modes * (self.intervals + 1)
    }

    /// Index of `G_{k,m}` (with `k` starting at 1); time-major so the Gram matrix is banded.
    pub fn index(&self, k: usize, m: usize) -> usize {
        m * self.modes + (k - 1)
    }

    /// `(k, m)` of a flat index.
    pub fn element(&self, i: usize) -> (usize, usize) {
        (i % self.modes + 1, i / self.modes)
    }

    /// `φ_k` at the grid nodes, exactly zero at both ends.
    pub fn spatial<T: Real>(&self, k: usize, grid: Grid) -> Vec<T> {
        let n = grid.cells();
        let mut v: Vec<T> = (0..=n)
            .map(|j| {
                let u = grid.node::<f64>(j);
                T::from_f64((k as f64 * std::f64::consts::FRAC_PI_2 * (u + 1.0)).sin()).unwrap()
            })
            .collect();
        v[0] = T::zero();
        v[n] = T::zero();
        v
    }

    /// `ψ_m(t)`.
    pub fn temporal(&self, m: usize, t: f64) -> f64 {
        let s = t * self.intervals as f64 / self.t_end;
        (1.0 - (s - m as f64).abs()).max(0.0)
    }

    /// `Σ_i c_i G_i` sampled on `grid` at `times`.
    pub fn field<T: Real>(&self, coeffs: &[f64], grid: Grid, times: &[T]) -> Result<SpaceTimeField<T>> {
        if coeffs.len() != self.dim() {
            return invalid(format!(
                "{} coefficients for a basis of dimension {}",
                coeffs.len(),
                self.dim()
            ));
        }
        let phis: Vec<Vec<f64>> = (1..=self.modes).map(|k| self.spatial(k, grid)).collect();
        let rows = times
            .iter()
            .map(|t| {
                let t = t.to_f64_lossy();
                let mut row = vec![0.0f64; grid.len()];
                for (i, c) in coeffs.iter().enumerate() {
                    let (k, m) = self.element(i);
                    let w = c * self.temporal(m, t);
                    if w != 0.0 {
                        for (r, p) in row.iter_mut().zip(&phis[k - 1]) {
                            *r += w * p;
                        }
                    }
                }
                row.into_iter().map(|v| T::from_f64(v).unwrap()).collect()
            })
            .collect();
        SpaceTimeField::new(grid, times.to_vec(), rows)
    }

    /// True when every element of `self` lies in the span of `other`.
    pub fn nested_in(&self, other: &TestBasis) -> bool {
        self.modes <= other.modes
            && other.intervals % self.intervals == 0
            && self.t_end == other.t_end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elements_vanish_at_the_boundary() {
        let b = TestBasis::new(5, 3, 1.0).unwrap();
        let g = Grid::new(40).unwrap();
        for k in 1..=5 {
            let phi: Vec<f64> = b.spatial(k, g);
            assert_eq!(phi[0], 0.0);
            assert_eq!(phi[40], 0.0);
        }
        let f = b.field::<f64>(&vec![1.0; b.dim()], g, &[0.0, 0.5, 1.0]).unwrap();
        assert!(f.rows().iter().all(|r| r[0] == 0.0 && r[40] == 0.0));
    }

    #[test]
    fn hats_form_a_partition_of_unity() {
        let b = TestBasis::new(1, 4, 2.0).unwrap();
        for t in [0.0, 0.3, 1.1, 2.0] {
            let s: f64 = (0..=4).map(|m| b.temporal(m, t)).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_eq!(b.temporal(2, 1.0), 1.0);
    }

    #[test]
    fn indexing_round_trips() {
        let b = TestBasis::new(3, 2, 1.0).unwrap();
        for i in 0..b.dim() {
            let (k, m) = b.element(i);
            assert_eq!(b.index(k, m), i);
        }
        assert!(TestBasis::new(2, 2, 1.0).unwrap().nested_in(&TestBasis::new(3, 4, 1.0).unwrap()));
        assert!(!TestBasis::new(2, 3, 1.0).unwrap().nested_in(&TestBasis::new(3, 4, 1.0).unwrap()));
    }
}
