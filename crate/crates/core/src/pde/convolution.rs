use crate::error::{invalid, mismatch, Result};
use crate::field::{DensityField, Grid};
use crate::kernel::BaseKernel;
use crate::scalar::{lit, Real};

/// Minimum number of Simpson panels per grid cell.
pub const MIN_REFINE: usize = 8;

/// Discrete `m ↦ J^neum ⋆ m` on the nodes of a grid.
///
/// Fields are read as piecewise-linear interpolants, so the operator is the matrix
/// `W_jk = ∫ J^neum(u_j, v) φ_k(v) dv` with hat functions `φ_k`, assembled by composite
/// Simpson on `refine` panels per cell. Row sums of `W` are the quadrature of the unit
/// row integrals of the kernel.
#[derive(Debug, Clone)]
pub struct ConvolutionOperator<T> {
    grid: Grid,
    kernel: BaseKernel<T>,
    weights: Vec<T>,
}

impl<T: Real> ConvolutionOperator<T> {
    pub fn new(grid: Grid, kernel: BaseKernel<T>, refine: usize) -> Result<Self> {
        if refine < MIN_REFINE {
            return invalid(format!(
                "quadrature refinement {refine} is below the minimum of {MIN_REFINE} panels per cell"
            ));
        }
        let n = grid.cells();
        let len = grid.len();
        let h = grid.h::<T>();
        let panel = h / T::from_usize_lossy(refine);
        let sixth = lit::<T>(1.0 / 6.0);
        let four = lit::<T>(4.0);
        let half = lit::<T>(0.5);
        let mut weights = vec![T::zero(); len * len];
        // Simpson nodes per cell: panel ends and midpoints, with the two hats that are
        // nonzero on the cell evaluated exactly.
        for j in 0..len {
            let u = grid.node::<T>(j);
            let row = &mut weights[j * len..(j + 1) * len];
            for cell in 0..n {
                let left = grid.node::<T>(cell);
                let mut acc_left = T::zero();
                let mut acc_right = T::zero();
                for p in 0..refine {
                    let a = left + T::from_usize_lossy(p) * panel;
                    let b = a + panel;
                    let m = a + panel * half;
                    for (v, w) in [(a, T::one()), (m, four), (b, T::one())] {
                        let k = kernel.neumann_unchecked(u, v) * w;
                        let s = (v - left) / h;
                        acc_left = acc_left + k * (T::one() - s);
                        acc_right = acc_right + k * s;
                    }
                }
                row[cell] = row[cell] + acc_left * panel * sixth;
                row[cell + 1] = row[cell + 1] + acc_right * panel * sixth;
            }
        }
        Ok(Self {
            grid,
            kernel,
            weights,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kernel(&self) -> &BaseKernel<T> {
        &self.kernel
    }

    pub fn apply(&self, values: &[T]) -> Vec<T> {
        let len = self.grid.len();
        assert_eq!(values.len(), len, "convolution input must live on the operator grid");
        self.weights
            .chunks_exact(len)
            .map(|row| row.iter().zip(values).map(|(w, v)| *w * *v).sum())
            .collect()
    }

    /// `J^neum ⋆ field` at every node; the result carries no band constraint.
    pub fn convolve(&self, field: &DensityField<T>) -> Result<DensityField<T>> {
        if field.grid() != self.grid {
            return mismatch("field and convolution operator live on different grids");
        }
        Ok(DensityField::unchecked(self.grid, self.apply(field.values())))
    }

    /// `max_j |Σ_k W_jk - 1|`.
    pub fn row_sum_error(&self) -> T {
        let len = self.grid.len();
        self.weights
            .chunks_exact(len)
            .map(|row| (row.iter().copied().sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }
}
