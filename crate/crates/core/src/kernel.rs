//! Kac interaction: the base bump kernel, its Neumann reflection on `[-1, 1]`,
//! the lattice table `J_N`, the Hamiltonian and incremental exchange energies.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::scalar::{lit, Real};

/// Default number of trapezoid intervals used to normalize the base profile.
pub const DEFAULT_NORMALIZATION_RESOLUTION: usize = 20_000;

/// Shape of the base kernel `r ↦ J(0, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelProfile {
    /// `exp(-1 / (1 - r²))` on `|r| < 1`.
    Bump,
}

impl KernelProfile {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "bump" => Some(Self::Bump),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Bump => "bump",
        }
    }
}

/// Even, smooth probability kernel of range one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseKernel<T> {
    profile: KernelProfile,
    inv_norm: T,
}

impl<T: Real> BaseKernel<T> {
    /// Normalizes the profile with a composite trapezoid rule on `resolution` intervals.
    ///
    /// The bump and all its derivatives vanish at `r = ±1`, so the trapezoid rule is
    /// spectrally accurate here.
    pub fn new(profile: KernelProfile, resolution: usize) -> Result<Self> {
        if resolution < 16 {
            return invalid(format!("normalization resolution {resolution} is too coarse"));
        }
        let raw = Self {
            profile,
            inv_norm: T::one(),
        };
        let h = lit::<T>(2.0) / T::from_usize_lossy(resolution);
        let z: T = (1..resolution)
            .map(|k| raw.eval(-T::one() + T::from_usize_lossy(k) * h))
            .sum::<T>()
            * h;
        Ok(Self {
            profile,
            inv_norm: T::one() / z,
        })
    }

    pub fn bump() -> Self {
        Self::new(KernelProfile::Bump, DEFAULT_NORMALIZATION_RESOLUTION)
            .expect("default resolution is valid")
    }

    pub fn profile(&self) -> KernelProfile {
        self.profile
    }

    /// `J(0, r)`.
    #[inline]
    pub fn eval(&self, r: T) -> T {
        let q = T::one() - r * r;
        if q <= T::zero() {
            return T::zero();
        }
        match self.profile {
            KernelProfile::Bump => self.inv_norm * (-T::one() / q).exp(),
        }
    }

    /// `d/dr J(0, r)`.
    #[inline]
    pub fn derivative(&self, r: T) -> T {
        let q = T::one() - r * r;
        if q <= T::zero() {
            return T::zero();
        }
        match self.profile {
            KernelProfile::Bump => {
                self.inv_norm * (-T::one() / q).exp() * (-lit::<T>(2.0) * r / (q * q))
            }
        }
    }

    /// `J^neum(u, v) = J(u, v) + J(u, 2 - v) + J(u, -2 - v)` without range checks.
    #[inline]
    pub fn neumann_unchecked(&self, u: T, v: T) -> T {
        let two = lit::<T>(2.0);
        self.eval(v - u) + self.eval(two - v - u) + self.eval(two + v + u)
    }

    /// Reflected kernel on `[-1, 1]²`.
    pub fn neumann(&self, u: T, v: T) -> Result<T> {
        let one = T::one();
        if !(u >= -one && u <= one && v >= -one && v <= one) {
            return invalid(format!("neumann kernel arguments ({u}, {v}) outside [-1, 1]"));
        }
        Ok(self.neumann_unchecked(u, v))
    }

    /// `∂_u J^neum(u, v)`.
    #[inline]
    pub fn neumann_du(&self, u: T, v: T) -> T {
        let two = lit::<T>(2.0);
        -self.derivative(v - u) - self.derivative(two - v - u) + self.derivative(two + v + u)
    }

    /// `sup_{u,v} |∂_u J^neum(u, v)|`: a 101 x 101 scan (about 10⁴ points)
    /// followed by three local zooms around the running maximum.
    pub fn sup_gradient(&self) -> T {
        let coarse = 100usize;
        let mut best = (T::zero(), T::zero(), T::zero());
        let scan = |lo_u: T, hi_u: T, lo_v: T, hi_v: T, best: &mut (T, T, T)| {
            let du = (hi_u - lo_u) / T::from_usize_lossy(coarse);
            let dv = (hi_v - lo_v) / T::from_usize_lossy(coarse);
            for i in 0..=coarse {
                let u = lo_u + T::from_usize_lossy(i) * du;
                for j in 0..=coarse {
                    let v = lo_v + T::from_usize_lossy(j) * dv;
                    let g = self.neumann_du(u, v).abs();
                    if g > best.0 {
                        *best = (g, u, v);
                    }
                }
            }
        };
        let one = T::one();
        scan(-one, one, -one, one, &mut best);
        let mut radius = lit::<T>(0.04);
        for _ in 0..3 {
            let (_, u, v) = best;
            scan(
                (u - radius).max(-one),
                (u + radius).min(one),
                (v - radius).max(-one),
                (v + radius).min(one),
                &mut best,
            );
            radius = radius * lit(0.04);
        }
        best.0
    }
}

/// Occupancy configuration on `Λ_N = {-N, …, N}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    half_width: usize,
    occupancy: Vec<u8>,
}

impl Configuration {
    pub fn new(half_width: usize, occupancy: Vec<u8>) -> Result<Self> {
        if occupancy.len() != 2 * half_width + 1 {
            return mismatch(format!(
                "configuration of length {} for N = {half_width}",
                occupancy.len()
            ));
        }
        if let Some(i) = occupancy.iter().position(|&e| e > 1) {
            return invalid(format!("occupancy {} at index {i} is not 0 or 1", occupancy[i]));
        }
        Ok(Self {
            half_width,
            occupancy,
        })
    }

    pub fn empty(half_width: usize) -> Self {
        Self {
            half_width,
            occupancy: vec![0; 2 * half_width + 1],
        }
    }

    pub fn full(half_width: usize) -> Self {
        Self {
            half_width,
            occupancy: vec![1; 2 * half_width + 1],
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.occupancy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupancy.is_empty()
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    pub(crate) fn occupancy_mut(&mut self) -> &mut [u8] {
        &mut self.occupancy
    }

    pub fn contains(&self, x: isize) -> bool {
        x.unsigned_abs() <= self.half_width
    }

    /// Array index of site `x`.
    #[inline]
    pub fn index(&self, x: isize) -> usize {
        (x + self.half_width as isize) as usize
    }

    #[inline]
    pub fn get(&self, x: isize) -> u8 {
        self.occupancy[self.index(x)]
    }

    pub fn set(&mut self, x: isize, value: u8) {
        assert!(value <= 1);
        let i = self.index(x);
        self.occupancy[i] = value;
    }

    /// `η^{x,y}`.
    pub fn exchanged(&self, x: isize, y: isize) -> Self {
        let mut out = self.clone();
        let (i, j) = (self.index(x), self.index(y));
        out.occupancy.swap(i, j);
        out
    }

    /// `σ^x η`.
    pub fn flipped(&self, x: isize) -> Self {
        let mut out = self.clone();
        let i = self.index(x);
        out.occupancy[i] ^= 1;
        out
    }

    pub fn particles(&self) -> usize {
        self.occupancy.iter().map(|&e| e as usize).sum()
    }
}

/// Lattice interaction `J_N(x, y) = N⁻¹ J^neum(x/N, y/N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable<T> {
    half_width: usize,
    kernel: BaseKernel<T>,
    values: Vec<T>,
    sup_grad: T,
}

impl<T: Real> KernelTable<T> {
    pub fn build(half_width: usize, kernel: BaseKernel<T>) -> Result<Self> {
        if half_width < 2 {
            return invalid(format!("kernel table needs N >= 2, got {half_width}"));
        }
        let side = 2 * half_width + 1;
        let n = T::from_usize_lossy(half_width);
        let inv_n = T::one() / n;
        let pos = |i: usize| (T::from_usize_lossy(i) - n) * inv_n;
        let mut values = vec![T::zero(); side * side];
        for i in 0..side {
            for j in i..side {
                let v = kernel.neumann_unchecked(pos(i), pos(j)) * inv_n;
                values[i * side + j] = v;
                values[j * side + i] = v;
            }
        }
        Ok(Self {
            half_width,
            kernel,
            values,
            sup_grad: kernel.sup_gradient(),
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn side(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn kernel(&self) -> &BaseKernel<T> {
        &self.kernel
    }

    /// `S = sup |∂_u J^neum|`.
    pub fn sup_grad(&self) -> T {
        self.sup_grad
    }

    /// `J_N(x, y)` for sites `x, y ∈ Λ_N`.
    #[inline]
    pub fn get(&self, x: isize, y: isize) -> T {
        let n = self.half_width as isize;
        self.at((x + n) as usize, (y + n) as usize)
    }

    #[inline]
    pub(crate) fn at(&self, i: usize, j: usize) -> T {
        self.values[i * self.side() + j]
    }

    #[inline]
    pub(crate) fn row(&self, i: usize) -> &[T] {
        let side = self.side();
        &self.values[i * side..(i + 1) * side]
    }

    /// `max_x |Σ_y J_N(x, y) - 1|`, the Riemann-sum defect of the unit row integrals.
    pub fn row_sum_error(&self) -> T {
        (0..self.side())
            .map(|i| (self.row(i).iter().copied().sum::<T>() - T::one()).abs())
            .fold(T::zero(), T::max)
    }

    fn check(&self, config: &Configuration) -> Result<()> {
        if config.half_width() != self.half_width {
            return mismatch(format!(
                "configuration N = {} but kernel table N = {}",
                config.half_width(),
                self.half_width
            ));
        }
        Ok(())
    }

    /// `Σ_z η(z) (J_N(i, z) - J_N(j, z))` over array indices.
    #[inline]
    pub(crate) fn field_difference(&self, occupancy: &[u8], i: usize, j: usize) -> T {
        self.row(i)
            .iter()
            .zip(self.row(j))
            .zip(occupancy)
            .map(|((a, b), &e)| if e == 1 { *a - *b } else { T::zero() })
            .sum()
    }

    /// Incremental exchange energy for array indices; caller guarantees adjacency.
    #[inline]
    pub(crate) fn delta_h_indices(&self, occupancy: &[u8], i: usize, j: usize) -> T {
        let s = occupancy[i] as i8 - occupancy[j] as i8;
        if s == 0 {
            return T::zero();
        }
        let half = lit::<T>(0.5);
        let diagonal = self.at(i, j) - half * (self.at(i, i) + self.at(j, j));
        let cross = self.field_difference(occupancy, i, j);
        if s > 0 {
            diagonal + cross
        } else {
            diagonal - cross
        }
    }

    /// Upper bound on `|H_N(η^{i,j}) - H_N(η)|` over all configurations.
    pub(crate) fn delta_h_bound(&self, i: usize, j: usize) -> T {
        let half = lit::<T>(0.5);
        let diagonal = (self.at(i, j) - half * (self.at(i, i) + self.at(j, j))).abs();
        let mut pos = T::zero();
        let mut neg = T::zero();
        for (a, b) in self.row(i).iter().zip(self.row(j)) {
            let d = *a - *b;
            if d > T::zero() {
                pos = pos + d;
            } else {
                neg = neg - d;
            }
        }
        diagonal + pos.max(neg)
    }
}

/// `H_N(η) = -½ Σ_{x,y} J_N(x, y) η(x) η(y)`, diagonal included.
pub fn hamiltonian<T: Real>(config: &Configuration, table: &KernelTable<T>) -> Result<T> {
    table.check(config)?;
    let occ = config.occupancy();
    let mut total = T::zero();
    for (i, &ei) in occ.iter().enumerate() {
        if ei == 0 {
            continue;
        }
        total = total
            + table
                .row(i)
                .iter()
                .zip(occ)
                .map(|(j, &e)| if e == 1 { *j } else { T::zero() })
                .sum::<T>();
    }
    Ok(-lit::<T>(0.5) * total)
}

/// `H_N(η^{x,y}) - H_N(η)` for nearest neighbours `x, y`, in time linear in the
/// interaction range:
///
/// `(η(x) - η(y))² [J_N(x,y) - ½J_N(x,x) - ½J_N(y,y)] + (η(x) - η(y)) Σ_z η(z) [J_N(x,z) - J_N(y,z)]`.
pub fn delta_h_exchange<T: Real>(
    config: &Configuration,
    x: isize,
    y: isize,
    table: &KernelTable<T>,
) -> Result<T> {
    table.check(config)?;
    if !config.contains(x) || !config.contains(y) {
        return invalid(format!("sites ({x}, {y}) outside the lattice"));
    }
    if (x - y).abs() != 1 {
        return invalid(format!("sites {x} and {y} are not nearest neighbours"));
    }
    Ok(table.delta_h_indices(config.occupancy(), config.index(x), config.index(y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(n: usize, rng: &mut ChaCha8Rng) -> Configuration {
        let occ = (0..2 * n + 1).map(|_| rng.gen_range(0..2u8)).collect();
        Configuration::new(n, occ).unwrap()
    }

    #[test]
    fn base_kernel_is_even_and_compactly_supported() {
        let k = BaseKernel::<f64>::bump();
        for i in 0..=200 {
            let r = -1.2 + i as f64 * 0.012;
            assert_eq!(k.eval(r), k.eval(-r));
            if r.abs() >= 1.0 {
                assert_eq!(k.eval(r), 0.0);
            }
        }
    }

    #[test]
    fn sup_gradient_matches_a_dense_scan() {
        let k = BaseKernel::<f64>::bump();
        let s = k.sup_gradient();
        let m = 1000;
        let mut dense = 0.0f64;
        for i in 0..=m {
            let u = -1.0 + 2.0 * i as f64 / m as f64;
            for j in 0..=m {
                let v = -1.0 + 2.0 * j as f64 / m as f64;
                dense = dense.max(k.neumann_du(u, v).abs());
            }
        }
        assert!(dense <= s * (1.0 + 1e-9), "{dense} > {s}");
        assert!(s <= dense * 1.001, "{s} vs {dense}");
    }

    #[test]
    fn base_kernel_has_unit_mass() {
        let k = BaseKernel::<f64>::bump();
        // independent resolution from the normalization pass
        let m = 77_777;
        let h = 2.0 / m as f64;
        let mass: f64 = (1..m).map(|i| k.eval(-1.0 + i as f64 * h)).sum::<f64>() * h;
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
    }

    #[test]
    fn reflections_vanish_in_the_bulk() {
        let k = BaseKernel::<f64>::bump();
        assert_eq!(k.neumann(0.0, 0.5).unwrap(), k.eval(0.5));
    }

    #[test]
    fn right_corner_doubles_the_peak() {
        let k = BaseKernel::<f64>::bump();
        let v = k.neumann(1.0, 1.0).unwrap();
        assert!((v - 2.0 * k.eval(0.0)).abs() < 1e-15);
        let w = k.neumann(-1.0, -1.0).unwrap();
        assert!((w - 2.0 * k.eval(0.0)).abs() < 1e-15);
    }

    #[test]
    fn neumann_rejects_outside_arguments() {
        let k = BaseKernel::<f64>::bump();
        assert!(k.neumann(1.01, 0.0).is_err());
        assert!(k.neumann(0.0, -1.5).is_err());
    }

    #[test]
    fn analytic_derivative_matches_central_difference() {
        let k = BaseKernel::<f64>::bump();
        let eps = 1e-6;
        for &(u, v) in &[(0.25, 1.0), (-0.3, 0.2), (0.9, 0.7), (-0.95, -0.6)] {
            let fd = (k.neumann_unchecked(u + eps, v) - k.neumann_unchecked(u - eps, v)) / (2.0 * eps);
            assert!((fd - k.neumann_du(u, v)).abs() < 1e-6);
        }
    }

    #[test]
    fn table_is_symmetric_and_nonnegative() {
        let t = KernelTable::build(12, BaseKernel::<f64>::bump()).unwrap();
        for x in -12..=12 {
            for y in -12..=12 {
                assert_eq!(t.get(x, y), t.get(y, x));
                assert!(t.get(x, y) >= 0.0);
            }
        }
    }

    #[test]
    fn far_bulk_pairs_do_not_interact() {
        let t = KernelTable::build(40, BaseKernel::<f64>::bump()).unwrap();
        // |x - y| > N with both sites at distance > N/2 from the walls
        assert_eq!(t.get(-21, 21), 0.0);
        assert_eq!(t.get(-10, 35), 0.0);
    }

    #[test]
    fn empty_configuration_has_zero_energy() {
        let t = KernelTable::build(10, BaseKernel::<f64>::bump()).unwrap();
        assert_eq!(hamiltonian(&Configuration::empty(10), &t).unwrap(), 0.0);
    }

    #[test]
    fn single_particle_energy_is_half_the_diagonal() {
        let k = BaseKernel::<f64>::bump();
        let t = KernelTable::build(10, k).unwrap();
        let mut c = Configuration::empty(10);
        c.set(0, 1);
        let expected = -0.5 * 0.1 * k.neumann(0.0, 0.0).unwrap();
        assert!((hamiltonian(&c, &t).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn hamiltonian_matches_explicit_double_loop() {
        let k = BaseKernel::<f64>::bump();
        let t = KernelTable::build(16, k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let c = random_config(16, &mut rng);
        let mut brute = 0.0;
        for x in -16isize..=16 {
            for y in -16isize..=16 {
                let jn = k.neumann(x as f64 / 16.0, y as f64 / 16.0).unwrap() / 16.0;
                brute += jn * c.get(x) as f64 * c.get(y) as f64;
            }
        }
        assert!((hamiltonian(&c, &t).unwrap() + 0.5 * brute).abs() < 1e-12);
    }

    #[test]
    fn exchange_of_equal_sites_is_free() {
        let t = KernelTable::build(8, BaseKernel::<f64>::bump()).unwrap();
        let c = Configuration::full(8);
        assert_eq!(delta_h_exchange(&c, 3, 4, &t).unwrap(), 0.0);
    }

    #[test]
    fn single_particle_hop_by_hand() {
        let k = BaseKernel::<f64>::bump();
        let t = KernelTable::build(10, k).unwrap();
        let mut c = Configuration::empty(10);
        c.set(7, 1);
        // H before = -½ J_N(7,7), after = -½ J_N(8,8)
        let jn = |a: f64, b: f64| k.neumann(a / 10.0, b / 10.0).unwrap() / 10.0;
        let expected = -0.5 * jn(8.0, 8.0) + 0.5 * jn(7.0, 7.0);
        let d = delta_h_exchange(&c, 7, 8, &t).unwrap();
        assert!((d - expected).abs() < 1e-15, "{d} vs {expected}");
    }

    #[test]
    fn incremental_energy_matches_brute_force_on_all_bonds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [4usize, 16, 32] {
            let t = KernelTable::build(n, BaseKernel::<f64>::bump()).unwrap();
            for _ in 0..20 {
                let c = random_config(n, &mut rng);
                let h0 = hamiltonian(&c, &t).unwrap();
                for x in -(n as isize)..(n as isize) {
                    let brute = hamiltonian(&c.exchanged(x, x + 1), &t).unwrap() - h0;
                    let fast = delta_h_exchange(&c, x, x + 1, &t).unwrap();
                    assert!((brute - fast).abs() < 1e-12, "N={n} x={x}: {brute} vs {fast}");
                    assert!(fast.abs() <= t.delta_h_bound(c.index(x), c.index(x + 1)) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn delta_h_rejects_bad_sites() {
        let t = KernelTable::build(5, BaseKernel::<f64>::bump()).unwrap();
        let c = Configuration::empty(5);
        assert!(delta_h_exchange(&c, 0, 2, &t).is_err());
        assert!(delta_h_exchange(&c, 5, 6, &t).is_err());
        assert!(hamiltonian(&Configuration::empty(6), &t).is_err());
    }

    #[test]
    fn configuration_validates_entries() {
        assert!(Configuration::new(2, vec![0, 1, 0, 1, 0]).is_ok());
        assert!(Configuration::new(2, vec![0, 1, 0, 1]).is_err());
        assert!(Configuration::new(2, vec![0, 2, 0, 1, 0]).is_err());
    }

    #[test]
    fn kernel_works_in_single_precision() {
        let k = BaseKernel::<f32>::bump();
        let t = KernelTable::build(8, k).unwrap();
        assert!(t.row_sum_error() < 0.2);
    }
}
