use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::field::{Grid, SpaceTimeField};
use crate::kernel::{Configuration, KernelTable};
use crate::scalar::{lit, Real};

/// Space-time tilt `F` on the lattice grid `Grid::lattice(N)`, vanishing at `±N`.
pub type TiltField<T> = SpaceTimeField<T>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// A transition of the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    /// Exchange of the occupancies of `x` and `x + 1`.
    Exchange { x: isize },
    /// Flip of the occupancy at `-N` or `N`.
    Flip { side: Side },
}

impl Event {
    pub fn apply(&self, config: &mut Configuration) {
        match *self {
            Event::Exchange { x } => {
                let (a, b) = (config.get(x), config.get(x + 1));
                config.set(x, b);
                config.set(x + 1, a);
            }
            Event::Flip { side } => {
                let x = boundary_site(config.half_width(), side);
                config.set(x, config.get(x) ^ 1);
            }
        }
    }
}

pub(crate) fn boundary_site(half_width: usize, side: Side) -> isize {
    match side {
        Side::Left => -(half_width as isize),
        Side::Right => half_width as isize,
    }
}

pub(crate) fn check_reservoir<T: Real>(rho: T) -> Result<()> {
    if !(rho > T::zero() && rho < T::one()) {
        return invalid(format!("reservoir density must lie in (0, 1), got {rho}"));
    }
    Ok(())
}

/// `c(ζ) = ρ(1 - ζ) + (1 - ρ)ζ`.
pub fn boundary_rate<T: Real>(zeta: u8, rho: T) -> Result<T> {
    check_reservoir(rho)?;
    if zeta > 1 {
        return invalid(format!("occupancy {zeta} is not 0 or 1"));
    }
    Ok(if zeta == 0 { rho } else { T::one() - rho })
}

/// `exp(-(β/2) [H_N(η^{x,x+1}) - H_N(η)])`.
pub fn exchange_rate<T: Real>(
    config: &Configuration,
    x: isize,
    table: &KernelTable<T>,
    beta: T,
) -> Result<T> {
    let dh = crate::kernel::delta_h_exchange(config, x, x + 1, table)?;
    Ok((-beta * lit::<T>(0.5) * dh).exp())
}

pub(crate) fn check_tilt<T: Real>(tilt: &TiltField<T>, half_width: usize) -> Result<()> {
    if tilt.grid() != Grid::lattice(half_width)? {
        return mismatch(format!(
            "tilt field has {} cells, lattice N = {half_width} needs {}",
            tilt.grid().cells(),
            2 * half_width
        ));
    }
    Ok(())
}

/// `exp(N (<π^N(η'), F_t> - <π^N(η), F_t>))` for the configuration `η'` after `event`.
pub fn tilt_factor<T: Real>(
    config: &Configuration,
    event: Event,
    tilt: &TiltField<T>,
    t: T,
) -> Result<T> {
    check_tilt(tilt, config.half_width())?;
    match event {
        Event::Flip { .. } => Ok(T::one()),
        Event::Exchange { x } => {
            if !config.contains(x) || !config.contains(x + 1) {
                return invalid(format!("bond ({x}, {}) outside the lattice", x + 1));
            }
            let i = config.index(x);
            let d = T::from_f64(config.get(x + 1) as f64 - config.get(x) as f64).unwrap();
            Ok((d * (tilt.value_at(t, i) - tilt.value_at(t, i + 1))).exp())
        }
    }
}

/// `<π^N(η), F>` with `π^N` as in the empirical density: `N⁻¹ Σ_{|x|<N} η(x) F(x/N)`.
pub fn empirical_pairing<T: Real>(config: &Configuration, f: &[T]) -> T {
    let n = config.half_width();
    let occ = config.occupancy();
    let s: T = (1..2 * n)
        .filter(|&i| occ[i] == 1)
        .map(|i| f[i])
        .sum();
    s / T::from_usize_lossy(n)
}
