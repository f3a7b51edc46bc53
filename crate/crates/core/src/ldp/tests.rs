use proptest::prelude::*;

use super::*;
use crate::field::{DensityField, DensityPath, Grid, SpaceTimeField};
use crate::kernel::BaseKernel;
use crate::pde::{ConvolutionOperator, NonlocalSolver};

fn conv(cells: usize) -> ConvolutionOperator<f64> {
    ConvolutionOperator::new(Grid::new(cells).unwrap(), BaseKernel::bump(), 8).unwrap()
}

fn gamma(grid: Grid) -> DensityField<f64> {
    DensityField::from_fn(grid, |u: f64| {
        0.5 + 0.3 * u + 0.15 * (std::f64::consts::PI * (u + 1.0)).sin()
    })
    .unwrap()
}

fn hydro_path(c: &ConvolutionOperator<f64>, beta: f64, t_end: f64) -> DensityPath<f64> {
    NonlocalSolver::new(c, beta)
        .unwrap()
        .evolve(&gamma(c.grid()), t_end, 0.01, None)
        .unwrap()
}

#[test]
fn pairing_vanishes_on_the_hydrodynamic_path() {
    let c = conv(50);
    for beta in [0.0, 0.03] {
        let path = hydro_path(&c, beta, 0.4);
        let ev = RateEvaluator::new(&c, beta).unwrap();
        let basis = TestBasis::new(4, 4, 0.4).unwrap();
        let r = ev.rate_sup(&path, &gamma(c.grid()), &basis).unwrap();
        assert!(r.ell_values.iter().all(|v| v.abs() < 1e-11), "{:?}", r.ell_values);
        assert!(r.rate_hat < 1e-12);
    }
}

#[test]
fn separable_assembly_matches_direct_evaluation() {
    let c = conv(40);
    let g = gamma(c.grid());
    let path = DensityPath::frozen(g.clone(), 0.3, 6).unwrap();
    let ev = RateEvaluator::new(&c, 0.05).unwrap();
    let basis = TestBasis::new(3, 2, 0.3).unwrap();
    let r = ev.rate_sup(&path, &g, &basis).unwrap();
    let coeffs: Vec<f64> = (0..basis.dim()).map(|i| ((i * 7 + 3) % 5) as f64 - 2.0).collect();
    let field = basis.field(&coeffs, c.grid(), path.times()).unwrap();
    let direct = ev.linear_part(&path, &g, &field).unwrap();
    let combined: f64 = coeffs.iter().zip(&r.ell_values).map(|(a, b)| a * b).sum();
    assert!((direct - combined).abs() < 1e-10 * (1.0 + direct.abs()));
    let quad = sigma_norm_sq(&path, &field).unwrap();
    let gram_quad: f64 = (0..basis.dim())
        .map(|i| (0..basis.dim()).map(|j| coeffs[i] * r.gram[i][j] * coeffs[j]).sum::<f64>())
        .sum();
    assert!((quad - gram_quad).abs() < 1e-10 * (1.0 + quad));
}

#[test]
fn gram_matrix_is_symmetric_and_positive() {
    let c = conv(40);
    let g = gamma(c.grid());
    let path = hydro_path(&c, 0.0, 0.5);
    let basis = TestBasis::new(5, 4, 0.5).unwrap();
    let r = RateEvaluator::new(&c, 0.0).unwrap().rate_sup(&path, &g, &basis).unwrap();
    assert!(r.gram_asymmetry <= 1e-12);
    assert!(r.gram_min_eigenvalue > 0.0);
}

#[test]
fn perturbed_path_recovers_the_tilt_cost() {
    let c = conv(50);
    let g = gamma(c.grid());
    let t_end = 0.5;
    let basis = TestBasis::new(3, 5, t_end).unwrap();
    for beta in [0.0, 0.05] {
        let ev = RateEvaluator::new(&c, beta).unwrap();
        let coeffs: Vec<f64> = (0..basis.dim()).map(|i| 0.4 * ((i % 3) as f64 - 0.8)).collect();
        let times: Vec<f64> = (0..=100).map(|n| n as f64 * 0.005).collect();
        let f = basis.field(&coeffs, c.grid(), &times).unwrap();
        let path = ev.perturbed_solve(&f, &g, t_end, 0.005).unwrap();
        let expected = rate_from_f(&path, &f).unwrap();
        let r = ev.rate_sup(&path, &g, &basis).unwrap();
        assert!(expected > 1e-3);
        assert!((r.rate_hat - expected).abs() / expected < 1e-6, "{} vs {expected}", r.rate_hat);
    }
}

#[test]
fn functional_is_concave_along_rays() {
    let c = conv(40);
    let g = gamma(c.grid());
    let path = DensityPath::frozen(g.clone(), 0.4, 8).unwrap();
    let ev = RateEvaluator::new(&c, 0.02).unwrap();
    let basis = TestBasis::new(2, 2, 0.4).unwrap();
    let field = basis.field(&[1.0, -0.5, 0.3, 0.2, -1.0, 0.7], c.grid(), path.times()).unwrap();
    let ell = ev.linear_part(&path, &g, &field).unwrap();
    let quad = sigma_norm_sq(&path, &field).unwrap();
    let apex = ell / quad;
    let j = |s: f64| ev.j_functional(&path, &g, &field.scaled(s)).unwrap();
    let top = j(apex);
    assert!((top - 0.5 * ell * ell / quad).abs() < 1e-10);
    for s in [apex - 1.0, apex - 0.1, apex + 0.1, apex + 2.0] {
        assert!(j(s) <= top);
    }
    let rate = ev.rate_sup(&path, &g, &basis).unwrap().rate_hat;
    assert!(rate >= top - 1e-12);
}

#[test]
fn empty_basis_gives_zero() {
    let c = conv(20);
    let g = gamma(c.grid());
    let path = DensityPath::frozen(g.clone(), 1.0, 2).unwrap();
    let basis = TestBasis::new(0, 1, 1.0).unwrap();
    let r = RateEvaluator::new(&c, 0.0).unwrap().rate_sup(&path, &g, &basis).unwrap();
    assert_eq!(r.rate_hat, 0.0);
    assert!(r.ell_values.is_empty());
}

#[test]
fn grid_mismatch_is_rejected() {
    let c = conv(20);
    let other = Grid::new(30).unwrap();
    let path = DensityPath::frozen(gamma(other), 1.0, 2).unwrap();
    let ev = RateEvaluator::new(&c, 0.0).unwrap();
    let basis = TestBasis::new(1, 1, 1.0).unwrap();
    assert!(ev.rate_sup(&path, &gamma(other), &basis).is_err());
    let f = SpaceTimeField::zero(other, vec![0.0]).unwrap();
    assert!(ev.linear_part(&hydro_path(&c, 0.0, 0.1), &gamma(c.grid()), &f).is_err());
}

#[test]
fn comparison_and_heat_bounds_on_small_examples() {
    let c = conv(50);
    let g = gamma(c.grid());
    let t_end = 0.5;
    let basis = TestBasis::new(4, 5, t_end).unwrap();
    let heat = hydro_path(&c, 0.0, t_end);
    for beta in [0.05, 0.1] {
        let ev = RateEvaluator::new(&c, beta).unwrap();
        let hb = heat_path_bound(&ev, &heat, &g, &basis).unwrap();
        assert!(hb.holds, "{hb:?}");
        let frozen = DensityPath::frozen(g.clone(), t_end, 50).unwrap();
        let cb = comparison_bounds(&ev, &frozen, &g, &basis).unwrap();
        assert!(cb.holds(), "{cb:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn enlarging_the_basis_never_lowers_the_rate(
        k in 1usize..4,
        m in 1usize..4,
        amp in 0.05f64..0.3,
        beta in 0.0f64..0.06,
    ) {
        let c = conv(30);
        let g = gamma(c.grid());
        let bent = DensityField::from_fn(c.grid(), |u: f64| {
            g.eval(u) + amp * (1.0 - u * u)
        }).unwrap();
        let path = DensityPath::new(
            vec![0.0, 0.2, 0.4],
            vec![g.clone(), bent.clone(), bent],
        ).unwrap();
        let ev = RateEvaluator::new(&c, beta).unwrap();
        let small = TestBasis::new(k, m, 0.4).unwrap();
        let large = TestBasis::new(k + 1, 2 * m, 0.4).unwrap();
        prop_assert!(small.nested_in(&large));
        let a = ev.rate_sup(&path, &g, &small).unwrap().rate_hat;
        let b = ev.rate_sup(&path, &g, &large).unwrap().rate_hat;
        prop_assert!(b >= a * (1.0 - 1e-8) - 1e-12, "{} < {}", b, a);
    }
}
