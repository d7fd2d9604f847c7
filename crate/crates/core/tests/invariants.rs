use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use ssf_core::convergence::rank_one_trace_gap;
use ssf_core::determinants::{det_nystrom, det_wronskian};
use ssf_core::geometry::Geometry;
use ssf_core::report::to_json;
use ssf_core::solutions::{BoundaryCondition, SolverOptions, SpectralParameter};
use ssf_core::ssf::{count_states, xi_finite, SpectralShiftGrid};
use ssf_core::Potential;

const D: BoundaryCondition = BoundaryCondition::DIRICHLET;

fn bc(angle: f64) -> BoundaryCondition {
    BoundaryCondition::new(angle).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn counting_is_monotone_in_lambda(
        depth in -6.0f64..6.0,
        r in 1.0f64..8.0,
        a in 0.0f64..FRAC_PI_2,
        b in 0.0f64..FRAC_PI_2,
        mut ls in prop::collection::vec(-10.0f64..60.0, 8),
    ) {
        let pot = Potential::square_well(depth, 1.0).unwrap();
        ls.sort_by(f64::total_cmp);
        let counts: Vec<usize> = ls.iter().map(|&l| count_states(&pot, bc(a), bc(b), r, l).unwrap()).collect();
        prop_assert!(counts.windows(2).all(|p| p[0] <= p[1]), "{ls:?} -> {counts:?}");
    }

    #[test]
    fn free_dirichlet_count_matches_closed_form(r in 0.5f64..10.0, lambda in 0.01f64..80.0) {
        let k = r * lambda.sqrt() / PI;
        prop_assume!((k - k.round()).abs() > 1e-6);
        let n = count_states(&Potential::zero(), D, D, r, lambda).unwrap();
        prop_assert_eq!(n, k.floor() as usize);
    }

    #[test]
    fn xi_sign_follows_potential_sign(height in 0.1f64..5.0, r in 2.0f64..8.0, a in 0.0f64..FRAC_PI_2) {
        let lambdas: Vec<f64> = (0..60).map(|k| -30.0 + k as f64).collect();
        for (h, sign) in [(height, 1.0), (-height, -1.0)] {
            let pot = Potential::square_well(h, 1.0).unwrap();
            let xi = xi_finite(&pot, bc(a), D, r, &lambdas).unwrap();
            prop_assert!(xi.values.iter().all(|&v| sign * v >= 0.0), "V = {h}: {:?}", xi.values);
        }
    }

    #[test]
    fn rank_one_gap_stays_below_bound(
        f in prop::collection::vec(-2.0f64..2.0, 12),
        g in prop::collection::vec(-2.0f64..2.0, 12),
        n in 0usize..12,
    ) {
        let (norm, bound) = rank_one_trace_gap(&f, &g, n);
        prop_assert!(norm <= bound * (1.0 + 1e-12) + 1e-12, "{norm} > {bound}");

        let mut diff = DMatrix::from_fn(12, 12, |i, j| f[i] * g[j]);
        for i in 0..n {
            for j in 0..n {
                diff[(i, j)] -= f[i] * g[j];
            }
        }
        let svd_norm: f64 = diff.singular_values().iter().sum();
        prop_assert!((norm - svd_norm).abs() <= 1e-10 * (1.0 + svd_norm), "{norm} vs svd {svd_norm}");
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn determinant_is_conjugate_symmetric(depth in -4.0f64..4.0, re in -8.0f64..8.0, im in 0.1f64..4.0) {
        let pot = Potential::square_well(depth, 1.0).unwrap();
        let opts = SolverOptions::default();
        for geom in [Geometry::interval(3.0, bc(0.4), D).unwrap(), Geometry::halfline(bc(0.4))] {
            let up = det_wronskian(&geom, &pot, &SpectralParameter::from_parts(re, im).unwrap(), &opts).unwrap().value;
            let down = det_wronskian(&geom, &pot, &SpectralParameter::from_parts(re, -im).unwrap(), &opts).unwrap().value;
            prop_assert!((up - down.conj()).norm() <= 1e-8 * up.norm(), "{up} vs {down}");
        }
    }
}

#[test]
fn determinant_below_spectrum_is_real_and_positive() {
    let opts = SolverOptions::default();
    let pot = Potential::exponential(2.0, 1.0).unwrap();
    for geom in [Geometry::interval(4.0, D, bc(1.0)).unwrap(), Geometry::halfline(D)] {
        for z in [-0.5, -3.0, -20.0] {
            let d = det_wronskian(&geom, &pot, &SpectralParameter::real(z).unwrap(), &opts).unwrap().value;
            assert!(d.re > 0.0 && d.im.abs() <= 1e-12 * d.re, "{geom:?} z = {z}: {d}");
        }
    }
}

#[test]
fn nystrom_error_shrinks_under_doubling() {
    let geom = Geometry::interval(2.0, D, D).unwrap();
    let pot = Potential::exponential(-2.0, 1.0).unwrap();
    let sp = SpectralParameter::from_parts(-1.0, 0.5).unwrap();
    let reference = det_wronskian(&geom, &pot, &sp, &SolverOptions::default()).unwrap().value;
    let errors: Vec<f64> =
        [32, 64, 128, 256].iter().map(|&n| (det_nystrom(&geom, &pot, &sp, n).unwrap().value - reference).norm()).collect();
    assert!(errors.windows(2).all(|p| p[1] < p[0]), "{errors:?}");
}

#[test]
fn spectral_shift_grid_json_round_trips() {
    let pot = Potential::square_well(-4.0, 1.0).unwrap();
    let lambdas: Vec<f64> = (0..40).map(|k| -5.0 + 0.75 * k as f64).collect();
    let grid = xi_finite(&pot, D, bc(0.3), 5.0, &lambdas).unwrap();
    let text = to_json(&grid).unwrap();
    let back: SpectralShiftGrid = serde_json::from_str(&text).unwrap();
    assert_eq!(back.values, grid.values);
    assert_eq!(back.jumps, grid.jumps);
    assert_eq!(to_json(&back).unwrap(), text);
    for &l in &[-4.3, 0.1, 7.77, 23.0] {
        assert_eq!(back.value_at(l), grid.value_at(l));
    }
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(BoundaryCondition::new(PI).is_err());
    assert!(BoundaryCondition::new(f64::NAN).is_err());
    assert!(Geometry::interval(0.0, D, D).is_err());
    assert!(count_states(&Potential::zero(), D, D, 1.0, f64::INFINITY).is_err());
    assert!(SpectralParameter::new(Complex64::new(f64::NAN, 0.0)).is_err());
}
