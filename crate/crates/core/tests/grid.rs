use forch_core::fv::{node_inflow, Transport};
use forch_core::grid::{Grid, Rect, Region};
use forch_core::kernel::{GPolynomial, Kernel, TwoTermLaw};
use forch_core::program::project_zero_mean;
use forch_core::pss::boundary_mean;
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn radial_well_measure_for_large_domain() {
    let g = Grid::build_radial(1.0, 1000.0, 256, 1.05).unwrap();
    assert!((g.well_measure() - 2.0 * PI).abs() < 1e-12);
    assert!((g.volume - PI * (1e6 - 1.0)).abs() < 1e-6);
}

#[test]
fn radial_integral_converges_at_second_order() {
    let exact = 2.0 * PI / 3.0 * (1000.0 - 1.0);
    let err = |n: usize| {
        let g = Grid::build_radial(1.0, 10.0, n, 1.0).unwrap();
        let f = g.sample(|x, y| x.hypot(y));
        (g.integrate(&f, Region::Volume).unwrap() - exact).abs()
    };
    let (e1, e2) = (err(32), err(64));
    assert!((e1 / e2).log2() > 1.9, "{e1} {e2}");
}

#[test]
fn gradient_norm_examples() {
    let g = Grid::build_radial(1.0, 10.0, 64, 1.05).unwrap();
    let c = g.sample(|_, _| 3.0);
    assert_eq!(g.lp_norm_gradient(&c, 1.5).unwrap(), 0.0);
    let r = g.sample(|x, y| x.hypot(y));
    let want = (PI * 99.0).sqrt();
    assert!((g.lp_norm_gradient(&r, 2.0).unwrap() - want).abs() < 1e-10 * want);
    let r2 = g.sample(|x, y| 2.0 * x.hypot(y));
    for q in [1.2, 1.5, 2.0] {
        let a = g.lp_norm_gradient(&r, q).unwrap();
        let b = g.lp_norm_gradient(&r2, q).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12 * b);
    }
}

#[test]
fn annulus_gradient_norm_converges() {
    // f = x² + y, ‖∇f‖²_{L²} = ∫ 4x² + 1 over the 4×4 minus 1×1 region
    let exact = (4.0 * (4.0f64.powi(4) - 1.0) / 12.0 + 15.0).sqrt();
    let err = |n: usize| {
        let g = Grid::build_annulus2d(
            Rect::centered(0.0, 0.0, 4.0, 4.0).unwrap(),
            Rect::centered(0.0, 0.0, 1.0, 1.0).unwrap(),
            n,
        )
        .unwrap();
        let f = g.sample(|x, y| x * x + y);
        (g.lp_norm_gradient(&f, 2.0).unwrap() - exact).abs()
    };
    let (e1, e2) = (err(8), err(16));
    assert!(e2 < e1 && (e1 / e2).log2() > 0.9, "{e1} {e2}");
}

fn annulus(n: usize, shift: f64) -> Grid {
    Grid::build_annulus2d(
        Rect::centered(0.0, 0.0, 6.0, 4.0).unwrap(),
        Rect::centered(shift, 0.0, 1.0, 1.0).unwrap(),
        n,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discrete_divergence_theorem(
        seed in prop::collection::vec(-5.0f64..5.0, 6),
        n in 4usize..12,
        radial in any::<bool>(),
    ) {
        let g = if radial { Grid::build_radial(0.5, 4.0, 4 * n, 1.02).unwrap() } else { annulus(n, 0.5) };
        let p = g.sample(|x, y| {
            seed[0] + seed[1] * x + seed[2] * y + seed[3] * x * y + seed[4] * (x * x - y * y) + seed[5] * (0.3 * x).sin()
        });
        let pos: Vec<f64> = p.values.iter().map(|v| 20.0 + v).collect();
        let k = Kernel::new(GPolynomial::two_term(1.0, 2.0).unwrap());
        for (t, field) in [
            (Transport::Liquid(&k), &p.values),
            (Transport::Gas(TwoTermLaw::new(1.0, 2.0).unwrap()), &pos),
        ] {
            let inflow = node_inflow(&g, &t, field);
            let interior: f64 = (0..g.node_count()).filter(|&i| !g.is_well(i)).map(|i| inflow[i]).sum();
            let well: f64 = g.well.nodes.iter().map(|&b| inflow[b]).sum();
            let scale: f64 = inflow.iter().map(|v| v.abs()).sum::<f64>() + 1.0;
            // no flux leaves through Γ_e, so the interior sum balances the well flux
            prop_assert!((interior + well).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn projection_gives_zero_boundary_mean(
        vals in prop::collection::vec(-1e3f64..1e3, 1..200),
        n in 4usize..10,
    ) {
        let g = annulus(n, 0.0);
        let mut v: Vec<f64> = (0..g.well.nodes.len()).map(|i| vals[i % vals.len()] + i as f64).collect();
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + 1.0;
        project_zero_mean(&g, &mut v);
        prop_assert!(boundary_mean(&g, &v).abs() < 1e-12 * scale);
    }

    #[test]
    fn refinement_preserves_volume(n in 4usize..20, m in 1usize..4) {
        let a = annulus(n, 0.3);
        let b = annulus(2 * n, 0.3);
        prop_assert!((a.volume - b.volume).abs() < 1e-12 * a.volume);
        prop_assert!((a.volume - 23.0).abs() < 1e-12 * a.volume);
        // segment lengths commensurate with the outer side: cells quadruple
        let square = |k: usize| {
            Grid::build_annulus2d(
                Rect::centered(0.0, 0.0, 8.0, 8.0).unwrap(),
                Rect::centered(0.0, 0.0, 2.0, 2.0).unwrap(),
                k,
            )
            .unwrap()
        };
        prop_assert_eq!(square(16 * m).cell_count(), 4 * square(8 * m).cell_count());
    }
}
