use forch_core::grid::{Grid, Rect, Region};
use forch_core::kernel::{GPolynomial, Kernel};
use forch_core::pss::{
    harmonic_extension, pss_pi, solve_basic_profile, solve_basic_profile_from, solve_gas_profile,
    PssProblem,
};
use std::f64::consts::PI;

/// Radial Darcy profile with `W(r_i) = 0`, `W'(r_e) = 0` for `K ≡ 1/a0`.
fn darcy_w(r: f64, ri: f64, re: f64, a: f64, a0: f64) -> f64 {
    a0 * a * (re * re / 2.0 * (r / ri).ln() - (r * r - ri * ri) / 4.0)
}

/// `(1/|U|) ∫ W dx` in closed form.
fn darcy_mean_w(ri: f64, re: f64, a: f64) -> f64 {
    let i1 = re * re / 2.0 * (re / ri).ln() - (re * re - ri * ri) / 4.0;
    let i2 = (re * re - ri * ri).powi(2) / 4.0;
    let int = a * (re * re / 2.0 * i1 - i2 / 4.0);
    2.0 * PI * int / (PI * (re * re - ri * ri))
}

fn darcy_error(n: usize) -> (f64, f64) {
    let (ri, re, qs) = (1.0, 2.0, 1.0);
    let g = Grid::build_radial(ri, re, n, 1.05).unwrap();
    let k = Kernel::new(GPolynomial::darcy(1.0).unwrap());
    let prob = PssProblem { grid: &g, kernel: &k, phi: vec![0.0], q_s: qs };
    let sol = solve_basic_profile(&prob, 1e-12, 100).unwrap();
    let a = prob.a_const();
    let err = g
        .nodes
        .iter()
        .zip(&sol.w.values)
        .map(|(x, w)| (w - darcy_w(x[0], ri, re, a, 1.0)).abs())
        .fold(0.0, f64::max);
    (err, sol.j_pss.unwrap())
}

#[test]
fn closed_form_mean_matches_fine_trapezoid() {
    let (ri, re, a) = (1.0, 2.0, 0.3);
    let m = 200_000;
    let h = (re - ri) / m as f64;
    let mut s = 0.0;
    for i in 0..=m {
        let r = ri + h * i as f64;
        let w = if i == 0 || i == m { 0.5 } else { 1.0 };
        s += w * darcy_w(r, ri, re, a, 1.0) * r;
    }
    let mean = 2.0 * PI * s * h / (PI * (re * re - ri * ri));
    assert!((mean - darcy_mean_w(ri, re, a)).abs() < 1e-9);
}

#[test]
fn darcy_profile_converges_at_second_order() {
    let levels: Vec<(f64, f64)> = [64, 128, 256, 512].iter().map(|&n| darcy_error(n)).collect();
    for w in levels.windows(2) {
        let order = (w[0].0 / w[1].0).log2();
        assert!(order >= 1.9, "order {order} from {:?}", levels);
    }
    let a = 1.0 / (3.0 * PI);
    let j_oracle = 1.0 / darcy_mean_w(1.0, 2.0, a);
    let j = levels.last().unwrap().1;
    assert!((j - j_oracle).abs() / j_oracle < 1e-2, "{j} vs {j_oracle}");
}

#[test]
fn pss_pi_is_invariant_under_flux_scaling() {
    let g = Grid::build_radial(1.0, 2.0, 64, 1.05).unwrap();
    let k = Kernel::new(GPolynomial::darcy(1.0).unwrap());
    let j = |qs: f64| {
        let prob = PssProblem { grid: &g, kernel: &k, phi: vec![0.0], q_s: qs };
        let sol = solve_basic_profile(&prob, 1e-12, 100).unwrap();
        pss_pi(&sol, &g, &[0.0], qs).unwrap()
    };
    assert!((j(1.0) - j(2.0)).abs() < 1e-10 * j(1.0));
}

#[test]
fn nonlinear_well_flux_matches_q_s() {
    let g = Grid::build_radial(0.5, 20.0, 128, 1.05).unwrap();
    for poly in [
        GPolynomial::two_term(1.0, 3.0).unwrap(),
        GPolynomial::new(vec![1.0, 1.0, 0.5], vec![0.0, 1.0, 6.0]).unwrap(),
    ] {
        let k = Kernel::new(poly);
        let qs = 40.0;
        let prob = PssProblem { grid: &g, kernel: &k, phi: vec![0.0], q_s: qs };
        let sol = solve_basic_profile(&prob, 1e-11, 500).unwrap();
        assert!((sol.well_flux - qs).abs() <= 1e-8 * qs, "{}", sol.well_flux);
    }
}

#[test]
fn uniqueness_from_different_guesses() {
    let g = Grid::build_radial(1.0, 10.0, 96, 1.05).unwrap();
    let k = Kernel::new(GPolynomial::two_term(1.0, 2.0).unwrap());
    let prob = PssProblem { grid: &g, kernel: &k, phi: vec![0.3], q_s: 25.0 };
    let a = solve_basic_profile(&prob, 1e-12, 500).unwrap();
    let mut guess: Vec<f64> = g.nodes.iter().map(|x| 5.0 * (x[0] * 1.7).sin()).collect();
    let b = solve_basic_profile_from(&prob, &mut guess, 1e-12, 500).unwrap();
    let diff = a
        .w
        .values
        .iter()
        .zip(&b.w.values)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn gas_profile_darcy_limit_matches_oracle() {
    let (ri, re, alpha, a) = (1.0, 4.0, 2.0, 0.5);
    let g = Grid::build_radial(ri, re, 256, 1.05).unwrap();
    let sol = solve_gas_profile(&g, alpha, 0.0, a).unwrap();
    let err = g
        .nodes
        .iter()
        .zip(&sol.w.values)
        .map(|(x, w)| (w - darcy_w(x[0], ri, re, a, alpha)).abs())
        .fold(0.0, f64::max);
    let wmax = sol.w.values.iter().cloned().fold(0.0, f64::max);
    assert!(err < 1e-3 * wmax, "{err}");
}

#[test]
fn gas_profile_flux_identity_and_sign() {
    let outer = Rect::new(0.0, 0.0, 8.0, 6.0).unwrap();
    let inner = Rect::centered(3.0, 3.0, 1.0, 0.5).unwrap();
    let g = Grid::build_annulus2d(outer, inner, 32).unwrap();
    let a = 0.7;
    let sol = solve_gas_profile(&g, 1.0, 2.0, a).unwrap();
    let q0 = a * g.volume;
    assert!((sol.well_flux - q0).abs() <= 1e-8 * q0);
    assert!(sol.w.values.iter().all(|&w| w >= 0.0));
    for &b in &g.well.nodes {
        assert_eq!(sol.w.values[b], 0.0);
    }
}

#[test]
fn harmonic_extension_reproduces_constants() {
    let outer = Rect::new(0.0, 0.0, 4.0, 4.0).unwrap();
    let inner = Rect::centered(2.0, 2.0, 1.0, 1.0).unwrap();
    let g = Grid::build_annulus2d(outer, inner, 16).unwrap();
    let phi = vec![1.25; g.well.nodes.len()];
    let e = harmonic_extension(&g, &phi).unwrap();
    assert!((g.average(&e, Region::Volume).unwrap() - 1.25).abs() < 1e-12);
}
