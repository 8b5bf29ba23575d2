//! Pseudo-steady-state basic profiles `W` and the time-invariant PI.

use crate::error::{Error, Result};
use crate::fv::{HarmonicExtension, NonlinearSystem, PicardOptions, Transport, WellCondition};
use crate::grid::{Grid, Region, ScalarField};
use crate::kernel::{Mobility, TwoTermLaw};

/// Basic-profile problem `−∇·(K(|∇W|)∇W) = A`, `W|Γ_i = φ`, no flux on Γ_e.
pub struct PssProblem<'a> {
    pub grid: &'a Grid,
    pub kernel: &'a dyn Mobility,
    /// Trace data on the well nodes, in `grid.well.nodes` order.
    pub phi: Vec<f64>,
    pub q_s: f64,
}

impl PssProblem<'_> {
    /// `A = Q_s / |U|`.
    pub fn a_const(&self) -> f64 {
        self.q_s / self.grid.volume
    }
}

#[derive(Debug, Clone)]
pub struct PssSolution {
    pub w: ScalarField,
    /// `Q_s / (mean_U W − mean_Γ φ)`, `None` when the drawdown vanishes.
    pub j_pss: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    /// Discrete production through Γ_i.
    pub well_flux: f64,
    pub a_const: f64,
    pub q_s: f64,
}

impl PssSolution {
    /// PSS drawdown `mean_U W − mean_Γ W`.
    pub fn drawdown(&self, grid: &Grid) -> f64 {
        grid.average_values(&self.w.values, Region::Volume)
            - grid.average_values(&self.w.values, Region::WellBoundary)
    }

    /// Characteristic time `|U| · drawdown / Q_s`.
    pub fn characteristic_time(&self, grid: &Grid) -> f64 {
        grid.volume * self.drawdown(grid) / self.q_s
    }
}

fn check_phi(grid: &Grid, phi: &[f64]) -> Result<()> {
    if phi.len() != grid.well.nodes.len() {
        return Err(Error::Shape {
            expected: grid.well.nodes.len(),
            got: phi.len(),
        });
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("well trace data must be finite".into()));
    }
    Ok(())
}

pub fn solve_basic_profile(prob: &PssProblem, tol: f64, max_iter: usize) -> Result<PssSolution> {
    let mut guess = vec![0.0; prob.grid.node_count()];
    solve_basic_profile_from(prob, &mut guess, tol, max_iter)
}

/// As [`solve_basic_profile`], starting the Picard iteration from `guess`
/// (overwritten with the solution).
pub fn solve_basic_profile_from(
    prob: &PssProblem,
    guess: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<PssSolution> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    if !prob.q_s.is_finite() {
        return Err(Error::Config("Q_s must be finite".into()));
    }
    check_phi(prob.grid, &prob.phi)?;
    let a = prob.a_const();
    let system = NonlinearSystem {
        grid: prob.grid,
        transport: Transport::Liquid(prob.kernel),
        storage: None,
        source: a,
        well: WellCondition::Dirichlet(prob.phi.clone()),
        flux_target: (prob.q_s != 0.0).then_some(prob.q_s),
    };
    let opts = PicardOptions {
        tol,
        max_iter,
        ..PicardOptions::default()
    };
    let report = system.solve(guess, &opts)?;
    let w = ScalarField::new(guess.to_vec());
    let j_pss = drawdown_ratio(prob.grid, &w.values, &prob.phi, prob.q_s);
    Ok(PssSolution {
        w,
        j_pss,
        residual: report.residual,
        iterations: report.iterations,
        history: report.history,
        well_flux: report.production,
        a_const: a,
        q_s: prob.q_s,
    })
}

fn drawdown_ratio(grid: &Grid, w: &[f64], phi: &[f64], q_s: f64) -> Option<f64> {
    let mw = grid.average_values(w, Region::Volume);
    let mphi = boundary_mean(grid, phi);
    let scale = w.iter().chain(phi).fold(0.0f64, |m, v| m.max(v.abs()));
    let den = mw - mphi;
    if den.abs() <= 1e-12 * scale || den == 0.0 {
        None
    } else {
        Some(q_s / den)
    }
}

/// Weighted mean of well-node data.
pub fn boundary_mean(grid: &Grid, v: &[f64]) -> f64 {
    grid.well
        .weights
        .iter()
        .zip(v)
        .map(|(w, x)| w * x)
        .sum::<f64>()
        / grid.well.measure
}

/// Gas basic profile: `−∇·(K₂(|∇W|)∇W) = A`, `W = 0` on Γ_i.
pub fn solve_gas_profile(grid: &Grid, alpha: f64, beta: f64, a_const: f64) -> Result<PssSolution> {
    solve_gas_profile_with(grid, alpha, beta, a_const, 1e-12, 500)
}

pub fn solve_gas_profile_with(
    grid: &Grid,
    alpha: f64,
    beta: f64,
    a_const: f64,
    tol: f64,
    max_iter: usize,
) -> Result<PssSolution> {
    let law = TwoTermLaw::new(alpha, beta)?;
    if !(a_const.is_finite() && a_const >= 0.0) {
        return Err(Error::Config(format!("A must be non-negative, got {a_const}")));
    }
    let prob = PssProblem {
        grid,
        kernel: &law,
        phi: vec![0.0; grid.well.nodes.len()],
        q_s: a_const * grid.volume,
    };
    solve_basic_profile(&prob, tol, max_iter)
}

/// `J_PSS = Q_s / (mean_U W − mean_Γ φ)`.
pub fn pss_pi(sol: &PssSolution, grid: &Grid, phi: &[f64], q_s: f64) -> Result<f64> {
    grid.check(&sol.w)?;
    check_phi(grid, phi)?;
    drawdown_ratio(grid, &sol.w.values, phi, q_s).ok_or_else(|| {
        Error::Degenerate("PSS drawdown is zero; the productivity index is undefined".into())
    })
}

/// `p_s(x, t) = −A t + W(x)`.
pub fn pss_pressure(sol: &PssSolution, a_const: f64, t: f64) -> ScalarField {
    ScalarField::at_time(sol.w.values.iter().map(|w| w - a_const * t).collect(), t)
}

/// Harmonic extension `Φ` of well data with no flux on Γ_e.
pub fn harmonic_extension(grid: &Grid, phi: &[f64]) -> Result<ScalarField> {
    check_phi(grid, phi)?;
    Ok(ScalarField::new(HarmonicExtension::new(grid)?.extend(phi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{GPolynomial, Kernel};

    #[test]
    fn zero_data_gives_zero_profile() {
        let g = Grid::build_radial(1.0, 2.0, 16, 1.05).unwrap();
        let k = Kernel::new(GPolynomial::two_term(1.0, 1.0).unwrap());
        let prob = PssProblem { grid: &g, kernel: &k, phi: vec![0.0], q_s: 0.0 };
        let sol = solve_basic_profile(&prob, 1e-10, 50).unwrap();
        assert!(sol.w.values.iter().all(|&v| v == 0.0));
        assert!(sol.j_pss.is_none());
        assert!(matches!(pss_pi(&sol, &g, &[0.0], 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pressure_is_linear_in_time() {
        let g = Grid::build_radial(1.0, 2.0, 16, 1.05).unwrap();
        let k = Kernel::new(GPolynomial::darcy(1.0).unwrap());
        let prob = PssProblem { grid: &g, kernel: &k, phi: vec![0.0], q_s: 3.0 };
        let sol = solve_basic_profile(&prob, 1e-12, 50).unwrap();
        let a = prob.a_const();
        assert_eq!(pss_pressure(&sol, a, 0.0).values, sol.w.values);
        let p1 = pss_pressure(&sol, a, 1.0);
        let p2 = pss_pressure(&sol, a, 2.5);
        for (x, y) in p1.values.iter().zip(&p2.values) {
            assert!(((y - x) / 1.5 + a).abs() < 1e-12);
        }
    }

    #[test]
    fn gas_profile_rejects_bad_coefficients() {
        let g = Grid::build_radial(1.0, 2.0, 16, 1.05).unwrap();
        assert!(solve_gas_profile(&g, 0.0, 1.0, 1.0).is_err());
        assert!(solve_gas_profile(&g, 1.0, -1.0, 1.0).is_err());
        let w = solve_gas_profile(&g, 1.0, 1.0, 0.0).unwrap();
        assert!(w.w.values.iter().all(|&v| v == 0.0));
    }
}
