//! Time-dependent well-boundary data.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::Grid;

/// Which boundary problem the program drives.
#[derive(Debug, Clone, PartialEq)]
pub enum Regime {
    /// Total production `Q(t)` with split trace `γ(t) + ψ(x, t)`.
    TotalFlux { q: Expr },
    /// Dirichlet trace `γ(t) + ψ(x, t)`.
    Dirichlet { gamma: Expr },
}

/// Well-boundary program `(ψ, γ or Q, φ, Q_s)`.
///
/// Both `ψ` and `φ` are projected to zero mean over Γ_i whenever they are
/// sampled; the mean level is carried by `γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProgram {
    pub psi: Expr,
    pub phi: Expr,
    pub q_s: f64,
    pub regime: Regime,
    psi_t: Expr,
    psi_tt: Expr,
    scalar_t: Expr,
    scalar_tt: Expr,
}

impl BoundaryProgram {
    pub fn new(psi: Expr, phi: Expr, q_s: f64, regime: Regime) -> Result<Self> {
        if !q_s.is_finite() {
            return Err(Error::Config(format!("Q_s must be finite, got {q_s}")));
        }
        if phi.depends_on_t() {
            return Err(Error::Config("phi must not depend on t".into()));
        }
        let scalar = match &regime {
            Regime::TotalFlux { q } => q,
            Regime::Dirichlet { gamma } => gamma,
        };
        if scalar.depends_on_s() {
            return Err(Error::Config(
                "Q(t) and gamma(t) must not depend on the boundary coordinate s".into(),
            ));
        }
        let psi_t = psi.dt();
        let psi_tt = psi_t.dt();
        let scalar_t = scalar.dt();
        let scalar_tt = scalar_t.dt();
        Ok(Self {
            psi,
            phi,
            q_s,
            regime,
            psi_t,
            psi_tt,
            scalar_t,
            scalar_tt,
        })
    }

    /// Total-flux program with `ψ = 0`, `φ = 0` (the natural radial choice).
    pub fn total_flux(q: Expr, q_s: f64) -> Result<Self> {
        Self::new(Expr::Num(0.0), Expr::Num(0.0), q_s, Regime::TotalFlux { q })
    }

    /// Dirichlet program with `ψ = 0`, `φ = 0`.
    pub fn dirichlet(gamma: Expr, q_s: f64) -> Result<Self> {
        Self::new(Expr::Num(0.0), Expr::Num(0.0), q_s, Regime::Dirichlet { gamma })
    }

    pub fn is_total_flux(&self) -> bool {
        matches!(self.regime, Regime::TotalFlux { .. })
    }

    fn scalar(&self) -> &Expr {
        match &self.regime {
            Regime::TotalFlux { q } => q,
            Regime::Dirichlet { gamma } => gamma,
        }
    }

    /// `Q(t)`, `Q'(t)` (total-flux programs only).
    pub fn q(&self, t: f64) -> Result<Option<f64>> {
        match self.regime {
            Regime::TotalFlux { .. } => Ok(Some(self.scalar().eval(t, 0.0)?)),
            Regime::Dirichlet { .. } => Ok(None),
        }
    }

    pub fn q_prime(&self, t: f64) -> Result<Option<f64>> {
        match self.regime {
            Regime::TotalFlux { .. } => Ok(Some(self.scalar_t.eval(t, 0.0)?)),
            Regime::Dirichlet { .. } => Ok(None),
        }
    }

    /// `γ(t)` and its derivatives (Dirichlet programs only).
    pub fn gamma(&self, t: f64) -> Result<Option<f64>> {
        match self.regime {
            Regime::Dirichlet { .. } => Ok(Some(self.scalar().eval(t, 0.0)?)),
            Regime::TotalFlux { .. } => Ok(None),
        }
    }

    pub fn gamma_prime(&self, t: f64) -> Result<Option<f64>> {
        match self.regime {
            Regime::Dirichlet { .. } => Ok(Some(self.scalar_t.eval(t, 0.0)?)),
            Regime::TotalFlux { .. } => Ok(None),
        }
    }

    pub fn gamma_second(&self, t: f64) -> Result<Option<f64>> {
        match self.regime {
            Regime::Dirichlet { .. } => Ok(Some(self.scalar_tt.eval(t, 0.0)?)),
            Regime::TotalFlux { .. } => Ok(None),
        }
    }

    fn sample(expr: &Expr, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        let mut v = grid
            .well
            .coordinate
            .iter()
            .map(|&s| expr.eval(t, s).map_err(Error::from))
            .collect::<Result<Vec<f64>>>()?;
        project_zero_mean(grid, &mut v);
        Ok(v)
    }

    /// Projected `ψ(·, t)` on the well nodes.
    pub fn psi_values(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        Self::sample(&self.psi, grid, t)
    }

    pub fn psi_t_values(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        Self::sample(&self.psi_t, grid, t)
    }

    pub fn psi_tt_values(&self, grid: &Grid, t: f64) -> Result<Vec<f64>> {
        Self::sample(&self.psi_tt, grid, t)
    }

    /// Projected steady comparator `φ`.
    pub fn phi_values(&self, grid: &Grid) -> Result<Vec<f64>> {
        Self::sample(&self.phi, grid, 0.0)
    }

    /// Dirichlet trace `γ(t) + ψ(·, t)`; `None` for total-flux programs.
    pub fn trace_values(&self, grid: &Grid, t: f64) -> Result<Option<Vec<f64>>> {
        let Some(g) = self.gamma(t)? else {
            return Ok(None);
        };
        let mut v = self.psi_values(grid, t)?;
        v.iter_mut().for_each(|x| *x += g);
        Ok(Some(v))
    }

    /// Time derivative of the Dirichlet trace.
    pub fn trace_t_values(&self, grid: &Grid, t: f64) -> Result<Option<Vec<f64>>> {
        let Some(g) = self.gamma_prime(t)? else {
            return Ok(None);
        };
        let mut v = self.psi_t_values(grid, t)?;
        v.iter_mut().for_each(|x| *x += g);
        Ok(Some(v))
    }

    pub fn trace_tt_values(&self, grid: &Grid, t: f64) -> Result<Option<Vec<f64>>> {
        let Some(g) = self.gamma_second(t)? else {
            return Ok(None);
        };
        let mut v = self.psi_tt_values(grid, t)?;
        v.iter_mut().for_each(|x| *x += g);
        Ok(Some(v))
    }
}

/// Removes the Γ_i-weighted mean from well-node data.
pub fn project_zero_mean(grid: &Grid, v: &mut [f64]) {
    let w = &grid.well;
    let mean = w.weights.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>() / w.measure;
    v.iter_mut().for_each(|x| *x -= mean);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rect;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn psi_is_projected() {
        let outer = Rect::new(0.0, 0.0, 6.0, 6.0).unwrap();
        let inner = Rect::centered(3.0, 3.0, 1.0, 2.0).unwrap();
        let g = Grid::build_annulus2d(outer, inner, 24).unwrap();
        let bp = BoundaryProgram::new(
            e("2 + s*exp(-t) + t^2"),
            e("s^2"),
            1.0,
            Regime::TotalFlux { q: e("1") },
        )
        .unwrap();
        for t in [0.0, 0.5, 3.0] {
            for v in [bp.psi_values(&g, t).unwrap(), bp.psi_t_values(&g, t).unwrap()] {
                let mean: f64 = g.well.weights.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
                let scale: f64 = v.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
                assert!(mean.abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn regime_accessors() {
        let bp = BoundaryProgram::dirichlet(e("-2*t + exp(-t)"), 1.0).unwrap();
        assert_eq!(bp.q(1.0).unwrap(), None);
        assert!((bp.gamma_prime(0.0).unwrap().unwrap() + 3.0).abs() < 1e-15);
        assert!((bp.gamma_second(0.0).unwrap().unwrap() - 1.0).abs() < 1e-15);
        let bp = BoundaryProgram::total_flux(e("3*(1 + exp(-t))"), 3.0).unwrap();
        assert_eq!(bp.q(0.0).unwrap(), Some(6.0));
        assert_eq!(bp.gamma(0.0).unwrap(), None);
    }

    #[test]
    fn rejects_inconsistent_programs() {
        assert!(BoundaryProgram::new(e("0"), e("t"), 1.0, Regime::TotalFlux { q: e("1") }).is_err());
        assert!(BoundaryProgram::total_flux(e("s"), 1.0).is_err());
        assert!(BoundaryProgram::total_flux(e("1"), f64::NAN).is_err());
    }
}
