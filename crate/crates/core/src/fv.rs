//! Nonlinear diffusion assembly and the Picard (frozen-coefficient) solver
//! shared by the elliptic, liquid and gas problems.
//!
//! Node balance: `V_i (p_i − p_i^old)/dt = Σ_pairs flux + s V_i − Q_i`, where
//! `Q_i` is the production through well node `i` (zero elsewhere). Each
//! Picard sweep solves the frozen-coefficient correction `M δ = −R(p)`.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{Mobility, TwoTermLaw};
use crate::linalg::{solve_bordered, BandedSpd};

/// Flux law between nodes of one cell.
#[derive(Clone, Copy)]
pub enum Transport<'a> {
    /// `flux = K(|∇p|) T (p_b − p_a)`.
    Liquid(&'a dyn Mobility),
    /// `flux = K₂(|∇(p²/2)|) T (p_b² − p_a²)/2`.
    Gas(TwoTermLaw),
}

impl Transport<'_> {
    /// Mobility of one cell evaluated at the field `p`.
    pub fn cell_mobility(&self, grid: &Grid, cell: usize, p: &[f64]) -> f64 {
        let c = &grid.cells[cell];
        match self {
            Transport::Liquid(k) => k.value(c.gradient_norm(p)),
            Transport::Gas(law) => {
                let mut g = [0.0; 2];
                for (w, &n) in c.grad.iter().zip(&c.nodes) {
                    let half_sq = 0.5 * p[n] * p[n];
                    g[0] += w[0] * half_sq;
                    g[1] += w[1] * half_sq;
                }
                law.k(g[0].hypot(g[1]))
            }
        }
    }

    fn pair_flux(&self, kt: f64, pa: f64, pb: f64) -> f64 {
        match self {
            Transport::Liquid(_) => kt * (pb - pa),
            Transport::Gas(_) => kt * 0.5 * (pb - pa) * (pb + pa),
        }
    }

    fn pair_coefficient(&self, kt: f64, pa: f64, pb: f64) -> f64 {
        match self {
            Transport::Liquid(_) => kt,
            Transport::Gas(_) => kt * 0.5 * (pa + pb),
        }
    }
}

/// Net inflow into every node from the cell fluxes at `p`.
pub fn node_inflow(grid: &Grid, transport: &Transport, p: &[f64]) -> Vec<f64> {
    let mut inflow = vec![0.0; grid.node_count()];
    for (ci, cell) in grid.cells.iter().enumerate() {
        let k = transport.cell_mobility(grid, ci, p);
        for &(a, b, t) in &cell.pairs {
            let f = transport.pair_flux(k * t, p[a], p[b]);
            inflow[a] += f;
            inflow[b] -= f;
        }
    }
    inflow
}

/// Treatment of the well nodes during a solve.
#[derive(Debug, Clone)]
pub enum WellCondition {
    /// Prescribed values, one per well node in `grid.well.nodes` order.
    Dirichlet(Vec<f64>),
    /// `p_b = γ + ψ_b` with scalar unknown `γ` fixed by total production `q`.
    SplitTrace { psi: Vec<f64>, q: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Under-relaxation factor used after the residual grows.
    pub relaxation: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 200,
            relaxation: 0.7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    pub history: Vec<f64>,
    /// Total production through the well at the converged state.
    pub production: f64,
    /// Split-trace level `γ` (mean of `p_b − ψ_b`), or the well mean for
    /// Dirichlet data.
    pub gamma: f64,
}

/// One nonlinear problem: optional storage term, uniform volumetric source,
/// well condition and, optionally, a production target to be matched.
pub struct NonlinearSystem<'a> {
    pub grid: &'a Grid,
    pub transport: Transport<'a>,
    pub storage: Option<(&'a [f64], f64)>,
    pub source: f64,
    pub well: WellCondition,
    pub flux_target: Option<f64>,
}

struct Residual {
    r: Vec<f64>,
    scale: Vec<f64>,
}

impl NonlinearSystem<'_> {
    fn residual(&self, p: &[f64]) -> Residual {
        let grid = self.grid;
        let n = grid.node_count();
        let mut r = vec![0.0; n];
        let mut scale = vec![0.0; n];
        for (ci, cell) in grid.cells.iter().enumerate() {
            let k = self.transport.cell_mobility(grid, ci, p);
            for &(a, b, t) in &cell.pairs {
                let f = self.transport.pair_flux(k * t, p[a], p[b]);
                r[a] -= f;
                r[b] += f;
                scale[a] += f.abs();
                scale[b] += f.abs();
            }
        }
        for i in 0..n {
            let s = self.source * grid.node_volume[i];
            r[i] -= s;
            scale[i] += s.abs();
            if let Some((old, dt)) = self.storage {
                let st = grid.node_volume[i] * (p[i] - old[i]) / dt;
                r[i] += st;
                scale[i] += st.abs();
            }
        }
        Residual { r, scale }
    }

    /// Relative residual over the equations actually imposed.
    fn measure(&self, res: &Residual) -> (f64, f64) {
        let grid = self.grid;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..grid.node_count() {
            if !grid.is_well(i) {
                num += res.r[i] * res.r[i];
                den += res.scale[i] * res.scale[i];
            }
        }
        let production: f64 = grid.well.nodes.iter().map(|&b| -res.r[b]).sum();
        if let WellCondition::SplitTrace { q, .. } = &self.well {
            let c = production - q;
            let s: f64 = grid.well.nodes.iter().map(|&b| res.scale[b]).sum::<f64>() + q.abs();
            num += c * c;
            den += s * s;
        }
        let rel = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
        (rel, production)
    }

    fn flux_ok(&self, production: f64, tol: f64) -> bool {
        match self.flux_target {
            Some(target) => (production - target).abs() <= tol * target.abs().max(f64::MIN_POSITIVE),
            None => true,
        }
    }

    /// Imposes the well condition on `p` (using the current `γ` estimate).
    fn impose_well(&self, p: &mut [f64]) {
        let grid = self.grid;
        match &self.well {
            WellCondition::Dirichlet(v) => {
                for (&b, &x) in grid.well.nodes.iter().zip(v) {
                    p[b] = x;
                }
            }
            WellCondition::SplitTrace { psi, .. } => {
                let gamma = current_gamma(grid, p, psi);
                for (&b, &x) in grid.well.nodes.iter().zip(psi) {
                    p[b] = gamma + x;
                }
            }
        }
    }

    /// Runs Picard iterations from the initial guess in `p`.
    pub fn solve(&self, p: &mut [f64], opts: &PicardOptions) -> Result<PicardReport> {
        let grid = self.grid;
        if p.len() != grid.node_count() {
            return Err(Error::Shape {
                expected: grid.node_count(),
                got: p.len(),
            });
        }
        let layout = Layout::new(grid);
        self.impose_well(p);
        let mut history = Vec::new();
        let mut res = self.residual(p);
        let (mut rel, mut production) = self.measure(&res);
        history.push(rel);
        let mut omega = 1.0;
        let mut stalled = false;
        for it in 0..=opts.max_iter {
            if !rel.is_finite() {
                break;
            }
            if (rel <= opts.tol || stalled) && self.flux_ok(production, opts.tol.max(1e-13)) {
                return Ok(PicardReport {
                    iterations: it,
                    residual: rel,
                    history,
                    production,
                    gamma: self.gamma(p),
                });
            }
            if it == opts.max_iter {
                break;
            }
            let delta = self.correction(p, &res, &layout)?;
            let pmax = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let dmax = delta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (x, d) in p.iter_mut().zip(&delta) {
                *x += omega * d;
            }
            res = self.residual(p);
            let (next, prod) = self.measure(&res);
            omega = if next > rel { opts.relaxation } else { 1.0 };
            // Updates at round-off level: the residual cannot improve further.
            stalled = dmax <= 64.0 * f64::EPSILON * pmax.max(f64::MIN_POSITIVE) && next <= opts.tol.sqrt();
            rel = next;
            production = prod;
            history.push(rel);
        }
        Err(Error::NoConvergence {
            iterations: opts.max_iter,
            last: rel,
            history,
        })
    }

    fn gamma(&self, p: &[f64]) -> f64 {
        match &self.well {
            WellCondition::SplitTrace { psi, .. } => current_gamma(self.grid, p, psi),
            WellCondition::Dirichlet(_) => self.grid.average_values(p, crate::grid::Region::WellBoundary),
        }
    }

    /// Frozen-coefficient correction `δ` with `M δ = −R`.
    fn correction(&self, p: &[f64], res: &Residual, layout: &Layout) -> Result<Vec<f64>> {
        let grid = self.grid;
        let mut m = BandedSpd::zeros(layout.free, layout.kd);
        let mut border = vec![0.0; layout.free];
        let mut corner = 0.0;
        let mut add = |a: usize, b: usize, v: f64, m: &mut BandedSpd| {
            let (ia, ib) = (layout.index[a], layout.index[b]);
            match (ia, ib) {
                (Some(i), Some(j)) => m.add(i, j, v),
                (Some(i), None) => border[i] += v,
                (None, Some(j)) => border[j] += v,
                (None, None) => corner += v,
            }
        };
        for (ci, cell) in grid.cells.iter().enumerate() {
            let k = self.transport.cell_mobility(grid, ci, p);
            for &(a, b, t) in &cell.pairs {
                let c = self.transport.pair_coefficient(k * t, p[a], p[b]);
                add(a, a, c, &mut m);
                add(b, b, c, &mut m);
                add(a, b, -c, &mut m);
            }
        }
        if let Some((_, dt)) = self.storage {
            for i in 0..grid.node_count() {
                add(i, i, grid.node_volume[i] / dt, &mut m);
            }
        }
        let mut rhs = vec![0.0; layout.free];
        for i in 0..grid.node_count() {
            if let Some(k) = layout.index[i] {
                rhs[k] = -res.r[i];
            }
        }
        let mut delta = vec![0.0; grid.node_count()];
        match &self.well {
            WellCondition::Dirichlet(_) => {
                let x = if layout.free > 0 {
                    let chol = m.factor()?;
                    chol.solve(&rhs)
                } else {
                    Vec::new()
                };
                for i in 0..grid.node_count() {
                    if let Some(k) = layout.index[i] {
                        delta[i] = x[k];
                    }
                }
            }
            WellCondition::SplitTrace { q, .. } => {
                let sum_r: f64 = grid.well.nodes.iter().map(|&b| res.r[b]).sum();
                let g = -(sum_r + q);
                let (x, dg) = if layout.free > 0 {
                    solve_bordered(m, &border, corner, &rhs, g)?
                } else {
                    (Vec::new(), g / corner)
                };
                for i in 0..grid.node_count() {
                    delta[i] = match layout.index[i] {
                        Some(k) => x[k],
                        None => dg,
                    };
                }
            }
        }
        Ok(delta)
    }
}

fn current_gamma(grid: &Grid, p: &[f64], psi: &[f64]) -> f64 {
    let w = &grid.well;
    let s: f64 = w
        .nodes
        .iter()
        .zip(&w.weights)
        .zip(psi)
        .map(|((&b, wt), x)| wt * (p[b] - x))
        .sum();
    s / w.measure
}

/// Numbering of the non-well nodes and the resulting half bandwidth.
struct Layout {
    index: Vec<Option<usize>>,
    free: usize,
    kd: usize,
}

impl Layout {
    fn new(grid: &Grid) -> Self {
        let mut index = vec![None; grid.node_count()];
        let mut free: usize = 0;
        for (i, slot) in index.iter_mut().enumerate() {
            if !grid.is_well(i) {
                *slot = Some(free);
                free += 1;
            }
        }
        let mut kd: usize = 0;
        for cell in &grid.cells {
            for &(a, b, _) in &cell.pairs {
                if let (Some(i), Some(j)) = (index[a], index[b]) {
                    kd = kd.max(i.abs_diff(j));
                }
            }
        }
        Self { index, free, kd }
    }
}

/// Discrete harmonic extension of well-boundary data: Laplace equation with
/// the given Dirichlet values on Γ_i and no flux on Γ_e. Factored once.
pub struct HarmonicExtension<'a> {
    grid: &'a Grid,
    layout: Layout,
    chol: crate::linalg::BandedCholesky,
    /// `(free index, well slot, coefficient)` couplings.
    couplings: Vec<(usize, usize, f64)>,
}

impl<'a> HarmonicExtension<'a> {
    pub fn new(grid: &'a Grid) -> Result<Self> {
        let layout = Layout::new(grid);
        let mut slot = vec![usize::MAX; grid.node_count()];
        for (k, &b) in grid.well.nodes.iter().enumerate() {
            slot[b] = k;
        }
        let mut m = BandedSpd::zeros(layout.free, layout.kd);
        let mut couplings = Vec::new();
        for cell in &grid.cells {
            for &(a, b, t) in &cell.pairs {
                for (u, v) in [(a, b), (b, a)] {
                    if let Some(i) = layout.index[u] {
                        m.add(i, i, t);
                        match layout.index[v] {
                            Some(j) => {
                                if j < i {
                                    m.add(i, j, -t)
                                }
                            }
                            None => couplings.push((i, slot[v], t)),
                        }
                    }
                }
            }
        }
        let chol = m.factor()?;
        Ok(Self {
            grid,
            layout,
            chol,
            couplings,
        })
    }

    /// Extends values given on the well nodes (in `grid.well.nodes` order).
    pub fn extend(&self, well_values: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.layout.free];
        for &(i, k, t) in &self.couplings {
            rhs[i] += t * well_values[k];
        }
        self.chol.solve_in_place(&mut rhs);
        let mut out = vec![0.0; self.grid.node_count()];
        for i in 0..self.grid.node_count() {
            if let Some(k) = self.layout.index[i] {
                out[i] = rhs[k];
            }
        }
        for (&b, &v) in self.grid.well.nodes.iter().zip(well_values) {
            out[b] = v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Rect;
    use crate::kernel::{GPolynomial, Kernel};

    #[test]
    fn inflow_sums_to_zero() {
        let outer = Rect::new(0.0, 0.0, 6.0, 4.0).unwrap();
        let inner = Rect::new(2.0, 1.0, 3.0, 2.0).unwrap();
        let g = Grid::build_annulus2d(outer, inner, 24).unwrap();
        let k = Kernel::new(GPolynomial::two_term(1.0, 2.0).unwrap());
        let p = g.sample(|x, y| (x * 0.7).sin() + y * y);
        let total: f64 = node_inflow(&g, &Transport::Liquid(&k), &p.values).iter().sum();
        assert!(total.abs() < 1e-12);
        let law = TwoTermLaw::new(1.0, 1.0).unwrap();
        let q = g.sample(|x, y| 3.0 + x - 0.2 * y);
        let total: f64 = node_inflow(&g, &Transport::Gas(law), &q.values).iter().sum();
        assert!(total.abs() < 1e-12);
    }

    #[test]
    fn harmonic_extension_of_constant() {
        let g = Grid::build_radial(1.0, 5.0, 32, 1.05).unwrap();
        let ext = HarmonicExtension::new(&g).unwrap();
        let v = ext.extend(&[2.5]);
        assert!(v.iter().all(|x| (x - 2.5).abs() < 1e-12));
    }

    #[test]
    fn harmonic_extension_is_discrete_harmonic() {
        let outer = Rect::new(0.0, 0.0, 5.0, 5.0).unwrap();
        let inner = Rect::centered(2.5, 2.5, 1.0, 1.0).unwrap();
        let g = Grid::build_annulus2d(outer, inner, 20).unwrap();
        let ext = HarmonicExtension::new(&g).unwrap();
        let data: Vec<f64> = g.well.coordinate.iter().map(|s| (s * 1.3).sin()).collect();
        let v = ext.extend(&data);
        let k = Kernel::new(GPolynomial::darcy(1.0).unwrap());
        let inflow = node_inflow(&g, &Transport::Liquid(&k), &v);
        for i in 0..g.node_count() {
            if !g.is_well(i) {
                assert!(inflow[i].abs() < 1e-12, "node {i}: {}", inflow[i]);
            }
        }
    }
}
