//! Ideal-gas flow with a declining well pressure `B − At`, the auxiliary
//! pressure `p₀ = √((B−At)² + 2W)` and the two productivity indices.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fv::{node_inflow, NonlinearSystem, PicardOptions, Transport, WellCondition};
use crate::grid::{Grid, Region, ScalarField};
use crate::kernel::TwoTermLaw;
use crate::pss::{solve_gas_profile, PssSolution};

/// Runs stop at this fraction of `T_crit` at the latest.
pub const CRIT_SAFETY: f64 = 1.0 - 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum GasInitial {
    /// `φ₀ = 2W`, so that `p(x, 0) = p₀(x, 0)`.
    Matched,
    /// `p(x, 0) = √(B² + φ₀(x))` with `φ₀ ≥ 0`.
    Phi0(ScalarField),
}

#[derive(Debug, Clone)]
pub struct GasScenario {
    pub alpha: f64,
    pub beta: f64,
    /// Initial reserve level `B > 0`.
    pub b_reserve: f64,
    /// Decline rate `A ≥ 0` of the well pressure.
    pub a_rate: f64,
    pub initial: GasInitial,
    /// Nominal step.
    pub dt: f64,
    pub t_end: f64,
    /// Steps are capped at this fraction of the time left before `T_crit`.
    pub crit_fraction: f64,
    pub picard: PicardOptions,
    /// Converged steps needing more Picard sweeps than this halve the next
    /// step.
    pub picard_threshold: usize,
    /// Keep every `k`-th field (plus the first and last) in the history;
    /// 0 keeps only the endpoints.
    pub history_stride: usize,
}

impl GasScenario {
    pub fn new(alpha: f64, beta: f64, b_reserve: f64, a_rate: f64, dt: f64, t_end: f64) -> Self {
        Self {
            alpha,
            beta,
            b_reserve,
            a_rate,
            initial: GasInitial::Matched,
            dt,
            t_end,
            crit_fraction: 0.01,
            picard: PicardOptions {
                tol: 1e-12,
                max_iter: 200,
                relaxation: 0.7,
            },
            picard_threshold: 40,
            history_stride: 0,
        }
    }

    pub fn law(&self) -> Result<TwoTermLaw> {
        TwoTermLaw::new(self.alpha, self.beta)
    }

    /// `B / A` (infinite when `A = 0`).
    pub fn t_crit(&self) -> f64 {
        self.b_reserve / self.a_rate
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.law()?;
        if !(self.b_reserve.is_finite() && self.b_reserve > 0.0) {
            return Err(Error::Config(format!("B must be positive, got {}", self.b_reserve)));
        }
        if !(self.a_rate.is_finite() && self.a_rate >= 0.0) {
            return Err(Error::Config(format!("A must be non-negative, got {}", self.a_rate)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        let stop = CRIT_SAFETY * self.t_crit();
        if self.t_end > stop * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "t_end = {} exceeds the admissible horizon {stop} (T_crit = {})",
                self.t_end,
                self.t_crit()
            )));
        }
        if !(self.crit_fraction > 0.0 && self.crit_fraction <= 1.0) {
            return Err(Error::Config("crit_fraction must lie in (0, 1]".into()));
        }
        if let GasInitial::Phi0(phi0) = &self.initial {
            grid.check(phi0)?;
            if phi0.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config("phi0 must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

/// Per-step series of a gas run (the initial state is not sampled).
#[derive(Debug, Clone, Default)]
pub struct GasTrajectory {
    pub times: Vec<f64>,
    /// Production through Γ_i.
    pub mass_flux: Vec<f64>,
    /// `mean_U p² − mean_Γ p²`.
    pub p2_drawdown: Vec<f64>,
    pub j_of_t: Vec<Option<f64>>,
    /// `max |p − p₀|`.
    pub max_p_minus_p0: Vec<f64>,
    /// `max (p − p₀)`; non-positive when the ordering holds.
    pub ordering_excess: Vec<f64>,
    /// `min p − min(min p(·,0), B − At)`; non-negative under the maximum
    /// principle.
    pub max_principle_margin: Vec<f64>,
    /// Largest cell gradient `|∇p|`.
    pub max_grad_p: Vec<f64>,
    pub dt_used: Vec<f64>,
    pub picard_iterations: Vec<usize>,
    /// `Q₀ = A |U|`.
    pub q0: f64,
    pub j_p0: Option<f64>,
    pub t_crit: f64,
    /// `(B − √(2 max W)) / A`.
    pub t_crit_refined: f64,
}

impl GasTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct GasRun {
    pub trajectory: GasTrajectory,
    /// Stored fields, each tagged with its time; starts at `t = 0`.
    pub history: Vec<ScalarField>,
    pub final_field: ScalarField,
    pub w: PssSolution,
}

fn radicand_check(w: &[f64], b: f64, a: f64, t: f64) -> Result<f64> {
    let level = b - a * t;
    let min_w = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(level * level + 2.0 * min_w > 0.0) {
        return Err(Error::Domain(format!(
            "(B - At)^2 + 2W is not positive at t = {t}; past the admissible horizon"
        )));
    }
    Ok(level)
}

/// `p₀(x, t) = √((B − At)² + 2W(x))`.
pub fn auxiliary_pressure(w: &ScalarField, b: f64, a: f64, t: f64) -> Result<ScalarField> {
    let level = radicand_check(&w.values, b, a, t)?;
    Ok(ScalarField::at_time(
        w.values.iter().map(|wi| (level * level + 2.0 * wi).sqrt()).collect(),
        t,
    ))
}

/// `f₀(x, t) = A (1 − (B − At) / √((B − At)² + 2W))`.
pub fn source_f0(w: &ScalarField, b: f64, a: f64, t: f64) -> Result<ScalarField> {
    let level = radicand_check(&w.values, b, a, t)?;
    Ok(ScalarField::at_time(
        w.values
            .iter()
            .map(|wi| a * (1.0 - level / (level * level + 2.0 * wi).sqrt()))
            .collect(),
        t,
    ))
}

/// `∫₀ᵗ f₀ dτ = At − p₀(x, 0) + p₀(x, t)`.
fn source_f0_integral(w: f64, b: f64, a: f64, t: f64) -> f64 {
    let level = b - a * t;
    a * t - (b * b + 2.0 * w).sqrt() + (level * level + 2.0 * w).sqrt()
}

/// One productivity-index evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasPiSample {
    pub q: f64,
    pub p2_drawdown: f64,
    pub j: Option<f64>,
}

fn p2_drawdown(grid: &Grid, p: &[f64]) -> f64 {
    let sq: Vec<f64> = p.iter().map(|v| v * v).collect();
    grid.average_values(&sq, Region::Volume) - grid.average_values(&sq, Region::WellBoundary)
}

fn gas_j(q: f64, dd: f64, scale: f64) -> Option<f64> {
    if dd == 0.0 || dd.abs() <= 1e-14 * scale {
        None
    } else {
        Some(q / dd)
    }
}

/// PI of a gas pressure field whose well value changes at `well_rate`.
///
/// The production counts the flux into the well nodes' control volumes minus
/// their storage, matching the time-stepping balance.
pub fn gas_pi(grid: &Grid, law: TwoTermLaw, p: &[f64], well_rate: f64) -> Result<GasPiSample> {
    if p.len() != grid.node_count() {
        return Err(Error::Shape {
            expected: grid.node_count(),
            got: p.len(),
        });
    }
    let inflow = node_inflow(grid, &Transport::Gas(law), p);
    let q: f64 = grid
        .well
        .nodes
        .iter()
        .map(|&b| inflow[b] - grid.node_volume[b] * well_rate)
        .sum();
    let dd = p2_drawdown(grid, p);
    let scale = p.iter().fold(0.0f64, |m, v| m.max(v * v));
    Ok(GasPiSample {
        q,
        p2_drawdown: dd,
        j: gas_j(q, dd, scale),
    })
}

/// `J[p₀] = Q₀ / ((1/|U|) ∫ 2W dx)`.
pub fn gas_pss_pi(grid: &Grid, w: &ScalarField, q0: f64) -> Result<f64> {
    grid.check(w)?;
    let den = 2.0 * grid.integrate(w, Region::Volume)? / grid.volume;
    let scale = w.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if den == 0.0 || den.abs() <= 1e-14 * scale {
        return Err(Error::Degenerate(
            "W vanishes; the auxiliary productivity index is undefined".into(),
        ));
    }
    Ok(q0 / den)
}

/// Evaluates the PI machinery on the exact `p₀` history.
pub fn p0_history_pi(
    grid: &Grid,
    law: TwoTermLaw,
    w: &ScalarField,
    b: f64,
    a: f64,
    times: &[f64],
) -> Result<Vec<GasPiSample>> {
    times
        .iter()
        .map(|&t| gas_pi(grid, law, &auxiliary_pressure(w, b, a, t)?.values, -a))
        .collect()
}

fn initial_pressure(grid: &Grid, sc: &GasScenario, w: &ScalarField) -> Vec<f64> {
    let b2 = sc.b_reserve * sc.b_reserve;
    match &sc.initial {
        GasInitial::Matched => w.values.iter().map(|wi| (b2 + 2.0 * wi).sqrt()).collect(),
        GasInitial::Phi0(phi0) => {
            let mut p: Vec<f64> = phi0.values.iter().map(|f| (b2 + f).sqrt()).collect();
            for &n in &grid.well.nodes {
                p[n] = sc.b_reserve;
            }
            p
        }
    }
}

/// Time-steps the gas equation with `p = B − At` on Γ_i.
pub fn run_gas(grid: &Grid, sc: &GasScenario) -> Result<GasRun> {
    sc.validate(grid)?;
    let law = sc.law()?;
    let (b, a) = (sc.b_reserve, sc.a_rate);
    let w = solve_gas_profile(grid, sc.alpha, sc.beta, a)?;
    let q0 = a * grid.volume;
    let w_max = w.w.values.iter().cloned().fold(0.0, f64::max);
    let mut traj = GasTrajectory {
        q0,
        j_p0: gas_pss_pi(grid, &w.w, q0).ok(),
        t_crit: sc.t_crit(),
        t_crit_refined: (b - (2.0 * w_max).sqrt()) / a,
        ..Default::default()
    };
    let transport = Transport::Gas(law);
    let mut p = initial_pressure(grid, sc, &w.w);
    let p_init_min = p.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut history = vec![ScalarField::at_time(p.clone(), 0.0)];
    let min_dt = sc.dt * 2f64.powi(-30);
    let mut t = 0.0;
    let mut dt_cur = sc.dt;
    let mut step = 0usize;
    while t < sc.t_end * (1.0 - 1e-14) {
        step += 1;
        let remaining_crit = sc.t_crit() - t;
        let mut dt = dt_cur
            .min(sc.crit_fraction * remaining_crit)
            .min(sc.t_end - t);
        let (p_new, report) = loop {
            let t_new = t + dt;
            let boundary = vec![b - a * t_new; grid.well.nodes.len()];
            let system = NonlinearSystem {
                grid,
                transport,
                storage: Some((&p, dt)),
                source: 0.0,
                well: WellCondition::Dirichlet(boundary),
                flux_target: None,
            };
            let mut trial = p.clone();
            let outcome = system.solve(&mut trial, &sc.picard);
            let failure = match outcome {
                Ok(report) => {
                    let min = trial.iter().cloned().fold(f64::INFINITY, f64::min);
                    if min > 0.0 {
                        break (trial, report);
                    }
                    Error::Positivity {
                        step,
                        time: t_new,
                        min,
                    }
                }
                Err(e) => e.at_step(step, t_new),
            };
            if dt * 0.5 < min_dt {
                return Err(failure);
            }
            dt *= 0.5;
        };
        t = if sc.t_end - (t + dt) <= 1e-12 * sc.t_end { sc.t_end } else { t + dt };
        p = p_new;

        if report.iterations > sc.picard_threshold {
            dt_cur = (dt * 0.5).max(min_dt);
        } else if report.iterations * 3 <= sc.picard_threshold {
            dt_cur = (dt * 2.0).min(sc.dt);
        } else {
            dt_cur = dt;
        }

        let p0 = auxiliary_pressure(&w.w, b, a, t)?;
        let dd = p2_drawdown(grid, &p);
        let scale = p.iter().fold(0.0f64, |m, v| m.max(v * v));
        let mut max_abs: f64 = 0.0;
        let mut excess = f64::NEG_INFINITY;
        for (x, y) in p.iter().zip(&p0.values) {
            max_abs = max_abs.max((x - y).abs());
            excess = excess.max(x - y);
        }
        let floor = p_init_min.min(b - a * t);
        let min_p = p.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_grad = (0..grid.cell_count())
            .map(|c| grid.cells[c].gradient_norm(&p))
            .fold(0.0, f64::max);

        traj.times.push(t);
        traj.mass_flux.push(report.production);
        traj.p2_drawdown.push(dd);
        traj.j_of_t.push(gas_j(report.production, dd, scale));
        traj.max_p_minus_p0.push(max_abs);
        traj.ordering_excess.push(excess);
        traj.max_principle_margin.push(min_p - floor);
        traj.max_grad_p.push(max_grad);
        traj.dt_used.push(dt);
        traj.picard_iterations.push(report.iterations);

        let is_last = t >= sc.t_end;
        if is_last || (sc.history_stride > 0 && step.is_multiple_of(sc.history_stride)) {
            history.push(ScalarField::at_time(p.clone(), t));
        }
    }
    Ok(GasRun {
        trajectory: traj,
        final_field: ScalarField::at_time(p, t),
        history,
        w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `∫₀ᵀ∫ (p + p₀)(p − p₀)² dx dt`.
    pub lhs1: f64,
    /// `(1/(4α)) ∫ |∇ ∫₀ᵀ (p² − p₀²) dt|² dx`.
    pub lhs2: f64,
    /// `∫∫ (p₀² − p²) ∫₀ᵗ f₀ dτ dt dx`.
    pub rhs: f64,
    pub rel_residual: f64,
    /// `[∫₀ᵀ∫ (p² − p₀²)]² / ∫ (∫₀ᵀ f₀ dt)² dx`.
    pub comparison_ratio: f64,
}

/// Energy identity between `p` and `p₀` in the Darcy case, using the
/// stored history (trapezoid in time) up to its last time `T`.
pub fn darcy_identity_residual(
    grid: &Grid,
    history: &[ScalarField],
    w: &ScalarField,
    alpha: f64,
    beta: f64,
    b: f64,
    a: f64,
) -> Result<IdentityReport> {
    if beta != 0.0 {
        return Err(Error::Config(
            "the identity check applies to the Darcy case (beta = 0) only".into(),
        ));
    }
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
    }
    grid.check(w)?;
    if history.len() < 2 {
        return Err(Error::Config("the identity needs at least two stored fields".into()));
    }
    let mut times = Vec::with_capacity(history.len());
    for f in history {
        grid.check(f)?;
        times.push(f.time.ok_or_else(|| Error::Config("history fields need times".into()))?);
    }
    if times.windows(2).any(|s| s[1] <= s[0]) {
        return Err(Error::Config("history times must increase".into()));
    }
    let t_final = *times.last().expect("non-empty");
    if a > 0.0 && t_final >= b / a {
        return Err(Error::Config("the identity needs T < T_crit".into()));
    }
    let n = grid.node_count();
    let mut lhs1_t = Vec::with_capacity(times.len());
    let mut rhs_t = Vec::with_capacity(times.len());
    let mut diff_t = Vec::with_capacity(times.len());
    for (f, &t) in history.iter().zip(&times) {
        let p0 = auxiliary_pressure(w, b, a, t)?;
        let mut e = vec![0.0; n];
        let mut r = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let (p, q) = (f.values[i], p0.values[i]);
            e[i] = (p + q) * (p - q) * (p - q);
            d[i] = p * p - q * q;
            r[i] = -d[i] * source_f0_integral(w.values[i], b, a, t);
        }
        lhs1_t.push(grid.integrate_values(&e, Region::Volume));
        rhs_t.push(grid.integrate_values(&r, Region::Volume));
        diff_t.push(d);
    }
    let trap = |v: &[f64]| -> f64 {
        times
            .windows(2)
            .zip(v.windows(2))
            .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
            .sum()
    };
    let lhs1 = trap(&lhs1_t);
    let rhs = trap(&rhs_t);
    let mut s = vec![0.0; n];
    for k in 1..times.len() {
        let h = 0.5 * (times[k] - times[k - 1]);
        for i in 0..n {
            s[i] += h * (diff_t[k - 1][i] + diff_t[k][i]);
        }
    }
    let lhs2 = grid.gradient_integral_pow(&s, 2.0) / (4.0 * alpha);
    let lhs = lhs1 + lhs2;
    let den = lhs.abs().max(rhs.abs());
    let rel_residual = if den > 0.0 { (lhs - rhs).abs() / den } else { 0.0 };

    let total: f64 = grid.integrate_values(&s, Region::Volume);
    let f0_int: Vec<f64> = w
        .values
        .iter()
        .map(|&wi| source_f0_integral(wi, b, a, t_final).powi(2))
        .collect();
    let f0_norm = grid.integrate_values(&f0_int, Region::Volume);
    let comparison_ratio = if f0_norm > 0.0 { total * total / f0_norm } else { 0.0 };
    Ok(IdentityReport {
        lhs1,
        lhs2,
        rhs,
        rel_residual,
        comparison_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub b: f64,
    /// `max_{t ≤ T0} ‖p − p₀‖_∞`.
    pub gap_pressure: f64,
    /// `max_{t ≤ T0} |J[p] − J[p₀]| / J[p₀]`.
    pub gap_pi: f64,
    /// `max_{t ≤ T0} max (p − p₀)`.
    pub ordering_excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln gap_pressure` against `ln B`.
    pub slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Runs the Darcy gas problem up to `t0` for every reserve level in `bs`.
pub fn b_stability_sweep(
    grid: &Grid,
    base: &GasScenario,
    bs: &[f64],
    t0: f64,
) -> Result<SweepTable> {
    if base.beta != 0.0 {
        return Err(Error::Config("the B sweep applies to the Darcy case (beta = 0) only".into()));
    }
    if bs.len() < 2 {
        return Err(Error::Config("the sweep needs at least two B values".into()));
    }
    for &b in bs {
        if !(b > 0.0 && t0 > 0.0 && t0 <= 0.5 * b / base.a_rate) {
            return Err(Error::Config(format!(
                "T0 = {t0} must lie in (0, T_crit/2] for B = {b}"
            )));
        }
    }
    let rows: Vec<Result<SweepRow>> = bs
        .par_iter()
        .map(|&b| {
            let mut sc = base.clone();
            sc.b_reserve = b;
            sc.t_end = t0;
            sc.initial = GasInitial::Matched;
            sc.history_stride = 0;
            let run = run_gas(grid, &sc)?;
            let tr = &run.trajectory;
            let j0 = tr
                .j_p0
                .ok_or_else(|| Error::Degenerate("J[p0] is undefined".into()))?;
            let gap_pi = tr
                .j_of_t
                .iter()
                .flatten()
                .map(|j| (j - j0).abs() / j0)
                .fold(0.0, f64::max);
            Ok(SweepRow {
                b,
                gap_pressure: tr.max_p_minus_p0.iter().cloned().fold(0.0, f64::max),
                gap_pi,
                ordering_excess: tr.ordering_excess.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.b).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.gap_pressure).collect();
    if y.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Degenerate("zero pressure gap; the slope is undefined".into()));
    }
    Ok(SweepTable {
        slope: loglog_slope(&x, &y),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f0_integral_matches_quadrature() {
        let (w, b, a, t) = (3.0, 20.0, 1.5, 9.0);
        let f = |tau: f64| {
            let l = b - a * tau;
            a * (1.0 - l / (l * l + 2.0 * w).sqrt())
        };
        let exact = crate::quadrature::integrate(f, 0.0, t, 1e-12).unwrap();
        assert!((source_f0_integral(w, b, a, t) - exact).abs() < 1e-10);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.0)).collect();
        assert!((loglog_slope(&x, &y) + 2.0).abs() < 1e-12);
    }
}
