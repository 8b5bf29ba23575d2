//! Backward-Euler time stepping of `p_t = ∇·(K(|∇p|)∇p)` under total-flux
//! (split trace) and Dirichlet well programs, with productivity-index
//! bookkeeping against the pseudo-steady state.

use crate::error::{Error, Result};
use crate::fv::{node_inflow, NonlinearSystem, PicardOptions, Transport, WellCondition};
use crate::grid::{Grid, Region, ScalarField};
use crate::kernel::Mobility;
use crate::program::BoundaryProgram;
use crate::pss::{solve_basic_profile, PssProblem, PssSolution};

pub use crate::program::{project_zero_mean, Regime};

#[derive(Debug, Clone, Copy)]
pub struct TransientOptions {
    pub dt: f64,
    pub t_end: f64,
    pub picard: PicardOptions,
    /// Keep every `k`-th field in the run history (0 keeps none).
    pub snapshot_stride: usize,
}

impl TransientOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            picard: PicardOptions {
                tol: 1e-12,
                max_iter: 300,
                relaxation: 0.7,
            },
            snapshot_stride: 0,
        }
    }
}

/// Time series emitted by a transient run. Index `k` refers to `times[k]`.
#[derive(Debug, Clone, Default)]
pub struct PiTrajectory {
    pub times: Vec<f64>,
    /// Production through Γ_i (boundary measurement).
    pub q_of_t: Vec<f64>,
    /// `−d/dt ∫_U p dx` by backward difference (volume measurement).
    pub q_volume: Vec<f64>,
    pub drawdown: Vec<f64>,
    pub j_of_t: Vec<Option<f64>>,
    pub grad_diff_norm: Vec<f64>,
    pub delta_q: Vec<f64>,
    pub pt_plus_a_norm: Vec<f64>,
    /// `Δ_p = drawdown_s − drawdown`.
    pub delta_p: Vec<f64>,
    /// Trace level `γⁿ` of each step.
    pub gamma: Vec<f64>,
    /// `(1 + max(‖∇p‖, ‖∇p_s‖))^a` in `L^{2−a}`.
    pub c_phi_factor: Vec<f64>,
    pub picard_iterations: Vec<usize>,
    pub j_pss: f64,
    pub q_s: f64,
    pub drawdown_pss: f64,
}

impl PiTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest relative deviation `|J − J_PSS| / J_PSS` over defined samples.
    pub fn max_relative_pi_deviation(&self) -> f64 {
        self.j_of_t
            .iter()
            .flatten()
            .map(|j| (j - self.j_pss).abs() / self.j_pss.abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct TransientRun {
    pub trajectory: PiTrajectory,
    pub final_field: ScalarField,
    pub pss: PssSolution,
    pub snapshots: Vec<ScalarField>,
}

/// Pointwise `Q / drawdown`, undefined where `|drawdown| ≤ min_drawdown`.
pub fn compute_pi(q: &[f64], drawdown: &[f64], min_drawdown: f64) -> Vec<Option<f64>> {
    q.iter()
        .zip(drawdown)
        .map(|(&q, &d)| {
            if d.abs() <= min_drawdown || d == 0.0 {
                None
            } else {
                Some(q / d)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceMetrics {
    /// `‖∇(p − p_s)‖_{L^{2−a}}`.
    pub grad_diff_norm: f64,
    /// `(p̄_sU − p̄_sΓ) − (p̄_U − p̄_Γ)`.
    pub delta_p: f64,
    /// `∫ |p_t + A|² dx`, when a previous step is supplied.
    pub pt_plus_a_norm: Option<f64>,
}

/// Distance of `p` from the pseudo-steady field `p_s`.
///
/// `previous` is `(p at the previous step, dt)` for the backward-difference
/// `p_t`.
pub fn convergence_metrics(
    grid: &Grid,
    p: &ScalarField,
    p_s: &ScalarField,
    a_exp: f64,
    a_const: f64,
    previous: Option<(&ScalarField, f64)>,
) -> Result<ConvergenceMetrics> {
    grid.check(p)?;
    grid.check(p_s)?;
    let diff: Vec<f64> = p.values.iter().zip(&p_s.values).map(|(a, b)| a - b).collect();
    let grad_diff_norm = grid.lp_norm_gradient_values(&diff, 2.0 - a_exp);
    let delta_p = drawdown(grid, &p_s.values) - drawdown(grid, &p.values);
    let pt_plus_a_norm = match previous {
        Some((old, dt)) => {
            grid.check(old)?;
            let r: Vec<f64> = p
                .values
                .iter()
                .zip(&old.values)
                .map(|(a, b)| (a - b) / dt + a_const)
                .collect();
            Some(grid.integral_abs_pow(&r, 2.0))
        }
        None => None,
    };
    Ok(ConvergenceMetrics {
        grad_diff_norm,
        delta_p,
        pt_plus_a_norm,
    })
}

/// `p̄_U − p̄_Γ`.
pub fn drawdown(grid: &Grid, p: &[f64]) -> f64 {
    grid.average_values(p, Region::Volume) - grid.average_values(p, Region::WellBoundary)
}

/// Largest relative residual of the decomposition
/// `J − J_PSS = Q Δ_p / (PDD · PDD_s) + Δ_Q J_PSS / Q_s` over the defined
/// samples.
pub fn pi_decomposition_residual(traj: &PiTrajectory) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..traj.len() {
        let Some(j) = traj.j_of_t[k] else { continue };
        let lhs = j - traj.j_pss;
        let rhs = traj.q_of_t[k] * traj.delta_p[k] / (traj.drawdown[k] * traj.drawdown_pss)
            + traj.delta_q[k] * traj.j_pss / traj.q_s;
        let scale = j.abs().max(traj.j_pss.abs());
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    worst
}

/// Shipped initial-data classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    /// `p(x, 0) = W(x)`.
    Pss,
    /// `W(x) + amplitude · exp(−|x − center|² / width²)`.
    PssBump {
        amplitude: f64,
        center: [f64; 2],
        width: f64,
    },
    Constant(f64),
}

pub fn initial_field(grid: &Grid, pss: &PssSolution, kind: InitialData) -> ScalarField {
    match kind {
        InitialData::Pss => ScalarField::at_time(pss.w.values.clone(), 0.0),
        InitialData::PssBump {
            amplitude,
            center,
            width,
        } => {
            let v = grid
                .nodes
                .iter()
                .zip(&pss.w.values)
                .map(|(x, w)| {
                    let d2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                    w + amplitude * (-d2 / (width * width)).exp()
                })
                .collect();
            ScalarField::at_time(v, 0.0)
        }
        InitialData::Constant(c) => ScalarField::at_time(vec![c; grid.node_count()], 0.0),
    }
}

/// Solves the basic profile that matches the program's `(φ, Q_s)`.
pub fn program_pss(
    grid: &Grid,
    kernel: &dyn Mobility,
    bp: &BoundaryProgram,
    picard: &PicardOptions,
) -> Result<PssSolution> {
    let prob = PssProblem {
        grid,
        kernel,
        phi: bp.phi_values(grid)?,
        q_s: bp.q_s,
    };
    solve_basic_profile(&prob, picard.tol.max(1e-13), picard.max_iter.max(500))
}

/// Total-flux problem: `p|Γ_i = γⁿ + ψ(·, tₙ)` with `γⁿ` fixed each step by
/// the production constraint.
pub fn run_ibvp1(
    grid: &Grid,
    kernel: &dyn Mobility,
    p0: &ScalarField,
    bp: &BoundaryProgram,
    opts: &TransientOptions,
) -> Result<TransientRun> {
    if !bp.is_total_flux() {
        return Err(Error::Config("run_ibvp1 needs a program with Q(t)".into()));
    }
    run(grid, kernel, p0, bp, opts)
}

/// Dirichlet problem: `p|Γ_i = γ(tₙ) + ψ(·, tₙ)`.
pub fn run_ibvp2(
    grid: &Grid,
    kernel: &dyn Mobility,
    p0: &ScalarField,
    bp: &BoundaryProgram,
    opts: &TransientOptions,
) -> Result<TransientRun> {
    if bp.is_total_flux() {
        return Err(Error::Config("run_ibvp2 needs a program with gamma(t)".into()));
    }
    run(grid, kernel, p0, bp, opts)
}

fn validate(grid: &Grid, p0: &ScalarField, opts: &TransientOptions) -> Result<()> {
    grid.check(p0)?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {}", opts.dt)));
    }
    if !(opts.t_end > 0.0 && opts.t_end.is_finite()) {
        return Err(Error::Config(format!("t_end must be positive, got {}", opts.t_end)));
    }
    if p0.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial field must be finite".into()));
    }
    Ok(())
}

fn run(
    grid: &Grid,
    kernel: &dyn Mobility,
    p0: &ScalarField,
    bp: &BoundaryProgram,
    opts: &TransientOptions,
) -> Result<TransientRun> {
    validate(grid, p0, opts)?;
    let pss = program_pss(grid, kernel, bp, &opts.picard)?;
    let a_const = pss.a_const;
    let a_exp = kernel.exponent_a();
    let drawdown_pss = drawdown(grid, &pss.w.values);
    let w_max = pss.w.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if drawdown_pss == 0.0 || drawdown_pss.abs() <= 1e-14 * w_max {
        return Err(Error::Degenerate("PSS drawdown is zero; J_PSS is undefined".into()));
    }
    let steps = ((opts.t_end / opts.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = opts.t_end / steps as f64;
    let transport = Transport::Liquid(kernel);
    let mut traj = PiTrajectory {
        j_pss: bp.q_s / drawdown_pss,
        q_s: bp.q_s,
        drawdown_pss,
        ..Default::default()
    };
    let mut p_old = p0.values.clone();
    let mut p = p0.values.clone();
    let mut snapshots = Vec::new();
    let grad_ps = grid.lp_norm_gradient_values(&pss.w.values, 2.0 - a_exp);
    for step in 1..=steps {
        let t = step as f64 * dt;
        let well = match bp.trace_values(grid, t).map_err(|e| e.at_step(step, t))? {
            Some(v) => WellCondition::Dirichlet(v),
            None => WellCondition::SplitTrace {
                psi: bp.psi_values(grid, t).map_err(|e| e.at_step(step, t))?,
                q: bp.q(t).map_err(|e| e.at_step(step, t))?.expect("total-flux program"),
            },
        };
        let system = NonlinearSystem {
            grid,
            transport,
            storage: Some((&p_old, dt)),
            source: 0.0,
            well,
            flux_target: None,
        };
        let report = system
            .solve(&mut p, &opts.picard)
            .map_err(|e| e.at_step(step, t))?;

        let q = match bp.trace_t_values(grid, t).map_err(|e| e.at_step(step, t))? {
            Some(trace_t) => {
                let inflow = node_inflow(grid, &transport, &p);
                grid.well
                    .nodes
                    .iter()
                    .zip(&trace_t)
                    .map(|(&b, &d)| inflow[b] - grid.node_volume[b] * d)
                    .sum()
            }
            None => report.production,
        };
        let mass_new = grid.integrate_values(&p, Region::Volume);
        let mass_old = grid.integrate_values(&p_old, Region::Volume);
        let dd = drawdown(grid, &p);
        let p_s: Vec<f64> = pss.w.values.iter().map(|w| w - a_const * t).collect();
        let diff: Vec<f64> = p.iter().zip(&p_s).map(|(a, b)| a - b).collect();
        let pt_a: Vec<f64> = p
            .iter()
            .zip(&p_old)
            .map(|(a, b)| (a - b) / dt + a_const)
            .collect();
        let level = grid.average_values(&p, Region::Volume).abs()
            + grid.average_values(&p, Region::WellBoundary).abs();
        let grad_p = grid.lp_norm_gradient_values(&p, 2.0 - a_exp);

        traj.times.push(t);
        traj.q_of_t.push(q);
        traj.q_volume.push(-(mass_new - mass_old) / dt);
        traj.drawdown.push(dd);
        traj.j_of_t.push(compute_pi(&[q], &[dd], 1e-12 * level)[0]);
        traj.grad_diff_norm
            .push(grid.lp_norm_gradient_values(&diff, 2.0 - a_exp));
        traj.delta_q.push(q - bp.q_s);
        traj.pt_plus_a_norm.push(grid.integral_abs_pow(&pt_a, 2.0));
        traj.delta_p.push(drawdown_pss - dd);
        traj.gamma.push(report.gamma);
        traj.c_phi_factor
            .push((1.0 + grad_p.max(grad_ps)).powf(a_exp));
        traj.picard_iterations.push(report.iterations);

        if opts.snapshot_stride > 0 && step % opts.snapshot_stride == 0 {
            snapshots.push(ScalarField::at_time(p.clone(), t));
        }
        p_old.copy_from_slice(&p);
    }
    Ok(TransientRun {
        trajectory: traj,
        final_field: ScalarField::at_time(p, opts.t_end),
        pss,
        snapshots,
    })
}
