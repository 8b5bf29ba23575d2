//! Subcommand execution. Every command computes its artifacts in memory;
//! nothing touches the file system until all solves have succeeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::scenario::{
    DiagSpec, InitialKind, Model, Placeholders, RegimeKind, Scenario, TimeUnit,
};
use forch_core::diag::{DiagConfig, DiagContext};
use forch_core::expr::Expr;
use forch_core::fv::PicardOptions;
use forch_core::gas::{
    b_stability_sweep, darcy_identity_residual, run_gas, GasInitial, GasScenario,
};
use forch_core::grid::{Grid, Region, ScalarField};
use forch_core::kernel::Kernel;
use forch_core::pss::{solve_gas_profile, PssSolution};
use forch_core::transient::{
    initial_field, program_pss, run_ibvp1, run_ibvp2, InitialData, TransientOptions,
};
use forch_core::program::{BoundaryProgram, Regime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Pss,
    Transient,
    Gas,
    GasSweep,
    GasIdentity,
    Diagnose,
}

impl Command {
    pub fn tag(self) -> &'static str {
        match self {
            Command::Pss => "pss",
            Command::Transient => "transient",
            Command::Gas => "gas",
            Command::GasSweep => "gas-sweep",
            Command::GasIdentity => "gas-identity",
            Command::Diagnose => "diagnose",
        }
    }
}

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub stride: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Value,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses a scenario and fills in the output directory and stride.
pub fn resolve(text: &str, ov: &Overrides) -> CliResult<Scenario> {
    let mut sc = Scenario::parse(text)?;
    if let Some(dir) = &ov.out {
        sc.output.dir = Some(dir.to_string_lossy().into_owned());
    }
    if sc.output.dir.is_none() {
        sc.output.dir = Some("out".into());
    }
    if let Some(k) = ov.stride {
        sc.output.stride = k;
    }
    if sc.output.stride == 0 {
        return Err(config("stride must be at least 1"));
    }
    if sc.name.is_empty()
        || !sc
            .name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(config("name must be non-empty and use only [A-Za-z0-9_-]"));
    }
    Ok(sc)
}

/// `# `-prefixed copy of the resolved scenario.
pub fn header(sc: &Scenario) -> String {
    sc.to_toml()
        .lines()
        .map(|l| if l.is_empty() { "#\n".to_string() } else { format!("# {l}\n") })
        .collect()
}

/// Recovers the scenario embedded in a CSV header.
pub fn scenario_from_header(csv: &str) -> CliResult<Scenario> {
    let text: String = csv
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| {
            let body = l.strip_prefix('#').unwrap_or(l);
            format!("{}\n", body.strip_prefix(' ').unwrap_or(body))
        })
        .collect();
    Scenario::parse(&text)
}

/// Shortest round-trip form; scientific outside `[1e-4, 1e15)`.
fn num(v: f64) -> String {
    let m = v.abs();
    if v.is_nan() {
        "NaN".into()
    } else if m == 0.0 || (1e-4..1e15).contains(&m) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "NaN".into())
}

struct Table {
    body: String,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            body: format!("{}\n", columns.join(",")),
        }
    }

    fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.body, "{}", cells.join(","));
    }
}

/// Row indices kept under `stride`; the last row is always kept.
fn strided(len: usize, stride: usize) -> impl Iterator<Item = usize> {
    (0..len).filter(move |&k| k % stride == stride - 1 || k + 1 == len)
}

fn csv(sc: &Scenario, cmd: Command, suffix: &str, table: Table) -> Artifact {
    Artifact {
        file: format!("{}_{}{}.csv", sc.name, cmd.tag(), suffix),
        contents: format!("{}{}", header(sc), table.body),
    }
}

fn picard(sc: &Scenario, base: PicardOptions) -> PicardOptions {
    PicardOptions {
        tol: sc.numerics.tol.unwrap_or(base.tol),
        max_iter: sc.numerics.max_iter.unwrap_or(base.max_iter),
        ..base
    }
}

/// Everything needed by the liquid commands.
struct Liquid {
    grid: Grid,
    kernel: Kernel,
    program: BoundaryProgram,
    pss: PssSolution,
    marks: Placeholders,
}

fn liquid(sc: &Scenario) -> CliResult<Liquid> {
    let grid = sc.build_grid()?;
    let kernel = sc.build_kernel()?;
    sc.check_program()?;
    let prog = sc.program()?;
    let a = prog.q_s / grid.volume;
    let pre = Placeholders { a, tau: 1.0, dd: 1.0 };
    let phi = pre.expr(&prog.phi)?;
    let provisional = BoundaryProgram::new(
        Expr::Num(0.0),
        phi.clone(),
        prog.q_s,
        Regime::TotalFlux { q: Expr::Num(prog.q_s) },
    )?;
    let base = TransientOptions::new(1.0, 1.0).picard;
    let pss = program_pss(&grid, &kernel, &provisional, &picard(sc, base))?;
    let marks = Placeholders {
        a: pss.a_const,
        tau: pss.characteristic_time(&grid),
        dd: pss.drawdown(&grid),
    };
    let psi = marks.expr(&prog.psi)?;
    let regime = match prog.regime {
        RegimeKind::TotalFlux => Regime::TotalFlux {
            q: marks.expr(prog.q.as_deref().unwrap_or("0"))?,
        },
        RegimeKind::Dirichlet => Regime::Dirichlet {
            gamma: marks.expr(prog.gamma.as_deref().unwrap_or("0"))?,
        },
    };
    let program = BoundaryProgram::new(psi, phi, prog.q_s, regime)?;
    Ok(Liquid {
        grid,
        kernel,
        program,
        pss,
        marks,
    })
}

fn initial_data(sc: &Scenario, dd: f64) -> CliResult<InitialData> {
    let Some(init) = &sc.initial else {
        return Ok(InitialData::Pss);
    };
    Ok(match init.kind {
        InitialKind::Pss => InitialData::Pss,
        InitialKind::Bump => {
            let (Some(amp), Some(center), Some(width)) = (init.amplitude, init.center, init.width)
            else {
                return Err(config("bump initial data needs amplitude, center and width"));
            };
            if !(width > 0.0) {
                return Err(config("bump width must be positive"));
            }
            InitialData::PssBump {
                amplitude: amp * dd,
                center,
                width,
            }
        }
        InitialKind::Constant => InitialData::Constant(
            init.value
                .ok_or_else(|| config("constant initial data needs value"))?,
        ),
    })
}

fn time_scale(sc: &Scenario, tau: f64) -> f64 {
    match sc.numerics.time_unit {
        TimeUnit::Absolute => 1.0,
        TimeUnit::Tau => tau,
    }
}

fn time_window(sc: &Scenario, tau: f64) -> CliResult<(f64, f64)> {
    let (Some(dt), Some(t_end)) = (sc.numerics.dt, sc.numerics.t_end) else {
        return Err(config("numerics needs dt and t_end"));
    };
    let scale = time_scale(sc, tau);
    Ok((dt * scale, t_end * scale))
}

pub fn execute(sc: &Scenario, cmd: Command) -> CliResult<Outcome> {
    match cmd {
        Command::Pss => pss(sc),
        Command::Transient => transient(sc),
        Command::Gas => gas(sc),
        Command::GasSweep => gas_sweep(sc),
        Command::GasIdentity => gas_identity(sc),
        Command::Diagnose => diagnose(sc),
    }
}

fn profile_table(grid: &Grid, w: &ScalarField) -> Table {
    let mut t = Table::new(&["x", "y", "w"]);
    for (x, v) in grid.nodes.iter().zip(&w.values) {
        t.row(&[num(x[0]), num(x[1]), num(*v)]);
    }
    t
}

fn pss(sc: &Scenario) -> CliResult<Outcome> {
    let (grid, pss, j_label) = match sc.model {
        Model::Liquid => {
            let l = liquid(sc)?;
            (l.grid, l.pss, "j_pss")
        }
        Model::Gas => {
            let grid = sc.build_grid()?;
            let (alpha, beta) = sc.gas_coefficients()?;
            let g = sc.gas()?;
            let pss = solve_gas_profile(&grid, alpha, beta, g.a_rate)?;
            (grid, pss, "j_p0")
        }
    };
    let j = match sc.model {
        Model::Liquid => pss.j_pss,
        Model::Gas => forch_core::gas::gas_pss_pi(&grid, &pss.w, pss.a_const * grid.volume).ok(),
    };
    let mut summary = json!({
        "command": "pss",
        "name": sc.name,
        "a_const": pss.a_const,
        "drawdown": pss.drawdown(&grid),
        "characteristic_time": pss.characteristic_time(&grid),
        "well_flux": pss.well_flux,
        "iterations": pss.iterations,
        "residual": pss.residual,
        "nodes": grid.node_count(),
    });
    summary[j_label] = json!(j);
    Ok(Outcome {
        artifacts: vec![csv(sc, Command::Pss, "", profile_table(&grid, &pss.w))],
        summary,
    })
}

fn transient(sc: &Scenario) -> CliResult<Outcome> {
    sc.require_model(Model::Liquid, "transient")?;
    let l = liquid(sc)?;
    let (dt, t_end) = time_window(sc, l.marks.tau)?;
    let mut opts = TransientOptions::new(dt, t_end);
    opts.picard = picard(sc, opts.picard);
    let p0 = initial_field(&l.grid, &l.pss, initial_data(sc, l.marks.dd)?);
    let run = match l.program.regime {
        Regime::TotalFlux { .. } => run_ibvp1(&l.grid, &l.kernel, &p0, &l.program, &opts)?,
        Regime::Dirichlet { .. } => run_ibvp2(&l.grid, &l.kernel, &p0, &l.program, &opts)?,
    };
    let tr = &run.trajectory;
    let mut t = Table::new(&[
        "t",
        "Q",
        "drawdown",
        "J",
        "grad_diff_norm",
        "delta_q",
        "pt_plus_a_norm",
    ]);
    for k in strided(tr.len(), sc.output.stride) {
        t.row(&[
            num(tr.times[k]),
            num(tr.q_of_t[k]),
            num(tr.drawdown[k]),
            opt(tr.j_of_t[k]),
            num(tr.grad_diff_norm[k]),
            num(tr.delta_q[k]),
            num(tr.pt_plus_a_norm[k]),
        ]);
    }
    let last = tr.len().saturating_sub(1);
    let summary = json!({
        "command": "transient",
        "name": sc.name,
        "j_pss": tr.j_pss,
        "steps": tr.len(),
        "dt": dt,
        "t_end": t_end,
        "characteristic_time": l.marks.tau,
        "final_j": tr.j_of_t.get(last).copied().flatten(),
        "max_relative_pi_deviation": tr.max_relative_pi_deviation(),
    });
    Ok(Outcome {
        artifacts: vec![csv(sc, Command::Transient, "", t)],
        summary,
    })
}

fn gas_scenario(sc: &Scenario, grid: &Grid) -> CliResult<GasScenario> {
    sc.require_model(Model::Gas, "gas")?;
    let (alpha, beta) = sc.gas_coefficients()?;
    let g = sc.gas()?;
    let (Some(dt), Some(t_end)) = (sc.numerics.dt, sc.numerics.t_end.or(g.t0)) else {
        return Err(config("numerics needs dt and t_end"));
    };
    if sc.numerics.time_unit != TimeUnit::Absolute {
        return Err(config("gas runs use absolute time"));
    }
    let mut gs = GasScenario::new(alpha, beta, g.b_reserve, g.a_rate, dt, t_end);
    if let Some(c) = g.phi0 {
        gs.initial = GasInitial::Phi0(ScalarField::constant(grid, c));
    }
    gs.crit_fraction = g.crit_fraction;
    gs.picard_threshold = g.picard_threshold;
    gs.picard = picard(sc, gs.picard);
    Ok(gs)
}

fn gas(sc: &Scenario) -> CliResult<Outcome> {
    let grid = sc.build_grid()?;
    let gs = gas_scenario(sc, &grid)?;
    gs.validate(&grid)?;
    let run = run_gas(&grid, &gs)?;
    let tr = &run.trajectory;
    let mut t = Table::new(&["t", "Q", "p2_drawdown", "J", "J_p0", "max_abs_p_minus_p0"]);
    for k in strided(tr.len(), sc.output.stride) {
        t.row(&[
            num(tr.times[k]),
            num(tr.mass_flux[k]),
            num(tr.p2_drawdown[k]),
            opt(tr.j_of_t[k]),
            opt(tr.j_p0),
            num(tr.max_p_minus_p0[k]),
        ]);
    }
    let ratio = match (tr.j_of_t.last().copied().flatten(), tr.j_p0) {
        (Some(j), Some(j0)) => Some(j / j0),
        _ => None,
    };
    let summary = json!({
        "command": "gas",
        "name": sc.name,
        "t_crit": tr.t_crit,
        "t_crit_refined": tr.t_crit_refined,
        "q0": tr.q0,
        "j_p0": tr.j_p0,
        "steps": tr.len(),
        "final_ratio": ratio,
        "max_ordering_excess": tr.ordering_excess.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        "min_max_principle_margin": tr.max_principle_margin.iter().cloned().fold(f64::INFINITY, f64::min),
    });
    Ok(Outcome {
        artifacts: vec![csv(sc, Command::Gas, "", t)],
        summary,
    })
}

fn gas_sweep(sc: &Scenario) -> CliResult<Outcome> {
    let grid = sc.build_grid()?;
    let gs = gas_scenario(sc, &grid)?;
    let g = sc.gas()?;
    let bs = g
        .sweep_b
        .as_ref()
        .ok_or_else(|| config("gas-sweep needs gas.sweep_b"))?;
    let t0 = g.t0.ok_or_else(|| config("gas-sweep needs gas.t0"))?;
    let table = b_stability_sweep(&grid, &gs, bs, t0)?;
    let mut t = Table::new(&["B", "gap_pressure", "gap_pi"]);
    for r in &table.rows {
        t.row(&[num(r.b), num(r.gap_pressure), num(r.gap_pi)]);
    }
    t.row(&["slope".into(), num(table.slope), String::new()]);
    let summary = json!({
        "command": "gas-sweep",
        "name": sc.name,
        "slope": table.slope,
        "rows": table.rows.len(),
    });
    Ok(Outcome {
        artifacts: vec![csv(sc, Command::GasSweep, "", t)],
        summary,
    })
}

fn gas_identity(sc: &Scenario) -> CliResult<Outcome> {
    let grid = sc.build_grid()?;
    let mut gs = gas_scenario(sc, &grid)?;
    gs.history_stride = 1;
    gs.validate(&grid)?;
    let run = run_gas(&grid, &gs)?;
    let rep = darcy_identity_residual(
        &grid,
        &run.history,
        &run.w.w,
        gs.alpha,
        gs.beta,
        gs.b_reserve,
        gs.a_rate,
    )?;
    let mut t = Table::new(&["lhs1", "lhs2", "rhs", "rel_residual", "comparison_ratio"]);
    t.row(&[
        num(rep.lhs1),
        num(rep.lhs2),
        num(rep.rhs),
        num(rep.rel_residual),
        num(rep.comparison_ratio),
    ]);
    let summary = json!({
        "command": "gas-identity",
        "name": sc.name,
        "rel_residual": rep.rel_residual,
        "comparison_ratio": rep.comparison_ratio,
    });
    Ok(Outcome {
        artifacts: vec![csv(sc, Command::GasIdentity, "", t)],
        summary,
    })
}

fn diag_config(d: &DiagSpec) -> DiagConfig {
    DiagConfig {
        alpha: d.alpha,
        beta: d.beta,
        eps: d.eps,
        c_f1: d.c_f1,
        decay_threshold: d.decay_threshold,
        growth_ratio: d.growth_ratio,
        tail_fraction: d.tail_fraction,
        samples: d.samples,
        dimension: d.dimension,
    }
}

fn diagnose(sc: &Scenario) -> CliResult<Outcome> {
    sc.require_model(Model::Liquid, "diagnose")?;
    let d = sc.diag()?;
    if !(d.t0 >= 0.0 && d.t1 > d.t0) {
        return Err(config("diagnose needs 0 <= t0 < t1"));
    }
    let l = liquid(sc)?;
    let p0 = initial_field(&l.grid, &l.pss, initial_data(sc, l.marks.dd)?);
    let mismatch = l.grid.average_values(&p0.values, Region::Volume)
        - l.grid.average_values(&l.pss.w.values, Region::Volume);
    let mut ctx = DiagContext::new(&l.grid, &l.program, &l.pss, l.kernel.a_exp(), diag_config(d))?
        .with_p0_mismatch(mismatch);
    if d.with_trajectory {
        if !l.program.is_total_flux() {
            return Err(config("with_trajectory applies to total_flux programs"));
        }
        let dt = sc
            .numerics
            .dt
            .ok_or_else(|| config("with_trajectory needs numerics.dt"))?
            * time_scale(sc, l.marks.tau);
        let mut opts = TransientOptions::new(dt, d.t1);
        opts.picard = picard(sc, opts.picard);
        let run = run_ibvp1(&l.grid, &l.kernel, &p0, &l.program, &opts)?;
        // the run samples from the first step; γ(0) is the well mean of p(·, 0)
        let tr = run.trajectory;
        let mut times = vec![0.0];
        times.extend(tr.times);
        let mut gamma = vec![l.grid.average_values(&p0.values, Region::WellBoundary)];
        gamma.extend(tr.gamma);
        ctx = ctx.with_gamma_series(times, gamma);
    }
    let rep = ctx.assess(d.t0, d.t1)?;
    let mut cols = vec!["t"];
    cols.extend(rep.samples.iter().map(|(n, _)| n.as_str()));
    let mut t = Table::new(&cols);
    for k in strided(rep.times.len(), sc.output.stride) {
        let mut row = vec![num(rep.times[k])];
        row.extend(rep.samples.iter().map(|(_, s)| num(s[k])));
        t.row(&row);
    }
    let mut v = Table::new(&["assumption", "verdict"]);
    for (name, verdict) in &rep.verdicts {
        v.row(&[name.clone(), verdict.label().into()]);
    }
    let verdicts: serde_json::Map<String, Value> = rep
        .verdicts
        .iter()
        .map(|(n, v)| (n.clone(), Value::from(v.label())))
        .collect();
    let sup_tail: serde_json::Map<String, Value> = rep
        .sup_tail
        .iter()
        .map(|(n, v)| (n.clone(), json!(v)))
        .collect();
    let summary = json!({
        "command": "diagnose",
        "name": sc.name,
        "horizon": [rep.horizon.0, rep.horizon.1],
        "alpha_threshold": ctx.alpha_threshold(),
        "verdicts": verdicts,
        "sup_tail": sup_tail,
        "unavailable": rep.unavailable,
        "a1_limsup": rep.a1_limsup,
    });
    Ok(Outcome {
        artifacts: vec![
            csv(sc, Command::Diagnose, "", t),
            csv(sc, Command::Diagnose, "_verdicts", v),
        ],
        summary,
    })
}

/// Writes every artifact plus the JSON report; returns the written paths.
pub fn write(dir: &Path, sc: &Scenario, cmd: Command, outcome: &Outcome) -> CliResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    let report = Artifact {
        file: format!("{}_{}.json", sc.name, cmd.tag()),
        contents: format!(
            "{}\n",
            serde_json::to_string_pretty(&outcome.summary).expect("json")
        ),
    };
    for a in outcome.artifacts.iter().chain(std::iter::once(&report)) {
        let path = dir.join(&a.file);
        std::fs::write(&path, &a.contents)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}
