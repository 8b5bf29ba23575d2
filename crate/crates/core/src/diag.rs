//! Boundary-data functionals and numerical assumption verdicts.
//!
//! `Ψ` is the harmonic extension of the well data: `E[ψ]` for total-flux
//! programs and `E[ψ] + γ` (the full Dirichlet trace) for Dirichlet programs.
//! `Ψ_t` and `Ψ_tt` extend the symbolic time derivatives of the data.

use crate::error::{Error, Result};
use crate::fv::HarmonicExtension;
use crate::grid::{Grid, Region};
use crate::program::BoundaryProgram;
use crate::pss::PssSolution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagConfig {
    /// Exponent `α` of the `A₁`/`A(α,t)` functionals; defaults to
    /// `max(n a/(2−a), 2)`.
    pub alpha: Option<f64>,
    /// `β ≥ 2` for `D(β, t)` and the A3-β integral.
    pub beta: f64,
    /// `ε > 0` in `A₃(ε, t)`.
    pub eps: f64,
    /// Constant multiplying `|F₁|^{2−a}` in `A₂`.
    pub c_f1: f64,
    /// Decay clauses pass when the tail supremum is at most this value.
    pub decay_threshold: f64,
    /// Boundedness clauses pass when the tail supremum is at most this
    /// multiple of the preceding window's supremum (plus a 1e-6 relative
    /// allowance for round-off).
    pub growth_ratio: f64,
    /// Fraction of the horizon used as the tail.
    pub tail_fraction: f64,
    pub samples: usize,
    /// Spatial dimension used in the admissibility thresholds.
    pub dimension: Option<usize>,
}

impl Default for DiagConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: 2.0,
            eps: 1.0,
            c_f1: 1.0,
            decay_threshold: 1e-6,
            growth_ratio: 1.0,
            tail_fraction: 0.2,
            samples: 201,
            dimension: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    SatisfiedNumerically,
    Inconclusive,
    Violated,
}

impl Verdict {
    fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => SatisfiedNumerically,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::SatisfiedNumerically => "satisfied-numerically",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Violated => "violated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletFunctionals {
    /// `D(β, t) = ‖Ψ_tt‖_{L^β} + ‖∇Ψ_t‖²_{L^β}`.
    pub d_beta: f64,
    /// `A(α, t)`.
    pub a_alpha: f64,
    /// `G₄(t)`.
    pub g4: f64,
    /// `D(2, t)`.
    pub d_two: f64,
    /// `∫ |Ψ_t + A|² dx`.
    pub pt_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub horizon: (f64, f64),
    pub times: Vec<f64>,
    /// Named per-time series.
    pub samples: Vec<(String, Vec<f64>)>,
    /// Supremum of each series over the tail of the horizon.
    pub sup_tail: Vec<(String, f64)>,
    pub verdicts: Vec<(String, Verdict)>,
    /// Terms that could not be evaluated.
    pub unavailable: Vec<String>,
    /// Estimate of `limsup A₁(α,t)^{α/(α−a)}` (total-flux programs).
    pub a1_limsup: Option<f64>,
}

impl AssumptionReport {
    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        self.verdicts.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.samples
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

struct Fields {
    psi: Vec<f64>,
    psi_t: Vec<f64>,
    psi_tt: Vec<f64>,
    delta_psi: Vec<f64>,
}

/// Evaluation context binding a program to a mesh and its basic profile.
pub struct DiagContext<'a> {
    grid: &'a Grid,
    bp: &'a BoundaryProgram,
    w: &'a PssSolution,
    a_exp: f64,
    cfg: DiagConfig,
    ext: HarmonicExtension<'a>,
    phi_ext: Vec<f64>,
    p0_mismatch: f64,
    gamma_series: Option<(Vec<f64>, Vec<f64>)>,
}

fn abs_pow(x: f64, q: f64) -> f64 {
    x.abs().powf(q)
}

impl<'a> DiagContext<'a> {
    pub fn new(
        grid: &'a Grid,
        bp: &'a BoundaryProgram,
        w: &'a PssSolution,
        a_exp: f64,
        cfg: DiagConfig,
    ) -> Result<Self> {
        grid.check(&w.w)?;
        if !(0.0..1.0).contains(&a_exp) {
            return Err(Error::Config(format!("exponent a must lie in [0, 1), got {a_exp}")));
        }
        if !(cfg.beta >= 2.0) {
            return Err(Error::Config(format!("beta must be >= 2, got {}", cfg.beta)));
        }
        if !(cfg.eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {}", cfg.eps)));
        }
        if !(cfg.tail_fraction > 0.0 && cfg.tail_fraction <= 0.5) {
            return Err(Error::Config("tail fraction must lie in (0, 0.5]".into()));
        }
        if cfg.samples < 10 {
            return Err(Error::Config("at least 10 samples are required".into()));
        }
        let ext = HarmonicExtension::new(grid)?;
        let phi_ext = ext.extend(&bp.phi_values(grid)?);
        let ctx = Self {
            grid,
            bp,
            w,
            a_exp,
            cfg,
            ext,
            phi_ext,
            p0_mismatch: 0.0,
            gamma_series: None,
        };
        ctx.alpha()?;
        Ok(ctx)
    }

    /// `(1/|U|) ∫ (p(x,0) − p_s(x,0)) dx`.
    pub fn with_p0_mismatch(mut self, v: f64) -> Self {
        self.p0_mismatch = v;
        self
    }

    /// Solver-produced `γⁿ` series used for `Δ'_γ` of total-flux programs.
    pub fn with_gamma_series(mut self, times: Vec<f64>, gamma: Vec<f64>) -> Self {
        self.gamma_series = Some((times, gamma));
        self
    }

    fn n_dim(&self) -> f64 {
        self.cfg.dimension.unwrap_or_else(|| self.grid.dimension()) as f64
    }

    /// Smallest admissible `α = n a / (2 − a)`.
    pub fn alpha_threshold(&self) -> f64 {
        self.n_dim() * self.a_exp / (2.0 - self.a_exp)
    }

    fn alpha(&self) -> Result<f64> {
        let alpha = self.cfg.alpha.unwrap_or(self.alpha_threshold().max(2.0));
        self.check_alpha(alpha)?;
        Ok(alpha)
    }

    fn check_alpha(&self, alpha: f64) -> Result<()> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha >= self.alpha_threshold()) {
            return Err(Error::Config(format!(
                "alpha = {alpha} is below the admissible threshold n a/(2-a) = {}",
                self.alpha_threshold()
            )));
        }
        Ok(())
    }

    fn fields(&self, t: f64) -> Result<Fields> {
        let g = self.grid;
        let mut psi = self.ext.extend(&self.bp.psi_values(g, t)?);
        let mut psi_t = self.ext.extend(&self.bp.psi_t_values(g, t)?);
        let mut psi_tt = self.ext.extend(&self.bp.psi_tt_values(g, t)?);
        let delta_psi: Vec<f64> = psi.iter().zip(&self.phi_ext).map(|(a, b)| a - b).collect();
        if let Some(gamma) = self.bp.gamma(t)? {
            let g1 = self.bp.gamma_prime(t)?.expect("dirichlet");
            let g2 = self.bp.gamma_second(t)?.expect("dirichlet");
            psi.iter_mut().for_each(|x| *x += gamma);
            psi_t.iter_mut().for_each(|x| *x += g1);
            psi_tt.iter_mut().for_each(|x| *x += g2);
        }
        Ok(Fields {
            psi,
            psi_t,
            psi_tt,
            delta_psi,
        })
    }

    fn delta_q(&self, t: f64) -> Result<f64> {
        Ok(self.flux_program()?.q(t)?.expect("total flux") - self.bp.q_s)
    }

    fn flux_program(&self) -> Result<&BoundaryProgram> {
        if self.bp.is_total_flux() {
            Ok(self.bp)
        } else {
            Err(Error::Config(
                "this functional is defined for total-flux programs only".into(),
            ))
        }
    }

    fn dirichlet_program(&self) -> Result<&BoundaryProgram> {
        if self.bp.is_total_flux() {
            Err(Error::Config(
                "this functional is defined for Dirichlet programs only".into(),
            ))
        } else {
            Ok(self.bp)
        }
    }

    /// `∫₀ᵗ Δ_Q dτ` by composite Simpson.
    fn delta_q_integral(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let m = 2 * ((100.0 * t.abs()).ceil() as usize).max(200);
        let h = t / m as f64;
        let mut s = self.delta_q(0.0)? + self.delta_q(t)?;
        for k in 1..m {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * self.delta_q(k as f64 * h)?;
        }
        Ok(s * h / 3.0)
    }

    /// Signed `F₁(t)`.
    pub fn f1(&self, t: f64) -> Result<f64> {
        self.flux_program()?;
        let f = self.fields(t)?;
        let u = self.grid.volume;
        Ok(self.delta_q_integral(t)? / u
            + self.grid.integrate_values(&f.delta_psi, Region::Volume) / u
            - self.p0_mismatch)
    }

    /// `F₁'(t) = (Δ_Q + ∫ Ψ_t dx) / |U|`.
    pub fn f1_prime(&self, t: f64) -> Result<f64> {
        let f = self.fields(t)?;
        Ok((self.delta_q(t)? + self.grid.integrate_values(&f.psi_t, Region::Volume))
            / self.grid.volume)
    }

    fn f2_with(&self, t: f64, f1: f64, f: &Fields) -> Result<f64> {
        let g = self.grid;
        let a = self.a_exp;
        Ok(1.0
            + g.lp_norm_gradient_values(&self.w.w.values, 2.0 - a)
            + f1.abs()
            + g.gradient_integral_pow(&f.delta_psi, 1.0)
            + abs_pow(self.delta_q(t)?, 1.0 / (1.0 - a)))
    }

    pub fn f2(&self, t: f64) -> Result<f64> {
        let f = self.fields(t)?;
        self.f2_with(t, self.f1(t)?, &f)
    }

    fn a1_with(&self, alpha: f64, t: f64, f: &Fields) -> Result<f64> {
        self.check_alpha(alpha)?;
        let g = self.grid;
        let a = self.a_exp;
        let b = alpha * (2.0 - a) / 2.0;
        let dq = self.delta_q(t)?;
        let int_psi_t = g.integrate_values(&f.psi_t, Region::Volume);
        Ok(g.lp_norm_gradient_values(&self.w.w.values, b).powf(alpha - a)
            + g.lp_norm_gradient_values(&f.delta_psi, b).powf(alpha - a)
            + abs_pow(dq + int_psi_t, alpha)
            + g.integral_abs_pow(&f.psi_t, alpha)
                .powf((alpha - a) / (alpha * (1.0 - a)))
            + abs_pow(dq, (alpha - a) / (1.0 - a)))
    }

    /// `A₁(α, t)`.
    pub fn a1_functional(&self, alpha: f64, t: f64) -> Result<f64> {
        self.flux_program()?;
        self.a1_with(alpha, t, &self.fields(t)?)
    }

    /// Supremum of `A₁(α,t)^{α/(α−a)}` over the tail of `[t0, t1]`.
    pub fn a1_limsup(&self, alpha: f64, t0: f64, t1: f64) -> Result<f64> {
        let times = sample_times(t0, t1, self.cfg.samples);
        let start = tail_start(t0, t1, self.cfg.tail_fraction);
        let mut sup: f64 = 0.0;
        for &t in times.iter().filter(|&&t| t >= start) {
            sup = sup.max(self.a1_functional(alpha, t)?.powf(alpha / (alpha - self.a_exp)));
        }
        Ok(sup)
    }

    fn a2_with(&self, t: f64, f1: f64, f: &Fields) -> Result<f64> {
        let g = self.grid;
        let a = self.a_exp;
        let alpha = self.alpha()?;
        let b = alpha * (2.0 - a) / 2.0;
        let dq = self.delta_q(t)?;
        let qp = self.bp.q_prime(t)?.expect("total flux");
        Ok(g.gradient_integral_pow(&self.w.w.values, 2.0 - a)
            + g.gradient_integral_pow(&f.psi_t, 2.0)
            + g.gradient_integral_pow(&f.delta_psi, 2.0 - a)
            + g.integral_abs_pow(&f.psi_t, 1.0).powf(2.0 - a)
            + g.integral_abs_pow(&f.psi_t, 2.0)
            + g.integral_abs_pow(&f.psi_t, b)
            + dq.abs()
            + qp.abs()
            + abs_pow(dq, b)
            + abs_pow(qp, b)
            + self.cfg.c_f1 * abs_pow(f1, 2.0 - a))
    }

    /// `A₂(t)` with the configured constant in front of `|F₁|^{2−a}`.
    pub fn a2_functional(&self, t: f64) -> Result<f64> {
        self.flux_program()?;
        let f = self.fields(t)?;
        self.a2_with(t, self.f1(t)?, &f)
    }

    fn a3_with(&self, eps: f64, t: f64, f: &Fields) -> Result<f64> {
        let g = self.grid;
        let qp = self.bp.q_prime(t)?.expect("total flux");
        let f1p = (self.delta_q(t)? + g.integrate_values(&f.psi_t, Region::Volume)) / g.volume;
        Ok(g.gradient_integral_pow(&f.psi_t, 2.0)
            + g.integral_abs_pow(&f.psi_tt, 2.0) / (4.0 * eps)
            + qp * qp
            + f1p * f1p)
    }

    /// `A₃(ε, t)`.
    pub fn a3_functional(&self, eps: f64, t: f64) -> Result<f64> {
        self.flux_program()?;
        if !(eps > 0.0) {
            return Err(Error::Config(format!("eps must be positive, got {eps}")));
        }
        self.a3_with(eps, t, &self.fields(t)?)
    }

    /// Dirichlet-program functionals `D(β,t)`, `A(α,t)`, `G₄(t)`.
    pub fn dirichlet_functionals(&self, beta: f64, alpha: f64, t: f64) -> Result<DirichletFunctionals> {
        self.dirichlet_program()?;
        if !(beta >= 2.0) {
            return Err(Error::Config(format!("beta must be >= 2, got {beta}")));
        }
        self.check_alpha(alpha)?;
        let f = self.fields(t)?;
        let g = self.grid;
        let a = self.a_exp;
        let n = self.n_dim();
        let b = alpha * (2.0 - a) / 2.0;
        let r0 = n * (2.0 - a) / ((2.0 - a) * (n + 1.0) - n);
        let d = |q: f64| {
            g.lp_norm_values(&f.psi_tt, q) + g.lp_norm_gradient_values(&f.psi_t, q).powi(2)
        };
        let a_alpha = g.lp_norm_gradient_values(&f.psi, b).powf(alpha - a)
            + g.integral_abs_pow(&f.psi_t, alpha)
                .powf((alpha - a) / (alpha * (1.0 - a)));
        let g4 = g.gradient_integral_pow(&f.psi, 2.0)
            + g.integral_abs_pow(&f.psi_t, r0)
                .powf((2.0 - a) / (r0 * (1.0 - a)))
            + g.lp_norm_values(&f.psi_t, r0)
            + g.gradient_integral_pow(&f.psi_t, 2.0)
            + g.integral_abs_pow(&f.psi_t, 2.0)
            + g.integral_abs_pow(&f.psi_tt, 2.0);
        let shifted: Vec<f64> = f.psi_t.iter().map(|x| x + self.w.a_const).collect();
        Ok(DirichletFunctionals {
            d_beta: d(beta),
            a_alpha,
            g4,
            d_two: d(2.0),
            pt_deviation: g.integral_abs_pow(&shifted, 2.0),
        })
    }

    /// `‖∇Δ_Ψ‖_{L²}`.
    pub fn grad_delta_psi(&self, t: f64) -> Result<f64> {
        let f = self.fields(t)?;
        Ok(self.grid.lp_norm_gradient_values(&f.delta_psi, 2.0))
    }

    fn gamma_rate(&self, t: f64) -> Option<f64> {
        let (ts, gs) = self.gamma_series.as_ref()?;
        if ts.len() < 2 || t < ts[0] || t > ts[ts.len() - 1] {
            return None;
        }
        let k = ts.partition_point(|&x| x < t).clamp(1, ts.len() - 1);
        Some((gs[k] - gs[k - 1]) / (ts[k] - ts[k - 1]) + self.w.a_const)
    }

    /// Samples every functional over `[t0, t1]` and issues verdicts.
    pub fn assess(&self, t0: f64, t1: f64) -> Result<AssumptionReport> {
        if !(t1 > t0 && t0 >= 0.0) {
            return Err(Error::Config(format!("invalid horizon [{t0}, {t1}]")));
        }
        let times = sample_times(t0, t1, self.cfg.samples);
        let mut series: Vec<(String, Vec<f64>)> = Vec::new();
        let push = |name: &str, v: f64, series: &mut Vec<(String, Vec<f64>)>| {
            match series.iter_mut().find(|(n, _)| n == name) {
                Some((_, s)) => s.push(v),
                None => series.push((name.to_string(), vec![v])),
            }
        };
        let alpha = self.alpha()?;
        let a = self.a_exp;
        let b = alpha * (2.0 - a) / 2.0;
        let beta = self.cfg.beta;
        let g = self.grid;
        let grad_phi_b = g.lp_norm_gradient_values(&self.phi_ext, b);
        let total_flux = self.bp.is_total_flux();
        let mut gamma_missing = false;

        for &t in &times {
            let f = self.fields(t)?;
            let grad_dpsi = g.lp_norm_gradient_values(&f.delta_psi, 2.0);
            push("grad_delta_psi_l2", grad_dpsi, &mut series);
            let integrand = g.lp_norm_values(&f.psi_tt, beta)
                + g.lp_norm_gradient_values(&f.psi_t, beta).powi(2);
            if total_flux {
                let f1 = self.f1(t)?;
                let dq = self.delta_q(t)?;
                let qp = self.bp.q_prime(t)?.expect("total flux");
                push("f1", f1, &mut series);
                push("f2", self.f2_with(t, f1, &f)?, &mut series);
                push("a1", self.a1_with(alpha, t, &f)?, &mut series);
                push("a2", self.a2_with(t, f1, &f)?, &mut series);
                push("a3", self.a3_with(self.cfg.eps, t, &f)?, &mut series);
                push("delta_q", dq, &mut series);
                push("q_prime", qp, &mut series);
                push(
                    "a1_bound",
                    dq.abs()
                        + g.lp_norm_values(&f.psi_t, b)
                        + g.lp_norm_gradient_values(&f.psi, b)
                        + grad_phi_b,
                    &mut series,
                );
                push(
                    "a2_bound",
                    qp.abs() + f1.abs() + g.lp_norm_gradient_values(&f.psi_t, 2.0),
                    &mut series,
                );
                push(
                    "a4_decay",
                    g.gradient_integral_pow(&f.psi_t, 2.0)
                        + g.integral_abs_pow(&f.psi_tt, 2.0)
                        + qp * qp
                        + dq * dq,
                    &mut series,
                );
                let pointwise = match self.gamma_rate(t) {
                    Some(r) => r.abs() + dq.abs(),
                    None => {
                        gamma_missing = true;
                        dq.abs()
                    }
                };
                push("a3beta_pointwise", pointwise, &mut series);
                push("a3beta_integrand", integrand, &mut series);
            } else {
                let d = self.dirichlet_functionals(beta, alpha, t)?;
                push("d_beta", d.d_beta, &mut series);
                push("a_alpha", d.a_alpha, &mut series);
                push("g4", d.g4, &mut series);
                push("d2_bound", d.a_alpha + d.g4, &mut series);
                push("d2_decay", d.d_two + d.pt_deviation, &mut series);
                push("pt_deviation", d.pt_deviation, &mut series);
                push("d3_bound", d.a_alpha + grad_phi_b.powf(alpha - a), &mut series);
            }
        }
        let unavailable = if gamma_missing {
            vec!["delta_gamma_prime".to_string()]
        } else {
            Vec::new()
        };

        let tail = tail_start(t0, t1, self.cfg.tail_fraction);
        let prev = tail - (t1 - tail);
        let get = |name: &str| -> &[f64] {
            &series.iter().find(|(n, _)| n == name).expect("series").1
        };
        let bounded = |name: &str| bounded_verdict(&times, get(name), tail, prev, self.cfg.growth_ratio);
        let decays = |name: &str| decay_verdict(&times, get(name), tail, self.cfg.decay_threshold);
        let integrable = |name: &str| {
            integral_verdict(&times, get(name), t0.max(1.0), tail, self.cfg.decay_threshold)
        };
        let mut verdicts = Vec::new();
        if total_flux {
            let a1 = bounded("a1_bound");
            let a2 = a1.and(bounded("a2_bound"));
            let a3 = bounded("a3beta_pointwise").and(integrable("a3beta_integrand"));
            let a4 = a2.and(decays("a4_decay"));
            let a5 = a3.and(a4).and(decays("grad_delta_psi_l2"));
            verdicts.push(("A1".to_string(), a1));
            verdicts.push(("A2".to_string(), a2));
            verdicts.push(("A3-beta".to_string(), a3));
            verdicts.push(("A4".to_string(), a4));
            verdicts.push(("A5".to_string(), a5));
        } else {
            let d1 = integrable("d_beta");
            let d2 = bounded("d2_bound").and(decays("d2_decay"));
            let d3 = bounded("d3_bound").and(decays("grad_delta_psi_l2"));
            verdicts.push(("D1".to_string(), d1));
            verdicts.push(("D2".to_string(), d2));
            verdicts.push(("D3".to_string(), d3));
        }
        let sup_tail = series
            .iter()
            .map(|(n, s)| (n.clone(), tail_sup(&times, s, tail)))
            .collect();
        let a1_limsup = if total_flux {
            let s = get("a1");
            Some(
                times
                    .iter()
                    .zip(s)
                    .filter(|(t, _)| **t >= tail)
                    .map(|(_, v)| v.powf(alpha / (alpha - a)))
                    .fold(0.0, f64::max),
            )
        } else {
            None
        };
        Ok(AssumptionReport {
            horizon: (t0, t1),
            times,
            samples: series,
            sup_tail,
            verdicts,
            unavailable,
            a1_limsup,
        })
    }
}

/// Uniform sample grid including both ends.
pub fn sample_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64)
        .collect()
}

fn tail_start(t0: f64, t1: f64, fraction: f64) -> f64 {
    t1 - fraction * (t1 - t0)
}

fn tail_sup(times: &[f64], v: &[f64], tail: f64) -> f64 {
    times
        .iter()
        .zip(v)
        .filter(|(t, _)| **t >= tail)
        .map(|(_, x)| x.abs())
        .fold(0.0, f64::max)
}

fn bounded_verdict(times: &[f64], v: &[f64], tail: f64, prev: f64, ratio: f64) -> Verdict {
    if v.iter().any(|x| !x.is_finite()) {
        return Verdict::Violated;
    }
    let sup_tail = tail_sup(times, v, tail);
    let window: Vec<f64> = times
        .iter()
        .zip(v)
        .filter(|(t, _)| **t >= prev && **t < tail)
        .map(|(_, x)| x.abs())
        .collect();
    if window.is_empty() {
        return Verdict::Inconclusive;
    }
    let sup_prev = window.iter().cloned().fold(0.0, f64::max);
    if sup_tail <= ratio * sup_prev * (1.0 + 1e-6) + 1e-12 {
        return Verdict::SatisfiedNumerically;
    }
    // Still rising, but saturating: increments over the tail shrink.
    let tail_vals: Vec<f64> = times
        .iter()
        .zip(v)
        .filter(|(t, _)| **t >= tail)
        .map(|(_, x)| x.abs())
        .collect();
    let inc: Vec<f64> = tail_vals.windows(2).map(|w| w[1] - w[0]).collect();
    match (inc.first(), inc.last()) {
        (Some(&first), Some(&last)) if first > 0.0 && last < 0.5 * first => Verdict::Inconclusive,
        _ => Verdict::Violated,
    }
}

fn decay_verdict(times: &[f64], v: &[f64], tail: f64, threshold: f64) -> Verdict {
    if v.iter().any(|x| !x.is_finite()) {
        return Verdict::Violated;
    }
    if tail_sup(times, v, tail) <= threshold {
        return Verdict::SatisfiedNumerically;
    }
    let t: Vec<f64> = times
        .iter()
        .zip(v)
        .filter(|(t, _)| **t >= tail)
        .map(|(_, x)| x.abs())
        .collect();
    if t.windows(2).all(|w| w[1] <= w[0]) && t.last() < t.first() {
        Verdict::Inconclusive
    } else {
        Verdict::Violated
    }
}

/// Finiteness trend of `∫_{start}^{t} v`: the growth over the tail must be
/// negligible.
fn integral_verdict(times: &[f64], v: &[f64], start: f64, tail: f64, threshold: f64) -> Verdict {
    if v.iter().any(|x| !x.is_finite()) {
        return Verdict::Violated;
    }
    let mut total = 0.0;
    let mut growth = 0.0;
    for k in 1..times.len() {
        let (ta, tb) = (times[k - 1].max(start), times[k]);
        if tb <= ta {
            continue;
        }
        let piece = 0.5 * (v[k - 1].abs() + v[k].abs()) * (tb - ta);
        total += piece;
        if times[k - 1] >= tail {
            growth += piece;
        }
    }
    if growth <= threshold * (1.0 + total) {
        return Verdict::SatisfiedNumerically;
    }
    // Still growing: inconclusive only while the integrand is visibly decaying.
    decay_verdict(times, v, tail, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_combination() {
        use Verdict::*;
        assert_eq!(SatisfiedNumerically.and(Inconclusive), Inconclusive);
        assert_eq!(Inconclusive.and(Violated), Violated);
        assert_eq!(SatisfiedNumerically.and(SatisfiedNumerically), SatisfiedNumerically);
    }

    #[test]
    fn clause_checks() {
        let t = sample_times(0.0, 10.0, 101);
        let tail = 8.0;
        let growing: Vec<f64> = t.to_vec();
        let decaying: Vec<f64> = t.iter().map(|x| (-x).exp()).collect();
        let flat = vec![3.0; t.len()];
        assert_eq!(bounded_verdict(&t, &growing, tail, 6.0, 1.0), Verdict::Violated);
        assert_eq!(bounded_verdict(&t, &flat, tail, 6.0, 1.0), Verdict::SatisfiedNumerically);
        let saturating: Vec<f64> = t.iter().map(|x| 1.0 - (-0.5 * x).exp()).collect();
        assert_eq!(bounded_verdict(&t, &saturating, tail, 6.0, 1.0), Verdict::Inconclusive);
        assert_eq!(decay_verdict(&t, &flat, tail, 1e-6), Verdict::Violated);
        assert_eq!(decay_verdict(&t, &decaying, tail, 1e-6), Verdict::Inconclusive);
        assert_eq!(decay_verdict(&t, &decaying, tail, 1e-3), Verdict::SatisfiedNumerically);
        assert_eq!(integral_verdict(&t, &flat, 1.0, tail, 1e-6), Verdict::Violated);
        let fast: Vec<f64> = t.iter().map(|x| (-3.0 * x).exp()).collect();
        assert_eq!(integral_verdict(&t, &fast, 1.0, tail, 1e-6), Verdict::SatisfiedNumerically);
    }
}
