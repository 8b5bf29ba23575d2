//! TOML scenario files.

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use forch_core::expr::Expr;
use forch_core::grid::{Grid, Rect};
use forch_core::kernel::{GPolynomial, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Liquid,
    Gas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Radial,
    Annulus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectSpec {
    pub center: [f64; 2],
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub kind: GeometryKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_outer: Option<f64>,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<RectSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<RectSpec>,
}

fn default_ratio() -> f64 {
    1.05
}

/// Either a g-polynomial (`coeffs`, `exponents`) or the two-term law
/// (`alpha`, `beta`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    TotalFlux,
    Dirichlet,
}

/// Well program. Expressions may use the placeholders `{A}` (the constant
/// decline rate `Q_s/|U|`), `{tau}` (characteristic time) and `{dd}` (PSS
/// drawdown), substituted once the basic profile is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgramSpec {
    pub regime: RegimeKind,
    pub q_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<String>,
    #[serde(default = "zero_expr")]
    pub psi: String,
    #[serde(default = "zero_expr")]
    pub phi: String,
}

fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Pss,
    Bump,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub kind: InitialKind,
    /// Bump amplitude as a multiple of the PSS drawdown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Default for InitialSpec {
    fn default() -> Self {
        Self {
            kind: InitialKind::Pss,
            amplitude: None,
            center: None,
            width: None,
            value: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSpec {
    pub b_reserve: f64,
    pub a_rate: f64,
    /// Constant `φ₀ ≥ 0`; omitted means the matched start `φ₀ = 2W`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi0: Option<f64>,
    #[serde(default = "default_crit_fraction")]
    pub crit_fraction: f64,
    #[serde(default = "default_picard_threshold")]
    pub picard_threshold: usize,
    /// Reserve levels for `gas-sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_b: Option<Vec<f64>>,
    /// Sweep horizon `T0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

fn default_crit_fraction() -> f64 {
    0.01
}

fn default_picard_threshold() -> usize {
    40
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Absolute,
    /// Multiples of the characteristic time of the basic profile.
    Tau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default = "default_time_unit")]
    pub time_unit: TimeUnit,
    /// Picard tolerance and iteration cap; omitted keeps solver defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

fn default_time_unit() -> TimeUnit {
    TimeUnit::Absolute
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: None,
            t_end: None,
            time_unit: default_time_unit(),
            tol: None,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagSpec {
    pub t0: f64,
    pub t1: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "one")]
    pub eps: f64,
    #[serde(default = "one")]
    pub c_f1: f64,
    #[serde(default = "default_decay")]
    pub decay_threshold: f64,
    #[serde(default = "one")]
    pub growth_ratio: f64,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    /// Run the total-flux problem from the PSS state to supply `γ(t)`.
    #[serde(default)]
    pub with_trajectory: bool,
}

fn default_samples() -> usize {
    201
}

fn default_beta() -> f64 {
    2.0
}

fn one() -> f64 {
    1.0
}

fn default_decay() -> f64 {
    1e-6
}

fn default_tail() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            stride: default_stride(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: Model,
    pub geometry: Geometry,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<ProgramSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas: Option<GasSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnose: Option<DiagSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Scenario {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| config(format!("invalid scenario: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn build_grid(&self) -> CliResult<Grid> {
        let g = &self.geometry;
        let grid = match g.kind {
            GeometryKind::Radial => {
                let (Some(ri), Some(re)) = (g.r_inner, g.r_outer) else {
                    return Err(config("radial geometry needs r_inner and r_outer"));
                };
                if g.outer.is_some() || g.inner.is_some() {
                    return Err(config("radial geometry takes no rectangles"));
                }
                Grid::build_radial(ri, re, g.n, g.ratio)?
            }
            GeometryKind::Annulus => {
                let (Some(o), Some(i)) = (&g.outer, &g.inner) else {
                    return Err(config("annulus geometry needs outer and inner rectangles"));
                };
                if g.r_inner.is_some() || g.r_outer.is_some() {
                    return Err(config("annulus geometry takes no radii"));
                }
                let rect = |r: &RectSpec| Rect::centered(r.center[0], r.center[1], r.width, r.height);
                Grid::build_annulus2d(rect(o)?, rect(i)?, g.n)?
            }
        };
        Ok(grid)
    }

    /// Liquid kernel; defaults to Darcy with unit coefficient.
    pub fn build_kernel(&self) -> CliResult<Kernel> {
        let k = &self.kernel;
        let poly = match (&k.coeffs, &k.exponents, k.alpha, k.beta) {
            (Some(c), Some(e), None, None) => GPolynomial::new(c.clone(), e.clone())?,
            (None, None, Some(a), Some(b)) => GPolynomial::two_term(a, b)?,
            (None, None, None, None) => GPolynomial::darcy(1.0)?,
            _ => {
                return Err(config(
                    "kernel needs either coeffs and exponents or alpha and beta",
                ))
            }
        };
        Ok(Kernel::new(poly))
    }

    /// Forchheimer coefficients of the gas law.
    pub fn gas_coefficients(&self) -> CliResult<(f64, f64)> {
        match (&self.kernel.coeffs, &self.kernel.exponents, self.kernel.alpha, self.kernel.beta) {
            (None, None, Some(a), Some(b)) => Ok((a, b)),
            _ => Err(config("gas kernels are given by alpha and beta")),
        }
    }

    pub fn program(&self) -> CliResult<&ProgramSpec> {
        self.program.as_ref().ok_or_else(|| config("missing [program] block"))
    }

    pub fn gas(&self) -> CliResult<&GasSpec> {
        self.gas.as_ref().ok_or_else(|| config("missing [gas] block"))
    }

    pub fn diag(&self) -> CliResult<&DiagSpec> {
        self.diagnose.as_ref().ok_or_else(|| config("missing [diagnose] block"))
    }

    pub fn require_model(&self, model: Model, command: &str) -> CliResult<()> {
        if self.model == model {
            Ok(())
        } else {
            Err(config(format!("`{command}` needs model = {model:?}").to_lowercase()))
        }
    }

    /// Checks that every expression of the program parses once placeholders
    /// are filled in.
    pub fn check_program(&self) -> CliResult<()> {
        let p = self.program()?;
        if !p.q_s.is_finite() {
            return Err(config("q_s must be finite"));
        }
        match p.regime {
            RegimeKind::TotalFlux if p.q.is_none() || p.gamma.is_some() => {
                return Err(config("total_flux programs need q and no gamma"))
            }
            RegimeKind::Dirichlet if p.gamma.is_none() || p.q.is_some() => {
                return Err(config("dirichlet programs need gamma and no q"))
            }
            _ => {}
        }
        if p.phi.contains("{tau}") || p.phi.contains("{dd}") {
            return Err(config("phi may only use the {A} placeholder"));
        }
        let probe = Placeholders {
            a: 1.0,
            tau: 1.0,
            dd: 1.0,
        };
        for e in [Some(&p.psi), Some(&p.phi), p.q.as_ref(), p.gamma.as_ref()].into_iter().flatten() {
            probe.expr(e)?;
        }
        Ok(())
    }
}

/// Values substituted for `{A}`, `{tau}` and `{dd}`.
#[derive(Debug, Clone, Copy)]
pub struct Placeholders {
    pub a: f64,
    pub tau: f64,
    pub dd: f64,
}

impl Placeholders {
    pub fn expr(&self, text: &str) -> CliResult<Expr> {
        let filled = text
            .replace("{A}", &format!("({:e})", self.a))
            .replace("{tau}", &format!("({:e})", self.tau))
            .replace("{dd}", &format!("({:e})", self.dd));
        Expr::parse(&filled).map_err(|e| config(format!("expression `{text}`: {e}")))
    }
}
