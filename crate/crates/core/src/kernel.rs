//! Forchheimer nonlinearity `g`, the permeability kernel `K` and the energy
//! density `H`.
//!
//! The momentum law `g(|u|) u = -∇p` is inverted as `u = -K(|∇p|) ∇p` with
//! `K(ξ) = 1 / g(G⁻¹(ξ))` and `G(s) = s g(s)`.

use crate::error::{Error, Result};
use crate::quadrature;

/// Generalized polynomial `g(s) = a₀ + a₁ s^α₁ + … + a_k s^α_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct GPolynomial {
    coeffs: Vec<f64>,
    exponents: Vec<f64>,
}

impl GPolynomial {
    /// Validates coefficients (all positive) and exponents (`α₀ = 0`,
    /// strictly increasing).
    pub fn new(coeffs: Vec<f64>, exponents: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() != exponents.len() {
            return Err(Error::Config(format!(
                "g-polynomial needs matching non-empty coeffs/exponents, got {} and {}",
                coeffs.len(),
                exponents.len()
            )));
        }
        if let Some(c) = coeffs.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Config(format!(
                "g-polynomial coefficients must be positive, got {c}"
            )));
        }
        if exponents[0] != 0.0 {
            return Err(Error::Config(format!(
                "first g-polynomial exponent must be 0, got {}",
                exponents[0]
            )));
        }
        if exponents
            .windows(2)
            .any(|w| !(w[1].is_finite() && w[1] > w[0]))
        {
            return Err(Error::Config(
                "g-polynomial exponents must be strictly increasing".into(),
            ));
        }
        Ok(Self { coeffs, exponents })
    }

    /// Pure Darcy law `g ≡ a₀`.
    pub fn darcy(a0: f64) -> Result<Self> {
        Self::new(vec![a0], vec![0.0])
    }

    /// Two-term Forchheimer law `g(s) = α + β s`.
    pub fn two_term(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(vec![alpha, beta], vec![0.0, 1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// Highest exponent `α_k` (the degree of `g`).
    pub fn degree(&self) -> f64 {
        *self.exponents.last().expect("validated non-empty")
    }

    pub fn eval_g(&self, s: f64) -> Result<f64> {
        check_nonneg("s", s)?;
        Ok(self.g(s))
    }

    fn g(&self, s: f64) -> f64 {
        let mut v = self.coeffs[0];
        for (c, e) in self.coeffs.iter().zip(&self.exponents).skip(1) {
            v += c * s.powf(*e);
        }
        v
    }

    fn g_prime(&self, s: f64) -> f64 {
        if s == 0.0 {
            return 0.0;
        }
        self.coeffs
            .iter()
            .zip(&self.exponents)
            .skip(1)
            .map(|(c, e)| c * e * s.powf(e - 1.0))
            .sum()
    }

    /// `G(s) = s g(s)`.
    pub fn big_g(&self, s: f64) -> f64 {
        s * self.g(s)
    }

    /// `G'(s) = a₀ + Σ a_j (1 + α_j) s^α_j`, bounded below by `a₀`.
    fn big_g_prime(&self, s: f64) -> f64 {
        let mut v = self.coeffs[0];
        for (c, e) in self.coeffs.iter().zip(&self.exponents).skip(1) {
            v += c * (1.0 + e) * s.powf(*e);
        }
        v
    }

    /// Unique `s ≥ 0` with `G(s) = ξ`.
    pub fn inv_big_g(&self, xi: f64) -> Result<f64> {
        check_nonneg("xi", xi)?;
        Ok(self.inverse(xi))
    }

    fn inverse(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            return 0.0;
        }
        // Both a₀ s ≤ G(s) and a_k s^(1+α_k) ≤ G(s), so each inversion is an
        // upper bound for the root.
        let k = self.coeffs.len() - 1;
        let mut hi = xi / self.coeffs[0];
        if k > 0 {
            hi = hi.min((xi / self.coeffs[k]).powf(1.0 / (1.0 + self.exponents[k])));
        }
        hi = hi.max(f64::MIN_POSITIVE);
        while self.big_g(hi) < xi {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        let mut s = hi;
        for _ in 0..200 {
            let f = self.big_g(s) - xi;
            if f == 0.0 {
                return s;
            }
            if f > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let newton = s - f / self.big_g_prime(s);
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - s).abs() <= 1e-15 * next.abs() || hi - lo <= 1e-15 * hi {
                return next;
            }
            s = next;
        }
        s
    }

    /// Exponent `a = α_k / (α_k + 1)`.
    pub fn exponent_a(&self) -> f64 {
        let d = self.degree();
        d / (d + 1.0)
    }

    /// Whether `deg(g) > 4/(n-2)` in spatial dimension `n > 2`.
    ///
    /// Always `false` for `n ≤ 2`, where the condition is void.
    pub fn degree_condition_violated(&self, n: usize) -> bool {
        if n <= 2 {
            return false;
        }
        self.degree() > 4.0 / (n as f64 - 2.0)
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_nan() || v < 0.0 {
        Err(Error::Domain(format!("{name} must be non-negative, got {v}")))
    } else {
        Ok(())
    }
}

/// A scalar mobility `ξ ↦ K(ξ)` used by the flux assembly.
pub trait Mobility: Send + Sync {
    /// Kernel value at `ξ ≥ 0`. Callers guarantee the argument is a
    /// gradient magnitude.
    fn value(&self, xi: f64) -> f64;

    /// Degeneracy exponent `a ∈ [0, 1)`.
    fn exponent_a(&self) -> f64;
}

/// Kernel built from a [`GPolynomial`].
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    poly: GPolynomial,
    a_exp: f64,
}

impl Kernel {
    pub fn new(poly: GPolynomial) -> Self {
        let a_exp = poly.exponent_a();
        Self { poly, a_exp }
    }

    pub fn poly(&self) -> &GPolynomial {
        &self.poly
    }

    pub fn a_exp(&self) -> f64 {
        self.a_exp
    }

    pub fn kappa(&self, xi: f64) -> Result<f64> {
        check_nonneg("xi", xi)?;
        Ok(self.k(xi))
    }

    fn k(&self, xi: f64) -> f64 {
        1.0 / self.poly.g(self.poly.inverse(xi))
    }

    /// Analytic derivative `K'(ξ) = -g'(s) / (g(s)² G'(s))`, `s = G⁻¹(ξ)`.
    pub fn kappa_prime(&self, xi: f64) -> Result<f64> {
        check_nonneg("xi", xi)?;
        let s = self.poly.inverse(xi);
        let g = self.poly.g(s);
        Ok(-self.poly.g_prime(s) / (g * g * self.poly.big_g_prime(s)))
    }

    /// `H(ξ) = 2 ∫₀^ξ K(u) u du`.
    pub fn kappa_h(&self, xi: f64) -> Result<f64> {
        check_nonneg("xi", xi)?;
        if xi == 0.0 {
            return Ok(0.0);
        }
        quadrature::integrate(|u| 2.0 * self.k(u) * u, 0.0, xi, 1e-10)
    }

    /// Tabulates the kernel on `[0, xi_max]` for fast interpolated lookup.
    pub fn tabulate(&self, xi_max: f64, nodes: usize) -> Result<KernelTable> {
        KernelTable::new(self, xi_max, nodes)
    }
}

impl Mobility for Kernel {
    fn value(&self, xi: f64) -> f64 {
        self.k(xi)
    }

    fn exponent_a(&self) -> f64 {
        self.a_exp
    }
}

/// Closed-form kernel of the two-term law `g(s) = α + β s`:
/// `K₂(ξ) = 2 / (α + √(α² + 4βξ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoTermLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl TwoTermLaw {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::Config(format!(
                "beta must be non-negative, got {beta}"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn k(&self, xi: f64) -> f64 {
        2.0 / (self.alpha + (self.alpha * self.alpha + 4.0 * self.beta * xi).sqrt())
    }
}

impl Mobility for TwoTermLaw {
    fn value(&self, xi: f64) -> f64 {
        self.k(xi)
    }

    fn exponent_a(&self) -> f64 {
        if self.beta > 0.0 {
            0.5
        } else {
            0.0
        }
    }
}

/// Kernel values on a log-spaced table with monotone cubic (Fritsch–Carlson)
/// interpolation in `ln ξ`. Below the first node the exact kernel is used.
#[derive(Debug, Clone)]
pub struct KernelTable {
    kernel: Kernel,
    ln_xi: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl KernelTable {
    const XI_MIN: f64 = 1e-6;

    fn new(kernel: &Kernel, xi_max: f64, nodes: usize) -> Result<Self> {
        if !(xi_max > Self::XI_MIN) || nodes < 4 {
            return Err(Error::Config(format!(
                "kernel table needs xi_max > {} and at least 4 nodes",
                Self::XI_MIN
            )));
        }
        let (l0, l1) = (Self::XI_MIN.ln(), xi_max.ln());
        let ln_xi: Vec<f64> = (0..nodes)
            .map(|i| l0 + (l1 - l0) * i as f64 / (nodes - 1) as f64)
            .collect();
        let mut values = Vec::with_capacity(nodes);
        let mut slopes = Vec::with_capacity(nodes);
        for &l in &ln_xi {
            let xi = l.exp();
            values.push(kernel.k(xi));
            // dK/d(ln ξ) = ξ K'(ξ)
            slopes.push(xi * kernel.kappa_prime(xi)?);
        }
        // Fritsch–Carlson limiter keeps each interval monotone.
        for i in 0..nodes - 1 {
            let h = ln_xi[i + 1] - ln_xi[i];
            let delta = (values[i + 1] - values[i]) / h;
            if delta == 0.0 {
                slopes[i] = 0.0;
                slopes[i + 1] = 0.0;
                continue;
            }
            let (a, b) = (slopes[i] / delta, slopes[i + 1] / delta);
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                slopes[i] = tau * a * delta;
                slopes[i + 1] = tau * b * delta;
            }
        }
        Ok(Self {
            kernel: kernel.clone(),
            ln_xi,
            values,
            slopes,
        })
    }

    pub fn xi_max(&self) -> f64 {
        self.ln_xi.last().expect("non-empty").exp()
    }

    /// Interpolated value; falls back to the exact kernel outside the table.
    pub fn eval(&self, xi: f64) -> f64 {
        if xi <= Self::XI_MIN || xi >= self.xi_max() {
            return self.kernel.k(xi);
        }
        let l = xi.ln();
        let step = self.ln_xi[1] - self.ln_xi[0];
        let i = (((l - self.ln_xi[0]) / step) as usize).min(self.ln_xi.len() - 2);
        let h = self.ln_xi[i + 1] - self.ln_xi[i];
        let t = (l - self.ln_xi[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[i]
            + h10 * h * self.slopes[i]
            + h01 * self.values[i + 1]
            + h11 * h * self.slopes[i + 1]
    }
}

impl Mobility for KernelTable {
    fn value(&self, xi: f64) -> f64 {
        self.eval(xi)
    }

    fn exponent_a(&self) -> f64 {
        self.kernel.a_exp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_term() -> Kernel {
        Kernel::new(GPolynomial::two_term(1.0, 1.0).unwrap())
    }

    #[test]
    fn eval_g_examples() {
        assert_eq!(GPolynomial::darcy(1.0).unwrap().eval_g(7.0).unwrap(), 1.0);
        assert_eq!(GPolynomial::two_term(1.0, 1.0).unwrap().eval_g(2.0).unwrap(), 3.0);
        let g = GPolynomial::new(vec![1.0, 2.0, 3.0], vec![0.0, 0.5, 2.0]).unwrap();
        assert!((g.eval_g(4.0).unwrap() - 53.0).abs() < 1e-12);
        assert!(matches!(g.eval_g(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_polynomials() {
        assert!(GPolynomial::new(vec![1.0, -1.0], vec![0.0, 1.0]).is_err());
        assert!(GPolynomial::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(GPolynomial::new(vec![1.0], vec![0.5]).is_err());
        assert!(GPolynomial::new(vec![], vec![]).is_err());
    }

    #[test]
    fn inverse_examples() {
        let d = GPolynomial::darcy(1.0).unwrap();
        assert!((d.inv_big_g(5.0).unwrap() - 5.0).abs() < 1e-14);
        let t = GPolynomial::two_term(1.0, 1.0).unwrap();
        assert!((t.inv_big_g(6.0).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(t.inv_big_g(0.0).unwrap(), 0.0);
        assert!(t.inv_big_g(-1.0).is_err());
    }

    #[test]
    fn kappa_examples() {
        let d = Kernel::new(GPolynomial::darcy(1.0).unwrap());
        assert_eq!(d.kappa(123.0).unwrap(), 1.0);
        assert!((two_term().kappa(6.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kappa_h_examples() {
        let d = Kernel::new(GPolynomial::darcy(1.0).unwrap());
        assert!((d.kappa_h(3.0).unwrap() - 9.0).abs() < 1e-12);
        assert_eq!(two_term().kappa_h(0.0).unwrap(), 0.0);
    }

    #[test]
    fn exponent_and_degree_condition() {
        assert_eq!(GPolynomial::darcy(1.0).unwrap().exponent_a(), 0.0);
        assert_eq!(GPolynomial::two_term(1.0, 1.0).unwrap().exponent_a(), 0.5);
        let g = GPolynomial::new(vec![1.0, 1.0], vec![0.0, 4.0]).unwrap();
        assert!((g.exponent_a() - 0.8).abs() < 1e-15);
        assert!(!g.degree_condition_violated(3));
        let g6 = GPolynomial::new(vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 6.0]).unwrap();
        assert!(g6.degree_condition_violated(3));
        assert!(!g6.degree_condition_violated(2));
    }

    #[test]
    fn analytic_derivative_matches_difference() {
        let k = Kernel::new(GPolynomial::new(vec![1.0, 0.5, 2.0], vec![0.0, 0.7, 3.0]).unwrap());
        for &xi in &[0.01, 0.3, 2.0, 50.0, 1e4] {
            let h = 1e-5 * xi;
            let fd = (k.kappa(xi + h).unwrap() - k.kappa(xi - h).unwrap()) / (2.0 * h);
            let an = k.kappa_prime(xi).unwrap();
            assert!((fd - an).abs() <= 1e-6 * an.abs(), "xi={xi}: {fd} vs {an}");
        }
    }

    #[test]
    fn table_matches_exact() {
        let k = Kernel::new(GPolynomial::new(vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 6.0]).unwrap());
        let tab = k.tabulate(1e6, 4000).unwrap();
        let mut xi = 1e-6;
        while xi < 2e6 {
            let exact = k.kappa(xi).unwrap();
            assert!((tab.eval(xi) - exact).abs() <= 1e-8 * exact, "xi={xi}");
            xi *= 1.37;
        }
    }

    #[test]
    fn two_term_law_matches_kernel() {
        let law = TwoTermLaw::new(2.0, 3.0).unwrap();
        let k = Kernel::new(GPolynomial::two_term(2.0, 3.0).unwrap());
        for &xi in &[0.0, 1e-3, 1.0, 1e3, 1e8] {
            assert!((law.k(xi) - k.kappa(xi).unwrap()).abs() < 1e-13);
        }
    }
}
