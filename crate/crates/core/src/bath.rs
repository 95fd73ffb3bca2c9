//! Lorentz-Drude bath: spectral density, thermal rates and the exponential
//! (Padé) expansion of the correlation function used by the HEOM solver.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions};

type C64 = Complex64;

fn default_pade_terms() -> usize {
    8
}

/// Bath parameters. `J(ω) = α ω ω_c / (ω² + ω_c²)` at inverse temperature `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathModel {
    pub alpha: f64,
    pub omega_c: f64,
    pub beta: f64,
    /// Number of Padé poles of the Bose function kept in the series.
    #[serde(default = "default_pade_terms")]
    pub pade_terms: usize,
}

impl Default for BathModel {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            omega_c: 1.0,
            beta: 1.0,
            pade_terms: default_pade_terms(),
        }
    }
}

impl BathModel {
    pub fn new(alpha: f64, omega_c: f64, beta: f64) -> Result<Self> {
        let b = Self {
            alpha,
            omega_c,
            beta,
            pade_terms: default_pade_terms(),
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_pade_terms(mut self, k: usize) -> Self {
        self.pade_terms = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.alpha) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be > 0, got {}",
                self.alpha
            )));
        }
        if !ok(self.omega_c) {
            return Err(Error::InvalidParameter(format!(
                "omega_c must be > 0, got {}",
                self.omega_c
            )));
        }
        if !ok(self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if self.pade_terms == 0 {
            return Err(Error::InvalidParameter("pade_terms must be >= 1".into()));
        }
        Ok(())
    }

    pub fn spectral_density(&self, omega: f64) -> f64 {
        spectral_density(self, omega)
    }

    pub fn rate(&self, omega_f: f64) -> f64 {
        rate(self, omega_f)
    }

    /// Zero-frequency rate `γx = lim J(ω)(2N(ω)+1) = 2α/(βω_c)`.
    pub fn gamma_x(&self) -> f64 {
        2.0 * self.alpha / (self.beta * self.omega_c)
    }

    /// Elastic rate `γz = J(ω)(2N(ω)+1)` at frequency `omega`.
    pub fn gamma_z(&self, omega: f64) -> f64 {
        rate(self, omega) + rate(self, -omega)
    }
}

pub fn spectral_density(bath: &BathModel, omega: f64) -> f64 {
    bath.alpha * omega * bath.omega_c / (omega * omega + bath.omega_c * bath.omega_c)
}

/// Bose-Einstein occupation `1/(e^{βω} − 1)` for `ω > 0`.
pub fn bose_occupation(beta: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bose_occupation needs omega > 0, got {omega}"
        )));
    }
    Ok(1.0 / (beta * omega).exp_m1())
}

/// `ω / (1 − e^{−βω})`, continuous through `ω = 0` where it equals `1/β`.
fn omega_bose(beta: f64, omega: f64) -> f64 {
    if omega == 0.0 {
        return 1.0 / beta;
    }
    let x = -beta * omega;
    if x > 700.0 {
        return 0.0;
    }
    omega / -x.exp_m1()
}

/// Golden-rule rate `J(ω)/(1 − e^{−βω})` for a signed Floquet frequency.
///
/// At `ω = 0` the value is the continuous limit `α/(βω_c)`, so the two
/// zero-frequency channels together give `γx = 2α/(βω_c)`.
pub fn rate(bath: &BathModel, omega_f: f64) -> f64 {
    let wc2 = bath.omega_c * bath.omega_c;
    bath.alpha * bath.omega_c / (omega_f * omega_f + wc2) * omega_bose(bath.beta, omega_f)
}

/// `C(t) = Σ_l η_l e^{−γ_l t}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialSeries {
    pub eta: Vec<C64>,
    pub gamma: Vec<C64>,
}

impl ExponentialSeries {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn eval(&self, t: f64) -> C64 {
        self.eta
            .iter()
            .zip(&self.gamma)
            .map(|(e, g)| e * (-g * t).exp())
            .sum()
    }

    /// Multiplies every amplitude by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            eta: self.eta.iter().map(|e| e * s).collect(),
            gamma: self.gamma.clone(),
        }
    }
}

fn tridiagonal_eigenvalues(n: usize, offset: f64) -> Vec<f64> {
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 0..n.saturating_sub(1) {
        let v = 1.0 / ((2.0 * k as f64 + offset + 2.0) * (2.0 * k as f64 + offset)).sqrt();
        m[(k, k + 1)] = v;
        m[(k + 1, k)] = v;
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Poles `ξ_j` and residues `κ_j` of the `[N−1/N]` Padé approximant
/// `1/(1−e^{−x}) ≈ 1/x + 1/2 + Σ_j 2κ_j x / (x² + ξ_j²)`.
pub fn bose_pade(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let xi: Vec<f64> = tridiagonal_eigenvalues(2 * n, 3.0)[..n]
        .iter()
        .map(|v| -2.0 / v)
        .collect();
    let chi: Vec<f64> = if n > 1 {
        tridiagonal_eigenvalues(2 * n - 1, 5.0)[..n - 1]
            .iter()
            .map(|v| -2.0 / v)
            .collect()
    } else {
        Vec::new()
    };
    let pre = 0.5 * n as f64 * (2.0 * (n as f64 + 1.0) + 1.0);
    let kappa = (0..n)
        .map(|j| {
            let mut t = pre;
            for k in 0..n - 1 {
                let d = xi[k] * xi[k] - xi[j] * xi[j] + if j == k { 1.0 } else { 0.0 };
                t *= (chi[k] * chi[k] - xi[j] * xi[j]) / d;
            }
            let d = xi[n - 1] * xi[n - 1] - xi[j] * xi[j] + if j == n - 1 { 1.0 } else { 0.0 };
            t / d
        })
        .collect();
    (xi, kappa)
}

/// Drude pole plus `k` Padé poles of the Bose function.
pub fn pade_series(bath: &BathModel, k: usize) -> ExponentialSeries {
    let (a, wc, beta) = (bath.alpha, bath.omega_c, bath.beta);
    let mut eta = vec![C64::new(
        0.5 * a * wc / (0.5 * beta * wc).tan(),
        -0.5 * a * wc,
    )];
    let mut gamma = vec![C64::new(wc, 0.0)];
    let (xi, kappa) = bose_pade(k);
    for (x, kap) in xi.iter().zip(&kappa) {
        let nu = x / beta;
        eta.push(C64::new(
            2.0 * kap / beta * a * wc * nu / (nu * nu - wc * wc),
            0.0,
        ));
        gamma.push(C64::new(nu, 0.0));
    }
    ExponentialSeries { eta, gamma }
}

/// Integration window half-width used by [`correlation_quadrature`].
pub fn quadrature_window(bath: &BathModel) -> f64 {
    500.0 * bath.omega_c.max(1.0 / bath.beta)
}

/// Exponential integral `E1(z)` for `Re z ≥ 0`, `z ≠ 0`.
pub fn exp_integral_e1(z: C64) -> C64 {
    if z.norm() < 1.0 {
        const EULER: f64 = 0.577_215_664_901_532_9;
        let mut sum = C64::new(0.0, 0.0);
        let mut term = C64::new(1.0, 0.0);
        for k in 1..60 {
            term *= -z / k as f64;
            let s = term / k as f64;
            sum += s;
            if s.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        return -EULER - z.ln() - sum;
    }
    // Modified Lentz on E1(z) = e^{−z} / (z + 1/(1 + 1/(z + 2/(1 + 2/(z + ...))))).
    let tiny = 1e-300;
    let one = C64::new(1.0, 0.0);
    let mut f = z;
    let mut c = z;
    let mut d = C64::new(0.0, 0.0);
    for i in 1..10_000 {
        let an = C64::new(((i + 1) / 2) as f64, 0.0);
        let bn = if i % 2 == 1 { one } else { z };
        d = bn + an * d;
        if d.norm() < tiny {
            d = C64::new(tiny, 0.0);
        }
        c = bn + an / c;
        if c.norm() < tiny {
            c = C64::new(tiny, 0.0);
        }
        d = one / d;
        let delta = c * d;
        f *= delta;
        if (delta - one).norm() < 1e-16 {
            break;
        }
    }
    (-z).exp() / f
}

/// Direct numerical integration of
/// `C(t) = (1/π) ∫ dω e^{−iωt} J(ω)/(1 − e^{−βω})`.
///
/// The integral is evaluated on `(−W, W)` (see [`quadrature_window`]); for
/// `t > 0` the tail beyond `W` is added through its `α ω_c/ω` asymptote,
/// `(αω_c/π) E1(iWt)`. `Re C(0)` diverges logarithmically in `W`, so the
/// value at `t = 0` is the windowed integral only and depends on `W`.
pub fn correlation_quadrature(bath: &BathModel, t: f64) -> Result<C64> {
    correlation_quadrature_windowed(bath, t, quadrature_window(bath))
}

/// [`correlation_quadrature`] with an explicit window half-width `w`.
pub fn correlation_quadrature_windowed(bath: &BathModel, t: f64, w: f64) -> Result<C64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    let (a, wc, beta) = (bath.alpha, bath.omega_c, bath.beta);
    let integrand = |om: f64| -> C64 {
        let g = a * wc / (om * om + wc * wc) * omega_bose(beta, om) / std::f64::consts::PI;
        C64::new(0.0, -om * t).exp() * g
    };
    let s = wc.max(1.0 / beta);
    let mut bp = vec![-w];
    bp.extend(
        [-50.0, -10.0, -2.0, 0.0, 2.0, 10.0, 50.0]
            .iter()
            .map(|m| m * s)
            .filter(|x| x.abs() < w),
    );
    bp.push(w);
    let opts = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-12,
        max_panels: 400_000,
    };
    let r = quadrature::integrate(integrand, &bp, opts)?;
    if r.error > 1e-8 {
        return Err(Error::Quadrature(r.error));
    }
    let mut value = r.value;
    if t > 0.0 {
        value += exp_integral_e1(C64::new(0.0, w * t)) * (a * wc / std::f64::consts::PI);
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_bath() -> BathModel {
        BathModel::default()
    }

    #[test]
    fn spectral_density_values() {
        let b = reference_bath();
        assert_eq!(b.spectral_density(0.0), 0.0);
        assert_relative_eq!(b.spectral_density(1.0), 0.05, epsilon = 1e-15);
        let b2 = BathModel::new(0.1, 2.0, 1.0).unwrap();
        assert_relative_eq!(b2.spectral_density(1.0), 0.04, epsilon = 1e-15);
        assert_relative_eq!(b.spectral_density(-0.3), -b.spectral_density(0.3));
    }

    #[test]
    fn bose_values() {
        assert_relative_eq!(
            bose_occupation(1.0, 1.0).unwrap(),
            0.581_976_706_869_326_4,
            epsilon = 1e-12
        );
        assert_eq!(bose_occupation(f64::INFINITY, 1.0).unwrap(), 0.0);
        assert!(bose_occupation(1.0, 1e4).unwrap() < 1e-300);
        assert!(bose_occupation(1.0, 0.0).is_err());
        assert!(bose_occupation(1.0, -1.0).is_err());
    }

    #[test]
    fn rate_values_and_limits() {
        let b = reference_bath();
        assert_relative_eq!(b.rate(1.0), 0.05 / (1.0 - (-1.0f64).exp()), epsilon = 1e-14);
        assert_relative_eq!(b.rate(1.0), 0.0791, epsilon = 1e-4);
        assert_relative_eq!(b.rate(0.0) + b.rate(-0.0), 0.2, epsilon = 1e-15);
        assert_relative_eq!(b.rate(1e-6) + b.rate(-1e-6), 0.2, epsilon = 1e-9);
        assert_relative_eq!(b.gamma_x(), 0.2);
        assert_relative_eq!(b.gamma_z(1.0), 0.108_197_670_686_932_6, epsilon = 1e-12);
        let r = b.rate(0.7) / b.rate(-0.7);
        assert_relative_eq!(r, 0.7f64.exp(), max_relative = 1e-12);
    }

    #[test]
    fn validation() {
        assert!(BathModel::new(0.0, 1.0, 1.0).is_err());
        assert!(BathModel::new(0.1, -1.0, 1.0).is_err());
        assert!(BathModel::new(0.1, 1.0, 0.0).is_err());
        assert!(BathModel::new(0.1, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn pade_approximates_bose_function() {
        let (xi, kappa) = bose_pade(8);
        assert_relative_eq!(xi[0], 2.0 * std::f64::consts::PI, max_relative = 1e-10);
        for x in [0.5, 3.0, 10.0, 30.0] {
            let approx: f64 = 1.0 / x
                + 0.5
                + xi.iter()
                    .zip(&kappa)
                    .map(|(e, k)| 2.0 * k * x / (x * x + e * e))
                    .sum::<f64>();
            let exact = 1.0 / (1.0 - (-x).exp());
            assert!(
                (approx - exact).abs() < 1e-8,
                "x = {x}: {approx} vs {exact}"
            );
        }
    }

    #[test]
    fn series_structure() {
        let s = pade_series(&reference_bath(), 8);
        assert_eq!(s.len(), 9);
        assert_eq!(s.gamma[0], C64::new(1.0, 0.0));
        assert!(s.gamma.iter().all(|g| g.re > 0.0));
        // imaginary part comes only from the Drude pole and is β-independent
        assert_relative_eq!(s.eval(0.0).im, -0.05, epsilon = 1e-15);
    }

    #[test]
    fn e1_reference_values() {
        // E1(1) = 0.21938393439552
        assert_relative_eq!(
            exp_integral_e1(C64::new(1.0, 0.0)).re,
            0.219_383_934_395_520_3,
            epsilon = 1e-13
        );
        // E1(i) = −Ci(1) + i(Si(1) − π/2)
        let e = exp_integral_e1(C64::new(0.0, 1.0));
        assert_relative_eq!(e.re, -0.337_403_922_900_968_1, epsilon = 1e-12);
        assert_relative_eq!(
            e.im,
            0.946_083_070_367_183 - std::f64::consts::FRAC_PI_2,
            epsilon = 1e-12
        );
        let e = exp_integral_e1(C64::new(0.0, 0.5));
        assert_relative_eq!(e.re, 0.177_784_078_806_612_8, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_matches_series_for_positive_times() {
        let b = reference_bath();
        let s8 = pade_series(&b, 8);
        let s12 = pade_series(&b, 12);
        for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let q = correlation_quadrature(&b, t).unwrap();
            let e8 = (s8.eval(t) - q).norm() / q.norm();
            let e12 = (s12.eval(t) - q).norm() / q.norm();
            assert!(e8 <= 1e-3, "K=8, t={t}: {e8}");
            if t >= 0.5 {
                assert!(e12 <= 1e-4, "K=12, t={t}: {e12}");
            }
            let im_rel = (s8.eval(t).im - q.im).abs() / q.im.abs();
            assert!(im_rel <= 1e-3, "Im at t={t}: {im_rel}");
        }
    }

    #[test]
    fn zero_time_value_is_window_dependent() {
        // Re C(0) = (1/π)∫J coth(βω/2) dω grows like (α ω_c/π) ln W.
        let b = reference_bath();
        let w = quadrature_window(&b);
        let q1 = correlation_quadrature_windowed(&b, 0.0, w).unwrap();
        let q2 = correlation_quadrature_windowed(&b, 0.0, 2.0 * w).unwrap();
        assert!(q1.re > 0.0);
        let growth = b.alpha * b.omega_c / std::f64::consts::PI * 2.0f64.ln();
        assert_relative_eq!(q2.re - q1.re, growth, max_relative = 1e-3);
        // away from t = 0 the tail correction makes the result window independent
        let a = correlation_quadrature_windowed(&b, 0.5, w).unwrap();
        let c = correlation_quadrature_windowed(&b, 0.5, 2.0 * w).unwrap();
        assert!((a - c).norm() < 1e-7);
    }

    #[test]
    fn series_error_decreases_with_k() {
        let b = reference_bath();
        let grid: Vec<f64> = (1..=100).map(|i| 0.1 * i as f64).collect();
        let oracle: Vec<C64> = grid
            .iter()
            .map(|&t| correlation_quadrature(&b, t).unwrap())
            .collect();
        let err = |k| {
            let s = pade_series(&b, k);
            grid.iter()
                .zip(&oracle)
                .map(|(&t, q)| (s.eval(t) - q).norm())
                .fold(0.0, f64::max)
        };
        let (e4, e8, e12) = (err(4), err(8), err(12));
        assert!(e8 <= e4 && e12 <= e8, "{e4} {e8} {e12}");
    }
}
