//! Jacobi polynomials `P_n^{(α,β)}` and their rescalings.
//!
//! Polynomials are normalized by `P_n(1) = C(n+α, n)` and evaluated with the
//! forward three-term recurrence. The orthonormal family is `p_n = d_n P_n`
//! with respect to `dμ = (1-x)^α (1+x)^β dx` on `(-1, 1)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The parameter pair `(α, β)` of a Jacobi weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct JacobiParams {
    alpha: f64,
    beta: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    alpha: f64,
    beta: f64,
}

impl TryFrom<RawParams> for JacobiParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        JacobiParams::new(raw.alpha, raw.beta)
    }
}

impl From<JacobiParams> for RawParams {
    fn from(p: JacobiParams) -> Self {
        RawParams { alpha: p.alpha, beta: p.beta }
    }
}

impl JacobiParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParams { alpha, beta });
        }
        Ok(Self { alpha, beta })
    }

    /// Legendre weight, `α = β = 0`.
    pub fn legendre() -> Self {
        Self { alpha: 0.0, beta: 0.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `γ = max(α, β)`.
    pub fn gamma(&self) -> f64 {
        self.alpha.max(self.beta)
    }

    /// Whether `min(α, β) > -1/2`, the range where the critical exponents exist.
    pub fn half_range_ok(&self) -> bool {
        self.alpha.min(self.beta) > -0.5
    }

    /// Parameters with `α` and `β` exchanged.
    pub fn swapped(&self) -> Self {
        Self { alpha: self.beta, beta: self.alpha }
    }

    /// Parameters `(α+1, β+1)` of the derivative family.
    pub fn shifted(&self) -> Self {
        Self { alpha: self.alpha + 1.0, beta: self.beta + 1.0 }
    }

    /// Total mass `μ(-1,1) = 2^{α+β+1} B(α+1, β+1)`.
    pub fn total_mass(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        ((a + b + 1.0) * std::f64::consts::LN_2 + libm::lgamma(a + 1.0) + libm::lgamma(b + 1.0)
            - libm::lgamma(a + b + 2.0))
        .exp()
    }
}

/// How basis elements are scaled relative to `P_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// `p_n = d_n P_n`, orthonormal in `L_2(μ)`.
    Orthonormal,
    /// `n^{1/2} P_n` for `n >= 1`, and the constant `1` for `n = 0`.
    SqrtScaled,
    /// `p_n / ‖p_n‖_{L_p(μ)}`.
    LpNormalized { p: f64 },
}

impl NormalizationMode {
    pub fn lp(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Domain { value: p, domain: "[1, inf)" });
        }
        Ok(Self::LpNormalized { p })
    }
}

/// Supplies `‖p_n‖_{L_p(μ)}` for the L_p-normalized basis.
pub trait LpNormOracle: Sync {
    fn orthonormal_lp_norm(&self, params: JacobiParams, n: usize, p: f64) -> Result<f64>;
}

/// Precomputed coefficients of `P_n = (a_n x + b_n) P_{n-1} - c_n P_{n-2}`.
#[derive(Debug, Clone)]
pub struct Recurrence {
    params: JacobiParams,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Recurrence {
    pub fn new(params: JacobiParams, max_degree: usize) -> Self {
        let (al, be) = (params.alpha, params.beta);
        let len = max_degree + 1;
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        let mut c = vec![0.0; len];
        if max_degree >= 1 {
            a[1] = 0.5 * (al + be + 2.0);
            b[1] = 0.5 * (al - be);
        }
        for n in 2..len {
            let nf = n as f64;
            let s = 2.0 * nf + al + be;
            let denom = 2.0 * nf * (nf + al + be) * (s - 2.0);
            a[n] = (s - 1.0) * s * (s - 2.0) / denom;
            b[n] = (s - 1.0) * (al * al - be * be) / denom;
            c[n] = 2.0 * (nf + al - 1.0) * (nf + be - 1.0) * s / denom;
        }
        Self { params, a, b, c }
    }

    pub fn params(&self) -> JacobiParams {
        self.params
    }

    pub fn max_degree(&self) -> usize {
        self.a.len() - 1
    }

    /// Calls `visit(n, P_n(x))` for `n = 0..=max_degree` in order.
    #[inline]
    pub fn for_each(&self, x: f64, mut visit: impl FnMut(usize, f64)) {
        let mut prev = 1.0;
        visit(0, prev);
        if self.a.len() == 1 {
            return;
        }
        let mut cur = self.a[1] * x + self.b[1];
        visit(1, cur);
        for n in 2..self.a.len() {
            let next = (self.a[n] * x + self.b[n]) * cur - self.c[n] * prev;
            prev = cur;
            cur = next;
            visit(n, cur);
        }
    }

    /// `P_max_degree(x)` alone.
    pub fn last(&self, x: f64) -> f64 {
        let mut out = 1.0;
        self.for_each(x, |_, v| out = v);
        out
    }
}

fn check_unit_interval(x: f64) -> Result<()> {
    if x.is_nan() || x.abs() > 1.0 {
        return Err(Error::Domain { value: x, domain: "[-1, 1]" });
    }
    Ok(())
}

/// `P_n^{(α,β)}(x)` via the forward recurrence.
pub fn eval_p(params: JacobiParams, n: usize, x: f64) -> Result<f64> {
    check_unit_interval(x)?;
    let v = Recurrence::new(params, n).last(x);
    if !v.is_finite() {
        return Err(Error::Overflow { degree: n, x });
    }
    Ok(v)
}

/// `d_n` such that `d_n P_n` has unit `L_2(μ)` norm.
pub fn orthonormal_const(params: JacobiParams, n: usize) -> f64 {
    let (a, b) = (params.alpha, params.beta);
    if n == 0 {
        return params.total_mass().recip().sqrt();
    }
    let nf = n as f64;
    let log_sq = (2.0 * nf + a + b + 1.0).ln() + libm::lgamma(nf + 1.0) + libm::lgamma(nf + a + b + 1.0)
        - (a + b + 1.0) * std::f64::consts::LN_2
        - libm::lgamma(nf + a + 1.0)
        - libm::lgamma(nf + b + 1.0);
    (0.5 * log_sq).exp()
}

/// Factor `s_n` such that the n-th basis element of `mode` is `s_n P_n`.
pub fn basis_scale(
    params: JacobiParams,
    mode: NormalizationMode,
    n: usize,
    norms: Option<&dyn LpNormOracle>,
) -> Result<f64> {
    match mode {
        NormalizationMode::Orthonormal => Ok(orthonormal_const(params, n)),
        NormalizationMode::SqrtScaled => Ok(if n == 0 { 1.0 } else { (n as f64).sqrt() }),
        NormalizationMode::LpNormalized { p } => {
            let oracle = norms.ok_or(Error::MissingNormBackend)?;
            let norm = oracle.orthonormal_lp_norm(params, n, p)?;
            Ok(orthonormal_const(params, n) / norm)
        }
    }
}

/// The n-th basis element of `mode` at `x`.
pub fn eval_basis(
    params: JacobiParams,
    mode: NormalizationMode,
    n: usize,
    x: f64,
    norms: Option<&dyn LpNormOracle>,
) -> Result<f64> {
    let scale = basis_scale(params, mode, n, norms)?;
    Ok(scale * eval_p(params, n, x)?)
}

/// `(P_n^{(α,β)})'(x) = (1+α+β+n)/2 · P_{n-1}^{(α+1,β+1)}(x)`.
pub fn eval_derivative(params: JacobiParams, n: usize, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain { value: 0.0, domain: "degree >= 1" });
    }
    let factor = 0.5 * (1.0 + params.alpha + params.beta + n as f64);
    Ok(factor * eval_p(params.shifted(), n - 1, x)?)
}

/// Leading Darboux approximation of `n^{1/2} P_n(cos θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarbouxTerms {
    pub k_theta: f64,
    pub phi_theta: f64,
    pub main_term: f64,
    /// `k(θ) / (n sin θ)`, the scale of the remainder.
    pub error_bound_scale: f64,
    /// False when `θ` falls outside `[δ/n, π - δ/n]`.
    pub in_uniform_window: bool,
}

pub const DEFAULT_DARBOUX_DELTA: f64 = 1.0;

pub fn darboux_amplitude(params: JacobiParams, theta: f64) -> f64 {
    PI.powf(-0.5) * (0.5 * theta).sin().powf(-params.alpha - 0.5) * (0.5 * theta).cos().powf(-params.beta - 0.5)
}

pub fn darboux_phase(params: JacobiParams, theta: f64) -> f64 {
    (params.alpha + params.beta + 1.0) * theta / 2.0 - (2.0 * params.alpha + 1.0) * PI / 4.0
}

pub fn darboux_terms(params: JacobiParams, n: usize, theta: f64) -> Result<DarbouxTerms> {
    darboux_terms_with_delta(params, n, theta, DEFAULT_DARBOUX_DELTA)
}

pub fn darboux_terms_with_delta(params: JacobiParams, n: usize, theta: f64, delta: f64) -> Result<DarbouxTerms> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Domain { value: theta, domain: "(0, pi)" });
    }
    if n == 0 {
        return Err(Error::Domain { value: 0.0, domain: "degree >= 1" });
    }
    let nf = n as f64;
    let k_theta = darboux_amplitude(params, theta);
    let phi_theta = darboux_phase(params, theta);
    let edge = delta / nf;
    Ok(DarbouxTerms {
        k_theta,
        phi_theta,
        main_term: k_theta * (nf * theta + phi_theta).cos(),
        error_bound_scale: k_theta / (nf * theta.sin()),
        in_uniform_window: theta >= edge && theta <= PI - edge,
    })
}

/// The interval `[1 - d/n², 1]` on which `P_n ≈ n^α`.
pub fn near_one_window(n: usize, d: f64) -> Result<(f64, f64)> {
    if !(d > 0.0) {
        return Err(Error::Domain { value: d, domain: "d > 0" });
    }
    if n == 0 {
        return Err(Error::Domain { value: 0.0, domain: "degree >= 1" });
    }
    let nf = n as f64;
    Ok(((1.0 - d / (nf * nf)).max(-1.0), 1.0))
}

/// Min and max of `P_n(x) / n^α` over `grid_points` equispaced points of the window.
pub fn near_one_ratio_range(params: JacobiParams, n: usize, d: f64, grid_points: usize) -> Result<(f64, f64)> {
    let (lo, hi) = near_one_window(n, d)?;
    let rec = Recurrence::new(params, n);
    let scale = (n as f64).powf(params.alpha);
    let steps = grid_points.max(2) - 1;
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=steps {
        let x = lo + (hi - lo) * i as f64 / steps as f64;
        let r = rec.last(x) / scale;
        range.0 = range.0.min(r);
        range.1 = range.1.max(r);
    }
    Ok(range)
}

/// Largest zero of `P_n`, bracketed by a scan in `θ` from 0 and refined by bisection.
pub fn largest_root(params: JacobiParams, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain { value: 0.0, domain: "degree >= 1" });
    }
    let rec = Recurrence::new(params, n);
    let nf = n as f64;
    let step = 0.05 / nf;
    let mut theta_hi = 0.0;
    let mut val_hi = rec.last(1.0);
    let mut theta_lo = step;
    loop {
        let v = rec.last(theta_lo.cos());
        if v == 0.0 {
            return Ok(theta_lo.cos());
        }
        if v.signum() != val_hi.signum() {
            break;
        }
        theta_hi = theta_lo;
        val_hi = v;
        theta_lo += step;
        if theta_lo >= PI {
            return Err(Error::Config(format!("no sign change found for degree {n}")));
        }
    }
    let (mut a, mut b) = (theta_hi, theta_lo);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let v = rec.last(mid.cos());
        if v.signum() == val_hi.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((0.5 * (a + b)).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64) -> JacobiParams {
        JacobiParams::new(a, b).unwrap()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(JacobiParams::new(-1.0, 0.0).is_err());
        assert!(JacobiParams::new(0.0, -1.5).is_err());
        assert!(JacobiParams::new(f64::NAN, 0.0).is_err());
        let p = params(0.3, -0.7);
        assert_eq!(p.gamma(), 0.3);
        assert!(!p.half_range_ok());
        assert!(params(-0.4, 1.5).half_range_ok());
    }

    #[test]
    fn params_deserialize_validates() {
        let ok: JacobiParams = serde_json::from_str(r#"{"alpha":0.5,"beta":0.0}"#).unwrap();
        assert_eq!(ok, params(0.5, 0.0));
        assert!(serde_json::from_str::<JacobiParams>(r#"{"alpha":-1.5,"beta":0.0}"#).is_err());
    }

    #[test]
    fn eval_p_examples() {
        assert_eq!(eval_p(params(0.0, 0.0), 0, 0.7).unwrap(), 1.0);
        assert!((eval_p(params(0.0, 0.0), 2, 0.0).unwrap() + 0.5).abs() < 1e-15);
        let v = eval_p(params(1.5, 0.5), 3, 1.0).unwrap();
        assert!((v - 6.5625).abs() < 1e-13, "{v}");
    }

    #[test]
    fn eval_p_matches_legendre_closed_forms() {
        let p = JacobiParams::legendre();
        for i in 0..=20 {
            let x = -1.0 + 0.1 * i as f64;
            let p3 = 0.5 * (5.0 * x * x * x - 3.0 * x);
            let p4 = (35.0 * x.powi(4) - 30.0 * x * x + 3.0) / 8.0;
            assert!((eval_p(p, 3, x).unwrap() - p3).abs() < 1e-14);
            assert!((eval_p(p, 4, x).unwrap() - p4).abs() < 1e-14);
        }
    }

    #[test]
    fn eval_p_rejects_outside_interval() {
        assert!(matches!(eval_p(JacobiParams::legendre(), 3, 1.01), Err(Error::Domain { .. })));
        assert!(eval_p(JacobiParams::legendre(), 3, f64::NAN).is_err());
    }

    #[test]
    fn orthonormal_const_examples() {
        let p = JacobiParams::legendre();
        assert!((orthonormal_const(p, 0) - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((orthonormal_const(p, 1) - 1.5f64.sqrt()).abs() < 1e-14);
        let n = 10_000.0;
        assert!((orthonormal_const(p, 10_000) / f64::sqrt(n) - 1.0).abs() < 0.01);
    }

    #[test]
    fn orthonormal_const_handles_alpha_plus_beta_minus_one() {
        // α+β+1 = 0 makes the n = 0 formula a 0·Γ(0) limit.
        let p = params(-0.5, -0.5);
        let d0 = orthonormal_const(p, 0);
        assert!((d0 - PI.recip().sqrt()).abs() < 1e-14);
        assert!(orthonormal_const(p, 1).is_finite());
    }

    #[test]
    fn eval_basis_modes() {
        let p = JacobiParams::legendre();
        let v = eval_basis(p, NormalizationMode::Orthonormal, 0, 0.3, None).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
        let v = eval_basis(p, NormalizationMode::SqrtScaled, 0, 0.3, None).unwrap();
        assert_eq!(v, 1.0);
        let v = eval_basis(p, NormalizationMode::SqrtScaled, 4, 0.3, None).unwrap();
        assert!((v - 2.0 * eval_p(p, 4, 0.3).unwrap()).abs() < 1e-15);
        assert_eq!(
            eval_basis(p, NormalizationMode::LpNormalized { p: 3.0 }, 2, 0.1, None),
            Err(Error::MissingNormBackend)
        );
    }

    #[test]
    fn derivative_examples() {
        let p = JacobiParams::legendre();
        assert!((eval_derivative(p, 1, 0.4).unwrap() - 1.0).abs() < 1e-15);
        assert!((eval_derivative(p, 2, 0.5).unwrap() - 1.5).abs() < 1e-14);
        let h = 1e-5;
        let fd = (eval_p(p, 3, 0.2 + h).unwrap() - eval_p(p, 3, 0.2 - h).unwrap()) / (2.0 * h);
        assert!((eval_derivative(p, 3, 0.2).unwrap() - fd).abs() < 1e-6);
        assert!(eval_derivative(p, 0, 0.2).is_err());
    }

    #[test]
    fn darboux_amplitude_at_half_pi() {
        for (a, b) in [(0.0, 0.0), (0.5, -0.3), (1.0, 2.0)] {
            let p = params(a, b);
            let t = darboux_terms(p, 10, PI / 2.0).unwrap();
            let expected = PI.powf(-0.5) * 2f64.powf((a + b + 1.0) / 2.0);
            assert!((t.k_theta - expected).abs() < 1e-13 * expected);
            assert!(t.main_term.abs() <= t.k_theta);
        }
    }

    #[test]
    fn darboux_legendre_error_is_small_at_half_pi() {
        let p = JacobiParams::legendre();
        let n = 50;
        let theta = PI / 2.0;
        let t = darboux_terms(p, n, theta).unwrap();
        let exact = (n as f64).sqrt() * eval_p(p, n, theta.cos()).unwrap();
        assert!((exact - t.main_term).abs() <= 10.0 * t.error_bound_scale);
    }

    #[test]
    fn darboux_domain_and_window_flag() {
        let p = JacobiParams::legendre();
        assert!(darboux_terms(p, 5, 0.0).is_err());
        assert!(darboux_terms(p, 5, PI).is_err());
        assert!(!darboux_terms(p, 5, 0.1).unwrap().in_uniform_window);
        assert!(darboux_terms(p, 5, 1.0).unwrap().in_uniform_window);
    }

    #[test]
    fn near_one_window_arithmetic() {
        let (lo, hi) = near_one_window(10, 1.0).unwrap();
        assert!((lo - 0.99).abs() < 1e-15);
        assert_eq!(hi, 1.0);
        assert!(near_one_window(10, 0.0).is_err());
    }

    #[test]
    fn largest_root_of_legendre_p2() {
        let z = largest_root(JacobiParams::legendre(), 2).unwrap();
        assert!((z - 3f64.sqrt().recip()).abs() < 1e-12);
    }
}
