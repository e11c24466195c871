//! Integration against `dμ = (1-x)^α (1+x)^β dx` and `L_p(μ)` norms.
//!
//! Two paths are provided. [`gauss_jacobi_rule`] builds the classical Gauss rule
//! from the eigen-decomposition of the Jacobi matrix; it is exact for polynomials
//! and is used for `p = 2` norms of polynomials. Every other norm goes through a
//! composite mesh in `θ = arccos x`: uniform Gauss–Legendre panels in the bulk,
//! geometrically graded panels toward `θ = 0` and `θ = π`, and a Gauss–Jacobi
//! panel at each end that absorbs the `θ^{2α+1}` and `(π-θ)^{2β+1}` behaviour of
//! the transformed weight. The mesh is doubled until two successive estimates
//! agree to the requested tolerance.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{orthonormal_const, JacobiParams, LpNormOracle, NormalizationMode, Recurrence};

/// A real function on `(-1, 1)` that can be integrated against `μ`.
pub trait Evaluable: Sync {
    fn eval(&self, x: f64) -> f64;

    /// Highest oscillation frequency in `θ`; sets the panel count of the mesh.
    fn bandwidth(&self) -> usize {
        0
    }

    /// `Some(d)` when the function is a polynomial of degree at most `d`.
    fn polynomial_degree(&self) -> Option<usize> {
        None
    }
}

impl<F> Evaluable for F
where
    F: Fn(f64) -> f64 + Sync,
{
    fn eval(&self, x: f64) -> f64 {
        self(x)
    }
}

/// A finite list of functions evaluated together at each node.
pub trait Family: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn bandwidth(&self) -> usize;

    /// Writes the value of every member at `x` into `out[..self.len()]`.
    fn eval_into(&self, x: f64, out: &mut [f64]);
}

impl<E: Evaluable> Family for [E] {
    fn len(&self) -> usize {
        <[E]>::len(self)
    }

    fn bandwidth(&self) -> usize {
        self.iter().map(Evaluable::bandwidth).max().unwrap_or(0)
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        for (slot, f) in out.iter_mut().zip(self) {
            *slot = f.eval(x);
        }
    }
}

impl<E: Evaluable> Family for Vec<E> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn bandwidth(&self) -> usize {
        Family::bandwidth(self.as_slice())
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        self.as_slice().eval_into(x, out)
    }
}

/// Scaled Jacobi polynomials `s_j P_{n_j}` evaluated with one recurrence pass.
#[derive(Debug, Clone)]
pub struct BasisFamily {
    recurrence: Recurrence,
    indices: Vec<usize>,
    scales: Vec<f64>,
    slot_of: Vec<u32>,
}

impl BasisFamily {
    /// Members `scales[i] * P_{indices[i]}`. Indices must be distinct.
    pub fn from_scales(params: JacobiParams, indices: Vec<usize>, scales: Vec<f64>) -> Result<Self> {
        if indices.len() != scales.len() {
            return Err(Error::Config("indices and scales differ in length".into()));
        }
        let max_degree = indices.iter().copied().max().unwrap_or(0);
        let mut slot_of = vec![u32::MAX; max_degree + 1];
        for (slot, &n) in indices.iter().enumerate() {
            if slot_of[n] != u32::MAX {
                return Err(Error::Config(format!("index {n} repeated in family")));
            }
            slot_of[n] = slot as u32;
        }
        Ok(Self { recurrence: Recurrence::new(params, max_degree), indices, scales, slot_of })
    }

    /// Basis elements of `mode` for the given indices.
    pub fn new(
        params: JacobiParams,
        mode: NormalizationMode,
        indices: Vec<usize>,
        norms: Option<&dyn LpNormOracle>,
    ) -> Result<Self> {
        let scales =
            indices.iter().map(|&n| crate::jacobi::basis_scale(params, mode, n, norms)).collect::<Result<Vec<_>>>()?;
        Self::from_scales(params, indices, scales)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn params(&self) -> JacobiParams {
        self.recurrence.params()
    }
}

impl Family for BasisFamily {
    fn len(&self) -> usize {
        self.indices.len()
    }

    fn bandwidth(&self) -> usize {
        self.recurrence.max_degree()
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        let slot_of = &self.slot_of;
        let scales = &self.scales;
        self.recurrence.for_each(x, |n, v| {
            let slot = slot_of[n];
            if slot != u32::MAX {
                out[slot as usize] = scales[slot as usize] * v;
            }
        });
    }
}

/// A single scaled polynomial `scale * P_n`.
#[derive(Debug, Clone)]
pub struct ScaledPolynomial {
    recurrence: Recurrence,
    scale: f64,
}

impl ScaledPolynomial {
    pub fn new(params: JacobiParams, n: usize, scale: f64) -> Self {
        Self { recurrence: Recurrence::new(params, n), scale }
    }

    /// The orthonormal polynomial `p_n`.
    pub fn orthonormal(params: JacobiParams, n: usize) -> Self {
        Self::new(params, n, orthonormal_const(params, n))
    }
}

impl Evaluable for ScaledPolynomial {
    fn eval(&self, x: f64) -> f64 {
        self.scale * self.recurrence.last(x)
    }

    fn bandwidth(&self) -> usize {
        self.recurrence.max_degree()
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(self.recurrence.max_degree())
    }
}

/// A finite sum `Σ w_n P_n` evaluated in one recurrence pass.
#[derive(Debug, Clone)]
pub struct JacobiSeries {
    recurrence: Recurrence,
    weights: Vec<f64>,
}

impl JacobiSeries {
    /// `terms` are `(degree, weight)` pairs; repeated degrees accumulate.
    pub fn new(params: JacobiParams, terms: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let terms: Vec<(usize, f64)> = terms.into_iter().collect();
        let max_degree = terms.iter().map(|t| t.0).max().unwrap_or(0);
        let mut weights = vec![0.0; max_degree + 1];
        for (n, w) in terms {
            weights[n] += w;
        }
        Self { recurrence: Recurrence::new(params, max_degree), weights }
    }
}

impl Evaluable for JacobiSeries {
    fn eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        let weights = &self.weights;
        self.recurrence.for_each(x, |n, v| acc += weights[n] * v);
        acc
    }

    fn bandwidth(&self) -> usize {
        self.recurrence.max_degree()
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(self.recurrence.max_degree())
    }
}

/// Nodes and positive weights integrating against `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub params: JacobiParams,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Diagonal and off-diagonal of the symmetric Jacobi matrix for the monic
/// Jacobi polynomials.
fn jacobi_matrix(params: JacobiParams, m: usize) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (params.alpha(), params.beta());
    let ab = a + b;
    let diag = (0..m)
        .map(|k| {
            if k == 0 {
                (b - a) / (ab + 2.0)
            } else {
                let s = 2.0 * k as f64 + ab;
                (b * b - a * a) / (s * (s + 2.0))
            }
        })
        .collect();
    let off = (1..m)
        .map(|k| {
            let kf = k as f64;
            let s = 2.0 * kf + ab;
            let sq = if k == 1 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            sq.sqrt()
        })
        .collect();
    (diag, off)
}

/// Implicit QL on a symmetric tridiagonal matrix, tracking only the first
/// component of each eigenvector. Returns `(eigenvalues, first_components)`.
fn tridiagonal_eigen(mut d: Vec<f64>, off: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::EigenSolver { size: n });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok((d, z))
}

/// The `m`-point Gauss rule for the weight `(1-x)^α (1+x)^β` on `(-1, 1)`.
pub fn gauss_jacobi_rule(params: JacobiParams, m: usize) -> Result<QuadratureRule> {
    if m == 0 {
        return Err(Error::Domain { value: 0.0, domain: "m >= 1" });
    }
    let (diag, off) = jacobi_matrix(params, m);
    let (values, first) = tridiagonal_eigen(diag, &off)?;
    let mass = params.total_mass();
    let mut pairs: Vec<(f64, f64)> = values.into_iter().zip(first).map(|(x, v)| (x, mass * v * v)).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(QuadratureRule { params, nodes, weights })
}

/// Resolution of the composite `θ`-mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    /// Panels per period of the highest frequency present in the integrand.
    pub panels_per_unit: usize,
    /// Gauss points per panel.
    pub points_per_panel: usize,
    /// Ratio between consecutive graded panels next to `θ = 0` and `θ = π`.
    pub endpoint_grading: f64,
    /// Relative tolerance between successive mesh doublings.
    pub tolerance: f64,
    pub max_refinements: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { panels_per_unit: 4, points_per_panel: 8, endpoint_grading: 2.0, tolerance: 1e-8, max_refinements: 8 }
    }
}

impl MeshConfig {
    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self { tolerance, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.panels_per_unit == 0 || self.points_per_panel == 0 {
            return Err(Error::Config("mesh needs at least one panel and one point".into()));
        }
        if !(self.endpoint_grading >= 1.0) {
            return Err(Error::Config("endpoint grading ratio must be >= 1".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Number of geometric levels between the uniform panel and the end panel.
    fn grading_levels(&self) -> usize {
        if self.endpoint_grading <= 1.0 {
            0
        } else {
            ((1e4f64).ln() / self.endpoint_grading.ln()).ceil().min(40.0) as usize
        }
    }
}

/// Quadrature nodes in `x` with weights that already include `dμ`.
#[derive(Debug, Clone)]
pub struct MeshNodes {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

struct PanelRules {
    legendre: QuadratureRule,
    left_end: QuadratureRule,
    right_end: QuadratureRule,
}

impl MeshNodes {
    /// Nodes for an integrand of the given bandwidth at refinement `level`.
    pub fn build(params: JacobiParams, config: &MeshConfig, bandwidth: usize, level: usize) -> Result<Self> {
        Self::build_with_breaks(params, config, bandwidth, level, &[])
    }

    /// Like [`MeshNodes::build`], with interior panels additionally split at
    /// the sorted angles `breaks` (kinks of the integrand).
    pub fn build_with_breaks(
        params: JacobiParams,
        config: &MeshConfig,
        bandwidth: usize,
        level: usize,
        breaks: &[f64],
    ) -> Result<Self> {
        config.validate()?;
        let ppp = config.points_per_panel;
        let rules = PanelRules {
            legendre: gauss_jacobi_rule(JacobiParams::legendre(), ppp)?,
            left_end: gauss_jacobi_rule(JacobiParams::new(0.0, 2.0 * params.alpha() + 1.0)?, ppp)?,
            right_end: gauss_jacobi_rule(JacobiParams::new(2.0 * params.beta() + 1.0, 0.0)?, ppp)?,
        };
        let units = bandwidth.div_ceil(2).max(1);
        let panels = (config.panels_per_unit * units)
            .checked_mul(1usize << level)
            .ok_or_else(|| Error::Config("mesh too large".into()))?
            .max(2);
        let h = PI / panels as f64;
        let levels = config.grading_levels();
        let ratio = config.endpoint_grading;

        let (a, b) = (params.alpha(), params.beta());
        let log_scale = (a + b + 1.0) * LN_2;
        let weight = |theta: f64| {
            let half = 0.5 * theta;
            (log_scale + (2.0 * a + 1.0) * half.sin().ln() + (2.0 * b + 1.0) * half.cos().ln()).exp()
        };

        let capacity = (panels + 2 * levels + 2) * ppp;
        let mut nodes = MeshNodes { x: Vec::with_capacity(capacity), w: Vec::with_capacity(capacity) };

        // Left end: Gauss–Jacobi on [0, h r^{-L}], then graded Legendre panels.
        let inner = h * ratio.powi(-(levels as i32));
        nodes.push_left_end(&rules.left_end, inner, params);
        for k in (0..levels).rev() {
            let lo = h * ratio.powi(-(k as i32 + 1));
            let hi = h * ratio.powi(-(k as i32));
            nodes.push_split(&rules.legendre, lo, hi, breaks, &weight);
        }
        for k in 1..panels - 1 {
            nodes.push_split(&rules.legendre, k as f64 * h, (k + 1) as f64 * h, breaks, &weight);
        }
        for k in 0..levels {
            let lo = PI - h * ratio.powi(-(k as i32));
            let hi = PI - h * ratio.powi(-(k as i32 + 1));
            nodes.push_split(&rules.legendre, lo, hi, breaks, &weight);
        }
        nodes.push_right_end(&rules.right_end, inner, params);
        Ok(nodes)
    }

    fn push_split(&mut self, rule: &QuadratureRule, lo: f64, hi: f64, breaks: &[f64], weight: &impl Fn(f64) -> f64) {
        let start = breaks.partition_point(|&b| b <= lo);
        let mut left = lo;
        for &b in breaks[start..].iter().take_while(|&&b| b < hi) {
            self.push_legendre(rule, left, b, weight);
            left = b;
        }
        self.push_legendre(rule, left, hi, weight);
    }

    fn push_legendre(&mut self, rule: &QuadratureRule, lo: f64, hi: f64, weight: &impl Fn(f64) -> f64) {
        let half = 0.5 * (hi - lo);
        for (&t, &omega) in rule.nodes.iter().zip(&rule.weights) {
            let theta = lo + half * (t + 1.0);
            self.x.push(theta.cos());
            self.w.push(omega * half * weight(theta));
        }
    }

    /// `∫_0^ε W(θ) F(θ) dθ` with the factor `θ^{2α+1}` carried by the rule.
    fn push_left_end(&mut self, rule: &QuadratureRule, eps: f64, params: JacobiParams) {
        let (a, b) = (params.alpha(), params.beta());
        let s = 2.0 * a + 1.0;
        let prefactor = ((a + b + 1.0) * LN_2 + (s + 1.0) * (0.5 * eps).ln()).exp();
        for (&t, &omega) in rule.nodes.iter().zip(&rule.weights) {
            let theta = 0.5 * eps * (1.0 + t);
            let half = 0.5 * theta;
            let smooth = (s * (half.sin() / theta).ln() + (2.0 * b + 1.0) * half.cos().ln()).exp();
            self.x.push(theta.cos());
            self.w.push(prefactor * omega * smooth);
        }
    }

    /// `∫_{π-ε}^π W(θ) F(θ) dθ` with the factor `(π-θ)^{2β+1}` carried by the rule.
    fn push_right_end(&mut self, rule: &QuadratureRule, eps: f64, params: JacobiParams) {
        let (a, b) = (params.alpha(), params.beta());
        let s = 2.0 * b + 1.0;
        let prefactor = ((a + b + 1.0) * LN_2 + (s + 1.0) * (0.5 * eps).ln()).exp();
        for (&t, &omega) in rule.nodes.iter().zip(&rule.weights) {
            // t = 1 maps to θ = π.
            let phi = 0.5 * eps * (1.0 - t);
            let half = 0.5 * phi;
            let smooth = (s * (half.sin() / phi).ln() + (2.0 * a + 1.0) * half.cos().ln()).exp();
            self.x.push(-phi.cos());
            self.w.push(prefactor * omega * smooth);
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }
}

const CHUNK: usize = 2048;

/// Integrates `k` integrands at once over a mesh. `integrand(x, scratch, out)`
/// writes the k values at `x` into `out`; `scratch` is per-chunk workspace.
fn integrate_on_nodes<F>(nodes: &MeshNodes, k: usize, scratch_len: usize, integrand: &F) -> Result<Vec<f64>>
where
    F: Fn(f64, &mut [f64], &mut [f64]) + Sync,
{
    let partials: Vec<Result<Vec<f64>>> = nodes
        .x
        .par_chunks(CHUNK)
        .zip(nodes.w.par_chunks(CHUNK))
        .map(|(xs, ws)| {
            let mut acc = vec![0.0; k];
            let mut out = vec![0.0; k];
            let mut scratch = vec![0.0; scratch_len];
            for (&x, &w) in xs.iter().zip(ws) {
                integrand(x, &mut scratch, &mut out);
                for (a, &v) in acc.iter_mut().zip(&out) {
                    if !v.is_finite() {
                        return Err(Error::Evaluation { x });
                    }
                    *a += w * v;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![0.0; k];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part?) {
            *t += v;
        }
    }
    Ok(total)
}

/// Converged integrals of `k` nonnegative integrands together with the
/// refinement level reached.
#[derive(Debug, Clone)]
pub struct MeshIntegral {
    pub values: Vec<f64>,
    pub previous: Vec<f64>,
    pub level: usize,
}

/// Doubles the mesh until every component changes by at most `rel_tol`
/// relative to its magnitude.
pub fn integrate_refined<F>(
    params: JacobiParams,
    mesh: &MeshConfig,
    bandwidth: usize,
    k: usize,
    scratch_len: usize,
    rel_tol: f64,
    integrand: F,
) -> Result<MeshIntegral>
where
    F: Fn(f64, &mut [f64], &mut [f64]) + Sync,
{
    integrate_refined_with_breaks(params, mesh, bandwidth, &[], k, scratch_len, rel_tol, integrand)
}

/// [`integrate_refined`] on meshes split at the sorted angles `breaks`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_refined_with_breaks<F>(
    params: JacobiParams,
    mesh: &MeshConfig,
    bandwidth: usize,
    breaks: &[f64],
    k: usize,
    scratch_len: usize,
    rel_tol: f64,
    integrand: F,
) -> Result<MeshIntegral>
where
    F: Fn(f64, &mut [f64], &mut [f64]) + Sync,
{
    let mut previous = {
        let nodes = MeshNodes::build_with_breaks(params, mesh, bandwidth, 0, breaks)?;
        integrate_on_nodes(&nodes, k, scratch_len, &integrand)?
    };
    let max_level = mesh.max_refinements.max(1);
    for level in 1..=max_level {
        let nodes = MeshNodes::build_with_breaks(params, mesh, bandwidth, level, breaks)?;
        let values = integrate_on_nodes(&nodes, k, scratch_len, &integrand)?;
        let (worst, worst_change) = values
            .iter()
            .zip(&previous)
            .map(|(&v, &u)| {
                let scale = v.abs().max(u.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (v - u).abs() / scale
                }
            })
            .enumerate()
            .fold((0, 0.0), |acc, (i, c)| if c > acc.1 { (i, c) } else { acc });
        if worst_change <= rel_tol {
            return Ok(MeshIntegral { values, previous, level });
        }
        if level == max_level {
            return Err(Error::NonConvergence { refinements: level, previous: previous[worst], last: values[worst] });
        }
        previous = values;
    }
    unreachable!("refinement loop always returns")
}

#[inline]
fn abs_pow(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else if p.fract() == 0.0 && p <= 32.0 {
        v.abs().powi(p as i32)
    } else {
        v.abs().powf(p)
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain { value: p, domain: "[1, inf)" });
    }
    Ok(())
}

fn norm_from_integral(
    params: JacobiParams,
    mesh: &MeshConfig,
    bandwidth: usize,
    breaks: &[f64],
    p: f64,
    scratch_len: usize,
    integrand: impl Fn(f64, &mut [f64]) -> f64 + Sync,
) -> Result<f64> {
    // A relative change ε in the integral moves the p-th root by about ε/p.
    let result = integrate_refined_with_breaks(
        params,
        mesh,
        bandwidth,
        breaks,
        1,
        scratch_len,
        p * mesh.tolerance,
        |x, s, out| out[0] = integrand(x, s),
    )
    .map_err(|err| match err {
        Error::NonConvergence { refinements, previous, last } => Error::NonConvergence {
            refinements,
            previous: previous.max(0.0).powf(p.recip()),
            last: last.max(0.0).powf(p.recip()),
        },
        other => other,
    })?;
    Ok(result.values[0].max(0.0).powf(p.recip()))
}

/// `(∫ |f|^p dμ)^{1/p}`.
///
/// Polynomials with `p = 2` use a Gauss–Jacobi rule that integrates `f²`
/// exactly; everything else goes through the refined composite mesh.
pub fn lp_norm<E: Evaluable + ?Sized>(f: &E, params: JacobiParams, p: f64, mesh: &MeshConfig) -> Result<f64> {
    check_exponent(p)?;
    if p == 2.0 {
        if let Some(degree) = f.polynomial_degree() {
            let rule = gauss_jacobi_rule(params, degree + 1)?;
            let mut sum = 0.0;
            for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                let v = f.eval(x);
                if !v.is_finite() {
                    return Err(Error::Evaluation { x });
                }
                sum += w * v * v;
            }
            return Ok(sum.sqrt());
        }
    }
    // |f|^p is smooth except at sign changes of f unless p is an even integer.
    let breaks = match f.polynomial_degree() {
        Some(degree) if degree > 0 && !(p.fract() == 0.0 && p % 2.0 == 0.0) => sign_changes(f, degree)?,
        _ => Vec::new(),
    };
    norm_from_integral(params, mesh, f.bandwidth(), &breaks, p, 0, |x, _| abs_pow(f.eval(x), p))
}

/// Angles `θ ∈ (0, π)` where a polynomial of the given degree changes sign
/// in `x = cos θ`, located by a scan of `8(degree + 1)` points and bisection.
fn sign_changes<E: Evaluable + ?Sized>(f: &E, degree: usize) -> Result<Vec<f64>> {
    let samples = 8 * (degree + 1);
    let thetas: Vec<f64> = (1..samples).map(|i| PI * i as f64 / samples as f64).collect();
    let values: Vec<f64> = thetas.par_iter().map(|t| f.eval(t.cos())).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Evaluation { x: thetas[i].cos() });
    }
    let brackets: Vec<(f64, f64, f64)> = (1..thetas.len())
        .filter(|&i| values[i - 1] * values[i] < 0.0)
        .map(|i| (thetas[i - 1], thetas[i], values[i - 1]))
        .collect();
    let mut roots: Vec<f64> = brackets
        .par_iter()
        .map(|&(mut lo, mut hi, f_lo)| {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f.eval(mid.cos()) * f_lo > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect();
    roots.extend(thetas.iter().zip(&values).filter(|(_, &v)| v == 0.0).map(|(&t, _)| t));
    roots.sort_by(f64::total_cmp);
    Ok(roots)
}

/// `‖(Σ_j |f_j|²)^{1/2}‖_{L_p(μ)}`.
pub fn square_function_norm<F: Family + ?Sized>(
    family: &F,
    params: JacobiParams,
    p: f64,
    mesh: &MeshConfig,
) -> Result<f64> {
    check_exponent(p)?;
    if family.is_empty() {
        return Err(Error::Config("square function of an empty family".into()));
    }
    let len = family.len();
    norm_from_integral(params, mesh, family.bandwidth(), &[], p, len, |x, scratch| {
        family.eval_into(x, scratch);
        let sq: f64 = scratch.iter().map(|v| v * v).sum();
        abs_pow(sq.sqrt(), p)
    })
}

/// Monte-Carlo estimate of `(E_ε ‖Σ_j ε_j f_j‖_p^p)^{1/p}` over uniform signs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RademacherEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    /// `‖Σ_j ε_j f_j‖_p` for each drawn sign pattern.
    pub sample_norms: Vec<f64>,
}

const BOOTSTRAP_RESAMPLES: usize = 256;

/// Sign pattern number `index` for a family of `len` members.
pub fn sign_pattern(seed: u64, index: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    (0..len).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

pub fn rademacher_average_norm<F: Family + ?Sized>(
    family: &F,
    params: JacobiParams,
    p: f64,
    samples: usize,
    seed: u64,
    mesh: &MeshConfig,
) -> Result<RademacherEstimate> {
    check_exponent(p)?;
    if samples == 0 {
        return Err(Error::Config("at least one sign sample is required".into()));
    }
    if family.is_empty() {
        return Err(Error::Config("random signs over an empty family".into()));
    }
    let len = family.len();
    let signs: Vec<f64> = (0..samples as u64).flat_map(|s| sign_pattern(seed, s, len)).collect();
    let integral =
        integrate_refined(params, mesh, family.bandwidth(), samples, len, p * mesh.tolerance, |x, scratch, out| {
            family.eval_into(x, scratch);
            for (slot, row) in out.iter_mut().zip(signs.chunks_exact(len)) {
                let v: f64 = row.iter().zip(scratch.iter()).map(|(s, f)| s * f).sum();
                *slot = abs_pow(v, p);
            }
        })?;
    let powers = integral.values;
    let estimate = |vals: &mut dyn Iterator<Item = f64>| -> f64 {
        let (sum, count) = vals.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        (sum / count as f64).max(0.0).powf(p.recip())
    };
    let mean = estimate(&mut powers.iter().copied());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let mut draw = (0..samples).map(|_| powers[rng.random_range(0..samples)]);
            estimate(&mut draw)
        })
        .collect();
    let boot_mean = boot.iter().sum::<f64>() / boot.len() as f64;
    let var = boot.iter().map(|b| (b - boot_mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64;

    Ok(RademacherEstimate {
        mean,
        stderr: var.sqrt(),
        samples,
        sample_norms: powers.iter().map(|v| v.max(0.0).powf(p.recip())).collect(),
    })
}

/// Memoized `‖p_n‖_{L_p(μ)}` for building L_p-normalized bases.
#[derive(Debug, Default)]
pub struct NormCache {
    mesh: MeshConfig,
    cache: Mutex<HashMap<(u64, u64, usize, u64), f64>>,
}

impl NormCache {
    pub fn new(mesh: MeshConfig) -> Self {
        Self { mesh, cache: Mutex::new(HashMap::new()) }
    }
}

impl LpNormOracle for NormCache {
    fn orthonormal_lp_norm(&self, params: JacobiParams, n: usize, p: f64) -> Result<f64> {
        let key = (params.alpha().to_bits(), params.beta().to_bits(), n, p.to_bits());
        if let Some(&v) = self.cache.lock().expect("norm cache poisoned").get(&key) {
            return Ok(v);
        }
        let v = lp_norm(&ScaledPolynomial::orthonormal(params, n), params, p, &self.mesh)?;
        self.cache.lock().expect("norm cache poisoned").insert(key, v);
        Ok(v)
    }
}
