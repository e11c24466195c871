//! Scripted growth-rate experiments.
//!
//! Each experiment evaluates norms over a geometric grid of sizes and reduces
//! them to a least-squares fit in log-log (or semi-log) coordinates. Grid
//! points are computed in parallel and always reported in grid order.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greedy::{block_indices, sign_ratio, Expansion};
use crate::jacobi::{
    darboux_terms, largest_root, near_one_ratio_range, orthonormal_const, JacobiParams, NormalizationMode, Recurrence,
};
use crate::quadrature::{
    lp_norm, rademacher_average_norm, sign_pattern, square_function_norm, BasisFamily, MeshConfig, NormCache,
    ScaledPolynomial,
};

/// Least-squares fit over a grid of positive samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub kind: FitKind,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Log-log: max `|ln y - fit|`. Semi-log: max `|y - fit| / y`.
    pub max_residual: f64,
    /// Set when the smallest grid point was discarded before fitting.
    pub dropped_first: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    /// `ln y = intercept + slope · ln x`.
    LogLog,
    /// `y = intercept + slope · ln x`.
    SemiLog,
}

fn least_squares(us: &[f64], vs: &[f64]) -> Result<(f64, f64)> {
    let n = us.len() as f64;
    let mu = us.iter().sum::<f64>() / n;
    let mv = vs.iter().sum::<f64>() / n;
    let sxx: f64 = us.iter().map(|u| (u - mu).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("slope fit needs at least two distinct sizes".into()));
    }
    let sxy: f64 = us.iter().zip(vs).map(|(u, v)| (u - mu) * (v - mv)).sum();
    let slope = sxy / sxx;
    Ok((slope, mv - slope * mu))
}

impl SlopeFit {
    fn check(xs: &[f64], ys: &[f64], kind: FitKind) -> Result<()> {
        if xs.len() != ys.len() {
            return Err(Error::Config("xs and ys differ in length".into()));
        }
        if xs.len() < 2 {
            return Err(Error::Config("slope fit needs at least two points".into()));
        }
        let bad = xs.iter().any(|&x| !(x > 0.0))
            || (kind == FitKind::LogLog && ys.iter().any(|&y| !(y > 0.0)))
            || ys.iter().any(|y| !y.is_finite());
        if bad {
            return Err(Error::Config("slope fit needs positive, finite samples".into()));
        }
        Ok(())
    }

    pub fn log_log(xs: &[f64], ys: &[f64]) -> Result<Self> {
        Self::check(xs, ys, FitKind::LogLog)?;
        let us: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let vs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
        let (slope, intercept) = least_squares(&us, &vs)?;
        let max_residual = us.iter().zip(&vs).map(|(u, v)| (v - intercept - slope * u).abs()).fold(0.0, f64::max);
        Ok(Self {
            kind: FitKind::LogLog,
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slope,
            intercept,
            max_residual,
            dropped_first: false,
        })
    }

    pub fn semi_log(xs: &[f64], ys: &[f64]) -> Result<Self> {
        Self::check(xs, ys, FitKind::SemiLog)?;
        let us: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let (slope, intercept) = least_squares(&us, ys)?;
        let max_residual = us.iter().zip(ys).map(|(u, y)| ((y - intercept - slope * u) / y).abs()).fold(0.0, f64::max);
        Ok(Self {
            kind: FitKind::SemiLog,
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slope,
            intercept,
            max_residual,
            dropped_first: false,
        })
    }

    /// Fits, and refits once without the smallest size when the residual
    /// exceeds twice `tolerance` and at least three points remain.
    pub fn with_trim(kind: FitKind, xs: &[f64], ys: &[f64], tolerance: f64) -> Result<Self> {
        let fit = |xs: &[f64], ys: &[f64]| match kind {
            FitKind::LogLog => Self::log_log(xs, ys),
            FitKind::SemiLog => Self::semi_log(xs, ys),
        };
        let full = fit(xs, ys)?;
        if full.max_residual > 2.0 * tolerance && xs.len() >= 4 {
            let mut trimmed = fit(&xs[1..], &ys[1..])?;
            trimmed.dropped_first = true;
            return Ok(trimmed);
        }
        Ok(full)
    }

    /// Value of the fitted curve at `x`.
    pub fn predict(&self, x: f64) -> f64 {
        match self.kind {
            FitKind::LogLog => (self.intercept + self.slope * x.ln()).exp(),
            FitKind::SemiLog => self.intercept + self.slope * x.ln(),
        }
    }
}

/// `{min, 2 min, 4 min, ...}` up to and including `max`.
pub fn geometric_grid(min: usize, max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = min.max(1);
    while n <= max {
        out.push(n);
        n = match n.checked_mul(2) {
            Some(v) => v,
            None => break,
        };
    }
    out
}

/// Shared settings of the grid experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: JacobiParams,
    pub p: f64,
    pub mode: NormalizationMode,
    /// Degrees `n` or block sizes `N`, depending on the experiment.
    pub sizes: Vec<usize>,
    pub mesh: MeshConfig,
    pub seed: u64,
    pub samples: usize,
    /// Residual level that triggers dropping the smallest size.
    pub fit_tolerance: f64,
}

pub const DEFAULT_SAMPLES: usize = 64;
pub const DEFAULT_FIT_TOLERANCE: f64 = 0.02;
/// Mesh tolerance used by experiments; slope fits need far less.
pub const EXPERIMENT_MESH_TOLERANCE: f64 = 1e-6;

impl ExperimentConfig {
    pub fn new(params: JacobiParams, p: f64, sizes: Vec<usize>) -> Self {
        Self {
            params,
            p,
            mode: NormalizationMode::Orthonormal,
            sizes,
            mesh: MeshConfig::default().with_tolerance(EXPERIMENT_MESH_TOLERANCE),
            seed: 0,
            samples: DEFAULT_SAMPLES,
            fit_tolerance: DEFAULT_FIT_TOLERANCE,
        }
    }

    pub fn with_mode(self, mode: NormalizationMode) -> Self {
        Self { mode, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_samples(self, samples: usize) -> Self {
        Self { samples, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Domain { value: self.p, domain: "[1, inf)" });
        }
        if self.sizes.len() < 2 {
            return Err(Error::Config("grid needs at least two sizes".into()));
        }
        if self.sizes.contains(&0) {
            return Err(Error::Config("grid sizes must be positive".into()));
        }
        self.mesh.validate()
    }
}

/// The conjugate exponents bounding the Schauder range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    pub p_crit: f64,
    pub q_crit: f64,
}

impl CriticalExponents {
    /// Whether `p` lies in the open interval `(p_crit, q_crit)`.
    pub fn contains(&self, p: f64) -> bool {
        p > self.p_crit && p < self.q_crit
    }
}

pub fn critical_exponents(params: JacobiParams) -> Result<CriticalExponents> {
    if !params.half_range_ok() {
        return Err(Error::Config(format!(
            "critical exponents need min(alpha, beta) > -1/2, got ({}, {})",
            params.alpha(),
            params.beta()
        )));
    }
    let g = params.gamma();
    let p_crit = 4.0 * (g + 1.0) / (2.0 * g + 3.0);
    let q_crit = 4.0 * (g + 1.0) / (2.0 * g + 1.0);
    debug_assert!((1.0 / p_crit + 1.0 / q_crit - 1.0).abs() < 1e-12);
    Ok(CriticalExponents { p_crit, q_crit })
}

fn require_schauder(params: JacobiParams, p: f64) -> Result<CriticalExponents> {
    let crit = critical_exponents(params)?;
    if !crit.contains(p) {
        return Err(Error::Config(format!("p = {p} outside the range ({}, {})", crit.p_crit, crit.q_crit)));
    }
    Ok(crit)
}

/// Growth exponent of the constant-coefficient block sum over `A_N`.
pub fn omega_exponent(params: JacobiParams, p: f64) -> Result<f64> {
    require_schauder(params, p)?;
    let branch = |a: f64| (2.0 * a + 3.0) / 2.0 - 2.0 * (a + 1.0) / p;
    Ok(branch(params.alpha()).max(branch(params.beta())))
}

/// Size of `‖p_n‖_p` as `n` grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormRegime {
    /// `1 <= p < q`: bounded.
    Bounded,
    /// `p = q`: grows like `(log n)^{1/p}`.
    Critical,
    /// `p > q`: grows like `n^{(2γ+1)/2 - 2(γ+1)/p}`.
    Growing,
}

pub fn classify_regime(params: JacobiParams, p: f64) -> Result<NormRegime> {
    let q = critical_exponents(params)?.q_crit;
    Ok(if (p - q).abs() <= 1e-9 * q {
        NormRegime::Critical
    } else if p < q {
        NormRegime::Bounded
    } else {
        NormRegime::Growing
    })
}

/// A CSV-ready table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRegimeResult {
    pub regime: NormRegime,
    /// Log-log slope for bounded/growing; semi-log fit of `‖p_n‖^p` at the critical exponent.
    pub fit: SlopeFit,
    /// Expected slope; `None` at the critical exponent where only its sign is predicted.
    pub expected_slope: Option<f64>,
    pub sizes: Vec<usize>,
    pub norms: Vec<f64>,
}

impl NormRegimeResult {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["n", "norm"]);
        for (&n, &v) in self.sizes.iter().zip(&self.norms) {
            t.rows.push(vec![n as f64, v]);
        }
        t
    }
}

fn mode_backend(mode: NormalizationMode, mesh: &MeshConfig) -> Option<NormCache> {
    matches!(mode, NormalizationMode::LpNormalized { .. }).then(|| NormCache::new(*mesh))
}

/// `‖x_n‖_{L_p(μ)}` over the degree grid, fitted against the predicted regime.
pub fn norm_regimes_experiment(cfg: &ExperimentConfig) -> Result<NormRegimeResult> {
    cfg.validate()?;
    let regime = classify_regime(cfg.params, cfg.p)?;
    let cache = mode_backend(cfg.mode, &cfg.mesh);
    let norms = cfg
        .sizes
        .par_iter()
        .map(|&n| {
            let scale = crate::jacobi::basis_scale(
                cfg.params,
                cfg.mode,
                n,
                cache.as_ref().map(|c| c as &dyn crate::jacobi::LpNormOracle),
            )?;
            lp_norm(&ScaledPolynomial::new(cfg.params, n, scale), cfg.params, cfg.p, &cfg.mesh)
        })
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = cfg.sizes.iter().map(|&n| n as f64).collect();
    let g = cfg.params.gamma();
    let (fit, expected_slope) = match regime {
        NormRegime::Bounded => (SlopeFit::with_trim(FitKind::LogLog, &xs, &norms, cfg.fit_tolerance)?, Some(0.0)),
        NormRegime::Growing => (
            SlopeFit::with_trim(FitKind::LogLog, &xs, &norms, cfg.fit_tolerance)?,
            Some((2.0 * g + 1.0) / 2.0 - 2.0 * (g + 1.0) / cfg.p),
        ),
        NormRegime::Critical => {
            let powered: Vec<f64> = norms.iter().map(|v| v.powf(cfg.p)).collect();
            (SlopeFit::with_trim(FitKind::SemiLog, &xs, &powered, cfg.fit_tolerance)?, None)
        }
    };
    Ok(NormRegimeResult { regime, fit, expected_slope, sizes: cfg.sizes.clone(), norms })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSumResult {
    pub fit: SlopeFit,
    pub omega: f64,
    pub sizes: Vec<usize>,
    pub norms: Vec<f64>,
}

impl BlockSumResult {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["N", "norm"]);
        for (&n, &v) in self.sizes.iter().zip(&self.norms) {
            t.rows.push(vec![n as f64, v]);
        }
        t
    }
}

/// `‖Σ_{n ∈ A_N} n^{1/2} P_n‖_p` for each `N`, fitted against `N^ω`.
pub fn block_sum_experiment(cfg: &ExperimentConfig) -> Result<BlockSumResult> {
    cfg.validate()?;
    if cfg.mode != NormalizationMode::SqrtScaled {
        return Err(Error::Config("block-sum experiment uses the sqrt-scaled basis".into()));
    }
    let omega = omega_exponent(cfg.params, cfg.p)?;
    let norms = cfg
        .sizes
        .par_iter()
        .map(|&n| Expansion::indicator(cfg.params, cfg.mode, &block_indices(n)).lp_norm(cfg.p, &cfg.mesh))
        .collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = cfg.sizes.iter().map(|&n| n as f64).collect();
    Ok(BlockSumResult {
        fit: SlopeFit::with_trim(FitKind::LogLog, &xs, &norms, cfg.fit_tolerance)?,
        omega,
        sizes: cfg.sizes.clone(),
        norms,
    })
}

/// Square-function and random-sign norms of one basis family over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageSeries {
    pub mode: NormalizationMode,
    pub square_norms: Vec<f64>,
    pub rademacher_means: Vec<f64>,
    pub rademacher_stderrs: Vec<f64>,
    pub samples_used: Vec<usize>,
    pub square_fit: SlopeFit,
    pub rademacher_fit: SlopeFit,
    /// Min and max over the grid of `rademacher / square`.
    pub ratio_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageBlockResult {
    pub sizes: Vec<usize>,
    pub orthonormal: AverageSeries,
    pub sqrt_scaled: AverageSeries,
}

impl AverageBlockResult {
    /// The series for `cfg.mode`'s family.
    pub fn primary(&self, mode: NormalizationMode) -> &AverageSeries {
        match mode {
            NormalizationMode::SqrtScaled => &self.sqrt_scaled,
            _ => &self.orthonormal,
        }
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "N",
            "orthonormal_square",
            "orthonormal_rademacher",
            "orthonormal_stderr",
            "sqrt_scaled_square",
            "sqrt_scaled_rademacher",
            "sqrt_scaled_stderr",
            "samples",
        ]);
        let (o, s) = (&self.orthonormal, &self.sqrt_scaled);
        for (i, &n) in self.sizes.iter().enumerate() {
            t.rows.push(vec![
                n as f64,
                o.square_norms[i],
                o.rademacher_means[i],
                o.rademacher_stderrs[i],
                s.square_norms[i],
                s.rademacher_means[i],
                s.rademacher_stderrs[i],
                o.samples_used[i].max(s.samples_used[i]) as f64,
            ]);
        }
        t
    }
}

/// Relative stderr above which the sign-sample count is doubled.
pub const MAX_RELATIVE_STDERR: f64 = 0.02;
const MAX_SAMPLE_DOUBLINGS: usize = 3;

fn average_point(cfg: &ExperimentConfig, mode: NormalizationMode, n: usize) -> Result<(f64, f64, f64, usize)> {
    let family = BasisFamily::new(cfg.params, mode, block_indices(n), None)?;
    let square = square_function_norm(&family, cfg.params, cfg.p, &cfg.mesh)?;
    let mut samples = cfg.samples;
    let mut est = rademacher_average_norm(&family, cfg.params, cfg.p, samples, cfg.seed, &cfg.mesh)?;
    for _ in 0..MAX_SAMPLE_DOUBLINGS {
        if est.stderr <= MAX_RELATIVE_STDERR * est.mean {
            break;
        }
        samples *= 2;
        est = rademacher_average_norm(&family, cfg.params, cfg.p, samples, cfg.seed, &cfg.mesh)?;
    }
    Ok((square, est.mean, est.stderr, samples))
}

fn average_series(cfg: &ExperimentConfig, mode: NormalizationMode) -> Result<AverageSeries> {
    let points = cfg.sizes.par_iter().map(|&n| average_point(cfg, mode, n)).collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = cfg.sizes.iter().map(|&n| n as f64).collect();
    let square_norms: Vec<f64> = points.iter().map(|p| p.0).collect();
    let rademacher_means: Vec<f64> = points.iter().map(|p| p.1).collect();
    let ratios = square_norms.iter().zip(&rademacher_means).map(|(s, r)| r / s);
    let ratio_range = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
    Ok(AverageSeries {
        mode,
        square_fit: SlopeFit::with_trim(FitKind::LogLog, &xs, &square_norms, cfg.fit_tolerance)?,
        rademacher_fit: SlopeFit::with_trim(FitKind::LogLog, &xs, &rademacher_means, cfg.fit_tolerance)?,
        rademacher_stderrs: points.iter().map(|p| p.2).collect(),
        samples_used: points.iter().map(|p| p.3).collect(),
        square_norms,
        rademacher_means,
        ratio_range,
    })
}

/// Square-function and random-sign norms over `A_N` for both the orthonormal
/// and the sqrt-scaled basis; both are expected to grow like `N^{1/2}`.
pub fn average_block_experiment(cfg: &ExperimentConfig) -> Result<AverageBlockResult> {
    cfg.validate()?;
    let crit = critical_exponents(cfg.params)?;
    if cfg.p >= crit.q_crit {
        return Err(Error::Config(format!("average-block needs p < {}, got {}", crit.q_crit, cfg.p)));
    }
    if cfg.samples == 0 {
        return Err(Error::Config("at least one sign sample is required".into()));
    }
    Ok(AverageBlockResult {
        sizes: cfg.sizes.clone(),
        orthonormal: average_series(cfg, NormalizationMode::Orthonormal)?,
        sqrt_scaled: average_series(cfg, NormalizationMode::SqrtScaled)?,
    })
}

/// `Σ_{n ∈ A_N} cos(nθ + φ(θ))` summed term by term.
pub fn block_cosine_sum(params: JacobiParams, n: usize, theta: f64) -> f64 {
    let phi = crate::jacobi::darboux_phase(params, theta);
    block_indices(n).into_iter().map(|k| (k as f64 * theta + phi).cos()).sum()
}

/// Closed form `sin(Nθ) cos((2N-1)θ + φ(θ)) / sin θ` of [`block_cosine_sum`].
pub fn block_cosine_closed_form(params: JacobiParams, n: usize, theta: f64) -> f64 {
    let phi = crate::jacobi::darboux_phase(params, theta);
    let nf = n as f64;
    (nf * theta).sin() * ((2.0 * nf - 1.0) * theta + phi).cos() / theta.sin()
}

/// Max over `thetas` of the gap between the two sides of the block identity
/// (absolute values of both).
pub fn geometric_sum_identity_check(params: JacobiParams, n: usize, thetas: &[f64]) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("block size must be positive".into()));
    }
    thetas.iter().try_fold(0.0f64, |worst, &t| {
        if t.sin().abs() < 1e-12 {
            return Err(Error::Domain { value: t, domain: "sin(theta) != 0" });
        }
        let lhs = block_cosine_sum(params, n, t).abs();
        let rhs = block_cosine_closed_form(params, n, t).abs();
        Ok(worst.max((lhs - rhs).abs()))
    })
}

/// Random `(N, θ)` trials with `N <= max_n` and `θ` uniform on `[margin, π - margin]`.
pub fn geometric_sum_fuzz(params: JacobiParams, trials: usize, max_n: usize, margin: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let n = rng.random_range(1..=max_n.max(1));
        let theta = rng.random_range(margin..PI - margin);
        worst = worst.max(geometric_sum_identity_check(params, n, &[theta])?);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearOneEnvelope {
    pub d: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearOneReport {
    pub params: JacobiParams,
    pub degrees: Vec<usize>,
    pub envelopes: Vec<NearOneEnvelope>,
    /// Largest `d` of the sweep whose envelope is bounded.
    pub selected_d: Option<f64>,
    pub largest_roots: Vec<f64>,
    /// Log-log fit of `1 - z_n` against `n`.
    pub root_fit: SlopeFit,
}

/// Spread `max/min` allowed for an envelope to count as bounded.
pub const NEAR_ONE_MAX_SPREAD: f64 = 5.0;
pub const NEAR_ONE_WINDOW_POINTS: usize = 33;

impl NearOneReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["d", "min_ratio", "max_ratio", "bounded"]);
        for e in &self.envelopes {
            t.rows.push(vec![e.d, e.min_ratio, e.max_ratio, f64::from(u8::from(e.bounded))]);
        }
        t
    }
}

/// Envelope of `P_n(x)/n^α` on `[1 - d/n², 1]` for each `d`, and the scaling
/// of the largest zero.
pub fn near_one_experiment(params: JacobiParams, degrees: &[usize], d_sweep: &[f64]) -> Result<NearOneReport> {
    if degrees.len() < 2 || d_sweep.is_empty() {
        return Err(Error::Config("near-one needs two degrees and one d".into()));
    }
    let envelopes = d_sweep
        .iter()
        .map(|&d| {
            let (lo, hi) = degrees.iter().try_fold((f64::INFINITY, f64::NEG_INFINITY), |acc, &n| {
                let (a, b) = near_one_ratio_range(params, n, d, NEAR_ONE_WINDOW_POINTS)?;
                Ok::<_, Error>((acc.0.min(a), acc.1.max(b)))
            })?;
            Ok(NearOneEnvelope { d, min_ratio: lo, max_ratio: hi, bounded: lo > 0.0 && hi / lo <= NEAR_ONE_MAX_SPREAD })
        })
        .collect::<Result<Vec<_>>>()?;
    let selected_d = envelopes
        .iter()
        .filter(|e| e.bounded)
        .map(|e| e.d)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    let largest_roots = degrees.iter().map(|&n| largest_root(params, n)).collect::<Result<Vec<f64>>>()?;
    let xs: Vec<f64> = degrees.iter().map(|&n| n as f64).collect();
    let gaps: Vec<f64> = largest_roots.iter().map(|z| 1.0 - z).collect();
    Ok(NearOneReport {
        params,
        degrees: degrees.to_vec(),
        envelopes,
        selected_d,
        largest_roots,
        root_fit: SlopeFit::log_log(&xs, &gaps)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarbouxReport {
    pub degrees: Vec<usize>,
    /// `max_θ |n^{1/2} P_n(cos θ) - k(θ) cos(nθ + φ(θ))| · n sin θ / k(θ)`.
    pub scaled_errors: Vec<f64>,
}

impl DarbouxReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["n", "scaled_error"]);
        for (&n, &e) in self.degrees.iter().zip(&self.scaled_errors) {
            t.rows.push(vec![n as f64, e]);
        }
        t
    }

    /// Ratio of the last to the first scaled error.
    pub fn growth(&self) -> f64 {
        self.scaled_errors.last().copied().unwrap_or(f64::NAN) / self.scaled_errors[0]
    }
}

/// Darboux remainder, scaled by its predicted size, on `points` equispaced
/// angles in `[theta_min, π - theta_min]`.
pub fn darboux_check(params: JacobiParams, degrees: &[usize], theta_min: f64, points: usize) -> Result<DarbouxReport> {
    if degrees.is_empty() || points < 2 || !(theta_min > 0.0 && theta_min < PI / 2.0) {
        return Err(Error::Config("darboux check needs degrees, two points and 0 < θmin < π/2".into()));
    }
    let thetas: Vec<f64> =
        (0..points).map(|i| theta_min + (PI - 2.0 * theta_min) * i as f64 / (points - 1) as f64).collect();
    let scaled_errors = degrees
        .iter()
        .map(|&n| {
            let rec = Recurrence::new(params, n);
            thetas.iter().try_fold(0.0f64, |worst, &t| {
                let terms = darboux_terms(params, n, t)?;
                let exact = (n as f64).sqrt() * rec.last(t.cos());
                Ok(worst.max((exact - terms.main_term).abs() / terms.error_bound_scale))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DarbouxReport { degrees: degrees.to_vec(), scaled_errors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConsistentWithNonQuasiGreedy,
    ConsistentWithQuasiGreedy,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::ConsistentWithNonQuasiGreedy => "consistent with non-quasi-greedy",
            Verdict::ConsistentWithQuasiGreedy => "consistent with quasi-greedy",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessConfig {
    pub params: JacobiParams,
    pub p: f64,
    pub block_sizes: Vec<usize>,
    pub average_sizes: Vec<usize>,
    pub mesh: MeshConfig,
    pub seed: u64,
    pub samples: usize,
    pub fit_tolerance: f64,
}

impl WitnessConfig {
    pub fn new(params: JacobiParams, p: f64, seed: u64) -> Self {
        Self {
            params,
            p,
            block_sizes: geometric_grid(8, 512),
            average_sizes: geometric_grid(8, 256),
            mesh: MeshConfig::default().with_tolerance(EXPERIMENT_MESH_TOLERANCE),
            seed,
            samples: DEFAULT_SAMPLES,
            fit_tolerance: DEFAULT_FIT_TOLERANCE,
        }
    }

    fn experiment(&self, sizes: &[usize], mode: NormalizationMode) -> ExperimentConfig {
        ExperimentConfig {
            params: self.params,
            p: self.p,
            mode,
            sizes: sizes.to_vec(),
            mesh: self.mesh,
            seed: self.seed,
            samples: self.samples,
            fit_tolerance: self.fit_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub omega: f64,
    pub block: BlockSumResult,
    pub average: AverageBlockResult,
    /// Block-sum slope minus the random-sign slope of the sqrt-scaled family.
    pub gap: f64,
    /// Larger of the two fits' max residuals.
    pub residual: f64,
    /// `‖Σ ε_n x_n‖ / ‖Σ x_n‖` over `A_N` for the first sign pattern.
    pub sign_ratios: Vec<f64>,
    pub verdict: Verdict,
}

impl WitnessReport {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["N", "block_norm", "rademacher_mean", "rademacher_stderr", "sign_ratio"]);
        let avg = &self.average.sqrt_scaled;
        for (i, &n) in self.block.sizes.iter().enumerate() {
            let j = self.average.sizes.iter().position(|&m| m == n);
            t.rows.push(vec![
                n as f64,
                self.block.norms[i],
                j.map_or(f64::NAN, |j| avg.rademacher_means[j]),
                j.map_or(f64::NAN, |j| avg.rademacher_stderrs[j]),
                self.sign_ratios[i],
            ]);
        }
        t
    }
}

/// The gap can have either sign: below `p = 2` the block sums grow slower
/// than the random-sign averages.
pub fn verdict_for(gap: f64, residual: f64) -> Verdict {
    if gap.abs() > 3.0 * residual {
        Verdict::ConsistentWithNonQuasiGreedy
    } else if gap.abs() < residual.max(1e-12) {
        Verdict::ConsistentWithQuasiGreedy
    } else {
        Verdict::Inconclusive
    }
}

/// Compares the block-sum growth `N^ω` with the `N^{1/2}` growth of random
/// sign combinations on the same blocks.
pub fn main_theorem_witness(cfg: &WitnessConfig) -> Result<WitnessReport> {
    let omega = omega_exponent(cfg.params, cfg.p)?;
    let block = block_sum_experiment(&cfg.experiment(&cfg.block_sizes, NormalizationMode::SqrtScaled))?;
    let average = average_block_experiment(&cfg.experiment(&cfg.average_sizes, NormalizationMode::SqrtScaled))?;
    let sign_ratios = cfg
        .block_sizes
        .par_iter()
        .map(|&n| {
            let signs = sign_pattern(cfg.seed, 0, n);
            sign_ratio(cfg.params, NormalizationMode::SqrtScaled, &block_indices(n), &signs, cfg.p, &cfg.mesh)
        })
        .collect::<Result<Vec<f64>>>()?;
    let avg_fit = &average.sqrt_scaled.rademacher_fit;
    let gap = block.fit.slope - avg_fit.slope;
    let residual = block.fit.max_residual.max(avg_fit.max_residual);
    Ok(WitnessReport { omega, gap, residual, verdict: verdict_for(gap, residual), block, average, sign_ratios })
}

/// `d_n / n^{1/2}` for the given degrees; tends to a constant.
pub fn normalization_ratios(params: JacobiParams, degrees: &[usize]) -> Vec<f64> {
    degrees.iter().map(|&n| orthonormal_const(params, n) / (n as f64).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64) -> JacobiParams {
        JacobiParams::new(a, b).unwrap()
    }

    #[test]
    fn critical_exponent_examples() {
        let c = critical_exponents(params(0.0, 0.0)).unwrap();
        assert!((c.p_crit - 4.0 / 3.0).abs() < 1e-15 && (c.q_crit - 4.0).abs() < 1e-15);
        let c = critical_exponents(params(0.5, 0.0)).unwrap();
        assert!((c.p_crit - 1.5).abs() < 1e-15 && (c.q_crit - 3.0).abs() < 1e-15);
        for (a, b) in [(0.0, 0.0), (0.5, 0.0), (1.0, 0.3), (-0.4, 1.5), (3.0, 2.0)] {
            let c = critical_exponents(params(a, b)).unwrap();
            assert!((c.p_crit * c.q_crit - c.p_crit - c.q_crit).abs() < 1e-12);
        }
        assert!(critical_exponents(params(-0.5, 0.0)).is_err());
    }

    #[test]
    fn omega_examples() {
        assert!((omega_exponent(params(0.0, 0.0), 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((omega_exponent(params(0.0, 0.0), 3.0).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert!((omega_exponent(params(1.0, 0.0), 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(omega_exponent(params(0.0, 0.0), 5.0).is_err());
    }

    #[test]
    fn omega_is_half_only_at_two() {
        let pr = params(0.3, 0.1);
        let c = critical_exponents(pr).unwrap();
        for i in 1..40 {
            let p = c.p_crit + (c.q_crit - c.p_crit) * i as f64 / 40.0;
            let w = omega_exponent(pr, p).unwrap();
            assert_eq!((w - 0.5).abs() < 1e-12, (p - 2.0).abs() < 1e-12, "{p} {w}");
        }
    }

    #[test]
    fn regimes() {
        let p = params(0.0, 0.0);
        assert_eq!(classify_regime(p, 3.0).unwrap(), NormRegime::Bounded);
        assert_eq!(classify_regime(p, 4.0).unwrap(), NormRegime::Critical);
        assert_eq!(classify_regime(p, 6.0).unwrap(), NormRegime::Growing);
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let xs: Vec<f64> = geometric_grid(4, 256).iter().map(|&n| n as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.75)).collect();
        let fit = SlopeFit::log_log(&xs, &ys).unwrap();
        assert!((fit.slope - 0.75).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit.max_residual < 1e-12);
        assert!((fit.predict(10.0) - 3.0 * 10f64.powf(0.75)).abs() < 1e-10);
    }

    #[test]
    fn slope_fit_trims_pre_asymptotic_point() {
        let xs: Vec<f64> = geometric_grid(8, 512).iter().map(|&n| n as f64).collect();
        let mut ys: Vec<f64> = xs.iter().map(|x| x.sqrt()).collect();
        ys[0] *= 2.0;
        let fit = SlopeFit::with_trim(FitKind::LogLog, &xs, &ys, 0.02).unwrap();
        assert!(fit.dropped_first);
        assert_eq!(fit.xs.len(), xs.len() - 1);
        assert!((fit.slope - 0.5).abs() < 1e-12);
        let clean: Vec<f64> = xs.iter().map(|x| x.sqrt()).collect();
        assert!(!SlopeFit::with_trim(FitKind::LogLog, &xs, &clean, 0.02).unwrap().dropped_first);
    }

    #[test]
    fn semi_log_fit() {
        let xs = [10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 2.0 + 0.5 * x.ln()).collect();
        let fit = SlopeFit::semi_log(&xs, &ys).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12 && (fit.intercept - 2.0).abs() < 1e-12);
    }

    #[test]
    fn slope_fit_rejects_bad_input() {
        assert!(SlopeFit::log_log(&[1.0], &[1.0]).is_err());
        assert!(SlopeFit::log_log(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(SlopeFit::log_log(&[2.0, 2.0], &[1.0, 3.0]).is_err());
        assert!(SlopeFit::log_log(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn geometric_grid_shape() {
        assert_eq!(geometric_grid(8, 512), vec![8, 16, 32, 64, 128, 256, 512]);
        assert_eq!(geometric_grid(64, 4096).len(), 7);
        assert!(geometric_grid(10, 5).is_empty());
    }

    #[test]
    fn identity_single_term() {
        let p = params(0.0, 0.0);
        for t in [0.3, 1.0, 2.5] {
            let phi = crate::jacobi::darboux_phase(p, t);
            assert!((block_cosine_sum(p, 1, t) - (t + phi).cos()).abs() < 1e-15);
            assert!(geometric_sum_identity_check(p, 1, &[t]).unwrap() < 1e-15);
        }
    }

    #[test]
    fn identity_n3_half_pi() {
        let p = params(0.0, 0.0);
        let t = PI / 2.0;
        let phi = crate::jacobi::darboux_phase(p, t);
        // A_3 = {3, 5, 7}.
        let direct: f64 = [3.0, 5.0, 7.0].iter().map(|k: &f64| (k * t + phi).cos()).sum();
        let closed = (3.0 * t).sin() * (5.0 * t + phi).cos() / t.sin();
        assert!((direct - closed).abs() < 1e-12);
        assert!(geometric_sum_identity_check(p, 3, &[t]).unwrap() < 1e-12);
    }

    #[test]
    fn identity_rejects_zero_sine() {
        assert!(geometric_sum_identity_check(params(0.0, 0.0), 3, &[0.0]).is_err());
    }

    #[test]
    fn verdict_thresholds() {
        assert_eq!(verdict_for(0.33, 0.05), Verdict::ConsistentWithNonQuasiGreedy);
        assert_eq!(verdict_for(0.001, 0.01), Verdict::ConsistentWithQuasiGreedy);
        assert_eq!(verdict_for(0.1, 0.05), Verdict::Inconclusive);
        assert_eq!(verdict_for(-0.2, 0.05), Verdict::ConsistentWithNonQuasiGreedy);
    }

    #[test]
    fn near_one_legendre_at_one_is_exact() {
        let r = near_one_experiment(params(0.0, 0.0), &[10, 20, 40], &[0.5]).unwrap();
        assert!((r.envelopes[0].max_ratio - 1.0).abs() < 1e-12);
        assert_eq!(r.selected_d, Some(0.5));
    }

    #[test]
    fn normalization_ratio_settles() {
        let r = normalization_ratios(params(0.7, 0.2), &[1000, 10_000]);
        assert!((r[1] / r[0] - 1.0).abs() < 0.01);
    }

    #[test]
    fn experiment_config_validation() {
        let mut cfg = ExperimentConfig::new(params(0.0, 0.0), 3.0, vec![8]);
        assert!(norm_regimes_experiment(&cfg).is_err());
        cfg.sizes = vec![8, 16];
        cfg.p = 0.5;
        assert!(norm_regimes_experiment(&cfg).is_err());
        let cfg = ExperimentConfig::new(params(0.0, 0.0), 5.0, vec![8, 16]).with_mode(NormalizationMode::SqrtScaled);
        assert!(block_sum_experiment(&cfg).is_err());
        let cfg = ExperimentConfig::new(params(0.0, 0.0), 3.0, vec![8, 16]);
        assert!(block_sum_experiment(&cfg).is_err(), "orthonormal mode is rejected");
        let cfg = ExperimentConfig::new(params(0.0, 0.0), 4.5, vec![8, 16]);
        assert!(average_block_experiment(&cfg).is_err());
    }
}
