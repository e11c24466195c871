//! The thresholding greedy algorithm on finitely supported Jacobi expansions.
//!
//! Coefficients are ordered by decreasing magnitude; exact ties are broken by
//! increasing degree. `G_m` keeps the first `m` terms of that order.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jacobi::{basis_scale, JacobiParams, LpNormOracle, NormalizationMode};
use crate::quadrature::{lp_norm, sign_pattern, JacobiSeries, MeshConfig, NormCache};

/// A finite linear combination of basis elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub params: JacobiParams,
    pub mode: NormalizationMode,
    coeffs: BTreeMap<usize, f64>,
}

impl Expansion {
    pub fn new(params: JacobiParams, mode: NormalizationMode) -> Self {
        Self { params, mode, coeffs: BTreeMap::new() }
    }

    /// Builds an expansion; zero coefficients are dropped and repeated
    /// indices accumulate.
    pub fn from_coeffs(
        params: JacobiParams,
        mode: NormalizationMode,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
    ) -> Self {
        let mut e = Self::new(params, mode);
        for (n, c) in coeffs {
            let total = e.coeff(n) + c;
            e.set(n, total);
        }
        e
    }

    /// Sum of the basis elements indexed by `indices`, each with coefficient 1.
    pub fn indicator(params: JacobiParams, mode: NormalizationMode, indices: &[usize]) -> Self {
        Self::from_coeffs(params, mode, indices.iter().map(|&n| (n, 1.0)))
    }

    pub fn set(&mut self, index: usize, coeff: f64) {
        if coeff == 0.0 {
            self.coeffs.remove(&index);
        } else {
            self.coeffs.insert(index, coeff);
        }
    }

    pub fn coeff(&self, index: usize) -> f64 {
        self.coeffs.get(&index).copied().unwrap_or(0.0)
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, f64> {
        &self.coeffs
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_coeffs(self.params, self.mode, self.coeffs.iter().map(|(&n, &c)| (n, c * factor)))
    }

    /// `(index, coefficient, scale)` triples where the basis element is `scale * P_index`.
    pub fn terms(&self, norms: Option<&dyn LpNormOracle>) -> Result<Vec<ScaledTerm>> {
        self.coeffs
            .iter()
            .map(|(&index, &coeff)| {
                Ok(ScaledTerm { index, coeff, scale: basis_scale(self.params, self.mode, index, norms)? })
            })
            .collect()
    }

    /// The expansion as a single evaluable polynomial.
    pub fn evaluator(&self, norms: Option<&dyn LpNormOracle>) -> Result<JacobiSeries> {
        Ok(series(self.params, &self.terms(norms)?))
    }

    /// Value at `x` of `Σ c_j x_j`.
    pub fn eval(&self, x: f64, norms: Option<&dyn LpNormOracle>) -> Result<f64> {
        use crate::quadrature::Evaluable;
        if x.is_nan() || x.abs() > 1.0 {
            return Err(Error::Domain { value: x, domain: "[-1, 1]" });
        }
        Ok(self.evaluator(norms)?.eval(x))
    }

    /// `‖Σ c_j x_j‖_{L_p(μ)}`.
    pub fn lp_norm(&self, p: f64, mesh: &MeshConfig) -> Result<f64> {
        let cache = norm_backend(self.mode, mesh);
        let f = self.evaluator(cache.as_ref().map(|c| c as &dyn LpNormOracle))?;
        lp_norm(&f, self.params, p, mesh)
    }
}

/// One basis element `scale * P_index` carrying coefficient `coeff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledTerm {
    pub index: usize,
    pub coeff: f64,
    pub scale: f64,
}

fn series(params: JacobiParams, terms: &[ScaledTerm]) -> JacobiSeries {
    JacobiSeries::new(params, terms.iter().map(|t| (t.index, t.coeff * t.scale)))
}

fn norm_backend(mode: NormalizationMode, mesh: &MeshConfig) -> Option<NormCache> {
    matches!(mode, NormalizationMode::LpNormalized { .. }).then(|| NormCache::new(*mesh))
}

/// Support indices in greedy order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyOrdering {
    pub order: Vec<usize>,
}

fn greedy_cmp(a: (usize, f64), b: (usize, f64)) -> std::cmp::Ordering {
    b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0))
}

pub fn greedy_ordering(e: &Expansion) -> GreedyOrdering {
    let mut entries: Vec<(usize, f64)> = e.coeffs.iter().map(|(&n, &c)| (n, c)).collect();
    entries.sort_by(|&a, &b| greedy_cmp(a, b));
    GreedyOrdering { order: entries.into_iter().map(|(n, _)| n).collect() }
}

/// `G_m(e)`: the first `m` terms of `e` in greedy order.
pub fn greedy_approx(e: &Expansion, m: usize) -> Expansion {
    let order = greedy_ordering(e).order;
    Expansion::from_coeffs(e.params, e.mode, order.into_iter().take(m).map(|n| (n, e.coeff(n))))
}

/// Norms of every greedy approximant relative to the full expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiGreedyProfile {
    pub full_norm: f64,
    /// `ratios[m-1] = ‖G_m(e)‖ / ‖e‖` for `m = 1..=|support|`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub argmax_m: usize,
}

/// Greedy profile for an arbitrary system `scale_j P_j` with coefficients `coeff_j`.
pub fn quasi_greedy_profile_terms(
    params: JacobiParams,
    terms: &[ScaledTerm],
    p: f64,
    mesh: &MeshConfig,
) -> Result<QuasiGreedyProfile> {
    if terms.is_empty() {
        return Err(Error::Config("quasi-greedy ratio of the zero expansion".into()));
    }
    let mut ordered = terms.to_vec();
    ordered.sort_by(|a, b| greedy_cmp((a.index, a.coeff), (b.index, b.coeff)));
    let full_norm = lp_norm(&series(params, &ordered), params, p, mesh)?;
    if full_norm == 0.0 {
        return Err(Error::Config("expansion has zero norm".into()));
    }
    let m_total = ordered.len();
    let ratios = if m_total == 1 {
        vec![1.0]
    } else {
        (1..=m_total)
            .into_par_iter()
            .map(|m| {
                if m == m_total {
                    Ok(1.0)
                } else {
                    Ok(lp_norm(&series(params, &ordered[..m]), params, p, mesh)? / full_norm)
                }
            })
            .collect::<Result<Vec<f64>>>()?
    };
    let (argmax, max_ratio) =
        ratios
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, r)| if r > acc.1 { (i, r) } else { acc });
    Ok(QuasiGreedyProfile { full_norm, ratios, max_ratio, argmax_m: argmax + 1 })
}

pub fn quasi_greedy_profile(e: &Expansion, p: f64, mesh: &MeshConfig) -> Result<QuasiGreedyProfile> {
    let cache = norm_backend(e.mode, mesh);
    let terms = e.terms(cache.as_ref().map(|c| c as &dyn LpNormOracle))?;
    quasi_greedy_profile_terms(e.params, &terms, p, mesh)
}

/// `max_m ‖G_m(e)‖_p / ‖e‖_p`.
pub fn quasi_greedy_ratio(e: &Expansion, p: f64, mesh: &MeshConfig) -> Result<f64> {
    Ok(quasi_greedy_profile(e, p, mesh)?.max_ratio)
}

/// `‖Σ_{j∈A} ε_j x_j‖_p / ‖Σ_{j∈A} x_j‖_p`.
pub fn sign_ratio(
    params: JacobiParams,
    mode: NormalizationMode,
    indices: &[usize],
    signs: &[f64],
    p: f64,
    mesh: &MeshConfig,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Config("sign ratio over an empty index set".into()));
    }
    if indices.len() != signs.len() {
        return Err(Error::Config("one sign per index is required".into()));
    }
    let plain = Expansion::indicator(params, mode, indices);
    if plain.len() != indices.len() {
        return Err(Error::Config("index set contains repeats".into()));
    }
    if signs.iter().all(|&s| s == 1.0) {
        return Ok(1.0);
    }
    let signed = Expansion::from_coeffs(params, mode, indices.iter().copied().zip(signs.iter().copied()));
    Ok(signed.lp_norm(p, mesh)? / plain.lp_norm(p, mesh)?)
}

/// The index block `A_N = {N + 2n : 0 <= n < N}`.
pub fn block_indices(n: usize) -> Vec<usize> {
    (0..n).map(|k| n + 2 * k).collect()
}

/// An expansion on `A_N` whose first greedy approximant isolates the positive
/// part of a random sign pattern: coefficient `1 + boost` where the sign is
/// `+1`, and `-1` elsewhere.
pub fn block_witness_expansion(
    params: JacobiParams,
    mode: NormalizationMode,
    n: usize,
    seed: u64,
    boost: f64,
) -> Expansion {
    let indices = block_indices(n);
    let signs = sign_pattern(seed, 0, n);
    Expansion::from_coeffs(
        params,
        mode,
        indices.into_iter().zip(signs).map(|(j, s)| (j, if s > 0.0 { 1.0 + boost } else { -1.0 })),
    )
}

/// Candidate index sets scanned by [`democracy_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchFamily {
    pub contiguous: bool,
    pub block: bool,
    pub lacunary: bool,
    pub random_sets: usize,
    /// Random sets are drawn from `{0, .., random_range_factor * N - 1}`.
    pub random_range_factor: usize,
    pub seed: u64,
    /// Candidates reaching beyond this degree are skipped.
    pub max_degree: usize,
}

impl Default for SearchFamily {
    fn default() -> Self {
        Self {
            contiguous: true,
            block: true,
            lacunary: true,
            random_sets: 4,
            random_range_factor: 4,
            seed: 0,
            max_degree: 4096,
        }
    }
}

/// A named candidate set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub label: String,
    pub indices: Vec<usize>,
}

impl SearchFamily {
    pub fn candidates(&self, n: usize) -> Vec<CandidateSet> {
        let mut out = Vec::new();
        if n == 0 {
            return out;
        }
        let fits = |idx: &[usize]| idx.iter().all(|&j| j <= self.max_degree);
        if self.contiguous {
            out.push(CandidateSet { label: "contiguous".into(), indices: (0..n).collect() });
        }
        if self.block {
            let idx = block_indices(n);
            if fits(&idx) {
                out.push(CandidateSet { label: "block".into(), indices: idx });
            }
        }
        if self.lacunary && n <= 63 {
            let idx: Vec<usize> = (0..n as u32).map(|k| 1usize << k).collect();
            if fits(&idx) {
                out.push(CandidateSet { label: "lacunary".into(), indices: idx });
            }
        }
        let range = (self.random_range_factor.max(1) * n).min(self.max_degree + 1);
        if range >= n {
            for r in 0..self.random_sets {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(r as u64);
                let mut idx = sample(&mut rng, range, n).into_vec();
                idx.sort_unstable();
                out.push(CandidateSet { label: format!("random-{r}"), indices: idx });
            }
        }
        out
    }
}

/// One-sided estimates of the democracy functions at size `N`:
/// `phi_u_estimate` bounds `φ_u(N)` from below and `phi_l_estimate` bounds
/// `φ_l(N)` from above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemocracyReport {
    pub n: usize,
    pub phi_u_estimate: f64,
    pub phi_l_estimate: f64,
    pub upper_witness: CandidateSet,
    pub lower_witness: CandidateSet,
    /// Every candidate with its norm, in scan order.
    pub evaluated: Vec<(CandidateSet, f64)>,
}

pub fn democracy_scan(
    params: JacobiParams,
    mode: NormalizationMode,
    n: usize,
    p: f64,
    search: &SearchFamily,
    mesh: &MeshConfig,
) -> Result<DemocracyReport> {
    let candidates = search.candidates(n);
    if candidates.is_empty() {
        return Err(Error::Config(format!("search family has no candidate of size {n}")));
    }
    let cache = norm_backend(mode, mesh);
    let norms: Option<&dyn LpNormOracle> = cache.as_ref().map(|c| c as &dyn LpNormOracle);
    let evaluated = candidates
        .into_iter()
        .map(|set| {
            let e = Expansion::indicator(params, mode, &set.indices);
            let f = e.evaluator(norms)?;
            Ok((set, lp_norm(&f, params, p, mesh)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let upper = evaluated.iter().max_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty");
    let lower = evaluated.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty");
    Ok(DemocracyReport {
        n,
        phi_u_estimate: upper.1,
        phi_l_estimate: lower.1,
        upper_witness: upper.0.clone(),
        lower_witness: lower.0.clone(),
        evaluated: evaluated.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn legendre_expansion(coeffs: &[(usize, f64)]) -> Expansion {
        Expansion::from_coeffs(JacobiParams::legendre(), NormalizationMode::Orthonormal, coeffs.iter().copied())
    }

    #[test]
    fn ordering_examples() {
        let e = legendre_expansion(&[(0, 0.5), (1, -2.0), (2, 0.5)]);
        assert_eq!(greedy_ordering(&e).order, vec![1, 0, 2]);
        assert_eq!(greedy_ordering(&legendre_expansion(&[(7, 3.0)])).order, vec![7]);
        let e = legendre_expansion(&[(3, 1.0), (0, 1.0), (2, 1.0), (1, 1.0)]);
        assert_eq!(greedy_ordering(&e).order, vec![0, 1, 2, 3]);
    }

    #[test]
    fn zero_coefficients_are_dropped() {
        let e = legendre_expansion(&[(0, 0.0), (4, 1.0), (4, -1.0), (5, 2.0)]);
        assert_eq!(e.support().collect::<Vec<_>>(), vec![5]);
    }

    #[test]
    fn greedy_approx_examples() {
        let e = legendre_expansion(&[(0, 0.5), (1, -2.0), (2, 0.5)]);
        assert!(greedy_approx(&e, 0).is_empty());
        assert_eq!(greedy_approx(&e, 3), e);
        assert_eq!(greedy_approx(&e, 10), e);
        assert_eq!(greedy_approx(&e, 1), legendre_expansion(&[(1, -2.0)]));
    }

    #[test]
    fn singleton_ratio_is_one() {
        let e = legendre_expansion(&[(9, -4.0)]);
        let r = quasi_greedy_ratio(&e, 3.0, &MeshConfig::default()).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn zero_expansion_is_rejected() {
        let e = legendre_expansion(&[]);
        assert!(quasi_greedy_ratio(&e, 3.0, &MeshConfig::default()).is_err());
    }

    #[test]
    fn orthonormal_p2_contraction() {
        let e = legendre_expansion(&[(0, 0.3), (3, -1.5), (4, 1.5), (10, 0.9), (11, -0.01)]);
        let r = quasi_greedy_ratio(&e, 2.0, &MeshConfig::default()).unwrap();
        assert!(r <= 1.0 + 1e-8, "{r}");
    }

    #[test]
    fn sign_ratio_trivial_cases() {
        let p = JacobiParams::legendre();
        let mesh = MeshConfig::default();
        let mode = NormalizationMode::SqrtScaled;
        assert_eq!(sign_ratio(p, mode, &[2, 4, 6], &[1.0, 1.0, 1.0], 3.0, &mesh).unwrap(), 1.0);
        let single = sign_ratio(p, mode, &[5], &[-1.0], 3.0, &mesh).unwrap();
        assert!((single - 1.0).abs() < 1e-12);
        assert!(sign_ratio(p, mode, &[], &[], 3.0, &mesh).is_err());
        assert!(sign_ratio(p, mode, &[1, 2], &[1.0], 3.0, &mesh).is_err());
    }

    #[test]
    fn lp_normalized_mode_has_unit_elements() {
        let p = JacobiParams::new(0.5, 0.0).unwrap();
        let mesh = MeshConfig::default().with_tolerance(1e-9);
        let mode = NormalizationMode::lp(3.0).unwrap();
        for n in [0, 3, 17] {
            let e = Expansion::indicator(p, mode, &[n]);
            assert!((e.lp_norm(3.0, &mesh).unwrap() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn lp2_normalized_equals_orthonormal() {
        let p = JacobiParams::new(1.0, 0.3).unwrap();
        let cache = NormCache::new(MeshConfig::default());
        for n in [0, 2, 9] {
            for x in [-0.8, 0.1, 0.95] {
                let a = crate::jacobi::eval_basis(p, NormalizationMode::lp(2.0).unwrap(), n, x, Some(&cache)).unwrap();
                let b = crate::jacobi::eval_basis(p, NormalizationMode::Orthonormal, n, x, None).unwrap();
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn block_indices_shape() {
        assert_eq!(block_indices(3), vec![3, 5, 7]);
        assert_eq!(block_indices(1), vec![1]);
    }

    #[test]
    fn default_candidates_contain_named_sets() {
        let family = SearchFamily::default();
        let c = family.candidates(4);
        let labels: Vec<&str> = c.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(&labels[..3], &["contiguous", "block", "lacunary"]);
        assert_eq!(c[1].indices, vec![4, 6, 8, 10]);
        assert_eq!(c[2].indices, vec![1, 2, 4, 8]);
        assert_eq!(c.len(), 3 + family.random_sets);
        for set in &c[3..] {
            assert_eq!(set.indices.len(), 4);
            assert!(set.indices.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(family.candidates(4), c);
    }

    #[test]
    fn democracy_p2_orthonormal_is_sqrt_n() {
        let p = JacobiParams::new(0.5, 0.2).unwrap();
        let report =
            democracy_scan(p, NormalizationMode::Orthonormal, 9, 2.0, &SearchFamily::default(), &MeshConfig::default())
                .unwrap();
        for (_, v) in &report.evaluated {
            assert!((v - 3.0).abs() < 1e-6);
        }
        assert!(report.phi_l_estimate <= report.phi_u_estimate);
    }

    #[test]
    fn democracy_single_element() {
        let p = JacobiParams::legendre();
        let report =
            democracy_scan(p, NormalizationMode::Orthonormal, 1, 3.0, &SearchFamily::default(), &MeshConfig::default())
                .unwrap();
        assert!(report.phi_u_estimate < 1.5 && report.phi_l_estimate > 0.5);
    }
}
