//! Measurable statistics for the deterministic properties that random data
//! and initialization satisfy with overwhelming probability.
//!
//! Each check returns a [`PropertyReport`]: the observed statistic, the
//! asymptotic rate evaluated at `(n, m, S)` with unit constant (the
//! comparator), and their ratio. Rates hide polylog factors; the convention
//! here is exactly one `log(nS)` unless stated otherwise.
//!
//! Min/max over column or neuron subsets are exponential to enumerate, so
//! they are estimated from uniformly sampled subsets plus one adversarially
//! chosen subset. Pools of at most [`EXHAUSTIVE_LIMIT`] elements are
//! enumerated completely.

use std::fmt;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ForwardCache, Theta};
use crate::rng::{stream_rng, Stream};
use crate::synth::ProblemDims;
use crate::tensor::{
    gram, max_abs, max_eigenpair_sym, min_eigen_sym, min_eigenpair_sym, smallest_singular_value,
    spectral_norm, Matrix, Vector,
};

/// Pools up to this size are enumerated instead of sampled.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// Whether the property bounds the statistic from above or below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    #[default]
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub observed: f64,
    pub comparator: f64,
    pub realized_constant: f64,
    pub samples_used: usize,
    pub pass_hint: bool,
    #[serde(skip)]
    pub bound: Bound,
    #[serde(skip)]
    pub threshold: f64,
    /// Degenerate-input notes (clamped parameters, `m = 1`, ...).
    #[serde(skip)]
    pub flag: Option<String>,
}

impl PropertyReport {
    fn new(name: impl Into<String>, observed: f64, comparator: f64, bound: Bound) -> Self {
        debug_assert!(comparator > 0.0);
        let mut r = Self {
            name: name.into(),
            observed,
            comparator,
            realized_constant: observed / comparator,
            samples_used: 1,
            pass_hint: false,
            bound,
            threshold: 1.0,
            flag: None,
        };
        r.judge(1.0);
        r
    }

    fn samples(mut self, n: usize) -> Self {
        self.samples_used = n;
        self
    }

    fn flagged(mut self, note: impl Into<String>) -> Self {
        self.flag = Some(note.into());
        self
    }

    /// Re-evaluates `pass_hint` against `threshold`: `realized <= threshold`
    /// for upper bounds, `realized >= threshold` for lower bounds.
    pub fn judge(&mut self, threshold: f64) {
        self.threshold = threshold;
        self.pass_hint = match self.bound {
            Bound::Upper => self.realized_constant <= threshold,
            Bound::Lower => self.realized_constant >= threshold,
        };
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.bound {
            Bound::Upper => "<=",
            Bound::Lower => ">=",
        };
        write!(
            f,
            "{:<28} observed={:<12.6} comparator={:<12.6} constant={:.4} ({} {}) {}",
            self.name,
            self.observed,
            self.comparator,
            self.realized_constant,
            op,
            self.threshold,
            if self.pass_hint { "ok" } else { "FAIL" }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsetSampleConfig {
    pub num_samples: usize,
    pub include_adversarial: bool,
    pub seed: u64,
}

impl Default for SubsetSampleConfig {
    fn default() -> Self {
        Self {
            num_samples: 200,
            include_adversarial: true,
            seed: 0,
        }
    }
}

/// Enumerates all `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Subsets of size `k` of `0..pool` to evaluate: everything for small
/// pools, otherwise the adversarial pick followed by `num_samples` uniform
/// draws. Draws are sequential on one stream, so fewer samples always
/// evaluate a prefix of the larger run.
fn candidate_subsets(
    pool: usize,
    k: usize,
    cfg: &SubsetSampleConfig,
    adversarial: impl FnOnce() -> Result<Vec<usize>>,
) -> Result<Vec<Vec<usize>>> {
    if k == pool {
        return Ok(vec![(0..pool).collect()]);
    }
    if pool <= EXHAUSTIVE_LIMIT {
        return Ok(combinations(pool, k));
    }
    let mut out = Vec::with_capacity(cfg.num_samples + 1);
    if cfg.include_adversarial {
        out.push(adversarial()?);
    }
    let mut rng = stream_rng(cfg.seed, Stream::Subsets);
    for _ in 0..cfg.num_samples {
        let mut s = sample(&mut rng, pool, k).into_vec();
        s.sort_unstable();
        out.push(s);
    }
    Ok(out)
}

fn top_k_by(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// Dyadic grid `2^-h` for `h = 0..=ceil(log2 S)`.
pub fn dyadic_grid(s: usize) -> Vec<f64> {
    let top = (s.max(1) as f64).log2().ceil() as i32;
    (0..=top).map(|h| 0.5f64.powi(h)).collect()
}

/// `max_{j≠j'} |⟨X^j, X^j'⟩|` against `log(nS)/sqrt(n)`.
pub fn check_almost_orthogonality(x: &Matrix, dims: ProblemDims) -> PropertyReport {
    let comparator = dims.log_ns() / (dims.n as f64).sqrt();
    let m = x.ncols();
    if m < 2 {
        return PropertyReport::new("almost_orthogonality", 0.0, comparator, Bound::Upper)
            .flagged("single column");
    }
    let g = gram(x);
    let mut observed: f64 = 0.0;
    for j in 0..m {
        for k in (j + 1)..m {
            observed = observed.max(g[(j, k)].abs());
        }
    }
    PropertyReport::new("almost_orthogonality", observed, comparator, Bound::Upper)
        .samples(m * (m - 1) / 2)
}

/// `max_J ‖X^J‖` over `k`-column subsets, against `(1 + sqrt(k/n)) log(nS)`.
pub fn check_submatrix_norms(
    x: &Matrix,
    k_values: &[usize],
    cfg: &SubsetSampleConfig,
    dims: ProblemDims,
) -> Result<Vec<PropertyReport>> {
    let m = x.ncols();
    if let Some(&bad) = k_values.iter().find(|&&k| k == 0 || k > m) {
        return Err(Error::InvalidArgument(format!("subset size {bad} not in 1..={m}")));
    }
    // leverage of each column against the top left singular vector
    let leverage = || -> Result<Vec<f64>> {
        let (_, u) = max_eigenpair_sym(&(x * x.transpose()))?;
        Ok(x.tr_mul(&u).iter().map(|v| v.abs()).collect())
    };
    let mut cached: Option<Vec<f64>> = None;
    let mut reports = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let subsets = candidate_subsets(m, k, cfg, || {
            if cached.is_none() {
                cached = Some(leverage()?);
            }
            Ok(top_k_by(cached.as_ref().unwrap(), k))
        })?;
        let observed = subsets
            .iter()
            .map(|j| spectral_norm(&x.select_columns(j.iter())))
            .fold(0.0, f64::max);
        let comparator = (1.0 + (k as f64 / dims.n as f64).sqrt()) * dims.log_ns();
        reports.push(
            PropertyReport::new(format!("submatrix_norm_k{k}"), observed, comparator, Bound::Upper)
                .samples(subsets.len()),
        );
    }
    Ok(reports)
}

/// `n* = min(m, ceil(n (ln n)²))`.
pub fn default_n_star(dims: ProblemDims) -> usize {
    let n = dims.n as f64;
    ((n * n.ln().powi(2)).ceil() as usize).max(1).min(dims.m)
}

/// Greedy set of mutually collinear columns: start from the most aligned
/// pair and keep adding the column with the largest squared overlap with
/// the current set.
fn most_collinear_subset(x: &Matrix, k: usize) -> Vec<usize> {
    let g = gram(x);
    let m = g.nrows();
    if k == 0 || m == 0 {
        return Vec::new();
    }
    let mut best = (0, 0, -1.0);
    for j in 0..m {
        for l in (j + 1)..m {
            if g[(j, l)].abs() > best.2 {
                best = (j, l, g[(j, l)].abs());
            }
        }
    }
    let mut chosen = vec![false; m];
    let mut score = vec![0.0; m];
    let mut picked = Vec::with_capacity(k);
    let seeds = if m >= 2 { vec![best.0, best.1] } else { vec![0] };
    for j in seeds.into_iter().take(k) {
        chosen[j] = true;
        picked.push(j);
        for l in 0..m {
            score[l] += g[(j, l)].powi(2);
        }
    }
    while picked.len() < k {
        let next = (0..m)
            .filter(|&l| !chosen[l])
            .max_by(|&a, &b| score[a].total_cmp(&score[b]).then(b.cmp(&a)))
            .expect("k <= m");
        chosen[next] = true;
        picked.push(next);
        for l in 0..m {
            score[l] += g[(next, l)].powi(2);
        }
    }
    picked.sort_unstable();
    picked
}

/// `min_J σ_min((X^J)ᵀ)` over `n*`-column subsets, against `n/m`.
///
/// `σ_min` is the smallest of the `min(n*, n)` singular values.
pub fn check_dual_sigma(
    x: &Matrix,
    n_star: Option<usize>,
    cfg: &SubsetSampleConfig,
    dims: ProblemDims,
) -> Result<PropertyReport> {
    let m = x.ncols();
    let requested = n_star.unwrap_or_else(|| default_n_star(dims));
    if requested == 0 {
        return Err(Error::InvalidArgument("n_star must be positive".into()));
    }
    let k = requested.min(m);
    let subsets = candidate_subsets(m, k, cfg, || Ok(most_collinear_subset(x, k)))?;
    let mut observed = f64::INFINITY;
    for j in &subsets {
        observed = observed.min(smallest_singular_value(&x.select_columns(j.iter()).transpose())?);
    }
    let report = PropertyReport::new("dual_sigma", observed, dims.n as f64 / m as f64, Bound::Lower)
        .samples(subsets.len());
    Ok(if requested > m {
        report.flagged(format!("n_star {requested} clamped to m = {m}"))
    } else {
        report
    })
}

/// `min_ν ‖(W0)_ν‖` against `sqrt(n/2)`.
pub fn check_row_norms(w0: &Matrix) -> PropertyReport {
    let observed = w0
        .row_iter()
        .map(|r| r.norm())
        .fold(f64::INFINITY, f64::min);
    let comparator = (w0.ncols() as f64 / 2.0).sqrt();
    PropertyReport::new("row_norms", observed, comparator, Bound::Lower).samples(w0.nrows())
}

/// `max(‖W0‖_∞, ‖z0‖_∞)` against `log(nS)`.
pub fn check_entries(theta0: &Theta, dims: ProblemDims) -> PropertyReport {
    let observed = max_abs(theta0.w.iter().copied()).max(max_abs(theta0.z.iter().copied()));
    PropertyReport::new("entries", observed, dims.log_ns(), Bound::Upper)
}

/// `ζ0 = 1` for ±1 output weights, `0.5` otherwise.
pub fn default_zeta0(z0: &Vector) -> f64 {
    if z0.iter().all(|v| v.abs() == 1.0) {
        1.0
    } else {
        0.5
    }
}

/// `|{ν : |z0_ν| >= ζ0}|` against `S/log(nS)`.
pub fn check_z_large(z0: &Vector, zeta0: f64, dims: ProblemDims) -> PropertyReport {
    let observed = z0.iter().filter(|v| v.abs() >= zeta0).count() as f64;
    PropertyReport::new("z_large", observed, dims.s as f64 / dims.log_ns(), Bound::Lower)
}

/// Smallest `|(W0 X)_{νj}|`; passes iff it is strictly positive. The
/// comparator `1/(S m)` is the scale of the minimum of `S m` standard
/// normal magnitudes.
pub fn check_regular(theta0: &Theta, x: &Matrix) -> PropertyReport {
    let pre = &theta0.w * x;
    let observed = pre.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let mut r = PropertyReport::new("regular", observed, 1.0 / pre.len() as f64, Bound::Lower);
    r.threshold = 0.0;
    r.pass_hint = observed > 0.0;
    r.samples(pre.len())
}

/// `‖W0 X‖_∞` against `log(nS)`.
pub fn check_w0x(theta0: &Theta, x: &Matrix, dims: ProblemDims) -> PropertyReport {
    let pre = &theta0.w * x;
    PropertyReport::new("w0x", max_abs(pre.iter().copied()), dims.log_ns(), Bound::Upper)
        .samples(pre.len())
}

/// `‖f0‖_∞` against `sqrt(S) log(nS)`.
pub fn check_f0(cache: &ForwardCache, dims: ProblemDims) -> PropertyReport {
    let comparator = (dims.s as f64).sqrt() * dims.log_ns();
    PropertyReport::new("f0", max_abs(cache.output.iter().copied()), comparator, Bound::Upper)
}

/// Per column `j`, the number of neurons with `|(W0 X)_{νj}| <= r`.
pub fn good_behavior_counts(theta0: &Theta, x: &Matrix, r: f64) -> Vec<usize> {
    let pre = &theta0.w * x;
    pre.column_iter()
        .map(|c| c.iter().filter(|v| v.abs() <= r).count())
        .collect()
}

/// For each `R`: `max_j |{ν : |(W0X)_{νj}| <= R}| / (S R + 1)` against
/// `log(nS)`.
pub fn check_good_behavior(
    theta0: &Theta,
    x: &Matrix,
    r_grid: &[f64],
    dims: ProblemDims,
) -> Vec<PropertyReport> {
    r_grid
        .iter()
        .map(|&r| {
            let worst = good_behavior_counts(theta0, x, r).into_iter().max().unwrap_or(0);
            let observed = worst as f64 / (dims.s as f64 * r + 1.0);
            PropertyReport::new(format!("good_behavior_R{r}"), observed, dims.log_ns(), Bound::Upper)
                .samples(x.ncols())
        })
        .collect()
}

/// `λ_min(G0)` against `S`.
pub fn check_ntk_g(cache: &ForwardCache, dims: ProblemDims) -> Result<PropertyReport> {
    let observed = min_eigen_sym(&gram(&cache.hidden))?;
    Ok(PropertyReport::new("ntk_g", observed, dims.s as f64, Bound::Lower))
}

/// `S* = floor(n² S / ((n² + m) log(nS)²))`.
pub fn default_s_star(dims: ProblemDims) -> usize {
    let n2 = (dims.n * dims.n) as f64;
    let v = n2 * dims.s as f64 / ((n2 + dims.m as f64) * dims.log_ns().powi(2));
    v.floor() as usize
}

/// `min_Γ λ_min((XᵀX)∘(A_Γᵀ A_Γ))` over `Γ ⊆ Γ0` obtained by deleting `s_star`
/// neurons, where `Γ0 = {ν : |z0_ν| >= ζ0}`; against `S`.
///
/// The adversarial deletion removes the neurons contributing most to the
/// Rayleigh quotient `vᵀ H v` at the bottom eigenvector `v` of the
/// unrestricted matrix.
pub fn check_ntk_h_restricted(
    theta0: &Theta,
    cache: &ForwardCache,
    x: &Matrix,
    s_star: Option<usize>,
    zeta0: Option<f64>,
    cfg: &SubsetSampleConfig,
    dims: ProblemDims,
) -> Result<PropertyReport> {
    let zeta0 = zeta0.unwrap_or_else(|| default_zeta0(&theta0.z));
    let pool: Vec<usize> = (0..theta0.width())
        .filter(|&nu| theta0.z[nu].abs() >= zeta0)
        .collect();
    let s_star = s_star.unwrap_or_else(|| default_s_star(dims));
    if s_star >= pool.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot delete {s_star} of {} eligible neurons",
            pool.len()
        )));
    }
    let a_pool = cache.activation.select_rows(pool.iter());
    let xtx = gram(x);
    let full = gram(&a_pool);
    let restricted = |removed: &[usize]| -> Result<f64> {
        let mut k = full.clone();
        for &p in removed {
            let row = a_pool.row(p);
            k -= row.transpose() * row;
        }
        min_eigen_sym(&xtx.component_mul(&k))
    };
    let keep = pool.len() - s_star;
    // Subsets are enumerated as deletions; the kept set is the complement.
    let deletions = candidate_subsets(pool.len(), s_star, cfg, || {
        let (_, v) = min_eigenpair_sym(&xtx.component_mul(&full))?;
        let mut weighted = a_pool.clone();
        for (mut col, &vj) in weighted.column_iter_mut().zip(v.iter()) {
            col *= vj;
        }
        // contribution of neuron p: ‖X (a_p ∘ v)‖²
        let proj = x * weighted.transpose();
        let scores: Vec<f64> = proj.column_iter().map(|c| c.norm_squared()).collect();
        Ok(top_k_by(&scores, s_star))
    })?;
    let mut observed = f64::INFINITY;
    for del in &deletions {
        observed = observed.min(restricted(del)?);
    }
    Ok(
        PropertyReport::new("ntk_h_restricted", observed, dims.s as f64, Bound::Lower)
            .samples(deletions.len())
            .flagged(format!("kept {keep} of {} neurons", pool.len())),
    )
}

/// For each `R`: `|{j : |wᵀX^j| <= R}|` against `(m R + 1) log(nS)²`.
pub fn check_bad_r(
    w: &Vector,
    x: &Matrix,
    r_grid: &[f64],
    dims: ProblemDims,
) -> Result<Vec<PropertyReport>> {
    if w.len() != x.nrows() {
        return Err(Error::Shape(format!(
            "w has {} entries but X has {} rows",
            w.len(),
            x.nrows()
        )));
    }
    let proj = x.tr_mul(w);
    Ok(r_grid
        .iter()
        .map(|&r| {
            let observed = proj.iter().filter(|v| v.abs() <= r).count() as f64;
            let comparator = (x.ncols() as f64 * r + 1.0) * dims.log_ns().powi(2);
            PropertyReport::new(format!("bad_r_R{r}"), observed, comparator, Bound::Upper)
                .samples(x.ncols())
        })
        .collect())
}

/// Pass thresholds on the realized constant, per property family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub almost_orthogonality: f64,
    pub submatrix_norms: f64,
    pub dual_sigma: f64,
    pub row_norms: f64,
    pub entries: f64,
    pub z_large: f64,
    pub w0x: f64,
    pub f0: f64,
    pub good_behavior: f64,
    pub ntk_g: f64,
    pub ntk_h_restricted: f64,
    pub bad_r: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            almost_orthogonality: 1.0,
            submatrix_norms: 1.0,
            dual_sigma: 1.0,
            row_norms: 1.0,
            entries: 1.0,
            z_large: 1.0,
            w0x: 1.0,
            f0: 1.0,
            good_behavior: 1.0,
            ntk_g: 0.004,
            ntk_h_restricted: 0.08,
            bad_r: 1.0,
        }
    }
}

impl Thresholds {
    fn for_name(&self, name: &str) -> Option<f64> {
        let family = [
            ("almost_orthogonality", self.almost_orthogonality),
            ("submatrix_norm", self.submatrix_norms),
            ("dual_sigma", self.dual_sigma),
            ("row_norms", self.row_norms),
            ("entries", self.entries),
            ("z_large", self.z_large),
            ("w0x", self.w0x),
            ("f0", self.f0),
            ("good_behavior", self.good_behavior),
            ("ntk_g", self.ntk_g),
            ("ntk_h_restricted", self.ntk_h_restricted),
            ("bad_r", self.bad_r),
        ];
        family
            .iter()
            .find(|(prefix, _)| name.starts_with(prefix))
            .map(|(_, t)| *t)
    }

    /// Applies the matching threshold to every report except `regular`,
    /// which always passes on strict positivity.
    pub fn apply(&self, reports: &mut [PropertyReport]) {
        for r in reports {
            if let Some(t) = self.for_name(&r.name) {
                r.judge(t);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SuiteConfig {
    pub subsets: SubsetSampleConfig,
    /// Defaults to `{1, n, m}` (deduplicated, clipped to `m`).
    pub k_values: Option<Vec<usize>>,
    /// Defaults to [`dyadic_grid`].
    pub r_grid: Option<Vec<f64>>,
    pub zeta0: Option<f64>,
    pub n_star: Option<usize>,
    pub s_star: Option<usize>,
    pub thresholds: Thresholds,
}

/// Runs every check on one instance.
pub fn run_suite(
    x: &Matrix,
    theta0: &Theta,
    cache0: &ForwardCache,
    dims: ProblemDims,
    cfg: &SuiteConfig,
) -> Result<Vec<PropertyReport>> {
    let k_values = cfg.k_values.clone().unwrap_or_else(|| {
        let mut k = vec![1, dims.n.min(dims.m), dims.m];
        k.dedup();
        k
    });
    let r_grid = cfg.r_grid.clone().unwrap_or_else(|| dyadic_grid(dims.s));
    let zeta0 = cfg.zeta0.unwrap_or_else(|| default_zeta0(&theta0.z));

    let mut reports = vec![check_almost_orthogonality(x, dims)];
    reports.extend(check_submatrix_norms(x, &k_values, &cfg.subsets, dims)?);
    reports.push(check_dual_sigma(x, cfg.n_star, &cfg.subsets, dims)?);
    reports.push(check_row_norms(&theta0.w));
    reports.push(check_entries(theta0, dims));
    reports.push(check_z_large(&theta0.z, zeta0, dims));
    reports.push(check_regular(theta0, x));
    reports.push(check_w0x(theta0, x, dims));
    reports.push(check_f0(cache0, dims));
    reports.extend(check_good_behavior(theta0, x, &r_grid, dims));
    reports.push(check_ntk_g(cache0, dims)?);
    reports.push(check_ntk_h_restricted(
        theta0,
        cache0,
        x,
        cfg.s_star,
        Some(zeta0),
        &cfg.subsets,
        dims,
    )?);
    let w_row = theta0.w.row(0).transpose();
    reports.extend(check_bad_r(&w_row, x, &r_grid, dims)?);
    cfg.thresholds.apply(&mut reports);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(n: usize, m: usize, s: usize) -> ProblemDims {
        ProblemDims::new(n, m, s).unwrap()
    }

    #[test]
    fn combinations_enumerate() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(5, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(12, 6).len(), 924);
    }

    #[test]
    fn orthogonality_trivial_cases() {
        let d = dims(4, 3, 2);
        let x = Matrix::identity(4, 3);
        let r = check_almost_orthogonality(&x, d);
        assert_eq!(r.observed, 0.0);
        assert!((r.realized_constant - r.observed / r.comparator).abs() < 1e-12);
        let mut dup = x.clone();
        dup.set_column(1, &x.column(0));
        assert!((check_almost_orthogonality(&dup, d).observed - 1.0).abs() < 1e-15);
        let single = check_almost_orthogonality(&Matrix::identity(4, 1), dims(4, 1, 2));
        assert_eq!(single.observed, 0.0);
        assert!(single.flag.is_some());
    }

    #[test]
    fn submatrix_extremes() {
        let d = dims(3, 5, 2);
        let x = crate::synth::sample_sphere_data(d, 3);
        let cfg = SubsetSampleConfig::default();
        let r = check_submatrix_norms(&x, &[1, 5], &cfg, d).unwrap();
        assert!((r[0].observed - 1.0).abs() < 1e-12);
        assert!((r[1].observed - spectral_norm(&x)).abs() < 1e-12);
        assert_eq!(r[1].samples_used, 1);
        assert!(check_submatrix_norms(&x, &[6], &cfg, d).is_err());
    }

    #[test]
    fn dual_sigma_orthonormal() {
        let d = dims(5, 3, 2);
        let x = Matrix::identity(5, 3);
        let r = check_dual_sigma(&x, Some(3), &SubsetSampleConfig::default(), d).unwrap();
        assert!((r.observed - 1.0).abs() < 1e-12);
        let clamped = check_dual_sigma(&x, Some(10), &SubsetSampleConfig::default(), d).unwrap();
        assert!(clamped.flag.is_some());
        // duplicated pair inside an exhaustive enumeration drives the min to 0
        let mut dup = Matrix::identity(3, 4);
        dup.set_column(3, &dup.column(0).into_owned());
        let r = check_dual_sigma(&dup, Some(3), &SubsetSampleConfig::default(), dims(3, 4, 2)).unwrap();
        assert!(r.observed < 1e-7);
    }

    #[test]
    fn initialization_checks() {
        let t = Theta::new(Matrix::identity(4, 4), Vector::from_element(4, 1.0)).unwrap();
        let d = dims(4, 4, 4);
        let rows = check_row_norms(&t.w);
        assert_eq!(rows.observed, 1.0);
        assert!((rows.comparator - 2f64.sqrt()).abs() < 1e-15);
        let mut zero_row = t.w.clone();
        zero_row.row_mut(2).fill(0.0);
        assert!(!check_row_norms(&zero_row).pass_hint);

        assert_eq!(check_entries(&t, d).observed, 1.0);
        let zw = Theta::new(Matrix::zeros(4, 4), Vector::from_vec(vec![0.5, -2.0, 0.1, 0.0])).unwrap();
        assert_eq!(check_entries(&zw, d).observed, 2.0);

        assert_eq!(check_z_large(&t.z, 1.0, d).observed, 4.0);
        assert_eq!(check_z_large(&t.z, 1.5, d).observed, 0.0);
    }

    #[test]
    fn regularity_and_w0x() {
        let x = Matrix::identity(3, 3);
        let w = Matrix::from_row_slice(2, 3, &[0.0, 1.0, -2.0, 0.5, 0.7, 3.0]);
        let t = Theta::new(w.clone(), Vector::from_element(2, 1.0)).unwrap();
        let r = check_regular(&t, &x);
        assert_eq!(r.observed, 0.0);
        assert!(!r.pass_hint);
        let d = dims(3, 3, 2);
        assert_eq!(check_w0x(&t, &x, d).observed, 3.0);
        let zero = Theta::new(Matrix::zeros(2, 3), Vector::from_element(2, 1.0)).unwrap();
        assert_eq!(check_w0x(&zero, &x, d).observed, 0.0);
    }

    #[test]
    fn regular_matches_loop() {
        let d = dims(6, 9, 7);
        let x = crate::synth::sample_sphere_data(d, 8);
        let t = crate::synth::sample_init(d, crate::synth::ZInit::Gaussian, 8);
        let mut naive = f64::INFINITY;
        for nu in 0..7 {
            for j in 0..9 {
                let v: f64 = (0..6).map(|i| t.w[(nu, i)] * x[(i, j)]).sum();
                naive = naive.min(v.abs());
            }
        }
        let r = check_regular(&t, &x);
        assert!((r.observed - naive).abs() < 1e-12);
        assert!(r.pass_hint);
    }

    #[test]
    fn good_behavior_saturates() {
        let d = dims(5, 4, 6);
        let x = crate::synth::sample_sphere_data(d, 1);
        let t = crate::synth::sample_init(d, crate::synth::ZInit::Rademacher, 1);
        let big = max_abs((&t.w * &x).iter().copied());
        assert!(good_behavior_counts(&t, &x, big).iter().all(|&c| c == 6));
        assert!(good_behavior_counts(&t, &x, 0.0).iter().all(|&c| c == 0));
        let reps = check_good_behavior(&t, &x, &[big], d);
        assert!((reps[0].observed - 6.0 / (6.0 * big + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn bad_r_extremes() {
        let d = dims(4, 10, 3);
        let x = crate::synth::sample_sphere_data(d, 2);
        let w = Vector::from_vec(vec![1.0, -0.5, 0.3, 2.0]);
        let r = check_bad_r(&w, &x, &[1e6, 0.0], d).unwrap();
        assert_eq!(r[0].observed, 10.0);
        assert_eq!(r[1].observed, 0.0);
    }

    #[test]
    fn dyadic_grid_spans_width() {
        assert_eq!(dyadic_grid(1), vec![1.0]);
        let g = dyadic_grid(1000);
        assert_eq!(g.len(), 11);
        assert_eq!(*g.last().unwrap(), 1.0 / 1024.0);
    }

    #[test]
    fn default_parameters() {
        let d = dims(100, 500, 1000);
        // 10^7 / (10500 · ln(10^5)^2)
        assert_eq!(default_s_star(d), 7);
        assert_eq!(default_n_star(d), 500);
        assert_eq!(default_n_star(dims(10, 1000, 5)), 54);
    }

    #[test]
    fn thresholds_by_family() {
        let th = Thresholds::default();
        assert_eq!(th.for_name("submatrix_norm_k10"), Some(1.0));
        assert_eq!(th.for_name("ntk_h_restricted"), Some(0.08));
        assert_eq!(th.for_name("regular"), None);
    }
}
