//! Pearson correlation and two-sample Kolmogorov–Smirnov tests.
//!
//! The KS p-value is computed by exhaustive permutation over all
//! `C(n + m, n)` relabelings of the pooled sample when that count is at most
//! [`EXACT_PERMUTATION_LIMIT`], and from the asymptotic Kolmogorov
//! distribution otherwise.

use thiserror::Error;

use crate::ingest::RecessionWindow;
use crate::metrics::CccPoint;

/// Largest number of relabelings enumerated by the exact test.
pub const EXACT_PERMUTATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample lengths differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("need at least {min} values, got {got}")]
    TooFewItems { min: usize, got: usize },
    #[error("zero variance")]
    DegenerateVariance,
    #[error("empty sample")]
    EmptySample,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("{count} relabelings exceed the exact enumeration limit")]
    TooManyPermutations { count: u128 },
    #[error("CCC series lacks the year before/after recession windows: {}", .0.join(", "))]
    MissingYear(Vec<String>),
}

/// Product-moment correlation of two equal-length sequences.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::SizeMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewItems {
            min: 3,
            got: x.len(),
        });
    }
    let len = x.len() as f64;
    let mx = x.iter().sum::<f64>() / len;
    let my = y.iter().sum::<f64>() / len;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsMethod {
    ExactPermutation,
    Asymptotic,
}

impl KsMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            KsMethod::ExactPermutation => "exact-permutation",
            KsMethod::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub d_statistic: f64,
    pub p_value: f64,
    pub method: KsMethod,
}

/// Pooled sample sorted by value, with group boundaries at distinct values.
struct Pooled {
    n: usize,
    m: usize,
    /// `true` where the sorted pooled position belongs to the first sample.
    from_a: Vec<bool>,
    /// Group-end flags: position `k` is the last of its run of equal values.
    group_end: Vec<bool>,
}

impl Pooled {
    fn new(a: &[f64], b: &[f64]) -> Result<Self, StatsError> {
        if a.is_empty() || b.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if a.iter().chain(b).any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        let mut pooled: Vec<(f64, bool)> = a
            .iter()
            .map(|&v| (v, true))
            .chain(b.iter().map(|&v| (v, false)))
            .collect();
        pooled.sort_by(|x, y| x.0.total_cmp(&y.0));
        let group_end = (0..pooled.len())
            .map(|k| k + 1 == pooled.len() || pooled[k + 1].0 != pooled[k].0)
            .collect();
        Ok(Pooled {
            n: a.len(),
            m: b.len(),
            from_a: pooled.iter().map(|p| p.1).collect(),
            group_end,
        })
    }

    /// Integer-scaled statistics `(max |F_a − F_b|, max (F_a − F_b))`, both
    /// multiplied by `n·m`, for the labeling `in_a`.
    fn scaled_stats(&self, in_a: impl Iterator<Item = bool>) -> (i64, i64) {
        let (n, m) = (self.n as i64, self.m as i64);
        let (mut ca, mut cb) = (0i64, 0i64);
        let (mut abs_max, mut pos_max) = (0i64, 0i64);
        for (is_a, end) in in_a.zip(&self.group_end) {
            if is_a {
                ca += 1;
            } else {
                cb += 1;
            }
            if *end {
                let diff = ca * m - cb * n;
                abs_max = abs_max.max(diff.abs());
                pos_max = pos_max.max(diff);
            }
        }
        (abs_max, pos_max)
    }

    fn scale(&self) -> f64 {
        (self.n * self.m) as f64
    }

    fn effective_size(&self) -> f64 {
        (self.n * self.m) as f64 / (self.n + self.m) as f64
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let pooled = Pooled::new(a, b)?;
    Ok(pooled.scaled_stats(pooled.from_a.iter().copied()).0 as f64 / pooled.scale())
}

/// Exact permutation p-values `(two-sided, one-sided)` over every relabeling.
/// The one-sided alternative is `F_a > F_b` somewhere, i.e. `a` tends lower.
fn exact_p_values(pooled: &Pooled) -> Result<(f64, f64), StatsError> {
    let total_len = pooled.n + pooled.m;
    let count = binomial(total_len, pooled.n);
    if count > EXACT_PERMUTATION_LIMIT {
        return Err(StatsError::TooManyPermutations { count });
    }
    let (obs_abs, obs_pos) = pooled.scaled_stats(pooled.from_a.iter().copied());
    // Positions assigned to the first sample, advanced lexicographically.
    let k = pooled.n;
    let mut chosen: Vec<usize> = (0..k).collect();
    let mut mask = vec![false; total_len];
    let (mut hits_abs, mut hits_pos, mut seen) = (0u64, 0u64, 0u64);
    loop {
        mask.fill(false);
        for &c in &chosen {
            mask[c] = true;
        }
        let (d_abs, d_pos) = pooled.scaled_stats(mask.iter().copied());
        hits_abs += u64::from(d_abs >= obs_abs);
        hits_pos += u64::from(d_pos >= obs_pos);
        seen += 1;

        let Some(i) = (0..k).rev().find(|&i| chosen[i] != i + total_len - k) else {
            break;
        };
        chosen[i] += 1;
        for j in (i + 1)..k {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
    Ok((hits_abs as f64 / seen as f64, hits_pos as f64 / seen as f64))
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form converges fast for small arguments.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut cdf = 0.0;
        for k in 0..50 {
            let term = y.powi((2 * k + 1) * (2 * k + 1));
            cdf += term;
            if term < 1e-17 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * cdf
    } else {
        let mut sum = 0.0;
        for k in 1..=100i32 {
            let term = (-2.0 * f64::from(k * k) * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        2.0 * sum
    }
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Asymptotic two-sided p-value with the Stephens small-sample correction
/// `lambda = (sqrt(ne) + 0.12 + 0.11 / sqrt(ne)) · D`, `ne = nm / (n + m)`.
fn asymptotic_two_sided(d: f64, effective_size: f64) -> f64 {
    let s = effective_size.sqrt();
    clamp_p(kolmogorov_sf((s + 0.12 + 0.11 / s) * d))
}

/// Asymptotic one-sided p-value, `exp(−2 · ne · D⁺²)`.
fn asymptotic_one_sided(d_plus: f64, effective_size: f64) -> f64 {
    clamp_p((-2.0 * effective_size * d_plus * d_plus).exp())
}

/// Two-sample KS test, exact when the relabeling count allows it.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    match ks_exact(a, b) {
        Err(StatsError::TooManyPermutations { .. }) => ks_asymptotic(a, b),
        other => other,
    }
}

pub fn ks_exact(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    let pooled = Pooled::new(a, b)?;
    let (p, _) = exact_p_values(&pooled)?;
    Ok(KsResult {
        d_statistic: pooled.scaled_stats(pooled.from_a.iter().copied()).0 as f64 / pooled.scale(),
        p_value: clamp_p(p),
        method: KsMethod::ExactPermutation,
    })
}

pub fn ks_asymptotic(a: &[f64], b: &[f64]) -> Result<KsResult, StatsError> {
    let pooled = Pooled::new(a, b)?;
    let d = pooled.scaled_stats(pooled.from_a.iter().copied()).0 as f64 / pooled.scale();
    Ok(KsResult {
        d_statistic: d,
        p_value: asymptotic_two_sided(d, pooled.effective_size()),
        method: KsMethod::Asymptotic,
    })
}

/// One-sided test of `F_a ≤ F_b` everywhere against `a` being stochastically
/// smaller. Returns `(D⁺, p)`.
pub fn ks_one_sided(a: &[f64], b: &[f64]) -> Result<(f64, f64, KsMethod), StatsError> {
    let pooled = Pooled::new(a, b)?;
    let d_plus = pooled.scaled_stats(pooled.from_a.iter().copied()).1 as f64 / pooled.scale();
    match exact_p_values(&pooled) {
        Ok((_, p)) => Ok((d_plus, clamp_p(p), KsMethod::ExactPermutation)),
        Err(StatsError::TooManyPermutations { .. }) => Ok((
            d_plus,
            asymptotic_one_sided(d_plus, pooled.effective_size()),
            KsMethod::Asymptotic,
        )),
        Err(e) => Err(e),
    }
}

/// CCC values bracketing recession windows and their KS comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct RecessionShift {
    /// CCC in the calendar year before each window starts.
    pub before: Vec<f64>,
    /// CCC in the calendar year after each window ends.
    pub after: Vec<f64>,
    pub two_sided: KsResult,
    /// `sup (F_before − F_after)`.
    pub d_plus: f64,
    /// p-value for the null that CCC before a recession is at least as large as after.
    pub one_sided_p: f64,
}

pub fn recession_ccc_shift(
    series: &[CccPoint],
    windows: &[RecessionWindow],
) -> Result<RecessionShift, StatsError> {
    if windows.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let ccc_in = |year: i32| series.iter().find(|p| p.year == year).map(|p| p.ccc);
    let mut missing = Vec::new();
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for w in windows {
        match (ccc_in(w.start.year - 1), ccc_in(w.end.year + 1)) {
            (Some(b), Some(a)) => {
                before.push(b);
                after.push(a);
            }
            _ => missing.push(w.label.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(StatsError::MissingYear(missing));
    }
    let two_sided = ks_two_sample(&before, &after)?;
    let (d_plus, one_sided_p, _) = ks_one_sided(&before, &after)?;
    Ok(RecessionShift {
        before,
        after,
        two_sided,
        d_plus,
        one_sided_p,
    })
}
