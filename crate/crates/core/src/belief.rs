//! Probability primitives shared by the process and the agent.
//!
//! Everything here is value-semantic. Conditional tables store each
//! conditional slice contiguously: the slice for flat condition index `c`
//! lives at `data[c * outcomes..(c + 1) * outcomes]`, and condition tuples are
//! flattened row-major.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied inside logarithms.
pub const LOG_FLOOR: f64 = 1e-16;

const SUM_TOL: f64 = 1e-9;

/// `ln(max(x, LOG_FLOOR))`.
#[inline]
pub fn safe_ln(x: f64) -> f64 {
    x.max(LOG_FLOOR).ln()
}

/// A normalized probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    /// Wraps an already-normalized vector, checking the invariants.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::DegenerateDistribution("empty vector".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::DegenerateDistribution(format!(
                "negative or non-finite entry in {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::DegenerateDistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform over zero outcomes");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        assert!(index < n, "one-hot index {index} out of range {n}");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }

    /// Inverse-CDF draw given a uniform variate in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        sample_index(&self.probs, u)
    }
}

impl AsRef<[f64]> for Categorical {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF lookup. The last index with positive mass absorbs rounding.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = i;
            acc += p;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Rescales a non-negative vector to sum to one.
pub fn normalize(raw: &[f64]) -> Result<Categorical> {
    if raw.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::DegenerateDistribution(format!(
            "negative or non-finite entry in {raw:?}"
        )));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateDistribution("all-zero input".into()));
    }
    Ok(Categorical {
        probs: raw.iter().map(|x| x / total).collect(),
    })
}

/// `exp(precision * logit)` normalized, with max-subtraction.
pub fn softmax(logits: &[f64], precision: f64) -> Result<Categorical> {
    if logits.is_empty() {
        return Err(Error::InvalidInput("softmax of empty vector".into()));
    }
    if logits.iter().any(|x| x.is_nan()) || precision.is_nan() {
        return Err(Error::InvalidInput("NaN in softmax input".into()));
    }
    if precision < 0.0 {
        return Err(Error::InvalidInput(format!(
            "negative precision {precision}"
        )));
    }
    Ok(Categorical {
        probs: softmax_raw(logits, precision),
    })
}

pub(crate) fn softmax_raw(logits: &[f64], precision: f64) -> Vec<f64> {
    if precision == 0.0 {
        return vec![1.0 / logits.len() as f64; logits.len()];
    }
    let max = logits
        .iter()
        .map(|x| precision * x)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits
        .iter()
        .map(|x| (precision * x - max).exp())
        .collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    out
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|x| **x > 0.0)
        .map(|x| x * x.ln())
        .sum::<f64>()
}

/// `KL(p || q)` in nats. Returns `f64::INFINITY` when `p` puts mass where `q`
/// has none.
pub fn kl_divergence(p: &Categorical, q: &Categorical) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::shape(p.len(), q.len()));
    }
    Ok(kl_raw(p.probs(), q.probs()))
}

pub(crate) fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (pi, qi) in p.iter().zip(q) {
        if *pi > 0.0 {
            if *qi <= 0.0 {
                return f64::INFINITY;
            }
            total += pi * (pi / qi).ln();
        }
    }
    total.max(0.0)
}

/// Sorted bin centers for a discretized outcome axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinGrid {
    centers: Vec<f64>,
}

impl BinGrid {
    pub fn new(centers: Vec<f64>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidInput("empty bin grid".into()));
        }
        if centers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(format!(
                "bin centers not strictly increasing: {centers:?}"
            )));
        }
        Ok(Self { centers })
    }

    /// `n` equispaced centers from `lo` to `hi` inclusive.
    pub fn equispaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(Error::InvalidInput(format!(
                "equispaced grid needs n >= 2 and hi > lo (n={n}, lo={lo}, hi={hi})"
            )));
        }
        let step = (hi - lo) / (n - 1) as f64;
        Self::new((0..n).map(|k| lo + step * k as f64).collect())
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.centers[self.centers.len() - 1] - self.centers[0]
    }

    /// Mean spacing between adjacent centers. This is the unit in which
    /// emission noise levels are expressed.
    pub fn bin_width(&self) -> f64 {
        if self.centers.len() < 2 {
            1.0
        } else {
            self.span() / (self.centers.len() - 1) as f64
        }
    }

    pub fn nearest(&self, value: f64) -> usize {
        let mut best = 0;
        for (j, c) in self.centers.iter().enumerate() {
            if (c - value).abs() < (self.centers[best] - value).abs() {
                best = j;
            }
        }
        best
    }
}

/// How a Gaussian is projected onto the bin grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Density evaluated at each center, then normalized.
    #[default]
    Center,
    /// Mass of the interval between midpoints; the outer bins extend to
    /// infinity.
    Interval,
}

/// Projects `N(mean, sigma^2)` onto `grid`. Both arguments are in the grid's
/// value units.
pub fn discretize_gaussian(mean: f64, sigma: f64, grid: &BinGrid) -> Result<Categorical> {
    discretize_gaussian_with(mean, sigma, grid, Discretization::Center)
}

pub fn discretize_gaussian_with(
    mean: f64,
    sigma: f64,
    grid: &BinGrid,
    rule: Discretization,
) -> Result<Categorical> {
    if !(sigma > 0.0) || !sigma.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidInput(format!(
            "gaussian needs finite mean and sigma > 0 (mean={mean}, sigma={sigma})"
        )));
    }
    match rule {
        Discretization::Center => {
            let log_density: Vec<f64> = grid
                .centers()
                .iter()
                .map(|c| -(c - mean).powi(2) / (2.0 * sigma * sigma))
                .collect();
            // max-subtraction keeps the sigma -> 0 limit one-hot instead of 0/0
            Ok(Categorical {
                probs: softmax_raw(&log_density, 1.0),
            })
        }
        Discretization::Interval => {
            let c = grid.centers();
            let n = c.len();
            let cdf = |x: f64| statrs::function::erf::erfc(-(x - mean) / (sigma * std::f64::consts::SQRT_2)) / 2.0;
            let mut mass = Vec::with_capacity(n);
            for j in 0..n {
                let lo = if j == 0 { 0.0 } else { cdf((c[j - 1] + c[j]) / 2.0) };
                let hi = if j + 1 == n { 1.0 } else { cdf((c[j] + c[j + 1]) / 2.0) };
                mass.push((hi - lo).max(0.0));
            }
            if mass.iter().sum::<f64>() <= 0.0 {
                return Ok(Categorical::one_hot(n, grid.nearest(mean)));
            }
            normalize(&mass)
        }
    }
}

/// Row-major shape of a conditional table: one outcome axis plus any number
/// of condition axes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableShape {
    pub outcomes: usize,
    pub conditions: Vec<usize>,
}

impl TableShape {
    pub fn new(outcomes: usize, conditions: &[usize]) -> Self {
        Self {
            outcomes,
            conditions: conditions.to_vec(),
        }
    }

    pub fn n_conditions(&self) -> usize {
        self.conditions.iter().product()
    }

    pub fn len(&self) -> usize {
        self.outcomes * self.n_conditions()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn condition_index(&self, cond: &[usize]) -> usize {
        debug_assert_eq!(cond.len(), self.conditions.len());
        cond.iter()
            .zip(&self.conditions)
            .fold(0, |acc, (c, n)| {
                debug_assert!(c < n);
                acc * n + c
            })
    }
}

impl std::fmt::Display for TableShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}", self.outcomes)?;
        for c in &self.conditions {
            write!(f, " x {c}")?;
        }
        write!(f, "]")
    }
}

/// A table whose every conditional slice is a probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTensor {
    shape: TableShape,
    data: Vec<f64>,
}

impl ConditionalTensor {
    pub fn new(shape: TableShape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape(shape.len(), data.len()));
        }
        let t = Self { shape, data };
        for c in 0..t.shape.n_conditions() {
            Categorical::new(t.slice(c).to_vec())?;
        }
        Ok(t)
    }

    /// Builds a table slice by slice from a closure over flat condition
    /// indices.
    pub fn from_slices<F>(shape: TableShape, mut slice: F) -> Result<Self>
    where
        F: FnMut(usize) -> Result<Categorical>,
    {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.n_conditions() {
            let cat = slice(c)?;
            if cat.len() != shape.outcomes {
                return Err(Error::shape(shape.outcomes, cat.len()));
            }
            data.extend_from_slice(cat.probs());
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn slice(&self, cond: usize) -> &[f64] {
        let n = self.shape.outcomes;
        &self.data[cond * n..(cond + 1) * n]
    }

    pub fn get(&self, outcome: usize, cond: &[usize]) -> f64 {
        self.data[self.shape.condition_index(cond) * self.shape.outcomes + outcome]
    }

    /// Largest deviation of any slice sum from one.
    pub fn max_slice_error(&self) -> f64 {
        (0..self.shape.n_conditions())
            .map(|c| (self.slice(c).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// How expected log-parameters are derived from Dirichlet counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectedLogRule {
    /// `psi(count) - psi(slice sum)`.
    #[default]
    Digamma,
    /// `ln(count / slice sum)`.
    PointEstimate,
}

/// Dirichlet concentration parameters over a conditional table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletCounts {
    shape: TableShape,
    counts: Vec<f64>,
}

impl DirichletCounts {
    pub fn new(shape: TableShape, counts: Vec<f64>) -> Result<Self> {
        if counts.len() != shape.len() {
            return Err(Error::shape(shape.len(), counts.len()));
        }
        if counts.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(Error::InvalidInput(
                "Dirichlet counts must be finite and > 0".into(),
            ));
        }
        Ok(Self { shape, counts })
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn slice(&self, cond: usize) -> &[f64] {
        let n = self.shape.outcomes;
        &self.counts[cond * n..(cond + 1) * n]
    }

    pub(crate) fn slice_mut(&mut self, cond: usize) -> &mut [f64] {
        let n = self.shape.outcomes;
        &mut self.counts[cond * n..(cond + 1) * n]
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn expectation(&self) -> ConditionalTensor {
        let n = self.shape.outcomes;
        let mut data = Vec::with_capacity(self.counts.len());
        for chunk in self.counts.chunks_exact(n) {
            let total: f64 = chunk.iter().sum();
            data.extend(chunk.iter().map(|c| c / total));
        }
        ConditionalTensor {
            shape: self.shape.clone(),
            data,
        }
    }

    pub fn expected_log(&self) -> Vec<f64> {
        self.expected_log_with(ExpectedLogRule::Digamma)
    }

    pub fn expected_log_with(&self, rule: ExpectedLogRule) -> Vec<f64> {
        let n = self.shape.outcomes;
        let mut out = Vec::with_capacity(self.counts.len());
        for chunk in self.counts.chunks_exact(n) {
            let total: f64 = chunk.iter().sum();
            match rule {
                ExpectedLogRule::Digamma => {
                    let psi_total = digamma(total);
                    out.extend(chunk.iter().map(|c| digamma(*c) - psi_total));
                }
                ExpectedLogRule::PointEstimate => {
                    out.extend(chunk.iter().map(|c| safe_ln(c / total)));
                }
            }
        }
        out
    }
}

#[inline]
pub fn digamma(x: f64) -> f64 {
    statrs::function::gamma::digamma(x)
}
