//! Finite categorical distributions and the information-theoretic quantities
//! built on them (entropy, KL divergence, log-sum-exp).

use serde::{Deserialize, Serialize};

use crate::error::DistributionError;

/// Normalization tolerance guaranteed by every constructed [`Categorical`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Inputs summing to within this distance of one are accepted and renormalized.
pub const ACCEPT_TOLERANCE: f64 = 1e-9;

/// A probability vector over a finite outcome set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    /// Builds a distribution from probabilities that already sum to one
    /// (within [`ACCEPT_TOLERANCE`]). The stored vector is renormalized so that
    /// it sums to one within [`NORMALIZATION_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(DistributionError::NonFinite { index: i });
            }
            if p < 0.0 {
                return Err(DistributionError::Negative { index: i, value: p });
            }
        }
        let sum = pairwise_sum(&probs);
        if (sum - 1.0).abs() > ACCEPT_TOLERANCE {
            return Err(DistributionError::NotNormalized { sum });
        }
        Ok(Self::renormalized(probs, sum))
    }

    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, DistributionError> {
        if weights.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(DistributionError::NonFinite { index: i });
            }
            if w < 0.0 {
                return Err(DistributionError::Negative { index: i, value: w });
            }
        }
        let sum = pairwise_sum(&weights);
        if sum <= 0.0 {
            return Err(DistributionError::ZeroMass);
        }
        Ok(Self::renormalized(weights, sum))
    }

    /// Softmax of unnormalized log weights. Entries equal to `-inf` get zero mass.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<Self, DistributionError> {
        if log_weights.is_empty() {
            return Err(DistributionError::Empty);
        }
        if let Some(i) = log_weights.iter().position(|x| x.is_nan() || *x == f64::INFINITY) {
            return Err(DistributionError::NonFinite { index: i });
        }
        let lse = log_sum_exp(log_weights);
        if lse == f64::NEG_INFINITY {
            return Err(DistributionError::ZeroMass);
        }
        let weights: Vec<f64> = log_weights.iter().map(|&l| (l - lse).exp()).collect();
        Self::from_weights(weights)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution over an empty set");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass on `index`.
    pub fn dirac(n: usize, index: usize) -> Self {
        assert!(index < n, "dirac index {index} out of range for {n} outcomes");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { probs }
    }

    fn renormalized(mut probs: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            for p in &mut probs {
                *p /= sum;
            }
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn sum(&self) -> f64 {
        pairwise_sum(&self.probs)
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    /// `KL[self || other]` in nats; `+inf` when `self` puts mass where `other` has none.
    pub fn kl_divergence(&self, other: &Categorical) -> f64 {
        kl_divergence(&self.probs, &other.probs)
    }

    pub fn expectation(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.probs.len());
        let terms: Vec<f64> = self
            .probs
            .iter()
            .zip(values)
            .map(|(&p, &v)| if p == 0.0 { 0.0 } else { p * v })
            .collect();
        pairwise_sum(&terms)
    }

    /// Index of the largest probability. Entries within `tie_tolerance` of the
    /// maximum count as ties and the lowest such index wins.
    pub fn argmax(&self, tie_tolerance: f64) -> usize {
        let max = self.probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.probs
            .iter()
            .position(|&p| p >= max - tie_tolerance)
            .expect("non-empty distribution")
    }

    /// Inverse-CDF lookup of a uniform draw `u` in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > 0.0 {
                last_positive = i;
                acc += p;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = DistributionError;

    fn try_from(probs: Vec<f64>) -> Result<Self, Self::Error> {
        Categorical::new(probs)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Self {
        c.probs
    }
}

impl AsRef<[f64]> for Categorical {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

/// Sum in a fixed pairwise order so results do not depend on how callers
/// partition work.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (lo, hi) = xs.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let terms: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    max + pairwise_sum(&terms).ln()
}

pub fn entropy(probs: &[f64]) -> f64 {
    let terms: Vec<f64> = probs
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .collect();
    pairwise_sum(&terms)
}

pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut terms = Vec::with_capacity(p.len());
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        terms.push(pi * (pi.ln() - qi.ln()));
    }
    pairwise_sum(&terms)
}
