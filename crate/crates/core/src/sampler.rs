//! Source/target subset selection.
//!
//! Targets are drawn with a high probability of positive points and sources
//! with a low one. Both are drawn without replacement from shared per-class
//! pools, so a pair is disjoint by construction.

use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::labeling::PointLabels;
use crate::{Error, Result};

/// Clouds below this size use uniform subsets by default.
pub const LOW_RESOLUTION_POINTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerConfig {
    /// Probability that a source draw is taken from the positive class.
    pub p_source: f64,
    /// Probability that a target draw is taken from the positive class.
    pub p_target: f64,
    /// Subset size as a fraction of the cloud size.
    pub subset_fraction: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            p_source: 0.10,
            p_target: 0.85,
            subset_fraction: 0.08,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.p_source) || !unit.contains(&self.p_target) {
            return Err(Error::InvalidConfig(
                "sampling probabilities must lie in [0, 1]",
            ));
        }
        if self.p_source > self.p_target {
            return Err(Error::InvalidConfig("p_source must not exceed p_target"));
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 0.5) {
            return Err(Error::InvalidConfig("subset fraction must lie in (0, 0.5]"));
        }
        Ok(())
    }

    /// `m = round(subset_fraction * n)`, checked against `1 <= m` and `2m <= n`.
    pub fn subset_size(&self, n: usize) -> Result<usize> {
        self.validate()?;
        let m = (self.subset_fraction * n as f64).round() as usize;
        if m == 0 {
            return Err(Error::InvalidConfig(
                "subset fraction yields an empty subset",
            ));
        }
        if 2 * m > n {
            return Err(Error::SubsetTooLarge { m, n });
        }
        Ok(m)
    }
}

/// A disjoint pair of equally sized index subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetPair {
    pub source: Vec<usize>,
    pub target: Vec<usize>,
}

impl SubsetPair {
    pub fn new(source: Vec<usize>, target: Vec<usize>) -> Result<Self> {
        if source.len() != target.len() {
            return Err(Error::LengthMismatch {
                what: "source/target subsets",
                expected: target.len(),
                got: source.len(),
            });
        }
        let mut all: Vec<usize> = source.iter().chain(&target).copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(
                "source and target must be disjoint and duplicate-free",
            ));
        }
        Ok(SubsetPair { source, target })
    }

    pub fn m(&self) -> usize {
        self.source.len()
    }
}

/// Counts of draws that fell back to the other class because theirs ran out.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FallbackCount {
    pub target: usize,
    pub source: usize,
}

/// Seeded subset sampler. One instance per thread.
#[derive(Debug, Clone)]
pub struct Sampler {
    config: SamplerConfig,
    rng: ChaCha8Rng,
    fallbacks: FallbackCount,
}

impl Sampler {
    pub fn new(config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Sampler {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            fallbacks: FallbackCount::default(),
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Cumulative fallback counts over every pair drawn so far.
    pub fn fallbacks(&self) -> FallbackCount {
        self.fallbacks
    }

    /// A class-rebalanced disjoint pair of size `m` each.
    pub fn sample_pair(&mut self, labels: &PointLabels, m: usize) -> Result<SubsetPair> {
        let n = labels.len();
        if 2 * m > n {
            return Err(Error::SubsetTooLarge { m, n });
        }
        if labels.positive_count() == 0 {
            return Err(Error::EmptyClass { class: "positive" });
        }
        if labels.negative_count() == 0 {
            return Err(Error::EmptyClass { class: "negative" });
        }
        let (mut positive, mut negative): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| labels.is_positive(i));
        let mut pools = ClassPools {
            positive: &mut positive,
            negative: &mut negative,
        };
        let (target, target_fallbacks) = pools.draw(&mut self.rng, m, self.config.p_target);
        let (source, source_fallbacks) = pools.draw(&mut self.rng, m, self.config.p_source);
        self.fallbacks.target += target_fallbacks;
        self.fallbacks.source += source_fallbacks;
        Ok(SubsetPair { source, target })
    }

    /// A disjoint pair drawn uniformly, ignoring labels.
    pub fn uniform_pair(&mut self, n: usize, m: usize) -> Result<SubsetPair> {
        if 2 * m > n {
            return Err(Error::SubsetTooLarge { m, n });
        }
        let mut both = index::sample(&mut self.rng, n, 2 * m).into_vec();
        let source = both.split_off(m);
        Ok(SubsetPair {
            source,
            target: both,
        })
    }

    /// `m` distinct indices drawn uniformly from `0..n`.
    pub fn uniform_subset(&mut self, n: usize, m: usize) -> Result<Vec<usize>> {
        sample_uniform_subset(n, m, &mut self.rng)
    }

    /// `m` distinct indices with each draw positive with probability `p_positive`.
    pub fn rebalanced_subset(
        &mut self,
        labels: &PointLabels,
        m: usize,
        p_positive: f64,
    ) -> Result<Vec<usize>> {
        let n = labels.len();
        if m > n {
            return Err(Error::SubsetTooLarge { m, n });
        }
        let (mut positive, mut negative): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| labels.is_positive(i));
        let mut pools = ClassPools {
            positive: &mut positive,
            negative: &mut negative,
        };
        Ok(pools.draw(&mut self.rng, m, p_positive).0)
    }
}

/// `m` distinct indices drawn uniformly without replacement from `0..n`.
pub fn sample_uniform_subset<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::SubsetTooLarge { m, n });
    }
    Ok(index::sample(rng, n, m).into_vec())
}

struct ClassPools<'a> {
    positive: &'a mut Vec<usize>,
    negative: &'a mut Vec<usize>,
}

impl ClassPools<'_> {
    /// Draws `m` indices; each draw is positive with probability `p`.
    fn draw<R: Rng>(&mut self, rng: &mut R, m: usize, p: f64) -> (Vec<usize>, usize) {
        let mut out = Vec::with_capacity(m);
        let mut fallbacks = 0;
        for _ in 0..m {
            let want_positive = rng.random_bool(p);
            let (first, second) = if want_positive {
                (&mut *self.positive, &mut *self.negative)
            } else {
                (&mut *self.negative, &mut *self.positive)
            };
            let pool = if first.is_empty() {
                fallbacks += 1;
                second
            } else {
                first
            };
            // Callers guarantee enough points in total.
            let j = rng.random_range(0..pool.len());
            out.push(pool.swap_remove(j));
        }
        (out, fallbacks)
    }
}
