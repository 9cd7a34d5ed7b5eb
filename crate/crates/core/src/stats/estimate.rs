use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::parallel::replicate;
use crate::rng::Stream;

pub const DEFAULT_CONFIDENCE: f64 = 0.99;

/// Two-sided standard-normal quantile for the given confidence level.
pub fn z_quantile(confidence: f64) -> f64 {
    let c = confidence.clamp(1e-12, 1.0 - 1e-16);
    Normal::standard().inverse_cdf(1.0 - (1.0 - c) / 2.0)
}

/// Neumaier-compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Streaming mean/variance accumulator (Welford) with exact pairwise merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &Welford) -> Welford {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2
            + other.m2
            + delta * delta * self.count as f64 * other.count as f64 / count as f64;
        Welford { count, mean, m2 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

const CHUNK: usize = 1024;

/// Reduces values with a fixed-shape tree: sequential Welford within chunks
/// of 1024, then pairwise merging. The shape depends only on the length.
pub fn welford_tree(values: &[f64]) -> Welford {
    let mut level: Vec<Welford> = values
        .chunks(CHUNK)
        .map(|c| {
            let mut w = Welford::new();
            c.iter().for_each(|&x| w.push(x));
            w
        })
        .collect();
    if level.is_empty() {
        return Welford::new();
    }
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|p| if p.len() == 2 { p[0].merge(&p[1]) } else { p[0] })
            .collect();
    }
    level[0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: f64,
    pub stderr: f64,
    pub n: u64,
    pub ci: (f64, f64),
    pub seed: u64,
    pub law_id: String,
    pub tag: String,
}

impl EstimateReport {
    pub fn from_values(values: &[f64], confidence: f64, seed: u64, law_id: &str, tag: &str) -> Self {
        Self::from_welford(&welford_tree(values), confidence, seed, law_id, tag)
    }

    pub fn from_welford(w: &Welford, confidence: f64, seed: u64, law_id: &str, tag: &str) -> Self {
        let se = w.stderr();
        let half = z_quantile(confidence) * se;
        EstimateReport {
            estimate: w.mean,
            stderr: se,
            n: w.count,
            ci: (w.mean - half, w.mean + half),
            seed,
            law_id: law_id.to_string(),
            tag: tag.to_string(),
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.ci.0 <= value && value <= self.ci.1
    }

    /// `|estimate - target| <= k * stderr`.
    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        (self.estimate - target).abs() <= k * self.stderr
    }
}

/// Monte Carlo mean of `sampler(i, stream_i)` over `reps` replicates.
///
/// Replicate `i` draws from `Stream::for_tag(seed, tag).fork(i)`, so the
/// report is reproducible from `(seed, law_id, reps, tag)`.
pub fn mc_mean<F>(sampler: F, reps: usize, seed: u64, law_id: &str, tag: &str, confidence: f64) -> EstimateReport
where
    F: Fn(usize, &mut Stream) -> f64 + Sync + Send,
{
    assert!(reps >= 2, "mc_mean needs at least two replicates");
    let base = Stream::for_tag(seed, tag);
    let values = replicate(reps, &base, sampler);
    EstimateReport::from_values(&values, confidence, seed, law_id, tag)
}

/// Difference of two independent estimates, with the combined standard error.
pub fn combined_sigma(a: &EstimateReport, b: &EstimateReport) -> f64 {
    (a.stderr * a.stderr + b.stderr * b.stderr).sqrt()
}
