//! Positive/negative point labels derived from proxy values.

use alloc::vec::Vec;

use crate::proxy::{ProxyKind, ProxyValues};
use crate::{Error, Result};

const KMEANS_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    Positive,
    Negative,
}

/// Which points the consolidation should emphasize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "lowercase")
)]
pub enum Criterion {
    Sharp,
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointLabels {
    labels: Vec<Label>,
    criterion: Criterion,
    positive_count: usize,
}

impl PointLabels {
    /// Builds labels from positive flags. Both classes must be non-empty.
    pub fn from_flags(flags: impl IntoIterator<Item = bool>, criterion: Criterion) -> Result<Self> {
        let labels: Vec<Label> = flags
            .into_iter()
            .map(|p| if p { Label::Positive } else { Label::Negative })
            .collect();
        let positive_count = labels.iter().filter(|l| **l == Label::Positive).count();
        if positive_count == 0 || positive_count == labels.len() {
            return Err(Error::DegenerateLabeling);
        }
        Ok(PointLabels {
            labels,
            criterion,
            positive_count,
        })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn positive_count(&self) -> usize {
        self.positive_count
    }

    pub fn negative_count(&self) -> usize {
        self.labels.len() - self.positive_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn is_positive(&self, i: usize) -> bool {
        self.labels[i] == Label::Positive
    }

    pub fn positive_fraction(&self) -> f64 {
        self.positive_count as f64 / self.labels.len() as f64
    }
}

/// Mean threshold: for `Sharp` positive iff strictly above the mean, for
/// `Sparse` positive iff strictly below it.
pub fn label_by_threshold(proxy: &ProxyValues, criterion: Criterion) -> Result<PointLabels> {
    if proxy.values.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mean = proxy.values.iter().sum::<f64>() / proxy.values.len() as f64;
    let flags = proxy.values.iter().map(|&v| match criterion {
        Criterion::Sharp => v > mean,
        Criterion::Sparse => v < mean,
    });
    PointLabels::from_flags(flags, criterion)
}

/// Sharp labels: curvature above the mean curvature.
pub fn label_by_curvature(proxy: &ProxyValues) -> Result<PointLabels> {
    if proxy.kind != ProxyKind::Curvature {
        return Err(Error::WrongProxyKind {
            expected: ProxyKind::Curvature,
            got: proxy.kind,
        });
    }
    label_by_threshold(proxy, Criterion::Sharp)
}

/// Result of one-dimensional k-means.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeans1d {
    /// Ascending.
    pub centers: Vec<f64>,
    /// Cluster index into `centers` for each input value.
    pub assignment: Vec<usize>,
    pub iterations: usize,
}

/// Lloyd's algorithm on scalars with deterministic quantile initialization.
///
/// Centers start at the sorted values at positions `floor((i + 0.5) n / k)`.
/// The `seed` is accepted for interface stability; initialization is deterministic.
pub fn kmeans_1d(values: &[f64], k: usize, _seed: u64) -> Result<KMeans1d> {
    if k == 0 {
        return Err(Error::InvalidConfig("k-means needs k >= 1"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let distinct = {
        let mut d = sorted.clone();
        d.dedup();
        d.len()
    };
    if distinct < k {
        return Err(Error::TooFewDistinctValues {
            needed: k,
            got: distinct,
        });
    }
    let n = sorted.len();
    let mut centers: Vec<f64> = (0..k)
        .map(|i| sorted[((2 * i + 1) * n) / (2 * k)])
        .collect();
    // Quantiles coincide when values repeat; fall back to quantiles of the distinct values.
    dedup_initial_centers(&sorted, &mut centers);

    let mut assignment = alloc::vec![usize::MAX; values.len()];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITERATIONS {
        iterations += 1;
        let mut changed = false;
        for (slot, &v) in assignment.iter_mut().zip(values) {
            let c = nearest_center(&centers, v);
            if *slot != c {
                *slot = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = alloc::vec![0.0; k];
        let mut counts = alloc::vec![0usize; k];
        for (&c, &v) in assignment.iter().zip(values) {
            sums[c] += v;
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c] / counts[c] as f64;
            }
        }
    }

    // Centers stay ordered under Lloyd updates in 1D, but sort defensively
    // against equal centers and remap the assignment.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]).then(a.cmp(&b)));
    let mut rank = alloc::vec![0usize; k];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    Ok(KMeans1d {
        centers: order.iter().map(|&c| centers[c]).collect(),
        assignment: assignment.iter().map(|&c| rank[c]).collect(),
        iterations,
    })
}

fn dedup_initial_centers(sorted_values: &[f64], centers: &mut [f64]) {
    if centers.windows(2).all(|w| w[0] < w[1]) {
        return;
    }
    let mut distinct = sorted_values.to_vec();
    distinct.dedup();
    let (d, k) = (distinct.len(), centers.len());
    for (i, c) in centers.iter_mut().enumerate() {
        *c = distinct[((2 * i + 1) * d) / (2 * k)];
    }
}

#[inline]
fn nearest_center(centers: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut best_d = (v - centers[0]).abs();
    for (c, &center) in centers.iter().enumerate().skip(1) {
        let d = (v - center).abs();
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Sparse labels: points in the lowest-density cluster of a 3-means clustering.
pub fn label_by_density_kmeans(proxy: &ProxyValues, seed: u64) -> Result<PointLabels> {
    if proxy.kind != ProxyKind::Density {
        return Err(Error::WrongProxyKind {
            expected: ProxyKind::Density,
            got: proxy.kind,
        });
    }
    label_by_kmeans(proxy, Criterion::Sparse, seed)
}

/// 3-means labeling: `Sparse` takes the lowest cluster, `Sharp` the highest.
pub fn label_by_kmeans(
    proxy: &ProxyValues,
    criterion: Criterion,
    seed: u64,
) -> Result<PointLabels> {
    let clusters = kmeans_1d(&proxy.values, 3, seed)?;
    let positive_cluster = match criterion {
        Criterion::Sparse => 0,
        Criterion::Sharp => clusters.centers.len() - 1,
    };
    PointLabels::from_flags(
        clusters.assignment.iter().map(|&c| c == positive_cluster),
        criterion,
    )
}
