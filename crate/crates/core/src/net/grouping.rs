//! Centroid selection, radius grouping and interpolation weights.
//!
//! Every choice here is made from coordinates alone (ties broken by the
//! lexicographic order of coordinates), never from input order, which keeps
//! the network permutation-equivariant.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::geometry::Vec3;

#[inline]
fn by_distance_then_coords(a: (f64, &Vec3), b: (f64, &Vec3)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.lex_cmp(b.1))
}

/// Farthest-point sampling of `count` indices into `points`.
///
/// Starts from the lexicographically smallest point; each step takes the point
/// farthest from the current selection, ties going to the smaller coordinates.
pub(crate) fn farthest_point_sample(points: &[Vec3], count: usize) -> Vec<usize> {
    let n = points.len();
    let count = count.min(n);
    let mut selected = Vec::with_capacity(count);
    if count == 0 {
        return selected;
    }
    let mut first = 0;
    for i in 1..n {
        if points[i].lex_cmp(&points[first]) == Ordering::Less {
            first = i;
        }
    }
    let mut min_dist = alloc::vec![f64::INFINITY; n];
    let mut current = first;
    for _ in 0..count {
        selected.push(current);
        let c = points[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, (p, md)) in points.iter().zip(min_dist.iter_mut()).enumerate() {
            let d = p.distance_squared(c);
            if d < *md {
                *md = d;
            }
            let better = best == usize::MAX
                || *md > best_d
                || (*md == best_d && p.lex_cmp(&points[best]) == Ordering::Less);
            if better {
                best = i;
                best_d = *md;
            }
        }
        current = best;
    }
    selected
}

/// For each centroid, the `group_size` nearest points within `radius`, nearest
/// first. Groups with fewer members are padded by repeating the nearest one
/// (the centroid itself when it belongs to `points`).
pub(crate) fn radius_groups(
    points: &[Vec3],
    centroids: &[Vec3],
    radius: f64,
    group_size: usize,
) -> Vec<usize> {
    let r2 = radius * radius;
    let mut out = Vec::with_capacity(centroids.len() * group_size);
    let mut cands: Vec<(f64, usize)> = Vec::new();
    for c in centroids {
        cands.clear();
        let mut nearest = (f64::INFINITY, 0usize);
        for (i, p) in points.iter().enumerate() {
            let d = p.distance_squared(*c);
            if d <= r2 {
                cands.push((d, i));
            }
            if by_distance_then_coords((d, p), (nearest.0, &points[nearest.1])) == Ordering::Less {
                nearest = (d, i);
            }
        }
        if cands.is_empty() {
            cands.push(nearest);
        }
        cands.sort_by(|a, b| by_distance_then_coords((a.0, &points[a.1]), (b.0, &points[b.1])));
        cands.truncate(group_size);
        let pad = cands[0].1;
        out.extend(cands.iter().map(|c| c.1));
        out.extend(core::iter::repeat_n(pad, group_size - cands.len()));
    }
    out
}

/// Inverse squared-distance weights of the (up to) three nearest sources.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Interp {
    pub idx: [usize; 3],
    pub weight: [f64; 3],
}

pub(crate) fn interpolation(targets: &[Vec3], sources: &[Vec3]) -> Vec<Interp> {
    let k = sources.len().min(3);
    targets
        .iter()
        .map(|t| {
            let mut best: [(f64, usize); 3] = [(f64::INFINITY, usize::MAX); 3];
            for (i, s) in sources.iter().enumerate() {
                let d = s.distance_squared(*t);
                let key = (d, i);
                let mut pos = k;
                while pos > 0 && less(key, best[pos - 1], sources) {
                    pos -= 1;
                }
                if pos < k {
                    for j in (pos + 1..k).rev() {
                        best[j] = best[j - 1];
                    }
                    best[pos] = key;
                }
            }
            let mut weight = [0.0; 3];
            let mut idx = [0usize; 3];
            let mut total = 0.0;
            for j in 0..k {
                idx[j] = best[j].1;
                weight[j] = 1.0 / (best[j].0 + 1e-8);
                total += weight[j];
            }
            for w in weight.iter_mut().take(k) {
                *w /= total;
            }
            Interp { idx, weight }
        })
        .collect()
}

#[inline]
fn less(a: (f64, usize), b: (f64, usize), sources: &[Vec3]) -> bool {
    if b.1 == usize::MAX {
        return true;
    }
    by_distance_then_coords((a.0, &sources[a.1]), (b.0, &sources[b.1])) == Ordering::Less
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn fps_picks_spread_points() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.5, 0.0, 0.0),
        ];
        assert_eq!(farthest_point_sample(&pts, 3), vec![0, 2, 3]);
    }

    #[test]
    fn fps_is_order_independent() {
        let pts = vec![
            Vec3::new(0.3, 0.2, 0.0),
            Vec3::new(-0.5, 0.1, 0.4),
            Vec3::new(0.9, -0.2, 0.1),
            Vec3::new(0.0, 0.7, -0.3),
            Vec3::new(-0.2, -0.6, 0.2),
        ];
        let perm = [3, 0, 4, 2, 1];
        let shuffled: Vec<Vec3> = perm.iter().map(|&i| pts[i]).collect();
        let a: Vec<Vec3> = farthest_point_sample(&pts, 3)
            .iter()
            .map(|&i| pts[i])
            .collect();
        let b: Vec<Vec3> = farthest_point_sample(&shuffled, 3)
            .iter()
            .map(|&i| shuffled[i])
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn groups_padded_with_nearest() {
        let pts = vec![
            Vec3::ZERO,
            Vec3::new(0.05, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
        ];
        let g = radius_groups(&pts, &[Vec3::ZERO], 0.1, 4);
        assert_eq!(g, vec![0, 1, 0, 0]);
    }

    #[test]
    fn interpolation_weights_sum_to_one() {
        let src = vec![Vec3::ZERO, Vec3::X, Vec3::Y, Vec3::Z];
        let w = interpolation(&[Vec3::new(0.2, 0.1, 0.0)], &src);
        let total: f64 = w[0].weight.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(w[0].idx[0], 0);
        let single = interpolation(&[Vec3::X], &src[..1]);
        assert_eq!(single[0].weight, [1.0, 0.0, 0.0]);
    }
}
