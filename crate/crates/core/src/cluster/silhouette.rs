use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Points;
use crate::util::euclidean;

/// Silhouette of one point from its mean distances: `a` to its own cluster,
/// `b` to the nearest other cluster.
pub fn silhouette_from(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m > 0.0 {
        ((b - a) / m).clamp(-1.0, 1.0)
    } else {
        0.0
    }
}

/// Exact per-point silhouettes for a flat labeling. Points in singleton
/// clusters score 0. Returns `None` when fewer than two clusters are present.
pub fn silhouette(points: &Points, labels: &[usize]) -> Option<Vec<f64>> {
    assert_eq!(points.len(), labels.len());
    let all: Vec<usize> = (0..points.len()).collect();
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let sums = distance_sums(points, &all, labels, k);
    let sizes = counts(labels, &all, k);
    if sizes.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    Some(
        (0..points.len())
            .map(|i| point_silhouette(&sums[i * k..(i + 1) * k], &sizes, labels[i]))
            .collect(),
    )
}

fn counts(labels: &[usize], members: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    for &m in members {
        c[labels[m]] += 1;
    }
    c
}

/// For each member, summed distances to the other members of each cluster,
/// laid out row-major as `members.len() × k`.
fn distance_sums(points: &Points, members: &[usize], labels: &[usize], k: usize) -> Vec<f64> {
    let m = members.len();
    let mut sums = vec![0.0; m * k];
    for a in 0..m {
        let pa = points.row(members[a]);
        let la = labels[members[a]];
        for b in a + 1..m {
            let d = euclidean(pa, points.row(members[b]));
            sums[a * k + labels[members[b]]] += d;
            sums[b * k + la] += d;
        }
    }
    sums
}

fn point_silhouette(sums: &[f64], sizes: &[usize], own: usize) -> f64 {
    if sizes[own] <= 1 {
        return 0.0;
    }
    let a = sums[own] / (sizes[own] - 1) as f64;
    let b = (0..sizes.len())
        .filter(|&c| c != own && sizes[c] > 0)
        .map(|c| sums[c] / sizes[c] as f64)
        .fold(f64::INFINITY, f64::min);
    if b.is_infinite() {
        return 0.0;
    }
    silhouette_from(a, b)
}

/// How a set of nested candidate cuts is scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SilhouetteSampling {
    /// Up to this many points are scored exactly.
    pub exact_limit: usize,
    /// Sample size used above `exact_limit`.
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for SilhouetteSampling {
    fn default() -> Self {
        Self {
            exact_limit: 20_000,
            sample_size: 10_000,
            seed: 0x5eed,
        }
    }
}

/// Scores for a family of nested cuts over `members`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct NestedScores {
    /// Indices (into `members`) of the points that were scored.
    pub evaluated: Vec<usize>,
    /// Per cut: per-point silhouettes aligned with `evaluated`.
    pub values: Vec<Vec<f64>>,
    pub sampled: bool,
}

/// Score several nested partitions of `members` at once.
///
/// `fine` labels each member with a cluster of the finest cut; `coarse[c]`
/// maps fine clusters to the clusters of cut `c`. Distances are accumulated
/// once against the fine clusters and summed up for the coarser cuts.
pub(crate) fn nested_silhouettes(
    points: &Points,
    members: &[usize],
    fine: &[usize],
    coarse: &[Vec<usize>],
    sampling: SilhouetteSampling,
) -> NestedScores {
    let k_fine = fine.iter().max().map_or(0, |m| m + 1);
    let sampled = members.len() > sampling.exact_limit;
    let evaluated = if sampled {
        stratified_sample(fine, k_fine, sampling.sample_size, sampling.seed)
    } else {
        (0..members.len()).collect()
    };

    // work in local indices over a compact copy of the evaluated points
    let local = points.subset(&evaluated.iter().map(|&e| members[e]).collect::<Vec<_>>());
    let labels: Vec<usize> = evaluated.iter().map(|&e| fine[e]).collect();
    let idx: Vec<usize> = (0..evaluated.len()).collect();
    let sums = distance_sums(&local, &idx, &labels, k_fine);
    let fine_sizes = counts(&labels, &idx, k_fine);

    let values = coarse
        .iter()
        .map(|map| {
            let kc = map.iter().max().map_or(0, |m| m + 1);
            let mut sizes = vec![0usize; kc];
            for (f, &c) in map.iter().enumerate() {
                sizes[c] += fine_sizes[f];
            }
            let mut agg = vec![0.0; kc];
            idx.iter()
                .map(|&i| {
                    agg.iter_mut().for_each(|x| *x = 0.0);
                    for (f, &c) in map.iter().enumerate() {
                        agg[c] += sums[i * k_fine + f];
                    }
                    point_silhouette(&agg, &sizes, map[labels[i]])
                })
                .collect()
        })
        .collect();
    NestedScores {
        evaluated,
        values,
        sampled,
    }
}

/// Seeded sample of `size` indices, allocated to clusters proportionally
/// (largest remainder) so every nonempty cluster keeps at least one point.
fn stratified_sample(labels: &[usize], k: usize, size: usize, seed: u64) -> Vec<usize> {
    let mut by_cluster: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        by_cluster[l].push(i);
    }
    let n = labels.len();
    let size = size.clamp(k.min(n), n);
    let mut quota: Vec<usize> = by_cluster
        .iter()
        .map(|m| {
            if m.is_empty() {
                0
            } else {
                (m.len() * size / n).max(1)
            }
        })
        .collect();
    let mut remainders: Vec<(usize, usize)> = by_cluster
        .iter()
        .enumerate()
        .map(|(c, m)| ((m.len() * size) % n, c))
        .collect();
    remainders.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut total: usize = quota.iter().sum();
    for &(_, c) in remainders.iter().cycle().take(k * 2) {
        if total >= size {
            break;
        }
        if quota[c] < by_cluster[c].len() {
            quota[c] += 1;
            total += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(total);
    for (c, members) in by_cluster.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        out.extend_from_slice(&members[..quota[c].min(members.len())]);
    }
    out.sort_unstable();
    out
}
