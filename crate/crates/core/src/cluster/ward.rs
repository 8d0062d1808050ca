//! Ward agglomeration by the nearest-neighbour chain.
//!
//! Clusters are tracked by centroid and size. The Ward dissimilarity between
//! clusters `a` and `b` is `nₐn_b/(nₐ+n_b)·‖cₐ−c_b‖²`, the increase in
//! within-cluster sum of squares caused by merging them. This equals what the
//! Lance–Williams recurrence produces from singleton dissimilarities
//! `‖x−y‖²/2`, without holding an n×n matrix.

use super::{Dendrogram, Merge, Points};

/// Ward dissimilarity of two clusters given their centroids and sizes.
pub fn ward_distance(ca: &[f64], na: usize, cb: &[f64], nb: usize) -> f64 {
    let (na, nb) = (na as f64, nb as f64);
    na * nb / (na + nb) * crate::util::squared_euclidean(ca, cb)
}

/// Cluster the rows of `points`. Fewer than two points gives an empty tree.
pub fn ward_cluster(points: &Points) -> Dendrogram {
    let n = points.len();
    let dim = points.dim();
    if n < 2 {
        return Dendrogram::from_parts_unchecked(n, Vec::new());
    }

    let mut centroid = points.as_slice().to_vec();
    let mut size = vec![1usize; n];
    let mut last_height = vec![0.0f64; n];
    let mut alive: Vec<usize> = (0..n).collect();
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    // (representative leaf a, representative leaf b, height), in discovery order
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);

    while alive.len() > 1 {
        if chain.is_empty() {
            chain.push(alive[0]);
        }
        let a = *chain.last().unwrap();
        let prev = chain.len().checked_sub(2).map(|i| chain[i]);
        let ca = &centroid[a * dim..(a + 1) * dim];
        // ties resolve toward the previous chain element, then the lowest slot
        let mut best = prev.map(|p| {
            (
                p,
                ward_distance(ca, size[a], &centroid[p * dim..(p + 1) * dim], size[p]),
            )
        });
        for &b in &alive {
            if b == a || Some(b) == prev {
                continue;
            }
            let d = ward_distance(ca, size[a], &centroid[b * dim..(b + 1) * dim], size[b]);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((b, d));
            }
        }
        let (b, d) = best.expect("at least two clusters alive");
        if Some(b) != prev {
            chain.push(b);
            continue;
        }
        chain.pop();
        chain.pop();

        let (keep, gone) = (a.min(b), a.max(b));
        let height = d.max(last_height[a]).max(last_height[b]);
        raw.push((keep, gone, height));
        let (nk, ng) = (size[keep] as f64, size[gone] as f64);
        for j in 0..dim {
            let merged =
                (nk * centroid[keep * dim + j] + ng * centroid[gone * dim + j]) / (nk + ng);
            centroid[keep * dim + j] = merged;
        }
        size[keep] += size[gone];
        last_height[keep] = height;
        alive.retain(|&x| x != gone);
    }

    // stable sort keeps children ahead of parents that tie with them
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&x, &y| raw[x].2.total_cmp(&raw[y].2));

    let mut parent: Vec<usize> = (0..n).collect();
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut node_size = vec![1usize; n];
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut merges = Vec::with_capacity(n - 1);
    for (i, &r) in order.iter().enumerate() {
        let (x, y, height) = raw[r];
        let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
        let (nx, ny) = (node_of[rx], node_of[ry]);
        let merged_size = node_size[rx] + node_size[ry];
        merges.push(Merge {
            left: nx.min(ny),
            right: nx.max(ny),
            height,
            size: merged_size,
        });
        let root = rx.min(ry);
        parent[rx.max(ry)] = root;
        node_of[root] = n + i;
        node_size[root] = merged_size;
    }
    Dendrogram::from_parts_unchecked(n, merges)
}
