use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::SCHEMA_VERSION;

/// One agglomeration step. Leaves are nodes `0..n`; merge `i` creates node
/// `n + i`. `left < right`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    /// Validate a merge list: every node consumed once, sizes consistent,
    /// heights nondecreasing.
    pub fn new(n_leaves: usize, merges: Vec<Merge>) -> Result<Self, ClusterError> {
        let bad = |m: String| Err(ClusterError::InvalidDendrogram(m));
        if n_leaves > 0 && merges.len() != n_leaves - 1 {
            return bad(format!("{} merges for {n_leaves} leaves", merges.len()));
        }
        let mut size = vec![1usize; n_leaves];
        let mut used = vec![false; n_leaves + merges.len()];
        let mut last_height = f64::NEG_INFINITY;
        for (i, m) in merges.iter().enumerate() {
            let id = n_leaves + i;
            if m.left >= id || m.right >= id || m.left == m.right {
                return bad(format!(
                    "merge {i} references nodes {} and {}",
                    m.left, m.right
                ));
            }
            if used[m.left] || used[m.right] {
                return bad(format!("merge {i} reuses a consumed node"));
            }
            if m.size != size[m.left] + size[m.right] {
                return bad(format!(
                    "merge {i} has size {} but children sum differently",
                    m.size
                ));
            }
            if m.height < last_height || m.height.is_nan() {
                return bad(format!(
                    "merge {i} height {} below previous {last_height}",
                    m.height
                ));
            }
            used[m.left] = true;
            used[m.right] = true;
            size.push(m.size);
            last_height = m.height;
        }
        Ok(Self { n_leaves, merges })
    }

    pub(crate) fn from_parts_unchecked(n_leaves: usize, merges: Vec<Merge>) -> Self {
        Self { n_leaves, merges }
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn root(&self) -> usize {
        (self.n_leaves + self.merges.len()).saturating_sub(1)
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        node < self.n_leaves
    }

    pub fn merge_of(&self, node: usize) -> Option<&Merge> {
        node.checked_sub(self.n_leaves)
            .and_then(|i| self.merges.get(i))
    }

    pub fn size(&self, node: usize) -> usize {
        self.merge_of(node).map_or(1, |m| m.size)
    }

    pub fn height(&self, node: usize) -> f64 {
        self.merge_of(node).map_or(0.0, |m| m.height)
    }

    /// Leaf ids under `node`, ascending.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size(node));
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.merge_of(x) {
                Some(m) => {
                    stack.push(m.left);
                    stack.push(m.right);
                }
                None => out.push(x),
            }
        }
        out.sort_unstable();
        out
    }

    /// Split the subtree at `node` into `k` clusters by undoing its `k - 1`
    /// highest merges. Returns the cluster root nodes ordered by smallest leaf.
    pub fn cut_node(&self, node: usize, k: usize) -> Result<Vec<usize>, ClusterError> {
        let available = self.size(node);
        if k == 0 || k > available {
            return Err(ClusterError::InvalidCandidateRange(format!(
                "cannot cut a subtree of {available} leaves into {k} clusters"
            )));
        }
        let mut roots = vec![node];
        while roots.len() < k {
            let (pos, _) = roots
                .iter()
                .enumerate()
                .filter(|(_, &r)| !self.is_leaf(r))
                .max_by_key(|(_, &r)| r)
                .expect("enough leaves checked above");
            let m = self.merge_of(roots[pos]).copied().unwrap();
            roots.swap_remove(pos);
            roots.push(m.left);
            roots.push(m.right);
        }
        let mut keyed: Vec<(usize, usize)> =
            roots.into_iter().map(|r| (self.min_leaf(r), r)).collect();
        keyed.sort_unstable();
        Ok(keyed.into_iter().map(|(_, r)| r).collect())
    }

    fn min_leaf(&self, node: usize) -> usize {
        let mut best = usize::MAX;
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.merge_of(x) {
                Some(m) => {
                    stack.push(m.left);
                    stack.push(m.right);
                }
                None => best = best.min(x),
            }
        }
        best
    }

    /// Flat labels (cluster index per leaf) for a `k`-cluster cut of the whole tree.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>, ClusterError> {
        if self.n_leaves == 0 {
            return Ok(Vec::new());
        }
        let mut labels = vec![0; self.n_leaves];
        for (c, root) in self.cut_node(self.root(), k)?.into_iter().enumerate() {
            for leaf in self.leaves(root) {
                labels[leaf] = c;
            }
        }
        Ok(labels)
    }

    pub fn to_doc(&self) -> DendrogramDoc {
        DendrogramDoc {
            schema_version: SCHEMA_VERSION,
            n_leaves: self.n_leaves,
            merges: self.merges.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DendrogramDoc {
    pub schema_version: u32,
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

impl DendrogramDoc {
    pub fn into_dendrogram(self) -> Result<Dendrogram, ClusterError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ClusterError::InvalidDendrogram(format!(
                "schema_version {} unsupported",
                self.schema_version
            )));
        }
        Dendrogram::new(self.n_leaves, self.merges)
    }
}
