//! Average-linkage agglomerative clustering over condensed distance
//! matrices, with cophenetic distances, leaf ordering, flat cuts and Newick
//! output.

use thiserror::Error;

use crate::ingest::TradeNetwork;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 countries, got {0}")]
    TooFewCountries(usize),
    #[error("need at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("invalid distances: {0}")]
    InvalidDistances(String),
    #[error("invalid dendrogram: {0}")]
    InvalidDendrogram(String),
    #[error("label {0:?} is empty or contains Newick metacharacters")]
    BadLabel(String),
    #[error("{labels} labels for {leaves} leaves")]
    LabelCountMismatch { labels: usize, leaves: usize },
    #[error("cluster count {k} outside 1..={n}")]
    BadK { k: usize, n: usize },
}

/// Upper triangle of a symmetric `n × n` distance matrix, row-major over
/// pairs `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedDistances {
    n: usize,
    values: Vec<f64>,
}

#[inline]
fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

impl CondensedDistances {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, ClusterError> {
        if values.len() != pair_count(n) {
            return Err(ClusterError::InvalidDistances(format!(
                "{} values for n = {n}, expected {}",
                values.len(),
                pair_count(n)
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(ClusterError::InvalidDistances(format!("entry {bad}")));
        }
        Ok(CondensedDistances { n, values })
    }

    /// Builds from a pair function evaluated for every `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, ClusterError> {
        let mut values = Vec::with_capacity(pair_count(n));
        for i in 0..n {
            for j in (i + 1)..n {
                values.push(f(i, j));
            }
        }
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.n);
        i * self.n - i * (i + 1) / 2 + (j - i - 1)
    }

    /// Distance between items `i` and `j`; zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Less => self.values[self.index(i, j)],
            std::cmp::Ordering::Greater => self.values[self.index(j, i)],
            std::cmp::Ordering::Equal => 0.0,
        }
    }
}

/// `d_ij = M* − M_ij`, with `M*` the largest off-diagonal weight of this network.
pub fn distances_from_network(net: &TradeNetwork) -> Result<CondensedDistances, ClusterError> {
    let n = net.len();
    if n < 2 {
        return Err(ClusterError::TooFewCountries(n));
    }
    let m_star = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| net.weight(i, j))
        .fold(f64::NEG_INFINITY, f64::max);
    CondensedDistances::from_fn(n, |i, j| m_star - net.weight(i, j))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Number of leaves under the merged node.
    pub size: usize,
}

/// Stepwise dendrogram. Leaves are nodes `0..n`; merge `k` creates node `n + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    /// Validates and wraps a merge list.
    pub fn new(n_leaves: usize, merges: Vec<Merge>) -> Result<Self, ClusterError> {
        let invalid = |msg: String| Err(ClusterError::InvalidDendrogram(msg));
        if n_leaves < 2 {
            return Err(ClusterError::TooFewItems(n_leaves));
        }
        if merges.len() != n_leaves - 1 {
            return invalid(format!("{} merges for {n_leaves} leaves", merges.len()));
        }
        let total = 2 * n_leaves - 1;
        let mut size = vec![0usize; total];
        size[..n_leaves].fill(1);
        let mut used = vec![false; total];
        let mut prev_height = 0.0;
        for (k, m) in merges.iter().enumerate() {
            let node = n_leaves + k;
            for child in [m.left, m.right] {
                if child >= node {
                    return invalid(format!(
                        "merge {k} references node {child} before it exists"
                    ));
                }
                if std::mem::replace(&mut used[child], true) {
                    return invalid(format!("node {child} merged twice"));
                }
            }
            if m.left == m.right {
                return invalid(format!("merge {k} joins node {} with itself", m.left));
            }
            if !m.height.is_finite() || m.height < prev_height {
                return invalid(format!("merge {k} height {} breaks monotonicity", m.height));
            }
            if m.size != size[m.left] + size[m.right] {
                return invalid(format!("merge {k} size {} inconsistent", m.size));
            }
            size[node] = m.size;
            prev_height = m.height;
        }
        Ok(Dendrogram { n_leaves, merges })
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    fn root(&self) -> usize {
        2 * self.n_leaves - 2
    }

    fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.n_leaves)
            .map(|k| (self.merges[k].left, self.merges[k].right))
    }

    fn node_height(&self, node: usize) -> f64 {
        node.checked_sub(self.n_leaves)
            .map_or(0.0, |k| self.merges[k].height)
    }

    /// Smallest leaf index under each node.
    fn min_leaf(&self) -> Vec<usize> {
        let mut min_leaf: Vec<usize> = (0..self.n_leaves).collect();
        for m in &self.merges {
            min_leaf.push(min_leaf[m.left].min(min_leaf[m.right]));
        }
        min_leaf
    }

    /// Children of `node` ordered by their smallest leaf index.
    fn ordered_children(&self, node: usize, min_leaf: &[usize]) -> Option<(usize, usize)> {
        self.children(node).map(|(a, b)| {
            if min_leaf[a] <= min_leaf[b] {
                (a, b)
            } else {
                (b, a)
            }
        })
    }
}

/// Unweighted average linkage (UPGMA).
///
/// At each step the active pair with the smallest inter-cluster distance is
/// merged; exact ties go to the lexicographically smallest `(left, right)`
/// node-id pair with `left < right`. Cluster distances are updated with the
/// size-weighted Lance–Williams rule.
pub fn average_linkage(d: &CondensedDistances) -> Result<Dendrogram, ClusterError> {
    let n = d.n();
    if n < 2 {
        return Err(ClusterError::TooFewItems(n));
    }
    // Working matrix over slots; a merged cluster reuses the lower slot.
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            dist[i * n + j] = d.get(i, j);
            dist[j * n + i] = d.get(i, j);
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut node_id: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - 1);

    for k in 0..(n - 1) {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[(ai + 1)..] {
                let h = dist[a * n + b];
                let (lo, hi) = if node_id[a] < node_id[b] {
                    (node_id[a], node_id[b])
                } else {
                    (node_id[b], node_id[a])
                };
                let better = match best {
                    None => true,
                    Some((bh, blo, bhi, _, _)) => h < bh || (h == bh && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((h, lo, hi, a, b));
                }
            }
        }
        let (height, left, right, a, b) = best.expect("at least two active clusters");
        let (sa, sb) = (size[a], size[b]);
        merges.push(Merge {
            left,
            right,
            height,
            size: sa + sb,
        });

        let (wa, wb) = (sa as f64, sb as f64);
        for &w in &active {
            if w == a || w == b {
                continue;
            }
            let (x, y) = (dist[a * n + w], dist[b * n + w]);
            // Rounding must not push the average outside its operands, or
            // merge heights could invert.
            let avg = ((wa * x + wb * y) / (wa + wb)).clamp(x.min(y), x.max(y));
            dist[a * n + w] = avg;
            dist[w * n + a] = avg;
        }
        active.retain(|&s| s != b);
        node_id[a] = n + k;
        size[a] = sa + sb;
    }
    Ok(Dendrogram {
        n_leaves: n,
        merges,
    })
}

/// Cophenetic distances: `c_ij` is the height of the lowest merge joining
/// `i` and `j`.
pub fn cophenetic(dend: &Dendrogram) -> CondensedDistances {
    let n = dend.n_leaves();
    let mut values = vec![0.0; pair_count(n)];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let idx = |i: usize, j: usize| {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * n - i * (i + 1) / 2 + (j - i - 1)
    };
    for m in dend.merges() {
        let left = std::mem::take(&mut members[m.left]);
        let right = std::mem::take(&mut members[m.right]);
        for &i in &left {
            for &j in &right {
                values[idx(i, j)] = m.height;
            }
        }
        let mut joined = left;
        joined.extend(right);
        members.push(joined);
    }
    CondensedDistances { n, values }
}

/// Depth-first leaf order from the root; at every merge the child holding
/// the smaller leaf index is visited first.
pub fn leaf_order(dend: &Dendrogram) -> Vec<usize> {
    let min_leaf = dend.min_leaf();
    let mut order = Vec::with_capacity(dend.n_leaves());
    let mut stack = vec![dend.root()];
    while let Some(node) = stack.pop() {
        match dend.ordered_children(node, &min_leaf) {
            Some((first, second)) => {
                stack.push(second);
                stack.push(first);
            }
            None => order.push(node),
        }
    }
    order
}

fn valid_label(label: &str) -> bool {
    !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || "(),:;[]'".contains(c))
}

/// Rooted Newick serialization whose leaf-to-leaf path lengths equal the
/// cophenetic distances. A child's branch length is half the height gap to
/// its parent.
pub fn to_newick<S: AsRef<str>>(dend: &Dendrogram, labels: &[S]) -> Result<String, ClusterError> {
    to_newick_with(dend, labels, |x| x.to_string())
}

/// [`to_newick`] with a caller-chosen rendering of branch lengths.
pub fn to_newick_with<S: AsRef<str>>(
    dend: &Dendrogram,
    labels: &[S],
    length: impl Fn(f64) -> String,
) -> Result<String, ClusterError> {
    if labels.len() != dend.n_leaves() {
        return Err(ClusterError::LabelCountMismatch {
            labels: labels.len(),
            leaves: dend.n_leaves(),
        });
    }
    if let Some(bad) = labels.iter().map(AsRef::as_ref).find(|l| !valid_label(l)) {
        return Err(ClusterError::BadLabel(bad.to_owned()));
    }
    let min_leaf = dend.min_leaf();
    let mut out = String::new();
    write_subtree(dend, labels, &min_leaf, dend.root(), &length, &mut out);
    out.push(';');
    Ok(out)
}

fn write_subtree<S: AsRef<str>>(
    dend: &Dendrogram,
    labels: &[S],
    min_leaf: &[usize],
    node: usize,
    length: &impl Fn(f64) -> String,
    out: &mut String,
) {
    match dend.ordered_children(node, min_leaf) {
        None => out.push_str(labels[node].as_ref()),
        Some((first, second)) => {
            let parent = dend.node_height(node);
            out.push('(');
            for (i, child) in [first, second].into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_subtree(dend, labels, min_leaf, child, length, out);
                out.push(':');
                out.push_str(&length((parent - dend.node_height(child)) / 2.0));
            }
            out.push(')');
        }
    }
}

/// Flat clustering into `k` groups by undoing the last `k − 1` merges.
/// Returns a 1-based cluster label per leaf; labels are numbered in
/// [`leaf_order`] of first appearance.
pub fn cut_at_count(dend: &Dendrogram, k: usize) -> Result<Vec<usize>, ClusterError> {
    let n = dend.n_leaves();
    if k == 0 || k > n {
        return Err(ClusterError::BadK { k, n });
    }
    // Component representative per node after applying the first n − k merges.
    let mut rep: Vec<usize> = (0..n).collect();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for m in &dend.merges()[..(n - k)] {
        let mut joined = std::mem::take(&mut members[m.left]);
        joined.extend(std::mem::take(&mut members[m.right]));
        members.push(joined);
    }
    for (node, leaves) in members.iter().enumerate() {
        for &leaf in leaves {
            rep[leaf] = node;
        }
    }
    let mut label_of_rep = std::collections::HashMap::new();
    let mut labels = vec![0usize; n];
    for leaf in leaf_order(dend) {
        let next = label_of_rep.len() + 1;
        labels[leaf] = *label_of_rep.entry(rep[leaf]).or_insert(next);
    }
    Ok(labels)
}
