//! Level-wise exact-greedy tree growth shared by the forest and the booster.
//!
//! Columns are presorted once per training matrix. Each level makes one pass
//! over the sorted order of every feature that some open node considers,
//! accumulating left-hand statistics per node, so a split is found with an
//! exact scan over all distinct values.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;

/// Splits whose gain does not exceed this are not made.
pub const MIN_SPLIT_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split {
                feature,
                threshold,
                gain,
                ..
            } => Some((*feature, *threshold, *gain)),
            Node::Leaf { .. } => None,
        })
    }
}

/// Column-major copy of a matrix with every column's row order presorted.
pub struct ColumnStore {
    columns: Vec<Vec<f64>>,
    orders: Vec<Vec<u32>>,
    n_rows: usize,
}

impl ColumnStore {
    pub fn new(matrix: &FeatureMatrix) -> Self {
        let n_rows = matrix.n_rows();
        let columns: Vec<Vec<f64>> = (0..matrix.n_cols()).map(|c| matrix.column(c)).collect();
        let orders = columns
            .iter()
            .map(|col| {
                let mut order: Vec<u32> = (0..n_rows as u32).collect();
                order.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                order
            })
            .collect();
        Self {
            columns,
            orders,
            n_rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

/// Split objective. `Stats` are additive per-row sufficient statistics.
pub trait Criterion {
    type Stats: Copy + Default + Add<Output = Self::Stats> + Sub<Output = Self::Stats>;

    /// Whether a node with these totals may be split at all.
    fn can_split(&self, total: Self::Stats) -> bool;

    /// Gain of splitting `total` into `left` and `right`, or `None` if the
    /// split violates a child constraint.
    fn gain(&self, total: Self::Stats, left: Self::Stats, right: Self::Stats) -> Option<f64>;

    fn leaf_value(&self, total: Self::Stats) -> f64;
}

const NONE: u32 = u32::MAX;

struct OpenNode<S> {
    id: usize,
    total: S,
    considers: Vec<bool>,
    best: Option<(f64, usize, f64)>,
}

/// Grows one tree over the rows with `Some` statistics.
///
/// `choose_features` is called once per splittable node, in node-creation
/// order, and returns the candidate features for that node.
pub fn grow<C: Criterion>(
    store: &ColumnStore,
    stats: &[Option<C::Stats>],
    criterion: &C,
    max_depth: usize,
    mut choose_features: impl FnMut() -> Vec<usize>,
) -> Tree {
    assert_eq!(stats.len(), store.n_rows());
    let p = store.n_features();
    let mut node_of = vec![NONE; stats.len()];
    let mut root_total = C::Stats::default();
    for (row, s) in stats.iter().enumerate() {
        if let Some(s) = s {
            node_of[row] = 0;
            root_total = root_total + *s;
        }
    }
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // Open nodes of a level have contiguous ids starting at `base`; every
    // active row points at an open node or is retired with NONE.
    let mut base = 0usize;
    let mut open = vec![OpenNode {
        id: 0,
        total: root_total,
        considers: Vec::new(),
        best: None,
    }];

    for depth in 0..=max_depth {
        if open.is_empty() {
            break;
        }
        let mut any_candidates = false;
        for node in open.iter_mut() {
            node.considers = vec![false; p];
            if depth < max_depth && criterion.can_split(node.total) {
                for f in choose_features() {
                    node.considers[f] = true;
                    any_candidates = true;
                }
            }
        }

        if any_candidates {
            let mut left = vec![C::Stats::default(); open.len()];
            let mut prev: Vec<Option<f64>> = vec![None; open.len()];
            for f in 0..p {
                if !open.iter().any(|n| n.considers[f]) {
                    continue;
                }
                left.iter_mut().for_each(|l| *l = C::Stats::default());
                prev.iter_mut().for_each(|v| *v = None);
                let col = &store.columns[f];
                for &row in &store.orders[f] {
                    let row = row as usize;
                    let node = node_of[row];
                    if node == NONE {
                        continue;
                    }
                    let slot = node as usize - base;
                    let open_node = &mut open[slot];
                    if !open_node.considers[f] {
                        continue;
                    }
                    let v = col[row];
                    if let Some(pv) = prev[slot] {
                        if v > pv {
                            let right = open_node.total - left[slot];
                            if let Some(g) = criterion.gain(open_node.total, left[slot], right) {
                                if g > MIN_SPLIT_GAIN && open_node.best.is_none_or(|(bg, _, _)| g > bg) {
                                    let mut threshold = 0.5 * (pv + v);
                                    if threshold >= v {
                                        threshold = pv;
                                    }
                                    open_node.best = Some((g, f, threshold));
                                }
                            }
                        }
                    }
                    left[slot] = left[slot] + stats[row].expect("active row");
                    prev[slot] = Some(v);
                }
            }
        }

        // Turn the level into splits and leaves.
        let mut children: Vec<OpenNode<C::Stats>> = Vec::new();
        let mut split_of_slot: Vec<Option<(usize, f64, usize, usize)>> = Vec::with_capacity(open.len());
        for node in &open {
            match node.best {
                Some((gain, feature, threshold)) => {
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    for id in [l, r] {
                        children.push(OpenNode {
                            id,
                            total: C::Stats::default(),
                            considers: Vec::new(),
                            best: None,
                        });
                    }
                    nodes[node.id] = Node::Split {
                        feature,
                        threshold,
                        left: l,
                        right: r,
                        gain,
                    };
                    split_of_slot.push(Some((feature, threshold, l, r)));
                }
                None => {
                    nodes[node.id] = Node::Leaf {
                        value: criterion.leaf_value(node.total),
                    };
                    split_of_slot.push(None);
                }
            }
        }
        if children.is_empty() {
            break;
        }
        let child_base = children[0].id;
        for row in 0..node_of.len() {
            let node = node_of[row];
            if node == NONE {
                continue;
            }
            match split_of_slot[node as usize - base] {
                Some((feature, threshold, l, r)) => {
                    let child = if store.columns[feature][row] <= threshold { l } else { r };
                    node_of[row] = child as u32;
                    let cs = child - child_base;
                    children[cs].total = children[cs].total + stats[row].expect("active row");
                }
                None => node_of[row] = NONE,
            }
        }
        base = child_base;
        open = children;
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, Copy, Default)]
    struct Sum(f64, f64);

    impl Add for Sum {
        type Output = Sum;
        fn add(self, o: Sum) -> Sum {
            Sum(self.0 + o.0, self.1 + o.1)
        }
    }

    impl Sub for Sum {
        type Output = Sum;
        fn sub(self, o: Sum) -> Sum {
            Sum(self.0 - o.0, self.1 - o.1)
        }
    }

    /// Squared-error reduction; Sum = (count, sum of targets).
    struct Sse;

    impl Criterion for Sse {
        type Stats = Sum;
        fn can_split(&self, t: Sum) -> bool {
            t.0 >= 2.0
        }
        fn gain(&self, t: Sum, l: Sum, r: Sum) -> Option<f64> {
            Some(l.1 * l.1 / l.0 + r.1 * r.1 / r.0 - t.1 * t.1 / t.0)
        }
        fn leaf_value(&self, t: Sum) -> f64 {
            t.1 / t.0
        }
    }

    fn matrix(xs: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new((0..xs.len()).map(|i| i.to_string()).collect(), vec!["x".into()], xs.to_vec())
            .unwrap()
    }

    #[test]
    fn step_function_is_recovered() {
        let xs = [5.0, 1.0, 3.0, 2.0, 4.0, 6.0];
        let ys = [1.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        let store = ColumnStore::new(&matrix(&xs));
        let stats: Vec<_> = ys.iter().map(|&y| Some(Sum(1.0, y))).collect();
        let tree = grow(&store, &stats, &Sse, 3, || vec![0]);
        assert_eq!(tree.depth(), 1);
        let (f, thr, _) = tree.splits().next().unwrap();
        assert_eq!((f, thr), (0, 3.5));
        assert_eq!(tree.predict(&[0.0]), 0.0);
        assert_eq!(tree.predict(&[10.0]), 1.0);
    }

    #[test]
    fn inactive_rows_are_ignored() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let store = ColumnStore::new(&matrix(&xs));
        let stats = vec![Some(Sum(1.0, 0.0)), None, Some(Sum(1.0, 0.0)), None];
        let tree = grow(&store, &stats, &Sse, 3, || vec![0]);
        assert_eq!(tree.nodes, vec![Node::Leaf { value: 0.0 }]);
    }

    #[test]
    fn depth_limit_holds() {
        let xs: Vec<f64> = (0..64).map(f64::from).collect();
        let store = ColumnStore::new(&matrix(&xs));
        let stats: Vec<_> = xs.iter().map(|&x| Some(Sum(1.0, (x * 0.37).sin()))).collect();
        for depth in 0..5 {
            let tree = grow(&store, &stats, &Sse, depth, || vec![0]);
            assert!(tree.depth() <= depth);
        }
    }
}
