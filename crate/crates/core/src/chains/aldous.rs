//! Aldous's down-up chain on rooted binary trees with labeled leaves.
//!
//! Nodes `0..n` are the leaves (label `i + 1`); internal nodes follow. Every
//! attached node owns the edge to its parent, the top node owning the root
//! edge, so a tree with `n` leaves has `2n - 1` edges.

use std::collections::HashMap;

use super::twotree::TwoTree;
use super::ChainError;
use crate::rng::RngStream;

pub(crate) const NIL: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryTree {
    parent: Vec<usize>,
    children: Vec<[usize; 2]>,
    n_leaves: usize,
    top: usize,
    attached: Vec<bool>,
}

impl BinaryTree {
    /// The one-leaf tree, with room for `capacity` leaves.
    pub fn single_leaf(capacity: usize) -> Self {
        assert!(capacity >= 1);
        let slots = 2 * capacity - 1;
        let mut t = Self {
            parent: vec![NIL; slots],
            children: vec![[NIL, NIL]; slots],
            n_leaves: capacity,
            top: 0,
            attached: vec![false; slots],
        };
        t.attached[0] = true;
        t
    }

    pub fn leaf_count(&self) -> usize {
        (0..self.n_leaves).filter(|&l| self.attached[l]).count()
    }

    pub fn top(&self) -> usize {
        self.top
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v < self.n_leaves
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        (self.parent[v] != NIL).then_some(self.parent[v])
    }

    pub fn children(&self, v: usize) -> Option<[usize; 2]> {
        (!self.is_leaf(v) && self.attached[v]).then_some(self.children[v])
    }

    /// Attached nodes, i.e. edges.
    pub fn edges(&self) -> Vec<usize> {
        (0..self.attached.len()).filter(|&v| self.attached[v]).collect()
    }

    pub fn internal_nodes(&self) -> Vec<usize> {
        (self.n_leaves..self.attached.len()).filter(|&v| self.attached[v]).collect()
    }

    pub fn leaves_under(&self, v: usize) -> u32 {
        if self.is_leaf(v) {
            1
        } else {
            let [a, b] = self.children[v];
            self.leaves_under(a) + self.leaves_under(b)
        }
    }

    fn replace_child(&mut self, g: usize, old: usize, new: usize) {
        let c = &mut self.children[g];
        if c[0] == old {
            c[0] = new;
        } else {
            debug_assert_eq!(c[1], old);
            c[1] = new;
        }
    }

    pub(crate) fn sibling(&self, v: usize) -> usize {
        let [a, b] = self.children[self.parent[v]];
        if a == v {
            b
        } else {
            a
        }
    }

    /// Detach leaf `l`, contracting its parent. Returns the removed internal node.
    pub(crate) fn remove_leaf(&mut self, l: usize) -> usize {
        let p = self.parent[l];
        assert!(p != NIL, "cannot remove the only leaf");
        let s = self.sibling(l);
        let g = self.parent[p];
        if g == NIL {
            self.top = s;
        } else {
            self.replace_child(g, p, s);
        }
        self.parent[s] = g;
        self.parent[p] = NIL;
        self.parent[l] = NIL;
        self.attached[p] = false;
        self.attached[l] = false;
        p
    }

    /// Attach leaf `l` by subdividing the edge above `e`. Returns the new internal node.
    pub(crate) fn insert_leaf(&mut self, l: usize, e: usize) -> usize {
        let u = (self.n_leaves..self.attached.len()).find(|&v| !self.attached[v]).expect("free internal slot");
        let g = self.parent[e];
        self.children[u] = [e, l];
        self.parent[u] = g;
        self.parent[e] = u;
        self.parent[l] = u;
        if g == NIL {
            self.top = u;
        } else {
            self.replace_child(g, e, u);
        }
        self.attached[u] = true;
        self.attached[l] = true;
        u
    }

    fn canon(&self, v: usize, out: &mut String) -> usize {
        if self.is_leaf(v) {
            out.push_str(&(v + 1).to_string());
            return v;
        }
        let [a, b] = self.children[v];
        let mut sa = String::new();
        let mut sb = String::new();
        let ma = self.canon(a, &mut sa);
        let mb = self.canon(b, &mut sb);
        out.push('(');
        if ma < mb {
            out.push_str(&sa);
            out.push(',');
            out.push_str(&sb);
        } else {
            out.push_str(&sb);
            out.push(',');
            out.push_str(&sa);
        }
        out.push(')');
        ma.min(mb)
    }

    /// Canonical form, independent of child order and node numbering.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        self.canon(self.top, &mut s);
        s
    }
}

/// One down-up move: a uniform leaf is removed and reinserted on a uniform edge.
pub fn aldous_downup_step(tree: &BinaryTree, rng: &mut RngStream) -> Result<BinaryTree, ChainError> {
    let n = tree.leaf_count();
    if n < 3 {
        return Err(ChainError::TooFewLeaves(n));
    }
    let mut t = tree.clone();
    let l = rng.below(n);
    t.remove_leaf(l);
    let edges = t.edges();
    let e = edges[rng.below(edges.len())];
    t.insert_leaf(l, e);
    Ok(t)
}

/// Uniform tree with `n` leaves, grown by attaching leaves `1..n` in turn
/// to uniformly chosen edges.
pub fn uniform_tree(n: usize, rng: &mut RngStream) -> BinaryTree {
    let mut t = BinaryTree::single_leaf(n);
    for l in 1..n {
        let edges = t.edges();
        t.insert_leaf(l, edges[rng.below(edges.len())]);
    }
    t
}

/// All `(2n-3)!!` trees with `n` leaves.
pub fn enumerate_trees(n: usize) -> Vec<BinaryTree> {
    assert!(n >= 1);
    let mut trees = vec![BinaryTree::single_leaf(n)];
    for l in 1..n {
        let mut next = Vec::new();
        for t in &trees {
            for e in t.edges() {
                let mut u = t.clone();
                u.insert_leaf(l, e);
                next.push(u);
            }
        }
        trees = next;
    }
    trees
}

/// Transition matrix with integer entries over a common denominator.
#[derive(Clone, Debug)]
pub struct CountMatrix {
    pub counts: Vec<Vec<u64>>,
    pub denominator: u64,
}

impl CountMatrix {
    pub fn rows_are_stochastic(&self) -> bool {
        self.counts.iter().all(|r| r.iter().sum::<u64>() == self.denominator)
    }

    /// The uniform law is stationary iff every column sums to the denominator.
    pub fn uniform_is_stationary(&self) -> bool {
        let k = self.counts.len();
        (0..k).all(|j| self.counts.iter().map(|r| r[j]).sum::<u64>() == self.denominator)
    }

    /// Every state reaches every other.
    pub fn is_irreducible(&self) -> bool {
        let k = self.counts.len();
        (0..k).all(|s| {
            let mut seen = vec![false; k];
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(i) = stack.pop() {
                for (j, &c) in self.counts[i].iter().enumerate() {
                    if c > 0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.iter().all(|&b| b)
        })
    }
}

/// Exact Aldous transition matrix on the trees of `enumerate_trees(n)`,
/// denominator `n (2n - 3)`.
pub fn aldous_transition_matrix(n: usize) -> (Vec<BinaryTree>, CountMatrix) {
    assert!(n >= 3);
    let trees = enumerate_trees(n);
    let index: HashMap<String, usize> = trees.iter().enumerate().map(|(i, t)| (t.canonical(), i)).collect();
    let mut counts = vec![vec![0u64; trees.len()]; trees.len()];
    for (i, t) in trees.iter().enumerate() {
        for l in 0..n {
            let mut down = t.clone();
            down.remove_leaf(l);
            for e in down.edges() {
                let mut up = down.clone();
                up.insert_leaf(l, e);
                counts[i][index[&up.canonical()]] += 1;
            }
        }
    }
    (trees, CountMatrix { counts, denominator: (n * (2 * n - 3)) as u64 })
}

/// 2-tree at `branch_point`: its first and second child carry `m1` and `m2`.
pub fn project_two_tree(tree: &BinaryTree, branch_point: usize) -> Result<TwoTree, ChainError> {
    project_oriented(tree, branch_point, None)
}

/// As `project_two_tree`, with `first` naming the child that carries `m1`.
pub(crate) fn project_oriented(tree: &BinaryTree, v: usize, first: Option<usize>) -> Result<TwoTree, ChainError> {
    let [a, b] = tree.children(v).ok_or(ChainError::InvalidNode(v))?;
    let (c1, c2) = match first {
        None => (a, b),
        Some(f) if f == a => (a, b),
        Some(f) if f == b => (b, a),
        Some(f) => return Err(ChainError::InvalidNode(f)),
    };
    let mut spinal = Vec::new();
    let mut cur = v;
    while let Some(g) = tree.parent(cur) {
        spinal.push(tree.leaves_under(tree.sibling(cur)));
        cur = g;
    }
    Ok(TwoTree { m1: tree.leaves_under(c1), m2: tree.leaves_under(c2), spinal })
}
