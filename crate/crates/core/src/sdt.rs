//! Differentiable soft decision tree.
//!
//! A complete binary tree of depth `d`: inner node `u = 2^i - 1 + j`
//! (layer `i`, position `j`) routes left with probability
//! `sigmoid(w_u . x + b_u)` and right with the complement; each of the
//! `2^d` leaves holds a logit vector over `K` categories. The
//! differentiable output is the path-probability-weighted mixture of the
//! leaf softmaxes; the explanation object is the greedy root-to-leaf
//! path. The same structure serves as the high-level policy and as the
//! skill prior.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{sigmoid, softmax_row, Gradients, Graph, Mat, NodeId};

/// Complete soft decision tree with `2^depth - 1` inner nodes and
/// `2^depth` leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftTree {
    depth: usize,
    obs_dim: usize,
    k: usize,
    /// Per inner node, an `obs_dim x 1` weight column, indexed by `u`.
    inner_w: Vec<Mat>,
    /// Per inner node, a `1x1` bias.
    inner_b: Vec<Mat>,
    /// `2^depth x K` leaf logits.
    leaf_logits: Mat,
}

/// One traversal step of a greedy decision path.
#[derive(Clone, Debug)]
pub struct PathStep {
    /// Inner node index `u`.
    pub node: usize,
    pub went_left: bool,
    /// Probability of the branch actually taken.
    pub probability: f32,
    /// The node's feature weights, for rendering.
    pub weights: Vec<f32>,
    pub bias: f32,
}

/// Greedy root-to-leaf traversal: the per-decision explanation.
#[derive(Clone, Debug)]
pub struct DecisionPath {
    pub steps: Vec<PathStep>,
    /// Terminal leaf index in `[0, 2^depth)`.
    pub leaf: usize,
    /// The terminal leaf's categorical distribution.
    pub leaf_distribution: Vec<f32>,
    /// Product of the taken branches' probabilities.
    pub path_probability: f32,
}

/// Graph node ids for a tree inserted as trainable parameters.
pub struct TreeNodes {
    pub w: Vec<NodeId>,
    pub b: Vec<NodeId>,
    pub leaves: NodeId,
}

/// Result of a graph forward pass.
pub struct TreeForward {
    /// `batch x K` mixture distribution.
    pub mixture: NodeId,
    /// `batch x 2^depth` per-leaf path probabilities.
    pub leaf_probs: NodeId,
    /// Present when the tree was inserted as parameters.
    pub params: Option<TreeNodes>,
}

impl SoftTree {
    /// Fresh tree: weights uniform in `(-1/sqrt(obs_dim), 1/sqrt(obs_dim))`,
    /// biases and leaf logits zero, so every input yields the uniform
    /// distribution.
    pub fn new(depth: usize, obs_dim: usize, k: usize, seed: u64) -> Self {
        assert!(depth >= 1, "tree depth must be at least 1");
        assert!(obs_dim >= 1, "observation dimension must be at least 1");
        assert!(k >= 2, "need at least two output categories");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (obs_dim as f32).sqrt();
        let inner = (1 << depth) - 1;
        let inner_w = (0..inner)
            .map(|_| Mat::uniform(obs_dim, 1, -bound, bound, &mut rng))
            .collect();
        let inner_b = (0..inner).map(|_| Mat::scalar(0.0)).collect();
        SoftTree {
            depth,
            obs_dim,
            k,
            inner_w,
            inner_b,
            leaf_logits: Mat::zeros(1 << depth, k),
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn categories(&self) -> usize {
        self.k
    }

    pub fn num_inner(&self) -> usize {
        self.inner_w.len()
    }

    pub fn num_leaves(&self) -> usize {
        1 << self.depth
    }

    pub fn node_weights(&self, u: usize) -> &[f32] {
        self.inner_w[u].data()
    }

    pub fn node_bias(&self, u: usize) -> f32 {
        self.inner_b[u].item()
    }

    pub fn set_node(&mut self, u: usize, weights: &[f32], bias: f32) {
        assert_eq!(weights.len(), self.obs_dim);
        self.inner_w[u] = Mat::from_vec(self.obs_dim, 1, weights.to_vec());
        self.inner_b[u] = Mat::scalar(bias);
    }

    pub fn leaf_logits(&self) -> &Mat {
        &self.leaf_logits
    }

    pub fn leaf_logits_mut(&mut self) -> &mut Mat {
        &mut self.leaf_logits
    }

    /// Left-branch probability at inner node `u`.
    fn gate(&self, u: usize, x: &[f32]) -> f32 {
        let w = self.inner_w[u].data();
        let mut z = self.inner_b[u].item();
        for (wi, xi) in w.iter().zip(x) {
            z += wi * xi;
        }
        sigmoid(z)
    }

    /// The leaf's categorical distribution `softmax(leaf logits)`.
    pub fn leaf_distribution(&self, leaf: usize) -> Vec<f32> {
        let mut row = self.leaf_logits.row_slice(leaf).to_vec();
        softmax_row(&mut row);
        row
    }

    /// Soft forward pass: `(mixture over K, per-leaf path probabilities)`.
    ///
    /// The mixture is the path-probability-weighted sum of the leaf
    /// softmaxes; both outputs sum to one.
    pub fn forward(&self, x: &[f32]) -> (Vec<f32>, Vec<f32>) {
        assert_eq!(x.len(), self.obs_dim, "observation dimension mismatch");
        assert!(x.iter().all(|v| v.is_finite()), "non-finite observation");
        let mut probs = vec![1.0f32];
        for layer in 0..self.depth {
            let first = (1 << layer) - 1;
            let mut next = Vec::with_capacity(probs.len() * 2);
            for (j, p) in probs.iter().enumerate() {
                let gate = self.gate(first + j, x);
                next.push(p * gate);
                next.push(p * (1.0 - gate));
            }
            probs = next;
        }
        let mut mixture = vec![0.0f32; self.k];
        for (leaf, p) in probs.iter().enumerate() {
            let dist = self.leaf_distribution(leaf);
            for (m, d) in mixture.iter_mut().zip(&dist) {
                *m += p * d;
            }
        }
        (mixture, probs)
    }

    /// Greedy descent: at each node take the branch with probability
    /// >= 0.5, ties to the left.
    pub fn greedy_path(&self, x: &[f32]) -> DecisionPath {
        assert_eq!(x.len(), self.obs_dim, "observation dimension mismatch");
        assert!(x.iter().all(|v| v.is_finite()), "non-finite observation");
        let mut steps = Vec::with_capacity(self.depth);
        let mut j = 0usize;
        let mut path_probability = 1.0f32;
        for layer in 0..self.depth {
            let u = (1 << layer) - 1 + j;
            let gate = self.gate(u, x);
            let went_left = gate >= 0.5;
            let probability = if went_left { gate } else { 1.0 - gate };
            path_probability *= probability;
            steps.push(PathStep {
                node: u,
                went_left,
                probability,
                weights: self.inner_w[u].data().to_vec(),
                bias: self.inner_b[u].item(),
            });
            j = 2 * j + usize::from(!went_left);
        }
        DecisionPath {
            steps,
            leaf: j,
            leaf_distribution: self.leaf_distribution(j),
            path_probability,
        }
    }

    /// Skill choice used for evaluation, explanation, and distillation
    /// labels: argmax of the greedy leaf's distribution, ties to the
    /// smallest index.
    pub fn greedy_skill(&self, x: &[f32]) -> usize {
        argmax(&self.greedy_path(x).leaf_distribution)
    }

    /// Sample a category from the soft mixture.
    pub fn sample<R: Rng>(&self, x: &[f32], rng: &mut R) -> usize {
        let (mixture, _) = self.forward(x);
        sample_categorical(&mixture, rng)
    }

    /// `D_KL(self(x) || other(x))` between the two soft mixtures.
    pub fn kl(&self, other: &SoftTree, x: &[f32]) -> f32 {
        assert_eq!(self.k, other.k, "category count mismatch");
        assert_eq!(self.obs_dim, other.obs_dim, "observation dimension mismatch");
        let (p, _) = self.forward(x);
        let (q, _) = other.forward(x);
        kl_divergence(&p, &q)
    }

    /// Records the forward pass on a graph for a `batch x obs_dim`
    /// input node. With `trainable` the tree parameters become `param`
    /// nodes (ids returned); otherwise they enter as constants.
    pub fn graph_forward(&self, g: &mut Graph, x: NodeId, trainable: bool) -> TreeForward {
        assert_eq!(g.value(x).cols(), self.obs_dim, "input dimension mismatch");
        let batch = g.value(x).rows();
        let mut w_ids = Vec::with_capacity(self.inner_w.len());
        let mut b_ids = Vec::with_capacity(self.inner_b.len());
        for (w, b) in self.inner_w.iter().zip(&self.inner_b) {
            if trainable {
                w_ids.push(g.param(w.clone()));
                b_ids.push(g.param(b.clone()));
            } else {
                w_ids.push(g.constant(w.clone()));
                b_ids.push(g.constant(b.clone()));
            }
        }
        let leaves = if trainable {
            g.param(self.leaf_logits.clone())
        } else {
            g.constant(self.leaf_logits.clone())
        };

        let ones = g.constant(Mat::filled(batch, 1, 1.0));
        let mut probs = vec![ones];
        for layer in 0..self.depth {
            let first = (1 << layer) - 1;
            let mut next = Vec::with_capacity(probs.len() * 2);
            for (j, &p) in probs.iter().enumerate() {
                let u = first + j;
                let z = g.matmul(x, w_ids[u]);
                let z = g.add(z, b_ids[u]);
                let gate = g.sigmoid(z);
                let left = g.mul(p, gate);
                let anti = g.sub(ones, gate);
                let right = g.mul(p, anti);
                next.push(left);
                next.push(right);
            }
            probs = next;
        }
        let mut leaf_probs = probs[0];
        for &p in &probs[1..] {
            leaf_probs = g.concat(leaf_probs, p);
        }
        let leaf_dist = g.softmax(leaves);
        let mixture = g.matmul(leaf_probs, leaf_dist);
        TreeForward {
            mixture,
            leaf_probs,
            params: trainable.then_some(TreeNodes { w: w_ids, b: b_ids, leaves }),
        }
    }

    /// Optimizer slots for this tree's parameters, aligned with the ids
    /// from [`SoftTree::graph_forward`]. Order is fixed: all weights,
    /// all biases, then the leaf logits.
    pub fn slots<'a>(
        &'a mut self,
        nodes: &TreeNodes,
        grads: &'a Gradients,
    ) -> Vec<(&'a mut Mat, &'a Mat)> {
        let mut slots: Vec<(&mut Mat, &Mat)> = Vec::new();
        for (w, id) in self.inner_w.iter_mut().zip(&nodes.w) {
            slots.push((w, grads.get(*id)));
        }
        for (b, id) in self.inner_b.iter_mut().zip(&nodes.b) {
            slots.push((b, grads.get(*id)));
        }
        slots.push((&mut self.leaf_logits, grads.get(nodes.leaves)));
        slots
    }

    /// Flat views used by the checkpoint writer: `(inner weights as
    /// num_inner x obs_dim, biases as num_inner x 1, leaf logits)`.
    pub fn export(&self) -> (Mat, Mat, Mat) {
        let inner = self.inner_w.len();
        let mut w = Mat::zeros(inner, self.obs_dim);
        let mut b = Mat::zeros(inner, 1);
        for u in 0..inner {
            w.data_mut()[u * self.obs_dim..(u + 1) * self.obs_dim]
                .copy_from_slice(self.inner_w[u].data());
            b.data_mut()[u] = self.inner_b[u].item();
        }
        (w, b, self.leaf_logits.clone())
    }

    /// Inverse of [`SoftTree::export`].
    pub fn from_export(
        depth: usize,
        obs_dim: usize,
        k: usize,
        w: &Mat,
        b: &Mat,
        leaf: &Mat,
    ) -> Self {
        let inner = (1usize << depth) - 1;
        assert_eq!(w.shape(), (inner, obs_dim), "inner weight shape mismatch");
        assert_eq!(b.shape(), (inner, 1), "inner bias shape mismatch");
        assert_eq!(leaf.shape(), (1 << depth, k), "leaf logit shape mismatch");
        SoftTree {
            depth,
            obs_dim,
            k,
            inner_w: (0..inner)
                .map(|u| Mat::from_vec(obs_dim, 1, w.row_slice(u).to_vec()))
                .collect(),
            inner_b: (0..inner).map(|u| Mat::scalar(b.data()[u])).collect(),
            leaf_logits: leaf.clone(),
        }
    }
}

/// Argmax with ties broken toward the smallest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Inverse-CDF sample from a categorical distribution.
pub fn sample_categorical<R: Rng>(probs: &[f32], rng: &mut R) -> usize {
    let u: f32 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// `sum p_i (ln p_i - ln q_i)` with both logs floored at 1e-12, matching
/// the graph-side log clamp.
pub fn kl_divergence(p: &[f32], q: &[f32]) -> f32 {
    assert_eq!(p.len(), q.len(), "distribution length mismatch");
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi <= 0.0 {
                0.0
            } else {
                pi * (pi.max(1e-12).ln() - qi.max(1e-12).ln())
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::error::Result;
    use proptest::prelude::*;

    fn random_obs(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
        (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect()
    }

    /// Tree with every gate pushed hard to the left branch.
    fn saturated_tree(depth: usize, obs_dim: usize, k: usize) -> SoftTree {
        let mut t = SoftTree::new(depth, obs_dim, k, 0);
        for u in 0..t.num_inner() {
            t.set_node(u, &vec![0.0; obs_dim], 20.0);
        }
        t
    }

    #[test]
    fn node_and_leaf_counts() {
        let t = SoftTree::new(6, 11, 16, 1);
        assert_eq!(t.num_inner(), 63);
        assert_eq!(t.num_leaves(), 64);
        let t1 = SoftTree::new(1, 3, 2, 1);
        assert_eq!(t1.num_inner(), 1);
        assert_eq!(t1.num_leaves(), 2);
    }

    #[test]
    fn fresh_tree_outputs_uniform() {
        let t = SoftTree::new(3, 5, 8, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_obs(&mut rng, 5);
        let (mixture, _) = t.forward(&x);
        for p in mixture {
            assert!((p - 0.125).abs() < 1e-6);
        }
    }

    #[test]
    fn depth_one_zero_weights_splits_evenly() {
        let mut t = SoftTree::new(1, 4, 2, 0);
        t.set_node(0, &[0.0; 4], 0.0);
        let (_, probs) = t.forward(&[0.3, 0.1, 0.9, 0.5]);
        assert!((probs[0] - 0.5).abs() < 1e-7);
        assert!((probs[1] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn saturated_gates_concentrate_on_leftmost_leaf() {
        let t = saturated_tree(2, 3, 4);
        let (_, probs) = t.forward(&[0.2, 0.5, 0.8]);
        assert!(probs[0] >= 1.0 - 1e-6, "leftmost leaf got {}", probs[0]);
    }

    #[test]
    fn forward_matches_bruteforce_path_enumeration() {
        let depth = 3;
        let t = SoftTree::new(depth, 6, 5, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let x = random_obs(&mut rng, 6);
            let (mixture, probs) = t.forward(&x);

            // oracle: walk every root-to-leaf path independently; the
            // bits of the leaf index, most significant first, are the
            // branches taken at each layer (0 = left)
            let mut oracle_mix = vec![0.0f32; 5];
            for leaf in 0..t.num_leaves() {
                let mut branches = Vec::new();
                let mut j = leaf;
                for _ in 0..depth {
                    branches.push(j & 1);
                    j >>= 1;
                }
                branches.reverse();
                let mut p = 1.0f32;
                let mut pos = 0usize;
                for (layer, &b) in branches.iter().enumerate() {
                    let u = (1 << layer) - 1 + pos;
                    let gate = t.gate(u, &x);
                    p *= if b == 0 { gate } else { 1.0 - gate };
                    pos = 2 * pos + b;
                }
                assert!((p - probs[leaf]).abs() < 1e-6);
                let dist = t.leaf_distribution(leaf);
                for (m, d) in oracle_mix.iter_mut().zip(&dist) {
                    *m += p * d;
                }
            }
            for (a, b) in mixture.iter().zip(&oracle_mix) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn greedy_tie_breaks_left() {
        let mut t = SoftTree::new(1, 2, 2, 0);
        t.set_node(0, &[0.0, 0.0], 0.0);
        let path = t.greedy_path(&[0.4, 0.6]);
        assert!(path.steps[0].went_left);
        assert_eq!(path.leaf, 0);
        assert_eq!(path.steps[0].probability, 0.5);
    }

    #[test]
    fn greedy_on_saturated_tree_goes_all_left() {
        let t = saturated_tree(3, 4, 4);
        let path = t.greedy_path(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(path.leaf, 0);
        assert!(path.steps.iter().all(|s| s.went_left));
        assert!(path.path_probability > 1.0 - 1e-5);
    }

    #[test]
    fn greedy_mostly_agrees_with_global_argmax() {
        let t = SoftTree::new(3, 6, 4, 123);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agree = 0usize;
        let n = 1000;
        for _ in 0..n {
            let x = random_obs(&mut rng, 6);
            let (_, probs) = t.forward(&x);
            let global = argmax(&probs);
            let greedy = t.greedy_path(&x).leaf;
            if global == greedy {
                agree += 1;
            } else {
                println!(
                    "greedy leaf {greedy} vs global argmax {global} (p_greedy={}, p_global={})",
                    probs[greedy], probs[global]
                );
            }
        }
        assert!(agree >= 950, "greedy agreed on only {agree}/{n} inputs");
    }

    #[test]
    fn sampling_follows_the_mixture() {
        let t = SoftTree::new(2, 3, 8, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = [0.2, 0.6, 0.4];
        let mut counts = [0usize; 8];
        for _ in 0..10_000 {
            counts[t.sample(&x, &mut rng)] += 1;
        }
        for c in counts {
            let f = c as f32 / 10_000.0;
            assert!((f - 0.125).abs() < 0.02, "frequency {f}");
        }
    }

    #[test]
    fn degenerate_distribution_always_samples_it() {
        let mut t = SoftTree::new(1, 2, 4, 0);
        // push every leaf's mass onto category 0
        for row in 0..t.num_leaves() {
            t.leaf_logits_mut().set(row, 0, 40.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(t.sample(&[0.5, 0.5], &mut rng), 0);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let t = SoftTree::new(2, 3, 5, 8);
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            (0..32)
                .map(|i| t.sample(&[0.1 * (i % 10) as f32, 0.5, 0.9], &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn kl_of_identical_trees_is_zero() {
        let t = SoftTree::new(3, 4, 6, 21);
        let u = t.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x = random_obs(&mut rng, 4);
            assert!(t.kl(&u, &x).abs() < 1e-7);
        }
    }

    #[test]
    fn kl_matches_closed_form() {
        // leaf logits chosen so the mixtures are exactly (0.5, 0.5) and
        // (0.9, 0.1) regardless of the input
        let a = SoftTree::new(1, 2, 2, 0);
        let mut b = SoftTree::new(1, 2, 2, 0);
        for row in 0..2 {
            b.leaf_logits_mut().set(row, 0, (0.9f32).ln());
            b.leaf_logits_mut().set(row, 1, (0.1f32).ln());
        }
        let got = a.kl(&b, &[0.3, 0.7]);
        let expect = 0.5 * (0.5f32 / 0.9).ln() + 0.5 * (0.5f32 / 0.1).ln();
        assert!((got - expect).abs() < 1e-5, "kl {got} vs {expect}");
        assert!((expect - 0.5108).abs() < 1e-3);
    }

    #[test]
    fn kl_gradient_wrt_leaf_logits_matches_finite_differences() {
        let tree = SoftTree::new(2, 3, 3, 5);
        let mut target = SoftTree::new(2, 3, 3, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for r in 0..target.num_leaves() {
            for c in 0..3 {
                target.leaf_logits_mut().set(r, c, rng.gen_range(-0.5..0.5));
            }
        }
        let x = [0.4f32, 0.8, 0.1];
        let leaf_count = tree.num_leaves() * tree.categories();
        let f = |v: &[f32]| -> Result<(f32, Vec<f32>)> {
            let mut t = tree.clone();
            *t.leaf_logits_mut() = Mat::from_vec(t.num_leaves(), t.categories(), v.to_vec());
            let mut g = Graph::new();
            let xc = g.constant(Mat::row(&x));
            let fwd = t.graph_forward(&mut g, xc, true);
            let prior = target.graph_forward(&mut g, xc, false);
            let log_p = g.log(fwd.mixture);
            let log_q = g.log(prior.mixture);
            let diff = g.sub(log_p, log_q);
            let term = g.mul(fwd.mixture, diff);
            let kl = g.sum(term);
            let grads = g.backward(kl)?;
            let leaf_id = fwd.params.unwrap().leaves;
            Ok((g.value(kl).item(), grads.get(leaf_id).data().to_vec()))
        };
        let x0: Vec<f32> = (0..leaf_count).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let err = grad_check(f, &x0, 1e-3).unwrap();
        assert!(err < 1e-3, "relative error {err}");
    }

    #[test]
    fn graph_forward_matches_eval_forward() {
        let t = SoftTree::new(4, 7, 6, 31);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let rows = 5;
        let mut data = Vec::new();
        for _ in 0..rows {
            data.extend(random_obs(&mut rng, 7));
        }
        let batch = Mat::from_vec(rows, 7, data.clone());
        let mut g = Graph::new();
        let x = g.constant(batch);
        let fwd = t.graph_forward(&mut g, x, false);
        for r in 0..rows {
            let (mix, probs) = t.forward(&data[r * 7..(r + 1) * 7]);
            for c in 0..6 {
                assert!((g.value(fwd.mixture).get(r, c) - mix[c]).abs() < 1e-6);
            }
            for c in 0..t.num_leaves() {
                assert!((g.value(fwd.leaf_probs).get(r, c) - probs[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn prior_copy_gives_zero_kl_everywhere() {
        let mut prior = SoftTree::new(3, 5, 4, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        for r in 0..prior.num_leaves() {
            for c in 0..4 {
                prior.leaf_logits_mut().set(r, c, rng.gen_range(-1.0..1.0));
            }
        }
        let policy = prior.clone();
        for _ in 0..50 {
            let x = random_obs(&mut rng, 5);
            assert_eq!(policy.kl(&prior, &x), 0.0);
        }
    }

    #[test]
    fn leaf_logit_shift_leaves_output_unchanged() {
        let base = SoftTree::new(3, 4, 5, 13);
        let mut shifted = base.clone();
        for c in 0..5 {
            let v = shifted.leaf_logits().get(2, c);
            shifted.leaf_logits_mut().set(2, c, v + 3.7);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for _ in 0..20 {
            let x = random_obs(&mut rng, 4);
            let (a, _) = base.forward(&x);
            let (b, _) = shifted.forward(&x);
            for (ai, bi) in a.iter().zip(&b) {
                assert!((ai - bi).abs() < 1e-6);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Per-leaf path probabilities are a partition of unity and the
        /// mixture is a valid distribution, for any parameters and any
        /// finite input.
        #[test]
        fn partition_of_unity(
            depth in 1usize..=6,
            seed in 0u64..1000,
            xseed in 0u64..1000,
        ) {
            let mut t = SoftTree::new(depth, 5, 4, seed);
            let mut prng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            for u in 0..t.num_inner() {
                let w: Vec<f32> = (0..5).map(|_| prng.gen_range(-3.0..3.0)).collect();
                let b = prng.gen_range(-2.0..2.0);
                t.set_node(u, &w, b);
            }
            for r in 0..t.num_leaves() {
                for c in 0..4 {
                    t.leaf_logits_mut().set(r, c, prng.gen_range(-4.0..4.0));
                }
            }
            let mut xrng = ChaCha8Rng::seed_from_u64(xseed);
            let x: Vec<f32> = (0..5).map(|_| xrng.gen_range(-2.0..2.0)).collect();
            let (mixture, probs) = t.forward(&x);
            let psum: f32 = probs.iter().sum();
            prop_assert!((psum - 1.0).abs() < 1e-6);
            let msum: f32 = mixture.iter().sum();
            prop_assert!((msum - 1.0).abs() < 1e-6);
            prop_assert!(mixture.iter().all(|&p| p >= 0.0));
        }
    }
}
