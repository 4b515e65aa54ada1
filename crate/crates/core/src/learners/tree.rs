//! CART classification tree with exhaustive midpoint threshold search.
//!
//! Nodes are stored as parallel arrays so a fitted tree serializes to a
//! compact JSON document. Samples carry weights, which lets the same builder
//! serve bootstrap forests (weights = draw counts) and boosting.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Criterion, TreeParams};
use crate::features::FeatureMatrix;
use crate::scalar::Scalar;

const LEAF: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tree<T> {
    n_classes: usize,
    n_features: usize,
    /// Split feature per node, `usize::MAX` for leaves.
    feature: Vec<usize>,
    threshold: Vec<T>,
    left: Vec<usize>,
    right: Vec<usize>,
    impurity: Vec<f64>,
    weighted_n: Vec<f64>,
    n_samples: Vec<usize>,
    /// Class weights per node, `n_nodes * n_classes`.
    value: Vec<f64>,
}

/// Best split of one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Split<T> {
    pub feature: usize,
    pub threshold: T,
    /// Weighted child impurity `w_l * i_l + w_r * i_r`; lower is better.
    pub child_cost: f64,
}

fn impurity(criterion: Criterion, counts: &[f64], total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|&c| (c / total) * (c / total)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / total;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

/// `w_l * i(left) + w_r * i(total - left)` without materializing the right side.
fn child_cost(criterion: Criterion, left: &[f64], total: &[f64], wl: f64, wr: f64) -> f64 {
    match criterion {
        Criterion::Gini => {
            let mut sl = 0.0;
            let mut sr = 0.0;
            for (l, t) in left.iter().zip(total) {
                let r = t - l;
                sl += l * l;
                sr += r * r;
            }
            let gl = if wl > 0.0 { wl - sl / wl } else { 0.0 };
            let gr = if wr > 0.0 { wr - sr / wr } else { 0.0 };
            gl + gr
        }
        Criterion::Entropy => {
            let h = |c: f64, w: f64| if c > 0.0 { -c * (c / w).log2() } else { 0.0 };
            left.iter().zip(total).map(|(&l, &t)| h(l, wl) + h(t - l, wr)).sum()
        }
    }
}

pub(crate) struct Builder<'a, T> {
    pub x: &'a FeatureMatrix<T>,
    pub y: &'a [usize],
    pub weights: &'a [f64],
    pub n_classes: usize,
    pub params: TreeParams,
    /// Features examined per node; `>= n_features` means all, in order.
    pub max_features: usize,
}

impl<T: Scalar> Builder<'_, T> {
    fn class_weights(&self, idx: &[usize]) -> Vec<f64> {
        let mut c = vec![0.0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += self.weights[i];
        }
        c
    }

    /// Best split over the examined features. Ties go to the lower feature
    /// index, then the lower threshold, so the result does not depend on the
    /// order in which features are visited.
    pub(crate) fn best_split(
        &self,
        idx: &[usize],
        rng: Option<&mut ChaCha8Rng>,
        buf: &mut Vec<(T, usize)>,
    ) -> Option<Split<T>> {
        let d = self.x.n_cols();
        let mut order: Vec<usize> = (0..d).collect();
        let sample = self.max_features < d;
        if sample {
            if let Some(r) = rng {
                order.shuffle(r);
            }
        }
        let total_counts = self.class_weights(idx);
        let total_w: f64 = total_counts.iter().sum();
        let mut best: Option<Split<T>> = None;
        let mut informative = 0;
        let mut left = vec![0.0; self.n_classes];
        for &f in &order {
            if sample && informative >= self.max_features {
                break;
            }
            buf.clear();
            buf.extend(idx.iter().map(|&i| (self.x.get(i, f), i)));
            buf.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            if buf[0].0 == buf[buf.len() - 1].0 {
                continue;
            }
            informative += 1;
            left.iter_mut().for_each(|c| *c = 0.0);
            let mut wl = 0.0;
            for p in 0..buf.len() - 1 {
                let i = buf[p].1;
                left[self.y[i]] += self.weights[i];
                wl += self.weights[i];
                let (a, b) = (buf[p].0, buf[p + 1].0);
                if a == b {
                    continue;
                }
                let cost = child_cost(self.params.criterion, &left, &total_counts, wl, total_w - wl);
                let better = match best {
                    None => true,
                    Some(s) => cost < s.child_cost || (cost == s.child_cost && f < s.feature),
                };
                if better {
                    let two = T::one() + T::one();
                    let mut thr = a / two + b / two;
                    if thr == b || !thr.is_finite() {
                        thr = a;
                    }
                    best = Some(Split {
                        feature: f,
                        threshold: thr,
                        child_cost: cost,
                    });
                }
            }
        }
        best
    }

    pub(crate) fn build(&self, root: Vec<usize>, mut rng: Option<&mut ChaCha8Rng>) -> Tree<T> {
        let mut tree = Tree {
            n_classes: self.n_classes,
            n_features: self.x.n_cols(),
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            impurity: Vec::new(),
            weighted_n: Vec::new(),
            n_samples: Vec::new(),
            value: Vec::new(),
        };
        let mut buf = Vec::with_capacity(root.len());
        // (node id, sample indices, depth)
        let mut stack = vec![(tree.push_node(), root, 0usize)];
        while let Some((node, idx, depth)) = stack.pop() {
            let counts = self.class_weights(&idx);
            let w: f64 = counts.iter().sum();
            let imp = impurity(self.params.criterion, &counts, w);
            tree.impurity[node] = imp;
            tree.weighted_n[node] = w;
            tree.n_samples[node] = idx.len();
            tree.value[node * self.n_classes..(node + 1) * self.n_classes].copy_from_slice(&counts);

            let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
            let depth_capped = self.params.max_depth.is_some_and(|m| depth >= m);
            if pure || depth_capped || idx.len() < self.params.min_samples_split {
                continue;
            }
            let Some(split) = self.best_split(&idx, rng.as_deref_mut(), &mut buf) else {
                continue;
            };
            let (l, r): (Vec<usize>, Vec<usize>) = idx
                .iter()
                .partition(|&&i| self.x.get(i, split.feature) <= split.threshold);
            let (ln, rn) = (tree.push_node(), tree.push_node());
            tree.feature[node] = split.feature;
            tree.threshold[node] = split.threshold;
            tree.left[node] = ln;
            tree.right[node] = rn;
            stack.push((rn, r, depth + 1));
            stack.push((ln, l, depth + 1));
        }
        tree
    }
}

impl<T: Scalar> Tree<T> {
    fn push_node(&mut self) -> usize {
        self.feature.push(LEAF);
        self.threshold.push(T::zero());
        self.left.push(LEAF);
        self.right.push(LEAF);
        self.impurity.push(0.0);
        self.weighted_n.push(0.0);
        self.n_samples.push(0);
        self.value.extend(std::iter::repeat_n(0.0, self.n_classes));
        self.feature.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] == LEAF
    }

    /// Split feature and threshold of an internal node.
    pub fn split_of(&self, node: usize) -> Option<(usize, T)> {
        (!self.is_leaf(node)).then(|| (self.feature[node], self.threshold[node]))
    }

    pub fn depth(&self) -> usize {
        let mut best = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((n, d)) = stack.pop() {
            best = best.max(d);
            if !self.is_leaf(n) {
                stack.push((self.left[n], d + 1));
                stack.push((self.right[n], d + 1));
            }
        }
        best
    }

    fn leaf_for(&self, row: &[T]) -> usize {
        let mut n = 0;
        while !self.is_leaf(n) {
            n = if row[self.feature[n]] <= self.threshold[n] {
                self.left[n]
            } else {
                self.right[n]
            };
        }
        n
    }

    /// Class distribution of the leaf reached by `row`.
    pub fn proba(&self, row: &[T]) -> Vec<f64> {
        let n = self.leaf_for(row);
        let v = &self.value[n * self.n_classes..(n + 1) * self.n_classes];
        let total: f64 = v.iter().sum();
        if total > 0.0 {
            v.iter().map(|c| c / total).collect()
        } else {
            vec![1.0 / self.n_classes as f64; self.n_classes]
        }
    }

    pub fn predict_row(&self, row: &[T]) -> usize {
        argmax(&self.proba(row))
    }

    /// Unnormalized impurity decrease per feature, weighted by node share.
    pub fn impurity_decrease(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        let root_w = self.weighted_n[0];
        if root_w <= 0.0 {
            return imp;
        }
        for n in 0..self.n_nodes() {
            if self.is_leaf(n) {
                continue;
            }
            let (l, r) = (self.left[n], self.right[n]);
            let dec = self.weighted_n[n] * self.impurity[n]
                - self.weighted_n[l] * self.impurity[l]
                - self.weighted_n[r] * self.impurity[r];
            imp[self.feature[n]] += dec / root_w;
        }
        imp
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(rows: Vec<Vec<f64>>, y: Vec<usize>, params: TreeParams) -> Tree<f64> {
        let x = FeatureMatrix::from_plain(rows).unwrap();
        let weights = vec![1.0; y.len()];
        let n_classes = y.iter().max().unwrap() + 1;
        let b = Builder {
            x: &x,
            y: &y,
            weights: &weights,
            n_classes,
            params,
            max_features: usize::MAX,
        };
        b.build((0..y.len()).collect(), None)
    }

    #[test]
    fn midpoint_threshold() {
        let t = fit(
            vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]],
            vec![0, 0, 1, 1],
            TreeParams::default(),
        );
        assert_eq!(t.split_of(0), Some((0, 5.5)));
        assert_eq!(t.predict_row(&[5.0]), 0);
        assert_eq!(t.predict_row(&[6.0]), 1);
    }

    #[test]
    fn xor_needs_zero_gain_split() {
        let t = fit(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
            TreeParams::default(),
        );
        for (row, want) in [([0.0, 0.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1), ([1.0, 1.0], 0)] {
            assert_eq!(t.predict_row(&row), want);
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn min_samples_split_and_depth() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let t = fit(
            rows.clone(),
            y.clone(),
            TreeParams {
                min_samples_split: 100,
                ..Default::default()
            },
        );
        assert_eq!(t.n_nodes(), 1);
        let t = fit(
            rows,
            y,
            TreeParams {
                max_depth: Some(1),
                ..Default::default()
            },
        );
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn entropy_criterion() {
        assert!((impurity(Criterion::Entropy, &[1.0, 1.0], 2.0) - 1.0).abs() < 1e-12);
        assert!((impurity(Criterion::Gini, &[1.0, 1.0], 2.0) - 0.5).abs() < 1e-12);
        assert_eq!(impurity(Criterion::Entropy, &[3.0, 0.0], 3.0), 0.0);
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.6, 0.3]), 1);
    }
}
