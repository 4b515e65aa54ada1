use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::EvalError;
use crate::seed::rng_for;

/// Indices grouped by label, in label order; members keep ascending order.
fn by_class<S: AsRef<str>>(y: &[S]) -> BTreeMap<&str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in y.iter().enumerate() {
        groups.entry(s.as_ref()).or_default().push(i);
    }
    groups
}

/// Splits `0..y.len()` into `k` disjoint folds with per-class counts that
/// differ by at most one across folds. Each fold is sorted.
///
/// Members of each class are shuffled and dealt round-robin; the dealing
/// offset carries over between classes so fold sizes stay balanced too.
pub fn stratified_kfold<S: AsRef<str>>(y: &[S], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    let groups = by_class(y);
    if let Some((class, members)) = groups.iter().find(|(_, m)| m.len() < k) {
        return Err(EvalError::Stratification {
            class: class.to_string(),
            count: members.len(),
            k,
        });
    }
    let mut rng = rng_for(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for (_, mut members) in groups {
        members.shuffle(&mut rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified train/test split; every class with at least two members lands
/// on both sides. Returns sorted `(train, test)`.
pub fn stratified_split<S: AsRef<str>>(
    y: &[S],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::InvalidInput(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = rng_for(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut members) in by_class(y) {
        if members.len() < 2 {
            return Err(EvalError::Stratification {
                class: class.to_string(),
                count: members.len(),
                k: 2,
            });
        }
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * test_fraction).round() as usize).clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Draws `size` of the rows in `pool` with class proportions preserved
/// (largest-remainder allocation, at least one row per class when `size`
/// allows). Returns sorted original indices.
pub fn stratified_subsample<S: AsRef<str>>(
    y: &[S],
    pool: &[usize],
    size: usize,
    seed: u64,
) -> Result<Vec<usize>, EvalError> {
    if size > pool.len() || size == 0 {
        return Err(EvalError::InvalidSize {
            size,
            available: pool.len(),
        });
    }
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for &i in pool {
        groups.entry(y[i].as_ref()).or_default().push(i);
    }
    let n = pool.len() as f64;
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let exact: Vec<f64> = groups.iter().map(|g| g.len() as f64 * size as f64 / n).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    if size >= groups.len() {
        for t in &mut take {
            *t = (*t).max(1);
        }
    }
    // hand out (or reclaim) the remainder by fractional part, ties to class order
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut assigned: usize = take.iter().sum();
    let mut cursor = 0;
    while assigned < size {
        let c = order[cursor % order.len()];
        if take[c] < groups[c].len() {
            take[c] += 1;
            assigned += 1;
        }
        cursor += 1;
    }
    cursor = 0;
    while assigned > size {
        let c = order[order.len() - 1 - cursor % order.len()];
        if take[c] > 1 {
            take[c] -= 1;
            assigned -= 1;
        }
        cursor += 1;
    }
    let mut rng = rng_for(seed);
    let mut out = Vec::with_capacity(size);
    for (mut g, t) in groups.into_iter().zip(take) {
        g.shuffle(&mut rng);
        out.extend_from_slice(&g[..t]);
    }
    out.sort_unstable();
    Ok(out)
}
