//! Test-only oracles. Nothing here calls into the code paths it checks.
#![allow(dead_code)]

use std::collections::HashSet;

use graph_calib::graph::{Graph, Labels, NodePartition};
use graph_calib::marginals::{NodeMarginals, ValidationMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// ECE by scanning every bin over every item.
pub fn naive_ece(conf: &[f64], correct: &[bool], m: usize) -> f64 {
    let n = conf.len() as f64;
    let mut total = 0.0;
    for k in 1..=m {
        let lo = (k - 1) as f64 / m as f64;
        let hi = k as f64 / m as f64;
        let mut count = 0.0;
        let mut c_sum = 0.0;
        let mut a_sum = 0.0;
        for (idx, &c) in conf.iter().enumerate() {
            let inside = (lo < c && c <= hi) || (k == 1 && c == 0.0);
            if inside {
                count += 1.0;
                c_sum += c;
                a_sum += if correct[idx] { 1.0 } else { 0.0 };
            }
        }
        if count > 0.0 {
            total += count / n * (a_sum / count - c_sum / count).abs();
        }
    }
    total
}

/// Test edges by checking every node pair against a hash set.
pub fn brute_test_edges(graph: &Graph, mask: &[bool]) -> Vec<(usize, usize)> {
    let set: HashSet<(usize, usize)> = graph.edges().iter().copied().collect();
    let n = graph.num_nodes();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if mask[i] && mask[j] && set.contains(&(i, j)) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Fraction of test nodes appearing in at least one of `edges`, one node at a
/// time.
pub fn incidence_k(edges: &[(usize, usize)], mask: &[bool]) -> f64 {
    let test: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let kept = test
        .iter()
        .filter(|&&v| edges.iter().any(|&(a, b)| a == v || b == v))
        .count();
    kept as f64 / test.len() as f64
}

fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..xs.len() {
        if xs[k] > xs[best] {
            best = k;
        }
    }
    best
}

/// Per-node `(confidence, correct)` from raw probability rows.
pub fn node_items(probs: &[Vec<f64>], labels: &[usize], mask: &[bool]) -> (Vec<f64>, Vec<bool>) {
    let mut conf = Vec::new();
    let mut ok = Vec::new();
    for i in 0..probs.len() {
        if mask[i] {
            let k = argmax_lowest(&probs[i]);
            conf.push(probs[i][k]);
            ok.push(k == labels[i]);
        }
    }
    (conf, ok)
}

/// Per-edge `(confidence, correct)` for product-form edge marginals.
pub fn product_edge_items(
    probs: &[Vec<f64>],
    labels: &[usize],
    edges: &[(usize, usize)],
) -> (Vec<f64>, Vec<bool>) {
    let mut conf = Vec::new();
    let mut ok = Vec::new();
    for &(i, j) in edges {
        let mut best = 0.0f64;
        for a in &probs[i] {
            for b in &probs[j] {
                best = best.max(a * b);
            }
        }
        conf.push(best);
        ok.push(argmax_lowest(&probs[i]) == labels[i] && argmax_lowest(&probs[j]) == labels[j]);
    }
    (conf, ok)
}

pub struct Instance {
    pub graph: Graph,
    pub labels: Labels,
    pub partition: NodePartition,
    pub marginals: NodeMarginals,
    pub raw_edges: Vec<(usize, usize)>,
    pub probs: Vec<Vec<f64>>,
}

/// Random graph with random labels, split and peaked random predictions.
pub fn random_instance(seed: u64, n: usize, c: usize, edge_prob: f64) -> Instance {
    let mut r = rng(seed);
    let mut raw_edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.gen::<f64>() < edge_prob {
                raw_edges.push(if r.gen::<bool>() { (i, j) } else { (j, i) });
            }
        }
    }
    let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..c)).collect();
    let mut mask: Vec<bool> = (0..n).map(|_| r.gen::<f64>() < 0.8).collect();
    mask[0] = true;
    let probs: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let sharp = r.gen_range(0.5..6.0);
            let mut v: Vec<f64> = (0..c).map(|_| r.gen::<f64>().powf(sharp) + 1e-9).collect();
            let s: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= s);
            v
        })
        .collect();
    Instance {
        graph: Graph::new(n, raw_edges.clone()).unwrap(),
        labels: Labels::new(labels, c).unwrap(),
        partition: NodePartition::new(mask),
        marginals: NodeMarginals::from_rows(probs.clone(), ValidationMode::Strict).unwrap(),
        raw_edges,
        probs,
    }
}

/// Random tree on `n` nodes: node `i > 0` attaches to a uniform earlier node.
pub fn random_tree(r: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (r.gen_range(0..i), i)).collect()
}

pub fn uniform_matrix(
    r: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| r.gen_range(lo..hi)).collect())
        .collect()
}

/// Node and edge marginals of a chain `0 - 1 - ... - n-1` by forward and
/// backward transfer-matrix products in probability space.
///
/// `unary[i][a]` and `pair[e][a][b]` are log-potentials; edge `e` joins
/// `e` and `e + 1`.
pub fn chain_transfer_matrix(
    unary: &[Vec<f64>],
    pair: &[Vec<Vec<f64>>],
) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let n = unary.len();
    let c = unary[0].len();
    let phi: Vec<Vec<f64>> = unary
        .iter()
        .map(|u| u.iter().map(|x| x.exp()).collect())
        .collect();
    let psi: Vec<Vec<Vec<f64>>> = pair
        .iter()
        .map(|m| {
            m.iter()
                .map(|r| r.iter().map(|x| x.exp()).collect())
                .collect()
        })
        .collect();
    // alpha[i][a]: mass of nodes 0..=i with y_i = a
    let mut alpha = vec![vec![0.0; c]; n];
    alpha[0] = phi[0].clone();
    for i in 1..n {
        for b in 0..c {
            alpha[i][b] = phi[i][b]
                * (0..c)
                    .map(|a| alpha[i - 1][a] * psi[i - 1][a][b])
                    .sum::<f64>();
        }
    }
    // beta[i][a]: mass of nodes i+1.. given y_i = a
    let mut beta = vec![vec![1.0; c]; n];
    for i in (0..n - 1).rev() {
        for a in 0..c {
            beta[i][a] = (0..c)
                .map(|b| psi[i][a][b] * phi[i + 1][b] * beta[i + 1][b])
                .sum();
        }
    }
    let z: f64 = alpha[n - 1].iter().sum();
    let nodes = (0..n)
        .map(|i| (0..c).map(|a| alpha[i][a] * beta[i][a] / z).collect())
        .collect();
    let edges = (0..n - 1)
        .map(|i| {
            (0..c)
                .map(|a| {
                    (0..c)
                        .map(|b| alpha[i][a] * psi[i][a][b] * phi[i + 1][b] * beta[i + 1][b] / z)
                        .collect()
                })
                .collect()
        })
        .collect();
    (nodes, edges)
}

/// Node marginals by enumerating only assignments that agree with `observed`.
pub fn brute_conditional(
    n: usize,
    c: usize,
    edges: &[(usize, usize)],
    unary: &[Vec<f64>],
    pair: &[Vec<Vec<f64>>],
    observed: &[(usize, usize)],
) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; c]; n];
    let mut z = 0.0;
    let total = c.pow(n as u32);
    for code in 0..total {
        let y: Vec<usize> = (0..n).map(|i| (code / c.pow(i as u32)) % c).collect();
        if observed.iter().any(|&(v, l)| y[v] != l) {
            continue;
        }
        let mut lw = 0.0;
        for i in 0..n {
            lw += unary[i][y[i]];
        }
        for (e, &(i, j)) in edges.iter().enumerate() {
            lw += pair[e][y[i]][y[j]];
        }
        let w = f64::exp(lw);
        z += w;
        for i in 0..n {
            out[i][y[i]] += w;
        }
    }
    for row in &mut out {
        row.iter_mut().for_each(|v| *v /= z);
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
