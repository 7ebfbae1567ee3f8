//! Pairwise Markov random fields and three ways to get their marginals:
//! brute-force enumeration, naive mean field, and loopy belief propagation.
//!
//! All potentials are log-potentials. The joint is
//! `p(y) ∝ exp(Σ_i unary_i(y_i) + Σ_(i,j) pairwise_ij(y_i, y_j))`, with each
//! pairwise matrix indexed `[y_i][y_j]` for the canonical `i < j` orientation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, Graph};
use crate::marginals::{EdgeMarginals, NodeMarginals};
use crate::math::{log_sum_exp, softmax, softmax_in_place};

/// Log-potential given to non-observed classes of a clamped node.
pub const CLAMP_LOG_POTENTIAL: f64 = -1e30;
/// Largest joint state space [`exact_infer`] will enumerate.
pub const EXACT_STATE_CAP: f64 = 1e7;
/// Largest potential magnitude for which exact enumeration updates weights incrementally.
const INCREMENTAL_MAX_ABS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PairwisePotentials {
    /// One `c × c` compatibility matrix used by every edge.
    Shared(Vec<f64>),
    /// One `c × c` matrix per graph edge, in [`Graph::edges`] order.
    PerEdge(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMrf {
    graph: Graph,
    num_classes: usize,
    unary: Vec<f64>,
    pairwise: PairwisePotentials,
}

fn check_finite(what: impl FnOnce() -> String, xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{} has non-finite log-potentials",
            what()
        )));
    }
    Ok(())
}

impl PairwiseMrf {
    pub fn new(
        graph: Graph,
        num_classes: usize,
        unary: Vec<Vec<f64>>,
        pairwise: PairwisePotentials,
    ) -> Result<Self> {
        let c = num_classes;
        if c < 2 {
            return Err(Error::InvalidParameter(format!(
                "num_classes must be >= 2, got {c}"
            )));
        }
        if unary.len() != graph.num_nodes() {
            return Err(Error::DimensionMismatch(format!(
                "{} unary vectors for {} nodes",
                unary.len(),
                graph.num_nodes()
            )));
        }
        for (i, u) in unary.iter().enumerate() {
            if u.len() != c {
                return Err(Error::DimensionMismatch(format!(
                    "unary of node {i} has {} entries, expected {c}",
                    u.len()
                )));
            }
            check_finite(|| format!("unary of node {i}"), u)?;
        }
        let check_matrix = |what: String, m: &[f64]| -> Result<()> {
            if m.len() != c * c {
                return Err(Error::DimensionMismatch(format!(
                    "{what} has {} entries, expected {}",
                    m.len(),
                    c * c
                )));
            }
            check_finite(|| what, m)
        };
        match &pairwise {
            PairwisePotentials::Shared(m) => check_matrix("shared pairwise matrix".into(), m)?,
            PairwisePotentials::PerEdge(ms) => {
                if ms.len() != graph.num_edges() {
                    return Err(Error::DimensionMismatch(format!(
                        "{} pairwise matrices for {} edges",
                        ms.len(),
                        graph.num_edges()
                    )));
                }
                for (m, &(i, j)) in ms.iter().zip(graph.edges()) {
                    check_matrix(format!("pairwise matrix of edge ({i}, {j})"), m)?;
                }
            }
        }
        Ok(PairwiseMrf {
            graph,
            num_classes,
            unary: unary.concat(),
            pairwise,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn unary(&self, node: usize) -> &[f64] {
        let c = self.num_classes;
        &self.unary[node * c..(node + 1) * c]
    }

    pub fn pairwise(&self) -> &PairwisePotentials {
        &self.pairwise
    }

    /// Canonical-orientation matrix of edge `e`.
    pub fn pair_matrix(&self, e: usize) -> &[f64] {
        match &self.pairwise {
            PairwisePotentials::Shared(m) => m,
            PairwisePotentials::PerEdge(ms) => &ms[e],
        }
    }

    fn has_zero_pairwise(&self) -> bool {
        match &self.pairwise {
            PairwisePotentials::Shared(m) => m.iter().all(|&x| x == 0.0),
            PairwisePotentials::PerEdge(ms) => ms.iter().flatten().all(|&x| x == 0.0),
        }
    }

    /// Conditions on observed labels by pinning their unary potentials.
    ///
    /// The observed class gets log-potential 0 and every other class
    /// [`CLAMP_LOG_POTENTIAL`].
    pub fn clamp(&self, obs: &Observation) -> Result<PairwiseMrf> {
        let c = self.num_classes;
        let mut out = self.clone();
        for (&node, &class) in &obs.labels {
            if node >= self.num_nodes() {
                return Err(Error::NodeOutOfRange {
                    id: node,
                    num_nodes: self.num_nodes(),
                });
            }
            if class >= c {
                return Err(Error::ClassOutOfRange {
                    node,
                    class,
                    num_classes: c,
                });
            }
            for (k, u) in out.unary[node * c..(node + 1) * c].iter_mut().enumerate() {
                *u = if k == class { 0.0 } else { CLAMP_LOG_POTENTIAL };
            }
        }
        Ok(out)
    }
}

/// Observed class per node.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub labels: BTreeMap<usize, usize>,
}

impl Observation {
    pub fn new(labels: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Observation {
            labels: labels.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub node_marginals: NodeMarginals,
    /// Over every edge of the MRF's graph.
    pub edge_marginals: EdgeMarginals,
    pub converged: bool,
    pub iterations: usize,
    pub final_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceMethod {
    Exact,
    MeanField,
    Lbp,
}

impl InferenceMethod {
    pub fn name(self) -> &'static str {
        match self {
            InferenceMethod::Exact => "exact",
            InferenceMethod::MeanField => "meanfield",
            InferenceMethod::Lbp => "lbp",
        }
    }
}

/// Brute-force marginals over all `c^n` joint assignments.
pub fn exact_infer(mrf: &PairwiseMrf) -> Result<InferenceResult> {
    let n = mrf.num_nodes();
    let c = mrf.num_classes;
    let states = (c as f64).powi(n as i32);
    if states > EXACT_STATE_CAP {
        return Err(Error::TooLarge {
            states,
            cap: EXACT_STATE_CAP,
        });
    }
    let edges = mrf.graph.edges();
    let adj = mrf.graph.adjacency();
    let log_weight = |y: &[usize]| -> f64 {
        let mut w: f64 = (0..n).map(|i| mrf.unary(i)[y[i]]).sum();
        for (e, &(i, j)) in edges.iter().enumerate() {
            w += mrf.pair_matrix(e)[y[i] * c + y[j]];
        }
        w
    };
    // Change in log-weight when node `k` moves from `old` to `y[k]`.
    let step = |k: usize, old: usize, y: &[usize]| -> f64 {
        let new = y[k];
        let mut d = mrf.unary(k)[new] - mrf.unary(k)[old];
        for &(j, e) in &adj[k] {
            let m = mrf.pair_matrix(e);
            d += if k < j {
                m[new * c + y[j]] - m[old * c + y[j]]
            } else {
                m[y[j] * c + new] - m[y[j] * c + old]
            };
        }
        d
    };
    // Odometer over assignments, node 0 fastest. The log-weight is updated
    // incrementally for the two fastest nodes and recomputed whenever a slower
    // node moves, so rounding drift spans at most c^2 states. Huge potentials
    // (clamping) would cancel catastrophically, so they always take the full
    // recomputation.
    let moderate = |v: &f64| v.abs() <= INCREMENTAL_MAX_ABS;
    let incremental = mrf.unary.iter().all(moderate)
        && match &mrf.pairwise {
            PairwisePotentials::Shared(m) => m.iter().all(moderate),
            PairwisePotentials::PerEdge(ms) => ms.iter().flatten().all(moderate),
        };
    let fast_digits = if incremental { 2 } else { 0 };
    let for_each_state = |f: &mut dyn FnMut(&[usize], f64)| {
        let mut y = vec![0usize; n];
        let mut w = log_weight(&y);
        loop {
            f(&y, w);
            let mut k = 0;
            loop {
                if k == n {
                    return;
                }
                let old = y[k];
                y[k] = (old + 1) % c;
                if k < fast_digits {
                    w += step(k, old, &y);
                }
                if y[k] != 0 {
                    break;
                }
                k += 1;
            }
            if k >= fast_digits {
                w = log_weight(&y);
            }
        }
    };

    let mut max_log = f64::NEG_INFINITY;
    for_each_state(&mut |_, w| max_log = max_log.max(w));

    let mut z = 0.0;
    let mut node = vec![0.0; n * c];
    let mut edge = vec![0.0; edges.len() * c * c];
    for_each_state(&mut |y, lw| {
        let w = (lw - max_log).exp();
        z += w;
        for i in 0..n {
            node[i * c + y[i]] += w;
        }
        for (e, &(i, j)) in edges.iter().enumerate() {
            edge[e * c * c + y[i] * c + y[j]] += w;
        }
    });
    node.iter_mut().chain(edge.iter_mut()).for_each(|v| *v /= z);

    Ok(InferenceResult {
        node_marginals: NodeMarginals::from_parts(c, node),
        edge_marginals: EdgeMarginals::from_parts(c, edges.to_vec(), edge),
        converged: true,
        iterations: 1,
        final_delta: 0.0,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFieldInit {
    /// `softmax(unary_i)`
    #[default]
    Unary,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub init: MeanFieldInit,
}

impl Default for MeanFieldOptions {
    fn default() -> Self {
        MeanFieldOptions {
            max_iters: 1000,
            tol: 1e-8,
            init: MeanFieldInit::Unary,
        }
    }
}

/// Log-field of node `i` given the current neighbor distributions.
fn mean_field_logits(
    mrf: &PairwiseMrf,
    adj: &[(usize, usize)],
    i: usize,
    q: &[f64],
    out: &mut [f64],
) {
    let c = mrf.num_classes;
    out.copy_from_slice(mrf.unary(i));
    for &(j, e) in adj {
        let pm = mrf.pair_matrix(e);
        let qj = &q[j * c..(j + 1) * c];
        for (l, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for (m, &p) in qj.iter().enumerate() {
                // pm is indexed [smaller endpoint][larger endpoint]
                let v = if i < j { pm[l * c + m] } else { pm[m * c + l] };
                s += p * v;
            }
            *o += s;
        }
    }
}

/// One asynchronous sweep in ascending node order; returns the largest
/// absolute change of any probability.
fn mean_field_sweep(mrf: &PairwiseMrf, adj: &[Vec<(usize, usize)>], q: &mut [f64]) -> f64 {
    let c = mrf.num_classes;
    let mut buf = vec![0.0; c];
    let mut delta: f64 = 0.0;
    for i in 0..mrf.num_nodes() {
        mean_field_logits(mrf, &adj[i], i, q, &mut buf);
        softmax_in_place(&mut buf);
        for (old, &new) in q[i * c..(i + 1) * c].iter_mut().zip(&buf) {
            delta = delta.max((new - *old).abs());
            *old = new;
        }
    }
    delta
}

/// Coordinate-ascent naive mean field. Edge marginals are `q_i ⊗ q_j`.
pub fn mean_field_infer(mrf: &PairwiseMrf, opts: &MeanFieldOptions) -> Result<InferenceResult> {
    if opts.tol.is_nan() || opts.tol < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tol must be >= 0, got {}",
            opts.tol
        )));
    }
    let n = mrf.num_nodes();
    let c = mrf.num_classes;
    let adj = mrf.graph.adjacency();
    let mut q: Vec<f64> = match opts.init {
        MeanFieldInit::Unary => (0..n).flat_map(|i| softmax(mrf.unary(i))).collect(),
        MeanFieldInit::Uniform => vec![1.0 / c as f64; n * c],
    };
    let mut iterations = 0;
    let mut delta = f64::INFINITY;
    let mut converged = false;
    while iterations < opts.max_iters {
        delta = mean_field_sweep(mrf, &adj, &mut q);
        iterations += 1;
        if delta < opts.tol {
            converged = true;
            break;
        }
    }
    let edges = mrf.graph.edges();
    let mut edge = Vec::with_capacity(edges.len() * c * c);
    for &(i, j) in edges {
        for l in 0..c {
            edge.extend((0..c).map(|m| q[i * c + l] * q[j * c + m]));
        }
    }
    Ok(InferenceResult {
        node_marginals: NodeMarginals::from_parts(c, q),
        edge_marginals: EdgeMarginals::from_parts(c, edges.to_vec(), edge),
        converged,
        iterations,
        final_delta: if iterations == 0 { 0.0 } else { delta },
    })
}

/// Fixed-point residual of the mean-field update at `q` (flat, row-major):
/// the largest change one more sweep would make.
pub fn mean_field_residual(mrf: &PairwiseMrf, q: &NodeMarginals) -> f64 {
    let mut q = q.as_flat().to_vec();
    mean_field_sweep(mrf, &mrf.graph.adjacency(), &mut q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Weight of the previous log-message in `[0, 1)`.
    pub damping: f64,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            max_iters: 100,
            tol: 1e-8,
            damping: 0.0,
        }
    }
}

/// Directed message slot: `2e` carries `i → j`, `2e + 1` carries `j → i`
/// for canonical edge `e = (i, j)`.
struct Messages {
    c: usize,
    data: Vec<f64>,
}

impl Messages {
    fn flat(num_edges: usize, c: usize) -> Self {
        Messages {
            c,
            data: vec![-(c as f64).ln(); 2 * num_edges * c],
        }
    }

    fn slot(&self, k: usize) -> &[f64] {
        &self.data[k * self.c..(k + 1) * self.c]
    }

    fn slot_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.c..(k + 1) * self.c]
    }
}

/// `unary_i + Σ incoming messages`, per node.
fn log_beliefs(mrf: &PairwiseMrf, msgs: &Messages) -> Vec<f64> {
    let c = mrf.num_classes;
    let mut b = mrf.unary.clone();
    for (e, &(i, j)) in mrf.graph.edges().iter().enumerate() {
        for k in 0..c {
            b[j * c + k] += msgs.slot(2 * e)[k];
            b[i * c + k] += msgs.slot(2 * e + 1)[k];
        }
    }
    b
}

/// Cavity log-field of the endpoint `node` of edge `e`, excluding the
/// message arriving over `e` in slot `incoming`.
fn cavity(beliefs: &[f64], msgs: &Messages, node: usize, incoming: usize, out: &mut [f64]) {
    let c = msgs.c;
    for k in 0..c {
        out[k] = beliefs[node * c + k] - msgs.slot(incoming)[k];
    }
}

fn normalize_log(xs: &mut [f64]) {
    let z = log_sum_exp(xs);
    xs.iter_mut().for_each(|x| *x -= z);
}

/// Synchronous sum-product belief propagation in log space.
///
/// Messages start uniform and are updated from the previous iteration's
/// values only, so the outcome does not depend on edge order. Convergence is
/// the largest absolute change of any normalized message probability.
pub fn loopy_bp_infer(mrf: &PairwiseMrf, opts: &BpOptions) -> Result<InferenceResult> {
    if !(0.0..1.0).contains(&opts.damping) {
        return Err(Error::InvalidParameter(format!(
            "damping must be in [0, 1), got {}",
            opts.damping
        )));
    }
    if opts.tol.is_nan() || opts.tol < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "tol must be >= 0, got {}",
            opts.tol
        )));
    }
    let c = mrf.num_classes;
    let edges = mrf.graph.edges();
    let mut msgs = Messages::flat(edges.len(), c);
    let mut next = Messages::flat(edges.len(), c);
    let mut cav = vec![0.0; c];
    let mut terms = vec![0.0; c];

    let mut iterations = 0;
    let mut delta = 0.0;
    let mut converged = edges.is_empty();
    while !converged && iterations < opts.max_iters {
        let beliefs = log_beliefs(mrf, &msgs);
        for (e, &(i, j)) in edges.iter().enumerate() {
            let pm = mrf.pair_matrix(e);
            // i -> j
            cavity(&beliefs, &msgs, i, 2 * e + 1, &mut cav);
            for m in 0..c {
                for l in 0..c {
                    terms[l] = cav[l] + pm[l * c + m];
                }
                next.slot_mut(2 * e)[m] = log_sum_exp(&terms);
            }
            // j -> i
            cavity(&beliefs, &msgs, j, 2 * e, &mut cav);
            for l in 0..c {
                for m in 0..c {
                    terms[m] = cav[m] + pm[l * c + m];
                }
                next.slot_mut(2 * e + 1)[l] = log_sum_exp(&terms);
            }
        }
        delta = 0.0f64;
        for k in 0..2 * edges.len() {
            let slot = next.slot_mut(k);
            normalize_log(slot);
            if opts.damping > 0.0 {
                for (v, &old) in slot.iter_mut().zip(msgs.slot(k)) {
                    *v = (1.0 - opts.damping) * *v + opts.damping * old;
                }
                normalize_log(slot);
            }
            for (&v, &old) in slot.iter().zip(msgs.slot(k)) {
                delta = delta.max((v.exp() - old.exp()).abs());
            }
        }
        std::mem::swap(&mut msgs, &mut next);
        iterations += 1;
        converged = delta < opts.tol;
    }

    let beliefs = log_beliefs(mrf, &msgs);
    let mut node = beliefs.clone();
    for row in node.chunks_mut(c) {
        softmax_in_place(row);
    }
    let mut edge = Vec::with_capacity(edges.len() * c * c);
    let mut cav_j = vec![0.0; c];
    let mut joint = vec![0.0; c * c];
    for (e, &(i, j)) in edges.iter().enumerate() {
        let pm = mrf.pair_matrix(e);
        cavity(&beliefs, &msgs, i, 2 * e + 1, &mut cav);
        cavity(&beliefs, &msgs, j, 2 * e, &mut cav_j);
        for l in 0..c {
            for m in 0..c {
                joint[l * c + m] = cav[l] + cav_j[m] + pm[l * c + m];
            }
        }
        softmax_in_place(&mut joint);
        edge.extend_from_slice(&joint);
    }
    Ok(InferenceResult {
        node_marginals: NodeMarginals::from_parts(c, node),
        edge_marginals: EdgeMarginals::from_parts(c, edges.to_vec(), edge),
        converged,
        iterations,
        final_delta: delta,
    })
}

/// Options for [`infer`]; only the fields relevant to the method are read.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InferOptions {
    pub mean_field: MeanFieldOptions,
    pub bp: BpOptions,
}

pub fn infer(
    mrf: &PairwiseMrf,
    method: InferenceMethod,
    opts: &InferOptions,
) -> Result<InferenceResult> {
    log::debug!(
        "inference: method={} nodes={} edges={} zero_pairwise={}",
        method.name(),
        mrf.num_nodes(),
        mrf.graph.num_edges(),
        mrf.has_zero_pairwise()
    );
    let r = match method {
        InferenceMethod::Exact => exact_infer(mrf),
        InferenceMethod::MeanField => mean_field_infer(mrf, &opts.mean_field),
        InferenceMethod::Lbp => loopy_bp_infer(mrf, &opts.bp),
    }?;
    if !r.converged {
        log::warn!(
            "{} did not converge after {} iterations (delta {:e})",
            method.name(),
            r.iterations,
            r.final_delta
        );
    }
    Ok(r)
}

/// Orders a map of canonical-edge matrices to match `graph`; every graph
/// edge must be present and no other key may appear.
pub fn per_edge_from_map(
    graph: &Graph,
    mut matrices: BTreeMap<Edge, Vec<f64>>,
) -> Result<PairwisePotentials> {
    let mut out = Vec::with_capacity(graph.num_edges());
    for &(i, j) in graph.edges() {
        out.push(matrices.remove(&(i, j)).ok_or(Error::MissingEdge(i, j))?);
    }
    if let Some((&(i, j), _)) = matrices.iter().next() {
        return Err(Error::InvalidParameter(format!(
            "pairwise potentials given for ({i}, {j}), which is not a graph edge"
        )));
    }
    Ok(PairwisePotentials::PerEdge(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    fn two_node(strength: f64) -> PairwiseMrf {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        PairwiseMrf::new(
            g,
            2,
            vec![vec![0.0; 2]; 2],
            PairwisePotentials::Shared(vec![strength, 0.0, 0.0, strength]),
        )
        .unwrap()
    }

    #[test]
    fn single_node_uniform() {
        let g = Graph::new(1, []).unwrap();
        let mrf = PairwiseMrf::new(
            g,
            2,
            vec![vec![0.0, 0.0]],
            PairwisePotentials::Shared(vec![0.0; 4]),
        )
        .unwrap();
        let r = exact_infer(&mrf).unwrap();
        assert!(close(r.node_marginals.row(0), &[0.5, 0.5], 1e-15));
    }

    #[test]
    fn attractive_pair_prefers_agreement() {
        let r = exact_infer(&two_node(1.5)).unwrap();
        let m = r.edge_marginals.matrix(0);
        assert!(m[0] + m[3] > m[1] + m[2]);
    }

    #[test]
    fn clamping_pins_observed_node() {
        let mrf = two_node(1.0).clamp(&Observation::new([(0, 1)])).unwrap();
        let r = exact_infer(&mrf).unwrap();
        assert!(close(r.node_marginals.row(0), &[0.0, 1.0], 1e-300));
        let m = r.edge_marginals.matrix(0);
        assert!(m[0] < 1e-300 && m[1] < 1e-300);
        let both = two_node(1.0)
            .clamp(&Observation::new([(0, 1), (1, 0)]))
            .unwrap();
        let r = exact_infer(&both).unwrap();
        assert_eq!(r.edge_marginals.matrix(0), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn clamp_validates() {
        let mrf = two_node(1.0);
        assert!(mrf.clamp(&Observation::new([(5, 0)])).is_err());
        assert!(mrf.clamp(&Observation::new([(0, 2)])).is_err());
        let once = mrf.clamp(&Observation::new([(0, 1)])).unwrap();
        let twice = once.clamp(&Observation::new([(0, 1)])).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn exact_rejects_large_instances() {
        let g = Graph::new(24, []).unwrap();
        let mrf = PairwiseMrf::new(
            g,
            2,
            vec![vec![0.0; 2]; 24],
            PairwisePotentials::Shared(vec![0.0; 4]),
        )
        .unwrap();
        assert!(matches!(exact_infer(&mrf), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn edgeless_mean_field_is_softmax_in_one_sweep() {
        let g = Graph::new(2, []).unwrap();
        let unary = vec![vec![0.3, -1.0, 2.0], vec![0.0, 0.0, 1.0]];
        let mrf = PairwiseMrf::new(
            g,
            3,
            unary.clone(),
            PairwisePotentials::Shared(vec![0.0; 9]),
        )
        .unwrap();
        let r = mean_field_infer(&mrf, &MeanFieldOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.node_marginals.row(0), softmax(&unary[0]).as_slice());
    }

    #[test]
    fn zero_pairwise_bp_one_iteration() {
        let mrf = PairwiseMrf::new(
            Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap(),
            2,
            vec![vec![0.2, -0.4], vec![1.0, 0.0], vec![0.0, 0.0]],
            PairwisePotentials::Shared(vec![0.0; 4]),
        )
        .unwrap();
        let r = loopy_bp_infer(&mrf, &BpOptions::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!(close(
            r.node_marginals.row(0),
            &softmax(&[0.2, -0.4]),
            1e-15
        ));
    }

    #[test]
    fn bad_damping_rejected() {
        let opts = BpOptions {
            damping: 1.0,
            ..Default::default()
        };
        assert!(loopy_bp_infer(&two_node(1.0), &opts).is_err());
    }

    #[test]
    fn damped_bp_still_exact_on_a_pair() {
        let opts = BpOptions {
            damping: 0.5,
            max_iters: 200,
            ..Default::default()
        };
        let mrf = PairwiseMrf::new(
            Graph::new(2, [(0, 1)]).unwrap(),
            2,
            vec![vec![0.4, 0.0], vec![0.0, -0.3]],
            PairwisePotentials::Shared(vec![1.0, -0.5, 0.2, 0.7]),
        )
        .unwrap();
        let bp = loopy_bp_infer(&mrf, &opts).unwrap();
        let ex = exact_infer(&mrf).unwrap();
        assert!(bp.converged);
        assert!(close(
            bp.edge_marginals.as_flat(),
            ex.edge_marginals.as_flat(),
            1e-7
        ));
    }

    #[test]
    fn per_edge_map_must_match_graph() {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let mut m = BTreeMap::new();
        m.insert((0, 1), vec![0.0; 4]);
        assert!(per_edge_from_map(&g, m.clone()).is_err());
        m.insert((1, 2), vec![0.0; 4]);
        m.insert((0, 2), vec![0.0; 4]);
        assert!(per_edge_from_map(&g, m).is_err());
    }
}
