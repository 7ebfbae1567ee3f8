//! Deterministic fixture generators.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)`; independent parts of a dataset draw from separate
//! ChaCha streams so changing one never shifts another:
//!
//! | stream | consumer |
//! |--------|----------|
//! | 0 | node labels |
//! | 1 | random edges (`erdos_renyi`, `sbm`) |
//! | 2 | test mask |
//! | 3 | predictions |

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, Graph, Labels, NodePartition};
use crate::marginals::{NodeMarginals, ValidationMode};
use crate::math::softmax_in_place;

const LABEL_STREAM: u64 = 0;
const EDGE_STREAM: u64 = 1;
const MASK_STREAM: u64 = 2;
const PREDICTION_STREAM: u64 = 3;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Chain,
    Cycle,
    Grid,
    ErdosRenyi,
    Sbm,
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "chain" => GraphKind::Chain,
            "cycle" => GraphKind::Cycle,
            "grid" => GraphKind::Grid,
            "erdos_renyi" | "er" => GraphKind::ErdosRenyi,
            "sbm" => GraphKind::Sbm,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown graph kind {other:?} (chain, cycle, grid, erdos_renyi, sbm)"
                )))
            }
        })
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Chain => "chain",
            GraphKind::Cycle => "cycle",
            GraphKind::Grid => "grid",
            GraphKind::ErdosRenyi => "erdos_renyi",
            GraphKind::Sbm => "sbm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub kind: GraphKind,
    pub num_nodes: usize,
    pub num_classes: usize,
    /// Target fraction of same-label edges; `sbm` only.
    pub homophily: f64,
    /// Expected mean degree; `erdos_renyi` and `sbm` only.
    pub density: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(kind: GraphKind, num_nodes: usize, num_classes: usize, seed: u64) -> Self {
        SynthSpec {
            kind,
            num_nodes,
            num_classes,
            homophily: 0.8,
            density: 4.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.num_classes < 2 {
            return bad(format!("classes must be >= 2, got {}", self.num_classes));
        }
        if self.num_nodes == 0 {
            return bad("nodes must be >= 1".into());
        }
        if self.kind == GraphKind::Cycle && self.num_nodes < 3 {
            return bad(format!("a cycle needs >= 3 nodes, got {}", self.num_nodes));
        }
        if !(0.0..=1.0).contains(&self.homophily) {
            return bad(format!(
                "homophily must be in [0, 1], got {}",
                self.homophily
            ));
        }
        if !self.density.is_finite() || self.density < 0.0 {
            return bad(format!(
                "density must be a finite value >= 0, got {}",
                self.density
            ));
        }
        Ok(())
    }

    fn target_edges(&self) -> Result<usize> {
        let n = self.num_nodes as f64;
        let m = (n * self.density / 2.0).round() as usize;
        let max = self.num_nodes * (self.num_nodes - 1) / 2;
        if m > max {
            return Err(Error::InvalidParameter(format!(
                "density {} asks for {m} edges, at most {max} fit on {} nodes",
                self.density, self.num_nodes
            )));
        }
        Ok(m)
    }
}

/// Builds the graph and uniformly drawn labels for `spec`.
///
/// `sbm` draws `round(n · density / 2)` distinct edges. Each draw picks a
/// uniform endpoint `u`, then with probability `homophily` a partner from
/// `u`'s class and otherwise from the other classes; self-loops and
/// duplicates are rejected and redrawn.
pub fn gen_graph(spec: &SynthSpec) -> Result<(Graph, Labels)> {
    spec.validate()?;
    let n = spec.num_nodes;
    let c = spec.num_classes;
    let mut label_rng = rng(spec.seed, LABEL_STREAM);
    let labels: Vec<usize> = (0..n).map(|_| label_rng.gen_range(0..c)).collect();

    let edges: Vec<Edge> = match spec.kind {
        GraphKind::Chain => (1..n).map(|i| (i - 1, i)).collect(),
        GraphKind::Cycle => (0..n).map(|i| canonical(i, (i + 1) % n)).collect(),
        GraphKind::Grid => {
            let cols = (n as f64).sqrt().ceil() as usize;
            let mut e = Vec::new();
            for id in 0..n {
                if (id % cols) + 1 < cols && id + 1 < n {
                    e.push((id, id + 1));
                }
                if id + cols < n {
                    e.push((id, id + cols));
                }
            }
            e
        }
        GraphKind::ErdosRenyi => {
            let target = spec.target_edges()?;
            let mut r = rng(spec.seed, EDGE_STREAM);
            sample_edges(target, || {
                let u = r.gen_range(0..n);
                let v = r.gen_range(0..n);
                (u != v).then_some((u, v))
            })?
        }
        GraphKind::Sbm => {
            let target = spec.target_edges()?;
            let mut members = vec![Vec::new(); c];
            for (i, &l) in labels.iter().enumerate() {
                members[l].push(i);
            }
            let mut r = rng(spec.seed, EDGE_STREAM);
            sample_edges(target, || {
                let u = r.gen_range(0..n);
                let same = &members[labels[u]];
                let v = if r.gen::<f64>() < spec.homophily {
                    same[r.gen_range(0..same.len())]
                } else {
                    if same.len() == n {
                        return None;
                    }
                    // uniform over other-class nodes; redraw only the partner so
                    // the class coin keeps probability `homophily`
                    loop {
                        let v = r.gen_range(0..n);
                        if labels[v] != labels[u] {
                            break v;
                        }
                    }
                };
                (u != v).then_some((u, v))
            })?
        }
    };
    Ok((Graph::new(n, edges)?, Labels::new(labels, c)?))
}

fn sample_edges(target: usize, mut draw: impl FnMut() -> Option<Edge>) -> Result<Vec<Edge>> {
    let max_attempts = 100 * target + 10_000;
    let mut seen = HashSet::with_capacity(target);
    let mut out = Vec::with_capacity(target);
    let mut attempts = 0;
    while out.len() < target {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidParameter(format!(
                "placed only {} of {target} edges after {max_attempts} draws; \
                 lower the density or relax the homophily target",
                out.len()
            )));
        }
        if let Some((u, v)) = draw() {
            let e = canonical(u, v);
            if seen.insert(e) {
                out.push(e);
            }
        }
    }
    Ok(out)
}

/// Marks exactly `round(n · test_fraction)` nodes as test nodes, chosen
/// uniformly.
pub fn gen_mask(num_nodes: usize, test_fraction: f64, seed: u64) -> Result<NodePartition> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must be in [0, 1], got {test_fraction}"
        )));
    }
    let k = (num_nodes as f64 * test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..num_nodes).collect();
    order.shuffle(&mut rng(seed, MASK_STREAM));
    let mut mask = vec![false; num_nodes];
    for &i in &order[..k] {
        mask[i] = true;
    }
    Ok(NodePartition::new(mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiscalibrationSpec {
    pub temperature: f64,
    /// Probability of predicting a uniformly chosen wrong class.
    pub noise: f64,
    /// Mass spread over the non-chosen classes before temperature scaling.
    pub epsilon: f64,
    pub seed: u64,
}

impl MiscalibrationSpec {
    pub fn new(temperature: f64, noise: f64, seed: u64) -> Self {
        MiscalibrationSpec {
            temperature,
            noise,
            epsilon: 1e-3,
            seed,
        }
    }
}

/// Smoothed one-hot predictions around the (possibly flipped) truth, with
/// logits `ln(p) / temperature`.
pub fn gen_predictions(labels: &Labels, mis: &MiscalibrationSpec) -> Result<NodeMarginals> {
    if !mis.temperature.is_finite() || mis.temperature <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "temperature must be finite and > 0, got {}",
            mis.temperature
        )));
    }
    if !(0.0..1.0).contains(&mis.noise) {
        return Err(Error::InvalidParameter(format!(
            "noise must be in [0, 1), got {}",
            mis.noise
        )));
    }
    if !(mis.epsilon > 0.0 && mis.epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be in (0, 1), got {}",
            mis.epsilon
        )));
    }
    let c = labels.num_classes();
    let off = mis.epsilon / (c - 1) as f64;
    let mut r = rng(mis.seed, PREDICTION_STREAM);
    let mut probs = Vec::with_capacity(labels.len() * c);
    let mut row = vec![0.0; c];
    for &truth in labels.values() {
        let flip = r.gen::<f64>() < mis.noise;
        let shift = r.gen_range(1..c);
        let chosen = if flip { (truth + shift) % c } else { truth };
        for (k, v) in row.iter_mut().enumerate() {
            let p = if k == chosen { 1.0 - mis.epsilon } else { off };
            *v = p.ln() / mis.temperature;
        }
        softmax_in_place(&mut row);
        probs.extend_from_slice(&row);
    }
    NodeMarginals::from_flat(c, probs, ValidationMode::Strict)
}

/// Reference values for one worked example, computed with a single bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedValues {
    pub nodewise_ece: f64,
    pub edgewise_ece: f64,
    pub nodewise_accuracy: f64,
    pub edgewise_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct AppendixAFixture {
    /// `chain` or `cycle`
    pub graph_name: &'static str,
    /// `perfect`, `uniform` or `nonuniform`
    pub setting: &'static str,
    /// Predicted probability of class 1 per node.
    pub blue_probs: [f64; 3],
    pub graph: Graph,
    pub labels: Labels,
    pub partition: NodePartition,
    pub marginals: NodeMarginals,
    pub expected: ExpectedValues,
}

impl AppendixAFixture {
    pub fn name(&self) -> String {
        format!("{}_{}", self.graph_name, self.setting)
    }
}

/// The three-node chain and cycle examples with labels `(0, 1, 1)`, every
/// node a test node, under three prediction settings (six fixtures).
pub fn appendix_a_fixtures() -> Vec<AppendixAFixture> {
    let chain = Graph::new(3, [(0, 1), (1, 2)]).expect("static graph");
    let cycle = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).expect("static graph");
    let labels = Labels::new(vec![0, 1, 1], 2).expect("static labels");

    // (setting, p(blue), nodewise ECE, chain ECE, cycle ECE, nodewise acc)
    type Setting = (&'static str, [f64; 3], f64, f64, f64, f64);
    let settings: [Setting; 3] = [
        ("perfect", [0.0, 1.0, 1.0], 0.0, 0.0, 0.0, 1.0),
        (
            "uniform",
            [2.0 / 3.0; 3],
            0.0,
            1.0 / 18.0,
            1.0 / 9.0,
            2.0 / 3.0,
        ),
        (
            "nonuniform",
            [0.55, 0.8, 0.7],
            1.0 / 60.0,
            0.0,
            77.0 / 600.0,
            2.0 / 3.0,
        ),
    ];
    let mut out = Vec::with_capacity(6);
    for (graph_name, graph) in [("chain", &chain), ("cycle", &cycle)] {
        for &(setting, p, node_ece, chain_ece, cycle_ece, node_acc) in &settings {
            let (edge_ece, edge_acc) = match (graph_name, setting) {
                (_, "perfect") => (0.0, 1.0),
                ("chain", _) => (chain_ece, 0.5),
                _ => (cycle_ece, 1.0 / 3.0),
            };
            let marginals = NodeMarginals::from_rows(
                p.iter().map(|&b| vec![1.0 - b, b]).collect(),
                ValidationMode::Strict,
            )
            .expect("static marginals");
            out.push(AppendixAFixture {
                graph_name,
                setting,
                blue_probs: p,
                graph: graph.clone(),
                labels: labels.clone(),
                partition: NodePartition::all_test(3),
                marginals,
                expected: ExpectedValues {
                    nodewise_ece: node_ece,
                    edgewise_ece: edge_ece,
                    nodewise_accuracy: node_acc,
                    edgewise_accuracy: edge_acc,
                },
            });
        }
    }
    out
}
