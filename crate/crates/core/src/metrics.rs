//! Binned calibration error and the nodewise/edgewise metric family.
//!
//! Every ECE variant reduces to [`ece`] over a list of `(confidence, correct)`
//! items. Bin `k` (1-based) of `m` holds confidences in `((k-1)/m, k/m]`;
//! a confidence of exactly 0 falls in bin 1. Edge correctness is the product
//! of the two endpoint node-prediction indicators, not the joint argmax.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    agree_disagree_split, homophily_ratio, k_index, test_edge_subset, EdgeSubset, Graph, Labels,
    NodePartition, SubsetKind,
};
use crate::marginals::{
    mean_field_edge_marginals, node_predictions, EdgeMarginals, NodeMarginals, NodePrediction,
};

pub const DEFAULT_BINS: usize = 20;
/// Lower bound applied to probabilities inside the log of NLL.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    /// 1-based bin index.
    pub bin: usize,
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_confidence: Option<f64>,
    /// `None` for empty bins.
    pub accuracy: Option<f64>,
}

impl ReliabilityBin {
    pub fn gap(&self) -> Option<f64> {
        Some((self.accuracy? - self.mean_confidence?).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTable {
    pub bins: Vec<ReliabilityBin>,
    pub total: usize,
    pub ece: f64,
}

impl ReliabilityTable {
    /// Recomputes ECE from the bin rows.
    pub fn weighted_gap(&self) -> f64 {
        self.bins
            .iter()
            .filter_map(|b| Some(b.count as f64 / self.total as f64 * b.gap()?))
            .sum()
    }
}

/// 0-based bin for `confidence` among `m` bins, using exact comparisons
/// against `k / m`.
pub fn bin_index(confidence: f64, m: usize) -> usize {
    let mf = m as f64;
    let mut k = ((confidence * mf).ceil() as usize).clamp(1, m);
    while k > 1 && confidence <= (k - 1) as f64 / mf {
        k -= 1;
    }
    while k < m && confidence > k as f64 / mf {
        k += 1;
    }
    k - 1
}

/// Expected calibration error with `m` equal-width bins.
pub fn ece(confidences: &[f64], correct: &[bool], m: usize) -> Result<ReliabilityTable> {
    if confidences.len() != correct.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} confidences vs {} correctness flags",
            confidences.len(),
            correct.len()
        )));
    }
    if confidences.is_empty() {
        return Err(Error::EmptySet("ECE"));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("bin count must be >= 1".into()));
    }
    if let Some(&c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::InvalidParameter(format!(
            "confidence {c} outside [0, 1]"
        )));
    }

    let mut counts = vec![0usize; m];
    let mut conf_sums = vec![0.0f64; m];
    let mut hits = vec![0usize; m];
    for (&c, &ok) in confidences.iter().zip(correct) {
        let k = bin_index(c, m);
        counts[k] += 1;
        conf_sums[k] += c;
        hits[k] += ok as usize;
    }

    let total = confidences.len();
    let mut value = 0.0;
    let bins = (0..m)
        .map(|k| {
            let (mean_confidence, accuracy) = if counts[k] == 0 {
                (None, None)
            } else {
                let n = counts[k] as f64;
                let conf = conf_sums[k] / n;
                let acc = hits[k] as f64 / n;
                value += n / total as f64 * (acc - conf).abs();
                (Some(conf), Some(acc))
            };
            ReliabilityBin {
                bin: k + 1,
                lower: k as f64 / m as f64,
                upper: (k + 1) as f64 / m as f64,
                count: counts[k],
                mean_confidence,
                accuracy,
            }
        })
        .collect();
    Ok(ReliabilityTable {
        bins,
        total,
        ece: value,
    })
}

fn check_nodes(what: &str, got: usize, labels: &Labels) -> Result<()> {
    if got != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{what} covers {got} nodes, labels cover {}",
            labels.len()
        )));
    }
    Ok(())
}

fn check_classes(what: &str, got: usize, labels: &Labels) -> Result<()> {
    if got != labels.num_classes() {
        return Err(Error::DimensionMismatch(format!(
            "{what} have {got} classes, labels have {}",
            labels.num_classes()
        )));
    }
    Ok(())
}

fn node_items(
    nm: &NodeMarginals,
    labels: &Labels,
    partition: &NodePartition,
) -> Result<(Vec<f64>, Vec<bool>)> {
    check_nodes("node marginals", nm.len(), labels)?;
    check_nodes("test mask", partition.len(), labels)?;
    check_classes("node marginals", nm.num_classes(), labels)?;
    let preds = node_predictions(nm);
    Ok(partition
        .test_nodes()
        .into_iter()
        .map(|i| (preds[i].confidence, preds[i].label == labels.get(i)))
        .unzip())
}

pub fn nodewise_ece(
    nm: &NodeMarginals,
    labels: &Labels,
    partition: &NodePartition,
    m: usize,
) -> Result<ReliabilityTable> {
    let (conf, correct) = node_items(nm, labels, partition)?;
    if conf.is_empty() {
        return Err(Error::EmptySet("nodewise ECE"));
    }
    ece(&conf, &correct, m)
}

fn edge_confidence(em: &EdgeMarginals, i: usize, j: usize) -> Result<f64> {
    let c = em.num_classes();
    let view = em.get(i, j).ok_or(Error::MissingEdge(i, j))?;
    let mut best = f64::NEG_INFINITY;
    for l in 0..c {
        for m in 0..c {
            best = best.max(view.at(l, m));
        }
    }
    Ok(best)
}

fn edge_correct(preds: &[NodePrediction], labels: &Labels, i: usize, j: usize) -> bool {
    preds[i].label == labels.get(i) && preds[j].label == labels.get(j)
}

fn check_preds(preds: &[NodePrediction], labels: &Labels) -> Result<()> {
    check_nodes("node predictions", preds.len(), labels)
}

/// ECE over the edges of any subset; errors name the subset kind.
pub fn edge_subset_ece(
    em: &EdgeMarginals,
    node_preds: &[NodePrediction],
    labels: &Labels,
    subset: &EdgeSubset,
    m: usize,
) -> Result<ReliabilityTable> {
    check_preds(node_preds, labels)?;
    check_classes("edge marginals", em.num_classes(), labels)?;
    if subset.is_empty() {
        return Err(Error::EmptySet(match subset.kind() {
            SubsetKind::AllTest => "edgewise ECE",
            SubsetKind::Agree => "agree ECE",
            SubsetKind::Disagree => "disagree ECE",
        }));
    }
    let mut conf = Vec::with_capacity(subset.len());
    let mut correct = Vec::with_capacity(subset.len());
    for &(i, j) in subset.edges() {
        conf.push(edge_confidence(em, i, j)?);
        correct.push(edge_correct(node_preds, labels, i, j));
    }
    ece(&conf, &correct, m)
}

fn require_kind(subset: &EdgeSubset, kind: SubsetKind) -> Result<()> {
    if subset.kind() != kind {
        return Err(Error::InvalidParameter(format!(
            "expected a {:?} edge subset, got {:?}",
            kind,
            subset.kind()
        )));
    }
    Ok(())
}

pub fn edgewise_ece(
    em: &EdgeMarginals,
    node_preds: &[NodePrediction],
    labels: &Labels,
    subset: &EdgeSubset,
    m: usize,
) -> Result<ReliabilityTable> {
    require_kind(subset, SubsetKind::AllTest)?;
    edge_subset_ece(em, node_preds, labels, subset, m)
}

pub fn agree_ece(
    em: &EdgeMarginals,
    node_preds: &[NodePrediction],
    labels: &Labels,
    agree: &EdgeSubset,
    m: usize,
) -> Result<ReliabilityTable> {
    require_kind(agree, SubsetKind::Agree)?;
    edge_subset_ece(em, node_preds, labels, agree, m)
}

pub fn disagree_ece(
    em: &EdgeMarginals,
    node_preds: &[NodePrediction],
    labels: &Labels,
    disagree: &EdgeSubset,
    m: usize,
) -> Result<ReliabilityTable> {
    require_kind(disagree, SubsetKind::Disagree)?;
    edge_subset_ece(em, node_preds, labels, disagree, m)
}

fn mean(values: impl ExactSizeIterator<Item = f64>, what: &'static str) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(Error::EmptySet(what));
    }
    Ok(values.sum::<f64>() / n as f64)
}

pub fn accuracy_nodewise(
    preds: &[NodePrediction],
    labels: &Labels,
    partition: &NodePartition,
) -> Result<f64> {
    check_preds(preds, labels)?;
    let test = partition.test_nodes();
    mean(
        test.iter()
            .map(|&i| (preds[i].label == labels.get(i)) as u8 as f64),
        "nodewise accuracy",
    )
}

pub fn accuracy_edgewise(
    preds: &[NodePrediction],
    labels: &Labels,
    subset: &EdgeSubset,
) -> Result<f64> {
    check_preds(preds, labels)?;
    mean(
        subset
            .edges()
            .iter()
            .map(|&(i, j)| edge_correct(preds, labels, i, j) as u8 as f64),
        "edgewise accuracy",
    )
}

pub fn nll_nodewise(nm: &NodeMarginals, labels: &Labels, partition: &NodePartition) -> Result<f64> {
    check_nodes("node marginals", nm.len(), labels)?;
    let test = partition.test_nodes();
    mean(
        test.iter()
            .map(|&i| -nm.row(i)[labels.get(i)].max(LOG_FLOOR).ln()),
        "nodewise NLL",
    )
}

pub fn nll_edgewise(em: &EdgeMarginals, labels: &Labels, subset: &EdgeSubset) -> Result<f64> {
    let mut terms = Vec::with_capacity(subset.len());
    for &(i, j) in subset.edges() {
        let view = em.get(i, j).ok_or(Error::MissingEdge(i, j))?;
        terms.push(-view.at(labels.get(i), labels.get(j)).max(LOG_FLOOR).ln());
    }
    mean(terms.into_iter(), "edgewise NLL")
}

/// `(1 - p[truth])^2 + sum_{k != truth} p[k]^2`
fn brier_term(probs: impl Iterator<Item = f64>, truth: usize) -> f64 {
    probs
        .enumerate()
        .map(|(k, p)| if k == truth { (1.0 - p).powi(2) } else { p * p })
        .sum()
}

pub fn brier_nodewise(
    nm: &NodeMarginals,
    labels: &Labels,
    partition: &NodePartition,
) -> Result<f64> {
    check_nodes("node marginals", nm.len(), labels)?;
    let test = partition.test_nodes();
    mean(
        test.iter()
            .map(|&i| brier_term(nm.row(i).iter().copied(), labels.get(i))),
        "nodewise Brier score",
    )
}

pub fn brier_edgewise(em: &EdgeMarginals, labels: &Labels, subset: &EdgeSubset) -> Result<f64> {
    let c = em.num_classes();
    let mut terms = Vec::with_capacity(subset.len());
    for &(i, j) in subset.edges() {
        let view = em.get(i, j).ok_or(Error::MissingEdge(i, j))?;
        let truth = labels.get(i) * c + labels.get(j);
        terms.push(brier_term((0..c * c).map(|k| view.at(k / c, k % c)), truth));
    }
    mean(terms.into_iter(), "edgewise Brier score")
}

/// All metrics for one prediction set. `None` marks a metric whose item set
/// is empty; it serializes as the string `"undefined"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(with = "undefined")]
    pub nodewise_ece: Option<f64>,
    #[serde(with = "undefined")]
    pub edgewise_ece: Option<f64>,
    #[serde(with = "undefined")]
    pub agree_ece: Option<f64>,
    #[serde(with = "undefined")]
    pub disagree_ece: Option<f64>,
    #[serde(with = "undefined")]
    pub nodewise_accuracy: Option<f64>,
    #[serde(with = "undefined")]
    pub edgewise_accuracy: Option<f64>,
    #[serde(with = "undefined")]
    pub nodewise_nll: Option<f64>,
    #[serde(with = "undefined")]
    pub edgewise_nll: Option<f64>,
    #[serde(with = "undefined")]
    pub nodewise_brier: Option<f64>,
    #[serde(with = "undefined")]
    pub edgewise_brier: Option<f64>,
    #[serde(with = "undefined")]
    pub homophily: Option<f64>,
    #[serde(with = "undefined")]
    pub k_test_edges: Option<f64>,
    #[serde(with = "undefined")]
    pub k_agree_edges: Option<f64>,
    #[serde(with = "undefined")]
    pub k_disagree_edges: Option<f64>,
    pub bins: usize,
    pub num_test_nodes: usize,
    pub num_test_edges: usize,
    pub num_agree_edges: usize,
    pub num_disagree_edges: usize,
}

/// Turns an empty-set error into `None`, propagating anything else.
fn defined<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::EmptySet(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Everything needed to compute and export the metric family.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricReport,
    pub nodewise: Option<ReliabilityTable>,
    pub edgewise: Option<ReliabilityTable>,
    pub agree: Option<ReliabilityTable>,
    pub disagree: Option<ReliabilityTable>,
}

/// Computes every metric. When `em` is `None`, edge marginals are the
/// products of node marginals.
pub fn evaluate(
    graph: &Graph,
    labels: &Labels,
    partition: &NodePartition,
    nm: &NodeMarginals,
    em: Option<&EdgeMarginals>,
    m: usize,
) -> Result<Evaluation> {
    check_nodes("graph", graph.num_nodes(), labels)?;
    check_nodes("node marginals", nm.len(), labels)?;
    check_classes("node marginals", nm.num_classes(), labels)?;
    if m == 0 {
        return Err(Error::InvalidParameter("bin count must be >= 1".into()));
    }
    let test_edges = test_edge_subset(graph, partition)?;
    let (agree, disagree) = agree_disagree_split(&test_edges, labels)?;
    let product;
    let em = match em {
        Some(em) => {
            check_classes("edge marginals", em.num_classes(), labels)?;
            em
        }
        None => {
            product = mean_field_edge_marginals(nm, &test_edges)?;
            &product
        }
    };
    let preds = node_predictions(nm);

    let nodewise = defined(nodewise_ece(nm, labels, partition, m))?;
    let edgewise = defined(edgewise_ece(em, &preds, labels, &test_edges, m))?;
    let agree_t = defined(agree_ece(em, &preds, labels, &agree, m))?;
    let disagree_t = defined(disagree_ece(em, &preds, labels, &disagree, m))?;

    let report = MetricReport {
        nodewise_ece: nodewise.as_ref().map(|t| t.ece),
        edgewise_ece: edgewise.as_ref().map(|t| t.ece),
        agree_ece: agree_t.as_ref().map(|t| t.ece),
        disagree_ece: disagree_t.as_ref().map(|t| t.ece),
        nodewise_accuracy: defined(accuracy_nodewise(&preds, labels, partition))?,
        edgewise_accuracy: defined(accuracy_edgewise(&preds, labels, &test_edges))?,
        nodewise_nll: defined(nll_nodewise(nm, labels, partition))?,
        edgewise_nll: defined(nll_edgewise(em, labels, &test_edges))?,
        nodewise_brier: defined(brier_nodewise(nm, labels, partition))?,
        edgewise_brier: defined(brier_edgewise(em, labels, &test_edges))?,
        homophily: defined(homophily_ratio(&test_edges, labels))?,
        k_test_edges: defined(k_index(&test_edges, partition))?,
        k_agree_edges: defined(k_index(&agree, partition))?,
        k_disagree_edges: defined(k_index(&disagree, partition))?,
        bins: m,
        num_test_nodes: partition.num_test(),
        num_test_edges: test_edges.len(),
        num_agree_edges: agree.len(),
        num_disagree_edges: disagree.len(),
    };
    Ok(Evaluation {
        report,
        nodewise,
        edgewise,
        agree: agree_t,
        disagree: disagree_t,
    })
}

pub fn full_report(
    graph: &Graph,
    labels: &Labels,
    partition: &NodePartition,
    nm: &NodeMarginals,
    em: Option<&EdgeMarginals>,
    m: usize,
) -> Result<MetricReport> {
    evaluate(graph, labels, partition, nm, em, m).map(|e| e.report)
}

impl MetricReport {
    /// Named metric values in report order.
    pub fn values(&self) -> [(&'static str, Option<f64>); 14] {
        [
            ("nodewise_ece", self.nodewise_ece),
            ("edgewise_ece", self.edgewise_ece),
            ("agree_ece", self.agree_ece),
            ("disagree_ece", self.disagree_ece),
            ("nodewise_accuracy", self.nodewise_accuracy),
            ("edgewise_accuracy", self.edgewise_accuracy),
            ("nodewise_nll", self.nodewise_nll),
            ("edgewise_nll", self.edgewise_nll),
            ("nodewise_brier", self.nodewise_brier),
            ("edgewise_brier", self.edgewise_brier),
            ("homophily", self.homophily),
            ("k_test_edges", self.k_test_edges),
            ("k_agree_edges", self.k_agree_edges),
            ("k_disagree_edges", self.k_disagree_edges),
        ]
    }

    /// Human-readable two-column table. With `percent`, fractions (ECEs,
    /// accuracies, homophily, K indices) are scaled by 100; NLL and Brier
    /// are printed as-is.
    pub fn to_table(&self, percent: bool) -> String {
        let mut out = String::new();
        for (name, value) in self.values() {
            let scaled = !name.contains("nll") && !name.contains("brier");
            let text = match value {
                None => "n/a".to_string(),
                Some(v) if percent && scaled => format!("{:.2}", v * 100.0),
                Some(v) => format!("{v:.4}"),
            };
            let _ = writeln!(out, "{name:<20} {text:>10}");
        }
        let _ = writeln!(out, "{:<20} {:>10}", "bins", self.bins);
        let _ = writeln!(out, "{:<20} {:>10}", "test_nodes", self.num_test_nodes);
        let _ = writeln!(out, "{:<20} {:>10}", "test_edges", self.num_test_edges);
        let _ = writeln!(out, "{:<20} {:>10}", "agree_edges", self.num_agree_edges);
        let _ = writeln!(
            out,
            "{:<20} {:>10}",
            "disagree_edges", self.num_disagree_edges
        );
        out
    }
}

/// Serde adapter: `Option<f64>` as a number or the string `"undefined"`.
pub mod undefined {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub const SENTINEL: &str = "undefined";

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => s.serialize_f64(*x),
            None => s.serialize_str(SENTINEL),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Option<f64>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number or \"{SENTINEL}\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Ok(Some(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(Some(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(Some(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                if v == SENTINEL {
                    Ok(None)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}
