//! Structured uncertainty metrics for node classification on graphs.
//!
//! Given predicted node (and optionally edge) marginals, the crate computes
//! nodewise, edgewise, agree and disagree expected calibration errors along
//! with nodewise/edgewise accuracy, NLL and Brier score. Edge marginals can
//! be the product of node marginals or come from a pairwise MRF via exact
//! enumeration, naive mean field or loopy belief propagation.
//!
//! ```
//! use graph_calib::graph::{Graph, Labels, NodePartition};
//! use graph_calib::marginals::{NodeMarginals, ValidationMode};
//! use graph_calib::metrics::full_report;
//!
//! let chain = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
//! let labels = Labels::new(vec![0, 1, 1], 2).unwrap();
//! let p = 2.0 / 3.0;
//! let nm = NodeMarginals::from_rows(vec![vec![1.0 - p, p]; 3], ValidationMode::Strict).unwrap();
//! let report = full_report(&chain, &labels, &NodePartition::all_test(3), &nm, None, 1).unwrap();
//! assert!((report.edgewise_ece.unwrap() - 1.0 / 18.0).abs() < 1e-12);
//! ```

pub mod cli;
pub mod error;
pub mod graph;
pub mod inference;
pub mod io;
pub mod marginals;
pub mod math;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
