//! C ABI over `graph_calib`.
//!
//! Every fallible call returns a [`GcStatus`]; on failure a message is kept in
//! thread-local storage and can be read with [`gc_last_error_message`].
//! Objects are opaque handles created by `*_new`/`*_compute`/`gc_infer` and
//! released with the matching `*_free`. Arrays are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use graph_calib::graph::{Graph, Labels, NodePartition};
use graph_calib::inference::{
    infer, BpOptions, InferOptions, InferenceMethod, InferenceResult, MeanFieldOptions,
    Observation, PairwiseMrf, PairwisePotentials,
};
use graph_calib::marginals::{NodeMarginals, ValidationMode};
use graph_calib::metrics::{ece, full_report, MetricReport};
use graph_calib::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcStatus {
    Ok = 0,
    NullPointer = 1,
    /// Input failed validation (ranges, shapes, distributions).
    InvalidInput = 2,
    /// The metric is undefined on an empty set.
    EmptySet = 3,
    /// Exact inference would enumerate too many states.
    TooLarge = 4,
    /// Unknown metric name or malformed string.
    Parse = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GcMethod {
    Exact = 0,
    MeanField = 1,
    Lbp = 2,
}

pub struct GcGraph(Graph);
pub struct GcReport(MetricReport);
pub struct GcMrf(PairwiseMrf);
pub struct GcInference(InferenceResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> GcStatus {
    match e {
        Error::EmptySet(_) => GcStatus::EmptySet,
        Error::TooLarge { .. } => GcStatus::TooLarge,
        Error::Parse { .. } | Error::Json(_) => GcStatus::Parse,
        Error::Io { .. } => GcStatus::Internal,
        _ => GcStatus::InvalidInput,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (GcStatus, String)>) -> GcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GcStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (GcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (GcStatus, String) {
    (GcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice_in<'a, T>(
    p: *const T,
    len: usize,
    what: &str,
) -> Result<&'a [T], (GcStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (GcStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds an undirected graph from `num_edges` endpoint pairs. Direction and
/// duplicates are ignored; self-loops and ids `>= num_nodes` are rejected.
///
/// # Safety
/// `src` and `dst` must point to `num_edges` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_graph_new(
    num_nodes: usize,
    src: *const usize,
    dst: *const usize,
    num_edges: usize,
    out: *mut *mut GcGraph,
) -> GcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let src = slice_in(src, num_edges, "src")?;
        let dst = slice_in(dst, num_edges, "dst")?;
        let g =
            Graph::new(num_nodes, src.iter().copied().zip(dst.iter().copied())).map_err(lib_err)?;
        put(out, GcGraph(g));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_graph_free(graph: *mut GcGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of distinct undirected edges, or 0 for a null handle.
///
/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_graph_num_edges(graph: *const GcGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.num_edges())
}

/// Edge `index` in canonical order (`src < dst`, sorted). Per-edge arrays
/// passed to or returned by this library follow this order.
///
/// # Safety
/// `graph` must be a live handle; `src` and `dst` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_graph_edge(
    graph: *const GcGraph,
    index: usize,
    src: *mut usize,
    dst: *mut usize,
) -> GcStatus {
    guard(|| {
        let g = handle(graph, "graph")?;
        if src.is_null() || dst.is_null() {
            return Err(null("src/dst"));
        }
        let &(i, j) = g.0.edges().get(index).ok_or_else(|| {
            (
                GcStatus::InvalidInput,
                format!(
                    "edge index {index} out of range ({} edges)",
                    g.0.num_edges()
                ),
            )
        })?;
        *src = i;
        *dst = j;
        Ok(())
    })
}

/// Expected calibration error of `n` items over `bins` equal-width bins.
///
/// # Safety
/// `confidence` and `correct` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_ece(
    confidence: *const f64,
    correct: *const u8,
    n: usize,
    bins: usize,
    out: *mut f64,
) -> GcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let conf = slice_in(confidence, n, "confidence")?;
        let ok: Vec<bool> = slice_in(correct, n, "correct")?
            .iter()
            .map(|&b| b != 0)
            .collect();
        *out = ece(conf, &ok, bins).map_err(lib_err)?.ece;
        Ok(())
    })
}

/// Computes the full metric report with product-form edge marginals.
///
/// `labels` and `test_mask` hold one value per node; `node_probs` holds
/// `num_nodes * num_classes` probabilities. Rows must sum to 1 unless
/// `renormalize` is non-zero.
///
/// # Safety
/// All pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_report_compute(
    graph: *const GcGraph,
    labels: *const usize,
    num_classes: usize,
    test_mask: *const u8,
    node_probs: *const f64,
    bins: usize,
    renormalize: u8,
    out: *mut *mut GcReport,
) -> GcStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = g.num_nodes();
        let labels =
            Labels::new(slice_in(labels, n, "labels")?.to_vec(), num_classes).map_err(lib_err)?;
        let mask = NodePartition::new(
            slice_in(test_mask, n, "test_mask")?
                .iter()
                .map(|&b| b != 0)
                .collect(),
        );
        let probs = slice_in(node_probs, n * num_classes, "node_probs")?.to_vec();
        let mode = if renormalize != 0 {
            ValidationMode::Renormalize
        } else {
            ValidationMode::Strict
        };
        let nm = NodeMarginals::from_flat(num_classes, probs, mode).map_err(lib_err)?;
        let report = full_report(g, &labels, &mask, &nm, None, bins).map_err(lib_err)?;
        put(out, GcReport(report));
        Ok(())
    })
}

/// Reads a named value (e.g. `"edgewise_ece"`). Undefined values return
/// [`GcStatus::EmptySet`] and leave `out` untouched.
///
/// # Safety
/// `report` must be a live handle, `name` a NUL-terminated string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn gc_report_get(
    report: *const GcReport,
    name: *const c_char,
    out: *mut f64,
) -> GcStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        if name.is_null() || out.is_null() {
            return Err(null("name/out"));
        }
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| (GcStatus::Parse, "name is not UTF-8".to_string()))?;
        let (_, value) = r
            .values()
            .into_iter()
            .find(|(k, _)| *k == name)
            .ok_or_else(|| (GcStatus::Parse, format!("unknown metric {name:?}")))?;
        *out = value.ok_or_else(|| (GcStatus::EmptySet, format!("{name} is undefined")))?;
        Ok(())
    })
}

/// Serializes the report as JSON; free the result with [`gc_string_free`].
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_report_to_json(
    report: *const GcReport,
    out: *mut *mut c_char,
) -> GcStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(r).map_err(|e| (GcStatus::Internal, e.to_string()))?;
        *out = CString::new(json)
            .map_err(|e| (GcStatus::Internal, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_report_free(report: *mut GcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Builds a pairwise MRF on a copy of `graph`.
///
/// `unary` holds `num_nodes * num_classes` log-potentials. With `per_edge`
/// zero, `pairwise` is one `num_classes^2` matrix shared by all edges;
/// otherwise it holds one matrix per edge in [`gc_graph_edge`] order, each
/// indexed `[src class][dst class]`.
///
/// # Safety
/// All pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gc_mrf_new(
    graph: *const GcGraph,
    num_classes: usize,
    unary: *const f64,
    pairwise: *const f64,
    per_edge: u8,
    out: *mut *mut GcMrf,
) -> GcStatus {
    guard(|| {
        let g = &handle(graph, "graph")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = num_classes;
        let n = g.num_nodes();
        let unary: Vec<Vec<f64>> = slice_in(unary, n * c, "unary")?
            .chunks(c.max(1))
            .map(<[f64]>::to_vec)
            .collect();
        let cc = c * c;
        let pairwise = if per_edge != 0 {
            let flat = slice_in(pairwise, g.num_edges() * cc, "pairwise")?;
            PairwisePotentials::PerEdge(flat.chunks(cc.max(1)).map(<[f64]>::to_vec).collect())
        } else {
            PairwisePotentials::Shared(slice_in(pairwise, cc, "pairwise")?.to_vec())
        };
        let mrf = PairwiseMrf::new(g.clone(), c, unary, pairwise).map_err(lib_err)?;
        put(out, GcMrf(mrf));
        Ok(())
    })
}

/// Clamps `count` nodes to observed classes in place.
///
/// # Safety
/// `mrf` must be a live handle; `nodes` and `classes` must point to `count`
/// values.
#[no_mangle]
pub unsafe extern "C" fn gc_mrf_observe(
    mrf: *mut GcMrf,
    nodes: *const usize,
    classes: *const usize,
    count: usize,
) -> GcStatus {
    guard(|| {
        let m = mrf.as_mut().ok_or_else(|| null("mrf"))?;
        let nodes = slice_in(nodes, count, "nodes")?;
        let classes = slice_in(classes, count, "classes")?;
        let obs = Observation::new(nodes.iter().copied().zip(classes.iter().copied()));
        m.0 = m.0.clamp(&obs).map_err(lib_err)?;
        Ok(())
    })
}

/// # Safety
/// `mrf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_mrf_free(mrf: *mut GcMrf) {
    if !mrf.is_null() {
        drop(Box::from_raw(mrf));
    }
}

/// Runs inference. `max_iters == 0` and `tol <= 0` select the method's
/// defaults; `damping` applies to loopy BP only.
///
/// # Safety
/// `mrf` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gc_infer(
    mrf: *const GcMrf,
    method: GcMethod,
    max_iters: usize,
    tol: f64,
    damping: f64,
    out: *mut *mut GcInference,
) -> GcStatus {
    guard(|| {
        let m = &handle(mrf, "mrf")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let mut mf = MeanFieldOptions::default();
        let mut bp = BpOptions {
            damping,
            ..Default::default()
        };
        if max_iters > 0 {
            mf.max_iters = max_iters;
            bp.max_iters = max_iters;
        }
        if tol > 0.0 {
            mf.tol = tol;
            bp.tol = tol;
        }
        let method = match method {
            GcMethod::Exact => InferenceMethod::Exact,
            GcMethod::MeanField => InferenceMethod::MeanField,
            GcMethod::Lbp => InferenceMethod::Lbp,
        };
        let res = infer(m, method, &InferOptions { mean_field: mf, bp }).map_err(lib_err)?;
        put(out, GcInference(res));
        Ok(())
    })
}

/// 1 if the method met its tolerance, 0 otherwise (or for a null handle).
///
/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_inference_converged(res: *const GcInference) -> u8 {
    res.as_ref().map_or(0, |r| r.0.converged as u8)
}

/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_inference_iterations(res: *const GcInference) -> usize {
    res.as_ref().map_or(0, |r| r.0.iterations)
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), (GcStatus, String)> {
    if len != src.len() {
        return Err((
            GcStatus::InvalidInput,
            format!("buffer holds {len} values, need {}", src.len()),
        ));
    }
    if len > 0 {
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    }
    Ok(())
}

/// Copies node marginals (`num_nodes * num_classes` values) into `out`.
///
/// # Safety
/// `res` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn gc_inference_node_marginals(
    res: *const GcInference,
    out: *mut f64,
    len: usize,
) -> GcStatus {
    guard(|| copy_out(handle(res, "result")?.0.node_marginals.as_flat(), out, len))
}

/// Copies edge marginals (`num_edges * num_classes^2` values, edges in
/// [`gc_graph_edge`] order) into `out`.
///
/// # Safety
/// `res` must be a live handle and `out` writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn gc_inference_edge_marginals(
    res: *const GcInference,
    out: *mut f64,
    len: usize,
) -> GcStatus {
    guard(|| copy_out(handle(res, "result")?.0.edge_marginals.as_flat(), out, len))
}

/// # Safety
/// `res` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gc_inference_free(res: *mut GcInference) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
