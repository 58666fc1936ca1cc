//! C ABI over the `tripletcut` library.
//!
//! Graphs, partitions and networks cross the boundary as opaque handles that
//! the caller releases with the matching `*_free` function. Every fallible
//! call returns a [`TcStatus`]; on failure a description is available from
//! [`tc_last_error_message`] on the same thread. Output pointers are written
//! only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use tripletcut::calibration::{analytic_threshold_override, edge_cost};
use tripletcut::kmeans::kmeans;
use tripletcut::loss::{triplet_loss, LossKind, TripletMargins};
use tripletcut::metrics::accuracy;
use tripletcut::multicut::{brute_force, gaec, kl_refine, objective, validate_partition, CostGraph, Partition};
use tripletcut::net::EmbeddingNet;
use tripletcut::rng::seeded;
use tripletcut::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    NonFinite = 4,
    SizeLimit = 5,
    Io = 6,
    Format = 7,
    BufferTooSmall = 8,
    Internal = 9,
}

/// Selects one of the three triplet losses.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcLoss {
    Triplet1 = 1,
    Triplet2 = 2,
    Triplet3 = 3,
}

impl From<TcLoss> for LossKind {
    fn from(l: TcLoss) -> Self {
        match l {
            TcLoss::Triplet1 => LossKind::Triplet1,
            TcLoss::Triplet2 => LossKind::Triplet2,
            TcLoss::Triplet3 => LossKind::Triplet3,
        }
    }
}

/// Weighted graph for the multicut problem.
pub struct TcGraph(CostGraph);

/// Node partition, one component id per node.
pub struct TcPartition(Partition);

/// Trained embedding network.
pub struct TcNet(EmbeddingNet);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn set_error(msg: &str) {
    LAST_ERROR.with(|e| {
        let mut e = e.borrow_mut();
        e.clear();
        e.extend(msg.bytes().filter(|&b| b != 0));
    });
}

fn status_of(err: &Error) -> TcStatus {
    match err {
        Error::Shape { .. } => TcStatus::ShapeMismatch,
        Error::NonFinite(_) => TcStatus::NonFinite,
        Error::SizeLimit { .. } => TcStatus::SizeLimit,
        Error::Io { .. } => TcStatus::Io,
        Error::Format { .. } | Error::CorruptRecord { .. } | Error::Json(_) | Error::Csv(_) | Error::Parse(_) => {
            TcStatus::Format
        }
        _ => TcStatus::InvalidArgument,
    }
}

struct Fail(TcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TcStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            TcStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TcStatus::Internal
        }
    }
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

fn rows(data: &[f64], n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| data[i * dim..(i + 1) * dim].to_vec()).collect()
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length excluding the terminator.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn tc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = e.len().min(len - 1);
            ptr::copy_nonoverlapping(e.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        e.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a graph on `n` nodes from `m` edges `(us[i], vs[i], costs[i])`.
///
/// # Safety
/// The three arrays must hold `m` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_graph_new(
    n: usize,
    us: *const usize,
    vs: *const usize,
    costs: *const f64,
    m: usize,
    out: *mut *mut TcGraph,
) -> TcStatus {
    guard(|| {
        let us = slice_in(us, m, "us")?;
        let vs = slice_in(vs, m, "vs")?;
        let costs = slice_in(costs, m, "costs")?;
        let g = CostGraph::from_edges(n, (0..m).map(|i| (us[i], vs[i], costs[i])))?;
        write(out, Box::into_raw(Box::new(TcGraph(g))), "out")
    })
}

/// # Safety
/// `g` must be null or a handle from `tc_graph_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tc_graph_free(g: *mut TcGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn tc_graph_node_count(g: *const TcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.node_count())
}

/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn tc_graph_edge_count(g: *const TcGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.edge_count())
}

/// Partition from `n` component ids.
///
/// # Safety
/// `labels` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_partition_new(labels: *const usize, n: usize, out: *mut *mut TcPartition) -> TcStatus {
    guard(|| {
        let labels = slice_in(labels, n, "labels")?;
        write(out, Box::into_raw(Box::new(TcPartition(Partition::new(labels.to_vec())))), "out")
    })
}

/// # Safety
/// `p` must be null or a partition handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tc_partition_free(p: *mut TcPartition) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// # Safety
/// `p` must be a live partition handle.
#[no_mangle]
pub unsafe extern "C" fn tc_partition_len(p: *const TcPartition) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `p` must be a live partition handle.
#[no_mangle]
pub unsafe extern "C" fn tc_partition_component_count(p: *const TcPartition) -> usize {
    p.as_ref().map_or(0, |p| p.0.component_count())
}

/// Copies the component ids into `buf`, which must hold at least
/// `tc_partition_len(p)` elements.
///
/// # Safety
/// `p` must be a live handle and `buf` valid for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn tc_partition_labels(p: *const TcPartition, buf: *mut usize, len: usize) -> TcStatus {
    guard(|| {
        let p = handle(p, "partition")?;
        let labels = p.0.labels();
        if len < labels.len() {
            return Err(Fail(
                TcStatus::BufferTooSmall,
                format!("need {} elements, got {len}", labels.len()),
            ));
        }
        slice_out(buf, labels.len(), "buf")?.copy_from_slice(labels);
        Ok(())
    })
}

/// Greedy additive edge contraction.
///
/// # Safety
/// `g` must be a live graph handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_gaec(g: *const TcGraph, out: *mut *mut TcPartition) -> TcStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        write(out, Box::into_raw(Box::new(TcPartition(gaec(&g.0)))), "out")
    })
}

/// Local search starting from `start`; never increases the objective.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_kl_refine(
    g: *const TcGraph,
    start: *const TcPartition,
    out: *mut *mut TcPartition,
) -> TcStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        let start = handle(start, "partition")?;
        if start.0.len() != g.0.node_count() {
            return Err(Error::Shape {
                expected: g.0.node_count(),
                actual: start.0.len(),
            }
            .into());
        }
        write(out, Box::into_raw(Box::new(TcPartition(kl_refine(&g.0, &start.0)))), "out")
    })
}

/// Exact optimum by enumeration; graphs up to 12 nodes.
///
/// # Safety
/// `g` must be live; `out` and `objective_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_brute_force(
    g: *const TcGraph,
    out: *mut *mut TcPartition,
    objective_out: *mut f64,
) -> TcStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        if out.is_null() || objective_out.is_null() {
            return Err(null("output"));
        }
        let (p, obj) = brute_force(&g.0)?;
        write(objective_out, obj, "objective_out")?;
        write(out, Box::into_raw(Box::new(TcPartition(p))), "out")
    })
}

/// Sum of costs of the edges cut by `p`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_objective(g: *const TcGraph, p: *const TcPartition, out: *mut f64) -> TcStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        let p = handle(p, "partition")?;
        write(out, objective(&g.0, &p.0)?, "out")
    })
}

/// Checks the cycle constraints of the edge labeling induced by `p`.
/// Writes 1 when they hold, 0 otherwise.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_validate_partition(g: *const TcGraph, p: *const TcPartition, out: *mut i32) -> TcStatus {
    guard(|| {
        let g = handle(g, "graph")?;
        let p = handle(p, "partition")?;
        if p.0.len() != g.0.node_count() {
            return Err(Error::Shape {
                expected: g.0.node_count(),
                actual: p.0.len(),
            }
            .into());
        }
        write(out, i32::from(validate_partition(&g.0, &p.0)), "out")
    })
}

/// Clustering accuracy under the best one-to-one cluster/label map.
///
/// # Safety
/// `pred` and `truth` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_accuracy(pred: *const usize, truth: *const usize, n: usize, out: *mut f64) -> TcStatus {
    guard(|| {
        let pred = slice_in(pred, n, "pred")?;
        let truth = slice_in(truth, n, "truth")?;
        write(out, accuracy(pred, truth)?.acc, "out")
    })
}

/// `sqrt((alpha + beta) / 2)`. Accepts `beta = 0`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_analytic_threshold(alpha: f64, beta: f64, out: *mut f64) -> TcStatus {
    guard(|| write(out, analytic_threshold_override(alpha, beta)?, "out"))
}

/// `logit(1 - p_cut)` with `p_cut` clamped to `[clamp, 1 - clamp]`.
#[no_mangle]
pub extern "C" fn tc_edge_cost(p_cut: f64, clamp: f64) -> f64 {
    edge_cost(p_cut, clamp)
}

/// Triplet loss of one triplet of `dim`-dimensional embeddings. Gradient
/// buffers may be null; otherwise each must hold `dim` elements.
///
/// # Safety
/// Input arrays must hold `dim` elements; `loss_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_triplet_loss(
    kind: TcLoss,
    anchor: *const f64,
    positive: *const f64,
    negative: *const f64,
    dim: usize,
    alpha: f64,
    beta: f64,
    loss_out: *mut f64,
    grad_anchor: *mut f64,
    grad_positive: *mut f64,
    grad_negative: *mut f64,
) -> TcStatus {
    guard(|| {
        let margins = TripletMargins::new(alpha, beta)?;
        let g = triplet_loss(
            kind.into(),
            slice_in(anchor, dim, "anchor")?,
            slice_in(positive, dim, "positive")?,
            slice_in(negative, dim, "negative")?,
            margins,
        )?;
        for (buf, grad) in [(grad_anchor, &g.anchor), (grad_positive, &g.positive), (grad_negative, &g.negative)] {
            if !buf.is_null() {
                slice_out(buf, dim, "gradient")?.copy_from_slice(grad);
            }
        }
        write(loss_out, g.loss, "loss_out")
    })
}

/// Loads a network checkpoint from a JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_net_load(path: *const c_char, out: *mut *mut TcNet) -> TcStatus {
    guard(|| {
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(TcStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let (net, _) = EmbeddingNet::load(Path::new(path))?;
        write(out, Box::into_raw(Box::new(TcNet(net))), "out")
    })
}

/// # Safety
/// `net` must be null or a handle from `tc_net_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tc_net_free(net: *mut TcNet) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_net_input_dim(net: *const TcNet) -> usize {
    net.as_ref().map_or(0, |n| n.0.input_dim())
}

/// # Safety
/// `net` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_net_output_dim(net: *const TcNet) -> usize {
    net.as_ref().map_or(0, |n| n.0.output_dim())
}

/// Embeds `n` row-major inputs of the network's input size into `out`,
/// which must hold `n * tc_net_output_dim(net)` values.
///
/// # Safety
/// `net` must be live; buffers must have the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn tc_net_forward(
    net: *const TcNet,
    inputs: *const f64,
    n: usize,
    out: *mut f64,
    out_len: usize,
) -> TcStatus {
    guard(|| {
        let net = &handle(net, "net")?.0;
        let (din, dout) = (net.input_dim(), net.output_dim());
        if out_len < n * dout {
            return Err(Fail(
                TcStatus::BufferTooSmall,
                format!("need {} outputs, got {out_len}", n * dout),
            ));
        }
        let x = slice_in(inputs, n * din, "inputs")?;
        let y = slice_out(out, n * dout, "out")?;
        for i in 0..n {
            let e = net.forward(&x[i * din..(i + 1) * din])?;
            y[i * dout..(i + 1) * dout].copy_from_slice(&e);
        }
        Ok(())
    })
}

/// k-means++ with Lloyd iterations, best of `restarts` runs. `points` is
/// row-major `n x dim`; `assignment` must hold `n` elements.
///
/// # Safety
/// Buffers must have the stated lengths; `inertia_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn tc_kmeans(
    points: *const f64,
    n: usize,
    dim: usize,
    k: usize,
    restarts: usize,
    seed: u64,
    assignment: *mut usize,
    inertia_out: *mut f64,
) -> TcStatus {
    guard(|| {
        if n == 0 || dim == 0 {
            return Err(Fail(TcStatus::InvalidArgument, "need at least one point and dimension".into()));
        }
        let data = slice_in(points, n * dim, "points")?;
        let out = slice_out(assignment, n, "assignment")?;
        let r = kmeans(&rows(data, n, dim), k, restarts, &mut seeded(seed))?;
        out.copy_from_slice(&r.assignment);
        if !inertia_out.is_null() {
            *inertia_out = r.inertia;
        }
        Ok(())
    })
}
