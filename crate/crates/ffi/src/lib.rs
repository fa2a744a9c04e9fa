//! C ABI over `uoan-core`.
//!
//! Objects are opaque handles created by `*_new`/`*_load`/`*_run` calls and
//! released with the matching `*_free`. Every fallible call returns a
//! [`UoanStatus`]; on failure [`uoan_last_error`] describes what went wrong
//! on the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use uoan_core::experiment::{ModeStats, Parallelism, SweepResult};
use uoan_core::routing::{e2e_rates, widest_path, NetworkGraph};
use uoan_core::{Config, Error, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UoanStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Serialization = 5,
    /// A computation was asked for something outside its domain, such as an
    /// unknown node id or a degenerate geometry.
    Domain = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Parsed and validated scenario.
pub struct UoanConfig(Config);

/// Aggregated sweep output.
pub struct UoanSweep(SweepResult);

/// Routing graph of one trial.
pub struct UoanGraph(NetworkGraph);

/// Localization aggregates for one ranging technology. NaN when the mode
/// was not run.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UoanModeStats {
    pub rmse_m: f64,
    pub stderr_rmse_m: f64,
    pub rmse_all_m: f64,
    pub stderr_rmse_all_m: f64,
    pub localized_frac: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct UoanSweepPoint {
    pub n_faces: usize,
    pub divergence_rad: f64,
    pub trials: usize,
    pub mean_e2e_bps: f64,
    pub stderr_e2e_bps: f64,
    pub conn_prob: f64,
    pub acoustic: UoanModeStats,
    pub optical: UoanModeStats,
    pub hybrid: UoanModeStats,
}

impl From<&ModeStats> for UoanModeStats {
    fn from(m: &ModeStats) -> Self {
        UoanModeStats {
            rmse_m: m.rmse_m,
            stderr_rmse_m: m.stderr_rmse_m,
            rmse_all_m: m.rmse_all_m,
            stderr_rmse_all_m: m.stderr_rmse_all_m,
            localized_frac: m.localized_frac,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(UoanStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Config { .. } => UoanStatus::Config,
            Error::Io { .. } => UoanStatus::Io,
            Error::Serialization(_) => UoanStatus::Serialization,
            _ => UoanStatus::Domain,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(UoanStatus::NullPointer, format!("`{what}` is null"))
}

// Runs `f`, records any failure for `uoan_last_error` and maps it to a code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> UoanStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => UoanStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            UoanStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        Fail(
            UoanStatus::InvalidUtf8,
            format!("`{what}` is not valid UTF-8"),
        )
    })
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

fn c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s).map(CString::into_raw).map_err(|_| {
        Fail(
            UoanStatus::Serialization,
            "output contains a NUL byte".into(),
        )
    })
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn uoan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uoan_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn uoan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Built-in defaults.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uoan_config_default(out: *mut *mut UoanConfig) -> UoanStatus {
    guard(|| put(out, boxed(UoanConfig(Config::default())), "out"))
}

/// Loads a TOML scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uoan_config_load(
    path: *const c_char,
    out: *mut *mut UoanConfig,
) -> UoanStatus {
    guard(|| {
        let cfg = Config::from_file(text(path, "path")?)?;
        put(out, boxed(UoanConfig(cfg)), "out")
    })
}

/// Parses a TOML scenario held in memory.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uoan_config_parse(
    toml: *const c_char,
    out: *mut *mut UoanConfig,
) -> UoanStatus {
    guard(|| {
        let cfg = Config::from_toml(text(toml, "toml")?)?;
        put(out, boxed(UoanConfig(cfg)), "out")
    })
}

/// Applies one `dotted.key=value` override. On failure the config is left
/// unchanged.
///
/// # Safety
/// `cfg` must be a live handle and `assignment` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn uoan_config_set(
    cfg: *mut UoanConfig,
    assignment: *const c_char,
) -> UoanStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0 = cfg.0.with_override(text(assignment, "assignment")?)?;
        Ok(())
    })
}

/// Serializes the config as TOML. Free the result with `uoan_string_free`.
///
/// # Safety
/// `cfg` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uoan_config_to_toml(
    cfg: *const UoanConfig,
    out: *mut *mut c_char,
) -> UoanStatus {
    guard(|| {
        let s = get(cfg, "cfg")?.0.to_toml()?;
        put(out, c_string(s)?, "out")
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uoan_config_free(cfg: *mut UoanConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn parallelism(threads: usize) -> Parallelism {
    match threads {
        0 => Parallelism::Auto,
        1 => Parallelism::Serial,
        n => Parallelism::Threads(n),
    }
}

/// Runs the configured sweep. `threads` = 0 uses every core; results do not
/// depend on it.
///
/// # Safety
/// `cfg` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uoan_sweep_run(
    cfg: *const UoanConfig,
    threads: usize,
    out: *mut *mut UoanSweep,
) -> UoanStatus {
    guard(|| {
        let r = uoan_core::run_sweep(&get(cfg, "cfg")?.0, parallelism(threads))?;
        put(out, boxed(UoanSweep(r)), "out")
    })
}

/// Runs the sweep and writes `csv_path` plus its `.manifest.toml`.
/// `out` may be NULL when the in-memory result is not needed.
///
/// # Safety
/// `cfg` must be a live handle, `csv_path` a NUL-terminated string, and
/// `out` NULL or valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uoan_sweep_run_to_file(
    cfg: *const UoanConfig,
    csv_path: *const c_char,
    threads: usize,
    out: *mut *mut UoanSweep,
) -> UoanStatus {
    guard(|| {
        let cfg = &get(cfg, "cfg")?.0;
        let path = Path::new(text(csv_path, "csv_path")?);
        let r = uoan_core::experiment::run_sweep_to_file(cfg, path, parallelism(threads))?;
        if !out.is_null() {
            out.write(boxed(UoanSweep(r)));
        }
        Ok(())
    })
}

/// # Safety
/// `sweep` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uoan_sweep_len(sweep: *const UoanSweep, out: *mut usize) -> UoanStatus {
    guard(|| put(out, get(sweep, "sweep")?.0.points.len(), "out"))
}

/// # Safety
/// `sweep` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uoan_sweep_point(
    sweep: *const UoanSweep,
    index: usize,
    out: *mut UoanSweepPoint,
) -> UoanStatus {
    guard(|| {
        let points = &get(sweep, "sweep")?.0.points;
        let p = points.get(index).ok_or_else(|| {
            Fail(
                UoanStatus::OutOfRange,
                format!("point {index} out of range (len {})", points.len()),
            )
        })?;
        let point = UoanSweepPoint {
            n_faces: p.n_faces,
            divergence_rad: p.divergence_rad,
            trials: p.trials,
            mean_e2e_bps: p.mean_e2e_bps,
            stderr_e2e_bps: p.stderr_e2e_bps,
            conn_prob: p.conn_prob,
            acoustic: (&p.acoustic).into(),
            optical: (&p.optical).into(),
            hybrid: (&p.hybrid).into(),
        };
        put(out, point, "out")
    })
}

/// The result table as CSV text. Free with `uoan_string_free`.
///
/// # Safety
/// `sweep` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uoan_sweep_to_csv(
    sweep: *const UoanSweep,
    out: *mut *mut c_char,
) -> UoanStatus {
    guard(|| {
        let s = get(sweep, "sweep")?.0.to_csv()?;
        put(out, c_string(s)?, "out")
    })
}

/// # Safety
/// `sweep` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uoan_sweep_free(sweep: *mut UoanSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}

/// Builds the routing graph of trial `trial` in the configured routing mode.
///
/// # Safety
/// `cfg` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uoan_graph_build(
    cfg: *const UoanConfig,
    trial: u64,
    out: *mut *mut UoanGraph,
) -> UoanStatus {
    guard(|| {
        let cfg = &get(cfg, "cfg")?.0;
        let sc = Scenario::new(cfg)?;
        let dep = sc.deployment(trial)?;
        let g = sc.graph(&dep, cfg.experiment.routing_mode)?;
        put(out, boxed(UoanGraph(g)), "out")
    })
}

/// Node count including the sink.
///
/// # Safety
/// `graph` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uoan_graph_node_count(
    graph: *const UoanGraph,
    out: *mut usize,
) -> UoanStatus {
    guard(|| put(out, get(graph, "graph")?.0.node_count(), "out"))
}

/// # Safety
/// `graph` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uoan_graph_edge_count(
    graph: *const UoanGraph,
    out: *mut usize,
) -> UoanStatus {
    guard(|| put(out, get(graph, "graph")?.0.edges().len(), "out"))
}

/// # Safety
/// `graph` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uoan_graph_sink(graph: *const UoanGraph, out: *mut usize) -> UoanStatus {
    guard(|| put(out, get(graph, "graph")?.0.sink(), "out"))
}

/// Bottleneck rate of the widest path from `src` to `dst` in bit/s, 0 when
/// unreachable.
///
/// # Safety
/// `graph` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn uoan_graph_widest_rate(
    graph: *const UoanGraph,
    src: usize,
    dst: usize,
    out: *mut f64,
) -> UoanStatus {
    guard(|| {
        let r = widest_path(&get(graph, "graph")?.0, src, dst)?;
        put(out, r.map_or(0.0, |p| p.bottleneck_rate), "out")
    })
}

/// End-to-end rate of every node to the sink, written to `rates[0..len]`
/// indexed by node id. The sink's own entry is 0. `len` must equal the
/// node count.
///
/// # Safety
/// `graph` must be a live handle and `rates` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn uoan_graph_e2e_rates(
    graph: *const UoanGraph,
    rates: *mut f64,
    len: usize,
) -> UoanStatus {
    guard(|| {
        let g = &get(graph, "graph")?.0;
        if rates.is_null() {
            return Err(null("rates"));
        }
        if len != g.node_count() {
            return Err(Fail(
                UoanStatus::OutOfRange,
                format!(
                    "buffer holds {len} rates, graph has {} nodes",
                    g.node_count()
                ),
            ));
        }
        let buf = std::slice::from_raw_parts_mut(rates, len);
        buf.fill(0.0);
        for (id, rate) in e2e_rates(g, g.sink())? {
            buf[id] = rate;
        }
        Ok(())
    })
}

/// The graph as JSON. Free with `uoan_string_free`.
///
/// # Safety
/// `graph` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn uoan_graph_to_json(
    graph: *const UoanGraph,
    out: *mut *mut c_char,
) -> UoanStatus {
    guard(|| {
        let s = get(graph, "graph")?.0.to_json()?;
        put(out, c_string(s)?, "out")
    })
}

/// # Safety
/// `graph` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uoan_graph_free(graph: *mut UoanGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}
