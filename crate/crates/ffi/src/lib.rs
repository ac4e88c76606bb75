//! C ABI over the `synthpriv` auditor.
//!
//! Every fallible function returns an [`SpStatus`]; on failure a message is
//! available from [`sp_last_error`] on the same thread. Datasets are opaque
//! [`SpDataset`] handles released with [`sp_dataset_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use synthpriv::bounds::{chebyshev_gamma, chebyshev_mu};
use synthpriv::datamodel::load_csv;
use synthpriv::divergence::kl_estimate;
use synthpriv::mechanism::calibrate_sigma;
use synthpriv::synthgen::{generate, GeneratorKind, GeneratorSpec};
use synthpriv::{audit, AuditConfig, Dataset, Direction, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    Undersized = 6,
    Degenerate = 7,
    Labels = 8,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpDirection {
    Forward = 0,
    Max = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpGenerator {
    SmoothedBootstrap = 0,
    Memorize = 1,
    GaussianFit = 2,
}

/// Audit parameters. `k == 0` picks the neighbourhood size from the data.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpAuditConfig {
    pub n_pairs: usize,
    pub k: usize,
    pub nn_order: usize,
    pub direction: SpDirection,
    pub seed: u64,
    pub gamma: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpPrivacyEstimate {
    pub mean_loss: f64,
    pub variance: f64,
    pub upper_semivariance: f64,
    pub mu: f64,
    pub gamma: f64,
    pub n_samples: usize,
    pub k_removed: usize,
}

/// Opaque dataset handle.
pub struct SpDataset {
    inner: Dataset,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

fn status_of(err: &Error) -> SpStatus {
    match err {
        Error::Io { .. } => SpStatus::Io,
        Error::Parse { .. } | Error::RaggedRow { .. } => SpStatus::Parse,
        Error::DimensionMismatch { .. } => SpStatus::DimensionMismatch,
        Error::Undersized { .. } => SpStatus::Undersized,
        Error::NonFinite { .. } | Error::InvalidParameter { .. } => SpStatus::InvalidArgument,
        Error::Degenerate(_) => SpStatus::Degenerate,
        Error::MissingLabels | Error::LabelOutOfRange { .. } => SpStatus::Labels,
    }
}

enum Failure {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

/// Runs `body`, recording any error or panic for `sp_last_error`.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SpStatus::Ok
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            SpStatus::NullPointer
        }
        Ok(Err(Failure::Core(err))) => {
            set_error(err.to_string());
            status_of(&err)
        }
        Err(_) => {
            set_error("internal panic".into());
            SpStatus::Panic
        }
    }
}

unsafe fn non_null<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

unsafe fn out_ref<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or(Failure::Null(name))
}

unsafe fn samples<'a>(values: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if values.is_null() {
        return Err(Failure::Null("samples"));
    }
    Ok(std::slice::from_raw_parts(values, len))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn sp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library defaults: 100 pairs, data-driven k, first neighbour, max direction,
/// seed 42, gamma 1e-5.
#[no_mangle]
pub extern "C" fn sp_audit_config_default() -> SpAuditConfig {
    let d = AuditConfig::default();
    SpAuditConfig {
        n_pairs: d.n_pairs,
        k: d.k_override.unwrap_or(0),
        nn_order: d.nn_order,
        direction: match d.direction {
            Direction::Forward => SpDirection::Forward,
            Direction::Max => SpDirection::Max,
        },
        seed: d.seed,
        gamma: d.gamma,
    }
}

/// Copies `n_rows * dim` row-major values into a new dataset.
///
/// # Safety
/// `values` must point to `n_rows * dim` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_from_rows(
    values: *const f64,
    n_rows: usize,
    dim: usize,
    out: *mut *mut SpDataset,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let len = n_rows
            .checked_mul(dim)
            .ok_or(Failure::Core(Error::InvalidParameter {
                name: "n_rows",
                message: "size overflow".into(),
            }))?;
        let data = samples(values, len)?;
        let inner = Dataset::from_flat(data.to_vec(), dim, None)?;
        *out = Box::into_raw(Box::new(SpDataset { inner }));
        Ok(())
    })
}

/// Loads a CSV file. With `has_labels`, the last column holds integer labels.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_load_csv(
    path: *const c_char,
    has_labels: bool,
    out: *mut *mut SpDataset,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(Failure::Null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|e| Error::InvalidParameter {
                name: "path",
                message: e.to_string(),
            })?;
        let inner = load_csv(path, has_labels)?;
        *out = Box::into_raw(Box::new(SpDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `data` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_free(data: *mut SpDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Number of points, or 0 for NULL.
///
/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_len(data: *const SpDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.len())
}

/// Feature dimension, or 0 for NULL.
///
/// # Safety
/// `data` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_dim(data: *const SpDataset) -> usize {
    data.as_ref().map_or(0, |d| d.inner.dim())
}

/// Copies the row-major values into `buffer`, which must hold `len * dim` doubles.
///
/// # Safety
/// `data` must be a live handle; `buffer` must have room for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sp_dataset_values(
    data: *const SpDataset,
    buffer: *mut f64,
    capacity: usize,
) -> SpStatus {
    guard(|| {
        let data = non_null(data, "data")?;
        let values = data.inner.values();
        if capacity < values.len() {
            return Err(Error::Undersized {
                found: capacity,
                required: values.len(),
            }
            .into());
        }
        if buffer.is_null() {
            return Err(Failure::Null("buffer"));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buffer, values.len());
        Ok(())
    })
}

/// Draws a synthetic dataset from `real`.
///
/// # Safety
/// `real` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_generate(
    real: *const SpDataset,
    kind: SpGenerator,
    bandwidth: f64,
    count: usize,
    seed: u64,
    out: *mut *mut SpDataset,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        let real = non_null(real, "real")?;
        let spec = GeneratorSpec {
            kind: match kind {
                SpGenerator::SmoothedBootstrap => GeneratorKind::SmoothedBootstrap,
                SpGenerator::Memorize => GeneratorKind::Memorize,
                SpGenerator::GaussianFit => GeneratorKind::GaussianFit,
            },
            bandwidth,
            count,
            seed,
        };
        let inner = generate(&real.inner, &spec)?;
        *out = Box::into_raw(Box::new(SpDataset { inner }));
        Ok(())
    })
}

/// Runs the full audit and writes the bound into `out`.
///
/// # Safety
/// All pointers must be live and, for `out`, writable.
#[no_mangle]
pub unsafe extern "C" fn sp_audit(
    real: *const SpDataset,
    synthetic: *const SpDataset,
    config: *const SpAuditConfig,
    out: *mut SpPrivacyEstimate,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let real = non_null(real, "real")?;
        let synthetic = non_null(synthetic, "synthetic")?;
        let c = non_null(config, "config")?;
        let config = AuditConfig {
            n_pairs: c.n_pairs,
            k_override: (c.k > 0).then_some(c.k),
            nn_order: c.nn_order,
            direction: match c.direction {
                SpDirection::Forward => Direction::Forward,
                SpDirection::Max => Direction::Max,
            },
            seed: c.seed,
            gamma: c.gamma,
        };
        let (est, _) = audit(&real.inner, &synthetic.inner, &config)?;
        *out = SpPrivacyEstimate {
            mean_loss: est.mean_loss,
            variance: est.variance,
            upper_semivariance: est.upper_semivariance,
            mu: est.mu,
            gamma: est.gamma,
            n_samples: est.n_samples,
            k_removed: est.k_removed,
        };
        Ok(())
    })
}

/// Nearest-neighbour estimate of KL(P || Q) in nats.
///
/// # Safety
/// `p` and `q` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_kl_estimate(
    p: *const SpDataset,
    q: *const SpDataset,
    nn_order: usize,
    out: *mut f64,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let p = non_null(p, "p")?;
        let q = non_null(q, "q")?;
        *out = kl_estimate(&p.inner, &q.inner, nn_order)?.value;
        Ok(())
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_calibrate_sigma(
    epsilon: f64,
    delta: f64,
    clip: f64,
    out: *mut f64,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = calibrate_sigma(epsilon, delta, clip)?;
        Ok(())
    })
}

/// # Safety
/// `values` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_chebyshev_mu(
    values: *const f64,
    len: usize,
    gamma: f64,
    out: *mut f64,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = chebyshev_mu(samples(values, len)?, gamma)?.mu;
        Ok(())
    })
}

/// # Safety
/// `values` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sp_chebyshev_gamma(
    values: *const f64,
    len: usize,
    mu: f64,
    out: *mut f64,
) -> SpStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = chebyshev_gamma(samples(values, len)?, mu)?;
        Ok(())
    })
}
