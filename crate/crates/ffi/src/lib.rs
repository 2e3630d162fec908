//! C ABI over the toprel toolkit.
//!
//! Fallible functions return a [`ToprelStatus`] and write results through
//! out-pointers. On failure a message is kept per thread and can be read
//! with [`toprel_last_error`]. Objects are opaque handles released with the
//! matching `_free` function; passing null to any `_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use nalgebra::DMatrix;

use toprel::align::{align_topics, build_topic_groups, Matching, TopN};
use toprel::corpus::{load_corpus, save_corpus, Corpus, CorpusFormat};
use toprel::lda::{run_replications, LdaConfig, ReplicationSet, SeedMode};
use toprel::reliability::{
    cronbach_alpha, mcdonald_omega, reliability_report, spearman_brown, ObservationMatrix, ReportSettings, Source,
};
use toprel::synthgen::{generate, make_degenerate_replication, GenerativeSpec};
use toprel::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToprelStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    /// A coefficient is undefined for the input (zero variance, zero
    /// denominator, singular covariance).
    Undefined = 5,
    Numerical = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToprelCorpusFormat {
    LineTokens = 0,
    SparseTriplets = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToprelPreset {
    Trivial = 0,
    Nontrivial = 1,
}

/// Gibbs sampler settings. `alpha <= 0` selects 50/K.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ToprelLdaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Nonzero gives every replication the master seed.
    pub fixed_seed: i32,
}

/// The headline coefficients. Undefined values are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ToprelCoefficients {
    pub standard_practice: f64,
    pub stratified_alpha: f64,
    pub multivariate_omega: f64,
    pub maximal_reliability: f64,
}

/// Opaque corpus handle.
pub struct ToprelCorpus(Corpus);

/// Opaque handle to a set of fitted replications.
pub struct ToprelReplications(ReplicationSet);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ToprelStatus {
    match e {
        Error::Io { .. } => ToprelStatus::Io,
        Error::Parse { .. }
        | Error::NoDocuments
        | Error::EmptyDocument(_)
        | Error::UnknownTerm { .. }
        | Error::Json(_)
        | Error::Csv(_) => ToprelStatus::Parse,
        Error::InvalidArgument(_) | Error::Config(_) => ToprelStatus::InvalidArgument,
        Error::ConstantColumn(_) | Error::Undefined(_) | Error::SingularCovariance(_) => ToprelStatus::Undefined,
        Error::Bootstrap { .. } | Error::Numerical(_) => ToprelStatus::Numerical,
    }
}

/// Runs `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> ToprelStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ToprelStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            ToprelStatus::Panic
        }
    }
}

struct Failure(ToprelStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ToprelStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(ToprelStatus::InvalidArgument, message.into())
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Failure> {
    if path.is_null() {
        return Err(null("path"));
    }
    // SAFETY: caller passes a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(path) }
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn format_of(format: ToprelCorpusFormat) -> CorpusFormat {
    match format {
        ToprelCorpusFormat::LineTokens => CorpusFormat::LineTokens,
        ToprelCorpusFormat::SparseTriplets => CorpusFormat::SparseTriplets,
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn toprel_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn toprel_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn toprel_corpus_load(
    path: *const c_char,
    format: ToprelCorpusFormat,
    out: *mut *mut ToprelCorpus,
) -> ToprelStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let path = unsafe { path_arg(path) }?;
        let corpus = load_corpus(&path, format_of(format))?;
        // SAFETY: `out` checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(ToprelCorpus(corpus))) };
        Ok(())
    })
}

/// Generates a synthetic corpus from a preset.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn toprel_corpus_generate(
    preset: ToprelPreset,
    seed: u64,
    out: *mut *mut ToprelCorpus,
) -> ToprelStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = match preset {
            ToprelPreset::Trivial => GenerativeSpec::trivial(seed),
            ToprelPreset::Nontrivial => GenerativeSpec::nontrivial(seed),
        };
        let (corpus, _) = generate(&spec)?;
        // SAFETY: `out` checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(ToprelCorpus(corpus))) };
        Ok(())
    })
}

/// # Safety
/// `corpus` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn toprel_corpus_save(
    corpus: *const ToprelCorpus,
    path: *const c_char,
    format: ToprelCorpusFormat,
) -> ToprelStatus {
    guard(|| {
        // SAFETY: caller passes a live handle or null.
        let corpus = unsafe { corpus.as_ref() }.ok_or_else(|| null("corpus"))?;
        // SAFETY: forwarded caller contract.
        let path = unsafe { path_arg(path) }?;
        save_corpus(&corpus.0, &path, format_of(format))?;
        Ok(())
    })
}

/// Number of documents; 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn toprel_corpus_num_docs(corpus: *const ToprelCorpus) -> usize {
    // SAFETY: caller contract.
    unsafe { corpus.as_ref() }.map_or(0, |c| c.0.num_docs())
}

/// Vocabulary size; 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn toprel_corpus_vocab_size(corpus: *const ToprelCorpus) -> usize {
    // SAFETY: caller contract.
    unsafe { corpus.as_ref() }.map_or(0, |c| c.0.vocab_size())
}

/// # Safety
/// `corpus` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn toprel_corpus_free(corpus: *mut ToprelCorpus) {
    if !corpus.is_null() {
        // SAFETY: handle was created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(corpus) });
    }
}

/// Fits `n_reps` replications in parallel.
///
/// # Safety
/// `corpus` and `params` must be valid; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn toprel_replications_fit(
    corpus: *const ToprelCorpus,
    params: *const ToprelLdaParams,
    n_reps: usize,
    master_seed: u64,
    out: *mut *mut ToprelReplications,
) -> ToprelStatus {
    guard(|| {
        // SAFETY: caller contract.
        let corpus = unsafe { corpus.as_ref() }.ok_or_else(|| null("corpus"))?;
        // SAFETY: caller contract.
        let p = unsafe { params.as_ref() }.ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let base = LdaConfig::new(p.k.max(1));
        let config = LdaConfig {
            k: p.k,
            alpha: if p.alpha > 0.0 { p.alpha } else { base.alpha },
            beta: p.beta,
            iterations: p.iterations,
            burn_in: p.burn_in,
            seed: master_seed,
        };
        let mode = if p.fixed_seed != 0 {
            SeedMode::Fixed
        } else {
            SeedMode::Distinct
        };
        let reps = run_replications(&corpus.0, &config, n_reps, mode, master_seed)?;
        // SAFETY: `out` checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(ToprelReplications(reps))) };
        Ok(())
    })
}

/// # Safety
/// `reps` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn toprel_replications_len(reps: *const ToprelReplications) -> usize {
    // SAFETY: caller contract.
    unsafe { reps.as_ref() }.map_or(0, |r| r.0.len())
}

/// # Safety
/// `reps` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn toprel_replications_k(reps: *const ToprelReplications) -> usize {
    // SAFETY: caller contract.
    unsafe { reps.as_ref() }.map_or(0, |r| r.0.k())
}

/// Copies replication `index`'s K x V topic-word matrix, row-major, into
/// `buf`, which must hold `len >= K * V` values.
///
/// # Safety
/// `reps` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn toprel_replications_phi(
    reps: *const ToprelReplications,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> ToprelStatus {
    guard(|| {
        // SAFETY: caller contract.
        let reps = unsafe { reps.as_ref() }.ok_or_else(|| null("reps"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let model = reps
            .0
            .models
            .get(index)
            .ok_or_else(|| invalid(format!("no replication {index}")))?;
        let (k, v) = model.phi.shape();
        if len < k * v {
            return Err(invalid(format!("buffer holds {len} values, need {}", k * v)));
        }
        // SAFETY: `buf` is valid for `len >= k * v` writes.
        let out = unsafe { std::slice::from_raw_parts_mut(buf, k * v) };
        for t in 0..k {
            for w in 0..v {
                out[t * v + w] = model.phi[(t, w)];
            }
        }
        Ok(())
    })
}

/// Overwrites replication `replace` with a near-uniform replication built
/// from replication `source`.
///
/// # Safety
/// `reps` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn toprel_replications_inject_degenerate(
    reps: *mut ToprelReplications,
    replace: usize,
    source: usize,
    epsilon: f64,
    seed: u64,
) -> ToprelStatus {
    guard(|| {
        // SAFETY: caller contract.
        let reps = unsafe { reps.as_mut() }.ok_or_else(|| null("reps"))?;
        let model = reps
            .0
            .models
            .get(source)
            .ok_or_else(|| invalid(format!("no replication {source}")))?;
        let degenerate = make_degenerate_replication(model, epsilon, seed)?;
        reps.0.replace(replace, degenerate)?;
        Ok(())
    })
}

/// # Safety
/// `reps` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn toprel_replications_free(reps: *mut ToprelReplications) {
    if !reps.is_null() {
        // SAFETY: handle was created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(reps) });
    }
}

fn report(
    reps: &ReplicationSet,
    top_n: usize,
    cutoff: f64,
    bootstrap: usize,
    seed: u64,
) -> Result<toprel::reliability::ReliabilityReport, Failure> {
    let top_n = if top_n == 0 {
        TopN::All
    } else {
        TopN::Count(top_n).fit_to(reps.vocab_size())
    };
    let alignment = align_topics(reps, 0, top_n, Matching::Greedy)?;
    let groups = build_topic_groups(reps, &alignment)?;
    let settings = ReportSettings {
        cutoff,
        bootstrap_resamples: bootstrap,
        bootstrap_seed: seed,
        ..ReportSettings::default()
    };
    Ok(reliability_report(
        &groups,
        &alignment,
        &reps.seeds,
        &reps.corpus_digest,
        &settings,
    )?)
}

/// Scores the four coefficients with replication 0 as reference and the
/// last topic dropped. `top_n == 0` matches on full word distributions.
///
/// # Safety
/// `reps` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn toprel_reliability(
    reps: *const ToprelReplications,
    top_n: usize,
    cutoff: f64,
    out: *mut ToprelCoefficients,
) -> ToprelStatus {
    guard(|| {
        // SAFETY: caller contract.
        let reps = unsafe { reps.as_ref() }.ok_or_else(|| null("reps"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = report(&reps.0, top_n, cutoff, 0, 0)?;
        let c = &r.coefficients;
        let value = |l: Option<toprel::reliability::Labeled>| l.map_or(f64::NAN, |l| l.value);
        let coefficients = ToprelCoefficients {
            standard_practice: c.standard_practice.value,
            stratified_alpha: value(c.stratified_alpha),
            multivariate_omega: value(c.multivariate_omega),
            maximal_reliability: value(c.maximal_reliability),
        };
        // SAFETY: `out` checked non-null above.
        unsafe { *out = coefficients };
        Ok(())
    })
}

/// The full reliability report as JSON. Release the string with
/// [`toprel_string_free`]. `bootstrap == 0` skips standard errors.
///
/// # Safety
/// `reps` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn toprel_reliability_report_json(
    reps: *const ToprelReplications,
    top_n: usize,
    cutoff: f64,
    bootstrap: usize,
    seed: u64,
    out: *mut *mut c_char,
) -> ToprelStatus {
    guard(|| {
        // SAFETY: caller contract.
        let reps = unsafe { reps.as_ref() }.ok_or_else(|| null("reps"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = report(&reps.0, top_n, cutoff, bootstrap, seed)?;
        let json = serde_json::to_string(&r).map_err(Error::from)?;
        let c = CString::new(json).map_err(|_| invalid("report contains NUL"))?;
        // SAFETY: `out` checked non-null above.
        unsafe { *out = c.into_raw() };
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn toprel_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: string was created by CString::into_raw in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}

unsafe fn observations(data: *const f64, n_obs: usize, n_items: usize) -> Result<ObservationMatrix, Failure> {
    if data.is_null() {
        return Err(null("data"));
    }
    let len = n_obs.checked_mul(n_items).ok_or_else(|| invalid("matrix too large"))?;
    // SAFETY: caller passes `n_obs * n_items` readable values.
    let values = unsafe { std::slice::from_raw_parts(data, len) };
    let m = DMatrix::from_row_slice(n_obs, n_items, values);
    Ok(ObservationMatrix::new(m, Source::DocTopic)?)
}

/// Cronbach's alpha of a row-major `n_obs x n_items` matrix.
///
/// # Safety
/// `data` must hold `n_obs * n_items` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn toprel_cronbach_alpha(
    data: *const f64,
    n_obs: usize,
    n_items: usize,
    out: *mut f64,
) -> ToprelStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let m = unsafe { observations(data, n_obs, n_items) }?;
        let a = cronbach_alpha(&m)?;
        // SAFETY: `out` checked non-null above.
        unsafe { *out = a };
        Ok(())
    })
}

/// McDonald's omega from a one-factor fit of a row-major
/// `n_obs x n_items` matrix.
///
/// # Safety
/// `data` must hold `n_obs * n_items` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn toprel_mcdonald_omega(
    data: *const f64,
    n_obs: usize,
    n_items: usize,
    out: *mut f64,
) -> ToprelStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: forwarded caller contract.
        let m = unsafe { observations(data, n_obs, n_items) }?;
        let w = mcdonald_omega(&m)?;
        // SAFETY: `out` checked non-null above.
        unsafe { *out = w };
        Ok(())
    })
}

/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn toprel_spearman_brown(r: f64, n: usize, out: *mut f64) -> ToprelStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let v = spearman_brown(r, n)?;
        // SAFETY: `out` checked non-null above.
        unsafe { *out = v };
        Ok(())
    })
}

/// Null-safe accessor used by tests and bindings that want an owned copy.
pub fn last_error_string() -> String {
    // SAFETY: the thread-local string is NUL-terminated and alive.
    unsafe { CStr::from_ptr(toprel_last_error()) }
        .to_string_lossy()
        .into_owned()
}
