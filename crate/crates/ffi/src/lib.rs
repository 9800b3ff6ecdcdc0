//! C interface to `dsre-core`.
//!
//! Objects cross the boundary as opaque handles created by a `*_load` or
//! `*_score` call and released by the matching `*_free`. Every fallible call
//! returns a [`DsreStatus`]; on failure, [`dsre_last_error`] describes it.
//! Strings handed out by the library stay valid until the handle owning them
//! is freed.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dsre_core::corpus::{load_corpus, CorpusOptions, InstanceBag, DEFAULT_MAX_SENTENCE_LEN};
use dsre_core::encoder::StaticEmbeddings;
use dsre_core::eval::{self, GoldSet, Prediction};
use dsre_core::model::Model;
use dsre_core::training::checkpoint;
use dsre_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsreStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Checkpoint = 5,
    InvalidArgument = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// A trained model loaded from a checkpoint.
pub struct DsreModel {
    model: Model,
    relation_names: Vec<CString>,
}

/// Static word vectors, one per line: `word v1 v2 ...`.
pub struct DsreEmbeddings(StaticEmbeddings);

/// Bags read from a JSON-lines corpus.
pub struct DsreCorpus(Vec<InstanceBag>);

/// Scores for every (entity pair, non-NA relation), sorted by pair then relation.
pub struct DsrePredictions {
    items: Vec<Prediction>,
    strings: Vec<[CString; 3]>,
}

/// One scored (entity pair, relation). Borrowed from its [`DsrePredictions`].
#[repr(C)]
pub struct DsrePrediction {
    pub e1: *const c_char,
    pub e2: *const c_char,
    pub relation: *const c_char,
    pub score: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(DsreStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => DsreStatus::Io,
            Error::Parse { .. } | Error::InvalidInstance { .. } | Error::Config { .. } => DsreStatus::Parse,
            Error::Checkpoint(_) => DsreStatus::Checkpoint,
            _ => DsreStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DsreStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DsreStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            DsreStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal error: {message}"));
            DsreStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DsreStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

/// Checked before any work so a bad call never does I/O.
unsafe fn out_slot<'a, T>(out: *mut *mut T) -> Result<&'a mut *mut T, Failure> {
    out.as_mut().ok_or_else(|| null("output pointer"))
}

fn boxed<T>(slot: &mut *mut T, value: T) -> Result<(), Failure> {
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed")
}

/// Message for the most recent failed call on this thread; empty after a
/// success. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn dsre_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn dsre_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsre_model_load(path: *const c_char, out: *mut *mut DsreModel) -> DsreStatus {
    guard(|| {
        let slot = out_slot(out)?;
        let path = path_arg(path, "path")?;
        let (model, _) = checkpoint::load(&path)?;
        let relation_names = model.schema.relations().iter().map(|r| c_string(r)).collect();
        boxed(slot, DsreModel { model, relation_names })
    })
}

/// # Safety
/// `model` must come from [`dsre_model_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dsre_model_free(model: *mut DsreModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of relations in the model's schema, NA included (index 0).
///
/// # Safety
/// `model` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn dsre_model_num_relations(model: *const DsreModel) -> usize {
    model.as_ref().map_or(0, |m| m.relation_names.len())
}

/// Name of relation `index`, or null when out of range.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn dsre_model_relation_name(model: *const DsreModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.relation_names.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsre_embeddings_load(path: *const c_char, out: *mut *mut DsreEmbeddings) -> DsreStatus {
    guard(|| {
        let slot = out_slot(out)?;
        let path = path_arg(path, "path")?;
        boxed(slot, DsreEmbeddings(StaticEmbeddings::load(&path)?))
    })
}

/// # Safety
/// `embeddings` must come from [`dsre_embeddings_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dsre_embeddings_free(embeddings: *mut DsreEmbeddings) {
    if !embeddings.is_null() {
        drop(Box::from_raw(embeddings));
    }
}

/// Loads a corpus without truncating bags; scoring cuts oversized bags.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsre_corpus_load(path: *const c_char, out: *mut *mut DsreCorpus) -> DsreStatus {
    guard(|| {
        let slot = out_slot(out)?;
        let path = path_arg(path, "path")?;
        let opts = CorpusOptions {
            max_sentence_len: DEFAULT_MAX_SENTENCE_LEN,
            memory_capacity: usize::MAX,
        };
        boxed(slot, DsreCorpus(load_corpus(&path, &opts)?))
    })
}

/// # Safety
/// `corpus` must come from [`dsre_corpus_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dsre_corpus_free(corpus: *mut DsreCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// # Safety
/// `corpus` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn dsre_corpus_num_bags(corpus: *const DsreCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.len())
}

/// Scores every bag of `corpus`. `threads == 0` uses every core; the
/// result is identical for any thread count.
///
/// # Safety
/// All handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsre_score_corpus(
    model: *const DsreModel,
    corpus: *const DsreCorpus,
    embeddings: *const DsreEmbeddings,
    threads: u32,
    out: *mut *mut DsrePredictions,
) -> DsreStatus {
    guard(|| {
        let slot = out_slot(out)?;
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let corpus = corpus.as_ref().ok_or_else(|| null("corpus"))?;
        let embeddings = embeddings.as_ref().ok_or_else(|| null("embeddings"))?;
        let items = eval::score_corpus(&model.model, &corpus.0, &embeddings.0, threads as usize)?;
        let strings = items
            .iter()
            .map(|p| [c_string(&p.pair_id.e1), c_string(&p.pair_id.e2), c_string(&p.relation)])
            .collect();
        boxed(slot, DsrePredictions { items, strings })
    })
}

/// # Safety
/// `predictions` must come from [`dsre_score_corpus`] or be null.
#[no_mangle]
pub unsafe extern "C" fn dsre_predictions_free(predictions: *mut DsrePredictions) {
    if !predictions.is_null() {
        drop(Box::from_raw(predictions));
    }
}

/// # Safety
/// `predictions` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn dsre_predictions_len(predictions: *const DsrePredictions) -> usize {
    predictions.as_ref().map_or(0, |p| p.items.len())
}

/// # Safety
/// `predictions` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsre_predictions_get(
    predictions: *const DsrePredictions,
    index: usize,
    out: *mut DsrePrediction,
) -> DsreStatus {
    guard(|| {
        let p = predictions.as_ref().ok_or_else(|| null("predictions"))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let (item, names) = p.items.get(index).zip(p.strings.get(index)).ok_or_else(|| {
            Failure(
                DsreStatus::OutOfRange,
                format!("index {index} out of range for {} predictions", p.items.len()),
            )
        })?;
        *out = DsrePrediction {
            e1: names[0].as_ptr(),
            e2: names[1].as_ptr(),
            relation: names[2].as_ptr(),
            score: item.score,
        };
        Ok(())
    })
}

/// Area under the precision/recall curve of `predictions` against gold
/// facts. `gold_path` names an `e1<TAB>e2<TAB>relation` file; when it is
/// null the labels of `corpus` are the gold set.
///
/// # Safety
/// `predictions` must be live; `corpus` must be live when `gold_path` is
/// null; `auc_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsre_auc_pr(
    predictions: *const DsrePredictions,
    gold_path: *const c_char,
    corpus: *const DsreCorpus,
    auc_out: *mut f64,
) -> DsreStatus {
    guard(|| {
        let p = predictions.as_ref().ok_or_else(|| null("predictions"))?;
        if auc_out.is_null() {
            return Err(null("auc_out"));
        }
        let gold: GoldSet = if gold_path.is_null() {
            eval::gold_from_bags(&corpus.as_ref().ok_or_else(|| null("corpus"))?.0)
        } else {
            eval::load_gold(&path_arg(gold_path, "gold_path")?)?
        };
        *auc_out = eval::pr_curve(&p.items, &gold)?.auc;
        Ok(())
    })
}
