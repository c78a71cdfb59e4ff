//! C ABI over the answering pipeline.
//!
//! Every fallible call returns a [`SynkbqaStatus`]; on failure the message is
//! kept per thread and read back with [`synkbqa_last_error`]. Strings handed
//! out by the library must be released with [`synkbqa_string_free`], engines
//! with [`synkbqa_engine_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use synkbqa::dataset::parse_conllu_one;
use synkbqa::kb::TripleStore;
use synkbqa::matcher::{answer_tree, hinge_loss, load_checkpoint, Model};
use synkbqa::pipeline::Linker;
use synkbqa::vectors::WordVectors;
use synkbqa::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynkbqaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not UTF-8.
    InvalidUtf8 = 2,
    /// A file could not be read.
    Io = 3,
    /// Malformed input text or file contents.
    Parse = 4,
    /// Input was well formed but unusable (bad index, shape, mismatch).
    Invalid = 5,
    /// The question produced no candidate graph; the output is still set.
    NoCandidates = 6,
    /// Non-finite numbers or a caught panic.
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: SynkbqaStatus, msg: impl Into<String>) -> SynkbqaStatus {
    set_error(msg);
    status
}

fn status_of(e: &Error) -> SynkbqaStatus {
    match e {
        Error::Io(..) => SynkbqaStatus::Io,
        Error::Parse { .. } => SynkbqaStatus::Parse,
        Error::NonFinite { .. } => SynkbqaStatus::Internal,
        _ => SynkbqaStatus::Invalid,
    }
}

/// Runs `f`, turning errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<SynkbqaStatus, (SynkbqaStatus, String)>) -> SynkbqaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => fail(s, msg),
        Err(_) => fail(SynkbqaStatus::Internal, "panic inside synkbqa"),
    }
}

fn lib_err(e: Error) -> (SynkbqaStatus, String) {
    (status_of(&e), e.to_string())
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for the call.
unsafe fn arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (SynkbqaStatus, String)> {
    if p.is_null() {
        return Err((SynkbqaStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (SynkbqaStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NUL bytes were replaced").into_raw()
}

/// Loaded model, triple store and word vectors.
pub struct SynkbqaEngine {
    model: Model,
    store: TripleStore,
    words: WordVectors,
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn synkbqa_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn synkbqa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint (with its manifest beside it), a triples file and a
/// word-vector file. On success `*out` owns a new engine.
///
/// # Safety
/// Path arguments are NUL-terminated strings; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn synkbqa_engine_open(
    checkpoint: *const c_char,
    triples: *const c_char,
    word_vectors: *const c_char,
    out: *mut *mut SynkbqaEngine,
) -> SynkbqaStatus {
    guard(|| {
        if out.is_null() {
            return Err((SynkbqaStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let ckpt = arg(checkpoint, "checkpoint")?;
        let triples = arg(triples, "triples")?;
        let wv = arg(word_vectors, "word_vectors")?;
        let (model, _) = load_checkpoint(Path::new(ckpt)).map_err(lib_err)?;
        let store = TripleStore::load(Path::new(triples)).map_err(lib_err)?;
        let words = WordVectors::load(Path::new(wv)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(SynkbqaEngine { model, store, words }));
        Ok(SynkbqaStatus::Ok)
    })
}

/// # Safety
/// `engine` is null or came from [`synkbqa_engine_open`] and is not used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn synkbqa_engine_free(engine: *mut SynkbqaEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Answers `question` (whitespace-tokenized) using its dependency parse in
/// CoNLL-U form. `*out` receives the sorted answers, one per line, or an
/// empty string with status `NO_CANDIDATES`.
///
/// # Safety
/// `engine` came from [`synkbqa_engine_open`]; strings are NUL-terminated;
/// `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn synkbqa_engine_answer(
    engine: *const SynkbqaEngine,
    question: *const c_char,
    conllu: *const c_char,
    out: *mut *mut c_char,
) -> SynkbqaStatus {
    guard(|| {
        if out.is_null() {
            return Err((SynkbqaStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let engine = engine.as_ref().ok_or((SynkbqaStatus::NullArgument, "engine is null".into()))?;
        let question = arg(question, "question")?;
        let conllu = arg(conllu, "conllu")?;
        let tree = parse_conllu_one(conllu, question).map_err(lib_err)?;
        let linker = Linker::new(&engine.store, &engine.words);
        match answer_tree(&engine.model, &linker, &tree).map_err(lib_err)? {
            None => {
                *out = to_c(String::new());
                set_error(format!("no candidate graphs for {question:?}"));
                Ok(SynkbqaStatus::NoCandidates)
            }
            Some((_, answers)) => {
                *out = to_c(answers.join("\n"));
                Ok(SynkbqaStatus::Ok)
            }
        }
    })
}

/// Shortest dependency path between 1-based tokens `from` and `to` of a
/// single CoNLL-U sentence, rendered as `a -label-> b -label-> c`.
///
/// # Safety
/// `conllu` is NUL-terminated; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn synkbqa_sdp(
    conllu: *const c_char,
    from: usize,
    to: usize,
    out: *mut *mut c_char,
) -> SynkbqaStatus {
    guard(|| {
        if out.is_null() {
            return Err((SynkbqaStatus::NullArgument, "out is null".into()));
        }
        *out = ptr::null_mut();
        let text = arg(conllu, "conllu")?;
        let mut trees = synkbqa::deptree::parse_conllu(text).into_iter();
        let tree = match (trees.next(), trees.next()) {
            (Some(t), None) => t.map_err(lib_err)?,
            _ => return Err((SynkbqaStatus::Parse, "expected exactly one sentence".into())),
        };
        *out = to_c(synkbqa::cli::render_sdp(&tree, from, to).map_err(lib_err)?);
        Ok(SynkbqaStatus::Ok)
    })
}

/// `max(0, margin - pos + neg)`.
#[no_mangle]
pub extern "C" fn synkbqa_hinge_loss(pos: f64, neg: f64, margin: f64) -> f64 {
    hinge_loss(pos, neg, margin)
}

/// # Safety
/// `s` is null or a string returned by this library, not freed before.
#[no_mangle]
pub unsafe extern "C" fn synkbqa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
