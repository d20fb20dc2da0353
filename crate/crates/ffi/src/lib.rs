//! C ABI for the archetype section classifier.
//!
//! Handles are opaque pointers created by `arch_*_new`/`arch_*_load` and
//! released with the matching `arch_*_free`. Every fallible call returns an
//! [`ArchStatus`]; on failure a description is available from
//! [`arch_last_error_message`] on the same thread. Strings returned through
//! `out` parameters are owned by the caller and must be released with
//! [`arch_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use archetype::corpus::Section;
use archetype::embedding::{
    build_input_text, content_key, hash_provider, lexical_provider, EmbeddingProvider,
    EmbeddingVector,
};
use archetype::retrofit::{Label, RetrofitModel};
use archetype::vocabulary::normalize_heading;
use archetype::{Error, SectionType};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArchStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    DimMismatch = 6,
    Provider = 7,
    BufferTooSmall = 8,
    EmptyInput = 9,
    Panic = 10,
    Other = 11,
}

/// Result of classifying one vector.
///
/// `section_type` is the index of the assigned type in canonical order, or
/// -1 when the vector was rejected. `nearest` is always the index of the
/// closest centroid and `distance` the distance to it.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArchLabel {
    pub section_type: i32,
    pub nearest: i32,
    pub distance: f64,
}

/// A fitted nearest-centroid model.
pub struct ArchModel {
    inner: RetrofitModel,
}

/// A built-in embedding provider.
pub struct ArchEmbedder {
    inner: Box<dyn EmbeddingProvider>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

fn status_of(e: &Error) -> ArchStatus {
    match e {
        Error::Io { .. } => ArchStatus::Io,
        Error::Json(_) | Error::Csv(_) | Error::MalformedRecord { .. } | Error::CorruptCache { .. } => {
            ArchStatus::Parse
        }
        Error::DimMismatch { .. } => ArchStatus::DimMismatch,
        Error::Provider { .. } | Error::ProviderMismatch { .. } => ArchStatus::Provider,
        Error::InvalidParameter(_) | Error::NonFinite(_) => ArchStatus::InvalidArgument,
        Error::EmptyInput | Error::EmptyInstances => ArchStatus::EmptyInput,
        _ => ArchStatus::Other,
    }
}

struct Failure(ArchStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ArchStatus {
    clear_last_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ArchStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            ArchStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ArchStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(ArchStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s)
        .map_err(|_| Failure(ArchStatus::InvalidArgument, "result contains a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// Message describing the most recent failure on this thread, or null.
///
/// The pointer stays valid until the next `arch_*` call on the same thread.
#[no_mangle]
pub extern "C" fn arch_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn arch_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Number of section types.
#[no_mangle]
pub extern "C" fn arch_section_type_count() -> usize {
    SectionType::COUNT
}

/// Static lowercase name of the type at `index`, or null when out of range.
#[no_mangle]
pub extern "C" fn arch_section_type_name(index: usize) -> *const c_char {
    const NAMES: [&CStr; SectionType::COUNT] = [
        c"introduction",
        c"background",
        c"methods",
        c"results",
        c"analysis",
        c"discussion",
        c"conclusion",
    ];
    NAMES.get(index).map_or(ptr::null(), |n| n.as_ptr())
}

/// Loads a model saved by `archetype fit`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arch_model_load(path: *const c_char, out: *mut *mut ArchModel) -> ArchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = read_str(path, "path")?;
        let inner = RetrofitModel::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(ArchModel { inner }));
        Ok(())
    })
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arch_model_from_json(
    json: *const c_char,
    out: *mut *mut ArchModel,
) -> ArchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let json = read_str(json, "json")?;
        let inner: RetrofitModel = serde_json::from_str(json)
            .map_err(|e| Failure(ArchStatus::Parse, format!("invalid model: {e}")))?;
        *out = Box::into_raw(Box::new(ArchModel { inner }));
        Ok(())
    })
}

/// Embedding dimension the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn arch_model_dim(model: *const ArchModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Rejection weight of the model, or NaN for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn arch_model_weight(model: *const ArchModel) -> f64 {
    model.as_ref().map_or(f64::NAN, |m| m.inner.weight())
}

/// Classifies `len` components starting at `vector`.
///
/// # Safety
/// `model` must be a live handle, `vector` must point to `len` doubles and
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arch_model_classify(
    model: *const ArchModel,
    vector: *const f64,
    len: usize,
    out: *mut ArchLabel,
) -> ArchStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if vector.is_null() {
            return Err(null("vector"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let v = EmbeddingVector::new(std::slice::from_raw_parts(vector, len).to_vec())?;
        let label = model.inner.classify(&v)?;
        *out = ArchLabel {
            section_type: match label {
                Label::Classified { section_type, .. } => section_type.index() as i32,
                Label::Unclassified { .. } => -1,
            },
            nearest: label.nearest().index() as i32,
            distance: label.distance(),
        };
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn arch_model_free(model: *mut ArchModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Creates the seeded pseudorandom test provider.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arch_embedder_new_hash(
    dim: usize,
    seed: u64,
    out: *mut *mut ArchEmbedder,
) -> ArchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Box::new(hash_provider(dim, seed)?);
        *out = Box::into_raw(Box::new(ArchEmbedder { inner }));
        Ok(())
    })
}

/// Creates the feature-hashed bag-of-words provider.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arch_embedder_new_lexical(dim: usize, out: *mut *mut ArchEmbedder) -> ArchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = Box::new(lexical_provider(dim)?);
        *out = Box::into_raw(Box::new(ArchEmbedder { inner }));
        Ok(())
    })
}

/// Output dimension of the provider, or 0 for a null handle.
///
/// # Safety
/// `embedder` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn arch_embedder_dim(embedder: *const ArchEmbedder) -> usize {
    embedder.as_ref().map_or(0, |e| e.inner.descriptor().dim)
}

/// Embeds `text` into `out`, which must hold at least `capacity` doubles.
///
/// Returns `BufferTooSmall` without writing when `capacity` is below the
/// provider dimension.
///
/// # Safety
/// `embedder` must be a live handle, `text` a NUL-terminated string and
/// `out` must point to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn arch_embedder_embed(
    embedder: *const ArchEmbedder,
    text: *const c_char,
    out: *mut f64,
    capacity: usize,
) -> ArchStatus {
    guard(|| {
        let embedder = embedder.as_ref().ok_or_else(|| null("embedder"))?;
        let text = read_str(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let dim = embedder.inner.descriptor().dim;
        if capacity < dim {
            return Err(Failure(
                ArchStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, need {dim}"),
            ));
        }
        let v = embedder.inner.embed_text(text)?;
        std::slice::from_raw_parts_mut(out, dim).copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// Releases an embedder. Null is ignored.
///
/// # Safety
/// `embedder` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn arch_embedder_free(embedder: *mut ArchEmbedder) {
    if !embedder.is_null() {
        drop(Box::from_raw(embedder));
    }
}

/// Normalizes a raw heading for vocabulary lookup.
///
/// # Safety
/// `raw` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arch_normalize_heading(raw: *const c_char, out: *mut *mut c_char) -> ArchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let raw = read_str(raw, "raw")?;
        write_string(out, normalize_heading(raw))
    })
}

/// Builds the truncated embedding input for a section.
///
/// # Safety
/// `heading` and `body` must be NUL-terminated strings and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn arch_build_input_text(
    heading: *const c_char,
    body: *const c_char,
    max_tokens: usize,
    out: *mut *mut c_char,
) -> ArchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let section = Section {
            index: 0,
            heading: read_str(heading, "heading")?.to_owned(),
            body: read_str(body, "body")?.to_owned(),
        };
        write_string(out, build_input_text(&section, max_tokens)?)
    })
}

/// Cache key (lowercase SHA-256 hex) of an embedding input.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arch_content_key(text: *const c_char, out: *mut *mut c_char) -> ArchStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        write_string(out, content_key(read_str(text, "text")?))
    })
}
