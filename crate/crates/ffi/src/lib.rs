//! C ABI over phasescout.
//!
//! Objects cross the boundary as opaque handles created by `*_compute` or
//! `*_load` and released with the matching `*_free`. Every fallible call
//! returns a [`PsStatus`]; on failure a message for the calling thread is
//! available from [`ps_last_error`] until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use phasescout::ae::{checkpoint, AeModel, TensorBuffer};
use phasescout::dmrg::DmrgConfig;
use phasescout::model::ModelParams;
use phasescout::pipeline::export::central_entropy;
use phasescout::pipeline::{extract_input, GroundStateRecord, InputKind, SweepGrid};
use phasescout::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Numerical = 4,
    Io = 5,
    Format = 6,
    Incomplete = 7,
    Refused = 8,
    BufferTooSmall = 9,
    Panic = 99,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsInputKind {
    Es = 0,
    Theta = 1,
    Csf = 2,
}

impl From<PsInputKind> for InputKind {
    fn from(k: PsInputKind) -> Self {
        match k {
            PsInputKind::Es => InputKind::Es,
            PsInputKind::Theta => InputKind::Theta,
            PsInputKind::Csf => InputKind::Csf,
        }
    }
}

/// Chain and solver settings for [`ps_ground_state_compute`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsChainParams {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub n_max: u32,
    pub length: u32,
    /// Negative selects unit filling.
    pub particles: i32,
    pub chi_max: u32,
    pub seed: u64,
}

/// Scalar diagnostics of a ground state.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PsObservables {
    pub energy: f64,
    pub o_sf: f64,
    pub o_dw: f64,
    pub o_hi: f64,
    pub structure_factor: f64,
    pub k_star: f64,
    pub central_entropy: f64,
    pub xi: f64,
    pub converged: i32,
}

/// A converged (or flagged) ground-state record.
pub struct PsGroundState(GroundStateRecord);

/// A trained autoencoder.
pub struct PsAutoencoder(AeModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PsStatus {
    match e {
        Error::Domain(_) | Error::Config(_) => PsStatus::InvalidArgument,
        Error::Shape(_) => PsStatus::Shape,
        Error::Charge(_)
        | Error::DegenerateTensor
        | Error::DegenerateState
        | Error::Invariant(_)
        | Error::StaleCache(_) => PsStatus::Numerical,
        Error::Refused(_) => PsStatus::Refused,
        Error::RecordIncomplete(_) => PsStatus::Incomplete,
        Error::Format(_) => PsStatus::Format,
        Error::Io(_) => PsStatus::Io,
    }
}

struct Fail(PsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(PsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, turning errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PsStatus::Ok,
        Ok(Err(Fail(s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let m = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {m}"));
            PsStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Fail(PsStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(h: *const T) -> Result<&'a T, Fail> {
    h.as_ref().ok_or_else(|| null("handle"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ps_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Defaults: t = 1, U = V = 0, n_max = 3, L = 32, unit filling, chi = 50.
#[no_mangle]
pub extern "C" fn ps_chain_params_default() -> PsChainParams {
    let m = ModelParams::default();
    let d = DmrgConfig::default();
    PsChainParams {
        t: m.t,
        u: m.u,
        v: m.v,
        n_max: m.n_max as u32,
        length: m.length as u32,
        particles: -1,
        chi_max: d.chi_max as u32,
        seed: d.seed,
    }
}

/// Runs DMRG for one parameter point.
///
/// # Safety
/// `params` must point to a valid struct and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn ps_ground_state_compute(params: *const PsChainParams, out: *mut *mut PsGroundState) -> PsStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let model = ModelParams::new(p.t, p.u, p.v, p.n_max as usize, p.length as usize)?;
        // a one-cell grid whose first point is (U, V)
        let grid = SweepGrid {
            u_range: (p.u, p.u + 1.0),
            v_range: (p.v, p.v + 1.0),
            n_u: 2,
            n_v: 2,
            model,
            dmrg: DmrgConfig { chi_max: p.chi_max as usize, seed: p.seed, ..DmrgConfig::default() },
            particles: (p.particles >= 0).then_some(p.particles),
        };
        grid.validate()?;
        let rec = GroundStateRecord::compute(&grid, (0, 0))?;
        put(out, Box::into_raw(Box::new(PsGroundState(rec))))
    })
}

/// Reads a `.gsr` record file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_ground_state_load(path: *const c_char, out: *mut *mut PsGroundState) -> PsStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let bytes = std::fs::read(&path).map_err(Error::from)?;
        let rec = GroundStateRecord::from_bytes(&bytes)?;
        put(out, Box::into_raw(Box::new(PsGroundState(rec))))
    })
}

/// Writes the record in the cache format.
///
/// # Safety
/// `gs` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ps_ground_state_save(gs: *const PsGroundState, path: *const c_char) -> PsStatus {
    guard(|| {
        let rec = &handle(gs)?.0;
        let path = path_arg(path)?;
        std::fs::write(path, rec.to_bytes()?).map_err(Error::from)?;
        Ok(())
    })
}

/// # Safety
/// `gs` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_ground_state_observables(gs: *const PsGroundState, out: *mut PsObservables) -> PsStatus {
    guard(|| {
        let r = &handle(gs)?.0;
        let o = &r.observables;
        put(
            out,
            PsObservables {
                energy: r.energy,
                o_sf: o.o_sf,
                o_dw: o.o_dw,
                o_hi: o.o_hi,
                structure_factor: o.structure_factor,
                k_star: o.k_star,
                central_entropy: central_entropy(r),
                xi: r.xi,
                converged: r.converged() as i32,
            },
        )
    })
}

/// Schmidt values of `bond` (1..L-1). `*len` receives the full count; at
/// most `cap` values are copied to `values`, which may be NULL to query the
/// size. Returns `BUFFER_TOO_SMALL` if `cap` is short.
///
/// # Safety
/// `values` must hold `cap` doubles (or be NULL) and `len` be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_ground_state_spectrum(
    gs: *const PsGroundState,
    bond: u32,
    values: *mut f64,
    cap: usize,
    len: *mut usize,
) -> PsStatus {
    guard(|| {
        let r = &handle(gs)?.0;
        let b = bond as usize;
        if b == 0 || b >= r.length {
            return Err(Fail(PsStatus::InvalidArgument, format!("bond {b} outside 1..{}", r.length)));
        }
        let s = &r.spectra[b - 1];
        put(len, s.len())?;
        if values.is_null() {
            return Ok(());
        }
        let n = s.len().min(cap);
        std::ptr::copy_nonoverlapping(s.as_ptr(), values, n);
        if n < s.len() {
            return Err(Fail(PsStatus::BufferTooSmall, format!("{} values, buffer holds {cap}", s.len())));
        }
        Ok(())
    })
}

/// # Safety
/// `gs` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_ground_state_free(gs: *mut PsGroundState) {
    if !gs.is_null() {
        drop(Box::from_raw(gs));
    }
}

/// Reads an autoencoder checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_autoencoder_load(path: *const c_char, out: *mut *mut PsAutoencoder) -> PsStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let m = checkpoint::load(&path)?;
        put(out, Box::into_raw(Box::new(PsAutoencoder(m))))
    })
}

/// Input shape `(C, W)` or `(C, H, W)`. `*rank` receives the rank; `dims`
/// must hold at least 3 entries.
///
/// # Safety
/// `dims` must hold 3 entries and `rank` be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_autoencoder_input_shape(ae: *const PsAutoencoder, dims: *mut usize, rank: *mut usize) -> PsStatus {
    guard(|| {
        let shape = handle(ae)?.0.input_shape();
        if dims.is_null() {
            return Err(null("dims"));
        }
        std::ptr::copy_nonoverlapping(shape.as_ptr(), dims, shape.len());
        put(rank, shape.len())
    })
}

/// Reconstruction loss of a row-major input of the model's input shape.
///
/// # Safety
/// `data` must hold `len` doubles and `loss` be writable.
#[no_mangle]
pub unsafe extern "C" fn ps_autoencoder_loss(ae: *const PsAutoencoder, data: *const f64, len: usize, loss: *mut f64) -> PsStatus {
    guard(|| {
        let m = &handle(ae)?.0;
        if data.is_null() {
            return Err(null("data"));
        }
        let x = TensorBuffer::new(m.input_shape().to_vec(), std::slice::from_raw_parts(data, len).to_vec())?;
        put(loss, m.loss(&x)?)
    })
}

/// Reconstruction loss of a record's exported input of `kind`.
///
/// # Safety
/// Both handles must be live and `loss` writable.
#[no_mangle]
pub unsafe extern "C" fn ps_autoencoder_record_loss(
    ae: *const PsAutoencoder,
    gs: *const PsGroundState,
    kind: PsInputKind,
    loss: *mut f64,
) -> PsStatus {
    guard(|| {
        let m = &handle(ae)?.0;
        let x = extract_input(&handle(gs)?.0, kind.into())?;
        if x.shape() != m.input_shape() {
            return Err(Fail(
                PsStatus::Shape,
                format!("record exports {:?}, model expects {:?}", x.shape(), m.input_shape()),
            ));
        }
        put(loss, m.loss(&x)?)
    })
}

/// # Safety
/// `ae` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_autoencoder_free(ae: *mut PsAutoencoder) {
    if !ae.is_null() {
        drop(Box::from_raw(ae));
    }
}
