//! C interface to the attbus wire format, attention models, FOA selector
//! and NCC tracker. Every function returns an [`AttbusStatus`]; on failure
//! the message is available from [`attbus_last_error`] on the same thread.
//! Handles are opaque and owned by the caller until passed to `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use attbus::attention::{
    apply_feedback, itti_saliency, select_foa, spectral_saliency, AttentionState, Feedback, IttiConfig, SelectConfig,
};
use attbus::msg::{
    deserialize_frame, serialize_frame, BoundingBox, Frame, Header, ImageMsg, InhibitRegion, Message, SaliencyMap,
};
use attbus::task::TrackerCore;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttbusStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    WireError = 3,
    BufferTooSmall = 4,
    NotInitialized = 5,
    ComputeError = 6,
    Panic = 7,
}

/// Borrowed 8-bit image, row-major, `channels` interleaved (1 or 3).
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AttbusImage {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub pixels: *const u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AttbusBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AttbusPoint {
    pub x: u32,
    pub y: u32,
    pub score: f32,
}

/// `state`: 0 idle, 1 tracking, 2 lost.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AttbusTrack {
    pub state: u8,
    pub bbox: AttbusBox,
    pub confidence: f32,
}

/// Header fields of a decoded frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AttbusFrameInfo {
    pub type_id: u16,
    pub seq: u32,
    pub stamp_ns: u64,
    pub width: u32,
    pub height: u32,
    pub channels: u8,
}

enum Model {
    Itti(IttiConfig),
    Spectral,
}

pub struct AttbusAttention {
    model: Model,
    state: AttentionState,
    last: Option<SaliencyMap>,
}

pub struct AttbusSelector {
    cfg: SelectConfig,
    state: AttentionState,
}

pub struct AttbusTracker {
    margin: f64,
    update_rate: f64,
    core: Option<TrackerCore>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: AttbusStatus, msg: impl Into<String>) -> AttbusStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> AttbusStatus) -> AttbusStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(AttbusStatus::Panic, "internal panic"),
    }
}

impl From<BoundingBox> for AttbusBox {
    fn from(b: BoundingBox) -> Self {
        AttbusBox {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    }
}

impl From<AttbusBox> for BoundingBox {
    fn from(b: AttbusBox) -> Self {
        BoundingBox::new(b.x, b.y, b.w, b.h)
    }
}

/// # Safety
/// `img.pixels` must point to `width * height * channels` readable bytes.
unsafe fn read_image(img: *const AttbusImage) -> Result<ImageMsg, AttbusStatus> {
    let img = img
        .as_ref()
        .ok_or_else(|| fail(AttbusStatus::NullPointer, "image is null"))?;
    if img.pixels.is_null() {
        return Err(fail(AttbusStatus::NullPointer, "image pixels are null"));
    }
    let n = img.width as usize * img.height as usize * img.channels as usize;
    let px = std::slice::from_raw_parts(img.pixels, n).to_vec();
    let msg = ImageMsg::new(Header::default(), img.width, img.height, img.channels, px);
    msg.validate().map_err(|e| fail(AttbusStatus::InvalidArgument, e))?;
    Ok(msg)
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, AttbusStatus> {
    if s.is_null() {
        return Err(fail(AttbusStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(AttbusStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn attbus_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL,
/// 0 when there is no error.
///
/// # Safety
/// `buf` must be writable for `len` bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn attbus_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Serializes an image onto `topic` as a wire frame. `out_len` receives the
/// frame size; with `BufferTooSmall` it tells the caller how much to allocate.
///
/// # Safety
/// Pointers must be valid; `out` writable for `out_cap` bytes (may be null
/// when `out_cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn attbus_encode_image(
    topic: *const c_char,
    seq: u32,
    stamp_ns: u64,
    img: *const AttbusImage,
    out: *mut u8,
    out_cap: usize,
    out_len: *mut usize,
) -> AttbusStatus {
    guard(|| {
        if out_len.is_null() {
            return fail(AttbusStatus::NullPointer, "out_len is null");
        }
        let topic = tri!(c_str(topic, "topic"));
        let mut msg = tri!(read_image(img));
        msg.header = Header::new(seq, stamp_ns);
        let bytes = match serialize_frame(topic, &Message::Image(msg)) {
            Ok(b) => b,
            Err(e) => return fail(AttbusStatus::WireError, e.to_string()),
        };
        *out_len = bytes.len();
        if out_cap < bytes.len() || out.is_null() {
            return fail(AttbusStatus::BufferTooSmall, format!("need {} bytes", bytes.len()));
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
        AttbusStatus::Ok
    })
}

/// Parses a wire frame. Image frames report their geometry and copy
/// pixels into `pixels` when it is non-null and large enough.
///
/// # Safety
/// `bytes` must be readable for `len` bytes; `pixels` writable for
/// `pixels_cap` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn attbus_decode_frame(
    bytes: *const u8,
    len: usize,
    info: *mut AttbusFrameInfo,
    pixels: *mut u8,
    pixels_cap: usize,
) -> AttbusStatus {
    guard(|| {
        if bytes.is_null() || info.is_null() {
            return fail(AttbusStatus::NullPointer, "bytes or info is null");
        }
        let frame = match deserialize_frame(std::slice::from_raw_parts(bytes, len)) {
            Ok(f) => f,
            Err(e) => return fail(AttbusStatus::WireError, e.to_string()),
        };
        let Frame::Data { msg, .. } = frame else {
            return fail(AttbusStatus::InvalidArgument, "control frame");
        };
        let h = msg.header();
        let mut out = AttbusFrameInfo {
            type_id: msg.kind().id(),
            seq: h.seq,
            stamp_ns: h.stamp_ns,
            ..Default::default()
        };
        if let Message::Image(img) = &msg {
            out.width = img.width;
            out.height = img.height;
            out.channels = img.channels;
            if !pixels.is_null() {
                if pixels_cap < img.pixels.len() {
                    *info = out;
                    return fail(AttbusStatus::BufferTooSmall, format!("need {} bytes", img.pixels.len()));
                }
                ptr::copy_nonoverlapping(img.pixels.as_ptr(), pixels, img.pixels.len());
            }
        }
        *info = out;
        AttbusStatus::Ok
    })
}

/// `model` is `"itti"` or `"spectral"`; `channels` (itti only, may be
/// null) selects feature channels, e.g. `"icom"`.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn attbus_attention_new(
    model: *const c_char,
    channels: *const c_char,
    out: *mut *mut AttbusAttention,
) -> AttbusStatus {
    guard(|| {
        if out.is_null() {
            return fail(AttbusStatus::NullPointer, "out is null");
        }
        let model = match tri!(c_str(model, "model")) {
            "itti" => {
                let mut cfg = IttiConfig::default();
                if !channels.is_null() {
                    match IttiConfig::parse_channels(tri!(c_str(channels, "channels"))) {
                        Ok(c) => cfg.channels = c,
                        Err(e) => return fail(AttbusStatus::InvalidArgument, e),
                    }
                }
                Model::Itti(cfg)
            }
            "spectral" => Model::Spectral,
            other => return fail(AttbusStatus::InvalidArgument, format!("unknown model {other:?}")),
        };
        *out = Box::into_raw(Box::new(AttbusAttention {
            model,
            state: AttentionState::new(),
            last: None,
        }));
        AttbusStatus::Ok
    })
}

/// # Safety
/// `h` must come from [`attbus_attention_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn attbus_attention_free(h: *mut AttbusAttention) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Computes the saliency map of `img`; its size is written to `out_w`/`out_h`.
///
/// # Safety
/// Valid handle and image; `out_w`, `out_h` writable.
#[no_mangle]
pub unsafe extern "C" fn attbus_attention_process(
    h: *mut AttbusAttention,
    img: *const AttbusImage,
    out_w: *mut u32,
    out_h: *mut u32,
) -> AttbusStatus {
    guard(|| {
        let Some(a) = h.as_mut() else {
            return fail(AttbusStatus::NullPointer, "handle is null");
        };
        if out_w.is_null() || out_h.is_null() {
            return fail(AttbusStatus::NullPointer, "out_w or out_h is null");
        }
        let img = tri!(read_image(img));
        let r = match &a.model {
            Model::Itti(cfg) => itti_saliency(&img, &mut a.state, cfg),
            Model::Spectral => spectral_saliency(&img, &mut a.state),
        };
        match r {
            Ok(map) => {
                *out_w = map.width;
                *out_h = map.height;
                a.last = Some(map);
                AttbusStatus::Ok
            }
            Err(e) => fail(AttbusStatus::ComputeError, e.to_string()),
        }
    })
}

/// Copies the last saliency map (row-major, values in [0, 1]).
///
/// # Safety
/// Valid handle; `out` writable for `cap` floats.
#[no_mangle]
pub unsafe extern "C" fn attbus_attention_saliency(
    h: *const AttbusAttention,
    out: *mut f32,
    cap: usize,
) -> AttbusStatus {
    guard(|| {
        let Some(a) = h.as_ref() else {
            return fail(AttbusStatus::NullPointer, "handle is null");
        };
        let Some(map) = &a.last else {
            return fail(AttbusStatus::NotInitialized, "no frame processed yet");
        };
        if out.is_null() {
            return fail(AttbusStatus::NullPointer, "out is null");
        }
        if cap < map.values.len() {
            return fail(
                AttbusStatus::BufferTooSmall,
                format!("need {} floats", map.values.len()),
            );
        }
        ptr::copy_nonoverlapping(map.values.as_ptr(), out, map.values.len());
        AttbusStatus::Ok
    })
}

/// Suppresses `bbox` (source pixels) for the next `decay_frames` frames.
///
/// # Safety
/// Valid handle.
#[no_mangle]
pub unsafe extern "C" fn attbus_attention_inhibit(
    h: *mut AttbusAttention,
    bbox: AttbusBox,
    decay_frames: u32,
) -> AttbusStatus {
    guard(|| {
        let Some(a) = h.as_mut() else {
            return fail(AttbusStatus::NullPointer, "handle is null");
        };
        if bbox.w == 0 || bbox.h == 0 {
            return fail(AttbusStatus::InvalidArgument, "empty box");
        }
        let r = InhibitRegion {
            header: Header::default(),
            bbox: bbox.into(),
            decay_frames,
        };
        apply_feedback(&mut a.state, Feedback::Inhibit(&r));
        AttbusStatus::Ok
    })
}

/// `ior_radius` 0 disables inhibition of return.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn attbus_selector_new(
    ior_radius: f64,
    ior_decay: f32,
    out: *mut *mut AttbusSelector,
) -> AttbusStatus {
    guard(|| {
        if out.is_null() {
            return fail(AttbusStatus::NullPointer, "out is null");
        }
        if !(ior_radius.is_finite() && ior_radius >= 0.0) || !(0.0..=1.0).contains(&ior_decay) {
            return fail(
                AttbusStatus::InvalidArgument,
                "ior_radius must be >= 0 and ior_decay in [0, 1]",
            );
        }
        *out = Box::into_raw(Box::new(AttbusSelector {
            cfg: SelectConfig { ior_radius, ior_decay },
            state: AttentionState::new(),
        }));
        AttbusStatus::Ok
    })
}

/// # Safety
/// `h` must come from [`attbus_selector_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn attbus_selector_free(h: *mut AttbusSelector) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Picks the next focus of attention on a `map_w` x `map_h` saliency map
/// computed from a `src_w` x `src_h` image. The point is in source pixels.
///
/// # Safety
/// Valid handle; `values` readable for `map_w * map_h` floats; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn attbus_selector_select(
    h: *mut AttbusSelector,
    values: *const f32,
    map_w: u32,
    map_h: u32,
    src_w: u32,
    src_h: u32,
    out: *mut AttbusPoint,
) -> AttbusStatus {
    guard(|| {
        let Some(s) = h.as_mut() else {
            return fail(AttbusStatus::NullPointer, "handle is null");
        };
        if values.is_null() || out.is_null() {
            return fail(AttbusStatus::NullPointer, "values or out is null");
        }
        if src_w == 0 || src_h == 0 {
            return fail(AttbusStatus::InvalidArgument, "source size must be positive");
        }
        let n = map_w as usize * map_h as usize;
        let map = SaliencyMap::new(
            Header::default(),
            map_w,
            map_h,
            std::slice::from_raw_parts(values, n).to_vec(),
        );
        if let Err(e) = map.validate() {
            return fail(AttbusStatus::InvalidArgument, e);
        }
        let p = select_foa(&map, &mut s.state, &s.cfg, (src_w, src_h));
        *out = AttbusPoint {
            x: p.x,
            y: p.y,
            score: p.score,
        };
        AttbusStatus::Ok
    })
}

/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn attbus_tracker_new(
    margin: f64,
    update_rate: f64,
    out: *mut *mut AttbusTracker,
) -> AttbusStatus {
    guard(|| {
        if out.is_null() {
            return fail(AttbusStatus::NullPointer, "out is null");
        }
        if !(margin.is_finite() && margin >= 0.0 && (0.0..=1.0).contains(&update_rate)) {
            return fail(
                AttbusStatus::InvalidArgument,
                "margin must be >= 0 and update_rate in [0, 1]",
            );
        }
        *out = Box::into_raw(Box::new(AttbusTracker {
            margin,
            update_rate,
            core: None,
        }));
        AttbusStatus::Ok
    })
}

/// # Safety
/// `h` must come from [`attbus_tracker_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn attbus_tracker_free(h: *mut AttbusTracker) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Takes the template at `bbox` from `img`.
///
/// # Safety
/// Valid handle and image.
#[no_mangle]
pub unsafe extern "C" fn attbus_tracker_init(
    h: *mut AttbusTracker,
    img: *const AttbusImage,
    bbox: AttbusBox,
) -> AttbusStatus {
    guard(|| {
        let Some(t) = h.as_mut() else {
            return fail(AttbusStatus::NullPointer, "handle is null");
        };
        let img = tri!(read_image(img));
        match TrackerCore::init(&img, bbox.into(), t.margin, t.update_rate) {
            Ok((core, _)) => {
                t.core = Some(core);
                AttbusStatus::Ok
            }
            Err(e) => fail(AttbusStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Matches the template in `img`. `state` is 1 (tracking) with the raw
/// NCC score as confidence; callers decide when that means lost.
///
/// # Safety
/// Valid handle and image; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn attbus_tracker_step(
    h: *mut AttbusTracker,
    img: *const AttbusImage,
    out: *mut AttbusTrack,
) -> AttbusStatus {
    guard(|| {
        let Some(t) = h.as_mut() else {
            return fail(AttbusStatus::NullPointer, "handle is null");
        };
        if out.is_null() {
            return fail(AttbusStatus::NullPointer, "out is null");
        }
        let img = tri!(read_image(img));
        let Some(core) = t.core.as_mut() else {
            *out = AttbusTrack::default();
            return fail(AttbusStatus::NotInitialized, "tracker has no template");
        };
        let s = core.step(&img);
        *out = AttbusTrack {
            state: s.state as u8,
            bbox: s.bbox.into(),
            confidence: s.confidence,
        };
        AttbusStatus::Ok
    })
}
