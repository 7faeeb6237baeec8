use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use attbus::input::{SceneConfig, SyntheticScene};
use attbus::msg::{bbox_iou, BoundingBox, ImageMsg};
use attbus_ffi::*;

fn view(img: &ImageMsg) -> AttbusImage {
    AttbusImage {
        width: img.width,
        height: img.height,
        channels: img.channels,
        pixels: img.pixels.as_ptr(),
    }
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { attbus_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn scene(vel: (i32, i32)) -> SyntheticScene {
    SyntheticScene::new(SceneConfig {
        width: 128,
        height: 128,
        pos: (30, 50),
        vel,
        ..SceneConfig::default()
    })
    .unwrap()
}

#[test]
fn encode_then_decode_image() {
    let (img, _) = scene((0, 0)).step().unwrap();
    let topic = CString::new("/image").unwrap();
    let mut need = 0usize;
    let s = unsafe { attbus_encode_image(topic.as_ptr(), 7, 1234, &view(&img), ptr::null_mut(), 0, &mut need) };
    assert_eq!(s, AttbusStatus::BufferTooSmall);
    let mut frame = vec![0u8; need];
    let s = unsafe {
        attbus_encode_image(
            topic.as_ptr(),
            7,
            1234,
            &view(&img),
            frame.as_mut_ptr(),
            frame.len(),
            &mut need,
        )
    };
    assert_eq!(s, AttbusStatus::Ok);

    let mut info = AttbusFrameInfo::default();
    let mut px = vec![0u8; img.pixels.len()];
    let s = unsafe { attbus_decode_frame(frame.as_ptr(), frame.len(), &mut info, px.as_mut_ptr(), px.len()) };
    assert_eq!(s, AttbusStatus::Ok);
    assert_eq!((info.type_id, info.seq, info.stamp_ns), (1, 7, 1234));
    assert_eq!((info.width, info.height, info.channels), (128, 128, 1));
    assert_eq!(px, img.pixels);
}

#[test]
fn truncated_frame_is_a_wire_error() {
    let mut info = AttbusFrameInfo::default();
    let junk = [9u8, 0, 0, 0, 1];
    let s = unsafe { attbus_decode_frame(junk.as_ptr(), junk.len(), &mut info, ptr::null_mut(), 0) };
    assert_eq!(s, AttbusStatus::WireError);
    assert!(!last_error().is_empty());
}

#[test]
fn attention_and_selector_find_the_square() {
    let (img, gt) = scene((0, 0)).step().unwrap();
    let gt = gt.unwrap().bbox;
    for model in ["itti", "spectral"] {
        let m = CString::new(model).unwrap();
        let mut att = ptr::null_mut();
        assert_eq!(
            unsafe { attbus_attention_new(m.as_ptr(), ptr::null(), &mut att) },
            AttbusStatus::Ok
        );
        let (mut w, mut h) = (0, 0);
        assert_eq!(
            unsafe { attbus_attention_process(att, &view(&img), &mut w, &mut h) },
            AttbusStatus::Ok
        );
        let mut map = vec![0f32; (w * h) as usize];
        assert_eq!(
            unsafe { attbus_attention_saliency(att, map.as_mut_ptr(), map.len()) },
            AttbusStatus::Ok
        );

        let mut sel = ptr::null_mut();
        assert_eq!(unsafe { attbus_selector_new(0.0, 0.9, &mut sel) }, AttbusStatus::Ok);
        let mut p = AttbusPoint::default();
        let s = unsafe { attbus_selector_select(sel, map.as_ptr(), w, h, img.width, img.height, &mut p) };
        assert_eq!(s, AttbusStatus::Ok);
        assert!(gt.contains(p.x, p.y), "{model}: {p:?} outside {gt:?}");
        unsafe {
            attbus_selector_free(sel);
            attbus_attention_free(att);
        }
    }
}

#[test]
fn inhibition_moves_spectral_peak_away() {
    let mut sc = SyntheticScene::new(SceneConfig {
        width: 128,
        height: 128,
        pos: (20, 20),
        distractors: vec![attbus::input::Distractor {
            x: 90,
            y: 90,
            side: 20,
            level: 255,
        }],
        ..SceneConfig::default()
    })
    .unwrap();
    let (img, _) = sc.step().unwrap();
    let m = CString::new("spectral").unwrap();
    let mut att = ptr::null_mut();
    unsafe { attbus_attention_new(m.as_ptr(), ptr::null(), &mut att) };
    let b = AttbusBox {
        x: 20,
        y: 20,
        w: 20,
        h: 20,
    };
    assert_eq!(unsafe { attbus_attention_inhibit(att, b, 10) }, AttbusStatus::Ok);
    let (mut w, mut h) = (0, 0);
    unsafe { attbus_attention_process(att, &view(&img), &mut w, &mut h) };
    let mut map = vec![0f32; (w * h) as usize];
    unsafe { attbus_attention_saliency(att, map.as_mut_ptr(), map.len()) };
    let (i, _) = map
        .iter()
        .enumerate()
        .fold((0, f32::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    let (x, y) = ((i as u32 % w) * 128 / w, (i as u32 / w) * 128 / h);
    assert!(x >= 80 && y >= 80, "peak at {x},{y}");
    unsafe { attbus_attention_free(att) };
}

#[test]
fn tracker_follows_moving_square() {
    let mut sc = scene((3, 1));
    let (first, gt) = sc.step().unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { attbus_tracker_new(0.5, 0.0, &mut t) }, AttbusStatus::Ok);
    let mut out = AttbusTrack::default();
    assert_eq!(
        unsafe { attbus_tracker_step(t, &view(&first), &mut out) },
        AttbusStatus::NotInitialized
    );
    // a flat square alone has no variance to correlate; keep some background
    let pad = |b: BoundingBox| BoundingBox::new(b.x - 4, b.y - 4, b.w + 8, b.h + 8);
    let b: AttbusBox = pad(gt.unwrap().bbox).into();
    assert_eq!(unsafe { attbus_tracker_init(t, &view(&first), b) }, AttbusStatus::Ok);
    for _ in 0..20 {
        let (img, gt) = sc.step().unwrap();
        assert_eq!(
            unsafe { attbus_tracker_step(t, &view(&img), &mut out) },
            AttbusStatus::Ok
        );
        assert_eq!(out.state, 1);
        let got = BoundingBox::new(out.bbox.x, out.bbox.y, out.bbox.w, out.bbox.h);
        assert!(bbox_iou(&got, &pad(gt.unwrap().bbox)) > 0.9);
    }
    unsafe { attbus_tracker_free(t) };
}

#[test]
fn bad_arguments() {
    let mut h = ptr::null_mut();
    let m = CString::new("nope").unwrap();
    assert_eq!(
        unsafe { attbus_attention_new(m.as_ptr(), ptr::null(), &mut h) },
        AttbusStatus::InvalidArgument
    );
    assert!(last_error().contains("nope"));
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { attbus_selector_new(-1.0, 0.9, &mut s) },
        AttbusStatus::InvalidArgument
    );
    let img = ImageMsg::filled(8, 8, 1, 0);
    let mut t = ptr::null_mut();
    unsafe { attbus_tracker_new(0.5, 0.0, &mut t) };
    let outside = AttbusBox { x: 6, y: 6, w: 4, h: 4 };
    assert_eq!(
        unsafe { attbus_tracker_init(t, &view(&img), outside) },
        AttbusStatus::InvalidArgument
    );
    unsafe {
        attbus_tracker_free(t);
        attbus_attention_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/attbus.h")).unwrap();
    for f in [
        "attbus_version",
        "attbus_last_error",
        "attbus_encode_image",
        "attbus_decode_frame",
        "attbus_attention_new",
        "attbus_attention_process",
        "attbus_attention_saliency",
        "attbus_attention_inhibit",
        "attbus_attention_free",
        "attbus_selector_new",
        "attbus_selector_select",
        "attbus_selector_free",
        "attbus_tracker_new",
        "attbus_tracker_init",
        "attbus_tracker_step",
        "attbus_tracker_free",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("typedef struct AttbusTracker AttbusTracker;"));
    assert!(header.contains("ATTBUS_STATUS_BUFFER_TOO_SMALL = 4"));
}

#[test]
fn header_compiles_as_c() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let src = tempfile::NamedTempFile::with_suffix(".c").unwrap();
    std::fs::write(
        src.path(),
        "#include \"attbus.h\"\nint main(void) { AttbusBox b = {0}; return (int)b.w; }\n",
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-fsyntax-only")
        .arg("-I")
        .arg(&dir)
        .arg(src.path())
        .output();
    match out {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(e) => eprintln!("no C compiler, header not compiled: {e}"),
    }
}
