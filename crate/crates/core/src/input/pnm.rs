//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::io::Write;

use crate::msg::{Header, ImageMsg};

pub fn decode_pnm(bytes: &[u8]) -> Result<ImageMsg, String> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1u8,
        Some(b"P6") => 3u8,
        _ => return Err("not a binary PGM/PPM (P5/P6) file".into()),
    };
    let mut pos = 2;
    let mut fields = [0u64; 3];
    for f in &mut fields {
        // whitespace and '#' comments may separate header fields
        loop {
            match bytes.get(pos) {
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&c| c != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err("malformed PNM header".into());
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .unwrap()
            .parse()
            .map_err(|_| "PNM header value out of range")?;
    }
    let [w, h, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval} (only 255)"));
    }
    if w == 0 || h == 0 || w > u32::MAX as u64 || h > u32::MAX as u64 {
        return Err(format!("bad dimensions {w}x{h}"));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("missing separator after maxval".into());
    }
    pos += 1;
    let n = w * h * channels as u64;
    let data = bytes
        .get(pos..)
        .filter(|d| d.len() as u64 >= n)
        .ok_or_else(|| format!("pixel data truncated: need {n} bytes"))?;
    Ok(ImageMsg::new(
        Header::default(),
        w as u32,
        h as u32,
        channels,
        data[..n as usize].to_vec(),
    ))
}

pub fn encode_pnm(img: &ImageMsg) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = Vec::with_capacity(img.pixels.len() + 32);
    write!(out, "{magic}\n{} {}\n255\n", img.width, img.height).unwrap();
    out.extend_from_slice(&img.pixels);
    out
}
