//! JSON forms of bus messages as sent to browser clients.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{json, Value};

use super::png::{image_to_png, saliency_to_png};
use crate::msg::{BoundingBox, Message, TrackStatus};

fn bbox(b: &BoundingBox) -> Value {
    json!({ "x": b.x, "y": b.y, "w": b.w, "h": b.h })
}

fn png_field(r: Result<Vec<u8>, String>) -> Value {
    match r {
        Ok(bytes) => Value::String(STANDARD.encode(bytes)),
        Err(_) => Value::Null,
    }
}

pub fn status_name(s: TrackStatus) -> &'static str {
    match s {
        TrackStatus::Idle => "idle",
        TrackStatus::Tracking => "tracking",
        TrackStatus::Lost => "lost",
    }
}

/// Type-specific payload. Pixel data travels as base64 PNG.
pub fn message_data(msg: &Message) -> Value {
    match msg {
        Message::Image(m) => json!({
            "width": m.width, "height": m.height, "channels": m.channels,
            "png": png_field(image_to_png(m)),
        }),
        Message::Saliency(m) => json!({
            "width": m.width, "height": m.height,
            "png": png_field(saliency_to_png(m)),
        }),
        Message::PointFoa(m) => json!({ "x": m.x, "y": m.y, "score": m.score }),
        Message::RegionFoa(m) => json!({
            "bbox": bbox(&m.bbox), "score": m.score,
            "mask": STANDARD.encode(&m.mask),
        }),
        Message::ObjectFoa(m) => json!({ "bbox": bbox(&m.bbox), "score": m.score }),
        Message::TrackState(m) => json!({
            "state": status_name(m.state), "bbox": bbox(&m.bbox), "confidence": m.confidence,
        }),
        Message::ParamUpdate(m) => json!({ "node": m.node, "param": m.param, "value": m.value.to_json() }),
        Message::TopDownGain(m) => json!({ "gains": m.gains }),
        Message::InhibitRegion(m) => json!({ "bbox": bbox(&m.bbox), "decay_frames": m.decay_frames }),
    }
}

/// The `message` op pushed to subscribed clients.
pub fn message_op(topic: &str, msg: &Message) -> Value {
    let h = msg.header();
    json!({
        "op": "message",
        "topic": topic,
        "type": msg.kind().name(),
        "seq": h.seq,
        "stamp_ns": h.stamp_ns,
        "frame_id": h.frame_id,
        "data": message_data(msg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::png::decode_png;
    use crate::msg::{Header, ImageMsg, ObjectFoa, TrackState};

    #[test]
    fn image_round_trips_through_base64_png() {
        let img = ImageMsg::new(Header::new(3, 99), 4, 2, 1, (0..8).map(|i| i * 30).collect());
        let v = message_op("/image", &Message::Image(img.clone()));
        assert_eq!(v["type"], "ImageMsg");
        assert_eq!(v["stamp_ns"], 99);
        let bytes = STANDARD.decode(v["data"]["png"].as_str().unwrap()).unwrap();
        assert_eq!(decode_png(&bytes).unwrap().pixels, img.pixels);
    }

    #[test]
    fn boxes_and_states_are_plain_fields() {
        let foa = ObjectFoa {
            header: Header::default(),
            bbox: BoundingBox::new(1, 2, 3, 4),
            score: 0.5,
        };
        let v = message_data(&Message::ObjectFoa(foa));
        assert_eq!(v["bbox"], json!({"x": 1, "y": 2, "w": 3, "h": 4}));
        let t = TrackState::idle(Header::default());
        assert_eq!(message_data(&Message::TrackState(t))["state"], "idle");
    }
}
