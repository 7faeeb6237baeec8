#![allow(dead_code)]

use rand::distributions::Alphanumeric;
use rand::Rng;

use attbus::msg::*;

fn text(rng: &mut impl Rng, max: usize) -> String {
    let n = rng.gen_range(0..=max);
    (&mut *rng).sample_iter(&Alphanumeric).take(n).map(char::from).collect()
}

fn header(rng: &mut impl Rng) -> Header {
    Header {
        seq: rng.gen(),
        stamp_ns: rng.gen(),
        frame_id: text(rng, 12),
    }
}

fn bbox(rng: &mut impl Rng) -> BoundingBox {
    BoundingBox::new(
        rng.gen_range(0..1000),
        rng.gen_range(0..1000),
        rng.gen_range(1..300),
        rng.gen_range(1..300),
    )
}

fn unit(rng: &mut impl Rng) -> f32 {
    if rng.gen_bool(0.1) {
        [0.0, 1.0][rng.gen_range(0..2)]
    } else {
        rng.gen()
    }
}

fn region_mask(rng: &mut impl Rng, b: &BoundingBox) -> Vec<u8> {
    let row = RegionFoa::row_bytes(b.w);
    let pad = row * 8 - b.w as usize;
    let mut mask: Vec<u8> = (0..RegionFoa::mask_len(b)).map(|_| rng.gen()).collect();
    for r in mask.chunks_mut(row) {
        r[row - 1] &= !((1u16 << pad) - 1) as u8;
    }
    // at least one bit set
    mask[0] |= 0x80;
    mask
}

pub fn random_of_kind(rng: &mut impl Rng, kind: MessageKind) -> Message {
    let header = header(rng);
    match kind {
        MessageKind::Image => {
            let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
            let c = [1u8, 3][rng.gen_range(0..2)];
            let px = (0..w * h * c as u32).map(|_| rng.gen()).collect();
            Message::Image(ImageMsg::new(header, w, h, c, px))
        }
        MessageKind::Saliency => {
            let (w, h) = (rng.gen_range(1..30), rng.gen_range(1..30));
            let v = (0..w * h).map(|_| unit(rng)).collect();
            Message::Saliency(SaliencyMap::new(header, w, h, v))
        }
        MessageKind::PointFoa => Message::PointFoa(PointFoa {
            header,
            x: rng.gen(),
            y: rng.gen(),
            score: unit(rng),
        }),
        MessageKind::RegionFoa => {
            let b = BoundingBox::new(
                rng.gen_range(0..500),
                rng.gen_range(0..500),
                rng.gen_range(1..40),
                rng.gen_range(1..40),
            );
            Message::RegionFoa(RegionFoa {
                header,
                mask: region_mask(rng, &b),
                bbox: b,
                score: rng.gen_range(-5.0..5.0),
            })
        }
        MessageKind::ObjectFoa => Message::ObjectFoa(ObjectFoa {
            header,
            bbox: bbox(rng),
            score: rng.gen_range(-5.0..5.0),
        }),
        MessageKind::TrackState => {
            let state = TrackStatus::from_u8(rng.gen_range(0..3)).unwrap();
            Message::TrackState(match state {
                TrackStatus::Idle => TrackState::idle(header),
                s => TrackState {
                    header,
                    state: s,
                    bbox: bbox(rng),
                    confidence: unit(rng),
                },
            })
        }
        MessageKind::ParamUpdate => {
            let value = match rng.gen_range(0..4) {
                0 => ParamValue::F64(rng.gen_range(-1e9..1e9)),
                1 => ParamValue::I64(rng.gen()),
                2 => ParamValue::Bool(rng.gen()),
                _ => ParamValue::Str(text(rng, 20)),
            };
            Message::ParamUpdate(ParamUpdate {
                header,
                node: format!("n{}", text(rng, 8)),
                param: format!("p{}", text(rng, 8)),
                value,
            })
        }
        MessageKind::TopDownGain => Message::TopDownGain(TopDownGain {
            header,
            gains: [0; 4].map(|_| rng.gen_range(0.0..10.0)),
        }),
        MessageKind::InhibitRegion => Message::InhibitRegion(InhibitRegion {
            header,
            bbox: bbox(rng),
            decay_frames: rng.gen_range(1..1000),
        }),
    }
}

pub fn random_message(rng: &mut impl Rng) -> Message {
    let kind = MessageKind::ALL[rng.gen_range(0..MessageKind::ALL.len())];
    random_of_kind(rng, kind)
}

pub fn random_topic(rng: &mut impl Rng) -> String {
    format!("/{}", text(rng, 10).to_lowercase() + "t")
}

/// Every emitted set for a run of the synchronizer over `arrivals`
/// (topic index, stamp), draining after each push.
pub fn sync_run(topics: usize, slop: u64, arrivals: &[(usize, u64)]) -> Vec<Vec<u64>> {
    use attbus::bus::{SyncPolicy, Synchronizer};
    let names = (0..topics).map(|i| format!("/t{i}")).collect();
    let mut s: Synchronizer<u64> = Synchronizer::new(SyncPolicy::new(names, slop));
    let mut out = Vec::new();
    for &(i, t) in arrivals {
        s.push(i, t);
        out.extend(s.drain_ready());
    }
    out
}

/// Brute-force reference: enumerates every combination of one queued
/// stamp per topic and keeps the one nearest the pivot, topic by topic,
/// earlier stamp on ties.
pub fn sync_oracle(topics: usize, slop: u64, arrivals: &[(usize, u64)]) -> Vec<Vec<u64>> {
    let mut queues: Vec<Vec<u64>> = vec![Vec::new(); topics];
    let mut out = Vec::new();
    for &(i, t) in arrivals {
        queues[i].push(t);
        queues[i].sort();
        loop {
            if queues.iter().any(|q| q.is_empty()) {
                break;
            }
            let pivot = queues.iter().map(|q| q[0]).max().unwrap();
            let mut best: Option<(Vec<u64>, Vec<usize>)> = None;
            let mut idx = vec![0usize; topics];
            'combos: loop {
                let key: Vec<u64> = (0..topics)
                    .flat_map(|k| [queues[k][idx[k]].abs_diff(pivot), idx[k] as u64])
                    .collect();
                if best.as_ref().is_none_or(|(b, _)| key < *b) {
                    best = Some((key, idx.clone()));
                }
                for k in 0..topics {
                    idx[k] += 1;
                    if idx[k] < queues[k].len() {
                        continue 'combos;
                    }
                    idx[k] = 0;
                }
                break;
            }
            let (_, pick) = best.unwrap();
            let chosen: Vec<u64> = (0..topics).map(|k| queues[k][pick[k]]).collect();
            let spread = chosen.iter().max().unwrap() - chosen.iter().min().unwrap();
            if spread <= slop {
                for k in 0..topics {
                    queues[k].drain(..=pick[k]);
                }
                out.push(chosen);
            } else {
                let k = (0..topics).min_by_key(|&k| (queues[k][0], k)).unwrap();
                queues[k].remove(0);
            }
        }
    }
    out
}

/// Runs `cfg` in lockstep and records every topic, stamping records with
/// the frame's stream time.
pub fn record_lockstep(cfg: &attbus::config::PipelineConfig) -> Vec<u8> {
    use attbus::bus::{BagWriter, Broker, Recorder};
    use attbus::runtime::{Pipeline, RunOptions, RuntimeError};
    let broker = Broker::new();
    let opts = RunOptions::default();
    let pipeline = Pipeline::build(cfg, &broker, opts.queue_capacity).unwrap();
    let mut rec = Recorder::new(&broker, &[], BagWriter::new(Vec::new()).unwrap()).unwrap();
    let mut last = 0;
    let mut hook = |due: u64| {
        last = due;
        rec.pump(due).map(|_| ()).map_err(RuntimeError::Bag)
    };
    pipeline.run_lockstep(&opts, Some(&mut hook)).unwrap();
    rec.finish(last).unwrap()
}

/// Payload sequence per topic.
pub fn by_topic(records: &[attbus::bus::BagRecord]) -> std::collections::BTreeMap<String, Vec<Message>> {
    let mut m: std::collections::BTreeMap<String, Vec<Message>> = Default::default();
    for r in records {
        m.entry(r.topic.clone()).or_default().push(r.msg.clone());
    }
    m
}
