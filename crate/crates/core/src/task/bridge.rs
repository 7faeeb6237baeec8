use super::TaskError;
use crate::msg::{BoundingBox, Header, InhibitRegion, ObjectFoa, TrackState, TrackStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgePolicy {
    pub theta_start: f64,
    /// Area bounds as fractions of the image area.
    pub a_min: f64,
    pub a_max: f64,
    pub theta_conf: f64,
    pub k: u32,
    pub inhibit_frames: u32,
}

impl Default for BridgePolicy {
    fn default() -> Self {
        BridgePolicy {
            theta_start: 0.6,
            a_min: 0.001,
            a_max: 0.25,
            theta_conf: 0.5,
            k: 5,
            inhibit_frames: 30,
        }
    }
}

impl BridgePolicy {
    pub fn validate(&self) -> Result<(), TaskError> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.theta_start) || !unit.contains(&self.theta_conf) {
            return Err(TaskError::BadPolicy(
                "theta_start and theta_conf must be in [0, 1]".into(),
            ));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.a_min < self.a_max) {
            return Err(TaskError::BadPolicy(format!(
                "a_min {} must be < a_max {}",
                self.a_min, self.a_max
            )));
        }
        if self.k < 1 {
            return Err(TaskError::BadPolicy("k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BridgeState {
    Idle,
    /// `last` is the most recent box reported with enough confidence.
    Tracking {
        last: BoundingBox,
        low: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BridgeCommand {
    Init { header: Header, bbox: BoundingBox },
    Stop { header: Header, bbox: BoundingBox },
    Inhibit(InhibitRegion),
}

/// Decides when an attended object is handed to the tracker and when the
/// tracker is released back to attention.
#[derive(Debug, Clone)]
pub struct Bridge {
    pub policy: BridgePolicy,
    state: BridgeState,
}

impl Bridge {
    pub fn new(policy: BridgePolicy) -> Result<Bridge, TaskError> {
        policy.validate()?;
        Ok(Bridge {
            policy,
            state: BridgeState::Idle,
        })
    }

    pub fn state(&self) -> BridgeState {
        self.state
    }

    pub fn is_tracking(&self) -> bool {
        matches!(self.state, BridgeState::Tracking { .. })
    }

    /// FOA input, paired with the size of the image it refers to. Ignored
    /// while tracking.
    pub fn on_foa(&mut self, foa: &ObjectFoa, image: (u32, u32)) -> Vec<BridgeCommand> {
        if self.is_tracking() {
            return Vec::new();
        }
        let img_area = image.0 as f64 * image.1 as f64;
        let area = foa.bbox.area() as f64;
        let p = &self.policy;
        if (foa.score as f64) >= p.theta_start && p.a_min * img_area <= area && area <= p.a_max * img_area {
            self.state = BridgeState::Tracking { last: foa.bbox, low: 0 };
            return vec![BridgeCommand::Init {
                header: foa.header.clone(),
                bbox: foa.bbox,
            }];
        }
        Vec::new()
    }

    /// Tracker output. Only `Tracking` reports count; anything else is
    /// ignored, as is everything while idle.
    pub fn on_track(&mut self, ts: &TrackState) -> Vec<BridgeCommand> {
        let BridgeState::Tracking { last, low } = &mut self.state else {
            return Vec::new();
        };
        if ts.state != TrackStatus::Tracking {
            return Vec::new();
        }
        // low-confidence boxes are wherever the tracker drifted, not the object
        if (ts.confidence as f64) < self.policy.theta_conf {
            *low += 1;
        } else {
            *low = 0;
            *last = ts.bbox;
        }
        if *low < self.policy.k {
            return Vec::new();
        }
        let bbox = *last;
        self.state = BridgeState::Idle;
        vec![
            BridgeCommand::Stop {
                header: ts.header.clone(),
                bbox,
            },
            BridgeCommand::Inhibit(InhibitRegion {
                header: ts.header.clone(),
                bbox,
                decay_frames: self.policy.inhibit_frames,
            }),
        ]
    }

    pub fn reset(&mut self) {
        self.state = BridgeState::Idle;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn foa(score: f32, side: u32) -> ObjectFoa {
        ObjectFoa {
            header: Header::new(1, 10),
            bbox: BoundingBox::new(0, 0, side, side),
            score,
        }
    }

    fn ts(conf: f32) -> TrackState {
        TrackState {
            header: Header::default(),
            state: TrackStatus::Tracking,
            bbox: BoundingBox::new(3, 4, 10, 10),
            confidence: conf,
        }
    }

    #[test]
    fn gates() {
        // 100x100 image: 14x14 is ~2%, 64x64 is ~41%
        let mut b = Bridge::new(BridgePolicy::default()).unwrap();
        assert!(b.on_foa(&foa(0.9, 64), (100, 100)).is_empty());
        assert!(b.on_foa(&foa(0.5, 14), (100, 100)).is_empty());
        let c = b.on_foa(&foa(0.9, 14), (100, 100));
        assert!(matches!(c[..], [BridgeCommand::Init { .. }]));
        assert!(b.is_tracking());
        assert!(b.on_foa(&foa(0.9, 14), (100, 100)).is_empty());
    }

    #[test]
    fn lost_after_k_low_frames() {
        let mut b = Bridge::new(BridgePolicy::default()).unwrap();
        b.on_foa(&foa(0.9, 14), (100, 100));
        let confs = [0.9, 0.4, 0.4, 0.4, 0.4, 0.4];
        let mut out = Vec::new();
        for (i, &c) in confs.iter().enumerate() {
            out = b.on_track(&ts(c));
            if i < 5 {
                assert!(out.is_empty(), "frame {i}");
            }
        }
        assert_eq!(out.len(), 2);
        match &out[1] {
            BridgeCommand::Inhibit(r) => assert_eq!((r.bbox, r.decay_frames), (BoundingBox::new(3, 4, 10, 10), 30)),
            other => panic!("{other:?}"),
        }
        assert_eq!(b.state(), BridgeState::Idle);
    }

    #[test]
    fn inhibits_last_confident_box() {
        let mut b = Bridge::new(BridgePolicy {
            k: 2,
            ..BridgePolicy::default()
        })
        .unwrap();
        b.on_foa(&foa(0.9, 14), (100, 100));
        let at = |x, conf| TrackState {
            bbox: BoundingBox::new(x, 0, 10, 10),
            ..ts(conf)
        };
        b.on_track(&at(5, 0.9));
        b.on_track(&at(40, 0.1));
        let out = b.on_track(&at(70, 0.1));
        assert!(
            matches!(&out[1], BridgeCommand::Inhibit(r) if r.bbox == BoundingBox::new(5, 0, 10, 10)),
            "{out:?}"
        );
    }

    #[test]
    fn idle_reports_ignored() {
        let mut b = Bridge::new(BridgePolicy {
            k: 1,
            ..BridgePolicy::default()
        })
        .unwrap();
        b.on_foa(&foa(0.9, 14), (100, 100));
        let idle = TrackState::idle(Header::default());
        assert!(b.on_track(&idle).is_empty());
        assert!(b.is_tracking());
    }

    #[test]
    fn bad_policies() {
        assert!(Bridge::new(BridgePolicy {
            a_min: 0.3,
            ..BridgePolicy::default()
        })
        .is_err());
        assert!(Bridge::new(BridgePolicy {
            k: 0,
            ..BridgePolicy::default()
        })
        .is_err());
        assert!(Bridge::new(BridgePolicy {
            theta_conf: 1.5,
            ..BridgePolicy::default()
        })
        .is_err());
    }

    #[derive(Debug, Clone)]
    enum Ev {
        Foa(f32, u32),
        Track(f32),
    }

    fn ev() -> impl Strategy<Value = Ev> {
        prop_oneof![
            (0.0f32..=1.0, 1u32..60).prop_map(|(s, side)| Ev::Foa(s, side)),
            (0.0f32..=1.0).prop_map(Ev::Track),
        ]
    }

    proptest! {
        #[test]
        fn init_exclusion_and_one_inhibit_per_lost(events in proptest::collection::vec(ev(), 0..80), k in 1u32..6) {
            let mut b = Bridge::new(BridgePolicy { k, ..BridgePolicy::default() }).unwrap();
            for e in events {
                let was_tracking = b.is_tracking();
                let out = match e {
                    Ev::Foa(s, side) => b.on_foa(&foa(s, side), (100, 100)),
                    Ev::Track(c) => b.on_track(&ts(c)),
                };
                let inits = out.iter().filter(|c| matches!(c, BridgeCommand::Init { .. })).count();
                let stops = out.iter().filter(|c| matches!(c, BridgeCommand::Stop { .. })).count();
                let inhibits = out.iter().filter(|c| matches!(c, BridgeCommand::Inhibit(_))).count();
                if was_tracking {
                    prop_assert_eq!(inits, 0);
                }
                prop_assert_eq!(stops, inhibits);
                prop_assert!(stops <= 1);
                if stops == 1 {
                    prop_assert!(was_tracking && !b.is_tracking());
                }
            }
        }
    }
}
