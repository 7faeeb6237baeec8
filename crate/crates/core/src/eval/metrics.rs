use std::collections::BTreeMap;

use super::{EvalError, GroundTruthSet};
use crate::msg::{bbox_iou, BoundingBox};

/// What a pipeline produced for one input frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameObservation {
    /// First PointFoa for the frame, source coordinates.
    pub foa: Option<(u32, u32)>,
    /// Predicted box: the tracker's while tracking, otherwise the
    /// attention layer's ObjectFoa.
    pub bbox: Option<BoundingBox>,
    pub tracking: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub algorithm: String,
    pub foa_hit_rate: f64,
    pub mean_iou: f64,
    pub success_at_05: f64,
    pub frames_to_first_init: Option<u64>,
    pub frames: u64,
}

/// Scores per-frame observations against ground truth. Frames without a
/// prediction count as IoU 0 and as misses.
pub fn compute_metrics(
    algorithm: &str,
    gt: &GroundTruthSet,
    obs: &BTreeMap<u64, FrameObservation>,
) -> Result<MetricsRow, EvalError> {
    if gt.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let (mut hits, mut iou_sum, mut successes) = (0u64, 0f64, 0u64);
    for (frame, truth) in &gt.records {
        let o = obs.get(frame);
        if let Some((x, y)) = o.and_then(|o| o.foa) {
            if truth.contains(x, y) {
                hits += 1;
            }
        }
        let iou = o.and_then(|o| o.bbox).map_or(0.0, |b| bbox_iou(&b, truth));
        iou_sum += iou;
        if iou >= 0.5 {
            successes += 1;
        }
    }
    let n = gt.len() as f64;
    Ok(MetricsRow {
        algorithm: algorithm.to_string(),
        foa_hit_rate: hits as f64 / n,
        mean_iou: iou_sum / n,
        success_at_05: successes as f64 / n,
        frames_to_first_init: obs.iter().find(|(_, o)| o.tracking).map(|(&f, _)| f),
        frames: gt.len() as u64,
    })
}

pub const REPORT_HEADER: &str = "algorithm,foa_hit_rate,mean_iou,success_at_05,frames_to_first_init,frames";

pub fn report_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("{REPORT_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{},{}\n",
            r.algorithm,
            r.foa_hit_rate,
            r.mean_iou,
            r.success_at_05,
            r.frames_to_first_init.map(|f| f.to_string()).unwrap_or_default(),
            r.frames
        ));
    }
    out
}

/// Same columns as the CSV, space-aligned; missing init shows as `-`.
pub fn report_table(rows: &[MetricsRow]) -> String {
    let header: Vec<String> = REPORT_HEADER.split(',').map(String::from).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.algorithm.clone(),
                format!("{:.6}", r.foa_hit_rate),
                format!("{:.6}", r.mean_iou),
                format!("{:.6}", r.success_at_05),
                r.frames_to_first_init.map_or("-".into(), |f| f.to_string()),
                r.frames.to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| body.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    let line = |cells: &[String]| {
        let s: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        s.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(&header);
    for r in &body {
        out.push_str(&line(r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gt(n: u64) -> GroundTruthSet {
        GroundTruthSet {
            records: (0..n)
                .map(|i| (i, BoundingBox::new(10 + i as u32, 10, 20, 20)))
                .collect(),
        }
    }

    #[test]
    fn perfect_predictions() {
        let g = gt(5);
        let obs = g
            .records
            .iter()
            .map(|&(f, b)| {
                (
                    f,
                    FrameObservation {
                        foa: Some((b.x + 1, b.y + 1)),
                        bbox: Some(b),
                        tracking: f >= 2,
                    },
                )
            })
            .collect();
        let r = compute_metrics("x", &g, &obs).unwrap();
        assert_eq!((r.foa_hit_rate, r.mean_iou, r.success_at_05), (1.0, 1.0, 1.0));
        assert_eq!((r.frames_to_first_init, r.frames), (Some(2), 5));
    }

    #[test]
    fn foa_at_origin_never_hits() {
        let g = gt(4);
        let obs = (0..4)
            .map(|f| {
                (
                    f,
                    FrameObservation {
                        foa: Some((0, 0)),
                        ..Default::default()
                    },
                )
            })
            .collect();
        let r = compute_metrics("x", &g, &obs).unwrap();
        assert_eq!(r.foa_hit_rate, 0.0);
        assert_eq!(r.frames_to_first_init, None);
    }

    #[test]
    fn six_of_ten() {
        let g = gt(10);
        let obs = g
            .records
            .iter()
            .map(|&(f, b)| {
                let bbox = if f < 6 { b } else { BoundingBox::new(200, 200, 5, 5) };
                (
                    f,
                    FrameObservation {
                        bbox: Some(bbox),
                        ..Default::default()
                    },
                )
            })
            .collect();
        let r = compute_metrics("x", &g, &obs).unwrap();
        assert!((r.mean_iou - 0.6).abs() < 1e-12);
        assert!((r.success_at_05 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn missing_prediction_counts_zero() {
        let g = gt(4);
        let mut obs = BTreeMap::new();
        obs.insert(
            0,
            FrameObservation {
                bbox: Some(g.records[0].1),
                ..Default::default()
            },
        );
        let r = compute_metrics("x", &g, &obs).unwrap();
        assert_eq!(r.mean_iou, 0.25);
    }

    #[test]
    fn empty_ground_truth() {
        assert!(matches!(
            compute_metrics("x", &GroundTruthSet::default(), &BTreeMap::new()),
            Err(EvalError::EmptyGroundTruth)
        ));
    }

    #[test]
    fn report_formats() {
        let rows = vec![
            MetricsRow {
                algorithm: "attention_itti".into(),
                foa_hit_rate: 1.0,
                mean_iou: 0.5,
                success_at_05: 0.25,
                frames_to_first_init: Some(3),
                frames: 10,
            },
            MetricsRow {
                algorithm: "attention_spectral".into(),
                foa_hit_rate: 0.0,
                mean_iou: 0.0,
                success_at_05: 0.0,
                frames_to_first_init: None,
                frames: 10,
            },
        ];
        assert_eq!(
            report_csv(&rows),
            "algorithm,foa_hit_rate,mean_iou,success_at_05,frames_to_first_init,frames\n\
             attention_itti,1.000000,0.500000,0.250000,3,10\n\
             attention_spectral,0.000000,0.000000,0.000000,,10\n"
        );
        let t = report_table(&rows);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        let col = lines[0].find("foa_hit_rate").unwrap();
        assert_eq!(&lines[1][col..col + 8], "1.000000");
        assert_eq!(&lines[2][col..col + 8], "0.000000");
    }

    proptest! {
        #[test]
        fn success_is_exact_recount(boxes in proptest::collection::vec(proptest::option::of((0u32..60, 0u32..60, 1u32..30, 1u32..30)), 1..30)) {
            let g = gt(boxes.len() as u64);
            let obs: BTreeMap<u64, FrameObservation> = boxes
                .iter()
                .enumerate()
                .map(|(i, b)| (i as u64, FrameObservation { bbox: b.map(|(x, y, w, h)| BoundingBox::new(x, y, w, h)), ..Default::default() }))
                .collect();
            let r = compute_metrics("p", &g, &obs).unwrap();
            let recount = g.records.iter().filter(|(f, t)| obs[f].bbox.is_some_and(|b| bbox_iou(&b, t) >= 0.5)).count();
            prop_assert_eq!(r.success_at_05, recount as f64 / g.len() as f64);
            for v in [r.foa_hit_rate, r.mean_iou, r.success_at_05] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(r.frames, g.len() as u64);
        }
    }
}
