//! Detection metrics (precision, recall, interpolated PR curve, AP) and
//! alert-level metrics (PADR, FAR).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{AlertLogLine, AlertType};
use crate::detection_io::{DetectionRecord, FrameDetections};
use crate::geometry::{iou, BBox};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;
pub const DEFAULT_WARNING_WINDOW: u64 = 90;
pub const DEFAULT_HORIZON: u64 = 90;
/// Minimum overlap between an alert box and an entry event's region.
pub const EVENT_IOU_THRESHOLD: f64 = 0.3;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("iou threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
    #[error("no ground-truth boxes: recall is undefined")]
    EmptyGroundTruth,
    #[error("curve has no points")]
    EmptyCurve,
    #[error("curve is already interpolated")]
    AlreadyInterpolated,
    #[error("curve is not interpolated")]
    NotInterpolated,
    #[error("ground truth for {video_id:?}: {message}")]
    GroundTruth { video_id: String, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn add(&mut self, other: ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `(precision, recall)`; `None` where the denominator is zero.
pub fn precision_recall(c: ConfusionCounts) -> (Option<f64>, Option<f64>) {
    (ratio(c.tp, c.tp + c.fp), ratio(c.tp, c.tp + c.fn_))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub class_name: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatch {
    pub counts: ConfusionCounts,
    /// `(prediction index, ground-truth index)` in acceptance order.
    pub pairs: Vec<(usize, usize)>,
}

fn check_threshold(t: f64) -> Result<(), EvalError> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(EvalError::Threshold(t))
    }
}

pub fn match_frame(
    preds: &[DetectionRecord],
    gts: &[GtBox],
    iou_threshold: f64,
) -> Result<FrameMatch, EvalError> {
    check_threshold(iou_threshold)?;
    let mut cands = Vec::new();
    for (pi, p) in preds.iter().enumerate() {
        for (gi, g) in gts.iter().enumerate() {
            if p.class_name == g.class_name {
                let o = iou(&p.bbox, &g.bbox);
                if o >= iou_threshold {
                    cands.push((o, pi, gi));
                }
            }
        }
    }
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut p_used = vec![false; preds.len()];
    let mut g_used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for (_, pi, gi) in cands {
        if !p_used[pi] && !g_used[gi] {
            p_used[pi] = true;
            g_used[gi] = true;
            pairs.push((pi, gi));
        }
    }
    let tp = pairs.len() as u64;
    Ok(FrameMatch {
        counts: ConfusionCounts {
            tp,
            fp: preds.len() as u64 - tp,
            fn_: gts.len() as u64 - tp,
        },
        pairs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    /// `(recall, precision)` in ranking order.
    pub points: Vec<(f64, f64)>,
    pub interpolated: bool,
}

/// A prediction with the frame it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPrediction {
    pub video_id: String,
    pub frame_index: u64,
    pub detection: DetectionRecord,
}

pub type FrameKey = (String, u64);

/// Ground-truth boxes per `(video_id, frame_index)`.
pub type GtIndex = BTreeMap<FrameKey, Vec<GtBox>>;

pub fn build_pr_curve(
    preds: &[ScoredPrediction],
    gt: &GtIndex,
    iou_threshold: f64,
) -> Result<PrCurve, EvalError> {
    check_threshold(iou_threshold)?;
    let total_gt: usize = gt.values().map(Vec::len).sum();
    if total_gt == 0 {
        return Err(EvalError::EmptyGroundTruth);
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    // stable: equal scores keep input order
    order.sort_by(|&a, &b| {
        preds[b]
            .detection
            .score
            .total_cmp(&preds[a].detection.score)
    });

    let mut used: BTreeMap<FrameKey, Vec<bool>> = BTreeMap::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut points = Vec::with_capacity(preds.len());
    for i in order {
        let p = &preds[i];
        let key = (p.video_id.clone(), p.frame_index);
        let mut best: Option<(f64, usize)> = None;
        if let Some(boxes) = gt.get(&key) {
            let flags = used.entry(key).or_insert_with(|| vec![false; boxes.len()]);
            for (gi, g) in boxes.iter().enumerate() {
                if flags[gi] || g.class_name != p.detection.class_name {
                    continue;
                }
                let o = iou(&p.detection.bbox, &g.bbox);
                if o >= iou_threshold && best.is_none_or(|(b, _)| o > b) {
                    best = Some((o, gi));
                }
            }
            if let Some((_, gi)) = best {
                flags[gi] = true;
            }
        }
        if best.is_some() {
            tp += 1;
        } else {
            fp += 1;
        }
        points.push((tp as f64 / total_gt as f64, tp as f64 / (tp + fp) as f64));
    }
    Ok(PrCurve {
        points,
        interpolated: false,
    })
}

/// Replaces each precision by the maximum precision at equal or higher recall.
pub fn interpolate(curve: &PrCurve) -> Result<PrCurve, EvalError> {
    if curve.interpolated {
        return Err(EvalError::AlreadyInterpolated);
    }
    let mut points = curve.points.clone();
    let mut running = f64::NEG_INFINITY;
    for p in points.iter_mut().rev() {
        running = running.max(p.1);
        p.1 = running;
    }
    Ok(PrCurve {
        points,
        interpolated: true,
    })
}

/// `sum (r_{i+1} - r_i) * p_interp(r_{i+1})` with `r_0 = 0`.
pub fn average_precision(curve: &PrCurve) -> Result<f64, EvalError> {
    if !curve.interpolated {
        return Err(EvalError::NotInterpolated);
    }
    if curve.points.is_empty() {
        return Err(EvalError::EmptyCurve);
    }
    let mut prev_r = 0.0;
    let mut ap = 0.0;
    for &(r, p) in &curve.points {
        ap += (r - prev_r) * p;
        prev_r = r;
    }
    Ok(ap)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtFrame {
    pub frame_index: u64,
    pub boxes: Vec<GtBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryEvent {
    pub frame_index: u64,
    pub region: BBox,
}

/// Seeded generator that produced a ground-truth file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub rng: String,
    pub seed: u64,
}

/// Ground truth for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub video_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
    pub frames: Vec<GtFrame>,
    pub entry_events: Vec<EntryEvent>,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<(), EvalError> {
        let err = |message: String| EvalError::GroundTruth {
            video_id: self.video_id.clone(),
            message,
        };
        if self
            .frames
            .windows(2)
            .any(|w| w[0].frame_index >= w[1].frame_index)
        {
            return Err(err("frame_index values must be strictly increasing".into()));
        }
        if let (Some(first), Some(last)) = (self.frames.first(), self.frames.last()) {
            for e in &self.entry_events {
                if e.frame_index < first.frame_index || e.frame_index > last.frame_index {
                    return Err(err(format!(
                        "entry event at frame {} outside frame range {}..={}",
                        e.frame_index, first.frame_index, last.frame_index
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Reads one ground-truth document, or a JSON array of them.
pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruth>, serde_json::Error> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.is_array() {
        serde_json::from_value(value)
    } else {
        Ok(vec![serde_json::from_value(value)?])
    }
}

pub fn gt_index(truths: &[GroundTruth]) -> GtIndex {
    let mut out = GtIndex::new();
    for t in truths {
        for f in &t.frames {
            out.entry((t.video_id.clone(), f.frame_index))
                .or_default()
                .extend(f.boxes.iter().cloned());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_name: String,
    pub counts: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// `None` when the class has no ground-truth boxes.
    pub ap: Option<f64>,
    pub gt_boxes: u64,
    pub predictions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub iou_threshold: f64,
    pub min_score: f64,
    pub classes: Vec<ClassReport>,
    pub overall: ConfusionCounts,
    pub overall_precision: Option<f64>,
    pub overall_recall: Option<f64>,
}

/// Per-class counts over predictions scoring at least `min_score`, and per-class
/// AP over all predictions.
pub fn evaluate_detections(
    frames: &[FrameDetections],
    truths: &[GroundTruth],
    iou_threshold: f64,
    min_score: f64,
) -> Result<DetectionReport, EvalError> {
    check_threshold(iou_threshold)?;
    let gt = gt_index(truths);
    let mut classes: BTreeSet<String> = gt
        .values()
        .flatten()
        .map(|g| g.class_name.clone())
        .collect();
    classes.extend(
        frames
            .iter()
            .flat_map(|f| f.detections.iter().map(|d| d.class_name.clone())),
    );

    let mut reports = Vec::new();
    let mut overall = ConfusionCounts::default();
    for class in classes {
        let class_gt: GtIndex = gt
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    v.iter()
                        .filter(|g| g.class_name == class)
                        .cloned()
                        .collect::<Vec<_>>(),
                )
            })
            .filter(|(_, v)| !v.is_empty())
            .collect();
        let preds: Vec<ScoredPrediction> = frames
            .iter()
            .flat_map(|f| {
                f.detections
                    .iter()
                    .filter(|d| d.class_name == class)
                    .map(|d| ScoredPrediction {
                        video_id: f.video_id.clone(),
                        frame_index: f.frame_index,
                        detection: d.clone(),
                    })
            })
            .collect();

        let mut counts = ConfusionCounts::default();
        let mut seen = BTreeSet::new();
        for f in frames {
            let key = (f.video_id.clone(), f.frame_index);
            let p: Vec<DetectionRecord> = f
                .detections
                .iter()
                .filter(|d| d.class_name == class && d.score >= min_score)
                .cloned()
                .collect();
            let g = class_gt.get(&key).map(Vec::as_slice).unwrap_or(&[]);
            counts.add(match_frame(&p, g, iou_threshold)?.counts);
            seen.insert(key);
        }
        // ground truth in frames with no prediction line
        for (k, v) in &class_gt {
            if !seen.contains(k) {
                counts.fn_ += v.len() as u64;
            }
        }

        let gt_boxes: u64 = class_gt.values().map(|v| v.len() as u64).sum();
        let ap = if gt_boxes == 0 {
            None
        } else if preds.is_empty() {
            Some(0.0)
        } else {
            Some(average_precision(&interpolate(&build_pr_curve(
                &preds,
                &class_gt,
                iou_threshold,
            )?)?)?)
        };
        let (precision, recall) = precision_recall(counts);
        overall.add(counts);
        reports.push(ClassReport {
            class_name: class,
            counts,
            precision,
            recall,
            ap,
            gt_boxes,
            predictions: preds.len() as u64,
        });
    }
    let (overall_precision, overall_recall) = precision_recall(overall);
    Ok(DetectionReport {
        iou_threshold,
        min_score,
        classes: reports,
        overall,
        overall_precision,
        overall_recall,
    })
}

/// What counts as a "pattern" in the false-alarm rate denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FarMode {
    /// Alert episodes plus per-track per-frame no-alert decisions outside the lane.
    #[default]
    Decisions,
    /// Alert episodes only.
    Episodes,
}

impl std::str::FromStr for FarMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "decisions" => Ok(FarMode::Decisions),
            "episodes" => Ok(FarMode::Episodes),
            other => Err(format!(
                "unknown FAR mode {other:?} (expected decisions or episodes)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlertEvalParams {
    pub window: u64,
    pub horizon: u64,
    pub far_mode: FarMode,
}

impl Default for AlertEvalParams {
    fn default() -> Self {
        Self {
            window: DEFAULT_WARNING_WINDOW,
            horizon: DEFAULT_HORIZON,
            far_mode: FarMode::Decisions,
        }
    }
}

/// A maximal run of consecutive frames in which one track raised `STOP_PREDICTED`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub track_id: u64,
    pub start: u64,
    pub end: u64,
    pub boxes: Vec<(u64, BBox)>,
}

pub fn episodes(log: &[AlertLogLine]) -> Vec<Episode> {
    let mut open: BTreeMap<u64, Episode> = BTreeMap::new();
    let mut done = Vec::new();
    for line in log {
        for a in line
            .alerts
            .iter()
            .filter(|a| a.alert_type == AlertType::StopPredicted)
        {
            match open.get_mut(&a.track_id) {
                Some(ep) if ep.end + 1 == line.frame_index => {
                    ep.end = line.frame_index;
                    ep.boxes.push((line.frame_index, a.bbox));
                }
                _ => {
                    let ep = Episode {
                        track_id: a.track_id,
                        start: line.frame_index,
                        end: line.frame_index,
                        boxes: vec![(line.frame_index, a.bbox)],
                    };
                    if let Some(prev) = open.insert(a.track_id, ep) {
                        done.push(prev);
                    }
                }
            }
        }
    }
    done.extend(open.into_values());
    done.sort_by_key(|e| (e.start, e.track_id));
    done
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertEvalReport {
    /// Percent; `None` when there are no positive cases.
    pub padr: Option<f64>,
    /// Percent; `None` when there are no patterns.
    pub far: Option<f64>,
    pub detected_cases: u64,
    pub total_positive_cases: u64,
    pub false_alarm_patterns: u64,
    pub total_patterns: u64,
    pub episodes: u64,
    pub far_mode: FarMode,
}

impl AlertEvalReport {
    pub fn from_counts(
        detected_cases: u64,
        total_positive_cases: u64,
        false_alarm_patterns: u64,
        total_patterns: u64,
        episodes: u64,
        far_mode: FarMode,
    ) -> Self {
        Self {
            padr: ratio(detected_cases, total_positive_cases).map(|r| 100.0 * r),
            far: ratio(false_alarm_patterns, total_patterns).map(|r| 100.0 * r),
            detected_cases,
            total_positive_cases,
            false_alarm_patterns,
            total_patterns,
            episodes,
            far_mode,
        }
    }

    /// Pools counts across videos and recomputes both rates.
    pub fn merge(reports: &[AlertEvalReport], far_mode: FarMode) -> Self {
        let sum = |f: fn(&AlertEvalReport) -> u64| reports.iter().map(f).sum::<u64>();
        Self::from_counts(
            sum(|r| r.detected_cases),
            sum(|r| r.total_positive_cases),
            sum(|r| r.false_alarm_patterns),
            sum(|r| r.total_patterns),
            sum(|r| r.episodes),
            far_mode,
        )
    }
}

fn in_window(frame: u64, event: &EntryEvent, window: u64) -> bool {
    frame <= event.frame_index && frame >= event.frame_index.saturating_sub(window)
}

pub fn evaluate_alerts(
    log: &[AlertLogLine],
    gt: &GroundTruth,
    params: &AlertEvalParams,
) -> AlertEvalReport {
    let predicted: Vec<(u64, &BBox)> = log
        .iter()
        .flat_map(|l| {
            l.alerts
                .iter()
                .filter(|a| a.alert_type == AlertType::StopPredicted)
                .map(move |a| (l.frame_index, &a.bbox))
        })
        .collect();
    let warns = |frame: u64, b: &BBox, e: &EntryEvent| {
        in_window(frame, e, params.window) && iou(b, &e.region) >= EVENT_IOU_THRESHOLD
    };

    let detected = gt
        .entry_events
        .iter()
        .filter(|e| predicted.iter().any(|&(f, b)| warns(f, b, e)))
        .count() as u64;

    let eps = episodes(log);
    let false_alarms = eps
        .iter()
        .filter(|ep| {
            let followed = gt
                .entry_events
                .iter()
                .any(|e| e.frame_index >= ep.end && e.frame_index <= ep.end + params.horizon);
            let matched = gt
                .entry_events
                .iter()
                .any(|e| ep.boxes.iter().any(|(f, b)| warns(*f, b, e)));
            !followed && !matched
        })
        .count() as u64;

    let mut patterns = eps.len() as u64;
    if params.far_mode == FarMode::Decisions {
        patterns += log
            .iter()
            .map(|l| u64::from(l.outside_no_alert))
            .sum::<u64>();
    }
    AlertEvalReport::from_counts(
        detected,
        gt.entry_events.len() as u64,
        false_alarms,
        patterns,
        eps.len() as u64,
        params.far_mode,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decision::AlertEntry;
    use crate::lane::LaneStatus;
    use proptest::prelude::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn pred(class: &str, score: f64, b: BBox) -> DetectionRecord {
        DetectionRecord {
            class_name: class.into(),
            score,
            bbox: b,
            mask_ref: None,
        }
    }

    fn gtb(class: &str, b: BBox) -> GtBox {
        GtBox {
            class_name: class.into(),
            bbox: b,
        }
    }

    #[test]
    fn match_frame_examples() {
        let g = bb(0.0, 0.0, 10.0, 10.0);
        let m = match_frame(&[pred("cow", 0.9, g)], &[gtb("cow", g)], 0.5).unwrap();
        assert_eq!(
            m.counts,
            ConfusionCounts {
                tp: 1,
                fp: 0,
                fn_: 0
            }
        );

        // IoU 0.3 is below 0.5
        let p = bb(0.0, 0.0, 10.0, 3.0);
        assert!((iou(&p, &g) - 0.3).abs() < 1e-12);
        let m = match_frame(&[pred("cow", 0.9, p)], &[gtb("cow", g)], 0.5).unwrap();
        assert_eq!(
            m.counts,
            ConfusionCounts {
                tp: 0,
                fp: 1,
                fn_: 1
            }
        );

        let p6 = bb(0.0, 0.0, 10.0, 6.0);
        let p9 = bb(0.0, 0.0, 10.0, 9.0);
        let m = match_frame(
            &[pred("cow", 0.9, p6), pred("cow", 0.9, p9)],
            &[gtb("cow", g)],
            0.5,
        )
        .unwrap();
        assert_eq!(m.pairs, vec![(1, 0)]);
        assert_eq!(
            m.counts,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                fn_: 0
            }
        );

        // class mismatch never matches
        let m = match_frame(&[pred("dog", 0.9, g)], &[gtb("cow", g)], 0.5).unwrap();
        assert_eq!(m.counts.tp, 0);
        assert!(match_frame(&[], &[], 1.0).is_err());
    }

    #[test]
    fn table_one_ratios() {
        let (p, r) = precision_recall(ConfusionCounts {
            tp: 20,
            fp: 3,
            fn_: 4,
        });
        // the published value is truncated, not rounded
        assert_eq!((p.unwrap() * 1e4).floor() / 1e4, 0.8695);
        assert_eq!((r.unwrap() * 1e4).floor() / 1e4, 0.8333);
        assert_eq!(precision_recall(ConfusionCounts::default()), (None, None));
    }

    fn sp(frame: u64, score: f64, b: BBox) -> ScoredPrediction {
        ScoredPrediction {
            video_id: "v".into(),
            frame_index: frame,
            detection: pred("cow", score, b),
        }
    }

    fn one_gt() -> GtIndex {
        let mut g = GtIndex::new();
        g.insert(("v".into(), 0), vec![gtb("cow", bb(0.0, 0.0, 10.0, 10.0))]);
        g
    }

    #[test]
    fn pr_curve_examples() {
        let hit = bb(0.0, 0.0, 10.0, 10.0);
        let miss = bb(50.0, 50.0, 60.0, 60.0);
        let c = build_pr_curve(&[sp(0, 0.9, hit)], &one_gt(), 0.5).unwrap();
        assert_eq!(c.points, vec![(1.0, 1.0)]);
        let c = build_pr_curve(&[sp(0, 0.9, hit), sp(0, 0.5, miss)], &one_gt(), 0.5).unwrap();
        assert_eq!(c.points, vec![(1.0, 1.0), (1.0, 0.5)]);
        let c = build_pr_curve(&[sp(0, 0.9, miss), sp(0, 0.5, hit)], &one_gt(), 0.5).unwrap();
        assert_eq!(c.points, vec![(0.0, 0.0), (1.0, 0.5)]);
        assert_eq!(
            build_pr_curve(&[sp(0, 0.9, hit)], &GtIndex::new(), 0.5),
            Err(EvalError::EmptyGroundTruth)
        );
    }

    #[test]
    fn interpolation_and_ap_examples() {
        let raw = PrCurve {
            points: vec![(0.5, 0.6), (1.0, 0.8)],
            interpolated: false,
        };
        let i = interpolate(&raw).unwrap();
        assert_eq!(i.points, vec![(0.5, 0.8), (1.0, 0.8)]);
        assert!((average_precision(&i).unwrap() - 0.8).abs() < 1e-15);
        assert!(interpolate(&i).is_err());
        assert!(average_precision(&raw).is_err());

        let perfect = interpolate(&PrCurve {
            points: vec![(1.0, 1.0)],
            interpolated: false,
        })
        .unwrap();
        assert_eq!(average_precision(&perfect).unwrap(), 1.0);

        let mono = PrCurve {
            points: vec![(0.25, 1.0), (0.5, 0.7), (1.0, 0.4)],
            interpolated: false,
        };
        assert_eq!(interpolate(&mono).unwrap().points, mono.points);
    }

    /// Random small AP instance: predictions and GT within a handful of frames.
    #[derive(Debug, Clone)]
    struct Instance {
        preds: Vec<ScoredPrediction>,
        gt: GtIndex,
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (0u8..4, 0u8..4, 1u8..4, 1u8..4).prop_map(|(x, y, w, h)| {
            let (x, y, w, h) = (
                x as f64 * 5.0,
                y as f64 * 5.0,
                w as f64 * 5.0,
                h as f64 * 5.0,
            );
            BBox::new(x, y, x + w, y + h).unwrap()
        })
    }

    fn arb_instance() -> impl Strategy<Value = Instance> {
        let gts = prop::collection::vec((0u64..2, arb_box()), 1..=4);
        // a prediction either copies ground-truth box `copy % n` or stands alone
        let preds = prop::collection::vec(
            (0u64..2, 0u8..5, arb_box(), prop::option::of(0usize..4)),
            0..=6,
        );
        (gts, preds).prop_map(|(gts, preds)| {
            let mut gt = GtIndex::new();
            for (f, b) in &gts {
                gt.entry(("v".into(), *f)).or_default().push(gtb("cow", *b));
            }
            let preds = preds
                .into_iter()
                .map(|(f, s, b, copy)| match copy {
                    Some(i) => {
                        let (gf, gb) = gts[i % gts.len()];
                        sp(gf, 0.1 + 0.2 * s as f64, gb)
                    }
                    None => sp(f, 0.1 + 0.2 * s as f64, b),
                })
                .collect();
            Instance { preds, gt }
        })
    }

    /// Ranks predictions, marks hits by greedy best-IoU matching, and integrates
    /// the upper envelope of the precision/recall points over recall in [0, 1].
    fn brute_force_ap(inst: &Instance, thr: f64) -> f64 {
        let n_gt: usize = inst.gt.values().map(Vec::len).sum();
        let mut ranked: Vec<&ScoredPrediction> = inst.preds.iter().collect();
        ranked.sort_by(|a, b| b.detection.score.partial_cmp(&a.detection.score).unwrap());
        let mut taken: BTreeSet<(u64, usize)> = BTreeSet::new();
        let mut pts = Vec::new();
        let mut tp = 0usize;
        for (k, p) in ranked.iter().enumerate() {
            let boxes = inst.gt.get(&("v".to_string(), p.frame_index));
            let mut best: Option<(f64, usize)> = None;
            for (gi, g) in boxes.into_iter().flatten().enumerate() {
                let o = iou(&p.detection.bbox, &g.bbox);
                if !taken.contains(&(p.frame_index, gi))
                    && o >= thr
                    && best.is_none_or(|(b, _)| o > b)
                {
                    best = Some((o, gi));
                }
            }
            if let Some((_, gi)) = best {
                taken.insert((p.frame_index, gi));
                tp += 1;
            }
            pts.push((tp as f64 / n_gt as f64, tp as f64 / (k + 1) as f64));
        }
        // numeric integration over a fine recall grid at exact breakpoints
        let mut breaks: Vec<f64> = pts.iter().map(|p| p.0).collect();
        breaks.push(0.0);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let mut area = 0.0;
        for w in breaks.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let env = pts
                .iter()
                .filter(|p| p.0 >= mid)
                .map(|p| p.1)
                .fold(0.0, f64::max);
            area += (w[1] - w[0]) * env;
        }
        area
    }

    proptest! {
        #[test]
        fn matching_counts_invariants(
            preds in prop::collection::vec(arb_box(), 0..6),
            gts in prop::collection::vec(arb_box(), 0..5),
        ) {
            let p: Vec<_> = preds.iter().map(|b| pred("cow", 0.9, *b)).collect();
            let g: Vec<_> = gts.iter().map(|b| gtb("cow", *b)).collect();
            let m = match_frame(&p, &g, 0.5).unwrap();
            prop_assert!(m.counts.tp as usize <= p.len().min(g.len()));
            prop_assert_eq!(m.counts.tp + m.counts.fp, p.len() as u64);
            prop_assert_eq!(m.counts.tp + m.counts.fn_, g.len() as u64);
        }

        #[test]
        fn ap_matches_brute_force(inst in arb_instance()) {
            let ap = if inst.preds.is_empty() {
                0.0
            } else {
                average_precision(&interpolate(&build_pr_curve(&inst.preds, &inst.gt, 0.5).unwrap()).unwrap()).unwrap()
            };
            prop_assert!((ap - brute_force_ap(&inst, 0.5)).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&ap));
        }

        #[test]
        fn interpolation_dominates_and_is_monotone(inst in arb_instance()) {
            prop_assume!(!inst.preds.is_empty());
            let raw = build_pr_curve(&inst.preds, &inst.gt, 0.5).unwrap();
            let it = interpolate(&raw).unwrap();
            for (a, b) in raw.points.iter().zip(&it.points) {
                prop_assert!(b.1 >= a.1);
            }
            prop_assert!(it.points.windows(2).all(|w| w[0].1 >= w[1].1 && w[0].0 <= w[1].0));
        }

        #[test]
        fn ap_depends_on_ranking_only(inst in arb_instance()) {
            prop_assume!(!inst.preds.is_empty());
            let ap = |preds: &[ScoredPrediction]| {
                average_precision(&interpolate(&build_pr_curve(preds, &inst.gt, 0.5).unwrap()).unwrap()).unwrap()
            };
            let rescaled: Vec<_> = inst
                .preds
                .iter()
                .map(|p| {
                    let mut q = p.clone();
                    q.detection.score = (p.detection.score * 3.0).exp();
                    q
                })
                .collect();
            prop_assert_eq!(ap(&inst.preds), ap(&rescaled));
        }
    }

    fn line(frame: u64, alerts: Vec<(u64, AlertType, BBox)>, outside: u32) -> AlertLogLine {
        AlertLogLine {
            frame_index: frame,
            lane_status: LaneStatus::Fresh,
            alerts: alerts
                .into_iter()
                .map(|(id, t, b)| AlertEntry {
                    track_id: id,
                    class_name: "cow".into(),
                    alert_type: t,
                    bbox: b,
                    direction: None,
                })
                .collect(),
            outside_no_alert: outside,
        }
    }

    fn truth(events: Vec<(u64, BBox)>, frames: u64) -> GroundTruth {
        GroundTruth {
            video_id: "v".into(),
            generator: None,
            frames: (0..frames)
                .map(|f| GtFrame {
                    frame_index: f,
                    boxes: vec![],
                })
                .collect(),
            entry_events: events
                .into_iter()
                .map(|(f, r)| EntryEvent {
                    frame_index: f,
                    region: r,
                })
                .collect(),
        }
    }

    #[test]
    fn rate_arithmetic() {
        let r = AlertEvalReport::from_counts(9, 10, 2, 100, 2, FarMode::Episodes);
        assert_eq!(r.padr, Some(90.0));
        assert_eq!(r.far, Some(2.0));
        let r = AlertEvalReport::from_counts(0, 0, 0, 0, 0, FarMode::Episodes);
        assert_eq!((r.padr, r.far), (None, None));
    }

    #[test]
    fn episodes_split_on_gaps_and_tracks() {
        let b = bb(0.0, 0.0, 10.0, 10.0);
        let p = AlertType::StopPredicted;
        let log = vec![
            line(0, vec![(1, p, b)], 0),
            line(1, vec![(1, p, b), (2, p, b)], 0),
            line(2, vec![(2, AlertType::StopInLane, b)], 0),
            line(3, vec![(1, p, b)], 0),
        ];
        let eps = episodes(&log);
        let spans: Vec<_> = eps.iter().map(|e| (e.track_id, e.start, e.end)).collect();
        assert_eq!(spans, vec![(1, 0, 1), (2, 1, 1), (1, 3, 3)]);
    }

    #[test]
    fn alert_evaluation() {
        let region = bb(100.0, 100.0, 140.0, 140.0);
        let near = bb(104.0, 100.0, 144.0, 140.0);
        let far_away = bb(400.0, 0.0, 440.0, 40.0);
        let p = AlertType::StopPredicted;
        let mut log: Vec<_> = (0..300).map(|f| line(f, vec![], 1)).collect();
        // predicted warning 20 frames before the event, plus an unrelated episode
        log[80] = line(80, vec![(0, p, near)], 0);
        log[81] = line(81, vec![(0, p, near)], 0);
        log[250] = line(250, vec![(5, p, far_away)], 0);
        let gt = truth(vec![(100, region)], 300);
        gt.validate().unwrap();

        let r = evaluate_alerts(&log, &gt, &AlertEvalParams::default());
        assert_eq!((r.detected_cases, r.total_positive_cases), (1, 1));
        assert_eq!(r.padr, Some(100.0));
        assert_eq!(r.episodes, 2);
        assert_eq!(r.false_alarm_patterns, 1);
        assert_eq!(r.total_patterns, 2 + 297);

        let e = evaluate_alerts(
            &log,
            &gt,
            &AlertEvalParams {
                far_mode: FarMode::Episodes,
                ..AlertEvalParams::default()
            },
        );
        assert_eq!(e.far, Some(50.0));

        // a warning that comes too early misses the window
        let r = evaluate_alerts(
            &log,
            &gt,
            &AlertEvalParams {
                window: 10,
                ..AlertEvalParams::default()
            },
        );
        assert_eq!(r.detected_cases, 0);
        // ...but the horizon still clears the episode
        assert_eq!(r.false_alarm_patterns, 1);
    }

    #[test]
    fn merge_pools_counts() {
        let a = AlertEvalReport::from_counts(9, 10, 1, 50, 3, FarMode::Decisions);
        let b = AlertEvalReport::from_counts(1, 10, 1, 150, 2, FarMode::Decisions);
        let m = AlertEvalReport::merge(&[a, b], FarMode::Decisions);
        assert_eq!(m.padr, Some(50.0));
        assert_eq!(m.far, Some(1.0));
        assert_eq!(m.episodes, 5);
    }

    #[test]
    fn ground_truth_validation_and_parsing() {
        let bad = truth(vec![(10, bb(0.0, 0.0, 1.0, 1.0))], 5);
        assert!(bad.validate().is_err());
        let good = truth(vec![], 3);
        let text = serde_json::to_string(&good).unwrap();
        assert!(!text.contains("generator"));
        assert_eq!(parse_ground_truth(&text).unwrap(), vec![good.clone()]);
        let arr = serde_json::to_string(&vec![good.clone(), good]).unwrap();
        assert_eq!(parse_ground_truth(&arr).unwrap().len(), 2);
    }

    #[test]
    fn detection_report() {
        let g = bb(0.0, 0.0, 10.0, 10.0);
        let frames = vec![FrameDetections {
            video_id: "v".into(),
            frame_index: 0,
            detections: vec![pred("cow", 0.9, g), pred("dog", 0.4, g)],
        }];
        let mut gt = truth(vec![], 2);
        gt.frames[0].boxes.push(gtb("cow", g));
        gt.frames[1].boxes.push(gtb("cow", g));
        let r = evaluate_detections(&frames, &[gt], 0.5, 0.5).unwrap();
        let cow = &r.classes[0];
        assert_eq!(cow.class_name, "cow");
        assert_eq!(
            cow.counts,
            ConfusionCounts {
                tp: 1,
                fp: 0,
                fn_: 1
            }
        );
        assert_eq!(cow.ap, Some(0.5));
        let dog = &r.classes[1];
        // below min_score: not counted, but still ranked for AP (no GT, so None)
        assert_eq!(dog.counts, ConfusionCounts::default());
        assert_eq!(dog.ap, None);
    }

    proptest! {
        #[test]
        fn rates_invariant_under_frame_offset(offset in 0u64..10_000, start in 0u64..200, len in 1u64..20, entry in 0u64..300) {
            let region = bb(100.0, 100.0, 140.0, 140.0);
            let build = |off: u64| {
                let log: Vec<_> = (0..300)
                    .map(|f| {
                        let alerts = if f >= start && f < start + len {
                            vec![(0, AlertType::StopPredicted, region)]
                        } else {
                            vec![]
                        };
                        line(f + off, alerts, (f % 3) as u32)
                    })
                    .collect();
                let mut gt = truth(vec![(entry, region)], 300);
                for fr in &mut gt.frames {
                    fr.frame_index += off;
                }
                for e in &mut gt.entry_events {
                    e.frame_index += off;
                }
                evaluate_alerts(&log, &gt, &AlertEvalParams::default())
            };
            prop_assert_eq!(build(0), build(offset));
        }
    }
}
