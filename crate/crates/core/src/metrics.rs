//! Panoptic tracking evaluation: PQ/SQ/RQ, PTQ/sPTQ, LSTQ, TQ and PAT over
//! per-point label streams.
//!
//! Conventions shared by every metric:
//! - ground-truth points of the void class are removed before any counting,
//!   together with whatever was predicted for them;
//! - predicted segments of the void class are not segments;
//! - a class absent from both ground truth and prediction is left out of
//!   class means, and a mean over nothing is 0;
//! - tracks (tubes) are keyed by instance id over thing-class points,
//!   regardless of class.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{frame_name, list_frames, load_labels, load_labels_unchecked};
use crate::types::{PanopticLabel, Taxonomy};

/// IoU a match must strictly exceed; above one half, matches are unique.
pub const MATCH_IOU: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentMatch {
    pub pred: PanopticLabel,
    pub gt: PanopticLabel,
    pub iou: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMatches {
    pub tp: Vec<SegmentMatch>,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Segment matches of one frame, indexed by class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMatches {
    pub per_class: Vec<ClassMatches>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentMatchTable {
    pub frames: Vec<FrameMatches>,
}

fn check_frame(pred: &[PanopticLabel], gt: &[PanopticLabel], taxonomy: &Taxonomy) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Consistency(format!(
            "{} predicted labels for {} ground-truth points",
            pred.len(),
            gt.len()
        )));
    }
    let c = taxonomy.class_count();
    if let Some(l) = pred.iter().chain(gt).find(|l| l.class as usize >= c) {
        return Err(Error::Data(format!(
            "label {l} is outside the taxonomy of {c} classes"
        )));
    }
    Ok(())
}

/// Counts segment sizes and pairwise same-class intersections over the
/// non-void points of one frame.
fn segment_counts(
    pred: &[PanopticLabel],
    gt: &[PanopticLabel],
    taxonomy: &Taxonomy,
) -> (
    HashMap<PanopticLabel, usize>,
    HashMap<PanopticLabel, usize>,
    HashMap<(PanopticLabel, PanopticLabel), usize>,
) {
    let mut pred_size = HashMap::new();
    let mut gt_size = HashMap::new();
    let mut inter = HashMap::new();
    for (p, g) in pred.iter().zip(gt) {
        if taxonomy.is_void(g.class) {
            continue;
        }
        *gt_size.entry(*g).or_insert(0) += 1;
        if taxonomy.is_void(p.class) {
            continue;
        }
        *pred_size.entry(*p).or_insert(0) += 1;
        if p.class == g.class {
            *inter.entry((*p, *g)).or_insert(0) += 1;
        }
    }
    (pred_size, gt_size, inter)
}

/// Matches predicted and ground-truth segments of one frame at IoU > 0.5.
pub fn match_frame(
    pred: &[PanopticLabel],
    gt: &[PanopticLabel],
    taxonomy: &Taxonomy,
) -> Result<FrameMatches> {
    check_frame(pred, gt, taxonomy)?;
    let (pred_size, gt_size, inter) = segment_counts(pred, gt, taxonomy);
    let mut per_class = vec![ClassMatches::default(); taxonomy.class_count()];
    let mut matched_pred = HashMap::new();
    let mut matched_gt = HashMap::new();
    let mut tps: Vec<SegmentMatch> = inter
        .iter()
        .filter_map(|(&(p, g), &i)| {
            let union = pred_size[&p] + gt_size[&g] - i;
            let iou = i as f64 / union as f64;
            (iou > MATCH_IOU).then_some(SegmentMatch {
                pred: p,
                gt: g,
                iou,
            })
        })
        .collect();
    tps.sort_by_key(|m| (m.gt, m.pred));
    for m in tps {
        matched_pred.insert(m.pred, ());
        matched_gt.insert(m.gt, ());
        per_class[m.gt.class as usize].tp.push(m);
    }
    for p in pred_size.keys().filter(|p| !matched_pred.contains_key(*p)) {
        per_class[p.class as usize].fp += 1;
    }
    for g in gt_size.keys().filter(|g| !matched_gt.contains_key(*g)) {
        per_class[g.class as usize].fn_ += 1;
    }
    Ok(FrameMatches { per_class })
}

pub fn match_sequence(
    pred: &[Vec<PanopticLabel>],
    gt: &[Vec<PanopticLabel>],
    taxonomy: &Taxonomy,
) -> Result<SegmentMatchTable> {
    if pred.len() != gt.len() {
        return Err(Error::Consistency(format!(
            "{} predicted frames for {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    let frames = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| match_frame(p, g, taxonomy))
        .collect::<Result<_>>()?;
    Ok(SegmentMatchTable { frames })
}

/// Sequence totals of one class.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassTotals {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub iou_sum: f64,
    /// Identity switches charged to this class.
    pub ids: usize,
    /// Sum of the IoUs of the switching matches.
    pub ids_iou_sum: f64,
}

impl ClassTotals {
    pub fn is_present(&self) -> bool {
        self.tp + self.fp + self.fn_ > 0
    }

    fn denominator(&self) -> f64 {
        self.tp as f64 + 0.5 * self.fp as f64 + 0.5 * self.fn_ as f64
    }

    pub fn pq(&self) -> f64 {
        if self.is_present() {
            self.iou_sum / self.denominator()
        } else {
            0.0
        }
    }

    pub fn sq(&self) -> f64 {
        if self.tp > 0 {
            self.iou_sum / self.tp as f64
        } else {
            0.0
        }
    }

    pub fn rq(&self) -> f64 {
        if self.is_present() {
            self.tp as f64 / self.denominator()
        } else {
            0.0
        }
    }

    pub fn ptq(&self) -> f64 {
        if self.is_present() {
            ((self.iou_sum - self.ids as f64) / self.denominator()).max(0.0)
        } else {
            0.0
        }
    }

    pub fn sptq(&self) -> f64 {
        if self.is_present() {
            ((self.iou_sum - self.ids_iou_sum) / self.denominator()).max(0.0)
        } else {
            0.0
        }
    }
}

/// Per-class totals including identity switches. A switch is charged when a
/// ground-truth track matched now was, at its latest earlier matched frame,
/// matched to a different predicted id.
pub fn class_totals(table: &SegmentMatchTable, class_count: usize) -> Vec<ClassTotals> {
    let mut totals = vec![ClassTotals::default(); class_count];
    let mut last_pred: HashMap<PanopticLabel, u32> = HashMap::new();
    for frame in &table.frames {
        for (c, cm) in frame.per_class.iter().enumerate() {
            let t = &mut totals[c];
            t.tp += cm.tp.len();
            t.fp += cm.fp;
            t.fn_ += cm.fn_;
            for m in &cm.tp {
                t.iou_sum += m.iou;
                if m.gt.instance == 0 {
                    continue;
                }
                if let Some(prev) = last_pred.insert(m.gt, m.pred.instance) {
                    if prev != m.pred.instance {
                        t.ids += 1;
                        t.ids_iou_sum += m.iou;
                    }
                }
            }
        }
    }
    totals
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PanopticScores {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
}

/// Class-mean PQ, SQ and RQ plus the per-class values of present classes.
pub fn pq_sq_rq(
    table: &SegmentMatchTable,
    taxonomy: &Taxonomy,
) -> (PanopticScores, BTreeMap<u16, PanopticScores>) {
    let totals = class_totals(table, taxonomy.class_count());
    let per_class: BTreeMap<u16, PanopticScores> = taxonomy
        .evaluated_classes()
        .filter(|&c| totals[c as usize].is_present())
        .map(|c| {
            let t = &totals[c as usize];
            (
                c,
                PanopticScores {
                    pq: t.pq(),
                    sq: t.sq(),
                    rq: t.rq(),
                },
            )
        })
        .collect();
    let agg = PanopticScores {
        pq: mean(per_class.values().map(|s| s.pq)),
        sq: mean(per_class.values().map(|s| s.sq)),
        rq: mean(per_class.values().map(|s| s.rq)),
    };
    (agg, per_class)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingScores {
    pub ptq: f64,
    pub sptq: f64,
    pub ids: usize,
}

/// Class-mean PTQ and sPTQ. Frames must be in temporal order.
pub fn ptq_sptq(
    table: &SegmentMatchTable,
    taxonomy: &Taxonomy,
) -> (TrackingScores, BTreeMap<u16, TrackingScores>) {
    let totals = class_totals(table, taxonomy.class_count());
    let per_class: BTreeMap<u16, TrackingScores> = taxonomy
        .evaluated_classes()
        .filter(|&c| totals[c as usize].is_present())
        .map(|c| {
            let t = &totals[c as usize];
            (
                c,
                TrackingScores {
                    ptq: t.ptq(),
                    sptq: t.sptq(),
                    ids: t.ids,
                },
            )
        })
        .collect();
    let agg = TrackingScores {
        ptq: mean(per_class.values().map(|s| s.ptq)),
        sptq: mean(per_class.values().map(|s| s.sptq)),
        ids: per_class.values().map(|s| s.ids).sum(),
    };
    (agg, per_class)
}

/// Sequence-level tube statistics: tube sizes and pairwise intersections.
struct Tubes {
    gt_size: BTreeMap<u32, usize>,
    pred_size: HashMap<u32, usize>,
    /// gt tube -> pred tube -> shared points
    inter: BTreeMap<u32, BTreeMap<u32, usize>>,
    /// frames in which each gt tube has points
    gt_frames: BTreeMap<u32, usize>,
}

fn tubes(pred: &[Vec<PanopticLabel>], gt: &[Vec<PanopticLabel>], taxonomy: &Taxonomy) -> Tubes {
    let mut t = Tubes {
        gt_size: BTreeMap::new(),
        pred_size: HashMap::new(),
        inter: BTreeMap::new(),
        gt_frames: BTreeMap::new(),
    };
    for (pf, gf) in pred.iter().zip(gt) {
        let mut seen = HashMap::new();
        for (p, g) in pf.iter().zip(gf) {
            if taxonomy.is_void(g.class) {
                continue;
            }
            let gt_tube = (taxonomy.is_thing(g.class) && g.instance != 0).then_some(g.instance);
            let pred_tube = (taxonomy.is_thing(p.class) && p.instance != 0).then_some(p.instance);
            if let Some(gi) = gt_tube {
                *t.gt_size.entry(gi).or_insert(0) += 1;
                if seen.insert(gi, ()).is_none() {
                    *t.gt_frames.entry(gi).or_insert(0) += 1;
                }
            }
            if let Some(pi) = pred_tube {
                *t.pred_size.entry(pi).or_insert(0) += 1;
            }
            if let (Some(gi), Some(pi)) = (gt_tube, pred_tube) {
                *t.inter.entry(gi).or_default().entry(pi).or_insert(0) += 1;
            }
        }
    }
    t
}

impl Tubes {
    /// `(1/|g|) Σ_p |p∩g| · IoU(p, g)` of one gt tube.
    fn association(&self, g: u32) -> f64 {
        let gs = self.gt_size[&g];
        let Some(row) = self.inter.get(&g) else {
            return 0.0;
        };
        let total: f64 = row
            .iter()
            .map(|(p, &i)| {
                let union = gs + self.pred_size[p] - i;
                i as f64 * (i as f64 / union as f64)
            })
            .sum();
        total / gs as f64
    }
}

/// Class-wise semantic IoU over the whole sequence.
pub fn semantic_iou(
    pred: &[Vec<PanopticLabel>],
    gt: &[Vec<PanopticLabel>],
    taxonomy: &Taxonomy,
) -> BTreeMap<u16, f64> {
    let c = taxonomy.class_count();
    let (mut tp, mut fp, mut fn_) = (vec![0usize; c], vec![0usize; c], vec![0usize; c]);
    for (pf, gf) in pred.iter().zip(gt) {
        for (p, g) in pf.iter().zip(gf) {
            if taxonomy.is_void(g.class) {
                continue;
            }
            if p.class == g.class {
                tp[g.class as usize] += 1;
            } else {
                fn_[g.class as usize] += 1;
                fp[p.class as usize] += 1;
            }
        }
    }
    taxonomy
        .evaluated_classes()
        .filter(|&k| tp[k as usize] + fp[k as usize] + fn_[k as usize] > 0)
        .map(|k| {
            let k_ = k as usize;
            (k, tp[k_] as f64 / (tp[k_] + fp[k_] + fn_[k_]) as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LstqScores {
    pub lstq: f64,
    pub s_assoc: f64,
    pub s_cls: f64,
}

/// `LSTQ = √(S_assoc · S_cls)`.
pub fn lstq(
    pred: &[Vec<PanopticLabel>],
    gt: &[Vec<PanopticLabel>],
    taxonomy: &Taxonomy,
) -> Result<LstqScores> {
    check_streams(pred, gt, taxonomy)?;
    let s_cls = mean(semantic_iou(pred, gt, taxonomy).into_values());
    let t = tubes(pred, gt, taxonomy);
    let s_assoc =
        t.gt_size.keys().map(|&g| t.association(g)).sum::<f64>() / t.gt_size.len().max(1) as f64;
    Ok(LstqScores {
        lstq: (s_assoc * s_cls).sqrt(),
        s_assoc,
        s_cls,
    })
}

/// Predicted-id changes between consecutive matched frames, per gt tube.
fn switches_per_track(table: &SegmentMatchTable) -> BTreeMap<u32, usize> {
    let mut last: HashMap<PanopticLabel, u32> = HashMap::new();
    let mut ids = BTreeMap::new();
    for frame in &table.frames {
        for m in frame.per_class.iter().flat_map(|c| &c.tp) {
            if m.gt.instance == 0 {
                continue;
            }
            if let Some(prev) = last.insert(m.gt, m.pred.instance) {
                if prev != m.pred.instance {
                    *ids.entry(m.gt.instance).or_insert(0) += 1;
                }
            }
        }
    }
    ids
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackQuality {
    pub tq: f64,
    pub pat: f64,
}

pub fn harmonic_mean(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Per gt track `TQ(g) = √(AQ(g) · (1 − ids(g) / max(frames(g) − 1, 1)))`;
/// TQ is the mean over tracks and PAT the harmonic mean of `pq` and TQ.
pub fn tq_pat(
    pq: f64,
    pred: &[Vec<PanopticLabel>],
    gt: &[Vec<PanopticLabel>],
    taxonomy: &Taxonomy,
) -> Result<TrackQuality> {
    check_streams(pred, gt, taxonomy)?;
    let table = match_sequence(pred, gt, taxonomy)?;
    Ok(tq_pat_from(pq, &table, &tubes(pred, gt, taxonomy)))
}

fn tq_pat_from(pq: f64, table: &SegmentMatchTable, t: &Tubes) -> TrackQuality {
    let ids = switches_per_track(table);
    let tq = mean(t.gt_size.keys().map(|g| {
        let aq = t.association(*g);
        let frames = t.gt_frames[g];
        let f = 1.0 - *ids.get(g).unwrap_or(&0) as f64 / frames.saturating_sub(1).max(1) as f64;
        (aq * f.max(0.0)).sqrt()
    }));
    TrackQuality {
        tq,
        pat: harmonic_mean(pq, tq),
    }
}

fn check_streams(
    pred: &[Vec<PanopticLabel>],
    gt: &[Vec<PanopticLabel>],
    taxonomy: &Taxonomy,
) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Consistency(format!(
            "{} predicted frames for {} ground-truth frames",
            pred.len(),
            gt.len()
        )));
    }
    for (p, g) in pred.iter().zip(gt) {
        check_frame(p, g, taxonomy)?;
    }
    let mut class_of: HashMap<u32, u16> = HashMap::new();
    for l in gt
        .iter()
        .flatten()
        .filter(|l| taxonomy.is_thing(l.class) && l.instance != 0)
    {
        if let Some(c) = class_of.insert(l.instance, l.class) {
            if c != l.class {
                return Err(Error::Data(format!(
                    "ground-truth instance {} appears with classes {c} and {}",
                    l.instance, l.class
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub ptq: f64,
    pub sptq: f64,
    /// Sequence-level semantic IoU (the class's share of S_cls).
    pub iou: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub ids: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub ptq: f64,
    pub sptq: f64,
    pub lstq: f64,
    pub s_assoc: f64,
    pub s_cls: f64,
    pub tq: f64,
    pub pat: f64,
    pub ids_count: usize,
    /// Keyed by class name; classes absent from both streams are omitted.
    pub per_class: BTreeMap<String, ClassReport>,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("metric report: {e}")))
    }

    /// Header and one row in percent: PAT, PQ, TQ, PTQ, LSTQ.
    pub fn table(&self) -> String {
        let cols = ["PAT", "PQ", "TQ", "PTQ", "LSTQ"];
        let vals = [self.pat, self.pq, self.tq, self.ptq, self.lstq];
        let header: Vec<String> = cols.iter().map(|c| format!("{c:>7}")).collect();
        let row: Vec<String> = vals.iter().map(|v| format!("{:>7.1}", v * 100.0)).collect();
        format!("{}\n{}\n", header.join(" "), row.join(" "))
    }
}

/// Evaluates aligned per-frame label streams (frames in temporal order).
pub fn evaluate(
    pred: &[Vec<PanopticLabel>],
    gt: &[Vec<PanopticLabel>],
    taxonomy: &Taxonomy,
) -> Result<MetricReport> {
    check_streams(pred, gt, taxonomy)?;
    let table = match_sequence(pred, gt, taxonomy)?;
    let totals = class_totals(&table, taxonomy.class_count());
    let (pan, _) = pq_sq_rq(&table, taxonomy);
    let (trk, _) = ptq_sptq(&table, taxonomy);
    let ls = lstq(pred, gt, taxonomy)?;
    let tp = tq_pat_from(pan.pq, &table, &tubes(pred, gt, taxonomy));
    let ious = semantic_iou(pred, gt, taxonomy);

    let mut per_class = BTreeMap::new();
    for c in taxonomy.evaluated_classes() {
        let t = &totals[c as usize];
        if !t.is_present() && !ious.contains_key(&c) {
            continue;
        }
        let name = taxonomy.name(c).unwrap_or_default().to_string();
        per_class.insert(
            name,
            ClassReport {
                pq: t.pq(),
                sq: t.sq(),
                rq: t.rq(),
                ptq: t.ptq(),
                sptq: t.sptq(),
                iou: ious.get(&c).copied().unwrap_or(0.0),
                tp: t.tp,
                fp: t.fp,
                fn_: t.fn_,
                ids: t.ids,
            },
        );
    }
    Ok(MetricReport {
        pq: pan.pq,
        sq: pan.sq,
        rq: pan.rq,
        ptq: trk.ptq,
        sptq: trk.sptq,
        lstq: ls.lstq,
        s_assoc: ls.s_assoc,
        s_cls: ls.s_cls,
        tq: tp.tq,
        pat: tp.pat,
        ids_count: trk.ids,
        per_class,
    })
}

/// Evaluates `pred_dir/NNNNNN.label` against `gt_labels_dir/NNNNNN.label`.
/// Both directories must hold the same frames.
pub fn evaluate_sequence(
    pred_dir: &Path,
    gt_labels_dir: &Path,
    taxonomy: &Taxonomy,
) -> Result<MetricReport> {
    let gt_frames = list_frames(gt_labels_dir, "label")?;
    let pred_frames = list_frames(pred_dir, "label")?;
    if gt_frames.is_empty() {
        return Err(Error::Lookup(format!(
            "no label files in {}",
            gt_labels_dir.display()
        )));
    }
    if gt_frames != pred_frames {
        let missing: Vec<String> = gt_frames
            .iter()
            .filter(|f| !pred_frames.contains(f))
            .map(|f| format!("{f:06}"))
            .collect();
        let extra: Vec<String> = pred_frames
            .iter()
            .filter(|f| !gt_frames.contains(f))
            .map(|f| format!("{f:06}"))
            .collect();
        return Err(Error::Lookup(format!(
            "frame sets differ; missing predictions: [{}]; predictions without ground truth: [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let mut gt = Vec::with_capacity(gt_frames.len());
    let mut pred = Vec::with_capacity(gt_frames.len());
    for f in gt_frames {
        let g = load_labels_unchecked(&gt_labels_dir.join(frame_name(f, "label")))?;
        pred.push(load_labels(
            &pred_dir.join(frame_name(f, "label")),
            g.len(),
        )?);
        gt.push(g);
    }
    evaluate(&pred, &gt, taxonomy)
}
