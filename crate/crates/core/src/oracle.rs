//! Stand-in for the segmentation network: semantic logits plus scored
//! instance masks, produced from ground truth with controllable noise or read
//! from prediction files.
//!
//! Randomness comes from ChaCha8 streams. Every ground-truth segment gets its
//! own stream, seeded by SplitMix64-mixing `(seed, trio, segment label,
//! purpose)`, so the noise applied to one segment does not depend on which
//! other segments exist or the order they are visited in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Trio;
use crate::io::{frame_name, write_atomic};
use crate::projection::{project_labels, LabelGrid, RangeImage};
use crate::types::{ClassKind, PanopticLabel, Taxonomy};

/// Logit magnitude of a confident noise-free prediction.
pub const CONFIDENT_LOGIT: f32 = 10.0;

/// Per-pixel class scores, class-major: `data[c * H * W + row * W + col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticLogits {
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    pub data: Vec<f32>,
}

impl SemanticLogits {
    pub fn zeros(width: usize, height: usize, classes: usize) -> Self {
        Self {
            width,
            height,
            classes,
            data: vec![0.0; width * height * classes],
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, class: usize, pixel: usize) -> f32 {
        self.data[class * self.pixel_count() + pixel]
    }

    #[inline]
    pub fn set(&mut self, class: usize, pixel: usize, v: f32) {
        let n = self.pixel_count();
        self.data[class * n + pixel] = v;
    }

    /// Highest-scoring class per pixel, lower index on ties.
    pub fn argmax(&self) -> Vec<u16> {
        let n = self.pixel_count();
        (0..n)
            .map(|p| {
                (0..self.classes).fold(0usize, |best, c| {
                    if self.get(c, p) > self.get(best, p) {
                        c
                    } else {
                        best
                    }
                }) as u16
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstancePrediction {
    pub class: u16,
    pub score: f32,
    /// Row-major H×W; positive inside the instance.
    pub mask_logits: Vec<f32>,
}

impl InstancePrediction {
    pub fn mask_area(&self) -> usize {
        self.mask_logits.iter().filter(|&&v| v > 0.0).count()
    }
}

/// Everything a segmenter hands to panoptic fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub logits: SemanticLogits,
    pub instances: Vec<InstancePrediction>,
}

impl Prediction {
    pub fn validate(&self, taxonomy: &Taxonomy) -> Result<()> {
        let l = &self.logits;
        if l.classes != taxonomy.class_count() {
            return Err(Error::Consistency(format!(
                "logits carry {} classes, taxonomy has {}",
                l.classes,
                taxonomy.class_count()
            )));
        }
        if l.data.len() != l.classes * l.pixel_count() {
            return Err(Error::Consistency(
                "logit buffer does not match its shape".into(),
            ));
        }
        if let Some(i) = l.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite semantic logit at element {i}"
            )));
        }
        for (k, inst) in self.instances.iter().enumerate() {
            if !taxonomy.is_thing(inst.class) {
                return Err(Error::Data(format!(
                    "instance {k} has non-thing class {}",
                    inst.class
                )));
            }
            if !(0.0..=1.0).contains(&inst.score) {
                return Err(Error::Data(format!(
                    "instance {k} has score {} outside [0, 1]",
                    inst.score
                )));
            }
            if inst.mask_logits.len() != l.pixel_count() {
                return Err(Error::Consistency(format!(
                    "instance {k} mask does not match the logit grid"
                )));
            }
            if inst.mask_logits.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "instance {k} has a non-finite mask logit"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    /// Probability that a segment is predicted as another class of the same
    /// kind (stuff for stuff, thing for thing).
    pub class_confusion_rate: f64,
    /// Masks are eroded or dilated by up to this many pixels.
    pub boundary_jitter_px: u32,
    pub instance_split_prob: f64,
    pub instance_merge_prob: f64,
    pub drop_prob: f64,
    /// Instance scores are drawn from `[score_floor, 1]`.
    pub score_floor: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::noise_free()
    }
}

impl NoiseConfig {
    pub fn noise_free() -> Self {
        Self {
            class_confusion_rate: 0.0,
            boundary_jitter_px: 0,
            instance_split_prob: 0.0,
            instance_merge_prob: 0.0,
            drop_prob: 0.0,
            score_floor: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("class_confusion_rate", self.class_confusion_rate),
            ("instance_split_prob", self.instance_split_prob),
            ("instance_merge_prob", self.instance_merge_prob),
            ("drop_prob", self.drop_prob),
            ("score_floor", self.score_floor),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!(
                    "noise {name} = {v} is outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Same noise, independent stream per trio.
    pub fn for_trio(&self, reference_index: u32) -> Self {
        Self {
            seed: mix(self.seed ^ mix(reference_index as u64 ^ 0x7472_696f)),
            ..*self
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy)]
enum Purpose {
    Confusion = 1,
    Jitter = 2,
    Split = 3,
    Merge = 4,
    Drop = 5,
    Score = 6,
}

fn stream(seed: u64, key: u64, purpose: Purpose) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed ^ mix(key)) ^ purpose as u64))
}

struct Segment {
    label: PanopticLabel,
    pixels: Vec<usize>,
}

fn segments_of(grid: &LabelGrid) -> Vec<Segment> {
    let mut by_label: BTreeMap<PanopticLabel, Vec<usize>> = BTreeMap::new();
    for (i, &l) in grid.labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    by_label
        .into_iter()
        .map(|(label, pixels)| Segment { label, pixels })
        .collect()
}

/// Working instance before drop and scoring: a boolean mask, its class and
/// the stream key it inherits.
struct Draft {
    class: u16,
    key: u64,
    mask: Vec<bool>,
}

impl Draft {
    fn centroid(&self, width: usize) -> Option<(f64, f64)> {
        let (mut sr, mut sc, mut n) = (0.0, 0.0, 0usize);
        for (i, _) in self.mask.iter().enumerate().filter(|(_, &m)| m) {
            sr += (i / width) as f64;
            sc += (i % width) as f64;
            n += 1;
        }
        (n > 0).then(|| (sr / n as f64, sc / n as f64))
    }
}

/// One morphological step with a 3×3 square: dilation when `grow`,
/// erosion otherwise. Only the mask's bounding box (plus one pixel when
/// growing) is visited.
fn morph_step(mask: &[bool], width: usize, height: usize, grow: bool) -> Vec<bool> {
    let mut out = vec![false; mask.len()];
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for (i, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        let (r, c) = (i / width, i % width);
        r0 = r0.min(r);
        r1 = r1.max(r);
        c0 = c0.min(c);
        c1 = c1.max(c);
    }
    if r0 == usize::MAX {
        return out;
    }
    if grow {
        r0 = r0.saturating_sub(1);
        c0 = c0.saturating_sub(1);
        r1 = (r1 + 1).min(height - 1);
        c1 = (c1 + 1).min(width - 1);
    }
    for r in r0..=r1 {
        for c in c0..=c1 {
            let mut any = false;
            let mut all = true;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                    let v = rr >= 0
                        && cc >= 0
                        && (rr as usize) < height
                        && (cc as usize) < width
                        && mask[rr as usize * width + cc as usize];
                    any |= v;
                    all &= v;
                }
            }
            out[r * width + c] = if grow { any } else { all };
        }
    }
    out
}

/// Splits a mask by the line through its centroid perpendicular to its
/// longer bounding-box axis. Returns `None` if either half would be empty.
fn split_mask(mask: &[bool], width: usize) -> Option<(Vec<bool>, Vec<bool>)> {
    let idx: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < 2 {
        return None;
    }
    let (rows, cols): (Vec<usize>, Vec<usize>) =
        idx.iter().map(|&i| (i / width, i % width)).unzip();
    let span = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap();
    let by_col = span(&cols) >= span(&rows);
    let coord = |i: usize| {
        if by_col {
            (i % width) as f64
        } else {
            (i / width) as f64
        }
    };
    let centroid = idx.iter().map(|&i| coord(i)).sum::<f64>() / idx.len() as f64;
    let mut a = vec![false; mask.len()];
    let mut b = vec![false; mask.len()];
    for &i in &idx {
        if coord(i) < centroid {
            a[i] = true;
        } else {
            b[i] = true;
        }
    }
    (a.contains(&true) && b.contains(&true)).then_some((a, b))
}

/// Builds segmenter outputs from ground-truth pixel labels.
///
/// Without noise the semantic logits are one-hot ×10 of the ground-truth
/// classes and every thing instance becomes one mask with logits ±10 and
/// score 1. Thing pixels with instance 0 get semantic logits only.
pub fn oracle_outputs(
    gt: &LabelGrid,
    taxonomy: &Taxonomy,
    noise: &NoiseConfig,
) -> Result<Prediction> {
    noise.validate()?;
    for &l in &gt.labels {
        taxonomy.check_label(l)?;
    }
    let (w, h) = (gt.width, gt.height);
    let n = w * h;
    let mut logits = SemanticLogits::zeros(w, h, taxonomy.class_count());
    let stuff: Vec<u16> = taxonomy.stuff_classes().collect();
    let things: Vec<u16> = taxonomy.thing_classes().collect();

    let mut drafts = Vec::new();
    for seg in segments_of(gt) {
        let key = seg.label.sort_key();
        let mut class = seg.label.class;
        let pool: &[u16] = match taxonomy.kind(class) {
            Some(ClassKind::Stuff) => &stuff,
            Some(ClassKind::Thing) => &things,
            _ => &[],
        };
        if pool.len() > 1 {
            let mut rng = stream(noise.seed, key, Purpose::Confusion);
            if rng.random::<f64>() < noise.class_confusion_rate {
                let others: Vec<u16> = pool.iter().copied().filter(|&c| c != class).collect();
                class = others[rng.random_range(0..others.len())];
            }
        }
        for &p in &seg.pixels {
            logits.set(class as usize, p, CONFIDENT_LOGIT);
        }
        if !taxonomy.is_thing(class) || seg.label.instance == 0 {
            continue;
        }
        let mut mask = vec![false; n];
        for &p in &seg.pixels {
            mask[p] = true;
        }
        if noise.boundary_jitter_px > 0 {
            let j = noise.boundary_jitter_px as i64;
            let d = stream(noise.seed, key, Purpose::Jitter).random_range(-j..=j);
            for _ in 0..d.unsigned_abs() {
                mask = morph_step(&mask, w, h, d > 0);
            }
        }
        let mut split_rng = stream(noise.seed, key, Purpose::Split);
        let halves = if split_rng.random::<f64>() < noise.instance_split_prob {
            split_mask(&mask, w)
        } else {
            None
        };
        match halves {
            Some((a, b)) => {
                drafts.push(Draft {
                    class,
                    key,
                    mask: a,
                });
                drafts.push(Draft {
                    class,
                    key: mix(key ^ 0x5b17),
                    mask: b,
                });
            }
            None => drafts.push(Draft { class, key, mask }),
        }
    }

    if noise.instance_merge_prob > 0.0 {
        let mut merged = vec![false; drafts.len()];
        for i in 0..drafts.len() {
            if merged[i] {
                continue;
            }
            let mut rng = stream(noise.seed, drafts[i].key, Purpose::Merge);
            if rng.random::<f64>() >= noise.instance_merge_prob {
                continue;
            }
            let Some(ci) = drafts[i].centroid(w) else {
                continue;
            };
            let partner = (0..drafts.len())
                .filter(|&j| j != i && !merged[j] && drafts[j].class == drafts[i].class)
                .filter_map(|j| {
                    drafts[j]
                        .centroid(w)
                        .map(|cj| (j, (cj.0 - ci.0).hypot(cj.1 - ci.1)))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(j, _)| j);
            if let Some(j) = partner {
                let other = std::mem::take(&mut drafts[j].mask);
                for (m, o) in drafts[i].mask.iter_mut().zip(other) {
                    *m |= o;
                }
                merged[i] = true;
                merged[j] = true;
            }
        }
        drafts.retain(|d| !d.mask.is_empty());
    }

    let mut instances = Vec::with_capacity(drafts.len());
    for d in drafts.into_iter().filter(|d| d.mask.contains(&true)) {
        if stream(noise.seed, d.key, Purpose::Drop).random::<f64>() < noise.drop_prob {
            continue;
        }
        let u: f64 = stream(noise.seed, d.key, Purpose::Score).random();
        let score = (noise.score_floor + (1.0 - noise.score_floor) * u).min(1.0) as f32;
        let mask_logits = d
            .mask
            .iter()
            .map(|&m| if m { CONFIDENT_LOGIT } else { -CONFIDENT_LOGIT })
            .collect();
        instances.push(InstancePrediction {
            class: d.class,
            score,
            mask_logits,
        });
    }
    Ok(Prediction { logits, instances })
}

/// What the segmenter looks at: the projected range image, or the clip's
/// points directly as a 1×N grid.
#[derive(Debug, Clone, Copy)]
pub enum SegmenterView<'a> {
    Image(&'a RangeImage),
    Points,
}

impl SegmenterView<'_> {
    pub fn shape(&self, trio: &Trio) -> (usize, usize) {
        match self {
            SegmenterView::Image(img) => (img.width(), img.height()),
            SegmenterView::Points => (trio.len(), 1),
        }
    }
}

/// Source of per-clip semantic logits and instance masks.
pub trait Segmenter {
    fn segment(&mut self, trio: &Trio, view: SegmenterView<'_>) -> Result<Prediction>;
}

/// Segmenter that reads ground truth and applies [`NoiseConfig`].
pub struct OracleSegmenter {
    taxonomy: Taxonomy,
    noise: NoiseConfig,
    /// Ground truth per scan, indexed by scan index.
    gt: Vec<Vec<PanopticLabel>>,
}

impl OracleSegmenter {
    pub fn new(
        taxonomy: Taxonomy,
        noise: NoiseConfig,
        gt: Vec<Vec<PanopticLabel>>,
    ) -> Result<Self> {
        noise.validate()?;
        Ok(Self {
            taxonomy,
            noise,
            gt,
        })
    }

    /// Ground truth of every clip point, in merge order.
    pub fn clip_labels(&self, trio: &Trio) -> Result<Vec<PanopticLabel>> {
        trio.provenance
            .iter()
            .map(|p| {
                self.gt
                    .get(p.scan_index as usize)
                    .and_then(|s| s.get(p.point_index as usize))
                    .copied()
                    .ok_or_else(|| {
                        Error::Lookup(format!(
                            "no ground truth for scan {} point {}",
                            p.scan_index, p.point_index
                        ))
                    })
            })
            .collect()
    }
}

impl Segmenter for OracleSegmenter {
    fn segment(&mut self, trio: &Trio, view: SegmenterView<'_>) -> Result<Prediction> {
        let labels = self.clip_labels(trio)?;
        let grid = match view {
            SegmenterView::Image(img) => project_labels(img, &labels, self.taxonomy.void_label())?,
            SegmenterView::Points => LabelGrid::from_labels(labels.len(), 1, labels)?,
        };
        oracle_outputs(
            &grid,
            &self.taxonomy,
            &self.noise.for_trio(trio.reference_index),
        )
    }
}

/// Segmenter backed by `pred/NNNNNN.logits` + `pred/NNNNNN.inst`, keyed by
/// the clip's newest scan index.
pub struct FileSegmenter {
    dir: PathBuf,
    taxonomy: Taxonomy,
}

impl FileSegmenter {
    pub fn new(dir: impl Into<PathBuf>, taxonomy: Taxonomy) -> Result<Self> {
        let dir = dir.into();
        if !dir.is_dir() {
            return Err(Error::Lookup(format!(
                "prediction directory {} does not exist",
                dir.display()
            )));
        }
        Ok(Self { dir, taxonomy })
    }
}

impl Segmenter for FileSegmenter {
    fn segment(&mut self, trio: &Trio, view: SegmenterView<'_>) -> Result<Prediction> {
        let (w, h) = view.shape(trio);
        load_predictions(&self.dir, trio.reference_index, w, h, &self.taxonomy)
    }
}

pub fn logits_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(frame_name(id, "logits"))
}

pub fn instances_path(dir: &Path, id: u32) -> PathBuf {
    dir.join(frame_name(id, "inst"))
}

fn read_lookup(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Lookup(format!("{} does not exist", path.display())),
        _ => Error::io(path, e),
    })
}

fn f32s(bytes: &[u8]) -> impl Iterator<Item = f32> + '_ {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
}

pub fn encode_logits(logits: &SemanticLogits) -> Vec<u8> {
    logits.data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn encode_instances(instances: &[InstancePrediction]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(instances.len() as u32).to_le_bytes());
    for inst in instances {
        out.extend_from_slice(&inst.class.to_le_bytes());
        out.extend_from_slice(&inst.score.to_le_bytes());
        out.extend(inst.mask_logits.iter().flat_map(|v| v.to_le_bytes()));
    }
    out
}

pub fn decode_predictions(
    logits_bytes: &[u8],
    inst_bytes: &[u8],
    width: usize,
    height: usize,
    taxonomy: &Taxonomy,
) -> Result<Prediction> {
    let n = width * height;
    let classes = taxonomy.class_count();
    if logits_bytes.len() != 4 * classes * n {
        return Err(Error::Format(format!(
            "logits hold {} bytes, expected {} for {classes}x{height}x{width}",
            logits_bytes.len(),
            4 * classes * n
        )));
    }
    let logits = SemanticLogits {
        width,
        height,
        classes,
        data: f32s(logits_bytes).collect(),
    };
    if inst_bytes.len() < 4 {
        return Err(Error::Format("instance file is missing its count".into()));
    }
    let count = u32::from_le_bytes(inst_bytes[..4].try_into().unwrap()) as usize;
    let record = 2 + 4 + 4 * n;
    if inst_bytes.len() != 4 + count * record {
        return Err(Error::Format(format!(
            "instance file holds {} bytes, expected {} for {count} masks of {height}x{width}",
            inst_bytes.len(),
            4 + count * record
        )));
    }
    let instances = inst_bytes[4..]
        .chunks_exact(record)
        .map(|rec| InstancePrediction {
            class: u16::from_le_bytes([rec[0], rec[1]]),
            score: f32::from_le_bytes(rec[2..6].try_into().unwrap()),
            mask_logits: f32s(&rec[6..]).collect(),
        })
        .collect();
    let pred = Prediction { logits, instances };
    pred.validate(taxonomy)?;
    Ok(pred)
}

/// Reads the prediction pair for clip `id` and checks it against the
/// configured shape and taxonomy.
pub fn load_predictions(
    dir: &Path,
    id: u32,
    width: usize,
    height: usize,
    taxonomy: &Taxonomy,
) -> Result<Prediction> {
    let lp = logits_path(dir, id);
    let ip = instances_path(dir, id);
    let (lb, ib) = (read_lookup(&lp)?, read_lookup(&ip)?);
    decode_predictions(&lb, &ib, width, height, taxonomy).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", lp.display())),
        Error::Data(m) => Error::Data(format!("{}: {m}", ip.display())),
        other => other,
    })
}

pub fn save_predictions(dir: &Path, id: u32, pred: &Prediction) -> Result<()> {
    write_atomic(&logits_path(dir, id), &encode_logits(&pred.logits))?;
    write_atomic(&instances_path(dir, id), &encode_instances(&pred.instances))
}
