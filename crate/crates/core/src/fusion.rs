//! Parameter-free panoptic fusion of semantic logits and scored instance
//! masks into one panoptic label per pixel.

use crate::error::{Error, Result};
use crate::oracle::{InstancePrediction, Prediction, SemanticLogits};
use crate::projection::LabelGrid;
use crate::types::{PanopticLabel, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Instances scoring below this are discarded.
    pub score_thresh: f64,
    /// An instance keeping less than this fraction of its mask after
    /// higher-ranked instances claim their pixels is discarded.
    pub overlap_thresh: f64,
    /// Stuff classes covering fewer pixels are replaced by each pixel's
    /// runner-up choice. 0 disables the filter.
    pub min_stuff_area: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            score_thresh: 0.5,
            overlap_thresh: 0.5,
            min_stuff_area: 0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score_thresh) || !(0.0..=1.0).contains(&self.overlap_thresh)
        {
            return Err(Error::Config("fusion thresholds must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fused instance logit `(σ(a) + σ(b)) · (a + b)` of mask logit `a` and the
/// semantic logit `b` of the instance's class.
#[inline]
pub fn fused_logit(mask_logit: f64, semantic_logit: f64) -> f64 {
    (sigmoid(mask_logit) + sigmoid(semantic_logit)) * (mask_logit + semantic_logit)
}

const NO_OWNER: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Choice {
    Stuff(u16),
    /// Index into the survivor list.
    Instance(u32),
}

/// Ranks instances, resolves overlaps and returns `(survivor indices into
/// `instances` in rank order, per-pixel owner as an index into that list)`.
pub(crate) fn claim_pixels(
    instances: &[InstancePrediction],
    pixel_count: usize,
    config: &FusionConfig,
) -> (Vec<usize>, Vec<u32>) {
    let mut ranked: Vec<usize> = (0..instances.len())
        .filter(|&i| instances[i].score as f64 >= config.score_thresh)
        .collect();
    ranked.sort_by(|&a, &b| {
        instances[b]
            .score
            .total_cmp(&instances[a].score)
            .then(a.cmp(&b))
    });

    let mut owner = vec![NO_OWNER; pixel_count];
    let mut survivors = Vec::new();
    let mut free = Vec::new();
    for i in ranked {
        free.clear();
        let mut area = 0usize;
        for (p, &v) in instances[i].mask_logits.iter().enumerate() {
            if v > 0.0 {
                area += 1;
                if owner[p] == NO_OWNER {
                    free.push(p);
                }
            }
        }
        if area == 0 || (free.len() as f64) < config.overlap_thresh * area as f64 {
            continue;
        }
        let id = survivors.len() as u32;
        for &p in &free {
            owner[p] = id;
        }
        survivors.push(i);
    }
    (survivors, owner)
}

/// Fuses one clip's prediction into a label grid covering every pixel.
///
/// Instances are filtered by score, ranked by descending score (lower index
/// first on ties) and resolve overlaps greedily. Each pixel then takes the
/// best of the non-thing semantic logits and the fused logit of the
/// instance owning it. Instance ids are numbered 1..n in rank order over the
/// instances that win at least one pixel.
pub fn fuse(
    logits: &SemanticLogits,
    instances: &[InstancePrediction],
    taxonomy: &Taxonomy,
    config: &FusionConfig,
) -> Result<LabelGrid> {
    config.validate()?;
    let n = logits.pixel_count();
    if logits.classes != taxonomy.class_count() || logits.data.len() != n * logits.classes {
        return Err(Error::Consistency(format!(
            "logits of {} classes do not match taxonomy of {}",
            logits.classes,
            taxonomy.class_count()
        )));
    }
    if let Some(k) = instances.iter().position(|i| i.mask_logits.len() != n) {
        return Err(Error::Consistency(format!(
            "instance {k} mask does not match the logit grid"
        )));
    }
    if let Some(k) = instances.iter().position(|i| !taxonomy.is_thing(i.class)) {
        return Err(Error::Consistency(format!(
            "instance {k} has non-thing class {}",
            instances[k].class
        )));
    }
    let background: Vec<u16> = (0..taxonomy.class_count() as u16)
        .filter(|&c| !taxonomy.is_thing(c))
        .collect();
    if background.is_empty() {
        return Err(Error::Consistency(
            "taxonomy has no stuff or void class to fall back on".into(),
        ));
    }

    let (survivors, owner) = claim_pixels(instances, n, config);

    let mut best = Vec::with_capacity(n);
    let mut runner_up = Vec::with_capacity(if config.min_stuff_area > 0 { n } else { 0 });
    for p in 0..n {
        let mut top: (Choice, f64) = (Choice::Stuff(background[0]), f64::NEG_INFINITY);
        let mut second: Option<(Choice, f64)> = None;
        let mut offer = |choice: Choice, v: f64| {
            if v > top.1 {
                if top.1 != f64::NEG_INFINITY {
                    second = Some(top);
                }
                top = (choice, v);
            } else if second.map_or(true, |s| v > s.1) {
                second = Some((choice, v));
            }
        };
        for &c in &background {
            offer(Choice::Stuff(c), logits.get(c as usize, p) as f64);
        }
        if owner[p] != NO_OWNER {
            let inst = &instances[survivors[owner[p] as usize]];
            let fl = fused_logit(
                inst.mask_logits[p] as f64,
                logits.get(inst.class as usize, p) as f64,
            );
            offer(Choice::Instance(owner[p]), fl);
        }
        best.push(top.0);
        if config.min_stuff_area > 0 {
            runner_up.push(second.map(|s| s.0));
        }
    }

    if config.min_stuff_area > 0 {
        let mut area = vec![0usize; taxonomy.class_count()];
        for c in &best {
            if let Choice::Stuff(s) = c {
                area[*s as usize] += 1;
            }
        }
        for (b, r) in best.iter_mut().zip(&runner_up) {
            if let (Choice::Stuff(s), Some(alt)) = (*b, r) {
                if taxonomy.is_stuff(s) && area[s as usize] < config.min_stuff_area {
                    *b = *alt;
                }
            }
        }
    }

    let mut won = vec![false; survivors.len()];
    for c in &best {
        if let Choice::Instance(i) = c {
            won[*i as usize] = true;
        }
    }
    let mut id_of = vec![0u32; survivors.len()];
    let mut next = 1u32;
    for (i, w) in won.iter().enumerate() {
        if *w {
            id_of[i] = next;
            next += 1;
        }
    }
    let labels = best
        .into_iter()
        .map(|c| match c {
            Choice::Stuff(s) => PanopticLabel::stuff(s),
            Choice::Instance(i) => {
                PanopticLabel::new(instances[survivors[i as usize]].class, id_of[i as usize])
            }
        })
        .collect();
    LabelGrid::from_labels(logits.width, logits.height, labels)
}

pub fn fuse_prediction(
    pred: &Prediction,
    taxonomy: &Taxonomy,
    config: &FusionConfig,
) -> Result<LabelGrid> {
    fuse(&pred.logits, &pred.instances, taxonomy, config)
}
