//! Metrics by explicit enumeration of segments, tubes and matches. Slow and
//! literal on purpose; used as the reference for the library's evaluator.

use std::collections::BTreeMap;

use pantrack::{PanopticLabel, Taxonomy};

#[derive(Debug, Clone, Default)]
pub struct BruteClass {
    pub pq: f64,
    pub sq: f64,
    pub rq: f64,
    pub ptq: f64,
    pub sptq: f64,
    pub iou: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
}

#[derive(Debug, Clone, Default)]
pub struct BruteReport {
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
    pub per_class: BTreeMap<String, BruteClass>,
}

/// A segment: its label and the indices of its points.
struct Segment {
    label: PanopticLabel,
    points: Vec<usize>,
}

fn segments(
    labels: &[PanopticLabel],
    keep: &[usize],
    skip_void: Option<&Taxonomy>,
) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for &i in keep {
        let l = labels[i];
        if let Some(t) = skip_void {
            if t.is_void(l.class) {
                continue;
            }
        }
        match out.iter_mut().find(|s| s.label == l) {
            Some(s) => s.points.push(i),
            None => out.push(Segment {
                label: l,
                points: vec![i],
            }),
        }
    }
    out
}

fn intersection(a: &[usize], b: &[usize]) -> usize {
    a.iter().filter(|x| b.contains(x)).count()
}

#[derive(Debug, Clone, Copy)]
struct Match {
    pred: PanopticLabel,
    gt: PanopticLabel,
    iou: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn brute_evaluate(
    pred: &[Vec<PanopticLabel>],
    gt: &[Vec<PanopticLabel>],
    tax: &Taxonomy,
) -> BruteReport {
    let nc = tax.class_count();
    let mut tp = vec![0usize; nc];
    let mut fp = vec![0usize; nc];
    let mut fn_ = vec![0usize; nc];
    let mut iou_sum = vec![0.0f64; nc];
    let mut ids = vec![0usize; nc];
    let mut ids_iou = vec![0.0f64; nc];
    let mut matches_per_frame: Vec<Vec<Match>> = Vec::new();

    for (p, g) in pred.iter().zip(gt) {
        let keep: Vec<usize> = (0..g.len()).filter(|&i| !tax.is_void(g[i].class)).collect();
        let gsegs = segments(g, &keep, None);
        let psegs = segments(p, &keep, Some(tax));
        let mut matched_p = vec![false; psegs.len()];
        let mut matched_g = vec![false; gsegs.len()];
        let mut frame_matches = Vec::new();
        for (gi, gs) in gsegs.iter().enumerate() {
            for (pi, ps) in psegs.iter().enumerate() {
                if ps.label.class != gs.label.class {
                    continue;
                }
                let i = intersection(&gs.points, &ps.points);
                let u = gs.points.len() + ps.points.len() - i;
                let iou = i as f64 / u as f64;
                if iou > 0.5 {
                    matched_p[pi] = true;
                    matched_g[gi] = true;
                    frame_matches.push(Match {
                        pred: ps.label,
                        gt: gs.label,
                        iou,
                    });
                }
            }
        }
        for (gi, gs) in gsegs.iter().enumerate() {
            if !matched_g[gi] {
                fn_[gs.label.class as usize] += 1;
            }
        }
        for (pi, ps) in psegs.iter().enumerate() {
            if !matched_p[pi] {
                fp[ps.label.class as usize] += 1;
            }
        }
        for m in &frame_matches {
            tp[m.gt.class as usize] += 1;
            iou_sum[m.gt.class as usize] += m.iou;
        }
        matches_per_frame.push(frame_matches);
    }

    // identity switches: walk each gt track's matches in frame order
    let mut track_switches: BTreeMap<u32, usize> = BTreeMap::new();
    let gt_tracks: Vec<PanopticLabel> = {
        let mut v: Vec<PanopticLabel> = Vec::new();
        for m in matches_per_frame.iter().flatten() {
            if m.gt.instance != 0 && !v.contains(&m.gt) {
                v.push(m.gt);
            }
        }
        v
    };
    for track in gt_tracks {
        let history: Vec<Match> = matches_per_frame
            .iter()
            .filter_map(|f| f.iter().find(|m| m.gt == track).copied())
            .collect();
        for w in history.windows(2) {
            if w[0].pred.instance != w[1].pred.instance {
                ids[track.class as usize] += 1;
                ids_iou[track.class as usize] += w[1].iou;
                *track_switches.entry(track.instance).or_insert(0) += 1;
            }
        }
    }

    // semantic IoU over the whole sequence
    let mut sem_i = vec![0usize; nc];
    let mut sem_u = vec![0usize; nc];
    for c in 0..nc as u16 {
        for (p, g) in pred.iter().zip(gt) {
            for (pl, gl) in p.iter().zip(g) {
                if tax.is_void(gl.class) {
                    continue;
                }
                let (inp, ing) = (pl.class == c, gl.class == c);
                if inp && ing {
                    sem_i[c as usize] += 1;
                }
                if inp || ing {
                    sem_u[c as usize] += 1;
                }
            }
        }
    }

    let mut report = BruteReport::default();
    let (mut pqs, mut sqs, mut rqs, mut ptqs, mut sptqs, mut ious) =
        (vec![], vec![], vec![], vec![], vec![], vec![]);
    for c in tax.evaluated_classes() {
        let k = c as usize;
        let present = tp[k] + fp[k] + fn_[k] > 0;
        let has_iou = sem_u[k] > 0;
        let iou = if has_iou {
            sem_i[k] as f64 / sem_u[k] as f64
        } else {
            0.0
        };
        if has_iou {
            ious.push(iou);
        }
        if !present && !has_iou {
            continue;
        }
        let den = tp[k] as f64 + fp[k] as f64 / 2.0 + fn_[k] as f64 / 2.0;
        let cls = if present {
            BruteClass {
                pq: iou_sum[k] / den,
                sq: if tp[k] > 0 {
                    iou_sum[k] / tp[k] as f64
                } else {
                    0.0
                },
                rq: tp[k] as f64 / den,
                ptq: ((iou_sum[k] - ids[k] as f64) / den).max(0.0),
                sptq: ((iou_sum[k] - ids_iou[k]) / den).max(0.0),
                iou,
                tp: tp[k],
                fp: fp[k],
                fn_: fn_[k],
                ids: ids[k],
            }
        } else {
            BruteClass {
                iou,
                ..BruteClass::default()
            }
        };
        if present {
            pqs.push(cls.pq);
            sqs.push(cls.sq);
            rqs.push(cls.rq);
            ptqs.push(cls.ptq);
            sptqs.push(cls.sptq);
            report.ids_count += cls.ids;
        }
        report
            .per_class
            .insert(tax.name(c).unwrap().to_string(), cls);
    }
    report.pq = mean(&pqs);
    report.sq = mean(&sqs);
    report.rq = mean(&rqs);
    report.ptq = mean(&ptqs);
    report.sptq = mean(&sptqs);
    report.s_cls = mean(&ious);

    // 4D tubes: (frame, point) sets per instance id over thing points
    let tube_of =
        |l: &PanopticLabel| (tax.is_thing(l.class) && l.instance != 0).then_some(l.instance);
    let mut gt_tubes: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    let mut pred_tubes: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
    for (f, (p, g)) in pred.iter().zip(gt).enumerate() {
        for i in 0..g.len() {
            if tax.is_void(g[i].class) {
                continue;
            }
            if let Some(id) = tube_of(&g[i]) {
                gt_tubes.entry(id).or_default().push((f, i));
            }
            if let Some(id) = tube_of(&p[i]) {
                pred_tubes.entry(id).or_default().push((f, i));
            }
        }
    }
    let mut assoc = Vec::new();
    let mut tqs = Vec::new();
    for (gid, g) in &gt_tubes {
        let mut a = 0.0;
        for p in pred_tubes.values() {
            let i = g.iter().filter(|x| p.contains(x)).count();
            if i == 0 {
                continue;
            }
            let u = g.len() + p.len() - i;
            a += i as f64 * (i as f64 / u as f64);
        }
        a /= g.len() as f64;
        assoc.push(a);
        let mut frames: Vec<usize> = g.iter().map(|x| x.0).collect();
        frames.dedup();
        let switches = track_switches.get(gid).copied().unwrap_or(0);
        let f = 1.0 - switches as f64 / (frames.len().saturating_sub(1).max(1)) as f64;
        tqs.push((a * f).sqrt());
    }
    report.s_assoc = mean(&assoc);
    report.lstq = (report.s_assoc * report.s_cls).sqrt();
    report.tq = mean(&tqs);
    report.pat = if report.pq + report.tq == 0.0 {
        0.0
    } else {
        2.0 * report.pq * report.tq / (report.pq + report.tq)
    };
    report
}

/// Field-by-field comparison; returns the first disagreement.
pub fn compare(lib: &pantrack::MetricReport, brute: &BruteReport, tol: f64) -> Result<(), String> {
    let close = |name: &str, a: f64, b: f64| {
        if (a - b).abs() <= tol {
            Ok(())
        } else {
            Err(format!("{name}: library {a} vs brute force {b}"))
        }
    };
    close("pq", lib.pq, brute.pq)?;
    close("sq", lib.sq, brute.sq)?;
    close("rq", lib.rq, brute.rq)?;
    close("ptq", lib.ptq, brute.ptq)?;
    close("sptq", lib.sptq, brute.sptq)?;
    close("lstq", lib.lstq, brute.lstq)?;
    close("s_assoc", lib.s_assoc, brute.s_assoc)?;
    close("s_cls", lib.s_cls, brute.s_cls)?;
    close("tq", lib.tq, brute.tq)?;
    close("pat", lib.pat, brute.pat)?;
    if lib.ids_count != brute.ids_count {
        return Err(format!(
            "ids_count: library {} vs brute force {}",
            lib.ids_count, brute.ids_count
        ));
    }
    let lk: Vec<&String> = lib.per_class.keys().collect();
    let bk: Vec<&String> = brute.per_class.keys().collect();
    if lk != bk {
        return Err(format!(
            "per-class keys: library {lk:?} vs brute force {bk:?}"
        ));
    }
    for (name, l) in &lib.per_class {
        let b = &brute.per_class[name];
        for (field, x, y) in [
            ("pq", l.pq, b.pq),
            ("sq", l.sq, b.sq),
            ("rq", l.rq, b.rq),
            ("ptq", l.ptq, b.ptq),
            ("sptq", l.sptq, b.sptq),
            ("iou", l.iou, b.iou),
        ] {
            close(&format!("{name}.{field}"), x, y)?;
        }
        if (l.tp, l.fp, l.fn_, l.ids) != (b.tp, b.fp, b.fn_, b.ids) {
            return Err(format!(
                "{name} counts: library {:?} vs brute force {:?}",
                (l.tp, l.fp, l.fn_, l.ids),
                (b.tp, b.fp, b.fn_, b.ids)
            ));
        }
    }
    Ok(())
}
