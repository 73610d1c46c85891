//! Spherical projection of a clip into a five-channel range image, label
//! projection, resizing, and KNN re-projection of pixel labels back onto
//! every 3D point.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Trio;
use crate::types::{PanopticLabel, Point3};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub width: usize,
    pub height: usize,
    /// Radians above the horizon.
    pub fov_up: f64,
    /// Radians below the horizon.
    pub fov_down: f64,
    /// Points closer than this are left out of the image (ego returns).
    pub min_range: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            width: 4096,
            height: 256,
            fov_up: 10f64.to_radians(),
            fov_down: 30f64.to_radians(),
            min_range: 0.3,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!(
                "image size {}x{} must be positive",
                self.width, self.height
            )));
        }
        if self
            .width
            .checked_mul(self.height)
            .map_or(true, |n| n >= NONE as usize)
        {
            return Err(Error::Config("image has too many pixels".into()));
        }
        if !(self.fov_up + self.fov_down > 0.0) {
            return Err(Error::Config("fov_up + fov_down must be positive".into()));
        }
        if !(self.min_range >= 0.0) {
            return Err(Error::Config("min_range must be non-negative".into()));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// `(row, col)` of a point, or `None` at the origin.
    pub fn pixel_of(&self, p: &Point3) -> Option<(usize, usize)> {
        let r = p.range();
        if !(r > 0.0) || !r.is_finite() {
            return None;
        }
        let w = self.width as f64;
        let h = self.height as f64;
        let col = (0.5 * (1.0 - p.y.atan2(p.x) / PI) * w).floor();
        let elevation = (p.z / r).clamp(-1.0, 1.0).asin();
        let row = ((1.0 - (elevation + self.fov_down) / (self.fov_up + self.fov_down)) * h).floor();
        Some((
            row.clamp(0.0, h - 1.0) as usize,
            col.clamp(0.0, w - 1.0) as usize,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum Channel {
    Range = 0,
    Intensity = 1,
    X = 2,
    Y = 3,
    Z = 4,
}

pub const CHANNELS: usize = 5;

/// H×W image with channels (range, intensity, x, y, z), the z-buffer
/// winner of every pixel and the pixel of every clip point.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    config: ProjectionConfig,
    /// Channel-major: `channels[ch * H * W + row * W + col]`.
    channels: Vec<f32>,
    winner: Vec<u32>,
    pixel_of_point: Vec<u32>,
}

impl RangeImage {
    fn empty(config: ProjectionConfig, point_count: usize) -> Self {
        let n = config.pixel_count();
        Self {
            config,
            channels: vec![0.0; CHANNELS * n],
            winner: vec![NONE; n],
            pixel_of_point: vec![NONE; point_count],
        }
    }

    pub fn config(&self) -> &ProjectionConfig {
        &self.config
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn height(&self) -> usize {
        self.config.height
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.config.width + col
    }

    #[inline]
    pub fn channel(&self, ch: Channel, row: usize, col: usize) -> f32 {
        self.channels[ch as usize * self.config.pixel_count() + self.index(row, col)]
    }

    #[inline]
    pub fn channel_at(&self, ch: Channel, pixel: usize) -> f32 {
        self.channels[ch as usize * self.config.pixel_count() + pixel]
    }

    /// One channel as a row-major H×W slice.
    pub fn channel_plane(&self, ch: Channel) -> &[f32] {
        let n = self.config.pixel_count();
        &self.channels[ch as usize * n..(ch as usize + 1) * n]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.winner[self.index(row, col)] != NONE
    }

    #[inline]
    pub fn is_valid_at(&self, pixel: usize) -> bool {
        self.winner[pixel] != NONE
    }

    pub fn valid_count(&self) -> usize {
        self.winner.iter().filter(|&&w| w != NONE).count()
    }

    /// Index into the clip's merged points of the pixel's z-buffer winner.
    #[inline]
    pub fn winner(&self, row: usize, col: usize) -> Option<usize> {
        self.winner_at(self.index(row, col))
    }

    #[inline]
    pub fn winner_at(&self, pixel: usize) -> Option<usize> {
        match self.winner[pixel] {
            NONE => None,
            w => Some(w as usize),
        }
    }

    pub fn point_count(&self) -> usize {
        self.pixel_of_point.len()
    }

    /// `(row, col)` a clip point projects to.
    #[inline]
    pub fn pixel_of_point(&self, point: usize) -> Option<(usize, usize)> {
        match self.pixel_of_point[point] {
            NONE => None,
            p => Some((
                p as usize / self.config.width,
                p as usize % self.config.width,
            )),
        }
    }

    /// True when the point is the winner of its own pixel.
    pub fn is_winner(&self, point: usize) -> bool {
        match self.pixel_of_point[point] {
            NONE => false,
            p => self.winner[p as usize] == point as u32,
        }
    }
}

/// Projects every clip point; per pixel the smallest range wins, ties going
/// to the later point in merge order (the newest scan).
pub fn project(trio: &Trio, config: &ProjectionConfig) -> Result<RangeImage> {
    config.validate()?;
    project_points(&trio.points, config)
}

pub fn project_points(points: &[Point3], config: &ProjectionConfig) -> Result<RangeImage> {
    config.validate()?;
    if points.len() >= NONE as usize {
        return Err(Error::Consistency("too many points for one image".into()));
    }
    let mut img = RangeImage::empty(*config, points.len());
    let mut ranges = Vec::with_capacity(points.len());
    let mut dropped = 0usize;
    for (i, p) in points.iter().enumerate() {
        let r = p.range();
        ranges.push(r);
        let Some((row, col)) = config.pixel_of(p) else {
            dropped += 1;
            continue;
        };
        let pix = row * config.width + col;
        img.pixel_of_point[i] = pix as u32;
        if r < config.min_range {
            dropped += 1;
            continue;
        }
        match img.winner[pix] {
            NONE => img.winner[pix] = i as u32,
            w if r <= ranges[w as usize] => img.winner[pix] = i as u32,
            _ => {}
        }
    }
    if dropped == points.len() && !points.is_empty() {
        log::warn!(
            "all {} points fall inside the {} m discard radius",
            points.len(),
            config.min_range
        );
    }
    let n = config.pixel_count();
    for pix in 0..n {
        if let Some(w) = img.winner_at(pix) {
            let p = &points[w];
            for (ch, v) in [ranges[w], p.intensity, p.x, p.y, p.z]
                .into_iter()
                .enumerate()
            {
                img.channels[ch * n + pix] = v as f32;
            }
        }
    }
    Ok(img)
}

/// Row-major H×W panoptic labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<PanopticLabel>,
}

impl LabelGrid {
    pub fn filled(width: usize, height: usize, label: PanopticLabel) -> Self {
        Self {
            width,
            height,
            labels: vec![label; width * height],
        }
    }

    pub fn from_labels(width: usize, height: usize, labels: Vec<PanopticLabel>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Consistency(format!(
                "{} labels for a {width}x{height} grid",
                labels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> PanopticLabel {
        self.labels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, label: PanopticLabel) {
        self.labels[row * self.width + col] = label;
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Pixel labels taken from each pixel's z-buffer winner; invalid pixels get
/// `void`.
pub fn project_labels(
    image: &RangeImage,
    labels: &[PanopticLabel],
    void: PanopticLabel,
) -> Result<LabelGrid> {
    if labels.len() != image.point_count() {
        return Err(Error::Consistency(format!(
            "{} labels for {} projected points",
            labels.len(),
            image.point_count()
        )));
    }
    let labels = image
        .winner
        .iter()
        .map(|&w| if w == NONE { void } else { labels[w as usize] })
        .collect();
    Ok(LabelGrid {
        width: image.width(),
        height: image.height(),
        labels,
    })
}

/// Nearest source index of destination index `d` when resampling `src`
/// cells onto `dst` cells.
#[inline]
fn nearest(d: usize, src: usize, dst: usize) -> usize {
    (((2 * d + 1) * src) / (2 * dst)).min(src - 1)
}

/// Lower bilinear neighbor, upper neighbor and fractional weight.
#[inline]
fn bilinear_axis(d: usize, src: usize, dst: usize) -> (usize, usize, f64) {
    let x = (d as f64 + 0.5) * src as f64 / dst as f64 - 0.5;
    let x0 = (x.floor().max(0.0) as usize).min(src - 1);
    let x1 = (x0 + 1).min(src - 1);
    let t = (x - x0 as f64).clamp(0.0, 1.0);
    (x0, x1, t)
}

/// Bilinear resampling of the channels over valid support. A destination
/// pixel is valid iff its nearest source pixel is.
pub fn resize(image: &RangeImage, new_width: usize, new_height: usize) -> Result<RangeImage> {
    let (sw, sh) = (image.width(), image.height());
    if new_width == sw && new_height == sh {
        return Ok(image.clone());
    }
    let config = ProjectionConfig {
        width: new_width,
        height: new_height,
        ..image.config
    };
    config.validate()?;
    let mut out = RangeImage::empty(config, image.point_count());
    let n_src = sw * sh;
    let n_dst = new_width * new_height;
    for r in 0..new_height {
        let nr = nearest(r, sh, new_height);
        let (r0, r1, ty) = bilinear_axis(r, sh, new_height);
        for c in 0..new_width {
            let src = nr * sw + nearest(c, sw, new_width);
            let dst = r * new_width + c;
            if image.winner[src] == NONE {
                continue;
            }
            out.winner[dst] = image.winner[src];
            let (c0, c1, tx) = bilinear_axis(c, sw, new_width);
            let taps = [
                (r0 * sw + c0, (1.0 - ty) * (1.0 - tx)),
                (r0 * sw + c1, (1.0 - ty) * tx),
                (r1 * sw + c0, ty * (1.0 - tx)),
                (r1 * sw + c1, ty * tx),
            ];
            let all_valid = taps.iter().all(|&(i, _)| image.winner[i] != NONE);
            let weight: f64 = taps
                .iter()
                .filter(|&&(i, _)| image.winner[i] != NONE)
                .map(|t| t.1)
                .sum();
            for ch in 0..CHANNELS {
                let v = |i: usize| image.channels[ch * n_src + i] as f64;
                let value = if all_valid {
                    let top = v(taps[0].0) + (v(taps[1].0) - v(taps[0].0)) * tx;
                    let bottom = v(taps[2].0) + (v(taps[3].0) - v(taps[2].0)) * tx;
                    top + (bottom - top) * ty
                } else if weight > 0.0 {
                    taps.iter()
                        .filter(|&&(i, _)| image.winner[i] != NONE)
                        .map(|&(i, w)| w * v(i))
                        .sum::<f64>()
                        / weight
                } else {
                    v(src)
                };
                out.channels[ch * n_dst + dst] = value as f32;
            }
        }
    }
    for (i, &p) in image.pixel_of_point.iter().enumerate() {
        if p != NONE {
            let (r, c) = (p as usize / sw, p as usize % sw);
            let nr = ((2 * r + 1) * new_height / (2 * sh)).min(new_height - 1);
            let nc = ((2 * c + 1) * new_width / (2 * sw)).min(new_width - 1);
            out.pixel_of_point[i] = (nr * new_width + nc) as u32;
        }
    }
    Ok(out)
}

/// Nearest-neighbor label resampling; labels are never blended.
pub fn resize_labels(grid: &LabelGrid, new_width: usize, new_height: usize) -> Result<LabelGrid> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::Config("resize target must be at least 1x1".into()));
    }
    if grid.is_empty() {
        return Err(Error::Consistency("cannot resize an empty grid".into()));
    }
    let mut labels = Vec::with_capacity(new_width * new_height);
    for r in 0..new_height {
        let sr = nearest(r, grid.height, new_height);
        for c in 0..new_width {
            labels.push(grid.get(sr, nearest(c, grid.width, new_width)));
        }
    }
    Ok(LabelGrid {
        width: new_width,
        height: new_height,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    /// Odd side length of the search window in pixels.
    pub window: usize,
    /// Meters; pixels whose range differs more are ignored.
    pub range_cutoff: f64,
    /// Meters; scale of the Gaussian vote weight.
    pub sigma: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 5,
            window: 5,
            range_cutoff: 1.0,
            sigma: 1.0,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("knn k must be at least 1".into()));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::Config(format!(
                "knn window {} must be odd",
                self.window
            )));
        }
        if !(self.range_cutoff > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::Config(
                "knn range cutoff and sigma must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Assigns every clip point a label by a range-gated, Gaussian-weighted vote
/// over the pixel window around its projection. Columns wrap around in
/// azimuth; rows do not.
pub fn knn_unproject(
    image: &RangeImage,
    pixel_labels: &LabelGrid,
    trio: &Trio,
    config: &KnnConfig,
    void: PanopticLabel,
) -> Result<Vec<PanopticLabel>> {
    config.validate()?;
    if pixel_labels.width != image.width() || pixel_labels.height != image.height() {
        return Err(Error::Consistency(format!(
            "label grid {}x{} does not match image {}x{}",
            pixel_labels.width,
            pixel_labels.height,
            image.width(),
            image.height()
        )));
    }
    if trio.len() != image.point_count() {
        return Err(Error::Consistency(format!(
            "clip has {} points, image was projected from {}",
            trio.len(),
            image.point_count()
        )));
    }
    let (w, h) = (image.width() as isize, image.height() as isize);
    let half = (config.window / 2) as isize;
    let inv_two_sigma_sq = 1.0 / (2.0 * config.sigma * config.sigma);
    let range_plane = image.channel_plane(Channel::Range);

    let mut candidates: Vec<(f64, usize)> = Vec::with_capacity(config.window * config.window);
    let mut votes: Vec<(PanopticLabel, f64)> = Vec::with_capacity(config.k);
    let mut out = Vec::with_capacity(trio.len());
    for (i, p) in trio.points.iter().enumerate() {
        let Some((row, col)) = image.pixel_of_point(i) else {
            out.push(void);
            continue;
        };
        let rho = p.range();
        candidates.clear();
        for dr in -half..=half {
            let r = row as isize + dr;
            if r < 0 || r >= h {
                continue;
            }
            for dc in -half..=half {
                let c = (col as isize + dc).rem_euclid(w);
                let pix = (r * w + c) as usize;
                if !image.is_valid_at(pix) {
                    continue;
                }
                let delta = (range_plane[pix] as f64 - rho).abs();
                if delta <= config.range_cutoff {
                    candidates.push((delta, pix));
                }
            }
        }
        let center = row * image.width() + col;
        if candidates.is_empty() {
            out.push(if image.is_valid_at(center) {
                pixel_labels.labels[center]
            } else {
                void
            });
            continue;
        }
        candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        candidates.dedup_by_key(|c| c.1);
        votes.clear();
        for &(delta, pix) in candidates.iter().take(config.k) {
            let label = pixel_labels.labels[pix];
            let weight = (-delta * delta * inv_two_sigma_sq).exp();
            match votes.iter_mut().find(|v| v.0 == label) {
                Some(v) => v.1 += weight,
                None => votes.push((label, weight)),
            }
        }
        let best = votes
            .iter()
            .fold(None::<(PanopticLabel, f64)>, |best, &(l, wgt)| match best {
                Some((bl, bw)) if bw > wgt || (bw == wgt && bl.sort_key() <= l.sort_key()) => {
                    Some((bl, bw))
                }
                _ => Some((l, wgt)),
            })
            .map(|b| b.0)
            .unwrap_or(void);
        out.push(best);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Scan;

    fn cfg(w: usize, h: usize) -> ProjectionConfig {
        ProjectionConfig {
            width: w,
            height: h,
            ..ProjectionConfig::default()
        }
    }

    fn trio_of(points: Vec<Point3>) -> Trio {
        Trio::single(&Scan::new(0, points))
    }

    #[test]
    fn axis_aligned_point_projects_analytically() {
        let trio = trio_of(vec![Point3::new(10.0, 0.0, 0.0, 0.5)]);
        let img = project(&trio, &ProjectionConfig::default()).unwrap();
        assert_eq!(img.pixel_of_point(0), Some((64, 2048)));
        assert!(img.is_valid(64, 2048));
        let got: Vec<f32> = [
            Channel::Range,
            Channel::Intensity,
            Channel::X,
            Channel::Y,
            Channel::Z,
        ]
        .iter()
        .map(|&c| img.channel(c, 64, 2048))
        .collect();
        assert_eq!(got, vec![10.0, 0.5, 10.0, 0.0, 0.0]);
        assert_eq!(img.valid_count(), 1);
    }

    #[test]
    fn nearer_point_wins_pixel() {
        let trio = trio_of(vec![
            Point3::new(10.0, 0.0, 0.0, 0.1),
            Point3::new(5.0, 0.0, 0.0, 0.2),
        ]);
        let img = project(&trio, &ProjectionConfig::default()).unwrap();
        assert_eq!(img.winner(64, 2048), Some(1));
        assert_eq!(img.channel(Channel::Range, 64, 2048), 5.0);
        assert_eq!(img.pixel_of_point(0), img.pixel_of_point(1));
        assert!(img.is_winner(1) && !img.is_winner(0));
    }

    #[test]
    fn equal_range_tie_goes_to_later_point() {
        let trio = trio_of(vec![
            Point3::new(10.0, 0.0, 0.0, 0.1),
            Point3::new(10.0, 0.0, 0.0, 0.9),
        ]);
        let img = project(&trio, &ProjectionConfig::default()).unwrap();
        assert_eq!(img.winner(64, 2048), Some(1));
    }

    #[test]
    fn empty_and_ego_points_leave_image_invalid() {
        let img = project(&trio_of(vec![]), &cfg(16, 4)).unwrap();
        assert_eq!(img.valid_count(), 0);
        let img = project(&trio_of(vec![Point3::new(0.1, 0.0, 0.0, 0.0)]), &cfg(16, 4)).unwrap();
        assert_eq!(img.valid_count(), 0);
        assert!(img.pixel_of_point(0).is_some());
    }

    #[test]
    fn project_labels_uses_winners_only() {
        let pts = vec![
            Point3::new(10.0, 0.0, 0.0, 0.0),
            Point3::new(5.0, 0.0, 0.0, 0.0),
            Point3::new(0.0, 8.0, 0.0, 0.0),
        ];
        let img = project(&trio_of(pts), &cfg(64, 8)).unwrap();
        let car = PanopticLabel::new(10, 3);
        let labels = [PanopticLabel::new(1, 0), car, PanopticLabel::new(2, 0)];
        let grid = project_labels(&img, &labels, PanopticLabel::VOID).unwrap();
        let (r, c) = img.pixel_of_point(1).unwrap();
        assert_eq!(grid.get(r, c), car);
        assert_eq!(grid.get(0, 0), PanopticLabel::VOID);
        let permuted = [PanopticLabel::new(7, 7), car, PanopticLabel::new(2, 0)];
        assert_eq!(
            project_labels(&img, &permuted, PanopticLabel::VOID).unwrap(),
            grid
        );
        assert!(project_labels(&img, &labels[..2], PanopticLabel::VOID).is_err());
    }

    #[test]
    fn resize_identity_and_constant() {
        let pts: Vec<Point3> = (0..40)
            .map(|i| Point3::new(10.0, i as f64 * 0.3 - 6.0, 0.0, 0.5))
            .collect();
        let img = project(&trio_of(pts), &cfg(32, 8)).unwrap();
        assert_eq!(resize(&img, 32, 8).unwrap(), img);

        let mut constant = RangeImage::empty(cfg(2, 2), 0);
        constant.channels.iter_mut().for_each(|v| *v = 7.25);
        constant.winner.iter_mut().for_each(|w| *w = 0);
        for (w, h) in [(1, 1), (3, 5), (8, 2), (17, 9)] {
            let r = resize(&constant, w, h).unwrap();
            assert!(r.channels.iter().all(|&v| v == 7.25));
            assert_eq!(r.valid_count(), w * h);
        }
    }

    #[test]
    fn label_resize_is_nearest_neighbor() {
        let (a, b) = (PanopticLabel::new(1, 0), PanopticLabel::new(10, 4));
        let grid = LabelGrid::from_labels(2, 1, vec![a, b]).unwrap();
        assert_eq!(resize_labels(&grid, 4, 1).unwrap().labels, vec![a, a, b, b]);
        assert_eq!(resize_labels(&grid, 2, 1).unwrap(), grid);
        let down = resize_labels(&resize_labels(&grid, 7, 3).unwrap(), 3, 2).unwrap();
        assert!(down.labels.iter().all(|l| *l == a || *l == b));
    }

    #[test]
    fn knn_own_pixel_with_unit_window() {
        let pts: Vec<Point3> = (0..20)
            .map(|i| Point3::new(10.0 + i as f64, i as f64, 0.0, 0.5))
            .collect();
        let trio = trio_of(pts);
        let img = project(&trio, &cfg(128, 16)).unwrap();
        let labels: Vec<PanopticLabel> = (0..20).map(|i| PanopticLabel::new(10, i + 1)).collect();
        let grid = project_labels(&img, &labels, PanopticLabel::VOID).unwrap();
        let knn = KnnConfig {
            k: 1,
            window: 1,
            ..KnnConfig::default()
        };
        let out = knn_unproject(&img, &grid, &trio, &knn, PanopticLabel::VOID).unwrap();
        for i in 0..20 {
            if img.is_winner(i) {
                assert_eq!(out[i], labels[i]);
            }
        }
    }

    #[test]
    fn knn_falls_back_to_center_pixel() {
        // Occluder at 5 m wins the pixel; occluded point at 20 m has no
        // candidate within the cutoff and takes the center label.
        let pts = vec![
            Point3::new(5.0, 0.0, 0.0, 0.0),
            Point3::new(20.0, 0.0, 0.0, 0.0),
        ];
        let trio = trio_of(pts);
        let img = project(&trio, &cfg(64, 8)).unwrap();
        let labels = [PanopticLabel::new(10, 1), PanopticLabel::new(1, 0)];
        let grid = project_labels(&img, &labels, PanopticLabel::VOID).unwrap();
        let out = knn_unproject(
            &img,
            &grid,
            &trio,
            &KnnConfig::default(),
            PanopticLabel::VOID,
        )
        .unwrap();
        assert_eq!(out, vec![labels[0], labels[0]]);
    }

    #[test]
    fn knn_config_validation() {
        assert!(KnnConfig {
            window: 4,
            ..KnnConfig::default()
        }
        .validate()
        .is_err());
        assert!(KnnConfig {
            k: 0,
            ..KnnConfig::default()
        }
        .validate()
        .is_err());
        assert!(KnnConfig {
            range_cutoff: 0.0,
            ..KnnConfig::default()
        }
        .validate()
        .is_err());
    }
}
