//! Binary PPM (P6) rendering of range images and label grids.

use crate::projection::{Channel, LabelGrid, RangeImage};
use crate::types::PanopticLabel;

/// Gray level of a range: `1 − exp(−r / 30)` scaled to 0..=255.
pub fn range_gray(range: f32) -> u8 {
    let v = 1.0 - (-(range as f64) / 30.0).exp();
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Deterministic color of a label, hashed from its packed value.
pub fn label_color(label: PanopticLabel) -> [u8; 3] {
    let mut h = label.sort_key().wrapping_add(0x9E37_79B9_7F4A_7C15);
    h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    h ^= h >> 31;
    // keep colors away from black, which marks empty pixels
    [
        64 + (h & 0xBF) as u8,
        64 + ((h >> 8) & 0xBF) as u8,
        64 + ((h >> 16) & 0xBF) as u8,
    ]
}

fn header(width: usize, height: usize) -> Vec<u8> {
    format!("P6\n{width} {height}\n255\n").into_bytes()
}

pub fn render_range(image: &RangeImage) -> Vec<u8> {
    let mut out = header(image.width(), image.height());
    let plane = image.channel_plane(Channel::Range);
    for (pix, &r) in plane.iter().enumerate() {
        let g = if image.is_valid_at(pix) {
            range_gray(r)
        } else {
            0
        };
        out.extend_from_slice(&[g, g, g]);
    }
    out
}

/// Colors every valid pixel by its label; invalid pixels are black.
pub fn render_labels(image: &RangeImage, grid: &LabelGrid) -> Vec<u8> {
    let mut out = header(grid.width, grid.height);
    for (pix, &l) in grid.labels.iter().enumerate() {
        let rgb = if image.is_valid_at(pix) {
            label_color(l)
        } else {
            [0, 0, 0]
        };
        out.extend_from_slice(&rgb);
    }
    out
}

/// Range view stacked above the panoptic view in one image of height 2H.
pub fn render_stacked(image: &RangeImage, grid: &LabelGrid) -> Vec<u8> {
    let range = render_range(image);
    let labels = render_labels(image, grid);
    let body_len = image.width() * image.height() * 3;
    let mut out = header(image.width(), image.height() * 2);
    out.extend_from_slice(&range[range.len() - body_len..]);
    out.extend_from_slice(&labels[labels.len() - body_len..]);
    out
}
