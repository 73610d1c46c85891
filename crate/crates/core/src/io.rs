//! Binary and text file formats, plus the on-disk sequence layout:
//!
//! ```text
//! <seq_dir>/scans/NNNNNN.bin     little-endian f32 x, y, z, intensity per point
//! <seq_dir>/labels/NNNNNN.label  little-endian u32 packed label per point
//! <seq_dir>/poses.txt            one row-major 3x4 sensor-to-world pose per line
//! <seq_dir>/taxonomy.txt         index,name,thing|stuff|void
//! <seq_dir>/pred/NNNNNN.logits   segmenter outputs, see `oracle`
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::types::{
    pack_label, unpack_label, ClassKind, PanopticLabel, Point3, RigidPose, Scan, Taxonomy,
};

const POINT_RECORD: usize = 16;
const LABEL_RECORD: usize = 4;

/// Rotations read from pose files may deviate from orthonormal by this much
/// before they are rejected; accepted ones are re-orthonormalized.
pub const POSE_FILE_TOLERANCE: f64 = 1e-4;

pub fn frame_name(index: u32, ext: &str) -> String {
    format!("{index:06}.{ext}")
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Lookup(format!("{} does not exist", path.display())),
        _ => Error::io(path, e),
    })
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn index_from_stem(path: &Path) -> u32 {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

pub fn decode_scan(bytes: &[u8], scan_index: u32) -> Result<Scan> {
    if bytes.len() % POINT_RECORD != 0 {
        return Err(Error::Format(format!(
            "scan size {} is not a multiple of {POINT_RECORD} bytes",
            bytes.len()
        )));
    }
    let mut clamped = 0usize;
    let mut points = Vec::with_capacity(bytes.len() / POINT_RECORD);
    for (i, rec) in bytes.chunks_exact(POINT_RECORD).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap()) as f64;
        let mut p = Point3::new(f(0), f(1), f(2), f(3));
        if !p.is_finite() {
            return Err(Error::Data(format!("point {i} has a non-finite value")));
        }
        if !(0.0..=1.0).contains(&p.intensity) {
            p.intensity = p.intensity.clamp(0.0, 1.0);
            clamped += 1;
        }
        points.push(p);
    }
    if clamped > 0 {
        log::warn!("scan {scan_index}: clamped {clamped} intensities into [0, 1]");
    }
    Ok(Scan::new(scan_index, points))
}

pub fn encode_scan(scan: &Scan) -> Vec<u8> {
    let mut out = Vec::with_capacity(scan.len() * POINT_RECORD);
    for p in &scan.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Reads a scan; the scan index is taken from a numeric file stem.
pub fn load_scan(path: &Path) -> Result<Scan> {
    let bytes = read(path)?;
    decode_scan(&bytes, index_from_stem(path)).map_err(|e| with_path(e, path))
}

pub fn save_scan(path: &Path, scan: &Scan) -> Result<()> {
    write_atomic(path, &encode_scan(scan))
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<PanopticLabel>> {
    if bytes.len() % LABEL_RECORD != 0 {
        return Err(Error::Format(format!(
            "label file size {} is not a multiple of {LABEL_RECORD} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(LABEL_RECORD)
        .map(|c| unpack_label(u32::from_le_bytes(c.try_into().unwrap())))
        .collect())
}

pub fn encode_labels(labels: &[PanopticLabel]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(labels.len() * LABEL_RECORD);
    for l in labels {
        out.extend_from_slice(&pack_label(*l)?.to_le_bytes());
    }
    Ok(out)
}

/// Reads a label file that must pair with a scan of `expected_count` points.
pub fn load_labels(path: &Path, expected_count: usize) -> Result<Vec<PanopticLabel>> {
    let labels = load_labels_unchecked(path)?;
    if labels.len() != expected_count {
        return Err(Error::Consistency(format!(
            "{}: {} labels for a scan of {} points",
            path.display(),
            labels.len(),
            expected_count
        )));
    }
    Ok(labels)
}

pub fn load_labels_unchecked(path: &Path) -> Result<Vec<PanopticLabel>> {
    decode_labels(&read(path)?).map_err(|e| with_path(e, path))
}

pub fn save_labels(path: &Path, labels: &[PanopticLabel]) -> Result<()> {
    write_atomic(path, &encode_labels(labels)?)
}

pub fn parse_poses(text: &str) -> Result<Vec<RigidPose>> {
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let vals = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::Format(format!("line {}: `{t}` is not a number", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 12 {
            return Err(Error::Format(format!(
                "line {}: expected 12 values, found {}",
                lineno + 1,
                vals.len()
            )));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "line {}: non-finite pose entry",
                lineno + 1
            )));
        }
        let rot = Matrix3::new(
            vals[0], vals[1], vals[2], vals[4], vals[5], vals[6], vals[8], vals[9], vals[10],
        );
        let t = Vector3::new(vals[3], vals[7], vals[11]);
        let pose = RigidPose::new_reorthonormalized(rot, t, POSE_FILE_TOLERANCE)
            .map_err(|e| Error::Data(format!("line {}: {e}", lineno + 1)))?;
        poses.push(pose);
    }
    Ok(poses)
}

pub fn format_poses(poses: &[RigidPose]) -> String {
    let mut out = String::new();
    for p in poses {
        let row: Vec<String> = p.to_row_major().iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn load_poses(path: &Path) -> Result<Vec<RigidPose>> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
    parse_poses(&text).map_err(|e| with_path(e, path))
}

pub fn save_poses(path: &Path, poses: &[RigidPose]) -> Result<()> {
    write_atomic(path, format_poses(poses).as_bytes())
}

pub fn parse_taxonomy(text: &str) -> Result<Taxonomy> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Format(format!(
                "taxonomy line {}: expected index,name,kind",
                lineno + 1
            )));
        }
        let index: usize = fields[0].parse().map_err(|_| {
            Error::Format(format!(
                "taxonomy line {}: bad index `{}`",
                lineno + 1,
                fields[0]
            ))
        })?;
        if index != entries.len() {
            return Err(Error::Format(format!(
                "taxonomy line {}: index {index} out of order (expected {})",
                lineno + 1,
                entries.len()
            )));
        }
        let kind = match fields[2] {
            "thing" => ClassKind::Thing,
            "stuff" => ClassKind::Stuff,
            "void" => ClassKind::Void,
            other => {
                return Err(Error::Format(format!(
                    "taxonomy line {}: unknown kind `{other}`",
                    lineno + 1
                )))
            }
        };
        entries.push((fields[1].to_string(), kind));
    }
    Taxonomy::new(entries)
}

pub fn format_taxonomy(taxonomy: &Taxonomy) -> String {
    taxonomy
        .entries()
        .map(|(i, name, kind)| format!("{i},{name},{}\n", kind.as_str()))
        .collect()
}

pub fn load_taxonomy(path: &Path) -> Result<Taxonomy> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
    parse_taxonomy(&text).map_err(|e| with_path(e, path))
}

pub fn save_taxonomy(path: &Path, taxonomy: &Taxonomy) -> Result<()> {
    write_atomic(path, format_taxonomy(taxonomy).as_bytes())
}

fn with_path(e: Error, path: &Path) -> Error {
    let p = path.display();
    match e {
        Error::Format(m) => Error::Format(format!("{p}: {m}")),
        Error::Data(m) => Error::Data(format!("{p}: {m}")),
        other => other,
    }
}

/// Sorted frame indices of `NNNNNN.<ext>` files in `dir`.
pub fn list_frames(dir: &Path, ext: &str) -> Result<Vec<u32>> {
    let rd = fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Lookup(format!("{} does not exist", dir.display())),
        _ => Error::io(dir, e),
    })?;
    let mut out = Vec::new();
    for entry in rd {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some(ext) {
            continue;
        }
        if let Some(idx) = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.parse().ok())
        {
            out.push(idx);
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Paths of one sequence directory.
#[derive(Debug, Clone)]
pub struct SequenceDir {
    root: PathBuf,
}

impl SequenceDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn scans_dir(&self) -> PathBuf {
        self.root.join("scans")
    }

    pub fn labels_dir(&self) -> PathBuf {
        self.root.join("labels")
    }

    pub fn pred_dir(&self) -> PathBuf {
        self.root.join("pred")
    }

    pub fn scan_path(&self, index: u32) -> PathBuf {
        self.scans_dir().join(frame_name(index, "bin"))
    }

    pub fn label_path(&self, index: u32) -> PathBuf {
        self.labels_dir().join(frame_name(index, "label"))
    }

    pub fn poses_path(&self) -> PathBuf {
        self.root.join("poses.txt")
    }

    pub fn taxonomy_path(&self) -> PathBuf {
        self.root.join("taxonomy.txt")
    }

    pub fn frames(&self) -> Result<Vec<u32>> {
        list_frames(&self.scans_dir(), "bin")
    }

    pub fn load_scan(&self, index: u32) -> Result<Scan> {
        load_scan(&self.scan_path(index))
    }

    pub fn load_labels(&self, index: u32, expected_count: usize) -> Result<Vec<PanopticLabel>> {
        load_labels(&self.label_path(index), expected_count)
    }

    pub fn load_poses(&self) -> Result<Vec<RigidPose>> {
        load_poses(&self.poses_path())
    }

    pub fn load_taxonomy(&self) -> Result<Taxonomy> {
        load_taxonomy(&self.taxonomy_path())
    }

    /// All scans in index order. Indices must be 0..N without gaps.
    pub fn load_scans(&self) -> Result<Vec<Scan>> {
        let frames = self.frames()?;
        for (expect, got) in frames.iter().enumerate() {
            if *got != expect as u32 {
                return Err(Error::Sequence(format!(
                    "{}: scan {expect:06} is missing",
                    self.scans_dir().display()
                )));
            }
        }
        frames.iter().map(|&i| self.load_scan(i)).collect()
    }
}
