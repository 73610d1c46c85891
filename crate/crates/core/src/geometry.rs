//! Rigid transforms and ego-motion-compensated accumulation of consecutive
//! scans into the newest scan's frame.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::types::{Point3, RigidPose, Scan};

/// Number of scans accumulated per clip.
pub const TRIO_LEN: usize = 3;

pub fn transform_points(points: &[Point3], pose: &RigidPose) -> Vec<Point3> {
    points.iter().map(|p| pose.apply_point(p)).collect()
}

/// Where a merged point came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Provenance {
    pub scan_index: u32,
    pub point_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Member {
    pub scan_index: u32,
    /// Offset of this scan's first point in the merged list.
    pub offset: usize,
    pub len: usize,
}

impl Member {
    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len
    }
}

/// Scans merged oldest-first into the newest scan's frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Trio {
    pub reference_index: u32,
    pub points: Vec<Point3>,
    pub provenance: Vec<Provenance>,
    members: Vec<Member>,
}

impl Trio {
    /// Accumulates any number of consecutive scans (oldest first) into the
    /// last scan's frame.
    pub fn accumulate(scans: &[&Scan], poses: &[&RigidPose]) -> Result<Self> {
        if scans.is_empty() {
            return Err(Error::Sequence("cannot accumulate zero scans".into()));
        }
        if scans.len() != poses.len() {
            return Err(Error::Consistency(format!(
                "{} scans paired with {} poses",
                scans.len(),
                poses.len()
            )));
        }
        for w in scans.windows(2) {
            if w[1].scan_index != w[0].scan_index + 1 {
                return Err(Error::Sequence(format!(
                    "scan indices {} and {} are not consecutive",
                    w[0].scan_index, w[1].scan_index
                )));
            }
        }
        let newest = scans.len() - 1;
        let world_to_ref = poses[newest].inverse();
        let total = scans.iter().map(|s| s.len()).sum();
        let mut points = Vec::with_capacity(total);
        let mut provenance = Vec::with_capacity(total);
        let mut members = Vec::with_capacity(scans.len());
        for (k, (scan, pose)) in scans.iter().zip(poses).enumerate() {
            members.push(Member {
                scan_index: scan.scan_index,
                offset: points.len(),
                len: scan.len(),
            });
            if k == newest {
                points.extend_from_slice(&scan.points);
            } else {
                let rel = world_to_ref * **pose;
                points.extend(scan.points.iter().map(|p| rel.apply_point(p)));
            }
            provenance.extend((0..scan.len() as u32).map(|i| Provenance {
                scan_index: scan.scan_index,
                point_index: i,
            }));
        }
        Ok(Self {
            reference_index: scans[newest].scan_index,
            points,
            provenance,
            members,
        })
    }

    /// A clip holding one scan, untransformed.
    pub fn single(scan: &Scan) -> Self {
        Self::accumulate(&[scan], &[&RigidPose::identity()]).expect("one scan always accumulates")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Member scans, oldest first.
    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn member(&self, scan_index: u32) -> Option<&Member> {
        self.members.iter().find(|m| m.scan_index == scan_index)
    }

    /// Splits a per-merged-point vector back into per-scan vectors, oldest
    /// first, in source point order.
    pub fn segregate<T: Clone>(&self, per_point: &[T]) -> Result<Vec<Vec<T>>> {
        if per_point.len() != self.points.len() {
            return Err(Error::Consistency(format!(
                "{} values for a clip of {} points",
                per_point.len(),
                self.points.len()
            )));
        }
        Ok(self
            .members
            .iter()
            .map(|m| per_point[m.range()].to_vec())
            .collect())
    }
}

/// Merges three consecutive scans (oldest first) with their sensor-to-world
/// poses into the newest scan's frame via `T_t⁻¹ · T_{t−k}`.
pub fn build_trio(scans: [&Scan; TRIO_LEN], poses: [&RigidPose; TRIO_LEN]) -> Result<Trio> {
    Trio::accumulate(&scans, &poses)
}
