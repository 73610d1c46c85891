//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single LiDAR return. Coordinates are meters in the frame of whatever
/// owns the point (sensor frame for a [`Scan`], newest-scan frame inside a
/// trio). The range is derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    #[inline]
    pub fn range(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    #[inline]
    pub fn xyz(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.intensity.is_finite()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (self.xyz() - other.xyz()).norm()
    }
}

/// One sweep of the sensor. Point order is significant: label files are
/// positional.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scan {
    pub points: Vec<Point3>,
    pub scan_index: u32,
    pub timestamp: f64,
}

impl Scan {
    pub fn new(scan_index: u32, points: Vec<Point3>) -> Self {
        Self {
            points,
            scan_index,
            timestamp: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Semantic class plus instance id. Instance 0 means "no instance"; stuff
/// classes always carry instance 0.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct PanopticLabel {
    pub class: u16,
    pub instance: u32,
}

impl PanopticLabel {
    /// Label for unobserved pixels and points that could not be labeled.
    pub const VOID: PanopticLabel = PanopticLabel {
        class: 0,
        instance: 0,
    };

    pub const fn new(class: u16, instance: u32) -> Self {
        Self { class, instance }
    }

    pub const fn stuff(class: u16) -> Self {
        Self { class, instance: 0 }
    }

    /// `(instance << 16) | class` without the 16-bit range check. Used as a
    /// total order for tie breaking.
    #[inline]
    pub fn sort_key(&self) -> u64 {
        ((self.instance as u64) << 16) | self.class as u64
    }
}

impl fmt::Display for PanopticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.class, self.instance)
    }
}

/// Packs a label as `(instance << 16) | class`.
pub fn pack_label(label: PanopticLabel) -> Result<u32> {
    if label.instance > u16::MAX as u32 {
        return Err(Error::Range(format!(
            "instance id {} does not fit in 16 bits",
            label.instance
        )));
    }
    Ok((label.instance << 16) | label.class as u32)
}

pub fn unpack_label(packed: u32) -> PanopticLabel {
    PanopticLabel {
        class: (packed & 0xFFFF) as u16,
        instance: packed >> 16,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassKind {
    Stuff,
    Thing,
    /// Excluded from evaluation.
    Void,
}

impl ClassKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassKind::Stuff => "stuff",
            ClassKind::Thing => "thing",
            ClassKind::Void => "void",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    names: Vec<String>,
    kinds: Vec<ClassKind>,
}

impl Taxonomy {
    pub fn new(entries: Vec<(String, ClassKind)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("taxonomy has no classes".into()));
        }
        if entries.len() > u16::MAX as usize + 1 {
            return Err(Error::Range(format!(
                "{} classes exceed the 16-bit class field",
                entries.len()
            )));
        }
        if entries
            .iter()
            .filter(|(_, k)| *k == ClassKind::Void)
            .count()
            > 1
        {
            return Err(Error::Config(
                "taxonomy declares more than one void class".into(),
            ));
        }
        let (names, kinds) = entries.into_iter().unzip();
        Ok(Self { names, kinds })
    }

    /// Seventeen classes: `noise` (void), six stuff classes and ten thing
    /// classes, in the layout used by the panoptic nuScenes benchmark.
    pub fn panoptic_default() -> Self {
        use ClassKind::*;
        let entries = [
            ("noise", Void),
            ("driveable_surface", Stuff),
            ("other_flat", Stuff),
            ("sidewalk", Stuff),
            ("terrain", Stuff),
            ("manmade", Stuff),
            ("vegetation", Stuff),
            ("barrier", Thing),
            ("bicycle", Thing),
            ("bus", Thing),
            ("car", Thing),
            ("construction_vehicle", Thing),
            ("motorcycle", Thing),
            ("pedestrian", Thing),
            ("traffic_cone", Thing),
            ("trailer", Thing),
            ("truck", Thing),
        ];
        Self::new(entries.iter().map(|(n, k)| (n.to_string(), *k)).collect())
            .expect("default taxonomy is valid")
    }

    pub fn class_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, class: u16) -> Option<ClassKind> {
        self.kinds.get(class as usize).copied()
    }

    pub fn name(&self, class: u16) -> Option<&str> {
        self.names.get(class as usize).map(String::as_str)
    }

    pub fn class_by_name(&self, name: &str) -> Option<u16> {
        self.names.iter().position(|n| n == name).map(|i| i as u16)
    }

    pub fn is_thing(&self, class: u16) -> bool {
        self.kind(class) == Some(ClassKind::Thing)
    }

    pub fn is_stuff(&self, class: u16) -> bool {
        self.kind(class) == Some(ClassKind::Stuff)
    }

    pub fn is_void(&self, class: u16) -> bool {
        self.kind(class) == Some(ClassKind::Void)
    }

    pub fn void_class(&self) -> Option<u16> {
        self.kinds
            .iter()
            .position(|k| *k == ClassKind::Void)
            .map(|i| i as u16)
    }

    /// The label written for pixels or points nothing could be said about.
    pub fn void_label(&self) -> PanopticLabel {
        PanopticLabel::stuff(self.void_class().unwrap_or(0))
    }

    pub fn thing_classes(&self) -> impl Iterator<Item = u16> + '_ {
        self.classes_of(ClassKind::Thing)
    }

    pub fn stuff_classes(&self) -> impl Iterator<Item = u16> + '_ {
        self.classes_of(ClassKind::Stuff)
    }

    /// Classes that take part in evaluation (everything but void).
    pub fn evaluated_classes(&self) -> impl Iterator<Item = u16> + '_ {
        (0..self.kinds.len() as u16).filter(move |&c| !self.is_void(c))
    }

    fn classes_of(&self, kind: ClassKind) -> impl Iterator<Item = u16> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(move |(_, k)| **k == kind)
            .map(|(i, _)| i as u16)
    }

    pub fn entries(&self) -> impl Iterator<Item = (u16, &str, ClassKind)> + '_ {
        self.names
            .iter()
            .zip(&self.kinds)
            .enumerate()
            .map(|(i, (n, k))| (i as u16, n.as_str(), *k))
    }

    /// Checks a label against the taxonomy: known class, stuff carries no
    /// instance.
    pub fn check_label(&self, label: PanopticLabel) -> Result<()> {
        match self.kind(label.class) {
            None => Err(Error::Data(format!(
                "class {} outside taxonomy of {} classes",
                label.class,
                self.class_count()
            ))),
            Some(ClassKind::Thing) => Ok(()),
            Some(_) if label.instance != 0 => Err(Error::Data(format!(
                "non-thing class {} carries instance {}",
                label.class, label.instance
            ))),
            Some(_) => Ok(()),
        }
    }
}

/// Sensor-to-world rigid transform: `p_world = R * p_sensor + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Orthonormality tolerance of a constructed pose.
pub const POSE_TOLERANCE: f64 = 1e-6;

impl RigidPose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let err = orthonormality_error(&rotation);
        if !(err <= POSE_TOLERANCE) || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::Data(format!(
                "rotation is not orthonormal (deviation {err:.3e})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Accepts a rotation that deviates from orthonormal by at most
    /// `tolerance` and projects it back onto SO(3).
    pub fn new_reorthonormalized(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        tolerance: f64,
    ) -> Result<Self> {
        let err = orthonormality_error(&rotation);
        if !(err <= tolerance) {
            return Err(Error::Data(format!(
                "rotation is not orthonormal (deviation {err:.3e} > {tolerance:.0e})"
            )));
        }
        if err <= f64::EPSILON * 8.0 {
            return Self::new(rotation, translation);
        }
        let svd = rotation.svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        Self::new(u * v_t, translation)
    }

    /// Yaw about +z followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vector3<f64>) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    #[inline]
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v + self.translation
    }

    #[inline]
    pub fn apply_point(&self, p: &Point3) -> Point3 {
        let v = self.apply(&p.xyz());
        Point3::new(v.x, v.y, v.z, p.intensity)
    }

    /// Row-major 3x4 `[R | t]`.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }
}

impl Mul for RigidPose {
    type Output = RigidPose;

    fn mul(self, rhs: RigidPose) -> RigidPose {
        RigidPose {
            rotation: self.rotation * rhs.rotation,
            translation: self.rotation * rhs.translation + self.translation,
        }
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

/// Largest of `|RᵀR − I|` (max-abs entry) and `|det R − 1|`.
pub fn orthonormality_error(rotation: &Matrix3<f64>) -> f64 {
    let gram = rotation.transpose() * rotation - Matrix3::identity();
    let off = gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    off.max((rotation.determinant() - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pack_examples() {
        assert_eq!(pack_label(PanopticLabel::new(10, 2)).unwrap(), 131082);
        assert_eq!(pack_label(PanopticLabel::new(0, 0)).unwrap(), 0);
        assert_eq!(unpack_label(131082), PanopticLabel::new(10, 2));
    }

    #[test]
    fn pack_rejects_wide_instance() {
        assert!(matches!(
            pack_label(PanopticLabel::new(1, 65536)),
            Err(Error::Range(_))
        ));
        assert_eq!(
            pack_label(PanopticLabel::new(u16::MAX, 65535)).unwrap(),
            u32::MAX
        );
    }

    proptest! {
        #[test]
        fn pack_is_a_bijection(class in 0u16.., instance in 0u32..65536) {
            let l = PanopticLabel::new(class, instance);
            prop_assert_eq!(unpack_label(pack_label(l).unwrap()), l);
        }

        #[test]
        fn unpack_then_pack_is_identity(packed in any::<u32>()) {
            prop_assert_eq!(pack_label(unpack_label(packed)).unwrap(), packed);
        }
    }

    #[test]
    fn default_taxonomy_partition() {
        let t = Taxonomy::panoptic_default();
        assert_eq!(t.class_count(), 17);
        assert_eq!(t.stuff_classes().count(), 6);
        assert_eq!(t.thing_classes().count(), 10);
        assert_eq!(t.void_class(), Some(0));
        assert!(t.is_thing(t.class_by_name("car").unwrap()));
        assert!(t.check_label(PanopticLabel::new(1, 3)).is_err());
        assert!(t.check_label(PanopticLabel::new(17, 0)).is_err());
    }

    #[test]
    fn pose_rejects_skewed_rotation() {
        let mut r = Matrix3::identity();
        r[(0, 1)] = 1e-3;
        assert!(RigidPose::new(r, Vector3::zeros()).is_err());
        let fixed = RigidPose::new_reorthonormalized(r, Vector3::zeros(), 1e-2).unwrap();
        assert!(orthonormality_error(fixed.rotation()) < 1e-12);
    }

    #[test]
    fn pose_inverse_composes_to_identity() {
        let p = RigidPose::from_yaw(0.7, Vector3::new(1.0, -2.0, 0.5));
        let id = p * p.inverse();
        assert!((id.rotation() - Matrix3::identity()).norm() < 1e-12);
        assert!(id.translation().norm() < 1e-12);
    }
}
