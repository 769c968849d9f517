//! Oriented-bounding-box algebra.
//!
//! The vertical axis is +z throughout the crate; gravity acts along -z.

pub mod polygon;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Separation below which two faces are considered touching rather than
/// overlapping.
pub const CONTACT_TOLERANCE: f64 = 1e-9;

/// Thickness of the slab standing in for the floor.
pub const FLOOR_THICKNESS: f64 = 0.1;

/// Footprint intersections smaller than this (m²) count as disjoint.
pub const FOOTPRINT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("rotation columns are zero or parallel")]
    DegenerateRotation,
    #[error("scale factor must be positive, got {0}")]
    InvalidScale(f64),
    #[error("box extents must be finite and strictly positive, got {0:?}")]
    InvalidSize([f64; 3]),
    #[error("box center must be finite, got {0:?}")]
    InvalidCenter([f64; 3]),
}

/// Continuous 6D rotation: the first two columns of a rotation matrix before
/// orthonormalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation6D {
    pub a1: Vector3<f64>,
    pub a2: Vector3<f64>,
}

impl Rotation6D {
    pub fn new(a1: Vector3<f64>, a2: Vector3<f64>) -> Self {
        Self { a1, a2 }
    }

    pub fn identity() -> Self {
        Self::new(Vector3::x(), Vector3::y())
    }

    /// Rotation by `yaw` radians about +z.
    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        Self::new(Vector3::new(c, s, 0.0), Vector3::new(-s, c, 0.0))
    }

    /// Encodes the first two columns of `m`.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self::new(m.column(0).into_owned(), m.column(1).into_owned())
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        Self::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.a1.x, self.a1.y, self.a1.z, self.a2.x, self.a2.y, self.a2.z,
        ]
    }

    /// Gram-Schmidt orthonormalization into a proper rotation matrix.
    pub fn to_matrix(&self) -> Result<Matrix3<f64>, GeometryError> {
        rotation_to_matrix(self)
    }

    /// The same rotation re-encoded from its orthonormalized matrix.
    pub fn orthonormalized(&self) -> Result<Self, GeometryError> {
        Ok(Self::from_matrix(&self.to_matrix()?))
    }
}

/// Maps a 6D rotation to a 3x3 rotation matrix whose first two columns are the
/// Gram-Schmidt orthonormalization of `(a1, a2)` and whose third column is their
/// cross product.
pub fn rotation_to_matrix(r: &Rotation6D) -> Result<Matrix3<f64>, GeometryError> {
    let n1 = r.a1.norm();
    let n2 = r.a2.norm();
    if !(n1.is_finite() && n2.is_finite()) || n1 < 1e-12 || n2 < 1e-12 {
        return Err(GeometryError::DegenerateRotation);
    }
    if r.a1.cross(&r.a2).norm() < 1e-9 * n1 * n2 {
        return Err(GeometryError::DegenerateRotation);
    }
    let b1 = r.a1 / n1;
    let b2 = (r.a2 - b1 * b1.dot(&r.a2)).normalize();
    let b3 = b1.cross(&b2);
    Ok(Matrix3::from_columns(&[b1, b2, b3]))
}

/// Ground-plane axis-aligned box used for room boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i])
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
            0.5 * (self.min[2] + self.max[2]),
        )
    }

    pub fn extent(&self) -> Vector3<f64> {
        Vector3::new(
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        )
    }

    pub fn floor_height(&self) -> f64 {
        self.min[2]
    }

    /// True when every corner of `b` lies inside (inclusive, within contact
    /// tolerance).
    pub fn contains_box(&self, b: &OrientedBox) -> bool {
        self.contains_box_ignoring_floor(b) && b.bottom_height() >= self.min[2] - CONTACT_TOLERANCE
    }

    /// As [`Aabb::contains_box`] but without the lower vertical bound.
    pub fn contains_box_ignoring_floor(&self, b: &OrientedBox) -> bool {
        let (lo, hi) = b.world_bounds();
        (0..2).all(|i| {
            lo[i] >= self.min[i] - CONTACT_TOLERANCE && hi[i] <= self.max[i] + CONTACT_TOLERANCE
        }) && hi[2] <= self.max[2] + CONTACT_TOLERANCE
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    /// A thin slab under the whole room whose top is the floor plane. Serves
    /// as the support box of floor-standing objects.
    pub fn floor_slab(&self) -> OrientedBox {
        let c = self.center();
        let e = self.extent();
        OrientedBox::axis_aligned(
            Vector3::new(c.x, c.y, self.min[2] - 0.5 * FLOOR_THICKNESS),
            Vector3::new(e.x, e.y, FLOOR_THICKNESS),
        )
        .expect("valid boundary gives a valid slab")
    }
}

/// An object's pose: center, full extents and orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    center: Vector3<f64>,
    size: Vector3<f64>,
    rotation: Rotation6D,
    basis: Matrix3<f64>,
}

impl OrientedBox {
    pub fn new(
        center: Vector3<f64>,
        size: Vector3<f64>,
        rotation: Rotation6D,
    ) -> Result<Self, GeometryError> {
        if !center.iter().all(|c| c.is_finite()) {
            return Err(GeometryError::InvalidCenter([center.x, center.y, center.z]));
        }
        if !size.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(GeometryError::InvalidSize([size.x, size.y, size.z]));
        }
        let basis = rotation.to_matrix()?;
        Ok(Self {
            center,
            size,
            rotation,
            basis,
        })
    }

    pub fn axis_aligned(center: Vector3<f64>, size: Vector3<f64>) -> Result<Self, GeometryError> {
        Self::new(center, size, Rotation6D::identity())
    }

    pub fn with_yaw(
        center: Vector3<f64>,
        size: Vector3<f64>,
        yaw: f64,
    ) -> Result<Self, GeometryError> {
        Self::new(center, size, Rotation6D::from_yaw(yaw))
    }

    pub fn center(&self) -> &Vector3<f64> {
        &self.center
    }

    pub fn size(&self) -> &Vector3<f64> {
        &self.size
    }

    pub fn half_extents(&self) -> Vector3<f64> {
        self.size * 0.5
    }

    pub fn rotation(&self) -> &Rotation6D {
        &self.rotation
    }

    /// Orthonormal rotation matrix; its columns are the box's local axes.
    pub fn basis(&self) -> &Matrix3<f64> {
        &self.basis
    }

    pub fn volume(&self) -> f64 {
        self.size.x * self.size.y * self.size.z
    }

    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            center: self.center + offset,
            ..*self
        }
    }

    /// Copy with the rotation re-encoded from its orthonormal basis.
    pub fn orthonormalized(&self) -> Self {
        Self {
            rotation: Rotation6D::from_matrix(&self.basis),
            ..*self
        }
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let h = self.half_extents();
        let mut out = [Vector3::zeros(); 8];
        for (i, corner) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -h.x } else { h.x };
            let sy = if i & 2 == 0 { -h.y } else { h.y };
            let sz = if i & 4 == 0 { -h.z } else { h.z };
            *corner = self.center + self.basis * Vector3::new(sx, sy, sz);
        }
        out
    }

    /// World-space axis-aligned bounds of the box.
    pub fn world_bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        let h = self.half_extents();
        let abs = self.basis.abs();
        let r = abs * h;
        (self.center - r, self.center + r)
    }

    pub fn top_height(&self) -> f64 {
        top_surface_height(self)
    }

    pub fn bottom_height(&self) -> f64 {
        bottom_surface_height(self)
    }

    /// Counter-clockwise convex hull of the corners projected onto the ground
    /// plane.
    pub fn footprint(&self) -> Vec<Vector2<f64>> {
        let pts: Vec<Vector2<f64>> = self
            .corners()
            .iter()
            .map(|c| Vector2::new(c.x, c.y))
            .collect();
        polygon::convex_hull(&pts)
    }

    pub fn to_box_vector(&self) -> BoxVector {
        let mut v = [0.0; 12];
        v[0..3].copy_from_slice(self.center.as_slice());
        v[3..6].copy_from_slice(self.size.as_slice());
        v[6..12].copy_from_slice(&self.rotation.to_array());
        BoxVector(v)
    }

    pub fn from_box_vector(v: &BoxVector) -> Result<Self, GeometryError> {
        let a = &v.0;
        Self::new(
            Vector3::new(a[0], a[1], a[2]),
            Vector3::new(a[3], a[4], a[5]),
            Rotation6D::from_array([a[6], a[7], a[8], a[9], a[10], a[11]]),
        )
    }
}

/// Concatenation `[center(3), size(3), rotation(6)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxVector(pub [f64; 12]);

impl BoxVector {
    pub const DIM: usize = 12;

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        <[f64; 12]>::try_from(v).ok().map(BoxVector)
    }
}

impl AsRef<[f64]> for BoxVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Serialize, Deserialize)]
struct BoxRecord {
    center: [f64; 3],
    size: [f64; 3],
    rotation: [f64; 6],
}

impl Serialize for OrientedBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BoxRecord {
            center: [self.center.x, self.center.y, self.center.z],
            size: [self.size.x, self.size.y, self.size.z],
            rotation: self.rotation.to_array(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrientedBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = BoxRecord::deserialize(d)?;
        OrientedBox::new(
            Vector3::from(r.center),
            Vector3::from(r.size),
            Rotation6D::from_array(r.rotation),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Separating-axis test over the 15 candidate axes. Boxes whose separation
/// along some axis is within [`CONTACT_TOLERANCE`] of touching do not
/// intersect.
pub fn obb_intersects(a: &OrientedBox, b: &OrientedBox) -> bool {
    let t = b.center - a.center;
    let ha = a.half_extents();
    let hb = b.half_extents();
    let axes_a = [
        a.basis.column(0).into_owned(),
        a.basis.column(1).into_owned(),
        a.basis.column(2).into_owned(),
    ];
    let axes_b = [
        b.basis.column(0).into_owned(),
        b.basis.column(1).into_owned(),
        b.basis.column(2).into_owned(),
    ];

    let separated_along = |axis: &Vector3<f64>| -> bool {
        let ra: f64 = (0..3).map(|i| ha[i] * axes_a[i].dot(axis).abs()).sum();
        let rb: f64 = (0..3).map(|i| hb[i] * axes_b[i].dot(axis).abs()).sum();
        t.dot(axis).abs() >= ra + rb - CONTACT_TOLERANCE
    };

    if axes_a.iter().any(&separated_along) || axes_b.iter().any(&separated_along)
    {
        return false;
    }
    for ea in &axes_a {
        for eb in &axes_b {
            let c = ea.cross(eb);
            let n = c.norm();
            // Near-parallel edge pairs are covered by the face axes.
            if n < 1e-9 {
                continue;
            }
            if separated_along(&(c / n)) {
                return false;
            }
        }
    }
    true
}

/// Scales all three extents by `k` about the unchanged center.
pub fn expand_box(b: &OrientedBox, k: f64) -> Result<OrientedBox, GeometryError> {
    if !(k.is_finite() && k > 0.0) {
        return Err(GeometryError::InvalidScale(k));
    }
    Ok(OrientedBox {
        size: b.size * k,
        ..*b
    })
}

pub fn top_surface_height(b: &OrientedBox) -> f64 {
    b.center.z + (b.basis.row(2).abs() * b.half_extents())[0]
}

pub fn bottom_surface_height(b: &OrientedBox) -> f64 {
    b.center.z - (b.basis.row(2).abs() * b.half_extents())[0]
}

/// Area of the intersection of the two ground-plane footprints divided by the
/// footprint area of `upper`.
pub fn horizontal_overlap_ratio(lower: &OrientedBox, upper: &OrientedBox) -> f64 {
    let up = upper.footprint();
    let up_area = polygon::area(&up);
    if up_area <= f64::MIN_POSITIVE {
        return 0.0;
    }
    let inter = polygon::intersection_area(&up, &lower.footprint());
    (inter / up_area).clamp(0.0, 1.0)
}

/// Footprint intersection area of two boxes.
pub fn footprint_overlap_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    polygon::intersection_area(&a.footprint(), &b.footprint())
}

/// Drops (or lifts) `candidate` vertically onto the highest top surface
/// under its footprint. Eligible surfaces overlap the footprint and have
/// their top at or below the candidate's center; `floor`, when given, is
/// always eligible. Returns `None` when nothing is eligible. A candidate
/// already resting within [`CONTACT_TOLERANCE`] comes back unchanged.
pub fn rest_on<'a>(
    candidate: &OrientedBox,
    surfaces: impl IntoIterator<Item = &'a OrientedBox>,
    floor: Option<f64>,
) -> Option<OrientedBox> {
    let cz = candidate.center.z + CONTACT_TOLERANCE;
    let best = surfaces
        .into_iter()
        .filter(|s| {
            let top = top_surface_height(s);
            top <= cz && footprint_overlap_area(s, candidate) > FOOTPRINT_EPS
        })
        .map(top_surface_height)
        .chain(floor)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))?;
    let gap = bottom_surface_height(candidate) - best;
    if gap.abs() <= CONTACT_TOLERANCE {
        return Some(*candidate);
    }
    Some(candidate.translated(&Vector3::new(0.0, 0.0, -gap)))
}

/// Inclusive point containment, boundary within [`CONTACT_TOLERANCE`].
pub fn contains_point(b: &OrientedBox, p: &Vector3<f64>) -> bool {
    let local = b.basis.transpose() * (p - b.center);
    let h = b.half_extents();
    (0..3).all(|i| local[i].abs() <= h[i] + CONTACT_TOLERANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn unit_at(x: f64, y: f64, z: f64) -> OrientedBox {
        OrientedBox::axis_aligned(Vector3::new(x, y, z), Vector3::new(1.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn identity_rotation() {
        let m = rotation_to_matrix(&Rotation6D::identity()).unwrap();
        assert_eq!(m, Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_vertical() {
        let r = Rotation6D::from_array([0.0, 1.0, 0.0, -1.0, 0.0, 0.0]);
        let m = rotation_to_matrix(&r).unwrap();
        // Rodrigues' formula for axis z, angle pi/2.
        let k = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        let (s, c) = FRAC_PI_2.sin_cos();
        let oracle = Matrix3::identity() + k * s + k * k * (1.0 - c);
        assert!((m - oracle).abs().max() < 1e-12);
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((m - expected).abs().max() < 1e-12);
    }

    #[test]
    fn degenerate_rotations_rejected() {
        let parallel = Rotation6D::from_array([1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        assert_eq!(
            rotation_to_matrix(&parallel),
            Err(GeometryError::DegenerateRotation)
        );
        let zero = Rotation6D::from_array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(
            rotation_to_matrix(&zero),
            Err(GeometryError::DegenerateRotation)
        );
    }

    #[test]
    fn intersection_basics() {
        assert!(obb_intersects(&unit_at(0.0, 0.0, 0.0), &unit_at(0.0, 0.0, 0.0)));
        assert!(!obb_intersects(&unit_at(0.0, 0.0, 0.0), &unit_at(2.0, 0.0, 0.0)));
        // Face contact is not a collision.
        assert!(!obb_intersects(&unit_at(0.0, 0.0, 0.0), &unit_at(1.0, 0.0, 0.0)));
        assert!(!obb_intersects(&unit_at(0.0, 0.0, 0.0), &unit_at(0.0, 0.0, 1.0)));
        assert!(obb_intersects(&unit_at(0.0, 0.0, 0.0), &unit_at(0.999, 0.0, 0.0)));
    }

    #[test]
    fn rotated_box_edge_case() {
        // A 45 degree yawed unit box reaches sqrt(2)/2 along x.
        let a = unit_at(0.0, 0.0, 0.0);
        let b = OrientedBox::with_yaw(Vector3::new(1.2, 0.0, 0.0), Vector3::new(1.0, 1.0, 1.0), std::f64::consts::FRAC_PI_4).unwrap();
        assert!(obb_intersects(&a, &b));
        let c = b.translated(&Vector3::new(0.02, 0.0, 0.0));
        assert!(!obb_intersects(&a, &c));
    }

    #[test]
    fn expand_examples() {
        let b = OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 1.0, 0.1)).unwrap();
        assert_eq!(expand_box(&b, 1.0).unwrap(), b);
        let e = expand_box(&b, 1.5).unwrap();
        assert!((e.size() - Vector3::new(1.5, 1.5, 0.15)).norm() < 1e-15);
        assert_eq!(e.center(), b.center());
        assert_eq!(expand_box(&b, 0.0), Err(GeometryError::InvalidScale(0.0)));
        assert!(expand_box(&b, -1.0).is_err());

        let unit = unit_at(0.0, 0.0, 0.0);
        let p = Vector3::new(0.6, 0.0, 0.0);
        assert!(!contains_point(&unit, &p));
        assert!(contains_point(&expand_box(&unit, 1.5).unwrap(), &p));
    }

    #[test]
    fn surface_heights() {
        let b = OrientedBox::axis_aligned(Vector3::new(0.0, 0.0, 0.5), Vector3::new(2.0, 1.0, 1.0)).unwrap();
        assert!((b.top_height() - 1.0).abs() < 1e-15);
        assert!(b.bottom_height().abs() < 1e-15);
        let yawed = OrientedBox::with_yaw(*b.center(), *b.size(), FRAC_PI_2).unwrap();
        assert!((yawed.top_height() - 1.0).abs() < 1e-12);
        assert!(yawed.bottom_height().abs() < 1e-12);

        let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
        let tilt = Rotation6D::new(Vector3::x(), Vector3::new(0.0, c, s));
        let tilted = OrientedBox::new(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0), tilt).unwrap();
        let corner_max = tilted.corners().iter().map(|p| p.z).fold(f64::MIN, f64::max);
        assert!((tilted.top_height() - corner_max).abs() < 1e-12);
        assert!((tilted.top_height() - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn overlap_ratio_examples() {
        let lower = unit_at(0.0, 0.0, 0.0);
        assert!((horizontal_overlap_ratio(&lower, &unit_at(0.0, 0.0, 1.0)) - 1.0).abs() < 1e-12);
        assert!((horizontal_overlap_ratio(&lower, &unit_at(0.5, 0.0, 1.0)) - 0.5).abs() < 1e-12);
        assert_eq!(horizontal_overlap_ratio(&lower, &unit_at(3.0, 0.0, 1.0)), 0.0);
        let small = OrientedBox::axis_aligned(Vector3::new(0.1, 0.1, 1.0), Vector3::new(0.2, 0.2, 0.2)).unwrap();
        assert!((horizontal_overlap_ratio(&lower, &small) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_containment() {
        let b = unit_at(0.0, 0.0, 0.0);
        assert!(contains_point(&b, &Vector3::zeros()));
        assert!(contains_point(&b, &Vector3::new(0.5, 0.5, 0.5)));
        assert!(!contains_point(&b, &Vector3::new(0.501, 0.0, 0.0)));
    }

    #[test]
    fn box_vector_round_trip() {
        let b = OrientedBox::new(
            Vector3::new(1.0, -2.0, 0.3),
            Vector3::new(0.4, 0.5, 0.6),
            Rotation6D::from_array([0.9, 0.1, 0.0, -0.2, 1.1, 0.05]),
        )
        .unwrap();
        let back = OrientedBox::from_box_vector(&b.to_box_vector()).unwrap();
        assert_eq!(back, b);
        assert_eq!(b.corners().len(), 8);
        assert!((b.volume() - 0.12).abs() < 1e-15);
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 0.0, 1.0)).is_err());
        assert!(OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(1.0, f64::NAN, 1.0)).is_err());
    }
}
