//! Per-relation statistical layout predictor.
//!
//! Dependent boxes are modeled in the support anchor's canonical frame, where
//! the support box becomes the cube `[-0.5, 0.5]^3`. A table maps each
//! `(support, functional, dependent)` category triple to a mixture fitted in
//! that frame; predictions are mapped back through the actual support box.

pub mod io;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::RelationTupleRecord;
use crate::geometry::{BoxVector, GeometryError, OrientedBox, Rotation6D};
use crate::mol::{fit_em, FitOptions, LogisticComponent, MixtureOfLogistics, MolError};
use crate::seed::{derive_seed, fnv1a};

pub use io::{load_params, parse_table, save_params, write_table};

/// Default minimum number of tuples per fitted key.
pub const DEFAULT_MIN_COUNT: usize = 8;

/// Allowed deviation of the snapped asset volume from the sampled volume.
pub const SIZE_SNAP_VOLUME_TOLERANCE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("support box has a vanishing extent")]
    DegenerateFrame,
    #[error("no predictor entry for {0}")]
    UnknownRelation(RelationKey),
    #[error("no relation tuples to fit")]
    InsufficientData,
    #[error("sampled box is invalid: {0}")]
    InvalidSample(#[from] GeometryError),
    #[error(transparent)]
    Mixture(#[from] MolError),
    #[error("invalid category label `{0}`")]
    InvalidLabel(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] crate::mol::io::ParseError),
}

/// Conditioning context discretized by category labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationKey {
    pub support: String,
    pub functional: Option<String>,
    pub dependent: String,
}

impl RelationKey {
    pub fn new(support: &str, functional: Option<&str>, dependent: &str) -> Self {
        Self {
            support: support.to_string(),
            functional: functional.map(str::to_string),
            dependent: dependent.to_string(),
        }
    }

    /// The same relation without the functional anchor.
    pub fn coarse(&self) -> Self {
        Self {
            functional: None,
            ..self.clone()
        }
    }

    pub fn is_coarse(&self) -> bool {
        self.functional.is_none()
    }
}

impl fmt::Display for RelationKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            self.support,
            self.functional.as_deref().unwrap_or("-"),
            self.dependent
        )
    }
}

/// Affine map taking the support box onto the canonical cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    /// Per-axis scale, the reciprocal of the support extents.
    pub scale: Vector3<f64>,
}

impl LocalFrame {
    pub fn of_support(support: &OrientedBox) -> Result<Self, PredictorError> {
        let size = support.size();
        if size.iter().any(|s| !(s.is_finite() && *s > 1e-12)) {
            return Err(PredictorError::DegenerateFrame);
        }
        Ok(Self {
            origin: *support.center(),
            rotation: *support.basis(),
            scale: size.map(|s| 1.0 / s),
        })
    }

    pub fn point_to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (self.rotation.transpose() * (p - self.origin)).component_mul(&self.scale)
    }

    pub fn point_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.origin + self.rotation * p.component_div(&self.scale)
    }
}

/// Dependent box expressed in the support's canonical frame.
pub fn to_local(support: &OrientedBox, dep: &OrientedBox) -> Result<BoxVector, PredictorError> {
    let frame = LocalFrame::of_support(support)?;
    let center = frame.point_to_local(dep.center());
    let size = dep.size().component_div(support.size());
    let relative = support.basis().transpose() * dep.basis();
    let rot = Rotation6D::from_matrix(&relative).to_array();
    let mut v = [0.0; 12];
    v[0..3].copy_from_slice(center.as_slice());
    v[3..6].copy_from_slice(size.as_slice());
    v[6..12].copy_from_slice(&rot);
    Ok(BoxVector(v))
}

/// Inverse of [`to_local`]; the rotation is re-orthonormalized.
pub fn from_local(support: &OrientedBox, v: &BoxVector) -> Result<OrientedBox, PredictorError> {
    let frame = LocalFrame::of_support(support)?;
    let a = &v.0;
    let center = frame.point_to_world(&Vector3::new(a[0], a[1], a[2]));
    let size = Vector3::new(a[3], a[4], a[5]).component_mul(support.size());
    let relative = Rotation6D::from_array([a[6], a[7], a[8], a[9], a[10], a[11]]).to_matrix()?;
    let rotation = Rotation6D::from_matrix(&(support.basis() * relative));
    Ok(OrientedBox::new(center, size, rotation)?)
}

/// Snaps a sampled extent onto the asset's canonical extent, uniformly scaled
/// toward the sampled volume by at most the allowed volume tolerance.
pub fn snap_size(sampled: &Vector3<f64>, canonical: &Vector3<f64>) -> Vector3<f64> {
    let canonical_volume = canonical.x * canonical.y * canonical.z;
    let ratio = if sampled.iter().all(|s| *s > 0.0) {
        sampled.x * sampled.y * sampled.z / canonical_volume
    } else {
        0.0
    };
    let clamped = ratio.clamp(
        1.0 - SIZE_SNAP_VOLUME_TOLERANCE,
        1.0 + SIZE_SNAP_VOLUME_TOLERANCE,
    );
    canonical * clamped.cbrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub mixture: MixtureOfLogistics,
    /// Number of tuples the entry was fitted from.
    pub count: usize,
}

/// Mixtures per relation key, parameterized in the support's local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorTable {
    entries: BTreeMap<RelationKey, TableEntry>,
    min_count: usize,
}

impl PredictorTable {
    pub fn new(min_count: usize) -> Self {
        Self {
            entries: BTreeMap::new(),
            min_count,
        }
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn entries(&self) -> &BTreeMap<RelationKey, TableEntry> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts an entry; the mixture must be over 12-dim box vectors.
    pub fn insert(
        &mut self,
        key: RelationKey,
        mixture: MixtureOfLogistics,
        count: usize,
    ) -> Result<(), PredictorError> {
        if mixture.dim() != BoxVector::DIM {
            return Err(PredictorError::Mixture(MolError::DimensionMismatch {
                component: 0,
                expected: BoxVector::DIM,
                found: mixture.dim(),
            }));
        }
        for label in [Some(&key.support), key.functional.as_ref(), Some(&key.dependent)]
            .into_iter()
            .flatten()
        {
            if !valid_label(label) {
                return Err(PredictorError::InvalidLabel(label.clone()));
            }
        }
        self.entries.insert(key, TableEntry { mixture, count });
        Ok(())
    }

    /// Exact lookup first, then the functional-dropped key.
    pub fn lookup(&self, key: &RelationKey) -> Option<(&RelationKey, &TableEntry)> {
        self.entries
            .get_key_value(key)
            .or_else(|| self.entries.get_key_value(&key.coarse()))
    }
}

pub(crate) fn valid_label(label: &str) -> bool {
    !label.is_empty() && label != "-" && !label.chars().any(char::is_whitespace)
}

/// Result of a table lookup bound to a concrete support box.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub key: RelationKey,
    pub local: MixtureOfLogistics,
    pub support: OrientedBox,
}

impl Prediction {
    /// The mixture expressed in world coordinates: locations pass through the
    /// frame's affine action; center and size scales are multiplied by the
    /// support extents along the support axes, rotation scales are unchanged.
    pub fn world_mixture(&self) -> MixtureOfLogistics {
        let size = self.support.size();
        let basis = self.support.basis();
        let center = self.support.center();
        let components = self
            .local
            .components()
            .iter()
            .map(|c| {
                let mu_c = center + basis * Vector3::new(c.mu[0], c.mu[1], c.mu[2]).component_mul(size);
                let a1 = basis * Vector3::new(c.mu[6], c.mu[7], c.mu[8]);
                let a2 = basis * Vector3::new(c.mu[9], c.mu[10], c.mu[11]);
                let mut mu = Vec::with_capacity(12);
                mu.extend_from_slice(mu_c.as_slice());
                mu.extend((0..3).map(|i| c.mu[3 + i] * size[i]));
                mu.extend_from_slice(a1.as_slice());
                mu.extend_from_slice(a2.as_slice());
                let mut s = Vec::with_capacity(12);
                s.extend((0..3).map(|i| c.s[i] * size[i]));
                s.extend((0..3).map(|i| c.s[3 + i] * size[i]));
                s.extend_from_slice(&c.s[6..12]);
                LogisticComponent::new(mu, s)
            })
            .collect();
        MixtureOfLogistics::new(self.local.weights().to_vec(), components)
            .expect("affine image of a valid mixture is valid")
    }

    pub fn sample_local<R: Rng + ?Sized>(&self, rng: &mut R) -> BoxVector {
        BoxVector::from_slice(&self.local.sample(rng)).expect("table mixtures are 12-dim")
    }

    /// Draws a world-frame box. Fails when the draw has a non-positive extent
    /// or a degenerate rotation.
    pub fn sample_box<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<OrientedBox, PredictorError> {
        let v = self.sample_local(rng);
        from_local(&self.support, &v)
    }
}

pub fn predict(
    table: &PredictorTable,
    key: &RelationKey,
    support: &OrientedBox,
) -> Result<Prediction, PredictorError> {
    LocalFrame::of_support(support)?;
    let (found, entry) = table
        .lookup(key)
        .ok_or_else(|| PredictorError::UnknownRelation(key.clone()))?;
    Ok(Prediction {
        key: found.clone(),
        local: entry.mixture.clone(),
        support: *support,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableFitOptions {
    pub fit: FitOptions,
    pub min_count: usize,
    pub seed: u64,
}

impl Default for TableFitOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            min_count: DEFAULT_MIN_COUNT,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyFitReport {
    pub key: RelationKey,
    pub count: usize,
    pub mean_nll: Option<f64>,
    pub iterations: usize,
    /// Why the key has no entry, when it has none.
    pub skipped: Option<String>,
}

/// Groups tuples by relation key and fits one mixture per key in the
/// support's local frame. Fine keys need `min_count` tuples of their own;
/// the coarse `(support, -, dependent)` key pools every tuple of that pair,
/// so sparse fine keys fall back onto it.
pub fn fit_table(
    records: &[RelationTupleRecord],
    opts: &TableFitOptions,
) -> Result<(PredictorTable, Vec<KeyFitReport>), PredictorError> {
    if records.is_empty() {
        return Err(PredictorError::InsufficientData);
    }
    let mut groups: BTreeMap<RelationKey, Vec<BoxVector>> = BTreeMap::new();
    for r in records {
        let local = to_local(&r.support.bbox, &r.dependent.bbox)?;
        let key = r.key();
        if !key.is_coarse() {
            groups.entry(key.clone()).or_default().push(local);
        }
        groups.entry(key.coarse()).or_default().push(local);
    }

    let jobs: Vec<(RelationKey, Vec<BoxVector>)> = groups.into_iter().collect();
    let results: Vec<(KeyFitReport, Option<TableEntry>)> = jobs
        .par_iter()
        .map(|(key, samples)| {
            let count = samples.len();
            let mut report = KeyFitReport {
                key: key.clone(),
                count,
                mean_nll: None,
                iterations: 0,
                skipped: None,
            };
            if count < opts.min_count {
                report.skipped = Some(format!("{count} tuples, need {}", opts.min_count));
                return (report, None);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, fnv1a(&key.to_string())));
            match fit_em(samples, &opts.fit, &mut rng) {
                Ok(outcome) => {
                    report.mean_nll = Some(outcome.final_nll());
                    report.iterations = outcome.iterations;
                    let entry = TableEntry {
                        mixture: outcome.mixture,
                        count,
                    };
                    (report, Some(entry))
                }
                Err(e) => {
                    report.skipped = Some(e.to_string());
                    (report, None)
                }
            }
        })
        .collect();

    let mut table = PredictorTable::new(opts.min_count);
    let mut reports = Vec::with_capacity(results.len());
    for (report, entry) in results {
        if let Some(entry) = entry {
            table.insert(report.key.clone(), entry.mixture, entry.count)?;
        }
        reports.push(report);
    }
    Ok((table, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curation::ObjectRecord;
    use rand::Rng;
    use std::f64::consts::FRAC_PI_2;

    fn random_box<R: Rng>(rng: &mut R) -> OrientedBox {
        let a1 = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let a2 = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let rot = Rotation6D::new(a1, a2).orthonormalized().unwrap_or(Rotation6D::identity());
        OrientedBox::new(
            Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0)),
            Vector3::new(rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0), rng.gen_range(0.05..2.0)),
            rot,
        )
        .unwrap()
    }

    #[test]
    fn identical_boxes_map_to_canonical_cube() {
        let b = OrientedBox::with_yaw(Vector3::new(1.0, 2.0, 0.4), Vector3::new(1.2, 0.6, 0.8), 0.3).unwrap();
        let v = to_local(&b, &b).unwrap();
        let expected = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        for (a, e) in v.0.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        let back = from_local(&b, &v).unwrap();
        assert!((back.center() - b.center()).norm() < 1e-12);
    }

    #[test]
    fn dependent_above_support() {
        let support = OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 1.0, 0.8)).unwrap();
        let dep = OrientedBox::axis_aligned(Vector3::new(0.0, 0.0, 0.45), Vector3::new(0.2, 0.2, 0.1)).unwrap();
        let v = to_local(&support, &dep).unwrap();
        assert!((v.0[2] - 0.5625).abs() < 1e-12);
        let back = from_local(&support, &v).unwrap();
        assert!((back.center().z - 0.45).abs() < 1e-12);
    }

    #[test]
    fn round_trip_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let s = random_box(&mut rng);
            let d = random_box(&mut rng);
            let back = from_local(&s, &to_local(&s, &d).unwrap()).unwrap();
            let a = d.to_box_vector();
            let b = back.to_box_vector();
            for i in 0..12 {
                worst = worst.max((a.0[i] - b.0[i]).abs());
            }
        }
        assert!(worst < 1e-9, "max error {worst}");
    }

    fn one_entry_table(key: &RelationKey) -> PredictorTable {
        let mixture = MixtureOfLogistics::new(
            vec![0.4, 0.6],
            vec![
                LogisticComponent::new(
                    vec![0.1, -0.2, 0.6, 0.3, 0.3, 0.2, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
                    vec![0.05, 0.05, 0.01, 0.02, 0.02, 0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01],
                ),
                LogisticComponent::new(
                    vec![-0.3, 0.2, 0.6, 0.3, 0.3, 0.2, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0],
                    vec![0.05, 0.04, 0.01, 0.02, 0.02, 0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01],
                ),
            ],
        )
        .unwrap();
        let mut table = PredictorTable::new(8);
        table.insert(key.clone(), mixture, 20).unwrap();
        table
    }

    #[test]
    fn canonical_support_leaves_mixture_unchanged() {
        let key = RelationKey::new("desk", None, "lamp");
        let table = one_entry_table(&key);
        let cube = OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0)).unwrap();
        let p = predict(&table, &key, &cube).unwrap();
        assert_eq!(p.world_mixture(), table.entries()[&key].mixture);
    }

    #[test]
    fn translation_and_scaling_act_on_parameters() {
        let key = RelationKey::new("desk", None, "lamp");
        let table = one_entry_table(&key);
        let local = &table.entries()[&key].mixture;
        let t = Vector3::new(1.5, -2.0, 0.25);
        let moved = OrientedBox::axis_aligned(t, Vector3::new(1.0, 1.0, 1.0)).unwrap();
        let world = predict(&table, &key, &moved).unwrap().world_mixture();
        for (w, l) in world.components().iter().zip(local.components()) {
            for i in 0..3 {
                assert!((w.mu[i] - (l.mu[i] + t[i])).abs() < 1e-12);
            }
            assert_eq!(&w.mu[3..], &l.mu[3..]);
            assert_eq!(w.s, l.s);
        }

        let doubled = OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(2.0, 2.0, 2.0)).unwrap();
        let world = predict(&table, &key, &doubled).unwrap().world_mixture();
        for (w, l) in world.components().iter().zip(local.components()) {
            for i in 0..6 {
                assert!((w.mu[i] - 2.0 * l.mu[i]).abs() < 1e-12);
                assert!((w.s[i] - 2.0 * l.s[i]).abs() < 1e-12);
            }
            assert_eq!(&w.s[6..], &l.s[6..]);
            assert_eq!(&w.mu[6..], &l.mu[6..]);
        }
    }

    #[test]
    fn sampling_is_equivariant_under_rigid_motion() {
        let key = RelationKey::new("desk", None, "lamp");
        let table = one_entry_table(&key);
        let support = OrientedBox::axis_aligned(Vector3::new(0.5, 0.5, 0.4), Vector3::new(1.2, 0.6, 0.8)).unwrap();
        let yaw = 0.7;
        let g = Rotation6D::from_yaw(yaw).to_matrix().unwrap();
        let shift = Vector3::new(-1.0, 2.0, 0.0);
        let moved = OrientedBox::new(g * support.center() + shift, *support.size(), Rotation6D::from_matrix(&(g * support.basis()))).unwrap();
        let p0 = predict(&table, &key, &support).unwrap();
        let p1 = predict(&table, &key, &moved).unwrap();
        let mut r0 = ChaCha8Rng::seed_from_u64(4);
        let mut r1 = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let b0 = p0.sample_box(&mut r0).unwrap();
            let b1 = p1.sample_box(&mut r1).unwrap();
            let expected_center = g * b0.center() + shift;
            assert!((b1.center() - expected_center).norm() < 1e-6);
            assert!((b1.size() - b0.size()).norm() < 1e-9);
            assert!((b1.basis() - g * b0.basis()).abs().max() < 1e-6);
        }
    }

    #[test]
    fn quarter_turn_support_swaps_axes() {
        let support = OrientedBox::with_yaw(Vector3::zeros(), Vector3::new(2.0, 1.0, 1.0), FRAC_PI_2).unwrap();
        let v = BoxVector([0.5, 0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = from_local(&support, &v).unwrap();
        assert!((b.center() - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn lookup_prefers_exact_key() {
        let fine = RelationKey::new("desk", Some("laptop"), "keyboard");
        let mut table = one_entry_table(&fine.coarse());
        let coarse_mix = table.entries()[&fine.coarse()].mixture.clone();
        let fine_mix = MixtureOfLogistics::single(vec![0.0; 12], vec![1.0; 12]).unwrap();
        table.insert(fine.clone(), fine_mix.clone(), 9).unwrap();
        let cube = OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(predict(&table, &fine, &cube).unwrap().local, fine_mix);
        let other = RelationKey::new("desk", Some("cup"), "keyboard");
        let p = predict(&table, &other, &cube).unwrap();
        assert_eq!(p.local, coarse_mix);
        assert_eq!(p.key, fine.coarse());
        let unknown = RelationKey::new("desk", None, "bed");
        assert!(matches!(predict(&table, &unknown, &cube), Err(PredictorError::UnknownRelation(_))));
    }

    fn record(scene: &str, sup: (&str, OrientedBox), fnc: Option<&str>, dep: (&str, OrientedBox)) -> RelationTupleRecord {
        let obj = |cat: &str, b: OrientedBox| ObjectRecord {
            id: format!("{cat}_1"),
            category: cat.to_string(),
            bbox: b,
        };
        RelationTupleRecord {
            source_scene: scene.to_string(),
            dependent: obj(dep.0, dep.1),
            support: obj(sup.0, sup.1),
            functional: fnc.map(|c| obj(c, sup.1)),
        }
    }

    #[test]
    fn fit_recovers_fixed_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let offset = Vector3::new(0.2, -0.1, 0.6);
        let mut records = Vec::new();
        for i in 0..40 {
            let support = random_box(&mut rng);
            let size = support.size();
            let jitter = Vector3::new(rng.gen_range(-1e-4..1e-4), rng.gen_range(-1e-4..1e-4), rng.gen_range(-1e-4..1e-4));
            let local_center = offset + jitter;
            let center = support.center() + support.basis() * local_center.component_mul(size);
            let dep = OrientedBox::new(center, size * 0.3, *support.rotation()).unwrap();
            records.push(record(&format!("s{i}"), ("desk", support), None, ("lamp", dep)));
        }
        let opts = TableFitOptions::default();
        let (table, reports) = fit_table(&records, &opts).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(reports.len(), 1);
        let entry = &table.entries()[&RelationKey::new("desk", None, "lamp")];
        assert_eq!(entry.count, 40);
        for c in entry.mixture.components() {
            for i in 0..3 {
                assert!((c.mu[i] - offset[i]).abs() < 0.01);
            }
        }
    }

    #[test]
    fn fit_groups_by_key_and_skips_sparse_keys() {
        let b = OrientedBox::axis_aligned(Vector3::zeros(), Vector3::new(1.0, 1.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut records = Vec::new();
        for i in 0..10 {
            let d = b.translated(&Vector3::new(rng.gen_range(-0.1..0.1), 0.0, 1.0));
            records.push(record(&format!("a{i}"), ("desk", b), None, ("lamp", d)));
            records.push(record(&format!("b{i}"), ("floor", b), None, ("bed", d)));
        }
        for i in 0..3 {
            let d = b.translated(&Vector3::new(0.0, 0.1 * i as f64, 1.0));
            records.push(record(&format!("c{i}"), ("desk", b), Some("lamp"), ("cup", d)));
        }
        let (table, reports) = fit_table(&records, &TableFitOptions::default()).unwrap();
        assert_eq!(table.len(), 2);
        let fine = RelationKey::new("desk", Some("lamp"), "cup");
        assert!(table.lookup(&fine).is_none());
        let skipped: Vec<_> = reports.iter().filter(|r| r.skipped.is_some()).collect();
        assert_eq!(skipped.len(), 2);
        assert!(fit_table(&[], &TableFitOptions::default()).is_err());
    }

    #[test]
    fn snapping_bounds_volume_change() {
        let canonical = Vector3::new(0.4, 0.2, 0.1);
        let same = snap_size(&canonical, &canonical);
        assert!((same - canonical).norm() < 1e-15);
        let big = snap_size(&(canonical * 2.0), &canonical);
        let ratio = big.x * big.y * big.z / (canonical.x * canonical.y * canonical.z);
        assert!((ratio - 1.2).abs() < 1e-12);
        let negative = snap_size(&Vector3::new(-0.1, 0.2, 0.1), &canonical);
        let ratio = negative.x * negative.y * negative.z / (canonical.x * canonical.y * canonical.z);
        assert!((ratio - 0.8).abs() < 1e-12);
    }
}
