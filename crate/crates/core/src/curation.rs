//! Raw scenes to relation tuples: settle-and-check validation, support
//! extraction from surface contact, rule-gated functional distillation, and
//! the co-occurrence tables that drive hierarchy generation.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    bottom_surface_height, contains_point, expand_box,
    horizontal_overlap_ratio, obb_intersects, polygon, rest_on, top_surface_height, Aabb,
    GeometryError, OrientedBox,
};
use crate::hierarchy::{StatTables, FLOOR};
use crate::predictor::RelationKey;

/// Slack allowed for a dependent sitting marginally inside its support.
const PENETRATION_SLACK: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("duplicate scene id `{0}`")]
    DuplicateScene(String),
    #[error("scene `{scene}`: duplicate object id `{object}`")]
    DuplicateObject { scene: String, object: String },
    #[error("scene `{0}`: invalid boundary")]
    InvalidBoundary(String),
    #[error("scene `{scene}`: object id `{object}` is reserved")]
    ReservedId { scene: String, object: String },
    #[error("invalid curation config: {field}: {message}")]
    InvalidConfig { field: String, message: String },
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub category: String,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
}

impl ObjectRecord {
    pub fn new(id: &str, category: &str, bbox: OrientedBox) -> Self {
        Self {
            id: id.to_string(),
            category: category.to_string(),
            bbox,
        }
    }

    /// The floor as an anchor: the slab under `boundary`.
    pub fn floor(boundary: &Aabb) -> Self {
        Self::new(FLOOR, FLOOR, boundary.floor_slab())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScene {
    pub id: String,
    pub boundary: Aabb,
    #[serde(default)]
    pub objects: Vec<ObjectRecord>,
}

/// One dataset row: a dependent with its concrete anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTupleRecord {
    pub source_scene: String,
    pub dependent: ObjectRecord,
    pub support: ObjectRecord,
    pub functional: Option<ObjectRecord>,
}

impl RelationTupleRecord {
    pub fn key(&self) -> RelationKey {
        RelationKey::new(
            &self.support.category,
            self.functional.as_ref().map(|f| f.category.as_str()),
            &self.dependent.category,
        )
    }
}

/// Expansion factor `k` for a (functional anchor, dependent) category pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub anchor: String,
    pub dependent: String,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurationConfig {
    pub vertical_gap_max: f64,
    pub overlap_min: f64,
    pub displacement_max: f64,
    pub rule_table: Vec<RuleEntry>,
    pub exclude_floor_only: bool,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            vertical_gap_max: 0.03,
            overlap_min: 0.5,
            displacement_max: 0.10,
            rule_table: Vec::new(),
            exclude_floor_only: true,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        let bad = |field: &str, message: String| CurationError::InvalidConfig {
            field: field.to_string(),
            message,
        };
        if !(self.vertical_gap_max > 0.0 && self.vertical_gap_max.is_finite()) {
            return Err(bad("vertical_gap_max", format!("must be positive, got {}", self.vertical_gap_max)));
        }
        if !(self.displacement_max > 0.0 && self.displacement_max.is_finite()) {
            return Err(bad("displacement_max", format!("must be positive, got {}", self.displacement_max)));
        }
        if !(self.overlap_min > 0.0 && self.overlap_min <= 1.0) {
            return Err(bad("overlap_min", format!("must lie in (0, 1], got {}", self.overlap_min)));
        }
        let mut seen = HashSet::new();
        for (i, r) in self.rule_table.iter().enumerate() {
            if !(r.k >= 1.0 && r.k.is_finite()) {
                return Err(bad(&format!("rule_table[{i}].k"), format!("must be at least 1, got {}", r.k)));
            }
            if !seen.insert((r.anchor.as_str(), r.dependent.as_str())) {
                return Err(bad(
                    &format!("rule_table[{i}]"),
                    format!("duplicate rule ({}, {})", r.anchor, r.dependent),
                ));
            }
        }
        Ok(())
    }

    pub fn rule(&self, anchor: &str, dependent: &str) -> Option<f64> {
        self.rule_table
            .iter()
            .find(|r| r.anchor == anchor && r.dependent == dependent)
            .map(|r| r.k)
    }
}

/// Settles objects bottom-up onto the highest surface beneath them, then
/// drops those displaced more than `delta` from their original pose or
/// still colliding with another object. Removal can unsupport objects
/// above, so the pass repeats until nothing more is removed.
pub fn physical_validate(scene: &RawScene, delta: f64) -> RawScene {
    let floor = scene.boundary.min[2];
    let mut alive: Vec<usize> = (0..scene.objects.len()).collect();
    loop {
        let mut order = alive.clone();
        order.sort_by(|&a, &b| {
            let (ba, bb) = (&scene.objects[a].bbox, &scene.objects[b].bbox);
            bottom_surface_height(ba)
                .total_cmp(&bottom_surface_height(bb))
                .then(a.cmp(&b))
        });
        let mut settled: Vec<(usize, OrientedBox)> = Vec::with_capacity(order.len());
        let mut removed = HashSet::new();
        for &i in &order {
            let orig = &scene.objects[i].bbox;
            let pose = rest_on(orig, settled.iter().map(|(_, b)| b), Some(floor)).expect("floor is always eligible");
            if (pose.center() - orig.center()).norm() > delta {
                removed.insert(i);
            } else {
                settled.push((i, pose));
            }
        }
        for x in 0..settled.len() {
            for y in x + 1..settled.len() {
                if obb_intersects(&settled[x].1, &settled[y].1) {
                    removed.insert(settled[x].0);
                    removed.insert(settled[y].0);
                }
            }
        }
        if removed.is_empty() {
            settled.sort_by_key(|(i, _)| *i);
            return RawScene {
                id: scene.id.clone(),
                boundary: scene.boundary,
                objects: settled
                    .into_iter()
                    .map(|(i, b)| ObjectRecord {
                        bbox: b,
                        ..scene.objects[i].clone()
                    })
                    .collect(),
            };
        }
        alive.retain(|i| !removed.contains(i));
    }
}

/// For each object, the index of the object supporting it, `None` for the
/// floor. A candidate's top must lie within `eps_v` below the object's
/// bottom and cover at least `tau_h` of its footprint. The largest overlap
/// wins, then the highest top, then the smallest footprint.
pub fn extract_support(scene: &RawScene, eps_v: f64, tau_h: f64) -> Vec<(Option<usize>, usize)> {
    let objs = &scene.objects;
    (0..objs.len())
        .map(|u| {
            let upper = &objs[u].bbox;
            let bottom = bottom_surface_height(upper);
            let mut best: Option<(usize, f64, f64, f64)> = None;
            for (l, lower) in objs.iter().enumerate() {
                if l == u {
                    continue;
                }
                let top = top_surface_height(&lower.bbox);
                let gap = bottom - top;
                if !(-PENETRATION_SLACK..=eps_v).contains(&gap) {
                    continue;
                }
                let overlap = horizontal_overlap_ratio(&lower.bbox, upper);
                if overlap < tau_h {
                    continue;
                }
                let area = polygon::area(&lower.bbox.footprint());
                let better = match best {
                    None => true,
                    Some((_, bo, bt, ba)) => {
                        if (overlap - bo).abs() > 1e-9 {
                            overlap > bo
                        } else if (top - bt).abs() > 1e-9 {
                            top > bt
                        } else {
                            area < ba
                        }
                    }
                };
                if better {
                    best = Some((l, overlap, top, area));
                }
            }
            (best.map(|b| b.0), u)
        })
        .collect()
}

/// For each dependent, the nearest co-surface object whose box, expanded by
/// the rule factor for the pair, contains the dependent's centroid. Pairs
/// without a rule never qualify. Returns (anchor, dependent) indices.
pub fn distill_functional(
    scene: &RawScene,
    support_pairs: &[(Option<usize>, usize)],
    config: &CurationConfig,
) -> Vec<(usize, usize)> {
    let objs = &scene.objects;
    let mut out = Vec::new();
    for &(sup_d, d) in support_pairs {
        let centroid = objs[d].bbox.center();
        let mut best: Option<(usize, f64)> = None;
        for &(sup_a, a) in support_pairs {
            if a == d || sup_a != sup_d {
                continue;
            }
            let Some(k) = config.rule(&objs[a].category, &objs[d].category) else {
                continue;
            };
            let Ok(expanded) = expand_box(&objs[a].bbox, k) else {
                continue;
            };
            if !contains_point(&expanded, centroid) {
                continue;
            }
            let dist = (objs[a].bbox.center() - centroid).norm();
            if best.is_none_or(|(_, bd)| dist < bd) {
                best = Some((a, dist));
            }
        }
        if let Some((a, _)) = best {
            out.push((a, d));
        }
    }
    out
}

/// Support and functional co-occurrence counts over `records`.
pub fn build_stats(records: &[RelationTupleRecord]) -> StatTables {
    let mut st = StatTables::default();
    for r in records {
        st.add_support(&r.support.category, &r.dependent.category, 1);
        if let Some(f) = &r.functional {
            st.add_functional(&r.support.category, &f.category, &r.dependent.category, 1);
        }
    }
    st
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub scenes_in: usize,
    pub objects_in: usize,
    pub objects_dropped_validation: usize,
    pub scenes_dropped_floor_only: usize,
    pub scenes_empty: usize,
    pub records_out: usize,
    pub functional_pairs: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curated {
    pub records: Vec<RelationTupleRecord>,
    pub stats: StatTables,
    pub report: StageReport,
}

fn check_scene(scene: &RawScene) -> Result<(), CurationError> {
    if !scene.boundary.is_valid() {
        return Err(CurationError::InvalidBoundary(scene.id.clone()));
    }
    let mut ids = HashSet::new();
    for o in &scene.objects {
        if o.id.eq_ignore_ascii_case(FLOOR) {
            return Err(CurationError::ReservedId {
                scene: scene.id.clone(),
                object: o.id.clone(),
            });
        }
        if !ids.insert(o.id.as_str()) {
            return Err(CurationError::DuplicateObject {
                scene: scene.id.clone(),
                object: o.id.clone(),
            });
        }
    }
    Ok(())
}

struct SceneOutcome {
    records: Vec<RelationTupleRecord>,
    dropped_objects: usize,
    floor_only: bool,
    functional: usize,
}

fn curate_scene(scene: &RawScene, config: &CurationConfig) -> SceneOutcome {
    let valid = physical_validate(scene, config.displacement_max);
    let dropped_objects = scene.objects.len() - valid.objects.len();
    let pairs = extract_support(&valid, config.vertical_gap_max, config.overlap_min);
    let floor_only = !valid.objects.is_empty() && pairs.iter().all(|(s, _)| s.is_none());
    if floor_only && config.exclude_floor_only {
        return SceneOutcome {
            records: Vec::new(),
            dropped_objects,
            floor_only: true,
            functional: 0,
        };
    }
    let func = distill_functional(&valid, &pairs, config);
    let floor = ObjectRecord::floor(&valid.boundary);
    let records = pairs
        .iter()
        .map(|&(s, d)| RelationTupleRecord {
            source_scene: valid.id.clone(),
            dependent: valid.objects[d].clone(),
            support: s.map_or_else(|| floor.clone(), |s| valid.objects[s].clone()),
            functional: func
                .iter()
                .find(|(_, dd)| *dd == d)
                .map(|(a, _)| valid.objects[*a].clone()),
        })
        .collect();
    SceneOutcome {
        records,
        dropped_objects,
        floor_only,
        functional: func.len(),
    }
}

/// Runs every stage over the corpus. Scenes are processed in parallel;
/// output order follows input order.
pub fn curate(scenes: &[RawScene], config: &CurationConfig) -> Result<Curated, CurationError> {
    config.validate()?;
    let mut ids = HashSet::new();
    for s in scenes {
        if !ids.insert(s.id.as_str()) {
            return Err(CurationError::DuplicateScene(s.id.clone()));
        }
        check_scene(s)?;
    }
    let outcomes: Vec<SceneOutcome> = scenes.par_iter().map(|s| curate_scene(s, config)).collect();

    let mut report = StageReport {
        scenes_in: scenes.len(),
        objects_in: scenes.iter().map(|s| s.objects.len()).sum(),
        scenes_empty: scenes.iter().filter(|s| s.objects.is_empty()).count(),
        ..Default::default()
    };
    let mut records = Vec::new();
    for o in outcomes {
        report.objects_dropped_validation += o.dropped_objects;
        if o.floor_only && config.exclude_floor_only {
            report.scenes_dropped_floor_only += 1;
        }
        report.functional_pairs += o.functional;
        records.extend(o.records);
    }
    report.records_out = records.len();
    if records.is_empty() {
        report
            .warnings
            .push("every scene was dropped; outputs are empty".to_string());
    }
    let stats = build_stats(&records);
    Ok(Curated {
        records,
        stats,
        report,
    })
}

/// One JSON object per line, fields in declaration order.
pub fn write_records(records: &[RelationTupleRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_records(text: &str) -> Result<Vec<RelationTupleRecord>, CurationError> {
    parse_lines(text)
}

/// Scene corpus: one [`RawScene`] JSON object per line.
pub fn parse_scenes(text: &str) -> Result<Vec<RawScene>, CurationError> {
    parse_lines(text)
}

pub fn write_scenes(scenes: &[RawScene]) -> String {
    let mut out = String::new();
    for s in scenes {
        out.push_str(&serde_json::to_string(s).expect("scenes always serialize"));
        out.push('\n');
    }
    out
}

fn parse_lines<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>, CurationError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CurationError::Record {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Counts of `records` per category pair, for reporting.
pub fn support_pair_counts(records: &[RelationTupleRecord]) -> BTreeMap<(String, String), usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry((r.support.category.clone(), r.dependent.category.clone()))
            .or_default() += 1;
    }
    m
}
