//! Sequential scene assembly: each serialized tuple is placed by sampling
//! the predictor's mixture, rejecting proposals outside the feasible set,
//! and dropping accepted boxes onto the surface beneath them.

mod export;
mod grid;

use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{obb_intersects, rest_on, Aabb, OrientedBox};
use crate::hierarchy::{serialize, HierarchySpec, RelationalTuple, ValidationError, FLOOR};
use crate::predictor::{from_local, predict, snap_size, PredictorError, PredictorTable, RelationKey};

pub use export::{export_obj, SceneDocument, SCENE_FORMAT_VERSION};
pub use grid::UniformGrid;

pub const DEFAULT_MAX_ATTEMPTS: usize = 64;
pub const DEFAULT_GRID_CELL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FailurePolicy {
    #[default]
    Skip,
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssemblyConfig {
    pub max_attempts: usize,
    pub seed: u64,
    pub gravity_enabled: bool,
    pub rejection_enabled: bool,
    pub failure_policy: FailurePolicy,
    pub grid_cell: f64,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            seed: 0,
            gravity_enabled: true,
            rejection_enabled: true,
            failure_policy: FailurePolicy::Skip,
            grid_cell: DEFAULT_GRID_CELL,
        }
    }
}

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("no surface below the candidate's footprint")]
    NoSupportBelow,
    #[error("placement of `{}` failed: {reason}", .failure.tuple.dependent)]
    Placement { failure: PlacementFailure, reason: String },
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Hierarchy(#[from] ValidationError),
    #[error("invalid assembly config: {0}")]
    InvalidConfig(String),
    #[error("invalid room boundary")]
    InvalidBoundary,
}

/// Why a tuple could not be placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementFailure {
    pub tuple: RelationalTuple,
    pub attempts: usize,
}

#[derive(Debug, Error)]
pub enum PlaceError {
    #[error("no feasible proposal in {attempts} attempts")]
    Exhausted { attempts: usize },
    #[error("anchor `{0}` has not been placed")]
    AnchorMissing(String),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
}

/// Canonical asset extents per category.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AssetLibrary {
    pub sizes: BTreeMap<String, [f64; 3]>,
}

impl AssetLibrary {
    pub fn size_of(&self, category: &str) -> Option<Vector3<f64>> {
        self.sizes.get(category).map(|s| Vector3::from(*s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub id: String,
    pub category: String,
    #[serde(rename = "box")]
    pub bbox: OrientedBox,
    pub support: String,
    pub functional: Option<String>,
}

/// Placed instances inside a room, with a grid index for collision
/// shortlists.
#[derive(Debug, Clone)]
pub struct SceneState {
    boundary: Aabb,
    floor: OrientedBox,
    placed: Vec<PlacedObject>,
    by_id: HashMap<String, usize>,
    grid: UniformGrid,
}

impl SceneState {
    pub fn new(boundary: Aabb, cell: f64) -> Result<Self, AssemblyError> {
        if !boundary.is_valid() {
            return Err(AssemblyError::InvalidBoundary);
        }
        Ok(Self {
            boundary,
            floor: boundary.floor_slab(),
            placed: Vec::new(),
            by_id: HashMap::new(),
            grid: UniformGrid::new(cell),
        })
    }

    pub fn boundary(&self) -> &Aabb {
        &self.boundary
    }

    pub fn placed(&self) -> &[PlacedObject] {
        &self.placed
    }

    pub fn floor_box(&self) -> &OrientedBox {
        &self.floor
    }

    /// Box and category of a placed node; the floor resolves to its slab.
    pub fn anchor(&self, id: &str) -> Option<(&OrientedBox, &str)> {
        if id == FLOOR {
            return Some((&self.floor, FLOOR));
        }
        self.by_id
            .get(id)
            .map(|&i| (&self.placed[i].bbox, self.placed[i].category.as_str()))
    }

    pub fn insert(&mut self, obj: PlacedObject) {
        let idx = self.placed.len();
        self.grid.insert(idx, &obj.bbox);
        self.by_id.insert(obj.id.clone(), idx);
        self.placed.push(obj);
    }

    pub fn into_placed(self) -> Vec<PlacedObject> {
        self.placed
    }

    /// Inside the boundary and clear of every placed box.
    pub fn feasible(&self, candidate: &OrientedBox) -> bool {
        self.feasible_with(candidate, None, true)
    }

    /// Same answer as [`SceneState::feasible`] without the index.
    pub fn feasible_brute_force(&self, candidate: &OrientedBox) -> bool {
        self.boundary.contains_box(candidate)
            && self.placed.iter().all(|p| !obb_intersects(&p.bbox, candidate))
    }

    /// Feasibility with one placed box exempt and, optionally, without the
    /// boundary's lower bound. Used before gravity has settled a proposal.
    fn feasible_with(&self, candidate: &OrientedBox, exempt: Option<usize>, floor_bound: bool) -> bool {
        let inside = if floor_bound {
            self.boundary.contains_box(candidate)
        } else {
            self.boundary.contains_box_ignoring_floor(candidate)
        };
        inside
            && self
                .grid
                .query(candidate)
                .into_iter()
                .filter(|i| Some(*i) != exempt)
                .all(|i| !obb_intersects(&self.placed[i].bbox, candidate))
    }
}

pub fn feasible(candidate: &OrientedBox, state: &SceneState) -> bool {
    state.feasible(candidate)
}

/// Drops `candidate` onto the highest surface under its footprint among
/// `support` and the placed boxes. Horizontal pose is unchanged.
pub fn gravity_refine(
    candidate: &OrientedBox,
    support: &OrientedBox,
    state: &SceneState,
) -> Result<OrientedBox, AssemblyError> {
    let surfaces = std::iter::once(support).chain(state.placed.iter().map(|p| &p.bbox));
    rest_on(candidate, surfaces, None).ok_or(AssemblyError::NoSupportBelow)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub bbox: OrientedBox,
    pub attempts: usize,
    pub key: RelationKey,
}

/// Samples proposals for one tuple until one is accepted. With rejection on,
/// a proposal must clear every placed box except the support (and the room,
/// ignoring the floor bound when gravity will settle it); after gravity it
/// must be fully feasible and rest on its own support. Proposals that cannot
/// be decoded or have nothing below them are always rejected.
pub fn place_one<R: Rng + ?Sized>(
    tuple: &RelationalTuple,
    dependent_category: &str,
    table: &PredictorTable,
    state: &SceneState,
    assets: &AssetLibrary,
    config: &AssemblyConfig,
    rng: &mut R,
) -> Result<Placement, PlaceError> {
    let (support_box, support_cat) = state
        .anchor(&tuple.support)
        .ok_or_else(|| PlaceError::AnchorMissing(tuple.support.clone()))?;
    let functional_cat = match &tuple.functional {
        None => None,
        Some(f) => Some(
            state
                .anchor(f)
                .ok_or_else(|| PlaceError::AnchorMissing(f.clone()))?
                .1,
        ),
    };
    let key = RelationKey::new(support_cat, functional_cat, dependent_category);
    let prediction = predict(table, &key, support_box)?;
    let canonical = assets.size_of(dependent_category);
    let support_idx = state.by_id.get(&tuple.support).copied();

    for attempt in 1..=config.max_attempts.max(1) {
        let v = prediction.sample_local(rng);
        let Ok(mut candidate) = from_local(support_box, &v) else {
            continue;
        };
        if let Some(c) = &canonical {
            let size = snap_size(candidate.size(), c);
            candidate = OrientedBox::new(*candidate.center(), size, *candidate.rotation())
                .expect("snapped extents are positive");
        }
        if !config.gravity_enabled {
            if !config.rejection_enabled || state.feasible(&candidate) {
                return Ok(Placement {
                    bbox: candidate,
                    attempts: attempt,
                    key: prediction.key,
                });
            }
            continue;
        }
        if config.rejection_enabled && !state.feasible_with(&candidate, support_idx, false) {
            continue;
        }
        let Ok(settled) = gravity_refine(&candidate, support_box, state) else {
            continue;
        };
        if config.rejection_enabled {
            let on_support = (settled.bottom_height() - support_box.top_height()).abs() <= 1e-9;
            if !on_support || !state.feasible(&settled) {
                continue;
            }
        }
        return Ok(Placement {
            bbox: settled,
            attempts: attempt,
            key: prediction.key,
        });
    }
    Err(PlaceError::Exhausted {
        attempts: config.max_attempts.max(1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub id: String,
    pub category: String,
    pub attempts: usize,
    pub accepted: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlacementReport {
    pub objects: Vec<ObjectReport>,
    pub proposals: usize,
    pub accepted: usize,
    /// Accepted objects over proposals drawn; 1 when nothing was proposed.
    pub acceptance_rate: f64,
    /// Mean of (attempts - 1) over placed objects; 0 when none were placed.
    pub resamples_per_object: f64,
}

impl PlacementReport {
    fn from_objects(objects: Vec<ObjectReport>) -> Self {
        let proposals: usize = objects.iter().map(|o| o.attempts).sum();
        let placed: Vec<&ObjectReport> = objects.iter().filter(|o| o.accepted).collect();
        let accepted = placed.len();
        let acceptance_rate = if proposals == 0 {
            1.0
        } else {
            accepted as f64 / proposals as f64
        };
        let resamples_per_object = if accepted == 0 {
            0.0
        } else {
            placed.iter().map(|o| (o.attempts - 1) as f64).sum::<f64>() / accepted as f64
        };
        Self {
            objects,
            proposals,
            accepted,
            acceptance_rate,
            resamples_per_object,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub boundary: Aabb,
    pub objects: Vec<PlacedObject>,
}

/// Serializes `spec` and places its tuples in order with a generator seeded
/// from `config.seed`. A tuple whose anchor was skipped is itself skipped.
pub fn assemble(
    spec: &HierarchySpec,
    table: &PredictorTable,
    assets: &AssetLibrary,
    boundary: &Aabb,
    config: &AssemblyConfig,
) -> Result<(Scene, PlacementReport), AssemblyError> {
    if config.max_attempts == 0 {
        return Err(AssemblyError::InvalidConfig("max_attempts must be at least 1".into()));
    }
    let tuples = serialize(spec)?;
    let categories: HashMap<&str, &str> = spec
        .support()
        .nodes()
        .iter()
        .map(|n| (n.id.as_str(), n.category.as_str()))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = SceneState::new(*boundary, config.grid_cell)?;
    let mut reports = Vec::with_capacity(tuples.len());
    for t in &tuples {
        let category = categories[t.dependent.as_str()];
        let outcome = place_one(t, category, table, &state, assets, config, &mut rng);
        let (attempts, failure) = match outcome {
            Ok(p) => {
                state.insert(PlacedObject {
                    id: t.dependent.clone(),
                    category: category.to_string(),
                    bbox: p.bbox,
                    support: t.support.clone(),
                    functional: t.functional.clone(),
                });
                (p.attempts, None)
            }
            Err(e) => {
                let attempts = match e {
                    PlaceError::Exhausted { attempts } => attempts,
                    _ => 0,
                };
                if config.failure_policy == FailurePolicy::Abort {
                    return Err(AssemblyError::Placement {
                        failure: PlacementFailure {
                            tuple: t.clone(),
                            attempts,
                        },
                        reason: e.to_string(),
                    });
                }
                (attempts, Some(e.to_string()))
            }
        };
        reports.push(ObjectReport {
            id: t.dependent.clone(),
            category: category.to_string(),
            attempts,
            accepted: failure.is_none(),
            failure,
        });
    }
    let scene = Scene {
        boundary: *boundary,
        objects: state.into_placed(),
    };
    Ok((scene, PlacementReport::from_objects(reports)))
}
