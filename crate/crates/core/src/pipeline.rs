//! Per-scene generation shared by the command line and the fixtures.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble, AssemblyConfig, AssemblyError, AssetLibrary, SceneDocument};
use crate::geometry::Aabb;
use crate::hierarchy::{generate, HierarchyDocument, HierarchySpec, StatTables};
use crate::predictor::PredictorTable;
use crate::seed::derive_seed;

/// Where a scene's hierarchy comes from.
#[derive(Debug, Clone, Copy)]
pub enum HierarchySource<'a> {
    /// Grown from the scene type's template with these statistics.
    Stats {
        scene_type: &'a str,
        templates: &'a BTreeMap<String, HierarchyDocument>,
        stats: &'a StatTables,
        n_max: usize,
        k: f64,
    },
    /// The same imported hierarchy for every scene.
    Fixed(&'a HierarchySpec),
}

pub struct SceneInputs<'a> {
    pub source: HierarchySource<'a>,
    pub table: &'a PredictorTable,
    pub assets: &'a AssetLibrary,
    pub boundary: Aabb,
    /// Template for the per-scene assembly settings; its seed is replaced.
    pub assembly: AssemblyConfig,
}

pub fn scene_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, index)
}

pub fn scene_id(index: u64) -> String {
    format!("scene_{index:04}")
}

/// Builds scene `index`. The scene seed is derived from the master seed and
/// the index alone, so scenes can be produced in any order or in parallel.
pub fn generate_scene(
    inputs: &SceneInputs<'_>,
    master_seed: u64,
    index: u64,
) -> Result<(HierarchySpec, SceneDocument), AssemblyError> {
    let seed = scene_seed(master_seed, index);
    let spec = match inputs.source {
        HierarchySource::Stats {
            scene_type,
            templates,
            stats,
            n_max,
            k,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
            generate(scene_type, templates, stats, n_max, k, &mut rng)?
        }
        HierarchySource::Fixed(spec) => spec.clone(),
    };
    let config = AssemblyConfig {
        seed: derive_seed(seed, 1),
        ..inputs.assembly.clone()
    };
    let (scene, report) = assemble(&spec, inputs.table, inputs.assets, &inputs.boundary, &config)?;
    Ok((spec, SceneDocument::new(&scene_id(index), seed, scene, report)))
}
