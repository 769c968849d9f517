//! A small bedroom world with known ground truth: co-occurrence statistics,
//! a hand-authored predictor table, asset sizes and functional rules. Used
//! as the default configuration and to synthesize curation corpora.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{AssemblyConfig, AssetLibrary, PlacedObject, SceneDocument};
use crate::config::{AssemblySection, EngineConfig, FitSection, GenerationSection, CONFIG_FORMAT_VERSION};
use crate::curation::{CurationConfig, ObjectRecord, RawScene, RuleEntry};
use crate::geometry::{Aabb, OrientedBox};
use crate::hierarchy::{Edge, FunctionalTreeDoc, HierarchyDocument, StatTables, FLOOR};
use crate::mol::{LogisticComponent, MixtureOfLogistics, S_MIN};
use crate::pipeline::{generate_scene, scene_seed, HierarchySource, SceneInputs};
use crate::predictor::{to_local, PredictorTable, RelationKey};
use crate::seed::derive_seed;

pub struct Fixture {
    pub scene_type: String,
    pub boundary: Aabb,
    pub taxonomy: Vec<String>,
    pub template: HierarchyDocument,
    pub stats: StatTables,
    /// Ground-truth placement densities.
    pub table: PredictorTable,
    pub assets: AssetLibrary,
    pub rules: Vec<RuleEntry>,
    pub n_max: usize,
    pub expansion_k: f64,
}

/// A corpus scene together with the support relations it was built from.
pub struct SyntheticScene {
    pub raw: RawScene,
    /// (support id, dependent id); the floor is `floor`.
    pub support_truth: Vec<(String, String)>,
    pub document: SceneDocument,
}

const ASSETS: [(&str, [f64; 3]); 12] = [
    ("bed", [1.6, 2.0, 0.5]),
    ("nightstand", [0.45, 0.4, 0.55]),
    ("wardrobe", [1.0, 0.6, 2.0]),
    ("desk", [1.2, 0.6, 0.75]),
    ("chair", [0.45, 0.45, 0.9]),
    ("lamp", [0.2, 0.2, 0.4]),
    ("laptop", [0.35, 0.25, 0.02]),
    ("keyboard", [0.44, 0.14, 0.03]),
    ("mouse", [0.06, 0.1, 0.04]),
    ("cup", [0.08, 0.08, 0.1]),
    ("book", [0.15, 0.22, 0.04]),
    ("plant", [0.3, 0.3, 0.6]),
];

/// Height at which proposals hover over their support before settling.
const LIFT: f64 = 0.01;
const LIFT_JITTER: f64 = 0.002;
const YAW_JITTER: f64 = 0.005;

struct Mode {
    weight: f64,
    xy: [f64; 2],
    yaw: f64,
    jitter: [f64; 2],
}

fn mode(weight: f64, x: f64, y: f64, yaw: f64, jitter: f64) -> Mode {
    Mode {
        weight,
        xy: [x, y],
        yaw,
        jitter: [jitter, jitter],
    }
}

fn size_of(cat: &str) -> [f64; 3] {
    ASSETS.iter().find(|(c, _)| *c == cat).expect("fixture category").1
}

/// Canonical support box: the floor slab, or an unrotated asset with its
/// bottom at z = 0 centered on the origin.
fn support_box(cat: &str, boundary: &Aabb) -> OrientedBox {
    if cat == FLOOR {
        return boundary.floor_slab();
    }
    let s = size_of(cat);
    OrientedBox::axis_aligned(Vector3::new(0.0, 0.0, 0.5 * s[2]), Vector3::from(s)).unwrap()
}

/// Mixture over the dependent's local box with one component per mode.
/// Mode positions are in the canonical support box's coordinates.
fn truth_mixture(sup: &str, dep: &str, modes: &[Mode], boundary: &Aabb) -> MixtureOfLogistics {
    let support = support_box(sup, boundary);
    let ss = support.size();
    let ds = size_of(dep);
    let total: f64 = modes.iter().map(|m| m.weight).sum();
    let comps = modes
        .iter()
        .map(|m| {
            let z = support.top_height() + 0.5 * ds[2] + LIFT;
            let target = OrientedBox::with_yaw(Vector3::new(m.xy[0], m.xy[1], z), Vector3::from(ds), m.yaw).unwrap();
            let mu = to_local(&support, &target).unwrap().0.to_vec();
            let mut s = vec![m.jitter[0] / ss.x, m.jitter[1] / ss.y, LIFT_JITTER / ss.z];
            s.extend([S_MIN; 3]);
            s.extend([YAW_JITTER, YAW_JITTER, S_MIN, YAW_JITTER, YAW_JITTER, S_MIN]);
            LogisticComponent::new(mu, s)
        })
        .collect();
    MixtureOfLogistics::new(modes.iter().map(|m| m.weight / total).collect(), comps).unwrap()
}

fn truth_table(boundary: &Aabb) -> PredictorTable {
    let mut table = PredictorTable::new(1);
    let mut add = |sup: &str, fncs: &[Option<&str>], dep: &str, modes: Vec<Mode>| {
        let mix = truth_mixture(sup, dep, &modes, boundary);
        for f in fncs {
            table.insert(RelationKey::new(sup, *f, dep), mix.clone(), 100).unwrap();
        }
    };
    add(FLOOR, &[None], "bed", vec![mode(1.0, 2.0, 1.1, 0.0, 0.03)]);
    add(
        FLOOR,
        &[None, Some("bed"), Some("nightstand")],
        "nightstand",
        vec![mode(0.5, 0.9, 0.3, 0.0, 0.02), mode(0.5, 3.1, 0.3, 0.0, 0.02)],
    );
    add(
        FLOOR,
        &[None, Some("nightstand")],
        "plant",
        vec![mode(0.5, 3.75, 0.3, 0.0, 0.02), mode(0.5, 0.3, 1.8, 0.0, 0.02)],
    );
    add(FLOOR, &[None], "desk", vec![mode(1.0, 3.0, 3.6, 0.0, 0.02)]);
    add(
        FLOOR,
        &[None, Some("desk")],
        "chair",
        vec![Mode {
            weight: 1.0,
            xy: [3.0, 3.0],
            yaw: PI,
            jitter: [0.03, 0.04],
        }],
    );
    add(FLOOR, &[None, Some("desk")], "wardrobe", vec![mode(1.0, 0.4, 3.0, FRAC_PI_2, 0.02)]);

    add("desk", &[None], "laptop", vec![mode(1.0, 0.0, 0.05, 0.0, 0.015)]);
    add("desk", &[None, Some("laptop")], "keyboard", vec![mode(1.0, 0.0, -0.18, 0.0, 0.01)]);
    add(
        "desk",
        &[None, Some("laptop"), Some("keyboard")],
        "mouse",
        vec![mode(1.0, 0.33, -0.18, 0.0, 0.01)],
    );
    add(
        "desk",
        &[None, Some("laptop"), Some("mouse")],
        "cup",
        vec![mode(0.6, -0.42, 0.12, 0.0, 0.015), mode(0.4, 0.42, 0.05, 0.0, 0.015)],
    );
    add(
        "desk",
        &[None, Some("cup")],
        "book",
        vec![mode(0.7, -0.42, -0.1, 0.0, 0.015), mode(0.3, 0.42, 0.18, 0.0, 0.015)],
    );

    add("nightstand", &[None], "lamp", vec![mode(1.0, -0.1, 0.06, 0.0, 0.008)]);
    add("nightstand", &[None, Some("lamp")], "book", vec![mode(1.0, 0.12, -0.06, 0.0, 0.008)]);
    add("nightstand", &[None, Some("lamp")], "cup", vec![mode(1.0, 0.13, 0.11, 0.0, 0.008)]);
    table
}

fn bedroom_stats() -> StatTables {
    let mut st = StatTables::default();
    let sup: [(&str, &[(&str, u64)]); 3] = [
        (
            FLOOR,
            &[("bed", 10), ("nightstand", 18), ("desk", 8), ("chair", 8), ("wardrobe", 6), ("plant", 5)],
        ),
        ("desk", &[("laptop", 8), ("keyboard", 7), ("mouse", 6), ("cup", 5), ("book", 5), ("lamp", 3)]),
        ("nightstand", &[("lamp", 9), ("book", 4), ("cup", 3)]),
    ];
    for (a, deps) in sup {
        for (d, n) in deps {
            st.add_support(a, d, *n);
        }
    }
    let func: [(&str, &str, &str, u64); 12] = [
        (FLOOR, "bed", "nightstand", 8),
        (FLOOR, "nightstand", "nightstand", 4),
        (FLOOR, "nightstand", "plant", 3),
        (FLOOR, "desk", "chair", 8),
        (FLOOR, "desk", "wardrobe", 3),
        ("desk", "laptop", "keyboard", 7),
        ("desk", "laptop", "mouse", 4),
        ("desk", "laptop", "cup", 3),
        ("desk", "keyboard", "mouse", 5),
        ("desk", "mouse", "cup", 2),
        ("desk", "cup", "book", 2),
        ("nightstand", "lamp", "book", 3),
    ];
    for (a, l, c, n) in func {
        st.add_functional(a, l, c, n);
    }
    st.add_functional("nightstand", "lamp", "cup", 2);
    st
}

fn bedroom_template() -> HierarchyDocument {
    HierarchyDocument {
        support_tree: vec![
            Edge::new(FLOOR, "bed_1"),
            Edge::new(FLOOR, "nightstand_1"),
            Edge::new(FLOOR, "desk_1"),
            Edge::new("desk_1", "laptop_1"),
            Edge::new("nightstand_1", "lamp_1"),
        ],
        functional_trees: vec![
            FunctionalTreeDoc {
                support_anchor: FLOOR.into(),
                edges: vec![
                    Edge::new(FLOOR, "bed_1"),
                    Edge::new("bed_1", "nightstand_1"),
                    Edge::new(FLOOR, "desk_1"),
                ],
            },
            FunctionalTreeDoc {
                support_anchor: "desk_1".into(),
                edges: vec![Edge::new("desk_1", "laptop_1")],
            },
            FunctionalTreeDoc {
                support_anchor: "nightstand_1".into(),
                edges: vec![Edge::new("nightstand_1", "lamp_1")],
            },
        ],
        ..Default::default()
    }
}

fn bedroom_rules() -> Vec<RuleEntry> {
    [
        ("bed", "nightstand", 1.6),
        ("desk", "chair", 2.5),
        ("laptop", "keyboard", 3.0),
        ("laptop", "mouse", 3.0),
        ("keyboard", "mouse", 2.0),
        ("laptop", "cup", 3.0),
        ("mouse", "cup", 3.0),
        ("cup", "book", 4.0),
        ("lamp", "book", 3.0),
        ("lamp", "cup", 3.0),
    ]
    .into_iter()
    .map(|(a, d, k)| RuleEntry {
        anchor: a.into(),
        dependent: d.into(),
        k,
    })
    .collect()
}

pub fn bedroom() -> Fixture {
    let boundary = Aabb::new([0.0, 0.0, 0.0], [4.0, 4.0, 3.0]);
    Fixture {
        scene_type: "bedroom".into(),
        boundary,
        taxonomy: ASSETS.iter().map(|(c, _)| c.to_string()).collect(),
        template: bedroom_template(),
        stats: bedroom_stats(),
        table: truth_table(&boundary),
        assets: AssetLibrary {
            sizes: ASSETS.iter().map(|(c, s)| (c.to_string(), *s)).collect(),
        },
        rules: bedroom_rules(),
        n_max: 8,
        expansion_k: 1.5,
    }
}

impl Fixture {
    pub fn templates(&self) -> BTreeMap<String, HierarchyDocument> {
        BTreeMap::from([(self.scene_type.clone(), self.template.clone())])
    }

    pub fn config(&self) -> EngineConfig {
        EngineConfig {
            version: CONFIG_FORMAT_VERSION,
            seed: 7,
            taxonomy: self.taxonomy.clone(),
            templates: self.templates(),
            curation: CurationConfig {
                rule_table: self.rules.clone(),
                ..Default::default()
            },
            fit: FitSection::default(),
            generation: GenerationSection {
                scene_type: self.scene_type.clone(),
                scene_count: 10,
                n_max: self.n_max,
                expansion_k: self.expansion_k,
            },
            assembly: AssemblySection::with_boundary(self.boundary),
            assets: self.assets.clone(),
        }
    }

    /// Generates and assembles scene `index` from the fixture statistics and
    /// the ground-truth table.
    pub fn scene(&self, master_seed: u64, index: u64, assembly: &AssemblyConfig) -> SceneDocument {
        let templates = self.templates();
        let inputs = SceneInputs {
            source: HierarchySource::Stats {
                scene_type: &self.scene_type,
                templates: &templates,
                stats: &self.stats,
                n_max: self.n_max,
                k: self.expansion_k,
            },
            table: &self.table,
            assets: &self.assets,
            boundary: self.boundary,
            assembly: assembly.clone(),
        };
        generate_scene(&inputs, master_seed, index)
            .expect("fixture scenes assemble under the skip policy")
            .1
    }

    /// `n` assembled scenes as raw curation input. Every object is raised by
    /// up to `lift_noise` meters so the validation stage has work to do.
    pub fn corpus(&self, n: usize, master_seed: u64, lift_noise: f64) -> Vec<SyntheticScene> {
        let assembly = AssemblyConfig::default();
        (0..n as u64)
            .map(|i| {
                let document = self.scene(master_seed, i, &assembly);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(scene_seed(master_seed, i), 2));
                let objects = document
                    .objects
                    .iter()
                    .map(|o: &PlacedObject| {
                        let dz = if lift_noise > 0.0 { rng.gen_range(0.0..lift_noise) } else { 0.0 };
                        ObjectRecord::new(&o.id, &o.category, o.bbox.translated(&Vector3::new(0.0, 0.0, dz)))
                    })
                    .collect();
                let support_truth = document
                    .objects
                    .iter()
                    .map(|o| (o.support.clone(), o.id.clone()))
                    .collect();
                SyntheticScene {
                    raw: RawScene {
                        id: document.scene_id.clone(),
                        boundary: self.boundary,
                        objects,
                    },
                    support_truth,
                    document,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{collision_rate, floating_rate};

    #[test]
    fn fixture_config_is_valid() {
        bedroom().config().validate().unwrap();
    }

    #[test]
    fn truth_scenes_are_clean() {
        let fx = bedroom();
        for i in 0..10 {
            let doc = fx.scene(1, i, &AssemblyConfig::default());
            let scene = doc.scene();
            assert!(scene.objects.len() >= 5, "scene {i}: {}", scene.objects.len());
            assert_eq!(collision_rate(&scene).unwrap(), 0.0);
            assert_eq!(floating_rate(&scene, 0.01).unwrap(), 0.0);
        }
    }

    #[test]
    fn corpus_is_deterministic() {
        let fx = bedroom();
        let a = fx.corpus(3, 9, 0.01);
        let b = fx.corpus(3, 9, 0.01);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.raw, y.raw);
            assert_eq!(x.support_truth, y.support_truth);
        }
    }
}
