use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{PlacedObject, PlacementReport, Scene};
use crate::geometry::Aabb;

pub const SCENE_FORMAT_VERSION: u32 = 1;

/// On-disk scene: boundary, ordered placements and the placement report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDocument {
    pub version: u32,
    pub scene_id: String,
    pub seed: u64,
    pub boundary: Aabb,
    pub objects: Vec<PlacedObject>,
    pub report: PlacementReport,
}

impl SceneDocument {
    pub fn new(scene_id: &str, seed: u64, scene: Scene, report: PlacementReport) -> Self {
        Self {
            version: SCENE_FORMAT_VERSION,
            scene_id: scene_id.to_string(),
            seed,
            boundary: scene.boundary,
            objects: scene.objects,
            report,
        }
    }

    pub fn scene(&self) -> Scene {
        Scene {
            boundary: self.boundary,
            objects: self.objects.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene documents always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let doc: SceneDocument = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if doc.version != SCENE_FORMAT_VERSION {
            return Err(format!("unsupported scene document version {}", doc.version));
        }
        if !doc.boundary.is_valid() {
            return Err("invalid room boundary".to_string());
        }
        Ok(doc)
    }
}

// Corner order follows OrientedBox::corners: bit 0 flips x, bit 1 y, bit 2 z.
const FACES: [[usize; 3]; 12] = [
    [0, 2, 3],
    [0, 3, 1],
    [4, 5, 7],
    [4, 7, 6],
    [0, 1, 5],
    [0, 5, 4],
    [2, 6, 7],
    [2, 7, 3],
    [0, 4, 6],
    [0, 6, 2],
    [1, 3, 7],
    [1, 7, 5],
];

/// One cuboid per object as a Wavefront OBJ triangle list.
pub fn export_obj(scene: &Scene) -> String {
    let mut out = String::from("# relscene box export\n");
    for (n, obj) in scene.objects.iter().enumerate() {
        let _ = writeln!(out, "o {}", obj.id);
        for c in obj.bbox.corners() {
            let _ = writeln!(out, "v {:.6} {:.6} {:.6}", c.x, c.y, c.z);
        }
        let base = n * 8 + 1;
        for f in FACES {
            let _ = writeln!(out, "f {} {} {}", base + f[0], base + f[1], base + f[2]);
        }
    }
    out
}
