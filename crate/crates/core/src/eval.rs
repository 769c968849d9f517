//! Scene quality metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{PlacementReport, Scene, UniformGrid};
use crate::geometry::{
    bottom_surface_height, footprint_overlap_area, obb_intersects, top_surface_height, FOOTPRINT_EPS,
};

/// Gap (m) above which an object counts as floating.
pub const DEFAULT_FLOAT_EPS: f64 = 0.01;

pub const METRICS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("scene has no objects")]
    EmptyScene,
    #[error("nothing to aggregate")]
    EmptyInput,
}

/// Per object, whether it intersects at least one other object.
pub fn colliding_flags(scene: &Scene) -> Vec<bool> {
    let objs = &scene.objects;
    let mut grid = UniformGrid::new(0.5);
    for (i, o) in objs.iter().enumerate() {
        grid.insert(i, &o.bbox);
    }
    let mut flags = vec![false; objs.len()];
    for i in 0..objs.len() {
        for j in grid.query(&objs[i].bbox) {
            if j > i && obb_intersects(&objs[i].bbox, &objs[j].bbox) {
                flags[i] = true;
                flags[j] = true;
            }
        }
    }
    flags
}

/// Fraction of objects intersecting at least one other object.
pub fn collision_rate(scene: &Scene) -> Result<f64, EvalError> {
    if scene.objects.is_empty() {
        return Err(EvalError::EmptyScene);
    }
    let flags = colliding_flags(scene);
    Ok(flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64)
}

/// An object floats when its bottom is more than `eps` above the floor and
/// more than `eps` above every top surface under its footprint that is not
/// above its bottom.
pub fn floating_flags(scene: &Scene, eps: f64) -> Vec<bool> {
    let floor = scene.boundary.floor_height();
    let objs = &scene.objects;
    objs.iter()
        .enumerate()
        .map(|(i, o)| {
            let bottom = bottom_surface_height(&o.bbox);
            if bottom - floor <= eps {
                return false;
            }
            !objs.iter().enumerate().any(|(j, p)| {
                if i == j {
                    return false;
                }
                let top = top_surface_height(&p.bbox);
                (bottom - top).abs() <= eps && footprint_overlap_area(&p.bbox, &o.bbox) > FOOTPRINT_EPS
            })
        })
        .collect()
}

pub fn floating_rate(scene: &Scene, eps: f64) -> Result<f64, EvalError> {
    if scene.objects.is_empty() {
        return Err(EvalError::EmptyScene);
    }
    let flags = floating_flags(scene, eps);
    Ok(flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub collision_rate: f64,
    pub floating_rate: f64,
    pub acceptance_rate: f64,
    pub resamples_per_object: f64,
    pub object_count: usize,
}

pub fn scene_metrics(scene: &Scene, report: &PlacementReport, eps: f64) -> Result<SceneMetrics, EvalError> {
    Ok(SceneMetrics {
        collision_rate: collision_rate(scene)?,
        floating_rate: floating_rate(scene, eps)?,
        acceptance_rate: report.acceptance_rate,
        resamples_per_object: report.resamples_per_object,
        object_count: scene.objects.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Sample mean and (n - 1) standard deviation; sd is 0 for one value.
    pub fn of(values: &[f64]) -> Result<Self, EvalError> {
        let n = values.len();
        if n == 0 {
            return Err(EvalError::EmptyInput);
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Ok(Self { mean, sd })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub scenes: usize,
    pub collision_rate: MeanSd,
    pub floating_rate: MeanSd,
    pub acceptance_rate: MeanSd,
    pub resamples_per_object: MeanSd,
    pub object_count: MeanSd,
}

pub fn aggregate(metrics: &[SceneMetrics]) -> Result<MetricsSummary, EvalError> {
    let field = |f: fn(&SceneMetrics) -> f64| MeanSd::of(&metrics.iter().map(f).collect::<Vec<_>>());
    Ok(MetricsSummary {
        scenes: metrics.len(),
        collision_rate: field(|m| m.collision_rate)?,
        floating_rate: field(|m| m.floating_rate)?,
        acceptance_rate: field(|m| m.acceptance_rate)?,
        resamples_per_object: field(|m| m.resamples_per_object)?,
        object_count: field(|m| m.object_count as f64)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRow {
    pub scene: String,
    pub metrics: SceneMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedScene {
    pub scene: String,
    pub reason: String,
}

/// Per-scene rows plus an aggregate footer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: u32,
    pub rows: Vec<SceneRow>,
    pub skipped: Vec<SkippedScene>,
    pub aggregate: Option<MetricsSummary>,
}

impl MetricsReport {
    pub fn new(rows: Vec<SceneRow>, skipped: Vec<SkippedScene>) -> Self {
        let metrics: Vec<SceneMetrics> = rows.iter().map(|r| r.metrics).collect();
        Self {
            version: METRICS_FORMAT_VERSION,
            aggregate: aggregate(&metrics).ok(),
            rows,
            skipped,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::PlacedObject;
    use crate::geometry::{Aabb, OrientedBox};
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn obj(id: &str, c: [f64; 3], s: [f64; 3]) -> PlacedObject {
        PlacedObject {
            id: id.into(),
            category: "x".into(),
            bbox: OrientedBox::axis_aligned(Vector3::from(c), Vector3::from(s)).unwrap(),
            support: "floor".into(),
            functional: None,
        }
    }

    fn scene(objects: Vec<PlacedObject>) -> Scene {
        Scene {
            boundary: Aabb::new([0.0, 0.0, 0.0], [6.0, 6.0, 3.0]),
            objects,
        }
    }

    #[test]
    fn one_overlapping_pair_of_four() {
        let s = scene(vec![
            obj("a", [1.0, 1.0, 0.5], [1.0, 1.0, 1.0]),
            obj("b", [1.5, 1.0, 0.5], [1.0, 1.0, 1.0]),
            obj("c", [4.0, 1.0, 0.5], [1.0, 1.0, 1.0]),
            obj("d", [4.0, 4.0, 0.5], [1.0, 1.0, 1.0]),
        ]);
        assert_eq!(collision_rate(&s).unwrap(), 0.5);
        assert_eq!(floating_rate(&s, DEFAULT_FLOAT_EPS).unwrap(), 0.0);
        assert_eq!(collision_rate(&scene(vec![])), Err(EvalError::EmptyScene));
        assert_eq!(floating_rate(&scene(vec![]), 0.01), Err(EvalError::EmptyScene));
    }

    fn brute_force_rate(s: &Scene) -> f64 {
        let n = s.objects.len();
        let hits = (0..n)
            .filter(|&i| (0..n).any(|j| j != i && obb_intersects(&s.objects[i].bbox, &s.objects[j].bbox)))
            .count();
        hits as f64 / n as f64
    }

    #[test]
    fn indexed_rate_matches_brute_force_and_ignores_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..300 {
            let n = rng.gen_range(1..30);
            let mut objects: Vec<PlacedObject> = (0..n)
                .map(|i| {
                    let c = [rng.gen_range(0.0..6.0), rng.gen_range(0.0..6.0), rng.gen_range(0.0..3.0)];
                    let s = [rng.gen_range(0.1..1.2), rng.gen_range(0.1..1.2), rng.gen_range(0.1..1.2)];
                    let b = OrientedBox::with_yaw(Vector3::from(c), Vector3::from(s), rng.gen_range(0.0..6.3)).unwrap();
                    PlacedObject { bbox: b, ..obj(&format!("o{i}"), c, s) }
                })
                .collect();
            let s = scene(objects.clone());
            let rate = collision_rate(&s).unwrap();
            assert_eq!(rate, brute_force_rate(&s));
            objects.reverse();
            assert_eq!(collision_rate(&scene(objects)).unwrap(), rate);
        }
    }

    #[test]
    fn single_lifted_object_of_ten() {
        let mut objects: Vec<PlacedObject> = (0..10)
            .map(|i| obj(&format!("o{i}"), [0.5 + 0.55 * i as f64, 1.0, 0.25], [0.5, 0.5, 0.5]))
            .collect();
        // A book on the first box, then another lifted 0.3 m.
        objects[1] = obj("book", [0.5, 1.0, 0.52], [0.2, 0.2, 0.04]);
        assert_eq!(floating_rate(&scene(objects.clone()), 0.01).unwrap(), 0.0);
        objects[5] = obj("lifted", [0.5 + 0.55 * 5.0, 1.0, 0.55], [0.5, 0.5, 0.5]);
        assert!((floating_rate(&scene(objects), 0.01).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn aggregation() {
        let m = |c: f64| SceneMetrics {
            collision_rate: c,
            floating_rate: 0.0,
            acceptance_rate: 0.8,
            resamples_per_object: 0.25,
            object_count: 10,
        };
        let one = aggregate(&[m(0.3)]).unwrap();
        assert_eq!(one.collision_rate, MeanSd { mean: 0.3, sd: 0.0 });
        let two = aggregate(&[m(0.3), m(0.3)]).unwrap();
        assert_eq!(two.collision_rate.sd, 0.0);
        // Hand-computed: values 0.1, 0.2, 0.2, 0.3, 0.7 have mean 0.3 and
        // squared deviations summing to 0.22, so sd = sqrt(0.22 / 4).
        let five = aggregate(&[m(0.1), m(0.2), m(0.2), m(0.3), m(0.7)]).unwrap();
        assert!((five.collision_rate.mean - 0.3).abs() < 1e-12);
        assert!((five.collision_rate.sd - 0.055f64.sqrt()).abs() < 1e-12);
        assert_eq!(aggregate(&[]), Err(EvalError::EmptyInput));
    }
}
