use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{parse_hierarchy, HierarchyDocument, HierarchySpec, ValidationError};

pub const STATS_FORMAT_VERSION: u32 = 1;

/// Co-occurrence counts driving hierarchy expansion.
///
/// `sup_dep[anchor][dep]` counts objects of category `dep` resting on an
/// `anchor`. `func_dep[anchor][leaf][cand]` counts `cand` objects placed
/// relative to a `leaf` on an `anchor`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatTables {
    #[serde(default)]
    pub sup_dep: BTreeMap<String, BTreeMap<String, u64>>,
    #[serde(default)]
    pub func_dep: BTreeMap<String, BTreeMap<String, BTreeMap<String, u64>>>,
}

#[derive(Serialize, Deserialize)]
struct StatsDocument {
    version: u32,
    #[serde(flatten)]
    tables: StatTables,
}

impl StatTables {
    pub fn is_empty(&self) -> bool {
        self.sup_dep.is_empty() && self.func_dep.is_empty()
    }

    pub fn add_support(&mut self, anchor: &str, dep: &str, n: u64) {
        *self
            .sup_dep
            .entry(anchor.to_string())
            .or_default()
            .entry(dep.to_string())
            .or_default() += n;
    }

    pub fn add_functional(&mut self, anchor: &str, leaf: &str, cand: &str, n: u64) {
        *self
            .func_dep
            .entry(anchor.to_string())
            .or_default()
            .entry(leaf.to_string())
            .or_default()
            .entry(cand.to_string())
            .or_default() += n;
    }

    /// Adds every count of `other`; associative and commutative.
    pub fn merge(&mut self, other: &StatTables) {
        for (a, deps) in &other.sup_dep {
            for (d, n) in deps {
                self.add_support(a, d, *n);
            }
        }
        for (a, leaves) in &other.func_dep {
            for (l, cands) in leaves {
                for (c, n) in cands {
                    self.add_functional(a, l, c, *n);
                }
            }
        }
    }

    pub fn support_count(&self, anchor: &str, dep: &str) -> u64 {
        self.sup_dep
            .get(anchor)
            .and_then(|m| m.get(dep))
            .copied()
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        let doc = StatsDocument {
            version: STATS_FORMAT_VERSION,
            tables: self.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("stat tables always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ValidationError> {
        let doc: StatsDocument =
            serde_json::from_str(text).map_err(|e| ValidationError::Malformed(e.to_string()))?;
        if doc.version != STATS_FORMAT_VERSION {
            return Err(ValidationError::UnsupportedVersion(doc.version));
        }
        Ok(doc.tables)
    }
}

/// The configured seed hierarchy for a scene type.
pub fn base_template(
    scene_type: &str,
    templates: &BTreeMap<String, HierarchyDocument>,
) -> Result<HierarchySpec, ValidationError> {
    let doc = templates
        .get(scene_type)
        .ok_or_else(|| ValidationError::UnknownSceneType(scene_type.to_string()))?;
    parse_hierarchy(doc)
}

/// Base template for `scene_type` grown by [`expand`].
pub fn generate<R: Rng + ?Sized>(
    scene_type: &str,
    templates: &BTreeMap<String, HierarchyDocument>,
    stats: &StatTables,
    n_max: usize,
    k: f64,
    rng: &mut R,
) -> Result<HierarchySpec, ValidationError> {
    let base = base_template(scene_type, templates)?;
    Ok(expand(&base, stats, n_max, k, rng))
}

/// Grows `base` from its functional leaves. Each (leaf, anchor) pair offers
/// every candidate in `func_dep[anchor][leaf]`, accepted with probability
/// `min(1, k * freq / sup_dep[anchor][leaf])`. Accepted nodes rest on the
/// anchor, hang off the leaf, and are queued for expansion themselves. At
/// most `n_max` nodes are added.
pub fn expand<R: Rng + ?Sized>(
    base: &HierarchySpec,
    stats: &StatTables,
    n_max: usize,
    k: f64,
    rng: &mut R,
) -> HierarchySpec {
    let mut spec = base.clone();
    let mut counters: HashMap<String, usize> = HashMap::new();
    for node in spec.support().nodes() {
        *counters.entry(node.category.clone()).or_default() += 1;
    }

    let mut queue: VecDeque<(usize, usize)> = spec
        .functional_trees()
        .iter()
        .flat_map(|t| t.leaves().into_iter().map(move |l| (l, t.anchor())))
        .collect();
    let mut added = 0;
    while added < n_max {
        let Some((leaf, anchor)) = queue.pop_front() else {
            break;
        };
        let anchor_cat = spec.support().node(anchor).category.clone();
        let leaf_cat = spec.support().node(leaf).category.clone();
        let total = stats.support_count(&anchor_cat, &leaf_cat);
        if total == 0 {
            continue;
        }
        let Some(cands) = stats.func_dep.get(&anchor_cat).and_then(|m| m.get(&leaf_cat)) else {
            continue;
        };
        for (cand, freq) in cands {
            let p = (k * *freq as f64 / total as f64).clamp(0.0, 1.0);
            let draw: f64 = rng.gen();
            if draw < p && added < n_max {
                let id = fresh_label(&spec, cand, &mut counters);
                let anchor_id = spec.support().node(anchor).id.clone();
                let leaf_id = spec.support().node(leaf).id.clone();
                let idx = spec
                    .add_node(&id, cand, &anchor_id, Some(&leaf_id))
                    .expect("fresh label on an existing co-surface leaf");
                queue.push_back((idx, anchor));
                added += 1;
            }
        }
    }
    spec
}

fn fresh_label(spec: &HierarchySpec, category: &str, counters: &mut HashMap<String, usize>) -> String {
    let n = counters.entry(category.to_string()).or_default();
    loop {
        *n += 1;
        let id = format!("{category}_{n}");
        if !spec.support().contains(&id) {
            return id;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{parse_hierarchy_str, Edge};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk_template() -> BTreeMap<String, HierarchyDocument> {
        let doc = HierarchyDocument {
            support_tree: vec![Edge::new("floor", "table_1"), Edge::new("table_1", "laptop_1")],
            ..Default::default()
        };
        BTreeMap::from([("office".to_string(), doc)])
    }

    fn rich_stats() -> StatTables {
        let mut st = StatTables::default();
        st.add_support("floor", "table", 10);
        st.add_support("floor", "chair", 10);
        st.add_support("table", "laptop", 10);
        st.add_support("table", "keyboard", 8);
        st.add_support("table", "mouse", 6);
        st.add_functional("floor", "table", "chair", 9);
        st.add_functional("floor", "chair", "chair", 4);
        st.add_functional("table", "laptop", "keyboard", 8);
        st.add_functional("table", "keyboard", "mouse", 6);
        st.add_functional("table", "laptop", "mouse", 3);
        st
    }

    #[test]
    fn single_certain_candidate() {
        let mut st = StatTables::default();
        st.add_support("table", "laptop", 10);
        st.add_functional("table", "laptop", "keyboard", 10);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = generate("office", &desk_template(), &st, 1, 1.0, &mut rng).unwrap();
        let s = spec.support();
        assert_eq!(s.len(), 4);
        let kb = s.index_of("keyboard_1").unwrap();
        let table = s.index_of("table_1").unwrap();
        let laptop = s.index_of("laptop_1").unwrap();
        assert_eq!(s.parent(kb), Some(table));
        assert_eq!(spec.functional_tree(table).unwrap().parent(kb), Some(laptop));
    }

    #[test]
    fn zero_k_returns_template() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = base_template("office", &desk_template()).unwrap();
        let spec = generate("office", &desk_template(), &rich_stats(), 50, 0.0, &mut rng).unwrap();
        assert_eq!(spec, base);
    }

    #[test]
    fn unknown_scene_type() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            generate("kitchen", &desk_template(), &rich_stats(), 3, 1.0, &mut rng).unwrap_err(),
            ValidationError::UnknownSceneType("kitchen".into())
        );
    }

    #[test]
    fn template_with_floor_only_and_orphans() {
        let empty = BTreeMap::from([("void".to_string(), HierarchyDocument::default())]);
        let spec = base_template("void", &empty).unwrap();
        assert_eq!(spec.node_count(), 1);
        assert!(spec.functional_trees().is_empty());
        let orphan = r#"{"support_tree": [{"parent": "shelf_1", "child": "book_1"}]}"#;
        assert!(parse_hierarchy_str(orphan).is_err());
    }

    #[test]
    fn bounded_unique_and_deterministic() {
        let template = desk_template();
        let stats = rich_stats();
        for seed in 0..200u64 {
            let n_max = (seed % 7) as usize;
            let k = (seed % 5) as f64 * 0.6;
            let a = generate("office", &template, &stats, n_max, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = generate("office", &template, &stats, n_max, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a, b);
            a.validate().unwrap();
            assert!(a.node_count() - 3 <= n_max);
            let mut ids: Vec<&str> = a.support().nodes().iter().map(|n| n.id.as_str()).collect();
            ids.sort_unstable();
            ids.dedup();
            assert_eq!(ids.len(), a.node_count());
            for n in a.support().nodes() {
                let known = n.category == "floor"
                    || stats.sup_dep.values().any(|m| m.contains_key(&n.category))
                    || ["table", "laptop"].contains(&n.category.as_str());
                assert!(known, "unexpected category {}", n.category);
            }
        }
    }

    #[test]
    fn stats_json_round_trip_and_merge() {
        let st = rich_stats();
        assert_eq!(StatTables::from_json(&st.to_json()).unwrap(), st);
        let mut twice = st.clone();
        twice.merge(&st);
        assert_eq!(twice.support_count("table", "laptop"), 20);
        let bad = st.to_json().replacen("\"version\": 1", "\"version\": 9", 1);
        assert_eq!(StatTables::from_json(&bad).unwrap_err(), ValidationError::UnsupportedVersion(9));
    }
}
