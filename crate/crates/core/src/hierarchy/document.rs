//! The hierarchy interchange document:
//!
//! ```json
//! {
//!   "version": 1,
//!   "support_tree": [{"parent": "Floor", "child": "desk_1"}],
//!   "functional_trees": [
//!     {"support_anchor": "desk_1", "edges": [{"parent": "desk_1", "child": "laptop_1"}]}
//!   ]
//! }
//! ```
//!
//! `version` may be omitted. The root may be spelled in any case. Nodes that
//! appear only inside a functional tree are taken to rest on that tree's
//! support anchor; support children missing from their anchor's functional
//! tree hang directly off the anchor.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{base_label, FunctionalTree, HierarchySpec, SupportTree, ValidationError, FLOOR};

pub const HIERARCHY_FORMAT_VERSION: u32 = 1;

fn default_version() -> u32 {
    HIERARCHY_FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: String,
    pub child: String,
}

impl Edge {
    pub fn new(parent: &str, child: &str) -> Self {
        Self {
            parent: parent.to_string(),
            child: child.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionalTreeDoc {
    pub support_anchor: String,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyDocument {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub support_tree: Vec<Edge>,
    #[serde(default)]
    pub functional_trees: Vec<FunctionalTreeDoc>,
}

impl Default for HierarchyDocument {
    fn default() -> Self {
        Self {
            version: HIERARCHY_FORMAT_VERSION,
            support_tree: Vec::new(),
            functional_trees: Vec::new(),
        }
    }
}

impl HierarchyDocument {
    pub fn from_spec(spec: &HierarchySpec) -> Self {
        let s = spec.support();
        let support_tree = s.bfs()[1..]
            .iter()
            .map(|&n| Edge::new(&s.node(s.parent(n).unwrap()).id, &s.node(n).id))
            .collect();
        let functional_trees = spec
            .functional_trees()
            .iter()
            .map(|t| FunctionalTreeDoc {
                support_anchor: s.node(t.anchor()).id.clone(),
                edges: t.dfs()[1..]
                    .iter()
                    .map(|&n| Edge::new(&s.node(t.parent(n).unwrap()).id, &s.node(n).id))
                    .collect(),
            })
            .collect();
        Self {
            version: HIERARCHY_FORMAT_VERSION,
            support_tree,
            functional_trees,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hierarchy documents always serialize")
    }
}

fn normalize(label: &str) -> Result<String, ValidationError> {
    if label.is_empty() || label == "-" || label.chars().any(char::is_whitespace) {
        return Err(ValidationError::InvalidLabel(label.to_string()));
    }
    Ok(if label.eq_ignore_ascii_case(FLOOR) {
        FLOOR.to_string()
    } else {
        label.to_string()
    })
}

pub fn parse_hierarchy_str(text: &str) -> Result<HierarchySpec, ValidationError> {
    let doc: HierarchyDocument =
        serde_json::from_str(text).map_err(|e| ValidationError::Malformed(e.to_string()))?;
    parse_hierarchy(&doc)
}

/// Validates a document and builds the spec it describes.
pub fn parse_hierarchy(doc: &HierarchyDocument) -> Result<HierarchySpec, ValidationError> {
    if doc.version != HIERARCHY_FORMAT_VERSION {
        return Err(ValidationError::UnsupportedVersion(doc.version));
    }

    let mut parent_of: HashMap<String, String> = HashMap::new();
    let mut children_of: HashMap<String, Vec<String>> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    for e in &doc.support_tree {
        let (p, c) = (normalize(&e.parent)?, normalize(&e.child)?);
        if c == FLOOR {
            return Err(ValidationError::FloorAsChild { parent: p, child: c });
        }
        if p == c {
            return Err(ValidationError::Cycle { parent: p, child: c });
        }
        if parent_of.contains_key(&c) {
            return Err(ValidationError::MultipleParents { parent: p, child: c });
        }
        parent_of.insert(c.clone(), p.clone());
        children_of.entry(p).or_default().push(c.clone());
        order.push(c);
    }

    // Objects named only by a functional tree rest on its anchor.
    let mut seen_in_support: HashSet<String> = parent_of.keys().cloned().collect();
    seen_in_support.extend(children_of.keys().cloned());
    for t in &doc.functional_trees {
        let anchor = normalize(&t.support_anchor)?;
        for e in &t.edges {
            for n in [normalize(&e.parent)?, normalize(&e.child)?] {
                if n != FLOOR && n != anchor && !seen_in_support.contains(&n) {
                    seen_in_support.insert(n.clone());
                    parent_of.insert(n.clone(), anchor.clone());
                    children_of.entry(anchor.clone()).or_default().push(n.clone());
                    order.push(n);
                }
            }
        }
    }

    let mut support = SupportTree::floor_only();
    let mut queue = VecDeque::from([FLOOR.to_string()]);
    while let Some(p) = queue.pop_front() {
        let pidx = support.index_of(&p).expect("queued nodes are inserted");
        for c in children_of.get(&p).into_iter().flatten() {
            support.push(c, base_label(c), pidx);
            queue.push_back(c.clone());
        }
    }
    if let Some(stray) = order.iter().find(|n| !support.contains(n)) {
        return Err(ungrounded(stray, &parent_of));
    }

    let mut trees: Vec<FunctionalTree> = Vec::new();
    for t in &doc.functional_trees {
        let anchor_id = normalize(&t.support_anchor)?;
        let anchor = support
            .index_of(&anchor_id)
            .ok_or_else(|| ValidationError::UnknownAnchor(anchor_id.clone()))?;
        if trees.iter().any(|x| x.anchor == anchor) {
            return Err(ValidationError::DuplicateFunctionalTree(anchor_id));
        }
        let members: HashSet<usize> = support.children(anchor).iter().copied().collect();
        if members.is_empty() {
            return Err(ValidationError::LeafAnchor(anchor_id));
        }
        let mut tree = FunctionalTree::new(anchor);
        for e in &t.edges {
            let (p, c) = (normalize(&e.parent)?, normalize(&e.child)?);
            let pi = support.index_of(&p);
            let ci = support.index_of(&c);
            if ci == Some(anchor) || p == c {
                return Err(ValidationError::Cycle { parent: p, child: c });
            }
            let ok_parent = pi.is_some_and(|i| i == anchor || members.contains(&i));
            let ok_child = ci.is_some_and(|i| members.contains(&i));
            if !ok_parent || !ok_child {
                return Err(ValidationError::CrossSurface {
                    anchor: anchor_id,
                    parent: p,
                    child: c,
                });
            }
            let ci = ci.unwrap();
            if tree.parent(ci).is_some() {
                return Err(ValidationError::MultipleParents { parent: p, child: c });
            }
            tree.link(pi.unwrap(), ci);
        }
        let reached: HashSet<usize> = tree.dfs().into_iter().collect();
        let mut linked: Vec<usize> = tree.parent.keys().copied().collect();
        linked.sort_unstable();
        if let Some(&c) = linked.iter().find(|c| !reached.contains(c)) {
            return Err(ValidationError::Cycle {
                parent: support.node(tree.parent(c).unwrap()).id.clone(),
                child: support.node(c).id.clone(),
            });
        }
        for &m in support.children(anchor) {
            if tree.parent(m).is_none() {
                tree.link(anchor, m);
            }
        }
        trees.push(tree);
    }
    for idx in 0..support.len() {
        if !support.children(idx).is_empty() && !trees.iter().any(|t| t.anchor == idx) {
            let mut tree = FunctionalTree::new(idx);
            for &m in support.children(idx) {
                tree.link(idx, m);
            }
            trees.push(tree);
        }
    }
    trees.sort_by_key(|t| t.anchor);

    let spec = HierarchySpec {
        support,
        functional: trees,
    };
    spec.validate()?;
    Ok(spec)
}

/// Classifies a node unreachable from the floor: either its ancestry loops
/// or it tops out at a node other than the floor.
fn ungrounded(start: &str, parent_of: &HashMap<String, String>) -> ValidationError {
    let mut visited = HashSet::new();
    let mut cur = start.to_string();
    loop {
        visited.insert(cur.clone());
        match parent_of.get(&cur) {
            Some(p) if visited.contains(p) => {
                return ValidationError::Cycle {
                    parent: p.clone(),
                    child: cur,
                }
            }
            Some(p) => {
                if !parent_of.contains_key(p) {
                    return ValidationError::NotGrounded {
                        parent: p.clone(),
                        child: cur,
                    };
                }
                cur = p.clone();
            }
            None => unreachable!("every stray node has a parent"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const INTERCHANGE_EXAMPLE: &str = r#"{
      "support_tree": [
        {"parent": "Floor", "child": "Object_A"},
        {"parent": "Object_A", "child": "Object_B"}
      ],
      "functional_trees": [
        {
          "support_anchor": "Object_A",
          "edges": [
            {"parent": "Object_A", "child": "Object_B"},
            {"parent": "Object_B", "child": "Object_C"}
          ]
        }
      ]
    }"#;

    #[test]
    fn accepts_interchange_example() {
        let spec = parse_hierarchy_str(INTERCHANGE_EXAMPLE).unwrap();
        let s = spec.support();
        assert_eq!(s.len(), 4);
        let a = s.index_of("Object_A").unwrap();
        let b = s.index_of("Object_B").unwrap();
        let c = s.index_of("Object_C").unwrap();
        assert_eq!(s.parent(a), Some(0));
        assert_eq!(s.parent(c), Some(a));
        let t = spec.functional_tree(a).unwrap();
        assert_eq!(t.parent(c), Some(b));
        assert_eq!(t.parent(b), Some(a));
        // Category of an unnumbered label is the label itself.
        assert_eq!(s.node(a).category, "Object_A");
    }

    #[test]
    fn rejects_child_with_two_parents() {
        let text = r#"{"support_tree": [
            {"parent": "floor", "child": "table_1"},
            {"parent": "floor", "child": "desk_1"},
            {"parent": "desk_1", "child": "table_1"}]}"#;
        assert_eq!(
            parse_hierarchy_str(text).unwrap_err(),
            ValidationError::MultipleParents {
                parent: "desk_1".into(),
                child: "table_1".into()
            }
        );
    }

    #[test]
    fn rejects_cross_surface_functional_edge() {
        let text = r#"{"support_tree": [
            {"parent": "floor", "child": "desk_1"},
            {"parent": "floor", "child": "shelf_1"},
            {"parent": "desk_1", "child": "laptop_1"},
            {"parent": "shelf_1", "child": "book_1"}],
          "functional_trees": [{"support_anchor": "desk_1", "edges": [
            {"parent": "book_1", "child": "laptop_1"}]}]}"#;
        assert!(matches!(
            parse_hierarchy_str(text).unwrap_err(),
            ValidationError::CrossSurface { ref parent, .. } if parent == "book_1"
        ));
    }

    #[test]
    fn rejects_ungrounded_and_cyclic() {
        let orphan = r#"{"support_tree": [
            {"parent": "floor", "child": "bed_1"},
            {"parent": "shelf_1", "child": "book_1"}]}"#;
        assert_eq!(
            parse_hierarchy_str(orphan).unwrap_err(),
            ValidationError::NotGrounded {
                parent: "shelf_1".into(),
                child: "book_1".into()
            }
        );
        let cyclic = r#"{"support_tree": [
            {"parent": "floor", "child": "bed_1"},
            {"parent": "a_1", "child": "b_1"},
            {"parent": "b_1", "child": "a_1"}]}"#;
        assert!(matches!(parse_hierarchy_str(cyclic).unwrap_err(), ValidationError::Cycle { .. }));
        let floor_child = r#"{"support_tree": [{"parent": "bed_1", "child": "Floor"}]}"#;
        assert!(matches!(
            parse_hierarchy_str(floor_child).unwrap_err(),
            ValidationError::FloorAsChild { .. }
        ));
    }

    #[test]
    fn rejects_functional_cycle_and_bad_version() {
        let text = r#"{"support_tree": [
            {"parent": "floor", "child": "desk_1"},
            {"parent": "desk_1", "child": "a_1"},
            {"parent": "desk_1", "child": "b_1"}],
          "functional_trees": [{"support_anchor": "desk_1", "edges": [
            {"parent": "a_1", "child": "b_1"},
            {"parent": "b_1", "child": "a_1"}]}]}"#;
        assert!(matches!(parse_hierarchy_str(text).unwrap_err(), ValidationError::Cycle { .. }));
        let v2 = r#"{"version": 2, "support_tree": []}"#;
        assert_eq!(parse_hierarchy_str(v2).unwrap_err(), ValidationError::UnsupportedVersion(2));
        assert!(matches!(parse_hierarchy_str("[1,2]").unwrap_err(), ValidationError::Malformed(_)));
    }

    #[test]
    fn fills_missing_functional_structure() {
        let text = r#"{"support_tree": [
            {"parent": "floor", "child": "desk_1"},
            {"parent": "desk_1", "child": "laptop_1"},
            {"parent": "desk_1", "child": "cup_1"}]}"#;
        let spec = parse_hierarchy_str(text).unwrap();
        assert_eq!(spec.functional_trees().len(), 2);
        let desk = spec.support().index_of("desk_1").unwrap();
        assert_eq!(spec.functional_tree(desk).unwrap().children(desk).len(), 2);
    }

    #[test]
    fn document_round_trip() {
        let spec = parse_hierarchy_str(INTERCHANGE_EXAMPLE).unwrap();
        let doc = HierarchyDocument::from_spec(&spec);
        let back = parse_hierarchy_str(&doc.to_json()).unwrap();
        assert_eq!(back, spec);
        assert_eq!(HierarchyDocument::from_spec(&back), doc);
    }
}
