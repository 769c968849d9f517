//! Scene structure: a floor-rooted support tree plus one functional tree per
//! supporting surface.

mod document;
mod generate;
mod serialize;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub use document::{
    parse_hierarchy, parse_hierarchy_str, Edge, FunctionalTreeDoc, HierarchyDocument,
    HIERARCHY_FORMAT_VERSION,
};
pub use generate::{base_template, expand, generate, StatTables, STATS_FORMAT_VERSION};
pub use serialize::{check_causality, serialize, RelationalTuple};

/// Node id and category of the root.
pub const FLOOR: &str = "floor";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("edge {parent} -> {child} closes a cycle")]
    Cycle { parent: String, child: String },
    #[error("edge {parent} -> {child} gives `{child}` a second parent")]
    MultipleParents { parent: String, child: String },
    #[error("edge {parent} -> {child}: `{parent}` is not grounded to the floor")]
    NotGrounded { parent: String, child: String },
    #[error("edge {parent} -> {child}: the floor cannot be a child")]
    FloorAsChild { parent: String, child: String },
    #[error("functional edge {parent} -> {child} under `{anchor}` links objects on different support surfaces")]
    CrossSurface {
        anchor: String,
        parent: String,
        child: String,
    },
    #[error("functional tree anchored at unknown node `{0}`")]
    UnknownAnchor(String),
    #[error("functional tree anchored at `{0}`, which supports nothing")]
    LeafAnchor(String),
    #[error("more than one functional tree anchored at `{0}`")]
    DuplicateFunctionalTree(String),
    #[error("node `{0}` already exists")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("invalid node label `{0}`")]
    InvalidLabel(String),
    #[error("unsupported hierarchy document version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed hierarchy document: {0}")]
    Malformed(String),
    #[error("unknown scene type `{0}`")]
    UnknownSceneType(String),
}

/// A labeled instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub category: String,
}

/// Category of an instance label: the label with any `_<digits>` suffix
/// removed.
pub fn base_label(id: &str) -> &str {
    match id.rsplit_once('_') {
        Some((head, tail))
            if !head.is_empty() && !tail.is_empty() && tail.bytes().all(|b| b.is_ascii_digit()) =>
        {
            head
        }
        _ => id,
    }
}

/// Floor-rooted tree; an edge parent -> child means the parent physically
/// supports the child. Children keep insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportTree {
    nodes: Vec<Node>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    index: HashMap<String, usize>,
}

impl SupportTree {
    fn floor_only() -> Self {
        let mut index = HashMap::new();
        index.insert(FLOOR.to_string(), 0);
        Self {
            nodes: vec![Node {
                id: FLOOR.to_string(),
                category: FLOOR.to_string(),
            }],
            parent: vec![None],
            children: vec![Vec::new()],
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn parent(&self, idx: usize) -> Option<usize> {
        self.parent[idx]
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    fn push(&mut self, id: &str, category: &str, parent: usize) -> usize {
        let idx = self.nodes.len();
        self.nodes.push(Node {
            id: id.to_string(),
            category: category.to_string(),
        });
        self.parent.push(Some(parent));
        self.children.push(Vec::new());
        self.children[parent].push(idx);
        self.index.insert(id.to_string(), idx);
        idx
    }

    /// Breadth-first order from the floor; ties follow insertion order.
    pub fn bfs(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(n) = queue.pop_front() {
            order.push(n);
            queue.extend(self.children[n].iter().copied());
        }
        order
    }
}

/// Semantic placement dependencies among the objects sharing one support
/// surface, rooted at that surface's anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTree {
    anchor: usize,
    parent: HashMap<usize, usize>,
    children: HashMap<usize, Vec<usize>>,
}

impl FunctionalTree {
    fn new(anchor: usize) -> Self {
        Self {
            anchor,
            parent: HashMap::new(),
            children: HashMap::new(),
        }
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent.get(&node).copied()
    }

    pub fn children(&self, node: usize) -> &[usize] {
        self.children.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    fn link(&mut self, parent: usize, child: usize) {
        self.parent.insert(child, parent);
        self.children.entry(parent).or_default().push(child);
    }

    /// Depth-first pre-order from the anchor, children in insertion order.
    pub fn dfs(&self) -> Vec<usize> {
        let mut order = Vec::new();
        let mut stack = vec![self.anchor];
        while let Some(n) = stack.pop() {
            order.push(n);
            stack.extend(self.children(n).iter().rev().copied());
        }
        order
    }

    /// Nodes of the tree without functional children.
    pub fn leaves(&self) -> Vec<usize> {
        self.dfs()
            .into_iter()
            .filter(|n| self.children(*n).is_empty())
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.parent.len()
    }
}

/// One support tree plus a functional tree for every supporting node.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchySpec {
    support: SupportTree,
    functional: Vec<FunctionalTree>,
}

impl Default for HierarchySpec {
    fn default() -> Self {
        Self::floor_only()
    }
}

impl HierarchySpec {
    pub fn floor_only() -> Self {
        Self {
            support: SupportTree::floor_only(),
            functional: Vec::new(),
        }
    }

    pub fn support(&self) -> &SupportTree {
        &self.support
    }

    /// Functional trees ordered by their anchor's insertion index.
    pub fn functional_trees(&self) -> &[FunctionalTree] {
        &self.functional
    }

    pub fn functional_tree(&self, anchor: usize) -> Option<&FunctionalTree> {
        self.functional.iter().find(|t| t.anchor == anchor)
    }

    pub fn node_count(&self) -> usize {
        self.support.len()
    }

    /// Adds `id` on top of `support_parent`, placed relative to
    /// `functional_parent` (the anchor itself when `None`).
    pub fn add_node(
        &mut self,
        id: &str,
        category: &str,
        support_parent: &str,
        functional_parent: Option<&str>,
    ) -> Result<usize, ValidationError> {
        if id.is_empty() || id.chars().any(char::is_whitespace) || id == "-" {
            return Err(ValidationError::InvalidLabel(id.to_string()));
        }
        if category.is_empty() || category.chars().any(char::is_whitespace) || category == "-" {
            return Err(ValidationError::InvalidLabel(category.to_string()));
        }
        if self.support.contains(id) {
            return Err(ValidationError::DuplicateNode(id.to_string()));
        }
        let anchor = self
            .support
            .index_of(support_parent)
            .ok_or_else(|| ValidationError::UnknownNode(support_parent.to_string()))?;
        let fparent = match functional_parent {
            None => anchor,
            Some(p) => {
                let idx = self
                    .support
                    .index_of(p)
                    .ok_or_else(|| ValidationError::UnknownNode(p.to_string()))?;
                if idx != anchor && self.support.parent(idx) != Some(anchor) {
                    return Err(ValidationError::CrossSurface {
                        anchor: support_parent.to_string(),
                        parent: p.to_string(),
                        child: id.to_string(),
                    });
                }
                idx
            }
        };
        let idx = self.support.push(id, category, anchor);
        self.tree_mut(anchor).link(fparent, idx);
        Ok(idx)
    }

    fn tree_mut(&mut self, anchor: usize) -> &mut FunctionalTree {
        let pos = match self.functional.binary_search_by_key(&anchor, |t| t.anchor) {
            Ok(pos) => pos,
            Err(pos) => {
                self.functional.insert(pos, FunctionalTree::new(anchor));
                pos
            }
        };
        &mut self.functional[pos]
    }

    /// Checks the cross-consistency of the support and functional trees.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let s = &self.support;
        for t in &self.functional {
            let anchor_id = &s.node(t.anchor).id;
            if s.children(t.anchor).is_empty() {
                return Err(ValidationError::LeafAnchor(anchor_id.clone()));
            }
            let reached = t.dfs();
            let mut expected: Vec<usize> = s.children(t.anchor).to_vec();
            expected.push(t.anchor);
            expected.sort_unstable();
            let mut got = reached.clone();
            got.sort_unstable();
            if got != expected {
                let stray = expected
                    .iter()
                    .find(|n| !reached.contains(n))
                    .or_else(|| reached.iter().find(|n| !expected.contains(n)))
                    .copied()
                    .unwrap_or(t.anchor);
                let parent = t.parent(stray).unwrap_or(t.anchor);
                return Err(ValidationError::Cycle {
                    parent: s.node(parent).id.clone(),
                    child: s.node(stray).id.clone(),
                });
            }
        }
        for (idx, _) in s.nodes().iter().enumerate() {
            if !s.children(idx).is_empty() && self.functional_tree(idx).is_none() {
                return Err(ValidationError::UnknownAnchor(s.node(idx).id.clone()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for HierarchySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &n in &self.support.bfs()[1..] {
            let node = self.support.node(n);
            let parent = self.support.node(self.support.parent(n).unwrap());
            writeln!(f, "{} -> {}", parent.id, node.id)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_labels() {
        assert_eq!(base_label("table_3"), "table");
        assert_eq!(base_label("coffee_table_12"), "coffee_table");
        assert_eq!(base_label("Object_A"), "Object_A");
        assert_eq!(base_label("lamp"), "lamp");
        assert_eq!(base_label("_1"), "_1");
    }

    #[test]
    fn builder_keeps_trees_consistent() {
        let mut h = HierarchySpec::floor_only();
        h.add_node("table_1", "table", FLOOR, None).unwrap();
        h.add_node("laptop_1", "laptop", "table_1", None).unwrap();
        h.add_node("keyboard_1", "keyboard", "table_1", Some("laptop_1")).unwrap();
        h.validate().unwrap();
        assert_eq!(h.node_count(), 4);
        let t = h.functional_tree(1).unwrap();
        assert_eq!(t.leaves(), vec![3]);
        assert!(matches!(
            h.add_node("cup_1", "cup", FLOOR, Some("laptop_1")),
            Err(ValidationError::CrossSurface { .. })
        ));
        assert!(matches!(
            h.add_node("laptop_1", "laptop", "table_1", None),
            Err(ValidationError::DuplicateNode(_))
        ));
    }
}
