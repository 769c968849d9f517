use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{HierarchySpec, ValidationError, FLOOR};

/// One generation step: place `dependent` on `support`, relative to
/// `functional` when present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationalTuple {
    pub dependent: String,
    pub support: String,
    pub functional: Option<String>,
}

/// Orders the spec for placement: anchors are visited breadth-first from the
/// floor, and each anchor's functional tree is walked depth-first. The
/// functional anchor is dropped when it is the support anchor itself.
pub fn serialize(spec: &HierarchySpec) -> Result<Vec<RelationalTuple>, ValidationError> {
    spec.validate()?;
    let s = spec.support();
    let mut out = Vec::with_capacity(s.len() - 1);
    for anchor in s.bfs() {
        let Some(tree) = spec.functional_tree(anchor) else {
            continue;
        };
        for n in tree.dfs().into_iter().skip(1) {
            let fparent = tree.parent(n).expect("non-root nodes have a parent");
            out.push(RelationalTuple {
                dependent: s.node(n).id.clone(),
                support: s.node(anchor).id.clone(),
                functional: (fparent != anchor).then(|| s.node(fparent).id.clone()),
            });
        }
    }
    Ok(out)
}

/// Index of the first tuple referencing an anchor that is neither the floor
/// nor an earlier dependent.
pub fn check_causality(tuples: &[RelationalTuple]) -> Result<(), usize> {
    let mut placed: HashSet<&str> = HashSet::from([FLOOR]);
    for (i, t) in tuples.iter().enumerate() {
        let ok = placed.contains(t.support.as_str())
            && t.functional.as_deref().is_none_or(|f| placed.contains(f))
            && t.dependent != t.support;
        if !ok {
            return Err(i);
        }
        placed.insert(&t.dependent);
    }
    Ok(())
}
