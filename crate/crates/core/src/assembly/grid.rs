use std::collections::HashMap;

use crate::geometry::{OrientedBox, CONTACT_TOLERANCE};

/// Uniform grid over the ground plane. Each box is registered in every
/// cell its world-aligned bounds touch.
#[derive(Debug, Clone)]
pub struct UniformGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl UniformGrid {
    pub fn new(cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "grid cell size must be positive");
        Self {
            cell,
            cells: HashMap::new(),
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn range(&self, b: &OrientedBox) -> (i64, i64, i64, i64) {
        let (lo, hi) = b.world_bounds();
        let f = |v: f64| (v / self.cell).floor() as i64;
        (
            f(lo.x - CONTACT_TOLERANCE),
            f(hi.x + CONTACT_TOLERANCE),
            f(lo.y - CONTACT_TOLERANCE),
            f(hi.y + CONTACT_TOLERANCE),
        )
    }

    pub fn insert(&mut self, idx: usize, b: &OrientedBox) {
        let (x0, x1, y0, y1) = self.range(b);
        for i in x0..=x1 {
            for j in y0..=y1 {
                self.cells.entry((i, j)).or_default().push(idx);
            }
        }
    }

    /// Sorted, deduplicated indices sharing at least one cell with `b`.
    pub fn query(&self, b: &OrientedBox) -> Vec<usize> {
        let (x0, x1, y0, y1) = self.range(b);
        let mut out = Vec::new();
        for i in x0..=x1 {
            for j in y0..=y1 {
                if let Some(v) = self.cells.get(&(i, j)) {
                    out.extend_from_slice(v);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}
