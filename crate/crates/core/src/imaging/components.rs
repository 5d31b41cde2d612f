//! 4-connected component labelling with a deterministic component order.

use super::{Label, LabelMask};

/// Result of component labelling for one structure label.
#[derive(Debug, Clone)]
pub struct Components {
    /// Per-pixel component id; 0 = not part of the structure, ids start at 1.
    /// Ids follow the sorted component order (largest first).
    pub labels: Vec<u32>,
    /// Component sizes, sorted descending; ties broken by the smaller
    /// row-major index of the component's first pixel.
    pub sizes: Vec<usize>,
    pub width: usize,
    pub height: usize,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Pixels `(x, y)` of component `id` (1-based), row-major order.
    pub fn pixels_of(&self, id: u32) -> Vec<(usize, usize)> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == id)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }
}

/// Label the 4-connected components of `label` pixels in `mask`.
pub fn connected_components(mask: &LabelMask, label: Label) -> Components {
    let pred = |x: usize, y: usize| mask.get(x, y) == label.code();
    components_of(mask.width(), mask.height(), pred)
}

/// Generic component labelling over an arbitrary pixel predicate.
pub(crate) fn components_of<F: Fn(usize, usize) -> bool>(
    width: usize,
    height: usize,
    pred: F,
) -> Components {
    let mut labels = vec![0u32; width * height];
    // (size, first_row_major_index, provisional_id)
    let mut found: Vec<(usize, usize, u32)> = Vec::new();
    let mut stack = Vec::new();
    let mut next_id = 1u32;

    for start in 0..width * height {
        let (sx, sy) = (start % width, start / width);
        if labels[start] != 0 || !pred(sx, sy) {
            continue;
        }
        let id = next_id;
        next_id += 1;
        let mut size = 0usize;
        stack.push((sx, sy));
        labels[start] = id;
        while let Some((x, y)) = stack.pop() {
            size += 1;
            let mut visit = |nx: usize, ny: usize| {
                let ni = ny * width + nx;
                if labels[ni] == 0 && pred(nx, ny) {
                    labels[ni] = id;
                    stack.push((nx, ny));
                }
            };
            if x > 0 {
                visit(x - 1, y);
            }
            if x + 1 < width {
                visit(x + 1, y);
            }
            if y > 0 {
                visit(x, y - 1);
            }
            if y + 1 < height {
                visit(x, y + 1);
            }
        }
        found.push((size, start, id));
    }

    // Deterministic order: largest first, ties by first pixel.
    found.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut remap = vec![0u32; next_id as usize];
    for (rank, &(_, _, id)) in found.iter().enumerate() {
        remap[id as usize] = rank as u32 + 1;
    }
    for v in labels.iter_mut() {
        if *v != 0 {
            *v = remap[*v as usize];
        }
    }
    Components { labels, sizes: found.iter().map(|f| f.0).collect(), width, height }
}
