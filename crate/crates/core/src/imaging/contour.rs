//! Boundary tracing (Moore neighborhood) of labelled regions.

use super::components::components_of;
use super::{ImagingError, Label, LabelMask};

/// Ordered boundary pixels of a region. Consecutive entries are 8-adjacent;
/// the sequence is counter-clockwise in a y-up frame (visually clockwise in
/// image coordinates) and starts at the topmost, then leftmost region pixel.
pub type Contour = Vec<(usize, usize)>;

// Compass deltas in visual clockwise order starting north (y grows down).
const DELTA: [(isize, isize); 8] =
    [(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)];

fn dir_between(from: (isize, isize), to: (isize, isize)) -> usize {
    let d = (to.0 - from.0, to.1 - from.1);
    DELTA.iter().position(|&x| x == d).expect("pixels are 8-adjacent")
}

/// Trace the outer boundary of the largest 4-connected component of the
/// pixels matching `pred`. Returns `None` when no pixel matches.
///
/// The walk uses Moore-neighbor tracing with Jacob's stopping criterion, so
/// single-pixel-wide protrusions are traversed out and back and appear twice,
/// which keeps the contour a connected closed walk.
pub fn trace_region<F: Fn(usize, usize) -> bool>(
    width: usize,
    height: usize,
    pred: F,
) -> Option<Contour> {
    let comps = components_of(width, height, &pred);
    if comps.count() == 0 {
        return None;
    }
    let size = comps.sizes[0];
    let fg = |x: isize, y: isize| -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < width
            && (y as usize) < height
            && comps.labels[y as usize * width + x as usize] == 1
    };
    let start_idx = comps.labels.iter().position(|&v| v == 1).expect("component is non-empty");
    let start = ((start_idx % width) as isize, (start_idx / width) as isize);

    let mut contour = vec![(start.0 as usize, start.1 as usize)];
    let mut p = start;
    let mut b_dir = 6usize; // west of the start pixel is background by construction
    let mut first_move: Option<usize> = None;
    let step_cap = 4 * size + 8;

    loop {
        let mut found = None;
        for k in 1..=8 {
            let d = (b_dir + k) % 8;
            let q = (p.0 + DELTA[d].0, p.1 + DELTA[d].1);
            if fg(q.0, q.1) {
                found = Some((d, (b_dir + k - 1) % 8));
                break;
            }
        }
        let Some((d, before)) = found else {
            break; // isolated single pixel
        };
        if p == start {
            match first_move {
                None => first_move = Some(d),
                Some(d0) if d == d0 => break, // re-leaving the start the same way
                Some(_) => {}
            }
        }
        let b_pixel = (p.0 + DELTA[before].0, p.1 + DELTA[before].1);
        let q = (p.0 + DELTA[d].0, p.1 + DELTA[d].1);
        contour.push((q.0 as usize, q.1 as usize));
        b_dir = dir_between(q, b_pixel);
        p = q;
        if contour.len() > step_cap {
            debug_assert!(false, "tracing exceeded step cap");
            break;
        }
    }

    // The walk closes by re-entering the start pixel; drop that duplicate.
    if contour.len() > 1 && *contour.last().unwrap() == (start.0 as usize, start.1 as usize) {
        contour.pop();
    }
    Some(contour)
}

/// Trace the boundary of the largest component of `label` in `mask`.
///
/// With `closed = true` the starting pixel is repeated at the end (explicitly
/// closed polyline); otherwise closure is implicit.
pub fn extract_contour(
    mask: &LabelMask,
    label: Label,
    closed: bool,
) -> Result<Contour, ImagingError> {
    let mut contour = trace_region(mask.width(), mask.height(), |x, y| {
        mask.get(x, y) == label.code()
    })
    .ok_or(ImagingError::LabelAbsent { label })?;
    if closed && contour.len() > 1 {
        contour.push(contour[0]);
    }
    Ok(contour)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_mask() -> LabelMask {
        let mut data = vec![0u8; 100];
        for y in 3..7 {
            for x in 3..7 {
                data[y * 10 + x] = 1;
            }
        }
        LabelMask::new(10, 10, data).unwrap()
    }

    #[test]
    fn square_boundary_order_is_frozen() {
        // Independently enumerated: 12 boundary pixels, starting topmost-
        // leftmost, counter-clockwise in a y-up frame (top row left→right,
        // right column down, bottom row right→left, left column up).
        let expected = vec![
            (3, 3), (4, 3), (5, 3), (6, 3),
            (6, 4), (6, 5), (6, 6),
            (5, 6), (4, 6), (3, 6),
            (3, 5), (3, 4),
        ];
        let got = extract_contour(&square_mask(), Label::Lv, false).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn closed_flag_repeats_start() {
        let got = extract_contour(&square_mask(), Label::Lv, true).unwrap();
        assert_eq!(got.len(), 13);
        assert_eq!(got[0], *got.last().unwrap());
    }

    #[test]
    fn consecutive_pixels_are_8_adjacent() {
        let got = extract_contour(&square_mask(), Label::Lv, false).unwrap();
        for w in got.windows(2) {
            let dx = (w[0].0 as isize - w[1].0 as isize).abs();
            let dy = (w[0].1 as isize - w[1].1 as isize).abs();
            assert!(dx <= 1 && dy <= 1 && (dx, dy) != (0, 0));
        }
    }

    #[test]
    fn single_pixel_contour() {
        let mut data = vec![0u8; 25];
        data[12] = 3;
        let mask = LabelMask::new(5, 5, data).unwrap();
        let got = extract_contour(&mask, Label::La, false).unwrap();
        assert_eq!(got, vec![(2, 2)]);
    }

    #[test]
    fn missing_label_errors() {
        let err = extract_contour(&square_mask(), Label::Myo, false).unwrap_err();
        assert!(matches!(err, ImagingError::LabelAbsent { label: Label::Myo }));
    }

    #[test]
    fn traces_largest_component_only() {
        let mut data = vec![0u8; 100];
        data[0] = 1; // lone pixel at (0,0)
        for y in 3..7 {
            for x in 3..7 {
                data[y * 10 + x] = 1;
            }
        }
        let mask = LabelMask::new(10, 10, data).unwrap();
        let got = extract_contour(&mask, Label::Lv, false).unwrap();
        assert_eq!(got.len(), 12);
        assert!(!got.contains(&(0, 0)));
    }
}
