//! Axis-aligned box algebra.
//!
//! Everything here works on continuous coordinates in double precision. Besides the usual
//! intersection-over-union, the module exposes the two one-sided overlap ratios that IoU is
//! built from:
//!
//! * **purity**: `overlap / area(b)`, the share of the detected box covered by the object;
//! * **integrity**: `overlap / area(g)`, the share of the object recovered by the detection.
//!
//! [`combine_iou`] turns a (purity, integrity) pair back into the exact IoU.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Axis-aligned rectangle with `(x1, y1)` as the minimum corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    /// Builds a box, rejecting inverted corners and non-finite coordinates.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        if ![x1, y1, x2, y2].iter().all(|c| c.is_finite()) {
            return Err(GeometryError::NonFinite { x1, y1, x2, y2 });
        }
        if x1 > x2 || y1 > y2 {
            return Err(GeometryError::InvertedCorners { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from two arbitrary corner points, reordering them as needed.
    pub fn from_corners(ax: f64, ay: f64, bx: f64, by: f64) -> Self {
        Self {
            x1: ax.min(bx),
            y1: ay.min(by),
            x2: ax.max(bx),
            y2: ay.max(by),
        }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::from_corners(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    #[inline]
    pub fn area(&self) -> f64 {
        area(self)
    }

    pub fn is_degenerate(&self) -> bool {
        self.area() <= 0.0
    }

    /// True when the point lies inside the closed rectangle.
    #[inline]
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    /// Box scaled by `ratio` about its center.
    pub fn expand(&self, ratio: f64) -> Self {
        let (cx, cy) = self.center();
        Self::from_center(cx, cy, self.width() * ratio, self.height() * ratio)
    }

    /// Intersection with `bounds`; collapses to a degenerate box on the nearest edge when the
    /// two do not meet.
    pub fn clip_to(&self, bounds: &BoundingBox) -> Self {
        let x1 = self.x1.clamp(bounds.x1, bounds.x2);
        let y1 = self.y1.clamp(bounds.y1, bounds.y2);
        let x2 = self.x2.clamp(bounds.x1, bounds.x2);
        let y2 = self.y2.clamp(bounds.y1, bounds.y2);
        Self::from_corners(x1, y1, x2, y2)
    }

    pub fn is_within(&self, bounds: &BoundingBox) -> bool {
        self.x1 >= bounds.x1 && self.y1 >= bounds.y1 && self.x2 <= bounds.x2 && self.y2 <= bounds.y2
    }
}

/// Overlap area of two boxes together with their individual areas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapStats {
    pub overlap: f64,
    pub a1: f64,
    pub a2: f64,
}

#[inline]
pub fn area(b: &BoundingBox) -> f64 {
    (b.x2 - b.x1) * (b.y2 - b.y1)
}

#[inline]
pub fn overlap_stats(b: &BoundingBox, g: &BoundingBox) -> OverlapStats {
    let iw = (b.x2.min(g.x2) - b.x1.max(g.x1)).max(0.0);
    let ih = (b.y2.min(g.y2) - b.y1.max(g.y1)).max(0.0);
    OverlapStats {
        overlap: iw * ih,
        a1: area(b),
        a2: area(g),
    }
}

/// Intersection over union; zero when both boxes are degenerate.
#[inline]
pub fn iou(b: &BoundingBox, g: &BoundingBox) -> f64 {
    let s = overlap_stats(b, g);
    let union = s.a1 + s.a2 - s.overlap;
    if union <= 0.0 {
        0.0
    } else {
        s.overlap / union
    }
}

/// Fraction of `b` covered by `g`. A degenerate `b` has purity 0; use
/// [`BoundingBox::is_degenerate`] to tell that case apart from a miss.
#[inline]
pub fn purity(b: &BoundingBox, g: &BoundingBox) -> f64 {
    let s = overlap_stats(b, g);
    if s.a1 <= 0.0 {
        0.0
    } else {
        s.overlap / s.a1
    }
}

/// Fraction of `g` covered by `b`. Ground truths must have positive area.
#[inline]
pub fn integrity(b: &BoundingBox, g: &BoundingBox) -> Result<f64, GeometryError> {
    let s = overlap_stats(b, g);
    if s.a2 <= 0.0 {
        return Err(GeometryError::DegenerateGroundTruth(*g));
    }
    Ok(s.overlap / s.a2)
}

/// Recombines purity and integrity into IoU.
///
/// `1 / (1/p + 1/i - 1)` rewritten as `p*i / (p + i - p*i)`, which stays finite at `p = 0` or
/// `i = 0`.
#[inline]
pub fn combine_iou(p: f64, i: f64) -> f64 {
    if p <= 0.0 || i <= 0.0 {
        return 0.0;
    }
    let pi = p * i;
    pi / (p + i - pi)
}

/// IoU gained by moving from proposal `p` to regressed box `b`, measured against `g`.
#[inline]
pub fn delta_iou(p: &BoundingBox, b: &BoundingBox, g: &BoundingBox) -> f64 {
    iou(b, g) - iou(p, g)
}

/// All-pairs IoU, `rows.len()` by `cols.len()`.
pub fn pairwise_iou(rows: &[BoundingBox], cols: &[BoundingBox]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| cols.iter().map(|c| iou(r, c)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn bb(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    /// Counts unit cells of the integer lattice covered by both boxes.
    fn lattice_overlap(b: &BoundingBox, g: &BoundingBox) -> f64 {
        let mut n = 0u32;
        for x in 0..64 {
            for y in 0..64 {
                let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                if b.contains_point(cx, cy) && g.contains_point(cx, cy) {
                    n += 1;
                }
            }
        }
        n as f64
    }

    #[test]
    fn area_examples() {
        assert_eq!(area(&bb(0.0, 0.0, 2.0, 2.0)), 4.0);
        assert_eq!(area(&bb(1.0, 1.0, 1.0, 5.0)), 0.0);
        assert_eq!(area(&bb(0.0, 0.0, 3.0, 1.5)), 4.5);
    }

    #[test]
    fn construction_rejects_bad_corners() {
        assert!(matches!(
            BoundingBox::new(2.0, 0.0, 1.0, 1.0),
            Err(GeometryError::InvertedCorners { .. })
        ));
        assert!(matches!(
            BoundingBox::new(0.0, 0.0, f64::NAN, 1.0),
            Err(GeometryError::NonFinite { .. })
        ));
        assert!(BoundingBox::new(1.0, 1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn overlap_examples() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let b = bb(1.0, 1.0, 3.0, 3.0);
        let s = overlap_stats(&a, &b);
        assert_eq!((s.overlap, s.a1, s.a2), (1.0, 4.0, 4.0));
        assert_eq!(s.overlap, lattice_overlap(&a, &b));
        let s = overlap_stats(&a, &a);
        assert_eq!((s.overlap, s.a1, s.a2), (4.0, 4.0, 4.0));
        let s = overlap_stats(&bb(0.0, 0.0, 1.0, 1.0), &bb(5.0, 5.0, 6.0, 6.0));
        assert_eq!((s.overlap, s.a1, s.a2), (0.0, 1.0, 1.0));
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.0, 0.0, 2.0, 2.0);
        let b = bb(1.0, 1.0, 3.0, 3.0);
        assert_abs_diff_eq!(iou(&a, &b), 1.0 / 7.0, epsilon = 1e-15);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(5.0, 5.0, 6.0, 6.0)), 0.0);
        let p = bb(3.0, 3.0, 3.0, 3.0);
        assert_eq!(iou(&p, &p), 0.0);
    }

    #[test]
    fn purity_and_integrity_examples() {
        let b = bb(0.0, 0.0, 4.0, 4.0);
        let g = bb(0.0, 0.0, 2.0, 4.0);
        assert_eq!(purity(&b, &g), 0.5);
        assert_eq!(integrity(&b, &g).unwrap(), 1.0);
        assert_eq!(purity(&bb(1.0, 1.0, 2.0, 2.0), &bb(0.0, 0.0, 3.0, 3.0)), 1.0);
        assert_eq!(purity(&bb(0.0, 0.0, 1.0, 1.0), &bb(2.0, 2.0, 3.0, 3.0)), 0.0);
        assert_abs_diff_eq!(
            integrity(&bb(1.0, 1.0, 2.0, 2.0), &bb(0.0, 0.0, 3.0, 3.0)).unwrap(),
            1.0 / 9.0,
            epsilon = 1e-15
        );
        assert_eq!(integrity(&bb(0.0, 0.0, 9.0, 9.0), &bb(1.0, 1.0, 2.0, 2.0)).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_cases() {
        let flat = bb(1.0, 1.0, 1.0, 3.0);
        assert!(flat.is_degenerate());
        assert_eq!(purity(&flat, &bb(0.0, 0.0, 4.0, 4.0)), 0.0);
        assert!(matches!(
            integrity(&bb(0.0, 0.0, 4.0, 4.0), &flat),
            Err(GeometryError::DegenerateGroundTruth(_))
        ));
    }

    #[test]
    fn combine_examples() {
        assert_abs_diff_eq!(combine_iou(0.25, 0.25), 1.0 / 7.0, epsilon = 1e-15);
        assert_eq!(combine_iou(1.0, 1.0), 1.0);
        assert_eq!(combine_iou(0.0, 0.9), 0.0);
        assert_eq!(combine_iou(0.9, 0.0), 0.0);
    }

    #[test]
    fn delta_iou_examples() {
        let p = bb(0.0, 0.0, 2.0, 2.0);
        let g = bb(1.0, 1.0, 3.0, 3.0);
        assert_eq!(delta_iou(&p, &p, &g), 0.0);
        assert_eq!(delta_iou(&bb(10.0, 10.0, 11.0, 11.0), &g, &g), 1.0);
        assert_abs_diff_eq!(delta_iou(&p, &g, &g), 6.0 / 7.0, epsilon = 1e-15);
    }

    #[test]
    fn pairwise_examples() {
        let a = bb(0.0, 0.0, 1.0, 1.0);
        assert_eq!(pairwise_iou(&[a], &[a]), vec![vec![1.0]]);
        let b = bb(3.0, 3.0, 4.0, 4.0);
        assert_eq!(
            pairwise_iou(&[a, b], &[a, b]),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]]
        );
        let rows: Vec<_> = (0..5).map(|i| bb(i as f64, 0.0, i as f64 + 2.5, 3.0)).collect();
        let cols: Vec<_> = (0..7).map(|i| bb(0.5 * i as f64, 1.0, 0.5 * i as f64 + 2.0, 2.0)).collect();
        let m = pairwise_iou(&rows, &cols);
        assert_eq!(m.len(), 5);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(m[r].len(), 7);
            for (c, col) in cols.iter().enumerate() {
                assert_eq!(m[r][c], iou(row, col));
            }
        }
    }

    fn arb_box() -> impl Strategy<Value = BoundingBox> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.01..40.0f64, 0.01..40.0f64)
            .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, x + w, y + h).unwrap())
    }

    fn arb_int_box() -> impl Strategy<Value = BoundingBox> {
        (0u8..32, 0u8..32, 0u8..32, 0u8..32).prop_map(|(a, b, c, d)| {
            BoundingBox::from_corners(a as f64, b as f64, c as f64, d as f64)
        })
    }

    proptest! {
        #[test]
        fn reconstruction_identity(b in arb_box(), g in arb_box()) {
            let rebuilt = combine_iou(purity(&b, &g), integrity(&b, &g).unwrap());
            prop_assert!((iou(&b, &g) - rebuilt).abs() <= 1e-12);
        }

        #[test]
        fn duality_and_symmetry(b in arb_box(), g in arb_box()) {
            prop_assert_eq!(purity(&b, &g), integrity(&g, &b).unwrap());
            prop_assert_eq!(iou(&b, &g), iou(&g, &b));
        }

        #[test]
        fn combine_is_bounded_and_monotone(p in 0.0..=1.0f64, i in 0.0..=1.0f64, dp in 0.0..0.5f64) {
            let c = combine_iou(p, i);
            prop_assert!((0.0..=1.0).contains(&c));
            prop_assert!(c <= p.min(i) + 1e-12);
            let p2 = (p + dp).min(1.0);
            prop_assert!(combine_iou(p2, i) >= c - 1e-15);
            prop_assert!(combine_iou(i, p2) >= combine_iou(i, p) - 1e-15);
        }

        #[test]
        fn overlap_matches_lattice(b in arb_int_box(), g in arb_int_box()) {
            prop_assert_eq!(overlap_stats(&b, &g).overlap, lattice_overlap(&b, &g));
        }
    }
}
