//! Axis-aligned box arithmetic, overlap and greedy non-maximum suppression.

use std::cmp::Ordering;

use thiserror::Error;

use crate::detection::Detection;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box ({x}, {y}, {w}, {h}) must have finite coordinates and positive size")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },
    #[error("box spans [{left}, {right}] which is outside the image width {width}")]
    OutsideImage { left: f64, right: f64, width: f64 },
}

/// Box in original-image pixel coordinates, top-left anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Builds a box and checks the admission invariants (finite, `w > 0`, `h > 0`).
    pub fn checked(x: f64, y: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let b = Self { x, y, w, h };
        if b.is_valid() {
            Ok(b)
        } else {
            Err(GeometryError::InvalidBox { x, y, w, h })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x.is_finite()
            && self.y.is_finite()
            && self.w.is_finite()
            && self.h.is_finite()
            && self.w > 0.0
            && self.h > 0.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self::new(self.x + dx, self.y + dy, self.w, self.h)
    }
}

/// Intersection over union. Edge-touching boxes have zero overlap.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    // Areas from the same corner arithmetic, so identical boxes give exactly 1.
    let extent = |b: &BBox| (b.right() - b.x) * (b.bottom() - b.y);
    let union = extent(a) + extent(b) - inter;
    if inter <= 0.0 || union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Maps a box between flipped and original coordinates of an image `image_width` wide.
pub fn hflip_box(b: &BBox, image_width: f64) -> Result<BBox, GeometryError> {
    if b.x < 0.0 || b.right() > image_width {
        return Err(GeometryError::OutsideImage {
            left: b.x,
            right: b.right(),
            width: image_width,
        });
    }
    Ok(BBox::new(image_width - b.x - b.w, b.y, b.w, b.h))
}

/// Order in which NMS visits detections: descending score, ties by input index.
pub(crate) fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .partial_cmp(&dets[i].score)
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    order
}

/// Greedy score-descending suppression. A candidate is dropped when its IoU with any
/// kept detection exceeds `iou_threshold`. Output is sorted by descending score.
pub fn nms(dets: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut kept: Vec<Detection> = Vec::with_capacity(dets.len());
    for idx in score_order(dets) {
        let candidate = &dets[idx];
        if kept
            .iter()
            .all(|k| iou(&k.bbox, &candidate.bbox) <= iou_threshold)
        {
            kept.push(candidate.clone());
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(b: BBox, score: f64) -> Detection {
        Detection::new(1, b, score)
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &BBox::new(100.0, 100.0, 5.0, 5.0)), 0.0);
        let half = iou(&a, &BBox::new(5.0, 0.0, 10.0, 10.0));
        assert!((half - 50.0 / 150.0).abs() < 1e-12);
    }

    #[test]
    fn edge_touching_boxes_do_not_overlap() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox::new(10.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &b), 0.0);
    }

    #[test]
    fn hflip_examples() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(hflip_box(&b, 100.0).unwrap(), BBox::new(90.0, 0.0, 10.0, 10.0));
        let c = BBox::new(45.0, 5.0, 10.0, 10.0);
        assert_eq!(hflip_box(&c, 100.0).unwrap(), c);
        assert!(hflip_box(&BBox::new(95.0, 0.0, 10.0, 10.0), 100.0).is_err());
        assert!(hflip_box(&BBox::new(-1.0, 0.0, 10.0, 10.0), 100.0).is_err());
    }

    #[test]
    fn nms_examples() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(nms(&[det(a, 0.3)], 0.5).len(), 1);
        assert!(nms(&[], 0.5).is_empty());

        let kept = nms(&[det(a, 0.8), det(a, 0.9)], 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, 0.9);

        let far = BBox::new(50.0, 50.0, 10.0, 10.0);
        let kept = nms(&[det(a, 0.5), det(far, 0.7)], 0.5);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].score, 0.7);
    }

    #[test]
    fn nms_ties_prefer_earlier_input() {
        let a = BBox::new(0.0, 0.0, 10.0, 10.0);
        let mut first = det(a, 0.9);
        first.frame = 7;
        let kept = nms(&[first, det(a, 0.9)], 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].frame, 7);
    }

    #[test]
    fn checked_rejects_degenerate() {
        assert!(BBox::checked(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(BBox::checked(0.0, 0.0, 1.0, f64::NAN).is_err());
        assert!(BBox::checked(0.0, 0.0, 1.0, 1.0).is_ok());
    }
}
