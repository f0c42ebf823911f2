//! Benchmark-protocol implementation: IoU matching (rectangles and
//! ellipses), one-to-one greedy matching, ROC emission with discrete and
//! continuous scores, and multi-scale rectangle matching with
//! precision/recall/F1.

use std::collections::BTreeMap;
use std::path::Path;

use crate::cascade::Detection;
use crate::error::{Error, Result};

/// Axis-aligned rectangle with real coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Center-preserving scaled copy.
    pub fn scaled(&self, factor: f64) -> Rect {
        let cx = self.x + self.w / 2.0;
        let cy = self.y + self.h / 2.0;
        Rect {
            x: cx - self.w * factor / 2.0,
            y: cy - self.h * factor / 2.0,
            w: self.w * factor,
            h: self.h * factor,
        }
    }
}

/// Rotated ellipse in the FDDB parameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub major_radius: f64,
    pub minor_radius: f64,
    /// Rotation of the major axis, radians.
    pub angle: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Ground-truth shape: rectangle or ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Rect(Rect),
    Ellipse(Ellipse),
}

/// One annotated face on one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub image: String,
    pub shape: Shape,
}

/// Intersection-over-union of two rectangles.
pub fn iou_rect(a: &Rect, b: &Rect) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a.area() + b.area() - inter)
}

impl Ellipse {
    /// Whether a point lies inside the ellipse.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = x - self.cx;
        let dy = y - self.cy;
        let (s, c) = self.angle.sin_cos();
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        let a = self.major_radius;
        let b = self.minor_radius;
        (u / a) * (u / a) + (v / b) * (v / b) <= 1.0
    }

    /// Axis-aligned bounding box of the rotated ellipse.
    pub fn bounding_box(&self) -> Rect {
        let (s, c) = self.angle.sin_cos();
        let hw = ((self.major_radius * c).powi(2) + (self.minor_radius * s).powi(2)).sqrt();
        let hh = ((self.major_radius * s).powi(2) + (self.minor_radius * c).powi(2)).sqrt();
        Rect {
            x: self.cx - hw,
            y: self.cy - hh,
            w: 2.0 * hw,
            h: 2.0 * hh,
        }
    }
}

/// Rasterized IoU between an ellipse and a rectangle: both shapes are
/// sampled at cell centers of a `grid_step` grid over their joint bounding
/// box. Converges to the analytic value as the grid refines.
pub fn iou_ellipse_rect_grid(e: &Ellipse, r: &Rect, grid_step: f64) -> f64 {
    let eb = e.bounding_box();
    let x0 = eb.x.min(r.x);
    let y0 = eb.y.min(r.y);
    let x1 = (eb.x + eb.w).max(r.x + r.w);
    let y1 = (eb.y + eb.h).max(r.y + r.h);
    if (eb.x + eb.w) <= r.x || (r.x + r.w) <= eb.x || (eb.y + eb.h) <= r.y || (r.y + r.h) <= eb.y {
        return 0.0;
    }
    let nx = ((x1 - x0) / grid_step).ceil() as usize;
    let ny = ((y1 - y0) / grid_step).ceil() as usize;
    let mut inter = 0u64;
    let mut union = 0u64;
    for j in 0..ny {
        let y = y0 + (j as f64 + 0.5) * grid_step;
        for i in 0..nx {
            let x = x0 + (i as f64 + 0.5) * grid_step;
            let in_e = e.contains(x, y);
            let in_r = x >= r.x && x < r.x + r.w && y >= r.y && y < r.y + r.h;
            if in_e && in_r {
                inter += 1;
            }
            if in_e || in_r {
                union += 1;
            }
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Rasterized ellipse/rectangle IoU at the default unit-pixel grid.
pub fn iou_ellipse_rect(e: &Ellipse, r: &Rect) -> f64 {
    iou_ellipse_rect_grid(e, r, 1.0)
}

/// IoU between a ground-truth shape and a detection rectangle.
pub fn iou_shape_rect(shape: &Shape, r: &Rect) -> f64 {
    match shape {
        Shape::Rect(a) => iou_rect(a, r),
        Shape::Ellipse(e) => iou_ellipse_rect(e, r),
    }
}

/// One-to-one matching outcome for a single image.
#[derive(Debug, Clone, Default)]
pub struct MatchResult {
    /// (annotation index, detection index, IoU) for each matched pair.
    pub matched: Vec<(usize, usize, f64)>,
    pub unmatched_annotations: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Greedy descending-IoU one-to-one matching; pairs below `threshold` stay
/// unmatched. Ties break on (annotation, detection) index order.
///
/// `n_det` is passed explicitly so detections are reported unmatched even
/// when there are no annotations at all.
pub fn match_discrete(ious: &[Vec<f64>], n_det: usize, threshold: f64) -> MatchResult {
    let n_ann = ious.len();
    debug_assert!(ious.iter().all(|r| r.len() == n_det));
    let mut pairs: Vec<(usize, usize)> = (0..n_ann)
        .flat_map(|a| (0..n_det).map(move |d| (a, d)))
        .filter(|&(a, d)| ious[a][d] >= threshold)
        .collect();
    pairs.sort_by(|&(a1, d1), &(a2, d2)| {
        ious[a2][d2]
            .partial_cmp(&ious[a1][d1])
            .unwrap()
            .then(a1.cmp(&a2))
            .then(d1.cmp(&d2))
    });
    let mut ann_used = vec![false; n_ann];
    let mut det_used = vec![false; n_det];
    let mut result = MatchResult::default();
    for (a, d) in pairs {
        if !ann_used[a] && !det_used[d] {
            ann_used[a] = true;
            det_used[d] = true;
            result.matched.push((a, d, ious[a][d]));
        }
    }
    result.unmatched_annotations = (0..n_ann).filter(|&a| !ann_used[a]).collect();
    result.unmatched_detections = (0..n_det).filter(|&d| !det_used[d]).collect();
    result
}

/// Build the IoU matrix between annotations and detections of one image and
/// match them one-to-one.
pub fn match_image(shapes: &[Shape], detections: &[Rect], threshold: f64) -> MatchResult {
    let ious: Vec<Vec<f64>> = shapes
        .iter()
        .map(|s| detections.iter().map(|d| iou_shape_rect(s, d)).collect())
        .collect();
    match_discrete(&ious, detections.len(), threshold)
}

/// Scored detection for ROC sweeping.
#[derive(Debug, Clone, Copy)]
pub struct ScoredRect {
    pub rect: Rect,
    pub score: f32,
}

impl From<&Detection> for ScoredRect {
    fn from(d: &Detection) -> Self {
        ScoredRect {
            rect: Rect {
                x: d.x,
                y: d.y,
                w: d.w,
                h: d.h,
            },
            score: d.score,
        }
    }
}

/// One ROC row: score threshold, total false positives, true-positive rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f32,
    pub false_positives: u64,
    pub true_positive_rate: f64,
}

/// Discrete-score ROC plus the continuous (mean matched IoU) score.
#[derive(Debug, Clone)]
pub struct FddbScore {
    pub roc: Vec<RocPoint>,
    /// Mean IoU of matched pairs averaged over all annotations, with every
    /// detection admitted.
    pub continuous: f64,
}

/// Sweep score thresholds over per-image (annotations, detections) pairs.
pub fn score_fddb(
    images: &[(Vec<Shape>, Vec<ScoredRect>)],
    sweep: &[f32],
    iou_threshold: f64,
) -> FddbScore {
    let total_annotations: usize = images.iter().map(|(a, _)| a.len()).sum();
    let mut roc = Vec::with_capacity(sweep.len());
    for &threshold in sweep {
        let mut tp = 0u64;
        let mut fp = 0u64;
        for (shapes, dets) in images {
            let kept: Vec<Rect> = dets
                .iter()
                .filter(|d| d.score >= threshold)
                .map(|d| d.rect)
                .collect();
            let m = match_image(shapes, &kept, iou_threshold);
            tp += m.matched.len() as u64;
            fp += m.unmatched_detections.len() as u64;
        }
        roc.push(RocPoint {
            threshold,
            false_positives: fp,
            true_positive_rate: if total_annotations == 0 {
                0.0
            } else {
                tp as f64 / total_annotations as f64
            },
        });
    }

    let mut iou_sum = 0.0;
    for (shapes, dets) in images {
        let all: Vec<Rect> = dets.iter().map(|d| d.rect).collect();
        let m = match_image(shapes, &all, iou_threshold);
        iou_sum += m.matched.iter().map(|&(_, _, iou)| iou).sum::<f64>();
    }
    let continuous = if total_annotations == 0 {
        0.0
    } else {
        iou_sum / total_annotations as f64
    };
    FddbScore { roc, continuous }
}

/// Number of scaled annotation variants for multi-scale matching.
pub const MULTISCALE_VARIANTS: usize = 44;
pub const MULTISCALE_RANGE: (f64, f64) = (0.9, 1.2);

/// The 44 uniform scale factors over [0.9, 1.2].
pub fn multiscale_factors() -> Vec<f64> {
    let (lo, hi) = MULTISCALE_RANGE;
    (0..MULTISCALE_VARIANTS)
        .map(|i| lo + i as f64 * (hi - lo) / (MULTISCALE_VARIANTS - 1) as f64)
        .collect()
}

/// Best IoU of the detection against the annotation or any of its
/// center-preserving scaled variants.
pub fn best_multiscale_iou(annotation: &Rect, detection: &Rect) -> f64 {
    let mut best = iou_rect(annotation, detection);
    for f in multiscale_factors() {
        best = best.max(iou_rect(&annotation.scaled(f), detection));
    }
    best
}

/// Multi-scale match predicate: any variant (or the original) reaches
/// IoU >= 0.5.
pub fn match_multiscale(annotation: &Rect, detection: &Rect) -> bool {
    best_multiscale_iou(annotation, detection) >= 0.5
}

/// Precision, recall and F1 over per-image matched counts.
///
/// With zero detections precision is reported as 0 rather than undefined.
pub fn score_prf1(
    images: &[(Vec<Rect>, Vec<Rect>)],
    multiscale: bool,
    iou_threshold: f64,
) -> (f64, f64, f64) {
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (annotations, detections) in images {
        let ious: Vec<Vec<f64>> = annotations
            .iter()
            .map(|a| {
                detections
                    .iter()
                    .map(|d| {
                        if multiscale {
                            best_multiscale_iou(a, d)
                        } else {
                            iou_rect(a, d)
                        }
                    })
                    .collect()
            })
            .collect();
        let m = match_discrete(&ious, detections.len(), iou_threshold);
        tp += m.matched.len() as u64;
        fp += m.unmatched_detections.len() as u64;
        fn_ += m.unmatched_annotations.len() as u64;
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

// ---- annotation parsers -----------------------------------------------

/// Parse the FDDB ellipse list format: image path line, face-count line,
/// then one "major minor angle cx cy 1" line per face.
pub fn parse_fddb_annotations(text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    while let Some(image) = lines.next() {
        let image = image.trim().to_string();
        let count_line = lines
            .next()
            .ok_or_else(|| Error::Decode(format!("missing face count after {}", image)))?;
        let count: usize = count_line
            .trim()
            .parse()
            .map_err(|_| Error::Decode(format!("bad face count '{}'", count_line.trim())))?;
        for _ in 0..count {
            let line = lines
                .next()
                .ok_or_else(|| Error::Decode(format!("missing face line in {}", image)))?;
            let fields: Vec<f64> = line
                .split_whitespace()
                .map(|f| {
                    f.parse()
                        .map_err(|_| Error::Decode(format!("bad ellipse field '{}'", f)))
                })
                .collect::<Result<_>>()?;
            if fields.len() < 5 {
                return Err(Error::Decode(format!("short ellipse line '{}'", line)));
            }
            if fields[0] <= 0.0 || fields[1] <= 0.0 {
                return Err(Error::Decode("ellipse radii must be positive".into()));
            }
            out.push(Annotation {
                image: image.clone(),
                shape: Shape::Ellipse(Ellipse {
                    major_radius: fields[0],
                    minor_radius: fields[1],
                    angle: fields[2],
                    cx: fields[3],
                    cy: fields[4],
                }),
            });
        }
    }
    Ok(out)
}

/// Parse a rectangle CSV: `image,x,y,w,h` per line; a header row is skipped.
pub fn parse_rect_csv(text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("image")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() != 5 {
            return Err(Error::Decode(format!("expected 5 CSV fields in '{}'", line)));
        }
        let nums: Vec<f64> = fields[1..]
            .iter()
            .map(|f| {
                f.parse()
                    .map_err(|_| Error::Decode(format!("bad number '{}'", f)))
            })
            .collect::<Result<_>>()?;
        if nums[2] <= 0.0 || nums[3] <= 0.0 {
            return Err(Error::Decode("rectangle extents must be positive".into()));
        }
        out.push(Annotation {
            image: fields[0].to_string(),
            shape: Shape::Rect(Rect {
                x: nums[0],
                y: nums[1],
                w: nums[2],
                h: nums[3],
            }),
        });
    }
    Ok(out)
}

/// Group annotations by image id, preserving insertion order per image.
pub fn group_by_image(annotations: Vec<Annotation>) -> BTreeMap<String, Vec<Shape>> {
    let mut map: BTreeMap<String, Vec<Shape>> = BTreeMap::new();
    for a in annotations {
        map.entry(a.image).or_default().push(a.shape);
    }
    map
}

/// A detection JSONL record: `{image, x, y, w, h, score, neighbors}`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DetectionRecord {
    pub image: String,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f32,
    pub neighbors: usize,
}

pub fn parse_detections_jsonl(text: &str) -> Result<Vec<DetectionRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::Decode(e.to_string())))
        .collect()
}

pub fn read_annotations<P: AsRef<Path>>(path: P, fddb: bool) -> Result<Vec<Annotation>> {
    let text = std::fs::read_to_string(path)?;
    if fddb {
        parse_fddb_annotations(&text)
    } else {
        parse_rect_csv(&text)
    }
}
