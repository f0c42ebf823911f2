//! The three-stage detector: dense stage-1 scanning, the selective unit
//! (patch extraction, histogram equalization, mirroring, K-count decision
//! rule) and rectangle grouping.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{CascadeModel, SELECTIVE_MAP, SELECTIVE_PATCH};
use crate::nn::{self, ACTIVATION_AMPLITUDE};
use crate::plane::ImagePlane;
use crate::pyramid::{build_pyramid, sample_bilinear, PyramidLevel};
use crate::stats::RunStats;

/// Which K-count rule the selective unit applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionRule {
    /// (K2 >= Tm and K3 > 0) or (K2 > 0 and K3 >= Tm)
    Strict,
    /// K2 >= Tm or K3 >= Tm
    Weak,
}

/// Execution mode of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sync,
    Async,
    Partitioned,
    Patchwork,
}

impl ExecMode {
    pub fn name(self) -> &'static str {
        match self {
            ExecMode::Sync => "sync",
            ExecMode::Async => "async",
            ExecMode::Partitioned => "partitioned",
            ExecMode::Patchwork => "patchwork",
        }
    }
}

/// All user-facing detector knobs.
#[derive(Debug, Clone, Copy)]
pub struct DetectorParams {
    pub min_size: usize,
    pub scale_factor: f64,
    pub t1: f32,
    pub t2: f32,
    pub tm: usize,
    pub min_neighbors: usize,
    pub rule: DecisionRule,
    pub mode: ExecMode,
    /// Pairwise IoU threshold used by detection grouping.
    pub group_iou: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            min_size: 15,
            scale_factor: 1.05,
            t1: 0.0,
            t2: 0.0,
            tm: 1,
            min_neighbors: 1,
            rule: DecisionRule::Strict,
            mode: ExecMode::Sync,
            group_iou: 0.3,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        let range = -ACTIVATION_AMPLITUDE..ACTIVATION_AMPLITUDE;
        if !range.contains(&self.t1) || !range.contains(&self.t2) {
            return Err(Error::Dimension(format!(
                "T1/T2 must lie in ({:.4}, {:.4})",
                -ACTIVATION_AMPLITUDE, ACTIVATION_AMPLITUDE
            )));
        }
        if self.scale_factor <= 1.0 {
            return Err(Error::Dimension("scaleFactor must exceed 1".into()));
        }
        if self.min_size == 0 || self.tm == 0 || self.min_neighbors == 0 {
            return Err(Error::Dimension(
                "minSize, Tm and minNeighbors must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A stage-1 hit: pyramid level, window position in level coordinates, score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateRegion {
    pub level: usize,
    pub x: usize,
    pub y: usize,
    pub score: f32,
}

/// An accepted region before grouping, in original-image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawDetection {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f32,
}

/// A final grouped detection in original-image coordinates.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Detection {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f32,
    pub neighbors: usize,
}

/// Densely scan one pyramid level with CNN1.
///
/// `level_norm` must already be normalized to [-1, 1]. Returns the candidates
/// whose response exceeds `t1` plus the total number of response cells (the
/// sliding-window count for the level). An undersized level yields (0, []).
pub fn scan_stage1(
    level_index: usize,
    level_norm: &ImagePlane,
    model: &CascadeModel,
    t1: f32,
) -> Result<(Vec<CandidateRegion>, u64)> {
    let spec = model.spec(0);
    let (rf_w, rf_h) = spec.receptive_field();
    if level_norm.width() < rf_w || level_norm.height() < rf_h {
        return Ok((Vec::new(), 0));
    }
    let stride = spec.output_stride();
    let out = nn::forward(level_norm, spec, model.weights(0))?;
    debug_assert_eq!(out.len(), 1);
    let map = out.map(0);
    let mut candidates = Vec::new();
    for j in 0..map.height() {
        for i in 0..map.width() {
            let score = map.get(i, j);
            if score > t1 {
                candidates.push(CandidateRegion {
                    level: level_index,
                    x: i * stride,
                    y: j * stride,
                    score,
                });
            }
        }
    }
    Ok((candidates, (map.width() * map.height()) as u64))
}

/// Number of stage-1 window positions on a level of the given size.
pub fn window_positions(model: &CascadeModel, w: usize, h: usize) -> u64 {
    model
        .spec(0)
        .output_shape(w, h)
        .map(|(ow, oh)| (ow * oh) as u64)
        .unwrap_or(0)
}

/// The candidate window in original-image coordinates.
pub fn candidate_rect(cand: &CandidateRegion, window: (usize, usize), scale: f64) -> (f64, f64, f64, f64) {
    (
        cand.x as f64 / scale,
        cand.y as f64 / scale,
        window.0 as f64 / scale,
        window.1 as f64 / scale,
    )
}

/// Read the candidate region from the original grayscale image together with
/// its neighborhood and scale it to the selective patch size (51x55).
///
/// The window is expanded about its center so that the selective networks'
/// scanning range covers it: the patch core is the patch minus one output
/// stride per extra response cell. Pixels past the image border are edge
/// replicated (sampling clamp).
pub fn extract_patch(
    image: &ImagePlane,
    cand: &CandidateRegion,
    window: (usize, usize),
    scale: f64,
) -> ImagePlane {
    let (pw, ph) = SELECTIVE_PATCH;
    let core_w = (pw - 4 * (SELECTIVE_MAP.0 - 1)) as f64; // 35
    let core_h = (ph - 4 * (SELECTIVE_MAP.1 - 1)) as f64; // 39
    let (wx, wy, ww, wh) = candidate_rect(cand, window, scale);
    let cx = wx + ww / 2.0;
    let cy = wy + wh / 2.0;
    let ew = ww * pw as f64 / core_w;
    let eh = wh * ph as f64 / core_h;
    let rx = cx - ew / 2.0;
    let ry = cy - eh / 2.0;
    let mut patch = ImagePlane::zeros(pw, ph);
    for v in 0..ph {
        let sy = ry + (v as f64 + 0.5) * eh / ph as f64 - 0.5;
        for u in 0..pw {
            let sx = rx + (u as f64 + 0.5) * ew / pw as f64 - 0.5;
            patch.set(u, v, sample_bilinear(image, sx, sy));
        }
    }
    patch
}

/// Classic 256-bin CDF histogram equalization. Intensities are quantized to
/// the nearest bin; a single-valued plane is returned unchanged.
pub fn equalize_histogram(patch: &ImagePlane) -> ImagePlane {
    let bins: Vec<usize> = patch
        .data()
        .iter()
        .map(|&v| v.round().clamp(0.0, 255.0) as usize)
        .collect();
    let mut hist = [0u32; 256];
    for &b in &bins {
        hist[b] += 1;
    }
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    if occupied <= 1 {
        return patch.clone();
    }
    let n = bins.len() as u32;
    let mut cdf = [0u32; 256];
    let mut acc = 0u32;
    for (i, &c) in hist.iter().enumerate() {
        acc += c;
        cdf[i] = acc;
    }
    let cdf_min = *cdf.iter().find(|&&c| c > 0).expect("nonempty patch");
    let denom = (n - cdf_min) as f64;
    let mut lut = [0f32; 256];
    for i in 0..256 {
        if hist[i] > 0 {
            lut[i] = (255.0 * (cdf[i] - cdf_min) as f64 / denom).round() as f32;
        }
    }
    let data = bins.iter().map(|&b| lut[b]).collect();
    ImagePlane::from_vec(patch.width(), patch.height(), data).expect("same shape")
}

/// Reverse the column order.
pub fn mirror_horizontal(patch: &ImagePlane) -> ImagePlane {
    let (w, h) = (patch.width(), patch.height());
    let mut out = ImagePlane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(w - 1 - x, y, patch.get(x, y));
        }
    }
    out
}

/// The K-count decision rule on already-computed response counts.
pub fn decide(k2: usize, k3: usize, tm: usize, rule: DecisionRule) -> bool {
    match rule {
        DecisionRule::Strict => (k2 >= tm && k3 > 0) || (k2 > 0 && k3 >= tm),
        DecisionRule::Weak => k2 >= tm || k3 >= tm,
    }
}

/// Outcome of the selective unit for one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOutcome {
    pub accepted: bool,
    pub k2: usize,
    pub k3: usize,
    /// Whether CNN3 was evaluated (false when short-circuited).
    pub cnn3_ran: bool,
    /// Max pooled response of the last network evaluated.
    pub score: f32,
}

impl ClassifyOutcome {
    /// Whether the candidate survived the CNN2 gate (was not rejected
    /// before or at the CNN2 stage).
    pub fn passed_stage2(&self) -> bool {
        self.accepted || self.cnn3_ran
    }
}

fn pooled_responses(
    patch_norm: &ImagePlane,
    mirrored_norm: &ImagePlane,
    model: &CascadeModel,
    stage: usize,
) -> Result<Vec<f32>> {
    let mut responses = Vec::with_capacity(2 * SELECTIVE_MAP.0 * SELECTIVE_MAP.1);
    for input in [patch_norm, mirrored_norm] {
        let out = nn::forward(input, model.spec(stage), model.weights(stage))?;
        debug_assert_eq!(out.len(), 1);
        responses.extend_from_slice(out.map(0).data());
    }
    Ok(responses)
}

fn count_and_max(responses: &[f32], t2: f32) -> (usize, f32) {
    let k = responses.iter().filter(|&&r| r > t2).count();
    let max = responses.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    (k, max)
}

/// Evaluate CNN2 (and, unless short-circuited, CNN3) on an equalized 51x55
/// patch. Responses of the patch and its mirror are pooled into one count
/// per network.
pub fn classify_region(
    patch_eq: &ImagePlane,
    model: &CascadeModel,
    t2: f32,
    tm: usize,
    rule: DecisionRule,
) -> Result<ClassifyOutcome> {
    if (patch_eq.width(), patch_eq.height()) != SELECTIVE_PATCH {
        return Err(Error::Dimension(format!(
            "selective patch must be {}x{}, got {}x{}",
            SELECTIVE_PATCH.0,
            SELECTIVE_PATCH.1,
            patch_eq.width(),
            patch_eq.height()
        )));
    }
    let norm = patch_eq.normalized();
    let mirrored = mirror_horizontal(patch_eq).normalized();

    let r2 = pooled_responses(&norm, &mirrored, model, 1)?;
    let (k2, max2) = count_and_max(&r2, t2);

    match rule {
        DecisionRule::Strict => {
            // no disjunct of the strict rule can fire once K2 = 0
            if k2 == 0 {
                return Ok(ClassifyOutcome {
                    accepted: false,
                    k2,
                    k3: 0,
                    cnn3_ran: false,
                    score: max2,
                });
            }
        }
        DecisionRule::Weak => {
            // K2 >= Tm already accepts
            if k2 >= tm {
                return Ok(ClassifyOutcome {
                    accepted: true,
                    k2,
                    k3: 0,
                    cnn3_ran: false,
                    score: max2,
                });
            }
        }
    }

    let r3 = pooled_responses(&norm, &mirrored, model, 2)?;
    let (k3, max3) = count_and_max(&r3, t2);
    Ok(ClassifyOutcome {
        accepted: decide(k2, k3, tm, rule),
        k2,
        k3,
        cnn3_ran: true,
        score: max3,
    })
}

/// Run the full selective unit for one candidate: patch extraction,
/// equalization, classification. Returns the outcome plus the raw detection
/// when accepted.
pub fn process_candidate(
    original: &ImagePlane,
    cand: &CandidateRegion,
    scale: f64,
    model: &CascadeModel,
    params: &DetectorParams,
) -> Result<(ClassifyOutcome, Option<RawDetection>)> {
    let window = model.window();
    let patch = extract_patch(original, cand, window, scale);
    let eq = equalize_histogram(&patch);
    let outcome = classify_region(&eq, model, params.t2, params.tm, params.rule)?;
    let raw = outcome.accepted.then(|| {
        let (x, y, w, h) = candidate_rect(cand, window, scale);
        RawDetection {
            x,
            y,
            w,
            h,
            score: outcome.score,
        }
    });
    Ok((outcome, raw))
}

fn iou_rect_f64(a: &RawDetection, b: &RawDetection) -> f64 {
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = a.w * a.h + b.w * b.h - inter;
    inter / union
}

/// Transitive clustering of raw detections by pairwise IoU, then aggregation.
///
/// Clusters smaller than `min_neighbors` are dropped; survivors emit the
/// coordinate-wise mean rectangle with the max score and the cluster size.
pub fn group_detections(
    raw: &[RawDetection],
    min_neighbors: usize,
    iou_threshold: f64,
) -> Vec<Detection> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if iou_rect_f64(&raw[i], &raw[j]) >= iou_threshold {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        clusters.entry(root).or_default().push(i);
    }
    let mut out = Vec::new();
    for members in clusters.values() {
        if members.len() < min_neighbors {
            continue;
        }
        let inv = 1.0 / members.len() as f64;
        let mut det = Detection {
            x: 0.0,
            y: 0.0,
            w: 0.0,
            h: 0.0,
            score: f32::NEG_INFINITY,
            neighbors: members.len(),
        };
        for &i in members {
            det.x += raw[i].x * inv;
            det.y += raw[i].y * inv;
            det.w += raw[i].w * inv;
            det.h += raw[i].h * inv;
            det.score = det.score.max(raw[i].score);
        }
        out.push(det);
    }
    out.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap()
            .then(a.y.partial_cmp(&b.y).unwrap())
            .then(a.w.partial_cmp(&b.w).unwrap())
    });
    out
}

/// Sort candidate/outcome pairs into the canonical (level, y, x) order so
/// grouping sees the same sequence no matter which mode produced them.
pub(crate) fn sort_canonical(items: &mut Vec<(CandidateRegion, RawDetection)>) {
    items.sort_by_key(|(c, _)| (c.level, c.y, c.x));
}

/// The synchronous reference pipeline: grayscale frame in, grouped
/// detections and run statistics out.
pub fn detect(
    image: &ImagePlane,
    model: &CascadeModel,
    params: &DetectorParams,
) -> Result<(Vec<Detection>, RunStats)> {
    params.validate()?;
    model.validate()?;
    let start = Instant::now();
    let mut stats = RunStats {
        mode: ExecMode::Sync.name(),
        workers: 1,
        ..Default::default()
    };

    let pyramid = build_pyramid(image, model.window(), params.min_size, params.scale_factor);

    let scan_start = Instant::now();
    let mut candidates = Vec::new();
    for level in &pyramid {
        let norm = level.image.normalized();
        let (mut cands, cells) = scan_stage1(level.index, &norm, model, params.t1)?;
        stats.sliding_windows += cells;
        candidates.append(&mut cands);
    }
    stats.stage1 = candidates.len() as u64;
    stats.scan_time = scan_start.elapsed();

    let classify_start = Instant::now();
    let mut accepted = Vec::new();
    for cand in &candidates {
        let scale = pyramid[cand.level].scale;
        let (outcome, raw) = process_candidate(image, cand, scale, model, params)?;
        if outcome.passed_stage2() {
            stats.stage2 += 1;
        }
        if let Some(raw) = raw {
            stats.stage3 += 1;
            accepted.push((*cand, raw));
        }
    }
    stats.classify_time = classify_start.elapsed();

    let group_start = Instant::now();
    sort_canonical(&mut accepted);
    let raws: Vec<RawDetection> = accepted.iter().map(|(_, r)| *r).collect();
    let detections = group_detections(&raws, params.min_neighbors, params.group_iou);
    stats.post_nms = detections.len() as u64;
    stats.group_time = group_start.elapsed();
    stats.total_time = start.elapsed();

    Ok((detections, stats))
}

/// Scales of a pyramid, indexed by level.
pub fn pyramid_scales(pyramid: &[PyramidLevel]) -> Vec<f64> {
    pyramid.iter().map(|l| l.scale).collect()
}
