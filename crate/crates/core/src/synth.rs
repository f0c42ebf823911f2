//! Seeded synthetic data: face-like templates (bright oval, dark eye blobs,
//! mouth) with jitter and contrast variation over textured noise
//! backgrounds. A desk-scale stand-in for a real training corpus that keeps
//! every end-to-end test self-contained.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::cascade::{extract_patch, equalize_histogram, CandidateRegion};
use crate::eval::Rect;
use crate::model::{SELECTIVE_PATCH, STAGE1_WINDOW};
use crate::plane::ImagePlane;
use crate::pyramid::resize_bilinear;

/// Textured background: a low-frequency random field plus white noise.
pub fn gen_background(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImagePlane {
    let base: f32 = rng.gen_range(60.0..150.0);
    let contrast: f32 = rng.gen_range(10.0..45.0);
    // coarse random grid, bilinearly upsampled
    let gw = (w / 12).max(2);
    let gh = (h / 12).max(2);
    let mut coarse = ImagePlane::zeros(gw, gh);
    for v in coarse.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let field = resize_bilinear(&coarse, w, h);
    let mut out = ImagePlane::zeros(w, h);
    for (o, f) in out.data_mut().iter_mut().zip(field.data()) {
        let noise: f32 = rng.gen_range(-12.0..12.0);
        *o = (base + contrast * f + noise).clamp(0.0, 255.0);
    }
    out
}

fn fill_ellipse(img: &mut ImagePlane, cx: f64, cy: f64, rx: f64, ry: f64, value: f32, soft: f32) {
    let x0 = ((cx - rx).floor().max(0.0)) as usize;
    let y0 = ((cy - ry).floor().max(0.0)) as usize;
    let x1 = ((cx + rx).ceil() as usize).min(img.width().saturating_sub(1));
    let y1 = ((cy + ry).ceil() as usize).min(img.height().saturating_sub(1));
    for y in y0..=y1.min(img.height().saturating_sub(1)) {
        for x in x0..=x1.min(img.width().saturating_sub(1)) {
            let dx = (x as f64 + 0.5 - cx) / rx;
            let dy = (y as f64 + 0.5 - cy) / ry;
            let d = (dx * dx + dy * dy) as f32;
            if d <= 1.0 {
                // soften toward the rim so downscaling stays smooth
                let t = (1.0 - d).min(1.0);
                let blend = (t / soft).min(1.0);
                let old = img.get(x, y);
                img.set(x, y, old + (value - old) * blend);
            }
        }
    }
}

/// Draw one face template into `img` with its bounding box at (x, y, w, h).
pub fn draw_face(img: &mut ImagePlane, rng: &mut ChaCha8Rng, x: f64, y: f64, w: f64, h: f64) {
    let skin: f32 = rng.gen_range(170.0..235.0);
    let feature: f32 = rng.gen_range(10.0..60.0);
    let cx = x + w / 2.0;
    let cy = y + h / 2.0;
    // head oval fills the box
    fill_ellipse(img, cx, cy, w / 2.0, h / 2.0, skin, 0.25);
    // eyes
    let eye_dx = w * rng.gen_range(0.18..0.24);
    let eye_y = cy - h * rng.gen_range(0.12..0.18);
    let eye_r = w * rng.gen_range(0.07..0.10);
    fill_ellipse(img, cx - eye_dx, eye_y, eye_r, eye_r * 0.8, feature, 0.5);
    fill_ellipse(img, cx + eye_dx, eye_y, eye_r, eye_r * 0.8, feature, 0.5);
    // mouth
    let mouth_y = cy + h * rng.gen_range(0.20..0.28);
    fill_ellipse(
        img,
        cx,
        mouth_y,
        w * rng.gen_range(0.18..0.26),
        h * rng.gen_range(0.035..0.06),
        feature,
        0.5,
    );
}

/// A rendered scene with planted faces and their ground-truth boxes.
pub fn render_scene(
    rng: &mut ChaCha8Rng,
    w: usize,
    h: usize,
    faces: usize,
    min_face: usize,
    max_face: usize,
) -> (ImagePlane, Vec<Rect>) {
    let mut img = gen_background(rng, w, h);
    let mut boxes: Vec<Rect> = Vec::new();
    let mut attempts = 0;
    while boxes.len() < faces && attempts < faces * 60 {
        attempts += 1;
        let fw = rng.gen_range(min_face as f64..=max_face as f64);
        let fh = fw * STAGE1_WINDOW.1 as f64 / STAGE1_WINDOW.0 as f64;
        if fw + 4.0 >= w as f64 || fh + 4.0 >= h as f64 {
            continue;
        }
        let x = rng.gen_range(2.0..w as f64 - fw - 2.0);
        let y = rng.gen_range(2.0..h as f64 - fh - 2.0);
        let cand = Rect { x, y, w: fw, h: fh };
        let clear = boxes
            .iter()
            .all(|b| crate::eval::iou_rect(b, &cand) < 0.05);
        if !clear {
            continue;
        }
        draw_face(&mut img, rng, x, y, fw, fh);
        boxes.push(cand);
    }
    (img, boxes)
}

fn crop_resize(img: &ImagePlane, x: f64, y: f64, w: f64, h: f64, ow: usize, oh: usize) -> ImagePlane {
    let mut out = ImagePlane::zeros(ow, oh);
    for v in 0..oh {
        let sy = y + (v as f64 + 0.5) * h / oh as f64 - 0.5;
        for u in 0..ow {
            let sx = x + (u as f64 + 0.5) * w / ow as f64 - 0.5;
            out.set(u, v, crate::pyramid::sample_bilinear(img, sx, sy));
        }
    }
    out
}

/// A window-sized positive chip: a rendered face, slightly jittered in
/// position and scale, downsampled to the stage-1 window.
pub fn stage1_positive(rng: &mut ChaCha8Rng) -> ImagePlane {
    let (win_w, win_h) = STAGE1_WINDOW;
    let fw = rng.gen_range(34.0..80.0);
    let fh = fw * win_h as f64 / win_w as f64;
    let margin = (fw * 0.35) as usize;
    let sw = (fw as usize) + 2 * margin;
    let sh = (fh as usize) + 2 * margin;
    let mut img = gen_background(rng, sw, sh);
    let fx = margin as f64;
    let fy = margin as f64;
    draw_face(&mut img, rng, fx, fy, fw, fh);
    // jitter: up to ~1.5 px at window scale, scale wobble within one pyramid step
    let s = rng.gen_range(0.93..1.07);
    let jx = rng.gen_range(-0.05..0.05) * fw;
    let jy = rng.gen_range(-0.05..0.05) * fh;
    let cw = fw * s;
    let ch = fh * s;
    crop_resize(
        &img,
        fx + fw / 2.0 - cw / 2.0 + jx,
        fy + fh / 2.0 - ch / 2.0 + jy,
        cw,
        ch,
        win_w,
        win_h,
    )
}

/// A window-sized negative chip: a random crop of a face-free background.
pub fn stage1_negative(rng: &mut ChaCha8Rng) -> ImagePlane {
    let (win_w, win_h) = STAGE1_WINDOW;
    let sw = rng.gen_range(60..140);
    let sh = rng.gen_range(60..140);
    let img = gen_background(rng, sw, sh);
    let cw_max = (sw as f64 * 0.9).min(sh as f64 * 0.9 * win_w as f64 / win_h as f64);
    let cw = rng.gen_range(win_w as f64..cw_max.max(win_w as f64 + 1.0));
    let ch = cw * win_h as f64 / win_w as f64;
    let x = rng.gen_range(0.0..(sw as f64 - cw).max(0.01));
    let y = rng.gen_range(0.0..(sh as f64 - ch).max(0.01));
    crop_resize(&img, x, y, cw, ch, win_w, win_h)
}

/// What a generated selective-unit patch should contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchKind {
    /// A face with the candidate box well aligned to it (positive).
    Face,
    /// A face-free background candidate (negative).
    Background,
    /// A face with the candidate box at the wrong scale (hard negative).
    OffScale,
    /// A face with the candidate box displaced off-center (hard negative).
    OffCenter,
}

/// An equalized 51x55 selective-unit patch produced by the same extraction
/// path the detector uses. `face` selects a face-centered candidate or a
/// random background one.
pub fn selective_patch(rng: &mut ChaCha8Rng, face: bool) -> ImagePlane {
    selective_patch_kind(rng, if face { PatchKind::Face } else { PatchKind::Background })
}

/// An equalized 51x55 selective-unit patch of the requested kind.
pub fn selective_patch_kind(rng: &mut ChaCha8Rng, kind: PatchKind) -> ImagePlane {
    let (win_w, win_h) = STAGE1_WINDOW;
    let fw = rng.gen_range(36.0..72.0);
    let fh = fw * win_h as f64 / win_w as f64;
    let margin = if kind == PatchKind::OffScale { 3.6 } else { 2.6 };
    let sw = (fw * margin) as usize;
    let sh = (fh * margin) as usize;
    let mut img = gen_background(rng, sw, sh);
    let fx = (sw as f64 - fw) / 2.0;
    let fy = (sh as f64 - fh) / 2.0;
    if kind != PatchKind::Background {
        draw_face(&mut img, rng, fx, fy, fw, fh);
    }
    let (bx, by, bw) = match kind {
        PatchKind::Face => (
            // small positional wobble, as a stage-1 hit would have
            fx + rng.gen_range(-0.04..0.04) * fw,
            fy + rng.gen_range(-0.04..0.04) * fh,
            fw * rng.gen_range(0.95..1.05),
        ),
        PatchKind::Background => (
            rng.gen_range(0.0..sw as f64 - fw - 1.0),
            rng.gen_range(0.0..sh as f64 - fh - 1.0),
            fw,
        ),
        PatchKind::OffScale => {
            let f = if rng.gen_bool(0.5) {
                rng.gen_range(0.40..0.65)
            } else {
                rng.gen_range(1.5..2.2)
            };
            let bw = fw * f;
            let bh = fh * f;
            (
                fx + (fw - bw) / 2.0 + rng.gen_range(-0.05..0.05) * bw,
                fy + (fh - bh) / 2.0 + rng.gen_range(-0.05..0.05) * bh,
                bw,
            )
        }
        PatchKind::OffCenter => {
            let bw = fw * rng.gen_range(0.9..1.1);
            let amp = |rng: &mut ChaCha8Rng| {
                let m = rng.gen_range(0.30..0.55);
                if rng.gen_bool(0.5) {
                    m
                } else {
                    -m
                }
            };
            (fx + amp(rng) * fw, fy + amp(rng) * fh, bw)
        }
    };
    // express the box as a stage-1 candidate on the pyramid level where the
    // window matches the box size
    let scale = win_w as f64 / bw;
    let cand = CandidateRegion {
        level: 0,
        x: (bx * scale).round().max(0.0) as usize,
        y: (by * scale).round().max(0.0) as usize,
        score: 0.0,
    };
    let patch = extract_patch(&img, &cand, (win_w, win_h), scale);
    debug_assert_eq!((patch.width(), patch.height()), SELECTIVE_PATCH);
    equalize_histogram(&patch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn chips_have_window_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pos = stage1_positive(&mut rng);
        assert_eq!((pos.width(), pos.height()), STAGE1_WINDOW);
        let neg = stage1_negative(&mut rng);
        assert_eq!((neg.width(), neg.height()), STAGE1_WINDOW);
    }

    #[test]
    fn generator_is_seed_deterministic() {
        let a = stage1_positive(&mut ChaCha8Rng::seed_from_u64(42));
        let b = stage1_positive(&mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn scene_boxes_inside_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (img, boxes) = render_scene(&mut rng, 200, 160, 4, 30, 60);
        assert_eq!((img.width(), img.height()), (200, 160));
        for b in &boxes {
            assert!(b.x >= 0.0 && b.y >= 0.0);
            assert!(b.x + b.w <= 200.0 && b.y + b.h <= 160.0);
        }
    }

    #[test]
    fn selective_patch_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = selective_patch(&mut rng, true);
        assert_eq!((p.width(), p.height()), SELECTIVE_PATCH);
    }
}
