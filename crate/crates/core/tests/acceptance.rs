//! End-to-end acceptance checks. One line of output per criterion; the
//! test fails if any criterion fails, but always prints the full table.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::{Duration, Instant};

use ccnc::cascade::{decide, scan_stage1, DecisionRule, Detection, DetectorParams};
use ccnc::eval::{iou_ellipse_rect_grid, match_discrete, Ellipse, Rect};
use ccnc::model::{
    reference_cascade_random, reference_specs, LayerSpec, NetworkSpec, NetworkWeights,
    PARAM_TARGETS,
};
use ccnc::nn::{activation, forward, mse_batch_gradients, PoolMode, ACTIVATION_AMPLITUDE};
use ccnc::pack::{default_strip_width, pack_fcnr};
use ccnc::pipeline::{run_async, run_partitioned, run_patchwork, run_sync};
use ccnc::plane::ImagePlane;
use ccnc::pyramid::PyramidLevel;
use ccnc::synth::render_scene;
use ccnc::{train_cascade, CascadeModel, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImagePlane {
    let data = (0..w * h).map(|_| rng.gen_range(0.0..255.0)).collect();
    ImagePlane::from_vec(w, h, data).unwrap()
}

// ---- criterion 1: activation accuracy ---------------------------------

fn c1_activation_accuracy() -> Result<String, String> {
    let start = Instant::now();
    let amplitude = ACTIVATION_AMPLITUDE as f64;
    let mut max_rel = 0.0f64;
    let mut x = -20.0f64;
    while x <= 20.0 {
        let exact = amplitude * (x * 2.0 / 3.0).tanh();
        if exact.abs() > 1e-9 {
            let approx = activation(x as f32) as f64;
            max_rel = max_rel.max((approx - exact).abs() / exact.abs());
        }
        x += 1e-3;
    }
    let elapsed = start.elapsed();
    if max_rel > 0.018 {
        return Err(format!("max relative error {:.5} exceeds 1.8%", max_rel));
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("sweep took {:.2?}, bar is 1 s", elapsed));
    }
    Ok(format!(
        "activation max rel error {:.4}% over [-20,20] step 1e-3 in {:.2?}",
        max_rel * 100.0,
        elapsed
    ))
}

// ---- criterion 2: dense-scan equivalence ------------------------------

fn c2_dense_scan_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let model = reference_cascade_random(PoolMode::Max, &mut rng);
    let (win_w, win_h) = model.window();
    let mut cells_checked = 0u64;
    for img_idx in 0..20 {
        let w = rng.gen_range(win_w..win_w + 20);
        let h = rng.gen_range(win_h..win_h + 20);
        let norm = random_image(&mut rng, w, h).normalized();
        let (cands, cells) = scan_stage1(0, &norm, &model, f32::NEG_INFINITY)
            .map_err(|e| e.to_string())?;
        if cands.len() as u64 != cells {
            return Err(format!("image {}: response map has holes", img_idx));
        }
        for cand in &cands {
            let window = norm
                .crop(cand.x, cand.y, win_w, win_h)
                .map_err(|e| e.to_string())?;
            let out = forward(&window, model.spec(0), model.weights(0))
                .map_err(|e| e.to_string())?;
            let expect = out.map(0).get(0, 0);
            let rel = (cand.score - expect).abs() / expect.abs().max(1e-3);
            if rel >= 1e-5 {
                return Err(format!(
                    "image {} window ({},{}): scan {} vs per-window {}",
                    img_idx, cand.x, cand.y, cand.score, expect
                ));
            }
            cells_checked += 1;
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(30) {
        return Err(format!("took {:.2?}, bar is 30 s", elapsed));
    }
    Ok(format!(
        "{} response cells on 20 random images match per-window passes within 1e-5 in {:.2?}",
        cells_checked, elapsed
    ))
}

// ---- criterion 3: geometry contract -----------------------------------

fn c3_geometry_contract() -> Result<String, String> {
    let specs = reference_specs(PoolMode::Max);
    if specs[0].receptive_field() != (27, 31) {
        return Err(format!(
            "stage-1 receptive field {:?}, want (27, 31)",
            specs[0].receptive_field()
        ));
    }
    if specs[0].output_stride() != 4 {
        return Err(format!("stage-1 stride {}, want 4", specs[0].output_stride()));
    }
    for (i, spec) in specs.iter().enumerate().skip(1) {
        if spec.output_shape(51, 55) != Some((5, 5)) {
            return Err(format!(
                "network {}: 51x55 maps to {:?}, want (5, 5)",
                i + 1,
                spec.output_shape(51, 55)
            ));
        }
    }
    let counts: Vec<usize> = specs.iter().map(|s| s.param_count()).collect();
    if counts != PARAM_TARGETS {
        return Err(format!("param counts {:?}, targets {:?}", counts, PARAM_TARGETS));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let manifest = reference_cascade_random(PoolMode::Max, &mut rng).manifest();
    for target in PARAM_TARGETS {
        if !manifest.contains(&target.to_string()) {
            return Err(format!("manifest does not report target {}", target));
        }
    }
    Ok(format!(
        "27x31/stride-4 scanning net, 51x55->5x5 selective nets, params {:?} meet targets; manifest reports all three",
        counts
    ))
}

// ---- criterion 4: gradient correctness --------------------------------
// Finite differences are evaluated on an f64 mirror of the forward pass so
// the comparison is not self-referential.

fn activation_f64(x: f64) -> f64 {
    let y = x * 2.0 / 3.0;
    let a = y.abs();
    let p = 1.0 + a + a * a + 1.41645 * a * a * a * a;
    let sgn = if y > 0.0 { 1.0 } else if y < 0.0 { -1.0 } else { 0.0 };
    ACTIVATION_AMPLITUDE as f64 * sgn * (1.0 - 1.0 / p)
}

fn forward_f64(input: &ImagePlane, spec: &NetworkSpec, weights: &NetworkWeights) -> f64 {
    let mut maps: Vec<Vec<f64>> = vec![input.data().iter().map(|&v| v as f64).collect()];
    let mut w = input.width();
    let mut h = input.height();
    let mut conv_idx = 0;
    for layer in spec.layers() {
        match *layer {
            LayerSpec::Conv {
                in_maps,
                out_maps,
                kernel_w,
                kernel_h,
            } => {
                let lw = weights.layer(conv_idx).unwrap();
                let ow = w - kernel_w + 1;
                let oh = h - kernel_h + 1;
                let mut next = Vec::with_capacity(out_maps);
                for o in 0..out_maps {
                    let mut m = vec![0.0f64; ow * oh];
                    for y in 0..oh {
                        for x in 0..ow {
                            let mut acc = lw.bias(o) as f64;
                            for i in 0..in_maps {
                                let k = lw.kernel(o, i);
                                for ky in 0..kernel_h {
                                    for kx in 0..kernel_w {
                                        acc += k[ky * kernel_w + kx] as f64
                                            * maps[i][(y + ky) * w + (x + kx)];
                                    }
                                }
                            }
                            m[y * ow + x] = activation_f64(acc);
                        }
                    }
                    next.push(m);
                }
                maps = next;
                w = ow;
                h = oh;
                conv_idx += 1;
            }
            LayerSpec::Pool2 => {
                let ow = w / 2;
                let oh = h / 2;
                let mut next = Vec::with_capacity(maps.len());
                for m in &maps {
                    let mut out = vec![0.0f64; ow * oh];
                    for y in 0..oh {
                        for x in 0..ow {
                            let quad = [
                                m[2 * y * w + 2 * x],
                                m[2 * y * w + 2 * x + 1],
                                m[(2 * y + 1) * w + 2 * x],
                                m[(2 * y + 1) * w + 2 * x + 1],
                            ];
                            out[y * ow + x] = match spec.pooling() {
                                PoolMode::Max => {
                                    quad.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                                }
                                PoolMode::Mean => quad.iter().sum::<f64>() / 4.0,
                            };
                        }
                    }
                    next.push(out);
                }
                maps = next;
                w = ow;
                h = oh;
            }
        }
    }
    maps[0][0]
}

fn loss_f64(batch: &[(ImagePlane, f32)], spec: &NetworkSpec, weights: &NetworkWeights) -> f64 {
    batch
        .iter()
        .map(|(img, t)| {
            let d = forward_f64(img, spec, weights) - *t as f64;
            d * d
        })
        .sum::<f64>()
        / batch.len() as f64
}

fn c4_gradient_check() -> Result<String, String> {
    let spec = NetworkSpec::new(
        vec![
            LayerSpec::Conv {
                in_maps: 1,
                out_maps: 2,
                kernel_w: 3,
                kernel_h: 3,
            },
            LayerSpec::Pool2,
            LayerSpec::Conv {
                in_maps: 2,
                out_maps: 1,
                kernel_w: 2,
                kernel_h: 2,
            },
        ],
        PoolMode::Max,
    )
    .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let weights = NetworkWeights::random(&spec, &mut rng);
    let batch: Vec<(ImagePlane, f32)> = (0..6)
        .map(|i| {
            let data = (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (
                ImagePlane::from_vec(6, 6, data).unwrap(),
                if i % 2 == 0 { 1.0 } else { -1.0 },
            )
        })
        .collect();
    let (grads, _) = mse_batch_gradients(&batch, &spec, &weights).map_err(|e| e.to_string())?;

    let mut total = 0usize;
    let h = 1e-4f32;
    for li in 0..weights.layer_count() {
        let n_k = weights.layer(li).unwrap().kernels().len();
        let n_b = weights.layer(li).unwrap().biases().len();
        for ci in 0..n_k + n_b {
            let mut wp = weights.clone();
            let mut wm = weights.clone();
            {
                let lp = wp.layer_mut(li).unwrap();
                let lm = wm.layer_mut(li).unwrap();
                if ci < n_k {
                    lp.kernels_mut()[ci] += h;
                    lm.kernels_mut()[ci] -= h;
                } else {
                    lp.biases_mut()[ci - n_k] += h;
                    lm.biases_mut()[ci - n_k] -= h;
                }
            }
            let fd =
                (loss_f64(&batch, &spec, &wp) - loss_f64(&batch, &spec, &wm)) / (2.0 * h as f64);
            let an = if ci < n_k {
                grads[li].kernels()[ci]
            } else {
                grads[li].biases()[ci - n_k]
            } as f64;
            if (fd - an).abs() > 1e-3 * an.abs().max(1.0) {
                return Err(format!(
                    "layer {} coordinate {}: finite difference {} vs analytic {}",
                    li, ci, fd, an
                ));
            }
            total += 1;
        }
    }
    Ok(format!(
        "all {} trainable coordinates pass finite-difference comparison at 1e-3 relative",
        total
    ))
}

// ---- criterion 5: training target -------------------------------------

fn c5_training(trained: &mut Option<CascadeModel>) -> Result<String, String> {
    let start = Instant::now();
    let result = train_cascade(&TrainConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let e1 = result.holdout_errors[0];
    *trained = Some(result.model);
    if elapsed >= Duration::from_secs(600) {
        return Err(format!("training took {:.2?}, bar is 10 min", elapsed));
    }
    if e1 > 0.005 {
        return Err(format!("stage-1 holdout error {:.4}, bar is 0.005", e1));
    }
    Ok(format!(
        "stage-1 holdout error {:.4} (bar 0.005) after {:.2?} of training",
        e1, elapsed
    ))
}

// ---- criterion 6: stage-1 rejection -----------------------------------

fn c6_stage1_rejection(model: &CascadeModel) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let params = DetectorParams {
        t1: 0.0,
        min_size: 30,
        scale_factor: 1.15,
        ..Default::default()
    };
    let mut windows = 0u64;
    let mut survivors = 0u64;
    for _ in 0..50 {
        let faces = rng.gen_range(1..=3);
        let (scene, _) = render_scene(&mut rng, 240, 180, faces, 35, 80);
        let (_, stats) = run_sync(&scene, model, &params).map_err(|e| e.to_string())?;
        windows += stats.sliding_windows;
        survivors += stats.stage1;
    }
    let rejection = 1.0 - survivors as f64 / windows as f64;
    if rejection < 0.99 {
        return Err(format!(
            "stage 1 rejected {:.4} of {} windows, bar is 0.99",
            rejection, windows
        ));
    }
    Ok(format!(
        "stage 1 rejected {:.4}% of {} sliding windows over 50 scenes at T1 = 0",
        rejection * 100.0,
        windows
    ))
}

// ---- criterion 7: mode equivalence ------------------------------------

fn sort_detections(mut dets: Vec<Detection>) -> Vec<Detection> {
    dets.sort_by(|a, b| {
        (a.y, a.x, a.w, a.h)
            .partial_cmp(&(b.y, b.x, b.w, b.h))
            .unwrap()
    });
    dets
}

fn same_detections(a: &[Detection], b: &[Detection]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.neighbors == y.neighbors
                && (x.x - y.x).abs() < 1e-9
                && (x.y - y.y).abs() < 1e-9
                && (x.w - y.w).abs() < 1e-9
                && (x.h - y.h).abs() < 1e-9
                && (x.score - y.score).abs() / x.score.abs().max(1e-3) < 1e-5
        })
}

fn c7_mode_equivalence(model: &CascadeModel) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let params = DetectorParams {
        t1: 0.0,
        min_size: 27,
        scale_factor: 1.25,
        ..Default::default()
    };
    let mut with_detections = 0usize;
    for frame_idx in 0..100 {
        // alternate rendered scenes and pure noise
        let frame = if frame_idx % 2 == 0 {
            let faces = rng.gen_range(0..=2);
            render_scene(&mut rng, 100, 80, faces, 35, 60).0
        } else {
            random_image(&mut rng, 100, 80)
        };
        let (base, _) = run_sync(&frame, model, &params).map_err(|e| e.to_string())?;
        let base = sort_detections(base);
        if !base.is_empty() {
            with_detections += 1;
        }
        for workers in 1..=8usize {
            let (dets, _) =
                run_async(&frame, model, &params, workers).map_err(|e| e.to_string())?;
            if !same_detections(&base, &sort_detections(dets)) {
                return Err(format!("frame {}: async({}) diverges", frame_idx, workers));
            }
        }
        let (dets, _) = run_partitioned(&frame, model, &params, 2, 2).map_err(|e| e.to_string())?;
        if !same_detections(&base, &sort_detections(dets)) {
            return Err(format!("frame {}: partitioned diverges", frame_idx));
        }
        let (dets, _) = run_patchwork(&frame, model, &params).map_err(|e| e.to_string())?;
        if !same_detections(&base, &sort_detections(dets)) {
            return Err(format!("frame {}: patchwork diverges", frame_idx));
        }
    }
    Ok(format!(
        "sync, async(1-8), partitioned and patchwork agree on 100 frames ({} with detections)",
        with_detections
    ))
}

// ---- criterion 8: constant frame time ---------------------------------

fn median_duration(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

fn c8_constant_frame_time(model: &CascadeModel) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (w, h) = (320usize, 240usize);
    let empty = render_scene(&mut rng, w, h, 0, 16, 24).0;
    let (busy, boxes) = render_scene(&mut rng, w, h, 50, 16, 24);
    if boxes.len() < 35 {
        return Err(format!("only placed {} of 50 faces", boxes.len()));
    }
    let params = DetectorParams {
        t1: 0.0,
        min_size: 20,
        scale_factor: 1.25,
        ..Default::default()
    };
    let reps = 20;
    let time = |frame: &ImagePlane| -> Result<Vec<Duration>, String> {
        (0..reps)
            .map(|_| {
                run_async(frame, model, &params, 2)
                    .map(|(_, stats)| stats.scan_time)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let m_empty = median_duration(time(&empty)?);
    let m_busy = median_duration(time(&busy)?);
    let hi = m_empty.max(m_busy).as_secs_f64();
    let lo = m_empty.min(m_busy).as_secs_f64();
    let diff = (hi - lo) / hi;
    if diff > 0.15 {
        return Err(format!(
            "median scan time differs {:.1}%: empty {:.2?} vs {} faces {:.2?}",
            diff * 100.0,
            m_empty,
            boxes.len(),
            m_busy
        ));
    }
    Ok(format!(
        "median scan time over {} reps: 0 faces {:.2?} vs {} faces {:.2?} ({:.1}% apart, bar 15%)",
        reps,
        m_empty,
        boxes.len(),
        m_busy,
        diff * 100.0
    ))
}

// ---- criterion 9: packing soundness -----------------------------------

fn c9_packing_soundness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for case in 0..1000 {
        let n = rng.gen_range(1..=10);
        let mut sizes: Vec<(usize, usize)> = (0..n)
            .map(|_| (rng.gen_range(5..60), rng.gen_range(5..60)))
            .collect();
        // pyramid levels shrink monotonically
        sizes.sort_by_key(|&(w, h)| std::cmp::Reverse(w * h));
        let levels: Vec<PyramidLevel> = sizes
            .iter()
            .enumerate()
            .map(|(i, &(w, h))| PyramidLevel {
                index: i,
                scale: 1.0 / (i + 1) as f64,
                image: ImagePlane::zeros(w, h),
            })
            .collect();
        let strip_width = default_strip_width(&levels, 1) + rng.gen_range(0..30);
        let packed = pack_fcnr(&levels, strip_width, 1).map_err(|e| e.to_string())?;
        let naive: usize = sizes.iter().map(|&(_, h)| h).sum();
        if packed.height() > naive {
            return Err(format!(
                "case {}: strip height {} exceeds naive stacking {}",
                case,
                packed.height(),
                naive
            ));
        }
        for p in &packed.placements {
            if p.x + p.w > packed.width() || p.y + p.h > packed.height() {
                return Err(format!("case {}: placement {:?} out of strip", case, p));
            }
        }
        for (i, a) in packed.placements.iter().enumerate() {
            for b in &packed.placements[i + 1..] {
                let overlap =
                    a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
                if overlap {
                    return Err(format!("case {}: {:?} overlaps {:?}", case, a, b));
                }
            }
        }
    }
    Ok("1000 random pyramids: no overlaps, all placements in-strip, height never exceeds naive stacking".into())
}

// ---- criterion 10: eval harness oracle equivalence --------------------

fn oracle_match(ious: &[Vec<f64>], n_det: usize, threshold: f64) -> Vec<(usize, usize)> {
    let n_ann = ious.len();
    let mut ann_used = vec![false; n_ann];
    let mut det_used = vec![false; n_det];
    let mut out = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in 0..n_ann {
            if ann_used[a] {
                continue;
            }
            for d in 0..n_det {
                if det_used[d] || ious[a][d] < threshold {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((ba, bd, bi)) => {
                        ious[a][d] > bi || (ious[a][d] == bi && (a, d) < (ba, bd))
                    }
                };
                if better {
                    best = Some((a, d, ious[a][d]));
                }
            }
        }
        match best {
            Some((a, d, _)) => {
                ann_used[a] = true;
                det_used[d] = true;
                out.push((a, d));
            }
            None => break,
        }
    }
    out
}

fn c10_matching_and_iou() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for case in 0..500 {
        let n_ann = rng.gen_range(0..=6);
        let n_det = rng.gen_range(0..=6);
        let ious: Vec<Vec<f64>> = (0..n_ann)
            .map(|_| {
                (0..n_det)
                    .map(|_| (rng.gen_range(0..=10) as f64) / 10.0)
                    .collect()
            })
            .collect();
        let got: Vec<(usize, usize)> = match_discrete(&ious, n_det, 0.5)
            .matched
            .iter()
            .map(|&(a, d, _)| (a, d))
            .collect();
        let want = oracle_match(&ious, n_det, 0.5);
        if got != want {
            return Err(format!(
                "case {}: greedy {:?} vs brute force {:?} on {:?}",
                case, got, want, ious
            ));
        }
    }

    let analytic = std::f64::consts::PI / 4.0;
    let circle = Ellipse {
        major_radius: 40.0,
        minor_radius: 40.0,
        angle: 0.0,
        cx: 100.0,
        cy: 100.0,
    };
    let square = Rect {
        x: 60.0,
        y: 60.0,
        w: 80.0,
        h: 80.0,
    };
    let got_circle = iou_ellipse_rect_grid(&circle, &square, 0.25);
    let ellipse = Ellipse {
        major_radius: 50.0,
        minor_radius: 25.0,
        angle: 0.0,
        cx: 0.0,
        cy: 0.0,
    };
    let bbox = Rect {
        x: -50.0,
        y: -25.0,
        w: 100.0,
        h: 50.0,
    };
    let got_ellipse = iou_ellipse_rect_grid(&ellipse, &bbox, 0.25);
    for (name, got) in [("circle", got_circle), ("ellipse", got_ellipse)] {
        if (got - analytic).abs() / analytic >= 0.02 {
            return Err(format!(
                "{} in bounding box: IoU {:.5} vs analytic {:.5}",
                name, got, analytic
            ));
        }
    }
    Ok(format!(
        "greedy matching equals brute force on 500 instances; ellipse IoU {:.4}/{:.4} within 2% of pi/4",
        got_circle, got_ellipse
    ))
}

// ---- criterion 11: decision-rule table --------------------------------

fn c11_decision_rule() -> Result<String, String> {
    let mut checked = 0usize;
    for tm in 1..=5usize {
        for k2 in 0..=50usize {
            for k3 in 0..=50usize {
                let strict = (k2 >= tm && k3 > 0) || (k2 > 0 && k3 >= tm);
                let weak = k2 >= tm || k3 >= tm;
                if decide(k2, k3, tm, DecisionRule::Strict) != strict
                    || decide(k2, k3, tm, DecisionRule::Weak) != weak
                {
                    return Err(format!("mismatch at K2={} K3={} Tm={}", k2, k3, tm));
                }
                // raising Tm can only reject more
                if tm > 1 {
                    for rule in [DecisionRule::Strict, DecisionRule::Weak] {
                        if decide(k2, k3, tm, rule) && !decide(k2, k3, tm - 1, rule) {
                            return Err(format!(
                                "monotonicity broken at K2={} K3={} Tm={}",
                                k2, k3, tm
                            ));
                        }
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{} (K2, K3, Tm) triples match the formulas; acceptance is monotone in Tm",
        checked
    ))
}

// ---- criterion 12: declared not reproducible --------------------------

fn c12_declared_not_reproducible() -> Result<String, String> {
    Ok("published full-corpus ROC/F1 curves and absolute fps figures need external \
        datasets and hardware and are out of scope; the harness accepts real \
        annotation data when supplied"
        .into())
}

#[test]
fn acceptance_criteria() {
    let mut results: Vec<(usize, Result<String, String>)> = Vec::new();
    results.push((1, c1_activation_accuracy()));
    results.push((2, c2_dense_scan_equivalence()));
    results.push((3, c3_geometry_contract()));
    results.push((4, c4_gradient_check()));

    let mut trained = None;
    results.push((5, c5_training(&mut trained)));
    match &trained {
        Some(model) => {
            results.push((6, c6_stage1_rejection(model)));
            results.push((7, c7_mode_equivalence(model)));
            results.push((8, c8_constant_frame_time(model)));
        }
        None => {
            for n in 6..=8 {
                results.push((n, Err("skipped: training failed".into())));
            }
        }
    }
    results.push((9, c9_packing_soundness()));
    results.push((10, c10_matching_and_iou()));
    results.push((11, c11_decision_rule()));
    results.push((12, c12_declared_not_reproducible()));

    let mut failures = 0;
    for (n, outcome) in &results {
        match outcome {
            Ok(msg) => println!("criterion {:2}: PASS - {}", n, msg),
            Err(msg) => {
                failures += 1;
                println!("criterion {:2}: FAIL - {}", n, msg);
            }
        }
    }
    assert_eq!(failures, 0, "{} acceptance criteria failed", failures);
}
