//! Desk-scale cascade trainer: SGD with momentum on mean squared error
//! against +-1 targets, one network at a time, with per-epoch holdout
//! logging and hard-negative mining for the scanning network. Data comes
//! from the seeded synthetic generator, so a full training run is
//! deterministic given its seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{reference_specs, CascadeModel, NetworkSpec, NetworkWeights};
use crate::nn::{self, PoolMode, SgdMomentum};
use crate::plane::ImagePlane;
use crate::pyramid::build_pyramid;
use crate::synth;

/// Knobs for one full cascade training run.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub seed: u64,
    pub pooling: PoolMode,
    /// Training samples per class per network.
    pub train_per_class: usize,
    /// Holdout samples per class per network.
    pub holdout_per_class: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f32,
    pub momentum: f32,
    /// Multiplicative learning-rate decay per epoch.
    pub lr_decay: f32,
    /// Stop a network early once its holdout error drops to this fraction.
    pub target_error: f64,
    /// Hard-negative mining rounds for the scanning network.
    pub mining_rounds: usize,
    /// Scenes scanned per mining round.
    pub mining_scenes: usize,
    /// Cap on mined negatives added per round.
    pub mined_per_round: usize,
    /// Additional epochs after each mining round.
    pub mining_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            pooling: PoolMode::Max,
            train_per_class: 1200,
            holdout_per_class: 300,
            epochs: 20,
            batch_size: 32,
            learning_rate: 0.005,
            momentum: 0.9,
            lr_decay: 0.97,
            target_error: 0.002,
            mining_rounds: 2,
            mining_scenes: 40,
            mined_per_round: 1500,
            mining_epochs: 10,
        }
    }
}

impl TrainConfig {
    /// A small configuration for fast smoke tests.
    pub fn quick(seed: u64) -> Self {
        Self {
            seed,
            train_per_class: 80,
            holdout_per_class: 20,
            epochs: 4,
            mining_rounds: 1,
            mining_scenes: 2,
            mined_per_round: 100,
            mining_epochs: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_per_class == 0 || self.holdout_per_class == 0 {
            return Err(Error::Training("need at least one sample per class".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Training("epochs and batch size must be positive".into()));
        }
        // a zero learning rate is allowed: it trains nothing but lets
        // callers verify that the holdout error matches initialization
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Training(
                "learning rate must be non-negative and momentum in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    /// Network index, 0-based (0 = stage-1 net).
    pub network: usize,
    pub epoch: usize,
    pub train_loss: f32,
    pub holdout_error: f64,
}

/// The result of a full training run.
#[derive(Debug, Clone)]
pub struct TrainedCascade {
    pub model: CascadeModel,
    pub logs: Vec<EpochLog>,
    /// Final holdout misclassification fraction per network.
    pub holdout_errors: [f64; 3],
}

/// Misclassification fraction: the response sign must match the target sign.
pub fn holdout_error(
    samples: &[(ImagePlane, f32)],
    spec: &NetworkSpec,
    weights: &NetworkWeights,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Training("empty holdout set".into()));
    }
    let mut wrong = 0usize;
    for (img, target) in samples {
        let out = nn::forward(img, spec, weights)?;
        let y = out.map(0).get(0, 0);
        if (y > 0.0) != (*target > 0.0) {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / samples.len() as f64)
}

/// Run `epochs` SGD epochs on an existing weight/momentum state, logging each
/// epoch and stopping early at the target holdout error. `epoch_base` offsets
/// the logged epoch numbers so resumed rounds stay ordered.
#[allow(clippy::too_many_arguments)]
fn run_epochs(
    network: usize,
    spec: &NetworkSpec,
    weights: &mut NetworkWeights,
    state: &mut SgdMomentum,
    train: &mut Vec<(ImagePlane, f32)>,
    holdout: &[(ImagePlane, f32)],
    cfg: &TrainConfig,
    epochs: usize,
    epoch_base: usize,
    logs: &mut Vec<EpochLog>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut err = holdout_error(holdout, spec, weights)?;
    let mut lr = cfg.learning_rate * cfg.lr_decay.powi(epoch_base as i32);
    for epoch in 0..epochs {
        train.shuffle(rng);
        let mut loss_sum = 0.0f32;
        let mut batches = 0usize;
        for batch in train.chunks(cfg.batch_size) {
            loss_sum +=
                nn::backward_sgd_step(batch, spec, weights, state, lr, cfg.momentum)?;
            batches += 1;
        }
        err = holdout_error(holdout, spec, weights)?;
        logs.push(EpochLog {
            network,
            epoch: epoch_base + epoch,
            train_loss: loss_sum / batches.max(1) as f32,
            holdout_error: err,
        });
        if err <= cfg.target_error {
            break;
        }
        lr *= cfg.lr_decay;
    }
    Ok(err)
}

/// Train one network from random initialization on a labeled set, logging
/// every epoch. Returns the weights and the final holdout error.
pub fn train_network(
    network: usize,
    spec: &NetworkSpec,
    train: &mut Vec<(ImagePlane, f32)>,
    holdout: &[(ImagePlane, f32)],
    cfg: &TrainConfig,
    logs: &mut Vec<EpochLog>,
) -> Result<(NetworkWeights, f64)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9e37_79b9 + network as u64));
    let mut weights = NetworkWeights::random(spec, &mut rng);
    let mut state = SgdMomentum::zeros_like(&weights);
    let err = run_epochs(
        network, spec, &mut weights, &mut state, train, holdout, cfg, cfg.epochs, 0, logs,
        &mut rng,
    )?;
    Ok((weights, err))
}

/// Scan rendered scenes with the current scanning network and collect
/// window crops it wrongly fires on (ignoring windows that overlap a
/// planted face). The returned chips are raw 8-bit-range planes.
pub fn mine_stage1_negatives(
    spec: &NetworkSpec,
    weights: &NetworkWeights,
    rng: &mut ChaCha8Rng,
    scenes: usize,
    cap: usize,
) -> Result<Vec<ImagePlane>> {
    let window = spec.receptive_field();
    let stride = spec.output_stride();
    let mut mined = Vec::new();
    for _ in 0..scenes {
        if mined.len() >= cap {
            break;
        }
        let (img, boxes) = synth::render_scene(rng, 320, 240, 3, 30, 80);
        let pyramid = build_pyramid(&img, window, 30, 1.15);
        for level in &pyramid {
            let norm = level.image.normalized();
            if norm.width() < window.0 || norm.height() < window.1 {
                continue;
            }
            let out = nn::forward(&norm, spec, weights)?;
            let map = out.map(0);
            for j in 0..map.height() {
                for i in 0..map.width() {
                    if map.get(i, j) <= 0.0 {
                        continue;
                    }
                    let (lx, ly) = (i * stride, j * stride);
                    let rect = crate::eval::Rect {
                        x: lx as f64 / level.scale,
                        y: ly as f64 / level.scale,
                        w: window.0 as f64 / level.scale,
                        h: window.1 as f64 / level.scale,
                    };
                    if boxes.iter().any(|b| crate::eval::iou_rect(b, &rect) > 0.35) {
                        continue;
                    }
                    mined.push(level.image.crop(lx, ly, window.0, window.1)?);
                    if mined.len() >= cap {
                        return Ok(mined);
                    }
                }
            }
        }
    }
    Ok(mined)
}

fn labeled(pos: Vec<ImagePlane>, neg: Vec<ImagePlane>) -> Vec<(ImagePlane, f32)> {
    pos.into_iter()
        .map(|p| (p.normalized(), 1.0))
        .chain(neg.into_iter().map(|n| (n.normalized(), -1.0)))
        .collect()
}

/// Center crop of a selective-unit patch sized to one network's receptive
/// field, so training targets a single 1x1 response.
fn center_crop(patch: &ImagePlane, spec: &NetworkSpec) -> Result<ImagePlane> {
    let (rw, rh) = spec.receptive_field();
    let x = (patch.width() - rw) / 2;
    let y = (patch.height() - rh) / 2;
    patch.crop(x, y, rw, rh)
}

/// Train all three networks in sequence and assemble the cascade model.
///
/// The scanning network additionally goes through hard-negative mining
/// rounds: scenes are scanned with the current weights and false positives
/// are fed back as negatives.
pub fn train_cascade(cfg: &TrainConfig) -> Result<TrainedCascade> {
    cfg.validate()?;
    let specs = reference_specs(cfg.pooling);
    let mut logs = Vec::new();

    // stage-1 chips
    let mut data_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x5851_f42d_4c95_7f2d));
    let n = cfg.train_per_class + cfg.holdout_per_class;
    let pos: Vec<_> = (0..n).map(|_| synth::stage1_positive(&mut data_rng)).collect();
    let neg: Vec<_> = (0..n).map(|_| synth::stage1_negative(&mut data_rng)).collect();
    let split = |v: Vec<ImagePlane>| {
        let mut v = v;
        let held = v.split_off(cfg.train_per_class);
        (v, held)
    };
    let (pos_train, pos_hold) = split(pos);
    let (neg_train, neg_hold) = split(neg);
    let mut train1 = labeled(pos_train, neg_train);
    let hold1 = labeled(pos_hold, neg_hold);

    let mut sgd_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let mut w1 = NetworkWeights::random(&specs[0], &mut sgd_rng);
    let mut state1 = SgdMomentum::zeros_like(&w1);
    let mut e1 = run_epochs(
        0, &specs[0], &mut w1, &mut state1, &mut train1, &hold1, cfg, cfg.epochs, 0,
        &mut logs, &mut sgd_rng,
    )?;
    let mut epoch_base = cfg.epochs;
    for _ in 0..cfg.mining_rounds {
        let mined = mine_stage1_negatives(
            &specs[0],
            &w1,
            &mut data_rng,
            cfg.mining_scenes,
            cfg.mined_per_round,
        )?;
        if mined.len() < 8 {
            break;
        }
        train1.extend(mined.into_iter().map(|m| (m.normalized(), -1.0)));
        e1 = run_epochs(
            0, &specs[0], &mut w1, &mut state1, &mut train1, &hold1, cfg,
            cfg.mining_epochs, epoch_base, &mut logs, &mut sgd_rng,
        )?;
        epoch_base += cfg.mining_epochs;
    }
    drop(train1);

    // selective-unit patches, shared between the two verification networks;
    // negatives mix background with off-scale and off-center faces so the
    // nets learn scale and position selectivity, not just face texture
    use synth::PatchKind;
    let patches_pos: Vec<_> = (0..n)
        .map(|_| synth::selective_patch_kind(&mut data_rng, PatchKind::Face))
        .collect();
    let patches_neg: Vec<_> = (0..n)
        .map(|i| {
            let kind = match i % 4 {
                0 | 1 => PatchKind::Background,
                2 => PatchKind::OffScale,
                _ => PatchKind::OffCenter,
            };
            synth::selective_patch_kind(&mut data_rng, kind)
        })
        .collect();

    let mut stage_weights = Vec::with_capacity(2);
    let mut stage_errors = Vec::with_capacity(2);
    for (net, spec) in specs.iter().enumerate().skip(1) {
        let crop_all = |src: &[ImagePlane]| -> Result<Vec<ImagePlane>> {
            src.iter().map(|p| center_crop(p, spec)).collect()
        };
        let (pos_train, pos_hold) = split(crop_all(&patches_pos)?);
        let (neg_train, neg_hold) = split(crop_all(&patches_neg)?);
        let mut train = labeled(pos_train, neg_train);
        let hold = labeled(pos_hold, neg_hold);
        let (w, e) = train_network(net, spec, &mut train, &hold, cfg, &mut logs)?;
        stage_weights.push(w);
        stage_errors.push(e);
    }
    let w3 = stage_weights.pop().expect("two selective networks trained");
    let w2 = stage_weights.pop().expect("two selective networks trained");
    let e3 = stage_errors.pop().expect("two selective networks trained");
    let e2 = stage_errors.pop().expect("two selective networks trained");

    let model = CascadeModel::new(specs, [w1, w2, w3])?;
    Ok(TrainedCascade {
        model,
        logs,
        holdout_errors: [e1, e2, e3],
    })
}

/// Render the training log as CSV.
pub fn log_csv(logs: &[EpochLog]) -> String {
    let mut out = String::from("network,epoch,train_loss,holdout_error\n");
    for l in logs {
        out.push_str(&format!(
            "{},{},{:.6},{:.6}\n",
            l.network + 1,
            l.epoch,
            l.train_loss,
            l.holdout_error
        ));
    }
    out
}
