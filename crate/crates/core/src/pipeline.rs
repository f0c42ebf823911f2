//! Execution-mode orchestration: synchronous reference, asynchronous
//! producer/consumer over a bounded queue, two-pool level partitioning, and
//! single-scan patchwork. All modes produce the same detection set.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Instant;

use crate::cascade::{
    self, CandidateRegion, ClassifyOutcome, Detection, DetectorParams, ExecMode, RawDetection,
};
use crate::error::{Error, Result};
use crate::model::CascadeModel;
use crate::pack::{default_strip_width, pack_fcnr};
use crate::plane::ImagePlane;
use crate::pyramid::{build_pyramid, PyramidLevel};
use crate::stats::RunStats;

/// Bounded candidate queue capacity; the producer blocks when it is full.
pub const QUEUE_CAPACITY: usize = 4096;

/// CPU time consumed by the calling thread. Used to time the scanner so the
/// measurement is not distorted by other threads competing for cores.
fn thread_cpu_time() -> std::time::Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // Thread CPU clocks are always available on the platforms we target.
    unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    std::time::Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

type Classified = (CandidateRegion, ClassifyOutcome, Option<RawDetection>);

/// Synchronous mode: the reference semantics for every other mode.
pub fn run_sync(
    image: &ImagePlane,
    model: &CascadeModel,
    params: &DetectorParams,
) -> Result<(Vec<Detection>, RunStats)> {
    cascade::detect(image, model, params)
}

fn finalize(
    mut classified: Vec<Classified>,
    params: &DetectorParams,
    stats: &mut RunStats,
) -> Vec<Detection> {
    let group_start = Instant::now();
    classified.sort_by_key(|(c, _, _)| (c.level, c.y, c.x));
    let mut accepted = Vec::new();
    for (cand, outcome, raw) in &classified {
        if outcome.passed_stage2() {
            stats.stage2 += 1;
        }
        if let Some(raw) = raw {
            stats.stage3 += 1;
            accepted.push((*cand, *raw));
        }
    }
    let raws: Vec<RawDetection> = accepted.iter().map(|(_, r)| *r).collect();
    let detections = cascade::group_detections(&raws, params.min_neighbors, params.group_iou);
    stats.post_nms = detections.len() as u64;
    stats.group_time = group_start.elapsed();
    detections
}

/// Asynchronous mode: one scan worker walks the pyramid level by level and
/// emits candidates to a bounded queue; `selective_workers` consumers
/// classify them concurrently. Grouping runs only after the completion
/// barrier (scan finished and every candidate classified).
pub fn run_async(
    image: &ImagePlane,
    model: &CascadeModel,
    params: &DetectorParams,
    selective_workers: usize,
) -> Result<(Vec<Detection>, RunStats)> {
    params.validate()?;
    model.validate()?;
    if selective_workers == 0 {
        return Err(Error::Dimension("need at least one selective worker".into()));
    }
    let start = Instant::now();
    let mut stats = RunStats {
        mode: ExecMode::Async.name(),
        workers: selective_workers,
        ..Default::default()
    };

    let pyramid = build_pyramid(image, model.window(), params.min_size, params.scale_factor);
    let scales: Vec<f64> = pyramid.iter().map(|l| l.scale).collect();

    let (tx, rx) = crossbeam_channel::bounded::<CandidateRegion>(QUEUE_CAPACITY);
    let produced = AtomicU64::new(0);
    let consumed = AtomicU64::new(0);

    let (producer_result, worker_results) = thread::scope(|s| {
        let producer = {
            let produced = &produced;
            let pyramid = &pyramid;
            s.spawn(move || -> Result<(u64, u64, std::time::Duration)> {
                // scan time counts dense-scan work only, not time spent
                // blocked on a full queue or descheduled while classifiers
                // run, so it reflects frame complexity seen by the scanner
                // alone
                let mut scan_elapsed = std::time::Duration::ZERO;
                let mut sliding = 0u64;
                let mut stage1 = 0u64;
                for level in pyramid {
                    let t = thread_cpu_time();
                    let norm = level.image.normalized();
                    let (cands, cells) =
                        cascade::scan_stage1(level.index, &norm, model, params.t1)?;
                    scan_elapsed += thread_cpu_time().saturating_sub(t);
                    sliding += cells;
                    for cand in cands {
                        stage1 += 1;
                        produced.fetch_add(1, Ordering::SeqCst);
                        tx.send(cand)
                            .map_err(|_| Error::Dimension("candidate queue closed".into()))?;
                    }
                }
                Ok((sliding, stage1, scan_elapsed))
                // tx dropped here; consumers drain and stop
            })
        };

        let workers: Vec<_> = (0..selective_workers)
            .map(|_| {
                let rx = rx.clone();
                let consumed = &consumed;
                let scales = &scales;
                s.spawn(move || -> Result<Vec<Classified>> {
                    let mut out = Vec::new();
                    while let Ok(cand) = rx.recv() {
                        let (outcome, raw) = cascade::process_candidate(
                            image,
                            &cand,
                            scales[cand.level],
                            model,
                            params,
                        )?;
                        consumed.fetch_add(1, Ordering::SeqCst);
                        out.push((cand, outcome, raw));
                    }
                    Ok(out)
                })
            })
            .collect();
        drop(rx);

        let producer_result = producer.join().expect("scan worker panicked");
        let worker_results: Vec<_> = workers
            .into_iter()
            .map(|w| w.join().expect("selective worker panicked"))
            .collect();
        (producer_result, worker_results)
    });

    let (sliding, stage1, scan_time) = producer_result?;
    stats.sliding_windows = sliding;
    stats.stage1 = stage1;
    stats.scan_time = scan_time;

    let mut classified = Vec::new();
    for r in worker_results {
        classified.extend(r?);
    }
    stats.classify_time = start.elapsed() - stats.scan_time.min(start.elapsed());

    // completion barrier: every produced candidate must be classified
    let (p, c) = (produced.load(Ordering::SeqCst), consumed.load(Ordering::SeqCst));
    if p != c {
        return Err(Error::Dimension(format!(
            "completion barrier violated: {} produced, {} classified",
            p, c
        )));
    }

    let detections = finalize(classified, params, &mut stats);
    stats.total_time = start.elapsed();
    Ok((detections, stats))
}

/// Partitioned mode: two worker pools split the pyramid levels; pool A
/// claims the smallest (topmost) levels downward, pool B the largest level
/// upward. Each worker scans its claimed level and classifies its candidates
/// inline.
pub fn run_partitioned(
    image: &ImagePlane,
    model: &CascadeModel,
    params: &DetectorParams,
    pool_a: usize,
    pool_b: usize,
) -> Result<(Vec<Detection>, RunStats)> {
    params.validate()?;
    model.validate()?;
    if pool_a == 0 || pool_b == 0 {
        return Err(Error::Dimension("both pools need at least one worker".into()));
    }
    let start = Instant::now();
    let mut stats = RunStats {
        mode: ExecMode::Partitioned.name(),
        workers: pool_a + pool_b,
        ..Default::default()
    };

    let pyramid = build_pyramid(image, model.window(), params.min_size, params.scale_factor);
    let n = pyramid.len();
    // claimable index range [lo, hi]; pool A takes hi downward, pool B lo upward
    let range = Mutex::new((0usize, n as isize - 1));

    let claim = |from_top: bool| -> Option<usize> {
        let mut guard = range.lock().unwrap();
        let (lo, hi) = *guard;
        if (lo as isize) > hi {
            return None;
        }
        if from_top {
            guard.1 = hi - 1;
            Some(hi as usize)
        } else {
            guard.0 = lo + 1;
            Some(lo)
        }
    };

    let worker = |from_top: bool| -> Result<(u64, Vec<Classified>)> {
        let mut sliding = 0u64;
        let mut out = Vec::new();
        while let Some(idx) = claim(from_top) {
            let level = &pyramid[idx];
            let norm = level.image.normalized();
            let (cands, cells) = cascade::scan_stage1(level.index, &norm, model, params.t1)?;
            sliding += cells;
            for cand in cands {
                let (outcome, raw) =
                    cascade::process_candidate(image, &cand, level.scale, model, params)?;
                out.push((cand, outcome, raw));
            }
        }
        Ok((sliding, out))
    };

    let scan_start = Instant::now();
    let results: Vec<Result<(u64, Vec<Classified>)>> = thread::scope(|s| {
        let handles: Vec<_> = (0..pool_a)
            .map(|_| s.spawn(|| worker(true)))
            .chain((0..pool_b).map(|_| s.spawn(|| worker(false))))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("partition worker panicked"))
            .collect()
    });
    let scan_elapsed = scan_start.elapsed();

    let mut classified = Vec::new();
    for r in results {
        let (sliding, mut items) = r?;
        stats.sliding_windows += sliding;
        classified.append(&mut items);
    }
    stats.stage1 = classified.len() as u64;
    stats.scan_time = scan_elapsed;
    stats.classify_time = scan_elapsed;

    let detections = finalize(classified, params, &mut stats);
    stats.total_time = start.elapsed();
    Ok((detections, stats))
}

/// Patchwork mode: pack all pyramid levels into one strip, run a single
/// stage-1 scan over it, keep only candidates whose window lies wholly
/// inside one level's placement, then classify as usual.
///
/// Placements are aligned to the stage-1 output stride so the strip's
/// response grid coincides with each level's own grid.
pub fn run_patchwork(
    image: &ImagePlane,
    model: &CascadeModel,
    params: &DetectorParams,
) -> Result<(Vec<Detection>, RunStats)> {
    params.validate()?;
    model.validate()?;
    let start = Instant::now();
    let mut stats = RunStats {
        mode: ExecMode::Patchwork.name(),
        workers: 1,
        ..Default::default()
    };

    let pyramid = build_pyramid(image, model.window(), params.min_size, params.scale_factor);
    if pyramid.is_empty() {
        stats.total_time = start.elapsed();
        return Ok((Vec::new(), stats));
    }
    let stride = model.spec(0).output_stride();
    let strip_width = default_strip_width(&pyramid, stride);
    let packed = pack_fcnr(&pyramid, strip_width, stride)?;
    let (win_w, win_h) = model.window();

    // sliding-window positions counted per level, as the other modes see them
    for level in &pyramid {
        stats.sliding_windows +=
            cascade::window_positions(model, level.image.width(), level.image.height());
    }

    let scan_start = Instant::now();
    let norm = packed.strip.normalized();
    let (strip_cands, _strip_cells) = cascade::scan_stage1(0, &norm, model, params.t1)?;
    let mut candidates = Vec::new();
    for cand in strip_cands {
        if let Some(p) = packed.window_owner(cand.x, cand.y, win_w, win_h) {
            candidates.push(CandidateRegion {
                level: p.level,
                x: cand.x - p.x,
                y: cand.y - p.y,
                score: cand.score,
            });
        }
    }
    stats.stage1 = candidates.len() as u64;
    stats.scan_time = scan_start.elapsed();

    let classify_start = Instant::now();
    let mut classified = Vec::new();
    for cand in candidates {
        let scale = pyramid[cand.level].scale;
        let (outcome, raw) = cascade::process_candidate(image, &cand, scale, model, params)?;
        classified.push((cand, outcome, raw));
    }
    stats.classify_time = classify_start.elapsed();

    let detections = finalize(classified, params, &mut stats);
    stats.total_time = start.elapsed();
    Ok((detections, stats))
}

/// Dispatch on the mode in `params`. `workers` configures async consumers or
/// the combined partitioned pool size.
pub fn run(
    image: &ImagePlane,
    model: &CascadeModel,
    params: &DetectorParams,
    workers: usize,
) -> Result<(Vec<Detection>, RunStats)> {
    match params.mode {
        ExecMode::Sync => run_sync(image, model, params),
        ExecMode::Async => run_async(image, model, params, workers.max(1)),
        ExecMode::Partitioned => {
            let a = (workers.max(2) + 1) / 2;
            let b = workers.max(2) - a;
            run_partitioned(image, model, params, a, b.max(1))
        }
        ExecMode::Patchwork => run_patchwork(image, model, params),
    }
}

/// Build the pyramid a detector run would use; exposed for inspection tools.
pub fn detector_pyramid(
    image: &ImagePlane,
    model: &CascadeModel,
    params: &DetectorParams,
) -> Vec<PyramidLevel> {
    build_pyramid(image, model.window(), params.min_size, params.scale_factor)
}
