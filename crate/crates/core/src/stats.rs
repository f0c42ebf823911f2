//! Per-run counters and timings shaped as a rejection table: sliding
//! windows, per-stage survivors, post-NMS detections.

use std::time::Duration;

/// Per-stage window counts and wall times for one detector run.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    /// Total stage-1 window positions over all pyramid levels.
    pub sliding_windows: u64,
    /// Windows whose stage-1 response exceeded T1.
    pub stage1: u64,
    /// Candidates surviving the CNN2 gate of the selective unit.
    pub stage2: u64,
    /// Candidates accepted by the decision rule.
    pub stage3: u64,
    /// Final detections after grouping.
    pub post_nms: u64,

    pub scan_time: Duration,
    pub classify_time: Duration,
    pub group_time: Duration,
    pub total_time: Duration,

    pub mode: &'static str,
    pub workers: usize,
}

impl RunStats {
    /// Counts must be non-increasing across stages.
    pub fn counts_consistent(&self) -> bool {
        self.sliding_windows >= self.stage1
            && self.stage1 >= self.stage2
            && self.stage2 >= self.stage3
            && self.stage3 >= self.post_nms
    }

    /// Header for the rejection-table CSV.
    pub fn table_csv_header() -> &'static str {
        "sliding,stage1,stage2,stage3,nms"
    }

    pub fn table_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.sliding_windows, self.stage1, self.stage2, self.stage3, self.post_nms
        )
    }

    /// Fraction of sliding-window positions rejected by stage 1.
    pub fn stage1_rejection(&self) -> f64 {
        if self.sliding_windows == 0 {
            return 0.0;
        }
        1.0 - self.stage1 as f64 / self.sliding_windows as f64
    }
}
