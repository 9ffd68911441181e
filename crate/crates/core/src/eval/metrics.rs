use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::Instant;

/// One measurement of a prequential run. Accuracies are percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub instances: u64,
    pub accuracy_cum: f64,
    pub accuracy_window: f64,
    pub seconds: f64,
    pub throughput: f64,
    pub splits: u64,
    pub leaves: u64,
}

impl MetricsRow {
    /// CSV column order.
    pub const COLUMNS: [&'static str; 7] = [
        "instances",
        "accuracy_cum",
        "accuracy_window",
        "seconds",
        "throughput",
        "splits",
        "leaves",
    ];
}

/// Test-then-train scorekeeping: cumulative accuracy, accuracy over a
/// sliding window of the last `report_every` predictions, and a row every
/// `report_every` scored instances.
#[derive(Clone, Debug)]
pub struct PrequentialMeter {
    report_every: u64,
    window: VecDeque<bool>,
    window_correct: u64,
    seen: u64,
    correct: u64,
    rows: Vec<MetricsRow>,
    started: Instant,
}

impl PrequentialMeter {
    pub fn new(report_every: u64) -> Self {
        let report_every = report_every.max(1);
        Self {
            report_every,
            window: VecDeque::with_capacity(report_every.min(1 << 20) as usize),
            window_correct: 0,
            seen: 0,
            correct: 0,
            rows: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn restart_clock(&mut self) {
        self.started = Instant::now();
    }

    /// Scores one prediction. Returns true when a row is due.
    pub fn record(&mut self, correct: bool) -> bool {
        self.seen += 1;
        self.correct += u64::from(correct);
        self.window.push_back(correct);
        self.window_correct += u64::from(correct);
        if self.window.len() as u64 > self.report_every {
            let old = self.window.pop_front().expect("window is non-empty");
            self.window_correct -= u64::from(old);
        }
        self.seen % self.report_every == 0
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn correct(&self) -> u64 {
        self.correct
    }

    pub fn report_every(&self) -> u64 {
        self.report_every
    }

    /// Cumulative accuracy in percent; 0 before any prediction.
    pub fn accuracy(&self) -> f64 {
        percent(self.correct, self.seen)
    }

    pub fn window_accuracy(&self) -> f64 {
        percent(self.window_correct, self.window.len() as u64)
    }

    pub fn push_row(&mut self, splits: u64, leaves: u64) {
        let seconds = self.started.elapsed().as_secs_f64();
        self.rows.push(MetricsRow {
            instances: self.seen,
            accuracy_cum: self.accuracy(),
            accuracy_window: self.window_accuracy(),
            seconds,
            throughput: if seconds > 0.0 { self.seen as f64 / seconds } else { 0.0 },
            splits,
            leaves,
        });
    }

    /// Adds the end-of-stream row unless one was just emitted.
    pub fn finish(&mut self, splits: u64, leaves: u64) {
        if self.rows.last().is_none_or(|r| r.instances != self.seen) {
            self.push_row(splits, leaves);
        }
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<MetricsRow> {
        self.rows
    }
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}
