//! Moving-interval statistics over trial batches and nominal-vs-scaled
//! comparison reports.
//!
//! The moving interval keeps samples that are neither frozen nor
//! post-arrival (a sample counts while the timing clock is still running or
//! the robot is still outside the goal radius). Per-trial statistics of the
//! reachability margin and the speed are aggregated across trials as
//! sample mean and `n-1` standard deviation; comparisons add relative
//! reductions and a shared-bin histogram of per-trial mean margins.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::TrialResult;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trial has no moving-interval samples")]
    EmptyInterval,
}

/// Moving-interval statistics of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub mean_delta: f64,
    /// Linear-interpolated 5th percentile of the margin.
    pub p5_delta: f64,
    /// Percentage of samples with strictly positive margin.
    pub pct_delta_pos: f64,
    pub max_delta: f64,
    pub mean_speed: f64,
    pub max_speed: f64,
}

/// Sample mean and `n-1` standard deviation across trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub trials: usize,
    pub mean_delta: MeanStd,
    pub p5_delta: MeanStd,
    pub pct_delta_pos: MeanStd,
    pub max_delta: MeanStd,
    pub mean_speed: MeanStd,
    pub max_speed: MeanStd,
    /// Per-trial mean margins, kept for histogramming.
    pub per_trial_mean_delta: Vec<f64>,
}

/// Relative reductions, in percent of the nominal aggregate mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reductions {
    pub pct_delta_pos: f64,
    pub mean_delta: f64,
    pub max_delta: f64,
    pub mean_speed: f64,
    pub max_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub nominal: AggregateMetrics,
    pub scaled: AggregateMetrics,
    pub reductions: Reductions,
    pub histogram: Histogram,
}

/// Shared-bin counts of per-trial mean margins for both batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges; bin `i` spans `[edges[i], edges[i+1])`, the last
    /// bin is closed on the right.
    pub edges: Vec<f64>,
    pub count_nominal: Vec<usize>,
    pub count_scaled: Vec<usize>,
}

/// True for samples that are neither frozen nor post-arrival.
pub fn moving_mask(r: &TrialResult) -> Vec<bool> {
    (0..r.len())
        .map(|k| {
            !r.frozen[k] && (r.tau_clock[k] < r.tau_end || r.p[k].dist(r.goal) > r.goal_tol)
        })
        .collect()
}

/// Linear-interpolated percentile between order statistics: rank
/// `pct/100 * (n-1)` into the sorted values.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty slice");
    assert!((0.0..=100.0).contains(&pct), "percentile out of range");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

pub fn trial_metrics(r: &TrialResult) -> Result<TrialMetrics, MetricsError> {
    let mask = moving_mask(r);
    let deltas: Vec<f64> = (0..r.len())
        .filter(|&k| mask[k])
        .map(|k| r.diag[k].delta)
        .collect();
    if deltas.is_empty() {
        return Err(MetricsError::EmptyInterval);
    }
    let speeds: Vec<f64> = (0..r.len())
        .filter(|&k| mask[k])
        .map(|k| r.v[k].norm())
        .collect();
    let n = deltas.len() as f64;
    let positives = deltas.iter().filter(|&&d| d > 0.0).count();
    Ok(TrialMetrics {
        mean_delta: deltas.iter().sum::<f64>() / n,
        p5_delta: percentile(&deltas, 5.0),
        pct_delta_pos: 100.0 * positives as f64 / n,
        max_delta: deltas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_speed: speeds.iter().sum::<f64>() / n,
        max_speed: speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Mean and `n-1` std; values are summed in sorted order so the result is
/// exactly permutation-invariant.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    if sorted.len() < 2 {
        return MeanStd { mean, std: 0.0 };
    }
    let ss = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    MeanStd {
        mean,
        std: (ss / (n - 1.0)).sqrt(),
    }
}

pub fn aggregate(ms: &[TrialMetrics]) -> AggregateMetrics {
    assert!(!ms.is_empty(), "aggregate of zero trials");
    let field = |f: fn(&TrialMetrics) -> f64| -> Vec<f64> { ms.iter().map(f).collect() };
    AggregateMetrics {
        trials: ms.len(),
        mean_delta: mean_std(&field(|m| m.mean_delta)),
        p5_delta: mean_std(&field(|m| m.p5_delta)),
        pct_delta_pos: mean_std(&field(|m| m.pct_delta_pos)),
        max_delta: mean_std(&field(|m| m.max_delta)),
        mean_speed: mean_std(&field(|m| m.mean_speed)),
        max_speed: mean_std(&field(|m| m.max_speed)),
        per_trial_mean_delta: field(|m| m.mean_delta),
    }
}

/// Relative reduction in percent; zero when the nominal mean is zero.
fn reduction(nominal: f64, scaled: f64) -> f64 {
    if nominal == 0.0 {
        0.0
    } else {
        100.0 * (nominal - scaled) / nominal
    }
}

/// Equal-width bins spanning both value sets; degenerate spans get a tiny
/// positive width so every value still lands in a bin.
pub fn histogram(nominal: &[f64], scaled: &[f64], bins: usize) -> Histogram {
    assert!(bins >= 1, "need at least one bin");
    let all = nominal.iter().chain(scaled);
    let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo, lo + 1e-9)
    } else {
        (lo, hi)
    };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| lo + width * i as f64).collect();
    let index = |v: f64| -> usize {
        let i = ((v - lo) / width) as usize;
        i.min(bins - 1)
    };
    let mut count_nominal = vec![0usize; bins];
    let mut count_scaled = vec![0usize; bins];
    for &v in nominal {
        count_nominal[index(v)] += 1;
    }
    for &v in scaled {
        count_scaled[index(v)] += 1;
    }
    Histogram {
        edges,
        count_nominal,
        count_scaled,
    }
}

impl Histogram {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_left,bin_right,count_nominal,count_scaled")?;
        for i in 0..self.count_nominal.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.count_nominal[i],
                self.count_scaled[i]
            )?;
        }
        Ok(())
    }
}

pub fn compare(nominal: AggregateMetrics, scaled: AggregateMetrics, bins: usize) -> CompareReport {
    let reductions = Reductions {
        pct_delta_pos: reduction(nominal.pct_delta_pos.mean, scaled.pct_delta_pos.mean),
        mean_delta: reduction(nominal.mean_delta.mean, scaled.mean_delta.mean),
        max_delta: reduction(nominal.max_delta.mean, scaled.max_delta.mean),
        mean_speed: reduction(nominal.mean_speed.mean, scaled.mean_speed.mean),
        max_speed: reduction(nominal.max_speed.mean, scaled.max_speed.mean),
    };
    let histogram = histogram(
        &nominal.per_trial_mean_delta,
        &scaled.per_trial_mean_delta,
        bins,
    );
    CompareReport {
        nominal,
        scaled,
        reductions,
        histogram,
    }
}

impl CompareReport {
    /// Side-by-side Markdown table of both batches.
    pub fn render_markdown(&self) -> String {
        let mut s = String::new();
        s.push_str("| Metric | Nominal (mean ± std) | Scaled (mean ± std) | Reduction (%) |\n");
        s.push_str("|---|---|---|---|\n");
        let mut row = |name: &str, n: MeanStd, sc: MeanStd, red: Option<f64>| {
            let red = red
                .map(|r| format!("{r:.2}"))
                .unwrap_or_else(|| "—".to_string());
            s.push_str(&format!(
                "| {name} | {:.4} ± {:.4} | {:.4} ± {:.4} | {red} |\n",
                n.mean, n.std, sc.mean, sc.std
            ));
        };
        row(
            "Positive-margin samples (%)",
            self.nominal.pct_delta_pos,
            self.scaled.pct_delta_pos,
            Some(self.reductions.pct_delta_pos),
        );
        row(
            "Mean margin (m/s^2)",
            self.nominal.mean_delta,
            self.scaled.mean_delta,
            Some(self.reductions.mean_delta),
        );
        row(
            "5th-percentile margin (m/s^2)",
            self.nominal.p5_delta,
            self.scaled.p5_delta,
            None,
        );
        row(
            "Max margin (m/s^2)",
            self.nominal.max_delta,
            self.scaled.max_delta,
            Some(self.reductions.max_delta),
        );
        row(
            "Mean speed (m/s)",
            self.nominal.mean_speed,
            self.scaled.mean_speed,
            Some(self.reductions.mean_speed),
        );
        row(
            "Max speed (m/s)",
            self.nominal.max_speed,
            self.scaled.max_speed,
            Some(self.reductions.max_speed),
        );
        s
    }
}
