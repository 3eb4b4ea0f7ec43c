//! Reliability diagrams with consistency-resampling intervals.
//!
//! A consistency interval answers: if the predictions were calibrated, where
//! would each bin's observed frequency fall? Each replicate resamples the
//! predicted probabilities with replacement and draws every outcome as a
//! Bernoulli trial with the prediction as its success probability. The bars
//! therefore sit around the diagonal, and a bin whose observed frequency
//! falls outside its bar is evidence against calibration there.

use crate::io::{write_atomic, IoError};
use crate::metrics::{bin_statistics, BinStat, BinningConfig, MetricError};
use crate::rng::substream;
use crate::scaling::sigmoid_scaled;
use crate::types::{LogitDataset, Temperature};
use rand::Rng;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

pub const LOWER_QUANTILE: f64 = 0.05;
pub const UPPER_QUANTILE: f64 = 0.95;
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Error)]
pub enum ReliabilityError {
    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error("n_boot must be >= {MIN_REPLICATES}, got {0}")]
    TooFewReplicates(usize),

    #[error(transparent)]
    Io(#[from] IoError),

    #[error("reliability CSV line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReliabilityConfig {
    pub bins: BinningConfig,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        Self {
            bins: BinningConfig::default(),
            n_boot: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub mean_confidence: Option<f64>,
    pub observed_frequency: Option<f64>,
    pub count: usize,
    pub interval_lo: Option<f64>,
    pub interval_hi: Option<f64>,
}

impl ReliabilityBin {
    /// Whether the observed frequency lies inside the consistency interval.
    /// `None` for empty bins.
    pub fn is_consistent(&self) -> Option<bool> {
        match (self.observed_frequency, self.interval_lo, self.interval_hi) {
            (Some(f), Some(lo), Some(hi)) => Some(lo <= f && f <= hi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReliabilityReport {
    pub temperature: f64,
    pub bins: Vec<ReliabilityBin>,
    pub n: usize,
    pub quantiles: (f64, f64),
    pub n_boot: usize,
    pub seed: u64,
}

fn tempered_probabilities(dataset: &LogitDataset, t: Temperature) -> Result<Vec<f64>, MetricError> {
    if !dataset.is_binary() {
        return Err(MetricError::NotBinary);
    }
    Ok((0..dataset.len())
        .map(|i| sigmoid_scaled(dataset.scalar_logit(i), t))
        .collect())
}

/// Per-bin mean confidence, positive-label frequency and count.
pub fn reliability_bins(
    dataset: &LogitDataset,
    t: Temperature,
    bins: BinningConfig,
) -> Result<Vec<BinStat>, MetricError> {
    let probs = tempered_probabilities(dataset, t)?;
    let outcomes: Vec<bool> = dataset.labels().iter().map(|&y| y == 1).collect();
    Ok(bin_statistics(&probs, &outcomes, bins))
}

/// 5%/95% consistency intervals per bin for the tempered predictions of a
/// binary dataset. `None` marks bins that hold no predictions.
pub fn consistency_intervals(
    dataset: &LogitDataset,
    t: Temperature,
    bins: BinningConfig,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<Option<(f64, f64)>>, ReliabilityError> {
    let probs = tempered_probabilities(dataset, t)?;
    consistency_intervals_from_probabilities(&probs, bins, n_boot, seed)
}

/// Consistency resampling over raw predicted probabilities.
///
/// Replicate `r` draws from substream `r` of `seed`, so results do not
/// depend on replicate evaluation order.
pub fn consistency_intervals_from_probabilities(
    probs: &[f64],
    bins: BinningConfig,
    n_boot: usize,
    seed: u64,
) -> Result<Vec<Option<(f64, f64)>>, ReliabilityError> {
    if n_boot < MIN_REPLICATES {
        return Err(ReliabilityError::TooFewReplicates(n_boot));
    }
    let n_bins = bins.num_bins;
    let n = probs.len();
    if n == 0 {
        return Ok(vec![None; n_bins]);
    }
    let bin_index: Vec<usize> = probs.iter().map(|&p| bins.bin_of(p)).collect();
    let mut frequencies: Vec<Vec<f64>> = vec![Vec::with_capacity(n_boot); n_bins];
    let mut hits = vec![0u32; n_bins];
    let mut counts = vec![0u32; n_bins];
    let n_draw = u32::try_from(n).expect("dataset too large for resampling");

    for replicate in 0..n_boot {
        let mut rng = substream(seed, replicate as u64);
        hits.fill(0);
        counts.fill(0);
        for _ in 0..n {
            let j = rng.random_range(0..n_draw) as usize;
            let b = bin_index[j];
            counts[b] += 1;
            if rng.random::<f64>() < probs[j] {
                hits[b] += 1;
            }
        }
        for b in 0..n_bins {
            if counts[b] > 0 {
                frequencies[b].push(f64::from(hits[b]) / f64::from(counts[b]));
            }
        }
    }

    Ok(frequencies
        .into_iter()
        .map(|mut f| {
            if f.is_empty() {
                return None;
            }
            f.sort_by(f64::total_cmp);
            Some((quantile_sorted(&f, LOWER_QUANTILE), quantile_sorted(&f, UPPER_QUANTILE)))
        })
        .collect())
}

/// Linearly interpolated quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bins plus consistency intervals for one temperature.
pub fn reliability_report(
    dataset: &LogitDataset,
    t: Temperature,
    config: &ReliabilityConfig,
) -> Result<ReliabilityReport, ReliabilityError> {
    let stats = reliability_bins(dataset, t, config.bins)?;
    let intervals = consistency_intervals(dataset, t, config.bins, config.n_boot, config.seed)?;
    let bins = stats
        .into_iter()
        .zip(intervals)
        .map(|(s, iv)| ReliabilityBin {
            lo: s.lo,
            hi: s.hi,
            mean_confidence: s.mean_confidence,
            observed_frequency: s.observed_frequency,
            count: s.count,
            interval_lo: iv.map(|v| v.0),
            interval_hi: iv.map(|v| v.1),
        })
        .collect();
    Ok(ReliabilityReport {
        temperature: t.value(),
        bins,
        n: dataset.len(),
        quantiles: (LOWER_QUANTILE, UPPER_QUANTILE),
        n_boot: config.n_boot,
        seed: config.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotFormat {
    Svg,
    Csv,
}

pub const CSV_HEADER: &str = "bin_lo,bin_hi,mean_conf,obs_freq,count,lo,hi";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per bin; empty fields for empty bins. Floats use the shortest
/// representation that round-trips exactly.
pub fn render_csv(report: &ReliabilityReport) -> String {
    let mut out = String::with_capacity(64 * (report.bins.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for b in &report.bins {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            b.lo,
            b.hi,
            opt(b.mean_confidence),
            opt(b.observed_frequency),
            b.count,
            opt(b.interval_lo),
            opt(b.interval_hi)
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<ReliabilityBin>, ReliabilityError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == CSV_HEADER => {}
        _ => {
            return Err(ReliabilityError::Parse {
                line: 1,
                message: format!("expected header {CSV_HEADER:?}"),
            })
        }
    }
    let mut bins = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| ReliabilityError::Parse { line: line_no, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
        let opt_num = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
        bins.push(ReliabilityBin {
            lo: num(fields[0])?,
            hi: num(fields[1])?,
            mean_confidence: opt_num(fields[2])?,
            observed_frequency: opt_num(fields[3])?,
            count: fields[4].parse().map_err(|e| err(format!("count: {e}")))?,
            interval_lo: opt_num(fields[5])?,
            interval_hi: opt_num(fields[6])?,
        });
    }
    Ok(bins)
}

const SVG_SIZE: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PLOT: f64 = SVG_SIZE - 2.0 * MARGIN;
const CONSISTENT_COLOUR: &str = "#1f77b4";
const INCONSISTENT_COLOUR: &str = "#d62728";

fn px(p: f64) -> f64 {
    MARGIN + p * PLOT
}

fn py(p: f64) -> f64 {
    MARGIN + (1.0 - p) * PLOT
}

/// Static SVG 1.1 reliability diagram.
///
/// Draws the diagonal, a vertical consistency bar at each non-empty bin's
/// mean confidence and a marker at (mean confidence, observed frequency).
/// Markers outside their bar are drawn in red. Empty bins are omitted.
pub fn render_svg(report: &ReliabilityReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{0}" height="{0}" viewBox="0 0 {0} {0}">"#,
        SVG_SIZE
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{0}" height="{0}" fill="white"/>"#, SVG_SIZE);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="30" font-family="sans-serif" font-size="15" text-anchor="middle">Reliability diagram (T = {}, n = {})</text>"#,
        SVG_SIZE / 2.0,
        report.temperature,
        report.n
    );

    // axes and ticks
    let _ = writeln!(
        s,
        r#"<rect x="{m:.1}" y="{m:.1}" width="{p:.1}" height="{p:.1}" fill="none" stroke="black" stroke-width="1"/>"#,
        m = MARGIN,
        p = PLOT
    );
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{y1:.2}" stroke="#dddddd" stroke-width="1"/>"##,
            x = px(v),
            y0 = py(0.0),
            y1 = py(1.0)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="1"/>"##,
            x0 = px(0.0),
            x1 = px(1.0),
            y = py(v)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{:.1}</text>"#,
            px(v),
            py(0.0) + 16.0,
            v
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{:.1}</text>"#,
            px(0.0) - 6.0,
            py(v) + 4.0,
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="13" text-anchor="middle">Predicted probability</text>"#,
        SVG_SIZE / 2.0,
        SVG_SIZE - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0:.1}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {0:.1})">Observed frequency</text>"#,
        SVG_SIZE / 2.0
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555555" stroke-width="1" stroke-dasharray="4 3"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );

    for b in &report.bins {
        let (Some(conf), Some(freq)) = (b.mean_confidence, b.observed_frequency) else {
            continue;
        };
        if let (Some(lo), Some(hi)) = (b.interval_lo, b.interval_hi) {
            let x = px(conf);
            let _ = writeln!(
                s,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#444444" stroke-width="1.5"/>"##,
                py(lo),
                py(hi)
            );
            for y in [py(lo), py(hi)] {
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#444444" stroke-width="1.5"/>"##,
                    x - 4.0,
                    x + 4.0
                );
            }
        }
        let colour = match b.is_consistent() {
            Some(false) => INCONSISTENT_COLOUR,
            _ => CONSISTENT_COLOUR,
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{colour}"/>"#,
            px(conf),
            py(freq)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes the report as SVG or CSV; the file appears only once fully written.
pub fn render_reliability(
    report: &ReliabilityReport,
    format: PlotFormat,
    path: &Path,
) -> Result<(), ReliabilityError> {
    let body = match format {
        PlotFormat::Svg => render_svg(report),
        PlotFormat::Csv => render_csv(report),
    };
    write_atomic(path, body.as_bytes())?;
    Ok(())
}
