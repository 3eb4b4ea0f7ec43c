//! Reference implementations used as independent oracles.
#![allow(dead_code)]

use calibkit::scaling::{sigmoid_scaled, softmax_scaled};
use calibkit::{LogitDataset, Temperature};

pub fn t(v: f64) -> Temperature {
    Temperature::new(v).unwrap()
}

/// ECE by a double loop over bins and examples, with bin membership read
/// straight off the definition `[b/n, (b+1)/n)`, top bin closed.
pub fn naive_ece(probs: &[f64], outcomes: &[bool], num_bins: usize) -> f64 {
    let n = probs.len() as f64;
    let mut value = 0.0;
    for b in 0..num_bins {
        let lo = b as f64 / num_bins as f64;
        let hi = (b + 1) as f64 / num_bins as f64;
        let mut conf = 0.0;
        let mut hits = 0usize;
        let mut count = 0usize;
        for (&p, &y) in probs.iter().zip(outcomes) {
            let inside = p >= lo && (p < hi || b == num_bins - 1);
            if inside {
                conf += p;
                hits += usize::from(y);
                count += 1;
            }
        }
        if count > 0 {
            let c = conf / count as f64;
            let f = hits as f64 / count as f64;
            value += (count as f64 / n) * (c - f).abs();
        }
    }
    value
}

/// AUC by counting every (positive, negative) pair; ties count one half.
pub fn pair_count_auc(scores: &[f64], positive: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Macro one-vs-rest AUC of tempered probabilities by pair counting.
pub fn pair_count_macro_auc(ds: &LogitDataset, temp: Temperature) -> f64 {
    if ds.is_binary() {
        let p: Vec<f64> = (0..ds.len()).map(|i| sigmoid_scaled(ds.scalar_logit(i), temp)).collect();
        let y: Vec<bool> = ds.labels().iter().map(|&l| l == 1).collect();
        return pair_count_auc(&p, &y);
    }
    let k = ds.num_classes();
    let probs: Vec<Vec<f64>> = ds.rows().map(|r| softmax_scaled(r, temp).into_inner()).collect();
    let mut total = 0.0;
    for c in 0..k {
        let s: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let y: Vec<bool> = ds.labels().iter().map(|&l| l == c).collect();
        total += pair_count_auc(&s, &y);
    }
    total / k as f64
}

/// Binary NLL written directly from the logistic likelihood.
pub fn naive_binary_nll(ds: &LogitDataset, temp: f64) -> f64 {
    (0..ds.len())
        .map(|i| {
            let sign = if ds.label(i) == 1 { 1.0 } else { -1.0 };
            let m = sign * ds.scalar_logit(i) / temp;
            // ln(1 + e^{-m}) without overflow
            if m > 0.0 {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            }
        })
        .sum()
}

/// Geometric grid argmin of [`naive_binary_nll`]; returns (T, ratio between neighbours).
pub fn grid_oracle_binary(ds: &LogitDataset, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    let ratio = (hi / lo).powf(1.0 / (points - 1) as f64);
    let mut best = (lo, f64::INFINITY);
    for i in 0..points {
        let temp = lo * ratio.powi(i as i32);
        let v = naive_binary_nll(ds, temp);
        if v < best.1 {
            best = (temp, v);
        }
    }
    (best.0, ratio)
}

/// Exact `q`-quantile of Binomial(m, p): the smallest k with P(X <= k) >= q.
pub fn binomial_quantile(m: u64, p: f64, q: f64) -> u64 {
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let mut ln_fact = vec![0.0; m as usize + 1];
    for i in 1..=m as usize {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let mut cdf = 0.0;
    for k in 0..=m {
        let ln_pmf = ln_fact[m as usize] - ln_fact[k as usize] - ln_fact[(m - k) as usize]
            + k as f64 * ln_p
            + (m - k) as f64 * ln_q;
        cdf += ln_pmf.exp();
        if cdf >= q {
            return k;
        }
    }
    m
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
