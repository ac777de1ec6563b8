//! Error bars for correlated Monte Carlo series.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Mean with a blocking error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub error: f64,
    /// Integrated autocorrelation time in units of the measurement stride,
    /// `τ_int = ½ (σ_block/σ_naive)²`.
    pub tau_int: f64,
    pub samples: usize,
    /// Whether the blocking error reached a plateau.
    pub plateau: bool,
}

/// Smallest number of blocks considered by the blocking analysis.
const MIN_BLOCKS: usize = 32;

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl Estimate {
    /// Blocking (Flyvbjerg–Petersen) analysis: block sizes `2^k` while at
    /// least 32 blocks remain; the reported error is the largest standard
    /// error over those levels, and a plateau is flagged when the last two
    /// levels agree within the statistical error of the standard error.
    pub fn from_series(series: &[f64]) -> Estimate {
        let n = series.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                error: f64::NAN,
                tau_int: f64::NAN,
                samples: 0,
                plateau: false,
            };
        }
        let (mean, se0) = mean_and_se(series);
        let mut level: Vec<f64> = series.to_vec();
        let mut ses = alloc::vec![(se0, n)];
        while level.len() / 2 >= MIN_BLOCKS {
            level = level.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
            ses.push((mean_and_se(&level).1, level.len()));
        }
        let error = ses.iter().map(|s| s.0).fold(0.0, f64::max);
        let plateau = if ses.len() >= 3 {
            let (a, _) = ses[ses.len() - 2];
            let (b, nb) = ses[ses.len() - 1];
            (a - b).abs() <= 2.0 * b / (2.0 * (nb as f64 - 1.0)).sqrt()
        } else {
            false
        };
        let tau_int = if se0 > 0.0 {
            0.5 * (error / se0).powi(2)
        } else {
            0.5
        };
        Estimate {
            mean,
            error,
            tau_int,
            samples: n,
            plateau,
        }
    }

    /// Combine estimates from independent chains of equal weight.
    pub fn combine(parts: &[Estimate]) -> Estimate {
        let k = parts.len() as f64;
        if parts.len() == 1 {
            return parts[0];
        }
        let mean = parts.iter().map(|e| e.mean).sum::<f64>() / k;
        let error = parts.iter().map(|e| e.error * e.error).sum::<f64>().sqrt() / k;
        Estimate {
            mean,
            error,
            tau_int: parts.iter().map(|e| e.tau_int).sum::<f64>() / k,
            samples: parts.iter().map(|e| e.samples).sum(),
            plateau: parts.iter().all(|e| e.plateau),
        }
    }

    /// `|mean - value| ≤ n σ`.
    pub fn consistent_with(&self, value: f64, n_sigma: f64) -> bool {
        (self.mean - value).abs() <= n_sigma * self.error
    }
}

/// Jackknife estimate of `f(⟨a⟩, ⟨b⟩)` over `blocks` contiguous blocks.
pub fn jackknife2<F: Fn(f64, f64) -> f64>(a: &[f64], b: &[f64], blocks: usize, f: F) -> Estimate {
    let n = a.len().min(b.len());
    let blocks = blocks.min(n).max(2);
    let size = n / blocks;
    if size == 0 {
        return Estimate {
            mean: f64::NAN,
            error: f64::NAN,
            tau_int: f64::NAN,
            samples: n,
            plateau: false,
        };
    }
    let used = size * blocks;
    let sa: f64 = a[..used].iter().sum();
    let sb: f64 = b[..used].iter().sum();
    let full = f(sa / used as f64, sb / used as f64);
    let mut leave = Vec::with_capacity(blocks);
    for i in 0..blocks {
        let ba: f64 = a[i * size..(i + 1) * size].iter().sum();
        let bb: f64 = b[i * size..(i + 1) * size].iter().sum();
        let rest = (used - size) as f64;
        leave.push(f((sa - ba) / rest, (sb - bb) / rest));
    }
    let mbar = leave.iter().sum::<f64>() / blocks as f64;
    let var = leave.iter().map(|x| (x - mbar) * (x - mbar)).sum::<f64>() * (blocks as f64 - 1.0)
        / blocks as f64;
    Estimate {
        mean: blocks as f64 * full - (blocks as f64 - 1.0) * mbar,
        error: var.sqrt(),
        // blocks are treated as independent
        tau_int: 0.5,
        samples: n,
        plateau: true,
    }
}
