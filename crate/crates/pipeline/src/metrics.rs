//! Classification metrics over 3x3 confusion matrices (rows: truth, columns:
//! prediction), in percent.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type Confusion = [[u64; 3]; 3];

fn total(c: &Confusion) -> u64 {
    c.iter().flatten().sum()
}

/// Unweighted mean of per-class F1. A class that is never the truth and
/// never predicted scores 0.
pub fn macro_f1(c: &Confusion) -> Result<f64> {
    if total(c) == 0 {
        return invalid("empty confusion matrix");
    }
    let mut sum = 0.0;
    for k in 0..3 {
        let tp = c[k][k] as f64;
        let predicted: u64 = (0..3).map(|r| c[r][k]).sum();
        let actual: u64 = c[k].iter().sum();
        let denom = (predicted + actual) as f64;
        if denom > 0.0 {
            sum += 2.0 * tp / denom;
        }
    }
    Ok(100.0 * sum / 3.0)
}

pub fn accuracy(c: &Confusion) -> Result<f64> {
    let n = total(c);
    if n == 0 {
        return invalid("empty confusion matrix");
    }
    Ok(100.0 * (0..3).map(|k| c[k][k]).sum::<u64>() as f64 / n as f64)
}

pub fn confusion(truth: &[usize], pred: &[usize]) -> Confusion {
    let mut c = [[0; 3]; 3];
    for (&t, &p) in truth.iter().zip(pred) {
        c[t][p] += 1;
    }
    c
}

/// Mean and sample standard deviation (n - 1; 0 for a single value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}
