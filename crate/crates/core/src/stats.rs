//! Deterministic ensemble reductions.

use serde::Serialize;

/// Mean and standard error of the mean of a sample, summed in index order
/// with Neumaier compensation so the result does not depend on how the
/// sample was produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let n = values.len();
    if n == 0 {
        return MeanStderr { mean: f64::NAN, stderr: f64::NAN, n };
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let var = if n > 1 {
        compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64
    } else {
        0.0
    };
    MeanStderr { mean, stderr: (var / n as f64).sqrt(), n }
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64
}
