//! Jump detection in return series and intensity filtering.
//!
//! Returns are scanned for large negative moves against a trailing
//! volatility estimate; the resulting event times drive the exponential
//! decay recursion of the intensity system. Parameters can be taken as
//! given or fitted by maximum likelihood.

mod io;
mod mle;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hawkes::HawkesParams;

pub use io::{read_returns_csv, write_trajectory_csv, ReturnSeries, TimeAxis};
pub use mle::{calibrate_mle, log_likelihood, poisson_log_likelihood, Calibration, MleBounds, MleOptions};

/// Event times per class, in year fractions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventStream {
    pub times: Vec<Vec<f64>>,
    /// Standardised return of each event (return over trailing volatility).
    pub marks: Option<Vec<Vec<f64>>>,
    /// Observation window `[start, end]`.
    pub start: f64,
    pub end: f64,
}

impl EventStream {
    pub fn new(times: Vec<Vec<f64>>, marks: Option<Vec<Vec<f64>>>, start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(Error::Data(format!("bad observation window [{start}, {end}]")));
        }
        for (l, ts) in times.iter().enumerate() {
            if ts.iter().any(|t| !t.is_finite() || *t < start || *t > end) {
                return Err(Error::Data(format!("class {}: event outside [{start}, {end}]", l + 1)));
            }
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Data(format!("class {}: event times must be strictly increasing", l + 1)));
            }
        }
        if let Some(mk) = &marks {
            if mk.len() != times.len() || mk.iter().zip(&times).any(|(a, b)| a.len() != b.len()) {
                return Err(Error::Shape("marks must match event times".into()));
            }
        }
        Ok(Self { times, marks, start, end })
    }

    pub fn m(&self) -> usize {
        self.times.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        self.times.iter().map(Vec::len).collect()
    }

    /// All events as `(time, class)`, sorted by time then class.
    pub fn merged(&self) -> Vec<(f64, usize)> {
        let mut all: Vec<(f64, usize)> = self.times.iter().enumerate().flat_map(|(l, ts)| ts.iter().map(move |&t| (t, l))).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }
}

/// Flags observations whose return falls below `-threshold` times the
/// sample standard deviation of the preceding `window` returns. With
/// `negative_only` false, large positive moves count as well. Each column is
/// one class.
pub fn detect_jumps(series: &ReturnSeries, window: usize, threshold: f64, negative_only: bool) -> Result<EventStream> {
    if window < 20 {
        return Err(Error::param("window", "must be at least 20"));
    }
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::param("threshold", "must be finite and > 0"));
    }
    let n = series.times.len();
    if n <= window {
        return Err(Error::Data(format!("series has {n} observations, window needs more than {window}")));
    }
    let mut times = Vec::with_capacity(series.returns.len());
    let mut marks = Vec::with_capacity(series.returns.len());
    for (c, col) in series.returns.iter().enumerate() {
        if let Some(i) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("column {}: non-finite return at row {}", series.names[c], i + 1)));
        }
        let (mut ts, mut ms) = (Vec::new(), Vec::new());
        for i in window..n {
            let past = &col[i - window..i];
            let mean = past.iter().sum::<f64>() / window as f64;
            let var = past.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (window - 1) as f64;
            let sd = var.sqrt();
            let scale = past.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if sd <= 1e-12 * scale || sd == 0.0 {
                continue;
            }
            let z = col[i] / sd;
            if z < -threshold || (!negative_only && z > threshold) {
                ts.push(series.times[i]);
                ms.push(z);
            }
        }
        times.push(ts);
        marks.push(ms);
    }
    EventStream::new(times, Some(marks), series.times[0], series.times[n - 1])
}

/// Filtered intensities on a time grid plus every event time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntensityTrajectory {
    pub times: Vec<f64>,
    /// Right-continuous values `lambda(t+)`.
    pub lambda: Vec<Vec<f64>>,
    /// Left limits `lambda(t-)`; equal to `lambda` away from events.
    pub lambda_left: Vec<Vec<f64>>,
    /// Number of events per class at each row's time.
    pub events: Vec<Vec<u32>>,
}

/// Runs the decay-and-excite recursion from `params.lambda0()` at
/// `events.start`, recording rows every `dt` and at each event time.
pub fn filter_intensity(events: &EventStream, params: &HawkesParams, dt: f64) -> Result<IntensityTrajectory> {
    if events.m() != params.m() {
        return Err(Error::Shape(format!("events have {} classes, parameters {}", events.m(), params.m())));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", "must be finite and > 0"));
    }
    let m = params.m();
    let merged = events.merged();
    let n_grid = ((events.end - events.start) / dt).floor() as usize;
    let mut out = IntensityTrajectory { times: vec![], lambda: vec![], lambda_left: vec![], events: vec![] };
    let mut lam = params.lambda0().to_vec();
    let mut t = events.start;
    let decay = |lam: &mut [f64], from: f64, to: f64| {
        for l in 0..m {
            let inf = params.lambda_inf()[l];
            lam[l] = inf + (lam[l] - inf) * (-params.alpha()[l] * (to - from)).exp();
        }
    };
    let mut k = 0;
    let mut g = 0;
    while g <= n_grid || k < merged.len() {
        let tg = if g <= n_grid { events.start + g as f64 * dt } else { f64::INFINITY };
        let te = merged.get(k).map_or(f64::INFINITY, |e| e.0);
        let next = tg.min(te);
        decay(&mut lam, t, next);
        t = next;
        let left = lam.clone();
        let mut hits = vec![0u32; m];
        while k < merged.len() && merged[k].0 == next {
            hits[merged[k].1] += 1;
            k += 1;
        }
        for (j, &h) in hits.iter().enumerate() {
            for l in 0..m {
                lam[l] += h as f64 * params.d()[l][j];
            }
        }
        if tg == next {
            g += 1;
        }
        out.times.push(t);
        out.lambda.push(lam.clone());
        out.lambda_left.push(left);
        out.events.push(hits);
    }
    Ok(out)
}

/// Intensity at `t` from the integrated form, summing over every earlier
/// event directly. With `left`, events at exactly `t` are excluded.
pub fn intensity_direct(events: &EventStream, params: &HawkesParams, t: f64, left: bool) -> Vec<f64> {
    let s = t - events.start;
    (0..params.m())
        .map(|l| {
            let a = params.alpha()[l];
            let mut v = (-a * s).exp() * params.lambda0()[l] - (-a * s).exp_m1() * params.lambda_inf()[l];
            for (j, ts) in events.times.iter().enumerate() {
                for &u in ts {
                    if u < t || (!left && u == t) {
                        v += params.d()[l][j] * (-a * (t - u)).exp();
                    }
                }
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(col: Vec<f64>) -> ReturnSeries {
        let n = col.len();
        ReturnSeries { times: (0..n).map(|i| i as f64 / 252.0).collect(), names: vec!["a".into()], returns: vec![col] }
    }

    #[test]
    fn constant_series_has_no_events() {
        let ev = detect_jumps(&series(vec![-0.01; 300]), 60, 3.0, true).unwrap();
        assert!(ev.times[0].is_empty());
    }

    #[test]
    fn injected_spike_is_the_only_event() {
        let mut col: Vec<f64> = (0..300).map(|i| if i % 2 == 0 { 0.01 } else { -0.01 }).collect();
        col[200] = -0.1;
        let ev = detect_jumps(&series(col), 60, 3.0, true).unwrap();
        assert_eq!(ev.times[0], vec![200.0 / 252.0]);
    }

    #[test]
    fn short_series_is_rejected() {
        assert!(detect_jumps(&series(vec![0.0; 30]), 60, 3.0, true).is_err());
        assert!(detect_jumps(&series(vec![0.0; 300]), 10, 3.0, true).is_err());
    }

    #[test]
    fn single_event_example() {
        let p = HawkesParams::new_unchecked_stability(vec![2.0], vec![1.0], vec![1.0], vec![vec![3.0]]).unwrap();
        let ev = EventStream::new(vec![vec![1.0]], None, 0.0, 3.0).unwrap();
        let tr = filter_intensity(&ev, &p, 0.5).unwrap();
        let i1 = tr.times.iter().position(|&t| t == 1.0).unwrap();
        assert_eq!(tr.lambda[i1][0], 4.0);
        assert_eq!(tr.lambda_left[i1][0], 1.0);
        assert_eq!(tr.events[i1], vec![1]);
        let i2 = tr.times.iter().position(|&t| t == 2.0).unwrap();
        assert!((tr.lambda[i2][0] - (1.0 + 3.0 * (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn no_events_relaxes() {
        let p = HawkesParams::new(vec![1.5], vec![1.0], vec![3.0], vec![vec![0.5]]).unwrap();
        let ev = EventStream::new(vec![vec![]], None, 0.0, 2.0).unwrap();
        let tr = filter_intensity(&ev, &p, 0.25).unwrap();
        for (t, l) in tr.times.iter().zip(&tr.lambda) {
            assert!((l[0] - (1.0 + 2.0 * (-1.5 * t).exp())).abs() < 1e-14);
        }
    }

    #[test]
    fn stream_validation() {
        assert!(EventStream::new(vec![vec![1.0, 1.0]], None, 0.0, 2.0).is_err());
        assert!(EventStream::new(vec![vec![3.0]], None, 0.0, 2.0).is_err());
    }
}
