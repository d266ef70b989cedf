//! Mutually exciting intensity system.
//!
//! Each class `l` has an intensity that relaxes exponentially toward
//! `lambda_inf[l]` at speed `alpha[l]` and jumps by `d[l][j]` whenever an
//! event of class `j` occurs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of an `m`-class exponential Hawkes system.
///
/// `d` is row-major: `d[l][j]` is the jump of intensity `l` caused by an
/// event of class `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHawkesParams", into = "RawHawkesParams")]
pub struct HawkesParams {
    alpha: Vec<f64>,
    lambda_inf: Vec<f64>,
    lambda0: Vec<f64>,
    d: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawHawkesParams {
    m: usize,
    alpha: Vec<f64>,
    lambda_inf: Vec<f64>,
    lambda0: Vec<f64>,
    d: Vec<Vec<f64>>,
}

impl TryFrom<RawHawkesParams> for HawkesParams {
    type Error = Error;

    fn try_from(raw: RawHawkesParams) -> Result<Self> {
        if raw.alpha.len() != raw.m {
            return Err(Error::param("alpha", format!("expected {} entries, got {}", raw.m, raw.alpha.len())));
        }
        HawkesParams::new(raw.alpha, raw.lambda_inf, raw.lambda0, raw.d)
    }
}

impl From<HawkesParams> for RawHawkesParams {
    fn from(p: HawkesParams) -> Self {
        RawHawkesParams {
            m: p.m(),
            alpha: p.alpha,
            lambda_inf: p.lambda_inf,
            lambda0: p.lambda0,
            d: p.d,
        }
    }
}

/// Outcome of the stability test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    /// `Gamma[l][j] = alpha[j] * delta(l, j) - d[l][j]`.
    pub gamma_matrix: Vec<Vec<f64>>,
    /// Spectral radius of the matrix with entries `d[l][j] / alpha[l]`.
    pub spectral_radius_of_alpha_inv_d: f64,
    pub gamma_nonsingular: bool,
    pub is_stationary: bool,
}

impl HawkesParams {
    /// Validated, stationary parameters.
    pub fn new(alpha: Vec<f64>, lambda_inf: Vec<f64>, lambda0: Vec<f64>, d: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self::new_unchecked_stability(alpha, lambda_inf, lambda0, d)?;
        let report = p.check_stationarity();
        if !report.is_stationary {
            return Err(Error::NotStationary {
                spectral_radius: report.spectral_radius_of_alpha_inv_d,
            });
        }
        Ok(p)
    }

    /// Structurally valid parameters that may be explosive. Simulation and
    /// likelihood evaluation accept these; moment computations do not.
    pub fn new_unchecked_stability(
        alpha: Vec<f64>,
        lambda_inf: Vec<f64>,
        lambda0: Vec<f64>,
        d: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let m = alpha.len();
        if m == 0 {
            return Err(Error::param("m", "need at least one class"));
        }
        check_len("lambda_inf", &lambda_inf, m)?;
        check_len("lambda0", &lambda0, m)?;
        if d.len() != m {
            return Err(Error::param("d", format!("expected {m} rows, got {}", d.len())));
        }
        for (l, a) in alpha.iter().enumerate() {
            if !(a.is_finite() && *a > 0.0) {
                return Err(Error::param(format!("alpha[{l}]"), "must be finite and > 0"));
            }
        }
        for (l, v) in lambda_inf.iter().enumerate() {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::param(format!("lambda_inf[{l}]"), "must be finite and >= 0"));
            }
        }
        for (l, v) in lambda0.iter().enumerate() {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::param(format!("lambda0[{l}]"), "must be finite and > 0"));
            }
        }
        for (l, row) in d.iter().enumerate() {
            if row.len() != m {
                return Err(Error::param(format!("d[{l}]"), format!("expected {m} columns, got {}", row.len())));
            }
            for (j, v) in row.iter().enumerate() {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(Error::param(format!("d[{l}][{j}]"), "must be finite and >= 0"));
                }
            }
        }
        Ok(Self { alpha, lambda_inf, lambda0, d })
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn lambda_inf(&self) -> &[f64] {
        &self.lambda_inf
    }

    pub fn lambda0(&self) -> &[f64] {
        &self.lambda0
    }

    /// Row-major excitation matrix.
    pub fn d(&self) -> &[Vec<f64>] {
        &self.d
    }

    /// Column `j` of `d`: the intensity jump vector caused by a class-`j` event.
    pub fn d_column(&self, j: usize) -> Vec<f64> {
        self.d.iter().map(|row| row[j]).collect()
    }

    /// Same system started from a different initial intensity.
    pub fn with_lambda0(&self, lambda0: Vec<f64>) -> Result<Self> {
        Self::new_unchecked_stability(self.alpha.clone(), self.lambda_inf.clone(), lambda0, self.d.clone())
    }

    pub fn gamma_matrix(&self) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_fn(m, m, |l, j| if l == j { self.alpha[j] } else { 0.0 } - self.d[l][j])
    }

    pub fn check_stationarity(&self) -> StationarityReport {
        let m = self.m();
        let scaled = DMatrix::from_fn(m, m, |l, j| self.d[l][j] / self.alpha[l]);
        let rho = spectral_radius(&scaled);
        let gamma = self.gamma_matrix();
        let gamma_nonsingular = gamma.clone().lu().determinant().abs() > 1e-300 && gamma.clone().try_inverse().is_some();
        StationarityReport {
            gamma_matrix: (0..m).map(|l| (0..m).map(|j| gamma[(l, j)]).collect()).collect(),
            spectral_radius_of_alpha_inv_d: rho,
            gamma_nonsingular,
            is_stationary: rho < 1.0 && gamma_nonsingular,
        }
    }

    /// Steady state of the mean intensity: solves `Gamma x = diag(alpha) lambda_inf`.
    ///
    /// The first-order expansion `sum_j (delta_lj - d_lj / alpha_l) lambda_inf_j`
    /// agrees with this only to first order in `d`; the linear solve is exact.
    pub fn stationary_mean(&self) -> Result<Vec<f64>> {
        let report = self.check_stationarity();
        if !report.is_stationary {
            return Err(Error::NotStationary {
                spectral_radius: report.spectral_radius_of_alpha_inv_d,
            });
        }
        let rhs = DVector::from_iterator(self.m(), self.alpha.iter().zip(&self.lambda_inf).map(|(a, l)| a * l));
        let sol = self
            .gamma_matrix()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular Gamma matrix".into()))?;
        Ok(sol.iter().copied().collect())
    }

    /// Applies the Markov generator of `(N, lambda)` to `g` at `(counts, lambda)`.
    ///
    /// Uses the analytic gradient when `g` provides one, otherwise central
    /// differences with step `max(1e-6, 1e-6 |lambda_l|)`.
    pub fn generator_apply<G: StateFunction + ?Sized>(&self, g: &G, counts: &[u64], lambda: &[f64]) -> f64 {
        let m = self.m();
        let base = g.value(counts, lambda);
        let grad = g.lambda_gradient(counts, lambda).unwrap_or_else(|| {
            let mut probe = lambda.to_vec();
            (0..m)
                .map(|l| {
                    let h = (1e-6 * lambda[l].abs()).max(1e-6);
                    probe[l] = lambda[l] + h;
                    let up = g.value(counts, &probe);
                    probe[l] = lambda[l] - h;
                    let down = g.value(counts, &probe);
                    probe[l] = lambda[l];
                    (up - down) / (2.0 * h)
                })
                .collect()
        });
        let mut total = 0.0;
        let mut shifted_counts = counts.to_vec();
        let mut shifted_lambda = lambda.to_vec();
        for l in 0..m {
            shifted_counts[l] += 1;
            for (i, s) in shifted_lambda.iter_mut().enumerate() {
                *s = lambda[i] + self.d[i][l];
            }
            let jump = g.value(&shifted_counts, &shifted_lambda) - base;
            shifted_counts[l] -= 1;
            total += self.alpha[l] * (self.lambda_inf[l] - lambda[l]) * grad[l] + lambda[l] * jump;
        }
        total
    }
}

fn check_len(field: &str, v: &[f64], m: usize) -> Result<()> {
    if v.len() != m {
        return Err(Error::param(field, format!("expected {m} entries, got {}", v.len())));
    }
    Ok(())
}

fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].abs();
    }
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// A function of the counts and intensities, the domain of the generator.
pub trait StateFunction {
    fn value(&self, counts: &[u64], lambda: &[f64]) -> f64;

    /// Gradient with respect to `lambda`, if known in closed form.
    fn lambda_gradient(&self, _counts: &[u64], _lambda: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl<F: Fn(&[u64], &[f64]) -> f64> StateFunction for F {
    fn value(&self, counts: &[u64], lambda: &[f64]) -> f64 {
        self(counts, lambda)
    }
}

/// Point of the `(N, lambda)` Markov process.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityState {
    pub t: f64,
    pub lambda: Vec<f64>,
    pub counts: Vec<u64>,
}

impl IntensityState {
    pub fn initial(params: &HawkesParams) -> Self {
        Self::at(params.lambda0().to_vec())
    }

    /// State at time zero with zero counts and the given intensity.
    pub fn at(lambda: Vec<f64>) -> Self {
        let m = lambda.len();
        Self { t: 0.0, lambda, counts: vec![0; m] }
    }

    /// Relaxation toward `lambda_inf` over `dt` with no events.
    pub fn decay(&self, dt: f64, params: &HawkesParams) -> Self {
        let mut next = self.clone();
        next.decay_in_place(dt, params);
        next
    }

    pub fn decay_in_place(&mut self, dt: f64, params: &HawkesParams) {
        debug_assert!(dt >= 0.0);
        if dt == 0.0 {
            return;
        }
        for ((lam, a), inf) in self.lambda.iter_mut().zip(params.alpha()).zip(params.lambda_inf()) {
            *lam = inf + (*lam - inf) * (-a * dt).exp();
        }
        self.t += dt;
    }

    /// An event of class `j`: every intensity `l` rises by `d[l][j]`.
    pub fn excite(&self, j: usize, params: &HawkesParams) -> Self {
        let mut next = self.clone();
        next.excite_in_place(j, params);
        next
    }

    pub fn excite_in_place(&mut self, j: usize, params: &HawkesParams) {
        for (l, lam) in self.lambda.iter_mut().enumerate() {
            *lam += params.d()[l][j];
        }
        self.counts[j] += 1;
    }

    pub fn total_intensity(&self) -> f64 {
        self.lambda.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(alpha: f64, inf: f64, l0: f64, d: f64) -> HawkesParams {
        HawkesParams::new_unchecked_stability(vec![alpha], vec![inf], vec![l0], vec![vec![d]]).unwrap()
    }

    #[test]
    fn scalar_stationarity() {
        let r = scalar(2.0, 1.0, 1.0, 1.0).check_stationarity();
        assert_eq!(r.spectral_radius_of_alpha_inv_d, 0.5);
        assert!(r.is_stationary);
        let r = scalar(1.0, 1.0, 1.0, 1.0).check_stationarity();
        assert_eq!(r.spectral_radius_of_alpha_inv_d, 1.0);
        assert!(!r.is_stationary);
        assert!(!r.gamma_nonsingular);
    }

    #[test]
    fn symmetric_two_class_radius() {
        let p = HawkesParams::new(vec![2.0, 2.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]])
            .unwrap();
        // Oracle: 2x2 characteristic polynomial of [[a, b], [c, e]].
        let (a, b, c, e) = (0.25, 0.25, 0.25, 0.25);
        let tr: f64 = a + e;
        let det = a * e - b * c;
        let disc: f64 = tr * tr - 4.0 * det;
        let oracle = ((tr + disc.sqrt()) / 2.0).abs().max(((tr - disc.sqrt()) / 2.0).abs());
        let r = p.check_stationarity().spectral_radius_of_alpha_inv_d;
        assert!((r - oracle).abs() < 1e-12);
        assert!((r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_signs_and_explosive_systems() {
        assert!(HawkesParams::new(vec![-1.0], vec![1.0], vec![1.0], vec![vec![0.0]]).is_err());
        assert!(HawkesParams::new(vec![1.0], vec![-1.0], vec![1.0], vec![vec![0.0]]).is_err());
        assert!(HawkesParams::new(vec![1.0], vec![1.0], vec![0.0], vec![vec![0.0]]).is_err());
        assert!(HawkesParams::new(vec![1.0], vec![1.0], vec![1.0], vec![vec![-0.1]]).is_err());
        assert!(matches!(
            HawkesParams::new(vec![1.0], vec![1.0], vec![1.0], vec![vec![1.5]]),
            Err(Error::NotStationary { .. })
        ));
        let err = HawkesParams::new(vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![vec![0.0, 0.0], vec![0.0]])
            .unwrap_err();
        assert!(err.to_string().starts_with("d[1]"));
    }

    #[test]
    fn decay_examples() {
        let p = scalar(2.0, 1.0, 3.0, 0.0);
        let s = IntensityState::initial(&p);
        assert_eq!(s.decay(0.0, &p), s);
        let fixed = IntensityState::at(vec![1.0]);
        assert_eq!(fixed.decay(5.0, &p).lambda, vec![1.0]);
        let out = s.decay(std::f64::consts::LN_2 / 2.0, &p);
        assert!((out.lambda[0] - 2.0).abs() < 1e-14);
        // Oracle: classical RK4 on d(lambda)/dt = alpha (inf - lambda).
        let (mut y, n) = (3.0f64, 2000);
        let h = std::f64::consts::LN_2 / 2.0 / n as f64;
        let f = |y: f64| 2.0 * (1.0 - y);
        for _ in 0..n {
            let k1 = f(y);
            let k2 = f(y + h * k1 / 2.0);
            let k3 = f(y + h * k2 / 2.0);
            let k4 = f(y + h * k3);
            y += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        assert!((out.lambda[0] - y).abs() < 1e-12);
    }

    #[test]
    fn excite_reads_column() {
        let p = HawkesParams::new_unchecked_stability(
            vec![10.0, 10.0],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        )
        .unwrap();
        let s = IntensityState::initial(&p).excite(1, &p);
        assert_eq!(s.lambda, vec![3.0, 5.0]);
        assert_eq!(s.counts, vec![0, 1]);
        let a = IntensityState::initial(&p).excite(0, &p).excite(0, &p).excite(1, &p);
        let b = IntensityState::initial(&p).excite(1, &p).excite(0, &p).excite(0, &p);
        assert_eq!(a, b);
        let zero = scalar(1.0, 1.0, 1.0, 0.0);
        let z = IntensityState::initial(&zero).excite(0, &zero);
        assert_eq!(z.lambda, vec![1.0]);
        assert_eq!(z.counts, vec![1]);
    }

    #[test]
    fn stationary_mean_examples() {
        let p = HawkesParams::new(vec![2.0], vec![1.0], vec![1.0], vec![vec![0.0]]).unwrap();
        assert_eq!(p.stationary_mean().unwrap(), vec![1.0]);
        let p = HawkesParams::new(vec![2.0], vec![1.0], vec![1.0], vec![vec![1.0]]).unwrap();
        assert!((p.stationary_mean().unwrap()[0] - 2.0).abs() < 1e-14);
        let p = HawkesParams::new(vec![2.0, 2.0], vec![1.0, 1.0], vec![1.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]])
            .unwrap();
        // Oracle: Cramer's rule on [[1.5, -0.5], [-0.5, 1.5]] x = [2, 2].
        let det = 1.5 * 1.5 - 0.25;
        let x = (2.0 * 1.5 + 0.5 * 2.0) / det;
        for v in p.stationary_mean().unwrap() {
            assert!((v - x).abs() < 1e-12);
            assert!((v - 2.0).abs() < 1e-12);
        }
        let bad = scalar(1.0, 1.0, 1.0, 1.0);
        assert!(bad.stationary_mean().is_err());
    }

    #[test]
    fn generator_examples() {
        let p = scalar(2.0, 1.0, 1.0, 0.7);
        let lam = [1.9];
        assert_eq!(p.generator_apply(&|_: &[u64], _: &[f64]| 3.0, &[0], &lam), 0.0);
        let g = |_: &[u64], l: &[f64]| l[0];
        let expect = 2.0 * (1.0 - 1.9) + 1.9 * 0.7;
        assert!((p.generator_apply(&g, &[0], &lam) - expect).abs() < 1e-9);
        let n = |c: &[u64], _: &[f64]| c[0] as f64;
        assert!((p.generator_apply(&n, &[4], &lam) - 1.9).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_uses_documented_keys() {
        let p = HawkesParams::new(vec![2.0, 3.0], vec![1.0, 0.5], vec![1.5, 0.7], vec![vec![0.5, 0.2], vec![0.1, 0.4]])
            .unwrap();
        let v = serde_json::to_value(&p).unwrap();
        for key in ["m", "alpha", "lambda_inf", "lambda0", "d"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: HawkesParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}
