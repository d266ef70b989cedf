//! Joint characteristic function of `(N_T, lambda_T)`.
//!
//! The intensity system is affine, so
//! `E[exp(i u'N_T + i v'lambda_T)] = exp(i A(T) + i B(T)'lambda_0)` with
//! `(A, B)` solving a Riccati system. The solver integrates the rotated
//! unknowns `At = i A`, `Bt = i B`:
//!
//! ```text
//! Bt_l' = -alpha_l Bt_l + exp(i u_l + sum_j d_jl Bt_j) - 1,   Bt(0) = i v
//! At'   = sum_l alpha_l lambda_inf_l Bt_l,                     At(0) = 0
//! ```

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hawkes::{HawkesParams, IntensityState};
use crate::simulate::Thinning;
use crate::stats::mean_stderr;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CharFnResult {
    /// `A(T)` in the convention `phi = exp(i A + i B'lambda_0)`.
    pub a: Complex64,
    pub b: Vec<Complex64>,
    pub phi: Complex64,
    pub steps: usize,
    pub rejected: usize,
    pub tol: f64,
}

pub fn riccati_solve(params: &HawkesParams, u: &[f64], v: &[f64], horizon: f64) -> Result<CharFnResult> {
    riccati_solve_with_tol(params, u, v, horizon, DEFAULT_TOL)
}

pub fn riccati_solve_with_tol(params: &HawkesParams, u: &[f64], v: &[f64], horizon: f64, tol: f64) -> Result<CharFnResult> {
    let m = params.m();
    if u.len() != m || v.len() != m {
        return Err(Error::Shape(format!("u and v must have {m} entries")));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::param("horizon", "must be finite and >= 0"));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    let alpha = params.alpha();
    let inf = params.lambda_inf();
    let d = params.d();
    let rhs = |y: &[Complex64], dy: &mut [Complex64]| {
        let b = &y[1..];
        dy[0] = (0..m).map(|l| alpha[l] * inf[l] * b[l]).sum();
        for l in 0..m {
            let expo: Complex64 = Complex64::new(0.0, u[l]) + (0..m).map(|j| d[j][l] * b[j]).sum::<Complex64>();
            dy[l + 1] = -alpha[l] * b[l] + (expo.exp() - 1.0);
        }
    };
    let mut y = vec![Complex64::new(0.0, 0.0); m + 1];
    for l in 0..m {
        y[l + 1] = Complex64::new(0.0, v[l]);
    }
    let max_step = alpha.iter().map(|a| 0.1 / a).fold(f64::INFINITY, f64::min);
    let stats = dopri45(rhs, &mut y, horizon, tol, max_step)?;
    let i = Complex64::new(0.0, 1.0);
    let exponent = y[0] + (0..m).map(|l| y[l + 1] * params.lambda0()[l]).sum::<Complex64>();
    Ok(CharFnResult {
        a: -i * y[0],
        b: y[1..].iter().map(|bt| -i * bt).collect(),
        phi: exponent.exp(),
        steps: stats.0,
        rejected: stats.1,
        tol,
    })
}

/// Adaptive Dormand-Prince 5(4) over `[0, horizon]` for complex states.
/// Returns accepted and rejected step counts.
fn dopri45<F>(f: F, y: &mut [Complex64], horizon: f64, tol: f64, max_step: f64) -> Result<(usize, usize)>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let n = y.len();
    let mut k = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    let mut y5 = vec![Complex64::new(0.0, 0.0); n];
    let (mut t, mut h) = (0.0f64, max_step.min(horizon).min(1e-3));
    let (mut accepted, mut rejected) = (0usize, 0usize);
    if horizon == 0.0 {
        return Ok((0, 0));
    }
    f(y, &mut k[0]);
    while t < horizon {
        if t + h > horizon {
            h = horizon - t;
        }
        for s in 1..7 {
            for i in 0..n {
                tmp[i] = y[i] + h * (0..s).map(|q| A[s][q] * k[q][i]).sum::<Complex64>();
            }
            f(&tmp, &mut k[s]);
        }
        let mut err = 0.0f64;
        for i in 0..n {
            y5[i] = y[i] + h * (0..7).map(|s| B5[s] * k[s][i]).sum::<Complex64>();
            let e = h * (0..7).map(|s| (B5[s] - B4[s]) * k[s][i]).sum::<Complex64>();
            let scale = tol + tol * y[i].norm().max(y5[i].norm());
            err = err.max(e.norm() / scale);
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y5);
            // First-same-as-last: the seventh stage is f at the new point.
            let last = k[6].clone();
            k[0] = last;
            accepted += 1;
        } else {
            rejected += 1;
        }
        let factor = if !err.is_finite() {
            0.1
        } else if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(max_step);
        if h < 1e-14 * horizon.max(1.0) && t < horizon {
            return Err(Error::StepSizeUnderflow { t });
        }
    }
    Ok((accepted, rejected))
}

/// Monte Carlo estimate of the characteristic function with componentwise
/// standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McCharFn {
    pub phi: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_paths: usize,
}

impl McCharFn {
    /// `sqrt(se_re^2 + se_im^2)`.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }
}

pub fn charfn_mc(params: &HawkesParams, u: &[f64], v: &[f64], horizon: f64, n_paths: usize, seed: u64) -> Result<McCharFn> {
    let m = params.m();
    if u.len() != m || v.len() != m {
        return Err(Error::Shape(format!("u and v must have {m} entries")));
    }
    if n_paths < 100 {
        return Err(Error::param("paths", "need at least 100 paths"));
    }
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::param("horizon", "must be finite and >= 0"));
    }
    let lam0 = params.lambda0();
    if horizon == 0.0 {
        let x: f64 = v.iter().zip(lam0).map(|(a, b)| a * b).sum();
        return Ok(McCharFn { phi: Complex64::new(0.0, x).exp(), stderr_re: 0.0, stderr_im: 0.0, n_paths });
    }
    let samples: Vec<Complex64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = Thinning::new(params, None, seed, p)?.run(&IntensityState::initial(params), horizon)?;
            let counts = path.counts();
            let x: f64 = (0..m).map(|l| u[l] * counts[l] as f64 + v[l] * path.end.lambda[l]).sum();
            Ok(Complex64::new(0.0, x).exp())
        })
        .collect::<Result<_>>()?;
    let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
    let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
    let (sr, si) = (mean_stderr(&re), mean_stderr(&im));
    Ok(McCharFn { phi: Complex64::new(sr.mean, si.mean), stderr_re: sr.stderr, stderr_im: si.stderr, n_paths })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(alpha: f64, inf: f64, l0: f64, d: f64) -> HawkesParams {
        HawkesParams::new(vec![alpha], vec![inf], vec![l0], vec![vec![d]]).unwrap()
    }

    #[test]
    fn zero_arguments_give_one() {
        let p = scalar(2.0, 1.0, 1.5, 1.0);
        for t in [0.0, 1.0, 7.0] {
            let r = riccati_solve(&p, &[0.0], &[0.0], t).unwrap();
            assert_eq!(r.phi, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn poisson_oracle() {
        let p = scalar(1.3, 2.0, 2.0, 0.0);
        for u in [0.5, 1.0, 2.0] {
            for t in [1.0, 5.0] {
                let r = riccati_solve(&p, &[u], &[0.0], t).unwrap();
                let expect = (2.0 * t * (Complex64::new(0.0, u).exp() - 1.0)).exp();
                assert!((r.phi - expect).norm() < 1e-8, "u={u} t={t}: {} vs {expect}", r.phi);
            }
        }
    }

    #[test]
    fn initial_condition() {
        let p = HawkesParams::new(vec![2.0, 1.0], vec![1.0, 0.5], vec![1.5, 0.7], vec![vec![0.3, 0.1], vec![0.2, 0.4]]).unwrap();
        let r = riccati_solve(&p, &[0.3, -0.2], &[0.4, 0.9], 0.0).unwrap();
        let expect = Complex64::new(0.0, 0.4 * 1.5 + 0.9 * 0.7).exp();
        assert!((r.phi - expect).norm() < 1e-15);
        assert_eq!(r.b, vec![Complex64::new(0.4, 0.0), Complex64::new(0.9, 0.0)]);
    }

    #[test]
    fn hermitian_symmetry() {
        let p = HawkesParams::new(vec![2.0, 1.0], vec![1.0, 0.5], vec![1.5, 0.7], vec![vec![0.3, 0.1], vec![0.2, 0.4]]).unwrap();
        let a = riccati_solve(&p, &[0.7, -0.2], &[0.3, 0.1], 2.0).unwrap();
        let b = riccati_solve(&p, &[-0.7, 0.2], &[-0.3, -0.1], 2.0).unwrap();
        assert!((a.phi - b.phi.conj()).norm() < 1e-10);
    }

    #[test]
    fn modulus_bounded() {
        let p = scalar(2.0, 1.0, 1.0, 1.5);
        for u in [0.3, 1.0, 3.0] {
            let r = riccati_solve(&p, &[u], &[0.0], 4.0).unwrap();
            assert!(r.phi.norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn tolerance_halving() {
        let p = scalar(2.0, 1.0, 1.0, 1.0);
        let a = riccati_solve_with_tol(&p, &[1.0], &[0.5], 3.0, 1e-8).unwrap();
        let b = riccati_solve_with_tol(&p, &[1.0], &[0.5], 3.0, 5e-9).unwrap();
        assert!((a.phi - b.phi).norm() < 10.0 * 1e-8);
    }

    #[test]
    fn mc_trivial_cases() {
        let p = scalar(2.0, 1.0, 1.0, 1.0);
        let z = charfn_mc(&p, &[0.0], &[0.0], 2.0, 200, 1).unwrap();
        assert_eq!(z.phi, Complex64::new(1.0, 0.0));
        assert_eq!(z.stderr(), 0.0);
        let z = charfn_mc(&p, &[1.0], &[0.5], 0.0, 200, 1).unwrap();
        assert_eq!(z.phi, Complex64::new(0.0, 0.5).exp());
    }
}
