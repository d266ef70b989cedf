//! Block-structured market: covariance, its spectral form, jump scalings and
//! expected excess returns.
//!
//! Assets are grouped in `m` classes of `k` assets each (`n = m k`). Within a
//! class the covariance is equicorrelated, across classes it is zero, so
//! `Sigma = sum_l kappa1_l Pbar_l + kappa2_l Pperp_l` with
//! `Pbar_l = 1_l 1_l' / k` and `Pperp_l = M_l - Pbar_l`. Every solver-side
//! application of `Sigma`, its inverse or its square root goes through that
//! form and costs `O(n)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::JumpLaw;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarketParams", into = "RawMarketParams")]
pub struct MarketParams {
    r: f64,
    m: usize,
    k: usize,
    upsilon: Vec<f64>,
    rho: Vec<f64>,
    rbar: Vec<f64>,
    rperp: Vec<f64>,
    j: Vec<f64>,
    laws: Vec<JumpLaw>,
}

#[derive(Serialize, Deserialize)]
struct RawMarketParams {
    r: f64,
    m: usize,
    k: usize,
    upsilon: Vec<f64>,
    rho: Vec<f64>,
    #[serde(rename = "Rbar")]
    rbar: Vec<f64>,
    #[serde(rename = "Rperp")]
    rperp: Vec<f64>,
    j: Vec<f64>,
    laws: Vec<JumpLaw>,
}

impl TryFrom<RawMarketParams> for MarketParams {
    type Error = Error;

    fn try_from(raw: RawMarketParams) -> Result<Self> {
        MarketParams::new(raw.r, raw.m, raw.k, raw.upsilon, raw.rho, raw.rbar, raw.rperp, raw.j, raw.laws)
    }
}

impl From<MarketParams> for RawMarketParams {
    fn from(p: MarketParams) -> Self {
        RawMarketParams {
            r: p.r,
            m: p.m,
            k: p.k,
            upsilon: p.upsilon,
            rho: p.rho,
            rbar: p.rbar,
            rperp: p.rperp,
            j: p.j,
            laws: p.laws,
        }
    }
}

/// Eigenvalues of the block covariance. `kappa1[l]` has eigenvector `1_l`
/// (multiplicity one), `kappa2[l]` spans the rest of block `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectral {
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
}

/// Dense projector pair of one class, mostly for inspection and checks.
#[derive(Debug, Clone)]
pub struct ClassProjectors {
    pub pbar: DMatrix<f64>,
    pub pperp: DMatrix<f64>,
}

/// Class-mean and orthogonal parts of a return vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnDecomposition {
    pub rbar: Vec<f64>,
    pub rperp: Vec<f64>,
}

impl MarketParams {
    /// Validates and normalises a market. Jump scalings are stored
    /// non-positive with marks in `[0, 1]`; a class written as positive
    /// scaling with non-positive marks is flipped.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        r: f64,
        m: usize,
        k: usize,
        upsilon: Vec<f64>,
        rho: Vec<f64>,
        rbar: Vec<f64>,
        rperp: Vec<f64>,
        mut j: Vec<f64>,
        mut laws: Vec<JumpLaw>,
    ) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::param("r", "must be finite and >= 0"));
        }
        if m == 0 {
            return Err(Error::param("m", "must be >= 1"));
        }
        if k == 0 {
            return Err(Error::param("k", "must be >= 1"));
        }
        let n = m * k;
        let lens = [("upsilon", upsilon.len()), ("rho", rho.len()), ("Rbar", rbar.len()), ("j", j.len()), ("laws", laws.len())];
        for (name, len) in lens {
            if len != m {
                return Err(Error::param(name, format!("expected {m} entries, got {len}")));
            }
        }
        if rperp.len() != n {
            return Err(Error::param("Rperp", format!("expected {n} entries, got {}", rperp.len())));
        }
        for l in 0..m {
            if !(upsilon[l].is_finite() && upsilon[l] > 0.0) {
                return Err(Error::param(format!("upsilon[{l}]"), "must be finite and > 0"));
            }
            let lower = if k > 1 { -1.0 / (k as f64 - 1.0) } else { f64::NEG_INFINITY };
            if !(rho[l].is_finite() && rho[l] > lower && rho[l] < 1.0) {
                return Err(Error::param(
                    format!("rho[{l}]"),
                    format!("must lie in the open interval ({lower}, 1) for k = {k}"),
                ));
            }
            if !rbar[l].is_finite() {
                return Err(Error::param(format!("Rbar[{l}]"), "must be finite"));
            }
            let block = &rperp[l * k..(l + 1) * k];
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("Rperp[{}..{}]", l * k, (l + 1) * k), "must be finite"));
            }
            let sum: f64 = block.iter().sum();
            let scale: f64 = block.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            if sum.abs() > 1e-12 * scale {
                return Err(Error::param(
                    format!("Rperp[{}..{}]", l * k, (l + 1) * k),
                    format!("each class block must sum to zero, got {sum}"),
                ));
            }
            if !(j[l].is_finite() && j[l].abs() <= 1.0) {
                return Err(Error::param(format!("j[{l}]"), "must lie in [-1, 1]"));
            }
            let field = format!("laws[{l}]");
            laws[l].validate(&field)?;
            let atoms = laws[l].atoms();
            let any_pos = atoms.iter().any(|(z, _)| *z > 0.0);
            let any_neg = atoms.iter().any(|(z, _)| *z < 0.0);
            if any_pos && any_neg {
                return Err(Error::param(field, "marks of mixed sign would produce upward jumps"));
            }
            // Canonical form: j <= 0, marks >= 0.
            if any_neg {
                laws[l] = laws[l].negated();
                j[l] = -j[l];
            }
            if j[l] > 0.0 && any_pos {
                return Err(Error::param(
                    format!("j[{l}]"),
                    "positive scaling with positive marks would produce upward jumps",
                ));
            }
            if j[l] > 0.0 {
                j[l] = -j[l];
            }
            if j[l] == 0.0 {
                j[l] = 0.0;
            }
        }
        Ok(Self { r, m, k, upsilon, rho, rbar, rperp, j, laws })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn n(&self) -> usize {
        self.m * self.k
    }
    pub fn upsilon(&self) -> &[f64] {
        &self.upsilon
    }
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }
    pub fn rbar(&self) -> &[f64] {
        &self.rbar
    }
    pub fn rperp(&self) -> &[f64] {
        &self.rperp
    }
    /// Class jump scalings, all in `[-1, 0]`.
    pub fn j(&self) -> &[f64] {
        &self.j
    }
    pub fn laws(&self) -> &[JumpLaw] {
        &self.laws
    }

    pub fn with_laws(&self, laws: Vec<JumpLaw>) -> Result<Self> {
        Self::new(self.r, self.m, self.k, self.upsilon.clone(), self.rho.clone(), self.rbar.clone(), self.rperp.clone(), self.j.clone(), laws)
    }

    pub fn with_j(&self, j: Vec<f64>) -> Result<Self> {
        Self::new(self.r, self.m, self.k, self.upsilon.clone(), self.rho.clone(), self.rbar.clone(), self.rperp.clone(), j, self.laws.clone())
    }

    pub fn with_rbar(&self, rbar: Vec<f64>) -> Result<Self> {
        Self::new(self.r, self.m, self.k, self.upsilon.clone(), self.rho.clone(), rbar, self.rperp.clone(), self.j.clone(), self.laws.clone())
    }

    pub fn spectral(&self) -> Spectral {
        let k = self.k as f64;
        Spectral {
            kappa1: (0..self.m).map(|l| self.upsilon[l].powi(2) * (1.0 + (k - 1.0) * self.rho[l])).collect(),
            kappa2: (0..self.m).map(|l| self.upsilon[l].powi(2) * (1.0 - self.rho[l])).collect(),
        }
    }

    /// Dense `n x n` covariance.
    pub fn build_sigma(&self) -> DMatrix<f64> {
        let (k, n) = (self.k, self.n());
        DMatrix::from_fn(n, n, |a, b| {
            let (la, lb) = (a / k, b / k);
            if la != lb {
                0.0
            } else if a == b {
                self.upsilon[la].powi(2)
            } else {
                self.upsilon[la].powi(2) * self.rho[la]
            }
        })
    }

    pub fn projectors(&self) -> Vec<ClassProjectors> {
        let (k, n) = (self.k, self.n());
        (0..self.m)
            .map(|l| {
                let inside = |a: usize| a / k == l;
                let pbar = DMatrix::from_fn(n, n, |a, b| if inside(a) && inside(b) { 1.0 / k as f64 } else { 0.0 });
                let mblock = DMatrix::from_fn(n, n, |a, b| if a == b && inside(a) { 1.0 } else { 0.0 });
                ClassProjectors { pperp: &mblock - &pbar, pbar }
            })
            .collect()
    }

    /// `sum_l (a_l Pbar_l + b_l Pperp_l) v`, the common shape of every spectral operator.
    fn spectral_apply(&self, v: &[f64], a: impl Fn(usize) -> f64, b: impl Fn(usize) -> f64) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; self.n()];
        for l in 0..self.m {
            let block = &v[l * k..(l + 1) * k];
            let mean = block.iter().sum::<f64>() / k as f64;
            let (al, bl) = (a(l), b(l));
            for (o, x) in out[l * k..(l + 1) * k].iter_mut().zip(block) {
                *o = al * mean + if k > 1 { bl * (x - mean) } else { 0.0 };
            }
        }
        out
    }

    pub fn sigma_apply(&self, v: &[f64]) -> Vec<f64> {
        let s = self.spectral();
        self.spectral_apply(v, |l| s.kappa1[l], |l| s.kappa2[l])
    }

    pub fn sigma_inv_apply(&self, v: &[f64]) -> Vec<f64> {
        let s = self.spectral();
        self.spectral_apply(v, |l| 1.0 / s.kappa1[l], |l| 1.0 / s.kappa2[l])
    }

    /// Symmetric square root of `Sigma` applied to `v`.
    pub fn sigma_sqrt_apply(&self, v: &[f64]) -> Vec<f64> {
        let s = self.spectral();
        self.spectral_apply(v, |l| s.kappa1[l].sqrt(), |l| s.kappa2[l].sqrt())
    }

    pub fn quad_form(&self, w: &[f64]) -> f64 {
        self.sigma_apply(w).iter().zip(w).map(|(a, b)| a * b).sum()
    }

    /// Indicator vector `1_l`.
    pub fn ones_block(&self, l: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n()];
        v[l * self.k..(l + 1) * self.k].iter_mut().for_each(|x| *x = 1.0);
        v
    }

    /// `n x m` jump scaling matrix with column `l` equal to `j_l 1_l`.
    pub fn jump_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.m, |i, l| if i / self.k == l { self.j[l] } else { 0.0 })
    }

    /// `(w' J)_l` for every class.
    pub fn jump_exposure(&self, w: &[f64]) -> Vec<f64> {
        let k = self.k;
        (0..self.m).map(|l| self.j[l] * w[l * k..(l + 1) * k].iter().sum::<f64>()).collect()
    }

    /// Full expected excess return vector `sum_l Rbar_l 1_l + Rperp`.
    pub fn excess_returns(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.rbar[i / self.k] + self.rperp[i]).collect()
    }
}

/// Splits `r` into class means and the within-class residual.
pub fn decompose_returns(r: &[f64], k: usize, m: usize) -> Result<ReturnDecomposition> {
    if k == 0 || m == 0 || r.len() != k * m {
        return Err(Error::Shape(format!("return vector of length {} does not match k = {k}, m = {m}", r.len())));
    }
    let rbar: Vec<f64> = r.chunks(k).map(|b| b.iter().sum::<f64>() / k as f64).collect();
    let rperp = r.iter().enumerate().map(|(i, v)| v - rbar[i / k]).collect();
    Ok(ReturnDecomposition { rbar, rperp })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(k: usize, m: usize, upsilon: f64, rho: f64) -> MarketParams {
        MarketParams::new(
            0.02,
            m,
            k,
            vec![upsilon; m],
            vec![rho; m],
            vec![0.05; m],
            vec![0.0; m * k],
            vec![-0.5; m],
            vec![JumpLaw::Deterministic { zbar: 0.2 }; m],
        )
        .unwrap()
    }

    #[test]
    fn sigma_examples() {
        let s = MarketParams::new(0.0, 2, 1, vec![0.2, 0.3], vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], vec![JumpLaw::Deterministic { zbar: 0.1 }; 2])
            .unwrap()
            .build_sigma();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.04000000000000001, 0.0, 0.0, 0.09]));
        let s = market(2, 1, 1.0, 0.5).build_sigma();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
    }

    #[test]
    fn k3_eigenvalues_against_eigensolver() {
        let mk = market(3, 1, 2.0, -0.4);
        let sp = mk.spectral();
        assert!((sp.kappa1[0] - 0.8).abs() < 1e-12);
        assert!((sp.kappa2[0] - 5.6).abs() < 1e-12);
        let mut eig: Vec<f64> = mk.build_sigma().symmetric_eigen().eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[0] - 0.8).abs() < 1e-12);
        assert!((eig[1] - 5.6).abs() < 1e-12 && (eig[2] - 5.6).abs() < 1e-12);
    }

    #[test]
    fn boundary_correlations_rejected() {
        let mk = |rho: f64| {
            MarketParams::new(0.0, 1, 3, vec![1.0], vec![rho], vec![0.0], vec![0.0; 3], vec![0.0], vec![JumpLaw::Deterministic { zbar: 0.1 }])
        };
        assert!(mk(1.0).is_err());
        assert!(mk(-0.5).is_err());
        assert!(mk(-0.49).is_ok());
        assert!(mk(0.99).is_ok());
    }

    #[test]
    fn projector_ranks_and_reconstruction() {
        let mk = market(4, 2, 0.3, 0.25);
        let sp = mk.spectral();
        let mut rebuilt = DMatrix::zeros(8, 8);
        for (l, p) in mk.projectors().iter().enumerate() {
            assert_eq!(p.pbar.rank(1e-10), 1);
            assert_eq!(p.pperp.rank(1e-10), 3);
            rebuilt += &p.pbar * sp.kappa1[l] + &p.pperp * sp.kappa2[l];
        }
        assert!((rebuilt - mk.build_sigma()).amax() <= 1e-12);
    }

    #[test]
    fn decompose_examples() {
        let d = decompose_returns(&[1.0, 2.0, 3.0, 4.0], 2, 2).unwrap();
        assert_eq!(d.rbar, vec![1.5, 3.5]);
        assert_eq!(d.rperp, vec![-0.5, 0.5, -0.5, 0.5]);
        let d = decompose_returns(&[0.1, 0.1, 0.3, 0.3], 2, 2).unwrap();
        assert_eq!(d.rperp, vec![0.0; 4]);
        assert!(decompose_returns(&[1.0, 2.0, 3.0], 2, 2).is_err());
    }

    #[test]
    fn rperp_blocks_must_sum_to_zero() {
        let err = MarketParams::new(0.0, 1, 2, vec![0.2], vec![0.1], vec![0.0], vec![0.1, 0.0], vec![0.0], vec![JumpLaw::Deterministic { zbar: 0.1 }])
            .unwrap_err();
        assert!(err.to_string().starts_with("Rperp[0..2]"));
    }

    #[test]
    fn signed_mark_convention_is_normalised() {
        let a = MarketParams::new(0.0, 1, 1, vec![0.2], vec![0.0], vec![0.05], vec![0.0], vec![0.5], vec![JumpLaw::Deterministic { zbar: -0.2 }]).unwrap();
        assert_eq!(a.j(), &[-0.5]);
        assert_eq!(a.laws()[0], JumpLaw::Deterministic { zbar: 0.2 });
        let up = MarketParams::new(0.0, 1, 1, vec![0.2], vec![0.0], vec![0.05], vec![0.0], vec![0.5], vec![JumpLaw::Deterministic { zbar: 0.2 }]);
        assert!(up.is_err());
    }

    #[test]
    fn jump_matrix_columns() {
        let mk = MarketParams::new(0.0, 2, 2, vec![0.2, 0.3], vec![0.1, 0.1], vec![0.0; 2], vec![0.0; 4], vec![-0.3, -0.7], vec![JumpLaw::Deterministic { zbar: 0.1 }; 2]).unwrap();
        let jm = mk.jump_matrix();
        for l in 0..2 {
            let col: Vec<f64> = jm.column(l).iter().copied().collect();
            let expect: Vec<f64> = mk.ones_block(l).iter().map(|x| x * mk.j()[l]).collect();
            assert_eq!(col, expect);
        }
    }

    #[test]
    fn json_keys() {
        let mk = market(2, 1, 0.2, 0.3);
        let v = serde_json::to_value(&mk).unwrap();
        for key in ["r", "m", "k", "upsilon", "rho", "Rbar", "Rperp", "j", "laws"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: MarketParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, mk);
    }
}
