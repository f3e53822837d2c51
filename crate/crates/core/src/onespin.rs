//! The truncated one-spin-sector generator and the expansion of `σ₀` in the
//! orthonormal basis `v_x = cosh ω_x σ_x − sinh ω_x σ_{x−1}`.

use std::io::Write;

use crate::disorder::DerivedField;
use crate::stats::fmt17;
use crate::{Error, Result};

/// Symmetric tridiagonal matrix on sites `[lo, hi]`.
///
/// `offdiag[i]` couples sites `lo + i` and `lo + i + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct JacobiMatrix {
    lo: i64,
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl JacobiMatrix {
    pub fn new(lo: i64, diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::InvalidArgument("matrix dimension must be >= 1".into()));
        }
        if offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidArgument(format!(
                "{} diagonal entries need {} off-diagonal entries, got {}",
                diag.len(),
                diag.len() - 1,
                offdiag.len()
            )));
        }
        Ok(JacobiMatrix { lo, diag, offdiag })
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.diag.len() as i64 - 1
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Row index of site `x`, if inside the window.
    pub fn index_of(&self, x: i64) -> Option<usize> {
        (x >= self.lo && x <= self.hi()).then(|| (x - self.lo) as usize)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(v.len(), n);
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.offdiag[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.offdiag[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    /// CSV dump with columns `x,diag,offdiag_to_left`; the first row has no
    /// left bond and leaves the last column empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,diag,offdiag_to_left")?;
        for (i, d) in self.diag.iter().enumerate() {
            let left = if i == 0 { String::new() } else { fmt17(self.offdiag[i - 1]) };
            writeln!(out, "{},{},{}", self.lo + i as i64, fmt17(*d), left)?;
        }
        Ok(())
    }
}

/// Builds `L₁` restricted to `span{v_x : x ∈ [lo, hi]}`.
///
/// Diagonal `−1 − C_x + C_{x+1}`, off-diagonal `sqrt(C_x (1 − C_x))` on bond
/// `(x−1, x)`. The derived field must provide `C_lo … C_{hi+1}`, i.e. cover
/// couplings on `[lo−1, hi+1]`.
pub fn build_l1(derived: &DerivedField, lo: i64, hi: i64) -> Result<JacobiMatrix> {
    if hi < lo {
        return Err(Error::Window(format!("empty operator window [{lo}, {hi}]")));
    }
    if !(derived.has_c(lo) && derived.has_c(hi + 1)) {
        return Err(Error::Window(format!(
            "operator on [{lo}, {hi}] needs couplings on [{}, {}], have [{}, {}]",
            lo - 1,
            hi + 1,
            derived.lo(),
            derived.hi()
        )));
    }
    let diag = (lo..=hi)
        .map(|x| -derived.c(x) - derived.one_minus_c(x + 1))
        .collect();
    let offdiag = (lo + 1..=hi)
        .map(|x| (derived.c(x) * derived.one_minus_c(x)).sqrt())
        .collect();
    JacobiMatrix::new(lo, diag, offdiag)
}

/// Coefficients `w_x = D_{0,x}` of `σ₀ = Σ_{x ≤ 0} w_x v_x`, truncated to `[lo, 0]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaWeights {
    lo: i64,
    weights: Vec<f64>,
    mass: f64,
    /// Set when some weight fell below `e^{-700}` and was flushed to zero.
    pub underflow: bool,
}

const LN_FLUSH: f64 = -700.0;

impl SigmaWeights {
    pub fn lo(&self) -> i64 {
        self.lo
    }

    /// Weights ordered by site from `lo` to `0`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, x: i64) -> f64 {
        if x < self.lo || x > 0 {
            0.0
        } else {
            self.weights[(x - self.lo) as usize]
        }
    }

    /// `Σ w_x²`, the squared norm of the truncated expansion.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `1 − mass`: the part of `σ₀` outside the window.
    pub fn deficit(&self) -> f64 {
        1.0 - self.mass
    }

    /// The weights as a vector over the sites of `j` (zero right of 0).
    pub fn embed(&self, j: &JacobiMatrix) -> Result<Vec<f64>> {
        if self.lo < j.lo() || j.hi() < 0 {
            return Err(Error::Window(format!(
                "σ₀ weights on [{}, 0] do not fit operator window [{}, {}]",
                self.lo,
                j.lo(),
                j.hi()
            )));
        }
        let mut v = vec![0.0; j.dim()];
        for x in self.lo..=0 {
            v[(x - j.lo()) as usize] = self.weight(x);
        }
        Ok(v)
    }
}

/// `w_0 = sqrt(u_0)`, `w_x = sqrt(u_x)·a_{x+1}⋯a_0` for `x < 0`, computed in
/// the log domain.
pub fn sigma_weights(derived: &DerivedField, lo: i64) -> Result<SigmaWeights> {
    if lo > 0 || !derived.contains(lo) || !derived.contains(0) {
        return Err(Error::Window(format!(
            "σ₀ weights on [{lo}, 0] need couplings there, have [{}, {}]",
            derived.lo(),
            derived.hi()
        )));
    }
    let depth = (-lo) as usize;
    let mut weights = vec![0.0; depth + 1];
    let mut ln_prod = 0.0; // Σ_{j=x+1}^{0} ln a_j
    let mut underflow = false;
    for x in (lo..=0).rev() {
        let ln_w = 0.5 * derived.ln_u(x) + ln_prod;
        weights[(x - lo) as usize] = if ln_w < LN_FLUSH {
            underflow = true;
            0.0
        } else {
            ln_w.exp()
        };
        let a = derived.a(x);
        if a == 0.0 {
            // every weight further left carries this factor
            break;
        }
        ln_prod += a.ln();
    }
    let mass = weights.iter().map(|w| w * w).sum();
    Ok(SigmaWeights { lo, weights, mass, underflow })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{derive, sample_realization, CouplingField, TailModel};

    #[test]
    fn homogeneous_half() {
        let w = 0.5f64.atanh();
        let d = derive(&CouplingField::homogeneous(-6, 6, w).unwrap());
        let j = build_l1(&d, -5, 5).unwrap();
        for &x in j.diag() {
            assert!((x + 1.0).abs() < 1e-15);
        }
        for &b in j.offdiag() {
            assert!((b - 0.4).abs() < 1e-15);
        }
        // direct evaluation of C from a = 0.5 agrees with C = a²/(1+a²)
        let a2: f64 = 0.25;
        assert!((a2 * (1.0 - a2) / (1.0 - a2 * a2) - a2 / (1.0 + a2)).abs() < 1e-16);
    }

    #[test]
    fn decoupled_chain_is_minus_identity() {
        let d = derive(&CouplingField::homogeneous(-4, 4, 0.0).unwrap());
        let j = build_l1(&d, -3, 3).unwrap();
        assert!(j.diag().iter().all(|&x| x == -1.0));
        assert!(j.offdiag().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn homogeneous_offdiag_is_half_tanh_2w() {
        let w = 0.3;
        let d = derive(&CouplingField::homogeneous(0, 5, w).unwrap());
        let j = build_l1(&d, 1, 4).unwrap();
        for &b in j.offdiag() {
            assert!((b - 0.5 * (2.0 * w).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn insufficient_window_rejected() {
        let d = derive(&CouplingField::homogeneous(-5, 5, 0.2).unwrap());
        assert!(build_l1(&d, -4, 4).is_ok());
        let err = build_l1(&d, -5, 4).unwrap_err();
        assert!(matches!(err, Error::Window(ref m) if m.contains("[-6, 5]")), "{err}");
        assert!(build_l1(&d, -4, 5).is_err());
    }

    #[test]
    fn entries_in_range() {
        let m = TailModel::exponential(5.0).unwrap();
        for i in 0..200 {
            let f = sample_realization(&m, -101, 101, 9, i).unwrap();
            let j = build_l1(&derive(&f), -100, 100).unwrap();
            assert!(j.diag().iter().all(|&d| d > -2.0 && d < 0.0));
            assert!(j.offdiag().iter().all(|&b| (0.0..=0.5).contains(&b)));
        }
    }

    #[test]
    fn sigma_weights_homogeneous() {
        let w = 0.5f64.atanh();
        let d = derive(&CouplingField::homogeneous(-3, 3, w).unwrap());
        let s = sigma_weights(&d, -1).unwrap();
        assert!((s.weight(0) - 0.866_025_403_784_438_6).abs() < 1e-12);
        assert!((s.weight(-1) - 0.433_012_701_892_219_3).abs() < 1e-12);
        assert!((s.mass() - 0.9375).abs() < 1e-14);
        // telescoping: Σ_{x=-m}^{0} w_x² = 1 − a^{2(m+1)}
        for m in 0..3 {
            let s = sigma_weights(&d, -m).unwrap();
            assert!((s.mass() - (1.0 - 0.5f64.powi(2 * (m as i32 + 1)))).abs() < 1e-14);
        }
    }

    #[test]
    fn sigma_weights_decoupled() {
        let d = derive(&CouplingField::homogeneous(-5, 5, 0.0).unwrap());
        let s = sigma_weights(&d, -5).unwrap();
        assert_eq!(s.weight(0), 1.0);
        assert!(s.weights()[..5].iter().all(|&w| w == 0.0));
        assert_eq!(s.mass(), 1.0);
        assert_eq!(s.deficit(), 0.0);
    }

    #[test]
    fn zero_coupling_truncates() {
        let d = derive(&CouplingField::new(-4, vec![0.8, 0.9, 0.0, 0.5, 0.7]).unwrap());
        let s = sigma_weights(&d, -4).unwrap();
        // a_{-2} = 0 kills w_{-3}, w_{-4}
        assert_eq!(s.weight(-3), 0.0);
        assert_eq!(s.weight(-4), 0.0);
        assert!(s.weight(-2) > 0.0);
    }

    #[test]
    fn mass_at_most_one() {
        let m = TailModel::exponential(5.0).unwrap();
        for i in 0..300 {
            let f = sample_realization(&m, -60, 2, 4, i).unwrap();
            let s = sigma_weights(&derive(&f), -60).unwrap();
            assert!(s.mass() <= 1.0 + 1e-12 && s.mass() > 0.0);
        }
    }

    #[test]
    fn underflow_flagged() {
        let mut vals = vec![1e-300; 400];
        vals[399] = 0.3;
        // a ≈ 1e-300 per site drives the log-weights far below -700
        let d = derive(&CouplingField::new(-399, vals).unwrap());
        let s = sigma_weights(&d, -399).unwrap();
        assert!(s.underflow);
        assert!(s.mass() > 0.0);
    }

    #[test]
    fn csv_dump() {
        let d = derive(&CouplingField::homogeneous(-2, 2, 0.0).unwrap());
        let j = build_l1(&d, -1, 1).unwrap();
        let mut buf = Vec::new();
        j.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,diag,offdiag_to_left");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("-1,-1.0") && lines[1].ends_with(','));
    }
}
