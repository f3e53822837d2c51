use crate::disorder::CouplingField;
use crate::onespin::JacobiMatrix;
use crate::spectra::eigensolve;
use crate::{Error, Result};

/// `γ(λ) = ¼ ln(1/|λ|)`.
pub fn gamma_of_lambda(lambda: f64) -> f64 {
    0.25 * (1.0 / lambda.abs()).ln()
}

/// Upper spectral edge for couplings bounded by `γ(λ)`:
/// `−1 + tanh 2γ(λ) = −2|λ|/(1 + |λ|)`.
pub fn b0_bound(lambda: f64) -> f64 {
    let mu = lambda.abs();
    -2.0 * mu / (1.0 + mu)
}

/// Strong-coupling sites `A` (`ω_x > γ`) and the weak interior `B⁰`
/// (`ω_{x−1}, ω_x, ω_{x+1} ≤ γ`) of a coupling window.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteClassification {
    pub lambda: f64,
    pub gamma: f64,
    pub lo: i64,
    pub hi: i64,
    pub a_sites: Vec<i64>,
    /// Only sites whose two neighbours are inside the window are eligible.
    pub b0_sites: Vec<i64>,
}

impl SiteClassification {
    pub fn a_count(&self) -> usize {
        self.a_sites.len()
    }

    pub fn b0_count(&self) -> usize {
        self.b0_sites.len()
    }

    /// `B⁰` sites inside `[lo, hi]`.
    pub fn b0_within(&self, lo: i64, hi: i64) -> impl Iterator<Item = i64> + '_ {
        self.b0_sites.iter().copied().filter(move |&x| x >= lo && x <= hi)
    }
}

pub fn classify_sites(field: &CouplingField, lambda: f64) -> Result<SiteClassification> {
    if !(lambda < 0.0 && lambda > -1.0) {
        return Err(Error::Domain(format!("site classification needs −1 < λ < 0, got {lambda}")));
    }
    let gamma = gamma_of_lambda(lambda);
    let a_sites = (field.lo()..=field.hi()).filter(|&x| field.omega(x) > gamma).collect();
    let b0_sites = (field.lo() + 1..field.hi())
        .filter(|&x| (x - 1..=x + 1).all(|y| field.omega(y) <= gamma))
        .collect();
    Ok(SiteClassification { lambda, gamma, lo: field.lo(), hi: field.hi(), a_sites, b0_sites })
}

/// Top eigenvalue of the principal submatrix of `j` on the `B⁰` sites, or
/// `None` when no `B⁰` site lies in the matrix window.
pub fn b0_submatrix_top(j: &JacobiMatrix, cls: &SiteClassification) -> Option<f64> {
    let rows: Vec<usize> = cls.b0_within(j.lo(), j.hi()).filter_map(|x| j.index_of(x)).collect();
    let mut top: Option<f64> = None;
    let mut start = 0;
    // runs of adjacent rows are the only coupled blocks
    for k in 0..rows.len() {
        if k + 1 == rows.len() || rows[k + 1] != rows[k] + 1 {
            let run = &rows[start..=k];
            let diag = run.iter().map(|&i| j.diag()[i]).collect();
            let off = run.windows(2).map(|w| j.offdiag()[w[0]]).collect();
            let block = JacobiMatrix::new(0, diag, off).expect("block shape is consistent");
            let t = *eigensolve(&block, false).eigenvalues.last().expect("nonempty block");
            top = Some(top.map_or(t, |m: f64| m.max(t)));
            start = k + 1;
        }
    }
    top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::derive;
    use crate::onespin::build_l1;

    #[test]
    fn gamma_value() {
        assert!((gamma_of_lambda(-0.01) - 1.151_292_546_497_023).abs() < 1e-12);
    }

    #[test]
    fn bound_simplification() {
        for mu in [0.01, 0.05, 0.2, 1.0 / 3.0, 0.7] {
            let direct = -1.0 + (2.0 * gamma_of_lambda(-mu)).tanh();
            assert!((direct - b0_bound(-mu)).abs() < 1e-14);
        }
        assert!((b0_bound(-0.01) + 0.019_801_980_198_019_8).abs() < 1e-12);
        assert!((b0_bound(-1.0 / 3.0) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_weak() {
        let f = CouplingField::homogeneous(-5, 5, 0.1).unwrap();
        let c = classify_sites(&f, -0.01).unwrap();
        assert!(c.a_sites.is_empty());
        assert_eq!(c.b0_sites, (-4..=4).collect::<Vec<_>>());
    }

    #[test]
    fn one_strong_site_excludes_neighbourhood() {
        let f = CouplingField::homogeneous(-5, 5, 0.1).unwrap().with_omega(0, 2.0).unwrap();
        let c = classify_sites(&f, -0.01).unwrap();
        assert_eq!(c.a_sites, vec![0]);
        for x in [-1, 0, 1] {
            assert!(!c.b0_sites.contains(&x));
        }
        assert_eq!(c.b0_count(), 6);
    }

    #[test]
    fn lambda_domain() {
        let f = CouplingField::homogeneous(-5, 5, 0.1).unwrap();
        assert!(classify_sites(&f, -1.0).is_err());
        assert!(classify_sites(&f, 0.0).is_err());
        assert!(classify_sites(&f, -1.5).is_err());
    }

    #[test]
    fn decoupled_submatrix_top() {
        let f = CouplingField::homogeneous(-6, 6, 0.0).unwrap();
        let j = build_l1(&derive(&f), -5, 5).unwrap();
        for l in [-0.01, -0.3, -0.9] {
            let c = classify_sites(&f, l).unwrap();
            let top = b0_submatrix_top(&j, &c).unwrap();
            assert_eq!(top, -1.0);
            assert!(top <= b0_bound(l));
        }
    }

    #[test]
    fn empty_b0() {
        let f = CouplingField::homogeneous(-6, 6, 5.0).unwrap();
        let j = build_l1(&derive(&f), -5, 5).unwrap();
        let c = classify_sites(&f, -0.01).unwrap();
        assert_eq!(b0_submatrix_top(&j, &c), None);
    }
}
