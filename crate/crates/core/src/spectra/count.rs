use crate::onespin::JacobiMatrix;

/// Replacement for an exactly-zero Sturm pivot: a tiny negative number.
#[inline]
fn zero_pivot(diag: f64, lambda: f64) -> f64 {
    -f64::EPSILON * (diag.abs() + lambda.abs() + 1.0)
}

/// Number of eigenvalues strictly below `lambda`: the negative pivots of the
/// shifted LDLᵀ factorisation of `J − λ`.
pub fn count_below(j: &JacobiMatrix, lambda: f64) -> usize {
    let d = j.diag();
    let b = j.offdiag();
    let mut q = d[0] - lambda;
    if q == 0.0 {
        q = zero_pivot(d[0], lambda);
    }
    let mut neg = (q < 0.0) as usize;
    for i in 1..d.len() {
        q = (d[i] - lambda) - b[i - 1] * b[i - 1] / q;
        if q == 0.0 {
            q = zero_pivot(d[i], lambda);
        }
        neg += (q < 0.0) as usize;
    }
    neg
}

/// Number of eigenvalues strictly above `lambda`.
///
/// Exact off the spectrum; at an exact eigenvalue the zero pivot is pushed to
/// the negative side, so the eigenvalue is not counted.
pub fn count_above(j: &JacobiMatrix, lambda: f64) -> usize {
    j.dim() - count_below(j, lambda)
}

/// Eigenvalue count above `lambda` by the oscillation (shooting) method.
///
/// For `−L₁ f = |λ| f` the ratios `ρ_{x+1} = f_{x+1}/f_x` obey
///
/// ```text
/// ρ_{x+1} = (1 + C_x − C_{x+1} − |λ|)/b_{x+1} − (b_x/b_{x+1}) / ρ_x,
/// ```
///
/// with `b_x = sqrt(C_x(1 − C_x))`. Each negative ratio is a sign change of
/// the shooting solution, and the number of sign changes (including the one at
/// the far end, taken against a unit virtual bond) counts eigenvalues above
/// `λ`. The chain is cut into independent blocks at exactly-zero bonds.
pub fn phase_count(j: &JacobiMatrix, lambda: f64) -> usize {
    let d = j.diag();
    let b = j.offdiag();
    let n = d.len();
    let mut count = 0;
    let mut start = 0;
    for end in 0..n {
        if end + 1 == n || b[end] == 0.0 {
            count += block_phase_count(&d[start..=end], &b[start..end], lambda);
            start = end + 1;
        }
    }
    count
}

fn block_phase_count(d: &[f64], b: &[f64], lambda: f64) -> usize {
    let n = d.len();
    if n == 1 {
        return (d[0] > lambda) as usize;
    }
    let mut negatives = 0;
    // f_{-1} = 0 so the first ratio has no back-coupling term
    let mut back = 0.0;
    for x in 0..n {
        // (1 + C_x − C_{x+1} − |λ|) = −(d_x − λ)
        let shifted = -(d[x] - lambda);
        let forward = if x + 1 < n { b[x] } else { 1.0 };
        let mut ratio = (shifted - back) / forward;
        if ratio == 0.0 {
            // same side as the Sturm convention for a zero pivot
            ratio = f64::MIN_POSITIVE;
        }
        if ratio < 0.0 {
            negatives += 1;
        }
        // next step needs b_{x+1}/ρ_{x+1}, scaled into the next equation;
        // ±∞ ratios give a vanishing back term
        back = if x + 1 < n { forward / ratio } else { 0.0 };
    }
    negatives
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::{derive, sample_realization, CouplingField, TailModel};
    use crate::onespin::build_l1;

    fn homogeneous_half(n: i64) -> JacobiMatrix {
        let d = derive(&CouplingField::homogeneous(-1, n, 0.5f64.atanh()).unwrap());
        build_l1(&d, 0, n - 1).unwrap()
    }

    #[test]
    fn three_site_homogeneous() {
        // eigenvalues −1 ± 0.8 cos(π/4) and −1
        let j = homogeneous_half(3);
        assert_eq!(count_above(&j, -0.9), 1);
        assert_eq!(phase_count(&j, -0.9), 1);
        assert_eq!(count_above(&j, -0.43), 0);
        assert_eq!(count_above(&j, -0.44), 1);
        assert_eq!(count_above(&j, -1.1), 2);
        assert_eq!(count_above(&j, -1.56), 2);
        assert_eq!(count_above(&j, -1.57), 3);
        for l in [-0.43, -0.44, -1.1, -1.56, -1.57, -2.5] {
            assert_eq!(phase_count(&j, l), count_above(&j, l), "λ={l}");
        }
    }

    #[test]
    fn extreme_probes() {
        let m = TailModel::exponential(5.0).unwrap();
        for i in 0..50 {
            let f = sample_realization(&m, -31, 31, 2, i).unwrap();
            let j = build_l1(&derive(&f), -30, 30).unwrap();
            assert_eq!(count_above(&j, -3.0), j.dim());
            assert_eq!(count_above(&j, 0.0), 0);
            assert_eq!(phase_count(&j, -3.0), j.dim());
            assert_eq!(phase_count(&j, 0.0), 0);
        }
    }

    #[test]
    fn single_site() {
        let j = JacobiMatrix::new(0, vec![-0.7], vec![]).unwrap();
        assert_eq!(count_above(&j, -0.8), 1);
        assert_eq!(count_above(&j, -0.6), 0);
        assert_eq!(phase_count(&j, -0.8), 1);
        assert_eq!(phase_count(&j, -0.6), 0);
    }

    #[test]
    fn zero_bonds_split_blocks() {
        // ω ≡ 0 plus one coupled pair in the middle
        let d = derive(&CouplingField::new(-1, vec![0.0, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0]).unwrap());
        let j = build_l1(&d, 0, 4).unwrap();
        assert!(j.offdiag().contains(&0.0));
        for l in [-1.9, -1.5, -1.01, -0.99, -0.5, -0.1] {
            assert_eq!(phase_count(&j, l), count_above(&j, l), "λ={l}");
        }
    }

    #[test]
    fn phase_matches_sturm_random() {
        let m = TailModel::exponential(5.0).unwrap();
        for i in 0..100 {
            let f = sample_realization(&m, -41, 41, 3, i).unwrap();
            let j = build_l1(&derive(&f), -40, 40).unwrap();
            for k in 0..25 {
                let l = -2.0 * (k as f64 + 0.5) / 25.0;
                assert_eq!(phase_count(&j, l), count_above(&j, l));
            }
        }
    }

    #[test]
    fn exact_eigenvalue_probe_is_total() {
        let j = JacobiMatrix::new(0, vec![-1.0, -1.0, -1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(count_above(&j, -1.0), 0);
        assert_eq!(count_above(&j, -1.0 - 1e-12), 3);
    }
}
