use crate::onespin::JacobiMatrix;
use crate::spectra::count_below;
use crate::{Error, Result};

/// Eigenvalues in ascending order, with optional orthonormal eigenvectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[j][i]` is the component of eigenvector `j` on row `i`
    /// (site `lo + i`).
    pub eigenvectors: Option<Vec<Vec<f64>>>,
}

impl SpectralDecomposition {
    /// Number of eigenvalues strictly above `lambda`.
    pub fn count_above(&self, lambda: f64) -> usize {
        self.eigenvalues.len() - self.eigenvalues.partition_point(|&e| e <= lambda)
    }

    /// Checks that the Sturm count of `j` agrees with the eigenvalue list at
    /// every probe. Returns the first mismatching probe.
    pub fn cross_validate(&self, j: &JacobiMatrix, probes: &[f64]) -> Result<(), f64> {
        for &p in probes {
            if j.dim() - count_below(j, p) != self.count_above(p) {
                return Err(p);
            }
        }
        Ok(())
    }

    /// Probes between consecutive well-separated eigenvalues, plus the two
    /// ends of the spectrum.
    pub fn separating_probes(&self, max_probes: usize) -> Vec<f64> {
        let ev = &self.eigenvalues;
        let mut probes = vec![ev[0] - 1e-6, ev[ev.len() - 1] + 1e-6];
        let stride = (ev.len() / max_probes.max(1)).max(1);
        let mut i = 0;
        while i + 1 < ev.len() {
            if ev[i + 1] - ev[i] > 1e-9 {
                probes.push(0.5 * (ev[i] + ev[i + 1]));
            }
            i += stride;
        }
        probes
    }
}

/// Eigenvalues together with the projections `(u_j, y_p)` of each
/// eigenvector `u_j` on a few fixed vectors `y_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedSpectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `projections[p][j] = (u_j, y_p)`.
    pub projections: Vec<Vec<f64>>,
}

impl ProjectedSpectrum {
    /// `Σ_j (u_j, y_p)² e^{t λ_j}`, i.e. `(e^{tJ} y_p, y_p)`.
    pub fn laplace(&self, p: usize, t: f64) -> f64 {
        self.projections[p]
            .iter()
            .zip(&self.eigenvalues)
            .map(|(c, l)| c * c * (t * l).exp())
            .sum()
    }
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
///
/// `d` holds the diagonal and is overwritten with the (unsorted) eigenvalues.
/// `e[i]` couples rows `i` and `i+1`; it is destroyed. `tracked` stores, for
/// each eigen-index `i`, a block of `stride` numbers that are rotated along
/// with the columns of the accumulated transformation: identity rows give
/// eigenvectors, a few arbitrary rows give projections.
/// `sqrt(f² + g²)`; entries are bounded by 2, so only underflow needs the
/// slower `hypot`.
#[inline]
fn norm2(f: f64, g: f64) -> f64 {
    let r = (f * f + g * g).sqrt();
    if r > 1e-150 {
        r
    } else {
        f.hypot(g)
    }
}

fn implicit_ql(d: &mut [f64], e: &mut [f64], tracked: &mut [f64], stride: usize) {
    let n = d.len();
    if n < 2 {
        return;
    }
    let mut e_ext = vec![0.0; n];
    e_ext[..n - 1].copy_from_slice(&e[..n - 1]);
    let e = &mut e_ext;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                // never observed for these matrices; accept current values
                log::warn!("implicit QL: no convergence for eigenvalue {l} after 60 sweeps");
                break;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = norm2(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if stride > 0 {
                    let (left, right) = tracked.split_at_mut((i + 1) * stride);
                    let zi = &mut left[i * stride..];
                    let zi1 = &mut right[..stride];
                    for k in 0..stride {
                        let f = zi1[k];
                        zi1[k] = s * zi[k] + c * f;
                        zi[k] = c * zi[k] - s * f;
                    }
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Full symmetric tridiagonal eigendecomposition.
pub fn eigensolve(j: &JacobiMatrix, want_vectors: bool) -> SpectralDecomposition {
    let n = j.dim();
    let mut d = j.diag().to_vec();
    let mut e = j.offdiag().to_vec();
    if !want_vectors {
        implicit_ql(&mut d, &mut e, &mut [], 0);
        d.sort_by(f64::total_cmp);
        return SpectralDecomposition { eigenvalues: d, eigenvectors: None };
    }
    // column i of the accumulated transform, stored contiguously
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    implicit_ql(&mut d, &mut e, &mut z, n);
    let order = ascending_order(&d);
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let eigenvectors = order.iter().map(|&i| z[i * n..(i + 1) * n].to_vec()).collect();
    SpectralDecomposition { eigenvalues, eigenvectors: Some(eigenvectors) }
}

/// Eigenvalues plus the projections of every eigenvector on each of
/// `vectors`, at `O(n²)` cost instead of the `O(n³)` of full eigenvectors.
pub fn eigensolve_projected(j: &JacobiMatrix, vectors: &[&[f64]]) -> Result<ProjectedSpectrum> {
    let n = j.dim();
    let k = vectors.len();
    if let Some(v) = vectors.iter().find(|v| v.len() != n) {
        return Err(Error::InvalidArgument(format!(
            "projection vector has length {}, matrix dimension is {n}",
            v.len()
        )));
    }
    let mut d = j.diag().to_vec();
    let mut e = j.offdiag().to_vec();
    // row vector yᵀZ starts at yᵀ and is rotated like the rows of Z
    let mut tracked = vec![0.0; n * k];
    for (p, v) in vectors.iter().enumerate() {
        for i in 0..n {
            tracked[i * k + p] = v[i];
        }
    }
    implicit_ql(&mut d, &mut e, &mut tracked, k);
    let order = ascending_order(&d);
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let projections = (0..k)
        .map(|p| order.iter().map(|&i| tracked[i * k + p]).collect())
        .collect();
    Ok(ProjectedSpectrum { eigenvalues, projections })
}

/// Reference eigenvalues by Sturm-count bisection, ascending, each bracketed
/// to width `tol`.
pub fn bisect_eigenvalues(j: &JacobiMatrix, tol: f64) -> Vec<f64> {
    let n = j.dim();
    // Gershgorin interval
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += j.offdiag()[i - 1].abs();
        }
        if i + 1 < n {
            r += j.offdiag()[i].abs();
        }
        lo = lo.min(j.diag()[i] - r);
        hi = hi.max(j.diag()[i] + r);
    }
    lo -= 1e-12;
    hi += 1e-12;
    (0..n)
        .map(|k| {
            // k-th smallest: smallest x with count_below(x) > k
            let (mut a, mut b) = (lo, hi);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if mid <= a || mid >= b {
                    break;
                }
                if count_below(j, mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}
