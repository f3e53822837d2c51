//! Small statistics helpers shared by the Monte Carlo modules.

/// Sample mean and standard error of the mean.
///
/// The standard error is `None` for fewer than two samples.
pub fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some((var / n as f64).sqrt()))
}

/// Result of a weighted straight-line fit `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the weighted normal equations.
    pub slope_se: f64,
    /// Weighted coefficient of determination.
    pub r_squared: f64,
    pub points: usize,
}

/// Weighted least squares line. Returns `None` with fewer than two points or
/// a degenerate abscissa.
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<LineFit> {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    let n = x.len();
    if n < 2 {
        return None;
    }
    let sw: f64 = w.iter().sum();
    if sw <= 0.0 {
        return None;
    }
    let xm = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = x[i] - xm;
        let dy = y[i] - ym;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * dy;
        syy += w[i] * dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = (0..n)
        .map(|i| w[i] * (y[i] - intercept - slope * x[i]).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    // Inverse-variance weights: the slope variance is 1/Sxx; scale by the
    // reduced chi-square when there are spare degrees of freedom.
    let dof = n.saturating_sub(2);
    let scale = if dof > 0 { (rss / dof as f64).max(1.0) } else { 1.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_se: (scale / sxx).sqrt(),
        r_squared,
        points: n,
    })
}

/// Formats a float with 17 significant digits, `%.17g` style.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // log10 can be off by one right at powers of ten
        if significant_digits(&s) > 17 && decimals > 0 {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.16e}")
    }
}

fn significant_digits(s: &str) -> usize {
    let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
    digits.trim_start_matches('0').len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_basic() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let expected = (1.25f64 * 4.0 / 3.0 / 4.0).sqrt();
        assert!((se.unwrap() - expected).abs() < 1e-15);
        assert_eq!(mean_se(&[3.0]), (3.0, None));
    }

    #[test]
    fn exact_line_recovered() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = weighted_line_fit(&x, &y, &[1.0; 10]).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fmt17_round_trips() {
        for &x in &[-0.03, -0.3, 1.0, 1e-7, 123456.789, -2.5e20, 0.1 + 0.2, 9.999999999999999e-6] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert!(fmt17(-0.03).starts_with("-0.0"));
        assert_eq!(fmt17(1.0), "1.0000000000000000");
    }
}
