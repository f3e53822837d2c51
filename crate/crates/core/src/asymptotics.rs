//! Rate functions `g₁`, `g₂`, their Legendre transforms and the decay
//! envelopes built from them.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::disorder::TailModel;
use crate::stats::fmt17;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    G1,
    G2,
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Which::G1 => "g1",
            Which::G2 => "g2",
        })
    }
}

/// `g₁(μ) = ln P(ω > ¼ ln(1/μ))` or `g₂(μ) = 2 ln P(ω > ½ ln(1/(cμ)))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFunction {
    which: Which,
    model: TailModel,
    c: f64,
}

impl RateFunction {
    pub fn new(which: Which, model: TailModel, c: f64) -> Result<Self> {
        model.validate()?;
        if !model.is_unbounded() {
            return Err(Error::InvalidModel(format!(
                "rate functions need an unbounded tail family, got {model}"
            )));
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidArgument(format!("c must lie in (0, 1), got {c}")));
        }
        Ok(RateFunction { which, model, c })
    }

    pub fn which(&self) -> Which {
        self.which
    }

    pub fn model(&self) -> TailModel {
        self.model
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `(multiplier, scale, shift)` with `g(μ) = m·ℓ(s·(−ln μ − shift))`.
    fn shape(&self) -> (f64, f64, f64) {
        match self.which {
            Which::G1 => (1.0, 0.25, 0.0),
            Which::G2 => (2.0, 0.5, self.c.ln()),
        }
    }

    fn argument(&self, mu: f64) -> f64 {
        let (_, s, shift) = self.shape();
        s * (-mu.ln() - shift)
    }

    fn check(&self, mu: f64) -> Result<()> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::Domain(format!("μ must lie in (0, 1), got {mu}")));
        }
        if self.which == Which::G2 && self.c * mu >= 1.0 {
            return Err(Error::Domain(format!("g2 needs cμ < 1, got c={} μ={mu}", self.c)));
        }
        Ok(())
    }

    pub fn eval(&self, mu: f64) -> Result<f64> {
        self.check(mu)?;
        let (m, _, _) = self.shape();
        Ok(m * self.model.ln_tail(self.argument(mu)))
    }

    /// `g'(μ) = −m s ℓ'(u)/μ`.
    pub fn d1(&self, mu: f64) -> Result<f64> {
        self.check(mu)?;
        let (m, s, _) = self.shape();
        Ok(-m * s * self.model.ln_tail_d1(self.argument(mu)) / mu)
    }

    /// `g''(μ) = m (ℓ''(u) s² + ℓ'(u) s)/μ²`.
    pub fn d2(&self, mu: f64) -> Result<f64> {
        self.check(mu)?;
        let (m, s, _) = self.shape();
        let u = self.argument(mu);
        Ok(m * (self.model.ln_tail_d2(u) * s * s + self.model.ln_tail_d1(u) * s) / (mu * mu))
    }

    /// Central second difference with step `10⁻³·μ`, shrunk to stay inside
    /// the domain.
    pub fn d2_numeric(&self, mu: f64) -> Result<f64> {
        self.check(mu)?;
        let h = (1e-3 * mu).min(0.5 * (1.0 - mu));
        let (a, b, c) = (self.eval(mu - h)?, self.eval(mu)?, self.eval(mu + h)?);
        Ok((a - 2.0 * b + c) / (h * h))
    }
}

/// `rate_eval` in functional form.
pub fn rate_eval(rf: &RateFunction, mu: f64) -> Result<f64> {
    rf.eval(mu)
}

/// Minimizer of `tμ − g(μ)` over `μ ∈ (ε, 1 − ε)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegendrePoint {
    pub t: f64,
    pub mu: f64,
    /// `G(t) = tμ* − g(μ*)`.
    pub g_value: f64,
    /// Second difference of `g` at `μ*`.
    pub gpp: f64,
    /// Closed-form `g''(μ*)`.
    pub gpp_exact: f64,
    /// No interior stationary point; `μ*` is the endpoint.
    pub boundary: bool,
}

impl LegendrePoint {
    /// `|t − g'(μ*)|`.
    pub fn stationarity_residual(&self, rf: &RateFunction) -> f64 {
        rf.d1(self.mu).map_or(f64::INFINITY, |d| (self.t - d).abs())
    }
}

pub const MU_EPS: f64 = 1e-12;

/// `G(t) = min_μ (tμ − g(μ))`. Since `g` is concave the derivative
/// `t − g'(μ)` increases; its root is bracketed in `ln μ` and bisected, then
/// polished by golden section on `tμ − g(μ)` inside the final bracket.
pub fn legendre_min(rf: &RateFunction, t: f64) -> Result<LegendrePoint> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let f = |x: f64| {
        let mu = x.exp();
        t * mu - rf.eval(mu).expect("μ inside domain")
    };
    let df = |x: f64| t - rf.d1(x.exp()).expect("μ inside domain");
    let (mut lo, mut hi) = (MU_EPS.ln(), (-MU_EPS).ln_1p());
    let point = |x: f64, boundary: bool| -> Result<LegendrePoint> {
        let mu = x.exp();
        Ok(LegendrePoint {
            t,
            mu,
            g_value: t * mu - rf.eval(mu)?,
            gpp: rf.d2_numeric(mu)?,
            gpp_exact: rf.d2(mu)?,
            boundary,
        })
    };
    if df(hi) <= 0.0 {
        return point(hi, true);
    }
    if df(lo) >= 0.0 {
        return point(lo, true);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if df(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let x = golden_section(&f, lo, hi, 60);
    point(x, false)
}

fn golden_section(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, iterations: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iterations {
        if !(b - a > 0.0) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Leading-order minimizer from the closed-form examples: `k/(4t)` and `k/t`
/// for Exponential, `α(¼)^α (ln t)^{α−1}/t` for Stretched `g₁`.
pub fn leading_order_mu(rf: &RateFunction, t: f64) -> Option<f64> {
    match (rf.model(), rf.which()) {
        (TailModel::Exponential { k }, Which::G1) => Some(k / (4.0 * t)),
        (TailModel::Exponential { k }, Which::G2) => Some(k / t),
        (TailModel::Stretched { alpha }, Which::G1) => {
            Some(alpha * 0.25f64.powf(alpha) * t.ln().powf(alpha - 1.0) / t)
        }
        _ => None,
    }
}

/// One row of the envelope table. `None` marks a boundary Legendre point.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeRow {
    pub t: f64,
    pub p1: LegendrePoint,
    pub p2: LegendrePoint,
    pub upper: Option<f64>,
    pub lower: Option<f64>,
    /// `C₁(1+t)^{−k/8}`, Exponential only.
    pub upper_power: Option<f64>,
    /// `C₂(1+t)^{−2k}`, Exponential only.
    pub lower_power: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    pub model: TailModel,
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub rows: Vec<EnvelopeRow>,
}

/// `ln(C·(t e^{−G}/sqrt(−g''))^p)`, or `None` when the point is on the
/// boundary or the curvature is not negative.
fn ln_envelope(p: &LegendrePoint, constant: f64, power: f64) -> Option<f64> {
    (!p.boundary && p.gpp < 0.0)
        .then(|| constant.ln() + power * (p.t.ln() - p.g_value - 0.5 * (-p.gpp).ln()))
}

/// Upper `C₁(t e^{−G₁}/sqrt(−g₁''))^{1/2}` and lower
/// `C₂(t e^{−G₂}/sqrt(−g₂''))²` on a time grid.
pub fn envelope(model: &TailModel, times: &[f64], c: f64, c1: f64, c2: f64) -> Result<Envelope> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidArgument(format!("envelope constants must be positive, got {c1}, {c2}")));
    }
    let r1 = RateFunction::new(Which::G1, *model, c)?;
    let r2 = RateFunction::new(Which::G2, *model, c)?;
    let rows = times
        .iter()
        .map(|&t| -> Result<EnvelopeRow> {
            let p1 = legendre_min(&r1, t)?;
            let p2 = legendre_min(&r2, t)?;
            let (upper_power, lower_power) = match *model {
                TailModel::Exponential { k } => (
                    Some(c1 * (1.0 + t).powf(-k / 8.0)),
                    Some(c2 * (1.0 + t).powf(-2.0 * k)),
                ),
                _ => (None, None),
            };
            Ok(EnvelopeRow {
                t,
                upper: ln_envelope(&p1, c1, 0.5).map(f64::exp),
                lower: ln_envelope(&p2, c2, 2.0).map(f64::exp),
                p1,
                p2,
                upper_power,
                lower_power,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Envelope { model: *model, c, c1, c2, rows })
}

impl Envelope {
    /// `ln upper(t)` and `ln lower(t)` for row `i`; finite even where the
    /// envelopes themselves underflow.
    pub fn ln_bounds(&self, i: usize) -> (Option<f64>, Option<f64>) {
        let row = &self.rows[i];
        (ln_envelope(&row.p1, self.c1, 0.5), ln_envelope(&row.p2, self.c2, 2.0))
    }

    /// CSV `t,mu1,G1,gpp1,mu2,G2,gpp2,upper,lower,c,C1,C2`; `NA` where a
    /// Legendre point is on the boundary.
    pub fn write_csv<W: Write>(&self, mut out: W, preamble: &[String]) -> std::io::Result<()> {
        for line in preamble {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "t,mu1,G1,gpp1,mu2,G2,gpp2,upper,lower,c,C1,C2")?;
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), fmt17);
        let pt = |p: &LegendrePoint| {
            if p.boundary {
                "NA,NA,NA".to_string()
            } else {
                format!("{},{},{}", fmt17(p.mu), fmt17(p.g_value), fmt17(p.gpp))
            }
        };
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt17(row.t),
                pt(&row.p1),
                pt(&row.p2),
                opt(row.upper),
                opt(row.lower),
                fmt17(self.c),
                fmt17(self.c1),
                fmt17(self.c2)
            )?;
        }
        Ok(())
    }
}
