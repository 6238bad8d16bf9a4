//! Scale functions `E(lambda)` and the generalized strain tensors they induce.
//!
//! Every family is normalized so that `E(1) = 0` and `E'(1) = 1`. Parameters
//! whose magnitudes are below [`HENCKY_THRESHOLD`] select the logarithmic limit.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spectral::SpectralDecomp;
use crate::tensor::SymTensor2;

pub const HENCKY_THRESHOLD: f64 = 1e-12;

/// Value, first and second derivative of a scale function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleValue {
    pub e: f64,
    pub de: f64,
    pub d2e: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScaleFunction {
    /// `(lambda^m - 1) / m`.
    SethHill { m: f64 },
    /// `(lambda^m - lambda^-n) / (m + n)`.
    CurnierRakotomanana { m: f64, n: f64 },
    /// `(lambda^m - lambda^-m) / (2m)`.
    BazantItskov { m: f64 },
    /// `(2+m)/8 lambda^2 - (2-m)/8 lambda^-2 - m/4`.
    CurnierZysset { m: f64 },
    /// `(exp(m(lambda-1)) - exp(n(1/lambda-1))) / (m + n)`.
    Darijani { m: f64, n: f64 },
}

impl ScaleFunction {
    pub const HENCKY: ScaleFunction = ScaleFunction::SethHill { m: 0.0 };

    pub fn family(&self) -> &'static str {
        match self {
            ScaleFunction::SethHill { .. } => "SH",
            ScaleFunction::CurnierRakotomanana { .. } => "CR",
            ScaleFunction::BazantItskov { .. } => "BI",
            ScaleFunction::CurnierZysset { .. } => "CZ",
            ScaleFunction::Darijani { .. } => "DN",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            ScaleFunction::SethHill { m }
            | ScaleFunction::BazantItskov { m }
            | ScaleFunction::CurnierZysset { m } => vec![m],
            ScaleFunction::CurnierRakotomanana { m, n } | ScaleFunction::Darijani { m, n } => vec![m, n],
        }
    }

    pub fn is_hencky(&self) -> bool {
        match *self {
            ScaleFunction::SethHill { m } | ScaleFunction::BazantItskov { m } => m.abs() < HENCKY_THRESHOLD,
            ScaleFunction::CurnierRakotomanana { m, n } => {
                m.abs() < HENCKY_THRESHOLD && n.abs() < HENCKY_THRESHOLD
            }
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameters(msg));
        if self.params().iter().any(|p| !p.is_finite()) {
            return bad(format!("{self}: parameters must be finite"));
        }
        match *self {
            ScaleFunction::SethHill { .. } | ScaleFunction::BazantItskov { .. } => Ok(()),
            ScaleFunction::CurnierRakotomanana { m, n } => {
                if m < 0.0 || n < 0.0 {
                    bad(format!("{self}: requires m >= 0 and n >= 0"))
                } else {
                    Ok(())
                }
            }
            ScaleFunction::CurnierZysset { m } => {
                if (-2.0..=2.0).contains(&m) {
                    Ok(())
                } else {
                    bad(format!("{self}: requires -2 <= m <= 2"))
                }
            }
            ScaleFunction::Darijani { m, n } => {
                if m > 0.0 && n > 0.0 {
                    Ok(())
                } else {
                    bad(format!("{self}: requires m > 0 and n > 0"))
                }
            }
        }
    }

    /// `E`, `E'`, `E''` at stretch `lambda > 0`.
    pub fn eval(&self, lambda: f64) -> ScaleValue {
        let l = lambda.ln();
        if self.is_hencky() {
            return ScaleValue {
                e: l,
                de: 1.0 / lambda,
                d2e: -1.0 / (lambda * lambda),
            };
        }
        match *self {
            ScaleFunction::SethHill { m } => ScaleValue {
                e: (m * l).exp_m1() / m,
                de: lambda.powf(m - 1.0),
                d2e: (m - 1.0) * lambda.powf(m - 2.0),
            },
            ScaleFunction::CurnierRakotomanana { m, n } => {
                let s = m + n;
                ScaleValue {
                    e: ((m * l).exp_m1() - (-n * l).exp_m1()) / s,
                    de: (m * lambda.powf(m - 1.0) + n * lambda.powf(-n - 1.0)) / s,
                    d2e: (m * (m - 1.0) * lambda.powf(m - 2.0) - n * (n + 1.0) * lambda.powf(-n - 2.0)) / s,
                }
            }
            ScaleFunction::BazantItskov { m } => ScaleValue {
                e: (m * l).sinh() / m,
                de: 0.5 * (lambda.powf(m - 1.0) + lambda.powf(-m - 1.0)),
                d2e: 0.5 * ((m - 1.0) * lambda.powf(m - 2.0) - (m + 1.0) * lambda.powf(-m - 2.0)),
            },
            ScaleFunction::CurnierZysset { m } => {
                let (a, b) = ((2.0 + m) / 8.0, (2.0 - m) / 8.0);
                let l2 = lambda * lambda;
                ScaleValue {
                    e: a * (l2 - 1.0) - b * (1.0 / l2 - 1.0),
                    de: 2.0 * a * lambda + 2.0 * b / (l2 * lambda),
                    d2e: 2.0 * a - 6.0 * b / (l2 * l2),
                }
            }
            ScaleFunction::Darijani { m, n } => {
                let s = m + n;
                let u = n * (1.0 / lambda - 1.0);
                let (e1, e2) = ((m * (lambda - 1.0)).exp(), u.exp());
                let inv2 = 1.0 / (lambda * lambda);
                ScaleValue {
                    e: ((m * (lambda - 1.0)).exp_m1() - u.exp_m1()) / s,
                    de: (m * e1 + n * inv2 * e2) / s,
                    d2e: (m * m * e1 - (2.0 * n * inv2 / lambda + n * n * inv2 * inv2) * e2) / s,
                }
            }
        }
    }

    pub fn value(&self, lambda: f64) -> f64 {
        self.eval(lambda).e
    }

    /// `E(sqrt x) - E(sqrt y)` without cancelling the normalization constants.
    pub fn squared_difference(&self, x: f64, y: f64) -> f64 {
        if self.is_hencky() {
            return 0.5 * ((x - y) / y).ln_1p();
        }
        match *self {
            ScaleFunction::SethHill { m } => pow_diff(x, y, 0.5 * m) / m,
            ScaleFunction::CurnierRakotomanana { m, n } => (pow_diff(x, y, 0.5 * m) - pow_diff(x, y, -0.5 * n)) / (m + n),
            ScaleFunction::BazantItskov { m } => (pow_diff(x, y, 0.5 * m) - pow_diff(x, y, -0.5 * m)) / (2.0 * m),
            ScaleFunction::CurnierZysset { m } => {
                let (a, b) = ((2.0 + m) / 8.0, (2.0 - m) / 8.0);
                a * (x - y) - b * pow_diff(x, y, -1.0)
            }
            ScaleFunction::Darijani { m, n } => {
                let (lx, ly) = (x.sqrt(), y.sqrt());
                let dl = (x - y) / (lx + ly);
                let up = (m * (ly - 1.0)).exp() * (m * dl).exp_m1();
                let un = n * (1.0 / ly - 1.0);
                let down = un.exp() * (-n * dl / (lx * ly)).exp_m1();
                (up - down) / (m + n)
            }
        }
    }

    /// Whether `|E| -> infinity` at both ends of the stretch axis,
    /// determined from the closed form.
    pub fn coercive_analytic(&self) -> (bool, bool) {
        if self.is_hencky() {
            return (true, true);
        }
        match *self {
            ScaleFunction::SethHill { m } => (m < 0.0, m > 0.0),
            ScaleFunction::CurnierRakotomanana { m, n } => (n > 0.0, m > 0.0),
            ScaleFunction::BazantItskov { .. } => (true, true),
            ScaleFunction::CurnierZysset { m } => (m < 2.0, m > -2.0),
            ScaleFunction::Darijani { .. } => (true, true),
        }
    }
}

/// `x^q - y^q` with relative accuracy for close arguments.
fn pow_diff(x: f64, y: f64, q: f64) -> f64 {
    if q == 0.0 {
        0.0
    } else if q == 1.0 {
        x - y
    } else if q == -1.0 {
        (y - x) / (x * y)
    } else {
        y.powf(q) * (q * ((x - y) / y).ln_1p()).exp_m1()
    }
}

impl fmt::Display for ScaleFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ScaleFunction::SethHill { m }
            | ScaleFunction::BazantItskov { m }
            | ScaleFunction::CurnierZysset { m } => write!(f, "{}:m={}", self.family(), m),
            ScaleFunction::CurnierRakotomanana { m, n } | ScaleFunction::Darijani { m, n } => {
                write!(f, "{}:m={},n={}", self.family(), m, n)
            }
        }
    }
}

impl FromStr for ScaleFunction {
    type Err = Error;

    /// Parses `"SH:m=2"`, `"CR:m=1.2,n=1.4"`, `"HENCKY"` and similar.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidParameters(format!("strain '{s}': {msg}"));
        let s_trim = s.trim();
        if s_trim.eq_ignore_ascii_case("hencky") {
            return Ok(ScaleFunction::HENCKY);
        }
        let (fam, rest) = s_trim.split_once(':').unwrap_or((s_trim, ""));
        let mut m = None;
        let mut n = None;
        for kv in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            let v: f64 = v.trim().parse().map_err(|_| bad("parameter is not a number"))?;
            match k.trim() {
                "m" => m = Some(v),
                "n" => n = Some(v),
                other => return Err(bad(&format!("unknown parameter '{other}'"))),
            }
        }
        let need = |p: Option<f64>, name: &str| p.ok_or_else(|| bad(&format!("missing parameter {name}")));
        let f = match fam.trim().to_ascii_uppercase().as_str() {
            "SH" => ScaleFunction::SethHill { m: need(m, "m")? },
            "CR" => ScaleFunction::CurnierRakotomanana {
                m: need(m, "m")?,
                n: need(n, "n")?,
            },
            "BI" => ScaleFunction::BazantItskov { m: need(m, "m")? },
            "CZ" => ScaleFunction::CurnierZysset { m: need(m, "m")? },
            "DN" => ScaleFunction::Darijani {
                m: need(m, "m")?,
                n: need(n, "n")?,
            },
            _ => return Err(bad("unknown family")),
        };
        let single = matches!(fam.trim().to_ascii_uppercase().as_str(), "SH" | "BI" | "CZ");
        if single && n.is_some() {
            return Err(bad("family takes only m"));
        }
        f.validate()?;
        Ok(f)
    }
}

/// Outcome of the sampled coercivity probe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoercivityReport {
    pub lower_sampled: bool,
    pub upper_sampled: bool,
    pub lower_expected: bool,
    pub upper_expected: bool,
}

impl CoercivityReport {
    pub fn consistent(&self) -> bool {
        self.lower_sampled == self.lower_expected && self.upper_sampled == self.upper_expected
    }
}

/// Samples `E` at `1e-6` and `1e6` against `growth_bound`.
pub fn check_coercivity(f: &ScaleFunction, growth_bound: f64) -> CoercivityReport {
    let probe = |l: f64| {
        let e = f.value(l);
        e.is_nan() || e.abs() > growth_bound
    };
    let (lower_expected, upper_expected) = f.coercive_analytic();
    CoercivityReport {
        lower_sampled: probe(1e-6),
        upper_sampled: probe(1e6),
        lower_expected,
        upper_expected,
    }
}

/// Generalized strain `sum_a E(lambda_a) M_a` from a decomposition of `C`,
/// whose eigenvalues are squared stretches.
pub fn strain_from_decomp(d: &SpectralDecomp, f: &ScaleFunction) -> SymTensor2 {
    d.map(|x| f.value(x.sqrt()))
}

pub fn generalized_strain(c: &SymTensor2, f: &ScaleFunction) -> Result<SymTensor2> {
    let d = crate::spectral::spectral_decompose(c)?;
    Ok(strain_from_decomp(&d, f))
}
