use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::taylor::Series;
use crate::error::{Error, Result};

/// Deepest supported nesting of the iterated geometric stable family.
pub const MAX_ITERATION_DEPTH: u32 = 4;

/// Which closed form to use for the relativistic geometric stable exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RelativisticVariant {
    /// `log(1 + (λ + m^{2/α})^{α/2} − m)`: logarithm of the relativistic
    /// stable exponent, a complete Bernstein function.
    #[default]
    Standard,
    /// `log(1 + (λ + m^{α/2})^{2/α} − m)`, with the exponents as printed.
    /// The inner power is convex, so this is not a Bernstein function; it
    /// exists so the checkers can show that.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `λ^{α/2}`, 0 < α < 2.
    Stable { alpha: f64 },
    /// `log(1 + λ^{α/2})`, 0 < α ≤ 2.
    GeometricStable { alpha: f64 },
    /// `φ₁ ∘ … ∘ φ₁` (`depth` copies) with `φ₁` the geometric stable exponent.
    IteratedGeometricStable { alpha: f64, depth: u32 },
    RelativisticGeometricStable {
        alpha: f64,
        mass: f64,
        #[serde(default)]
        variant: RelativisticVariant,
    },
    /// `log(1 + λ)`, the gamma subordinator.
    Gamma,
}

/// A validated Laplace exponent of a driftless subordinator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Family", into = "Family")]
pub struct LaplaceExponentSpec {
    family: Family,
}

impl TryFrom<Family> for LaplaceExponentSpec {
    type Error = Error;
    fn try_from(family: Family) -> Result<Self> {
        LaplaceExponentSpec::new(family)
    }
}

impl From<LaplaceExponentSpec> for Family {
    fn from(spec: LaplaceExponentSpec) -> Family {
        spec.family
    }
}

/// Value and first two derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

fn check_alpha(alpha: f64, max: f64, inclusive: bool) -> Result<()> {
    let ok = alpha.is_finite() && alpha > 0.0 && if inclusive { alpha <= max } else { alpha < max };
    if ok {
        Ok(())
    } else {
        let bracket = if inclusive { "]" } else { ")" };
        Err(Error::InvalidParameter(format!(
            "alpha = {alpha} must lie in (0, {max}{bracket}"
        )))
    }
}

/// `ln(1 + e^v)` without overflow.
fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// `ln(softplus(v))`, accurate for very negative `v` where softplus underflows.
fn ln_softplus(v: f64) -> f64 {
    if v < -30.0 {
        v - 0.5 * v.exp()
    } else {
        softplus(v).ln()
    }
}

/// `u ↦ log(1 + u^a)` with derivatives.
fn geom_jet(a: f64, u: f64) -> Jet {
    let w = u.powf(a);
    let value = w.ln_1p();
    let d1 = a * u.powf(a - 1.0) / (1.0 + w);
    let d2 = a * u.powf(a - 2.0) * ((a - 1.0) - w) / ((1.0 + w) * (1.0 + w));
    Jet { value, d1, d2 }
}

/// `λ ↦ m·((1 + λ/c)^p − 1)` where `c^p = m`, i.e. `(λ + c)^p − m`.
fn shifted_power_jet(p: f64, c: f64, m: f64, lambda: f64) -> Jet {
    let value = m * (p * (lambda / c).ln_1p()).exp_m1();
    let base = lambda + c;
    let d1 = p * base.powf(p - 1.0);
    let d2 = p * (p - 1.0) * base.powf(p - 2.0);
    Jet { value, d1, d2 }
}

/// `log(1 + ψ)` composed with a jet of `ψ`.
fn log1p_of(inner: Jet) -> Jet {
    let denom = 1.0 + inner.value;
    let d1 = inner.d1 / denom;
    Jet {
        value: inner.value.ln_1p(),
        d1,
        d2: inner.d2 / denom - d1 * d1,
    }
}

impl LaplaceExponentSpec {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::Stable { alpha } => check_alpha(alpha, 2.0, false)?,
            Family::GeometricStable { alpha } => check_alpha(alpha, 2.0, true)?,
            Family::IteratedGeometricStable { alpha, depth } => {
                check_alpha(alpha, 2.0, true)?;
                if depth == 0 || depth > MAX_ITERATION_DEPTH {
                    return Err(Error::InvalidParameter(format!(
                        "iteration depth {depth} must lie in 1..={MAX_ITERATION_DEPTH}"
                    )));
                }
            }
            Family::RelativisticGeometricStable { alpha, mass, .. } => {
                check_alpha(alpha, 2.0, false)?;
                if !(mass.is_finite() && mass > 0.0) {
                    return Err(Error::InvalidParameter(format!("mass = {mass} must be positive")));
                }
            }
            Family::Gamma => {}
        }
        Ok(Self { family })
    }

    pub fn stable(alpha: f64) -> Result<Self> {
        Self::new(Family::Stable { alpha })
    }

    pub fn geometric_stable(alpha: f64) -> Result<Self> {
        Self::new(Family::GeometricStable { alpha })
    }

    pub fn iterated_geometric_stable(alpha: f64, depth: u32) -> Result<Self> {
        Self::new(Family::IteratedGeometricStable { alpha, depth })
    }

    pub fn relativistic_geometric_stable(alpha: f64, mass: f64) -> Result<Self> {
        Self::new(Family::RelativisticGeometricStable {
            alpha,
            mass,
            variant: RelativisticVariant::Standard,
        })
    }

    pub fn gamma() -> Self {
        Self {
            family: Family::Gamma,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// The drift coefficient; every supported family is driftless.
    pub fn drift(&self) -> f64 {
        0.0
    }

    /// True when the exponent is a genuine (complete) Bernstein function, so
    /// that a subordinator with this exponent exists.
    pub fn is_subordinator(&self) -> bool {
        !matches!(
            self.family,
            Family::RelativisticGeometricStable {
                variant: RelativisticVariant::Literal,
                ..
            }
        )
    }

    /// Stable-type index `α/2` of the underlying power, when there is one.
    pub fn half_alpha(&self) -> Option<f64> {
        match self.family {
            Family::Stable { alpha }
            | Family::GeometricStable { alpha }
            | Family::IteratedGeometricStable { alpha, .. }
            | Family::RelativisticGeometricStable { alpha, .. } => Some(alpha / 2.0),
            Family::Gamma => None,
        }
    }

    fn check_lambda(op: &'static str, lambda: f64) -> Result<()> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::domain(op, format!("λ = {lambda} must be positive and finite")))
        }
    }

    pub(crate) fn jet(&self, lambda: f64) -> Jet {
        match self.family {
            Family::Stable { alpha } => {
                let a = alpha / 2.0;
                Jet {
                    value: lambda.powf(a),
                    d1: a * lambda.powf(a - 1.0),
                    d2: a * (a - 1.0) * lambda.powf(a - 2.0),
                }
            }
            Family::GeometricStable { alpha } => geom_jet(alpha / 2.0, lambda),
            Family::Gamma => geom_jet(1.0, lambda),
            Family::IteratedGeometricStable { alpha, depth } => {
                let a = alpha / 2.0;
                let mut inner = geom_jet(a, lambda);
                for _ in 1..depth {
                    let outer = geom_jet(a, inner.value);
                    inner = Jet {
                        value: outer.value,
                        d1: outer.d1 * inner.d1,
                        d2: outer.d2 * inner.d1 * inner.d1 + outer.d1 * inner.d2,
                    };
                }
                inner
            }
            Family::RelativisticGeometricStable {
                alpha,
                mass,
                variant,
            } => {
                let a = alpha / 2.0;
                let (p, c) = match variant {
                    RelativisticVariant::Standard => (a, mass.powf(1.0 / a)),
                    RelativisticVariant::Literal => (1.0 / a, mass.powf(a)),
                };
                log1p_of(shifted_power_jet(p, c, mass, lambda))
            }
        }
    }

    /// `[φ, φ', φ'', φ''', φ'''']` at `λ` by exact Taylor arithmetic.
    pub(crate) fn taylor(&self, lambda: f64) -> [f64; 5] {
        let x = Series::variable(lambda);
        let series = match self.family {
            Family::Stable { alpha } => x.powf(alpha / 2.0),
            Family::GeometricStable { alpha } => x.powf(alpha / 2.0).ln_1p(),
            Family::Gamma => x.ln_1p(),
            Family::IteratedGeometricStable { alpha, depth } => {
                (0..depth).fold(x, |s, _| s.powf(alpha / 2.0).ln_1p())
            }
            Family::RelativisticGeometricStable {
                alpha,
                mass,
                variant,
            } => {
                let a = alpha / 2.0;
                let (p, c) = match variant {
                    RelativisticVariant::Standard => (a, mass.powf(1.0 / a)),
                    RelativisticVariant::Literal => (1.0 / a, mass.powf(a)),
                };
                let psi = shifted_power_jet(p, c, mass, lambda).value;
                x.shift(c).powf(p).with_value(psi).ln_1p()
            }
        };
        series.derivatives()
    }

    /// Unchecked `φ(λ)`; callers guarantee `λ > 0`.
    #[inline]
    pub(crate) fn value(&self, lambda: f64) -> f64 {
        match self.family {
            Family::Stable { alpha } => lambda.powf(alpha / 2.0),
            Family::GeometricStable { alpha } => lambda.powf(alpha / 2.0).ln_1p(),
            Family::Gamma => lambda.ln_1p(),
            _ => self.jet(lambda).value,
        }
    }

    pub fn phi(&self, lambda: f64) -> Result<f64> {
        Self::check_lambda("phi", lambda)?;
        Ok(self.value(lambda))
    }

    pub fn phi_prime(&self, lambda: f64) -> Result<f64> {
        Self::check_lambda("phi_prime", lambda)?;
        Ok(self.jet(lambda).d1)
    }

    pub fn phi_second(&self, lambda: f64) -> Result<f64> {
        Self::check_lambda("phi_second", lambda)?;
        Ok(self.jet(lambda).d2)
    }

    /// `(ln φ, ln φ')` at `λ = e^{ln_lambda}`, valid far outside the range
    /// where `λ` itself is representable.
    pub fn ln_phi_and_prime(&self, ln_lambda: f64) -> (f64, f64) {
        fn geom_ln(a: f64, ln_u: f64) -> (f64, f64) {
            let v = a * ln_u;
            (ln_softplus(v), a.ln() + (a - 1.0) * ln_u - softplus(v))
        }
        match self.family {
            Family::Stable { alpha } => {
                let a = alpha / 2.0;
                (a * ln_lambda, a.ln() + (a - 1.0) * ln_lambda)
            }
            Family::GeometricStable { alpha } => geom_ln(alpha / 2.0, ln_lambda),
            Family::Gamma => geom_ln(1.0, ln_lambda),
            Family::IteratedGeometricStable { alpha, depth } => {
                let a = alpha / 2.0;
                let (mut ln_v, mut ln_d) = geom_ln(a, ln_lambda);
                for _ in 1..depth {
                    let (v, d) = geom_ln(a, ln_v);
                    ln_v = v;
                    ln_d += d;
                }
                (ln_v, ln_d)
            }
            Family::RelativisticGeometricStable {
                alpha,
                mass,
                variant,
            } => {
                let a = alpha / 2.0;
                let (p, c) = match variant {
                    RelativisticVariant::Standard => (a, mass.powf(1.0 / a)),
                    RelativisticVariant::Literal => (1.0 / a, mass.powf(a)),
                };
                let ln_c = c.ln();
                let ln_base = if ln_lambda > ln_c {
                    ln_lambda + (c * (-ln_lambda).exp()).ln_1p()
                } else {
                    ln_c + (ln_lambda - ln_c).exp().ln_1p()
                };
                // φ = ln(1 + ψ) with 1 + ψ = e^z + 1 − m
                let z = p * ln_base;
                let phi = if z > 30.0 {
                    z + ((1.0 - mass) * (-z).exp()).ln_1p()
                } else {
                    shifted_power_jet(p, c, mass, ln_lambda.exp()).value.ln_1p()
                };
                (phi.ln(), p.ln() + (p - 1.0) * ln_base - phi)
            }
        }
    }

    /// Canonical string id, e.g. `geom{alpha=1}`.
    pub fn id(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for LaplaceExponentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Stable { alpha } => write!(f, "stable{{alpha={alpha}}}"),
            Family::GeometricStable { alpha } => write!(f, "geom{{alpha={alpha}}}"),
            Family::IteratedGeometricStable { alpha, depth } => {
                write!(f, "itgeom{{alpha={alpha},n={depth}}}")
            }
            Family::RelativisticGeometricStable {
                alpha,
                mass,
                variant,
            } => match variant {
                RelativisticVariant::Standard => write!(f, "relgeom{{alpha={alpha},m={mass}}}"),
                RelativisticVariant::Literal => {
                    write!(f, "relgeom{{alpha={alpha},m={mass},variant=literal}}")
                }
            },
            Family::Gamma => write!(f, "gamma"),
        }
    }
}

/// Parses `stable{alpha=1}`, `geom{alpha=1}`, `itgeom{alpha=1,n=2}`,
/// `relgeom{alpha=1,m=1}` (optionally `variant=literal`) and `gamma`.
/// Bare positional values (`stable{1}`, `itgeom{1,2}`) are accepted too.
impl FromStr for LaplaceExponentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, body) = match s.find('{') {
            Some(open) => {
                let rest = &s[open + 1..];
                let body = rest
                    .strip_suffix('}')
                    .ok_or_else(|| Error::parse(s, "missing closing `}`"))?;
                (&s[..open], body)
            }
            None => (s, ""),
        };
        let mut named = Vec::new();
        for (i, item) in body.split(',').map(str::trim).filter(|t| !t.is_empty()).enumerate() {
            let (key, val) = match item.split_once('=') {
                Some((k, v)) => (k.trim().to_string(), v.trim()),
                None => (format!("#{i}"), item),
            };
            named.push((key, val.to_string()));
        }
        let lookup = |keys: &[&str], pos: usize| -> Option<&String> {
            let positional = format!("#{pos}");
            named
                .iter()
                .find(|(k, _)| keys.contains(&k.as_str()) || *k == positional)
                .map(|(_, v)| v)
        };
        let number = |keys: &[&str], pos: usize| -> Result<f64> {
            let raw = lookup(keys, pos)
                .ok_or_else(|| Error::parse(s, format!("missing parameter `{}`", keys[0])))?;
            raw.parse::<f64>()
                .map_err(|_| Error::parse(raw.clone(), "not a number"))
        };
        let family = match name.trim() {
            "stable" => Family::Stable {
                alpha: number(&["alpha", "a"], 0)?,
            },
            "geom" => Family::GeometricStable {
                alpha: number(&["alpha", "a"], 0)?,
            },
            "itgeom" => {
                let n = number(&["n", "depth"], 1)?;
                if n.fract() != 0.0 || n < 1.0 {
                    return Err(Error::parse(n.to_string(), "depth must be a positive integer"));
                }
                Family::IteratedGeometricStable {
                    alpha: number(&["alpha", "a"], 0)?,
                    depth: n as u32,
                }
            }
            "relgeom" => {
                let variant = match lookup(&["variant"], 2).map(String::as_str) {
                    None | Some("standard") => RelativisticVariant::Standard,
                    Some("literal") => RelativisticVariant::Literal,
                    Some(other) => {
                        return Err(Error::parse(other, "variant must be `standard` or `literal`"))
                    }
                };
                Family::RelativisticGeometricStable {
                    alpha: number(&["alpha", "a"], 0)?,
                    mass: number(&["m", "mass"], 1)?,
                    variant,
                }
            }
            "gamma" => Family::Gamma,
            other => return Err(Error::parse(other, "unknown family id")),
        };
        LaplaceExponentSpec::new(family)
    }
}
