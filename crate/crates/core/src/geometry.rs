//! Bounded and half-bounded `C^{1,1}` shapes with closed-form distance to the
//! complement.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Self { center, radius }
    }

    fn depth(&self, x: &[f64]) -> f64 {
        self.radius - dist(x, &self.center)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Ball { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    UnionOfBalls { balls: Vec<Ball> },
    /// `{0 < x_d < height}`, unbounded in the other coordinates.
    HalfSpaceSlab { height: f64 },
}

/// A domain in `ℝ^d`. Balls and annuli are centred at the origin; the
/// components of a union carry their own centres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub shape: Shape,
    pub dimension: usize,
}

/// `C^{1,1}` characteristics: uniform ball radius `R` and `Λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Characteristics {
    pub radius: f64,
    pub lambda: f64,
}

impl Domain {
    pub fn new(shape: Shape, dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Geometry("dimension must be at least 1".into()));
        }
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Geometry(format!("{what} = {v} must be positive")))
            }
        };
        match &shape {
            Shape::Ball { radius } => positive(*radius, "radius")?,
            Shape::Annulus { inner, outer } => {
                positive(*inner, "inner radius")?;
                if !(outer > inner && outer.is_finite()) {
                    return Err(Error::Geometry(format!(
                        "annulus needs 0 < inner < outer, got {inner}, {outer}"
                    )));
                }
            }
            Shape::UnionOfBalls { balls } => {
                if balls.is_empty() {
                    return Err(Error::Geometry("union of balls is empty".into()));
                }
                for b in balls {
                    positive(b.radius, "radius")?;
                    if b.center.len() != dimension {
                        return Err(Error::Geometry(format!(
                            "ball centre has {} coordinates, expected {dimension}",
                            b.center.len()
                        )));
                    }
                }
                for (i, a) in balls.iter().enumerate() {
                    for b in &balls[i + 1..] {
                        let gap = dist(&a.center, &b.center) - a.radius - b.radius;
                        if gap <= 0.0 {
                            return Err(Error::Geometry(format!(
                                "balls at {:?} and {:?} are not separated (gap {gap})",
                                a.center, b.center
                            )));
                        }
                    }
                }
            }
            Shape::HalfSpaceSlab { height } => positive(*height, "slab height")?,
        }
        Ok(Self { shape, dimension })
    }

    pub fn ball(radius: f64, dimension: usize) -> Result<Self> {
        Self::new(Shape::Ball { radius }, dimension)
    }

    pub fn annulus(inner: f64, outer: f64, dimension: usize) -> Result<Self> {
        Self::new(Shape::Annulus { inner, outer }, dimension)
    }

    pub fn union_of_balls(balls: Vec<Ball>, dimension: usize) -> Result<Self> {
        Self::new(Shape::UnionOfBalls { balls }, dimension)
    }

    pub fn slab(height: f64, dimension: usize) -> Result<Self> {
        Self::new(Shape::HalfSpaceSlab { height }, dimension)
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self.shape, Shape::HalfSpaceSlab { .. })
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension {
            return Err(Error::Geometry(format!(
                "point has {} coordinates, domain dimension is {}",
                x.len(),
                self.dimension
            )));
        }
        Ok(())
    }

    /// Distance from `x` to the complement; zero exactly off the domain.
    pub fn dist_to_complement(&self, x: &[f64]) -> f64 {
        let d = match &self.shape {
            Shape::Ball { radius } => radius - norm(x),
            Shape::Annulus { inner, outer } => {
                let rho = norm(x);
                (rho - inner).min(outer - rho)
            }
            Shape::UnionOfBalls { balls } => balls
                .iter()
                .map(|b| b.depth(x))
                .fold(f64::NEG_INFINITY, f64::max),
            Shape::HalfSpaceSlab { height } => {
                let t = x[self.dimension - 1];
                t.min(height - t)
            }
        };
        d.max(0.0)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.dist_to_complement(x) > 0.0
    }

    /// Index of the connected component containing `x`.
    pub fn component_of(&self, x: &[f64]) -> Option<usize> {
        match &self.shape {
            Shape::UnionOfBalls { balls } => balls.iter().position(|b| b.depth(x) > 0.0),
            _ => self.contains(x).then_some(0),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius } => 2.0 * radius,
            Shape::Annulus { outer, .. } => 2.0 * outer,
            Shape::UnionOfBalls { balls } => {
                let mut best: f64 = 0.0;
                for (i, a) in balls.iter().enumerate() {
                    best = best.max(2.0 * a.radius);
                    for b in &balls[i + 1..] {
                        best = best.max(dist(&a.center, &b.center) + a.radius + b.radius);
                    }
                }
                best
            }
            Shape::HalfSpaceSlab { .. } => f64::INFINITY,
        }
    }

    pub fn characteristics(&self) -> Characteristics {
        let radius = match &self.shape {
            Shape::Ball { radius } => *radius,
            Shape::Annulus { inner, .. } => *inner,
            Shape::UnionOfBalls { balls } => {
                let mut r = balls.iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
                for (i, a) in balls.iter().enumerate() {
                    for b in &balls[i + 1..] {
                        r = r.min(dist(&a.center, &b.center) - a.radius - b.radius);
                    }
                }
                r
            }
            Shape::HalfSpaceSlab { height } => height / 2.0,
        };
        Characteristics { radius, lambda: 0.0 }
    }

    /// Axis-aligned bounding box `(lo, hi)`; slabs are truncated laterally at
    /// `±lateral` when given.
    pub fn bounding_box(&self, lateral: Option<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.dimension;
        Ok(match &self.shape {
            Shape::Ball { radius } => (vec![-radius; d], vec![*radius; d]),
            Shape::Annulus { outer, .. } => (vec![-outer; d], vec![*outer; d]),
            Shape::UnionOfBalls { balls } => {
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for b in balls {
                    for k in 0..d {
                        lo[k] = lo[k].min(b.center[k] - b.radius);
                        hi[k] = hi[k].max(b.center[k] + b.radius);
                    }
                }
                (lo, hi)
            }
            Shape::HalfSpaceSlab { height } => {
                let w = lateral.ok_or_else(|| {
                    Error::Geometry("slab is unbounded; a lateral truncation is required".into())
                })?;
                let mut lo = vec![-w; d];
                let mut hi = vec![w; d];
                lo[d - 1] = 0.0;
                hi[d - 1] = *height;
                (lo, hi)
            }
        })
    }

    /// `n` points uniform in the domain, by rejection from the bounding box.
    pub fn sample_interior<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        n: usize,
        lateral: Option<f64>,
    ) -> Result<Vec<Vec<f64>>> {
        let (lo, hi) = self.bounding_box(lateral)?;
        let budget = 1_000_000usize.saturating_mul(n.max(1));
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n {
            if attempts >= budget {
                return Err(Error::Geometry(format!(
                    "rejection sampling produced {} of {n} points in {budget} attempts",
                    out.len()
                )));
            }
            attempts += 1;
            let x: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            if self.contains(&x) {
                out.push(x);
            }
        }
        Ok(out)
    }

    /// Checked variant of [`Domain::dist_to_complement`].
    pub fn delta(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.dist_to_complement(x))
    }

    /// Lebesgue measure (infinite for slabs).
    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius } => unit_ball_volume(self.dimension) * radius.powi(self.dimension as i32),
            Shape::Annulus { inner, outer } => {
                let d = self.dimension as i32;
                unit_ball_volume(self.dimension) * (outer.powi(d) - inner.powi(d))
            }
            Shape::UnionOfBalls { balls } => balls
                .iter()
                .map(|b| unit_ball_volume(self.dimension) * b.radius.powi(self.dimension as i32))
                .sum(),
            Shape::HalfSpaceSlab { .. } => f64::INFINITY,
        }
    }
}

/// Volume of the unit ball in `ℝ^d`, by the two-step recursion
/// `ω_d = 2π/d · ω_{d−2}`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

/// Surface area of the unit sphere in `ℝ^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    d as f64 * unit_ball_volume(d)
}

fn parse_number(tok: &str) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| Error::parse(tok.trim(), "not a number"))
}

fn parse_point(tok: &str) -> Result<Vec<f64>> {
    let inner = tok
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| Error::parse(tok.trim(), "expected a point like (x,y,z)"))?;
    inner.split(',').map(parse_number).collect()
}

/// A domain literal before the dimension is attached:
/// `ball:r`, `annulus:r1:r2`, `balls:[(c),r;(c),r;...]`, `slab:h`.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainLiteral(pub Shape);

impl FromStr for DomainLiteral {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::parse(s, "expected `<kind>:<parameters>`"))?;
        let shape = match kind {
            "ball" => Shape::Ball {
                radius: parse_number(rest)?,
            },
            "annulus" => {
                let (a, b) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::parse(rest, "expected `r1:r2`"))?;
                Shape::Annulus {
                    inner: parse_number(a)?,
                    outer: parse_number(b)?,
                }
            }
            "balls" => {
                let body = rest
                    .trim()
                    .strip_prefix('[')
                    .and_then(|t| t.strip_suffix(']'))
                    .ok_or_else(|| Error::parse(rest, "expected `[(c),r;...]`"))?;
                let mut balls = Vec::new();
                for item in body.split(';').filter(|t| !t.trim().is_empty()) {
                    let close = item
                        .rfind(')')
                        .ok_or_else(|| Error::parse(item.trim(), "expected `(c),r`"))?;
                    let (center, radius) = item.split_at(close + 1);
                    let radius = radius
                        .trim()
                        .strip_prefix(',')
                        .ok_or_else(|| Error::parse(item.trim(), "expected `,r` after centre"))?;
                    balls.push(Ball::new(parse_point(center)?, parse_number(radius)?));
                }
                Shape::UnionOfBalls { balls }
            }
            "slab" => Shape::HalfSpaceSlab {
                height: parse_number(rest)?,
            },
            other => return Err(Error::parse(other, "unknown domain kind")),
        };
        Ok(DomainLiteral(shape))
    }
}

impl Domain {
    /// Parses a domain literal for the given dimension.
    pub fn parse(literal: &str, dimension: usize) -> Result<Self> {
        let DomainLiteral(shape) = literal.parse()?;
        Domain::new(shape, dimension)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Ball { radius } => write!(f, "ball:{radius}"),
            Shape::Annulus { inner, outer } => write!(f, "annulus:{inner}:{outer}"),
            Shape::UnionOfBalls { balls } => {
                let items: Vec<String> = balls
                    .iter()
                    .map(|b| {
                        let c: Vec<String> = b.center.iter().map(|v| v.to_string()).collect();
                        format!("({}),{}", c.join(","), b.radius)
                    })
                    .collect();
                write!(f, "balls:[{}]", items.join(";"))
            }
            Shape::HalfSpaceSlab { height } => write!(f, "slab:{height}"),
        }
    }
}
