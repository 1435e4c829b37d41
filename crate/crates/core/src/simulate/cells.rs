use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, unit_ball_volume, Domain, Shape};

/// One cell of an [`OccupationGrid`]: a radial shell `inner ≤ |x − c| < outer`
/// around the centre of a component, or for slabs a layer
/// `inner ≤ x_d < outer` of the laterally truncated slab.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub component: usize,
    pub inner: f64,
    pub outer: f64,
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Group {
    Shells {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    Layers {
        height: f64,
        lateral: f64,
    },
}

/// Equal-volume decomposition of a domain into cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationGrid {
    dimension: usize,
    per_group: usize,
    groups: Vec<Group>,
    cells: Vec<Cell>,
}

pub const DEFAULT_SHELLS: usize = 16;

impl OccupationGrid {
    /// `n` equal-volume radial shells per component; slabs are cut into `n`
    /// layers and need a lateral truncation.
    pub fn radial(dom: &Domain, n: usize, lateral: Option<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("occupation grid needs at least one cell".into()));
        }
        let d = dom.dimension;
        let groups = match &dom.shape {
            Shape::Ball { radius } => vec![Group::Shells {
                center: vec![0.0; d],
                inner: 0.0,
                outer: *radius,
            }],
            Shape::Annulus { inner, outer } => vec![Group::Shells {
                center: vec![0.0; d],
                inner: *inner,
                outer: *outer,
            }],
            Shape::UnionOfBalls { balls } => balls
                .iter()
                .map(|b| Group::Shells {
                    center: b.center.clone(),
                    inner: 0.0,
                    outer: b.radius,
                })
                .collect(),
            Shape::HalfSpaceSlab { height } => {
                let lateral = lateral.ok_or_else(|| {
                    Error::Geometry("slab occupation grid needs a lateral truncation".into())
                })?;
                vec![Group::Layers {
                    height: *height,
                    lateral,
                }]
            }
        };
        let mut cells = Vec::with_capacity(groups.len() * n);
        for (component, g) in groups.iter().enumerate() {
            match g {
                Group::Shells { inner, outer, .. } => {
                    let (lo, hi) = (inner.powi(d as i32), outer.powi(d as i32));
                    let vol = unit_ball_volume(d) * (hi - lo) / n as f64;
                    for k in 0..n {
                        let r = |j: usize| (lo + (hi - lo) * j as f64 / n as f64).powf(1.0 / d as f64);
                        cells.push(Cell {
                            component,
                            inner: if k == 0 { *inner } else { r(k) },
                            outer: if k + 1 == n { *outer } else { r(k + 1) },
                            volume: vol,
                        });
                    }
                }
                Group::Layers { height, lateral } => {
                    let vol = (2.0 * lateral).powi(d as i32 - 1) * height / n as f64;
                    for k in 0..n {
                        cells.push(Cell {
                            component,
                            inner: height * k as f64 / n as f64,
                            outer: height * (k + 1) as f64 / n as f64,
                            volume: vol,
                        });
                    }
                }
            }
        }
        Ok(Self {
            dimension: d,
            per_group: n,
            groups,
            cells,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Centre of the radial shell containing cell `k`; `None` for slab
    /// layers.
    pub fn shell_center(&self, k: usize) -> Option<&[f64]> {
        match self.groups.get(k / self.per_group)? {
            Group::Shells { center, .. } => Some(center),
            Group::Layers { .. } => None,
        }
    }

    /// Index of the cell containing `x`, if any.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let d = self.dimension;
        let n = self.per_group;
        for (g_idx, g) in self.groups.iter().enumerate() {
            match g {
                Group::Shells { center, inner, outer } => {
                    let rho = dist(x, center);
                    if rho >= *inner && rho < *outer {
                        let (lo, hi) = (inner.powi(d as i32), outer.powi(d as i32));
                        let frac = (rho.powi(d as i32) - lo) / (hi - lo);
                        let k = ((frac * n as f64) as usize).min(n - 1);
                        return Some(g_idx * n + k);
                    }
                }
                Group::Layers { height, lateral } => {
                    let t = x[d - 1];
                    let inside_lateral = x[..d - 1].iter().all(|v| v.abs() < *lateral);
                    if inside_lateral && t >= 0.0 && t < *height {
                        let k = ((t / height * n as f64) as usize).min(n - 1);
                        return Some(g_idx * n + k);
                    }
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ball;

    #[test]
    fn shells_have_equal_volume_and_cover_the_ball() {
        let dom = Domain::ball(1.0, 3).unwrap();
        let g = OccupationGrid::radial(&dom, 16, None).unwrap();
        assert_eq!(g.len(), 16);
        let total: f64 = g.cells().iter().map(|c| c.volume).sum();
        assert!((total - dom.volume()).abs() < 1e-12);
        assert_eq!(g.cells()[0].inner, 0.0);
        assert_eq!(g.cells()[15].outer, 1.0);
        assert!((g.cells()[0].outer - (1.0f64 / 16.0).cbrt()).abs() < 1e-15);
        assert_eq!(g.locate(&[0.0, 0.0, 0.0]), Some(0));
        assert_eq!(g.locate(&[0.999, 0.0, 0.0]), Some(15));
        assert_eq!(g.locate(&[1.0, 0.0, 0.0]), None);
    }

    #[test]
    fn locate_agrees_with_shell_bounds() {
        let dom = Domain::annulus(0.5, 2.0, 2).unwrap();
        let g = OccupationGrid::radial(&dom, 8, None).unwrap();
        for k in 0..400 {
            let rho = 0.5 + 1.5 * (k as f64 + 0.5) / 400.0;
            let idx = g.locate(&[0.0, rho]).unwrap();
            let c = &g.cells()[idx];
            assert!(rho >= c.inner && rho < c.outer);
        }
    }

    #[test]
    fn unions_get_shells_per_component() {
        let dom = Domain::union_of_balls(
            vec![Ball::new(vec![0.0, 0.0], 1.0), Ball::new(vec![5.0, 0.0], 0.5)],
            2,
        )
        .unwrap();
        let g = OccupationGrid::radial(&dom, 4, None).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.cells()[g.locate(&[5.1, 0.0]).unwrap()].component, 1);
    }

    #[test]
    fn slabs_need_lateral_truncation() {
        let dom = Domain::slab(1.0, 2).unwrap();
        assert!(OccupationGrid::radial(&dom, 4, None).is_err());
        let g = OccupationGrid::radial(&dom, 4, Some(3.0)).unwrap();
        assert_eq!(g.locate(&[0.0, 0.6]), Some(2));
        assert_eq!(g.locate(&[4.0, 0.6]), None);
        assert!((g.cells()[0].volume - 1.5).abs() < 1e-15);
    }
}
