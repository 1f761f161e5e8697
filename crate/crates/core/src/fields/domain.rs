use serde::{Deserialize, Serialize};

use crate::linalg::halton;
use crate::{Error, Result, Vector};

/// Axis-aligned compact box `[lower, upper]` in `ℝ^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxDoc", into = "BoxDoc")]
pub struct AxisBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoxDoc {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxDoc> for AxisBox {
    type Error = Error;
    fn try_from(doc: BoxDoc) -> Result<Self> {
        AxisBox::new(doc.lower, doc.upper)
    }
}

impl From<AxisBox> for BoxDoc {
    fn from(b: AxisBox) -> Self {
        BoxDoc {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl AxisBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::EmptyBox);
        }
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        let ok = lower
            .iter()
            .zip(&upper)
            .all(|(l, u)| l.is_finite() && u.is_finite() && l <= u);
        if !ok {
            return Err(Error::EmptyBox);
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vector {
        Vector::from_iterator(
            self.dim(),
            self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)),
        )
    }

    pub fn widths(&self) -> Vector {
        Vector::from_iterator(self.dim(), self.lower.iter().zip(&self.upper).map(|(l, u)| u - l))
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Box grown by `radius` in every direction (contains the `radius`-ball
    /// around every point of `self`).
    pub fn inflate(&self, radius: f64) -> Result<Self> {
        Self::new(
            self.lower.iter().map(|l| l - radius).collect(),
            self.upper.iter().map(|u| u + radius).collect(),
        )
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vector {
        Vector::from_iterator(
            self.dim(),
            u.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(t, (l, h))| l + t * (h - l)),
        )
    }

    /// First `count` Halton points (indices `1..=count`) mapped into the box.
    /// Prefixes are nested.
    pub fn halton_points(&self, count: usize) -> Vec<Vector> {
        (1..=count as u64)
            .map(|i| self.from_unit(&halton(i, self.dim())))
            .collect()
    }

    /// All `2^d` vertices; empty when `d > 12`.
    pub fn corners(&self) -> Vec<Vector> {
        let d = self.dim();
        if d > 12 {
            return Vec::new();
        }
        (0..1usize << d)
            .map(|mask| {
                Vector::from_fn(d, |i, _| {
                    if mask >> i & 1 == 1 {
                        self.upper[i]
                    } else {
                        self.lower[i]
                    }
                })
            })
            .collect()
    }

    /// Deterministic probe set: vertices, center, then `count` Halton points.
    pub fn probe_points(&self, count: usize) -> Vec<Vector> {
        let mut pts = self.corners();
        pts.push(self.center());
        pts.extend(self.halton_points(count));
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_bounds() {
        assert!(matches!(AxisBox::new(vec![1.0], vec![0.0]), Err(Error::EmptyBox)));
        assert!(AxisBox::new(vec![], vec![]).is_err());
    }

    #[test]
    fn halton_points_stay_inside_and_nest() {
        let b = AxisBox::cube(3, -2.0, 2.0).unwrap();
        let a = b.halton_points(50);
        let c = b.halton_points(80);
        assert!(a.iter().all(|p| b.contains(p)));
        assert_eq!(a[..], c[..50]);
    }

    #[test]
    fn inflate_and_volume() {
        let b = AxisBox::cube(2, 0.0, 1.0).unwrap().inflate(0.5).unwrap();
        assert_eq!(b.volume(), 4.0);
        assert_eq!(b.corners().len(), 4);
    }
}
