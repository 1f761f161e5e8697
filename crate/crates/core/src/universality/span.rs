//! Rank certificates for the lifted family `F^{⊗N}` at a configuration.
//!
//! A sampled field `g` contributes the row `(g(x₁), …, g(x_N)) ∈ ℝ^{dN}`,
//! laid out component-major: all first components, then all second
//! components, and so on. The family spans `ℝ^{dN}` at `X_N` exactly when
//! the stacked rows have full column rank.

use std::io::Write;

use nalgebra::SVD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result, Vector, VectorField};

/// Which affine-invariant family `S f(Wx + b)` is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanFamily {
    /// Dense `S`, `W`.
    Aff,
    /// Diagonal `S = D`, `W = Λ`.
    Diag,
}

pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-10;
/// Sampled entries lie in `[−SAMPLE_RANGE, SAMPLE_RANGE]`.
pub const SAMPLE_RANGE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanSampler {
    /// Rows to draw; `None` means `4·dN`.
    pub count: Option<usize>,
    pub seed: u64,
}

impl SpanSampler {
    pub fn seeded(seed: u64) -> Self {
        Self { count: None, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SpanVerdict {
    FullRank,
    /// `witness` is a unit co-vector annihilating every sampled row.
    Deficient {
        witness: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanCertificate {
    pub configuration: Vec<Vec<f64>>,
    pub family: SpanFamily,
    pub rows: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub verdict: SpanVerdict,
}

impl SpanCertificate {
    pub fn is_full_rank(&self) -> bool {
        matches!(self.verdict, SpanVerdict::FullRank)
    }

    pub fn witness(&self) -> Option<Vector> {
        match &self.verdict {
            SpanVerdict::Deficient { witness } => Some(Vector::from_column_slice(witness)),
            SpanVerdict::FullRank => None,
        }
    }

    pub fn rank(&self) -> usize {
        let top = self.singular_values.first().copied().unwrap_or(0.0);
        self.singular_values
            .iter()
            .filter(|s| **s > self.threshold * top)
            .count()
    }

    /// `index,sigma` table.
    pub fn write_singular_values_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,sigma")?;
        for (i, s) in self.singular_values.iter().enumerate() {
            writeln!(w, "{i},{s}")?;
        }
        Ok(())
    }
}

/// Field `k` of the family's sample sequence for `seed`. Each index has its
/// own generator stream, so rows do not depend on how many are drawn.
pub fn sample_family_member(
    f: &VectorField,
    family: SpanFamily,
    seed: u64,
    index: u64,
) -> Result<VectorField> {
    let d = f.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let u = Uniform::new_inclusive(-SAMPLE_RANGE, SAMPLE_RANGE);
    let (s, w) = match family {
        SpanFamily::Aff => (
            Matrix::from_fn(d, d, |_, _| u.sample(&mut rng)),
            Matrix::from_fn(d, d, |_, _| u.sample(&mut rng)),
        ),
        SpanFamily::Diag => (
            Matrix::from_diagonal(&Vector::from_fn(d, |_, _| u.sample(&mut rng))),
            Matrix::from_diagonal(&Vector::from_fn(d, |_, _| u.sample(&mut rng))),
        ),
    };
    let b = Vector::from_fn(d, |_, _| u.sample(&mut rng));
    VectorField::conjugated(s, w, b, f.clone())
}

/// `(g(x₁), …, g(x_N))`, component-major.
pub fn lifted_row(g: &VectorField, points: &[Vector]) -> Result<Vec<f64>> {
    let n = points.len();
    let d = g.dim();
    let mut row = vec![0.0; d * n];
    for (j, x) in points.iter().enumerate() {
        let v = g.eval(x)?;
        for k in 0..d {
            row[k * n + j] = v[k];
        }
    }
    Ok(row)
}

fn check_configuration(points: &[Vector], dim: usize) -> Result<()> {
    if points.is_empty() {
        return Err(Error::DegenerateConfiguration("empty configuration".into()));
    }
    for p in points {
        crate::error::check_dim(dim, p.len())?;
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i] == points[j] {
                return Err(Error::DegenerateConfiguration(format!(
                    "points {i} and {j} coincide"
                )));
            }
        }
    }
    Ok(())
}

pub fn span_certificate(
    f: &VectorField,
    family: SpanFamily,
    points: &[Vector],
    sampler: SpanSampler,
    threshold: f64,
) -> Result<SpanCertificate> {
    let d = f.dim();
    check_configuration(points, d)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument("threshold must lie in (0, 1)".into()));
    }
    let cols = d * points.len();
    let count = sampler.count.unwrap_or(4 * cols);
    if count < cols {
        return Err(Error::TooFewSamples {
            needed: cols,
            got: count,
        });
    }
    let rows = (0..count as u64)
        .map(|k| lifted_row(&sample_family_member(f, family, sampler.seed, k)?, points))
        .collect::<Result<Vec<_>>>()?;
    let m = Matrix::from_fn(count, cols, |i, j| rows[i][j]);
    let svd = SVD::new(m, false, true);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let top = sigma[0];
    let verdict = if top > 0.0 && sigma[cols - 1] > threshold * top {
        SpanVerdict::FullRank
    } else {
        let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
        let null: Vec<Vector> = order
            .iter()
            .zip(&sigma)
            .filter(|(_, s)| **s <= threshold * top)
            .map(|(&i, _)| v_t.row(i).transpose())
            .collect();
        SpanVerdict::Deficient {
            witness: canonical_null_vector(&null).iter().cloned().collect(),
        }
    };
    Ok(SpanCertificate {
        configuration: points.iter().map(|p| p.iter().cloned().collect()).collect(),
        family,
        rows,
        singular_values: sigma,
        threshold,
        verdict,
    })
}

/// The vector of the null space with the longest run of trailing zeros,
/// unit length, first nonzero entry positive.
///
/// Eliminates the basis from the last coordinate backwards; the final pivot
/// row vanishes on every coordinate to the right of its pivot.
fn canonical_null_vector(basis: &[Vector]) -> Vector {
    let mut rows: Vec<Vector> = basis.to_vec();
    let n = rows[0].len();
    let scale = rows.iter().map(|r| r.amax()).fold(0.0, f64::max);
    let tiny = 1e-9 * scale;
    let mut pivoted = 0;
    for col in (0..n).rev() {
        if pivoted == rows.len() {
            break;
        }
        let (best, mag) = (pivoted..rows.len())
            .map(|r| (r, rows[r][col].abs()))
            .fold((pivoted, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= tiny {
            continue;
        }
        rows.swap(pivoted, best);
        let p = rows[pivoted].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != pivoted {
                let factor = row[col] / p[col];
                *row -= &p * factor;
                row[col] = 0.0;
            }
        }
        pivoted += 1;
    }
    let mut v = rows[pivoted.max(1) - 1].clone();
    v /= v.norm();
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v = -v;
        }
    }
    v
}

/// True when every lifted row of `fresh` extra samples is annihilated by the
/// certificate's witness to within `threshold · σ_max`.
pub fn witness_holds_out_of_sample(
    cert: &SpanCertificate,
    f: &VectorField,
    fresh: usize,
    seed: u64,
) -> Result<bool> {
    let Some(c) = cert.witness() else {
        return Ok(true);
    };
    let points: Vec<Vector> = cert
        .configuration
        .iter()
        .map(|p| Vector::from_column_slice(p))
        .collect();
    let bound = cert.threshold * cert.singular_values[0];
    for k in 0..fresh as u64 {
        let g = sample_family_member(f, cert.family, seed, k)?;
        let row = Vector::from_vec(lifted_row(&g, &points)?);
        if row.dot(&c).abs() > bound {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Activation, NamedField};

    fn pts(xs: &[[f64; 2]]) -> Vec<Vector> {
        xs.iter().map(|p| Vector::from_row_slice(p)).collect()
    }

    #[test]
    fn single_sine_point_is_full_rank() {
        let f = VectorField::elementwise(Activation::Sin, 1).unwrap();
        let c = span_certificate(
            &f,
            SpanFamily::Diag,
            &[Vector::from_element(1, 0.3)],
            SpanSampler::seeded(1),
            DEFAULT_RANK_THRESHOLD,
        )
        .unwrap();
        assert!(c.is_full_rank());
        assert_eq!(c.rank(), 1);
        assert_eq!(c.rows.len(), 4);
    }

    #[test]
    fn symmetric_square_is_deficient_for_sinsum() {
        let f = VectorField::named(NamedField::Sinsum, 2).unwrap();
        let x = pts(&[[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]]);
        let c = span_certificate(
            &f,
            SpanFamily::Diag,
            &x,
            SpanSampler::seeded(7),
            DEFAULT_RANK_THRESHOLD,
        )
        .unwrap();
        let w = c.witness().expect("deficient");
        let want = Vector::from_vec(vec![0.5, -0.5, 0.5, -0.5, 0.0, 0.0, 0.0, 0.0]);
        assert!((w - want).amax() < 1e-6);
        assert_eq!(c.rank(), 6);
        assert!(witness_holds_out_of_sample(&c, &f, 100, 99).unwrap());
    }

    #[test]
    fn increasing_configuration_is_full_rank_for_sinsum() {
        let f = VectorField::named(NamedField::Sinsum, 2).unwrap();
        let x = pts(&[[-0.7, -1.1], [0.2, 0.4], [1.3, 0.9]]);
        let c = span_certificate(
            &f,
            SpanFamily::Diag,
            &x,
            SpanSampler::seeded(3),
            DEFAULT_RANK_THRESHOLD,
        )
        .unwrap();
        assert!(c.is_full_rank(), "{:?}", c.singular_values);
    }

    #[test]
    fn coincident_points_are_rejected() {
        let f = VectorField::named(NamedField::Sinsum, 2).unwrap();
        let x = pts(&[[0.0, 1.0], [0.0, 1.0]]);
        assert!(matches!(
            span_certificate(&f, SpanFamily::Aff, &x, SpanSampler::seeded(0), 1e-10),
            Err(Error::DegenerateConfiguration(_))
        ));
    }

    #[test]
    fn rows_are_independent_of_sample_count() {
        let f = VectorField::named(NamedField::Sinsum, 2).unwrap();
        let x = pts(&[[0.1, 0.2], [0.5, 0.9]]);
        let a = span_certificate(
            &f,
            SpanFamily::Aff,
            &x,
            SpanSampler {
                count: Some(8),
                seed: 5,
            },
            1e-10,
        )
        .unwrap();
        let b = span_certificate(
            &f,
            SpanFamily::Aff,
            &x,
            SpanSampler {
                count: Some(12),
                seed: 5,
            },
            1e-10,
        )
        .unwrap();
        assert_eq!(a.rows[..], b.rows[..8]);
    }

    #[test]
    fn canonical_vector_prefers_trailing_zeros() {
        let a = Vector::from_vec(vec![1.0, 1.0, 1.0]);
        let b = Vector::from_vec(vec![1.0, -1.0, 0.0]);
        let basis = [(&a + &b) / 3f64.sqrt(), (&a - &b * 2.0) / 2.0];
        let v = canonical_null_vector(&basis);
        let want = b / 2f64.sqrt();
        assert!((v - want).amax() < 1e-12);
    }
}
