//! Small dense linear-algebra kernels: matrix exponential, Halton points,
//! orthonormal frames and plane-rotation factorizations.

use crate::{Error, Matrix, Result, Vector};

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Largest 1-norms for which the degree-m approximant is accurate to unit roundoff.
const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn one_norm(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with diagonal Padé approximants
/// of degree 3, 5, 7, 9 or 13.
pub fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let norm = one_norm(a);
    if norm == 0.0 {
        return Matrix::identity(n, n);
    }
    for (theta, coeffs) in [
        (THETA3, &PADE3[..]),
        (THETA5, &PADE5[..]),
        (THETA7, &PADE7[..]),
        (THETA9, &PADE9[..]),
    ] {
        if norm <= theta {
            return pade_low(a, coeffs);
        }
    }
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * 2f64.powi(-s);
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn solve_pade(u: Matrix, v: Matrix) -> Matrix {
    let p = &v + &u;
    let q = &v - &u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular inside the theta bound")
}

fn pade_low(a: &Matrix, b: &[f64]) -> Matrix {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let mut even_pow = id.clone();
    let mut u_inner = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for k in (0..b.len()).step_by(2) {
        v += &even_pow * b[k];
        if k + 1 < b.len() {
            u_inner += &even_pow * b[k + 1];
        }
        even_pow = &even_pow * &a2;
    }
    solve_pade(a * u_inner, v)
}

fn pade13(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let b = &PADE13;
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_hi = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = a * (u_hi + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let v_hi = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_hi + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    solve_pade(u, v)
}

/// Largest singular value.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103,
    107, 109, 113, 127, 131,
];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % base) as f64;
        index /= base;
        f *= inv;
    }
    r
}

/// Point `index` (starting at 1) of the Halton sequence in `[0,1)^dim`.
///
/// Panics for `dim > 32`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(
        dim <= PRIMES.len(),
        "Halton sequence supports up to 32 dimensions"
    );
    PRIMES[..dim].iter().map(|&p| radical_inverse(index, p)).collect()
}

/// Orthonormal basis whose leading vectors span the given ones in order
/// (Gram–Schmidt, completed with coordinate vectors). Returned as the rows of a
/// rotation matrix, so the determinant is `+1`; the last row absorbs the sign.
pub fn oriented_frame(leading: &[Vector], dim: usize) -> Result<Matrix> {
    let mut basis: Vec<Vector> = Vec::with_capacity(dim);
    let candidates = leading
        .iter()
        .cloned()
        .chain((0..dim).map(|k| Vector::from_fn(dim, |i, _| if i == k { 1.0 } else { 0.0 })));
    for (pos, mut v) in candidates.enumerate() {
        if basis.len() == dim {
            break;
        }
        for b in &basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
        // second pass for orthogonality
        for b in &basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
        let norm = v.norm();
        if pos < leading.len() {
            if norm < 1e-12 {
                return Err(Error::DegenerateConfiguration(
                    "frame directions are linearly dependent".into(),
                ));
            }
        } else if norm < 0.5 {
            continue;
        }
        basis.push(v / norm);
    }
    let mut q = Matrix::zeros(dim, dim);
    for (i, b) in basis.iter().enumerate() {
        q.set_row(i, &b.transpose());
    }
    if q.determinant() < 0.0 {
        if leading.len() >= dim {
            return Err(Error::DegenerateConfiguration(
                "leading directions fix a negatively oriented frame".into(),
            ));
        }
        let mut last = q.row_mut(dim - 1);
        last *= -1.0;
    }
    Ok(q)
}

/// Plane rotation `(i, j, θ)`: the flow at unit time of `x ↦ θ (E_ji − E_ij) x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneRotation {
    pub i: usize,
    pub j: usize,
    pub angle: f64,
}

impl PlaneRotation {
    /// Skew generator `θ (E_ji − E_ij)`.
    pub fn generator(&self, dim: usize) -> Matrix {
        let mut k = Matrix::zeros(dim, dim);
        k[(self.j, self.i)] = self.angle;
        k[(self.i, self.j)] = -self.angle;
        k
    }

    pub fn matrix(&self, dim: usize) -> Matrix {
        let (s, c) = self.angle.sin_cos();
        let mut g = Matrix::identity(dim, dim);
        g[(self.i, self.i)] = c;
        g[(self.j, self.j)] = c;
        g[(self.j, self.i)] = s;
        g[(self.i, self.j)] = -s;
        g
    }
}

/// Factors a rotation `Q` (orthogonal, `det Q = +1`) into plane rotations
/// returned in application order: `Q x = R_last(⋯ R_first(x))`.
pub fn rotation_factors(q: &Matrix) -> Result<Vec<PlaneRotation>> {
    let d = q.nrows();
    if q.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.ncols(),
        });
    }
    let ortho_err = (q.transpose() * q - Matrix::identity(d, d)).amax();
    if ortho_err > 1e-9 || q.determinant() <= 0.0 {
        return Err(Error::InvalidArgument(
            "rotation_factors needs an orthogonal matrix with det +1".into(),
        ));
    }
    let mut m = q.clone();
    // eliminated in order G_1, G_2, …; then Q = G_1 ⋯ G_k D
    let mut eliminated = Vec::new();
    for c in 0..d {
        for r in (c + 1..d).rev() {
            let b = m[(r, c)];
            if b == 0.0 {
                continue;
            }
            let a = m[(c, c)];
            let rot = PlaneRotation {
                i: c,
                j: r,
                angle: b.atan2(a),
            };
            let gt = rot.matrix(d).transpose();
            m = gt * m;
            m[(r, c)] = 0.0;
            eliminated.push(rot);
        }
    }
    let negatives: Vec<usize> = (0..d).filter(|&k| m[(k, k)] < 0.0).collect();
    debug_assert!(negatives.len().is_multiple_of(2));
    let mut factors: Vec<PlaneRotation> = negatives
        .chunks(2)
        .map(|pair| PlaneRotation {
            i: pair[0],
            j: pair[1],
            angle: std::f64::consts::PI,
        })
        .collect();
    factors.extend(eliminated.into_iter().rev());
    Ok(factors)
}
