//! JSON document schema for vector fields.
//!
//! ```json
//! {"dim": 2, "kind": "affine", "a": [[0, 1], [-1, 0]], "b": [0, 0]}
//! {"dim": 2, "kind": "separable", "activation": {"type": "relu"}, "active": [true, false]}
//! {"dim": 2, "kind": "conjugated", "outer": [[..]], "inner": [[..]], "shift": [..], "base": {..}}
//! {"dim": 2, "kind": "sum", "terms": [{"coeff": 2.0, "field": {..}}]}
//! {"dim": 2, "kind": "named", "name": "permute_relu"}
//! {"dim": 2, "kind": "marginal", "base": {..}, "radius": 8.0, "nodes": 400}
//! ```
//!
//! Matrices are row-major arrays of rows. `active` defaults to all `true`.

use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::field::{FieldKind, NamedField, VectorField};
use crate::{Error, Matrix, Result, Vector};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldDoc {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: KindDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KindDoc {
    Affine {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
    Separable {
        activation: Activation,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        active: Option<Vec<bool>>,
    },
    Conjugated {
        outer: Vec<Vec<f64>>,
        inner: Vec<Vec<f64>>,
        shift: Vec<f64>,
        base: Box<FieldDoc>,
    },
    Sum {
        terms: Vec<TermDoc>,
    },
    Named {
        name: NamedField,
    },
    Marginal {
        base: Box<FieldDoc>,
        radius: f64,
        nodes: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TermDoc {
    pub coeff: f64,
    pub field: FieldDoc,
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().cloned().collect()).collect()
}

pub fn rows_to_matrix(rows: &[Vec<f64>], dim: usize) -> Result<Matrix> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidField(format!("expected a {dim}x{dim} matrix")));
    }
    Ok(Matrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

fn vector_of(xs: &[f64], dim: usize) -> Result<Vector> {
    if xs.len() != dim {
        return Err(Error::InvalidField(format!(
            "expected a vector of length {dim}, got {}",
            xs.len()
        )));
    }
    Ok(Vector::from_column_slice(xs))
}

impl TryFrom<FieldDoc> for VectorField {
    type Error = Error;

    fn try_from(doc: FieldDoc) -> Result<Self> {
        let d = doc.dim;
        if d == 0 {
            return Err(Error::InvalidField("dim must be positive".into()));
        }
        let field = match doc.kind {
            KindDoc::Affine { a, b } => VectorField::affine(rows_to_matrix(&a, d)?, vector_of(&b, d)?)?,
            KindDoc::Separable { activation, active } => {
                let active = active.unwrap_or_else(|| vec![true; d]);
                if active.len() != d {
                    return Err(Error::InvalidField("active flags must have length dim".into()));
                }
                VectorField::separable(activation, active)?
            }
            KindDoc::Conjugated {
                outer,
                inner,
                shift,
                base,
            } => VectorField::conjugated(
                rows_to_matrix(&outer, d)?,
                rows_to_matrix(&inner, d)?,
                vector_of(&shift, d)?,
                VectorField::try_from(*base)?,
            )?,
            KindDoc::Sum { terms } => VectorField::sum(
                terms
                    .into_iter()
                    .map(|t| Ok((t.coeff, VectorField::try_from(t.field)?)))
                    .collect::<Result<Vec<_>>>()?,
            )?,
            KindDoc::Named { name } => VectorField::named(name, d)?,
            KindDoc::Marginal { base, radius, nodes } => {
                VectorField::marginal(VectorField::try_from(*base)?, radius, nodes)?
            }
        };
        if field.dim() != d {
            return Err(Error::InvalidField(format!(
                "declared dim {d} but nested fields have dim {}",
                field.dim()
            )));
        }
        Ok(field)
    }
}

impl From<VectorField> for FieldDoc {
    fn from(f: VectorField) -> Self {
        FieldDoc::from(&f)
    }
}

impl From<&VectorField> for FieldDoc {
    fn from(f: &VectorField) -> Self {
        let kind = match f.kind() {
            FieldKind::Affine { a, b } => KindDoc::Affine {
                a: matrix_to_rows(a),
                b: b.iter().cloned().collect(),
            },
            FieldKind::Separable { act, active } => KindDoc::Separable {
                activation: *act,
                active: if active.iter().all(|&x| x) {
                    None
                } else {
                    Some(active.clone())
                },
            },
            FieldKind::Conjugated {
                outer,
                inner,
                shift,
                base,
            } => KindDoc::Conjugated {
                outer: matrix_to_rows(outer),
                inner: matrix_to_rows(inner),
                shift: shift.iter().cloned().collect(),
                base: Box::new(FieldDoc::from(base.as_ref())),
            },
            FieldKind::Sum { terms } => KindDoc::Sum {
                terms: terms
                    .iter()
                    .map(|(c, f)| TermDoc {
                        coeff: *c,
                        field: FieldDoc::from(f),
                    })
                    .collect(),
            },
            FieldKind::Named(which) => KindDoc::Named { name: *which },
            FieldKind::Marginal { base, radius, nodes } => KindDoc::Marginal {
                base: Box::new(FieldDoc::from(base.as_ref())),
                radius: *radius,
                nodes: *nodes,
            },
        };
        FieldDoc { dim: f.dim(), kind }
    }
}
