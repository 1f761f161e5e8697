use serde::{Deserialize, Serialize};

use super::closed::FlowMap;
use super::integrator::IntegratorConfig;
use crate::error::check_dim;
use crate::fields::VectorField;
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    /// Flow of `−f` for the leg's duration.
    Backward,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// One flow `φ_{±f}^τ` of a program.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "LegDoc")]
pub struct Leg {
    pub field: VectorField,
    pub duration: f64,
    pub direction: Direction,
}

#[derive(Deserialize)]
struct LegDoc {
    field: VectorField,
    duration: f64,
    #[serde(default = "forward")]
    direction: Direction,
}

fn forward() -> Direction {
    Direction::Forward
}

impl TryFrom<LegDoc> for Leg {
    type Error = Error;

    fn try_from(doc: LegDoc) -> Result<Self> {
        Leg::new(doc.field, doc.duration, doc.direction)
    }
}

impl Leg {
    pub fn new(field: VectorField, duration: f64, direction: Direction) -> Result<Self> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "leg duration must be finite and nonnegative, got {duration}"
            )));
        }
        Ok(Self {
            field,
            duration,
            direction,
        })
    }

    pub fn forward(field: VectorField, duration: f64) -> Result<Self> {
        Self::new(field, duration, Direction::Forward)
    }

    pub fn backward(field: VectorField, duration: f64) -> Result<Self> {
        Self::new(field, duration, Direction::Backward)
    }

    /// The field actually integrated forward: `f` or `−f`.
    pub fn effective_field(&self) -> VectorField {
        match self.direction {
            Direction::Forward => self.field.clone(),
            Direction::Backward => self.field.negated(),
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            field: self.field.clone(),
            duration: self.duration,
            direction: self.direction.flipped(),
        }
    }
}

/// `φ_{f_n}^{τ_n} ∘ ⋯ ∘ φ_{f_1}^{τ_1}`, applied first leg first.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "ProgramDoc")]
pub struct FlowProgram {
    dim: usize,
    legs: Vec<Leg>,
}

#[derive(Deserialize)]
struct ProgramDoc {
    dim: usize,
    #[serde(default)]
    legs: Vec<Leg>,
}

impl TryFrom<ProgramDoc> for FlowProgram {
    type Error = Error;

    fn try_from(doc: ProgramDoc) -> Result<Self> {
        let mut p = FlowProgram::identity(doc.dim)?;
        for leg in doc.legs {
            p.push(leg)?;
        }
        Ok(p)
    }
}

impl FlowProgram {
    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            legs: Vec::new(),
        })
    }

    pub fn from_legs(dim: usize, legs: Vec<Leg>) -> Result<Self> {
        let mut p = Self::identity(dim)?;
        for leg in legs {
            p.push(leg)?;
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    /// Appends a leg applied after the existing ones.
    pub fn push(&mut self, leg: Leg) -> Result<()> {
        check_dim(self.dim, leg.field.dim())?;
        self.legs.push(leg);
        Ok(())
    }

    pub fn push_forward(&mut self, field: VectorField, duration: f64) -> Result<()> {
        self.push(Leg::forward(field, duration)?)
    }

    /// `next ∘ self`.
    pub fn then(mut self, next: &FlowProgram) -> Result<Self> {
        check_dim(self.dim, next.dim)?;
        self.legs.extend(next.legs.iter().cloned());
        Ok(self)
    }

    pub fn invert(&self) -> Self {
        Self {
            dim: self.dim,
            legs: self.legs.iter().rev().map(Leg::inverse).collect(),
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.legs.iter().map(|l| l.duration).sum()
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        self.apply_with(x, &IntegratorConfig::default())
    }

    pub fn apply_with(&self, x: &Vector, cfg: &IntegratorConfig) -> Result<Vector> {
        self.compile(cfg)?.apply(x)
    }

    /// Prepares every leg once for evaluation at many points.
    pub fn compile(&self, cfg: &IntegratorConfig) -> Result<CompiledProgram> {
        let maps = self
            .legs
            .iter()
            .enumerate()
            .map(|(i, leg)| FlowMap::new(&leg.effective_field(), leg.duration, cfg).map_err(|e| e.at_leg(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(CompiledProgram { dim: self.dim, maps })
    }
}

impl Serialize for Leg {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Leg", 3)?;
        st.serialize_field("field", &self.field)?;
        st.serialize_field("duration", &self.duration)?;
        st.serialize_field("direction", &self.direction)?;
        st.end()
    }
}

impl Serialize for FlowProgram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FlowProgram", 2)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("legs", &self.legs)?;
        st.end()
    }
}

/// A [`FlowProgram`] with each leg's flow map prepared.
#[derive(Debug, Clone)]
pub struct CompiledProgram {
    dim: usize,
    maps: Vec<FlowMap>,
}

impl CompiledProgram {
    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.dim, x.len())?;
        let mut y = x.clone();
        for (i, m) in self.maps.iter().enumerate() {
            y = m.apply(&y).map_err(|e| e.at_leg(i))?;
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Matrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn empty_program_is_identity() {
        let p = FlowProgram::identity(2).unwrap();
        assert_eq!(p.apply(&v(&[1.5, -2.0])).unwrap(), v(&[1.5, -2.0]));
        assert!(p.invert().is_empty());
    }

    #[test]
    fn opposite_translations_cancel() {
        let mut p = FlowProgram::identity(2).unwrap();
        p.push_forward(VectorField::constant(v(&[1.0, 0.0])).unwrap(), 1.0)
            .unwrap();
        p.push_forward(VectorField::constant(v(&[-1.0, 0.0])).unwrap(), 1.0)
            .unwrap();
        let x = v(&[0.3, 0.9]);
        assert!((p.apply(&x).unwrap() - x).amax() < 1e-15);
    }

    #[test]
    fn relu_then_negrelu_is_identity() {
        let ln2 = 2f64.ln();
        let mut p = FlowProgram::identity(2).unwrap();
        p.push_forward(VectorField::relu(2).unwrap(), ln2).unwrap();
        p.push_forward(VectorField::relu(2).unwrap().negated(), ln2)
            .unwrap();
        let y = p.apply(&v(&[3.0, -3.0])).unwrap();
        assert!((y - v(&[3.0, -3.0])).amax() < 1e-14);
    }

    #[test]
    fn inverted_relu_leg_is_backward() {
        let p = FlowProgram::from_legs(1, vec![Leg::forward(VectorField::relu(1).unwrap(), 0.4).unwrap()])
            .unwrap();
        let q = p.invert();
        assert_eq!(q.legs()[0].direction, Direction::Backward);
        let x = v(&[1.7]);
        assert!((q.apply(&p.apply(&x).unwrap()).unwrap() - &x).amax() <= 4.0 * f64::EPSILON * x[0]);
    }

    #[test]
    fn leg_errors_carry_the_index() {
        let quad = VectorField::elementwise(crate::Activation::Quadratic1d, 1).unwrap();
        let p = FlowProgram::from_legs(
            1,
            vec![
                Leg::forward(VectorField::zero(1).unwrap(), 1.0).unwrap(),
                Leg::forward(quad, 2.0).unwrap(),
            ],
        )
        .unwrap();
        match p.apply(&v(&[1.0])).unwrap_err() {
            Error::Leg { index, source } => {
                assert_eq!(index, 1);
                assert!(matches!(*source, Error::PoleReached { .. }));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn rejects_negative_durations_and_mixed_dims() {
        assert!(Leg::forward(VectorField::zero(1).unwrap(), -1.0).is_err());
        let mut p = FlowProgram::identity(2).unwrap();
        assert!(p.push_forward(VectorField::zero(3).unwrap(), 1.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let mut p = FlowProgram::identity(2).unwrap();
        p.push_forward(VectorField::linear(a).unwrap(), 0.5).unwrap();
        p.push(Leg::backward(VectorField::relu(2).unwrap(), 0.25).unwrap())
            .unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: FlowProgram = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        let bad =
            r#"{"dim": 2, "legs": [{"field": {"dim": 1, "kind": "named", "name": "gauss"}, "duration": 1}]}"#;
        assert!(serde_json::from_str::<FlowProgram>(bad).is_err());
    }
}
