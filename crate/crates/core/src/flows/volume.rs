//! Monte Carlo estimates of `∫_Ω det Dg(x) dx`, the volume of `g(Ω)`.
//!
//! Sample `k` of a run draws from its own ChaCha stream keyed by
//! `(seed, k)`, so estimates do not depend on evaluation order. Both regions
//! of a comparison reuse the same unit samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::integrator::IntegratorConfig;
use super::jacobian::EndpointLogDet;
use super::program::FlowProgram;
use crate::fields::{jacobian_fd, AxisBox};
use crate::{Error, Result, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    /// Euclidean ball.
    Disk {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl Region {
    pub fn disk(center: &[f64], radius: f64) -> Result<Self> {
        let r = Region::Disk {
            center: center.to_vec(),
            radius,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn from_box(b: &AxisBox) -> Self {
        Region::Box {
            lower: b.lower().to_vec(),
            upper: b.upper().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Disk { center, .. } => center.len(),
            Region::Box { lower, .. } => lower.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Region::Disk { center, radius } => {
                if center.is_empty() || !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "disk needs a center and a positive radius".into(),
                    ));
                }
                Ok(())
            }
            Region::Box { lower, upper } => AxisBox::new(lower.clone(), upper.clone()).map(|_| ()),
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Region::Disk { center, radius } => {
                let d = center.len() as f64;
                unit_ball_volume(center.len()) * radius.powf(d)
            }
            Region::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| u - l).product(),
        }
    }

    /// Maps a unit sample (a point of the unit ball for disks, of `[0,1]^d`
    /// for boxes) into the region.
    fn place(&self, unit: &UnitSample) -> Vector {
        match self {
            Region::Disk { center, radius } => Vector::from_iterator(
                center.len(),
                center.iter().zip(&unit.ball).map(|(c, u)| c + radius * u),
            ),
            Region::Box { lower, upper } => Vector::from_iterator(
                lower.len(),
                lower
                    .iter()
                    .zip(upper)
                    .zip(&unit.cube)
                    .map(|((l, h), u)| l + (h - l) * u),
            ),
        }
    }
}

fn unit_ball_volume(d: usize) -> f64 {
    // V_d = π/d · 2 V_{d−2}
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * unit_ball_volume(d - 2),
    }
}

struct UnitSample {
    ball: Vec<f64>,
    cube: Vec<f64>,
}

fn unit_sample(seed: u64, index: u64, dim: usize) -> UnitSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let cube: Vec<f64> = (0..dim)
        .map(|_| Uniform::new(0.0, 1.0).sample(&mut rng))
        .collect();
    let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let r: f64 = Uniform::new(0.0, 1.0).sample(&mut rng);
    let scale = r.powf(1.0 / dim as f64) / norm;
    UnitSample {
        ball: g.into_iter().map(|v| v * scale).collect(),
        cube,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl VolumeEstimate {
    /// `self / other` with a delta-method standard error that treats the two
    /// estimates as independent (conservative under common random numbers).
    pub fn ratio(&self, other: &VolumeEstimate) -> (f64, f64) {
        let r = self.value / other.value;
        let rel = ((self.std_error / self.value).powi(2) + (other.std_error / other.value).powi(2)).sqrt();
        (r, r.abs() * rel)
    }

    /// `|a − b| ≤ k·sqrt(se_a² + se_b²)`, or exact equality.
    pub fn agrees_with(&self, other: &VolumeEstimate, k: f64) -> bool {
        let diff = (self.value - other.value).abs();
        diff == 0.0 || diff <= k * self.std_error.hypot(other.std_error)
    }
}

/// Monte Carlo mean of `density` over `region`, times the region's volume.
pub fn region_volume_mc<F>(region: &Region, samples: usize, seed: u64, density: F) -> Result<VolumeEstimate>
where
    F: Fn(&Vector) -> Result<f64>,
{
    Ok(region_volumes_mc(std::slice::from_ref(region), samples, seed, density)?[0])
}

fn region_volumes_mc<F>(
    regions: &[Region],
    samples: usize,
    seed: u64,
    density: F,
) -> Result<Vec<VolumeEstimate>>
where
    F: Fn(&Vector) -> Result<f64>,
{
    if samples < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples,
        });
    }
    let dim = regions[0].dim();
    for r in regions {
        r.validate()?;
        crate::error::check_dim(dim, r.dim())?;
    }
    let mut sums = vec![(0.0f64, 0.0f64); regions.len()];
    for k in 0..samples {
        let u = unit_sample(seed, k as u64, dim);
        for (r, acc) in regions.iter().zip(sums.iter_mut()) {
            let v = density(&r.place(&u))?;
            acc.0 += v;
            acc.1 += v * v;
        }
    }
    let n = samples as f64;
    Ok(regions
        .iter()
        .zip(sums)
        .map(|(r, (s, s2))| {
            let mean = s / n;
            let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
            let vol = r.volume();
            VolumeEstimate {
                value: vol * mean,
                std_error: vol * (var / n).sqrt(),
                samples,
            }
        })
        .collect())
}

/// Volumes of `P(Ω₁)` and `P(Ω₂)` with `det DP` from the Liouville equation.
pub fn volume_comparison(
    program: &FlowProgram,
    regions: [&Region; 2],
    samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<(VolumeEstimate, VolumeEstimate)> {
    let end = EndpointLogDet::new(program, cfg)?;
    let est = region_volumes_mc(&[regions[0].clone(), regions[1].clone()], samples, seed, |x| {
        Ok(end.eval(x)?.exp())
    })?;
    Ok((est[0], est[1]))
}

/// Volumes of `g(Ω₁)` and `g(Ω₂)` for an arbitrary map, with `det Dg` from
/// central differences.
pub fn volume_comparison_map<G>(
    map: G,
    regions: [&Region; 2],
    samples: usize,
    seed: u64,
) -> Result<(VolumeEstimate, VolumeEstimate)>
where
    G: Fn(&Vector) -> Result<Vector>,
{
    let est = region_volumes_mc(&[regions[0].clone(), regions[1].clone()], samples, seed, |x| {
        Ok(jacobian_fd(&map, x)?.determinant())
    })?;
    Ok((est[0], est[1]))
}
