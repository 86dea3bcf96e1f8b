//! Synthetic measurements `m_i = u†(x_i) + σ ‖u†‖_∞ ξ_i` from a fine-mesh
//! reference solve, and the discrete semi-norm `‖v‖_n`.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::fem::{AnalyticFunction, NodalField, Operators};
use crate::mesh::{rng_stream, Mesh, PointSet};
use crate::{Error, Result};

const NOISE_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Standard normal.
    Gaussian,
    /// Uniform on `[−√3, √3]`: zero mean, unit variance.
    Uniform,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Config(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// `n` i.i.d. unit-variance noise samples, reproducible from `seed`.
pub fn sample_noise(n: usize, kind: NoiseKind, seed: u64) -> Vec<f64> {
    let mut rng = rng_stream(seed, NOISE_STREAM);
    match kind {
        NoiseKind::Gaussian => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        NoiseKind::Uniform => {
            let a = 3f64.sqrt();
            (0..n).map(|_| rng.random_range(-a..=a)).collect()
        }
    }
}

/// `sqrt(n⁻¹ Σ v_i²)`.
pub fn discrete_seminorm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    Ok((values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt())
}

/// Reference solution on a fine mesh.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub ops: Operators,
    pub q: NodalField,
    pub u: NodalField,
    /// `‖u†‖_∞`, the largest nodal magnitude (exact for P1 functions).
    pub sup_norm: f64,
}

impl GroundTruth {
    /// Solves the forward problem for `q†`, `f` on a fine mesh.
    pub fn new(dim: usize, q: AnalyticFunction, f: AnalyticFunction, fine_divisions: usize) -> Result<Self> {
        let ops = Operators::new(Mesh::structured(dim, fine_divisions)?);
        let q = ops.interpolate(q)?;
        let fh = ops.interpolate(f)?;
        let u = ops.solve_forward(&q, &fh)?;
        let sup_norm = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self { ops, q, u, sup_norm })
    }

    pub fn from_ids(dim: usize, q_id: &str, f_id: &str, fine_divisions: usize) -> Result<Self> {
        Self::new(
            dim,
            AnalyticFunction::from_id(q_id)?,
            AnalyticFunction::from_id(f_id)?,
            fine_divisions,
        )
    }

    /// `u†` at arbitrary points by barycentric interpolation on the fine mesh.
    pub fn evaluate(&self, points: &PointSet) -> Result<Vec<f64>> {
        let mesh = self.ops.mesh();
        if points.dim() != mesh.dim() {
            return Err(Error::DimensionMismatch {
                expected: mesh.dim(),
                found: points.dim(),
            });
        }
        let u = self.u.values();
        points
            .iter()
            .map(|x| {
                let loc = mesh.locate(x)?;
                Ok(mesh
                    .element(loc.element)
                    .iter()
                    .zip(&loc.bary)
                    .map(|(&n, b)| b * u[n])
                    .sum())
            })
            .collect()
    }

    /// `‖q†‖_{H¹}` of the fine-mesh interpolant.
    pub fn q_h1_norm(&self) -> Result<f64> {
        self.ops.h1_norm(self.q.values())
    }
}

/// Sampling points with their measured values.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    pub points: PointSet,
    /// Noisy values `m_i`.
    pub values: Vec<f64>,
    /// Noise-free values `u†(x_i)`.
    pub exact: Vec<f64>,
    /// Relative noise strength.
    pub sigma: f64,
    pub noise_kind: NoiseKind,
    pub seed: u64,
    /// Absolute noise standard deviation `σ ‖u†‖_∞`.
    pub noise_std: f64,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `observations.csv`: `id,x[,y],m`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["id", "x"];
        if self.points.dim() == 2 {
            header.push("y");
        }
        header.push("m");
        w.write_record(&header)?;
        for (i, (p, m)) in self.points.iter().zip(&self.values).enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(p.iter().map(|c| c.to_string()));
            row.push(m.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Samples `u†` at `points` and adds noise of strength `sigma ‖u†‖_∞`.
pub fn observe(gt: &GroundTruth, points: &PointSet, sigma: f64, kind: NoiseKind, seed: u64) -> Result<ObservationSet> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("noise level must be non-negative, got {sigma}")));
    }
    let exact = gt.evaluate(points)?;
    let noise_std = sigma * gt.sup_norm;
    let values = if sigma == 0.0 {
        exact.clone()
    } else {
        exact
            .iter()
            .zip(sample_noise(points.len(), kind, seed))
            .map(|(u, xi)| u + noise_std * xi)
            .collect()
    };
    Ok(ObservationSet {
        points: points.clone(),
        values,
        exact,
        sigma,
        noise_kind: kind,
        seed,
        noise_std,
    })
}
