use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{c, CMat};
use crate::point::PointOperator;

/// A finitely supported measure on point operators: weights, time labels and
/// the parameters κ, 𝔯, 𝔰 of the reduced causal action principle.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSystem {
    n: usize,
    f: usize,
    kappa: f64,
    r: f64,
    s: f64,
    points: Vec<PointOperator>,
    weights: Vec<f64>,
    times: Vec<f64>,
}

impl DiscreteSystem {
    /// Builds and validates a system with 𝔯 = 𝔰 = 0.
    pub fn new(n: usize, kappa: f64, points: Vec<PointOperator>, weights: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        let f = points.first().map(|p| p.dim()).unwrap_or(0);
        let system = DiscreteSystem { n, f, kappa, r: 0.0, s: 0.0, points, weights, times };
        system.validate()?;
        Ok(system)
    }

    /// Checks the volume constraint, positivity of weights and the signature
    /// bound of every point.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CoreError::Invalid("spin dimension must be positive".into()));
        }
        if self.kappa.is_nan() || self.kappa <= 0.0 {
            return Err(CoreError::Invalid("kappa must be positive".into()));
        }
        let count = self.points.len();
        if count == 0 {
            return Err(CoreError::Invalid("system has no points".into()));
        }
        if self.weights.len() != count || self.times.len() != count {
            return Err(CoreError::Invalid(format!(
                "{} points but {} weights and {} times",
                count,
                self.weights.len(),
                self.times.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| w.is_nan() || **w <= 0.0) {
            return Err(CoreError::Invalid(format!("weight {w} is not positive")));
        }
        let volume: f64 = self.weights.iter().sum();
        if (volume - 1.0).abs() > 1e-12 {
            return Err(CoreError::Invalid(format!("total volume {volume} differs from 1")));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.dim() != self.f {
                return Err(CoreError::Dimension(format!("point {i} has dimension {}, expected {}", p.dim(), self.f)));
            }
            PointOperator::new(p.matrix().clone(), self.n)?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn f(&self) -> usize {
        self.f
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn s(&self) -> f64 {
        self.s
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn points(&self) -> &[PointOperator] {
        &self.points
    }
    pub fn point(&self, i: usize) -> &CMat {
        self.points[i].matrix()
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn with_lagrange_parameters(mut self, r: f64, s: f64) -> Self {
        self.r = r;
        self.s = s;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Result<Self> {
        self.times = times;
        self.validate()?;
        Ok(self)
    }

    /// Replaces the points and weights, keeping parameters and times.
    pub fn with_points(mut self, points: Vec<PointOperator>, weights: Vec<f64>) -> Result<Self> {
        self.points = points;
        self.weights = weights;
        self.f = self.points.first().map(|p| p.dim()).unwrap_or(0);
        self.validate()?;
        Ok(self)
    }

    /// Internal constructor for optimizer iterates whose signature is
    /// guaranteed by projection.
    pub(crate) fn replace_unchecked(&self, points: Vec<PointOperator>, weights: Vec<f64>) -> Self {
        DiscreteSystem { points, weights, ..self.clone() }
    }

    /// Applies a unitary `u` to every point: `x ↦ u x u^*`.
    pub fn conjugated(&self, u: &CMat) -> Self {
        let points = self.points.iter().map(|p| PointOperator::from_matrix_unchecked(u * p.matrix() * u.adjoint())).collect();
        DiscreteSystem { points, ..self.clone() }
    }

    /// Reorders points together with their weights and times.
    pub fn permuted(&self, order: &[usize]) -> Self {
        DiscreteSystem {
            points: order.iter().map(|&k| self.points[k].clone()).collect(),
            weights: order.iter().map(|&k| self.weights[k]).collect(),
            times: order.iter().map(|&k| self.times[k]).collect(),
            ..self.clone()
        }
    }

    pub fn to_file(&self) -> SystemFile {
        SystemFile {
            spin_dimension: self.n,
            hilbert_dimension: self.f,
            kappa: self.kappa,
            r: self.r,
            s: self.s,
            points: self
                .points
                .iter()
                .zip(&self.weights)
                .zip(&self.times)
                .map(|((p, &weight), &time)| PointEntry { weight, time, matrix: matrix_to_pairs(p.matrix()) })
                .collect(),
        }
    }

    pub fn from_file(file: &SystemFile) -> Result<Self> {
        let mut points = Vec::with_capacity(file.points.len());
        for (i, entry) in file.points.iter().enumerate() {
            let m = pairs_to_matrix(&entry.matrix).map_err(|e| CoreError::Invalid(format!("point {i}: {e}")))?;
            if m.nrows() != file.hilbert_dimension {
                return Err(CoreError::Dimension(format!(
                    "point {i} has dimension {}, file declares {}",
                    m.nrows(),
                    file.hilbert_dimension
                )));
            }
            points.push(PointOperator::new(m, file.spin_dimension)?);
        }
        let weights = file.points.iter().map(|p| p.weight).collect();
        let times = file.points.iter().map(|p| p.time).collect();
        Ok(DiscreteSystem::new(file.spin_dimension, file.kappa, points, weights, times)?.with_lagrange_parameters(file.r, file.s))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("system serializes")
    }

    /// Parses the JSON system format.
    ///
    /// ```
    /// let json = r#"{"spin_dimension": 1, "hilbert_dimension": 2, "kappa": 0.1, "r": 0, "s": 0,
    ///   "points": [{"weight": 1.0, "time": 0.0, "matrix": [[[1,0],[0,0]],[[0,0],[0,0]]]}]}"#;
    /// let system = cfs_core::DiscreteSystem::from_json(json).unwrap();
    /// assert_eq!(system.len(), 1);
    /// assert_eq!(cfs_core::DiscreteSystem::from_json(&system.to_json()).unwrap(), system);
    /// ```
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SystemFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Serialized form of [`DiscreteSystem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub spin_dimension: usize,
    pub hilbert_dimension: usize,
    pub kappa: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default)]
    pub s: f64,
    pub points: Vec<PointEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub weight: f64,
    #[serde(default)]
    pub time: f64,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

/// Row-major nested `[re, im]` pairs.
pub fn matrix_to_pairs(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|k| [m[(r, k)].re, m[(r, k)].im]).collect()).collect()
}

pub fn pairs_to_matrix(rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMat, String> {
    let nrows = rows.len();
    let ncols = rows.first().map(|r| r.len()).unwrap_or(0);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".into());
    }
    Ok(CMat::from_fn(nrows, ncols, |r, k| c(rows[r][k][0], rows[r][k][1])))
}
