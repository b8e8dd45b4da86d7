use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::linalg::{self, CMat, C64};

/// The 2n nontrivial eigenvalues of an operator product `xy`, padded with
/// zeros, ordered by descending modulus and then ascending phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpectrum {
    pub values: Vec<C64>,
}

impl ChainSpectrum {
    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().fold(0.0, |a: f64, z| a.max(z.norm()))
    }

    /// Number of entries that are exactly zero (padding).
    pub fn padding(&self) -> usize {
        self.values.iter().filter(|z| **z == C64::new(0.0, 0.0)).count()
    }
}

/// Eigenvalues of `xy` with the zero threshold `sigma_rel * |x| * |y|`.
///
/// ```
/// use cfs_core::{chain_spectrum, linalg::c, PointOperator};
/// let x = PointOperator::diagonal(&[1.0, 0.0]);
/// let s = std::f64::consts::FRAC_1_SQRT_2;
/// let v = nalgebra::DVector::from_vec(vec![c(s, 0.0), c(s, 0.0)]);
/// let y = &v * v.adjoint();
/// let spec = chain_spectrum(x.matrix(), &y, 1, 1e-9).unwrap();
/// assert!((spec.values[0] - c(0.5, 0.0)).norm() < 1e-14);
/// assert_eq!(spec.values[1], c(0.0, 0.0));
/// ```
pub fn chain_spectrum(x: &CMat, y: &CMat, n: usize, sigma_rel: f64) -> Result<ChainSpectrum> {
    if x.nrows() != y.nrows() || x.ncols() != y.ncols() {
        return Err(CoreError::Dimension("chain spectrum of operators of different size".into()));
    }
    let zero_cut = sigma_rel * linalg::operator_norm(x) * linalg::operator_norm(y);
    spectrum_of_product(&(x * y), n, zero_cut)
}

/// The 2n largest-modulus eigenvalues of `product`, values with modulus at
/// most `zero_cut` replaced by zero.
pub fn spectrum_of_product(product: &CMat, n: usize, zero_cut: f64) -> Result<ChainSpectrum> {
    let mut values = linalg::eigenvalues(product).ok_or(CoreError::EigenFailure { pair: None })?;
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    values.truncate(2 * n);
    for z in values.iter_mut() {
        if z.norm() <= zero_cut {
            *z = C64::new(0.0, 0.0);
        }
    }
    values.resize(2 * n, C64::new(0.0, 0.0));
    Ok(ChainSpectrum { values: canonical_order(values) })
}

fn phase(z: &C64) -> f64 {
    let p = z.arg();
    if p <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        p
    }
}

/// Sorts by modulus (descending); moduli equal up to round-off form a group
/// sorted by phase in (−π, π].
fn canonical_order(mut values: Vec<C64>) -> Vec<C64> {
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let scale = values.first().map(|z| z.norm()).unwrap_or(0.0);
    let tie = 1e-12 * scale;
    let mut start = 0;
    while start < values.len() {
        let mut end = start + 1;
        while end < values.len() && values[end - 1].norm() - values[end].norm() <= tie {
            end += 1;
        }
        values[start..end].sort_by(|a, b| phase(a).total_cmp(&phase(b)));
        start = end;
    }
    values
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CausalClass {
    Spacelike,
    Timelike,
    Lightlike,
}

impl std::fmt::Display for CausalClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            CausalClass::Spacelike => "spacelike",
            CausalClass::Timelike => "timelike",
            CausalClass::Lightlike => "lightlike",
        };
        f.write_str(name)
    }
}

/// Spacelike if all moduli agree, timelike if all eigenvalues are real,
/// lightlike otherwise. The all-zero spectrum is spacelike.
pub fn classify_spectrum(spec: &ChainSpectrum, class_tol: f64) -> CausalClass {
    let moduli = spec.moduli();
    let max = moduli.iter().fold(0.0, |a: f64, &m| a.max(m));
    let min = moduli.iter().fold(f64::INFINITY, |a: f64, &m| a.min(m));
    if max == 0.0 || max - min <= class_tol * max {
        CausalClass::Spacelike
    } else if spec.values.iter().all(|z| z.im.abs() <= class_tol * max) {
        CausalClass::Timelike
    } else {
        CausalClass::Lightlike
    }
}

pub fn classify(x: &CMat, y: &CMat, n: usize, class_tol: f64) -> Result<CausalClass> {
    Ok(classify_spectrum(&chain_spectrum(x, y, n, 1e-9)?, class_tol))
}

/// `(1/4n) Σ_ij (a_i − a_j)^2 + κ (Σ_j a_j)^2` for moduli `a`.
pub fn lagrangian_from_moduli(moduli: &[f64], n: usize, kappa: f64) -> f64 {
    let mut spread = 0.0;
    for a in moduli {
        for b in moduli {
            spread += (a - b) * (a - b);
        }
    }
    let total: f64 = moduli.iter().sum();
    spread / (4.0 * n as f64) + kappa * total * total
}

/// The κ-Lagrangian of a pair of point operators.
///
/// ```
/// use cfs_core::{lagrangian, PointOperator};
/// let x = PointOperator::diagonal(&[1.0, 0.0]);
/// let value = lagrangian(x.matrix(), x.matrix(), 1, 0.1).unwrap();
/// assert!((value - 0.6).abs() < 1e-15);
/// ```
pub fn lagrangian(x: &CMat, y: &CMat, n: usize, kappa: f64) -> Result<f64> {
    let spec = chain_spectrum(x, y, n, 1e-9)?;
    Ok(lagrangian_from_moduli(&spec.moduli(), n, kappa))
}
