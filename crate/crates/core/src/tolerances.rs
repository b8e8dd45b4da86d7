//! Named numerical tolerances shared by every module.
//!
//! All values are relative to a natural scale of the quantity being tested
//! unless the field documentation says otherwise.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Eigenvalues of `xy` below `sigma_rel * |x| * |y|` count as zero.
    pub sigma_rel: f64,
    /// Relative tolerance for the causal classification.
    pub class_tol: f64,
    /// Relative spectral gap below which eigenvalues are treated as degenerate.
    pub degen_tol: f64,
    /// Relative step of first-order central differences.
    pub fd_step: f64,
    /// Relative step of the five-point second-derivative stencil.
    pub fd2_step: f64,
    /// Agreement between the finite-difference and spectral Q kernels.
    pub q_agree: f64,
    /// Relative agreement of first derivatives with their oracle.
    pub fd_tol: f64,
    /// Relative agreement of second derivatives with their oracle.
    pub fd2_tol: f64,
    /// Residual of the Euler-Lagrange equations at a numerical minimizer.
    pub el_tol: f64,
    /// Pseudo-inverse rank cutoff relative to the largest eigenvalue modulus.
    pub rank_tol: f64,
    /// Admissibility: allowed component of an inhomogeneity outside the range.
    pub adm_tol: f64,
    /// Residual of strip solves relative to the inhomogeneity.
    pub solve_tol: f64,
    /// Interior residual of homogeneous solutions.
    pub hom_tol: f64,
    /// Drift of conserved inner products.
    pub cons_tol: f64,
    /// Vanishing of the commutator norm of future-driven solutions.
    pub cip_tol: f64,
    /// Relative asymmetry tolerated in an assembled strip operator.
    pub sym_tol: f64,
    /// Negative eigenvalues of Gram matrices tolerated as round-off.
    pub psd_tol: f64,
    /// Negative eigenvalues of the second-variation form tolerated at minimizers.
    pub pos_tol: f64,
    /// Projected gradient norm at which the minimizer stops.
    pub gtol: f64,
    /// Inhomogeneity norm at which the coupling iteration stops.
    pub couple_tol: f64,
    /// Target accuracy of adaptive quadratures.
    pub quad_tol: f64,
    /// Closest admissible distance to the light cone in the Bessel kernels.
    pub lightcone_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sigma_rel: 1e-9,
            class_tol: 1e-8,
            degen_tol: 1e-6,
            fd_step: 1e-5,
            fd2_step: 1e-3,
            q_agree: 1e-5,
            fd_tol: 1e-5,
            fd2_tol: 1e-4,
            el_tol: 1e-5,
            rank_tol: 1e-10,
            adm_tol: 1e-8,
            solve_tol: 1e-9,
            hom_tol: 1e-8,
            cons_tol: 1e-8,
            cip_tol: 1e-8,
            sym_tol: 1e-10,
            psd_tol: 1e-10,
            pos_tol: 1e-5,
            gtol: 1e-6,
            couple_tol: 1e-10,
            quad_tol: 1e-12,
            lightcone_tol: 1e-12,
        }
    }
}

impl Tolerances {
    /// Sets a tolerance by its field name.
    ///
    /// ```
    /// let mut tol = cfs_core::Tolerances::default();
    /// tol.set("gtol", 1e-8).unwrap();
    /// assert_eq!(tol.gtol, 1e-8);
    /// assert!(tol.set("no_such_tolerance", 1.0).is_err());
    /// ```
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), String> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(format!("tolerance {name} must be a finite non-negative number"));
        }
        let mut map = match serde_json::to_value(*self) {
            Ok(serde_json::Value::Object(map)) => map,
            _ => unreachable!("tolerances serialize to an object"),
        };
        if !map.contains_key(name) {
            return Err(format!("unknown tolerance `{name}`"));
        }
        map.insert(name.to_string(), serde_json::json!(value));
        *self = serde_json::from_value(serde_json::Value::Object(map)).map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn names() -> Vec<String> {
        match serde_json::to_value(Tolerances::default()) {
            Ok(serde_json::Value::Object(map)) => map.keys().cloned().collect(),
            _ => Vec::new(),
        }
    }
}
