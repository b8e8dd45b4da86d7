use std::collections::BTreeMap;

use cfs_core::linalg::{c, CVec};
use serde::{Deserialize, Serialize};

use crate::frame::SpinFrame;

/// A wave function: one coordinate vector in every spin space.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub components: Vec<CVec>,
}

impl WaveFunction {
    pub fn zero(frame: &SpinFrame) -> Self {
        WaveFunction { components: (0..frame.len()).map(|i| CVec::zeros(frame.dim(i))).collect() }
    }

    /// The physical wave function `ψ^u(x) = π_x u`.
    pub fn physical(frame: &SpinFrame, u: &CVec) -> Self {
        WaveFunction { components: frame.bases.iter().map(|b| b.psi() * u).collect() }
    }

    /// Ambient representative `ψ(x_i) ∈ H`.
    pub fn ambient(&self, frame: &SpinFrame, i: usize) -> CVec {
        frame.basis(i).ambient(&self.components[i])
    }

    /// Stacks the components into one vector of the direct sum of spin spaces.
    pub fn stacked(&self) -> CVec {
        let total: usize = self.components.iter().map(|v| v.len()).sum();
        CVec::from_iterator(total, self.components.iter().flat_map(|v| v.iter().copied()))
    }

    pub fn from_stacked(frame: &SpinFrame, v: &CVec) -> Self {
        WaveFunction { components: (0..frame.len()).map(|i| v.rows(frame.offset(i), frame.dim(i)).into_owned()).collect() }
    }

    pub fn to_json(&self) -> String {
        let map: BTreeMap<usize, Vec<[f64; 2]>> =
            self.components.iter().enumerate().map(|(i, v)| (i, v.iter().map(|z| [z.re, z.im]).collect())).collect();
        serde_json::to_string_pretty(&WaveFile { points: map }).expect("wave function serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let file: WaveFile = serde_json::from_str(text)?;
        let count = file.points.keys().next_back().map(|k| k + 1).unwrap_or(0);
        let mut components = vec![CVec::zeros(0); count];
        for (i, coords) in file.points {
            components[i] = CVec::from_iterator(coords.len(), coords.iter().map(|p| c(p[0], p[1])));
        }
        Ok(WaveFunction { components })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WaveFile {
    points: BTreeMap<usize, Vec<[f64; 2]>>,
}
