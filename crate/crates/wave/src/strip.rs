use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, WaveError};

/// A time strip `[t0, t1]` with boundary markers `t_min < t_max` and the time
/// range `δ` of the kernel.
///
/// Inhomogeneities near the past live in `[t0, t_min]`, those near the future
/// in `[t_max, t1]`. The cutoff construction needs both boundary strips to be
/// wider than `2δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStrip {
    pub t0: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t1: f64,
    pub delta: f64,
}

impl TimeStrip {
    pub fn new(t0: f64, t_min: f64, t_max: f64, t1: f64, delta: f64) -> Result<Self> {
        let strip = TimeStrip { t0, t_min, t_max, t1, delta };
        strip.validate()?;
        Ok(strip)
    }

    pub fn validate(&self) -> Result<()> {
        let TimeStrip { t0, t_min, t_max, t1, delta } = *self;
        if ![t0, t_min, t_max, t1, delta].iter().all(|v| v.is_finite()) {
            return Err(WaveError::Strip("parameters must be finite".into()));
        }
        if !(t0 < t_min && t_min < t_max && t_max < t1) {
            return Err(WaveError::Strip(format!("need t0 < t_min < t_max < t1, got {t0}, {t_min}, {t_max}, {t1}")));
        }
        if delta < 0.0 {
            return Err(WaveError::Strip(format!("negative range {delta}")));
        }
        if t1 - t_max <= 2.0 * delta || t_min - t0 <= 2.0 * delta {
            return Err(WaveError::Strip(format!(
                "boundary strips [{t0}, {t_min}] and [{t_max}, {t1}] must be wider than 2δ = {}",
                2.0 * delta
            )));
        }
        Ok(())
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t1
    }

    /// `t ∈ [t0, t_min]`.
    pub fn in_past(&self, t: f64) -> bool {
        t >= self.t0 && t <= self.t_min
    }

    /// `t ∈ [t_max, t1]`.
    pub fn in_future(&self, t: f64) -> bool {
        t >= self.t_max && t <= self.t1
    }

    /// Open interval `(t_min + δ, t_max − δ)` on which boundary-driven
    /// solutions are homogeneous together with their δ-neighbourhood.
    pub fn interior(&self) -> (f64, f64) {
        (self.t_min + self.delta, self.t_max - self.delta)
    }

    /// Indices of the points with time labels in `[t0, t1]`.
    pub fn members(&self, times: &[f64]) -> Vec<usize> {
        (0..times.len()).filter(|&i| self.contains(times[i])).collect()
    }

    /// Distinct time labels of the system inside `(lo, hi)`, sorted.
    pub fn times_between(times: &[f64], lo: f64, hi: f64) -> Vec<f64> {
        let mut out: Vec<f64> = times.iter().copied().filter(|&t| t > lo && t < hi).collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The past and future cutoff functions `η₀`, `η₁`.
///
/// `η₀` vanishes up to `t0 + δ` and equals one from `t_min − δ` on; `η₁`
/// equals one up to `t_max + δ` and vanishes from `t1 − δ` on. Outside the
/// strip they are continued by their boundary values.
#[derive(Clone)]
pub struct Cutoffs {
    past: Profile,
    future: Profile,
}

impl fmt::Debug for Cutoffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Cutoffs")
    }
}

fn ramp(t: f64, start: f64, width: f64) -> f64 {
    if width <= 0.0 {
        if t > start {
            1.0
        } else {
            0.0
        }
    } else {
        ((t - start) / width).clamp(0.0, 1.0)
    }
}

impl Cutoffs {
    /// Piecewise-linear ramps of width `δ` (narrower if the boundary strip
    /// leaves less room).
    pub fn linear(strip: &TimeStrip) -> Self {
        let TimeStrip { t0, t_min, t_max, t1, delta } = *strip;
        let w0 = delta.min(t_min - t0 - 2.0 * delta);
        let w1 = delta.min(t1 - t_max - 2.0 * delta);
        Cutoffs { past: Arc::new(move |t| ramp(t, t0 + delta, w0)), future: Arc::new(move |t| ramp(-t, -(t1 - delta), w1)) }
    }

    /// Arbitrary profiles; checked against the strip with [`Cutoffs::check`].
    pub fn new(past: impl Fn(f64) -> f64 + Send + Sync + 'static, future: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Cutoffs { past: Arc::new(past), future: Arc::new(future) }
    }

    pub fn past(&self, t: f64) -> f64 {
        (self.past)(t)
    }

    pub fn future(&self, t: f64) -> f64 {
        (self.future)(t)
    }

    /// Verifies range, support and plateau conditions at the given times.
    pub fn check(&self, strip: &TimeStrip, times: &[f64]) -> Result<()> {
        let TimeStrip { t0, t_min, t_max, t1, delta } = *strip;
        for &t in times.iter().filter(|&&t| strip.contains(t)) {
            let (a, b) = (self.past(t), self.future(t));
            let bad = !(0.0..=1.0).contains(&a)
                || !(0.0..=1.0).contains(&b)
                || (t <= t0 + delta && a != 0.0)
                || (t > t_min - delta && a != 1.0)
                || (t >= t1 - delta && b != 0.0)
                || (t <= t_max + delta && b != 1.0);
            if bad {
                return Err(WaveError::Strip(format!("cutoffs violate their constraints at t = {t} (η₀ = {a}, η₁ = {b})")));
            }
        }
        Ok(())
    }
}
