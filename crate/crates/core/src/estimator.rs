//! Contact-model identification from force-motion samples.
//!
//! The interface law is linear in its parameters, `F = K*dx + D*v + C`, so a
//! window of samples stacks into `Y = H theta + V` with regressor rows
//! `[dx, v, 1]`. The estimate minimizes the squared residual sum and is
//! obtained from the normal equations on a column-equilibrated regressor,
//! followed by one step of iterative refinement.

use std::collections::VecDeque;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Contact-interface constants `[K, D, C]`: stiffness (N/m), damping (N*s/m)
/// and the constant offset force (N).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OperableVector {
    pub k: f64,
    pub d: f64,
    pub c: f64,
}

impl OperableVector {
    pub const fn new(k: f64, d: f64, c: f64) -> Self {
        Self { k, d, c }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.k, self.d, self.c]
    }

    pub fn is_finite(&self) -> bool {
        self.k.is_finite() && self.d.is_finite() && self.c.is_finite()
    }

    /// Model force predicted for interface compression `dx` at rate `v`.
    pub fn predict(&self, dx: f64, v: f64) -> f64 {
        self.k * dx + self.d * v + self.c
    }
}

/// One observation at an interaction interface: compression `dx` (m),
/// compression rate `v` (m/s) and normal force `f` (N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptionSample {
    pub dx: f64,
    pub v: f64,
    pub f: f64,
}

impl PerceptionSample {
    pub fn new(dx: f64, v: f64, f: f64) -> Self {
        Self { dx, v, f }
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.v.is_finite() && self.f.is_finite()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("non-finite perception sample {0:?}")]
    NonFinite(PerceptionSample),
    #[error("need at least 3 samples, have {0}")]
    TooFewSamples(usize),
    #[error("regressor is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },
}

/// FIFO window of regressor rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorBuffer {
    rows: VecDeque<([f64; 3], f64)>,
    capacity: usize,
}

pub const DEFAULT_WINDOW: usize = 256;

impl Default for RegressorBuffer {
    fn default() -> Self {
        Self::with_capacity(DEFAULT_WINDOW)
    }
}

impl RegressorBuffer {
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            rows: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.rows.clear();
    }

    pub fn rows(&self) -> impl Iterator<Item = &([f64; 3], f64)> {
        self.rows.iter()
    }

    /// Appends `([dx, v, 1], F)`, evicting the oldest row at capacity.
    pub fn accumulate(&mut self, s: PerceptionSample) -> Result<(), EstimateError> {
        if !s.is_finite() {
            return Err(EstimateError::NonFinite(s));
        }
        if self.rows.len() == self.capacity {
            self.rows.pop_front();
        }
        self.rows.push_back(([s.dx, s.v, 1.0], s.f));
        Ok(())
    }

    /// `J1(theta)`: sum of squared residuals over the window.
    pub fn cost(&self, theta: &OperableVector) -> f64 {
        let t = theta.as_array();
        self.rows
            .iter()
            .map(|(h, y)| {
                let r = y - (h[0] * t[0] + h[1] * t[1] + h[2] * t[2]);
                r * r
            })
            .sum()
    }

    /// `H^T (Y - H theta)`, the (half, negated) gradient of `J1`.
    pub fn normal_residual(&self, theta: &OperableVector) -> [f64; 3] {
        let t = theta.as_array();
        let mut g = [0.0; 3];
        for (h, y) in &self.rows {
            let r = y - (h[0] * t[0] + h[1] * t[1] + h[2] * t[2]);
            for j in 0..3 {
                g[j] += h[j] * r;
            }
        }
        g
    }
}

/// Thresholds that turn a fit into a trusted contact model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceThresholds {
    pub min_samples: usize,
    /// Ceiling on the condition estimate for a confident fit.
    pub condition_ceiling: f64,
    pub residual_bound: f64,
    /// Beyond this the regressor is treated as numerically singular and no
    /// estimate is produced at all.
    pub singular_condition: f64,
}

impl Default for ConfidenceThresholds {
    fn default() -> Self {
        Self {
            min_samples: 30,
            condition_ceiling: 1e6,
            residual_bound: 0.5,
            singular_condition: 1e10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub residual_rms: f64,
    pub condition_estimate: f64,
    pub sample_count: usize,
    pub confident: bool,
}

/// Condition number of the column-equilibrated regressor, with the scaled
/// Gram matrix and column scales it was computed from.
fn scaled_gram(buf: &RegressorBuffer) -> (Matrix3<f64>, Vector3<f64>, Vector3<f64>, f64) {
    let mut gram = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (h, y) in buf.rows() {
        let hv = Vector3::new(h[0], h[1], h[2]);
        gram += hv * hv.transpose();
        rhs += hv * *y;
    }
    let scale = Vector3::new(gram[(0, 0)].sqrt(), gram[(1, 1)].sqrt(), gram[(2, 2)].sqrt());
    if scale.iter().any(|s| *s == 0.0 || !s.is_finite()) {
        return (gram, rhs, scale, f64::INFINITY);
    }
    let mut g = gram;
    for i in 0..3 {
        for j in 0..3 {
            g[(i, j)] /= scale[i] * scale[j];
        }
    }
    let eig = SymmetricEigen::new(g).eigenvalues;
    let max = eig.max();
    let min = eig.min();
    let cond = if min <= 0.0 { f64::INFINITY } else { (max / min).sqrt() };
    let rhs_scaled = Vector3::new(rhs[0] / scale[0], rhs[1] / scale[1], rhs[2] / scale[2]);
    (g, rhs_scaled, scale, cond)
}

/// Least-squares estimate of `[K, D, C]` over the buffered window.
pub fn estimate_theta(
    buf: &RegressorBuffer,
    thresholds: &ConfidenceThresholds,
) -> Result<(OperableVector, ConfidenceReport), EstimateError> {
    let n = buf.len();
    if n < 3 {
        return Err(EstimateError::TooFewSamples(n));
    }
    let (g, rhs, scale, condition) = scaled_gram(buf);
    if !(condition <= thresholds.singular_condition) {
        return Err(EstimateError::RankDeficient { condition });
    }
    let chol = g
        .cholesky()
        .ok_or(EstimateError::RankDeficient { condition })?;
    let z = chol.solve(&rhs);
    let mut theta = OperableVector::new(z[0] / scale[0], z[1] / scale[1], z[2] / scale[2]);

    // One refinement pass on the unscaled residual of the normal equations.
    let r = buf.normal_residual(&theta);
    let rs = Vector3::new(r[0] / scale[0], r[1] / scale[1], r[2] / scale[2]);
    let dz = chol.solve(&rs);
    theta.k += dz[0] / scale[0];
    theta.d += dz[1] / scale[1];
    theta.c += dz[2] / scale[2];

    let residual_rms = (buf.cost(&theta) / n as f64).sqrt();
    let confident = n >= thresholds.min_samples
        && condition <= thresholds.condition_ceiling
        && residual_rms <= thresholds.residual_bound;
    Ok((
        theta,
        ConfidenceReport {
            residual_rms,
            condition_estimate: condition,
            sample_count: n,
            confident,
        },
    ))
}

/// Probe force profile: a linear ramp to `f_max`, then a hold at half force,
/// then a hold at full force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeProfile {
    pub ramp_ticks: usize,
    pub hold_ticks: usize,
}

impl Default for ProbeProfile {
    /// One second per phase at 50 Hz.
    fn default() -> Self {
        Self {
            ramp_ticks: 50,
            hold_ticks: 50,
        }
    }
}

impl ProbeProfile {
    pub fn total_ticks(&self) -> usize {
        self.ramp_ticks + 2 * self.hold_ticks
    }
}

pub fn probe_schedule(step: usize, f_max: f64, profile: &ProbeProfile) -> f64 {
    let ramp = profile.ramp_ticks.max(1);
    if step <= ramp {
        f_max * step as f64 / ramp as f64
    } else if step <= ramp + profile.hold_ticks {
        0.5 * f_max
    } else {
        f_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operability {
    Unknown,
    Operable,
    Inoperable,
}

/// Default motion threshold separating sensor jitter from a yielding object.
pub const EPS_MOVE: f64 = 0.002;

/// Decides whether a probed object yields.
///
/// Undecided until the fit is confident (and `K >= 0`). A confident object that
/// moved at least `eps_move` is operable; one that stayed put after the full
/// probe force `f_max` was delivered is inoperable.
pub fn classify_operability(
    theta: &OperableVector,
    report: &ConfidenceReport,
    displacement_seen: f64,
    peak_probe_force: f64,
    f_max: f64,
    eps_move: f64,
) -> Operability {
    if !report.confident || theta.k < 0.0 || !theta.is_finite() {
        return Operability::Unknown;
    }
    if displacement_seen >= eps_move {
        Operability::Operable
    } else if peak_probe_force >= f_max {
        Operability::Inoperable
    } else {
        Operability::Unknown
    }
}
