//! Discrete Dynamic Movement Primitives.
//!
//! Each dimension follows a critically damped spring towards the goal,
//! perturbed by a phase-driven forcing term:
//!
//! ```text
//! τ ẋ = −α_x x                                  (canonical system, x(0) = 1)
//! τ ż = α_z (β_z (g − y) − z) + f(x)
//! τ ẏ = z
//! f(x) = Σψ_i(x) w_i / Σψ_i(x) · x · (g − y0),   ψ_i(x) = exp(−h_i (x − c_i)²)
//! ```
//!
//! Weights are fit from one demonstration by locally weighted regression and
//! the system is integrated with fixed-step RK4 in normalized time `t/τ`, which
//! makes rollouts exactly invariant to a joint rescaling of `τ` and `dt`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quaternion::Quaternion;
use crate::recording::Recording;
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum DmpError {
    #[error("stream `{0}` not found in recording")]
    MissingStream(String),
    #[error("need at least 3 frames to fit, got {0}")]
    TooFewFrames(usize),
    #[error("non-finite sample at frame {0}")]
    NonFiniteSample(usize),
    #[error("zero-norm quaternion at frame {0}")]
    ZeroNormQuaternion(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite state at rollout step {0}")]
    NonFiniteState(usize),
}

pub type Result<T, E = DmpError> = std::result::Result<T, E>;

/// Dynamical-system constants and basis count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpConfig<T> {
    pub n_basis: usize,
    pub alpha_z: T,
    pub beta_z: T,
    pub alpha_x: T,
    pub amplitude_floor: T,
}

impl<T: Scalar> DmpConfig<T> {
    /// Critically damped defaults: `α_z = 25`, `β_z = α_z/4`, `α_x = α_z/3`.
    pub fn with_basis(n_basis: usize) -> Self {
        let alpha_z = T::lit(25.0);
        Self {
            n_basis,
            alpha_z,
            beta_z: alpha_z / T::lit(4.0),
            alpha_x: alpha_z / T::lit(3.0),
            amplitude_floor: T::lit(1e-8),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DmpError::InvalidConfig(m.to_string()));
        if self.n_basis < 2 {
            return bad("n_basis must be at least 2");
        }
        for (name, v) in [
            ("alpha_z", self.alpha_z),
            ("beta_z", self.beta_z),
            ("alpha_x", self.alpha_x),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(DmpError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.amplitude_floor >= T::zero()) {
            return bad("amplitude_floor must be non-negative");
        }
        Ok(())
    }

    /// Centers `c_i = exp(−α_x i/(N−1))`, evenly spaced in time.
    pub fn centers(&self) -> Vec<T> {
        let last = T::from_usize_lossy(self.n_basis - 1);
        (0..self.n_basis)
            .map(|i| (-self.alpha_x * T::from_usize_lossy(i) / last).exp())
            .collect()
    }

    /// Widths `h_i = 1/(c_{i+1} − c_i)²`, the last one repeating its neighbour.
    pub fn widths(&self, centers: &[T]) -> Vec<T> {
        let n = centers.len();
        let mut h: Vec<T> = centers
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                T::one() / (d * d)
            })
            .collect();
        h.push(h[n - 2]);
        h
    }
}

impl<T: Scalar> Default for DmpConfig<T> {
    fn default() -> Self {
        Self::with_basis(50)
    }
}

/// Canonical phase `x = exp(−α_x t/τ)`.
pub fn phase<T: Scalar>(t: T, tau: T, alpha_x: T) -> T {
    (-alpha_x * t / tau).exp()
}

/// Radial basis activations shared by the position and orientation variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis<T> {
    pub centers: Vec<T>,
    pub widths: Vec<T>,
}

impl<T: Scalar> Basis<T> {
    pub fn from_config(cfg: &DmpConfig<T>) -> Self {
        let centers = cfg.centers();
        let widths = cfg.widths(&centers);
        Self { centers, widths }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn activations(&self, x: T) -> Vec<T> {
        self.centers
            .iter()
            .zip(&self.widths)
            .map(|(&c, &h)| {
                let d = x - c;
                (-h * d * d).exp()
            })
            .collect()
    }

    /// Normalized weighted sum `Σψ_i w_i / Σψ_i`; zero where every basis has underflowed.
    pub fn blend(&self, x: T, weights: &[T]) -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for ((&c, &h), &w) in self.centers.iter().zip(&self.widths).zip(weights) {
            let d = x - c;
            let psi = (-h * d * d).exp();
            num = num + psi * w;
            den = den + psi;
        }
        if den > T::min_positive_value() {
            num / den
        } else {
            T::zero()
        }
    }

    fn is_valid(&self) -> bool {
        !self.centers.is_empty()
            && self.centers.len() == self.widths.len()
            && self.centers[0] == T::one()
            && self.centers.windows(2).all(|w| w[1] < w[0])
            && self.widths.iter().all(|&h| h > T::zero() && h.is_finite())
    }
}

/// Locally weighted regression of `target ≈ w_i ξ` per basis function.
///
/// `w_i = Σ_t ψ_i(x_t) ξ_t f_t / (Σ_t ψ_i(x_t) ξ_t² + 1e−12 Σ_t ψ_i(x_t))`.
pub fn lwr_weights<T: Scalar>(basis: &Basis<T>, phases: &[T], xi: &[T], target: &[T]) -> Vec<T> {
    let ridge = T::lit(1e-12);
    let mut num = vec![T::zero(); basis.len()];
    let mut den = vec![T::zero(); basis.len()];
    let mut mass = vec![T::zero(); basis.len()];
    for ((&x, &s), &f) in phases.iter().zip(xi).zip(target) {
        for (i, psi) in basis.activations(x).into_iter().enumerate() {
            num[i] = num[i] + psi * s * f;
            den[i] = den[i] + psi * s * s;
            mass[i] = mass[i] + psi;
        }
    }
    num.iter()
        .zip(&den)
        .zip(&mass)
        .map(|((&n, &d), &m)| {
            let denom = d + ridge * m;
            if denom > T::zero() {
                n / denom
            } else {
                T::zero()
            }
        })
        .collect()
}

/// Central differences on a uniform grid, one-sided at both ends.
pub fn finite_difference<T: Scalar>(values: &[T], dt: T) -> Vec<T> {
    let n = values.len();
    let two_dt = dt * T::lit(2.0);
    (0..n)
        .map(|k| match k {
            0 => (values[1] - values[0]) / dt,
            k if k == n - 1 => (values[n - 1] - values[n - 2]) / dt,
            k => (values[k + 1] - values[k - 1]) / two_dt,
        })
        .collect()
}

/// Learned multi-dimensional primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpModel<T> {
    pub config: DmpConfig<T>,
    /// Demonstration duration in seconds.
    pub tau: T,
    pub y0: Vec<T>,
    pub goal: Vec<T>,
    pub basis: Basis<T>,
    /// One row of `n_basis` weights per dimension.
    pub weights: Vec<Vec<T>>,
}

/// Integrated trajectory with per-step phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout<T> {
    pub times: Vec<T>,
    pub positions: Vec<Vec<T>>,
    pub velocities: Vec<Vec<T>>,
    pub phases: Vec<T>,
}

impl<T> Rollout<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Fits one primitive per column of `stream` in `rec`.
pub fn fit_dmp(rec: &Recording, stream: &str, cfg: &DmpConfig<f64>) -> Result<DmpModel<f64>> {
    let s = rec
        .stream(stream)
        .ok_or_else(|| DmpError::MissingStream(stream.to_string()))?;
    let rows: Vec<Vec<f64>> = s.rows().take(rec.frames).map(<[f64]>::to_vec).collect();
    fit_dmp_samples(&rows, rec.dt, cfg)
}

/// Fits from uniformly sampled rows `samples[frame][dim]`.
pub fn fit_dmp_samples<T: Scalar>(samples: &[Vec<T>], dt: T, cfg: &DmpConfig<T>) -> Result<DmpModel<T>> {
    cfg.validate()?;
    let n = samples.len();
    if n < 3 {
        return Err(DmpError::TooFewFrames(n));
    }
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(DmpError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let dims = samples[0].len();
    for (k, row) in samples.iter().enumerate() {
        if row.len() != dims {
            return Err(DmpError::InvalidArgument(format!(
                "frame {k} has {} components, expected {dims}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(DmpError::NonFiniteSample(k));
        }
    }

    let tau = T::from_usize_lossy(n - 1) * dt;
    let basis = Basis::from_config(cfg);
    let phases: Vec<T> = (0..n)
        .map(|k| phase(T::from_usize_lossy(k) * dt, tau, cfg.alpha_x))
        .collect();
    let y0 = samples[0].clone();
    let goal = samples[n - 1].clone();

    let weights = (0..dims)
        .map(|d| {
            let amplitude = goal[d] - y0[d];
            if amplitude.abs() < cfg.amplitude_floor {
                return vec![T::zero(); cfg.n_basis];
            }
            let y: Vec<T> = samples.iter().map(|r| r[d]).collect();
            let target = forcing_target(&y, dt, tau, goal[d], cfg);
            let xi: Vec<T> = phases.iter().map(|&x| x * amplitude).collect();
            lwr_weights(&basis, &phases, &xi, &target)
        })
        .collect();

    Ok(DmpModel {
        config: cfg.clone(),
        tau,
        y0,
        goal,
        basis,
        weights,
    })
}

/// `f*(t) = τ² ÿ − α_z (β_z (g − y) − τ ẏ)`.
fn forcing_target<T: Scalar>(y: &[T], dt: T, tau: T, goal: T, cfg: &DmpConfig<T>) -> Vec<T> {
    let yd = finite_difference(y, dt);
    let ydd = finite_difference(&yd, dt);
    y.iter()
        .zip(&yd)
        .zip(&ydd)
        .map(|((&y, &v), &a)| tau * tau * a - cfg.alpha_z * (cfg.beta_z * (goal - y) - tau * v))
        .collect()
}

/// Step count `⌈τ/dt⌉` tolerant to representation error in the quotient.
fn step_count<T: Scalar>(tau: T, dt: T) -> usize {
    let q = (tau / dt).to_f64_lossy();
    (q - 1e-9 * q.max(1.0)).ceil().max(1.0) as usize
}

fn check_horizon<T: Scalar>(tau: T, dt: T) -> Result<()> {
    if !(tau > T::zero() && tau.is_finite()) {
        return Err(DmpError::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if !(dt > T::zero()) || dt > tau / T::lit(10.0) {
        return Err(DmpError::InvalidArgument(format!(
            "dt must be in (0, tau/10], got dt={dt} tau={tau}"
        )));
    }
    Ok(())
}

impl<T: Scalar> DmpModel<T> {
    pub fn dims(&self) -> usize {
        self.y0.len()
    }

    /// Re-checks structural invariants (used after deserialization).
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if !(self.tau > T::zero() && self.tau.is_finite()) {
            return Err(DmpError::InvalidConfig("tau must be positive".into()));
        }
        if !self.basis.is_valid() || self.basis.len() != self.config.n_basis {
            return Err(DmpError::InvalidConfig(
                "basis centers must start at 1 and strictly decrease with positive widths".into(),
            ));
        }
        let d = self.dims();
        if self.goal.len() != d || self.weights.len() != d {
            return Err(DmpError::InvalidConfig("dimension mismatch between y0, goal and weights".into()));
        }
        if self
            .weights
            .iter()
            .any(|w| w.len() != self.basis.len() || w.iter().any(|v| !v.is_finite()))
        {
            return Err(DmpError::InvalidConfig("weights must be finite, one per basis".into()));
        }
        Ok(())
    }

    /// Forcing term for dimension `d` at phase `x` with amplitude `g − y0`.
    pub fn forcing(&self, d: usize, x: T, amplitude: T) -> T {
        if amplitude.abs() < self.config.amplitude_floor {
            return T::zero();
        }
        self.basis.blend(x, &self.weights[d]) * x * amplitude
    }

    /// Rolls out with the demonstrated start, goal and duration.
    pub fn reproduce(&self, dt: T) -> Result<Rollout<T>> {
        self.rollout(&self.y0, &self.goal, self.tau, dt)
    }

    /// Integrates from `t = 0` to `t = tau` inclusive with RK4.
    pub fn rollout(&self, y0: &[T], goal: &[T], tau: T, dt: T) -> Result<Rollout<T>> {
        self.rollout_until(y0, goal, tau, dt, tau)
    }

    /// Like [`rollout`](Self::rollout) but keeps integrating until `t_end ≥ tau`.
    pub fn rollout_until(&self, y0: &[T], goal: &[T], tau: T, dt: T, t_end: T) -> Result<Rollout<T>> {
        let dims = self.dims();
        if y0.len() != dims || goal.len() != dims {
            return Err(DmpError::InvalidArgument(format!(
                "start/goal must have {dims} components"
            )));
        }
        check_horizon(tau, dt)?;
        if !(t_end >= tau && t_end.is_finite()) {
            return Err(DmpError::InvalidArgument(format!("t_end {t_end} is before tau {tau}")));
        }
        let steps = step_count(t_end, dt);
        let amplitude: Vec<T> = goal.iter().zip(y0).map(|(&g, &s)| g - s).collect();
        let cfg = &self.config;

        // state = [x, y_0..y_D, z_0..z_D], derivatives with respect to s = t/τ
        let deriv = |s: &[T]| -> Vec<T> {
            let x = s[0];
            let mut out = vec![T::zero(); 1 + 2 * dims];
            out[0] = -cfg.alpha_x * x;
            for d in 0..dims {
                let y = s[1 + d];
                let z = s[1 + dims + d];
                out[1 + d] = z;
                out[1 + dims + d] = cfg.alpha_z * (cfg.beta_z * (goal[d] - y) - z)
                    + self.forcing(d, x, amplitude[d]);
            }
            out
        };

        let mut state = vec![T::zero(); 1 + 2 * dims];
        state[0] = T::one();
        state[1..=dims].copy_from_slice(y0);

        let mut out = Rollout {
            times: Vec::with_capacity(steps + 1),
            positions: Vec::with_capacity(steps + 1),
            velocities: Vec::with_capacity(steps + 1),
            phases: Vec::with_capacity(steps + 1),
        };
        let record = |out: &mut Rollout<T>, t: T, s: &[T]| {
            out.times.push(t);
            out.phases.push(s[0]);
            out.positions.push(s[1..=dims].to_vec());
            out.velocities.push(s[1 + dims..].iter().map(|&z| z / tau).collect());
        };
        record(&mut out, T::zero(), &state);

        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);
        let two = T::lit(2.0);
        for k in 1..=steps {
            let t_prev = T::from_usize_lossy(k - 1) * dt;
            let t = if k == steps { t_end } else { T::from_usize_lossy(k) * dt };
            let u = (t - t_prev) / tau;
            let axpy = |a: &[T], b: &[T], h: T| -> Vec<T> { a.iter().zip(b).map(|(&a, &b)| a + h * b).collect() };
            let k1 = deriv(&state);
            let k2 = deriv(&axpy(&state, &k1, u * half));
            let k3 = deriv(&axpy(&state, &k2, u * half));
            let k4 = deriv(&axpy(&state, &k3, u));
            for i in 0..state.len() {
                state[i] = state[i] + u * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            }
            if state.iter().any(|v| !v.is_finite()) {
                return Err(DmpError::NonFiniteState(k));
            }
            record(&mut out, t, &state);
        }
        Ok(out)
    }
}

/// Quaternion primitive driven by the rotation-vector error to the goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationDmp<T> {
    pub config: DmpConfig<T>,
    pub tau: T,
    pub q0: Quaternion<T>,
    pub q_goal: Quaternion<T>,
    pub basis: Basis<T>,
    /// Three rows (rotation-vector axes) of `n_basis` weights.
    pub weights: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationRollout<T> {
    pub times: Vec<T>,
    pub orientations: Vec<Quaternion<T>>,
    /// Angular velocity in rad/s.
    pub angular_velocities: Vec<[T; 3]>,
    pub phases: Vec<T>,
}

/// Fits an orientation primitive to a `(w, x, y, z)` quaternion stream.
pub fn fit_orientation_dmp(rec: &Recording, stream: &str, cfg: &DmpConfig<f64>) -> Result<OrientationDmp<f64>> {
    let s = rec
        .stream(stream)
        .ok_or_else(|| DmpError::MissingStream(stream.to_string()))?;
    if s.dims != 4 {
        return Err(DmpError::InvalidArgument(format!(
            "stream `{stream}` has {} components, quaternions need 4",
            s.dims
        )));
    }
    let quats: Vec<Quaternion<f64>> = s.rows().take(rec.frames).map(Quaternion::from_slice).collect();
    fit_orientation_samples(&quats, rec.dt, cfg)
}

pub fn fit_orientation_samples<T: Scalar>(
    quats: &[Quaternion<T>],
    dt: T,
    cfg: &DmpConfig<T>,
) -> Result<OrientationDmp<T>> {
    cfg.validate()?;
    let n = quats.len();
    if n < 3 {
        return Err(DmpError::TooFewFrames(n));
    }
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(DmpError::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let mut q: Vec<Quaternion<T>> = Vec::with_capacity(n);
    for (k, &raw) in quats.iter().enumerate() {
        if !raw.is_finite() {
            return Err(DmpError::NonFiniteSample(k));
        }
        let norm = raw.norm();
        if norm == T::zero() {
            return Err(DmpError::ZeroNormQuaternion(k));
        }
        let mut u = raw.scale(T::one() / norm);
        if let Some(&prev) = q.last() {
            if u.dot(prev) < T::zero() {
                u = u.scale(-T::one());
            }
        }
        q.push(u);
    }

    let tau = T::from_usize_lossy(n - 1) * dt;
    let basis = Basis::from_config(cfg);
    let phases: Vec<T> = (0..n)
        .map(|k| phase(T::from_usize_lossy(k) * dt, tau, cfg.alpha_x))
        .collect();
    let q0 = q[0];
    let q_goal = q[n - 1];

    let error: Vec<[T; 3]> = q.iter().map(|qt| qt.error_to(q_goal)).collect();
    // angular velocity from rotation between neighbouring frames
    let omega: Vec<[T; 3]> = (0..n)
        .map(|k| {
            let (a, b, span) = match k {
                0 => (0, 1, dt),
                k if k == n - 1 => (n - 2, n - 1, dt),
                k => (k - 1, k + 1, dt * T::lit(2.0)),
            };
            let r = q[a].error_to(q[b]);
            [r[0] / span, r[1] / span, r[2] / span]
        })
        .collect();

    let weights = (0..3)
        .map(|axis| {
            let w: Vec<T> = omega.iter().map(|o| o[axis]).collect();
            let wd = finite_difference(&w, dt);
            let target: Vec<T> = (0..n)
                .map(|k| {
                    tau * tau * wd[k]
                        - cfg.alpha_z * (cfg.beta_z * error[k][axis] - tau * w[k])
                })
                .collect();
            lwr_weights(&basis, &phases, &phases, &target)
        })
        .collect();

    Ok(OrientationDmp {
        config: cfg.clone(),
        tau,
        q0,
        q_goal,
        basis,
        weights,
    })
}

impl<T: Scalar> OrientationDmp<T> {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let tol = T::lit(1e-9);
        if (self.q0.norm() - T::one()).abs() > tol || (self.q_goal.norm() - T::one()).abs() > tol {
            return Err(DmpError::InvalidConfig("q0 and q_goal must be unit quaternions".into()));
        }
        if !(self.tau > T::zero()) || !self.basis.is_valid() || self.basis.len() != self.config.n_basis {
            return Err(DmpError::InvalidConfig("invalid tau or basis".into()));
        }
        if self.weights.len() != 3
            || self
                .weights
                .iter()
                .any(|w| w.len() != self.basis.len() || w.iter().any(|v| !v.is_finite()))
        {
            return Err(DmpError::InvalidConfig("weights must be 3 finite rows".into()));
        }
        Ok(())
    }

    /// Semi-implicit Euler on the rotational system, stepping `q` by the
    /// exponential map and renormalizing every step.
    pub fn rollout(
        &self,
        q0: Quaternion<T>,
        q_goal: Quaternion<T>,
        tau: T,
        dt: T,
    ) -> Result<OrientationRollout<T>> {
        check_horizon(tau, dt)?;
        for q in [q0, q_goal] {
            if !q.is_finite() || q.norm() == T::zero() {
                return Err(DmpError::InvalidArgument("start and goal must be non-zero quaternions".into()));
            }
        }
        let q_goal = q_goal.normalized();
        let cfg = &self.config;
        let steps = step_count(tau, dt);

        let mut q = q0.normalized();
        let mut eta = [T::zero(); 3];
        let mut x = T::one();
        let mut out = OrientationRollout {
            times: vec![T::zero()],
            orientations: vec![q],
            angular_velocities: vec![[T::zero(); 3]],
            phases: vec![x],
        };
        let half = T::lit(0.5);
        for k in 1..=steps {
            let t_prev = T::from_usize_lossy(k - 1) * dt;
            let t = if k == steps { tau } else { T::from_usize_lossy(k) * dt };
            let h = t - t_prev;
            let e = q.error_to(q_goal);
            for a in 0..3 {
                let f = self.basis.blend(x, &self.weights[a]) * x;
                let deta = (cfg.alpha_z * (cfg.beta_z * e[a] - eta[a]) + f) / tau;
                eta[a] = eta[a] + h * deta;
            }
            let s = h / tau * half;
            q = Quaternion::exp([eta[0] * s, eta[1] * s, eta[2] * s]).mul(q).normalized();
            x = phase(t, tau, cfg.alpha_x);
            if !q.is_finite() || eta.iter().any(|v| !v.is_finite()) {
                return Err(DmpError::NonFiniteState(k));
            }
            out.times.push(t);
            out.orientations.push(q);
            out.angular_velocities.push([eta[0] / tau, eta[1] / tau, eta[2] / tau]);
            out.phases.push(x);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_closed_form() {
        assert_eq!(phase(0.0, 2.0, 8.0), 1.0);
        let ax = 25.0 / 3.0;
        let tau = 1.7;
        assert!((phase(tau * 2f64.ln() / ax, tau, ax) - 0.5).abs() < 1e-15);
        let x = phase(tau, tau, ax);
        assert!((x - (-ax).exp()).abs() < 1e-18);
        assert!((x - 2.4e-4).abs() < 0.05e-4);
    }

    #[test]
    fn basis_placement() {
        let cfg = DmpConfig::<f64>::with_basis(5);
        let b = Basis::from_config(&cfg);
        assert_eq!(b.centers[0], 1.0);
        assert!((b.centers[4] - (-cfg.alpha_x).exp()).abs() < 1e-15);
        assert!(b.centers.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(b.widths[4], b.widths[3]);
        let d = b.centers[1] - b.centers[0];
        assert!((b.widths[0] - 1.0 / (d * d)).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(DmpConfig::<f64>::with_basis(1).validate().is_err());
        let mut c = DmpConfig::<f64>::default();
        c.alpha_z = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rollout_rejects_coarse_dt() {
        let m = fit_dmp_samples(&[vec![0.0], vec![0.5], vec![1.0]], 0.1, &DmpConfig::with_basis(3)).unwrap();
        assert!(matches!(m.rollout(&[0.0], &[1.0], 1.0, 0.2), Err(DmpError::InvalidArgument(_))));
        assert!(matches!(m.rollout(&[0.0, 1.0], &[1.0], 1.0, 0.01), Err(DmpError::InvalidArgument(_))));
    }

    #[test]
    fn too_few_frames() {
        let r = fit_dmp_samples(&[vec![0.0], vec![1.0]], 0.1, &DmpConfig::with_basis(3));
        assert_eq!(r.unwrap_err(), DmpError::TooFewFrames(2));
    }

    #[test]
    fn non_finite_sample_is_reported() {
        let r = fit_dmp_samples(&[vec![0.0], vec![f64::NAN], vec![1.0]], 0.1, &DmpConfig::with_basis(3));
        assert_eq!(r.unwrap_err(), DmpError::NonFiniteSample(1));
    }

    #[test]
    fn step_count_handles_inexact_quotients() {
        assert_eq!(step_count(1.0, 0.01), 100);
        assert_eq!(step_count(0.3, 0.1), 3);
        assert_eq!(step_count(1.05, 0.1), 11);
    }
}
