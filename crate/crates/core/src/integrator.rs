//! Fixed-step explicit integration of the network with delayed lookups.
//!
//! Delayed arguments are read from the [`Trajectory`] built so far. A Runge–Kutta
//! stage at time `t_n + c h` sees the past through a [`StageView`]:
//!
//! * `s ≤ t_n` comes from the trajectory (initial function for `s ≤ 0`);
//! * `s = t_n + c h` is the stage vector itself, so undelayed terms
//!   (a Dirac atom at zero) reproduce classical RK4;
//! * `t_n < s < t_n + c h` (an effective delay shorter than the stage offset)
//!   is linear between the last state and the stage vector. These lookups are
//!   counted and reported.

use std::cell::Cell;

use thiserror::Error;

use crate::dynamics::{rhs, ModelError, NetworkModel, OutputFunction};
use crate::history::{HistoryError, HistoryFunction, Interpolation, StateHistory, Trajectory};
use crate::kernels::QuadraturePlan;
use crate::Scalar;

/// Component magnitude treated as blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("lookup for quadrature node {k} (s = {s}) failed: {source}")]
pub struct ConvolveError {
    pub k: usize,
    pub s: f64,
    #[source]
    pub source: HistoryError,
}

/// `Σₖ w_k g(t, xʲ(t − τ − s_k))` for node `node`.
pub fn convolve<T: Scalar>(
    plan: &QuadraturePlan<T>,
    g: &OutputFunction<T>,
    past: &dyn StateHistory<T>,
    node: usize,
    t: T,
    tau: T,
    out: &mut [T],
) -> Result<(), ConvolveError> {
    let n = out.len();
    let mut xj = vec![T::zero(); n];
    let mut gx = vec![T::zero(); n];
    out.fill(T::zero());
    for (k, q) in plan.nodes().iter().enumerate() {
        past.node_into(t - tau - q.s, node, &mut xj)
            .map_err(|source| ConvolveError {
                k,
                s: q.s.as_f64(),
                source,
            })?;
        g.eval_into(t, &xj, &mut gx);
        for (o, &v) in out.iter_mut().zip(&gx) {
            *o += q.weight * v;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub method: Method,
    pub step: T,
    pub horizon: T,
    /// Output thinning for written artifacts; the trajectory keeps every step.
    pub output_stride: usize,
    pub interpolation: Interpolation,
}

impl<T: Scalar> IntegratorConfig<T> {
    pub fn new(method: Method, step: T, horizon: T) -> Self {
        Self {
            method,
            step,
            horizon,
            output_stride: 1,
            interpolation: Interpolation::Linear,
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError<T>> {
        if !(self.step > T::zero()) || !self.step.is_finite() {
            return Err(IntegrateError::Config(format!(
                "step must be positive, got {}",
                self.step
            )));
        }
        if !(self.horizon >= self.step) || !self.horizon.is_finite() {
            return Err(IntegrateError::Config(format!(
                "horizon {} must be at least the step {}",
                self.horizon, self.step
            )));
        }
        if self.output_stride == 0 {
            return Err(IntegrateError::Config(
                "output_stride must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land exactly on the horizon.
    pub fn step_count(&self) -> usize {
        let ratio = (self.horizon / self.step).as_f64();
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            rounded as usize
        } else {
            ratio.ceil() as usize
        }
    }

    fn time_of(&self, k: usize, steps: usize) -> T {
        if k == steps {
            self.horizon
        } else {
            T::from_usize(k).unwrap() * self.step
        }
    }
}

#[derive(Debug, Error)]
pub enum IntegrateError<T> {
    #[error("invalid integrator configuration: {0}")]
    Config(String),
    #[error("initial function does not match the model: {0}")]
    Initial(#[source] HistoryError),
    #[error("state blew up at t = {time}")]
    BlowUp {
        time: f64,
        /// Samples up to the last good step.
        partial: Box<Trajectory<T>>,
    },
    #[error("right-hand side failed at t = {time}: {source}")]
    Model {
        time: f64,
        #[source]
        source: ModelError,
        partial: Box<Trajectory<T>>,
    },
}

impl<T> IntegrateError<T> {
    /// Whatever was computed before the failure.
    pub fn partial(&self) -> Option<&Trajectory<T>> {
        match self {
            IntegrateError::BlowUp { partial, .. } | IntegrateError::Model { partial, .. } => {
                Some(partial)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Integration<T> {
    pub trajectory: Trajectory<T>,
    /// Stage lookups that fell strictly inside the current step.
    pub extrapolated_lookups: usize,
}

/// Past as seen from one Runge–Kutta stage.
struct StageView<'a, T> {
    traj: &'a Trajectory<T>,
    t_n: T,
    stage_t: T,
    stage_y: &'a [T],
    node_dim: usize,
    inside_step: Cell<usize>,
}

impl<T: Scalar> StageView<'_, T> {
    fn blend(&self, s: T, lo: usize, out: &mut [T]) -> Result<(), HistoryError> {
        let width = out.len();
        if s <= self.t_n {
            return if width == self.stage_y.len() {
                self.traj.state_into(s, out)
            } else {
                self.traj.node_into(s, lo / width, out)
            };
        }
        let stage = &self.stage_y[lo..lo + width];
        if s >= self.stage_t {
            if s > self.stage_t {
                return Err(HistoryError::BeyondLastSample {
                    t: s.as_f64(),
                    last: self.stage_t.as_f64(),
                });
            }
            out.copy_from_slice(stage);
            return Ok(());
        }
        self.inside_step.set(self.inside_step.get() + 1);
        let last = &self.traj.last_state()[lo..lo + width];
        let theta = (s - self.t_n) / (self.stage_t - self.t_n);
        for ((o, &a), &b) in out.iter_mut().zip(last).zip(stage) {
            *o = a + theta * (b - a);
        }
        Ok(())
    }
}

impl<T: Scalar> StateHistory<T> for StageView<'_, T> {
    fn dim(&self) -> usize {
        self.stage_y.len()
    }

    fn state_into(&self, t: T, out: &mut [T]) -> Result<(), HistoryError> {
        self.blend(t, 0, out)
    }

    fn node_into(&self, t: T, node: usize, out: &mut [T]) -> Result<(), HistoryError> {
        debug_assert_eq!(out.len(), self.node_dim);
        self.blend(t, node * out.len(), out)
    }
}

fn blown_up<T: Scalar>(x: &[T]) -> bool {
    let limit = T::lit(BLOW_UP_THRESHOLD);
    x.iter().any(|v| !v.is_finite() || v.abs() > limit)
}

/// Integrates `model` from the initial function over `[0, horizon]`.
pub fn integrate<T: Scalar>(
    model: &NetworkModel<T>,
    initial: HistoryFunction<T>,
    config: &IntegratorConfig<T>,
) -> Result<Integration<T>, IntegrateError<T>> {
    config.validate()?;
    let n = model.node_dim();
    let d = model.state_dim();
    let mut traj = Trajectory::new(model.nodes(), n, initial, config.interpolation)
        .map_err(IntegrateError::Initial)?;
    if blown_up(traj.last_state()) {
        return Err(IntegrateError::BlowUp {
            time: 0.0,
            partial: Box::new(traj),
        });
    }
    let steps = config.step_count();
    let mut inside = 0usize;
    let (mut k1, mut k2, mut k3, mut k4) = (
        vec![T::zero(); d],
        vec![T::zero(); d],
        vec![T::zero(); d],
        vec![T::zero(); d],
    );
    let mut y = vec![T::zero(); d];
    let mut next = vec![T::zero(); d];
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);

    for k in 0..steps {
        let t_n = config.time_of(k, steps);
        let h = if k + 1 == steps {
            config.horizon - t_n
        } else {
            config.step
        };
        let x_n = traj.last_state().to_vec();

        let mut stage =
            |t: T, y: &[T], out: &mut [T], traj: &Trajectory<T>| -> Result<(), ModelError> {
                let view = StageView {
                    traj,
                    t_n,
                    stage_t: t,
                    stage_y: y,
                    node_dim: n,
                    inside_step: Cell::new(0),
                };
                let r = rhs(model, t, &view, out);
                inside += view.inside_step.get();
                r
            };
        let fail = |source: ModelError, traj: Trajectory<T>| IntegrateError::Model {
            time: t_n.as_f64(),
            source,
            partial: Box::new(traj),
        };

        match config.method {
            Method::Euler => {
                if let Err(e) = stage(t_n, &x_n, &mut k1, &traj) {
                    return Err(fail(e, traj));
                }
                for i in 0..d {
                    next[i] = x_n[i] + h * k1[i];
                }
            }
            Method::Rk4 => {
                let t_mid = t_n + half * h;
                let t_end = t_n + h;
                let r = stage(t_n, &x_n, &mut k1, &traj).and_then(|_| {
                    for i in 0..d {
                        y[i] = x_n[i] + half * h * k1[i];
                    }
                    stage(t_mid, &y, &mut k2, &traj)?;
                    for i in 0..d {
                        y[i] = x_n[i] + half * h * k2[i];
                    }
                    stage(t_mid, &y, &mut k3, &traj)?;
                    for i in 0..d {
                        y[i] = x_n[i] + h * k3[i];
                    }
                    stage(t_end, &y, &mut k4, &traj)
                });
                if let Err(e) = r {
                    return Err(fail(e, traj));
                }
                for i in 0..d {
                    next[i] = x_n[i] + h * sixth * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
                }
            }
        }

        let t_next = config.time_of(k + 1, steps);
        if blown_up(&next) {
            return Err(IntegrateError::BlowUp {
                time: t_next.as_f64(),
                partial: Box::new(traj),
            });
        }
        traj.append(t_next, &next)
            .expect("strictly increasing finite sample");
    }

    Ok(Integration {
        trajectory: traj,
        extrapolated_lookups: inside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{
        CouplingSchedule, DelaySchedule, NetworkModel, NodeDynamics, QuadratureSettings,
    };
    use crate::history::FnHistory;
    use crate::kernels::{build_quadrature, make_kernel, DelayKernel, KernelSpec};
    use crate::linalg::Matrix;

    fn identity_g() -> OutputFunction<f64> {
        OutputFunction::linear(Matrix::identity(1)).unwrap()
    }

    fn decay_model() -> NetworkModel<f64> {
        NetworkModel::with_uniform_kernel(
            NodeDynamics::new(1, |_, u: &[f64], o: &mut [f64]| o[0] = -u[0]),
            identity_g(),
            CouplingSchedule::constant(Matrix::zeros(1, 1)).unwrap(),
            DelaySchedule::zero(),
            DelayKernel::dirac_zero(),
            QuadratureSettings::default(),
        )
        .unwrap()
    }

    /// ẋ = -x(t - 1).
    fn pure_delay_model() -> NetworkModel<f64> {
        NetworkModel::with_uniform_kernel(
            NodeDynamics::new(1, |_, _: &[f64], o: &mut [f64]| o[0] = 0.0),
            identity_g(),
            CouplingSchedule::constant(Matrix::from_rows(&[vec![-1.0]]).unwrap()).unwrap(),
            DelaySchedule::split(1.0, 1.0),
            DelayKernel::dirac_zero(),
            QuadratureSettings::default(),
        )
        .unwrap()
    }

    fn one() -> HistoryFunction<f64> {
        HistoryFunction::constant(vec![1.0]).unwrap()
    }

    fn final_value(model: &NetworkModel<f64>, method: Method, h: f64, horizon: f64) -> f64 {
        let out = integrate(model, one(), &IntegratorConfig::new(method, h, horizon)).unwrap();
        out.trajectory.last_state()[0]
    }

    #[test]
    fn rk4_exponential_decay() {
        let x1 = final_value(&decay_model(), Method::Rk4, 1e-3, 1.0);
        assert!((x1 - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn undelayed_rk4_matches_classical_rk4_bitwise() {
        let h = 0.01;
        let out = integrate(
            &decay_model(),
            one(),
            &IntegratorConfig::new(Method::Rk4, h, 0.5),
        )
        .unwrap();
        let mut x = 1.0f64;
        for _ in 0..50 {
            let k1 = -x;
            let k2 = -(x + 0.5 * h * k1);
            let k3 = -(x + 0.5 * h * k2);
            let k4 = -(x + h * k3);
            x += h * (1.0 / 6.0) * (k1 + 2.0 * (k2 + k3) + k4);
        }
        assert_eq!(out.trajectory.last_state()[0], x);
        assert_eq!(out.extrapolated_lookups, 0);
    }

    #[test]
    fn method_of_steps_oracle() {
        // x = 1 - t on [0, 1]; x = -((t-1) - (t-1)²/2) on [1, 2].
        let model = pure_delay_model();
        let out = integrate(
            &model,
            one(),
            &IntegratorConfig::new(Method::Rk4, 1e-3, 2.0),
        )
        .unwrap();
        let tr = &out.trajectory;
        assert!(tr.eval(1.0).unwrap()[0].abs() < 1e-6);
        assert!((tr.eval(2.0).unwrap()[0] + 0.5).abs() < 1e-6);
        assert!((tr.eval(1.5).unwrap()[0] + (0.5 - 0.125)).abs() < 1e-6);
        assert_eq!(out.extrapolated_lookups, 0);
    }

    #[test]
    fn euler_and_rk4_orders() {
        let exact = (-1.0f64).exp();
        let model = decay_model();
        let err = |m, h| (final_value(&model, m, h, 1.0) - exact).abs();
        let rk = err(Method::Rk4, 0.02) / err(Method::Rk4, 0.01);
        let eu = err(Method::Euler, 0.02) / err(Method::Euler, 0.01);
        assert!((12.0..=20.0).contains(&rk), "rk4 ratio {rk}");
        assert!((1.8..=2.2).contains(&eu), "euler ratio {eu}");
    }

    #[test]
    fn ragged_horizon_lands_exactly() {
        let cfg = IntegratorConfig::new(Method::Rk4, 0.3, 1.0);
        assert_eq!(cfg.step_count(), 4);
        let out = integrate(&decay_model(), one(), &cfg).unwrap();
        assert_eq!(out.trajectory.last_time(), 1.0);
        assert!((out.trajectory.last_state()[0] - (-1.0f64).exp()).abs() < 1e-4);
        assert_eq!(
            IntegratorConfig::new(Method::Rk4, 1e-3, 1.0).step_count(),
            1000
        );
    }

    #[test]
    fn short_delay_falls_back_inside_step() {
        let model = NetworkModel::with_uniform_kernel(
            NodeDynamics::new(1, |_, _: &[f64], o: &mut [f64]| o[0] = 0.0),
            identity_g(),
            CouplingSchedule::constant(Matrix::from_rows(&[vec![-1.0]]).unwrap()).unwrap(),
            DelaySchedule::split(0.002, 0.002),
            DelayKernel::dirac_zero(),
            QuadratureSettings::default(),
        )
        .unwrap();
        let out = integrate(
            &model,
            one(),
            &IntegratorConfig::new(Method::Rk4, 0.01, 1.0),
        )
        .unwrap();
        assert!(out.extrapolated_lookups > 0);
        // Close to the undelayed decay for a tiny delay.
        assert!((out.trajectory.last_state()[0] - (-1.0f64).exp()).abs() < 5e-3);
    }

    #[test]
    fn blow_up_is_reported_with_partial_trajectory() {
        let model = NetworkModel::with_uniform_kernel(
            NodeDynamics::new(1, |_, u: &[f64], o: &mut [f64]| o[0] = u[0] * u[0]),
            identity_g(),
            CouplingSchedule::constant(Matrix::zeros(1, 1)).unwrap(),
            DelaySchedule::zero(),
            DelayKernel::dirac_zero(),
            QuadratureSettings::default(),
        )
        .unwrap();
        // x' = x², x(0) = 1 blows up at t = 1.
        let err = integrate(
            &model,
            one(),
            &IntegratorConfig::new(Method::Rk4, 1e-3, 2.0),
        )
        .unwrap_err();
        match &err {
            IntegrateError::BlowUp { time, partial } => {
                assert!(*time > 0.9 && *time < 1.01, "{time}");
                assert!(partial.last_time() < *time);
            }
            other => panic!("{other}"),
        }
        assert!(err.partial().is_some());
    }

    #[test]
    fn rejects_bad_config() {
        let bad = IntegratorConfig::new(Method::Rk4, 0.0, 1.0);
        assert!(matches!(
            integrate(&decay_model(), one(), &bad),
            Err(IntegrateError::Config(_))
        ));
        let bad = IntegratorConfig::new(Method::Rk4, 1.0, 0.5);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn deterministic_reruns() {
        let cfg = IntegratorConfig::new(Method::Rk4, 1e-2, 3.0);
        let a = integrate(&pure_delay_model(), one(), &cfg)
            .unwrap()
            .trajectory;
        let b = integrate(&pure_delay_model(), one(), &cfg)
            .unwrap()
            .trajectory;
        for k in 0..a.len() {
            assert_eq!(a.sample(k)[0].to_bits(), b.sample(k)[0].to_bits());
        }
    }

    #[test]
    fn convolve_examples() {
        let g = identity_g();
        let sin_past = FnHistory::new(1, |t: f64, o: &mut [f64]| o[0] = t.sin());
        // Dirac at zero with delay tau reads x(t - tau).
        let dirac = build_quadrature(&DelayKernel::dirac_zero(), 1e-9, 0.1);
        let mut out = [0.0];
        convolve(&dirac, &g, &sin_past, 0, 2.0, 0.5, &mut out).unwrap();
        assert_eq!(out[0], 1.5f64.sin());

        let two = make_kernel(&KernelSpec::Mixture(vec![
            KernelSpec::Dirac {
                at: 0.0,
                weight: 0.5,
            },
            KernelSpec::Dirac {
                at: 1.0,
                weight: 0.5,
            },
        ]))
        .unwrap();
        let plan = build_quadrature(&two, 1e-9, 0.1);
        let c = FnHistory::new(1, |_: f64, o: &mut [f64]| o[0] = 3.25);
        convolve(&plan, &g, &c, 0, 0.0, 0.0, &mut out).unwrap();
        assert_eq!(out[0], 3.25);
    }

    #[test]
    fn convolve_reports_failing_node() {
        let phi = HistoryFunction::constant(vec![1.0]).unwrap();
        let traj = Trajectory::new(1, 1, phi, Interpolation::Linear).unwrap();
        let plan = build_quadrature(&DelayKernel::dirac_zero(), 1e-9, 0.1);
        let mut out = [0.0];
        let err = convolve(&plan, &identity_g(), &traj, 0, 1.0, 0.0, &mut out).unwrap_err();
        assert_eq!(err.k, 0);
        assert!(matches!(err.source, HistoryError::BeyondLastSample { .. }));
    }
}
