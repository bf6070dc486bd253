//! Randomized falsification of the standing regularity assumptions:
//!
//! * A1: `f` continuous and (when a constant is declared) Lipschitz in `u`;
//! * A2: `A(t)` continuous;
//! * A3: `‖g(t,u₁) − g(t,u₂)‖ ≤ κ(t) ‖u₁ − u₂‖` with `κ(t) ≥ 0`;
//! * A4: `τ_ij(t) ≥ 0` and continuous.
//!
//! Finite sampling can only refute these, so each finding is either a
//! concrete witness or "nothing found in N samples".
//!
//! Continuity probes bisect a random segment towards its largest increment.
//! For a continuous function the increment shrinks to roundoff; a jump that
//! the segment crosses survives every halving.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NetworkModel;
use crate::linalg::norm2;
use crate::Scalar;

const BISECTIONS: usize = 48;
const LIPSCHITZ_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Witness<T> {
    /// `lhs = ‖h(t,u₁) − h(t,u₂)‖ > rhs = bound · ‖u₁ − u₂‖`.
    Lipschitz {
        t: T,
        u1: Vec<T>,
        u2: Vec<T>,
        lhs: T,
        rhs: T,
    },
    /// Increment `jump` persists across an interval of width `width`
    /// starting at time `t` (and state `u`, when the probe moved in state).
    Discontinuity {
        t: T,
        u: Option<Vec<T>>,
        width: T,
        jump: T,
    },
    NegativeDelay {
        i: usize,
        j: usize,
        t: T,
        value: T,
    },
    NegativeKappa {
        t: T,
        value: T,
    },
    NonFinite {
        t: T,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Finding<T> {
    NoViolation { samples: usize },
    Violated(Witness<T>),
}

impl<T> Finding<T> {
    pub fn is_violated(&self) -> bool {
        matches!(self, Finding::Violated(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport<T> {
    pub a1_node_law: Finding<T>,
    pub a2_coupling: Finding<T>,
    pub a3_output: Finding<T>,
    pub a4_delays: Finding<T>,
}

impl<T> AssumptionReport<T> {
    pub fn all_clear(&self) -> bool {
        ![
            &self.a1_node_law,
            &self.a2_coupling,
            &self.a3_output,
            &self.a4_delays,
        ]
        .iter()
        .any(|f| f.is_violated())
    }
}

/// [`check_assumptions_in`] over the state box `[-10, 10]ⁿ`.
pub fn check_assumptions<T: Scalar>(
    model: &NetworkModel<T>,
    horizon: T,
    sample_budget: usize,
    seed: u64,
) -> AssumptionReport<T> {
    check_assumptions_in(model, horizon, sample_budget, seed, T::lit(10.0))
}

/// Probes every assumption `sample_budget` times with `t ∈ [0, horizon]` and
/// states in `[-radius, radius]ⁿ`.
pub fn check_assumptions_in<T: Scalar>(
    model: &NetworkModel<T>,
    horizon: T,
    sample_budget: usize,
    seed: u64,
    radius: T,
) -> AssumptionReport<T> {
    assert!(horizon > T::zero(), "horizon must be positive");
    let mut probe = Prober {
        rng: ChaCha8Rng::seed_from_u64(seed),
        horizon,
        radius,
        n: model.node_dim(),
    };
    AssumptionReport {
        a1_node_law: probe.node_law(model, sample_budget),
        a2_coupling: probe.coupling(model, sample_budget),
        a3_output: probe.output(model, sample_budget),
        a4_delays: probe.delays(model, sample_budget),
    }
}

struct Prober<T> {
    rng: ChaCha8Rng,
    horizon: T,
    radius: T,
    n: usize,
}

impl<T: Scalar> Prober<T> {
    fn time(&mut self) -> T {
        T::lit(self.rng.gen::<f64>()) * self.horizon
    }

    fn state(&mut self) -> Vec<T> {
        (0..self.n)
            .map(|_| T::lit(self.rng.gen_range(-1.0..1.0)) * self.radius)
            .collect()
    }

    fn node_law(&mut self, model: &NetworkModel<T>, budget: usize) -> Finding<T> {
        let f = model.node_dynamics();
        for _ in 0..budget {
            let (t, u1, u2) = (self.time(), self.state(), self.state());
            let (f1, f2) = (f.eval(t, &u1), f.eval(t, &u2));
            if f1.iter().chain(&f2).any(|v| !v.is_finite()) {
                return Finding::Violated(Witness::NonFinite { t });
            }
            if let Some(l) = f.lipschitz_hint() {
                if let Some(w) = lipschitz_witness(t, &u1, &u2, &f1, &f2, l) {
                    return Finding::Violated(w);
                }
            }
            if let Some(w) = state_jump(t, &u1, &u2, |u| f.eval(t, u)) {
                return Finding::Violated(w);
            }
            let t2 = self.time();
            if let Some(w) = time_jump(t, t2, |s| f.eval(s, &u1)) {
                return Finding::Violated(w);
            }
        }
        Finding::NoViolation { samples: budget }
    }

    fn coupling(&mut self, model: &NetworkModel<T>, budget: usize) -> Finding<T> {
        let sched = model.coupling();
        if sched.is_constant() {
            return Finding::NoViolation { samples: budget };
        }
        for _ in 0..budget {
            let (t1, t2) = (self.time(), self.time());
            let a = sched.at(t1);
            if !a.is_finite() {
                return Finding::Violated(Witness::NonFinite { t: t1 });
            }
            if let Some(w) = time_jump(t1, t2, |s| sched.at(s).as_slice().to_vec()) {
                return Finding::Violated(w);
            }
        }
        Finding::NoViolation { samples: budget }
    }

    fn output(&mut self, model: &NetworkModel<T>, budget: usize) -> Finding<T> {
        let g = model.output();
        for _ in 0..budget {
            let (t, u1, u2) = (self.time(), self.state(), self.state());
            let kappa = g.kappa(t);
            if !kappa.is_finite() {
                return Finding::Violated(Witness::NonFinite { t });
            }
            if kappa < T::zero() {
                return Finding::Violated(Witness::NegativeKappa { t, value: kappa });
            }
            let (g1, g2) = (g.eval(t, &u1), g.eval(t, &u2));
            if g1.iter().chain(&g2).any(|v| !v.is_finite()) {
                return Finding::Violated(Witness::NonFinite { t });
            }
            if let Some(w) = lipschitz_witness(t, &u1, &u2, &g1, &g2, kappa) {
                return Finding::Violated(w);
            }
        }
        Finding::NoViolation { samples: budget }
    }

    fn delays(&mut self, model: &NetworkModel<T>, budget: usize) -> Finding<T> {
        let m = model.nodes();
        let tau = model.delays();
        for _ in 0..budget {
            let (t1, t2) = (self.time(), self.time());
            for i in 0..m {
                for j in 0..m {
                    let v = tau.at(i, j, t1);
                    if !v.is_finite() {
                        return Finding::Violated(Witness::NonFinite { t: t1 });
                    }
                    if v < T::zero() {
                        return Finding::Violated(Witness::NegativeDelay {
                            i,
                            j,
                            t: t1,
                            value: v,
                        });
                    }
                }
            }
            let all = |s: T| {
                (0..m * m)
                    .map(|k| tau.at(k / m, k % m, s))
                    .collect::<Vec<_>>()
            };
            if let Some(w) = time_jump(t1, t2, all) {
                return Finding::Violated(w);
            }
        }
        Finding::NoViolation { samples: budget }
    }
}

fn diff<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

fn lipschitz_witness<T: Scalar>(
    t: T,
    u1: &[T],
    u2: &[T],
    h1: &[T],
    h2: &[T],
    bound: T,
) -> Option<Witness<T>> {
    let lhs = norm2(&diff(h1, h2));
    let rhs = bound * norm2(&diff(u1, u2));
    let slack = T::lit(LIPSCHITZ_SLACK) * (rhs + norm2(h1) + norm2(h2));
    (lhs > rhs + slack).then(|| Witness::Lipschitz {
        t,
        u1: u1.to_vec(),
        u2: u2.to_vec(),
        lhs,
        rhs,
    })
}

/// Bisects `[0, 1]` along `s ↦ h(p(s))` towards the largest increment.
/// Returns `(left end, width, final increment, scale)` where scale is the
/// largest output norm seen.
fn bisect_jump<T: Scalar, H: FnMut(T) -> Vec<T>>(mut h: H) -> (T, T, T, T) {
    let (mut lo, mut hi) = (T::zero(), T::one());
    let (mut v_lo, mut v_hi) = (h(lo), h(hi));
    let mut scale = norm2(&v_lo).max(norm2(&v_hi));
    for _ in 0..BISECTIONS {
        let mid = T::lit(0.5) * (lo + hi);
        let v_mid = h(mid);
        scale = scale.max(norm2(&v_mid));
        if norm2(&diff(&v_mid, &v_lo)) >= norm2(&diff(&v_hi, &v_mid)) {
            hi = mid;
            v_hi = v_mid;
        } else {
            lo = mid;
            v_lo = v_mid;
        }
    }
    (lo, hi - lo, norm2(&diff(&v_hi, &v_lo)), scale)
}

/// Relative jump floor, never below the precision's own rounding level.
fn is_jump<T: Scalar>(jump: T, scale: T) -> bool {
    jump > T::lit(1e-7).max(T::structural_tol()) * (T::one() + scale)
}

fn state_jump<T: Scalar, H: Fn(&[T]) -> Vec<T>>(
    t: T,
    u1: &[T],
    u2: &[T],
    h: H,
) -> Option<Witness<T>> {
    let point = |s: T| -> Vec<T> { u1.iter().zip(u2).map(|(&a, &b)| a + s * (b - a)).collect() };
    let (s, width, jump, scale) = bisect_jump(|s| h(&point(s)));
    is_jump(jump, scale).then(|| Witness::Discontinuity {
        t,
        u: Some(point(s)),
        width: width * norm2(&diff(u2, u1)),
        jump,
    })
}

fn time_jump<T: Scalar, H: Fn(T) -> Vec<T>>(t1: T, t2: T, h: H) -> Option<Witness<T>> {
    let at = |s: T| t1 + s * (t2 - t1);
    let (s, width, jump, scale) = bisect_jump(|s| h(at(s)));
    is_jump(jump, scale).then(|| Witness::Discontinuity {
        t: at(s),
        u: None,
        width: width * (t2 - t1).abs(),
        jump,
    })
}
