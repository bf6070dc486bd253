//! Read-only passes over a finished trajectory: `V`, `M`, the growth
//! envelope `M(t) ≤ M(0) e^{ηt}`, the resulting state bound, and pairwise
//! synchronization error.
//!
//! `M` is a supremum over the sample grid. Between samples the linear
//! interpolant is affine, so `V` along it is convex and peaks at a sample.

use std::io::{self, Write};

use thiserror::Error;

use crate::history::{half_p_dist_sq, sup_history_deviation, HistoryError, Trajectory};
use crate::linalg::{norm2, SpdMatrix};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("state of length {len} is not a whole number of {n}-dimensional nodes")]
    Dimension { len: usize, n: usize },
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("eta must be finite and nonnegative, got {0}")]
    InvalidEta(f64),
    #[error("tolerance must be finite and nonnegative, got {0}")]
    InvalidTolerance(f64),
    #[error("synchronization needs at least two nodes")]
    SingleNode,
    #[error("window {window} must be positive and no longer than the horizon {horizon}")]
    InvalidWindow { window: f64, horizon: f64 },
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
}

fn check_dim<T: Scalar>(len: usize, p: &SpdMatrix<T>) -> Result<(), DiagnosticsError> {
    let n = p.dim();
    if n == 0 || !len.is_multiple_of(n) {
        return Err(DiagnosticsError::Dimension { len, n });
    }
    Ok(())
}

/// `(Σᵢ xⁱᵀ P xⁱ)^{1/2}`.
pub fn p_norm<T: Scalar>(x: &[T], p: &SpdMatrix<T>) -> Result<T, DiagnosticsError> {
    check_dim(x.len(), p)?;
    Ok(x.chunks(p.dim())
        .map(|b| p.quadratic(b))
        .sum::<T>()
        .max(T::zero())
        .sqrt())
}

/// `V(t) = ½ ‖x(t) − x(0)‖_P²`.
pub fn compute_v<T: Scalar>(
    traj: &Trajectory<T>,
    t: T,
    p: &SpdMatrix<T>,
) -> Result<T, DiagnosticsError> {
    check_dim(traj.sample(0).len(), p)?;
    let x = traj.eval(t)?;
    Ok(half_p_dist_sq(p, &x, traj.sample(0)))
}

/// `M(t) = max[½, sup_{s ≤ t} V(s)]`, the supremum over `s ∈ [0, t]` taken on
/// the sample grid plus `t` itself.
pub fn compute_m<T: Scalar>(
    traj: &Trajectory<T>,
    t: T,
    p: &SpdMatrix<T>,
) -> Result<T, DiagnosticsError> {
    let v_t = compute_v(traj, t, p)?;
    let x0 = traj.sample(0);
    let mut m = T::lit(0.5)
        .max(sup_history_deviation(traj, x0, p)?)
        .max(v_t);
    for (k, &s) in traj.times().iter().enumerate() {
        if s > t {
            break;
        }
        m = m.max(half_p_dist_sq(p, traj.sample(k), x0));
    }
    Ok(m)
}

fn strided(len: usize, stride: usize) -> impl Iterator<Item = usize> {
    let stride = stride.max(1);
    (0..len).filter(move |&k| k % stride == 0 || k + 1 == len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport<T> {
    pub eta: T,
    pub rel_tol: T,
    pub times: Vec<T>,
    pub v: Vec<T>,
    pub m: Vec<T>,
    /// `M(0) e^{ηt}`; may overflow to infinity.
    pub bound: Vec<T>,
    /// `ln M(0) + ηt`, always finite.
    pub ln_bound: Vec<T>,
    /// `‖x(t)‖`.
    pub state_norm: Vec<T>,
    /// `(‖x(0)‖_P + √(2 M(0) e^{ηT})) / √λ_min(P)` with `T` the last sample time.
    pub state_bound: T,
    /// `ln` of `state_bound`, finite even when `state_bound` overflows.
    pub ln_state_bound: T,
    /// `max_t (M(t) − bound(t)) / bound(t)`, floored at zero.
    pub max_violation: T,
    /// Sample index attaining `max_violation` when it is positive.
    pub worst_index: Option<usize>,
    /// `min_t (state_bound − ‖x(t)‖)`.
    pub state_margin: T,
    pub passed: bool,
    pub state_bound_holds: bool,
}

impl<T: Scalar> EnvelopeReport<T> {
    pub fn m0(&self) -> T {
        self.m[0]
    }

    /// Per-sample columns `t,V,M,bound,ln_bound,state_norm,ln_state_bound,margin` for every
    /// `stride`-th sample and the last one.
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        writeln!(w, "t,V,M,bound,ln_bound,state_norm,ln_state_bound,margin")?;
        for k in strided(self.times.len(), stride) {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                self.times[k],
                self.v[k],
                self.m[k],
                self.bound[k],
                self.ln_bound[k],
                self.state_norm[k],
                self.ln_state_bound,
                self.bound[k] - self.m[k]
            )?;
        }
        Ok(())
    }

    /// `key = value` lines: eta, M0, max_violation, verdict and state-bound data.
    pub fn summary(&self) -> String {
        let verdict = |ok| if ok { "pass" } else { "fail" };
        let mut s = format!(
            "eta = {}\nM0 = {}\nrel_tol = {}\nmax_violation = {}\nverdict = {}\n",
            self.eta,
            self.m0(),
            self.rel_tol,
            self.max_violation,
            verdict(self.passed)
        );
        if let Some(k) = self.worst_index {
            s.push_str(&format!("worst_t = {}\n", self.times[k]));
        }
        s.push_str(&format!(
            "state_bound = {}\nln_state_bound = {}\nstate_margin = {}\nstate_verdict = {}\n",
            self.state_bound,
            self.ln_state_bound,
            self.state_margin,
            verdict(self.state_bound_holds)
        ));
        s
    }
}

/// Checks `M(t) ≤ M(0) e^{ηt} (1 + rel_tol)` at every sample, comparing in log
/// space so that large `ηt` cannot overflow the test.
///
/// Any `η ≥ 0` is accepted; `η = 0` is useful to confirm the check can fail.
pub fn check_envelope<T: Scalar>(
    traj: &Trajectory<T>,
    eta: T,
    p: &SpdMatrix<T>,
    rel_tol: T,
) -> Result<EnvelopeReport<T>, DiagnosticsError> {
    if !(eta >= T::zero()) || !eta.is_finite() {
        return Err(DiagnosticsError::InvalidEta(eta.as_f64()));
    }
    if !(rel_tol >= T::zero()) || !rel_tol.is_finite() {
        return Err(DiagnosticsError::InvalidTolerance(rel_tol.as_f64()));
    }
    let x0 = traj.sample(0);
    check_dim(x0.len(), p)?;
    let len = traj.len();
    let mut running = T::lit(0.5).max(sup_history_deviation(traj, x0, p)?);
    let (mut v, mut m, mut bound, mut ln_bound, mut state_norm) = (
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    );
    for k in 0..len {
        let vk = half_p_dist_sq(p, traj.sample(k), x0);
        running = running.max(vk);
        v.push(vk);
        m.push(running);
        state_norm.push(norm2(traj.sample(k)));
    }
    let m0 = m[0];
    let ln_m0 = m0.ln();
    let log_tol = rel_tol.ln_1p();
    let mut max_violation = T::zero();
    let mut worst_index = None;
    let mut passed = true;
    for (k, &t) in traj.times().iter().enumerate() {
        let log_bound = ln_m0 + eta * t;
        bound.push(log_bound.exp());
        ln_bound.push(log_bound);
        let excess = m[k].ln() - log_bound;
        if excess > log_tol {
            passed = false;
        }
        let rel = excess.exp_m1();
        if rel > max_violation {
            max_violation = rel;
            worst_index = Some(k);
        }
    }
    // ln[(‖x(0)‖_P + e^{c}) / √λ_min] with c = ½ ln(2 M(0)) + ηT/2, by log-sum-exp.
    let half = T::lit(0.5);
    let c = half * (T::lit(2.0) * m0).ln() + half * eta * traj.last_time();
    let x0_p = p_norm(x0, p)?;
    let ln_sum = if x0_p > T::zero() {
        let a = x0_p.ln();
        let hi = a.max(c);
        hi + ((a - hi).exp() + (c - hi).exp()).ln()
    } else {
        c
    };
    let ln_state_bound = ln_sum - half * p.lambda_min().ln();
    let state_bound = ln_state_bound.exp();
    let largest = state_norm.iter().fold(T::zero(), |acc, &n| acc.max(n));
    let state_margin = state_bound - largest;
    let state_bound_holds = largest == T::zero() || largest.ln() <= ln_state_bound;
    Ok(EnvelopeReport {
        eta,
        rel_tol,
        times: traj.times().to_vec(),
        v,
        m,
        bound,
        ln_bound,
        state_norm,
        state_bound,
        ln_state_bound,
        max_violation,
        worst_index,
        state_margin,
        passed,
        state_bound_holds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncReport<T> {
    pub times: Vec<T>,
    /// `max_{i,j} ‖xⁱ(t) − xʲ(t)‖`.
    pub distance: Vec<T>,
    pub window: T,
    pub window_mean: T,
    pub threshold: T,
    pub synchronized: bool,
}

impl<T: Scalar> SyncReport<T> {
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        writeln!(w, "t,d")?;
        for k in strided(self.times.len(), stride) {
            writeln!(w, "{},{}", self.times[k], self.distance[k])?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "window = {}\nwindow_mean = {}\nthreshold = {}\nverdict = {}\n",
            self.window,
            self.window_mean,
            self.threshold,
            if self.synchronized {
                "synchronized"
            } else {
                "not synchronized"
            }
        )
    }
}

/// Largest pairwise Euclidean distance between node states.
pub fn max_pairwise_distance<T: Scalar>(x: &[T], nodes: usize) -> T {
    let n = x.len() / nodes;
    let mut d = T::zero();
    for i in 0..nodes {
        for j in i + 1..nodes {
            let s: T = (0..n)
                .map(|c| {
                    let e = x[i * n + c] - x[j * n + c];
                    e * e
                })
                .sum();
            d = d.max(s);
        }
    }
    d.sqrt()
}

/// Synchronized iff the mean of `d` over samples with `t ≥ T − window` is
/// below `threshold`.
pub fn sync_report<T: Scalar>(
    traj: &Trajectory<T>,
    threshold: T,
    window: T,
) -> Result<SyncReport<T>, DiagnosticsError> {
    let nodes = traj.nodes();
    if nodes < 2 {
        return Err(DiagnosticsError::SingleNode);
    }
    if !(threshold > T::zero()) {
        return Err(DiagnosticsError::InvalidThreshold(threshold.as_f64()));
    }
    let horizon = traj.last_time();
    if !(window > T::zero()) || window > horizon {
        return Err(DiagnosticsError::InvalidWindow {
            window: window.as_f64(),
            horizon: horizon.as_f64(),
        });
    }
    let distance: Vec<T> = (0..traj.len())
        .map(|k| max_pairwise_distance(traj.sample(k), nodes))
        .collect();
    let start = horizon - window;
    let (sum, count) = traj
        .times()
        .iter()
        .zip(&distance)
        .filter(|(&t, _)| t >= start)
        .fold((T::zero(), 0usize), |(s, c), (_, &d)| (s + d, c + 1));
    let window_mean = sum / T::from_usize(count).unwrap();
    Ok(SyncReport {
        times: traj.times().to_vec(),
        distance,
        window,
        window_mean,
        threshold,
        synchronized: window_mean < threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::{HistoryFunction, Interpolation};
    use crate::linalg::Matrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn traj_from(
        nodes: usize,
        n: usize,
        phi: HistoryFunction<f64>,
        samples: &[(f64, Vec<f64>)],
    ) -> Trajectory<f64> {
        let mut tr = Trajectory::new(nodes, n, phi, Interpolation::Linear).unwrap();
        for (t, x) in samples {
            tr.append(*t, x).unwrap();
        }
        tr
    }

    fn decay_traj(h: f64, steps: usize) -> Trajectory<f64> {
        let s: Vec<_> = (1..=steps)
            .map(|k| (k as f64 * h, vec![(-(k as f64) * h).exp()]))
            .collect();
        traj_from(1, 1, HistoryFunction::constant(vec![1.0]).unwrap(), &s)
    }

    #[test]
    fn p_norm_examples() {
        let p = SpdMatrix::new(Matrix::from_diagonal(&[2.0, 1.0])).unwrap();
        assert!((p_norm(&[1.0, 0.0, 0.0, 1.0], &p).unwrap() - 3.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(p_norm(&[0.0; 4], &p).unwrap(), 0.0);
        let x = [3.0, -4.0, 12.0];
        assert_eq!(p_norm(&x, &SpdMatrix::identity(1)).unwrap(), 13.0);
        assert!(matches!(
            p_norm(&x, &p),
            Err(DiagnosticsError::Dimension { .. })
        ));
    }

    #[test]
    fn v_and_m_examples() {
        let p = SpdMatrix::identity(1);
        let flat = traj_from(
            1,
            1,
            HistoryFunction::constant(vec![2.0]).unwrap(),
            &[(0.5, vec![2.0]), (1.0, vec![2.0])],
        );
        for t in [0.0, 0.25, 1.0] {
            assert_eq!(compute_v(&flat, t, &p).unwrap(), 0.0);
            assert_eq!(compute_m(&flat, t, &p).unwrap(), 0.5);
        }
        // History 2 away from x(0) dominates: M = ½·2² = 2.
        let phi =
            HistoryFunction::segment(1, -1.0, |s: f64, o: &mut [f64]| o[0] = -2.0 * s).unwrap();
        let tr = traj_from(1, 1, phi, &[(1.0, vec![0.5]), (2.0, vec![1.0])]);
        assert_eq!(compute_v(&tr, 2.0, &p).unwrap(), 0.5);
        for t in [0.0, 1.0, 2.0] {
            assert!((compute_m(&tr, t, &p).unwrap() - 2.0).abs() < 1e-12);
        }
        // Diverging: M = V once V passes the floor.
        let tr = traj_from(
            1,
            1,
            HistoryFunction::constant(vec![0.0]).unwrap(),
            &[(1.0, vec![1.0]), (2.0, vec![2.0]), (3.0, vec![3.0])],
        );
        assert_eq!(compute_m(&tr, 1.0, &p).unwrap(), 0.5);
        assert_eq!(compute_m(&tr, 3.0, &p).unwrap(), 4.5);
        assert_eq!(
            compute_m(&tr, 2.5, &p).unwrap(),
            compute_v(&tr, 2.5, &p).unwrap()
        );
        assert!(compute_v(&tr, 3.5, &p).is_err());
    }

    #[test]
    fn decay_passes_with_closed_form_v() {
        let tr = decay_traj(1e-2, 300);
        let r = check_envelope(&tr, 1e-3, &SpdMatrix::identity(1), 0.0).unwrap();
        assert!(r.passed && r.state_bound_holds);
        assert_eq!(r.max_violation, 0.0);
        for (k, &t) in r.times.iter().enumerate() {
            let closed = 0.5 * (1.0 - (-t).exp()).powi(2);
            assert!((r.v[k] - closed).abs() < 1e-14);
            assert!(r.v[k] <= 0.5 && r.m[k] == 0.5);
        }
        let text = r.summary();
        assert!(text.contains("verdict = pass") && text.contains("M0 = 0.5"));
    }

    #[test]
    fn constant_trajectory_has_zero_violation() {
        let tr = traj_from(
            2,
            1,
            HistoryFunction::constant(vec![1.0, -1.0]).unwrap(),
            &[(1.0, vec![1.0, -1.0])],
        );
        let r = check_envelope(&tr, 0.0, &SpdMatrix::identity(1), 0.0).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_violation, 0.0);
        assert_eq!(r.bound, vec![0.5, 0.5]);
        // ‖x‖ = √2 and the bound is (√2 + 1)/1.
        assert!((r.state_margin - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_eta_fails_on_growth() {
        let s: Vec<_> = (1..=100)
            .map(|k| (k as f64 * 0.01, vec![(k as f64 * 0.01).exp()]))
            .collect();
        let tr = traj_from(1, 1, HistoryFunction::constant(vec![1.0]).unwrap(), &s);
        let r = check_envelope(&tr, 0.0, &SpdMatrix::identity(1), 1e-6).unwrap();
        assert!(!r.passed);
        let k = r.worst_index.unwrap();
        assert_eq!(k, 100);
        // M(1) = ½(e − 1)², bound ½.
        let expected = (std::f64::consts::E - 1.0).powi(2) - 1.0;
        assert!((r.max_violation - expected).abs() < 1e-12);
        let mut csv = Vec::new();
        r.write_csv(&mut csv, 1).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("t,V,M,bound,ln_bound,state_norm,ln_state_bound,margin\n"));
        assert_eq!(csv.lines().count(), 102);
        let mut thin = Vec::new();
        r.write_csv(&mut thin, 40).unwrap();
        // Header, samples 0, 40, 80 and the last one.
        assert_eq!(String::from_utf8(thin).unwrap().lines().count(), 5);
        assert!(check_envelope(&tr, -1.0, &SpdMatrix::identity(1), 0.0).is_err());
        assert!(check_envelope(&tr, 1.0, &SpdMatrix::identity(1), f64::NAN).is_err());
    }

    #[test]
    fn huge_eta_does_not_overflow_the_check() {
        let tr = decay_traj(0.5, 4);
        let r = check_envelope(&tr, 1e6, &SpdMatrix::identity(1), 0.0).unwrap();
        assert!(r.passed && r.state_bound_holds);
        assert!(r.bound.last().unwrap().is_infinite());
        assert!(r.state_bound.is_infinite());
        // ln bound = ln(1 + e^{ηT/2}) ≈ 1e6.
        assert!((r.ln_state_bound - 1e6).abs() < 1e-6);
        assert_eq!(*r.ln_bound.last().unwrap(), 0.5f64.ln() + 2e6);
    }

    #[test]
    fn sync_examples() {
        let same = traj_from(
            3,
            2,
            HistoryFunction::constant(vec![1.0, 2.0, 1.0, 2.0, 1.0, 2.0]).unwrap(),
            &[(1.0, vec![0.5, 0.1, 0.5, 0.1, 0.5, 0.1])],
        );
        let r = sync_report(&same, 1e-3, 1.0).unwrap();
        assert_eq!(r.distance, vec![0.0, 0.0]);
        assert!(r.synchronized);

        let apart = traj_from(
            3,
            1,
            HistoryFunction::constant(vec![0.0, 3.0, 4.0]).unwrap(),
            &[(1.0, vec![0.0, 1.0, 1.0]), (2.0, vec![0.0, 0.0, 0.5])],
        );
        let r = sync_report(&apart, 0.6, 1.0).unwrap();
        assert_eq!(r.distance, vec![4.0, 1.0, 0.5]);
        assert_eq!(r.window_mean, 0.75);
        assert!(!r.synchronized);
        assert!(r.summary().contains("not synchronized"));

        let single = traj_from(
            1,
            1,
            HistoryFunction::constant(vec![0.0]).unwrap(),
            &[(1.0, vec![0.0])],
        );
        assert_eq!(
            sync_report(&single, 1.0, 1.0),
            Err(DiagnosticsError::SingleNode)
        );
        assert!(matches!(
            sync_report(&apart, 1.0, 3.0),
            Err(DiagnosticsError::InvalidWindow { .. })
        ));
        assert!(matches!(
            sync_report(&apart, 0.0, 1.0),
            Err(DiagnosticsError::InvalidThreshold(_))
        ));
    }

    fn random_traj(seed: u64, nodes: usize, n: usize, len: usize) -> Trajectory<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = nodes * n;
        let phi =
            HistoryFunction::constant((0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let s: Vec<_> = (1..=len)
            .map(|k| {
                (
                    k as f64 * 0.1,
                    (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                )
            })
            .collect();
        traj_from(nodes, n, phi, &s)
    }

    fn spd_2x2() -> SpdMatrix<f64> {
        SpdMatrix::new(Matrix::from_rows(&[vec![3.0, 1.0], vec![1.0, 2.0]]).unwrap()).unwrap()
    }

    proptest! {
        #[test]
        fn m_is_monotone_floored_and_dominates_v(seed in any::<u64>()) {
            let tr = random_traj(seed, 2, 2, 40);
            let p = spd_2x2();
            let r = check_envelope(&tr, 1.0, &p, 0.0).unwrap();
            for k in 0..r.m.len() {
                prop_assert!(r.m[k] >= 0.5);
                prop_assert!(r.v[k] <= r.m[k]);
                if k > 0 { prop_assert!(r.m[k] >= r.m[k - 1]); }
                let t = r.times[k];
                prop_assert_eq!(compute_m(&tr, t, &p).unwrap(), r.m[k]);
            }
        }

        #[test]
        fn p_norm_equivalence(seed in any::<u64>()) {
            let p = spd_2x2();
            let (lmin, lmax) = (p.lambda_min(), p.norm());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..1000 {
                let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-10.0..10.0)).collect();
                let pn = p_norm(&x, &p).unwrap().powi(2);
                let e = norm2(&x).powi(2);
                prop_assert!(lmin * e <= pn * (1.0 + 1e-9));
                prop_assert!(pn <= lmax * e * (1.0 + 1e-9));
            }
        }

        #[test]
        fn distance_is_permutation_invariant(seed in any::<u64>(), shift in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, n) = (4, 3);
            let x: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut y = vec![0.0; m * n];
            for i in 0..m {
                let j = (i + shift) % m;
                y[j * n..(j + 1) * n].copy_from_slice(&x[i * n..(i + 1) * n]);
            }
            prop_assert_eq!(max_pairwise_distance(&x, m), max_pairwise_distance(&y, m));
            prop_assert!(max_pairwise_distance(&x, m) >= 0.0);
        }
    }
}
