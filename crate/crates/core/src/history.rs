//! Initial functions on `(-∞, 0]` and the growing solution record.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::SpdMatrix;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HistoryError {
    #[error("t = {t} lies beyond the last computed sample {last}; extrapolation refused")]
    BeyondLastSample { t: f64, last: f64 },
    #[error("sample time {t} is not after the last sample {last}")]
    NonMonotoneTime { t: f64, last: f64 },
    #[error("state at t = {t} has a non-finite component")]
    NonFinite { t: f64 },
    #[error("expected a state of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("initial function queried at t = {0} > 0")]
    AfterOrigin(f64),
    #[error("history segment must start at a finite t_left < 0, got {0}")]
    InvalidSegment(f64),
    #[error("time {0} is not finite")]
    NonFiniteTime(f64),
}

/// Anything that can report the network state at past times.
pub trait StateHistory<T: Scalar> {
    /// Length of the stacked state, `m · n`.
    fn dim(&self) -> usize;

    fn state_into(&self, t: T, out: &mut [T]) -> Result<(), HistoryError>;

    /// Writes node `node`'s `n`-block at time `t` into `out`.
    fn node_into(&self, t: T, node: usize, out: &mut [T]) -> Result<(), HistoryError> {
        let n = out.len();
        let mut full = vec![T::zero(); self.dim()];
        self.state_into(t, &mut full)?;
        out.copy_from_slice(&full[node * n..(node + 1) * n]);
        Ok(())
    }
}

type SegmentFn<T> = Arc<dyn Fn(T, &mut [T]) + Send + Sync>;

#[derive(Clone)]
enum HistoryForm<T> {
    Constant(Vec<T>),
    Segment {
        t_left: T,
        eval: SegmentFn<T>,
        tail: Vec<T>,
    },
}

/// Initial function `φ` on `(-∞, 0]` with a limit at `-∞`.
///
/// Either a constant, or a closed-form segment on `[t_left, 0]` continued by
/// the constant `φ(t_left)` to the left.
#[derive(Clone)]
pub struct HistoryFunction<T> {
    dim: usize,
    form: HistoryForm<T>,
}

impl<T: fmt::Debug> fmt::Debug for HistoryFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            HistoryForm::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            HistoryForm::Segment { t_left, tail, .. } => f
                .debug_struct("Segment")
                .field("t_left", t_left)
                .field("tail", tail)
                .finish_non_exhaustive(),
        }
    }
}

impl<T: Scalar> HistoryFunction<T> {
    pub fn constant(value: Vec<T>) -> Result<Self, HistoryError> {
        if value.iter().any(|v| !v.is_finite()) {
            return Err(HistoryError::NonFinite {
                t: f64::NEG_INFINITY,
            });
        }
        Ok(Self {
            dim: value.len(),
            form: HistoryForm::Constant(value),
        })
    }

    /// Closed-form segment on `[t_left, 0]`; the tail is `eval(t_left)`.
    pub fn segment<F>(dim: usize, t_left: T, eval: F) -> Result<Self, HistoryError>
    where
        F: Fn(T, &mut [T]) + Send + Sync + 'static,
    {
        if !(t_left < T::zero()) || !t_left.is_finite() {
            return Err(HistoryError::InvalidSegment(t_left.as_f64()));
        }
        let mut tail = vec![T::zero(); dim];
        eval(t_left, &mut tail);
        if tail.iter().any(|v| !v.is_finite()) {
            return Err(HistoryError::NonFinite { t: t_left.as_f64() });
        }
        Ok(Self {
            dim,
            form: HistoryForm::Segment {
                t_left,
                eval: Arc::new(eval),
                tail,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `lim_{t → -∞} φ(t)`.
    pub fn limit(&self) -> &[T] {
        match &self.form {
            HistoryForm::Constant(v) => v,
            HistoryForm::Segment { tail, .. } => tail,
        }
    }

    /// Left end of the non-constant part, if any.
    pub fn segment_start(&self) -> Option<T> {
        match &self.form {
            HistoryForm::Constant(_) => None,
            HistoryForm::Segment { t_left, .. } => Some(*t_left),
        }
    }

    pub fn eval_into(&self, t: T, out: &mut [T]) -> Result<(), HistoryError> {
        if out.len() != self.dim {
            return Err(HistoryError::Dimension {
                expected: self.dim,
                got: out.len(),
            });
        }
        if t.is_nan() {
            return Err(HistoryError::NonFiniteTime(t.as_f64()));
        }
        if t > T::zero() {
            return Err(HistoryError::AfterOrigin(t.as_f64()));
        }
        match &self.form {
            HistoryForm::Constant(v) => out.copy_from_slice(v),
            HistoryForm::Segment { t_left, eval, tail } => {
                if t <= *t_left {
                    out.copy_from_slice(tail);
                } else {
                    eval(t, out);
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, t: T) -> Result<Vec<T>, HistoryError> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(t, &mut out)?;
        Ok(out)
    }
}

/// How a [`Trajectory`] fills in between stored samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    #[default]
    Linear,
    /// Four-point Lagrange through the neighbouring samples.
    Cubic,
}

/// Initial function plus computed samples on `[0, t_last]`.
///
/// Single writer: an integration run appends; readers may query between
/// appends.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    nodes: usize,
    node_dim: usize,
    initial: HistoryFunction<T>,
    interpolation: Interpolation,
    times: Vec<T>,
    states: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    /// Starts a record at `t = 0` anchored to `initial(0)`.
    pub fn new(
        nodes: usize,
        node_dim: usize,
        initial: HistoryFunction<T>,
        interpolation: Interpolation,
    ) -> Result<Self, HistoryError> {
        let dim = nodes * node_dim;
        if initial.dim() != dim {
            return Err(HistoryError::Dimension {
                expected: dim,
                got: initial.dim(),
            });
        }
        let x0 = initial.eval(T::zero())?;
        if x0.iter().any(|v| !v.is_finite()) {
            return Err(HistoryError::NonFinite { t: 0.0 });
        }
        Ok(Self {
            nodes,
            node_dim,
            initial,
            interpolation,
            times: vec![T::zero()],
            states: x0,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn initial(&self) -> &HistoryFunction<T> {
        &self.initial
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> T {
        *self.times.last().expect("trajectory always holds t = 0")
    }

    /// Stored state at sample index `k`.
    pub fn sample(&self, k: usize) -> &[T] {
        let d = self.nodes * self.node_dim;
        &self.states[k * d..(k + 1) * d]
    }

    pub fn last_state(&self) -> &[T] {
        self.sample(self.times.len() - 1)
    }

    /// Records `x` at time `t > last_time()`.
    pub fn append(&mut self, t: T, x: &[T]) -> Result<(), HistoryError> {
        let d = self.nodes * self.node_dim;
        if x.len() != d {
            return Err(HistoryError::Dimension {
                expected: d,
                got: x.len(),
            });
        }
        let last = self.last_time();
        if !(t > last) || !t.is_finite() {
            return Err(HistoryError::NonMonotoneTime {
                t: t.as_f64(),
                last: last.as_f64(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(HistoryError::NonFinite { t: t.as_f64() });
        }
        self.times.push(t);
        self.states.extend_from_slice(x);
        Ok(())
    }

    /// Full state at `t`.
    pub fn eval(&self, t: T) -> Result<Vec<T>, HistoryError> {
        let mut out = vec![T::zero(); self.nodes * self.node_dim];
        self.eval_range(t, 0, &mut out)?;
        Ok(out)
    }

    /// Interpolates components `[offset, offset + out.len())` at `t`.
    fn eval_range(&self, t: T, offset: usize, out: &mut [T]) -> Result<(), HistoryError> {
        let d = self.nodes * self.node_dim;
        let width = out.len();
        if t.is_nan() {
            return Err(HistoryError::NonFiniteTime(t.as_f64()));
        }
        if t <= T::zero() {
            if t == T::zero() {
                out.copy_from_slice(&self.states[offset..offset + width]);
                return Ok(());
            }
            if width == d {
                return self.initial.eval_into(t, out);
            }
            let full = self.initial.eval(t)?;
            out.copy_from_slice(&full[offset..offset + width]);
            return Ok(());
        }
        let last = self.last_time();
        if t > last {
            return Err(HistoryError::BeyondLastSample {
                t: t.as_f64(),
                last: last.as_f64(),
            });
        }
        // First index with times[k] >= t; k >= 1 because times[0] = 0 < t.
        let k = self.times.partition_point(|&s| s < t);
        let at = |idx: usize| &self.states[idx * d + offset..idx * d + offset + width];
        if self.times[k] == t {
            out.copy_from_slice(at(k));
            return Ok(());
        }
        let n_samples = self.times.len();
        match self.interpolation {
            Interpolation::Cubic if n_samples >= 4 => {
                // Stencil k-2..=k+1 around the bracket [k-1, k], shifted into range.
                let start = (k.saturating_sub(2)).min(n_samples - 4);
                let idx = [start, start + 1, start + 2, start + 3];
                let ts = idx.map(|i| self.times[i]);
                let mut basis = [T::one(); 4];
                for a in 0..4 {
                    for b in 0..4 {
                        if a != b {
                            basis[a] = basis[a] * (t - ts[b]) / (ts[a] - ts[b]);
                        }
                    }
                }
                for (c, o) in out.iter_mut().enumerate() {
                    *o = (0..4).map(|a| basis[a] * at(idx[a])[c]).sum();
                }
            }
            _ => {
                let (t0, t1) = (self.times[k - 1], self.times[k]);
                let theta = (t - t0) / (t1 - t0);
                let (x0, x1) = (at(k - 1), at(k));
                for ((o, &a), &b) in out.iter_mut().zip(x0).zip(x1) {
                    *o = a + theta * (b - a);
                }
            }
        }
        Ok(())
    }

    /// Writes the samples as CSV: `t,x1_1,...,x1_n,...,xm_n`.
    ///
    /// Every `stride`-th sample is written, and the final sample always is.
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        let stride = stride.max(1);
        let mut header = String::from("t");
        for i in 1..=self.nodes {
            for c in 1..=self.node_dim {
                header.push_str(&format!(",x{i}_{c}"));
            }
        }
        writeln!(w, "{header}")?;
        let last = self.times.len() - 1;
        for k in (0..self.times.len()).filter(|&k| k % stride == 0 || k == last) {
            write!(w, "{}", self.times[k])?;
            for v in self.sample(k) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

impl<T: Scalar> StateHistory<T> for Trajectory<T> {
    fn dim(&self) -> usize {
        self.nodes * self.node_dim
    }

    fn state_into(&self, t: T, out: &mut [T]) -> Result<(), HistoryError> {
        if out.len() != self.dim() {
            return Err(HistoryError::Dimension {
                expected: self.dim(),
                got: out.len(),
            });
        }
        self.eval_range(t, 0, out)
    }

    fn node_into(&self, t: T, node: usize, out: &mut [T]) -> Result<(), HistoryError> {
        self.eval_range(t, node * out.len(), out)
    }
}

impl<T: Scalar> StateHistory<T> for HistoryFunction<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn state_into(&self, t: T, out: &mut [T]) -> Result<(), HistoryError> {
        self.eval_into(t, out)
    }
}

/// Past given by a closure `t -> state`; handy for probing a model with an
/// arbitrary history.
pub struct FnHistory<F> {
    dim: usize,
    f: F,
}

impl<F> FnHistory<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T: Scalar, F: Fn(T, &mut [T])> StateHistory<T> for FnHistory<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn state_into(&self, t: T, out: &mut [T]) -> Result<(), HistoryError> {
        if out.len() != self.dim {
            return Err(HistoryError::Dimension {
                expected: self.dim,
                got: out.len(),
            });
        }
        (self.f)(t, out);
        Ok(())
    }
}

/// `½ Σᵢ (xⁱ - yⁱ)ᵀ P (xⁱ - yⁱ)` for stacked states.
pub(crate) fn half_p_dist_sq<T: Scalar>(p: &SpdMatrix<T>, x: &[T], y: &[T]) -> T {
    let n = p.dim();
    let mut diff = vec![T::zero(); n];
    let mut acc = T::zero();
    for (xb, yb) in x.chunks(n).zip(y.chunks(n)) {
        for ((d, &a), &b) in diff.iter_mut().zip(xb).zip(yb) {
            *d = a - b;
        }
        acc += p.quadratic(&diff);
    }
    T::lit(0.5) * acc
}

const SUP_SAMPLES: usize = 4096;

/// `sup_{s ≤ 0} ½ ‖φ(s) - x0‖_P²` for the trajectory's initial function.
///
/// Exact on the constant tail. On a segment the maximum of a dense uniform
/// sampling is refined by golden-section search inside the bracketing cells.
pub fn sup_history_deviation<T: Scalar>(
    traj: &Trajectory<T>,
    x0: &[T],
    p: &SpdMatrix<T>,
) -> Result<T, HistoryError> {
    sup_initial_deviation(traj.initial(), x0, p)
}

/// Same as [`sup_history_deviation`] for a bare initial function.
pub fn sup_initial_deviation<T: Scalar>(
    phi: &HistoryFunction<T>,
    x0: &[T],
    p: &SpdMatrix<T>,
) -> Result<T, HistoryError> {
    if x0.len() != phi.dim() {
        return Err(HistoryError::Dimension {
            expected: phi.dim(),
            got: x0.len(),
        });
    }
    if p.dim() == 0 || !phi.dim().is_multiple_of(p.dim()) {
        return Err(HistoryError::Dimension {
            expected: phi.dim(),
            got: p.dim(),
        });
    }
    let tail = half_p_dist_sq(p, phi.limit(), x0);
    let Some(t_left) = phi.segment_start() else {
        return Ok(tail);
    };
    let mut buf = vec![T::zero(); phi.dim()];
    let mut value = |s: T| -> Result<T, HistoryError> {
        phi.eval_into(s, &mut buf)?;
        Ok(half_p_dist_sq(p, &buf, x0))
    };
    let n = SUP_SAMPLES;
    let step = -t_left / T::from_usize(n).unwrap();
    let grid = |k: usize| {
        if k == n {
            T::zero()
        } else {
            t_left + T::from_usize(k).unwrap() * step
        }
    };
    let mut best = tail;
    let mut best_k = 0;
    for k in 0..=n {
        let v = value(grid(k))?;
        if v > best {
            best = v;
            best_k = k;
        }
    }
    // Golden-section refinement on [grid(k-1), grid(k+1)].
    let (mut lo, mut hi) = (grid(best_k.saturating_sub(1)), grid((best_k + 1).min(n)));
    let ratio = T::lit(0.618_033_988_749_894_8);
    for _ in 0..60 {
        if hi - lo <= T::epsilon() * (T::one() + t_left.abs()) {
            break;
        }
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        let (va, vb) = (value(a)?, value(b)?);
        best = best.max(va).max(vb);
        if va >= vb {
            hi = b;
        } else {
            lo = a;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use proptest::prelude::*;

    fn scalar_traj(samples: &[(f64, f64)]) -> Trajectory<f64> {
        let phi = HistoryFunction::constant(vec![samples[0].1]).unwrap();
        let mut tr = Trajectory::new(1, 1, phi, Interpolation::Linear).unwrap();
        for &(t, x) in &samples[1..] {
            tr.append(t, &[x]).unwrap();
        }
        tr
    }

    #[test]
    fn constant_history_far_past() {
        let tr = scalar_traj(&[(0.0, 1.0)]);
        assert_eq!(tr.eval(-5.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn linear_interpolation_midpoint() {
        let tr = scalar_traj(&[(0.0, 0.0), (1.0, 2.0)]);
        assert_eq!(tr.eval(0.5).unwrap(), vec![1.0]);
    }

    #[test]
    fn extrapolation_refused() {
        let tr = scalar_traj(&[(0.0, 0.0), (1.0, 2.0)]);
        assert!(matches!(
            tr.eval(1.1),
            Err(HistoryError::BeyondLastSample { .. })
        ));
    }

    #[test]
    fn append_contract() {
        let mut tr = scalar_traj(&[(0.0, 0.0), (1.0, 2.0)]);
        tr.append(1.1, &[7.5]).unwrap();
        assert_eq!(tr.eval(1.1).unwrap(), vec![7.5]);
        assert!(matches!(
            tr.append(0.9, &[0.0]),
            Err(HistoryError::NonMonotoneTime { .. })
        ));
        assert!(matches!(
            tr.append(1.2, &[f64::NAN]),
            Err(HistoryError::NonFinite { .. })
        ));
        assert!(matches!(
            tr.append(1.2, &[1.0, 2.0]),
            Err(HistoryError::Dimension { .. })
        ));
    }

    #[test]
    fn cubic_reproduces_cubic_polynomial() {
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let phi = HistoryFunction::constant(vec![f(0.0)]).unwrap();
        let mut tr = Trajectory::new(1, 1, phi, Interpolation::Cubic).unwrap();
        for k in 1..=10 {
            let t = k as f64 * 0.1;
            tr.append(t, &[f(t)]).unwrap();
        }
        for &t in &[0.05, 0.33, 0.71, 0.97] {
            assert!((tr.eval(t).unwrap()[0] - f(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn segment_history_has_constant_tail() {
        let phi = HistoryFunction::segment(2, -1.0, |t: f64, out: &mut [f64]| {
            out[0] = t;
            out[1] = 2.0 * t;
        })
        .unwrap();
        assert_eq!(phi.eval(-0.5).unwrap(), vec![-0.5, -1.0]);
        assert_eq!(phi.eval(-100.0).unwrap(), vec![-1.0, -2.0]);
        assert_eq!(phi.limit(), &[-1.0, -2.0]);
        assert!(matches!(phi.eval(0.1), Err(HistoryError::AfterOrigin(_))));
        assert!(HistoryFunction::segment(1, 0.0, |_: f64, _: &mut [f64]| {}).is_err());
    }

    #[test]
    fn node_lookup_matches_full_state() {
        let phi = HistoryFunction::constant(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut tr = Trajectory::new(2, 2, phi, Interpolation::Linear).unwrap();
        tr.append(1.0, &[2.0, 4.0, 6.0, 8.0]).unwrap();
        let mut node = [0.0; 2];
        tr.node_into(0.5, 1, &mut node).unwrap();
        assert_eq!(node, [4.5, 6.0]);
        tr.node_into(-3.0, 1, &mut node).unwrap();
        assert_eq!(node, [3.0, 4.0]);
    }

    #[test]
    fn sup_deviation_examples() {
        let p = SpdMatrix::identity(2);
        let x0 = vec![1.0, 2.0];
        let same = Trajectory::new(
            1,
            2,
            HistoryFunction::constant(x0.clone()).unwrap(),
            Interpolation::Linear,
        )
        .unwrap();
        assert_eq!(sup_history_deviation(&same, &x0, &p).unwrap(), 0.0);

        // Distance 3 in P-norm with P = diag(4, 1): (1.5, 0) offset.
        let p4 = SpdMatrix::new(Matrix::from_diagonal(&[4.0, 1.0])).unwrap();
        let off = Trajectory::new(
            1,
            2,
            HistoryFunction::constant(vec![2.5, 2.0]).unwrap(),
            Interpolation::Linear,
        )
        .unwrap();
        assert!((sup_history_deviation(&off, &x0, &p4).unwrap() - 4.5f64).abs() < 1e-14);
    }

    #[test]
    fn sup_deviation_segment_endpoint_and_interior() {
        // φ(s) = x0 + s·e1 on [-1, 0]: ½s² peaks at s = -1 with value 1/2.
        let phi = HistoryFunction::segment(2, -1.0, |s: f64, out: &mut [f64]| {
            out[0] = 3.0 + s;
            out[1] = -1.0;
        })
        .unwrap();
        let p = SpdMatrix::identity(2);
        let v = sup_initial_deviation(&phi, &[3.0, -1.0], &p).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        // Dense-sampling cross-check.
        let dense = (0..=100_000)
            .map(|k| {
                let s = -1.0 + k as f64 * 1e-5;
                0.5 * s * s
            })
            .fold(0.0, f64::max);
        assert!((v - dense).abs() < 1e-12);

        // Interior maximum off the sampling grid: φ(s) = sin(π s / 0.7331) peaks at -0.36655.
        let w = std::f64::consts::PI / 0.7331;
        let phi = HistoryFunction::segment(1, -0.7331, move |s: f64, out: &mut [f64]| {
            out[0] = (w * s).sin();
        })
        .unwrap();
        let v = sup_initial_deviation(&phi, &[0.0], &SpdMatrix::identity(1)).unwrap();
        assert!((v - 0.5).abs() < 1e-14, "{v}");
    }

    proptest! {
        #[test]
        fn eval_at_samples_is_bitwise(values in prop::collection::vec(-1e3..1e3f64, 2..30), cubic in any::<bool>()) {
            let interp = if cubic { Interpolation::Cubic } else { Interpolation::Linear };
            let phi = HistoryFunction::constant(vec![values[0]]).unwrap();
            let mut tr = Trajectory::new(1, 1, phi, interp).unwrap();
            for (k, &v) in values.iter().enumerate().skip(1) {
                tr.append(k as f64 * 0.37, &[v]).unwrap();
            }
            for (k, &v) in values.iter().enumerate() {
                prop_assert_eq!(tr.eval(k as f64 * 0.37).unwrap()[0].to_bits(), v.to_bits());
            }
        }

        #[test]
        fn continuous_across_origin(slope in -5.0..5.0f64, x1 in -5.0..5.0f64) {
            let phi = HistoryFunction::segment(1, -1.0, move |s: f64, out: &mut [f64]| out[0] = 2.0 + slope * s).unwrap();
            let mut tr = Trajectory::new(1, 1, phi, Interpolation::Linear).unwrap();
            tr.append(1.0, &[x1]).unwrap();
            let h = 1e-9;
            let gap = (tr.eval(-h).unwrap()[0] - tr.eval(h).unwrap()[0]).abs();
            prop_assert!(gap < 1e-7);
        }

        #[test]
        fn sup_deviation_scales_quadratically(amp in 0.1..3.0f64, lambda in 1.0..4.0f64) {
            let make = |a: f64| HistoryFunction::segment(2, -2.0, move |s: f64, out: &mut [f64]| {
                out[0] = 1.0 + a * (3.0 * s).sin();
                out[1] = -1.0 + a * s * s;
            }).unwrap();
            let p = SpdMatrix::new(Matrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap()).unwrap();
            let x0 = [1.0, -1.0];
            let base = sup_initial_deviation(&make(amp), &x0, &p).unwrap();
            let scaled = sup_initial_deviation(&make(lambda * amp), &x0, &p).unwrap();
            prop_assert!((scaled - lambda * lambda * base).abs() <= 1e-9 * scaled.max(1.0));
        }
    }
}
