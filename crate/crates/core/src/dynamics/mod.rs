//! The coupled network
//!
//! ```text
//! ẋⁱ(t) = f(t, xⁱ(t)) + Σⱼ a_ij(t) ∫₀^∞ g(t, xʲ(t − τ_ij(t) − s)) dK_ij(s),   i = 1..m
//! ```
//!
//! with one node law `f` shared by every node, an output map `g`, a coupling
//! schedule `A(t)`, delays `τ_ij(t)` and delay kernels `K_ij`.

mod assumptions;
mod examples;
mod library;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::history::{HistoryError, StateHistory};
use crate::integrator::{convolve, ConvolveError};
use crate::kernels::{build_quadrature, DelayKernel, KernelError, QuadraturePlan};
use crate::linalg::{LinalgError, Matrix};
use crate::Scalar;

pub use assumptions::{
    check_assumptions, check_assumptions_in, AssumptionReport, Finding, Witness,
};
pub use examples::{
    delayed_coupling_matrix, make_example, DelayedCoupling, ExampleConfig, Topology,
};
pub use library::{chua, hopfield, linear, ChuaParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("coupling row {row} sums to {sum} at t = {t}, expected zero")]
    RowSum { row: usize, t: f64, sum: f64 },
    #[error("coupling entry a[{i}][{j}] = {value} < 0 at t = {t}")]
    NegativeOffDiagonal {
        i: usize,
        j: usize,
        t: f64,
        value: f64,
    },
    #[error("delay tau[{i}][{j}] = {value} < 0 at t = {t}")]
    NegativeDelay {
        i: usize,
        j: usize,
        t: f64,
        value: f64,
    },
    #[error("non-finite derivative for node {node} at t = {t}")]
    NonFinite { node: usize, t: f64 },
    #[error("history lookup for node {node} at t = {t} failed: {source}")]
    Lookup {
        node: usize,
        t: f64,
        #[source]
        source: HistoryError,
    },
    #[error("convolution for edge ({i}, {j}) at t = {t} failed: {source}")]
    Convolution {
        i: usize,
        j: usize,
        t: f64,
        #[source]
        source: ConvolveError,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub(crate) type VecFn<T> = Arc<dyn Fn(T, &[T], &mut [T]) + Send + Sync>;
type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
type MatrixFn<T> = Arc<dyn Fn(T) -> Matrix<T> + Send + Sync>;
type DelayFn<T> = Arc<dyn Fn(usize, usize, T) -> T + Send + Sync>;

/// Node law `f(t, u)` on `ℝⁿ`.
#[derive(Clone)]
pub struct NodeDynamics<T> {
    dim: usize,
    eval: VecFn<T>,
    lipschitz: Option<T>,
    label: String,
}

impl<T: fmt::Debug> fmt::Debug for NodeDynamics<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NodeDynamics")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl<T: Scalar> NodeDynamics<T> {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(T, &[T], &mut [T]) + Send + Sync + 'static,
    {
        assert!(dim >= 1, "node dimension must be at least 1");
        Self {
            dim,
            eval: Arc::new(f),
            lipschitz: None,
            label: "custom".into(),
        }
    }

    /// Declares a global Lipschitz constant in `u`.
    pub fn with_lipschitz(mut self, l: T) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz_hint(&self) -> Option<T> {
        self.lipschitz
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval_into(&self, t: T, u: &[T], out: &mut [T]) {
        (self.eval)(t, u, out)
    }

    pub fn eval(&self, t: T, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(t, u, &mut out);
        out
    }
}

/// Output map `g(t, u)` with its declared Lipschitz bound `κ(t)`.
#[derive(Clone)]
pub struct OutputFunction<T> {
    dim: usize,
    eval: VecFn<T>,
    kappa: ScalarFn<T>,
}

impl<T> fmt::Debug for OutputFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OutputFunction")
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> OutputFunction<T> {
    pub fn new<F, K>(dim: usize, g: F, kappa: K) -> Self
    where
        F: Fn(T, &[T], &mut [T]) + Send + Sync + 'static,
        K: Fn(T) -> T + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Arc::new(g),
            kappa: Arc::new(kappa),
        }
    }

    /// `g(t, u) = Γ u`, `κ = ‖Γ‖₂`.
    pub fn linear(gamma: Matrix<T>) -> Result<Self, ModelError> {
        if !gamma.is_square() {
            return Err(ModelError::Dimension {
                what: "inner coupling matrix",
                expected: gamma.rows(),
                got: gamma.cols(),
            });
        }
        let kappa = gamma.spectral_norm();
        let dim = gamma.rows();
        Ok(Self::new(
            dim,
            move |_, u, out| gamma.mul_vec_into(u, out),
            move |_| kappa,
        ))
    }

    /// `g(t, u) = Γ(t) u`, `κ(t) = ‖Γ(t)‖₂`.
    pub fn time_varying_linear<G>(dim: usize, gamma: G) -> Self
    where
        G: Fn(T) -> Matrix<T> + Send + Sync + 'static,
    {
        let gamma = Arc::new(gamma);
        let g2 = Arc::clone(&gamma);
        Self::new(
            dim,
            move |t, u, out| gamma(t).mul_vec_into(u, out),
            move |t| g2(t).spectral_norm(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval_into(&self, t: T, u: &[T], out: &mut [T]) {
        (self.eval)(t, u, out)
    }

    pub fn eval(&self, t: T, u: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        self.eval_into(t, u, &mut out);
        out
    }

    pub fn kappa(&self, t: T) -> T {
        (self.kappa)(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CouplingFlags {
    pub zero_row_sums: bool,
    pub nonneg_off_diagonal: bool,
}

#[derive(Clone)]
enum CouplingForm<T> {
    Constant(Matrix<T>),
    TimeVarying(MatrixFn<T>),
}

/// Coupling matrix schedule `A(t)`.
#[derive(Clone)]
pub struct CouplingSchedule<T> {
    nodes: usize,
    form: CouplingForm<T>,
    flags: CouplingFlags,
}

impl<T> fmt::Debug for CouplingSchedule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CouplingSchedule")
            .field("nodes", &self.nodes)
            .field("flags", &self.flags)
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> CouplingSchedule<T> {
    pub fn constant(a: Matrix<T>) -> Result<Self, ModelError> {
        if !a.is_square() {
            return Err(ModelError::Dimension {
                what: "coupling matrix",
                expected: a.rows(),
                got: a.cols(),
            });
        }
        Ok(Self {
            nodes: a.rows(),
            form: CouplingForm::Constant(a),
            flags: CouplingFlags::default(),
        })
    }

    pub fn time_varying<F>(nodes: usize, a: F) -> Self
    where
        F: Fn(T) -> Matrix<T> + Send + Sync + 'static,
    {
        Self {
            nodes,
            form: CouplingForm::TimeVarying(Arc::new(a)),
            flags: CouplingFlags::default(),
        }
    }

    /// `A(t) = s(t) · A`.
    pub fn modulated<S>(a: Matrix<T>, scale: S) -> Result<Self, ModelError>
    where
        S: Fn(T) -> T + Send + Sync + 'static,
    {
        let nodes = Self::constant(a.clone())?.nodes;
        Ok(Self::time_varying(nodes, move |t| a.scaled(scale(t))))
    }

    /// Declares structural flags; checked on every [`Self::verify_at`].
    pub fn with_flags(mut self, flags: CouplingFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn flags(&self) -> CouplingFlags {
        self.flags
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.form, CouplingForm::Constant(_))
    }

    pub fn at(&self, t: T) -> Matrix<T> {
        match &self.form {
            CouplingForm::Constant(a) => a.clone(),
            CouplingForm::TimeVarying(f) => f(t),
        }
    }

    /// Checks shape and the declared flags at time `t`.
    pub fn verify_at(&self, t: T) -> Result<(), ModelError> {
        let a = self.at(t);
        a.expect_shape(self.nodes, self.nodes)?;
        let tol = T::structural_tol() * a.max_abs().max(T::one());
        for i in 0..self.nodes {
            if self.flags.zero_row_sums {
                let sum: T = a.row(i).iter().copied().sum();
                if !(sum.abs() <= tol) {
                    return Err(ModelError::RowSum {
                        row: i,
                        t: t.as_f64(),
                        sum: sum.as_f64(),
                    });
                }
            }
            if self.flags.nonneg_off_diagonal {
                for j in (0..self.nodes).filter(|&j| j != i) {
                    if !(a[(i, j)] >= -tol) {
                        return Err(ModelError::NegativeOffDiagonal {
                            i,
                            j,
                            t: t.as_f64(),
                            value: a[(i, j)].as_f64(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Delays `τ_ij(t)`.
#[derive(Clone)]
pub struct DelaySchedule<T> {
    eval: DelayFn<T>,
}

impl<T> fmt::Debug for DelaySchedule<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelaySchedule").finish_non_exhaustive()
    }
}

impl<T: Scalar> DelaySchedule<T> {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(usize, usize, T) -> T + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Self::new(|_, _, _| T::zero())
    }

    /// `τ_ii = self_delay`, `τ_ij = other` for `i ≠ j`.
    pub fn split(self_delay: T, other: T) -> Self {
        Self::new(move |i, j, _| if i == j { self_delay } else { other })
    }

    pub fn matrix(tau: Matrix<T>) -> Self {
        Self::new(move |i, j, _| tau[(i, j)])
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, t: T) -> T {
        (self.eval)(i, j, t)
    }
}

/// Quadrature settings used to discretize every kernel of a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings<T> {
    pub tail_tol: T,
    pub node_spacing: T,
}

impl<T: Scalar> Default for QuadratureSettings<T> {
    fn default() -> Self {
        Self {
            tail_tol: T::lit(1e-10),
            node_spacing: T::lit(1e-2),
        }
    }
}

/// Fully assembled network. Immutable once built.
#[derive(Debug, Clone)]
pub struct NetworkModel<T> {
    nodes: usize,
    node: NodeDynamics<T>,
    output: OutputFunction<T>,
    coupling: CouplingSchedule<T>,
    delays: DelaySchedule<T>,
    kernels: Vec<DelayKernel<T>>,
    plans: Vec<QuadraturePlan<T>>,
}

impl<T: Scalar> NetworkModel<T> {
    /// `kernels` is the row-major `m × m` grid `K_ij`.
    pub fn new(
        node: NodeDynamics<T>,
        output: OutputFunction<T>,
        coupling: CouplingSchedule<T>,
        delays: DelaySchedule<T>,
        kernels: Vec<DelayKernel<T>>,
        quadrature: QuadratureSettings<T>,
    ) -> Result<Self, ModelError> {
        let m = coupling.nodes();
        if m == 0 {
            return Err(ModelError::InvalidParameter(
                "network needs at least one node".into(),
            ));
        }
        if output.dim() != node.dim() {
            return Err(ModelError::Dimension {
                what: "output function",
                expected: node.dim(),
                got: output.dim(),
            });
        }
        if kernels.len() != m * m {
            return Err(ModelError::Dimension {
                what: "kernel grid",
                expected: m * m,
                got: kernels.len(),
            });
        }
        if !(quadrature.tail_tol > T::zero() && quadrature.node_spacing > T::zero()) {
            return Err(ModelError::InvalidParameter(
                "quadrature tail_tol and node_spacing must be positive".into(),
            ));
        }
        coupling.verify_at(T::zero())?;
        let plans = kernels
            .iter()
            .map(|k| build_quadrature(k, quadrature.tail_tol, quadrature.node_spacing))
            .collect();
        Ok(Self {
            nodes: m,
            node,
            output,
            coupling,
            delays,
            kernels,
            plans,
        })
    }

    /// Same kernel on every edge.
    pub fn with_uniform_kernel(
        node: NodeDynamics<T>,
        output: OutputFunction<T>,
        coupling: CouplingSchedule<T>,
        delays: DelaySchedule<T>,
        kernel: DelayKernel<T>,
        quadrature: QuadratureSettings<T>,
    ) -> Result<Self, ModelError> {
        let m = coupling.nodes();
        Self::new(
            node,
            output,
            coupling,
            delays,
            vec![kernel; m * m],
            quadrature,
        )
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn node_dim(&self) -> usize {
        self.node.dim()
    }

    /// `m · n`.
    pub fn state_dim(&self) -> usize {
        self.nodes * self.node.dim()
    }

    pub fn node_dynamics(&self) -> &NodeDynamics<T> {
        &self.node
    }

    pub fn output(&self) -> &OutputFunction<T> {
        &self.output
    }

    pub fn coupling(&self) -> &CouplingSchedule<T> {
        &self.coupling
    }

    pub fn delays(&self) -> &DelaySchedule<T> {
        &self.delays
    }

    pub fn kernel(&self, i: usize, j: usize) -> &DelayKernel<T> {
        &self.kernels[i * self.nodes + j]
    }

    pub fn plan(&self, i: usize, j: usize) -> &QuadraturePlan<T> {
        &self.plans[i * self.nodes + j]
    }

    /// `K = Σᵢ Σⱼ ∫ |dK_ij|`.
    pub fn total_kernel_variation(&self) -> T {
        self.kernels.iter().map(DelayKernel::total_variation).sum()
    }
}

/// Evaluates the network right-hand side at `t` given the past.
///
/// Edges with `a_ij(t) = 0` are skipped.
pub fn rhs<T: Scalar>(
    model: &NetworkModel<T>,
    t: T,
    past: &dyn StateHistory<T>,
    out: &mut [T],
) -> Result<(), ModelError> {
    let m = model.nodes;
    let n = model.node.dim();
    if out.len() != m * n || past.dim() != m * n {
        return Err(ModelError::Dimension {
            what: "network state",
            expected: m * n,
            got: out.len().min(past.dim()),
        });
    }
    let a = model.coupling.at(t);
    let mut xi = vec![T::zero(); n];
    let mut conv = vec![T::zero(); n];
    for i in 0..m {
        past.node_into(t, i, &mut xi)
            .map_err(|source| ModelError::Lookup {
                node: i,
                t: t.as_f64(),
                source,
            })?;
        let oi = &mut out[i * n..(i + 1) * n];
        model.node.eval_into(t, &xi, oi);
        for j in 0..m {
            let aij = a[(i, j)];
            if aij == T::zero() {
                continue;
            }
            let tau = model.delays.at(i, j, t);
            convolve(model.plan(i, j), &model.output, past, j, t, tau, &mut conv).map_err(
                |source| ModelError::Convolution {
                    i,
                    j,
                    t: t.as_f64(),
                    source,
                },
            )?;
            for (o, &c) in oi.iter_mut().zip(&conv) {
                *o += aij * c;
            }
        }
        if oi.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite {
                node: i,
                t: t.as_f64(),
            });
        }
    }
    Ok(())
}

/// Allocating wrapper around [`rhs`].
pub fn rhs_vec<T: Scalar>(
    model: &NetworkModel<T>,
    t: T,
    past: &dyn StateHistory<T>,
) -> Result<Vec<T>, ModelError> {
    let mut out = vec![T::zero(); model.state_dim()];
    rhs(model, t, past, &mut out)?;
    Ok(out)
}
