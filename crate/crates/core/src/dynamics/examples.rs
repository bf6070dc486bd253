//! Factories for the classic special cases of the general network: all use
//! unit Dirac kernels at zero with linear output `g = Γ u`.

use std::sync::Arc;

use super::{
    CouplingFlags, CouplingSchedule, DelaySchedule, ModelError, NetworkModel, NodeDynamics,
    OutputFunction, QuadratureSettings,
};
use crate::kernels::DelayKernel;
use crate::linalg::Matrix;
use crate::Scalar;

/// Named unweighted topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Node `i` linked to `i ± 1 (mod m)`.
    Ring,
    AllToAll,
}

impl Topology {
    /// 0/1 adjacency with zero diagonal.
    pub fn adjacency<T: Scalar>(self, m: usize) -> Matrix<T> {
        let mut a = Matrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let linked = match self {
                    Topology::AllToAll => i != j,
                    Topology::Ring => i != j && ((i + 1) % m == j || (j + 1) % m == i),
                };
                if linked {
                    a[(i, j)] = T::one();
                }
            }
        }
        a
    }
}

/// Delayed linear coupling
/// `ẋⁱ = f(xⁱ) + Σ_{j≠i} a_ij Γ [xʲ(t − τ) − xⁱ(t)]`.
///
/// Off-diagonal weights are `c · adj_ij`, or `c · adj_ij / Σ_j adj_ij` when
/// `normalize_rows` is set. The diagonal is `a_ii = −Σ_{j≠i} a_ij`, which
/// with normalized rows equals `−c`.
#[derive(Debug, Clone)]
pub struct DelayedCoupling<T> {
    pub node: NodeDynamics<T>,
    pub adjacency: Matrix<T>,
    pub normalize_rows: bool,
    pub strength: T,
    /// Diagonal of `Γ`, entries `≥ 0`.
    pub inner_diag: Vec<T>,
    pub tau: T,
}

/// Parameters for [`make_example`].
pub enum ExampleConfig<T> {
    /// Undelayed, constant, linear coupling: `ẋⁱ = f(t, xⁱ) + Σⱼ a_ij Γ xʲ`.
    Undelayed {
        node: NodeDynamics<T>,
        coupling: Matrix<T>,
        inner: Matrix<T>,
    },
    /// Undelayed, time-varying, linear coupling:
    /// `ẋⁱ = f(t, xⁱ) + Σⱼ a_ij(t) Γ(t) xʲ`.
    TimeVarying {
        node: NodeDynamics<T>,
        coupling: Arc<dyn Fn(T) -> Matrix<T> + Send + Sync>,
        inner: Arc<dyn Fn(T) -> Matrix<T> + Send + Sync>,
        /// Times at which the zero-row-sum and sign structure is verified.
        probe_times: Vec<T>,
    },
    Delayed(DelayedCoupling<T>),
}

fn diffusive_flags() -> CouplingFlags {
    CouplingFlags {
        zero_row_sums: true,
        nonneg_off_diagonal: true,
    }
}

/// Builds one of the three classic reductions of the general model.
pub fn make_example<T: Scalar>(config: ExampleConfig<T>) -> Result<NetworkModel<T>, ModelError> {
    match config {
        ExampleConfig::Undelayed {
            node,
            coupling,
            inner,
        } => {
            inner.expect_shape(node.dim(), node.dim())?;
            let sched = CouplingSchedule::constant(coupling)?.with_flags(diffusive_flags());
            sched.verify_at(T::zero())?;
            NetworkModel::with_uniform_kernel(
                node,
                OutputFunction::linear(inner)?,
                sched,
                DelaySchedule::zero(),
                DelayKernel::dirac_zero(),
                QuadratureSettings::default(),
            )
        }
        ExampleConfig::TimeVarying {
            node,
            coupling,
            inner,
            probe_times,
        } => {
            let n = node.dim();
            let m = coupling(T::zero()).rows();
            let sched = CouplingSchedule::time_varying(m, move |t| coupling(t))
                .with_flags(diffusive_flags());
            for &t in &probe_times {
                sched.verify_at(t)?;
                inner(t).expect_shape(n, n)?;
            }
            NetworkModel::with_uniform_kernel(
                node,
                OutputFunction::time_varying_linear(n, move |t| inner(t)),
                sched,
                DelaySchedule::zero(),
                DelayKernel::dirac_zero(),
                QuadratureSettings::default(),
            )
        }
        ExampleConfig::Delayed(cfg) => {
            let n = cfg.node.dim();
            let m = cfg.adjacency.rows();
            cfg.adjacency.expect_shape(m, m)?;
            if cfg.inner_diag.len() != n {
                return Err(ModelError::Dimension {
                    what: "inner coupling diagonal",
                    expected: n,
                    got: cfg.inner_diag.len(),
                });
            }
            if cfg.inner_diag.iter().any(|g| !(*g >= T::zero())) {
                return Err(ModelError::InvalidParameter(
                    "inner coupling diagonal must be nonnegative".into(),
                ));
            }
            if !(cfg.tau >= T::zero()) {
                return Err(ModelError::NegativeDelay {
                    i: 0,
                    j: 1,
                    t: 0.0,
                    value: cfg.tau.as_f64(),
                });
            }
            if !(cfg.strength >= T::zero()) {
                return Err(ModelError::InvalidParameter(
                    "coupling strength must be nonnegative".into(),
                ));
            }
            let a = delayed_coupling_matrix(&cfg.adjacency, cfg.normalize_rows, cfg.strength)?;
            let sched = CouplingSchedule::constant(a)?.with_flags(diffusive_flags());
            NetworkModel::with_uniform_kernel(
                cfg.node,
                OutputFunction::linear(Matrix::from_diagonal(&cfg.inner_diag))?,
                sched,
                DelaySchedule::split(T::zero(), cfg.tau),
                DelayKernel::dirac_zero(),
                QuadratureSettings::default(),
            )
        }
    }
}

/// Zero-row-sum matrix from an adjacency, as described on [`DelayedCoupling`].
pub fn delayed_coupling_matrix<T: Scalar>(
    adjacency: &Matrix<T>,
    normalize_rows: bool,
    strength: T,
) -> Result<Matrix<T>, ModelError> {
    let m = adjacency.rows();
    let mut a = Matrix::zeros(m, m);
    for i in 0..m {
        let mut row_sum = T::zero();
        for j in (0..m).filter(|&j| j != i) {
            let w = adjacency[(i, j)];
            if !(w >= T::zero()) {
                return Err(ModelError::NegativeOffDiagonal {
                    i,
                    j,
                    t: 0.0,
                    value: w.as_f64(),
                });
            }
            row_sum += w;
        }
        let scale = if normalize_rows && row_sum > T::zero() {
            strength / row_sum
        } else {
            strength
        };
        let mut diag = T::zero();
        for j in (0..m).filter(|&j| j != i) {
            a[(i, j)] = scale * adjacency[(i, j)];
            diag += a[(i, j)];
        }
        a[(i, i)] = -diag;
    }
    Ok(a)
}
