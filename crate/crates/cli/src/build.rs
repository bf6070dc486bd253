//! Scenario → model, initial function, integrator settings and certificate.

use delaynet::dynamics::{
    chua, delayed_coupling_matrix, hopfield, linear, ChuaParams, CouplingFlags, Topology,
};
use delaynet::{
    make_kernel, CouplingSchedule, DelayKernel, DelaySchedule, HistoryFunction, IntegratorConfig,
    Interpolation, KernelSpec, Matrix, Method, ModelError, NetworkModel, NodeDynamics,
    OutputFunction, QuadCertificate, QuadratureSettings, Scalar,
};

use crate::scenario::{
    CertificateSpec, CouplingSpec, InitialSpec, InterpolationSpec, KernelSpecJson, MethodSpec,
    NodeSpec, Rows, Scenario, TopologySpec,
};

/// Key of the offending section and a message.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildIssue {
    pub pointer: &'static str,
    pub message: String,
}

fn issue(pointer: &'static str, message: impl ToString) -> BuildIssue {
    BuildIssue {
        pointer,
        message: message.to_string(),
    }
}

pub struct Built<T> {
    pub model: NetworkModel<T>,
    pub initial: HistoryFunction<T>,
    pub config: IntegratorConfig<T>,
    pub certificate: Option<QuadCertificate<T>>,
}

impl<T: Scalar> Built<T> {
    /// Stacked `φ(0)`.
    pub fn x0(&self) -> Vec<T> {
        self.initial
            .eval(T::zero())
            .expect("initial function is defined at 0")
    }
}

fn matrix<T: Scalar>(rows: &Rows) -> Result<Matrix<T>, delaynet::LinalgError> {
    let rows: Vec<Vec<T>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| T::lit(v)).collect())
        .collect();
    Matrix::from_rows(&rows)
}

fn vector<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn kernel_spec<T: Scalar>(k: &KernelSpecJson) -> KernelSpec<T> {
    match *k {
        KernelSpecJson::Dirac { at, weight } => KernelSpec::Dirac {
            at: T::lit(at),
            weight: T::lit(weight),
        },
        KernelSpecJson::Exponential { rate, weight } => KernelSpec::Exponential {
            rate: T::lit(rate),
            weight: T::lit(weight),
        },
        KernelSpecJson::Uniform { a, b, weight } => KernelSpec::Uniform {
            a: T::lit(a),
            b: T::lit(b),
            weight: T::lit(weight),
        },
        KernelSpecJson::Mixture { ref parts } => {
            KernelSpec::Mixture(parts.iter().map(kernel_spec).collect())
        }
    }
}

fn node<T: Scalar>(spec: &NodeSpec) -> Result<NodeDynamics<T>, BuildIssue> {
    let at = "/model/node";
    match spec {
        NodeSpec::Linear { matrix: b } => {
            linear(matrix(b).map_err(|e| issue(at, e))?).map_err(|e| issue(at, e))
        }
        NodeSpec::Chua {
            alpha,
            beta,
            gamma,
            m0,
            m1,
        } => {
            let d = ChuaParams::<f64>::double_scroll();
            let pick = |v: &Option<f64>, default: f64| T::lit(v.unwrap_or(default));
            Ok(chua(ChuaParams {
                alpha: pick(alpha, d.alpha),
                beta: pick(beta, d.beta),
                gamma: pick(gamma, d.gamma),
                m0: pick(m0, d.m0),
                m1: pick(m1, d.m1),
            }))
        }
        NodeSpec::Hopfield {
            decay,
            weights,
            bias,
        } => hopfield(
            vector(decay),
            matrix(weights).map_err(|e| issue(at, e))?,
            vector(bias),
        )
        .map_err(|e| issue(at, e)),
    }
}

fn coupling<T: Scalar>(spec: &CouplingSpec, m: usize) -> Result<CouplingSchedule<T>, BuildIssue> {
    let at = "/model/coupling";
    let diffusive = CouplingFlags {
        zero_row_sums: true,
        nonneg_off_diagonal: true,
    };
    match spec {
        CouplingSpec::Matrix {
            matrix: a,
            diffusive: is_diffusive,
            modulation,
        } => {
            let a = matrix::<T>(a).map_err(|e| issue(at, e))?;
            let sched = match *modulation {
                None => CouplingSchedule::constant(a),
                Some(s) => {
                    let (amp, w) = (T::lit(s.amplitude), T::lit(s.frequency));
                    CouplingSchedule::modulated(a, move |t: T| T::one() + amp * (w * t).sin())
                }
            }
            .map_err(|e| issue(at, e))?;
            Ok(if *is_diffusive {
                sched.with_flags(diffusive)
            } else {
                sched
            })
        }
        CouplingSpec::Diffusive {
            topology,
            adjacency,
            strength,
            normalize_rows,
        } => {
            let adj = match topology {
                TopologySpec::AllToAll => Topology::AllToAll.adjacency(m),
                TopologySpec::Ring => Topology::Ring.adjacency(m),
                TopologySpec::Custom => {
                    let rows = adjacency
                        .as_ref()
                        .ok_or_else(|| issue(at, "custom topology needs an adjacency matrix"))?;
                    matrix(rows).map_err(|e| issue(at, e))?
                }
            };
            let a = delayed_coupling_matrix(&adj, *normalize_rows, T::lit(*strength))
                .map_err(|e| issue(at, e))?;
            Ok(CouplingSchedule::constant(a)
                .map_err(|e| issue(at, e))?
                .with_flags(diffusive))
        }
    }
}

fn delays<T: Scalar>(s: &Scenario) -> Result<DelaySchedule<T>, BuildIssue> {
    let spec = &s.model.delays;
    let base: Matrix<T> = match &spec.matrix {
        Some(rows) => matrix(rows).map_err(|e| issue("/model/delays", e))?,
        None => {
            let m = s.model.nodes;
            let (own, other) = (
                T::lit(spec.self_delay.unwrap_or(0.0)),
                T::lit(spec.other.unwrap_or(0.0)),
            );
            let mut tau = Matrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    tau[(i, j)] = if i == j { own } else { other };
                }
            }
            tau
        }
    };
    Ok(match spec.variation {
        None => DelaySchedule::matrix(base),
        Some(v) => {
            let (amp, w) = (T::lit(v.amplitude), T::lit(v.frequency));
            DelaySchedule::new(move |i, j, t: T| {
                let b = base[(i, j)];
                if i == j {
                    b
                } else {
                    b + amp * (w * t).sin()
                }
            })
        }
    })
}

fn initial<T: Scalar>(spec: &InitialSpec) -> Result<HistoryFunction<T>, BuildIssue> {
    let at = "/initial";
    let flat = |rows: &Rows| -> Vec<T> { rows.iter().flatten().map(|&v| T::lit(v)).collect() };
    match spec {
        InitialSpec::Constant { values } => {
            HistoryFunction::constant(flat(values)).map_err(|e| issue(at, e))
        }
        InitialSpec::Sinusoid {
            values,
            amplitude,
            frequency,
            duration,
        } => {
            let (base, amp, w) = (flat(values), flat(amplitude), T::lit(*frequency));
            HistoryFunction::segment(
                base.len(),
                -T::lit(*duration),
                move |s: T, out: &mut [T]| {
                    let sin = (w * s).sin();
                    for ((o, &b), &a) in out.iter_mut().zip(&base).zip(&amp) {
                        *o = b + a * sin;
                    }
                },
            )
            .map_err(|e| issue(at, e))
        }
    }
}

fn certificate<T: Scalar>(
    spec: &CertificateSpec,
    node: &NodeDynamics<T>,
) -> Result<QuadCertificate<T>, BuildIssue> {
    let at = "/certificate";
    let eps = T::lit(spec.epsilon);
    match (&spec.rule, &spec.p, &spec.delta) {
        (Some(_), _, _) => {
            let l = node
                .lipschitz_hint()
                .ok_or_else(|| issue(at, "node law has no Lipschitz constant"))?;
            QuadCertificate::lipschitz_rule(node.dim(), l, eps).map_err(|e| issue(at, e))
        }
        (None, Some(p), Some(d)) => {
            QuadCertificate::new(matrix(p).map_err(|e| issue(at, e))?, vector(d), eps)
                .map_err(|e| issue(at, e))
        }
        _ => Err(issue(
            at,
            "certificate needs either a rule or both P and Delta",
        )),
    }
}

fn model_issue(e: ModelError) -> BuildIssue {
    let at = match e {
        ModelError::Kernel(_) => "/model/kernel",
        ModelError::RowSum { .. } | ModelError::NegativeOffDiagonal { .. } => "/model/coupling",
        ModelError::NegativeDelay { .. } => "/model/delays",
        ModelError::Dimension { what, .. } if what.contains("output") => "/model/inner",
        _ => "/model",
    };
    issue(at, e)
}

pub fn build<T: Scalar>(s: &Scenario) -> Result<Built<T>, BuildIssue> {
    let m = s.model.nodes;
    let f = node::<T>(&s.model.node)?;
    let gamma = matrix::<T>(&s.model.inner).map_err(|e| issue("/model/inner", e))?;
    let output = OutputFunction::linear(gamma).map_err(|e| issue("/model/inner", e))?;
    let kernel = match &s.model.kernel {
        Some(k) => make_kernel(&kernel_spec::<T>(k)).map_err(|e| issue("/model/kernel", e))?,
        None => DelayKernel::dirac_zero(),
    };
    let mut quad = QuadratureSettings::<T>::default();
    if let Some(q) = s.model.quadrature {
        if let Some(v) = q.tail_tol {
            quad.tail_tol = T::lit(v);
        }
        if let Some(v) = q.node_spacing {
            quad.node_spacing = T::lit(v);
        }
    }
    let cert = s
        .certificate
        .as_ref()
        .map(|c| certificate(c, &f))
        .transpose()?;
    let model = NetworkModel::with_uniform_kernel(
        f,
        output,
        coupling(&s.model.coupling, m)?,
        delays(s)?,
        kernel,
        quad,
    )
    .map_err(model_issue)?;
    let ig = s.integrator;
    let mut config = IntegratorConfig::new(
        match ig.method {
            MethodSpec::Rk4 => Method::Rk4,
            MethodSpec::Euler => Method::Euler,
        },
        T::lit(ig.step),
        T::lit(ig.horizon),
    );
    config.output_stride = s.output.stride;
    config.interpolation = match ig.interpolation {
        InterpolationSpec::Linear => Interpolation::Linear,
        InterpolationSpec::Cubic => Interpolation::Cubic,
    };
    config.validate().map_err(|e| issue("/integrator", e))?;
    Ok(Built {
        model,
        initial: initial(&s.initial)?,
        config,
        certificate: cert,
    })
}
