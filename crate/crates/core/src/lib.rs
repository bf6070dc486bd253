//! Simulation and checking of coupled networks with time-varying and
//! distributed delays,
//!
//! ```text
//! ẋⁱ(t) = f(t, xⁱ(t)) + Σⱼ a_ij(t) ∫₀^∞ g(t, xʲ(t − τ_ij(t) − s)) dK_ij(s),
//! ```
//!
//! together with quadratic (QUAD) certificates for `f` and the exponential
//! growth bound they imply.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64` / `*32`
//! aliases below name the common instantiations.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certificates;
pub mod diagnostics;
pub mod dynamics;
pub mod history;
pub mod integrator;
pub mod kernels;
pub mod linalg;
mod scalar;

pub use certificates::{
    check_quad, compute_eta, delta_from_cert, estimate_envelope_constants, CertificateError,
    EnvelopeConstants, ProbeBox, ProofConstants, QuadCertificate, QuadVerdict,
};
pub use diagnostics::{
    check_envelope, compute_m, compute_v, p_norm, sync_report, DiagnosticsError, EnvelopeReport,
    SyncReport,
};
pub use dynamics::{
    check_assumptions, make_example, rhs, rhs_vec, CouplingSchedule, DelaySchedule, ExampleConfig,
    ModelError, NetworkModel, NodeDynamics, OutputFunction, QuadratureSettings,
};
pub use history::{HistoryError, HistoryFunction, Interpolation, StateHistory, Trajectory};
pub use integrator::{integrate, IntegrateError, Integration, IntegratorConfig, Method};
pub use kernels::{
    build_quadrature, make_kernel, DelayKernel, KernelError, KernelSpec, QuadraturePlan,
};
pub use linalg::{LinalgError, Matrix, SpdMatrix};
pub use scalar::Scalar;

pub type Matrix64 = Matrix<f64>;
pub type Matrix32 = Matrix<f32>;
pub type SpdMatrix64 = SpdMatrix<f64>;
pub type SpdMatrix32 = SpdMatrix<f32>;
pub type NetworkModel64 = NetworkModel<f64>;
pub type NetworkModel32 = NetworkModel<f32>;
pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type HistoryFunction64 = HistoryFunction<f64>;
pub type HistoryFunction32 = HistoryFunction<f32>;
pub type QuadCertificate64 = QuadCertificate<f64>;
pub type QuadCertificate32 = QuadCertificate<f32>;
pub type EnvelopeReport64 = EnvelopeReport<f64>;
pub type EnvelopeReport32 = EnvelopeReport<f32>;
