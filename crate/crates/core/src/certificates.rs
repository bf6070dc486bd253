//! QUAD certificates and the constants of the exponential growth bound.
//!
//! A certificate `(P, Δ, ε)` claims that for all `u₁, u₂` and `t ≥ 0`
//!
//! ```text
//! (u₁ − u₂)ᵀ P { f(t,u₁) − f(t,u₂) − Δ (u₁ − u₂) } ≤ −ε (u₁ − u₂)ᵀ(u₁ − u₂).
//! ```
//!
//! [`check_quad`] can only refute that claim by sampling. Given a certificate,
//! `δ = λ_max(sym(PΔ)) − ε` satisfies
//! `(u₁ − u₂)ᵀ P [f(t,u₁) − f(t,u₂)] ≤ δ ‖u₁ − u₂‖²`, and together with bounds
//! `α ≥ κ(t)`, `β ≥ |a_ij(t)|`, `γ` on the frozen-state derivative and the
//! kernel mass `K = Σ ∫|dK_ij|` it yields the growth rate
//!
//! ```text
//! η = (2δ + 2αβ‖P‖K) / λ_min(P) + 2mγ‖P‖ / √λ_min(P).
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dynamics::{NetworkModel, NodeDynamics};
use crate::linalg::{dot, LinalgError, Matrix, SpdMatrix};
use crate::Scalar;

/// Lower clamp applied to `δ`.
pub const DELTA_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertificateError {
    #[error("P is not a valid symmetric positive definite matrix: {0}")]
    InvalidP(#[source] LinalgError),
    #[error("Delta has {got} entries, P is {expected}x{expected}")]
    DeltaDimension { expected: usize, got: usize },
    #[error("epsilon must be positive and finite, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("certificate dimension {cert} does not match node dimension {node}")]
    NodeDimension { cert: usize, node: usize },
    #[error("invalid probe box: {0}")]
    InvalidBox(String),
    #[error("growth rate eta = {0} is not positive")]
    NonPositiveEta(f64),
    #[error("invalid constant: {0}")]
    InvalidConstant(String),
}

/// `(P, Δ, ε)` witnessing `f ∈ QUAD(Δ, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadCertificate<T> {
    p: SpdMatrix<T>,
    delta: Vec<T>,
    epsilon: T,
}

impl<T: Scalar> QuadCertificate<T> {
    pub fn new(p: Matrix<T>, delta: Vec<T>, epsilon: T) -> Result<Self, CertificateError> {
        let p = SpdMatrix::new(p).map_err(CertificateError::InvalidP)?;
        if delta.len() != p.dim() {
            return Err(CertificateError::DeltaDimension {
                expected: p.dim(),
                got: delta.len(),
            });
        }
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(CertificateError::NonPositiveEpsilon(epsilon.as_f64()));
        }
        Ok(Self { p, delta, epsilon })
    }

    /// `P = I`, `Δ = (L + ε) I`: valid for any `f` with global Lipschitz
    /// constant `L`, since `dᵀ(f(u₁) − f(u₂)) ≤ L‖d‖²`.
    pub fn lipschitz_rule(n: usize, lipschitz: T, epsilon: T) -> Result<Self, CertificateError> {
        Self::new(Matrix::identity(n), vec![lipschitz + epsilon; n], epsilon)
    }

    pub fn p(&self) -> &SpdMatrix<T> {
        &self.p
    }

    pub fn delta(&self) -> &[T] {
        &self.delta
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    /// `(cP, Δ, cε)`.
    pub fn scaled(&self, c: T) -> Result<Self, CertificateError> {
        Self::new(
            self.p.matrix().scaled(c),
            self.delta.clone(),
            self.epsilon * c,
        )
    }

    /// Both sides of the QUAD inequality at `(t, u₁, u₂)`.
    pub fn sides(&self, f: &NodeDynamics<T>, t: T, u1: &[T], u2: &[T]) -> (T, T) {
        let d: Vec<T> = u1.iter().zip(u2).map(|(&a, &b)| a - b).collect();
        let (f1, f2) = (f.eval(t, u1), f.eval(t, u2));
        let v: Vec<T> = f1
            .iter()
            .zip(&f2)
            .zip(d.iter().zip(&self.delta))
            .map(|((&a, &b), (&di, &dd))| (a - b) - dd * di)
            .collect();
        let lhs = self.p.matrix().bilinear(&d, &v);
        let rhs = -self.epsilon * dot(&d, &d);
        (lhs, rhs)
    }
}

/// Axis-aligned box of states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> ProbeBox<T> {
    pub fn cube(n: usize, radius: T) -> Self {
        Self {
            lower: vec![-radius; n],
            upper: vec![radius; n],
        }
    }

    fn validate(&self, n: usize) -> Result<(), CertificateError> {
        if self.lower.len() != n || self.upper.len() != n {
            return Err(CertificateError::InvalidBox(format!(
                "bounds must have {n} entries"
            )));
        }
        if self
            .lower
            .iter()
            .zip(&self.upper)
            .any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite())
        {
            return Err(CertificateError::InvalidBox(
                "every lower bound must be strictly below its upper bound".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuadVerdict<T> {
    /// No violation among `probes` samples. Not a proof.
    Pass { probes: usize },
    Counterexample {
        /// Zero-based probe index of the first violation.
        index: usize,
        t: T,
        u1: Vec<T>,
        u2: Vec<T>,
        lhs: T,
        rhs: T,
    },
}

impl<T> QuadVerdict<T> {
    pub fn passed(&self) -> bool {
        matches!(self, QuadVerdict::Pass { .. })
    }
}

/// Samples `(t, u₁, u₂)` uniformly from `t_range × box × box` and reports the
/// first probe where the QUAD inequality fails beyond rounding error.
pub fn check_quad<T: Scalar>(
    f: &NodeDynamics<T>,
    cert: &QuadCertificate<T>,
    bounds: &ProbeBox<T>,
    t_range: (T, T),
    budget: usize,
    seed: u64,
) -> Result<QuadVerdict<T>, CertificateError> {
    let n = cert.dim();
    if f.dim() != n {
        return Err(CertificateError::NodeDimension {
            cert: n,
            node: f.dim(),
        });
    }
    bounds.validate(n)?;
    if !(t_range.0 <= t_range.1) {
        return Err(CertificateError::InvalidBox(
            "t_range must be ordered".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |lo: T, hi: T| lo + T::lit(rng.gen::<f64>()) * (hi - lo);
    let rounding = T::lit(64.0) * T::epsilon();
    let p_norm = cert.p.norm();
    let delta_max = cert.delta.iter().fold(T::zero(), |a, d| a.max(d.abs()));
    for index in 0..budget {
        let t = draw(t_range.0, t_range.1);
        let u1: Vec<T> = (0..n)
            .map(|i| draw(bounds.lower[i], bounds.upper[i]))
            .collect();
        let u2: Vec<T> = (0..n)
            .map(|i| draw(bounds.lower[i], bounds.upper[i]))
            .collect();
        let (lhs, rhs) = cert.sides(f, t, &u1, &u2);
        // Rounding allowance proportional to the magnitudes involved.
        let d2: T = u1.iter().zip(&u2).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let fscale = crate::linalg::norm2(&f.eval(t, &u1)) + crate::linalg::norm2(&f.eval(t, &u2));
        let slack = rounding
            * (p_norm * (d2 * (T::one() + delta_max) + d2.sqrt() * fscale) + cert.epsilon * d2);
        if !(lhs <= rhs + slack) {
            return Ok(QuadVerdict::Counterexample {
                index,
                t,
                u1,
                u2,
                lhs,
                rhs,
            });
        }
    }
    Ok(QuadVerdict::Pass { probes: budget })
}

/// `δ = max(λ_max(sym(PΔ)) − ε, 1e−12)`.
pub fn delta_from_cert<T: Scalar>(cert: &QuadCertificate<T>) -> T {
    let p_delta = cert.p.matrix().matmul(&Matrix::from_diagonal(&cert.delta));
    let lmax = p_delta
        .symmetric_part()
        .symmetric_eigenvalues()
        .last()
        .copied()
        .unwrap_or_else(T::zero);
    (lmax - cert.epsilon).max(T::lit(DELTA_FLOOR))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeConstants<T> {
    /// Bound on `κ(t)`.
    pub alpha: T,
    /// Bound on `|a_ij(t)|`.
    pub beta: T,
    /// Bound on `‖f(t, xⁱ(0)) + Σⱼ a_ij(t) g(t, xʲ(0)) ∫dK_ij‖`.
    pub gamma: T,
}

/// Estimates `α, β, γ` on `grid` equally spaced times in `[0, horizon]`.
///
/// `γ` uses the signed kernel masses `∫ dK_ij`.
pub fn estimate_envelope_constants<T: Scalar>(
    model: &NetworkModel<T>,
    x0: &[T],
    horizon: T,
    grid: usize,
) -> EnvelopeConstants<T> {
    assert!(horizon > T::zero(), "horizon must be positive");
    assert!(grid >= 2, "grid needs at least two points");
    assert_eq!(x0.len(), model.state_dim(), "x0 has the wrong length");
    let m = model.nodes();
    let n = model.node_dim();
    let masses: Vec<T> = (0..m * m)
        .map(|k| model.kernel(k / m, k % m).mass())
        .collect();
    let mut alpha = T::zero();
    let mut beta = T::zero();
    let mut gamma = T::zero();
    let mut acc = vec![T::zero(); n];
    let mut gx = vec![T::zero(); n];
    for k in 0..grid {
        let t = horizon * T::from_usize(k).unwrap() / T::from_usize(grid - 1).unwrap();
        alpha = alpha.max(model.output().kappa(t));
        let a = model.coupling().at(t);
        beta = beta.max(a.max_abs());
        for i in 0..m {
            model
                .node_dynamics()
                .eval_into(t, &x0[i * n..(i + 1) * n], &mut acc);
            for j in 0..m {
                let w = a[(i, j)] * masses[i * m + j];
                if w == T::zero() {
                    continue;
                }
                model
                    .output()
                    .eval_into(t, &x0[j * n..(j + 1) * n], &mut gx);
                for (o, &g) in acc.iter_mut().zip(&gx) {
                    *o += w * g;
                }
            }
            gamma = gamma.max(crate::linalg::norm2(&acc));
        }
    }
    EnvelopeConstants { alpha, beta, gamma }
}

/// `η = (2δ + 2αβ‖P‖K) / λ_min + 2mγ‖P‖ / √λ_min`.
pub fn compute_eta<T: Scalar>(
    delta: T,
    constants: &EnvelopeConstants<T>,
    nodes: usize,
    p: &SpdMatrix<T>,
    kernel_variation: T,
) -> Result<T, CertificateError> {
    let EnvelopeConstants { alpha, beta, gamma } = *constants;
    for (name, v) in [
        ("alpha", alpha),
        ("beta", beta),
        ("gamma", gamma),
        ("K", kernel_variation),
    ] {
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(CertificateError::InvalidConstant(format!("{name} = {v}")));
        }
    }
    if nodes == 0 {
        return Err(CertificateError::InvalidConstant("m = 0".into()));
    }
    let two = T::lit(2.0);
    let lmin = p.lambda_min();
    let pn = p.norm();
    let m = T::from_usize(nodes).unwrap();
    let eta = (two * delta + two * alpha * beta * pn * kernel_variation) / lmin
        + two * m * gamma * pn / lmin.sqrt();
    if !(eta > T::zero()) {
        return Err(CertificateError::NonPositiveEta(eta.as_f64()));
    }
    Ok(eta)
}

/// Every constant entering the growth bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProofConstants<T> {
    pub delta: T,
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub kernel_variation: T,
    pub lambda_min: T,
    pub norm_p: T,
    pub eta: T,
}

impl<T: Scalar> ProofConstants<T> {
    /// Derives all constants for `model` started at `x0`.
    pub fn derive(
        model: &NetworkModel<T>,
        cert: &QuadCertificate<T>,
        x0: &[T],
        horizon: T,
        grid: usize,
    ) -> Result<Self, CertificateError> {
        if cert.dim() != model.node_dim() {
            return Err(CertificateError::NodeDimension {
                cert: cert.dim(),
                node: model.node_dim(),
            });
        }
        let delta = delta_from_cert(cert);
        let c = estimate_envelope_constants(model, x0, horizon, grid);
        let k = model.total_kernel_variation();
        let eta = compute_eta(delta, &c, model.nodes(), cert.p(), k)?;
        Ok(Self {
            delta,
            alpha: c.alpha,
            beta: c.beta,
            gamma: c.gamma,
            kernel_variation: k,
            lambda_min: cert.p().lambda_min(),
            norm_p: cert.p().norm(),
            eta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{
        chua, hopfield, ChuaParams, CouplingSchedule, DelaySchedule, OutputFunction,
        QuadratureSettings,
    };
    use crate::kernels::{make_kernel, DelayKernel, KernelSpec};
    use proptest::prelude::*;
    use rand::Rng;

    fn scalar(sign: f64) -> NodeDynamics<f64> {
        NodeDynamics::new(1, move |_, u: &[f64], o: &mut [f64]| o[0] = sign * u[0])
    }

    fn unit(eps: f64) -> QuadCertificate<f64> {
        QuadCertificate::new(Matrix::identity(1), vec![0.0], eps).unwrap()
    }

    #[test]
    fn contraction_passes_equality_case() {
        let v = check_quad(
            &scalar(-1.0),
            &unit(1.0),
            &ProbeBox::cube(1, 10.0),
            (0.0, 1.0),
            10_000,
            7,
        )
        .unwrap();
        assert_eq!(v, QuadVerdict::Pass { probes: 10_000 });
    }

    #[test]
    fn expansion_is_refuted() {
        for eps in [1e-6, 0.5, 3.0] {
            let v = check_quad(
                &scalar(1.0),
                &unit(eps),
                &ProbeBox::cube(1, 10.0),
                (0.0, 1.0),
                1000,
                1,
            )
            .unwrap();
            match v {
                QuadVerdict::Counterexample {
                    index, lhs, rhs, ..
                } => {
                    assert_eq!(index, 0);
                    assert!(lhs > 0.0 && rhs < 0.0);
                }
                _ => panic!("f(u) = u must be refuted"),
            }
        }
    }

    #[test]
    fn lipschitz_rule_passes_on_tanh_and_chua() {
        let tanh = hopfield(vec![0.0], Matrix::identity(1), vec![0.0]).unwrap();
        assert_eq!(tanh.lipschitz_hint(), Some(1.0));
        let cert = QuadCertificate::lipschitz_rule(1, 1.0, 0.1).unwrap();
        assert!(
            check_quad(&tanh, &cert, &ProbeBox::cube(1, 5.0), (0.0, 1.0), 20_000, 3)
                .unwrap()
                .passed()
        );

        let f = chua(ChuaParams::double_scroll());
        let cert = QuadCertificate::lipschitz_rule(3, f.lipschitz_hint().unwrap(), 0.1).unwrap();
        assert!(
            check_quad(&f, &cert, &ProbeBox::cube(3, 5.0), (0.0, 1.0), 20_000, 3)
                .unwrap()
                .passed()
        );
        // Too small a Δ is caught.
        let weak = QuadCertificate::new(Matrix::identity(3), vec![0.0; 3], 0.1).unwrap();
        assert!(
            !check_quad(&f, &weak, &ProbeBox::cube(3, 5.0), (0.0, 1.0), 20_000, 3)
                .unwrap()
                .passed()
        );
    }

    #[test]
    fn invalid_certificates_rejected() {
        assert!(matches!(
            QuadCertificate::new(Matrix::from_diagonal(&[1.0, -1.0]), vec![0.0, 0.0], 1.0),
            Err(CertificateError::InvalidP(_))
        ));
        assert!(matches!(
            QuadCertificate::new(Matrix::identity(2), vec![0.0], 1.0),
            Err(CertificateError::DeltaDimension { .. })
        ));
        assert!(matches!(
            QuadCertificate::new(Matrix::identity(1), vec![0.0], 0.0),
            Err(CertificateError::NonPositiveEpsilon(_))
        ));
        let cert = unit(1.0);
        assert!(matches!(
            check_quad(
                &chua(ChuaParams::double_scroll()),
                &cert,
                &ProbeBox::cube(1, 1.0),
                (0.0, 1.0),
                1,
                0
            ),
            Err(CertificateError::NodeDimension { .. })
        ));
        assert!(check_quad(
            &scalar(-1.0),
            &cert,
            &ProbeBox {
                lower: vec![1.0],
                upper: vec![1.0]
            },
            (0.0, 1.0),
            1,
            0
        )
        .is_err());
    }

    #[test]
    fn delta_examples() {
        let c = QuadCertificate::new(Matrix::identity(2), vec![2.0, 2.0], 1.0).unwrap();
        assert_eq!(delta_from_cert(&c), 1.0);
        // sym(diag(2,1)·diag(1,3)) = diag(2,3) → 3 − 0.5.
        let c =
            QuadCertificate::new(Matrix::from_diagonal(&[2.0, 1.0]), vec![1.0, 3.0], 0.5).unwrap();
        assert_eq!(delta_from_cert(&c), 2.5);
        let c = QuadCertificate::new(Matrix::identity(1), vec![0.0], 1.0).unwrap();
        assert_eq!(delta_from_cert(&c), 1e-12);
    }

    #[test]
    fn delta_with_non_diagonal_p() {
        // P = [[2,1],[1,2]], Δ = diag(1,0): PΔ = [[2,0],[1,0]], sym = [[2,.5],[.5,0]],
        // λ_max = 1 + √(1.25).
        let c = QuadCertificate::new(
            Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
            vec![1.0, 0.0],
            0.25,
        )
        .unwrap();
        assert!((delta_from_cert(&c) - (1.0 + 1.25f64.sqrt() - 0.25)).abs() < 1e-14);
    }

    #[test]
    fn eta_examples() {
        let c = |alpha, beta, gamma| EnvelopeConstants { alpha, beta, gamma };
        let eye = SpdMatrix::identity(1);
        assert_eq!(
            compute_eta(1.0, &c(1.0, 1.0, 0.0), 2, &eye, 1.0).unwrap(),
            4.0
        );
        let two = SpdMatrix::new(Matrix::from_diagonal(&[2.0, 2.0])).unwrap();
        let eta = compute_eta(1.0, &c(1.0, 1.0, 1.0), 2, &two, 1.0).unwrap();
        // (2 + 2·1·1·2·1)/2 + (2·2·1·2)/√2 = 3 + 8/√2.
        let independent = 3.0 + 8.0 / 2.0f64.sqrt();
        assert!((eta - independent).abs() < 1e-14);
        let eta = compute_eta(1.5, &c(3.0, 2.0, 0.0), 4, &two, 0.0).unwrap();
        assert_eq!(eta, 1.5);
        assert!(matches!(
            compute_eta(-1.0, &c(0.0, 0.0, 0.0), 1, &eye, 0.0),
            Err(CertificateError::NonPositiveEta(_))
        ));
    }

    fn two_node_model(
        a: Matrix<f64>,
        gamma: Matrix<f64>,
        kernel: DelayKernel<f64>,
    ) -> NetworkModel<f64> {
        NetworkModel::with_uniform_kernel(
            crate::dynamics::linear(
                Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]]).unwrap(),
            )
            .unwrap(),
            OutputFunction::linear(gamma).unwrap(),
            CouplingSchedule::constant(a).unwrap(),
            DelaySchedule::zero(),
            kernel,
            QuadratureSettings::default(),
        )
        .unwrap()
    }

    #[test]
    fn envelope_constants_examples() {
        let gamma = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let a = Matrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let model = two_node_model(a, gamma, DelayKernel::dirac_zero());
        // x0 = 0 is an equilibrium.
        let c = estimate_envelope_constants(&model, &[0.0; 4], 5.0, 11);
        assert_eq!(c.alpha, 2.0);
        assert_eq!(c.beta, 1.0);
        assert_eq!(c.gamma, 0.0);
        // Node 1 at (1, 0), node 2 at 0: row 1 gives -x + (-1)·Γx = (-3, 0).
        let c = estimate_envelope_constants(&model, &[1.0, 0.0, 0.0, 0.0], 5.0, 11);
        assert!((c.gamma - 3.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_uses_signed_kernel_mass() {
        let signed = make_kernel(&KernelSpec::Mixture(vec![
            KernelSpec::Dirac {
                at: 0.0,
                weight: 1.0,
            },
            KernelSpec::Dirac {
                at: 1.0,
                weight: -0.5,
            },
        ]))
        .unwrap();
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let model = two_node_model(a, Matrix::identity(2), signed);
        // Node 1 at 0, node 2 at (2, 0): row 1 = 0 + 1·0.5·(2,0) = (1, 0);
        // row 2 = -(2,0) + 0 = (-2, 0). With |dK| it would be 3.
        let c = estimate_envelope_constants(&model, &[0.0, 0.0, 2.0, 0.0], 1.0, 2);
        assert!((c.gamma - 2.0).abs() < 1e-15);
        assert_eq!(model.total_kernel_variation(), 6.0);
    }

    #[test]
    fn proof_constants_assemble() {
        let a = Matrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let model = two_node_model(a, Matrix::identity(2), DelayKernel::dirac_zero());
        let cert = QuadCertificate::lipschitz_rule(2, 1.0, 0.1).unwrap();
        let pc = ProofConstants::derive(&model, &cert, &[0.0; 4], 1.0, 5).unwrap();
        assert!((pc.delta - 1.0).abs() < 1e-12);
        assert_eq!(pc.kernel_variation, 4.0);
        assert!((pc.eta - (2.0 * pc.delta + 2.0 * 4.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn eta_monotone_in_each_argument(
            delta in 1e-6..10.0f64, alpha in 0.0..5.0f64, beta in 0.0..5.0f64,
            gamma in 0.0..5.0f64, k in 0.0..10.0f64, m in 1usize..8, bump in 0.0..3.0f64,
        ) {
            let p = SpdMatrix::new(Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap()).unwrap();
            let c = EnvelopeConstants { alpha, beta, gamma };
            let base = compute_eta(delta, &c, m, &p, k).unwrap();
            let up = |v: f64| v + bump;
            prop_assert!(compute_eta(up(delta), &c, m, &p, k).unwrap() >= base);
            let bumped = EnvelopeConstants { alpha: up(alpha), ..c };
            prop_assert!(compute_eta(delta, &bumped, m, &p, k).unwrap() >= base);
            let bumped = EnvelopeConstants { beta: up(beta), ..c };
            prop_assert!(compute_eta(delta, &bumped, m, &p, k).unwrap() >= base);
            let bumped = EnvelopeConstants { gamma: up(gamma), ..c };
            prop_assert!(compute_eta(delta, &bumped, m, &p, k).unwrap() >= base);
            prop_assert!(compute_eta(delta, &c, m, &p, up(k)).unwrap() >= base);
            prop_assert!(compute_eta(delta, &c, m + 1, &p, k).unwrap() >= base);
        }

        #[test]
        fn delta_bounds_the_p_form_on_chua(seed in any::<u64>()) {
            let f = chua(ChuaParams::double_scroll());
            let cert = QuadCertificate::lipschitz_rule(3, f.lipschitz_hint().unwrap(), 0.1).unwrap();
            let delta = delta_from_cert(&cert);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let u1: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let u2: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
                let d: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
                let df: Vec<f64> = f.eval(0.0, &u1).iter().zip(f.eval(0.0, &u2)).map(|(a, b)| a - b).collect();
                let form = cert.p().matrix().bilinear(&d, &df);
                prop_assert!(form <= delta * dot(&d, &d) * (1.0 + 1e-12));
            }
        }

        #[test]
        fn verdict_invariant_under_p_scaling(seed in any::<u64>(), c in 0.1..10.0f64) {
            let f = hopfield(vec![1.0, 0.5], Matrix::from_rows(&[vec![1.5, -0.4], vec![0.3, 0.8]]).unwrap(), vec![0.0, 0.1]).unwrap();
            let cert = QuadCertificate::new(
                Matrix::from_rows(&[vec![1.0, 0.2], vec![0.2, 2.0]]).unwrap(), vec![1.0, 0.2], 0.05).unwrap();
            let scaled = cert.scaled(c).unwrap();
            let b = ProbeBox::cube(2, 3.0);
            let v1 = check_quad(&f, &cert, &b, (0.0, 1.0), 300, seed).unwrap();
            let v2 = check_quad(&f, &scaled, &b, (0.0, 1.0), 300, seed).unwrap();
            prop_assert_eq!(v1.passed(), v2.passed());
            if let (QuadVerdict::Counterexample { index: i1, .. }, QuadVerdict::Counterexample { index: i2, .. }) = (&v1, &v2) {
                prop_assert_eq!(i1, i2);
            }
        }

        #[test]
        fn replay_is_deterministic(seed in any::<u64>()) {
            let f = chua(ChuaParams::double_scroll());
            let cert = QuadCertificate::new(Matrix::identity(3), vec![5.0; 3], 0.1).unwrap();
            let b = ProbeBox::cube(3, 3.0);
            let a = check_quad(&f, &cert, &b, (0.0, 1.0), 500, seed).unwrap();
            let again = check_quad(&f, &cert, &b, (0.0, 1.0), 500, seed).unwrap();
            prop_assert_eq!(&a, &again);
            // The verdict never hides a violation among its own probes.
            if let QuadVerdict::Counterexample { index, t, u1, u2, lhs, rhs } = a {
                let (l2, r2) = cert.sides(&f, t, &u1, &u2);
                prop_assert_eq!((l2, r2), (lhs, rhs));
                prop_assert!(lhs > rhs);
                let earlier = check_quad(&f, &cert, &b, (0.0, 1.0), index, seed).unwrap();
                prop_assert!(earlier.passed());
            }
        }
    }
}
