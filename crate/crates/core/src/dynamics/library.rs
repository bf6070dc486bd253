//! Built-in node laws. All are globally Lipschitz and carry their constant.

use super::{ModelError, NodeDynamics};
use crate::linalg::Matrix;
use crate::Scalar;

/// `f(u) = B u`.
pub fn linear<T: Scalar>(b: Matrix<T>) -> Result<NodeDynamics<T>, ModelError> {
    if !b.is_square() {
        return Err(ModelError::Dimension {
            what: "linear node matrix",
            expected: b.rows(),
            got: b.cols(),
        });
    }
    let l = b.spectral_norm();
    let n = b.rows();
    Ok(
        NodeDynamics::new(n, move |_, u, out| b.mul_vec_into(u, out))
            .with_lipschitz(l)
            .with_label("linear"),
    )
}

/// Chua's circuit with the piecewise-linear diode
///
/// ```text
/// ẋ = α (y − x − h(x)),  ẏ = x − y + z,  ż = −β y − γ z,
/// h(x) = m1 x + ½ (m0 − m1)(|x + 1| − |x − 1|)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChuaParams<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub m0: T,
    pub m1: T,
}

impl<T: Scalar> ChuaParams<T> {
    /// The classic double-scroll regime.
    pub fn double_scroll() -> Self {
        Self {
            alpha: T::lit(15.6),
            beta: T::lit(28.0),
            gamma: T::zero(),
            m0: T::lit(-8.0 / 7.0),
            m1: T::lit(-5.0 / 7.0),
        }
    }

    fn jacobian(&self, slope: T) -> Matrix<T> {
        let (o, z) = (T::one(), T::zero());
        Matrix::from_rows(&[
            vec![-self.alpha * (o + slope), self.alpha, z],
            vec![o, -o, o],
            vec![z, -self.beta, -self.gamma],
        ])
        .expect("3x3 literal")
    }

    /// Global Lipschitz constant: the vector field is continuous and
    /// piecewise linear, so it is the largest spectral norm among the
    /// per-region Jacobians.
    pub fn lipschitz(&self) -> T {
        self.jacobian(self.m0)
            .spectral_norm()
            .max(self.jacobian(self.m1).spectral_norm())
    }
}

pub fn chua<T: Scalar>(p: ChuaParams<T>) -> NodeDynamics<T> {
    let half = T::lit(0.5);
    let l = p.lipschitz();
    NodeDynamics::new(3, move |_, u, out| {
        let (x, y, z) = (u[0], u[1], u[2]);
        let h = p.m1 * x + half * (p.m0 - p.m1) * ((x + T::one()).abs() - (x - T::one()).abs());
        out[0] = p.alpha * (y - x - h);
        out[1] = x - y + z;
        out[2] = -p.beta * y - p.gamma * z;
    })
    .with_lipschitz(l)
    .with_label("chua")
}

/// Hopfield-type node `f(u) = −D u + W tanh(u) + b` with diagonal `D`.
pub fn hopfield<T: Scalar>(
    decay: Vec<T>,
    weights: Matrix<T>,
    bias: Vec<T>,
) -> Result<NodeDynamics<T>, ModelError> {
    let n = decay.len();
    weights.expect_shape(n, n)?;
    if bias.len() != n {
        return Err(ModelError::Dimension {
            what: "hopfield bias",
            expected: n,
            got: bias.len(),
        });
    }
    // |tanh'| ≤ 1, so L ≤ max|d_i| + ‖W‖₂.
    let l = decay.iter().fold(T::zero(), |acc, d| acc.max(d.abs())) + weights.spectral_norm();
    Ok(NodeDynamics::new(n, move |_, u: &[T], out: &mut [T]| {
        let act: Vec<T> = u.iter().map(|v| v.tanh()).collect();
        weights.mul_vec_into(&act, out);
        for ((o, &d), (&v, &b)) in out.iter_mut().zip(&decay).zip(u.iter().zip(&bias)) {
            *o += b - d * v;
        }
    })
    .with_lipschitz(l)
    .with_label("hopfield"))
}
