//! Delay measures `dK(s)` on `[0, ∞)` and their quadrature plans.
//!
//! A kernel is a finite signed measure made of point masses (atoms) plus
//! absolutely continuous parts with an exponential or uniform profile. A Dirac
//! atom at `s = 0` gives undelayed coupling, an atom at `s = τ` a discrete
//! delay, and a density a distributed delay.
//!
//! [`build_quadrature`] turns a kernel into a finite list of nodes `(s_k, w_k)`
//! so that `∫ h(s) dK(s) ≈ Σ w_k h(s_k)`. Atoms are carried over exactly.
//! Densities are truncated at the smallest horizon whose tail mass is below
//! the requested tolerance and discretized with product-trapezoid weights:
//! `w_k = ∫ φ_k(s) dK(s)` where `φ_k` is the piecewise-linear hat centred at
//! `s_k`. These are the trapezoid rule applied against the measure; they are
//! second-order accurate and satisfy `Σ |w_k| ≤ |mass on [0, S]|` exactly.

use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("atom location must be nonnegative and finite, got {0}")]
    NegativeLocation(f64),
    #[error("exponential rate must be positive and finite, got {0}")]
    NonPositiveRate(f64),
    #[error("uniform density needs 0 <= a < b, got a = {a}, b = {b}")]
    InvalidUniform { a: f64, b: f64 },
    #[error("kernel weight must be finite, got {0}")]
    NonFiniteWeight(f64),
    #[error("mixture has no components")]
    EmptyMixture,
}

/// Description of a kernel before validation.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec<T> {
    /// Point mass of `weight` at delay `at`.
    Dirac {
        at: T,
        weight: T,
    },
    /// Density `weight · rate · e^{-rate s}`.
    Exponential {
        rate: T,
        weight: T,
    },
    /// Density `weight / (b - a)` on `[a, b]`.
    Uniform {
        a: T,
        b: T,
        weight: T,
    },
    Mixture(Vec<KernelSpec<T>>),
}

impl<T: Scalar> KernelSpec<T> {
    /// Unit Dirac at zero (undelayed coupling).
    pub fn unit_dirac() -> Self {
        KernelSpec::Dirac {
            at: T::zero(),
            weight: T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom<T> {
    pub location: T,
    pub weight: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityShape<T> {
    Exponential { rate: T },
    Uniform { a: T, b: T },
}

/// Absolutely continuous component; `weight` is its total (signed) mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density<T> {
    pub shape: DensityShape<T>,
    pub weight: T,
}

impl<T: Scalar> Density<T> {
    /// Absolute mass beyond `horizon`.
    fn tail_mass(&self, horizon: T) -> T {
        let w = self.weight.abs();
        match self.shape {
            DensityShape::Exponential { rate } => w * (-rate * horizon.max(T::zero())).exp(),
            DensityShape::Uniform { a, b } => {
                if horizon >= b {
                    T::zero()
                } else if horizon <= a {
                    w
                } else {
                    w * (b - horizon) / (b - a)
                }
            }
        }
    }

    /// Smallest horizon whose absolute tail mass is at most `tol`.
    fn truncation_horizon(&self, tol: T) -> T {
        let w = self.weight.abs();
        match self.shape {
            DensityShape::Exponential { rate } => {
                if w <= tol {
                    T::zero()
                } else {
                    (w / tol).ln() / rate
                }
            }
            // Compact support: never truncated.
            DensityShape::Uniform { b, .. } => b,
        }
    }

    /// Signed mass in `[lo, hi]` weighted by the hats at both ends:
    /// returns `(∫ (hi - s)/h dK, ∫ (s - lo)/h dK)`.
    fn hat_masses(&self, lo: T, hi: T) -> (T, T) {
        let h = hi - lo;
        match self.shape {
            DensityShape::Exponential { rate } => {
                // With u = s - lo and x = rate·h:
                //   I0 = ∫_0^h rate e^{-rate u} du = 1 - e^{-x}
                //   I1/h = (1/h) ∫_0^h u rate e^{-rate u} du = I0/x - e^{-x}
                let scale = self.weight * (-rate * lo).exp();
                let x = rate * h;
                let i0 = -(-x).exp_m1();
                let i1_over_h = i0 / x - (-x).exp();
                (scale * (i0 - i1_over_h), scale * i1_over_h)
            }
            DensityShape::Uniform { a, b } => {
                let lo_c = lo.max(a);
                let hi_c = hi.min(b);
                if hi_c <= lo_c {
                    return (T::zero(), T::zero());
                }
                let rho = self.weight / (b - a);
                let half = T::lit(0.5);
                // ∫_{lo_c}^{hi_c} (hi - s)/h ds and ∫ (s - lo)/h ds.
                let left = rho * ((hi - lo_c).powi(2) - (hi - hi_c).powi(2)) * half / h;
                let right = rho * ((hi_c - lo).powi(2) - (lo_c - lo).powi(2)) * half / h;
                (left, right)
            }
        }
    }

    fn support_start(&self) -> T {
        match self.shape {
            DensityShape::Exponential { .. } => T::zero(),
            DensityShape::Uniform { a, .. } => a,
        }
    }
}

/// Validated finite signed measure on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayKernel<T> {
    atoms: Vec<Atom<T>>,
    densities: Vec<Density<T>>,
}

impl<T: Scalar> DelayKernel<T> {
    /// Unit Dirac at zero.
    pub fn dirac_zero() -> Self {
        Self {
            atoms: vec![Atom {
                location: T::zero(),
                weight: T::one(),
            }],
            densities: Vec::new(),
        }
    }

    pub fn atoms(&self) -> &[Atom<T>] {
        &self.atoms
    }

    pub fn densities(&self) -> &[Density<T>] {
        &self.densities
    }

    /// `∫ |dK|`.
    pub fn total_variation(&self) -> T {
        total_variation(self)
    }

    /// Signed total mass `∫ dK`.
    pub fn mass(&self) -> T {
        self.atoms.iter().map(|a| a.weight).sum::<T>()
            + self.densities.iter().map(|d| d.weight).sum::<T>()
    }
}

fn check_weight<T: Scalar>(w: T) -> Result<(), KernelError> {
    if w.is_finite() {
        Ok(())
    } else {
        Err(KernelError::NonFiniteWeight(w.as_f64()))
    }
}

fn push_spec<T: Scalar>(spec: &KernelSpec<T>, out: &mut DelayKernel<T>) -> Result<(), KernelError> {
    match *spec {
        KernelSpec::Dirac { at, weight } => {
            check_weight(weight)?;
            if !(at >= T::zero()) || !at.is_finite() {
                return Err(KernelError::NegativeLocation(at.as_f64()));
            }
            out.atoms.push(Atom {
                location: at,
                weight,
            });
        }
        KernelSpec::Exponential { rate, weight } => {
            check_weight(weight)?;
            if !(rate > T::zero()) || !rate.is_finite() {
                return Err(KernelError::NonPositiveRate(rate.as_f64()));
            }
            out.densities.push(Density {
                shape: DensityShape::Exponential { rate },
                weight,
            });
        }
        KernelSpec::Uniform { a, b, weight } => {
            check_weight(weight)?;
            if !(a >= T::zero() && a < b && b.is_finite()) {
                return Err(KernelError::InvalidUniform {
                    a: a.as_f64(),
                    b: b.as_f64(),
                });
            }
            out.densities.push(Density {
                shape: DensityShape::Uniform { a, b },
                weight,
            });
        }
        KernelSpec::Mixture(ref parts) => {
            if parts.is_empty() {
                return Err(KernelError::EmptyMixture);
            }
            for p in parts {
                push_spec(p, out)?;
            }
        }
    }
    Ok(())
}

/// Validates a kernel description.
pub fn make_kernel<T: Scalar>(spec: &KernelSpec<T>) -> Result<DelayKernel<T>, KernelError> {
    let mut k = DelayKernel {
        atoms: Vec::new(),
        densities: Vec::new(),
    };
    push_spec(spec, &mut k)?;
    Ok(k)
}

/// Exact `∫_0^∞ |dK(s)|` for the supported kernel forms.
///
/// Components are assumed not to cancel each other, so this is the sum of the
/// absolute component weights (an upper bound on the true variation of a
/// mixture with opposite-signed overlapping parts).
pub fn total_variation<T: Scalar>(kernel: &DelayKernel<T>) -> T {
    kernel.atoms.iter().map(|a| a.weight.abs()).sum::<T>()
        + kernel.densities.iter().map(|d| d.weight.abs()).sum::<T>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureNode<T> {
    pub s: T,
    pub weight: T,
}

/// Discretization of a kernel: `∫ h dK ≈ Σ w_k h(s_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraturePlan<T> {
    nodes: Vec<QuadratureNode<T>>,
    truncation_horizon: T,
    tail_mass_bound: T,
}

impl<T: Scalar> QuadraturePlan<T> {
    pub fn nodes(&self) -> &[QuadratureNode<T>] {
        &self.nodes
    }

    /// Largest node location.
    pub fn truncation_horizon(&self) -> T {
        self.truncation_horizon
    }

    /// Absolute kernel mass discarded by truncation.
    pub fn tail_mass_bound(&self) -> T {
        self.tail_mass_bound
    }

    pub fn abs_weight_sum(&self) -> T {
        self.nodes.iter().map(|n| n.weight.abs()).sum()
    }

    /// `Σ w_k h(s_k)`.
    pub fn apply<F: FnMut(T) -> T>(&self, mut h: F) -> T {
        self.nodes.iter().map(|n| n.weight * h(n.s)).sum()
    }
}

/// Builds a quadrature plan for `kernel`.
///
/// The tolerance is split evenly across density components so that the plan's
/// total tail bound never exceeds `tail_tol`. Each density is discretized on
/// its own uniform grid whose spacing is at most `node_spacing`.
pub fn build_quadrature<T: Scalar>(
    kernel: &DelayKernel<T>,
    tail_tol: T,
    node_spacing: T,
) -> QuadraturePlan<T> {
    assert!(tail_tol > T::zero(), "tail_tol must be positive");
    assert!(node_spacing > T::zero(), "node_spacing must be positive");

    let mut nodes: Vec<QuadratureNode<T>> = kernel
        .atoms
        .iter()
        .map(|a| QuadratureNode {
            s: a.location,
            weight: a.weight,
        })
        .collect();
    let mut tail = T::zero();
    let mut horizon = nodes.iter().fold(T::zero(), |acc, n| acc.max(n.s));

    let per_density_tol = tail_tol / T::from_usize(kernel.densities.len().max(1)).unwrap();
    for d in &kernel.densities {
        let start = d.support_start();
        let end = d.truncation_horizon(per_density_tol).max(start);
        tail += d.tail_mass(end);
        if end <= start {
            continue;
        }
        let span = end - start;
        let intervals = (span / node_spacing).ceil().to_usize().unwrap_or(1).max(1);
        let step = span / T::from_usize(intervals).unwrap();
        let mut weights = vec![T::zero(); intervals + 1];
        for k in 0..intervals {
            let lo = start + T::from_usize(k).unwrap() * step;
            let hi = if k + 1 == intervals {
                end
            } else {
                start + T::from_usize(k + 1).unwrap() * step
            };
            let (l, r) = d.hat_masses(lo, hi);
            weights[k] += l;
            weights[k + 1] += r;
        }
        for (k, w) in weights.into_iter().enumerate() {
            let s = if k == intervals {
                end
            } else {
                start + T::from_usize(k).unwrap() * step
            };
            nodes.push(QuadratureNode { s, weight: w });
        }
        horizon = horizon.max(end);
    }

    QuadraturePlan {
        nodes,
        truncation_horizon: horizon,
        tail_mass_bound: tail,
    }
}
