//! Strain-limiting constitutive algebra in two dimensions.
//!
//! The stress-strain relation amplifies the linear elastic stress by
//! `1 / (1 - (beta r)^a)^(1/a)` where `r` is the energy norm of the strain,
//! so strains stay below `1/beta` no matter how large the stress grows.
//! Everything here is a pure function on plane (d = 2) symmetric tensors.

use crate::error::FemError;
use std::ops::{Add, Mul, Neg, Sub};

/// 2x2 symmetric tensor stored as its three independent components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 {
        xx: 0.0,
        yy: 0.0,
        xy: 0.0,
    };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        SymTensor2 { xx, yy, xy }
    }

    pub fn identity() -> Self {
        SymTensor2::new(1.0, 1.0, 0.0)
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Double contraction A : B (the off-diagonal counts twice).
    pub fn ddot(&self, other: &SymTensor2) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx + rhs.xx, self.yy + rhs.yy, self.xy + rhs.xy)
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, rhs: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.xx - rhs.xx, self.yy - rhs.yy, self.xy - rhs.xy)
    }
}

impl Mul<f64> for SymTensor2 {
    type Output = SymTensor2;
    fn mul(self, s: f64) -> SymTensor2 {
        SymTensor2::new(self.xx * s, self.yy * s, self.xy * s)
    }
}

impl Neg for SymTensor2 {
    type Output = SymTensor2;
    fn neg(self) -> SymTensor2 {
        self * -1.0
    }
}

/// Material constants. `alpha` is always derived from `alpha_t`, never stored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    /// First Lame parameter (Pa).
    pub lambda: f64,
    /// Second Lame parameter / shear modulus (Pa).
    pub mu: f64,
    /// Strain-limiting exponent.
    pub a: f64,
    /// Strain-limiting scale; 0 recovers linear elasticity.
    pub beta: f64,
    /// Heat conduction coefficient.
    pub k: f64,
    /// Heat source density.
    pub g: f64,
    /// Linear thermal expansion coefficient.
    pub alpha_t: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            lambda: 1.0,
            mu: 1.0,
            a: 0.5,
            beta: 0.02,
            k: 20.0,
            g: -10.0,
            alpha_t: 0.1,
        }
    }
}

impl MaterialParams {
    /// Thermal stress coefficient alpha = alpha_T (3 lambda + 2 mu).
    pub fn alpha(&self) -> f64 {
        self.alpha_t * (3.0 * self.lambda + 2.0 * self.mu)
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        MaterialParams { beta, ..*self }
    }

    pub fn validate(&self) -> Result<(), FemError> {
        if !(self.mu > 0.0) {
            return Err(FemError::InvalidParams(format!("mu = {} must be > 0", self.mu)));
        }
        if !(self.lambda + self.mu > 0.0) {
            return Err(FemError::InvalidParams(format!(
                "lambda + mu = {} must be > 0 (degenerate compliance)",
                self.lambda + self.mu
            )));
        }
        if !(self.a > 0.0) {
            return Err(FemError::InvalidParams(format!("a = {} must be > 0", self.a)));
        }
        if !(self.beta >= 0.0) {
            return Err(FemError::InvalidParams(format!(
                "beta = {} must be >= 0",
                self.beta
            )));
        }
        if !(self.k > 0.0) {
            return Err(FemError::InvalidParams(format!("k = {} must be > 0", self.k)));
        }
        Ok(())
    }
}

/// Linearized elasticity tensor: E[eps] = 2 mu eps + lambda tr(eps) I.
pub fn elasticity_apply(eps: SymTensor2, p: &MaterialParams) -> SymTensor2 {
    let t = p.lambda * eps.trace();
    SymTensor2::new(
        2.0 * p.mu * eps.xx + t,
        2.0 * p.mu * eps.yy + t,
        2.0 * p.mu * eps.xy,
    )
}

/// Linearized compliance tensor, the inverse of `elasticity_apply` (d = 2):
/// K[T] = T / (2 mu) - lambda tr(T) I / (2 mu (d lambda + 2 mu)).
pub fn compliance_apply(t: SymTensor2, p: &MaterialParams) -> SymTensor2 {
    let d = 2.0;
    let c = p.lambda * t.trace() / (2.0 * p.mu * (d * p.lambda + 2.0 * p.mu));
    SymTensor2::new(
        t.xx / (2.0 * p.mu) - c,
        t.yy / (2.0 * p.mu) - c,
        t.xy / (2.0 * p.mu),
    )
}

/// Energy norm |E^{1/2}[eps]| = sqrt(eps : E[eps])
///             = sqrt(2 mu eps:eps + lambda tr(eps)^2).
///
/// The radicand is non-negative whenever mu > 0 and lambda + mu > 0; tiny
/// negative round-off is clamped.
pub fn energy_norm(eps: SymTensor2, p: &MaterialParams) -> f64 {
    let tr = eps.trace();
    let radicand = 2.0 * p.mu * eps.ddot(&eps) + p.lambda * tr * tr;
    radicand.max(0.0).sqrt()
}

/// Stress amplification Psi(r) = (1 - (beta r)^a)^(-1/a), defined for
/// beta r < 1.
pub fn psi(r: f64, p: &MaterialParams) -> Result<f64, FemError> {
    if p.beta == 0.0 {
        return Ok(1.0);
    }
    let br = p.beta * r;
    if br >= 1.0 {
        return Err(FemError::StrainLimitViolation {
            energy_norm: r,
            limit: 1.0 / p.beta,
        });
    }
    Ok((1.0 - br.powf(p.a)).powf(-1.0 / p.a))
}

/// Mechanical stress L(eps) = Psi(|E^{1/2}[eps]|) E[eps].
pub fn stress_from_strain(eps: SymTensor2, p: &MaterialParams) -> Result<SymTensor2, FemError> {
    let n = energy_norm(eps, p);
    Ok(elasticity_apply(eps, p) * psi(n, p)?)
}

/// Inverse map: strain from stress,
/// F(T) = K[T] / (1 + beta^a |K^{1/2}[T]|^a)^(1/a).
///
/// Defined for every T; the energy norm of the result stays below 1/beta.
pub fn strain_from_stress(t: SymTensor2, p: &MaterialParams) -> SymTensor2 {
    let kt = compliance_apply(t, p);
    if p.beta == 0.0 {
        return kt;
    }
    // |K^{1/2}[T]| = sqrt(T : K[T])
    let nk = t.ddot(&kt).max(0.0).sqrt();
    let denom = (1.0 + (p.beta * nk).powf(p.a)).powf(1.0 / p.a);
    kt * (1.0 / denom)
}

/// Newton tangent of the stress map, precomputed at a fixed strain state.
///
/// `apply` evaluates
/// D L(eps_n)[d] = Psi(N) E[d] + c (E[eps_n] : d) E[eps_n]
/// with N the energy norm of eps_n and
/// c = beta^a N^(a-2) / (1 - (beta N)^a)^(1 + 1/a).
///
/// The second term vanishes like N^a as N -> 0 and is dropped below
/// N = 1e-14 (removable singularity of N^(a-2) for a < 2).
pub struct Tangent {
    pub psi: f64,
    pub second_coef: f64,
    pub e_n: SymTensor2,
}

impl Tangent {
    pub fn at(eps_n: SymTensor2, p: &MaterialParams) -> Result<Tangent, FemError> {
        let n = energy_norm(eps_n, p);
        let psi = psi(n, p)?;
        let second_coef = if p.beta == 0.0 || n < 1e-14 {
            0.0
        } else {
            let g = (p.beta * n).powf(p.a);
            p.beta.powf(p.a) * n.powf(p.a - 2.0) / (1.0 - g).powf(1.0 + 1.0 / p.a)
        };
        Ok(Tangent {
            psi,
            second_coef,
            e_n: elasticity_apply(eps_n, p),
        })
    }

    pub fn apply(&self, eps_delta: SymTensor2, p: &MaterialParams) -> SymTensor2 {
        elasticity_apply(eps_delta, p) * self.psi
            + self.e_n * (self.second_coef * self.e_n.ddot(&eps_delta))
    }
}

/// Directional derivative of `stress_from_strain` at `eps_n` applied to
/// `eps_delta`.
pub fn tangent_apply(
    eps_n: SymTensor2,
    eps_delta: SymTensor2,
    p: &MaterialParams,
) -> Result<SymTensor2, FemError> {
    Ok(Tangent::at(eps_n, p)?.apply(eps_delta, p))
}
