//! Material and splitting parameters.

use crate::error::{Error, Result};

/// Spatial dimension; the solver is two-dimensional only.
pub const DIM: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub c0: f64,
    /// Isotropic permeability over viscosity.
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    pub alpha_tilde: f64,
    pub c0_tilde: f64,
    /// Lower bound of κ⁻¹ (reporting only).
    pub alpha_w: f64,
}

impl PhysicalParams {
    /// Manufactured-benchmark scaling: κ = γ1/γ2, c0 = γ1, α = 1,
    /// μ = 0.6, λ = 0.6·γ2.
    pub fn from_gammas(gamma1: f64, gamma2: f64) -> PhysicalParams {
        PhysicalParams {
            mu: 0.6,
            lambda: 0.6 * gamma2,
            alpha: 1.0,
            c0: gamma1,
            kappa: gamma1 / gamma2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mu > 0.0
            && self.lambda >= 0.0
            && (0.0..=1.0).contains(&self.alpha)
            && self.c0 >= 0.0
            && self.kappa > 0.0
            && [self.mu, self.lambda, self.alpha, self.c0, self.kappa]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("physical parameters out of range: {self:?}")))
        }
    }

    /// `2μ + dλ`
    pub fn bulk_modulus_2d(&self) -> f64 {
        2.0 * self.mu + DIM * self.lambda
    }

    pub fn derive(&self) -> DerivedParams {
        let m = self.bulk_modulus_2d();
        DerivedParams {
            alpha_tilde: self.alpha / m,
            c0_tilde: self.c0 + DIM * self.alpha * self.alpha / m,
            alpha_w: 1.0 / self.kappa,
        }
    }

    /// τ = dα² / (c0 (2μ + dλ)), the ratio of the fixed-stress
    /// stabilization weight to the storage coefficient.
    pub fn coupling_strength(&self) -> Result<f64> {
        if self.alpha == 0.0 {
            return Ok(0.0);
        }
        if self.c0 == 0.0 {
            return Err(Error::InfiniteCoupling);
        }
        Ok(DIM * self.alpha * self.alpha / (self.c0 * self.bulk_modulus_2d()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BetaStrategy {
    Off,
    Tuned,
    OneD,
}

impl BetaStrategy {
    pub fn name(self) -> &'static str {
        match self {
            BetaStrategy::Off => "off",
            BetaStrategy::Tuned => "tuned",
            BetaStrategy::OneD => "1d",
        }
    }

    pub fn parse(s: &str) -> Result<BetaStrategy> {
        match s.to_ascii_lowercase().as_str() {
            "off" | "0" | "none" => Ok(BetaStrategy::Off),
            "tuned" | "opt" => Ok(BetaStrategy::Tuned),
            "1d" | "oned" | "1d-tuned" => Ok(BetaStrategy::OneD),
            _ => Err(Error::InvalidArgument(format!("unknown beta strategy '{s}'"))),
        }
    }
}

pub fn beta_value(strategy: BetaStrategy, p: &PhysicalParams) -> f64 {
    let a2 = p.alpha * p.alpha;
    match strategy {
        BetaStrategy::Off => 0.0,
        BetaStrategy::Tuned => 0.5 * DIM * a2 / p.bulk_modulus_2d(),
        BetaStrategy::OneD => {
            a2 * 2.0 * p.mu * (DIM - 1.0) / (p.bulk_modulus_2d() * (2.0 * p.mu + p.lambda))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitConfig {
    pub beta: f64,
    pub tol: f64,
    pub eps0: f64,
    pub max_iter: usize,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            beta: 0.0,
            tol: 1e-6,
            eps0: 1e-14,
            max_iter: 500,
        }
    }
}

impl SplitConfig {
    pub fn with_beta(beta: f64) -> SplitConfig {
        SplitConfig {
            beta,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.tol > 0.0 && self.eps0 >= 0.0 && self.max_iter >= 1) {
            return Err(Error::InvalidArgument(format!("invalid splitting configuration: {self:?}")));
        }
        Ok(())
    }
}
