//! Closed-form received-power scaling law for the single-user case.

use std::f64::consts::PI;

use crate::channel::rician_weights;
use crate::{Error, Result};

pub const EULER_GAMMA: f64 = 0.5772156649;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingLawInputs {
    pub p_d: f64,
    pub m: usize,
    pub n: usize,
    pub q_size: usize,
    pub beta_r: f64,
    pub beta_g: f64,
    pub f_r_db: f64,
    /// Per-entry channel-estimation error variance.
    pub sigma_q2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingLawBreakdown {
    pub los_term: f64,
    pub cross_term: f64,
    pub nlos_term: f64,
    pub total: f64,
    pub f1: f64,
    pub f2: f64,
    pub mu: f64,
    pub euler_c: f64,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive and finite, got {x}")))
    }
}

impl ScalingLawInputs {
    fn validate(&self) -> Result<()> {
        positive("p_d", self.p_d)?;
        positive("beta_r", self.beta_r)?;
        positive("beta_g", self.beta_g)?;
        if self.m == 0 || self.q_size == 0 {
            return Err(Error::Domain("m and q_size must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::Domain(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.sigma_q2 >= 0.0) || !self.sigma_q2.is_finite() {
            return Err(Error::Domain(format!("sigma_q2 must be non-negative, got {}", self.sigma_q2)));
        }
        if self.f_r_db.is_nan() {
            return Err(Error::Domain("f_r_db is NaN".into()));
        }
        Ok(())
    }
}

/// Degradation factor of the NLoS gain due to estimation error; 1 for perfect CSI.
pub fn mu_factor(n: usize, beta_r: f64, beta_g: f64, sigma_q2: f64) -> f64 {
    if sigma_q2 == 0.0 {
        return 1.0;
    }
    let n = n as f64;
    let bb = beta_r * beta_g;
    let num = n + PI / 2.0 * (n - 1.0) * (bb / ((n - 1.0) * bb + sigma_q2)).sqrt();
    let den = n + PI / 2.0 * (n - 1.0).sqrt();
    num / den
}

fn breakdown(inputs: &ScalingLawInputs, mu: f64, order_stat: f64) -> ScalingLawBreakdown {
    let (f1, f2) = rician_weights(inputs.f_r_db);
    let n = inputs.n as f64;
    let scale = inputs.p_d * inputs.m as f64 * inputs.beta_r * inputs.beta_g;
    let los_term = scale * n * n * f1 * f1;
    let cross_term = scale * n * f1 * f2 * PI.sqrt();
    let nlos_term = scale * n * f2 * f2 * mu * order_stat;
    ScalingLawBreakdown {
        los_term,
        cross_term,
        nlos_term,
        total: los_term + cross_term + nlos_term,
        f1,
        f2,
        mu,
        euler_c: EULER_GAMMA,
    }
}

/// Average received power of the selected codeword under imperfect CSI.
pub fn scaling_law(inputs: &ScalingLawInputs) -> Result<ScalingLawBreakdown> {
    inputs.validate()?;
    let mu = mu_factor(inputs.n, inputs.beta_r, inputs.beta_g, inputs.sigma_q2);
    Ok(breakdown(inputs, mu, (inputs.q_size as f64).ln() + EULER_GAMMA))
}

/// Same law with the asymptotic `ln Q + C` replaced by the exact harmonic number.
pub fn scaling_law_exact_order(inputs: &ScalingLawInputs) -> Result<ScalingLawBreakdown> {
    inputs.validate()?;
    let mu = mu_factor(inputs.n, inputs.beta_r, inputs.beta_g, inputs.sigma_q2);
    Ok(breakdown(inputs, mu, harmonic_number(inputs.q_size)))
}

pub fn perfect_csi_power(
    p_d: f64,
    m: usize,
    n: usize,
    q_size: usize,
    beta_r: f64,
    beta_g: f64,
    f_r_db: f64,
) -> Result<f64> {
    let inputs = ScalingLawInputs {
        p_d,
        m,
        n,
        q_size,
        beta_r,
        beta_g,
        f_r_db,
        sigma_q2: 0.0,
    };
    inputs.validate()?;
    Ok(breakdown(&inputs, 1.0, (q_size as f64).ln() + EULER_GAMMA).total)
}

pub fn harmonic_number(q: usize) -> f64 {
    (1..=q).map(|i| 1.0 / i as f64).sum()
}

/// `N H_Q`: expected maximum of `Q` i.i.d. exponentials with mean `N`.
pub fn exact_max_expectation(q_size: usize, n: usize) -> f64 {
    n as f64 * harmonic_number(q_size)
}

/// `sigma_z2 / (K P_ul)`.
pub fn estimation_error_variance(sigma_z2: f64, k: usize, p_ul: f64) -> Result<f64> {
    positive("p_ul", p_ul)?;
    if !(sigma_z2 >= 0.0) || !sigma_z2.is_finite() {
        return Err(Error::Domain(format!("sigma_z2 must be non-negative, got {sigma_z2}")));
    }
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    Ok(sigma_z2 / (k as f64 * p_ul))
}
