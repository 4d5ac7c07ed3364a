//! Online stage: per-codeword uplink training with orthogonal pilots, LS
//! estimation of the composite channel, ZF precoding from the estimate and
//! selection of the codeword with the highest predicted sum rate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{complex_gaussian, ChannelRealization};
use crate::codebook::{zf_waterfilled, Codebook, RcConfig};
use crate::linalg::{hermitian, hermitian_product, matmul, zf_pseudo_inverse, ComplexMatrix};
use crate::{Error, Result};

/// K x K pilot matrix with `X X^H = K I`; one pilot column per time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix(ComplexMatrix);

impl PilotMatrix {
    pub fn new(x: ComplexMatrix) -> Result<Self> {
        if x.rows() != x.cols() {
            return Err(Error::Shape(format!(
                "pilot matrix must use T = K slots, got {}x{}",
                x.rows(),
                x.cols()
            )));
        }
        let k = x.rows();
        let gram = matmul(&x, &hermitian(&x))?;
        let target = ComplexMatrix::identity(k).scale(Complex64::new(k as f64, 0.0));
        if gram.sub(&target)?.max_abs() > 1e-10 {
            return Err(Error::Domain("pilot rows are not orthogonal with unit-power symbols".into()));
        }
        Ok(Self(x))
    }

    pub fn users(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// DFT pilots: `X[k][t] = exp(-j 2 pi k t / K)`.
pub fn pilot_matrix(k: usize) -> PilotMatrix {
    assert!(k >= 1, "need at least one user");
    let x = ComplexMatrix::from_fn(k, k, |i, t| {
        let turns = (i * t) % k;
        if (4 * turns).is_multiple_of(k) {
            // exact values on the axes, so K = 2 gives +-1
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0)]
                [4 * turns / k]
        } else {
            Complex64::from_polar(1.0, -2.0 * PI * turns as f64 / k as f64)
        }
    });
    PilotMatrix(x)
}

/// `Y = sqrt(P_ul) H X + Z` with `Z` i.i.d. CN(0, sigma_z2).
pub fn simulate_uplink_block<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    x: &PilotMatrix,
    p_ul: f64,
    sigma_z2: f64,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if h.cols() != x.users() {
        return Err(Error::Shape(format!("{} users in H, {} pilots", h.cols(), x.users())));
    }
    if !(p_ul >= 0.0) || !(sigma_z2 >= 0.0) {
        return Err(Error::Domain("pilot and noise powers must be non-negative".into()));
    }
    let clean = matmul(h, x.matrix())?.scale(Complex64::new(p_ul.sqrt(), 0.0));
    let sd = sigma_z2.sqrt();
    let noise: Vec<Complex64> = (0..clean.rows() * clean.cols()).map(|_| complex_gaussian(rng) * sd).collect();
    clean.add(&ComplexMatrix::new(clean.rows(), clean.cols(), noise)?)
}

/// `H~ = Y X^H / (K sqrt(P_ul))`.
pub fn ls_estimate(y: &ComplexMatrix, x: &PilotMatrix, p_ul: f64) -> Result<ComplexMatrix> {
    if !(p_ul > 0.0) {
        return Err(Error::Domain(format!("pilot power must be positive, got {p_ul}")));
    }
    let k = x.users() as f64;
    Ok(matmul(y, &hermitian(x.matrix()))?.scale(Complex64::new(1.0 / (k * p_ul.sqrt()), 0.0)))
}

/// ZF precoder `W = H (H^H H)^-1 P^1/2` with water-filled powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoding {
    pub precoder: ComplexMatrix,
    /// Transmit power per user.
    pub power_allocation: Vec<f64>,
    /// Received power per user (as seen on the channel the precoder was built for).
    pub received_powers: Vec<f64>,
    pub predicted_sum_rate: f64,
}

pub fn precode_from_estimate(h_hat: &ComplexMatrix, p_d: f64, noise: &[f64]) -> Result<Precoding> {
    let eval = zf_waterfilled(h_hat, noise, p_d)?;
    let amplitudes: Vec<f64> = eval.received.iter().map(|p| p.sqrt()).collect();
    let precoder = zf_pseudo_inverse(h_hat)?.scale_columns(&amplitudes)?;
    Ok(Precoding {
        precoder,
        power_allocation: eval.allocation,
        received_powers: eval.received,
        predicted_sum_rate: eval.sum_rate,
    })
}

/// Per-user rates `log2(1 + SINR_k)` of precoder `w` on channels `h`, with
/// residual inter-user interference included.
pub fn sinr_rates(h: &ComplexMatrix, w: &ComplexMatrix, noise: &[f64]) -> Result<Vec<f64>> {
    let gains = hermitian_product(h, w)?; // (k, l) = h_k^H w_l
    if gains.rows() != gains.cols() || noise.len() != gains.rows() {
        return Err(Error::Shape("precoder, channel and noise disagree on K".into()));
    }
    Ok((0..gains.rows())
        .map(|k| {
            let signal = gains[(k, k)].norm_sqr();
            let interference: f64 = (0..gains.cols()).filter(|&l| l != k).map(|l| gains[(k, l)].norm_sqr()).sum();
            (1.0 + signal / (interference + noise[k])).log2()
        })
        .collect())
}

/// Outcome of training block `q`.
#[derive(Debug, Clone)]
pub struct CandidateEvaluation {
    pub q: usize,
    pub estimated_channels: ComplexMatrix,
    /// `None` when the estimate was too ill-conditioned for ZF.
    pub precoding: Option<Precoding>,
    /// `-inf` for a demoted (singular) candidate.
    pub predicted_sum_rate: f64,
    /// Frobenius norm of `H~_q - H_q`.
    pub estimation_error: f64,
}

/// Index of the best candidate; ties go to the earliest.
pub fn select_codeword(evaluations: &[CandidateEvaluation]) -> Result<usize> {
    let first = evaluations
        .first()
        .ok_or_else(|| Error::Domain("no candidates to select from".into()))?;
    let mut best = (0, first.predicted_sum_rate);
    for (i, e) in evaluations.iter().enumerate().skip(1) {
        if e.predicted_sum_rate > best.1 {
            best = (i, e.predicted_sum_rate);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineParams {
    pub p_ul: f64,
    pub p_d: f64,
    /// Uplink noise power at the BS; zero means perfect CSI.
    pub sigma_z2: f64,
    /// Downlink noise power per user.
    pub noise: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ProtocolResult {
    /// Zero-based index into the codebook.
    pub selected_index: usize,
    pub rc_applied: RcConfig,
    /// Sum rate of the selected precoder on the true channels.
    pub true_sum_rate: f64,
    /// Sum rate predicted from the estimates.
    pub predicted_sum_rate: f64,
    pub per_user_rates: Vec<f64>,
    /// `|h_k^H w_k|^2` on the true channels.
    pub received_powers: Vec<f64>,
    pub estimation_error_norm: Vec<f64>,
    pub candidate_rates: Vec<f64>,
}

pub fn run_online<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    cb: &Codebook,
    params: &OnlineParams,
    rng: &mut R,
) -> Result<ProtocolResult> {
    run_online_with_pilots(realization, cb, params, &pilot_matrix(realization.users()), rng)
}

pub fn run_online_with_pilots<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    cb: &Codebook,
    params: &OnlineParams,
    pilots: &PilotMatrix,
    rng: &mut R,
) -> Result<ProtocolResult> {
    if cb.meta.elements != realization.ris_elements() {
        return Err(Error::Shape(format!(
            "codebook has N = {}, channel has N = {}",
            cb.meta.elements,
            realization.ris_elements()
        )));
    }
    if cb.meta.users != 0 && cb.meta.users != realization.users() {
        return Err(Error::Shape(format!(
            "codebook has K = {}, channel has K = {}",
            cb.meta.users,
            realization.users()
        )));
    }
    if params.noise.len() != realization.users() || pilots.users() != realization.users() {
        return Err(Error::Shape("noise powers and pilots must match K".into()));
    }

    let mut true_channels = Vec::with_capacity(cb.len());
    let mut evaluations = Vec::with_capacity(cb.len());
    for (q, cw) in cb.codewords.iter().enumerate() {
        let h = realization.composite_matrix(&cw.rc)?;
        let y = simulate_uplink_block(&h, pilots, params.p_ul, params.sigma_z2, rng)?;
        let h_hat = ls_estimate(&y, pilots, params.p_ul)?;
        let estimation_error = h_hat.sub(&h)?.frobenius_norm();
        let precoding = match precode_from_estimate(&h_hat, params.p_d, &params.noise) {
            Ok(p) => Some(p),
            Err(Error::Singular { .. }) => None,
            Err(e) => return Err(e),
        };
        evaluations.push(CandidateEvaluation {
            q,
            estimated_channels: h_hat,
            predicted_sum_rate: precoding.as_ref().map_or(f64::NEG_INFINITY, |p| p.predicted_sum_rate),
            precoding,
            estimation_error,
        });
        true_channels.push(h);
    }

    let selected = select_codeword(&evaluations)?;
    let chosen = &evaluations[selected];
    let precoding = chosen
        .precoding
        .as_ref()
        .ok_or(Error::Singular { rcond: 0.0 })
        .map_err(|e| e.with_context("every training block produced a singular estimate"))?;
    let h_true = &true_channels[selected];
    let per_user_rates = sinr_rates(h_true, &precoding.precoder, &params.noise)?;
    let gains = hermitian_product(h_true, &precoding.precoder)?;
    let received_powers = (0..gains.rows()).map(|k| gains[(k, k)].norm_sqr()).collect();

    Ok(ProtocolResult {
        selected_index: selected,
        rc_applied: cb.codewords[selected].rc.clone(),
        true_sum_rate: per_user_rates.iter().sum(),
        predicted_sum_rate: chosen.predicted_sum_rate,
        per_user_rates,
        received_powers,
        estimation_error_norm: evaluations.iter().map(|e| e.estimation_error).collect(),
        candidate_rates: evaluations.iter().map(|e| e.predicted_sum_rate).collect(),
    })
}
