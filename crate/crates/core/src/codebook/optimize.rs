//! Alternating optimization of ZF power allocation and discrete RIS phases
//! for one (virtual) channel realization.

use rand::Rng;

use super::waterfill::{received_powers_from_allocation, water_fill, zf_sum_rate};
use super::{Codeword, RcConfig};
use crate::channel::ChannelRealization;
use crate::linalg::{gram_inverse, ComplexMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoOptions {
    pub max_outer_iterations: usize,
    /// Stop once the relative sum-rate gain of an outer iteration falls below this.
    pub convergence_tol: f64,
    /// Element sweeps per refinement step; 0 disables phase refinement.
    pub sweep_passes_per_refinement: usize,
}

impl Default for AoOptions {
    fn default() -> Self {
        Self {
            max_outer_iterations: 20,
            convergence_tol: 1e-4,
            sweep_passes_per_refinement: 1,
        }
    }
}

impl AoOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iterations == 0 {
            return Err(Error::validation("max_outer_iterations", "must be at least 1"));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::validation("convergence_tol", "must be positive"));
        }
        Ok(())
    }
}

/// ZF + water-filling evaluation of one composite channel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfEvaluation {
    /// Diagonal of `(H^H H)^-1`.
    pub u_diag: Vec<f64>,
    /// Transmit power per user, sums to `P_d`.
    pub allocation: Vec<f64>,
    /// Received power per user.
    pub received: Vec<f64>,
    pub sum_rate: f64,
}

pub fn zf_waterfilled(h: &ComplexMatrix, noise: &[f64], p_d: f64) -> Result<ZfEvaluation> {
    if noise.len() != h.cols() {
        return Err(Error::Shape(format!("{} noise powers for {} users", noise.len(), h.cols())));
    }
    let u_diag: Vec<f64> = gram_inverse(h)?.diagonal().iter().map(|z| z.re).collect();
    let allocation = water_fill(&u_diag, noise, p_d).powers;
    let received = received_powers_from_allocation(&u_diag, &allocation);
    let sum_rate = zf_sum_rate(&received, noise);
    Ok(ZfEvaluation {
        u_diag,
        allocation,
        received,
        sum_rate,
    })
}

/// Water-filled ZF sum rate of the composite channel under `rc`.
pub fn sum_rate_given_phases(
    realization: &ChannelRealization,
    rc: &RcConfig,
    p_d: f64,
    noise: &[f64],
) -> Result<f64> {
    Ok(zf_waterfilled(&realization.composite_matrix(rc)?, noise, p_d)?.sum_rate)
}

/// What a refinement sweep maximizes for each candidate phase.
#[derive(Debug, Clone, Copy)]
pub enum RefineObjective<'a> {
    /// Sum rate with the power allocation re-optimized per candidate.
    Waterfilled,
    /// `sum log2(1 + pbar_k / (u_k s_k))` with the transmit powers held fixed.
    FixedAllocation(&'a [f64]),
}

/// Incrementally updatable composite channel matrix.
struct CompositeState<'a> {
    realization: &'a ChannelRealization,
    rc: RcConfig,
    /// M x K, column k is h_k.
    h: ComplexMatrix,
}

impl<'a> CompositeState<'a> {
    fn new(realization: &'a ChannelRealization, rc: RcConfig) -> Result<Self> {
        let h = realization.composite_matrix(&rc)?;
        Ok(Self { realization, rc, h })
    }

    /// Contribution of element n with coefficient 1: entry (m, k) = h_r[k][n] conj(G[n][m]).
    fn element_basis(&self, n: usize) -> ComplexMatrix {
        let r = self.realization;
        ComplexMatrix::from_fn(r.bs_antennas(), r.users(), |m, k| r.h_r[k][n] * r.g[(n, m)].conj())
    }

    /// Composite matrix with element n's reflected path removed.
    fn without_element(&self, n: usize, basis: &ComplexMatrix) -> ComplexMatrix {
        let phi = self.rc.coefficient_of(self.rc.indices()[n]).conj();
        self.h.sub(&basis.scale(phi)).expect("same shape")
    }
}

fn objective(h: &ComplexMatrix, noise: &[f64], p_d: f64, objective: RefineObjective<'_>) -> f64 {
    let u_diag: Vec<f64> = match gram_inverse(h) {
        Ok(u) => u.diagonal().iter().map(|z| z.re).collect(),
        Err(_) => return f64::NEG_INFINITY,
    };
    match objective {
        RefineObjective::Waterfilled => {
            let alloc = water_fill(&u_diag, noise, p_d).powers;
            zf_sum_rate(&received_powers_from_allocation(&u_diag, &alloc), noise)
        }
        RefineObjective::FixedAllocation(alloc) => {
            zf_sum_rate(&received_powers_from_allocation(&u_diag, alloc), noise)
        }
    }
}

/// Result of a successive-refinement run.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub rc: RcConfig,
    /// Objective value of `rc`.
    pub objective: f64,
    pub sweeps: usize,
    pub changed: bool,
}

/// Successive refinement: visit elements in ascending order and give each the
/// phase index maximizing the objective with all other elements fixed.
/// Among equal candidates the smaller index wins, and the incumbent is only
/// replaced by a strictly better one. Stops after `passes` sweeps or after a
/// sweep that changes nothing.
pub fn refine_with(
    realization: &ChannelRealization,
    rc_init: &RcConfig,
    p_d: f64,
    noise: &[f64],
    passes: usize,
    goal: RefineObjective<'_>,
) -> Result<Refinement> {
    if rc_init.len() != realization.ris_elements() {
        return Err(Error::Shape(format!(
            "configuration has {} elements, channel has {}",
            rc_init.len(),
            realization.ris_elements()
        )));
    }
    let mut state = CompositeState::new(realization, rc_init.clone())?;
    let initial = objective(&state.h, noise, p_d, goal);
    if initial == f64::NEG_INFINITY {
        return Err(Error::Singular { rcond: 0.0 });
    }
    let mut current = initial;
    let mut sweeps = 0;
    let mut changed_any = false;
    let levels = rc_init.levels();

    while sweeps < passes {
        sweeps += 1;
        let mut changed = false;
        for n in 0..realization.ris_elements() {
            let basis = state.element_basis(n);
            let base = state.without_element(n, &basis);
            let mut best = (f64::NEG_INFINITY, 0u32, base.clone());
            for idx in 0..levels {
                let phi = state.rc.coefficient_of(idx).conj();
                let candidate = base.add(&basis.scale(phi)).expect("same shape");
                let value = objective(&candidate, noise, p_d, goal);
                if value > best.0 {
                    best = (value, idx, candidate);
                }
            }
            // the incumbent only loses to a strictly better candidate
            let incumbent = state.rc.indices()[n];
            if best.1 != incumbent && best.0 > current {
                state.rc.set(n, best.1);
                state.h = best.2;
                current = best.0;
                changed = true;
            }
        }
        changed_any |= changed;
        // drop accumulated round-off before the next sweep
        state.h = realization.composite_matrix(&state.rc)?;
        current = objective(&state.h, noise, p_d, goal);
        if !changed {
            break;
        }
    }
    Ok(Refinement {
        rc: state.rc,
        objective: current,
        sweeps,
        changed: changed_any,
    })
}

/// Successive refinement of the water-filled ZF sum rate.
pub fn refine_phases(
    realization: &ChannelRealization,
    rc_init: &RcConfig,
    p_d: f64,
    noise: &[f64],
    opts: &AoOptions,
) -> Result<RcConfig> {
    Ok(refine_with(
        realization,
        rc_init,
        p_d,
        noise,
        opts.sweep_passes_per_refinement,
        RefineObjective::Waterfilled,
    )?
    .rc)
}

/// Full record of one alternating-optimization run.
#[derive(Debug, Clone)]
pub struct AoOutcome {
    pub codeword: Codeword,
    /// Objective after every sub-step: water-filling, refinement, water-filling, ...
    pub trace: Vec<f64>,
    pub outer_iterations: usize,
}

pub fn random_rc<R: Rng + ?Sized>(n: usize, bits: u32, rng: &mut R) -> Result<RcConfig> {
    let levels = 1u32.checked_shl(bits).unwrap_or(0);
    if levels == 0 {
        return Err(Error::validation("b", format!("unsupported phase bits {bits}")));
    }
    RcConfig::new((0..n).map(|_| rng.random_range(0..levels)).collect(), bits)
}

/// Alternate water-filling (phases fixed) and successive refinement of the
/// phases (transmit powers fixed), starting from a random configuration.
pub fn alternating_optimize_traced<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    p_d: f64,
    noise: &[f64],
    bits: u32,
    opts: &AoOptions,
    rng: &mut R,
) -> Result<AoOutcome> {
    opts.validate()?;
    let mut rc = random_rc(realization.ris_elements(), bits, rng)?;
    let mut eval = zf_waterfilled(&realization.composite_matrix(&rc)?, noise, p_d)?;
    let mut trace = vec![eval.sum_rate];
    let mut outer = 0;

    while outer < opts.max_outer_iterations && opts.sweep_passes_per_refinement > 0 {
        outer += 1;
        let refined = refine_with(
            realization,
            &rc,
            p_d,
            noise,
            opts.sweep_passes_per_refinement,
            RefineObjective::FixedAllocation(&eval.allocation),
        )?;
        trace.push(refined.objective);
        let next = zf_waterfilled(&realization.composite_matrix(&refined.rc)?, noise, p_d)?;
        trace.push(next.sum_rate);

        let gain = (next.sum_rate - eval.sum_rate) / eval.sum_rate.abs().max(f64::MIN_POSITIVE);
        rc = refined.rc;
        eval = next;
        if !refined.changed || gain < opts.convergence_tol {
            break;
        }
    }

    Ok(AoOutcome {
        codeword: Codeword {
            rc,
            power_allocation: Some(eval.allocation),
            predicted_rate: Some(eval.sum_rate),
        },
        trace,
        outer_iterations: outer,
    })
}

pub fn alternating_optimize<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    p_d: f64,
    noise: &[f64],
    bits: u32,
    opts: &AoOptions,
    rng: &mut R,
) -> Result<Codeword> {
    Ok(alternating_optimize_traced(realization, p_d, noise, bits, opts, rng)?.codeword)
}

/// Sum rate of every configuration, by brute force. Only sensible for small N.
pub fn exhaustive_best(
    realization: &ChannelRealization,
    bits: u32,
    p_d: f64,
    noise: &[f64],
) -> Result<(RcConfig, f64)> {
    let n = realization.ris_elements();
    let levels = 1u64 << bits;
    let total = levels
        .checked_pow(n as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::Domain(format!("{levels}^{n} configurations is too many to enumerate")))?;
    let mut best: Option<(RcConfig, f64)> = None;
    for code in 0..total {
        let mut c = code;
        let indices = (0..n)
            .map(|_| {
                let d = (c % levels) as u32;
                c /= levels;
                d
            })
            .collect();
        let rc = RcConfig::new(indices, bits)?;
        let rate = match sum_rate_given_phases(realization, &rc, p_d, noise) {
            Ok(r) => r,
            Err(Error::Singular { .. }) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(_, b)| rate > *b) {
            best = Some((rc, rate));
        }
    }
    best.ok_or(Error::Singular { rcond: 0.0 })
}

/// Largest single-element improvement available from `rc`, relative to its rate
/// (non-positive when `rc` is one-element locally optimal).
pub fn best_single_move_gain(
    realization: &ChannelRealization,
    rc: &RcConfig,
    p_d: f64,
    noise: &[f64],
) -> Result<f64> {
    let base = sum_rate_given_phases(realization, rc, p_d, noise)?;
    let mut best = f64::NEG_INFINITY;
    for n in 0..rc.len() {
        for idx in 0..rc.levels() {
            if idx == rc.indices()[n] {
                continue;
            }
            let mut moved = rc.clone();
            moved.set(n, idx);
            if let Ok(r) = sum_rate_given_phases(realization, &moved, p_d, noise) {
                best = best.max((r - base) / base.abs().max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok(best)
}
