//! Offline stage: environment-aware codebook synthesis from statistical CSI.
//!
//! Each codeword is obtained by drawing a virtual channel (the known LoS
//! components plus fresh NLoS fading) and running alternating optimization of
//! the ZF power allocation and the discrete RIS phases on it.

mod format;
mod optimize;
mod rc;
mod waterfill;

use rand::Rng;
use rayon::prelude::*;

pub use format::{deserialize_codebook, serialize_codebook};
pub use optimize::{
    alternating_optimize, alternating_optimize_traced, best_single_move_gain, exhaustive_best, random_rc,
    refine_phases, refine_with, sum_rate_given_phases, zf_waterfilled, AoOptions, AoOutcome, RefineObjective,
    Refinement, ZfEvaluation,
};
pub use rc::{RcConfig, MAX_BITS};
pub use waterfill::{received_powers_from_allocation, water_fill, waterfill, zf_sum_rate, WaterFilling};

use crate::channel::{sample_channel_realization, ChannelRealization, StatisticalCsi};
use crate::rng::{label, stream};
use crate::{Error, Result};

/// Virtual channels that come out rank-deficient are redrawn at most this often.
pub const MAX_VIRTUAL_REDRAWS: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword {
    pub rc: RcConfig,
    /// Offline transmit powers per user (watts), `None` for baseline codewords.
    pub power_allocation: Option<Vec<f64>>,
    /// Sum rate on the virtual channel the codeword was optimized for.
    pub predicted_rate: Option<f64>,
}

/// Header information carried with a codebook. Random baselines are not tied
/// to any CSI and store `users = 0`, `p_d_watts = 0` and fingerprint `0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookMeta {
    pub seed: u64,
    pub bits: u32,
    pub elements: usize,
    pub users: usize,
    pub p_d_watts: f64,
    pub csi_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub codewords: Vec<Codeword>,
    pub meta: CodebookMeta,
}

impl Codebook {
    pub fn new(codewords: Vec<Codeword>, meta: CodebookMeta) -> Result<Self> {
        if codewords.is_empty() {
            return Err(Error::validation("Q", "codebook needs at least one codeword"));
        }
        for (q, cw) in codewords.iter().enumerate() {
            if cw.rc.len() != meta.elements || cw.rc.bits() != meta.bits {
                return Err(Error::validation(
                    "codewords",
                    format!("codeword {q} does not match N = {}, b = {}", meta.elements, meta.bits),
                ));
            }
            if let Some(p) = &cw.power_allocation {
                if p.len() != meta.users {
                    return Err(Error::validation(
                        "codewords",
                        format!("codeword {q} has {} powers for K = {}", p.len(), meta.users),
                    ));
                }
            }
        }
        Ok(Self { codewords, meta })
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// First `q` codewords.
    pub fn prefix(&self, q: usize) -> Result<Codebook> {
        if q == 0 || q > self.len() {
            return Err(Error::validation("Q", format!("prefix {q} of a {}-word codebook", self.len())));
        }
        Ok(Codebook {
            codewords: self.codewords[..q].to_vec(),
            meta: self.meta.clone(),
        })
    }

    /// Checks that the codebook was built from `csi`. Random baselines always pass.
    pub fn verify_fingerprint(&self, csi: &StatisticalCsi) -> Result<()> {
        let found = csi.fingerprint();
        if self.meta.csi_fingerprint == "0" || self.meta.csi_fingerprint == found {
            Ok(())
        } else {
            Err(Error::FingerprintMismatch {
                expected: self.meta.csi_fingerprint.clone(),
                found,
            })
        }
    }
}

/// One virtual channel: the statistical LoS with freshly drawn NLoS parts.
pub fn generate_virtual_channels<R: Rng + ?Sized>(csi: &StatisticalCsi, rng: &mut R) -> ChannelRealization {
    sample_channel_realization(csi, rng)
}

fn optimize_codeword(
    csi: &StatisticalCsi,
    q: usize,
    p_d: f64,
    noise: &[f64],
    bits: u32,
    opts: &AoOptions,
    seed: u64,
) -> Result<Codeword> {
    let mut last = None;
    for attempt in 0..=MAX_VIRTUAL_REDRAWS {
        let virt = generate_virtual_channels(csi, &mut stream(seed, &[label::VIRTUAL, q as u64, attempt]));
        let mut init = stream(seed, &[label::INIT, q as u64, attempt]);
        match alternating_optimize(&virt, p_d, noise, bits, opts, &mut init) {
            Err(e @ Error::Singular { .. }) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("at least one attempt").with_context(format!("virtual channel {q}")))
}

/// Builds `q_size` codewords, each from its own virtual channel. Codeword `q`
/// depends only on `(seed, q)`, so a smaller codebook built with the same seed
/// is a prefix of a larger one.
pub fn build_codebook(
    csi: &StatisticalCsi,
    q_size: usize,
    p_d: f64,
    noise: &[f64],
    bits: u32,
    opts: &AoOptions,
    seed: u64,
) -> Result<Codebook> {
    if q_size == 0 {
        return Err(Error::validation("Q", "codebook size must be at least 1"));
    }
    if noise.len() != csi.users() {
        return Err(Error::Shape(format!("{} noise powers for {} users", noise.len(), csi.users())));
    }
    opts.validate()?;
    let codewords = (0..q_size)
        .into_par_iter()
        .map(|q| optimize_codeword(csi, q, p_d, noise, bits, opts, seed))
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(
        codewords,
        CodebookMeta {
            seed,
            bits,
            elements: csi.ris_elements(),
            users: csi.users(),
            p_d_watts: p_d,
            csi_fingerprint: csi.fingerprint(),
        },
    )
}

/// Baseline codebook of i.i.d. uniformly random phase indices.
pub fn random_codebook(n: usize, bits: u32, q_size: usize, seed: u64) -> Result<Codebook> {
    if q_size == 0 {
        return Err(Error::validation("Q", "codebook size must be at least 1"));
    }
    let mut rng = stream(seed, &[label::RANDOM_CODEBOOK]);
    let codewords = (0..q_size)
        .map(|_| {
            Ok(Codeword {
                rc: random_rc(n, bits, &mut rng)?,
                power_allocation: None,
                predicted_rate: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(
        codewords,
        CodebookMeta {
            seed,
            bits,
            elements: n,
            users: 0,
            p_d_watts: 0.0,
            csi_fingerprint: "0".into(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_statistical_csi, ChannelParams, Point3, SystemGeometry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_geometry(rows: usize, cols: usize, users: usize) -> SystemGeometry {
        let mut g = SystemGeometry::paper_default();
        g.ris_rows = rows;
        g.ris_cols = cols;
        g.user_positions = [Point3::new(2.0, 100.0, 0.0), Point3::new(-2.0, 100.0, 0.0), Point3::new(0.0, 97.0, 1.0)]
            [..users]
            .to_vec();
        g
    }

    fn csi_with(rows: usize, cols: usize, users: usize, f_db: f64) -> StatisticalCsi {
        let mut p = ChannelParams::paper_default();
        p.bs_ris.rician_factor_db = f_db;
        p.ris_user.rician_factor_db = f_db;
        p.bs_user.rician_factor_db = f_db;
        build_statistical_csi(&small_geometry(rows, cols, users), &p).unwrap()
    }

    const P_D: f64 = 10.0;

    fn noise(k: usize) -> Vec<f64> {
        vec![1e-12; k]
    }

    #[test]
    fn virtual_channels_under_strong_los_are_nearly_identical() {
        let csi = csi_with(4, 4, 2, 60.0);
        let a = generate_virtual_channels(&csi, &mut ChaCha8Rng::seed_from_u64(1));
        let b = generate_virtual_channels(&csi, &mut ChaCha8Rng::seed_from_u64(2));
        let rel = a.g.sub(&b.g).unwrap().frobenius_norm() / a.g.frobenius_norm();
        assert!(rel < 0.01);
        for k in 0..2 {
            let d = a.h_r[k].add(&b.h_r[k].scale((-1.0).into())).unwrap();
            assert!(d.norm_sqr().sqrt() / a.h_r[k].norm_sqr().sqrt() < 0.01);
        }
    }

    #[test]
    fn virtual_channels_deterministic_and_independent_across_users() {
        let csi = csi_with(4, 4, 2, 3.0);
        let a = generate_virtual_channels(&csi, &mut ChaCha8Rng::seed_from_u64(3));
        let b = generate_virtual_channels(&csi, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        // both users share the LoS direction here, the NLoS draws must differ
        assert_ne!(a.h_r[0], a.h_r[1]);
    }

    #[test]
    fn single_user_sum_rate_is_matched_filter_power() {
        let csi = csi_with(2, 2, 1, 3.0);
        let r = sample_channel_realization(&csi, &mut ChaCha8Rng::seed_from_u64(4));
        let rc = RcConfig::new(vec![0, 1, 1, 0], 1).unwrap();
        let h = r.composite_matrix(&rc).unwrap().column(0);
        let expected = (1.0 + P_D * h.norm_sqr() / 1e-12).log2();
        let got = sum_rate_given_phases(&r, &rc, P_D, &noise(1)).unwrap();
        assert!((got - expected).abs() < 1e-10 * expected);
        assert_eq!(sum_rate_given_phases(&r, &rc, 0.0, &noise(1)).unwrap(), 0.0);
    }

    #[test]
    fn refine_single_element_is_exhaustive() {
        let csi = csi_with(1, 1, 1, 3.0);
        for seed in 0..10 {
            let r = sample_channel_realization(&csi, &mut ChaCha8Rng::seed_from_u64(seed));
            let init = RcConfig::new(vec![(seed % 2) as u32], 1).unwrap();
            let out = refine_phases(&r, &init, P_D, &noise(1), &AoOptions::default()).unwrap();
            let (_, best) = exhaustive_best(&r, 1, P_D, &noise(1)).unwrap();
            let got = sum_rate_given_phases(&r, &out, P_D, &noise(1)).unwrap();
            assert!(got >= best - 1e-12 * best);
        }
    }

    #[test]
    fn refine_never_decreases_and_converges_to_local_optimum() {
        let csi = csi_with(2, 4, 2, 3.0);
        let opts = AoOptions {
            sweep_passes_per_refinement: 50,
            ..AoOptions::default()
        };
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = sample_channel_realization(&csi, &mut rng);
            let init = random_rc(8, 2, &mut rng).unwrap();
            let before = sum_rate_given_phases(&r, &init, P_D, &noise(2)).unwrap();
            let out = refine_phases(&r, &init, P_D, &noise(2), &opts).unwrap();
            let after = sum_rate_given_phases(&r, &out, P_D, &noise(2)).unwrap();
            assert!(after >= before - 1e-12 * before);
            assert!(best_single_move_gain(&r, &out, P_D, &noise(2)).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn ao_trace_is_monotone() {
        let csi = csi_with(3, 3, 2, 3.0);
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let r = sample_channel_realization(&csi, &mut rng);
            let out = alternating_optimize_traced(&r, P_D, &noise(2), 1, &AoOptions::default(), &mut rng).unwrap();
            for w in out.trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[0].abs(), "{:?}", out.trace);
            }
            let cw = &out.codeword;
            let total: f64 = cw.power_allocation.as_ref().unwrap().iter().sum();
            assert!((total - P_D).abs() <= 1e-9 * P_D);
            let rate = sum_rate_given_phases(&r, &cw.rc, P_D, &noise(2)).unwrap();
            assert!((rate - cw.predicted_rate.unwrap()).abs() < 1e-9 * rate);
        }
    }

    #[test]
    fn ao_without_refinement_returns_waterfilled_initialization() {
        let csi = csi_with(2, 2, 2, 3.0);
        let r = sample_channel_realization(&csi, &mut ChaCha8Rng::seed_from_u64(5));
        let opts = AoOptions {
            max_outer_iterations: 1,
            sweep_passes_per_refinement: 0,
            ..AoOptions::default()
        };
        let out = alternating_optimize_traced(&r, P_D, &noise(2), 1, &opts, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let init = random_rc(4, 1, &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        assert_eq!(out.codeword.rc, init);
        assert_eq!(out.trace.len(), 1);
        let expected = sum_rate_given_phases(&r, &init, P_D, &noise(2)).unwrap();
        assert_eq!(out.codeword.predicted_rate, Some(expected));
    }

    #[test]
    fn ao_rejects_bad_options() {
        let csi = csi_with(2, 2, 1, 3.0);
        let r = sample_channel_realization(&csi, &mut ChaCha8Rng::seed_from_u64(5));
        let bad = AoOptions {
            convergence_tol: 0.0,
            ..AoOptions::default()
        };
        assert!(alternating_optimize(&r, P_D, &noise(1), 1, &bad, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn codebook_build_is_deterministic_and_prefix_nested() {
        let csi = csi_with(3, 3, 2, 3.0);
        let a = build_codebook(&csi, 6, P_D, &noise(2), 1, &AoOptions::default(), 9).unwrap();
        let b = build_codebook(&csi, 6, P_D, &noise(2), 1, &AoOptions::default(), 9).unwrap();
        assert_eq!(serialize_codebook(&a), serialize_codebook(&b));
        let small = build_codebook(&csi, 3, P_D, &noise(2), 1, &AoOptions::default(), 9).unwrap();
        assert_eq!(small, a.prefix(3).unwrap());
        let single = build_codebook(&csi, 1, P_D, &noise(2), 1, &AoOptions::default(), 9).unwrap();
        assert_eq!(single.len(), 1);
        assert!(build_codebook(&csi, 0, P_D, &noise(2), 1, &AoOptions::default(), 9).is_err());
        assert!(a.verify_fingerprint(&csi).is_ok());
        assert!(a.verify_fingerprint(&csi_with(3, 3, 2, 4.0)).is_err());
    }

    #[test]
    fn pure_los_codewords_reach_similar_rates() {
        let csi = csi_with(4, 4, 1, 60.0);
        let cb = build_codebook(&csi, 20, P_D, &noise(1), 1, &AoOptions::default(), 2).unwrap();
        let rates: Vec<f64> = cb.codewords.iter().map(|c| c.predicted_rate.unwrap()).collect();
        let best = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let worst = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(worst >= 0.98 * best, "{rates:?}");
    }

    #[test]
    fn random_codebook_properties() {
        let cb = random_codebook(100, 1, 100, 4).unwrap();
        let ones: u32 = cb.codewords.iter().flat_map(|c| c.rc.indices()).sum();
        let freq = f64::from(ones) / 1e4;
        assert!((0.45..=0.55).contains(&freq), "{freq}");
        assert!(cb.codewords.iter().all(|c| c.power_allocation.is_none() && c.predicted_rate.is_none()));

        let tiny = random_codebook(1, 3, 1, 5).unwrap();
        assert_eq!(tiny.len(), 1);
        assert!(tiny.codewords[0].rc.indices()[0] < 8);
        assert_eq!(random_codebook(5, 2, 4, 6).unwrap(), random_codebook(5, 2, 4, 6).unwrap());
    }
}
