//! Monte Carlo campaigns over a sweep, a set of Rician-factor series and a set
//! of codebook schemes.
//!
//! Random streams are addressed by position, never by iteration order:
//! realizations by `(series, trial)`, uplink noise by `(series, trial)`,
//! codebooks by `(series, point key)`. Adding sweep points or schemes leaves
//! every existing stream untouched, and all schemes and sweep values of a
//! series see the same channels (common random numbers).

use std::collections::HashMap;

use rayon::prelude::*;

use crate::channel::{build_statistical_csi, sample_channel_realization, StatisticalCsi};
use crate::codebook::{build_codebook, random_codebook, Codebook};
use crate::protocol::{run_online, OnlineParams, ProtocolResult};
use crate::rng::{derive_seed, label, stream};
use crate::theory::{estimation_error_variance, scaling_law, ScalingLawInputs};
use crate::{Error, Result};

use super::config::{dbm_to_watts, ris_shape, CsiMode, ExperimentConfig, Scheme, SweepVar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveRate {
    pub t_c: f64,
    pub tau: f64,
    pub rate: f64,
    /// Set when training alone exceeds the coherence time.
    pub training_exceeds_coherence: bool,
}

/// `(T_c - tau) / T_c * R`, or 0 (flagged) when `tau > T_c`.
pub fn effective_rate(sum_rate: f64, t_c: f64, tau: f64) -> Result<EffectiveRate> {
    if !(t_c > 0.0) || !(tau >= 0.0) {
        return Err(Error::Domain(format!("need t_c > 0 and tau >= 0, got {t_c}, {tau}")));
    }
    let exceeds = tau > t_c;
    Ok(EffectiveRate {
        t_c,
        tau,
        rate: if exceeds { 0.0 } else { (t_c - tau) / t_c * sum_rate },
        training_exceeds_coherence: exceeds,
    })
}

/// Training overhead in time slots: `Q` blocks of `K` pilot slots.
pub fn training_overhead(q_size: usize, users: usize) -> f64 {
    (q_size * users) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointStats {
    pub sweep_value: f64,
    /// RIS-user Rician factor of this series, if the config defines series.
    pub series: Option<f64>,
    pub scheme: Scheme,
    pub trials: usize,
    pub mean_rate: f64,
    pub stderr: f64,
    /// Mean zero-based selected codeword index.
    pub mean_selected_index: f64,
    /// Count of trials selecting each codeword.
    pub selected_histogram: Vec<usize>,
    /// Mean `|h^H w|^2` of the single user; `None` when `K > 1`.
    pub mean_received_power: Option<f64>,
    pub theory_received_power: Option<f64>,
    /// Rate `log2(1 + P_theory / sigma_k^2)` implied by the scaling law.
    pub theory_value: Option<f64>,
    pub effective: Vec<EffectiveRate>,
    pub per_trial_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McStatistics {
    pub sweep_var: SweepVar,
    pub rows: Vec<PointStats>,
}

#[derive(Debug, Clone, Default)]
pub struct CampaignOptions {
    /// Used instead of building environment-aware codebooks.
    pub codebook_override: Option<Codebook>,
}

#[derive(Debug, Clone)]
pub struct CampaignOutput {
    pub stats: McStatistics,
    /// The first environment-aware codebook used.
    pub first_codebook: Option<Codebook>,
    pub warnings: Vec<String>,
}

/// Concrete parameters at one sweep point of one series.
#[derive(Debug, Clone)]
pub struct PointSetup {
    pub cfg: ExperimentConfig,
    pub csi: StatisticalCsi,
    pub p_d: f64,
    pub q_size: usize,
    /// Codebook size to build so that every Q of the sweep is a prefix.
    pub codebook_size: usize,
    pub noise: Vec<f64>,
    pub sigma_z2: f64,
    /// Separates codebooks whose inputs differ other than by `P_d` or `Q`.
    pub codebook_key: u64,
}

pub fn point_setup(cfg: &ExperimentConfig, series: Option<f64>, value: f64) -> Result<PointSetup> {
    let mut cfg = cfg.clone();
    if let Some(f) = series {
        cfg.channel.ris_user.rician_factor_db = f;
    }
    let mut codebook_key = 0;
    let mut codebook_size = cfg.q_size;
    match cfg.sweep.var {
        SweepVar::Pd => cfg.p_d_dbm = value,
        SweepVar::N => {
            let (rows, cols) = ris_shape(value as usize);
            cfg.geometry.ris_rows = rows;
            cfg.geometry.ris_cols = cols;
            codebook_key = value as u64;
        }
        SweepVar::Q => {
            cfg.q_size = value as usize;
            codebook_size = cfg.sweep.values.iter().fold(0.0f64, |a, &b| a.max(b)) as usize;
        }
        SweepVar::Tc => {}
    }
    let csi = build_statistical_csi(&cfg.geometry, &cfg.channel)?;
    let sigma_z2 = match cfg.csi_mode {
        CsiMode::Perfect => 0.0,
        CsiMode::Imperfect => dbm_to_watts(cfg.sigma_z2_dbm),
    };
    Ok(PointSetup {
        p_d: dbm_to_watts(cfg.p_d_dbm),
        q_size: cfg.q_size,
        codebook_size,
        noise: vec![dbm_to_watts(cfg.sigma_k2_dbm); cfg.users()],
        sigma_z2,
        codebook_key,
        csi,
        cfg,
    })
}

/// Scaling-law inputs for the first user at this point.
pub fn theory_inputs(setup: &PointSetup) -> ScalingLawInputs {
    let cfg = &setup.cfg;
    let sigma_q2 = if setup.sigma_z2 == 0.0 {
        0.0
    } else {
        // the error variance is only ill-defined for non-positive pilot power,
        // which validation already rules out
        estimation_error_variance(setup.sigma_z2, cfg.users(), dbm_to_watts(cfg.p_ul_dbm)).unwrap_or(f64::NAN)
    };
    ScalingLawInputs {
        p_d: setup.p_d,
        m: cfg.geometry.bs_antennas,
        n: cfg.geometry.ris_elements(),
        q_size: setup.q_size,
        beta_r: setup.csi.beta_r[0],
        beta_g: setup.csi.beta_g,
        f_r_db: cfg.channel.ris_user.rician_factor_db,
        sigma_q2,
    }
}

/// Whether the single-user scaling law describes this point.
fn theory_applies(setup: &PointSetup, scheme: Scheme) -> bool {
    scheme == Scheme::EnvironmentAware
        && setup.cfg.users() == 1
        && setup.cfg.channel.direct_link_blocked
        && setup.cfg.geometry.ris_elements() >= 2
}

pub fn environment_codebook(cfg: &ExperimentConfig, setup: &PointSetup, series_index: usize) -> Result<Codebook> {
    let seed = derive_seed(cfg.seed, &[label::CODEBOOK, series_index as u64, setup.codebook_key]);
    build_codebook(
        &setup.csi,
        setup.codebook_size,
        setup.p_d,
        &setup.noise,
        cfg.bits,
        &cfg.ao,
        seed,
    )
}

fn baseline_codebook(cfg: &ExperimentConfig, setup: &PointSetup, series_index: usize) -> Result<Codebook> {
    let seed = derive_seed(cfg.seed, &[label::RANDOM_CODEBOOK, series_index as u64, setup.codebook_key]);
    random_codebook(setup.csi.ris_elements(), cfg.bits, setup.codebook_size, seed)
}

/// Runs the online stage for every trial; results are in trial order.
pub fn run_trials(
    cfg: &ExperimentConfig,
    setup: &PointSetup,
    codebook: &Codebook,
    series_index: usize,
) -> Result<Vec<ProtocolResult>> {
    let params = OnlineParams {
        p_ul: dbm_to_watts(cfg.p_ul_dbm),
        p_d: setup.p_d,
        sigma_z2: setup.sigma_z2,
        noise: setup.noise.clone(),
    };
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let s = series_index as u64;
            let realization =
                sample_channel_realization(&setup.csi, &mut stream(cfg.seed, &[label::REALIZATION, s, t as u64]));
            let mut uplink = stream(cfg.seed, &[label::UPLINK, s, t as u64]);
            run_online(&realization, codebook, &params, &mut uplink).map_err(|e| e.with_context(format!("trial {t}")))
        })
        .collect()
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn summarize(
    cfg: &ExperimentConfig,
    setup: &PointSetup,
    scheme: Scheme,
    sweep_value: f64,
    series: Option<f64>,
    results: &[ProtocolResult],
    codebook_len: usize,
) -> Result<PointStats> {
    let rates: Vec<f64> = results.iter().map(|r| r.true_sum_rate).collect();
    let (mean_rate, stderr) = mean_and_stderr(&rates);
    let mut selected_histogram = vec![0; codebook_len];
    for r in results {
        selected_histogram[r.selected_index] += 1;
    }
    let mean_selected_index =
        results.iter().map(|r| r.selected_index as f64).sum::<f64>() / results.len() as f64;
    let mean_received_power = (cfg.users() == 1)
        .then(|| results.iter().map(|r| r.received_powers[0]).sum::<f64>() / results.len() as f64);
    let theory_received_power = if theory_applies(setup, scheme) {
        Some(scaling_law(&theory_inputs(setup))?.total)
    } else {
        None
    };
    let theory_value = theory_received_power.map(|p| (1.0 + p / setup.noise[0]).log2());
    let tau = training_overhead(setup.q_size, cfg.users());
    let coherence: Vec<f64> = match cfg.sweep.var {
        SweepVar::Tc => vec![sweep_value],
        _ => cfg.coherence_times.clone(),
    };
    let effective = coherence
        .iter()
        .map(|&t_c| effective_rate(mean_rate, t_c, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointStats {
        sweep_value,
        series,
        scheme,
        trials: results.len(),
        mean_rate,
        stderr,
        mean_selected_index,
        selected_histogram,
        mean_received_power,
        theory_received_power,
        theory_value,
        effective,
        per_trial_rates: rates,
    })
}

pub fn run_campaign(cfg: &ExperimentConfig) -> Result<McStatistics> {
    Ok(run_campaign_with(cfg, &CampaignOptions::default())?.stats)
}

pub fn run_campaign_with(cfg: &ExperimentConfig, opts: &CampaignOptions) -> Result<CampaignOutput> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut first_codebook = None;
    // codebooks shared across sweep points, keyed by (series, scheme, point key)
    let mut cache: HashMap<(usize, Scheme, u64), Codebook> = HashMap::new();
    // outcomes shared across T_c points, which only change the accounting
    let mut tc_cache: HashMap<(usize, Scheme), Vec<ProtocolResult>> = HashMap::new();

    for (series_index, series) in cfg.series().into_iter().enumerate() {
        for &value in &cfg.sweep.values {
            let context = |e: Error| e.with_context(format!("sweep point {}={value}", cfg.sweep.var.name()));
            let setup = point_setup(cfg, series, value).map_err(context)?;
            for &scheme in &cfg.schemes {
                let reusable = matches!(cfg.sweep.var, SweepVar::Q | SweepVar::Tc);
                let key = (series_index, scheme, setup.codebook_key);
                let full = match (scheme, &opts.codebook_override) {
                    (Scheme::EnvironmentAware, Some(cb)) => {
                        if let Err(e) = cb.verify_fingerprint(&setup.csi) {
                            let w = format!("sweep point {}={value}: {e}", cfg.sweep.var.name());
                            if !warnings.contains(&w) {
                                warnings.push(w);
                            }
                        }
                        cb.clone()
                    }
                    _ if reusable && cache.contains_key(&key) => cache[&key].clone(),
                    (Scheme::EnvironmentAware, None) => {
                        environment_codebook(cfg, &setup, series_index).map_err(context)?
                    }
                    (Scheme::RandomCodebook, _) => baseline_codebook(cfg, &setup, series_index).map_err(context)?,
                };
                if reusable {
                    cache.insert(key, full.clone());
                }
                if scheme == Scheme::EnvironmentAware && first_codebook.is_none() {
                    first_codebook = Some(full.clone());
                }
                let codebook = if full.len() == setup.q_size {
                    full
                } else {
                    full.prefix(setup.q_size).map_err(context)?
                };

                let results = if cfg.sweep.var == SweepVar::Tc {
                    match tc_cache.get(&(series_index, scheme)) {
                        Some(r) => r.clone(),
                        None => {
                            let r = run_trials(cfg, &setup, &codebook, series_index).map_err(context)?;
                            tc_cache.insert((series_index, scheme), r.clone());
                            r
                        }
                    }
                } else {
                    run_trials(cfg, &setup, &codebook, series_index).map_err(context)?
                };
                rows.push(
                    summarize(cfg, &setup, scheme, value, series, &results, codebook.len()).map_err(context)?,
                );
            }
        }
    }
    Ok(CampaignOutput {
        stats: McStatistics {
            sweep_var: cfg.sweep.var,
            rows,
        },
        first_codebook,
        warnings,
    })
}

/// The offline stage alone at the config's base parameters.
pub fn offline_codebook(cfg: &ExperimentConfig) -> Result<Codebook> {
    cfg.validate()?;
    let value = match cfg.sweep.var {
        SweepVar::Pd => cfg.p_d_dbm,
        SweepVar::N => cfg.geometry.ris_elements() as f64,
        SweepVar::Q => cfg.q_size as f64,
        SweepVar::Tc => 1.0,
    };
    let mut base = cfg.clone();
    base.sweep.values = vec![value];
    let setup = point_setup(&base, cfg.series()[0], value)?;
    environment_codebook(&base, &setup, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::presets::scenario_presets;

    #[test]
    fn effective_rate_examples() {
        assert_eq!(effective_rate(5.0, 200.0, 0.0).unwrap().rate, 5.0);
        assert_eq!(effective_rate(5.0, 200.0, 200.0).unwrap().rate, 0.0);
        let half = effective_rate(8.0, 200.0, training_overhead(50, 2)).unwrap();
        assert_eq!(half.rate, 4.0);
        assert!(!half.training_exceeds_coherence);
        let over = effective_rate(8.0, 100.0, 160.0).unwrap();
        assert_eq!(over.rate, 0.0);
        assert!(over.training_exceeds_coherence);
        assert!(effective_rate(1.0, 0.0, 0.0).is_err());
    }

    fn tiny(name: &str) -> ExperimentConfig {
        let mut cfg = scenario_presets(name).unwrap();
        cfg.set_ris_elements(4);
        cfg.trials = 6;
        cfg
    }

    #[test]
    fn single_trial_single_codeword() {
        let mut cfg = tiny("fig5c");
        cfg.trials = 1;
        cfg.sweep.values = vec![1.0];
        cfg.schemes = vec![Scheme::EnvironmentAware];
        let stats = run_campaign(&cfg).unwrap();
        assert_eq!(stats.rows.len(), 1);
        let row = &stats.rows[0];
        assert_eq!((row.trials, row.stderr, row.mean_selected_index), (1, 0.0, 0.0));
        assert_eq!(row.selected_histogram, vec![1]);
    }

    #[test]
    fn deterministic_and_stream_stable() {
        let cfg = tiny("fig5c");
        let a = run_campaign(&cfg).unwrap();
        assert_eq!(a, run_campaign(&cfg).unwrap());
        let mut more = cfg.clone();
        more.sweep.values.insert(1, 7.0);
        let b = run_campaign(&more).unwrap();
        // codebooks are built at the largest Q, so existing rows are unchanged
        for row in &a.rows {
            let other = b
                .rows
                .iter()
                .find(|r| r.sweep_value == row.sweep_value && r.scheme == row.scheme)
                .unwrap();
            assert_eq!(row, other);
        }
    }

    #[test]
    fn q_sweep_is_monotone_per_trial_with_perfect_csi() {
        let mut cfg = tiny("fig5c");
        cfg.csi_mode = CsiMode::Perfect;
        let stats = run_campaign(&cfg).unwrap();
        for scheme in [Scheme::EnvironmentAware, Scheme::RandomCodebook] {
            let rows: Vec<_> = stats.rows.iter().filter(|r| r.scheme == scheme).collect();
            for w in rows.windows(2) {
                for (a, b) in w[0].per_trial_rates.iter().zip(&w[1].per_trial_rates) {
                    assert!(b >= a, "{scheme:?}: {a} -> {b}");
                }
            }
        }
    }

    #[test]
    fn single_user_rows_carry_theory() {
        let mut cfg = tiny("fig3a");
        cfg.sweep.values = vec![1.0, 5.0];
        cfg.q_size = 5;
        let stats = run_campaign(&cfg).unwrap();
        assert_eq!(stats.rows.len(), 6);
        for row in &stats.rows {
            assert!(row.theory_value.is_some() && row.mean_received_power.is_some());
        }
    }

    #[test]
    fn tc_sweep_reuses_outcomes() {
        let mut cfg = tiny("fig5d");
        cfg.sweep.var = SweepVar::Tc;
        cfg.sweep.values = vec![50.0, 400.0];
        cfg.q_size = 5;
        cfg.schemes = vec![Scheme::EnvironmentAware];
        let stats = run_campaign(&cfg).unwrap();
        assert_eq!(stats.rows[0].mean_rate, stats.rows[1].mean_rate);
        assert_eq!(stats.rows[0].effective[0].tau, 10.0);
        assert!(stats.rows[0].effective[0].rate < stats.rows[1].effective[0].rate);
    }

    #[test]
    fn override_with_foreign_fingerprint_warns() {
        let cfg = tiny("fig5c");
        let mut other = cfg.clone();
        other.channel.ris_user.rician_factor_db = 9.0;
        let cb = offline_codebook(&ExperimentConfig { q_size: 50, ..other }).unwrap();
        let out = run_campaign_with(
            &cfg,
            &CampaignOptions {
                codebook_override: Some(cb),
            },
        )
        .unwrap();
        assert!(!out.warnings.is_empty());
    }
}
