//! Named experiment scenarios.

use crate::{Error, Result};

use super::config::{default_users, CsiMode, ExperimentConfig, Scheme, Sweep, SweepVar};

pub const SCENARIOS: [&str; 6] = ["fig3a", "fig3b", "fig5a", "fig5b", "fig5c", "fig5d"];

fn single_user(mut cfg: ExperimentConfig, csi_mode: CsiMode) -> ExperimentConfig {
    cfg.geometry.user_positions = default_users(1);
    cfg.channel.direct_link_blocked = true;
    cfg.channel.bs_ris.rician_factor_db = f64::INFINITY;
    cfg.series_f_r_db = vec![-60.0, 3.0, 60.0];
    cfg.csi_mode = csi_mode;
    cfg.q_size = 50;
    cfg.sweep = Sweep {
        var: SweepVar::Q,
        values: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
    };
    cfg
}

/// Scenario structure on top of the paper-scale parameters.
pub fn paper_scale(name: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::paper_default();
    let both = vec![Scheme::EnvironmentAware, Scheme::RandomCodebook];
    if name.starts_with("fig5") {
        cfg.csi_mode = CsiMode::Perfect;
    }
    cfg = match name {
        "fig3a" => single_user(cfg, CsiMode::Perfect),
        "fig3b" => single_user(cfg, CsiMode::Imperfect),
        "fig5a" => {
            cfg.schemes = both;
            cfg.q_size = 50;
            cfg.sweep = Sweep {
                var: SweepVar::Pd,
                values: vec![30.0, 35.0, 40.0, 45.0, 50.0],
            };
            cfg
        }
        "fig5b" => {
            cfg.schemes = both;
            cfg.sweep = Sweep {
                var: SweepVar::N,
                values: vec![4.0, 16.0, 36.0, 64.0, 100.0],
            };
            cfg
        }
        "fig5c" => {
            cfg.schemes = both;
            cfg.q_size = 50;
            cfg.sweep = Sweep {
                var: SweepVar::Q,
                values: vec![5.0, 10.0, 20.0, 50.0],
            };
            cfg
        }
        "fig5d" => {
            cfg.schemes = both;
            cfg.q_size = 80;
            cfg.coherence_times = vec![200.0, 1000.0];
            cfg.sweep = Sweep {
                var: SweepVar::Q,
                values: vec![5.0, 10.0, 25.0, 50.0, 80.0],
            };
            cfg
        }
        _ => {
            return Err(Error::validation(
                "scenario",
                format!("unknown scenario {name:?}; valid names: {}", SCENARIOS.join(", ")),
            ))
        }
    };
    cfg.scenario = name.to_string();
    Ok(cfg)
}

/// Desk-scale preset: `paper_scale` with a 4 x 4 RIS and 200 trials.
pub fn scenario_presets(name: &str) -> Result<ExperimentConfig> {
    let cfg = paper_scale(name)?;
    // the N sweep keeps its own element counts
    let sweep = cfg.sweep.clone();
    let mut desk = cfg.desk_scale();
    if name == "fig5a" {
        desk.q_size = 10;
    }
    if sweep.var == SweepVar::N {
        desk.sweep = Sweep {
            var: SweepVar::N,
            values: vec![4.0, 16.0, 36.0, 64.0],
        };
    }
    Ok(desk)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for name in SCENARIOS {
            let cfg = scenario_presets(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.scenario, name);
            assert_eq!(cfg.trials, 200);
            paper_scale(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn preset_structure() {
        assert_eq!(scenario_presets("fig3a").unwrap().csi_mode, CsiMode::Perfect);
        assert_eq!(scenario_presets("fig3b").unwrap().csi_mode, CsiMode::Imperfect);
        let c = scenario_presets("fig5c").unwrap();
        assert_eq!(c.schemes, vec![Scheme::EnvironmentAware, Scheme::RandomCodebook]);
        assert_eq!(c.geometry.ris_elements(), 16);
        let d = scenario_presets("fig5d").unwrap();
        assert!(d.coherence_times.len() >= 2);
        let f3 = scenario_presets("fig3a").unwrap();
        assert_eq!(f3.users(), 1);
        assert!(f3.channel.direct_link_blocked);
        assert_eq!(f3.series_f_r_db, vec![-60.0, 3.0, 60.0]);
    }

    #[test]
    fn unknown_name_lists_valid_ones() {
        let msg = scenario_presets("fig4").unwrap_err().to_string();
        for name in SCENARIOS {
            assert!(msg.contains(name));
        }
    }
}
