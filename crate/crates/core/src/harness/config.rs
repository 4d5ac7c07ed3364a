//! Line-oriented `key = value` experiment configs with optional `[section]`
//! headers. Keys given before any header may belong to any section.
//!
//! ```text
//! scenario = fig5c
//! [experiment]
//! trials = 200
//! seed = 7
//! [system]
//! N = 16
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use crate::channel::{ChannelParams, Point3, SystemGeometry};
use crate::codebook::{AoOptions, MAX_BITS};
use crate::{Error, Result};

use super::presets;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepVar {
    Pd,
    N,
    Q,
    Tc,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Pd => "P_d",
            SweepVar::N => "N",
            SweepVar::Q => "Q",
            SweepVar::Tc => "T_c",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "P_d" | "P_d_dbm" => Some(SweepVar::Pd),
            "N" => Some(SweepVar::N),
            "Q" => Some(SweepVar::Q),
            "T_c" => Some(SweepVar::Tc),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    EnvironmentAware,
    RandomCodebook,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::EnvironmentAware => "environment_aware",
            Scheme::RandomCodebook => "random_codebook",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "environment_aware" => Some(Scheme::EnvironmentAware),
            "random_codebook" => Some(Scheme::RandomCodebook),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    Perfect,
    Imperfect,
}

impl CsiMode {
    pub fn name(self) -> &'static str {
        match self {
            CsiMode::Perfect => "perfect",
            CsiMode::Imperfect => "imperfect",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub geometry: SystemGeometry,
    pub channel: ChannelParams,
    pub bits: u32,
    pub q_size: usize,
    pub p_d_dbm: f64,
    pub p_ul_dbm: f64,
    pub sigma_z2_dbm: f64,
    pub sigma_k2_dbm: f64,
    pub trials: usize,
    pub seed: u64,
    pub sweep: Sweep,
    pub csi_mode: CsiMode,
    pub schemes: Vec<Scheme>,
    /// RIS-user Rician factors run as separate series; empty means one series
    /// at `channel.ris_user.rician_factor_db`.
    pub series_f_r_db: Vec<f64>,
    /// Coherence times (in time slots) for effective-rate reporting.
    pub coherence_times: Vec<f64>,
    pub ao: AoOptions,
}

/// Users spread on the line `y = 100, z = 0` between `x = -2` and `x = 2`.
pub fn default_users(k: usize) -> Vec<Point3> {
    match k {
        0 => Vec::new(),
        1 => vec![Point3::new(-2.0, 100.0, 0.0)],
        _ => (0..k)
            .map(|i| Point3::new(-2.0 + 4.0 * i as f64 / (k - 1) as f64, 100.0, 0.0))
            .collect(),
    }
}

/// Most-square factorization `rows x cols = n` with `rows <= cols`.
pub fn ris_shape(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (rows, n / rows)
}

impl ExperimentConfig {
    /// Paper-scale parameters with a single-point Q sweep.
    pub fn paper_default() -> Self {
        let q_size = 10;
        Self {
            scenario: "custom".into(),
            geometry: SystemGeometry::paper_default(),
            channel: ChannelParams::paper_default(),
            bits: 1,
            q_size,
            p_d_dbm: 40.0,
            p_ul_dbm: -20.0,
            sigma_z2_dbm: -110.0,
            sigma_k2_dbm: -90.0,
            trials: 1000,
            seed: 1,
            sweep: Sweep {
                var: SweepVar::Q,
                values: vec![q_size as f64],
            },
            csi_mode: CsiMode::Imperfect,
            schemes: vec![Scheme::EnvironmentAware],
            series_f_r_db: Vec::new(),
            coherence_times: Vec::new(),
            ao: AoOptions::default(),
        }
    }

    pub fn users(&self) -> usize {
        self.geometry.users()
    }

    pub fn set_ris_elements(&mut self, n: usize) {
        let (rows, cols) = ris_shape(n);
        self.geometry.ris_rows = rows;
        self.geometry.ris_cols = cols;
    }

    /// Switches to desk scale: a 4 x 4 RIS and 200 trials.
    pub fn desk_scale(mut self) -> Self {
        self.set_ris_elements(16);
        self.trials = 200;
        self
    }

    pub fn series(&self) -> Vec<Option<f64>> {
        if self.series_f_r_db.is_empty() {
            vec![None]
        } else {
            self.series_f_r_db.iter().map(|&f| Some(f)).collect()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::validation("trials", "must be at least 1"));
        }
        if self.q_size == 0 {
            return Err(Error::validation("Q", "must be at least 1"));
        }
        if !(1..=MAX_BITS).contains(&self.bits) {
            return Err(Error::validation("b", format!("must be in 1..={MAX_BITS}")));
        }
        for (name, v) in [
            ("P_d_dbm", self.p_d_dbm),
            ("P_ul_dbm", self.p_ul_dbm),
            ("sigma_z2_dbm", self.sigma_z2_dbm),
            ("sigma_k2_dbm", self.sigma_k2_dbm),
        ] {
            let w = dbm_to_watts(v);
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::validation(name, format!("{v} dBm is not a positive finite power")));
            }
        }
        self.geometry.validate()?;
        self.channel.bs_ris.validate("bs_ris")?;
        self.channel.ris_user.validate("ris_user")?;
        self.channel.bs_user.validate("bs_user")?;
        self.ao.validate()?;
        if self.users() > self.geometry.bs_antennas {
            return Err(Error::validation("K", "zero-forcing needs K <= M"));
        }
        if self.schemes.is_empty() {
            return Err(Error::validation("schemes", "at least one scheme is required"));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::validation("sweep_values", "must not be empty"));
        }
        for &v in &self.sweep.values {
            let ok = match self.sweep.var {
                SweepVar::Pd => v.is_finite(),
                SweepVar::N | SweepVar::Q => v >= 1.0 && v.fract() == 0.0 && v <= 1e6,
                SweepVar::Tc => v > 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(Error::validation(
                    "sweep_values",
                    format!("{v} is not a valid {} value", self.sweep.var.name()),
                ));
            }
        }
        if self.series_f_r_db.iter().any(|f| f.is_nan()) {
            return Err(Error::validation("series_F_r_db", "NaN Rician factor"));
        }
        if self.coherence_times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::validation("coherence_times", "must be positive"));
        }
        Ok(())
    }
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "experiment",
        &[
            "scenario",
            "scale",
            "trials",
            "seed",
            "csi_mode",
            "schemes",
            "sweep_var",
            "sweep_values",
            "coherence_times",
            "series_F_r_db",
        ],
    ),
    ("system", &["M", "N", "ris_rows", "ris_cols", "K", "b", "Q"]),
    ("geometry", &["bs_position", "ris_position", "users", "bs_spacing", "ris_spacing"]),
    (
        "links",
        &[
            "F_g_db",
            "F_r_db",
            "F_d_db",
            "alpha_g",
            "alpha_r",
            "alpha_d",
            "C0_db",
            "d0_m",
            "direct_link_blocked",
        ],
    ),
    ("power", &["P_d_dbm", "P_ul_dbm", "sigma_z2_dbm", "sigma_k2_dbm"]),
    ("ao", &["max_outer_iterations", "convergence_tol", "sweep_passes"]),
];

struct Entry {
    value: String,
    line: usize,
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::ConfigSyntax {
        line,
        message: message.into(),
    }
}

fn tokenize(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut section: Option<&str> = None;
    let mut entries = BTreeMap::new();
    let mut unknown = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax(line_no, "unterminated section header"))?
                .trim();
            let known = KEYS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| syntax(line_no, format!("unknown section [{name}]")))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(line_no, format!("expected `key = value`, found {line:?}")))?;
        let key = key.trim();
        let allowed = KEYS
            .iter()
            .filter(|(s, _)| section.is_none_or(|cur| cur == *s))
            .any(|(_, keys)| keys.contains(&key));
        if !allowed {
            unknown.push(format!("{key} (line {line_no})"));
            continue;
        }
        if entries.contains_key(key) {
            return Err(syntax(line_no, format!("duplicate key {key}")));
        }
        entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                line: line_no,
            },
        );
    }
    if !unknown.is_empty() {
        return Err(Error::validation("config", format!("unknown keys: {}", unknown.join(", "))));
    }
    Ok(entries)
}

struct Reader(BTreeMap<String, Entry>);

impl Reader {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(|e| e.value.as_str())
    }

    fn bad(&self, key: &str, what: &str) -> Error {
        let e = &self.0[key];
        Error::validation(key, format!("line {}: {:?} is not {what}", e.line, e.value))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| self.bad(key, what)),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.parsed::<f64>(key, "a number")? {
            Some(v) if v.is_nan() => Err(self.bad(key, "a number")),
            other => Ok(other),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.parsed(key, "a non-negative integer")
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|t| t.trim().parse::<f64>().ok().filter(|x| !x.is_nan()))
                .collect::<Option<Vec<_>>>()
                .map(Some)
                .ok_or_else(|| self.bad(key, "a comma-separated list of numbers")),
        }
    }

    fn point(&self, key: &str, text: &str) -> Result<Point3> {
        let v: Vec<f64> = text
            .split(',')
            .map(|t| t.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| self.bad(key, "an `x, y, z` point"))?;
        match v[..] {
            [x, y, z] => Ok(Point3::new(x, y, z)),
            _ => Err(self.bad(key, "an `x, y, z` point")),
        }
    }
}

/// Reads a config file; see [`parse_config`].
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(e).with_context(format!("reading {}", path.display())))?;
    parse_config(&text, None)
}

/// Parses config text. The base is the named scenario (or the default
/// setup) at paper scale, or at desk scale with `scale = desk`; every key
/// present overrides it. `scenario` overrides the file's own `scenario` key.
pub fn parse_config(text: &str, scenario: Option<&str>) -> Result<ExperimentConfig> {
    let r = Reader(tokenize(text)?);
    let name = scenario.or(r.raw("scenario"));
    let mut cfg = match name {
        Some(n) if n != "custom" => presets::paper_scale(n)?,
        _ => ExperimentConfig::paper_default(),
    };
    match r.raw("scale") {
        None | Some("paper") => {}
        Some("desk") => cfg = cfg.desk_scale(),
        Some(_) => return Err(r.bad("scale", "`paper` or `desk`")),
    }

    if let Some(v) = r.usize("trials")? {
        cfg.trials = v;
    }
    if let Some(v) = r.parsed("seed", "an unsigned 64-bit integer")? {
        cfg.seed = v;
    }
    match r.raw("csi_mode") {
        None => {}
        Some("perfect") => cfg.csi_mode = CsiMode::Perfect,
        Some("imperfect") => cfg.csi_mode = CsiMode::Imperfect,
        Some(_) => return Err(r.bad("csi_mode", "`perfect` or `imperfect`")),
    }
    if let Some(v) = r.raw("schemes") {
        let mut schemes = v
            .split(',')
            .map(|s| Scheme::parse(s.trim()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| r.bad("schemes", "a list of environment_aware / random_codebook"))?;
        schemes.sort();
        schemes.dedup();
        cfg.schemes = schemes;
    }
    if let Some(v) = r.list("series_F_r_db")? {
        cfg.series_f_r_db = v;
    }
    if let Some(v) = r.list("coherence_times")? {
        cfg.coherence_times = v;
    }

    let g = &mut cfg.geometry;
    if let Some(v) = r.usize("M")? {
        g.bs_antennas = v;
    }
    if let Some(v) = r.usize("N")? {
        let (rows, cols) = ris_shape(v.max(1));
        g.ris_rows = rows;
        g.ris_cols = cols;
        if v == 0 {
            return Err(Error::validation("N", "must be at least 1"));
        }
    }
    if let Some(v) = r.usize("ris_rows")? {
        g.ris_rows = v;
    }
    if let Some(v) = r.usize("ris_cols")? {
        g.ris_cols = v;
    }
    if let Some(v) = r.raw("bs_position") {
        g.bs_position = r.point("bs_position", v)?;
    }
    if let Some(v) = r.raw("ris_position") {
        g.ris_position = r.point("ris_position", v)?;
    }
    if let Some(v) = r.f64("bs_spacing")? {
        g.bs_spacing = v;
    }
    if let Some(v) = r.f64("ris_spacing")? {
        g.ris_spacing = v;
    }
    match (r.raw("users"), r.usize("K")?) {
        (Some(v), k) => {
            g.user_positions = v.split(';').map(|p| r.point("users", p)).collect::<Result<_>>()?;
            if k.is_some_and(|k| k != g.user_positions.len()) {
                return Err(Error::validation("K", "does not match the number of users listed"));
            }
        }
        (None, Some(k)) => g.user_positions = default_users(k),
        (None, None) => {}
    }
    if let Some(v) = r.parsed::<u32>("b", "a bit count")? {
        cfg.bits = v;
    }
    if let Some(v) = r.usize("Q")? {
        cfg.q_size = v;
    }

    let c = &mut cfg.channel;
    for (key, field) in [
        ("F_g_db", &mut c.bs_ris.rician_factor_db),
        ("F_r_db", &mut c.ris_user.rician_factor_db),
        ("F_d_db", &mut c.bs_user.rician_factor_db),
        ("alpha_g", &mut c.bs_ris.pathloss_exponent),
        ("alpha_r", &mut c.ris_user.pathloss_exponent),
        ("alpha_d", &mut c.bs_user.pathloss_exponent),
    ] {
        if let Some(v) = r.f64(key)? {
            *field = v;
        }
    }
    if let Some(v) = r.f64("C0_db")? {
        for link in [&mut c.bs_ris, &mut c.ris_user, &mut c.bs_user] {
            link.reference_loss_db = v;
        }
    }
    if let Some(v) = r.f64("d0_m")? {
        for link in [&mut c.bs_ris, &mut c.ris_user, &mut c.bs_user] {
            link.reference_distance = v;
        }
    }
    if let Some(v) = r.parsed("direct_link_blocked", "`true` or `false`")? {
        c.direct_link_blocked = v;
    }

    for (key, field) in [
        ("P_d_dbm", &mut cfg.p_d_dbm),
        ("P_ul_dbm", &mut cfg.p_ul_dbm),
        ("sigma_z2_dbm", &mut cfg.sigma_z2_dbm),
        ("sigma_k2_dbm", &mut cfg.sigma_k2_dbm),
    ] {
        if let Some(v) = r.f64(key)? {
            *field = v;
        }
    }
    if let Some(v) = r.usize("max_outer_iterations")? {
        cfg.ao.max_outer_iterations = v;
    }
    if let Some(v) = r.f64("convergence_tol")? {
        cfg.ao.convergence_tol = v;
    }
    if let Some(v) = r.usize("sweep_passes")? {
        cfg.ao.sweep_passes_per_refinement = v;
    }

    let var = match r.raw("sweep_var") {
        None => cfg.sweep.var,
        Some(v) => SweepVar::parse(v).ok_or_else(|| r.bad("sweep_var", "one of P_d, N, Q, T_c"))?,
    };
    match r.list("sweep_values")? {
        Some(values) => cfg.sweep = Sweep { var, values },
        None if var != cfg.sweep.var || name.is_none() => {
            let base = match var {
                SweepVar::Pd => cfg.p_d_dbm,
                SweepVar::N => cfg.geometry.ris_elements() as f64,
                SweepVar::Q => cfg.q_size as f64,
                SweepVar::Tc => *cfg.coherence_times.first().unwrap_or(&200.0),
            };
            cfg.sweep = Sweep { var, values: vec![base] };
        }
        None => {}
    }
    if let Some(n) = name {
        cfg.scenario = n.to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}
