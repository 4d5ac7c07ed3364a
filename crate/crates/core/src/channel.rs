//! Geometry, path loss, LoS steering vectors and Rician fading for the
//! BS–RIS, RIS–user and BS–user links.
//!
//! Coordinate conventions: the BS array is a ULA along the z-axis, the RIS is a
//! UPA in the y–z plane whose rows run along z (elevation) and whose columns
//! run along y (azimuth). RIS element `(r, c)` has flat index `r * cols + c`.
//! Spacings are in wavelengths, so the carrier never appears explicitly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::codebook::RcConfig;
use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2)).sqrt()
    }

    /// Unit vector pointing from `self` towards `other`.
    fn direction_to(&self, other: &Point3) -> [f64; 3] {
        let d = self.distance(other);
        [(other.x - self.x) / d, (other.y - self.y) / d, (other.z - self.z) / d]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemGeometry {
    pub bs_position: Point3,
    pub bs_antennas: usize,
    /// BS element spacing in wavelengths.
    pub bs_spacing: f64,
    pub ris_position: Point3,
    pub ris_rows: usize,
    pub ris_cols: usize,
    /// RIS element spacing in wavelengths.
    pub ris_spacing: f64,
    pub user_positions: Vec<Point3>,
}

impl SystemGeometry {
    /// Two-user deployment with an 8-antenna BS and a 10x10 RIS 100 m away.
    pub fn paper_default() -> Self {
        Self {
            bs_position: Point3::new(0.0, 0.0, 5.0),
            bs_antennas: 8,
            bs_spacing: 0.5,
            ris_position: Point3::new(0.0, 100.0, 5.0),
            ris_rows: 10,
            ris_cols: 10,
            ris_spacing: 0.125,
            user_positions: vec![Point3::new(2.0, 100.0, 0.0), Point3::new(-2.0, 100.0, 0.0)],
        }
    }

    pub fn ris_elements(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    pub fn users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.bs_antennas == 0 {
            return Err(Error::validation("M", "need at least one BS antenna"));
        }
        if self.ris_rows == 0 || self.ris_cols == 0 {
            return Err(Error::validation("N", "need at least one RIS element"));
        }
        if self.user_positions.is_empty() {
            return Err(Error::validation("users", "need at least one user"));
        }
        if !(self.bs_spacing > 0.0) || !(self.ris_spacing > 0.0) {
            return Err(Error::validation("spacing", "element spacings must be positive"));
        }
        if !(self.bs_position.distance(&self.ris_position) > 0.0) {
            return Err(Error::validation("geometry", "BS and RIS coincide"));
        }
        for (k, u) in self.user_positions.iter().enumerate() {
            if !(u.distance(&self.ris_position) > 0.0) || !(u.distance(&self.bs_position) > 0.0) {
                return Err(Error::validation("geometry", format!("user {k} coincides with BS or RIS")));
            }
        }
        Ok(())
    }
}

/// Large-scale parameters of one link type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    /// Rician factor in dB; `+inf` gives a pure LoS link, `-inf` Rayleigh.
    pub rician_factor_db: f64,
    pub pathloss_exponent: f64,
    /// Path loss at the reference distance, dB (negative for a loss).
    pub reference_loss_db: f64,
    pub reference_distance: f64,
}

impl LinkParams {
    pub fn new(rician_factor_db: f64, pathloss_exponent: f64) -> Self {
        Self {
            rician_factor_db,
            pathloss_exponent,
            reference_loss_db: -20.0,
            reference_distance: 1.0,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.pathloss_exponent >= 0.0) || !self.pathloss_exponent.is_finite() {
            return Err(Error::validation(name, "path-loss exponent must be non-negative"));
        }
        if !(self.reference_distance > 0.0) {
            return Err(Error::validation(name, "reference distance must be positive"));
        }
        if self.rician_factor_db.is_nan() || !self.reference_loss_db.is_finite() {
            return Err(Error::validation(name, "Rician factor and reference loss must be numbers"));
        }
        Ok(())
    }
}

/// Link parameters for the three channels plus the option to drop the direct path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub bs_ris: LinkParams,
    pub ris_user: LinkParams,
    pub bs_user: LinkParams,
    pub direct_link_blocked: bool,
}

impl ChannelParams {
    pub fn paper_default() -> Self {
        Self {
            bs_ris: LinkParams::new(4.0, 2.4),
            ris_user: LinkParams::new(3.0, 2.5),
            bs_user: LinkParams::new(-3.0, 3.5),
            direct_link_blocked: false,
        }
    }
}

/// Everything the offline stage is allowed to know about the channels.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalCsi {
    /// N x M, rank one.
    pub los_bs_ris: ComplexMatrix,
    pub los_ris_user: Vec<ComplexVector>,
    pub los_bs_user: Vec<ComplexVector>,
    pub params: ChannelParams,
    pub beta_g: f64,
    /// Per-user RIS–user path gains.
    pub beta_r: Vec<f64>,
    /// Per-user BS–user path gains.
    pub beta_d: Vec<f64>,
}

impl StatisticalCsi {
    pub fn bs_antennas(&self) -> usize {
        self.los_bs_ris.cols()
    }

    pub fn ris_elements(&self) -> usize {
        self.los_bs_ris.rows()
    }

    pub fn users(&self) -> usize {
        self.los_ris_user.len()
    }

    /// Hex digest identifying the LoS components and link parameters.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let mut feed = |x: f64| hasher.update(x.to_le_bytes());
        for z in self.los_bs_ris.as_slice() {
            feed(z.re);
            feed(z.im);
        }
        for v in self.los_ris_user.iter().chain(&self.los_bs_user) {
            for z in v.iter() {
                feed(z.re);
                feed(z.im);
            }
        }
        for p in [self.params.bs_ris, self.params.ris_user, self.params.bs_user] {
            feed(p.rician_factor_db);
            feed(p.pathloss_exponent);
            feed(p.reference_loss_db);
            feed(p.reference_distance);
        }
        feed(if self.params.direct_link_blocked { 1.0 } else { 0.0 });
        feed(self.beta_g);
        for &b in self.beta_r.iter().chain(&self.beta_d) {
            feed(b);
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One draw of all small-scale fading.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// BS–RIS channel, N x M.
    pub g: ComplexMatrix,
    pub h_r: Vec<ComplexVector>,
    pub h_d: Vec<ComplexVector>,
}

impl ChannelRealization {
    pub fn bs_antennas(&self) -> usize {
        self.g.cols()
    }

    pub fn ris_elements(&self) -> usize {
        self.g.rows()
    }

    pub fn users(&self) -> usize {
        self.h_r.len()
    }

    /// Composite channels `H = [h_1 .. h_K]` (M x K) under configuration `rc`.
    pub fn composite_matrix(&self, rc: &RcConfig) -> Result<ComplexMatrix> {
        let columns = self
            .h_r
            .iter()
            .zip(&self.h_d)
            .map(|(h_r, h_d)| composite_channel(&self.g, h_r, h_d, rc))
            .collect::<Result<Vec<_>>>()?;
        ComplexMatrix::from_columns(&columns)
    }
}

/// `C0 (d/d0)^-alpha` as a linear power gain.
pub fn pathloss_linear(d: f64, p: &LinkParams) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(10f64.powf(p.reference_loss_db / 10.0) * (d / p.reference_distance).powf(-p.pathloss_exponent))
}

fn check_sine(s: f64, what: &str) -> Result<()> {
    if !(-1.0..=1.0).contains(&s) {
        return Err(Error::Domain(format!("{what} sine {s} outside [-1, 1]")));
    }
    Ok(())
}

fn unit_phasor(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

pub fn steering_ula(m: usize, spacing: f64, sin_angle: f64) -> Result<ComplexVector> {
    if m == 0 {
        return Err(Error::Domain("array needs at least one element".into()));
    }
    check_sine(sin_angle, "angle")?;
    Ok(ComplexVector::from_vec_unchecked(
        (0..m)
            .map(|i| unit_phasor(2.0 * PI * spacing * i as f64 * sin_angle))
            .collect(),
    ))
}

pub fn steering_upa(
    rows: usize,
    cols: usize,
    spacing: f64,
    azimuth_sin: f64,
    elevation_sin: f64,
) -> Result<ComplexVector> {
    if rows == 0 || cols == 0 {
        return Err(Error::Domain("array needs at least one element".into()));
    }
    check_sine(azimuth_sin, "azimuth")?;
    check_sine(elevation_sin, "elevation")?;
    let mut v = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            v.push(unit_phasor(
                2.0 * PI * spacing * (r as f64 * elevation_sin + c as f64 * azimuth_sin),
            ));
        }
    }
    Ok(ComplexVector::from_vec_unchecked(v))
}

fn bs_steering(geom: &SystemGeometry, target: &Point3) -> Result<ComplexVector> {
    let u = geom.bs_position.direction_to(target);
    steering_ula(geom.bs_antennas, geom.bs_spacing, u[2].clamp(-1.0, 1.0))
}

fn ris_steering(geom: &SystemGeometry, target: &Point3) -> Result<ComplexVector> {
    let u = geom.ris_position.direction_to(target);
    steering_upa(
        geom.ris_rows,
        geom.ris_cols,
        geom.ris_spacing,
        u[1].clamp(-1.0, 1.0),
        u[2].clamp(-1.0, 1.0),
    )
}

pub fn build_statistical_csi(geom: &SystemGeometry, params: &ChannelParams) -> Result<StatisticalCsi> {
    geom.validate()?;
    params.bs_ris.validate("bs_ris")?;
    params.ris_user.validate("ris_user")?;
    params.bs_user.validate("bs_user")?;

    let los_bs_ris = ComplexMatrix::outer(
        &ris_steering(geom, &geom.bs_position)?,
        &bs_steering(geom, &geom.ris_position)?,
    );
    let los_ris_user = geom
        .user_positions
        .iter()
        .map(|u| ris_steering(geom, u))
        .collect::<Result<Vec<_>>>()?;
    let los_bs_user = geom
        .user_positions
        .iter()
        .map(|u| bs_steering(geom, u))
        .collect::<Result<Vec<_>>>()?;

    let beta_g = pathloss_linear(geom.bs_position.distance(&geom.ris_position), &params.bs_ris)?;
    let beta_r = geom
        .user_positions
        .iter()
        .map(|u| pathloss_linear(geom.ris_position.distance(u), &params.ris_user))
        .collect::<Result<Vec<_>>>()?;
    let beta_d = geom
        .user_positions
        .iter()
        .map(|u| pathloss_linear(geom.bs_position.distance(u), &params.bs_user))
        .collect::<Result<Vec<_>>>()?;

    Ok(StatisticalCsi {
        los_bs_ris,
        los_ris_user,
        los_bs_user,
        params: *params,
        beta_g,
        beta_r,
        beta_d,
    })
}

/// LoS and NLoS amplitude weights `(sqrt(F/(F+1)), sqrt(1/(F+1)))` for a
/// Rician factor given in dB. Infinite factors are handled exactly.
pub fn rician_weights(f_db: f64) -> (f64, f64) {
    let f = 10f64.powf(f_db / 10.0);
    if f.is_infinite() {
        (1.0, 0.0)
    } else {
        ((f / (f + 1.0)).sqrt(), (1.0 / (f + 1.0)).sqrt())
    }
}

/// One CN(0, 1) sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn rician_entry<R: Rng + ?Sized>(los: Complex64, weights: (f64, f64), amp: f64, rng: &mut R) -> Complex64 {
    let n = complex_gaussian(rng);
    (los * weights.0 + n * weights.1) * amp
}

pub fn sample_rician_vector<R: Rng + ?Sized>(
    los: &ComplexVector,
    f_db: f64,
    beta: f64,
    rng: &mut R,
) -> ComplexVector {
    let w = rician_weights(f_db);
    let amp = beta.sqrt();
    ComplexVector::from_vec_unchecked(los.iter().map(|&l| rician_entry(l, w, amp, rng)).collect())
}

pub fn sample_rician_matrix<R: Rng + ?Sized>(
    los: &ComplexMatrix,
    f_db: f64,
    beta: f64,
    rng: &mut R,
) -> ComplexMatrix {
    let w = rician_weights(f_db);
    let amp = beta.sqrt();
    let data = los.as_slice().iter().map(|&l| rician_entry(l, w, amp, rng)).collect();
    ComplexMatrix::new(los.rows(), los.cols(), data).expect("shape taken from an existing matrix")
}

pub fn sample_channel_realization<R: Rng + ?Sized>(csi: &StatisticalCsi, rng: &mut R) -> ChannelRealization {
    let p = &csi.params;
    let g = sample_rician_matrix(&csi.los_bs_ris, p.bs_ris.rician_factor_db, csi.beta_g, rng);
    let mut h_r = Vec::with_capacity(csi.users());
    let mut h_d = Vec::with_capacity(csi.users());
    for k in 0..csi.users() {
        h_r.push(sample_rician_vector(
            &csi.los_ris_user[k],
            p.ris_user.rician_factor_db,
            csi.beta_r[k],
            rng,
        ));
        h_d.push(if p.direct_link_blocked {
            ComplexVector::zeros(csi.bs_antennas())
        } else {
            sample_rician_vector(&csi.los_bs_user[k], p.bs_user.rician_factor_db, csi.beta_d[k], rng)
        });
    }
    ChannelRealization { g, h_r, h_d }
}

/// Composite channel `h_k` with `h_k^H = h_r^H diag(phi) G + h_d^H`.
pub fn composite_channel(
    g: &ComplexMatrix,
    h_r: &ComplexVector,
    h_d: &ComplexVector,
    rc: &RcConfig,
) -> Result<ComplexVector> {
    let (n, m) = (g.rows(), g.cols());
    if h_r.len() != n || rc.len() != n || h_d.len() != m {
        return Err(Error::Shape(format!(
            "G is {n}x{m}, h_r has {}, RC has {}, h_d has {}",
            h_r.len(),
            rc.len(),
            h_d.len()
        )));
    }
    let phi = rc.coefficients();
    let mut row: Vec<Complex64> = h_d.iter().map(Complex64::conj).collect();
    for (i, (&hr, &p)) in h_r.iter().zip(&phi).enumerate() {
        let a = hr.conj() * p;
        for (o, &gij) in row.iter_mut().zip(g.row(i)) {
            *o += a * gij;
        }
    }
    Ok(ComplexVector::from_vec_unchecked(row.into_iter().map(|z| z.conj()).collect()))
}
