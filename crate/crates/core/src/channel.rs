//! Large-scale fading statistics and correlated Rayleigh channel sampling.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, C64};
use crate::scenario::{wrap_distance, wrap_offset, Deployment, Point};

/// Boltzmann constant in J/K.
pub const BOLTZMANN: f64 = 1.381e-23;
/// Reference noise temperature in K.
pub const NOISE_TEMPERATURE: f64 = 290.0;

/// Three-slope pathloss with a COST-231 Hata fixed term.
///
/// The gain in dB is `-L - 10·n·log10(d / 1 km)` in the far region, with the
/// exponent dropping to `mid_exponent` below `d1` and to `near_exponent` below
/// `d0`. The intercepts are chosen so the curve is continuous at both breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossParams {
    pub carrier_mhz: f64,
    pub ap_height: f64,
    pub ue_height: f64,
    /// Near breakpoint in meters.
    pub d0: f64,
    /// Far breakpoint in meters.
    pub d1: f64,
    pub near_exponent: f64,
    pub mid_exponent: f64,
    pub far_exponent: f64,
    /// Distances below this floor (meters) are clamped.
    pub min_distance: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            carrier_mhz: 1900.0,
            ap_height: 15.0,
            ue_height: 1.65,
            d0: 10.0,
            d1: 50.0,
            near_exponent: 0.0,
            mid_exponent: 2.0,
            far_exponent: 3.5,
            min_distance: 1.0,
        }
    }
}

impl PathLossParams {
    /// COST-231 Hata fixed term L in dB.
    pub fn fixed_term_db(&self) -> f64 {
        let lf = self.carrier_mhz.log10();
        46.3 + 33.9 * lf - 13.82 * self.ap_height.log10() - (1.1 * lf - 0.7) * self.ue_height
            + (1.56 * lf - 0.8)
    }

    fn validate(&self) -> Result<()> {
        if !(self.min_distance > 0.0 && self.d0 > 0.0 && self.d0 < self.d1) {
            return Err(Error::config("pathloss breakpoints must satisfy 0 < d0 < d1 and min_distance > 0"));
        }
        if !(self.carrier_mhz > 0.0 && self.ap_height > 0.0) {
            return Err(Error::config("carrier frequency and AP height must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LargeScaleModelConfig {
    /// Shadow fading standard deviation in dB.
    pub shadow_std_db: f64,
    /// Weight of the AP-side component of the two-component shadowing.
    pub shadow_weight: f64,
    /// Shadowing decorrelation distance in meters.
    pub decorrelation_distance: f64,
    /// Angular standard deviation of the local scattering, degrees.
    pub asd_deg: f64,
    /// Antenna spacing in wavelengths.
    pub antenna_spacing: f64,
    pub path_loss: PathLossParams,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
}

impl Default for LargeScaleModelConfig {
    fn default() -> Self {
        Self {
            shadow_std_db: 8.0,
            shadow_weight: 0.5,
            decorrelation_distance: 100.0,
            asd_deg: 15.0,
            antenna_spacing: 0.5,
            path_loss: PathLossParams::default(),
            bandwidth_hz: 20e6,
            noise_figure_db: 9.0,
        }
    }
}

impl LargeScaleModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.shadow_std_db >= 0.0) {
            return Err(Error::config("shadow_std_db must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.shadow_weight) {
            return Err(Error::config("shadow_weight must lie in [0, 1]"));
        }
        if !(self.decorrelation_distance > 0.0) {
            return Err(Error::config("decorrelation_distance must be positive"));
        }
        if !(self.asd_deg >= 0.0 && self.antenna_spacing > 0.0) {
            return Err(Error::config("asd_deg must be non-negative and antenna_spacing positive"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth_hz must be positive"));
        }
        self.path_loss.validate()
    }

    /// Receiver noise power B·κ·T0·F in watts.
    pub fn noise_power(&self) -> f64 {
        self.bandwidth_hz * BOLTZMANN * NOISE_TEMPERATURE * db_to_linear(self.noise_figure_db)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Channel gain in dB (negative) at `distance` meters.
pub fn path_loss_db(distance: f64, params: &PathLossParams) -> f64 {
    let d = distance.max(params.min_distance);
    let log_km = |x: f64| (x / 1000.0).log10();
    let far = |x: f64| -params.fixed_term_db() - 10.0 * params.far_exponent * log_km(x);
    let mid = |x: f64| far(params.d1) - 10.0 * params.mid_exponent * (log_km(x) - log_km(params.d1));
    if d > params.d1 {
        far(d)
    } else if d > params.d0 {
        mid(d)
    } else {
        mid(params.d0) - 10.0 * params.near_exponent * (log_km(d) - log_km(params.d0))
    }
}

/// Zero-mean unit-variance Gaussian field over `positions` with correlation
/// `exp(-d / decorrelation_distance)`, `d` the wrap-around distance.
pub fn correlated_gaussian_field<R: Rng + ?Sized>(
    positions: &[Point],
    side: f64,
    decorrelation_distance: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let factor = field_factor(positions, side, decorrelation_distance)?;
    Ok(sample_field(&factor, rng))
}

/// Square-root factor of the exponential correlation matrix over `positions`.
pub fn field_factor(positions: &[Point], side: f64, decorrelation_distance: f64) -> Result<DMatrix<f64>> {
    let n = positions.len();
    let corr = DMatrix::from_fn(n, n, |i, j| {
        (-wrap_distance(positions[i], positions[j], side) / decorrelation_distance).exp()
    });
    let eig = corr.symmetric_eigen();
    let tol = 1e-6;
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -tol {
            return Err(Error::numerical(format!(
                "shadowing correlation matrix is not positive semidefinite (eigenvalue {lambda:e})"
            )));
        }
        scaled.column_mut(j).scale_mut(lambda.max(0.0).sqrt());
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

fn sample_field<R: Rng + ?Sized>(factor: &DMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let n = factor.nrows();
    let z = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    (factor * z).iter().copied().collect()
}

/// Shadow fading in dB for every AP-user pair, indexed `m * K + k`.
pub fn shadowing_field<R: Rng + ?Sized>(
    deployment: &Deployment,
    config: &LargeScaleModelConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (m, k) = (deployment.num_aps(), deployment.num_users());
    if config.shadow_std_db == 0.0 {
        return Ok(vec![0.0; m * k]);
    }
    let side = deployment.area_side;
    let a = correlated_gaussian_field(&deployment.ap_positions, side, config.decorrelation_distance, rng)?;
    let b = correlated_gaussian_field(&deployment.ue_positions, side, config.decorrelation_distance, rng)?;
    let (wa, wb) = (config.shadow_weight.sqrt(), (1.0 - config.shadow_weight).sqrt());
    let mut out = Vec::with_capacity(m * k);
    for am in &a {
        for bk in &b {
            out.push(config.shadow_std_db * (wa * am + wb * bk));
        }
    }
    Ok(out)
}

/// Gaussian local scattering correlation of a half-wavelength-style ULA.
///
/// `nominal_angle` is in radians, `asd_deg` in degrees, `spacing` in wavelengths.
pub fn spatial_correlation(nominal_angle: f64, asd_deg: f64, n: usize, beta: f64, spacing: f64) -> CMatrix {
    let asd = asd_deg.to_radians();
    let (sin, cos) = nominal_angle.sin_cos();
    let column: Vec<C64> = (0..n)
        .map(|dist| {
            let phase = 2.0 * PI * spacing * dist as f64;
            let damping = (-(asd * asd) / 2.0 * (phase * cos).powi(2)).exp();
            C64::from_polar(beta * damping, phase * sin)
        })
        .collect();
    CMatrix::from_fn(n, n, |l, m| if l >= m { column[l - m] } else { column[m - l].conj() })
}

/// Second-order statistics of every AP-user channel.
#[derive(Debug, Clone)]
pub struct ChannelStatistics {
    num_aps: usize,
    num_users: usize,
    num_antennas: usize,
    r: Vec<CMatrix>,
    r_sqrt: Vec<CMatrix>,
    beta: Vec<f64>,
    noise_power: f64,
}

impl ChannelStatistics {
    /// Wraps correlation matrices indexed `m * num_users + k`.
    ///
    /// Each matrix must be Hermitian PSD; negative eigenvalues within
    /// `1e-10 · tr(R)/N` are clipped, larger ones are rejected.
    pub fn new(num_aps: usize, num_users: usize, r: Vec<CMatrix>, noise_power: f64) -> Result<Self> {
        if r.len() != num_aps * num_users || r.is_empty() {
            return Err(Error::config("expected one correlation matrix per AP-user pair"));
        }
        if !(noise_power > 0.0) {
            return Err(Error::config("noise power must be positive"));
        }
        let n = r[0].nrows();
        let mut beta = Vec::with_capacity(r.len());
        let mut r_sqrt = Vec::with_capacity(r.len());
        for (idx, mat) in r.iter().enumerate() {
            if mat.nrows() != n || mat.ncols() != n {
                return Err(Error::config("correlation matrices must all be N×N"));
            }
            let b = linalg::real_trace(mat) / n as f64;
            if !(b >= 0.0) || linalg::hermitian_defect(mat) > 1e-9 * b.max(f64::MIN_POSITIVE) {
                return Err(Error::numerical(format!("correlation matrix {idx} is not Hermitian")));
            }
            beta.push(b);
            r_sqrt.push(linalg::psd_sqrt(mat, 1e-10 * b)?);
        }
        Ok(Self { num_aps, num_users, num_antennas: n, r, r_sqrt, beta, noise_power })
    }

    pub fn num_aps(&self) -> usize {
        self.num_aps
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn r(&self, m: usize, k: usize) -> &CMatrix {
        &self.r[m * self.num_users + k]
    }

    pub fn r_sqrt(&self, m: usize, k: usize) -> &CMatrix {
        &self.r_sqrt[m * self.num_users + k]
    }

    pub fn beta(&self, m: usize, k: usize) -> f64 {
        self.beta[m * self.num_users + k]
    }

    /// β_{·,k}: large-scale fading from every AP to user `k`.
    pub fn beta_column(&self, k: usize) -> Vec<f64> {
        (0..self.num_aps).map(|m| self.beta(m, k)).collect()
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
}

/// Builds the statistics of a deployment: pathloss, shadowing and local scattering.
pub fn channel_stats<R: Rng + ?Sized>(
    deployment: &Deployment,
    config: &LargeScaleModelConfig,
    num_antennas: usize,
    rng: &mut R,
) -> Result<ChannelStatistics> {
    config.validate()?;
    let shadow = shadowing_field(deployment, config, rng)?;
    let (m_count, k_count) = (deployment.num_aps(), deployment.num_users());
    let mut r = Vec::with_capacity(m_count * k_count);
    for m in 0..m_count {
        for k in 0..k_count {
            let [dx, dy] = wrap_offset(deployment.ap_positions[m], deployment.ue_positions[k], deployment.area_side);
            let distance = dx.hypot(dy);
            let beta_db = path_loss_db(distance, &config.path_loss) + shadow[m * k_count + k];
            let angle = dy.atan2(dx);
            r.push(spatial_correlation(angle, config.asd_deg, num_antennas, db_to_linear(beta_db), config.antenna_spacing));
        }
    }
    ChannelStatistics::new(m_count, k_count, r, config.noise_power())
}

/// One channel draw for every AP-user pair, indexed `m * K + k`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    num_users: usize,
    pub h: Vec<CVector>,
}

impl ChannelRealization {
    pub fn get(&self, m: usize, k: usize) -> &CVector {
        &self.h[m * self.num_users + k]
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }
}

/// Draws H_{m,k} = R_{m,k}^{1/2} g with g ~ CN(0, I), independently per pair.
pub fn sample_channel<R: Rng + ?Sized>(stats: &ChannelStatistics, rng: &mut R) -> ChannelRealization {
    let n = stats.num_antennas();
    let h = stats
        .r_sqrt
        .iter()
        .map(|s| {
            let g = CVector::from_fn(n, |_, _| linalg::complex_normal(rng));
            s * g
        })
        .collect();
    ChannelRealization { num_users: stats.num_users(), h }
}
