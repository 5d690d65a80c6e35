//! System configuration, device geometry, path loss and receiver front-ends.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_lin, lin_to_db};

/// Default RAQR-over-RF gain-to-noise advantage used to calibrate the
/// default front-ends.
pub const DEFAULT_PILOT_GAIN_DB: f64 = 26.0;

/// Default device antenna and processing noise variances (W).
pub const DEFAULT_DEVICE_NOISE: f64 = 1.0e-6;

/// Scalar system parameters of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Antennas at the transmitter / vapor cells at the receiver.
    pub m: usize,
    /// Number of devices.
    pub k: usize,
    /// Pilot length in symbols.
    pub tau: usize,
    /// Coherence block length in symbols.
    pub t: usize,
    /// Downlink power budget (W).
    pub ps_max: f64,
    pub eta_eh: f64,
    /// Required uplink rate per device (bit/s/Hz).
    pub rreq_ul: Vec<f64>,
    /// Required downlink rate per device (bit/s/Hz).
    pub rreq_dl: Vec<f64>,
    /// Downlink bandwidth factor multiplying the downlink rate.
    pub bandwidth: f64,
    /// Carrier frequency in GHz.
    pub fc_ghz: f64,
    /// Device RF antenna noise variance (W).
    pub sigma2_rf: Vec<f64>,
    /// Device baseband processing noise variance (W).
    pub sigma2_ks: Vec<f64>,
    /// Uplink battery budget of the battery-powered baselines (dBm).
    pub battery_dbm: f64,
}

impl SystemConfig {
    /// Table I parameters with the default noise calibration.
    pub fn table_one() -> Self {
        let k = 10;
        let noise = DEFAULT_DEVICE_NOISE;
        SystemConfig {
            m: 100,
            k,
            tau: 10,
            t: 400,
            ps_max: 50.0,
            eta_eh: 0.2,
            rreq_ul: vec![0.2; k],
            rreq_dl: vec![1.0; k],
            bandwidth: 1.0,
            fc_ghz: 3.0,
            sigma2_rf: vec![noise; k],
            sigma2_ks: vec![noise; k],
            battery_dbm: 5.0,
        }
    }

    /// Same parameters with a different device count; per-device vectors are
    /// resized by repeating their first entry.
    pub fn with_devices(&self, k: usize) -> Self {
        let resize = |v: &[f64]| vec![v.first().copied().unwrap_or(0.0); k];
        SystemConfig {
            k,
            tau: self.tau.max(k),
            rreq_ul: resize(&self.rreq_ul),
            rreq_dl: resize(&self.rreq_dl),
            sigma2_rf: resize(&self.sigma2_rf),
            sigma2_ks: resize(&self.sigma2_ks),
            ..self.clone()
        }
    }

    /// Symbols left for data after the pilot phase, `T - K`.
    pub fn data_symbols(&self) -> usize {
        self.t.saturating_sub(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::Config("M and K must be at least 1".into()));
        }
        if self.m <= self.k {
            return Err(Error::Config(format!(
                "M = {} must exceed K = {}",
                self.m, self.k
            )));
        }
        if self.tau < self.k {
            return Err(Error::InvalidPilot {
                tau: self.tau,
                k: self.k,
            });
        }
        if self.t <= self.tau {
            return Err(Error::Config(format!(
                "T = {} must exceed tau = {}",
                self.t, self.tau
            )));
        }
        if !(self.eta_eh > 0.0 && self.eta_eh <= 1.0) {
            return Err(Error::Config(format!(
                "eta_EH = {} not in (0, 1]",
                self.eta_eh
            )));
        }
        if !(self.ps_max > 0.0 && self.bandwidth > 0.0 && self.fc_ghz > 0.0) {
            return Err(Error::Config(
                "Ps_max, bandwidth and fc must be positive".into(),
            ));
        }
        for (name, v) in [
            ("rreq_ul", &self.rreq_ul),
            ("rreq_dl", &self.rreq_dl),
            ("sigma2_rf", &self.sigma2_rf),
            ("sigma2_ks", &self.sigma2_ks),
        ] {
            if v.len() != self.k {
                return Err(Error::Config(format!(
                    "{name} has {} entries, expected K = {}",
                    v.len(),
                    self.k
                )));
            }
        }
        if self.rreq_ul.iter().chain(&self.rreq_dl).any(|&r| !(r >= 0.0)) {
            return Err(Error::Config("required rates must be >= 0".into()));
        }
        if self.sigma2_rf.iter().chain(&self.sigma2_ks).any(|&s| !(s > 0.0)) {
            return Err(Error::Config("noise variances must be > 0".into()));
        }
        Ok(())
    }

    /// Battery budget of the battery-powered baselines in watts.
    pub fn battery_watts(&self) -> f64 {
        crate::units::dbm_to_watts(self.battery_dbm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverKind {
    Raqr,
    Rf,
}

/// Aggregate receiver gain triple: effective gain, `|Phi|^2`, noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontEnd {
    pub kind: ReceiverKind,
    pub rho: f64,
    pub phi2: f64,
    pub sigma2: f64,
}

impl FrontEnd {
    pub fn raqr(rho: f64, phi2: f64, sigma2: f64) -> Result<Self> {
        let fe = FrontEnd {
            kind: ReceiverKind::Raqr,
            rho,
            phi2,
            sigma2,
        };
        fe.validate()?;
        Ok(fe)
    }

    /// Conventional RF receiver; `|Phi|^2` is exactly one.
    pub fn rf(rho: f64, sigma2: f64) -> Result<Self> {
        let fe = FrontEnd {
            kind: ReceiverKind::Rf,
            rho,
            phi2: 1.0,
            sigma2,
        };
        fe.validate()?;
        Ok(fe)
    }

    pub fn default_rf() -> Self {
        FrontEnd {
            kind: ReceiverKind::Rf,
            rho: 1.0e3,
            phi2: 1.0,
            sigma2: 3.0e-7,
        }
    }

    /// RAQR calibrated so that its gain-to-noise ratio exceeds the default
    /// RF receiver by [`DEFAULT_PILOT_GAIN_DB`].
    pub fn default_raqr() -> Self {
        let rf = Self::default_rf();
        let (rho, phi2) = (1.0e3, 0.5);
        let sigma2 = rho * phi2 / (rf.gain_to_noise() * db_to_lin(DEFAULT_PILOT_GAIN_DB));
        FrontEnd {
            kind: ReceiverKind::Raqr,
            rho,
            phi2,
            sigma2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Config(format!("rho = {} must be > 0", self.rho)));
        }
        if !(self.phi2 > 0.0 && self.phi2 <= 1.0) {
            return Err(Error::Config(format!(
                "|Phi|^2 = {} not in (0, 1]",
                self.phi2
            )));
        }
        if !(self.sigma2 > 0.0) {
            return Err(Error::Config(format!(
                "sigma2 = {} must be > 0",
                self.sigma2
            )));
        }
        if self.kind == ReceiverKind::Rf && self.phi2 != 1.0 {
            return Err(Error::Config("RF front-end requires |Phi|^2 = 1".into()));
        }
        Ok(())
    }

    /// `rho |Phi|^2 / sigma^2`.
    #[inline]
    pub fn gain_to_noise(&self) -> f64 {
        self.rho * self.phi2 / self.sigma2
    }

    /// Normalized noise floor `sigma^2 / (rho |Phi|^2)`.
    #[inline]
    pub fn normalized_noise(&self) -> f64 {
        self.sigma2 / (self.rho * self.phi2)
    }
}

/// How much less pilot power the first front-end needs for the same
/// estimation quality as the second, in dB.
pub fn pilot_power_gain_db(raqr: &FrontEnd, rf: &FrontEnd) -> f64 {
    lin_to_db(raqr.gain_to_noise() / rf.gain_to_noise())
}

/// Large-scale fading in dB: `-32.4 - 20 lg(d) - 20 lg(fc)`.
pub fn path_loss_db(distance_m: f64, fc_ghz: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !(fc_ghz > 0.0) {
        return Err(Error::Domain(format!(
            "path loss needs positive distance and frequency (d = {distance_m}, fc = {fc_ghz})"
        )));
    }
    Ok(-32.4 - 20.0 * distance_m.log10() - 20.0 * fc_ghz.log10())
}

/// Linear large-scale fading coefficient.
pub fn path_gain(distance_m: f64, fc_ghz: f64) -> Result<f64> {
    path_loss_db(distance_m, fc_ghz).map(db_to_lin)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Radius of the disk holding the devices (m).
    pub region_radius: f64,
    /// Distance from the disk center to the base station (m).
    pub bs_distance: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            region_radius: 50.0,
            bs_distance: 150.0,
        }
    }
}

/// Device layout. The device disk is centered at the origin and the base
/// station sits on the positive x-axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub device_positions: Vec<[f64; 2]>,
    pub bs_position: [f64; 2],
    pub region_radius: f64,
    pub bs_distance: f64,
}

impl Geometry {
    pub fn distances(&self) -> Vec<f64> {
        let [bx, by] = self.bs_position;
        self.device_positions
            .iter()
            .map(|[x, y]| (x - bx).hypot(y - by))
            .collect()
    }

    pub fn large_scale_fading(&self, fc_ghz: f64) -> Result<Vec<f64>> {
        self.distances()
            .into_iter()
            .map(|d| path_gain(d, fc_ghz))
            .collect()
    }
}

/// Drops `k` devices uniformly over the disk.
pub fn sample_geometry<R: Rng + ?Sized>(rng: &mut R, cfg: &GeometryConfig, k: usize) -> Geometry {
    let device_positions = (0..k)
        .map(|_| {
            let u: f64 = rng.random();
            let theta = 2.0 * PI * rng.random::<f64>();
            let r = cfg.region_radius * u.sqrt();
            [r * theta.cos(), r * theta.sin()]
        })
        .collect();
    Geometry {
        device_positions,
        bs_position: [cfg.bs_distance, 0.0],
        region_radius: cfg.region_radius,
        bs_distance: cfg.bs_distance,
    }
}

/// Phase structure of the receive array. Only the Monte-Carlo signal path
/// uses it: the unit-modulus matrix `D` and the phase of `Phi` cancel in every
/// closed-form statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayPhases {
    /// Arrival angle of the local oscillator (rad).
    pub lo_angle: f64,
    /// Cell spacing in wavelengths.
    pub spacing_wavelengths: f64,
    /// Phase of `Phi` (rad).
    pub phi_phase: f64,
}

impl Default for ArrayPhases {
    fn default() -> Self {
        ArrayPhases {
            lo_angle: 0.0,
            spacing_wavelengths: 0.5,
            phi_phase: 0.0,
        }
    }
}

impl ArrayPhases {
    /// Diagonal of `D`: `exp(-j 2 pi m d sin(theta) / lambda)`.
    pub fn d_diagonal(&self, m: usize) -> Vec<num_complex::Complex64> {
        let step = -2.0 * PI * self.spacing_wavelengths * self.lo_angle.sin();
        (0..m)
            .map(|i| num_complex::Complex64::from_polar(1.0, step * i as f64))
            .collect()
    }
}

/// Everything needed to build a scenario: system parameters, both receiver
/// front-ends, the layout generator and the array phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub system: SystemConfig,
    pub raqr: FrontEnd,
    pub rf: FrontEnd,
    pub geometry: GeometryConfig,
    pub array: ArrayPhases,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            system: SystemConfig::table_one(),
            raqr: FrontEnd::default_raqr(),
            rf: FrontEnd::default_rf(),
            geometry: GeometryConfig::default(),
            array: ArrayPhases::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.raqr.validate()?;
        self.rf.validate()?;
        if !(self.geometry.region_radius >= 0.0) {
            return Err(Error::Config("region_radius must be >= 0".into()));
        }
        if !(self.geometry.bs_distance > self.geometry.region_radius) {
            return Err(Error::Config(
                "bs_distance must exceed region_radius so that every d_k > 0".into(),
            ));
        }
        Ok(())
    }

    /// Draws a layout and turns it into a scenario.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Scenario> {
        let geo = sample_geometry(rng, &self.geometry, self.system.k);
        Scenario::from_geometry(self, &geo)
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| e.to_string())?;
        let cfg = file.resolve()?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|msg| Error::Parse {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn to_toml_string(&self) -> String {
        let file = ConfigFile::from_config(self);
        toml::to_string(&file).expect("config serializes")
    }
}

/// Large-scale fading of one layout together with the parameters that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: SystemConfig,
    pub raqr: FrontEnd,
    pub rf: FrontEnd,
    pub beta: Vec<f64>,
}

impl Scenario {
    pub fn from_geometry(cfg: &ScenarioConfig, geo: &Geometry) -> Result<Self> {
        let beta = geo.large_scale_fading(cfg.system.fc_ghz)?;
        Ok(Scenario {
            system: cfg.system.clone(),
            raqr: cfg.raqr,
            rf: cfg.rf,
            beta,
        })
    }

    pub fn with_beta(cfg: &ScenarioConfig, beta: Vec<f64>) -> Self {
        Scenario {
            system: cfg.system.clone(),
            raqr: cfg.raqr,
            rf: cfg.rf,
            beta,
        }
    }

    pub fn k(&self) -> usize {
        self.system.k
    }
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

/// A per-device value: either one number for every device or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerDevice {
    Uniform(f64),
    List(Vec<f64>),
}

impl PerDevice {
    fn resolve(&self, k: usize, name: &str) -> std::result::Result<Vec<f64>, String> {
        match self {
            PerDevice::Uniform(v) => Ok(vec![*v; k]),
            PerDevice::List(v) if v.len() == k => Ok(v.clone()),
            PerDevice::List(v) => Err(format!("{name}: {} entries for K = {k}", v.len())),
        }
    }

    fn compact(v: &[f64]) -> Self {
        match v.first() {
            Some(&x) if v.iter().all(|&y| y == x) => PerDevice::Uniform(x),
            _ => PerDevice::List(v.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SystemSection {
    m: usize,
    k: usize,
    tau: Option<usize>,
    t: usize,
    ps_max: f64,
    eta_eh: f64,
    rreq_ul: PerDevice,
    rreq_dl: PerDevice,
    bandwidth: f64,
    fc_ghz: f64,
    sigma2_rf: Option<PerDevice>,
    sigma2_ks: Option<PerDevice>,
    battery_dbm: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let s = SystemConfig::table_one();
        SystemSection {
            m: s.m,
            k: s.k,
            tau: None,
            t: s.t,
            ps_max: s.ps_max,
            eta_eh: s.eta_eh,
            rreq_ul: PerDevice::Uniform(s.rreq_ul[0]),
            rreq_dl: PerDevice::Uniform(s.rreq_dl[0]),
            bandwidth: s.bandwidth,
            fc_ghz: s.fc_ghz,
            sigma2_rf: None,
            sigma2_ks: None,
            battery_dbm: s.battery_dbm,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RaqrSection {
    rho: f64,
    phi2: f64,
    sigma2: f64,
}

impl Default for RaqrSection {
    fn default() -> Self {
        let fe = FrontEnd::default_raqr();
        RaqrSection {
            rho: fe.rho,
            phi2: fe.phi2,
            sigma2: fe.sigma2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RfSection {
    rho: f64,
    sigma2: f64,
}

impl Default for RfSection {
    fn default() -> Self {
        let fe = FrontEnd::default_rf();
        RfSection {
            rho: fe.rho,
            sigma2: fe.sigma2,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FrontendSection {
    raqr: RaqrSection,
    rf: RfSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    system: SystemSection,
    frontend: FrontendSection,
    geometry: GeometryConfig,
    array: ArrayPhases,
}

impl ConfigFile {
    fn resolve(&self) -> std::result::Result<ScenarioConfig, String> {
        let s = &self.system;
        let k = s.k;
        let rf = FrontEnd {
            kind: ReceiverKind::Rf,
            rho: self.frontend.rf.rho,
            phi2: 1.0,
            sigma2: self.frontend.rf.sigma2,
        };
        let raqr = FrontEnd {
            kind: ReceiverKind::Raqr,
            rho: self.frontend.raqr.rho,
            phi2: self.frontend.raqr.phi2,
            sigma2: self.frontend.raqr.sigma2,
        };
        let rf_noise = PerDevice::Uniform(DEFAULT_DEVICE_NOISE);
        let system = SystemConfig {
            m: s.m,
            k,
            tau: s.tau.unwrap_or(k),
            t: s.t,
            ps_max: s.ps_max,
            eta_eh: s.eta_eh,
            rreq_ul: s.rreq_ul.resolve(k, "rreq_ul")?,
            rreq_dl: s.rreq_dl.resolve(k, "rreq_dl")?,
            bandwidth: s.bandwidth,
            fc_ghz: s.fc_ghz,
            sigma2_rf: s.sigma2_rf.as_ref().unwrap_or(&rf_noise).resolve(k, "sigma2_rf")?,
            sigma2_ks: s.sigma2_ks.as_ref().unwrap_or(&rf_noise).resolve(k, "sigma2_ks")?,
            battery_dbm: s.battery_dbm,
        };
        Ok(ScenarioConfig {
            system,
            raqr,
            rf,
            geometry: self.geometry,
            array: self.array,
        })
    }

    fn from_config(cfg: &ScenarioConfig) -> Self {
        let s = &cfg.system;
        ConfigFile {
            system: SystemSection {
                m: s.m,
                k: s.k,
                tau: Some(s.tau),
                t: s.t,
                ps_max: s.ps_max,
                eta_eh: s.eta_eh,
                rreq_ul: PerDevice::compact(&s.rreq_ul),
                rreq_dl: PerDevice::compact(&s.rreq_dl),
                bandwidth: s.bandwidth,
                fc_ghz: s.fc_ghz,
                sigma2_rf: Some(PerDevice::compact(&s.sigma2_rf)),
                sigma2_ks: Some(PerDevice::compact(&s.sigma2_ks)),
                battery_dbm: s.battery_dbm,
            },
            frontend: FrontendSection {
                raqr: RaqrSection {
                    rho: cfg.raqr.rho,
                    phi2: cfg.raqr.phi2,
                    sigma2: cfg.raqr.sigma2,
                },
                rf: RfSection {
                    rho: cfg.rf.rho,
                    sigma2: cfg.rf.sigma2,
                },
            },
            geometry: cfg.geometry,
            array: cfg.array,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_values() {
        assert!((path_loss_db(1.0, 1.0).unwrap() + 32.4).abs() < 1e-12);
        assert!((path_loss_db(100.0, 1.0).unwrap() + 72.4).abs() < 1e-12);
        let v = path_loss_db(150.0, 3.0).unwrap();
        // second route: log of the product
        let alt = -32.4 - 20.0 * (150.0f64 * 3.0).log10();
        assert!((v - alt).abs() < 1e-12);
        assert!((v + 85.464_25).abs() < 1e-5, "{v}");
    }

    #[test]
    fn path_loss_rejects_bad_inputs() {
        assert!(matches!(path_loss_db(0.0, 3.0), Err(Error::Domain(_))));
        assert!(matches!(path_loss_db(10.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn path_loss_is_monotone() {
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let v = path_loss_db(i as f64, 3.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(path_loss_db(10.0, 5.0).unwrap() < path_loss_db(10.0, 2.0).unwrap());
    }

    #[test]
    fn degenerate_disk_puts_everyone_at_bs_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = GeometryConfig {
            region_radius: 0.0,
            bs_distance: 150.0,
        };
        let geo = sample_geometry(&mut rng, &cfg, 5);
        assert!(geo.distances().iter().all(|&d| (d - 150.0).abs() < 1e-12));
    }

    #[test]
    fn geometry_replays_with_seed() {
        let cfg = GeometryConfig::default();
        let a = sample_geometry(&mut ChaCha8Rng::seed_from_u64(9), &cfg, 10);
        let b = sample_geometry(&mut ChaCha8Rng::seed_from_u64(9), &cfg, 10);
        assert_eq!(a, b);
    }

    #[test]
    fn mean_radius_is_two_thirds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = GeometryConfig::default();
        let geo = sample_geometry(&mut rng, &cfg, 10_000);
        let mean = geo
            .device_positions
            .iter()
            .map(|[x, y]| x.hypot(*y))
            .sum::<f64>()
            / 10_000.0;
        let expected = 2.0 * cfg.region_radius / 3.0;
        assert!((mean - expected).abs() / expected < 0.01, "{mean}");
    }

    #[test]
    fn radial_chi_square_uniformity() {
        // Equal-area rings: radius boundaries R sqrt(i/n).
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = GeometryConfig::default();
        let n = 100_000;
        let bins = 10;
        let geo = sample_geometry(&mut rng, &cfg, n);
        let mut counts = vec![0usize; bins];
        for [x, y] in &geo.device_positions {
            let frac = (x * x + y * y) / (cfg.region_radius * cfg.region_radius);
            counts[((frac * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let expected = n as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square 0.99 quantile with 9 degrees of freedom
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn pilot_gain() {
        let rf = FrontEnd::default_rf();
        assert!(pilot_power_gain_db(&rf, &rf).abs() < 1e-12);
        let raqr = FrontEnd::default_raqr();
        assert!((pilot_power_gain_db(&raqr, &rf) - 26.0).abs() < 1e-9);
        let hundred = FrontEnd::raqr(rf.rho, 1.0, rf.sigma2 / 100.0).unwrap();
        assert!((pilot_power_gain_db(&hundred, &rf) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn front_end_validation() {
        assert!(FrontEnd::raqr(1.0, 1.5, 1.0).is_err());
        assert!(FrontEnd::raqr(0.0, 0.5, 1.0).is_err());
        assert!(FrontEnd::rf(1.0, 0.0).is_err());
        let mut rf = FrontEnd::default_rf();
        rf.phi2 = 0.5;
        assert!(rf.validate().is_err());
    }

    #[test]
    fn system_validation() {
        let mut s = SystemConfig::table_one();
        s.validate().unwrap();
        s.m = 10;
        assert!(s.validate().is_err());
        let mut s = SystemConfig::table_one();
        s.tau = 5;
        assert!(matches!(s.validate(), Err(Error::InvalidPilot { .. })));
        let mut s = SystemConfig::table_one();
        s.eta_eh = 1.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn config_file_round_trip_and_defaults() {
        let cfg = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        let text = "[system]\nm = 64\nk = 4\nrreq_ul = [0.1, 0.2, 0.3, 0.4]\n[frontend.rf]\nsigma2 = 2e-6\n[geometry]\nbs_distance = 200.0\n";
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.system.m, 64);
        assert_eq!(cfg.system.tau, 4);
        assert_eq!(cfg.system.rreq_ul, vec![0.1, 0.2, 0.3, 0.4]);
        assert_eq!(cfg.rf.sigma2, 2e-6);
        assert_eq!(cfg.system.sigma2_rf, vec![DEFAULT_DEVICE_NOISE; 4]);
        assert_eq!(cfg.geometry.bs_distance, 200.0);
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
        assert!(ScenarioConfig::from_toml_str("[system]\nbogus = 1\n").is_err());
        assert!(ScenarioConfig::from_toml_str("[system]\nk = 3\nrreq_ul = [1.0]\n").is_err());
    }
}
