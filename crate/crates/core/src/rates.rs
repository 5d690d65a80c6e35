//! Closed-form rate and harvested-energy lower bounds.

pub mod mc;

use serde::{Deserialize, Serialize};

use crate::channel::{equivalent_snr, error_variance};
use crate::error::{Error, Result};
use crate::scenario::{FrontEnd, ReceiverKind, Scenario, SystemConfig};

/// Linear processing pair: MRC uplink with MRT downlink, or ZF on both links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[serde(alias = "mrt")]
    Mrc,
    Zf,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Mrc => "mrc",
            Scheme::Zf => "zf",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mrc" | "mrt" | "mrc_mrt" => Ok(Scheme::Mrc),
            "zf" => Ok(Scheme::Zf),
            other => Err(format!("unknown scheme '{other}' (expected mrc or zf)")),
        }
    }
}

/// Decision variables of the joint design.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub p_p: Vec<f64>,
    pub p_d: Vec<f64>,
    pub p_s: Vec<f64>,
    pub alpha: Vec<f64>,
    pub t_u: usize,
    pub t_d: usize,
}

impl Allocation {
    pub fn uniform(k: usize, p_p: f64, p_d: f64, p_s: f64, alpha: f64, t_u: usize, t_d: usize) -> Self {
        Allocation {
            p_p: vec![p_p; k],
            p_d: vec![p_d; k],
            p_s: vec![p_s; k],
            alpha: vec![alpha; k],
            t_u,
            t_d,
        }
    }

    pub fn k(&self) -> usize {
        self.p_p.len()
    }

    /// Checks signs, the splitting box, the block budget and the power budget.
    pub fn validate(&self, sys: &SystemConfig) -> Result<()> {
        let k = sys.k;
        if [&self.p_p, &self.p_d, &self.p_s, &self.alpha]
            .iter()
            .any(|v| v.len() != k)
        {
            return Err(Error::Domain("allocation vectors must have length K".into()));
        }
        if self.p_p.iter().chain(&self.p_d).chain(&self.p_s).any(|&p| !(p >= 0.0)) {
            return Err(Error::Domain("powers must be >= 0".into()));
        }
        if self.alpha.iter().any(|&a| !(0.0..=1.0).contains(&a)) {
            return Err(Error::Domain("alpha must lie in [0, 1]".into()));
        }
        if self.t_u + self.t_d > sys.data_symbols() {
            return Err(Error::Domain(format!(
                "T_U + T_D = {} exceeds T - K = {}",
                self.t_u + self.t_d,
                sys.data_symbols()
            )));
        }
        let total: f64 = self.p_s.iter().sum();
        if total > sys.ps_max * (1.0 + 1e-9) {
            return Err(Error::Domain(format!(
                "sum p_s = {total} exceeds Ps_max = {}",
                sys.ps_max
            )));
        }
        Ok(())
    }
}

/// Parameters the closed forms need: system constants, the BS receiver
/// front-end, the device RF gain and the large-scale fading.
#[derive(Debug, Clone, Copy)]
pub struct LinkModel<'a> {
    pub sys: &'a SystemConfig,
    pub ul: &'a FrontEnd,
    pub rho_rf: f64,
    pub beta: &'a [f64],
}

impl Scenario {
    /// Closed-form model with the BS receiving through `kind`.
    pub fn link(&self, kind: ReceiverKind) -> LinkModel<'_> {
        LinkModel {
            sys: &self.system,
            ul: match kind {
                ReceiverKind::Raqr => &self.raqr,
                ReceiverKind::Rf => &self.rf,
            },
            rho_rf: self.rf.rho,
            beta: &self.beta,
        }
    }
}

impl LinkModel<'_> {
    #[inline]
    fn m(&self) -> f64 {
        self.sys.m as f64
    }

    fn m_minus_k(&self) -> Result<f64> {
        if self.sys.m <= self.sys.k {
            return Err(Error::Config(format!(
                "ZF needs M > K (M = {}, K = {})",
                self.sys.m, self.sys.k
            )));
        }
        Ok((self.sys.m - self.sys.k) as f64)
    }

    /// MMSE error variance of device `k`.
    #[inline]
    pub fn e(&self, k: usize, a: &Allocation) -> f64 {
        error_variance(self.beta[k], a.p_p[k], self.sys.tau, self.ul)
    }

    #[inline]
    pub fn gamma(&self, k: usize, a: &Allocation) -> f64 {
        equivalent_snr(self.beta[k], a.p_p[k], self.ul)
    }

    /// Shared factor `rho tau p^p beta^2 |Phi|^2 / (rho tau p^p beta |Phi|^2 + sigma^2)`,
    /// i.e. the estimate variance `beta - e`.
    #[inline]
    fn estimate_power(&self, k: usize, a: &Allocation) -> f64 {
        let fe = self.ul;
        let x = fe.rho * self.sys.tau as f64 * a.p_p[k] * self.beta[k] * fe.phi2;
        x * self.beta[k] / (x + fe.sigma2)
    }

    pub fn sinr_mrc_ul(&self, k: usize, a: &Allocation) -> f64 {
        let interf: f64 = a.p_d.iter().zip(self.beta).map(|(p, b)| p * b).sum();
        let den = interf + self.ul.normalized_noise();
        self.m() * a.p_d[k] * self.estimate_power(k, a) / den
    }

    pub fn sinr_zf_ul(&self, k: usize, a: &Allocation) -> Result<f64> {
        let mk = self.m_minus_k()?;
        let interf: f64 = (0..self.sys.k).map(|j| a.p_d[j] * self.e(j, a)).sum();
        let den = interf + self.ul.normalized_noise();
        Ok(mk * a.p_d[k] * self.estimate_power(k, a) / den)
    }

    fn total_downlink(&self, a: &Allocation) -> f64 {
        self.rho_rf * a.p_s.iter().sum::<f64>()
    }

    pub fn sinr_mrt_dl(&self, k: usize, a: &Allocation) -> f64 {
        let al = a.alpha[k];
        let num = self.rho_rf * a.p_s[k] * al * self.m() * self.estimate_power(k, a);
        let den = al * self.beta[k] * self.total_downlink(a)
            + al * self.sys.sigma2_rf[k]
            + self.sys.sigma2_ks[k];
        num / den
    }

    pub fn sinr_zf_dl(&self, k: usize, a: &Allocation) -> Result<f64> {
        let mk = self.m_minus_k()?;
        let al = a.alpha[k];
        let num = self.rho_rf * a.p_s[k] * al * mk * self.estimate_power(k, a);
        let den = al * self.e(k, a) * self.total_downlink(a)
            + al * self.sys.sigma2_rf[k]
            + self.sys.sigma2_ks[k];
        Ok(num / den)
    }

    fn harvest_scale(&self, k: usize, a: &Allocation) -> f64 {
        a.t_d as f64 / self.sys.t as f64 * self.sys.eta_eh * (1.0 - a.alpha[k])
    }

    /// Harvested-energy bound `G_k` per downlink symbol, before the
    /// `(T_D/T) eta (1 - alpha)` factor.
    pub fn harvest_gain(&self, scheme: Scheme, k: usize, a: &Allocation) -> Result<f64> {
        let own = self.rho_rf * a.p_s[k] * self.estimate_power(k, a);
        Ok(match scheme {
            Scheme::Mrc => own * self.m() + self.beta[k] * self.total_downlink(a),
            Scheme::Zf => own * self.m_minus_k()? + self.e(k, a) * self.total_downlink(a),
        })
    }

    pub fn energy_mrt(&self, k: usize, a: &Allocation) -> f64 {
        self.harvest_scale(k, a) * self.harvest_gain(Scheme::Mrc, k, a).expect("MRT has no M > K requirement")
    }

    pub fn energy_zf(&self, k: usize, a: &Allocation) -> Result<f64> {
        Ok(self.harvest_scale(k, a) * self.harvest_gain(Scheme::Zf, k, a)?)
    }

    pub fn sinr_ul(&self, scheme: Scheme, k: usize, a: &Allocation) -> Result<f64> {
        match scheme {
            Scheme::Mrc => Ok(self.sinr_mrc_ul(k, a)),
            Scheme::Zf => self.sinr_zf_ul(k, a),
        }
    }

    pub fn sinr_dl(&self, scheme: Scheme, k: usize, a: &Allocation) -> Result<f64> {
        match scheme {
            Scheme::Mrc => Ok(self.sinr_mrt_dl(k, a)),
            Scheme::Zf => self.sinr_zf_dl(k, a),
        }
    }

    pub fn energy(&self, scheme: Scheme, k: usize, a: &Allocation) -> Result<f64> {
        match scheme {
            Scheme::Mrc => Ok(self.energy_mrt(k, a)),
            Scheme::Zf => self.energy_zf(k, a),
        }
    }

    /// All per-device bounds for one allocation.
    pub fn bounds(&self, scheme: Scheme, a: &Allocation) -> Result<Vec<DeviceBounds>> {
        let t = self.sys.t;
        (0..self.sys.k)
            .map(|k| {
                let sinr_u = self.sinr_ul(scheme, k, a)?;
                let sinr_d = self.sinr_dl(scheme, k, a)?;
                Ok(DeviceBounds {
                    sinr_u,
                    sinr_d,
                    r_u: rate_lb(sinr_u, a.t_u, t, 1.0),
                    r_d: rate_lb(sinr_d, a.t_d, t, self.sys.bandwidth),
                    energy: self.energy(scheme, k, a)?,
                })
            })
            .collect()
    }

    pub fn sum_rate(&self, scheme: Scheme, a: &Allocation) -> Result<f64> {
        Ok(self.bounds(scheme, a)?.iter().map(|b| b.r_u + b.r_d).sum())
    }

    /// Uplink energy spent per block, `K p^p + T_U p^d`.
    pub fn uplink_energy(&self, k: usize, a: &Allocation) -> f64 {
        self.sys.k as f64 * a.p_p[k] + a.t_u as f64 * a.p_d[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceBounds {
    pub sinr_u: f64,
    pub sinr_d: f64,
    pub r_u: f64,
    pub r_d: f64,
    pub energy: f64,
}

/// `(T_active / T) B log2(1 + sinr)`.
#[inline]
pub fn rate_lb(sinr: f64, t_active: usize, t: usize, bandwidth: f64) -> f64 {
    t_active as f64 / t as f64 * bandwidth * sinr.log2_1p()
}

trait Log2p1 {
    fn log2_1p(self) -> f64;
}

impl Log2p1 for f64 {
    #[inline]
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// Approximate uplink rate advantage of a RAQR over an RF receiver when both
/// operate at very low SINR: `(T_U/T) log2(1 + SINR_RF g^2)` with `g` the
/// ratio of normalized gain-to-noise figures.
pub fn low_snr_gain(t_u: usize, t: usize, rf_sinr: f64, raqr: &FrontEnd, rf: &FrontEnd) -> f64 {
    let g = raqr.gain_to_noise() / rf.gain_to_noise();
    rate_lb(rf_sinr * g * g, t_u, t, 1.0)
}

/// True when every device is noise-limited under `fe`: both the pilot SNR
/// `tau gamma_k` and the aggregate uplink interference-to-noise ratio are below
/// `threshold`. The low-SINR approximation is only meaningful here.
pub fn low_snr_regime(model: &LinkModel<'_>, a: &Allocation, threshold: f64) -> bool {
    let fe = model.ul;
    let inr: f64 = a
        .p_d
        .iter()
        .zip(model.beta)
        .map(|(p, b)| p * b)
        .sum::<f64>()
        / fe.normalized_noise();
    inr < threshold
        && (0..model.sys.k).all(|k| model.sys.tau as f64 * model.gamma(k, a) < threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;
    use proptest::prelude::*;

    fn scenario(beta: Vec<f64>) -> Scenario {
        let mut cfg = ScenarioConfig::default();
        cfg.system = cfg.system.with_devices(beta.len());
        Scenario::with_beta(&cfg, beta)
    }

    fn alloc(k: usize) -> Allocation {
        Allocation::uniform(k, 1e-3, 2e-3, 2.0, 0.4, 150, 200)
    }

    /// Literal transcription of the uplink MRC bound.
    fn mrc_oracle(sc: &Scenario, k: usize, a: &Allocation) -> f64 {
        let fe = &sc.raqr;
        let (rho, phi2, s2, tau) = (fe.rho, fe.phi2, fe.sigma2, sc.system.tau as f64);
        let b = &sc.beta;
        let num = sc.system.m as f64 * a.p_d[k] * rho * tau * a.p_p[k] * b[k] * b[k] * phi2;
        let sum: f64 = (0..b.len()).map(|j| a.p_d[j] * b[j]).sum();
        num / ((sum + s2 / (phi2 * rho)) * (rho * tau * a.p_p[k] * b[k] * phi2 + s2))
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate_lb(0.0, 10, 20, 1.0), 0.0);
        assert!((rate_lb(1.0, 20, 20, 1.0) - 1.0).abs() < 1e-15);
        assert!((rate_lb(3.0, 10, 20, 1.0) - 1.0).abs() < 1e-15);
        assert!((rate_lb(3.0, 10, 20, 2.5) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn mrc_matches_transcription() {
        let sc = scenario(vec![1e-9, 3e-9, 5e-10]);
        let m = sc.link(ReceiverKind::Raqr);
        let mut a = alloc(3);
        a.p_d = vec![1e-3, 5e-3, 2e-4];
        for k in 0..3 {
            let v = m.sinr_mrc_ul(k, &a);
            assert!((v - mrc_oracle(&sc, k, &a)).abs() < 1e-12 * v);
        }
    }

    #[test]
    fn zero_powers_give_zero() {
        let sc = scenario(vec![1e-9, 2e-9]);
        let m = sc.link(ReceiverKind::Raqr);
        let mut a = alloc(2);
        a.p_d[0] = 0.0;
        assert_eq!(m.sinr_mrc_ul(0, &a), 0.0);
        assert_eq!(m.sinr_zf_ul(0, &a).unwrap(), 0.0);
        a.alpha[1] = 0.0;
        assert_eq!(m.sinr_mrt_dl(1, &a), 0.0);
        assert_eq!(m.sinr_zf_dl(1, &a).unwrap(), 0.0);
        a.alpha[1] = 1.0;
        assert_eq!(m.energy_mrt(1, &a), 0.0);
        assert_eq!(m.energy_zf(1, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_device_noiseless_mrc_is_m() {
        let mut sc = scenario(vec![1e-9]);
        sc.raqr.sigma2 = 1e-40;
        let m = sc.link(ReceiverKind::Raqr);
        let v = m.sinr_mrc_ul(0, &alloc(1));
        assert!((v - sc.system.m as f64).abs() < 1e-9, "{v}");
    }

    #[test]
    fn zf_perfect_csi_limit() {
        let sc = scenario(vec![1e-9, 2e-9]);
        let m = sc.link(ReceiverKind::Raqr);
        let mut a = alloc(2);
        a.p_p = vec![1e12; 2];
        let fe = sc.raqr;
        let want = (sc.system.m - 2) as f64 * a.p_d[0] * 1e-9 * fe.rho * fe.phi2 / fe.sigma2;
        let v = m.sinr_zf_ul(0, &a).unwrap();
        assert!((v - want).abs() / want < 1e-6);
        // downlink: interference vanishes with e -> 0
        let dl = m.sinr_zf_dl(0, &a).unwrap();
        let want_dl = sc.rf.rho * a.p_s[0] * a.alpha[0] * 98.0 * 1e-9
            / (a.alpha[0] * sc.system.sigma2_rf[0] + sc.system.sigma2_ks[0]);
        assert!((dl - want_dl).abs() / want_dl < 1e-6);
    }

    #[test]
    fn zf_needs_more_antennas() {
        let mut sc = scenario(vec![1e-9, 2e-9]);
        sc.system.m = 2;
        let m = sc.link(ReceiverKind::Raqr);
        assert!(matches!(m.sinr_zf_ul(0, &alloc(2)), Err(Error::Config(_))));
        assert!(matches!(m.energy_zf(0, &alloc(2)), Err(Error::Config(_))));
    }

    #[test]
    fn energy_without_csi() {
        let sc = scenario(vec![1e-9, 2e-9]);
        let m = sc.link(ReceiverKind::Raqr);
        let mut a = alloc(2);
        a.p_p = vec![0.0; 2];
        let want = a.t_d as f64 / sc.system.t as f64
            * sc.system.eta_eh
            * (1.0 - a.alpha[0])
            * 1e-9
            * sc.rf.rho
            * 4.0;
        assert!((m.energy_mrt(0, &a) - want).abs() < 1e-12 * want);
        // ZF with e = beta keeps only the leakage term, which equals MRT here.
        assert!((m.energy_zf(0, &a).unwrap() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn rf_reduction_uses_unit_phi() {
        let sc = scenario(vec![1e-9, 2e-9]);
        let rf = sc.link(ReceiverKind::Rf);
        let mut swapped = sc.clone();
        swapped.raqr = sc.rf;
        let via_raqr = swapped.link(ReceiverKind::Raqr);
        let a = alloc(2);
        assert_eq!(rf.sinr_mrc_ul(1, &a), via_raqr.sinr_mrc_ul(1, &a));
        assert_eq!(sc.rf.phi2, 1.0);
    }

    #[test]
    fn low_snr_gain_examples() {
        let rf = FrontEnd::default_rf();
        let unit = FrontEnd::rf(2.0, 2.0).unwrap();
        assert!((low_snr_gain(100, 400, 0.7, &unit, &FrontEnd::rf(1.0, 1.0).unwrap())
            - rate_lb(0.7, 100, 400, 1.0))
        .abs()
            < 1e-15);
        assert_eq!(low_snr_gain(100, 400, 0.0, &FrontEnd::default_raqr(), &rf), 0.0);
    }

    #[test]
    fn low_snr_gain_tracks_bound_difference() {
        // Noise-dominated setting: devices far away and a noisy BS front-end.
        let mut sc = scenario(vec![1e-13; 4]);
        sc.rf.sigma2 = 1e-2;
        sc.raqr.sigma2 = sc.rf.sigma2 * sc.raqr.phi2 / crate::units::db_to_lin(26.0);
        for p in [1e-6, 3e-6, 1e-5] {
            let a = Allocation::uniform(4, p, p, 1.0, 0.5, 200, 100);
            let raqr = sc.link(ReceiverKind::Raqr);
            let rf = sc.link(ReceiverKind::Rf);
            assert!(low_snr_regime(&raqr, &a, 0.05));
            let direct = rate_lb(raqr.sinr_mrc_ul(0, &a), 200, 400, 1.0)
                - rate_lb(rf.sinr_mrc_ul(0, &a), 200, 400, 1.0);
            let approx = low_snr_gain(200, 400, rf.sinr_mrc_ul(0, &a), &sc.raqr, &sc.rf);
            assert!((approx - direct).abs() / direct < 0.1, "{approx} vs {direct}");
        }
    }

    proptest! {
        #[test]
        fn monotone_in_own_powers(scale in 1.01f64..10.0, k in 0usize..3) {
            let sc = scenario(vec![1e-9, 3e-9, 5e-10]);
            let m = sc.link(ReceiverKind::Raqr);
            let a = alloc(3);
            let mut b = a.clone();
            b.p_d[k] *= scale;
            prop_assert!(m.sinr_mrc_ul(k, &b) >= m.sinr_mrc_ul(k, &a));
            prop_assert!(m.sinr_zf_ul(k, &b).unwrap() >= m.sinr_zf_ul(k, &a).unwrap());
            let mut c = a.clone();
            c.p_p[k] *= scale;
            prop_assert!(m.e(k, &c) < m.e(k, &a));
            let mut d = a.clone();
            d.p_s[k] *= scale;
            prop_assert!(m.sinr_mrt_dl(k, &d) >= m.sinr_mrt_dl(k, &a));
            prop_assert!(m.sinr_zf_dl(k, &d).unwrap() >= m.sinr_zf_dl(k, &a).unwrap());
        }

        #[test]
        fn joint_scaling_invariance(c in 0.1f64..10.0) {
            let sc = scenario(vec![1e-9, 3e-9]);
            let a = alloc(2);
            let mut sc2 = sc.clone();
            sc2.raqr.sigma2 *= c;
            sc2.system.sigma2_rf.iter_mut().for_each(|s| *s *= c);
            sc2.system.sigma2_ks.iter_mut().for_each(|s| *s *= c);
            let mut a2 = a.clone();
            for v in [&mut a2.p_p, &mut a2.p_d, &mut a2.p_s] {
                v.iter_mut().for_each(|p| *p *= c);
            }
            let (m1, m2) = (sc.link(ReceiverKind::Raqr), sc2.link(ReceiverKind::Raqr));
            for scheme in [Scheme::Mrc, Scheme::Zf] {
                for k in 0..2 {
                    let (u1, u2) = (m1.sinr_ul(scheme, k, &a).unwrap(), m2.sinr_ul(scheme, k, &a2).unwrap());
                    let (d1, d2) = (m1.sinr_dl(scheme, k, &a).unwrap(), m2.sinr_dl(scheme, k, &a2).unwrap());
                    prop_assert!((u1 - u2).abs() <= 1e-10 * u1);
                    prop_assert!((d1 - d2).abs() <= 1e-10 * d1);
                }
            }
        }
    }
}
