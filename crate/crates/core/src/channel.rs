//! Rayleigh channels, pilot observations and MMSE estimation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scenario::FrontEnd;

/// Draws one `CN(0, var)` sample: real and imaginary parts each `N(0, var/2)`.
#[inline]
pub fn sample_cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Large-scale fading together with one small-scale realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub beta: Vec<f64>,
    /// `M x K`, column `k` distributed as `CN(0, beta_k I_M)`.
    pub h: DMatrix<Complex64>,
}

pub fn sample_channels<R: Rng + ?Sized>(rng: &mut R, beta: &[f64], m: usize) -> ChannelSet {
    let k = beta.len();
    let mut h = DMatrix::zeros(m, k);
    for (j, &b) in beta.iter().enumerate() {
        for i in 0..m {
            h[(i, j)] = sample_cn(rng, b);
        }
    }
    ChannelSet {
        beta: beta.to_vec(),
        h,
    }
}

/// Receive-side constants of the pilot link: the complex superposition factor
/// `Phi` and the diagonal of `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotLink {
    pub frontend: FrontEnd,
    pub tau: usize,
    pub phi: Complex64,
    pub d: Vec<Complex64>,
}

impl PilotLink {
    /// `Phi` with magnitude `sqrt(|Phi|^2)` and the given phase; `D` from the
    /// supplied diagonal.
    pub fn new(frontend: FrontEnd, tau: usize, phi_phase: f64, d: Vec<Complex64>) -> Self {
        PilotLink {
            frontend,
            tau,
            phi: Complex64::from_polar(frontend.phi2.sqrt(), phi_phase),
            d,
        }
    }

    /// Identity `D` and real `Phi`.
    pub fn plain(frontend: FrontEnd, tau: usize, m: usize) -> Self {
        Self::new(frontend, tau, 0.0, vec![Complex64::new(1.0, 0.0); m])
    }
}

/// De-spread pilot observations, one column per device:
/// `y_k = sqrt(rho tau p_k) Phi D h_k + n_k`, `n_k ~ CN(0, sigma^2 I_M)`.
pub fn receive_pilots<R: Rng + ?Sized>(
    ch: &ChannelSet,
    p_pilot: &[f64],
    link: &PilotLink,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    let (m, k) = ch.h.shape();
    if link.tau < k {
        return Err(Error::InvalidPilot { tau: link.tau, k });
    }
    if p_pilot.len() != k || link.d.len() != m {
        return Err(Error::Domain("pilot power / D dimension mismatch".into()));
    }
    let fe = &link.frontend;
    let mut y = DMatrix::zeros(m, k);
    for j in 0..k {
        let g = link.phi * (fe.rho * link.tau as f64 * p_pilot[j]).sqrt();
        for i in 0..m {
            y[(i, j)] = g * link.d[i] * ch.h[(i, j)] + sample_cn(rng, fe.sigma2);
        }
    }
    Ok(y)
}

/// Per-entry MMSE error variance `beta sigma^2 / (rho tau p beta |Phi|^2 + sigma^2)`.
#[inline]
pub fn error_variance(beta: f64, p_pilot: f64, tau: usize, fe: &FrontEnd) -> f64 {
    beta * fe.sigma2 / (fe.rho * tau as f64 * p_pilot * beta * fe.phi2 + fe.sigma2)
}

/// Equivalent pilot SNR `gamma = rho p beta |Phi|^2 / sigma^2`.
#[inline]
pub fn equivalent_snr(beta: f64, p_pilot: f64, fe: &FrontEnd) -> f64 {
    fe.rho * p_pilot * beta * fe.phi2 / fe.sigma2
}

/// `1 / (1 + tau gamma)`.
pub fn nmse(gamma: f64, tau: usize) -> Result<f64> {
    if !(gamma >= 0.0) {
        return Err(Error::Domain(format!("gamma = {gamma} must be >= 0")));
    }
    Ok(1.0 / (1.0 + tau as f64 * gamma))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateColumn {
    pub h_hat: DVector<Complex64>,
    pub e: f64,
    pub gamma: f64,
}

/// MMSE estimate from one de-spread observation:
/// `h_hat = sqrt(rho tau p) beta Phi^* D^H y / (rho tau p beta |Phi|^2 + sigma^2)`.
pub fn mmse_estimate(
    y_k: &DVector<Complex64>,
    beta: f64,
    p_pilot: f64,
    link: &PilotLink,
) -> EstimateColumn {
    let fe = &link.frontend;
    let tau = link.tau as f64;
    let den = fe.rho * tau * p_pilot * beta * fe.phi2 + fe.sigma2;
    let scale = link.phi.conj() * ((fe.rho * tau * p_pilot).sqrt() * beta / den);
    let h_hat = DVector::from_iterator(
        y_k.len(),
        y_k.iter().zip(&link.d).map(|(y, d)| scale * d.conj() * y),
    );
    EstimateColumn {
        h_hat,
        e: error_variance(beta, p_pilot, link.tau, fe),
        gamma: equivalent_snr(beta, p_pilot, fe),
    }
}

/// Estimates for every device.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub h_hat: DMatrix<Complex64>,
    pub e: Vec<f64>,
    pub gamma: Vec<f64>,
}

pub fn estimate_all(
    y: &DMatrix<Complex64>,
    beta: &[f64],
    p_pilot: &[f64],
    link: &PilotLink,
) -> EstimateSet {
    let (m, k) = y.shape();
    let mut h_hat = DMatrix::zeros(m, k);
    let mut e = Vec::with_capacity(k);
    let mut gamma = Vec::with_capacity(k);
    for j in 0..k {
        let col = mmse_estimate(&y.column(j).into_owned(), beta[j], p_pilot[j], link);
        h_hat.set_column(j, &col.h_hat);
        e.push(col.e);
        gamma.push(col.gamma);
    }
    EstimateSet { h_hat, e, gamma }
}
