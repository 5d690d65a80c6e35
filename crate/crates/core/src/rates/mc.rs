//! Monte-Carlo oracles for the closed-form bounds.
//!
//! Each oracle samples the use-and-then-forget decomposition directly: the
//! mean of the desired-signal gain, the total received power and the noise
//! power are estimated by sample means and then combined into an SINR. The
//! instantaneous-CSI ergodic rate is reported alongside for context.
//!
//! Trials are split into batches with independent ChaCha streams; standard
//! errors come from the spread of the per-batch estimates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{rate_lb, Allocation, LinkModel, Scheme};
use crate::channel::{estimate_all, receive_pilots, sample_channels, PilotLink};
use crate::error::{Error, Result};
use crate::scenario::ArrayPhases;

/// Trials below this count set the `small_ensemble` flag.
pub const MIN_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub trials: usize,
    pub seed: u64,
    pub batches: usize,
}

impl McSettings {
    pub fn new(trials: usize, seed: u64) -> Self {
        McSettings {
            trials,
            seed,
            batches: 20,
        }
    }

    fn batch_sizes(&self) -> Vec<usize> {
        let nb = self.batches.clamp(1, self.trials.max(1));
        (0..nb)
            .map(|b| self.trials * (b + 1) / nb - self.trials * b / nb)
            .collect()
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct McStat {
    pub mean: f64,
    pub se: f64,
}

impl McStat {
    fn from_batches(pooled: f64, batch_values: &[f64]) -> Self {
        let n = batch_values.len();
        if n < 2 {
            return McStat { mean: pooled, se: 0.0 };
        }
        let avg = batch_values.iter().sum::<f64>() / n as f64;
        let var = batch_values.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / (n - 1) as f64;
        McStat {
            mean: pooled,
            se: (var / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UplinkMc {
    /// UatF SINR from the pooled sample means.
    pub sinr: Vec<f64>,
    /// UatF rate bound.
    pub rate: Vec<McStat>,
    /// Ergodic rate with instantaneous effective channels known at the receiver.
    pub ergodic: Vec<McStat>,
    pub trials: usize,
    pub small_ensemble: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DownlinkMc {
    pub sinr: Vec<f64>,
    pub rate: Vec<McStat>,
    pub energy: Vec<McStat>,
    pub ergodic: Vec<McStat>,
    pub trials: usize,
    pub small_ensemble: bool,
}

/// Running sums for one device.
#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    gain: Complex64,
    power: f64,
    noise: f64,
    rate: f64,
    energy: f64,
    n: usize,
}

impl Sums {
    fn merge(&mut self, o: &Sums) {
        self.gain += o.gain;
        self.power += o.power;
        self.noise += o.noise;
        self.rate += o.rate;
        self.energy += o.energy;
        self.n += o.n;
    }

    fn uatf(&self, extra_noise: impl Fn(f64) -> f64) -> f64 {
        let n = self.n as f64;
        let g = (self.gain / n).norm_sqr();
        let den = extra_noise(self.power / n - g + self.noise / n);
        if den <= 0.0 {
            return f64::INFINITY;
        }
        g / den
    }
}

fn zf_pseudo(hh: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let gram = hh.adjoint() * hh;
    let inv = gram
        .cholesky()
        .ok_or_else(|| Error::Domain("singular channel Gram matrix".into()))?
        .inverse();
    Ok(hh * inv)
}

struct Draw {
    h: DMatrix<Complex64>,
    h_hat: DMatrix<Complex64>,
}

fn draw(
    rng: &mut ChaCha8Rng,
    model: &LinkModel<'_>,
    a: &Allocation,
    link: &PilotLink,
) -> Result<Draw> {
    let ch = sample_channels(rng, model.beta, model.sys.m);
    let y = receive_pilots(&ch, &a.p_p, link, rng)?;
    let est = estimate_all(&y, model.beta, &a.p_p, link);
    Ok(Draw {
        h: ch.h,
        h_hat: est.h_hat,
    })
}

fn pilot_link(model: &LinkModel<'_>, phases: &ArrayPhases) -> PilotLink {
    PilotLink::new(
        *model.ul,
        model.sys.tau,
        phases.phi_phase,
        phases.d_diagonal(model.sys.m),
    )
}

fn run_batches<F>(settings: &McSettings, k: usize, body: F) -> Result<Vec<Vec<Sums>>>
where
    F: Fn(&mut ChaCha8Rng, &mut [Sums]) -> Result<()> + Sync,
{
    if settings.trials == 0 {
        return Err(Error::Domain("Monte-Carlo needs at least one trial".into()));
    }
    settings
        .batch_sizes()
        .into_par_iter()
        .enumerate()
        .map(|(b, n)| {
            let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
            rng.set_stream(b as u64);
            let mut sums = vec![Sums::default(); k];
            for _ in 0..n {
                body(&mut rng, &mut sums)?;
            }
            Ok(sums)
        })
        .collect()
}

fn pooled(batches: &[Vec<Sums>], k: usize) -> Vec<Sums> {
    let mut tot = vec![Sums::default(); k];
    for b in batches {
        for (t, s) in tot.iter_mut().zip(b) {
            t.merge(s);
        }
    }
    tot
}

/// Uplink UatF oracle. The received signal is `sqrt(rho) Phi D H P^{1/2} x + n`
/// and the combiner is built from the MMSE estimates.
pub fn mc_ergodic_uplink(
    scheme: Scheme,
    a: &Allocation,
    model: &LinkModel<'_>,
    phases: &ArrayPhases,
    settings: &McSettings,
) -> Result<UplinkMc> {
    let sys = model.sys;
    let k = sys.k;
    if scheme == Scheme::Zf && sys.m <= k {
        return Err(Error::Config("ZF needs M > K".into()));
    }
    let link = pilot_link(model, phases);
    let fe = *model.ul;
    let dphi = DVector::from_iterator(sys.m, link.d.iter().map(|d| link.phi * d));
    let batches = run_batches(settings, k, |rng, sums| {
        let dr = draw(rng, model, a, &link)?;
        // effective channels Phi D h and their estimates
        let g = DMatrix::from_fn(sys.m, k, |i, j| dphi[i] * dr.h[(i, j)]);
        let g_hat = DMatrix::from_fn(sys.m, k, |i, j| dphi[i] * dr.h_hat[(i, j)]);
        let c = match scheme {
            Scheme::Mrc => g_hat,
            Scheme::Zf => zf_pseudo(&g_hat)?,
        };
        let cg = c.adjoint() * &g;
        for j in 0..k {
            let cn = c.column(j).norm_squared();
            let noise = fe.sigma2 * cn;
            let mut total = 0.0;
            for i in 0..k {
                total += fe.rho * a.p_d[i] * cg[(j, i)].norm_sqr();
            }
            let desired = fe.rho * a.p_d[j] * cg[(j, j)].norm_sqr();
            let s = &mut sums[j];
            s.gain += cg[(j, j)] * (fe.rho * a.p_d[j]).sqrt();
            s.power += total;
            s.noise += noise;
            let inst = if desired > 0.0 { desired / (total - desired + noise) } else { 0.0 };
            s.rate += rate_lb(inst, a.t_u, sys.t, 1.0);
            s.n += 1;
        }
        Ok(())
    })?;
    let tot = pooled(&batches, k);
    let ul_rate = |s: &Sums| rate_lb(s.uatf(|d| d), a.t_u, sys.t, 1.0);
    let mut out = UplinkMc {
        sinr: tot.iter().map(|s| s.uatf(|d| d)).collect(),
        rate: Vec::with_capacity(k),
        ergodic: Vec::with_capacity(k),
        trials: settings.trials,
        small_ensemble: settings.trials < MIN_TRIALS,
    };
    for j in 0..k {
        let per_rate: Vec<f64> = batches.iter().map(|b| ul_rate(&b[j])).collect();
        let per_erg: Vec<f64> = batches.iter().map(|b| b[j].rate / b[j].n as f64).collect();
        out.rate.push(McStat::from_batches(ul_rate(&tot[j]), &per_rate));
        out.ergodic
            .push(McStat::from_batches(tot[j].rate / tot[j].n as f64, &per_erg));
    }
    Ok(out)
}

/// Downlink SWIPT oracle with MRT or ZF precoders normalized by the root of
/// their mean squared norm.
pub fn mc_swipt_downlink(
    scheme: Scheme,
    a: &Allocation,
    model: &LinkModel<'_>,
    phases: &ArrayPhases,
    settings: &McSettings,
) -> Result<DownlinkMc> {
    let sys = model.sys;
    let k = sys.k;
    if scheme == Scheme::Zf && sys.m <= k {
        return Err(Error::Config("ZF needs M > K".into()));
    }
    let link = pilot_link(model, phases);
    // mean squared norms of the raw precoders
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let v = model.beta[j] - model.e(j, a);
            match scheme {
                Scheme::Mrc => 1.0 / (sys.m as f64 * v).sqrt(),
                Scheme::Zf => ((sys.m - k) as f64 * v).sqrt(),
            }
        })
        .collect();
    let amp: Vec<f64> = a.p_s.iter().map(|p| (model.rho_rf * p).sqrt()).collect();
    let batches = run_batches(settings, k, |rng, sums| {
        let dr = draw(rng, model, a, &link)?;
        let mut w = match scheme {
            Scheme::Mrc => dr.h_hat.clone(),
            Scheme::Zf => zf_pseudo(&dr.h_hat)?,
        };
        for j in 0..k {
            let f = scale[j];
            w.column_mut(j).iter_mut().for_each(|z| *z *= f);
        }
        // (k, k') entry: h_k^H w_k'
        let hw = dr.h.adjoint() * &w;
        for j in 0..k {
            let mut total = 0.0;
            for i in 0..k {
                total += (hw[(j, i)] * amp[i]).norm_sqr();
            }
            let desired = (hw[(j, j)] * amp[j]).norm_sqr();
            let al = a.alpha[j];
            let s = &mut sums[j];
            s.gain += hw[(j, j)] * amp[j];
            s.power += total;
            // Symbols are independent, so the mean harvested power is the sum
            // of per-beam powers.
            s.energy += total;
            let inst = if desired > 0.0 && al > 0.0 {
                al * desired / (al * (total - desired + sys.sigma2_rf[j]) + sys.sigma2_ks[j])
            } else {
                0.0
            };
            s.rate += rate_lb(inst, a.t_d, sys.t, sys.bandwidth);
            s.n += 1;
        }
        Ok(())
    })?;
    let tot = pooled(&batches, k);
    let dl_sinr = |j: usize, s: &Sums| {
        let al = a.alpha[j];
        if al == 0.0 {
            return 0.0;
        }
        let n = s.n as f64;
        let g = (s.gain / n).norm_sqr();
        al * g / (al * (s.power / n - g + sys.sigma2_rf[j]) + sys.sigma2_ks[j])
    };
    let harvest = |j: usize, s: &Sums| {
        a.t_d as f64 / sys.t as f64 * sys.eta_eh * (1.0 - a.alpha[j]) * s.energy / s.n as f64
    };
    let mut out = DownlinkMc {
        sinr: (0..k).map(|j| dl_sinr(j, &tot[j])).collect(),
        rate: Vec::with_capacity(k),
        energy: Vec::with_capacity(k),
        ergodic: Vec::with_capacity(k),
        trials: settings.trials,
        small_ensemble: settings.trials < MIN_TRIALS,
    };
    for j in 0..k {
        let rate = |s: &Sums| rate_lb(dl_sinr(j, s), a.t_d, sys.t, sys.bandwidth);
        let pr: Vec<f64> = batches.iter().map(|b| rate(&b[j])).collect();
        let pe: Vec<f64> = batches.iter().map(|b| harvest(j, &b[j])).collect();
        let pg: Vec<f64> = batches.iter().map(|b| b[j].rate / b[j].n as f64).collect();
        out.rate.push(McStat::from_batches(rate(&tot[j]), &pr));
        out.energy.push(McStat::from_batches(harvest(j, &tot[j]), &pe));
        out.ergodic
            .push(McStat::from_batches(tot[j].rate / tot[j].n as f64, &pg));
    }
    Ok(out)
}

/// Empirical per-entry estimation MSE and NMSE per device.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationMc {
    pub mse: Vec<McStat>,
    pub nmse: Vec<McStat>,
}

pub fn mc_estimation(
    a_pilot: &[f64],
    model: &LinkModel<'_>,
    phases: &ArrayPhases,
    settings: &McSettings,
) -> Result<EstimationMc> {
    let sys = model.sys;
    let k = sys.k;
    let link = pilot_link(model, phases);
    let batches = run_batches(settings, k, |rng, sums| {
        let ch = sample_channels(rng, model.beta, sys.m);
        let y = receive_pilots(&ch, a_pilot, &link, rng)?;
        let est = estimate_all(&y, model.beta, a_pilot, &link);
        for j in 0..k {
            let err = (ch.h.column(j) - est.h_hat.column(j)).norm_squared() / sys.m as f64;
            sums[j].power += err;
            sums[j].n += 1;
        }
        Ok(())
    })?;
    let tot = pooled(&batches, k);
    let mut out = EstimationMc {
        mse: Vec::with_capacity(k),
        nmse: Vec::with_capacity(k),
    };
    for j in 0..k {
        let b = model.beta[j];
        let per: Vec<f64> = batches.iter().map(|s| s[j].power / s[j].n as f64).collect();
        let mse = McStat::from_batches(tot[j].power / tot[j].n as f64, &per);
        out.nmse.push(McStat {
            mean: mse.mean / b,
            se: mse.se / b,
        });
        out.mse.push(mse);
    }
    Ok(out)
}
