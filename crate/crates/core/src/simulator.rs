//! Monte Carlo drops of the full network.
//!
//! Trial `i` of a run with master seed `s` draws from a ChaCha8 stream
//! seeded with `s` and switched to stream `i`, so estimates depend only on
//! the seed, the trial count and the parameters, never on scheduling.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_los, snr, FadingSampler, Link};
use crate::coverage::SnrCdf;
use crate::error::{config, Result};
use crate::geometry::{assoc_prob_sbs, distance_to_abs, AssociationParams, PolarPoint};
use crate::load::{mean_load, LoadPmf, Station, UserCountModel};
use crate::params::NetworkParams;
use crate::rate::{BandwidthSplit, PartitionStrategy, RateQuery};

/// The generator of trial `index` under `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Blockage state and fading gain of one sampled link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub distance: f64,
    pub los: bool,
    pub fading: f64,
}

/// One sampled drop. The typical user is user 0 of hotspot 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub hotspot_centers: Vec<PolarPoint>,
    /// Offsets of each hotspot's users from its centre.
    pub user_offsets: Vec<Vec<PolarPoint>>,
    /// Whether each user attaches to its hotspot's SBS.
    pub sbs_association: Vec<Vec<bool>>,
    pub typical_index: (usize, usize),
    /// Link from the typical user's serving station to the typical user.
    pub access: LinkState,
    /// Backhaul of the typical user's SBS, when it is served there.
    pub backhaul: Option<LinkState>,
}

fn user_count<R: Rng + ?Sized>(rng: &mut R, model: &UserCountModel, typical: bool) -> usize {
    match *model {
        UserCountModel::Fixed { m_bar } => m_bar as usize,
        UserCountModel::Poisson { m_bar } => {
            let extra = usize::from(typical);
            Poisson::new(m_bar).map(|p| p.sample(rng) as usize).unwrap_or(0) + extra
        }
    }
}

fn relative_angle(center: PolarPoint, offset: PolarPoint) -> f64 {
    offset.phi - center.phi
}

impl NetworkRealization {
    /// Samples a drop. Fixed counts give every hotspot `m̄` users; Poisson
    /// counts add the typical user to a Poisson population.
    pub fn sample<R: Rng + ?Sized>(
        rng: &mut R,
        params: &NetworkParams,
        assoc: &AssociationParams,
        fading: &FadingSampler,
        model: &UserCountModel,
    ) -> Self {
        let geom = &params.geometry;
        let prop = &params.propagation;
        let mut hotspot_centers = Vec::with_capacity(geom.n_hotspots);
        let mut user_offsets = Vec::with_capacity(geom.n_hotspots);
        let mut sbs_association = Vec::with_capacity(geom.n_hotspots);
        for i in 0..geom.n_hotspots {
            let c = geom.sample_hotspot_center(rng);
            let count = user_count(rng, model, i == 0);
            let offs: Vec<PolarPoint> = (0..count).map(|_| geom.sample_user_offset(rng)).collect();
            let sbs: Vec<bool> = offs.iter().map(|&u| assoc.prefers_sbs(c.r, u.r, relative_angle(c, u))).collect();
            hotspot_centers.push(c);
            user_offsets.push(offs);
            sbs_association.push(sbs);
        }
        let (c, u) = (hotspot_centers[0], user_offsets[0][0]);
        let mut link = |distance: f64, mu: f64| {
            let los = sample_los(rng, distance, mu);
            LinkState { distance, los, fading: fading.sample(rng, los) }
        };
        let (access, backhaul) = if sbs_association[0][0] {
            let b = link(c.r, prop.mu_b);
            (link(u.r, prop.mu_s), Some(b))
        } else {
            (link(distance_to_abs(c.r, u.r, relative_angle(c, u)), prop.mu_m), None)
        };
        Self { hotspot_centers, user_offsets, sbs_association, typical_index: (0, 0), access, backhaul }
    }

    /// Users attached to the SBS of each hotspot.
    pub fn sbs_loads(&self) -> Vec<u32> {
        self.sbs_association.iter().map(|h| h.iter().filter(|&&s| s).count() as u32).collect()
    }

    /// Users attached to the ABS.
    pub fn abs_load(&self) -> u32 {
        self.sbs_association.iter().flatten().filter(|&&s| !s).count() as u32
    }

    pub fn total_users(&self) -> u32 {
        self.user_offsets.iter().map(|h| h.len() as u32).sum()
    }
}

/// What the typical user sees in one drop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub association: Station,
    /// Users on the ABS.
    pub abs_load: u32,
    /// Users on the SBS of the typical user's hotspot.
    pub sbs_load: u32,
    /// Users on all SBSs.
    pub sbs_load_total: u32,
    /// Backhaul share of the typical SBS under mean-load weighting.
    pub average_share: f64,
    pub access_snr: f64,
    pub backhaul_snr: Option<f64>,
}

impl TrialOutcome {
    pub fn from_realization(
        r: &NetworkRealization,
        params: &NetworkParams,
        assoc: &AssociationParams,
        model: &UserCountModel,
    ) -> Self {
        let (radio, prop) = (&params.radio, &params.propagation);
        let rs = params.geometry.r_hotspot;
        let loads = r.sbs_loads();
        let own = mean_load(Station::Sbs, r.hotspot_centers[0].r, model, assoc, rs);
        let others: f64 = r.hotspot_centers[1..].iter().map(|c| model.m_bar() * assoc_prob_sbs(c.r, assoc, rs)).sum();
        let a = &r.access;
        let (association, access_snr, backhaul_snr) = match r.backhaul {
            Some(b) => (
                Station::Sbs,
                snr(Link::SbsAccess, a.distance, a.los, a.fading, radio, prop),
                Some(snr(Link::Backhaul, b.distance, b.los, b.fading, radio, prop).unwrap_or(0.0)),
            ),
            None => (Station::Abs, snr(Link::AbsAccess, a.distance, a.los, a.fading, radio, prop), None),
        };
        // A zero-length access link has unbounded SNR.
        let access_snr = access_snr.unwrap_or(f64::INFINITY);
        Self {
            association,
            abs_load: r.abs_load(),
            sbs_load: loads[0],
            sbs_load_total: loads.iter().sum(),
            average_share: own / (own + others),
            access_snr,
            backhaul_snr,
        }
    }

    /// Load of the station serving the typical user.
    pub fn serving_load(&self) -> u32 {
        match self.association {
            Station::Abs => self.abs_load,
            Station::Sbs => self.sbs_load,
        }
    }

    /// Achieved downlink rate, bit/s.
    pub fn rate(&self, strategy: PartitionStrategy, split: BandwidthSplit, params: &NetworkParams) -> f64 {
        let w = params.bandwidth();
        let (w_a, w_b) = (split.access(w), split.backhaul(w));
        let n = self.serving_load() as f64;
        let access = w_a / n * self.access_snr.ln_1p() / std::f64::consts::LN_2;
        match self.backhaul_snr {
            None => access,
            Some(sb) => {
                let w_s = match strategy {
                    PartitionStrategy::Equal => w_b / params.geometry.n_hotspots as f64,
                    PartitionStrategy::Instantaneous => w_b * self.sbs_load as f64 / self.sbs_load_total as f64,
                    PartitionStrategy::Average => w_b * self.average_share,
                };
                let backhaul = w_s * sb.ln_1p() / std::f64::consts::LN_2 / n;
                access.min(backhaul)
            }
        }
    }
}

/// One drop, reduced to the typical user's outcome.
pub fn run_trial<R: Rng + ?Sized>(rng: &mut R, params: &NetworkParams, model: &UserCountModel) -> Result<TrialOutcome> {
    let assoc = params.association()?;
    let fading = FadingSampler::new(&params.propagation)?;
    let r = NetworkRealization::sample(rng, params, &assoc, &fading, model);
    Ok(TrialOutcome::from_realization(&r, params, &assoc, model))
}

/// Outcomes of `trials` drops.
pub fn simulate(trials: usize, params: &NetworkParams, model: &UserCountModel, seed: u64) -> Result<Vec<TrialOutcome>> {
    params.validate()?;
    model.validate()?;
    let assoc = params.association()?;
    let fading = FadingSampler::new(&params.propagation)?;
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let r = NetworkRealization::sample(&mut rng, params, &assoc, &fading, model);
            TrialOutcome::from_realization(&r, params, &assoc, model)
        })
        .collect())
}

/// A Monte Carlo proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl Estimate {
    pub fn from_count(hits: usize, trials: usize) -> Self {
        let n = trials.max(1) as f64;
        let p = hits as f64 / n;
        Self { value: p, stderr: (p * (1.0 - p) / n).sqrt(), trials }
    }
}

/// Fraction of outcomes whose rate exceeds `ρ`.
pub fn rate_coverage_of(outcomes: &[TrialOutcome], q: &RateQuery, params: &NetworkParams) -> Estimate {
    let hits = outcomes.iter().filter(|o| o.rate(q.strategy, q.split, params) > q.rho).count();
    Estimate::from_count(hits, outcomes.len())
}

/// Monte Carlo rate coverage of the typical user.
pub fn estimate_rate_coverage(trials: usize, q: &RateQuery, params: &NetworkParams, seed: u64) -> Result<Estimate> {
    if trials == 0 {
        return Err(config("at least one trial is needed"));
    }
    q.validate()?;
    Ok(rate_coverage_of(&simulate(trials, params, &q.model, seed)?, q, params))
}

/// Empirical law of `N_x^ABS` or `N_x^SBS` for a hotspot at distance `x`.
pub fn estimate_load_pmf(
    trials: usize,
    target: Station,
    x: f64,
    model: &UserCountModel,
    params: &NetworkParams,
    seed: u64,
) -> Result<LoadPmf> {
    params.validate()?;
    model.validate()?;
    let assoc = params.association()?;
    let geom = &params.geometry;
    let counts: Vec<usize> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let others = match *model {
                UserCountModel::Fixed { m_bar } => m_bar as usize - 1,
                UserCountModel::Poisson { .. } => user_count(&mut rng, model, false),
            };
            1 + (0..others)
                .filter(|_| {
                    let u = geom.sample_user_offset(&mut rng);
                    assoc.prefers_sbs(x, u.r, u.phi) == (target == Station::Sbs)
                })
                .count()
        })
        .collect();
    let top = counts.iter().copied().max().unwrap_or(1);
    let mut probs = vec![0.0; top];
    for c in counts {
        probs[c - 1] += 1.0;
    }
    for p in &mut probs {
        *p /= trials as f64;
    }
    Ok(LoadPmf { probs })
}

/// Sample mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub mean: f64,
    pub std: f64,
}

impl SampleMoments {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self { mean, std: var.sqrt() }
    }
}

/// Empirical moments of the ABS and SBS loads contributed by the
/// hotspots other than the typical user's.
pub fn estimate_other_loads(
    trials: usize,
    model: &UserCountModel,
    params: &NetworkParams,
    seed: u64,
) -> Result<(SampleMoments, SampleMoments)> {
    params.validate()?;
    let assoc = params.association()?;
    let fading = FadingSampler::new(&params.propagation)?;
    let pairs: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let r = NetworkRealization::sample(&mut rng, params, &assoc, &fading, model);
            let (mut abs, mut sbs) = (0u32, 0u32);
            for h in &r.sbs_association[1..] {
                let s = h.iter().filter(|&&b| b).count() as u32;
                sbs += s;
                abs += h.len() as u32 - s;
            }
            (f64::from(abs), f64::from(sbs))
        })
        .collect();
    let (abs, sbs): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok((SampleMoments::of(&abs), SampleMoments::of(&sbs)))
}

/// Empirical access-SNR CDFs with unit antenna gain, for a user placed
/// uniformly in a uniformly placed hotspot.
pub fn estimate_snr_cdf(trials: usize, theta_grid: &[f64], params: &NetworkParams, seed: u64) -> Result<SnrCdf> {
    params.validate()?;
    let fading = FadingSampler::new(&params.propagation)?;
    let (radio, prop) = (&params.radio, &params.propagation);
    let geom = &params.geometry;
    let unit_gain = 1.0 / prop.gain();
    let samples: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let c = geom.sample_hotspot_center(&mut rng);
            let u = geom.sample_user_offset(&mut rng);
            let d = distance_to_abs(c.r, u.r, relative_angle(c, u));
            let los = sample_los(&mut rng, d, prop.mu_m);
            let h = fading.sample(&mut rng, los);
            let abs = snr(Link::AbsAccess, d, los, h, radio, prop).unwrap_or(f64::INFINITY) * unit_gain;
            let los = sample_los(&mut rng, u.r, prop.mu_s);
            let h = fading.sample(&mut rng, los);
            let sbs = snr(Link::SbsAccess, u.r, los, h, radio, prop).unwrap_or(f64::INFINITY) * unit_gain;
            (abs, sbs)
        })
        .collect();
    let n = trials as f64;
    let cdf = |pick: fn(&(f64, f64)) -> f64, t: f64| samples.iter().filter(|s| pick(s) <= t).count() as f64 / n;
    Ok(SnrCdf {
        theta: theta_grid.to_vec(),
        abs: theta_grid.iter().map(|&t| cdf(|s| s.0, t)).collect(),
        sbs: theta_grid.iter().map(|&t| cdf(|s| s.1, t)).collect(),
    })
}
