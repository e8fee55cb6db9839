//! Station loads: the exact law of the representative hotspot's
//! contribution and the Gaussian law of the other `n − 1` hotspots.

use serde::{Deserialize, Serialize};

use crate::channel::ln_gamma;
use crate::error::{config, Result};
use crate::geometry::{assoc_prob_sbs, center_breaks, AssociationParams, CellGeometry};
use crate::quadrature::{GaussLegendre, QuadratureSpec};

/// Tail mass left out when truncating Poisson-type load laws.
pub const POISSON_TAIL_MASS: f64 = 1e-10;

/// Law of the number of users in a hotspot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum UserCountModel {
    /// Every hotspot holds exactly `m_bar` users.
    Fixed { m_bar: u32 },
    /// Hotspot counts are i.i.d. Poisson with mean `m_bar`; the typical
    /// user is added on top of a uniformly chosen hotspot.
    Poisson { m_bar: f64 },
}

impl UserCountModel {
    pub fn fixed(m_bar: u32) -> Self {
        UserCountModel::Fixed { m_bar }
    }

    pub fn poisson(m_bar: f64) -> Self {
        UserCountModel::Poisson { m_bar }
    }

    pub fn m_bar(&self) -> f64 {
        match *self {
            UserCountModel::Fixed { m_bar } => f64::from(m_bar),
            UserCountModel::Poisson { m_bar } => m_bar,
        }
    }

    /// Same variant with a different mean.
    pub fn with_m_bar(&self, m_bar: f64) -> Self {
        match self {
            UserCountModel::Fixed { .. } => UserCountModel::Fixed { m_bar: m_bar.round() as u32 },
            UserCountModel::Poisson { .. } => UserCountModel::Poisson { m_bar },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            UserCountModel::Fixed { m_bar } if m_bar < 1 => Err(config("fixed user count must be at least 1")),
            UserCountModel::Poisson { m_bar } if !(m_bar > 0.0) || !m_bar.is_finite() => {
                Err(config("Poisson mean user count must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Station a load refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Station {
    Abs,
    Sbs,
}

/// PMF on `{1, 2, …}`; `probs[i]` is the mass at load `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPmf {
    pub probs: Vec<f64>,
}

impl LoadPmf {
    /// Load seen by the typical user when each other user of its hotspot
    /// joins the same station with probability `p`.
    pub fn for_probability(model: &UserCountModel, p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        let probs = match *model {
            UserCountModel::Fixed { m_bar } => binomial_pmf(m_bar.saturating_sub(1), p),
            UserCountModel::Poisson { m_bar } => poisson_pmf(m_bar * p),
        };
        Self { probs }
    }

    pub fn support(&self) -> impl Iterator<Item = u32> + '_ {
        1..=self.probs.len() as u32
    }

    /// `(k, P(N = k))` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (i as u32 + 1, p))
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, p)| f64::from(k) * p).sum()
    }
}

fn binomial_pmf(trials: u32, p: f64) -> Vec<f64> {
    if p == 0.0 || trials == 0 {
        let mut v = vec![0.0; trials as usize + 1];
        v[0] = 1.0;
        return v;
    }
    if p == 1.0 {
        let mut v = vec![0.0; trials as usize + 1];
        v[trials as usize] = 1.0;
        return v;
    }
    let n = f64::from(trials);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    (0..=trials)
        .map(|j| {
            let j = f64::from(j);
            let ln_choose = ln_gamma(n + 1.0) - ln_gamma(j + 1.0) - ln_gamma(n - j + 1.0);
            (ln_choose + j * lp + (n - j) * lq).exp()
        })
        .collect()
}

/// Poisson(λ) shifted by one, truncated once the tail mass drops below
/// [`POISSON_TAIL_MASS`].
fn poisson_pmf(lambda: f64) -> Vec<f64> {
    if lambda <= 0.0 {
        return vec![1.0];
    }
    let mut probs = Vec::new();
    let mut term = (-lambda).exp();
    let mut cum = 0.0;
    let mut j = 0.0;
    loop {
        probs.push(term);
        cum += term;
        j += 1.0;
        if 1.0 - cum < POISSON_TAIL_MASS && j > lambda {
            break;
        }
        term *= lambda / j;
    }
    probs
}

/// Law of `N_x^ABS` or `N_x^SBS` for the representative hotspot at `x`.
pub fn load_pmf(target: Station, x: f64, model: &UserCountModel, assoc: &AssociationParams, r_hotspot: f64) -> LoadPmf {
    LoadPmf::for_probability(model, station_probability(target, x, assoc, r_hotspot))
}

fn station_probability(target: Station, x: f64, assoc: &AssociationParams, r_hotspot: f64) -> f64 {
    let a_s = assoc_prob_sbs(x, assoc, r_hotspot);
    match target {
        Station::Sbs => a_s,
        Station::Abs => 1.0 - a_s,
    }
}

/// Closed-form mean load given the association probability `p` of the
/// target station.
pub fn mean_load_for_probability(model: &UserCountModel, p: f64) -> f64 {
    match *model {
        UserCountModel::Fixed { m_bar } => (f64::from(m_bar) - 1.0) * p + 1.0,
        UserCountModel::Poisson { m_bar } => m_bar * p + 1.0,
    }
}

/// `E[N_x^ABS]` or `E[N_x^SBS]`.
pub fn mean_load(target: Station, x: f64, model: &UserCountModel, assoc: &AssociationParams, r_hotspot: f64) -> f64 {
    mean_load_for_probability(model, station_probability(target, x, assoc, r_hotspot))
}

/// Spatial moments of the association probabilities over the hotspot
/// centre law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssocMoments {
    pub mean_sbs: f64,
    pub var_sbs: f64,
    pub mean_abs: f64,
    pub var_abs: f64,
    /// `E[A_m(X) A_s(X)]`.
    pub mean_product: f64,
}

pub fn assoc_prob_moments(assoc: &AssociationParams, geom: &CellGeometry, quad: &QuadratureSpec) -> AssocMoments {
    let rule = GaussLegendre::new(quad.nodes_x);
    let (mut m1, mut m2) = (0.0, 0.0);
    for (x, w) in rule.panels(&center_breaks(geom, assoc)) {
        let a = assoc_prob_sbs(x, assoc, geom.r_hotspot);
        let wf = w * geom.center_density(x);
        m1 += wf * a;
        m2 += wf * a * a;
    }
    let var = (m2 - m1 * m1).max(0.0);
    AssocMoments { mean_sbs: m1, var_sbs: var, mean_abs: 1.0 - m1, var_abs: var, mean_product: m1 - m2 }
}

/// Gaussian parameters of the loads contributed by the other `n − 1`
/// hotspots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltParams {
    pub upsilon_m: f64,
    pub upsilon_s: f64,
    pub sigma_m: f64,
    pub sigma_s: f64,
}

pub fn clt_params_from_moments(model: &UserCountModel, n_hotspots: usize, mom: &AssocMoments) -> CltParams {
    let others = n_hotspots.saturating_sub(1) as f64;
    let m = model.m_bar();
    let (var_m, var_s) = match model {
        UserCountModel::Fixed { .. } => {
            let v = others * (m * mom.mean_product + m * m * mom.var_abs);
            (v, v)
        }
        UserCountModel::Poisson { .. } => {
            (others * (m * mom.mean_abs + m * m * mom.var_abs), others * (m * mom.mean_sbs + m * m * mom.var_sbs))
        }
    };
    CltParams {
        upsilon_m: others * m * mom.mean_abs,
        upsilon_s: others * m * mom.mean_sbs,
        sigma_m: var_m.max(0.0).sqrt(),
        sigma_s: var_s.max(0.0).sqrt(),
    }
}

pub fn clt_params(
    model: &UserCountModel,
    geom: &CellGeometry,
    assoc: &AssociationParams,
    quad: &QuadratureSpec,
) -> CltParams {
    clt_params_from_moments(model, geom.n_hotspots, &assoc_prob_moments(assoc, geom, quad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn defaults() -> (AssociationParams, CellGeometry) {
        (AssociationParams::from_powers(50.0, 20.0, 3.3).unwrap(), CellGeometry::default())
    }

    #[test]
    fn point_mass_when_nobody_else_joins() {
        let pmf = LoadPmf::for_probability(&UserCountModel::fixed(5), 0.0);
        assert_eq!(pmf.probs[0], 1.0);
        assert_eq!(pmf.mass(), 1.0);
        let pmf = LoadPmf::for_probability(&UserCountModel::poisson(5.0), 0.0);
        assert_eq!(pmf.probs, vec![1.0]);
    }

    #[test]
    fn binomial_example() {
        let pmf = LoadPmf::for_probability(&UserCountModel::fixed(5), 0.5);
        assert_eq!(pmf.probs.len(), 5);
        assert_abs_diff_eq!(pmf.probs[0], 0.0625, epsilon = 1e-13);
        assert_abs_diff_eq!(pmf.probs[2], 6.0 * 0.0625, epsilon = 1e-13);
        assert_abs_diff_eq!(pmf.mean(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean_load_for_probability(&UserCountModel::fixed(5), 0.5), 3.0);
    }

    #[test]
    fn shifted_poisson_example() {
        let pmf = LoadPmf::for_probability(&UserCountModel::poisson(5.0), 1.0);
        let mut fact = 1.0;
        for (k, p) in pmf.iter() {
            if k > 1 {
                fact *= f64::from(k - 1);
            }
            let want = 5f64.powi(k as i32 - 1) * (-5f64).exp() / fact;
            assert!((p - want).abs() < 1e-15, "k={k}");
        }
        assert!((1.0 - pmf.mass()) < POISSON_TAIL_MASS);
        assert!((pmf.mean() - 6.0).abs() < 1e-8);
    }

    #[test]
    fn mean_load_for_sbs_without_association() {
        for model in [UserCountModel::fixed(7), UserCountModel::poisson(7.0)] {
            assert_eq!(mean_load_for_probability(&model, 0.0), 1.0);
        }
    }

    #[test]
    fn pmf_moments_match_closed_forms_across_the_cell() {
        let (assoc, geom) = defaults();
        for model in [UserCountModel::fixed(5), UserCountModel::fixed(12), UserCountModel::poisson(5.0)] {
            for i in 0..20 {
                let x = geom.max_center_distance() * (i as f64 + 0.37) / 20.0;
                for target in [Station::Abs, Station::Sbs] {
                    let pmf = load_pmf(target, x, &model, &assoc, geom.r_hotspot);
                    assert!((pmf.mass() - 1.0).abs() < 1e-9);
                    assert!(pmf.probs.iter().all(|&p| p >= 0.0));
                    let m = mean_load(target, x, &model, &assoc, geom.r_hotspot);
                    assert!((pmf.mean() - m).abs() < 1e-9 * m.max(1.0), "{model:?} x={x}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn pmfs_are_normalized(p in 0.0f64..=1.0, m in 1u32..60, lam in 0.01f64..40.0) {
            let a = LoadPmf::for_probability(&UserCountModel::fixed(m), p);
            prop_assert!((a.mass() - 1.0).abs() < 1e-9);
            prop_assert_eq!(a.probs.len(), m as usize);
            let b = LoadPmf::for_probability(&UserCountModel::poisson(lam), p);
            prop_assert!((b.mass() - 1.0).abs() < 1e-9);
            prop_assert!(((b.mean() - (lam * p + 1.0)) / (lam * p + 1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn moments_at_defaults() {
        let (assoc, geom) = defaults();
        let mom = assoc_prob_moments(&assoc, &geom, &QuadratureSpec::default());
        assert_abs_diff_eq!(mom.mean_sbs + mom.mean_abs, 1.0, epsilon = 1e-15);
        assert!((mom.var_sbs - mom.var_abs).abs() < 1e-12);
        // Every hotspot is in the inner branch here: A_s = c x², so
        // E[A_s] = A_s(R−Rs)/2 and E[A_s²] = A_s(R−Rs)²/3.
        let top = assoc_prob_sbs(geom.max_center_distance(), &assoc, geom.r_hotspot);
        assert_abs_diff_eq!(mom.mean_sbs, top / 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(mom.var_sbs, top * top / 3.0 - top * top / 4.0, epsilon = 1e-13);
    }

    #[test]
    fn moments_match_sampled_centres() {
        use rand::SeedableRng;
        let (assoc, geom) = defaults();
        let mom = assoc_prob_moments(&assoc, &geom, &QuadratureSpec::default());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = geom.sample_hotspot_center(&mut rng).r;
            let a = assoc_prob_sbs(x, &assoc, geom.r_hotspot);
            s += a;
            s2 += a * a;
        }
        let mean = s / n as f64;
        let sd = (s2 / n as f64 - mean * mean).sqrt();
        assert!((mean - mom.mean_sbs).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn tiny_kp_leaves_nobody_on_the_sbs() {
        let geom = CellGeometry::default();
        let assoc = AssociationParams::new(1e-9, 3.3).unwrap();
        let mom = assoc_prob_moments(&assoc, &geom, &QuadratureSpec::default());
        assert!(mom.mean_sbs < 1e-12);
        assert!(mom.var_sbs < 1e-12);
    }

    #[test]
    fn clt_parameters() {
        let (assoc, mut geom) = defaults();
        let quad = QuadratureSpec::default();
        geom.n_hotspots = 1;
        let c = clt_params(&UserCountModel::fixed(5), &geom, &assoc, &quad);
        assert_eq!((c.upsilon_m, c.upsilon_s, c.sigma_m, c.sigma_s), (0.0, 0.0, 0.0, 0.0));

        geom.n_hotspots = 10;
        let c = clt_params(&UserCountModel::fixed(5), &geom, &assoc, &quad);
        assert_eq!(c.sigma_m, c.sigma_s);
        assert_abs_diff_eq!(c.upsilon_m + c.upsilon_s, 45.0, epsilon = 1e-9);
        let c = clt_params(&UserCountModel::poisson(5.0), &geom, &assoc, &quad);
        assert_abs_diff_eq!(c.upsilon_m + c.upsilon_s, 45.0, epsilon = 1e-9);
        assert!(c.sigma_m != c.sigma_s);
    }
}
