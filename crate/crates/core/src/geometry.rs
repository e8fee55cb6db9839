//! Cell layout, the SBS association region of a hotspot and the spatial
//! sampling laws.
//!
//! A user at offset `u` from its hotspot centre `x` attaches to the SBS when
//! `P_s ‖u‖^-α > P_m ‖x + u‖^-α`, i.e. when `‖u‖ < k_p ‖x + u‖` with
//! `k_p = (P_s / P_m)^(1/α)`. That locus is the Apollonius disc of radius
//! `k_p x / (1 − k_p²)` centred at `x / (1 − k_p²)`, whose centre sits
//! `k_p² x / (1 − k_p²)` beyond the SBS. The disc lies inside the hotspot
//! while `x ≤ R_s (1 − k_p) / k_p` and swallows it once
//! `x ≥ R_s (1 + k_p) / k_p`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};
use crate::quadrature::GaussLegendre;

/// Macrocell radius, hotspot radius and hotspot count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub r_cell: f64,
    pub r_hotspot: f64,
    pub n_hotspots: usize,
}

impl Default for CellGeometry {
    fn default() -> Self {
        Self { r_cell: 200.0, r_hotspot: 30.0, n_hotspots: 10 }
    }
}

impl CellGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_cell > 0.0 && self.r_hotspot > 0.0) {
            return Err(config("cell and hotspot radii must be positive"));
        }
        if !(self.r_hotspot < self.r_cell) {
            return Err(config("hotspot radius must be smaller than the cell radius"));
        }
        if self.n_hotspots == 0 {
            return Err(config("at least one hotspot is required"));
        }
        Ok(())
    }

    /// Largest distance of a hotspot centre from the ABS, `R − R_s`.
    pub fn max_center_distance(&self) -> f64 {
        self.r_cell - self.r_hotspot
    }

    /// Radial density of hotspot centres, `2x / (R − R_s)²`.
    pub fn center_density(&self, x: f64) -> f64 {
        let d = self.max_center_distance();
        if x > 0.0 && x <= d {
            2.0 * x / (d * d)
        } else {
            0.0
        }
    }

    /// Radial density of user offsets, `2u / R_s²`.
    pub fn offset_density(&self, u: f64) -> f64 {
        if u > 0.0 && u <= self.r_hotspot {
            2.0 * u / (self.r_hotspot * self.r_hotspot)
        } else {
            0.0
        }
    }

    /// Draws a hotspot centre uniformly from `b(0, R − R_s)`.
    pub fn sample_hotspot_center<R: Rng + ?Sized>(&self, rng: &mut R) -> PolarPoint {
        sample_disc(rng, self.max_center_distance())
    }

    /// Draws a user offset uniformly from `b(0, R_s)`.
    pub fn sample_user_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> PolarPoint {
        sample_disc(rng, self.r_hotspot)
    }
}

fn sample_disc<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> PolarPoint {
    // 1 - U maps [0, 1) onto (0, 1].
    let a: f64 = 1.0 - rng.random::<f64>();
    let b: f64 = 1.0 - rng.random::<f64>();
    PolarPoint { r: radius * a.sqrt(), phi: 2.0 * PI * b }
}

/// A point in polar form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPoint {
    pub r: f64,
    pub phi: f64,
}

impl PolarPoint {
    pub fn to_cartesian(self) -> (f64, f64) {
        (self.r * self.phi.cos(), self.r * self.phi.sin())
    }
}

/// Sub-6 GHz association rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssociationParams {
    /// `(P_s / P_m)^(1/α)`.
    pub kp: f64,
    /// Pathloss exponent of the paging band.
    pub alpha: f64,
}

impl AssociationParams {
    pub fn new(kp: f64, alpha: f64) -> Result<Self> {
        let p = Self { kp, alpha };
        p.validate()?;
        Ok(p)
    }

    /// Builds the rule from the two transmit powers in dBm.
    pub fn from_powers(p_m_dbm: f64, p_s_dbm: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(config("association pathloss exponent must be positive"));
        }
        let ratio = 10f64.powf((p_s_dbm - p_m_dbm) / 10.0);
        Self::new(ratio.powf(1.0 / alpha), alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(config("association pathloss exponent must be positive"));
        }
        if !(self.kp > 0.0 && self.kp < 1.0) {
            return Err(config(format!(
                "kp = (P_s/P_m)^(1/alpha) must satisfy 0 < kp < 1 (needs P_s < P_m), got {}",
                self.kp
            )));
        }
        Ok(())
    }

    /// Largest centre distance at which the association disc still lies
    /// inside the hotspot.
    pub fn inner_limit(&self, r_hotspot: f64) -> f64 {
        r_hotspot * (1.0 - self.kp) / self.kp
    }

    /// Centre distance beyond which the association disc covers the whole
    /// hotspot.
    pub fn full_limit(&self, r_hotspot: f64) -> f64 {
        r_hotspot * (1.0 + self.kp) / self.kp
    }

    /// Whether a user at offset `u` (angle `ξ` measured from the direction
    /// of the hotspot centre as seen from the ABS) attaches to the SBS.
    pub fn prefers_sbs(&self, x: f64, u: f64, xi: f64) -> bool {
        u < self.kp * distance_to_abs(x, u, xi)
    }
}

/// `‖x + u‖ = sqrt(x² + u² + 2xu cos ξ)`, written as
/// `sqrt((x − u)² + 4xu cos²(ξ/2))` so that nothing cancels near `ξ = π`.
pub fn distance_to_abs(x: f64, u: f64, xi: f64) -> f64 {
    let c = (0.5 * xi).cos();
    ((x - u) * (x - u) + 4.0 * x * u * c * c).sqrt()
}

/// Shape of the SBS association region of a hotspot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SbsRegion {
    /// The association disc lies strictly inside the hotspot.
    Inner,
    /// The disc and the hotspot overlap partially.
    Lens,
    /// The whole hotspot attaches to the SBS.
    Full,
}

pub fn sbs_region_classify(x: f64, assoc: &AssociationParams, r_hotspot: f64) -> SbsRegion {
    if x < assoc.inner_limit(r_hotspot) {
        SbsRegion::Inner
    } else if x <= assoc.full_limit(r_hotspot) {
        SbsRegion::Lens
    } else {
        SbsRegion::Full
    }
}

/// Area of `b(c1, r1) ∩ b(c2, r2)` with `‖c1 − c2‖ = d`.
pub fn circle_intersection_area(r1: f64, r2: f64, d: f64) -> Result<f64> {
    if !(r1 >= 0.0 && r2 >= 0.0 && d >= 0.0) {
        return Err(domain(format!("circle intersection needs nonnegative arguments, got ({r1}, {r2}, {d})")));
    }
    if d >= r1 + r2 {
        return Ok(0.0);
    }
    if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        return Ok(PI * r * r);
    }
    let t2 = (d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (-d + r1 + r2);
    let t = t2.max(0.0).sqrt();
    let a1 = t.atan2(d * d + r1 * r1 - r2 * r2);
    let a2 = t.atan2(d * d - r1 * r1 + r2 * r2);
    Ok(r1 * r1 * a1 + r2 * r2 * a2 - 0.5 * t)
}

/// Radius and centre offset (from the SBS) of the association disc.
pub fn association_disc(x: f64, assoc: &AssociationParams) -> (f64, f64) {
    let k = assoc.kp;
    let s = 1.0 - k * k;
    (k * x / s, k * k * x / s)
}

/// Probability `A_s(x)` that a user of the hotspot at distance `x`
/// attaches to its SBS.
pub fn assoc_prob_sbs(x: f64, assoc: &AssociationParams, r_hotspot: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let (radius, offset) = association_disc(x, assoc);
    match sbs_region_classify(x, assoc, r_hotspot) {
        SbsRegion::Inner => (radius / r_hotspot).powi(2),
        SbsRegion::Lens => {
            let area = circle_intersection_area(r_hotspot, radius, offset)
                .expect("association disc arguments are nonnegative");
            (area / (PI * r_hotspot * r_hotspot)).clamp(0.0, 1.0)
        }
        SbsRegion::Full => 1.0,
    }
}

/// `A_m(x) = 1 − A_s(x)`.
pub fn assoc_prob_abs(x: f64, assoc: &AssociationParams, r_hotspot: f64) -> f64 {
    1.0 - assoc_prob_sbs(x, assoc, r_hotspot)
}

/// Unclamped radial extent of the association disc along direction `ξ`,
/// seen from the SBS.
pub fn association_boundary(x: f64, xi: f64, assoc: &AssociationParams) -> f64 {
    let k = assoc.kp;
    let s = xi.sin();
    x * k * ((1.0 - k * k * s * s).sqrt() + k * xi.cos()) / (1.0 - k * k)
}

/// Radial boundary of the SBS association region along `ξ`, clamped to
/// the hotspot radius.
pub fn u_max(x: f64, xi: f64, assoc: &AssociationParams, r_hotspot: f64) -> f64 {
    association_boundary(x, xi, assoc).clamp(0.0, r_hotspot)
}

/// Angle in `(0, π)` where the association boundary meets the hotspot
/// edge, if it does. For `ξ` below it the boundary is clamped at `R_s`.
pub fn boundary_kink(x: f64, assoc: &AssociationParams, r_hotspot: f64) -> Option<f64> {
    if x <= 0.0 {
        return None;
    }
    let k2 = assoc.kp * assoc.kp;
    let c = (r_hotspot * r_hotspot * (1.0 - k2) - k2 * x * x) / (2.0 * x * k2 * r_hotspot);
    (c > -1.0 && c < 1.0).then(|| c.acos())
}

/// Angular breakpoints on `[0, π]` for integrals that involve `u_max`.
pub fn angular_breaks(x: f64, assoc: &AssociationParams, r_hotspot: f64) -> Vec<f64> {
    match boundary_kink(x, assoc, r_hotspot) {
        Some(k) => vec![0.0, k, PI],
        None => vec![0.0, PI],
    }
}

/// `A_s(x)` from the angular integral of `u_max²`, split at the kink.
pub fn assoc_prob_sbs_angular(x: f64, assoc: &AssociationParams, r_hotspot: f64, rule: &GaussLegendre) -> f64 {
    let pts = rule.panels(&angular_breaks(x, assoc, r_hotspot));
    let half_turn: f64 = pts.iter().map(|&(xi, w)| w * u_max(x, xi, assoc, r_hotspot).powi(2)).sum();
    half_turn / (PI * r_hotspot * r_hotspot)
}

/// Breakpoints on `[0, R − R_s]` where `A_s` changes branch.
pub fn center_breaks(geom: &CellGeometry, assoc: &AssociationParams) -> Vec<f64> {
    let top = geom.max_center_distance();
    let mut b = vec![0.0];
    for v in [assoc.inner_limit(geom.r_hotspot), assoc.full_limit(geom.r_hotspot)] {
        if v > 0.0 && v < top {
            b.push(v);
        }
    }
    b.push(top);
    b
}
