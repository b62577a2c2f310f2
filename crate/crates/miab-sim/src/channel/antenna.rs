//! Antenna element pattern and array gain.
//!
//! Directional elements follow the standard parabolic pattern with 65
//! degree half-power beamwidth in both planes, 30 dB side-lobe floor and
//! front-to-back limit. Mechanical downtilt shifts the vertical
//! boresight. Multi-sector sites evaluate every panel and keep the best
//! one. Beamforming is ideal: the full array gain applies only toward
//! the steered peer, element-gain-only toward everyone else.

use crate::geom::Point3;
use crate::scenario::{AntennaConfig, ElementPattern};

pub const HPBW_DEG: f64 = 65.0;
pub const SLA_DB: f64 = 30.0;
pub const FRONT_BACK_DB: f64 = 30.0;

/// Combined element attenuation (<= 0 dB) at the given offsets from a
/// panel boresight.
pub fn element_attenuation_db(azimuth_off_deg: f64, zenith_off_deg: f64) -> f64 {
    let a_v = -(12.0 * (zenith_off_deg / HPBW_DEG).powi(2)).min(SLA_DB);
    let a_h = -(12.0 * (azimuth_off_deg / HPBW_DEG).powi(2)).min(FRONT_BACK_DB);
    -((-(a_v + a_h)).min(FRONT_BACK_DB))
}

fn wrap_deg(mut a: f64) -> f64 {
    while a > 180.0 {
        a -= 360.0;
    }
    while a < -180.0 {
        a += 360.0;
    }
    a
}

/// Element gain of `antenna` (mounted on a body with world azimuth
/// `orientation_deg`) toward the peer at `to`, seen from `from`.
pub fn element_gain_db(
    antenna: &AntennaConfig,
    orientation_deg: f64,
    from: &Point3,
    to: &Point3,
) -> f64 {
    match antenna.pattern {
        ElementPattern::Omni => antenna.max_element_gain_dbi,
        ElementPattern::Tgpp3d => {
            let dx = to.x - from.x;
            let dy = to.y - from.y;
            let dz = to.z - from.z;
            let d2d = (dx * dx + dy * dy).sqrt();
            let azimuth = dy.atan2(dx).to_degrees();
            // zenith angle of the direction, 0 = straight up
            let zenith = 90.0 - dz.atan2(d2d).to_degrees();
            let boresight_zenith = 90.0 + antenna.tilt_deg;
            let mut best = f64::NEG_INFINITY;
            for sector in &antenna.sector_azimuths_deg {
                let az_off = wrap_deg(azimuth - (orientation_deg + sector));
                let zen_off = zenith - boresight_zenith;
                let g = antenna.max_element_gain_dbi + element_attenuation_db(az_off, zen_off);
                best = best.max(g);
            }
            best
        }
    }
}

/// Ideal beam-steering gain of the full array.
pub fn array_gain_db(antenna: &AntennaConfig) -> f64 {
    10.0 * (antenna.array.elements() as f64).log10()
}
