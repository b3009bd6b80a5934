//! Foreground occluder patterns on a fronto-parallel plane.
//!
//! Patterns are one-dimensional: vertical patterns vary along image columns,
//! horizontal ones along rows. Coordinates are reference-view pixels on the
//! occluder plane, so at the reference camera position occluder coordinate
//! `s` lies over pixel `s`, whose footprint is `[s - 0.5, s + 0.5)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Slats run top to bottom; the pattern varies with x.
    Vertical,
    /// Slats run left to right; the pattern varies with y.
    Horizontal,
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vertical" | "v" => Ok(Orientation::Vertical),
            "horizontal" | "h" => Ok(Orientation::Horizontal),
            other => Err(Error::invalid(format!("unknown orientation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OccluderPattern {
    /// No occluder at all.
    Empty,
    /// Periodic slats: slat `k` covers `[phase + k*period, phase + k*period + slat_width)`.
    Fence {
        period: f64,
        slat_width: f64,
        phase: f64,
    },
    /// An opaque board with open slits `[start, end)`.
    Cardboard { slits: Vec<(f64, f64)> },
    /// A fence whose slats carry a square-wave stripe texture.
    Stripes {
        period: f64,
        slat_width: f64,
        phase: f64,
        stripe_period: f64,
        contrast: f64,
    },
}

/// A fronto-parallel occluder: pattern geometry plus surface intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct OccluderSpec {
    pub pattern: OccluderPattern,
    pub orientation: Orientation,
    /// Base surface intensity in `(0, 1]`.
    pub intensity: f64,
    /// Per-slat relative intensity spread; slat `k` gets `intensity * (1 + jitter * h_k)`, `h_k` in `[-1, 1]`.
    pub jitter: f64,
    pub seed: u64,
    /// Occluded-area ratio of the pattern.
    pub r_o: f64,
    /// Occluder-texture edges per slit edge (zero without texture).
    pub r_t: f64,
}

impl OccluderSpec {
    pub fn empty() -> Self {
        Self {
            pattern: OccluderPattern::Empty,
            orientation: Orientation::Vertical,
            intensity: 0.0,
            jitter: 0.0,
            seed: 0,
            r_o: 0.0,
            r_t: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.pattern, OccluderPattern::Empty)
    }

    pub fn with_intensity(mut self, intensity: f64) -> Self {
        self.intensity = intensity;
        self
    }

    pub fn with_jitter(mut self, jitter: f64, seed: u64) -> Self {
        self.jitter = jitter;
        self.seed = seed;
        self
    }

    /// Covered length and intensity integral of the occluder over `[a, b)`.
    pub fn cover(&self, a: f64, b: f64) -> (f64, f64) {
        debug_assert!(a <= b);
        match &self.pattern {
            OccluderPattern::Empty => (0.0, 0.0),
            OccluderPattern::Fence {
                period,
                slat_width,
                phase,
            } => self.periodic_cover(a, b, *period, *slat_width, *phase, None),
            OccluderPattern::Stripes {
                period,
                slat_width,
                phase,
                stripe_period,
                contrast,
            } => self.periodic_cover(
                a,
                b,
                *period,
                *slat_width,
                *phase,
                Some((*stripe_period, *contrast)),
            ),
            OccluderPattern::Cardboard { slits } => {
                // board minus the open slits
                let mut covered = b - a;
                for &(s, e) in slits {
                    covered -= (e.min(b) - s.max(a)).max(0.0);
                }
                let covered = covered.max(0.0);
                (covered, covered * self.intensity)
            }
        }
    }

    fn periodic_cover(
        &self,
        a: f64,
        b: f64,
        period: f64,
        slat: f64,
        phase: f64,
        stripes: Option<(f64, f64)>,
    ) -> (f64, f64) {
        let k0 = ((a - phase) / period).floor() as i64 - 1;
        let k1 = ((b - phase) / period).floor() as i64;
        let mut len = 0.0;
        let mut integral = 0.0;
        for k in k0..=k1 {
            let start = phase + k as f64 * period;
            let lo = a.max(start);
            let hi = b.min(start + slat);
            if hi <= lo {
                continue;
            }
            let base = self.slat_intensity(k);
            len += hi - lo;
            integral += match stripes {
                None => base * (hi - lo),
                Some((sp, contrast)) => stripe_integral(lo - start, hi - start, sp, base, contrast),
            };
        }
        (len, integral)
    }

    fn slat_intensity(&self, k: i64) -> f64 {
        if self.jitter == 0.0 {
            return self.intensity;
        }
        let h = unit_hash(self.seed, k) * 2.0 - 1.0;
        (self.intensity * (1.0 + self.jitter * h)).clamp(1e-3, 1.0)
    }
}

/// Integral over `[lo, hi)` of a square wave that is `base` on the first half of
/// each stripe period and `base * (1 - contrast)` on the second.
fn stripe_integral(lo: f64, hi: f64, stripe_period: f64, base: f64, contrast: f64) -> f64 {
    let half = stripe_period / 2.0;
    let dark = base * (1.0 - contrast);
    let mut acc = 0.0;
    let mut x = lo;
    while x < hi {
        let idx = (x / half).floor();
        let next = ((idx + 1.0) * half).min(hi);
        let level = if (idx as i64).rem_euclid(2) == 0 { base } else { dark };
        acc += level * (next - x);
        x = next;
    }
    acc
}

fn unit_hash(seed: u64, k: i64) -> f64 {
    // splitmix64 finalizer
    let mut z = seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Integer slat geometry for `slat_count` periods across `extent` pixels.
fn fence_geometry(r_o: f64, slat_count: usize, extent: usize) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&r_o) {
        return Err(Error::invalid(format!("occluded ratio {r_o} must be in [0, 1)")));
    }
    if slat_count == 0 || extent < 2 * slat_count {
        return Err(Error::invalid(format!(
            "{slat_count} slats do not fit in {extent} pixels"
        )));
    }
    let period = (extent / slat_count) as f64;
    let slat = (r_o * period).round().min(period - 1.0);
    Ok((period, slat))
}

/// A periodic fence with `slat_count` slats across `extent` reference-view pixels.
///
/// Period and slat width are whole pixels with slat edges on pixel
/// boundaries, so the reported `r_o` (slat / period) is what a reference-view
/// render measures. `r_o = 0` gives an empty occluder.
pub fn make_fence_occluder(
    r_o: f64,
    slat_count: usize,
    orientation: Orientation,
    extent: usize,
) -> Result<OccluderSpec> {
    let (period, slat) = fence_geometry(r_o, slat_count, extent)?;
    if slat == 0.0 {
        return Ok(OccluderSpec {
            orientation,
            ..OccluderSpec::empty()
        });
    }
    Ok(OccluderSpec {
        pattern: OccluderPattern::Fence {
            period,
            slat_width: slat,
            phase: -0.5,
        },
        orientation,
        intensity: 0.35,
        jitter: 0.0,
        seed: 0,
        r_o: slat / period,
        r_t: 0.0,
    })
}

/// A fence whose slats carry `stripes_per_slat` dark/bright stripe pairs.
///
/// `r_t` counts internal stripe boundaries per slit boundary: each slat has
/// `2 * stripes_per_slat - 1` of them against two slit edges.
pub fn make_stripe_occluder(
    r_o: f64,
    slat_count: usize,
    stripes_per_slat: usize,
    contrast: f64,
    orientation: Orientation,
    extent: usize,
) -> Result<OccluderSpec> {
    if !(0.0..=1.0).contains(&contrast) {
        return Err(Error::invalid(format!("stripe contrast {contrast} must be in [0, 1]")));
    }
    let mut spec = make_fence_occluder(r_o, slat_count, orientation, extent)?;
    let OccluderPattern::Fence {
        period,
        slat_width,
        phase,
    } = spec.pattern
    else {
        return Ok(spec);
    };
    if stripes_per_slat == 0 || contrast == 0.0 {
        return Ok(spec);
    }
    let stripe_period = slat_width / stripes_per_slat as f64;
    spec.pattern = OccluderPattern::Stripes {
        period,
        slat_width,
        phase,
        stripe_period,
        contrast,
    };
    spec.r_t = (2 * stripes_per_slat - 1) as f64 / 2.0;
    Ok(spec)
}

/// An opaque board with open slits; `r_o` is measured over `[-0.5, extent - 0.5)`.
pub fn make_cardboard_occluder(
    slits: Vec<(f64, f64)>,
    orientation: Orientation,
    extent: usize,
) -> Result<OccluderSpec> {
    if slits.iter().any(|&(s, e)| !(s < e)) {
        return Err(Error::invalid("slit bounds must satisfy start < end"));
    }
    let mut spec = OccluderSpec {
        pattern: OccluderPattern::Cardboard { slits },
        orientation,
        intensity: 0.15,
        jitter: 0.0,
        seed: 0,
        r_o: 0.0,
        r_t: 0.0,
    };
    let (len, _) = spec.cover(-0.5, extent as f64 - 0.5);
    spec.r_o = len / extent as f64;
    Ok(spec)
}
