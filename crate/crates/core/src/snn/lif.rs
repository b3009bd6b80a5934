//! Leaky integrate-and-fire dynamics and the rectangular surrogate derivative.

use ndarray::Array3;

use crate::error::{Error, Result};

/// Resting potential. Membranes start here and reset towards it.
pub const U_REST: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifConfig {
    /// Leak factor per step, in `[0, 1]`.
    pub alpha: f64,
    /// Firing threshold; `f64::INFINITY` turns the neuron into a pure integrator.
    pub u_th: f64,
    /// Support width of the rectangular surrogate.
    pub surrogate_width: f64,
}

impl Default for LifConfig {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            u_th: 1.0,
            surrogate_width: 1.0,
        }
    }
}

impl LifConfig {
    pub fn new(alpha: f64, u_th: f64, surrogate_width: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            u_th,
            surrogate_width,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.u_th.is_nan() || self.u_th <= 0.0 {
            return Err(Error::invalid(format!("threshold {} must be positive", self.u_th)));
        }
        if !(self.surrogate_width.is_finite() && self.surrogate_width > 0.0) {
            return Err(Error::invalid(format!(
                "surrogate width {} must be positive",
                self.surrogate_width
            )));
        }
        Ok(())
    }

    /// Hard spike: 1 when `u > u_th`.
    #[inline]
    pub fn fires(&self, u: f64) -> f64 {
        if u > self.u_th {
            1.0
        } else {
            0.0
        }
    }

    /// Clipped ramp whose derivative is the surrogate.
    #[inline]
    pub fn ramp(&self, u: f64) -> f64 {
        ((u - self.u_th) / self.surrogate_width + 0.5).clamp(0.0, 1.0)
    }
}

/// Membrane update `u = alpha * u_prev * (1 - o_prev) + current`.
#[inline]
pub fn membrane(alpha: f64, u_prev: f64, o_prev: f64, current: f64) -> f64 {
    alpha * u_prev * (1.0 - o_prev) + current
}

/// `(1/w)` inside `|u - u_th| < w/2`, zero elsewhere.
#[inline]
pub fn surrogate_grad(u: f64, cfg: &LifConfig) -> f64 {
    let w = cfg.surrogate_width;
    if (u - cfg.u_th).abs() < w / 2.0 {
        1.0 / w
    } else {
        0.0
    }
}

/// Potentials and last spikes of one layer, both shaped `(C, H, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LifLayerState {
    pub u: Array3<f64>,
    pub o_prev: Array3<f64>,
}

impl LifLayerState {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            u: Array3::from_elem((channels, height, width), U_REST),
            o_prev: Array3::zeros((channels, height, width)),
        }
    }
}

/// Advances one layer by a step. The returned state's `o_prev` holds the new
/// spikes, which zero the leak term at the following step.
pub fn lif_step(state: &LifLayerState, current: &Array3<f64>, cfg: &LifConfig) -> Result<(LifLayerState, Array3<f64>)> {
    if state.u.dim() != current.dim() || state.o_prev.dim() != current.dim() {
        return Err(Error::shape(format!(
            "state {:?} / {:?} vs current {:?}",
            state.u.dim(),
            state.o_prev.dim(),
            current.dim()
        )));
    }
    let mut u = state.u.clone();
    ndarray::Zip::from(&mut u)
        .and(&state.o_prev)
        .and(current)
        .for_each(|u, &o, &i| *u = membrane(cfg.alpha, *u, o, i));
    let spikes = u.mapv(|v| cfg.fires(v));
    Ok((
        LifLayerState {
            u,
            o_prev: spikes.clone(),
        },
        spikes,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Array3<f64> {
        Array3::from_elem((1, 1, 1), v)
    }

    fn run(cfg: &LifConfig, currents: &[f64]) -> Vec<(f64, f64)> {
        let mut s = LifLayerState::zeros(1, 1, 1);
        currents
            .iter()
            .map(|&c| {
                let (next, o) = lif_step(&s, &scalar(c), cfg).unwrap();
                s = next;
                (s.u[[0, 0, 0]], o[[0, 0, 0]])
            })
            .collect()
    }

    #[test]
    fn hand_iteration() {
        let out = run(&LifConfig::default(), &[0.6, 0.6, 0.0]);
        assert_eq!(out[0], (0.6, 0.0));
        assert!((out[1].0 - 1.14).abs() < 1e-12);
        assert_eq!(out[1].1, 1.0);
        assert_eq!(out[2], (0.0, 0.0));
    }

    #[test]
    fn subthreshold_decays_geometrically() {
        let cfg = LifConfig::default();
        let mut currents = vec![0.6];
        currents.extend([0.0; 20]);
        for (k, (u, o)) in run(&cfg, &currents).into_iter().enumerate() {
            assert_eq!(o, 0.0);
            assert!((u - 0.6 * 0.9f64.powi(k as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn infinite_threshold_integrates() {
        let cfg = LifConfig::new(1.0, f64::INFINITY, 1.0).unwrap();
        let currents = [0.5, 2.0, -1.0, 3.25];
        let out = run(&cfg, &currents);
        let mut sum = 0.0;
        for (c, (u, o)) in currents.iter().zip(out) {
            sum += c;
            assert_eq!((u, o), (sum, 0.0));
        }
    }

    #[test]
    fn surrogate_window() {
        let cfg = LifConfig::default();
        assert_eq!(surrogate_grad(1.0, &cfg), 1.0);
        assert_eq!(surrogate_grad(2.0, &cfg), 0.0);
        let step = 1e-4;
        let integral: f64 = (0..60_000).map(|i| surrogate_grad(-2.0 + (i as f64 + 0.5) * step, &cfg) * step).sum();
        assert!((integral - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ramp_is_surrogate_antiderivative() {
        let cfg = LifConfig::new(0.9, 1.0, 0.5).unwrap();
        for u in [0.5, 0.8, 0.9, 1.0, 1.2, 1.6] {
            let h = 1e-6;
            let fd = (cfg.ramp(u + h) - cfg.ramp(u - h)) / (2.0 * h);
            assert!((fd - surrogate_grad(u, &cfg)).abs() < 1e-6, "u={u}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(LifConfig::new(1.1, 1.0, 1.0).is_err());
        assert!(LifConfig::new(0.5, 0.0, 1.0).is_err());
        assert!(LifConfig::new(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let s = LifLayerState::zeros(2, 2, 2);
        assert!(lif_step(&s, &Array3::zeros((2, 2, 3)), &LifConfig::default()).is_err());
    }
}
