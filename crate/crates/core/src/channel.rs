//! Geometric RIS channel model.
//!
//! The TX–RIS link is a line-of-sight component plus a sum over scatterers
//! near the transmitter; the RIS–RX link is pure line of sight. Every link
//! is the product of an element radiation pattern, a free-space path loss
//! and a uniform planar array steering vector.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Exponent parameter of the element radiation pattern.
pub const PATTERN_Q0: f64 = 0.285;

/// 28 GHz carrier.
pub const DEFAULT_WAVELENGTH: f64 = 299_792_458.0 / 28.0e9;

/// Position of an object relative to the RIS centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub distance: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

/// A scatterer near the TX. `travel_distance` is the full TX→scatterer→RIS path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub travel_distance: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioGeometry {
    pub ris_rows: usize,
    pub ris_cols: usize,
    pub element_spacing: f64,
    pub carrier_wavelength: f64,
    pub tx: Placement,
    pub rx: Placement,
    pub scatterers: Vec<Scatterer>,
}

impl ScenarioGeometry {
    pub fn element_count(&self) -> usize {
        self.ris_rows * self.ris_cols
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidGeometry(msg));
        if self.element_count() == 0 {
            return bad("RIS must have at least one element".into());
        }
        if !(self.element_spacing > 0.0) || !(self.carrier_wavelength > 0.0) {
            return bad("element spacing and wavelength must be positive".into());
        }
        if self.scatterers.is_empty() {
            return bad("at least one scatterer is required".into());
        }
        let in_front = |b: f64| b.abs() < FRAC_PI_2;
        for (name, p) in [("tx", &self.tx), ("rx", &self.rx)] {
            if !(p.distance > 0.0) {
                return bad(format!("{name} distance must be positive"));
            }
            if !in_front(p.elevation) {
                return bad(format!("{name} elevation outside (-pi/2, pi/2)"));
            }
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if !(s.travel_distance > 0.0) {
                return bad(format!("scatterer {i} distance must be positive"));
            }
            if !in_front(s.elevation) {
                return bad(format!("scatterer {i} elevation outside (-pi/2, pi/2)"));
            }
        }
        Ok(())
    }
}

/// One CSI draw together with the random quantities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    /// TX–RIS channel, LoS plus NLoS.
    pub h: Vec<Complex64>,
    /// RIS–RX channel.
    pub g: Vec<Complex64>,
    pub eta_g: f64,
    pub eta_h: f64,
    pub gammas: Vec<Complex64>,
}

/// Element radiation pattern `2(2q0+1) cos^(2q0)(b)`, zero outside the front hemisphere.
pub fn radiation_gain(elevation: f64) -> f64 {
    if elevation.abs() >= FRAC_PI_2 {
        return 0.0;
    }
    2.0 * (2.0 * PATTERN_Q0 + 1.0) * elevation.cos().powf(2.0 * PATTERN_Q0)
}

/// Free-space path loss `(wavelength / (4 pi d))^2`.
pub fn path_loss(distance: f64, wavelength: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::NonPositiveDistance(distance));
    }
    Ok(free_space(distance, wavelength))
}

fn free_space(distance: f64, wavelength: f64) -> f64 {
    let r = wavelength / (4.0 * PI * distance);
    r * r
}

/// UPA steering vector, row-major over the `rows x cols` grid.
pub fn array_response(azimuth: f64, elevation: f64, geom: &ScenarioGeometry) -> Vec<Complex64> {
    let k = TAU / geom.carrier_wavelength * geom.element_spacing;
    let row_step = elevation.sin();
    let col_step = azimuth.sin() * elevation.cos();
    let mut out = Vec::with_capacity(geom.element_count());
    for r in 0..geom.ris_rows {
        for c in 0..geom.ris_cols {
            let phase = k * (r as f64 * row_step + c as f64 * col_step);
            out.push(Complex64::from_polar(1.0, phase));
        }
    }
    out
}

/// Deterministic LoS link toward `place` with common phase `eta`.
pub fn los_channel(geom: &ScenarioGeometry, place: &Placement, eta: f64) -> Vec<Complex64> {
    let amplitude = (radiation_gain(place.elevation)
        * free_space(place.distance, geom.carrier_wavelength))
    .sqrt();
    let common = Complex64::from_polar(amplitude, eta);
    array_response(place.azimuth, place.elevation, geom)
        .into_iter()
        .map(|w| common * w)
        .collect()
}

/// Deterministic NLoS sum for given per-scatterer gains.
pub fn nlos_channel(geom: &ScenarioGeometry, gammas: &[Complex64]) -> Result<Vec<Complex64>> {
    if gammas.len() != geom.scatterers.len() {
        return Err(Error::DimensionMismatch {
            expected: geom.scatterers.len(),
            actual: gammas.len(),
        });
    }
    let scale = 1.0 / geom.scatterers.len() as f64;
    let mut h = vec![Complex64::new(0.0, 0.0); geom.element_count()];
    for (s, gamma) in geom.scatterers.iter().zip(gammas) {
        let amplitude = (radiation_gain(s.elevation)
            * free_space(s.travel_distance, geom.carrier_wavelength))
        .sqrt();
        let coef = gamma * amplitude * scale;
        for (hq, w) in h.iter_mut().zip(array_response(s.azimuth, s.elevation, geom)) {
            *hq += coef * w;
        }
    }
    Ok(h)
}

fn uniform_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let eta = rng.random::<f64>() * TAU;
    if eta >= TAU {
        0.0
    } else {
        eta
    }
}

/// Standard circularly-symmetric complex normal, `E|z|^2 = 1`.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gen_ris_rx_channel<R: Rng + ?Sized>(
    geom: &ScenarioGeometry,
    rng: &mut R,
) -> (Vec<Complex64>, f64) {
    let eta = uniform_phase(rng);
    (los_channel(geom, &geom.rx, eta), eta)
}

pub fn gen_tx_ris_los<R: Rng + ?Sized>(
    geom: &ScenarioGeometry,
    rng: &mut R,
) -> (Vec<Complex64>, f64) {
    let eta = uniform_phase(rng);
    (los_channel(geom, &geom.tx, eta), eta)
}

pub fn gen_tx_ris_nlos<R: Rng + ?Sized>(
    geom: &ScenarioGeometry,
    rng: &mut R,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let gammas: Vec<Complex64> = (0..geom.scatterers.len())
        .map(|_| standard_complex_normal(rng))
        .collect();
    let h = nlos_channel(geom, &gammas).expect("gain count matches scatterer count");
    (h, gammas)
}

/// Draws `g`, then the LoS phase of `h`, then the scatterer gains.
pub fn gen_channel_pair<R: Rng + ?Sized>(geom: &ScenarioGeometry, rng: &mut R) -> ChannelSample {
    let (g, eta_g) = gen_ris_rx_channel(geom, rng);
    let (h_los, eta_h) = gen_tx_ris_los(geom, rng);
    let (h_nlos, gammas) = gen_tx_ris_nlos(geom, rng);
    let h = h_los.iter().zip(&h_nlos).map(|(a, b)| a + b).collect();
    ChannelSample {
        h,
        g,
        eta_g,
        eta_h,
        gammas,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn geometry() -> ScenarioGeometry {
        let lambda = DEFAULT_WAVELENGTH;
        ScenarioGeometry {
            ris_rows: 10,
            ris_cols: 10,
            element_spacing: lambda / 2.0,
            carrier_wavelength: lambda,
            tx: Placement {
                distance: 40.0,
                azimuth: -0.6,
                elevation: 0.1,
            },
            rx: Placement {
                distance: 8.0,
                azimuth: 0.5,
                elevation: -0.05,
            },
            scatterers: vec![
                Scatterer {
                    travel_distance: 46.0,
                    azimuth: -0.5,
                    elevation: 0.2,
                },
                Scatterer {
                    travel_distance: 50.0,
                    azimuth: -0.7,
                    elevation: 0.0,
                },
                Scatterer {
                    travel_distance: 43.0,
                    azimuth: -0.65,
                    elevation: 0.15,
                },
                Scatterer {
                    travel_distance: 49.0,
                    azimuth: -0.55,
                    elevation: -0.1,
                },
            ],
        }
    }

    fn scale_distances(geom: &ScenarioGeometry, k: f64) -> ScenarioGeometry {
        let mut g = geom.clone();
        g.tx.distance *= k;
        g.rx.distance *= k;
        for s in &mut g.scatterers {
            s.travel_distance *= k;
        }
        g
    }

    #[test]
    #[allow(clippy::approx_constant)] // 3.14 is the element's peak gain, not pi
    fn radiation_gain_values() {
        assert!((radiation_gain(0.0) - 3.14).abs() < 1e-12);
        assert_eq!(radiation_gain(FRAC_PI_2), 0.0);
        assert_eq!(radiation_gain(-2.0), 0.0);
        let expected = 3.14 * 0.5f64.powf(0.57);
        assert!((radiation_gain(PI / 3.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn path_loss_values() {
        let lambda = 0.0107;
        assert!((path_loss(lambda / (4.0 * PI), lambda).unwrap() - 1.0).abs() < 1e-12);
        let ratio = path_loss(20.0, lambda).unwrap() / path_loss(10.0, lambda).unwrap();
        assert!((ratio - 0.25).abs() < 1e-15);
        let l = path_loss(50.0, lambda).unwrap();
        assert!((l - 2.900_065_578_8e-10).abs() / l < 1e-9, "{l}");
        assert!(matches!(path_loss(0.0, lambda), Err(Error::NonPositiveDistance(_))));
        assert!(path_loss(-1.0, lambda).is_err());
    }

    #[test]
    fn array_response_is_unit_modulus_steering() {
        let geom = geometry();
        let ones = array_response(0.0, 0.0, &geom);
        assert!(ones.iter().all(|w| (w - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let mut r = rng::from_seed(3);
        for _ in 0..20 {
            let a = r.random_range(-PI..PI);
            let b = r.random_range(-1.5..1.5);
            let w = array_response(a, b, &geom);
            assert_eq!(w.len(), 100);
            assert_eq!(w[0], Complex64::new(1.0, 0.0));
            assert!(w.iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn ris_rx_channel_flat_magnitude() {
        let geom = geometry();
        let (g, eta) = gen_ris_rx_channel(&geom, &mut rng::from_seed(1));
        assert!((0.0..TAU).contains(&eta));
        let mags: Vec<f64> = g.iter().map(|x| x.norm()).collect();
        let spread = mags.iter().cloned().fold(f64::MIN, f64::max)
            - mags.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread < 1e-12);

        let mut grazing = geom.clone();
        grazing.rx.elevation = FRAC_PI_2;
        let (g, _) = gen_ris_rx_channel(&grazing, &mut rng::from_seed(1));
        assert!(g.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn los_magnitude_halves_when_distance_doubles() {
        let geom = geometry();
        let mut far = geom.clone();
        far.tx.distance *= 2.0;
        let (near_h, _) = gen_tx_ris_los(&geom, &mut rng::from_seed(4));
        let (far_h, _) = gen_tx_ris_los(&far, &mut rng::from_seed(4));
        for (a, b) in near_h.iter().zip(&far_h) {
            assert!((b.norm() / a.norm() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn power_scaling_is_inverse_square() {
        let geom = geometry();
        for k in [0.5, 2.0, 3.7] {
            let scaled = scale_distances(&geom, k);
            let p0 = los_channel(&geom, &geom.tx, 0.0)[7].norm_sqr();
            let p1 = los_channel(&scaled, &scaled.tx, 0.0)[7].norm_sqr();
            assert!((p1 / p0 - 1.0 / (k * k)).abs() < 1e-9);
        }
    }

    #[test]
    fn nlos_with_zero_gain_vanishes() {
        let mut geom = geometry();
        geom.scatterers.truncate(1);
        let h = nlos_channel(&geom, &[Complex64::new(0.0, 0.0)]).unwrap();
        assert!(h.iter().all(|x| x.norm() == 0.0));
        assert!(nlos_channel(&geom, &[]).is_err());
    }

    #[test]
    fn scatterers_on_los_direction_add_coherently() {
        let mut geom = geometry();
        let tx = geom.tx;
        geom.scatterers = (0..3)
            .map(|i| Scatterer {
                travel_distance: tx.distance * (1.1 + 0.1 * i as f64),
                azimuth: tx.azimuth,
                elevation: tx.elevation,
            })
            .collect();
        let eta = 1.3;
        let los = los_channel(&geom, &tx, eta);
        let nlos = nlos_channel(&geom, &[Complex64::new(1.0, 0.0); 3]).unwrap();
        let steering = array_response(tx.azimuth, tx.elevation, &geom);

        let gain = radiation_gain(tx.elevation);
        let los_amp = (gain * path_loss(tx.distance, geom.carrier_wavelength).unwrap()).sqrt();
        let nlos_amp: f64 = geom
            .scatterers
            .iter()
            .map(|s| (gain * path_loss(s.travel_distance, geom.carrier_wavelength).unwrap()).sqrt())
            .sum::<f64>()
            / 3.0;
        let ratio = nlos_amp / los_amp;
        for q in 0..100 {
            let h = los[q] + nlos[q];
            let expected = los[q] * (1.0 + ratio * Complex64::from_polar(1.0, -eta));
            assert!((h - expected).norm() < 1e-12 * los_amp);
            let per_element = h / steering[q];
            assert!((per_element - (los[0] + nlos[0])).norm() < 1e-12 * los_amp);
        }
    }

    #[test]
    fn channel_pair_is_deterministic() {
        let geom = geometry();
        let a = gen_channel_pair(&geom, &mut rng::from_seed(11));
        let b = gen_channel_pair(&geom, &mut rng::from_seed(11));
        assert_eq!(a, b);
        let bits = |s: &ChannelSample| -> Vec<u64> {
            s.h.iter().chain(&s.g).flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
        };
        assert_eq!(bits(&a), bits(&b));

        let c = gen_channel_pair(&geom, &mut rng::from_seed(12));
        assert_ne!(a.h, c.h);
        // g differs only by its common phase.
        for q in 0..100 {
            assert!((a.g[q].norm() - c.g[q].norm()).abs() < 1e-15);
            let rot = Complex64::from_polar(1.0, c.eta_g - a.eta_g);
            assert!((a.g[q] * rot - c.g[q]).norm() < 1e-12 * a.g[q].norm());
        }
        assert_eq!(a.h.len(), 100);
        assert_eq!(a.gammas.len(), 4);
    }

    #[test]
    fn validation_rejects_bad_geometry() {
        let mut g = geometry();
        assert!(g.validate().is_ok());
        g.scatterers.clear();
        assert!(g.validate().is_err());
        let mut g = geometry();
        g.tx.elevation = FRAC_PI_2;
        assert!(g.validate().is_err());
        let mut g = geometry();
        g.ris_rows = 0;
        assert!(g.validate().is_err());
        let mut g = geometry();
        g.rx.distance = 0.0;
        assert!(g.validate().is_err());
    }
}
