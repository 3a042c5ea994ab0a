//! Per-worker scenario profiles.
//!
//! Every worker has a 10x10 RIS; the workers differ in element spacing
//! (hence physical aperture) and in their TX/RX/scatterer layout, which is
//! drawn once per worker from a profile seed.

use rand::Rng;

use crate::channel::{Placement, ScenarioGeometry, Scatterer, DEFAULT_WAVELENGTH};
use crate::error::{Error, Result};
use crate::labeling::RateParams;
use crate::rng::{substream, Purpose};

pub const RIS_ROWS: usize = 10;
pub const RIS_COLS: usize = 10;

/// Half-width of the cone (around the TX direction) that holds the scatterers.
pub const SCATTER_CONE_DEG: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerProfile {
    pub id: usize,
    pub geometry: ScenarioGeometry,
    pub rate: RateParams,
}

impl WorkerProfile {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.rate.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSettings {
    pub workers: usize,
    /// Element spacing of each worker in carrier wavelengths; cycled if shorter than `workers`.
    pub spacings: Vec<f64>,
    pub wavelength: f64,
    pub scatterers: usize,
    pub seed: u64,
    pub rate: RateParams,
}

impl Default for ProfileSettings {
    fn default() -> Self {
        ProfileSettings {
            workers: 4,
            spacings: vec![0.125, 0.25, 0.5, 1.0],
            wavelength: DEFAULT_WAVELENGTH,
            scatterers: 4,
            seed: 2024,
            rate: RateParams::default(),
        }
    }
}

fn uniform_deg<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi).to_radians()
}

/// Builds one profile per worker.
pub fn default_profiles(settings: &ProfileSettings) -> Result<Vec<WorkerProfile>> {
    if settings.workers == 0 || settings.spacings.is_empty() || settings.scatterers == 0 {
        return Err(Error::InvalidArgument(
            "need at least one worker, one spacing and one scatterer".into(),
        ));
    }
    (0..settings.workers)
        .map(|id| {
            let mut rng = substream(settings.seed, Purpose::Profile, id as u64, 0);
            let tx = Placement {
                distance: rng.random_range(30.0..60.0),
                azimuth: uniform_deg(&mut rng, -60.0, -20.0),
                elevation: uniform_deg(&mut rng, -15.0, 15.0),
            };
            let rx = Placement {
                distance: rng.random_range(5.0..15.0),
                azimuth: uniform_deg(&mut rng, 10.0, 50.0),
                elevation: uniform_deg(&mut rng, -15.0, 15.0),
            };
            let scatterers = (0..settings.scatterers)
                .map(|_| Scatterer {
                    travel_distance: tx.distance * (1.0 + rng.random_range(0.05..0.3)),
                    azimuth: tx.azimuth
                        + uniform_deg(&mut rng, -SCATTER_CONE_DEG, SCATTER_CONE_DEG),
                    elevation: tx.elevation
                        + uniform_deg(&mut rng, -SCATTER_CONE_DEG, SCATTER_CONE_DEG),
                })
                .collect();
            let spacing = settings.spacings[id % settings.spacings.len()];
            let profile = WorkerProfile {
                id,
                geometry: ScenarioGeometry {
                    ris_rows: RIS_ROWS,
                    ris_cols: RIS_COLS,
                    element_spacing: spacing * settings.wavelength,
                    carrier_wavelength: settings.wavelength,
                    tx,
                    rx,
                    scatterers,
                },
                rate: settings.rate,
            };
            profile.validate()?;
            Ok(profile)
        })
        .collect()
}
