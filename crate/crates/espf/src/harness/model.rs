//! Scenario models the run loop drives: the orbital tracking plant and a
//! linear-Gaussian plant for desk-scale oracle scenarios.
//!
//! The filter state lives in *filter units* (physical units per axis times
//! `state_scale`); the orbital plant converts at its boundary. Scaling only
//! offsets the log-volume statistics — selection and claim gaps are
//! affine-invariant.

use nalgebra::{DMatrix, DVector, Vector3};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::ScenarioConfig;
use super::run::RunError;
use crate::orbit::{self, ForceConfig, OrbitState, Station, StressEvent};

/// One observation handed to the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub value: DVector<f64>,
    pub station: String,
    pub epoch_s: f64,
}

pub trait ScenarioModel {
    fn state_dim(&self) -> usize;
    fn meas_dim(&self) -> usize;
    /// Deterministic propagation of one support point (filter units).
    fn propagate_point(
        &self,
        x: &DVector<f64>,
        t0_s: f64,
        dt_s: f64,
    ) -> Result<DVector<f64>, RunError>;
    /// Truth propagation: process noise and stress included.
    fn propagate_truth(
        &self,
        x: &DVector<f64>,
        t0_s: f64,
        dt_s: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<DVector<f64>, RunError>;
    /// Observation at epoch `t`, or `None` during a visibility gap.
    fn observe_truth(
        &self,
        truth: &DVector<f64>,
        t_s: f64,
        step: usize,
        rng: &mut ChaCha8Rng,
    ) -> Option<Observation>;
    /// Predicted measurement of a support point for this observation.
    fn predict_measurement(&self, x: &DVector<f64>, obs: &Observation) -> DVector<f64>;
    fn sensor_imprecision(&self) -> DMatrix<f64>;
}

// ── Orbital plant ──

pub struct OrbitalPlant {
    pub scale: DVector<f64>,
    pub force: ForceConfig,
    pub stations: Vec<Station>,
    pub elevation_mask_deg: f64,
    pub sigma_range_km: f64,
    pub sigma_range_rate_kms: f64,
    pub process_noise_rtn: f64,
    pub stress: Vec<StressEvent>,
}

impl OrbitalPlant {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            scale: DVector::from_vec(cfg.state_scale.clone()),
            force: ForceConfig { j2_enabled: cfg.j2_enabled, step_s: cfg.integrator_step_s },
            stations: cfg.stations.clone(),
            elevation_mask_deg: cfg.elevation_mask_deg,
            sigma_range_km: cfg.sigma_range_km,
            sigma_range_rate_kms: cfg.sigma_range_rate_kms,
            process_noise_rtn: cfg.process_noise_rtn,
            stress: cfg.stress.clone(),
        }
    }

    pub fn to_filter_units(&self, physical: &DVector<f64>) -> DVector<f64> {
        physical.component_mul(&self.scale)
    }

    pub fn to_physical_units(&self, filter: &DVector<f64>) -> DVector<f64> {
        filter.component_div(&self.scale)
    }

    fn station(&self, name: &str) -> &Station {
        self.stations
            .iter()
            .find(|s| s.name == name)
            .expect("observation references a configured station")
    }
}

impl ScenarioModel for OrbitalPlant {
    fn state_dim(&self) -> usize {
        7
    }

    fn meas_dim(&self) -> usize {
        2
    }

    fn propagate_point(
        &self,
        x: &DVector<f64>,
        _t0_s: f64,
        dt_s: f64,
    ) -> Result<DVector<f64>, RunError> {
        let phys = self.to_physical_units(x);
        let state = OrbitState::from_vector(&phys);
        let out = orbit::propagate(&state, dt_s, &self.force, None)
            .map_err(|source| RunError::Dynamics { source })?;
        Ok(self.to_filter_units(&out.to_vector()))
    }

    fn propagate_truth(
        &self,
        x: &DVector<f64>,
        t0_s: f64,
        dt_s: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<DVector<f64>, RunError> {
        let phys = self.to_physical_units(x);
        let state = OrbitState::from_vector(&phys);
        // piecewise-constant RTN acceleration over the interval
        let accel = orbit::sample_rtn_accel(self.process_noise_rtn, rng);
        let propagated = orbit::propagate(&state, dt_s, &self.force, Some(&accel))
            .map_err(|source| RunError::Dynamics { source })?;
        let stressed = orbit::apply_stress(&propagated, &self.stress, t0_s, t0_s + dt_s);
        Ok(self.to_filter_units(&stressed.to_vector()))
    }

    fn observe_truth(
        &self,
        truth: &DVector<f64>,
        t_s: f64,
        step: usize,
        rng: &mut ChaCha8Rng,
    ) -> Option<Observation> {
        let phys = self.to_physical_units(truth);
        let state = OrbitState::from_vector(&phys);
        let n = self.stations.len();
        for k in 0..n {
            let st = &self.stations[(step + k) % n];
            let bias = st.range_bias_km + orbit::active_range_bias(&self.stress, &st.name, t_s);
            let biased = Station { range_bias_km: bias, ..st.clone() };
            match orbit::measure(
                &state,
                &biased,
                t_s,
                self.elevation_mask_deg,
                Some((self.sigma_range_km, self.sigma_range_rate_kms, rng)),
            ) {
                Ok(m) => {
                    return Some(Observation {
                        value: m.to_vector(),
                        station: st.name.clone(),
                        epoch_s: t_s,
                    })
                }
                Err(_) => continue,
            }
        }
        None
    }

    fn predict_measurement(&self, x: &DVector<f64>, obs: &Observation) -> DVector<f64> {
        let st = self.station(&obs.station);
        let station_r = st.eci_position(obs.epoch_s);
        let phys = self.to_physical_units(x);
        let state = OrbitState::from_vector(&phys);
        let (rho, rho_dot) = orbit::range_range_rate(&state, &station_r);
        DVector::from_vec(vec![rho, rho_dot])
    }

    fn sensor_imprecision(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_vec(vec![
            self.sigma_range_km * self.sigma_range_km,
            self.sigma_range_rate_kms * self.sigma_range_rate_kms,
        ]))
    }
}

/// Measurement model closure for diagnostics (frozen station position),
/// in filter units.
pub fn orbital_measurement_fn(
    plant: &OrbitalPlant,
    obs: &Observation,
) -> impl Fn(&DVector<f64>) -> DVector<f64> {
    let station_r: Vector3<f64> = plant.station(&obs.station).eci_position(obs.epoch_s);
    let scale = plant.scale.clone();
    move |x: &DVector<f64>| {
        let phys = x.component_div(&scale);
        let state = OrbitState::from_vector(&phys);
        let (rho, rho_dot) = orbit::range_range_rate(&state, &station_r);
        DVector::from_vec(vec![rho, rho_dot])
    }
}

// ── Linear plant ──

/// `x' = F x (+ w on truth)`, `y = H x + v`; one filter step per cadence.
pub struct LinearPlant {
    pub f: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub process_noise_chol: Option<DMatrix<f64>>,
    pub sensor: DMatrix<f64>,
    pub sensor_chol: DMatrix<f64>,
}

impl LinearPlant {
    pub fn new(
        f: DMatrix<f64>,
        h: DMatrix<f64>,
        process_noise: Option<DMatrix<f64>>,
        sensor: DMatrix<f64>,
    ) -> Self {
        let sensor_chol = crate::geometry::whitening_factor(&sensor).expect("sensor SPD");
        let process_noise_chol =
            process_noise.map(|q| crate::geometry::whitening_factor(&q).expect("Q SPD"));
        Self { f, h, process_noise_chol, sensor, sensor_chol }
    }

    fn dim(&self) -> usize {
        self.f.nrows()
    }
}

impl ScenarioModel for LinearPlant {
    fn state_dim(&self) -> usize {
        self.dim()
    }

    fn meas_dim(&self) -> usize {
        self.h.nrows()
    }

    fn propagate_point(
        &self,
        x: &DVector<f64>,
        _t0_s: f64,
        _dt_s: f64,
    ) -> Result<DVector<f64>, RunError> {
        Ok(&self.f * x)
    }

    fn propagate_truth(
        &self,
        x: &DVector<f64>,
        _t0_s: f64,
        _dt_s: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<DVector<f64>, RunError> {
        let mut out = &self.f * x;
        if let Some(lq) = &self.process_noise_chol {
            let w = DVector::from_fn(self.dim(), |_, _| {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            });
            out += lq * w;
        }
        Ok(out)
    }

    fn observe_truth(
        &self,
        truth: &DVector<f64>,
        t_s: f64,
        _step: usize,
        rng: &mut ChaCha8Rng,
    ) -> Option<Observation> {
        let m = self.meas_dim();
        let v = DVector::from_fn(m, |_, _| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
        });
        Some(Observation {
            value: &self.h * truth + &self.sensor_chol * v,
            station: "linear".into(),
            epoch_s: t_s,
        })
    }

    fn predict_measurement(&self, x: &DVector<f64>, _obs: &Observation) -> DVector<f64> {
        &self.h * x
    }

    fn sensor_imprecision(&self) -> DMatrix<f64> {
        self.sensor.clone()
    }
}
