//! Scenario configuration and its flat text format.
//!
//! The format is line-oriented `key = value` with dotted section names and
//! `#` comments. Unknown keys, duplicate keys, and malformed values are
//! field-level errors. A file overrides the nominal defaults, so short
//! configs stay short; listing any `station.N.*` key replaces the default
//! station set, and listing any `stress.*` key rebuilds the stress events.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::orbit::{Station, StressEvent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {reason}")]
    BadValue { line: usize, key: String, reason: String },
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaLaw {
    pub rho_c: f64,
    pub rho_d: f64,
    pub s_cap: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl SigmaLaw {
    /// `σ' = clamp(σ (ρ_c + ρ_d min(S̄, cap)), σ_min, σ_max)`.
    pub fn next(&self, sigma: f64, surprisal: f64) -> f64 {
        (sigma * (self.rho_c + self.rho_d * surprisal.min(self.s_cap)))
            .clamp(self.sigma_min, self.sigma_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seeds {
    pub truth: u64,
    pub measurement: u64,
    pub comparator: u64,
    pub init: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub duration_days: f64,
    pub cadence_s: f64,
    pub grid_level: u8,
    pub kernel_sharpness: f64,
    pub mvee_tolerance: f64,
    pub entropy_levels: usize,
    pub entropy_floor: f64,
    pub pcrb_slack: f64,
    pub sigma0: f64,
    pub sigma_law: SigmaLaw,
    pub vfi_eps_min: f64,
    pub vfi_lambda_max: f64,
    /// Physical-to-filter unit scaling per state axis.
    pub state_scale: Vec<f64>,
    pub init_kepler: [f64; 6], // a_km, ecc, inc_deg, raan_deg, argp_deg, nu_deg
    pub init_cd: f64,
    /// 1σ cloud extents in physical units (km, km/s, Cd).
    pub init_cloud_sigma: Vec<f64>,
    pub init_center_offset_scale: f64,
    pub sigma_range_km: f64,
    pub sigma_range_rate_kms: f64,
    pub elevation_mask_deg: f64,
    pub process_noise_rtn: f64,
    pub integrator_step_s: f64,
    pub j2_enabled: bool,
    pub stations: Vec<Station>,
    pub stress: Vec<StressEvent>,
    pub seeds: Seeds,
    pub claims_draws: usize,
    pub claims_run_cadence: usize,
    pub claims_levels: usize,
    pub debug_asserts: bool,
}

impl ScenarioConfig {
    /// Clean LEO tracking, no injected errors.
    pub fn nominal() -> Self {
        Self {
            name: "nominal".into(),
            duration_days: 2.0,
            cadence_s: 197.0,
            grid_level: 3,
            kernel_sharpness: 0.3,
            mvee_tolerance: 1e-7,
            entropy_levels: 1024,
            entropy_floor: -30.0,
            pcrb_slack: 0.05,
            sigma0: 1.0,
            sigma_law: SigmaLaw {
                rho_c: 0.9703,
                rho_d: 0.3,
                s_cap: 10.0,
                sigma_min: 0.05,
                sigma_max: 5.0,
            },
            vfi_eps_min: 1e-12,
            vfi_lambda_max: 1e18,
            state_scale: vec![1e3, 1e3, 1e3, 1e6, 1e6, 1e6, 1e2],
            init_kepler: [6878.0, 0.001, 51.6, 30.0, 0.0, 0.0],
            init_cd: 2.2,
            init_cloud_sigma: vec![1.0, 1.0, 1.0, 1e-3, 1e-3, 1e-3, 0.1],
            init_center_offset_scale: 0.3,
            sigma_range_km: 1e-3,
            sigma_range_rate_kms: 1e-5,
            elevation_mask_deg: 10.0,
            process_noise_rtn: 5e-12,
            integrator_step_s: 10.0,
            j2_enabled: true,
            stations: default_stations(),
            stress: Vec::new(),
            seeds: Seeds { truth: 1, measurement: 2, comparator: 3, init: 4 },
            claims_draws: 50,
            claims_run_cadence: 10,
            claims_levels: 16,
            debug_asserts: false,
        }
    }

    /// Nominal plus the maneuver + range-bias injection.
    pub fn stress() -> Self {
        let mut cfg = Self::nominal();
        cfg.name = "stress".into();
        cfg.stress = vec![
            StressEvent::Maneuver { epoch_days: 1.0, delta_v_kms: 0.010 },
            StressEvent::RangeBias { station: "Arecibo".into(), from_day: 0.0, bias_km: 0.020 },
        ];
        cfg
    }

    pub fn state_dim(&self) -> usize {
        7
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let req = |ok: bool, key: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid { key: key.into(), reason: reason.into() })
            }
        };
        req(self.duration_days > 0.0, "scenario.duration_days", "must be positive")?;
        req(self.cadence_s > 0.0, "scenario.cadence_s", "must be positive")?;
        req(
            self.grid_level == 2 || self.grid_level == 3,
            "grid.level",
            "supported levels are 2 and 3",
        )?;
        req(self.kernel_sharpness > 0.0, "grid.kernel_sharpness", "must be positive")?;
        req(self.mvee_tolerance > 0.0, "mvee.tolerance", "must be positive")?;
        req(self.entropy_levels >= 8, "entropy.levels", "need at least 8 levels")?;
        req(self.entropy_floor < 0.0, "entropy.floor_nats", "floor must be negative")?;
        req(self.pcrb_slack >= 0.0, "pcrb.slack_nats", "must be non-negative")?;
        req(self.sigma0 > 0.0, "sigma.initial", "must be positive")?;
        req(
            self.sigma_law.sigma_min > 0.0,
            "sigma.min",
            "a positive bandwidth floor is mandatory",
        )?;
        req(
            self.sigma_law.sigma_max > self.sigma_law.sigma_min,
            "sigma.max",
            "must exceed sigma.min",
        )?;
        req(
            self.vfi_eps_min > 0.0 && self.vfi_eps_min < self.vfi_lambda_max,
            "vfi.eps_min",
            "need 0 < eps_min < lambda_max",
        )?;
        req(self.state_scale.len() == 7, "state.scale", "need exactly 7 entries")?;
        req(
            self.state_scale.iter().all(|&s| s > 0.0),
            "state.scale",
            "entries must be positive",
        )?;
        req(self.init_cloud_sigma.len() == 7, "init.cloud_sigma", "need exactly 7 entries")?;
        req(
            self.init_cloud_sigma.iter().all(|&s| s > 0.0),
            "init.cloud_sigma",
            "entries must be positive",
        )?;
        req(self.init_kepler[0] > 6378.137, "init.kepler_a_km", "orbit must clear the surface")?;
        req(self.sigma_range_km > 0.0, "measurement.sigma_range_km", "must be positive")?;
        req(
            self.sigma_range_rate_kms > 0.0,
            "measurement.sigma_range_rate_kms",
            "must be positive",
        )?;
        req(self.integrator_step_s > 0.0, "integrator.step_s", "must be positive")?;
        req(!self.stations.is_empty(), "station.0.name", "need at least one station")?;
        for (i, st) in self.stations.iter().enumerate() {
            req(
                (-90.0..=90.0).contains(&st.lat_deg),
                &format!("station.{i}.lat_deg"),
                "latitude must lie in [-90, 90]",
            )?;
        }
        for ev in &self.stress {
            if let StressEvent::Maneuver { delta_v_kms, .. } = ev {
                req(*delta_v_kms >= 0.0, "stress.maneuver.delta_v_kms", "must be non-negative")?;
            }
        }
        req(self.claims_draws >= 1, "claims.draws", "need at least one draw")?;
        req(self.claims_run_cadence >= 1, "claims.run_cadence", "must be at least 1")?;
        req(self.claims_levels >= 8, "claims.levels", "need at least 8 levels")?;
        Ok(())
    }

    /// Number of measurement epochs in the run.
    pub fn step_count(&self) -> usize {
        (self.duration_days * 86_400.0 / self.cadence_s).floor() as usize
    }

    /// Parses the flat key-value format over the nominal defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::nominal();
        let mut seen = BTreeSet::new();
        let mut stations: Vec<(usize, StationDraft)> = Vec::new();
        let mut stress = StressDraft::default();

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            let Some(eq) = stripped.find('=') else {
                return Err(ConfigError::Syntax { line, text: stripped.into() });
            };
            let key = stripped[..eq].trim();
            let value = stripped[eq + 1..].trim();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line, text: stripped.into() });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey { line, key: key.into() });
            }
            apply_key(&mut cfg, &mut stations, &mut stress, key, value, line)?;
        }

        if !stations.is_empty() {
            stations.sort_by_key(|(i, _)| *i);
            let mut list = Vec::new();
            for (i, d) in stations {
                list.push(d.finish(i)?);
            }
            cfg.stations = list;
        }
        if let Some(events) = stress.finish()? {
            cfg.stress = events;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serializes every field in the parse format (round-trips through
    /// [`ScenarioConfig::parse`]).
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kep = &self.init_kepler;
        let _ = write!(
            s,
            "scenario.name = {}\n\
             scenario.duration_days = {}\n\
             scenario.cadence_s = {}\n\
             grid.level = {}\n\
             grid.kernel_sharpness = {}\n\
             mvee.tolerance = {}\n\
             entropy.levels = {}\n\
             entropy.floor_nats = {}\n\
             pcrb.slack_nats = {}\n\
             sigma.initial = {}\n\
             sigma.rho_c = {}\n\
             sigma.rho_d = {}\n\
             sigma.s_cap = {}\n\
             sigma.min = {}\n\
             sigma.max = {}\n\
             vfi.eps_min = {}\n\
             vfi.lambda_max = {}\n\
             state.scale = {}\n\
             init.kepler_a_km = {}\n\
             init.kepler_ecc = {}\n\
             init.kepler_inc_deg = {}\n\
             init.kepler_raan_deg = {}\n\
             init.kepler_argp_deg = {}\n\
             init.kepler_nu_deg = {}\n\
             init.cd = {}\n\
             init.cloud_sigma = {}\n\
             init.center_offset_scale = {}\n\
             measurement.sigma_range_km = {}\n\
             measurement.sigma_range_rate_kms = {}\n\
             measurement.elevation_mask_deg = {}\n\
             process_noise.rtn_accel = {}\n\
             integrator.step_s = {}\n\
             integrator.j2 = {}\n\
             seeds.truth = {}\n\
             seeds.measurement = {}\n\
             seeds.comparator = {}\n\
             seeds.init = {}\n\
             claims.draws = {}\n\
             claims.run_cadence = {}\n\
             claims.levels = {}\n\
             debug.asserts = {}\n",
            self.name,
            self.duration_days,
            self.cadence_s,
            self.grid_level,
            self.kernel_sharpness,
            self.mvee_tolerance,
            self.entropy_levels,
            self.entropy_floor,
            self.pcrb_slack,
            self.sigma0,
            self.sigma_law.rho_c,
            self.sigma_law.rho_d,
            self.sigma_law.s_cap,
            self.sigma_law.sigma_min,
            self.sigma_law.sigma_max,
            self.vfi_eps_min,
            self.vfi_lambda_max,
            join(&self.state_scale),
            kep[0],
            kep[1],
            kep[2],
            kep[3],
            kep[4],
            kep[5],
            self.init_cd,
            join(&self.init_cloud_sigma),
            self.init_center_offset_scale,
            self.sigma_range_km,
            self.sigma_range_rate_kms,
            self.elevation_mask_deg,
            self.process_noise_rtn,
            self.integrator_step_s,
            self.j2_enabled,
            self.seeds.truth,
            self.seeds.measurement,
            self.seeds.comparator,
            self.seeds.init,
            self.claims_draws,
            self.claims_run_cadence,
            self.claims_levels,
            self.debug_asserts,
        );
        for (i, st) in self.stations.iter().enumerate() {
            let _ = write!(
                s,
                "station.{i}.name = {}\nstation.{i}.lat_deg = {}\nstation.{i}.lon_deg = {}\nstation.{i}.alt_km = {}\n",
                st.name, st.lat_deg, st.lon_deg, st.alt_km
            );
        }
        for ev in &self.stress {
            match ev {
                StressEvent::Maneuver { epoch_days, delta_v_kms } => {
                    let _ = write!(
                        s,
                        "stress.maneuver.epoch_days = {epoch_days}\nstress.maneuver.delta_v_kms = {delta_v_kms}\n"
                    );
                }
                StressEvent::RangeBias { station, from_day, bias_km } => {
                    let _ = write!(
                        s,
                        "stress.range_bias.station = {station}\nstress.range_bias.from_day = {from_day}\nstress.range_bias.bias_km = {bias_km}\n"
                    );
                }
            }
        }
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn default_stations() -> Vec<Station> {
    vec![
        Station {
            name: "Arecibo".into(),
            lat_deg: 18.344,
            lon_deg: -66.753,
            alt_km: 0.497,
            range_bias_km: 0.0,
        },
        Station {
            name: "Kwajalein".into(),
            lat_deg: 8.717,
            lon_deg: 167.733,
            alt_km: 0.040,
            range_bias_km: 0.0,
        },
        Station {
            name: "DiegoGarcia".into(),
            lat_deg: -7.270,
            lon_deg: 72.370,
            alt_km: 0.003,
            range_bias_km: 0.0,
        },
    ]
}

#[derive(Default, Clone)]
struct StationDraft {
    name: Option<String>,
    lat: Option<f64>,
    lon: Option<f64>,
    alt: Option<f64>,
}

impl StationDraft {
    fn finish(self, idx: usize) -> Result<Station, ConfigError> {
        let missing = |field: &str| ConfigError::Invalid {
            key: format!("station.{idx}.{field}"),
            reason: "missing".into(),
        };
        Ok(Station {
            name: self.name.ok_or_else(|| missing("name"))?,
            lat_deg: self.lat.ok_or_else(|| missing("lat_deg"))?,
            lon_deg: self.lon.ok_or_else(|| missing("lon_deg"))?,
            alt_km: self.alt.ok_or_else(|| missing("alt_km"))?,
            range_bias_km: 0.0,
        })
    }
}

#[derive(Default)]
struct StressDraft {
    any: bool,
    maneuver_epoch: Option<f64>,
    maneuver_dv: Option<f64>,
    bias_station: Option<String>,
    bias_from: Option<f64>,
    bias_km: Option<f64>,
}

impl StressDraft {
    fn finish(self) -> Result<Option<Vec<StressEvent>>, ConfigError> {
        if !self.any {
            return Ok(None);
        }
        let mut events = Vec::new();
        match (self.maneuver_epoch, self.maneuver_dv) {
            (Some(e), Some(dv)) => {
                events.push(StressEvent::Maneuver { epoch_days: e, delta_v_kms: dv })
            }
            (None, None) => {}
            _ => {
                return Err(ConfigError::Invalid {
                    key: "stress.maneuver".into(),
                    reason: "epoch_days and delta_v_kms must both be given".into(),
                })
            }
        }
        match (self.bias_station, self.bias_from, self.bias_km) {
            (Some(st), from, Some(b)) => events.push(StressEvent::RangeBias {
                station: st,
                from_day: from.unwrap_or(0.0),
                bias_km: b,
            }),
            (None, None, None) => {}
            _ => {
                return Err(ConfigError::Invalid {
                    key: "stress.range_bias".into(),
                    reason: "station and bias_km must both be given".into(),
                })
            }
        }
        Ok(Some(events))
    }
}

fn apply_key(
    cfg: &mut ScenarioConfig,
    stations: &mut Vec<(usize, StationDraft)>,
    stress: &mut StressDraft,
    key: &str,
    value: &str,
    line: usize,
) -> Result<(), ConfigError> {
    let bad = |reason: String| ConfigError::BadValue { line, key: key.into(), reason };
    let f = |v: &str| v.parse::<f64>().map_err(|e| bad(e.to_string()));
    let finite = |v: &str| {
        f(v).and_then(|x| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(bad("value must be finite".into()))
            }
        })
    };
    let u = |v: &str| v.parse::<u64>().map_err(|e| bad(e.to_string()));
    let us = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
    let b = |v: &str| v.parse::<bool>().map_err(|e| bad(e.to_string()));
    let list7 = |v: &str| -> Result<Vec<f64>, ConfigError> {
        let parts: Result<Vec<f64>, _> = v.split(',').map(|p| finite(p.trim())).collect();
        let parts = parts?;
        if parts.len() != 7 {
            return Err(bad(format!("expected 7 comma-separated values, got {}", parts.len())));
        }
        Ok(parts)
    };

    if let Some(rest) = key.strip_prefix("station.") {
        let mut it = rest.splitn(2, '.');
        let idx: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("station index must be an integer".into()))?;
        let field = it.next().ok_or_else(|| bad("missing station field".into()))?;
        if idx >= 16 {
            return Err(bad("at most 16 stations supported".into()));
        }
        let entry = match stations.iter_mut().find(|(i, _)| *i == idx) {
            Some((_, d)) => d,
            None => {
                stations.push((idx, StationDraft::default()));
                &mut stations.last_mut().unwrap().1
            }
        };
        match field {
            "name" => entry.name = Some(value.to_string()),
            "lat_deg" => entry.lat = Some(finite(value)?),
            "lon_deg" => entry.lon = Some(finite(value)?),
            "alt_km" => entry.alt = Some(finite(value)?),
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
        return Ok(());
    }

    match key {
        "scenario.name" => cfg.name = value.to_string(),
        "scenario.duration_days" => cfg.duration_days = finite(value)?,
        "scenario.cadence_s" => cfg.cadence_s = finite(value)?,
        "grid.level" => {
            cfg.grid_level = value.parse::<u8>().map_err(|e| bad(e.to_string()))?;
        }
        "grid.kernel_sharpness" => cfg.kernel_sharpness = finite(value)?,
        "mvee.tolerance" => cfg.mvee_tolerance = finite(value)?,
        "entropy.levels" => cfg.entropy_levels = us(value)?,
        "entropy.floor_nats" => cfg.entropy_floor = finite(value)?,
        "pcrb.slack_nats" => cfg.pcrb_slack = finite(value)?,
        "sigma.initial" => cfg.sigma0 = finite(value)?,
        "sigma.rho_c" => cfg.sigma_law.rho_c = finite(value)?,
        "sigma.rho_d" => cfg.sigma_law.rho_d = finite(value)?,
        "sigma.s_cap" => cfg.sigma_law.s_cap = finite(value)?,
        "sigma.min" => cfg.sigma_law.sigma_min = finite(value)?,
        "sigma.max" => cfg.sigma_law.sigma_max = finite(value)?,
        "vfi.eps_min" => cfg.vfi_eps_min = finite(value)?,
        "vfi.lambda_max" => cfg.vfi_lambda_max = finite(value)?,
        "state.scale" => cfg.state_scale = list7(value)?,
        "init.kepler_a_km" => cfg.init_kepler[0] = finite(value)?,
        "init.kepler_ecc" => cfg.init_kepler[1] = finite(value)?,
        "init.kepler_inc_deg" => cfg.init_kepler[2] = finite(value)?,
        "init.kepler_raan_deg" => cfg.init_kepler[3] = finite(value)?,
        "init.kepler_argp_deg" => cfg.init_kepler[4] = finite(value)?,
        "init.kepler_nu_deg" => cfg.init_kepler[5] = finite(value)?,
        "init.cd" => cfg.init_cd = finite(value)?,
        "init.cloud_sigma" => cfg.init_cloud_sigma = list7(value)?,
        "init.center_offset_scale" => cfg.init_center_offset_scale = finite(value)?,
        "measurement.sigma_range_km" => cfg.sigma_range_km = finite(value)?,
        "measurement.sigma_range_rate_kms" => cfg.sigma_range_rate_kms = finite(value)?,
        "measurement.elevation_mask_deg" => cfg.elevation_mask_deg = finite(value)?,
        "process_noise.rtn_accel" => cfg.process_noise_rtn = finite(value)?,
        "integrator.step_s" => cfg.integrator_step_s = finite(value)?,
        "integrator.j2" => cfg.j2_enabled = b(value)?,
        "seeds.truth" => cfg.seeds.truth = u(value)?,
        "seeds.measurement" => cfg.seeds.measurement = u(value)?,
        "seeds.comparator" => cfg.seeds.comparator = u(value)?,
        "seeds.init" => cfg.seeds.init = u(value)?,
        "claims.draws" => cfg.claims_draws = us(value)?,
        "claims.run_cadence" => cfg.claims_run_cadence = us(value)?,
        "claims.levels" => cfg.claims_levels = us(value)?,
        "debug.asserts" => cfg.debug_asserts = b(value)?,
        "stress.maneuver.epoch_days" => {
            stress.any = true;
            stress.maneuver_epoch = Some(finite(value)?);
        }
        "stress.maneuver.delta_v_kms" => {
            stress.any = true;
            stress.maneuver_dv = Some(finite(value)?);
        }
        "stress.range_bias.station" => {
            stress.any = true;
            stress.bias_station = Some(value.to_string());
        }
        "stress.range_bias.from_day" => {
            stress.any = true;
            stress.bias_from = Some(finite(value)?);
        }
        "stress.range_bias.bias_km" => {
            stress.any = true;
            stress.bias_km = Some(finite(value)?);
        }
        _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ScenarioConfig::nominal().validate().unwrap();
        ScenarioConfig::stress().validate().unwrap();
    }

    #[test]
    fn parse_roundtrip() {
        for cfg in [ScenarioConfig::nominal(), ScenarioConfig::stress()] {
            let text = cfg.to_text();
            let back = ScenarioConfig::parse(&text).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn parse_overrides_and_comments() {
        let text = "# comment\nscenario.duration_days = 0.5  # inline\nseeds.truth = 99\n";
        let cfg = ScenarioConfig::parse(text).unwrap();
        assert_eq!(cfg.duration_days, 0.5);
        assert_eq!(cfg.seeds.truth, 99);
        assert_eq!(cfg.cadence_s, 197.0); // default preserved
    }

    #[test]
    fn parse_field_level_errors() {
        assert!(matches!(
            ScenarioConfig::parse("nonsense line\n").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            ScenarioConfig::parse("bogus.key = 1\n").unwrap_err(),
            ConfigError::UnknownKey { .. }
        ));
        assert!(matches!(
            ScenarioConfig::parse("seeds.truth = 1\nseeds.truth = 2\n").unwrap_err(),
            ConfigError::DuplicateKey { line: 2, .. }
        ));
        assert!(matches!(
            ScenarioConfig::parse("scenario.duration_days = -1\n").unwrap_err(),
            ConfigError::Invalid { .. }
        ));
        assert!(matches!(
            ScenarioConfig::parse("sigma.min = abc\n").unwrap_err(),
            ConfigError::BadValue { .. }
        ));
        assert!(matches!(
            ScenarioConfig::parse("sigma.min = inf\n").unwrap_err(),
            ConfigError::BadValue { .. }
        ));
    }

    #[test]
    fn station_block_replaces_defaults() {
        let text = "station.0.name = OnlyOne\nstation.0.lat_deg = 10\nstation.0.lon_deg = 20\nstation.0.alt_km = 0.1\n";
        let cfg = ScenarioConfig::parse(text).unwrap();
        assert_eq!(cfg.stations.len(), 1);
        assert_eq!(cfg.stations[0].name, "OnlyOne");
    }

    #[test]
    fn sigma_law_decay_and_clamp() {
        let law = ScenarioConfig::nominal().sigma_law;
        // wide-cloud early steps: S̄ ≈ 0 gives the observed 3% geometric decay
        let s1 = law.next(1.0, 0.0);
        assert!((s1 - 0.9703).abs() < 1e-12);
        assert!((law.next(s1, 0.0) - 0.9703 * 0.9703).abs() < 1e-12);
        // floor
        assert_eq!(law.next(0.01, 0.0), 0.05);
        // stress rebound exceeds one
        assert!(law.next(1.0, 10.0) > 1.0);
    }
}
