//! TOML configuration format and its conversion to a normalized [`LinkSpec`].
//!
//! The config file speaks engineering units (THz, GHz, km, dBm, mW, dB/km,
//! µm², ps^n/km, 1/(W·km)); everything is converted to SI here and nowhere
//! else. Field names are frozen; see the repository README for the full
//! reference.

use serde::Deserialize;
use std::collections::BTreeMap;

use crate::link::{
    Channel, ConfigError, EngineOptions, FiberSpec, FitterOptions, FrequencyTable, LinkSpec,
    OracleOptions, PostGain, Pump, PumpDirection, RamanGainTable, SolverOptions, SpanSpec,
};
use crate::units;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    channels: RawChannels,
    #[serde(default)]
    fiber: BTreeMap<String, RawFiber>,
    spans: Vec<RawSpan>,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    fitter: RawFitter,
    #[serde(default)]
    engine: RawEngine,
    #[serde(default)]
    oracle: RawOracle,
}

/// Either an explicit channel list or an evenly spaced grid.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannels {
    #[serde(default)]
    list: Vec<RawChannel>,
    start_thz: Option<f64>,
    count: Option<usize>,
    spacing_ghz: Option<f64>,
    symbol_rate_gbaud: Option<f64>,
    power_dbm: Option<f64>,
    rolloff: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    frequency_thz: f64,
    symbol_rate_gbaud: f64,
    power_dbm: f64,
    #[serde(default)]
    rolloff: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFiber {
    n2: f64,
    f_ref_thz: f64,
    beta2_ps2_per_km: f64,
    #[serde(default)]
    beta3_ps3_per_km: f64,
    #[serde(default)]
    beta4_ps4_per_km: f64,
    loss: Vec<RawLossPoint>,
    aeff: Vec<RawAeffPoint>,
    #[serde(default)]
    raman_gain: Vec<RawRamanPoint>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLossPoint {
    frequency_thz: f64,
    db_per_km: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAeffPoint {
    frequency_thz: f64,
    um2: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRamanPoint {
    delta_thz: f64,
    c_r_per_w_km: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpan {
    length_km: f64,
    fiber: String,
    #[serde(default)]
    pumps: Vec<RawPump>,
    #[serde(default)]
    post_gain: RawPostGain,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    frequency_thz: f64,
    power_mw: f64,
    direction: PumpDirection,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawPostGain {
    Keyword(String),
    Table { table: Vec<RawGainPoint> },
}

impl Default for RawPostGain {
    fn default() -> Self {
        RawPostGain::Keyword("transparent".into())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGainPoint {
    frequency_thz: f64,
    gain_db: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    step_m: Option<f64>,
    bvp_tolerance: Option<f64>,
    max_iterations: Option<usize>,
    damping: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFitter {
    weight_exponent: Option<f64>,
    weight_floor: Option<f64>,
    sigma_scan_points: Option<usize>,
    sigma_refine_rel: Option<f64>,
    alpha0_end_cap_scale: Option<f64>,
    transient_ratio_cap: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEngine {
    rho: Option<f64>,
    extra_series_terms: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    island_panels: Option<usize>,
    refine_tol_db: Option<f64>,
    max_refinements: Option<u32>,
    mode: Option<crate::oracle::OracleMode>,
    profile_source: Option<crate::oracle::ProfileSource>,
}

/// Parse a TOML document and produce the validated, SI-normalized link.
pub fn load_link_from_str(text: &str) -> Result<LinkSpec, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    build_link(raw)
}

/// Read and parse a config file.
pub fn load_link_from_path(path: &std::path::Path) -> Result<LinkSpec, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    load_link_from_str(&text)
}

fn build_channels(raw: RawChannels) -> Result<Vec<Channel>, ConfigError> {
    let grid_fields = [
        raw.start_thz.is_some(),
        raw.count.is_some(),
        raw.spacing_ghz.is_some(),
        raw.symbol_rate_gbaud.is_some(),
        raw.power_dbm.is_some(),
    ];
    let any_grid = grid_fields.iter().any(|&b| b);
    if !raw.list.is_empty() && any_grid {
        return Err(ConfigError::Invalid(
            "channels: give either an explicit `list` or the grid shorthand, not both".into(),
        ));
    }
    if raw.list.is_empty() {
        if !grid_fields.iter().all(|&b| b) {
            return Err(ConfigError::Invalid(
                "channels grid shorthand needs start_thz, count, spacing_ghz, symbol_rate_gbaud and power_dbm".into(),
            ));
        }
        let start = raw.start_thz.unwrap();
        let count = raw.count.unwrap();
        let spacing = raw.spacing_ghz.unwrap();
        let rate = raw.symbol_rate_gbaud.unwrap();
        let dbm = raw.power_dbm.unwrap();
        let rolloff = raw.rolloff.unwrap_or(0.0);
        Ok((0..count)
            .map(|i| Channel {
                center_frequency: units::thz_to_hz(start) + i as f64 * spacing * 1e9,
                symbol_rate: rate * 1e9,
                launch_power: units::dbm_to_w(dbm),
                rolloff,
            })
            .collect())
    } else {
        Ok(raw
            .list
            .into_iter()
            .map(|c| Channel {
                center_frequency: units::thz_to_hz(c.frequency_thz),
                symbol_rate: c.symbol_rate_gbaud * 1e9,
                launch_power: units::dbm_to_w(c.power_dbm),
                rolloff: c.rolloff,
            })
            .collect())
    }
}

fn build_fiber(raw: &RawFiber) -> Result<FiberSpec, ConfigError> {
    let loss = FrequencyTable::new(
        raw.loss
            .iter()
            .map(|p| {
                if p.db_per_km <= 0.0 {
                    return Err(ConfigError::NonPositive {
                        what: "fiber loss (config path)",
                        value: p.db_per_km,
                    });
                }
                Ok((
                    units::thz_to_hz(p.frequency_thz),
                    units::db_per_km_to_field_loss(p.db_per_km),
                ))
            })
            .collect::<Result<Vec<_>, _>>()?,
    )?;
    let aeff = FrequencyTable::new(
        raw.aeff
            .iter()
            .map(|p| (units::thz_to_hz(p.frequency_thz), p.um2 * 1e-12))
            .collect(),
    )?;
    let raman = RamanGainTable::new(
        raw.raman_gain
            .iter()
            .map(|p| (units::thz_to_hz(p.delta_thz), p.c_r_per_w_km * 1e-3))
            .collect(),
    )?;
    let km = 1e-3; // ps^n/km -> s^n/m carries the 1/km
    Ok(FiberSpec {
        intrinsic_field_loss: loss,
        beta2: raw.beta2_ps2_per_km * 1e-24 * km,
        beta3: raw.beta3_ps3_per_km * 1e-36 * km,
        beta4: raw.beta4_ps4_per_km * 1e-48 * km,
        f_ref: units::thz_to_hz(raw.f_ref_thz),
        n2: raw.n2,
        effective_area: aeff,
        raman_gain: raman,
    })
}

fn build_link(raw: RawConfig) -> Result<LinkSpec, ConfigError> {
    let channels = build_channels(raw.channels)?;
    let mut spans = Vec::with_capacity(raw.spans.len());
    for s in &raw.spans {
        let fiber_raw = raw.fiber.get(&s.fiber).ok_or_else(|| {
            ConfigError::Invalid(format!("span references unknown fiber `{}`", s.fiber))
        })?;
        let fiber = build_fiber(fiber_raw)?;
        let pumps = s
            .pumps
            .iter()
            .map(|p| Pump {
                center_frequency: units::thz_to_hz(p.frequency_thz),
                injected_power: p.power_mw * 1e-3,
                direction: p.direction,
            })
            .collect();
        let post_gain = match &s.post_gain {
            RawPostGain::Keyword(k) if k == "transparent" => PostGain::Transparent,
            RawPostGain::Keyword(k) => {
                return Err(ConfigError::Invalid(format!(
                    "post_gain: unknown keyword `{k}` (expected \"transparent\" or a gain table)"
                )))
            }
            RawPostGain::Table { table } => PostGain::Explicit(FrequencyTable::new(
                table
                    .iter()
                    .map(|g| {
                        (
                            units::thz_to_hz(g.frequency_thz),
                            units::db_to_linear(g.gain_db),
                        )
                    })
                    .collect(),
            )?),
        };
        spans.push(SpanSpec {
            length: s.length_km * 1000.0,
            fiber,
            pumps,
            post_gain,
        });
    }

    let defaults = SolverOptions::default();
    let solver = SolverOptions {
        step: raw.solver.step_m.unwrap_or(defaults.step),
        bvp_tolerance: raw.solver.bvp_tolerance.unwrap_or(defaults.bvp_tolerance),
        max_iterations: raw
            .solver
            .max_iterations
            .unwrap_or(defaults.max_iterations),
        damping: raw.solver.damping.unwrap_or(defaults.damping),
    };
    let fd = FitterOptions::default();
    let fitter = FitterOptions {
        weight_exponent: raw.fitter.weight_exponent.unwrap_or(fd.weight_exponent),
        weight_floor: raw.fitter.weight_floor.unwrap_or(fd.weight_floor),
        sigma_scan_points: raw
            .fitter
            .sigma_scan_points
            .unwrap_or(fd.sigma_scan_points),
        sigma_refine_rel: raw.fitter.sigma_refine_rel.unwrap_or(fd.sigma_refine_rel),
        alpha0_end_cap_scale: raw
            .fitter
            .alpha0_end_cap_scale
            .unwrap_or(fd.alpha0_end_cap_scale),
        transient_ratio_cap: raw
            .fitter
            .transient_ratio_cap
            .unwrap_or(fd.transient_ratio_cap),
    };
    let ed = EngineOptions::default();
    let engine = EngineOptions {
        rho: raw.engine.rho.unwrap_or(ed.rho),
        extra_series_terms: raw
            .engine
            .extra_series_terms
            .unwrap_or(ed.extra_series_terms),
    };
    let od = OracleOptions::default();
    let oracle = OracleOptions {
        island_panels: raw.oracle.island_panels.unwrap_or(od.island_panels),
        refine_tol_db: raw.oracle.refine_tol_db.unwrap_or(od.refine_tol_db),
        max_refinements: raw.oracle.max_refinements.unwrap_or(od.max_refinements),
        mode: raw.oracle.mode.unwrap_or(od.mode),
        profile_source: raw.oracle.profile_source.unwrap_or(od.profile_source),
    };

    LinkSpec {
        spans,
        channels,
        solver,
        fitter,
        engine,
        oracle,
        warnings: vec![],
    }
    .normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const CASE_STUDY: &str = include_str!("../fixtures/case_study.toml");

    #[test]
    fn case_study_loads() {
        let link = load_link_from_str(CASE_STUDY).unwrap();
        assert_eq!(link.channels.len(), 76);
        assert_eq!(link.spans.len(), 1);
        assert_eq!(link.spans[0].pumps.len(), 5);
        assert_relative_eq!(link.spans[0].length, 95_000.0);
        // 3 dBm flat launch
        for ch in &link.channels {
            assert_relative_eq!(ch.launch_power, 1.9952623149688796e-3, max_relative = 1e-12);
        }
        // pumps occupy the top five indices of the merged grid
        let order = link.grid_order(0).unwrap();
        let n = link.channels.len();
        let top: Vec<usize> = order[order.len() - 5..].to_vec();
        assert!(top.iter().all(|&i| i >= n));
        // 360 mW at 210.5 THz present
        assert!(link.spans[0]
            .pumps
            .iter()
            .any(|p| (p.center_frequency - 210.5e12).abs() < 1.0 && (p.injected_power - 0.36).abs() < 1e-12));
    }

    #[test]
    fn grid_and_list_are_exclusive() {
        let bad = r#"
[channels]
start_thz = 186.1
count = 2
spacing_ghz = 125.0
symbol_rate_gbaud = 100.0
power_dbm = 3.0
[[channels.list]]
frequency_thz = 193.1
symbol_rate_gbaud = 100.0
power_dbm = 0.0
[fiber.smf]
n2 = 2.6e-20
f_ref_thz = 193.4
beta2_ps2_per_km = -21.7
loss = [{ frequency_thz = 190.0, db_per_km = 0.2 }]
aeff = [{ frequency_thz = 190.0, um2 = 80.0 }]
[[spans]]
length_km = 95.0
fiber = "smf"
"#;
        assert!(matches!(
            load_link_from_str(bad),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn unknown_fiber_reference_rejected() {
        let bad = r#"
[channels]
start_thz = 186.1
count = 1
spacing_ghz = 125.0
symbol_rate_gbaud = 100.0
power_dbm = 3.0
[fiber.smf]
n2 = 2.6e-20
f_ref_thz = 193.4
beta2_ps2_per_km = -21.7
loss = [{ frequency_thz = 190.0, db_per_km = 0.2 }]
aeff = [{ frequency_thz = 190.0, um2 = 80.0 }]
[[spans]]
length_km = 95.0
fiber = "other"
"#;
        assert!(load_link_from_str(bad).is_err());
    }

    #[test]
    fn explicit_gain_table_parses() {
        let text = r#"
[channels]
start_thz = 192.4
count = 2
spacing_ghz = 150.0
symbol_rate_gbaud = 100.0
power_dbm = 0.0
[fiber.smf]
n2 = 2.6e-20
f_ref_thz = 193.4
beta2_ps2_per_km = -21.7
loss = [{ frequency_thz = 190.0, db_per_km = 0.2 }]
aeff = [{ frequency_thz = 190.0, um2 = 80.0 }]
[[spans]]
length_km = 80.0
fiber = "smf"
post_gain = { table = [
  { frequency_thz = 192.0, gain_db = 16.0 },
  { frequency_thz = 193.0, gain_db = 17.0 },
] }
"#;
        let link = load_link_from_str(text).unwrap();
        match &link.spans[0].post_gain {
            crate::link::PostGain::Explicit(table) => {
                // linear interpolation between the dB-converted points
                assert_relative_eq!(
                    table.eval(192.0e12),
                    units::db_to_linear(16.0),
                    max_relative = 1e-12
                );
                let mid = table.eval(192.5e12);
                assert!(mid > units::db_to_linear(16.0) && mid < units::db_to_linear(17.0));
            }
            other => panic!("expected explicit gain table, got {other:?}"),
        }
    }

    #[test]
    fn dispersion_units_converted() {
        let link = load_link_from_str(CASE_STUDY).unwrap();
        let fiber = &link.spans[0].fiber;
        // -21.3 ps²/km = -2.13e-26 s²/m
        assert_relative_eq!(fiber.beta2, -2.13e-26, max_relative = 1e-12);
        assert_relative_eq!(fiber.f_ref, 193.4e12, max_relative = 1e-15);
    }
}
