//! Deterministic file outputs: CSV tables, an optional JSON mirror and the
//! run manifest.
//!
//! Every float is printed with 17 significant digits (`{:.16e}`), so a
//! value round-trips exactly and repeated runs produce byte-identical
//! files. Engineering units (THz, km, dBm) appear only here.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

use crate::engine::NliReport;
use crate::fitter::TwoSegmentFit;
use crate::link::LinkSpec;
use crate::oracle::{ComparisonTable, OracleMode, OracleReport};
use crate::solver::{LinkSolution, WaveKind};
use crate::units;

/// Fixed 17-significant-digit float formatting; negative zero normalized.
pub fn fmt_float(x: f64) -> String {
    format!("{:.16e}", x + 0.0)
}

fn mode_name(mode: OracleMode) -> &'static str {
    match mode {
        OracleMode::Exact => "exact",
        OracleMode::Split => "split",
    }
}

/// One named artifact ready to be written.
#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub name: String,
    #[serde(skip)]
    pub content: String,
}

/// Per-span power profile CSV: `z_m, ch_<thz>..., pump_<thz>...`.
pub fn profile_csv(solution: &LinkSolution, span: usize) -> Artifact {
    let profile = &solution.spans[span].profile;
    let mut header = vec!["z_m".to_string()];
    for w in &profile.waves {
        let thz = units::hz_to_thz(w.frequency);
        header.push(match w.kind {
            WaveKind::Channel(_) => format!("ch_{thz:.6}"),
            WaveKind::Pump(_) => format!("pump_{thz:.6}"),
        });
    }
    let mut out = header.join(",");
    out.push('\n');
    for (k, &z) in profile.z_grid.iter().enumerate() {
        let mut row = vec![fmt_float(z)];
        for wave_powers in &profile.powers {
            row.push(fmt_float(wave_powers[k]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Artifact {
        name: format!("profiles_span{}.csv", span + 1),
        content: out,
    }
}

/// Loss-model fit table for the whole link.
pub fn fits_csv(link: &LinkSpec, fits: &[Vec<TwoSegmentFit>]) -> Artifact {
    let mut out =
        String::from("span,channel_thz,segment,split_km,alpha0_per_km,alpha1_per_km,sigma_per_km,mse\n");
    for (ns, row) in fits.iter().enumerate() {
        for (c, fit) in row.iter().enumerate() {
            let thz = units::hz_to_thz(link.channels[c].center_frequency);
            let mut push = |segment: &str, s: &crate::fitter::SegmentFit| {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    ns + 1,
                    fmt_float(thz),
                    segment,
                    fmt_float(fit.split_z / 1000.0),
                    fmt_float(s.alpha0 * 1000.0),
                    fmt_float(s.alpha1 * 1000.0),
                    fmt_float(s.sigma * 1000.0),
                    fmt_float(s.weighted_mse),
                ));
            };
            push("st", &fit.st);
            if let Some(end) = &fit.end {
                push("end", end);
            }
        }
    }
    Artifact {
        name: "fits.csv".into(),
        content: out,
    }
}

/// Numeric-vs-model profile overlay for one span.
pub fn overlay_csv(
    link: &LinkSpec,
    solution: &LinkSolution,
    fits: &[Vec<TwoSegmentFit>],
    span: usize,
) -> Artifact {
    let profile = &solution.spans[span].profile;
    let length = link.spans[span].length;
    let mut header = vec!["z_m".to_string()];
    for ch in &link.channels {
        let thz = units::hz_to_thz(ch.center_frequency);
        header.push(format!("ch_{thz:.6}_numeric_w"));
        header.push(format!("ch_{thz:.6}_model_w"));
    }
    let mut out = header.join(",");
    out.push('\n');
    for (k, &z) in profile.z_grid.iter().enumerate() {
        let mut row = vec![fmt_float(z)];
        for c in 0..link.channels.len() {
            row.push(fmt_float(profile.channel_power(c)[k]));
            row.push(fmt_float(fits[span][c].power_at(z, length)));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Artifact {
        name: format!("overlay_span{}.csv", span + 1),
        content: out,
    }
}

/// Closed-form NLI per channel.
pub fn nli_csv(report: &NliReport) -> Artifact {
    let mut out = String::from("cut_thz,nli_total_w,nli_total_dbm,psd_w_per_hz\n");
    for ch in &report.channels {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_float(units::hz_to_thz(ch.frequency)),
            fmt_float(ch.total_w),
            fmt_float(units::w_to_dbm(ch.total_w)),
            fmt_float(ch.psd_w_per_hz),
        ));
    }
    Artifact {
        name: "nli.csv".into(),
        content: out,
    }
}

/// Long-form (span, contribution, interferer) breakdown.
pub fn nli_breakdown_csv(link: &LinkSpec, report: &NliReport) -> Artifact {
    let mut out = String::from("cut_thz,span,contribution,interferer_thz,nli_w\n");
    for ch in &report.channels {
        for e in &ch.breakdown {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_float(units::hz_to_thz(ch.frequency)),
                e.span + 1,
                e.contribution,
                fmt_float(units::hz_to_thz(link.channels[e.interferer].center_frequency)),
                fmt_float(e.power_w),
            ));
        }
    }
    Artifact {
        name: "nli_breakdown.csv".into(),
        content: out,
    }
}

/// Oracle NLI per channel.
pub fn oracle_csv(report: &OracleReport) -> Artifact {
    let mut out = String::from("cut_thz,nli_total_w,nli_total_dbm,psd_w_per_hz,mode\n");
    for ch in &report.channels {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(units::hz_to_thz(ch.frequency)),
            fmt_float(ch.total_w),
            fmt_float(units::w_to_dbm(ch.total_w)),
            fmt_float(ch.psd_w_per_hz),
            mode_name(report.mode),
        ));
    }
    Artifact {
        name: "oracle.csv".into(),
        content: out,
    }
}

/// Closed-form vs oracle delta table.
pub fn compare_csv(table: &ComparisonTable) -> Artifact {
    let mut out = String::from("cut_thz,cfm_dbm,oracle_dbm,delta_db,oracle_mode\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(units::hz_to_thz(r.frequency)),
            fmt_float(units::w_to_dbm(r.cfm_w)),
            fmt_float(units::w_to_dbm(r.oracle_w)),
            fmt_float(r.delta_db),
            mode_name(table.oracle_mode),
        ));
    }
    Artifact {
        name: "compare.csv".into(),
        content: out,
    }
}

#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub name: String,
    pub sha256: String,
}

/// Reproducibility record emitted alongside every run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config_path: String,
    pub config_sha256: String,
    pub overrides: BTreeMap<String, String>,
    pub outputs: Vec<OutputRecord>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(data);
    let digest = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        config_path: &str,
        config_text: &str,
        overrides: BTreeMap<String, String>,
    ) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config_path: config_path.to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            overrides,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, artifact: &Artifact) {
        self.outputs.push(OutputRecord {
            name: artifact.name.clone(),
            sha256: sha256_hex(artifact.content.as_bytes()),
        });
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
