//! Link description: channels, pumps, fiber parameter tables, spans.
//!
//! Everything in this module is in SI units (Hz, W, m, 1/m field loss).
//! [`LinkSpec::normalize`] validates the invariants and sorts channels in
//! ascending frequency; after that the spec is immutable and shared
//! read-only by the solver, fitter, engine and oracle.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units;

/// Validation / configuration errors.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("channel bands overlap: {f_lo_hz} Hz and {f_hi_hz} Hz")]
    OverlappingChannels { f_lo_hz: f64, f_hi_hz: f64 },
    #[error("duplicate frequency in channel/pump grid: {frequency_hz} Hz")]
    DuplicateFrequency { frequency_hz: f64 },
    #[error("{table} table does not cover {frequency_hz} Hz (span {span})")]
    CoverageGap {
        table: &'static str,
        frequency_hz: f64,
        span: usize,
    },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("{what} must be non-negative, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("{0}")]
    Invalid(String),
}

/// One WDM signal channel.
///
/// The channel is approximated by a rectangular PSD whose null-to-null
/// bandwidth equals the symbol rate; `rolloff` is carried as metadata only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Channel {
    /// Center frequency, Hz.
    pub center_frequency: f64,
    /// Symbol rate, Hz (also the rectangular channel bandwidth).
    pub symbol_rate: f64,
    /// Launch power at the link input, W.
    pub launch_power: f64,
    /// Raised-cosine roll-off, dimensionless (metadata).
    pub rolloff: f64,
}

impl Channel {
    /// Lower band edge `f_c - R/2`, Hz.
    pub fn band_start(&self) -> f64 {
        self.center_frequency - self.symbol_rate / 2.0
    }

    /// Upper band edge `f_c + R/2`, Hz.
    pub fn band_stop(&self) -> f64 {
        self.center_frequency + self.symbol_rate / 2.0
    }

    /// Launch PSD `P/R`, W/Hz.
    pub fn psd(&self) -> f64 {
        self.launch_power / self.symbol_rate
    }
}

/// Pump propagation direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpDirection {
    Forward,
    Backward,
}

/// One Raman pump.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pump {
    /// Center frequency, Hz.
    pub center_frequency: f64,
    /// Injected power, W (at z=0 for forward pumps, z=L for backward).
    pub injected_power: f64,
    pub direction: PumpDirection,
}

/// Piecewise-linear table over frequency, used for loss, effective area
/// and explicit gain profiles. A single-entry table is a constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencyTable {
    /// `(frequency Hz, value)` pairs sorted ascending in frequency.
    points: Vec<(f64, f64)>,
}

impl FrequencyTable {
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self, ConfigError> {
        if points.is_empty() {
            return Err(ConfigError::Invalid("empty parameter table".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(ConfigError::DuplicateFrequency {
                    frequency_hz: w[0].0,
                });
            }
        }
        Ok(Self { points })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            points: vec![(0.0, value)],
        }
    }

    /// True when `[lo, hi]` lies inside the sampled range (constants cover
    /// everything).
    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        if self.points.len() == 1 {
            return true;
        }
        self.points.first().unwrap().0 <= lo && hi <= self.points.last().unwrap().0
    }

    /// Linear interpolation; clamps to the end values outside the range.
    pub fn eval(&self, f: f64) -> f64 {
        let pts = &self.points;
        if pts.len() == 1 || f <= pts[0].0 {
            return pts[0].1;
        }
        if f >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let i = pts.partition_point(|p| p.0 <= f);
        let (f0, v0) = pts[i - 1];
        let (f1, v1) = pts[i];
        v0 + (v1 - v0) * (f - f0) / (f1 - f0)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Sampled Raman gain coefficient `C_R(Δf)`, 1/(W·m), with odd-extension
/// semantics: values are stored for Δf ≥ 0 and `C_R(-Δf) = -C_R(Δf)`.
/// Beyond the sampled range the coefficient is taken as zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RamanGainTable {
    /// `(Δf Hz ≥ 0, c_r 1/(W·m))` sorted ascending; first point is (0, 0).
    samples: Vec<(f64, f64)>,
}

impl RamanGainTable {
    pub fn new(mut samples: Vec<(f64, f64)>) -> Result<Self, ConfigError> {
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(df, cr) in &samples {
            if df < 0.0 {
                return Err(ConfigError::Invalid(
                    "raman_gain table must be sampled at Δf ≥ 0".into(),
                ));
            }
            if cr < 0.0 {
                return Err(ConfigError::Negative {
                    what: "raman_gain c_r on the Δf ≥ 0 branch",
                    value: cr,
                });
            }
        }
        for w in samples.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(ConfigError::DuplicateFrequency {
                    frequency_hz: w[0].0,
                });
            }
        }
        match samples.first() {
            Some(&(df, cr)) if df == 0.0 => {
                if cr != 0.0 {
                    return Err(ConfigError::Invalid("raman_gain c_r(0) must be 0".into()));
                }
            }
            _ => samples.insert(0, (0.0, 0.0)),
        }
        Ok(Self { samples })
    }

    /// A table with no Raman interaction at all.
    pub fn zero() -> Self {
        Self {
            samples: vec![(0.0, 0.0)],
        }
    }

    /// Synthetic triangular gain ramp peaking near 13 THz, for tests and
    /// demos only — not measured data.
    pub fn synthetic_demo() -> Self {
        let per_w_km = 1.0e-3; // 1/(W·km) -> 1/(W·m)
        Self {
            samples: vec![
                (0.0, 0.0),
                (13.0e12, 0.42 * per_w_km),
                (16.0e12, 0.0),
            ],
        }
    }

    /// Largest sampled Δf, Hz.
    pub fn max_shift(&self) -> f64 {
        self.samples.last().map(|p| p.0).unwrap_or(0.0)
    }

    /// Odd-symmetric piecewise-linear evaluation; zero outside coverage.
    pub fn eval(&self, delta_f: f64) -> f64 {
        let mag = delta_f.abs();
        let s = &self.samples;
        if s.len() < 2 || mag > s[s.len() - 1].0 {
            return 0.0;
        }
        let i = s.partition_point(|p| p.0 <= mag).min(s.len() - 1);
        let (f0, v0) = s[i - 1];
        let (f1, v1) = s[i];
        let v = v0 + (v1 - v0) * (mag - f0) / (f1 - f0);
        if delta_f < 0.0 {
            -v
        } else {
            v
        }
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }
}

/// Fiber parameters of one span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiberSpec {
    /// Intrinsic FIELD loss vs frequency, 1/m (without ISRS).
    pub intrinsic_field_loss: FrequencyTable,
    /// Group-velocity dispersion at `f_ref`, s²/m.
    pub beta2: f64,
    /// Dispersion slope, s³/m.
    pub beta3: f64,
    /// Fourth-order dispersion, s⁴/m.
    pub beta4: f64,
    /// Frequency at which the beta coefficients are given, Hz.
    pub f_ref: f64,
    /// Nonlinear refractive index, m²/W.
    pub n2: f64,
    /// Effective area vs frequency, m².
    pub effective_area: FrequencyTable,
    /// ISRS gain coefficient table (normalized, includes polarization and
    /// effective-area effects).
    pub raman_gain: RamanGainTable,
}

/// Lumped gain at the span output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PostGain {
    /// Per-channel gain set to the reciprocal of the span's net power
    /// transfer, as computed by the solver.
    Transparent,
    /// Explicit power gain (linear) vs frequency.
    Explicit(FrequencyTable),
}

/// One fiber span plus its pumps and output amplifier.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpanSpec {
    /// Span length, m.
    pub length: f64,
    pub fiber: FiberSpec,
    pub pumps: Vec<Pump>,
    pub post_gain: PostGain,
}

/// Raman solver options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Integration step, m.
    pub step: f64,
    /// Relative tolerance on the backward-pump field self-consistency.
    pub bvp_tolerance: f64,
    /// Maximum relaxation sweeps.
    pub max_iterations: usize,
    /// Damping on the pump-field update, in (0, 1].
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            step: 50.0,
            bvp_tolerance: 1e-4,
            max_iterations: 50,
            damping: 0.7,
        }
    }
}

/// Loss-model fitter options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitterOptions {
    /// Exponent on the `(P/P_max)` sample weights.
    pub weight_exponent: f64,
    /// Lower bound on the sample weights; keeps the low-power region of a
    /// segment from drifting while the high-power region still dominates.
    pub weight_floor: f64,
    /// Log-spaced σ scan points before the golden-section refinement.
    pub sigma_scan_points: usize,
    /// Relative σ tolerance of the golden-section refinement.
    pub sigma_refine_rel: f64,
    /// End-segment cap scale: `|alpha0_end| ≤ cap_scale·α_lin(f_c)`.
    pub alpha0_end_cap_scale: f64,
    /// Cap on the fitted `|2·α1/σ|`; the closed form sums ⌊10·|2α1/σ|⌋+1
    /// series terms per axis, so uncapped ratios are not evaluable.
    pub transient_ratio_cap: f64,
}

impl Default for FitterOptions {
    fn default() -> Self {
        Self {
            weight_exponent: 2.0,
            weight_floor: 0.0,
            sigma_scan_points: 64,
            sigma_refine_rel: 1e-3,
            alpha0_end_cap_scale: 0.1,
            transient_ratio_cap: 20.0,
        }
    }
}

/// Closed-form engine options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineOptions {
    /// Uniform EGN correction factor applied to every (span, channel);
    /// 1.0 keeps the plain incoherent-GN reading.
    pub rho: f64,
    /// Extra series terms beyond the truncation order, for convergence
    /// studies.
    pub extra_series_terms: usize,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            extra_series_terms: 0,
        }
    }
}

/// GN-integral oracle options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Simpson panels per island axis.
    pub island_panels: usize,
    /// Convergence gate: coarse-vs-fine change per channel, dB.
    pub refine_tol_db: f64,
    /// Panel doublings allowed before reporting non-convergence.
    pub max_refinements: u32,
    /// `exact` integrates each span in one piece; `split` squares the two
    /// segments separately, mirroring the closed form's independence
    /// assumption.
    pub mode: crate::oracle::OracleMode,
    /// Integrate the numeric solver profile or the fitted loss model.
    pub profile_source: crate::oracle::ProfileSource,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            island_panels: 64,
            refine_tol_db: 0.01,
            max_refinements: 2,
            mode: crate::oracle::OracleMode::Split,
            profile_source: crate::oracle::ProfileSource::Numeric,
        }
    }
}

/// Fully validated, SI-normalized link description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkSpec {
    pub spans: Vec<SpanSpec>,
    /// Channels sorted ascending in frequency.
    pub channels: Vec<Channel>,
    pub solver: SolverOptions,
    pub fitter: FitterOptions,
    pub engine: EngineOptions,
    pub oracle: OracleOptions,
    /// Non-fatal validation findings (e.g. pumps inside the signal band).
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl LinkSpec {
    /// Validate invariants and sort channels ascending. Idempotent.
    pub fn normalize(mut self) -> Result<Self, ConfigError> {
        if self.spans.is_empty() {
            return Err(ConfigError::Invalid("at least one span required".into()));
        }
        if self.channels.is_empty() {
            return Err(ConfigError::Invalid("at least one channel required".into()));
        }
        self.channels
            .sort_by(|a, b| a.center_frequency.total_cmp(&b.center_frequency));
        self.warnings.clear();

        for ch in &self.channels {
            if ch.center_frequency <= 0.0 {
                return Err(ConfigError::NonPositive {
                    what: "channel center_frequency",
                    value: ch.center_frequency,
                });
            }
            if ch.symbol_rate <= 0.0 {
                return Err(ConfigError::NonPositive {
                    what: "channel symbol_rate",
                    value: ch.symbol_rate,
                });
            }
            if ch.launch_power < 0.0 {
                return Err(ConfigError::Negative {
                    what: "channel launch_power",
                    value: ch.launch_power,
                });
            }
        }
        for w in self.channels.windows(2) {
            if w[0].center_frequency == w[1].center_frequency {
                return Err(ConfigError::DuplicateFrequency {
                    frequency_hz: w[0].center_frequency,
                });
            }
            if w[0].band_stop() > w[1].band_start() {
                return Err(ConfigError::OverlappingChannels {
                    f_lo_hz: w[0].center_frequency,
                    f_hi_hz: w[1].center_frequency,
                });
            }
        }

        let sig_lo = self.channels.first().unwrap().center_frequency;
        let sig_hi = self.channels.last().unwrap().center_frequency;

        for (si, span) in self.spans.iter().enumerate() {
            if span.length <= 0.0 {
                return Err(ConfigError::NonPositive {
                    what: "span length",
                    value: span.length,
                });
            }
            for p in &span.pumps {
                if p.center_frequency <= 0.0 {
                    return Err(ConfigError::NonPositive {
                        what: "pump center_frequency",
                        value: p.center_frequency,
                    });
                }
                if p.injected_power < 0.0 {
                    return Err(ConfigError::Negative {
                        what: "pump injected_power",
                        value: p.injected_power,
                    });
                }
                if p.center_frequency > sig_lo && p.center_frequency < sig_hi {
                    self.warnings.push(format!(
                        "span {}: pump at {:.4} THz lies inside the signal band",
                        si + 1,
                        units::hz_to_thz(p.center_frequency)
                    ));
                }
            }
            // Merged channel+pump grid must be strictly ascending.
            let mut freqs: Vec<f64> = self
                .channels
                .iter()
                .map(|c| c.center_frequency)
                .chain(span.pumps.iter().map(|p| p.center_frequency))
                .collect();
            freqs.sort_by(|a, b| a.total_cmp(b));
            for w in freqs.windows(2) {
                if w[0] == w[1] {
                    return Err(ConfigError::DuplicateFrequency { frequency_hz: w[0] });
                }
            }

            let band_lo = freqs[0];
            let band_hi = freqs[freqs.len() - 1];
            for (name, table) in [
                ("loss", &span.fiber.intrinsic_field_loss),
                ("aeff", &span.fiber.effective_area),
            ] {
                if !table.covers(band_lo, band_hi) {
                    let gap = if table.covers(band_lo, band_lo) {
                        band_hi
                    } else {
                        band_lo
                    };
                    return Err(ConfigError::CoverageGap {
                        table: name,
                        frequency_hz: gap,
                        span: si + 1,
                    });
                }
            }
            for &f in &freqs {
                let a = span.fiber.intrinsic_field_loss.eval(f);
                if a < 0.0 {
                    return Err(ConfigError::Negative {
                        what: "intrinsic field loss",
                        value: a,
                    });
                }
                let aeff = span.fiber.effective_area.eval(f);
                if aeff <= 0.0 {
                    return Err(ConfigError::NonPositive {
                        what: "effective area",
                        value: aeff,
                    });
                }
            }
            let max_pair_shift = band_hi - band_lo;
            if max_pair_shift > span.fiber.raman_gain.max_shift()
                && span.fiber.raman_gain.max_shift() > 0.0
            {
                self.warnings.push(format!(
                    "span {}: raman_gain table covers Δf ≤ {:.3} THz but wave spacings reach {:.3} THz; the excess is treated as zero gain",
                    si + 1,
                    units::hz_to_thz(span.fiber.raman_gain.max_shift()),
                    units::hz_to_thz(max_pair_shift)
                ));
            }
            if self.solver.step >= span.length / 10.0 {
                return Err(ConfigError::Invalid(format!(
                    "solver step {} m must be below one tenth of span length {} m",
                    self.solver.step, span.length
                )));
            }
        }

        if self.solver.bvp_tolerance <= 0.0 {
            return Err(ConfigError::NonPositive {
                what: "solver bvp_tolerance",
                value: self.solver.bvp_tolerance,
            });
        }
        if !(self.solver.damping > 0.0 && self.solver.damping <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "solver damping must be in (0, 1], got {}",
                self.solver.damping
            )));
        }
        if self.engine.rho <= 0.0 {
            return Err(ConfigError::NonPositive {
                what: "engine rho",
                value: self.engine.rho,
            });
        }
        if self.oracle.island_panels < 2 || self.oracle.island_panels % 2 != 0 {
            return Err(ConfigError::Invalid(format!(
                "oracle island_panels must be even and ≥ 2, got {}",
                self.oracle.island_panels
            )));
        }
        Ok(self)
    }

    /// Merged channel+pump ordering for one span: indices 0..N_ch label
    /// channels, N_ch.. label that span's pumps; returns the permutation
    /// that lists them in strictly ascending frequency.
    pub fn grid_order(&self, span: usize) -> Result<Vec<usize>, ConfigError> {
        let pumps = &self.spans[span].pumps;
        let mut idx: Vec<usize> = (0..self.channels.len() + pumps.len()).collect();
        let freq = |i: usize| -> f64 {
            if i < self.channels.len() {
                self.channels[i].center_frequency
            } else {
                pumps[i - self.channels.len()].center_frequency
            }
        };
        idx.sort_by(|&a, &b| freq(a).total_cmp(&freq(b)));
        for w in idx.windows(2) {
            if freq(w[0]) == freq(w[1]) {
                return Err(ConfigError::DuplicateFrequency {
                    frequency_hz: freq(w[0]),
                });
            }
        }
        Ok(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat_fiber() -> FiberSpec {
        FiberSpec {
            intrinsic_field_loss: FrequencyTable::constant(
                units::db_per_km_to_field_loss(0.2),
            ),
            beta2: -21.7e-27 * 1e3, // -21.7 ps²/km in s²/m
            beta3: 0.0,
            beta4: 0.0,
            f_ref: 193.4e12,
            n2: 2.6e-20,
            effective_area: FrequencyTable::constant(80e-12),
            raman_gain: RamanGainTable::zero(),
        }
    }

    fn channel(f_thz: f64) -> Channel {
        Channel {
            center_frequency: f_thz * 1e12,
            symbol_rate: 100e9,
            launch_power: units::dbm_to_w(0.0),
            rolloff: 0.1,
        }
    }

    fn one_span_link(channels: Vec<Channel>, pumps: Vec<Pump>) -> LinkSpec {
        LinkSpec {
            spans: vec![SpanSpec {
                length: 95_000.0,
                fiber: flat_fiber(),
                pumps,
                post_gain: PostGain::Transparent,
            }],
            channels,
            solver: SolverOptions::default(),
            fitter: FitterOptions::default(),
            engine: EngineOptions::default(),
            oracle: OracleOptions::default(),
            warnings: vec![],
        }
    }

    #[test]
    fn grid_order_sorts_ascending() {
        let link = one_span_link(
            vec![channel(193.1), channel(186.1)],
            vec![Pump {
                center_frequency: 210.5e12,
                injected_power: 0.36,
                direction: PumpDirection::Backward,
            }],
        )
        .normalize()
        .unwrap();
        // channels got sorted: 186.1 is channel 0, 193.1 channel 1, pump index 2.
        let order = link.grid_order(0).unwrap();
        assert_eq!(order, vec![0, 1, 2]);
        assert_relative_eq!(link.channels[0].center_frequency, 186.1e12);
    }

    #[test]
    fn grid_order_single_channel_identity() {
        let link = one_span_link(vec![channel(193.1)], vec![]).normalize().unwrap();
        assert_eq!(link.grid_order(0).unwrap(), vec![0]);
    }

    #[test]
    fn grid_order_rejects_tie() {
        let link = one_span_link(
            vec![channel(193.1)],
            vec![Pump {
                center_frequency: 193.1e12,
                injected_power: 0.1,
                direction: PumpDirection::Backward,
            }],
        );
        assert!(matches!(
            link.normalize(),
            Err(ConfigError::DuplicateFrequency { .. })
        ));
    }

    #[test]
    fn overlapping_channels_rejected() {
        let mut a = channel(193.10);
        let mut b = channel(193.15);
        a.symbol_rate = 120e9;
        b.symbol_rate = 120e9; // bands [193.04,193.16] and [193.09,193.21] overlap
        assert!(matches!(
            one_span_link(vec![a, b], vec![]).normalize(),
            Err(ConfigError::OverlappingChannels { .. })
        ));
    }

    #[test]
    fn coverage_gap_rejected() {
        let mut link = one_span_link(vec![channel(186.1), channel(193.1)], vec![]);
        link.spans[0].fiber.effective_area =
            FrequencyTable::new(vec![(190.0e12, 80e-12), (196.0e12, 78e-12)]).unwrap();
        assert!(matches!(
            link.normalize(),
            Err(ConfigError::CoverageGap { table: "aeff", .. })
        ));
    }

    #[test]
    fn normalize_is_idempotent() {
        let link = one_span_link(vec![channel(193.1), channel(186.1)], vec![])
            .normalize()
            .unwrap();
        let again = link.clone().normalize().unwrap();
        let a = serde_json::to_string(&link).unwrap();
        let b = serde_json::to_string(&again).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn serde_round_trip_preserves_si_values() {
        let link = one_span_link(
            vec![channel(186.1), channel(193.1)],
            vec![Pump {
                center_frequency: 210.5e12,
                injected_power: 0.36,
                direction: PumpDirection::Backward,
            }],
        )
        .normalize()
        .unwrap();
        let json = serde_json::to_string(&link).unwrap();
        let back: LinkSpec = serde_json::from_str(&json).unwrap();
        for (c0, c1) in link.channels.iter().zip(back.channels.iter()) {
            assert_eq!(c0.center_frequency.to_bits(), c1.center_frequency.to_bits());
            assert_eq!(c0.launch_power.to_bits(), c1.launch_power.to_bits());
        }
        assert_eq!(
            link.spans[0].pumps[0].injected_power.to_bits(),
            back.spans[0].pumps[0].injected_power.to_bits()
        );
    }

    #[test]
    fn raman_table_odd_symmetry_and_interp() {
        let t = RamanGainTable::new(vec![(10.0e12, 0.4e-3), (14.0e12, 0.6e-3)]).unwrap();
        assert_eq!(t.eval(0.0), 0.0);
        assert_relative_eq!(t.eval(12.0e12), 0.5e-3, max_relative = 1e-12);
        assert_relative_eq!(t.eval(-12.0e12), -0.5e-3, max_relative = 1e-12);
        // outside coverage clamps to zero
        assert_eq!(t.eval(20.0e12), 0.0);
        assert_eq!(t.eval(-20.0e12), 0.0);
    }

    #[test]
    fn pump_inside_band_warns() {
        let link = one_span_link(
            vec![channel(186.1), channel(193.1)],
            vec![Pump {
                center_frequency: 190.0e12,
                injected_power: 0.1,
                direction: PumpDirection::Backward,
            }],
        )
        .normalize()
        .unwrap();
        assert!(link.warnings.iter().any(|w| w.contains("inside the signal band")));
    }
}
