//! Closed-form per-channel NLI evaluation.
//!
//! For every channel under test (CUT) the NLI power at the link end is a
//! sum over spans, interfering channels and the two loss-model segments of
//! asinh-form terms built from the fitted (α0, α1, σ) triples:
//!
//! ```text
//! P_NLI += (16/27)·γ²·P_cut·P_m²·ρ·Γ·(2-δ)·e^(-4α1/σ)/(2π·R_m²·β2_eff)
//!          · Σ_{k,q≤M} (2α1/σ)^(k+q)/(k!·q!·(4α0+(k+q)σ))
//!          · [asinh(π²·β2_eff·R_cut·(f_e,m-f_cut)/(2α0+kσ))
//!             - asinh(π²·β2_eff·R_cut·(f_s,m-f_cut)/(2α0+kσ))]
//! ```
//!
//! The first contribution (i=1) reads powers and the accumulated gain Γ at
//! the span start; the second (i=2) uses the span-end quantities together
//! with the mirrored end-segment fit. Series are truncated at
//! `M = ⌊10·|2α1/σ|⌋`; term weights are evaluated in log space so large
//! orders stay finite. Signs work out so every term is non-negative; the
//! evaluation is independent of the sign of β2_eff.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::fitter::{SegmentFit, TwoSegmentFit};
use crate::link::{FiberSpec, LinkSpec};
use crate::solver::LinkSolution;
use crate::units::C_LIGHT;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("rho factors must be positive, got {value}")]
    NonPositiveRho { value: f64 },
    #[error("rho matrix shape {got_spans}x{got_channels} does not match link {spans}x{channels}")]
    RhoShape {
        got_spans: usize,
        got_channels: usize,
        spans: usize,
        channels: usize,
    },
    #[error(
        "series denominator 4·α0+(k+q)·σ vanishes on a diagonal term (k=q={k}); the fitted segment violates the end-segment constraints"
    )]
    DegenerateDenominator { k: usize },
    #[error("series ratio 2·α1/σ = {t:.3} is too negative for a stable evaluation")]
    SeriesUnstable { t: f64 },
    #[error("NLI term evaluated to {value:.3e} W < 0 beyond rounding noise")]
    NegativeTerm { value: f64 },
}

/// Frequency-dependent nonlinear coefficient, 1/(W·m):
/// `(2π·f1/c)·2·n2/(A_eff(f1)+A_eff(f2))`.
pub fn gamma_nl(f1: f64, f2: f64, fiber: &FiberSpec) -> f64 {
    let a1 = fiber.effective_area.eval(f1);
    let a2 = fiber.effective_area.eval(f2);
    (2.0 * PI * f1 / C_LIGHT) * 2.0 * fiber.n2 / (a1 + a2)
}

/// The braced dispersion factor of the phase-mismatch rate, s²/m, with the
/// expansion extended to fourth order around `f_ref`.
pub fn beta2_eff(f_m: f64, f_cut: f64, fiber: &FiberSpec) -> f64 {
    let r = fiber.f_ref;
    let d1 = f_m - r;
    let d2 = f_cut - r;
    fiber.beta2
        + PI * fiber.beta3 * (f_m + f_cut - 2.0 * r)
        + (2.0 / 3.0) * PI * PI * fiber.beta4 * (d1 * d1 + d1 * d2 - d2 * d2)
}

/// Phase-mismatch rate `χ(f1, f2, f) = 4π²(f1-f)(f2-f)·beta2_eff(f1,f2)`, 1/m.
pub fn chi(f1: f64, f2: f64, f: f64, fiber: &FiberSpec) -> f64 {
    4.0 * PI * PI * (f1 - f) * (f2 - f) * beta2_eff(f1, f2, fiber)
}

/// Series truncation order `M = ⌊10·|2·α1/σ|⌋`; the sum runs over 0..=M.
pub fn truncation_order(alpha1: f64, sigma: f64) -> usize {
    (10.0 * (2.0 * alpha1 / sigma).abs()).floor() as usize
}

/// Per-contribution series cap `Q_i = max over channels of (M+1)`.
pub fn contribution_cap(fits: &[TwoSegmentFit], contribution: u8) -> usize {
    fits.iter()
        .filter_map(|f| match contribution {
            1 => Some(&f.st),
            _ => f.end.as_ref(),
        })
        .map(|s| truncation_order(s.alpha1, s.sigma) + 1)
        .max()
        .unwrap_or(0)
}

/// One asinh factor of the closed form,
/// `Ψ = asinh(π²·β2_eff·R_cut·(f_m - f_cut + (-1)^j·R_m/2)/(2α0 + kσ))`.
pub fn psi(
    f_m: f64,
    f_cut: f64,
    r_m: f64,
    r_cut: f64,
    j: u8,
    k: usize,
    seg: &SegmentFit,
    fiber: &FiberSpec,
) -> f64 {
    let b2 = beta2_eff(f_m, f_cut, fiber);
    let sign = if j == 0 { 1.0 } else { -1.0 };
    let d = 2.0 * seg.alpha0 + k as f64 * seg.sigma;
    let arg = PI * PI * b2 * r_cut * (f_m - f_cut + sign * r_m / 2.0) / d;
    if arg.is_nan() {
        0.0
    } else {
        arg.asinh()
    }
}

/// EGN correction factors, one per (span, channel); 1.0 everywhere keeps
/// the plain incoherent-GN reading.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlFactors {
    rho: Vec<Vec<f64>>,
}

impl MlFactors {
    pub fn uniform(n_spans: usize, n_channels: usize, value: f64) -> Result<Self, EngineError> {
        if value <= 0.0 {
            return Err(EngineError::NonPositiveRho { value });
        }
        Ok(Self {
            rho: vec![vec![value; n_channels]; n_spans],
        })
    }

    pub fn from_matrix(rho: Vec<Vec<f64>>, link: &LinkSpec) -> Result<Self, EngineError> {
        if rho.len() != link.spans.len()
            || rho.iter().any(|r| r.len() != link.channels.len())
        {
            return Err(EngineError::RhoShape {
                got_spans: rho.len(),
                got_channels: rho.first().map(|r| r.len()).unwrap_or(0),
                spans: link.spans.len(),
                channels: link.channels.len(),
            });
        }
        for row in &rho {
            for &v in row {
                if v <= 0.0 {
                    return Err(EngineError::NonPositiveRho { value: v });
                }
            }
        }
        Ok(Self { rho })
    }

    pub fn get(&self, span: usize, channel: usize) -> f64 {
        self.rho[span][channel]
    }

    pub fn set(&mut self, span: usize, channel: usize, value: f64) {
        self.rho[span][channel] = value;
    }
}

/// One (span, contribution, interferer) share of a CUT's NLI power.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NliBreakdownEntry {
    /// Span index, 0-based.
    pub span: usize,
    /// 1 for the span-start segment, 2 for the mirrored end segment.
    pub contribution: u8,
    /// Interfering channel index.
    pub interferer: usize,
    pub power_w: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelNli {
    pub channel: usize,
    pub frequency: f64,
    pub total_w: f64,
    pub psd_w_per_hz: f64,
    pub breakdown: Vec<NliBreakdownEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NliReport {
    pub channels: Vec<ChannelNli>,
}

/// Inputs of one closed-form segment term.
pub struct SegmentTerm<'a> {
    pub seg: &'a SegmentFit,
    pub f_cut: f64,
    pub r_cut: f64,
    pub f_m: f64,
    pub r_m: f64,
    /// CUT and interferer powers at the contribution reference point, W.
    pub p_cut: f64,
    pub p_m: f64,
    /// CUT power transfer from the reference point to the link end.
    pub gamma_cum: f64,
    pub rho: f64,
    pub is_spm: bool,
}

const T_STABILITY_FLOOR: f64 = -18.0;

/// Evaluate one (span, interferer, contribution) term of the closed form.
pub fn segment_nli(
    term: &SegmentTerm,
    fiber: &FiberSpec,
    extra_terms: usize,
) -> Result<f64, EngineError> {
    if term.p_cut == 0.0 || term.p_m == 0.0 {
        return Ok(0.0);
    }
    let seg = term.seg;
    let t = 2.0 * seg.alpha1 / seg.sigma;
    if t < T_STABILITY_FLOOR {
        return Err(EngineError::SeriesUnstable { t });
    }
    let m_order = truncation_order(seg.alpha1, seg.sigma) + extra_terms;

    let gamma = gamma_nl(term.f_cut, term.f_m, fiber);
    let b2 = beta2_eff(term.f_m, term.f_cut, fiber);
    let delta_factor = if term.is_spm { 1.0 } else { 2.0 };
    let pref = (16.0 / 27.0) * gamma * gamma * term.p_cut * term.p_m * term.p_m
        * term.rho
        * term.gamma_cum
        * delta_factor
        / (2.0 * PI * term.r_m * term.r_m);

    // Band-edge factors of the asinh arguments (β2_eff factored out so the
    // zero-dispersion limit stays finite).
    let u_e = PI * PI * term.r_cut * (term.f_m + term.r_m / 2.0 - term.f_cut);
    let u_s = PI * PI * term.r_cut * (term.f_m - term.r_m / 2.0 - term.f_cut);
    let d_at = |k: usize| 2.0 * seg.alpha0 + k as f64 * seg.sigma;
    let bracket_over_b2 = |k: usize| -> f64 {
        let d = d_at(k);
        if b2.abs() < 1e-35 {
            (u_e - u_s) / d
        } else {
            ((b2 * u_e / d).asinh() - (b2 * u_s / d).asinh()) / b2
        }
    };
    // L'Hôpital limit of [bracket(k)+bracket(q)]/(β2·D) as D→0 (then
    // d(q) = -d(k)); β2 cancels inside.
    let pair_limit = |k: usize| -> f64 {
        let dk = d_at(k);
        let ce = b2 * u_e;
        let cs = b2 * u_s;
        (u_s / (dk * dk + cs * cs).sqrt() - u_e / (dk * dk + ce * ce).sqrt()) / dk.abs()
    };

    let ln_t_abs = t.abs().ln();
    let sign_t = if t < 0.0 { -1.0 } else { 1.0 };
    let mut ln_fact = Vec::with_capacity(m_order + 1);
    ln_fact.push(0.0);
    for k in 1..=m_order {
        ln_fact.push(ln_fact[k - 1] + (k as f64).ln());
    }
    let weight = |k: usize, q: usize| -> f64 {
        let s = k + q;
        if s == 0 {
            (-2.0 * t).exp()
        } else {
            let sign = if s % 2 == 1 { sign_t } else { 1.0 };
            sign * (s as f64 * ln_t_abs - ln_fact[k] - ln_fact[q] - 2.0 * t).exp()
        }
    };

    let eps_d = 1e-12 * seg.sigma;
    let mut acc = 0.0f64;
    for k in 0..=m_order {
        for q in k..=m_order {
            let s = k + q;
            let big_d = 4.0 * seg.alpha0 + s as f64 * seg.sigma;
            let w = weight(k, q);
            if w == 0.0 {
                continue;
            }
            let val = if big_d.abs() < eps_d {
                if k == q {
                    return Err(EngineError::DegenerateDenominator { k });
                }
                w * pair_limit(k)
            } else if k == q {
                w * bracket_over_b2(k) / big_d
            } else {
                w * (bracket_over_b2(k) + bracket_over_b2(q)) / big_d
            };
            acc += val;
        }
    }
    let total = pref * acc;
    if total < 0.0 {
        if total > -1e-15 {
            return Ok(0.0);
        }
        return Err(EngineError::NegativeTerm { value: total });
    }
    Ok(total)
}

/// Aggregate the closed form over all CUTs, spans, interferers and both
/// contributions.
pub fn total_nli(
    link: &LinkSpec,
    solution: &LinkSolution,
    fits: &[Vec<TwoSegmentFit>],
    ml: &MlFactors,
) -> Result<NliReport, EngineError> {
    use rayon::prelude::*;
    let extra = link.engine.extra_series_terms;
    let channels: Vec<ChannelNli> = (0..link.channels.len())
        .into_par_iter()
        .map(|cut| -> Result<ChannelNli, EngineError> {
            let cut_ch = &link.channels[cut];
            let mut breakdown = Vec::new();
            let mut total = 0.0f64;
            for (ns, span) in link.spans.iter().enumerate() {
                let sol = &solution.spans[ns];
                for (m, m_ch) in link.channels.iter().enumerate() {
                    let fit2 = &fits[ns][m];
                    for (contribution, seg) in
                        [(1u8, Some(&fit2.st)), (2u8, fit2.end.as_ref())]
                    {
                        let Some(seg) = seg else { continue };
                        let (p_cut, p_m, gamma_cum) = if contribution == 1 {
                            (
                                sol.launch_w[cut],
                                sol.launch_w[m],
                                solution.gamma_start[ns][cut],
                            )
                        } else {
                            (sol.end_w[cut], sol.end_w[m], solution.gamma_end[ns][cut])
                        };
                        let term = SegmentTerm {
                            seg,
                            f_cut: cut_ch.center_frequency,
                            r_cut: cut_ch.symbol_rate,
                            f_m: m_ch.center_frequency,
                            r_m: m_ch.symbol_rate,
                            p_cut,
                            p_m,
                            gamma_cum,
                            rho: ml.get(ns, m),
                            is_spm: m == cut,
                        };
                        let value = segment_nli(&term, &span.fiber, extra)?;
                        total += value;
                        breakdown.push(NliBreakdownEntry {
                            span: ns,
                            contribution,
                            interferer: m,
                            power_w: value,
                        });
                    }
                }
            }
            Ok(ChannelNli {
                channel: cut,
                frequency: cut_ch.center_frequency,
                total_w: total,
                psd_w_per_hz: total / cut_ch.symbol_rate,
                breakdown,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NliReport { channels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{FrequencyTable, RamanGainTable};
    use approx::assert_relative_eq;

    fn fiber(beta2: f64, beta3: f64, beta4: f64) -> FiberSpec {
        FiberSpec {
            intrinsic_field_loss: FrequencyTable::constant(2.3026e-5),
            beta2,
            beta3,
            beta4,
            f_ref: 193.4e12,
            n2: 2.6e-20,
            effective_area: FrequencyTable::constant(80e-12),
            raman_gain: RamanGainTable::zero(),
        }
    }

    fn exp_segment(alpha0: f64, length: f64) -> SegmentFit {
        SegmentFit {
            alpha0,
            alpha1: 0.0,
            sigma: 1e-4,
            segment_length: length,
            p_start: 2e-3,
            weighted_mse: 0.0,
            sigma_at_bound: false,
            sigma_unconstrained: true,
            constraint_clamped: false,
        }
    }

    #[test]
    fn gamma_nl_matches_textbook_value() {
        // 193.1 THz, n2 = 2.6e-20 m²/W, A_eff = 80 µm².
        let f = fiber(-2.17e-26, 0.0, 0.0);
        let g = gamma_nl(193.1e12, 193.1e12, &f);
        assert_relative_eq!(g, 1.3152999396513267e-3, max_relative = 1e-12);
        assert_relative_eq!(g, 1.315e-3, max_relative = 1e-3);
    }

    #[test]
    fn gamma_nl_uses_mean_area() {
        let mut f = fiber(-2.17e-26, 0.0, 0.0);
        f.effective_area =
            FrequencyTable::new(vec![(190.0e12, 80e-12), (196.0e12, 120e-12)]).unwrap();
        let g_mixed = gamma_nl(190.0e12, 196.0e12, &f);
        let g_low = {
            let ff = FiberSpec {
                effective_area: FrequencyTable::constant(80e-12),
                ..f.clone()
            };
            gamma_nl(190.0e12, 196.0e12, &ff)
        };
        let g_high = {
            let ff = FiberSpec {
                effective_area: FrequencyTable::constant(120e-12),
                ..f.clone()
            };
            gamma_nl(190.0e12, 196.0e12, &ff)
        };
        assert!(g_high < g_mixed && g_mixed < g_low);
    }

    #[test]
    fn chi_vanishes_on_axis() {
        let f = fiber(-2.17e-26, 0.1e-39 * 1e-3, 0.0);
        assert_eq!(chi(193.1e12, 193.0e12, 193.1e12, &f), 0.0);
        assert_eq!(chi(193.0e12, 193.1e12, 193.1e12, &f), 0.0);
    }

    #[test]
    fn chi_beta2_only_value() {
        // β2 = -21.7 ps²/km = -2.17e-26 s²/m, offsets +50 GHz and -12.5 GHz.
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let f = 193.1e12;
        let c = chi(f + 5e10, f - 1.25e10, f, &fib);
        assert_relative_eq!(c, 5.354260387590977e-4, max_relative = 1e-12);
    }

    #[test]
    fn beta2_eff_symmetry_identity() {
        // braces(a,b)+braces(b,a) = 2β2 + 2πβ3(a+b-2r) + (4/3)π²β4(a-r)(b-r)
        let fib = fiber(-2.13e-26, 1.41e-40, -4.0e-55);
        let r = fib.f_ref;
        for (fa, fb) in [
            (186.3e12, 195.5e12),
            (191.15e12, 189.7e12),
            (205.0e12, 187.2e12),
        ] {
            let lhs = beta2_eff(fa, fb, &fib) + beta2_eff(fb, fa, &fib);
            let rhs = 2.0 * fib.beta2
                + 2.0 * PI * fib.beta3 * (fa + fb - 2.0 * r)
                + (4.0 / 3.0) * PI * PI * fib.beta4 * (fa - r) * (fb - r);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
            // and chi is the braced factor times 4π²(f1-f)(f2-f)
            let f = 193.1e12;
            assert_relative_eq!(
                chi(fa, fb, f, &fib),
                4.0 * PI * PI * (fa - f) * (fb - f) * beta2_eff(fa, fb, &fib),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn truncation_order_examples() {
        assert_eq!(truncation_order(0.0, 1e-4), 0);
        // 2α1/σ = 0.5 -> M = 5
        assert_eq!(truncation_order(0.25e-4, 1e-4), 5);
        // 2α1/σ = 0.999 -> M = 9
        assert_eq!(truncation_order(0.4995e-4, 1e-4), 9);
    }

    #[test]
    fn contribution_cap_is_max_order_plus_one() {
        let mk = |alpha1: f64, sigma: f64| crate::fitter::SegmentFit {
            alpha0: 2.3e-5,
            alpha1,
            sigma,
            segment_length: 50e3,
            p_start: 1e-3,
            weighted_mse: 0.0,
            sigma_at_bound: false,
            sigma_unconstrained: false,
            constraint_clamped: false,
        };
        let fits = vec![
            crate::fitter::TwoSegmentFit {
                split_z: 50e3,
                st: mk(0.15e-4, 1e-4), // M = 3
                end: None,
            },
            crate::fitter::TwoSegmentFit {
                split_z: 40e3,
                st: mk(0.25e-4, 1e-4), // M = 5
                end: Some(mk(0.45e-4, 1e-4)), // M = 9
            },
        ];
        assert_eq!(contribution_cap(&fits, 1), 6);
        assert_eq!(contribution_cap(&fits, 2), 10);
    }

    #[test]
    fn psi_odd_in_j_for_spm() {
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let seg = exp_segment(2.3026e-5, 80e3);
        let p0 = psi(193.1e12, 193.1e12, 100e9, 100e9, 0, 0, &seg, &fib);
        let p1 = psi(193.1e12, 193.1e12, 100e9, 100e9, 1, 0, &seg, &fib);
        assert_relative_eq!(p0, -p1, max_relative = 1e-14);
    }

    #[test]
    fn psi_degenerate_argument_is_zero() {
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let seg = exp_segment(2.3026e-5, 80e3);
        // R_m -> 0 with f_m = f_cut gives asinh(0) = 0.
        assert_eq!(psi(193.1e12, 193.1e12, 0.0, 100e9, 0, 0, &seg, &fib), 0.0);
    }

    #[test]
    fn psi_xpm_frozen_values() {
        // f_m - f_cut = 125 GHz, R_m = R_cut = 100 GHz, β2_eff = -2.17e-26
        // s²/m, α0 = 2.3026e-5 1/m, k = 0. High-precision reference values.
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let seg = exp_segment(2.3026e-5, 80e3);
        let p0 = psi(193.225e12, 193.1e12, 100e9, 100e9, 0, 0, &seg, &fib);
        let p1 = psi(193.225e12, 193.1e12, 100e9, 100e9, 1, 0, &seg, &fib);
        assert_relative_eq!(p0, -5.0923866422669326, max_relative = 1e-10);
        assert_relative_eq!(p1, -4.2452564695064705, max_relative = 1e-10);
    }

    /// Independent single-exponential GN evaluator, written straight from
    /// the power-form formula with no shared code.
    #[allow(clippy::too_many_arguments)]
    fn classic_gn(
        gamma: f64,
        p_cut: f64,
        p_m: f64,
        rho: f64,
        gamma_cum: f64,
        delta_factor: f64,
        beta2eff: f64,
        r_cut: f64,
        r_m: f64,
        f_m_minus_f_cut: f64,
        alpha0: f64,
    ) -> f64 {
        let pref = (16.0 / 27.0) * gamma.powi(2) * p_cut * p_m.powi(2) * rho * gamma_cum
            * delta_factor
            / (2.0 * PI * r_m.powi(2) * beta2eff.abs() * 4.0 * alpha0);
        let arg = |edge: f64| PI.powi(2) * beta2eff * r_cut * edge / (2.0 * alpha0);
        let bracket =
            (arg(f_m_minus_f_cut + r_m / 2.0)).asinh() - (arg(f_m_minus_f_cut - r_m / 2.0)).asinh();
        pref * bracket.abs()
    }

    #[test]
    fn segment_nli_reduces_to_classic_gn() {
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let seg = exp_segment(2.3026e-5, 95e3);
        for (df, is_spm) in [(150e9, false), (0.0, true), (-300e9, false)] {
            let term = SegmentTerm {
                seg: &seg,
                f_cut: 193.1e12,
                r_cut: 100e9,
                f_m: 193.1e12 + df,
                r_m: 100e9,
                p_cut: 2e-3,
                p_m: 2e-3,
                gamma_cum: 1.0,
                rho: 1.0,
                is_spm,
            };
            let engine_val = segment_nli(&term, &fib, 0).unwrap();
            let classic = classic_gn(
                gamma_nl(193.1e12, 193.1e12 + df, &fib),
                2e-3,
                2e-3,
                1.0,
                1.0,
                if is_spm { 1.0 } else { 2.0 },
                beta2_eff(193.1e12 + df, 193.1e12, &fib),
                100e9,
                100e9,
                df,
                2.3026e-5,
            );
            assert_relative_eq!(engine_val, classic, max_relative = 1e-9);
            assert!(engine_val > 0.0);
        }
    }

    #[test]
    fn zero_interferer_power_gives_zero() {
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let seg = exp_segment(2.3026e-5, 95e3);
        let term = SegmentTerm {
            seg: &seg,
            f_cut: 193.1e12,
            r_cut: 100e9,
            f_m: 193.25e12,
            r_m: 100e9,
            p_cut: 2e-3,
            p_m: 0.0,
            gamma_cum: 1.0,
            rho: 1.0,
            is_spm: false,
        };
        assert_eq!(segment_nli(&term, &fib, 0).unwrap(), 0.0);
    }

    #[test]
    fn spm_vs_xpm_delta_factor() {
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let seg = exp_segment(2.3026e-5, 95e3);
        let mk = |is_spm| SegmentTerm {
            seg: &seg,
            f_cut: 193.1e12,
            r_cut: 100e9,
            f_m: 193.1e12,
            r_m: 100e9,
            p_cut: 2e-3,
            p_m: 2e-3,
            gamma_cum: 1.0,
            rho: 1.0,
            is_spm,
        };
        let spm = segment_nli(&mk(true), &fib, 0).unwrap();
        let xpm_like = segment_nli(&mk(false), &fib, 0).unwrap();
        assert_relative_eq!(xpm_like, 2.0 * spm, max_relative = 1e-12);
    }

    #[test]
    fn rho_scales_linearly() {
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let mut seg = exp_segment(2.3026e-5, 95e3);
        seg.alpha1 = 4e-6;
        seg.sigma = 5e-5;
        let mk = |rho| SegmentTerm {
            seg: &seg,
            f_cut: 193.1e12,
            r_cut: 100e9,
            f_m: 193.25e12,
            r_m: 100e9,
            p_cut: 2e-3,
            p_m: 2e-3,
            gamma_cum: 1.0,
            rho,
            is_spm: false,
        };
        let base = segment_nli(&mk(1.0), &fib, 0).unwrap();
        let scaled = segment_nli(&mk(1.7), &fib, 0).unwrap();
        assert_relative_eq!(scaled, 1.7 * base, max_relative = 1e-12);
    }

    #[test]
    fn vanishing_pair_denominator_uses_the_limit() {
        // α0 = -σ/4 puts 4α0+(k+q)σ at zero for k+q = 1 (off-diagonal
        // pairs only). The guarded value must sit between evaluations at
        // slightly perturbed α0.
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let sigma = 2e-4;
        let mk_seg = |alpha0: f64| SegmentFit {
            alpha0,
            alpha1: 0.05 * sigma, // T = 0.1, M = 1
            sigma,
            segment_length: 20e3,
            p_start: 2e-3,
            weighted_mse: 0.0,
            sigma_at_bound: false,
            sigma_unconstrained: false,
            constraint_clamped: false,
        };
        let mk = |seg: &SegmentFit| -> f64 {
            let term = SegmentTerm {
                seg,
                f_cut: 193.1e12,
                r_cut: 100e9,
                f_m: 193.25e12,
                r_m: 100e9,
                p_cut: 2e-3,
                p_m: 2e-3,
                gamma_cum: 1.0,
                rho: 1.0,
                is_spm: false,
            };
            segment_nli(&term, &fib, 0).unwrap()
        };
        let exact = mk(&mk_seg(-sigma / 4.0));
        let below = mk(&mk_seg(-sigma / 4.0 * (1.0 - 1e-7)));
        let above = mk(&mk_seg(-sigma / 4.0 * (1.0 + 1e-7)));
        assert!(exact.is_finite() && exact > 0.0);
        let lo = below.min(above);
        let hi = below.max(above);
        assert!(
            exact >= lo * (1.0 - 1e-5) && exact <= hi * (1.0 + 1e-5),
            "guarded {exact} not between {lo} and {hi}"
        );
    }

    #[test]
    fn diagonal_zero_denominator_is_an_error() {
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let sigma = 2e-4;
        let seg = SegmentFit {
            alpha0: -sigma / 2.0, // 4α0 + 2σ = 0 hits the diagonal k=q=1
            alpha1: 0.15 * sigma, // T = 0.3, M = 3
            sigma,
            segment_length: 20e3,
            p_start: 2e-3,
            weighted_mse: 0.0,
            sigma_at_bound: false,
            sigma_unconstrained: false,
            constraint_clamped: false,
        };
        let term = SegmentTerm {
            seg: &seg,
            f_cut: 193.1e12,
            r_cut: 100e9,
            f_m: 193.25e12,
            r_m: 100e9,
            p_cut: 2e-3,
            p_m: 2e-3,
            gamma_cum: 1.0,
            rho: 1.0,
            is_spm: false,
        };
        assert!(matches!(
            segment_nli(&term, &fib, 0),
            Err(EngineError::DegenerateDenominator { .. })
        ));
    }

    #[test]
    fn extending_series_changes_little_for_moderate_t() {
        let fib = fiber(-2.17e-26, 0.0, 0.0);
        let mut seg = exp_segment(2.3026e-5, 95e3);
        seg.sigma = 2e-4;
        seg.alpha1 = 0.3 * seg.sigma; // T = 0.6, M = 6
        let term = SegmentTerm {
            seg: &seg,
            f_cut: 193.1e12,
            r_cut: 100e9,
            f_m: 193.25e12,
            r_m: 100e9,
            p_cut: 2e-3,
            p_m: 2e-3,
            gamma_cum: 1.0,
            rho: 1.0,
            is_spm: false,
        };
        let base = segment_nli(&term, &fib, 0).unwrap();
        let extended = segment_nli(&term, &fib, 5).unwrap();
        let delta_db = (10.0 * (extended / base).log10()).abs();
        assert!(delta_db < 0.05, "delta {delta_db} dB");
    }
}
