//! Brute-force restricted GN integral — the numerical ground truth.
//!
//! For every (CUT, interferer, span) triple the NLI PSD at the CUT center
//! is a double integral of `|∫ p̂_m(z)·e^(jχz) dz|²` over the SPM/XPM
//! island, where `p̂_m(z) = P_m(z)/P_m(0)` is the interferer's normalized
//! power profile straight from the solver and χ the dispersion
//! phase-mismatch rate. No loss-model, series or asinh approximation is
//! involved, so the closed form can be validated against this end to end.
//!
//! `Split` mode squares the two z-segments separately, matching the closed
//! form's assumption that the segments radiate independently; `Exact` mode
//! integrates the span in one piece and therefore keeps the cross term.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{chi, gamma_nl, MlFactors, NliReport};
use crate::fitter::{find_split, model_power, TwoSegmentFit};
use crate::link::LinkSpec;
use crate::solver::LinkSolution;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error(
        "island quadrature did not converge: {worst_delta_db:.4} dB change at {panels} panels (tolerance {tol_db} dB)"
    )]
    NonConverged {
        worst_delta_db: f64,
        panels: usize,
        tol_db: f64,
    },
    #[error("fitted-profile oracle requested but no fits were supplied")]
    MissingFits,
}

/// How the span's z-integral is squared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMode {
    Exact,
    Split,
}

/// Which profile the z-integral consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileSource {
    Numeric,
    Fitted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleChannel {
    pub channel: usize,
    pub frequency: f64,
    pub total_w: f64,
    pub psd_w_per_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub channels: Vec<OracleChannel>,
    pub mode: OracleMode,
    /// Island panels per axis actually used.
    pub panels: usize,
    /// Worst per-channel coarse-vs-fine change, dB.
    pub convergence_db: f64,
}

/// `∫ p̂(z)·e^(jχz) dz` over the node range `[i0, i1]` of a uniform grid by
/// composite Simpson; an odd panel count ends with a 3/8 segment.
pub fn inner_z_integral(z: &[f64], p_norm: &[f64], chi_val: f64, i0: usize, i1: usize) -> Complex64 {
    debug_assert!(i1 >= i0 && i1 < z.len());
    let n = i1 - i0;
    if n == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let h = z[1] - z[0];
    let f = |k: usize| Complex64::from_polar(p_norm[k], chi_val * z[k]);
    if n == 1 {
        return (f(i0) + f(i1)) * (h / 2.0);
    }
    let (simpson_end, mut acc38) = if n % 2 == 0 {
        (i1, Complex64::new(0.0, 0.0))
    } else {
        // 3/8 rule on the last three panels.
        let a = i1 - 3;
        let tail = (f(a) + f(a + 1) * 3.0 + f(a + 2) * 3.0 + f(i1)) * (3.0 * h / 8.0);
        (a, tail)
    };
    if simpson_end > i0 {
        let mut s = f(i0) + f(simpson_end);
        let mut k = i0 + 1;
        while k < simpson_end {
            s += f(k) * if (k - i0) % 2 == 1 { 4.0 } else { 2.0 };
            k += 1;
        }
        acc38 += s * (h / 3.0);
    }
    acc38
}

fn simpson_weights(panels: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; panels + 1];
    w[0] = 1.0;
    w[panels] = 1.0;
    for (k, wk) in w.iter_mut().enumerate().take(panels).skip(1) {
        *wk = if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    for wk in w.iter_mut() {
        *wk *= h / 3.0;
    }
    w
}

/// Normalized interferer profile on the span grid.
fn profile_curve(
    link: &LinkSpec,
    solution: &LinkSolution,
    fits: Option<&[Vec<TwoSegmentFit>]>,
    source: ProfileSource,
    ns: usize,
    m: usize,
) -> Result<Vec<f64>, QuadratureError> {
    let profile = &solution.spans[ns].profile;
    let numeric = profile.channel_power(m);
    match source {
        ProfileSource::Numeric => {
            let p0 = numeric[0];
            Ok(numeric.iter().map(|&p| p / p0).collect())
        }
        ProfileSource::Fitted => {
            let fit = fits
                .ok_or(QuadratureError::MissingFits)?
                .get(ns)
                .and_then(|row| row.get(m))
                .ok_or(QuadratureError::MissingFits)?;
            let p0 = numeric[0];
            let length = link.spans[ns].length;
            Ok(profile
                .z_grid
                .iter()
                .map(|&z| {
                    let p = if z > fit.split_z {
                        match &fit.end {
                            Some(end) => model_power(end, length - z),
                            None => model_power(&fit.st, z),
                        }
                    } else {
                        model_power(&fit.st, z)
                    };
                    p / p0
                })
                .collect())
        }
    }
}

/// Split index rounded to an even node so composite-Simpson subranges
/// compose exactly with the whole-span integral.
fn even_split_index(split_z: f64, h: f64, n: usize) -> usize {
    let k = (split_z / h).round() as usize;
    let k = k.min(n);
    if k % 2 == 0 {
        k
    } else if k + 1 <= n {
        k + 1
    } else {
        k - 1
    }
}

/// `∫ p̂(z)·e^(jχz) dz` over `[i0, i1]` taking p̂ piecewise linear between
/// grid nodes and integrating each interval exactly (Filon-type rule).
/// Unlike sampled Simpson this stays accurate for arbitrarily large χ·h,
/// which the island tails of pumped spans do reach.
fn filon_transform(z: &[f64], p: &[f64], chi: f64, i0: usize, i1: usize) -> Complex64 {
    if i1 <= i0 {
        return Complex64::new(0.0, 0.0);
    }
    let h = z[1] - z[0];
    let x = chi * h;
    // I0 = ∫0..h e^(jχt) dt, I1 = ∫0..h t·e^(jχt) dt
    let (i0_w, i1_w) = if x.abs() < 1e-3 {
        let x2 = x * x;
        let x3 = x2 * x;
        let x4 = x2 * x2;
        (
            Complex64::new(1.0 - x2 / 6.0 + x4 / 120.0, x / 2.0 - x3 / 24.0) * h,
            Complex64::new(0.5 - x2 / 8.0 + x4 / 144.0, x / 3.0 - x3 / 30.0) * (h * h),
        )
    } else {
        let e = Complex64::from_polar(1.0, x);
        let jc = Complex64::new(0.0, chi);
        let one = Complex64::new(1.0, 0.0);
        let i0_w = (e - one) / jc;
        let i1_w = (e * Complex64::new(-1.0, x) + one) / (jc * jc);
        (i0_w, i1_w)
    };
    let w1 = i1_w / h;
    let w0 = i0_w - w1;
    let e_step = Complex64::from_polar(1.0, x);
    let mut phase = Complex64::from_polar(1.0, chi * z[i0]);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in i0..i1 {
        if (k - i0) % 1024 == 1023 {
            phase = Complex64::from_polar(1.0, chi * z[k]);
        }
        acc += phase * (w0 * p[k] + w1 * p[k + 1]);
        phase *= e_step;
    }
    acc
}

/// Mode-combined `|A(χ)|²` sampled on a uniform χ grid dense enough to
/// resolve the cos(χ·L) structure; island quadrature reads this table
/// through a local cubic instead of re-integrating the span per node.
struct ChiTable {
    chi0: f64,
    step: f64,
    values: Vec<f64>,
}

/// χ samples per 2π/L oscillation period in the table.
const TABLE_PTS_PER_PERIOD: f64 = 24.0;
/// Quadrature nodes per oscillation period along the dense island axis.
const QUAD_PTS_PER_PERIOD: f64 = 16.0;
/// Hard cap on per-axis panels; beyond this the refinement check reports
/// non-convergence honestly.
const MAX_AXIS_PANELS: usize = 1 << 17;

impl ChiTable {
    fn build(
        z: &[f64],
        p_norm: &[f64],
        split: Option<usize>,
        mode: OracleMode,
        chi_lo: f64,
        chi_hi: f64,
        span_length: f64,
    ) -> Self {
        use rayon::prelude::*;
        let n_z = z.len() - 1;
        let step = 2.0 * std::f64::consts::PI / (TABLE_PTS_PER_PERIOD * span_length);
        let lo = chi_lo - 2.0 * step;
        let hi = chi_hi + 2.0 * step;
        let n_nodes = (((hi - lo) / step).ceil() as usize + 1).max(4);
        let values: Vec<f64> = (0..n_nodes)
            .into_par_iter()
            .map(|i| {
                let chi = lo + i as f64 * step;
                match (mode, split) {
                    (OracleMode::Exact, _) | (OracleMode::Split, None) => {
                        filon_transform(z, p_norm, chi, 0, n_z).norm_sqr()
                    }
                    (OracleMode::Split, Some(s)) => {
                        filon_transform(z, p_norm, chi, 0, s).norm_sqr()
                            + filon_transform(z, p_norm, chi, s, n_z).norm_sqr()
                    }
                }
            })
            .collect();
        Self {
            chi0: lo,
            step,
            values,
        }
    }

    fn eval(&self, chi: f64) -> f64 {
        let n = self.values.len();
        if n == 1 {
            return self.values[0];
        }
        let x = ((chi - self.chi0) / self.step).clamp(0.0, (n - 1) as f64);
        let i = (x.floor() as usize).clamp(1, n - 3);
        let t = x - i as f64;
        let (vm, v0, v1, v2) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        let cm = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let c0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let c1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let c2 = (t + 1.0) * t * (t - 1.0) / 6.0;
        (cm * vm + c0 * v0 + c1 * v1 + c2 * v2).max(0.0)
    }
}

struct CellTask {
    cut: usize,
    ns: usize,
    m: usize,
}

/// Evaluate the restricted GN double integral for every channel.
pub fn nli_numeric(
    link: &LinkSpec,
    solution: &LinkSolution,
    fits: Option<&[Vec<TwoSegmentFit>]>,
    ml: &MlFactors,
) -> Result<OracleReport, QuadratureError> {
    use rayon::prelude::*;
    let opts = &link.oracle;
    let n_ch = link.channels.len();
    let n_spans = link.spans.len();

    // Cells with nonzero PSD products only.
    let mut tasks = Vec::new();
    for cut in 0..n_ch {
        for ns in 0..n_spans {
            for m in 0..n_ch {
                let sol = &solution.spans[ns];
                if sol.launch_w[cut] > 0.0 && sol.launch_w[m] > 0.0 {
                    tasks.push(CellTask { cut, ns, m });
                }
            }
        }
    }

    // χ range needed from each (span, interferer) transform: union over
    // cuts of the island corners (β3/β4 curvature absorbed by a margin).
    let mut ranges: Vec<Vec<Option<(f64, f64)>>> = vec![vec![None; n_ch]; n_spans];
    for task in &tasks {
        let cut_ch = &link.channels[task.cut];
        let m_ch = &link.channels[task.m];
        let fiber = &link.spans[task.ns].fiber;
        let f = cut_ch.center_frequency;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=4 {
            for j in 0..=4 {
                let f1 = m_ch.band_start()
                    + i as f64 / 4.0 * (m_ch.band_stop() - m_ch.band_start());
                let f2 = cut_ch.band_start()
                    + j as f64 / 4.0 * (cut_ch.band_stop() - cut_ch.band_start());
                let c = chi(f1, f2, f, fiber);
                lo = lo.min(c);
                hi = hi.max(c);
            }
        }
        let margin = 0.05 * (hi - lo).abs().max(1e-12);
        let entry = &mut ranges[task.ns][task.m];
        let (lo, hi) = (lo - margin, hi + margin);
        *entry = Some(match *entry {
            None => (lo, hi),
            Some((a, b)) => (a.min(lo), b.max(hi)),
        });
    }

    // One |A(χ)|² table per populated (span, interferer).
    let mut table_jobs = Vec::new();
    for ns in 0..n_spans {
        for m in 0..n_ch {
            if let Some(range) = ranges[ns][m] {
                table_jobs.push((ns, m, range));
            }
        }
    }
    let tables: Vec<ChiTable> = table_jobs
        .iter()
        .map(|&(ns, m, (lo, hi))| -> Result<ChiTable, QuadratureError> {
            let profile = &solution.spans[ns].profile;
            let z = &profile.z_grid;
            let h = z[1] - z[0];
            let n_z = z.len() - 1;
            let p_norm = profile_curve(link, solution, fits, opts.profile_source, ns, m)?;
            let split_idx = match opts.mode {
                OracleMode::Exact => None,
                OracleMode::Split => {
                    let split_z = match (opts.profile_source, fits) {
                        (_, Some(f)) => f[ns][m].split_z,
                        (ProfileSource::Numeric, None) => {
                            z[find_split(profile.channel_power(m))]
                        }
                        (ProfileSource::Fitted, None) => {
                            return Err(QuadratureError::MissingFits)
                        }
                    };
                    Some(even_split_index(split_z, h, n_z))
                }
            };
            Ok(ChiTable::build(
                z,
                &p_norm,
                split_idx,
                opts.mode,
                lo,
                hi,
                link.spans[ns].length,
            ))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut table_of: Vec<Vec<Option<usize>>> = vec![vec![None; n_ch]; n_spans];
    for (idx, &(ns, m, _)) in table_jobs.iter().enumerate() {
        table_of[ns][m] = Some(idx);
    }

    let mut panels = opts.island_panels;
    let mut worst = f64::INFINITY;
    for _attempt in 0..=opts.max_refinements {
        let results: Vec<(f64, f64)> = tasks
            .par_iter()
            .map(|task| {
                let table = &tables[table_of[task.ns][task.m].expect("table built")];
                cell_integral(link, task, table, panels)
            })
            .collect();

        let mut fine = vec![0.0f64; n_ch];
        let mut coarse = vec![0.0f64; n_ch];
        for (task, &(f, c)) in tasks.iter().zip(results.iter()) {
            let sol = &solution.spans[task.ns];
            let cut_ch = &link.channels[task.cut];
            let m_ch = &link.channels[task.m];
            let g_cut = sol.launch_w[task.cut] / cut_ch.symbol_rate;
            let g_m = sol.launch_w[task.m] / m_ch.symbol_rate;
            let gamma = gamma_nl(
                cut_ch.center_frequency,
                m_ch.center_frequency,
                &link.spans[task.ns].fiber,
            );
            let delta_factor = if task.cut == task.m { 1.0 } else { 2.0 };
            let pref = (16.0 / 27.0)
                * gamma
                * gamma
                * g_cut
                * g_m
                * g_m
                * delta_factor
                * ml.get(task.ns, task.m)
                * solution.gamma_start[task.ns][task.cut];
            fine[task.cut] += pref * f;
            coarse[task.cut] += pref * c;
        }

        worst = 0.0;
        for cut in 0..n_ch {
            if fine[cut] > 0.0 && coarse[cut] > 0.0 {
                let delta = (10.0 * (fine[cut] / coarse[cut]).log10()).abs();
                worst = worst.max(delta);
            }
        }
        if worst <= opts.refine_tol_db {
            let channels = (0..n_ch)
                .map(|c| OracleChannel {
                    channel: c,
                    frequency: link.channels[c].center_frequency,
                    psd_w_per_hz: fine[c],
                    total_w: fine[c] * link.channels[c].symbol_rate,
                })
                .collect();
            return Ok(OracleReport {
                channels,
                mode: opts.mode,
                panels,
                convergence_db: worst,
            });
        }
        panels *= 2;
    }
    Err(QuadratureError::NonConverged {
        worst_delta_db: worst,
        panels: panels / 2,
        tol_db: opts.refine_tol_db,
    })
}

fn round_to_four(p: usize) -> usize {
    p.max(4).div_ceil(4) * 4
}

/// One island integral at `base_panels` per smooth axis plus its embedded
/// half-resolution estimate (stride-2 subset). The f2 axis, along which
/// the phase χ·L sweeps fastest, gets enough panels to resolve the
/// oscillation of |A(χ)|².
fn cell_integral(link: &LinkSpec, task: &CellTask, table: &ChiTable, base_panels: usize) -> (f64, f64) {
    let cut_ch = &link.channels[task.cut];
    let m_ch = &link.channels[task.m];
    let fiber = &link.spans[task.ns].fiber;
    let length = link.spans[task.ns].length;
    let f = cut_ch.center_frequency;
    let f1_lo = m_ch.band_start();
    let f1_hi = m_ch.band_stop();
    let f2_lo = cut_ch.band_start();
    let f2_hi = cut_ch.band_stop();

    // Panels per axis follow the phase sweep χ·L across the cell, so both
    // the cos(χL) oscillation and the narrow small-|χ| structure are
    // resolved at any base resolution.
    let mut periods_u: f64 = 0.0;
    let mut periods_v: f64 = 0.0;
    for frac in [0.0, 0.5, 1.0] {
        let f1 = f1_lo + frac * (f1_hi - f1_lo);
        let sweep_v = (chi(f1, f2_hi, f, fiber) - chi(f1, f2_lo, f, fiber)).abs();
        periods_v = periods_v.max(sweep_v * length / (2.0 * std::f64::consts::PI));
        let f2 = f2_lo + frac * (f2_hi - f2_lo);
        let sweep_u = (chi(f1_hi, f2, f, fiber) - chi(f1_lo, f2, f, fiber)).abs();
        periods_u = periods_u.max(sweep_u * length / (2.0 * std::f64::consts::PI));
    }
    let adaptive = |periods: f64| -> usize {
        round_to_four(((QUAD_PTS_PER_PERIOD * periods).ceil() as usize).max(base_panels))
            .min(MAX_AXIS_PANELS)
    };
    let panels_u = adaptive(periods_u);
    let panels_v = adaptive(periods_v);

    let h1 = (f1_hi - f1_lo) / panels_u as f64;
    let h2 = (f2_hi - f2_lo) / panels_v as f64;
    let w_u = simpson_weights(panels_u, h1);
    let w_v = simpson_weights(panels_v, h2);
    let w_u2 = simpson_weights(panels_u / 2, 2.0 * h1);
    let w_v2 = simpson_weights(panels_v / 2, 2.0 * h2);

    let mut fine = 0.0;
    let mut coarse = 0.0;
    for i in 0..=panels_u {
        let f1 = f1_lo + i as f64 * h1;
        let mut row_fine = 0.0;
        let mut row_coarse = 0.0;
        for j in 0..=panels_v {
            let f2 = f2_lo + j as f64 * h2;
            let val = table.eval(chi(f1, f2, f, fiber));
            row_fine += w_v[j] * val;
            if i % 2 == 0 && j % 2 == 0 {
                row_coarse += w_v2[j / 2] * val;
            }
        }
        fine += w_u[i] * row_fine;
        if i % 2 == 0 {
            coarse += w_u2[i / 2] * row_coarse;
        }
    }
    (fine, coarse)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub channel: usize,
    pub frequency: f64,
    pub cfm_w: f64,
    pub oracle_w: f64,
    /// `10·log10(cfm/oracle)`; 0 when both are zero.
    pub delta_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub max_abs_delta_db: f64,
    pub mean_abs_delta_db: f64,
    pub oracle_mode: OracleMode,
}

/// Per-channel dB deltas between the closed form and the oracle.
pub fn compare(cfm: &NliReport, oracle: &OracleReport) -> ComparisonTable {
    let mut rows = Vec::with_capacity(cfm.channels.len());
    for (c, o) in cfm.channels.iter().zip(oracle.channels.iter()) {
        let delta_db = if c.total_w == 0.0 && o.total_w == 0.0 {
            0.0
        } else {
            10.0 * (c.total_w / o.total_w).log10()
        };
        rows.push(ComparisonRow {
            channel: c.channel,
            frequency: c.frequency,
            cfm_w: c.total_w,
            oracle_w: o.total_w,
            delta_db,
        });
    }
    let max_abs = rows.iter().map(|r| r.delta_db.abs()).fold(0.0, f64::max);
    let mean_abs = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.delta_db.abs()).sum::<f64>() / rows.len() as f64
    };
    ComparisonTable {
        rows,
        max_abs_delta_db: max_abs,
        mean_abs_delta_db: mean_abs,
        oracle_mode: oracle.mode,
    }
}
