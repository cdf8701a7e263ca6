//! Three-parameter loss-model fits of solved power profiles.
//!
//! Each (span, channel) profile is split at its power minimum. The leading
//! segment is fitted directly; the trailing segment is mirrored so that its
//! own z=0 sits at the span end, which turns the pump-dominated power rise
//! into a decay the same model can represent:
//!
//! `P(z) = P(0)·exp(-2·α0·z + 2·α1·(exp(-σ·z) - 1)/σ)`
//!
//! The fit minimizes a weighted MSE in log-power. For fixed σ the problem
//! is linear in (α0, α1), so the search is a 1-D scan plus golden-section
//! refinement over σ. Weights `(P/P_max)^k` concentrate the fit where the
//! power — and hence the NLI generation — is largest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::link::{FitterOptions, LinkSpec};
use crate::solver::LinkSolution;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("segment has {got} samples, at least {min} required")]
    TooFewSamples { got: usize, min: usize },
    #[error("non-positive power {value} at sample {index}; cannot fit in log domain")]
    NonPositivePower { index: usize, value: f64 },
    #[error("power minimum sits at the span start; no loss-dominated segment to fit")]
    DegenerateStartSegment,
}

const MIN_SAMPLES: usize = 8;

/// Fitted loss-model parameters of one segment, in the segment's own
/// coordinate (z=0 at the high-power edge).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentFit {
    /// Asymptotic field loss, 1/m.
    pub alpha0: f64,
    /// Transient field-loss amplitude, 1/m.
    pub alpha1: f64,
    /// Transient decay rate, 1/m.
    pub sigma: f64,
    /// Segment length, m.
    pub segment_length: f64,
    /// Power at the segment's z=0, W (reproduced exactly by the model).
    pub p_start: f64,
    /// Weighted mean square error of ln P.
    pub weighted_mse: f64,
    /// σ landed on a search bound.
    pub sigma_at_bound: bool,
    /// α1 ≈ 0, σ is not identifiable and was reported as found.
    pub sigma_unconstrained: bool,
    /// The α0 constraint was active; α0 sits on a bound.
    pub constraint_clamped: bool,
}

/// Model power at distance `z` into the segment.
pub fn model_power(fit: &SegmentFit, z: f64) -> f64 {
    debug_assert!(fit.sigma > 0.0);
    fit.p_start * (-2.0 * fit.alpha0 * z + 2.0 * fit.alpha1 * (-fit.sigma * z).exp_m1() / fit.sigma).exp()
}

/// Two-segment fit of one (span, channel) profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoSegmentFit {
    /// Split distance from the span start, m.
    pub split_z: f64,
    /// Leading (loss-dominated) segment, z=0 at the span start.
    pub st: SegmentFit,
    /// Trailing (gain-dominated) segment in mirrored coordinates, z=0 at
    /// the span end; absent when the minimum sits at the span end.
    pub end: Option<SegmentFit>,
}

impl TwoSegmentFit {
    /// Composite model power at span coordinate `z`.
    pub fn power_at(&self, z: f64, span_length: f64) -> f64 {
        match &self.end {
            Some(end) if z > self.split_z => model_power(end, span_length - z),
            _ => model_power(&self.st, z.min(self.split_z)),
        }
    }

    /// Placeholder for a channel launched with zero power: the model is
    /// identically zero and every NLI term involving the channel vanishes
    /// before the fit parameters are ever read.
    pub fn zero_power(span_length: f64, intrinsic_field_loss: f64) -> Self {
        Self {
            split_z: span_length,
            st: SegmentFit {
                alpha0: intrinsic_field_loss,
                alpha1: 0.0,
                sigma: 1.0 / span_length,
                segment_length: span_length,
                p_start: 0.0,
                weighted_mse: 0.0,
                sigma_at_bound: false,
                sigma_unconstrained: true,
                constraint_clamped: false,
            },
            end: None,
        }
    }
}

/// Index of the global power minimum (first occurrence).
pub fn find_split(powers: &[f64]) -> usize {
    let mut best = 0usize;
    for (k, &p) in powers.iter().enumerate() {
        if p < powers[best] {
            best = k;
        }
    }
    best
}

/// Box constraints keeping a fit inside the regime the closed form can
/// integrate: bounded α0 and a bounded transient ratio `|2·α1/σ|` (the
/// series order downstream is `⌊10·|2α1/σ|⌋`, so an unbounded ratio makes
/// the term count explode).
#[derive(Debug, Clone, Copy)]
pub struct FitConstraint {
    pub alpha0_min: f64,
    pub alpha0_max: f64,
    /// Cap on `|2·α1/σ|`.
    pub transient_ratio_cap: f64,
    /// Keeps `2·α0 + k·σ` positive for every series order k ≥ 1.
    pub sigma_min: f64,
    /// Pin the model to the far-end sample as well; the two segments then
    /// meet at the split point without a jump and the misfit moves into
    /// the segment interior instead of piling up at the junction.
    pub anchor_far_end: bool,
}

impl FitConstraint {
    /// Leading segment: strictly positive asymptotic loss (the closed form
    /// integrates the model over an infinite tail, so `4·α0·L` must stay
    /// bounded away from zero), capped ratio.
    pub fn start_segment(segment_length: f64, ratio_cap: f64) -> Self {
        Self {
            alpha0_min: 0.25 / segment_length,
            alpha0_max: f64::INFINITY,
            transient_ratio_cap: ratio_cap,
            sigma_min: 0.0,
            anchor_far_end: false,
        }
    }

    /// Mirrored end segment: α0 negative with magnitude below `cap`.
    pub fn end_segment(alpha0_cap: f64, ratio_cap: f64) -> Self {
        Self {
            alpha0_min: -alpha0_cap,
            alpha0_max: 0.0,
            transient_ratio_cap: ratio_cap,
            sigma_min: 3.0 * alpha0_cap,
            anchor_far_end: true,
        }
    }
}

struct InnerSolution {
    alpha0: f64,
    alpha1: f64,
    mse: f64,
    clamped: bool,
}

struct Samples {
    z: Vec<f64>,
    y: Vec<f64>, // ln(P / p_start)
    w: Vec<f64>,
    w_sum: f64,
    p_start: f64,
    length: f64,
}

impl Samples {
    fn build(samples: &[(f64, f64)], weight_exponent: f64, weight_floor: f64) -> Result<Self, FitError> {
        if samples.len() < MIN_SAMPLES {
            return Err(FitError::TooFewSamples {
                got: samples.len(),
                min: MIN_SAMPLES,
            });
        }
        let mut p_max = 0.0f64;
        for (i, &(_, p)) in samples.iter().enumerate() {
            if p <= 0.0 {
                return Err(FitError::NonPositivePower { index: i, value: p });
            }
            p_max = p_max.max(p);
        }
        let p_start = samples[0].1;
        let z: Vec<f64> = samples.iter().map(|s| s.0 - samples[0].0).collect();
        let y: Vec<f64> = samples.iter().map(|s| (s.1 / p_start).ln()).collect();
        let w: Vec<f64> = samples
            .iter()
            .map(|s| (s.1 / p_max).powf(weight_exponent).max(weight_floor))
            .collect();
        let w_sum = w.iter().sum();
        let length = *z.last().unwrap();
        Ok(Self {
            z,
            y,
            w,
            w_sum,
            p_start,
            length,
        })
    }

    /// Weighted least squares of `y ≈ a·z + b·g_σ(z)` for fixed σ. The box
    /// constraints (α0 bounds, |2α1/σ| cap) are applied exactly: the
    /// objective is convex quadratic, so the constrained optimum is the
    /// best feasible point among the interior solution and the bound-fixed
    /// edge/corner solutions.
    fn solve_at(&self, sigma: f64, constraint: Option<&FitConstraint>) -> InnerSolution {
        let g: Vec<f64> = self.z.iter().map(|&z| (-sigma * z).exp_m1() / sigma).collect();
        let (mut szz, mut szg, mut sgg, mut szy, mut sgy, mut syy) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..self.z.len() {
            let (w, z, gi, y) = (self.w[i], self.z[i], g[i], self.y[i]);
            szz += w * z * z;
            szg += w * z * gi;
            sgg += w * gi * gi;
            szy += w * z * y;
            sgy += w * gi * y;
            syy += w * y * y;
        }
        let sse_of = |a: f64, b: f64| -> f64 {
            (syy - 2.0 * a * szy - 2.0 * b * sgy
                + a * a * szz
                + 2.0 * a * b * szg
                + b * b * sgg)
                .max(0.0)
        };
        let det = szz * sgg - szg * szg;
        let collinear = det.abs() <= 1e-12 * szz.abs() * sgg.abs() || sgg == 0.0;
        let interior = if collinear {
            // z and g_σ are collinear: fall back to the pure-exponential fit.
            (if szz > 0.0 { szy / szz } else { 0.0 }, 0.0)
        } else {
            ((szy * sgg - sgy * szg) / det, (sgy * szz - szy * szg) / det)
        };
        let solve_b_given_a = |a: f64| if sgg > 0.0 { (sgy - a * szg) / sgg } else { 0.0 };
        let solve_a_given_b = |b: f64| if szz > 0.0 { (szy - b * szg) / szz } else { 0.0 };

        let Some(c) = constraint else {
            return InnerSolution {
                alpha0: -interior.0 / 2.0,
                alpha1: interior.1 / 2.0,
                mse: sse_of(interior.0, interior.1) / self.w_sum,
                clamped: false,
            };
        };

        // Bounds in (a, b) = (-2α0, 2α1) coordinates.
        let a_lo = -2.0 * c.alpha0_max;
        let a_hi = -2.0 * c.alpha0_min;
        let b_cap = c.transient_ratio_cap * sigma;

        if c.anchor_far_end && !collinear {
            // Equality-constrained fit through the far-end sample:
            // a·Z + b·G = Y with (Z, G, Y) at the last node; G < 0 always.
            let big_z = *self.z.last().unwrap();
            let big_g = *g.last().unwrap();
            let big_y = *self.y.last().unwrap();
            if big_z > 0.0 && big_g < 0.0 {
                let (mut suu, mut sur) = (0.0, 0.0);
                let mut srr = 0.0;
                for i in 0..self.z.len() {
                    let u = g[i] - big_g / big_z * self.z[i];
                    let r = self.y[i] - big_y / big_z * self.z[i];
                    let w = self.w[i];
                    suu += w * u * u;
                    sur += w * u * r;
                    srr += w * r * r;
                }
                let b_star = if suu > 0.0 { sur / suu } else { 0.0 };
                let mut b_min = -b_cap;
                let mut b_max = b_cap;
                if a_lo.is_finite() {
                    b_min = b_min.max((a_lo * big_z - big_y) / (-big_g));
                }
                if a_hi.is_finite() {
                    b_max = b_max.min((a_hi * big_z - big_y) / (-big_g));
                }
                if b_min <= b_max {
                    let b = b_star.clamp(b_min, b_max);
                    let a = (big_y - b * big_g) / big_z;
                    let sse = (b * b * suu - 2.0 * b * sur + srr).max(0.0);
                    return InnerSolution {
                        alpha0: -a / 2.0,
                        alpha1: b / 2.0,
                        mse: sse / self.w_sum,
                        clamped: b != b_star,
                    };
                }
                // The anchor conflicts with the α0 box at this σ; fall
                // through to the plain box-constrained solve.
            }
        }
        let bound_tol = |bound: f64| -> f64 {
            if bound.is_finite() {
                1e-9 * (bound.abs() + 1e-15)
            } else {
                0.0
            }
        };
        let feasible = |a: f64, b: f64| -> bool {
            a >= a_lo - bound_tol(a_lo)
                && a <= a_hi + bound_tol(a_hi)
                && b.abs() <= b_cap + bound_tol(b_cap)
        };

        let mut candidates: Vec<(f64, f64, bool)> = vec![(interior.0, interior.1, false)];
        for a_fix in [a_lo, a_hi] {
            if a_fix.is_finite() && !collinear {
                candidates.push((a_fix, solve_b_given_a(a_fix), true));
            }
        }
        for b_fix in [-b_cap, b_cap] {
            candidates.push((solve_a_given_b(b_fix), b_fix, true));
        }
        for a_fix in [a_lo, a_hi] {
            for b_fix in [-b_cap, b_cap] {
                if a_fix.is_finite() {
                    candidates.push((a_fix, b_fix, true));
                }
            }
        }
        let mut best: Option<(f64, f64, bool, f64)> = None;
        for (a, b, clamped) in candidates {
            if !feasible(a, b) {
                continue;
            }
            let sse = sse_of(a, b);
            if best.map(|(_, _, _, s)| sse < s).unwrap_or(true) {
                best = Some((a, b, clamped, sse));
            }
        }
        // The box is non-empty, so a fully clamped corner always qualifies;
        // this fallback only guards floating pathologies.
        let (a, b, clamped, sse) = best.unwrap_or((
            a_hi.min(a_lo.max(0.0)),
            0.0,
            true,
            f64::INFINITY,
        ));
        InnerSolution {
            alpha0: -a / 2.0,
            alpha1: b / 2.0,
            mse: sse / self.w_sum,
            clamped,
        }
    }
}

/// Fit one segment by weighted log-domain least squares.
pub fn fit_segment(
    samples: &[(f64, f64)],
    opts: &FitterOptions,
    constraint: Option<FitConstraint>,
) -> Result<SegmentFit, FitError> {
    let s = Samples::build(samples, opts.weight_exponent, opts.weight_floor)?;
    let sigma_lo_raw = 1e-2 / s.length;
    let sigma_hi = 1e2 / s.length;
    let sigma_lo = match &constraint {
        Some(c) => sigma_lo_raw.max(c.sigma_min),
        None => sigma_lo_raw,
    };

    // Log-spaced scan, then golden-section inside the bracketing interval.
    let n_scan = opts.sigma_scan_points.max(8);
    let ratio = (sigma_hi / sigma_lo).ln();
    let sigma_at = |t: f64| sigma_lo * (ratio * t).exp();
    let mut best_i = 0usize;
    let mut best_mse = f64::INFINITY;
    let mut scan_mse = vec![0.0f64; n_scan];
    for i in 0..n_scan {
        let sigma = sigma_at(i as f64 / (n_scan - 1) as f64);
        let sol = s.solve_at(sigma, constraint.as_ref());
        scan_mse[i] = sol.mse;
        if sol.mse < best_mse {
            best_mse = sol.mse;
            best_i = i;
        }
    }
    // On a flat-MSE plateau (α1 and σ nearly degenerate) prefer the largest
    // σ that fits equally well: small-σ solutions trade a harmless shape
    // difference for huge transient ratios 2α1/σ downstream.
    let tie_band = best_mse + 1e-6 * (best_mse + 1e-300);
    for i in (best_i..n_scan).rev() {
        if scan_mse[i] <= tie_band {
            best_i = i;
            break;
        }
    }
    let lo_t = if best_i == 0 { 0.0 } else { (best_i - 1) as f64 / (n_scan - 1) as f64 };
    let hi_t = ((best_i + 1).min(n_scan - 1)) as f64 / (n_scan - 1) as f64;

    // Golden-section on t (log-σ coordinate).
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo_t, hi_t);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = s.solve_at(sigma_at(c), constraint.as_ref()).mse;
    let mut fd = s.solve_at(sigma_at(d), constraint.as_ref()).mse;
    let t_tol = opts.sigma_refine_rel / ratio.max(1e-9);
    while (b - a) > t_tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = s.solve_at(sigma_at(c), constraint.as_ref()).mse;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = s.solve_at(sigma_at(d), constraint.as_ref()).mse;
        }
    }
    let sigma = sigma_at(0.5 * (a + b));
    let sol = s.solve_at(sigma, constraint.as_ref());

    let sigma_at_bound = sigma <= sigma_lo * 1.02 || sigma >= sigma_hi * 0.98;
    let sigma_unconstrained = sol.alpha1.abs() < 1e-12;
    Ok(SegmentFit {
        alpha0: sol.alpha0,
        alpha1: sol.alpha1,
        sigma,
        segment_length: s.length,
        p_start: s.p_start,
        weighted_mse: sol.mse,
        sigma_at_bound,
        sigma_unconstrained,
        constraint_clamped: sol.clamped,
    })
}

/// Split one channel's profile at its minimum and fit both segments.
pub fn fit_span(
    z_grid: &[f64],
    powers: &[f64],
    intrinsic_field_loss: f64,
    opts: &FitterOptions,
) -> Result<TwoSegmentFit, FitError> {
    let n = z_grid.len() - 1;
    let length = z_grid[n];
    let mut split = find_split(powers);
    if split == 0 {
        return Err(FitError::DegenerateStartSegment);
    }
    // A trailing stub shorter than the minimum sample count carries no
    // fittable information; fold it into the leading segment.
    if split < n && n - split + 1 < MIN_SAMPLES {
        split = n;
    }
    let st_samples: Vec<(f64, f64)> = (0..=split).map(|k| (z_grid[k], powers[k])).collect();
    let st = fit_segment(
        &st_samples,
        opts,
        Some(FitConstraint::start_segment(
            z_grid[split],
            opts.transient_ratio_cap,
        )),
    )?;

    let end = if split < n {
        let end_samples: Vec<(f64, f64)> = (0..=(n - split))
            .map(|j| (z_grid[n] - z_grid[n - j], powers[n - j]))
            .collect();
        let cap = opts.alpha0_end_cap_scale * intrinsic_field_loss;
        let constraint = FitConstraint::end_segment(cap, opts.transient_ratio_cap);
        Some(fit_segment(&end_samples, opts, Some(constraint))?)
    } else {
        None
    };
    Ok(TwoSegmentFit {
        split_z: z_grid[split].min(length),
        st,
        end,
    })
}

/// Fit every (span, channel) pair of a solved link: `fits[span][channel]`.
pub fn fit_link(link: &LinkSpec, solution: &LinkSolution) -> Result<Vec<Vec<TwoSegmentFit>>, FitError> {
    use rayon::prelude::*;
    link.spans
        .iter()
        .zip(solution.spans.iter())
        .map(|(span, sol)| {
            (0..link.channels.len())
                .into_par_iter()
                .map(|c| {
                    let alpha = span
                        .fiber
                        .intrinsic_field_loss
                        .eval(link.channels[c].center_frequency);
                    if sol.launch_w[c] == 0.0 {
                        return Ok(TwoSegmentFit::zero_power(span.length, alpha));
                    }
                    fit_span(
                        &sol.profile.z_grid,
                        sol.profile.channel_power(c),
                        alpha,
                        &link.fitter,
                    )
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect()
}
