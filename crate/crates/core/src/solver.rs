//! Coupled Raman power-evolution equations over one span.
//!
//! Every wave (signal channel or pump) obeys
//!
//! `±dP_i/dz = [Σ_j ς(f_i/f_j)·C_R(f_j − f_i)·P_j]·P_i − 2·α_lin(f_i)·P_i`
//!
//! with `+` for forward propagation and `-` for backward pumps. Forward
//! waves have known powers at z=0, backward pumps at z=L, which makes the
//! span a two-point boundary value problem. It is solved by damped
//! relaxation sweeps: backward pumps are integrated L→0 against the
//! current forward field, then the forward waves 0→L against the damped
//! pump field, until the pump field stops moving. Each sweep uses classic
//! fixed-step fourth-order Runge-Kutta; the frozen counter-propagating
//! field is interpolated to half steps with a four-point cubic so the
//! overall discretization stays fourth order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::link::{LinkSpec, PostGain, PumpDirection, SolverOptions, SpanSpec};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(
        "BVP relaxation did not converge after {iterations} sweeps (residual {residual:.3e}, tolerance {tolerance:.3e})"
    )]
    BvpNonConvergence {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("launch power vector has {got} entries, expected {expected}")]
    LaunchMismatch { got: usize, expected: usize },
    #[error("negative launch power {value} for wave {wave}")]
    NegativeLaunch { wave: usize, value: f64 },
}

/// What a wave index refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveKind {
    /// Index into `LinkSpec::channels`.
    Channel(usize),
    /// Index into the span's pump list.
    Pump(usize),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WaveInfo {
    pub frequency: f64,
    pub kind: WaveKind,
    pub direction: PumpDirection,
}

/// Sampled per-wave power along one span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerProfile {
    /// Uniform grid 0..=L, m.
    pub z_grid: Vec<f64>,
    /// Waves in channel-then-pump order (channels ascending in frequency).
    pub waves: Vec<WaveInfo>,
    /// Power in W, `powers[wave][z index]`.
    pub powers: Vec<Vec<f64>>,
    /// Relaxation sweeps used.
    pub iterations: usize,
    /// Final pump-field residual (0 when the span has no backward pumps).
    pub residual: f64,
    pub warnings: Vec<String>,
}

impl PowerProfile {
    /// Power samples of a signal channel (by channel index).
    pub fn channel_power(&self, channel: usize) -> &[f64] {
        let i = self
            .waves
            .iter()
            .position(|w| w.kind == WaveKind::Channel(channel))
            .expect("channel index out of range");
        &self.powers[i]
    }

    pub fn span_length(&self) -> f64 {
        *self.z_grid.last().unwrap()
    }
}

/// Photon-flux factor ς(f_i/f_j) of the pump-depletion term.
pub fn photon_flux_factor(f_i: f64, f_j: f64) -> f64 {
    if f_i > f_j {
        f_i / f_j
    } else if f_i == f_j {
        0.0
    } else {
        1.0
    }
}

/// The coupled system of one span: coupling matrix and loss vector over
/// the merged channel+pump wave set.
pub struct SpanSystem {
    pub waves: Vec<WaveInfo>,
    /// `coupling[i*n + j] = ς(f_i/f_j)·C_R(f_j − f_i)`, 1/(W·m).
    coupling: Vec<f64>,
    /// `2·α_lin(f_i)`, 1/m.
    alpha2: Vec<f64>,
    n: usize,
}

impl SpanSystem {
    pub fn new(span: &SpanSpec, channels: &[crate::link::Channel]) -> Self {
        let mut waves: Vec<WaveInfo> = channels
            .iter()
            .enumerate()
            .map(|(i, c)| WaveInfo {
                frequency: c.center_frequency,
                kind: WaveKind::Channel(i),
                direction: PumpDirection::Forward,
            })
            .collect();
        waves.extend(span.pumps.iter().enumerate().map(|(i, p)| WaveInfo {
            frequency: p.center_frequency,
            kind: WaveKind::Pump(i),
            direction: p.direction,
        }));
        let n = waves.len();
        let mut coupling = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let fi = waves[i].frequency;
                let fj = waves[j].frequency;
                coupling[i * n + j] =
                    photon_flux_factor(fi, fj) * span.fiber.raman_gain.eval(fj - fi);
            }
        }
        let alpha2 = waves
            .iter()
            .map(|w| 2.0 * span.fiber.intrinsic_field_loss.eval(w.frequency))
            .collect();
        Self {
            waves,
            coupling,
            alpha2,
            n,
        }
    }

    /// Net gain coefficient seen by wave `i` in the jointly sampled field
    /// `state`, 1/m: `Σ_j K_ij·P_j − 2α_i`.
    pub fn gain_coefficient(&self, i: usize, state: &[f64]) -> f64 {
        let row = &self.coupling[i * self.n..(i + 1) * self.n];
        let mut g = 0.0;
        for (k, &p) in row.iter().zip(state.iter()) {
            g += k * p;
        }
        g - self.alpha2[i]
    }

    /// Direction-signed derivative `dP/dz` for the full state vector.
    pub fn rhs(&self, state: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let raw = self.gain_coefficient(i, state) * state[i];
            out[i] = match self.waves[i].direction {
                PumpDirection::Forward => raw,
                PumpDirection::Backward => -raw,
            };
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Cubic interpolation of a grid row at node `k + 1/2`.
fn midpoint(row: &[f64], k: usize) -> f64 {
    let n = row.len() - 1;
    let v = if n < 3 {
        0.5 * (row[k] + row[k + 1])
    } else if k == 0 {
        (5.0 * row[0] + 15.0 * row[1] - 5.0 * row[2] + row[3]) / 16.0
    } else if k == n - 1 {
        (row[n - 3] - 5.0 * row[n - 2] + 15.0 * row[n - 1] + 5.0 * row[n]) / 16.0
    } else {
        (-row[k - 1] + 9.0 * row[k] + 9.0 * row[k + 1] - row[k + 2]) / 16.0
    };
    v.max(0.0)
}

/// One relaxation sweep: integrate the `live` subset of waves along its own
/// travel coordinate while the complementary `frozen` field is held fixed.
///
/// `frozen_at(j, node)`/`frozen_mid(j, node)` sample the frozen field in the
/// LIVE coordinate; `node` counts live steps from the live launch point.
struct SweepContext<'a> {
    system: &'a SpanSystem,
    live: &'a [usize],
    frozen: &'a [usize],
    h: f64,
}

impl SweepContext<'_> {
    /// Frozen coupling accumulated into each live wave at a stage position.
    fn frozen_drive(&self, frozen_values: &[f64], out: &mut [f64]) {
        let n = self.system.n;
        for (li, &i) in self.live.iter().enumerate() {
            let row = &self.system.coupling[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for (fj, &j) in self.frozen.iter().enumerate() {
                acc += row[j] * frozen_values[fj];
            }
            out[li] = acc;
        }
    }

    fn derivative(&self, y: &[f64], drive: &[f64], out: &mut [f64]) {
        let n = self.system.n;
        for (li, &i) in self.live.iter().enumerate() {
            let row = &self.system.coupling[i * n..(i + 1) * n];
            let mut g = drive[li] - self.system.alpha2[i];
            for (lj, &j) in self.live.iter().enumerate() {
                g += row[j] * y[lj];
            }
            out[li] = g * y[li];
        }
    }

    /// Integrate all live waves across the grid, writing into `field`
    /// (indexed in live coordinates: node 0 is the live launch point).
    /// Returns true if any state had to be clamped at zero.
    fn integrate(&self, start: &[f64], frozen_field: &[Vec<f64>], field: &mut [Vec<f64>]) -> bool {
        let steps = field[0].len() - 1;
        let m = self.live.len();
        let mut clamped = false;
        let mut y = start.to_vec();
        for (li, row) in field.iter_mut().enumerate() {
            row[0] = y[li];
        }
        let mut fz_left = vec![0.0; self.frozen.len()];
        let mut fz_mid = vec![0.0; self.frozen.len()];
        let mut fz_right = vec![0.0; self.frozen.len()];
        let mut drive_left = vec![0.0; m];
        let mut drive_mid = vec![0.0; m];
        let mut drive_right = vec![0.0; m];
        let mut k1 = vec![0.0; m];
        let mut k2 = vec![0.0; m];
        let mut k3 = vec![0.0; m];
        let mut k4 = vec![0.0; m];
        let mut tmp = vec![0.0; m];
        for step in 0..steps {
            for (fj, _) in self.frozen.iter().enumerate() {
                fz_left[fj] = frozen_field[fj][step];
                fz_mid[fj] = midpoint(&frozen_field[fj], step);
                fz_right[fj] = frozen_field[fj][step + 1];
            }
            self.frozen_drive(&fz_left, &mut drive_left);
            self.frozen_drive(&fz_mid, &mut drive_mid);
            self.frozen_drive(&fz_right, &mut drive_right);

            self.derivative(&y, &drive_left, &mut k1);
            for i in 0..m {
                tmp[i] = y[i] + 0.5 * self.h * k1[i];
            }
            self.derivative(&tmp, &drive_mid, &mut k2);
            for i in 0..m {
                tmp[i] = y[i] + 0.5 * self.h * k2[i];
            }
            self.derivative(&tmp, &drive_mid, &mut k3);
            for i in 0..m {
                tmp[i] = y[i] + self.h * k3[i];
            }
            self.derivative(&tmp, &drive_right, &mut k4);
            for i in 0..m {
                y[i] += self.h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                if y[i] < 0.0 {
                    y[i] = 0.0;
                    clamped = true;
                }
                field[i][step + 1] = y[i];
            }
        }
        clamped
    }
}

/// Solve one span for the given per-channel launch powers (W).
pub fn solve_span(
    span: &SpanSpec,
    channels: &[crate::link::Channel],
    launch: &[f64],
    opts: &SolverOptions,
) -> Result<PowerProfile, SolverError> {
    if launch.len() != channels.len() {
        return Err(SolverError::LaunchMismatch {
            got: launch.len(),
            expected: channels.len(),
        });
    }
    for (i, &p) in launch.iter().enumerate() {
        if p < 0.0 {
            return Err(SolverError::NegativeLaunch { wave: i, value: p });
        }
    }
    let system = SpanSystem::new(span, channels);
    let n_steps = {
        let raw = (span.length / opts.step).ceil() as usize;
        let raw = raw.max(2);
        raw + raw % 2
    };
    let h = span.length / n_steps as f64;
    let z_grid: Vec<f64> = (0..=n_steps).map(|k| k as f64 * h).collect();

    let fwd: Vec<usize> = (0..system.len())
        .filter(|&i| system.waves[i].direction == PumpDirection::Forward)
        .collect();
    let bwd: Vec<usize> = (0..system.len())
        .filter(|&i| system.waves[i].direction == PumpDirection::Backward)
        .collect();

    let start_power = |i: usize| -> f64 {
        match system.waves[i].kind {
            WaveKind::Channel(c) => launch[c],
            WaveKind::Pump(p) => span.pumps[p].injected_power,
        }
    };
    let fwd_start: Vec<f64> = fwd.iter().map(|&i| start_power(i)).collect();
    let bwd_start: Vec<f64> = bwd.iter().map(|&i| start_power(i)).collect();

    // Fields in live coordinates: forward rows indexed by z node, backward
    // rows indexed by s = L - z node.
    let mut fwd_field: Vec<Vec<f64>> = vec![vec![0.0; n_steps + 1]; fwd.len()];
    let mut bwd_field: Vec<Vec<f64>> = vec![vec![0.0; n_steps + 1]; bwd.len()];
    let mut warnings = Vec::new();
    let mut clamped_any = false;

    // Frozen views must be sampled in the live sweep's coordinate. The
    // forward sweep sees backward rows reversed and vice versa.
    let reversed = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| r.iter().rev().copied().collect())
            .collect()
    };

    let fwd_ctx = SweepContext {
        system: &system,
        live: &fwd,
        frozen: &bwd,
        h,
    };
    let bwd_ctx = SweepContext {
        system: &system,
        live: &bwd,
        frozen: &fwd,
        h,
    };

    // Initial forward pass without any pump field.
    clamped_any |= fwd_ctx.integrate(&fwd_start, &reversed(&bwd_field), &mut fwd_field);

    let mut iterations = 1usize;
    let mut residual = 0.0f64;
    if !bwd.is_empty() && bwd_start.iter().any(|&p| p > 0.0) {
        let scales: Vec<f64> = bwd_start.iter().map(|&p| p.max(1e-30)).collect();
        let mut converged = false;
        let mut bwd_old = bwd_field.clone();
        for it in 1..=opts.max_iterations {
            iterations = it;
            let mut bwd_new: Vec<Vec<f64>> = vec![vec![0.0; n_steps + 1]; bwd.len()];
            clamped_any |=
                bwd_ctx.integrate(&bwd_start, &reversed(&fwd_field), &mut bwd_new);
            // Damped update; boundary values are identical on both sides so
            // the injected power at z = L stays met exactly.
            residual = 0.0;
            for (bi, row) in bwd_new.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    let old = bwd_old[bi][k];
                    let damped = old + opts.damping * (v - old);
                    let delta = (damped - old).abs() / scales[bi];
                    if delta > residual {
                        residual = delta;
                    }
                    bwd_field[bi][k] = damped;
                }
                // The injected power is a hard boundary condition; keep it
                // exact rather than letting the damping track toward it.
                bwd_field[bi][0] = bwd_start[bi];
            }
            bwd_old = bwd_field.clone();
            clamped_any |=
                fwd_ctx.integrate(&fwd_start, &reversed(&bwd_field), &mut fwd_field);
            if residual <= opts.bvp_tolerance {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SolverError::BvpNonConvergence {
                iterations,
                residual,
                tolerance: opts.bvp_tolerance,
            });
        }
    }
    if clamped_any {
        warnings.push(
            "negative power clamped to zero during integration; consider a smaller step".into(),
        );
    }

    // Assemble z-indexed rows in wave order; backward rows were integrated
    // in s = L - z and get reversed here.
    let mut powers = vec![vec![0.0; n_steps + 1]; system.len()];
    for (li, &i) in fwd.iter().enumerate() {
        powers[i] = fwd_field[li].clone();
    }
    for (li, &i) in bwd.iter().enumerate() {
        powers[i] = bwd_field[li].iter().rev().copied().collect();
    }

    Ok(PowerProfile {
        z_grid,
        waves: system.waves.clone(),
        powers,
        iterations,
        residual,
        warnings,
    })
}

/// Per-span results of propagating the whole link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpanSolution {
    pub profile: PowerProfile,
    /// Channel powers entering the span fiber, W.
    pub launch_w: Vec<f64>,
    /// Channel powers at the fiber output (before the lumped amp), W.
    pub end_w: Vec<f64>,
    /// Net fiber power transfer per channel (includes ISRS and pumps).
    pub fiber_transfer: Vec<f64>,
    /// Lumped post-amplifier power gain per channel.
    pub post_gain: Vec<f64>,
}

/// Link-level propagation output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkSolution {
    pub spans: Vec<SpanSolution>,
    /// Power transfer of a channel from span-`n` fiber input to link end,
    /// `gamma_start[n][ch]`.
    pub gamma_start: Vec<Vec<f64>>,
    /// Power transfer from span-`n` fiber output to link end (includes the
    /// span's own lumped amp).
    pub gamma_end: Vec<Vec<f64>>,
}

/// Solve all spans in order, applying each span's lumped gain to obtain the
/// next launch, and accumulate the per-channel transfer factors.
pub fn propagate_link(link: &LinkSpec) -> Result<LinkSolution, SolverError> {
    let n_ch = link.channels.len();
    let mut launch: Vec<f64> = link.channels.iter().map(|c| c.launch_power).collect();
    let mut spans = Vec::with_capacity(link.spans.len());
    for span in &link.spans {
        let profile = solve_span(span, &link.channels, &launch, &link.solver)?;
        let system = SpanSystem::new(span, &link.channels);
        let end_w: Vec<f64> = (0..n_ch)
            .map(|c| *profile.channel_power(c).last().unwrap())
            .collect();
        let fiber_transfer: Vec<f64> = (0..n_ch)
            .map(|c| {
                if launch[c] > 0.0 {
                    end_w[c] / launch[c]
                } else {
                    // Zero-power channel: the medium transfer still exists;
                    // integrate the local net gain coefficient instead.
                    rate_integral_transfer(&system, &profile, c)
                }
            })
            .collect();
        let post_gain: Vec<f64> = (0..n_ch)
            .map(|c| match &span.post_gain {
                PostGain::Transparent => 1.0 / fiber_transfer[c],
                PostGain::Explicit(table) => table.eval(link.channels[c].center_frequency),
            })
            .collect();
        let next_launch: Vec<f64> = (0..n_ch).map(|c| end_w[c] * post_gain[c]).collect();
        spans.push(SpanSolution {
            profile,
            launch_w: launch.clone(),
            end_w,
            fiber_transfer,
            post_gain,
        });
        launch = next_launch;
    }

    let n_s = spans.len();
    let mut gamma_start = vec![vec![1.0; n_ch]; n_s];
    let mut gamma_end = vec![vec![1.0; n_ch]; n_s];
    for c in 0..n_ch {
        let mut after = 1.0; // transfer from the end of span n (after amp) to link end
        for n in (0..n_s).rev() {
            gamma_end[n][c] = spans[n].post_gain[c] * after;
            gamma_start[n][c] = spans[n].fiber_transfer[c] * gamma_end[n][c];
            after = gamma_start[n][c];
        }
    }
    Ok(LinkSolution {
        spans,
        gamma_start,
        gamma_end,
    })
}

/// `exp(∫ g_c(z) dz)` over the span from the sampled field, used where the
/// power-ratio definition degenerates (zero-power channels).
fn rate_integral_transfer(system: &SpanSystem, profile: &PowerProfile, channel: usize) -> f64 {
    let wave = system
        .waves
        .iter()
        .position(|w| w.kind == WaveKind::Channel(channel))
        .unwrap();
    let n = profile.z_grid.len() - 1;
    let h = profile.z_grid[1] - profile.z_grid[0];
    let mut state = vec![0.0; system.len()];
    let g_at = |k: usize, state: &mut Vec<f64>| -> f64 {
        for (i, row) in profile.powers.iter().enumerate() {
            state[i] = row[k];
        }
        system.gain_coefficient(wave, state)
    };
    // Composite Simpson over the (even) grid.
    let mut acc = g_at(0, &mut state) + g_at(n, &mut state);
    for k in 1..n {
        acc += g_at(k, &mut state) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    (acc * h / 3.0).exp()
}
