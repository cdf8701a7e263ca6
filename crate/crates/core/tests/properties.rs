//! Property tests for the structural invariants.

use proptest::prelude::*;

use raman_nli::fitter::{fit_segment, model_power, SegmentFit};
use raman_nli::link::{
    Channel, EngineOptions, FiberSpec, FitterOptions, FrequencyTable, LinkSpec, OracleOptions,
    PostGain, Pump, PumpDirection, RamanGainTable, SolverOptions, SpanSpec,
};

fn any_link(freqs: Vec<f64>, pump_freqs: Vec<f64>) -> LinkSpec {
    LinkSpec {
        spans: vec![SpanSpec {
            length: 80_000.0,
            fiber: FiberSpec {
                intrinsic_field_loss: FrequencyTable::constant(2.3e-5),
                beta2: -2.17e-26,
                beta3: 0.0,
                beta4: 0.0,
                f_ref: 193.4e12,
                n2: 2.6e-20,
                effective_area: FrequencyTable::constant(80e-12),
                raman_gain: RamanGainTable::synthetic_demo(),
            },
            pumps: pump_freqs
                .into_iter()
                .map(|f| Pump {
                    center_frequency: f,
                    injected_power: 0.1,
                    direction: PumpDirection::Backward,
                })
                .collect(),
            post_gain: PostGain::Transparent,
        }],
        channels: freqs
            .into_iter()
            .map(|f| Channel {
                center_frequency: f,
                symbol_rate: 10e9,
                launch_power: 1e-3,
                rolloff: 0.0,
            })
            .collect(),
        solver: SolverOptions::default(),
        fitter: FitterOptions::default(),
        engine: EngineOptions::default(),
        oracle: OracleOptions::default(),
        warnings: vec![],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Raman gain evaluation is odd in Δf and zero at the origin.
    #[test]
    fn raman_gain_is_odd(
        samples in proptest::collection::vec((1.0f64..30.0, 0.0f64..1e-3), 1..8),
        probe in -35.0f64..35.0
    ) {
        let table = RamanGainTable::new(
            samples.into_iter().map(|(thz, cr)| (thz * 1e12, cr)).collect(),
        ).unwrap();
        let df = probe * 1e12;
        prop_assert_eq!(table.eval(0.0), 0.0);
        prop_assert_eq!(table.eval(df), -table.eval(-df));
    }

    /// grid_order returns a permutation listing strictly ascending
    /// frequencies.
    #[test]
    fn grid_order_is_ascending_permutation(
        offsets in proptest::collection::vec(0u32..4000, 2..20)
    ) {
        // Distinct channel frequencies 50 GHz apart at minimum.
        let mut set: Vec<u32> = offsets;
        set.sort_unstable();
        set.dedup();
        prop_assume!(set.len() >= 2);
        let freqs: Vec<f64> = set.iter().map(|&k| 186.0e12 + k as f64 * 50e9).collect();
        let n_ch = freqs.len() / 2;
        let (chans, pumps) = freqs.split_at(n_ch.max(1));
        let link = any_link(chans.to_vec(), pumps.to_vec()).normalize().unwrap();
        let order = link.grid_order(0).unwrap();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..order.len()).collect::<Vec<_>>());
        let freq_of = |i: usize| -> f64 {
            if i < link.channels.len() {
                link.channels[i].center_frequency
            } else {
                link.spans[0].pumps[i - link.channels.len()].center_frequency
            }
        };
        for w in order.windows(2) {
            prop_assert!(freq_of(w[0]) < freq_of(w[1]));
        }
    }

    /// The loss model reproduces its z=0 power exactly and decays when all
    /// coefficients are lossy.
    #[test]
    fn model_power_anchors_at_start(
        alpha0 in 1e-6f64..1e-4,
        alpha1 in -5e-5f64..5e-5,
        sigma in 1e-6f64..1e-3,
        p0 in 1e-6f64..1.0
    ) {
        let fit = SegmentFit {
            alpha0,
            alpha1,
            sigma,
            segment_length: 50_000.0,
            p_start: p0,
            weighted_mse: 0.0,
            sigma_at_bound: false,
            sigma_unconstrained: false,
            constraint_clamped: false,
        };
        prop_assert_eq!(model_power(&fit, 0.0), p0);
        if alpha1 >= 0.0 {
            prop_assert!(model_power(&fit, 10_000.0) <= p0);
        }
    }

    /// Fitting samples generated by the model recovers the parameters.
    #[test]
    fn synthetic_round_trip(
        alpha0 in 5e-6f64..8e-5,
        ratio in 0.05f64..4.0,
        sigma in 5e-5f64..8e-4,
    ) {
        let alpha1 = ratio * sigma / 2.0;
        let n = 400;
        let length = 60_000.0;
        let samples: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let z = length * k as f64 / n as f64;
                let p = 1e-3
                    * (-2.0 * alpha0 * z + 2.0 * alpha1 * (-sigma * z).exp_m1() / sigma).exp();
                (z, p)
            })
            .collect();
        let fit = fit_segment(&samples, &FitterOptions::default(), None).unwrap();
        prop_assert!((fit.alpha0 - alpha0).abs() / alpha0 < 0.01);
        prop_assert!((fit.alpha1 - alpha1).abs() / alpha1 < 0.01);
        prop_assert!((fit.sigma - sigma).abs() / sigma < 0.01);
    }

    /// Normalization is idempotent for shuffled channel orders.
    #[test]
    fn normalize_is_idempotent(perm_seed in 0u64..1000) {
        let mut freqs: Vec<f64> = (0..6).map(|k| 190.0e12 + k as f64 * 200e9).collect();
        // cheap deterministic shuffle
        let n = freqs.len();
        for i in 0..n {
            let j = ((perm_seed as usize).wrapping_mul(31).wrapping_add(i * 17)) % n;
            freqs.swap(i, j);
        }
        let once = any_link(freqs, vec![]).normalize().unwrap();
        let twice = once.clone().normalize().unwrap();
        prop_assert_eq!(
            serde_json::to_string(&once).unwrap(),
            serde_json::to_string(&twice).unwrap()
        );
    }
}
