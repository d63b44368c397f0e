use proptest::prelude::*;
use ringsource::analysis::{car, car_with, coincidence_histogram, heralded_g2, unheralded_g2};
use ringsource::tag_sim::*;

fn source(tau_c: f64, k: u32) -> SourceModel {
    SourceModel {
        pair_rate_quadratic_coeff: 1.0e5,
        noise_rate_linear_coeff_signal: 0.0,
        noise_rate_linear_coeff_idler: 0.0,
        correlation_fwhm: tau_c,
        thermal_mode_count: k,
    }
}

#[test]
fn coincidence_peak_width_tracks_tau_c() {
    let det = DetectorModel::ideal();
    for tau_c in [1.64e-9, 2.64e-9, 3.82e-9, 5.40e-9] {
        let src = source(tau_c, 1);
        let out = simulate_pair_source(&src, &det, &det, 1.0, 2.0, 17).unwrap();
        let hist = coincidence_histogram(&out.stream, SIGNAL_CHANNEL, IDLER_CHANNEL, 50e-12, 400e-9).unwrap();
        let r = car(&hist, 50e-12).unwrap();
        let fwhm = hist.peak_fwhm(r.accidentals).unwrap();
        assert!((fwhm / tau_c - 1.0).abs() < 0.1, "tau_c {tau_c:e}: fwhm {fwhm:e}");
    }
}

#[test]
fn darks_only_give_flat_histogram() {
    let src = SourceModel {
        pair_rate_quadratic_coeff: 0.0,
        ..source(1.64e-9, 1)
    };
    let det = DetectorModel {
        dark_rate: 2.0e5,
        ..DetectorModel::ideal()
    };
    let out = simulate_pair_source(&src, &det, &det, 1.0, 1.0, 3).unwrap();
    let hist = coincidence_histogram(&out.stream, SIGNAL_CHANNEL, IDLER_CHANNEL, 1e-9, 200e-9).unwrap();
    let r = car_with(&hist, 2e-9, 0.0, &[]).unwrap();
    assert!((r.car - 1.0).abs() < 3.0 * r.car_sigma, "{} ± {}", r.car, r.car_sigma);
    // each bin ≈ r_a·r_b·Δ·T
    let expected = 2.0e5 * 2.0e5 * 1e-9 * 1.0;
    let mean = hist.total() as f64 / hist.len() as f64;
    assert!((mean - expected).abs() < 4.0 * (expected / hist.len() as f64).sqrt(), "{mean} vs {expected}");
}

#[test]
fn rate_composition_matches_efficiency_product() {
    let src = source(1.64e-9, 1);
    for (es, ei) in [(0.2, 0.25), (0.9, 0.5), (0.05, 1.0)] {
        let out = simulate_pair_source(
            &src,
            &DetectorModel::with_efficiency(es),
            &DetectorModel::with_efficiency(ei),
            2.0,
            0.5,
            8,
        )
        .unwrap();
        let pairs = out.truth.pairs as f64;
        let detected = out.truth.detected_pairs as f64;
        let p = es * ei;
        let sigma = (pairs * p * (1.0 - p)).sqrt();
        assert!((detected - p * pairs).abs() < 4.0 * sigma, "{detected} vs {}", p * pairs);
    }
}

#[test]
fn car_falls_with_pump_power() {
    let src = SourceModel {
        noise_rate_linear_coeff_signal: 2.0e4,
        noise_rate_linear_coeff_idler: 2.0e4,
        ..source(1.64e-9, 1)
    };
    let det = DetectorModel {
        efficiency: 0.2,
        dark_rate: 100.0,
        jitter_sigma: 30e-12,
        dead_time: 0.0,
    };
    let mut last = f64::INFINITY;
    for p in [1.0, 3.0, 9.0] {
        let out = simulate_pair_source(&src, &det, &det, p, 1.0, 5).unwrap();
        let hist = coincidence_histogram(&out.stream, SIGNAL_CHANNEL, IDLER_CHANNEL, 100e-12, 400e-9).unwrap();
        let r = car(&hist, 1.6e-9).unwrap();
        assert!(r.car < last, "CAR {} at {p} mW did not fall below {last}", r.car);
        last = r.car;
    }
}

#[test]
fn thermal_statistics_set_g2_zero() {
    // K = 1 and K = 15 with one pair per slot on average, bins of w/20
    for (k, target, tol) in [(1u32, 2.0, 0.05), (15, 1.067, 0.02)] {
        let src = source(1.0e-9, k).with_mean_pairs_per_slot(1.0, 1.0);
        let det = DetectorModel::ideal();
        let duration = 0.015;
        let out = simulate_hbt(&src, &det, &det, &det, 0.5, 1.0, duration, 21).unwrap();
        assert!(out.truth.slots >= 10_000_000);
        let w = src.slot_width() / 20.0;
        let g = unheralded_g2(&out.stream, HBT_S1_CHANNEL, HBT_S2_CHANNEL, w, &[0.0, 50e-9]).unwrap();
        assert!((g[0].g2 - target).abs() < tol, "K={k}: g2(0)={}", g[0].g2);
        assert!((g[1].g2 - 1.0).abs() < 0.05, "K={k}: g2(50ns)={}", g[1].g2);
    }
}

#[test]
fn heralded_g2_antibunches_at_low_mu() {
    let det = DetectorModel::ideal();
    let src = source(1.64e-9, 1).with_mean_pairs_per_slot(0.01, 1.0);
    let out = simulate_hbt(&src, &det, &det, &det, 0.5, 1.0, 1.0, 2).unwrap();
    // window equal to the coincidence FWHM
    let window = src.correlation_fwhm;
    let g = heralded_g2(&out.stream, HERALD_CHANNEL, HBT_S1_CHANNEL, HBT_S2_CHANNEL, window, &[0.0, 200e-9]).unwrap();
    let zero = g.points[0].g2.unwrap();
    let far = g.points[1].g2.unwrap();
    assert!(zero < 0.05, "g2h(0) = {zero}");
    assert!(g.points[0].n123 >= 10_000);
    assert!((far - 1.0).abs() < 0.1, "g2h(far) = {far}");
}

#[test]
fn franson_destructive_interference() {
    let src = source(1.64e-9, 1);
    let cfg = FransonConfig {
        phase_alpha: std::f64::consts::PI,
        ..FransonConfig::default()
    };
    let det = DetectorModel::ideal();
    // low pump keeps accidentals out of the central window
    let out = simulate_franson(&src, &cfg, &det, &det, 0.5, 2.0, 4).unwrap();
    let hist = coincidence_histogram(&out.stream, SIGNAL_CHANNEL, IDLER_CHANNEL, 100e-12, 100e-9).unwrap();
    let window = 4.0 * src.correlation_fwhm;
    let central = car_with(&hist, window, 0.0, &[-10e-9, 10e-9]).unwrap();
    let side = car_with(&hist, window, 10e-9, &[-10e-9, 0.0]).unwrap();
    let pairs = out.truth.pairs as f64;
    // both "+" outputs: each side peak carries 1/16 of the pairs
    let side_expected = pairs / 16.0 * (1.0 - 0.5f64.powf(4.0));
    assert!(central.coincidences < 0.01 * side.coincidences, "{} vs {}", central.coincidences, side.coincidences);
    assert!((side.coincidences / side_expected - 1.0).abs() < 0.05, "{} vs {side_expected}", side.coincidences);
    // singles are half of the arriving photons
    let s = out.stream.count(SIGNAL_CHANNEL) as f64;
    assert!((s / pairs - 0.5).abs() < 0.01);
}

#[test]
fn folded_interferometer_doubles_fringe_frequency() {
    use std::f64::consts::{FRAC_PI_2, PI};
    let src = source(1.64e-9, 1);
    let det = DetectorModel::ideal();
    let central = |alpha: f64, folded: bool| {
        let cfg = FransonConfig {
            phase_alpha: alpha,
            folded,
            ..FransonConfig::default()
        };
        let out = simulate_franson(&src, &cfg, &det, &det, 1.0, 0.2, 9).unwrap();
        let hist = coincidence_histogram(&out.stream, SIGNAL_CHANNEL, IDLER_CHANNEL, 100e-12, 100e-9).unwrap();
        car_with(&hist, 6.6e-9, 0.0, &[-10e-9, 10e-9]).unwrap().coincidences
    };
    let top = central(0.0, true);
    // folded: cos 2α, so α = π/2 is already dark and α = π bright again
    assert!(central(FRAC_PI_2, true) < 0.02 * top);
    assert!((central(PI, true) / top - 1.0).abs() < 0.05);
    // unfolded with β = 0: α = π/2 sits halfway, α = π is dark
    let half = central(FRAC_PI_2, false) / top;
    assert!((half - 0.5).abs() < 0.05, "{half}");
    assert!(central(PI, false) < 0.02 * top);
}

#[test]
fn dead_time_caps_detected_rate() {
    let src = source(1.64e-9, 1);
    let det = DetectorModel {
        dead_time: 1e-6,
        ..DetectorModel::ideal()
    };
    let out = simulate_pair_source(&src, &det, &det, 5.0, 0.05, 1).unwrap();
    let ts = out.stream.channel(SIGNAL_CHANNEL);
    assert!(ts.windows(2).all(|w| w[1] - w[0] >= 1_000_000));
    assert!(out.truth.dead_time_dropped > 0);
}

fn arb_detector() -> impl Strategy<Value = DetectorModel> {
    (0.0f64..=1.0, 0.0f64..5e4, 0.0f64..200e-12, 0.0f64..100e-9).prop_map(|(e, d, j, t)| DetectorModel {
        efficiency: e,
        dark_rate: d,
        jitter_sigma: j,
        dead_time: t,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_streams_respect_invariants(
        a in 0.0f64..4e4,
        b in 0.0f64..2e4,
        tau in 0.2e-9f64..6e-9,
        k in 1u32..20,
        ds in arb_detector(),
        di in arb_detector(),
        p in 0.0f64..5.0,
        dur in 1e-4f64..2e-2,
        seed in any::<u64>(),
        kind in 0usize..3,
    ) {
        let src = SourceModel {
            pair_rate_quadratic_coeff: a * 100.0,
            noise_rate_linear_coeff_signal: b,
            noise_rate_linear_coeff_idler: b / 2.0,
            correlation_fwhm: tau,
            thermal_mode_count: k,
        };
        let run = || match kind {
            0 => simulate_pair_source(&src, &ds, &di, p, dur, seed),
            1 => simulate_hbt(&src, &di, &ds, &ds, 0.3, p, dur, seed),
            _ => simulate_franson(&src, &FransonConfig::default(), &ds, &di, p, dur, seed),
        };
        let out = run().unwrap();
        let stream = &out.stream;
        prop_assert!(stream.records().iter().all(|r| r.timestamp_ps <= stream.duration_ps()));
        for ch in stream.channel_ids() {
            let ts = stream.channel(ch);
            prop_assert!(ts.windows(2).all(|w| w[0] <= w[1]));
        }
        let again = run().unwrap();
        prop_assert_eq!(&again.stream, stream);
        let mut buf = Vec::new();
        stream.write_binary(&mut buf).unwrap();
        prop_assert_eq!(&TimeTagStream::read_binary(buf.as_slice()).unwrap(), stream);
    }

    #[test]
    fn segment_length_does_not_change_pair_totals_in_expectation(seed in any::<u64>()) {
        // different segmentations draw from different streams but every run covers the same slots
        let src = source(1.64e-9, 1);
        let det = DetectorModel::ideal();
        let a = simulate_pair_source_with(&src, &det, &det, 1.0, 0.02, seed, RunControls { segment_duration: 1e-3, ..RunControls::default() }).unwrap();
        let b = simulate_pair_source_with(&src, &det, &det, 1.0, 0.02, seed, RunControls { segment_duration: 5e-3, ..RunControls::default() }).unwrap();
        prop_assert_eq!(a.truth.slots, b.truth.slots);
        let (na, nb) = (a.truth.pairs as f64, b.truth.pairs as f64);
        prop_assert!((na - nb).abs() < 6.0 * (na + nb).sqrt());
    }
}
