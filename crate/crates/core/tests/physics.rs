use std::f64::consts::PI;

use proptest::prelude::*;
use ringsource::comb_grid::*;
use ringsource::resonator::*;
use ringsource::sfwm::*;

fn mode() -> ModeProperties {
    ModeProperties::from_group_velocity(1.85, 1.42e8, 1.16e-12, 0.88, -8.48e-26, 1540.5e-9).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn loaded_q_is_below_both(qi in 1e3f64..1e8, qe in 1e3f64..1e8) {
        let q = loaded_q(qi, qe).unwrap();
        prop_assert!(q <= qi.min(qe) * (1.0 + 1e-12));
        prop_assert!(q >= qi.min(qe) / 2.0 * (1.0 - 1e-12));
    }

    #[test]
    fn loaded_q_and_tmin_recover_the_split(qi in 1e4f64..1e7, ratio in 0.05f64..20.0) {
        prop_assume!((ratio - 1.0).abs() > 2e-3);
        let q = QualityFactors::new(qi, qi * ratio).unwrap();
        let (t_min, er) = transmission_extremum(&q);
        prop_assert!((0.0..1.0).contains(&t_min) && er > 0.0);
        let back = QualityFactors::from_loaded_and_tmin(q.q_loaded(), t_min, q.regime()).unwrap();
        prop_assert!(rel(back.q_intrinsic(), qi) < 1e-9);
        prop_assert!(rel(back.q_external(), qi * ratio) < 1e-9);
    }

    #[test]
    fn tmin_is_symmetric_under_swap(qi in 1e4f64..1e7, qe in 1e4f64..1e7) {
        let a = transmission_extremum(&QualityFactors::new(qi, qe).unwrap()).0;
        let b = transmission_extremum(&QualityFactors::new(qe, qi).unwrap()).0;
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn physical_and_q_round_trip(alpha in 1.0f64..200.0, kappa_sq in 1e-4f64..0.5, radius in 20e-6f64..300e-6) {
        let g = RingGeometry::from_radius(radius).unwrap();
        let m = mode();
        let w0 = m.omega0();
        let q = physical_to_q(alpha, kappa_sq, &g, &m, w0).unwrap();
        let (a2, k2) = q_to_physical(&q, &g, &m, w0);
        prop_assert!(rel(a2, alpha) < 1e-12 && rel(k2, kappa_sq) < 1e-12);
    }

    #[test]
    fn radius_and_fsr_round_trip(fsr in 50e9f64..1e12, ng in 1.2f64..4.5) {
        let r = radius_from_fsr(fsr, ng).unwrap();
        prop_assert!(rel(fsr_from_radius(r, ng).unwrap(), fsr) < 1e-12);
    }

    #[test]
    fn generation_rate_scales_with_power_squared_and_peaks_on_phase_match(
        p in 1e-4f64..1e-1, qi in 1e5f64..5e6, ratio in 0.1f64..10.0, dk in 1.0f64..1e4,
    ) {
        let g = RingGeometry::from_radius(113e-6).unwrap();
        let m = mode();
        let q = QualityFactors::new(qi, qi * ratio).unwrap();
        let rate = |p: f64, dk: f64| pair_generation_rate(&m, &g, &q, &PumpConfig::on_resonance(p, 1540.5e-9).unwrap(), dk).unwrap();
        prop_assert!(rel(rate(2.0 * p, 0.0), 4.0 * rate(p, 0.0)) < 1e-12);
        prop_assert!(rate(p, dk) <= rate(p, 0.0));
        prop_assert!(rel(rate(p, dk), rate(p, -dk)) < 1e-12);
    }

    #[test]
    fn emitted_rate_is_generation_times_escape(qi in 1e5f64..5e6, ratio in 0.1f64..10.0) {
        let g = RingGeometry::from_radius(113e-6).unwrap();
        let q = QualityFactors::new(qi, qi * ratio).unwrap();
        let r = emitted_pair_rate(&mode(), &g, &q, &PumpConfig::on_resonance(1e-3, 1540.5e-9).unwrap(), 0.0).unwrap();
        prop_assert_eq!(r.emitted_rate, r.generation_rate * r.emission_probability);
        prop_assert!(r.emission_probability > 0.0 && r.emission_probability < 1.0);
    }

    #[test]
    fn series_partial_sums_rise_to_closed_form(kappa_sq in 1e-3f64..1.0, a2 in 0.5f64..0.9999, n in 1usize..200) {
        let closed = emission_probability_series(kappa_sq, a2, None).unwrap();
        let s_n = emission_probability_series(kappa_sq, a2, Some(n)).unwrap();
        let s_n1 = emission_probability_series(kappa_sq, a2, Some(n + 1)).unwrap();
        prop_assert!(s_n <= s_n1 && s_n1 <= closed * (1.0 + 1e-12));
        prop_assert!(closed > 0.0 && closed <= 1.0 + 1e-12);
    }

    #[test]
    fn optimum_ratios_hold_for_any_intrinsic_q(qi in 1e3f64..1e9) {
        let gen = optimize_external_q(qi, CouplingObjective::MaxGeneration).unwrap();
        let emit = optimize_external_q(qi, CouplingObjective::MaxEmitted).unwrap();
        prop_assert!((gen / qi - 0.75).abs() < 1e-6, "{}", gen / qi);
        prop_assert!((emit / qi - 0.6).abs() < 1e-6, "{}", emit / qi);
    }

    #[test]
    fn lorentzian_fit_recovers_loaded_q(
        q_l in 1e5f64..2e6, t_min in 0.02f64..0.8, offset in -0.3f64..0.3, over in any::<bool>(),
    ) {
        let f0 = 194.6e12;
        let fwhm = f0 / q_l;
        let scan = ResonanceScan::lorentzian(f0 + offset * fwhm, fwhm, t_min, 20.0 * fwhm, 2001).unwrap();
        let regime = if over { CouplingRegime::Over } else { CouplingRegime::Under };
        let fit = fit_resonance(&scan, regime).unwrap();
        prop_assert!(rel(fit.q_loaded, q_l) < 1e-4, "{} vs {q_l}", fit.q_loaded);
        prop_assert!((fit.t_min - t_min).abs() < 1e-5);
        prop_assert_eq!(fit.q_split.regime(), regime);
        prop_assert!(rel(fit.q_split.q_loaded(), fit.q_loaded) < 1e-9);
    }

    #[test]
    fn dispersion_fit_is_exact_on_a_quadratic_comb(
        d1 in 2.0f64 * PI * 50e9..2.0 * PI * 500e9, d2 in -2.0f64 * PI * 5e6..2.0 * PI * 5e6, n in 7usize..40, pump in 0usize..7,
    ) {
        let w0 = 2.0 * PI * 194.6e12;
        let freqs: Vec<f64> = (0..n).map(|i| {
            let mu = i as f64 - pump as f64;
            w0 + d1 * mu + d2 / 2.0 * mu * mu
        }).collect();
        let fit = fit_integrated_dispersion(&freqs, pump).unwrap();
        prop_assert!(rel(fit.d1, d1) < 1e-9);
        prop_assert!((fit.d2 - d2).abs() < 1e-6 * d1 / 1e3);
        prop_assert!(fit.d_int.iter().zip(&freqs).all(|(d, _)| d.is_finite()));
    }

    #[test]
    fn channel_wavelength_round_trip(index in 1i32..=72) {
        let grid = ItuGrid::default();
        let (ch, off) = grid.wavelength_to_channel(grid.channel_to_wavelength(index).unwrap()).unwrap();
        prop_assert_eq!(ch.index, index);
        prop_assert!(off.abs() < 1.0);
    }

    #[test]
    fn pair_channels_conserve_energy(pump in 20i32..=52, order in 1i32..10, step in 1i32..3) {
        let grid = ItuGrid::default();
        let Ok((s, i)) = grid.pair_channels(pump, order, step) else { return Ok(()); };
        let fp = grid.channel(pump).unwrap().center_frequency;
        prop_assert!((s.center_frequency + i.center_frequency - 2.0 * fp).abs() < 1e-3);
        prop_assert!(s.center_wavelength > i.center_wavelength);
    }

    #[test]
    fn jsi_is_zero_off_the_matched_diagonal(pump in 30i32..=42, orders in 2usize..8) {
        let grid = ItuGrid::default();
        let lines: Vec<_> = (1..=orders as i32)
            .filter_map(|k| grid.pair_channels(pump, k, 2).ok().map(|(s, i)| {
                (channel_line(s, -(k as i64)), channel_line(i, k as i64))
            }))
            .collect();
        let fp = grid.channel(pump).unwrap().center_frequency;
        let jsi = predicted_jsi(&lines, fp, 1e6, None).unwrap();
        for (r, row) in jsi.weights.iter().enumerate() {
            for (c, w) in row.iter().enumerate() {
                prop_assert_eq!(*w, if r == c { 1.0 } else { 0.0 });
            }
        }
    }
}

#[test]
fn comb_lines_land_on_grid_for_a_matched_ring() {
    // a 200 GHz ring pumped at C46 steps two ITU channels per mode
    let grid = ItuGrid::default();
    let fp = grid.channel(46).unwrap().center_frequency;
    let lines = synthesize_comb(2.0 * PI * fp, 2.0 * PI * 200e9, 0.0, 10, &grid).unwrap();
    for l in &lines {
        let ch = l.itu_channel.expect("on grid");
        assert_eq!(ch.index as i64, 46 + 2 * l.mode_index);
    }
}

#[test]
fn q_grid_rows_are_qi_major() {
    let g = RingGeometry::from_radius(113e-6).unwrap();
    let pump = PumpConfig::on_resonance(1e-3, 1540.5e-9).unwrap();
    let qi = log_space(1e5, 1e6, 5);
    let qe = log_space(1e5, 1e6, 7);
    let pts = sweep_q_grid(&mode(), &g, &pump, &qi, &qe).unwrap();
    assert_eq!(pts.len(), 35);
    for (k, p) in pts.iter().enumerate() {
        assert_eq!((p.q_i, p.q_e), (qi[k / 7], qe[k % 7]));
    }
}

fn series_vs_high_q(qi: f64, qe: f64) -> (f64, f64) {
    let g = RingGeometry::from_radius(113e-6).unwrap();
    let m = mode();
    let q = QualityFactors::new(qi, qe).unwrap();
    let (alpha, k2) = q_to_physical(&q, &g, &m, m.omega0());
    let loss = alpha * g.roundtrip_length();
    let s = emission_probability_series(k2, (-loss).exp(), None).unwrap();
    (rel(s, emission_probability(&q)), k2.min(loss) + loss / 2.0)
}

proptest! {
    #[test]
    fn high_q_limit_matches_series(qi in 1e7f64..1e9, qe in 1e7f64..1e9) {
        prop_assert!(series_vs_high_q(qi, qe).0 < 1e-3);
    }

    #[test]
    fn high_q_deviation_is_first_order_in_round_trip_loss(qi in 1e4f64..1e9, qe in 1e4f64..1e9) {
        // κ²·αL/(κ² + αL) from the cross term, plus the αL²/2 curvature of exp
        let (dev, bound) = series_vs_high_q(qi, qe);
        prop_assert!(dev <= 1.05 * bound, "{dev} > {bound}");
    }
}
