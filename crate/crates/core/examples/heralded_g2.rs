//! Heralded Hanbury Brown-Twiss measurement: g2h(tau) at low and high pair
//! number per coherence time.
//!
//! ```bash
//! cargo run --release --example heralded_g2
//! ```

use ringsource::analysis::heralded_g2;
use ringsource::tag_sim::*;

fn main() -> ringsource::Result<()> {
    let det = DetectorModel::ideal();
    let taus: Vec<f64> = (-4..=4).map(|k| k as f64 * 5e-9).collect();
    for (mu, duration) in [(0.01, 1.0), (0.1, 0.2)] {
        let source = SourceModel {
            pair_rate_quadratic_coeff: 1.0,
            noise_rate_linear_coeff_signal: 0.0,
            noise_rate_linear_coeff_idler: 0.0,
            correlation_fwhm: 1.64e-9,
            thermal_mode_count: 1,
        }
        .with_mean_pairs_per_slot(mu, 1.0);
        let out = simulate_hbt(&source, &det, &det, &det, 0.5, 1.0, duration, 3)?;
        let g = heralded_g2(&out.stream, HERALD_CHANNEL, HBT_S1_CHANNEL, HBT_S2_CHANNEL, source.correlation_fwhm, &taus)?;
        println!("mu = {mu}: heralds {:.0}/s, N12 {}", out.stream.rate(HERALD_CHANNEL), g.n12);
        for p in &g.points {
            match (p.g2, p.sigma) {
                (Some(v), Some(s)) => println!("  tau {:>5.1} ns: g2h = {v:.4} ± {s:.4} ({} threefolds)", p.tau * 1e9, p.n123),
                _ => println!("  tau {:>5.1} ns: undefined", p.tau * 1e9),
            }
        }
    }
    Ok(())
}
