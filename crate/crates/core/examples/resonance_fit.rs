//! Lorentzian fit of a transmission dip and the (Qi, Qe) split under each
//! coupling assumption. Reads `frequency_hz,transmission` CSV when a path is
//! given, otherwise fits a synthetic 193 MHz dip.
//!
//! ```bash
//! cargo run --example resonance_fit [scan.csv]
//! ```

use ringsource::resonator::*;

fn main() -> ringsource::Result<()> {
    let scan = match std::env::args().nth(1) {
        Some(path) => ResonanceScan::read_csv(std::fs::File::open(path)?)?,
        None => ResonanceScan::lorentzian(194.67e12, 193e6, 0.184, 4e9, 801)?,
    };
    for regime in [CouplingRegime::Over, CouplingRegime::Under] {
        let fit = fit_resonance(&scan, regime)?;
        println!(
            "{regime:?}: f0 {:.4} THz, FWHM {:.1} MHz, Q {:.3e}, ER {:.2} dB -> Qi {:.3e}, Qe {:.3e}",
            fit.center_frequency / 1e12,
            fit.fwhm / 1e6,
            fit.q_loaded,
            fit.extinction_ratio,
            fit.q_split.q_intrinsic(),
            fit.q_split.q_external()
        );
    }
    Ok(())
}
