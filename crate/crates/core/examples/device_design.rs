//! Ring geometry, Q algebra, extinction ratio and pair rates for a set of
//! fabricated gaps.
//!
//! ```bash
//! cargo run --example device_design
//! ```

use ringsource::resonator::*;
use ringsource::sfwm::{emitted_pair_rate, PumpConfig};

fn main() -> ringsource::Result<()> {
    let mode = ModeProperties::from_group_velocity(1.85, 1.42e8, 1.16e-12, 0.88, -8.48e-26, 1540.5e-9)?;
    let geometry = RingGeometry::from_fsr(200e9, mode.n_g)?;
    println!("radius {:.1} um, L = {:.3} mm", geometry.radius() * 1e6, geometry.roundtrip_length() * 1e3);

    let omega0 = mode.omega0();
    let pump = PumpConfig::on_resonance(1e-3, mode.ref_wavelength)?;
    println!("{:>6} {:>9} {:>8} {:>7} {:>9} {:>9} {:>10}", "gap", "Q_loaded", "regime", "ER dB", "alpha/m", "kappa^2", "N_cc /s");
    for (gap, qi, qe) in [("0.35", 3.5e6, 1.4e6), ("0.40", 4.1e6, 2.6e6), ("0.45", 4.6e6, 4.1e6), ("0.50", 5.3e6, 7.8e6)] {
        let q = QualityFactors::new(qi, qe)?;
        let (_, er) = transmission_extremum(&q);
        let (alpha, kappa_sq) = q_to_physical(&q, &geometry, &mode, omega0);
        let rate = emitted_pair_rate(&mode, &geometry, &q, &pump, 0.0)?;
        println!(
            "{gap:>6} {:>9.3e} {:>8} {er:>7.2} {alpha:>9.3} {kappa_sq:>9.2e} {:>10.3e}",
            q.q_loaded(),
            format!("{:?}", q.regime()).to_lowercase(),
            rate.emitted_rate
        );
    }

    // inverse direction: measured loss and coupling back to Q
    let q = physical_to_q(2.46, 4.4e-3, &geometry, &mode, omega0)?;
    println!("alpha 2.46 /m, kappa^2 4.4e-3 -> Qi {:.3e}, Qe {:.3e}", q.q_intrinsic(), q.q_external());
    Ok(())
}
