//! Optimal external Q at fixed intrinsic Q for the generated and the emitted
//! pair rate, and a coarse (Qi, Qe) map of the emitted rate.
//!
//! ```bash
//! cargo run --example coupling_optimization
//! ```

use ringsource::resonator::{ModeProperties, RingGeometry};
use ringsource::sfwm::*;

fn main() -> ringsource::Result<()> {
    for objective in [CouplingObjective::MaxGeneration, CouplingObjective::MaxEmitted] {
        let s = optimizer_summary(3.5e6, objective)?;
        println!(
            "{objective:?}: Qe* = {:.4e} (Qe/Qi = {:.6}), loaded Q {:.3e}, escape probability {:.3}",
            s.q_external_opt, s.ratio, s.q_loaded_opt, s.emission_probability_opt
        );
    }

    let mode = ModeProperties::from_group_velocity(1.85, 1.42e8, 1.16e-12, 0.88, -8.48e-26, 1540.5e-9)?;
    let geometry = RingGeometry::from_radius(113e-6)?;
    let pump = PumpConfig::on_resonance(1e-3, 1540.5e-9)?;
    let qi = log_space(1e5, 1e7, 5);
    let qe = log_space(1e5, 1e7, 9);
    let grid = sweep_q_grid(&mode, &geometry, &pump, &qi, &qe)?;
    println!("\nlog10 emitted rate (rows Qi, columns Qe = {:?})", qe.iter().map(|q| format!("{:.0e}", q)).collect::<Vec<_>>());
    for row in grid.chunks(qe.len()) {
        let cells: Vec<String> = row.iter().map(|p| format!("{:5.2}", p.n_cc.log10())).collect();
        println!("Qi {:.0e}: {}", row[0].q_i, cells.join(" "));
    }
    Ok(())
}
