//! Integrated-dispersion fit of a measured comb of resonances and the
//! conversion of D2 to the group-velocity dispersion.
//!
//! ```bash
//! cargo run --example dispersion_fit
//! ```

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use ringsource::resonator::{beta2_from_d2, fit_integrated_dispersion};

fn main() -> ringsource::Result<()> {
    // 41 resonances around the pump with a 10 MHz wavemeter error
    let (w0, d1, d2) = (2.0 * PI * 194.6e12, 2.0 * PI * 200e9, 2.28e7);
    let noise = Normal::new(0.0, 2.0 * PI * 10e6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let freqs: Vec<f64> = (-20..=20)
        .map(|mu| {
            let m = mu as f64;
            w0 + d1 * m + d2 / 2.0 * m * m + noise.sample(&mut rng)
        })
        .collect();
    let fit = fit_integrated_dispersion(&freqs, 20)?;
    println!("FSR {:.4} GHz, D2 {:.3e} (true {d2:.3e})", fit.fsr() / 1e9, fit.d2);
    println!("beta2 = {:.3e} s^2/m", beta2_from_d2(1.85, fit.d1, fit.d2)?);
    println!("mu, D_int/2pi (MHz)");
    for (mu, d) in fit.mode_indices.iter().zip(&fit.d_int).step_by(5) {
        println!("{mu:>4} {:>9.2}", d / (2.0 * PI) / 1e6);
    }
    Ok(())
}
