//! Comb lines on the ITU grid, energy-matched signal/idler channel pairs and
//! the predicted joint spectral intensity, written as CSV to stdout.
//!
//! ```bash
//! cargo run --example itu_comb > jsi.csv
//! ```

use std::f64::consts::PI;

use ringsource::comb_grid::*;

fn main() -> ringsource::Result<()> {
    let grid = ItuGrid::default();
    let pump = grid.channel(46)?;
    let lines = synthesize_comb(2.0 * PI * pump.center_frequency, 2.0 * PI * 200e9, 2.28e7, 7, &grid)?;
    for l in lines.iter().filter(|l| l.mode_index >= 0) {
        let (ch, off) = grid.wavelength_to_channel(l.wavelength())?;
        eprintln!("mu {:>2}: {:.3} nm, {} offset {:+.2} MHz", l.mode_index, l.wavelength() * 1e9, ch.label(), off / 1e6);
    }
    let pairs: Vec<_> = (1..=7)
        .map(|k| {
            let (s, i) = grid.pair_channels(46, k, 2)?;
            eprintln!("{} & {}: {:.2} / {:.2} nm", s.label(), i.label(), s.center_wavelength * 1e9, i.center_wavelength * 1e9);
            Ok((channel_line(s, -(k as i64)), channel_line(i, k as i64)))
        })
        .collect::<ringsource::Result<_>>()?;
    predicted_jsi(&pairs, pump.center_frequency, 1e6, None)?.write_csv(std::io::stdout())
}
