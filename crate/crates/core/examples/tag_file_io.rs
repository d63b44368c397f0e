//! Writes a simulated stream as binary QTAG and CSV, reads both back, and
//! shows the error raised for a corrupted file.
//!
//! ```bash
//! cargo run --example tag_file_io
//! ```

use std::io::Cursor;

use ringsource::tag_sim::*;

fn main() -> ringsource::Result<()> {
    let source = SourceModel {
        pair_rate_quadratic_coeff: 1.0e5,
        noise_rate_linear_coeff_signal: 1.0e4,
        noise_rate_linear_coeff_idler: 1.0e4,
        correlation_fwhm: 1.64e-9,
        thermal_mode_count: 1,
    };
    let det = DetectorModel::default();
    let out = simulate_pair_source(&source, &det, &det, 1.0, 0.01, 42)?;
    let stream = out.stream;
    println!("{} records over {} ps, seed {}", stream.len(), stream.duration_ps(), stream.seed());
    for ch in stream.channel_ids() {
        println!("  channel {ch}: {} events, {:.0}/s", stream.count(ch), stream.rate(ch));
    }
    println!("truth: {:?}", out.truth);

    let mut binary = Vec::new();
    stream.write_binary(&mut binary)?;
    let back = TimeTagStream::read_binary(binary.as_slice())?;
    println!("binary: {} bytes, round trip equal: {}", binary.len(), back == stream);

    let mut csv = Vec::new();
    stream.write_csv(&mut csv)?;
    let back = TimeTagStream::read_csv(Cursor::new(&csv), Some(stream.duration_ps()), stream.seed())?;
    println!("csv: {} bytes, round trip equal: {}", csv.len(), back == stream);

    binary.truncate(binary.len() - 7);
    match TimeTagStream::read_binary(binary.as_slice()) {
        Err(e) => println!("truncated file: {e}"),
        Ok(_) => println!("truncated file unexpectedly parsed"),
    }
    Ok(())
}
