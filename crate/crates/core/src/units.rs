//! Physical constants and unit helpers. Everything inside the crate is SI
//! unless a name says otherwise (`_mw`, `_nm`, `_ps`).

use std::f64::consts::PI;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const PS_PER_S: f64 = 1e12;

pub fn wavelength_to_angular(wavelength_m: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / wavelength_m
}

pub fn angular_to_wavelength(omega: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / omega
}

pub fn frequency_to_wavelength(freq_hz: f64) -> f64 {
    SPEED_OF_LIGHT / freq_hz
}

pub fn wavelength_to_frequency(wavelength_m: f64) -> f64 {
    SPEED_OF_LIGHT / wavelength_m
}

pub fn seconds_to_ps(t: f64) -> f64 {
    t * PS_PER_S
}

pub fn ps_to_seconds(t: f64) -> f64 {
    t / PS_PER_S
}

/// `10^(-db/10)`.
pub fn db_to_transmission(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

pub fn transmission_to_db(t: f64) -> f64 {
    -10.0 * t.log10()
}

/// `sinc(x) = sin(x)/x`, with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}
