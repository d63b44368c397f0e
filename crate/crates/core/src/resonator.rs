//! Ring resonator algebra: quality factors, geometry, on-resonance
//! transmission, Lorentzian dip fitting and integrated-dispersion fitting.
//!
//! Dispersion coefficients `D_n` are stored as angular quantities
//! (rad/s per mode^n). `D1 = 2π·FSR`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fit::{levenberg_marquardt, linear_least_squares};
use crate::units::{transmission_to_db, SPEED_OF_LIGHT};

/// `|Qe/Qi − 1|` below which a resonator counts as critically coupled.
pub const CRITICAL_COUPLING_TOLERANCE: f64 = 1e-3;

/// Transmission above which a scan is considered to contain no dip.
pub const NO_DIP_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingGeometry {
    radius: f64,
    roundtrip_length: f64,
}

impl RingGeometry {
    pub fn from_radius(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return domain(format!("ring radius must be positive, got {radius}"));
        }
        Ok(Self {
            radius,
            roundtrip_length: 2.0 * PI * radius,
        })
    }

    pub fn from_fsr(fsr_hz: f64, group_index: f64) -> Result<Self> {
        Self::from_radius(radius_from_fsr(fsr_hz, group_index)?)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn roundtrip_length(&self) -> f64 {
        self.roundtrip_length
    }

    pub fn fsr(&self, group_index: f64) -> Result<f64> {
        fsr_from_radius(self.radius, group_index)
    }
}

/// Guided-mode properties at the pump wavelength. These are inputs (from a
/// mode solver or a datasheet); nothing here solves for them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeProperties {
    pub n_eff: f64,
    pub n_g: f64,
    pub group_velocity: f64,
    /// Effective mode area, m².
    pub a_eff: f64,
    /// Nonlinear index, m²/W.
    pub n2: f64,
    /// Nonlinear coefficient, 1/(W·m).
    pub gamma: f64,
    /// Group-velocity dispersion, s²/m.
    pub beta2: f64,
    pub ref_wavelength: f64,
}

impl ModeProperties {
    /// Builds the mode with `v_g = c/n_g` and `γ = 2π·n2/(λ·A_eff)`.
    pub fn new(n_eff: f64, n_g: f64, a_eff: f64, n2: f64, beta2: f64, ref_wavelength: f64) -> Result<Self> {
        if !(n_g > 0.0) || !(a_eff > 0.0) || !(ref_wavelength > 0.0) {
            return domain("n_g, a_eff and ref_wavelength must be positive");
        }
        Ok(Self {
            n_eff,
            n_g,
            group_velocity: SPEED_OF_LIGHT / n_g,
            a_eff,
            n2,
            gamma: 2.0 * PI * n2 / (ref_wavelength * a_eff),
            beta2,
            ref_wavelength,
        })
    }

    /// Builds the mode from a known group velocity and nonlinear coefficient.
    /// `n_g` follows from `v_g`, and `n2` is back-computed from `γ`.
    pub fn from_group_velocity(
        n_eff: f64,
        group_velocity: f64,
        a_eff: f64,
        gamma: f64,
        beta2: f64,
        ref_wavelength: f64,
    ) -> Result<Self> {
        if !(group_velocity > 0.0) || !(a_eff > 0.0) || !(ref_wavelength > 0.0) {
            return domain("group_velocity, a_eff and ref_wavelength must be positive");
        }
        Ok(Self {
            n_eff,
            n_g: SPEED_OF_LIGHT / group_velocity,
            group_velocity,
            a_eff,
            n2: gamma * ref_wavelength * a_eff / (2.0 * PI),
            gamma,
            beta2,
            ref_wavelength,
        })
    }

    pub fn omega0(&self) -> f64 {
        crate::units::wavelength_to_angular(self.ref_wavelength)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingRegime {
    Over,
    Critical,
    Under,
}

impl CouplingRegime {
    pub fn classify(q_intrinsic: f64, q_external: f64) -> Self {
        if q_intrinsic.is_infinite() {
            return CouplingRegime::Over;
        }
        let ratio = q_external / q_intrinsic;
        if (ratio - 1.0).abs() < CRITICAL_COUPLING_TOLERANCE {
            CouplingRegime::Critical
        } else if q_external < q_intrinsic {
            CouplingRegime::Over
        } else {
            CouplingRegime::Under
        }
    }
}

/// Intrinsic/external/loaded Q triple. `q_intrinsic` may be `f64::INFINITY`
/// for a lossless ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityFactors {
    q_intrinsic: f64,
    q_external: f64,
    q_loaded: f64,
    regime: CouplingRegime,
}

impl QualityFactors {
    pub fn new(q_intrinsic: f64, q_external: f64) -> Result<Self> {
        let q_loaded = loaded_q(q_intrinsic, q_external)?;
        Ok(Self {
            q_intrinsic,
            q_external,
            q_loaded,
            regime: CouplingRegime::classify(q_intrinsic, q_external),
        })
    }

    /// Splits a loaded Q into (Qi, Qe) from the on-resonance transmission
    /// minimum. The regime must be supplied because `t_min` is symmetric
    /// under Qi ↔ Qe.
    pub fn from_loaded_and_tmin(q_loaded: f64, t_min: f64, regime: CouplingRegime) -> Result<Self> {
        if !(q_loaded > 0.0) {
            return domain(format!("loaded Q must be positive, got {q_loaded}"));
        }
        if !(0.0..=1.0).contains(&t_min) {
            return domain(format!("t_min must lie in [0, 1], got {t_min}"));
        }
        let total = 1.0 / q_loaded;
        let diff = match regime {
            CouplingRegime::Critical => 0.0,
            _ => t_min.sqrt() * total,
        };
        let (inv_qe, inv_qi) = match regime {
            CouplingRegime::Over | CouplingRegime::Critical => ((total + diff) / 2.0, (total - diff) / 2.0),
            CouplingRegime::Under => ((total - diff) / 2.0, (total + diff) / 2.0),
        };
        if !(inv_qe > 0.0) {
            return domain("transmission minimum implies unbounded external Q");
        }
        let q_intrinsic = if inv_qi > 0.0 { 1.0 / inv_qi } else { f64::INFINITY };
        let mut q = Self::new(q_intrinsic, 1.0 / inv_qe)?;
        q.regime = regime;
        Ok(q)
    }

    pub fn q_intrinsic(&self) -> f64 {
        self.q_intrinsic
    }
    pub fn q_external(&self) -> f64 {
        self.q_external
    }
    pub fn q_loaded(&self) -> f64 {
        self.q_loaded
    }
    pub fn regime(&self) -> CouplingRegime {
        self.regime
    }
}

/// `1/Q = 1/Qi + 1/Qe`.
pub fn loaded_q(q_intrinsic: f64, q_external: f64) -> Result<f64> {
    if !(q_intrinsic > 0.0) || !(q_external > 0.0) || q_external.is_infinite() || q_intrinsic.is_nan() {
        return domain(format!(
            "quality factors must be positive (Qe finite): Qi={q_intrinsic}, Qe={q_external}"
        ));
    }
    Ok(1.0 / (1.0 / q_intrinsic + 1.0 / q_external))
}

/// Q factors from round-trip loss `alpha` (1/m) and power coupling `kappa_sq`.
pub fn physical_to_q(
    alpha: f64,
    kappa_sq: f64,
    geometry: &RingGeometry,
    mode: &ModeProperties,
    omega0: f64,
) -> Result<QualityFactors> {
    if !(alpha >= 0.0) {
        return domain(format!("alpha must be non-negative, got {alpha}"));
    }
    if !(kappa_sq > 0.0 && kappa_sq <= 1.0) {
        return domain(format!("kappa^2 must lie in (0, 1], got {kappa_sq}"));
    }
    let vg = mode.group_velocity;
    let q_intrinsic = if alpha == 0.0 { f64::INFINITY } else { omega0 / (alpha * vg) };
    let q_external = omega0 / kappa_sq * geometry.roundtrip_length() / vg;
    QualityFactors::new(q_intrinsic, q_external)
}

/// Inverse of [`physical_to_q`]: `(alpha, kappa_sq)` for a given Q pair.
pub fn q_to_physical(
    q: &QualityFactors,
    geometry: &RingGeometry,
    mode: &ModeProperties,
    omega0: f64,
) -> (f64, f64) {
    let vg = mode.group_velocity;
    let alpha = omega0 / (q.q_intrinsic() * vg);
    let kappa_sq = omega0 * geometry.roundtrip_length() / (vg * q.q_external());
    (alpha, kappa_sq)
}

/// `R = c/(n_g·2π·FSR)`.
pub fn radius_from_fsr(fsr_hz: f64, group_index: f64) -> Result<f64> {
    if !(fsr_hz > 0.0) || !(group_index > 0.0) {
        return domain(format!("fsr and n_g must be positive: fsr={fsr_hz}, n_g={group_index}"));
    }
    Ok(SPEED_OF_LIGHT / (group_index * 2.0 * PI * fsr_hz))
}

pub fn fsr_from_radius(radius: f64, group_index: f64) -> Result<f64> {
    if !(radius > 0.0) || !(group_index > 0.0) {
        return domain(format!("radius and n_g must be positive: R={radius}, n_g={group_index}"));
    }
    Ok(SPEED_OF_LIGHT / (group_index * 2.0 * PI * radius))
}

/// On-resonance transmission of an all-pass ring and its extinction ratio in
/// dB. At critical coupling `t_min = 0` and the extinction ratio is
/// `f64::INFINITY`.
pub fn transmission_extremum(q: &QualityFactors) -> (f64, f64) {
    let inv_e = 1.0 / q.q_external();
    let inv_i = 1.0 / q.q_intrinsic();
    let r = (inv_e - inv_i) / (inv_e + inv_i);
    let t_min = r * r;
    let er = if t_min == 0.0 { f64::INFINITY } else { transmission_to_db(t_min) };
    (t_min, er)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub frequency_hz: f64,
    pub transmission: f64,
}

/// A transmission spectrum sampled at strictly increasing frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceScan {
    samples: Vec<ScanSample>,
}

impl ResonanceScan {
    pub fn new(samples: Vec<ScanSample>) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].frequency_hz > w[0].frequency_hz)) {
            return domain("scan frequencies must be strictly increasing");
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[ScanSample] {
        &self.samples
    }

    /// Noiseless Lorentzian dip `T(f) = 1 − (1 − t_min)/(1 + (2(f−f0)/Γ)²)`.
    pub fn lorentzian(center_hz: f64, fwhm_hz: f64, t_min: f64, span_hz: f64, n: usize) -> Result<Self> {
        if n < 2 || !(span_hz > 0.0) || !(fwhm_hz > 0.0) {
            return domain("need n >= 2 samples, positive span and linewidth");
        }
        let start = center_hz - span_hz / 2.0;
        let step = span_hz / (n - 1) as f64;
        let samples = (0..n)
            .map(|i| {
                let f = start + step * i as f64;
                ScanSample {
                    frequency_hz: f,
                    transmission: lorentzian_dip(f, 1.0, 1.0 - t_min, center_hz, fwhm_hz),
                }
            })
            .collect();
        Self::new(samples)
    }

    /// Two-column CSV with a `frequency_hz,transmission` header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "frequency_hz" || &headers[1] != "transmission" {
            return Err(Error::Config(format!(
                "scan CSV header must be 'frequency_hz,transmission', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let samples = rdr.deserialize().collect::<std::result::Result<Vec<ScanSample>, _>>()?;
        Self::new(samples)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for s in &self.samples {
            wtr.serialize(s)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn lorentzian_dip(f: f64, baseline: f64, depth: f64, center: f64, fwhm: f64) -> f64 {
    let x = 2.0 * (f - center) / fwhm;
    baseline * (1.0 - depth / (1.0 + x * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    pub center_frequency: f64,
    pub fwhm: f64,
    pub extinction_ratio: f64,
    pub t_min: f64,
    pub baseline: f64,
    pub q_loaded: f64,
    pub q_split: QualityFactors,
    pub assumed_regime: CouplingRegime,
    pub residual_norm: f64,
}

/// Fits a symmetric Lorentzian dip (baseline, depth, center, FWHM) and splits
/// the loaded Q under the caller's regime assumption.
pub fn fit_resonance(scan: &ResonanceScan, assumed_regime: CouplingRegime) -> Result<ResonanceFit> {
    let s = scan.samples();
    if s.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: s.len() });
    }
    let (imin, min_sample) = s
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.transmission.total_cmp(&b.1.transmission))
        .expect("non-empty");
    if min_sample.transmission > NO_DIP_THRESHOLD {
        return Err(Error::NoResonance {
            min_transmission: min_sample.transmission,
        });
    }

    // Baseline from the outer tenth of the scan on each side.
    let edge = (s.len() / 10).max(1);
    let baseline0 = s[..edge].iter().chain(&s[s.len() - edge..]).map(|p| p.transmission).sum::<f64>()
        / (2 * edge) as f64;
    let half = (baseline0 + min_sample.transmission) / 2.0;
    let lo = s[..imin].iter().rposition(|p| p.transmission >= half).unwrap_or(0);
    let hi = imin + s[imin..].iter().position(|p| p.transmission >= half).unwrap_or(s.len() - 1 - imin);
    let fwhm0 = (s[hi].frequency_hz - s[lo].frequency_hz).max(1e-12 * min_sample.frequency_hz.abs());
    let across = s
        .iter()
        .filter(|p| (p.frequency_hz - min_sample.frequency_hz).abs() <= fwhm0 / 2.0)
        .count();
    if across < 10 {
        return Err(Error::InsufficientData { needed: 10, got: across });
    }

    // Offsets from the guessed center keep the center parameter O(FWHM).
    let f_ref = min_sample.frequency_hz;
    let xs: Vec<f64> = s.iter().map(|p| (p.frequency_hz - f_ref) / fwhm0).collect();
    let ys: Vec<f64> = s.iter().map(|p| p.transmission).collect();
    let depth0 = 1.0 - min_sample.transmission / baseline0;
    let sol = levenberg_marquardt(
        |p, out| {
            for (i, x) in xs.iter().enumerate() {
                out[i] = lorentzian_dip(*x, p[0], p[1], p[2], p[3]) - ys[i];
            }
        },
        &[baseline0, depth0, 0.0, 1.0],
        &[1e-7, 1e-7, 1e-7, 1e-7],
        xs.len(),
        500,
    )?;
    let (baseline, depth, center_x, width_x) = (sol.params[0], sol.params[1], sol.params[2], sol.params[3]);
    if !(baseline > 0.0) || !(width_x.abs() > 0.0) || !(0.0..=1.0 + 1e-9).contains(&depth) {
        return Err(Error::FitDiverged(format!(
            "unphysical Lorentzian: baseline={baseline}, depth={depth}, width={width_x}"
        )));
    }
    let center_frequency = f_ref + center_x * fwhm0;
    let fwhm = width_x.abs() * fwhm0;
    let t_min = (1.0 - depth).clamp(0.0, 1.0);
    let q_loaded = center_frequency / fwhm;
    let q_split = QualityFactors::from_loaded_and_tmin(q_loaded, t_min, assumed_regime)?;
    Ok(ResonanceFit {
        center_frequency,
        fwhm,
        extinction_ratio: if t_min == 0.0 { f64::INFINITY } else { transmission_to_db(t_min) },
        t_min,
        baseline,
        q_loaded,
        q_split,
        assumed_regime,
        residual_norm: sol.residual_norm,
    })
}

/// Polynomial expansion of the resonance frequencies around the pump mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionFit {
    pub omega0: f64,
    pub d1: f64,
    pub d2: f64,
    /// `D3, D4, …` when the fit order exceeds 2.
    pub higher_orders: Vec<f64>,
    pub mode_indices: Vec<i64>,
    pub residuals: Vec<f64>,
    pub d_int: Vec<f64>,
}

impl DispersionFit {
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    /// FSR in Hz.
    pub fn fsr(&self) -> f64 {
        self.d1 / (2.0 * PI)
    }
}

/// Quadratic fit of `ω_µ` against the mode index, `µ = 0` at `pump_index`.
pub fn fit_integrated_dispersion(resonance_frequencies: &[f64], pump_index: usize) -> Result<DispersionFit> {
    fit_integrated_dispersion_order(resonance_frequencies, pump_index, 2)
}

/// Same as [`fit_integrated_dispersion`] with an explicit polynomial order
/// (≥ 2). `D_n` for n ≥ 3 land in `higher_orders`.
pub fn fit_integrated_dispersion_order(
    resonance_frequencies: &[f64],
    pump_index: usize,
    order: usize,
) -> Result<DispersionFit> {
    let n = resonance_frequencies.len();
    if order < 2 {
        return domain("dispersion fit order must be at least 2");
    }
    let needed = (order + 1).max(5);
    if n < needed {
        return Err(Error::InsufficientData { needed, got: n });
    }
    if pump_index >= n {
        return domain(format!("pump index {pump_index} outside {n} resonances"));
    }
    let pump = resonance_frequencies[pump_index];
    let mu: Vec<i64> = (0..n).map(|i| i as i64 - pump_index as i64).collect();
    // Fit the offset from the pump resonance so the constant column does not
    // swamp the dispersion terms.
    let design = DMatrix::from_fn(n, order + 1, |i, j| (mu[i] as f64).powi(j as i32));
    let y = DVector::from_iterator(n, resonance_frequencies.iter().map(|w| w - pump));
    let sol = linear_least_squares(&design, &y, None)?;
    let c = &sol.coefficients;
    let mut factorial = 1.0;
    let mut d = Vec::with_capacity(order + 1);
    for k in 0..=order {
        if k > 0 {
            factorial *= k as f64;
        }
        d.push(c[k] * factorial);
    }
    let omega0 = pump + d[0];
    let d1 = d[1];
    let d_int = resonance_frequencies
        .iter()
        .zip(&mu)
        .map(|(w, &m)| (w - pump) - d[0] - d1 * m as f64)
        .collect();
    Ok(DispersionFit {
        omega0,
        d1,
        d2: d[2],
        higher_orders: d[3..].to_vec(),
        mode_indices: mu,
        residuals: sol.residuals.iter().copied().collect(),
        d_int,
    })
}

/// `β2 = −n·D2/(c·D1²)` with angular `D1`, `D2`.
pub fn beta2_from_d2(n: f64, d1: f64, d2: f64) -> Result<f64> {
    if d1 == 0.0 || !d1.is_finite() {
        return domain("D1 must be non-zero");
    }
    Ok(-n * d2 / (SPEED_OF_LIGHT * d1 * d1))
}
