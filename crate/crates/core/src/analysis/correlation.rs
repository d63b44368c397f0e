use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::tag_sim::TimeTagStream;
use crate::units::PS_PER_S;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeraldedPoint {
    pub tau: f64,
    pub n13: u64,
    pub n123: u64,
    /// `None` when `N12` or `N13(τ)` is zero.
    pub g2: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeraldedG2 {
    pub window: f64,
    pub n1: u64,
    pub n12: u64,
    pub points: Vec<HeraldedPoint>,
}

impl HeraldedG2 {
    /// Point closest to zero delay.
    pub fn at_zero(&self) -> Option<&HeraldedPoint> {
        self.points.iter().min_by(|a, b| a.tau.abs().total_cmp(&b.tau.abs()))
    }
}

/// For each herald, whether `other` has an event with
/// `−W ≤ 2(t − t_h − τ) ≤ W`.
fn herald_flags(herald: &[u64], other: &[u64], tau_ps: i64, window_ps: i64) -> Vec<bool> {
    let mut lo = 0usize;
    herald
        .iter()
        .map(|&th| {
            let centre = th as i64 + tau_ps;
            while lo < other.len() && 2 * (other[lo] as i64 - centre) < -window_ps {
                lo += 1;
            }
            lo < other.len() && 2 * (other[lo] as i64 - centre) <= window_ps
        })
        .collect()
}

/// Heralded second-order correlation
/// `g2h(τ) = N123(τ)·N1 / (N12·N13(τ))`.
///
/// `N1` counts heralds, `N12` heralds with an s1 event inside the window at
/// zero delay, `N13(τ)` heralds with an s2 event inside the window at delay τ
/// and `N123(τ)` heralds with both.
pub fn heralded_g2(stream: &TimeTagStream, herald: u32, s1: u32, s2: u32, window: f64, tau_grid: &[f64]) -> Result<HeraldedG2> {
    let w = (window * PS_PER_S).round() as i64;
    if w < 1 {
        return domain("coincidence window must be at least 1 ps");
    }
    let h = stream.channel(herald);
    let a = stream.channel(s1);
    let b = stream.channel(s2);
    let flags12 = herald_flags(&h, &a, 0, w);
    let n1 = h.len() as u64;
    let n12 = flags12.iter().filter(|f| **f).count() as u64;

    let points = tau_grid
        .par_iter()
        .map(|&tau| {
            let flags13 = herald_flags(&h, &b, (tau * PS_PER_S).round() as i64, w);
            let n13 = flags13.iter().filter(|f| **f).count() as u64;
            let n123 = flags12.iter().zip(&flags13).filter(|(x, y)| **x && **y).count() as u64;
            let (g2, sigma) = if n12 > 0 && n13 > 0 {
                let g = n123 as f64 * n1 as f64 / (n12 as f64 * n13 as f64);
                // Poisson propagation; with no threefolds use one count as the scale
                let rel = (1.0 / (n123.max(1)) as f64 + 1.0 / n12 as f64 + 1.0 / n13 as f64 + 1.0 / n1 as f64).sqrt();
                let s = if n123 > 0 { g * rel } else { n1 as f64 / (n12 as f64 * n13 as f64) };
                (Some(g), Some(s))
            } else {
                (None, None)
            };
            HeraldedPoint {
                tau,
                n13,
                n123,
                g2,
                sigma,
            }
        })
        .collect();
    Ok(HeraldedG2 { window, n1, n12, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Point {
    pub tau: f64,
    pub pairs: u64,
    pub g2: f64,
    pub sigma: f64,
}

/// Number of (a, b) pairs with `−Δ ≤ 2(t_b − t_a − τ) < Δ`.
fn pair_count(a: &[u64], b: &[u64], tau_ps: i64, window_ps: i64) -> u64 {
    let mut lo = 0usize;
    let mut hi = 0usize;
    let mut total = 0u64;
    for &ta in a {
        let centre = ta as i64 + tau_ps;
        while lo < b.len() && 2 * (b[lo] as i64 - centre) < -window_ps {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < b.len() && 2 * (b[hi] as i64 - centre) < window_ps {
            hi += 1;
        }
        total += (hi - lo) as u64;
    }
    total
}

/// Normalised cross-correlation `g2(τ) = N_ab(τ)·T / (N_a·N_b·Δ)` with a
/// coincidence window Δ.
pub fn unheralded_g2(stream: &TimeTagStream, ch_a: u32, ch_b: u32, window: f64, tau_grid: &[f64]) -> Result<Vec<G2Point>> {
    let w = (window * PS_PER_S).round() as i64;
    if w < 1 {
        return domain("coincidence window must be at least 1 ps");
    }
    let a = stream.channel(ch_a);
    let b = stream.channel(ch_b);
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            got: 0,
        });
    }
    let norm = stream.duration_ps() as f64 / (a.len() as f64 * b.len() as f64 * w as f64);
    Ok(tau_grid
        .par_iter()
        .map(|&tau| {
            let pairs = pair_count(&a, &b, (tau * PS_PER_S).round() as i64, w);
            G2Point {
                tau,
                pairs,
                g2: pairs as f64 * norm,
                sigma: (pairs as f64).sqrt() * norm,
            }
        })
        .collect())
}

/// `K = 1/(g2(0) − 1)`.
pub fn effective_mode_number(g2_zero: f64) -> Result<f64> {
    if !(g2_zero > 1.0) || !g2_zero.is_finite() {
        return Err(Error::ModeNumberUndefined(g2_zero));
    }
    Ok(1.0 / (g2_zero - 1.0))
}
