use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::units::db_to_transmission;

/// Measured rates feeding the efficiency inversion, all counts/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyInputs {
    pub singles_s: f64,
    pub singles_i: f64,
    pub coincidences: f64,
    pub accidentals: f64,
    pub noise_fraction_s: f64,
    pub noise_fraction_i: f64,
    pub dark_s: f64,
    pub dark_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyEstimate {
    pub eta_s: f64,
    pub eta_i: f64,
    /// Pair rate at the chip, pairs/s.
    pub n_c: f64,
}

/// Inverts `S = η_s·N_c`, `I = η_i·N_c`, `C − A = η_s·η_i·N_c` after removing
/// darks and the noise share of each singles rate.
pub fn collection_efficiency(inputs: &EfficiencyInputs) -> Result<EfficiencyEstimate> {
    let x = inputs;
    for f in [x.noise_fraction_s, x.noise_fraction_i] {
        if !(0.0..1.0).contains(&f) {
            return domain(format!("noise fraction {f} outside [0, 1)"));
        }
    }
    let true_cc = x.coincidences - x.accidentals;
    if !(true_cc > 0.0) {
        return Err(Error::NoTrueCoincidences {
            coincidences: x.coincidences,
            accidentals: x.accidentals,
        });
    }
    let s_p = (x.singles_s - x.dark_s) * (1.0 - x.noise_fraction_s);
    let i_p = (x.singles_i - x.dark_i) * (1.0 - x.noise_fraction_i);
    if !(s_p > 0.0 && i_p > 0.0) {
        return domain("pair-attributed singles must be positive after dark and noise removal");
    }
    Ok(EfficiencyEstimate {
        eta_s: true_cc / i_p,
        eta_i: true_cc / s_p,
        n_c: s_p * i_p / true_cc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    /// Per facet, dB.
    pub coupling_db: f64,
    pub transmission_db: f64,
    pub detection_db: f64,
    pub emission_probability: f64,
    pub total_efficiency: f64,
}

fn check_losses(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return domain("losses must be finite and >= 0 dB");
    }
    Ok(())
}

/// `total = p·10^(−(coupling + transmission + detection)/10)`.
pub fn loss_budget(coupling_db: f64, transmission_db: f64, detection_db: f64, emission_probability: f64) -> Result<EfficiencyBudget> {
    check_losses(&[coupling_db, transmission_db, detection_db])?;
    if !(emission_probability > 0.0 && emission_probability <= 1.0) {
        return domain(format!("emission probability {emission_probability} outside (0, 1]"));
    }
    Ok(EfficiencyBudget {
        coupling_db,
        transmission_db,
        detection_db,
        emission_probability,
        total_efficiency: emission_probability * db_to_transmission(coupling_db + transmission_db + detection_db),
    })
}

/// Emission probability left after removing the listed losses from a measured
/// total efficiency.
pub fn infer_emission_probability(total_efficiency: f64, coupling_db: f64, transmission_db: f64, detection_db: f64) -> Result<f64> {
    check_losses(&[coupling_db, transmission_db, detection_db])?;
    let p = total_efficiency / db_to_transmission(coupling_db + transmission_db + detection_db);
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InconsistentBudget(p));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_inverse() {
        let (n_c, es, ei) = (1e6, 0.2, 0.25);
        let inputs = EfficiencyInputs {
            singles_s: es * n_c,
            singles_i: ei * n_c,
            coincidences: es * ei * n_c,
            accidentals: 0.0,
            noise_fraction_s: 0.0,
            noise_fraction_i: 0.0,
            dark_s: 0.0,
            dark_i: 0.0,
        };
        let e = collection_efficiency(&inputs).unwrap();
        assert!((e.eta_s - es).abs() < 1e-12);
        assert!((e.eta_i - ei).abs() < 1e-12);
        assert!((e.n_c / n_c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_true_coincidences() {
        let inputs = EfficiencyInputs {
            singles_s: 10.0,
            singles_i: 10.0,
            coincidences: 3.0,
            accidentals: 3.0,
            noise_fraction_s: 0.0,
            noise_fraction_i: 0.0,
            dark_s: 0.0,
            dark_i: 0.0,
        };
        assert!(matches!(collection_efficiency(&inputs), Err(Error::NoTrueCoincidences { .. })));
        let bad = EfficiencyInputs {
            noise_fraction_s: 1.0,
            coincidences: 5.0,
            ..inputs
        };
        assert!(collection_efficiency(&bad).is_err());
    }

    #[test]
    fn budget_round_trip() {
        let b = loss_budget(1.50, 2.55, 1.10, 0.750).unwrap();
        assert!((b.total_efficiency - 0.229).abs() < 0.0005, "{}", b.total_efficiency);
        let p = infer_emission_probability(0.229, 1.50, 2.55, 1.10).unwrap();
        assert!((p - 0.750).abs() < 0.0005, "{p}");
        assert_eq!(loss_budget(0.0, 0.0, 0.0, 0.4).unwrap().total_efficiency, 0.4);
        assert!(matches!(infer_emission_probability(0.9, 3.0, 0.0, 0.0), Err(Error::InconsistentBudget(_))));
        assert!(loss_budget(-1.0, 0.0, 0.0, 0.5).is_err());
    }
}
