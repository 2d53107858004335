//! Device metrology conversions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coupling loss per facet for one wavelength band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetBand {
    pub name: String,
    pub center_nm: f64,
    pub loss_db: f64,
}

/// Facet losses keyed by band name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FacetLossTable {
    pub bands: Vec<FacetBand>,
}

impl FacetLossTable {
    pub fn new(bands: Vec<FacetBand>) -> Result<Self> {
        for b in &bands {
            if !(b.loss_db >= 0.0 && b.loss_db.is_finite()) {
                return Err(Error::config(format!("facet loss of band `{}` must be >= 0 dB", b.name)));
            }
        }
        Ok(FacetLossTable { bands })
    }

    pub fn loss_db(&self, band: &str) -> Result<f64> {
        self.bands
            .iter()
            .find(|b| b.name == band)
            .map(|b| b.loss_db)
            .ok_or_else(|| Error::config(format!("no facet loss recorded for band `{band}`")))
    }
}

/// Where a power reading was taken relative to the chip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Launched into the input fibre: facets attenuate it on the way in.
    Launched,
    /// Collected from the output fibre: facets attenuated it on the way out.
    Collected,
}

/// On-chip power corresponding to a fibre-side reading.
pub fn deembed_power(
    table: &FacetLossTable,
    measured_w: f64,
    facets_crossed: u32,
    band: &str,
    direction: Direction,
) -> Result<f64> {
    let db = table.loss_db(band)? * facets_crossed as f64;
    Ok(match direction {
        Direction::Launched => measured_w * 10f64.powf(-db / 10.0),
        Direction::Collected => measured_w * 10f64.powf(db / 10.0),
    })
}

/// Inverse of [`deembed_power`]: the fibre-side reading for an on-chip power.
pub fn embed_power(
    table: &FacetLossTable,
    on_chip_w: f64,
    facets_crossed: u32,
    band: &str,
    direction: Direction,
) -> Result<f64> {
    let db = table.loss_db(band)? * facets_crossed as f64;
    Ok(match direction {
        Direction::Launched => on_chip_w * 10f64.powf(db / 10.0),
        Direction::Collected => on_chip_w * 10f64.powf(-db / 10.0),
    })
}

/// Propagation loss in dB/cm implied by an intrinsic quality factor:
/// α = 2π·n_g / (Q·λ).
pub fn q_to_loss(intrinsic_q: f64, wavelength_um: f64, group_index: f64) -> Result<f64> {
    if !(intrinsic_q > 0.0 && wavelength_um > 0.0 && group_index > 0.0) {
        return Err(Error::contract("Q, wavelength and group index must be positive"));
    }
    let alpha_per_m = 2.0 * std::f64::consts::PI * group_index / (intrinsic_q * wavelength_um * 1e-6);
    let db_per_m = alpha_per_m * 10.0 / std::f64::consts::LN_10;
    Ok(db_per_m / 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> FacetLossTable {
        FacetLossTable::new(vec![
            FacetBand { name: "1550".into(), center_nm: 1550.0, loss_db: 4.3 },
            FacetBand { name: "775".into(), center_nm: 775.0, loss_db: 5.4 },
            FacetBand { name: "ideal".into(), center_nm: 1550.0, loss_db: 0.0 },
        ])
        .unwrap()
    }

    #[test]
    fn zero_loss_is_identity() {
        let p = deembed_power(&table(), 1.234e-3, 2, "ideal", Direction::Collected).unwrap();
        assert_eq!(p, 1.234e-3);
    }

    #[test]
    fn one_launch_facet() {
        let p = deembed_power(&table(), 1e-3, 1, "1550", Direction::Launched).unwrap();
        assert!((p - 1e-3 * 10f64.powf(-0.43)).abs() < 1e-18);
        let q = deembed_power(&table(), 1e-6, 1, "775", Direction::Collected).unwrap();
        assert!((q - 1e-6 * 10f64.powf(0.54)).abs() < 1e-18);
    }

    #[test]
    fn unknown_band_is_config_error() {
        assert!(matches!(
            deembed_power(&table(), 1.0, 1, "1310", Direction::Launched),
            Err(Error::Config(_))
        ));
        assert!(FacetLossTable::new(vec![FacetBand { name: "x".into(), center_nm: 1.0, loss_db: -1.0 }]).is_err());
    }

    #[test]
    fn q_to_loss_values() {
        assert!((q_to_loss(2e6, 1.6, 2.25).unwrap() - 0.1919).abs() < 5e-4);
        assert!((q_to_loss(2e6, 1.6, 1.8).unwrap() - 0.1535).abs() < 5e-4);
        assert!(q_to_loss(1e300, 1.6, 2.0).unwrap() < 1e-290);
        assert!(q_to_loss(0.0, 1.6, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn deembed_roundtrip(p in 1e-9f64..1.0, n in 0u32..4, collected in any::<bool>()) {
            let dir = if collected { Direction::Collected } else { Direction::Launched };
            let t = table();
            let on_chip = deembed_power(&t, p, n, "1550", dir).unwrap();
            let back = embed_power(&t, on_chip, n, "1550", dir).unwrap();
            prop_assert!((back - p).abs() <= 1e-12 * p);
        }

        #[test]
        fn loss_decreasing_in_q_and_linear_in_ng(q in 1e4f64..1e8, ng in 1.0f64..3.0) {
            let a = q_to_loss(q, 1.6, ng).unwrap();
            prop_assert!(q_to_loss(q * 1.01, 1.6, ng).unwrap() < a);
            let b = q_to_loss(q, 1.6, 2.0 * ng).unwrap();
            prop_assert!((b - 2.0 * a).abs() <= 1e-12 * b);
        }
    }
}
