//! Shipped material fits against values frozen from an independent evaluation
//! (`oracles/sellmeier_oracle.py`).

use qpmkit::error::Error;
use qpmkit::materials::MaterialLibrary;

fn index(name: &str, wavelength_um: f64, temperature_c: f64) -> f64 {
    MaterialLibrary::builtin()
        .get(name)
        .unwrap()
        .refractive_index(wavelength_um, temperature_c)
        .unwrap()
}

#[test]
fn frozen_indices() {
    let cases = [
        ("ln_congruent_e", 1.55, 25.0, 2.137_880),
        ("ln_congruent_o", 1.55, 25.0, 2.211_238),
        ("fused_silica", 1.55, 25.0, 1.444_024),
        ("ln_congruent_e", 0.775, 34.5, 2.179_151_498),
        ("ln_congruent_o", 1.55, 60.0, 2.211_391_230),
        ("ln_congruent_e", 1.55, 100.0, 2.141_045_366),
        ("fused_silica", 0.775, 25.0, 1.453_762_476),
    ];
    for (name, l, t, want) in cases {
        let got = index(name, l, t);
        assert!((got - want).abs() < 2e-6, "{name}({l}, {t}) = {got}, want {want}");
    }
}

#[test]
fn lithium_niobate_is_negative_uniaxial_and_normal() {
    for l in [0.7, 0.775, 1.0, 1.55, 2.0] {
        assert!(index("ln_congruent_e", l, 25.0) < index("ln_congruent_o", l, 25.0));
        assert!(index("ln_congruent_e", l, 25.0) > index("ln_congruent_e", l + 0.05, 25.0));
    }
}

#[test]
fn extraordinary_index_rises_with_temperature() {
    let mut last = 0.0;
    for t in [20.0, 34.5, 60.0, 100.0, 200.0] {
        let n = index("ln_congruent_e", 1.55, t);
        assert!(n > last);
        last = n;
    }
}

#[test]
fn group_index_exceeds_phase_index() {
    let lib = MaterialLibrary::builtin();
    for name in ["ln_congruent_e", "ln_congruent_o", "fused_silica"] {
        let m = lib.get(name).unwrap();
        let n = m.refractive_index(1.55, 25.0).unwrap();
        let ng = m.group_index(1.55, 25.0, 1e-3).unwrap();
        assert!(ng > n, "{name}: n_g {ng} <= n {n}");
    }
}

#[test]
fn air_is_exactly_one() {
    assert_eq!(index("air", 1.55, 25.0), 1.0);
}

#[test]
fn outside_window_is_range_error() {
    let lib = MaterialLibrary::builtin();
    let e = lib.get("ln_congruent_e").unwrap();
    assert!(matches!(e.refractive_index(6.0, 25.0), Err(Error::Range { .. })));
    assert!(matches!(e.refractive_index(1.55, 400.0), Err(Error::Range { .. })));
    assert!(matches!(lib.get("unobtainium"), Err(Error::UnknownMaterial(_))));
}

#[test]
fn custom_library_from_toml() {
    let lib = MaterialLibrary::from_toml(
        r#"
[[material]]
name = "glass"
form = "constant"
coefficients = [1.5]
wavelength_range_um = [0.3, 3.0]
temperature_range_c = [0.0, 100.0]
"#,
    )
    .unwrap();
    assert_eq!(lib.get("glass").unwrap().refractive_index(1.0, 20.0).unwrap(), 1.5);
    assert!(MaterialLibrary::from_toml("[[material]]\nname = 3").is_err());
}

#[test]
fn every_shipped_model_is_normally_dispersive_in_the_telecom_band() {
    let lib = MaterialLibrary::builtin();
    for name in lib.names() {
        let m = lib.get(name).unwrap();
        let n: Vec<f64> = (0..=50).map(|k| m.refractive_index(1.2 + 0.01 * k as f64, 25.0).unwrap()).collect();
        assert!(n.windows(2).all(|w| w[1] <= w[0]), "{name}");
    }
}
