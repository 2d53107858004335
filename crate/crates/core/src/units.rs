//! Physical quantities with parse-time unit checking.
//!
//! Configuration values are written as `"<number> <unit>"`, e.g. `"4 mm"` or
//! `"27 pm/V"`. Each field declares its dimension through the type parameter
//! of [`Quantity`], so `"4 mW"` in a length field is rejected when the file is
//! read. Values are stored in SI base units, except temperatures which are
//! kept in degrees Celsius because every dispersion fit is written in °C.

use std::fmt;
use std::marker::PhantomData;

use serde::de::{self, Deserialize, Deserializer};
use serde::{Serialize, Serializer};

/// A physical dimension: knows its SI unit and how to convert other units into it.
pub trait Dimension {
    const NAME: &'static str;
    const SI_UNIT: &'static str;
    fn to_si(value: f64, unit: &str) -> Option<f64>;
}

fn scaled(value: f64, unit: &str, table: &[(&str, f64)]) -> Option<f64> {
    table
        .iter()
        .find(|(name, _)| *name == unit)
        .map(|(_, scale)| value * scale)
}

macro_rules! dimension {
    ($(#[$meta:meta])* $ty:ident, $name:literal, $si:literal, [$(($unit:literal, $scale:expr)),* $(,)?]) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $ty;
        impl Dimension for $ty {
            const NAME: &'static str = $name;
            const SI_UNIT: &'static str = $si;
            fn to_si(value: f64, unit: &str) -> Option<f64> {
                scaled(value, unit, &[$(($unit, $scale)),*])
            }
        }
    };
}

dimension!(Length, "length", "m", [
    ("m", 1.0), ("cm", 1e-2), ("mm", 1e-3), ("um", 1e-6), ("µm", 1e-6),
    ("μm", 1e-6), ("nm", 1e-9),
]);
dimension!(Angle, "angle", "rad", [
    ("rad", 1.0), ("deg", std::f64::consts::PI / 180.0), ("°", std::f64::consts::PI / 180.0),
]);
dimension!(Frequency, "frequency", "Hz", [
    ("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9), ("THz", 1e12),
]);
dimension!(Time, "time", "s", [
    ("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9), ("ps", 1e-12),
]);
dimension!(Decibel, "attenuation", "dB", [("dB", 1.0)]);
dimension!(NonlinearCoefficient, "nonlinear coefficient", "m/V", [
    ("m/V", 1.0), ("pm/V", 1e-12),
]);
dimension!(
    /// Pair brightness: pairs per second per watt of pump per metre of bandwidth.
    Brightness, "spectral brightness", "Hz/W/m", [
    ("Hz/W/m", 1.0),
    ("Hz/mW/nm", 1e12),
    ("kHz/mW/nm", 1e15),
    ("MHz/mW/nm", 1e18),
    ("pairs/s/mW/nm", 1e12),
]);

/// Optical power. `dBm` is accepted alongside linear units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power;
impl Dimension for Power {
    const NAME: &'static str = "power";
    const SI_UNIT: &'static str = "W";
    fn to_si(value: f64, unit: &str) -> Option<f64> {
        if unit == "dBm" {
            return Some(1e-3 * 10f64.powf(value / 10.0));
        }
        scaled(
            value,
            unit,
            &[("W", 1.0), ("mW", 1e-3), ("uW", 1e-6), ("µW", 1e-6), ("nW", 1e-9)],
        )
    }
}

/// Temperature, stored in °C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature;
impl Dimension for Temperature {
    const NAME: &'static str = "temperature";
    const SI_UNIT: &'static str = "degC";
    fn to_si(value: f64, unit: &str) -> Option<f64> {
        match unit {
            "degC" | "°C" | "C" => Some(value),
            "K" => Some(value - 273.15),
            _ => None,
        }
    }
}

/// A value of dimension `D`, stored in the dimension's base unit.
pub struct Quantity<D> {
    value: f64,
    _dim: PhantomData<D>,
}

impl<D> Clone for Quantity<D> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<D> Copy for Quantity<D> {}
impl<D> PartialEq for Quantity<D> {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value
    }
}

impl<D: Dimension> fmt::Debug for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, D::SI_UNIT)
    }
}

impl<D: Dimension> fmt::Display for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.value, D::SI_UNIT)
    }
}

impl<D: Dimension> Quantity<D> {
    pub fn from_si(value: f64) -> Self {
        Quantity {
            value,
            _dim: PhantomData,
        }
    }

    pub fn si(self) -> f64 {
        self.value
    }

    /// Parse `"<number> <unit>"`. The space is optional.
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        let split = text
            .char_indices()
            .find(|&(i, c)| {
                let numeric = c.is_ascii_digit() || matches!(c, '.' | '+' | '-');
                // an exponent marker only counts when a digit or sign follows
                let exponent = matches!(c, 'e' | 'E')
                    && i > 0
                    && text[i + 1..]
                        .chars()
                        .next()
                        .is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+');
                !(numeric || exponent)
            })
            .map(|(i, _)| i)
            .unwrap_or(text.len());
        let (number, unit) = text.split_at(split);
        let number: f64 = number
            .trim()
            .parse()
            .map_err(|_| format!("`{text}` is not a {} (expected `<number> <unit>`)", D::NAME))?;
        let unit = unit.trim();
        if unit.is_empty() {
            return Err(format!(
                "`{text}` has no unit; {} values need an explicit unit such as `{}`",
                D::NAME,
                D::SI_UNIT
            ));
        }
        let value = D::to_si(number, unit)
            .ok_or_else(|| format!("unit `{unit}` in `{text}` is not a {} unit", D::NAME))?;
        if !value.is_finite() {
            return Err(format!("`{text}` is not finite"));
        }
        Ok(Self::from_si(value))
    }
}

impl<D: Dimension> Serialize for Quantity<D> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de, D: Dimension> Deserialize<'de> for Quantity<D> {
    fn deserialize<De: Deserializer<'de>>(deserializer: De) -> Result<Self, De::Error> {
        let text = String::deserialize(deserializer)?;
        Quantity::parse(&text).map_err(de::Error::custom)
    }
}

impl Quantity<Length> {
    pub fn micrometres(self) -> f64 {
        self.value * 1e6
    }
    pub fn nanometres(self) -> f64 {
        self.value * 1e9
    }
}

impl Quantity<Angle> {
    pub fn degrees(self) -> f64 {
        self.value.to_degrees()
    }
}
