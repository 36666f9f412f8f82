//! Physical constants and unit handling.
//!
//! Rates are carried internally as angular frequencies (rad/s). Text input
//! uses SI-prefixed suffixes, e.g. `"1790 fF"`, `"0.995 nH"`, `"-74.8 dBm"`.
//! Josephson and charging energies are written as frequencies `E/h`
//! (`"1.00 THz"`), matching how circuit tables usually quote them.

use std::f64::consts::PI;

/// Elementary charge (C), exact SI value.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant (J s), exact SI value.
pub const H_PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant (J s).
pub const HBAR: f64 = H_PLANCK / (2.0 * PI);
/// Reduced flux quantum hbar / 2e (Wb).
pub const PHI0_REDUCED: f64 = HBAR / (2.0 * E_CHARGE);

pub const TWO_PI: f64 = 2.0 * PI;

/// Power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Power ratio to decibels.
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Angular frequency (rad/s) to ordinary frequency in Hz.
pub fn to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}

pub fn to_mhz(omega: f64) -> f64 {
    omega / TWO_PI / 1e6
}

/// Energy quoted as a frequency `E/h` (Hz) to joules.
pub fn energy_from_hz(f: f64) -> f64 {
    H_PLANCK * f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Capacitance,
    Inductance,
    Resistance,
    Power,
    /// Energy written as `E/h` in Hz.
    Energy,
    /// Angular frequency; `Hz`-family input is multiplied by 2 pi, `rad/s` taken as is.
    AngularFrequency,
}

impl Dimension {
    /// Canonical SI suffix used when writing values back out.
    pub fn si_suffix(self) -> &'static str {
        match self {
            Dimension::Capacitance => "F",
            Dimension::Inductance => "H",
            Dimension::Resistance => "ohm",
            Dimension::Power => "W",
            Dimension::Energy => "J",
            Dimension::AngularFrequency => "rad/s",
        }
    }
}

fn prefix_scale(p: &str) -> Option<f64> {
    Some(match p {
        "" => 1.0,
        "f" => 1e-15,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" | "µ" | "μ" => 1e-6,
        "m" => 1e-3,
        "k" => 1e3,
        "M" => 1e6,
        "G" => 1e9,
        "T" => 1e12,
        _ => return None,
    })
}

/// Parse `"<number> <suffix>"` into base SI units for the given dimension.
///
/// The returned value is in farad, henry, ohm, watt, joule, or rad/s.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && text[i + 1..].chars().next().is_some_and(|n| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(text.len());
    let (num, suffix) = text.split_at(split);
    let value: f64 = num.trim().parse().map_err(|_| format!("cannot parse number in `{text}`"))?;
    if !value.is_finite() {
        return Err(format!("non-finite value in `{text}`"));
    }
    let suffix = suffix.trim();
    if suffix.is_empty() {
        return Err(format!("missing unit suffix in `{text}`"));
    }

    let with_unit = |units: &[&str]| -> Option<f64> {
        for unit in units {
            if let Some(p) = suffix.strip_suffix(unit) {
                if let Some(s) = prefix_scale(p) {
                    return Some(s);
                }
            }
        }
        None
    };

    let bad = || format!("unit `{suffix}` is not valid for {dim:?}");
    match dim {
        Dimension::Capacitance => with_unit(&["F"]).map(|s| value * s).ok_or_else(bad),
        Dimension::Inductance => with_unit(&["H"]).map(|s| value * s).ok_or_else(bad),
        Dimension::Resistance => with_unit(&["ohm", "Ohm", "Ω"]).map(|s| value * s).ok_or_else(bad),
        Dimension::Power => {
            if suffix == "dBm" {
                Ok(dbm_to_watts(value))
            } else {
                with_unit(&["W"]).map(|s| value * s).ok_or_else(bad)
            }
        }
        Dimension::Energy => {
            if let Some(s) = with_unit(&["Hz"]) {
                Ok(energy_from_hz(value * s))
            } else if suffix == "J" {
                Ok(value)
            } else {
                Err(bad())
            }
        }
        Dimension::AngularFrequency => {
            if suffix == "rad/s" {
                Ok(value)
            } else {
                with_unit(&["Hz"]).map(|s| TWO_PI * value * s).ok_or_else(bad)
            }
        }
    }
}

/// Format a base-SI value so that [`parse_quantity`] recovers it bit-exactly.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{value:.16e} {}", dim.si_suffix())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_prefixed_units() {
        let c = parse_quantity("1790 fF", Dimension::Capacitance).unwrap();
        assert!((c - 1.79e-12).abs() < 1e-24);
        let l = parse_quantity("0.995nH", Dimension::Inductance).unwrap();
        assert!((l - 0.995e-9).abs() < 1e-21);
        let w = parse_quantity("8 GHz", Dimension::AngularFrequency).unwrap();
        assert!((w - TWO_PI * 8e9).abs() < 1e-3);
        let z = parse_quantity("50 ohm", Dimension::Resistance).unwrap();
        assert_eq!(z, 50.0);
        let e = parse_quantity("1.00 THz", Dimension::Energy).unwrap();
        assert!((e / H_PLANCK - 1e12).abs() < 1.0);
        let x = parse_quantity("1.5e-3 F", Dimension::Capacitance).unwrap();
        assert_eq!(x, 1.5e-3);
    }

    #[test]
    fn dbm_conversion() {
        let p = parse_quantity("-74.8 dBm", Dimension::Power).unwrap();
        assert!((p - 10f64.powf(-10.48)).abs() < 1e-20);
        assert!((watts_to_dbm(dbm_to_watts(-55.8)) + 55.8).abs() < 1e-12);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn malformed_suffixes_are_rejected() {
        assert!(parse_quantity("1790 fX", Dimension::Capacitance).is_err());
        assert!(parse_quantity("1790", Dimension::Capacitance).is_err());
        assert!(parse_quantity("12 pH", Dimension::Capacitance).is_err());
        assert!(parse_quantity("abc fF", Dimension::Capacitance).is_err());
        assert!(parse_quantity("3 qF", Dimension::Capacitance).is_err());
    }

    #[test]
    fn formatted_quantities_round_trip() {
        for &(v, d) in &[
            (1.79e-12, Dimension::Capacitance),
            (0.1234567890123e-9, Dimension::Inductance),
            (2.0 * PI * 8.56e9, Dimension::AngularFrequency),
            (3.3e-11, Dimension::Power),
        ] {
            assert_eq!(parse_quantity(&format_quantity(v, d), d).unwrap(), v);
        }
    }
}
