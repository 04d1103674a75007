//! Physical quantities written with an explicit unit suffix, e.g. `"11.9 us"`
//! or `"1.542 MHz"`. Stored in SI (seconds, hertz).

use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

const TIME_UNITS: [(&str, f64); 5] = [("ns", 1e-9), ("us", 1e-6), ("µs", 1e-6), ("ms", 1e-3), ("s", 1.0)];
const FREQ_UNITS: [(&str, f64); 4] = [("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3), ("Hz", 1.0)];

/// `units` must list longer suffixes before their tails ("ms" before "s").
fn parse_with(s: &str, units: &[(&str, f64)], what: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, factor) = units
        .iter()
        .find_map(|(u, f)| s.strip_suffix(u).map(|rest| (rest, *f)))
        .ok_or_else(|| {
            let known: Vec<&str> = units.iter().map(|(u, _)| *u).collect();
            format!("{what} `{s}` needs a unit suffix (one of {})", known.join(", "))
        })?;
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number `{}` in `{s}`", num.trim()))?;
    if !value.is_finite() {
        return Err(format!("{what} `{s}` is not finite"));
    }
    Ok(value * factor)
}

macro_rules! quantity {
    ($name:ident, $units:expr, $what:literal, $si:literal) => {
        #[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
        pub struct $name(pub f64);

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                parse_with(s, &$units, $what).map($name)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{:e} {}", self.0, $si)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(de::Error::custom)
            }
        }
    };
}

quantity!(Time, TIME_UNITS, "time", "s");
quantity!(Frequency, FREQ_UNITS, "frequency", "Hz");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_suffixes() {
        assert_eq!("11.9 us".parse::<Time>().unwrap().0, 11.9e-6);
        assert_eq!("3ms".parse::<Time>().unwrap().0, 3e-3);
        assert_eq!("2 µs".parse::<Time>().unwrap().0, 2e-6);
        assert_eq!("1.542 MHz".parse::<Frequency>().unwrap().0, 1.542e6);
        assert_eq!("3.98 kHz".parse::<Frequency>().unwrap().0, 3.98e3);
        assert_eq!("1.2e-3 s".parse::<Time>().unwrap().0, 1.2e-3);
    }

    #[test]
    fn rejects_missing_or_wrong_units() {
        assert!("466".parse::<Time>().is_err());
        assert!("466 MHz".parse::<Time>().is_err());
        assert!("1 us".parse::<Frequency>().is_err());
        assert!("abc us".parse::<Time>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for s in ["466 us", "13 us", "64.7 ms"] {
            let t: Time = s.parse().unwrap();
            assert_eq!(t.to_string().parse::<Time>().unwrap(), t);
        }
    }
}
