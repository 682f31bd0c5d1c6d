//! Byte-size and bandwidth quantities with suffixed-string (de)serialization.
//!
//! Sizes use binary multiples (`1MB = 2^20 B`), rates use decimal multiples
//! (`1GB/s = 10^9 B/s`). Either may be flagged infinite with the string `"inf"`.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const KB: u64 = 1 << 10;
pub const MB: u64 = 1 << 20;
pub const GB: u64 = 1 << 30;
pub const TB: u64 = 1 << 40;

const SIZE_UNITS: [(&str, u64); 5] = [("TB", TB), ("GB", GB), ("MB", MB), ("KB", KB), ("B", 1)];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitParseError(pub String);

impl fmt::Display for UnitParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UnitParseError {}

fn is_inf(s: &str) -> bool {
    matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinite" | "infinity")
}

fn split_number(s: &str) -> (&str, &str) {
    let idx = s
        .find(|c: char| !(c.is_ascii_digit() || c == '.' || c == 'e' || c == 'E' || c == '-' || c == '+'))
        .unwrap_or(s.len());
    (s[..idx].trim(), s[idx..].trim())
}

/// A cache or memory capacity. `Infinite` models an unbounded structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Capacity {
    Finite(u64),
    Infinite,
}

impl Capacity {
    pub fn bytes(self) -> Option<u64> {
        match self {
            Capacity::Finite(b) => Some(b),
            Capacity::Infinite => None,
        }
    }

    pub fn mb(mb: u64) -> Self {
        Capacity::Finite(mb * MB)
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Capacity::Infinite)
    }

    /// Capacity in MB (binary), `f64::INFINITY` when unbounded.
    pub fn as_mb(self) -> f64 {
        match self {
            Capacity::Finite(b) => b as f64 / MB as f64,
            Capacity::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Capacity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Capacity::Infinite => f.write_str("inf"),
            Capacity::Finite(0) => f.write_str("0B"),
            Capacity::Finite(b) => {
                let (unit, mult) = SIZE_UNITS
                    .iter()
                    .find(|(_, m)| b % m == 0)
                    .copied()
                    .unwrap_or(("B", 1));
                write!(f, "{}{}", b / mult, unit)
            }
        }
    }
}

/// Parses `"60MB"`, `"1.5GB"`, `"4096"`, `"inf"`.
pub fn parse_size(s: &str) -> Result<Capacity, UnitParseError> {
    let s = s.trim();
    if is_inf(s) {
        return Ok(Capacity::Infinite);
    }
    let (num, unit) = split_number(s);
    let value: f64 = num
        .parse()
        .map_err(|_| UnitParseError(format!("invalid size `{s}`")))?;
    let mult = match unit.to_ascii_uppercase().as_str() {
        "" | "B" => 1,
        "K" | "KB" | "KIB" => KB,
        "M" | "MB" | "MIB" => MB,
        "G" | "GB" | "GIB" => GB,
        "T" | "TB" | "TIB" => TB,
        _ => return Err(UnitParseError(format!("unknown size unit in `{s}`"))),
    };
    let bytes = value * mult as f64;
    if !(bytes >= 0.0) || bytes.fract() != 0.0 {
        return Err(UnitParseError(format!("size `{s}` is not a whole number of bytes")));
    }
    Ok(Capacity::Finite(bytes as u64))
}

impl FromStr for Capacity {
    type Err = UnitParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_size(s)
    }
}

impl Serialize for Capacity {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Capacity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Capacity;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a byte count or a suffixed size string such as \"60MB\" or \"inf\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Capacity, E> {
                Ok(Capacity::Finite(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Capacity, E> {
                u64::try_from(v)
                    .map(Capacity::Finite)
                    .map_err(|_| E::custom("negative size"))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Capacity, E> {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(Capacity::Finite(v as u64))
                } else {
                    Err(E::custom("size must be a whole number of bytes"))
                }
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Capacity, E> {
                parse_size(v).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// A transfer rate in GB/s (decimal). May be `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Bandwidth(pub f64);

impl Bandwidth {
    pub const INFINITE: Bandwidth = Bandwidth(f64::INFINITY);

    pub fn gbps(v: f64) -> Self {
        Bandwidth(v)
    }

    pub fn tbps(v: f64) -> Self {
        Bandwidth(v * 1e3)
    }

    pub fn as_gbps(self) -> f64 {
        self.0
    }

    pub fn as_tbps(self) -> f64 {
        self.0 / 1e3
    }

    pub fn bytes_per_sec(self) -> f64 {
        self.0 * 1e9
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn scaled(self, factor: f64) -> Self {
        Bandwidth(self.0 * factor)
    }

    /// Seconds to move `bytes`; zero for an infinite link. `None` when the
    /// bandwidth is zero and there is something to move.
    pub fn transfer_time(self, bytes: u64) -> Option<f64> {
        if bytes == 0 || self.is_infinite() {
            Some(0.0)
        } else if self.0 <= 0.0 {
            None
        } else {
            Some(bytes as f64 / self.bytes_per_sec())
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}GB/s", self.0)
        }
    }
}

/// Parses `"2687GB/s"`, `"2.7TB/s"`, `"900"` (GB/s), `"inf"`.
pub fn parse_bandwidth(s: &str) -> Result<Bandwidth, UnitParseError> {
    let s = s.trim();
    if is_inf(s) {
        return Ok(Bandwidth::INFINITE);
    }
    let (num, unit) = split_number(s);
    let value: f64 = num
        .parse()
        .map_err(|_| UnitParseError(format!("invalid bandwidth `{s}`")))?;
    let unit = unit.to_ascii_uppercase();
    let unit = unit.trim_end_matches("/S").trim_end_matches("PS");
    let gbps = match unit {
        "" | "GB" | "G" => value,
        "TB" | "T" => value * 1e3,
        "MB" | "M" => value * 1e-3,
        "KB" | "K" => value * 1e-6,
        "B" => value * 1e-9,
        _ => return Err(UnitParseError(format!("unknown bandwidth unit in `{s}`"))),
    };
    if !(gbps >= 0.0) {
        return Err(UnitParseError(format!("bandwidth `{s}` is negative")));
    }
    Ok(Bandwidth(gbps))
}

impl FromStr for Bandwidth {
    type Err = UnitParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_bandwidth(s)
    }
}

impl Serialize for Bandwidth {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Bandwidth;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a GB/s number or a suffixed rate such as \"2.7TB/s\" or \"inf\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Bandwidth, E> {
                Ok(Bandwidth(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Bandwidth, E> {
                Ok(Bandwidth(v as f64))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Bandwidth, E> {
                Ok(Bandwidth(v))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Bandwidth, E> {
                parse_bandwidth(v).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

/// Serde adapter for plain `f64` fields that may hold `inf` (JSON has no infinity).
pub mod f64_or_inf {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str(s) if is_inf(&s) => Ok(f64::INFINITY),
            Raw::Str(s) => s.parse().map_err(de::Error::custom),
        }
    }
}

/// A normalized quantity whose denominator may be zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relative {
    Value(f64),
    /// The baseline moved no bytes, so the ratio is undefined.
    NoTraffic,
}

impl Relative {
    pub fn value(self) -> Option<f64> {
        match self {
            Relative::Value(v) => Some(v),
            Relative::NoTraffic => None,
        }
    }
}

impl fmt::Display for Relative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relative::Value(v) => write!(f, "{v:.4}"),
            Relative::NoTraffic => f.write_str("no-traffic"),
        }
    }
}

impl Serialize for Relative {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Relative::Value(v) => s.serialize_f64(*v),
            Relative::NoTraffic => s.serialize_str("no-traffic"),
        }
    }
}
