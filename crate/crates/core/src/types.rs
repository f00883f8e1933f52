// SPDX-License-Identifier: Apache-2.0

//! Signal and sample-rate descriptors shared by every layer.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::TypeError;

pub const MAX_WORD_LENGTH: u32 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signedness {
    Unsigned,
    Signed,
    Boolean,
}

/// Integer fixed-point type. `fraction_length` is always zero for now; the
/// field exists so serialized models keep a stable shape once fractional
/// types are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SignalType {
    pub signedness: Signedness,
    pub word_length: u32,
    #[serde(default)]
    pub fraction_length: u32,
}

impl SignalType {
    pub fn new(signedness: Signedness, word_length: u32) -> Result<Self, TypeError> {
        let ty = SignalType {
            signedness,
            word_length,
            fraction_length: 0,
        };
        ty.check()?;
        Ok(ty)
    }

    pub fn ufix(width: u32) -> Self {
        Self::new(Signedness::Unsigned, width).expect("ufix width out of range")
    }

    pub fn sfix(width: u32) -> Self {
        Self::new(Signedness::Signed, width).expect("sfix width out of range")
    }

    pub const fn boolean() -> Self {
        SignalType {
            signedness: Signedness::Boolean,
            word_length: 1,
            fraction_length: 0,
        }
    }

    pub fn check(&self) -> Result<(), TypeError> {
        if self.word_length == 0 || self.word_length > MAX_WORD_LENGTH {
            return Err(TypeError::WordLength(self.word_length));
        }
        if self.signedness == Signedness::Boolean && self.word_length != 1 {
            return Err(TypeError::BooleanWidth(self.word_length));
        }
        if self.fraction_length != 0 {
            return Err(TypeError::Fraction(self.fraction_length));
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.word_length
    }

    pub fn is_bool(&self) -> bool {
        self.signedness == Signedness::Boolean
    }

    pub fn is_signed(&self) -> bool {
        self.signedness == Signedness::Signed
    }

    pub fn is_unsigned(&self) -> bool {
        self.signedness == Signedness::Unsigned
    }

    /// Bit mask covering the word.
    pub fn mask(&self) -> u64 {
        mask(self.word_length)
    }

    /// Smallest representable value.
    pub fn min_value(&self) -> i128 {
        match self.signedness {
            Signedness::Signed => -(1i128 << (self.word_length - 1)),
            _ => 0,
        }
    }

    /// Largest representable value.
    pub fn max_value(&self) -> i128 {
        match self.signedness {
            Signedness::Signed => (1i128 << (self.word_length - 1)) - 1,
            _ => (1i128 << self.word_length) - 1,
        }
    }

    pub fn contains(&self, value: i128) -> bool {
        value >= self.min_value() && value <= self.max_value()
    }

    /// Two's-complement bit pattern of `value` wrapped into this type.
    pub fn wrap(&self, value: i128) -> u64 {
        (value as u64) & self.mask()
    }

    /// Numeric value of a stored bit pattern.
    pub fn interpret(&self, bits: u64) -> i128 {
        let bits = bits & self.mask();
        if self.is_signed() && (bits >> (self.word_length - 1)) & 1 == 1 {
            bits as i128 - (1i128 << self.word_length)
        } else {
            bits as i128
        }
    }

    pub fn with_width(&self, width: u32) -> Result<Self, TypeError> {
        SignalType::new(self.signedness, width)
    }
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

impl fmt::Display for SignalType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.signedness {
            Signedness::Boolean => write!(f, "boolean"),
            Signedness::Unsigned => write!(f, "ufix{}", self.word_length),
            Signedness::Signed => write!(f, "sfix{}", self.word_length),
        }
    }
}

impl FromStr for SignalType {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "boolean" {
            return Ok(SignalType::boolean());
        }
        let (signedness, digits) = if let Some(rest) = s.strip_prefix("ufix") {
            (Signedness::Unsigned, rest)
        } else if let Some(rest) = s.strip_prefix("sfix") {
            (Signedness::Signed, rest)
        } else {
            return Err(TypeError::Syntax(s.to_string()));
        };
        let width = digits
            .parse()
            .map_err(|_| TypeError::Syntax(s.to_string()))?;
        SignalType::new(signedness, width)
    }
}

/// Sample period in base clock ticks, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPeriod", into = "RawPeriod")]
pub struct SamplePeriod {
    num: u64,
    den: u64,
}

#[derive(Serialize, Deserialize)]
struct RawPeriod {
    numerator: u64,
    denominator: u64,
}

impl TryFrom<RawPeriod> for SamplePeriod {
    type Error = TypeError;

    fn try_from(raw: RawPeriod) -> Result<Self, Self::Error> {
        SamplePeriod::new(raw.numerator, raw.denominator)
    }
}

impl From<SamplePeriod> for RawPeriod {
    fn from(p: SamplePeriod) -> Self {
        RawPeriod {
            numerator: p.num,
            denominator: p.den,
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl SamplePeriod {
    pub const BASE: SamplePeriod = SamplePeriod { num: 1, den: 1 };

    pub fn new(numerator: u64, denominator: u64) -> Result<Self, TypeError> {
        if numerator == 0 || denominator == 0 {
            return Err(TypeError::Period(numerator, denominator));
        }
        let g = gcd(numerator, denominator);
        Ok(SamplePeriod {
            num: numerator / g,
            den: denominator / g,
        })
    }

    pub fn ticks(n: u64) -> Self {
        Self::new(n, 1).expect("period must be positive")
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }
}

impl Default for SamplePeriod {
    fn default() -> Self {
        SamplePeriod::BASE
    }
}

impl fmt::Display for SamplePeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ufix_and_sfix_names_round_trip() {
        for s in ["ufix4", "ufix10", "sfix8", "boolean", "ufix64"] {
            let ty: SignalType = s.parse().unwrap();
            assert_eq!(ty.to_string(), s);
        }
        assert!("ufix0".parse::<SignalType>().is_err());
        assert!("sfix65".parse::<SignalType>().is_err());
        assert!("fix8".parse::<SignalType>().is_err());
    }

    #[test]
    fn boolean_must_be_one_bit() {
        assert!(SignalType::new(Signedness::Boolean, 2).is_err());
        assert_eq!(SignalType::boolean().width(), 1);
    }

    #[test]
    fn ranges_and_wrapping() {
        let s8 = SignalType::sfix(8);
        assert_eq!(s8.min_value(), -128);
        assert_eq!(s8.max_value(), 127);
        assert_eq!(s8.wrap(-1), 0xff);
        assert_eq!(s8.interpret(0x80), -128);
        let u64t = SignalType::ufix(64);
        assert_eq!(u64t.max_value(), u64::MAX as i128);
        assert_eq!(u64t.wrap(-1), u64::MAX);
        let s64 = SignalType::sfix(64);
        assert_eq!(s64.interpret(u64::MAX), -1);
    }

    #[test]
    fn period_is_reduced() {
        let p = SamplePeriod::new(4, 6).unwrap();
        assert_eq!((p.numerator(), p.denominator()), (2, 3));
        assert!(SamplePeriod::new(0, 1).is_err());
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"{"numerator":2,"denominator":3}"#);
        let back: SamplePeriod =
            serde_json::from_str(r#"{"numerator":6,"denominator":9}"#).unwrap();
        assert_eq!(back, p);
    }
}
