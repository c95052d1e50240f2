//! Serde adapter for reals that may legitimately be infinite (half-widths,
//! slope limits, unbounded quotients). JSON has no infinity literal, so
//! non-finite values are written as the strings `"inf"`, `"-inf"` and `"nan"`.

use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;
use std::fmt;

pub fn serialize<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    if value.is_finite() {
        serializer.serialize_f64(*value)
    } else if value.is_nan() {
        serializer.serialize_str("nan")
    } else if *value > 0.0 {
        serializer.serialize_str("inf")
    } else {
        serializer.serialize_str("-inf")
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<f64, D::Error> {
    struct ExtendedVisitor;

    impl Visitor<'_> for ExtendedVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }
    }

    deserializer.deserialize_any(ExtendedVisitor)
}

/// Formats a real for CSV output using the shortest representation that
/// parses back to the same bits.
pub fn fmt_real(value: f64) -> String {
    if value.is_nan() {
        "nan".to_owned()
    } else if value.is_infinite() {
        if value > 0.0 { "inf" } else { "-inf" }.to_owned()
    } else if value == 0.0 || (1e-5..1e16).contains(&value.abs()) {
        format!("{value}")
    } else {
        format!("{value:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[derive(serde::Serialize, serde::Deserialize)]
    struct Wrap {
        #[serde(with = "super")]
        v: f64,
    }

    #[test]
    fn infinite_values_roundtrip_as_strings() {
        let s = serde_json::to_string(&Wrap { v: f64::INFINITY }).unwrap();
        assert_eq!(s, r#"{"v":"inf"}"#);
        let back: Wrap = serde_json::from_str(&s).unwrap();
        assert_eq!(back.v, f64::INFINITY);
        let back: Wrap = serde_json::from_str(r#"{"v":2}"#).unwrap();
        assert_eq!(back.v, 2.0);
    }

    #[test]
    fn fmt_real_examples() {
        assert_eq!(fmt_real(0.0), "0");
        assert_eq!(fmt_real(1.0), "1");
        assert_eq!(fmt_real(0.5), "0.5");
        assert_eq!(fmt_real(f64::INFINITY), "inf");
        assert_eq!(fmt_real(std::f64::consts::FRAC_PI_2), "1.5707963267948966");
    }

    proptest! {
        #[test]
        fn fmt_real_roundtrips(v in proptest::num::f64::NORMAL) {
            let s = fmt_real(v);
            prop_assert_eq!(s.parse::<f64>().unwrap(), v);
        }
    }
}
