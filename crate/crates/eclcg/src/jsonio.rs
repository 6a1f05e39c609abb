//! Serde helpers: every integer crosses the JSON boundary as a decimal
//! string, so arbitrary magnitudes survive parsers that only have f64.

use num_bigint::BigInt;
use serde::{Deserialize, Deserializer, Serializer};

/// `#[serde(with = "jsonio::dec")]` for a `BigInt` field.
pub mod dec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &BigInt, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigInt, D::Error> {
        let s = String::deserialize(d)?;
        s.trim()
            .parse::<BigInt>()
            .map_err(|e| serde::de::Error::custom(format!("bad integer {s:?}: {e}")))
    }
}

/// `#[serde(with = "jsonio::dec_vec")]` for a `Vec<BigInt>` field.
pub mod dec_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_str_radix(10)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        let strings = Vec::<String>::deserialize(d)?;
        strings
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<BigInt>()
                    .map_err(|e| serde::de::Error::custom(format!("bad integer {s:?}: {e}")))
            })
            .collect()
    }
}

/// `#[serde(with = "jsonio::dec_opt")]` for an `Option<BigInt>` field.
pub mod dec_opt {
    use super::*;
    use serde::Serialize;

    pub fn serialize<S: Serializer>(v: &Option<BigInt>, s: S) -> Result<S::Ok, S::Error> {
        v.as_ref().map(|x| x.to_str_radix(10)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BigInt>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| {
            s.trim()
                .parse::<BigInt>()
                .map_err(|e| serde::de::Error::custom(format!("bad integer {s:?}: {e}")))
        })
        .transpose()
    }
}
