//! Serde helpers shared across report types.
//!
//! JSON numbers cannot carry IEEE infinities or NaN (serializers degrade
//! them to null), so scores that may legitimately be infinite round-trip
//! non-finite values through their string form ("inf", "-inf", "NaN")
//! while finite values stay numeric.

use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FloatRepr {
    Finite(f64),
    Tagged(String),
}

impl FloatRepr {
    fn pack(v: f64) -> FloatRepr {
        if v.is_finite() {
            FloatRepr::Finite(v)
        } else {
            FloatRepr::Tagged(format!("{v}"))
        }
    }

    fn unpack<E: serde::de::Error>(self) -> Result<f64, E> {
        match self {
            FloatRepr::Finite(v) => Ok(v),
            FloatRepr::Tagged(s) => s.parse::<f64>().map_err(E::custom),
        }
    }
}

/// For `Option<f64>` fields.
pub mod nonfinite_opt {
    use super::FloatRepr;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(value: &Option<f64>, ser: S) -> Result<S::Ok, S::Error> {
        value.map(FloatRepr::pack).serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<f64>, D::Error> {
        let repr: Option<FloatRepr> = Option::deserialize(de)?;
        repr.map(FloatRepr::unpack).transpose()
    }
}

/// For `Vec<f64>` fields.
pub mod nonfinite_vec {
    use super::FloatRepr;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        values
            .iter()
            .map(|&v| FloatRepr::pack(v))
            .collect::<Vec<_>>()
            .serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let repr: Vec<FloatRepr> = Vec::deserialize(de)?;
        repr.into_iter().map(FloatRepr::unpack).collect()
    }
}
