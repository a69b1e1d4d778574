//! JSON encoding for floats that may be infinite (diverged fitness).
//!
//! Finite values are written as numbers, `±inf` as the strings `"inf"` /
//! `"-inf"`. NaN is rejected.

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Text(String),
}

fn to_repr(v: f64) -> Result<Repr, String> {
    if v.is_finite() {
        Ok(Repr::Num(v))
    } else if v == f64::INFINITY {
        Ok(Repr::Text("inf".into()))
    } else if v == f64::NEG_INFINITY {
        Ok(Repr::Text("-inf".into()))
    } else {
        Err("NaN cannot be serialized".into())
    }
}

fn from_repr(r: Repr) -> Result<f64, String> {
    match r {
        Repr::Num(v) => Ok(v),
        Repr::Text(s) if s == "inf" => Ok(f64::INFINITY),
        Repr::Text(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        Repr::Text(s) => Err(format!("expected a number, \"inf\" or \"-inf\", found {s:?}")),
    }
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    to_repr(*v).map_err(serde::ser::Error::custom)?.serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    from_repr(Repr::deserialize(d)?).map_err(de::Error::custom)
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => to_repr(*v).map_err(serde::ser::Error::custom)?.serialize(s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<Repr>::deserialize(d)?
            .map(from_repr)
            .transpose()
            .map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
    struct T {
        #[serde(with = "super")]
        a: f64,
        #[serde(with = "super::option")]
        b: Option<f64>,
    }

    #[test]
    fn round_trip() {
        for t in [
            T { a: 0.1, b: None },
            T {
                a: f64::INFINITY,
                b: Some(f64::NEG_INFINITY),
            },
            T {
                a: -3.5e-300,
                b: Some(1.0 / 3.0),
            },
        ] {
            let s = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<T>(&s).unwrap(), t);
        }
        assert_eq!(
            serde_json::to_string(&T {
                a: f64::INFINITY,
                b: None
            })
            .unwrap(),
            r#"{"a":"inf","b":null}"#
        );
        assert!(serde_json::from_str::<T>(r#"{"a":"nan","b":null}"#).is_err());
    }
}
