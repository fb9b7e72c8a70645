use std::collections::HashMap;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use super::SpectralError;
use crate::tensor::{CurvatureTensor, TensorError};

const BUILTIN: &str = include_str!("../../data/registry.json");

/// First positive Laplace eigenvalue, or `"unknown"` in registry files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda1 {
    Known(f64),
    Unknown,
}

impl Serialize for Lambda1 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Lambda1::Known(v) => s.serialize_f64(*v),
            Lambda1::Unknown => s.serialize_str("unknown"),
        }
    }
}

impl<'de> Deserialize<'de> for Lambda1 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Lambda1;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"unknown\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Lambda1, E> {
                Ok(Lambda1::Known(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Lambda1, E> {
                Ok(Lambda1::Known(v as f64))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Lambda1, E> {
                Ok(Lambda1::Known(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Lambda1, E> {
                if v == "unknown" {
                    Ok(Lambda1::Unknown)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// Pointwise curvature model of a homogeneous space (the same at every point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CurvatureModel {
    Constant { c0: f64 },
}

impl CurvatureModel {
    pub fn tensor(&self, n: usize) -> Result<CurvatureTensor, TensorError> {
        match *self {
            CurvatureModel::Constant { c0 } => CurvatureTensor::constant_curvature(n, c0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covering {
    /// Name of the covered space.
    pub space: String,
    pub sheets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDescriptor {
    pub name: String,
    pub n: usize,
    pub curvature: CurvatureModel,
    pub lambda1: Lambda1,
    /// Whether the isotropy action is irreducible. Trusted metadata.
    pub irreducible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covers: Option<Covering>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub source: String,
}

impl SpaceDescriptor {
    pub fn curvature_tensor(&self) -> Result<CurvatureTensor, TensorError> {
        self.curvature.tensor(self.n)
    }

    /// True if this space is registered as covering `base`.
    pub fn covers(&self, base: &SpaceDescriptor) -> bool {
        self.covers.as_ref().is_some_and(|c| c.space == base.name)
    }
}

/// Registered λ₁ of `s`.
pub fn lambda1_closed_form(s: &SpaceDescriptor) -> Result<f64, SpectralError> {
    match s.lambda1 {
        Lambda1::Known(v) => Ok(v),
        Lambda1::Unknown => Err(SpectralError::UnknownSpectrum(s.name.clone())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    spaces: Vec<SpaceDescriptor>,
    index: HashMap<String, usize>,
}

impl Registry {
    /// Round spheres and real projective spaces of curvature one for `n ≤ 16`,
    /// and flat square tori of side 2π.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN).expect("builtin registry is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SpectralError> {
        let spaces: Vec<SpaceDescriptor> =
            serde_json::from_str(text).map_err(|e| SpectralError::Parse(e.to_string()))?;
        Self::new(spaces)
    }

    pub fn new(spaces: Vec<SpaceDescriptor>) -> Result<Self, SpectralError> {
        let mut index = HashMap::new();
        for (i, s) in spaces.iter().enumerate() {
            if s.n < 2 {
                return Err(SpectralError::InvalidDescriptor(format!("{}: n < 2", s.name)));
            }
            if let Lambda1::Known(v) = s.lambda1 {
                if !(v > 0.0) {
                    return Err(SpectralError::InvalidDescriptor(format!(
                        "{}: lambda1 must be positive",
                        s.name
                    )));
                }
            }
            if index.insert(s.name.clone(), i).is_some() {
                return Err(SpectralError::InvalidDescriptor(format!("{}: duplicate name", s.name)));
            }
        }
        for s in &spaces {
            if let Some(c) = &s.covers {
                let Some(&j) = index.get(&c.space) else {
                    return Err(SpectralError::InvalidDescriptor(format!(
                        "{} covers unregistered {}",
                        s.name, c.space
                    )));
                };
                if spaces[j].n != s.n || c.sheets < 1 {
                    return Err(SpectralError::InvalidDescriptor(format!(
                        "{} -> {}: invalid covering",
                        s.name, c.space
                    )));
                }
            }
        }
        Ok(Self { spaces, index })
    }

    pub fn get(&self, name: &str) -> Result<&SpaceDescriptor, SpectralError> {
        self.index
            .get(name)
            .map(|&i| &self.spaces[i])
            .ok_or_else(|| SpectralError::UnknownSpace(name.to_string()))
    }

    pub fn spaces(&self) -> &[SpaceDescriptor] {
        &self.spaces
    }

    /// All registered `(cover, base)` pairs.
    pub fn covering_pairs(&self) -> Vec<(&SpaceDescriptor, &SpaceDescriptor)> {
        self.spaces
            .iter()
            .filter_map(|s| {
                let c = s.covers.as_ref()?;
                Some((s, &self.spaces[self.index[&c.space]]))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spaces).expect("descriptors serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let r = Registry::builtin();
        for n in 2..=16 {
            let s = r.get(&format!("sphere:{n}")).unwrap();
            assert_eq!(lambda1_closed_form(s).unwrap(), n as f64);
            assert!(s.irreducible);
            let p = r.get(&format!("rp:{n}")).unwrap();
            assert_eq!(lambda1_closed_form(p).unwrap(), 2.0 * (n as f64 + 1.0));
            assert!(s.covers(p));
            assert_eq!(s.covers.as_ref().unwrap().sheets, 2);
            assert!(!p.covers(s));
        }
        assert_eq!(lambda1_closed_form(r.get("sphere:4").unwrap()).unwrap(), 4.0);
        assert_eq!(lambda1_closed_form(r.get("rp:4").unwrap()).unwrap(), 10.0);
        let torus = r.get("flat-torus:2").unwrap();
        assert_eq!(lambda1_closed_form(torus).unwrap(), 1.0);
        assert!(!torus.irreducible);
        assert_eq!(r.covering_pairs().len(), 15);
    }

    #[test]
    fn unknown_spectrum_and_lookup_errors() {
        let text = r#"[{"name":"x","n":3,"curvature":{"model":"constant","c0":1.0},
                        "lambda1":"unknown","irreducible":true}]"#;
        let r = Registry::from_json(text).unwrap();
        assert!(matches!(
            lambda1_closed_form(r.get("x").unwrap()),
            Err(SpectralError::UnknownSpectrum(_))
        ));
        assert!(matches!(r.get("y"), Err(SpectralError::UnknownSpace(_))));
    }

    #[test]
    fn invalid_registries_are_rejected() {
        let neg = r#"[{"name":"x","n":3,"curvature":{"model":"constant","c0":1.0},
                       "lambda1":-1,"irreducible":true}]"#;
        assert!(matches!(
            Registry::from_json(neg),
            Err(SpectralError::InvalidDescriptor(_))
        ));
        let dangling = r#"[{"name":"x","n":3,"curvature":{"model":"constant","c0":1.0},
                            "lambda1":3,"irreducible":true,"covers":{"space":"y","sheets":2}}]"#;
        assert!(matches!(
            Registry::from_json(dangling),
            Err(SpectralError::InvalidDescriptor(_))
        ));
    }

    #[test]
    fn registry_json_round_trip() {
        let r = Registry::builtin();
        let back = Registry::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
