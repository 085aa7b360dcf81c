//! Elementwise fusion of a (reference, probe) embedding pair.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FusionScheme {
    /// `A - B`
    Sub,
    /// `(A - B)^2`
    Sub2,
    /// `|A - B|`
    Abs,
}

impl FusionScheme {
    pub const ALL: [FusionScheme; 3] = [FusionScheme::Sub, FusionScheme::Sub2, FusionScheme::Abs];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionScheme::Sub => "sub",
            FusionScheme::Sub2 => "sub2",
            FusionScheme::Abs => "abs",
        }
    }

    pub(crate) fn tag(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.tag() == tag)
    }

    /// Fuses into a caller-provided buffer of the same length.
    pub fn apply_into(self, a: &[f64], b: &[f64], out: &mut [f64]) {
        for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
            let d = x - y;
            *o = match self {
                FusionScheme::Sub => d,
                FusionScheme::Sub2 => d * d,
                FusionScheme::Abs => d.abs(),
            };
        }
    }
}

impl FromStr for FusionScheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sub" => Ok(FusionScheme::Sub),
            "sub2" => Ok(FusionScheme::Sub2),
            "abs" => Ok(FusionScheme::Abs),
            _ => Err(format!("unknown fusion scheme `{s}` (expected sub, sub2 or abs)")),
        }
    }
}

impl TryFrom<String> for FusionScheme {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FusionScheme> for String {
    fn from(s: FusionScheme) -> Self {
        s.as_str().to_string()
    }
}

impl fmt::Display for FusionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedVector {
    pub values: Vec<f64>,
    pub scheme: FusionScheme,
}

/// Fuses reference embedding `a` with probe embedding `b`.
pub fn fuse(a: &[f64], b: &[f64], scheme: FusionScheme) -> Result<FusedVector> {
    check_dim(a.len(), b.len(), || "fusion operands".to_string())?;
    check_finite(a, || "reference embedding".to_string())?;
    check_finite(b, || "probe embedding".to_string())?;
    let mut values = vec![0.0; a.len()];
    scheme.apply_into(a, b, &mut values);
    Ok(FusedVector { values, scheme })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example() {
        let a = [1.0, -2.0, 0.5];
        let b = [0.0, 1.0, 0.5];
        assert_eq!(fuse(&a, &b, FusionScheme::Sub).unwrap().values, [1.0, -3.0, 0.0]);
        assert_eq!(fuse(&a, &b, FusionScheme::Sub2).unwrap().values, [1.0, 9.0, 0.0]);
        assert_eq!(fuse(&a, &b, FusionScheme::Abs).unwrap().values, [1.0, 3.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(fuse(&[1.0], &[1.0, 2.0], FusionScheme::Sub).is_err());
        assert!(fuse(&[f64::INFINITY], &[1.0], FusionScheme::Abs).is_err());
    }

    #[test]
    fn scheme_names_case_insensitive() {
        assert_eq!("SUB2".parse::<FusionScheme>().unwrap(), FusionScheme::Sub2);
        assert_eq!("Abs".parse::<FusionScheme>().unwrap(), FusionScheme::Abs);
        assert!("cat".parse::<FusionScheme>().is_err());
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..64).prop_flat_map(|d| {
            (
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            )
        })
    }

    proptest! {
        #[test]
        fn identities((a, b) in pair()) {
            let sub = fuse(&a, &b, FusionScheme::Sub).unwrap().values;
            let rev = fuse(&b, &a, FusionScheme::Sub).unwrap().values;
            // exact IEEE equality; +0 and -0 compare equal where a_i == b_i
            for (x, y) in sub.iter().zip(&rev) {
                prop_assert!(*x == -*y);
            }
            for s in [FusionScheme::Sub2, FusionScheme::Abs] {
                prop_assert_eq!(fuse(&a, &b, s).unwrap().values, fuse(&b, &a, s).unwrap().values);
            }
            let sq: Vec<f64> = sub.iter().map(|d| d * d).collect();
            let ab: Vec<f64> = sub.iter().map(|d| d.abs()).collect();
            prop_assert_eq!(fuse(&a, &b, FusionScheme::Sub2).unwrap().values, sq);
            prop_assert_eq!(fuse(&a, &b, FusionScheme::Abs).unwrap().values, ab);
            for s in FusionScheme::ALL {
                prop_assert!(fuse(&a, &a, s).unwrap().values.iter().all(|&v| v == 0.0));
            }
        }
    }
}
