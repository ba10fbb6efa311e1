//! Demographic tags carried by activation maps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Ethnicity groups, labelled `C`, `E`, `I`, `A` (Caucasian, Asian, Indian,
/// African).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ethnicity {
    #[serde(rename = "C")]
    Caucasian,
    #[serde(rename = "E")]
    Asian,
    #[serde(rename = "I")]
    Indian,
    #[serde(rename = "A")]
    African,
    #[serde(rename = "unknown")]
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    #[serde(rename = "m")]
    Male,
    #[serde(rename = "f")]
    Female,
    #[serde(rename = "unknown")]
    Unknown,
}

impl Ethnicity {
    pub const KNOWN: [Ethnicity; 4] =
        [Ethnicity::Caucasian, Ethnicity::Asian, Ethnicity::Indian, Ethnicity::African];

    /// Archive byte code.
    pub fn code(self) -> u8 {
        match self {
            Ethnicity::Caucasian => 0,
            Ethnicity::Asian => 1,
            Ethnicity::Indian => 2,
            Ethnicity::African => 3,
            Ethnicity::Unknown => 255,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Ethnicity::Caucasian,
            1 => Ethnicity::Asian,
            2 => Ethnicity::Indian,
            3 => Ethnicity::African,
            255 => Ethnicity::Unknown,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Ethnicity::Caucasian => "C",
            Ethnicity::Asian => "E",
            Ethnicity::Indian => "I",
            Ethnicity::African => "A",
            Ethnicity::Unknown => "unknown",
        }
    }
}

impl Gender {
    pub fn code(self) -> u8 {
        match self {
            Gender::Male => 0,
            Gender::Female => 1,
            Gender::Unknown => 255,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Gender::Male,
            1 => Gender::Female,
            255 => Gender::Unknown,
            _ => return None,
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Gender::Male => "m",
            Gender::Female => "f",
            Gender::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Ethnicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Ethnicity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "C" => Ok(Ethnicity::Caucasian),
            "E" => Ok(Ethnicity::Asian),
            "I" => Ok(Ethnicity::Indian),
            "A" => Ok(Ethnicity::African),
            "unknown" | "" => Ok(Ethnicity::Unknown),
            other => Err(Error::InvalidArgument(format!("unknown ethnicity label {other:?}"))),
        }
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "m" => Ok(Gender::Male),
            "f" => Ok(Gender::Female),
            "unknown" | "" => Ok(Gender::Unknown),
            other => Err(Error::InvalidArgument(format!("unknown gender label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demographics {
    pub ethnicity: Ethnicity,
    pub gender: Gender,
}

impl Default for Demographics {
    fn default() -> Self {
        Self { ethnicity: Ethnicity::Unknown, gender: Gender::Unknown }
    }
}
