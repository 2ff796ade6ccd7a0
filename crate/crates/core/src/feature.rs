//! Feature vectors shared by all moment families.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Moment family that produced a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Exact Legendre moments.
    Elm,
    /// Zernike moment magnitudes.
    Zm,
    /// Hu moment invariants.
    Mi,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mi, Method::Zm, Method::Elm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Elm => "elm",
            Method::Zm => "zm",
            Method::Mi => "mi",
        }
    }

    /// Tag byte used by the binary database format.
    pub fn tag(self) -> u8 {
        match self {
            Method::Elm => 0,
            Method::Zm => 1,
            Method::Mi => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Method::Elm),
            1 => Some(Method::Zm),
            2 => Some(Method::Mi),
            _ => None,
        }
    }

    /// Feature length produced at `order`.
    pub fn dim(self, order: usize) -> usize {
        match self {
            Method::Elm => crate::legendre::elm_feature_count(order),
            Method::Zm => crate::zernike::zm_feature_count(order),
            Method::Mi => 7,
        }
    }

    /// Hu invariants have no order; everything is stored with order 0.
    pub fn effective_order(self, order: usize) -> usize {
        match self {
            Method::Mi => 0,
            _ => order,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "elm" => Ok(Method::Elm),
            "zm" => Ok(Method::Zm),
            "mi" => Ok(Method::Mi),
            other => Err(Error::InvalidArgument(format!(
                "unknown method {other:?} (expected elm, zm or mi)"
            ))),
        }
    }
}

/// Ordered list of moment features with the metadata needed to compare them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub method: Method,
    pub order: u16,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(method: Method, order: usize, values: Vec<f64>) -> Self {
        Self {
            method,
            order: method.effective_order(order) as u16,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}
