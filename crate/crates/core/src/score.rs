//! Metric identities, orientations and the scored result type.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    LowerBetter,
    HigherBetter,
}

impl Orientation {
    /// Sign that turns a rank correlation against ground-truth degradation into "+1 is perfect".
    pub fn sign(self) -> f64 {
        match self {
            Orientation::LowerBetter => 1.0,
            Orientation::HigherBetter => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Orientation::LowerBetter => Orientation::HigherBetter,
            Orientation::HigherBetter => Orientation::LowerBetter,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::LowerBetter => "lower-better",
            Orientation::HigherBetter => "higher-better",
        }
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "lower-better" | "lower" => Ok(Orientation::LowerBetter),
            "higher-better" | "higher" => Ok(Orientation::HigherBetter),
            other => Err(Error::Domain(format!("unknown orientation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Fad,
    Mmd,
    Mad,
    Mauve,
    Precision,
    Recall,
    Density,
    Coverage,
}

impl Metric {
    pub const ALL: [Metric; 8] = [
        Metric::Fad,
        Metric::Mmd,
        Metric::Mad,
        Metric::Mauve,
        Metric::Precision,
        Metric::Recall,
        Metric::Density,
        Metric::Coverage,
    ];

    /// The fixed orientation table.
    pub fn orientation(self) -> Orientation {
        match self {
            Metric::Fad | Metric::Mmd | Metric::Mad => Orientation::LowerBetter,
            Metric::Mauve
            | Metric::Precision
            | Metric::Recall
            | Metric::Density
            | Metric::Coverage => Orientation::HigherBetter,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Fad => "fad",
            Metric::Mmd => "mmd",
            Metric::Mad => "mad",
            Metric::Mauve => "mauve",
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Density => "density",
            Metric::Coverage => "coverage",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Metric::Mad | Metric::Mauve)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown metric '{s}'")))
    }
}

/// A metric value together with everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceScore {
    pub metric: Metric,
    pub value: f64,
    pub orientation: Orientation,
    pub config: serde_json::Value,
    pub n_ref: usize,
    pub n_gen: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl DivergenceScore {
    pub(crate) fn new(
        metric: Metric,
        value: f64,
        config: serde_json::Value,
        n_ref: usize,
        n_gen: usize,
    ) -> Self {
        DivergenceScore {
            metric,
            value,
            orientation: metric.orientation(),
            config,
            n_ref,
            n_gen,
            flags: Vec::new(),
            wall_time_s: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_table() {
        for m in [Metric::Fad, Metric::Mmd, Metric::Mad] {
            assert_eq!(m.orientation(), Orientation::LowerBetter);
        }
        for m in [Metric::Precision, Metric::Recall, Metric::Density, Metric::Coverage] {
            assert_eq!(m.orientation(), Orientation::HigherBetter);
        }
        for m in Metric::ALL {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
        }
    }
}
