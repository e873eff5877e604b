use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TidalClass {
    Tidal,
    Speech,
    Noise,
}

impl TidalClass {
    pub const ALL: [TidalClass; 3] = [TidalClass::Tidal, TidalClass::Speech, TidalClass::Noise];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("class index {i} out of range")))
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TidalClass::Tidal => "tidal",
            TidalClass::Speech => "speech",
            TidalClass::Noise => "noise",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tidal" => Ok(TidalClass::Tidal),
            "speech" => Ok(TidalClass::Speech),
            "noise" => Ok(TidalClass::Noise),
            other => Err(Error::invalid(format!("unknown class {other:?}"))),
        }
    }
}

impl fmt::Display for TidalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VotedLabel {
    Tidal,
    Speech,
    Noise,
    Uncertain,
}

impl From<TidalClass> for VotedLabel {
    fn from(c: TidalClass) -> Self {
        match c {
            TidalClass::Tidal => VotedLabel::Tidal,
            TidalClass::Speech => VotedLabel::Speech,
            TidalClass::Noise => VotedLabel::Noise,
        }
    }
}

impl fmt::Display for VotedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VotedLabel::Tidal => "tidal",
            VotedLabel::Speech => "speech",
            VotedLabel::Noise => "noise",
            VotedLabel::Uncertain => "uncertain",
        })
    }
}

/// A class wins when it holds at least 9 in 10 windows (`10 * count >= 9 * n`).
pub const VOTE_NUMERATOR: usize = 9;
pub const VOTE_DENOMINATOR: usize = 10;

/// Voted label and the fraction of windows held by the most common class.
pub fn vote(labels: &[TidalClass]) -> (VotedLabel, f64) {
    let n = labels.len();
    if n == 0 {
        return (VotedLabel::Uncertain, 0.0);
    }
    let mut counts = [0usize; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    let (best, &count) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .unwrap();
    let fraction = count as f64 / n as f64;
    if VOTE_DENOMINATOR * count >= VOTE_NUMERATOR * n {
        (TidalClass::ALL[best].into(), fraction)
    } else {
        (VotedLabel::Uncertain, fraction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidalDecision {
    pub source: String,
    pub per_window_label: Vec<TidalClass>,
    pub voted_label: VotedLabel,
    pub vote_fraction: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use TidalClass::*;

    #[test]
    fn examples() {
        let mut l = vec![Tidal; 9];
        l.push(Noise);
        assert_eq!(vote(&l), (VotedLabel::Tidal, 0.9));
        let mut l = vec![Tidal; 8];
        l.extend([Noise, Noise]);
        assert_eq!(vote(&l).0, VotedLabel::Uncertain);
        assert_eq!(vote(&[Speech; 10]), (VotedLabel::Speech, 1.0));
        assert_eq!(vote(&[]).0, VotedLabel::Uncertain);
    }
}
