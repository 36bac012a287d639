//! Training scenarios: which molecules are treated as functional and which
//! as nonfunctional.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sploc::synthgen::{code_of_packet_id, enumerate_codes, MoleculeCode};
use sploc::{DataPacket, Label, SplocError};

/// Functional molecules unless overridden.
pub const DEFAULT_FUNCTIONAL: &str = "EbL";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioName {
    FbF,
    #[serde(rename = "abF")]
    AbF,
    Fbc,
    All,
    #[serde(rename = "custom")]
    Custom,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::FbF => "FbF",
            ScenarioName::AbF => "abF",
            ScenarioName::Fbc => "Fbc",
            ScenarioName::All => "All",
            ScenarioName::Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "FbF" => Ok(ScenarioName::FbF),
            "abF" => Ok(ScenarioName::AbF),
            "Fbc" => Ok(ScenarioName::Fbc),
            "All" | "all" => Ok(ScenarioName::All),
            "custom" => Ok(ScenarioName::Custom),
            _ => Err(format!("unknown scenario {s:?}; expected one of FbF, abF, Fbc, All, custom")),
        }
    }
}

/// Resolved scenario: explicit functional and nonfunctional code patterns.
/// An empty pattern list on both sides means "use the manifest labels".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: ScenarioName,
    pub functional: Vec<String>,
    pub nonfunctional: Vec<String>,
}

fn check_pattern(p: &str) -> Result<(), SplocError> {
    let ok = p.chars().count() == 3
        && p.chars().zip(["EF", "FLST", "FLT"]).all(|(c, allowed)| {
            c == '*' || c.is_ascii_lowercase() || allowed.contains(c)
        });
    if ok {
        Ok(())
    } else {
        Err(SplocError::Parse {
            what: "molecule pattern",
            text: p.to_string(),
            reason: "expected three letters: domain 1 in {E,F}, domain 2 in {F,L,S,T}, domain 3 in {F,L,T}; lowercase or * for any".into(),
        })
    }
}

fn expand(patterns: &[String]) -> Vec<MoleculeCode> {
    enumerate_codes()
        .into_iter()
        .filter(|c| patterns.iter().any(|p| c.matches(p)))
        .collect()
}

impl Scenario {
    pub fn new(name: ScenarioName, functional: Option<Vec<String>>, nonfunctional: Option<Vec<String>>) -> Result<Self, SplocError> {
        let functional = functional.unwrap_or_else(|| match name {
            ScenarioName::Custom if nonfunctional.is_none() => Vec::new(),
            _ => vec![DEFAULT_FUNCTIONAL.to_string()],
        });
        let nonfunctional = match (name, nonfunctional) {
            (_, Some(n)) if name == ScenarioName::Custom => n,
            (ScenarioName::Custom, None) => {
                if !functional.is_empty() {
                    return Err(SplocError::invalid(
                        "scenario custom with --functional also needs --nonfunctional",
                    ));
                }
                Vec::new()
            }
            (_, Some(_)) => {
                return Err(SplocError::invalid(format!(
                    "--nonfunctional is only accepted with --scenario custom (got {name})"
                )))
            }
            (ScenarioName::FbF, None) => vec!["FbF".into()],
            (ScenarioName::AbF, None) => vec!["abF".into()],
            (ScenarioName::Fbc, None) => vec!["Fbc".into()],
            (ScenarioName::All, None) => {
                let f = expand(&functional);
                enumerate_codes()
                    .into_iter()
                    .filter(|c| !f.contains(c))
                    .map(|c| c.to_string())
                    .collect()
            }
        };
        for p in functional.iter().chain(&nonfunctional) {
            check_pattern(p)?;
        }
        let s = Scenario {
            name,
            functional,
            nonfunctional,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn uses_manifest_labels(&self) -> bool {
        self.functional.is_empty() && self.nonfunctional.is_empty()
    }

    pub fn functional_codes(&self) -> Vec<MoleculeCode> {
        expand(&self.functional)
    }

    pub fn nonfunctional_codes(&self) -> Vec<MoleculeCode> {
        expand(&self.nonfunctional)
    }

    pub fn validate(&self) -> Result<(), SplocError> {
        if self.uses_manifest_labels() {
            return Ok(());
        }
        let f = self.functional_codes();
        let n = self.nonfunctional_codes();
        if f.is_empty() || n.is_empty() {
            return Err(SplocError::invalid(format!(
                "scenario {}: functional and nonfunctional sets must both be non-empty",
                self.name
            )));
        }
        if let Some(c) = f.iter().find(|c| n.contains(c)) {
            return Err(SplocError::invalid(format!(
                "scenario {}: molecule {c} is both functional and nonfunctional",
                self.name
            )));
        }
        Ok(())
    }

    /// Select and relabel packets. Packets whose id does not name a selected
    /// molecule are dropped.
    pub fn select(&self, packets: Vec<DataPacket>) -> Result<Vec<DataPacket>, SplocError> {
        if self.uses_manifest_labels() {
            return Ok(packets);
        }
        let f = self.functional_codes();
        let n = self.nonfunctional_codes();
        let mut out = Vec::new();
        for pk in packets {
            let Some(code) = code_of_packet_id(pk.id()) else {
                continue;
            };
            if f.contains(&code) {
                out.push(pk.with_label(Label::Functional));
            } else if n.contains(&code) {
                out.push(pk.with_label(Label::Nonfunctional));
            }
        }
        for (label, name) in [(Label::Functional, "functional"), (Label::Nonfunctional, "nonfunctional")] {
            if !out.iter().any(|p| p.label() == label) {
                return Err(SplocError::invalid(format!(
                    "scenario {}: the manifest has no {name} packets",
                    self.name
                )));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_scenarios_have_expected_sizes() {
        let size = |name| {
            let s = Scenario::new(name, None, None).unwrap();
            (s.functional_codes().len(), s.nonfunctional_codes().len())
        };
        assert_eq!(size(ScenarioName::FbF), (4, 4));
        assert_eq!(size(ScenarioName::AbF), (4, 8));
        assert_eq!(size(ScenarioName::Fbc), (4, 12));
        assert_eq!(size(ScenarioName::All), (4, 20));
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let err = Scenario::new(
            ScenarioName::Custom,
            Some(vec!["EFL".into()]),
            Some(vec!["E*L".into()]),
        );
        assert!(err.is_err());
        assert!(Scenario::new(ScenarioName::Custom, Some(vec!["EXL".into()]), Some(vec!["FFF".into()])).is_err());
        assert!(Scenario::new(ScenarioName::FbF, None, Some(vec!["FFF".into()])).is_err());
        assert!(Scenario::new(ScenarioName::Custom, None, None).unwrap().uses_manifest_labels());
    }
}
