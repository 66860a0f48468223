use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DomainGroup {
    PE,
    LS,
    SH,
}

const GROUP_SIZES: [(DomainGroup, u8); 3] = [(DomainGroup::PE, 10), (DomainGroup::LS, 9), (DomainGroup::SH, 6)];

/// One of the 25 ERC evaluation panels, ordered PE1 < ... < PE10 < LS1 <
/// ... < SH6.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ErcPanel(u8);

impl ErcPanel {
    pub const COUNT: usize = 25;

    pub fn from_index(index: usize) -> Option<ErcPanel> {
        (index < Self::COUNT).then_some(ErcPanel(index as u8))
    }

    pub fn all() -> impl Iterator<Item = ErcPanel> {
        (0..Self::COUNT as u8).map(ErcPanel)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn domain_group(self) -> DomainGroup {
        self.split().0
    }

    fn split(self) -> (DomainGroup, u8) {
        let mut rest = self.0;
        for (group, size) in GROUP_SIZES {
            if rest < size {
                return (group, rest + 1);
            }
            rest -= size;
        }
        unreachable!("panel index out of range")
    }

    pub fn code(self) -> String {
        let (group, number) = self.split();
        format!("{group:?}{number}")
    }
}

impl fmt::Display for ErcPanel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl fmt::Debug for ErcPanel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown ERC panel code `{0}`")]
pub struct UnknownPanel(pub String);

impl FromStr for ErcPanel {
    type Err = UnknownPanel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || UnknownPanel(s.to_string());
        let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(err)?;
        let (prefix, number) = s.split_at(split);
        let number: u8 = number.parse().map_err(|_| err())?;
        let mut offset = 0;
        for (group, size) in GROUP_SIZES {
            if format!("{group:?}") == prefix {
                return if (1..=size).contains(&number) && !s[split..].starts_with('0') {
                    Ok(ErcPanel(offset + number - 1))
                } else {
                    Err(err())
                };
            }
            offset += size;
        }
        Err(err())
    }
}

impl Serialize for ErcPanel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for ErcPanel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_five_distinct_codes() {
        let codes: Vec<String> = ErcPanel::all().map(ErcPanel::code).collect();
        assert_eq!(codes.len(), 25);
        assert_eq!(codes[0], "PE1");
        assert_eq!(codes[9], "PE10");
        assert_eq!(codes[10], "LS1");
        assert_eq!(codes[18], "LS9");
        assert_eq!(codes[19], "SH1");
        assert_eq!(codes[24], "SH6");
        let unique: std::collections::BTreeSet<_> = codes.iter().collect();
        assert_eq!(unique.len(), 25);
        for p in ErcPanel::all() {
            assert_eq!(p.code().parse::<ErcPanel>().unwrap(), p);
            assert!(p.code().starts_with(&format!("{:?}", p.domain_group())));
        }
    }

    #[test]
    fn rejects_bad_codes() {
        for bad in ["PE0", "PE11", "LS10", "SH7", "XX1", "PE", "pe1", "SH01", ""] {
            assert!(bad.parse::<ErcPanel>().is_err(), "{bad}");
        }
        assert!(ErcPanel::from_index(25).is_none());
    }
}
