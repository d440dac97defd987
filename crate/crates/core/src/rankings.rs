//! Canonical augmentation rankings shipped as JSON data assets.
//!
//! A ranking is a list of tie groups, best first. The strict rank of a
//! method is its 1-based position in the flattened list. Methods missing
//! from a ranking share the average of the unclaimed positions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::Method;
use crate::error::{Error, Result};
use crate::synthgen::DatasetId;

pub const SYNTHETIC_RANKINGS_JSON: &str = include_str!("../data/synthetic_rankings.json");
pub const REALWORLD_RANKINGS_JSON: &str = include_str!("../data/realworld_rankings.json");

pub const SYNTHETIC_RANKINGS_SHA256: &str =
    "19f8361ff33e9af140d53cb5edb3aaba11a5ec5e5db062616a366478c500de44";
pub const REALWORLD_RANKINGS_SHA256: &str =
    "edebfc09ea2c7f70af77585e7bb033fcd2bb43619d794bb6a95920464b3c5f22";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankEntry {
    pub method: Method,
    /// 1-based strict rank.
    pub rank: usize,
    /// 0-based index of the tie group.
    pub tie_group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAugmentations {
    pub source: String,
    pub entries: Vec<RankEntry>,
}

impl RankedAugmentations {
    pub fn from_groups(source: impl Into<String>, groups: &[Vec<Method>]) -> Result<Self> {
        let source = source.into();
        let mut entries = Vec::new();
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Asset(format!("{source}: empty tie group {g}")));
            }
            for &method in group {
                if entries.iter().any(|e: &RankEntry| e.method == method) {
                    return Err(Error::Asset(format!("{source}: {method} listed twice")));
                }
                entries.push(RankEntry {
                    method,
                    rank: entries.len() + 1,
                    tie_group: g,
                });
            }
        }
        Ok(Self { source, entries })
    }

    /// Methods in listed order.
    pub fn listed(&self) -> Vec<Method> {
        self.entries.iter().map(|e| e.method).collect()
    }

    /// All nine methods: the listed ones, then the missing ones by name.
    pub fn strict_order(&self) -> Vec<Method> {
        let mut out = self.listed();
        let mut missing: Vec<Method> = Method::ALL.iter().copied().filter(|m| !out.contains(m)).collect();
        missing.sort_by_key(|m| m.name());
        out.extend(missing);
        out
    }

    /// Strict rank of every method; missing methods get the mean of the
    /// unclaimed positions.
    pub fn strict_ranks(&self) -> BTreeMap<Method, f64> {
        let listed = self.entries.len();
        let total = Method::ALL.len();
        let tail = if listed < total {
            (listed + 1..=total).sum::<usize>() as f64 / (total - listed) as f64
        } else {
            0.0
        };
        Method::ALL
            .iter()
            .map(|&m| {
                let r = self
                    .entries
                    .iter()
                    .find(|e| e.method == m)
                    .map_or(tail, |e| e.rank as f64);
                (m, r)
            })
            .collect()
    }

    pub fn tie_groups(&self) -> Vec<Vec<Method>> {
        let mut out: Vec<Vec<Method>> = Vec::new();
        for e in &self.entries {
            if out.len() == e.tie_group {
                out.push(Vec::new());
            }
            out[e.tie_group].push(e.method);
        }
        out
    }
}

#[derive(Debug, Deserialize)]
struct RankingFile {
    version: u32,
    rankings: BTreeMap<String, Vec<Vec<String>>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_table(json: &str) -> Result<BTreeMap<String, RankedAugmentations>> {
    let file: RankingFile = serde_json::from_str(json)?;
    if file.version != 1 {
        return Err(Error::Asset(format!("unsupported ranking table version {}", file.version)));
    }
    file.rankings
        .into_iter()
        .map(|(name, groups)| {
            let groups = groups
                .iter()
                .map(|g| g.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>())
                .collect::<Result<Vec<_>>>()?;
            let r = RankedAugmentations::from_groups(name.clone(), &groups)?;
            Ok((name, r))
        })
        .collect()
}

fn verify(json: &str, expected: &str, what: &str) -> Result<()> {
    let got = sha256_hex(json.as_bytes());
    if got != expected {
        return Err(Error::Asset(format!(
            "{what} checksum mismatch: expected {expected}, found {got}"
        )));
    }
    Ok(())
}

/// Rankings of the twelve synthetic datasets.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTable(pub BTreeMap<DatasetId, RankedAugmentations>);

impl SyntheticTable {
    /// The shipped table, checked against its pinned checksum.
    pub fn canonical() -> Result<Self> {
        verify(SYNTHETIC_RANKINGS_JSON, SYNTHETIC_RANKINGS_SHA256, "synthetic ranking table")?;
        Self::from_json(SYNTHETIC_RANKINGS_JSON)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (name, r) in parse_table(json)? {
            out.insert(name.parse::<DatasetId>()?, r);
        }
        for id in DatasetId::all() {
            if !out.contains_key(&id) {
                return Err(Error::Asset(format!("ranking table lacks dataset {id}")));
            }
        }
        Ok(Self(out))
    }

    pub fn get(&self, id: DatasetId) -> &RankedAugmentations {
        &self.0[&id]
    }
}

/// The shipped ground-truth rankings of the real-world evaluation datasets.
pub fn realworld_truth() -> Result<BTreeMap<String, RankedAugmentations>> {
    verify(REALWORLD_RANKINGS_JSON, REALWORLD_RANKINGS_SHA256, "real-world ranking table")?;
    parse_table(REALWORLD_RANKINGS_JSON)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Method::*;

    #[test]
    fn shipped_tables_match_pins() {
        assert_eq!(sha256_hex(SYNTHETIC_RANKINGS_JSON.as_bytes()), SYNTHETIC_RANKINGS_SHA256);
        assert_eq!(sha256_hex(REALWORLD_RANKINGS_JSON.as_bytes()), REALWORLD_RANKINGS_SHA256);
        let t = SyntheticTable::canonical().unwrap();
        assert_eq!(t.0.len(), 12);
        assert_eq!(realworld_truth().unwrap().len(), 6);
    }

    #[test]
    fn a1_row() {
        let t = SyntheticTable::canonical().unwrap();
        let a1 = t.get("A1".parse().unwrap());
        assert_eq!(
            a1.tie_groups(),
            vec![
                vec![Resizing],
                vec![Jittering, TimeMasking],
                vec![Flipping],
                vec![TimeNeighboring, Permutation],
                vec![NoPretrain],
            ]
        );
        let r = a1.strict_ranks();
        assert_eq!(r[&Resizing], 1.0);
        assert_eq!(r[&NoPretrain], 7.0);
        assert_eq!(r[&Scaling], 8.5);
        assert_eq!(r[&FreqMasking], 8.5);
    }

    #[test]
    fn strict_order_appends_missing_by_name() {
        let r = RankedAugmentations::from_groups("x", &[vec![NoPretrain, TimeNeighboring]]).unwrap();
        let order = r.strict_order();
        assert_eq!(order.len(), 9);
        assert_eq!(&order[..4], &[NoPretrain, TimeNeighboring, Flipping, FreqMasking]);
        assert_eq!(order[8], TimeMasking);
    }

    #[test]
    fn tampered_or_malformed_tables_are_rejected() {
        let tampered = SYNTHETIC_RANKINGS_JSON.replacen("resizing", "scaling", 1);
        assert!(verify(&tampered, SYNTHETIC_RANKINGS_SHA256, "t").is_err());
        assert!(SyntheticTable::from_json(r#"{"version":1,"rankings":{"A1":[["resizing"]]}}"#).is_err());
        assert!(RankedAugmentations::from_groups("x", &[vec![Flipping], vec![Flipping]]).is_err());
        assert!(parse_table(r#"{"version":1,"rankings":{"X":[["warping"]]}}"#).is_err());
    }

    #[test]
    fn ranks_sum_to_forty_five() {
        let t = SyntheticTable::canonical().unwrap();
        for r in t.0.values() {
            let s: f64 = r.strict_ranks().values().sum();
            assert!((s - 45.0).abs() < 1e-12, "{}", r.source);
        }
    }
}
