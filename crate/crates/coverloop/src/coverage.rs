//! Functional coverage: covergroups, coverbins, sampling and merging.
//!
//! A coverbin is a conjunction of per-field inclusive ranges over the
//! stimulus record. A bin counts as covered once its hit count reaches 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stimulus::{Domain, FieldSpec, FieldValue, StimulusRecord};

/// Inclusive range of a single conjunct, typed to match the field kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConjunctRange {
    Int { lo: i64, hi: i64 },
    Real { lo: f64, hi: f64 },
}

impl ConjunctRange {
    pub fn contains(&self, value: &FieldValue) -> bool {
        match (self, value) {
            (ConjunctRange::Int { lo, hi }, FieldValue::Int(v)) => lo <= v && v <= hi,
            (ConjunctRange::Real { lo, hi }, FieldValue::Real(v)) => lo <= v && v <= hi,
            _ => false,
        }
    }

    pub fn lo_f64(&self) -> f64 {
        match *self {
            ConjunctRange::Int { lo, .. } => lo as f64,
            ConjunctRange::Real { lo, .. } => lo,
        }
    }

    pub fn hi_f64(&self) -> f64 {
        match *self {
            ConjunctRange::Int { hi, .. } => hi as f64,
            ConjunctRange::Real { hi, .. } => hi,
        }
    }
}

/// Named predicate over one or more stimulus fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverBin {
    pub name: String,
    /// Conjuncts ordered by field-spec index.
    pub conjuncts: Vec<(usize, ConjunctRange)>,
}

impl CoverBin {
    pub fn matches(&self, rec: &StimulusRecord) -> bool {
        self.conjuncts
            .iter()
            .all(|(idx, range)| range.contains(&rec.values[*idx]))
    }
}

/// A resolved covergroup: bins whose conjunct field names have been checked
/// against a design's field specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverGroup {
    pub bins: Vec<CoverBin>,
}

impl CoverGroup {
    pub fn bin_names(&self) -> Vec<String> {
        self.bins.iter().map(|b| b.name.clone()).collect()
    }

    pub fn new_state(&self) -> CoverGroupState {
        CoverGroupState {
            bins: self.bins.clone(),
            hits: vec![0; self.bins.len()],
            samples: 0,
        }
    }
}

/// Serialized covergroup definition: `{ "bins": [ { "name", "when" } ] }`
/// where `when` maps field names to one inclusive `[lo, hi]` pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverGroupDef {
    pub bins: Vec<BinDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinDef {
    pub name: String,
    pub when: BTreeMap<String, (f64, f64)>,
}

impl CoverGroupDef {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("covergroup: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("covergroup serializes")
    }

    /// Resolve field names against the specs and type-check every range.
    /// Ranges must be non-empty and lie inside the field domain.
    pub fn resolve(&self, specs: &[FieldSpec]) -> Result<CoverGroup> {
        let mut bins = Vec::with_capacity(self.bins.len());
        let mut seen = std::collections::HashSet::new();
        for bin in &self.bins {
            if !seen.insert(bin.name.clone()) {
                return Err(Error::Config(format!("duplicate bin name `{}`", bin.name)));
            }
            if bin.when.is_empty() {
                return Err(Error::Config(format!(
                    "bin `{}` has no conjuncts",
                    bin.name
                )));
            }
            let mut conjuncts = Vec::with_capacity(bin.when.len());
            for (field, &(lo, hi)) in &bin.when {
                let idx = specs
                    .iter()
                    .position(|s| &s.name == field)
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "bin `{}` references unknown field `{field}`",
                            bin.name
                        ))
                    })?;
                let range = match specs[idx].domain {
                    Domain::Int { lo: dlo, hi: dhi } => {
                        if lo.fract() != 0.0 || hi.fract() != 0.0 {
                            return Err(Error::Config(format!(
                                "bin `{}`: integer field `{field}` with fractional range",
                                bin.name
                            )));
                        }
                        let (lo, hi) = (lo as i64, hi as i64);
                        if lo > hi || lo < dlo || hi > dhi {
                            return Err(Error::Config(format!(
                                "bin `{}`: range [{lo}, {hi}] invalid for `{field}`",
                                bin.name
                            )));
                        }
                        ConjunctRange::Int { lo, hi }
                    }
                    Domain::Real { lo: dlo, hi: dhi } => {
                        if lo > hi || lo < dlo || hi > dhi {
                            return Err(Error::Config(format!(
                                "bin `{}`: range [{lo}, {hi}] invalid for `{field}`",
                                bin.name
                            )));
                        }
                        ConjunctRange::Real { lo, hi }
                    }
                };
                conjuncts.push((idx, range));
            }
            // Canonical conjunct order: field-spec index.
            conjuncts.sort_by_key(|(idx, _)| *idx);
            bins.push(CoverBin {
                name: bin.name.clone(),
                conjuncts,
            });
        }
        Ok(CoverGroup { bins })
    }
}

/// Hit counters for one covergroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverGroupState {
    pub bins: Vec<CoverBin>,
    pub hits: Vec<u64>,
    pub samples: u64,
}

impl CoverGroupState {
    /// Evaluate every bin against the record, bump the counters, and return
    /// the per-bin 0/1 hit vector for this sample.
    pub fn sample(&mut self, rec: &StimulusRecord) -> Result<Vec<u8>> {
        for (idx, _) in self.bins.iter().flat_map(|b| &b.conjuncts) {
            if *idx >= rec.values.len() {
                return Err(Error::Config(format!(
                    "record is missing field index {idx} referenced by a bin"
                )));
            }
        }
        let mut flags = Vec::with_capacity(self.bins.len());
        for (i, bin) in self.bins.iter().enumerate() {
            if bin.matches(rec) {
                self.hits[i] += 1;
                flags.push(1);
            } else {
                flags.push(0);
            }
        }
        self.samples += 1;
        Ok(flags)
    }

    /// Fraction of bins with at least one hit, as a percentage.
    pub fn coverage_pct(&self) -> Result<f64> {
        if self.bins.is_empty() {
            return Err(Error::Config("covergroup has zero bins".into()));
        }
        let hit = self.hits.iter().filter(|&&h| h >= 1).count();
        Ok(100.0 * hit as f64 / self.bins.len() as f64)
    }

    /// Names of bins with no hits.
    pub fn missed_bins(&self) -> Vec<String> {
        self.bins
            .iter()
            .zip(&self.hits)
            .filter(|(_, &h)| h == 0)
            .map(|(b, _)| b.name.clone())
            .collect()
    }
}

/// Element-wise sum of states over an identical bin list.
pub fn merge(states: &[CoverGroupState]) -> Result<CoverGroupState> {
    let first = states
        .first()
        .ok_or_else(|| Error::Config("merge of zero coverage states".into()))?;
    let mut out = first.clone();
    for state in &states[1..] {
        if state.bins != out.bins {
            return Err(Error::Config(
                "cannot merge coverage states with different bin lists".into(),
            ));
        }
        for (h, add) in out.hits.iter_mut().zip(&state.hits) {
            *h += add;
        }
        out.samples += state.samples;
    }
    Ok(out)
}
