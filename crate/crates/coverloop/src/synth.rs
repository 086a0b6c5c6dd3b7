//! Directed-constraint synthesis: turn per-bin model predictions into
//! constraint ranges and assemble the optimized regression plan.
//!
//! For a modeled bin, the dependent field's range comes from querying the
//! model over inputs sampled inside the bin's conjunct ranges (hit flag
//! asserted) and taking the min/max prediction widened by a margin. Bins
//! without a model fall back to targeting their own conjunct ranges
//! directly. Directives that share a dependent field and identical
//! independent constraints collapse into group tests whose dependent
//! constraint is the union of the member ranges, with the per-bin
//! transaction budget preserved.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coverage::{ConjunctRange, CoverBin};
use crate::error::{Error, Result};
use crate::ml::{AlgoKind, TrainedModel, HIT_FLAG_FEATURE};
use crate::runner::{RegressionPlan, TestPlan};
use crate::stimulus::{ceil6, derive_seed, floor6, ConstraintSet, Domain, FieldSpec, RngState};

/// Number of query rows used to probe a model for its predicted range.
const QUERY_ROWS: usize = 64;

/// Bins folded into one directed test when directives merge.
const GROUP_BINS_PER_TEST: usize = 8;

/// Default widening of a predicted range, as a fraction of the dependent
/// field's domain width.
pub const DEFAULT_MARGIN: f64 = 0.02;

/// A synthesized constraint directive for one coverbin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDirective {
    pub bin: String,
    pub dependent: String,
    /// Predicted (or fallback) inclusive range for the dependent field.
    pub lo: f64,
    pub hi: f64,
    /// Fixed ranges for the bin's other constrained fields.
    pub independents: BTreeMap<String, (f64, f64)>,
    pub algorithm: AlgoKind,
    pub model_id: String,
    pub fallback: bool,
}

/// Audit-trail file (`directives_<algorithm>.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectiveSet {
    pub algorithm: AlgoKind,
    pub margin: f64,
    pub directives: Vec<BinDirective>,
}

impl DirectiveSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("directives serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("directives: {e}")))
    }
}

fn spec_for<'a>(specs: &'a [FieldSpec], name: &str) -> Result<&'a FieldSpec> {
    specs
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Config(format!("directive references unknown field `{name}`")))
}

/// Snap a raw range onto the field's representable constraint grid and clamp
/// it into the domain. Integer ranges round outward; real ranges snap
/// outward onto the six-decimal grid. A range pushed fully outside the
/// domain collapses onto the nearest domain edge.
fn snap_range(domain: &Domain, lo: f64, hi: f64) -> (f64, f64) {
    match *domain {
        Domain::Int { lo: dlo, hi: dhi } => {
            let mut l = lo.floor().max(dlo as f64);
            let mut h = hi.ceil().min(dhi as f64);
            if l > h {
                if hi < dlo as f64 {
                    l = dlo as f64;
                    h = dlo as f64;
                } else {
                    l = dhi as f64;
                    h = dhi as f64;
                }
            }
            (l, h)
        }
        Domain::Real { lo: dlo, hi: dhi } => {
            let mut l = floor6(lo).max(dlo);
            let mut h = ceil6(hi).min(dhi);
            if l > h {
                if hi < dlo {
                    l = dlo;
                    h = dlo;
                } else {
                    l = dhi;
                    h = dhi;
                }
            }
            (l, h)
        }
    }
}

fn conjunct_for(bin: &CoverBin, field_idx: usize) -> Option<&ConjunctRange> {
    bin.conjuncts
        .iter()
        .find(|(idx, _)| *idx == field_idx)
        .map(|(_, r)| r)
}

fn sample_in(range_lo: f64, range_hi: f64, domain: &Domain, rng: &mut RngState) -> f64 {
    match domain {
        Domain::Int { .. } => {
            let lo = range_lo as i64;
            let hi = range_hi as i64;
            let span = (hi - lo) as u64 + 1;
            (lo + rng.next_below(span) as i64) as f64
        }
        Domain::Real { .. } => range_lo + rng.next_f64() * (range_hi - range_lo),
    }
}

/// Build the directive for one bin.
///
/// With a model: sample `QUERY_ROWS` feature vectors (independents drawn
/// from the bin's conjunct range where constrained, else from the field
/// domain; hit flag forced to 1), predict the dependent value for each, and
/// widen the min/max envelope by `margin` of the dependent domain width.
/// Without a model: target the bin's own conjunct range on its first field.
pub fn predict_bin_constraint(
    model: Option<&TrainedModel>,
    bin: &CoverBin,
    specs: &[FieldSpec],
    margin: f64,
    algorithm: AlgoKind,
) -> Result<BinDirective> {
    if !(0.0..=0.5).contains(&margin) {
        return Err(Error::Parameter(format!(
            "margin must be in [0, 0.5], got {margin}"
        )));
    }
    match model {
        Some(model) => {
            let dep_spec = spec_for(specs, &model.dependent)?;
            let dep_idx = specs.iter().position(|s| s.name == model.dependent).unwrap();
            let mut rng = RngState::new(derive_seed(
                0x51C7,
                &format!("query:{}:{}", algorithm.tag(), bin.name),
            ));
            let mut query = vec![0.0; model.features.len()];
            let mut preds = Vec::with_capacity(QUERY_ROWS);
            for _ in 0..QUERY_ROWS {
                for (fi, feature) in model.features.iter().enumerate() {
                    if feature == HIT_FLAG_FEATURE {
                        query[fi] = 1.0;
                        continue;
                    }
                    let spec = spec_for(specs, feature)?;
                    let idx = specs.iter().position(|s| s.name == *feature).unwrap();
                    let (lo, hi) = match conjunct_for(bin, idx) {
                        Some(c) => (c.lo_f64(), c.hi_f64()),
                        None => (spec.domain.lo_f64(), spec.domain.hi_f64()),
                    };
                    query[fi] = sample_in(lo, hi, &spec.domain, &mut rng);
                }
                preds.push(model.predict(&query));
            }
            let p_lo = preds.iter().cloned().fold(f64::INFINITY, f64::min);
            let p_hi = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if !p_lo.is_finite() || !p_hi.is_finite() {
                return Err(Error::Data(format!(
                    "model for bin `{}` produced non-finite predictions",
                    bin.name
                )));
            }
            let m = margin * dep_spec.domain.width();
            let (lo, hi) = snap_range(&dep_spec.domain, p_lo - m, p_hi + m);
            let mut independents = BTreeMap::new();
            for (idx, range) in &bin.conjuncts {
                if *idx == dep_idx {
                    continue;
                }
                let spec = &specs[*idx];
                let (lo, hi) = snap_range(&spec.domain, range.lo_f64(), range.hi_f64());
                independents.insert(spec.name.clone(), (lo, hi));
            }
            Ok(BinDirective {
                bin: bin.name.clone(),
                dependent: model.dependent.clone(),
                lo,
                hi,
                independents,
                algorithm,
                model_id: format!("{}:{}", algorithm.tag(), bin.name),
                fallback: false,
            })
        }
        None => {
            // Direct-targeting fallback: pin the first conjunct field to the
            // bin's own range and carry the remaining conjuncts as-is.
            let (first_idx, first_range) = bin
                .conjuncts
                .first()
                .ok_or_else(|| Error::Config(format!("bin `{}` has no conjuncts", bin.name)))?;
            let dep_spec = &specs[*first_idx];
            let (lo, hi) = snap_range(&dep_spec.domain, first_range.lo_f64(), first_range.hi_f64());
            let mut independents = BTreeMap::new();
            for (idx, range) in bin.conjuncts.iter().skip(1) {
                let spec = &specs[*idx];
                let (lo, hi) = snap_range(&spec.domain, range.lo_f64(), range.hi_f64());
                independents.insert(spec.name.clone(), (lo, hi));
            }
            Ok(BinDirective {
                bin: bin.name.clone(),
                dependent: dep_spec.name.clone(),
                lo,
                hi,
                independents,
                algorithm,
                model_id: format!("fallback:{}", bin.name),
                fallback: true,
            })
        }
    }
}

/// Which bins the optimized plan should target.
#[derive(Debug, Clone)]
pub enum Targets {
    All,
    Only(Vec<String>),
}

impl Targets {
    fn accepts(&self, bin: &str) -> bool {
        match self {
            Targets::All => true,
            Targets::Only(names) => names.iter().any(|n| n == bin),
        }
    }
}

/// Assemble the optimized regression plan from directives.
///
/// Directives with a unique (dependent, independents) structure become one
/// directed test each. Structurally identical directives merge: a group of K
/// bins emits ceil(K / 8) tests whose dependent constraint is the union of
/// the member ranges and whose per-test transaction count is scaled so the
/// group keeps its K * base budget. Singleton tests come first, then groups,
/// both in first-seen directive order. The plan seed derives from the base
/// seed and the algorithm tag.
pub fn emit_optimized_plan(
    directives: &[BinDirective],
    base: &RegressionPlan,
    targets: &Targets,
    algorithm: AlgoKind,
) -> Result<RegressionPlan> {
    let specs = base.duv.field_specs();
    let base_txns = base
        .tests
        .first()
        .map(|t| t.transactions)
        .unwrap_or(crate::builtin::DEFAULT_TRANSACTIONS);

    // Group by (dependent, independent-constraints) in first-seen order.
    type GroupKey = (String, Vec<(String, u64, u64)>);
    let key_of = |d: &BinDirective| -> GroupKey {
        let ind = d
            .independents
            .iter()
            .map(|(k, &(lo, hi))| (k.clone(), lo.to_bits(), hi.to_bits()))
            .collect();
        (d.dependent.clone(), ind)
    };
    let mut order: Vec<GroupKey> = Vec::new();
    let mut groups: BTreeMap<Vec<u8>, Vec<&BinDirective>> = BTreeMap::new();
    let key_bytes = |k: &GroupKey| -> Vec<u8> { format!("{k:?}").into_bytes() };
    for d in directives.iter().filter(|d| targets.accepts(&d.bin)) {
        let key = key_of(d);
        let bytes = key_bytes(&key);
        if !groups.contains_key(&bytes) {
            order.push(key.clone());
        }
        groups.entry(bytes).or_default().push(d);
    }

    let mut singles = Vec::new();
    let mut merged = Vec::new();
    for key in &order {
        let members = &groups[&key_bytes(key)];
        if members.len() == 1 {
            singles.push(members.clone());
        } else {
            merged.push(members.clone());
        }
    }

    let mut tests = Vec::new();
    for members in singles.iter().chain(merged.iter()) {
        let first = members[0];
        let dep_spec = spec_for(&specs, &first.dependent)?;
        let mut constraints = ConstraintSet::new();
        for (field, &(lo, hi)) in &first.independents {
            spec_for(&specs, field)?;
            constraints = constraints.with_field(field, vec![(lo, hi)]);
        }
        let ranges = union_ranges(
            members.iter().map(|d| (d.lo, d.hi)).collect(),
            dep_spec.kind() == crate::stimulus::FieldKind::Int,
        );
        constraints = constraints.with_field(&first.dependent, ranges);
        constraints.resolve(&specs)?;

        if members.len() == 1 {
            tests.push(TestPlan {
                name: format!("directed_{}", first.bin),
                constraints,
                transactions: base_txns,
            });
        } else {
            let k = members.len();
            let n_tests = k.div_ceil(GROUP_BINS_PER_TEST);
            let txns = base_txns * k.div_ceil(n_tests);
            for i in 1..=n_tests {
                tests.push(TestPlan {
                    name: format!("directed_{}_g{i}", first.bin),
                    constraints: constraints.clone(),
                    transactions: txns,
                });
            }
        }
    }

    let plan = RegressionPlan {
        duv: base.duv,
        master_seed: derive_seed(base.master_seed, algorithm.tag()),
        tests,
    };
    plan.validate()?;
    Ok(plan)
}

/// Merge inclusive ranges into a sorted disjoint union. Integer ranges also
/// fuse when adjacent.
fn union_ranges(mut ranges: Vec<(f64, f64)>, integer: bool) -> Vec<(f64, f64)> {
    ranges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(ranges.len());
    for (lo, hi) in ranges {
        match out.last_mut() {
            Some(last) if lo <= last.1 + if integer { 1.0 } else { 0.0 } => {
                last.1 = last.1.max(hi);
            }
            _ => out.push((lo, hi)),
        }
    }
    out
}
