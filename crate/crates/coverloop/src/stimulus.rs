//! Constrained randomization of stimulus fields.
//!
//! Every value the framework ever generates comes from [`randomize`]: a field
//! is drawn inside one of its constraint sub-ranges, with the sub-range picked
//! proportionally to its width so the union is sampled uniformly. Generation
//! is bit-exact reproducible from a seed, and real values are rounded to six
//! decimal places before they are handed out, so the logged dataset is the
//! single source of truth for what the simulation saw.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale of the fixed grid real values are rounded onto (six decimals).
const REAL_GRID: f64 = 1e6;

/// Scaled values this close to an integer count as grid points: grid doubles
/// such as `k / 1e6` can land a few ulps off `k` when scaled back up, while
/// genuinely off-grid values sit at least 0.01 away at the scales this crate
/// uses.
const GRID_SLACK: f64 = 1e-6;

/// Round a real to the nearest six-decimal grid point.
pub fn round6(v: f64) -> f64 {
    (v * REAL_GRID).round() / REAL_GRID
}

/// Largest grid point ≤ v (values already on the grid stay put).
pub fn floor6(v: f64) -> f64 {
    let scaled = v * REAL_GRID;
    let near = scaled.round();
    if (scaled - near).abs() < GRID_SLACK {
        near / REAL_GRID
    } else {
        scaled.floor() / REAL_GRID
    }
}

/// Smallest grid point ≥ v (values already on the grid stay put).
pub fn ceil6(v: f64) -> f64 {
    let scaled = v * REAL_GRID;
    let near = scaled.round();
    if (scaled - near).abs() < GRID_SLACK {
        near / REAL_GRID
    } else {
        scaled.ceil() / REAL_GRID
    }
}

fn on_grid(v: f64) -> bool {
    let scaled = v * REAL_GRID;
    (scaled - scaled.round()).abs() < GRID_SLACK
}

/// Deterministic 64-bit generator (splitmix64).
///
/// The update rule is fixed by this crate so that regressions generate
/// byte-identical datasets on every platform: the state advances by the
/// golden-ratio increment and the output is the usual two-round multiply-xor
/// finalizer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    state: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix64(self.state)
    }

    /// Uniform double in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64) / (1u64 << 53) as f64
    }

    /// Uniform integer in [0, n). Uses plain modulo reduction: the bias is
    /// below 2^-32 for every range this crate draws from, and the reduction
    /// is part of the portable generation contract.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Derive a child seed from a base seed and a textual tag.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    mix64(base ^ fnv1a64(tag.as_bytes()))
}

/// Per-test seeds derived from one master seed.
///
/// The seeds are successive splitmix64 outputs; the finalizer is a bijection
/// over distinct states, so the first 2^64 seeds are pairwise distinct.
pub fn seed_schedule(master_seed: u64, n: usize) -> Vec<u64> {
    let mut rng = RngState::new(master_seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Kind of a stimulus field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Int,
    Real,
}

/// Inclusive value domain of a field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Int { lo: i64, hi: i64 },
    Real { lo: f64, hi: f64 },
}

impl Domain {
    pub fn kind(&self) -> FieldKind {
        match self {
            Domain::Int { .. } => FieldKind::Int,
            Domain::Real { .. } => FieldKind::Real,
        }
    }

    /// Domain width used for margin computations.
    pub fn width(&self) -> f64 {
        match *self {
            Domain::Int { lo, hi } => (hi - lo) as f64,
            Domain::Real { lo, hi } => hi - lo,
        }
    }

    pub fn lo_f64(&self) -> f64 {
        match *self {
            Domain::Int { lo, .. } => lo as f64,
            Domain::Real { lo, .. } => lo,
        }
    }

    pub fn hi_f64(&self) -> f64 {
        match *self {
            Domain::Int { hi, .. } => hi as f64,
            Domain::Real { hi, .. } => hi,
        }
    }
}

/// Declaration of one randomizable stimulus field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub domain: Domain,
}

impl FieldSpec {
    pub fn int(name: &str, lo: i64, hi: i64) -> Self {
        assert!(lo <= hi);
        Self {
            name: name.to_string(),
            domain: Domain::Int { lo, hi },
        }
    }

    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        assert!(lo <= hi && on_grid(lo) && on_grid(hi));
        Self {
            name: name.to_string(),
            domain: Domain::Real { lo, hi },
        }
    }

    pub fn kind(&self) -> FieldKind {
        self.domain.kind()
    }
}

/// One generated field value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Int(i64),
    Real(f64),
}

impl FieldValue {
    pub fn as_f64(&self) -> f64 {
        match *self {
            FieldValue::Int(v) => v as f64,
            FieldValue::Real(v) => v,
        }
    }
}

impl fmt::Display for FieldValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FieldValue::Int(v) => write!(f, "{v}"),
            FieldValue::Real(v) => write!(f, "{v:.6}"),
        }
    }
}

/// One sampled transaction: values aligned with the field-spec order.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusRecord {
    pub values: Vec<FieldValue>,
}

/// Raw constraint set as serialized: field name → inclusive sub-ranges.
///
/// The JSON form is `{ "field": [[lo, hi], ...], ... }`. Fields absent from
/// the map randomize over their full domain.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstraintSet {
    pub fields: BTreeMap<String, Vec<(f64, f64)>>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_field(mut self, field: &str, ranges: Vec<(f64, f64)>) -> Self {
        self.fields.insert(field.to_string(), ranges);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constraint set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("constraint set: {e}")))
    }

    /// Validate against the field specs and produce the typed per-field
    /// sub-range lists used by the generator.
    pub fn resolve(&self, specs: &[FieldSpec]) -> Result<ResolvedConstraints> {
        for name in self.fields.keys() {
            if !specs.iter().any(|s| &s.name == name) {
                return Err(Error::Config(format!(
                    "constraint references unknown field `{name}`"
                )));
            }
        }
        let mut per_field = Vec::with_capacity(specs.len());
        for spec in specs {
            let ranges = match self.fields.get(&spec.name) {
                None => full_domain_ranges(&spec.domain),
                Some(raw) => {
                    if raw.is_empty() {
                        return Err(Error::Config(format!(
                            "constraint for `{}` has no sub-ranges",
                            spec.name
                        )));
                    }
                    resolve_ranges(spec, raw)?
                }
            };
            per_field.push(ranges);
        }
        Ok(ResolvedConstraints { per_field })
    }
}

fn full_domain_ranges(domain: &Domain) -> ResolvedRanges {
    match *domain {
        Domain::Int { lo, hi } => ResolvedRanges::Int(vec![(lo, hi)]),
        Domain::Real { lo, hi } => ResolvedRanges::Real(vec![(lo, hi)]),
    }
}

fn resolve_ranges(spec: &FieldSpec, raw: &[(f64, f64)]) -> Result<ResolvedRanges> {
    match spec.domain {
        Domain::Int { lo: dlo, hi: dhi } => {
            let mut out = Vec::with_capacity(raw.len());
            for &(lo, hi) in raw {
                if lo.fract() != 0.0 || hi.fract() != 0.0 {
                    return Err(Error::Config(format!(
                        "field `{}` is integer but constraint [{lo}, {hi}] is fractional",
                        spec.name
                    )));
                }
                let (lo, hi) = (lo as i64, hi as i64);
                if lo > hi {
                    return Err(Error::Config(format!(
                        "field `{}`: empty sub-range [{lo}, {hi}]",
                        spec.name
                    )));
                }
                if lo < dlo || hi > dhi {
                    return Err(Error::Config(format!(
                        "field `{}`: sub-range [{lo}, {hi}] outside domain [{dlo}, {dhi}]",
                        spec.name
                    )));
                }
                out.push((lo, hi));
            }
            Ok(ResolvedRanges::Int(out))
        }
        Domain::Real { lo: dlo, hi: dhi } => {
            let mut out = Vec::with_capacity(raw.len());
            for &(lo, hi) in raw {
                if !on_grid(lo) || !on_grid(hi) {
                    return Err(Error::Config(format!(
                        "field `{}`: real constraint bounds must be multiples of 1e-6, got [{lo}, {hi}]",
                        spec.name
                    )));
                }
                if lo > hi {
                    return Err(Error::Config(format!(
                        "field `{}`: empty sub-range [{lo}, {hi}]",
                        spec.name
                    )));
                }
                if lo < dlo || hi > dhi {
                    return Err(Error::Config(format!(
                        "field `{}`: sub-range [{lo}, {hi}] outside domain [{dlo}, {dhi}]",
                        spec.name
                    )));
                }
                out.push((lo, hi));
            }
            Ok(ResolvedRanges::Real(out))
        }
    }
}

/// Typed sub-range lists, one entry per field spec.
#[derive(Debug, Clone)]
pub struct ResolvedConstraints {
    per_field: Vec<ResolvedRanges>,
}

#[derive(Debug, Clone)]
pub enum ResolvedRanges {
    Int(Vec<(i64, i64)>),
    Real(Vec<(f64, f64)>),
}

impl ResolvedRanges {
    fn widths(&self) -> Vec<f64> {
        match self {
            // Integer sub-range weight is its value count, so the union is
            // sampled uniformly over values.
            ResolvedRanges::Int(rs) => rs.iter().map(|&(lo, hi)| (hi - lo + 1) as f64).collect(),
            ResolvedRanges::Real(rs) => rs.iter().map(|&(lo, hi)| hi - lo).collect(),
        }
    }
}

/// Draw one record: each field independently picks a sub-range weighted by
/// its width, then a value uniform within it. Real draws are rounded onto
/// the six-decimal grid; constraint bounds live on that grid, so rounding
/// never escapes the chosen sub-range.
pub fn randomize(
    constraints: &ResolvedConstraints,
    specs: &[FieldSpec],
    rng: &mut RngState,
) -> StimulusRecord {
    assert_eq!(constraints.per_field.len(), specs.len());
    let mut values = Vec::with_capacity(specs.len());
    for ranges in &constraints.per_field {
        let widths = ranges.widths();
        let idx = pick_weighted(&widths, rng);
        let value = match ranges {
            ResolvedRanges::Int(rs) => {
                let (lo, hi) = rs[idx];
                let span = (hi - lo) as u64 + 1;
                FieldValue::Int(lo + rng.next_below(span) as i64)
            }
            ResolvedRanges::Real(rs) => {
                let (lo, hi) = rs[idx];
                let v = round6(lo + rng.next_f64() * (hi - lo));
                FieldValue::Real(v.clamp(lo, hi))
            }
        };
        values.push(value);
    }
    StimulusRecord { values }
}

/// Index of a width-weighted pick; degenerate all-zero weights fall back to
/// a uniform pick over sub-ranges (all point ranges).
fn pick_weighted(widths: &[f64], rng: &mut RngState) -> usize {
    let total: f64 = widths.iter().sum();
    if widths.len() == 1 {
        return 0;
    }
    if total <= 0.0 {
        return rng.next_below(widths.len() as u64) as usize;
    }
    let t = rng.next_f64() * total;
    let mut cum = 0.0;
    for (i, w) in widths.iter().enumerate() {
        cum += w;
        if t < cum {
            return i;
        }
    }
    widths.len() - 1
}
