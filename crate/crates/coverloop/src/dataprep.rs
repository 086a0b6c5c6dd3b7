//! Dataset preparation: duplicate removal, correlation analysis, and per-bin
//! selection of the dependent stimulus variable.
//!
//! For each coverbin, the stimulus field whose column has the highest
//! absolute correlation with the bin's hit flag becomes the dependent
//! variable (the quantity the models predict); the remaining fields are the
//! independents. When every correlation sits below the sampling-noise floor
//! the argmax would be decided by noise, so the choice falls to the bin's
//! most specific conjunct field instead.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::coverage::{CoverBin, CoverGroup};
use crate::error::{Error, Result};
use crate::runner::{Dataset, DatasetRow};
use crate::stimulus::{FieldSpec, FieldValue};

/// Remove duplicate rows, keeping the first occurrence and preserving order.
/// Row identity is the stimulus values plus the bin flags; the test index is
/// ignored, since identical stimuli from different tests carry no new
/// information.
pub fn dedupe(dataset: &Dataset) -> Dataset {
    let mut seen: HashSet<Vec<u64>> = HashSet::with_capacity(dataset.rows.len());
    let rows = dataset
        .rows
        .iter()
        .filter(|row| seen.insert(row_key(row)))
        .cloned()
        .collect();
    Dataset {
        field_names: dataset.field_names.clone(),
        field_kinds: dataset.field_kinds.clone(),
        bin_names: dataset.bin_names.clone(),
        rows,
    }
}

fn row_key(row: &DatasetRow) -> Vec<u64> {
    let mut key = Vec::with_capacity(row.values.len() + row.flags.len());
    for v in &row.values {
        key.push(match v {
            FieldValue::Int(i) => *i as u64,
            FieldValue::Real(r) => r.to_bits(),
        });
    }
    key.extend(row.flags.iter().map(|&f| u64::from(f)));
    key
}

/// Pearson product-moment correlation of two equal-length columns.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Data(format!(
            "correlation needs two equal columns of length >= 2, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance(
            "correlation input has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Dependent/independent assignment for one learnable bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAssignment {
    pub bin: String,
    pub dependent: String,
    pub dependent_index: usize,
    pub independents: Vec<String>,
    /// Signed correlation of the chosen dependent with the bin flag.
    pub correlation: f64,
    /// True when every field correlation sat below the noise floor and the
    /// dependent was taken from the bin's most specific conjunct instead.
    #[serde(default)]
    pub below_noise_floor: bool,
}

/// Outcome of variable selection for one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum BinPrep {
    Learnable(BinAssignment),
    Excluded { bin: String, reason: String },
}

impl BinPrep {
    pub fn bin_name(&self) -> &str {
        match self {
            BinPrep::Learnable(a) => &a.bin,
            BinPrep::Excluded { bin, .. } => bin,
        }
    }
}

/// Fraction of the field's domain the conjunct admits, in (0, 1]; smaller is
/// more specific. Integer ranges count values, so a point range over a wide
/// domain beats a point range over a narrow one.
fn conjunct_specificity(bin: &CoverBin, field_idx: usize, specs: &[FieldSpec]) -> Option<f64> {
    use crate::coverage::ConjunctRange;
    use crate::stimulus::Domain;
    let (_, range) = bin.conjuncts.iter().find(|(idx, _)| *idx == field_idx)?;
    Some(match (range, specs[field_idx].domain) {
        (ConjunctRange::Int { lo, hi }, Domain::Int { lo: dlo, hi: dhi }) => {
            (hi - lo + 1) as f64 / (dhi - dlo + 1) as f64
        }
        (range, domain) => {
            let width = range.hi_f64() - range.lo_f64();
            let dw = domain.width();
            if dw > 0.0 {
                width / dw
            } else {
                0.0
            }
        }
    })
}

/// Pick the dependent variable for one bin: the field with the largest |r|
/// against the bin's hit flag, ties to the lowest field index, zero-variance
/// fields skipped. If the largest |r| is below the two-sigma sampling noise
/// floor (2 / sqrt(rows)), the correlations carry no signal, and the bin's
/// narrowest conjunct field is chosen instead.
pub fn select_variables(
    dataset: &Dataset,
    bin_index: usize,
    bin: &CoverBin,
    specs: &[FieldSpec],
) -> Result<BinAssignment> {
    let bin_name = dataset.bin_names[bin_index].clone();
    let flag = dataset.flag_column(bin_index);
    let n_hits = flag.iter().filter(|&&f| f == 1.0).count();
    if n_hits == 0 || n_hits == flag.len() {
        return Err(Error::NotLearnable {
            bin: bin_name,
            reason: format!(
                "bin column is constant ({})",
                if n_hits == 0 { "never hit" } else { "always hit" }
            ),
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for fi in 0..dataset.field_names.len() {
        let col = dataset.field_column(fi);
        match correlation(&col, &flag) {
            Ok(r) => {
                let better = match best {
                    None => true,
                    Some((_, br)) => r.abs() > br.abs(),
                };
                if better {
                    best = Some((fi, r));
                }
            }
            Err(Error::ZeroVariance(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    let (mut dep_idx, mut r) = best.ok_or_else(|| Error::NotLearnable {
        bin: bin_name.clone(),
        reason: "all stimulus fields have zero variance".into(),
    })?;

    let noise_floor = 2.0 / (dataset.rows.len() as f64).sqrt();
    let mut below_noise_floor = false;
    if r.abs() < noise_floor {
        below_noise_floor = true;
        let mut most_specific: Option<(usize, f64)> = None;
        for fi in 0..dataset.field_names.len() {
            if let Some(s) = conjunct_specificity(bin, fi, specs) {
                let better = match most_specific {
                    None => true,
                    Some((_, bs)) => s < bs,
                };
                if better {
                    most_specific = Some((fi, s));
                }
            }
        }
        if let Some((fi, _)) = most_specific {
            let col = dataset.field_column(fi);
            dep_idx = fi;
            r = correlation(&col, &flag).unwrap_or(0.0);
        }
    }

    let independents = dataset
        .field_names
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != dep_idx)
        .map(|(_, n)| n.clone())
        .collect();
    Ok(BinAssignment {
        bin: bin_name,
        dependent: dataset.field_names[dep_idx].clone(),
        dependent_index: dep_idx,
        independents,
        correlation: r,
        below_noise_floor,
    })
}

/// Deduplicated dataset plus the per-bin variable assignments.
#[derive(Debug, Clone)]
pub struct PreparedDataset {
    pub dataset: Dataset,
    pub bins: Vec<BinPrep>,
}

/// Serializable preparation report (`prepared.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepReport {
    pub rows_before: usize,
    pub rows_after: usize,
    pub bins: Vec<BinPrep>,
}

/// Run the full preparation pass: dedupe, then variable selection per bin.
/// The covergroup must list the same bins, in order, as the dataset columns.
/// Unlearnable bins are carried through with their exclusion reason rather
/// than failing the run.
pub fn prepare(dataset: &Dataset, group: &CoverGroup, specs: &[FieldSpec]) -> Result<PreparedDataset> {
    if group.bin_names() != dataset.bin_names {
        return Err(Error::Config(
            "covergroup bins do not match the dataset's bin columns".into(),
        ));
    }
    let deduped = dedupe(dataset);
    if deduped.rows.len() < 2 {
        return Err(Error::Data(format!(
            "need at least 2 distinct rows to prepare, got {}",
            deduped.rows.len()
        )));
    }
    let mut bins = Vec::with_capacity(deduped.bin_names.len());
    for (bi, bin) in group.bins.iter().enumerate() {
        match select_variables(&deduped, bi, bin, specs) {
            Ok(a) => bins.push(BinPrep::Learnable(a)),
            Err(Error::NotLearnable { bin, reason }) => {
                bins.push(BinPrep::Excluded { bin, reason })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(PreparedDataset {
        dataset: deduped,
        bins,
    })
}

impl PreparedDataset {
    pub fn report(&self, rows_before: usize) -> PrepReport {
        PrepReport {
            rows_before,
            rows_after: self.dataset.rows.len(),
            bins: self.bins.clone(),
        }
    }
}
