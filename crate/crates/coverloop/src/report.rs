//! Performance metrics and report emission.
//!
//! Three ratios compare an optimized regression against the original one:
//! the test-run reduction (original runs / optimized runs), the run-time
//! reduction (original seconds / optimized seconds), and the coverage regain
//! (optimized coverage as a percentage of original coverage). Reports land
//! as `report.json` (raw inputs plus full-precision computed values),
//! `report.csv` (two-decimal table), and per-run coverage curves as CSV and
//! SVG.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml::AlgoKind;
use crate::runner::CurvePoint;

/// Test-run reduction factor.
pub fn opt_test_runs(n_orig: usize, n_opt: usize) -> Result<f64> {
    if n_opt == 0 {
        return Err(Error::Division("optimized regression has zero test runs".into()));
    }
    Ok(n_orig as f64 / n_opt as f64)
}

/// Run-time reduction factor.
pub fn opt_runtime(t_orig: f64, t_opt: f64) -> Result<f64> {
    if t_opt <= 0.0 {
        return Err(Error::Division(format!(
            "optimized run-time must be positive, got {t_opt}"
        )));
    }
    Ok(t_orig / t_opt)
}

/// Coverage regain: optimized coverage relative to original coverage, in
/// percent. Values above 100 mean the optimized regression covered more.
pub fn coverage_regain(c_opt: f64, c_orig: f64) -> Result<f64> {
    if c_orig <= 0.0 {
        return Err(Error::Division(format!(
            "original coverage must be positive, got {c_orig}"
        )));
    }
    Ok(100.0 * c_opt / c_orig)
}

/// Round to the two decimals the reports print.
pub fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Raw inputs and computed metrics for one (design, algorithm) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsEntry {
    pub duv: String,
    pub algorithm: AlgoKind,
    pub n_orig: usize,
    pub n_opt: usize,
    pub t_orig: f64,
    pub t_opt: f64,
    pub c_orig: f64,
    pub c_opt: f64,
    pub opt_test_runs: f64,
    pub opt_runtime: f64,
    pub coverage_regain: f64,
}

impl MetricsEntry {
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        duv: &str,
        algorithm: AlgoKind,
        n_orig: usize,
        n_opt: usize,
        t_orig: f64,
        t_opt: f64,
        c_orig: f64,
        c_opt: f64,
    ) -> Result<Self> {
        Ok(MetricsEntry {
            duv: duv.to_string(),
            algorithm,
            n_orig,
            n_opt,
            t_orig,
            t_opt,
            c_orig,
            c_opt,
            opt_test_runs: opt_test_runs(n_orig, n_opt)?,
            opt_runtime: opt_runtime(t_orig, t_opt)?,
            coverage_regain: coverage_regain(c_opt, c_orig)?,
        })
    }
}

/// Full report file content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub entries: Vec<MetricsEntry>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("report: {e}")))
    }

    /// CSV layout: one row per (duv, algorithm), metric columns rounded to
    /// two decimals, raw inputs appended for audit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "duv,algorithm,opt_test_runs,opt_runtime,coverage_regain,n_orig,n_opt,t_orig,t_opt,c_orig,c_opt\n",
        );
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{:.2},{:.2},{:.2},{},{},{:.6},{:.6},{:.4},{:.4}\n",
                e.duv,
                e.algorithm.tag(),
                e.opt_test_runs,
                e.opt_runtime,
                e.coverage_regain,
                e.n_orig,
                e.n_opt,
                e.t_orig,
                e.t_opt,
                e.c_orig,
                e.c_opt,
            ));
        }
        out
    }

    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::Data("report needs at least one entry".into()));
        }
        fs::write(json_path, self.to_json()).map_err(|e| Error::io(json_path, e))?;
        fs::write(csv_path, self.to_csv()).map_err(|e| Error::io(csv_path, e))?;
        Ok(())
    }
}

/// Coverage-vs-tests curve as CSV.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("tests_completed,coverage_pct\n");
    for p in curve {
        out.push_str(&format!("{},{:.4}\n", p.tests_completed, p.coverage_pct));
    }
    out
}

/// Coverage-vs-tests curve as a standalone SVG polyline.
pub fn curve_svg(curve: &[CurvePoint], title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const ML: f64 = 60.0; // left margin
    const MB: f64 = 40.0; // bottom margin
    const MT: f64 = 30.0;
    const MR: f64 = 20.0;
    let max_x = curve.last().map_or(1.0, |p| p.tests_completed as f64).max(1.0);
    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;
    let px = |tests: f64| ML + plot_w * tests / max_x;
    let py = |pct: f64| MT + plot_h * (1.0 - pct / 100.0);
    let points: Vec<String> = std::iter::once((0.0, 0.0))
        .chain(
            curve
                .iter()
                .map(|p| (p.tests_completed as f64, p.coverage_pct)),
        )
        .map(|(x, y)| format!("{:.1},{:.1}", px(x), py(y)))
        .collect();
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" ",
            "font-size=\"14\">{title}</text>\n",
            "<line x1=\"{ml}\" y1=\"{yb}\" x2=\"{xr}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "<text x=\"{tx}\" y=\"{h2}\" text-anchor=\"middle\" font-family=\"sans-serif\" ",
            "font-size=\"12\">tests completed</text>\n",
            "<text x=\"15\" y=\"{my}\" text-anchor=\"middle\" font-family=\"sans-serif\" ",
            "font-size=\"12\" transform=\"rotate(-90 15 {my})\">coverage %</text>\n",
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"{pts}\"/>\n",
            "</svg>\n"
        ),
        w = W,
        h = H,
        tx = ML + plot_w / 2.0,
        title = title,
        ml = ML,
        mt = MT,
        yb = H - MB,
        xr = W - MR,
        h2 = H - 10.0,
        my = MT + plot_h / 2.0,
        pts = points.join(" "),
    )
}

/// Write both curve artifacts for one run.
pub fn write_curve(curve: &[CurvePoint], title: &str, csv_path: &Path, svg_path: &Path) -> Result<()> {
    fs::write(csv_path, curve_csv(curve)).map_err(|e| Error::io(csv_path, e))?;
    fs::write(svg_path, curve_svg(curve, title)).map_err(|e| Error::io(svg_path, e))?;
    Ok(())
}
