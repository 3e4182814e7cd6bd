//! Plain-text report files: a key/value fit summary, tab-separated matrices
//! with axis headers, and `x y value` triples for external plotting.
//!
//! Numbers are written with 9 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use super::FormatError;
use crate::interferometer::Interferogram;
use crate::model::{TimeFrequencyView, ViewKind};
use crate::reconstruct::{
    analyze, AnalysisSummary, ReconstructionResult, Term, SCHMIDT_REPORT_COUNT,
};

pub const FIT_SUMMARY_FILE: &str = "fit_summary.txt";
pub const ANALYSIS_FILE: &str = "analysis.txt";
pub const SCHMIDT_FILE: &str = "schmidt.tsv";

/// Nine significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.8e}")
}

/// A labelled matrix: `values[[i, j]]` sits at `(rows[i], cols[j])`.
pub struct Grid<'a> {
    pub name: String,
    pub row_label: String,
    pub rows: Array1<f64>,
    pub col_label: String,
    pub cols: Array1<f64>,
    pub values: &'a Array2<f64>,
}

impl Grid<'_> {
    /// Tab-separated matrix. The first line holds `row_label\col_label`
    /// followed by the column coordinates; every further line starts with
    /// its row coordinate.
    pub fn matrix_text(&self) -> String {
        let mut out = format!("{}\\{}", self.row_label, self.col_label);
        for c in &self.cols {
            out.push('\t');
            out.push_str(&format_value(*c));
        }
        out.push('\n');
        for (i, r) in self.rows.iter().enumerate() {
            out.push_str(&format_value(*r));
            for v in self.values.row(i) {
                out.push('\t');
                out.push_str(&format_value(*v));
            }
            out.push('\n');
        }
        out
    }

    /// `row col value` triples with a header line; a blank line separates
    /// consecutive rows (the block layout surface plotters expect).
    pub fn triples_text(&self) -> String {
        let mut out = format!("{}\t{}\tvalue\n", self.row_label, self.col_label);
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            for (j, c) in self.cols.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}",
                    format_value(*r),
                    format_value(*c),
                    format_value(self.values[[i, j]])
                );
            }
        }
        out
    }

    /// Writes `<name>.tsv` and `<name>_xyz.tsv`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, FormatError> {
        let matrix = dir.join(format!("{}.tsv", self.name));
        let triples = dir.join(format!("{}_xyz.tsv", self.name));
        write_text(&matrix, &self.matrix_text())?;
        write_text(&triples, &self.triples_text())?;
        Ok(vec![matrix, triples])
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), FormatError> {
    std::fs::write(path, text).map_err(|e| FormatError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), FormatError> {
    std::fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))
}

/// Key/value summary of the fitted coefficients, ranks and subset counts.
pub fn fit_summary_text(result: &ReconstructionResult) -> String {
    let mut out = String::new();
    for (term, m) in &result.coefficients {
        let _ = writeln!(
            out,
            "{}_{} = {} +- {}",
            term.name(),
            term.unit(),
            format_value(m.value),
            format_value(m.sigma)
        );
    }
    let _ = writeln!(
        out,
        "k_full = {} +- {}",
        format_value(result.k_full.value),
        format_value(result.k_full.sigma)
    );
    let _ = writeln!(
        out,
        "k_modulus = {} +- {}",
        format_value(result.k_modulus.value),
        format_value(result.k_modulus.sigma)
    );
    for (label, fit) in [
        ("signal_in_eosi", &result.fit_signal),
        ("idler_in_eosi", &result.fit_idler),
    ] {
        let _ = writeln!(out, "subsets_used_{label} = {}", fit.n_subsets_used);
        let _ = writeln!(out, "subsets_rejected_{label} = {}", fit.n_subsets_rejected);
        if let Some(e) = fit.get(Term::Phi11) {
            let _ = writeln!(
                out,
                "phi11_{label}_fs2 = {} +- {}",
                format_value(e.mean),
                format_value(e.sem())
            );
        }
    }
    let _ = writeln!(out, "fit_degree = {}", result.fit_signal.degree.as_str());
    let _ = writeln!(out, "phi11_inconsistent = {}", result.inconsistent);
    out
}

/// Entanglement summary: ranks, exactly [`SCHMIDT_REPORT_COUNT`] Schmidt
/// coefficients with their uncertainties (zero-padded), and the three
/// time-frequency views.
pub fn write_analysis(summary: &AnalysisSummary, dir: &Path) -> Result<Vec<PathBuf>, FormatError> {
    ensure_dir(dir)?;
    let mut written = Vec::new();

    let text = format!(
        "k_full = {} +- {}\nk_modulus = {} +- {}\n",
        format_value(summary.k_full.value),
        format_value(summary.k_full.sigma),
        format_value(summary.k_modulus.value),
        format_value(summary.k_modulus.sigma)
    );
    let path = dir.join(ANALYSIS_FILE);
    write_text(&path, &text)?;
    written.push(path);

    let mut table = String::from("index\tlambda\tlambda_sigma\n");
    for k in 0..SCHMIDT_REPORT_COUNT {
        let value = summary.schmidt_values.get(k).copied().unwrap_or(0.0);
        let sigma = summary.schmidt_sigma.get(k).copied().unwrap_or(0.0);
        let _ = writeln!(
            table,
            "{}\t{}\t{}",
            k + 1,
            format_value(value),
            format_value(sigma)
        );
    }
    let path = dir.join(SCHMIDT_FILE);
    write_text(&path, &table)?;
    written.push(path);

    for view in &summary.views {
        written.extend(view_grid(view, &view.intensity()).write(dir)?);
    }
    Ok(written)
}

fn view_grid<'a>(view: &TimeFrequencyView, values: &'a Array2<f64>) -> Grid<'a> {
    Grid {
        name: view_file_stem(view.kind),
        row_label: view.axis1.label(1),
        rows: view.axis1.coordinates(),
        col_label: view.axis2.label(2),
        cols: view.axis2.coordinates(),
        values,
    }
}

/// Matrix exports of one interferogram (`interferogram_<configuration>`),
/// oriented `[sheared, herald]`.
pub fn write_interferogram(gram: &Interferogram, dir: &Path) -> Result<Vec<PathBuf>, FormatError> {
    ensure_dir(dir)?;
    let values = gram.counts().mapv(f64::from);
    let photon = gram.settings().sheared_photon;
    Grid {
        name: format!("interferogram_{}", gram.settings().configuration().as_str()),
        row_label: format!("dw_{}_sheared_rad_per_fs", photon.as_str()),
        rows: gram.sheared_grid().detunings(),
        col_label: format!("dw_{}_herald_rad_per_fs", photon.other().as_str()),
        cols: gram.herald_grid().detunings(),
        values: &values,
    }
    .write(dir)
}

/// Writes the full report of a reconstruction: fit summary, `|f|^2` and
/// `Arg f` of the merged JSA, the analysis files of [`write_analysis`], and
/// the given interferograms.
pub fn emit_report(
    result: &ReconstructionResult,
    interferograms: &[Interferogram],
    dir: &Path,
) -> Result<Vec<PathBuf>, FormatError> {
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let path = dir.join(FIT_SUMMARY_FILE);
    write_text(&path, &fit_summary_text(result))?;
    written.push(path);

    let state = &result.jsa;
    let jsi = state.jsi();
    let phase = state.phase();
    for (name, values) in [("jsi", &jsi), ("phase", &phase)] {
        written.extend(
            Grid {
                name: name.to_string(),
                row_label: "dw1_rad_per_fs".into(),
                rows: state.grid1().detunings(),
                col_label: "dw2_rad_per_fs".into(),
                cols: state.grid2().detunings(),
                values,
            }
            .write(dir)?,
        );
    }
    written.extend(write_analysis(&analyze(result), dir)?);
    for gram in interferograms {
        written.extend(write_interferogram(gram, dir)?);
    }
    Ok(written)
}

/// File stem of the exported view of `kind`.
pub fn view_file_stem(kind: ViewKind) -> String {
    format!("view_{}", kind.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_state, Photon, SourceConfig};
    use crate::reconstruct::analyze_state;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_value(-160000.0), "-1.60000000e5");
        assert_eq!(format_value(1.0 / 3.0), "3.33333333e-1");
        let back: f64 = format_value(std::f64::consts::PI).parse().unwrap();
        assert!((back - std::f64::consts::PI).abs() < 5e-9);
    }

    #[test]
    fn matrix_and_triples_layout() {
        let values = Array2::from_shape_fn((2, 3), |(i, j)| (10 * i + j) as f64);
        let g = Grid {
            name: "m".into(),
            row_label: "x".into(),
            rows: Array1::from(vec![0.5, 1.5]),
            col_label: "y".into(),
            cols: Array1::from(vec![-1.0, 0.0, 1.0]),
            values: &values,
        };
        let m = g.matrix_text();
        let lines: Vec<&str> = m.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].split('\t').count(), 4);
        assert!(lines[0].starts_with("x\\y\t"));
        assert_eq!(lines[2].split('\t').nth(3).unwrap(), "1.20000000e1");
        let t = g.triples_text();
        let rows: Vec<&str> = t.lines().collect();
        assert_eq!(rows.len(), 1 + 6 + 1);
        assert_eq!(rows[4], "");
        assert_eq!(rows[5], "1.50000000e0\t-1.00000000e0\t1.00000000e1");
    }

    #[test]
    fn schmidt_table_has_twenty_rows() {
        let cfg = SourceConfig {
            pump_chirp_fs2: -2.0e4,
            ..Default::default()
        };
        let g1 = cfg.default_grid(Photon::Signal, 64).unwrap();
        let g2 = cfg.default_grid(Photon::Idler, 64).unwrap();
        let s = build_state(&cfg, &g1, &g2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_analysis(&analyze_state(&s).unwrap(), dir.path()).unwrap();
        let table = std::fs::read_to_string(dir.path().join(SCHMIDT_FILE)).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines[0], "index\tlambda\tlambda_sigma");
        assert_eq!(lines.len(), 1 + SCHMIDT_REPORT_COUNT);
        assert!(lines[1..].iter().all(|l| l.split('\t').count() == 3));
        for kind in ViewKind::ALL {
            assert!(dir
                .path()
                .join(format!("{}.tsv", view_file_stem(kind)))
                .exists());
        }
    }

    #[test]
    fn unwritable_directory_is_reported() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let cfg = SourceConfig::default();
        let g1 = cfg.default_grid(Photon::Signal, 32).unwrap();
        let g2 = cfg.default_grid(Photon::Idler, 32).unwrap();
        let s = build_state(&cfg, &g1, &g2).unwrap();
        let err =
            write_analysis(&analyze_state(&s).unwrap(), &file.path().join("sub")).unwrap_err();
        assert!(err.to_string().starts_with("file-access"), "{err}");
    }
}
