//! CSV and JSON output.

use std::io::Write;
use std::path::Path;

use holo_core::SpectralLattice;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{ExperimentError, Result};
use crate::sweep::SweepResult;

pub const SWEEP_HEADER: [&str; 8] = [
    "spacing_wl",
    "efficiency_mode",
    "spectrum",
    "pattern",
    "mean_bits",
    "std_bits",
    "realizations",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` selects JSON; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Formats `x` with 9 significant digits, in plain notation where reasonable.
pub fn significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let exponent: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..9).contains(&exponent) {
        format!("{:.*}", (8 - exponent).max(0) as usize, x)
    } else {
        sci
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_error(e: csv::Error) -> ExperimentError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => ExperimentError::Io {
            path: "<output>".into(),
            source,
        },
        other => ExperimentError::Config(format!("csv: {other:?}")),
    }
}

pub fn write_sweep_csv<W: Write>(result: &SweepResult, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(SWEEP_HEADER).map_err(csv_error)?;
    for r in &result.rows {
        out.write_record([
            format!("{}", r.spacing_wl),
            r.efficiency_mode.clone(),
            r.spectrum.clone(),
            r.pattern.clone(),
            significant(r.mean_bits),
            significant(r.std_bits),
            r.realizations.to_string(),
            r.seed.to_string(),
        ])
        .map_err(csv_error)?;
    }
    out.flush().map_err(|source| ExperimentError::Io {
        path: "<output>".into(),
        source,
    })
}

pub fn write_sweep_json<W: Write>(result: &SweepResult, mut w: W) -> Result<()> {
    let text = serde_json::to_string_pretty(result).expect("sweep results serialize");
    w.write_all(text.as_bytes())
        .and_then(|_| w.write_all(b"\n"))
        .map_err(|source| ExperimentError::Io {
            path: "<output>".into(),
            source,
        })
}

fn with_file(path: &Path, f: impl FnOnce(std::fs::File) -> Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f(file).map_err(|e| match e {
        ExperimentError::Io { source, .. } => ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn emit(result: &SweepResult, path: &Path, format: Format) -> Result<()> {
    with_file(path, |f| match format {
        Format::Csv => write_sweep_csv(result, f),
        Format::Json => write_sweep_json(result, f),
    })
}

pub fn load_sweep_json(path: &Path) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))
}

/// Channel dump with columns `row,col,re,im`, row-major.
pub fn write_channel_csv<W: Write>(h: &DMatrix<Complex64>, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["row", "col", "re", "im"]).map_err(csv_error)?;
    for i in 0..h.nrows() {
        for j in 0..h.ncols() {
            let z = h[(i, j)];
            out.write_record([i.to_string(), j.to_string(), format!("{:e}", z.re), format!("{:e}", z.im)])
                .map_err(csv_error)?;
        }
    }
    out.flush().map_err(|source| ExperimentError::Io {
        path: "<output>".into(),
        source,
    })
}

/// Lattice dump with columns `ix,iy,integral`.
pub fn write_lattice_csv<W: Write>(lattice: &SpectralLattice, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["ix", "iy", "integral"]).map_err(csv_error)?;
    for (h, v) in lattice.indices.iter().zip(&lattice.marginal_integrals) {
        out.write_record([h.ix.to_string(), h.iy.to_string(), format!("{v:e}")])
            .map_err(csv_error)?;
    }
    out.flush().map_err(|source| ExperimentError::Io {
        path: "<output>".into(),
        source,
    })
}

pub fn emit_with(path: &Path, f: impl FnOnce(std::fs::File) -> Result<()>) -> Result<()> {
    with_file(path, f)
}
