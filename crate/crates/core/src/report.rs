//! CSV and JSON report files. Mode and node indices are written 1-based.
//!
//! Floats use the shortest representation that round-trips, so repeated runs
//! with the same inputs produce identical bytes.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::circulant::CouplingFields;
use crate::error::Result;
use crate::margin::MarginReport;
use crate::modal::{InteractionSeries, ModalEnergy, RankedMode};
use crate::scalar::Real;

pub const MAGNITUDE_CSV: &str = "magnitude.csv";
pub const PHASE_CSV: &str = "phase.csv";
pub const RASTER_CSV: &str = "raster.csv";
pub const ENERGIES_CSV: &str = "energies.csv";
pub const RANKING_CSV: &str = "ranking.csv";
pub const INTERACTIONS_CSV: &str = "interactions.csv";
pub const FIELD_CSV: &str = "field.csv";
pub const MARGINS_CSV: &str = "margins.csv";
pub const FIT_JSON: &str = "fit.json";
pub const SUMMARY_JSON: &str = "summary.json";

pub fn fmt_real<T: Real>(v: T) -> String {
    let v = v.as_f64();
    // -0 and 0 print differently; keep one spelling
    if v == 0.0 {
        "0".to_string()
    } else if (1e-5..1e16).contains(&v.abs()) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn write_rows<W: Write>(out: W, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    write_rows(std::fs::File::create(path)?, header, rows)
}

fn one_based(n: usize) -> impl Iterator<Item = String> {
    (1..=n).map(|i| i.to_string())
}

/// Square or rectangular grid with a header of 1-based column indices.
pub fn grid_csv<T: Real>(grid: &Array2<T>) -> Result<String> {
    let mut buf = Vec::new();
    let header: Vec<String> = one_based(grid.ncols()).collect();
    write_rows(&mut buf, &header, grid.rows().into_iter().map(|r| r.iter().map(|v| fmt_real(*v)).collect()))?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

/// Time-major grid with a leading `step` column.
pub fn stepped_grid_csv<T: Real>(grid: &Array2<T>) -> Result<String> {
    let mut buf = Vec::new();
    let header: Vec<String> = std::iter::once("step".to_string()).chain(one_based(grid.ncols())).collect();
    let rows = grid.rows().into_iter().enumerate().map(|(k, r)| {
        std::iter::once(k.to_string()).chain(r.iter().map(|v| fmt_real(*v))).collect()
    });
    write_rows(&mut buf, &header, rows)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

/// `magnitude.csv` and `phase.csv` of a coupling matrix.
pub fn write_topology<T: Real>(dir: &Path, fields: &CouplingFields<T>) -> Result<()> {
    std::fs::write(dir.join(MAGNITUDE_CSV), grid_csv(&fields.magnitude)?)?;
    std::fs::write(dir.join(PHASE_CSV), grid_csv(&fields.phase)?)?;
    Ok(())
}

/// Phase raster, rows are time steps and columns are nodes.
pub fn write_raster<T: Real>(path: &Path, raster: &Array2<T>) -> Result<()> {
    std::fs::write(path, stepped_grid_csv(raster)?)?;
    Ok(())
}

pub struct TrialRow<'a, V> {
    pub sample_id: u64,
    pub label: usize,
    pub values: &'a V,
}

pub fn write_energies<T: Real>(path: &Path, rows: &[TrialRow<'_, ModalEnergy<T>>]) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.values.energy.len());
    let header: Vec<String> = ["sample_id", "label"].iter().map(|s| s.to_string()).chain(one_based(n)).collect();
    write_table(
        path,
        &header,
        rows.iter().map(|r| {
            [r.sample_id.to_string(), r.label.to_string()]
                .into_iter()
                .chain(r.values.energy.iter().map(|v| fmt_real(*v)))
                .collect()
        }),
    )
}

/// `rank,mode,frequency,score,median_score`.
pub fn write_ranking<T: Real>(path: &Path, ranking: &[RankedMode<T>], frequencies: &[T]) -> Result<()> {
    let header: Vec<String> =
        ["rank", "mode", "frequency", "score", "median_score"].iter().map(|s| s.to_string()).collect();
    write_table(
        path,
        &header,
        ranking.iter().enumerate().map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                (r.mode + 1).to_string(),
                fmt_real(frequencies[r.mode]),
                fmt_real(r.score),
                fmt_real(r.median_score),
            ]
        }),
    )
}

/// One column `Z_i_j` per requested pair.
pub fn write_interactions<T: Real>(
    path: &Path,
    pairs: &[(usize, usize)],
    rows: &[TrialRow<'_, Vec<InteractionSeries<T>>>],
) -> Result<()> {
    let header: Vec<String> = ["sample_id".to_string(), "label".to_string()]
        .into_iter()
        .chain(pairs.iter().map(|(i, j)| format!("Z_{}_{}", i + 1, j + 1)))
        .collect();
    write_table(
        path,
        &header,
        rows.iter().map(|r| {
            [r.sample_id.to_string(), r.label.to_string()]
                .into_iter()
                .chain(r.values.iter().map(|z| fmt_real(z.mean)))
                .collect()
        }),
    )
}

pub fn write_field<T: Real>(path: &Path, field: &Array2<T>) -> Result<()> {
    std::fs::write(path, stepped_grid_csv(field)?)?;
    Ok(())
}

/// `sample_id,label,margin_full,margin_R<r>...`.
pub fn write_margins(path: &Path, report: &MarginReport) -> Result<()> {
    let header: Vec<String> = ["sample_id", "label", "margin_full"]
        .iter()
        .map(|s| s.to_string())
        .chain(report.summaries.iter().filter_map(|s| s.order).map(|r| format!("margin_R{r}")))
        .collect();
    write_table(
        path,
        &header,
        report.samples.iter().map(|s| {
            [s.sample_id.to_string(), s.label.to_string(), fmt_real(s.full)]
                .into_iter()
                .chain(s.truncated.iter().map(|v| fmt_real(*v)))
                .collect()
        }),
    )
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Gnuplot script drawing a CSV grid as a heat map.
pub fn gnuplot_heatmap(csv_name: &str, title: &str, skip_first_column: bool) -> String {
    let using = if skip_first_column { "matrix every ::1" } else { "matrix" };
    format!(
        "set datafile separator ','\nset title '{title}'\nset view map\nunset key\n\
         plot '{csv_name}' {using} skip 1 with image\n"
    )
}

/// Gnuplot script drawing selected columns against the first.
pub fn gnuplot_lines(csv_name: &str, title: &str, columns: &[usize]) -> String {
    let plots: Vec<String> = columns.iter().map(|c| format!("'{csv_name}' using 1:{c} with lines title columnhead({c})")).collect();
    format!(
        "set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\nplot {}\n",
        plots.join(", ")
    )
}
