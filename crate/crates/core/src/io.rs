//! Dataset persistence, JSON helpers, series files and SVG emission.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ExoControlParams, GaitParams, PathologyKind, PathologyProfile};
use crate::surrogate::{input_vector, Sample};

pub const DATASET_HEADER: [&str; 8] = [
    "step_length_m",
    "step_freq_hz",
    "kappa_nm",
    "delta_t_s",
    "severity",
    "pathology",
    "seed",
    "cot_j_per_m",
];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One rollout: gait, control, pathology, its seed and the resulting CoT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub gait: GaitParams,
    pub control: ExoControlParams,
    pub pathology: PathologyProfile,
    pub seed: u64,
    pub cot: f64,
}

impl DatasetRow {
    pub fn input(&self) -> [f64; 5] {
        input_vector(&self.gait, &self.control, self.pathology.severity)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Training samples normalized by `bounds`.
    pub fn samples(&self, bounds: &[crate::domain::Bound]) -> Vec<Sample> {
        self.rows.iter().map(|r| Sample::from_physical(&r.input(), bounds, r.cot)).collect()
    }
}

/// 17 significant digits; parses back to the identical value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn dataset_to_csv(ds: &Dataset) -> String {
    let mut s = DATASET_HEADER.join(",");
    s.push('\n');
    for r in &ds.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(r.gait.step_length),
            fmt_f64(r.gait.step_frequency),
            fmt_f64(r.control.gain_kappa),
            fmt_f64(r.control.delay_dt),
            fmt_f64(r.pathology.severity),
            r.pathology.kind.name(),
            r.seed,
            fmt_f64(r.cot)
        );
    }
    s
}

pub fn write_dataset(ds: &Dataset, path: &Path) -> Result<(), IoError> {
    fs::write(path, dataset_to_csv(ds)).map_err(io_err(path))
}

fn check_header(found: &[String]) -> Result<(), IoError> {
    for want in DATASET_HEADER {
        if !found.iter().any(|f| f == want) {
            return Err(IoError::Schema(format!("missing column `{want}`")));
        }
    }
    if let Some(extra) = found.iter().find(|f| !DATASET_HEADER.contains(&f.as_str())) {
        return Err(IoError::Schema(format!("unknown column `{extra}`")));
    }
    if found.len() != DATASET_HEADER.len() || found.iter().zip(DATASET_HEADER).any(|(f, w)| f != w) {
        return Err(IoError::Schema(format!("columns must appear in the order {}", DATASET_HEADER.join(","))));
    }
    Ok(())
}

pub fn dataset_from_csv(text: &str) -> Result<Dataset, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    check_header(&header)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() != DATASET_HEADER.len() {
            return Err(IoError::Schema(format!("row {row}: expected {} fields, found {}", DATASET_HEADER.len(), rec.len())));
        }
        let num = |c: usize| -> Result<f64, IoError> {
            rec[c]
                .trim()
                .parse::<f64>()
                .map_err(|_| IoError::Schema(format!("row {row}, column `{}`: `{}` is not a number", DATASET_HEADER[c], &rec[c])))
        };
        let kind = PathologyKind::parse(rec[5].trim())
            .ok_or_else(|| IoError::Schema(format!("row {row}, column `pathology`: unknown pathology `{}`", &rec[5])))?;
        let seed = rec[6]
            .trim()
            .parse::<u64>()
            .map_err(|_| IoError::Schema(format!("row {row}, column `seed`: `{}` is not an unsigned integer", &rec[6])))?;
        rows.push(DatasetRow {
            gait: GaitParams::new(num(0)?, num(1)?),
            control: ExoControlParams::new(num(2)?, num(3)?),
            pathology: PathologyProfile {
                kind,
                severity: num(4)?,
            },
            seed,
            cot: num(7)?,
        });
    }
    Ok(Dataset { rows })
}

pub fn read_dataset(path: &Path) -> Result<Dataset, IoError> {
    dataset_from_csv(&fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn to_json_string<T: Serialize>(v: &T) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(v: &T, path: &Path) -> Result<(), IoError> {
    fs::write(path, to_json_string(v)?).map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_str(&fs::read_to_string(path).map_err(io_err(path))?)?)
}

pub fn write_text(text: &str, path: &Path) -> Result<(), IoError> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Numeric series from the first column of a CSV file; a non-numeric first
/// line is taken as a header.
pub fn read_series(path: &Path) -> Result<Vec<f64>, IoError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cell = line.split(',').next().unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(IoError::Schema(format!("{}: line {}: `{cell}` is not a number", path.display(), i + 1))),
        }
    }
    Ok(out)
}

/// Loss curve as `epoch,loss` CSV.
pub fn loss_curve_csv(curve: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, v) in curve.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", fmt_f64(*v));
    }
    s
}

/// Dense landscape over a `(kappa, delta_t)` grid, row-major in kappa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub kappas: Vec<f64>,
    pub delta_ts: Vec<f64>,
    /// `values[i * delta_ts.len() + j]` belongs to `(kappas[i], delta_ts[j])`.
    pub values: Vec<f64>,
}

impl Landscape {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kappa_nm,delta_t_s,cot_j_per_m\n");
        for (i, k) in self.kappas.iter().enumerate() {
            for (j, d) in self.delta_ts.iter().enumerate() {
                let _ = writeln!(s, "{},{},{}", fmt_f64(*k), fmt_f64(*d), fmt_f64(self.values[i * self.delta_ts.len() + j]));
            }
        }
        s
    }

    /// Heat map with kappa on the x axis and delay on the y axis.
    pub fn to_svg(&self) -> String {
        let (nk, nd) = (self.kappas.len(), self.delta_ts.len());
        let cell = 8.0;
        let (ml, mt) = (60.0, 20.0);
        let w = ml + cell * nk as f64 + 20.0;
        let h = mt + cell * nd as f64 + 50.0;
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        for i in 0..nk {
            for j in 0..nd {
                let t = (self.values[i * nd + j] - lo) / span;
                let (r, g, b) = ((255.0 * t) as u8, (80.0 + 100.0 * (1.0 - t)) as u8, (255.0 * (1.0 - t)) as u8);
                let x = ml + cell * i as f64;
                let y = mt + cell * (nd - 1 - j) as f64;
                let _ = writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({r},{g},{b})"/>"#);
            }
        }
        let base = mt + cell * nd as f64;
        if let (Some(k0), Some(k1)) = (self.kappas.first(), self.kappas.last()) {
            let _ = writeln!(s, r#"<text x="{ml}" y="{}" font-size="10">kappa {k0:.1} .. {k1:.1} Nm</text>"#, base + 15.0);
        }
        if let (Some(d0), Some(d1)) = (self.delta_ts.first(), self.delta_ts.last()) {
            let _ = writeln!(s, r#"<text x="{ml}" y="{}" font-size="10">delay {d0:.2} .. {d1:.2} s (bottom to top)</text>"#, base + 28.0);
        }
        let _ = writeln!(s, r#"<text x="{ml}" y="{}" font-size="10">CoT {lo:.3} .. {hi:.3} J/m</text>"#, base + 41.0);
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64) -> DatasetRow {
        DatasetRow {
            gait: GaitParams::new(0.6, 1.7),
            control: ExoControlParams::new(8.5, 0.23),
            pathology: PathologyProfile::new(PathologyKind::Crouch, 1.0 / 3.0),
            seed,
            cot: 101.123456789,
        }
    }

    #[test]
    fn csv_round_trip() {
        let ds = Dataset { rows: vec![row(1), row(u64::MAX)] };
        let text = dataset_to_csv(&ds);
        assert!(text.starts_with("step_length_m,step_freq_hz,kappa_nm,delta_t_s,severity,pathology,seed,cot_j_per_m\n"));
        assert_eq!(dataset_from_csv(&text).unwrap(), ds);
    }

    #[test]
    fn schema_errors_name_the_column() {
        let missing = "step_length_m,step_freq_hz,kappa_nm,delta_t_s,severity,pathology,seed\n";
        assert!(dataset_from_csv(missing).unwrap_err().to_string().contains("cot_j_per_m"));
        let extra = format!("{},bogus\n", DATASET_HEADER.join(","));
        assert!(dataset_from_csv(&extra).unwrap_err().to_string().contains("bogus"));
        let bad = format!("{}\n1,2,3,4,0,none,5,abc\n", DATASET_HEADER.join(","));
        let msg = dataset_from_csv(&bad).unwrap_err().to_string();
        assert!(msg.contains("row 1") && msg.contains("cot_j_per_m"), "{msg}");
    }

    #[test]
    fn landscape_csv_shape() {
        let l = Landscape {
            kappas: vec![0.0, 1.0],
            delta_ts: vec![0.1, 0.2, 0.3],
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        };
        assert_eq!(l.to_csv().lines().count(), 7);
        assert_eq!(l.to_svg().matches("<rect").count(), 6);
    }
}
