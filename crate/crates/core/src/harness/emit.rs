//! Table emission: CSV (header always written), JSON arrays of row objects,
//! and plot data with per-cell medians and interquartile ranges grouped by `n`.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{EquivalenceRow, OutputFormat, RectangularRow, SpectrumOutcome, SweepRow, STATUS_OK};
use crate::Result;

/// A row type with a fixed CSV column order.
pub trait TableRow: Serialize + DeserializeOwned {
    const COLUMNS: &'static [&'static str];

    /// `(n, x)` cell key used for plot data.
    fn cell(&self) -> (usize, f64);
    fn ok(&self) -> bool;
    /// Per-replica quantities summarized by median and IQR.
    fn measured(&self) -> Vec<(&'static str, Option<f64>)>;
    /// Quantities constant within a cell.
    fn constants(&self) -> Vec<(&'static str, f64)> {
        Vec::new()
    }
}

impl TableRow for SweepRow {
    const COLUMNS: &'static [&'static str] = &[
        "n", "gamma0", "replica", "seed", "lambda1", "overlap_sq", "lambda_pred", "overlap_pred", "sigma", "k_star",
        "wall_time_ms", "status",
    ];

    fn cell(&self) -> (usize, f64) {
        (self.n, self.gamma0)
    }

    fn ok(&self) -> bool {
        self.status == STATUS_OK
    }

    fn measured(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![("lambda1", self.lambda1), ("overlap_sq", self.overlap_sq)]
    }

    fn constants(&self) -> Vec<(&'static str, f64)> {
        vec![("lambda_pred", self.lambda_pred), ("overlap_pred", self.overlap_pred)]
    }
}

impl TableRow for EquivalenceRow {
    const COLUMNS: &'static [&'static str] = &["n", "gamma0", "replica", "seed", "residual_norm", "wall_time_ms", "status"];

    fn cell(&self) -> (usize, f64) {
        (self.n, self.gamma0)
    }

    fn ok(&self) -> bool {
        self.status == STATUS_OK
    }

    fn measured(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![("residual_norm", self.residual_norm)]
    }
}

impl TableRow for RectangularRow {
    const COLUMNS: &'static [&'static str] = &[
        "n", "m", "gamma0", "replica", "seed", "pairing_defect", "zero_count", "expected_zero_count", "gram_defect",
        "gram_lambda1", "overlap_u", "overlap_v", "wall_time_ms", "status",
    ];

    fn cell(&self) -> (usize, f64) {
        (self.n, self.gamma0)
    }

    fn ok(&self) -> bool {
        self.status == STATUS_OK
    }

    fn measured(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("gram_lambda1", self.gram_lambda1),
            ("overlap_u", self.overlap_u),
            ("overlap_v", self.overlap_v),
            ("pairing_defect", self.pairing_defect),
        ]
    }
}

/// Linear-interpolation quantile of sorted data, `p ∈ [0, 1]`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and interquartile range of one measured column in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub x: f64,
    pub replicas_ok: usize,
    /// `(name, median, q1, q3)` per measured column.
    pub stats: Vec<(String, f64, f64, f64)>,
    pub constants: Vec<(String, f64)>,
}

/// Per-cell summaries in order of first appearance.
pub fn summarize<T: TableRow>(rows: &[T]) -> Vec<CellSummary> {
    let mut keys: Vec<(usize, f64)> = Vec::new();
    for r in rows {
        let c = r.cell();
        if !keys.iter().any(|k| k.0 == c.0 && k.1.to_bits() == c.1.to_bits()) {
            keys.push(c);
        }
    }
    keys.into_iter()
        .map(|(n, x)| {
            let in_cell: Vec<&T> = rows.iter().filter(|r| r.cell().0 == n && r.cell().1.to_bits() == x.to_bits()).collect();
            let ok: Vec<&&T> = in_cell.iter().filter(|r| r.ok()).collect();
            let names: Vec<&'static str> = in_cell[0].measured().iter().map(|(k, _)| *k).collect();
            let stats = names
                .iter()
                .enumerate()
                .map(|(i, name)| {
                    let mut v: Vec<f64> = ok.iter().filter_map(|r| r.measured()[i].1).collect();
                    v.sort_by(f64::total_cmp);
                    (name.to_string(), quantile(&v, 0.5), quantile(&v, 0.25), quantile(&v, 0.75))
                })
                .collect();
            let constants = in_cell[0].constants().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            CellSummary { n, x, replicas_ok: ok.len(), stats, constants }
        })
        .collect()
}

fn write_plotdata<T: TableRow, W: Write>(rows: &[T], mut w: W) -> Result<()> {
    let summaries = summarize(rows);
    let mut current: Option<usize> = None;
    for s in &summaries {
        if current != Some(s.n) {
            if current.is_some() {
                writeln!(w, "\n")?;
            }
            current = Some(s.n);
            writeln!(w, "# n = {}", s.n)?;
            let mut header = vec!["gamma0".to_string(), "replicas_ok".to_string()];
            for (name, ..) in &s.stats {
                header.extend([format!("{name}_median"), format!("{name}_q1"), format!("{name}_q3")]);
            }
            header.extend(s.constants.iter().map(|(k, _)| k.clone()));
            writeln!(w, "{}", header.join(" "))?;
        }
        let mut fields = vec![s.x.to_string(), s.replicas_ok.to_string()];
        for (_, med, q1, q3) in &s.stats {
            fields.extend([med.to_string(), q1.to_string(), q3.to_string()]);
        }
        fields.extend(s.constants.iter().map(|(_, v)| v.to_string()));
        writeln!(w, "{}", fields.join(" "))?;
    }
    Ok(())
}

/// Writes `rows` in the requested format.
pub fn emit<T: TableRow, W: Write>(rows: &[T], format: OutputFormat, mut w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            out.write_record(T::COLUMNS)?;
            for r in rows {
                out.serialize(r)?;
            }
            out.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
        }
        OutputFormat::Plotdata => write_plotdata(rows, w)?,
    }
    Ok(())
}

pub fn emit_to_string<T: TableRow>(rows: &[T], format: OutputFormat) -> Result<String> {
    let mut buf = Vec::new();
    emit(rows, format, &mut buf)?;
    Ok(String::from_utf8(buf).expect("emitters write UTF-8"))
}

/// Writes a spectrum histogram: CSV columns `bin_left, bin_right, count,
/// density`; JSON is the whole outcome; plot data is whitespace separated.
pub fn emit_spectrum<W: Write>(out: &SpectrumOutcome, format: OutputFormat, mut w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut c = csv::Writer::from_writer(w);
            for b in &out.histogram.bins {
                c.serialize(b)?;
            }
            if out.histogram.bins.is_empty() {
                c.write_record(["bin_left", "bin_right", "count", "density"])?;
            }
            c.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, out)?;
            writeln!(w)?;
        }
        OutputFormat::Plotdata => {
            writeln!(w, "# n = {} sigma = {} ks_distance = {}", out.n, out.sigma, out.ks_distance)?;
            writeln!(w, "bin_center density semicircle")?;
            for b in &out.histogram.bins {
                let x = 0.5 * (b.bin_left + b.bin_right);
                writeln!(w, "{} {} {}", x, b.density, crate::spectral::semicircle_density(x, out.sigma))?;
            }
        }
    }
    Ok(())
}

/// Parses a JSON table written by [`emit`].
pub fn read_json<T: TableRow>(text: &str) -> Result<Vec<T>> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, g: f64, r: usize, l: Option<f64>) -> SweepRow {
        SweepRow {
            n,
            gamma0: g,
            replica: r,
            seed: 12345678901234567890,
            lambda1: l,
            overlap_sq: l.map(|v| v / 10.0),
            lambda_pred: 2.5,
            overlap_pred: 0.75,
            sigma: 1.0,
            k_star: 1,
            wall_time_ms: 0,
            status: if l.is_some() { STATUS_OK.into() } else { "error: eigensolver not converged, badly".into() },
        }
    }

    #[test]
    fn csv_header_and_lines() {
        let empty: Vec<SweepRow> = Vec::new();
        let s = emit_to_string(&empty, OutputFormat::Csv).unwrap();
        assert_eq!(s, SweepRow::COLUMNS.join(",") + "\n");
        let rows: Vec<SweepRow> = (0..24).map(|i| row(100, 0.5, i, Some(i as f64))).collect();
        let s = emit_to_string(&rows, OutputFormat::Csv).unwrap();
        assert_eq!(s.lines().count(), 25);
        let failed = emit_to_string(&[row(10, 1.0, 0, None)], OutputFormat::Csv).unwrap();
        let line = failed.lines().nth(1).unwrap();
        assert!(line.starts_with("10,1.0,0,12345678901234567890,,,2.5"), "{line}");
        assert!(line.ends_with("\"error: eigensolver not converged, badly\""));
    }

    #[test]
    fn json_round_trip() {
        let rows = vec![row(10, 0.1 + 0.2, 0, Some(1.0 / 3.0)), row(20, 1e-300, 1, None)];
        let s = emit_to_string(&rows, OutputFormat::Json).unwrap();
        let back: Vec<SweepRow> = read_json(&s).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn plotdata_groups_by_n() {
        let mut rows = Vec::new();
        for n in [10, 20] {
            for g in [0.5, 1.0] {
                for r in 0..4 {
                    rows.push(row(n, g, r, Some(r as f64)));
                }
            }
        }
        rows.push(row(20, 1.0, 4, None));
        let s = emit_to_string(&rows, OutputFormat::Plotdata).unwrap();
        assert_eq!(s.matches("# n = ").count(), 2);
        let last = s.lines().last().unwrap();
        let fields: Vec<&str> = last.split(' ').collect();
        assert_eq!(fields[0], "1");
        assert_eq!(fields[1], "4");
        assert_eq!(fields[2], "1.5");
        assert_eq!(fields[3], "0.75");
        assert_eq!(fields[4], "2.25");
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
    }
}
