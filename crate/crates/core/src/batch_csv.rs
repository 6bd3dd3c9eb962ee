//! CSV exchange format for batched prox evaluation.
//!
//! Input header: `gamma,x,N,d_1,w_1,...,d_Nmax,w_Nmax`. Each row holds one
//! instance; only the first `N` pairs are read, and the padded pairs beyond
//! them must carry weight zero. Pairs need not be sorted and may repeat. The
//! output repeats every input field and appends a `y` column. Numbers are
//! written with 17 significant digits so they parse back to the same `f64`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::prox::{prox_batch, ProxBatch, ProxInstance};

/// Parsed batch file.
#[derive(Debug, Clone)]
pub struct ProxTable {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
    pub instances: Vec<ProxInstance>,
    pub x: Vec<f64>,
}

impl ProxTable {
    pub fn batch(&self) -> Result<ProxBatch> {
        ProxBatch::from_instances(&self.instances, &self.x)
    }

    pub fn evaluate(&self) -> Result<Vec<f64>> {
        Ok(prox_batch(&self.batch()?))
    }
}

/// Round-trip decimal form with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn row_err(row: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("row {row}: {msg}"))
}

fn check_header(header: &[String]) -> Result<usize> {
    let bad = || Error::Format(format!("expected header gamma,x,N,d_1,w_1,..., got {}", header.join(",")));
    if header.len() < 5 || !(header.len() - 3).is_multiple_of(2) {
        return Err(bad());
    }
    if header[0] != "gamma" || header[1] != "x" || header[2] != "N" {
        return Err(bad());
    }
    let slots = (header.len() - 3) / 2;
    for k in 1..=slots {
        if header[1 + 2 * k] != format!("d_{k}") || header[2 + 2 * k] != format!("w_{k}") {
            return Err(bad());
        }
    }
    Ok(slots)
}

/// Reads a batch file. Rows are numbered from 1 (the first line after the header).
pub fn read_prox_csv<R: Read>(reader: R) -> Result<ProxTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Format(format!("header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let slots = check_header(&header)?;
    let mut table = ProxTable { header, records: vec![], instances: vec![], x: vec![] };
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| row_err(row, e))?;
        if rec.len() != 3 + 2 * slots {
            return Err(row_err(row, format!("expected {} fields, found {}", 3 + 2 * slots, rec.len())));
        }
        let num = |j: usize| -> Result<f64> {
            let v: f64 = rec[j].parse().map_err(|_| row_err(row, format!("cannot parse {:?}", &rec[j])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(row_err(row, format!("non-finite value {:?}", &rec[j])))
            }
        };
        let gamma = num(0)?;
        let x = num(1)?;
        let n: usize = rec[2].parse().map_err(|_| row_err(row, format!("cannot parse N = {:?}", &rec[2])))?;
        if n == 0 || n > slots {
            return Err(row_err(row, format!("N = {n} outside 1..={slots}")));
        }
        let mut data = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for k in 0..slots {
            let w = num(4 + 2 * k)?;
            if k < n {
                data.push(num(3 + 2 * k)?);
                weights.push(w);
            } else if w != 0.0 {
                return Err(row_err(row, format!("padded slot {} has nonzero weight", k + 1)));
            }
        }
        let inst = ProxInstance::prepare(&data, &weights, gamma).map_err(|e| row_err(row, e))?;
        table.records.push(rec.iter().map(str::to_owned).collect());
        table.instances.push(inst);
        table.x.push(x);
    }
    if table.instances.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    Ok(table)
}

/// Writes the input rows with the `y` column appended.
pub fn write_prox_csv<W: Write>(writer: W, table: &ProxTable, y: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    let mut header = table.header.clone();
    header.push("y".into());
    wtr.write_record(&header).map_err(csv_err)?;
    for (rec, v) in table.records.iter().zip(y) {
        let mut fields = rec.clone();
        fields.push(format_f64(*v));
        wtr.write_record(&fields).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `samples` equally spaced points of `x -> prox(x)` on `[xmin, xmax]`.
pub fn stair_samples(inst: &ProxInstance, xmin: f64, xmax: f64, samples: usize) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {samples}")));
    }
    if !(xmin.is_finite() && xmax.is_finite() && xmin < xmax) {
        return Err(Error::InvalidParameter(format!("bad sampling range [{xmin}, {xmax}]")));
    }
    let step = (xmax - xmin) / (samples - 1) as f64;
    (0..samples)
        .map(|i| {
            let x = if i + 1 == samples { xmax } else { xmin + i as f64 * step };
            inst.prox(x).map(|y| (x, y))
        })
        .collect()
}

/// Stair table with columns `kind,index,x,y`: one `sample` row per sample and
/// a `plateau_start`/`plateau_end` pair per data point.
pub fn write_stair_csv<W: Write>(writer: W, inst: &ProxInstance, samples: &[(f64, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    wtr.write_record(["kind", "index", "x", "y"]).map_err(csv_err)?;
    for &(x, y) in samples {
        wtr.write_record(["sample", "", &format_f64(x), &format_f64(y)]).map_err(csv_err)?;
    }
    for k in 1..=inst.len() {
        let (lo, hi) = inst.plateau_interval(k)?;
        let d = format_f64(inst.data()[k - 1]);
        wtr.write_record(["plateau_start", &k.to_string(), &format_f64(lo), &d]).map_err(csv_err)?;
        wtr.write_record(["plateau_end", &k.to_string(), &format_f64(hi), &d]).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}
