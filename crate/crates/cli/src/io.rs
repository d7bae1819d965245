//! CSV layouts for flows, observations, designs and simulator outputs.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use pulmocal::calibration::ObservationVector;
use pulmocal::params::PARAM_NAMES;
use pulmocal::solver::{InletFlow, SimulationOutput, MODEL_LEN, N_SAMPLES};

use crate::artifacts::Meta;
use crate::DataError;

fn reader(path: &Path) -> anyhow::Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| DataError(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse(field: &str, path: &Path, row: usize) -> anyhow::Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| DataError(format!("{} row {row}: '{field}' is not a number", path.display())).into())
}

fn expect_headers(rdr: &mut csv::Reader<fs::File>, path: &Path, want: &[&str]) -> anyhow::Result<()> {
    let got: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if got.len() < want.len() || got.iter().zip(want).any(|(g, w)| g != w) {
        bail!(DataError(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            want.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn csv_body(write: impl FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        write(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn write_with_header(path: &Path, meta: Option<&Meta>, body: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    if let Some(m) = meta {
        f.write_all(m.comment().as_bytes())?;
    }
    f.write_all(body)?;
    Ok(())
}

/// Flow series with columns (time_s, flow_ml_s).
pub fn read_flow_csv(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = reader(path)?;
    expect_headers(&mut rdr, path, &["time_s", "flow_ml_s"])?;
    let (mut t, mut q) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| DataError(format!("{}: {e}", path.display())))?;
        t.push(parse(&rec[0], path, i)?);
        q.push(parse(&rec[1], path, i)?);
    }
    if t.is_empty() {
        bail!(DataError(format!("{}: no samples", path.display())));
    }
    Ok((t, q))
}

pub fn write_flow_csv(path: &Path, meta: Option<&Meta>, t: &[f64], q: &[f64]) -> anyhow::Result<()> {
    let body = csv_body(|w| {
        w.write_record(["time_s", "flow_ml_s"])?;
        for (a, b) in t.iter().zip(q) {
            w.write_record([a.to_string(), b.to_string()])?;
        }
        Ok(())
    })?;
    write_with_header(path, meta, &body)
}

/// Inlet waveform; a closing sample at t = period is dropped.
pub fn read_inlet(path: &Path, period: f64) -> anyhow::Result<InletFlow> {
    let (t, q) = read_flow_csv(path)?;
    InletFlow::from_samples(t, q, period).with_context(|| format!("inlet flow {}", path.display()))
}

/// Measured data: systolic and diastolic pressure, then 35 rows of flows
/// and strain.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFile {
    pub times: Vec<f64>,
    pub data: ObservationVector,
}

pub fn read_observations(path: &Path) -> anyhow::Result<ObservationFile> {
    let text = fs::read_to_string(path).map_err(|e| DataError(format!("cannot read {}: {e}", path.display())))?;
    let bad = |m: &str| DataError(format!("{}: {m}", path.display()));
    let rows: Vec<Vec<&str>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split(',').map(str::trim).collect())
        .collect();
    if rows.len() != 3 + N_SAMPLES {
        bail!(bad(&format!(
            "expected a pressure header and row, a signal header and {N_SAMPLES} rows; found {} lines",
            rows.len()
        )));
    }
    if rows[0] != ["p_sys_mmHg", "p_dia_mmHg"] {
        bail!(bad("first header must be p_sys_mmHg,p_dia_mmHg"));
    }
    if rows[2] != ["t", "q_lpa", "q_rpa", "strain_pct"] {
        bail!(bad("second header must be t,q_lpa,q_rpa,strain_pct"));
    }
    let num = |s: &str, line: usize| -> anyhow::Result<f64> {
        s.parse::<f64>()
            .map_err(|_| bad(&format!("data line {line}: '{s}' is not a number")).into())
    };
    if rows[1].len() != 2 {
        bail!(bad("pressure row needs two values"));
    }
    let (p_sys, p_dia) = (num(rows[1][0], 1)?, num(rows[1][1], 1)?);
    let (mut times, mut ql, mut qr, mut strain) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, r) in rows[3..].iter().enumerate() {
        if r.len() != 4 {
            bail!(bad(&format!("signal row {i} needs four values")));
        }
        times.push(num(r[0], i + 3)?);
        ql.push(num(r[1], i + 3)?);
        qr.push(num(r[2], i + 3)?);
        strain.push(num(r[3], i + 3)?);
    }
    let data = ObservationVector::new(p_sys, p_dia, ql, qr, strain).map_err(|e| bad(&e.to_string()))?;
    Ok(ObservationFile { times, data })
}

pub fn write_observations(path: &Path, meta: Option<&Meta>, obs: &ObservationFile) -> anyhow::Result<()> {
    let mut body = String::from("p_sys_mmHg,p_dia_mmHg\n");
    body += &format!("{},{}\n", obs.data.p_sys, obs.data.p_dia);
    body += "t,q_lpa,q_rpa,strain_pct\n";
    for i in 0..obs.times.len() {
        body += &format!(
            "{},{},{},{}\n",
            obs.times[i], obs.data.q_lpa[i], obs.data.q_rpa[i], obs.data.strain[i]
        );
    }
    write_with_header(path, meta, body.as_bytes())
}

pub fn write_design_csv(path: &Path, meta: &Meta, rows: &[Vec<f64>]) -> anyhow::Result<()> {
    let body = csv_body(|w| {
        let mut header = vec!["index".to_string()];
        header.extend(PARAM_NAMES.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for (i, r) in rows.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(r.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    write_with_header(path, Some(meta), &body)
}

pub fn read_design_csv(path: &Path) -> anyhow::Result<Vec<Vec<f64>>> {
    let mut rdr = reader(path)?;
    let mut want = vec!["index"];
    want.extend(PARAM_NAMES);
    expect_headers(&mut rdr, path, &want)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| DataError(format!("{}: {e}", path.display())))?;
        rows.push((1..=PARAM_NAMES.len()).map(|k| parse(&rec[k], path, i)).collect::<anyhow::Result<_>>()?);
    }
    Ok(rows)
}

/// One simulator run of the design.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRow {
    pub converged: bool,
    pub physiological: bool,
    /// Failure message; `values` is empty when set.
    pub error: Option<String>,
    /// Model vector: pressure, LPA flow, RPA flow, area (35 samples each).
    pub values: Vec<f64>,
}

impl SimulationRow {
    pub fn usable(&self, exclude_tagged: bool) -> bool {
        self.error.is_none() && (!exclude_tagged || (self.converged && self.physiological))
    }
}

fn model_columns() -> Vec<String> {
    let mut cols = Vec::with_capacity(MODEL_LEN);
    for prefix in ["p", "q_lpa", "q_rpa", "a"] {
        cols.extend((0..N_SAMPLES).map(|i| format!("{prefix}_{i}")));
    }
    cols
}

pub fn write_simulations_csv(path: &Path, meta: &Meta, rows: &[SimulationRow]) -> anyhow::Result<()> {
    let body = csv_body(|w| {
        let mut header: Vec<String> = ["index", "converged", "physiological", "error"].map(String::from).to_vec();
        header.extend(model_columns());
        w.write_record(&header)?;
        for (i, r) in rows.iter().enumerate() {
            let mut rec = vec![
                i.to_string(),
                u8::from(r.converged).to_string(),
                u8::from(r.physiological).to_string(),
                r.error.clone().unwrap_or_default(),
            ];
            if r.error.is_some() {
                rec.extend(std::iter::repeat_n(String::new(), MODEL_LEN));
            } else {
                rec.extend(r.values.iter().map(|v| v.to_string()));
            }
            w.write_record(&rec)?;
        }
        Ok(())
    })?;
    write_with_header(path, Some(meta), &body)
}

pub fn read_simulations_csv(path: &Path) -> anyhow::Result<Vec<SimulationRow>> {
    let mut rdr = reader(path)?;
    expect_headers(&mut rdr, path, &["index", "converged", "physiological", "error"])?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| DataError(format!("{}: {e}", path.display())))?;
        if rec.len() != 4 + MODEL_LEN {
            bail!(DataError(format!("{} row {i}: expected {} fields", path.display(), 4 + MODEL_LEN)));
        }
        let error = (!rec[3].is_empty()).then(|| rec[3].to_string());
        let values = if error.is_some() {
            Vec::new()
        } else {
            (4..4 + MODEL_LEN).map(|k| parse(&rec[k], path, i)).collect::<anyhow::Result<_>>()?
        };
        rows.push(SimulationRow {
            converged: &rec[1] == "1",
            physiological: &rec[2] == "1",
            error,
            values,
        });
    }
    Ok(rows)
}

/// Sampled waveforms with columns (t, p_mmHg, q_lpa, q_rpa, a_cm2).
pub fn write_waveforms_csv(path: &Path, meta: Option<&Meta>, out: &SimulationOutput, period: f64) -> anyhow::Result<()> {
    let t = out.sample_times(period);
    let body = csv_body(|w| {
        w.write_record(["t", "p_mmHg", "q_lpa", "q_rpa", "a_cm2"])?;
        for i in 0..t.len() {
            w.write_record([
                t[i].to_string(),
                out.mpa_pressure[i].to_string(),
                out.lpa_flow[i].to_string(),
                out.rpa_flow[i].to_string(),
                out.mpa_area[i].to_string(),
            ])?;
        }
        Ok(())
    })?;
    write_with_header(path, meta, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observation_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("obs.csv");
        let obs = ObservationFile {
            times: (0..N_SAMPLES).map(|i| i as f64 * 0.025).collect(),
            data: ObservationVector::new(
                25.5,
                8.25,
                vec![10.0; N_SAMPLES],
                vec![12.5; N_SAMPLES],
                (0..N_SAMPLES).map(|i| i as f64 * 0.3).collect(),
            )
            .unwrap(),
        };
        let meta = Meta::new("simulate", Some(4), "abc");
        write_observations(&p, Some(&meta), &obs).unwrap();
        let back = read_observations(&p).unwrap();
        assert_eq!(back, obs);
        assert_eq!(back.data.to_vector().len(), 107);
    }

    #[test]
    fn short_observation_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("obs.csv");
        fs::write(&p, "p_sys_mmHg,p_dia_mmHg\n25,8\nt,q_lpa,q_rpa,strain_pct\n0,1,1,0\n").unwrap();
        let e = read_observations(&p).unwrap_err();
        assert!(e.downcast_ref::<DataError>().is_some());
    }

    #[test]
    fn simulation_rows_round_trip_with_failures() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sims.csv");
        let rows = vec![
            SimulationRow {
                converged: true,
                physiological: false,
                error: None,
                values: (0..MODEL_LEN).map(|i| i as f64 / 7.0).collect(),
            },
            SimulationRow {
                converged: false,
                physiological: false,
                error: Some("collapse in vessel MPA".into()),
                values: Vec::new(),
            },
        ];
        write_simulations_csv(&p, &Meta::new("simulate", None, "h"), &rows).unwrap();
        assert_eq!(read_simulations_csv(&p).unwrap(), rows);
        assert!(rows[0].usable(false) && !rows[0].usable(true) && !rows[1].usable(false));
    }
}
