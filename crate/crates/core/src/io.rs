//! CSV interchange for trajectories, binary series, spike lists and solver
//! snapshots.
//!
//! Every writer can prepend a `# config: {...}` line holding the resolved
//! run configuration; readers skip `#` lines. Reals are written in Rust's
//! shortest round-trip form, so a write/read cycle is bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::dirac::SpinorField;
use crate::error::{invalid_input, Error, Result};
use crate::observables::BinarySeries;
use crate::stochastic::{KacTrajectory, TimeGrid, Trajectory};
use crate::telegraph::Field1D;

pub const TRAJECTORY_HEADER: [&str; 3] = ["trial", "t", "v"];
pub const KAC_HEADER: [&str; 4] = ["trial", "t", "v", "s"];
pub const BINARY_HEADER: [&str; 3] = ["trial", "t", "q"];
pub const SPIKE_HEADER: [&str; 2] = ["trial", "t"];
pub const SCAN_HEADER: [&str; 3] = ["tau", "k", "std_err"];
pub const PDE_HEADER: [&str; 4] = ["x", "p_plus", "p_minus", "p_total"];
pub const SPINOR_HEADER: [&str; 6] = ["x", "re_u_plus", "im_u_plus", "re_u_minus", "im_u_minus", "density"];

/// Relative tolerance on the spacing of recorded timestamps.
pub const GRID_REL_TOL: f64 = 1e-6;

/// Lossless decimal form of a real.
pub fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordingRow {
    pub trial: i64,
    pub t: f64,
    pub v: f64,
    /// Kac internal state, when the file carries one.
    pub s: Option<i8>,
    pub line: u64,
}

/// Rows of a recording grouped by trial in ascending trial order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecordingTable {
    pub trials: BTreeMap<i64, Vec<RecordingRow>>,
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file))
}

fn check_header(reader: &mut csv::Reader<File>, accepted: &[&[&str]]) -> Result<usize> {
    let line = reader.position().line().max(1);
    let header = reader.headers().map_err(|e| parse_err(line, e.to_string()))?.clone();
    let got: Vec<&str> = header.iter().collect();
    accepted.iter().position(|h| *h == got.as_slice()).ok_or_else(|| {
        let expected: Vec<String> = accepted.iter().map(|h| h.join(",")).collect();
        parse_err(line, format!("expected header `{}`, found `{}`", expected.join("` or `"), got.join(",")))
    })
}

fn field<F: std::str::FromStr>(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<F> {
    let raw = record.get(idx).ok_or_else(|| parse_err(line, format!("missing column `{name}`")))?;
    raw.parse().map_err(|_| parse_err(line, format!("column `{name}`: cannot parse `{raw}`")))
}

fn real(record: &csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<f64> {
    let x: f64 = field(record, idx, name, line)?;
    if !x.is_finite() {
        return Err(parse_err(line, format!("column `{name}` is not finite")));
    }
    Ok(x)
}

fn records(reader: &mut csv::Reader<File>, width: usize) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + '_ {
    reader.records().map(move |r| {
        let r = r.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = r.position().map_or(0, |p| p.line());
        if r.len() != width {
            return Err(parse_err(line, format!("expected {width} fields, found {}", r.len())));
        }
        Ok((line, r))
    })
}

/// Reads a `trial,t,v` recording (or the `trial,t,v,s` Kac variant).
pub fn read_recording(path: &Path) -> Result<RecordingTable> {
    let mut reader = open_reader(path)?;
    let with_state = check_header(&mut reader, &[&TRAJECTORY_HEADER, &KAC_HEADER])? == 1;
    let width = if with_state { 4 } else { 3 };
    let mut table = RecordingTable::default();
    for rec in records(&mut reader, width) {
        let (line, r) = rec?;
        let s = if with_state {
            let s: i8 = field(&r, 3, "s", line)?;
            if s != 1 && s != -1 {
                return Err(parse_err(line, format!("column `s` must be +1 or -1, found {s}")));
            }
            Some(s)
        } else {
            None
        };
        let row = RecordingRow { trial: field(&r, 0, "trial", line)?, t: real(&r, 1, "t", line)?, v: real(&r, 2, "v", line)?, s, line };
        table.trials.entry(row.trial).or_default().push(row);
    }
    if table.trials.is_empty() {
        return Err(Error::InsufficientData(format!("{} holds no samples", path.display())));
    }
    Ok(table)
}

/// Uniform grid through the timestamps of one trial.
pub fn infer_grid(trial: i64, times: &[f64], lines: &[u64]) -> Result<TimeGrid<f64>> {
    let non_uniform = |message: String| Error::NonUniformGrid { trial, message };
    if times.len() < 2 {
        return Err(non_uniform(format!("needs at least 2 samples, found {}", times.len())));
    }
    for (k, w) in times.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(non_uniform(format!("timestamps not strictly increasing at line {}", lines[k + 1])));
        }
    }
    let n = times.len() - 1;
    let dt = (times[n] - times[0]) / n as f64;
    for (k, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if ((step - dt) / dt).abs() > GRID_REL_TOL {
            return Err(non_uniform(format!(
                "spacing {step} at line {} departs from the mean spacing {dt} by more than {GRID_REL_TOL} relative",
                lines[k + 1]
            )));
        }
    }
    TimeGrid::new(times[0], dt, n)
}

type TrialGrid<'a> = (i64, TimeGrid<f64>, &'a [RecordingRow]);

impl RecordingTable {
    fn grids(&self) -> Result<Vec<TrialGrid<'_>>> {
        let mut out = Vec::with_capacity(self.trials.len());
        let mut failures = Vec::new();
        for (&trial, rows) in &self.trials {
            let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
            let lines: Vec<u64> = rows.iter().map(|r| r.line).collect();
            match infer_grid(trial, &times, &lines) {
                Ok(g) => out.push((trial, g, rows.as_slice())),
                Err(e) => failures.push(e),
            }
        }
        match failures.len() {
            0 => Ok(out),
            1 => Err(failures.remove(0)),
            _ => {
                let report: Vec<String> = failures.iter().map(|e| e.to_string()).collect();
                let Error::NonUniformGrid { trial, .. } = failures[0] else { unreachable!() };
                Err(Error::NonUniformGrid { trial, message: format!("{} trials rejected: {}", failures.len(), report.join("; ")) })
            }
        }
    }

    pub fn into_trajectories(&self) -> Result<Vec<(i64, Trajectory<f64>)>> {
        self.grids()?
            .into_iter()
            .map(|(trial, grid, rows)| Ok((trial, Trajectory::new(grid, rows.iter().map(|r| r.v).collect())?)))
            .collect()
    }

    /// Kac trajectories; requires the `s` column.
    pub fn into_kac_trajectories(&self) -> Result<Vec<(i64, KacTrajectory<f64>)>> {
        self.grids()?
            .into_iter()
            .map(|(trial, grid, rows)| {
                let s = rows
                    .iter()
                    .map(|r| r.s.ok_or_else(|| invalid_input("recording has no `s` column; internal-state readout needs Kac data")))
                    .collect::<Result<Vec<_>>>()?;
                Ok((trial, KacTrajectory::new(grid, rows.iter().map(|r| r.v).collect(), s)?))
            })
            .collect()
    }
}

/// One trajectory per trial, each on its own inferred grid.
pub fn ingest_csv(path: &Path) -> Result<Vec<(i64, Trajectory<f64>)>> {
    read_recording(path)?.into_trajectories()
}

/// `trial,t,q` series in ascending trial order.
pub fn read_binary_series(path: &Path) -> Result<Vec<BinarySeries<f64>>> {
    let mut reader = open_reader(path)?;
    check_header(&mut reader, &[&BINARY_HEADER])?;
    // Per trial: times, source lines, values.
    type Columns = (Vec<f64>, Vec<u64>, Vec<i8>);
    let mut trials: BTreeMap<i64, Columns> = BTreeMap::new();
    for rec in records(&mut reader, 3) {
        let (line, r) = rec?;
        let trial: i64 = field(&r, 0, "trial", line)?;
        let q: i8 = field(&r, 2, "q", line)?;
        if q != 1 && q != -1 {
            return Err(parse_err(line, format!("column `q` must be +1 or -1, found {q}")));
        }
        let entry = trials.entry(trial).or_default();
        entry.0.push(real(&r, 1, "t", line)?);
        entry.1.push(line);
        entry.2.push(q);
    }
    if trials.is_empty() {
        return Err(Error::InsufficientData(format!("{} holds no samples", path.display())));
    }
    trials
        .into_iter()
        .map(|(trial, (times, lines, q))| BinarySeries::new(infer_grid(trial, &times, &lines)?, q, trial))
        .collect()
}

/// `trial,t` spike times, sorted within each trial.
pub fn read_spikes(path: &Path) -> Result<BTreeMap<i64, Vec<f64>>> {
    let mut reader = open_reader(path)?;
    check_header(&mut reader, &[&SPIKE_HEADER])?;
    let mut out: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for rec in records(&mut reader, 2) {
        let (line, r) = rec?;
        out.entry(field(&r, 0, "trial", line)?).or_default().push(real(&r, 1, "t", line)?);
    }
    for spikes in out.values_mut() {
        spikes.sort_by(f64::total_cmp);
    }
    Ok(out)
}

/// CSV writer with an optional `# config:` preamble.
pub struct CsvSink {
    inner: csv::Writer<BufWriter<File>>,
}

impl CsvSink {
    pub fn create<C: Serialize>(path: &Path, header: &[&str], config: Option<&C>) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        if let Some(c) = config {
            writeln!(file, "# config: {}", serde_json::to_string(c)?)?;
        }
        let mut inner = csv::WriterBuilder::new().from_writer(file);
        inner.write_record(header).map_err(csv_io)?;
        Ok(Self { inner })
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) -> Result<()> {
        self.inner.write_record(fields).map_err(csv_io)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

pub fn write_trajectories<C: Serialize>(path: &Path, trajs: &[(i64, &Trajectory<f64>)], config: Option<&C>) -> Result<()> {
    let mut out = CsvSink::create(path, &TRAJECTORY_HEADER, config)?;
    for (trial, tr) in trajs {
        for (t, v) in tr.grid.times().zip(&tr.values) {
            out.row([trial.to_string(), fmt_real(t), fmt_real(*v)])?;
        }
    }
    out.finish()
}

pub fn write_kac_trajectories<C: Serialize>(path: &Path, trajs: &[(i64, &KacTrajectory<f64>)], config: Option<&C>) -> Result<()> {
    let mut out = CsvSink::create(path, &KAC_HEADER, config)?;
    for (trial, tr) in trajs {
        for ((t, x), s) in tr.grid.times().zip(&tr.x).zip(&tr.s) {
            out.row([trial.to_string(), fmt_real(t), fmt_real(*x), s.to_string()])?;
        }
    }
    out.finish()
}

pub fn write_binary_series<C: Serialize>(path: &Path, series: &[BinarySeries<f64>], config: Option<&C>) -> Result<()> {
    let mut out = CsvSink::create(path, &BINARY_HEADER, config)?;
    for s in series {
        for (t, q) in s.grid.times().zip(&s.q) {
            out.row([s.trial_id.to_string(), fmt_real(t), q.to_string()])?;
        }
    }
    out.finish()
}

pub fn write_field<C: Serialize>(path: &Path, field: &Field1D<f64>, config: Option<&C>) -> Result<()> {
    let mut out = CsvSink::create(path, &PDE_HEADER, config)?;
    for (i, x) in field.grid.xs().enumerate() {
        let (p, m) = (field.p_plus[i], field.p_minus[i]);
        out.row([fmt_real(x), fmt_real(p), fmt_real(m), fmt_real(p + m)])?;
    }
    out.finish()
}

pub fn write_spinor<C: Serialize>(path: &Path, field: &SpinorField<f64>, config: Option<&C>) -> Result<()> {
    let mut out = CsvSink::create(path, &SPINOR_HEADER, config)?;
    let density = field.density();
    for (i, x) in field.grid.xs().enumerate() {
        let (p, m) = (field.u_plus[i], field.u_minus[i]);
        out.row([fmt_real(x), fmt_real(p.re), fmt_real(p.im), fmt_real(m.re), fmt_real(m.im), fmt_real(density[i])])?;
    }
    out.finish()
}

/// Reads back the `# config:` preamble of a file written by [`CsvSink`].
pub fn read_config_echo(path: &Path) -> Result<Option<serde_json::Value>> {
    let text = std::fs::read_to_string(path)?;
    match text.lines().next().and_then(|l| l.strip_prefix("# config: ")) {
        Some(json) => Ok(Some(serde_json::from_str(json)?)),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::{simulate_ou_ensemble, OUParams};

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn two_trials_well_formed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "trial,t,v\n0,0.0,1.0\n0,0.5,2.0\n0,1.0,3.0\n1,0.0,-1\n1,0.5,-2\n1,1.0,-3\n");
        let trajs = ingest_csv(&p).unwrap();
        assert_eq!(trajs.len(), 2);
        assert_eq!(trajs[1].0, 1);
        assert_eq!(trajs[1].1.values, vec![-1.0, -2.0, -3.0]);
        assert_eq!(trajs[0].1.grid.dt(), 0.5);
    }

    #[test]
    fn header_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "0,0.0,1.0\n0,0.5,2.0\n");
        let err = ingest_csv(&p).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(err.to_string().contains("trial,t,v"));
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "trial,t,v\n0,0.0,1.0\n0,0.5,abc\n");
        assert!(matches!(ingest_csv(&p).unwrap_err(), Error::Parse { line: 3, .. }));
        let p = write(&dir, "b.csv", "# note\ntrial,t,v\n0,0.0,1.0\n0,0.5\n");
        assert!(matches!(ingest_csv(&p).unwrap_err(), Error::Parse { line: 4, .. }));
    }

    #[test]
    fn jitter_is_rejected_by_trial() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "trial,t,v\n0,0,1\n0,1,1\n0,2,1\n7,0,1\n7,1.01,1\n7,2,1\n");
        match ingest_csv(&p).unwrap_err() {
            Error::NonUniformGrid { trial, .. } => assert_eq!(trial, 7),
            e => panic!("unexpected {e:?}"),
        }
        let p = write(&dir, "b.csv", "trial,t,v\n3,0,1\n3,0,1\n");
        assert!(matches!(ingest_csv(&p).unwrap_err(), Error::NonUniformGrid { trial: 3, .. }));
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TimeGrid::new(0.0, 0.01, 200).unwrap();
        let p = OUParams { gamma: 1.3, sigma: 0.7, v_rest: -0.2, v_init: 0.4 };
        let trajs = simulate_ou_ensemble(&p, &grid, 11, 3).unwrap();
        let tagged: Vec<(i64, &Trajectory<f64>)> = trajs.iter().enumerate().map(|(i, t)| (i as i64, t)).collect();
        let path = dir.path().join("ou.csv");
        write_trajectories(&path, &tagged, Some(&serde_json::json!({"seed": 11}))).unwrap();
        let back = ingest_csv(&path).unwrap();
        for ((_, a), b) in back.iter().zip(&trajs) {
            assert_eq!(a.values, b.values);
            assert_eq!(a.grid.n_steps(), 200);
            assert!((a.grid.dt() - 0.01).abs() < 1e-15);
        }
        assert_eq!(read_config_echo(&path).unwrap().unwrap()["seed"], 11);
    }

    #[test]
    fn binary_and_spike_readers() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "q.csv", "trial,t,q\n0,0,1\n0,1,-1\n0,2,1\n");
        let s = read_binary_series(&p).unwrap();
        assert_eq!(s[0].q, vec![1, -1, 1]);
        let p = write(&dir, "bad.csv", "trial,t,q\n0,0,1\n0,1,0\n");
        assert!(matches!(read_binary_series(&p).unwrap_err(), Error::Parse { line: 3, .. }));
        let p = write(&dir, "s.csv", "trial,t\n1,0.5\n1,0.2\n0,0.1\n");
        let sp = read_spikes(&p).unwrap();
        assert_eq!(sp[&1], vec![0.2, 0.5]);
    }

    #[test]
    fn kac_recording_needs_state_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "k.csv", "trial,t,v,s\n0,0,0,1\n0,1,1,-1\n0,2,0,-1\n");
        let table = read_recording(&p).unwrap();
        assert_eq!(table.into_kac_trajectories().unwrap()[0].1.s, vec![1, -1, -1]);
        let p = write(&dir, "o.csv", "trial,t,v\n0,0,0\n0,1,1\n");
        assert!(read_recording(&p).unwrap().into_kac_trajectories().is_err());
    }
}
