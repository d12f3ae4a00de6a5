//! CSV input and output.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a file
//! read back reproduces the values exactly and identical runs give identical
//! bytes. Empty event fields mean "did not happen within the horizon".

use std::io::{Read, Write};
use std::path::Path;

use crate::diagnostics::ParamSummary;
use crate::error::{Error, Result};
use crate::mcmc::ChainOutput;
use crate::num::Real;
use crate::population::{EventHistory, EventRecord, Framework, Population, Time};
use crate::predictive::PredictiveEnvelope;

fn expect_header<R: Read>(reader: &mut csv::Reader<R>, expected: &[&str], what: &str) -> Result<()> {
    let headers = reader.headers()?;
    if headers.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::input(format!(
            "{what}: expected header `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, what: &str, line: usize) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::input(format!("{what}, line {line}: cannot parse `{field}`")))
}

fn parse_optional_time(field: &str, what: &str, line: usize) -> Result<Option<Time>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        parse(field, what, line).map(Some)
    }
}

/// Rows of `id,...` must list ids `0..n` in order.
fn check_id(id: usize, row: usize, what: &str) -> Result<()> {
    if id != row {
        return Err(Error::input(format!("{what}: row {} has id {id}; ids must run 0, 1, 2, ... in order", row + 1)));
    }
    Ok(())
}

pub fn read_population<F: Real, R: Read>(input: R) -> Result<Population<F>> {
    let mut reader = csv::Reader::from_reader(input);
    expect_header(&mut reader, &["id", "x", "y"], "population")?;
    let mut coords = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        check_id(parse(&rec[0], "population", line)?, k, "population")?;
        let x: f64 = parse(&rec[1], "population", line)?;
        let y: f64 = parse(&rec[2], "population", line)?;
        coords.push((F::of(x), F::of(y)));
    }
    Population::new(coords)
}

pub fn write_population<F: Real, W: Write>(population: &Population<F>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "x", "y"])?;
    for (i, (x, y)) in population.coords().iter().enumerate() {
        w.write_record([i.to_string(), x.to_string(), y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events<R: Read>(input: R, framework: Framework, horizon: Time) -> Result<EventHistory> {
    let mut reader = csv::Reader::from_reader(input);
    expect_header(&mut reader, &["id", "t_exposed", "t_infectious", "t_removed"], "events")?;
    let mut records = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        check_id(parse(&rec[0], "events", line)?, k, "events")?;
        records.push(EventRecord {
            exposed: parse_optional_time(&rec[1], "events", line)?,
            infectious: parse_optional_time(&rec[2], "events", line)?,
            removed: parse_optional_time(&rec[3], "events", line)?,
        });
    }
    EventHistory::new(framework, records, horizon)
}

pub fn write_events<W: Write>(history: &EventHistory, out: W) -> Result<()> {
    let opt = |t: Option<Time>| t.map_or(String::new(), |t| t.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "t_exposed", "t_infectious", "t_removed"])?;
    for (i, r) in history.records().iter().enumerate() {
        w.write_record([i.to_string(), opt(r.exposed), opt(r.infectious), opt(r.removed)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve<W: Write>(curve: &[usize], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "new_infections"])?;
    for (t, c) in curve.iter().enumerate() {
        w.write_record([t.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve<R: Read>(input: R) -> Result<Vec<usize>> {
    let mut reader = csv::Reader::from_reader(input);
    expect_header(&mut reader, &["t", "new_infections"], "curve")?;
    let mut curve = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        check_id(parse(&rec[0], "curve", k + 2)?, k, "curve")?;
        curve.push(parse(&rec[1], "curve", k + 2)?);
    }
    Ok(curve)
}

pub fn write_draws<F: Real, W: Write>(chain: &ChainOutput<F>, names: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iter".to_string(), "log_post".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for ((it, lp), row) in chain.iterations.iter().zip(&chain.log_density).zip(&chain.draws) {
        let mut rec = vec![it.to_string(), lp.to_string()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Draws read back from a draws file.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawTable<F> {
    pub names: Vec<String>,
    pub iterations: Vec<usize>,
    pub log_post: Vec<F>,
    pub draws: Vec<Vec<F>>,
}

pub fn read_draws<F: Real, R: Read>(input: R) -> Result<DrawTable<F>> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "iter" || &headers[1] != "log_post" {
        return Err(Error::input("draws: header must start with `iter,log_post` and name at least one parameter"));
    }
    let names: Vec<String> = headers.iter().skip(2).map(str::to_string).collect();
    let mut table = DrawTable { names, iterations: vec![], log_post: vec![], draws: vec![] };
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        table.iterations.push(parse(&rec[0], "draws", line)?);
        table.log_post.push(F::of(parse::<f64>(&rec[1], "draws", line)?));
        table.draws.push(
            rec.iter()
                .skip(2)
                .map(|f| parse::<f64>(f, "draws", line).map(F::of))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(table)
}

/// One row per parameter. Missing diagnostics are left empty.
pub fn write_diagnostics<F: Real, W: Write>(
    names: &[String],
    summary: &[ParamSummary<F>],
    geweke: &[Option<F>],
    psrf: &[Option<F>],
    out: W,
) -> Result<()> {
    let opt = |x: Option<F>| x.map_or(String::new(), |x| x.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param", "mean", "median", "q025", "q975", "geweke_z", "psrf"])?;
    for (k, name) in names.iter().enumerate() {
        let s = &summary[k];
        w.write_record([
            name.clone(),
            s.mean.to_string(),
            s.median.to_string(),
            s.q025.to_string(),
            s.q975.to_string(),
            opt(geweke[k]),
            opt(psrf[k]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_envelope<W: Write>(env: &PredictiveEnvelope, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "median", "q025", "q975"])?;
    for t in 0..env.len() {
        w.write_record([t.to_string(), env.median[t].to_string(), env.q025[t].to_string(), env.q975[t].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Opens `path` for reading, naming the file in the error.
pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}
