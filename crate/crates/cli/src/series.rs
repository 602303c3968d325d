//! CSV observation series: header `t,y` for symbols, `t,y1,...,yd` for real
//! vectors, and rows numbered `t = 1, 2, ...` without gaps.

use std::path::Path;

use statespace::{ObservationSeries, StatePath};

use crate::error::{CliError, CliResult};
use crate::output::{format_number, Table};

fn data(msg: impl Into<String>) -> CliError {
    CliError::Data(msg.into())
}

enum Kind {
    Symbols,
    Real(usize),
}

fn header_kind(header: &csv::StringRecord) -> CliResult<Kind> {
    let names: Vec<&str> = header.iter().collect();
    if names.first() != Some(&"t") {
        return Err(data("line 1: header must start with \"t\""));
    }
    match &names[1..] {
        ["y"] => Ok(Kind::Symbols),
        [] => Err(data("line 1: header has no observation columns")),
        cols => {
            for (i, c) in cols.iter().enumerate() {
                if *c != format!("y{}", i + 1) {
                    return Err(data(format!(
                        "line 1: column {} is \"{c}\", expected \"y{}\"",
                        i + 2,
                        i + 1
                    )));
                }
            }
            Ok(Kind::Real(cols.len()))
        }
    }
}

/// Parses series text. Errors name the 1-based line they occur on.
pub fn parse_series_str(text: &str) -> CliResult<ObservationSeries> {
    if text.trim().is_empty() {
        return Err(data("empty file"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| data(format!("line 1: {e}")))?
        .clone();
    let kind = header_kind(&header)?;

    let mut symbols = Vec::new();
    let mut reals = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| data(e.to_string()))?;
        let row_number = symbols.len() + reals.len() + 1;
        let line = format!(
            "{} (data row {row_number})",
            record.position().map_or(0, |p| p.line())
        );
        if record.len() != header.len() {
            return Err(data(format!(
                "line {line}: {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let expected = row_number;
        let t: usize = record[0].parse().map_err(|_| {
            data(format!(
                "line {line}: t = \"{}\" is not a positive integer",
                &record[0]
            ))
        })?;
        if t != expected {
            let what = if t + 1 == expected {
                "duplicate"
            } else if t < expected {
                "out of order"
            } else {
                "gap before"
            };
            return Err(data(format!(
                "line {line}: {what} t={t}, expected t={expected}"
            )));
        }
        match kind {
            Kind::Symbols => {
                let s: usize = record[1].parse().map_err(|_| {
                    data(format!(
                        "line {line}: y = \"{}\" is not a nonnegative integer",
                        &record[1]
                    ))
                })?;
                symbols.push(s);
            }
            Kind::Real(d) => {
                let mut row = Vec::with_capacity(d);
                for j in 0..d {
                    let cell = &record[j + 1];
                    let v: f64 = cell
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| {
                            data(format!(
                                "line {line}: y{} = \"{cell}\" is not a finite number",
                                j + 1
                            ))
                        })?;
                    row.push(v);
                }
                reals.push(row);
            }
        }
    }
    match kind {
        Kind::Symbols if symbols.is_empty() => Err(data("no observations after the header")),
        Kind::Real(_) if reals.is_empty() => Err(data("no observations after the header")),
        Kind::Symbols => Ok(ObservationSeries::symbols(symbols)),
        Kind::Real(_) => Ok(ObservationSeries::real(reals)?),
    }
}

pub fn read_series(path: &Path) -> CliResult<ObservationSeries> {
    let text =
        std::fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    parse_series_str(&text).map_err(|e| e.context(path.display()))
}

pub fn series_table(obs: &ObservationSeries) -> Table {
    match obs {
        ObservationSeries::Symbols(s) => {
            let mut table = Table::new(vec!["t".into(), "y".into()]);
            for (t, v) in s.iter().enumerate() {
                table.push(vec![(t + 1).to_string(), v.to_string()]);
            }
            table
        }
        ObservationSeries::Real(rows) => {
            let d = rows.first().map_or(0, |r| r.len());
            let mut columns = vec!["t".to_string()];
            columns.extend((1..=d).map(|j| format!("y{j}")));
            let mut table = Table::new(columns);
            for (t, y) in rows.iter().enumerate() {
                let mut row = vec![(t + 1).to_string()];
                row.extend(y.iter().map(|v| format_number(*v)));
                table.push(row);
            }
            table
        }
    }
}

pub fn path_table(path: &StatePath) -> Table {
    match path {
        StatePath::Discrete(s) => {
            let mut table = Table::new(vec!["t".into(), "x".into()]);
            for (t, v) in s.iter().enumerate() {
                table.push(vec![(t + 1).to_string(), v.to_string()]);
            }
            table
        }
        StatePath::Continuous(xs) => {
            let d = xs.first().map_or(0, |x| x.len());
            let mut columns = vec!["t".to_string()];
            columns.extend((1..=d).map(|j| format!("x{j}")));
            let mut table = Table::new(columns);
            for (t, x) in xs.iter().enumerate() {
                let mut row = vec![(t + 1).to_string()];
                row.extend(x.iter().map(|v| format_number(*v)));
                table.push(row);
            }
            table
        }
    }
}
