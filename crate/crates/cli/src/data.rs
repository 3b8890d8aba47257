//! Delimited input: comma by default, tab when the header contains one.

use std::path::Path;

use dglm::engine::Observation;
use dglm::survival::Subject;
use dglm::ObsContext;

use crate::error::CliError;

pub struct Table {
    pub header: Vec<String>,
    /// `(line number, fields)`.
    pub rows: Vec<(usize, Vec<String>)>,
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)?;
        return Ok(s);
    }
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))
}

pub fn parse_table(text: &str) -> Result<Table, CliError> {
    let first = text.lines().next().unwrap_or("");
    let delim = if first.contains('\t') { b'\t' } else { b',' };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delim)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("header: {e}")))?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(CliError::Data("empty input: no header row".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            CliError::Data(format!("line {line}: {e}"))
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table { header, rows })
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize, CliError> {
        self.column(name)
            .ok_or_else(|| CliError::Data(format!("missing `{name}` column in header")))
    }
}

fn number(field: &str, line: usize, what: &str) -> Result<f64, CliError> {
    field
        .parse::<f64>()
        .map_err(|_| CliError::Data(format!("line {line}: {what} `{field}` is not a number")))
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan")
}

/// A `t,y[,n]` series.
pub struct Series {
    pub labels: Vec<String>,
    pub observations: Vec<Observation>,
}

pub fn parse_series(text: &str, ctx: ObsContext) -> Result<Series, CliError> {
    let table = parse_table(text)?;
    let ty = table.require("y")?;
    let tt = table.column("t");
    let tn = table.column("n");
    if table.rows.is_empty() {
        return Err(CliError::Data("empty series: no data rows".into()));
    }
    let mut labels = Vec::with_capacity(table.rows.len());
    let mut observations = Vec::with_capacity(table.rows.len());
    for (i, (line, row)) in table.rows.iter().enumerate() {
        labels.push(
            tt.map(|c| row[c].clone())
                .unwrap_or_else(|| (i + 1).to_string()),
        );
        let mut c = ctx;
        if let Some(col) = tn {
            if !is_missing(&row[col]) {
                let n = row[col].parse::<u32>().map_err(|_| {
                    CliError::Data(format!("line {line}: n `{}` is not a count", row[col]))
                })?;
                c.n = Some(n);
            }
        }
        let field = &row[ty];
        observations.push(if is_missing(field) {
            Observation::missing(c)
        } else {
            Observation::new(number(field, *line, "y")?, c)
        });
    }
    Ok(Series {
        labels,
        observations,
    })
}

/// `id,time,event[,covariates…]` survival records.
pub fn parse_subjects(table: &Table) -> Result<Vec<Subject>, CliError> {
    let ti = table.require("id")?;
    let tt = table.require("time")?;
    let te = table.require("event")?;
    let covs: Vec<usize> = (0..table.header.len())
        .filter(|&c| c != ti && c != tt && c != te)
        .collect();
    table
        .rows
        .iter()
        .map(|(line, row)| {
            let event = match row[te].as_str() {
                "1" | "true" | "death" => true,
                "0" | "false" | "censored" => false,
                other => {
                    return Err(CliError::Data(format!(
                        "line {line}: event `{other}` must be 0 or 1"
                    )))
                }
            };
            Ok(Subject {
                id: row[ti].clone(),
                time: number(&row[tt], *line, "time")?,
                event,
                covariates: covs
                    .iter()
                    .map(|&c| number(&row[c], *line, &table.header[c]))
                    .collect::<Result<_, _>>()?,
            })
        })
        .collect()
}

/// `r,s,gap,nu` rows for direct survivor evaluation.
pub fn parse_survivor_rows(table: &Table) -> Result<Vec<(f64, f64, f64, f64)>, CliError> {
    let (cr, cs, cg, cn) = (
        table.require("r")?,
        table.require("s")?,
        table.require("gap")?,
        table.require("nu")?,
    );
    table
        .rows
        .iter()
        .map(|(line, row)| {
            Ok((
                number(&row[cr], *line, "r")?,
                number(&row[cs], *line, "s")?,
                number(&row[cg], *line, "gap")?,
                number(&row[cn], *line, "nu")?,
            ))
        })
        .collect()
}
