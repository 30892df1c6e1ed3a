//! CSV tables preceded by `# key=value` provenance lines.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::analysis::{TdrReport, ThermoSample, TimingBreakdown};

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("provenance line {0:?} is not `# key=value`")]
    Provenance(String),
    #[error("table has no header row")]
    NoHeader,
    #[error("row {row} has {got} fields, header has {want}")]
    Ragged { row: usize, got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Table {
    pub provenance: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(provenance: Vec<(String, String)>, columns: &[&str]) -> Self {
        Table {
            provenance,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), TableError> {
        for (k, v) in &self.provenance {
            writeln!(w, "# {k}={v}")?;
        }
        let mut cw = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        cw.write_record(&self.columns)?;
        for r in &self.rows {
            cw.write_record(r)?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to memory");
        out
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Table, TableError> {
        let mut provenance = Vec::new();
        loop {
            let buf = r.fill_buf()?;
            if buf.first() != Some(&b'#') {
                break;
            }
            let mut line = String::new();
            r.read_line(&mut line)?;
            let body = line
                .trim_end_matches('\n')
                .strip_prefix("# ")
                .ok_or_else(|| TableError::Provenance(line.clone()))?;
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| TableError::Provenance(line.clone()))?;
            provenance.push((k.to_string(), v.to_string()));
        }
        let mut cr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
        let mut records = cr.records();
        let columns: Vec<String> = match records.next() {
            Some(h) => h?.iter().map(str::to_string).collect(),
            None => return Err(TableError::NoHeader),
        };
        let mut rows = Vec::new();
        for (k, rec) in records.enumerate() {
            let rec = rec?;
            if rec.len() != columns.len() {
                return Err(TableError::Ragged {
                    row: k + 1,
                    got: rec.len(),
                    want: columns.len(),
                });
            }
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table {
            provenance,
            columns,
            rows,
        })
    }
}

pub fn thermo_table(provenance: Vec<(String, String)>, samples: &[ThermoSample]) -> Table {
    let mut t = Table::new(provenance, &["iteration", "temperature", "pe", "ke", "total"]);
    for s in samples {
        t.push(vec![
            s.iteration.to_string(),
            s.temperature.to_string(),
            s.pe.to_string(),
            s.ke.to_string(),
            s.total.to_string(),
        ]);
    }
    t
}

pub fn timing_columns() -> [&'static str; 6] {
    ["label", "mode", "t_total", "t_force", "t_neigh", "t_comm"]
}

pub fn timing_row(label: &str, mode: &str, b: &TimingBreakdown) -> Vec<String> {
    vec![
        label.to_string(),
        mode.to_string(),
        b.t_total.to_string(),
        b.t_force.to_string(),
        b.t_neigh.to_string(),
        b.t_comm.to_string(),
    ]
}

pub fn tdr_columns() -> [&'static str; 5] {
    ["label", "alpha", "beta", "threshold", "pass"]
}

pub fn tdr_row(label: &str, r: &TdrReport) -> Vec<String> {
    vec![
        label.to_string(),
        r.alpha.to_string(),
        r.beta.to_string(),
        r.delta.to_string(),
        r.pass.to_string(),
    ]
}
