//! Plain-text snapshot files.
//!
//! ```text
//! atoms 4000
//! box 16.79 16.79 16.79
//! iteration 0
//! 0 x y z vx vy vz
//! ...
//! ```
//! Floats use Rust's shortest round-trip formatting, so a written snapshot
//! reloads bit-for-bit.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::atoms::AtomRecord;
use crate::domain::GlobalBox;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot I/O: {0}")]
    Io(#[from] io::Error),
    #[error("snapshot line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub global: GlobalBox,
    pub atoms: Vec<AtomRecord>,
}

pub fn write_snapshot<W: Write>(mut w: W, snap: &Snapshot) -> io::Result<()> {
    let [lx, ly, lz] = snap.global.lengths;
    writeln!(w, "atoms {}", snap.atoms.len())?;
    writeln!(w, "box {lx} {ly} {lz}")?;
    writeln!(w, "iteration {}", snap.iteration)?;
    for a in &snap.atoms {
        writeln!(
            w,
            "{} {} {} {} {} {} {}",
            a.id, a.x[0], a.x[1], a.x[2], a.v[0], a.v[1], a.v[2]
        )?;
    }
    Ok(())
}

fn header<'a>(line: Option<(usize, &'a str)>, key: &str) -> Result<(usize, Vec<&'a str>), SnapshotError> {
    let (no, text) = line.ok_or(SnapshotError::Parse {
        line: 0,
        message: format!("missing `{key}` header"),
    })?;
    let mut parts = text.split_whitespace();
    if parts.next() != Some(key) {
        return Err(SnapshotError::Parse {
            line: no,
            message: format!("expected `{key}` header"),
        });
    }
    Ok((no, parts.collect()))
}

fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T, SnapshotError> {
    s.parse().map_err(|_| SnapshotError::Parse {
        line,
        message: format!("cannot parse `{s}`"),
    })
}

pub fn read_snapshot<R: BufRead>(r: R) -> Result<Snapshot, SnapshotError> {
    let lines: Vec<String> = r.lines().collect::<Result<_, _>>()?;
    let mut it = lines
        .iter()
        .enumerate()
        .map(|(i, l)| (i + 1, l.as_str()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));

    let (no, v) = header(it.next(), "atoms")?;
    let count: usize = num(v.first().copied().unwrap_or(""), no)?;
    let (no, v) = header(it.next(), "box")?;
    if v.len() != 3 {
        return Err(SnapshotError::Parse {
            line: no,
            message: "box needs three lengths".into(),
        });
    }
    let global = GlobalBox::new([num(v[0], no)?, num(v[1], no)?, num(v[2], no)?]);
    let (no, v) = header(it.next(), "iteration")?;
    let iteration: usize = num(v.first().copied().unwrap_or(""), no)?;

    let mut atoms = Vec::with_capacity(count);
    for (no, text) in it {
        let f: Vec<&str> = text.split_whitespace().collect();
        if f.len() != 7 {
            return Err(SnapshotError::Parse {
                line: no,
                message: format!("expected 7 fields, found {}", f.len()),
            });
        }
        atoms.push(AtomRecord {
            id: num(f[0], no)?,
            x: [num(f[1], no)?, num(f[2], no)?, num(f[3], no)?],
            v: [num(f[4], no)?, num(f[5], no)?, num(f[6], no)?],
        });
    }
    if atoms.len() != count {
        return Err(SnapshotError::Parse {
            line: lines.len(),
            message: format!("header says {count} atoms, found {}", atoms.len()),
        });
    }
    Ok(Snapshot {
        iteration,
        global,
        atoms,
    })
}
