//! Solution files: header `t,side,u`, one row per node, side `L`/`R` at
//! jump points and `·` elsewhere (`-` or empty are accepted on input).

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::pcfun::{NodeKind, PCFunction, PcGrid};

pub fn write_solution<W: Write>(out: W, u: &PCFunction) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["t", "side", "u"]).map_err(fmt)?;
    for (t, kind, v) in u.nodes() {
        w.write_record([format!("{t:?}"), kind.tag().to_string(), format!("{v:?}")])
            .map_err(fmt)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a solution and checks its jump pairs against `jumps`.
pub fn read_solution<R: Read>(input: R, jumps: &[f64]) -> Result<PCFunction> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "side", "u"] {
        return Err(Error::Format(format!("expected header t,side,u, found {headers:?}")));
    }
    let mut pieces: Vec<Vec<f64>> = vec![Vec::new()];
    let mut values = Vec::new();
    let mut found_jumps = Vec::new();
    let mut expect_right: Option<f64> = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let row = line + 2;
        let num = |i: usize, name: &str| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| Error::Format(format!("row {row}: bad {name}")))
        };
        let (t, v) = (num(0, "t")?, num(2, "u")?);
        let kind = match rec.get(1).unwrap_or("") {
            "L" => NodeKind::Left,
            "R" => NodeKind::Right,
            "·" | "-" | "" => NodeKind::Plain,
            other => return Err(Error::Format(format!("row {row}: unknown side `{other}`"))),
        };
        match (expect_right, kind) {
            (Some(tau), NodeKind::Right) if t == tau => {
                expect_right = None;
                pieces.push(Vec::new());
            }
            (Some(tau), _) => {
                return Err(Error::Format(format!("row {row}: expected the R node at t = {tau}")));
            }
            (None, NodeKind::Right) => {
                return Err(Error::Format(format!("row {row}: R node without a preceding L node")));
            }
            (None, NodeKind::Left) => {
                expect_right = Some(t);
                found_jumps.push(t);
            }
            (None, NodeKind::Plain) => {}
        }
        pieces.last_mut().expect("nonempty").push(t);
        values.push(v);
    }
    if expect_right.is_some() {
        return Err(Error::Format("file ends inside a jump pair".into()));
    }
    if found_jumps.len() != jumps.len() || found_jumps.iter().zip(jumps).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(Error::Format(format!(
            "jump pairs at {found_jumps:?} do not match the impulse times {jumps:?}"
        )));
    }
    let grid = PcGrid::from_pieces(jumps.to_vec(), pieces).map_err(|e| Error::Format(e.to_string()))?;
    PCFunction::new(Arc::new(grid), values)
}
