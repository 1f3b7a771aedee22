//! Whitespace-separated counts files, one cell per line:
//!
//! ```text
//! basisA basisB intA intB pairs_sent psi_plus psi_minus err_psi_plus err_psi_minus
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::finitekey::{CellCounts, CountsTable};
use crate::model::{Basis, BasisPair};
use crate::observables::CellKey;
use crate::protocol::{IntensityLabel, ProtocolConfig};

pub const COUNTS_HEADER: &str = "# basisA basisB intA intB pairs_sent psi_plus psi_minus err_psi_plus err_psi_minus";

fn schema(line: usize, reason: impl Into<String>) -> Error {
    Error::Schema { line, reason: reason.into() }
}

/// Parses counts, mapping intensity labels onto the protocol's scheme and
/// checking that every cell the protocol needs is present.
pub fn read_counts<R: BufRead>(reader: R, protocol: &ProtocolConfig) -> Result<CountsTable> {
    let mut table = CountsTable::default();
    let mut last_line = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 9 {
            return Err(schema(line_no, format!("expected 9 fields, found {}", fields.len())));
        }
        let basis = |s: &str| Basis::parse(s).ok_or_else(|| schema(line_no, format!("unknown basis `{s}`")));
        let (ba, bb) = (basis(fields[0])?, basis(fields[1])?);
        let pair = BasisPair::from_parts(ba, bb)
            .ok_or_else(|| schema(line_no, format!("basis pair {ba}{bb} is not one of ZZ, XX, YY, XY, YX")))?;
        let label = |s: &str| -> Result<IntensityLabel> {
            let l =
                IntensityLabel::parse(s).ok_or_else(|| schema(line_no, format!("unknown intensity label `{s}`")))?;
            protocol.intensities.canonical(l).map_err(|e| schema(line_no, e.to_string()))
        };
        let key = CellKey::new(pair, label(fields[2])?, label(fields[3])?);
        let mut n = [0u64; 5];
        for (slot, (name, raw)) in n
            .iter_mut()
            .zip(["pairs_sent", "psi_plus", "psi_minus", "err_psi_plus", "err_psi_minus"].iter().zip(&fields[4..]))
        {
            *slot = raw
                .parse()
                .map_err(|_| schema(line_no, format!("`{name}` must be a non-negative integer, got `{raw}`")))?;
        }
        let counts =
            CellCounts { pairs_sent: n[0], psi_plus: n[1], psi_minus: n[2], err_psi_plus: n[3], err_psi_minus: n[4] };
        counts.validate().map_err(|r| schema(line_no, r))?;
        if table.get(&key).is_some() {
            return Err(schema(line_no, format!("duplicate record for cell {key}")));
        }
        table.insert(key, counts);
    }
    if table.is_empty() {
        return Err(schema(last_line, "no count records"));
    }
    for key in protocol.required_cells() {
        if table.get(&key).is_none() {
            return Err(schema(last_line, format!("missing record for required cell {key}")));
        }
    }
    Ok(table)
}

pub fn read_counts_file(path: &Path, protocol: &ProtocolConfig) -> Result<CountsTable> {
    let file = std::fs::File::open(path)?;
    read_counts(std::io::BufReader::new(file), protocol)
}

pub fn write_counts<W: Write>(mut w: W, counts: &CountsTable) -> Result<()> {
    writeln!(w, "{COUNTS_HEADER}")?;
    for (key, c) in counts.iter() {
        let (a, b) = key.basis.parts();
        writeln!(
            w,
            "{a} {b} {} {} {} {} {} {} {}",
            key.a, key.b, c.pairs_sent, c.psi_plus, c.psi_minus, c.err_psi_plus, c.err_psi_minus
        )?;
    }
    Ok(())
}
