//! Plot-ready CSV output (`index,value`, one value per line).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::Result;

pub fn write_index_value<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    writeln!(w, "index,value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_index_value_file(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let f = File::create(path)?;
    write_index_value(BufWriter::new(f), values)
}

/// Reads back an `index,value` file. Used by tests and downstream tooling.
pub fn read_index_value(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        let value = line
            .split(',')
            .nth(1)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| crate::error::invalid(format!("malformed csv line {}", lineno + 1)))?;
        out.push(value);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut buf = Vec::new();
        write_index_value(&mut buf, &[1.0, -0.5]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,value\n0,1\n1,-0.5\n");
    }
}
