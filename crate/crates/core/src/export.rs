//! Plain CSV emission with round-trippable numbers.

use std::io::{self, BufWriter, Write};

/// `v` with 17 significant digits in scientific notation.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// Line-oriented CSV writer with a fixed header.
pub struct CsvWriter<W: Write> {
    out: BufWriter<W>,
    columns: usize,
}

impl<W: Write> CsvWriter<W> {
    pub fn new(out: W, header: &[&str]) -> io::Result<Self> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter {
            out,
            columns: header.len(),
        })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> io::Result<()> {
        debug_assert_eq!(fields.len(), self.columns);
        for (k, f) in fields.iter().enumerate() {
            if k > 0 {
                self.out.write_all(b",")?;
            }
            self.out.write_all(f.as_ref().as_bytes())?;
        }
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}
