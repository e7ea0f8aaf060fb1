//! Plain-text scenario exchange format.
//!
//! ```text
//! K N B
//! <K*K rows of N values>   gain[j][k][n], row index j*K + k
//! <K*B rows of N values>   enb_gain[k][b][n], row index k*B + b
//! <K rows of N values>     noise
//! <1 row of K values>      budget
//! <K rows of N values>     mask
//! <B rows of N values>     threshold
//! <1 row of K integers>    serving cell
//! ```
//!
//! Values are whitespace separated. Blank lines and lines starting with `#`
//! are ignored. Floats are written in shortest round-trip form, so
//! save-then-load reproduces the scenario bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{Scenario, ScenarioParts};
use crate::error::{Error, Result};

pub fn write_scenario<W: Write>(scenario: &Scenario, mut out: W) -> Result<()> {
    let p = scenario.parts();
    let (k, n, b) = (p.num_users, p.num_subcarriers, p.num_cells);
    let mut s = String::new();
    let _ = writeln!(s, "{k} {n} {b}");
    let block = |s: &mut String, name: &str, data: &[f64], width: usize| {
        let _ = writeln!(s, "# {name}");
        for row in data.chunks(width) {
            let line: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
    };
    block(&mut s, "gain", &p.gain, n);
    block(&mut s, "enb_gain", &p.enb_gain, n);
    block(&mut s, "noise", &p.noise, n);
    block(&mut s, "budget", &p.budget, k);
    block(&mut s, "mask", &p.mask, n);
    block(&mut s, "threshold", &p.threshold, n);
    let serving: Vec<String> = p.serving.iter().map(usize::to_string).collect();
    let _ = writeln!(s, "# serving\n{}", serving.join(" "));
    out.write_all(s.as_bytes())?;
    Ok(())
}

pub fn save_scenario(scenario: &Scenario, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_scenario(scenario, std::io::BufWriter::new(file))
}

struct Rows {
    lines: Vec<(usize, String)>,
    pos: usize,
}

impl Rows {
    fn next_row(&mut self) -> Result<(usize, Vec<&str>)> {
        let (line_no, text) = self.lines.get(self.pos).ok_or(Error::Format {
            line: self.lines.last().map_or(0, |l| l.0),
            message: "unexpected end of file".into(),
        })?;
        self.pos += 1;
        Ok((*line_no, text.split_whitespace().collect()))
    }

    fn floats(&mut self, rows: usize, width: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(rows * width);
        for _ in 0..rows {
            let (line, fields) = self.next_row()?;
            if fields.len() != width {
                return Err(Error::Format { line, message: format!("expected {width} values, found {}", fields.len()) });
            }
            for f in fields {
                out.push(f.parse::<f64>().map_err(|e| Error::Format { line, message: format!("bad number {f:?}: {e}") })?);
            }
        }
        Ok(out)
    }

    fn integers(&mut self, width: usize) -> Result<Vec<usize>> {
        let (line, fields) = self.next_row()?;
        if fields.len() != width {
            return Err(Error::Format { line, message: format!("expected {width} values, found {}", fields.len()) });
        }
        fields
            .into_iter()
            .map(|f| f.parse::<usize>().map_err(|e| Error::Format { line, message: format!("bad integer {f:?}: {e}") }))
            .collect()
    }
}

pub fn read_scenario<R: Read>(input: R) -> Result<Scenario> {
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            lines.push((i + 1, trimmed.to_owned()));
        }
    }
    let mut rows = Rows { lines, pos: 0 };
    let dims = rows.integers(3)?;
    let (k, n, b) = (dims[0], dims[1], dims[2]);
    let parts = ScenarioParts {
        num_users: k,
        num_subcarriers: n,
        num_cells: b,
        gain: rows.floats(k * k, n)?,
        enb_gain: rows.floats(k * b, n)?,
        noise: rows.floats(k, n)?,
        budget: rows.floats(1, k)?,
        mask: rows.floats(k, n)?,
        threshold: rows.floats(b, n)?,
        serving: rows.integers(k)?,
    };
    if rows.pos != rows.lines.len() {
        return Err(Error::Format { line: rows.lines[rows.pos].0, message: "trailing data".into() });
    }
    Scenario::from_parts(parts)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    read_scenario(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::test_util::random_scenario;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn round_trip_is_bit_exact(seed in 0u64..1000, k in 1usize..4, n in 1usize..5, b in 1usize..3) {
            let sc = random_scenario(seed, k, n, b);
            let mut buf = Vec::new();
            write_scenario(&sc, &mut buf).unwrap();
            let back = read_scenario(buf.as_slice()).unwrap();
            prop_assert_eq!(back, sc);
        }
    }

    #[test]
    fn header_is_dimensions() {
        let sc = random_scenario(1, 2, 3, 1);
        let mut buf = Vec::new();
        write_scenario(&sc, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("2 3 1\n"));
    }

    #[test]
    fn reports_line_of_bad_value() {
        let text = "1 1 1\n1.0\n0.5\n0.1\n1.0\nabc\n1.0\n0\n";
        match read_scenario(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_input_is_an_error() {
        assert!(matches!(read_scenario("2 2 1\n1 1\n".as_bytes()), Err(Error::Format { .. })));
    }
}
