//! Field dump format: one metadata line followed by the raw little-endian
//! `f64` samples in row-major order.
//!
//! ```text
//! prnls-field n=2 N=256 L=20 p=3 c=16 label=u_c
//! <N^n * 8 bytes>
//! ```

use std::io::{BufRead, Write};

use super::{Field, Grid};
use crate::error::{Error, Result};

const MAGIC: &str = "prnls-field";

#[derive(Debug, Clone, PartialEq)]
pub struct DumpMeta {
    pub p: f64,
    pub c: f64,
    pub label: String,
}

pub fn write_dump(out: &mut impl Write, field: &Field, meta: &DumpMeta) -> Result<()> {
    if meta.label.is_empty() || meta.label.chars().any(char::is_whitespace) {
        return Err(Error::Format(format!("label {:?} must be a non-empty word", meta.label)));
    }
    let g = field.grid();
    // `{:?}` on f64 prints the shortest string that parses back to the same bits
    writeln!(
        out,
        "{MAGIC} n={} N={} L={:?} p={:?} c={:?} label={}",
        g.dim(),
        g.points(),
        g.half_width(),
        meta.p,
        meta.c,
        meta.label
    )?;
    let mut bytes = Vec::with_capacity(field.values().len() * 8);
    for v in field.values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&bytes)?;
    Ok(())
}

pub fn read_dump(input: &mut impl BufRead) -> Result<(Field, DumpMeta)> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let mut words = header.trim_end_matches('\n').split(' ');
    if words.next() != Some(MAGIC) {
        return Err(Error::Format("missing prnls-field header".into()));
    }
    let (mut n, mut points, mut l, mut p, mut c, mut label) = (None, None, None, None, None, None);
    for word in words {
        let (key, value) = word
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header token {word:?}")))?;
        let parse_f = |v: &str| v.parse::<f64>().map_err(|e| Error::Format(format!("{key}: {e}")));
        let parse_u = |v: &str| v.parse::<usize>().map_err(|e| Error::Format(format!("{key}: {e}")));
        match key {
            "n" => n = Some(parse_u(value)?),
            "N" => points = Some(parse_u(value)?),
            "L" => l = Some(parse_f(value)?),
            "p" => p = Some(parse_f(value)?),
            "c" => c = Some(parse_f(value)?),
            "label" => label = Some(value.to_string()),
            other => return Err(Error::Format(format!("unknown header key {other:?}"))),
        }
    }
    let missing = |k: &str| Error::Format(format!("header lacks {k}"));
    let grid = Grid::new(n.ok_or_else(|| missing("n"))?, points.ok_or_else(|| missing("N"))?, l.ok_or_else(|| missing("L"))?)?;
    let meta = DumpMeta {
        p: p.ok_or_else(|| missing("p"))?,
        c: c.ok_or_else(|| missing("c"))?,
        label: label.ok_or_else(|| missing("label"))?,
    };
    let mut bytes = vec![0u8; grid.len() * 8];
    input.read_exact(&mut bytes)?;
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after sample array".into()));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    Ok((Field::new(grid, values)?, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn dump_roundtrip_is_bit_exact(seed in any::<u64>(), l in 0.1f64..100.0, c in 0.01f64..1e6) {
            let g = Grid::new(1, 32, l).unwrap();
            let mut state = seed;
            let f = Field::from_fn(g, |_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f64::from_bits((state >> 12) | 0x3ff0_0000_0000_0000) - 1.5
            });
            let meta = DumpMeta { p: 3.0, c, label: "u_c".into() };
            let mut buf = Vec::new();
            write_dump(&mut buf, &f, &meta).unwrap();
            let (back, back_meta) = read_dump(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back.grid().half_width().to_bits(), l.to_bits());
            prop_assert!(back.values().iter().zip(f.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back_meta, meta);
        }
    }

    #[test]
    fn rejects_truncated_and_bad_header() {
        let g = Grid::new(1, 16, 1.0).unwrap();
        let f = Field::constant(g, 1.0);
        let mut buf = Vec::new();
        write_dump(&mut buf, &f, &DumpMeta { p: 2.0, c: 4.0, label: "x".into() }).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_dump(&mut buf.as_slice()).is_err());
        assert!(read_dump(&mut b"garbage n=1\n".as_slice()).is_err());
    }
}
