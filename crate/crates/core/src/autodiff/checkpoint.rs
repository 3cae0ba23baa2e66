//! Text checkpoint format.
//!
//! ```text
//! ATPL-CKPT v1
//! <name> <rank> <dim_1> [<dim_2>] <value_1> ... <value_n>
//! ...
//! ```
//!
//! One line per parameter, fields separated by single spaces, values in
//! row-major order. Values are written with Rust's shortest round-trip
//! `f64` formatting, so save followed by load is bit-exact. Parameter
//! names never contain whitespace.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::autodiff::params::ParamStore;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_HEADER: &str = "ATPL-CKPT v1";

pub fn write_checkpoint<W: Write>(store: &ParamStore, mut out: W) -> Result<()> {
    writeln!(out, "{CHECKPOINT_HEADER}")?;
    for p in store.params() {
        if p.name.chars().any(char::is_whitespace) {
            return Err(Error::contract(format!("parameter name `{}` contains whitespace", p.name)));
        }
        write!(out, "{} {}", p.name, p.value.rank())?;
        for d in p.value.shape() {
            write!(out, " {d}")?;
        }
        for v in p.value.data() {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<ParamStore> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim_end() == CHECKPOINT_HEADER => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => {
            return Err(Error::Ingest {
                line: 1,
                message: format!("missing `{CHECKPOINT_HEADER}` header"),
            })
        }
    }
    let mut store = ParamStore::new();
    for (i, line) in lines {
        let line = line?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Ingest { line: lineno, message };
        let mut fields = line.split_whitespace();
        let name = fields.next().ok_or_else(|| bad("empty record".into()))?;
        let mut int_field = |what: &str| -> Result<usize> {
            fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("bad {what} for `{name}`")))
        };
        let rank = int_field("rank")?;
        if rank != 1 && rank != 2 {
            return Err(bad(format!("rank {rank} for `{name}`")));
        }
        let shape: Vec<usize> = (0..rank).map(|_| int_field("dimension")).collect::<Result<_>>()?;
        let data: Vec<f64> = fields
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad value `{s}` in `{name}`"))))
            .collect::<Result<_>>()?;
        let t = Tensor::new(shape, data).map_err(|_| bad(format!("value count does not match shape for `{name}`")))?;
        store.add(name, t).map_err(|e| bad(e.to_string()))?;
    }
    Ok(store)
}

pub fn save_checkpoint(store: &ParamStore, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_checkpoint(store, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<ParamStore> {
    read_checkpoint(BufReader::new(fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut store = ParamStore::new();
        store
            .add("enc.w", Tensor::matrix(&[vec![0.1, -1.0 / 3.0], vec![1e-300, 7.0]]).unwrap())
            .unwrap();
        store.add("enc.b", Tensor::vector(&[f64::MIN_POSITIVE, -0.0])).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&store, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("ATPL-CKPT v1\nenc.w 2 2 2 0.1 "));
        let back = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in store.params().iter().zip(back.params()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.value.shape(), b.value.shape());
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.value), bits(&b.value));
        }
    }

    #[test]
    fn header_and_counts_are_validated() {
        assert!(read_checkpoint(&b"nope\n"[..]).is_err());
        let err = read_checkpoint(&b"ATPL-CKPT v1\nw 1 3 1 2\n"[..]).unwrap_err();
        assert!(matches!(err, Error::Ingest { line: 2, .. }), "{err}");
    }
}
