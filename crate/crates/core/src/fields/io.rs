//! Binary dump format for [`ComplexField2D`].
//!
//! ```text
//! GHOSTBEAM-FIELD\n
//! version 1\n
//! nx <nx>\n
//! ny <ny>\n
//! dx <dx>\n
//! dy <dy>\n
//! origin <x0> <y0>\n
//! normalized <0|1>\n
//! end\n
//! <nx·ny·8 bytes>
//! ```
//!
//! The header is ASCII. The payload holds `(re, im)` pairs as little-endian
//! `f32`, row-major with `ix` as the slow index: sample `(ix, iy)` starts at
//! byte `8·(ix·ny + iy)` after the header.

use std::io::{BufRead, Write};

use ndarray::Array2;
use num_complex::Complex64;

use super::ComplexField2D;
use crate::error::{Error, Result};

pub const MAGIC: &str = "GHOSTBEAM-FIELD";
pub const VERSION: u32 = 1;

impl ComplexField2D {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::new();
        header.push_str(&format!("{MAGIC}\nversion {VERSION}\n"));
        header.push_str(&format!("nx {}\nny {}\n", self.nx(), self.ny()));
        header.push_str(&format!("dx {:?}\ndy {:?}\n", self.dx(), self.dy()));
        header.push_str(&format!(
            "origin {:?} {:?}\n",
            self.origin()[0],
            self.origin()[1]
        ));
        header.push_str(&format!(
            "normalized {}\nend\n",
            u8::from(self.is_normalized())
        ));
        w.write_all(header.as_bytes())?;
        let mut buf = Vec::with_capacity(self.nx() * self.ny() * 8);
        for z in self.values().iter() {
            buf.extend_from_slice(&(z.re as f32).to_le_bytes());
            buf.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        let mut next = |r: &mut R| -> Result<String> {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Argument("truncated field header".into()));
            }
            Ok(line.trim_end_matches('\n').to_string())
        };
        if next(&mut r)? != MAGIC {
            return Err(Error::Argument("not a ghostbeam field dump".into()));
        }
        let mut nx = None;
        let mut ny = None;
        let mut dx = None;
        let mut dy = None;
        let mut origin = None;
        loop {
            let l = next(&mut r)?;
            let mut parts = l.split_whitespace();
            let key = parts.next().unwrap_or("");
            let vals: Vec<&str> = parts.collect();
            let num = |i: usize| -> Result<f64> {
                vals.get(i)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Argument(format!("bad header line `{l}`")))
            };
            match key {
                "end" => break,
                "version" => {
                    if num(0)? as u32 != VERSION {
                        return Err(Error::Argument(format!("unsupported version in `{l}`")));
                    }
                }
                "nx" => nx = Some(num(0)? as usize),
                "ny" => ny = Some(num(0)? as usize),
                "dx" => dx = Some(num(0)?),
                "dy" => dy = Some(num(0)?),
                "origin" => origin = Some([num(0)?, num(1)?]),
                "normalized" => {}
                _ => return Err(Error::Argument(format!("unknown header key `{key}`"))),
            }
        }
        let missing = |k: &str| Error::Argument(format!("field header lacks `{k}`"));
        let (nx, ny) = (
            nx.ok_or_else(|| missing("nx"))?,
            ny.ok_or_else(|| missing("ny"))?,
        );
        let mut payload = vec![0u8; nx * ny * 8];
        r.read_exact(&mut payload)?;
        let values: Vec<Complex64> = payload
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                let im = f32::from_le_bytes([c[4], c[5], c[6], c[7]]);
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        let values =
            Array2::from_shape_vec((nx, ny), values).map_err(|e| Error::Argument(e.to_string()))?;
        ComplexField2D::new(
            values,
            dx.ok_or_else(|| missing("dx"))?,
            dy.ok_or_else(|| missing("dy"))?,
            origin.ok_or_else(|| missing("origin"))?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let f = ComplexField2D::new(
            Array2::from_elem((2, 3), Complex64::new(1.0, 2.0)),
            0.5,
            0.25,
            [1.0, -2.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let text = "GHOSTBEAM-FIELD\nversion 1\nnx 2\nny 3\ndx 0.5\ndy 0.25\norigin 1.0 -2.0\nnormalized 0\nend\n";
        assert_eq!(&buf[..text.len()], text.as_bytes());
        assert_eq!(buf.len(), text.len() + 6 * 8);
        assert_eq!(&buf[text.len()..text.len() + 4], &1.0f32.to_le_bytes());
        assert_eq!(&buf[text.len() + 4..text.len() + 8], &2.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(ComplexField2D::read_from(&b"P6\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(nx in 2usize..6, ny in 2usize..6, seed in proptest::collection::vec(-1e3f64..1e3, 72)) {
            let values = Array2::from_shape_fn((nx, ny), |(i, j)| {
                Complex64::new(seed[2 * (i * 6 + j)], seed[2 * (i * 6 + j) + 1])
            });
            let f = ComplexField2D::new(values, 0.75, 1.25, [-3.0, 4.5]).unwrap();
            let mut buf = Vec::new();
            f.write_to(&mut buf).unwrap();
            let g = ComplexField2D::read_from(&buf[..]).unwrap();
            prop_assert!(f.same_grid(&g));
            for (a, b) in f.values().iter().zip(g.values().iter()) {
                prop_assert!((a - b).norm() <= 1e-6 * a.norm().max(1.0));
            }
        }
    }
}
