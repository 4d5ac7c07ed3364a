//! Line-oriented text format for codebooks.
//!
//! ```text
//! version=1
//! Q=<count>
//! N=<count>
//! K=<count>
//! b=<bits>
//! P_d_watts=<float>
//! seed=<u64>
//! csi_fingerprint=<hex>
//! <N phase indices>          \
//! <K powers in watts | ->     } once per codeword
//! rate=<float | ->           /
//! ```
//!
//! Floats are written with 17 significant digits so the file round-trips
//! exactly.

use super::{Codebook, CodebookMeta, Codeword, RcConfig};
use crate::{Error, Result};

const HEADER_KEYS: [&str; 8] = ["version", "Q", "N", "K", "b", "P_d_watts", "seed", "csi_fingerprint"];

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn serialize_codebook(cb: &Codebook) -> String {
    let m = &cb.meta;
    let mut out = String::new();
    out.push_str("version=1\n");
    out.push_str(&format!("Q={}\n", cb.codewords.len()));
    out.push_str(&format!("N={}\n", m.elements));
    out.push_str(&format!("K={}\n", m.users));
    out.push_str(&format!("b={}\n", m.bits));
    out.push_str(&format!("P_d_watts={}\n", fmt_f64(m.p_d_watts)));
    out.push_str(&format!("seed={}\n", m.seed));
    out.push_str(&format!("csi_fingerprint={}\n", m.csi_fingerprint));
    for cw in &cb.codewords {
        let idx: Vec<String> = cw.rc.indices().iter().map(u32::to_string).collect();
        out.push_str(&idx.join(" "));
        out.push('\n');
        match &cw.power_allocation {
            Some(p) => out.push_str(&p.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")),
            None => out.push('-'),
        }
        out.push('\n');
        match cw.predicted_rate {
            Some(r) => out.push_str(&format!("rate={}\n", fmt_f64(r))),
            None => out.push_str("rate=-\n"),
        }
    }
    out
}

struct Lines<'a> {
    text: &'a str,
    offset: usize,
}

impl<'a> Lines<'a> {
    /// Next line and the byte offset where it starts.
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        if self.offset >= self.text.len() {
            return Err(Error::Parse {
                offset: self.offset,
                message: format!("unexpected end of input, expected {what}"),
            });
        }
        let start = self.offset;
        let rest = &self.text[start..];
        let Some(end) = rest.find('\n') else {
            return Err(Error::Parse {
                offset: start,
                message: format!("unterminated line, expected {what}"),
            });
        };
        self.offset = start + end + 1;
        Ok((start, &rest[..end]))
    }
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(offset: usize, field: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| parse_err(offset, format!("invalid {field}: {s:?}")))
}

fn header<'a>(lines: &mut Lines<'a>, key: &str) -> Result<(usize, &'a str)> {
    let (off, line) = lines.next(key)?;
    let value = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| parse_err(off, format!("expected `{key}=`, found {line:?}")))?;
    Ok((off, value))
}

/// Parses a codebook; any error aborts without returning partial data.
pub fn deserialize_codebook(bytes: &[u8]) -> Result<Codebook> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err(e.valid_up_to(), "invalid UTF-8"))?;
    let mut lines = Lines { text, offset: 0 };

    let mut values = Vec::with_capacity(HEADER_KEYS.len());
    for key in HEADER_KEYS {
        values.push(header(&mut lines, key)?);
    }
    let (off, version) = values[0];
    if version.trim() != "1" {
        return Err(parse_err(off, format!("unsupported version {version:?}")));
    }
    let q: usize = parse_num(values[1].0, "Q", values[1].1)?;
    let n: usize = parse_num(values[2].0, "N", values[2].1)?;
    let k: usize = parse_num(values[3].0, "K", values[3].1)?;
    let bits: u32 = parse_num(values[4].0, "b", values[4].1)?;
    let p_d: f64 = parse_num(values[5].0, "P_d_watts", values[5].1)?;
    let seed: u64 = parse_num(values[6].0, "seed", values[6].1)?;
    let (fp_off, fingerprint) = values[7];
    if fingerprint.is_empty() || !fingerprint.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(parse_err(fp_off, "fingerprint must be hexadecimal"));
    }
    if q == 0 {
        return Err(parse_err(values[1].0, "Q must be at least 1"));
    }

    let mut codewords = Vec::with_capacity(q.min(1 << 16));
    for cw in 0..q {
        let (off, line) = lines.next(&format!("phase indices of codeword {cw}"))?;
        let indices = line
            .split_ascii_whitespace()
            .map(|t| parse_num::<u32>(off, "phase index", t))
            .collect::<Result<Vec<_>>>()?;
        if indices.len() != n {
            return Err(parse_err(off, format!("expected {n} phase indices, found {}", indices.len())));
        }
        let rc = RcConfig::new(indices, bits).map_err(|e| parse_err(off, e.to_string()))?;

        let (off, line) = lines.next(&format!("power allocation of codeword {cw}"))?;
        let power_allocation = if line.trim() == "-" {
            None
        } else {
            let p = line
                .split_ascii_whitespace()
                .map(|t| parse_num::<f64>(off, "power", t))
                .collect::<Result<Vec<_>>>()?;
            if p.len() != k {
                return Err(parse_err(off, format!("expected {k} powers, found {}", p.len())));
            }
            Some(p)
        };

        let (off, line) = lines.next(&format!("rate of codeword {cw}"))?;
        let value = line.strip_prefix("rate=").unwrap_or(line).trim();
        let predicted_rate = if value == "-" {
            None
        } else {
            Some(parse_num::<f64>(off, "rate", value)?)
        };
        codewords.push(Codeword {
            rc,
            power_allocation,
            predicted_rate,
        });
    }
    if !text[lines.offset..].trim().is_empty() {
        return Err(parse_err(lines.offset, "trailing data after last codeword"));
    }

    Codebook::new(
        codewords,
        CodebookMeta {
            seed,
            bits,
            elements: n,
            users: k,
            p_d_watts: p_d,
            csi_fingerprint: fingerprint.to_string(),
        },
    )
    .map_err(|e| parse_err(0, e.to_string()))
}
