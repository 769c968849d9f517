//! Plain-text parameter format.
//!
//! ```text
//! mol 1
//! k 2
//! dim 12
//! weight 5.0000000000000000e-1
//! loc <dim values>
//! scale <dim values>
//! weight ...
//! ```
//!
//! Reals are written with 17 significant digits so every `f64` survives a
//! round trip bit for bit.

use std::fmt::Write as _;

use thiserror::Error;

use super::{LogisticComponent, MixtureOfLogistics};

pub const MOL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, field `{field}`: {message}")]
pub struct ParseError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reader over non-empty, non-comment lines that remembers line numbers.
pub struct LineReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    last_line: usize,
}

impl<'a> LineReader<'a> {
    pub fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate().peekable(),
            last_line: 0,
        }
    }

    fn skip_blank(&mut self) {
        while let Some((_, l)) = self.lines.peek() {
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                self.lines.next();
            } else {
                break;
            }
        }
    }

    pub fn at_end(&mut self) -> bool {
        self.skip_blank();
        self.lines.peek().is_none()
    }

    /// Next line split into whitespace tokens, which must start with `tag`.
    pub fn expect(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>), ParseError> {
        self.skip_blank();
        let Some((idx, line)) = self.lines.next() else {
            return Err(ParseError::new(self.last_line + 1, tag, "unexpected end of file"));
        };
        let line_no = idx + 1;
        self.last_line = line_no;
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap_or("");
        if head != tag {
            return Err(ParseError::new(
                line_no,
                tag,
                format!("expected `{tag}`, found `{head}`"),
            ));
        }
        Ok((line_no, tokens.collect()))
    }

    pub fn expect_usize(&mut self, tag: &str) -> Result<usize, ParseError> {
        let (line, toks) = self.expect(tag)?;
        single(&toks, line, tag)?
            .parse::<usize>()
            .map_err(|e| ParseError::new(line, tag, e.to_string()))
    }

    pub fn expect_reals(&mut self, tag: &str, n: usize) -> Result<Vec<f64>, ParseError> {
        let (line, toks) = self.expect(tag)?;
        if toks.len() != n {
            return Err(ParseError::new(
                line,
                tag,
                format!("expected {n} values, found {}", toks.len()),
            ));
        }
        toks.iter()
            .enumerate()
            .map(|(i, t)| {
                t.parse::<f64>()
                    .map_err(|e| ParseError::new(line, format!("{tag}[{i}]"), e.to_string()))
            })
            .collect()
    }
}

fn single<'a>(toks: &[&'a str], line: usize, tag: &str) -> Result<&'a str, ParseError> {
    match toks {
        [one] => Ok(one),
        _ => Err(ParseError::new(
            line,
            tag,
            format!("expected one value, found {}", toks.len()),
        )),
    }
}

pub fn check_version(reader: &mut LineReader<'_>, tag: &str, expected: u32) -> Result<(), ParseError> {
    let (line, toks) = reader.expect(tag)?;
    let v = single(&toks, line, tag)?;
    match v.parse::<u32>() {
        Ok(found) if found == expected => Ok(()),
        Ok(found) => Err(ParseError::new(
            line,
            tag,
            format!("unsupported format version {found}, expected {expected}"),
        )),
        Err(e) => Err(ParseError::new(line, tag, e.to_string())),
    }
}

/// Appends the `k`/`dim`/component block for `m`.
pub fn write_mixture_block(out: &mut String, m: &MixtureOfLogistics) {
    let join = |v: &[f64]| v.iter().map(|x| format_real(*x)).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "k {}", m.k());
    let _ = writeln!(out, "dim {}", m.dim());
    for (w, c) in m.weights().iter().zip(m.components()) {
        let _ = writeln!(out, "weight {}", format_real(*w));
        let _ = writeln!(out, "loc {}", join(&c.mu));
        let _ = writeln!(out, "scale {}", join(&c.s));
    }
}

pub fn parse_mixture_block(reader: &mut LineReader<'_>) -> Result<MixtureOfLogistics, ParseError> {
    let k = reader.expect_usize("k")?;
    let k_line = reader.last_line;
    if k == 0 {
        return Err(ParseError::new(k_line, "k", "mixture needs at least one component"));
    }
    let dim = reader.expect_usize("dim")?;
    let mut weights = Vec::with_capacity(k);
    let mut comps = Vec::with_capacity(k);
    for _ in 0..k {
        weights.push(reader.expect_reals("weight", 1)?[0]);
        let mu = reader.expect_reals("loc", dim)?;
        let s = reader.expect_reals("scale", dim)?;
        comps.push(LogisticComponent::new(mu, s));
    }
    let end_line = reader.last_line;
    MixtureOfLogistics::new(weights, comps)
        .map_err(|e| ParseError::new(end_line, "mixture", e.to_string()))
}

pub fn write_mixture(m: &MixtureOfLogistics) -> String {
    let mut out = format!("mol {MOL_FORMAT_VERSION}\n");
    write_mixture_block(&mut out, m);
    out
}

pub fn parse_mixture(text: &str) -> Result<MixtureOfLogistics, ParseError> {
    let mut reader = LineReader::new(text);
    check_version(&mut reader, "mol", MOL_FORMAT_VERSION)?;
    let m = parse_mixture_block(&mut reader)?;
    if !reader.at_end() {
        return Err(ParseError::new(reader.last_line + 1, "eof", "trailing content"));
    }
    Ok(m)
}
