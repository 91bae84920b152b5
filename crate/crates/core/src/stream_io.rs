//! Line-oriented increment input.
//!
//! One observation per line. Coin lines are `H` or `T`. Mean and MMD blocks
//! span two lines of the form `x1,...,xd|y1,...,yd`; dcov blocks span four.
//! Blank lines and lines starting with `#` are skipped.

use std::io::BufRead;

use crate::domain::{rescale, Family, Increment, Observation};
use crate::error::{Error, Result};
use crate::increments::{
    coin_increment, dcov_increment, dcov_increment_bounded, mean_increment, mmd_increment, Flip, KernelSpec,
    PairBlock,
};

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFormat {
    pub family: Family,
    /// Declared norm bound; observations are rescaled by `1/(2B)` and
    /// rejected if their norm exceeds `B`.
    pub bound: Option<f64>,
    pub kernel: KernelSpec,
    /// Distance bound for dcov increments; raw increment when absent.
    pub distance_bound: Option<f64>,
}

impl StreamFormat {
    pub fn new(family: Family) -> Self {
        Self { family, bound: None, kernel: KernelSpec::Linear, distance_bound: None }
    }

    fn block_len(&self) -> usize {
        match self.family {
            Family::Coin => 1,
            Family::Mean | Family::Mmd => 2,
            Family::Dcov => 4,
        }
    }
}

pub fn parse_flip(line: &str) -> Result<Flip> {
    match line {
        "H" | "h" => Ok(Flip::Heads),
        "T" | "t" => Ok(Flip::Tails),
        other => Err(Error::Stream(format!("expected H or T, got {other:?}"))),
    }
}

fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Stream(format!("bad number {t:?}")))
        })
        .collect()
}

/// Parses `x1,...,xd|y1,...,yd` into the pair `(x, y)`.
pub fn parse_pair_line(line: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x, y) = line
        .split_once('|')
        .ok_or_else(|| Error::Stream(format!("expected x|y, got {line:?}")))?;
    Ok((parse_vector(x)?, parse_vector(y)?))
}

/// Converts lines into increments, one per complete block.
pub struct IncrementReader<I> {
    lines: I,
    format: StreamFormat,
    dim: Option<(usize, usize)>,
    line_no: usize,
    failed: bool,
}

impl<I: Iterator<Item = std::io::Result<String>>> IncrementReader<I> {
    pub fn new(lines: I, format: StreamFormat) -> Self {
        Self { lines, format, dim: None, line_no: 0, failed: false }
    }

    fn next_line(&mut self) -> Option<Result<String>> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some(Ok(t.to_string()));
            }
        }
    }

    fn observation(&self, raw: Vec<f64>) -> Result<Observation> {
        match self.format.bound {
            Some(b) => rescale(&raw, b),
            None => Ok(Observation::new_unchecked(raw)),
        }
    }

    fn pair(&mut self, line: &str) -> Result<(Observation, Observation)> {
        let (x, y) = parse_pair_line(line)?;
        let (dx, dy) = *self.dim.get_or_insert((x.len(), y.len()));
        if x.len() != dx {
            return Err(Error::DimensionMismatch { expected: dx, got: x.len() });
        }
        if y.len() != dy {
            return Err(Error::DimensionMismatch { expected: dy, got: y.len() });
        }
        Ok((self.observation(x)?, self.observation(y)?))
    }

    fn read_block(&mut self) -> Option<Result<Increment>> {
        let first = match self.next_line()? {
            Ok(l) => l,
            Err(e) => return Some(Err(e)),
        };
        let mut lines = vec![first];
        while lines.len() < self.format.block_len() {
            match self.next_line() {
                Some(Ok(l)) => lines.push(l),
                Some(Err(e)) => return Some(Err(e)),
                None => {
                    return Some(Err(Error::Stream(format!(
                        "incomplete {} block at end of input: {} of {} lines",
                        self.format.family,
                        lines.len(),
                        self.format.block_len()
                    ))))
                }
            }
        }
        Some(self.build(&lines).map_err(|e| match e {
            Error::Stream(msg) => Error::Stream(format!("line {}: {msg}", self.line_no)),
            other => other,
        }))
    }

    fn build(&mut self, lines: &[String]) -> Result<Increment> {
        match self.format.family {
            Family::Coin => Ok(coin_increment(parse_flip(&lines[0])?)),
            Family::Mean | Family::Mmd => {
                let (x1, y1) = self.pair(&lines[0])?;
                let (x2, y2) = self.pair(&lines[1])?;
                if self.format.family == Family::Mean {
                    mean_increment(x1.values(), y1.values(), x2.values(), y2.values())
                } else {
                    mmd_increment(&self.format.kernel, x1.values(), x2.values(), y1.values(), y2.values())
                }
            }
            Family::Dcov => {
                let mut xs = Vec::with_capacity(4);
                let mut ys = Vec::with_capacity(4);
                for l in lines {
                    let (x, y) = self.pair(l)?;
                    xs.push(x);
                    ys.push(y);
                }
                let block = PairBlock::new(xs, ys);
                match self.format.distance_bound {
                    Some(d) => dcov_increment_bounded(&block, d),
                    None => dcov_increment(&block),
                }
            }
        }
    }
}

impl<I: Iterator<Item = std::io::Result<String>>> Iterator for IncrementReader<I> {
    type Item = Result<Increment>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let item = self.read_block();
        if matches!(item, Some(Err(_))) {
            self.failed = true;
        }
        item
    }
}

pub fn read_increments<R: BufRead>(reader: R, format: StreamFormat) -> IncrementReader<std::io::Lines<R>> {
    IncrementReader::new(reader.lines(), format)
}
