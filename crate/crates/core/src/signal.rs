//! Signal representation: sample values, timestamps and the per-sample
//! weights derived from them, plus preprocessing of exact constant pieces.

use std::io::BufRead;

use crate::error::{TvError, TvResult};

/// A sampled signal together with the weights used by the solver.
///
/// `tau[i]` is the sampling period ending at `t[i]`; the first weight reuses
/// the first period (`tau[0] = t[1] - t[0]`). A single-sample signal gets
/// `tau = [1.0]` by convention since no period exists.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSignal {
    /// Sample times, strictly increasing.
    pub t: Vec<f64>,
    /// Sample values.
    pub y: Vec<f64>,
    /// Positive per-sample weights.
    pub tau: Vec<f64>,
    /// Present after collapsing: fences into the original sample range, one
    /// entry per collapsed sample plus a terminator. Collapsed sample `i`
    /// covers original samples `index_map[i]..index_map[i+1]`.
    pub index_map: Option<Vec<usize>>,
}

impl WeightedSignal {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Number of samples before collapsing.
    pub fn original_len(&self) -> usize {
        match &self.index_map {
            Some(map) => *map.last().expect("index map has a terminator"),
            None => self.y.len(),
        }
    }

    /// Expands a per-collapsed-sample vector back to original length by
    /// repeating each value over its run.
    pub fn expand_to_original(&self, values: &[f64]) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        match &self.index_map {
            Some(map) => {
                let mut out = Vec::with_capacity(self.original_len());
                for (i, &v) in values.iter().enumerate() {
                    out.extend(std::iter::repeat_n(v, map[i + 1] - map[i]));
                }
                out
            }
            None => values.to_vec(),
        }
    }
}

/// Builds a [`WeightedSignal`] from sample times and values.
///
/// Rejects empty input, mismatched lengths and non-increasing times.
pub fn build_weighted_signal(t: &[f64], y: &[f64]) -> TvResult<WeightedSignal> {
    if t.len() != y.len() {
        return Err(TvError::LengthMismatch {
            t_len: t.len(),
            y_len: y.len(),
        });
    }
    if t.is_empty() {
        return Err(TvError::EmptySignal);
    }
    for i in 1..t.len() {
        if !(t[i] > t[i - 1]) {
            return Err(TvError::NonIncreasingTime { index: i });
        }
    }
    let n = t.len();
    let mut tau = Vec::with_capacity(n);
    if n == 1 {
        tau.push(1.0);
    } else {
        tau.push(t[1] - t[0]);
        for i in 1..n {
            tau.push(t[i] - t[i - 1]);
        }
    }
    Ok(WeightedSignal {
        t: t.to_vec(),
        y: y.to_vec(),
        tau,
        index_map: None,
    })
}

/// Replaces every run of exactly equal consecutive values by one sample with
/// the summed weight. Equality is exact: noisy data never collapses, but the
/// solver requires distinct neighbours, so ties must be removed first.
///
/// The result records where each run started so restorations can be expanded
/// back to the original sample count.
pub fn collapse_constant_pieces(ws: &WeightedSignal) -> WeightedSignal {
    let n = ws.len();
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut tau = Vec::new();
    let mut fences = vec![0usize];

    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        let mut weight = ws.tau[i];
        while j < n && ws.y[j] == ws.y[i] {
            weight += ws.tau[j];
            j += 1;
        }
        t.push(ws.t[i]);
        y.push(ws.y[i]);
        tau.push(weight);
        fences.push(j);
        i = j;
    }

    // Compose with an earlier collapse, if any.
    let fences = match &ws.index_map {
        Some(prev) => fences.iter().map(|&f| prev[f]).collect(),
        None => fences,
    };

    WeightedSignal {
        t,
        y,
        tau,
        index_map: Some(fences),
    }
}

/// Parses a two-column numeric `t,y` CSV from a reader.
///
/// The separator is detected among `,`, `;` and tab; a single header line is
/// skipped when its fields do not parse as numbers. NaN and infinite values
/// are rejected with the offending row number.
pub fn read_csv<R: BufRead>(reader: R) -> TvResult<(Vec<f64>, Vec<f64>)> {
    let mut t = Vec::new();
    let mut y = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match parse_pair(trimmed) {
            Ok((a, b)) => {
                check_finite(a, lineno)?;
                check_finite(b, lineno)?;
                t.push(a);
                y.push(b);
            }
            Err(msg) => {
                // Tolerate one header line at the top of the file.
                if idx == 0 {
                    continue;
                }
                return Err(TvError::Parse {
                    line: lineno,
                    message: msg,
                });
            }
        }
    }
    Ok((t, y))
}

fn check_finite(v: f64, line: usize) -> TvResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(TvError::Parse {
            line,
            message: format!("non-finite value {v}"),
        })
    }
}

/// Splits a `t<sep>y` line on `,`, `;`, tab or whitespace and parses both
/// fields. Used by both the CSV reader and the streaming line protocol.
pub fn parse_pair(line: &str) -> Result<(f64, f64), String> {
    let fields: Vec<&str> = if line.contains(',') {
        line.splitn(2, ',').collect()
    } else if line.contains(';') {
        line.splitn(2, ';').collect()
    } else if line.contains('\t') {
        line.splitn(2, '\t').collect()
    } else {
        line.split_whitespace().collect()
    };
    if fields.len() != 2 {
        return Err(format!("expected two fields, got {}", fields.len()));
    }
    let a = fields[0]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad first field {:?}: {e}", fields[0].trim()))?;
    let b = fields[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad second field {:?}: {e}", fields[1].trim()))?;
    Ok((a, b))
}
