//! Weight sequences for bilateral shifts.
//!
//! All four kinds index weights by `k ∈ ℤ` and guarantee every weight is
//! nonzero and finite; the similarity analysis assumes the shift is injective
//! and bounded, and both properties are decided here at construction time.
//!
//! Kinds:
//!
//! * `Periodic` — `w_k = pattern[k mod p]`.
//! * `ModifiedPeriodic` — a periodic base with finitely many index overrides.
//! * `SplitPeriodic` — one periodic pattern left of a split index, another
//!   from the split on; both aligned by `k mod p` globally.
//! * `Sampled` — an explicit table over a contiguous index range, extended
//!   outside the range by a constant value. Sampled data is analyzed only up
//!   to a horizon; it never produces exact certificates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Relative tolerance used for modulus-equality decisions on weights.
pub const MODULUS_EQ_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SequenceError {
    #[error("weight pattern must be non-empty")]
    EmptyPattern,
    #[error("weight {location} must be nonzero and finite, got {value}")]
    InvalidWeight { location: String, value: Complex64 },
    #[error("sample table is empty")]
    EmptyTable,
    #[error("sample table must cover a contiguous index range: {detail}")]
    BadTableIndex { detail: String },
    #[error("scale factor must be positive and finite, got {factor}")]
    InvalidScale { factor: f64 },
}

/// Error produced by the textual sequence grammar, carrying the byte offset
/// of the offending token within the spec string.
#[derive(Debug, Error, PartialEq)]
#[error("parse error at byte {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Periodic,
    ModifiedPeriodic,
    SplitPeriodic,
    Sampled,
}

impl SequenceKind {
    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Periodic => "periodic",
            SequenceKind::ModifiedPeriodic => "modified-periodic",
            SequenceKind::SplitPeriodic => "split-periodic",
            SequenceKind::Sampled => "sampled",
        }
    }
}

/// A validated, non-empty repeating pattern. `at(k)` indexes by `k mod p`
/// (Euclidean), so the alignment is global: position `k` of the bilateral
/// sequence always reads slot `k mod p` regardless of where the pattern is
/// used.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Pattern {
    values: Vec<Complex64>,
}

impl Pattern {
    fn new(values: Vec<Complex64>, what: &str) -> Result<Self, SequenceError> {
        if values.is_empty() {
            return Err(SequenceError::EmptyPattern);
        }
        for (i, v) in values.iter().enumerate() {
            check_weight(*v, || format!("{what}[{i}]"))?;
        }
        Ok(Pattern { values })
    }

    pub(crate) fn period(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn at(&self, k: i64) -> Complex64 {
        let p = self.values.len() as i64;
        self.values[k.rem_euclid(p) as usize]
    }

    pub(crate) fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Geometric mean of the pattern moduli, computed in the log domain.
    pub(crate) fn log_rate(&self) -> f64 {
        let s: f64 = self.values.iter().map(|w| w.norm().ln()).sum();
        s / self.values.len() as f64
    }

    fn scaled(&self, r: f64) -> Pattern {
        Pattern {
            values: self.values.iter().map(|w| w * r).collect(),
        }
    }
}

fn check_weight(v: Complex64, location: impl FnOnce() -> String) -> Result<(), SequenceError> {
    // `norm` must also have a finite logarithm: that rules out zero,
    // subnormal-underflow and infinities in one test.
    let n = v.norm();
    if !(n.is_finite() && n > 0.0 && n.ln().is_finite()) {
        return Err(SequenceError::InvalidWeight {
            location: location(),
            value: v,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Repr {
    Periodic {
        pattern: Pattern,
    },
    Modified {
        base: Pattern,
        overrides: BTreeMap<i64, Complex64>,
    },
    Split {
        left: Pattern,
        right: Pattern,
        split: i64,
    },
    Sampled {
        k_min: i64,
        table: Vec<Complex64>,
        extension: Complex64,
    },
}

/// A bilateral weight sequence; see the module docs for the four kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSequence {
    pub(crate) repr: Repr,
}

impl WeightSequence {
    pub fn periodic(values: Vec<Complex64>) -> Result<Self, SequenceError> {
        Ok(WeightSequence {
            repr: Repr::Periodic {
                pattern: Pattern::new(values, "pattern")?,
            },
        })
    }

    pub fn modified_periodic(
        base: Vec<Complex64>,
        overrides: impl IntoIterator<Item = (i64, Complex64)>,
    ) -> Result<Self, SequenceError> {
        let base = Pattern::new(base, "base pattern")?;
        let mut map = BTreeMap::new();
        for (k, v) in overrides {
            check_weight(v, || format!("override at index {k}"))?;
            map.insert(k, v);
        }
        Ok(WeightSequence {
            repr: Repr::Modified {
                base,
                overrides: map,
            },
        })
    }

    pub fn split_periodic(
        left: Vec<Complex64>,
        right: Vec<Complex64>,
        split: i64,
    ) -> Result<Self, SequenceError> {
        Ok(WeightSequence {
            repr: Repr::Split {
                left: Pattern::new(left, "left pattern")?,
                right: Pattern::new(right, "right pattern")?,
                split,
            },
        })
    }

    /// Table of weights for `k_min ..= k_min + table.len() - 1`; every index
    /// outside the range reads `extension`.
    pub fn sampled(
        k_min: i64,
        table: Vec<Complex64>,
        extension: Complex64,
    ) -> Result<Self, SequenceError> {
        if table.is_empty() {
            return Err(SequenceError::EmptyTable);
        }
        for (i, v) in table.iter().enumerate() {
            check_weight(*v, || format!("sample at index {}", k_min + i as i64))?;
        }
        check_weight(extension, || "extension value".to_string())?;
        Ok(WeightSequence {
            repr: Repr::Sampled {
                k_min,
                table,
                extension,
            },
        })
    }

    pub fn kind(&self) -> SequenceKind {
        match &self.repr {
            Repr::Periodic { .. } => SequenceKind::Periodic,
            Repr::Modified { .. } => SequenceKind::ModifiedPeriodic,
            Repr::Split { .. } => SequenceKind::SplitPeriodic,
            Repr::Sampled { .. } => SequenceKind::Sampled,
        }
    }

    /// True for the kinds whose window analysis is exact (everything except
    /// `Sampled`).
    pub fn is_exact_kind(&self) -> bool {
        self.kind() != SequenceKind::Sampled
    }

    /// The weight `w_k`.
    pub fn weight_at(&self, k: i64) -> Complex64 {
        match &self.repr {
            Repr::Periodic { pattern } => pattern.at(k),
            Repr::Modified { base, overrides } => {
                overrides.get(&k).copied().unwrap_or_else(|| base.at(k))
            }
            Repr::Split { left, right, split } => {
                if k < *split {
                    left.at(k)
                } else {
                    right.at(k)
                }
            }
            Repr::Sampled {
                k_min,
                table,
                extension,
            } => {
                let off = k - k_min;
                if off >= 0 && (off as usize) < table.len() {
                    table[off as usize]
                } else {
                    *extension
                }
            }
        }
    }

    /// Supremum of the weight moduli. Finite for every representable kind,
    /// and attained on the finite data each kind carries.
    pub fn sup_modulus(&self) -> f64 {
        self.all_moduli().into_iter().fold(f64::MIN, f64::max)
    }

    /// Infimum of the weight moduli; positive because zero weights are
    /// rejected at construction.
    pub fn inf_modulus(&self) -> f64 {
        self.all_moduli().into_iter().fold(f64::MAX, f64::min)
    }

    /// Whether `sup_k |w_k| < ∞`, i.e. whether the shift is a bounded
    /// operator. Every representable kind carries finitely many distinct
    /// moduli, so this is decided exactly (and is always true).
    pub fn is_bounded(&self) -> bool {
        self.sup_modulus().is_finite()
    }

    /// Whether all weight moduli agree (relative tolerance
    /// [`MODULUS_EQ_TOL`]). Constant modulus is exactly the condition for the
    /// shift itself to be normal.
    pub fn is_normal_shift(&self) -> bool {
        let sup = self.sup_modulus();
        let inf = self.inf_modulus();
        sup - inf <= MODULUS_EQ_TOL * sup
    }

    /// The sequence `(r·w_k)`, i.e. the weights of `r·S_w`.
    pub fn scale(&self, r: f64) -> Result<Self, SequenceError> {
        if !(r.is_finite() && r > 0.0) {
            return Err(SequenceError::InvalidScale { factor: r });
        }
        let repr = match &self.repr {
            Repr::Periodic { pattern } => Repr::Periodic {
                pattern: pattern.scaled(r),
            },
            Repr::Modified { base, overrides } => Repr::Modified {
                base: base.scaled(r),
                overrides: overrides.iter().map(|(&k, &v)| (k, v * r)).collect(),
            },
            Repr::Split { left, right, split } => Repr::Split {
                left: left.scaled(r),
                right: right.scaled(r),
                split: *split,
            },
            Repr::Sampled {
                k_min,
                table,
                extension,
            } => Repr::Sampled {
                k_min: *k_min,
                table: table.iter().map(|w| w * r).collect(),
                extension: extension * r,
            },
        };
        Ok(WeightSequence { repr })
    }

    /// Every modulus the sequence attains, one entry per stored weight (plus
    /// the extension for sampled tables).
    fn all_moduli(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Periodic { pattern } => pattern.values().iter().map(|w| w.norm()).collect(),
            Repr::Modified { base, overrides } => base
                .values()
                .iter()
                .map(|w| w.norm())
                .chain(overrides.values().map(|w| w.norm()))
                .collect(),
            Repr::Split { left, right, .. } => left
                .values()
                .iter()
                .chain(right.values().iter())
                .map(|w| w.norm())
                .collect(),
            Repr::Sampled {
                table, extension, ..
            } => table
                .iter()
                .map(|w| w.norm())
                .chain(std::iter::once(extension.norm()))
                .collect(),
        }
    }
}

impl fmt::Display for WeightSequence {
    /// Canonical spec-string form, parseable by [`parse_sequence`] (sampled
    /// tables print inline as `sampled@` since the file they came from is not
    /// retained).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(values: &[Complex64]) -> String {
            values
                .iter()
                .map(|v| fmt_complex(*v))
                .collect::<Vec<_>>()
                .join(",")
        }
        match &self.repr {
            Repr::Periodic { pattern } => write!(f, "periodic:{}", join(pattern.values())),
            Repr::Modified { base, overrides } => {
                let ovr = overrides
                    .iter()
                    .map(|(k, v)| format!("{k}={}", fmt_complex(*v)))
                    .collect::<Vec<_>>()
                    .join(",");
                write!(f, "modified:periodic:{};{}", join(base.values()), ovr)
            }
            Repr::Split { left, right, split } => {
                write!(
                    f,
                    "split:{}|{}@{}",
                    join(left.values()),
                    join(right.values()),
                    split
                )
            }
            Repr::Sampled {
                k_min,
                table,
                extension,
            } => write!(
                f,
                "sampled@[{k_min}..{}]ext={}",
                *k_min + table.len() as i64 - 1,
                fmt_complex(*extension)
            ),
        }
    }
}

fn fmt_complex(v: Complex64) -> String {
    if v.im == 0.0 {
        format!("{}", v.re)
    } else if v.re == 0.0 {
        format!("{}i", v.im)
    } else if v.im < 0.0 {
        format!("{}{}i", v.re, v.im)
    } else {
        format!("{}+{}i", v.re, v.im)
    }
}

/// Parses the textual sequence grammar:
///
/// ```text
/// periodic:W(,W)*
/// modified:periodic:W(,W)*;K=W(,K=W)*
/// split:W(,W)*|W(,W)*@K
/// sampled:PATH(@W)?          PATH is a CSV with columns index,re,im
/// ```
///
/// where `W` is a complex literal (`1`, `-2.5`, `2i`, `1+2i`, `1-1i`, `i`)
/// and `K` an integer index. The optional `@W` on `sampled` sets the
/// out-of-range extension value (default `1`).
pub fn parse_sequence(spec: &str) -> Result<WeightSequence, ParseError> {
    let (head, rest) = match spec.find(':') {
        Some(i) => (&spec[..i], &spec[i + 1..]),
        None => {
            return Err(ParseError {
                position: 0,
                message: format!(
                    "expected `periodic:`, `modified:`, `split:` or `sampled:`, got {spec:?}"
                ),
            })
        }
    };
    let body_at = head.len() + 1;
    match head {
        "periodic" => {
            let values = parse_complex_list(rest, body_at)?;
            WeightSequence::periodic(values).map_err(|e| seq_err(e, body_at))
        }
        "modified" => parse_modified(rest, body_at),
        "split" => parse_split(rest, body_at),
        "sampled" => parse_sampled(rest, body_at),
        _ => Err(ParseError {
            position: 0,
            message: format!("unknown sequence kind {head:?}"),
        }),
    }
}

fn seq_err(e: SequenceError, position: usize) -> ParseError {
    ParseError {
        position,
        message: e.to_string(),
    }
}

fn parse_modified(body: &str, at: usize) -> Result<WeightSequence, ParseError> {
    let base_body = body.strip_prefix("periodic:").ok_or_else(|| ParseError {
        position: at,
        message: "modified base must be `periodic:...`".to_string(),
    })?;
    let base_at = at + "periodic:".len();
    let (base_str, ovr_str, ovr_at) = match base_body.find(';') {
        Some(i) => (&base_body[..i], &base_body[i + 1..], base_at + i + 1),
        None => {
            return Err(ParseError {
                position: at,
                message: "modified sequence needs `;index=value` overrides after the base"
                    .to_string(),
            })
        }
    };
    let base = parse_complex_list(base_str, base_at)?;
    let mut overrides = Vec::new();
    for (tok, tok_at) in split_with_offsets(ovr_str, ovr_at, ',') {
        let eq = tok.find('=').ok_or_else(|| ParseError {
            position: tok_at,
            message: format!("override must be `index=value`, got {tok:?}"),
        })?;
        let idx: i64 = tok[..eq].trim().parse().map_err(|_| ParseError {
            position: tok_at,
            message: format!("invalid override index {:?}", &tok[..eq]),
        })?;
        let val = parse_complex(tok[eq + 1..].trim(), tok_at + eq + 1)?;
        overrides.push((idx, val));
    }
    WeightSequence::modified_periodic(base, overrides).map_err(|e| seq_err(e, at))
}

fn parse_split(body: &str, at: usize) -> Result<WeightSequence, ParseError> {
    let bar = body.find('|').ok_or_else(|| ParseError {
        position: at,
        message: "split sequence must be `left|right@index`".to_string(),
    })?;
    let after = &body[bar + 1..];
    let at_sign = after.rfind('@').ok_or_else(|| ParseError {
        position: at + bar + 1,
        message: "split sequence must end with `@index`".to_string(),
    })?;
    let left = parse_complex_list(&body[..bar], at)?;
    let right = parse_complex_list(&after[..at_sign], at + bar + 1)?;
    let idx_at = at + bar + 1 + at_sign + 1;
    let split: i64 = after[at_sign + 1..].trim().parse().map_err(|_| ParseError {
        position: idx_at,
        message: format!("invalid split index {:?}", &after[at_sign + 1..]),
    })?;
    WeightSequence::split_periodic(left, right, split).map_err(|e| seq_err(e, at))
}

fn parse_sampled(body: &str, at: usize) -> Result<WeightSequence, ParseError> {
    let (path, extension) = match body.rfind('@') {
        Some(i) => (&body[..i], parse_complex(&body[i + 1..], at + i + 1)?),
        None => (body, Complex64::new(1.0, 0.0)),
    };
    if path.is_empty() {
        return Err(ParseError {
            position: at,
            message: "sampled sequence needs a CSV path".to_string(),
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| ParseError {
        position: at,
        message: format!("cannot read {path:?}: {e}"),
    })?;
    let table = parse_sample_csv(&text).map_err(|(line, message)| ParseError {
        position: at,
        message: format!("{path}:{line}: {message}"),
    })?;
    let k_min = table[0].0;
    let values = table.into_iter().map(|(_, v)| v).collect();
    WeightSequence::sampled(k_min, values, extension).map_err(|e| seq_err(e, at))
}

/// Parses CSV rows `index,re,im` (an optional literal `index,re,im` header is
/// skipped). Rows must be sorted by index and contiguous.
fn parse_sample_csv(text: &str) -> Result<Vec<(i64, Complex64)>, (usize, String)> {
    let mut rows: Vec<(i64, Complex64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line == "index,re,im") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err((lineno + 1, format!("expected 3 fields, got {}", fields.len())));
        }
        let idx: i64 = fields[0]
            .parse()
            .map_err(|_| (lineno + 1, format!("invalid index {:?}", fields[0])))?;
        let re: f64 = fields[1]
            .parse()
            .map_err(|_| (lineno + 1, format!("invalid re {:?}", fields[1])))?;
        let im: f64 = fields[2]
            .parse()
            .map_err(|_| (lineno + 1, format!("invalid im {:?}", fields[2])))?;
        if let Some(&(prev, _)) = rows.last() {
            if idx != prev + 1 {
                return Err((
                    lineno + 1,
                    format!("indices must be contiguous ascending; {idx} follows {prev}"),
                ));
            }
        }
        rows.push((idx, Complex64::new(re, im)));
    }
    if rows.is_empty() {
        return Err((1, "no sample rows".to_string()));
    }
    Ok(rows)
}

fn split_with_offsets(
    s: &str,
    base: usize,
    sep: char,
) -> impl Iterator<Item = (&str, usize)> {
    let mut offset = 0usize;
    s.split(sep).map(move |tok| {
        let here = base + offset;
        offset += tok.len() + sep.len_utf8();
        (tok, here)
    })
}

fn parse_complex_list(s: &str, at: usize) -> Result<Vec<Complex64>, ParseError> {
    split_with_offsets(s, at, ',')
        .map(|(tok, tok_at)| parse_complex(tok.trim(), tok_at))
        .collect()
}

/// Complex literal: `a`, `bi`, `a+bi`, `a-bi`, with `i`/`-i` accepted for
/// unit imaginary parts. Parts use ordinary float syntax including exponents.
fn parse_complex(tok: &str, at: usize) -> Result<Complex64, ParseError> {
    let fail = |msg: String| ParseError {
        position: at,
        message: msg,
    };
    if tok.is_empty() {
        return Err(fail("empty complex literal".to_string()));
    }
    let parse_part = |s: &str| -> Result<f64, ParseError> {
        f64::from_str(s).map_err(|_| fail(format!("invalid number {s:?} in complex literal {tok:?}")))
    };
    if let Some(body) = tok.strip_suffix(['i', 'I']) {
        // Split an explicit real part from the imaginary coefficient: the
        // last '+'/'-' that is neither leading nor an exponent sign.
        let bytes = body.as_bytes();
        let mut split = None;
        for j in (1..bytes.len()).rev() {
            let b = bytes[j];
            if (b == b'+' || b == b'-') && !matches!(bytes[j - 1], b'e' | b'E') {
                split = Some(j);
                break;
            }
        }
        let (re_str, im_str) = match split {
            Some(j) => (&body[..j], &body[j..]),
            None => ("", body),
        };
        let re = if re_str.is_empty() { 0.0 } else { parse_part(re_str)? };
        let im = match im_str {
            "" | "+" => 1.0,
            "-" => -1.0,
            s => parse_part(s)?,
        };
        Ok(Complex64::new(re, im))
    } else {
        Ok(Complex64::new(parse_part(tok)?, 0.0))
    }
}
