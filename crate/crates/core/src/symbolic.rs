//! Subshifts of finite type.
//!
//! Symbols are 1-based (`1..=m`). Bi-infinite sequences are represented by the
//! periodic extension of a finite block; index `0` is the first block symbol.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolicError {
    #[error("transition matrix must be square with m >= 2 (got {rows} rows)")]
    BadShape { rows: usize },
    #[error("transition matrix entry ({row},{col}) is {value}, expected 0 or 1")]
    BadEntry { row: usize, col: usize, value: u8 },
    #[error("word must be non-empty")]
    EmptyWord,
    #[error("symbol {symbol} outside alphabet 1..={m}")]
    SymbolOutOfRange { symbol: usize, m: usize },
    #[error("alphabet mismatch: {left} vs {right} symbols")]
    AlphabetMismatch { left: usize, right: usize },
    #[error("length must be at least 1")]
    ZeroLength,
    #[error("integer overflow counting length-{n} words")]
    Overflow { n: usize },
    #[error("subshift is empty (spectral radius 0)")]
    EmptySubshift,
    #[error("eigenvalue computation did not converge")]
    NoConvergence,
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown built-in matrix `{0}`")]
    UnknownBuiltin(String),
}

pub type Result<T> = std::result::Result<T, SymbolicError>;

/// Square 0/1 matrix over the alphabet `1..=m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    m: usize,
    rows: Vec<Vec<u8>>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let m = rows.len();
        if m < 2 || rows.iter().any(|r| r.len() != m) {
            return Err(SymbolicError::BadShape { rows: m });
        }
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v > 1 {
                    return Err(SymbolicError::BadEntry { row: i + 1, col: j + 1, value: v });
                }
            }
        }
        Ok(Self { m, rows })
    }

    /// The full shift on `m` symbols.
    pub fn full(m: usize) -> Result<Self> {
        Self::new(vec![vec![1; m]; m])
    }

    /// Two squares, four strips: `{1,2} → {3,4}` and `{3,4} → {1,2}`.
    pub fn a4() -> Self {
        Self::new(vec![
            vec![0, 0, 1, 1],
            vec![0, 0, 1, 1],
            vec![1, 1, 0, 0],
            vec![1, 1, 0, 0],
        ])
        .expect("static matrix")
    }

    /// Two-orbit layout on eight symbols.
    pub fn b8() -> Self {
        Self::new(vec![
            vec![0, 0, 1, 1, 1, 1, 0, 0],
            vec![0, 0, 1, 1, 1, 1, 0, 0],
            vec![1, 1, 0, 0, 0, 0, 0, 0],
            vec![1, 1, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0, 1, 1],
            vec![0, 0, 0, 0, 0, 0, 1, 1],
            vec![0, 0, 1, 1, 1, 1, 0, 0],
            vec![0, 0, 1, 1, 1, 1, 0, 0],
        ])
        .expect("static matrix")
    }

    /// Named built-ins: `A4`, `B8`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "A4" => Ok(Self::a4()),
            "B8" => Ok(Self::b8()),
            other => Err(SymbolicError::UnknownBuiltin(other.to_string())),
        }
    }

    /// Parses `m` on the first line followed by `m` rows of `m` digits.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (ln, first) = lines.next().ok_or(SymbolicError::Parse {
            line: 1,
            message: "missing size line".into(),
        })?;
        let m: usize = first.parse().map_err(|_| SymbolicError::Parse {
            line: ln,
            message: format!("expected symbol count, found `{first}`"),
        })?;
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, line) = lines.next().ok_or(SymbolicError::Parse {
                line: ln + rows.len() + 1,
                message: format!("expected {m} rows, found {}", rows.len()),
            })?;
            let row: std::result::Result<Vec<u8>, _> =
                line.split_whitespace().map(|t| t.parse::<u8>()).collect();
            let row = row.map_err(|_| SymbolicError::Parse {
                line: ln,
                message: format!("non-integer entry in `{line}`"),
            })?;
            if row.len() != m {
                return Err(SymbolicError::Parse {
                    line: ln,
                    message: format!("expected {m} entries, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        if let Some((ln, extra)) = lines.next() {
            return Err(SymbolicError::Parse { line: ln, message: format!("trailing content `{extra}`") });
        }
        Self::new(rows)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.m);
        for r in &self.rows {
            let row: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Entry for 1-based symbols `i → j`.
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.rows[i - 1][j - 1] == 1
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    /// Every admissible word of length `n`, in lexicographic order.
    pub fn admissible_words(&self, n: usize) -> Vec<Word> {
        let mut out: Vec<Vec<usize>> = (1..=self.m).map(|s| vec![s]).collect();
        for _ in 1..n {
            out = out
                .into_iter()
                .flat_map(|w| {
                    let last = *w.last().unwrap();
                    (1..=self.m).filter(move |&s| self.allows(last, s)).map(move |s| {
                        let mut v = w.clone();
                        v.push(s);
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(|symbols| Word { symbols, m: self.m }).collect()
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Finite non-empty string over `1..=m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word {
    symbols: Vec<usize>,
    m: usize,
}

impl Word {
    pub fn new(symbols: Vec<usize>, m: usize) -> Result<Self> {
        if symbols.is_empty() {
            return Err(SymbolicError::EmptyWord);
        }
        if let Some(&s) = symbols.iter().find(|&&s| s == 0 || s > m) {
            return Err(SymbolicError::SymbolOutOfRange { symbol: s, m });
        }
        Ok(Self { symbols, m })
    }

    /// Parses `"1,3,2"` or `"1 3 2"` or `"132"` (single digits).
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let t = text.trim();
        let parts: Vec<&str> = if t.contains(',') || t.contains(' ') {
            t.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect()
        } else {
            t.split("").filter(|s| !s.is_empty()).collect()
        };
        let symbols: std::result::Result<Vec<usize>, _> = parts.iter().map(|p| p.parse()).collect();
        let symbols = symbols.map_err(|_| SymbolicError::Parse { line: 1, message: format!("bad word `{text}`") })?;
        Self::new(symbols, m)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Word with the first symbol dropped; `None` for length 1.
    pub fn tail(&self) -> Option<Word> {
        (self.symbols.len() > 1).then(|| Word { symbols: self.symbols[1..].to_vec(), m: self.m })
    }

    pub fn subword(&self, start: usize, len: usize) -> Word {
        Word { symbols: self.symbols[start..start + len].to_vec(), m: self.m }
    }

    /// `self` repeated `times` times.
    pub fn repeat(&self, times: usize) -> Word {
        Word { symbols: self.symbols.repeat(times), m: self.m }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.symbols.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// Point of the two-sided sequence space given by a repeating block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeriodicSequence {
    block: Word,
}

impl PeriodicSequence {
    pub fn new(block: Word) -> Self {
        Self { block }
    }

    pub fn block(&self) -> &Word {
        &self.block
    }

    /// Symbol at any integer index.
    pub fn at(&self, i: i64) -> usize {
        let n = self.block.len() as i64;
        self.block.symbols[i.rem_euclid(n) as usize]
    }

    pub fn cyclically_admissible(&self, a: &TransitionMatrix) -> Result<bool> {
        let w = &self.block;
        Ok(admissible(w, a)? && a.allows(*w.symbols.last().unwrap(), w.symbols[0]))
    }
}

fn check_alphabet(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(SymbolicError::AlphabetMismatch { left, right });
    }
    Ok(())
}

/// True iff every consecutive pair of `w` is an allowed transition.
pub fn admissible(w: &Word, a: &TransitionMatrix) -> Result<bool> {
    check_alphabet(w.m, a.m)?;
    Ok(w.symbols.windows(2).all(|p| a.allows(p[0], p[1])))
}

/// Left shift: the block rotates by one.
pub fn shift(s: &PeriodicSequence) -> PeriodicSequence {
    let mut symbols = s.block.symbols.clone();
    symbols.rotate_left(1);
    PeriodicSequence { block: Word { symbols, m: s.block.m } }
}

/// Truncated metric value with a guaranteed remainder bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// Sum over `|i| <= N`.
    pub partial: f64,
    /// Upper bound `2^(1-N)` on the omitted tail.
    pub bound: f64,
}

impl DistanceEstimate {
    pub fn upper(&self) -> f64 {
        self.partial + self.bound
    }
}

/// `Σ_{|i|≤N} [a_i ≠ b_i] / 2^|i|` plus the tail bound.
pub fn distance(a: &PeriodicSequence, b: &PeriodicSequence, n: u32) -> Result<DistanceEstimate> {
    check_alphabet(a.block.m, b.block.m)?;
    let mut partial = 0.0;
    for i in -(n as i64)..=(n as i64) {
        if a.at(i) != b.at(i) {
            partial += 0.5f64.powi(i.unsigned_abs() as i32);
        }
    }
    Ok(DistanceEstimate { partial, bound: 2.0f64.powi(1 - n as i32) })
}

type Counts = Vec<Vec<u128>>;

fn mat_mul(a: &Counts, b: &Counts, n_words: usize) -> Result<Counts> {
    let m = a.len();
    let mut out = vec![vec![0u128; m]; m];
    for i in 0..m {
        for k in 0..m {
            if a[i][k] == 0 {
                continue;
            }
            for j in 0..m {
                let t = a[i][k].checked_mul(b[k][j]).ok_or(SymbolicError::Overflow { n: n_words })?;
                out[i][j] = out[i][j].checked_add(t).ok_or(SymbolicError::Overflow { n: n_words })?;
            }
        }
    }
    Ok(out)
}

fn mat_pow(a: &TransitionMatrix, p: usize, n_words: usize) -> Result<Counts> {
    let m = a.m;
    let base: Counts = a.rows.iter().map(|r| r.iter().map(|&v| v as u128).collect()).collect();
    let mut result: Counts = (0..m).map(|i| (0..m).map(|j| (i == j) as u128).collect()).collect();
    let mut sq = base;
    let mut e = p;
    while e > 0 {
        if e & 1 == 1 {
            result = mat_mul(&result, &sq, n_words)?;
        }
        e >>= 1;
        if e > 0 {
            sq = mat_mul(&sq, &sq, n_words)?;
        }
    }
    Ok(result)
}

/// Number of admissible words of length `n`: the entry sum of `A^(n-1)`.
pub fn count_words(a: &TransitionMatrix, n: usize) -> Result<u128> {
    if n == 0 {
        return Err(SymbolicError::ZeroLength);
    }
    let p = mat_pow(a, n - 1, n)?;
    p.iter().flatten().try_fold(0u128, |acc, &v| acc.checked_add(v).ok_or(SymbolicError::Overflow { n }))
}

/// Number of cyclically admissible words of length `n`: `trace(A^n)`.
pub fn count_periodic(a: &TransitionMatrix, n: usize) -> Result<u128> {
    if n == 0 {
        return Err(SymbolicError::ZeroLength);
    }
    let p = mat_pow(a, n, n)?;
    (0..a.m).try_fold(0u128, |acc, i| acc.checked_add(p[i][i]).ok_or(SymbolicError::Overflow { n }))
}

/// Spectral radius of `A`: the largest eigenvalue modulus from a real Schur
/// decomposition. Periodic (imprimitive) and non-normal matrices need no
/// special handling.
pub fn spectral_radius(a: &TransitionMatrix) -> Result<f64> {
    let m = a.m;
    // nilpotent <=> A^m = 0 <=> no bi-infinite admissible sequence
    if mat_pow(a, m, m).map(|p| p.iter().flatten().all(|&v| v == 0)).unwrap_or(false) {
        return Err(SymbolicError::EmptySubshift);
    }
    let dense = nalgebra::DMatrix::from_fn(m, m, |i, j| a.rows[i][j] as f64);
    let r = dense.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !r.is_finite() {
        return Err(SymbolicError::NoConvergence);
    }
    Ok(r)
}

/// Topological entropy `log ρ(A)`.
pub fn entropy(a: &TransitionMatrix) -> Result<f64> {
    spectral_radius(a).map(f64::ln)
}

/// Growth-rate estimate `log(N_n)/n` from word counts.
pub fn word_growth_naive(a: &TransitionMatrix, n: usize) -> Result<f64> {
    Ok((count_words(a, n)? as f64).ln() / n as f64)
}

/// Growth-rate estimate `log(N_{n+2}/N_n)/2`, free of the `O(1/n)` offset of
/// the naive estimator and insensitive to period-2 oscillation.
pub fn word_growth_ratio(a: &TransitionMatrix, n: usize) -> Result<f64> {
    let hi = count_words(a, n + 2)? as f64;
    let lo = count_words(a, n)? as f64;
    Ok((hi / lo).ln() / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &[usize], m: usize) -> Word {
        Word::new(s.to_vec(), m).unwrap()
    }

    #[test]
    fn admissibility_against_a4() {
        let a = TransitionMatrix::a4();
        assert!(admissible(&w(&[1, 3], 4), &a).unwrap());
        assert!(!admissible(&w(&[1, 2], 4), &a).unwrap());
        assert!(admissible(&w(&[1], 4), &a).unwrap());
        assert_eq!(
            admissible(&w(&[1, 2], 3), &a),
            Err(SymbolicError::AlphabetMismatch { left: 3, right: 4 })
        );
    }

    #[test]
    fn word_validation() {
        assert_eq!(Word::new(vec![], 4), Err(SymbolicError::EmptyWord));
        assert_eq!(Word::new(vec![0], 4), Err(SymbolicError::SymbolOutOfRange { symbol: 0, m: 4 }));
        assert_eq!(Word::parse("1,3,2", 4).unwrap().symbols(), &[1, 3, 2]);
        assert_eq!(Word::parse("132", 4).unwrap().symbols(), &[1, 3, 2]);
    }

    #[test]
    fn shift_rotates() {
        let s = PeriodicSequence::new(w(&[1, 3], 4));
        assert_eq!(shift(&s).block().symbols(), &[3, 1]);
        let f = PeriodicSequence::new(w(&[2], 4));
        assert_eq!(shift(&f), f);
        let long = PeriodicSequence::new(w(&[1, 3, 2, 4, 1], 4));
        let mut t = long.clone();
        for _ in 0..5 {
            t = shift(&t);
        }
        assert_eq!(t, long);
    }

    #[test]
    fn distance_examples() {
        let a = PeriodicSequence::new(w(&[1, 3], 4));
        let d = distance(&a, &a, 10).unwrap();
        assert_eq!(d.partial, 0.0);
        // differ only at index 0: blocks (1,2,2,...) vs (2,2,2,...) with long period
        let x = PeriodicSequence::new(w(&[1, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2], 2));
        let y = PeriodicSequence::new(w(&[2], 2));
        assert_eq!(distance(&x, &y, 10).unwrap().partial, 1.0);
        // differ everywhere: partial sums approach 3 from below, bound closes the gap
        let ones = PeriodicSequence::new(w(&[1], 2));
        let twos = PeriodicSequence::new(w(&[2], 2));
        for n in [0u32, 1, 5, 20] {
            let d = distance(&ones, &twos, n).unwrap();
            let oracle: f64 = 1.0 + 2.0 * (1..=n).map(|i| 0.5f64.powi(i as i32)).sum::<f64>();
            assert!((d.partial - oracle).abs() < 1e-15);
            assert!((d.upper() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn counts_for_a4() {
        let a = TransitionMatrix::a4();
        assert_eq!(count_words(&a, 1).unwrap(), 4);
        assert_eq!(count_words(&a, 2).unwrap(), 8);
        assert_eq!(count_words(&a, 3).unwrap(), 16);
        assert_eq!(count_periodic(&a, 1).unwrap(), 0);
        assert_eq!(count_periodic(&a, 2).unwrap(), 8);
        let full2 = TransitionMatrix::full(2).unwrap();
        assert_eq!(count_periodic(&full2, 2).unwrap(), 4);
        assert_eq!(count_words(&a, 0), Err(SymbolicError::ZeroLength));
    }

    #[test]
    fn overflow_is_reported() {
        let full = TransitionMatrix::full(16).unwrap();
        // 16^40 > 2^128
        assert_eq!(count_words(&full, 40), Err(SymbolicError::Overflow { n: 40 }));
        assert!(count_words(&full, 31).is_ok());
        assert_eq!(count_words(&full, 32), Err(SymbolicError::Overflow { n: 32 }));
    }

    #[test]
    fn entropy_values() {
        assert!((entropy(&TransitionMatrix::a4()).unwrap() - 2f64.ln()).abs() < 1e-12);
        for m in 2..6 {
            assert!((entropy(&TransitionMatrix::full(m).unwrap()).unwrap() - (m as f64).ln()).abs() < 1e-12);
        }
        let nil = TransitionMatrix::new(vec![vec![0, 1], vec![0, 0]]).unwrap();
        assert_eq!(entropy(&nil), Err(SymbolicError::EmptySubshift));
    }

    #[test]
    fn parse_roundtrip_and_errors() {
        let b = TransitionMatrix::b8();
        assert_eq!(TransitionMatrix::parse(&b.to_text()).unwrap(), b);
        assert!(matches!(TransitionMatrix::parse("2\n0 1\n1"), Err(SymbolicError::Parse { .. })));
        assert!(matches!(TransitionMatrix::parse("2\n0 1\n1 2"), Err(SymbolicError::BadEntry { .. })));
        assert!(matches!(TransitionMatrix::parse("x"), Err(SymbolicError::Parse { .. })));
        assert!(matches!(TransitionMatrix::builtin("C3"), Err(SymbolicError::UnknownBuiltin(_))));
    }
}
