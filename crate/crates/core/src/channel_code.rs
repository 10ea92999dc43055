//! Systematic (N, mT) linear block codes over GF(p) and their decoders.
//!
//! The code acts on the finite-field sum of all users' information
//! sequences, so a single decoder recovers the multiplexed FFSP sequence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf::{FfMatrix, FfVector, FieldModulus};

/// Largest codebook `ml_decode` will enumerate.
pub const ML_CODEBOOK_LIMIT: u128 = 1 << 20;

/// Parity columns of the 12×16 example generator, one string per row.
const EXAMPLE_16_12_PARITY: [&str; 12] = [
    "1000", "0100", "0010", "0001", "0001", "1000", "0100", "0010", "0010", "0001", "1000", "0100",
];

/// The 12×16 systematic generator `[I₁₂ | F]` with 0/1 entries, valid over GF(2) and GF(3).
pub fn example_generator_16_12(p: FieldModulus) -> FfMatrix {
    let rows: Vec<String> = EXAMPLE_16_12_PARITY
        .iter()
        .enumerate()
        .map(|(i, parity)| {
            let mut row: String = (0..12).map(|c| if c == i { '1' } else { '0' }).collect();
            row.push_str(parity);
            row
        })
        .collect();
    let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
    FfMatrix::from_digit_rows(p, &refs).expect("static matrix")
}

/// The (16, 12) example code with m = 4 and T = 3, parity check attached.
pub fn example_code_16_12(p: FieldModulus) -> Result<SystematicCode> {
    SystematicCode::from_generator(&example_generator_16_12(p), 4)?.with_induced_parity_check()
}

/// Sparse parity-check matrix: each row lists `(column, nonzero weight)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheck {
    p: FieldModulus,
    n: usize,
    rows: Vec<Vec<(usize, u8)>>,
}

impl ParityCheck {
    pub fn from_dense(h: &FfMatrix) -> Self {
        let rows = (0..h.rows())
            .map(|r| {
                h.row_slice(r)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(c, &v)| (c, v))
                    .collect()
            })
            .collect();
        Self {
            p: h.modulus(),
            n: h.cols(),
            rows,
        }
    }

    pub fn to_dense(&self) -> FfMatrix {
        let mut h = FfMatrix::zeros(self.p, self.rows.len(), self.n);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                h.set(r, c, v);
            }
        }
        h
    }

    pub fn modulus(&self) -> FieldModulus {
        self.p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn checks(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, u8)>] {
        &self.rows
    }

    pub fn edges(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn syndrome_is_zero(&self, word: &[u8]) -> bool {
        self.rows.iter().all(|row| {
            row.iter()
                .fold(0u8, |acc, &(c, v)| self.p.add(acc, self.p.mul(v, word[c])))
                == 0
        })
    }

    /// Number of column pairs sharing two or more checks.
    pub fn four_cycles(&self) -> usize {
        let cols = self.column_sets();
        let mut count = 0;
        for a in 0..self.n {
            for b in a + 1..self.n {
                let shared = cols[a].iter().filter(|r| cols[b].contains(r)).count();
                if shared >= 2 {
                    count += 1;
                }
            }
        }
        count
    }

    fn column_sets(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, _) in row {
                cols[c].push(r);
            }
        }
        cols
    }

    /// Parse the alist format. Over GF(2) entries are 1-based indices; over
    /// larger fields each entry is an `index weight` pair.
    pub fn parse_alist(text: &str, p: FieldModulus) -> Result<Self> {
        let lines: Vec<(usize, Vec<u32>)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .map(|(ln, l)| crate::gf::parse_uints(l, ln).map(|v| (ln, v)))
            .collect::<Result<_>>()?;
        let bad = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let (hl, header) = lines.first().ok_or_else(|| bad(1, "empty alist"))?;
        let [n, m] = header[..] else {
            return Err(bad(*hl, "expected header `N M`"));
        };
        let (n, m) = (n as usize, m as usize);
        if lines.len() < 4 + n + m {
            return Err(bad(*hl, "truncated alist"));
        }
        let stride = if p.p() == 2 { 1 } else { 2 };
        let row_weights = &lines[3].1;
        if row_weights.len() != m {
            return Err(bad(lines[3].0, "row weight count does not match M"));
        }
        let mut rows = Vec::with_capacity(m);
        for (r, (ln, entries)) in lines[4 + n..4 + n + m].iter().enumerate() {
            let mut row = Vec::new();
            for chunk in entries.chunks(stride) {
                let idx = chunk[0] as usize;
                if idx == 0 {
                    continue;
                }
                if idx > n {
                    return Err(bad(*ln, "column index out of range"));
                }
                let w = if stride == 2 {
                    *chunk.get(1).ok_or_else(|| bad(*ln, "missing weight"))?
                } else {
                    1
                };
                if w == 0 || w >= p.p() as u32 {
                    return Err(Error::ElementOutOfRange { value: w, p: p.p() });
                }
                row.push((idx - 1, w as u8));
            }
            if row.len() != row_weights[r] as usize {
                return Err(bad(*ln, "row length does not match its weight"));
            }
            rows.push(row);
        }
        Ok(Self { p, n, rows })
    }

    pub fn to_alist(&self) -> String {
        let cols = {
            let mut cols = vec![Vec::new(); self.n];
            for (r, row) in self.rows.iter().enumerate() {
                for &(c, v) in row {
                    cols[c].push((r, v));
                }
            }
            cols
        };
        let max_c = cols.iter().map(Vec::len).max().unwrap_or(0);
        let max_r = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let binary = self.p.p() == 2;
        let fmt_list = |list: &[(usize, u8)], width: usize| -> String {
            let mut parts: Vec<String> = list
                .iter()
                .map(|&(i, v)| {
                    if binary {
                        format!("{}", i + 1)
                    } else {
                        format!("{} {v}", i + 1)
                    }
                })
                .collect();
            while parts.len() < width {
                parts.push(if binary { "0".into() } else { "0 0".into() });
            }
            parts.join(" ")
        };
        let join = |v: Vec<String>| v.join(" ");
        let mut s = format!("{} {}\n{max_c} {max_r}\n", self.n, self.rows.len());
        s += &join(cols.iter().map(|c| c.len().to_string()).collect());
        s.push('\n');
        s += &join(self.rows.iter().map(|r| r.len().to_string()).collect());
        s.push('\n');
        for c in &cols {
            s += &fmt_list(c, max_c);
            s.push('\n');
        }
        for r in &self.rows {
            s += &fmt_list(r, max_r);
            s.push('\n');
        }
        s
    }
}

/// A systematic code with generator `[I | F_red]` whose information part is
/// split into T data blocks of m symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystematicCode {
    m: usize,
    blocks: usize,
    f_red: FfMatrix,
    h: Option<ParityCheck>,
}

/// A codeword with its information length recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Codeword {
    symbols: FfVector,
    info_len: usize,
}

impl Codeword {
    pub fn symbols(&self) -> &FfVector {
        &self.symbols
    }

    pub fn info(&self) -> FfVector {
        self.symbols.slice(0, self.info_len)
    }

    pub fn parity(&self) -> FfVector {
        self.symbols
            .slice(self.info_len, self.symbols.len() - self.info_len)
    }
}

impl SystematicCode {
    pub fn new(f_red: FfMatrix, m: usize, blocks: usize) -> Result<Self> {
        if m == 0 || blocks == 0 {
            return Err(Error::InvalidCode("m and T must be positive".into()));
        }
        if f_red.rows() != m * blocks {
            return Err(Error::dims("redundancy rows", m * blocks, f_red.rows()));
        }
        Ok(Self {
            m,
            blocks,
            f_red,
            h: None,
        })
    }

    /// Split a generator `[I | F_red]` into its redundancy part.
    pub fn from_generator(g: &FfMatrix, m: usize) -> Result<Self> {
        let k = g.rows();
        if m == 0 || !k.is_multiple_of(m) {
            return Err(Error::InvalidCode(format!(
                "information length {k} is not a multiple of m = {m}"
            )));
        }
        if g.cols() < k || !g.col_block(0, k).is_identity() {
            return Err(Error::InvalidCode(
                "generator is not in systematic form".into(),
            ));
        }
        Self::new(g.col_block(k, g.cols() - k), m, k / m)
    }

    /// Build from a dense parity-check matrix `[A | B]` with B invertible.
    pub fn from_parity_check(h: &FfMatrix, m: usize) -> Result<Self> {
        let r = h.rows();
        let n = h.cols();
        if r > n {
            return Err(Error::InvalidCode(
                "parity check has more rows than columns".into(),
            ));
        }
        let b_inv = h.col_block(n - r, r).inverse().ok_or_else(|| {
            Error::InvalidCode("last R columns of the parity check are singular".into())
        })?;
        let a = h.col_block(0, n - r);
        // B·p = -A·x  ⇒  p = x·(-(B⁻¹A))ᵀ
        let f_red = crate::gf::mat_mul(&b_inv, &a)?.negate().transpose();
        let k = n - r;
        if m == 0 || !k.is_multiple_of(m) {
            return Err(Error::InvalidCode(format!(
                "information length {k} is not a multiple of m = {m}"
            )));
        }
        Self::new(f_red, m, k / m)?.with_parity_check(ParityCheck::from_dense(h))
    }

    pub fn with_parity_check(mut self, h: ParityCheck) -> Result<Self> {
        if h.n() != self.n() || h.modulus() != self.modulus() {
            return Err(Error::dims("parity check", self.n(), h.n()));
        }
        let g = self.generator();
        for i in 0..g.rows() {
            if !h.syndrome_is_zero(g.row_slice(i)) {
                return Err(Error::InvalidCode(format!(
                    "generator row {i} violates the parity check"
                )));
            }
        }
        self.h = Some(h);
        Ok(self)
    }

    pub fn with_induced_parity_check(self) -> Result<Self> {
        let h = ParityCheck::from_dense(&self.induced_parity_check());
        self.with_parity_check(h)
    }

    /// `[-F_redᵀ | I_R]`.
    pub fn induced_parity_check(&self) -> FfMatrix {
        let r = self.redundancy();
        self.f_red
            .transpose()
            .negate()
            .hcat(&FfMatrix::identity(self.modulus(), r))
            .expect("row counts agree")
    }

    pub fn generator(&self) -> FfMatrix {
        FfMatrix::identity(self.modulus(), self.info_len())
            .hcat(&self.f_red)
            .expect("row counts agree")
    }

    pub fn modulus(&self) -> FieldModulus {
        self.f_red.modulus()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// K_gc = mT.
    pub fn info_len(&self) -> usize {
        self.m * self.blocks
    }

    pub fn redundancy(&self) -> usize {
        self.f_red.cols()
    }

    pub fn n(&self) -> usize {
        self.info_len() + self.redundancy()
    }

    pub fn f_red(&self) -> &FfMatrix {
        &self.f_red
    }

    pub fn parity_check(&self) -> Option<&ParityCheck> {
        self.h.as_ref()
    }

    pub fn encode(&self, info: &FfVector) -> Result<Codeword> {
        if info.len() != self.info_len() {
            return Err(Error::dims("information word", self.info_len(), info.len()));
        }
        let parity = self.f_red.left_mul(info)?;
        Ok(Codeword {
            symbols: FfVector::concat(&[info.clone(), parity])?,
            info_len: self.info_len(),
        })
    }

    /// Encode `u` placed at data block `t` (1-based) with zeros elsewhere.
    pub fn place_and_encode(&self, u: &FfVector, t: usize) -> Result<Codeword> {
        if t == 0 || t > self.blocks {
            return Err(Error::IndexOutOfRange {
                what: "data block",
                index: t,
                max: self.blocks,
            });
        }
        if u.len() != self.m {
            return Err(Error::dims("block word", self.m, u.len()));
        }
        let mut info = vec![0u8; self.info_len()];
        info[(t - 1) * self.m..t * self.m].copy_from_slice(u.as_slice());
        self.encode(&FfVector::new(self.modulus(), info)?)
    }

    pub fn is_codeword(&self, word: &FfVector) -> bool {
        word.len() == self.n()
            && self
                .encode(&word.slice(0, self.info_len()))
                .map(|c| c.symbols == *word)
                .unwrap_or(false)
    }

    pub fn codeword_from_symbols(&self, symbols: FfVector) -> Result<Codeword> {
        if !self.is_codeword(&symbols) {
            return Err(Error::InvalidCode("word is not a codeword".into()));
        }
        Ok(Codeword {
            symbols,
            info_len: self.info_len(),
        })
    }
}

/// Componentwise sum of codewords of one code.
pub fn superpose(codewords: &[Codeword]) -> Result<Codeword> {
    let first = codewords.first().ok_or(Error::EmptySignals)?;
    let mut acc = first.clone();
    for c in &codewords[1..] {
        if c.info_len != acc.info_len {
            return Err(Error::dims(
                "superposed codewords",
                acc.info_len,
                c.info_len,
            ));
        }
        acc.symbols = acc.symbols.add(&c.symbols)?;
    }
    Ok(acc)
}

/// Per-symbol probability rows, N × p.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    p: usize,
    probs: Vec<f64>,
}

impl Posteriors {
    pub fn uniform(p: FieldModulus, n: usize) -> Self {
        let q = p.order();
        Self {
            p: q,
            probs: vec![1.0 / q as f64; q * n],
        }
    }

    pub fn from_rows(p: FieldModulus, rows: &[Vec<f64>]) -> Result<Self> {
        let q = p.order();
        let mut probs = Vec::with_capacity(rows.len() * q);
        for r in rows {
            if r.len() != q {
                return Err(Error::dims("posterior row", q, r.len()));
            }
            probs.extend_from_slice(r);
        }
        Ok(Self { p: q, probs })
    }

    /// Point masses at `word`, with `confidence` on the given symbol.
    pub fn hard(word: &FfVector, confidence: f64) -> Self {
        let q = word.modulus().order();
        let other = (1.0 - confidence) / (q - 1) as f64;
        let mut probs = vec![other; q * word.len()];
        for (i, &s) in word.as_slice().iter().enumerate() {
            probs[i * q + s as usize] = confidence;
        }
        Self { p: q, probs }
    }

    pub fn order(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.p
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.probs[n * self.p..(n + 1) * self.p]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.probs[n * self.p..(n + 1) * self.p]
    }

    pub fn set_uniform(&mut self, n: usize) {
        let u = 1.0 / self.p as f64;
        self.row_mut(n).fill(u);
    }

    /// Argmax per symbol, lowest symbol on ties.
    pub fn hard_decision(&self) -> Vec<u8> {
        (0..self.len()).map(|n| argmax(self.row(n)) as u8).collect()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

const LOG_FLOOR: f64 = 1e-300;

/// Exhaustive maximum-likelihood decoding over the codebook.
///
/// Candidates are visited in lexicographic order of their information part
/// and replaced only by strictly better scores, so ties resolve to the
/// lexicographically smallest codeword.
pub fn ml_decode(code: &SystematicCode, post: &Posteriors) -> Result<FfVector> {
    let p = code.modulus();
    let q = p.order();
    let k = code.info_len();
    let r = code.redundancy();
    if post.len() != code.n() || post.order() != q {
        return Err(Error::dims("posteriors", code.n(), post.len()));
    }
    let size = (q as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if size > ML_CODEBOOK_LIMIT {
        return Err(Error::EnumerationTooLarge {
            what: "ML codebook",
            size,
            limit: ML_CODEBOOK_LIMIT,
        });
    }
    let logp: Vec<f64> = post.probs.iter().map(|&x| x.max(LOG_FLOOR).ln()).collect();
    let row_max = |n: usize| {
        logp[n * q..(n + 1) * q]
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    // tail[i]: best possible information score from symbol i onwards.
    let mut tail = vec![0.0; k + 1];
    for i in (0..k).rev() {
        tail[i] = tail[i + 1] + row_max(i);
    }
    let parity_bound: f64 = (k..k + r).map(row_max).sum();

    struct Search<'a> {
        q: usize,
        k: usize,
        p: FieldModulus,
        f: &'a FfMatrix,
        logp: &'a [f64],
        tail: &'a [f64],
        parity_bound: f64,
        info: Vec<u8>,
        parity: Vec<Vec<u8>>,
        best: f64,
        best_info: Vec<u8>,
    }

    impl Search<'_> {
        fn visit(&mut self, depth: usize, score: f64) {
            if score + self.tail[depth] + self.parity_bound + 1e-9 < self.best {
                return;
            }
            if depth == self.k {
                let parity = &self.parity[depth];
                let total = score
                    + parity
                        .iter()
                        .enumerate()
                        .map(|(j, &s)| self.logp[(self.k + j) * self.q + s as usize])
                        .sum::<f64>();
                if total > self.best {
                    self.best = total;
                    self.best_info.copy_from_slice(&self.info);
                }
                return;
            }
            for s in 0..self.q as u8 {
                self.info[depth] = s;
                let (lower, upper) = self.parity.split_at_mut(depth + 1);
                let next = &mut upper[0];
                next.copy_from_slice(&lower[depth]);
                if s != 0 {
                    for (j, pj) in next.iter_mut().enumerate() {
                        *pj = self.p.add(*pj, self.p.mul(s, self.f.get(depth, j)));
                    }
                }
                let gain = self.logp[depth * self.q + s as usize];
                self.visit(depth + 1, score + gain);
            }
        }
    }

    let mut search = Search {
        q,
        k,
        p,
        f: code.f_red(),
        logp: &logp,
        tail: &tail,
        parity_bound,
        info: vec![0; k],
        parity: vec![vec![0; r]; k + 1],
        best: f64::NEG_INFINITY,
        best_info: vec![0; k],
    };
    search.visit(0, 0.0);
    FfVector::new(p, search.best_info)
}

/// Result of belief-propagation decoding.
#[derive(Debug, Clone, PartialEq)]
pub struct QspaOutcome {
    pub info: FfVector,
    pub codeword: FfVector,
    pub iterations: usize,
    pub converged: bool,
    pub beliefs: Posteriors,
}

/// q-ary sum-product decoding; returns the information part.
pub fn qspa_decode(code: &SystematicCode, post: &Posteriors, max_iter: usize) -> Result<FfVector> {
    qspa_decode_detailed(code, post, max_iter).map(|o| o.info)
}

/// Flooding-schedule sum-product over GF(p) with probability-domain messages.
pub fn qspa_decode_detailed(
    code: &SystematicCode,
    post: &Posteriors,
    max_iter: usize,
) -> Result<QspaOutcome> {
    let h = code.parity_check().ok_or(Error::NoParityCheck)?;
    let p = code.modulus();
    let q = p.order();
    let n = code.n();
    if post.len() != n || post.order() != q {
        return Err(Error::dims("posteriors", n, post.len()));
    }
    // Edge list grouped by check; var_edges[v] holds indices into it.
    let mut edge_var = Vec::with_capacity(h.edges());
    let mut edge_w = Vec::with_capacity(h.edges());
    let mut check_ranges = Vec::with_capacity(h.checks());
    for row in h.rows() {
        let start = edge_var.len();
        for &(c, w) in row {
            edge_var.push(c);
            edge_w.push(w);
        }
        check_ranges.push(start..edge_var.len());
    }
    let mut var_edges = vec![Vec::new(); n];
    for (e, &v) in edge_var.iter().enumerate() {
        var_edges[v].push(e);
    }
    let e_count = edge_var.len();
    let mut v2c = vec![0.0; e_count * q];
    let mut c2v = vec![1.0 / q as f64; e_count * q];
    let mut beliefs = post.clone();

    let decide = |b: &Posteriors| b.hard_decision();
    let mut hard = decide(post);
    let mut iterations = 0;
    let mut converged = h.syndrome_is_zero(&hard);

    // Scratch buffers for the forward/backward convolutions.
    let mut fwd: Vec<Vec<f64>> = Vec::new();
    let mut bwd: Vec<Vec<f64>> = Vec::new();
    let mut shifted: Vec<Vec<f64>> = Vec::new();

    while !converged && iterations < max_iter {
        iterations += 1;
        // Variable to check.
        for v in 0..n {
            let prior = post.row(v);
            for &e in &var_edges[v] {
                let out = &mut v2c[e * q..(e + 1) * q];
                out.copy_from_slice(prior);
                for &e2 in &var_edges[v] {
                    if e2 != e {
                        for a in 0..q {
                            out[a] *= c2v[e2 * q + a];
                        }
                    }
                }
                normalize(out);
            }
        }
        // Check to variable. Edge e carries y = w·x; the check needs Σ y = 0.
        for range in &check_ranges {
            let d = range.len();
            shifted.resize(d, vec![0.0; q]);
            for (i, e) in range.clone().enumerate() {
                let w = edge_w[e];
                let s = &mut shifted[i];
                s.resize(q, 0.0);
                for a in 0..q {
                    s[p.mul(w, a as u8) as usize] = v2c[e * q + a];
                }
            }
            fwd.resize(d + 1, vec![0.0; q]);
            bwd.resize(d + 1, vec![0.0; q]);
            let mut delta = vec![0.0; q];
            delta[0] = 1.0;
            fwd[0].clone_from(&delta);
            bwd[d].clone_from(&delta);
            for i in 0..d {
                fwd[i + 1] = convolve(p, &fwd[i], &shifted[i]);
            }
            for i in (0..d).rev() {
                bwd[i] = convolve(p, &bwd[i + 1], &shifted[i]);
            }
            for (i, e) in range.clone().enumerate() {
                let others = convolve(p, &fwd[i], &bwd[i + 1]);
                let w = edge_w[e];
                let out = &mut c2v[e * q..(e + 1) * q];
                // w·x = -(sum of others)
                for a in 0..q {
                    let y = p.mul(w, a as u8);
                    out[a] = others[p.neg(y) as usize];
                }
                normalize(out);
            }
        }
        for v in 0..n {
            let row = beliefs.row_mut(v);
            row.copy_from_slice(post.row(v));
            for &e in &var_edges[v] {
                for a in 0..q {
                    row[a] *= c2v[e * q + a];
                }
            }
            normalize(row);
        }
        hard = decide(&beliefs);
        converged = h.syndrome_is_zero(&hard);
    }
    let codeword = FfVector::new(p, hard)?;
    Ok(QspaOutcome {
        info: codeword.slice(0, code.info_len()),
        codeword,
        iterations,
        converged,
        beliefs,
    })
}

fn convolve(p: FieldModulus, a: &[f64], b: &[f64]) -> Vec<f64> {
    let q = a.len();
    let mut out = vec![0.0; q];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[p.add(i as u8, j as u8) as usize] += x * y;
        }
    }
    out
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / v.len() as f64;
        v.fill(u);
    }
}

/// Recipe for a seeded random regular LDPC code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyLdpcSpec {
    pub p: FieldModulus,
    pub n: usize,
    pub redundancy: usize,
    pub col_weight: usize,
    pub m: usize,
    pub seed: u64,
}

const TOY_LDPC_ATTEMPTS: usize = 200;

/// Regular LDPC code with the requested column weight, short cycles removed
/// where the dimensions allow, and columns permuted so the last R columns of
/// the parity check are invertible. Nonzero weights over GF(3) are drawn from
/// {1, 2}.
pub fn toy_ldpc(spec: ToyLdpcSpec) -> Result<SystematicCode> {
    let ToyLdpcSpec {
        p,
        n,
        redundancy: r,
        col_weight: wc,
        m,
        seed,
    } = spec;
    if r == 0 || r >= n || wc == 0 || wc > r {
        return Err(Error::InvalidCode(format!(
            "toy LDPC needs 0 < R < N and 0 < column weight ≤ R (N = {n}, R = {r}, w = {wc})"
        )));
    }
    if (n * wc) % r != 0 {
        return Err(Error::InvalidCode(format!(
            "N·w = {} is not divisible by R = {r}",
            n * wc
        )));
    }
    if (n - r) % m != 0 {
        return Err(Error::InvalidCode(format!(
            "information length {} is not a multiple of m = {m}",
            n - r
        )));
    }
    let wr = n * wc / r;
    if wr > n {
        return Err(Error::InvalidCode("row weight exceeds N".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..TOY_LDPC_ATTEMPTS {
        let Some(cols) = regular_structure(n, r, wc, wr, &mut rng) else {
            continue;
        };
        let mut h = FfMatrix::zeros(p, r, n);
        for (c, rows) in cols.iter().enumerate() {
            for &row in rows {
                let w = if p.p() == 2 {
                    1
                } else {
                    rng.random_range(1..p.p())
                };
                h.set(row, c, w);
            }
        }
        let (_, pivots) = h.rref();
        if pivots.len() != r {
            log::debug!("toy LDPC attempt {attempt}: rank {} < {r}", pivots.len());
            continue;
        }
        let mut order: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
        order.extend_from_slice(&pivots);
        let mut permuted = FfMatrix::zeros(p, r, n);
        for (dst, &src) in order.iter().enumerate() {
            for row in 0..r {
                permuted.set(row, dst, h.get(row, src));
            }
        }
        return SystematicCode::from_parity_check(&permuted, m);
    }
    Err(Error::InvalidCode(format!(
        "no full-rank regular parity check found in {TOY_LDPC_ATTEMPTS} attempts"
    )))
}

/// Column → check-row lists for a regular bipartite graph without parallel
/// edges, with a bounded pass of edge swaps that break 4-cycles.
fn regular_structure(
    n: usize,
    r: usize,
    wc: usize,
    wr: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<Vec<usize>>> {
    let mut sockets: Vec<usize> = (0..r)
        .flat_map(|row| std::iter::repeat_n(row, wr))
        .collect();
    sockets.shuffle(rng);
    let mut cols: Vec<Vec<usize>> = sockets.chunks(wc).map(|c| c.to_vec()).collect();
    // Repair parallel edges by swapping with random sockets elsewhere.
    for _ in 0..50 * n {
        let Some((c, i)) = first_duplicate(&cols) else {
            break;
        };
        let c2 = rng.random_range(0..n);
        let i2 = rng.random_range(0..wc);
        let (a, b) = (cols[c][i], cols[c2][i2]);
        if c2 != c && !cols[c].contains(&b) && !cols[c2].contains(&a) {
            cols[c][i] = b;
            cols[c2][i2] = a;
        }
    }
    if first_duplicate(&cols).is_some() {
        return None;
    }
    let shared = |cols: &[Vec<usize>], a: usize, b: usize| {
        cols[a].iter().filter(|x| cols[b].contains(x)).count()
    };
    let cycles_at = |cols: &[Vec<usize>], c: usize| {
        (0..n)
            .filter(|&o| o != c && shared(cols, c, o) >= 2)
            .count()
    };
    for _ in 0..20 * n {
        let Some(c) = (0..n).find(|&c| cycles_at(&cols, c) > 0) else {
            break;
        };
        let c2 = rng.random_range(0..n);
        let i = rng.random_range(0..wc);
        let i2 = rng.random_range(0..wc);
        let (a, b) = (cols[c][i], cols[c2][i2]);
        if c2 == c || cols[c].contains(&b) || cols[c2].contains(&a) {
            continue;
        }
        let before = cycles_at(&cols, c) + cycles_at(&cols, c2);
        cols[c][i] = b;
        cols[c2][i2] = a;
        let after = cycles_at(&cols, c) + cycles_at(&cols, c2);
        if after > before {
            cols[c][i] = a;
            cols[c2][i2] = b;
        }
    }
    Some(cols)
}

fn first_duplicate(cols: &[Vec<usize>]) -> Option<(usize, usize)> {
    for (c, rows) in cols.iter().enumerate() {
        for i in 1..rows.len() {
            if rows[..i].contains(&rows[i]) {
                return Some((c, i));
            }
        }
    }
    None
}
