//! CFSP statistics, complex-to-finite mapping, symbol posteriors and the
//! correlation / MAP detectors for the EP code families.

use std::fmt;
use std::str::FromStr;

use statrs::function::factorial::binomial;

use crate::encoder::UserBlock;
use crate::epcode::EpCode;
use crate::error::{Error, Result};
use crate::gf::{dot, FfMatrix, FfVector, FieldModulus};
use crate::modem::{ask3_level, f_f2c_bpsk_matrix, RealSignal};

/// Largest user count the MAP detector will enumerate.
pub const MAP_MAX_USERS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alphabet {
    /// Every user sends one of {−1, 0, +1}.
    Ternary3ask,
    /// Every user sends ±1 (GF(3) symbols 1 and 2).
    BinaryBpsk,
}

impl Alphabet {
    pub fn as_str(self) -> &'static str {
        match self {
            Alphabet::Ternary3ask => "ternary_3ask",
            Alphabet::BinaryBpsk => "binary_bpsk",
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Alphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ternary_3ask" => Ok(Alphabet::Ternary3ask),
            "binary_bpsk" => Ok(Alphabet::BinaryBpsk),
            other => Err(Error::config(
                "alphabet",
                format!("unknown alphabet `{other}`"),
            )),
        }
    }
}

/// Received CFSP alphabet Ω_r, its GF(3) image Ω_v and prior pmf for J users
/// with uniformly distributed symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct CfspStats {
    pub users: usize,
    pub alphabet: Alphabet,
    /// Descending.
    pub omega_r: Vec<i64>,
    pub omega_v: Vec<u8>,
    pub pmf: Vec<f64>,
}

pub fn cfsp_stats(users: usize, alphabet: Alphabet) -> Result<CfspStats> {
    if users == 0 {
        return Err(Error::config("users", "CFSP statistics need J ≥ 1"));
    }
    let j = users as i64;
    let (omega_r, omega_v, pmf) = match alphabet {
        Alphabet::Ternary3ask => {
            let norm = 3f64.powi(users as i32);
            let omega_r: Vec<i64> = (-j..=j).rev().collect();
            let omega_v = omega_r.iter().map(|&r| r.rem_euclid(3) as u8).collect();
            // ι users at +1 and ν at −1 with ι − ν = r.
            let pmf = omega_r
                .iter()
                .map(|&r| {
                    (0..=users as u64)
                        .filter_map(|iota| {
                            let nu = iota as i64 - r;
                            (nu >= 0 && iota as i64 + nu <= j).then(|| {
                                binomial(users as u64, iota)
                                    * binomial(users as u64 - iota, nu as u64)
                            })
                        })
                        .sum::<f64>()
                        / norm
                })
                .collect();
            (omega_r, omega_v, pmf)
        }
        Alphabet::BinaryBpsk => {
            let norm = 2f64.powi(users as i32);
            let omega_r: Vec<i64> = (0..=j).rev().map(|iota| 2 * iota - j).collect();
            let omega_v = (0..=j)
                .rev()
                .map(|iota| (2 * j - iota).rem_euclid(3) as u8)
                .collect();
            let pmf = (0..=users as u64)
                .rev()
                .map(|iota| binomial(users as u64, iota) / norm)
                .collect();
            (omega_r, omega_v, pmf)
        }
    };
    Ok(CfspStats {
        users,
        alphabet,
        omega_r,
        omega_v,
        pmf,
    })
}

impl CfspStats {
    pub fn to_pmf(&self) -> LevelPmf {
        LevelPmf {
            entries: self
                .omega_r
                .iter()
                .zip(&self.omega_v)
                .zip(&self.pmf)
                .map(|((&r, &v), &p)| (r as i32, v, p))
                .collect(),
        }
    }
}

/// Map a noiseless CFSP value to its finite-field symbol.
pub fn f_c2f_hard(r: i64, stats: &CfspStats) -> Result<u8> {
    stats
        .omega_r
        .iter()
        .position(|&x| x == r)
        .map(|i| stats.omega_v[i])
        .ok_or(Error::OutOfAlphabet(r))
}

/// Joint distribution of (real level sum, field symbol sum) at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPmf {
    /// `(level, symbol, probability)`, probabilities positive.
    pub entries: Vec<(i32, u8, f64)>,
}

impl LevelPmf {
    /// Point mass at level 0, symbol 0 (a silent user).
    pub fn silent() -> Self {
        Self {
            entries: vec![(0, 0, 1.0)],
        }
    }

    /// Per-user pmf from symbol probabilities and a symbol → level map.
    pub fn from_symbols(symbol_probs: &[f64], level: impl Fn(u8) -> i32) -> Self {
        Self {
            entries: symbol_probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(s, &p)| (level(s as u8), s as u8, p))
                .collect(),
        }
    }

    /// Distribution of the sum of two independent contributions.
    pub fn convolve(&self, other: &LevelPmf, p: FieldModulus) -> LevelPmf {
        let mut out: Vec<(i32, u8, f64)> = Vec::new();
        for &(l1, s1, p1) in &self.entries {
            for &(l2, s2, p2) in &other.entries {
                let key = (l1 + l2, p.add(s1, s2));
                match out.iter_mut().find(|e| (e.0, e.1) == key) {
                    Some(e) => e.2 += p1 * p2,
                    None => out.push((key.0, key.1, p1 * p2)),
                }
            }
        }
        out.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        LevelPmf { entries: out }
    }

    pub fn combine(users: &[LevelPmf], p: FieldModulus) -> LevelPmf {
        users
            .iter()
            .fold(LevelPmf::silent(), |acc, u| acc.convolve(u, p))
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.2).sum()
    }

    /// E[level²].
    pub fn second_moment(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(l, _, p)| p * (l * l) as f64)
            .sum()
    }

    /// Prior of each field symbol.
    pub fn symbol_prior(&self, p: FieldModulus) -> Vec<f64> {
        let mut prior = vec![0.0; p.order()];
        for &(_, s, pr) in &self.entries {
            prior[s as usize] += pr;
        }
        prior
    }
}

/// `P(v = ς | y)` for received sample `y` with per-user amplitude √(μ·P_avg).
pub fn posterior(y: f64, mu: f64, p_avg: f64, n0: f64, stats: &CfspStats) -> Vec<f64> {
    posterior_from_pmf(
        y,
        (mu * p_avg).sqrt(),
        n0,
        &stats.to_pmf(),
        FieldModulus::GF3,
    )
}

/// Posterior over the field symbols given amplitude `a` and a level pmf.
/// With `n0 ≤ 0` the nearest level wins outright.
pub fn posterior_from_pmf(y: f64, a: f64, n0: f64, pmf: &LevelPmf, p: FieldModulus) -> Vec<f64> {
    let q = p.order();
    let mut out = vec![0.0; q];
    if n0 <= 0.0 {
        let mut best = (f64::INFINITY, 0u8);
        for &(l, s, _) in &pmf.entries {
            let d = (y - a * l as f64).abs();
            if d < best.0 {
                best = (d, s);
            }
        }
        out[best.1 as usize] = 1.0;
        return out;
    }
    let exps: Vec<f64> = pmf
        .entries
        .iter()
        .map(|&(l, _, _)| {
            let d = y - a * l as f64;
            -d * d / n0
        })
        .collect();
    let max = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for (&(_, s, pr), e) in pmf.entries.iter().zip(&exps) {
        out[s as usize] += pr * (e - max).exp();
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    out
}

/// BPSK images of the rows of a ternary orthogonal matrix.
pub fn walsh_rows(t_o: &FfMatrix) -> Result<Vec<Vec<f64>>> {
    f_f2c_bpsk_matrix(t_o)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Correlation {
    One,
    Zero,
    Erasure,
}

impl Correlation {
    pub fn bit(self) -> Option<u8> {
        match self {
            Correlation::One => Some(1),
            Correlation::Zero => Some(0),
            Correlation::Erasure => None,
        }
    }
}

/// Complex-field correlation with a closed dead zone `|dot| ≤ delta_th`.
pub fn correlate_complex(y_block: &[f64], walsh_row: &[f64], delta_th: f64) -> Result<Correlation> {
    if y_block.len() != walsh_row.len() {
        return Err(Error::dims(
            "correlation block",
            walsh_row.len(),
            y_block.len(),
        ));
    }
    let c: f64 = y_block.iter().zip(walsh_row).map(|(a, b)| a * b).sum();
    Ok(if c > delta_th {
        Correlation::One
    } else if c < -delta_th {
        Correlation::Zero
    } else {
        Correlation::Erasure
    })
}

/// Finite-field correlation against a bit-1 row with self-correlation 1 or 2.
pub fn correlate_ff(w: &FfVector, row: &FfVector, self_corr: u8) -> Result<u8> {
    if w.modulus() != FieldModulus::GF3 {
        return Err(Error::ModulusMismatch {
            left: 3,
            right: w.modulus().p(),
        });
    }
    if !matches!(self_corr, 1 | 2) {
        return Err(Error::InvalidCode(format!(
            "self-correlation must be 1 or 2, got {self_corr}"
        )));
    }
    match dot(w, row)? {
        0 => Err(Error::ZeroCorrelation),
        d => Ok(u8::from(d == self_corr)),
    }
}

/// Candidate table for block-wise MAP detection.
#[derive(Debug, Clone, PartialEq)]
pub struct MapTable {
    candidates: Vec<UserBlock>,
    levels: Vec<Vec<f64>>,
}

impl MapTable {
    /// Noiseless 3ASK CFSP blocks of every user block of a ternary code.
    pub fn for_code(code: &EpCode) -> Result<Self> {
        let m = code.users();
        if m > MAP_MAX_USERS {
            return Err(Error::EnumerationTooLarge {
                what: "MAP user blocks",
                size: 1u128 << m,
                limit: 1u128 << MAP_MAX_USERS,
            });
        }
        if code.modulus() != FieldModulus::GF3 {
            return Err(Error::ModulusMismatch {
                left: 3,
                right: code.modulus().p(),
            });
        }
        let mut candidates = Vec::with_capacity(1 << m);
        let mut levels = Vec::with_capacity(1 << m);
        for idx in 0..1u64 << m {
            let b = UserBlock::from_index(idx, m);
            let mut r = vec![0.0; code.m()];
            for (j, &bit) in b.bits().iter().enumerate() {
                for (x, &s) in r.iter_mut().zip(code.pair(j).word(bit).as_slice()) {
                    *x += ask3_level(s);
                }
            }
            candidates.push(b);
            levels.push(r);
        }
        Ok(Self { candidates, levels })
    }

    pub fn from_levels(candidates: Vec<UserBlock>, levels: Vec<Vec<f64>>) -> Result<Self> {
        if candidates.len() != levels.len() || candidates.is_empty() {
            return Err(Error::dims("MAP table", candidates.len(), levels.len()));
        }
        Ok(Self { candidates, levels })
    }

    pub fn candidates(&self) -> &[UserBlock] {
        &self.candidates
    }

    pub fn levels(&self, i: usize) -> &[f64] {
        &self.levels[i]
    }

    /// Index of the candidate closest to `y` after scaling levels by `amps`;
    /// ties go to the lowest index.
    pub fn nearest(&self, y: &[f64], amps: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, l) in self.levels.iter().enumerate() {
            let d: f64 = y
                .iter()
                .zip(l)
                .zip(amps)
                .map(|((&yv, &lv), &a)| (yv - a * lv).powi(2))
                .sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// MAP with explicit log-priors per candidate.
    pub fn map_with_prior(&self, y: &[f64], amps: &[f64], n0: f64, log_prior: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, l) in self.levels.iter().enumerate() {
            let d: f64 = y
                .iter()
                .zip(l)
                .zip(amps)
                .map(|((&yv, &lv), &a)| (yv - a * lv).powi(2))
                .sum();
            let score = log_prior[i] - d / n0;
            if score > best.0 {
                best = (score, i);
            }
        }
        best.1
    }
}

/// Minimum-distance (uniform-prior MAP) detection of an overloaded user block.
pub fn map_detect_overload(
    r_block: &RealSignal,
    code: &EpCode,
    amplitude: f64,
) -> Result<UserBlock> {
    if r_block.len() != code.m() {
        return Err(Error::dims("received block", code.m(), r_block.len()));
    }
    let table = MapTable::for_code(code)?;
    let amps = vec![amplitude; code.m()];
    Ok(table.candidates[table.nearest(r_block.samples(), &amps)].clone())
}
