//! Serial and parallel EP encoding, FFSP formation and frame layout.
//!
//! In serial mode every user owns one element pair and sends one bit per data
//! block; M users form a group that spans K consecutive blocks. In parallel
//! mode a user owns K consecutive pairs inside a single block, so M/K users
//! share each block.

use std::fmt;

use crate::epcode::{ElementPair, EpCode};
use crate::error::{Error, Result};
use crate::gf::{FfVector, FieldModulus};

/// One bit from each of M users: `b[k] = (b_{1,k}, …, b_{M,k})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UserBlock(Vec<u8>);

impl UserBlock {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        check_bits(&bits)?;
        Ok(Self(bits))
    }

    /// Bits of `index`, most significant first, over `len` users.
    pub fn from_index(index: u64, len: usize) -> Self {
        Self(
            (0..len)
                .map(|j| ((index >> (len - 1 - j)) & 1) as u8)
                .collect(),
        )
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn complement(&self) -> Self {
        Self(self.0.iter().map(|b| 1 - b).collect())
    }
}

impl fmt::Display for UserBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

fn check_bits(bits: &[u8]) -> Result<()> {
    match bits.iter().find(|&&b| b > 1) {
        Some(&b) => Err(Error::NotABit(b)),
        None => Ok(()),
    }
}

/// An m-tuple finite-field sum pattern.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FfspBlock(pub FfVector);

impl FfspBlock {
    pub fn word(&self) -> &FfVector {
        &self.0
    }
}

/// Concatenated FFSP blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FfspSequence {
    pub blocks: Vec<FfVector>,
}

impl FfspSequence {
    pub fn flatten(&self) -> FfVector {
        FfVector::concat(&self.blocks).expect("uniform modulus")
    }

    pub fn digits(&self) -> Vec<String> {
        self.blocks.iter().map(|b| b.digits()).collect()
    }
}

/// A J×K matrix of user bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: Vec<Vec<u8>>,
}

impl BitMatrix {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        for r in &rows {
            if r.len() != k {
                return Err(Error::dims("bit matrix row", k, r.len()));
            }
            check_bits(r)?;
        }
        Ok(Self { rows })
    }

    pub fn users(&self) -> usize {
        self.rows.len()
    }

    pub fn bits_per_user(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, j: usize) -> &[u8] {
        &self.rows[j]
    }

    pub fn get(&self, j: usize, k: usize) -> u8 {
        self.rows[j][k]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    /// Parse a `J K` header followed by J rows of 0/1 (packed or spaced).
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty bit matrix".into(),
        })?;
        let nums = crate::gf::parse_uints(header, hl)?;
        let [j, k] = nums[..] else {
            return Err(Error::Parse {
                line: hl,
                msg: "expected header `J K`".into(),
            });
        };
        let mut rows = Vec::with_capacity(j as usize);
        for (ln, l) in lines {
            let row: Vec<u8> = l
                .chars()
                .filter(|c| !c.is_whitespace() && *c != ',')
                .map(|c| match c {
                    '0' => Ok(0),
                    '1' => Ok(1),
                    other => Err(Error::Parse {
                        line: ln,
                        msg: format!("not a bit: {other:?}"),
                    }),
                })
                .collect::<Result<_>>()?;
            if row.len() != k as usize {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("expected {k} bits, found {}", row.len()),
                });
            }
            rows.push(row);
        }
        if rows.len() != j as usize {
            return Err(Error::Parse {
                line: hl,
                msg: format!("expected {j} rows, found {}", rows.len()),
            });
        }
        Self::new(rows)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.users(), self.bits_per_user());
        for r in &self.rows {
            s.extend(r.iter().map(|b| char::from(b'0' + b)));
            s.push('\n');
        }
        s
    }
}

/// Binary-to-GF(q) switching function: bit 0 picks the zero word, bit 1 the one word.
pub fn f_b2q(bit: u8, pair: &ElementPair) -> Result<FfVector> {
    if bit > 1 {
        return Err(Error::NotABit(bit));
    }
    Ok(pair.word(bit).clone())
}

/// `w = b·G¹ ⊕ b̄·G⁰`, summing every pair of the code.
pub fn ffsp_of_user_block(block: &UserBlock, code: &EpCode) -> Result<FfspBlock> {
    if block.len() != code.users() {
        return Err(Error::dims("user block", block.len(), code.users()));
    }
    let p = code.modulus();
    let mut acc = vec![0u8; code.m()];
    for (j, &bit) in block.bits().iter().enumerate() {
        add_into(p, &mut acc, code.pair(j).word(bit).as_slice());
    }
    Ok(FfspBlock(FfVector::new(p, acc)?))
}

pub(crate) fn add_into(p: FieldModulus, acc: &mut [u8], word: &[u8]) {
    for (a, &w) in acc.iter_mut().zip(word) {
        *a = p.add(*a, w);
    }
}

/// Output of serial encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SerialEncoding {
    /// Per-user element sequences of length mK.
    pub u: Vec<FfVector>,
    pub w: FfspSequence,
}

/// User j takes pair j and sends one bit per block.
pub fn encode_serial(bits: &BitMatrix, code: &EpCode) -> Result<SerialEncoding> {
    let users = bits.users();
    if users > code.users() {
        return Err(Error::Capacity {
            requested: users,
            bound: code.users(),
            detail: "serial mode serves at most M users per block".into(),
        });
    }
    let p = code.modulus();
    let k = bits.bits_per_user();
    let mut blocks = vec![vec![0u8; code.m()]; k];
    let mut u = Vec::with_capacity(users);
    for j in 0..users {
        let mut seq = Vec::with_capacity(code.m() * k);
        for (kk, block) in blocks.iter_mut().enumerate() {
            let word = f_b2q(bits.get(j, kk), code.pair(j))?;
            add_into(p, block, word.as_slice());
            seq.extend_from_slice(word.as_slice());
        }
        u.push(FfVector::new(p, seq)?);
    }
    let blocks = blocks
        .into_iter()
        .map(|b| FfVector::new(p, b))
        .collect::<Result<_>>()?;
    Ok(SerialEncoding {
        u,
        w: FfspSequence { blocks },
    })
}

/// Output of parallel encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelEncoding {
    /// Per-user m-tuples, each the sum of the user's K switched words.
    pub c: Vec<FfVector>,
    pub w: FfspBlock,
}

/// User j takes pairs `jK..jK+K-1`; all users share one block.
pub fn encode_parallel(bits: &BitMatrix, code: &EpCode) -> Result<ParallelEncoding> {
    let users = bits.users();
    let k = bits.bits_per_user();
    if users * k > code.users() {
        return Err(Error::Capacity {
            requested: users,
            bound: code.users() / k.max(1),
            detail: format!(
                "parallel mode needs J·K ≤ M (K = {k}, M = {})",
                code.users()
            ),
        });
    }
    let p = code.modulus();
    let mut w = vec![0u8; code.m()];
    let mut c = Vec::with_capacity(users);
    for j in 0..users {
        let mut cj = vec![0u8; code.m()];
        for kk in 0..k {
            let word = f_b2q(bits.get(j, kk), code.pair(j * k + kk))?;
            add_into(p, &mut cj, word.as_slice());
        }
        add_into(p, &mut w, &cj);
        c.push(FfVector::new(p, cj)?);
    }
    Ok(ParallelEncoding {
        c,
        w: FfspBlock(FfVector::new(p, w)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderMode {
    Serial,
    Parallel,
}

impl EncoderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EncoderMode::Serial => "serial",
            EncoderMode::Parallel => "parallel",
        }
    }
}

/// Where one user bit lands: data block (0-based) and element pair index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub block: usize,
    pub pair: usize,
}

/// Assignment of J users × K bits to T data blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameLayout {
    pub users_per_code: usize,
    pub m: usize,
    pub blocks: usize,
    pub bits_per_user: usize,
    pub users: usize,
    pub mode: EncoderMode,
    /// `assignment[j][k]` is the slot of user j's k-th bit.
    pub assignment: Vec<Vec<Slot>>,
}

impl FrameLayout {
    /// Maximum number of users the frame can carry in the given mode.
    pub fn capacity(
        users_per_code: usize,
        blocks: usize,
        bits_per_user: usize,
        mode: EncoderMode,
    ) -> usize {
        match mode {
            EncoderMode::Serial => users_per_code * (blocks / bits_per_user),
            EncoderMode::Parallel => (users_per_code / bits_per_user) * blocks,
        }
    }

    /// Users (with their bit index and pair) occupying block `t`.
    pub fn occupants(&self, t: usize) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (j, slots) in self.assignment.iter().enumerate() {
            for (k, s) in slots.iter().enumerate() {
                if s.block == t {
                    out.push((j, k, s.pair));
                }
            }
        }
        out
    }

    /// Blocks touched by user j, ascending.
    pub fn user_blocks(&self, j: usize) -> Vec<usize> {
        let mut b: Vec<usize> = self.assignment[j].iter().map(|s| s.block).collect();
        b.sort_unstable();
        b.dedup();
        b
    }

    pub fn info_len(&self) -> usize {
        self.m * self.blocks
    }
}

/// Lay out J users with K bits each over T blocks of an M×m EP code.
pub fn plan_frame(
    users_per_code: usize,
    m: usize,
    blocks: usize,
    bits_per_user: usize,
    users: usize,
    mode: EncoderMode,
) -> Result<FrameLayout> {
    if users_per_code == 0 || m == 0 || blocks == 0 || bits_per_user == 0 || users == 0 {
        return Err(Error::InvalidCode(
            "frame parameters must be positive".into(),
        ));
    }
    match mode {
        EncoderMode::Serial if bits_per_user > blocks => {
            return Err(Error::InvalidCode(format!(
                "serial mode needs K ≤ T (K = {bits_per_user}, T = {blocks})"
            )))
        }
        EncoderMode::Parallel if bits_per_user > users_per_code => {
            return Err(Error::InvalidCode(format!(
                "parallel mode needs K ≤ M (K = {bits_per_user}, M = {users_per_code})"
            )))
        }
        _ => {}
    }
    let bound = FrameLayout::capacity(users_per_code, blocks, bits_per_user, mode);
    if users > bound {
        return Err(Error::Capacity {
            requested: users,
            bound,
            detail: format!(
                "J ≤ M·T/K with M = {users_per_code}, T = {blocks}, K = {bits_per_user}, {} mode",
                mode.as_str()
            ),
        });
    }
    let assignment = (0..users)
        .map(|j| match mode {
            EncoderMode::Serial => {
                let group = j / users_per_code;
                let pair = j % users_per_code;
                (0..bits_per_user)
                    .map(|k| Slot {
                        block: group * bits_per_user + k,
                        pair,
                    })
                    .collect()
            }
            EncoderMode::Parallel => {
                let per_block = users_per_code / bits_per_user;
                let block = j / per_block;
                let first = (j % per_block) * bits_per_user;
                (0..bits_per_user)
                    .map(|k| Slot {
                        block,
                        pair: first + k,
                    })
                    .collect()
            }
        })
        .collect();
    Ok(FrameLayout {
        users_per_code,
        m,
        blocks,
        bits_per_user,
        users,
        mode,
        assignment,
    })
}

/// Finite-field view of one frame before channel coding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameEncoding {
    /// Per-user information sequences of length mT, zero outside the user's blocks.
    pub placed: Vec<FfVector>,
    /// FFSP sequence: blockwise sum of all placed sequences.
    pub w: FfVector,
}

pub fn encode_frame(
    layout: &FrameLayout,
    code: &EpCode,
    bits: &BitMatrix,
) -> Result<FrameEncoding> {
    if bits.users() != layout.users || bits.bits_per_user() != layout.bits_per_user {
        return Err(Error::dims(
            "frame bits",
            format!("{}x{}", layout.users, layout.bits_per_user),
            format!("{}x{}", bits.users(), bits.bits_per_user()),
        ));
    }
    if code.users() != layout.users_per_code || code.m() != layout.m {
        return Err(Error::dims(
            "frame code",
            format!("{}x{}", layout.users_per_code, layout.m),
            format!("{}x{}", code.users(), code.m()),
        ));
    }
    let p = code.modulus();
    let m = code.m();
    let len = layout.info_len();
    let mut w = vec![0u8; len];
    let mut placed = Vec::with_capacity(layout.users);
    for (j, slots) in layout.assignment.iter().enumerate() {
        let mut seq = vec![0u8; len];
        for (k, s) in slots.iter().enumerate() {
            let word = f_b2q(bits.get(j, k), code.pair(s.pair))?;
            add_into(p, &mut seq[s.block * m..(s.block + 1) * m], word.as_slice());
        }
        add_into(p, &mut w, &seq);
        placed.push(FfVector::new(p, seq)?);
    }
    Ok(FrameEncoding {
        placed,
        w: FfVector::new(p, w)?,
    })
}
