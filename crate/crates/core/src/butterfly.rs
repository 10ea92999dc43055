//! Network FFMA over the 3-dimensional butterfly network.
//!
//! Three sources each send one bit. The relay forwards the finite-field sum
//! `w` of their EP symbols, and destination j combines `w` with the symbol
//! `u_j` it hears directly from source j.

use std::fmt;
use std::str::FromStr;

use crate::encoder::f_b2q;
use crate::epcode::{ai_cwep_from_matrix, ternary_nonorthogonal_3x2, ElementPair};
use crate::error::{Error, Result};
use crate::gf::{FfVector, FieldModulus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NetworkCodeKind {
    /// Non-orthogonal codeword EPs over GF(3²).
    NoCwepGf9,
    /// Symbol-wise additive-inverse EPs over GF(7).
    AiepGf7,
}

impl NetworkCodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkCodeKind::NoCwepGf9 => "gf9",
            NetworkCodeKind::AiepGf7 => "gf7",
        }
    }
}

impl fmt::Display for NetworkCodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NetworkCodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gf9" => Ok(NetworkCodeKind::NoCwepGf9),
            "gf7" => Ok(NetworkCodeKind::AiepGf7),
            other => Err(Error::config(
                "code",
                format!("unknown butterfly code `{other}` (expected gf9 or gf7)"),
            )),
        }
    }
}

/// Three element pairs whose words are additive inverses of each other.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverloadNetworkCode {
    kind: NetworkCodeKind,
    pairs: [ElementPair; 3],
}

impl OverloadNetworkCode {
    pub fn new(kind: NetworkCodeKind) -> Self {
        let pairs = match kind {
            NetworkCodeKind::NoCwepGf9 => {
                let code = ai_cwep_from_matrix(&ternary_nonorthogonal_3x2()).expect("static code");
                [
                    code.pair(0).clone(),
                    code.pair(1).clone(),
                    code.pair(2).clone(),
                ]
            }
            // Bit 0 ↦ 1, 2, 4 and bit 1 ↦ 6, 5, 3.
            NetworkCodeKind::AiepGf7 => [(1, 6), (2, 5), (4, 3)].map(|(z, o)| {
                let s = |v| FfVector::new(FieldModulus::GF7, vec![v]).expect("static element");
                ElementPair::new(s(z), s(o)).expect("distinct elements")
            }),
        };
        Self { kind, pairs }
    }

    pub fn kind(&self) -> NetworkCodeKind {
        self.kind
    }

    pub fn pairs(&self) -> &[ElementPair; 3] {
        &self.pairs
    }

    pub fn modulus(&self) -> FieldModulus {
        self.pairs[0].zero_word().modulus()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ButterflyEncoding {
    pub u: [FfVector; 3],
    pub w: FfVector,
}

pub fn butterfly_encode(bits: [u8; 3], code: &OverloadNetworkCode) -> Result<ButterflyEncoding> {
    let u = [
        f_b2q(bits[0], &code.pairs[0])?,
        f_b2q(bits[1], &code.pairs[1])?,
        f_b2q(bits[2], &code.pairs[2])?,
    ];
    let w = u[0].add(&u[1])?.add(&u[2])?;
    Ok(ButterflyEncoding { u, w })
}

fn message(idx: u8) -> [u8; 3] {
    [(idx >> 2) & 1, (idx >> 1) & 1, idx & 1]
}

/// Messages consistent with `u_j` at destination `dest` (1-based) and relay sum `w`.
pub fn consistent_messages(
    dest: usize,
    u_j: &FfVector,
    w: &FfVector,
    code: &OverloadNetworkCode,
) -> Result<Vec<[u8; 3]>> {
    if !(1..=3).contains(&dest) {
        return Err(Error::IndexOutOfRange {
            what: "destination",
            index: dest,
            max: 3,
        });
    }
    let mut out = Vec::new();
    for idx in 0..8 {
        let b = message(idx);
        let enc = butterfly_encode(b, code)?;
        if &enc.u[dest - 1] == u_j && &enc.w == w {
            out.push(b);
        }
    }
    Ok(out)
}

/// Recover the 3-bit message at destination `dest` (1-based).
pub fn destination_decode(
    dest: usize,
    u_j: &FfVector,
    w: &FfVector,
    code: &OverloadNetworkCode,
) -> Result<[u8; 3]> {
    match consistent_messages(dest, u_j, w, code)?.as_slice() {
        [only] => Ok(*only),
        other => Err(Error::Butterfly {
            dest,
            count: other.len(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ButterflyTrace {
    pub message: [u8; 3],
    pub u: [FfVector; 3],
    pub w: FfVector,
    pub decodes: [[u8; 3]; 3],
}

/// Encode and decode all eight messages at all three destinations.
pub fn trace(code: &OverloadNetworkCode) -> Result<Vec<ButterflyTrace>> {
    (0..8)
        .map(|idx| {
            let b = message(idx);
            let enc = butterfly_encode(b, code)?;
            let mut decodes = [[0; 3]; 3];
            for (j, d) in decodes.iter_mut().enumerate() {
                *d = destination_decode(j + 1, &enc.u[j], &enc.w, code)?;
            }
            Ok(ButterflyTrace {
                message: b,
                u: enc.u,
                w: enc.w,
                decodes,
            })
        })
        .collect()
}

/// Plain-text trace table, one message per line.
pub fn trace_table(code: &OverloadNetworkCode) -> Result<String> {
    let bits = |b: &[u8; 3]| b.iter().map(|x| char::from(b'0' + x)).collect::<String>();
    let mut s = format!(
        "# butterfly {} ({}^{})\n",
        code.kind,
        code.modulus(),
        code.pairs[0].zero_word().len()
    );
    s += "message u1 u2 u3 w d1 d2 d3 ok\n";
    for t in trace(code)? {
        let ok = t.decodes.iter().all(|d| *d == t.message);
        s += &format!(
            "{} {} {} {} {} {} {} {} {}\n",
            bits(&t.message),
            t.u[0].digits(),
            t.u[1].digits(),
            t.u[2].digits(),
            t.w.digits(),
            bits(&t.decodes[0]),
            bits(&t.decodes[1]),
            bits(&t.decodes[2]),
            if ok { "yes" } else { "no" }
        );
    }
    Ok(s)
}
