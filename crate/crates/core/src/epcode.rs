//! Element-pair (EP) codes: construction, classification and USPM validation.
//!
//! An M-user EP code over GF(p^m) is a list of M element pairs, each pair
//! holding the m-tuple sent for bit 0 and the m-tuple sent for bit 1. The two
//! M×m matrices stacking those words are the full-zero and full-one
//! generator matrices.
//!
//! The family is read off the structure of the generators:
//!
//! * full-zero matrix identically zero: single-codeword EP (S-CWEP) over GF(2);
//!   the identity full-one matrix is tagged as the orthogonal UD-EP.
//! * full-zero ⊕ full-one ≡ 0 mod 3: additive-inverse codeword EP. Mutually
//!   orthogonal rows make it an AI-CWEP, anything else a non-orthogonal NO-CWEP.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::gf::{self, FfMatrix, FfVector, FieldModulus};

/// The pair of m-tuples a user sends for bit 0 and bit 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ElementPair {
    zero_word: FfVector,
    one_word: FfVector,
}

impl ElementPair {
    pub fn new(zero_word: FfVector, one_word: FfVector) -> Result<Self> {
        if zero_word.modulus() != one_word.modulus() {
            return Err(Error::ModulusMismatch {
                left: zero_word.modulus().p(),
                right: one_word.modulus().p(),
            });
        }
        if zero_word.len() != one_word.len() {
            return Err(Error::dims("element pair", zero_word.len(), one_word.len()));
        }
        if zero_word == one_word {
            return Err(Error::InvalidPair(format!(
                "both words equal {}",
                zero_word.digits()
            )));
        }
        Ok(Self {
            zero_word,
            one_word,
        })
    }

    pub fn zero_word(&self) -> &FfVector {
        &self.zero_word
    }

    pub fn one_word(&self) -> &FfVector {
        &self.one_word
    }

    /// Word selected by `bit`.
    pub fn word(&self, bit: u8) -> &FfVector {
        if bit == 0 {
            &self.zero_word
        } else {
            &self.one_word
        }
    }
}

impl fmt::Display for ElementPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {})",
            self.zero_word.digits(),
            self.one_word.digits()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Zero word paired with a codeword, over GF(2^m).
    SCwep,
    /// S-CWEP whose full-one generator is the identity.
    OrthoUdep,
    /// Additive-inverse pairs with mutually orthogonal rows, over GF(3^m).
    AiCwep,
    /// Additive-inverse pairs without row orthogonality (overload codes).
    NoCwep,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::SCwep => "S-CWEP",
            Family::OrthoUdep => "ORTHO-UDEP",
            Family::AiCwep => "AI-CWEP",
            Family::NoCwep => "NO-CWEP",
        }
    }

    /// S-CWEP and its orthogonal special case share every code path.
    pub fn is_single_codeword(self) -> bool {
        matches!(self, Family::SCwep | Family::OrthoUdep)
    }

    pub fn is_additive_inverse(self) -> bool {
        matches!(self, Family::AiCwep | Family::NoCwep)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S-CWEP" => Ok(Family::SCwep),
            "ORTHO-UDEP" => Ok(Family::OrthoUdep),
            "AI-CWEP" => Ok(Family::AiCwep),
            "NO-CWEP" => Ok(Family::NoCwep),
            other => Err(Error::Parse {
                line: 1,
                msg: format!("unknown family {other:?}"),
            }),
        }
    }
}

/// An M-user EP code over GF(p^m).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpCode {
    pairs: Vec<ElementPair>,
    g_zero: FfMatrix,
    g_one: FfMatrix,
    family: Family,
}

impl EpCode {
    /// Build from the two generator matrices, inferring the family.
    pub fn from_generators(g_zero: FfMatrix, g_one: FfMatrix) -> Result<Self> {
        let p = g_one.modulus();
        if g_zero.modulus() != p {
            return Err(Error::ModulusMismatch {
                left: g_zero.modulus().p(),
                right: p.p(),
            });
        }
        if g_zero.rows() != g_one.rows() || g_zero.cols() != g_one.cols() {
            return Err(Error::dims(
                "generator pair",
                format!("{}x{}", g_zero.rows(), g_zero.cols()),
                format!("{}x{}", g_one.rows(), g_one.cols()),
            ));
        }
        if g_one.rows() == 0 || g_one.cols() == 0 {
            return Err(Error::InvalidCode("empty generator matrix".into()));
        }
        let family = if g_zero.is_zero() {
            if p != FieldModulus::GF2 {
                return Err(Error::InvalidCode(format!(
                    "zero full-zero generator over {p}; single-codeword pairs live in GF(2^m)"
                )));
            }
            if g_one.is_identity() {
                Family::OrthoUdep
            } else {
                Family::SCwep
            }
        } else if p == FieldModulus::GF3 && g_zero.add(&g_one)?.is_zero() {
            if rows_mutually_orthogonal(&g_one) {
                Family::AiCwep
            } else {
                Family::NoCwep
            }
        } else {
            return Err(Error::InvalidCode(
                "generators are neither single-codeword nor additive-inverse".into(),
            ));
        };
        let pairs = (0..g_one.rows())
            .map(|j| ElementPair::new(g_zero.row(j), g_one.row(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            pairs,
            g_zero,
            g_one,
            family,
        })
    }

    pub fn modulus(&self) -> FieldModulus {
        self.g_one.modulus()
    }

    /// Tuple length m.
    pub fn m(&self) -> usize {
        self.g_one.cols()
    }

    /// Number of element pairs M.
    pub fn users(&self) -> usize {
        self.g_one.rows()
    }

    pub fn pairs(&self) -> &[ElementPair] {
        &self.pairs
    }

    pub fn pair(&self, j: usize) -> &ElementPair {
        &self.pairs[j]
    }

    pub fn g_zero(&self) -> &FfMatrix {
        &self.g_zero
    }

    pub fn g_one(&self) -> &FfMatrix {
        &self.g_one
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// `row_j · row_j mod p` of the full-one generator.
    pub fn self_correlation(&self, j: usize) -> u8 {
        let row = self.g_one.row(j);
        gf::dot(&row, &row).expect("row conforms with itself")
    }

    /// Export as `family p m M` followed by both generators in matrix text form.
    pub fn to_text(&self) -> String {
        format!(
            "{} {} {} {}\n{}{}",
            self.family,
            self.modulus().p(),
            self.m(),
            self.users(),
            self.g_zero.to_text(),
            self.g_one.to_text()
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty codebook".into(),
        })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        let [fam, p, m, users] = toks[..] else {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected `family p m M`, got {header:?}"),
            });
        };
        let family: Family = fam.parse()?;
        let nums = gf::parse_uints(&format!("{p} {m} {users}"), 1)?;
        let (rows, cols) = (nums[2] as usize, nums[1] as usize);
        let body: Vec<&str> = lines.collect();
        // Each generator block is a header plus `rows` lines.
        let per = rows + 1;
        if body.iter().filter(|l| !l.trim().is_empty()).count() < 2 * per {
            return Err(Error::Parse {
                line: 2,
                msg: "codebook body must hold two generator matrices".into(),
            });
        }
        let nonempty: Vec<&str> = body.into_iter().filter(|l| !l.trim().is_empty()).collect();
        let g_zero = FfMatrix::parse(&nonempty[..per].join("\n"))?;
        let g_one = FfMatrix::parse(&nonempty[per..2 * per].join("\n"))?;
        if g_one.modulus().p() as u32 != nums[0] || g_one.rows() != rows || g_one.cols() != cols {
            return Err(Error::Parse {
                line: 1,
                msg: "header disagrees with generator dimensions".into(),
            });
        }
        let code = Self::from_generators(g_zero, g_one)?;
        if code.family != family {
            return Err(Error::InvalidCode(format!(
                "header declares {family}, generators are {}",
                code.family
            )));
        }
        Ok(code)
    }
}

/// Rows pairwise orthogonal with nonzero self-correlation.
fn rows_mutually_orthogonal(t: &FfMatrix) -> bool {
    let gram = gf::mat_mul(t, &t.transpose()).expect("conformable");
    (0..gram.rows()).all(|i| {
        (0..gram.cols()).all(|j| {
            if i == j {
                gram.get(i, j) != 0
            } else {
                gram.get(i, j) == 0
            }
        })
    })
}

/// S-CWEP code with `g` as full-one generator.
pub fn scwep_from_generator(g: &FfMatrix) -> Result<EpCode> {
    if g.modulus() != FieldModulus::GF2 {
        return Err(Error::InvalidCode(format!(
            "single-codeword generator must be over GF(2), got {}",
            g.modulus()
        )));
    }
    EpCode::from_generators(FfMatrix::zeros(g.modulus(), g.rows(), g.cols()), g.clone())
}

/// κ-fold Kronecker power of `[[1,1],[2,1]]` over GF(3).
pub fn ternary_orthogonal(kappa: u32) -> Result<FfMatrix> {
    if kappa == 0 {
        return Err(Error::InvalidCode("kappa must be at least 1".into()));
    }
    let base = FfMatrix::from_digit_rows(FieldModulus::GF3, &["11", "21"])?;
    let mut t = base.clone();
    for _ in 1..kappa {
        t = gf::kronecker(&base, &t)?;
    }
    Ok(t)
}

/// Additive-inverse code: pair j is `(2·t_j, t_j)`.
pub fn ai_cwep_from_matrix(t: &FfMatrix) -> Result<EpCode> {
    if t.modulus() != FieldModulus::GF3 {
        return Err(Error::InvalidCode(format!(
            "additive-inverse generator must be over GF(3), got {}",
            t.modulus()
        )));
    }
    EpCode::from_generators(t.scale(2), t.clone())
}

/// The 3×2 overload matrix with rows (1,1), (2,1), (0,1).
pub fn ternary_nonorthogonal_3x2() -> FfMatrix {
    FfMatrix::from_digit_rows(FieldModulus::GF3, &["11", "21", "01"]).expect("static matrix")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UspmVerdict {
    Unique,
    Ambiguous,
}

/// Unique sum-pattern mapping holds iff the full-one generator has full row rank.
pub fn check_uspm(code: &EpCode) -> UspmVerdict {
    if gf::rank(code.g_one()) == code.users() {
        UspmVerdict::Unique
    } else {
        UspmVerdict::Ambiguous
    }
}

/// Largest M for which the exhaustive injectivity check runs.
pub const EXHAUSTIVE_USPM_MAX_USERS: usize = 12;

/// Exhaustive check that every user block yields a distinct FFSP block.
pub fn ffsp_map_is_injective(code: &EpCode) -> Result<bool> {
    let users = code.users();
    if users > EXHAUSTIVE_USPM_MAX_USERS {
        return Err(Error::EnumerationTooLarge {
            what: "USPM injectivity check",
            size: 1u128 << users,
            limit: 1u128 << EXHAUSTIVE_USPM_MAX_USERS,
        });
    }
    let mut seen = HashSet::with_capacity(1 << users);
    let p = code.modulus();
    for mask in 0u32..(1 << users) {
        let mut acc = vec![0u8; code.m()];
        for j in 0..users {
            let bit = ((mask >> j) & 1) as u8;
            for (a, &w) in acc.iter_mut().zip(code.pair(j).word(bit).as_slice()) {
                *a = p.add(*a, w);
            }
        }
        if !seen.insert(acc) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// η = M/m, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct LoadingFactor(Ratio<usize>);

impl LoadingFactor {
    pub fn new(users: usize, dims: usize) -> Self {
        assert!(
            users > 0 && dims > 0,
            "loading factor needs positive M and m"
        );
        Self(Ratio::new(users, dims))
    }

    pub fn ratio(&self) -> Ratio<usize> {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl fmt::Display for LoadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn loading_factor(code: &EpCode) -> LoadingFactor {
    LoadingFactor::new(code.users(), code.m())
}

/// Multiple-access regime implied by the loading factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessRegime {
    /// η < 1: error-correcting EP codes.
    FfCcma,
    /// η = 1: FF-TDMA or FF-CDMA.
    Orthogonal,
    /// η > 1: overload codes.
    FfNoma,
}

pub fn classify_mode(code: &EpCode) -> AccessRegime {
    classify_eta(loading_factor(code))
}

pub fn classify_eta(eta: LoadingFactor) -> AccessRegime {
    let one = Ratio::from_integer(1);
    match eta.ratio().cmp(&one) {
        std::cmp::Ordering::Less => AccessRegime::FfCcma,
        std::cmp::Ordering::Equal => AccessRegime::Orthogonal,
        std::cmp::Ordering::Greater => AccessRegime::FfNoma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_code::example_generator_16_12;

    fn four_user_scwep() -> EpCode {
        let g = FfMatrix::from_digit_rows(
            FieldModulus::GF2,
            &["11111111", "00001111", "00110011", "01010101"],
        )
        .unwrap();
        scwep_from_generator(&g).unwrap()
    }

    #[test]
    fn pairs_from_ldpc_generator() {
        let code = scwep_from_generator(&example_generator_16_12(FieldModulus::GF2)).unwrap();
        let expected = [
            "1000000000001000",
            "0100000000000100",
            "0010000000000010",
            "0001000000000001",
            "0000100000000001",
            "0000010000001000",
            "0000001000000100",
            "0000000100000010",
            "0000000010000010",
            "0000000001000001",
            "0000000000101000",
            "0000000000010100",
        ];
        assert_eq!(code.users(), 12);
        assert_eq!(code.family(), Family::SCwep);
        for (pair, want) in code.pairs().iter().zip(expected) {
            assert!(pair.zero_word().is_zero());
            assert_eq!(pair.one_word().digits(), want);
        }
        assert_eq!(loading_factor(&code).as_f64(), 0.75);
        assert_eq!(classify_mode(&code), AccessRegime::FfCcma);
    }

    #[test]
    fn identity_gives_orthogonal_udep() {
        let code = scwep_from_generator(&FfMatrix::identity(FieldModulus::GF2, 4)).unwrap();
        assert_eq!(code.family(), Family::OrthoUdep);
        assert!(code.family().is_single_codeword());
        assert_eq!(check_uspm(&code), UspmVerdict::Unique);
        assert_eq!(classify_mode(&code), AccessRegime::Orthogonal);
    }

    #[test]
    fn four_user_scwep_pairs() {
        let code = four_user_scwep();
        let ones: Vec<String> = code.pairs().iter().map(|p| p.one_word().digits()).collect();
        assert_eq!(ones, ["11111111", "00001111", "00110011", "01010101"]);
        assert_eq!(check_uspm(&code), UspmVerdict::Unique);
    }

    #[test]
    fn ternary_orthogonal_displays() {
        assert_eq!(
            ternary_orthogonal(1).unwrap(),
            FfMatrix::from_digit_rows(FieldModulus::GF3, &["11", "21"]).unwrap()
        );
        assert_eq!(
            ternary_orthogonal(2).unwrap(),
            FfMatrix::from_digit_rows(FieldModulus::GF3, &["1111", "2121", "2211", "1221"])
                .unwrap()
        );
        let t8 = ternary_orthogonal(3).unwrap();
        assert_eq!(t8.row(4).digits(), "22221111");
        assert_eq!(t8.row(7).digits(), "21121221");
        assert!(ternary_orthogonal(0).is_err());
    }

    #[test]
    fn orthogonal_ternary_pairs() {
        let code = ai_cwep_from_matrix(&ternary_orthogonal(2).unwrap()).unwrap();
        let got: Vec<String> = code.pairs().iter().map(|p| p.to_string()).collect();
        assert_eq!(
            got,
            [
                "(2222, 1111)",
                "(1212, 2121)",
                "(1122, 2211)",
                "(2112, 1221)"
            ]
        );
        assert_eq!(code.family(), Family::AiCwep);
        assert_eq!(check_uspm(&code), UspmVerdict::Unique);
        assert_eq!(loading_factor(&code).to_string(), "1");
        assert!(code.g_zero().add(code.g_one()).unwrap().is_zero());
    }

    #[test]
    fn nonorthogonal_overload_code() {
        let t = ternary_nonorthogonal_3x2();
        assert_eq!(t.row(2).digits(), "01");
        assert_eq!(
            t.scale(2),
            FfMatrix::from_digit_rows(FieldModulus::GF3, &["22", "12", "02"]).unwrap()
        );
        assert_eq!(gf::rank(&t), 2);
        let code = ai_cwep_from_matrix(&t).unwrap();
        let got: Vec<String> = code.pairs().iter().map(|p| p.to_string()).collect();
        assert_eq!(got, ["(22, 11)", "(12, 21)", "(02, 01)"]);
        assert_eq!(code.family(), Family::NoCwep);
        assert_eq!(check_uspm(&code), UspmVerdict::Ambiguous);
        assert!(!ffsp_map_is_injective(&code).unwrap());
        assert_eq!(loading_factor(&code).as_f64(), 1.5);
        assert_eq!(classify_mode(&code), AccessRegime::FfNoma);
    }

    #[test]
    fn property2_correlations() {
        for kappa in 1..=6 {
            let t = ternary_orthogonal(kappa).unwrap();
            let n = t.rows();
            let gram = gf::mat_mul(&t, &t.transpose()).unwrap();
            let id = FfMatrix::identity(FieldModulus::GF3, n);
            let two = id.scale(2);
            assert!(gram == id || gram == two, "kappa {kappa}");
            let cross = gf::mat_mul(&t, &t.scale(2).transpose()).unwrap();
            if gram == id {
                assert_eq!(cross, two);
            } else {
                assert_eq!(cross, id);
            }
        }
    }

    #[test]
    fn rejects_invalid_constructions() {
        let p = FieldModulus::GF2;
        let with_zero_row = FfMatrix::from_digit_rows(p, &["10", "00"]).unwrap();
        assert!(matches!(
            scwep_from_generator(&with_zero_row),
            Err(Error::InvalidPair(_))
        ));
        assert!(scwep_from_generator(&ternary_orthogonal(1).unwrap()).is_err());
        let t = ternary_orthogonal(1).unwrap();
        // Mixed: neither zero nor additive inverse.
        assert!(matches!(
            EpCode::from_generators(t.clone(), t),
            Err(Error::InvalidCode(_))
        ));
    }

    #[test]
    fn codebook_text_roundtrip() {
        let code = ai_cwep_from_matrix(&ternary_nonorthogonal_3x2()).unwrap();
        let text = code.to_text();
        assert!(text.starts_with("NO-CWEP 3 2 3\n"));
        assert_eq!(EpCode::parse(&text).unwrap(), code);
        let bad = text.replacen("NO-CWEP", "AI-CWEP", 1);
        assert!(EpCode::parse(&bad).is_err());
    }

    #[test]
    fn rank_verdict_matches_enumeration_on_random_codes() {
        // Small LCG so the test does not depend on an RNG crate.
        let mut s: u64 = 0x5eed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 33) as u32
        };
        let mut checked = 0;
        while checked < 200 {
            let p = if next() % 2 == 0 {
                FieldModulus::GF2
            } else {
                FieldModulus::GF3
            };
            let users = 1 + (next() % 8) as usize;
            let m = 1 + (next() % 6) as usize;
            let entries: Vec<u8> = (0..users * m)
                .map(|_| (next() % p.p() as u32) as u8)
                .collect();
            let g = FfMatrix::new(p, users, m, entries).unwrap();
            let code = if p == FieldModulus::GF2 {
                scwep_from_generator(&g)
            } else {
                ai_cwep_from_matrix(&g)
            };
            let Ok(code) = code else { continue };
            let unique = check_uspm(&code) == UspmVerdict::Unique;
            assert_eq!(unique, ffsp_map_is_injective(&code).unwrap(), "{g}");
            checked += 1;
        }
    }
}
