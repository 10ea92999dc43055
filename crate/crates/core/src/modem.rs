//! Finite-field to real transforms, power allocation and the Gaussian
//! multiple-access channel.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gf::{FfMatrix, FfVector, FieldModulus};

/// Real baseband samples, one per field symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSignal(Vec<f64>);

impl RealSignal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidPower(format!("non-finite sample {bad}")));
        }
        Ok(Self(samples))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }

    pub fn slice(&self, start: usize, len: usize) -> RealSignal {
        Self(self.0[start..start + len].to_vec())
    }
}

/// 3ASK level of a GF(3) symbol: 1 ↦ +1, 0 ↦ 0, 2 ↦ −1.
pub fn ask3_level(symbol: u8) -> f64 {
    match symbol {
        1 => 1.0,
        2 => -1.0,
        _ => 0.0,
    }
}

pub fn f_f2c_3ask(v: &FfVector) -> Result<RealSignal> {
    require_modulus(v.modulus(), FieldModulus::GF3)?;
    Ok(RealSignal(
        v.as_slice().iter().map(|&s| ask3_level(s)).collect(),
    ))
}

/// BPSK over the GF(3) alphabet {1, 2}: 1 ↦ +1, 2 ↦ −1.
pub fn f_f2c_bpsk(v: &FfVector) -> Result<RealSignal> {
    require_modulus(v.modulus(), FieldModulus::GF3)?;
    if let Some(&z) = v.as_slice().iter().find(|&&s| s == 0) {
        return Err(Error::ZeroSymbol(z));
    }
    Ok(RealSignal(
        v.as_slice().iter().map(|&s| ask3_level(s)).collect(),
    ))
}

/// Row-wise BPSK image of a ternary matrix.
pub fn f_f2c_bpsk_matrix(t: &FfMatrix) -> Result<Vec<Vec<f64>>> {
    t.row_vectors()
        .iter()
        .map(|r| f_f2c_bpsk(r).map(RealSignal::into_samples))
        .collect()
}

/// Binary BPSK restricted to `active` positions: 1 ↦ +1, 0 ↦ −1, silent elsewhere.
pub fn f_f2c_bpsk_binary(v: &FfVector, active: &[bool]) -> Result<RealSignal> {
    require_modulus(v.modulus(), FieldModulus::GF2)?;
    if active.len() != v.len() {
        return Err(Error::dims("activity mask", v.len(), active.len()));
    }
    Ok(RealSignal(
        v.as_slice()
            .iter()
            .zip(active)
            .map(|(&s, &a)| if a { 2.0 * s as f64 - 1.0 } else { 0.0 })
            .collect(),
    ))
}

fn require_modulus(got: FieldModulus, want: FieldModulus) -> Result<()> {
    if got != want {
        return Err(Error::ModulusMismatch {
            left: want.p(),
            right: got.p(),
        });
    }
    Ok(())
}

/// Regular power-allocation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PavMode {
    Td,
    CcMipParallel,
    CcMipSerial,
    CcMbipParallel,
    CcMbipSerial,
}

impl PavMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PavMode::Td => "td",
            PavMode::CcMipParallel => "cc_mip_parallel",
            PavMode::CcMipSerial => "cc_mip_serial",
            PavMode::CcMbipParallel => "cc_mbip_parallel",
            PavMode::CcMbipSerial => "cc_mbip_serial",
        }
    }

    fn coded(self) -> bool {
        self != PavMode::Td
    }

    fn serial(self) -> bool {
        matches!(self, PavMode::CcMipSerial | PavMode::CcMbipSerial)
    }
}

impl fmt::Display for PavMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PavMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "td" => PavMode::Td,
            "cc_mip_parallel" => PavMode::CcMipParallel,
            "cc_mip_serial" => PavMode::CcMipSerial,
            "cc_mbip_parallel" => PavMode::CcMbipParallel,
            "cc_mbip_serial" => PavMode::CcMbipSerial,
            other => return Err(Error::InvalidPower(format!("unknown PAV mode `{other}`"))),
        })
    }
}

/// Dimensions entering the regular allocation formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PavParams {
    /// M, users (pairs) per EP code.
    pub users: usize,
    /// K, bits per user.
    pub bits: usize,
    /// Q = m − M, multiuser parity symbols per block.
    pub q: usize,
    pub m: usize,
    /// K_gc = mT.
    pub k_gc: usize,
    /// N, channel code length (equal to K_gc when uncoded).
    pub n: usize,
}

/// `(μ1, μ2)` or `(μ1, μ2, μc)` in regular form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularPav {
    pub mu1: f64,
    pub mu2: f64,
    pub mu_c: Option<f64>,
}

impl RegularPav {
    /// Power-allocation scaling factor μ1/μ2.
    pub fn pas(&self) -> f64 {
        self.mu1 / self.mu2
    }
}

/// Regular PAV for `mode`, rescaled so the power constraint holds exactly.
pub fn pav_regular(mode: PavMode, params: PavParams) -> Result<RegularPav> {
    let PavParams {
        users,
        bits,
        q,
        m,
        k_gc,
        n,
    } = params;
    if users == 0 || bits == 0 || m == 0 {
        return Err(Error::InvalidPower("M, K and m must be positive".into()));
    }
    if bits > users && !mode.serial() {
        return Err(Error::InvalidPower(format!(
            "K = {bits} exceeds M = {users}"
        )));
    }
    if mode.coded() && (k_gc == 0 || n < k_gc) {
        return Err(Error::InvalidPower(format!(
            "need 0 < K_gc ≤ N (K_gc = {k_gc}, N = {n})"
        )));
    }
    let (mf, kf, qf, mmf, kgc) = (users as f64, bits as f64, q as f64, m as f64, k_gc as f64);
    let (mu1, mu2, mu_c) = match mode {
        PavMode::Td => (mf / kf, 1.0, None),
        PavMode::CcMipParallel => ((kgc - qf) / kf, 1.0, Some(1.0)),
        PavMode::CcMipSerial => ((kgc - kf * qf) / kf, 1.0, Some(1.0)),
        PavMode::CcMbipParallel => (mf * kgc / (kf * mmf), kgc / mmf, Some(1.0)),
        PavMode::CcMbipSerial => (mf * kgc / (kf * mmf), kgc / (kf * mmf), Some(1.0)),
    };
    if mu1 <= 0.0 || mu2 <= 0.0 {
        return Err(Error::InvalidPower(format!(
            "{mode} allocation is nonpositive (μ1 = {mu1}, μ2 = {mu2})"
        )));
    }
    let parity_symbols = if mode.serial() { kf * qf } else { qf };
    let r = (n - k_gc.min(n)) as f64;
    let (total, target) = match mu_c {
        None => (kf * mu1 + qf * mu2, mmf),
        Some(c) => (kf * mu1 + parity_symbols * mu2 + r * c, n as f64),
    };
    let factor = target / total;
    if (factor - 1.0).abs() > 1e-12 {
        log::info!("{mode}: rescaling regular PAV by {factor} to meet the power constraint");
    }
    Ok(RegularPav {
        mu1: mu1 * factor,
        mu2: mu2 * factor,
        mu_c: mu_c.map(|c| c * factor),
    })
}

/// Symbol-level power allocation `μ` with average power `P_avg`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pav {
    mu: Vec<f64>,
    p_avg: f64,
}

impl Pav {
    pub fn new(mu: Vec<f64>, p_avg: f64) -> Result<Self> {
        if !(p_avg > 0.0 && p_avg.is_finite()) {
            return Err(Error::InvalidPower(format!(
                "P_avg must be positive, got {p_avg}"
            )));
        }
        if let Some(bad) = mu.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidPower(format!(
                "μ entries must be finite and ≥ 0, got {bad}"
            )));
        }
        Ok(Self { mu, p_avg })
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            mu: vec![1.0; len],
            p_avg: 1.0,
        }
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn p_avg(&self) -> f64 {
        self.p_avg
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    /// √(μ_n·P_avg).
    pub fn amplitude(&self, n: usize) -> f64 {
        (self.mu[n] * self.p_avg).sqrt()
    }

    pub fn total(&self) -> f64 {
        self.mu.iter().sum()
    }
}

pub fn apply_pav(x: &RealSignal, pav: &Pav) -> Result<RealSignal> {
    if x.len() != pav.len() {
        return Err(Error::dims("PAV length", pav.len(), x.len()));
    }
    Ok(RealSignal(
        x.0.iter()
            .enumerate()
            .map(|(n, &s)| s * pav.amplitude(n))
            .collect(),
    ))
}

/// `y = Σ x_j + z` with `z ~ N(0, N0/2)` drawn from a stream seeded by `seed`.
pub fn gmac(signals: &[RealSignal], n0: f64, seed: u64) -> Result<RealSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gmac_with_rng(signals, n0, &mut rng)
}

pub fn gmac_with_rng<R: Rng + ?Sized>(
    signals: &[RealSignal],
    n0: f64,
    rng: &mut R,
) -> Result<RealSignal> {
    let first = signals.first().ok_or(Error::EmptySignals)?;
    let mut y = vec![0.0; first.len()];
    for s in signals {
        if s.len() != y.len() {
            return Err(Error::dims("GMAC inputs", y.len(), s.len()));
        }
        for (a, b) in y.iter_mut().zip(&s.0) {
            *a += b;
        }
    }
    add_awgn(&mut y, n0, rng)?;
    Ok(RealSignal(y))
}

/// Add i.i.d. Gaussian noise of variance `n0/2` in place.
pub fn add_awgn<R: Rng + ?Sized>(y: &mut [f64], n0: f64, rng: &mut R) -> Result<()> {
    if !(n0 >= 0.0 && n0.is_finite()) {
        return Err(Error::InvalidPower(format!(
            "N0 must be finite and ≥ 0, got {n0}"
        )));
    }
    if n0 == 0.0 {
        return Ok(());
    }
    let normal = Normal::new(0.0, (n0 / 2.0).sqrt()).expect("positive deviation");
    for v in y {
        *v += normal.sample(rng);
    }
    Ok(())
}

/// Signals as CSV columns `n,x1,x2,…`.
pub fn signals_to_csv(signals: &[RealSignal]) -> Result<String> {
    let len = signals.first().ok_or(Error::EmptySignals)?.len();
    if let Some(s) = signals.iter().find(|s| s.len() != len) {
        return Err(Error::dims("CSV columns", len, s.len()));
    }
    let mut out = String::from("n");
    for j in 1..=signals.len() {
        out += &format!(",x{j}");
    }
    out.push('\n');
    for n in 0..len {
        out += &n.to_string();
        for s in signals {
            out += &format!(",{}", s.0[n]);
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epcode::ternary_orthogonal;
    use proptest::prelude::*;

    fn v3(s: &str) -> FfVector {
        FfVector::from_digits(FieldModulus::GF3, s).unwrap()
    }

    fn ints(x: &RealSignal) -> Vec<i64> {
        x.samples().iter().map(|v| v.round() as i64).collect()
    }

    #[test]
    fn ask3_mapping() {
        assert_eq!(ints(&f_f2c_3ask(&v3("102")).unwrap()), [1, 0, -1]);
        let v2 = f_f2c_3ask(&v3("2121121221210000")).unwrap();
        assert_eq!(
            ints(&v2),
            [-1, 1, -1, 1, 1, -1, 1, -1, -1, 1, -1, 1, 0, 0, 0, 0]
        );
        assert_eq!(f_f2c_3ask(&v3("000")).unwrap().energy(), 0.0);
        assert!(f_f2c_3ask(&FfVector::zeros(FieldModulus::GF2, 2)).is_err());
    }

    #[test]
    fn bpsk_mapping() {
        let w = f_f2c_bpsk_matrix(&ternary_orthogonal(1).unwrap()).unwrap();
        assert_eq!(w, vec![vec![1.0, 1.0], vec![-1.0, 1.0]]);
        assert_eq!(ints(&f_f2c_bpsk(&v3("1111")).unwrap()), [1, 1, 1, 1]);
        let w4 = f_f2c_bpsk_matrix(&ternary_orthogonal(2).unwrap()).unwrap();
        assert_eq!(
            w4,
            vec![
                vec![1.0, 1.0, 1.0, 1.0],
                vec![-1.0, 1.0, -1.0, 1.0],
                vec![-1.0, -1.0, 1.0, 1.0],
                vec![1.0, -1.0, -1.0, 1.0],
            ]
        );
        assert!(matches!(f_f2c_bpsk(&v3("101")), Err(Error::ZeroSymbol(0))));
    }

    #[test]
    fn binary_bpsk_on_support() {
        let v = FfVector::from_digits(FieldModulus::GF2, "1010").unwrap();
        let x = f_f2c_bpsk_binary(&v, &[true, true, false, true]).unwrap();
        assert_eq!(ints(&x), [1, -1, 0, -1]);
    }

    #[test]
    fn walsh_gram_is_scaled_identity() {
        for kappa in 1..=6 {
            let w = f_f2c_bpsk_matrix(&ternary_orthogonal(kappa).unwrap()).unwrap();
            let n = w.len();
            for i in 0..n {
                for j in 0..n {
                    let g: f64 = w[i].iter().zip(&w[j]).map(|(a, b)| a * b).sum();
                    assert_eq!(g, if i == j { n as f64 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn regular_pav_instances() {
        let td = pav_regular(
            PavMode::Td,
            PavParams {
                users: 300,
                bits: 10,
                q: 100,
                m: 400,
                k_gc: 400,
                n: 400,
            },
        )
        .unwrap();
        assert_eq!((td.mu1, td.mu2), (30.0, 1.0));
        let cc = PavParams {
            users: 300,
            bits: 10,
            q: 100,
            m: 400,
            k_gc: 8400,
            n: 10000,
        };
        let mip = pav_regular(PavMode::CcMipParallel, cc).unwrap();
        assert_eq!((mip.mu1, mip.mu2, mip.mu_c), (830.0, 1.0, Some(1.0)));
        let mbip = pav_regular(PavMode::CcMbipParallel, cc).unwrap();
        assert_eq!((mbip.mu1, mbip.mu2, mbip.mu_c), (630.0, 21.0, Some(1.0)));
        let k100 = pav_regular(PavMode::Td, PavParams { bits: 100, ..cc }).unwrap();
        assert_eq!(k100.mu1, 3.0);
        let bad = PavParams {
            k_gc: 50,
            n: 60,
            ..cc
        };
        assert!(pav_regular(PavMode::CcMipParallel, bad).is_err());
        assert!(pav_regular(PavMode::Td, PavParams { bits: 301, ..cc }).is_err());
    }

    #[test]
    fn serial_pav_allows_more_bits_than_users() {
        let p = PavParams {
            users: 3,
            bits: 8,
            q: 0,
            m: 2,
            k_gc: 16,
            n: 24,
        };
        assert!(pav_regular(PavMode::CcMipSerial, p).is_ok());
        assert!(pav_regular(PavMode::CcMipParallel, p).is_err());
    }

    #[test]
    fn serial_pav_meets_power_constraint() {
        let p = PavParams {
            users: 300,
            bits: 10,
            q: 100,
            m: 400,
            k_gc: 8400,
            n: 10000,
        };
        for mode in [PavMode::CcMipSerial, PavMode::CcMbipSerial] {
            let v = pav_regular(mode, p).unwrap();
            let total = 10.0 * v.mu1 + 10.0 * 100.0 * v.mu2 + 1600.0 * v.mu_c.unwrap();
            assert!((total - 10000.0).abs() < 1e-9, "{mode}: {total}");
        }
    }

    #[test]
    fn apply_pav_scales_by_root_mu() {
        let x = RealSignal::new(vec![1.0, -1.0, 0.0]).unwrap();
        assert_eq!(apply_pav(&x, &Pav::uniform(3)).unwrap(), x);
        let pav = Pav::new(vec![4.0, 2.0, 9.0], 1.0).unwrap();
        let y = apply_pav(&x, &pav).unwrap();
        assert_eq!(y.samples()[0], 2.0);
        let expected: f64 = pav
            .mu()
            .iter()
            .zip(x.samples())
            .map(|(m, s)| m * s * s)
            .sum();
        assert!((y.energy() - expected).abs() < 1e-12);
        assert!(apply_pav(&x, &Pav::uniform(2)).is_err());
        assert!(Pav::new(vec![-1.0], 1.0).is_err());
    }

    #[test]
    fn gmac_noiseless_superposition() {
        let v = ["1111111122221111", "2121121221210000", "1122112222110102"];
        let xs: Vec<RealSignal> = v.iter().map(|s| f_f2c_3ask(&v3(s)).unwrap()).collect();
        let y = gmac(&xs, 0.0, 1).unwrap();
        assert_eq!(
            ints(&y),
            [1, 3, -1, 1, 3, 1, 1, -1, -3, -1, -1, 1, 1, 2, 1, 0]
        );
        assert_eq!(gmac(&xs[..1], 0.0, 9).unwrap(), xs[0]);
        assert!(matches!(gmac(&[], 1.0, 0), Err(Error::EmptySignals)));
    }

    #[test]
    fn gmac_noise_variance() {
        let n0 = 0.5;
        let y = gmac(&[RealSignal::zeros(1_000_000)], n0, 42).unwrap();
        let var = y.samples().iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((var / (n0 / 2.0) - 1.0).abs() < 0.01, "variance {var}");
        assert_eq!(
            gmac(&[RealSignal::zeros(8)], n0, 3).unwrap(),
            gmac(&[RealSignal::zeros(8)], n0, 3).unwrap()
        );
    }

    #[test]
    fn csv_export() {
        let a = RealSignal::new(vec![1.0, 0.0]).unwrap();
        let csv = signals_to_csv(&[a.clone(), a]).unwrap();
        assert_eq!(csv, "n,x1,x2\n0,1,1\n1,0,0\n");
    }

    proptest! {
        #[test]
        fn ask3_is_odd(v in proptest::collection::vec(0u8..3, 1..20)) {
            let v = FfVector::new(FieldModulus::GF3, v).unwrap();
            let a = f_f2c_3ask(&v).unwrap();
            let b = f_f2c_3ask(&v.negate()).unwrap();
            for (x, y) in a.samples().iter().zip(b.samples()) {
                prop_assert_eq!(*x, -*y);
            }
        }

        #[test]
        fn regular_pav_conserves_power(m in 2usize..64, k in 1usize..8, t in 1usize..6, r in 0usize..40, serial in any::<bool>()) {
            let users = (m / 2).max(k);
            prop_assume!(users <= m);
            let q = m - users;
            let k_gc = m * t;
            let params = PavParams { users, bits: k, q, m, k_gc, n: k_gc + r };
            let mode = if serial { PavMode::CcMbipSerial } else { PavMode::CcMbipParallel };
            let v = pav_regular(mode, params).unwrap();
            let parity = if serial { k * q } else { q } as f64;
            let total = k as f64 * v.mu1 + parity * v.mu2 + r as f64 * v.mu_c.unwrap();
            prop_assert!((total - (k_gc + r) as f64).abs() < 1e-9);
            let td = pav_regular(PavMode::Td, params).unwrap();
            prop_assert!((k as f64 * td.mu1 + q as f64 * td.mu2 - m as f64).abs() < 1e-9);
        }
    }
}
