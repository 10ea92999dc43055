//! Experiment configuration, seeded Monte Carlo sweeps, golden-vector replay
//! and result output.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::butterfly::{
    butterfly_encode, destination_decode, trace, NetworkCodeKind, OverloadNetworkCode,
};
use crate::channel_code::{
    example_code_16_12, example_generator_16_12, ml_decode, qspa_decode, superpose, toy_ldpc,
    ParityCheck, Posteriors, SystematicCode, ToyLdpcSpec, ML_CODEBOOK_LIMIT,
};
use crate::encoder::{
    encode_serial, ffsp_of_user_block, plan_frame, BitMatrix, EncoderMode, FrameLayout,
};
use crate::epcode::{
    ai_cwep_from_matrix, check_uspm, classify_mode, loading_factor, scwep_from_generator,
    ternary_nonorthogonal_3x2, ternary_orthogonal, AccessRegime, EpCode, Family, UspmVerdict,
};
use crate::error::{Error, Result};
use crate::gf::{FfMatrix, FfVector, FieldModulus};
use crate::modem::{ask3_level, f_f2c_3ask, gmac, pav_regular, Pav, PavMode, PavParams};
use crate::receiver::{
    cfsp_stats, correlate_complex, correlate_ff, f_c2f_hard, map_detect_overload,
    posterior_from_pmf, walsh_rows, Alphabet, Correlation, LevelPmf, MAP_MAX_USERS,
};

/// Version string recorded in run manifests.
pub const VERSION: &str = concat!("ffma-", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FfTdma,
    FfCcma,
    FfCdma,
    FfNoma,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::FfTdma => "ff_tdma",
            Mode::FfCcma => "ff_ccma",
            Mode::FfCdma => "ff_cdma",
            Mode::FfNoma => "ff_noma",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    Serial,
    Parallel,
}

impl From<Encoding> for EncoderMode {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Serial => EncoderMode::Serial,
            Encoding::Parallel => EncoderMode::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpConstruction {
    /// Binary identity generator of size m.
    Identity,
    /// AI-CWEP from the κ-fold ternary orthogonal matrix.
    TernaryOrthogonal,
    /// AI-CWEP from the 3×2 ternary non-orthogonal matrix.
    TernaryNonorthogonal,
    /// S-CWEP from the (16, 12) example generator.
    Example16x12,
    /// Codebook file in the `family p m M` format.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpSpec {
    pub construction: EpConstruction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    #[default]
    None,
    ToyLdpc,
    Example16x12,
    /// Sparse parity check in alist format.
    Alist,
    /// Systematic generator in the gf matrix text format.
    Generator,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default)]
    pub kind: ChannelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub redundancy: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col_weight: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PavScheme {
    #[default]
    Uniform,
    Mip,
    Mbip,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PavSpec {
    #[serde(default)]
    pub scheme: PavScheme,
    #[serde(default = "one")]
    pub p_avg: f64,
}

impl Default for PavSpec {
    fn default() -> Self {
        Self {
            scheme: PavScheme::Uniform,
            p_avg: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelDecoder {
    #[default]
    None,
    Ml,
    Qspa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuxDecoder {
    /// Complex-field Walsh correlation.
    Correlation,
    /// Finite-field correlation on the recovered FFSP.
    FfCorrelation,
    /// Block-wise minimum Euclidean distance over all user-block candidates.
    Map,
    /// Maximum likelihood over the FFSP symbol posteriors.
    Ml,
}

fn default_max_iter() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSpec {
    #[serde(default)]
    pub channel: ChannelDecoder,
    pub mux: MuxDecoder,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub threshold: f64,
}

fn default_batch() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub ebn0_db: Vec<f64>,
    #[serde(default)]
    pub min_frames: u64,
    pub max_frames: u64,
    pub target_errors: u64,
    #[serde(default = "default_batch")]
    pub batch: usize,
}

/// A complete, re-runnable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub users: usize,
    pub bits_per_user: usize,
    pub blocks: usize,
    #[serde(default)]
    pub encoding: Encoding,
    #[serde(default)]
    pub seed: u64,
    pub ep: EpSpec,
    #[serde(default)]
    pub channel: ChannelSpec,
    #[serde(default)]
    pub pav: PavSpec,
    pub decoder: DecoderSpec,
    pub sweep: SweepSpec,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            Error::config(
                "config",
                e.message().to_string() + &span_hint(text, e.span()),
            )
        })
    }

    /// Load from a file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(rel) = p.as_mut().filter(|p| p.is_relative()) {
                *rel = base.join(&*rel);
            }
        };
        resolve(&mut cfg.ep.path);
        resolve(&mut cfg.channel.path);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    span.map(|s| {
        format!(
            " (line {})",
            text[..s.start.min(text.len())].lines().count().max(1)
        )
    })
    .unwrap_or_default()
}

fn read(path: &Option<PathBuf>, field: &str) -> Result<String> {
    let path = path
        .as_ref()
        .ok_or_else(|| Error::config(field, "a path is required for this construction"))?;
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })
}

pub fn build_ep_code(spec: &EpSpec) -> Result<EpCode> {
    match spec.construction {
        EpConstruction::Identity => {
            let m = spec
                .m
                .ok_or_else(|| Error::config("ep.m", "identity construction needs m"))?;
            if m == 0 {
                return Err(Error::config("ep.m", "must be positive"));
            }
            scwep_from_generator(&FfMatrix::identity(FieldModulus::GF2, m))
        }
        EpConstruction::TernaryOrthogonal => {
            let kappa = spec
                .kappa
                .ok_or_else(|| Error::config("ep.kappa", "ternary_orthogonal needs kappa"))?;
            ai_cwep_from_matrix(
                &ternary_orthogonal(kappa).map_err(|e| Error::config("ep.kappa", e.to_string()))?,
            )
        }
        EpConstruction::TernaryNonorthogonal => ai_cwep_from_matrix(&ternary_nonorthogonal_3x2()),
        EpConstruction::Example16x12 => {
            scwep_from_generator(&example_generator_16_12(FieldModulus::GF2))
        }
        EpConstruction::File => EpCode::parse(&read(&spec.path, "ep.path")?),
    }
}

pub fn build_channel_code(
    spec: &ChannelSpec,
    p: FieldModulus,
    m: usize,
    blocks: usize,
) -> Result<Option<SystematicCode>> {
    let code = match spec.kind {
        ChannelKind::None => return Ok(None),
        ChannelKind::ToyLdpc => {
            let r = spec
                .redundancy
                .ok_or_else(|| Error::config("channel.redundancy", "toy_ldpc needs redundancy"))?;
            toy_ldpc(ToyLdpcSpec {
                p,
                n: m * blocks + r,
                redundancy: r,
                col_weight: spec.col_weight.unwrap_or(3),
                m,
                seed: spec.seed.unwrap_or(1),
            })
            .map_err(|e| Error::config("channel", e.to_string()))?
        }
        ChannelKind::Example16x12 => example_code_16_12(p)?,
        ChannelKind::Alist => {
            let h = ParityCheck::parse_alist(&read(&spec.path, "channel.path")?, p)?;
            SystematicCode::from_parity_check(&h.to_dense(), m)?
        }
        ChannelKind::Generator => {
            let g = FfMatrix::parse(&read(&spec.path, "channel.path")?)?;
            SystematicCode::from_generator(&g, m)?.with_induced_parity_check()?
        }
    };
    if code.modulus() != p {
        return Err(Error::config(
            "channel",
            format!("code is over GF({}), EP code over GF({p})", code.modulus()),
        ));
    }
    if code.m() != m || code.blocks() != blocks {
        return Err(Error::config(
            "channel",
            format!(
                "information length {} does not match m·T = {}",
                code.info_len(),
                m * blocks
            ),
        ));
    }
    Ok(Some(code))
}

/// All candidate bit assignments for one data block.
#[derive(Debug, Clone)]
struct BlockTable {
    /// `(user, bit index)` per candidate bit, most significant first.
    slots: Vec<(usize, usize)>,
    ffsp: Vec<Vec<u8>>,
    levels: Vec<Vec<f64>>,
    by_ffsp: HashMap<Vec<u8>, Vec<usize>>,
}

impl BlockTable {
    fn bits(&self, idx: usize) -> impl Iterator<Item = ((usize, usize), u8)> + '_ {
        let b = self.slots.len();
        self.slots
            .iter()
            .enumerate()
            .map(move |(i, &s)| (s, ((idx >> (b - 1 - i)) & 1) as u8))
    }
}

/// Precomputed transmitter and receiver state for one experiment.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: ExperimentConfig,
    code: EpCode,
    layout: FrameLayout,
    channel: Option<SystematicCode>,
    p: FieldModulus,
    n: usize,
    /// `[user][bit][value]` → length-N codeword contribution.
    contributions: Vec<Vec<[Vec<u8>; 2]>>,
    active: Vec<Vec<bool>>,
    pmfs: Vec<LevelPmf>,
    pav: Pav,
    amps: Vec<f64>,
    energy_per_frame: f64,
    tables: Vec<BlockTable>,
    walsh: Vec<Vec<f64>>,
}

/// Per-frame outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameOutcome {
    pub bit_errors: u64,
}

impl Simulator {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let cfg = config.clone();
        for (field, v) in [
            ("users", cfg.users),
            ("bits_per_user", cfg.bits_per_user),
            ("blocks", cfg.blocks),
            ("sweep.batch", cfg.sweep.batch),
        ] {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if cfg.sweep.max_frames == 0 {
            return Err(Error::config("sweep.max_frames", "must be positive"));
        }
        if cfg.sweep.ebn0_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("sweep.ebn0_db", "values must be finite"));
        }
        let code = build_ep_code(&cfg.ep)?;
        check_mode(cfg.mode, &code)?;
        let layout = plan_frame(
            code.users(),
            code.m(),
            cfg.blocks,
            cfg.bits_per_user,
            cfg.users,
            cfg.encoding.into(),
        )?;
        let p = code.modulus();
        let channel = build_channel_code(&cfg.channel, p, code.m(), cfg.blocks)?;
        check_decoder(&cfg, &code, channel.as_ref())?;

        let info_len = code.m() * cfg.blocks;
        let n = channel.as_ref().map_or(info_len, SystematicCode::n);
        let m = code.m();

        let mut contributions = Vec::with_capacity(cfg.users);
        for slots in &layout.assignment {
            let mut per_bit = Vec::with_capacity(slots.len());
            for s in slots {
                let word = |bit: u8| -> Result<Vec<u8>> {
                    let w = code.pair(s.pair).word(bit);
                    match &channel {
                        Some(ch) => Ok(ch
                            .place_and_encode(w, s.block + 1)?
                            .symbols()
                            .as_slice()
                            .to_vec()),
                        None => {
                            let mut v = vec![0u8; n];
                            v[s.block * m..(s.block + 1) * m].copy_from_slice(w.as_slice());
                            Ok(v)
                        }
                    }
                };
                per_bit.push([word(0)?, word(1)?]);
            }
            contributions.push(per_bit);
        }

        // Per-user symbol distribution at every position.
        let q = p.order();
        let mut active = vec![vec![false; n]; cfg.users];
        let mut user_pmfs: Vec<Vec<LevelPmf>> = Vec::with_capacity(cfg.users);
        let mut second_moment = vec![0.0; n];
        for (j, per_bit) in contributions.iter().enumerate() {
            let mut pmfs = Vec::with_capacity(n);
            for pos in 0..n {
                let mut dist = vec![0.0; q];
                dist[0] = 1.0;
                for pair in per_bit {
                    let (a, b) = (pair[0][pos], pair[1][pos]);
                    if a == 0 && b == 0 {
                        continue;
                    }
                    let mut next = vec![0.0; q];
                    for (s, &pr) in dist.iter().enumerate() {
                        if pr > 0.0 {
                            next[p.add(s as u8, a) as usize] += 0.5 * pr;
                            next[p.add(s as u8, b) as usize] += 0.5 * pr;
                        }
                    }
                    dist = next;
                }
                let is_active = dist[0] < 1.0;
                active[j][pos] = is_active;
                let pmf = if !is_active {
                    LevelPmf::silent()
                } else if p == FieldModulus::GF2 {
                    LevelPmf::from_symbols(&dist, |s| 2 * s as i32 - 1)
                } else {
                    LevelPmf::from_symbols(&dist, |s| ask3_level(s) as i32)
                };
                second_moment[pos] += pmf.second_moment();
                pmfs.push(pmf);
            }
            user_pmfs.push(pmfs);
        }
        let pmfs: Vec<LevelPmf> = (0..n)
            .map(|pos| {
                let at: Vec<LevelPmf> = user_pmfs.iter().map(|u| u[pos].clone()).collect();
                LevelPmf::combine(&at, p)
            })
            .collect();

        let pav = build_pav(&cfg, &code, &layout, &active, n, info_len)?;
        let amps: Vec<f64> = (0..n).map(|i| pav.amplitude(i)).collect();
        let energy_per_frame: f64 = (0..n).map(|i| amps[i] * amps[i] * second_moment[i]).sum();
        if energy_per_frame <= 0.0 {
            return Err(Error::config("pav", "frame carries no energy"));
        }

        let needs_tables = matches!(cfg.decoder.mux, MuxDecoder::Map | MuxDecoder::Ml);
        let tables = if needs_tables {
            (0..cfg.blocks)
                .map(|t| block_table(&code, &layout, &active, p, t))
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let walsh = if code.family() == Family::AiCwep {
            walsh_rows(code.g_one())?
        } else {
            Vec::new()
        };
        Ok(Self {
            config: cfg,
            code,
            layout,
            channel,
            p,
            n,
            contributions,
            active,
            pmfs,
            pav,
            amps,
            energy_per_frame,
            tables,
            walsh,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn ep_code(&self) -> &EpCode {
        &self.code
    }

    pub fn layout(&self) -> &FrameLayout {
        &self.layout
    }

    pub fn channel_code(&self) -> Option<&SystematicCode> {
        self.channel.as_ref()
    }

    pub fn frame_len(&self) -> usize {
        self.n
    }

    pub fn pav(&self) -> &Pav {
        &self.pav
    }

    /// Expected transmitted energy per frame, summed over users.
    pub fn energy_per_frame(&self) -> f64 {
        self.energy_per_frame
    }

    pub fn bits_per_frame(&self) -> usize {
        self.config.users * self.config.bits_per_user
    }

    pub fn eb(&self) -> f64 {
        self.energy_per_frame / self.bits_per_frame() as f64
    }

    pub fn n0_for(&self, ebn0_db: f64) -> f64 {
        self.eb() / 10f64.powf(ebn0_db / 10.0)
    }

    /// Field symbols each user transmits for the given bits.
    pub fn user_symbols(&self, bits: &[Vec<u8>]) -> Vec<Vec<u8>> {
        bits.iter()
            .zip(&self.contributions)
            .map(|(ub, per_bit)| {
                let mut acc = vec![0u8; self.n];
                for (k, &b) in ub.iter().enumerate() {
                    for (a, &c) in acc.iter_mut().zip(&per_bit[k][b as usize]) {
                        *a = self.p.add(*a, c);
                    }
                }
                acc
            })
            .collect()
    }

    fn level(&self, j: usize, pos: usize, s: u8) -> f64 {
        if !self.active[j][pos] {
            0.0
        } else if self.p == FieldModulus::GF2 {
            2.0 * s as f64 - 1.0
        } else {
            ask3_level(s)
        }
    }

    /// Noiseless received signal for the given user bits.
    pub fn transmit(&self, bits: &[Vec<u8>]) -> Vec<f64> {
        let symbols = self.user_symbols(bits);
        let mut y = vec![0.0; self.n];
        for (j, sym) in symbols.iter().enumerate() {
            for (pos, &s) in sym.iter().enumerate() {
                y[pos] += self.amps[pos] * self.level(j, pos, s);
            }
        }
        y
    }

    /// Run one frame from its own seeded stream.
    pub fn run_frame(&self, n0: f64, seed: [u8; 32]) -> FrameOutcome {
        let mut rng = ChaCha8Rng::from_seed(seed);
        let bits: Vec<Vec<u8>> = (0..self.config.users)
            .map(|_| {
                (0..self.config.bits_per_user)
                    .map(|_| rng.random::<bool>() as u8)
                    .collect()
            })
            .collect();
        let mut y = self.transmit(&bits);
        if n0 > 0.0 {
            let normal = Normal::new(0.0, (n0 / 2.0).sqrt()).expect("positive deviation");
            for v in &mut y {
                *v += normal.sample(&mut rng);
            }
        }
        let decoded = self.decode(&y, n0);
        let bit_errors = bits
            .iter()
            .flatten()
            .zip(decoded.iter().flatten())
            .filter(|(a, b)| a != b)
            .count() as u64;
        FrameOutcome { bit_errors }
    }

    fn posteriors(&self, y: &[f64], n0: f64) -> Posteriors {
        let rows: Vec<Vec<f64>> = (0..self.n)
            .map(|i| posterior_from_pmf(y[i], self.amps[i], n0, &self.pmfs[i], self.p))
            .collect();
        Posteriors::from_rows(self.p, &rows).expect("rows have field order")
    }

    /// Recover every user's bits from the received frame.
    pub fn decode(&self, y: &[f64], n0: f64) -> Vec<Vec<u8>> {
        let cfg = &self.config;
        let m = self.code.m();
        let info_len = m * cfg.blocks;
        let mut out = vec![vec![0u8; cfg.bits_per_user]; cfg.users];

        // Complex correlation first: its erasures feed the channel decoder.
        let mut erased = vec![false; cfg.blocks];
        let mut corr: Vec<Vec<Option<u8>>> = Vec::new();
        if cfg.decoder.mux == MuxDecoder::Correlation {
            for slots in &self.layout.assignment {
                let mut row = Vec::with_capacity(slots.len());
                for s in slots {
                    let blk = &y[s.block * m..(s.block + 1) * m];
                    let c = correlate_complex(blk, &self.walsh[s.pair], cfg.decoder.threshold)
                        .expect("block length matches");
                    if c == Correlation::Erasure {
                        erased[s.block] = true;
                    }
                    row.push(c.bit());
                }
                corr.push(row);
            }
        }

        let needs_post = self.channel.is_some()
            || matches!(cfg.decoder.mux, MuxDecoder::Ml | MuxDecoder::FfCorrelation)
            || erased.iter().any(|&e| e);
        let post = needs_post.then(|| {
            let mut post = self.posteriors(y, n0);
            for (t, _) in erased.iter().enumerate().filter(|(_, &e)| e) {
                for pos in t * m..(t + 1) * m {
                    post.set_uniform(pos);
                }
            }
            post
        });

        // Hard FFSP information sequence, from the channel decoder when present.
        let w_hat: Option<Vec<u8>> = match (&self.channel, &post) {
            (Some(ch), Some(post)) => {
                let info = match cfg.decoder.channel {
                    ChannelDecoder::Ml => ml_decode(ch, post),
                    _ => qspa_decode(ch, post, cfg.decoder.max_iter),
                }
                .expect("validated decoder");
                Some(info.into_vec())
            }
            (None, Some(post)) => Some(post.hard_decision()[..info_len].to_vec()),
            _ => None,
        };

        match cfg.decoder.mux {
            MuxDecoder::Correlation | MuxDecoder::FfCorrelation => {
                let w = w_hat.as_ref();
                for (j, slots) in self.layout.assignment.iter().enumerate() {
                    for (k, s) in slots.iter().enumerate() {
                        let from_corr = corr.get(j).and_then(|r| r[k]);
                        out[j][k] = from_corr.unwrap_or_else(|| {
                            let w = w.expect("posteriors computed");
                            let blk =
                                FfVector::new(self.p, w[s.block * m..(s.block + 1) * m].to_vec())
                                    .expect("field symbols");
                            correlate_ff(
                                &blk,
                                &self.code.g_one().row(s.pair),
                                self.code.self_correlation(s.pair),
                            )
                            .unwrap_or(0)
                        });
                    }
                }
            }
            MuxDecoder::Map | MuxDecoder::Ml => {
                for (t, table) in self.tables.iter().enumerate() {
                    let yb = &y[t * m..(t + 1) * m];
                    let ab = &self.amps[t * m..(t + 1) * m];
                    let dist = |i: usize| -> f64 {
                        yb.iter()
                            .zip(&table.levels[i])
                            .zip(ab)
                            .map(|((&yv, &l), &a)| (yv - a * l).powi(2))
                            .sum()
                    };
                    let nearest = |cands: &mut dyn Iterator<Item = usize>| -> usize {
                        let mut best = (f64::INFINITY, usize::MAX);
                        for i in cands {
                            let d = dist(i);
                            if d < best.0 || best.1 == usize::MAX {
                                best = (d, i);
                            }
                        }
                        best.1
                    };
                    let all = table.levels.len();
                    let choice = if self.channel.is_some() {
                        let w = w_hat.as_ref().expect("channel decoded");
                        match table.by_ffsp.get(&w[t * m..(t + 1) * m]) {
                            Some(c) => nearest(&mut c.iter().copied()),
                            None => nearest(&mut (0..all)),
                        }
                    } else if cfg.decoder.mux == MuxDecoder::Ml {
                        let post = post.as_ref().expect("posteriors computed");
                        let mut best = (f64::NEG_INFINITY, f64::INFINITY, 0);
                        for i in 0..all {
                            let score: f64 = table.ffsp[i]
                                .iter()
                                .enumerate()
                                .map(|(c, &s)| post.row(t * m + c)[s as usize].max(1e-300).ln())
                                .sum();
                            let d = dist(i);
                            if score > best.0 || (score == best.0 && d < best.1) {
                                best = (score, d, i);
                            }
                        }
                        best.2
                    } else {
                        nearest(&mut (0..all))
                    };
                    for ((j, k), b) in table.bits(choice) {
                        out[j][k] = b;
                    }
                }
            }
        }
        out
    }
}

fn check_mode(mode: Mode, code: &EpCode) -> Result<()> {
    let regime = classify_mode(code);
    let ok = match mode {
        Mode::FfTdma => code.family() == Family::OrthoUdep,
        Mode::FfCcma => code.family().is_single_codeword() && regime != AccessRegime::FfNoma,
        Mode::FfCdma => code.family() == Family::AiCwep,
        Mode::FfNoma => regime == AccessRegime::FfNoma,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::config(
            "mode",
            format!(
                "{mode} does not match a {} code with loading factor {}",
                code.family(),
                loading_factor(code)
            ),
        ))
    }
}

fn check_decoder(
    cfg: &ExperimentConfig,
    code: &EpCode,
    channel: Option<&SystematicCode>,
) -> Result<()> {
    let d = &cfg.decoder;
    match (channel, d.channel) {
        (None, ChannelDecoder::None) => {}
        (None, _) => {
            return Err(Error::config(
                "decoder.channel",
                "no channel code is configured",
            ))
        }
        (Some(_), ChannelDecoder::None) => {
            return Err(Error::config(
                "decoder.channel",
                "a channel code needs a channel decoder",
            ))
        }
        (Some(ch), ChannelDecoder::Ml) => {
            let size = (ch.modulus().order() as u128).checked_pow(ch.info_len() as u32);
            if size.is_none_or(|s| s > ML_CODEBOOK_LIMIT) {
                return Err(Error::config(
                    "decoder.channel",
                    "ML codebook exceeds the enumeration limit",
                ));
            }
        }
        (Some(ch), ChannelDecoder::Qspa) => {
            if ch.parity_check().is_none() {
                return Err(Error::config(
                    "decoder.channel",
                    "QSPA needs a parity-check matrix",
                ));
            }
        }
    }
    match d.mux {
        MuxDecoder::Correlation | MuxDecoder::FfCorrelation if code.family() != Family::AiCwep => {
            Err(Error::config(
                "decoder.mux",
                "correlation decoding needs an orthogonal AI-CWEP code",
            ))
        }
        _ if !(d.threshold >= 0.0 && d.threshold.is_finite()) => {
            Err(Error::config("decoder.threshold", "must be finite and ≥ 0"))
        }
        _ => Ok(()),
    }
}

/// Systematic S-CWEP codes split each block into M information and m − M parity columns.
fn info_columns(code: &EpCode) -> usize {
    let (users, m) = (code.users(), code.m());
    if code.family().is_single_codeword()
        && users <= m
        && code.g_one().col_block(0, users).is_identity()
    {
        users
    } else {
        m
    }
}

fn build_pav(
    cfg: &ExperimentConfig,
    code: &EpCode,
    layout: &FrameLayout,
    active: &[Vec<bool>],
    n: usize,
    info_len: usize,
) -> Result<Pav> {
    let m = code.m();
    let info_cols = info_columns(code);
    let (mu1, mu2, mu_c) = match cfg.pav.scheme {
        PavScheme::Uniform => (1.0, 1.0, 1.0),
        scheme => {
            let serial = layout.mode == EncoderMode::Serial;
            let mode = match (scheme, serial) {
                (PavScheme::Mip, false) => PavMode::CcMipParallel,
                (PavScheme::Mip, true) => PavMode::CcMipSerial,
                (_, false) => PavMode::CcMbipParallel,
                (_, true) => PavMode::CcMbipSerial,
            };
            let params = PavParams {
                users: code.users(),
                bits: cfg.bits_per_user,
                q: m - info_cols,
                m,
                k_gc: info_len,
                n,
            };
            let v = pav_regular(mode, params).map_err(|e| Error::config("pav", e.to_string()))?;
            (v.mu1, v.mu2, v.mu_c.unwrap_or(1.0))
        }
    };
    let mut mu: Vec<f64> = (0..n)
        .map(|pos| {
            if !active.iter().any(|a| a[pos]) {
                0.0
            } else if pos >= info_len {
                mu_c
            } else if pos % m < info_cols {
                mu1
            } else {
                mu2
            }
        })
        .collect();
    let total: f64 = mu.iter().sum();
    if total > 0.0 {
        let factor = n as f64 / total;
        log::debug!("PAV normalisation factor {factor}");
        mu.iter_mut().for_each(|x| *x *= factor);
    }
    Pav::new(mu, cfg.pav.p_avg)
}

fn block_table(
    code: &EpCode,
    layout: &FrameLayout,
    active: &[Vec<bool>],
    p: FieldModulus,
    t: usize,
) -> Result<BlockTable> {
    let m = code.m();
    let occupants = layout.occupants(t);
    let b = occupants.len();
    if b > MAP_MAX_USERS {
        return Err(Error::EnumerationTooLarge {
            what: "block candidates",
            size: 1u128 << b,
            limit: 1u128 << MAP_MAX_USERS,
        });
    }
    let slots: Vec<(usize, usize)> = occupants.iter().map(|&(j, k, _)| (j, k)).collect();
    let mut users: Vec<usize> = occupants.iter().map(|o| o.0).collect();
    users.dedup();
    let mut ffsp = Vec::with_capacity(1 << b);
    let mut levels = Vec::with_capacity(1 << b);
    let mut by_ffsp: HashMap<Vec<u8>, Vec<usize>> = HashMap::new();
    for idx in 0..1usize << b {
        let mut w = vec![0u8; m];
        let mut l = vec![0.0; m];
        for &j in &users {
            let mut sym = vec![0u8; m];
            for (i, &(oj, _, pair)) in occupants.iter().enumerate() {
                if oj == j {
                    let bit = ((idx >> (b - 1 - i)) & 1) as u8;
                    crate::encoder::add_into(p, &mut sym, code.pair(pair).word(bit).as_slice());
                }
            }
            crate::encoder::add_into(p, &mut w, &sym);
            for c in 0..m {
                if active[j][t * m + c] {
                    l[c] += if p == FieldModulus::GF2 {
                        2.0 * sym[c] as f64 - 1.0
                    } else {
                        ask3_level(sym[c])
                    };
                }
            }
        }
        by_ffsp.entry(w.clone()).or_default().push(idx);
        ffsp.push(w);
        levels.push(l);
    }
    Ok(BlockTable {
        slots,
        ffsp,
        levels,
        by_ffsp,
    })
}

/// One Eb/N0 point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub ebn0_db: f64,
    pub frames: u64,
    pub bit_errs: u64,
    pub frame_errs: u64,
    pub ber: f64,
    pub fer: f64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// `(frames, bit errors, frame errors)` per point; excludes timing.
    pub fn counts(&self) -> Vec<(u64, u64, u64)> {
        self.rows
            .iter()
            .map(|r| (r.frames, r.bit_errs, r.frame_errs))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("ebn0_db,frames,bit_errs,frame_errs,ber,fer\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{},{:e},{:e}\n",
                r.ebn0_db, r.frames, r.bit_errs, r.frame_errs, r.ber, r.fer
            );
        }
        s
    }
}

/// Seed of frame `frame` at sweep point `point`.
pub fn frame_seed(master: u64, point: usize, frame: u64) -> [u8; 32] {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&(point as u64).to_le_bytes());
    seed[16..24].copy_from_slice(&frame.to_le_bytes());
    seed
}

/// Run every Eb/N0 point of the sweep on `threads` workers.
///
/// Frames run in fixed-size batches; outcomes are then scanned in frame
/// order, so the stopping point and all counts are independent of the
/// thread count.
pub fn run_sweep(config: &ExperimentConfig, threads: usize) -> Result<SweepResult> {
    let sim = Simulator::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    let sweep = &config.sweep;
    let bits_per_frame = sim.bits_per_frame() as u64;
    let mut rows = Vec::with_capacity(sweep.ebn0_db.len());
    for (point, &ebn0) in sweep.ebn0_db.iter().enumerate() {
        let start = Instant::now();
        let n0 = sim.n0_for(ebn0);
        let (mut frames, mut bit_errs, mut frame_errs) = (0u64, 0u64, 0u64);
        'point: while frames < sweep.max_frames {
            let end = (frames + sweep.batch as u64).min(sweep.max_frames);
            let outcomes: Vec<FrameOutcome> = pool.install(|| {
                (frames..end)
                    .into_par_iter()
                    .map(|f| sim.run_frame(n0, frame_seed(config.seed, point, f)))
                    .collect()
            });
            for o in outcomes {
                frames += 1;
                bit_errs += o.bit_errors;
                frame_errs += u64::from(o.bit_errors > 0);
                if frames >= sweep.min_frames && bit_errs >= sweep.target_errors {
                    break 'point;
                }
            }
        }
        let row = SweepRow {
            ebn0_db: ebn0,
            frames,
            bit_errs,
            frame_errs,
            ber: bit_errs as f64 / (frames * bits_per_frame) as f64,
            fer: frame_errs as f64 / frames as f64,
            wall_secs: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "{} Eb/N0 {ebn0} dB: {} frames, BER {:.3e}, FER {:.3e}",
            config.mode,
            row.frames,
            row.ber,
            row.fer
        );
        rows.push(row);
    }
    Ok(SweepResult {
        config: config.clone(),
        rows,
    })
}

/// Manifest text: a re-runnable config preceded by a comment header.
pub fn manifest(result: &SweepResult) -> Result<String> {
    Ok(format!(
        "# {VERSION}\n# Re-run with: ffma sweep <this file>\n{}",
        result.config.to_toml()?
    ))
}

/// Path of the manifest written next to `csv_path`.
pub fn manifest_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.toml")
}

/// Write the CSV to `path` and the manifest next to it.
pub fn emit(result: &SweepResult, path: &Path) -> Result<PathBuf> {
    let write = |p: &Path, text: String| {
        std::fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    write(path, result.to_csv())?;
    let mpath = manifest_path(path);
    write(&mpath, manifest(result)?)?;
    Ok(mpath)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayEntry {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub entries: Vec<ReplayEntry>,
}

impl ReplayReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

impl fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{} {}: {}",
                if e.passed { "PASS" } else { "FAIL" },
                e.name,
                e.detail
            )?;
        }
        Ok(())
    }
}

fn check(name: &'static str, got: impl fmt::Debug, want: impl fmt::Debug) -> ReplayEntry {
    let (g, w) = (format!("{got:?}"), format!("{want:?}"));
    ReplayEntry {
        name,
        passed: g == w,
        detail: if g == w {
            g
        } else {
            format!("got {g}, expected {w}")
        },
    }
}

fn entry(name: &'static str, r: Result<ReplayEntry>) -> ReplayEntry {
    r.unwrap_or_else(|e| ReplayEntry {
        name,
        passed: false,
        detail: format!("error: {e}"),
    })
}

fn gf3(s: &str) -> Result<FfVector> {
    FfVector::from_digits(FieldModulus::GF3, s)
}

fn digits_of(v: &[FfVector]) -> Vec<String> {
    v.iter().map(FfVector::digits).collect()
}

/// Execute every worked example and report bit-exact agreement.
pub fn replay_examples() -> ReplayReport {
    let mut entries = Vec::new();

    entries.push(entry(
        "four-user S-CWEP",
        (|| {
            let g = FfMatrix::from_digit_rows(
                FieldModulus::GF2,
                &["11111111", "00001111", "00110011", "01010101"],
            )?;
            let code = scwep_from_generator(&g)?;
            let sum = g.left_mul(&FfVector::from_digits(FieldModulus::GF2, "1100")?)?;
            Ok(check(
                "four-user S-CWEP",
                (crate::gf::rank(&g), sum.digits(), check_uspm(&code)),
                (4, "11110000", UspmVerdict::Unique),
            ))
        })(),
    ));

    entries.push(entry(
        "orthogonal AI-CWEP pairs",
        (|| {
            let code = ai_cwep_from_matrix(&ternary_orthogonal(2)?)?;
            let pairs: Vec<String> = code.pairs().iter().map(|p| p.to_string()).collect();
            Ok(check(
                "orthogonal AI-CWEP pairs",
                (pairs, check_uspm(&code), loading_factor(&code).to_string()),
                (
                    vec![
                        "(2222, 1111)",
                        "(1212, 2121)",
                        "(1122, 2211)",
                        "(2112, 1221)",
                    ],
                    UspmVerdict::Unique,
                    "1".to_string(),
                ),
            ))
        })(),
    ));

    entries.push(entry(
        "LDPC-derived S-CWEP",
        (|| {
            let code = scwep_from_generator(&example_generator_16_12(FieldModulus::GF2))?;
            let first = code.pair(0).one_word().digits();
            let last = code.pair(11).one_word().digits();
            Ok(check(
                "LDPC-derived S-CWEP",
                (
                    first,
                    last,
                    loading_factor(&code).to_string(),
                    classify_mode(&code),
                ),
                (
                    "1000000000001000",
                    "0000000000010100",
                    "3/4".to_string(),
                    AccessRegime::FfCcma,
                ),
            ))
        })(),
    ));

    entries.push(entry(
        "serial encoding and channel coding",
        (|| {
            let code = ai_cwep_from_matrix(&ternary_orthogonal(2)?)?;
            let bits = BitMatrix::new(vec![vec![1, 1, 0], vec![1, 0, 1], vec![0, 0, 1]])?;
            let enc = encode_serial(&bits, &code)?;
            let ch = example_code_16_12(FieldModulus::GF3)?;
            let cws = enc
                .u
                .iter()
                .map(|u| ch.encode(u))
                .collect::<Result<Vec<_>>>()?;
            let parities: Vec<String> = cws.iter().map(|c| c.parity().digits()).collect();
            let sum = superpose(&cws)?;
            Ok(check(
                "serial encoding and channel coding",
                (
                    digits_of(&enc.u),
                    enc.w.digits(),
                    parities,
                    sum.symbols().digits(),
                ),
                (
                    vec!["111111112222", "212112122121", "112211222211"],
                    vec!["1021", "0112", "0221"],
                    vec!["1111", "0000", "0102"],
                    "1021011202211210",
                ),
            ))
        })(),
    ));

    entries.push(entry(
        "non-orthogonal overload code",
        (|| {
            let code = ai_cwep_from_matrix(&ternary_nonorthogonal_3x2())?;
            let table = crate::receiver::MapTable::for_code(&code)?;
            let mut rows = Vec::new();
            for (i, b) in table.candidates().iter().enumerate() {
                let w = ffsp_of_user_block(b, &code)?;
                let r: Vec<i64> = table.levels(i).iter().map(|x| *x as i64).collect();
                let back = map_detect_overload(
                    &crate::modem::RealSignal::new(table.levels(i).to_vec())?,
                    &code,
                    1.0,
                )?;
                rows.push((b.to_string(), w.word().digits(), r, back == *b));
            }
            let want: Vec<(String, String, Vec<i64>, bool)> = [
                ("000", "00", [0, -3]),
                ("001", "02", [0, -1]),
                ("010", "12", [-2, -1]),
                ("011", "11", [-2, 1]),
                ("100", "22", [2, -1]),
                ("101", "21", [2, 1]),
                ("110", "01", [0, 1]),
                ("111", "00", [0, 3]),
            ]
            .into_iter()
            .map(|(b, w, r)| (b.to_string(), w.to_string(), r.to_vec(), true))
            .collect();
            Ok(check(
                "non-orthogonal overload code",
                (rows, loading_factor(&code).to_string(), check_uspm(&code)),
                (want, "3/2".to_string(), UspmVerdict::Ambiguous),
            ))
        })(),
    ));

    entries.push(entry(
        "CFSP and complex-to-finite mapping",
        (|| {
            let v = ["1111111122221111", "2121121221210000", "1122112222110102"];
            let xs = v
                .iter()
                .map(|s| f_f2c_3ask(&gf3(s)?))
                .collect::<Result<Vec<_>>>()?;
            let y = gmac(&xs, 0.0, 0)?;
            let r: Vec<i64> = y.samples().iter().map(|x| x.round() as i64).collect();
            let stats = cfsp_stats(3, Alphabet::Ternary3ask)?;
            let v_hat: String = r
                .iter()
                .map(|&x| f_c2f_hard(x, &stats).map(|s| char::from(b'0' + s)))
                .collect::<Result<_>>()?;
            Ok(check(
                "CFSP and complex-to-finite mapping",
                (r, stats.omega_v.clone(), v_hat),
                (
                    vec![1, 3, -1, 1, 3, 1, 1, -1, -3, -1, -1, 1, 1, 2, 1, 0],
                    vec![0u8, 2, 1, 0, 2, 1, 0],
                    "1021011202211210",
                ),
            ))
        })(),
    ));

    entries.push(entry(
        "correlation decoding",
        (|| {
            let code = ai_cwep_from_matrix(&ternary_orthogonal(2)?)?;
            let walsh = walsh_rows(code.g_one())?;
            let r = [
                [1.0, 3.0, -1.0, 1.0],
                [3.0, 1.0, 1.0, -1.0],
                [-3.0, -1.0, -1.0, 1.0],
            ];
            let w = ["1021", "0112", "0221"]
                .map(gf3)
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            let mut complex = Vec::new();
            let mut finite = Vec::new();
            for j in 0..3 {
                let mut c = Vec::new();
                let mut f = Vec::new();
                for k in 0..3 {
                    c.push(correlate_complex(&r[k], &walsh[j], 0.0)?.bit().unwrap_or(9));
                    f.push(correlate_ff(
                        &w[k],
                        &code.g_one().row(j),
                        code.self_correlation(j),
                    )?);
                }
                complex.push(c);
                finite.push(f);
            }
            let want = vec![vec![1u8, 1, 0], vec![1, 0, 1], vec![0, 0, 1]];
            Ok(check(
                "correlation decoding",
                (complex, finite),
                (want.clone(), want),
            ))
        })(),
    ));

    entries.push(entry(
        "butterfly over GF(3^2)",
        (|| {
            let code = OverloadNetworkCode::new(NetworkCodeKind::NoCwepGf9);
            let e = butterfly_encode([0, 0, 0], &code)?;
            let d = destination_decode(1, &e.u[0], &e.w, &code)?;
            let all = trace(&code)?
                .iter()
                .all(|t| t.decodes.iter().all(|d| *d == t.message));
            Ok(check(
                "butterfly over GF(3^2)",
                (digits_of(&e.u), e.w.digits(), d, all),
                (vec!["22", "12", "02"], "00", [0u8, 0, 0], true),
            ))
        })(),
    ));

    entries.push(entry(
        "butterfly over GF(7)",
        (|| {
            let code = OverloadNetworkCode::new(NetworkCodeKind::AiepGf7);
            let e = butterfly_encode([0, 0, 0], &code)?;
            let d = destination_decode(1, &e.u[0], &e.w, &code)?;
            let all = trace(&code)?
                .iter()
                .all(|t| t.decodes.iter().all(|d| *d == t.message));
            Ok(check(
                "butterfly over GF(7)",
                (digits_of(&e.u), e.w.digits(), d, all),
                (vec!["1", "2", "4"], "0", [0u8, 0, 0], true),
            ))
        })(),
    ));

    entries.push(entry(
        "regular PAV instances",
        (|| {
            let base = PavParams {
                users: 300,
                bits: 10,
                q: 100,
                m: 400,
                k_gc: 8400,
                n: 10000,
            };
            let td = pav_regular(PavMode::Td, base)?;
            let mip = pav_regular(PavMode::CcMipParallel, base)?;
            let mbip = pav_regular(PavMode::CcMbipParallel, base)?;
            Ok(check(
                "regular PAV instances",
                (
                    (td.mu1, td.mu2),
                    (mip.mu1, mip.mu2, mip.mu_c),
                    (mbip.mu1, mbip.mu2, mbip.mu_c),
                ),
                (
                    (30.0, 1.0),
                    (830.0, 1.0, Some(1.0)),
                    (630.0, 21.0, Some(1.0)),
                ),
            ))
        })(),
    ));

    ReplayReport { entries }
}
