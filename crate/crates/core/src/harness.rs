//! Simulation configuration, BER and outage drivers, verification suites and
//! result export.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    self, channel_correlation_c, chi_square_statistic, det_c_closed_form, gamma2_cdf, ks_distance,
    lemma1_residual, lemma2_verify, lemma3_roots_detailed, SimPoint, SimResult,
};
use crate::cxmat::{AlamoutiBlock, ComplexMat};
use crate::detect::{
    self, ap_cancel_general, domain_decode, ml_joint_detect, noise_correlation, qostbc_ap_detect,
    separable_decode, whitened_ml_decode, AlamoutiDomain, CancelOptions, Reference,
};
use crate::error::{Error, Result};
use crate::fading::{
    complex_gaussian, sample_channel, transmit, trial_rng, ChannelRealization, NoiseMode,
    NoiseModel, RealChannelDecomposition,
};
use crate::montecarlo::{resolve_threads, ErrorCount, Runner};
use crate::stcodes::{
    qostbc_encode, qostbc_merge, split_channel, split_received, unsplit_received, Constellation,
    StCode, SymbolVector,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Ml,
    Ap,
    ApWhitenedMl,
}

impl DetectorKind {
    pub fn is_ap(&self) -> bool {
        !matches!(self, Self::Ml)
    }
}

fn default_constellation() -> String {
    "qpsk".into()
}
fn default_rotation() -> f64 {
    FRAC_PI_4
}
fn default_min_errors() -> u64 {
    100
}
fn default_max_trials() -> u64 {
    10_000_000
}
fn default_search_cap() -> u64 {
    detect::DEFAULT_SEARCH_CAP as u64
}
fn default_outage_samples() -> u64 {
    10_000_000
}
fn default_batch() -> u64 {
    1000
}

/// Run configuration; JSON field names match the struct.
///
/// `max_trials` caps the number of target-user symbols decided per SNR point.
/// Symbols have unit energy and each user transmits total power 1 per
/// channel use; noise has variance `2 / snr` per complex sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub users: usize,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub detector: DetectorKind,
    #[serde(default = "default_constellation")]
    pub constellation: String,
    #[serde(default = "default_rotation")]
    pub rotation: f64,
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_min_errors")]
    pub min_errors: u64,
    #[serde(default = "default_max_trials")]
    pub max_trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub target_user: usize,
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default = "default_search_cap")]
    pub ml_search_cap: u64,
    #[serde(default)]
    pub eps_grid: Vec<f64>,
    #[serde(default = "default_outage_samples")]
    pub outage_samples: u64,
    #[serde(default = "default_batch")]
    pub batch_size: u64,
    #[serde(default)]
    pub reference: Reference,
    #[serde(default)]
    pub cancel_order: Option<Vec<usize>>,
}

impl SimConfig {
    pub fn new(
        users: usize,
        tx: usize,
        rx: usize,
        detector: DetectorKind,
        snr_grid_db: Vec<f64>,
    ) -> Self {
        Self {
            users,
            tx_antennas: tx,
            rx_antennas: rx,
            detector,
            constellation: default_constellation(),
            rotation: default_rotation(),
            snr_grid_db,
            min_errors: default_min_errors(),
            max_trials: default_max_trials(),
            seed: 0,
            threads: None,
            target_user: 0,
            noiseless: false,
            ml_search_cap: default_search_cap(),
            eps_grid: Vec::new(),
            outage_samples: default_outage_samples(),
            batch_size: default_batch(),
            reference: Reference::First,
            cancel_order: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, msg: String| Err(Error::Config { field, msg });
        if self.users == 0 {
            return bad("users", "must be at least 1".into());
        }
        if !matches!(self.tx_antennas, 2 | 4) {
            return bad(
                "tx_antennas",
                format!("must be 2 or 4, got {}", self.tx_antennas),
            );
        }
        if self.rx_antennas == 0 {
            return bad("rx_antennas", "must be at least 1".into());
        }
        if self.detector.is_ap() && self.rx_antennas < self.users {
            return bad(
                "rx_antennas",
                format!(
                    "array processing needs rx_antennas >= users ({} < {})",
                    self.rx_antennas, self.users
                ),
            );
        }
        if self.target_user >= self.users {
            return bad(
                "target_user",
                format!("{} out of range for {} users", self.target_user, self.users),
            );
        }
        let constellation = match Constellation::from_name(&self.constellation, self.rotation) {
            Ok(c) => c,
            Err(e) => return bad("constellation", e.to_string()),
        };
        if self.snr_grid_db.is_empty() {
            return bad("snr_grid_db", "must not be empty".into());
        }
        if self.snr_grid_db.iter().any(|x| !x.is_finite())
            || self.snr_grid_db.windows(2).any(|w| w[0] >= w[1])
        {
            return bad(
                "snr_grid_db",
                "must be finite and strictly ascending".into(),
            );
        }
        if self.min_errors == 0 {
            return bad("min_errors", "must be positive".into());
        }
        if self.max_trials == 0 {
            return bad("max_trials", "must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads", "must be positive".into());
        }
        if self.detector == DetectorKind::Ml {
            let size = detect::search_size(constellation.len(), self.tx_antennas, self.users);
            if size > u128::from(self.ml_search_cap) {
                return bad(
                    "detector",
                    format!(
                        "joint ML needs {size} hypotheses, above ml_search_cap {}; use fewer users or a smaller constellation",
                        self.ml_search_cap
                    ),
                );
            }
        }
        if !self.eps_grid.is_empty()
            && (self.eps_grid.iter().any(|&e| !(e > 0.0 && e.is_finite()))
                || self.eps_grid.windows(2).any(|w| w[0] >= w[1]))
        {
            return bad("eps_grid", "must be positive and strictly ascending".into());
        }
        if let Some(order) = &self.cancel_order {
            let opts = CancelOptions {
                reference: self.reference,
                order: Some(order.clone()),
            };
            // probe the order against a dummy domain
            let mut dom = AlamoutiDomain::new(
                vec![[num_complex::Complex64::new(0.0, 0.0); 2]; self.users],
                vec![vec![AlamoutiBlock::IDENTITY; self.users]; self.users],
                1.0,
            )?;
            if let Err(e) = dom.cancel_all(self.target_user, &opts) {
                if !matches!(e, Error::Degenerate(_)) {
                    return bad("cancel_order", e.to_string());
                }
            }
        }
        Ok(())
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::from_name(&self.constellation, self.rotation)
    }

    pub fn code(&self) -> Result<StCode> {
        StCode::for_antennas(self.tx_antennas, self.rotation)
    }

    pub fn cancel_options(&self) -> CancelOptions {
        CancelOptions {
            reference: self.reference,
            order: self.cancel_order.clone(),
        }
    }

    /// Grid used by outage runs: the configured one or 7 log-spaced points
    /// over `[10^-2.2, 10^-1]`.
    pub fn outage_grid(&self) -> Vec<f64> {
        if self.eps_grid.is_empty() {
            (0..7)
                .map(|i| 10f64.powf(-2.2 + 1.2 * i as f64 / 6.0))
                .collect()
        } else {
            self.eps_grid.clone()
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{:?} J={} N={} M={}",
            self.detector, self.users, self.tx_antennas, self.rx_antennas
        )
        .to_lowercase()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: SimConfig,
    pub result: SimResult,
    /// Fitted outage slope, for outage runs.
    #[serde(default)]
    pub slope: Option<f64>,
    pub wall_time_s: f64,
    pub version: String,
}

/// Immutable per-run state shared by all trials.
struct TrialContext {
    cfg: SimConfig,
    constellation: Constellation,
    code: StCode,
    opts: CancelOptions,
    cap: u128,
}

impl TrialContext {
    fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            constellation: cfg.constellation()?,
            code: cfg.code()?,
            opts: cfg.cancel_options(),
            cap: u128::from(cfg.ml_search_cap),
            cfg: cfg.clone(),
        })
    }

    /// One codeword block: symbol errors of the target user.
    fn block(&self, point: usize, noise: NoiseMode, trial: u64) -> ErrorCount {
        let cfg = &self.cfg;
        let mut rng = trial_rng(cfg.seed, point as u64, trial);
        let k = self.code.symbols();
        let detect_var = match noise {
            NoiseMode::Off => 1.0,
            NoiseMode::Awgn(n) => n.per_sample_variance,
        };
        let mut redraws = 0;
        loop {
            let channel = sample_channel(cfg.users, cfg.tx_antennas, cfg.rx_antennas, &mut rng);
            let symbols: Vec<SymbolVector> = (0..cfg.users)
                .map(|j| SymbolVector::random(&self.constellation, k, j, &mut rng))
                .collect();
            let codewords: Vec<ComplexMat> = symbols
                .iter()
                .map(|s| {
                    self.code
                        .encode(&s.symbols)
                        .expect("symbol count matches code")
                })
                .collect();
            let received =
                transmit(&codewords, &channel, noise, &mut rng).expect("shapes fixed by config");
            let t = cfg.target_user;
            let decided = detect_user(
                &received,
                &channel,
                cfg.detector,
                t,
                detect_var,
                &self.constellation,
                &self.opts,
                self.cap,
            );
            match decided {
                Ok(idx) => {
                    let errors = idx
                        .iter()
                        .zip(&symbols[t].indices)
                        .filter(|(a, b)| a != b)
                        .count() as u64;
                    return ErrorCount {
                        errors,
                        symbols: k as u64,
                        redraws,
                    };
                }
                Err(Error::Degenerate(_) | Error::NotPositiveDefinite | Error::Singular(_)) => {
                    redraws += 1
                }
                Err(e) => panic!("detector failed on a validated configuration: {e}"),
            }
        }
    }
}

/// Decided constellation indices of `target` from one received block.
/// `noise_var` only shapes the whitening metric; any positive value works
/// on noiseless input.
#[allow(clippy::too_many_arguments)]
pub fn detect_user(
    received: &ComplexMat,
    channel: &ChannelRealization,
    detector: DetectorKind,
    target: usize,
    noise_var: f64,
    constellation: &Constellation,
    opts: &CancelOptions,
    cap: u128,
) -> Result<Vec<usize>> {
    let code = StCode::for_antennas(channel.tx, constellation.rotation)?;
    match (detector, code) {
        (DetectorKind::Ml, _) => ml_joint_detect(received, channel, code, constellation, cap)
            .map(|mut d| d.indices.swap_remove(target)),
        (DetectorKind::Ap, StCode::Alamouti) => {
            let mut dom = AlamoutiDomain::from_reception(received, channel, noise_var)?;
            dom.cancel_all(target, opts)?;
            domain_decode(&dom, target, constellation).map(|mut d| d.indices.swap_remove(0))
        }
        (DetectorKind::ApWhitenedMl, StCode::Alamouti) => {
            ap_cancel_general(received, channel, target, noise_var, opts)
                .and_then(|sys| separable_decode(&sys, constellation, true))
                .map(|mut d| d.indices.swap_remove(0))
        }
        (kind, StCode::Qostbc { .. }) => qostbc_ap_detect(
            received,
            channel,
            target,
            noise_var,
            constellation,
            opts,
            kind == DetectorKind::ApWhitenedMl,
        )
        .map(|mut d| d.indices.swap_remove(0)),
    }
}

/// Progress events emitted while a run is in flight.
#[derive(Clone, Debug)]
pub enum Progress {
    Point {
        index: usize,
        x: f64,
        errors: u64,
        trials: u64,
    },
}

pub fn run_ber(cfg: &SimConfig) -> Result<RunRecord> {
    run_ber_with(cfg, &mut |_| {})
}

pub fn run_ber_with(cfg: &SimConfig, progress: &mut dyn FnMut(Progress)) -> Result<RunRecord> {
    let start = Instant::now();
    let ctx = TrialContext::new(cfg)?;
    let runner = Runner::new(resolve_threads(cfg.threads), cfg.batch_size)?;
    let k = ctx.code.symbols() as u64;
    let max_blocks = cfg.max_trials.div_ceil(k);
    let mut points = Vec::with_capacity(cfg.snr_grid_db.len());
    for (i, &db) in cfg.snr_grid_db.iter().enumerate() {
        let noise = if cfg.noiseless {
            NoiseMode::Off
        } else {
            NoiseMode::Awgn(NoiseModel::from_db(db)?)
        };
        let out = runner.run_until(
            max_blocks,
            |t| ctx.block(i, noise, t),
            |c: &ErrorCount| c.errors >= cfg.min_errors,
        );
        let tally = out.tally;
        let point = SimPoint::new(
            db,
            tally.errors,
            tally.symbols,
            tally.errors < cfg.min_errors,
        );
        progress(Progress::Point {
            index: i,
            x: db,
            errors: point.errors,
            trials: point.trials,
        });
        points.push(point);
    }
    Ok(RunRecord {
        config: cfg.clone(),
        result: SimResult {
            label: cfg.label(),
            seed: cfg.seed,
            points,
        },
        slope: None,
        wall_time_s: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Normalized post-cancellation SNR (`sigma^2 = 1`) of the target user for
/// one Alamouti channel draw: `||H||^2` alone, the closed form against one
/// interferer, or `H'^H C^-1 H'` after general cancellation.
pub fn normalized_ap_snr(
    channel: &ChannelRealization,
    target: usize,
    opts: &CancelOptions,
) -> Result<f64> {
    let h = channel.alamouti_blocks(target);
    match channel.users {
        1 => Ok(analysis::stacked_norm_sq(&h)),
        2 => chi_square_statistic(&h, &channel.alamouti_blocks(1 - target)),
        _ => {
            let obs = vec![[num_complex::Complex64::new(0.0, 0.0); 2]; channel.rx];
            let blocks = (0..channel.users)
                .map(|j| channel.alamouti_blocks(j))
                .collect();
            let mut dom = AlamoutiDomain::new(obs, blocks, 1.0)?;
            dom.cancel_all(target, opts)?;
            let sys = dom.to_system(target);
            let l = sys.noise_cov.cholesky()?;
            let w = l.forward_substitute(&sys.channel)?;
            Ok(w.frob_norm_sq() / 2.0)
        }
    }
}

pub fn run_outage(cfg: &SimConfig) -> Result<RunRecord> {
    let start = Instant::now();
    cfg.validate()?;
    if !cfg.detector.is_ap() {
        return Err(Error::Config {
            field: "detector",
            msg: "outage needs an array-processing detector".into(),
        });
    }
    if cfg.tx_antennas != 2 {
        return Err(Error::Config {
            field: "tx_antennas",
            msg: "outage runs use the Alamouti effective SNR (tx_antennas = 2)".into(),
        });
    }
    let runner = Runner::new(resolve_threads(cfg.threads), cfg.batch_size.max(10_000))?;
    let opts = cfg.cancel_options();
    let grid = cfg.outage_grid();
    let counts: Vec<u64> = runner.run_fixed(cfg.outage_samples, |t| {
        let mut rng = trial_rng(cfg.seed, u64::MAX, t);
        let x = loop {
            let ch = sample_channel(cfg.users, 2, cfg.rx_antennas, &mut rng);
            if let Ok(x) = normalized_ap_snr(&ch, cfg.target_user, &opts) {
                break x;
            }
        };
        grid.iter().map(|&e| u64::from(x < e)).collect::<Vec<u64>>()
    });
    let mut counts = counts;
    counts.resize(grid.len(), 0);
    let (slope, mut result) = analysis::outage_fit(
        &cfg.label(),
        cfg.seed,
        &grid,
        &counts,
        cfg.outage_samples,
        cfg.min_errors,
    )?;
    result.label = format!("outage {}", cfg.label());
    Ok(RunRecord {
        config: cfg.clone(),
        result,
        slope: Some(slope),
        wall_time_s: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Lemma1,
    Lemma2,
    Lemma3,
    Detc,
    Chisq,
    Correlation,
    Separability,
    Roundtrip,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Lemma1,
        Suite::Lemma2,
        Suite::Lemma3,
        Suite::Detc,
        Suite::Chisq,
        Suite::Correlation,
        Suite::Separability,
        Suite::Roundtrip,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Lemma1 => "lemma1",
            Self::Lemma2 => "lemma2",
            Self::Lemma3 => "lemma3",
            Self::Detc => "detc",
            Self::Chisq => "chisq",
            Self::Correlation => "correlation",
            Self::Separability => "separability",
            Self::Roundtrip => "roundtrip",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown suite `{name}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `value < threshold` unless `at_least`.
    pub at_least: bool,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            at_least: false,
            passed: value < threshold,
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            at_least: true,
            passed: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub samples: u64,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub wall_time_s: f64,
}

/// Sample counts used by each suite.
pub fn suite_samples(suite: Suite) -> u64 {
    match suite {
        Suite::Lemma1 | Suite::Chisq => 100_000,
        Suite::Lemma2 | Suite::Separability | Suite::Roundtrip | Suite::Correlation => 10_000,
        Suite::Lemma3 | Suite::Detc => 1000,
    }
}

fn normal_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Runs one property suite; failures are report entries, not errors.
pub fn run_verify(suite: Suite, seed: u64, threads: Option<usize>) -> Result<VerifyReport> {
    let start = Instant::now();
    let n = suite_samples(suite);
    let runner = Runner::new(resolve_threads(threads), 256)?;
    let stream = 1_000 + suite as u64;
    let rng_for = |t: u64| trial_rng(seed, stream, t);
    let checks = match suite {
        Suite::Lemma1 => {
            let worst = max_over(&runner, n, |t| {
                let mut rng = rng_for(t);
                let d = RealChannelDecomposition {
                    a: normal_vec(&mut rng, 8),
                    b: normal_vec(&mut rng, 8),
                };
                lemma1_residual(&d).unwrap_or(f64::INFINITY)
            });
            vec![Check::below("max relative residual", worst, 1e-10)]
        }
        Suite::Chisq => {
            let samples: Vec<f64> = (0..n)
                .map(|t| {
                    let ch = sample_channel(2, 2, 2, &mut rng_for(t));
                    chi_square_statistic(&ch.alamouti_blocks(0), &ch.alamouti_blocks(1))
                        .unwrap_or(f64::NAN)
                })
                .collect();
            vec![Check::below(
                "KS distance to Gamma(2,1)",
                ks_distance(&samples, gamma2_cdf),
                0.01,
            )]
        }
        Suite::Lemma2 => {
            let stats: Vec<[f64; 6]> = (0..n)
                .map(|t| {
                    let mut rng = rng_for(t);
                    let m = rng.random_range(3..=8usize);
                    match lemma2_verify(&normal_vec(&mut rng, 4 * m), m) {
                        Ok(c) => [
                            f64::from(u8::from(
                                c.lambda_stars.len() == m - 1
                                    && c.lambda_stars.iter().all(|&l| l > 0.0)
                                    && c.min_root_gap > 1e-12,
                            )),
                            c.root_residual,
                            c.eig_residual,
                            c.orth_residual,
                            c.diag_check,
                            c.min_eigenvalue,
                        ],
                        Err(_) => [
                            0.0,
                            f64::INFINITY,
                            f64::INFINITY,
                            f64::INFINITY,
                            f64::INFINITY,
                            f64::NEG_INFINITY,
                        ],
                    }
                })
                .collect();
            let max_of = |k: usize| stats.iter().map(|s| s[k]).fold(0.0, f64::max);
            let root_ok = stats.iter().filter(|s| s[0] == 1.0).count() as f64;
            let min_eig = stats.iter().map(|s| s[5]).fold(f64::INFINITY, f64::min);
            vec![
                Check::at_least("trials with M-1 distinct positive roots", root_ok, n as f64),
                Check::below("max secular residual", max_of(1), 1e-12),
                Check::below("max eigen residual ||Cu - lu||/||u||", max_of(2), 1e-8),
                Check::below("max orthogonality defect", max_of(3), 1e-8),
                Check::below(
                    "max U^T C U off-diagonal / diagonal defect",
                    max_of(4),
                    1e-8,
                ),
                Check::at_least(
                    "min eigenvalue of C (must be > 0)",
                    min_eig,
                    f64::MIN_POSITIVE,
                ),
            ]
        }
        Suite::Lemma3 => {
            let mut found_ok = 0u64;
            let mut worst: f64 = 0.0;
            let mut min_gap = f64::INFINITY;
            for t in 0..n {
                let mut rng = rng_for(t);
                let size = if t % 2 == 0 {
                    5
                } else {
                    rng.random_range(1..=7usize)
                };
                let betas: Vec<f64> = (0..size)
                    .map(|_| rng.random_range(1e-3..1.0 - 1e-3))
                    .collect();
                if let Ok(detailed) = lemma3_roots_detailed(&betas) {
                    let roots: Vec<f64> = detailed.iter().map(|r| r.lambda).collect();
                    if roots.len() == size && roots.iter().all(|&l| l > 0.0) {
                        found_ok += 1;
                    }
                    worst = detailed.iter().map(|r| r.residual).fold(worst, f64::max);
                    let mut s = roots;
                    s.sort_by(f64::total_cmp);
                    min_gap = s.windows(2).map(|w| w[1] - w[0]).fold(min_gap, f64::min);
                }
            }
            vec![
                Check::at_least("trials with one root per beta", found_ok as f64, n as f64),
                Check::below("max secular residual", worst, 1e-12),
                Check::at_least("min root gap", min_gap, 1e-12),
            ]
        }
        Suite::Detc => {
            let worst = max_over(&runner, n, |t| {
                let b = normal_vec(&mut rng_for(t), 12);
                let closed = det_c_closed_form(&b, 3).unwrap_or(f64::NAN);
                let numeric = channel_correlation_c(&b, 3)
                    .and_then(|c| c.det())
                    .map(|d| d.re)
                    .unwrap_or(f64::NAN);
                (numeric - closed).abs() / closed.abs()
            });
            vec![Check::below(
                "max relative error numeric vs closed form",
                worst,
                1e-9,
            )]
        }
        Suite::Correlation => {
            let pattern_worst = max_over(&runner, n, |t| {
                let mut rng = rng_for(t);
                let m = 2 + (t % 5) as usize;
                let g: Vec<AlamoutiBlock> = (0..m)
                    .map(|_| {
                        AlamoutiBlock::new(complex_gaussian(&mut rng), complex_gaussian(&mut rng))
                    })
                    .collect();
                let h: Vec<AlamoutiBlock> = (0..m)
                    .map(|_| {
                        AlamoutiBlock::new(complex_gaussian(&mut rng), complex_gaussian(&mut rng))
                    })
                    .collect();
                let sigma_sq = rng.random_range(0.1..2.0);
                let closed = noise_correlation(&g, sigma_sq).expect("nonzero blocks");
                let obs = vec![[num_complex::Complex64::new(0.0, 0.0); 2]; m];
                let mut dom = AlamoutiDomain::new(obs, vec![h, g], sigma_sq).expect("consistent");
                dom.cancel(1, Reference::First).expect("nonzero blocks");
                let mapped = dom.to_system(0).noise_cov;
                mapped.max_abs_diff(&closed) / closed.max_abs()
            });
            let min_eig = (0..n)
                .map(|t| {
                    let mut rng = rng_for(n + t);
                    let g: Vec<AlamoutiBlock> = (0..4)
                        .map(|_| {
                            AlamoutiBlock::new(
                                complex_gaussian(&mut rng),
                                complex_gaussian(&mut rng),
                            )
                        })
                        .collect();
                    noise_correlation(&g, 1.0)
                        .and_then(|c| c.eig_real_sym())
                        .map(|e| e[0].0)
                        .unwrap_or(f64::NEG_INFINITY)
                })
                .fold(f64::INFINITY, f64::min);
            let gram_worst = max_over(&runner, 1000, |t| {
                let mut rng = rng_for(2 * n + t);
                let m = 3 + (t % 6) as usize;
                let b = normal_vec(&mut rng, 4 * m);
                analysis::b_matrices(&b, m)
                    .expect("nonzero b")
                    .iter()
                    .map(|(bm, beta)| {
                        bm.matmul(&bm.transpose())
                            .expect("4x4")
                            .max_abs_diff(&ComplexMat::identity(4).scale_real(*beta))
                    })
                    .fold(0.0, f64::max)
            });
            vec![
                Check::below(
                    "max relative gap closed-form vs mapped noise covariance",
                    pattern_worst,
                    1e-12,
                ),
                Check::at_least(
                    "min eigenvalue of noise pattern (must be > 0)",
                    min_eig,
                    f64::MIN_POSITIVE,
                ),
                Check::below("max |B_i B_i^T - beta_i I|", gram_worst, 1e-12),
            ]
        }
        Suite::Separability => {
            let q = Constellation::qpsk();
            let noise = NoiseModel::from_db(4.0)?;
            let mismatches: u64 = runner.run_fixed(n, |t| {
                let mut rng = rng_for(t);
                let ch = sample_channel(2, 2, 3, &mut rng);
                let xs: Vec<ComplexMat> = (0..2)
                    .map(|j| {
                        StCode::Alamouti
                            .encode(&SymbolVector::random(&q, 2, j, &mut rng).symbols)
                            .expect("2 symbols")
                    })
                    .collect();
                let r = transmit(&xs, &ch, NoiseMode::Awgn(noise), &mut rng).expect("shapes");
                let Ok(sys) = ap_cancel_general(
                    &r,
                    &ch,
                    0,
                    noise.per_sample_variance,
                    &CancelOptions::default(),
                ) else {
                    return 1;
                };
                match (
                    whitened_ml_decode(&sys, &q),
                    separable_decode(&sys, &q, true),
                ) {
                    (Ok(a), Ok(b)) => u64::from(a.indices != b.indices),
                    _ => 1,
                }
            });
            let imag_worst = max_over(&runner, 1000, |t| {
                let mut rng = rng_for(n + t);
                let g: Vec<AlamoutiBlock> = (0..3)
                    .map(|_| {
                        AlamoutiBlock::new(complex_gaussian(&mut rng), complex_gaussian(&mut rng))
                    })
                    .collect();
                let inv = noise_correlation(&g, 1.0)
                    .and_then(|c| c.inverse())
                    .expect("positive definite");
                // x, y, t scalars times I_2: imaginary parts and off-diagonals inside each 2x2 block vanish
                let mut worst = inv.max_imag();
                for bi in [0, 2] {
                    for bk in [0, 2] {
                        let blk = inv.block(bi, bk, 2, 2);
                        worst = worst
                            .max(blk[(0, 1)].norm())
                            .max(blk[(1, 0)].norm())
                            .max((blk[(0, 0)] - blk[(1, 1)]).norm());
                    }
                }
                worst
            });
            vec![
                Check::below(
                    "decision mismatches joint vs per-symbol",
                    mismatches as f64,
                    0.5,
                ),
                Check::below("max non-scalar part of C_n^-1 blocks", imag_worst, 1e-12),
            ]
        }
        Suite::Roundtrip => {
            let worst = max_over(&runner, n, |t| {
                let mut rng = rng_for(t);
                let h: [num_complex::Complex64; 4] =
                    std::array::from_fn(|_| complex_gaussian(&mut rng));
                let c: Vec<num_complex::Complex64> =
                    (0..4).map(|_| complex_gaussian(&mut rng)).collect();
                let x = qostbc_encode(&c, FRAC_PI_4).expect("4 symbols");
                let raw: [num_complex::Complex64; 4] =
                    std::array::from_fn(|tt| (0..4).map(|k| x[(tt, k)] * h[k]).sum());
                let split = split_received(raw);
                let (p, m) = split_channel(h);
                let back = unsplit_received(&split);
                let hb = qostbc_merge(&p, &m);
                let scale = raw.iter().chain(&h).map(|z| z.norm()).fold(1.0, f64::max);
                raw.iter()
                    .zip(&back)
                    .chain(h.iter().zip(&hb))
                    .map(|(a, b)| (a - b).norm())
                    .fold(0.0, f64::max)
                    / scale
            });
            vec![Check::below(
                "max split/merge reconstruction residual",
                worst,
                1e-12,
            )]
        }
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        suite,
        samples: n,
        seed,
        checks,
        passed,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Parallel maximum over trial values, kept order-independent by encoding
/// the nonnegative float as its bit pattern.
fn max_over(runner: &Runner, n: u64, f: impl Fn(u64) -> f64 + Sync) -> f64 {
    #[derive(Default)]
    struct MaxBits(u64);
    impl crate::montecarlo::Tally for MaxBits {
        fn merge(&mut self, other: Self) {
            self.0 = self.0.max(other.0);
        }
    }
    let out: MaxBits = runner.run_fixed(n, |t| {
        let v = f(t);
        // NaN and negative values must not hide: map them to +inf
        let v = if v.is_nan() || v < 0.0 {
            f64::INFINITY
        } else {
            v
        };
        MaxBits(v.to_bits())
    });
    f64::from_bits(out.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::InvalidInput(format!("unknown format `{other}`"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow<'a> {
    x: f64,
    y: f64,
    trials: u64,
    errors: u64,
    label: &'a str,
    seed: u64,
}

/// Serializes a record as CSV (`x,y,trials,errors,label,seed`) or JSON.
pub fn render(record: &RunRecord, format: ExportFormat) -> Result<String> {
    match format {
        ExportFormat::Json => Ok(serde_json::to_string_pretty(record)? + "\n"),
        ExportFormat::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .from_writer(Vec::new());
            w.write_record(["x", "y", "trials", "errors", "label", "seed"])?;
            for p in &record.result.points {
                w.serialize(CsvRow {
                    x: p.x,
                    y: p.y,
                    trials: p.trials,
                    errors: p.errors,
                    label: &record.result.label,
                    seed: record.result.seed,
                })?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| Error::InvalidInput(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

pub fn export(record: &RunRecord, path: &Path, format: ExportFormat) -> Result<()> {
    let text = render(record, format)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_record(path: &Path) -> Result<RunRecord> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Re-reads `x,y,trials,errors,label,seed` rows.
pub fn parse_csv(text: &str) -> Result<Vec<(SimPoint, String, u64)>> {
    #[derive(Deserialize)]
    struct Row {
        x: f64,
        y: f64,
        trials: u64,
        errors: u64,
        label: String,
        seed: u64,
    }
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize::<Row>()
        .map(|r| {
            let r = r?;
            Ok((
                SimPoint {
                    x: r.x,
                    y: r.y,
                    trials: r.trials,
                    errors: r.errors,
                    low_confidence: false,
                },
                r.label,
                r.seed,
            ))
        })
        .collect()
}
