//! Seeded Monte Carlo campaigns over the protocol, tamper statistics,
//! sweeps and result persistence.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)`. Stream 0 draws
//! per-experiment values (the key under [`KeyPolicy::UniformPerExperiment`],
//! the test plaintext); shard `s` uses stream `s + 1`. Shards are merged in
//! index order, so a record depends only on its config.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{self, binomial_sigma, AdversaryError, AttackStrategy, Eavesdropper, PsBounds};
use crate::protocol::{self, ChannelHook, KeyBits, PadBits, ProtocolError, RoundEngine, RoundOptions, RoundTranscript};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no transcript has both Alice's and Bob's bit")]
    NoCompleteTranscripts,
    #[error("sweep needs at least one {0}")]
    EmptySweep(&'static str),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

pub const DEFAULT_TAMPER_THRESHOLD: f64 = 0.25;

fn default_threshold() -> f64 {
    DEFAULT_TAMPER_THRESHOLD
}

fn default_shards() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KeyPolicy {
    Fixed { key: KeyBits },
    /// One uniform key reused by every round.
    UniformPerExperiment,
    /// A fresh uniform key each round; matches the key average Eve faces.
    UniformPerRound,
}

/// Serializable subset of [`AttackStrategy`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrategySpec {
    Passive,
    GuessKey { key: KeyBits },
    InterceptResend,
    Optimal,
}

impl StrategySpec {
    pub fn to_strategy(&self) -> AttackStrategy {
        match self {
            StrategySpec::Passive => AttackStrategy::Passive,
            StrategySpec::GuessKey { key } => AttackStrategy::GuessKey(key.clone()),
            StrategySpec::InterceptResend => AttackStrategy::InterceptResendComputational,
            StrategySpec::Optimal => AttackStrategy::OptimalUnitary,
        }
    }

    pub fn name(&self) -> &'static str {
        self.to_strategy().name()
    }

    pub fn from_name(name: &str, guess: Option<KeyBits>) -> Result<Self> {
        Ok(match adversary::strategy_from_name(name, guess)? {
            AttackStrategy::Passive => StrategySpec::Passive,
            AttackStrategy::GuessKey(key) => StrategySpec::GuessKey { key },
            AttackStrategy::InterceptResendComputational => StrategySpec::InterceptResend,
            AttackStrategy::OptimalUnitary => StrategySpec::Optimal,
            AttackStrategy::CustomUnitary(_) => unreachable!("not nameable"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub key_policy: KeyPolicy,
    #[serde(default)]
    pub strategy: Option<StrategySpec>,
    pub rounds: usize,
    /// Leading Phase-1 bits used for a Phase-2 encrypt/decrypt check.
    #[serde(default)]
    pub pad_length: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default = "default_threshold")]
    pub tamper_threshold: f64,
    #[serde(default = "default_shards")]
    pub shards: usize,
}

impl ExperimentConfig {
    pub fn new(n: usize, rounds: usize, seed: u64) -> Self {
        Self {
            n,
            key_policy: KeyPolicy::UniformPerRound,
            strategy: None,
            rounds,
            pad_length: 0,
            seed,
            output_path: None,
            tamper_threshold: DEFAULT_TAMPER_THRESHOLD,
            shards: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        if self.n < 3 {
            return bad(format!("n must be at least 3, got {}", self.n));
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.shards == 0 {
            return bad("shards must be at least 1".into());
        }
        if self.pad_length > self.rounds {
            return bad(format!("pad_length {} exceeds rounds {}", self.pad_length, self.rounds));
        }
        if !(0.0..=1.0).contains(&self.tamper_threshold) {
            return bad(format!("tamper_threshold {} outside [0, 1]", self.tamper_threshold));
        }
        if let KeyPolicy::Fixed { key } = &self.key_policy {
            if key.len() != self.n - 1 {
                return bad(format!("fixed key has {} bits, n - 1 = {}", key.len(), self.n - 1));
            }
        }
        if let Some(s) = &self.strategy {
            s.to_strategy().validate(self.n)?;
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let mut text = String::new();
        File::open(path).and_then(|mut f| f.read_to_string(&mut text)).map_err(io_err(path))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TamperVerdict {
    Clean,
    Tampered,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TamperStat {
    pub complete_rounds: usize,
    pub mismatches: usize,
    pub mismatch_rate: f64,
    pub threshold: f64,
    pub verdict: TamperVerdict,
}

/// Fraction of rounds where Bob's bit differs from Alice's, and whether it
/// exceeds `threshold`. Rounds without a Bob bit are skipped.
pub fn tamper_detection_stat(transcripts: &[RoundTranscript], threshold: f64) -> Result<TamperStat> {
    let complete: Vec<bool> = transcripts.iter().filter_map(RoundTranscript::agrees).collect();
    if complete.is_empty() {
        return Err(HarnessError::NoCompleteTranscripts);
    }
    let mismatches = complete.iter().filter(|&&a| !a).count();
    let rate = mismatches as f64 / complete.len() as f64;
    Ok(TamperStat {
        complete_rounds: complete.len(),
        mismatches,
        mismatch_rate: rate,
        threshold,
        verdict: if rate > threshold { TamperVerdict::Tampered } else { TamperVerdict::Clean },
    })
}

/// Wall-clock duration of a run. Not serialized and ignored by equality so
/// that records stay reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct WallTime(pub Duration);

impl PartialEq for WallTime {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    /// Key used by every round; absent under [`KeyPolicy::UniformPerRound`].
    pub key: Option<KeyBits>,
    pub agreements: usize,
    pub agreement_rate: f64,
    pub eve_successes: Option<usize>,
    pub empirical_ps: Option<f64>,
    pub ps_std_error: Option<f64>,
    pub bound: PsBounds,
    /// Fraction of ones among Alice's bits.
    pub pad_bias: f64,
    pub pad_bias_sigma: f64,
    pub pad_bias_within_5_sigma: bool,
    /// Whether Bob's pad decrypts a random plaintext Alice encrypted with hers.
    pub pad_roundtrip_ok: Option<bool>,
    pub tamper: TamperStat,
    #[serde(skip)]
    pub wall_time: WallTime,
}

#[derive(Debug, Default, Clone)]
struct ShardTally {
    agreements: usize,
    eve_successes: usize,
    ones: usize,
    alice: Vec<u8>,
    bob: Vec<u8>,
}

fn shard_range(rounds: usize, shards: usize, s: usize) -> std::ops::Range<usize> {
    (s * rounds / shards)..((s + 1) * rounds / shards)
}

fn run_shard(
    cfg: &ExperimentConfig,
    engine: &RoundEngine,
    fixed_key: Option<&KeyBits>,
    shard: usize,
    keep_bits: usize,
) -> Result<ShardTally> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(shard as u64 + 1);
    let mut eve = cfg.strategy.as_ref().map(|s| Eavesdropper::new(&s.to_strategy(), cfg.n)).transpose()?;
    let opts = RoundOptions::default();
    let mut tally = ShardTally::default();
    for j in shard_range(cfg.rounds, cfg.shards, shard) {
        let key = match fixed_key {
            Some(k) => k.clone(),
            None => KeyBits::random(cfg.n - 1, &mut rng)?,
        };
        let hook = eve.as_mut().map(|e| e as &mut dyn ChannelHook);
        let t = engine.run(j, &key, hook, &opts, &mut rng)?;
        tally.agreements += (t.agrees() == Some(true)) as usize;
        tally.ones += t.alice_bit as usize;
        if let Some(g) = t.eve_action.as_ref().and_then(|a| a.guess) {
            tally.eve_successes += (g == t.alice_bit) as usize;
        }
        if j < keep_bits {
            tally.alice.push(t.alice_bit);
            tally.bob.push(t.bob_bit.unwrap_or(0));
        }
    }
    Ok(tally)
}

/// Runs the configured campaign, writes the record as JSON when
/// `output_path` is set, and returns it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let mut base_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let key = match &cfg.key_policy {
        KeyPolicy::Fixed { key } => Some(key.clone()),
        KeyPolicy::UniformPerExperiment => Some(KeyBits::random(cfg.n - 1, &mut base_rng)?),
        KeyPolicy::UniformPerRound => None,
    };
    let plaintext: Vec<u8> = (0..cfg.pad_length).map(|_| base_rng.gen_range(0..=1u8)).collect();

    let engine = RoundEngine::new(cfg.n)?;
    let tallies: Vec<ShardTally> = (0..cfg.shards)
        .into_par_iter()
        .map(|s| run_shard(cfg, &engine, key.as_ref(), s, cfg.pad_length))
        .collect::<Result<_>>()?;

    let mut total = ShardTally::default();
    for t in tallies {
        total.agreements += t.agreements;
        total.eve_successes += t.eve_successes;
        total.ones += t.ones;
        total.alice.extend(t.alice);
        total.bob.extend(t.bob);
    }

    let rounds = cfg.rounds;
    let mismatches = rounds - total.agreements;
    let mismatch_rate = mismatches as f64 / rounds as f64;
    let tamper = TamperStat {
        complete_rounds: rounds,
        mismatches,
        mismatch_rate,
        threshold: cfg.tamper_threshold,
        verdict: if mismatch_rate > cfg.tamper_threshold { TamperVerdict::Tampered } else { TamperVerdict::Clean },
    };
    let pad_roundtrip_ok = if cfg.pad_length > 0 {
        let mut alice_pad = PadBits::new(total.alice)?;
        let bob_pad = PadBits::new(total.bob)?;
        let c = protocol::encrypt(&plaintext, &mut alice_pad)?;
        Some(protocol::decrypt(&c, &bob_pad)? == plaintext)
    } else {
        None
    };
    let (eve_successes, empirical_ps, ps_std_error) = if cfg.strategy.is_some() {
        let p = total.eve_successes as f64 / rounds as f64;
        (Some(total.eve_successes), Some(p), Some(binomial_sigma(p, rounds)))
    } else {
        (None, None, None)
    };
    let pad_bias = total.ones as f64 / rounds as f64;
    let pad_bias_sigma = binomial_sigma(0.5, rounds);
    let record = ResultRecord {
        config: cfg.clone(),
        key,
        agreements: total.agreements,
        agreement_rate: total.agreements as f64 / rounds as f64,
        eve_successes,
        empirical_ps,
        ps_std_error,
        bound: adversary::ps_bounds(cfg.n)?,
        pad_bias,
        pad_bias_sigma,
        pad_bias_within_5_sigma: (pad_bias - 0.5).abs() <= 5.0 * pad_bias_sigma,
        pad_roundtrip_ok,
        tamper,
        wall_time: WallTime(start.elapsed()),
    };
    if let Some(path) = &cfg.output_path {
        write_record_json(path, &record)?;
    }
    Ok(record)
}

pub fn write_record_json(path: &Path, record: &ResultRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    serde_json::to_writer_pretty(&mut w, record)?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err(path))?;
    Ok(())
}

pub fn read_record_json(path: &Path) -> Result<ResultRecord> {
    let r = BufReader::new(File::open(path).map_err(io_err(path))?);
    Ok(serde_json::from_reader(r)?)
}

/// One cell of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub strategy: String,
    pub rounds: usize,
    pub seed: u64,
    pub agreement_rate: f64,
    pub empirical_ps: Option<f64>,
    pub ps_std_error: Option<f64>,
    pub p_min: f64,
    pub p_max: f64,
    pub mismatch_rate: f64,
    pub verdict: TamperVerdict,
    pub pad_bias: f64,
}

impl SweepRow {
    fn from_record(r: &ResultRecord) -> Self {
        Self {
            n: r.config.n,
            strategy: r.config.strategy.as_ref().map_or("honest", |s| s.name()).to_string(),
            rounds: r.config.rounds,
            seed: r.config.seed,
            agreement_rate: r.agreement_rate,
            empirical_ps: r.empirical_ps,
            ps_std_error: r.ps_std_error,
            p_min: r.bound.p_min,
            p_max: r.bound.p_max,
            mismatch_rate: r.tamper.mismatch_rate,
            verdict: r.tamper.verdict,
            pad_bias: r.pad_bias,
        }
    }
}

/// Seed for sweep cell `index`, derived from the base seed.
pub fn cell_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs every `(n, strategy)` cell of the cartesian product, `n` outermost.
/// `None` in `strategies` is an honest run. Rows come back in cell order.
pub fn sweep(
    base: &ExperimentConfig,
    n_values: &[usize],
    strategies: &[Option<StrategySpec>],
) -> Result<Vec<SweepRow>> {
    if n_values.is_empty() {
        return Err(HarnessError::EmptySweep("n value"));
    }
    if strategies.is_empty() {
        return Err(HarnessError::EmptySweep("strategy"));
    }
    let cells: Vec<ExperimentConfig> = n_values
        .iter()
        .flat_map(|&n| strategies.iter().map(move |s| (n, s.clone())))
        .enumerate()
        .map(|(i, (n, strategy))| ExperimentConfig {
            n,
            strategy,
            seed: cell_seed(base.seed, i),
            output_path: None,
            ..base.clone()
        })
        .collect();
    cells
        .par_iter()
        .map(|c| run_experiment(c).map(|r| SweepRow::from_record(&r)))
        .collect()
}

pub fn write_sweep_csv<W: Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(r);
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn honest(n: usize, rounds: usize) -> ExperimentConfig {
        ExperimentConfig::new(n, rounds, 7)
    }

    #[test]
    fn honest_run_agrees() {
        let mut cfg = honest(5, 1000);
        cfg.pad_length = 64;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.agreement_rate, 1.0);
        assert_eq!(r.tamper.verdict, TamperVerdict::Clean);
        assert_eq!(r.pad_roundtrip_ok, Some(true));
        assert!(r.pad_bias_within_5_sigma);
        assert!(r.empirical_ps.is_none());
    }

    #[test]
    fn same_seed_same_record() {
        let mut cfg = honest(4, 500);
        cfg.strategy = Some(StrategySpec::Optimal);
        cfg.shards = 3;
        assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
        let mut other = cfg.clone();
        other.seed = 8;
        assert_ne!(run_experiment(&cfg).unwrap(), run_experiment(&other).unwrap());
    }

    #[test]
    fn key_policies() {
        let mut cfg = honest(4, 50);
        cfg.key_policy = KeyPolicy::Fixed { key: "101".parse().unwrap() };
        assert_eq!(run_experiment(&cfg).unwrap().key.unwrap().to_string(), "101");
        cfg.key_policy = KeyPolicy::UniformPerExperiment;
        assert_eq!(run_experiment(&cfg).unwrap().key.unwrap().len(), 3);
        cfg.key_policy = KeyPolicy::Fixed { key: "10".parse().unwrap() };
        assert!(matches!(run_experiment(&cfg), Err(HarnessError::InvalidConfig(_))));
    }

    #[test]
    fn config_validation() {
        assert!(honest(2, 10).validate().is_err());
        assert!(honest(3, 0).validate().is_err());
        let mut c = honest(3, 10);
        c.pad_length = 11;
        assert!(c.validate().is_err());
        let mut c = honest(3, 10);
        c.shards = 0;
        assert!(c.validate().is_err());
        let mut c = honest(3, 10);
        c.tamper_threshold = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"n": 5, "key_policy": {"kind": "uniform-per-round"}, "rounds": 10, "seed": 1}"#,
        )
        .unwrap();
        assert_eq!(cfg.tamper_threshold, 0.25);
        assert_eq!(cfg.shards, 1);
        assert_eq!(cfg.strategy, None);
        let s: StrategySpec = serde_json::from_str(r#"{"kind": "guess-key", "key": "0110"}"#).unwrap();
        assert_eq!(s, StrategySpec::GuessKey { key: "0110".parse().unwrap() });
    }

    #[test]
    fn tamper_stat_cases() {
        assert!(matches!(tamper_detection_stat(&[], 0.25), Err(HarnessError::NoCompleteTranscripts)));
        let key: KeyBits = "01".parse().unwrap();
        let t = |a: u8, b: Option<u8>| RoundTranscript {
            round_index: 0,
            key: key.clone(),
            alice_bit: a,
            bob_bit: b,
            cipher_outcomes: vec![],
            eve_action: None,
        };
        assert!(tamper_detection_stat(&[t(0, None)], 0.25).is_err());
        let s = tamper_detection_stat(&[t(0, Some(1))], 0.25).unwrap();
        assert_eq!((s.mismatch_rate, s.verdict), (1.0, TamperVerdict::Tampered));
        let s = tamper_detection_stat(&[t(0, Some(0)), t(1, Some(1)), t(1, None)], 0.25).unwrap();
        assert_eq!((s.complete_rounds, s.mismatch_rate, s.verdict), (2, 0.0, TamperVerdict::Clean));
    }

    #[test]
    fn sweep_rows_and_csv_roundtrip() {
        let base = honest(3, 200);
        assert!(matches!(sweep(&base, &[3], &[]), Err(HarnessError::EmptySweep(_))));
        assert!(matches!(sweep(&base, &[], &[None]), Err(HarnessError::EmptySweep(_))));
        let rows = sweep(&base, &[3, 4], &[None, Some(StrategySpec::Optimal)]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(
            rows.iter().map(|r| (r.n, r.strategy.as_str())).collect::<Vec<_>>(),
            vec![(3, "honest"), (3, "optimal"), (4, "honest"), (4, "optimal")]
        );
        assert_eq!(rows[0].agreement_rate, 1.0);
        assert_eq!(rows[2].agreement_rate, 1.0);
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn record_file_roundtrip() {
        let dir = std::env::temp_dir().join(format!("psqe-harness-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut cfg = honest(3, 100);
        cfg.output_path = Some(dir.join("r.json"));
        cfg.strategy = Some(StrategySpec::InterceptResend);
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(read_record_json(cfg.output_path.as_ref().unwrap()).unwrap(), r);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
