//! Command implementations behind the `psqe` binary.
//!
//! Exit codes: 0 when every requested assertion holds, 1 on an assertion
//! failure or runtime error, 2 on a usage error (bad flags or malformed
//! inputs). Output files default to `$PSQE_OUT_DIR` when `--out` is absent.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adversary::{self, AdversaryError, AttackStrategy};
use crate::harness::{self, ExperimentConfig, HarnessError, KeyPolicy, StrategySpec, TamperVerdict};
use crate::protocol::{self, KeyBits, PadOptions, ProtocolError};
use crate::qsim::{self, DensityMatrix};
use crate::states;

pub const OUT_DIR_ENV: &str = "PSQE_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "psqe", version, about = "Reusable-key quantum encryption simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the numerical invariant suites.
    Verify(VerifyArgs),
    /// Generate a pad, encrypt a plaintext and decrypt it again.
    Run(RunArgs),
    /// Simulate an eavesdropping strategy and report its success rate.
    Attack(AttackArgs),
    /// Compare closed-form and instrumented circuit sizes.
    Resources(ResourcesArgs),
    /// Run an (n, strategy) grid of seeded experiments.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyScope {
    Theorem1,
    Theorem2,
    Properties,
    Lemma1,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value = "all")]
    pub scope: VerifyScope,
    #[arg(long, default_value_t = 6)]
    pub n_max: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Test-only: checks the cipher state without duplicate qubits, which
    /// must make the suite fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub n: usize,
    /// `n - 1` bits, as `0`/`1` digits or `0x`-prefixed hex.
    #[arg(long)]
    pub key: String,
    /// Bits as `0`/`1` digits, or `0x` hex together with `--plaintext-len`.
    #[arg(long)]
    pub plaintext: String,
    #[arg(long)]
    pub plaintext_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Test-only: forces Alice's pad bits instead of sampling them.
    #[arg(long)]
    pub inject_pad: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    /// passive, guess-key, intercept-resend or optimal.
    #[arg(long)]
    pub strategy: String,
    /// Key guessed by the guess-key strategy.
    #[arg(long)]
    pub guess: Option<String>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long, default_value_t = harness::DEFAULT_TAMPER_THRESHOLD)]
    pub tamper_threshold: f64,
}

#[derive(Debug, Args)]
pub struct ResourcesArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub key: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base experiment config (JSON). Flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long = "n", value_delimiter = ',')]
    pub n_values: Vec<usize>,
    /// Comma-separated; `honest` means no eavesdropper.
    #[arg(long = "strategy", value_delimiter = ',')]
    pub strategies: Vec<String>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shards: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Assertion(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Assertion(_) | CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Assertion(m) => write!(f, "assertion failed: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ProtocolError> for CliError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::Io(_) | ProtocolError::Json(_) | ProtocolError::Sim(_) | ProtocolError::State(_) => {
                CliError::Runtime(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<AdversaryError> for CliError {
    fn from(e: AdversaryError) -> Self {
        match e {
            AdversaryError::Protocol(p) => p.into(),
            AdversaryError::UnsupportedN { .. }
            | AdversaryError::TooFewRounds { .. }
            | AdversaryError::GuessLength { .. }
            | AdversaryError::UnknownStrategy(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidConfig(_) | HarnessError::EmptySweep(_) => CliError::Usage(e.to_string()),
            HarnessError::Protocol(p) => p.into(),
            HarnessError::Adversary(a) => a.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `args` (including the program name), runs the command, writes
/// its report to `out` and returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cmd: Command, out: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Verify(a) => cmd_verify(&a, out),
        Command::Run(a) => cmd_run(&a, out),
        Command::Attack(a) => cmd_attack(&a, out),
        Command::Resources(a) => cmd_resources(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
    }
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub max_deviation: f64,
}

impl CheckResult {
    fn within(name: String, deviation: f64, tolerance: f64) -> Self {
        Self { name, passed: deviation <= tolerance, max_deviation: deviation }
    }
}

fn theorem1_checks(n_max: usize, seed: u64, fault: bool) -> Result<Vec<CheckResult>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    for n in 3..=n_max {
        let keys: Vec<KeyBits> = if n <= 6 {
            (0..1usize << (n - 1)).map(|v| KeyBits::from_index(v, n - 1)).collect::<Result<_, _>>()?
        } else {
            (0..20).map(|_| KeyBits::random(n - 1, &mut rng)).collect::<Result<_, _>>()?
        };
        let target = DensityMatrix::maximally_mixed(n - 1);
        let mut worst = 0.0f64;
        for key in &keys {
            let rho = if fault {
                adversary::reduced_cipher_state_without_duplicates(n, key)?
            } else {
                adversary::reduced_cipher_state(n, key)?
            };
            worst = worst.max(rho.max_abs_diff(&target));
        }
        checks.push(CheckResult::within(format!("theorem1 n={n} keys={}", keys.len()), worst, qsim::tol::STATE));
    }
    for n in 3..=n_max.min(5) {
        let key = KeyBits::zeros(n - 1)?;
        let dev = adversary::reduced_cipher_state_without_duplicates(n, &key)?
            .max_abs_diff(&DensityMatrix::maximally_mixed(n - 1));
        checks.push(CheckResult { name: format!("duplicates-needed n={n}"), passed: dev > 0.01, max_deviation: dev });
    }
    Ok(checks)
}

fn theorem2_checks(n_max: usize) -> Result<Vec<CheckResult>, CliError> {
    let mut checks = Vec::new();
    for n in 3..=n_max {
        let rho = adversary::rho_e_explicit(n)?;
        let numeric = qsim::eigensystem(rho.matrix()).map_err(runtime)?;
        let closed = adversary::rho_e_eigensystem_closed(n)?.eigenvalues_ascending();
        let dev = numeric.values.iter().zip(&closed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        checks.push(CheckResult::within(format!("theorem2 eigenvalues n={n}"), dev, 1e-9));

        let bounds = adversary::ps_bounds(n)?;
        let (lo, hi) = adversary::half_spectrum_sums(&numeric.values);
        let dev = (lo - bounds.p_min).abs().max((hi - bounds.p_max).abs());
        checks.push(CheckResult::within(format!("theorem2 half-sums n={n}"), dev, 1e-9));

        let u = adversary::optimal_attack_unitary(n)?;
        let dev = (adversary::predicted_success(n, &u)? - bounds.p_max).abs();
        checks.push(CheckResult::within(format!("theorem2 optimal attack n={n}"), dev, 1e-9));
    }
    Ok(checks)
}

fn property_checks(n_max: usize) -> Result<Vec<CheckResult>, CliError> {
    let mut checks = Vec::new();
    for n in 2..=n_max {
        let p1 = states::check_property1(n).map_err(runtime)?;
        checks.push(CheckResult {
            name: format!("property1 n={n}"),
            passed: p1.holds,
            max_deviation: p1.max_deviation,
        });
        let p2 = states::check_property2(n).map_err(runtime)?;
        checks.push(CheckResult { name: format!("property2 n={n}"), passed: p2, max_deviation: 0.0 });
    }
    Ok(checks)
}

/// Random Hermitian matrices of size `2..=16` against random orthonormal
/// subsets; deviation is the largest bound violation (0 when all hold).
pub fn lemma1_trials(trials: usize, seed: u64) -> Result<(usize, f64), CliError> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let dim = rng.gen_range(2..=16);
        let k = rng.gen_range(1..=dim);
        let h = qsim::random_hermitian(dim, &mut rng);
        let subset = qsim::random_orthonormal(dim, k, &mut rng).map_err(runtime)?;
        let o = adversary::lemma1_check(&h, &subset)?;
        if !o.holds {
            violations += 1;
        }
        worst = worst.max(o.lower - o.value).max(o.value - o.upper);
    }
    Ok((violations, worst.max(0.0)))
}

fn lemma1_checks(seed: u64) -> Result<Vec<CheckResult>, CliError> {
    let trials = 1000;
    let (violations, worst) = lemma1_trials(trials, seed)?;
    Ok(vec![CheckResult {
        name: format!("lemma1 trials={trials} violations={violations}"),
        passed: violations == 0,
        max_deviation: worst,
    }])
}

/// Runs the checks for `scope`. `n_max` must lie in `[3, 8]`.
pub fn verify_checks(scope: VerifyScope, n_max: usize, seed: u64, fault: bool) -> Result<Vec<CheckResult>, CliError> {
    if !(3..=8).contains(&n_max) {
        return Err(CliError::Usage(format!("--n-max must be in [3, 8], got {n_max}")));
    }
    let mut checks = Vec::new();
    let all = scope == VerifyScope::All;
    if all || scope == VerifyScope::Theorem1 {
        checks.extend(theorem1_checks(n_max, seed, fault)?);
    }
    if all || scope == VerifyScope::Theorem2 {
        checks.extend(theorem2_checks(n_max)?);
    }
    if all || scope == VerifyScope::Properties {
        checks.extend(property_checks(n_max)?);
    }
    if all || scope == VerifyScope::Lemma1 {
        checks.extend(lemma1_checks(seed)?);
    }
    Ok(checks)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> CliResult {
    let checks = verify_checks(a.scope, a.n_max, a.seed, a.inject_fault)?;
    let mut failed = 0;
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        failed += !c.passed as usize;
        writeln!(out, "{tag} {} max_dev={:.3e}", c.name, c.max_deviation).map_err(runtime)?;
    }
    writeln!(out, "{} checks, {} failed", checks.len(), failed).map_err(runtime)?;
    if failed > 0 {
        return Err(CliError::Assertion(format!("{failed} verification checks failed")));
    }
    Ok(())
}

fn parse_key(s: &str, n: usize) -> Result<KeyBits, CliError> {
    if n < 3 {
        return Err(CliError::Usage(format!("--n must be at least 3, got {n}")));
    }
    let bits = protocol::parse_bit_arg(s, Some(n - 1))?;
    if bits.len() != n - 1 {
        return Err(CliError::Usage(format!("key has {} bits, --n {n} needs {}", bits.len(), n - 1)));
    }
    Ok(KeyBits::new(bits)?)
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write) -> CliResult {
    let key = parse_key(&a.key, a.n)?;
    if a.plaintext.is_empty() {
        return Err(CliError::Usage("plaintext is empty".into()));
    }
    let plaintext = protocol::parse_bit_arg(&a.plaintext, a.plaintext_len)?;
    let inject = a.inject_pad.as_deref().map(|s| protocol::parse_bit_arg(s, Some(plaintext.len()))).transpose()?;
    if let Some(b) = &inject {
        if b.len() != plaintext.len() {
            return Err(CliError::Usage(format!("--inject-pad has {} bits, plaintext has {}", b.len(), plaintext.len())));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let opts = PadOptions { inject, ..PadOptions::default() };
    let mut pads = protocol::generate_pad_with(a.n, &key, plaintext.len(), None, &opts, &mut rng)?;
    let pad_text = protocol::format_bits(pads.alice.bits());
    let cipher = protocol::encrypt(&plaintext, &mut pads.alice)?;
    let recovered = protocol::decrypt(&cipher, &pads.bob)?;
    let (c, p, r) = (protocol::format_bits(cipher.bits()), protocol::format_bits(&plaintext), protocol::format_bits(&recovered));
    match a.format {
        Some(Format::Json) => {
            let v = serde_json::json!({ "n": a.n, "key": key, "pad": pad_text, "plaintext": p, "ciphertext": c, "recovered": r });
            writeln!(out, "{v}").map_err(runtime)?;
        }
        Some(Format::Csv) => {
            writeln!(out, "n,key,pad,plaintext,ciphertext,recovered\n{},{key},{pad_text},{p},{c},{r}", a.n).map_err(runtime)?;
        }
        None => {
            writeln!(out, "pad        {pad_text}\nciphertext {c}\nrecovered  {r}").map_err(runtime)?;
        }
    }
    if recovered != plaintext {
        return Err(CliError::Assertion(format!("recovered {r} differs from plaintext {p}")));
    }
    Ok(())
}

fn default_out(name: &str) -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(name))
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(runtime)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn cmd_attack(a: &AttackArgs, out: &mut dyn Write) -> CliResult {
    let guess = a.guess.as_deref().map(|g| parse_key(g, a.n)).transpose()?;
    let strategy: AttackStrategy = adversary::strategy_from_name(&a.strategy, guess)?;
    if a.rounds == 0 {
        return Err(CliError::Usage("--rounds must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let report = adversary::simulate_attack(&strategy, a.n, a.rounds, &mut rng)?;
    let verdict = if report.mismatch_rate > a.tamper_threshold { TamperVerdict::Tampered } else { TamperVerdict::Clean };
    writeln!(
        out,
        "strategy={} n={} rounds={} empirical_ps={:.6} std_error={:.6} p_min={:.6} p_max={:.6} mismatch_rate={:.6} verdict={}",
        report.strategy,
        report.n,
        report.rounds,
        report.empirical_ps,
        report.std_error,
        report.bound.p_min,
        report.bound.p_max,
        report.mismatch_rate,
        if verdict == TamperVerdict::Tampered { "tampered" } else { "clean" },
    )
    .map_err(runtime)?;
    let ext = match a.format {
        Format::Json => "json",
        Format::Csv => "csv",
    };
    let path = a.out.clone().or_else(|| default_out(&format!("attack-{}-n{}-seed{}.{ext}", report.strategy, a.n, a.seed)));
    if let Some(path) = path {
        let mut w = create(&path)?;
        match a.format {
            Format::Json => adversary::write_report_json(&mut w, &report)?,
            Format::Csv => adversary::write_reports_csv(&mut w, std::slice::from_ref(&report))?,
        }
        w.flush().map_err(runtime)?;
        writeln!(out, "wrote {}", path.display()).map_err(runtime)?;
    }
    Ok(())
}

fn cmd_resources(a: &ResourcesArgs, out: &mut dyn Write) -> CliResult {
    let key = parse_key(&a.key, a.n)?;
    let formula = protocol::circuit_resources(a.n, key.ones())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let counted = protocol::instrumented_resources(a.n, &key, &mut rng)?;
    writeln!(out, "{:<12} {:>7} {:>5} {:>9}", "source", "qubits", "cnot", "hadamard").map_err(runtime)?;
    for (label, r) in [("formula", formula), ("instrumented", counted)] {
        writeln!(out, "{label:<12} {:>7} {:>5} {:>9}", r.qubits, r.cnots, r.hadamards).map_err(runtime)?;
    }
    if formula != counted {
        return Err(CliError::Assertion("formula and instrumented counts differ".into()));
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult {
    let mut base = match &a.config {
        Some(p) => ExperimentConfig::from_json_file(p)?,
        None => ExperimentConfig::new(3, 10_000, 0),
    };
    if let Some(r) = a.rounds {
        base.rounds = r;
    }
    if let Some(s) = a.seed {
        base.seed = s;
    }
    if let Some(s) = a.shards {
        base.shards = s;
    }
    if !a.n_values.is_empty() && matches!(base.key_policy, KeyPolicy::Fixed { .. }) {
        return Err(CliError::Usage("a fixed key cannot be swept over several n".into()));
    }
    let n_values = if a.n_values.is_empty() { vec![base.n] } else { a.n_values.clone() };
    let strategies: Vec<Option<StrategySpec>> = if a.strategies.is_empty() {
        vec![base.strategy.clone()]
    } else {
        a.strategies
            .iter()
            .map(|s| if s == "honest" { Ok(None) } else { StrategySpec::from_name(s, None).map(Some) })
            .collect::<Result<_, _>>()?
    };
    let rows = harness::sweep(&base, &n_values, &strategies)?;
    let mut text = Vec::new();
    match a.format {
        Format::Csv => harness::write_sweep_csv(&mut text, &rows)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut text, &rows).map_err(runtime)?;
            text.push(b'\n');
        }
    }
    let ext = if a.format == Format::Csv { "csv" } else { "json" };
    match a.out.clone().or_else(|| default_out(&format!("sweep-seed{}.{ext}", base.seed))) {
        Some(path) => {
            let mut w = create(&path)?;
            w.write_all(&text).and_then(|_| w.flush()).map_err(runtime)?;
            writeln!(out, "wrote {} rows to {}", rows.len(), path.display()).map_err(runtime)?;
        }
        None => out.write_all(&text).map_err(runtime)?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run_cli(std::iter::once("psqe").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn golden_run() {
        let (code, text) = run(&["run", "--n", "5", "--key", "0110", "--plaintext", "10100", "--inject-pad", "01001"]);
        assert_eq!(code, 0);
        assert!(text.contains("ciphertext 11101"));
        assert!(text.contains("recovered  10100"));
    }

    #[test]
    fn hex_inputs() {
        let (code, text) = run(&["run", "--n", "5", "--key", "0x6", "--plaintext", "0x14", "--plaintext-len", "5", "--inject-pad", "0x09"]);
        assert_eq!(code, 0, "{text}");
        assert!(text.contains("ciphertext 11101"));
        let (code, _) = run(&["run", "--n", "5", "--key", "0110", "--plaintext", "0x14"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run(&["run", "--n", "5", "--key", "0110", "--plaintext", ""]).0, 2);
        assert_eq!(run(&["run", "--n", "5", "--key", "011", "--plaintext", "1"]).0, 2);
        assert_eq!(run(&["attack", "--strategy", "bogus", "--n", "3"]).0, 2);
        assert_eq!(run(&["verify", "all", "--n-max", "9"]).0, 2);
        assert_eq!(run(&["frobnicate"]).0, 2);
    }

    #[test]
    fn resources_table() {
        let (code, text) = run(&["resources", "--n", "5", "--key", "0110"]);
        assert_eq!(code, 0);
        assert!(text.contains("formula            9     8        10"));
        assert!(text.contains("instrumented       9     8        10"));
    }

    #[test]
    fn verify_and_fault() {
        assert_eq!(run(&["verify", "theorem1", "--n-max", "4"]).0, 0);
        let (code, text) = run(&["verify", "theorem1", "--n-max", "4", "--inject-fault"]);
        assert_eq!(code, 1);
        assert!(text.contains("FAIL theorem1 n=3"));
    }
}
