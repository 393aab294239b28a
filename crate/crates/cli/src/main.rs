//! Deterministic command-line front end for the library. Every
//! computation sits behind a subcommand with JSON or CSV output, any
//! sampled run takes an explicit seed, and identical configs reproduce
//! identical bytes. Exit codes: 0 success, 2 invalid input, 3 numerical
//! failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use modsym::arith::{
    cf_expand, cf_expand_quadratic, cf_value, lyapunov_estimate, ArithError, ConvergentSeq,
    Rational,
};
use modsym::cosets::{build_cosets, Convention, CosetError, CosetSpace, SubgroupSpec};
use modsym::dynamics::{
    asymptotic_intersection, gauss_kuzmin_digits, levy_average, limiting_symbol,
    periodic_limiting_symbol, second_moment, DynamicsError, LevyKernel,
};
use modsym::homology::{build_homology, HomologyError};
use modsym::ktheory::{
    coinvariants_depth, k_groups, markov_matrix, trace_eval, AbelianGroup, Cylinder, KTheoryError,
};
use modsym::transfer::{
    assemble, gauss_problem_iterate, hausdorff_dimension, leading_eigen, leading_lambda,
    lyapunov_from_spectrum, AlphabetSpec, TransferError,
};
use modsym::zeta::{
    enumerate_classes, fredholm_det, matrix_trace, orbit_trace, selberg_zero, zeta_product,
    ZetaError,
};

const SCHEMA: &str = "modsym/1";

enum CliError {
    Usage(String),
    Numerical(String),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Numerical(_) => "numerical",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<ArithError> for CliError {
    fn from(e: ArithError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<CosetError> for CliError {
    fn from(e: CosetError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<HomologyError> for CliError {
    fn from(e: HomologyError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<TransferError> for CliError {
    fn from(e: TransferError) -> Self {
        match e {
            TransferError::SigmaOutOfDomain(_)
            | TransferError::GridTooSmall(_)
            | TransferError::ZetaDomain { .. }
            | TransferError::BadAlphabet(_)
            | TransferError::BadDensity(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ZetaError> for CliError {
    fn from(e: ZetaError) -> Self {
        match e {
            ZetaError::TooManyWords(_) | ZetaError::BadParameter(_) => {
                CliError::Usage(e.to_string())
            }
            ZetaError::Transfer(t) => t.into(),
            ZetaError::Coset(c) => c.into(),
            ZetaError::Arith(a) => a.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<KTheoryError> for CliError {
    fn from(e: KTheoryError) -> Self {
        match e {
            KTheoryError::BadParameter(_) | KTheoryError::SizeGuard(_) => {
                CliError::Usage(e.to_string())
            }
            KTheoryError::Transfer(t) => t.into(),
            KTheoryError::Coset(c) => c.into(),
            KTheoryError::UnnormalizedSpectralData(_) => CliError::Numerical(e.to_string()),
        }
    }
}

fn parse_subgroup(s: &str) -> Result<SubgroupSpec, CliError> {
    if s == "full" {
        return Ok(SubgroupSpec::Full);
    }
    if let Some(level) = s.strip_prefix("gamma0:") {
        let n: u32 = level
            .parse()
            .map_err(|_| usage(format!("bad gamma0 level: {level}")))?;
        if n == 0 {
            return Err(usage("gamma0 level must be positive"));
        }
        return Ok(SubgroupSpec::Gamma0(n));
    }
    Err(usage(format!("unknown subgroup {s:?}; use \"full\" or \"gamma0:N\"")))
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>, CliError> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<u64>()
                .map_err(|_| usage(format!("bad digit {part:?}")))
        })
        .collect()
}

fn parse_i64_list(s: &str) -> Result<Vec<i64>, CliError> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<i64>()
                .map_err(|_| usage(format!("bad integer {part:?}")))
        })
        .collect()
}

fn parse_alphabet(s: &str, tail_cutoff: u64) -> Result<AlphabetSpec, CliError> {
    if s == "full" {
        return Ok(AlphabetSpec::Full { tail_cutoff, taylor_tail_degree: 2 });
    }
    if let Some((lo, hi)) = s.split_once("..") {
        if lo != "1" {
            return Err(usage("alphabet ranges start at 1, e.g. \"1..5\""));
        }
        let n: u64 = hi
            .parse()
            .map_err(|_| usage(format!("bad alphabet bound {hi:?}")))?;
        if n == 0 {
            return Err(usage("alphabet bound must be positive"));
        }
        return Ok(AlphabetSpec::contiguous(n));
    }
    Ok(AlphabetSpec::Finite(parse_u64_list(s)?))
}

// The digit list behind a finite alphabet, for commands that cannot
// enumerate the full shift.
fn finite_digits(alphabet: &AlphabetSpec) -> Result<Vec<u64>, CliError> {
    match alphabet {
        AlphabetSpec::Finite(digits) => Ok(digits.clone()),
        AlphabetSpec::Full { .. } => {
            Err(usage("this computation needs a finite alphabet"))
        }
    }
}

fn parse_rational(s: &str) -> Result<Rational, CliError> {
    let (num, den) = s
        .split_once('/')
        .ok_or_else(|| usage(format!("bad rational {s:?}; use \"p/q\"")))?;
    let p = BigInt::from_str(num.trim()).map_err(|_| usage(format!("bad numerator {num:?}")))?;
    let q = BigInt::from_str(den.trim()).map_err(|_| usage(format!("bad denominator {den:?}")))?;
    if q == BigInt::from(0) {
        return Err(usage("denominator must be nonzero"));
    }
    Ok(Rational::new(p, q))
}

// "a:b:steps" with steps points including both endpoints.
fn parse_scan(s: &str) -> Result<(f64, f64, usize), CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("bad scan {s:?}; use \"start:end:steps\"")));
    }
    let a: f64 = parts[0].parse().map_err(|_| usage(format!("bad scan start {:?}", parts[0])))?;
    let b: f64 = parts[1].parse().map_err(|_| usage(format!("bad scan end {:?}", parts[1])))?;
    let steps: usize =
        parts[2].parse().map_err(|_| usage(format!("bad scan steps {:?}", parts[2])))?;
    if steps == 0 || steps > 100_000 {
        return Err(usage("scan steps must be in 1..=100000"));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(usage("scan endpoints must be finite"));
    }
    Ok((a, b, steps))
}

fn parse_bracket(s: &str) -> Result<(f64, f64), CliError> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("bad bracket {s:?}; use \"lo:hi\"")))?;
    let lo: f64 = lo.parse().map_err(|_| usage(format!("bad bracket low {lo:?}")))?;
    let hi: f64 = hi.parse().map_err(|_| usage(format!("bad bracket high {hi:?}")))?;
    Ok((lo, hi))
}

// f64 of an exact rational through the decimal strings, good to the
// display precision needed here.
fn rat_f64(x: &Rational) -> f64 {
    let num: f64 = x.numer().to_string().parse().unwrap_or(f64::NAN);
    let den: f64 = x.denom().to_string().parse().unwrap_or(f64::NAN);
    num / den
}

fn rationals_json(xs: &[Rational]) -> Value {
    json!(xs.iter().map(|x| x.to_string()).collect::<Vec<_>>())
}

fn group_json(g: &AbelianGroup) -> Value {
    json!({
        "free_rank": g.free_rank,
        "torsion": g.torsion.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
        "display": g.to_string(),
    })
}

#[derive(Parser)]
#[command(
    name = "modsym",
    version,
    about = "Continued-fraction dynamics, modular symbol homology, transfer \
             operator spectra, zeta functions, and boundary K-theory"
)]
struct Cli {
    /// JSON object of long flag names to values, applied as defaults
    /// for flags not given on the command line.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Write output to this file instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format; csv is available for scan-producing commands.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConventionArg {
    Pgl,
    Psl,
}

impl ConventionArg {
    fn convention(self) -> Convention {
        match self {
            ConventionArg::Pgl => Convention::Pgl,
            ConventionArg::Psl => Convention::Psl,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ConventionArg::Pgl => "pgl",
            ConventionArg::Psl => "psl",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    /// 1/q^3.
    InvCube,
    /// (q + q')/q^4.
    SumOverQuartic,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitialArg {
    /// Constant density.
    Uniform,
    /// Density 1 + x.
    Ramp,
}

#[derive(Args)]
struct SpaceArgs {
    /// Coset space: "full" or "gamma0:N".
    #[arg(long, default_value = "full")]
    subgroup: String,
}

impl SpaceArgs {
    fn build(&self, convention: Convention) -> Result<CosetSpace, CliError> {
        Ok(build_cosets(&parse_subgroup(&self.subgroup)?, convention)?)
    }
}

#[derive(Args)]
struct AlphabetArgs {
    /// Digit alphabet: "full", "1..N", or a comma list like "1,2,5".
    #[arg(long, default_value = "full")]
    alphabet: String,
    /// Where the full-alphabet digit tail switches to series summation.
    #[arg(long, default_value_t = 10_000)]
    tail_cutoff: u64,
}

impl AlphabetArgs {
    fn build(&self) -> Result<AlphabetSpec, CliError> {
        parse_alphabet(&self.alphabet, self.tail_cutoff)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Continued-fraction expansions, convergents, and word values.
    Cf(CfArgs),
    /// Coset space of a finite-index subgroup.
    Coset(CosetArgs),
    /// Relative homology presentation on Manin symbols.
    Homology(HomologyArgs),
    /// Limiting modular symbols: exact periodic classes or seeded
    /// Birkhoff sampling.
    Limsym(LimsymArgs),
    /// Asymptotic intersection numbers along sampled geodesics.
    Intersect(IntersectArgs),
    /// Transfer operator spectrum at one sigma or over a sweep.
    Transfer(TransferCmdArgs),
    /// Hausdorff dimension of a restricted-digit invariant set.
    Dimension(DimensionArgs),
    /// Lyapunov exponent from the spectrum, with optional Birkhoff
    /// cross-check.
    Lyapunov(LyapunovArgs),
    /// Iterates of the generalized Gauss problem.
    GaussIterate(GaussIterateArgs),
    /// Fredholm determinant, zeta product, class tables, zero location.
    Zeta(ZetaArgs),
    /// Orbit-sum traces against discretized-operator traces.
    TraceCheck(TraceCheckArgs),
    /// Levy average: unit-interval quadrature vs coprime-pair sum.
    Levy(LevyArgs),
    /// Markov matrix, K-groups, coinvariants, and the canonical trace.
    Ktheory(KtheoryArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Cf(_) => "cf",
            Command::Coset(_) => "coset",
            Command::Homology(_) => "homology",
            Command::Limsym(_) => "limsym",
            Command::Intersect(_) => "intersect",
            Command::Transfer(_) => "transfer",
            Command::Dimension(_) => "dimension",
            Command::Lyapunov(_) => "lyapunov",
            Command::GaussIterate(_) => "gauss-iterate",
            Command::Zeta(_) => "zeta",
            Command::TraceCheck(_) => "trace-check",
            Command::Levy(_) => "levy",
            Command::Ktheory(_) => "ktheory",
        }
    }
}

#[derive(Args)]
struct CfArgs {
    /// Rational in (0,1) as "p/q".
    #[arg(long)]
    rational: Option<String>,
    /// Quadratic irrational (p + sqrt(d))/q as "p,d,q".
    #[arg(long)]
    quadratic: Option<String>,
    /// Digit word "a1,a2,..." to fold back into a rational.
    #[arg(long)]
    digits: Option<String>,
}

#[derive(Args)]
struct CosetArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Matrix group the cosets live in.
    #[arg(long, value_enum, default_value_t = ConventionArg::Pgl)]
    convention: ConventionArg,
}

#[derive(Args)]
struct HomologyArgs {
    #[command(flatten)]
    space: SpaceArgs,
}

#[derive(Args)]
struct LimsymArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Purely periodic digit word "a1,a2,..." for the exact class.
    #[arg(long)]
    period: Option<String>,
    /// Seed for Gauss-law digit sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Birkhoff orbit length.
    #[arg(long, default_value_t = 10_000)]
    orbit_n: usize,
    /// Starting coset label.
    #[arg(long, default_value_t = 0)]
    t0: usize,
    /// Grid nodes for the spectral Lyapunov constant.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
}

#[derive(Args)]
struct IntersectArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Cycle chain: comma list of integer coefficients per coset label.
    #[arg(long)]
    chain: String,
    /// Seed for Gauss-law digit sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Birkhoff orbit length.
    #[arg(long, default_value_t = 10_000)]
    orbit_n: usize,
    /// Starting coset label.
    #[arg(long, default_value_t = 0)]
    t0: usize,
    /// Grid nodes for the spectral Lyapunov constant.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
}

#[derive(Args)]
struct TransferCmdArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    alphabet: AlphabetArgs,
    /// Operator parameter.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Sweep "start:end:steps" reporting the leading eigenvalue.
    #[arg(long)]
    sigma_range: Option<String>,
    /// Collocation nodes per coset label.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
}

#[derive(Args)]
struct DimensionArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Finite digit alphabet, e.g. "1..2".
    #[arg(long, default_value = "1..2")]
    alphabet: String,
    /// Collocation nodes per coset label.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
}

#[derive(Args)]
struct LyapunovArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Digit alphabet: "full", "1..N", or a comma list.
    #[arg(long, default_value = "full")]
    alphabet: String,
    /// Shorthand for --alphabet full.
    #[arg(long, conflicts_with = "alphabet")]
    full: bool,
    /// Where the full-alphabet digit tail switches to series summation.
    #[arg(long, default_value_t = 10_000)]
    tail_cutoff: u64,
    /// Collocation nodes per coset label.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
    /// Also estimate from a sampled orbit of this length.
    #[arg(long)]
    orbit_n: Option<usize>,
    /// Seed for Gauss-law digit sampling.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GaussIterateArgs {
    #[command(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    alphabet: AlphabetArgs,
    /// Collocation nodes per coset label.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
    /// Number of operator applications.
    #[arg(long, default_value_t = 12)]
    steps: usize,
    /// Initial density shape.
    #[arg(long, value_enum, default_value_t = InitialArg::Uniform)]
    initial: InitialArg,
}

#[derive(Args)]
struct ZetaArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Digit alphabet; the zeta product needs it finite.
    #[arg(long, default_value = "1,2")]
    alphabet: String,
    /// Where the full-alphabet digit tail switches to series summation.
    #[arg(long, default_value_t = 10_000)]
    tail_cutoff: u64,
    /// Evaluation point.
    #[arg(long, default_value_t = 1.5)]
    s: f64,
    /// Sweep "start:end:steps" comparing determinant and product.
    #[arg(long)]
    s_range: Option<String>,
    /// Locate a determinant zero by bisection on "lo:hi" instead.
    #[arg(long)]
    find_zero: Option<String>,
    /// Trace series depth for the Fredholm determinant.
    #[arg(long, default_value_t = 8)]
    l_max: usize,
    /// Geodesic length cutoff for the product side.
    #[arg(long, default_value_t = 6.0)]
    length_cutoff: f64,
    /// Square the operator, pairing word lengths of equal parity.
    #[arg(long)]
    psl_square: bool,
    /// Include the table of cyclic word classes.
    #[arg(long)]
    classes: bool,
    /// Collocation nodes per coset label.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
}

#[derive(Args)]
struct TraceCheckArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Finite digit alphabet.
    #[arg(long, default_value = "1,2")]
    alphabet: String,
    /// Operator parameter.
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Compare traces for lengths 1..=max_length.
    #[arg(long, default_value_t = 4)]
    max_length: usize,
    /// Collocation nodes per coset label.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
}

#[derive(Args)]
struct LevyArgs {
    /// Kernel f(q, q').
    #[arg(long, value_enum, default_value_t = KernelArg::InvCube)]
    kernel: KernelArg,
    /// Quadrature uses 2^depth panels of 16-point Gauss-Legendre.
    #[arg(long, default_value_t = 10)]
    depth: u32,
    /// Coprime-pair sum runs over q <= this cutoff.
    #[arg(long, default_value_t = 4000)]
    pair_cutoff: u64,
}

#[derive(Args)]
struct KtheoryArgs {
    #[command(flatten)]
    space: SpaceArgs,
    /// Number of digits N of the restricted shift.
    #[arg(long, default_value_t = 2)]
    digits: u64,
    /// Report coinvariants for depths 0..=depth.
    #[arg(long, default_value_t = 3)]
    depth: usize,
    /// Collocation nodes for the canonical trace.
    #[arg(long, default_value_t = 32)]
    nodes: usize,
}

struct Outcome {
    config: Value,
    result: Value,
    csv: Option<String>,
}

fn run_cf(args: &CfArgs) -> Result<Outcome, CliError> {
    let modes =
        [args.rational.is_some(), args.quadratic.is_some(), args.digits.is_some()];
    if modes.iter().filter(|&&m| m).count() != 1 {
        return Err(usage("give exactly one of --rational, --quadratic, --digits"));
    }
    if let Some(input) = &args.rational {
        let x = parse_rational(input)?;
        let digits = cf_expand(&x)?;
        let conv = ConvergentSeq::new(&digits)?;
        let convergents: Vec<Value> = (1..=conv.len())
            .map(|k| {
                let (p, q) = conv.pair(k);
                json!({
                    "k": k,
                    "p": p.to_string(),
                    "q": q.to_string(),
                    "value": rat_f64(&conv.value(k)),
                })
            })
            .collect();
        return Ok(Outcome {
            config: json!({"mode": "rational", "input": input}),
            result: json!({
                "digits": digits,
                "convergents": convergents,
                "value": {"exact": x.to_string(), "float": rat_f64(&x)},
                "lyapunov_estimate": conv.lyapunov(),
            }),
            csv: None,
        });
    }
    if let Some(input) = &args.quadratic {
        let parts = parse_i64_list(input)?;
        if parts.len() != 3 {
            return Err(usage("quadratic input is \"p,d,q\" for (p + sqrt(d))/q"));
        }
        let cf = cf_expand_quadratic(
            &BigInt::from(parts[0]),
            &BigInt::from(parts[1]),
            &BigInt::from(parts[2]),
        )?;
        return Ok(Outcome {
            config: json!({"mode": "quadratic", "input": input}),
            result: json!({"preperiod": cf.preperiod, "period": cf.period}),
            csv: None,
        });
    }
    let input = args.digits.as_ref().expect("mode checked");
    let digits = parse_u64_list(input)?;
    let value = cf_value(&digits)?;
    Ok(Outcome {
        config: json!({"mode": "digits", "input": input}),
        result: json!({
            "value": {"exact": value.to_string(), "float": rat_f64(&value)},
        }),
        csv: None,
    })
}

fn run_coset(args: &CosetArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(args.convention.convention())?;
    Ok(Outcome {
        config: json!({
            "subgroup": args.space.subgroup,
            "convention": args.convention.name(),
        }),
        result: space.to_json(),
        csv: None,
    })
}

fn run_homology(args: &HomologyArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Psl)?;
    let model = build_homology(&space)?;
    let mut result = model.to_json();
    let phi: Vec<Value> =
        (0..space.size()).map(|s| rationals_json(&model.phi(s))).collect();
    result["phi"] = json!(phi);
    Ok(Outcome {
        config: json!({"subgroup": args.space.subgroup, "convention": "psl"}),
        result,
        csv: None,
    })
}

// Homology commands sample Gauss-law digits and average the symbol
// observable along the orbit; the Lyapunov normalization is the
// spectral constant of the full shift.
fn sampled_inputs(
    seed: Option<u64>,
    orbit_n: usize,
    nodes: usize,
) -> Result<(Vec<u64>, f64), CliError> {
    let seed = seed.ok_or_else(|| usage("--seed is required for sampled runs"))?;
    if orbit_n == 0 {
        return Err(usage("--orbit-n must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let digits = gauss_kuzmin_digits(&mut rng, orbit_n);
    let trivial = build_cosets(&SubgroupSpec::Full, Convention::Pgl)?;
    let lyapunov = lyapunov_from_spectrum(&AlphabetSpec::full(), &trivial, nodes)?;
    Ok((digits, lyapunov))
}

fn run_limsym(args: &LimsymArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Psl)?;
    let model = build_homology(&space)?;
    if let Some(period) = &args.period {
        let word = parse_u64_list(period)?;
        let symbol = periodic_limiting_symbol(&model, &word, args.t0)?;
        return Ok(Outcome {
            config: json!({
                "subgroup": args.space.subgroup,
                "mode": "periodic",
                "period": period,
                "t0": args.t0,
            }),
            result: json!({
                "period_length": symbol.period_length,
                "repetitions": symbol.repetitions,
                "class_sum": symbol.class_sum.iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "log_norm": symbol.log_norm,
                "value": symbol.value,
                "basis_labels": model.basis_labels(),
            }),
            csv: None,
        });
    }
    let (digits, lyapunov) = sampled_inputs(args.seed, args.orbit_n, args.nodes)?;
    let est = limiting_symbol(&model, &digits, args.t0, args.orbit_n, lyapunov)?;
    Ok(Outcome {
        config: json!({
            "subgroup": args.space.subgroup,
            "mode": "sampled",
            "seed": args.seed,
            "orbit_n": args.orbit_n,
            "t0": args.t0,
            "nodes": args.nodes,
        }),
        result: json!({
            "value": est.value,
            "error_estimate": est.error_estimate,
            "n": est.n,
            "lyapunov": lyapunov,
            "basis_labels": model.basis_labels(),
        }),
        csv: None,
    })
}

fn run_intersect(args: &IntersectArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Psl)?;
    let model = build_homology(&space)?;
    let chain = parse_i64_list(&args.chain)?;
    if chain.len() != space.size() {
        return Err(usage(format!(
            "chain has {} coefficients but the space has {} labels",
            chain.len(),
            space.size()
        )));
    }
    if !model.is_cycle(&chain)? {
        return Err(usage("chain is not a cycle: its boundary is nonzero"));
    }
    let (digits, lyapunov) = sampled_inputs(args.seed, args.orbit_n, args.nodes)?;
    let est =
        asymptotic_intersection(&model, &digits, &chain, args.t0, args.orbit_n, lyapunov)?;
    let moment = second_moment(&model, &digits, &chain, args.t0, args.orbit_n)?;
    Ok(Outcome {
        config: json!({
            "subgroup": args.space.subgroup,
            "chain": args.chain,
            "seed": args.seed,
            "orbit_n": args.orbit_n,
            "t0": args.t0,
            "nodes": args.nodes,
        }),
        result: json!({
            "value": est.value,
            "error_estimate": est.error_estimate,
            "n": est.n,
            "lyapunov": lyapunov,
            "second_moment": {
                "value": moment.value,
                "error_estimate": moment.error_estimate,
            },
        }),
        csv: None,
    })
}

fn run_transfer(args: &TransferCmdArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Pgl)?;
    let alphabet = args.alphabet.build()?;
    let config = json!({
        "subgroup": args.space.subgroup,
        "alphabet": args.alphabet.alphabet,
        "tail_cutoff": args.alphabet.tail_cutoff,
        "nodes": args.nodes,
        "sigma": args.sigma,
        "sigma_range": args.sigma_range,
    });
    if let Some(range) = &args.sigma_range {
        let (a, b, steps) = parse_scan(range)?;
        let mut rows = Vec::with_capacity(steps);
        let mut csv = String::from("sigma,lambda\n");
        for i in 0..steps {
            let s = if steps == 1 {
                a
            } else {
                a + (b - a) * i as f64 / (steps - 1) as f64
            };
            let lambda = leading_lambda(s, &alphabet, &space, args.nodes)?;
            let _ = writeln!(csv, "{s:e},{lambda:e}");
            rows.push(json!({"sigma": s, "lambda": lambda}));
        }
        return Ok(Outcome { config, result: json!({"scan": rows}), csv: Some(csv) });
    }
    let grid = assemble(args.sigma, &alphabet, &space, args.nodes)?;
    let spectrum = leading_eigen(&grid)?;
    Ok(Outcome {
        config,
        result: json!({
            "sigma": args.sigma,
            "lambda": spectrum.lambda,
            "residual": spectrum.residual,
            "nodes": grid.nodes(),
            "density": spectrum.h,
            "left_functional": spectrum.ell,
        }),
        csv: None,
    })
}

fn run_dimension(args: &DimensionArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Pgl)?;
    let alphabet = parse_alphabet(&args.alphabet, 0)?;
    finite_digits(&alphabet)?;
    let delta = hausdorff_dimension(&alphabet, &space, args.nodes)?;
    let refined = hausdorff_dimension(&alphabet, &space, 2 * args.nodes)?;
    Ok(Outcome {
        config: json!({
            "subgroup": args.space.subgroup,
            "alphabet": args.alphabet,
            "nodes": args.nodes,
        }),
        result: json!({
            "delta": delta,
            "delta_refined": refined,
            "self_convergence": (delta - refined).abs(),
        }),
        csv: None,
    })
}

fn run_lyapunov(args: &LyapunovArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Pgl)?;
    let alphabet_text = if args.full { "full" } else { args.alphabet.as_str() };
    let alphabet = parse_alphabet(alphabet_text, args.tail_cutoff)?;
    let value = lyapunov_from_spectrum(&alphabet, &space, args.nodes)?;
    let mut result = json!({"value": value});
    if let Some(orbit_n) = args.orbit_n {
        if !alphabet.is_full() {
            return Err(usage(
                "Birkhoff sampling draws Gauss-law digits; use the full alphabet",
            ));
        }
        let seed =
            args.seed.ok_or_else(|| usage("--seed is required for sampled runs"))?;
        if orbit_n == 0 {
            return Err(usage("--orbit-n must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let digits = gauss_kuzmin_digits(&mut rng, orbit_n);
        let birkhoff = lyapunov_estimate(&digits)?;
        result["birkhoff"] = json!(birkhoff);
        result["birkhoff_n"] = json!(orbit_n);
        result["gap"] = json!((value - birkhoff).abs());
    }
    Ok(Outcome {
        config: json!({
            "subgroup": args.space.subgroup,
            "alphabet": alphabet_text,
            "tail_cutoff": args.tail_cutoff,
            "nodes": args.nodes,
            "orbit_n": args.orbit_n,
            "seed": args.seed,
        }),
        result,
        csv: None,
    })
}

fn run_gauss_iterate(args: &GaussIterateArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Pgl)?;
    let alphabet = args.alphabet.build()?;
    if args.steps == 0 {
        return Err(usage("--steps must be positive"));
    }
    // A probe assembly exposes the node layout so shaped initial
    // densities can be sampled.
    let probe = assemble(2.0, &alphabet, &space, args.nodes)?;
    let xs = probe.nodes().to_vec();
    let p = space.size();
    let mut initial = Vec::with_capacity(xs.len() * p);
    for _ in 0..p {
        for &x in &xs {
            initial.push(match args.initial {
                InitialArg::Uniform => 1.0,
                InitialArg::Ramp => 1.0 + x,
            });
        }
    }
    let run = gauss_problem_iterate(&initial, &alphabet, &space, args.nodes, args.steps)?;
    let mut csv = String::from("step,distance\n");
    for (step, d) in run.distances.iter().enumerate() {
        let _ = writeln!(csv, "{step},{d:e}");
    }
    let final_density = run.densities.last().cloned().unwrap_or_default();
    Ok(Outcome {
        config: json!({
            "subgroup": args.space.subgroup,
            "alphabet": args.alphabet.alphabet,
            "tail_cutoff": args.alphabet.tail_cutoff,
            "nodes": args.nodes,
            "steps": args.steps,
            "initial": match args.initial { InitialArg::Uniform => "uniform", InitialArg::Ramp => "ramp" },
        }),
        result: json!({
            "distances": run.distances,
            "rate": run.rate,
            "final_density": final_density,
        }),
        csv: Some(csv),
    })
}

fn run_zeta(args: &ZetaArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Pgl)?;
    let alphabet = parse_alphabet(&args.alphabet, args.tail_cutoff)?;
    let config = json!({
        "subgroup": args.space.subgroup,
        "alphabet": args.alphabet,
        "tail_cutoff": args.tail_cutoff,
        "s": args.s,
        "s_range": args.s_range,
        "find_zero": args.find_zero,
        "l_max": args.l_max,
        "length_cutoff": args.length_cutoff,
        "psl_square": args.psl_square,
        "nodes": args.nodes,
    });
    if let Some(bracket) = &args.find_zero {
        let (lo, hi) = parse_bracket(bracket)?;
        let zero = selberg_zero(&alphabet, &space, args.nodes, lo, hi)?;
        return Ok(Outcome {
            config,
            result: json!({"zero": zero, "bracket": [lo, hi]}),
            csv: None,
        });
    }
    if let Some(range) = &args.s_range {
        let digits = finite_digits(&alphabet)?;
        let (a, b, steps) = parse_scan(range)?;
        let mut rows = Vec::with_capacity(steps);
        let mut csv = String::from("s,fredholm_det,zeta_product,abs_difference\n");
        for i in 0..steps {
            let s = if steps == 1 {
                a
            } else {
                a + (b - a) * i as f64 / (steps - 1) as f64
            };
            let det =
                fredholm_det(s, &alphabet, &space, args.l_max, args.nodes, args.psl_square)?;
            let product = zeta_product(s, &digits, &space, args.length_cutoff)?;
            let gap = (det.value - product.value).abs();
            let _ = writeln!(csv, "{s:e},{:e},{:e},{gap:e}", det.value, product.value);
            rows.push(json!({
                "s": s,
                "fredholm_det": det.value,
                "zeta_product": product.value,
                "abs_difference": gap,
            }));
        }
        return Ok(Outcome { config, result: json!({"scan": rows}), csv: Some(csv) });
    }
    let det =
        fredholm_det(args.s, &alphabet, &space, args.l_max, args.nodes, args.psl_square)?;
    let mut result = json!({
        "s": args.s,
        "fredholm_det": {
            "value": det.value,
            "series": det.series,
            "grid_det": det.grid_det,
            "tail_bound": det.tail_bound,
        },
    });
    if let AlphabetSpec::Finite(digits) = &alphabet {
        let product = zeta_product(args.s, digits, &space, args.length_cutoff)?;
        result["zeta_product"] = json!({
            "value": product.value,
            "primitive_classes": product.primitive_classes,
            "factors": product.factors,
        });
        result["abs_difference"] = json!((det.value - product.value).abs());
        if args.classes {
            let tables = enumerate_classes(digits, &space, args.l_max.min(14))?;
            let classes: Vec<Value> = tables
                .iter()
                .enumerate()
                .map(|(i, list)| {
                    json!({
                        "length": i + 1,
                        "count": list.len(),
                        "items": list.iter().map(|c| json!({
                            "word": c.word,
                            "primitive": c.primitive,
                            "kappa": c.kappa,
                            "rotations": c.rotations,
                            "det": c.det,
                            "norm": c.norm,
                            "tau": c.tau,
                        })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            result["classes"] = json!(classes);
        }
    } else if args.classes {
        return Err(usage("class tables need a finite alphabet"));
    }
    Ok(Outcome { config, result, csv: None })
}

fn run_trace_check(args: &TraceCheckArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Pgl)?;
    let alphabet = parse_alphabet(&args.alphabet, 0)?;
    let digits = finite_digits(&alphabet)?;
    if args.max_length == 0 {
        return Err(usage("--max-length must be positive"));
    }
    let grid = assemble(args.sigma, &alphabet, &space, args.nodes)?;
    let mut rows = Vec::with_capacity(args.max_length);
    let mut csv = String::from("length,orbit_trace,matrix_trace,rel_error\n");
    for length in 1..=args.max_length {
        let orbit = orbit_trace(args.sigma, &digits, &space, length)?;
        let matrix = matrix_trace(&grid, length);
        let rel = (orbit - matrix).abs() / orbit.abs().max(1e-300);
        let _ = writeln!(csv, "{length},{orbit:e},{matrix:e},{rel:e}");
        rows.push(json!({
            "length": length,
            "orbit_trace": orbit,
            "matrix_trace": matrix,
            "rel_error": rel,
        }));
    }
    Ok(Outcome {
        config: json!({
            "subgroup": args.space.subgroup,
            "alphabet": args.alphabet,
            "sigma": args.sigma,
            "max_length": args.max_length,
            "nodes": args.nodes,
        }),
        result: json!({"rows": rows}),
        csv: Some(csv),
    })
}

fn run_levy(args: &LevyArgs) -> Result<Outcome, CliError> {
    let kernel = match args.kernel {
        KernelArg::InvCube => LevyKernel::InvCube,
        KernelArg::SumOverQuartic => LevyKernel::SumOverQuartic,
    };
    let average = levy_average(&kernel, args.depth, args.pair_cutoff)?;
    Ok(Outcome {
        config: json!({
            "kernel": match args.kernel {
                KernelArg::InvCube => "inv-cube",
                KernelArg::SumOverQuartic => "sum-over-quartic",
            },
            "depth": args.depth,
            "pair_cutoff": args.pair_cutoff,
        }),
        result: json!({
            "lhs": average.lhs,
            "rhs": average.rhs,
            "rhs_cylinder": average.rhs_cylinder,
            "abs_difference": (average.lhs - average.rhs).abs(),
            "abs_difference_cylinder": (average.lhs - average.rhs_cylinder).abs(),
        }),
        csv: None,
    })
}

fn run_ktheory(args: &KtheoryArgs) -> Result<Outcome, CliError> {
    let space = args.space.build(Convention::Pgl)?;
    let markov = markov_matrix(args.digits, &space)?;
    let (k0, k1) = k_groups(&markov);
    let mut coinvariants = Vec::with_capacity(args.depth + 1);
    for depth in 0..=args.depth {
        let row = coinvariants_depth(args.digits, &space, depth)?;
        coinvariants.push(json!({
            "depth": row.depth,
            "cylinder_count": row.cylinder_count,
            "group": group_json(&row.group),
            "stabilized": row.stabilized,
        }));
    }
    // The canonical trace needs a genuine Gibbs state, which the
    // one-digit shift does not have.
    let trace_one = if args.digits >= 2 {
        let one = vec![(1, Cylinder { digits: vec![], label: None })];
        Some(trace_eval(&one, &AlphabetSpec::contiguous(args.digits), &space, args.nodes)?)
    } else {
        None
    };
    let mut markov_json = json!({
        "dim": markov.dim(),
        "digit_count": markov.digit_count(),
        "label_count": markov.label_count(),
    });
    if markov.dim() <= 32 {
        markov_json["matrix"] = json!(markov.entries());
    }
    Ok(Outcome {
        config: json!({
            "subgroup": args.space.subgroup,
            "digits": args.digits,
            "depth": args.depth,
            "nodes": args.nodes,
        }),
        result: json!({
            "markov": markov_json,
            "k0": group_json(&k0),
            "k1": group_json(&k1),
            "coinvariants": coinvariants,
            "trace_one": trace_one,
        }),
        csv: None,
    })
}

fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Cf(a) => run_cf(a),
        Command::Coset(a) => run_coset(a),
        Command::Homology(a) => run_homology(a),
        Command::Limsym(a) => run_limsym(a),
        Command::Intersect(a) => run_intersect(a),
        Command::Transfer(a) => run_transfer(a),
        Command::Dimension(a) => run_dimension(a),
        Command::Lyapunov(a) => run_lyapunov(a),
        Command::GaussIterate(a) => run_gauss_iterate(a),
        Command::Zeta(a) => run_zeta(a),
        Command::TraceCheck(a) => run_trace_check(a),
        Command::Levy(a) => run_levy(a),
        Command::Ktheory(a) => run_ktheory(a),
    }
}

// Flags from the optional JSON config file are appended for any long
// flag the command line leaves unset, so explicit flags always win.
fn merged_argv() -> Result<Vec<String>, CliError> {
    let mut argv: Vec<String> = std::env::args().collect();
    let mut config_path: Option<String> = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            config_path = argv.get(i + 1).cloned();
        } else if let Some(rest) = a.strip_prefix("--config=") {
            config_path = Some(rest.to_string());
        }
    }
    let Some(path) = config_path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read config {path}: {e}")))?;
    let map: serde_json::Map<String, Value> = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {path} is not a JSON object: {e}")))?;
    for (key, value) in &map {
        if key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let assigned = format!("{flag}=");
        if argv.iter().any(|a| *a == flag || a.starts_with(&assigned)) {
            continue;
        }
        match value {
            Value::Bool(true) => argv.push(flag),
            Value::Bool(false) => {}
            Value::String(s) => {
                argv.push(flag);
                argv.push(s.clone());
            }
            Value::Number(n) => {
                argv.push(flag);
                argv.push(n.to_string());
            }
            _ => {
                return Err(usage(format!(
                    "config key {key} must be a string, number, or bool"
                )))
            }
        }
    }
    Ok(argv)
}

fn fail(err: &CliError) -> ExitCode {
    let object = json!({
        "schema": SCHEMA,
        "error": {"kind": err.kind(), "message": err.message()},
    });
    eprintln!("{}", serde_json::to_string_pretty(&object).expect("static shape"));
    ExitCode::from(err.exit_code())
}

fn emit(cli: &Cli, name: &str, outcome: Outcome) -> Result<(), CliError> {
    let text = match cli.format {
        Format::Json => {
            let envelope = json!({
                "schema": SCHEMA,
                "command": name,
                "config": outcome.config,
                "result": outcome.result,
            });
            let mut body =
                serde_json::to_string_pretty(&envelope).expect("serializable output");
            body.push('\n');
            body
        }
        Format::Csv => {
            let Some(rows) = outcome.csv else {
                return Err(usage(format!(
                    "{name} has no csv form; csv is for scan outputs"
                )));
            };
            let config =
                serde_json::to_string(&outcome.config).expect("serializable config");
            format!("# schema: {SCHEMA}\n# command: {name}\n# config: {config}\n{rows}")
        }
    };
    match &cli.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let argv = match merged_argv() {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(&CliError::Usage(e.to_string()));
        }
    };
    let outcome = match run(&cli.command) {
        Ok(outcome) => outcome,
        Err(e) => return fail(&e),
    };
    match emit(&cli, cli.command.name(), outcome) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
