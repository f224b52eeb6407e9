//! Command-line front end.
//!
//! Exit codes: 0 computed, 1 computed with a negative answer to a yes/no
//! question, 2 usage or domain error, 3 undecided at the congruence cap.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use serde::Serialize;
use serde_json::{json, Value};

use crate::construct::{
    find_aniso_prime, thm1_construct, thm2_construct, verify_family, CounterexampleFamily, Thm2Options,
};
use crate::error::Error;
use crate::global::{cap_from_env, regularity_report, represents_globally, Decision};
use crate::locrep::{
    is_locally_universal, local_verdicts, represents_locally, represents_locally_at, universality_by_prime,
};
use crate::padic::{hilbert_symbol, is_anisotropic, match_anisotropic_pattern};
use crate::polygonal::{is_generalized_polygonal, DiagonalQuadraticForm, MGonalForm, ShiftKind};

#[derive(Parser, Debug)]
#[command(name = "polyform", version, about = "Representation of integers by m-gonal forms")]
struct Cli {
    /// Print a single JSON object instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for the parallel searches.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Evaluate F_m(x).
    Eval {
        #[arg(short)]
        m: u64,
        #[arg(short, value_delimiter = ',', required = true)]
        a: Vec<u64>,
        #[arg(short, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        x: Vec<i64>,
    },
    /// Is N a generalized m-gonal number?
    Poly {
        #[arg(short)]
        m: u64,
        #[arg(short = 'N')]
        n: u64,
    },
    /// Decide global representation by exhaustive search.
    Rep {
        #[arg(short)]
        m: u64,
        #[arg(short, value_delimiter = ',', required = true)]
        a: Vec<u64>,
        #[arg(short = 'N')]
        n: u64,
        #[command(flatten)]
        cap: CapArg,
    },
    /// Decide local representation, prime by prime.
    Local {
        #[arg(short)]
        m: u64,
        #[arg(short, value_delimiter = ',', required = true)]
        a: Vec<u64>,
        #[arg(short = 'N')]
        #[serde(with = "crate::polygonal::decimal")]
        n: BigInt,
        #[arg(short)]
        p: Option<u64>,
    },
    /// Anisotropy of the diagonal quadratic form over Z_p.
    Aniso {
        #[arg(short, value_delimiter = ',', required = true)]
        a: Vec<u64>,
        #[arg(short)]
        p: Option<u64>,
    },
    /// Local universality, prime by prime.
    Universal {
        #[arg(short)]
        m: u64,
        #[arg(short, value_delimiter = ',', required = true)]
        a: Vec<u64>,
    },
    /// Compare local and global representation on 0..=B.
    Scan {
        #[arg(short)]
        m: u64,
        #[arg(short, value_delimiter = ',', required = true)]
        a: Vec<u64>,
        #[arg(short = 'B')]
        bound: u64,
        #[command(flatten)]
        cap: CapArg,
    },
    /// Build a non-representation family for a quaternary form.
    Thm1 {
        #[arg(short, value_delimiter = ',', required = true)]
        a: Vec<u64>,
    },
    /// Build a locally universal form with a non-representation family.
    Thm2 {
        #[arg(short)]
        m: u64,
        #[arg(long)]
        q: Option<u64>,
        #[arg(long)]
        p_prime: Option<u64>,
        #[arg(long)]
        p_double_prime: Option<u64>,
        /// Exponents r(p) for the primes dividing m - 2, in increasing order.
        #[arg(long, value_delimiter = ',')]
        exponents: Option<Vec<u32>>,
        /// Four primes = 1 (mod 8) for the power-of-two case.
        #[arg(long, value_delimiter = ',')]
        dyadic_primes: Option<Vec<u64>>,
        #[arg(long, default_value_t = 0)]
        skip: usize,
    },
    /// Check the first members of a family; `--family -` reads stdin.
    Verify {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, default_value_t = 2)]
        nmax: u64,
        #[command(flatten)]
        cap: CapArg,
    },
}

#[derive(Args, Debug, Serialize)]
struct CapArg {
    /// Global search cap (default: POLYFORM_CAP or 10^9).
    #[arg(long)]
    cap: Option<u64>,
}

impl CapArg {
    fn resolve(&self) -> Result<u64, Error> {
        match self.cap {
            Some(c) => Ok(c),
            None => cap_from_env(),
        }
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eval { .. } => "eval",
            Command::Poly { .. } => "poly",
            Command::Rep { .. } => "rep",
            Command::Local { .. } => "local",
            Command::Aniso { .. } => "aniso",
            Command::Universal { .. } => "universal",
            Command::Scan { .. } => "scan",
            Command::Thm1 { .. } => "thm1",
            Command::Thm2 { .. } => "thm2",
            Command::Verify { .. } => "verify",
        }
    }
}

/// What a command computed: machine payload, audit data, text lines, and
/// whether the answer to its question was positive.
struct Outcome {
    result: Value,
    audit: Value,
    text: Vec<String>,
    positive: bool,
}

impl Outcome {
    fn new(result: Value, audit: Value, text: Vec<String>, positive: bool) -> Self {
        Self { result, audit, text, positive }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Undecided { .. } => 3,
        Error::Verification { .. } => 1,
        _ => 2,
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(n) = cli.threads {
        // the pool can only be configured once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let start = Instant::now();
    let outcome = execute(&cli.command);
    let elapsed_ms = start.elapsed().as_millis() as u64;
    let code = match &outcome {
        Ok(o) if o.positive => 0,
        Ok(_) => 1,
        Err(e) => exit_code(e),
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if cli.json {
        let (result, audit, error) = match &outcome {
            Ok(o) => (o.result.clone(), o.audit.clone(), Value::Null),
            Err(e) => (Value::Null, Value::Null, Value::String(e.to_string())),
        };
        let envelope = json!({
            "command": cli.command.name(),
            "args": to_value(&cli.command)[cli.command.name()].clone(),
            "result": result,
            "audit": audit,
            "error": error,
            "exit_code": code,
            "elapsed_ms": elapsed_ms,
        });
        let _ = writeln!(out, "{envelope}");
    } else {
        match &outcome {
            Ok(o) => {
                for line in &o.text {
                    let _ = writeln!(out, "{line}");
                }
            }
            Err(e) => eprintln!("error: {e}"),
        }
    }
    code
}

fn execute(cmd: &Command) -> Result<Outcome, Error> {
    match cmd {
        Command::Eval { m, a, x } => {
            let f = MGonalForm::new(*m, a.clone())?;
            if x.len() != f.rank() {
                return Err(Error::Domain(format!("expected {} coordinates, got {}", f.rank(), x.len())));
            }
            let value = f.evaluate(x)?;
            let y = f.shift_coordinates(x, ShiftKind::Generic)?;
            let theta = f.shift(&BigInt::from(value), ShiftKind::Generic)?;
            Ok(Outcome::new(
                json!({ "value": value.to_string() }),
                json!({ "y": y.iter().map(|v| v.to_string()).collect::<Vec<_>>(), "shift": theta }),
                vec![format!("{f}({}) = {value}", join(x))],
                true,
            ))
        }
        Command::Poly { m, n } => {
            let x = is_generalized_polygonal(*m, *n as u128)?;
            let text = match x {
                Some(x) => format!("{n} = P_{m}({x})"),
                None => "none".to_string(),
            };
            Ok(Outcome::new(json!({ "x": x }), Value::Null, vec![text], x.is_some()))
        }
        Command::Rep { m, a, n, cap } => {
            let f = MGonalForm::new(*m, a.clone())?;
            let cap = cap.resolve()?;
            let cert = represents_globally(&f, *n, cap)?;
            let text = match &cert.decision {
                Decision::Represented { x } => format!("represented: {n} = {f}({})", join(x)),
                Decision::NotRepresented => format!("not represented: {n} by {f}"),
            };
            let mut lines = vec![text];
            lines.push(format!("nodes visited: {}", cert.nodes_visited));
            Ok(Outcome::new(
                to_value(&cert.decision),
                json!({ "search_bound": cert.search_bound, "nodes_visited": cert.nodes_visited, "cap": cap }),
                lines,
                cert.is_represented(),
            ))
        }
        Command::Local { m, a, n, p } => {
            let f = MGonalForm::new(*m, a.clone())?;
            let (represented, verdicts) = match p {
                Some(p) => {
                    let v = represents_locally_at(&f, n, *p)?;
                    (v.represented, vec![v])
                }
                None => (represents_locally(&f, n)?, local_verdicts(&f, n)?),
            };
            let mut lines: Vec<String> = verdicts
                .iter()
                .map(|v| {
                    let theta = v.theta_used.as_ref().map(|t| format!(" theta = {}", t.theta)).unwrap_or_default();
                    format!("p = {}: {} via {}{theta}", v.p, yes_no(v.represented), serde_name(&v.route))
                })
                .collect();
            lines.push(format!("locally represented: {}", yes_no(represented)));
            Ok(Outcome::new(json!({ "represented": represented }), json!({ "verdicts": verdicts }), lines, represented))
        }
        Command::Aniso { a, p } => {
            let q = DiagonalQuadraticForm::new(a.clone())?;
            let p = match p {
                Some(p) => *p,
                None => match find_aniso_prime(&q)? {
                    Some(p) => p,
                    None => {
                        return Ok(Outcome::new(
                            json!({ "anisotropic": false, "p": Value::Null }),
                            Value::Null,
                            vec![format!("{q} is isotropic at every prime")],
                            false,
                        ))
                    }
                },
            };
            let aniso = is_anisotropic(&q, p)?;
            let witness = match_anisotropic_pattern(&q, p);
            let mut hilbert = Vec::new();
            for i in 0..q.rank() {
                for j in i + 1..q.rank() {
                    let s = hilbert_symbol(q.coeffs()[i] as i128, q.coeffs()[j] as i128, p)?;
                    hilbert.push(json!([i, j, s]));
                }
            }
            let mut lines = vec![format!("{q} over Z_{p}: {}", if aniso { "anisotropic" } else { "isotropic" })];
            if let Some(w) = &witness {
                lines.push(format!("pattern {:?} grouping {:?}", w.kind, w.grouping));
            }
            Ok(Outcome::new(
                json!({ "anisotropic": aniso, "p": p, "witness": witness }),
                json!({ "pairwise_hilbert": hilbert }),
                lines,
                aniso,
            ))
        }
        Command::Universal { m, a } => {
            let f = MGonalForm::new(*m, a.clone())?;
            let primes = universality_by_prime(&f)?;
            let universal = is_locally_universal(&f)?;
            let mut lines: Vec<String> = primes
                .iter()
                .map(|u| format!("p = {}: {} via {}", u.p, yes_no(u.universal), serde_name(&u.route)))
                .collect();
            lines.push(format!("locally universal: {}", yes_no(universal)));
            Ok(Outcome::new(json!({ "universal": universal }), json!({ "primes": primes }), lines, universal))
        }
        Command::Scan { m, a, bound, cap } => {
            let f = MGonalForm::new(*m, a.clone())?;
            let report = regularity_report(&f, *bound, cap.resolve()?)?;
            let shown: Vec<String> = report.exceptions.iter().take(50).map(|n| n.to_string()).collect();
            let more = if report.exceptions.len() > 50 { ", ..." } else { "" };
            let lines = vec![
                format!("{f} on [0, {bound}]"),
                format!("locally represented: {}", report.locally_represented),
                format!("globally represented: {}", report.globally_represented),
                format!("locally excluded: {}", report.locally_excluded),
                format!("exceptions: {} [{}{more}]", report.exception_count, shown.join(", ")),
            ];
            Ok(Outcome::new(to_value(&report), Value::Null, lines, true))
        }
        Command::Thm1 { a } => match thm1_construct(a)? {
            Some(plan) => {
                let fam = plan.family.clone();
                let mut audit = to_value(&plan);
                audit.as_object_mut().expect("plan is an object").remove("family");
                Ok(Outcome::new(to_value(&fam), audit, family_lines(&fam), true))
            }
            None => Ok(Outcome::new(
                Value::Null,
                Value::Null,
                vec![format!("none: <{}> is isotropic at every prime", join(a))],
                false,
            )),
        },
        Command::Thm2 { m, q, p_prime, p_double_prime, exponents, dyadic_primes, skip } => {
            let dyadic_primes = match dyadic_primes {
                None => None,
                Some(v) => Some(
                    <[u64; 4]>::try_from(v.as_slice())
                        .map_err(|_| Error::Domain("--dyadic-primes takes four primes".into()))?,
                ),
            };
            let opts = Thm2Options {
                q: *q,
                exponents: exponents.clone(),
                p_prime: *p_prime,
                p_double_prime: *p_double_prime,
                dyadic_primes,
                skip: *skip,
            };
            let plan = thm2_construct(*m, &opts)?;
            let fam = plan.family.clone();
            let mut audit = to_value(&plan);
            audit.as_object_mut().expect("plan is an object").remove("family");
            Ok(Outcome::new(to_value(&fam), audit, family_lines(&fam), true))
        }
        Command::Verify { family, nmax, cap } => {
            let fam = read_family(family)?;
            let report = verify_family(&fam, *nmax, cap.resolve()?)?;
            let mut lines = family_lines(&fam);
            for member in &report.members {
                let global = match &member.global {
                    crate::construct::GlobalCheck::NotRepresented { .. } => "not globally represented".to_string(),
                    crate::construct::GlobalCheck::Skipped { reason } => format!("global check skipped ({reason})"),
                };
                lines.push(format!("N_{} = {}: locally represented, {global}", member.n, member.value));
            }
            lines.push(format!("descent checked on {} samples", report.descent_samples));
            lines.push("verified".to_string());
            let mut result = to_value(&report);
            result.as_object_mut().expect("report is an object").remove("family");
            Ok(Outcome::new(result, Value::Null, lines, true))
        }
    }
}

fn read_family(path: &PathBuf) -> Result<CounterexampleFamily, Error> {
    let text = if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| Error::Domain(format!("reading stdin: {e}")))?;
        s
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::Domain(format!("reading {}: {e}", path.display())))?
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Domain(format!("family JSON: {e}")))?;
    // accept either a bare family or a command envelope carrying one
    let body = match value.get("result") {
        Some(inner) if value.get("command").is_some() => inner.clone(),
        _ => value,
    };
    serde_json::from_value(body).map_err(|e| Error::Domain(format!("family JSON: {e}")))
}

fn family_lines(fam: &CounterexampleFamily) -> Vec<String> {
    let coeffs = join(&fam.coeffs);
    vec![
        format!("form <{coeffs}>_{} anisotropic at p = {} ({:?} branch)", fam.m, fam.p, fam.branch),
        format!("N_0 = {}, k = {}, theta0 = {}", fam.n0, fam.k, fam.theta0),
        format!("N_n = ({}^n * {} - {}) / {}", fam.base(), fam.theta0, fam.offset, fam.scale),
    ]
}

fn serde_name<T: Serialize>(v: &T) -> String {
    to_value(v).as_str().map(String::from).unwrap_or_default()
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
