//! Command-line front end for the bilateral weighted shift analyzer.
//!
//! Four subcommands, each writing a single deterministic report to stdout:
//!
//! * `analyze` — decide similarity to a normal operator for a weight spec;
//!   JSON verdict, exit code `0` similar / `1` not similar / `2` undecided.
//! * `norms` — exact operator norms of forward and backward shift powers,
//!   optionally scaled; CSV by default, `--json` for JSON.
//! * `spectrum` — eigenvalues of the periodic wrap model; CSV or `--json`.
//! * `oracle` — seeded random finite-model self-checks (similarity
//!   propagation to powers, two-sided power bounds); JSON.
//!
//! Spec parse failures and usage errors exit `64` with a diagnostic on
//! stderr; operational failures (e.g. a wrap size that cuts a period) exit
//! `1`. Floats are printed with 17 significant digits so equal inputs give
//! byte-identical output.

mod report;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shiftsim::finmodel::{
    inverse_power_norm_exact, lemma1_harness, power_norm_exact, random_model,
    random_unitary_diagonal, random_well_conditioned, wrap_spectrum, FiniteModel, MAX_MODEL_DIM,
};
use shiftsim::similarity::{decide_similarity_with_horizon, RefutationReason, SimilarityVerdict};
use shiftsim::weights::{parse_sequence, WeightSequence};
use shiftsim::window::{EscapeDirection, EscapeWitness, DEFAULT_HORIZON};

use report::{fnum, fopt, iopt, jstr};

/// Exit code for an analysis that finite data can neither confirm nor refute.
const EXIT_UNDECIDED: u8 = 2;
/// Exit code for unusable input: bad flags or an unparseable weight spec.
const EXIT_USAGE: u8 = 64;
/// Power horizon used by the oracle's two-sided boundedness probe.
const ORACLE_POWER_HORIZON: u32 = 20;

#[derive(Parser)]
#[command(
    name = "shiftsim",
    version,
    about = "Similarity-to-normal analysis for bilateral weighted shifts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether the shift is similar to a normal operator (JSON verdict)
    #[command(
        after_help = "Exit codes: 0 similar, 1 not similar, 2 undecided, 64 bad spec or usage."
    )]
    Analyze {
        /// Weight spec: 'periodic:1,2', 'modified:periodic:1;-2=4',
        /// 'split:1|2@0', or 'sampled:table.csv@0.5'
        spec: String,
        /// Window-scan horizon for sampled tables (exact kinds ignore it)
        #[arg(long, default_value_t = DEFAULT_HORIZON, value_parser = clap::value_parser!(u32).range(1..))]
        horizon: u32,
    },
    /// Tabulate exact norms of shift powers and inverse powers
    Norms {
        /// Weight spec (same grammar as analyze)
        spec: String,
        /// Largest power tabulated
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=512))]
        n_max: u32,
        /// Positive scale applied to the shift before taking powers
        #[arg(long, default_value_t = 1.0, value_parser = positive_real)]
        c: f64,
        /// Emit JSON instead of CSV
        #[arg(long)]
        json: bool,
    },
    /// Eigenvalues of the finite wrap model of the shift
    Spectrum {
        /// Weight spec (same grammar as analyze)
        spec: String,
        /// Wrap size; must be a whole number of pattern periods
        #[arg(long, default_value_t = 16, value_parser = model_dim)]
        wrap: u64,
        /// Emit JSON instead of CSV
        #[arg(long)]
        json: bool,
    },
    /// Seeded random finite-model self-checks (JSON report)
    Oracle {
        /// RNG seed; equal seeds give byte-identical reports
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dimension of the random models
        #[arg(long, default_value_t = 5, value_parser = model_dim)]
        dim: u64,
        /// Power exponent checked by the similarity-propagation harness
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..=64))]
        n: u32,
    },
}

fn positive_real(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be a positive finite number, got {x}"))
    }
}

fn model_dim(s: &str) -> Result<u64, String> {
    let v: u64 = s.parse().map_err(|e| format!("{e}"))?;
    if (1..=MAX_MODEL_DIM as u64).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must be between 1 and {MAX_MODEL_DIM}"))
    }
}

/// A command's stdout payload plus the exit code it decided on.
struct Output {
    stdout: String,
    code: u8,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output { stdout, code: 0 }
    }
}

enum Failure {
    /// Unusable weight spec; exits [`EXIT_USAGE`].
    Spec(String),
    /// The input parsed but the requested computation cannot run; exits 1.
    Runtime(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap routes --help/--version text to stdout and genuine usage
            // errors to stderr; only the exit code is ours to choose.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Analyze { spec, horizon } => cmd_analyze(&spec, horizon),
        Command::Norms { spec, n_max, c, json } => cmd_norms(&spec, n_max, c, json),
        Command::Spectrum { spec, wrap, json } => cmd_spectrum(&spec, wrap as usize, json),
        Command::Oracle { seed, dim, n } => cmd_oracle(seed, dim as usize, n),
    };
    match result {
        Ok(Output { stdout, code }) => {
            print!("{stdout}");
            ExitCode::from(code)
        }
        Err(Failure::Spec(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn parse_spec(spec: &str) -> Result<WeightSequence, Failure> {
    parse_sequence(spec).map_err(|e| Failure::Spec(format!("{e}")))
}

fn cmd_analyze(spec: &str, horizon: u32) -> Result<Output, Failure> {
    let seq = parse_spec(spec)?;
    let verdict = decide_similarity_with_horizon(&seq, horizon);
    let (name, c, kappa, witness, code, scan) = match &verdict {
        SimilarityVerdict::Similar { c, kappa, .. } => {
            ("similar", Some(*c), Some(*kappa), String::from("null"), 0, None)
        }
        SimilarityVerdict::NotSimilar { reason, witness } => (
            "not_similar",
            None,
            None,
            witness_json(*reason, witness),
            1,
            None,
        ),
        SimilarityVerdict::Undecided { horizon } => (
            "undecided",
            None,
            None,
            String::from("null"),
            EXIT_UNDECIDED,
            Some(*horizon),
        ),
    };
    // A similar shift inherits the spectrum of the unweighted shift scaled by
    // 1/c: the circle of that radius.
    let radius = c.map(f64::recip);
    let stdout = format!(
        concat!(
            "{{\"spec\":{},\"verdict\":{},\"c\":{},\"kappa\":{},\"witness\":{},",
            "\"normal\":{},\"bounded\":{},\"spectrum_radius\":{},\"horizon\":{}}}\n"
        ),
        jstr(spec),
        jstr(name),
        fopt(c),
        fopt(kappa),
        witness,
        seq.is_normal_shift(),
        seq.is_bounded(),
        fopt(radius),
        iopt(scan),
    );
    Ok(Output { stdout, code })
}

fn witness_json(reason: RefutationReason, w: &EscapeWitness) -> String {
    let reason = match reason {
        RefutationReason::RateMismatch => "rate_mismatch",
        RefutationReason::WindowEscape => "window_escape",
    };
    let direction = match w.direction {
        EscapeDirection::Diverging => "diverging",
        EscapeDirection::Vanishing => "vanishing",
    };
    let windows = w
        .windows
        .iter()
        .map(|ww| format!("{{\"k\":{},\"n\":{},\"value\":{}}}", ww.k, ww.n, fnum(ww.value)))
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "{{\"reason\":{},\"c_used\":{},\"direction\":{},\"step\":{},\"windows\":[{}]}}",
        jstr(reason),
        fnum(w.c_used),
        jstr(direction),
        w.step,
        windows,
    )
}

fn cmd_norms(spec: &str, n_max: u32, c: f64, json: bool) -> Result<Output, Failure> {
    let seq = parse_spec(spec)?;
    let rows: Vec<(u32, f64, f64)> = (1..=n_max)
        .map(|n| {
            let fwd = c.powi(n as i32) * power_norm_exact(&seq, n);
            let bwd = c.powi(-(n as i32)) * inverse_power_norm_exact(&seq, n);
            (n, fwd, bwd)
        })
        .collect();
    let stdout = if json {
        let body = rows
            .iter()
            .map(|(n, fwd, bwd)| {
                format!(
                    "{{\"n\":{n},\"forward_norm\":{},\"backward_norm\":{}}}",
                    fnum(*fwd),
                    fnum(*bwd),
                )
            })
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{{\"spec\":{},\"c\":{},\"rows\":[{}]}}\n",
            jstr(spec),
            fnum(c),
            body,
        )
    } else {
        let mut out = String::from("n,forward_norm,backward_norm\n");
        for (n, fwd, bwd) in &rows {
            out.push_str(&format!("{n},{},{}\n", fnum(*fwd), fnum(*bwd)));
        }
        out
    };
    Ok(Output::ok(stdout))
}

fn cmd_spectrum(spec: &str, wrap: usize, json: bool) -> Result<Output, Failure> {
    let seq = parse_spec(spec)?;
    let eigs = wrap_spectrum(&seq, wrap).map_err(|e| Failure::Runtime(format!("{e}")))?;
    let stdout = if json {
        let body = eigs
            .iter()
            .map(|z| {
                format!(
                    "{{\"re\":{},\"im\":{},\"modulus\":{}}}",
                    fnum(z.re),
                    fnum(z.im),
                    fnum(z.norm()),
                )
            })
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{{\"spec\":{},\"size\":{},\"rows\":[{}]}}\n",
            jstr(spec),
            wrap,
            body,
        )
    } else {
        let mut out = String::from("re,im,modulus\n");
        for z in &eigs {
            out.push_str(&format!("{},{},{}\n", fnum(z.re), fnum(z.im), fnum(z.norm())));
        }
        out
    };
    Ok(Output::ok(stdout))
}

fn cmd_oracle(seed: u64, dim: usize, n: u32) -> Result<Output, Failure> {
    let rt = |e: shiftsim::ModelError| Failure::Runtime(format!("{e}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Draw order is part of the output contract: a, then x, then u.
    let a = random_model(&mut rng, dim).map_err(rt)?;
    let x = random_well_conditioned(&mut rng, dim).map_err(rt)?;
    let u = random_unitary_diagonal(&mut rng, dim).map_err(rt)?;
    let x_inv = x.inverse().map_err(rt)?;

    let b_entries = x.entries().dot(a.entries()).dot(x_inv.entries());
    let b = FiniteModel::from_matrix(b_entries).map_err(rt)?;
    let lemma = lemma1_harness(&a, &b, &x, n).map_err(rt)?;

    let m_entries = x.entries().dot(u.entries()).dot(x_inv.entries());
    let m = FiniteModel::from_matrix(m_entries).map_err(rt)?;
    let sz = m.sznagy_check(ORACLE_POWER_HORIZON).map_err(rt)?;

    let stdout = format!(
        concat!(
            "{{\"seed\":{seed},\"dim\":{dim},\"n\":{n},",
            "\"lemma1\":{{\"residual\":{},\"bound\":{},\"within_contract\":{},",
            "\"precondition_residual\":{}}},",
            "\"sznagy\":{{\"sup_fwd\":{},\"sup_bwd\":{},",
            "\"power_bounded_within_horizon\":{},\"horizon\":{},\"threshold\":{}}}}}\n"
        ),
        fnum(lemma.residual),
        fnum(lemma.bound),
        lemma.within_contract,
        fnum(lemma.precondition_residual),
        fnum(sz.sup_fwd),
        fnum(sz.sup_bwd),
        sz.power_bounded_within_horizon,
        sz.horizon,
        fnum(sz.threshold),
        seed = seed,
        dim = dim,
        n = n,
    );
    Ok(Output::ok(stdout))
}
