//! `torvol`: sampling, cohomology, torsion and volume-form checks for SL(2,C)
//! surface-group representations. Reports are JSON on standard output.
//!
//! Exit codes: 0 all checks passed, 1 a verification failed, 2 degenerate
//! input or sampling failure, 3 I/O error.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use torvol_core::cochain::{build_complex, cohomology};
use torvol_core::mv::{self, Decomposition};
use torvol_core::reps::{check_good, sample_closed};
use torvol_core::symplectic::{gram, witten_check};
use torvol_core::torsion::torsion;
use torvol_core::{rng, Error, Representation};

#[derive(Parser, Debug)]
#[command(name = "torvol", version, about = "Torsion and symplectic volume of SL(2,C) surface-group representations")]
struct Cli {
    /// Global PRNG seed.
    #[arg(long, global = true, env = "TORVOL_SEED", default_value_t = 0)]
    seed: u64,
    /// Relative tolerance for numerical ranks.
    #[arg(long, global = true, env = "TORVOL_TOL", default_value_t = 1e-9)]
    tol: f64,
    /// Indentation of the JSON report; 0 prints it on one line.
    #[arg(long, global = true, default_value_t = 2)]
    json_indent: usize,
    /// Omit the metadata block (tool version and timestamp).
    #[arg(long, global = true)]
    no_meta: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a good representation of a closed surface group.
    Sample {
        #[arg(long)]
        genus: usize,
        /// Where to write the representation; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dimensions of twisted cohomology.
    Cohomology {
        #[arg(long)]
        rep: PathBuf,
    },
    /// Torsion with harmonic cohomology bases.
    Torsion {
        #[arg(long)]
        rep: PathBuf,
    },
    /// Gram matrix of the symplectic form and its Pfaffian.
    Symplectic {
        #[arg(long)]
        rep: PathBuf,
    },
    /// Compare |torsion| with |Pfaffian| on the harmonic basis.
    VerifyWitten {
        #[arg(long)]
        rep: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        max_rel_err: f64,
    },
    /// Check the gluing formula for a decomposition of the surface.
    VerifyGluing {
        #[arg(long)]
        rep: PathBuf,
        #[arg(long, value_enum, default_value_t = Kind::DiskCap)]
        kind: Kind,
        /// Genus of the first piece of a separating decomposition (default: half).
        #[arg(long)]
        split: Option<usize>,
        #[arg(long, default_value_t = 1e-8)]
        max_rel_err: f64,
    },
    /// Check the connected-sum volume formula on random representations.
    VerifyMain {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Defaults to 1e-6 for k = 2 and 1e-5 above.
        #[arg(long)]
        max_rel_err: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    DiskCap,
    Separating,
}

enum Failure {
    Degenerate(String),
    Verification(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_degenerate_input() {
            Failure::Degenerate(e.to_string())
        } else {
            Failure::Verification(e.to_string())
        }
    }
}

type Outcome = Result<(Value, bool), Failure>;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn read_rep(path: &Path) -> Result<Representation, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| {
        if e.is_data() {
            Failure::Degenerate(format!("{}: {e}", path.display()))
        } else {
            io_err(path, e)
        }
    })
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn render(value: &Value, indent: usize) -> String {
    if indent == 0 {
        return serde_json::to_string(value).expect("reports serialize");
    }
    let pad = vec![b' '; indent];
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(&pad);
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser).expect("reports serialize");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn run(cli: &Cli) -> Outcome {
    if !(cli.tol > 0.0 && cli.tol < 1e-3) {
        return Err(Failure::Degenerate(format!("--tol must lie in (0, 1e-3), got {}", cli.tol)));
    }
    match &cli.command {
        Command::Sample { genus, out } => {
            let rep = sample_closed(*genus, &mut rng::seeded(cli.seed))?.with_meta(Some(cli.seed), "sample");
            let residual = rep.relator_residual();
            let good = check_good(&rep)?;
            let text = serde_json::to_string_pretty(&rep).expect("representation serializes");
            match out {
                Some(path) => fs::write(path, text + "\n").map_err(|e| io_err(path, e))?,
                None => return Ok((to_value(&rep), true)),
            }
            let report = json!({
                "genus": genus,
                "out": out.as_ref().map(|p| p.display().to_string()),
                "relator_residual": residual,
                "goodness": good,
            });
            Ok((report, residual < 1e-10 && good.is_good))
        }
        Command::Cohomology { rep } => {
            let rep = read_rep(rep)?;
            let cx = build_complex(&rep)?;
            let coh = cohomology(&cx, cli.tol)?;
            let report = json!({
                "genus": rep.genus(),
                "boundary": rep.presentation().boundary,
                "cochain_dims": cx.dims,
                "dims": coh.dims,
                "ranks": coh.ranks(),
                "euler_characteristic": cx.euler_characteristic(),
                "chain_defect": cx.chain_defect(),
            });
            Ok((report, true))
        }
        Command::Torsion { rep } => {
            let rep = read_rep(rep)?;
            let cx = build_complex(&rep)?;
            let coh = cohomology(&cx, cli.tol)?;
            let t = torsion(&cx, &coh.reps)?;
            Ok((json!({ "dims": coh.dims, "torsion": t }), true))
        }
        Command::Symplectic { rep } => {
            let rep = read_rep(rep)?;
            let cx = build_complex(&rep)?;
            let coh = cohomology(&cx, cli.tol)?;
            let g = gram(&coh, &rep)?;
            let report = json!({
                "dim": coh.dims[1],
                "w": to_value(&g)["w"],
                "pf": to_value(&g)["pf"],
                "pf_abs": g.pf.norm(),
                "antisymmetry_defect": g.antisymmetry_defect,
            });
            Ok((report, true))
        }
        Command::VerifyWitten { rep, max_rel_err } => {
            let rep = read_rep(rep)?;
            let cx = build_complex(&rep)?;
            let coh = cohomology(&cx, cli.tol)?;
            let w = witten_check(&cx, &coh, &rep)?;
            let pass = w.rel_err <= *max_rel_err;
            let mut report = to_value(&w);
            report["tolerance"] = json!(max_rel_err);
            report["pass"] = json!(pass);
            Ok((report, pass))
        }
        Command::VerifyGluing { rep, kind, split, max_rel_err } => {
            let rep = read_rep(rep)?;
            let g = rep.genus();
            let dec = match kind {
                Kind::DiskCap => Decomposition::disk_cap(g)?,
                Kind::Separating => {
                    let g1 = split.unwrap_or(g / 2);
                    if g1 == 0 || g1 >= g {
                        return Err(Failure::Degenerate(format!("cannot split genus {g} at {g1}")));
                    }
                    Decomposition::separating(g1, g - g1)?
                }
            };
            let report = mv::verify_gluing(&dec, &rep, &mut rng::seeded(cli.seed), *max_rel_err)?;
            let pass = report.pass;
            let mut value = to_value(&report);
            value["tolerance"] = json!(max_rel_err);
            Ok((value, pass))
        }
        Command::VerifyMain { k, trials, max_rel_err } => {
            let tolerance = max_rel_err.unwrap_or_else(|| mv::default_main_tolerance(*k));
            let report = mv::verify_main_theorem(*k, *trials, cli.seed, tolerance)?;
            let pass = report.pass;
            Ok((to_value(&report), pass))
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Sample { .. } => "sample",
        Command::Cohomology { .. } => "cohomology",
        Command::Torsion { .. } => "torsion",
        Command::Symplectic { .. } => "symplectic",
        Command::VerifyWitten { .. } => "verify-witten",
        Command::VerifyGluing { .. } => "verify-gluing",
        Command::VerifyMain { .. } => "verify-main",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut report, code) = match run(&cli) {
        Ok((report, pass)) => (report, if pass { 0 } else { 1 }),
        Err(Failure::Io(msg)) => {
            eprintln!("torvol: {msg}");
            return ExitCode::from(3);
        }
        Err(Failure::Degenerate(msg)) => {
            eprintln!("torvol: {msg}");
            (json!({ "error": msg, "kind": "degenerate-input", "pass": false }), 2)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("torvol: {msg}");
            (json!({ "error": msg, "kind": "verification", "pass": false }), 1)
        }
    };
    let is_rep = matches!(&cli.command, Command::Sample { out: None, .. }) && code == 0;
    if !is_rep {
        if let Value::Object(map) = &mut report {
            map.insert("command".into(), json!(command_name(&cli.command)));
            map.insert("seed".into(), json!(cli.seed));
            map.insert("tol".into(), json!(cli.tol));
            if !cli.no_meta {
                let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
                map.insert(
                    "meta".into(),
                    json!({ "tool": "torvol", "version": env!("CARGO_PKG_VERSION"), "timestamp": ts }),
                );
            }
        }
    }
    let mut out = io::stdout().lock();
    if writeln!(out, "{}", render(&report, cli.json_indent)).is_err() {
        return ExitCode::from(3);
    }
    ExitCode::from(code)
}
