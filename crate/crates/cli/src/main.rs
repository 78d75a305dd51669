//! `tmsurf`: reproducible Trudinger–Moser experiments on closed surfaces.

mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::Settings;
use crate::error::CliError;
use crate::output::{write_atomic, Envelope, SCHEMA_ID};

/// Declares a flag struct whose fields are all optional strings, each
/// overridable through `TMS_<KEY>` and listed as a config-file key.
macro_rules! flags {
    ($(#[$m:meta])* $name:ident { $($field:ident = $key:literal, $env:literal: $help:literal;)* }) => {
        $(#[$m])*
        #[derive(Args, Debug)]
        struct $name {
            $(
                #[arg(long = $key, env = $env, help = $help)]
                $field: Option<String>,
            )*
        }

        impl $name {
            fn apply(&self, s: &mut Settings) {
                $( s.set($key, self.$field.as_ref()); )*
            }
        }
    };
}

flags!(SurfaceFlags {
    surface = "surface", "TMS_SURFACE": "torus | sphere | file";
    n = "n", "TMS_N": "torus side length or sphere subdivision level";
    mesh = "mesh", "TMS_MESH": "mesh file for --surface file";
});

flags!(LambdaFlags {
    p = "p", "TMS_P": "norm exponent p > 1";
    restarts = "restarts", "TMS_RESTARTS": "random starts";
    seed = "seed", "TMS_SEED": "random seed";
    max_iter = "max-iter", "TMS_MAX_ITER": "iteration cap per start";
    tol = "tol", "TMS_TOL": "relative stopping tolerance";
});

flags!(MaximizeFlags {
    alpha = "alpha", "TMS_ALPHA": "alpha as a number, `lambda_p` or `<k>*lambda_p`";
    p = "p", "TMS_P": "norm exponent p > 1";
    eps = "eps", "TMS_EPS": "comma-separated decreasing list of eps = 4π − β";
    restarts = "restarts", "TMS_RESTARTS": "random starts per eps";
    seed = "seed", "TMS_SEED": "random seed";
    max_iter = "max-iter", "TMS_MAX_ITER": "iteration cap per start";
    tol = "tol", "TMS_TOL": "relative tangent-gradient tolerance";
    lambda_p = "lambda-p", "TMS_LAMBDA_P": "use this λ_p instead of computing it";
});

flags!(GreenFlags {
    x0 = "x0", "TMS_X0": "source vertex index or `x,y,z`";
    alpha = "alpha", "TMS_ALPHA": "alpha ≥ 0";
    p = "p", "TMS_P": "norm exponent p > 1";
    tol = "tol", "TMS_TOL": "fixed-point tolerance";
    max_iter = "max-iter", "TMS_MAX_ITER": "fixed-point iteration cap";
    damping = "damping", "TMS_DAMPING": "fixed-point damping in (0, 1]";
});

flags!(PartIFlags {
    alpha = "alpha", "TMS_ALPHA": "alpha ≥ λ_p: a number, `lambda_p` or `<k>*lambda_p`";
    p = "p", "TMS_P": "norm exponent p > 1";
    eps = "eps", "TMS_EPS": "comma-separated decreasing list of eps";
    graded = "graded", "TMS_GRADED": "use graded torus meshes (true | false)";
    h_min_factor = "h-min-factor", "TMS_H_MIN_FACTOR": "innermost spacing relative to eps";
    restarts = "restarts", "TMS_RESTARTS": "random starts for λ_p";
    seed = "seed", "TMS_SEED": "random seed";
});

flags!(PartIIIFlags {
    alpha = "alpha", "TMS_ALPHA": "small alpha: a number or `<k>*lambda_p`";
    p = "p", "TMS_P": "norm exponent p > 1";
    eps = "eps", "TMS_EPS": "comma-separated decreasing list of eps";
    x0 = "x0", "TMS_X0": "center vertex index or `x,y,z`";
    graded = "graded", "TMS_GRADED": "use graded torus meshes (true | false)";
    h_min_factor = "h-min-factor", "TMS_H_MIN_FACTOR": "innermost spacing relative to eps";
    lambda_p = "lambda-p", "TMS_LAMBDA_P": "use this λ_p instead of computing it";
    seed = "seed", "TMS_SEED": "random seed";
});

flags!(BlowupFlags {
    input = "input", "TMS_INPUT": "maximize result envelope";
    window = "window", "TMS_WINDOW": "rescaled profile window R";
    rays = "rays", "TMS_RAYS": "profile directions";
    radial = "radial", "TMS_RADIAL": "profile radii per direction";
});

flags!(BoundFlags {
    input = "input", "TMS_INPUT": "maximize result envelope";
    green = "green", "TMS_GREEN": "green result envelope on the same mesh";
    tol = "tol", "TMS_TOL": "allowed excess of J over the bound";
});

#[derive(Parser, Debug)]
#[command(name = "tmsurf", version, about = "Trudinger–Moser numerics on closed surfaces")]
struct Cli {
    /// Flat `key = value` config file; flags and TMS_* variables override it.
    #[arg(long, global = true, env = "TMS_CONFIG")]
    config: Option<PathBuf>,
    /// JSON envelope path; stdout when absent.
    #[arg(long, global = true, env = "TMS_OUT")]
    out: Option<String>,
    /// CSV table path.
    #[arg(long, global = true, env = "TMS_CSV")]
    csv: Option<String>,
    /// Deterministic sequential execution (true | false).
    #[arg(long, global = true, env = "TMS_SEQUENTIAL")]
    sequential: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Nonlinear eigenvalue λ_p and its minimizer.
    Lambda {
        #[command(flatten)]
        surface: SurfaceFlags,
        #[command(flatten)]
        flags: LambdaFlags,
    },
    /// Subcritical maximizers along a list of eps.
    Maximize {
        #[command(flatten)]
        surface: SurfaceFlags,
        #[command(flatten)]
        flags: MaximizeFlags,
    },
    /// Green function, Robin constant and upper bound.
    Green {
        #[command(flatten)]
        surface: SurfaceFlags,
        #[command(flatten)]
        flags: GreenFlags,
    },
    /// Explicit test-function families.
    #[command(subcommand)]
    Testfn(Testfn),
    /// Blow-up diagnostics for a stored maximizer path.
    BlowupReport {
        #[command(flatten)]
        flags: BlowupFlags,
    },
    /// Stored maximizer values against the upper bound.
    BoundCompare {
        #[command(flatten)]
        flags: BoundFlags,
    },
}

#[derive(Subcommand, Debug)]
enum Testfn {
    /// Divergence family for alpha ≥ λ_p.
    PartI {
        #[command(flatten)]
        surface: SurfaceFlags,
        #[command(flatten)]
        flags: PartIFlags,
    },
    /// Blow-up family against the upper bound for small alpha.
    PartIii {
        #[command(flatten)]
        surface: SurfaceFlags,
        #[command(flatten)]
        flags: PartIIIFlags,
    },
}

const GLOBAL_KEYS: &[&str] = &["out", "csv", "sequential"];

type Runner = fn(&Settings) -> Result<commands::Outcome, CliError>;
type Apply<'a> = Box<dyn Fn(&mut Settings) + 'a>;

fn keys(extra: &[&[&'static str]]) -> Vec<&'static str> {
    let mut k = GLOBAL_KEYS.to_vec();
    for e in extra {
        k.extend_from_slice(e);
    }
    k
}

fn run(cli: Cli) -> Result<(), CliError> {
    use commands as c;
    let (name, allowed, runner, apply): (&str, Vec<&str>, Runner, Apply) = match &cli.command {
        Command::Lambda { surface, flags } => (
            "lambda",
            keys(&[c::SURFACE_KEYS, c::LAMBDA_KEYS]),
            c::lambda,
            Box::new(|s| {
                surface.apply(s);
                flags.apply(s)
            }),
        ),
        Command::Maximize { surface, flags } => (
            "maximize",
            keys(&[c::SURFACE_KEYS, c::MAXIMIZE_KEYS]),
            c::maximize,
            Box::new(|s| {
                surface.apply(s);
                flags.apply(s)
            }),
        ),
        Command::Green { surface, flags } => (
            "green",
            keys(&[c::SURFACE_KEYS, c::GREEN_KEYS]),
            c::green,
            Box::new(|s| {
                surface.apply(s);
                flags.apply(s)
            }),
        ),
        Command::Testfn(Testfn::PartI { surface, flags }) => (
            "testfn part-i",
            keys(&[c::SURFACE_KEYS, c::PART_I_KEYS]),
            c::part_i,
            Box::new(|s| {
                surface.apply(s);
                flags.apply(s)
            }),
        ),
        Command::Testfn(Testfn::PartIii { surface, flags }) => (
            "testfn part-iii",
            keys(&[c::SURFACE_KEYS, c::PART_III_KEYS]),
            c::part_iii,
            Box::new(|s| {
                surface.apply(s);
                flags.apply(s)
            }),
        ),
        Command::BlowupReport { flags } => (
            "blowup-report",
            keys(&[c::BLOWUP_KEYS]),
            c::blowup,
            Box::new(|s| flags.apply(s)),
        ),
        Command::BoundCompare { flags } => (
            "bound-compare",
            keys(&[c::BOUND_KEYS]),
            c::bound,
            Box::new(|s| flags.apply(s)),
        ),
    };
    let mut s = Settings::load(cli.config.as_deref(), &allowed)?;
    apply(&mut s);
    s.set("out", cli.out.as_ref());
    s.set("csv", cli.csv.as_ref());
    s.set("sequential", cli.sequential.as_ref());
    let sequential: bool = s.value("sequential", true)?;
    s.check("sequential", sequential, "only sequential execution is implemented")?;

    let start = Instant::now();
    let outcome = runner(&s)?;
    let envelope = Envelope {
        schema: SCHEMA_ID.into(),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        subcommand: name.into(),
        config: s.echo(),
        mesh_hash: outcome.mesh_hash,
        timing_seconds: start.elapsed().as_secs_f64(),
        oracles: outcome.oracles,
        payload: outcome.payload,
    };
    let mut json = serde_json::to_vec_pretty(&envelope)?;
    json.push(b'\n');
    if let (Some(path), Some(table)) = (s.get("csv"), &outcome.table) {
        write_atomic(path.as_ref(), &table.to_bytes()?)?;
    }
    match s.get("out") {
        Some(path) => write_atomic(path.as_ref(), &json)?,
        None => std::io::stdout().write_all(&json)?,
    }
    match outcome.violation {
        Some(v) => Err(CliError::Property(v)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tmsurf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
