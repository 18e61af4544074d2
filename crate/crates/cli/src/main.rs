mod commands;
mod report;

use clap::{Args, Parser, Subcommand};
use report::{Report, Status};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "statphase", version, about = "Stationary-phase expansions, oracle checks, gluing and discrete Hodge theory")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<String>,
}

#[derive(Args, Clone)]
pub struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: String,
    /// Base point, comma separated. Defaults to the origin.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Newton seed in field coordinates. Defaults to the fiber origin.
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Semiclassical series at a critical point.
    Expand {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Evaluate the truncated series at these h.
        #[arg(long)]
        h: Option<String>,
    },
    /// Brute-force fiber integral.
    Oracle {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long)]
        h: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Error slope of the truncated series against the oracle.
    OrderCheck {
        #[command(flatten)]
        m: ModelArgs,
        #[arg(long, default_value = "0.2,0.1,0.05,0.025")]
        h: String,
        #[arg(long, default_value_t = 1)]
        order: usize,
        /// Relative oracle tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Gluing identities for two models over shared base coordinates.
    Glue {
        #[arg(long)]
        m1: String,
        #[arg(long)]
        m2: String,
        /// Shared base pairs i:j (base i of m1 with base j of m2). Defaults to
        /// the last base coordinate of m1 with the first of m2.
        #[arg(long)]
        shared: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        b1: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        b2: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x1: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        x2: Option<String>,
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// h values for the Fubini check; skipped when absent.
        #[arg(long)]
        h: Option<String>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// The lattice quantum mechanics example end to end.
    DtqmDemo {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value = "0,1", allow_hyphen_values = true)]
        b: String,
        #[arg(long, default_value = "1,0.1,0.01")]
        h: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Laplacian spectra and the Hodge split of a random cochain.
    Hodge {
        #[arg(long)]
        complex: String,
        #[arg(long, default_value_t = 1)]
        degree: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Determinant table and square-root torsion of a closed 3-complex.
    Torsion {
        #[arg(long)]
        complex: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Dirichlet-to-Neumann operator and boundary phase.
    Dn {
        #[arg(long)]
        complex: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn name(c: &Command) -> &'static str {
    match c {
        Command::Expand { .. } => "expand",
        Command::Oracle { .. } => "oracle",
        Command::OrderCheck { .. } => "order-check",
        Command::Glue { .. } => "glue",
        Command::DtqmDemo { .. } => "dtqm-demo",
        Command::Hodge { .. } => "hodge",
        Command::Torsion { .. } => "torsion",
        Command::Dn { .. } => "dn",
    }
}

fn main() -> ExitCode {
    let w = match Cli::try_parse() {
        Ok(w) => w,
        Err(e) => {
            let code = if e.use_stderr() { Status::InputError.code() } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let mut rep = Report::new(name(&w.command));
    let run = match w.command {
        Command::Expand { m, order, h } => commands::expand(&mut rep, &m, order, h.as_deref()),
        Command::Oracle { m, h, tol } => commands::oracle(&mut rep, &m, &h, tol),
        Command::OrderCheck { m, h, order, tol } => commands::order_check(&mut rep, &m, &h, order, tol),
        Command::Glue { m1, m2, shared, b1, b2, x1, x2, order, h, tol } => commands::glue(
            &mut rep,
            &commands::GlueArgs { m1, m2, shared, b1, b2, x1, x2, order, h, tol },
        ),
        Command::DtqmDemo { n, b, h, tol } => commands::dtqm_demo(&mut rep, n, &b, &h, tol),
        Command::Hodge { complex, degree, seed, tol } => commands::hodge(&mut rep, &complex, degree, seed, tol),
        Command::Torsion { complex, tol } => commands::torsion(&mut rep, &complex, tol),
        Command::Dn { complex, seed, tol } => commands::dn(&mut rep, &complex, seed, tol),
    };
    if let Err(e) = run {
        match e {
            commands::Failure::Module(e) => rep.error(&e),
            commands::Failure::Input(msg) => {
                rep.line(&format!("error (input error): {msg}"));
                rep.fail(Status::InputError, &msg);
            }
        }
    }
    let (text, status) = rep.finish();
    match &w.common.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &text) {
                eprintln!("cannot write {path}: {e}");
                return ExitCode::from(Status::InputError.code() as u8);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(status.code() as u8)
}
