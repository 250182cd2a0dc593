use clap::{Args, Parser, Subcommand};
use proxlab::commands::{self, Settings};
use proxlab::report::ReportDocument;
use proxlab::suite;
use proxlab::{Error, Result};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "proxlab", version, about = "Log-convex sequences, regular variation and proximate orders")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Omit the generation timestamp so reports are byte-reproducible.
    #[arg(long)]
    no_timestamp: bool,
    /// Sampling budget as log2 of the largest index.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Property checks, growth indices and regular-variation tests for a sequence.
    Analyze {
        /// Family JSON file.
        #[arg(long)]
        config: Option<String>,
        /// Family as inline JSON or short form (`gevrey:1`, `example_a`, ...).
        family: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Build M^V and L from a proximate order.
    Construct {
        /// Order JSON file.
        #[arg(long)]
        config: Option<String>,
        /// Order as inline JSON or short form (`const:0.5`, `rho_alpha_beta:1:1`, ...).
        order: Option<String>,
        #[arg(long, default_value_t = 512)]
        pmax: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Does a sequence admit a proximate order.
    Admit {
        /// Family JSON file.
        #[arg(long)]
        config: Option<String>,
        /// Order JSON file or short form.
        #[arg(long)]
        order: Option<String>,
        /// `FAMILY [ORDER]` as inline JSON or short forms.
        specs: Vec<String>,
        /// Table length for the closure chain.
        #[arg(long, default_value_t = 1024)]
        pmax: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Riesz means of the two-valued block sequence.
    Riesz {
        #[arg(long, default_value_t = 12)]
        nmax: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Run every acceptance criterion and print a pass/fail matrix.
    Suite {
        /// Only criteria whose id or tags contain this string.
        #[arg(long)]
        filter: Option<String>,
        /// Write the matrix as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        no_timestamp: bool,
    },
}

fn settings(c: &Common) -> Settings {
    Settings { budget: c.budget, timestamp: !c.no_timestamp, ..Settings::default() }
}

fn one_of(config: &Option<String>, positional: &Option<String>, what: &str) -> Result<String> {
    match (config, positional) {
        (Some(c), None) => Ok(c.clone()),
        (None, Some(p)) => Ok(p.clone()),
        (Some(_), Some(_)) => Err(Error::InvalidParameter(format!("give the {what} either with --config or positionally"))),
        (None, None) => Err(Error::InvalidParameter(format!("missing {what}"))),
    }
}

fn emit(doc: &ReportDocument, c: &Common) -> Result<()> {
    match &c.out {
        Some(p) => {
            doc.write_json(BufWriter::new(File::create(p)?))?;
            eprint!("{}", doc.summary());
        }
        None => doc.write_json(io::stdout().lock())?,
    }
    Ok(())
}

fn csv_sink(c: &Common) -> Result<Option<BufWriter<File>>> {
    Ok(match &c.csv {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Analyze { config, family, common } => {
            let spec = commands::read_family(&one_of(&config, &family, "family")?)?;
            let out = commands::cmd_analyze(&spec, &settings(&common))?;
            if let Some(w) = csv_sink(&common)? {
                proxlab::assoc::write_csv(&out.rows, w)?;
            }
            emit(&out.report, &common)?;
        }
        Cmd::Construct { config, order, pmax, common } => {
            let spec = commands::read_order(&one_of(&config, &order, "order")?)?;
            let s = Settings { pmax, ..settings(&common) };
            let out = commands::cmd_construct(&spec, &s)?;
            if let Some(w) = csv_sink(&common)? {
                proxlab::construct::write_csv(&out.mv, &out.l, w)?;
            }
            emit(&out.report, &common)?;
        }
        Cmd::Admit { config, order, specs, pmax, common } => {
            let mut rest = specs.into_iter();
            let fam = one_of(&config, &rest.next(), "family")?;
            let ord = one_of(&order, &rest.next(), "order")?;
            if rest.next().is_some() {
                return Err(Error::InvalidParameter("admit takes at most FAMILY and ORDER".into()));
            }
            let s = Settings { closure_pmax: pmax, ..settings(&common) };
            let doc = commands::cmd_admit(&commands::read_family(&fam)?, &commands::read_order(&ord)?, &s)?;
            emit(&doc, &common)?;
        }
        Cmd::Riesz { nmax, common } => {
            let s = Settings { nmax, ..settings(&common) };
            let out = commands::cmd_riesz(&s)?;
            if let Some(w) = csv_sink(&common)? {
                commands::write_riesz_csv(&out.table, w)?;
            }
            emit(&out.report, &common)?;
        }
        Cmd::Suite { filter, json, no_timestamp } => {
            let m = suite::run(filter.as_deref(), !no_timestamp);
            print!("{}", m.table());
            io::stdout().flush()?;
            if let Some(p) = json {
                let mut f = BufWriter::new(File::create(p)?);
                f.write_all(m.to_json()?.as_bytes())?;
            }
            if !m.all_pass() {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
