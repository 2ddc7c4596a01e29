use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wigner_core::verify::{invariant_suite, VerificationReport};
use wigner_lab::config::{ExperimentConfig, OutputFormat, Overrides, Resolved};
use wigner_lab::experiment::{check_phi, run_experiment};
use wigner_lab::report::{self, failed, SuiteReport};
use wigner_lab::{workers_from_env, LabError, WORKERS_ENV};

#[derive(Parser)]
#[command(name = "wigner-lab", version, about = "Stability experiments for approximate Wigner maps")]
#[command(after_help = "Worker threads: set WIGNER_LAB_WORKERS.\n\
Exit status: 0 all checks pass, 1 some check failed, 2 invalid configuration, 3 run could not complete.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full experiment: certify, construct, verify, write reports.
    Run(Common),
    /// Randomized self-test of the algebra and module layers.
    CheckAlgebra(Common),
    /// Check the two decay conditions on the control function.
    CheckPhi(Common),
}

#[derive(Args)]
struct Common {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Override the number of sample points.
    #[arg(long)]
    points: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<Resolved, LabError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            out_dir: self.out_dir.clone(),
            format: self.format,
            points: self.points,
        });
        cfg.resolve()
    }
}

fn print_checks(r: &VerificationReport) {
    for line in report::summary_lines(r) {
        println!("{line}");
    }
}

fn write_suite<T: serde::Serialize>(
    r: &Resolved,
    name: &str,
    rep: &VerificationReport,
    detail: Option<&T>,
) -> Result<(), LabError> {
    let dir = &r.config.output.dir;
    std::fs::create_dir_all(dir)?;
    let doc = SuiteReport {
        header: report::Header::now(),
        pass: rep.pass(),
        failed_checks: failed(rep),
        checks: &rep.records,
        detail,
    };
    let path = dir.join(name);
    std::fs::write(&path, report::to_json(&doc))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn execute(cmd: &Command) -> Result<bool, LabError> {
    match cmd {
        Command::Run(c) => {
            let r = c.resolve()?;
            let outcome = run_experiment(&r)?;
            print_checks(&outcome.report);
            for p in report::emit(&outcome, &r.config.output.dir, r.config.output.format)? {
                println!("wrote {}", p.display());
            }
            if outcome.no_data() {
                println!("no data: the run has no sample points");
            }
            let passing = outcome.rows.iter().filter(|row| row.pass).count();
            println!("points passing: {passing}/{}", outcome.rows.len());
            println!("overall: {}", if outcome.pass() { "PASS" } else { "FAIL" });
            Ok(outcome.pass())
        }
        Command::CheckAlgebra(c) => {
            let r = c.resolve()?;
            let ch = &r.config.checks;
            let rep = invariant_suite(&r.source, r.config.seed, ch.invariant_samples, ch.invariant_tol);
            print_checks(&rep);
            write_suite::<()>(&r, "algebra_report.json", &rep, None)?;
            Ok(rep.pass())
        }
        Command::CheckPhi(c) => {
            let r = c.resolve()?;
            let decay = check_phi(&r)?;
            let mut rep = VerificationReport::default();
            rep.push(wigner_lab::experiment::decay_record(&decay));
            print_checks(&rep);
            if let Some(cf) = &decay.closed_form {
                println!(
                    "closed form: ratio (a) {:.6} / {:.6}, ratio (b) {:.6}",
                    cf.ratio_x, cf.ratio_y, cf.ratio_diag
                );
            }
            write_suite(&r, "phi_report.json", &rep, Some(&decay))?;
            Ok(rep.pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = workers_from_env().and_then(|n| {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = n {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| LabError::Config(format!("{WORKERS_ENV}: {e}")))
    });
    let result = pool.and_then(|p| p.install(|| execute(&cli.command)));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
