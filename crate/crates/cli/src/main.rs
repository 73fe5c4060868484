use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use phasefrac::bench::{compare_runs, load_config, mesh_study, run_benchmark, BenchmarkConfig, RunSummary, Scale};
use phasefrac::solvers::SolverKind;

/// AT1 phase-field fracture benchmarks.
#[derive(Parser)]
#[command(name = "phasefrac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver on one benchmark.
    Run(RunArgs),
    /// Tabulate the summaries of several runs of one benchmark.
    Compare {
        #[arg(required = true)]
        summaries: Vec<PathBuf>,
        /// Write CSV instead of Markdown.
        #[arg(long)]
        csv: bool,
    },
    /// Repeat a run with fine element sizes l/10, l/5 and 2l/5.
    MeshStudy(StudyArgs),
}

#[derive(Args)]
struct ScaleArgs {
    /// Apply the [desk] overrides of the configuration.
    #[arg(long, conflicts_with = "paper")]
    desk: bool,
    /// Use the configuration as written (default).
    #[arg(long)]
    paper: bool,
}

impl ScaleArgs {
    fn scale(&self) -> Scale {
        if self.desk {
            Scale::Desk
        } else {
            Scale::Paper
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    solver: SolverKind,
    /// Output directory; overrides output.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// VTK snapshot stride; 0 disables snapshots.
    #[arg(long)]
    dump_stride: Option<usize>,
    #[command(flatten)]
    scale: ScaleArgs,
    /// Cap of the extrapolation correction loop; 0 runs the uncorrected scheme.
    #[arg(long)]
    qm_max_corrections: Option<usize>,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "mn")]
    solver: SolverKind,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    scale: ScaleArgs,
}

fn prepare(path: &PathBuf, scale: Scale, out: Option<PathBuf>) -> Result<BenchmarkConfig> {
    let cfg = load_config(path).with_context(|| format!("loading {}", path.display()))?;
    let mut cfg = cfg.at_scale(scale);
    if let Some(out) = out {
        cfg.output.directory = out;
    }
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PHASEFRAC_THREADS") {
        let n: usize = v.parse().with_context(|| format!("PHASEFRAC_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<bool> {
    let mut cfg = prepare(&args.config, args.scale.scale(), args.out)?;
    if let Some(s) = args.dump_stride {
        cfg.output.dump_stride = s;
    }
    if let Some(n) = args.qm_max_corrections {
        cfg.solver.max_qm_corrections = n;
    }
    let run = run_benchmark(&cfg, args.solver)?;
    let s = &run.summary;
    println!(
        "{} {} ({}): total it. {}, max it./inc. {}, IC it. {}, {:.2} s, peak {:.6e} N at {:.4e} mm -> {}",
        s.benchmark,
        s.solver,
        s.scale,
        s.total_iterations,
        s.max_iterations_per_increment,
        s.ic_iterations,
        s.wall_time_s,
        s.peak_reaction,
        s.peak_displacement,
        run.out_dir.display()
    );
    if let Some(f) = &s.failure {
        eprintln!("failed at increment {}: {}", f.increment, f.message);
        return Ok(false);
    }
    Ok(true)
}

fn compare(paths: &[PathBuf], csv: bool) -> Result<bool> {
    let summaries = paths
        .iter()
        .map(|p| RunSummary::read(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let table = compare_runs(&summaries)?;
    if csv {
        print!("{}", table.to_csv()?);
    } else {
        print!("{}", table.to_markdown());
    }
    Ok(true)
}

fn study(args: StudyArgs) -> Result<bool> {
    let cfg = prepare(&args.config, args.scale.scale(), args.out)?;
    if cfg.geometry.mesh_file.is_some() {
        bail!("the mesh study needs a generated mesh");
    }
    let study = mesh_study(&cfg, args.solver)?;
    println!("ratio,h,n_elements,peak_reaction,peak_deviation,total_iterations,wall_time_s");
    for r in &study.rows {
        println!(
            "{},{},{},{:.6e},{:.4},{},{:.2}",
            r.refinement_ratio, r.h, r.n_elements, r.peak_reaction, r.peak_deviation, r.total_iterations, r.wall_time_s
        );
    }
    Ok(study.rows.iter().all(|r| r.completed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run(a) => run(a),
        Command::Compare { summaries, csv } => compare(&summaries, csv),
        Command::MeshStudy(a) => study(a),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
