use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ising_trinity::graph::{export_dot, GraphView};
use ising_trinity::io::{read_data_csv, read_spec, write_pmf_csv, write_pmf_json, ParsedSpec};
use ising_trinity::quadrature::DEFAULT_NODES;
use ising_trinity::sampling::{DEFAULT_BURN_IN, DEFAULT_THIN};
use ising_trinity::{
    conditioned_pmf, fit_pseudo_likelihood, ising_pmf, mirt_marginal_pmf, sample_collider_rejection,
    sample_exact, sample_gibbs, sample_latent_first, spectral_pmf, spectral_to_collider,
    to_spectral, verify_representations, Branch, Error, FaultInjection, FitOptions, LatentForm,
    ModelSpec, Pmf, QuadratureRule, SampleSet, VerifyOptions,
};

const THREADS_VAR: &str = "ISING_TRINITY_THREADS";

#[derive(Parser)]
#[command(name = "ising-trinity", version, about = "Network, latent-variable and collider views of the Ising model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the full probability table of a spec.
    Pmf {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Representation::Conventional)]
        representation: Representation,
        /// Table format.
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        out: TableFormat,
        /// Destination file; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_NODES)]
        quad_nodes: usize,
    },
    /// Compute every representation and compare them pairwise.
    Verify {
        spec: PathBuf,
        #[arg(long, default_value_t = DEFAULT_NODES)]
        quad_nodes: usize,
        #[arg(long)]
        json_report: Option<PathBuf>,
        /// Perturb one branch's first main effect to check the comparison bites.
        #[arg(long, value_enum)]
        inject_fault: Option<BranchArg>,
        #[arg(long, default_value_t = 1e-6, requires = "inject_fault")]
        fault_magnitude: f64,
    },
    /// Draw configurations; writes a CSV and a JSON sidecar next to it.
    Sample {
        spec: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: u64,
        #[arg(long, default_value_t = DEFAULT_THIN)]
        thin: u64,
        #[arg(long, default_value_t = DEFAULT_NODES)]
        quad_nodes: usize,
    },
    /// Pseudo-likelihood fit to a data table.
    Fit {
        data: PathBuf,
        /// Starting spec; all zeros when absent.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        grad_tol: Option<f64>,
    },
    /// Graphviz DOT rendering of one structural view.
    ExportGraph {
        spec: PathBuf,
        #[arg(long, value_enum)]
        view: View,
        /// Destination file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Representation {
    Conventional,
    Spectral,
    Collider,
    Latent,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum BranchArg {
    Conventional,
    Spectral,
    Collider,
    Latent,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Branch {
        match b {
            BranchArg::Conventional => Branch::Conventional,
            BranchArg::Spectral => Branch::Spectral,
            BranchArg::Collider => Branch::Collider,
            BranchArg::Latent => Branch::Latent,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Exact,
    Gibbs,
    ColliderRejection,
    LatentFirst,
}

#[derive(Clone, Copy, ValueEnum)]
enum View {
    CommonCause,
    Network,
    Collider,
}

impl From<View> for GraphView {
    fn from(v: View) -> GraphView {
        match v {
            View::CommonCause => GraphView::CommonCause,
            View::Network => GraphView::Network,
            View::Collider => GraphView::Collider,
        }
    }
}

enum Failure {
    Verification,
    Invalid(String),
    Limit(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_limit() {
            Failure::Limit(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| run(cli.command));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Limit(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = match value.trim().parse() {
        Ok(t) if t > 0 => t,
        _ => {
            return Err(Failure::Invalid(format!(
                "{THREADS_VAR} must be a positive integer, found {value:?}"
            )))
        }
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Invalid(format!("thread pool: {e}")))
}

fn load_spec(path: &Path) -> Result<ParsedSpec, Failure> {
    let parsed = read_spec(path).map_err(|e| Failure::from(e).context(path))?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(parsed)
}

impl Failure {
    fn context(self, path: &Path) -> Failure {
        match self {
            Failure::Invalid(m) => Failure::Invalid(format!("{}: {m}", path.display())),
            Failure::Limit(m) => Failure::Limit(format!("{}: {m}", path.display())),
            other => other,
        }
    }
}

fn rule(m: usize) -> Result<QuadratureRule, Failure> {
    Ok(QuadratureRule::gauss_hermite(m)?)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Pmf {
            spec,
            representation,
            out,
            output,
            quad_nodes,
        } => {
            let parsed = load_spec(&spec)?;
            let pmf = representation_pmf(&parsed, representation, quad_nodes)?;
            let mut w = sink(output.as_deref())?;
            match out {
                TableFormat::Csv => write_pmf_csv(&pmf, &mut w)?,
                TableFormat::Json => {
                    write_pmf_json(&pmf, &mut w)?;
                    writeln!(w)?;
                }
            }
            w.flush()?;
        }
        Command::Verify {
            spec,
            quad_nodes,
            json_report,
            inject_fault,
            fault_magnitude,
        } => {
            let parsed = load_spec(&spec)?;
            let opts = VerifyOptions {
                extra_shift: parsed.extra_shift,
                fault: inject_fault.map(|b| FaultInjection {
                    branch: b.into(),
                    magnitude: fault_magnitude,
                }),
                ..VerifyOptions::default()
            };
            let report = verify_representations(&parsed.spec, &rule(quad_nodes)?, &opts)?;
            print!("{}", report.to_table());
            if let Some(path) = json_report {
                let mut w = create(&path)?;
                serde_json::to_writer_pretty(&mut w, &report).map_err(Error::from)?;
                writeln!(w)?;
                w.flush()?;
            }
            if !report.passed {
                return Err(Failure::Verification);
            }
        }
        Command::Sample {
            spec,
            method,
            m,
            seed,
            out,
            burn_in,
            thin,
            quad_nodes,
        } => {
            let sidecar = out.with_extension("json");
            if sidecar == out {
                return Err(Failure::Invalid(format!(
                    "{}: sample output needs a name other than the .json sidecar",
                    out.display()
                )));
            }
            let parsed = load_spec(&spec)?;
            let samples = draw(&parsed, method, m, seed, burn_in, thin, quad_nodes)?;
            let mut w = create(&out)?;
            samples.write_csv(&mut w)?;
            w.flush()?;
            let mut w = create(&sidecar)?;
            samples.write_sidecar(&mut w)?;
            w.flush()?;
            if let Some(rate) = samples.meta().acceptance_rate {
                eprintln!("acceptance rate {rate:.6}");
            }
        }
        Command::Fit {
            data,
            init,
            out,
            max_iter,
            grad_tol,
        } => {
            let file = File::open(&data).map_err(|e| Failure::Invalid(format!("{}: {e}", data.display())))?;
            let table = read_data_csv(io::BufReader::new(file)).map_err(|e| Failure::from(e).context(&data))?;
            let start = match init {
                Some(path) => {
                    let parsed = load_spec(&path)?;
                    if parsed.spec.n() != table.n() {
                        return Err(Failure::Invalid(format!(
                            "{}: init spec has n = {} but the data have {} columns",
                            path.display(),
                            parsed.spec.n(),
                            table.n()
                        )));
                    }
                    parsed.spec
                }
                None => ModelSpec::independent(vec![0.0; table.n()]),
            };
            let mut opts = FitOptions::default();
            if let Some(k) = max_iter {
                opts.max_iter = k;
            }
            if let Some(t) = grad_tol {
                if !(t.is_finite() && t > 0.0) {
                    return Err(Failure::Invalid(format!("grad-tol must be positive, found {t}")));
                }
                opts.grad_tol = t;
            }
            let result = fit_pseudo_likelihood(&table, &start, &opts)?;
            let mut w = create(&out)?;
            serde_json::to_writer_pretty(&mut w, &result).map_err(Error::from)?;
            writeln!(w)?;
            w.flush()?;
            if !result.converged {
                eprintln!(
                    "warning: stopped after {} iterations without converging (gradient norm {:.3e})",
                    result.iterations, result.grad_norm_final
                );
            }
        }
        Command::ExportGraph { spec, view, out } => {
            let parsed = load_spec(&spec)?;
            let dot = export_dot(&parsed.spec, view.into(), parsed.extra_shift)?;
            let mut w = sink(out.as_deref())?;
            w.write_all(dot.as_bytes())?;
            w.flush()?;
        }
    }
    Ok(())
}

fn representation_pmf(parsed: &ParsedSpec, rep: Representation, quad_nodes: usize) -> Result<Pmf, Failure> {
    let spec = &parsed.spec;
    let pmf = match rep {
        Representation::Conventional => ising_pmf(spec)?,
        Representation::Spectral => spectral_pmf(&to_spectral(spec, parsed.extra_shift)?, spec.delta())?,
        Representation::Collider => {
            let sf = to_spectral(spec, parsed.extra_shift)?;
            conditioned_pmf(&spectral_to_collider(&sf, spec.delta())?)?
        }
        Representation::Latent => {
            let sf = to_spectral(spec, parsed.extra_shift)?;
            let lf = LatentForm::from_spectral(&sf, spec.delta())?;
            mirt_marginal_pmf(&lf, &rule(quad_nodes)?)?
        }
    };
    Ok(pmf)
}

fn draw(
    parsed: &ParsedSpec,
    method: Method,
    m: usize,
    seed: u64,
    burn_in: u64,
    thin: u64,
    quad_nodes: usize,
) -> Result<SampleSet, Failure> {
    if m == 0 {
        return Err(Failure::Invalid("invalid m: need at least one draw".into()));
    }
    let spec = &parsed.spec;
    let samples = match method {
        Method::Exact => sample_exact(&ising_pmf(spec)?, m, seed)?,
        Method::Gibbs => sample_gibbs(spec, m, burn_in, thin, seed)?,
        Method::ColliderRejection => {
            let sf = to_spectral(spec, parsed.extra_shift)?;
            sample_collider_rejection(&spectral_to_collider(&sf, spec.delta())?, m, seed)?
        }
        Method::LatentFirst => {
            let sf = to_spectral(spec, parsed.extra_shift)?;
            let lf = LatentForm::from_spectral(&sf, spec.delta())?;
            sample_latent_first(&lf, &rule(quad_nodes)?, m, seed)?
        }
    };
    Ok(samples)
}
