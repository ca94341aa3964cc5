//! Command-line front end: analyze, residual, kernel, converge, sample,
//! verify, export.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pathlim::io::read_digraph;
use pathlim::render::{condensation_dot, csv_matrix, sig9};
use pathlim_core::graph::{z_table, WeightedDigraph};
use pathlim_core::limits::{self, LimitsError, Verdict};
use pathlim_core::oracle::{self, OracleError};
use pathlim_core::residual::{self, ResidualError, ResidualResult};
use pathlim_core::sampling::{self, SampleMode, SamplerConfig, SamplingError};
use pathlim_core::structure::{self, StructureError};

// exit codes, stable across commands
const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_PRECONDITION: u8 = 4;
// verification and internal failures
const EXIT_FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "pathlim", version, about = "Weighted digraph path statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Auto,
    Recursive,
    Umbrella,
}

#[derive(Subcommand)]
enum Command {
    /// Access classes, radii, periods, height, chains, umbrella verdicts
    Analyze {
        file: PathBuf,
        /// Also report gamma(x) and U(x) for this vertex
        #[arg(long)]
        from: Option<String>,
    },
    /// Residual matrix: height line, then the matrix as CSV
    Residual {
        file: PathBuf,
        /// Computation route; auto picks the cheapest applicable
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        /// Cross-check against the numeric pole limit
        #[arg(long)]
        check: bool,
    },
    /// Limit kernel on the umbrella part spanned by a vertex
    Kernel {
        file: PathBuf,
        #[arg(long)]
        from: String,
    },
    /// Convergence verdict for the uniform distributions from a vertex
    Converge {
        file: PathBuf,
        #[arg(long)]
        from: String,
        /// Longest cylinder inspected (default: twice the period)
        #[arg(long = "max-len")]
        max_len: Option<usize>,
    },
    /// Random paths, one per line of space-separated vertex tokens
    Sample {
        file: PathBuf,
        #[arg(long)]
        from: String,
        /// uniform:<k> | boltzmann:<s> | limit-walk:<n>
        #[arg(long)]
        mode: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Stream seed; the PATHLIM_SEED environment variable overrides it
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Cross-checks the analysis against the independent oracles
    Verify { file: PathBuf },
    /// Adjacency matrix as CSV, or the condensation as DOT
    Export {
        file: PathBuf,
        /// Emit the class condensation in DOT format instead of CSV
        #[arg(long)]
        dot: bool,
    },
}

struct CliError {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> CliError {
    CliError { code, message: message.into() }
}

impl From<pathlim::io::LoadError> for CliError {
    fn from(e: pathlim::io::LoadError) -> Self {
        fail(EXIT_INPUT, e.to_string())
    }
}

fn structure_error(e: StructureError) -> CliError {
    let code = match e {
        StructureError::UnknownVertex => EXIT_INPUT,
        StructureError::Degenerate => EXIT_DEGENERATE,
        StructureError::NoInfinitePaths => EXIT_PRECONDITION,
        StructureError::ShapeMismatch | StructureError::Spectral(_) => EXIT_FAILURE,
    };
    fail(code, e.to_string())
}

fn residual_error(e: ResidualError) -> CliError {
    let code = match &e {
        ResidualError::Degenerate => EXIT_DEGENERATE,
        ResidualError::OutOfDisc { .. }
        | ResidualError::NotUmbrella
        | ResidualError::PeriodicBasicClass { .. }
        | ResidualError::BadAggregation { .. }
        | ResidualError::NotStronglyConnected => EXIT_PRECONDITION,
        ResidualError::Structure(inner) => return structure_error(inner.clone()),
        ResidualError::VerificationFailed { .. }
        | ResidualError::Spectral(_)
        | ResidualError::Matrix(_)
        | ResidualError::Graph(_) => EXIT_FAILURE,
    };
    fail(code, e.to_string())
}

fn limits_error(e: LimitsError) -> CliError {
    let code = match &e {
        LimitsError::PathNotFromSource
        | LimitsError::OutOfRange { .. }
        | LimitsError::LengthExceedsHorizon { .. }
        | LimitsError::NoPaths { .. }
        | LimitsError::NotUmbrella
        | LimitsError::AlphaCount { .. }
        | LimitsError::NonPositiveAlpha { .. } => EXIT_PRECONDITION,
        LimitsError::Structure(inner) => return structure_error(inner.clone()),
        LimitsError::Residual(inner) => return residual_error(inner.clone()),
        LimitsError::Matrix(_) | LimitsError::Path(_) => EXIT_FAILURE,
    };
    fail(code, e.to_string())
}

fn sampling_error(e: SamplingError) -> CliError {
    let code = match &e {
        SamplingError::NoPaths { .. }
        | SamplingError::OutOfRange { .. }
        | SamplingError::OutsideSupport
        | SamplingError::DeadEnd => EXIT_PRECONDITION,
        SamplingError::Structure(inner) => return structure_error(inner.clone()),
        SamplingError::Residual(inner) => return residual_error(inner.clone()),
        SamplingError::Limits(inner) => return limits_error(inner.clone()),
    };
    fail(code, e.to_string())
}

fn oracle_error(e: OracleError) -> CliError {
    let code = match e {
        OracleError::DegenerateRadius => EXIT_DEGENERATE,
        _ => EXIT_FAILURE,
    };
    fail(code, e.to_string())
}

fn main() -> ExitCode {
    // die quietly when the consumer closes the pipe, as line tools do
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Analyze { file, from } => cmd_analyze(&file, from.as_deref()),
        Command::Residual { file, method, check } => cmd_residual(&file, method, check),
        Command::Kernel { file, from } => cmd_kernel(&file, &from),
        Command::Converge { file, from, max_len } => cmd_converge(&file, &from, max_len),
        Command::Sample { file, from, mode, count, seed } => {
            cmd_sample(&file, &from, &mode, count, seed)
        }
        Command::Verify { file } => cmd_verify(&file),
        Command::Export { file, dot } => cmd_export(&file, dot),
    }
}

fn vertex_of(g: &WeightedDigraph, token: &str) -> Result<usize, CliError> {
    g.vertex_index(token)
        .ok_or_else(|| fail(EXIT_INPUT, format!("unknown vertex `{token}`")))
}

fn member_tokens(g: &WeightedDigraph, vertices: &[usize]) -> String {
    let tokens: Vec<&str> = vertices.iter().map(|&v| g.vertex_token(v)).collect();
    tokens.join(" ")
}

fn cmd_analyze(file: &std::path::Path, from: Option<&str>) -> Result<(), CliError> {
    let g = read_digraph(file)?;
    let dec = structure::analyze(&g).map_err(structure_error)?;
    if dec.is_degenerate() {
        return Err(fail(
            EXIT_DEGENERATE,
            "digraph has spectral radius zero: no cycles, so no growth to analyze",
        ));
    }
    let hr = structure::height(&dec).map_err(structure_error)?;
    println!("vertices: {}", g.vertex_count());
    println!("rho: {}", sig9(dec.rho));
    println!("height: {}", hr.height);
    println!(
        "umbrella: {}",
        structure::is_umbrella(&dec).map_err(structure_error)?
    );
    println!(
        "augmented-umbrella: {}",
        structure::is_augmented_umbrella(&dec).map_err(structure_error)?
    );
    println!("classes: {}", dec.class_count());
    for (i, class) in dec.classes.iter().enumerate() {
        let info = &dec.per_class[i];
        println!(
            "class {i}: members {{{}}}; rho {}; period {}; basic {}; final {}",
            member_tokens(&g, class),
            sig9(info.rho),
            info.period,
            info.is_basic,
            info.is_final
        );
    }
    for chain in &hr.dominant_chains {
        let rendered: Vec<String> = chain
            .iter()
            .map(|&c| format!("{{{}}}", member_tokens(&g, &dec.classes[c])))
            .collect();
        println!("dominant chain: {}", rendered.join(" -> "));
    }
    if let Some(token) = from {
        let x = vertex_of(&g, token)?;
        let reach = structure::reachable(&g, x).map_err(structure_error)?;
        println!("gamma({token}): {}", sig9(reach.gamma));
        match structure::umbrella_spanned(&g, x) {
            Ok(span) => println!("U({token}): {}", member_tokens(&g, &span.vertices)),
            Err(StructureError::NoInfinitePaths) => {
                println!("U({token}): undefined (no infinite paths)");
            }
            Err(e) => return Err(structure_error(e)),
        }
    }
    Ok(())
}

fn compute_residual(g: &WeightedDigraph, method: Method) -> Result<ResidualResult, CliError> {
    match method {
        Method::Recursive => residual::residual_matrix(g).map_err(residual_error),
        Method::Umbrella => residual::residual_umbrella(g).map_err(residual_error),
        Method::Auto => {
            let dec = structure::analyze(g).map_err(structure_error)?;
            if dec.is_degenerate() {
                return Err(fail(EXIT_DEGENERATE, "digraph has spectral radius zero"));
            }
            // cheapest applicable route: rank-one on a single class, the
            // eigenvector construction on augmented umbrellas, else the
            // general recursion
            if dec.class_count() == 1 {
                residual::residual_strongly_connected(g).map_err(residual_error)
            } else if structure::is_augmented_umbrella(&dec).map_err(structure_error)? {
                residual::residual_umbrella(g).map_err(residual_error)
            } else {
                residual::residual_matrix(g).map_err(residual_error)
            }
        }
    }
}

fn cmd_residual(file: &std::path::Path, method: Method, check: bool) -> Result<(), CliError> {
    let g = read_digraph(file)?;
    let rr = compute_residual(&g, method)?;
    let tokens: Vec<&str> = (0..g.vertex_count()).map(|v| g.vertex_token(v)).collect();
    println!("height: {}", rr.height);
    print!("{}", csv_matrix(&rr.theta, &tokens, &tokens));
    if check {
        let nr = oracle::numeric_residual(&g, rr.height, &oracle::DEFAULT_SCHEDULE)
            .map_err(oracle_error)?;
        let gap = rr
            .theta
            .sub(&nr.estimate)
            .map_err(|e| fail(EXIT_FAILURE, e.to_string()))?
            .max_abs();
        println!("check: numeric gap {}", sig9(gap));
        // nan must fail the gate, so the passing range is spelled out
        if gap.is_nan() || gap > 1e-4 {
            return Err(fail(
                EXIT_FAILURE,
                format!("numeric cross-check failed: gap {}", sig9(gap)),
            ));
        }
    }
    Ok(())
}

fn cmd_kernel(file: &std::path::Path, from: &str) -> Result<(), CliError> {
    let g = read_digraph(file)?;
    let x = vertex_of(&g, from)?;
    let kernel = limits::limit_kernel(&g, x).map_err(limits_error)?;
    let tokens: Vec<&str> = kernel.support.iter().map(|&v| g.vertex_token(v)).collect();
    println!("support: U({from}) = {{{}}}", tokens.join(" "));
    println!("rho: {}", sig9(kernel.rho));
    print!("{}", csv_matrix(&kernel.q, &tokens, &tokens));
    Ok(())
}

fn cmd_converge(
    file: &std::path::Path,
    from: &str,
    max_len: Option<usize>,
) -> Result<(), CliError> {
    let g = read_digraph(file)?;
    let x = vertex_of(&g, from)?;
    let report = limits::uniform_convergence(&g, x, max_len).map_err(limits_error)?;
    let verdict = match (report.verdict, report.d) {
        (Verdict::Converges, 1) => "CONVERGES (aperiodic)".to_string(),
        (Verdict::Converges, _) => "CONVERGES".to_string(),
        (Verdict::Diverges, _) => "DIVERGES".to_string(),
    };
    println!("verdict: {verdict}");
    println!("d: {}", report.d);
    println!(
        "support: {{{}}}",
        member_tokens(&g, &report.support)
    );
    let row_tokens: Vec<&str> = report.support.iter().map(|&v| g.vertex_token(v)).collect();
    let residue_labels: Vec<String> = (0..report.d).map(|i| i.to_string()).collect();
    let col_tokens: Vec<&str> = residue_labels.iter().map(String::as_str).collect();
    println!("beta:");
    print!("{}", csv_matrix(&report.betas, &row_tokens, &col_tokens));
    println!("cylinders checked: {}", report.residue_limits.len());
    println!("truncated: {}", report.truncated);
    if let Some(witness) = &report.witness {
        println!("witness: {}", witness.render(&g));
        if let Some(entry) = report
            .residue_limits
            .iter()
            .find(|c| c.cylinder.vertices() == witness.vertices())
        {
            let rendered: Vec<String> = entry.limits.iter().map(|&v| sig9(v)).collect();
            println!("witness limits: {}", rendered.join(" "));
        }
    }
    Ok(())
}

fn parse_mode(text: &str) -> Result<SampleMode, CliError> {
    let invalid = || {
        fail(
            EXIT_INPUT,
            format!("mode must be uniform:<k>, boltzmann:<s> or limit-walk:<n>, got `{text}`"),
        )
    };
    let (name, arg) = text.split_once(':').ok_or_else(invalid)?;
    match name {
        "uniform" => arg.parse().map(|k| SampleMode::Uniform { k }).map_err(|_| invalid()),
        "boltzmann" => arg.parse().map(|s| SampleMode::Boltzmann { s }).map_err(|_| invalid()),
        "limit-walk" => arg.parse().map(|n| SampleMode::LimitWalk { n }).map_err(|_| invalid()),
        _ => Err(invalid()),
    }
}

fn cmd_sample(
    file: &std::path::Path,
    from: &str,
    mode: &str,
    count: usize,
    seed: u64,
) -> Result<(), CliError> {
    let g = read_digraph(file)?;
    let x = vertex_of(&g, from)?;
    let mode = parse_mode(mode)?;
    let seed = match std::env::var("PATHLIM_SEED") {
        Ok(text) => text.trim().parse().map_err(|_| {
            fail(EXIT_INPUT, format!("PATHLIM_SEED must be an unsigned integer, got `{text}`"))
        })?,
        Err(std::env::VarError::NotPresent) => seed,
        Err(e) => return Err(fail(EXIT_INPUT, format!("PATHLIM_SEED: {e}"))),
    };
    let config = SamplerConfig { seed, mode, count };
    let paths = sampling::run(&g, x, &config).map_err(sampling_error)?;
    for p in paths {
        println!("{}", p.render(&g));
    }
    Ok(())
}

fn cmd_export(file: &std::path::Path, dot: bool) -> Result<(), CliError> {
    let g = read_digraph(file)?;
    if dot {
        let dec = structure::analyze(&g).map_err(structure_error)?;
        print!("{}", condensation_dot(&g, &dec));
    } else {
        let tokens: Vec<&str> = (0..g.vertex_count()).map(|v| g.vertex_token(v)).collect();
        print!("{}", csv_matrix(g.adjacency(), &tokens, &tokens));
    }
    Ok(())
}

// ---- verify ----

struct VerifyState {
    failures: usize,
    capped: bool,
}

impl VerifyState {
    fn report(&mut self, name: &str, outcome: Result<(), String>) {
        match outcome {
            Ok(()) => println!("check {name}: pass"),
            Err(detail) => {
                println!("check {name}: FAIL ({detail})");
                self.failures += 1;
            }
        }
    }
}

fn cmd_verify(file: &std::path::Path) -> Result<(), CliError> {
    let g = read_digraph(file)?;
    let dec = structure::analyze(&g).map_err(structure_error)?;
    if dec.is_degenerate() {
        return Err(fail(EXIT_DEGENERATE, "digraph has spectral radius zero"));
    }
    let hr = structure::height(&dec).map_err(structure_error)?;
    let rr = residual::residual_matrix(&g).map_err(residual_error)?;
    // hidden hook: corrupt the residual before cross-checking, so the
    // failure path of this command is itself testable
    let mut theta = rr.theta.clone();
    if std::env::var_os("PATHLIM_VERIFY_CORRUPT").is_some() {
        let bumped = theta.get(0, g.vertex_count() - 1) + 0.5;
        theta.set(0, g.vertex_count() - 1, bumped);
    }
    let mut state = VerifyState { failures: 0, capped: false };

    state.report("class radii vs dense radius", {
        let mut worst = 0.0f64;
        for (i, class) in dec.classes.iter().enumerate() {
            let reference = oracle::gelfand_radius(&g.induced(class));
            let gap = (dec.per_class[i].rho - reference).abs() / reference.max(1.0);
            worst = worst.max(gap);
        }
        if worst <= 1e-8 {
            Ok(())
        } else {
            Err(format!("relative gap {}", sig9(worst)))
        }
    });

    let (outcome, capped) = {
        let k_max = 6usize;
        let zt = z_table(&g, k_max);
        let mut outcome = Ok(());
        let mut capped = false;
        'outer: for x in 0..g.vertex_count() {
            for k in 0..=k_max {
                match oracle::enumerate_paths(&g, x, k) {
                    Ok(paths) => {
                        let total: f64 = paths.iter().map(|(_, w)| w).sum();
                        let z = zt.z(x, k);
                        if (total - z).abs() > 1e-9 * z.max(1.0) {
                            outcome = Err(format!(
                                "Z_{}({k}) = {} but enumeration sums to {}",
                                g.vertex_token(x),
                                sig9(z),
                                sig9(total)
                            ));
                            break 'outer;
                        }
                    }
                    Err(OracleError::CapExceeded { .. }) => {
                        capped = true;
                        break 'outer;
                    }
                    Err(e) => {
                        outcome = Err(e.to_string());
                        break 'outer;
                    }
                }
            }
        }
        (outcome, capped)
    };
    state.capped = capped;
    state.report("path counts vs enumeration", outcome);

    state.report("residual vs numeric pole limit", {
        match oracle::numeric_residual(&g, rr.height, &oracle::DEFAULT_SCHEDULE) {
            Ok(nr) => {
                let gap = theta
                    .sub(&nr.estimate)
                    .map(|d| d.max_abs())
                    .unwrap_or(f64::INFINITY);
                if gap <= 1e-4 {
                    Ok(())
                } else {
                    Err(format!("gap {}", sig9(gap)))
                }
            }
            Err(e) => Err(e.to_string()),
        }
    });

    state.report("support vs dominant-chain predicate", {
        if rr.support == residual::theta_support_predicate(&dec, &hr) {
            Ok(())
        } else {
            Err("support patterns differ".to_string())
        }
    });

    state.report("height vs eigenspace index", {
        if g.vertex_count() <= oracle::EIG_SIZE_BOUND {
            match oracle::generalized_eigenspace_dim(g.adjacency(), dec.rho) {
                Ok(dim) if dim == rr.height => Ok(()),
                Ok(dim) => Err(format!("height {} but index {dim}", rr.height)),
                Err(e) => Err(e.to_string()),
            }
        } else {
            println!("note: digraph too large for the rank sweep, skipping");
            Ok(())
        }
    });

    state.report("route agreement", {
        let mut outcome = Ok(());
        if dec.class_count() == 1 {
            match residual::residual_strongly_connected(&g) {
                Ok(other) => {
                    let gap = rr.theta.sub(&other.theta).map(|d| d.max_abs()).unwrap_or(f64::INFINITY);
                    if gap > 1e-9 * rr.theta.max_abs().max(1.0) {
                        outcome = Err(format!("strongly-connected route differs by {}", sig9(gap)));
                    }
                }
                Err(e) => outcome = Err(e.to_string()),
            }
        } else if structure::is_augmented_umbrella(&dec).unwrap_or(false) {
            match residual::residual_umbrella(&g) {
                Ok(other) => {
                    let gap = rr.theta.sub(&other.theta).map(|d| d.max_abs()).unwrap_or(f64::INFINITY);
                    if gap > 1e-9 * rr.theta.max_abs().max(1.0) {
                        outcome = Err(format!("umbrella route differs by {}", sig9(gap)));
                    }
                }
                Err(e) => outcome = Err(e.to_string()),
            }
        }
        outcome
    });

    state.report("limit kernels", {
        let mut outcome = Ok(());
        for x in 0..g.vertex_count() {
            match limits::limit_kernel(&g, x) {
                Ok(kernel) => match limits::validate_cocycle_measure(&g, &kernel) {
                    Ok(report) if report.is_valid() => {}
                    Ok(_) => {
                        outcome = Err(format!(
                            "kernel from {} violates the measure identities",
                            g.vertex_token(x)
                        ));
                        break;
                    }
                    Err(e) => {
                        outcome = Err(format!("kernel from {}: {e}", g.vertex_token(x)));
                        break;
                    }
                },
                // vertices without infinite paths carry no kernel
                Err(LimitsError::Structure(StructureError::NoInfinitePaths)) => continue,
                Err(e) => {
                    outcome = Err(format!("kernel from {}: {e}", g.vertex_token(x)));
                    break;
                }
            }
        }
        outcome
    });

    if state.capped {
        println!("warning: path enumeration hit the cap; verification is partial");
    }
    println!(
        "verified 7 checks, {} failed{}",
        state.failures,
        if state.capped { " (partial)" } else { "" }
    );
    if state.failures > 0 {
        return Err(fail(EXIT_FAILURE, "verification failed"));
    }
    Ok(())
}
