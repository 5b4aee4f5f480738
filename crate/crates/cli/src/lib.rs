//! Batch front-end: `agemdp <subcommand> --config <path> [--out <dir>] [--seed <u64>]`.
//!
//! Exit codes: 0 on success, 2 for configuration or validation failures,
//! 1 for runtime errors. `AGEMDP_THREADS` sets the worker count (0 or unset
//! means one per core); outputs do not depend on it.

// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use agemdp::average::{bias_envelope, renewal_bisection, vanishing_discount, AverageSolution};
use agemdp::discounted::{compare_age_information, value_iteration};
use agemdp::export;
use agemdp::model::{validate_model, A6Mode};
use agemdp::reduction::embed;
use agemdp::sim::{discounted_horizon, mc_average, mc_discounted, simulate_path, AverageMcOptions};
use agemdp::{ActionDistribution, AgeGrid, AgePolicy, Discretization, Error, TransitionRateModel};
use clap::Parser;
use config::{ConfigError, ExperimentConfig, PolicyChoice};
use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

#[derive(clap::Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Parser, Debug)]
#[command(name = "agemdp", version, about = "Solve and simulate age-dependent controlled Markov chains")]
struct Args {
    #[arg(value_enum)]
    command: CommandName,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum CommandName {
    Validate,
    SolveDiscounted,
    SolveAverage,
    Simulate,
    Compare,
}

enum Failure {
    Config(String),
    Validation,
    Runtime(Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownModel(_) | Error::InvalidModel(_) => Failure::Config(format!("model: {e}")),
            other => Failure::Runtime(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(Error::Io(e))
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = match std::env::var("AGEMDP_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                eprintln!("error: AGEMDP_THREADS must be a nonnegative integer, got `{v}`");
                return 2;
            }
        },
        Err(_) => 0,
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(&args)) {
        Ok(()) => 0,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Validation) => 2,
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
    seed: u64,
    model: TransitionRateModel,
}

impl Context {
    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        std::fs::create_dir_all(&self.out)?;
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn grid(&self) -> Result<AgeGrid, Failure> {
        self.cfg.build_grid(&self.model).map_err(|e| Failure::Config(format!("grid: {e}")))
    }

    fn alpha(&self) -> Result<f64, Failure> {
        self.cfg.alpha.ok_or_else(|| Failure::Config("this command needs `alpha`".into()))
    }
}

fn dispatch(args: &Args) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(&args.common.config)?;
    let model = cfg.build_model()?;
    let out = args.common.out.clone().unwrap_or_else(|| cfg.outputs.directory.clone());
    let seed = args.common.seed.unwrap_or(cfg.sim.seed);
    let ctx = Context { cfg, out, seed, model };
    match args.command {
        CommandName::Validate => validate(&ctx),
        CommandName::SolveDiscounted => solve_discounted(&ctx),
        CommandName::SolveAverage => solve_average(&ctx),
        CommandName::Simulate => simulate(&ctx),
        CommandName::Compare => compare(&ctx),
    }
}

fn validate(ctx: &Context) -> Result<(), Failure> {
    let mut ages = match ctx.cfg.build_grid(&ctx.model) {
        Ok(g) => g.sample_ages(),
        // The default horizon is unusable when `m` is tiny; sample a fixed window.
        Err(_) => AgeGrid::uniform(50.0, 500).expect("fixed grid").sample_ages(),
    };
    ages.extend(ctx.model.age_breakpoints());
    ages.sort_by(f64::total_cmp);
    ages.dedup();
    let a6 = match &ctx.cfg.average {
        Some(avg) => A6Mode::Reference(avg.reference_state),
        None => A6Mode::Skip,
    };
    let report = validate_model(&ctx.model, &ages, a6);
    print!("{report}");
    let b = ctx.model.bounds();
    println!("bounds: M={} m={} C_tilde={}", b.max_rate, b.min_rate, b.max_cost);
    if report.passes() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn solve_discounted(ctx: &Context) -> Result<(), Failure> {
    let alpha = ctx.alpha()?;
    let disc = Discretization::new(&ctx.model, ctx.grid()?);
    let sol = value_iteration(&disc, alpha, &ctx.cfg.vi_options())?;
    export::write_values(ctx.create("values.csv")?, &sol.values)?;
    export::write_phi(ctx.create("phi.csv")?, &sol, ctx.model.actions())?;
    export::write_convergence(ctx.create("convergence.csv")?, &sol.history)?;
    let tables = embed(&disc, &sol.policy, alpha)?;
    export::write_embedded(ctx.create("embedded.csv")?, &tables)?;
    export::write_survival(ctx.create("survival.csv")?, disc.grid(), &tables)?;
    export::write_cdfs(ctx.create("cdf.csv")?, disc.grid(), &tables)?;
    println!("alpha={alpha} iterations={} residual={:e} error_bound={:e}", sol.iterations, sol.residual, sol.error_bound);
    for (i, v) in sol.values.iter().enumerate() {
        println!("V({i})={}", export::fmt_sig(*v));
    }
    Ok(())
}

fn average_pair(ctx: &Context, disc: &Discretization) -> Result<(AverageSolution, AverageSolution), Failure> {
    let opts = ctx.cfg.average_options();
    let vanishing = vanishing_discount(disc, &ctx.cfg.alpha_seq(), &opts)?;
    let renewal = renewal_bisection(disc, 0.0, ctx.model.bounds().max_cost, &opts)?;
    Ok((vanishing, renewal))
}

fn solve_average(ctx: &Context) -> Result<(), Failure> {
    let disc = Discretization::new(&ctx.model, ctx.grid()?);
    let (v, r) = average_pair(ctx, &disc)?;
    let opts = ctx.cfg.average_options();
    let envelope = bias_envelope(&disc, opts.reference, &opts)?;
    let n = v.diagnostics.len();
    let cauchy = (v.diagnostics[n - 1].alpha_v_ref - v.diagnostics[n - 2].alpha_v_ref).abs();
    let gap = (v.gain - r.gain).abs();
    let rows = [
        ("g_vanishing", v.gain),
        ("g_renewal", r.gain),
        ("agreement_gap", gap),
        ("residual_vanishing", v.residual),
        ("residual_renewal", r.residual),
        ("cauchy_gap", cauchy),
        ("bias_envelope", envelope),
    ];
    export::write_quantities(ctx.create("average.csv")?, &rows)?;
    export::write_state_columns(ctx.create("bias.csv")?, &[("h_vanishing", &v.bias), ("h_renewal", &r.bias)])?;
    export::write_alpha_diagnostics(ctx.create("alpha_diagnostics.csv")?, &v.diagnostics)?;
    export::write_bisection_trace(ctx.create("bisection_trace.csv")?, &r.trace)?;
    for (name, value) in rows {
        println!("{name}={}", export::fmt_sig(value));
    }
    Ok(())
}

fn policy_for(ctx: &Context, disc: &Discretization) -> Result<AgePolicy, Failure> {
    match &ctx.cfg.sim.policy {
        PolicyChoice::DiscountedOptimal => {
            let alpha = ctx.alpha()?;
            Ok(value_iteration(disc, alpha, &ctx.cfg.vi_options())?.policy)
        }
        PolicyChoice::AverageOptimal => {
            let opts = ctx.cfg.average_options();
            Ok(renewal_bisection(disc, 0.0, ctx.model.bounds().max_cost, &opts)?.policy)
        }
        PolicyChoice::Constant { action } => {
            if *action >= ctx.model.n_actions() {
                return Err(Failure::Config(format!("sim.policy.action {action} out of range")));
            }
            Ok(AgePolicy::constant(disc.grid().clone(), ctx.model.n_states(), ActionDistribution::point(*action)))
        }
    }
}

fn simulate(ctx: &Context) -> Result<(), Failure> {
    let sim = &ctx.cfg.sim;
    let disc = Discretization::new(&ctx.model, ctx.grid()?);
    let policy = policy_for(ctx, &disc)?;
    let mut rows = Vec::new();
    if let Some(alpha) = ctx.cfg.alpha {
        let horizon = sim.horizon.unwrap_or_else(|| discounted_horizon(ctx.model.bounds().max_cost, alpha, sim.truncation));
        let horizon = if horizon > 0.0 { horizon } else { 1.0 / alpha };
        rows.push(("discounted".to_string(), mc_discounted(&ctx.model, &policy, alpha, sim.start_state, sim.paths, horizon, ctx.seed)?));
    }
    if sim.n_jumps > 0 {
        let reference = ctx.cfg.average_options().reference;
        let a6 = validate_model(&ctx.model, &disc.grid().sample_ages(), A6Mode::Reference(reference));
        let holds = a6.a6.is_some_and(|s| s.holds);
        let opts = AverageMcOptions {
            start: sim.start_state,
            jumps_per_replica: sim.n_jumps,
            replicas: sim.replicas,
            reference: holds.then_some(reference),
        };
        let est = mc_average(&ctx.model, &policy, &opts, ctx.seed)?;
        rows.push(("average_ratio".to_string(), est.ratio));
        if let Some(c) = est.cycle {
            rows.push(("average_cycle".to_string(), c));
        }
    }
    if rows.is_empty() {
        return Err(Failure::Config("simulate needs `alpha` or a positive `sim.n_jumps`".into()));
    }
    export::write_estimates(ctx.create("estimates.csv")?, &rows)?;
    if let Some(h) = sim.trajectory_horizon {
        let tr = simulate_path(&ctx.model, &policy, sim.start_state, h, ctx.seed)?;
        export::write_trajectory(ctx.create("trajectory.csv")?, &tr)?;
    }
    for (name, e) in &rows {
        println!("{name}: mean={} se={} n={} truncation_bound={}", export::fmt_sig(e.mean), export::fmt_sig(e.se), e.n, export::fmt_sig(e.truncation_bound));
    }
    Ok(())
}

fn compare(ctx: &Context) -> Result<(), Failure> {
    let alpha = ctx.alpha()?;
    let disc = Discretization::new(&ctx.model, ctx.grid()?);
    let c = compare_age_information(&disc, alpha, &ctx.cfg.vi_options())?;
    export::write_comparison(ctx.create("compare.csv")?, &c)?;
    for i in 0..c.aware.values.len() {
        println!(
            "state {i}: V_ageaware={} V_ageblind={} relative_improvement={}",
            export::fmt_sig(c.aware.values[i]),
            export::fmt_sig(c.blind.values[i]),
            export::fmt_sig(c.relative_improvement[i])
        );
    }
    Ok(())
}
