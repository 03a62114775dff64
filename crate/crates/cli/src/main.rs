//! `cascade`: constants, single simulations and batch experiments for
//! multiplicative-cascade occupancy trees.
//!
//! Exit codes: 0 success, 1 invalid input or other failure, 2 unsupported
//! regime, 3 expansion budget exhausted.

use std::path::PathBuf;
use std::process::ExitCode;

use cascade_core::cascade::{
    biggins_check, martingale_step_check, Budget, CascadeEnvironment, Expansion, OccupancyState,
    DEFAULT_BUDGET,
};
use cascade_core::constants::{
    critical_constants, height_constant, saturation_constant, CriticalConstants, SearchOptions,
    Threshold,
};
use cascade_core::experiments::spacings::spacing_experiment;
use cascade_core::experiments::{
    alpha_scan, geometric_grid, phase_scan, slope_run, slopes_table, ExperimentConfig, Format,
    ResultTable, Target, Value,
};
use cascade_core::rng::derive_seed;
use cascade_core::{BallMode, Error, LaplaceProfile, SplittingLaw};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

const LAW_HELP: &str = "Splitting law: uniform-stick | dirac-half | mix23:alpha=<f> | law075u | \
                        heavytail:samples=<n>,seed=<u64>";

const TOLERANCE_NOTE: &str = "finite-n corrections are O(ln ln n / ln n) with unknown constants; \
                              any slope tolerance is an engineering choice";

#[derive(Parser, Debug)]
#[command(name = "cascade", version, about = "Heights and saturation levels of cascade occupancy trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical exponents and the constants C_j, C*, C₋ of a law.
    Constants {
        #[arg(long, help = LAW_HELP)]
        law: SplittingLaw,
        /// Fixed thresholds j (comma separated).
        #[arg(long, value_delimiter = ',')]
        j: Vec<u64>,
        /// Power-threshold exponents α in (0, 1) (comma separated).
        #[arg(long, value_delimiter = ',')]
        alpha: Vec<f64>,
        #[arg(long, conflicts_with = "csv")]
        json: bool,
        #[arg(long)]
        csv: bool,
    },
    /// Throws n balls on one environment and prints H_{n,j}, G_{n,j} as a CSV row.
    Simulate {
        #[arg(long, help = LAW_HELP)]
        law: SplittingLaw,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        j: u64,
        #[arg(long, default_value = "exact")]
        mode: BallMode,
        #[arg(long, default_value_t = 0)]
        env_seed: u64,
        #[arg(long, default_value_t = 0)]
        ball_seed: u64,
        /// Adds N, M, p_min, p_max and W^(k)(theta) columns for k = 1..=K.
        #[arg(long, value_name = "K")]
        stats_upto: Option<u32>,
        /// θ of the W^(k)(θ) columns.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Compares E[W^(k+1)(θ) | generation k] with W^(k)(θ) by resampling.
    MartingaleCheck {
        #[arg(long, help = LAW_HELP)]
        law: SplittingLaw,
        #[arg(long, default_value_t = 4)]
        k: u32,
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        /// Resamples of generation k+1.
        #[arg(long, default_value_t = 10_000)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        env_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Window counts of generation-k box masses against the local-limit prediction.
    BigginsCheck {
        #[arg(long, help = LAW_HELP)]
        law: SplittingLaw,
        #[arg(long, default_value_t = 16)]
        k: u32,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        theta: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, default_value_t = std::f64::consts::LN_2, allow_negative_numbers = true)]
        b: f64,
        /// Number of environments.
        #[arg(long, default_value_t = 200)]
        replicas: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
    },
    /// Height slopes for several fixed thresholds j.
    ScanJ {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        j: Vec<u64>,
        /// `saturation` fits G_{n,j} instead of H_{n,j} (j = 1 allowed).
        #[arg(long, default_value = "height")]
        target: Target,
    },
    /// Slopes for power thresholds ⌈n^α⌉.
    ScanAlpha {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        alpha: Vec<f64>,
        #[arg(long, default_value = "height")]
        target: Target,
    },
    /// Extreme cluster widths of uniform order statistics.
    Spacings {
        #[command(flatten)]
        shared: Shared,
        /// Cluster size j of m̲_{n,j} and m̄_{n,j}.
        #[arg(long, default_value_t = 2)]
        j: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.5")]
        alpha: Vec<f64>,
    },
}

#[derive(Args, Debug)]
struct Shared {
    /// Splitting law (ignored by `spacings`).
    #[arg(long, default_value = "uniform-stick", help = LAW_HELP)]
    law: SplittingLaw,
    #[arg(long, default_value_t = 1 << 10)]
    n_min: u64,
    #[arg(long, default_value_t = 1 << 20)]
    n_max: u64,
    #[arg(long, default_value_t = 8)]
    grid_points: usize,
    #[arg(long, default_value_t = 50)]
    replicas: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ball placement (ignored by `spacings`).
    #[arg(long, default_value = "exact")]
    mode: BallMode,
    /// Node-visit cap per measurement.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: Format,
}

impl Shared {
    fn grid(&self) -> Result<Vec<u64>, Error> {
        geometric_grid(self.n_min, self.n_max, self.grid_points)
    }

    fn meta(&self, experiment: &str) -> Vec<(String, String)> {
        [
            ("experiment", experiment.to_string()),
            ("law", self.law.to_string()),
            ("n_min", self.n_min.to_string()),
            ("n_max", self.n_max.to_string()),
            ("grid_points", self.grid_points.to_string()),
            ("replicas", self.replicas.to_string()),
            ("seed", self.seed.to_string()),
            ("mode", self.mode.to_string()),
            ("budget", self.budget.to_string()),
            ("note", TOLERANCE_NOTE.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnsupportedRegime(_) => 2,
        Error::BudgetExceeded { .. } => 3,
        _ => 1,
    }
}

fn json_number(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn opt_value(x: Option<f64>) -> Value {
    x.map_or_else(|| Value::Text(String::new()), Value::Float)
}

/// Height and saturation constants of one threshold; an unsupported regime
/// leaves the cell empty.
fn threshold_constants(
    c: &CriticalConstants,
    profile: &LaplaceProfile,
    t: Threshold,
) -> Result<(Option<f64>, Option<f64>), Error> {
    let keep = |r: Result<f64, Error>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UnsupportedRegime(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let h = if matches!(t, Threshold::Fixed(1)) {
        None
    } else {
        keep(height_constant(c, profile, t))?
    };
    Ok((h, keep(saturation_constant(c, t))?))
}

fn constants_cmd(law: SplittingLaw, js: &[u64], alphas: &[f64], json: bool, csv: bool) -> Result<(), Error> {
    let profile = law.profile()?;
    let c = critical_constants(&profile, &SearchOptions::default())?;
    let thresholds: Vec<Threshold> = js
        .iter()
        .map(|&j| Threshold::Fixed(j))
        .chain(alphas.iter().map(|&a| Threshold::Power(a)))
        .collect();
    let rows = thresholds
        .iter()
        .map(|&t| threshold_constants(&c, &profile, t).map(|v| (t, v)))
        .collect::<Result<Vec<_>, _>>()?;
    if json {
        let per: Vec<serde_json::Value> = rows
            .iter()
            .map(|(t, (h, g))| {
                let (kind, param) = match *t {
                    Threshold::Fixed(j) => ("fixed", json!(j)),
                    Threshold::Power(a) => ("power", json!(a)),
                };
                json!({
                    "kind": kind,
                    "param": param,
                    "height_constant": h.map(json_number),
                    "saturation_constant": g.map(json_number),
                })
            })
            .collect();
        let out = json!({
            "law": law.to_string(),
            "theta_lower": json_number(c.theta_lower),
            "theta_star_lower": json_number(c.theta_star_lower),
            "theta_star_upper": json_number(c.theta_star_upper),
            "c_lower": json_number(c.c_lower),
            "c_upper": json_number(c.c_upper),
            "residual_lower": c.residual_lower.map(json_number),
            "residual_upper": c.residual_upper.map(json_number),
            "hyp2": c.hyp2,
            "hyp3": c.hyp3,
            "thresholds": per,
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json encoding"));
        return Ok(());
    }
    let mut t = ResultTable::new([
        "theta_lower",
        "theta_star_lower",
        "theta_star_upper",
        "c_lower",
        "c_upper",
        "residual_lower",
        "residual_upper",
        "hyp2",
        "hyp3",
        "threshold_kind",
        "threshold_param",
        "height_constant",
        "saturation_constant",
    ])
    .with_meta("law", &law);
    let base = |t: &mut ResultTable, kind: Value, param: Value, h: Value, g: Value| {
        t.push(vec![
            c.theta_lower.into(),
            c.theta_star_lower.into(),
            c.theta_star_upper.into(),
            c.c_lower.into(),
            c.c_upper.into(),
            opt_value(c.residual_lower),
            opt_value(c.residual_upper),
            c.hyp2.to_string().into(),
            c.hyp3.to_string().into(),
            kind,
            param,
            h,
            g,
        ])
    };
    if rows.is_empty() {
        let empty = || Value::Text(String::new());
        base(&mut t, empty(), empty(), empty(), empty());
    }
    for (th, (h, g)) in rows {
        let (kind, param): (Value, Value) = match th {
            Threshold::Fixed(j) => ("fixed".into(), j.into()),
            Threshold::Power(a) => ("power".into(), a.into()),
        };
        base(&mut t, kind, param, opt_value(h), opt_value(g));
    }
    t.emit(if csv { Format::Csv } else { Format::Table }, None)
}

#[allow(clippy::too_many_arguments)]
fn simulate_cmd(
    law: SplittingLaw,
    n: u64,
    j: u64,
    mode: BallMode,
    env_seed: u64,
    ball_seed: u64,
    stats_upto: Option<u32>,
    theta: f64,
    budget: u64,
) -> Result<(), Error> {
    let env = CascadeEnvironment::new(law, env_seed);
    let occ = OccupancyState::throw_balls(env, n, mode, ball_seed);
    let mut b = Budget::new(budget);
    let (h, g) = occ.height_and_saturation(j, &mut b)?;
    let mut columns: Vec<String> = ["n", "j", "mode", "env_seed", "ball_seed", "realized_total", "H", "G"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut row: Vec<Value> = vec![
        n.into(),
        j.into(),
        mode.to_string().into(),
        env_seed.into(),
        ball_seed.into(),
        occ.realized_total().into(),
        h.into(),
        g.into(),
    ];
    if let Some(kmax) = stats_upto {
        let profile = law.profile()?;
        for k in 1..=kmax {
            let mut bk = Budget::new(budget);
            let s = occ.generation_stats(k, Expansion::Full, &mut bk)?;
            for name in ["N", "M", "p_min", "p_max", "W"] {
                columns.push(format!("{name}_{k}"));
            }
            row.extend([
                s.n_at_least(j)?.into(),
                s.m_below(j)?.into(),
                s.p_min().into(),
                s.p_max().into(),
                s.martingale(&profile, theta)?.into(),
            ]);
        }
    }
    let mut t = ResultTable::new(columns);
    t.push(row);
    let text = t.render(Format::Csv)?;
    // one header row and one data row, no metadata
    print!("{text}");
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn martingale_cmd(
    law: SplittingLaw,
    k: u32,
    theta: f64,
    replicas: usize,
    env_seed: u64,
    seed: u64,
    budget: u64,
) -> Result<(), Error> {
    let profile = law.profile()?;
    let env = CascadeEnvironment::new(law, env_seed);
    let mut b = Budget::new(budget);
    let m = martingale_step_check(&env, &profile, k, theta, replicas, seed, &mut b)?;
    let mut t = ResultTable::new(["k", "theta", "w_k", "mean_next", "stderr", "z"])
        .with_meta("law", &law)
        .with_meta("env_seed", env_seed)
        .with_meta("seed", seed)
        .with_meta("resamples", replicas);
    t.push(vec![
        k.into(),
        theta.into(),
        m.w_k.into(),
        m.mean_next.into(),
        m.stderr.into(),
        m.z_score().into(),
    ]);
    t.emit(Format::Csv, None)
}

#[allow(clippy::too_many_arguments)]
fn biggins_cmd(
    law: SplittingLaw,
    k: u32,
    theta: f64,
    a: f64,
    bnd: f64,
    replicas: usize,
    seed: u64,
    budget: u64,
) -> Result<(), Error> {
    if replicas == 0 {
        return Err(Error::InvalidConfig("replicas must be at least 1".into()));
    }
    let profile = law.profile()?;
    let c = critical_constants(&profile, &SearchOptions::default())?;
    let mut rows = Vec::with_capacity(replicas);
    for r in 0..replicas {
        let env_seed = derive_seed(seed, &[r as u64]);
        let env = CascadeEnvironment::new(law, env_seed);
        let mut b = Budget::new(budget);
        rows.push((env_seed, biggins_check(&env, &profile, &c, k, theta, a, bnd, &mut b)?));
    }
    let mean_ratio = rows.iter().map(|(_, o)| o.ratio()).sum::<f64>() / replicas as f64;
    let mut t = ResultTable::new(["replica", "env_seed", "empirical", "predicted", "martingale", "ratio"])
        .with_meta("law", &law)
        .with_meta("k", k)
        .with_meta("theta", theta)
        .with_meta("a", a)
        .with_meta("b", bnd)
        .with_meta("seed", seed)
        .with_meta("mean_ratio", mean_ratio)
        .with_meta("note", "prediction uses W^(k)(theta) in place of the terminal martingale");
    for (r, (s, o)) in rows.iter().enumerate() {
        t.push(vec![
            r.into(),
            (*s).into(),
            o.empirical.into(),
            o.predicted.into(),
            o.martingale.into(),
            o.ratio().into(),
        ]);
    }
    t.emit(Format::Csv, None)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Constants { law, j, alpha, json, csv } => {
            let j = if j.is_empty() && alpha.is_empty() { vec![2, 3] } else { j };
            constants_cmd(law, &j, &alpha, json, csv)
        }
        Command::Simulate {
            law,
            n,
            j,
            mode,
            env_seed,
            ball_seed,
            stats_upto,
            theta,
            budget,
        } => simulate_cmd(law, n, j, mode, env_seed, ball_seed, stats_upto, theta, budget),
        Command::MartingaleCheck {
            law,
            k,
            theta,
            replicas,
            env_seed,
            seed,
            budget,
        } => martingale_cmd(law, k, theta, replicas, env_seed, seed, budget),
        Command::BigginsCheck {
            law,
            k,
            theta,
            a,
            b,
            replicas,
            seed,
            budget,
        } => biggins_cmd(law, k, theta, a, b, replicas, seed, budget),
        Command::ScanJ { shared, j, target } => {
            let grid = shared.grid()?;
            let est = match target {
                Target::Height => {
                    phase_scan(shared.law, &j, &grid, shared.replicas, shared.seed, shared.mode, shared.budget)?
                }
                Target::Saturation => j
                    .iter()
                    .map(|&j| {
                        slope_run(&ExperimentConfig {
                            law: shared.law,
                            target,
                            threshold: Threshold::Fixed(j),
                            n_grid: grid.clone(),
                            replicas: shared.replicas,
                            base_seed: shared.seed,
                            mode: shared.mode,
                            budget: shared.budget,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let mut meta = shared.meta("scan-j");
            meta.push(("target".into(), target.to_string()));
            meta.push((
                "j".into(),
                j.iter().map(u64::to_string).collect::<Vec<_>>().join(";"),
            ));
            slopes_table(&est, &meta).emit(shared.format, shared.out.as_deref())
        }
        Command::ScanAlpha { shared, alpha, target } => {
            let grid = shared.grid()?;
            let est = alpha_scan(
                shared.law,
                target,
                &alpha,
                &grid,
                shared.replicas,
                shared.seed,
                shared.mode,
                shared.budget,
            )?;
            let mut meta = shared.meta("scan-alpha");
            meta.push(("target".into(), target.to_string()));
            meta.push((
                "alpha".into(),
                alpha.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            ));
            slopes_table(&est, &meta).emit(shared.format, shared.out.as_deref())
        }
        Command::Spacings { shared, j, alpha } => {
            let grid = shared.grid()?;
            let report = spacing_experiment(&grid, j, &alpha, shared.replicas, shared.seed)?;
            report
                .to_table()
                .with_meta("n_min", shared.n_min)
                .with_meta("n_max", shared.n_max)
                .with_meta("grid_points", shared.grid_points)
                .emit(shared.format, shared.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
