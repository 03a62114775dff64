//! Replica harness: slope of mean heights / saturation levels against `ln n`.
//!
//! Replica `r` uses the environment seeded by `(base_seed, r)` for every `n`
//! of the grid, and balls seeded by `(base_seed, r, n_index)`. Replicas are
//! fanned out with rayon and collected by index, so the output does not
//! depend on scheduling.

pub mod spacings;
pub mod table;

use rayon::prelude::*;

use crate::cascade::{BallMode, Budget, CascadeEnvironment, OccupancyState};
use crate::constants::{
    critical_constants, height_constant, saturation_constant, SearchOptions, Threshold,
};
use crate::error::{Error, Result};
use crate::laws::SplittingLaw;
use crate::rng::derive_seed;
use crate::stats::{least_squares, mean_sd};

pub use table::{Format, ResultTable, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Height,
    Saturation,
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Target::Height => "height",
            Target::Saturation => "saturation",
        })
    }
}

impl std::str::FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "height" => Ok(Target::Height),
            "saturation" => Ok(Target::Saturation),
            other => Err(Error::InvalidConfig(format!("unknown target `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub law: SplittingLaw,
    pub target: Target,
    pub threshold: Threshold,
    pub n_grid: Vec<u64>,
    pub replicas: usize,
    pub base_seed: u64,
    pub mode: BallMode,
    /// Node-visit cap per single measurement.
    pub budget: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.n_grid)?;
        if self.replicas == 0 {
            return Err(Error::InvalidConfig("replicas must be at least 1".into()));
        }
        Ok(())
    }
}

fn validate_grid(n_grid: &[u64]) -> Result<()> {
    if n_grid.len() < 4 {
        return Err(Error::InvalidConfig(format!(
            "n grid needs at least 4 points, got {}",
            n_grid.len()
        )));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::InvalidConfig("n grid must be positive and strictly increasing".into()));
    }
    Ok(())
}

/// `points` values `round(2^(lo + i (hi - lo)/(points - 1)))`, deduplicated.
pub fn geometric_grid(n_min: u64, n_max: u64, points: usize) -> Result<Vec<u64>> {
    if n_min == 0 || n_max <= n_min || points < 2 {
        return Err(Error::InvalidConfig(format!(
            "bad grid: n_min = {n_min}, n_max = {n_max}, points = {points}"
        )));
    }
    let (lo, hi) = ((n_min as f64).ln(), (n_max as f64).ln());
    let mut v: Vec<u64> = (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp().round() as u64)
        .collect();
    v[0] = n_min;
    v[points - 1] = n_max;
    v.dedup();
    Ok(v)
}

/// Mean and spread of the measured level at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub n: u64,
    /// Integer threshold used at this `n`.
    pub threshold: u64,
    pub mean: f64,
    pub sd: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimate {
    pub threshold: Threshold,
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub points: Vec<PointSummary>,
    pub reference_constant: f64,
    pub relative_gap: f64,
}

fn replica_seeds(base: u64, replica: usize, n_index: usize) -> (u64, u64) {
    (
        derive_seed(base, &[replica as u64]),
        derive_seed(base, &[replica as u64, n_index as u64]),
    )
}

/// Runs `measure` for every (grid point, replica) and returns the values
/// indexed `[n_index][replica]`.
fn run_grid<T, F>(
    law: SplittingLaw,
    n_grid: &[u64],
    replicas: usize,
    base_seed: u64,
    mode: BallMode,
    measure: F,
) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(usize, &OccupancyState) -> Result<T> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..n_grid.len())
        .flat_map(|i| (0..replicas).map(move |r| (i, r)))
        .collect();
    let flat = jobs
        .par_iter()
        .map(|&(i, r)| {
            let (env_seed, ball_seed) = replica_seeds(base_seed, r, i);
            let env = CascadeEnvironment::new(law, env_seed);
            let occ = OccupancyState::throw_balls(env, n_grid[i], mode, ball_seed);
            measure(i, &occ)
        })
        .collect::<Result<Vec<T>>>()?;
    let mut it = flat.into_iter();
    Ok((0..n_grid.len())
        .map(|_| it.by_ref().take(replicas).collect())
        .collect())
}

fn summarize(
    threshold: Threshold,
    n_grid: &[u64],
    values: &[Vec<f64>],
    reference: f64,
) -> SlopeEstimate {
    let points: Vec<PointSummary> = n_grid
        .iter()
        .zip(values)
        .map(|(&n, v)| {
            let (mean, sd) = mean_sd(v);
            PointSummary {
                n,
                threshold: threshold.for_balls(n),
                mean,
                sd,
                replicas: v.len(),
            }
        })
        .collect();
    let xs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let fit = least_squares(&xs, &ys);
    SlopeEstimate {
        threshold,
        slope: fit.slope,
        intercept: fit.intercept,
        stderr: fit.slope_stderr,
        points,
        reference_constant: reference,
        relative_gap: (fit.slope - reference) / reference,
    }
}

/// The constant the slope should approach.
pub fn reference_constant(law: &SplittingLaw, target: Target, threshold: Threshold) -> Result<f64> {
    let profile = law.profile()?;
    let constants = critical_constants(&profile, &SearchOptions::default())?;
    match target {
        Target::Height => height_constant(&constants, &profile, threshold),
        Target::Saturation => saturation_constant(&constants, threshold),
    }
}

/// Mean level per grid point over replicas, and its least-squares slope in
/// `ln n`, next to the predicted constant.
pub fn slope_run(config: &ExperimentConfig) -> Result<SlopeEstimate> {
    config.validate()?;
    let reference = reference_constant(&config.law, config.target, config.threshold)?;
    let target = config.target;
    let threshold = config.threshold;
    let n_grid = &config.n_grid;
    let values = run_grid(
        config.law,
        n_grid,
        config.replicas,
        config.base_seed,
        config.mode,
        |i, occ| {
            let j = threshold.for_balls(n_grid[i]);
            let mut budget = Budget::new(config.budget);
            let level = match target {
                Target::Height => occ.heights(&[j], &mut budget)?[0],
                Target::Saturation => occ.saturation_levels(&[j], &mut budget)?[0],
            };
            Ok(f64::from(level))
        },
    )?;
    Ok(summarize(threshold, n_grid, &values, reference))
}

/// Height slopes for several fixed thresholds from one set of replicas.
/// Row `j` is bit-identical to `slope_run` with `Threshold::Fixed(j)` and the
/// same seeds.
pub fn phase_scan(
    law: SplittingLaw,
    j_list: &[u64],
    n_grid: &[u64],
    replicas: usize,
    base_seed: u64,
    mode: BallMode,
    budget: u64,
) -> Result<Vec<SlopeEstimate>> {
    validate_grid(n_grid)?;
    if replicas == 0 {
        return Err(Error::InvalidConfig("replicas must be at least 1".into()));
    }
    if j_list.is_empty() || j_list.windows(2).any(|w| w[0] >= w[1]) || j_list[0] < 2 {
        return Err(Error::InvalidConfig(
            "j list must be nonempty, strictly increasing and start at 2 or more".into(),
        ));
    }
    let profile = law.profile()?;
    let constants = critical_constants(&profile, &SearchOptions::default())?;
    let references = j_list
        .iter()
        .map(|&j| height_constant(&constants, &profile, Threshold::Fixed(j)))
        .collect::<Result<Vec<_>>>()?;
    let values = run_grid(law, n_grid, replicas, base_seed, mode, |_, occ| {
        let mut b = Budget::new(budget);
        occ.heights(j_list, &mut b)
    })?;
    Ok(j_list
        .iter()
        .enumerate()
        .map(|(col, &j)| {
            let per_n: Vec<Vec<f64>> = values
                .iter()
                .map(|reps| reps.iter().map(|h| f64::from(h[col])).collect())
                .collect();
            summarize(Threshold::Fixed(j), n_grid, &per_n, references[col])
        })
        .collect())
}

/// Power-threshold slopes `H_{n,⌈n^α⌉}` (or `G`) for several `α`.
pub fn alpha_scan(
    law: SplittingLaw,
    target: Target,
    alphas: &[f64],
    n_grid: &[u64],
    replicas: usize,
    base_seed: u64,
    mode: BallMode,
    budget: u64,
) -> Result<Vec<SlopeEstimate>> {
    alphas
        .iter()
        .map(|&alpha| {
            slope_run(&ExperimentConfig {
                law,
                target,
                threshold: Threshold::Power(alpha),
                n_grid: n_grid.to_vec(),
                replicas,
                base_seed,
                mode,
                budget,
            })
        })
        .collect()
}

/// One row per (estimate, grid point), with the fit repeated on each row.
pub fn slopes_table(estimates: &[SlopeEstimate], meta: &[(String, String)]) -> ResultTable {
    let mut t = ResultTable::new([
        "threshold_kind",
        "threshold_param",
        "n",
        "threshold",
        "replicas",
        "mean",
        "sd",
        "slope",
        "intercept",
        "slope_stderr",
        "reference",
        "relative_gap",
    ]);
    t.meta = meta.to_vec();
    for e in estimates {
        let (kind, param): (&str, Value) = match e.threshold {
            Threshold::Fixed(j) => ("fixed", j.into()),
            Threshold::Power(a) => ("power", a.into()),
        };
        for p in &e.points {
            t.push(vec![
                kind.into(),
                param.clone(),
                p.n.into(),
                p.threshold.into(),
                p.replicas.into(),
                p.mean.into(),
                p.sd.into(),
                e.slope.into(),
                e.intercept.into(),
                e.stderr.into(),
                e.reference_constant.into(),
                e.relative_gap.into(),
            ]);
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn grid_validation() {
        let mut c = ExperimentConfig {
            law: SplittingLaw::UniformStick,
            target: Target::Height,
            threshold: Threshold::Fixed(2),
            n_grid: vec![16, 32, 64],
            replicas: 2,
            base_seed: 1,
            mode: BallMode::Exact,
            budget: 1_000_000,
        };
        assert!(c.validate().is_err());
        c.n_grid = vec![16, 32, 32, 64];
        assert!(c.validate().is_err());
        c.n_grid = vec![16, 32, 64, 128];
        assert!(c.validate().is_ok());
        c.replicas = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn geometric_grid_endpoints() {
        let g = geometric_grid(1 << 10, 1 << 13, 4).unwrap();
        assert_eq!(g, vec![1024, 2048, 4096, 8192]);
    }

    #[test]
    fn slope_estimator_recovers_synthetic_constants() {
        let grid: Vec<f64> = (10..=23).map(|e| (1u64 << e) as f64).collect();
        let xs: Vec<f64> = grid.iter().map(|n| n.ln()).collect();
        let mut rng = rand_pcg::Pcg64Mcg::seed_from_u64(17);
        let noise = Normal::new(0.0, 0.5).unwrap();
        for c in [0.37, 4.93] {
            let ys: Vec<f64> = xs.iter().map(|x| c * x + 1.0 + noise.sample(&mut rng)).collect();
            let fit = least_squares(&xs, &ys);
            assert!((fit.slope - c).abs() <= 3.0 * fit.slope_stderr, "c = {c}: {fit:?}");
        }
    }

    #[test]
    fn lattice_law_has_no_reference() {
        let c = ExperimentConfig {
            law: SplittingLaw::DiracHalf,
            target: Target::Height,
            threshold: Threshold::Fixed(2),
            n_grid: vec![16, 32, 64, 128],
            replicas: 2,
            base_seed: 1,
            mode: BallMode::Exact,
            budget: 1_000_000,
        };
        assert!(matches!(slope_run(&c), Err(Error::LatticeLaw(_))));
    }

    #[test]
    fn power_height_unsupported_when_theta_star_infinite() {
        let c = ExperimentConfig {
            law: SplittingLaw::Mix23 { alpha: 0.5 },
            target: Target::Height,
            threshold: Threshold::Power(0.5),
            n_grid: vec![16, 32, 64, 128],
            replicas: 2,
            base_seed: 1,
            mode: BallMode::Exact,
            budget: 1_000_000,
        };
        assert!(matches!(slope_run(&c), Err(Error::UnsupportedRegime(_))));
    }
}
