//! Extreme cluster widths of `n` uniform points on `(0, 1)`.
//!
//! The order statistics are represented as normalized partial sums of
//! i.i.d. exponentials, `Û_i = γ_i / γ_{n+1}`, so every spacing is an
//! exponential divided by the same `γ_{n+1}` and no sort is needed.
//!
//! * `min_cluster(j)`: smallest `Û_{i+j-1} - Û_i` over `1 <= i <= n-j+1`
//! * `max_gap(j)`: largest `Û_{i+j} - Û_i` over `0 <= i <= n+1-j`, with
//!   `Û_0 = 0` and `Û_{n+1} = 1`

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

use crate::constants::Threshold;
use crate::error::{Error, Result};
use crate::experiments::table::{ResultTable, Value};
use crate::rng::{derive_seed, node_rng, Domain, PathKey};
use crate::stats::{least_squares, mean_sd, LineFit};

/// Windows up to this many spacings are summed directly; longer ones use
/// prefix-sum differences, whose cancellation error is then negligible.
const DIRECT_WINDOW: usize = 32;

/// Extreme windowed sums of `e[..]`: `(min, max)` over all windows of
/// `width` consecutive entries.
fn window_extremes(e: &[f64], width: usize) -> (f64, f64) {
    assert!(width >= 1 && width <= e.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    if width <= DIRECT_WINDOW {
        for w in e.windows(width) {
            let s: f64 = w.iter().sum();
            lo = lo.min(s);
            hi = hi.max(s);
        }
    } else {
        let mut prefix = Vec::with_capacity(e.len() + 1);
        prefix.push(0.0f64);
        let mut acc = 0.0;
        for &x in e {
            acc += x;
            prefix.push(acc);
        }
        for i in 0..=e.len() - width {
            let s = prefix[i + width] - prefix[i];
            lo = lo.min(s);
            hi = hi.max(s);
        }
    }
    (lo, hi)
}

/// The `n + 1` exponential spacings of one sample.
#[derive(Debug, Clone)]
pub struct Spacings {
    e: Vec<f64>,
    total: f64,
}

impl Spacings {
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let e: Vec<f64> = (0..=n).map(|_| Exp1.sample(rng)).collect();
        let total = e.iter().sum();
        Spacings { e, total }
    }

    pub fn n(&self) -> usize {
        self.e.len() - 1
    }

    /// `m̲_{n,j}`, the narrowest interval covering `j` consecutive points.
    pub fn min_cluster(&self, j: usize) -> f64 {
        let n = self.n();
        assert!(j >= 2 && j <= n, "cluster size {j} needs 2 <= j <= n = {n}");
        // interior spacings e_2..e_n
        window_extremes(&self.e[1..n], j - 1).0 / self.total
    }

    /// `m̄_{n,j}`, the widest interval spanning `j` consecutive spacings,
    /// boundary gaps included.
    pub fn max_gap(&self, j: usize) -> f64 {
        assert!(j >= 1 && j <= self.e.len());
        window_extremes(&self.e, j).1 / self.total
    }
}

/// Per-`n` averages over replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingRow {
    pub n: u64,
    pub mean_ln_min_cluster: f64,
    pub sd_ln_min_cluster: f64,
    pub mean_ln_max_gap: f64,
    /// Mean of `n · m̄_{n,1}`, which grows like `ln n`.
    pub mean_scaled_max_gap: f64,
    /// Mean of `ln m̲_{n,⌈n^α⌉}`, one entry per requested `α`.
    pub mean_ln_power_cluster: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpacingReport {
    pub j: usize,
    pub alphas: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub rows: Vec<SpacingRow>,
    /// Fit of `ln m̲_{n,j}` against `ln n` (exponent near `-j/(j-1)`).
    pub min_cluster_fit: LineFit,
    /// Fit of `ln m̄_{n,j}` against `ln n`.
    pub max_gap_fit: LineFit,
    /// Fits of `ln m̲_{n,⌈n^α⌉}` against `ln n` (exponent near `-1 + α`).
    pub power_fits: Vec<LineFit>,
}

impl SpacingReport {
    /// Whether `n · m̄_{n,1}` increases along the grid.
    pub fn scaled_max_gap_increasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].mean_scaled_max_gap > w[0].mean_scaled_max_gap)
    }

    pub fn to_table(&self) -> ResultTable {
        let mut cols: Vec<String> = [
            "n",
            "mean_ln_min_cluster",
            "sd_ln_min_cluster",
            "mean_ln_max_gap",
            "mean_n_max_gap1",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        cols.extend(self.alphas.iter().map(|a| format!("mean_ln_min_cluster_alpha_{a}")));
        let mut t = ResultTable::new(cols)
            .with_meta("experiment", "spacings")
            .with_meta("j", self.j)
            .with_meta(
                "alphas",
                self.alphas.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(";"),
            )
            .with_meta("replicas", self.replicas)
            .with_meta("seed", self.seed)
            .with_meta("min_cluster_slope", self.min_cluster_fit.slope)
            .with_meta("max_gap_slope", self.max_gap_fit.slope);
        for (a, f) in self.alphas.iter().zip(&self.power_fits) {
            t = t.with_meta(format!("power_slope_alpha_{a}"), f.slope);
        }
        for r in &self.rows {
            let mut row: Vec<Value> = vec![
                r.n.into(),
                r.mean_ln_min_cluster.into(),
                r.sd_ln_min_cluster.into(),
                r.mean_ln_max_gap.into(),
                r.mean_scaled_max_gap.into(),
            ];
            row.extend(r.mean_ln_power_cluster.iter().map(|&v| Value::from(v)));
            t.push(row);
        }
        t
    }
}

/// Samples `replicas` point sets for every `n` and regresses the logs of the
/// extreme cluster widths on `ln n`.
pub fn spacing_experiment(
    n_list: &[u64],
    j: usize,
    alphas: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<SpacingReport> {
    if n_list.len() < 2 || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("n list must be strictly increasing".into()));
    }
    if j < 2 || replicas == 0 {
        return Err(Error::InvalidConfig("need j >= 2 and replicas >= 1".into()));
    }
    if let Some(&n) = n_list.iter().find(|&&n| (n as usize) < j.max(2)) {
        return Err(Error::InvalidConfig(format!("n = {n} is smaller than j = {j}")));
    }
    if alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(Error::InvalidConfig("alphas must lie in (0, 1)".into()));
    }
    let rows: Vec<SpacingRow> = n_list
        .iter()
        .enumerate()
        .map(|(ni, &n)| {
            let samples: Vec<(f64, f64, f64, Vec<f64>)> = (0..replicas)
                .into_par_iter()
                .map(|r| {
                    let mut rng = node_rng(
                        Domain::Replica,
                        derive_seed(seed, &[ni as u64, r as u64]),
                        PathKey::ROOT,
                    );
                    let s = Spacings::sample(n as usize, &mut rng);
                    let powers = alphas
                        .iter()
                        .map(|&a| {
                            let k = (Threshold::Power(a).for_balls(n) as usize).clamp(2, n as usize);
                            s.min_cluster(k).ln()
                        })
                        .collect();
                    (
                        s.min_cluster(j).ln(),
                        s.max_gap(j).ln(),
                        n as f64 * s.max_gap(1),
                        powers,
                    )
                })
                .collect();
            let mins: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let (m, sd) = mean_sd(&mins);
            let gaps: Vec<f64> = samples.iter().map(|s| s.1).collect();
            let scaled: Vec<f64> = samples.iter().map(|s| s.2).collect();
            let power = (0..alphas.len())
                .map(|a| mean_sd(&samples.iter().map(|s| s.3[a]).collect::<Vec<_>>()).0)
                .collect();
            SpacingRow {
                n,
                mean_ln_min_cluster: m,
                sd_ln_min_cluster: sd,
                mean_ln_max_gap: mean_sd(&gaps).0,
                mean_scaled_max_gap: mean_sd(&scaled).0,
                mean_ln_power_cluster: power,
            }
        })
        .collect();
    let xs: Vec<f64> = n_list.iter().map(|&n| (n as f64).ln()).collect();
    let fit = |f: &dyn Fn(&SpacingRow) -> f64| {
        least_squares(&xs, &rows.iter().map(f).collect::<Vec<_>>())
    };
    let min_cluster_fit = fit(&|r| r.mean_ln_min_cluster);
    let max_gap_fit = fit(&|r| r.mean_ln_max_gap);
    let power_fits = (0..alphas.len())
        .map(|a| fit(&|r: &SpacingRow| r.mean_ln_power_cluster[a]))
        .collect();
    Ok(SpacingReport {
        j,
        alphas: alphas.to_vec(),
        replicas,
        seed,
        rows,
        min_cluster_fit,
        max_gap_fit,
        power_fits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_checked_windows() {
        let s = Spacings {
            e: vec![1.0, 2.0, 0.5, 3.0, 1.5],
            total: 8.0,
        };
        // points: 1/8, 3/8, 3.5/8, 6.5/8
        assert_eq!(s.n(), 4);
        assert_eq!(s.min_cluster(2), 0.5 / 8.0);
        assert_eq!(s.min_cluster(3), 2.5 / 8.0);
        assert_eq!(s.max_gap(1), 3.0 / 8.0);
        assert_eq!(s.max_gap(2), 4.5 / 8.0);
    }

    #[test]
    fn prefix_and_direct_windows_agree() {
        let mut rng = node_rng(Domain::Replica, 3, PathKey::ROOT);
        let e: Vec<f64> = (0..500).map(|_| Exp1.sample(&mut rng)).collect();
        let direct = |w: usize| {
            e.windows(w)
                .map(|x| x.iter().sum::<f64>())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s), b.max(s)))
        };
        for w in [40, 100] {
            let (lo, hi) = window_extremes(&e, w);
            let (dlo, dhi) = direct(w);
            assert!((lo - dlo).abs() < 1e-10 && (hi - dhi).abs() < 1e-10);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(spacing_experiment(&[100, 50], 2, &[], 1, 0).is_err());
        assert!(spacing_experiment(&[100, 200], 1, &[], 1, 0).is_err());
        assert!(spacing_experiment(&[100, 200], 2, &[1.5], 1, 0).is_err());
    }
}
