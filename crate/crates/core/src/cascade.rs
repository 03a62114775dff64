//! The nested-box environment and the ball occupancy scheme on it.
//!
//! The environment is a pure function of `(law, seed, path)`: the split at a
//! node is drawn from a stream keyed by the node's [`PathKey`], so subtrees
//! can be expanded lazily, in any order, and replayed bit-exactly.
//!
//! Ball counts are likewise a pure function of `(environment, n, mode,
//! ball_seed, path)`. A node's count is split among its children by
//! conditional binomial draws from the node's own ball stream, so an
//! [`OccupancyState`] holds no cache and is `Sync`; concurrent readers simply
//! recompute what they need.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use smallvec::SmallVec;

use crate::constants::{phi, CriticalConstants};
use crate::error::{Error, Result};
use crate::laws::{LaplaceProfile, MassVector, SplittingLaw, MAX_SUPPORT};
use crate::rng::{derive_seed, node_rng, Domain, NodeRng, PathKey};

/// Default cap on node visits for a single measurement.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// Counts node visits against a fixed cap.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    limit: u64,
    used: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget { limit, used: 0 }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    #[inline]
    fn charge(&mut self, generation: u32) -> Result<()> {
        self.used += 1;
        if self.used > self.limit {
            return Err(Error::BudgetExceeded {
                budget: self.limit,
                generation,
            });
        }
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(DEFAULT_BUDGET)
    }
}

/// A box of the environment: where it is and how heavy it is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxNode {
    pub key: PathKey,
    pub depth: u32,
    /// `p_i`; may underflow to zero for laws with tiny atoms.
    pub mass: f64,
    /// `ln p_i`, always finite for a positive-mass box.
    pub log_mass: f64,
}

impl BoxNode {
    pub const ROOT: BoxNode = BoxNode {
        key: PathKey::ROOT,
        depth: 0,
        mass: 1.0,
        log_mass: 0.0,
    };

    /// The child with index `index` and split mass `m > 0`.
    #[inline]
    pub fn child(&self, index: u32, m: f64) -> BoxNode {
        BoxNode {
            key: self.key.child(index),
            depth: self.depth + 1,
            mass: self.mass * m,
            log_mass: self.log_mass + m.ln(),
        }
    }
}

/// Random masses `p_i` on the infinite tree, generated lazily.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeEnvironment {
    law: SplittingLaw,
    seed: u64,
}

impl CascadeEnvironment {
    pub fn new(law: SplittingLaw, seed: u64) -> Self {
        debug_assert!(law.support_bound() <= MAX_SUPPORT);
        CascadeEnvironment { law, seed }
    }

    pub fn law(&self) -> &SplittingLaw {
        &self.law
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The split `ρ(i)` at the node with key `key`.
    #[inline]
    pub fn split(&self, key: PathKey) -> MassVector {
        let mut rng = node_rng(Domain::Environment, self.seed, key);
        self.law.sample(&mut rng)
    }

    /// Positive-mass children of `node`.
    pub fn children(&self, node: &BoxNode) -> SmallVec<[BoxNode; MAX_SUPPORT]> {
        self.split(node.key)
            .positive()
            .map(|(i, m)| node.child(i, m))
            .collect()
    }

    /// `p_i` for the path `i` of 0-based child indices. Paths through
    /// missing children have weight zero.
    pub fn weight_of(&self, path: &[u32]) -> f64 {
        let mut key = PathKey::ROOT;
        let mut w = 1.0;
        for &i in path {
            let split = self.split(key);
            w *= split.masses().get(i as usize).copied().unwrap_or(0.0);
            if w == 0.0 {
                return 0.0;
            }
            key = key.child(i);
        }
        w
    }

    /// All positive-mass boxes of generation `k`, in depth-first order.
    pub fn generation(&self, k: u32, budget: &mut Budget) -> Result<Vec<BoxNode>> {
        let mut level = vec![BoxNode::ROOT];
        for depth in 0..k {
            let mut next = Vec::with_capacity(level.len() * 2);
            for node in &level {
                budget.charge(depth + 1)?;
                next.extend(self.children(node));
            }
            level = next;
        }
        Ok(level)
    }

    /// Exact `p̄(k)`, the largest generation-`k` mass, by branch and bound:
    /// a subtree cannot hold a box heavier than its root.
    pub fn max_mass(&self, k: u32, budget: &mut Budget) -> Result<f64> {
        let mut best = f64::NEG_INFINITY;
        let mut best_mass = 0.0;
        let mut stack = vec![BoxNode::ROOT];
        while let Some(node) = stack.pop() {
            if node.log_mass <= best {
                continue;
            }
            if node.depth == k {
                best = node.log_mass;
                best_mass = node.mass;
                continue;
            }
            budget.charge(node.depth + 1)?;
            let mut kids = self.children(&node);
            // lightest first so the heaviest is popped next
            kids.sort_by(|a, b| a.log_mass.total_cmp(&b.log_mass));
            stack.extend(kids.into_iter().filter(|c| c.log_mass > best));
        }
        Ok(best_mass)
    }

    /// Beam search over generation `k` keeping the `width` heaviest and the
    /// `width` lightest boxes per generation. The results bound the true
    /// extremes: `p̄(k) >= max_lower` and `p̲(k) <= min_upper`.
    pub fn beam_extremes(&self, k: u32, width: usize) -> ExtremeBounds {
        let beam = |heaviest: bool| {
            let mut level = vec![BoxNode::ROOT];
            for _ in 0..k {
                let mut next: Vec<BoxNode> = level.iter().flat_map(|n| self.children(n)).collect();
                if next.len() > width {
                    if heaviest {
                        next.select_nth_unstable_by(width - 1, |a, b| b.log_mass.total_cmp(&a.log_mass));
                    } else {
                        next.select_nth_unstable_by(width - 1, |a, b| a.log_mass.total_cmp(&b.log_mass));
                    }
                    next.truncate(width);
                }
                level = next;
            }
            level
        };
        let heavy = beam(true);
        let light = beam(false);
        ExtremeBounds {
            max_lower: heavy.iter().map(|n| n.mass).fold(0.0, f64::max),
            min_upper: light.iter().map(|n| n.mass).fold(f64::INFINITY, f64::min),
        }
    }

    /// Convenience: generation statistics of the bare environment (no balls).
    pub fn generation_stats(&self, k: u32, budget: &mut Budget) -> Result<GenerationStats> {
        OccupancyState::throw_balls(*self, 0, BallMode::Exact, 0).generation_stats(
            k,
            Expansion::Full,
            budget,
        )
    }
}

/// Bounds on the extreme masses of a generation from a beam search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremeBounds {
    pub max_lower: f64,
    pub min_upper: f64,
}

/// Exactly `n` balls, or a Poisson(`n`) number of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BallMode {
    Exact,
    Poissonized,
}

impl std::fmt::Display for BallMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BallMode::Exact => "exact",
            BallMode::Poissonized => "poisson",
        })
    }
}

impl std::str::FromStr for BallMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BallMode::Exact),
            "poisson" | "poissonized" => Ok(BallMode::Poissonized),
            other => Err(Error::InvalidConfig(format!("unknown ball mode `{other}`"))),
        }
    }
}

/// A box together with the number of balls it received.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupiedBox {
    pub node: BoxNode,
    pub count: u64,
}

/// Which boxes to expand when collecting generation statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expansion {
    /// Every positive-mass box.
    Full,
    /// Only boxes holding at least this many balls (and their ancestors).
    Pruned(u64),
}

/// Ball counts for one `(environment, n, mode, ball_seed)` realization.
#[derive(Debug, Clone, Copy)]
pub struct OccupancyState {
    env: CascadeEnvironment,
    n: u64,
    mode: BallMode,
    ball_seed: u64,
    realized_total: u64,
}

impl OccupancyState {
    pub fn throw_balls(env: CascadeEnvironment, n: u64, mode: BallMode, ball_seed: u64) -> Self {
        let realized_total = match mode {
            BallMode::Exact => n,
            BallMode::Poissonized if n == 0 => 0,
            BallMode::Poissonized => {
                let mut rng = node_rng(Domain::Total, ball_seed, PathKey::ROOT);
                let draw: f64 = Poisson::new(n as f64)
                    .expect("positive finite Poisson mean")
                    .sample(&mut rng);
                draw as u64
            }
        };
        OccupancyState {
            env,
            n,
            mode,
            ball_seed,
            realized_total,
        }
    }

    pub fn env(&self) -> &CascadeEnvironment {
        &self.env
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mode(&self) -> BallMode {
        self.mode
    }

    pub fn ball_seed(&self) -> u64 {
        self.ball_seed
    }

    pub fn realized_total(&self) -> u64 {
        self.realized_total
    }

    pub fn root(&self) -> OccupiedBox {
        OccupiedBox {
            node: BoxNode::ROOT,
            count: self.realized_total,
        }
    }

    /// Splits a box's balls among its children (zero-mass children are
    /// dropped). The child counts always sum to the parent count.
    pub fn children(&self, parent: &OccupiedBox) -> SmallVec<[OccupiedBox; MAX_SUPPORT]> {
        let split = self.env.split(parent.node.key);
        let mut out: SmallVec<[OccupiedBox; MAX_SUPPORT]> = SmallVec::new();
        let mut remaining = parent.count;
        let mut rest_mass = 1.0f64;
        let mut rng: Option<NodeRng> = None;
        let last_positive = split.masses().iter().rposition(|&m| m > 0.0);
        for (i, m) in split.positive() {
            let count = if remaining == 0 {
                0
            } else if Some(i as usize) == last_positive {
                remaining
            } else {
                let p = (m / rest_mass).clamp(0.0, 1.0);
                let rng = rng.get_or_insert_with(|| {
                    node_rng(Domain::Balls, self.ball_seed, parent.node.key)
                });
                binomial(rng, remaining, p)
            };
            remaining -= count;
            rest_mass -= m;
            out.push(OccupiedBox {
                node: parent.node.child(i, m),
                count,
            });
        }
        debug_assert_eq!(out.iter().map(|c| c.count).sum::<u64>(), parent.count);
        out
    }

    /// Number of balls in the box at `path`; zero off the positive-mass tree.
    pub fn count_of(&self, path: &[u32]) -> u64 {
        let mut cur = self.root();
        for &i in path {
            if cur.count == 0 {
                return 0;
            }
            let key = cur.node.key.child(i);
            match self.children(&cur).into_iter().find(|c| c.node.key == key) {
                Some(c) => cur = c,
                None => return 0,
            }
        }
        cur.count
    }

    /// Heights `H_{n,j}` for several thresholds in one pruned depth-first
    /// pass: `H` is one past the deepest generation holding a box with at
    /// least `j` balls, and subtrees of boxes below the smallest threshold
    /// are never opened since counts only shrink along a path.
    pub fn heights(&self, thresholds: &[u64], budget: &mut Budget) -> Result<Vec<u32>> {
        for &j in thresholds {
            if j == 0 {
                return Err(Error::InvalidConfig("height threshold must be positive".into()));
            }
            if j == 1 && self.realized_total > 0 {
                return Err(Error::UnsupportedRegime(
                    "the height H_{n,1} is undefined for n >= 1".into(),
                ));
            }
        }
        let Some(&min_j) = thresholds.iter().min() else {
            return Ok(Vec::new());
        };
        let mut deepest: Vec<Option<u32>> = vec![None; thresholds.len()];
        let mut stack = Vec::with_capacity(256);
        if self.realized_total >= min_j {
            stack.push(self.root());
        }
        while let Some(b) = stack.pop() {
            for (d, &j) in deepest.iter_mut().zip(thresholds) {
                if b.count >= j && d.is_none_or(|x| x < b.node.depth) {
                    *d = Some(b.node.depth);
                }
            }
            budget.charge(b.node.depth + 1)?;
            stack.extend(self.children(&b).into_iter().filter(|c| c.count >= min_j));
        }
        Ok(deepest.into_iter().map(|d| d.map_or(0, |x| x + 1)).collect())
    }

    /// Saturation levels `G_{n,j}` for several thresholds: the first
    /// generation holding a positive-mass box with fewer than `j` balls.
    pub fn saturation_levels(&self, thresholds: &[u64], budget: &mut Budget) -> Result<Vec<u32>> {
        if thresholds.contains(&0) {
            return Err(Error::InvalidConfig("saturation threshold must be positive".into()));
        }
        let mut levels: Vec<Option<u32>> = vec![None; thresholds.len()];
        let mut level = vec![self.root()];
        let mut k = 0u32;
        loop {
            let least = level.iter().map(|b| b.count).min().unwrap_or(0);
            for (g, &j) in levels.iter_mut().zip(thresholds) {
                if g.is_none() && least < j {
                    *g = Some(k);
                }
            }
            if levels.iter().all(Option::is_some) {
                break;
            }
            let mut next = Vec::with_capacity(level.len() * 2);
            for b in &level {
                budget.charge(k + 1)?;
                next.extend(self.children(b));
            }
            level = next;
            k += 1;
        }
        Ok(levels.into_iter().map(|g| g.unwrap_or(0)).collect())
    }

    /// `(H_{n,j}, G_{n,j})`.
    pub fn height_and_saturation(&self, j: u64, budget: &mut Budget) -> Result<(u32, u32)> {
        let g = self.saturation_levels(&[j], budget)?[0];
        let h = self.heights(&[j], budget)?[0];
        Ok((h, g))
    }

    /// Boxes of generation `k` with their counts.
    pub fn generation_stats(
        &self,
        k: u32,
        expansion: Expansion,
        budget: &mut Budget,
    ) -> Result<GenerationStats> {
        let keep = |b: &OccupiedBox| match expansion {
            Expansion::Full => true,
            Expansion::Pruned(t) => b.count >= t,
        };
        let root = self.root();
        let mut level: Vec<OccupiedBox> = if keep(&root) { vec![root] } else { Vec::new() };
        for depth in 0..k {
            let mut next = Vec::with_capacity(level.len() * 2);
            for b in &level {
                budget.charge(depth + 1)?;
                next.extend(self.children(b).into_iter().filter(keep));
            }
            level = next;
        }
        Ok(GenerationStats {
            k,
            boxes: level,
            expansion,
        })
    }
}

/// Draws Binomial(`n`, `p`).
#[inline]
fn binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if n == 1 {
        return u64::from(rng.random::<f64>() < p);
    }
    Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
}

/// Per-generation measurements on an occupancy realization.
#[derive(Debug, Clone)]
pub struct GenerationStats {
    pub k: u32,
    pub boxes: Vec<OccupiedBox>,
    pub expansion: Expansion,
}

impl GenerationStats {
    pub fn is_complete(&self) -> bool {
        self.expansion == Expansion::Full
    }

    pub fn boxes_expanded(&self) -> usize {
        self.boxes.len()
    }

    /// `N(y)`: boxes holding at least `y` balls. Exact for a full expansion
    /// and for pruned ones when `y` is at least the pruning threshold.
    pub fn n_at_least(&self, y: u64) -> Result<usize> {
        if let Expansion::Pruned(t) = self.expansion {
            if y < t {
                return Err(Error::InvalidConfig(format!(
                    "N({y}) is not exact under pruning at {t}"
                )));
            }
        }
        Ok(self.boxes.iter().filter(|b| b.count >= y).count())
    }

    /// `M(y)`: positive-mass boxes holding fewer than `y` balls. Needs a full
    /// expansion.
    pub fn m_below(&self, y: u64) -> Result<usize> {
        if !self.is_complete() {
            return Err(Error::InvalidConfig("M(y) needs a full expansion".into()));
        }
        Ok(self.boxes.iter().filter(|b| b.count < y).count())
    }

    /// Smallest mass among expanded boxes; an upper bound on `p̲(k)` under
    /// pruning.
    pub fn p_min(&self) -> f64 {
        self.boxes
            .iter()
            .min_by(|a, b| a.node.log_mass.total_cmp(&b.node.log_mass))
            .map_or(f64::INFINITY, |b| b.node.mass)
    }

    /// `ln` of [`Self::p_min`], finite even when the mass underflows.
    pub fn log_p_min(&self) -> f64 {
        self.boxes.iter().map(|b| b.node.log_mass).fold(f64::INFINITY, f64::min)
    }

    /// Largest mass among expanded boxes; a lower bound on `p̄(k)` under
    /// pruning.
    pub fn p_max(&self) -> f64 {
        self.boxes
            .iter()
            .max_by(|a, b| a.node.log_mass.total_cmp(&b.node.log_mass))
            .map_or(0.0, |b| b.node.mass)
    }

    pub fn log_p_max(&self) -> f64 {
        self.boxes.iter().map(|b| b.node.log_mass).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn total_mass(&self) -> f64 {
        self.boxes.iter().map(|b| b.node.mass).sum()
    }

    /// The additive martingale `W^(k)(θ) = L(θ)^{-k} Σ_{|i|=k} p_i^θ`.
    pub fn martingale(&self, profile: &LaplaceProfile, theta: f64) -> Result<f64> {
        if !self.is_complete() {
            return Err(Error::InvalidConfig("W(θ) needs a full expansion".into()));
        }
        let log_masses: Vec<f64> = self.boxes.iter().map(|b| b.node.log_mass).collect();
        additive_martingale(&log_masses, profile, theta, self.k)
    }
}

/// `L(θ)^{-k} Σ p_i^θ` over the given log-masses `ln p_i`.
pub fn additive_martingale(
    log_masses: &[f64],
    profile: &LaplaceProfile,
    theta: f64,
    k: u32,
) -> Result<f64> {
    let log_l = profile.log_l(theta)?;
    Ok(log_masses
        .iter()
        .map(|&lp| (theta * lp - f64::from(k) * log_l).exp())
        .sum())
}

/// Outcome of a one-step martingale check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleCheck {
    pub w_k: f64,
    pub mean_next: f64,
    pub stderr: f64,
}

impl MartingaleCheck {
    /// `|mean - W^(k)|` in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.mean_next - self.w_k).abs() / self.stderr
    }
}

/// Holds generation `k` of `env` fixed and redraws the generation-`k+1`
/// splits `resamples` times, comparing the mean of `W^(k+1)(θ)` with
/// `W^(k)(θ)`.
pub fn martingale_step_check(
    env: &CascadeEnvironment,
    profile: &LaplaceProfile,
    k: u32,
    theta: f64,
    resamples: usize,
    seed: u64,
    budget: &mut Budget,
) -> Result<MartingaleCheck> {
    if resamples < 2 {
        return Err(Error::InvalidConfig("need at least two resamples".into()));
    }
    let boxes = env.generation(k, budget)?;
    let log_masses: Vec<f64> = boxes.iter().map(|b| b.log_mass).collect();
    let w_k = additive_martingale(&log_masses, profile, theta, k)?;
    let log_l = profile.log_l(theta)?;
    let scaled: Vec<f64> = log_masses
        .iter()
        .map(|&lp| (theta * lp - f64::from(k + 1) * log_l).exp())
        .collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for r in 0..resamples {
        let mut rng = node_rng(Domain::Resample, derive_seed(seed, &[r as u64]), PathKey::ROOT);
        let w: f64 = scaled
            .iter()
            .map(|&s| {
                let split = env.law().sample(&mut rng);
                s * split.positive().map(|(_, m)| m.powf(theta)).sum::<f64>()
            })
            .sum();
        sum += w;
        sum_sq += w * w;
    }
    let n = resamples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(MartingaleCheck {
        w_k,
        mean_next: mean,
        stderr: (var / n).sqrt(),
    })
}

/// Empirical moments of one box's count over Poissonized replicas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxMoments {
    pub mass: f64,
    pub expected: f64,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

/// Throws Poisson(`n`) balls `replicas` times on a fixed environment and
/// returns per-box count moments at generation `k`, to compare with the
/// Poisson(`n p_i`) marginals.
pub fn poisson_marginals(
    env: &CascadeEnvironment,
    k: u32,
    n: u64,
    replicas: usize,
    seed: u64,
    budget: &mut Budget,
) -> Result<Vec<BoxMoments>> {
    if replicas < 2 {
        return Err(Error::InvalidConfig("need at least two replicas".into()));
    }
    let boxes = env.generation(k, budget)?;
    let mut sum = vec![0.0f64; boxes.len()];
    let mut sum_sq = vec![0.0f64; boxes.len()];
    for r in 0..replicas {
        let occ = OccupancyState::throw_balls(
            *env,
            n,
            BallMode::Poissonized,
            derive_seed(seed, &[r as u64]),
        );
        let stats = occ.generation_stats(k, Expansion::Full, budget)?;
        for (i, b) in stats.boxes.iter().enumerate() {
            debug_assert_eq!(b.node.key, boxes[i].key);
            let c = b.count as f64;
            sum[i] += c;
            sum_sq[i] += c * c;
        }
    }
    let r = replicas as f64;
    Ok(boxes
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let lambda = n as f64 * b.mass;
            let mean = sum[i] / r;
            let variance = (sum_sq[i] / r - mean * mean).max(0.0) * r / (r - 1.0);
            BoxMoments {
                mass: b.mass,
                expected: lambda,
                mean,
                variance,
                se_mean: (lambda / r).sqrt(),
                // Var of the sample variance of Poisson(λ): (λ + 2λ²)/r
                se_variance: ((lambda + 2.0 * lambda * lambda) / r).sqrt(),
            }
        })
        .collect())
}

/// Empirical and predicted counts of generation-`k` boxes in a window
/// around the typical size `exp(k L'(θ)/L(θ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigginsOutcome {
    pub empirical: u64,
    pub predicted: f64,
    /// `W^(k)(θ)`, used in place of the terminal martingale.
    pub martingale: f64,
}

impl BigginsOutcome {
    pub fn ratio(&self) -> f64 {
        self.empirical as f64 / self.predicted
    }
}

/// Counts generation-`k` boxes with `-b + kL'/L <= ln p_i <= -a + kL'/L` and
/// the local-limit prediction
/// `e^{kφ}/√(2πk) · (e^{θb} - e^{θa})/θ · (L''/L - (L'/L)²)^{-1/2} · W^(k)(θ)`.
#[allow(clippy::too_many_arguments)]
pub fn biggins_check(
    env: &CascadeEnvironment,
    profile: &LaplaceProfile,
    constants: &CriticalConstants,
    k: u32,
    theta: f64,
    a: f64,
    b: f64,
    budget: &mut Budget,
) -> Result<BigginsOutcome> {
    if env.law().is_lattice() || profile.is_lattice() {
        return Err(Error::LatticeLaw(env.law().to_string()));
    }
    if !(theta > constants.theta_star_lower && theta < constants.theta_star_upper) {
        return Err(Error::UnsupportedRegime(format!(
            "θ = {theta} outside ({}, {})",
            constants.theta_star_lower, constants.theta_star_upper
        )));
    }
    if a > b || k == 0 {
        return Err(Error::InvalidConfig(format!(
            "need a <= b and k >= 1 (a = {a}, b = {b}, k = {k})"
        )));
    }
    let v = profile.eval(theta)?;
    let slope = v.dl / v.l;
    let variance = v.d2l / v.l - slope * slope;
    let kf = f64::from(k);
    let boxes = env.generation(k, budget)?;
    let (lo, hi) = (-b + kf * slope, -a + kf * slope);
    let empirical = boxes
        .iter()
        .filter(|n| {
            let lp = n.log_mass;
            lp >= lo && lp <= hi
        })
        .count() as u64;
    let log_masses: Vec<f64> = boxes.iter().map(|n| n.log_mass).collect();
    let w = additive_martingale(&log_masses, profile, theta, k)?;
    let window = ((theta * b).exp() - (theta * a).exp()) / theta;
    let predicted = (kf * phi(profile, theta)?).exp() / (2.0 * std::f64::consts::PI * kf).sqrt()
        * window
        / variance.sqrt()
        * w;
    Ok(BigginsOutcome {
        empirical,
        predicted,
        martingale: w,
    })
}

/// Reference implementation that sends every ball down the tree on its own,
/// one categorical draw per generation. Only meant for small `n`, to check
/// the binomial splitting against; returns `(H_{n,j}, G_{n,j})`.
pub fn per_ball_height_and_saturation(
    env: &CascadeEnvironment,
    n: u64,
    j: u64,
    ball_seed: u64,
) -> Result<(u32, u32)> {
    if j < 2 && n > 0 {
        return Err(Error::UnsupportedRegime("per-ball reference needs j >= 2".into()));
    }
    if n > 1_000 {
        return Err(Error::InvalidConfig("per-ball reference is limited to n <= 1000".into()));
    }
    let mut rngs: Vec<NodeRng> = (0..n)
        .map(|i| node_rng(Domain::Balls, derive_seed(ball_seed, &[i]), PathKey::ROOT))
        .collect();
    // groups of ball indices sharing a box, with the box
    let mut groups: Vec<(BoxNode, Vec<usize>)> = vec![(BoxNode::ROOT, (0..n as usize).collect())];
    let mut g = None;
    let mut k = 0u32;
    loop {
        let min_count = groups.iter().map(|(_, v)| v.len() as u64).min().unwrap_or(0);
        if g.is_none() && min_count < j {
            g = Some(k);
        }
        groups.retain(|(_, v)| v.len() as u64 >= j);
        if groups.is_empty() {
            return Ok((k, g.unwrap_or(k)));
        }
        let mut next = Vec::new();
        for (node, balls) in &groups {
            let split = env.split(node.key);
            let mut bins: SmallVec<[Vec<usize>; MAX_SUPPORT]> =
                (0..split.len()).map(|_| Vec::new()).collect();
            for &ball in balls {
                let u: f64 = rngs[ball].random();
                let mut acc = 0.0;
                let mut chosen = split.positive().last().map(|(i, _)| i as usize).unwrap_or(0);
                for (i, m) in split.positive() {
                    acc += m;
                    if u < acc {
                        chosen = i as usize;
                        break;
                    }
                }
                bins[chosen].push(ball);
            }
            for (i, m) in split.positive() {
                next.push((
                    node.child(i, m),
                    std::mem::take(&mut bins[i as usize]),
                ));
            }
        }
        groups = next;
        k += 1;
    }
}
