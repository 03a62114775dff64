//! Splitting laws: random mass partitions and their Laplace transforms.
//!
//! A splitting law describes how a box hands its mass to its children. Every
//! built-in law consumes exactly one uniform variate per split, which keeps
//! samplers trivially reproducible from a keyed stream.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::rng::{node_rng, Domain, PathKey};

/// Largest support bound accepted by the simulator.
pub const MAX_SUPPORT: usize = 16;

/// Tolerance on `sum(masses) == 1`.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Masses of the children of one box, in child order. Zero entries are
/// children that do not exist as boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector(SmallVec<[f64; MAX_SUPPORT]>);

impl MassVector {
    /// Builds a mass vector, checking entries lie in `[0, 1]`, sum to one and
    /// fit within `bound` children.
    pub fn new(masses: &[f64], bound: usize) -> Result<Self> {
        if masses.is_empty() || masses.len() > bound {
            return Err(Error::InvalidLaw(format!(
                "{} atoms for support bound {bound}",
                masses.len()
            )));
        }
        if let Some(bad) = masses.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::InvalidLaw(format!("mass {bad} outside [0, 1]")));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidLaw(format!("masses sum to {total}")));
        }
        Ok(MassVector(masses.iter().copied().collect()))
    }

    fn from_trusted(masses: SmallVec<[f64; MAX_SUPPORT]>) -> Self {
        debug_assert!((masses.iter().sum::<f64>() - 1.0).abs() <= MASS_TOLERANCE);
        MassVector(masses)
    }

    pub fn masses(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Children carrying positive mass, with their indices.
    pub fn positive(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, &m)| (i as u32, m))
    }
}

/// The built-in splitting laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplittingLaw {
    /// `(U, 1 - U)` with `U` uniform on `[0, 1]`.
    UniformStick,
    /// `(1/2, 1/2)` deterministically. Lattice.
    DiracHalf,
    /// `(1/2, 1/2)` with probability `alpha`, else `(1/3, 1/3, 1/3)`.
    Mix23 { alpha: f64 },
    /// `rho_1 = 1 - 0.75 U` and `rho_j = 0.05 U` for `j = 2..=16`.
    Law075U,
    /// `(rho_1, 1 - rho_1)` where `-1/ln(rho_1)` is uniform, i.e. `rho_1` has
    /// density `x^-1 ln^-2 x` on `(0, 1/e)`. Its Laplace transform is only
    /// available by Monte Carlo.
    HeavyTail { samples: usize, seed: u64 },
}

impl SplittingLaw {
    pub fn mix23(alpha: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&alpha) {
            return Err(Error::InvalidLaw(format!(
                "mix23 alpha must lie in [1/2, 1), got {alpha}"
            )));
        }
        Ok(SplittingLaw::Mix23 { alpha })
    }

    pub fn heavy_tail(samples: usize, seed: u64) -> Result<Self> {
        if samples < 100 {
            return Err(Error::InvalidLaw(format!(
                "heavytail needs at least 100 samples, got {samples}"
            )));
        }
        Ok(SplittingLaw::HeavyTail { samples, seed })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SplittingLaw::UniformStick => "uniform-stick",
            SplittingLaw::DiracHalf => "dirac-half",
            SplittingLaw::Mix23 { .. } => "mix23",
            SplittingLaw::Law075U => "law075u",
            SplittingLaw::HeavyTail { .. } => "heavytail",
        }
    }

    /// Upper bound on the number of atoms of one split.
    pub fn support_bound(&self) -> usize {
        match self {
            SplittingLaw::UniformStick | SplittingLaw::DiracHalf => 2,
            SplittingLaw::Mix23 { .. } => 3,
            SplittingLaw::Law075U => 16,
            SplittingLaw::HeavyTail { .. } => 2,
        }
    }

    /// True when all atoms are a.s. powers of a single ratio.
    pub fn is_lattice(&self) -> bool {
        matches!(self, SplittingLaw::DiracHalf)
    }

    /// Deterministic split as a function of a single uniform variate `u` in
    /// `[0, 1)`.
    pub fn split_from_uniform(&self, u: f64) -> MassVector {
        let mut m: SmallVec<[f64; MAX_SUPPORT]> = SmallVec::new();
        match *self {
            SplittingLaw::UniformStick => {
                m.push(u);
                m.push(1.0 - u);
            }
            SplittingLaw::DiracHalf => {
                m.push(0.5);
                m.push(0.5);
            }
            SplittingLaw::Mix23 { alpha } => {
                if u < alpha {
                    m.push(0.5);
                    m.push(0.5);
                } else {
                    m.extend([1.0 / 3.0; 3]);
                }
            }
            SplittingLaw::Law075U => {
                m.push(1.0 - 0.75 * u);
                m.extend([0.05 * u; 15]);
            }
            SplittingLaw::HeavyTail { .. } => {
                // -ln(rho_1) = 1/V with V uniform on (0, 1]
                let v = 1.0 - u;
                let first = (-1.0 / v).exp();
                m.push(first);
                m.push(1.0 - first);
            }
        }
        MassVector::from_trusted(m)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MassVector {
        self.split_from_uniform(rng.random::<f64>())
    }

    /// Closed-form Laplace profile, when the law has one.
    pub fn closed_form(&self) -> Option<LaplaceProfile> {
        let form = match *self {
            SplittingLaw::UniformStick => ClosedForm::UniformStick,
            SplittingLaw::DiracHalf => ClosedForm::Atomic(vec![(2.0, 0.5)]),
            SplittingLaw::Mix23 { alpha } => {
                ClosedForm::Atomic(vec![(2.0 * alpha, 0.5), (3.0 * (1.0 - alpha), 1.0 / 3.0)])
            }
            SplittingLaw::Law075U => ClosedForm::Law075U,
            SplittingLaw::HeavyTail { .. } => return None,
        };
        Some(LaplaceProfile {
            theta_lower: form.theta_lower(),
            lattice: self.is_lattice(),
            declared: DeclaredFacts::default(),
            source: ProfileSource::Closed(form),
        })
    }

    /// The profile used by the constant routines: the closed form when one
    /// exists, otherwise a Monte Carlo profile from the law's own sample
    /// budget and seed.
    pub fn profile(&self) -> Result<LaplaceProfile> {
        match (self.closed_form(), *self) {
            (Some(p), _) => Ok(p),
            (None, SplittingLaw::HeavyTail { samples, seed }) => {
                LaplaceProfile::monte_carlo(self, samples, seed, 0.0)
            }
            (None, _) => unreachable!("every non-heavy-tail law has a closed form"),
        }
    }
}

impl fmt::Display for SplittingLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplittingLaw::Mix23 { alpha } => write!(f, "mix23:alpha={alpha}"),
            SplittingLaw::HeavyTail { samples, seed } => {
                write!(f, "heavytail:samples={samples},seed={seed}")
            }
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for SplittingLaw {
    type Err = Error;

    /// Parses `uniform-stick`, `dirac-half`, `mix23:alpha=<f>`, `law075u` or
    /// `heavytail:samples=<n>,seed=<u64>`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, args) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a)),
            None => (s.trim(), None),
        };
        let mut params = Vec::new();
        if let Some(args) = args {
            for kv in args.split(',') {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::InvalidLaw(format!("expected key=value in `{kv}`")))?;
                params.push((k.trim(), v.trim()));
            }
        }
        let get = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let unknown = |allowed: &[&str]| {
            params
                .iter()
                .find(|(k, _)| !allowed.contains(k))
                .map(|(k, _)| Error::InvalidLaw(format!("unknown parameter `{k}` for `{head}`")))
        };
        let num_err = |k: &str, v: &str| Error::InvalidLaw(format!("bad value `{v}` for `{k}`"));

        match head {
            "uniform-stick" | "dirac-half" | "law075u" => {
                if let Some(e) = unknown(&[]) {
                    return Err(e);
                }
                Ok(match head {
                    "uniform-stick" => SplittingLaw::UniformStick,
                    "dirac-half" => SplittingLaw::DiracHalf,
                    _ => SplittingLaw::Law075U,
                })
            }
            "mix23" => {
                if let Some(e) = unknown(&["alpha"]) {
                    return Err(e);
                }
                let v = get("alpha").unwrap_or("0.5");
                let alpha = v.parse().map_err(|_| num_err("alpha", v))?;
                SplittingLaw::mix23(alpha)
            }
            "heavytail" => {
                if let Some(e) = unknown(&["samples", "seed"]) {
                    return Err(e);
                }
                let sv = get("samples").unwrap_or("1000000");
                let samples = sv.parse().map_err(|_| num_err("samples", sv))?;
                let dv = get("seed").unwrap_or("0");
                let seed = dv.parse().map_err(|_| num_err("seed", dv))?;
                SplittingLaw::heavy_tail(samples, seed)
            }
            other => Err(Error::InvalidLaw(format!("unknown law `{other}`"))),
        }
    }
}

/// `L`, `L'` and `L''` at one point. Monte Carlo profiles also carry the
/// standard error of each component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceValue {
    pub l: f64,
    pub dl: f64,
    pub d2l: f64,
    pub stderr: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
enum ClosedForm {
    /// `L(θ) = 2 / (θ + 1)`.
    UniformStick,
    /// Finitely many deterministic atom sizes: `L(θ) = Σ w_k r_k^θ`.
    Atomic(Vec<(f64, f64)>),
    Law075U,
}

impl ClosedForm {
    fn theta_lower(&self) -> f64 {
        match self {
            ClosedForm::UniformStick | ClosedForm::Law075U => -1.0,
            ClosedForm::Atomic(_) => f64::NEG_INFINITY,
        }
    }

    fn eval(&self, theta: f64) -> (f64, f64, f64) {
        match self {
            ClosedForm::UniformStick => {
                let g = theta + 1.0;
                (2.0 / g, -2.0 / (g * g), 4.0 / (g * g * g))
            }
            ClosedForm::Atomic(atoms) => atoms.iter().fold((0.0, 0.0, 0.0), |acc, &(w, r)| {
                let lr = r.ln();
                let t = w * (theta * lr).exp();
                (acc.0 + t, acc.1 + t * lr, acc.2 + t * lr * lr)
            }),
            ClosedForm::Law075U => {
                // E[(1 - 0.75U)^θ] = (1 - 0.25^g) / (0.75 g), g = θ + 1
                let g = theta + 1.0;
                let lq = 0.25f64.ln();
                let q = (g * lq).exp();
                let (n0, n1, n2) = (1.0 - q, -q * lq, -q * lq * lq);
                let a0 = n0 / (0.75 * g);
                let a1 = (n1 * g - n0) / (0.75 * g * g);
                let a2 = (n2 * g * g - 2.0 * n1 * g + 2.0 * n0) / (0.75 * g * g * g);
                // 15 E[(0.05U)^θ] = 15 * 0.05^θ / g
                let c = 0.05f64.ln();
                let e = 15.0 * (theta * c).exp();
                let b0 = e / g;
                let b1 = e * (c / g - 1.0 / (g * g));
                let b2 = e * (c * c / g - 2.0 * c / (g * g) + 2.0 / (g * g * g));
                (a0 + b0, a1 + b1, a2 + b2)
            }
        }
    }

    /// Largest log-term and the sum of terms relative to it.
    fn gibbs_top(atoms: &[(f64, f64)], theta: f64) -> (f64, f64) {
        let top = atoms
            .iter()
            .map(|&(w, r)| w.ln() + theta * r.ln())
            .fold(f64::NEG_INFINITY, f64::max);
        let z = atoms
            .iter()
            .map(|&(w, r)| (w.ln() + theta * r.ln() - top).exp())
            .sum();
        (top, z)
    }

    /// `ln L - θ L'/L` rewritten through the Gibbs weights
    /// `q_k = w_k r_k^θ / L`, which stays accurate when one atom dominates.
    fn atomic_phi(atoms: &[(f64, f64)], theta: f64) -> f64 {
        let logs: SmallVec<[f64; 4]> = atoms.iter().map(|&(w, r)| w.ln() + theta * r.ln()).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rel: SmallVec<[f64; 4]> = logs.iter().map(|&x| (x - top).exp()).collect();
        let z: f64 = rel.iter().sum();
        // φ = Σ q_k ln(w_k / q_k)
        atoms
            .iter()
            .zip(logs.iter().zip(&rel))
            .map(|(&(w, _), (&lg, &e))| {
                let q = e / z;
                if q == 0.0 {
                    0.0
                } else {
                    let ln_q = lg - top - z.ln();
                    q * (w.ln() - ln_q)
                }
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
struct MonteCarloSamples {
    /// Log-masses of the positive atoms of every sample, concatenated.
    log_masses: Vec<f64>,
    /// `offsets[s]..offsets[s + 1]` indexes sample `s`.
    offsets: Vec<usize>,
    seed: u64,
}

#[derive(Debug, Clone)]
enum ProfileSource {
    Closed(ClosedForm),
    MonteCarlo(Arc<MonteCarloSamples>),
}

/// Where a profile's values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    ClosedForm,
    MonteCarlo { samples: usize, seed: u64 },
}

/// Facts about a sample-only law that the caller vouches for, used by the
/// hypothesis checks in place of analysis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeclaredFacts {
    pub moment_condition: Option<bool>,
    pub saturation_condition: Option<bool>,
}

/// An evaluable Laplace transform `L(θ) = E[Σ_j ρ_j^θ]` together with the
/// boundary `θ̲` of its domain of finiteness.
#[derive(Debug, Clone)]
pub struct LaplaceProfile {
    theta_lower: f64,
    lattice: bool,
    declared: DeclaredFacts,
    source: ProfileSource,
}

const MC_DIVERGENCE_SHARE: f64 = 0.75;
/// Fraction of samples forming the top group in the divergence check.
const MC_TOP_FRACTION: f64 = 0.01;

impl LaplaceProfile {
    /// Monte Carlo profile from `samples` splits of `law`. The domain
    /// boundary is declared by the caller; it is not estimated.
    pub fn monte_carlo(
        law: &SplittingLaw,
        samples: usize,
        seed: u64,
        theta_lower: f64,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidLaw("monte-carlo profile needs samples".into()));
        }
        let mut rng = node_rng(Domain::Resample, seed, PathKey::ROOT);
        let mut log_masses = Vec::with_capacity(samples * law.support_bound());
        let mut offsets = Vec::with_capacity(samples + 1);
        offsets.push(0);
        for _ in 0..samples {
            let split = law.sample(&mut rng);
            log_masses.extend(split.positive().map(|(_, m)| m.ln()));
            offsets.push(log_masses.len());
        }
        Ok(LaplaceProfile {
            theta_lower,
            lattice: law.is_lattice(),
            declared: DeclaredFacts::default(),
            source: ProfileSource::MonteCarlo(Arc::new(MonteCarloSamples {
                log_masses,
                offsets,
                seed,
            })),
        })
    }

    pub fn with_declared(mut self, declared: DeclaredFacts) -> Self {
        self.declared = declared;
        self
    }

    pub fn theta_lower(&self) -> f64 {
        self.theta_lower
    }

    pub fn is_lattice(&self) -> bool {
        self.lattice
    }

    pub fn declared(&self) -> DeclaredFacts {
        self.declared
    }

    pub fn kind(&self) -> ProfileKind {
        match &self.source {
            ProfileSource::Closed(_) => ProfileKind::ClosedForm,
            ProfileSource::MonteCarlo(s) => ProfileKind::MonteCarlo {
                samples: s.offsets.len() - 1,
                seed: s.seed,
            },
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.source, ProfileSource::Closed(_))
    }

    /// `(L, L', L'')` at `θ`.
    pub fn eval(&self, theta: f64) -> Result<LaplaceValue> {
        if !(theta > self.theta_lower) || theta.is_nan() {
            return Err(Error::Domain {
                theta,
                lower: self.theta_lower,
            });
        }
        match &self.source {
            ProfileSource::Closed(form) => {
                let (l, dl, d2l) = form.eval(theta);
                // mass conservation
                let l = if theta == 1.0 { 1.0 } else { l };
                Ok(LaplaceValue {
                    l,
                    dl,
                    d2l,
                    stderr: None,
                })
            }
            ProfileSource::MonteCarlo(s) => mc_eval(s, theta),
        }
    }

    /// Closed forms whose `φ` has a cancellation-free expression.
    pub(crate) fn stable_phi(&self, theta: f64) -> Option<f64> {
        match &self.source {
            ProfileSource::Closed(ClosedForm::Atomic(atoms)) => {
                Some(ClosedForm::atomic_phi(atoms, theta))
            }
            _ => None,
        }
    }

    /// `L'(θ) / L(θ)`, computed without forming `L` for atomic closed forms
    /// so that it survives very large `|θ|`.
    pub fn log_slope(&self, theta: f64) -> Result<f64> {
        if let ProfileSource::Closed(ClosedForm::Atomic(atoms)) = &self.source {
            if !(theta > self.theta_lower) || theta.is_nan() {
                return Err(Error::Domain {
                    theta,
                    lower: self.theta_lower,
                });
            }
            let (top, _) = ClosedForm::gibbs_top(atoms, theta);
            let (num, den) = atoms.iter().fold((0.0, 0.0), |(n, d), &(w, r)| {
                let e = (w.ln() + theta * r.ln() - top).exp();
                (n + e * r.ln(), d + e)
            });
            return Ok(num / den);
        }
        let v = self.eval(theta)?;
        Ok(v.dl / v.l)
    }

    /// `ln L(θ)`, overflow-free for atomic closed forms.
    pub fn log_l(&self, theta: f64) -> Result<f64> {
        if let ProfileSource::Closed(ClosedForm::Atomic(atoms)) = &self.source {
            if !(theta > self.theta_lower) || theta.is_nan() {
                return Err(Error::Domain {
                    theta,
                    lower: self.theta_lower,
                });
            }
            let (top, z) = ClosedForm::gibbs_top(atoms, theta);
            return Ok(top + z.ln());
        }
        Ok(self.eval(theta)?.l.ln())
    }
}

fn mc_eval(s: &MonteCarloSamples, theta: f64) -> Result<LaplaceValue> {
    let n = s.offsets.len() - 1;
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    let mut per_split = Vec::with_capacity(n);
    for w in s.offsets.windows(2) {
        let mut x = [0.0f64; 3];
        for &lm in &s.log_masses[w[0]..w[1]] {
            let t = (theta * lm).exp();
            x[0] += t;
            x[1] += t * lm;
            x[2] += t * lm * lm;
        }
        per_split.push(x[0]);
        for c in 0..3 {
            sum[c] += x[c];
            sum_sq[c] += x[c] * x[c];
        }
    }
    if sum.iter().chain(&sum_sq).any(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            theta,
            reason: "non-finite sample moment".into(),
        });
    }
    // The top percent of splits carrying most of the total means the running
    // mean is still jumping by whole multiples: treat as a non-integrable
    // moment.
    if n >= 100 {
        let top = ((n as f64 * MC_TOP_FRACTION).ceil() as usize).max(1);
        per_split.select_nth_unstable_by(n - top, |a, b| a.total_cmp(b));
        let share = per_split[n - top..].iter().sum::<f64>() / sum[0];
        if share > MC_DIVERGENCE_SHARE {
            return Err(Error::Divergence {
                theta,
                reason: format!("the top {top} samples hold {:.0}% of the total", 100.0 * share),
            });
        }
    }
    let nf = n as f64;
    let mean = sum.map(|v| v / nf);
    let mut se = [0.0; 3];
    for c in 0..3 {
        let var = (sum_sq[c] / nf - mean[c] * mean[c]).max(0.0) * nf / (nf - 1.0).max(1.0);
        se[c] = (var / nf).sqrt();
    }
    Ok(LaplaceValue {
        l: mean[0],
        dl: mean[1],
        d2l: mean[2],
        stderr: Some(se),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NodeRng;
    use rand::SeedableRng;

    const ALL: [SplittingLaw; 5] = [
        SplittingLaw::UniformStick,
        SplittingLaw::DiracHalf,
        SplittingLaw::Mix23 { alpha: 0.5 },
        SplittingLaw::Law075U,
        SplittingLaw::HeavyTail {
            samples: 1000,
            seed: 1,
        },
    ];

    #[test]
    fn dirac_half_split() {
        let mut rng = NodeRng::seed_from_u64(3);
        assert_eq!(SplittingLaw::DiracHalf.sample(&mut rng).masses(), &[0.5, 0.5]);
    }

    #[test]
    fn uniform_stick_split() {
        let m = SplittingLaw::UniformStick.split_from_uniform(0.3);
        assert_eq!(m.masses(), &[0.3, 0.7]);
    }

    #[test]
    fn mix23_branches() {
        let law = SplittingLaw::mix23(0.5).unwrap();
        assert_eq!(law.split_from_uniform(0.2).masses(), &[0.5, 0.5]);
        assert_eq!(law.split_from_uniform(0.7).masses(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn laplace_examples() {
        let us = SplittingLaw::UniformStick.closed_form().unwrap();
        assert_eq!(us.eval(1.0).unwrap().l, 1.0);
        let v = us.eval(0.0).unwrap();
        assert_eq!((v.l, v.dl), (2.0, -2.0));
        let dh = SplittingLaw::DiracHalf.closed_form().unwrap();
        assert_eq!(dh.eval(2.0).unwrap().l, 0.5);
        let mx = SplittingLaw::Mix23 { alpha: 0.5 }.closed_form().unwrap();
        assert_eq!(mx.eval(1.0).unwrap().l, 1.0);
        let lu = SplittingLaw::Law075U.closed_form().unwrap();
        assert_eq!(lu.eval(1.0).unwrap().l, 1.0);
    }

    #[test]
    fn domain_errors() {
        let us = SplittingLaw::UniformStick.closed_form().unwrap();
        assert!(matches!(us.eval(-1.0), Err(Error::Domain { .. })));
        assert!(matches!(us.eval(-3.0), Err(Error::Domain { .. })));
        assert!(matches!(us.eval(f64::NAN), Err(Error::Domain { .. })));
    }

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        let h = 1e-4;
        for law in [
            SplittingLaw::UniformStick,
            SplittingLaw::Mix23 { alpha: 0.6 },
            SplittingLaw::Law075U,
        ] {
            let p = law.closed_form().unwrap();
            for &t in &[-0.5, 0.3, 1.7, 4.0] {
                let f = |x: f64| p.eval(x).unwrap();
                let d1 = (f(t + h).l - f(t - h).l) / (2.0 * h);
                let d2 = (f(t + h).dl - f(t - h).dl) / (2.0 * h);
                let v = f(t);
                assert!((d1 - v.dl).abs() < 1e-6 * (1.0 + v.dl.abs()), "{law} L' at {t}");
                assert!((d2 - v.d2l).abs() < 1e-6 * (1.0 + v.d2l.abs()), "{law} L'' at {t}");
            }
        }
    }

    #[test]
    fn monte_carlo_divergence_is_flagged() {
        // E[U^θ] is infinite for θ <= -1; declare a wrong boundary on purpose.
        let p = LaplaceProfile::monte_carlo(&SplittingLaw::UniformStick, 20_000, 5, -2.0).unwrap();
        assert!(matches!(p.eval(-1.5), Err(Error::Divergence { .. })));
        assert!(p.eval(2.0).is_ok());
    }

    #[test]
    fn parse_grammar() {
        for law in ALL {
            let back: SplittingLaw = law.to_string().parse().unwrap();
            assert_eq!(back, law);
        }
        assert_eq!(
            "mix23:alpha=0.75".parse::<SplittingLaw>().unwrap(),
            SplittingLaw::Mix23 { alpha: 0.75 }
        );
        assert!("mix23:alpha=1.0".parse::<SplittingLaw>().is_err());
        assert!("mix23:beta=0.5".parse::<SplittingLaw>().is_err());
        assert!("cantor".parse::<SplittingLaw>().is_err());
        assert!("heavytail:samples=ten".parse::<SplittingLaw>().is_err());
    }

    #[test]
    fn mass_vector_validation() {
        assert!(MassVector::new(&[0.5, 0.5], 2).is_ok());
        assert!(MassVector::new(&[0.5, 0.4], 2).is_err());
        assert!(MassVector::new(&[1.5, -0.5], 2).is_err());
        assert!(MassVector::new(&[0.25; 4], 3).is_err());
    }
}
