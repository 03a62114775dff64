//! Critical exponents and the asymptotic constants of heights and saturation
//! levels.
//!
//! Everything here is driven by `φ(θ) = ln L(θ) - θ L'(θ)/L(θ)`, which is
//! increasing on `(θ̲, 0)` and decreasing on `(0, ∞)`. The positivity interval
//! of `φ` is `(θ₋, θ*)`; both ends are located by bracketed bisection.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::laws::LaplaceProfile;

/// Residual tolerance on `φ` at a returned root.
pub const ROOT_RESIDUAL: f64 = 1e-10;

/// Ball-count threshold of a height or saturation level: a fixed integer `j`,
/// or `⌈n^α⌉` growing with the number of balls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Threshold {
    Fixed(u64),
    Power(f64),
}

impl Threshold {
    /// The integer threshold in force for `n` balls.
    pub fn for_balls(self, n: u64) -> u64 {
        match self {
            Threshold::Fixed(j) => j,
            Threshold::Power(alpha) => {
                let x = (n as f64).powf(alpha);
                // powf can land one ulp above an exact integer power
                let r = x.round();
                let m = if (r - x).abs() <= 1e-9 * x.max(1.0) { r } else { x.ceil() };
                (m as u64).max(1)
            }
        }
    }

    fn validate(self, min_fixed: u64) -> Result<()> {
        match self {
            Threshold::Fixed(j) if j < min_fixed => Err(Error::InvalidConfig(format!(
                "threshold j = {j} must be at least {min_fixed}"
            ))),
            Threshold::Power(a) if !(a > 0.0 && a < 1.0) => Err(Error::InvalidConfig(format!(
                "power exponent alpha = {a} must lie in (0, 1)"
            ))),
            _ => Ok(()),
        }
    }
}

/// Tri-state outcome of a hypothesis check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    Holds,
    Fails,
    Unknown,
}

impl std::fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Hypothesis::Holds => "holds",
            Hypothesis::Fails => "fails",
            Hypothesis::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Probe bound for declaring `θ* = ∞` (and `θ₋ = -∞`).
    pub theta_max: f64,
    /// Bisection stops once the bracket is this narrow.
    pub tolerance: f64,
    /// Closest approach to the domain boundary `θ̲`.
    pub boundary_gap: f64,
    /// Relative stabilization required of `-L/L'` when `θ → ±∞`.
    pub limit_tolerance: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            theta_max: 128.0,
            tolerance: 1e-12,
            boundary_gap: 1e-9,
            limit_tolerance: 1e-6,
        }
    }
}

/// How an end of the positivity interval of `φ` was determined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Endpoint {
    /// Sign change of `φ`, refined by bisection.
    Root { theta: f64, residual: f64 },
    /// `φ` stays positive all the way to the boundary `θ̲`.
    Boundary { theta: f64 },
    /// `φ` stays positive on the whole probed ray.
    Infinite,
}

impl Endpoint {
    /// The endpoint as a real number, `±∞` for infinite ones.
    pub fn value(&self, sign: f64) -> f64 {
        match *self {
            Endpoint::Root { theta, .. } | Endpoint::Boundary { theta } => theta,
            Endpoint::Infinite => sign * f64::INFINITY,
        }
    }

    pub fn residual(&self) -> Option<f64> {
        match *self {
            Endpoint::Root { residual, .. } => Some(residual),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalExponents {
    pub lower: Endpoint,
    pub upper: Endpoint,
}

impl CriticalExponents {
    pub fn theta_star_lower(&self) -> f64 {
        self.lower.value(-1.0)
    }

    pub fn theta_star_upper(&self) -> f64 {
        self.upper.value(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalConstants {
    pub theta_lower: f64,
    pub theta_star_lower: f64,
    pub theta_star_upper: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub hyp2: Hypothesis,
    pub hyp3: Hypothesis,
    pub residual_lower: Option<f64>,
    pub residual_upper: Option<f64>,
}

/// `φ(θ) = ln L(θ) - θ L'(θ) / L(θ)`.
pub fn phi(profile: &LaplaceProfile, theta: f64) -> Result<f64> {
    if let Some(v) = profile.stable_phi(theta) {
        if !(theta > profile.theta_lower()) {
            return Err(Error::Domain {
                theta,
                lower: profile.theta_lower(),
            });
        }
        return Ok(v);
    }
    let v = profile.eval(theta)?;
    Ok(v.l.ln() - theta * v.dl / v.l)
}

/// Bisection on a bracket where `f(pos) > 0 >= f(neg)`.
fn bisect<F>(mut f: F, mut pos: f64, mut neg: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    while (pos - neg).abs() > tol {
        let mid = 0.5 * (pos + neg);
        if mid == pos || mid == neg {
            break;
        }
        if f(mid)? > 0.0 {
            pos = mid;
        } else {
            neg = mid;
        }
    }
    Ok(0.5 * (pos + neg))
}

/// Locates `θ₋` and `θ*`, the ends of the interval where `φ > 0`.
pub fn critical_exponents(
    profile: &LaplaceProfile,
    opts: &SearchOptions,
) -> Result<CriticalExponents> {
    if profile.is_lattice() {
        return Err(Error::LatticeLaw("profile".into()));
    }
    let f = |t: f64| phi(profile, t);
    let lower_bound = profile.theta_lower();
    if !(lower_bound < 1.0) {
        return Err(Error::Inconclusive(format!(
            "domain boundary {lower_bound} leaves no room above 1"
        )));
    }
    if f(1.0)? <= 0.0 {
        return Err(Error::Inconclusive("φ(1) is not positive (degenerate law)".into()));
    }

    // upward: φ decreasing on (0, ∞), positive at 1
    let mut pos = 1.0;
    let mut upper = None;
    let mut probe = 2.0;
    while probe <= opts.theta_max {
        if f(probe)? <= 0.0 {
            let root = bisect(f, pos, probe, opts.tolerance)?;
            upper = Some(Endpoint::Root {
                theta: root,
                residual: f(root)?.abs(),
            });
            break;
        }
        pos = probe;
        probe *= 2.0;
    }
    let upper = match upper {
        Some(u) => u,
        None => {
            // L(θ)^{1/θ} tends to the essential sup of the largest atom; when
            // that is below one, φ never crosses zero.
            let sup_norm = (profile.log_l(opts.theta_max)? / opts.theta_max).exp();
            if sup_norm < 0.99 {
                Endpoint::Infinite
            } else {
                return Err(Error::Inconclusive(format!(
                    "φ > 0 up to θ = {} but L(θ)^(1/θ) = {sup_norm:.6} does not rule out a finite θ*",
                    opts.theta_max
                )));
            }
        }
    };

    // downward: φ increasing on (θ̲, 0), positive at 0 for non-degenerate laws
    let lower = if lower_bound >= 0.0 {
        Endpoint::Boundary { theta: lower_bound }
    } else {
        let probes: Vec<f64> = if lower_bound.is_finite() {
            let mut v = Vec::new();
            let mut gap = -lower_bound / 2.0;
            while gap > opts.boundary_gap {
                v.push(lower_bound + gap);
                gap /= 2.0;
            }
            v.push(lower_bound + opts.boundary_gap);
            v
        } else {
            std::iter::successors(Some(-1.0), |t| Some(t * 2.0))
                .take_while(|t| *t >= -opts.theta_max)
                .collect()
        };
        let mut pos = 0.0;
        let mut found = None;
        for &t in &probes {
            if f(t)? <= 0.0 {
                let root = bisect(f, pos, t, opts.tolerance)?;
                found = Some(Endpoint::Root {
                    theta: root,
                    residual: f(root)?.abs(),
                });
                break;
            }
            pos = t;
        }
        match found {
            Some(e) => e,
            None if lower_bound.is_finite() => Endpoint::Boundary { theta: lower_bound },
            None => Endpoint::Infinite,
        }
    };
    Ok(CriticalExponents { lower, upper })
}

/// `-L/L'` along `θ = ±8, ±16, …, ±θmax`, requiring the last two values to
/// agree to the limit tolerance.
fn limit_ratio(profile: &LaplaceProfile, sign: f64, opts: &SearchOptions) -> Result<f64> {
    let grid: Vec<f64> = std::iter::successors(Some(8.0), |t| Some(t * 2.0))
        .take_while(|t| *t <= opts.theta_max)
        .map(|t| sign * t)
        .collect();
    if grid.len() < 2 {
        return Err(Error::NonConvergence(format!(
            "probe bound {} too small for a limit",
            opts.theta_max
        )));
    }
    let values = grid
        .iter()
        .map(|&t| Ok(-1.0 / profile.log_slope(t)?))
        .collect::<Result<Vec<f64>>>()?;
    let (a, b) = (values[values.len() - 2], values[values.len() - 1]);
    if !b.is_finite() || (b - a).abs() > opts.limit_tolerance * b.abs() {
        return Err(Error::NonConvergence(format!(
            "-L/L' moved from {a} to {b} between θ = {} and θ = {}",
            grid[grid.len() - 2],
            grid[grid.len() - 1]
        )));
    }
    Ok(b)
}

/// `C₋` and `C*` from the critical exponents, plus hypothesis flags.
pub fn limit_constants(
    profile: &LaplaceProfile,
    exponents: &CriticalExponents,
    opts: &SearchOptions,
) -> Result<CriticalConstants> {
    let at = |t: f64| -> Result<f64> { Ok(-1.0 / profile.log_slope(t)?) };
    let c_upper = match exponents.upper {
        Endpoint::Root { theta, .. } => at(theta)?,
        Endpoint::Infinite => limit_ratio(profile, 1.0, opts)?,
        Endpoint::Boundary { .. } => unreachable!("upper end is never a boundary"),
    };
    let c_lower = match exponents.lower {
        Endpoint::Root { theta, .. } => at(theta)?,
        Endpoint::Boundary { theta } => at(theta + opts.boundary_gap)?,
        Endpoint::Infinite => limit_ratio(profile, -1.0, opts)?,
    };
    let (hyp2, hyp3) = check_hypotheses(profile, exponents)?;
    Ok(CriticalConstants {
        theta_lower: profile.theta_lower(),
        theta_star_lower: exponents.theta_star_lower(),
        theta_star_upper: exponents.theta_star_upper(),
        c_lower,
        c_upper,
        hyp2,
        hyp3,
        residual_lower: exponents.lower.residual(),
        residual_upper: exponents.upper.residual(),
    })
}

/// Exponents and constants in one call.
pub fn critical_constants(
    profile: &LaplaceProfile,
    opts: &SearchOptions,
) -> Result<CriticalConstants> {
    let exps = critical_exponents(profile, opts)?;
    limit_constants(profile, &exps, opts)
}

/// The moment condition (`L(-δ) < ∞` with a `(1+δ)`-moment of the atom
/// count) and the saturation condition (`-∞ < θ₋ < 0`, `φ(θ₋) = 0`).
pub fn check_hypotheses(
    profile: &LaplaceProfile,
    exponents: &CriticalExponents,
) -> Result<(Hypothesis, Hypothesis)> {
    if profile.is_lattice() {
        return Err(Error::LatticeLaw("profile".into()));
    }
    let from_decl = |d: Option<bool>| match d {
        Some(true) => Hypothesis::Holds,
        Some(false) => Hypothesis::Fails,
        None => Hypothesis::Unknown,
    };
    let declared = profile.declared();
    // Every simulable law has a finite support bound, so the atom-count
    // moment is automatic and the moment condition reduces to θ̲ < 0.
    let hyp2 = if profile.theta_lower() >= 0.0 {
        Hypothesis::Fails
    } else if profile.is_closed_form() {
        Hypothesis::Holds
    } else {
        from_decl(declared.moment_condition)
    };
    let analytic_hyp3 = match exponents.lower {
        Endpoint::Root { theta, residual } if theta < 0.0 => {
            if residual <= ROOT_RESIDUAL {
                Hypothesis::Holds
            } else {
                Hypothesis::Unknown
            }
        }
        _ => Hypothesis::Fails,
    };
    let hyp3 = if profile.is_closed_form() || analytic_hyp3 == Hypothesis::Fails {
        analytic_hyp3
    } else {
        from_decl(declared.saturation_condition)
    };
    Ok((hyp2, hyp3))
}

/// `C_j` (equal to `-j / ln L(j)` below `θ*` and to `C*` from there on), or
/// `(1-α) C*` for a power threshold.
pub fn height_constant(
    constants: &CriticalConstants,
    profile: &LaplaceProfile,
    threshold: Threshold,
) -> Result<f64> {
    threshold.validate(2)?;
    match threshold {
        Threshold::Fixed(j) => {
            let jf = j as f64;
            if jf < constants.theta_star_upper {
                Ok(-jf / profile.log_l(jf)?)
            } else {
                Ok(constants.c_upper)
            }
        }
        Threshold::Power(alpha) => {
            if constants.theta_star_upper.is_infinite() {
                return Err(Error::UnsupportedRegime(
                    "power-threshold heights need a finite θ*".into(),
                ));
            }
            Ok((1.0 - alpha) * constants.c_upper)
        }
    }
}

/// `C₋` for every fixed threshold, `(1-α) C₋` for a power threshold.
pub fn saturation_constant(constants: &CriticalConstants, threshold: Threshold) -> Result<f64> {
    threshold.validate(1)?;
    let hyp3 = constants.hyp3 == Hypothesis::Holds;
    match threshold {
        Threshold::Fixed(_) => {
            if constants.theta_star_lower == f64::NEG_INFINITY || hyp3 {
                Ok(constants.c_lower)
            } else {
                Err(Error::UnsupportedRegime(
                    "saturation levels need θ₋ = -∞ or the saturation condition".into(),
                ))
            }
        }
        Threshold::Power(alpha) => {
            if hyp3 {
                Ok((1.0 - alpha) * constants.c_lower)
            } else {
                Err(Error::UnsupportedRegime(
                    "power-threshold saturation levels need the saturation condition".into(),
                ))
            }
        }
    }
}
