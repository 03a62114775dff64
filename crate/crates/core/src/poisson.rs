//! Poisson tail probabilities accurate to a few ulps.
//!
//! Whichever tail does not contain the mean is summed directly, term by term
//! away from the mean, so the summands decrease geometrically and nothing
//! cancels. The other tail is its complement, which is then bounded away
//! from zero.

/// `ln(k!)`: exact summation for small `k`, Stirling series beyond.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    if k <= 256 {
        return (2..=k).map(|i| (i as f64).ln()).sum();
    }
    let x = k as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// `P(Poisson(x) = k)`.
pub fn poisson_pmf(x: f64, k: u64) -> f64 {
    if x == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-x + k as f64 * x.ln() - ln_factorial(k)).exp()
}

/// `P(Poisson(x) >= j - ...)` summed upward from `j`; requires `j > x`.
fn upper_sum(x: f64, j: u64) -> f64 {
    let mut term = poisson_pmf(x, j);
    let mut total = 0.0;
    let mut k = j;
    while term > 0.0 {
        total += term;
        k += 1;
        term *= x / k as f64;
        if term < total * 1e-18 {
            break;
        }
    }
    total
}

/// `P(Poisson(x) < j)` summed downward from `j - 1`; requires `j - 1 < x`.
fn lower_sum(x: f64, j: u64) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let mut k = j - 1;
    let mut term = poisson_pmf(x, k);
    let mut total = 0.0;
    loop {
        total += term;
        if k == 0 || term < total * 1e-18 {
            break;
        }
        term *= k as f64 / x;
        k -= 1;
    }
    total
}

/// `P(Poisson(x) >= j)` for `x > 0`.
pub fn poisson_tail(x: f64, j: u64) -> f64 {
    assert!(x > 0.0 && x.is_finite(), "poisson_tail needs a positive mean, got {x}");
    if j == 0 {
        return 1.0;
    }
    if j as f64 > x {
        upper_sum(x, j)
    } else {
        1.0 - lower_sum(x, j)
    }
}

/// `P(Poisson(x) < j)` for `x > 0`.
pub fn poisson_lower_tail(x: f64, j: u64) -> f64 {
    assert!(x > 0.0 && x.is_finite(), "poisson_lower_tail needs a positive mean, got {x}");
    if j == 0 {
        return 0.0;
    }
    if ((j - 1) as f64) < x {
        lower_sum(x, j)
    } else {
        1.0 - upper_sum(x, j)
    }
}
