//! Log-gamma, the regularized incomplete beta function, and the F-distribution
//! upper tail built on it. Continued-fraction evaluation keeps the toolkit
//! free of a statistics-library dependency while staying accurate to well
//! below 1e-8 absolute.

/// ln Γ(x) for x > 0, via the Lanczos approximation.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    const COEFFS: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut sum = 1.000000000190015;
    for (i, c) in COEFFS.iter().enumerate() {
        sum += c / (x + i as f64 + 1.0);
    }
    let tmp = x + 5.5;
    (x + 0.5) * tmp.ln() - tmp + (2.5066282746310005 * sum / x).ln()
}

// Continued fraction for the incomplete beta function (modified Lentz).
fn betacf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 400;
    const EPS: f64 = 3.0e-16;
    const FPMIN: f64 = 1.0e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
pub fn inc_beta(x: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "inc_beta requires positive shape parameters");
    assert!((0.0..=1.0).contains(&x), "inc_beta requires x in [0, 1], got {x}");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast for x below the split point;
    // use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) above it.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(x, a, b) / a
    } else {
        1.0 - front * betacf(1.0 - x, b, a) / b
    }
}

/// Upper tail P(F > f) of the F distribution with (d1, d2) degrees of freedom.
pub fn f_distribution_sf(f: f64, d1: u64, d2: u64) -> f64 {
    assert!(d1 >= 1 && d2 >= 1, "degrees of freedom must be positive");
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    let d1 = d1 as f64;
    let d2 = d2 as f64;
    inc_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with an independent implementation before
    // the build.
    #[test]
    fn ln_gamma_reference_points() {
        assert!((ln_gamma(0.5) - 0.5723649429247).abs() < 1e-12);
        assert!((ln_gamma(7.5) - 7.534364236758734).abs() < 1e-12);
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn inc_beta_reference_points() {
        assert!((inc_beta(0.5, 2.0, 3.0) - 0.6875).abs() < 1e-12);
        assert!((inc_beta(0.25, 0.5, 0.5) - 0.33333333333333337).abs() < 1e-10);
        assert!((inc_beta(0.8, 5.0, 2.0) - 0.65536).abs() < 1e-12);
        assert_eq!(inc_beta(0.0, 2.0, 3.0), 0.0);
        assert_eq!(inc_beta(1.0, 2.0, 3.0), 1.0);
    }

    #[test]
    fn f_tail_reference_points() {
        let cases = [
            (5.0763549601705975, 3, 15, 0.012669957527061702),
            (1.4704841083971419, 3, 15, 0.2625592286828091),
            (1.0, 4, 40, 0.41890476988622194),
            (2.5, 2, 10, 0.13168724279835387),
            (10.0, 1, 1, 0.19498222904213672),
        ];
        for (f, d1, d2, expected) in cases {
            let got = f_distribution_sf(f, d1, d2);
            assert!(
                (got - expected).abs() < 1e-10,
                "sf({f}, {d1}, {d2}) = {got}, expected {expected}"
            );
        }
        assert_eq!(f_distribution_sf(0.0, 3, 12), 1.0);
        assert_eq!(f_distribution_sf(f64::INFINITY, 3, 12), 0.0);
    }

    #[test]
    fn f_tail_monotone_decreasing_in_f() {
        let mut prev = 1.0;
        for i in 0..200 {
            let f = i as f64 * 0.25;
            let p = f_distribution_sf(f, 3, 15);
            assert!(p <= prev + 1e-15, "p not monotone at f={f}");
            prev = p;
        }
    }
}
