use crate::error::{Error, Result};

fn check(theta: f64, rates: &[f64], counts: &[usize]) -> Result<()> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::InvalidParams(format!("theta must be > 0, got {theta}")));
    }
    if rates.iter().any(|&l| !(l.is_finite() && l >= 0.0)) {
        return Err(Error::InvalidParams("arrival rates must be finite and >= 0".into()));
    }
    if counts.contains(&0) {
        return Err(Error::InvalidParams("Erlang stage counts must be >= 1".into()));
    }
    Ok(())
}

/// `int_0^inf exp(-theta x) P{Erlang(r, lam) > x} dx = sum_{k<r} lam^k / (lam+theta)^{k+1}`.
pub fn erlang_tail_integral(lam: f64, theta: f64, r: usize) -> Result<f64> {
    check(theta, &[lam], &[r])?;
    let s = lam + theta;
    let q = lam / s;
    let mut term = 1.0 / s;
    let mut sum = 0.0;
    for _ in 0..r {
        sum += term;
        term *= q;
    }
    Ok(sum)
}

/// `int_0^inf exp(-theta x) [1 - F1(x) F2(x)] dx` for independent Erlang CDFs `F1`, `F2`.
pub fn erlang_max_sojourn(lam1: f64, r1: usize, lam2: f64, r2: usize, theta: f64) -> Result<f64> {
    check(theta, &[lam1, lam2], &[r1, r2])?;
    let s1 = erlang_tail_integral(lam1, theta, r1)?;
    let s2 = erlang_tail_integral(lam2, theta, r2)?;
    let s = lam1 + lam2 + theta;
    let (p, q) = (lam1 / s, lam2 / s);
    // t(k,l) = C(k+l,k) p^k q^l
    let mut both = 0.0;
    let mut head = 1.0;
    for k in 0..r1 {
        let mut t = head;
        for l in 0..r2 {
            if l > 0 {
                t *= q * (k + l) as f64 / l as f64;
            }
            both += t;
        }
        head *= p;
    }
    Ok(s1 + s2 - both / s)
}
