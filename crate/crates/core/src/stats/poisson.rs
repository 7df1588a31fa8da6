use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// `P[Poisson(mu) = k]`.
pub fn poisson_pmf(mu: f64, k: u64) -> f64 {
    if mu <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-mu + k as f64 * mu.ln() - ln_gamma(k as f64 + 1.0)).exp()
}

/// `P[Poisson(mu) >= k]`, summed from the side that avoids cancellation.
pub fn poisson_upper_tail(mu: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if mu <= 0.0 {
        return 0.0;
    }
    if (k as f64) <= mu {
        // lower sum is at most ~1/2 here, so 1 - lower keeps full relative precision
        let mut term = (-mu).exp();
        let mut lower = 0.0;
        if term > 0.0 {
            for j in 0..k {
                lower += term;
                term *= mu / (j + 1) as f64;
            }
            return (1.0 - lower).clamp(0.0, 1.0);
        }
        // e^{-mu} underflows: sum the lower tail from k-1 downwards in log space
        let mut t = poisson_pmf(mu, k - 1);
        let mut j = k - 1;
        loop {
            lower += t;
            if j == 0 || t < lower * 1e-17 {
                break;
            }
            t *= j as f64 / mu;
            j -= 1;
        }
        return (1.0 - lower).clamp(0.0, 1.0);
    }
    let mut term = poisson_pmf(mu, k);
    let mut sum = 0.0;
    let mut j = k;
    while term > 0.0 {
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        j += 1;
        term *= mu / j as f64;
    }
    sum.min(1.0)
}

/// Exact upper tail of a Poisson variable next to its Chernoff bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub rho: f64,
    pub threshold: u64,
    pub exact: f64,
    /// `exp(-lambda A + rho (e^lambda - 1))` at `lambda = ln(A / rho)`; `None` when `A < 2 rho`.
    pub chernoff_bound: Option<f64>,
    pub ratio: Option<f64>,
}

pub fn poisson_tail(rho: f64, threshold: u64) -> TailReport {
    let exact = if rho <= 0.0 { if threshold == 0 { 1.0 } else { 0.0 } } else { poisson_upper_tail(rho, threshold) };
    let a = threshold as f64;
    let chernoff_bound = if rho > 0.0 && a >= 2.0 * rho {
        let lambda = (a / rho).ln();
        Some((-lambda * a + rho * (lambda.exp() - 1.0)).exp())
    } else {
        None
    };
    let ratio = chernoff_bound.map(|b| exact / b);
    TailReport { rho, threshold, exact, chernoff_bound, ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{DiscreteCDF, Poisson};

    // naive forward series, the reference for small parameters
    fn series_tail(mu: f64, k: u64) -> f64 {
        let mut term = (-mu).exp();
        let mut lower = 0.0;
        for j in 0..k {
            lower += term;
            term *= mu / (j + 1) as f64;
        }
        let mut upper = 0.0;
        let mut t = term;
        let mut j = k;
        while t > 1e-300 && j < k + 2000 {
            upper += t;
            j += 1;
            t *= mu / j as f64;
        }
        if lower < 0.5 { 1.0 - lower } else { upper }
    }

    #[test]
    fn anchors() {
        assert_eq!(poisson_tail(1.0, 0).exact, 1.0);
        let r = poisson_tail(1.0, 10);
        assert!((r.exact - 1.1142e-7).abs() < 5e-11, "{}", r.exact);
        assert!((r.exact - series_tail(1.0, 10)).abs() < 1e-20);
        assert_eq!(poisson_tail(0.0, 3).exact, 0.0);
        assert_eq!(poisson_tail(-1.0, 3).exact, 0.0);
    }

    #[test]
    fn agrees_with_statrs() {
        for &mu in &[0.3, 1.0, 4.0, 25.0, 200.0, 900.0] {
            let p = Poisson::new(mu).unwrap();
            for k in [1u64, 2, 5, 10, 30, 100, 250, 1000] {
                let ours = poisson_upper_tail(mu, k);
                let theirs = p.sf(k - 1);
                let scale = ours.max(theirs).max(1e-300);
                assert!((ours - theirs).abs() / scale < 1e-8 || (ours - theirs).abs() < 1e-15, "mu={mu} k={k}: {ours} vs {theirs}");
            }
        }
    }

    #[test]
    fn chernoff_dominates_on_grid() {
        for &rho in &[0.5, 1.0, 2.0, 4.0] {
            for a in 0..=50u64 {
                let r = poisson_tail(rho, a);
                if let Some(b) = r.chernoff_bound {
                    assert!(r.exact <= b, "rho={rho} A={a}: {} > {b}", r.exact);
                }
            }
        }
    }
}
