//! Orbit-side diagnostics: empirical measures, Birkhoff averages, Brin-Katok
//! local entropy, recurrence times and growth-rate fits.

use std::io::Write;

use serde::Serialize;

use crate::ergopt::Potential;
use crate::error::{Error, Result};
use crate::measures::{EmpiricalMeasure, MarkovMeasure};
use crate::shift::{self, SftSpace, Word};

/// `P_n(x)` projected to `depth`-cylinders.
pub fn empirical(space: &SftSpace, x: &Word, n: usize, depth: usize) -> Result<EmpiricalMeasure> {
    space.check_symbols(&x.0)?;
    EmpiricalMeasure::from_word(&x.0, n, depth, space.alphabet_size())
}

/// `(1/n) sum_{i<n} f(T^i x)` for a locally constant `f`.
pub fn birkhoff_avg(x: &Word, f: &Potential, n: usize) -> Result<f64> {
    let r = f.depth();
    let needed = n + r - 1;
    if x.len() < needed || n == 0 {
        return Err(Error::WordsTooShort {
            needed: needed.max(1),
            got: x.len(),
        });
    }
    let mut sum = 0.0;
    for i in 0..n {
        sum += f.value(&x.0[i..i + r])?;
    }
    Ok(sum / n as f64)
}

/// `-(1/n) log mu(B_n(x, 2^-k))`, the ball being the `(n+k-1)`-cylinder of `x`.
pub fn brin_katok_estimate(mu: &MarkovMeasure, x: &Word, n: usize, k: usize) -> Result<f64> {
    let len = shift::separation_prefix(n, k);
    if x.len() < len {
        return Err(Error::WordsTooShort {
            needed: len,
            got: x.len(),
        });
    }
    let lp = mu.log_cylinder_prob(&x.0[..len]);
    if !lp.is_finite() {
        return Err(Error::ZeroCylinder);
    }
    Ok((-lp / n as f64).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Recurrence {
    pub time: usize,
    /// `t_{i+1} / t_i`.
    pub ratio: f64,
}

/// Return times `t >= 1` of `x` to `[target]` and their consecutive ratios.
pub fn recurrence_ratios(x: &Word, target: &Word) -> Result<Vec<Recurrence>> {
    let c = target.len();
    if c == 0 || x.len() < c {
        return Err(Error::NotRecurrent);
    }
    let times: Vec<usize> = (1..=x.len() - c)
        .filter(|t| x.0[*t..*t + c] == target.0[..])
        .collect();
    if times.len() < 2 {
        return Err(Error::NotRecurrent);
    }
    Ok(times
        .windows(2)
        .map(|w| Recurrence {
            time: w[0],
            ratio: w[1] as f64 / w[0] as f64,
        })
        .collect())
}

/// Least-squares fit of `log s` against `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRate {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    /// Half-width of the 95% normal band on the slope.
    pub band: f64,
    /// Largest slope over suffixes with at least two points.
    pub max_suffix_slope: f64,
}

fn ols(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

pub fn growth_rate(counts: &[(usize, usize)]) -> Result<GrowthRate> {
    if counts.len() < 3 {
        return Err(Error::Degenerate(format!("{} points, need 3", counts.len())));
    }
    if counts.iter().any(|(_, s)| *s == 0) {
        return Err(Error::Degenerate("counts must be at least 1".into()));
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let xs: Vec<f64> = sorted.iter().map(|(n, _)| *n as f64).collect();
    let ys: Vec<f64> = sorted.iter().map(|(_, s)| (*s as f64).ln()).collect();
    let (slope, intercept) =
        ols(&xs, &ys).ok_or_else(|| Error::Degenerate("all n are equal".into()))?;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let se = if k > 2.0 { (sse / (k - 2.0) / sxx).sqrt() } else { 0.0 };
    let max_suffix_slope = (0..xs.len() - 1)
        .filter_map(|i| ols(&xs[i..], &ys[i..]).map(|(s, _)| s))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GrowthRate {
        slope,
        intercept,
        residual: (sse / k).sqrt(),
        band: 1.96 * se,
        max_suffix_slope,
    })
}

/// Count table as CSV with columns `n,count,log_count`.
pub fn write_counts_csv<W: Write>(out: W, counts: &[(usize, usize)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(["n", "count", "log_count"]).map_err(io)?;
    for (n, s) in counts {
        w.write_record([n.to_string(), s.to_string(), format!("{:.12}", (*s as f64).ln())])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

/// Recurrence table as CSV with columns `i,t_i,ratio`.
pub fn write_ratios_csv<W: Write>(out: W, rows: &[Recurrence]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(["i", "t_i", "ratio"]).map_err(io)?;
    for (i, r) in rows.iter().enumerate() {
        w.write_record([i.to_string(), r.time.to_string(), format!("{:.12}", r.ratio)])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample_word, CylinderMeasure};
    use proptest::prelude::*;

    fn alternating(n: usize) -> Word {
        Word((0..n).map(|i| (i % 2) as u8).collect())
    }

    #[test]
    fn empirical_examples() {
        let full = SftSpace::full(2);
        let e = empirical(&full, &Word::from("0000"), 3, 1).unwrap();
        assert_eq!(e.total(), 3);
        assert_eq!(e.count(&[0]), 3);
        let e = empirical(&full, &alternating(101), 100, 2).unwrap();
        assert_eq!(e.count(&[0, 1]), 50);
        assert_eq!(e.count(&[1, 0]), 50);
        assert!(empirical(&full, &alternating(10), 10, 2).is_err());
    }

    #[test]
    fn birkhoff_examples() {
        let full = SftSpace::full(2);
        let c = Potential::from_fn(&full, 1, |_| 2.5).unwrap();
        assert_eq!(birkhoff_avg(&alternating(9), &c, 9).unwrap(), 2.5);
        let ind = Potential::from_fn(&full, 1, |w| f64::from(w[0])).unwrap();
        assert_eq!(birkhoff_avg(&alternating(40), &ind, 40).unwrap(), 0.5);
    }

    #[test]
    fn brin_katok_examples() {
        let half = MarkovMeasure::bernoulli2(0.5).unwrap();
        let x = Word::from("0110100");
        assert!((brin_katok_estimate(&half, &x, 6, 1).unwrap() - 2f64.ln()).abs() < 1e-15);
        let p = 0.3;
        let mu = MarkovMeasure::bernoulli2(p).unwrap();
        let x = sample_word(&mu, 100_000, 17);
        let h = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
        assert!((brin_katok_estimate(&mu, &x, 99_999, 1).unwrap() - h).abs() < 0.01);
        let fixed = MarkovMeasure::bernoulli2(0.0).unwrap();
        assert_eq!(brin_katok_estimate(&fixed, &Word::from("0000"), 4, 1).unwrap(), 0.0);
        assert_eq!(
            brin_katok_estimate(&fixed, &Word::from("0100"), 4, 1),
            Err(Error::ZeroCylinder)
        );
    }

    #[test]
    fn brin_katok_markov_identity() {
        let gm = SftSpace::golden_mean();
        let mu = MarkovMeasure::parry(&gm).unwrap();
        let x = Word::from("0010100100");
        let p = mu.stochastic();
        let mut lp = mu.stationary()[0].ln();
        for w in x.0.windows(2) {
            lp += p[w[0] as usize][w[1] as usize].ln();
        }
        let est = brin_katok_estimate(&mu, &x, 10, 1).unwrap();
        assert!((est + lp / 10.0).abs() < 1e-15);
    }

    #[test]
    fn recurrence_examples() {
        let r = recurrence_ratios(&alternating(41), &Word::from("0")).unwrap();
        assert_eq!(r[0].time, 2);
        assert_eq!(r[0].ratio, 2.0);
        assert!((r.last().unwrap().ratio - 40.0 / 38.0).abs() < 1e-15);
        assert_eq!(
            recurrence_ratios(&Word::from("000"), &Word::from("1")),
            Err(Error::NotRecurrent)
        );
        let mu = MarkovMeasure::bernoulli2(0.5).unwrap();
        let x = sample_word(&mu, 100_000, 3);
        let r = recurrence_ratios(&x, &Word::from("00")).unwrap();
        assert!(r[r.len() - 10..].iter().all(|v| v.ratio <= 1.2));
    }

    #[test]
    fn growth_rate_examples() {
        let g = growth_rate(&[(3, 8), (5, 32), (9, 512)]).unwrap();
        assert!((g.slope - 2f64.ln()).abs() < 1e-12);
        assert!(g.residual < 1e-12);
        let flat = growth_rate(&[(1, 1), (2, 1), (3, 1)]).unwrap();
        assert_eq!(flat.slope, 0.0);
        assert!(matches!(growth_rate(&[(1, 2), (2, 4)]), Err(Error::Degenerate(_))));
        assert!(matches!(growth_rate(&[(1, 2), (1, 4), (1, 3)]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_counts_csv(&mut buf, &[(4, 16)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("n,count,log_count\n4,16,2.772588722240"));
    }

    proptest! {
        #[test]
        fn birkhoff_matches_empirical(
            bits in proptest::collection::vec(0u8..2, 10..60),
            table in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            let full = SftSpace::full(2);
            let f = Potential::from_fn(&full, 2, |w| table[(w[0] * 2 + w[1]) as usize]).unwrap();
            let n = bits.len() - 1;
            let x = Word(bits);
            let e = empirical(&full, &x, n, 2).unwrap();
            let mut integral = 0.0;
            for (i, v) in table.iter().enumerate() {
                integral += v * e.cylinder_prob(&[(i / 2) as u8, (i % 2) as u8]);
            }
            prop_assert!((integral - birkhoff_avg(&x, &f, n).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn exponential_growth_recovered(base in 2usize..5, start in 1usize..5) {
            let pts: Vec<(usize, usize)> =
                (0..4).map(|i| (start + 2 * i, base.pow((start + 2 * i) as u32))).collect();
            let g = growth_rate(&pts).unwrap();
            prop_assert!((g.slope - (base as f64).ln()).abs() < 1e-12);
        }
    }
}
