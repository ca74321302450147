use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Summary of one power-index vector. `gini` is `None` when the mean is not
/// positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanzhafStats {
    pub mean: f64,
    pub variance: f64,
    pub gini: Option<f64>,
}

pub fn banzhaf_stats(values: &[f64]) -> Result<BanzhafStats> {
    if values.is_empty() {
        return Err(Error::invalid("empty value array"));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let gini = (mean > 0.0).then(|| {
        let spread: f64 = values
            .iter()
            .map(|x| values.iter().map(|y| (x - y).abs()).sum::<f64>())
            .sum();
        spread / (2.0 * n * n * mean)
    });
    Ok(BanzhafStats {
        mean,
        variance,
        gini,
    })
}

/// Ranks starting at 1; tied values share their average rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation and its two-sided p-value from the Student-t
/// approximation with `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values", x.len()),
            got: format!("{} values", y.len()),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::Undefined(format!("spearman needs at least 3 points, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("spearman input is not finite"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let centre = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (a, b) = (a - centre, b - centre);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("constant input".into()));
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if rho.abs() == 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok((rho, p))
}
