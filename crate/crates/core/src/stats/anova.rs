use serde::Serialize;

use super::fdist::f_sf;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnovaResult {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Set when within-group variance vanishes while group means differ;
    /// F is then infinite and p is 0.
    pub degenerate: bool,
}

/// One-way ANOVA across `groups`. Variances are unbiased sample variances.
pub fn one_way_anova(groups: &[&[f64]]) -> Result<AnovaResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidData(format!("ANOVA needs at least 2 groups, got {}", groups.len())));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
        return Err(Error::InvalidData(format!("group {i} has {} observations, need at least 2", g.len())));
    }
    if groups.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite("ANOVA input".into()));
    }

    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let ssw_parts: Vec<f64> = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m) * (v - m)).sum())
        .collect();
    let variances: Vec<f64> = ssw_parts.iter().zip(groups).map(|(s, g)| s / (g.len() - 1) as f64).collect();
    let ssw: f64 = ssw_parts.iter().sum();

    // pairwise form: exactly zero whenever all group means coincide
    let mut ssb = 0.0;
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let d = means[i] - means[j];
            ssb += (groups[i].len() * groups[j].len()) as f64 * d * d;
        }
    }
    ssb /= n_total as f64;

    let df_between = groups.len() - 1;
    let df_within = n_total - groups.len();
    let (f, p, degenerate) = if ssb == 0.0 {
        (0.0, 1.0, false)
    } else if ssw == 0.0 {
        (f64::INFINITY, 0.0, true)
    } else {
        let f = (ssb / df_between as f64) / (ssw / df_within as f64);
        (f, f_sf(f, df_between as f64, df_within as f64), false)
    };
    Ok(AnovaResult {
        f,
        p,
        df_between,
        df_within,
        means,
        variances,
        degenerate,
    })
}
