#![allow(dead_code)]

use ssm_smc::stats;

pub mod clg;
pub mod grid;

/// Mean and standard error of `exp(log_z - exact)`.
pub fn ratio_mean_se(log_z: &[f64], exact: f64) -> (f64, f64) {
    let ratios: Vec<f64> = log_z.iter().map(|l| (l - exact).exp()).collect();
    let se = (stats::variance(&ratios) / ratios.len() as f64).sqrt();
    (stats::mean(&ratios), se)
}

pub fn assert_unbiased(label: &str, log_z: &[f64], exact: f64) {
    let (mean, se) = ratio_mean_se(log_z, exact);
    assert!(
        (mean - 1.0).abs() <= 4.0 * se,
        "{label}: mean ratio {mean} outside 1 ± 4·{se}"
    );
}

/// One-sided check that `small` has no larger variance than `large`,
/// allowing four standard errors of the difference.
pub fn assert_variance_le(label: &str, small: &[f64], large: &[f64]) {
    let (vs, vl) = (stats::variance(small), stats::variance(large));
    let se = (stats::variance_se(small).powi(2) + stats::variance_se(large).powi(2)).sqrt();
    assert!(vs <= vl + 4.0 * se, "{label}: {vs} > {vl} + 4·{se}");
}
