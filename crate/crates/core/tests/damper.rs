use ssm_smc::damper::{Damper, DamperConfig, DamperTheta};
use ssm_smc::model::simulate;
use ssm_smc::{stats, Dataset, RngStream, SsmModel};

const GOLDEN_OBS: &str = include_str!("golden/damper_seed7_obs.csv");
const GOLDEN_TRUTH: &str = include_str!("golden/damper_seed7_truth.csv");

#[test]
fn simulation_matches_golden_files() {
    let model = Damper::default();
    let data = simulate(&model, &model.true_theta(), 40, &RngStream::new(7)).unwrap();
    let mut obs = Vec::new();
    data.write_obs_csv(&mut obs).unwrap();
    assert_eq!(String::from_utf8(obs).unwrap(), GOLDEN_OBS);
    let mut truth = Vec::new();
    data.write_truth_csv(&mut truth).unwrap();
    assert_eq!(String::from_utf8(truth).unwrap(), GOLDEN_TRUTH);
}

#[test]
fn golden_observations_parse_back() {
    let data = Dataset::read_obs_csv(GOLDEN_OBS.as_bytes(), "golden").unwrap();
    assert_eq!(data.horizon(), 40);
    let fresh = simulate(&Damper::default(), &Damper::default().true_theta(), 40, &RngStream::new(7)).unwrap();
    assert_eq!(data.obs_flat(), fresh.obs_flat());
}

#[test]
fn measurement_residuals_have_the_configured_spread() {
    let model = Damper::default();
    let data = model.simulate(&RngStream::new(123)).unwrap();
    assert_eq!(data.horizon(), 1000);
    let residuals: Vec<f64> = (1..=data.horizon()).map(|t| data.obs(t)[0] - data.state(t).unwrap()[0]).collect();
    let var = stats::variance(&residuals);
    let expected = model.config().sigma_e.powi(2);
    let se = stats::variance_se(&residuals);
    assert!((var - expected).abs() < 4.0 * se, "{var} vs {expected} ± 4·{se}");
}

#[test]
fn stiffness_prior_has_the_expected_mean() {
    let model = Damper::default();
    let root = RngStream::new(5);
    let draws: Vec<f64> = (0..1_000_000u64).map(|i| model.sample_prior(&mut root.child(i))[0]).collect();
    let se = (stats::variance(&draws) / draws.len() as f64).sqrt();
    let m = stats::mean(&draws);
    assert!((m - 1.2).abs() < 4.0 * se, "{m}");
}

#[test]
fn custom_truth_is_used_for_simulation() {
    let theta_true = DamperTheta { k: 1.0, p: 0.5, f_c: 0.0, c_0: 0.2 };
    let model = Damper::new(DamperConfig { theta_true, horizon: 10, ..Default::default() }).unwrap();
    let data = model.simulate(&RngStream::new(0)).unwrap();
    assert_eq!(data.horizon(), 10);
    assert_eq!(data.theta().unwrap(), &model.theta(theta_true));
}
