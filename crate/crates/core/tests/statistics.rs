//! Distributional checks on the generators and kernels. Bands come from
//! independent Monte Carlo simulation or closed-form normal/binomial tails.

use ntklab::limit::{fw, fz, limit_matrices, mc_kernel};
use ntklab::network::{forward, ntk};
use ntklab::quasirandom::{check_bad_r, check_good_behavior, check_z_large, good_behavior_counts};
use ntklab::rng::derive_seed;
use ntklab::synth::{make_labels, sample_init, sample_sphere_data};
use ntklab::tensor::{gram, min_eigen_sym};
use ntklab::{LabelMode, Matrix, ProblemDims, Vector, ZInit};
use statrs::distribution::{ContinuousCDF, Normal};

fn phi(x: f64) -> f64 {
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

fn dims(n: usize, m: usize, s: usize) -> ProblemDims {
    ProblemDims::new(n, m, s).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[test]
fn sphere_data_max_overlap_band() {
    // 5th-95th percentile of max_{j≠j'} |<X^j, X^j'>| for n=100, m=200,
    // from 2000 independent numpy draws: [0.367, 0.449].
    let d = dims(100, 200, 1);
    let maxes: Vec<f64> = (0..50)
        .map(|seed| {
            let g = gram(&sample_sphere_data(d, seed));
            let mut best: f64 = 0.0;
            for j in 0..200 {
                for k in (j + 1)..200 {
                    best = best.max(g[(j, k)].abs());
                }
            }
            best
        })
        .collect();
    let med = median(maxes);
    assert!((0.367..=0.449).contains(&med), "median {med}");
}

#[test]
fn init_moments() {
    let d = dims(100, 1, 1000);
    let t = sample_init(d, ZInit::Gaussian, 5);
    let n = t.w.len() as f64;
    let mean = t.w.sum() / n;
    let var = t.w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!(mean.abs() < 0.02, "mean {mean}");
    assert!((0.95..=1.05).contains(&var), "variance {var}");
}

#[test]
fn gaussian_label_variance() {
    let d = dims(10, 400, 100);
    let x = sample_sphere_data(d, 1);
    let t = sample_init(d, ZInit::Rademacher, 1);
    let y = make_labels(LabelMode::Gaussian, &x, &t, d, 1).unwrap();
    let mean = y.mean();
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 399.0;
    assert!((80.0..=120.0).contains(&var), "variance {var}");
}

#[test]
fn gaussian_z_large_fraction() {
    let d = dims(100, 10, 1000);
    let t = sample_init(d, ZInit::Gaussian, 2);
    let frac = check_z_large(&t.z, 0.5, d).observed / 1000.0;
    let p = 2.0 * phi(-0.5);
    assert!((p - 0.617).abs() < 1e-3);
    assert!((0.55..=0.68).contains(&frac), "fraction {frac}");
}

#[test]
fn good_behavior_binomial_band() {
    let d = dims(100, 20, 1000);
    let x = sample_sphere_data(d, 3);
    let t = sample_init(d, ZInit::Rademacher, 3);
    let p = 2.0 * phi(0.1) - 1.0;
    let (mu, sd) = (1000.0 * p, (1000.0 * p * (1.0 - p)).sqrt());
    for c in good_behavior_counts(&t, &x, 0.1) {
        assert!((c as f64 - mu).abs() <= 5.0 * sd, "count {c} vs {mu}");
    }
    let r = &check_good_behavior(&t, &x, &[0.1], d)[0];
    assert!(r.observed <= (mu + 5.0 * sd) / 101.0);
}

#[test]
fn bad_r_binomial_band() {
    let d = dims(100, 1000, 1);
    let x = sample_sphere_data(d, 4);
    let mut w = sample_sphere_data(dims(100, 1, 1), 5).column(0).into_owned();
    w *= 10.0;
    let p = 2.0 * phi(0.05) - 1.0;
    let (mu, sd) = (1000.0 * p, (1000.0 * p * (1.0 - p)).sqrt());
    assert!((mu - 39.9).abs() < 0.1);
    let r = &check_bad_r(&w, &x, &[0.05], d).unwrap()[0];
    assert!((r.observed - mu).abs() <= 5.0 * sd, "observed {}", r.observed);
    assert!(r.pass_hint);
}

fn unit_pair(n: usize, gamma: f64) -> (Vector, Vector) {
    let mut x = Vector::zeros(n);
    x[0] = 1.0;
    let mut xp = Vector::zeros(n);
    xp[0] = gamma;
    xp[1] = (1.0 - gamma * gamma).sqrt();
    (x, xp)
}

#[test]
fn monte_carlo_half() {
    let (x, xp) = unit_pair(5, 0.5);
    let (ew, ez) = mc_kernel(&x, &xp, 1_000_000, 17).unwrap();
    assert!((ew - fw(0.5).unwrap()).abs() < 5e-3);
    assert!((ez - fz(0.5).unwrap()).abs() < 5e-3);
}

#[test]
fn monte_carlo_error_shrinks_like_root_n() {
    let gammas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let rms_error = |num: usize, rep: u64| -> f64 {
        let mut sq = 0.0;
        for (k, &g) in gammas.iter().enumerate() {
            let (x, xp) = unit_pair(3, g);
            let (ew, ez) = mc_kernel(&x, &xp, num, derive_seed(rep, &[num as u64, k as u64])).unwrap();
            sq += (ew - fw(g).unwrap()).powi(2) + (ez - fz(g).unwrap()).powi(2);
        }
        sq.sqrt()
    };
    let ratios: Vec<f64> = (0..20).map(|rep| rms_error(16_000, rep) / rms_error(4_000, rep)).collect();
    let med = median(ratios);
    assert!(med < 0.7, "median error ratio {med}");
}

#[test]
fn limit_matrices_are_psd() {
    let x = sample_sphere_data(dims(50, 200, 1), 6);
    let (hw, hz) = limit_matrices(&x).unwrap();
    assert!(min_eigen_sym(&hw).unwrap() >= -1e-10);
    assert!(min_eigen_sym(&hz).unwrap() >= -1e-10);
}

fn max_entry_gap(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).amax()
}

#[test]
fn first_layer_ntk_approaches_limit() {
    let d = dims(50, 100, 1000);
    let x = sample_sphere_data(d, 7);
    let t = sample_init(d, ZInit::Rademacher, 7);
    let h0 = ntk(&forward(&t, &x, &Vector::zeros(100)).unwrap(), &x).h / 1000.0;
    let (hw, _) = limit_matrices(&x).unwrap();
    let bound = 5.0 * ((100f64).ln() / 1000.0).sqrt();
    let gap = max_entry_gap(&h0, &hw);
    assert!(gap <= bound, "gap {gap} > {bound}");
}

#[test]
fn second_layer_ntk_approaches_limit() {
    // 99th percentile of the max entry gap over 200 numpy draws is 0.091.
    let d = dims(50, 50, 2000);
    let x = sample_sphere_data(d, 8);
    let t = sample_init(d, ZInit::Rademacher, 8);
    let g0 = ntk(&forward(&t, &x, &Vector::zeros(50)).unwrap(), &x).g / 2000.0;
    let (_, hz) = limit_matrices(&x).unwrap();
    let gap = max_entry_gap(&g0, &hz);
    assert!(gap <= 0.12, "gap {gap}");
}
