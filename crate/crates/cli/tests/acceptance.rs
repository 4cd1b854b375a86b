//! Acceptance gates for the estimator and its Monte Carlo claims.
//!
//! One test per criterion; each prints a single pass/FAIL line (visible with
//! `--nocapture`) with the measured quantity, the tolerance pinned in code,
//! and the elapsed time against the runtime budget.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use drrd_core::sim::scenarios;
use drrd_core::{
    assign_treatment, estimate_dr, generate, local_linear_fit_at, localization_weight,
    run_scenario, select_bandwidth, true_tau, Arm, BandwidthPolicy, BandwidthRule,
    BootstrapSettings, Dataset, DgpSpec, KernelFamily, McRow, OutcomeModelSpec, RdConfig,
    ScenarioOptions, SideKernelStats,
};
use rand::Rng;
use tempfile::TempDir;

fn verdict(criterion: u32, name: &str, ok: bool, detail: String) {
    let line = format!(
        "criterion {criterion} ({name}): {} — {detail}",
        if ok { "pass" } else { "FAIL" }
    );
    println!("{line}");
    assert!(ok, "{line}");
}

fn budgeted(elapsed: Duration, budget: Duration) -> (bool, String) {
    (
        elapsed <= budget,
        format!("elapsed {:.2?} (budget {:.0?})", elapsed, budget),
    )
}

fn rd_config(first_stage: OutcomeModelSpec, bandwidth: BandwidthRule) -> RdConfig {
    RdConfig {
        cutoff: 0.0,
        kernel: KernelFamily::Triangular,
        bandwidth,
        first_stage,
    }
}

fn sieve(degree_w: u32) -> OutcomeModelSpec {
    OutcomeModelSpec::PolynomialSieve {
        degree_w,
        include_z: false,
        z_degree: 0,
    }
}

/// |bias| never grows along the grid by more than three combined MC-SEs.
fn shrinks_within_slack(rows: &[McRow]) -> bool {
    rows.windows(2).all(|pair| {
        pair[1].bias.abs() <= pair[0].bias.abs() + 3.0 * pair[0].mc_se.hypot(pair[1].mc_se)
    })
}

/// Draws until both sides of the cutoff hold at least two units.
fn generate_two_sided(dgp: &DgpSpec, n: usize, mut seed: u64) -> Dataset {
    loop {
        let (data, _) = generate(dgp, n, seed).unwrap();
        let treatment = assign_treatment(&data, dgp.cutoff);
        if treatment.count(Arm::Control) >= 2 && treatment.count(Arm::Treated) >= 2 {
            return data;
        }
        seed += 1000;
    }
}

#[test]
fn criterion_01_exact_recovery() {
    let start = Instant::now();
    let mut dgp = scenarios::linear_jump();
    dgp.noise_sd = 0.0;
    let tau0 = true_tau(&dgp).unwrap();

    let mut worst = 0.0f64;
    for n in [100, 1000] {
        let data = generate_two_sided(&dgp, n, 101);
        for bandwidth in [
            BandwidthRule::RuleOfThumb,
            BandwidthRule::Fixed { h: 0.25 },
            BandwidthRule::Fixed { h: 5.0 },
        ] {
            let est = estimate_dr(&data, &rd_config(sieve(1), bandwidth)).unwrap();
            worst = worst.max((est.tau_hat - tau0).abs());
        }
    }

    let (in_time, timing) = budgeted(start.elapsed(), Duration::from_secs(1));
    verdict(
        1,
        "exact recovery",
        worst < 1e-8 && in_time,
        format!("max |tau_hat - tau0| = {worst:.3e} (tolerance 1e-8); {timing}"),
    );
}

#[test]
fn criterion_02_weight_normalization() {
    let start = Instant::now();
    let dgp = scenarios::linear_jump();
    let families = [
        KernelFamily::Triangular,
        KernelFamily::Epanechnikov,
        KernelFamily::Uniform,
        KernelFamily::Gaussian,
    ];

    let mut rng = drrd_core::rng::stream_rng(202, &[0xACC]);
    let mut worst = 0.0f64;
    for i in 0..200u64 {
        let n = rng.random_range(20..=500);
        let family = families[(i % 4) as usize];
        let data = generate_two_sided(&dgp, n, 7000 + i);
        let treatment = assign_treatment(&data, 0.0);
        let h = select_bandwidth(&BandwidthRule::RuleOfThumb, data.w(), 0.0).unwrap();
        let stats = SideKernelStats::compute(data.w(), &treatment, 0.0, h, family).unwrap();
        for arm in Arm::BOTH {
            let idx = treatment.side_indices(arm);
            let mean = idx
                .iter()
                .map(|&i| {
                    localization_weight(data.w()[i], stats.zeta(arm), 0.0, h, family).unwrap()
                })
                .sum::<f64>()
                / idx.len() as f64;
            worst = worst.max((mean - 1.0).abs());
        }
    }

    let (in_time, timing) = budgeted(start.elapsed(), Duration::from_secs(1));
    verdict(
        2,
        "weight normalization",
        worst < 1e-12 && in_time,
        format!("max |per-side mean(r_hat) - 1| = {worst:.3e} (tolerance 1e-12) over 200 datasets x 4 kernels; {timing}"),
    );
}

#[test]
fn criterion_03_reduction_oracle() {
    let start = Instant::now();
    let families = [
        KernelFamily::Triangular,
        KernelFamily::Epanechnikov,
        KernelFamily::Uniform,
        KernelFamily::Gaussian,
    ];

    let mut rng = drrd_core::rng::stream_rng(303, &[0xACC]);
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let n = rng.random_range(6..=50);
        let mut w = vec![-0.5, -0.25, 0.25, 0.5];
        let mut y = Vec::new();
        while w.len() < n {
            w.push(rng.random_range(-1.0..1.0));
        }
        for _ in 0..n {
            y.push(rng.random_range(-2.0..2.0));
        }
        let h = rng.random_range(0.6..2.0);
        let family = families[(i % 4) as usize];
        let data = Dataset::without_covariates(y, w).unwrap();

        // Brute-force evaluation of the score sums, written from scratch:
        // zeta_d = mean of K over side d, tau = mean_d(y K / zeta) difference.
        let k: Vec<f64> = data.w().iter().map(|&wi| family.eval(wi / h)).collect();
        let mut sums = [(0.0, 0.0, 0usize); 2]; // (sum K, sum yK, count)
        for i in 0..data.n() {
            let side = usize::from(data.w()[i] >= 0.0);
            sums[side].0 += k[i];
            sums[side].1 += data.y()[i] * k[i];
            sums[side].2 += 1;
        }
        let side_mean = |s: (f64, f64, usize)| (s.1 / s.2 as f64) / (s.0 / s.2 as f64);
        let brute = side_mean(sums[1]) - side_mean(sums[0]);

        let cfg = RdConfig {
            kernel: family,
            ..rd_config(OutcomeModelSpec::ConstantZero, BandwidthRule::Fixed { h })
        };
        let est = estimate_dr(&data, &cfg).unwrap();
        worst = worst.max((est.tau_hat - brute).abs());
    }

    let (in_time, timing) = budgeted(start.elapsed(), Duration::from_secs(1));
    verdict(
        3,
        "reduction oracle",
        worst < 1e-12 && in_time,
        format!("max |tau_hat - brute force| = {worst:.3e} (tolerance 1e-12) over 100 instances; {timing}"),
    );
}

#[test]
fn criterion_04_robustness_correct_first_stage() {
    let start = Instant::now();
    let dgp = scenarios::curved_jump();
    let rd = rd_config(sieve(3), BandwidthRule::Fixed { h: 0.5 });
    let opts = ScenarioOptions {
        n_grid: vec![500, 2000, 8000],
        reps: 400,
        seed: 404,
        bandwidth_policy: BandwidthPolicy::FromConfig,
        bootstrap: None,
        include_baseline: false,
    };
    let report = run_scenario(&dgp, &rd, &opts).unwrap();
    let last = report.rows.last().unwrap();
    let shrinking = shrinks_within_slack(&report.rows);

    let (in_time, timing) = budgeted(start.elapsed(), Duration::from_secs(120));
    verdict(
        4,
        "robust arm: correct first stage, fixed bandwidth",
        last.bias.abs() < 0.02 && shrinking && in_time,
        format!(
            "|bias| at n=8000 = {:.4} (tolerance 0.02), grid biases {:?}, shrinking within 3 MC-SE slack = {shrinking}; {timing}",
            last.bias.abs(),
            report.rows.iter().map(|r| r.bias).collect::<Vec<_>>(),
        ),
    );
}

#[test]
fn criterion_05_robustness_shrinking_bandwidth() {
    let start = Instant::now();
    let dgp = scenarios::curved_jump();
    let rd = rd_config(OutcomeModelSpec::ConstantZero, BandwidthRule::RuleOfThumb);
    let opts = ScenarioOptions {
        n_grid: vec![500, 2000, 8000],
        reps: 400,
        seed: 505,
        bandwidth_policy: BandwidthPolicy::Shrinking { c0: 1.0 },
        bootstrap: None,
        include_baseline: false,
    };
    let report = run_scenario(&dgp, &rd, &opts).unwrap();
    let last = report.rows.last().unwrap();
    let shrinking = shrinks_within_slack(&report.rows);

    let (in_time, timing) = budgeted(start.elapsed(), Duration::from_secs(120));
    verdict(
        5,
        "robust arm: zero first stage, h = n^(-1/5)",
        last.bias.abs() < 0.05 && shrinking && in_time,
        format!(
            "|bias| at n=8000 = {:.4} (tolerance 0.05), grid biases {:?}, shrinking within 3 MC-SE slack = {shrinking}; {timing}",
            last.bias.abs(),
            report.rows.iter().map(|r| r.bias).collect::<Vec<_>>(),
        ),
    );
}

#[test]
fn criterion_06_negative_control() {
    let start = Instant::now();
    let dgp = scenarios::curved_jump();
    let rd = rd_config(sieve(1), BandwidthRule::Fixed { h: 2.0 });
    let opts = ScenarioOptions {
        n_grid: vec![500, 2000, 8000],
        reps: 400,
        seed: 606,
        bandwidth_policy: BandwidthPolicy::FromConfig,
        bootstrap: None,
        include_baseline: false,
    };
    let report = run_scenario(&dgp, &rd, &opts).unwrap();
    let last = report.rows.last().unwrap();
    let biased = last.bias.abs() > 3.0 * last.mc_se;

    let (in_time, timing) = budgeted(start.elapsed(), Duration::from_secs(120));
    verdict(
        6,
        "negative control: misspecified first stage, wide fixed bandwidth",
        biased && !report.converged && in_time,
        format!(
            "|bias| at n=8000 = {:.4} vs 3 MC-SE = {:.4}, report converged = {}; {timing}",
            last.bias.abs(),
            3.0 * last.mc_se,
            report.converged,
        ),
    );
}

#[test]
fn criterion_07_baseline_agreement() {
    let start = Instant::now();
    let dgp = scenarios::linear_jump();
    let rd = rd_config(sieve(1), BandwidthRule::RuleOfThumb);
    let opts = ScenarioOptions {
        n_grid: vec![8000],
        reps: 400,
        seed: 707,
        bandwidth_policy: BandwidthPolicy::FromConfig,
        bootstrap: None,
        include_baseline: true,
    };
    let report = run_scenario(&dgp, &rd, &opts).unwrap();
    let row = &report.rows[0];
    let baseline_mean = row.baseline_mean.unwrap();
    let gap = (row.mean_estimate - baseline_mean).abs();
    let slack = 3.0 * (row.mc_se + row.baseline_mc_se.unwrap());

    let (in_time, timing) = budgeted(start.elapsed(), Duration::from_secs(120));
    verdict(
        7,
        "local-linear baseline agreement",
        gap < slack && in_time,
        format!(
            "|mean difference| at n=8000 = {gap:.5} vs 3 x (sum of MC-SEs) = {slack:.5}; {timing}"
        ),
    );
}

#[test]
fn criterion_08_bootstrap_coverage() {
    let start = Instant::now();
    let dgp = scenarios::linear_jump();
    let rd = rd_config(sieve(1), BandwidthRule::RuleOfThumb);
    let opts = ScenarioOptions {
        n_grid: vec![2000],
        reps: 500,
        seed: 808,
        bandwidth_policy: BandwidthPolicy::FromConfig,
        bootstrap: Some(BootstrapSettings {
            reps: 200,
            level: 0.95,
        }),
        include_baseline: false,
    };
    let report = run_scenario(&dgp, &rd, &opts).unwrap();
    let coverage = report.rows[0].coverage.unwrap();

    let (in_time, timing) = budgeted(start.elapsed(), Duration::from_secs(600));
    verdict(
        8,
        "bootstrap coverage",
        (0.90..=0.98).contains(&coverage) && in_time,
        format!(
            "95% CI coverage = {coverage:.3} over 500 datasets x 200 bootstrap reps (band [0.90, 0.98]); {timing}"
        ),
    );
}

#[test]
fn criterion_09_determinism() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("mc.json");
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            r#"
mode = "simulate"
[rd]
cutoff = 0.0
[rd.first_stage]
type = "polynomial_sieve"
degree_w = 1
[simulate]
scenario = "linear_jump"
n_grid = [150, 300]
reps = 60
seed = 909
[output]
path = "{}"
"#,
            out.display()
        ),
    )
    .unwrap();

    let run_once = |path: &Path| {
        let output = Command::new(env!("CARGO_BIN_EXE_drrd"))
            .args(["--config", path.to_str().unwrap()])
            .output()
            .expect("binary spawns");
        assert!(output.status.success(), "{output:?}");
        std::fs::read(&out).unwrap()
    };
    let first = run_once(&config);
    let second = run_once(&config);
    let reports_identical = first == second;

    let dgp = scenarios::linear_jump();
    let (data, _) = generate(&dgp, 500, 909).unwrap();
    let (data_again, _) = generate(&dgp, 500, 909).unwrap();
    let rd = rd_config(sieve(1), BandwidthRule::RuleOfThumb);
    let a = estimate_dr(&data, &rd).unwrap().tau_hat;
    let b = estimate_dr(&data, &rd).unwrap().tau_hat;
    let c = estimate_dr(&data_again, &rd).unwrap().tau_hat;
    let estimates_identical = a.to_bits() == b.to_bits() && a.to_bits() == c.to_bits();

    verdict(
        9,
        "determinism",
        reports_identical && estimates_identical,
        format!(
            "simulate reports byte-identical = {reports_identical} ({} bytes), repeated tau_hat bit-identical = {estimates_identical}",
            first.len(),
        ),
    );
}

/// Gaussian elimination with partial pivoting, independent of the library's
/// QR/SVD path.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    x
}

#[test]
fn criterion_10_fit_oracles() {
    let start = Instant::now();
    let mut rng = drrd_core::rng::stream_rng(1010, &[0xACC]);
    let mut worst_sieve = 0.0f64;
    let mut worst_ll = 0.0f64;

    for i in 0..100u32 {
        let n_side = rng.random_range(16..=26);
        let degree_w = 1 + i % 3;
        let include_z = i % 2 == 1;
        let z_degree = if include_z { 1 + i % 2 } else { 0 };
        let z_cols = if include_z { 1 } else { 0 };

        let mut w = Vec::new();
        let mut y = Vec::new();
        let mut z = Vec::new();
        for side in [-1.0, 1.0] {
            for _ in 0..n_side {
                w.push(side * rng.random_range(0.01..1.0));
                y.push(rng.random_range(-2.0..2.0));
                for _ in 0..z_cols {
                    z.push(rng.random_range(-1.0..1.0));
                }
            }
        }
        let data = Dataset::new(y, w, z, z_cols).unwrap();
        let treatment = assign_treatment(&data, 0.0);

        let spec = OutcomeModelSpec::PolynomialSieve {
            degree_w,
            include_z,
            z_degree,
        };
        let model = drrd_core::fit(&spec, &data, &treatment, 0.0).unwrap();

        for arm in Arm::BOTH {
            // Normal equations X'X beta = X'y on the same basis
            // {1, w, ..., w^p} then z^1..z^z_degree.
            let idx = treatment.side_indices(arm);
            let p = 1 + degree_w as usize + z_cols * z_degree as usize;
            let mut xtx = vec![vec![0.0; p]; p];
            let mut xty = vec![0.0; p];
            for &u in &idx {
                let mut row = Vec::with_capacity(p);
                for k in 0..=degree_w {
                    row.push(data.w()[u].powi(k as i32));
                }
                for &zj in data.z_row(u) {
                    for k in 1..=z_degree {
                        row.push(zj.powi(k as i32));
                    }
                }
                for a in 0..p {
                    for b in 0..p {
                        xtx[a][b] += row[a] * row[b];
                    }
                    xty[a] += row[a] * data.y()[u];
                }
            }
            let oracle = solve_dense(xtx, xty);
            let got = model.coefficients(arm).unwrap();
            for (g, o) in got.iter().zip(&oracle) {
                worst_sieve = worst_sieve.max((g - o).abs());
            }
        }

        // Local-linear: weighted 2x2 normal equations solved by elimination.
        let h = rng.random_range(0.8..1.2);
        for arm in Arm::BOTH {
            let idx = treatment.side_indices(arm);
            let w_side: Vec<f64> = idx.iter().map(|&u| data.w()[u]).collect();
            let y_side: Vec<f64> = idx.iter().map(|&u| data.y()[u]).collect();
            let fit =
                local_linear_fit_at(&w_side, &y_side, 0.0, h, KernelFamily::Triangular, arm)
                    .unwrap();
            let (mut s0, mut s1, mut s2, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&wi, &yi) in w_side.iter().zip(&y_side) {
                let k = KernelFamily::Triangular.eval(wi / h);
                s0 += k;
                s1 += k * wi;
                s2 += k * wi * wi;
                sy += k * yi;
                sty += k * wi * yi;
            }
            let oracle = solve_dense(vec![vec![s0, s1], vec![s1, s2]], vec![sy, sty]);
            worst_ll = worst_ll.max((fit.intercept - oracle[0]).abs());
            worst_ll = worst_ll.max((fit.slope - oracle[1]).abs());
        }
    }

    let (in_time, timing) = budgeted(start.elapsed(), Duration::from_secs(60));
    verdict(
        10,
        "fit oracles",
        worst_sieve < 1e-8 && worst_ll < 1e-8 && in_time,
        format!(
            "max sieve coefficient gap = {worst_sieve:.3e}, max local-linear gap = {worst_ll:.3e} (tolerance 1e-8) over 100 designs; {timing}"
        ),
    );
}
