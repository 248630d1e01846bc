//! Acceptance criteria. Runs without the libtest harness and prints one
//! `PASS`/`FAIL` line per criterion; exits non-zero if any fails.

use std::time::{Duration, Instant};

use kurtosis_contrast::diagnostics::{redundancy_bound, reff_bound, viability_check};
use kurtosis_contrast::experiments::{
    records_to_csv, run_fig1a, run_fig1b, run_fig1c, run_model_order_g, summarize_fig1a, summarize_fig1b,
    summarize_fig1c, summarize_model_order_g, with_thread_cap, ExperimentConfig, ExperimentName, TrialRecord,
};
use kurtosis_contrast::ica::unmixing_error;
use kurtosis_contrast::mixing::{
    balance_constant, block_balance_probe, effective_width, make_balanced_weights, population_projection_kurtosis,
    ProjectionWeights,
};
use kurtosis_contrast::seeding::stream_rng;
use kurtosis_contrast::stats::wilcoxon_signed_rank_one_sided;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: u32, title: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("[{}] {id:>2}. {title}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed())
}

fn random_unit(rng: &mut impl Rng, r: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..r).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn weights(v: Vec<f64>) -> ProjectionWeights<f64> {
    let n = v.len();
    ProjectionWeights::normalized(v, (0..n).collect()).unwrap()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

fn brute_force_unmixing_error(g: &Array2<f64>) -> f64 {
    let k = g.nrows();
    let total: f64 = g.iter().map(|v| v * v).sum();
    let best = permutations(k)
        .into_iter()
        .map(|p| (0..k).map(|j| g[[p[j], j]] * g[[p[j], j]]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    ((total - best).max(0.0) / k as f64).sqrt()
}

fn brute_force_wilcoxon(d: &[f64]) -> f64 {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    let mut ranks = vec![0u64; n];
    for (r, &i) in order.iter().enumerate() {
        ranks[i] = r as u64 + 1;
    }
    let observed: u64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| ranks[i]).sum();
    let hits = (0u64..1 << n)
        .filter(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum::<u64>() >= observed)
        .count();
    hits as f64 / (1u64 << n) as f64
}

fn csv_under(threads: usize, f: impl Fn() -> Vec<TrialRecord> + Send) -> String {
    records_to_csv(&with_thread_cap(Some(threads), f).unwrap()).unwrap()
}

fn main() {
    let mut report = Report { failures: 0 };

    let fig1b_cfg = ExperimentConfig::default_for(ExperimentName::Fig1b);
    let (fig1b, fig1b_time) = timed(|| run_fig1b(&fig1b_cfg).unwrap());
    let b = summarize_fig1b(&fig1b_cfg, &fig1b).unwrap();

    // 1. Redundancy law.
    let c_fit = b.inverse_fit.coefficient;
    let r2 = b.inverse_fit.r_squared;
    report.line(
        1,
        "redundancy law",
        (1.2..=2.0).contains(&c_fit) && r2 >= 0.95 && fig1b_time <= Duration::from_secs(120),
        format!("c_fit = {c_fit:.4} (want [1.2, 2.0]), R² = {r2:.4} (want ≥ 0.95), fig1b runtime {:.1}s (want ≤ 120s)", fig1b_time.as_secs_f64()),
    );

    // 2. Order tightness.
    let worst = (1..=200usize)
        .flat_map(|r| [0.5, 1.5, 6.0].map(move |k0| (r, k0)))
        .map(|(r, k0)| {
            let w = make_balanced_weights::<f64>(r).unwrap();
            (population_projection_kurtosis(&w, &vec![k0; r]).unwrap() - k0 / r as f64).abs()
        })
        .fold(0.0f64, f64::max);
    report.line(2, "order tightness", worst <= 1e-12, format!("max |κ(y) − κ0/R| over R = 1..200 = {worst:.2e} (want ≤ 1e-12)"));

    // 3. Population bounds.
    let mut rng = stream_rng(3, 0);
    let (mut v_reff, mut v_cb) = (0usize, 0usize);
    for _ in 0..10_000 {
        let r = rng.random_range(1..=80);
        let w = weights(random_unit(&mut rng, r));
        let kappas: Vec<f64> = (0..r).map(|_| rng.random_range(-1.2..8.0)).collect();
        let kmax = kappas.iter().fold(0.0f64, |m, k| m.max(k.abs()));
        let exact = population_projection_kurtosis(&w, &kappas).unwrap().abs();
        let slack = 1e-12 * kmax.max(1.0);
        v_reff += usize::from(exact > reff_bound(kmax, effective_width(&w)) + slack);
        v_cb += usize::from(exact > redundancy_bound(kmax, balance_constant(&w), r) + slack);
    }
    report.line(
        3,
        "population bounds",
        v_reff == 0 && v_cb == 0,
        format!("violations over 10⁴ draws: κ_max/R_eff {v_reff}, c_b·κ_max/R {v_cb} (want 0, 0)"),
    );

    // 4. Estimation floor.
    let sigmas: Vec<f64> = b.inset.iter().map(|p| p.sigma0_hat).collect();
    let sigma_ok = sigmas.iter().all(|s| (4.2..=6.4).contains(s)) && (4.2..=6.4).contains(&b.sigma0_pooled);
    let reps_ok = b.inset.iter().all(|p| p.replications >= 200);
    report.line(
        4,
        "estimation floor",
        sigma_ok && reps_ok && (-0.6..=-0.4).contains(&b.inset_slope),
        format!(
            "σ0 per T {:?}, pooled {:.3} (want [4.2, 6.4]); loglog slope {:.3} (want [−0.6, −0.4])",
            sigmas.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            b.sigma0_pooled,
            b.inset_slope
        ),
    );

    // 5. Crossover.
    let v = viability_check(50, 1.5f64, 5.3, 30_000, 1.0, None);
    let crossover_ok = b.crossover_t.is_some_and(|t| (15_000..=60_000).contains(&t));
    report.line(
        5,
        "crossover",
        crossover_ok && (v.ceiling - 49.0).abs() <= 0.1,
        format!("crossover T = {:?} (want within 2× of 30000); ceiling = {:.3} (want 49.0 ± 0.1)", b.crossover_t, v.ceiling),
    );

    // 6. Purification.
    let fig1c_cfg = ExperimentConfig::default_for(ExperimentName::Fig1c);
    let (fig1c, fig1c_time) = timed(|| run_fig1c(&fig1c_cfg).unwrap());
    let c = summarize_fig1c(&fig1c_cfg, &fig1c).unwrap();
    let panel = &c.panels[0];
    let m5 = panel.points.iter().find(|p| p.m == 5).unwrap();
    let decay = panel
        .points
        .iter()
        .filter(|p| p.m >= 5)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1].oracle_population < w[0].oracle_population);
    let mut rng = stream_rng(6, 0);
    let mut eq5 = 0usize;
    for _ in 0..10_000 {
        let m = rng.random_range(1..=12);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let w = weights(random_unit(&mut rng, m));
        let kappas: Vec<f64> = (0..m).map(|_| sign * rng.random_range(0.01..8.0)).collect();
        let kmin = kappas.iter().fold(f64::INFINITY, |a, k| a.min(k.abs()));
        let val = population_projection_kurtosis(&w, &kappas).unwrap().abs();
        eq5 += usize::from(val < kmin / m as f64 - 1e-12);
    }
    let gain = m5.oracle_gain;
    let ok6 = (0.015..=0.05).contains(&panel.baseline_mean_abs_kappa)
        && (0.33..=0.53).contains(&m5.oracle_mean_abs_kappa)
        && (m5.sample_mean_abs_kappa - m5.oracle_mean_abs_kappa).abs() <= 0.08
        && gain >= 8.0
        && eq5 == 0
        && decay
        && fig1c_time <= Duration::from_secs(120);
    report.line(
        6,
        "purification",
        ok6,
        format!(
            "baseline {:.4} (want [0.015, 0.05]); oracle m=5 {:.4} (want [0.33, 0.53], population {:.4}); sample {:.4} (want within 0.08); gain {:.1}× (want ≥ 8); κ_min/m violations {eq5} (want 0); oracle decreasing for m ≥ 5: {decay}; runtime {:.1}s",
            panel.baseline_mean_abs_kappa,
            m5.oracle_mean_abs_kappa,
            m5.oracle_population,
            m5.sample_mean_abs_kappa,
            gain,
            fig1c_time.as_secs_f64()
        ),
    );

    // 7. Conditioning trend.
    let fig1a_cfg = ExperimentConfig::default_for(ExperimentName::Fig1a);
    let (fig1a, fig1a_time) = timed(|| run_fig1a(&fig1a_cfg).unwrap());
    let a = summarize_fig1a(&fig1a_cfg, &fig1a).unwrap();
    report.line(
        7,
        "conditioning trend",
        a.ratio_largest_to_smallest >= 1.5 && a.fit.r_squared >= 0.5 && fig1a_time <= Duration::from_secs(180),
        format!(
            "mean err {:.4} → {:.4}, ratio {:.2} (want ≥ 1.5); linear R² {:.3} (want ≥ 0.5); runtime {:.1}s",
            a.points.first().unwrap().mean_err,
            a.points.last().unwrap().mean_err,
            a.ratio_largest_to_smallest,
            a.fit.r_squared,
            fig1a_time.as_secs_f64()
        ),
    );

    // 8. Oracle equivalences.
    let mut rng = stream_rng(8, 0);
    let mut worst_err = 0.0f64;
    for i in 0..100 {
        let k = 1 + i % 6;
        let w = Array2::from_shape_fn((k, k), |_| rng.sample::<f64, _>(StandardNormal));
        let a = Array2::from_shape_fn((k, k), |_| rng.sample::<f64, _>(StandardNormal));
        let fast = unmixing_error(w.view(), a.view()).unwrap();
        let brute = brute_force_unmixing_error(&w.dot(&a));
        worst_err = worst_err.max((fast - brute).abs() / brute.max(1.0));
    }
    let mut worst_p = 0.0f64;
    for i in 0..100 {
        let n = 1 + i % 10;
        let mut mags: Vec<f64> = (1..=n).map(|j| j as f64 + rng.random_range(0.0..0.9)).collect();
        mags.shuffle(&mut rng);
        let d: Vec<f64> = mags.into_iter().map(|m| if rng.random::<bool>() { m } else { -m }).collect();
        let p = wilcoxon_signed_rank_one_sided(&d, &vec![0.0; n]).unwrap().p_value;
        worst_p = worst_p.max((p - brute_force_wilcoxon(&d)).abs());
    }
    report.line(
        8,
        "oracle equivalences",
        worst_err <= 1e-12 && worst_p == 0.0,
        format!("max |assignment − brute force| = {worst_err:.1e} (want ≤ 1e-12); max |exact p − 2ⁿ enumeration| = {worst_p:.1e} (want 0)"),
    );

    // 9. Block balance.
    let probe = block_balance_probe(50, 10_000, 9).unwrap();
    report.line(
        9,
        "block balance",
        probe.fraction_within_log_bound >= 0.95,
        format!("fraction with max w² ≤ 4 ln R / R at R = 50: {:.4} (want ≥ 0.95)", probe.fraction_within_log_bound),
    );

    // 10. Synthetic G comparison.
    let g_cfg = ExperimentConfig::default_for(ExperimentName::ModelOrderG);
    let g_records = run_model_order_g(&g_cfg).unwrap();
    let g = summarize_model_order_g(&g_cfg, &g_records).unwrap();
    let cmp = &g.comparisons[0];
    let p = cmp.test.as_ref().map_or(1.0, |t| t.p_value);
    report.line(
        10,
        "synthetic G comparison",
        p < 0.01 && cmp.subjects == 40 && (cmp.width_low, cmp.width_high) == (10, 50),
        format!(
            "n = {}, widths {} vs {}, mean G {:.4} vs {:.4}, one-sided p = {p:.2e} (want < 0.01)",
            cmp.subjects, cmp.width_low, cmp.width_high, cmp.mean_g_low, cmp.mean_g_high
        ),
    );

    // 11. Determinism across repeats and thread counts.
    let reference = [
        ("fig1a", records_to_csv(&fig1a).unwrap()),
        ("fig1b", records_to_csv(&fig1b).unwrap()),
        ("fig1c", records_to_csv(&fig1c).unwrap()),
        ("model_order_G", records_to_csv(&g_records).unwrap()),
    ];
    let mut mismatches = Vec::new();
    for (name, csv) in &reference {
        for threads in [1, 2] {
            let again = match *name {
                "fig1a" => csv_under(threads, || run_fig1a(&fig1a_cfg).unwrap()),
                "fig1b" if threads == 1 => continue,
                "fig1b" => csv_under(threads, || run_fig1b(&fig1b_cfg).unwrap()),
                "fig1c" => csv_under(threads, || run_fig1c(&fig1c_cfg).unwrap()),
                _ => csv_under(threads, || run_model_order_g(&g_cfg).unwrap()),
            };
            if &again != csv {
                mismatches.push(format!("{name}@{threads}"));
            }
        }
    }
    report.line(
        11,
        "determinism",
        mismatches.is_empty(),
        format!("full-size reruns at 1 and 2 threads (fig1b at 2) byte-identical; mismatches: {mismatches:?}"),
    );

    if report.failures > 0 {
        println!("{} acceptance criteria failed", report.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
