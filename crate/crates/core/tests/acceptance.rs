//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use rand::Rng;

use delsub::bounds::{
    asymptotic_capacity_estimate, gallager_lower_bound, normalized_gap, theorem1_rhs,
    BoundsConfig, LogBase, TVariant,
};
use delsub::channel::{stream_rng, ChannelParams, FixedCountParams};
use delsub::experiments::{
    random_codebook, run_concentration_check, run_decode_experiment, verify_decomposition,
    ConcentrationConfig, DecodeTrialConfig,
};
use delsub::oracles::{
    optimal_guesser_success, verify_lemma2, verify_lemma_collision, verify_ts_bad,
    EnumerationCaps,
};
use delsub::patterns::{
    apply, enumerate_pattern_pairs, substitution_symmetric_difference, transmission_discrepancy,
    BitString,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn fixed_counts(n_max: usize, qd_max: usize, qs_max: usize) -> Vec<FixedCountParams> {
    let mut v = Vec::new();
    for n in 1..=n_max {
        for q_d in 0..=qd_max.min(n) {
            for q_s in 0..=qs_max.min(n - q_d) {
                v.push(FixedCountParams::new(n, q_d, q_s).unwrap());
            }
        }
    }
    v
}

fn binom(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Collision table over every ordered pair, plus a string-level recount at n <= 5.
fn collision_table(caps: &EnumerationCaps) -> Verdict {
    let mut pairs_checked = 0;
    for fc in fixed_counts(7, 2, 2) {
        let r = verify_lemma_collision(&fc, None, 0, caps).unwrap();
        if !r.passed() {
            return verdict(false, format!("n={} qd={} qs={}: {:?}", fc.n, fc.q_d, fc.q_s, r.violations));
        }
        pairs_checked += r.checked;
    }
    let mut recounted = 0u64;
    for fc in fixed_counts(5, 2, 2) {
        let pats: Vec<_> = enumerate_pattern_pairs(fc.n, fc.q_d, fc.q_s).unwrap().collect();
        let inputs: Vec<BitString> = (0..1u64 << fc.n).map(|w| BitString::from_word(w, fc.n)).collect();
        for a in &pats {
            for b in &pats {
                let hits = inputs
                    .iter()
                    .filter(|x| apply(x, a).unwrap() == apply(x, b).unwrap())
                    .count() as u64;
                let total = inputs.len() as u64;
                let dt = transmission_discrepancy(a.transmission(), b.transmission()).unwrap();
                let ds = substitution_symmetric_difference(a.substitution(), b.substitution()).unwrap();
                let ok = if a == b {
                    hits == total
                } else if !ds.iter().all(|j| dt.contains(j)) {
                    hits == 0
                } else {
                    hits << dt.len() <= total
                };
                if !ok {
                    return verdict(false, format!("recount: {a:?} vs {b:?}: {hits}/{total}"));
                }
                recounted += 1;
            }
        }
    }
    verdict(
        true,
        format!("{pairs_checked} ordered pairs exact; {recounted} recounted on strings"),
    )
}

fn confusable_counts(caps: &EnumerationCaps) -> Verdict {
    let mut checked = 0;
    for fc in fixed_counts(7, 2, 2) {
        for r in verify_lemma2(&fc, 4, 2, 0, caps).unwrap() {
            if !r.passed() {
                return verdict(false, r.text_line());
            }
            checked += r.checked;
        }
    }
    verdict(true, format!("{checked} (anchor, t, s) cases within bound"))
}

fn ts_bad_counts(caps: &EnumerationCaps) -> Verdict {
    let mut reports = 0;
    for fc in fixed_counts(8, 2, 1) {
        for r in verify_ts_bad(&fc, 4, 1, caps).unwrap() {
            if !r.passed() {
                return verdict(false, r.text_line());
            }
            reports += 1;
        }
    }
    verdict(true, format!("{reports} (config, t, s) counts within bound"))
}

fn guesser_ceiling(caps: &EnumerationCaps) -> Verdict {
    let mut rng = stream_rng(2024, 0);
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let n = rng.random_range(3..=7usize);
        let size = [2u64, 4, 8][rng.random_range(0..3)];
        let q_d = rng.random_range(0..=2usize);
        let q_s = rng.random_range(0..=(2usize.min(n - q_d)));
        let fc = FixedCountParams::new(n, q_d, q_s).unwrap();
        let book = random_codebook(n, size, 7000 + i).unwrap();
        let success = optimal_guesser_success(&book, &fc, caps).unwrap();
        let denom = size as u128 * binom(n, q_d) * binom(n - q_d, q_s);
        let lhs = BigUint::from(success.numerator()) * BigUint::from(denom);
        let rhs = (BigUint::from(1u32) << (n - q_d)) * BigUint::from(success.denominator());
        if lhs > rhs {
            return verdict(false, format!("codebook {i}: n={n} N={size} qd={q_d} qs={q_s} success={success}"));
        }
        let bound = (2f64).powi((n - q_d) as i32) / denom as f64;
        worst = worst.max(success.to_f64() / bound);
    }
    verdict(true, format!("50 codebooks; largest success/ceiling = {worst:.4}"))
}

fn decomposition_equality() -> Verdict {
    let mut inputs = 0;
    for (pd, ps) in [(0.3, 0.2), (0.1, 0.05)] {
        let params = ChannelParams::new(pd, ps).unwrap();
        for n in 1..=6 {
            let r = verify_decomposition(n, &params, 0, 0).unwrap();
            if r.exact_inputs != Some(1 << n) || !r.mismatched_inputs.is_empty() {
                return verdict(false, format!("n={n} ({pd},{ps}): {:?}", r.mismatched_inputs));
            }
            inputs += 1 << n;
        }
    }
    verdict(true, format!("{inputs} inputs with identical exact output laws"))
}

fn concentration() -> Verdict {
    let cfg = ConcentrationConfig {
        n: 1000,
        p: 0.1,
        trials: 100_000,
        delta: 0.5,
        seed: 17,
        log_base: LogBase::Mixed,
    };
    let r = run_concentration_check(&cfg).unwrap();
    let mu = 100.0;
    let gamma = (3.0 * (16.0f64).ln() / mu).sqrt();
    let bound = 2.0 * (-mu * gamma * gamma / 3.0).exp();
    let sigma = |b: f64| (b * (1.0 - b) / cfg.trials as f64).sqrt();
    let emp = r.tail_count as f64 / cfg.trials as f64;
    let pass = emp <= bound + 3.0 * sigma(bound) && emp <= 0.125 + 3.0 * sigma(0.125);
    verdict(
        pass && r.pass(),
        format!("empirical tail {emp:.5} vs Chernoff {bound:.5} and delta/4 = 0.125"),
    )
}

fn entropy(p: f64) -> f64 {
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

fn bound_arithmetic() -> Vec<(&'static str, Verdict)> {
    let g = gallager_lower_bound(&ChannelParams::new(0.1, 0.0).unwrap());
    let a = asymptotic_capacity_estimate(&ChannelParams::new(0.001, 0.001).unwrap());
    let p = ChannelParams::new(1e-3, 1e-3).unwrap();
    let diff = (gallager_lower_bound(&p) - asymptotic_capacity_estimate(&p)).abs();
    vec![
        ("7a gallager(0.1, 0) = 0.53100 +- 1e-4", verdict((g - 0.53100).abs() <= 1e-4, format!("got {g:.7}"))),
        (
            "7b asymptotic(0.001, 0.001) = 0.97705 +- 1e-4",
            verdict(
                (a - 0.97705).abs() <= 1e-4,
                format!("got {a:.7}; 1 - 2 H(0.001) = {:.7}", 1.0 - 2.0 * entropy(0.001)),
            ),
        ),
        ("7c |gallager - asymptotic| <= 0.01 at 1e-3", verdict(diff <= 0.01, format!("diff {diff:.3e}"))),
    ]
}

fn convergence_sweep() -> Verdict {
    let cfg = BoundsConfig::default();
    let mut ratios = Vec::new();
    let mut compared = 0;
    for p in [0.05f64, 0.02, 0.01, 0.005] {
        let params = ChannelParams::new(p, p).unwrap();
        let n = (1e3 / p).round() as u64;
        let g = normalized_gap(n, &params, 0.5, &cfg).unwrap();
        let h = 2.0 * entropy(p);
        ratios.push(g.gap / h);
        if g.rate_bound <= 1.0 {
            compared += 1;
            if g.rate_bound < g.gallager_lb {
                return verdict(false, format!("p={p}: rate bound {} below {}", g.rate_bound, g.gallager_lb));
            }
        }
    }
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.4}")).collect();
    verdict(
        decreasing,
        format!("gap/(H+H) = [{}]; {compared} points with rate bound <= 1", shown.join(", ")),
    )
}

fn decode_experiment(caps: &EnumerationCaps) -> Verdict {
    let fc = FixedCountParams::new(12, 1, 1).unwrap();
    let cfg = DecodeTrialConfig::new(fc, 16, 100_000, 31337);
    let first = run_decode_experiment(&cfg, caps).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let second = single.install(|| run_decode_experiment(&cfg, caps).unwrap());
    let same = first.summary_csv() == second.summary_csv() && first.trial_csv() == second.trial_csv();
    let rhs = theorem1_rhs(12, 1, 1, first.ci_lo, TVariant::Proof).unwrap().total_log2_n;
    verdict(
        same && 4.0 <= rhs && first.pass,
        format!(
            "delta_hat {:.5} (99% CI {:.5}..{:.5}); log2 N = 4 <= {rhs:.3}; rerun identical: {same}",
            first.delta_hat, first.ci_lo, first.ci_hi
        ),
    )
}

fn main() -> ExitCode {
    let caps = EnumerationCaps::default();
    let timed = |f: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let v = f();
        (v, start.elapsed().as_secs_f64())
    };
    let mut results: Vec<(&'static str, Verdict, f64)> = Vec::new();
    let mut push = |name, (v, secs)| results.push((name, v, secs));
    push("1 collision table, n <= 7", timed(&|| collision_table(&caps)));
    push("2 confusable counts, n <= 7, t <= 4, s <= 2", timed(&|| confusable_counts(&caps)));
    push("3 (t,s)-bad counts, n <= 8", timed(&|| ts_bad_counts(&caps)));
    push("4 optimal guesser ceiling, 50 codebooks", timed(&|| guesser_ceiling(&caps)));
    push("5 one-stage vs two-stage exact laws", timed(&decomposition_equality));
    push("6 Chernoff concentration, n = 1000, p = 0.1", timed(&concentration));
    for (name, v) in bound_arithmetic() {
        push(name, (v, 0.0));
    }
    push("8 normalized gap sweep", timed(&convergence_sweep));
    push("9 decode experiment, n = 12, N = 16", timed(&|| decode_experiment(&caps)));

    let mut failed = 0;
    for (name, v, secs) in &results {
        println!(
            "{} {name}: {} [{secs:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += !v.pass as usize;
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
