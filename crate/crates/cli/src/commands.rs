use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use delsub::bounds::{bounds_csv_row, normalized_gap, BOUNDS_CSV_HEADER};
use delsub::channel::{ChannelParams, FixedCountParams};
use delsub::experiments::{
    random_codebook, run_concentration_check, run_decode_experiment, verify_decomposition,
    ConcentrationConfig, DecodeTrialConfig,
};
use delsub::oracles::{
    verify_guesser, verify_lemma2, verify_lemma_collision, verify_ts_bad, LemmaReport,
    REPORT_CSV_HEADER,
};
use delsub::Error;

use crate::config::{
    BoundsArgs, BoundsFile, Common, ConcentrationArgs, ConcentrationFile, DecodeArgs, DecodeFile,
    DecomposeArgs, DecomposeFile, VerifyArgs, VerifyFile,
};
use crate::{CliError, Outcome};

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn outcome(pass: bool) -> Outcome {
    if pass {
        Outcome::Clean
    } else {
        Outcome::Violation
    }
}

fn sorted_grid<T: Copy + PartialOrd>(name: &str, values: Vec<T>) -> Result<Vec<T>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config(format!("empty {name} grid")));
    }
    let mut v = values;
    v.sort_by(|a, b| a.partial_cmp(b).expect("validated: no NaN"));
    v.dedup_by(|a, b| a == b);
    Ok(v)
}

pub fn bounds(common: &Common, args: &BoundsArgs, file: &BoundsFile) -> Result<Outcome, CliError> {
    let pick = |flag: &Option<Vec<f64>>, file: &Option<Vec<f64>>, default: &[f64]| {
        flag.clone().or_else(|| file.clone()).unwrap_or_else(|| default.to_vec())
    };
    let pds = pick(&args.pd, &file.pd, &[0.1, 0.01, 0.001]);
    let pss = pick(&args.ps, &file.ps, &[0.1, 0.01, 0.001]);
    let deltas = pick(&args.delta, &file.delta, &[0.5]);
    let ns = args
        .n
        .clone()
        .or_else(|| file.n.clone())
        .unwrap_or_else(|| vec![10_000, 100_000, 1_000_000, 10_000_000]);
    for &p in pds.iter().chain(&pss) {
        if p.is_nan() || !(0.0..1.0).contains(&p) {
            return Err(CliError::Config(format!("probability {p} outside [0, 1)")));
        }
    }
    for &d in &deltas {
        if d.is_nan() || !(d > 0.0 && d < 1.0) {
            return Err(CliError::Config(format!("delta {d} outside (0, 1)")));
        }
    }
    let pds = sorted_grid("pd", pds)?;
    let pss = sorted_grid("ps", pss)?;
    let ns = sorted_grid("n", ns)?;
    let deltas = sorted_grid("delta", deltas)?;

    let mut points = Vec::new();
    for &pd in &pds {
        for &ps in &pss {
            let params = ChannelParams::new(pd, ps).map_err(|e| CliError::Config(e.to_string()))?;
            for &n in &ns {
                for &delta in &deltas {
                    points.push((params, n, delta));
                }
            }
        }
    }
    let cfg = common.bounds;
    let rows: Vec<String> = points
        .par_iter()
        .map(|(params, n, delta)| {
            let point = normalized_gap(*n, params, *delta, &cfg);
            bounds_csv_row(*n, params.p_d(), params.p_s(), *delta, &point)
        })
        .collect();
    let mut text = String::from(BOUNDS_CSV_HEADER);
    text.push('\n');
    for r in rows {
        text += &r;
        text.push('\n');
    }
    emit(common.out.as_deref(), &text)?;
    Ok(Outcome::Clean)
}

enum VerifyRow {
    Report(LemmaReport),
    Refused {
        lemma: &'static str,
        fc: FixedCountParams,
        reason: String,
    },
}

impl VerifyRow {
    fn csv(&self) -> String {
        match self {
            VerifyRow::Report(r) => {
                format!("{},{}", r.csv_row(), if r.passed() { "pass" } else { "fail" })
            }
            VerifyRow::Refused { lemma, fc, reason } => format!(
                "{lemma},{},{},{},,,0,0,,refused: {}",
                fc.n,
                fc.q_d,
                fc.q_s,
                reason.replace(',', ";")
            ),
        }
    }
}

fn collect_rows(
    lemma: &'static str,
    fc: FixedCountParams,
    result: delsub::Result<Vec<LemmaReport>>,
    rows: &mut Vec<VerifyRow>,
) -> Result<(), CliError> {
    match result {
        Ok(reports) => rows.extend(reports.into_iter().map(VerifyRow::Report)),
        Err(e @ Error::CapExceeded { .. }) => rows.push(VerifyRow::Refused {
            lemma,
            fc,
            reason: e.to_string(),
        }),
        Err(e) => return Err(e.into()),
    }
    Ok(())
}

fn fixed_count_grid(n_min: usize, n_max: usize, qd_max: usize, qs_max: usize) -> Vec<FixedCountParams> {
    let mut grid = Vec::new();
    for n in n_min..=n_max {
        for q_d in 0..=qd_max.min(n) {
            for q_s in 0..=qs_max.min(n - q_d) {
                grid.push(FixedCountParams::new(n, q_d, q_s).expect("in range"));
            }
        }
    }
    grid
}

pub fn verify(common: &Common, args: &VerifyArgs, file: &VerifyFile) -> Result<Outcome, CliError> {
    let n_min = args.n_min.or(file.n_min).unwrap_or(1);
    let n_max = args.n_max.or(file.n_max).unwrap_or(7);
    let qd_max = args.qd_max.or(file.qd_max).unwrap_or(2);
    let qs_max = args.qs_max.or(file.qs_max).unwrap_or(2);
    let t_max = args.t_max.or(file.t_max).unwrap_or(4);
    let s_max = args.s_max.or(file.s_max).unwrap_or(2);
    let ts_n_max = args.ts_n_max.or(file.ts_n_max).unwrap_or(8);
    let ts_qs_max = args.ts_qs_max.or(file.ts_qs_max).unwrap_or(1);
    let ts_s_max = args.ts_s_max.or(file.ts_s_max).unwrap_or(1);
    let codebooks = args.codebooks.or(file.codebooks).unwrap_or(50);
    let samples = args.collision_samples.or(file.collision_samples);
    let shift = args.lemma2_bound_shift.unwrap_or(0);

    let grid = fixed_count_grid(n_min, n_max, qd_max, qs_max);
    let ts_grid = fixed_count_grid(n_min, ts_n_max, qd_max, ts_qs_max);
    if grid.is_empty() || ts_grid.is_empty() {
        return Err(CliError::Config(format!(
            "empty verification grid (n from {n_min} to {n_max}, (t,s)-bad n up to {ts_n_max})"
        )));
    }
    let caps = common.caps;
    let mut rows = Vec::new();
    for fc in &grid {
        let r = verify_lemma_collision(fc, samples, common.seed, &caps).map(|r| vec![r]);
        collect_rows("collision", *fc, r, &mut rows)?;
    }
    for fc in &grid {
        collect_rows("confusable", *fc, verify_lemma2(fc, t_max, s_max, shift, &caps), &mut rows)?;
    }
    for fc in &ts_grid {
        collect_rows("ts_bad", *fc, verify_ts_bad(fc, t_max, ts_s_max, &caps), &mut rows)?;
    }
    let ns: Vec<usize> = (n_min.max(1)..=n_max).collect();
    for i in 0..codebooks {
        let n = ns[i % ns.len()];
        let size = [2u64, 4, 8][(i / ns.len()) % 3].min(1 << n);
        let q_d = i % (qd_max.min(n) + 1);
        let q_s = (i / 3) % (qs_max.min(n - q_d) + 1);
        let fc = FixedCountParams::new(n, q_d, q_s)?;
        let book = random_codebook(n, size, common.seed.wrapping_add(i as u64))?;
        collect_rows("guesser", fc, verify_guesser(&book, &fc, &caps).map(|r| vec![r]), &mut rows)?;
    }

    let mut text = format!("{REPORT_CSV_HEADER},status\n");
    let (mut violations, mut refused) = (0, 0);
    for row in &rows {
        text += &row.csv();
        text.push('\n');
        match row {
            VerifyRow::Report(r) if !r.passed() => {
                violations += 1;
                eprintln!("{}", r.text_line());
            }
            VerifyRow::Refused { .. } => refused += 1,
            _ => {}
        }
    }
    emit(common.out.as_deref(), &text)?;
    eprintln!(
        "verify: {} checks, {violations} with violations, {refused} refused by caps",
        rows.len()
    );
    Ok(outcome(violations == 0))
}

pub fn decode(common: &Common, args: &DecodeArgs, file: &DecodeFile) -> Result<Outcome, CliError> {
    let n = args.n.or(file.n).unwrap_or(12);
    let q_d = args.qd.or(file.qd).unwrap_or(1);
    let q_s = args.qs.or(file.qs).unwrap_or(1);
    let size = args.codebook_size.or(file.codebook_size).unwrap_or(16);
    let trials = args.trials.or(file.trials).unwrap_or(100_000);
    let fc = FixedCountParams::new(n, q_d, q_s)?;
    let mut cfg = DecodeTrialConfig::new(fc, size, trials, common.seed);
    cfg.decode_cap = common.decode_cap;
    cfg.t_variant = common.bounds.t_variant;
    let report = run_decode_experiment(&cfg, &common.caps)?;
    if let Some(path) = args.trials_out.as_ref().or(file.trials_out.as_ref()) {
        std::fs::write(path, report.trial_csv())?;
    }
    emit(common.out.as_deref(), &report.summary_csv())?;
    eprintln!(
        "decode: {} / {} trials decoded; {} ambiguous",
        report.successes, trials, report.ambiguous
    );
    if let Some(g) = &report.guesser {
        eprintln!(
            "decode: paired guesser {:.6} vs ceiling {:.6} ({})",
            g.empirical,
            g.bound.to_f64(),
            if g.pass { "ok" } else { "exceeded" }
        );
    }
    Ok(outcome(report.pass))
}

pub fn concentration(
    common: &Common,
    args: &ConcentrationArgs,
    file: &ConcentrationFile,
) -> Result<Outcome, CliError> {
    let cfg = ConcentrationConfig {
        n: args.n.or(file.n).unwrap_or(1000),
        p: args.p.or(file.p).unwrap_or(0.1),
        trials: args.trials.or(file.trials).unwrap_or(100_000),
        delta: args.delta.or(file.delta).unwrap_or(0.5),
        seed: common.seed,
        log_base: common.bounds.log_base,
    };
    let report = run_concentration_check(&cfg)?;
    for w in &report.warnings {
        eprintln!("concentration: warning: {w}");
    }
    emit(common.out.as_deref(), &report.csv())?;
    Ok(outcome(report.pass()))
}

pub fn decompose(common: &Common, args: &DecomposeArgs, file: &DecomposeFile) -> Result<Outcome, CliError> {
    let n = args.n.or(file.n).unwrap_or(6);
    let params = ChannelParams::new(
        args.pd.or(file.pd).unwrap_or(0.3),
        args.ps.or(file.ps).unwrap_or(0.2),
    )?;
    let trials = args.trials.or(file.trials).unwrap_or(100_000);
    let report = verify_decomposition(n, &params, trials, common.seed)?;
    emit(common.out.as_deref(), &report.csv())?;
    Ok(outcome(report.pass()))
}
