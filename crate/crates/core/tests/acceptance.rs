//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Run with
//! `cargo test -p crowdlabel-core --test acceptance`.

mod common;

use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crowdlabel::analysis::stats::{gamma_q, normal_two_sided, t_two_sided};
use crowdlabel::analysis::{auc, mann_whitney_u, mean_sem, paired_t_test, pearson_r, CurvePoint, PValueMethod};
use crowdlabel::consensus::{build_leave_one_out_references, majority_label, write_consensus_csv, ExpertPanel};
use crowdlabel::contest::{write_leaderboard_csv, ContestSpec, MemoryLog, NullLog, Platform, PlatformConfig};
use crowdlabel::ingest::{partition_by_patient, select_and_exclude};
use crowdlabel::simulator::{paper_fixture_manifest, run_experiment, ExperimentConfig};
use crowdlabel::{ClassLabel, Clip, ClipRole, VoteCounts};

// Tolerances and thresholds, pinned.
const ORACLE_TOL: f64 = 1e-6;
const REPORTED_TOL: f64 = 0.001; // three decimals
const TIE_CHI2_MIN_P: f64 = 0.001;
const SEEDS: u64 = 20;
const WISDOM_MIN_SEEDS: usize = 18;
const FULL_GAP_RANGE: (f64, f64) = (-0.03, 0.10);
const CURVE_SIGMAS: f64 = 3.0;
const CURVE_PLATEAU_K: usize = 9;
const CURVE_PLATEAU_TOL: f64 = 0.02;
const LEARNING_BLOCK: usize = 10;
const LEARNING_LAST_INDEX: usize = 100;
const LEARNING_PLATEAU_FROM: usize = 75;
const LEARNING_PLATEAU_TOL: f64 = 0.02;
const ASYMPTOTE_RANGE: (f64, f64) = (0.75, 0.85);
const EXPERT_BAND: f64 = 0.03;
const MIN_AUC: f64 = 0.90;
const DISCRETE_LOWEST_MIN_SEEDS: usize = 15;
const MIN_AGREEMENT_R: f64 = 0.4;
const STRATIFIED_MIN_SEEDS: usize = 18;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() {
    let mut failed = Vec::new();
    let mut report = |name: &str, budget: Option<Duration>, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut o = run();
        let took = start.elapsed();
        if let Some(b) = budget {
            if took > b {
                o.pass = false;
                o.detail.push_str(&format!("; over runtime budget {:.0}s", b.as_secs_f64()));
            }
        }
        println!("{} {name} ({:.1}s): {}", if o.pass { "PASS" } else { "FAIL" }, took.as_secs_f64(), o.detail);
        if !o.pass {
            failed.push(name.to_string());
        }
    };

    report("consensus-oracle", Some(Duration::from_secs(10)), &mut consensus_oracle);
    report("leave-one-out", Some(Duration::from_secs(10)), &mut leave_one_out);
    report("statistics-oracles", Some(Duration::from_secs(5)), &mut statistics_oracles);

    let start = Instant::now();
    let ensemble: Vec<SeedRun> = (0..SEEDS).map(SeedRun::new).collect();
    let slowest = ensemble.iter().map(|s| s.elapsed).max().unwrap_or_default();
    println!(
        "     simulated {SEEDS} seeds in {:.1}s (slowest {:.1}s), mean eligible opinions per test clip {:.1}",
        start.elapsed().as_secs_f64(),
        slowest.as_secs_f64(),
        ensemble.iter().map(|s| s.eligible_per_clip).sum::<f64>() / ensemble.len() as f64,
    );
    let sim_budget = |per_seed: u64| {
        move |o: Outcome| {
            if slowest > Duration::from_secs(per_seed) {
                outcome(false, format!("{}; slowest seed {:.1}s over {per_seed}s", o.detail, slowest.as_secs_f64()))
            } else {
                o
            }
        }
    };

    report("wisdom-of-crowds", None, &mut || sim_budget(60)(wisdom(&ensemble)));
    report("opinions-needed-curve", None, &mut || sim_budget(120)(opinion_curve(&ensemble)));
    report("learning-curves", None, &mut || learning(&ensemble));
    report("roc-shape", None, &mut || roc(&ensemble));
    report("agreement-correlation", None, &mut || agreement(&ensemble));
    report("service-integrity", Some(Duration::from_secs(30)), &mut service_integrity);
    report("ingest-determinism", None, &mut ingest_determinism);

    if failed.is_empty() {
        println!("all acceptance criteria passed");
    } else {
        println!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}

fn label(i: usize) -> ClassLabel {
    ClassLabel::from_rank(i).expect("rank 0..3")
}

fn brute_modal(votes: &[ClassLabel]) -> Vec<ClassLabel> {
    let mut tally = [0u32; 3];
    for v in votes {
        for (i, t) in tally.iter_mut().enumerate() {
            if label(i) == *v {
                *t += 1;
            }
        }
    }
    let top = *tally.iter().max().unwrap();
    (0..3).filter(|&i| top > 0 && tally[i] == top).map(label).collect()
}

fn chi_square_uniform(observed: &[u64]) -> f64 {
    let n: u64 = observed.iter().sum();
    let expected = n as f64 / observed.len() as f64;
    let stat: f64 = observed.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let df = (observed.len() - 1) as f64;
    gamma_q(df / 2.0, stat / 2.0)
}

fn consensus_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=10);
        let votes: Vec<ClassLabel> = (0..n).map(|_| label(rng.gen_range(0..3))).collect();
        let counts: VoteCounts = votes.iter().copied().collect();
        let oracle = brute_modal(&votes);
        let got = majority_label(&counts, &mut rng).expect("non-empty");
        let ok = if oracle.len() == 1 { got == oracle[0] } else { oracle.contains(&got) };
        mismatches += usize::from(!ok);
    }
    if majority_label(&VoteCounts::default(), &mut rng).is_ok() {
        mismatches += 1;
    }

    let mut tied = 0;
    let mut min_p = 1.0f64;
    let mut out_of_set = 0;
    while tied < 200 {
        let n = rng.gen_range(2..=10);
        let votes: Vec<ClassLabel> = (0..n).map(|_| label(rng.gen_range(0..3))).collect();
        let oracle = brute_modal(&votes);
        if oracle.len() < 2 {
            continue;
        }
        let counts: VoteCounts = votes.iter().copied().collect();
        let mut draws = ChaCha8Rng::seed_from_u64(1000 + tied);
        let mut freq = vec![0u64; oracle.len()];
        for _ in 0..10_000 {
            let got = majority_label(&counts, &mut draws).unwrap();
            match oracle.iter().position(|c| *c == got) {
                Some(i) => freq[i] += 1,
                None => out_of_set += 1,
            }
        }
        min_p = min_p.min(chi_square_uniform(&freq));
        tied += 1;
    }
    outcome(
        mismatches == 0 && out_of_set == 0 && min_p > TIE_CHI2_MIN_P,
        format!("1000 multisets, {mismatches} mismatches; 200 ties, min chi-square p {min_p:.4}, {out_of_set} draws outside the tie"),
    )
}

fn leave_one_out() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x100);
    let experts: Vec<String> = (1..=6).map(|i| format!("e{i}")).collect();
    let clips: Vec<String> = (0..50).map(|i| format!("clip-{i:02}")).collect();
    let (mut variant, mut wrong) = (0usize, 0usize);
    for panel_no in 0..500u64 {
        let mut panel = ExpertPanel::new(experts.clone());
        for c in &clips {
            for e in &experts {
                panel.insert(c, e, label(rng.gen_range(0..3)));
            }
        }
        let seed = panel_no;
        let refs = build_leave_one_out_references(&panel, seed).unwrap();
        for (i, skip) in experts.iter().enumerate() {
            for c in &clips {
                let votes: Vec<ClassLabel> = experts
                    .iter()
                    .filter(|e| *e != skip)
                    .map(|e| panel.opinions[c][e])
                    .collect();
                if !brute_modal(&votes).contains(&refs[i].labels[c]) {
                    wrong += 1;
                }
            }
            let mut mutated = panel.clone();
            for c in &clips {
                mutated.insert(c, skip, label(rng.gen_range(0..3)));
            }
            let again = build_leave_one_out_references(&mutated, seed).unwrap();
            variant += usize::from(again[i].labels != refs[i].labels);
        }
    }
    outcome(
        variant == 0 && wrong == 0,
        format!("500 panels x 6 experts x 50 clips: {variant} references changed under mutation, {wrong} labels differ from the 5-vote majority"),
    )
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn statistics_oracles() -> Outcome {
    let mut bad = Vec::new();
    for (d, t, p, df) in common::PAIRED_T {
        let r = paired_t_test(d).unwrap();
        if !(close(r.t, *t, ORACLE_TOL) && close(r.p, *p, ORACLE_TOL) && r.df == *df) {
            bad.push(format!("paired t {d:?}"));
        }
    }
    for (a, b, u, p) in common::MANN_WHITNEY_EXACT {
        let r = mann_whitney_u(a, b).unwrap();
        if !(r.method == PValueMethod::Exact && close(r.u, *u, ORACLE_TOL) && close(r.p, *p, ORACLE_TOL)) {
            bad.push(format!("mann-whitney {a:?}"));
        }
    }
    let large = mann_whitney_u(&common::MW_LARGE_A, &common::MW_LARGE_B).unwrap();
    let (ta, tb) = common::mw_ties();
    let ties = mann_whitney_u(&ta, &tb).unwrap();
    if !(close(large.u, common::MW_LARGE.0, ORACLE_TOL) && close(large.p, common::MW_LARGE.1, ORACLE_TOL)) {
        bad.push("mann-whitney normal approximation".into());
    }
    if !(close(ties.u, common::MW_TIES.0, ORACLE_TOL) && close(ties.p, common::MW_TIES.1, ORACLE_TOL)) {
        bad.push("mann-whitney tied normal approximation".into());
    }
    for (x, y, r, p) in common::PEARSON {
        let c = pearson_r(x, y).unwrap();
        if !(close(c.r, *r, ORACLE_TOL) && close(c.p, *p, ORACLE_TOL)) {
            bad.push(format!("pearson {x:?}"));
        }
    }
    for (s, f, a) in common::AUC {
        if !close(auc(s, &common::flags(f)).unwrap(), *a, ORACLE_TOL) {
            bad.push(format!("auc {s:?}"));
        }
    }
    for (v, m, s) in common::MEAN_SEM {
        let (mean, sem) = mean_sem(v).unwrap();
        if !(close(mean, *m, ORACLE_TOL) && close(sem.unwrap(), *s, ORACLE_TOL)) {
            bad.push(format!("mean_sem {v:?}"));
        }
    }
    for (t, df, p) in common::T_TAIL {
        if !close(t_two_sided(*t, *df), *p, ORACLE_TOL) {
            bad.push(format!("t tail {t} {df}"));
        }
    }
    for (z, p) in common::NORMAL_TAIL {
        if !close(normal_two_sided(*z), *p, ORACLE_TOL) {
            bad.push(format!("normal tail {z}"));
        }
    }
    let (mean, sem) = mean_sem(&common::EXPERT_SIX).unwrap();
    let sem = sem.unwrap();
    let (rm, rs) = common::EXPERT_SIX_REPORTED;
    if !(close(mean, rm, REPORTED_TOL) && close(sem, rs, REPORTED_TOL)) {
        bad.push("six expert concordances".into());
    }
    outcome(
        bad.is_empty(),
        format!(
            "t, Mann-Whitney, Pearson, AUC, mean_sem and tail fixtures within {ORACLE_TOL:e}; six experts {mean:.4} +/- {sem:.4} vs reported {rm:.3} +/- {rs:.3}{}",
            if bad.is_empty() { String::new() } else { format!("; mismatches: {}", bad.join(", ")) }
        ),
    )
}

struct SeedRun {
    elapsed: Duration,
    eligible_per_clip: f64,
    crowd_full: f64,
    crowd_loo: f64,
    expert_full: f64,
    expert_loo: f64,
    auc: [f64; 3],
    r: f64,
    stratified: Option<f64>,
    curve: Vec<CurvePoint>,
    crowd_learning: Vec<f64>,
    expert_learning: Vec<f64>,
    asymptote: f64,
}

impl SeedRun {
    fn new(seed: u64) -> SeedRun {
        let start = Instant::now();
        let out = run_experiment(&ExperimentConfig::paper_profile(), seed).expect("simulation runs");
        let r = &out.report;
        let means = |c: &crowdlabel::analysis::LearningCurve| c.points.iter().map(|p| p.mean).collect::<Vec<_>>();
        SeedRun {
            elapsed: start.elapsed(),
            eligible_per_clip: r.descriptives.mean_eligible_per_test_clip,
            crowd_full: r.crowd_vs_full.overall,
            crowd_loo: r.crowd_vs_leave_one_out.overall,
            expert_full: r.expert_mean_vs_full.overall,
            expert_loo: r.expert_mean_vs_leave_one_out.overall,
            auc: ClassLabel::ALL.map(|c| r.auc(c).unwrap_or(f64::NAN)),
            r: r.agreement_correlation.map(|c| c.r).unwrap_or(f64::NAN),
            stratified: r.stratified.concordance,
            curve: r.opinion_curve.points.clone(),
            crowd_learning: means(&r.learning.all_crowd),
            expert_learning: means(&r.learning.experts),
            asymptote: out.crowd_asymptote(LEARNING_PLATEAU_FROM).unwrap_or(f64::NAN),
        }
    }
}

fn wisdom(runs: &[SeedRun]) -> Outcome {
    let loo_wins = runs.iter().filter(|s| s.crowd_loo > s.expert_loo).count();
    let gaps: Vec<f64> = runs.iter().map(|s| s.crowd_full - s.expert_full).collect();
    let in_band = gaps.iter().filter(|g| (FULL_GAP_RANGE.0..=FULL_GAP_RANGE.1).contains(*g)).count();
    let mean = |f: fn(&SeedRun) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;
    outcome(
        loo_wins >= WISDOM_MIN_SEEDS && in_band >= WISDOM_MIN_SEEDS,
        format!(
            "crowd beats experts vs leave-one-out in {loo_wins}/{} seeds ({:.3} vs {:.3}); crowd vs full within [-3, +10] pts of experts in {in_band}/{} seeds ({:.3} vs {:.3})",
            runs.len(),
            mean(|s| s.crowd_loo),
            mean(|s| s.expert_loo),
            runs.len(),
            mean(|s| s.crowd_full),
            mean(|s| s.expert_full),
        ),
    )
}

/// Largest drop of a later point below an earlier one, in units of their
/// combined Monte Carlo standard error.
fn worst_drop(curve: &[CurvePoint]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (i, a) in curve.iter().enumerate() {
        for b in &curve[i + 1..] {
            let se = (a.sem.powi(2) + b.sem.powi(2)).sqrt();
            let drop = a.accuracy - b.accuracy;
            if drop > 0.0 {
                worst = worst.max(if se > 0.0 { drop / se } else { f64::INFINITY });
            }
        }
    }
    worst.max(0.0)
}

/// The monotonicity check runs on the ensemble mean curve over the k range
/// every seed covers; its Monte Carlo standard error combines the seeds'.
fn opinion_curve(runs: &[SeedRun]) -> Outcome {
    let common_k = runs.iter().map(|s| s.curve.len()).min().unwrap_or(0);
    let n = runs.len() as f64;
    let ensemble: Vec<CurvePoint> = (0..common_k)
        .map(|i| CurvePoint {
            k: i + 1,
            accuracy: runs.iter().map(|s| s.curve[i].accuracy).sum::<f64>() / n,
            sem: runs.iter().map(|s| s.curve[i].sem.powi(2)).sum::<f64>().sqrt() / n,
        })
        .collect();
    let drop = worst_drop(&ensemble);
    let per_seed = runs.iter().filter(|s| worst_drop(&s.curve) <= CURVE_SIGMAS).count();

    let mut plateau = 0;
    let mut widest = 0.0f64;
    for s in runs {
        let last = s.curve.last().expect("curve has points");
        let Some(at_k) = s.curve.iter().find(|p| p.k == CURVE_PLATEAU_K) else { continue };
        let gap = last.accuracy - at_k.accuracy;
        widest = widest.max(gap);
        plateau += usize::from(gap <= CURVE_PLATEAU_TOL);
    }
    let seeds = runs.len();
    outcome(
        drop <= CURVE_SIGMAS && plateau == seeds,
        format!(
            "ensemble curve over k = 1..{common_k} non-decreasing within {CURVE_SIGMAS} sigma (worst drop {drop:.2} sigma; {per_seed}/{seeds} seeds individually); k = {CURVE_PLATEAU_K} within {:.0} pts of k_max in {plateau}/{seeds} seeds (largest shortfall {:.1} pts)",
            CURVE_PLATEAU_TOL * 100.0,
            widest * 100.0
        ),
    )
}

/// Ensemble mean of per-seed curves at 1-based indices 1..=last.
fn ensemble_curve(curves: &[&Vec<f64>], last: usize) -> Vec<f64> {
    (0..last)
        .map(|i| {
            let v: Vec<f64> = curves.iter().filter_map(|c| c.get(i).copied()).collect();
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect()
}

fn learning(runs: &[SeedRun]) -> Outcome {
    let crowd = ensemble_curve(&runs.iter().map(|s| &s.crowd_learning).collect::<Vec<_>>(), LEARNING_LAST_INDEX);
    // rising phase up to the plateau, judged on block means
    let blocks: Vec<f64> = crowd[..LEARNING_PLATEAU_FROM]
        .chunks(LEARNING_BLOCK)
        .map(|b| b.iter().sum::<f64>() / b.len() as f64)
        .collect();
    let rising = blocks.windows(2).all(|w| w[1] >= w[0]);
    let tail = &crowd[LEARNING_PLATEAU_FROM - 1..];
    let plateau = tail.iter().sum::<f64>() / tail.len() as f64;
    let asymptote = runs.iter().map(|s| s.asymptote).sum::<f64>() / runs.len() as f64;
    let plateau_ok = (plateau - asymptote).abs() <= LEARNING_PLATEAU_TOL
        && (ASYMPTOTE_RANGE.0..=ASYMPTOTE_RANGE.1).contains(&asymptote);

    let expert_len = runs.iter().map(|s| s.expert_learning.len()).min().unwrap_or(0);
    let experts = ensemble_curve(&runs.iter().map(|s| &s.expert_learning).collect::<Vec<_>>(), expert_len);
    let window = ExperimentConfig::paper_profile().analysis.window;
    let full = &experts[window - 1..];
    let expert_mean = full.iter().sum::<f64>() / full.len() as f64;
    let expert_dev = full.iter().map(|v| (v - expert_mean).abs()).fold(0.0, f64::max);
    let early_dev = experts[..window - 1].iter().map(|v| (v - expert_mean).abs()).fold(0.0, f64::max);

    outcome(
        rising && plateau_ok && expert_dev <= EXPERT_BAND,
        format!(
            "crowd block means {}; plateau {plateau:.3} vs asymptote {asymptote:.3}; experts mean {expert_mean:.3}, max deviation {:.1} pts from index {window} ({:.1} pts before)",
            blocks.iter().map(|b| format!("{b:.3}")).collect::<Vec<_>>().join(" "),
            expert_dev * 100.0,
            early_dev * 100.0
        ),
    )
}

fn roc(runs: &[SeedRun]) -> Outcome {
    let n = runs.len() as f64;
    let means: Vec<f64> = (0..3).map(|c| runs.iter().map(|s| s.auc[c]).sum::<f64>() / n).collect();
    let lowest = runs.iter().filter(|s| s.auc[1] < s.auc[0] && s.auc[1] < s.auc[2]).count();
    let all_above = runs.iter().filter(|s| s.auc.iter().all(|a| *a >= MIN_AUC)).count();
    outcome(
        means.iter().all(|m| *m >= MIN_AUC) && lowest >= DISCRETE_LOWEST_MIN_SEEDS,
        format!(
            "mean AUC no/discrete/confluent {:.3}/{:.3}/{:.3} (all three >= {MIN_AUC} in {all_above}/{} seeds); discrete lowest in {lowest}/{} seeds",
            means[0],
            means[1],
            means[2],
            runs.len(),
            runs.len()
        ),
    )
}

fn agreement(runs: &[SeedRun]) -> Outcome {
    let rs: Vec<f64> = runs.iter().map(|s| s.r).collect();
    let mean_r = rs.iter().sum::<f64>() / rs.len() as f64;
    let above = rs.iter().filter(|r| **r > MIN_AGREEMENT_R).count();
    let strat = runs
        .iter()
        .filter(|s| s.stratified.is_some_and(|c| c > s.crowd_full))
        .count();
    outcome(
        mean_r > MIN_AGREEMENT_R && strat >= STRATIFIED_MIN_SEEDS,
        format!(
            "mean r {mean_r:.3} (> {MIN_AGREEMENT_R} in {above}/{} seeds, min {:.3}); stratified concordance above overall in {strat}/{} seeds",
            rs.len(),
            rs.iter().copied().fold(f64::INFINITY, f64::min),
            runs.len()
        ),
    )
}

fn service_clips() -> Vec<Clip> {
    let mut clips = Vec::new();
    for i in 0..60 {
        let (role, reference) = match i % 3 {
            0 => (ClipRole::Training, Some(label((i / 3) % 3))),
            1 => (ClipRole::Test, Some(label((i / 3) % 3))),
            _ => (ClipRole::Unlabeled, None),
        };
        clips.push(Clip {
            clip_id: format!("clip-{i:03}"),
            patient_id: format!("p-{}", i / 4),
            role,
            reference_label: reference,
            excluded: false,
            frame_rate_hz: 30.0,
            media_uri: format!("media/clip-{i:03}.mp4"),
        });
    }
    clips
}

fn exports(platform: &Platform, contest: &str) -> (Vec<u8>, Vec<u8>) {
    let mut consensus = Vec::new();
    write_consensus_csv(&platform.consensus_snapshot(contest).unwrap(), &mut consensus).unwrap();
    let mut board = Vec::new();
    write_leaderboard_csv(&platform.leaderboard(contest).unwrap(), &mut board).unwrap();
    (consensus, board)
}

fn service_integrity() -> Outcome {
    let log = MemoryLog::new();
    let platform = Arc::new(
        Platform::new(PlatformConfig::default(), Box::new(log.clone()))
            .with_clock(Platform::ticking_clock(chrono::DateTime::UNIX_EPOCH)),
    );
    let clips = service_clips();
    platform.register_clips(clips.clone());
    let contest = platform
        .create_contest(ContestSpec {
            pool: clips.iter().map(|c| c.clip_id.clone()).collect(),
            policy: Default::default(),
            prize_pool_cents: 10_000,
            seed: 7,
        })
        .unwrap();

    let handles: Vec<_> = (0..100)
        .map(|u| {
            let platform = Arc::clone(&platform);
            let contest = contest.clone();
            thread::spawn(move || {
                let user = format!("user-{u:03}");
                let mut rng = ChaCha8Rng::seed_from_u64(u);
                let mut accepted = 0u64;
                for _ in 0..50 {
                    let served = platform.next_clip(&contest, &user).unwrap();
                    let l = label(rng.gen_range(0..3));
                    if platform.submit_opinion(&contest, &user, &served.clip_id, l).is_ok() {
                        accepted += 1;
                    }
                }
                accepted
            })
        })
        .collect();
    let accepted: u64 = handles.into_iter().map(|h| h.join().unwrap()).sum();

    let entries = log.entries();
    let raw: u64 = platform
        .consensus_snapshot(&contest)
        .unwrap()
        .iter()
        .map(|s| u64::from(s.raw_counts.total()))
        .sum();
    let ids_ok = entries.windows(2).all(|w| w[1].opinion_id == w[0].opinion_id + 1);
    let before = exports(&platform, &contest);
    let replayed = Platform::replay(
        &platform.setup(),
        PlatformConfig::default(),
        log.to_json_lines().as_bytes(),
        Box::new(NullLog),
    )
    .unwrap();
    let after = exports(&replayed, &contest);
    let same = before == after;
    outcome(
        accepted == 5000 && entries.len() == 5000 && raw == accepted && ids_ok && same,
        format!(
            "{accepted} accepted, {} log entries, raw counts sum {raw}, ids contiguous {ids_ok}, replayed exports identical {same}",
            entries.len()
        ),
    )
}

fn ingest_determinism() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in [0u64, 1, 2024] {
        let manifest = paper_fixture_manifest(seed).unwrap();
        let split = partition_by_patient(&manifest, seed).unwrap();
        let plan = select_and_exclude(&split, &manifest, 200, seed).unwrap();
        let again = select_and_exclude(&partition_by_patient(&manifest, seed).unwrap(), &manifest, 200, seed).unwrap();
        let disjoint = plan.set_a_patients.is_disjoint(&plan.set_b_patients);
        let pass = plan.set_a_patients.len() == 102
            && plan.set_b_patients.len() == 101
            && plan.training_clips.len() == 195
            && plan.test_clips.len() == 198
            && plan.excluded_clips.len() == 7
            && disjoint
            && plan == again;
        ok &= pass;
        lines.push(format!(
            "seed {seed}: {}/{} patients, {} training / {} test clips, {} excluded",
            plan.set_a_patients.len(),
            plan.set_b_patients.len(),
            plan.training_clips.len(),
            plan.test_clips.len(),
            plan.excluded_clips.len()
        ));
    }
    outcome(ok, lines.join("; "))
}
