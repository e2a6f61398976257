//! End-to-end acceptance checks. Runs without the libtest harness so every
//! check prints one PASS/FAIL line; the process fails if any check fails.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tdcfdr_cli::commands::{read_scenario, simulate_rows, SimRow};
use tdcfdr_core::montecarlo::{self, Level};
use tdcfdr_core::oracle::suites::{self, SuiteReport};
use tdcfdr_core::oracle::{exact_true_fdr, AssignmentSpace, Rule};
use tdcfdr_core::{control, rank, ControlPolicy, EstimatorConfig, Identification, Origin};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_secs as f64 {
        Ok(())
    } else {
        Err(format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64()))
    }
}

fn suite_outcome(report: SuiteReport, started: Instant, limit_secs: u64) -> Outcome {
    let summary = format!(
        "spaces={} checks={} violations={} worst_margin={:e} {} [{:.1}s]",
        report.spaces,
        report.checks,
        report.violations,
        report.worst_margin,
        report.notes.last().map(String::as_str).unwrap_or(""),
        started.elapsed().as_secs_f64()
    );
    if !report.passed() {
        return Err(summary);
    }
    within(started.elapsed(), limit_secs)?;
    Ok(summary)
}

fn estimator_conservative() -> Outcome {
    let t = Instant::now();
    let report = suites::theorem1(12, 6, 1).map_err(|e| e.to_string())?;
    suite_outcome(report, t, 60)
}

fn plus_one_controls_fdr() -> Outcome {
    let t = Instant::now();
    let report = suites::theorem2(12, 6, 1).map_err(|e| e.to_string())?;
    suite_outcome(report, t, 120)
}

fn uncorrected_fails_without_correct() -> Outcome {
    let t = Instant::now();
    let scenario = read_scenario(&bundled("prop1.json")).map_err(|e| e.to_string())?;
    let m = montecarlo::run(&scenario).map_err(|e| e.to_string())?;
    let policy = ControlPolicy::tdc(0.01, EstimatorConfig::plain()).map_err(|e| e.to_string())?;
    let space = AssignmentSpace::incorrect_only(1.0, 10).map_err(|e| e.to_string())?;
    let exact = exact_true_fdr(&space, &Rule::Criterion(policy)).value;
    let summary = format!(
        "mean_fdp={:.5} se={:.5} trials={} exact(n=10)={exact:.6} [{:.1}s]",
        m.mean_fdp,
        m.se(),
        m.trials,
        t.elapsed().as_secs_f64()
    );
    if m.trials != 100_000 || m.mean_fdp < 0.5 - 3.0 * m.se() || exact < 0.5 {
        return Err(summary);
    }
    within(t.elapsed(), 30)?;
    Ok(summary)
}

fn spectrum_level_fails() -> Outcome {
    let t = Instant::now();
    let scenario = read_scenario(&bundled("spectrum_level.json")).map_err(|e| e.to_string())?;
    let m = montecarlo::run(&scenario).map_err(|e| e.to_string())?;
    let summary = format!(
        "mean_fdp={:.5} se={:.5} trials={} invariant_violations={} [{:.1}s]",
        m.mean_fdp,
        m.se(),
        m.trials,
        m.invariant_violations,
        t.elapsed().as_secs_f64()
    );
    if m.trials != 100_000 || (m.mean_fdp - 0.5).abs() > 3.0 * m.se() || m.invariant_violations != 0 {
        return Err(summary);
    }
    within(t.elapsed(), 30)?;
    Ok(summary)
}

fn half_correction_witness() -> Outcome {
    let report = suites::theorem3().map_err(|e| e.to_string())?;
    suite_outcome(report, Instant::now(), 60)
}

fn closed_forms() -> Outcome {
    let t = Instant::now();
    let report = suites::lemmas(20).map_err(|e| e.to_string())?;
    suite_outcome(report, t, 120)
}

fn martingale() -> Outcome {
    let t = Instant::now();
    let report = suites::martingale(10).map_err(|e| e.to_string())?;
    if report.worst_margin < 0.0 {
        return Err(format!("deviation above tolerance: {report:?}"));
    }
    suite_outcome(report, t, 120)
}

fn find<'a>(rows: &'a [SimRow], n: usize, criterion: &str, level: Level) -> &'a SimRow {
    rows.iter()
        .find(|r| r.n_correct == n && r.criterion == criterion && r.level == level)
        .expect("sweep row present")
}

/// Largest and mean excess of spectrum-level `+1` FDR over alpha.
fn spectrum_excess(rows: &[SimRow], alpha: f64) -> (f64, f64) {
    let excess: Vec<f64> = rows
        .iter()
        .filter(|r| r.criterion == "tdc_c1" && r.level == Level::Spectrum)
        .map(|r| r.measurement.mean_fdp - alpha)
        .collect();
    let max = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (max, excess.iter().sum::<f64>() / excess.len() as f64)
}

fn sweep_shape() -> Outcome {
    let t = Instant::now();
    let mut failures = Vec::new();
    let mut excess = Vec::new();
    let mut facts = Vec::new();
    for file in ["fig2_sweep_low_redundancy.json", "fig2_sweep.json"] {
        let scenario = read_scenario(&bundled(file)).map_err(|e| e.to_string())?;
        let alpha = scenario.policy.alpha();
        let rows = simulate_rows(&scenario).map_err(|e| e.to_string())?;
        let mean = scenario.redundancy.mean();
        if rows.iter().any(|r| r.measurement.trials != 100_000) {
            failures.push(format!("{mean}: not 1e5 trials per point"));
        }
        let zero = find(&rows, 0, "tdc_c0", Level::Peptide).measurement;
        facts.push(format!("mean {mean}: c0@0={:.4}", zero.mean_fdp));
        if !(zero.mean_fdp > alpha && zero.mean_fdp >= 0.4) {
            failures.push(format!("(a) {mean}: c=0 FDR at 0 correct is {}", zero.mean_fdp));
        }
        let values = scenario.sweep_n_correct.clone().unwrap_or_default();
        for &n in &values {
            let m = find(&rows, n, "tdc_c1", Level::Peptide).measurement;
            if m.mean_fdp >= alpha + 3.0 * m.se() {
                failures.push(format!("(b) {mean}: c=1 FDR {} at n_correct={n}", m.mean_fdp));
            }
            if n >= 2000 {
                let c0 = find(&rows, n, "tdc_c0", Level::Peptide).measurement.mean_fdp;
                if (c0 - m.mean_fdp).abs() >= 0.01 {
                    failures.push(format!("(c) {mean}: |{c0} - {}| at n_correct={n}", m.mean_fdp));
                }
            }
        }
        let (max, avg) = spectrum_excess(&rows, alpha);
        facts.push(format!("spectrum excess max={max:.5} mean={avg:.5}"));
        excess.push((max, avg));
    }
    if !(excess[1].0 > excess[0].0 && excess[1].1 > excess[0].1) {
        failures.push("(d) spectrum-level excess does not grow with redundancy".to_string());
    }
    if let Err(e) = within(t.elapsed(), 600) {
        failures.push(e);
    }
    let summary = format!("{} [{:.1}s]", facts.join("; "), t.elapsed().as_secs_f64());
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; {}", failures.join("; ")))
    }
}

fn random_list(rng: &mut ChaCha8Rng) -> Vec<Identification> {
    let n_tar = rng.random_range(1..=150usize);
    let n_dec = rng.random_range(0..n_tar);
    let levels = rng.random_range(2..=60u32);
    let correct_share = rng.random_range(0.0..1.0);
    (0..n_tar + n_dec)
        .map(|i| {
            let origin = if i < n_tar { Origin::Target } else { Origin::Decoy };
            // some targets score like correct identifications, above the noise
            let lift = if origin == Origin::Target && rng.random_bool(correct_share) {
                levels / 2
            } else {
                0
            };
            let score = (rng.random_range(0..levels) + lift) as f64;
            Identification::new(format!("s{i}"), format!("p{i}"), score, origin)
        })
        .collect()
}

fn bh_subset_of_plus_one() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut exceptions, mut nonempty) = (0, 0);
    for k in 0..1000 {
        let list = rank(random_list(&mut rng)).map_err(|e| e.to_string())?;
        let alpha = [0.01, 0.05, 0.1, 0.2, 0.5][k % 5];
        let bh = control(&list, &ControlPolicy::bh(alpha).map_err(|e| e.to_string())?);
        let tdc = control(
            &list,
            &ControlPolicy::tdc(alpha, EstimatorConfig::plus_one()).map_err(|e| e.to_string())?,
        );
        let kept: HashSet<&str> = tdc.retained.iter().map(|i| i.spectrum_id.as_str()).collect();
        if !bh.retained.is_empty() {
            nonempty += 1;
        }
        if bh.retained.iter().any(|i| !kept.contains(i.spectrum_id.as_str())) {
            exceptions += 1;
        }
    }
    let summary = format!("profiles=1000 bh_nonempty={nonempty} exceptions={exceptions}");
    if exceptions == 0 && nonempty >= 100 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn simulate_cli(scenario: &Path, out: &Path, threads: u32) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_tdcfdr"))
        .args(["simulate", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(["--threads", &threads.to_string()])
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("simulate exited with {status}"));
    }
    std::fs::read(out).map_err(|e| e.to_string())
}

fn simulate_deterministic() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = dir.path().join("scenario.json");
    std::fs::write(
        &scenario,
        r#"{"id": "det", "n_correct": 0, "n_incorrect_peptides": 60,
            "redundancy": {"empirical": {"mean": 1.837}},
            "score_model": {"correct_shifted": {"separation": 0.5}},
            "policy": {"alpha": 0.05, "cfg": {"r": 1.0, "c": 1.0}},
            "trials": 20000, "seed": 99, "sweep_n_correct": [0, 30, 300]}"#,
    )
    .map_err(|e| e.to_string())?;
    let out = dir.path().join("out.tsv");
    let mut runs = Vec::new();
    for threads in [1, 1, 1, 4] {
        runs.push(simulate_cli(&scenario, &out, threads)?);
    }
    let identical = runs.windows(2).all(|w| w[0] == w[1]);
    let summary = format!("runs=4 (threads 1,1,1,4) bytes={} identical={identical}", runs[0].len());
    if identical {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn control_scenario_bounded() -> Outcome {
    let scenario = read_scenario(&bundled("control.json")).map_err(|e| e.to_string())?;
    let m = montecarlo::run(&scenario).map_err(|e| e.to_string())?;
    let summary = format!(
        "mean_fdp={:.5} se={:.5} invariant_violations={}",
        m.mean_fdp,
        m.se(),
        m.invariant_violations
    );
    if m.mean_fdp < scenario.policy.alpha() + 3.0 * m.se() && m.invariant_violations == 0 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn main() {
    let checks: [Check; 11] = [
        (
            "1 estimator is conservative (exhaustive, n<=12)",
            estimator_conservative,
        ),
        (
            "2 +1 criterion controls the FDR (exhaustive, n<=12)",
            plus_one_controls_fdr,
        ),
        (
            "3 c=0 fails with no correct identifications",
            uncorrected_fails_without_correct,
        ),
        ("4 spectrum-level filtering fails with redundancy", spectrum_level_fails),
        ("5 c=0.5 counter-example breaks control", half_correction_witness),
        ("6 closed forms for E[T1] and conditional T1", closed_forms),
        ("7 martingale identity", martingale),
        ("8 synthetic sweep shape", sweep_shape),
        ("9 BH retained set within +1 retained set", bh_subset_of_plus_one),
        (
            "10 simulate is deterministic across runs and threads",
            simulate_deterministic,
        ),
        ("   control scenario stays below alpha", control_scenario_bounded),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
