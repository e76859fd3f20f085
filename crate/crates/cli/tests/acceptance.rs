//! Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Campaign-sized criteria drive the `ada` binary the same
//! way a user would.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ada_core::fixtures::ferry_model;
use ada_core::identification::{derive_clause_stubs, CausalFactorRecord, StubSection};
use ada_core::sbt::campaign::SampleOrigin;
use ada_core::sbt::CampaignReport;
use ada_core::sim::ScenarioParams;

use support::{ac5, props};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn model_path() -> String {
    fixture("ferry.json").to_string_lossy().into_owned()
}

/// Run `ada` and return (stdout, elapsed); an unexpected exit code is an error.
fn ada(args: &[&str]) -> Result<(String, Duration), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_ada"))
        .args(args)
        .env("ADA_NO_COLOR", "1")
        .env_remove("ADA_LOG")
        .output()
        .map_err(|e| format!("cannot run ada: {e}"))?;
    let elapsed = start.elapsed();
    if !out.status.success() {
        return Err(format!(
            "ada {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok((String::from_utf8_lossy(&out.stdout).into_owned(), elapsed))
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

fn load_campaign(dir: &Path) -> Result<CampaignReport, String> {
    let text = std::fs::read_to_string(dir.join("campaign.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).expect("readable output dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_path_buf();
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let (x, y) = (snapshot(a), snapshot(b));
    if x.keys().ne(y.keys()) {
        return Err(format!("{} and {} hold different file sets", a.display(), b.display()));
    }
    for (k, v) in &x {
        if y[k] != *v {
            return Err(format!("{} differs between runs", k.display()));
        }
    }
    Ok(x.len())
}

fn ac1(_: &Path) -> Outcome {
    let (out, elapsed) = ada(&["check", &model_path()])?;
    let mut edges = BTreeSet::new();
    let mut promoted = BTreeSet::new();
    for line in out.lines() {
        let mut words = line.split_whitespace();
        match (words.next(), words.next(), words.next(), words.next()) {
            (Some("discharge"), Some(a), Some("->"), Some(g)) => {
                edges.insert((a.to_string(), g.to_string()));
            }
            (Some("promote"), Some(a), Some("->"), Some(g)) => {
                promoted.insert((a.to_string(), g.to_string()));
            }
            _ => {}
        }
    }
    let want: BTreeSet<_> = [
        ("MPCS.A1", "FerryResp.G1"),
        ("MPCS.A2", "SITAW.G1"),
        ("MPCS.A3", "SITAW.G2"),
        ("MPCS.A4", "DP.G1"),
        ("DP.A1", "MPCS.G2"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    if edges != want {
        return Err(format!("edges {edges:?}"));
    }
    if promoted.len() != 1 || !promoted.iter().any(|(a, _)| a == "SITAW.A1") {
        return Err(format!("promotions {promoted:?}"));
    }
    if !out.contains("PASS") {
        return Err("check did not pass".into());
    }
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("5 edges exact, SITAW.A1 promoted, {:.3} s", elapsed.as_secs_f64()))
}

fn lhs_stratified(report: &CampaignReport) -> Result<(), String> {
    let lhs: Vec<_> = report.samples.iter().filter(|s| s.origin == SampleOrigin::Lhs).collect();
    let n = lhs.len();
    for j in 0..report.space.dim() {
        let mut hit = vec![false; n];
        for s in &lhs {
            let k = ((s.unit[j] * n as f64).floor() as usize).min(n - 1);
            if std::mem::replace(&mut hit[k], true) {
                return Err(format!("dimension {j}: stratum {k} hit twice"));
            }
        }
    }
    Ok(())
}

fn ac2(tmp: &Path) -> Outcome {
    let out = tmp.join("ac2");
    let (_, elapsed) = ada(&["campaign", "--model", &model_path(), "--n", "1000", "--seed", "42", "--out", p(&out)])?;
    let r = load_campaign(&out)?;
    let d_min = 50.0;
    let min_sep = r.min_separation_m.ok_or("no non-vacuous scenario")?;
    lhs_stratified(&r)?;
    let summary = format!(
        "{} scenarios, {} falsified, {} vacuous, min separation {min_sep:.2} m, coverage {:.3}, {:.0} s",
        r.counts.total,
        r.counts.falsified,
        r.counts.vacuous,
        r.coverage,
        elapsed.as_secs_f64()
    );
    if r.counts.falsified != 0 || min_sep < d_min || elapsed >= Duration::from_secs(300) {
        return Err(summary);
    }
    Ok(summary)
}

fn ac3(tmp: &Path) -> Outcome {
    let out = tmp.join("ac3");
    let args = ["--model", &model_path(), "--mutant", "--seed", "42"];
    ada(&[&["campaign"][..], &args, &["--n", "500", "--rounds", "3", "--k", "10", "--out", p(&out)]].concat())?;
    let r = load_campaign(&out)?;
    if r.counts.falsified == 0 {
        return Err(format!("mutant not falsified: {:?}", r.counts));
    }
    let shrunk = r.shrunk.first().ok_or("no shrunk counterexample")?;
    for (u, o) in shrunk.unit.iter().zip(&shrunk.original_unit) {
        if (u - 0.5).abs() > (o - 0.5).abs() + 1e-12 {
            return Err(format!("{}: shrinking moved away from the midpoint", shrunk.scenario_id));
        }
    }
    // replay the saved counterexample through the CLI
    let file = out.join("falsified").join(format!("{}.json", shrunk.scenario_id));
    let saved: ScenarioParams = serde_json::from_str(&std::fs::read_to_string(&file).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if saved != shrunk.params {
        return Err("saved counterexample differs from the report".into());
    }
    let replay = tmp.join("ac3-replay");
    ada(&["simulate", "--model", &model_path(), "--scenario", p(&file), "--out", p(&replay)])?;
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(replay.join("verdict.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    if verdict["classification"]["class"] != "falsified" {
        return Err(format!("replay of {} classified {}", shrunk.scenario_id, verdict["classification"]));
    }

    // refinement against a plain LHS design of the same total size
    let refined: Vec<_> = r
        .verdicts
        .iter()
        .zip(&r.samples)
        .filter(|(v, s)| v.classification.is_falsified() && matches!(s.origin, SampleOrigin::Refine { .. }))
        .map(|(_, s)| s.unit.clone())
        .collect();
    let plain_out = tmp.join("ac3-plain");
    let total = r.counts.total.to_string();
    ada(&[&["campaign"][..], &args, &["--n", &total, "--rounds", "0", "--out", p(&plain_out)]].concat())?;
    let plain = load_campaign(&plain_out)?;
    let plain_points: BTreeSet<Vec<u64>> = plain
        .samples
        .iter()
        .map(|s| s.unit.iter().map(|u| u.to_bits()).collect())
        .collect();
    let missed = refined
        .iter()
        .filter(|u| !plain_points.contains(&u.iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
        .count();
    if missed == 0 {
        return Err("refinement found no falsification beyond the plain design".into());
    }
    Ok(format!(
        "{} / {} falsified (min separation {:.2} m); refinement adds {missed} falsified points absent from a plain {}-point design ({} falsified); shrunk {} replays as falsified",
        r.counts.falsified,
        r.counts.total,
        r.min_separation_m.unwrap_or(f64::NAN),
        plain.counts.total,
        plain.counts.falsified,
        shrunk.scenario_id
    ))
}

fn ac4(tmp: &Path) -> Outcome {
    let mut parts = Vec::new();
    for (name, extra) in [("maneuvers", vec!["--maneuvers"]), ("noise x3", vec!["--noise", "3"])] {
        let out = tmp.join(format!("ac4-{}", parts.len()));
        let mut args = vec!["campaign", "--model", &*Box::leak(model_path().into_boxed_str()), "--n", "200", "--seed", "42"];
        args.extend(extra);
        args.extend(["--out", p(&out)]);
        ada(&args)?;
        let r = load_campaign(&out)?;
        let frac = r.counts.vacuous as f64 / r.counts.total as f64;
        let line = format!("{name}: {}/{} vacuous, {} falsified", r.counts.vacuous, r.counts.total, r.counts.falsified);
        if r.counts.falsified != 0 || frac < 0.95 {
            return Err(line);
        }
        parts.push(line);
    }
    Ok(parts.join("; "))
}

fn ac5(_: &Path) -> Outcome {
    let parts = [
        ac5::check_cpa(100, 501)?,
        ac5::check_mpcs(50, 502)?,
        ac5::check_monitors(100, 503)?,
        ac5::check_dp()?,
        ac5::check_sitaw(100_000, 504)?,
    ];
    Ok(parts.join("; "))
}

fn ac6(tmp: &Path) -> Outcome {
    let model = model_path();
    let run = |tag: &str, jobs: &str| -> Result<PathBuf, String> {
        let base = tmp.join(format!("ac6-{tag}"));
        let camp = base.join("campaign");
        ada(&[
            "campaign", "--model", &model, "--n", "40", "--rounds", "2", "--k", "4", "--seed", "9", "--jobs", jobs,
            "--keep-traces", "--mutant", "--out", p(&camp),
        ])?;
        ada(&["simulate", "--model", &model, "--seed", "9", "--out", p(&base.join("simulate"))])?;
        ada(&[
            "report",
            "--model",
            &model,
            "--campaign",
            p(&camp.join("campaign.json")),
            "--out",
            p(&base.join("report")),
        ])?;
        Ok(base)
    };
    let a = run("a", "1")?;
    let b = run("b", "1")?;
    let c = run("c", "8")?;
    let files = same_files(&a, &b)?;
    same_files(&a, &c)?;
    Ok(format!("{files} files byte-identical across repeats and --jobs 1 vs --jobs 8"))
}

fn ac7(_: &Path) -> Outcome {
    let cases = 10_000;
    let laws = props::check_entailment_laws(cases)?;
    let lhs = props::check_lhs_stratification(cases)?;
    let mono = props::check_mpcs_monotone_in_accuracy(cases)?;

    let model = ferry_model();
    let expected: [(u8, Vec<(&str, StubSection, Option<&str>)>); 4] = [
        (1, vec![("MPCS", StubSection::Assumptions, Some("config_valid"))]),
        (2, vec![("MPCS", StubSection::SubIdentification, None)]),
        (
            3,
            vec![
                ("MPCS", StubSection::Assumptions, Some("state_error_bound")),
                ("SITAW", StubSection::Guarantees, Some("state_error_bound")),
            ],
        ),
        (
            4,
            vec![
                ("MPCS", StubSection::Assumptions, Some("tracking_bound")),
                ("DP", StubSection::Guarantees, Some("tracking_bound")),
                ("DP", StubSection::SubIdentification, None),
            ],
        ),
    ];
    for (rs, want) in expected {
        let cf = CausalFactorRecord {
            id: format!("CF-rs{rs}"),
            unsafe_control_action: "keeps speed".into(),
            scenario: "acceptance".into(),
            rs_type: rs,
            target_decision: "MPCS".into(),
            realized_by: Vec::new(),
        };
        let got: Vec<_> = derive_clause_stubs(&cf, &model)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|s| (s.component, s.section, s.predicate_variant))
            .collect();
        let want: Vec<_> = want
            .into_iter()
            .map(|(c, s, v)| (c.to_string(), s, v.map(str::to_string)))
            .collect();
        if got != want {
            return Err(format!("RS{rs}: {got:?}"));
        }
    }
    Ok(format!("{laws}; {lhs}; {mono}; RS1..RS4 stub mapping exact"))
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: [(&str, fn(&Path) -> Outcome); 7] = [
        ("AC-1", ac1),
        ("AC-2", ac2),
        ("AC-3", ac3),
        ("AC-4", ac4),
        ("AC-5", ac5),
        ("AC-6", ac6),
        ("AC-7", ac7),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC-")).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        let start = Instant::now();
        match check(tmp.path()) {
            Ok(msg) => println!("{name} PASS {msg} [{:.1} s]", start.elapsed().as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("{name} FAIL {msg} [{:.1} s]", start.elapsed().as_secs_f64());
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
