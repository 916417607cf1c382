//! Release gate: one PASS/FAIL line per acceptance criterion.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use polinfer::analytics::SensitivityRow;
use polinfer::document::{canonical_json, parse_json, pretty_json, ModelDocument, ScenarioDocument};
use polinfer::inference::{enumeration_oracle, posterior_marginal, Evidence};
use polinfer::intervention::{apply_hard_do, apply_prior_do, compose, Intervention, Scenario};
use polinfer::network::DiscreteNetwork;
use polinfer::pollinator::{
    self, default_utility, published_scenarios, BUNDLED_MODEL_JSON, ENVIRONMENT, HONEYBEE, OTHER_BEES,
    OTHER_POLLINATORS, PUBLISHED_UTILITIES,
};
use polinfer::temporal::{
    evaluate_scenario, run_scenario, slice_marginals, slice_sensitivity, steady_state_check, unroll, TwoSliceDbn,
    UtilityTimeline,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> Outcome>);
/// `(variable, state, published probability)`.
type Target = (&'static str, &'static str, f64);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scenario_files() -> Vec<(String, PathBuf)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    published_scenarios()
        .into_iter()
        .map(|s| {
            let file = if s.name == "baseline" {
                "baseline.json".into()
            } else {
                format!("scenario{}.json", s.name)
            };
            (s.name, dir.join(file))
        })
        .collect()
}

fn timeline(name: &str) -> UtilityTimeline {
    let model = pollinator::bundled_model().unwrap();
    let s = published_scenarios().into_iter().find(|s| s.name == name).unwrap();
    run_scenario(&model.dbn, &s, 10, model.utility().unwrap()).unwrap()
}

fn all_marginals(net: &DiscreteNetwork) -> Vec<Vec<f64>> {
    let e = Evidence::new();
    net.variables()
        .iter()
        .map(|v| posterior_marginal(net, v.name(), &e).unwrap().distribution)
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut queries = 0;
    for seed in 0..200u64 {
        let net = common::random_network(seed, 12, 2);
        let mut r = common::rng(seed ^ 0x5eed);
        let observed = r.gen_range(0..net.len());
        let v = net.variable(observed);
        let evidences = [
            Evidence::new(),
            Evidence::new().with(v.name(), v.states()[r.gen_range(0..2)].clone()),
        ];
        for e in &evidences {
            for var in net.variables() {
                let ve = posterior_marginal(&net, var.name(), e).map_err(|e| e.to_string())?;
                let en = enumeration_oracle(&net, var.name(), e).map_err(|e| e.to_string())?;
                worst = worst.max(max_diff(&ve.distribution, &en.distribution));
                queries += 1;
            }
        }
    }
    let t = start.elapsed();
    check(
        worst <= 1e-10 && t < Duration::from_secs(60),
        format!(
            "200 networks, {queries} marginals, max |VE - enumeration| = {worst:.1e} (tol 1e-10), {:.1} s (limit 60 s)",
            t.as_secs_f64()
        ),
    )
}

fn utility_arithmetic() -> Outcome {
    // First-slice Good probabilities for the three abundance groups.
    let rows = [
        ("baseline", [0.158, 0.282, 0.299], 24.63),
        ("1a", [0.186, 0.352, 0.368], 30.20),
        ("1b", [0.186, 0.352, 0.368], 30.20),
        ("1c", [0.186, 0.352, 0.368], 30.20),
        ("2", [0.17, 0.312, 0.328], 27.00),
        ("3", [0.393, 0.283, 0.299], 32.50),
        ("4", [0.443, 0.353, 0.368], 38.80),
        ("5", [0.149, 0.275, 0.291], 23.83),
    ];
    let spec = default_utility();
    let mut worst = 0.0f64;
    for (_, good, expected) in rows {
        worst = worst.max((spec.score(&good) - expected).abs());
    }
    check(
        worst <= 0.01,
        format!("8 rows, max |computed - published| = {worst:.4} (tol 0.01)"),
    )
}

fn calibration_fidelity() -> Outcome {
    let targets: [(&str, &[Target]); 6] = [
        (
            "baseline",
            &[
                (ENVIRONMENT, "Supportive", 0.32),
                (HONEYBEE, "Good", 0.158),
                (OTHER_BEES, "Good", 0.282),
                (OTHER_POLLINATORS, "Good", 0.299),
            ],
        ),
        (
            "1a",
            &[
                (ENVIRONMENT, "Supportive", 0.493),
                (HONEYBEE, "Good", 0.186),
                (OTHER_BEES, "Good", 0.352),
                (OTHER_POLLINATORS, "Good", 0.368),
            ],
        ),
        (
            "2",
            &[
                (ENVIRONMENT, "Supportive", 0.393),
                (HONEYBEE, "Good", 0.17),
                (OTHER_BEES, "Good", 0.312),
                (OTHER_POLLINATORS, "Good", 0.328),
            ],
        ),
        ("3", &[(HONEYBEE, "Good", 0.393)]),
        (
            "4",
            &[
                (HONEYBEE, "Good", 0.443),
                (OTHER_BEES, "Good", 0.353),
                (OTHER_POLLINATORS, "Good", 0.368),
            ],
        ),
        (
            "5",
            &[
                (HONEYBEE, "Good", 0.149),
                (OTHER_BEES, "Good", 0.275),
                (OTHER_POLLINATORS, "Good", 0.291),
            ],
        ),
    ];
    let model = pollinator::bundled_model().unwrap();
    let mut worst = (0.0f64, String::new());
    let mut count = 0;
    for (name, checks) in targets {
        let s = published_scenarios().into_iter().find(|s| s.name == name).unwrap();
        let run = evaluate_scenario(&model.dbn, &s, 10, model.utility().unwrap()).map_err(|e| e.to_string())?;
        for &(var, state, published) in checks {
            let id = model.dbn.id(var).unwrap();
            let p = run.marginals[0][id].probability(state).unwrap();
            let pp = (p - published).abs() * 100.0;
            count += 1;
            if pp >= worst.0 {
                worst = (
                    pp,
                    format!("{name} {var}={state} {:.2}% vs {:.1}%", 100.0 * p, 100.0 * published),
                );
            }
        }
    }
    check(
        worst.0 <= 0.5,
        format!(
            "{count} slice-1 marginals, max miss {:.3} pp at {} (tol 0.5 pp)",
            worst.0, worst.1
        ),
    )
}

fn golden_table(suite_start: Instant) -> Outcome {
    let mut worst = (0.0f64, String::new());
    for (name, published) in PUBLISHED_UTILITIES {
        let u = timeline(name).utilities();
        for (t, (a, b)) in u.iter().zip(published).enumerate() {
            let d = (a - b).abs();
            if d >= worst.0 {
                worst = (d, format!("{name} t{} {a:.2} vs {b:.2}", t + 1));
            }
        }
    }
    let t = suite_start.elapsed();
    check(
        worst.0 <= 0.25 && t < Duration::from_secs(120),
        format!(
            "80 cells, max miss {:.3} at {} (tol 0.25); suite so far {:.1} s (limit 120 s)",
            worst.0,
            worst.1,
            t.as_secs_f64()
        ),
    )
}

/// MI, percent of entropy and S² of `target` against every other node,
/// by brute-force enumeration of the full joint.
fn oracle_sensitivity(net: &DiscreteNetwork, targets: &[usize]) -> Vec<Vec<(usize, [f64; 3])>> {
    let n = net.len();
    let cards = net.cardinalities();
    let mut pairs: Vec<Vec<Vec<f64>>> = targets
        .iter()
        .map(|&x| (0..n).map(|y| vec![0.0; cards[x] * cards[y]]).collect())
        .collect();
    let mut a = vec![0usize; n];
    'all: loop {
        let p = net.joint_probability(&a);
        for (ti, &x) in targets.iter().enumerate() {
            for y in 0..n {
                pairs[ti][y][a[x] * cards[y] + a[y]] += p;
            }
        }
        for i in 0..n {
            a[i] += 1;
            if a[i] < cards[i] {
                continue 'all;
            }
            a[i] = 0;
        }
        break;
    }
    targets
        .iter()
        .enumerate()
        .map(|(ti, &x)| {
            (0..n)
                .filter(|&y| y != x)
                .map(|y| {
                    let (nx, ny) = (cards[x], cards[y]);
                    let j = &pairs[ti][y];
                    let px: Vec<f64> = (0..nx).map(|i| (0..ny).map(|k| j[i * ny + k]).sum()).collect();
                    let py: Vec<f64> = (0..ny).map(|k| (0..nx).map(|i| j[i * ny + k]).sum()).collect();
                    let (mut mi, mut s2) = (0.0, 0.0);
                    for i in 0..nx {
                        for k in 0..ny {
                            let pxy = j[i * ny + k];
                            if pxy > 0.0 {
                                mi += pxy * (pxy / (px[i] * py[k])).log2();
                                s2 += pxy * (pxy / py[k] - px[i]).powi(2);
                            }
                        }
                    }
                    let hx: f64 = px.iter().filter(|&&p| p > 0.0).map(|p| -p * p.log2()).sum();
                    (y, [mi, 100.0 * mi / hx, s2])
                })
                .collect()
        })
        .collect()
}

fn sensitivity() -> Outcome {
    let model = pollinator::bundled_model().unwrap();
    let unrolled = unroll(&model.dbn, 2).unwrap();
    let net = unrolled.net();
    let names = [HONEYBEE, OTHER_BEES, OTHER_POLLINATORS];
    let target_ids: Vec<usize> = names.iter().map(|v| unrolled.id(v, 2).unwrap()).collect();
    let oracle = oracle_sensitivity(net, &target_ids);

    let mut worst = 0.0f64;
    let mut reports = Vec::new();
    for (name, expected) in names.iter().zip(&oracle) {
        let report = slice_sensitivity(&model.dbn, name, 2, usize::MAX).map_err(|e| e.to_string())?;
        for &(y, [mi, pct, s2]) in expected {
            let row = report
                .rows
                .iter()
                .find(|r| r.source == net.variable(y).name())
                .ok_or("missing candidate")?;
            worst = worst
                .max((row.mutual_information - mi).abs())
                .max((row.percent_of_entropy - pct).abs())
                .max((row.variance_of_belief - s2).abs());
        }
        reports.push(report.rows);
    }
    let top = |rows: &[SensitivityRow], k: usize| rows.iter().take(k).map(|r| r.source.clone()).collect::<Vec<_>>();
    let honeybee_top = top(&reports[0], 2);
    let ranking_ok = honeybee_top == ["DiseasePestPressure[2]", "Environment[2]"]
        && top(&reports[1], 1) == ["Environment[2]"]
        && top(&reports[2], 1) == ["Environment[2]"];
    let first = &reports[0][0];
    let rel = [
        (first.mutual_information, 0.06487),
        (first.percent_of_entropy, 10.5),
        (first.variance_of_belief, 0.0140673),
    ]
    .map(|(a, b)| (a - b).abs() / b);
    let rel_worst = rel.iter().cloned().fold(0.0, f64::max);
    check(
        worst <= 1e-9 && ranking_ok && rel_worst <= 0.15,
        format!(
            "engine vs oracle max diff {worst:.1e} (tol 1e-9); honeybee top-2 {honeybee_top:?}, other groups led by {} / {}; \
             row 1 = {:.5} bits, {:.2}%, {:.7} (max rel. miss {:.1}%, tol 15%)",
            reports[1][0].source,
            reports[2][0].source,
            first.mutual_information,
            first.percent_of_entropy,
            first.variance_of_belief,
            100.0 * rel_worst
        ),
    )
}

fn dbn_marginals(dbn: &TwoSliceDbn, scenario: &Scenario, horizon: usize) -> Vec<Vec<Vec<f64>>> {
    let unrolled = compose(scenario, &unroll(dbn, horizon).unwrap(), dbn).unwrap();
    let names: Vec<String> = unrolled.base_variables().to_vec();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    slice_marginals(&unrolled, &names)
        .unwrap()
        .into_iter()
        .map(|slice| slice.into_iter().map(|m| m.distribution).collect())
        .collect()
}

fn flat(m: &[Vec<Vec<f64>>]) -> Vec<f64> {
    m.iter().flatten().flatten().copied().collect()
}

fn intervention_semantics() -> Outcome {
    const CASES: u64 = 100;
    let mut worst = [0.0f64; 4];
    for seed in 0..CASES {
        let net = common::random_network(seed, 8, 3);
        let mut r = common::rng(seed ^ 0xd0);
        let base = all_marginals(&net);

        // Ancestors of the manipulated node keep their marginals.
        let x = r.gen_range(0..net.len());
        let xv = net.variable(x);
        let done = apply_hard_do(&net, xv.name(), &xv.states()[0]).unwrap();
        let after = all_marginals(&done);
        let anc = net.ancestors(&[x]);
        for (i, is_anc) in anc.iter().enumerate() {
            if *is_anc && i != x {
                worst[0] = worst[0].max(max_diff(&base[i], &after[i]));
            }
        }

        // A point-mass prior on a root is the same manipulation.
        let root = (0..net.len()).find(|&i| net.is_root(i)).unwrap();
        let rv = net.variable(root);
        let mut point = vec![0.0; rv.cardinality()];
        point[0] = 1.0;
        let hard = all_marginals(&apply_hard_do(&net, rv.name(), &rv.states()[0]).unwrap());
        let soft = all_marginals(&apply_prior_do(&net, rv.name(), &point).unwrap());
        for (a, b) in hard.iter().zip(&soft) {
            worst[1] = worst[1].max(max_diff(a, b));
        }

        // Window locality and commutation on a random DBN.
        let dbn = common::random_dbn(seed, 5);
        let horizon = 5;
        let from = r.gen_range(2..=horizon);
        let a = r.gen_range(0..dbn.len());
        let b = (a + 1 + r.gen_range(0..dbn.len() - 1)) % dbn.len();
        let va = dbn.initial().variable(a).clone();
        let vb = dbn.initial().variable(b).clone();
        let fix_a = Intervention::fix(va.name(), &va.states()[1], from, horizon);
        let fix_b = Intervention::fix(vb.name(), &vb.states()[0], 1, r.gen_range(1..=horizon));
        let baseline = dbn_marginals(&dbn, &Scenario::new("baseline", vec![]), horizon);
        let windowed = dbn_marginals(&dbn, &Scenario::new("a", vec![fix_a.clone()]), horizon);
        worst[2] = worst[2].max(max_diff(&flat(&baseline[..from - 1]), &flat(&windowed[..from - 1])));
        let ab = dbn_marginals(&dbn, &Scenario::new("ab", vec![fix_a.clone(), fix_b.clone()]), horizon);
        let ba = dbn_marginals(&dbn, &Scenario::new("ba", vec![fix_b, fix_a]), horizon);
        worst[3] = worst[3].max(max_diff(&flat(&ab), &flat(&ba)));
    }
    check(
        worst.iter().all(|&w| w <= 1e-12),
        format!(
            "{CASES} cases each; max diff: ancestors {:.1e}, point prior vs fix {:.1e}, pre-window {:.1e}, commuted {:.1e} (tol 1e-12)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn scenario_dynamics() -> Outcome {
    // Successive changes below one unit of the published table's last digit.
    const STEADY_TOL: f64 = 0.01;
    let base = timeline("baseline");
    let one_a = timeline("1a").utilities();
    let four = timeline("4");
    let b = base.utilities();
    let monotone = one_a.windows(2).all(|w| w[1] <= w[0]);
    let gap5 = (one_a[4] - b[4]).abs();
    let settle = steady_state_check(&four, STEADY_TOL);
    let u4 = four.utilities();
    let value = settle.map(|s| u4[s - 1]).unwrap_or(f64::NAN);
    let ratio = u4[9] / b[9];
    check(
        monotone && gap5 <= 0.1 && settle == Some(4) && (value - 41.63).abs() <= 0.25 && (ratio - 1.7).abs() <= 0.05,
        format!(
            "1a monotone {monotone}, |1a - baseline| at t5 = {gap5:.3} (tol 0.1); scenario 4 steady from slice {settle:?} \
             (step tol {STEADY_TOL}) at {value:.2} (41.63 ± 0.25), ratio to baseline {ratio:.3} (1.7 ± 0.05)"
        ),
    )
}

fn run_cli(dir: &Path, scenario: &Path, out: &str) -> Result<Duration, String> {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_polinfer"))
        .args(["run", "--scenario", scenario.to_str().unwrap(), "--out", out])
        .current_dir(dir)
        .env_remove("POLINFER_MODEL_PATH")
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    Ok(start.elapsed())
}

fn interface() -> Outcome {
    let mut problems = Vec::new();

    let doc: ModelDocument = parse_json(BUNDLED_MODEL_JSON).map_err(|e| e.to_string())?;
    if pretty_json(&doc).unwrap() != BUNDLED_MODEL_JSON {
        problems.push("bundled model".to_string());
    }
    let canonical = canonical_json(&doc).unwrap();
    if canonical_json(&parse_json::<ModelDocument>(&canonical).unwrap()).unwrap() != canonical {
        problems.push("canonical model".into());
    }
    for seed in 0..50 {
        let dbn = common::random_dbn(seed, 6);
        let doc = ModelDocument::from_dbn("random", &dbn);
        let text = canonical_json(&doc).unwrap();
        let back: ModelDocument = parse_json(&text).unwrap();
        if canonical_json(&back).unwrap() != text || back.to_dbn().unwrap() != dbn {
            problems.push(format!("random model {seed}"));
        }
    }
    for (name, path) in scenario_files() {
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let doc: ScenarioDocument = parse_json(&text).map_err(|e| e.to_string())?;
        if pretty_json(&doc).unwrap() != text {
            problems.push(format!("scenario {name}"));
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cells = 0;
    let mut one_c = Duration::ZERO;
    for (name, path) in scenario_files() {
        let took = run_cli(dir.path(), &path, &name)?;
        if name == "1c" {
            one_c = took;
        }
        let out = dir.path().join(&name);
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
        let mut csv = csv::Reader::from_path(out.join("timeline.csv")).map_err(|e| e.to_string())?;
        for (rec, row) in json["timeline"]["records"]
            .as_array()
            .unwrap()
            .iter()
            .zip(csv.records())
        {
            let row = row.map_err(|e| e.to_string())?;
            let mut expected: Vec<f64> = rec["good"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| v.as_f64().unwrap())
                .collect();
            expected.push(rec["utility"].as_f64().unwrap());
            for (cell, want) in row.iter().skip(1).zip(&expected) {
                let got: f64 = cell.parse().map_err(|_| format!("bad cell {cell}"))?;
                cells += 1;
                if format!("{got:.4}") != format!("{want:.4}") {
                    problems.push(format!("{name}: csv {got} vs json {want}"));
                }
            }
        }
    }
    check(
        problems.is_empty() && one_c < Duration::from_secs(10),
        format!(
            "model, 50 random models and 8 scenarios round-trip byte-exact; {cells} CSV cells agree with run.json at 4 decimals; \
             scenario 1c CLI run {:.2} s (limit 10 s){}",
            one_c.as_secs_f64(),
            if problems.is_empty() { String::new() } else { format!("; mismatches: {problems:?}") }
        ),
    )
}

fn main() {
    let suite = Instant::now();
    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("utility arithmetic", Box::new(utility_arithmetic)),
        ("calibration fidelity", Box::new(calibration_fidelity)),
        ("golden utility table", Box::new(move || golden_table(suite))),
        ("sensitivity", Box::new(sensitivity)),
        ("intervention semantics", Box::new(intervention_semantics)),
        ("scenario dynamics", Box::new(scenario_dynamics)),
        ("interface", Box::new(interface)),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {failed} failing, {:.1} s", suite.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
