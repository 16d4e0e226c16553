use std::path::{Path, PathBuf};
use std::process::Command;

use ni_core::ni::{generate_ni_with, Feedthrough};
use nitool::document::{from_system, SystemDocument};
use serde_json::Value;
use tempfile::TempDir;

const DELTA: &str = "name = \"delta\"\nformat = \"two_mass\"\nk = 2.0\nalpha = 1.0\n";
const M: &str = "name = \"m\"\nformat = \"two_mass\"\nk = 2.0\nalpha = 1.0\ncomponent = \"closed_loop_minimal\"\n";
const MODE: &str = "name = \"mode\"\nformat = \"modal\"\n\n[[modes]]\nk = 1.0\nzeta = 0.1\nwn = 2.0\n";
const LAG: &str = "name = \"lag\"\nformat = \"state_space\"\na = [[-1.0]]\nb = [[1.0]]\nc = [[1.0]]\nd = [[0.0]]\n";
const IDENTITY_DC: &str =
    "name = \"i\"\nformat = \"state_space\"\na = [[-1.0, 0.0], [0.0, -1.0]]\nb = [[1.0, 0.0], [0.0, 1.0]]\nc = [[1.0, 0.0], [0.0, 1.0]]\nd = [[0.0, 0.0], [0.0, 0.0]]\n";
const ASYMMETRIC_D: &str =
    "name = \"skew\"\nformat = \"state_space\"\na = [[-1.0, 0.0], [0.0, -1.0]]\nb = [[1.0, 0.0], [0.0, 1.0]]\nc = [[1.0, 0.0], [0.0, 1.0]]\nd = [[0.0, 1.0], [0.0, 0.0]]\n";
const NEG_LAG: &str =
    "name = \"neg\"\nformat = \"state_space\"\na = [[-1.0]]\nb = [[1.0]]\nc = [[-1.0]]\nd = [[0.0]]\n";

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn nitool(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_nitool")).args(args).output().unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut a = args.to_vec();
    a.push("--json");
    let r = nitool(&a);
    (r.code, serde_json::from_str(&r.stdout).unwrap_or_else(|e| panic!("{e}: {}{}", r.stdout, r.stderr)))
}

#[test]
fn classify_two_mass_uncertainty_is_ni() {
    let dir = TempDir::new().unwrap();
    let r = nitool(&["classify", s(&write(&dir, "d.toml", DELTA))]);
    assert_eq!(r.code, 0, "{}{}", r.stdout, r.stderr);
    assert!(r.stdout.starts_with("verdict: Ni\n"), "{}", r.stdout);
}

#[test]
fn classify_single_mode_is_strict() {
    let dir = TempDir::new().unwrap();
    let r = nitool(&["classify", s(&write(&dir, "m.toml", MODE))]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.starts_with("verdict: StrictNi"), "{}", r.stdout);
}

#[test]
fn classify_asymmetric_feedthrough_is_not_ni() {
    let dir = TempDir::new().unwrap();
    let r = nitool(&["classify", s(&write(&dir, "s.toml", ASYMMETRIC_D))]);
    assert_eq!(r.code, 2);
    assert!(r.stdout.contains("NotNi (D not symmetric)"), "{}", r.stdout);
}

#[test]
fn classify_prints_the_falsifier() {
    let dir = TempDir::new().unwrap();
    let (code, v) = json(&["classify", s(&write(&dir, "n.toml", NEG_LAG))]);
    assert_eq!(code, 2);
    assert_eq!(v["result"]["class"], "NotNi");
    let f = &v["result"]["falsifier"];
    let (w, l) = (f["omega"].as_f64().unwrap(), f["min_eig"].as_f64().unwrap());
    assert!((l + 2.0 * w / (1.0 + w * w)).abs() <= 1e-12);
}

#[test]
fn classify_non_minimal_is_inconclusive() {
    let dir = TempDir::new().unwrap();
    let text = "name = \"raw\"\nformat = \"two_mass\"\nk = 2.0\nalpha = 1.0\ncomponent = \"closed_loop\"\n";
    let r = nitool(&["classify", s(&write(&dir, "r.toml", text))]);
    assert_eq!(r.code, 3, "{}", r.stdout);
    assert!(r.stdout.starts_with("verdict: Inconclusive"));
}

#[test]
fn stability_of_the_two_mass_loop() {
    let dir = TempDir::new().unwrap();
    let (d, m) = (write(&dir, "d.toml", DELTA), write(&dir, "m.toml", M));
    let (code, v) = json(&["stability", "--c-role", s(&d), "--cs-role", s(&m)]);
    assert_eq!(code, 0);
    assert_eq!(v["result"]["verdict"], "Stable");
    assert!((v["result"]["dc_loop_eig"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
    assert_eq!(v["result"]["agreement"], true);

    let soft = write(&dir, "d05.toml", &DELTA.replace("k = 2.0", "k = 0.5"));
    let (code, v) = json(&["stability", "--c-role", s(&soft), "--cs-role", s(&m)]);
    assert_eq!(code, 2);
    assert_eq!(v["result"]["verdict"], "Unstable");
    assert!((v["result"]["dc_loop_eig"].as_f64().unwrap() - 1.25).abs() <= 1e-9);
}

#[test]
fn stability_needs_a_strict_operand() {
    let dir = TempDir::new().unwrap();
    let (d, m) = (write(&dir, "d.toml", DELTA), write(&dir, "m.toml", M));
    let r = nitool(&["stability", "--c-role", s(&m), "--cs-role", s(&d)]);
    assert_eq!(r.code, 3);
    assert!(r.stdout.starts_with("verdict: PreconditionFailed"), "{}", r.stdout);
    assert!(r.stdout.contains("cs-role class  Ni           FAILED"), "{}", r.stdout);
}

#[test]
fn stability_size_mismatch_is_a_precondition() {
    let dir = TempDir::new().unwrap();
    let r =
        nitool(&["stability", "--c-role", s(&write(&dir, "l.toml", LAG)), "--cs-role", s(&write(&dir, "m.toml", M))]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("dimension mismatch"), "{}", r.stderr);
}

#[test]
fn margin_of_the_example_closed_loop() {
    let dir = TempDir::new().unwrap();
    let (code, v) = json(&["margin", s(&write(&dir, "m.toml", M)), "--part", "I"]);
    assert_eq!(code, 0);
    let g = v["result"]["gamma_star"].as_f64().unwrap();
    assert!((g - 2.0 / (3.0 + 5f64.sqrt())).abs() <= 1e-9);
    assert!(format!("{g:.7}") == "0.3819660");
    assert_eq!(v["result"]["class"]["class"], "StrictNi");
}

#[test]
fn margin_of_identity_dc_gain_is_one() {
    let dir = TempDir::new().unwrap();
    let (code, v) = json(&["margin", s(&write(&dir, "i.toml", IDENTITY_DC)), "--part", "II"]);
    assert_eq!(code, 0);
    assert!((v["result"]["gamma_star"].as_f64().unwrap() - 1.0).abs() <= 1e-12);
}

#[test]
fn margin_of_a_non_ni_system_exits_three() {
    let dir = TempDir::new().unwrap();
    let (code, v) = json(&["margin", s(&write(&dir, "n.toml", NEG_LAG)), "--part", "II"]);
    assert_eq!(code, 3);
    assert!(v["result"]["error"].as_str().unwrap().contains("part II"));
    assert_eq!(v["result"]["class"]["class"], "NotNi");
    assert!(v["result"]["gamma_star"].is_null());
}

#[test]
fn margin_needs_a_part() {
    let dir = TempDir::new().unwrap();
    assert_eq!(nitool(&["margin", s(&write(&dir, "m.toml", M))]).code, 1);
}

#[test]
fn sweep_first_order_lag() {
    let dir = TempDir::new().unwrap();
    let r = nitool(&["sweep", s(&write(&dir, "l.toml", LAG)), "--sweep", "0.1:10:3"]);
    assert_eq!(r.code, 0);
    let lines: Vec<&str> = r.stdout.lines().collect();
    assert_eq!(lines[0], "omega,re_11,im_11,lambda_1");
    assert_eq!(lines[2], "1.0,0.5,-0.5,1.0");
}

#[test]
fn sweep_spectrum_vanishes_toward_dc() {
    let dir = TempDir::new().unwrap();
    let r = nitool(&["sweep", s(&write(&dir, "d.toml", MODE)), "--sweep", "1e-6:1e-1:6"]);
    let first: Vec<f64> = r.stdout.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(first.windows(2).all(|w| w[0].abs() < w[1].abs()), "{first:?}");
    assert!(first[0].abs() < 1e-5);
}

#[test]
fn sweep_of_the_closed_loop_is_strictly_positive() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.csv");
    let r = nitool(&["sweep", s(&write(&dir, "m.toml", M)), "--out", s(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "omega,re_11,im_11,re_12,im_12,re_21,im_21,re_22,im_22,lambda_1,lambda_2");
    let mut rows = 0;
    for line in lines {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!(cells[9] > 0.0, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 2000);
    assert!(r.stdout.contains("rows: 2000"));
}

#[test]
fn sweep_numbers_round_trip() {
    let dir = TempDir::new().unwrap();
    let r = nitool(&["sweep", s(&write(&dir, "m.toml", MODE)), "--sweep", "0.3:7:5"]);
    for line in r.stdout.lines().skip(1) {
        for cell in line.split(',') {
            let x: f64 = cell.parse().unwrap();
            assert_eq!(format!("{x:?}"), cell);
        }
    }
}

#[test]
fn sweep_to_an_unwritable_path_fails() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("missing").join("x.csv");
    let r = nitool(&["sweep", s(&write(&dir, "l.toml", LAG)), "--out", s(&out)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("x.csv"), "{}", r.stderr);
}

#[test]
fn two_mass_example_boundary() {
    for (k, code, verdict) in [("2", 0, "Stable"), ("0.75", 3, "NumericallyMarginal"), ("0.74", 2, "Unstable")] {
        let (c, v) = json(&["example", "two-mass", "--k", k, "--alpha", "1"]);
        assert_eq!((c, v["result"]["verdict"].as_str().unwrap()), (code, verdict), "k = {k}");
        let g = v["result"]["gamma_star"].as_f64().unwrap();
        assert!((g - 0.3819660112501051).abs() <= 1e-9);
        assert!(v["result"]["closed_loop_deviation"].as_f64().unwrap() <= 1e-8);
    }
    let (_, v) = json(&["example", "two-mass"]);
    let r = &v["result"]["stability"];
    assert!((r["dc_loop_eig"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
    assert_eq!(r["oracle"]["verdict"], "Stable");
    assert_eq!(r["c_role"]["class"], "Ni");
    assert_eq!(r["cs_role"]["class"], "StrictNi");
}

#[test]
fn two_mass_example_rejects_bad_parameters() {
    assert_eq!(nitool(&["example", "two-mass", "--k", "0"]).code, 1);
}

#[test]
fn parse_errors_exit_one_with_line_context() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.toml", "name = \"x\"\nformat = \"state_space\"\na = [[1.0,\n");
    let r = nitool(&["classify", s(&bad)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("line 3"), "{}", r.stderr);
    assert_eq!(nitool(&["classify", s(&dir.path().join("nope.toml"))]).code, 1);
    assert_eq!(nitool(&["frobnicate"]).code, 1);
    assert_eq!(nitool(&["classify", s(&bad), "--sweep", "1:2"]).code, 1);
}

#[test]
fn version_and_help() {
    let r = nitool(&["--version"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout.trim(), format!("nitool {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(nitool(&["--help"]).code, 0);
}

#[test]
fn json_echoes_config_and_provenance() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "m.toml", MODE);
    let (_, v) =
        json(&["classify", s(&f), "--tol-eq", "1e-7", "--tol-psd", "1e-9", "--sweep", "0.01:100:300", "--strict-grid"]);
    let raw = nitool(&["classify", s(&f), "--json"]).stdout;
    let at = |k: &str| raw.find(&format!("\n  \"{k}\":")).unwrap_or_else(|| panic!("{k}"));
    let order = ["command", "inputs", "result", "config", "provenance"].map(at);
    assert!(order.windows(2).all(|w| w[0] < w[1]), "{order:?}");
    let c = &v["config"];
    assert_eq!(c["tol"]["eq_tol"], 1e-7);
    assert_eq!(c["tol"]["psd_tol"], 1e-9);
    assert_eq!(c["sweep"]["points"], 300);
    assert_eq!(c["sweep"]["determinant_sweep"], true);
    assert!(v["result"]["strictness"]["min_abs_det"].is_f64());
    assert_eq!(v["provenance"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["provenance"]["tool"], "nitool");
}

/// Every number in the human report appears in the JSON report.
#[test]
fn json_carries_every_human_number() {
    let dir = TempDir::new().unwrap();
    let (d, m) = (write(&dir, "d.toml", DELTA), write(&dir, "m.toml", M));
    let cases: Vec<Vec<&str>> = vec![
        vec!["classify", s(&m)],
        vec!["stability", "--c-role", s(&d), "--cs-role", s(&m)],
        vec!["margin", s(&m), "--part", "I"],
        vec!["example", "two-mass"],
    ];
    for args in cases {
        let human = nitool(&args).stdout;
        let (_, v) = json(&args);
        let mut numbers = Vec::new();
        collect_numbers(&v, &mut numbers);
        for tok in human.split(|c: char| c.is_whitespace() || c == '(' || c == ')' || c == ':') {
            if let Ok(x) = tok.parse::<f64>() {
                assert!(numbers.contains(&x), "{args:?}: {tok} missing from JSON");
            }
        }
    }
}

fn collect_numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap()),
        Value::Array(a) => a.iter().for_each(|x| collect_numbers(x, out)),
        Value::Object(o) => o.values().for_each(|x| collect_numbers(x, out)),
        Value::String(s) => out.extend(s.split([' ', ':']).filter_map(|t| t.parse::<f64>().ok())),
        _ => {}
    }
}

#[test]
fn identical_invocations_give_identical_reports() {
    let dir = TempDir::new().unwrap();
    let (d, m) = (write(&dir, "d.toml", DELTA), write(&dir, "m.toml", M));
    let args = ["stability", "--c-role", s(&d), "--cs-role", s(&m), "--json"];
    assert_eq!(nitool(&args).stdout, nitool(&args).stdout);
}

#[test]
fn generated_documents_round_trip_byte_identically() {
    for seed in 0..20u64 {
        let sys =
            generate_ni_with(1 + (seed as usize % 5), 1 + (seed as usize % 3), seed, false, Feedthrough::Symmetric)
                .unwrap()
                .system;
        let text = from_system(&sys).to_text().unwrap();
        let again = SystemDocument::parse(&text).unwrap().to_text().unwrap();
        assert_eq!(again, text, "seed {seed}");
    }
    for text in [DELTA, M, MODE, LAG] {
        let once = SystemDocument::parse(text).unwrap().to_text().unwrap();
        assert_eq!(SystemDocument::parse(&once).unwrap().to_text().unwrap(), once);
    }
}
