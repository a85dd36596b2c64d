//! The `ivkkt` binary: exit codes, output blocks and certificate round-trips.

use std::io::Write;
use std::process::Command;

use ivkkt_cli::parse_kv;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

impl Out {
    fn get(&self, key: &str) -> String {
        parse_kv(&self.stdout)
            .into_iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v)
            .unwrap_or_else(|| panic!("no `{key}` in:\n{}\n{}", self.stdout, self.stderr))
    }
}

fn ivkkt(args: &[&str]) -> Out {
    let out = Command::new(env!("CARGO_BIN_EXE_ivkkt")).args(args).output().unwrap();
    Out {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(ivkkt(&["--help"]).code, 0);
    assert_eq!(ivkkt(&["--version"]).code, 0);
    let bad = ivkkt(&["check", "--problem", "mivop3", "--bogus"]);
    assert_eq!(bad.code, 1);
    assert!(bad.stderr.contains("--bogus"));
    assert_eq!(ivkkt(&[]).code, 1);
    assert_eq!(ivkkt(&["check", "--problem", "no_such_problem"]).code, 1);
}

#[test]
fn list_names_every_builtin() {
    let out = ivkkt(&["list"]);
    assert_eq!(out.code, 0);
    assert_eq!(
        out.get("problems"),
        "mivop3,mivop4,mivop5,hderiv_counterexample,relaxed_mivop3"
    );
}

#[test]
fn check_exit_codes() {
    let ok = ivkkt(&["check", "--problem", "mivop3", "--theorem", "T32a"]);
    assert_eq!(ok.code, 0, "{}", ok.stderr);
    assert_eq!(ok.get("verdict"), "certified");
    assert_eq!(ok.get("active"), "1,2,3,5");

    let violated = ivkkt(&["check", "--problem", "relaxed_mivop3", "--theorem", "T32a"]);
    assert_eq!(violated.code, 2);
    assert_eq!(violated.get("verdict"), "violated");
    assert!(violated.get("violation.residual").parse::<f64>().unwrap() < 0.0);

    // The inequalities hold but phi1 is not LU-convex.
    let found = ivkkt(&["search", "--problem", "mivop4", "--theorem", "T32a"]);
    assert_eq!(found.code, 0);
    let unverified = ivkkt(&["check", "--problem", "mivop4", "--cert", &found.get("cert")]);
    assert_eq!(unverified.code, 3);
    assert_eq!(unverified.get("verdict"), "certified-hypotheses-unverified");
    assert_eq!(unverified.get("hypotheses.failed"), "1");

    let outside = ivkkt(&["check", "--problem", "mivop3", "--theorem", "T32a", "--candidate", "(1.5,1.5)"]);
    assert_eq!(outside.code, 2);

    let shape = ivkkt(&["check", "--problem", "mivop3", "--cert", "theorem=T32a lamL=1 lamU=1,1 mu=1,7,0,0,4.5"]);
    assert_eq!(shape.code, 1);
    assert!(shape.stderr.contains("shape"), "{}", shape.stderr);
}

#[test]
fn wrong_certificate_reports_the_failed_probe() {
    let out = ivkkt(&[
        "check",
        "--problem",
        "mivop3",
        "--cert",
        "theorem=T32a lamL=1,1 lamU=1,1 mu=1,7,0,0,4",
    ]);
    assert_eq!(out.code, 2);
    assert!(out.get("violation.probe").parse::<usize>().unwrap() >= 1);
    assert!(out.get("violation.source").starts_with('('));
}

#[test]
fn searched_certificate_round_trips_through_check() {
    for (problem, theorem) in [("mivop3", "T32a"), ("mivop4", "T34a"), ("mivop5", "T41")] {
        let found = ivkkt(&["search", "--problem", problem, "--theorem", theorem]);
        assert_eq!(found.code, 0, "{problem}: {}", found.stdout);
        let cert = found.get("cert");
        let checked = ivkkt(&["check", "--problem", problem, "--cert", &cert]);
        assert_eq!(checked.get("verdict"), found.get("verdict"), "{problem}");
        assert_eq!(checked.get("min_residual"), found.get("min_residual"), "{problem}");
        assert_eq!(checked.get("cert"), cert);
    }
}

#[test]
fn search_without_multipliers_exits_4() {
    let out = ivkkt(&["search", "--problem", "relaxed_mivop3", "--theorem", "T32a"]);
    assert_eq!(out.code, 4);
    assert_eq!(out.get("search"), "infeasible");
}

#[test]
fn oracle_classes_and_exit_codes() {
    let held = ivkkt(&["oracle", "--problem", "mivop3", "--grid", "51", "--classes", "all"]);
    assert_eq!(held.code, 0, "{}", held.stderr);
    for class in ["type-I", "strong-I", "weak-I", "type-II", "strong-II", "weak-II"] {
        assert_eq!(held.get(class), "holds-on-grid");
    }
    let refuted = ivkkt(&["oracle", "--problem", "relaxed_mivop3", "--grid", "21", "--classes", "weak-I"]);
    assert_eq!(refuted.code, 2);
    assert_eq!(refuted.get("weak-I"), "refuted");
    assert_eq!(refuted.get("weak-I.witness"), "(0.5, 0.5)");
    assert_eq!(ivkkt(&["oracle", "--problem", "mivop3", "--classes", "type-III"]).code, 1);
    assert_eq!(ivkkt(&["oracle", "--problem", "mivop3", "--grid", "1"]).code, 1);
}

#[test]
fn jittered_grid_is_reproducible() {
    let args = ["oracle", "--problem", "relaxed_mivop3", "--grid", "31", "--jitter", "--seed", "9"];
    let a = ivkkt(&args);
    let b = ivkkt(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.code, 2);
}

#[test]
fn derivs_toward_explicit_targets() {
    let out = ivkkt(&["derivs", "--problem", "mivop3", "--target", "(2.718281828459045,1)"]);
    assert_eq!(out.code, 0);
    let d: f64 = out.get("target.1.psi4.d").parse().unwrap();
    assert!((d - 2.0).abs() < 1e-7);
    assert_eq!(ivkkt(&["derivs", "--problem", "mivop3"]).code, 1);
    assert_eq!(ivkkt(&["derivs", "--problem", "mivop3", "--target", "(-1,1)"]).code, 1);
}

#[test]
fn problem_files_load_and_report_parse_positions() {
    let dir = std::env::temp_dir().join(format!("ivkkt-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let good = dir.join("quad.txt");
    let mut f = std::fs::File::create(&good).unwrap();
    writeln!(
        f,
        "# one-dimensional quadratic\nmanifold euclidean 1\nbox -1:1\nprobes box\n\
         objective f lower=p1^2 upper=p1^2 + 1\nconstraint g -p1 - 2\ncandidate (0)\n\
         certificate theorem=T41 lam=1 mu=0"
    )
    .unwrap();
    let path = good.to_str().unwrap();
    let ok = ivkkt(&["check", "--problem", path]);
    assert_eq!(ok.code, 0, "{}{}", ok.stdout, ok.stderr);
    assert_eq!(ivkkt(&["oracle", "--problem", path, "--grid", "41"]).code, 0);

    let bad = dir.join("bad.txt");
    std::fs::write(&bad, "manifold euclidean 1\nbox -1:1\nobjective f lower=p1 upper=p1 +\n").unwrap();
    let out = ivkkt(&["check", "--problem", bad.to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("line 3"), "{}", out.stderr);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn props_reports_every_function() {
    let out = ivkkt(&["props", "--problem", "mivop3", "--pairs", "50"]);
    assert_eq!(out.code, 0);
    assert_eq!(out.get("phi1.lu_convex"), "holds-on-samples");
    assert_eq!(out.get("psi5.convex"), "holds-on-samples");
    assert_eq!(out.get("candidate.feasible"), "true");
}
