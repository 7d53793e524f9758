use std::path::PathBuf;
use std::process::{Command, Output};

fn program(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/programs").join(format!("{name}.sdpl"));
    p.to_str().unwrap().to_string()
}

fn sdpl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdpl")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch_file(name: &str, contents: &str) -> PathBuf {
    let p = std::env::temp_dir().join(format!("sdpl-cli-{}-{name}", std::process::id()));
    std::fs::write(&p, contents).unwrap();
    p
}

#[test]
fn check_prints_the_type() {
    let o = sdpl(&["check", &program("square")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "real → real");

    let o = sdpl(&["check", &program("pair_ops")]);
    assert_eq!(stdout(&o).trim(), "real * real → real * real");
}

#[test]
fn user_errors_exit_with_one() {
    assert_eq!(sdpl(&["check", "/nonexistent.sdpl"]).status.code(), Some(1));
    let bad = scratch_file("bad.sdpl", "param x:real;\nmul(x, ");
    let o = sdpl(&["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let ill = scratch_file("ill.sdpl", "param x:real;\nfst(x)");
    assert_eq!(sdpl(&["check", ill.to_str().unwrap()]).status.code(), Some(1));
    // Wrong number of coordinates.
    assert_eq!(sdpl(&["run", &program("square"), "--at", "1,2"]).status.code(), Some(1));
}

#[test]
fn run_and_denote_agree() {
    let o = sdpl(&["run", &program("factorial"), "--at", "5"]);
    assert_eq!(stdout(&o).trim(), "120");
    let o = sdpl(&["denote", &program("factorial"), "--at", "5"]);
    assert_eq!(stdout(&o).trim(), "120");

    let o = sdpl(&["--json", "denote", &program("sqrt_partial"), "--at", "-1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["defined"], false);
    let o = sdpl(&["run", &program("sqrt_partial"), "--at", "-1"]);
    assert!(stdout(&o).starts_with("UndefinedPrimitive"));
}

#[test]
fn too_little_fuel_leaves_the_denotation_undefined() {
    let o = sdpl(&["denote", &program("factorial"), "--at", "8", "--fuel", "5"]);
    assert_eq!(stdout(&o).trim(), "undefined");
}

#[test]
fn trace_is_deterministic_under_a_seed() {
    let args = ["trace", &program("countdown"), "--at", "2.5", "--seed", "3"];
    let (a, b) = (sdpl(&args), sdpl(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).starts_with("let "));
}

#[test]
fn diff_output_parses_and_evaluates_to_the_derivative() {
    let o = sdpl(&["diff", &program("rd_square"), "--stats"]);
    let text = stdout(&o);
    let mut lines = text.lines();
    let term = lines.next().unwrap();
    assert!(lines.any(|l| l.starts_with("calls:")));
    let f = scratch_file("d.sdpl", &format!("param x:real;\n{term}"));
    let o = sdpl(&["run", f.to_str().unwrap(), "--at", "3"]);
    assert_eq!(stdout(&o).trim(), "6");

    // Loops under rd need a point.
    assert_eq!(sdpl(&["diff", &program("rd_while")]).status.code(), Some(1));
    let o = sdpl(&["diff", &program("rd_while"), "--at", "0.3"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn diff_json_is_a_syntax_tree() {
    let o = sdpl(&["--json", "diff", &program("rd_square"), "--stats", "--mode", "standard"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["term"]["kind"].is_string());
    assert!(v["term"]["children"].is_array());
    assert!(v["stats"]["recursive_call_count"].as_u64().unwrap() > 0);
}

#[test]
fn transform_then_verify() {
    let o = sdpl(&["transform", &program("rd_if"), "--rule", "if-rd"]);
    assert_eq!(o.status.code(), Some(0));
    let out = scratch_file("t.sdpl", &stdout(&o));
    let o = sdpl(&["check", out.to_str().unwrap()]);
    assert_eq!(stdout(&o).trim(), "real → real");

    let o = sdpl(&["verify-transform", &program("rd_if"), "--rule", "if-rd", "--samples", "20", "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).trim_end().ends_with("PASS"));

    // Nothing to rewrite.
    let o = sdpl(&["verify-transform", &program("square"), "--rule", "while-rd"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn axioms_table_and_property_failure() {
    let o = sdpl(&["axioms", "--maps", "3", "--samples", "10", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for name in ["RD.1", "RD.6", "RD.9", "dagger"] {
        assert!(text.lines().any(|l| l.starts_with(name) && l.ends_with("pass")), "{name} in\n{text}");
    }
    // Finite differences cannot meet this tolerance.
    let o = sdpl(&["axioms", "--maps", "3", "--samples", "10", "--fd-tol", "1e-14"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn soundness_on_named_programs_and_files() {
    let o = sdpl(&["--json", "soundness", "factorial", "rd_if", "--samples", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["name"], "factorial");

    let o = sdpl(&["soundness", &program("trig_mix"), "--samples", "5"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn bench_blowup_csv() {
    let o = sdpl(&["bench-blowup", "--depths", "4,8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<Vec<u64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(text.lines().next(), Some("depth,standard_calls,optimized_calls"));
    assert_eq!(rows, vec![vec![4, 61, 13], vec![8, 1021, 25]]);
}
