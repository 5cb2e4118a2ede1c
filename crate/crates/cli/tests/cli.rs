use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn scratch(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("matround-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn matround(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matround")).env_remove("MATROUND_SEED").args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn every_subcommand_succeeds_on_a_fixture() {
    let cases: [(&[&str], &str); 8] = [
        (&["round"], "round/tiny_halves.json"),
        (&["round-matroid"], "round_matroid/partition.json"),
        (&["degmat"], "degmat/k4_trees.json"),
        (&["multicrit"], "multicrit/planted_partition.json"),
        (&["rsp"], "rsp/one_pair.json"),
        (&["laminar-rsp"], "laminar_rsp/nested.json"),
        (&["baseline", "random"], "round/sparse_random.json"),
        (&["verify"], "round_matroid/graphic_k4.json"),
    ];
    for (cmd, file) in cases {
        let f = fixture(file);
        let mut args = cmd.to_vec();
        args.push(path(&f));
        let o = matround(&args);
        assert!(o.status.success(), "{cmd:?} {file}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn csv_header_and_output_file() {
    let out = std::env::temp_dir().join(format!("matround-cli-out-{}.csv", std::process::id()));
    let f = fixture("round/sparse_random.json");
    let o = matround(&["round", path(&f), "--format", "csv", "--out", path(&out)]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "constraint_id,part,b,lambda,violation,bound_sqrt_j,bound_nlog,bound_Lb,bound_delta,bound_min,ratio");
    std::fs::remove_file(out).ok();
}

#[test]
fn same_seed_same_solution() {
    let f = fixture("round/sparse_random.json");
    let strip = |s: String| s.lines().filter(|l| !l.contains("wall_time")).collect::<Vec<_>>().join("\n");
    let a = strip(stdout(&matround(&["--seed", "7", "round", path(&f), "--format", "csv"])));
    let b = strip(stdout(&matround(&["round", path(&f), "--format", "csv", "--seed", "7"])));
    assert_eq!(a, b);
    let env = Command::new(env!("CARGO_BIN_EXE_matround"))
        .env("MATROUND_SEED", "7")
        .args(["round", path(&f), "--format", "csv"])
        .output()
        .unwrap();
    assert_eq!(strip(stdout(&env)), a);
}

#[test]
fn malformed_input_exits_with_parse_code() {
    let bad = scratch("bad.json", "{\"n\": 2, \"y\": [0.5,");
    assert_eq!(matround(&["round", path(&bad)]).status.code(), Some(2));
    let out_of_box = scratch("box.json", r#"{"n": 2, "y": [1.5, 0.5], "constraints": []}"#);
    let o = matround(&["round", path(&out_of_box)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("E_RANGE"));
    assert_eq!(matround(&["round", "/nonexistent/instance.json"]).status.code(), Some(2));
}

#[test]
fn failed_preconditions_exit_with_code_three() {
    // y is not in the base polytope of U(2,1)
    let degmat = scratch(
        "degmat.json",
        r#"{"n": 2, "y": [0.3, 0.3], "constraints": [], "costs": [1, 1],
            "matroid": {"kind": "uniform", "rank": 1}}"#,
    );
    assert_eq!(matround(&["degmat", path(&degmat)]).status.code(), Some(3));
    let lambda = scratch(
        "lambda.json",
        r#"{"n": 4, "y": [0.5, 0.5, 0.5, 0.5],
            "constraints": [{"coeffs": [1, 1, 1, 1], "lambda": 0}],
            "matroid": {"kind": "uniform", "rank": 2}}"#,
    );
    assert_eq!(matround(&["round-matroid", path(&lambda)]).status.code(), Some(3));
}

#[test]
fn bench_prints_one_line_per_target() {
    let o = matround(&["bench", "--n", "48", "--m", "48", "--b", "8,16"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "b,weight,engine,random,envelope,max_ratio");
    assert_eq!(lines.len(), 3);
}
