use std::path::Path;
use std::process::{Command, Output};

fn hardy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardy"))
        .args(args)
        .env_remove("HARDY_CONFIG")
        .output()
        .expect("run hardy")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn kernel_eval_bessel_one_is_the_dirichlet_value() {
    let o = hardy(&["kernel-eval", "--family", "bessel", "--beta", "1", "--t", "0.25", "--x", "1", "--y", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let value: f64 = text.lines().next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    let expected = (1.0 - (-4.0f64).exp()) / std::f64::consts::PI.sqrt();
    assert!((value - expected).abs() < 1e-12 * expected, "{text}");
    assert!(text.contains("ln_value"));
}

#[test]
fn kernel_eval_json_carries_schema_version() {
    let o = hardy(&[
        "kernel-eval", "--family", "heat,dirichlet", "--t", "0.5", "--x", "0.1,1", "--y", "-0.2,2", "--dx", "1",
        "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["x"].as_array().unwrap().len(), 2);
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert_eq!(v["dx"]["j"], 1);
}

#[test]
fn domain_errors_exit_one_and_name_the_operation() {
    let o = hardy(&["kernel-eval", "--family", "dirichlet", "--t", "1", "--x", "-1", "--y", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kernels::"), "{}", stderr(&o));
    let o = hardy(&["kernel-eval", "--family", "bessel", "--t", "1", "--x", "1", "--y", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("beta"), "{}", stderr(&o));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(hardy(&["kernel-eval", "--t", "1"]).status.code(), Some(1));
    assert_eq!(hardy(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(hardy(&["verify", "--assumption", "A9"]).status.code(), Some(1));
}

#[test]
fn verify_a6_dirichlet_is_all_zero() {
    let o = hardy(&["verify", "--assumption", "A6", "--family", "dirichlet", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["assumption"], "A6");
    assert_eq!(v["stabilized"], true);
    assert_eq!(v["sup"], 0.0);
    let cells = v["cells"].as_array().unwrap();
    assert!(!cells.is_empty());
    assert!(cells.iter().all(|c| c["value"] == 0.0));
}

#[test]
fn verify_output_is_byte_identical_across_runs() {
    let args = ["verify", "--assumption", "A2", "--family", "bessel", "--beta", "2", "--format", "csv"];
    let a = hardy(&args);
    let b = hardy(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("schema_version,assumption,family,covering,cell,label,layer,d_q,y,delta,"));
}

#[test]
fn unstable_verify_exits_three() {
    // A single dyadic cell has no core, and the edge value is all there is.
    let o = hardy(&["verify", "--assumption", "A1", "--family", "bessel", "--beta", "1", "--lo", "0", "--hi", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("stabilized false"));
}

#[test]
fn empty_suite_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "[]").unwrap();
    let o = hardy(&["norms", "--family", "heat", "--suite", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("empty"), "{}", stderr(&o));
}

#[test]
fn riesz_kernel_of_heat_is_the_hilbert_kernel() {
    let o = hardy(&["riesz-kernel", "--family", "heat", "--y", "0", "--x", "1", "--x", "-2.5", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("schema_version,x,value"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let x: f64 = f[1].parse().unwrap();
        let v: f64 = f[2].parse().unwrap();
        let exact = 1.0 / (std::f64::consts::PI * (0.0 - x));
        assert!((v - exact).abs() < 1e-9 * exact.abs(), "{line}");
    }
}

#[test]
fn maximal_dominates_the_function() {
    let o = hardy(&["maximal", "--family", "heat", "--f", "gaussian(0,1)", "--grid", "-2:2:5", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 5);
    for (x, m) in rows {
        // The discrete sup over t is a lower bound; t → 0 gives f(x), and the
        // grid starts at t = 1e-6 for this scale.
        assert!(m >= (-x * x / 2.0f64).exp() * (1.0 - 1e-5), "x = {x}: {m}");
    }
}

#[test]
fn decompose_unit_indicator_gives_one_atom() {
    let o = hardy(&[
        "decompose", "--family", "dirichlet", "--f", "indicator(1,2)", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["atom_count"], 1);
    assert!((v["coeff_sum"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn covering_dump_lists_cells_and_neighbours() {
    let o = hardy(&["covering", "dump", "--covering", "dyadic", "--lo", "-1", "--hi", "1", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "schema_version,index,label,center,radii,d_q,layer,neighbors\n\
         1,0,-1,0.75,0.25,0.5,0,1\n\
         1,1,0,1.5,0.5,1.0,1,0;2\n\
         1,2,1,3.0,1.0,2.0,0,1\n"
    );
}

#[test]
fn covering_check_passes_for_the_laguerre_covering() {
    let o = hardy(&["covering", "check", "--covering", "laguerre", "--lo", "-2", "--hi", "2", "--samples", "500"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("passed true"));
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_file_env_var_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.toml",
        "[family]\nname = \"bessel\"\nbeta = [1.0]\n\n[output]\nformat = \"json\"\n",
    );
    let args = ["kernel-eval", "--t", "0.25", "--x", "1", "--y", "1"];

    // File values apply.
    let o = hardy(&[&["--config", cfg.as_str()][..], &args[..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["family"], "bessel(1)");

    // The environment variable names the default config.
    let o = Command::new(env!("CARGO_BIN_EXE_hardy"))
        .args(args)
        .env("HARDY_CONFIG", &cfg)
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["family"], "bessel(1)");

    // Flags win over the file.
    let o = hardy(&[&["--config", cfg.as_str(), "--format", "text"][..], &args[..], &["--family", "heat"][..]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("value "));
    let heat = (4.0 * std::f64::consts::PI * 0.25).sqrt().recip();
    let value: f64 = stdout(&o).split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((value - heat).abs() < 1e-14);
}

#[test]
fn invalid_config_is_rejected_with_the_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[covering]\nkapa = 1.2\n");
    let o = hardy(&["--config", &cfg, "covering", "dump"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kapa"), "{}", stderr(&o));

    let cfg = write(dir.path(), "bad2.toml", "[assumption]\ngamma = 0.5\n");
    let o = hardy(&["--config", &cfg, "covering", "dump"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("assumption"), "{}", stderr(&o));
}

#[test]
fn output_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.csv");
    let o = hardy(&[
        "kernel-eval", "--family", "heat", "--t", "1", "--x", "0", "--y", "0", "--format", "csv", "-o",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("schema_version,family,t,x,y,value,ln_value,dx_j,dx_value\n1,heat,1.0,0.0,0.0,"));
}

#[test]
fn every_subcommand_help_names_its_object() {
    let cases: [(&[&str], &str); 9] = [
        (&["kernel-eval"], "T_t(x,y)"),
        (&["riesz-kernel"], "R_j(x,y)"),
        (&["riesz-apply"], "Riesz transform R_j f"),
        (&["maximal"], "maximal function"),
        (&["norms"], "H¹ norms"),
        (&["decompose"], "Q-atoms"),
        (&["verify"], "assumptions"),
        (&["covering", "dump"], "d_Q"),
        (&["covering", "check"], "Q***"),
    ];
    for (cmd, needle) in cases {
        let o = hardy(&[cmd, &["--help"][..]].concat());
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains(needle), "{cmd:?}: {}", stdout(&o));
    }
}
