use std::fs;
use std::path::Path;

use lockfree_latency::cli::{config_path, dispatch_in, Context, EXIT_OK, EXIT_USAGE, EXIT_VERIFY};
use lockfree_latency::markov::io;
use lockfree_latency::models::scu;

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn lfl_in(ctx: &Context, args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = dispatch_in(ctx, std::iter::once("lfl").chain(args.iter().copied()), &mut out, &mut err);
    Outcome { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn lfl(args: &[&str]) -> Outcome {
    lfl_in(&Context::default(), args)
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn lifting_verify_passes_for_scu_two() {
    let o = lfl(&["lifting", "verify", "--model", "scu", "--n", "2"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stdout.contains("lifting: pass"));
    assert!(o.stdout.contains("flow homomorphism"));
}

#[test]
fn lifting_verify_fails_on_corrupted_map_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let map = scu::scu_lifting_map(3).unwrap().swapped(0, 20).unwrap();
    let fixture = dir.path().join("corrupt.json");
    fs::write(&fixture, serde_json::to_string(&map).unwrap()).unwrap();
    let o = lfl(&["lifting", "verify", "--model", "scu", "--n", "3", "--map", path_str(&fixture)]);
    assert_eq!(o.code, EXIT_VERIFY);
    assert!(o.stdout.contains("lifting: FAIL"));
}

#[test]
fn lifting_verify_fails_on_non_surjective_map() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("bad.json");
    fs::write(&fixture, r#"{"num_coarse": 5, "fine_to_coarse": [0, 0, 0, 0, 0, 0, 0, 0]}"#).unwrap();
    let o = lfl(&["lifting", "verify", "--model", "scu", "--n", "2", "--map", path_str(&fixture)]);
    assert_eq!(o.code, EXIT_VERIFY);
}

#[test]
fn lifting_verify_swap_flag_fails_every_family() {
    for (model, n, q) in [("scu", "3", "2"), ("fai", "4", "2"), ("parallel", "3", "2")] {
        let o = lfl(&["lifting", "verify", "--model", model, "--n", n, "--q", q, "--swap", "0,6"]);
        assert_eq!(o.code, EXIT_VERIFY, "{model}: {}", o.stdout);
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(lfl(&[]).code, EXIT_USAGE);
    assert_eq!(lfl(&["frobnicate"]).code, EXIT_USAGE);
    assert_eq!(lfl(&["sim", "run", "--model", "scu", "--n", "2", "--unknown"]).code, EXIT_USAGE);
    // randomized commands need a seed
    assert_eq!(lfl(&["sim", "run", "--model", "scu", "--n", "2"]).code, EXIT_USAGE);
    assert_eq!(lfl(&["bins", "run", "--n", "4", "--phases", "10"]).code, EXIT_USAGE);
    assert_eq!(lfl(&["crash-sweep", "--n", "4", "--k", "2"]).code, EXIT_USAGE);
    assert_eq!(lfl(&["sweep", "--model", "scu", "--mode", "bins", "--n", "8"]).code, EXIT_USAGE);
    // domain violations
    let o = lfl(&["sim", "run", "--model", "scu", "--n", "2", "--seed", "1", "--weights", "0.95,0.05", "--theta", "0.1"]);
    assert_eq!(o.code, EXIT_USAGE);
    assert!(o.stderr.contains("error:"));
    assert_eq!(lfl(&["bins", "run", "--n", "4", "--phases", "10", "--seed", "1", "--alpha", "2"]).code, EXIT_USAGE);
}

#[test]
fn help_per_subcommand() {
    for cmd in [
        &["chain", "build", "--help"][..],
        &["chain", "solve", "--help"],
        &["lifting", "verify", "--help"],
        &["sim", "run", "--help"],
        &["bins", "run", "--help"],
        &["sweep", "--help"],
        &["crash-sweep", "--help"],
    ] {
        let o = lfl(cmd);
        assert_eq!(o.code, EXIT_OK);
        assert!(o.stdout.contains("Usage: lfl"), "{cmd:?}");
    }
}

#[test]
fn chain_build_json_and_dot_with_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("scu2.json");
    assert_eq!(lfl(&["chain", "build", "--model", "scu-sys", "--n", "2", "--out", path_str(&json)]).code, EXIT_OK);
    let chain = io::from_json(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(chain.num_states(), 5);
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(config_path(&json)).unwrap()).unwrap();
    assert_eq!(config["command"], "chain build");
    assert_eq!(config["parameters"]["model"], "scu-sys");
    assert_eq!(config["parameters"]["n"], 2);

    let dot = dir.path().join("fai.dot");
    assert_eq!(lfl(&["chain", "build", "--model", "fai-glob", "--n", "4", "--out", path_str(&dot)]).code, EXIT_OK);
    assert!(fs::read_to_string(&dot).unwrap().starts_with("digraph"));
    assert!(dir.path().join("fai.config.json").exists());
}

#[test]
fn chain_solve_built_in_and_from_file() {
    let o = lfl(&["chain", "solve", "--model", "par-sys", "--n", "3", "--q", "2"]);
    assert_eq!(o.code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert!((v["latency"].as_f64().unwrap() - 2.0).abs() < 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("c.json");
    fs::write(&chain, io::to_json(&scu::build_scu_system(2).unwrap()).unwrap()).unwrap();
    let o = lfl(&["chain", "solve", "--in", path_str(&chain)]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let v: serde_json::Value = serde_json::from_str(&o.stdout).unwrap();
    assert!((v["latency"].as_f64().unwrap() - 20.0 / 7.0).abs() < 1e-12);
    assert_eq!(v["period"], 2);
}

#[test]
fn sim_stats_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stats.csv");
    let o = lfl(&["sim", "run", "--model", "scu", "--n", "4", "--steps", "200000", "--seed", "3", "--out", path_str(&out)]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "model,n,q,s,steps,seed,W_emp,Wi_emp_min,Wi_emp_max,completion_rate");
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&fields[..6], ["scu", "4", "0", "1", "200000", "3"]);
    let w: f64 = fields[6].parse().unwrap();
    assert!((w - 3.99).abs() < 0.2);
    assert!(dir.path().join("stats.config.json").exists());
}

#[test]
fn sim_trace_json_with_crashes_and_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.json");
    let args = [
        "sim", "run", "--model", "scu", "--n", "3", "--q", "2", "--s", "2", "--steps", "50000", "--seed", "5",
        "--weights", "0.5,0.3,0.2", "--theta", "0.2", "--crash", "2:1000", "--record-schedule", "--out",
        path_str(&out),
    ];
    assert_eq!(lfl(&args).code, EXIT_OK);
    let trace: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(trace["crash_times"]["2"], 1000);
    let schedule = trace["schedule"].as_array().unwrap();
    assert_eq!(schedule.len(), 50_000);
    assert!(schedule[1000..].iter().all(|p| p != 2));
}

#[test]
fn unbounded_and_parallel_sims_run() {
    let o = lfl(&["sim", "run", "--model", "unbounded", "--n", "4", "--steps", "20000", "--seed", "1"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.starts_with("model,"));
    assert!(o.stdout.lines().nth(1).unwrap().starts_with("unbounded,4,"));
    let o = lfl(&["sim", "run", "--model", "parallel", "--n", "3", "--q", "4", "--steps", "100000", "--seed", "1"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.lines().nth(1).unwrap().starts_with("parallel,3,4,"));
}

#[test]
fn bins_run_csv() {
    let o = lfl(&["bins", "run", "--n", "8", "--phases", "100", "--seed", "2"]);
    assert_eq!(o.code, EXIT_OK);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines[0], "phase_index,a_start,b_start,length,range");
    assert_eq!(lines.len(), 101);
    assert!(lines[1].starts_with("0,8,0,"));
}

#[test]
fn bins_sweep_has_four_rows_and_a_fit() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json, curve) = (dir.path().join("s.csv"), dir.path().join("fit.json"), dir.path().join("c.dat"));
    let o = lfl(&[
        "sweep", "--model", "scu", "--mode", "bins", "--n", "64,256,1024,4096", "--seed", "7", "--out",
        path_str(&csv), "--json", path_str(&json), "--curve", path_str(&curve),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 5);
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let gamma = fit["fit"]["gamma"].as_f64().unwrap();
    assert!(gamma > 0.3 && gamma < 0.7, "{gamma}");
    assert!(o.stderr.contains("gamma"));
    assert_eq!(fs::read_to_string(&curve).unwrap().lines().count(), 5);
}

#[test]
fn exact_sweep_needs_no_seed() {
    let o = lfl(&["sweep", "--model", "parallel", "--mode", "exact", "--n", "2,3,4", "--q", "3"]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert!(o.stdout.lines().skip(1).all(|l| l.split(',').nth(3) == Some("3.00000")));
}

#[test]
fn crash_sweep_reports_exact_reference() {
    let o = lfl(&["crash-sweep", "--n", "8", "--k", "2", "--steps", "1000000", "--seed", "4"]);
    assert_eq!(o.code, EXIT_OK);
    let row: Vec<&str> = o.stdout.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "2");
    assert_eq!(row[8], "2.85714");
    assert!(lfl(&["crash-sweep", "--n", "4", "--k", "5", "--seed", "1"]).code == EXIT_USAGE);
}

#[test]
fn full_precision_flag() {
    let rounded = lfl(&["sweep", "--model", "scu", "--mode", "exact", "--n", "2"]);
    let full = lfl(&["sweep", "--model", "scu", "--mode", "exact", "--n", "2", "--full-precision"]);
    assert!(rounded.stdout.contains(",2.85714,"));
    assert!(full.stdout.contains(&format!(",{},", 20.0f64 / 7.0)));
}

#[test]
fn default_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let ctx = Context { out_dir: Some(dir.path().to_path_buf()) };
    let o = lfl_in(&ctx, &["bins", "run", "--n", "4", "--phases", "10", "--seed", "1"]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.is_empty());
    assert!(dir.path().join("bins-n4-seed1.csv").exists());
    assert!(dir.path().join("bins-n4-seed1.config.json").exists());
}

#[test]
fn randomized_commands_are_byte_identical() {
    let commands: [&[&str]; 4] = [
        &["sim", "run", "--model", "scu", "--n", "5", "--q", "1", "--s", "2", "--steps", "100000", "--seed", "9"],
        &["bins", "run", "--n", "32", "--phases", "2000", "--seed", "9"],
        &["sweep", "--model", "scu", "--mode", "sim", "--n", "4,8", "--work", "100000", "--seed", "9"],
        &["crash-sweep", "--n", "6", "--k", "3,6", "--steps", "200000", "--seed", "9"],
    ];
    let dir = tempfile::tempdir().unwrap();
    for (i, cmd) in commands.iter().enumerate() {
        // same output path both times, since the sidecar records it
        let out = dir.path().join(format!("out{i}.csv"));
        let mut args = cmd.to_vec();
        args.extend(["--out", path_str(&out)]);
        let run = || {
            assert_eq!(lfl(&args).code, EXIT_OK);
            let files = (fs::read(&out).unwrap(), fs::read(config_path(&out)).unwrap());
            fs::remove_file(&out).unwrap();
            files
        };
        let first = run();
        assert_eq!(first, run(), "{cmd:?}");
    }
}
