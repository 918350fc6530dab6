use std::ffi::OsString;
use std::fs;
use std::path::Path;

use coldplasma_cli::{command, run_with, EXIT_INTEGRATION, EXIT_OK, EXIT_POSITIVITY, EXIT_USAGE};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Outcome {
    let argv: Vec<OsString> = std::iter::once("coldplasma")
        .chain(args.iter().copied())
        .map(OsString::from)
        .collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn field<'a>(stdout: &'a str, key: &str) -> &'a str {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(" = ")))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout}"))
}

#[test]
fn trace_reports_closed_form_blowup_time() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("t.csv");
    let o = run(&[
        "trace",
        "--profile",
        "constant:1",
        "--data",
        "laser:0.6",
        "--x0",
        "0",
        "--t-max",
        "5",
        "--out",
        p(&csv),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert_eq!(field(&o.stdout, "status"), "blewup");
    let t: f64 = field(&o.stdout, "t_star").parse().unwrap();
    assert!((t - 2.3005239830).abs() < 1e-6, "{t}");

    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,V,E,Q,dQ,v,e,n"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 9));
    let last = rows.last().unwrap();
    assert!(last[4].parse::<f64>().unwrap().abs() < 1e-12);
    assert!(last[6].is_empty() && last[7].is_empty() && last[8].is_empty());
}

#[test]
fn sweep_writes_csv_and_json_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let j = dir.path().join("c.json");
    let gp = dir.path().join("a.gp");
    let base = [
        "sweep",
        "--profile",
        "lorentz:0.3",
        "--data",
        "laser:0.3",
        "--x-min",
        "0.5",
        "--x-max",
        "0.9",
        "--dx",
        "0.1",
        "--t-max",
        "150",
    ];

    let with = |out: &Path, extra: &[&str]| {
        let mut args: Vec<&str> = base.to_vec();
        args.extend(["--out", p(out)]);
        args.extend(extra);
        run(&args)
    };
    assert_eq!(
        with(&a, &["--plot-script", p(&gp), "--threads", "1"]).code,
        EXIT_OK
    );
    assert_eq!(with(&b, &["--threads", "3"]).code, EXIT_OK);
    let o = with(&j, &[]);
    assert_eq!(o.code, EXIT_OK);
    assert_eq!(field(&o.stdout, "points"), "5");

    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());
    assert!(String::from_utf8(first)
        .unwrap()
        .starts_with("x0,status,t_star,q_min\n"));
    let report = coldplasma::sweep::read_report(&j).unwrap();
    assert_eq!(report.records.len(), 5);
    assert!(fs::read_to_string(&gp).unwrap().contains("using 1:3"));
}

#[test]
fn sweep_exits_zero_with_failed_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let o = run(&[
        "sweep",
        "--profile",
        "lorentz:0.3",
        "--data",
        "laser:0.3",
        "--x-min",
        "0.5",
        "--x-max",
        "0.7",
        "--dx",
        "0.1",
        "--t-max",
        "150",
        "--max-steps",
        "50",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(
        text.lines().skip(1).all(|l| l.contains(",failed,")),
        "{text}"
    );
    assert_eq!(field(&o.stdout, "failed"), "3");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let trace = |profile: &str, extra: &[&str]| {
        let mut args = vec![
            "trace",
            "--profile",
            profile,
            "--data",
            "laser:0.3",
            "--x0",
            "0.6",
            "--t-max",
            "50",
        ];
        args.extend(extra);
        run(&args).code
    };
    assert_eq!(trace("constant:-1", &[]), EXIT_POSITIVITY);
    assert_eq!(trace("cosine:1.5,2", &[]), EXIT_POSITIVITY);
    assert_eq!(trace("expr:x-1", &[]), EXIT_POSITIVITY);
    assert_eq!(trace("expr:1+*x", &[]), EXIT_USAGE);
    assert_eq!(trace("nonsense:1", &[]), EXIT_USAGE);
    assert_eq!(
        trace("lorentz:0.3", &["--max-steps", "50"]),
        EXIT_INTEGRATION
    );
    assert_eq!(trace("lorentz:0.3", &["--max-steps", "0"]), EXIT_USAGE);
    assert_eq!(trace("lorentz:0.3", &["--bogus"]), EXIT_USAGE);
    assert_eq!(run(&["trace", "--profile", "constant:1"]).code, EXIT_USAGE);
    assert_eq!(
        run(&[
            "damped-trace",
            "--profile",
            "constant:1",
            "--data",
            "laser:0.3",
            "--x0",
            "0",
            "--q",
            "-1"
        ])
        .code,
        EXIT_USAGE
    );

    let sweep = |profile: &str| {
        run(&[
            "sweep",
            "--profile",
            profile,
            "--data",
            "laser:0.3",
            "--x-min",
            "-2",
            "--x-max",
            "2",
            "--dx",
            "0.5",
            "--out",
            p(&out),
        ])
        .code
    };
    assert_eq!(sweep("expr:1-x^2"), EXIT_POSITIVITY);
    assert_eq!(
        run(&[
            "criterion",
            "--c",
            "0",
            "--data",
            "laser:0.3",
            "--x-min",
            "0",
            "--x-max",
            "1",
            "--dx",
            "0.5"
        ])
        .code,
        EXIT_POSITIVITY
    );
    assert_eq!(
        run(&[
            "period",
            "--profile",
            "constant:1",
            "--x0",
            "0",
            "--eps-list",
            "0.1",
            "--threads",
            "0"
        ])
        .code,
        EXIT_USAGE
    );
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1, "profile": "constant:1", "data": "laser:0.6", "x0": 0, "t_max": 1}"#,
    )
    .unwrap();
    let o = run(&["trace", "--config", p(&cfg)]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert_eq!(field(&o.stdout, "status"), "survived");
    let o = run(&["trace", "--config", p(&cfg), "--t-max", "5"]);
    assert_eq!(field(&o.stdout, "status"), "blewup");

    fs::write(&cfg, r#"{"schema_version": 2, "profile": "constant:1"}"#).unwrap();
    assert_eq!(run(&["trace", "--config", p(&cfg)]).code, EXIT_USAGE);
    fs::write(&cfg, r#"{"profile": "constant:1"}"#).unwrap();
    assert_eq!(run(&["trace", "--config", p(&cfg)]).code, EXIT_USAGE);
}

#[test]
fn analysis_commands_print_tables() {
    let o = run(&[
        "period",
        "--profile",
        "lorentz:0.3",
        "--x0",
        "0",
        "--eps-list",
        "0.01,0.02",
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    let lines: Vec<&str> = o.stdout.lines().collect();
    assert_eq!(lines[0], "eps,T_measured,T_asymptotic");
    assert_eq!(lines.len(), 3);

    let o = run(&[
        "monodromy",
        "--profile",
        "lorentz:0.3",
        "--x0",
        "0",
        "--eps",
        "0.05",
    ]);
    assert_eq!(o.code, EXIT_OK, "{}", o.stderr);
    assert_eq!(
        o.stdout.lines().next(),
        Some("x0,eps,T,lambda_re,lambda_im,max_abs")
    );
    assert_eq!(o.stdout.lines().count(), 3);

    let o = run(&[
        "instability",
        "--profile",
        "lorentz:0.3",
        "--x-min",
        "-2",
        "--x-max",
        "2",
        "--dx",
        "0.25",
    ]);
    assert_eq!(o.code, EXIT_OK);
    assert!(o.stdout.starts_with("x,m\n"));
    assert!(o.stderr.starts_with("maxima = "));

    let o = run(&[
        "criterion",
        "--c",
        "1",
        "--data",
        "laser:0.5",
        "--x-min",
        "-1",
        "--x-max",
        "1",
        "--dx",
        "0.5",
    ]);
    assert!(o.stdout.starts_with("x0,margin,safe\n"));

    let o = run(&[
        "crossings",
        "--profile",
        "constant:1",
        "--data",
        "laser:0.1",
        "--x-min",
        "-1",
        "--x-max",
        "1",
        "--dx",
        "0.5",
        "--t-max",
        "20",
    ]);
    assert_eq!(o.code, EXIT_OK);
    assert_eq!(field(&o.stdout, "crossing"), "none");
}

#[test]
fn help_lists_every_subcommand_and_flag() {
    let o = run(&["--help"]);
    assert_eq!(o.code, EXIT_OK);
    for sub in [
        "sweep",
        "trace",
        "criterion",
        "period",
        "instability",
        "monodromy",
        "damped-trace",
        "crossings",
    ] {
        assert!(o.stdout.contains(sub), "{sub}");
    }
    let mut cmd = command();
    let sweep = cmd
        .find_subcommand_mut("sweep")
        .unwrap()
        .render_long_help()
        .to_string();
    for flag in [
        "--profile",
        "--data",
        "--x-min",
        "--x-max",
        "--dx",
        "--t-max",
        "--out",
        "--format",
        "--plot-script",
        "[default: 300]",
    ] {
        assert!(sweep.contains(flag), "{flag}");
    }
}
