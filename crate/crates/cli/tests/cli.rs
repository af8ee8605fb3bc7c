use std::path::PathBuf;
use std::process::{Command, Output};

const MARKET: [&str; 8] = ["--strike", "100", "--rate", "0.05", "--vol", "0.2", "--maturity", "1"];

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lie-barrier"));
    c.env_remove("BARRIER_LIE_CONFIG");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn price_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["price"];
    v.extend_from_slice(&MARKET);
    v.extend_from_slice(extra);
    v
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("lie-barrier-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn price_interior_example() {
    let o = run(&price_args(&["--spot", "110", "--time", "0"]));
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("value     14.8771\n"), "{out}");
    assert!(out.contains("region    interior"));
    assert!(out.contains("barrier   95.1229"));
    assert!(out.contains("theta     -4.75615"));
}

#[test]
fn price_on_the_barrier() {
    let o = run(&price_args(&["--spot", "95.1229424500714", "--time", "0"]));
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("value     0\n"), "{out}");
    assert!(out.contains("region    barrier"));
    assert!(!out.contains("delta"));
}

#[test]
fn price_just_below_the_barrier_is_worthless() {
    let o = run(&price_args(&["--spot", "95.1229", "--time", "0"]));
    let out = stdout(&o);
    assert!(out.contains("value     0\n"), "{out}");
    assert!(out.contains("region    outside"));
}

#[test]
fn missing_vol_names_sigma() {
    let o = run(&[
        "price",
        "--spot",
        "110",
        "--strike",
        "100",
        "--rate",
        "0.05",
        "--maturity",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigma"), "{}", stderr(&o));
}

#[test]
fn invalid_values_exit_two() {
    let o = run(&price_args(&["--spot", "-1"]));
    assert_eq!(o.status.code(), Some(2));
    let o = run(&[
        "price",
        "--spot",
        "110",
        "--strike",
        "100",
        "--rate",
        "0.05",
        "--vol",
        "0",
        "--maturity",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sigma"));
    assert_eq!(run(&["price", "--spot", "abc"]).status.code(), Some(2));
    assert_eq!(run(&["oracle", "--mode", "nope"]).status.code(), Some(2));
}

#[test]
fn price_formats_and_precision() {
    let o = run(&price_args(&["--spot", "110", "--format", "json", "--full-precision"]));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["region"], "interior");
    assert!((v["value"].as_f64().unwrap() - (110.0 - 100.0 * (-0.05f64).exp())).abs() < 1e-13);
    let o = run(&price_args(&["--spot", "110", "--format", "csv"]));
    assert_eq!(
        stdout(&o),
        "spot,time,value,region,barrier,delta,gamma,theta\n110,0,14.8771,interior,95.1229,1,0,-4.75615\n"
    );
}

#[test]
fn config_file_and_precedence() {
    let path = scratch("market.conf");
    std::fs::write(
        &path,
        "# test market\nstrike = 100\nrate = 0.05\nvol = 0.2\nmaturity = 1\nspot = 110\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let o = run(&["price", "--config", p]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("14.8771"));

    let o = run(&["price", "--config", p, "--spot", "120"]);
    assert!(stdout(&o).contains("24.8771"));

    let o = bin().env("BARRIER_LIE_CONFIG", &path).args(["price"]).output().unwrap();
    assert!(stdout(&o).contains("14.8771"));

    std::fs::write(&path, "volatility = 0.2\n").unwrap();
    let o = run(&["price", "--config", p]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown key"));

    let o = run(&["price", "--config", "/nonexistent/market.conf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/market.conf"));
}

#[test]
fn verify_default_passes() {
    let o = run(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("12/12 checks passed"));
    assert!(out.contains("max residual"));
}

#[test]
fn verify_alpha_sweep_passes_for_each_alpha() {
    let o = run(&["verify", "--alpha-sweep", "0:2:0.25"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).matches("12/12 checks passed").count(), 9);
}

#[test]
fn verify_tiny_tolerance_fails_with_exit_one() {
    let o = run(&["verify", "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
    let o = run(&["verify", "--tol", "isc=1e-30", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.starts_with("alpha,check,measured,tolerance,passed\n"));
    assert_eq!(out.matches(",false").count(), 1);
    assert_eq!(run(&["verify", "--tol", "bogus=1"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--alpha-sweep", "0:1"]).status.code(), Some(2));
}

#[test]
fn oracle_both_agrees() {
    let o = run(&["oracle", "--mode", "both", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["analytic"].as_f64().unwrap(), 14.8771);
    assert_eq!(v["fd"]["passed"], true);
    assert_eq!(v["mc"]["passed"], true);
}

#[test]
fn oracle_convergence_study() {
    let o = run(&["oracle", "--mode", "fd", "--grids", "100,200,400", "--study"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("n_space  n_time  dxi   max_error   order\n"), "{out}");
    assert_eq!(out.lines().count(), 5);
    assert!(out.contains("(pass)"));
    assert_eq!(
        run(&["oracle", "--mode", "fd", "--grids", "100,200", "--study"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn oracle_mc_is_deterministic() {
    let args = [
        "oracle",
        "--mode",
        "mc",
        "--paths",
        "1000",
        "--seed",
        "7",
        "--full-precision",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&[
        "oracle",
        "--mode",
        "mc",
        "--paths",
        "1000",
        "--seed",
        "8",
        "--full-precision",
    ]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn emit_surface_matches_price() {
    let path = scratch("surface.csv");
    let p = path.to_str().unwrap();
    let o = run(&[
        "emit",
        "--kind",
        "surface",
        "-o",
        p,
        "--spot-min",
        "80",
        "--spot-max",
        "160",
        "--n-spot",
        "9",
        "--n-times",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("S,p,V,region"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 49);
    assert!(rows.iter().filter(|r| r[3] == "barrier").all(|r| r[2] == "0"));
    assert_eq!(rows.iter().filter(|r| r[3] == "barrier").count(), 4);
    let row = rows.iter().find(|r| r[0] == "110" && r[1] == "0").unwrap();
    let priced = run(&price_args(&["--spot", "110", "--time", "0", "--format", "csv"]));
    let fields: Vec<String> = stdout(&priced)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(String::from)
        .collect();
    assert_eq!(row[2], fields[2]);
}

#[test]
fn emit_fd_and_mc_series() {
    let fd = scratch("fd.csv");
    let o = run(&[
        "emit",
        "--kind",
        "fd",
        "-o",
        fd.to_str().unwrap(),
        "--n-space",
        "100",
        "--n-time",
        "100",
        "--stride",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&fd).unwrap();
    assert!(text.starts_with("xi,t,v\n"));
    assert_eq!(text.lines().count(), 1 + 11 * 11);

    let mc = scratch("mc.csv");
    let o = run(&[
        "emit",
        "--kind",
        "mc",
        "-o",
        mc.to_str().unwrap(),
        "--paths",
        "2000",
        "--batches",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&mc).unwrap();
    assert!(text.starts_with("batch,paths,mean,std_error\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn emit_reports_unwritable_path() {
    let o = run(&["emit", "--kind", "surface", "-o", "/nonexistent/dir/s.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/dir/s.csv"));
}
