//! End-to-end runs of the command line through `uot::cli::run`.

use std::fs;
use std::path::{Path, PathBuf};

use tempfile::TempDir;

use uot::cli::{run, EXIT_CHECK_FAILED, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use uot::ioformat::{load_plan, load_problem, load_problem_file, save_plan, save_problem};
use uot::oracle::{balanced_ot_bruteforce, projected_gradient_l2};
use uot::problem::{Problem, TransportPlan};
use uot::regpath::initial_breakpoint;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn uot(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("uot").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture() -> Problem {
    Problem::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[1.0, 1.0], &[1.0, 1.0]).unwrap()
}

fn write_problem(dir: &TempDir, name: &str, problem: &Problem) -> PathBuf {
    let file = dir.path().join(name);
    save_problem(&file, problem).unwrap();
    file
}

fn printed(stdout: &str, key: &str) -> f64 {
    let prefix = format!("{key} = ");
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no `{key}` in {stdout}"))
        .parse()
        .unwrap()
}

#[test]
fn solve_mm_l2_on_fixture() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, "p.json", &fixture());
    let plan = dir.path().join("plan.json");
    let r = uot(&["solve", "--problem", s(&problem), "--out", s(&plan), "--method", "mm-l2", "--lambda", "1"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let t = load_plan(&plan).unwrap();
    let want = TransportPlan::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
    assert!(t.max_abs_diff(&want) <= 1e-8);
    assert!(r.stdout.contains("objective = ") && r.stdout.contains("iterations = "));
}

#[test]
fn solve_ipot_rejects_unbalanced_mass() {
    let dir = TempDir::new().unwrap();
    let unbalanced = Problem::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[1.0, 1.0], &[1.0, 2.0]).unwrap();
    let problem = write_problem(&dir, "p.json", &unbalanced);
    let plan = dir.path().join("plan.json");
    let r = uot(&["solve", "--problem", s(&problem), "--out", s(&plan), "--method", "ipot", "--lambda", "0.1"]);
    assert_eq!(r.code, EXIT_DATA);
    assert!(r.stderr.starts_with("error:"));
    assert!(!plan.exists());
}

#[test]
fn ruot_with_unit_weights_matches_kl() {
    let dir = TempDir::new().unwrap();
    let p = Problem::from_rows(&[vec![0.3, 1.2, 0.7], vec![0.9, 0.1, 0.4]], &[0.6, 1.1], &[0.5, 0.4, 0.9]).unwrap();
    let problem = write_problem(&dir, "p.json", &p);
    let (kl, ruot) = (dir.path().join("kl.json"), dir.path().join("ruot.json"));
    let a = uot(&["solve", "--problem", s(&problem), "--out", s(&kl), "--method", "mm-kl", "--lambda", "1"]);
    let b = uot(&[
        "solve", "--problem", s(&problem), "--out", s(&ruot), "--method", "mm-ruot", "--lambda1", "1", "--lambda2", "1",
        "--lambda-reg", "0",
    ]);
    assert_eq!((a.code, b.code), (EXIT_OK, EXIT_OK));
    assert!(load_plan(&kl).unwrap().max_abs_diff(&load_plan(&ruot).unwrap()) <= 1e-12);
}

#[test]
fn solve_flag_combinations() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, "p.json", &fixture());
    let plan = dir.path().join("plan.json");
    let base = ["solve", "--problem", s(&problem), "--out", s(&plan)];
    let with = |extra: &[&str]| uot(&[&base[..], extra].concat()).code;
    assert_eq!(with(&["--method", "mm-l2"]), EXIT_USAGE);
    assert_eq!(with(&["--method", "mm-ruot", "--lambda", "1"]), EXIT_USAGE);
    assert_eq!(with(&["--method", "mm-ruot", "--lambda1", "1"]), EXIT_USAGE);
    assert_eq!(with(&["--method", "mm-kl", "--lambda", "1", "--lambda-reg", "0.1"]), EXIT_USAGE);
    assert_eq!(with(&["--method", "sinkhorn", "--lambda", "1"]), EXIT_USAGE);
    assert_eq!(with(&["--method", "mm-l2", "--lambda=-1"]), EXIT_DATA);
    assert_eq!(with(&["--method", "mm-l2", "--lambda", "1", "--max-iters", "1"]), 2);
}

#[test]
fn path_on_fixture_has_one_breakpoint() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, "p.json", &fixture());
    let out = dir.path().join("path.json");
    let r = uot(&["path", "--problem", s(&problem), "--out", s(&out)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let csv = fs::read_to_string(dir.path().join("path.breakpoints.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,active_size,objective");
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split(',').next().unwrap().parse::<f64>().unwrap(), 0.5);
}

#[test]
fn eval_path_at_infinity_matches_lp() {
    let dir = TempDir::new().unwrap();
    let p = Problem::from_rows(
        &[vec![0.4, 1.0, 0.2], vec![0.8, 0.3, 0.9], vec![0.5, 0.6, 0.1]],
        &[0.3, 0.5, 0.2],
        &[0.4, 0.4, 0.2],
    )
    .unwrap();
    let problem = write_problem(&dir, "p.json", &p);
    let path = dir.path().join("path.json");
    assert_eq!(uot(&["path", "--problem", s(&problem), "--out", s(&path)]).code, EXIT_OK);
    let plan = dir.path().join("plan.json");
    let r = uot(&["eval-path", "--path", s(&path), "--lambda", "inf", "--out", s(&plan), "--problem", s(&problem)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let (lp_cost, _) = balanced_ot_bruteforce(&p).unwrap();
    assert!((printed(&r.stdout, "cost") - lp_cost).abs() <= 1e-9);
    assert!(printed(&r.stdout, "row_marginal_error") <= 1e-9);
    assert!(printed(&r.stdout, "col_marginal_error") <= 1e-9);

    let zero = uot(&["eval-path", "--path", s(&path), "--lambda", "0", "--out", s(&plan)]);
    assert_eq!(zero.code, EXIT_DATA);
    assert_eq!(uot(&["eval-path", "--path", s(&path), "--lambda", "-2", "--out", s(&plan)]).code, EXIT_DATA);
}

#[test]
fn eval_path_rejects_other_problem() {
    let dir = TempDir::new().unwrap();
    let problem = write_problem(&dir, "p.json", &fixture());
    let doubled = Problem::from_rows(&[vec![2.0, 4.0], vec![4.0, 2.0]], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
    let other = write_problem(&dir, "q.json", &doubled);
    let path = dir.path().join("path.json");
    assert_eq!(uot(&["path", "--problem", s(&problem), "--out", s(&path)]).code, EXIT_OK);
    let plan = dir.path().join("plan.json");
    let r = uot(&["eval-path", "--path", s(&path), "--lambda", "1", "--out", s(&plan), "--problem", s(&other)]);
    assert_eq!(r.code, EXIT_DATA);
}

#[test]
fn semi_relaxed_path_is_column_feasible() {
    let dir = TempDir::new().unwrap();
    let p = Problem::from_rows(&[vec![0.2, 0.9], vec![0.7, 0.1], vec![0.4, 0.4]], &[0.5, 0.2, 0.6], &[0.8, 0.3]).unwrap();
    let problem = write_problem(&dir, "p.json", &p);
    let path = dir.path().join("sr.json");
    let r = uot(&["path", "--problem", s(&problem), "--out", s(&path), "--semi-relaxed"]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(r.stdout.contains("kind = semi-relaxed"));
    let plan = dir.path().join("plan.json");
    let r = uot(&["eval-path", "--path", s(&path), "--lambda", "0.7", "--out", s(&plan), "--problem", s(&problem)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    assert!(printed(&r.stdout, "col_marginal_error") <= 1e-12);
    let c = uot(&["check", "--problem", s(&problem), "--plan", s(&plan), "--lambda", "0.7", "--semi-relaxed"]);
    assert_eq!(c.code, EXIT_OK, "{}", c.stdout);
}

#[test]
fn make_problem_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (f1, f2, f3) = (dir.path().join("1.json"), dir.path().join("2.json"), dir.path().join("3.json"));
    let make = |f: &Path, seed: &str| uot(&["make-problem", "--n", "3", "--m", "3", "--dim", "2", "--seed", seed, "--out", s(f)]).code;
    assert_eq!(make(&f1, "7"), EXIT_OK);
    assert_eq!(make(&f2, "7"), EXIT_OK);
    assert_eq!(make(&f3, "8"), EXIT_OK);
    assert_eq!(fs::read(&f1).unwrap(), fs::read(&f2).unwrap());
    assert_ne!(fs::read(&f1).unwrap(), fs::read(&f3).unwrap());
}

#[test]
fn make_problem_outliers_are_far() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("o.json");
    let r = uot(&[
        "make-problem", "--n", "10", "--m", "12", "--dim", "2", "--outliers", "2", "--outlier-shift", "10", "--seed", "3",
        "--out", s(&f),
    ]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let file = load_problem_file(&f).unwrap();
    let y = file.y.unwrap();
    let dim = y[0].len();
    let mean: Vec<f64> = (0..dim).map(|k| if k == 0 { 1.0 } else { 0.0 }).collect();
    let far: Vec<usize> = (0..y.len())
        .filter(|&j| y[j].iter().zip(&mean).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt() >= 8.0)
        .collect();
    assert_eq!(far, file.outliers.unwrap());
    assert_eq!(far.len(), 2);
}

#[test]
fn make_problem_large_and_invalid() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("big.json");
    let r = uot(&["make-problem", "--n", "100", "--m", "100", "--dim", "10", "--out", s(&f)]);
    assert_eq!(r.code, EXIT_OK);
    let p = load_problem(&f).unwrap();
    assert_eq!((p.n(), p.m()), (100, 100));
    assert!(p.cost.as_slice().iter().all(|&c| c >= 0.0));
    assert_eq!(uot(&["make-problem", "--n", "0", "--m", "3", "--out", s(&f)]).code, EXIT_USAGE);
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let p = Problem::from_rows(&[vec![0.5, 1.5], vec![1.0, 0.2]], &[0.6, 0.9], &[0.7, 0.5]).unwrap();
    let problem = write_problem(&dir, "p.json", &p);
    let (lambda1, _) = initial_breakpoint(&p).unwrap();
    let check = |plan: &TransportPlan, lambda: f64| {
        let file = dir.path().join("plan.json");
        save_plan(&file, plan).unwrap();
        uot(&["check", "--problem", s(&problem), "--plan", s(&file), "--lambda", &lambda.to_string()])
    };
    let optimal = projected_gradient_l2(&p, 2.0, 1e-13, 1_000_000).unwrap().plan;
    assert_eq!(check(&optimal, 2.0).code, EXIT_OK);
    let zero = TransportPlan::zeros(2, 2);
    let above = check(&zero, 1.5 * lambda1);
    assert_eq!(above.code, EXIT_CHECK_FAILED, "{}", above.stdout);
    assert_eq!(check(&zero, 0.5 * lambda1).code, EXIT_OK);
    assert_eq!(check(&TransportPlan::zeros(3, 2), 1.0).code, EXIT_DATA);
}

#[test]
fn bench_writes_csv() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("bench.csv");
    let r = uot(&["bench", "--solver", "sr-path", "--sizes", "3,4,5,6", "--repeats", "2", "--out", s(&f)]);
    assert_eq!(r.code, EXIT_OK, "{}", r.stderr);
    let text = fs::read_to_string(&f).unwrap();
    assert_eq!(text.lines().next().unwrap(), "solver,n,m,lambda,repeat,wall_time_s,iters,objective,error");
    assert_eq!(text.lines().count(), 9);
    assert_eq!(uot(&["bench", "--sizes", "5,3"]).code, EXIT_USAGE);
    assert_eq!(uot(&["bench", "--solver", "nope"]).code, EXIT_USAGE);
}

#[test]
fn missing_file_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let r = uot(&["path", "--problem", s(&dir.path().join("absent.json")), "--out", s(&dir.path().join("x.json"))]);
    assert_eq!(r.code, EXIT_DATA);
    assert_eq!(uot(&[]).code, EXIT_USAGE);
    assert_eq!(uot(&["--help"]).code, EXIT_OK);
}
