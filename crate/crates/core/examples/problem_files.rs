//! Problem, plan and path files: write, read back, and check the stored hash.

use uot::ioformat::{export_path, import_path, load_problem, problem_hash, save_plan, save_problem_file, Metric, ProblemFile};
use uot::path::LambdaValue;
use uot::regpath::{compute_path, PathOptions};

fn main() -> uot::Result<()> {
    let dir = std::env::temp_dir().join(format!("uot-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    // Point clouds; the cost matrix is built on load.
    let file = ProblemFile::from_points(
        vec![vec![0.0, 0.0], vec![1.0, 0.0]],
        vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![3.0, 0.0]],
        Metric::SqEuclidean,
        vec![0.5, 0.5],
        vec![0.3, 0.3, 0.4],
    );
    let problem_path = dir.join("problem.json");
    save_problem_file(&problem_path, &file)?;
    let problem = load_problem(&problem_path)?;
    println!("cost rows {:?}", (0..problem.n()).map(|i| (0..problem.m()).map(|j| problem.cost.get(i, j)).collect::<Vec<_>>()).collect::<Vec<_>>());
    println!("hash {}", problem_hash(&problem));

    let path = compute_path(&problem, &PathOptions::default())?;
    let path_file = dir.join("path.json");
    export_path(&path_file, &path, &problem)?;
    let imported = import_path(&path_file)?;
    imported.check_problem(&problem)?;
    assert_eq!(imported.path, path);

    let plan = imported.path.eval(LambdaValue::Finite(2.0))?;
    save_plan(dir.join("plan.json"), &plan)?;
    println!("{}", std::fs::read_to_string(&path_file)?.lines().take(12).collect::<Vec<_>>().join("\n"));
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
