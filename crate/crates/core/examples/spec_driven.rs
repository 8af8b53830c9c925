//! Drives the command-line layer from an in-memory experiment file.

use prsa::cli::{execute, Command, GlobalOpts};

const SPEC: &str = "\
[operator]
kind = pair_gaussian
d = 2
sigma_bar = 1

[schedule]
alpha = 1
h = 2
xi = 0

[run]
checkpoints = 99
reps = 20000
seed = 1

[coverage]
bound = exact_quantile
deltas = 0.1
slack = 1.5
";

fn main() -> prsa::Result<()> {
    let dir = std::env::temp_dir().join("prsa-spec-driven");
    std::fs::create_dir_all(&dir)?;
    let spec = dir.join("pair.spec");
    std::fs::write(&spec, SPEC)?;
    let opts = GlobalOpts { spec: Some(spec), out: dir.clone(), reps: None, seed: None, parallel: Some(2) };
    let verdict = execute(Command::Coverage, &opts)?;
    println!("verdict {verdict:?}");
    print!("{}", std::fs::read_to_string(dir.join("coverage.csv"))?);
    Ok(())
}
