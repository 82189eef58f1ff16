//! Sweeps (a, b) for the scalar delay equation and writes sweep.csv and
//! sweep.svg into the directory given as the first argument (default: the
//! system temp directory).

use std::path::PathBuf;

use dde_stab::cli::{load_config, run_sweep, to_csv, to_svg, CellVerdict};

const CONFIG: &str = r#"
[system]
n = 1
params = ["a", "b"]

[system.a0]
base = [[0.0]]
coeffs = [[[1.0]], [[0.0]]]

[[system.delayed]]
delay = [1, 5]
base = [[0.0]]
coeffs = [[[0.0]], [[1.0]]]

[discretization]
m = 2
window = 2

[solver.box]
lower = [-2.0, -2.0]
upper = [2.0, 2.0]

[oracle]
enabled = true

[sweep]
params = [0, 1]
ranges = [[-2.0, 2.0], [-2.0, 2.0]]
counts = [9, 9]
"#;

fn main() -> dde_stab::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    let cfg = load_config(CONFIG)?;
    let res = run_sweep(&cfg)?;
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("sweep.csv"), to_csv(&res))?;
    std::fs::write(out.join("sweep.svg"), to_svg(&res))?;

    for j in (0..res.axes[1].len()).rev() {
        let row: String = (0..res.axes[0].len())
            .map(|i| match res.cells[i * res.axes[1].len() + j].verdict {
                CellVerdict::Stable => '+',
                CellVerdict::Unstable => '-',
                CellVerdict::Boundary => '0',
            })
            .collect();
        println!("b={:>5.2} {row}", res.axes[1][j]);
    }
    let disagree = res.cells.iter().filter(|c| !c.agree).count();
    println!("oracle disagreements: {disagree}");
    println!("wrote {}", out.join("sweep.csv").display());
    Ok(())
}
