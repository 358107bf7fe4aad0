use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use pdegensol_core::catalog::{all_families, get_family, PdeFamily};
use pdegensol_core::verifier::{grid, mix, sample_scenario, solution_value, Scenario};
use pdegensol_core::{verify_family, Verdict, VerificationReport, VerifyConfig};

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! outln {
    ($($t:tt)*) => {{
        let _ = writeln!(io::stdout(), $($t)*);
    }};
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INDETERMINATE: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "pdegensol", version, about = "Catalog and numeric verifier of closed-form general solutions of nonlinear PDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One row per family.
    List,
    /// PDE, solution, constraints and functions of one family.
    Show { id: String },
    /// Verify one family or `all`.
    Verify {
        #[arg(default_value = "all")]
        selector: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        scenarios: usize,
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Relative residual tolerance. Defaults to 1e-6, or the family's own
        /// tolerance where it sets one.
        #[arg(long)]
        tol: Option<f64>,
        /// Write the reports as a JSON array.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate a solution on a grid: CSV plus a JSON scenario sidecar.
    Sample {
        id: String,
        /// `var=lo:hi:count`, comma-separated, one entry per variable.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV path; the sidecar goes next to it. Without it the CSV goes
        /// to stdout and no sidecar is written.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failed command: exit code and message.
struct Failure(u8, String);

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn io_err(msg: impl Into<String>) -> Failure {
    Failure(EXIT_IO, msg.into())
}

fn family(id: &str) -> Result<&'static PdeFamily, Failure> {
    get_family(id).map_err(|e| usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::List => cmd_list(),
        Command::Show { id } => cmd_show(&id),
        Command::Verify {
            selector,
            seed,
            scenarios,
            points,
            tol,
            json,
        } => cmd_verify(&selector, seed, scenarios, points, tol, json.as_deref()),
        Command::Sample { id, grid, seed, out } => cmd_sample(&id, grid.as_deref(), seed, out.as_deref()),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn constraint_summary(f: &PdeFamily) -> String {
    if f.constraints.is_empty() {
        "-".into()
    } else {
        f.constraints
            .iter()
            .map(|c| format!("{} != 0", c.text))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

fn cmd_list() -> Result<u8, Failure> {
    let rows: Vec<[String; 5]> = all_families()
        .iter()
        .map(|f| {
            [
                f.id.clone(),
                f.order.to_string(),
                f.vars.len().to_string(),
                if f.params.is_empty() { "-".into() } else { f.params.join(", ") },
                constraint_summary(f),
            ]
        })
        .collect();
    let header = ["id", "order", "vars", "parameters", "constraints"].map(String::from);
    let width = |k: usize| rows.iter().chain([&header]).map(|r| r[k].len()).max().unwrap_or(0) + 2;
    let w: Vec<usize> = (0..4).map(width).collect();
    for r in std::iter::once(&header).chain(&rows) {
        outln!("{:<a$}{:<b$}{:<c$}{:<d$}{}", r[0], r[1], r[2], r[3], r[4], a = w[0], b = w[1], c = w[2], d = w[3]);
    }
    Ok(0)
}

fn cmd_show(id: &str) -> Result<u8, Failure> {
    let f = family(id)?;
    let sig = |coef: bool| {
        f.functions
            .iter()
            .filter(|s| s.coefficient == coef)
            .map(|s| format!("{}/{}", s.name, s.arity))
            .collect::<Vec<_>>()
    };
    outln!("family {}: {}", f.id, f.class);
    outln!("variables:   {}", f.vars.join(", "));
    outln!("parameters:  {}", if f.params.is_empty() { "-".into() } else { f.params.join(", ") });
    outln!("constraints: {}", constraint_summary(f));
    outln!("arbitrary functions (name/arity): {}", sig(false).join(", "));
    let coefs = sig(true);
    if !coefs.is_empty() {
        outln!("coefficient functions (name/arity): {}", coefs.join(", "));
    }
    outln!("order:       {}", f.order);
    outln!();
    outln!("PDE:\n  {} = 0", f.pde_lhs);
    outln!("solution:\n  w({}) = {}", f.vars.join(", "), f.solution);
    Ok(0)
}

fn exit_code(verdicts: impl IntoIterator<Item = Verdict>) -> u8 {
    let mut code = 0;
    for v in verdicts {
        match v {
            Verdict::Fail => return EXIT_FAIL,
            Verdict::Indeterminate => code = EXIT_INDETERMINATE,
            Verdict::Pass => {}
        }
    }
    code
}

fn print_report(r: &VerificationReport, f: &PdeFamily, secs: f64) {
    let xdev = r.xcheck_max_dev.map_or("-".to_string(), |d| format!("{d:.2e}"));
    outln!(
        "{:<6}{:<15}max_rel {:.2e}  xcheck {}  scenarios {}  resampled {}  {:.1}s",
        r.family,
        r.verdict.to_string(),
        r.max_rel_residual,
        xdev,
        r.scenarios.len(),
        r.resampled_points,
        secs
    );
    for b in r.branches.iter().filter(|b| b.branch > 0) {
        let rel = b.max_rel_residual.map_or("-".to_string(), |v| format!("{v:.2e}"));
        let note = b.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default();
        outln!("      root branch {}: {} max_rel {rel}{note}", b.branch, b.verdict);
    }
    if r.verdict == Verdict::Indeterminate {
        for s in &r.scenarios {
            for m in s.messages.iter().take(2) {
                outln!("      scenario {}: {m}", s.index);
            }
        }
    }
    if r.verdict != Verdict::Fail {
        return;
    }
    if let Some(w) = &r.worst {
        let at: Vec<String> = f.vars.iter().zip(&w.point).map(|(v, x)| format!("{v}={x:.6}")).collect();
        outln!(
            "      worst point: scenario {} at {}: |residual| {:.3e}, largest term {:.3e}, rel {:.3e}",
            w.scenario,
            at.join(" "),
            w.abs,
            w.scale,
            w.rel
        );
        for t in &w.terms {
            outln!("        {:>+12.5e}  {}", t.value, t.term);
        }
    }
}

fn cmd_verify(
    selector: &str,
    seed: u64,
    scenarios: usize,
    points: usize,
    tol: Option<f64>,
    json: Option<&Path>,
) -> Result<u8, Failure> {
    if scenarios == 0 || points == 0 {
        return Err(usage("--scenarios and --points must be positive"));
    }
    if let Some(t) = tol {
        if !(t > 0.0 && t < 1e-2) {
            return Err(usage(format!("--tol {t} is outside (0, 1e-2)")));
        }
    }
    let fams: Vec<&PdeFamily> = if selector == "all" {
        all_families().iter().collect()
    } else {
        vec![family(selector)?]
    };
    let cfg = VerifyConfig {
        n_scenarios: scenarios,
        n_points: points,
        tol_rel: tol,
        seed,
        ..VerifyConfig::default()
    };
    let mut reports = Vec::new();
    for f in fams {
        let t = Instant::now();
        let r = verify_family(f, &cfg);
        print_report(&r, f, t.elapsed().as_secs_f64());
        let _ = io::stdout().flush();
        reports.push(r);
    }
    if let Some(path) = json {
        let text = serde_json::to_string_pretty(&reports).map_err(|e| io_err(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| io_err(format!("{}: {e}", path.display())))?;
    }
    Ok(exit_code(reports.iter().map(|r| r.verdict)))
}

/// Parse `var=lo:hi:count,...` against the family's variables.
fn parse_grid(spec: &str, f: &PdeFamily) -> Result<Vec<(f64, f64, usize)>, Failure> {
    let mut axes: Vec<Option<(f64, f64, usize)>> = vec![None; f.vars.len()];
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (var, range) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("grid entry {part:?} is not var=lo:hi:count")))?;
        let i = f
            .vars
            .iter()
            .position(|v| v == var.trim())
            .ok_or_else(|| usage(format!("{var:?} is not a variable of family {}", f.id)))?;
        let fields: Vec<&str> = range.split(':').collect();
        if fields.len() != 3 {
            return Err(usage(format!("grid entry {part:?} is not var=lo:hi:count")));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("bad number {s:?} in {part:?}")));
        let lo = num(fields[0])?;
        let hi = num(fields[1])?;
        let n: usize = fields[2]
            .trim()
            .parse()
            .map_err(|_| usage(format!("bad count {:?} in {part:?}", fields[2])))?;
        if n == 0 || !(lo <= hi) {
            return Err(usage(format!("empty range in {part:?}")));
        }
        if axes[i].replace((lo, hi, n)).is_some() {
            return Err(usage(format!("variable {var} given twice")));
        }
    }
    axes.into_iter()
        .zip(&f.vars)
        .map(|(a, v)| a.ok_or_else(|| usage(format!("grid has no range for {v}"))))
        .collect()
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

#[derive(Serialize)]
struct Sidecar<'a> {
    family: &'a str,
    seed: u64,
    variables: &'a [String],
    solution: String,
    scenario: &'a Scenario,
}

fn cmd_sample(id: &str, spec: Option<&str>, seed: u64, out: Option<&Path>) -> Result<u8, Failure> {
    let f = family(id)?;
    let scenario = sample_scenario(f, mix(seed, 0)).map_err(|e| io_err(e.to_string()))?;
    let points: Vec<Vec<f64>> = match spec {
        Some(spec) => {
            let axes = parse_grid(spec, f)?;
            for ((lo, hi, _), ((dlo, dhi), v)) in axes.iter().zip(scenario.domain.iter().zip(&f.vars)) {
                if *lo < *dlo || *hi > *dhi {
                    return Err(usage(format!(
                        "grid for {v} leaves the sampling domain [{dlo}, {dhi}]"
                    )));
                }
            }
            let mut pts = vec![Vec::new()];
            for (lo, hi, n) in axes {
                let xs = axis(lo, hi, n);
                pts = pts
                    .into_iter()
                    .flat_map(|p| {
                        xs.iter().map(move |x| {
                            let mut q = p.clone();
                            q.push(*x);
                            q
                        })
                    })
                    .collect();
            }
            pts
        }
        None => grid(&scenario.inner_box(), if f.vars.len() <= 2 { 5 } else { 3 }),
    };
    let mut csv = f.vars.join(",") + ",w\n";
    for p in &points {
        let w = solution_value(f, &scenario, p)
            .map_err(|e| io_err(format!("evaluation at {p:?} failed: {e}")))?;
        let row: Vec<String> = p.iter().chain(std::iter::once(&w)).map(|v| v.to_string()).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    match out {
        None => {
            let _ = io::stdout().write_all(csv.as_bytes());
        }
        Some(path) => {
            fs::write(path, &csv).map_err(|e| io_err(format!("{}: {e}", path.display())))?;
            let side = sidecar_path(path);
            let rec = Sidecar {
                family: &f.id,
                seed,
                variables: &f.vars,
                solution: f.solution.to_string(),
                scenario: &scenario,
            };
            let text = serde_json::to_string_pretty(&rec).map_err(|e| io_err(e.to_string()))?;
            fs::write(&side, text + "\n").map_err(|e| io_err(format!("{}: {e}", side.display())))?;
            eprintln!("{} rows -> {}, scenario -> {}", points.len(), path.display(), side.display());
        }
    }
    Ok(0)
}

/// `out.csv` -> `out.scenario.json`.
fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("scenario.json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_verdicts() {
        assert_eq!(exit_code([Verdict::Pass, Verdict::Pass]), 0);
        assert_eq!(exit_code([Verdict::Pass, Verdict::Indeterminate]), EXIT_INDETERMINATE);
        assert_eq!(exit_code([Verdict::Indeterminate, Verdict::Fail]), EXIT_FAIL);
        assert_eq!(exit_code([]), 0);
    }

    #[test]
    fn grid_spec() {
        let f = get_family("6.1").unwrap();
        let g = parse_grid("t=0.2:1.2:5, x=0.3:1.1:2", f).ok().unwrap();
        assert_eq!(g, vec![(0.2, 1.2, 5), (0.3, 1.1, 2)]);
        assert!(parse_grid("t=0.2:1.2:5", f).is_err());
        assert!(parse_grid("t=0.2:1.2:5,x=0:1:0", f).is_err());
        assert!(parse_grid("t=0.2:1.2:5,y=0:1:2", f).is_err());
        assert_eq!(axis(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn sidecar_sits_next_to_csv() {
        assert_eq!(sidecar_path(Path::new("d/out.csv")), PathBuf::from("d/out.scenario.json"));
    }
}
