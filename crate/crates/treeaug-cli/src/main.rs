//! `treeaug`: command-line front end for the tree augmentation solver.
//!
//! Exit codes: 0 success, 1 usage or malformed input, 2 infeasible instance
//! or invalid cover, 3 internal invariant violation, 4 ratio violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use treeaug::anatomy::{compute_anatomy, maximal_links};
use treeaug::instance::{
    format_instance, format_solution, generate_random, parse_instance, parse_solution,
    shadow_close, verify_cover, TapInstance,
};
use treeaug::oracle::{exact_opt, export_lp, two_approx, ExactMode};
use treeaug::solver::{solve, SolveOptions};
use treeaug::TapError;

#[derive(Parser)]
#[command(
    name = "treeaug",
    version,
    about = "Tree augmentation: 3/2-approximate solver, exact oracle, and tooling"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random feasible instance
    Gen {
        /// Number of tree nodes (>= 2)
        #[arg(long)]
        nodes: usize,
        /// Probability of each candidate link
        #[arg(long)]
        density: f64,
        /// RNG seed (same seed, same bytes)
        #[arg(long)]
        seed: u64,
        /// Output file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cover an instance with the 3/2-approximation solver
    Solve {
        /// Instance file
        #[arg(long)]
        input: PathBuf,
        /// Solution file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the JSON-lines audit trace here
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Disable in-execution invariant checks
        #[arg(long, conflicts_with = "assert")]
        no_assert: bool,
        /// Force invariant checks on regardless of size
        #[arg(long)]
        assert: bool,
    },
    /// Exact minimum cover by exhaustive search (small instances)
    Exact {
        /// Instance file
        #[arg(long)]
        input: PathBuf,
        /// Report a bracket instead if the optimum exceeds this
        #[arg(long)]
        max_size: Option<usize>,
        /// Search all closed links instead of maximal ones (cross-check)
        #[arg(long)]
        all_links: bool,
    },
    /// Check a solution file against an instance
    Verify {
        /// Instance file
        #[arg(long)]
        input: PathBuf,
        /// Solution file to check
        #[arg(long)]
        cover: PathBuf,
    },
    /// Solve and exactly solve a random corpus; report |F|/OPT statistics
    Ratio {
        /// Nodes per instance
        #[arg(long)]
        nodes: usize,
        /// Number of instances
        #[arg(long)]
        count: usize,
        /// Link density
        #[arg(long)]
        density: f64,
        /// Base seed; instance i uses seed + i
        #[arg(long)]
        seed: u64,
    },
    /// Runtime scaling report as CSV
    Bench {
        /// Comma-separated node counts, e.g. 25,50,100,200
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        /// RNG seed
        #[arg(long)]
        seed: u64,
        /// Link density (default 6/n per size)
        #[arg(long)]
        density: Option<f64>,
    },
    /// Print the structural classification of an instance
    Anatomy {
        /// Instance file
        #[arg(long)]
        input: PathBuf,
    },
    /// Export the LP relaxation of an instance
    Lp {
        /// Instance file
        #[arg(long)]
        input: PathBuf,
        /// Output file (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_for(err: &TapError) -> u8 {
    match err {
        TapError::Parse { .. }
        | TapError::Invalid(_)
        | TapError::GenerationFailed { .. }
        | TapError::ExactBudget { .. } => 1,
        TapError::Infeasible { .. }
        | TapError::Uncovered { .. }
        | TapError::NotAnInputLink { .. } => 2,
        TapError::Assertion(_) => 3,
    }
}

fn read_file(path: &Path) -> Result<String, TapError> {
    fs::read_to_string(path)
        .map_err(|e| TapError::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), TapError> {
    fs::write(path, text)
        .map_err(|e| TapError::Invalid(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), TapError> {
    match out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_instance(path: &Path) -> Result<TapInstance, TapError> {
    parse_instance(&read_file(path)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn run(cli: Cli) -> Result<u8, TapError> {
    match cli.cmd {
        Cmd::Gen {
            nodes,
            density,
            seed,
            out,
        } => {
            let inst = generate_random(nodes, density, seed)?;
            emit(&out, &format_instance(&inst))?;
            Ok(0)
        }
        Cmd::Solve {
            input,
            out,
            trace,
            no_assert,
            assert,
        } => {
            let inst = load_instance(&input)?;
            let opts = SolveOptions {
                assert: match (assert, no_assert) {
                    (true, _) => Some(true),
                    (_, true) => Some(false),
                    _ => None,
                },
            };
            let sol = solve(&inst, &opts)?;
            if let Some(path) = &trace {
                let mut text = String::new();
                for ev in &sol.trace {
                    text.push_str(&ev.to_string());
                    text.push('\n');
                }
                write_file(path, &text)?;
            }
            emit(&out, &format_solution(&sol.pairs))?;
            let st = &sol.stats;
            eprintln!(
                "solved: nodes={} cover={} iterations={} greedy={} prep_stem={} prep_bud={} final={} latches={} swaps={}",
                inst.tree.n,
                sol.size(),
                st.iterations,
                st.greedy_count,
                st.prep_two_stem_count,
                st.prep_bud_count,
                st.final_picks,
                st.latch_count,
                st.swap_count
            );
            Ok(0)
        }
        Cmd::Exact {
            input,
            max_size,
            all_links,
        } => {
            let inst = load_instance(&input)?;
            let mode = if all_links {
                ExactMode::AllLinks
            } else {
                ExactMode::Maximal
            };
            let best = exact_opt(&inst, mode, max_size)?;
            print!("{}", format_solution(&best.pairs));
            Ok(0)
        }
        Cmd::Verify { input, cover } => {
            let inst = load_instance(&input)?;
            let pairs = parse_solution(&read_file(&cover)?)?;
            verify_cover(&inst, &pairs)?;
            println!("ok: {} links cover the tree", pairs.len());
            Ok(0)
        }
        Cmd::Ratio {
            nodes,
            count,
            density,
            seed,
        } => run_ratio(nodes, count, density, seed),
        Cmd::Bench {
            sizes,
            seed,
            density,
        } => run_bench(&sizes, seed, density),
        Cmd::Anatomy { input } => {
            let inst = load_instance(&input)?;
            let closed = shadow_close(&inst);
            print!("{}", describe_anatomy(&closed)?);
            Ok(0)
        }
        Cmd::Lp { input, out } => {
            let inst = load_instance(&input)?;
            emit(&out, &export_lp(&inst))?;
            Ok(0)
        }
    }
}

fn run_ratio(nodes: usize, count: usize, density: f64, seed: u64) -> Result<u8, TapError> {
    if count == 0 {
        return Err(TapError::Invalid("count must be positive".into()));
    }
    // One record per instance in seed order, solved in parallel.
    let results: Vec<Result<(usize, usize, usize), TapError>> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let inst = generate_random(nodes, density, seed + i)?;
            let sol = solve(&inst, &SolveOptions::default())?;
            let best = exact_opt(&inst, ExactMode::Maximal, None)?;
            let twice = two_approx(&inst)?;
            if twice.size() > 2 * best.size() {
                return Err(TapError::Assertion(format!(
                    "baseline exceeded twice the optimum on seed {}",
                    seed + i
                )));
            }
            Ok((sol.size(), best.size(), i as usize))
        })
        .collect();
    let mut worst = (0usize, 1usize, 0usize); // (|F|, opt, index), compared as fractions
    let mut sum_ratio = 0.0f64;
    for r in results {
        let (f, opt, idx) = r?;
        sum_ratio += f as f64 / opt as f64;
        if f * worst.1 > worst.0 * opt {
            worst = (f, opt, idx);
        }
    }
    let max_ratio = worst.0 as f64 / worst.1 as f64;
    println!("instances {count}");
    println!(
        "max_ratio {:.4} (cover {} vs optimum {} at seed {})",
        max_ratio,
        worst.0,
        worst.1,
        seed + worst.2 as u64
    );
    println!("mean_ratio {:.4}", sum_ratio / count as f64);
    // Integer-exact guarantee check: 2|F| <= 3 OPT.
    if 2 * worst.0 > 3 * worst.1 {
        eprintln!("ratio guarantee violated");
        return Ok(4);
    }
    Ok(0)
}

fn run_bench(sizes: &[usize], seed: u64, density: Option<f64>) -> Result<u8, TapError> {
    println!("n,m_input,m_closed,iterations,greedy_count,wall_ms");
    for &n in sizes {
        let d = density.unwrap_or_else(|| (6.0 / n as f64).min(1.0));
        let inst = generate_random(n, d, seed)?;
        let closed = shadow_close(&inst);
        let start = Instant::now();
        let sol = solve(&inst, &SolveOptions::default())?;
        let wall_ms = start.elapsed().as_millis();
        println!(
            "{},{},{},{},{},{}",
            n,
            inst.input_pairs.len(),
            closed.links.len(),
            sol.stats.iterations,
            sol.stats.greedy_count,
            wall_ms
        );
    }
    Ok(0)
}

fn describe_anatomy(closed: &TapInstance) -> Result<String, TapError> {
    let anatomy = compute_anatomy(closed)?;
    // Label followed by zero or more numbers; no trailing whitespace.
    fn listed<I: IntoIterator<Item = usize>>(label: &str, items: I) -> String {
        let mut s = String::from(label);
        for it in items {
            s.push(' ');
            s.push_str(&it.to_string());
        }
        s.push('\n');
        s
    }
    let mut out = String::new();
    out.push_str(&format!(
        "nodes {} root {} input_links {} closed_links {}\n",
        closed.tree.n,
        closed.tree.root,
        closed.input_pairs.len(),
        closed.links.len()
    ));
    for &leaf in &anatomy.leaves {
        out.push_str(&format!("leaf {} up {}\n", leaf, anatomy.up[&leaf]));
    }
    for st in &anatomy.stems {
        out.push_str(&format!(
            "stem {} leaves {} {} twin {}\n",
            st.s, st.leaves.0, st.leaves.1, st.twin
        ));
    }
    for b in &anatomy.buds {
        out.push_str(&listed(
            &format!(
                "bud {} co {} third {} stem {} buddy {} q {} special",
                b.b0, b.b1, b.b2, b.stem, b.buddy, b.q
            ),
            b.r_special.iter().copied(),
        ));
    }
    out.push_str(&listed("part stems", anatomy.stem_set.iter().copied()));
    out.push_str(&listed("part special", anatomy.r_special.iter().copied()));
    out.push_str(&listed(
        "part nonspecial",
        anatomy.r_nonspcl.iter().copied(),
    ));
    out.push_str(&listed("links twin", anatomy.e_twin.iter().copied()));
    out.push_str(&listed("links buddy", anatomy.e_buddy.iter().copied()));
    out.push_str(&listed("links regular", anatomy.e_reg.iter().copied()));
    out.push_str(&listed("links maximal", maximal_links(closed)));
    Ok(out)
}
