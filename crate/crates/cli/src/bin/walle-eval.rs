//! Batch evaluation: runs scripted trials and writes the success-rate table.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use walle_core::eval::{
    aggregate, export_report, run_trials, BackendChoice, ReportFormat, RunConfig, TrialConfig,
    TurnOrder,
};
use walle_core::scene::{Catalog, Category};
use walle_core::seed::mix;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Backend {
    Mock,
    Remote,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Order {
    Interleaved,
    Sequential,
}

#[derive(Parser, Debug)]
#[command(name = "walle-eval", about = "Run scripted grasp trials and report Ins/Vis/Grasp rates")]
struct Args {
    /// Run-config JSON (noise, gripper, workspace, llm_failure, remote).
    #[arg(long)]
    config: Option<PathBuf>,
    /// bowl, bottle, mug or all.
    #[arg(long, default_value = "all")]
    category: String,
    /// 1 to 3; every user count when omitted.
    #[arg(long)]
    users: Option<usize>,
    #[arg(long, default_value_t = 15)]
    attempts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "mock")]
    backend: Backend,
    /// Report path; `.json` selects JSON, anything else CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only draw scenes whose target is reachable and collision-free.
    #[arg(long)]
    screened: bool,
    /// Per-attempt records as JSON lines.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Overrides the run config's turn order.
    #[arg(long, value_enum)]
    turn_order: Option<Order>,
    /// Object catalog JSON; the bundled one by default.
    #[arg(long)]
    catalog: Option<PathBuf>,
}

/// Independent stream per table cell; the same cell gets the same seed
/// whether run alone or as part of a full table.
fn cell_seed(seed: u64, users: usize, category: Category) -> u64 {
    let index = Category::ALL.iter().position(|c| *c == category).unwrap_or(0);
    mix(mix(seed, users as u64), index as u64)
}

fn main() -> Result<()> {
    let args = Args::parse();
    let run = match &args.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    let catalog = match &args.catalog {
        Some(p) => walle_core::scene::load_catalog(p).with_context(|| format!("loading {}", p.display()))?,
        None => Catalog::bundled(),
    };
    let categories: Vec<Category> = if args.category.eq_ignore_ascii_case("all") {
        vec![Category::Bowl, Category::Bottle, Category::Mug]
    } else {
        match args.category.parse() {
            Ok(c) => vec![c],
            Err(()) => bail!("unknown category {:?}", args.category),
        }
    };
    let user_counts: Vec<usize> = match args.users {
        Some(n) if (1..=3).contains(&n) => vec![n],
        Some(n) => bail!("--users must be 1, 2 or 3, got {n}"),
        None => vec![1, 2, 3],
    };
    let backend = match args.backend {
        Backend::Mock => BackendChoice::Mock,
        Backend::Remote => BackendChoice::Remote(run.remote.clone().unwrap_or_default()),
    };

    let mut records = Vec::new();
    for &users in &user_counts {
        for &category in &categories {
            let mut cfg = TrialConfig::from_run_config(&run, category, users);
            cfg.attempts = args.attempts;
            cfg.seed = cell_seed(args.seed, users, category);
            cfg.screened = args.screened;
            cfg.backend = backend.clone();
            if let Some(order) = args.turn_order {
                cfg.turn_order = match order {
                    Order::Interleaved => TurnOrder::Interleaved,
                    Order::Sequential => TurnOrder::Sequential,
                };
            }
            let batch = run_trials(&cfg, &catalog).with_context(|| format!("{users} user(s), {category}"))?;
            records.extend(batch);
        }
    }

    if let Some(path) = &args.records {
        let lines: Vec<String> = records
            .iter()
            .map(serde_json::to_string)
            .collect::<Result<_, _>>()?;
        std::fs::write(path, lines.join("\n") + "\n").with_context(|| format!("writing {}", path.display()))?;
    }

    let table = aggregate(&records)?;
    print!("{}", table.render());
    let mut outcomes: BTreeMap<String, usize> = BTreeMap::new();
    for r in &records {
        *outcomes.entry(r.outcome.clone().unwrap_or_else(|| "not executed".into())).or_default() += 1;
    }
    eprintln!("outcomes: {outcomes:?}");
    if let Some(path) = &args.out {
        export_report(&table, ReportFormat::from_path(path), path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}
