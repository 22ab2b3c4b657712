//! Command-line front end: single runs, multi-seed sweeps, and the two
//! report subcommands (`table1` for the method-by-dataset grid, `fig5` for
//! the walk-length ablation sweep).
//!
//! Exit codes: 0 success, 1 configuration error (bad flags, bad config
//! file), 2 runtime failure.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::config::{ConfigOverlay, DatasetKind, ExperimentConfig, Method};
use crate::error::{Error, Result};
use crate::trainer::{run_experiment, RunOutcome};

const USAGE: &str = "\
usage: gedi [SUBCOMMAND] [FLAGS]

single run / seed sweep:
  --config <path>    config file ([section] headers, key = value lines)
  --dataset <name>   moons | circles
  --method <name>    jem | swav | gedi | gedi_no_nf | gedi_no_nf_no_stage1 | gedi_no_nf_2enc
  --seed <n>         run seed (default 0)
  --seeds <k>        run k consecutive seeds starting at --seed and report
                     mean and standard deviation of the test NMI
  --out <dir>        output directory (default 'out')
  --dam-steps <t>    override the number of augmentation-walk moves

subcommands:
  table1             run the six (dataset x {jem, swav, gedi}) cells over
                     --seeds seeds (default 5) and print a Markdown table
  fig5               run the walk-length sweep; flags: --dataset, --seeds,
                     --t-values <a,b,..> (default 1,2,5,8,10),
                     --variants <v,..> (default the four joint variants)
";

/// Entry point used by the binary; returns the process exit code.
pub fn cli_main(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Format { .. } => 1,
                Error::Io { .. } => 1,
                _ => 2,
            }
        }
    }
}

fn dispatch(args: &[String]) -> Result<()> {
    if args.first().map(String::as_str) == Some("--help") || args.first().map(String::as_str) == Some("-h") {
        print!("{USAGE}");
        return Ok(());
    }
    match args.first().map(String::as_str) {
        Some("table1") => table1(&args[1..]),
        Some("fig5") => fig5(&args[1..]),
        Some(flag) if flag.starts_with("--") => single_or_sweep(args),
        Some(other) => Err(Error::Config(format!("unknown subcommand '{other}'\n{USAGE}"))),
        None => Err(Error::Config(format!("no arguments\n{USAGE}"))),
    }
}

/// Parsed `--flag value` pairs.
struct Flags {
    values: BTreeMap<String, String>,
}

impl Flags {
    fn parse(args: &[String], allowed: &[&str]) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut i = 0;
        while i < args.len() {
            let flag = args[i]
                .strip_prefix("--")
                .ok_or_else(|| Error::Config(format!("expected a --flag, got '{}'", args[i])))?;
            if !allowed.contains(&flag) {
                return Err(Error::Config(format!("unknown flag '--{flag}'\n{USAGE}")));
            }
            let value = args
                .get(i + 1)
                .ok_or_else(|| Error::Config(format!("--{flag} needs a value")))?;
            values.insert(flag.to_string(), value.clone());
            i += 2;
        }
        Ok(Flags { values })
    }

    fn get(&self, flag: &str) -> Option<&str> {
        self.values.get(flag).map(String::as_str)
    }

    fn get_parsed<T: std::str::FromStr>(&self, flag: &str) -> Result<Option<T>> {
        match self.get(flag) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("--{flag}: cannot parse '{v}'"))),
        }
    }
}

fn overlay_from_flags(flags: &Flags) -> Result<ConfigOverlay> {
    let mut overlay = match flags.get("config") {
        Some(path) => ConfigOverlay::load(Path::new(path))?,
        None => ConfigOverlay::default(),
    };
    if let Some(d) = flags.get("dataset") {
        overlay.set("run", "dataset", d);
    }
    if let Some(m) = flags.get("method") {
        overlay.set("run", "method", m);
    }
    if let Some(s) = flags.get("seed") {
        overlay.set("run", "seed", s);
    }
    if let Some(o) = flags.get("out") {
        overlay.set("run", "out", o);
    }
    if let Some(t) = flags.get("dam-steps") {
        overlay.set("dam", "steps", t);
    }
    Ok(overlay)
}

fn single_or_sweep(args: &[String]) -> Result<()> {
    let flags =
        Flags::parse(args, &["config", "dataset", "method", "seed", "seeds", "out", "dam-steps"])?;
    let overlay = overlay_from_flags(&flags)?;
    let base = overlay.resolve(None, None, None)?;
    let seeds: u64 = flags.get_parsed("seeds")?.unwrap_or(1);
    if seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }

    let mut configs = Vec::new();
    for k in 0..seeds {
        let mut cfg = base.clone();
        cfg.seed = base.seed + k;
        if seeds > 1 {
            cfg.out = base.out.join(format!("seed{}", cfg.seed));
        }
        configs.push(cfg);
    }
    let outcomes = run_parallel(&configs)?;
    let nmis: Vec<f64> = outcomes.iter().map(|o| o.nmi).collect();
    for (cfg, o) in configs.iter().zip(&outcomes) {
        println!(
            "run: method={} dataset={} seed={} nmi={:.4} acc={:.4} -> {}",
            cfg.method.name(),
            cfg.dataset.name(),
            cfg.seed,
            o.nmi,
            o.acc,
            cfg.out.display()
        );
    }
    let (mean, std) = mean_std(&nmis);
    println!("\nmethod      dataset   mean NMI  std");
    println!(
        "{:<11} {:<9} {:.4}    {:.4}",
        base.method.name(),
        base.dataset.name(),
        mean,
        std
    );
    Ok(())
}

fn table1(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["out", "seeds", "config"])?;
    let overlay = base_overlay(&flags)?;
    let out = PathBuf::from(flags.get("out").unwrap_or("out"));
    let seeds: u64 = flags.get_parsed("seeds")?.unwrap_or(5);
    let datasets = [DatasetKind::Moons, DatasetKind::Circles];
    let methods = [Method::Jem, Method::Swav, Method::Gedi];

    let mut configs = Vec::new();
    for ds in datasets {
        for m in methods {
            for seed in 0..seeds {
                let mut cfg = resolve_cell(&overlay, ds, m, seed)?;
                cfg.out = out.join(format!("table1/{}-{}-seed{}", ds.name(), m.name(), seed));
                configs.push(cfg);
            }
        }
    }
    let outcomes = run_parallel(&configs)?;

    let mut table = String::from("| Dataset | JEM | SwAV | GEDI |\n|---|---|---|---|\n");
    let mut idx = 0;
    for ds in datasets {
        let mut cells = Vec::new();
        for _ in methods {
            let nmis: Vec<f64> = outcomes[idx..idx + seeds as usize].iter().map(|o| o.nmi).collect();
            idx += seeds as usize;
            let (mean, std) = mean_std(&nmis);
            cells.push(format!("{mean:.2}±{std:.2}"));
        }
        let name = match ds {
            DatasetKind::Moons => "Moons",
            DatasetKind::Circles => "Circles",
        };
        table.push_str(&format!("| {name} | {} | {} | {} |\n", cells[0], cells[1], cells[2]));
    }
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    std::fs::write(out.join("table1.md"), &table).map_err(|e| Error::io(out.join("table1.md"), e))?;
    print!("{table}");
    Ok(())
}

fn fig5(args: &[String]) -> Result<()> {
    let flags = Flags::parse(args, &["out", "seeds", "dataset", "t-values", "variants", "config"])?;
    let overlay = base_overlay(&flags)?;
    let out = PathBuf::from(flags.get("out").unwrap_or("out"));
    let seeds: u64 = flags.get_parsed("seeds")?.unwrap_or(5);
    let datasets: Vec<DatasetKind> = match flags.get("dataset") {
        None | Some("both") => vec![DatasetKind::Moons, DatasetKind::Circles],
        Some(s) => vec![DatasetKind::parse(s)?],
    };
    let t_values: Vec<usize> = match flags.get("t-values") {
        None => vec![1, 2, 5, 8, 10],
        Some(s) => s
            .split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("--t-values: cannot parse '{v}'")))
            })
            .collect::<Result<_>>()?,
    };
    let variants: Vec<Method> = match flags.get("variants") {
        None => vec![Method::Gedi, Method::GediNoNf, Method::GediNoNfNoStage1, Method::GediNoNf2Enc],
        Some(s) => s.split(',').map(|v| Method::parse(v.trim())).collect::<Result<_>>()?,
    };

    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    for ds in &datasets {
        let mut configs = Vec::new();
        let mut keys = Vec::new();
        for &method in &variants {
            for &t in &t_values {
                for seed in 0..seeds {
                    let mut cfg = resolve_cell(&overlay, *ds, method, seed)?;
                    cfg.dam.steps = t;
                    cfg.out = out.join(format!(
                        "fig5/{}-{}-t{}-seed{}",
                        ds.name(),
                        method.name(),
                        t,
                        seed
                    ));
                    configs.push(cfg);
                    keys.push((method, t, seed));
                }
            }
        }
        let outcomes = run_parallel(&configs)?;
        let mut csv = String::from("variant,t,seed,nmi\n");
        for ((method, t, seed), o) in keys.iter().zip(&outcomes) {
            csv.push_str(&format!("{},{},{},{}\n", method.name(), t, seed, o.nmi));
        }
        let path = out.join(format!("fig5_{}.csv", ds.name()));
        std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
        println!("# {}", ds.name());
        for &method in &variants {
            for &t in &t_values {
                let nmis: Vec<f64> = keys
                    .iter()
                    .zip(&outcomes)
                    .filter(|((m, tv, _), _)| *m == method && *tv == t)
                    .map(|(_, o)| o.nmi)
                    .collect();
                let (mean, std) = mean_std(&nmis);
                println!("{:<22} T={:<3} NMI {mean:.3} ± {std:.3}", method.name(), t);
            }
        }
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn base_overlay(flags: &Flags) -> Result<ConfigOverlay> {
    match flags.get("config") {
        Some(path) => ConfigOverlay::load(Path::new(path)),
        None => Ok(ConfigOverlay::default()),
    }
}

fn resolve_cell(
    overlay: &ConfigOverlay,
    dataset: DatasetKind,
    method: Method,
    seed: u64,
) -> Result<ExperimentConfig> {
    let mut overlay = overlay.clone();
    overlay.set("run", "dataset", dataset.name());
    overlay.set("run", "method", method.name());
    overlay.set("run", "seed", seed.to_string());
    overlay.resolve(None, None, None)
}

/// Run experiments across the available cores. Each run is internally
/// deterministic, so scheduling cannot change any result; outputs come back
/// in input order.
pub fn run_parallel(configs: &[ExperimentConfig]) -> Result<Vec<RunOutcome>> {
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let workers = workers.min(configs.len()).max(1);
    let next = Mutex::new(0usize);
    let slots: Vec<Mutex<Option<Result<RunOutcome>>>> =
        configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = {
                    let mut guard = next.lock().unwrap();
                    let j = *guard;
                    if j >= configs.len() {
                        break;
                    }
                    *guard += 1;
                    j
                };
                let outcome = run_experiment(&configs[job]);
                *slots[job].lock().unwrap() = Some(outcome);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("worker completed every job"))
        .collect()
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flags_and_methods_are_config_errors() {
        assert_eq!(cli_main(&["--bogus".to_string(), "1".to_string()]), 1);
        let args: Vec<String> =
            ["--dataset", "moons", "--method", "definitely_not_a_method", "--seed", "0"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        assert_eq!(cli_main(&args), 1);
    }

    #[test]
    fn help_succeeds() {
        assert_eq!(cli_main(&["--help".to_string()]), 0);
    }

    #[test]
    fn mean_std_matches_hand_values() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-12);
        assert!((s - (1.25f64).sqrt()).abs() < 1e-12);
    }
}
