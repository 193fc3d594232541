use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fairadabn::data::{generate_synthetic, save_table};
use fairadabn::fairness::{Criterion, EoddAggregation, FateReport};
use fairadabn::harness::{
    compare_and_fate, emit_report, evaluate_predictions, gradcheck_suite, load_dataset, run_method_on, run_sweep,
    write_predictions, ExperimentConfig, Method, RunResult,
};
use fairadabn::{Error, Result};

/// Fairness-aware training experiments with attribute-adaptive batch norm.
///
/// Any config key can be overridden after the named options with
/// `--<dotted.key> <value>` or `--<dotted.key>=<value>`.
#[derive(Debug, Parser)]
#[command(name = "fairadabn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate one method (or several) over the configured seeds.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated methods; the first is the FATE baseline.
        #[arg(long)]
        methods: Option<String>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// Vanilla baseline plus FairAdaBN at each alpha.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "0.1,1.0,2.0")]
        alphas: String,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
    /// Metrics (and FATE against a baseline) from prediction files.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        num_classes: Option<usize>,
        #[arg(long, default_value = "max")]
        eodd_aggregation: String,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Finite-difference gradient checks over random model configurations.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        configs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Write the configured synthetic dataset as CSV plus its config.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
        overrides: Vec<String>,
    },
}

fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("unexpected argument `{a}`; overrides look like --key value")))?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::Config(format!("override --{key} needs a value")))?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_overrides(&parse_overrides(overrides)?)?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_outputs(cfg: &ExperimentConfig, results: &[RunResult], fates: &[(String, FateReport)]) -> Result<()> {
    let dir = cfg.resolved_output_dir();
    let files = emit_report(results, fates, cfg.report_format, &dir)?;
    let resolved = dir.join("config.resolved");
    std::fs::write(&resolved, cfg.to_text()).map_err(|e| Error::Io {
        path: resolved.clone(),
        source: e,
    })?;
    let pred_dir = dir.join("predictions");
    std::fs::create_dir_all(&pred_dir).map_err(|e| Error::Io {
        path: pred_dir.clone(),
        source: e,
    })?;
    for r in results {
        for s in &r.seeds {
            write_predictions(&s.predictions, pred_dir.join(format!("{}_seed{}.csv", r.label, s.seed)))?;
        }
    }
    print!("{}", std::fs::read_to_string(&files.summary).unwrap_or_default());
    println!("reports written to {}", dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            methods,
            overrides,
        } => {
            let cfg = load_config(Some(&config), &overrides)?;
            let methods: Vec<Method> = match methods {
                Some(m) => m.split(',').map(|s| s.trim().parse()).collect::<Result<_>>()?,
                None => vec![cfg.method],
            };
            let ds = load_dataset(&cfg)?;
            let results = methods
                .iter()
                .map(|&method| {
                    let c = ExperimentConfig { method, ..cfg.clone() };
                    run_method_on(&c, &ds, method.to_string())
                })
                .collect::<Result<Vec<_>>>()?;
            let fates = compare_and_fate(&results[0], &results[1..], cfg.fate_lambda);
            write_outputs(&cfg, &results, &fates)
        }
        Command::Sweep {
            config,
            alphas,
            overrides,
        } => {
            let cfg = load_config(Some(&config), &overrides)?;
            let alphas: Vec<f64> = alphas
                .split(',')
                .map(|a| {
                    a.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("--alphas: cannot parse `{a}`")))
                })
                .collect::<Result<_>>()?;
            let results = run_sweep(&cfg, &alphas)?;
            let fates = compare_and_fate(&results[0], &results[1..], cfg.fate_lambda);
            write_outputs(&cfg, &results, &fates)
        }
        Command::Evaluate {
            predictions,
            baseline,
            num_classes,
            eodd_aggregation,
            lambda,
        } => {
            let agg: EoddAggregation = eodd_aggregation.parse()?;
            let m = evaluate_predictions(&predictions, num_classes, agg)?;
            for (k, v) in m.to_record() {
                println!("{k} = {v:?}");
            }
            if let Some(b) = baseline {
                let b = evaluate_predictions(&b, num_classes, agg)?;
                let f = FateReport::from_means(&m, &b, lambda);
                for c in Criterion::ALL {
                    match f.get(c) {
                        Some(v) => println!("fate_{} = {v:?}", c.field()),
                        None => println!("fate_{} = n/a", c.field()),
                    }
                }
            }
            Ok(())
        }
        Command::Gradcheck {
            configs,
            seed,
            step,
            tolerance,
        } => {
            let cases = gradcheck_suite(configs, seed, step)?;
            let mut failed = 0;
            for c in &cases {
                let ok = c.result.max_relative_error < tolerance;
                failed += usize::from(!ok);
                println!(
                    "{} max_rel_err={:.3e} params={} {}",
                    if ok { "PASS" } else { "FAIL" },
                    c.result.max_relative_error,
                    c.result.checked,
                    c.description
                );
            }
            if failed > 0 {
                return Err(Error::Config(format!(
                    "{failed} of {} gradient checks exceeded {tolerance}",
                    cases.len()
                )));
            }
            Ok(())
        }
        Command::GenData { config, out, overrides } => {
            let cfg = load_config(config.as_deref(), &overrides)?;
            let ds = generate_synthetic(&cfg.synthetic)?;
            save_table(&ds, &out)?;
            let side = out.with_extension("conf");
            std::fs::write(&side, cfg.to_text()).map_err(|e| Error::Io {
                path: side.clone(),
                source: e,
            })?;
            println!(
                "wrote {} samples ({} / {} per group) to {}",
                ds.len(),
                ds.group_counts()[0],
                ds.group_counts()[1],
                out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let head: Vec<&str> = msg
                .lines()
                .map(str::trim)
                .take_while(|l| !l.is_empty() && !l.starts_with("Usage"))
                .collect();
            eprintln!("{}", head.join(" "));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
