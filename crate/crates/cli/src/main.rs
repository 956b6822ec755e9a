use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hillnls::config::RunConfig;
use hillnls::report::{compare, report};
use hillnls::run::{execute, locate, output_root, RunRecord};
use hillnls::scenario::{find, presets};

const EXIT_EXPECTATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "hillnls", version, about = "Spectral laboratory for NLS with time-dependent harmonic potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; replaces the scenario argument.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Dotted override such as `time.dt=5e-4`. Repeatable. In `sweep`, a
    /// comma-separated value list expands into one run per value.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output root; defaults to $HILLNLS_OUT, then ./hillnls-out.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Portable scalar FFT kernels for bit-reproducible output across hosts.
    #[arg(long, global = true)]
    strict_fp: bool,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// List the preset scenarios.
    List,
    /// Run one scenario or configuration file.
    Run { scenario: Option<String> },
    /// Summarize a run and write SVG plots; two ids produce a comparison.
    Report {
        #[arg(required = true, num_args = 1..=2)]
        runs: Vec<String>,
    },
    /// Run several scenarios, or a grid of override values, in parallel.
    Sweep { scenarios: Vec<String> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn load_base(cli: &Cli, scenario: Option<&str>) -> Result<RunConfig, String> {
    match (&cli.config, scenario) {
        (Some(_), Some(_)) => Err("give either a scenario name or --config, not both".into()),
        (Some(path), None) => RunConfig::from_path(path).map_err(|e| e.to_string()),
        (None, Some(name)) => find(name).map(|s| s.config).map_err(|e| e.to_string()),
        (None, None) => Err("a scenario name or --config is required".into()),
    }
}

fn prepare(base: &RunConfig, overrides: &[String]) -> Result<RunConfig, String> {
    let cfg = base.with_overrides(overrides).map_err(|e| e.to_string())?;
    cfg.resolve().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn record_exit(r: &RunRecord) -> u8 {
    if r.failed() {
        EXIT_NUMERICAL
    } else if r.summary.passed {
        0
    } else {
        EXIT_EXPECTATION
    }
}

fn print_records(records: &[(String, RunRecord)], format: Format) {
    match format {
        Format::Json => {
            let all: Vec<_> = records.iter().map(|(_, r)| &r.summary).collect();
            let value = if all.len() == 1 { serde_json::to_value(all[0]) } else { serde_json::to_value(&all) };
            println!("{}", serde_json::to_string_pretty(&value.expect("summary serializes")).unwrap());
        }
        Format::Csv => {
            println!("run_id,name,overrides,completed,passed,dir");
            for (label, r) in records {
                println!(
                    "{},{},{},{},{},{}",
                    r.id,
                    csv_cell(&r.summary.name),
                    csv_cell(label),
                    r.summary.completed,
                    r.summary.passed,
                    csv_cell(&r.dir.display().to_string())
                );
            }
        }
    }
}

fn list(format: Format) -> u8 {
    let all = presets();
    match format {
        Format::Json => {
            let v: Vec<_> = all
                .iter()
                .map(|s| serde_json::json!({ "name": s.name, "description": s.description }))
                .collect();
            println!("{}", serde_json::to_string_pretty(&v).unwrap());
        }
        Format::Csv => {
            println!("name,description");
            for s in &all {
                println!("{},{}", s.name, csv_cell(s.description));
            }
        }
    }
    0
}

fn run(cli: &Cli, scenario: Option<&str>) -> u8 {
    let cfg = match load_base(cli, scenario).and_then(|b| prepare(&b, &cli.set)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let root = output_root(cli.out.as_deref());
    match execute(&cfg, &root, cli.strict_fp) {
        Ok(r) => {
            for o in &r.summary.expectations {
                eprintln!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.expectation, o.detail);
            }
            if let Some(f) = &r.summary.failure {
                eprintln!("numerical failure: {f}");
            }
            let code = record_exit(&r);
            print_records(&[(String::new(), r)], cli.format);
            code
        }
        Err(e) => {
            eprintln!("numerical failure: {e}");
            EXIT_NUMERICAL
        }
    }
}

fn report_cmd(cli: &Cli, runs: &[String]) -> u8 {
    let root = output_root(cli.out.as_deref());
    let dirs: Result<Vec<PathBuf>, _> = runs.iter().map(|id| locate(&root, id)).collect();
    let dirs = match dirs {
        Ok(d) => d,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let (result, target) = if dirs.len() == 2 {
        let name = format!(
            "{}--{}",
            dirs[0].file_name().unwrap_or_default().to_string_lossy(),
            dirs[1].file_name().unwrap_or_default().to_string_lossy()
        );
        (compare(&dirs[0], &dirs[1]), root.join("reports").join(name))
    } else {
        (report(&dirs[0]), dirs[0].join("report"))
    };
    let rep = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG;
        }
    };
    let written = match rep.write_svgs(&target) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_NUMERICAL;
        }
    };
    match cli.format {
        Format::Json => {
            let svgs: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
            println!("{}", serde_json::to_string_pretty(&serde_json::json!({ "text": rep.text, "svg": svgs })).unwrap());
        }
        Format::Csv => {
            print!("{}", rep.text);
            for p in &written {
                println!("svg,{}", p.display());
            }
        }
    }
    0
}

/// Expands `key=a,b,c` overrides into the Cartesian product of single overrides.
fn expand(set: &[String]) -> Vec<Vec<String>> {
    let mut combos: Vec<Vec<String>> = vec![Vec::new()];
    for item in set {
        let (key, values) = item.split_once('=').unwrap_or((item.as_str(), ""));
        // Bracketed TOML arrays are a single value, not a list.
        let choices: Vec<&str> = if values.trim_start().starts_with('[') { vec![values] } else { values.split(',').collect() };
        combos = combos
            .into_iter()
            .flat_map(|c| {
                choices.iter().map(move |v| {
                    let mut next = c.clone();
                    next.push(format!("{key}={}", v.trim()));
                    next
                })
            })
            .collect();
    }
    combos
}

fn sweep(cli: &Cli, scenarios: &[String]) -> u8 {
    let bases: Result<Vec<RunConfig>, String> = if scenarios.is_empty() {
        load_base(cli, None).map(|b| vec![b])
    } else if cli.config.is_some() {
        Err("give either scenario names or --config, not both".into())
    } else if scenarios.len() == 1 && scenarios[0] == "all" {
        Ok(presets().into_iter().map(|s| s.config).collect())
    } else {
        scenarios.iter().map(|n| load_base(cli, Some(n))).collect()
    };
    let mut jobs = Vec::new();
    let prepared = bases.and_then(|bases| {
        for base in &bases {
            for combo in expand(&cli.set) {
                jobs.push((combo.join(" "), prepare(base, &combo)?));
            }
        }
        Ok(())
    });
    if let Err(e) = prepared {
        eprintln!("config error: {e}");
        return EXIT_CONFIG;
    }
    let root = output_root(cli.out.as_deref());
    let workers = if cli.strict_fp { 1 } else { std::thread::available_parallelism().map_or(1, |n| n.get()) };
    let results = run_parallel(&jobs, &root, cli.strict_fp, workers);
    let mut records = Vec::new();
    let mut code = 0;
    for ((label, _), result) in jobs.iter().zip(results) {
        match result {
            Ok(r) => {
                code = code.max(record_exit(&r));
                records.push((label.clone(), r));
            }
            Err(e) => {
                eprintln!("numerical failure ({label}): {e}");
                code = EXIT_NUMERICAL;
            }
        }
    }
    print_records(&records, cli.format);
    code
}

/// Each job writes its own run directory; results keep the job order.
fn run_parallel(
    jobs: &[(String, RunConfig)],
    root: &Path,
    strict_fp: bool,
    workers: usize,
) -> Vec<hillnls::Result<RunRecord>> {
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<std::sync::Mutex<Option<hillnls::Result<RunRecord>>>> =
        jobs.iter().map(|_| std::sync::Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(jobs.len()).max(1) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if k >= jobs.len() {
                    break;
                }
                let r = execute(&jobs[k].1, root, strict_fp);
                *slots[k].lock().unwrap() = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every job ran")).collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::List => list(cli.format),
        Command::Run { scenario } => run(&cli, scenario.as_deref()),
        Command::Report { runs } => report_cmd(&cli, runs),
        Command::Sweep { scenarios } => sweep(&cli, scenarios),
    };
    ExitCode::from(code)
}
