mod config;

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ndarray::Axis;
use qsvmf::baselines::{cv_accuracy, feature_scores, select_k_best, Baseline, ScoreMethod};
use qsvmf::data::{fit_scaler, load_wdbc, Dataset};
use qsvmf::encoding::{chromosome_length, decode, Chromosome};
use qsvmf::moga::history_csv_rows;
use qsvmf::pipeline::{compare_report, default_circuit, run_qsvmf, SelectionReport, FINAL_CV_FOLDS};
use qsvmf::qsim::{gram_diagnostics, kernel_matrix, kernel_to_csv};
use serde_json::json;

use config::{ConfigArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "qsvmf", version, about = "Quantum-kernel SVM feature selection with NSGA-II")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the multi-objective selection and write report.json, history.csv, pareto.csv
    Select {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Univariate SelectKBest baseline with cross-validated classifier accuracies
    Baseline {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// chi2 or f_regression
        #[arg(long, default_value = "chi2")]
        method: String,
        #[arg(long)]
        k: usize,
    },
    /// Classifier x feature-set accuracy grid, written to compare.csv
    Compare {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Comma-separated feature indices
        #[arg(long, value_delimiter = ',', conflicts_with = "report", required_unless_present = "report")]
        features: Vec<usize>,
        /// report.json from a previous `select` run
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Dump the fidelity kernel of one chromosome to kernel.csv
    Kernel {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Chromosome as a 0/1 string
        #[arg(long)]
        chromosome: String,
        /// Row range `start..end` for the kernel rows
        #[arg(long, default_value = "0..30", value_parser = parse_range)]
        rows_a: Range<usize>,
        /// Row range for the kernel columns; defaults to rows-a
        #[arg(long, value_parser = parse_range)]
        rows_b: Option<Range<usize>>,
    },
}

fn parse_range(s: &str) -> std::result::Result<Range<usize>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected start..end, got {s:?}"))?;
    let start: usize = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
    let end: usize = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
    if start >= end {
        return Err(format!("empty range {s:?}"));
    }
    Ok(start..end)
}

/// Writes every file to a temporary sibling first and renames only after all
/// of them succeeded, so a failure leaves no partial outputs behind.
fn write_outputs(dir: &Path, files: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut staged = Vec::new();
    for (name, body) in files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = fs::write(&tmp, body) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(e).with_context(|| format!("writing {}", tmp.display()));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dst) in staged {
        fs::rename(&tmp, &dst).with_context(|| format!("renaming to {}", dst.display()))?;
    }
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    load_wdbc(&cfg.data).with_context(|| format!("loading {}", cfg.data.display()))
}

fn join(v: &[usize]) -> String {
    v.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(" ")
}

fn cmd_select(cfg: &RunConfig) -> Result<()> {
    if cfg.qubits < 2 {
        bail!("qubits must be at least 2 for selection, got {}", cfg.qubits);
    }
    let qcfg = cfg.qsvmf();
    qcfg.validate()?;
    let dataset = load(cfg)?;
    let report = run_qsvmf(&dataset, &qcfg)?;

    let header = cfg.header();
    let doc = json!({
        "provenance": { "seed": cfg.seed, "config_hash": format!("{:016x}", cfg.hash()) },
        "report": report,
    });
    let report_json = serde_json::to_string_pretty(&doc)? + "\n";

    let mut history = header.clone();
    history.push_str("fold,generation,best_accuracy,min_total_gates,min_features,min_covariance\n");
    for fold in &report.folds {
        for row in history_csv_rows(&fold.history) {
            history.push_str(&format!("{},{row}\n", fold.fold));
        }
    }

    let mut pareto = header;
    pareto.push_str("fold,bits,error_rate,local_gates,cnot_gates,n_features,covariance\n");
    for fold in &report.folds {
        for s in &fold.front {
            let o = s.objectives.0;
            pareto.push_str(&format!("{},{},{},{},{},{},{}\n", fold.fold, s.chromosome, o[0], o[1], o[2], o[3], o[4]));
        }
    }

    write_outputs(
        &cfg.out,
        &[("report.json", report_json), ("history.csv", history), ("pareto.csv", pareto)],
    )?;
    println!(
        "aggregated features [{}] (m={}), retrained accuracy {:.4}, best raw accuracy {:.4}",
        join(&report.aggregated_features),
        report.m,
        report.retrained_accuracy,
        report.best_raw_accuracy
    );
    println!("wrote {}", cfg.out.display());
    Ok(())
}

fn cmd_baseline(cfg: &RunConfig, method: &str, k: usize) -> Result<()> {
    let method: ScoreMethod = method.parse()?;
    if k == 0 {
        bail!("k must be at least 1");
    }
    let dataset = load(cfg)?;
    let scores = feature_scores(method, dataset.features.view(), &dataset.labels)?;
    let selected = select_k_best(&scores, k)?;
    let mut out = cfg.header();
    out.push_str(&format!("features,{}\nclassifier,accuracy\n", join(&selected)));
    for baseline in Baseline::ALL {
        let acc = cv_accuracy(&dataset, &selected, baseline, FINAL_CV_FOLDS, cfg.seed, cfg.smo())?;
        out.push_str(&format!("{},{acc:.4}\n", baseline.name()));
    }
    print!("{out}");
    Ok(())
}

fn read_report(path: &Path) -> Result<SelectionReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text).context("parsing report")?;
    let inner = doc.get_mut("report").map(serde_json::Value::take).unwrap_or(doc);
    serde_json::from_value(inner).context("decoding report")
}

fn cmd_compare(cfg: &RunConfig, features: &[usize], report: Option<&Path>) -> Result<()> {
    let dataset = load(cfg)?;
    let (selected, template) = match report {
        Some(path) => {
            let r = read_report(path)?;
            (r.aggregated_features.clone(), r.retrain_circuit)
        }
        None => {
            if !(1..=12).contains(&cfg.qubits) {
                bail!("qubits {} outside [1, 12]", cfg.qubits);
            }
            (features.to_vec(), default_circuit(cfg.qubits))
        }
    };
    let table = compare_report(
        &dataset,
        &selected,
        &template,
        cfg.seed,
        (cfg.scale_lo, cfg.scale_hi),
        cfg.smo(),
    )?;
    let body = cfg.header() + &table.to_csv();
    write_outputs(&cfg.out, &[("compare.csv", body.clone())])?;
    print!("{body}");
    Ok(())
}

fn cmd_kernel(cfg: &RunConfig, bits: &str, rows_a: Range<usize>, rows_b: Option<Range<usize>>) -> Result<()> {
    if !(1..=12).contains(&cfg.qubits) {
        bail!("qubits {} outside [1, 12]", cfg.qubits);
    }
    let dataset = load(cfg)?;
    let p = dataset.n_features();
    let expected = chromosome_length(p, cfg.qubits);
    if bits.len() != expected {
        bail!(
            "chromosome has {} bits, expected {expected} for {p} features and {} qubits",
            bits.len(),
            cfg.qubits
        );
    }
    let chromosome = Chromosome::from_bit_string(bits, p, cfg.qubits)?;
    let spec = decode(&chromosome, chromosome.sub_seed(cfg.seed));
    let rows_b = rows_b.unwrap_or_else(|| rows_a.clone());
    let n = dataset.n_samples();
    for r in [&rows_a, &rows_b] {
        if r.end > n {
            bail!("row range {}..{} exceeds {n} samples", r.start, r.end);
        }
    }
    let all: Vec<usize> = (0..n).collect();
    let scaler = fit_scaler(dataset.features.view(), &all, cfg.scale_lo, cfg.scale_hi)?;
    let scaled = scaler.transform(dataset.features.view())?;
    let a: Vec<usize> = rows_a.clone().collect();
    let b: Vec<usize> = rows_b.clone().collect();
    let xa = scaled.select(Axis(0), &a);
    let xb = scaled.select(Axis(0), &b);
    let k = kernel_matrix(&spec, xa.view(), xb.view())?;

    write_outputs(&cfg.out, &[("kernel.csv", cfg.header() + &kernel_to_csv(k.view()))])?;
    println!("features [{}], axis {:?}, repetitions {}", join(&spec.selected_features), spec.axis, spec.repetitions);
    if rows_a == rows_b {
        let d = gram_diagnostics(k.view())?;
        println!("max diagonal deviation {:e}", d.max_diagonal_deviation);
        println!("min eigenvalue {:e}", d.min_eigenvalue);
    } else {
        println!("rectangular kernel; diagonal and spectrum not defined");
    }
    println!("wrote {}", cfg.out.join("kernel.csv").display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Select { cfg } => {
            let cfg = RunConfig::resolve(&cfg)?;
            cfg.validate()?;
            cmd_select(&cfg)
        }
        Command::Baseline { cfg, method, k } => {
            let cfg = RunConfig::resolve(&cfg)?;
            cfg.validate()?;
            cmd_baseline(&cfg, &method, k)
        }
        Command::Compare { cfg, features, report } => {
            let cfg = RunConfig::resolve(&cfg)?;
            cfg.validate()?;
            cmd_compare(&cfg, &features, report.as_deref())
        }
        Command::Kernel { cfg, chromosome, rows_a, rows_b } => {
            let cfg = RunConfig::resolve(&cfg)?;
            cfg.validate()?;
            cmd_kernel(&cfg, &chromosome, rows_a, rows_b)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
