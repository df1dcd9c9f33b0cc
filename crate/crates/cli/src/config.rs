//! Run configuration: defaults, a flat `key = value` file, and flag overrides.

use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use qsvmf::moga::GaConfig;
use qsvmf::pipeline::QsvmfConfig;
use qsvmf::svm::SmoParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub qubits: usize,
    pub pop: usize,
    pub gens: usize,
    pub pc: f64,
    pub pm: f64,
    pub folds: usize,
    pub seed: u64,
    pub restarts: usize,
    pub svm_c: f64,
    pub out: PathBuf,
    pub scale_lo: f64,
    pub scale_hi: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("data/wdbc.data"),
            qubits: 4,
            pop: 100,
            gens: 100,
            pc: 0.2,
            pm: 0.2,
            folds: 5,
            seed: 0,
            restarts: 1,
            svm_c: 1.0,
            out: PathBuf::from("out"),
            scale_lo: 0.0,
            scale_hi: PI,
        }
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat key=value config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub qubits: Option<usize>,
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub gens: Option<usize>,
    #[arg(long)]
    pub pc: Option<f64>,
    #[arg(long)]
    pub pm: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long = "svm-c")]
    pub svm_c: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long = "scale-lo")]
    pub scale_lo: Option<f64>,
    #[arg(long = "scale-hi")]
    pub scale_hi: Option<f64>,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow::anyhow!("config line {line}: bad value {value:?} for {key}: {e}"))
}

impl RunConfig {
    /// Apply `key = value` lines. Blank lines and `#` comments are ignored.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                bail!("config line {line}: expected key = value");
            };
            let key = key.trim().replace('_', "-");
            let value = value.trim();
            match key.as_str() {
                "data" => self.data = PathBuf::from(value),
                "qubits" => self.qubits = parse_value(&key, value, line)?,
                "pop" => self.pop = parse_value(&key, value, line)?,
                "gens" => self.gens = parse_value(&key, value, line)?,
                "pc" => self.pc = parse_value(&key, value, line)?,
                "pm" => self.pm = parse_value(&key, value, line)?,
                "folds" => self.folds = parse_value(&key, value, line)?,
                "seed" => self.seed = parse_value(&key, value, line)?,
                "restarts" => self.restarts = parse_value(&key, value, line)?,
                "svm-c" => self.svm_c = parse_value(&key, value, line)?,
                "out" => self.out = PathBuf::from(value),
                "scale-lo" => self.scale_lo = parse_value(&key, value, line)?,
                "scale-hi" => self.scale_hi = parse_value(&key, value, line)?,
                other => bail!("config line {line}: unknown key {other:?}"),
            }
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, args: &ConfigArgs) {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = &args.$f { self.$f = v.clone(); } )* };
        }
        take!(data, qubits, pop, gens, pc, pm, folds, seed, restarts, svm_c, out, scale_lo, scale_hi);
    }

    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(path) = &args.config {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_file_text(&text)?;
        }
        cfg.apply_flags(args);
        Ok(cfg)
    }

    /// Checks shared by all commands. Qubit limits are command-specific.
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            bail!("folds must be at least 2, got {}", self.folds);
        }
        if !(self.scale_lo.is_finite() && self.scale_hi.is_finite() && self.scale_lo < self.scale_hi) {
            bail!("scale range [{}, {}] is empty", self.scale_lo, self.scale_hi);
        }
        if !(self.svm_c.is_finite() && self.svm_c > 0.0) {
            bail!("svm-c must be positive, got {}", self.svm_c);
        }
        Ok(())
    }

    pub fn qsvmf(&self) -> QsvmfConfig {
        QsvmfConfig {
            ga: GaConfig {
                population: self.pop,
                generations: self.gens,
                crossover_prob: self.pc,
                mutation_prob: self.pm,
                seed: self.seed,
                restarts: self.restarts,
                ..GaConfig::default()
            },
            n_qubits: self.qubits,
            k_folds: self.folds,
            seed: self.seed,
            svm: self.smo(),
            scale_lo: self.scale_lo,
            scale_hi: self.scale_hi,
        }
    }

    pub fn smo(&self) -> SmoParams {
        SmoParams { c: self.svm_c, ..SmoParams::default() }
    }

    /// Canonical text form; the output directory is excluded so moving
    /// outputs does not change the hash.
    pub fn canonical(&self) -> String {
        format!(
            "data={}\nqubits={}\npop={}\ngens={}\npc={:?}\npm={:?}\nfolds={}\nseed={}\nrestarts={}\nsvm-c={:?}\nscale-lo={:?}\nscale-hi={:?}\n",
            self.data.display(),
            self.qubits,
            self.pop,
            self.gens,
            self.pc,
            self.pm,
            self.folds,
            self.seed,
            self.restarts,
            self.svm_c,
            self.scale_lo,
            self.scale_hi
        )
    }

    pub fn hash(&self) -> u64 {
        qsvmf::fnv1a(self.canonical().as_bytes())
    }

    pub fn header(&self) -> String {
        format!("# seed={} config_hash={:016x}\n", self.seed, self.hash())
    }
}
