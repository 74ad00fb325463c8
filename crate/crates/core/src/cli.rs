//! The `loopsoup` command line tool.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde_json::json;

use crate::error::{Error, Result};
use crate::exact::n_point_function;
use crate::experiments::{run_experiment, ExperimentConfig, CATALOG};
use crate::fields::{cutoff_winding_field, occupation_field, spin_field, winding_field};
use crate::io::{params, write_face_field, write_loops_jsonl, write_results_csv, write_vertex_field, FieldValues, Manifest, ResultRow};
use crate::lattice::{DiscreteDomain, DomainSpec, Face};
use crate::sampler::{set_power_cache_dir, DgffSampler, DualitySampler, IsingMethod, SoupMethod, SoupSampler};

#[derive(Parser, Debug)]
#[command(name = "loopsoup", version, about = "Random walk loop soups and their winding spin fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact n-point spin correlation from twisted determinants.
    ExactNpoint(Common),
    /// Run a catalog experiment (see `loopsoup list`).
    Experiment {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Print the experiment catalog.
    List {
        #[arg(long)]
        json: bool,
    },
    /// Sample one loop soup and write its loops as JSON lines.
    SampleSoup {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
    },
    /// Sample one field and write it as CSV.
    SampleField {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "spin")]
        field: FieldKind,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Auto,
    Bridge,
    Excursion,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FieldKind {
    /// σ(z) = (-1)^{total winding}
    Spin,
    /// Total winding number
    Winding,
    /// exp(iβ N^δ(z)) over loops of diameter > δ
    Cutoff,
    /// Occupation time per vertex
    Occupation,
    /// Discrete Gaussian free field per vertex
    Dgff,
    /// λ = 1/2 spins from the DGFF and an exact Ising draw
    Ising,
    /// λ = 1/2 spins from DGFF sign clusters and coin flips
    Coins,
}

/// Flags shared by the commands. Values given here override `--config`.
#[derive(Args, Debug, Default)]
pub struct Common {
    /// Domain: `square:N`, `rect:WxH`, `disk:R`, `faces:x,y;x,y` or JSON.
    #[arg(long)]
    pub domain: Option<DomainSpec>,
    /// Faces as `x,y` (repeatable), or `WxH` for a rectangular domain.
    #[arg(long, num_args = 1..)]
    pub faces: Vec<String>,
    #[arg(long, num_args = 1..)]
    pub mesh: Vec<f64>,
    #[arg(long, num_args = 1..)]
    pub lambda: Vec<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, num_args = 1..)]
    pub delta: Vec<f64>,
    #[arg(long, num_args = 1..)]
    pub r: Vec<f64>,
    /// Sample count (instances or face bound for some experiments).
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file; a manifest is written next to CSV outputs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with the same keys as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
}

fn some_vec(v: &[f64]) -> Option<Vec<f64>> {
    (!v.is_empty()).then(|| v.to_vec())
}

impl Common {
    /// The config file (if any) overlaid with the flags.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let file = match &self.config {
            Some(path) => serde_json::from_reader(File::open(path)?)?,
            None => ExperimentConfig::default(),
        };
        let mut flags = ExperimentConfig {
            domain: self.domain.clone(),
            mesh: some_vec(&self.mesh),
            lambda: some_vec(&self.lambda),
            kappa: self.kappa,
            beta: self.beta,
            alpha: self.alpha,
            delta: some_vec(&self.delta),
            r: some_vec(&self.r),
            n: self.n,
            seed: self.seed,
            threads: self.threads,
            out: self.out.clone(),
            ..Default::default()
        };
        match self.faces.as_slice() {
            [] => {}
            [one] if one.contains('x') => {
                let spec: DomainSpec = format!("rect:{one}").parse()?;
                flags.domain = flags.domain.or(Some(spec));
            }
            many => {
                let faces = many.iter().map(|s| s.parse::<Face>()).collect::<Result<Vec<_>>>()?;
                flags.faces = Some(faces.iter().map(|f| [f.x, f.y]).collect());
            }
        }
        Ok(file.merged(flags))
    }
}

fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn finish(command: &str, cfg: &ExperimentConfig, extra: serde_json::Value, checks: serde_json::Value) -> Result<()> {
    if let Some(out) = &cfg.out {
        let mut config = serde_json::to_value(cfg)?;
        if let (Some(obj), Some(more)) = (config.as_object_mut(), extra.as_object()) {
            obj.insert("resolved".into(), serde_json::Value::Object(more.clone()));
        }
        let mut m = Manifest::new(command, config);
        m.outputs.push(out.display().to_string());
        m.checks = checks;
        m.write(BufWriter::new(File::create(manifest_path(out))?))?;
    }
    Ok(())
}

fn require_domain(cfg: &ExperimentConfig) -> Result<DiscreteDomain> {
    let spec = cfg
        .domain
        .clone()
        .ok_or_else(|| Error::param("--domain is required"))?;
    let spec = match cfg.mesh.as_ref().and_then(|m| m.first()) {
        Some(&m) => spec.with_mesh(m),
        None => spec,
    };
    DiscreteDomain::from_spec(&spec)
}

fn exact_npoint(cfg: &ExperimentConfig, json_out: bool) -> Result<()> {
    let d = require_domain(cfg)?;
    let faces: Vec<Face> = cfg
        .faces
        .as_ref()
        .ok_or_else(|| Error::param("--faces is required"))?
        .iter()
        .map(|&[x, y]| Face::new(x, y))
        .collect();
    let lambdas = cfg.lambda.clone().ok_or_else(|| Error::param("--lambda is required"))?;
    let kappa = cfg.kappa.unwrap_or(0.0);
    let label = faces.iter().map(Face::to_string).collect::<Vec<_>>().join(" ");
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            let v = n_point_function(&d, &faces, lambda, kappa)?;
            let p = params([
                ("domain", cfg.domain.as_ref().unwrap().to_string()),
                ("faces", label.clone()),
                ("lambda", lambda.to_string()),
                ("kappa", kappa.to_string()),
            ]);
            Ok(ResultRow::exact("exact-npoint", "npoint", p, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut w = open_out(&cfg.out)?;
    if json_out {
        serde_json::to_writer_pretty(&mut w, &rows)?;
        writeln!(w)?;
    } else {
        write_results_csv(&mut w, &rows)?;
    }
    w.flush()?;
    finish("exact-npoint", cfg, json!({"kappa": kappa}), serde_json::Value::Null)
}

fn experiment(name: &str, cfg: &ExperimentConfig, json_out: bool) -> Result<()> {
    let out = run_experiment(name, cfg)?;
    let mut w = open_out(&cfg.out)?;
    if json_out {
        serde_json::to_writer_pretty(&mut w, &out)?;
        writeln!(w)?;
    } else {
        write_results_csv(&mut w, &out.rows)?;
    }
    w.flush()?;
    for c in &out.checks {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    finish(&format!("experiment {name}"), cfg, out.resolved.clone(), serde_json::to_value(&out.checks)?)
}

fn list(json_out: bool) -> Result<()> {
    let mut w = BufWriter::new(io::stdout().lock());
    if json_out {
        serde_json::to_writer_pretty(&mut w, &CATALOG)?;
        writeln!(w)?;
    } else {
        for e in CATALOG {
            writeln!(w, "{:<22} {:<4} {}\n{:27}{}", e.name, e.criterion, e.summary, "", e.anchor)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn sample_soup(cfg: &ExperimentConfig, method: MethodArg) -> Result<()> {
    let d = require_domain(cfg)?;
    let method = match method {
        MethodArg::Auto => SoupMethod::Auto,
        MethodArg::Bridge => SoupMethod::Bridge,
        MethodArg::Excursion => SoupMethod::Excursion,
    };
    let lambda = cfg.lambda.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.5);
    let seed = cfg.seed.unwrap_or(crate::experiments::DEFAULT_SEED);
    let sampler = SoupSampler::new(&d, cfg.kappa.unwrap_or(0.0), method)?;
    let soup = sampler.sample(lambda, seed, 0)?;
    let mut w = open_out(&cfg.out)?;
    write_loops_jsonl(&mut w, &soup.loops)?;
    w.flush()?;
    finish(
        "sample-soup",
        cfg,
        json!({"lambda": lambda, "seed": seed, "method": format!("{:?}", sampler.method()), "loops": soup.len()}),
        serde_json::Value::Null,
    )
}

fn sample_field(cfg: &ExperimentConfig, kind: FieldKind) -> Result<()> {
    let d = require_domain(cfg)?;
    let lambda = cfg.lambda.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.5);
    let kappa = cfg.kappa.unwrap_or(0.0);
    let seed = cfg.seed.unwrap_or(crate::experiments::DEFAULT_SEED);
    let mut w = open_out(&cfg.out)?;
    let soup = || SoupSampler::new(&d, kappa, SoupMethod::Auto)?.sample(lambda, seed, 0);
    let widen = |v: Vec<i8>| v.into_iter().map(i64::from).collect::<Vec<i64>>();
    match kind {
        FieldKind::Spin => write_face_field(&mut w, &d, &FieldValues::Integer(&widen(spin_field(&d, &soup()?).values)))?,
        FieldKind::Winding => write_face_field(&mut w, &d, &FieldValues::Integer(&winding_field(&d, &soup()?.loops).values))?,
        FieldKind::Cutoff => {
            let beta = cfg.beta.unwrap_or(std::f64::consts::PI);
            let delta = cfg.delta.as_ref().and_then(|v| v.first().copied()).unwrap_or(0.0);
            let f = cutoff_winding_field(&d, &soup()?, beta, delta)?;
            let values: Vec<Complex64> = f.values;
            write_face_field(&mut w, &d, &FieldValues::Complex(&values))?
        }
        FieldKind::Occupation => write_vertex_field(&mut w, &d, &FieldValues::Real(&occupation_field(&d, &soup()?, seed)?.values))?,
        FieldKind::Dgff => write_vertex_field(&mut w, &d, &FieldValues::Real(&DgffSampler::new(&d)?.sample(seed, 0, 0).values))?,
        FieldKind::Ising => {
            let method = if d.face_count() <= crate::sampler::MAX_EXACT_ISING_FACES { IsingMethod::Exact } else { IsingMethod::Wolff };
            write_face_field(&mut w, &d, &FieldValues::Integer(&widen(DualitySampler::new(&d)?.ising(seed, 0, method)?)))?
        }
        FieldKind::Coins => write_face_field(&mut w, &d, &FieldValues::Integer(&widen(DualitySampler::new(&d)?.coins(seed, 0))))?,
    }
    w.flush()?;
    finish(
        "sample-field",
        cfg,
        json!({"field": format!("{kind:?}"), "lambda": lambda, "kappa": kappa, "seed": seed}),
        serde_json::Value::Null,
    )
}

fn setup(cfg: &ExperimentConfig) -> Result<()> {
    if let Some(dir) = std::env::var_os("LOOPSOUP_CACHE_DIR") {
        set_power_cache_dir(Some(PathBuf::from(dir)));
    }
    if let Some(k) = cfg.threads {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::List { json } => list(json),
        Command::ExactNpoint(common) => {
            let cfg = common.resolve()?;
            setup(&cfg)?;
            exact_npoint(&cfg, common.json)
        }
        Command::Experiment { name, common } => {
            crate::experiments::find(&name)?;
            let cfg = common.resolve()?;
            setup(&cfg)?;
            experiment(&name, &cfg, common.json)
        }
        Command::SampleSoup { common, method } => {
            let cfg = common.resolve()?;
            setup(&cfg)?;
            sample_soup(&cfg, method)
        }
        Command::SampleField { common, field } => {
            let cfg = common.resolve()?;
            setup(&cfg)?;
            sample_field(&cfg, field)
        }
    }
}

fn catalog_help() -> String {
    let mut s = String::from("Experiments:\n");
    for e in CATALOG {
        s.push_str(&format!("  {:<22} {}\n", e.name, e.summary));
    }
    s
}

/// Parses arguments, runs, and returns the process exit code:
/// 0 on success, 2 for invalid input, 3 for numerical failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match Cli::command().after_help(catalog_help()).try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                3
            }
        }
    }
}
