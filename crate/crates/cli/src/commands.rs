use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use hoss_core::features::{self, accuracy, fit_linear_cv};
use hoss_core::filters::{render_block, row_color_consistency, Geometry};
use hoss_core::gibbs::init_chains;
use hoss_core::trainer::{reconstruction_mse, EPOCH_LOG_HEADER};
use hoss_core::verify::{default_suite, SuiteConfig};
use hoss_core::{
    toydata, BlockShape, ChainInit, ChainSnapshot, Checkpoint, Dataset, DecodeOptions, FeatureKind,
    FeatureSpec, GibbsConfig, Progress, ToyConfig, Trainer,
};

use crate::config::{as_comments, parse_pairs, read_pairs, RunConfig, Settings, ToySettings};
use crate::error::{with_path, CliError};
use crate::ConfigArgs;

type Pairs = Vec<(String, String)>;

/// File pairs, then `--set` pairs, then the command's own flags.
fn gather(cfg: &ConfigArgs, flags: Pairs) -> Result<Pairs, CliError> {
    let mut pairs = match &cfg.config {
        Some(path) => read_pairs(path)?,
        None => Vec::new(),
    };
    pairs.extend(cfg.set.iter().cloned());
    pairs.extend(flags);
    Ok(pairs)
}

fn flag<T: ToString>(pairs: &mut Pairs, key: &str, value: Option<T>) {
    if let Some(v) = value {
        pairs.push((key.to_string(), v.to_string()));
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_data(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(with_path(path))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(with_path(path))
}

/// The run configuration embedded in a checkpoint, with overrides applied.
fn checkpoint_config(ck: &Checkpoint, overrides: &[(String, String)]) -> Result<RunConfig, CliError> {
    let mut pairs = match &ck.config {
        Some(text) => parse_pairs(text, "checkpoint config")?,
        None => Vec::new(),
    };
    pairs.extend(overrides.iter().cloned());
    RunConfig::resolve(&pairs)
}

fn centering_of(ck: &Checkpoint) -> Vec<f64> {
    ck.centering.clone().unwrap_or_else(|| vec![0.0; ck.params.shape.d])
}

#[derive(Debug, Args)]
pub struct GenToyArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    /// Standard deviation of the additive pixel noise.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Redraw samples with no occupied slot.
    #[arg(long)]
    exclude_empty: bool,
    #[arg(long)]
    out: PathBuf,
}

pub fn gen_toy(a: GenToyArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    flag(&mut flags, "n", a.n);
    flag(&mut flags, "sigma", a.sigma);
    flag(&mut flags, "seed", a.seed);
    if a.exclude_empty {
        flags.push(("include_empty".into(), "false".into()));
    }
    let mut s = ToySettings(ToyConfig::default());
    s.apply_all(&gather(&a.cfg, flags)?)?;
    if !s.0.noise_sigma.is_finite() || s.0.noise_sigma < 0.0 {
        return Err(CliError::Usage(format!("sigma {} must be finite and >= 0", s.0.noise_sigma)));
    }
    let data = toydata::gen_toy(&s.0)?;
    write_file(&a.out, &data.to_bytes())?;
    println!(
        "wrote {}: n={} D={} sigma={} seed={}",
        a.out.display(),
        data.len(),
        data.dim,
        s.0.noise_sigma,
        s.0.seed
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// HOSSDATA1 training set.
    #[arg(long)]
    data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch CSV log (default: the checkpoint path with `.csv` appended).
    #[arg(long)]
    log: Option<PathBuf>,
    /// Continue from a checkpoint that carries chain states.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Base settings: `default` or `toy`.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    /// Rewrite the checkpoint every this many epochs.
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

struct TrainOutputs {
    out: PathBuf,
    log: PathBuf,
    config_text: String,
    log_prefix: String,
}

impl TrainOutputs {
    fn save(&self, t: &Trainer, rows: &str) -> Result<(), CliError> {
        let ck = Checkpoint {
            params: t.params.clone(),
            centering: Some(t.centering.clone()),
            chains: Some(ChainSnapshot {
                seed: t.cfg.gibbs.seed,
                chains: t.chains.clone(),
            }),
            progress: Some(Progress {
                epoch: t.epoch as u64,
                updates: t.updates as u64,
            }),
            config: Some(self.config_text.clone()),
            log: Some(rows.to_string()),
        };
        write_file(&self.out, &ck.to_bytes())?;
        let csv = format!("{}{EPOCH_LOG_HEADER}\n{rows}", self.log_prefix);
        write_file(&self.log, csv.as_bytes())
    }
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut flags = Vec::new();
    flag(&mut flags, "preset", a.preset.clone());
    flag(&mut flags, "epochs", a.epochs);
    flag(&mut flags, "lr", a.lr);
    flag(&mut flags, "seed", a.seed);
    flag(&mut flags, "k", a.k);
    flag(&mut flags, "m", a.m);
    flag(&mut flags, "n", a.n);
    flag(&mut flags, "minibatch", a.minibatch);
    flag(&mut flags, "chains", a.chains);
    flag(&mut flags, "checkpoint_every", a.checkpoint_every);
    let overrides = gather(&a.cfg, flags)?;
    let data = load_data(&a.data)?;
    let rows = data.rows();

    let (run, mut trainer, mut log_rows) = match &a.resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            let run = checkpoint_config(&ck, &overrides)?;
            let snap = ck.chains.clone().ok_or_else(|| {
                CliError::Usage(format!("{}: checkpoint has no chain states to resume", path.display()))
            })?;
            let progress = ck.progress.unwrap_or(Progress { epoch: 0, updates: 0 });
            let mut cfg = run.train;
            if snap.seed != cfg.gibbs.seed {
                return Err(CliError::Usage(format!(
                    "chain_seed {} differs from the checkpoint's {}",
                    cfg.gibbs.seed, snap.seed
                )));
            }
            cfg.gibbs.n_chains = snap.chains.len();
            let centering = centering_of(&ck);
            let t = Trainer::resume(
                cfg,
                ck.params,
                snap.chains,
                centering,
                progress.epoch as usize,
                progress.updates as usize,
            )?;
            (run, t, ck.log.unwrap_or_default())
        }
        None => {
            let run = RunConfig::resolve(&overrides)?;
            let shape = run.shape(data.dim)?;
            let t = Trainer::new(shape, rows, run.train)?;
            (run, t, String::new())
        }
    };
    if trainer.params.shape.d != data.dim {
        return Err(CliError::Usage(format!(
            "data has D={} but the model expects D={}",
            data.dim, trainer.params.shape.d
        )));
    }

    let config_text = run.render();
    let outputs = TrainOutputs {
        log: a.log.clone().unwrap_or_else(|| {
            let mut p = a.out.clone().into_os_string();
            p.push(".csv");
            PathBuf::from(p)
        }),
        out: a.out.clone(),
        log_prefix: as_comments(&config_text),
        config_text,
    };

    while trainer.epoch < trainer.cfg.epochs {
        let entry = trainer.run_epoch(rows)?;
        log_rows.push_str(&entry.csv_row());
        log_rows.push('\n');
        eprintln!(
            "epoch {:>4}  recon_mse {:.6}  mf_sweeps {:.2}  grad_norm {:.4e}",
            entry.epoch, entry.recon_mse, entry.mf_mean_sweeps, entry.grad_norm
        );
        if run.checkpoint_every > 0 && trainer.epoch % run.checkpoint_every == 0 {
            outputs.save(&trainer, &log_rows)?;
        }
    }
    outputs.save(&trainer, &log_rows)?;
    println!(
        "wrote {} after {} epochs ({} updates)",
        a.out.display(),
        trainer.epoch,
        trainer.updates
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random tiny models per suite.
    #[arg(long, default_value_t = 20)]
    models: usize,
    /// Fixed model shape `D,K,M,N` instead of random tiny shapes.
    #[arg(long, value_parser = parse_shape)]
    shape: Option<BlockShape>,
    /// Gibbs sweeps kept for the sampler check.
    #[arg(long, default_value_t = 100_000)]
    gibbs_sweeps: usize,
}

fn parse_shape(s: &str) -> Result<BlockShape, String> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("bad shape component {p:?}")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [d, k, m, n] => BlockShape::new(d, k, m, n).map_err(|e| e.to_string()),
        _ => Err(format!("expected D,K,M,N, got {s:?}")),
    }
}

pub fn verify(a: VerifyArgs) -> Result<(), CliError> {
    let reports = default_suite(&SuiteConfig {
        seed: a.seed,
        models: a.models,
        shape: a.shape,
        gibbs_sweeps: a.gibbs_sweeps,
    })?;
    let mut failed = Vec::new();
    for r in &reports {
        println!("{r}");
        if !r.passed {
            failed.push(r.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed.join(", ")))
    }
}

#[derive(Debug, Args)]
pub struct FiltersArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Pixels per filter entry.
    #[arg(long, default_value_t = 8)]
    scale: usize,
}

pub fn filters(a: FiltersArgs) -> Result<(), CliError> {
    if a.scale == 0 {
        return Err(CliError::Usage("--scale must be >= 1".into()));
    }
    let ck = load_checkpoint(&a.checkpoint)?;
    let p = &ck.params;
    let geom = Geometry::for_dim(p.shape.d);
    let comments: Vec<String> = ck.config.iter().flat_map(|c| c.lines().map(String::from)).collect();
    for k in 0..p.shape.k {
        let img = render_block(p, k, geom, a.scale, &comments)?;
        let path = a.out_dir.join(format!("block_{k}.ppm"));
        write_file(&path, &img.to_bytes())?;
        println!("wrote {} ({}x{})", path.display(), img.width, img.height);
    }
    if let Geometry::Color { channels, width } = geom {
        println!(
            "rows with a constant dominant color channel: {:.3}",
            row_color_consistency(p, channels, width)
        );
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct FeatureArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// One column per slab instead of per spike unit.
    #[arg(long)]
    unfactored: bool,
    /// Append the `f` units to factored features.
    #[arg(long)]
    include_f: bool,
}

impl FeatureArgs {
    fn spec(&self) -> FeatureSpec {
        FeatureSpec {
            kind: if self.unfactored {
                FeatureKind::Unfactored
            } else {
                FeatureKind::Factored
            },
            include_f: self.include_f,
        }
    }

    fn load(&self) -> Result<(Checkpoint, RunConfig, Dataset), CliError> {
        let ck = load_checkpoint(&self.checkpoint)?;
        let run = checkpoint_config(&ck, &gather(&self.cfg, Vec::new())?)?;
        let data = load_data(&self.data)?;
        if data.dim != ck.params.shape.d {
            return Err(CliError::Usage(format!(
                "data has D={} but the model expects D={}",
                data.dim, ck.params.shape.d
            )));
        }
        Ok((ck, run, data))
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    feat: FeatureArgs,
    /// Feature CSV to write.
    #[arg(long)]
    out: PathBuf,
}

pub fn extract(a: ExtractArgs) -> Result<(), CliError> {
    let (ck, run, data) = a.feat.load()?;
    let spec = a.feat.spec();
    let feats = features::extract_all(
        data.rows(),
        &centering_of(&ck),
        &ck.params,
        &spec,
        &run.train.mf_config(),
    )?;
    let mut csv = as_comments(&run.render());
    csv.push_str(&format!("# features={}\n", if a.feat.unfactored { "unfactored" } else { "factored" }));
    csv.push_str(&spec.names(&ck.params.shape).join(","));
    csv.push('\n');
    for row in &feats {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    write_file(&a.out, csv.as_bytes())?;
    println!("wrote {}: {} rows x {} features", a.out.display(), feats.len(), spec.len(&ck.params.shape));
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    feat: FeatureArgs,
    /// Report CSV to write.
    #[arg(long)]
    out: PathBuf,
}

/// Bits of each sample packed into one class index.
fn pack(bits: &[Vec<usize>], n: usize) -> Vec<usize> {
    (0..n).map(|i| bits.iter().fold(0, |acc, b| acc * 2 + b[i])).collect()
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let (ck, run, data) = a.feat.load()?;
    if data.color_width == 0 || data.position_width == 0 {
        return Err(CliError::Usage(format!("{}: dataset has no labels", a.feat.data.display())));
    }
    let spec = a.feat.spec();
    if spec.kind != FeatureKind::Factored {
        return Err(CliError::Usage("eval needs factored features".into()));
    }
    let mf = run.train.mf_config();
    let centering = centering_of(&ck);
    let opts = DecodeOptions {
        mf,
        centering: centering.clone(),
        ..DecodeOptions::new(data.dim)
    };
    let report = features::decodability_report(&data, &ck.params, &spec, &opts)?;

    let feats = features::extract_all(data.rows(), &centering, &ck.params, &spec, &mf)?;
    let split = ((data.len() as f64) * opts.train_frac).round() as usize;
    if split == 0 || split >= data.len() {
        return Err(CliError::Usage("too few samples for a train/test split".into()));
    }
    let n = data.len();
    let color = pack(&(0..data.color_width).map(|b| data.color_bit(b)).collect::<Vec<_>>(), n);
    let placement = pack(&(0..data.position_width).map(|b| data.position_bit(b)).collect::<Vec<_>>(), n);
    let mut classifiers = Vec::new();
    for (name, labels) in [("color_class", &color), ("placement_class", &placement)] {
        let (m, _) = fit_linear_cv(&feats[..split], &labels[..split], &opts.grid)?;
        classifiers.push((name, accuracy(&m, &feats[split..], &labels[split..])));
    }
    let recon = reconstruction_mse(data.rows(), &ck.params, &centering, &mf)?;

    let mut csv = as_comments(&run.render());
    csv.push_str(&report.to_csv());
    for (name, acc) in &classifiers {
        csv.push_str(&format!("{name},all,{acc:.6}\n"));
    }
    csv.push_str(&format!("recon_mse,all,{recon:.6}\n"));
    write_file(&a.out, csv.as_bytes())?;

    println!("{report}");
    for (name, acc) in &classifiers {
        println!("{name:<28}{acc:>10.4}");
    }
    println!("{:<28}{recon:>10.6}", "reconstruction mse");
    Ok(())
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Number of independent chains, one sample each.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Gibbs sweeps before the sample is taken.
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

pub fn sample(a: SampleArgs) -> Result<(), CliError> {
    if a.n == 0 {
        return Err(CliError::Usage("--n must be >= 1".into()));
    }
    let ck = load_checkpoint(&a.checkpoint)?;
    let run = checkpoint_config(&ck, &gather(&a.cfg, Vec::new())?)?;
    let p = &ck.params;
    let cfg = GibbsConfig {
        n_chains: a.n,
        steps_per_update: a.burn_in,
        seed: a.seed,
        clamp_f: run.train.clamp_f,
    };
    let mut chains = init_chains(p, &cfg, ChainInit::Noise)?;
    hoss_core::gibbs::advance_chains(&mut chains, p, &cfg, a.burn_in)?;
    let centering = centering_of(&ck);
    let pixels: Vec<f64> = chains
        .iter()
        .flat_map(|c| c.v.iter().zip(&centering).map(|(v, m)| v + m))
        .collect();
    let data = Dataset::unlabeled(p.shape.d, pixels)?;
    write_file(&a.out, &data.to_bytes())?;
    println!("wrote {}: {} samples after {} sweeps", a.out.display(), data.len(), a.burn_in);
    Ok(())
}
