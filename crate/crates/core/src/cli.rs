//! The `ct-inpaint` command line: phantom generation, training, ablation,
//! removal, evaluation and slice export.
//!
//! Every artifact is written under `--out-dir` and recorded in
//! `manifest.jsonl` together with the full argument vector that produced it.

use std::ffi::OsString;
use std::fs::OpenOptions;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::ctvol::{default_fill, load_volume, save_pgm_slice, save_volume, PatchSpec, Volume};
use crate::error::{Error, Result};
use crate::eval::{
    eval_restoration, experiment2, restoration_triptych, volume_diptych, EvalRegion, MeasureConfig,
    RESTORATION_CSV_HEADER,
};
use crate::kv::{field, list, parse_kv};
use crate::network::{ArchKind, FlipAveraged, Inpainter, MeanFill, Model, NetworkConfig};
use crate::phantom::{phantom_suite, random_phantom, render_suite, PhantomTruth, RandomPhantom};
use crate::removal::{remove_calcium, RemovalConfig};
use crate::trainer::{
    ablate, ablation_csv, build_dataset, synthetic_volumes, train_with, DatasetVolume, LossScope, PatchDataset,
    TrainingConfig,
};

/// Exit status of a successful run.
pub const EXIT_OK: i32 = 0;
/// Runtime failure (I/O, malformed files, numerical trouble).
pub const EXIT_FAILURE: i32 = 1;
/// Bad flags or arguments.
pub const EXIT_USAGE: i32 = 2;
/// Removal stopped with calcium left.
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// Seeds of held-out evaluation phantoms start here.
const EVAL_SEED_OFFSET: u64 = 1 << 32;

#[derive(Debug, Parser)]
#[command(name = "ct-inpaint", version, about = "Inpainting-based calcium removal on CT phantoms")]
pub struct Cli {
    /// Seed for phantoms, weight initialisation and batch order.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving every output and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Worker threads for per-volume and per-lesion parallelism.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the evaluation suite or random phantoms.
    Phantom(PhantomArgs),
    /// Train one network on random phantoms.
    Train(TrainArgs),
    /// Train the loss-region × mask-size grid and score each on held-out patches.
    Ablate(AblateArgs),
    /// Erase calcium from a volume with a trained checkpoint.
    Remove(RemoveArgs),
    /// Restoration error and stenosis before/after removal.
    Eval(EvalArgs),
    /// Export an axial slice as a 16-bit PGM.
    Slice(SliceArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Render the five-phantom evaluation suite.
    #[arg(long, conflicts_with = "random")]
    pub suite: bool,
    /// Number of random training-style phantoms.
    #[arg(long)]
    pub random: Option<usize>,
    /// Noise standard deviation in HU.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Edge length of random phantoms.
    #[arg(long, default_value_t = 32)]
    pub dims: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Small network, 24³ patches with 8³ masks, lr 1e-3; minutes on a CPU.
    Desk,
    /// Three 12-layer dense blocks, 32³ patches with 16³ masks, lr 1e-4.
    Paper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Full,
    MaskOnly,
}

impl From<LossArg> for LossScope {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Full => LossScope::Full,
            LossArg::MaskOnly => LossScope::MaskOnly,
        }
    }
}

/// Training flags; unset values come from `--preset`.
#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    #[arg(long, default_value = "dense-unet")]
    pub arch: String,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub mask: Option<usize>,
    #[arg(long, value_enum, default_value_t = LossArg::Full)]
    pub loss: LossArg,
    /// Train on the identity orientation only.
    #[arg(long)]
    pub no_flips: bool,
    /// Random phantoms to train on.
    #[arg(long)]
    pub volumes: Option<usize>,
    /// Edge length of the training phantoms.
    #[arg(long)]
    pub phantom_dims: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Checkpoint file name inside the output directory.
    #[arg(long, default_value = "model.duw")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Mask sizes of the grid.
    #[arg(long, value_delimiter = ',', default_value = "8,16")]
    pub masks: Vec<usize>,
    /// Held-out phantoms for scoring.
    #[arg(long, default_value_t = 4)]
    pub eval_volumes: usize,
    #[arg(long, default_value_t = 20)]
    pub eval_patches: usize,
}

#[derive(Debug, Args)]
pub struct RemoveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 700.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,
    /// Defaults to the checkpoint's training patch size.
    #[arg(long)]
    pub patch: Option<usize>,
    /// Defaults to the checkpoint's training mask size.
    #[arg(long)]
    pub mask: Option<usize>,
    #[command(flatten)]
    pub removal: RemovalFlags,
}

#[derive(Debug, Args)]
pub struct RemovalFlags {
    /// Voxels around each detection that are planned for repainting too.
    #[arg(long, default_value_t = 1)]
    pub halo: usize,
    /// Use the plain model instead of averaging its output over the 8 flips.
    #[arg(long)]
    pub no_flip_average: bool,
}

impl RemovalFlags {
    fn inpainter<'a>(&self, model: &'a Model<f32>) -> Box<dyn Inpainter + 'a> {
        if self.no_flip_average {
            Box::new(model)
        } else {
            Box::new(FlipAveraged(model))
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Further checkpoints scored on the same patches.
    #[arg(long)]
    pub baseline: Vec<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub eval_volumes: usize,
    #[arg(long, default_value_t = 20)]
    pub eval_patches: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,
    /// Number of restoration triptychs to export.
    #[arg(long, default_value_t = 3)]
    pub triptychs: usize,
    #[command(flatten)]
    pub removal: RemovalFlags,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Axial index; the middle slice by default.
    #[arg(long)]
    pub z: Option<usize>,
    /// Output file name inside the output directory.
    #[arg(long)]
    pub output: Option<String>,
}

/// Values a preset fills in for unset training flags, and the phantom
/// datasets they imply.
#[derive(Clone, Debug, PartialEq)]
pub struct PresetValues {
    pub network: NetworkConfig,
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub patch: usize,
    pub mask: usize,
    /// Random phantoms in the training set.
    pub volumes: usize,
    /// Grid step of training patches.
    pub stride: usize,
    pub phantoms: RandomPhantom,
}

/// Normalized target range inside the mask below which a patch holds no
/// structure worth training or scoring on (about 80 HU).
pub const INFORMATIVE_RANGE: f32 = 0.02;

impl Preset {
    pub fn values(self, kind: ArchKind) -> PresetValues {
        match self {
            Preset::Desk => PresetValues {
                network: NetworkConfig::desk(kind),
                steps: 400,
                lr: 1e-3,
                batch: 3,
                patch: 24,
                mask: 8,
                volumes: 25,
                stride: 6,
                phantoms: desk_phantoms(),
            },
            Preset::Paper => PresetValues {
                network: NetworkConfig::paper(kind),
                steps: 1000,
                lr: 1e-4,
                batch: 3,
                patch: 32,
                mask: 16,
                volumes: 8,
                stride: 16,
                phantoms: RandomPhantom {
                    dims: [64; 3],
                    ..desk_phantoms()
                },
            },
        }
    }
}

/// Training phantoms: calcium-free vessels, most of them with a soft
/// narrowing.
pub fn desk_phantoms() -> RandomPhantom {
    RandomPhantom {
        calcified: 0.0,
        soft_stenosis: 0.8,
        ..RandomPhantom::default()
    }
}

impl PresetValues {
    pub fn training_config(&self, seed: u64, loss: LossScope) -> TrainingConfig {
        TrainingConfig {
            lr: self.lr,
            batch_size: self.batch,
            steps: self.steps,
            seed,
            loss_region: loss,
            mask_size: self.mask,
            flips: true,
            network: self.network.clone().with_seed(seed),
        }
    }

    /// Seeds of the training phantoms for a run seed.
    pub fn train_seeds(&self, seed: u64) -> Range<u64> {
        let base = seed.wrapping_mul(1000);
        base..base + self.volumes as u64
    }

    fn grid(&self, seeds: Range<u64>, mask: usize, stride: usize, flips: bool) -> Result<PatchDataset> {
        build_dataset(
            synthetic_volumes(&self.phantoms, seeds)?,
            self.phantoms.dims,
            self.patch,
            mask,
            stride.max(1),
            flips,
        )
    }

    /// Training patches: a grid at `stride` over whole phantoms, keeping
    /// those with structure inside the mask.
    pub fn dataset(&self, seeds: Range<u64>, mask: usize, flips: bool) -> Result<PatchDataset> {
        self.grid(seeds, mask, self.stride, flips)?.informative(INFORMATIVE_RANGE)
    }

    /// Up to `limit` held-out patches with structure inside the mask, from
    /// `volumes` phantoms whose seeds never overlap [`train_seeds`](Self::train_seeds).
    pub fn held_out(&self, seed: u64, mask: usize, volumes: usize, limit: usize) -> Result<PatchDataset> {
        let base = EVAL_SEED_OFFSET + seed.wrapping_mul(1000);
        Ok(self
            .grid(base..base + volumes as u64, mask, self.patch / 2, false)?
            .informative(INFORMATIVE_RANGE)?
            .subsample(limit))
    }
}

/// Everything `train` needs, resolved from flags and preset.
#[derive(Clone, Debug)]
struct TrainPlan {
    config: TrainingConfig,
    values: PresetValues,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl TrainFlags {
    fn resolve(&self, seed: u64) -> Result<TrainPlan> {
        let kind: ArchKind = self.arch.parse()?;
        let mut p = self.preset.values(kind);
        p.lr = self.lr.unwrap_or(p.lr);
        p.batch = self.batch.unwrap_or(p.batch);
        p.steps = self.steps.unwrap_or(p.steps);
        p.mask = self.mask.unwrap_or(p.mask);
        p.patch = self.patch.unwrap_or(p.patch);
        p.volumes = self.volumes.unwrap_or(p.volumes);
        if let Some(d) = self.phantom_dims {
            p.phantoms.dims = [d; 3];
        }
        let mut config = p.training_config(seed, self.loss.into());
        config.flips = !self.no_flips;
        config.validate()?;
        if p.volumes == 0 {
            return Err(usage("--volumes must be ≥ 1"));
        }
        if p.phantoms.dims.iter().any(|&d| p.patch > d) {
            return Err(usage(format!("patch {} larger than phantoms of {:?}", p.patch, p.phantoms.dims)));
        }
        PatchSpec::new([0; 3], p.patch, p.mask)?;
        Ok(TrainPlan { config, values: p })
    }
}

/// Sidecar `<checkpoint>.train` with the geometry and data a model saw.
fn train_sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".train");
    s.into()
}

fn write_train_sidecar(path: &Path, plan: &TrainPlan, trained_on: &[String]) -> Result<PathBuf> {
    let c = &plan.config;
    let text = format!(
        "patch_size = {}\nmask_size = {}\nphantom_dims = {}\nlr = {}\nbatch_size = {}\nsteps = {}\nseed = {}\nloss_region = {}\nflips = {}\ntrained_on = {}\n",
        plan.values.patch,
        c.mask_size,
        plan.values.phantoms.dims[0],
        c.lr,
        c.batch_size,
        c.steps,
        c.seed,
        c.loss_region,
        c.flips,
        trained_on.join(",")
    );
    let side = train_sidecar(path);
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))?;
    Ok(side)
}

/// Patch size, mask size and training volume ids recorded for a checkpoint.
struct TrainInfo {
    patch: usize,
    phantom_dims: usize,
    mask: usize,
    trained_on: Vec<String>,
}

fn read_train_sidecar(path: &Path) -> Result<TrainInfo> {
    let side = train_sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let m = parse_kv(&text)?;
    Ok(TrainInfo {
        patch: field(&m, "patch_size")?,
        phantom_dims: field(&m, "phantom_dims")?,
        mask: field(&m, "mask_size")?,
        trained_on: list(&field::<String>(&m, "trained_on")?, ',')?,
    })
}

struct Session<'a> {
    out_dir: PathBuf,
    argv: Vec<String>,
    command: &'a str,
    seed: u64,
}

impl Session<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn record(&self, artifact: &Path, params: serde_json::Value) -> Result<()> {
        let manifest = self.path("manifest.jsonl");
        let line = json!({
            "artifact": artifact.display().to_string(),
            "command": self.command,
            "seed": self.seed,
            "argv": self.argv,
            "params": params,
        });
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&manifest)
            .map_err(|e| Error::io(&manifest, e))?;
        writeln!(f, "{line}").map_err(|e| Error::io(&manifest, e))
    }

    fn write(&self, name: &str, bytes: &[u8], params: serde_json::Value) -> Result<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.record(&path, params)?;
        Ok(path)
    }
}

fn phantom_cmd(s: &Session, a: &PhantomArgs) -> Result<i32> {
    let write_phantom = |name: &str, v: &Volume, t: &PhantomTruth| -> Result<()> {
        let params = json!({ "noise_sigma_hu": t.noise_sigma_hu, "seed": t.seed, "dims": v.dims() });
        let p = s.path(&format!("{name}.ctv"));
        save_volume(v, &p)?;
        s.record(&p, params.clone())?;
        let p = s.path(&format!("{name}.labels.ctv"));
        save_volume(&t.labels, &p)?;
        s.record(&p, params.clone())?;
        s.write(&format!("{name}.truth"), t.to_kv().as_bytes(), params)?;
        Ok(())
    };
    if a.suite {
        let suite = match a.noise {
            Some(sigma) => render_suite(s.seed, sigma)?,
            None => phantom_suite(s.seed)?,
        };
        for p in &suite {
            write_phantom(&p.name, &p.volume, &p.truth)?;
        }
        return Ok(EXIT_OK);
    }
    let n = a.random.ok_or_else(|| usage("phantom needs --suite or --random N"))?;
    let mut opts = RandomPhantom {
        dims: [a.dims; 3],
        ..RandomPhantom::default()
    };
    if let Some(sigma) = a.noise {
        opts.noise_sigma_hu = sigma;
    }
    for i in 0..n as u64 {
        let seed = s.seed.wrapping_mul(1000).wrapping_add(i);
        let (v, t) = random_phantom(&opts, seed)?;
        write_phantom(&DatasetVolume::random_id(seed), &v, &t)?;
    }
    Ok(EXIT_OK)
}

fn train_cmd(s: &Session, a: &TrainArgs) -> Result<i32> {
    let plan = a.flags.resolve(s.seed)?;
    let v = &plan.values;
    let data = v.dataset(v.train_seeds(s.seed), plan.config.mask_size, plan.config.flips)?;
    let every = (plan.config.steps / 10).max(1);
    let out = train_with(&plan.config, &data, |step, loss| {
        if step % every == 0 {
            eprintln!("step {step:>6}  loss {loss:.4e}");
        }
    })?;
    let ckpt = s.path(&a.name);
    out.model.save(&ckpt)?;
    let params = json!({
        "arch": plan.config.network.kind.to_string(),
        "steps": plan.config.steps,
        "lr": plan.config.lr,
        "batch_size": plan.config.batch_size,
        "patch_size": v.patch,
        "mask_size": plan.config.mask_size,
        "loss_region": plan.config.loss_region.to_string(),
        "flips": plan.config.flips,
        "volumes": v.volumes,
    });
    s.record(&ckpt, params.clone())?;
    s.record(&crate::network::arch_path(&ckpt), params.clone())?;
    let side = write_train_sidecar(&ckpt, &plan, &out.trained_on)?;
    s.record(&side, params.clone())?;
    let stem = a.name.trim_end_matches(".duw");
    s.write(&format!("{stem}_loss.csv"), out.history_csv().as_bytes(), params)?;
    Ok(EXIT_OK)
}

fn ablate_cmd(s: &Session, a: &AblateArgs) -> Result<i32> {
    let plan = a.flags.resolve(s.seed)?;
    if a.masks.is_empty() {
        return Err(usage("--masks needs at least one size"));
    }
    let mut grid = Vec::new();
    for &mask in &a.masks {
        PatchSpec::new([0; 3], plan.values.patch, mask)?;
        for loss in [LossScope::Full, LossScope::MaskOnly] {
            grid.push(TrainingConfig {
                loss_region: loss,
                mask_size: mask,
                ..plan.config.clone()
            });
        }
    }
    let v = &plan.values;
    let train_set = v.dataset(v.train_seeds(s.seed), a.masks[0], plan.config.flips)?;
    let eval = v.held_out(s.seed, a.masks[0], a.eval_volumes, a.eval_patches)?;
    let rows = ablate(&grid, &train_set, &eval)?;
    s.write(
        "ablation.csv",
        ablation_csv(&rows).as_bytes(),
        json!({ "masks": a.masks, "steps": plan.config.steps, "patch_size": v.patch, "eval_patches": eval.len() }),
    )?;
    Ok(EXIT_OK)
}

fn remove_cmd(s: &Session, a: &RemoveArgs) -> Result<i32> {
    let volume = load_volume(&a.input)?;
    let model = Model::load(&a.checkpoint)?;
    let info = read_train_sidecar(&a.checkpoint).ok();
    let patch = a.patch.or(info.as_ref().map(|i| i.patch)).unwrap_or(crate::ctvol::PATCH_SIZE);
    let mask = a.mask.or(info.as_ref().map(|i| i.mask)).unwrap_or(crate::ctvol::MASK_SIZE);
    let cfg = RemovalConfig {
        threshold_hu: a.threshold,
        max_iterations: a.max_iterations,
        patch_size: patch,
        mask_size: mask,
        halo: a.removal.halo,
        ..RemovalConfig::default()
    };
    let out = remove_calcium(&volume, a.removal.inpainter(&model).as_ref(), &cfg)?;
    let stem = a
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "volume".into());
    let params = json!({
        "input": a.input.display().to_string(),
        "checkpoint": a.checkpoint.display().to_string(),
        "threshold_hu": a.threshold,
        "max_iterations": a.max_iterations,
        "patch_size": patch,
        "mask_size": mask,
        "halo": a.removal.halo,
        "flip_average": !a.removal.no_flip_average,
        "report": out.report,
    });
    let path = s.path(&format!("{stem}_removed.ctv"));
    save_volume(&out.volume, &path)?;
    s.record(&path, params.clone())?;
    s.write(&format!("{stem}_removal.jsonl"), out.report.log_jsonl().as_bytes(), params)?;
    eprintln!(
        "rounds {}  removed {}  residual {}",
        out.report.iterations, out.report.voxels_removed, out.report.residual
    );
    Ok(if out.report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn eval_cmd(s: &Session, a: &EvalArgs) -> Result<i32> {
    let model = Model::load(&a.checkpoint)?;
    let info = read_train_sidecar(&a.checkpoint)?;
    let mut v = Preset::Desk.values(ArchKind::DenseUnet);
    v.patch = info.patch;
    v.phantoms.dims = [info.phantom_dims; 3];
    let eval = v.held_out(s.seed, info.mask, a.eval_volumes, a.eval_patches)?;
    let params = json!({
        "checkpoint": a.checkpoint.display().to_string(),
        "baselines": a.baseline.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "eval_patches": eval.len(),
        "patch_size": info.patch,
        "mask_size": info.mask,
    });

    let mut csv = String::from(RESTORATION_CSV_HEADER);
    let mut models: Vec<(Box<dyn Inpainter>, Vec<String>)> = vec![(Box::new(model.clone()), info.trained_on.clone())];
    for b in &a.baseline {
        let m = Model::load(b)?;
        let trained = read_train_sidecar(b).map(|i| i.trained_on).unwrap_or_default();
        models.push((Box::new(m), trained));
    }
    models.push((Box::new(MeanFill), Vec::new()));
    for (m, trained) in &models {
        for region in [EvalRegion::Mask, EvalRegion::Full] {
            let r = eval_restoration(m.as_ref(), trained, &eval, region)?;
            let sum = r.summary();
            eprintln!("{:<12} {:<4} mean {:>10.1}  min {:>10.1}  max {:>10.1} HU²", r.label, region, sum.mean, sum.min, sum.max);
            csv.push_str(&r.csv_rows());
        }
    }
    s.write("restoration.csv", csv.as_bytes(), params.clone())?;

    for i in 0..a.triptychs.min(eval.len()) {
        let e = &eval.entries[i];
        let img = restoration_triptych(&eval.volumes[e.volume].volume, &e.spec, &model, default_fill())?;
        s.write(&format!("triptych_{i}.pgm"), &img, params.clone())?;
    }

    let suite = phantom_suite(s.seed)?;
    let removal = RemovalConfig {
        max_iterations: a.max_iterations,
        patch_size: info.patch,
        mask_size: info.mask,
        halo: a.removal.halo,
        ..RemovalConfig::default()
    };
    let remover = a.removal.inpainter(&model);
    let report = experiment2(&suite, remover.as_ref(), &removal, &MeasureConfig::default())?;
    s.write("stenosis.csv", report.to_csv().as_bytes(), params.clone())?;
    if let Some((o, r)) = report.median_errors() {
        eprintln!("median |original − truth| {o:.1}   median |removed − truth| {r:.1}");
    }
    for p in &suite {
        let out = remove_calcium(&p.volume, remover.as_ref(), &removal)?;
        let z = p
            .truth
            .plaque_indices()
            .first()
            .map(|&i| p.volume.coords(i)[2])
            .unwrap_or(p.volume.dims()[2] / 2);
        s.write(&format!("{}_removal.pgm", p.name), &volume_diptych(&p.volume, &out.volume, z)?, params.clone())?;
    }
    Ok(EXIT_OK)
}

fn slice_cmd(s: &Session, a: &SliceArgs) -> Result<i32> {
    let v = load_volume(&a.input)?;
    let z = a.z.unwrap_or(v.dims()[2] / 2);
    if z >= v.dims()[2] {
        return Err(usage(format!("--z {z} outside depth {}", v.dims()[2])));
    }
    let name = a.output.clone().unwrap_or_else(|| {
        let stem = a.input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        format!("{stem}_z{z}.pgm")
    });
    let path = s.path(&name);
    save_pgm_slice(&v, z, &path)?;
    s.record(&path, json!({ "input": a.input.display().to_string(), "z": z }))?;
    Ok(EXIT_OK)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Geometry(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status. Diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let command = match &cli.command {
        Command::Phantom(_) => "phantom",
        Command::Train(_) => "train",
        Command::Ablate(_) => "ablate",
        Command::Remove(_) => "remove",
        Command::Eval(_) => "eval",
        Command::Slice(_) => "slice",
    };
    let session = Session {
        out_dir: cli.out_dir.clone(),
        argv: argv.iter().map(|a| a.to_string_lossy().into_owned()).collect(),
        command,
        seed: cli.seed,
    };
    let result = std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| Error::io(&cli.out_dir, e))
        .and_then(|_| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(cli.jobs.max(1))
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))
        })
        .and_then(|pool| {
            pool.install(|| match &cli.command {
                Command::Phantom(a) => phantom_cmd(&session, a),
                Command::Train(a) => train_cmd(&session, a),
                Command::Ablate(a) => ablate_cmd(&session, a),
                Command::Remove(a) => remove_cmd(&session, a),
                Command::Eval(a) => eval_cmd(&session, a),
                Command::Slice(a) => slice_cmd(&session, a),
            })
        });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = exit_code(&e);
            if code == EXIT_USAGE {
                eprintln!("run with --help for usage");
            }
            code
        }
    }
}
