//! `lassi`: synthetic data generation, reconstruction and evaluation.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lassi::dictlearn::nsre_study;
use lassi::io;
use lassi::patches::extract_patches;
use lassi::phantom::{make_coil_maps, make_phantom};
use lassi::recon::{run_dinokat, run_lassi, run_lps_baseline, LpsConfig};
use lassi::sensing::{make_cartesian_mask, make_pseudoradial_mask, zerofill_baseline, RadialOptions};
use lassi::{
    nrmse, Decomposition, DynamicSequence, KtSpaceData, LowRankPenalty, NsreStudy, PatchConfig, PhantomSpec,
    ReconConfig, Roi, SchattenP, SensingOperator, SparsityPenalty, C64,
};

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "lassi", version, about = "Low-rank plus adaptive-dictionary dynamic MRI reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Writes a synthetic dynamic phantom (and optionally coil maps).
    Phantom(PhantomArgs),
    /// Writes a k-t sampling mask and prints the achieved acceleration.
    Mask(MaskArgs),
    /// Simulates undersampled k-t measurements of a sequence.
    Simulate(SimulateArgs),
    /// Reconstructs a sequence from k-t measurements.
    Recon(ReconArgs),
    /// Re-runs a reconstruction from its manifest.
    Replay(ReplayArgs),
    /// Prints NRMSE of a reconstruction against a reference.
    Eval(EvalArgs),
    /// Tabulates dictionary representation error against sparsity and atom rank.
    Dicteval(DictevalArgs),
}

#[derive(Args, Debug)]
struct PhantomArgs {
    /// Phantom description (JSON); the built-in 64x64x16 scene when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also writes this many simulated coil maps to `--coil-out`.
    #[arg(long, requires = "coil_out")]
    coils: Option<usize>,
    #[arg(long)]
    coil_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    coil_seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Pattern {
    Cartesian,
    Radial,
}

#[derive(Args, Debug)]
struct MaskArgs {
    #[arg(long, value_enum)]
    pattern: Pattern,
    /// Target acceleration (cartesian).
    #[arg(long)]
    accel: Option<f64>,
    /// Spokes per frame (radial).
    #[arg(long)]
    spokes: Option<usize>,
    /// `Nx,Ny,Nt`.
    #[arg(long, value_parser = parse_triple)]
    shape: [usize; 3],
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Ground-truth sequence.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Coil maps `[Nc,Nx,Ny]`; single coil when omitted.
    #[arg(long)]
    coils: Option<PathBuf>,
    /// Standard deviation of complex Gaussian noise added to each sample.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    Lassi,
    Dinokat,
    Lps,
    Zerofill,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Shrink {
    Svt,
    Hard,
    Schatten,
    Optshrink,
}

#[derive(Args, Debug, Clone)]
struct ReconArgs {
    #[arg(long, value_enum, default_value = "lassi")]
    method: Method,
    #[arg(long, value_enum, default_value = "svt")]
    shrink: Shrink,
    /// Schatten exponent, 1/2 or 2/3.
    #[arg(long, default_value = "1/2", value_parser = parse_schatten)]
    p: SchattenP,
    #[arg(long = "lambdaL")]
    lambda_l: Option<f64>,
    #[arg(long = "lambdaS")]
    lambda_s: Option<f64>,
    #[arg(long = "lambdaZ")]
    lambda_z: Option<f64>,
    #[arg(long, default_value = "l0", value_parser = parse_penalty)]
    penalty: SparsityPenalty,
    /// Code magnitude bound; derived from the initialization when omitted.
    #[arg(long)]
    bound: Option<f64>,
    #[arg(long, default_value_t = 1)]
    atom_rank: usize,
    /// Signal rank used by OptShrink.
    #[arg(long = "rankL", default_value_t = 1)]
    rank_l: usize,
    #[arg(long, default_value = "8,8,5", value_parser = parse_triple)]
    patch: [usize; 3],
    #[arg(long, default_value = "2,2,1", value_parser = parse_triple)]
    stride: [usize; 3],
    /// Dictionary size; square when omitted.
    #[arg(long)]
    natoms: Option<usize>,
    #[arg(long, default_value_t = 50)]
    outer: usize,
    #[arg(long, default_value_t = 1)]
    dict_sweeps: usize,
    #[arg(long, default_value_t = 5)]
    prox_iters: usize,
    /// Iterations of the low-rank plus sparse baseline.
    #[arg(long, default_value_t = 250)]
    lps_iters: usize,
    /// Constant step; derived from the operator norm when omitted.
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    /// Coil maps `[Nc,Nx,Ny]`; single coil when omitted.
    #[arg(long)]
    coils: Option<PathBuf>,
    /// Initial x_S (the zero-fill reconstruction by default).
    #[arg(long)]
    init_xs: Option<PathBuf>,
    /// Initial x_L (zero by default; ignored by dinokat).
    #[arg(long)]
    init_xl: Option<PathBuf>,
    /// Starting dictionary.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    /// Reference sequence; adds an NRMSE column to the metrics.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Output directory; the original one when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    recon: PathBuf,
    /// Spatial box `x0,x1,y0,y1`, inclusive.
    #[arg(long, value_parser = parse_roi)]
    roi: Option<Roi>,
    /// Compares magnitudes instead of complex values.
    #[arg(long)]
    magnitude: bool,
    /// Per-frame NRMSE CSV.
    #[arg(long)]
    frames: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DictevalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "8,8,5", value_parser = parse_triple)]
    patch: [usize; 3],
    #[arg(long, default_value = "2,2,1", value_parser = parse_triple)]
    stride: [usize; 3],
    #[arg(long)]
    natoms: Option<usize>,
    #[arg(long, default_value = "1,2,3,4,5", value_delimiter = ',')]
    ranks: Vec<usize>,
    #[arg(long, default_value = "0.2,0.1,0.05,0.03,0.02,0.01", value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    sweeps: usize,
    #[arg(long, default_value = "l0", value_parser = parse_penalty)]
    penalty: SparsityPenalty,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_triple(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected three comma-separated integers, got {s:?}"));
    };
    let p = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok([p(a)?, p(b)?, p(c)?])
}

fn parse_roi(s: &str) -> std::result::Result<Roi, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    match v.as_slice() {
        &[x0, x1, y0, y1] => Ok(Roi { x0, x1, y0, y1 }),
        _ => Err(format!("expected x0,x1,y0,y1, got {s:?}")),
    }
}

fn parse_schatten(s: &str) -> std::result::Result<SchattenP, String> {
    match s.trim() {
        "1/2" => Ok(SchattenP::Half),
        "2/3" => Ok(SchattenP::TwoThirds),
        other => other
            .parse::<f64>()
            .map_err(|e| e.to_string())
            .and_then(|p| SchattenP::from_f64(p).map_err(|e| e.to_string())),
    }
}

fn parse_penalty(s: &str) -> std::result::Result<SparsityPenalty, String> {
    s.parse().map_err(|e: lassi::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Phantom(a) => cmd_phantom(a),
        Command::Mask(a) => cmd_mask(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Recon(a) => cmd_recon(a, std::env::args().skip(1).collect()),
        Command::Replay(a) => cmd_replay(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Dicteval(a) => cmd_dicteval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_phantom(a: PhantomArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing phantom spec {}", path.display()))?
        }
        None => PhantomSpec::acceptance(),
    };
    let x = make_phantom(&spec)?;
    io::write_sequence(&a.out, &x)?;
    if let (Some(nc), Some(path)) = (a.coils, &a.coil_out) {
        let d = x.dims();
        io::write_coil_maps(path, &make_coil_maps(d.nx, d.ny, nc, a.coil_seed)?)?;
    }
    println!("wrote {} {}", a.out.display(), x.dims());
    Ok(())
}

fn cmd_mask(a: MaskArgs) -> Result<()> {
    let [nx, ny, nt] = a.shape;
    let mask = match a.pattern {
        Pattern::Cartesian => {
            let Some(accel) = a.accel else { bail!("--pattern cartesian needs --accel") };
            make_cartesian_mask(nx, ny, nt, accel, a.seed)?
        }
        Pattern::Radial => {
            let Some(spokes) = a.spokes else { bail!("--pattern radial needs --spokes") };
            make_pseudoradial_mask(nx, ny, nt, spokes, a.seed, RadialOptions::default())?
        }
    };
    io::write_mask(&a.out, &mask)?;
    println!("acceleration {:.4}", mask.acceleration());
    Ok(())
}

fn load_operator(mask: &Path, coils: Option<&Path>) -> Result<SensingOperator> {
    let mask = io::read_mask(mask)?;
    let maps = coils.map(io::read_coil_maps).transpose()?;
    Ok(SensingOperator::new(mask, maps)?)
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    if !(a.noise >= 0.0 && a.noise.is_finite()) {
        bail!("--noise must be finite and nonnegative, got {}", a.noise);
    }
    let truth = io::read_sequence(&a.truth)?;
    let op = load_operator(&a.mask, a.coils.as_deref())?;
    let clean = op.forward(&truth)?;
    let data = if a.noise > 0.0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed);
        let normal = Normal::new(0.0, a.noise / std::f64::consts::SQRT_2)?;
        let mask = clean.mask().as_slice();
        let nf = mask.len();
        let samples = clean
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &z)| {
                if mask[i % nf] {
                    z + C64::new(normal.sample(&mut rng), normal.sample(&mut rng))
                } else {
                    z
                }
            })
            .collect();
        KtSpaceData::new(clean.coils(), clean.mask().clone(), samples)?
    } else {
        clean
    };
    io::write_kt_data(&a.out, &data)?;
    println!("wrote {} ({} coils, acceleration {:.4})", a.out.display(), data.coils(), data.mask().acceleration());
    Ok(())
}

impl ReconArgs {
    fn patch_config(&self) -> Result<PatchConfig> {
        Ok(PatchConfig::new(self.patch, self.stride)?)
    }

    fn recon_config(&self) -> Result<ReconConfig> {
        let defaults = ReconConfig::default();
        let low_rank = match self.shrink {
            Shrink::Svt => LowRankPenalty::Nuclear,
            Shrink::Hard => LowRankPenalty::Rank,
            Shrink::Schatten => LowRankPenalty::Schatten { p: self.p },
            Shrink::Optshrink => LowRankPenalty::OptShrink { rank: self.rank_l },
        };
        let cfg = ReconConfig {
            lambda_l: self.lambda_l.unwrap_or(defaults.lambda_l),
            lambda_s: self.lambda_s.unwrap_or(defaults.lambda_s),
            lambda_z: self.lambda_z.unwrap_or(defaults.lambda_z),
            bound: self.bound,
            atom_rank: self.atom_rank,
            natoms: self.natoms,
            low_rank,
            penalty: self.penalty,
            step: self.step,
            outer_iters: self.outer,
            dict_sweeps: self.dict_sweeps,
            prox_iters: self.prox_iters,
            patch: self.patch_config()?,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn lps_config(&self) -> LpsConfig {
        let defaults = LpsConfig::default();
        LpsConfig {
            lambda_l: self.lambda_l.unwrap_or(defaults.lambda_l),
            lambda_s: self.lambda_s.unwrap_or(defaults.lambda_s),
            iters: self.lps_iters,
            step: self.step,
            seed: self.seed,
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_recon(a: ReconArgs, argv: Vec<String>) -> Result<()> {
    let start = Instant::now();
    let op = load_operator(&a.mask, a.coils.as_deref())?;
    let d = io::read_kt_data(&a.data, op.mask().clone())?;
    if d.coils() != op.coils() {
        bail!("data has {} coils but the coil maps have {}", d.coils(), op.coils());
    }
    let reference = a.reference.as_deref().map(io::read_sequence).transpose()?;
    let dims = op.dims();
    let load_init = |path: &Option<PathBuf>, what: &str| -> Result<Option<DynamicSequence>> {
        let Some(path) = path else { return Ok(None) };
        let x = io::read_sequence(path)?;
        if x.dims() != dims {
            bail!("{what} {} is {} but the mask is {dims}", path.display(), x.dims());
        }
        Ok(Some(x))
    };
    let init_xs = load_init(&a.init_xs, "--init-xs")?;
    let init_xl = load_init(&a.init_xl, "--init-xl")?;
    let zerofill = || zerofill_baseline(&d, &op);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut config = serde_json::Value::Null;
    let mut step = None;
    let (decomposition, trace_csv) = match a.method {
        Method::Zerofill => {
            let x = zerofill()?;
            (Decomposition::new(DynamicSequence::zeros(dims), x)?, None)
        }
        Method::Lps => {
            let cfg = a.lps_config();
            config = serde_json::to_value(&cfg)?;
            // Low-rank block starts from the given sequence, sparse block from zero.
            let init = match (init_xl, init_xs) {
                (None, None) => None,
                (xl, xs) => Some(Decomposition::new(
                    xl.map_or_else(zerofill, Ok)?,
                    xs.unwrap_or_else(|| DynamicSequence::zeros(dims)),
                )?),
            };
            let out = run_lps_baseline(&d, &op, &cfg, init)?;
            step = Some(out.step);
            let mut csv = String::from("iter,objective\n");
            for (i, f) in out.objectives.iter().enumerate() {
                csv.push_str(&format!("{i},{f:e}\n"));
            }
            (out.decomposition, Some(csv))
        }
        Method::Lassi | Method::Dinokat => {
            let cfg = a.recon_config()?;
            config = serde_json::to_value(&cfg)?;
            let dictionary = a.dictionary.as_deref().map(io::read_dictionary).transpose()?;
            let xs = init_xs.map_or_else(zerofill, Ok)?;
            let out = if a.method == Method::Lassi {
                let xl = init_xl.unwrap_or_else(|| DynamicSequence::zeros(dims));
                run_lassi(&d, &op, &cfg, Decomposition::new(xl, xs)?, dictionary, reference.as_ref())?
            } else {
                run_dinokat(&d, &op, &cfg, xs, dictionary, reference.as_ref())?
            };
            step = Some(out.step);
            io::write_dictionary(&a.out.join("dictionary"), &out.dictionary)?;
            let mut steps = String::from("step,objective\n");
            for (i, f) in out.trace.step_objectives.iter().enumerate() {
                steps.push_str(&format!("{i},{f:e}\n"));
            }
            write_text(&a.out.join("objectives.csv"), &steps)?;
            if !out.trace.certified {
                eprintln!("note: this variant has no cost function; the objective column omits the low-rank term");
            }
            if out.trace.clipped_codes > 0 {
                eprintln!("note: {} code magnitudes were clipped at the bound", out.trace.clipped_codes);
            }
            (out.decomposition, Some(out.trace.to_csv()))
        }
    };

    let x = decomposition.combined();
    io::write_sequence(&a.out.join("xl"), &decomposition.xl)?;
    io::write_sequence(&a.out.join("xs"), &decomposition.xs)?;
    io::write_sequence(&a.out.join("x"), &x)?;
    if let Some(csv) = trace_csv {
        write_text(&a.out.join("metrics.csv"), &csv)?;
    }
    let final_nrmse = reference.as_ref().map(|r| nrmse(&x, r, None)).transpose()?;
    if let Some(e) = final_nrmse {
        println!("nrmse {e:.6}");
    }
    let manifest = RunManifest {
        tool: "lassi".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv,
        method: format!("{:?}", a.method).to_lowercase(),
        config,
        seed: a.seed,
        step,
        inputs: [Some(&a.data), Some(&a.mask), a.coils.as_ref(), a.init_xs.as_ref(), a.init_xl.as_ref(), a.dictionary.as_ref(), a.reference.as_ref()]
            .into_iter()
            .flatten()
            .map(|p| p.display().to_string())
            .collect(),
        outputs: a.out.display().to_string(),
        acceleration: op.mask().acceleration(),
        data_peak: d.as_slice().iter().map(|z| z.norm()).fold(0.0, f64::max),
        final_nrmse,
        wall_clock_s: start.elapsed().as_secs_f64(),
    };
    write_text(&a.out.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> Result<()> {
    let text = fs::read_to_string(&a.manifest).with_context(|| format!("reading {}", a.manifest.display()))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", a.manifest.display()))?;
    let mut argv = manifest.argv.clone();
    if let Some(out) = &a.out {
        manifest::replace_flag(&mut argv, "--out", &out.display().to_string());
    }
    let cli = Cli::try_parse_from(std::iter::once("lassi".to_string()).chain(argv.iter().cloned()))
        .context("manifest does not hold a valid recon command line")?;
    match cli.command {
        Command::Recon(r) => cmd_recon(r, argv),
        _ => bail!("manifest does not describe a recon run"),
    }
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let mut reference = io::read_sequence(&a.reference)?;
    let mut recon = io::read_sequence(&a.recon)?;
    if a.magnitude {
        reference = reference.magnitude();
        recon = recon.magnitude();
    }
    println!("nrmse {:.6}", nrmse(&recon, &reference, None)?);
    if let Some(roi) = a.roi {
        println!("nrmse_roi {:.6}", nrmse(&recon, &reference, Some(roi))?);
    }
    if let Some(path) = &a.frames {
        let full = lassi::model::nrmse_per_frame(&recon, &reference, None)?;
        let roi = a.roi.map(|r| lassi::model::nrmse_per_frame(&recon, &reference, Some(r))).transpose()?;
        let mut csv = String::from(if roi.is_some() { "frame,nrmse,nrmse_roi\n" } else { "frame,nrmse\n" });
        for (t, e) in full.iter().enumerate() {
            match &roi {
                Some(r) => csv.push_str(&format!("{t},{e:e},{:e}\n", r[t])),
                None => csv.push_str(&format!("{t},{e:e}\n")),
            }
        }
        write_text(path, &csv)?;
    }
    Ok(())
}

fn cmd_dicteval(a: DictevalArgs) -> Result<()> {
    let x = io::read_sequence(&a.data)?;
    let cfg = PatchConfig::new(a.patch, a.stride)?;
    let geometry = cfg.geometry(x.dims())?;
    let p = extract_patches(&x, &geometry)?;
    let study = NsreStudy {
        natoms: a.natoms.unwrap_or(cfg.patch_len()),
        ranks: a.ranks.clone(),
        lambdas: a.lambdas.clone(),
        sweeps: a.sweeps,
        penalty: a.penalty,
        seed: a.seed,
    };
    let rows = nsre_study(&p, &cfg, &study)?;
    let mut csv = String::from("atom_rank,lambda_z,sparsity_pct,nsre\n");
    for r in &rows {
        csv.push_str(&format!("{},{:e},{:e},{:e}\n", r.atom_rank, r.lambda_z, r.sparsity_pct, r.nsre));
    }
    write_text(&a.out, &csv)?;
    println!("wrote {} ({} rows)", a.out.display(), rows.len());
    Ok(())
}
