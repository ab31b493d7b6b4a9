//! `specforge` command-line interface.
//!
//! Exit codes: 0 success, 1 validation, format or usage error, 2 I/O error,
//! 3 codec subprocess failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use specforge::colorimetry::{self, BitDepth, QuantizationSpec};
use specforge::degrade::{apply_chain, CodecCommand, DegradationConfig};
use specforge::error::{Error, Result};
use specforge::metamer::{self, sample_alpha};
use specforge::optics::{
    self, ChromaticParams, EncodingKind, EncodingSpec, GratingParams, Padding, PsfStack, RotationParams,
    DEFAULT_PSF_SIZE,
};
use specforge::pipeline::{self, PipelineConfig};
use specforge::{io, metrics, oracle, SpectralCube, Srf, FORMAT_VERSIONS};

#[derive(Parser)]
#[command(name = "specforge", about = "Optics-aware spectral data toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SPECFORGE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Project a cube to RGB through a camera response.
    Project(ProjectArgs),
    /// PSF stack utilities.
    Psf {
        #[command(subcommand)]
        command: PsfCmd,
    },
    /// Form RGB through a PSF stack (plain projection without one).
    Form(FormArgs),
    /// Generate a metamer of a cube; prints one JSON line.
    Metamer(MetamerArgs),
    /// Apply shot noise, quantization and an optional codec to an RGB image.
    Degrade(DegradeArgs),
    /// Compare an estimated cube against ground truth.
    Evaluate(EvaluateArgs),
    /// Synthesize a paired dataset from a directory of cubes.
    Synth(SynthArgs),
    /// Metamer separability under several encodings, as CSV.
    Sweep(SweepArgs),
    /// Cross-check fast paths against the dense oracle.
    #[command(hide = true)]
    OracleCheck(OracleArgs),
}

#[derive(Subcommand)]
enum PsfCmd {
    /// Generate a parametric PSF stack.
    Gen(PsfGenArgs),
}

#[derive(Args)]
struct SrfArg {
    /// Camera response CSV (`wavelength_nm,r,g,b`); a synthetic Gaussian
    /// response on the cube's grid when omitted.
    #[arg(long)]
    srf: Option<PathBuf>,
}

impl SrfArg {
    fn load(&self, wavelengths: &[f64]) -> Result<Srf> {
        match &self.srf {
            Some(p) => io::read_srf(p),
            None => Srf::gaussian_rgb(wavelengths),
        }
    }
}

#[derive(Args)]
struct ProjectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    srf: SrfArg,
    /// PNG bit depth.
    #[arg(long, default_value_t = 16, value_parser = parse_bits)]
    bits: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    None,
    Chromatic,
    Grating,
    Rotation,
}

#[derive(Clone, Copy, ValueEnum)]
enum PaddingArg {
    Reflect,
    Circular,
}

impl From<PaddingArg> for Padding {
    fn from(p: PaddingArg) -> Self {
        match p {
            PaddingArg::Reflect => Padding::Reflect,
            PaddingArg::Circular => Padding::Circular,
        }
    }
}

#[derive(Args)]
struct PsfGenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    out: PathBuf,
    /// Odd kernel size.
    #[arg(long, default_value_t = DEFAULT_PSF_SIZE)]
    size: usize,
    #[arg(long, value_enum, default_value = "reflect")]
    padding: PaddingArg,
    /// Wavelength grid as `start:step:end` in nm.
    #[arg(long, default_value = "400:10:700", conflicts_with = "like")]
    wavelengths: String,
    /// Take the wavelength grid from this cube.
    #[arg(long)]
    like: Option<PathBuf>,
    #[arg(long)]
    sigma0: Option<f64>,
    #[arg(long)]
    sigma_slope: Option<f64>,
    #[arg(long)]
    shift_slope: Option<f64>,
    #[arg(long)]
    ref_lambda: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    disp_slope: Option<f64>,
    #[arg(long)]
    sigma_major: Option<f64>,
    #[arg(long)]
    sigma_minor: Option<f64>,
    #[arg(long)]
    angle_span: Option<f64>,
}

#[derive(Args)]
struct FormArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// PSF stack; plain projection when omitted.
    #[arg(long)]
    psf: Option<PathBuf>,
    #[command(flatten)]
    srf: SrfArg,
    #[arg(long, default_value_t = 16, value_parser = parse_bits)]
    bits: u32,
}

#[derive(Args)]
struct MetamerArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    srf: SrfArg,
    #[arg(long, required_unless_present = "random", conflicts_with = "random", allow_negative_numbers = true)]
    alpha: Option<f64>,
    /// Draw alpha uniformly from `--range`.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Alpha range `lo,hi` for `--random`.
    #[arg(long, default_value = "-1,2", allow_hyphen_values = true)]
    range: String,
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Full-scale photon-electron count; 0 disables noise.
    #[arg(long, default_value_t = 0.0)]
    npe: f64,
    /// Quantize to this depth (also the output PNG depth; 16 when omitted).
    #[arg(long, value_parser = parse_bits)]
    bits: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Command template with `{in}` and `{out}` PNG placeholders.
    #[arg(long)]
    codec: Option<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    est: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Directory of `.hsc` cubes; each is paired with its metamer.
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    srf: SrfArg,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    alpha: f64,
    /// Comma-separated encoding kinds.
    #[arg(long, default_value = "none,chromatic,grating,rotation")]
    encodings: String,
    #[arg(long, default_value_t = DEFAULT_PSF_SIZE)]
    psf_size: usize,
    #[arg(long, value_enum, default_value = "reflect")]
    padding: PaddingArg,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 8)]
    size: usize,
    #[arg(long, default_value_t = 5)]
    bands: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_bits(s: &str) -> std::result::Result<u32, String> {
    match s {
        "8" => Ok(8),
        "16" => Ok(16),
        _ => Err(format!("bit depth must be 8 or 16, got {s}")),
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("bad wavelength grid {spec:?}")))?;
    let [start, step, end] = parts[..] else {
        return Err(usage(format!("wavelength grid must be start:step:end, got {spec:?}")));
    };
    if !(step > 0.0) || end < start {
        return Err(usage(format!("bad wavelength grid {spec:?}")));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| start + step * i as f64).collect())
}

fn parse_range(spec: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = spec.split(',').collect();
    let [lo, hi] = parts[..] else {
        return Err(usage(format!("range must be lo,hi, got {spec:?}")));
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| usage(format!("bad range {spec:?}")));
    Ok((parse(lo)?, parse(hi)?))
}

fn depth(bits: u32) -> BitDepth {
    BitDepth::from_bits(bits).expect("validated by parse_bits")
}

fn write_png(image: &specforge::RgbImage, path: &Path, bits: u32) -> Result<()> {
    let d = depth(bits);
    io::write_rgb(&colorimetry::quantize(image, QuantizationSpec::new(d)), path, d)
}

fn emit(line: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}")?;
    out.flush()?;
    Ok(())
}

fn first_given(flags: &[(&'static str, Option<f64>)]) -> Option<&'static str> {
    flags.iter().find(|(_, v)| v.is_some()).map(|(n, _)| *n)
}

fn psf_gen(a: &PsfGenArgs) -> Result<()> {
    let wl = match &a.like {
        Some(p) => io::read_cube(p)?.wavelengths().to_vec(),
        None => parse_grid(&a.wavelengths)?,
    };
    let chromatic = [
        ("--sigma0", a.sigma0),
        ("--sigma-slope", a.sigma_slope),
        ("--shift-slope", a.shift_slope),
    ];
    let grating = [("--eta", a.eta), ("--disp-slope", a.disp_slope)];
    let rotation = [
        ("--sigma-major", a.sigma_major),
        ("--sigma-minor", a.sigma_minor),
        ("--angle-span", a.angle_span),
    ];
    let lambda = [("--ref-lambda", a.ref_lambda)];
    let (kind, foreign): (EncodingKind, Vec<&[(&'static str, Option<f64>)]>) = match a.kind {
        KindArg::None => (EncodingKind::None, vec![&chromatic, &grating, &rotation, &lambda]),
        KindArg::Chromatic => {
            let d = ChromaticParams::default();
            (
                EncodingKind::Chromatic(ChromaticParams {
                    sigma0: a.sigma0.unwrap_or(d.sigma0),
                    sigma_slope: a.sigma_slope.unwrap_or(d.sigma_slope),
                    shift_slope: a.shift_slope.unwrap_or(d.shift_slope),
                    ref_lambda: a.ref_lambda.unwrap_or(d.ref_lambda),
                }),
                vec![&grating, &rotation],
            )
        }
        KindArg::Grating => {
            let d = GratingParams::default();
            (
                EncodingKind::Grating(GratingParams {
                    eta: a.eta.unwrap_or(d.eta),
                    disp_slope: a.disp_slope.unwrap_or(d.disp_slope),
                    ref_lambda: a.ref_lambda.unwrap_or(d.ref_lambda),
                }),
                vec![&chromatic, &rotation],
            )
        }
        KindArg::Rotation => {
            let d = RotationParams::default();
            (
                EncodingKind::Rotation(RotationParams {
                    sigma_major: a.sigma_major.unwrap_or(d.sigma_major),
                    sigma_minor: a.sigma_minor.unwrap_or(d.sigma_minor),
                    angle_span: a.angle_span.unwrap_or(d.angle_span),
                }),
                vec![&chromatic, &grating, &lambda],
            )
        }
    };
    if let Some(flag) = foreign.into_iter().find_map(first_given) {
        return Err(usage(format!("{flag} does not apply to this PSF kind")));
    }
    let spec = EncodingSpec {
        kind,
        size: a.size,
        padding: a.padding.into(),
    };
    // kind none writes centered impulses, which form like plain projection
    let stack = match spec.build(&wl)? {
        Some(s) => s,
        None => PsfStack::delta(wl, a.size, spec.padding)?,
    };
    optics::write_psf(&stack, &a.out)
}

fn metamer_cmd(a: &MetamerArgs) -> Result<()> {
    let cube = io::read_cube(&a.input)?;
    let srf = a.srf.load(cube.wavelengths())?;
    let alpha = match (a.alpha, a.random) {
        (Some(alpha), false) => alpha,
        (None, true) => {
            let (lo, hi) = parse_range(&a.range)?;
            sample_alpha(&mut ChaCha8Rng::seed_from_u64(a.seed), lo, hi)?
        }
        _ => return Err(usage("give exactly one of --alpha and --random")),
    };
    let result = metamer::generate(&cube, &srf, alpha)?;
    io::write_cube(&result.cube, &a.out)?;
    emit(&serde_json::to_string(&result.summary()).expect("plain struct"))
}

fn degrade_cmd(a: &DegradeArgs) -> Result<()> {
    let image = io::read_rgb(&a.input)?;
    let config = DegradationConfig {
        npe: a.npe,
        quant: a.bits.map(|b| QuantizationSpec::new(depth(b))),
        codec: a.codec.clone().map(CodecCommand::new).transpose()?,
        seed: a.seed,
    };
    let out = apply_chain(&image, &config)?;
    write_png(&out, &a.out, a.bits.unwrap_or(16))
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let est = io::read_cube(&a.est)?;
    let gt = io::read_cube(&a.gt)?;
    let r = metrics::report(&est, &gt)?;
    if a.json {
        return emit(&serde_json::to_string(&r).expect("plain struct"));
    }
    let psnr = if r.psnr_db.is_infinite() {
        "inf".to_string()
    } else {
        format!("{:.4}", r.psnr_db)
    };
    emit(&format!(
        "mrae     {:.6e}\nrmse     {:.6e}\npsnr_db  {psnr}\nsam_rad  {:.6e}\nl1       {:.6e}\npixels_excluded_sam  {}\ndenom_floored_mrae   {}",
        r.mrae, r.rmse, r.sam_rad, r.l1, r.pixels_excluded_sam, r.denom_floored_mrae
    ))
}

fn synth_cmd(a: &SynthArgs, threads: Option<usize>) -> Result<()> {
    let mut config = PipelineConfig::from_toml_file(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let summary = pipeline::run_synth(&config, &a.input, &a.out, threads)?;
    emit(&serde_json::to_string(&summary).expect("plain struct"))
}

fn sweep_cmd(a: &SweepArgs) -> Result<()> {
    let scenes = std::fs::read_dir(&a.input)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    let mut paths: Vec<PathBuf> = scenes
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "hsc"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(usage(format!("no .hsc files in {}", a.input.display())));
    }
    let encodings: Vec<EncodingSpec> = a
        .encodings
        .split(',')
        .map(|n| {
            EncodingSpec::from_name(n.trim()).map(|e| EncodingSpec {
                size: a.psf_size,
                padding: a.padding.into(),
                ..e
            })
        })
        .collect::<Result<_>>()?;
    let mut csv = String::from(pipeline::SWEEP_HEADER);
    csv.push('\n');
    for path in &paths {
        let cube = io::read_cube(path)?;
        let srf = a.srf.load(cube.wavelengths())?;
        let m = metamer::generate(&cube, &srf, a.alpha)?;
        let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let rows = pipeline::encoding_sweep(&[(id, cube, m.cube)], &srf, &encodings)?;
        let body = pipeline::sweep_csv(&rows);
        csv.push_str(body.split_once('\n').map_or("", |(_, rest)| rest));
    }
    match &a.out {
        Some(p) => io::write_atomic(p, csv.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(csv.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn oracle_cmd(a: &OracleArgs) -> Result<()> {
    let (n, k) = (a.size, a.bands);
    if n < 3 || k < 3 {
        return Err(usage("oracle-check needs --size >= 3 and --bands >= 3"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let wl: Vec<f64> = (0..k).map(|i| 400.0 + 300.0 * i as f64 / (k - 1) as f64).collect();
    let cube = SpectralCube::from_fn(n, n, wl.clone(), |_, _, _| rng.random::<f64>())?;
    let q: Vec<[f64; 3]> = (0..k).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let srf = Srf::new(wl.clone(), q)?;
    let mut kernels = Vec::with_capacity(9 * k);
    for _ in 0..k {
        let raw: Vec<f64> = (0..9).map(|_| rng.random::<f64>()).collect();
        let s: f64 = raw.iter().sum();
        kernels.extend(raw.iter().map(|v| v / s));
    }
    let psf = PsfStack::new(wl, 3, 3, kernels, Padding::Circular)?;
    let fast = optics::form_aberrated(&cube, &psf, &srf)?;
    let dense = oracle::form_aberrated_dense(&cube, &psf, &srf)?;
    let formation_diff = fast
        .data()
        .iter()
        .zip(dense.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let p_dense = oracle::projector_dense(&srf)?;
    let p_fast = metamer::Projector::new(&srf)?;
    let projector_diff = p_fast
        .matrix()
        .iter()
        .zip(&p_dense)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let ok = formation_diff <= 1e-6 && projector_diff <= 1e-9;
    emit(
        &serde_json::json!({
            "formation_max_abs_diff": formation_diff,
            "projector_max_abs_diff": projector_diff,
            "ok": ok,
        })
        .to_string(),
    )?;
    if ok {
        Ok(())
    } else {
        Err(Error::Validation("oracle disagreement beyond tolerance".into()))
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // ignore a pool that is already initialized
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Cmd::Project(a) => {
            let cube = io::read_cube(&a.input)?;
            let srf = a.srf.load(cube.wavelengths())?;
            write_png(&colorimetry::project(&cube, &srf)?, &a.out, a.bits)
        }
        Cmd::Psf {
            command: PsfCmd::Gen(a),
        } => psf_gen(a),
        Cmd::Form(a) => {
            let cube = io::read_cube(&a.input)?;
            let srf = a.srf.load(cube.wavelengths())?;
            let psf = a.psf.as_ref().map(optics::read_psf).transpose()?;
            write_png(&optics::form(&cube, psf.as_ref(), &srf)?, &a.out, a.bits)
        }
        Cmd::Metamer(a) => metamer_cmd(a),
        Cmd::Degrade(a) => degrade_cmd(a),
        Cmd::Evaluate(a) => evaluate_cmd(a),
        Cmd::Synth(a) => synth_cmd(a, cli.threads),
        Cmd::Sweep(a) => sweep_cmd(a),
        Cmd::OracleCheck(a) => oracle_cmd(a),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_) | Error::Format(_) => 1,
        Error::Io(_) => 2,
        Error::Codec { .. } => 3,
    }
}

fn main() -> ExitCode {
    let version: &'static str =
        Box::leak(format!("{} (formats: {FORMAT_VERSIONS})", env!("CARGO_PKG_VERSION")).into_boxed_str());
    let matches = match Cli::command().version(version).try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("specforge: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
