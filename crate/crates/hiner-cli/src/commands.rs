//! One function per subcommand. Each returns the report it would print.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hiner::bitstream::{bpppb, compression_ratio, reconstruct_from_bitstream, HinerBitstream, RdPoint, StreamSizes};
use hiner::codec::{init_model, EmbedShape};
use hiner::downstream::{train_variant, ClassifierCheckpoint, ClassifierSource, ConfusionMatrix};
use hiner::hsi_io::{
    load_cube, normalize, read_labels, save_cube, synth_cube, wavelength_grid, write_labels, CubeFormat,
    SyntheticSpec,
};
use hiner::training::{evaluate_psnr, fit_and_measure, Ablation};
use hiner::HsiCube;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

/// What a command prints, to stdout or `--out`.
#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Json(serde_json::Value),
    Csv(String),
}

impl Report {
    fn json<T: Serialize>(value: &T) -> Result<Self, CliError> {
        serde_json::to_value(value).map(Report::Json).map_err(|e| CliError::Data(e.to_string()))
    }

    pub fn render(&self) -> String {
        match self {
            Report::Json(v) => serde_json::to_string_pretty(v).expect("values serialize") + "\n",
            Report::Csv(s) => s.clone(),
        }
    }
}

fn format_of(path: &Path) -> Result<CubeFormat, CliError> {
    CubeFormat::from_path(path).ok_or_else(|| {
        CliError::Config(format!("{}: use .json/.hsrb for the container or .hdr/.raw for ENVI", path.display()))
    })
}

/// Loads a cube, scaling raw sensor counts into `[0, 1]` by the global maximum.
pub fn load_input(path: &Path) -> Result<HsiCube, CliError> {
    let cube = load_cube(path, format_of(path)?)?;
    Ok(if cube.global_max() > 1.0 { normalize(&cube)? } else { cube })
}

fn clamp01(mut v: Vec<f32>) -> Vec<f32> {
    v.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    v
}

#[derive(Debug, Serialize)]
struct SynthReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    cube: PathBuf,
    labels: PathBuf,
    dims: [usize; 3],
    train_pixels: usize,
    test_pixels: usize,
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Report, CliError> {
    let cube_out = RunConfig::require(&cfg.io.cube_out, "io.cube_out")?;
    let labels_out = RunConfig::require(&cfg.io.labels_out, "io.labels_out")?;
    let s = &cfg.synth;
    let spec = SyntheticSpec {
        height: s.height,
        width: s.width,
        bands: s.bands,
        class_count: s.classes,
        seed: cfg.seed,
        noise_sigma: s.noise_sigma,
        signature_smoothness: s.smoothness,
    };
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let format = format_of(cube_out)?;
    let (mut cube, labels) = synth_cube(&spec)?;
    if format == CubeFormat::EnviRaw {
        cube = to_counts(&cube)?;
    }
    save_cube(&cube, cube_out, format)?;
    write_labels(&labels, labels_out)?;
    Report::json(&SynthReport {
        command: "synth",
        config: cfg,
        cube: cube_out.to_path_buf(),
        labels: labels_out.to_path_buf(),
        dims: [s.height, s.width, s.bands],
        train_pixels: labels.train_indices().len(),
        test_pixels: labels.test_indices().len(),
    })
}

/// `[0, 1]` values as 16-bit counts.
fn to_counts(cube: &HsiCube) -> Result<HsiCube, CliError> {
    let data = cube.data().iter().map(|&v| (v.clamp(0.0, 1.0) * u16::MAX as f32).round()).collect();
    Ok(HsiCube::new(data, cube.bands(), cube.height(), cube.width(), cube.source_bitdepth())?)
}

#[derive(Debug, Serialize)]
struct ConvertReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    input: PathBuf,
    output: PathBuf,
    dims: [usize; 3],
}

pub fn cmd_convert(cfg: &RunConfig) -> Result<Report, CliError> {
    let input = RunConfig::require(&cfg.io.input, "io.input")?;
    let output = RunConfig::require(&cfg.io.cube_out, "io.cube_out")?;
    let out_format = format_of(output)?;
    let cube = load_input(input)?;
    let cube = if out_format == CubeFormat::EnviRaw { to_counts(&cube)? } else { cube };
    save_cube(&cube, output, out_format)?;
    let (h, w, c) = cube.dims();
    Report::json(&ConvertReport {
        command: "convert",
        config: cfg,
        input: input.to_path_buf(),
        output: output.to_path_buf(),
        dims: [h, w, c],
    })
}

#[derive(Debug, Serialize)]
struct EncodeReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    stream: PathBuf,
    dims: [usize; 3],
    widths: Vec<usize>,
    bitwidth: u8,
    payload_bytes: usize,
    file_bytes: usize,
    sizes: StreamSizes,
    bpppb: f64,
    file_bpppb: f64,
    compression_ratio: f64,
    psnr_float: f64,
    psnr_quantized: f64,
    psnr_float_per_band: Vec<f64>,
    psnr_quantized_per_band: Vec<f64>,
    wall_time_secs: f64,
    rd_point: RdPoint,
}

pub fn cmd_encode(cfg: &RunConfig) -> Result<Report, CliError> {
    let input = RunConfig::require(&cfg.io.input, "io.input")?;
    let stream_out = RunConfig::require(&cfg.io.stream_out, "io.stream_out")?;
    let loss = cfg.train.loss_config()?;
    hiner::bitstream::check_bitwidth(cfg.model.bitwidth)?;
    let cube = load_input(input)?;
    let (h, w, c) = cube.dims();
    let arch = cfg.model.arch(h, w)?;
    let grid = wavelength_grid(c)?;
    let model = init_model(cube.dims(), &arch, cfg.model.budget_bytes, cfg.seed)?;
    let train = cfg.train.train_config(cfg.seed);
    let (model, outcome, bytes) =
        fit_and_measure(&cube, &grid, model, &loss, &train, cfg.model.bitwidth, cfg.model.include_encoder)?;
    fs::write(stream_out, &bytes).map_err(|e| CliError::Io(format!("{}: {e}", stream_out.display())))?;
    if let Some(log) = &cfg.io.log_out {
        outcome.report.save_csv(log)?;
    }
    let target = match &outcome.report.permutation {
        Some(p) => p.apply(&cube)?,
        None => cube.clone(),
    };
    let (_, float_per_band) = evaluate_psnr(&clamp01(model.reconstruct(&grid)?), &target)?;
    let sizes = HinerBitstream::from_bytes(&bytes)?.sizes()?;
    let cr = compression_ratio(cube.source_bitdepth(), outcome.bpppb);
    Report::json(&EncodeReport {
        command: "encode",
        config: cfg,
        stream: stream_out.to_path_buf(),
        dims: [h, w, c],
        widths: model.decoder.config.channel_widths.clone(),
        bitwidth: cfg.model.bitwidth,
        payload_bytes: sizes.rate_payload,
        file_bytes: bytes.len(),
        sizes,
        bpppb: outcome.bpppb,
        file_bpppb: outcome.file_bpppb,
        compression_ratio: cr,
        psnr_float: outcome.psnr_float,
        psnr_quantized: outcome.psnr_quantized,
        psnr_float_per_band: float_per_band,
        psnr_quantized_per_band: outcome.psnr_quantized_per_band.clone(),
        wall_time_secs: outcome.report.wall_time_secs,
        rd_point: RdPoint {
            label: train.ablation.name().into(),
            bpppb: outcome.bpppb,
            mean_psnr: outcome.psnr_quantized,
            compression_ratio: cr,
        },
    })
}

fn read_stream(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct DecodeReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    stream: PathBuf,
    output: PathBuf,
    dims: [usize; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    psnr_per_band: Option<Vec<f64>>,
}

pub fn cmd_decode(cfg: &RunConfig) -> Result<Report, CliError> {
    let stream = RunConfig::require(&cfg.io.stream, "io.stream")?;
    let output = RunConfig::require(&cfg.io.cube_out, "io.cube_out")?;
    let out_format = format_of(output)?;
    let bytes = read_stream(stream)?;
    let cube = reconstruct_from_bitstream(&bytes, None)?;
    let (psnr, per_band) = match &cfg.io.reference {
        Some(r) => {
            let (m, b) = evaluate_psnr(cube.data(), &load_input(r)?)?;
            (Some(m), Some(b))
        }
        None => (None, None),
    };
    let written = if out_format == CubeFormat::EnviRaw { to_counts(&cube)? } else { cube.clone() };
    save_cube(&written, output, out_format)?;
    let (h, w, c) = cube.dims();
    Report::json(&DecodeReport {
        command: "decode",
        config: cfg,
        stream: stream.to_path_buf(),
        output: output.to_path_buf(),
        dims: [h, w, c],
        psnr,
        psnr_per_band: per_band,
    })
}

#[derive(Debug, Serialize)]
struct EvalReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    reference: PathBuf,
    mean_psnr: f64,
    psnr_per_band: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bpppb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compression_ratio: Option<f64>,
}

/// PSNR of a stream (or of a decoded cube given as `io.input`) against
/// `io.reference`; streams also report their rate.
pub fn cmd_eval(cfg: &RunConfig) -> Result<Report, CliError> {
    let reference_path = RunConfig::require(&cfg.io.reference, "io.reference")?;
    let reference = load_input(reference_path)?;
    let (candidate, rate) = match (&cfg.io.stream, &cfg.io.input) {
        (Some(s), _) => {
            let bytes = read_stream(s)?;
            let sizes = HinerBitstream::from_bytes(&bytes)?.sizes()?;
            let cube = reconstruct_from_bitstream(&bytes, Some(reference.dims()))?;
            (cube, Some(bpppb(sizes.rate_payload, reference.dims())))
        }
        (None, Some(i)) => (load_input(i)?, None),
        (None, None) => return Err(CliError::Config("eval needs io.stream or io.input".into())),
    };
    let (mean, per_band) = evaluate_psnr(candidate.data(), &reference)?;
    Report::json(&EvalReport {
        command: "eval",
        config: cfg,
        reference: reference_path.to_path_buf(),
        mean_psnr: mean,
        psnr_per_band: per_band,
        bpppb: rate,
        compression_ratio: rate.map(|r| compression_ratio(reference.source_bitdepth(), r)),
    })
}

pub const ABLATE_HEADER: &str = "variant,bpppb,psnr_float,psnr_q8";

fn ablate_input(cfg: &RunConfig) -> Result<HsiCube, CliError> {
    match &cfg.io.input {
        Some(p) => load_input(p),
        None => {
            let s = &cfg.synth;
            let spec = SyntheticSpec {
                height: s.height,
                width: s.width,
                bands: s.bands,
                class_count: s.classes,
                seed: cfg.seed,
                noise_sigma: s.noise_sigma,
                signature_smoothness: s.smoothness,
            };
            spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
            Ok(synth_cube(&spec)?.0)
        }
    }
}

/// Trains every variant at the same seed and budget. A failing variant gets
/// a `NaN` row and a note on stderr; the rest still run.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<Report, CliError> {
    if cfg.ablate.variants.is_empty() && cfg.ablate.embed_sizes.is_empty() {
        return Err(CliError::Config("ablate needs at least one variant or embedding size".into()));
    }
    let loss = cfg.train.loss_config()?;
    let cube = ablate_input(cfg)?;
    let (h, w, c) = cube.dims();
    let grid = wavelength_grid(c)?;
    let base_arch = cfg.model.arch(h, w)?;
    let mut runs: Vec<(String, Ablation, EmbedShape)> =
        cfg.ablate.variants.iter().map(|&a| (a.name().to_string(), a, base_arch.embed_shape)).collect();
    for &[eh, ew, ec] in &cfg.ablate.embed_sizes {
        runs.push((format!("embed_{eh}x{ew}x{ec}"), Ablation::Default, EmbedShape::new(eh, ew, ec)));
    }
    let mut csv = format!("{ABLATE_HEADER}\n");
    for (label, ablation, embed) in runs {
        let run = || -> Result<(f64, f64, f64), CliError> {
            let mut arch = base_arch.clone();
            arch.embed_shape = embed;
            let model = init_model(cube.dims(), &arch, cfg.model.budget_bytes, cfg.seed)?;
            let train = hiner::training::TrainConfig { ablation, ..cfg.train.train_config(cfg.seed) };
            let (_, out, _) = fit_and_measure(&cube, &grid, model, &loss, &train, cfg.model.bitwidth, false)?;
            Ok((out.bpppb, out.psnr_float, out.psnr_quantized))
        };
        let (r, pf, pq) = run().unwrap_or_else(|e| {
            eprintln!("{label}: {e}");
            (f64::NAN, f64::NAN, f64::NAN)
        });
        csv += &format!("{label},{r},{pf},{pq}\n");
    }
    Ok(Report::Csv(csv))
}

#[derive(Debug, Serialize)]
struct VariantResult {
    variant: &'static str,
    beta: f64,
    eta: f64,
    enable_prob: f64,
    overall_accuracy: f64,
    average_accuracy: f64,
    kappa: f64,
    per_class_accuracy: Vec<Option<f64>>,
    confusion: ConfusionMatrix,
    wall_time_secs: f64,
}

#[derive(Debug, Serialize)]
struct ClassifyReport<'a> {
    command: &'static str,
    config: &'a RunConfig,
    stream: PathBuf,
    labels: PathBuf,
    bpppb: f64,
    compression_ratio: f64,
    variants: Vec<VariantResult>,
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<Report, CliError> {
    let stream_path = RunConfig::require(&cfg.io.stream, "io.stream")?;
    let labels_path = RunConfig::require(&cfg.io.labels, "io.labels")?;
    if !labels_path.with_extension("lbl.json").exists() {
        return Err(CliError::Config(format!("label file {} does not exist", labels_path.display())));
    }
    if cfg.classify.variants.is_empty() {
        return Err(CliError::Config("classify.variants is empty".into()));
    }
    let train_cfg = cfg.classify.train_config(cfg.seed)?;
    let isi = cfg.classify.isi()?;
    let labels = read_labels(labels_path)?;
    let bytes = read_stream(stream_path)?;
    let stream = HinerBitstream::from_bytes(&bytes)?;
    let dims = stream.header.dims();
    let rate = bpppb(stream.sizes()?.rate_payload, dims);
    let mut variants = Vec::new();
    let mut checkpoints = BTreeMap::new();
    for &v in &cfg.classify.variants {
        let (out, ckpt) = train_variant(ClassifierSource::Compressed(&stream), &labels, v, &isi, &train_cfg)?;
        variants.push(VariantResult {
            variant: v.name(),
            beta: out.beta,
            eta: out.isi.eta,
            enable_prob: out.isi.enable_prob,
            overall_accuracy: out.metrics.overall_accuracy,
            average_accuracy: out.metrics.average_accuracy,
            kappa: out.metrics.kappa,
            per_class_accuracy: out.metrics.per_class_accuracy,
            confusion: out.metrics.confusion,
            wall_time_secs: out.report.wall_time_secs,
        });
        checkpoints.insert(v.name(), ckpt);
    }
    if let Some(path) = &cfg.io.checkpoint_out {
        let map: BTreeMap<&str, &ClassifierCheckpoint> = checkpoints.iter().map(|(k, v)| (*k, v)).collect();
        let text = serde_json::to_string(&map).map_err(|e| CliError::Data(e.to_string()))?;
        fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Report::json(&ClassifyReport {
        command: "classify",
        config: cfg,
        stream: stream_path.to_path_buf(),
        labels: labels_path.to_path_buf(),
        bpppb: rate,
        compression_ratio: compression_ratio(16, rate),
        variants,
    })
}
