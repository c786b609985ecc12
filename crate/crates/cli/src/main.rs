use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use leadsheet::encoding::{encode, read_corpus, write_corpus, EncodedSequence};
use leadsheet::eval::{corpus_stats, evaluate, format_report, read_groups, read_ratings, EvalError};
use leadsheet::generate::{
    check_compatible, condition_on_existing, sample_melody, sample_one_stage, sample_template, sha256_hex,
    GenerateError, Generated, SampleConfig, Sidecar,
};
use leadsheet::models::{Architecture, MelodyModel, Model, ModelError, NoBiLstmBaseline, OneStageBaseline, StageOneModel, StageTwoModel};
use leadsheet::preprocess::{preprocess_document, preprocess_files, SheetReport, SheetStatus};
use leadsheet::score::LeadSheet;
use leadsheet::score_io::{export_midi, export_musicxml};
use leadsheet::train::{train_variant, RunOptions, TrainConfig, TrainError};
use leadsheet_neural::{Checkpoint, NeuralError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "leadsheet", version, about = "Two-stage lead sheet generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean and encode a directory of MusicXML files into a corpus.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Per-sheet kept/dropped lines; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train one model variant on an encoded corpus.
    Train {
        /// stage1, stage2, one-stage or no-bilstm.
        #[arg(long)]
        variant: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Directory for checkpoints and metrics.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Zero wall-clock fields in the metrics.
        #[arg(long)]
        deterministic: bool,
    },
    /// Sample a lead sheet and write MusicXML, MIDI and a metadata sidecar.
    Generate {
        /// Chord/rhythm checkpoint, or a one-stage checkpoint on its own.
        #[arg(long)]
        stage1: Option<PathBuf>,
        /// Melody checkpoint.
        #[arg(long)]
        stage2: Option<PathBuf>,
        /// Output path; `.musicxml`, `.mid` and `.meta` are written next to it.
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// MusicXML sheet whose chords and rhythm are kept.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        bars: Option<usize>,
        #[arg(long)]
        tau_melody: Option<f64>,
        #[arg(long)]
        tau_chord: Option<f64>,
        #[arg(long)]
        tau_rhythm: Option<f64>,
        #[arg(long)]
        greedy: bool,
        #[arg(long, default_value_t = 120.0)]
        tempo: f64,
        /// Leave the creation time out of the sidecar.
        #[arg(long)]
        deterministic: bool,
    },
    /// Standardize listening-test ratings and report per-model means.
    Eval {
        /// Ratings: user,clip,question,rating.
        #[arg(long)]
        input: PathBuf,
        /// Clip groups: clip,label.
        #[arg(long)]
        groups: PathBuf,
        /// Report file; stdout when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Histograms of an encoded corpus.
    Stats {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

const USAGE: u8 = 1;
const IO: u8 = 2;
const EMPTY: u8 = 3;
const INCOMPATIBLE: u8 = 4;
const NUMERIC: u8 = 5;

fn fail(code: u8, message: impl fmt::Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

fn io_fail(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| fail(IO, format!("{}: {e}", path.display()))
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Neural(NeuralError::NumericFault { .. }) => NUMERIC,
        ModelError::Checkpoint(_)
        | ModelError::LayoutMismatch { .. }
        | ModelError::WrongArchitecture { .. }
        | ModelError::MissingTensor(_) => INCOMPATIBLE,
        _ => USAGE,
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        let code = match &e {
            TrainError::Config(_) => USAGE,
            TrainError::Batching(_) => EMPTY,
            TrainError::Model(m) => model_code(m),
            TrainError::Io { .. } => IO,
            TrainError::NumericFault { .. } => NUMERIC,
        };
        fail(code, e)
    }
}

impl From<GenerateError> for Failure {
    fn from(e: GenerateError) -> Self {
        let code = match &e {
            GenerateError::Model(m) => model_code(m),
            GenerateError::Incompatible { .. } => INCOMPATIBLE,
            _ => USAGE,
        };
        fail(code, e)
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        let code = match &e {
            EvalError::Empty | EvalError::EmptyGroup(_) | EvalError::NoGroups => EMPTY,
            _ => USAGE,
        };
        fail(code, e)
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(io_fail(p)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_corpus(path: &Path) -> Result<Vec<EncodedSequence>, Failure> {
    let file = fs::File::open(path).map_err(io_fail(path))?;
    read_corpus(std::io::BufReader::new(file)).map_err(|e| fail(IO, format!("{}: {e}", path.display())))
}

fn preprocess(input: &Path, output: &Path, report: Option<&Path>) -> Result<(), Failure> {
    let mut paths: Vec<PathBuf> = fs::read_dir(input)
        .map_err(io_fail(input))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| ["xml", "musicxml"].contains(&x.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    let (sheets, mut lines) = preprocess_files(&paths);
    let mut corpus = Vec::with_capacity(sheets.len());
    let mut kept = sheets.into_iter();
    for line in lines.iter_mut() {
        if let SheetStatus::Kept { .. } = line.status {
            let sheet = kept.next().expect("one sheet per kept line");
            match encode(&sheet) {
                Ok(seq) => corpus.push(seq),
                Err(e) => {
                    log::warn!("{}: {e}", line.source);
                    line.status = SheetStatus::Dropped(leadsheet::preprocess::DropReason::Empty);
                }
            }
        }
    }
    let text: String = lines.iter().map(|l: &SheetReport| format!("{l}\n")).collect();
    write_or_print(report, &text)?;
    if corpus.is_empty() {
        return Err(fail(EMPTY, format!("no sheets kept out of {}", paths.len())));
    }
    let mut buf = Vec::new();
    write_corpus(&mut buf, &corpus).map_err(io_fail(output))?;
    fs::write(output, buf).map_err(io_fail(output))?;
    eprintln!("kept {} of {} sheets", corpus.len(), paths.len());
    Ok(())
}

fn train(variant: &str, input: &Path, config: &Path, output: &Path, seed: Option<u64>, deterministic: bool) -> Result<(), Failure> {
    let arch = Architecture::from_name(variant)
        .ok_or_else(|| fail(USAGE, format!("unknown variant {variant:?}; expected stage1, stage2, one-stage or no-bilstm")))?;
    let text = fs::read_to_string(config).map_err(io_fail(config))?;
    let mut cfg: TrainConfig = text
        .parse()
        .map_err(|e| fail(USAGE, format!("{}: {e}", config.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let corpus = load_corpus(input)?;
    let summary = train_variant(arch, &corpus, &cfg, &RunOptions::new(output, deterministic))?;
    eprintln!(
        "{}: {} steps, final checkpoint {}",
        arch.name(),
        summary.steps,
        summary.final_checkpoint.display()
    );
    Ok(())
}

struct Loaded {
    checkpoint: Checkpoint,
    sha256: String,
    arch: Architecture,
}

fn load_checkpoint(path: &Path) -> Result<Loaded, Failure> {
    let bytes = fs::read(path).map_err(io_fail(path))?;
    let checkpoint = Checkpoint::from_bytes(&bytes).map_err(|e| fail(INCOMPATIBLE, format!("{}: {e}", path.display())))?;
    let arch = Architecture::from_tag(checkpoint.architecture).ok_or_else(|| {
        fail(
            INCOMPATIBLE,
            format!("{}: unknown architecture tag {}", path.display(), checkpoint.architecture),
        )
    })?;
    Ok(Loaded {
        sha256: sha256_hex(&bytes),
        checkpoint,
        arch,
    })
}

fn two_stage<M: MelodyModel<f32> + Model<f32>>(
    stage1: &Loaded,
    stage2: &Loaded,
    config: &SampleConfig,
) -> Result<Generated, Failure> {
    check_compatible(&stage1.checkpoint, &stage2.checkpoint)?;
    let s1 = StageOneModel::<f32>::from_checkpoint(&stage1.checkpoint).map_err(GenerateError::from)?;
    let s2 = M::from_checkpoint(&stage2.checkpoint).map_err(GenerateError::from)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let template = sample_template(&s1, config, None, &mut rng)?;
    let sheet = sample_melody(&s2, &template.steps, config, &mut rng)?;
    Ok(Generated {
        sheet,
        truncated: template.truncated,
    })
}

fn conditioned<M: MelodyModel<f32> + Model<f32>>(stage2: &Loaded, source: &LeadSheet, config: &SampleConfig) -> Result<Generated, Failure> {
    check_compatible(&stage2.checkpoint, &stage2.checkpoint)?;
    let s2 = M::from_checkpoint(&stage2.checkpoint).map_err(GenerateError::from)?;
    Ok(Generated {
        sheet: condition_on_existing(&s2, source, config)?,
        truncated: false,
    })
}

struct GenerateArgs {
    stage1: Option<PathBuf>,
    stage2: Option<PathBuf>,
    output: PathBuf,
    config: Option<PathBuf>,
    template: Option<PathBuf>,
    seed: Option<u64>,
    bars: Option<usize>,
    tau_melody: Option<f64>,
    tau_chord: Option<f64>,
    tau_rhythm: Option<f64>,
    greedy: bool,
    tempo: f64,
    deterministic: bool,
}

fn sample_config(a: &GenerateArgs) -> Result<SampleConfig, Failure> {
    let mut cfg = match &a.config {
        Some(p) => fs::read_to_string(p)
            .map_err(io_fail(p))?
            .parse()
            .map_err(|e| fail(USAGE, format!("{}: {e}", p.display())))?,
        None => SampleConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.bars {
        cfg.target_bars = v;
    }
    if let Some(v) = a.tau_melody {
        cfg.tau_melody = v;
    }
    if let Some(v) = a.tau_chord {
        cfg.tau_chord = v;
    }
    if let Some(v) = a.tau_rhythm {
        cfg.tau_rhythm = v;
    }
    cfg.greedy |= a.greedy;
    cfg.validate().map_err(|e| fail(USAGE, e))?;
    Ok(cfg)
}

fn melody_arch(l: &Loaded) -> Result<Architecture, Failure> {
    match l.arch {
        Architecture::StageTwo | Architecture::NoBiLstm => Ok(l.arch),
        other => Err(fail(INCOMPATIBLE, format!("--stage2 holds a {} checkpoint, not a melody model", other.name()))),
    }
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    let cfg = sample_config(&a)?;
    let stage1 = a.stage1.as_deref().map(load_checkpoint).transpose()?;
    let stage2 = a.stage2.as_deref().map(load_checkpoint).transpose()?;
    let mut template_source = None;
    let generated = match (&stage1, &stage2, &a.template) {
        (_, Some(s2), Some(tpl)) => {
            let bytes = fs::read(tpl).map_err(io_fail(tpl))?;
            let name = tpl.display().to_string();
            let source = preprocess_document(&bytes, &name).map_err(|e| fail(USAGE, format!("{name}: {e}")))?;
            template_source = Some(name);
            match melody_arch(s2)? {
                Architecture::StageTwo => conditioned::<StageTwoModel<f32>>(s2, &source, &cfg)?,
                _ => conditioned::<NoBiLstmBaseline<f32>>(s2, &source, &cfg)?,
            }
        }
        (Some(s1), Some(s2), None) => {
            if s1.arch != Architecture::StageOne {
                return Err(fail(INCOMPATIBLE, format!("--stage1 holds a {} checkpoint", s1.arch.name())));
            }
            match melody_arch(s2)? {
                Architecture::StageTwo => two_stage::<StageTwoModel<f32>>(s1, s2, &cfg)?,
                _ => two_stage::<NoBiLstmBaseline<f32>>(s1, s2, &cfg)?,
            }
        }
        (Some(s1), None, None) if s1.arch == Architecture::OneStage => {
            check_compatible(&s1.checkpoint, &s1.checkpoint)?;
            let m = OneStageBaseline::<f32>::from_checkpoint(&s1.checkpoint).map_err(GenerateError::from)?;
            sample_one_stage(&m, &cfg)?
        }
        _ => {
            return Err(fail(
                USAGE,
                "give --stage1 and --stage2, --stage2 with --template, or a one-stage checkpoint as --stage1",
            ))
        }
    };
    if generated.truncated {
        log::warn!("stopped at the step cap before {} bars", cfg.target_bars);
    }

    let xml = export_musicxml(&generated.sheet).map_err(|e| fail(USAGE, e))?;
    let midi = export_midi(&generated.sheet, a.tempo).map_err(|e| fail(USAGE, e))?;
    let (s1_hash, s2_hash) = match (&stage1, &stage2, &template_source) {
        (_, Some(s2), Some(_)) => (None, s2.sha256.clone()),
        (Some(s1), Some(s2), None) => (Some(s1.sha256.clone()), s2.sha256.clone()),
        (Some(s1), None, _) => (None, s1.sha256.clone()),
        _ => unreachable!("checked above"),
    };
    let mut meta = Sidecar {
        seed: cfg.seed,
        tau_melody: cfg.tau_melody,
        tau_chord: cfg.tau_chord,
        tau_rhythm: cfg.tau_rhythm,
        target_bars: cfg.target_bars,
        stage1_sha256: s1_hash,
        stage2_sha256: s2_hash,
        template_source,
        truncated: generated.truncated,
    }
    .to_text();
    if !a.deterministic {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        meta.push_str(&format!("created-unix={secs}\n"));
    }
    if let Some(dir) = a.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_fail(dir))?;
    }
    for (ext, bytes) in [("musicxml", xml), ("mid", midi), ("meta", meta.into_bytes())] {
        let path = a.output.with_extension(ext);
        fs::write(&path, bytes).map_err(io_fail(&path))?;
    }
    eprintln!(
        "wrote {} ({} bars)",
        a.output.with_extension("musicxml").display(),
        generated.sheet.bar_count()
    );
    Ok(())
}

fn with_path(path: &Path) -> impl FnOnce(EvalError) -> Failure + '_ {
    move |e| {
        let f = Failure::from(e);
        fail(f.code, format!("{}: {f}", path.display()))
    }
}

fn eval(input: &Path, groups: &Path, output: Option<&Path>) -> Result<(), Failure> {
    let ratings = read_ratings(fs::File::open(input).map_err(io_fail(input))?).map_err(with_path(input))?;
    let groups_table = read_groups(fs::File::open(groups).map_err(io_fail(groups))?).map_err(with_path(groups))?;
    let report = evaluate(&ratings, &groups_table)?;
    write_or_print(output, &format_report(&report, &groups_table))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Preprocess { input, output, report } => preprocess(&input, &output, report.as_deref()),
        Command::Train {
            variant,
            input,
            config,
            output,
            seed,
            deterministic,
        } => train(&variant, &input, &config, &output, seed, deterministic),
        Command::Generate {
            stage1,
            stage2,
            output,
            config,
            template,
            seed,
            bars,
            tau_melody,
            tau_chord,
            tau_rhythm,
            greedy,
            tempo,
            deterministic,
        } => generate(GenerateArgs {
            stage1,
            stage2,
            output,
            config,
            template,
            seed,
            bars,
            tau_melody,
            tau_chord,
            tau_rhythm,
            greedy,
            tempo,
            deterministic,
        }),
        Command::Eval { input, groups, output } => eval(&input, &groups, output.as_deref()),
        Command::Stats { input } => {
            let corpus = load_corpus(&input)?;
            print!("{}", corpus_stats(&corpus));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
