use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand, ValueEnum};

use monoscribe::audio::{decode_wav, write_wav, SampleEncoding};
use monoscribe::eval::error_rates;
use monoscribe::onset::novelty_csv;
use monoscribe::pipeline::{transcribe, PipelineConfig, PipelineError};
use monoscribe::pitch::YinAnalyzer;
use monoscribe::score::{self, parse_beats, Beats, ScoreModel, TimeSignature};
use monoscribe::synth::{render, RefScore, ToneModel};

const EXIT_USAGE: u8 = 1;
const EXIT_DECODE: u8 = 2;
const EXIT_EMPTY: u8 = 3;

#[derive(Parser)]
#[command(name = "monoscribe", version, about = "Monophonic piano transcription")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Transcribe a WAV recording to LilyPond, MusicXML and/or JSON.
    Transcribe {
        input: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Output file; with `--format all` the extension is replaced per format.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Engraver binary to run on the written LilyPond file.
        #[arg(long, value_name = "PATH")]
        engrave: Option<PathBuf>,
    },
    /// Score a transcription against a reference.
    Eval {
        reference: PathBuf,
        detected: PathBuf,
        /// Also print an alignment table to standard error.
        #[arg(long)]
        table: bool,
    },
    /// Render a reference score to WAV.
    Synth {
        reference: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 44100)]
        sample_rate: u32,
        #[arg(long)]
        harmonics: Option<u32>,
        #[arg(long)]
        rolloff_db: Option<f64>,
        #[arg(long)]
        attack_ms: Option<f64>,
        #[arg(long)]
        decay: Option<f64>,
        #[arg(long)]
        release_ms: Option<f64>,
        #[arg(long)]
        tail_ms: Option<f64>,
        /// Override the reference tempo.
        #[arg(long)]
        tempo: Option<f64>,
        #[arg(long, value_enum, default_value_t = Encoding::Int16)]
        encoding: Encoding,
    },
    /// Write novelty.csv and pitch.csv for a recording.
    Debug {
        input: PathBuf,
        #[command(flatten)]
        analysis: AnalysisArgs,
        /// Directory for the CSV files.
        #[arg(long, default_value = ".")]
        output: PathBuf,
    },
}

#[derive(Args)]
struct AnalysisArgs {
    #[arg(long, default_value_t = 46.0)]
    window_ms: f64,
    #[arg(long, default_value_t = 10.0)]
    hop_ms: f64,
    #[arg(long, default_value_t = 100.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    amp_threshold: f64,
    #[arg(long, default_value_t = 100.0)]
    min_sep_ms: f64,
    #[arg(long, default_value_t = 68.0)]
    yin_window_ms: f64,
    #[arg(long, default_value_t = 0.1)]
    yin_threshold: f64,
    /// Quantization grid in beats: 1/8, 1/4, 1/2 or 1.
    #[arg(long, default_value = "1/4", value_parser = parse_beats)]
    grid: Beats,
    /// Tempo in bpm; skips estimation.
    #[arg(long)]
    tempo: Option<f64>,
    #[arg(long, value_name = "N/D")]
    time_signature: Option<TimeSignature>,
    #[arg(long, default_value_t = 0.05)]
    end_threshold: f64,
}

impl AnalysisArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            window_length_s: self.window_ms / 1000.0,
            hop_length_s: self.hop_ms / 1000.0,
            gamma: self.gamma,
            amp_threshold: self.amp_threshold,
            min_separation_s: self.min_sep_ms / 1000.0,
            yin_window_s: self.yin_window_ms / 1000.0,
            yin_threshold: self.yin_threshold,
            grid: self.grid,
            tempo_override: self.tempo,
            time_signature: self.time_signature,
            end_threshold: self.end_threshold,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Ly,
    Musicxml,
    Json,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Encoding {
    Int16,
    Int24,
    Int32,
    Float32,
}

impl From<Encoding> for SampleEncoding {
    fn from(e: Encoding) -> Self {
        match e {
            Encoding::Int16 => SampleEncoding::Int16,
            Encoding::Int24 => SampleEncoding::Int24,
            Encoding::Int32 => SampleEncoding::Int32,
            Encoding::Float32 => SampleEncoding::Float32,
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl ToString) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.to_string(),
        }
    }

    fn decode(message: impl ToString) -> Self {
        Self {
            code: EXIT_DECODE,
            message: message.to_string(),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::NoNotes => Self {
                code: EXIT_EMPTY,
                message: e.to_string(),
            },
            other => Self::usage(other),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Cmd::Transcribe {
            input,
            analysis,
            output,
            format,
            engrave,
        } => cmd_transcribe(&input, &analysis.config(), output.as_deref(), format, engrave.as_deref()),
        Cmd::Eval { reference, detected, table } => cmd_eval(&reference, &detected, table),
        Cmd::Synth {
            reference,
            output,
            sample_rate,
            harmonics,
            rolloff_db,
            attack_ms,
            decay,
            release_ms,
            tail_ms,
            tempo,
            encoding,
        } => {
            let d = ToneModel::default();
            let tone = ToneModel {
                n_harmonics: harmonics.unwrap_or(d.n_harmonics),
                harmonic_rolloff_db_per_partial: rolloff_db.unwrap_or(d.harmonic_rolloff_db_per_partial),
                attack_s: attack_ms.map_or(d.attack_s, |v| v / 1000.0),
                decay_rate_per_s: decay.unwrap_or(d.decay_rate_per_s),
                release_s: release_ms.map_or(d.release_s, |v| v / 1000.0),
                tail_s: tail_ms.map_or(d.tail_s, |v| v / 1000.0),
            };
            cmd_synth(&reference, &output, &tone, sample_rate, tempo, encoding.into())
        }
        Cmd::Debug { input, analysis, output } => cmd_debug(&input, &analysis.config(), &output),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    fs::write(path, contents).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn cmd_transcribe(input: &Path, config: &PipelineConfig, output: Option<&Path>, format: Format, engrave: Option<&Path>) -> CliResult {
    let buffer = decode_wav(input).map_err(Failure::decode)?;
    let result = transcribe(&buffer, config)?;
    for w in &result.score.warnings {
        eprintln!("{w}");
    }
    let score = &result.score;
    let render_format = |f: Format| -> Result<String, Failure> {
        match f {
            Format::Ly => score::to_lilypond(score).map_err(Failure::usage),
            Format::Musicxml => score::to_musicxml(score).map_err(Failure::usage),
            Format::Json => Ok(score::to_json(score)),
            Format::All => unreachable!(),
        }
    };

    let mut lilypond_path = None;
    match (format, output) {
        (Format::All, _) => {
            let stem = output.map_or_else(|| input.with_extension(""), Path::to_path_buf);
            for (f, ext) in [(Format::Ly, "ly"), (Format::Musicxml, "musicxml"), (Format::Json, "json")] {
                let path = stem.with_extension(ext);
                write_file(&path, &render_format(f)?)?;
                if f == Format::Ly {
                    lilypond_path = Some(path);
                }
            }
        }
        (f, Some(path)) => {
            write_file(path, &render_format(f)?)?;
            if f == Format::Ly {
                lilypond_path = Some(path.to_path_buf());
            }
        }
        (f, None) => print!("{}", render_format(f)?),
    }

    if let Some(engraver) = engrave {
        match lilypond_path {
            Some(ly) => run_engraver(engraver, &ly),
            None => eprintln!("warning: --engrave needs a LilyPond file on disk; use --format ly or all with --output"),
        }
    }
    Ok(())
}

fn run_engraver(engraver: &Path, ly: &Path) {
    let dir = ly.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    match Command::new(engraver).arg("--png").arg("-o").arg(ly.with_extension("")).arg(ly).current_dir(dir).status() {
        Ok(status) if status.success() => {}
        Ok(status) => eprintln!("warning: engraver {} exited with {status}", engraver.display()),
        Err(e) => eprintln!("warning: engraver {} could not be run: {e}", engraver.display()),
    }
}

fn cmd_eval(reference: &Path, detected: &Path, table: bool) -> CliResult {
    let reference = RefScore::load(reference).map_err(Failure::usage)?;
    let detected = ScoreModel::load(detected).map_err(Failure::usage)?;
    let report = error_rates(&reference, &detected).map_err(Failure::usage)?;
    print!("{}", report.to_json());
    if table {
        let r: Vec<(i32, Beats)> = reference.notes.iter().map(|n| (n.midi, n.beats)).collect();
        let d: Vec<(i32, Beats)> = detected.events.iter().map(|e| (e.midi, e.beats)).collect();
        eprint!("{}", report.to_table(&r, &d));
    }
    Ok(())
}

fn cmd_synth(reference: &Path, output: &Path, tone: &ToneModel, sample_rate: u32, tempo: Option<f64>, encoding: SampleEncoding) -> CliResult {
    let mut score = RefScore::load(reference).map_err(Failure::usage)?;
    if let Some(bpm) = tempo {
        score = score.with_tempo(bpm);
    }
    let buffer = render(&score, tone, sample_rate).map_err(Failure::usage)?;
    write_wav(&buffer, output, encoding).map_err(Failure::usage)
}

fn cmd_debug(input: &Path, config: &PipelineConfig, output: &Path) -> CliResult {
    config.validate()?;
    let buffer = decode_wav(input).map_err(Failure::decode)?;
    let spec = config.frame_spec()?;
    let energy = monoscribe::onset::local_energy(&buffer, &spec);
    let novelty = monoscribe::onset::energy_novelty(&energy, config.gamma);
    let mut yin = YinAnalyzer::new(&config.yin_params(), buffer.sample_rate()).map_err(Failure::usage)?;
    for w in &yin.config().warnings {
        eprintln!("warning: {w}");
    }
    let track = yin.track(&buffer);
    fs::create_dir_all(output).map_err(|e| Failure::usage(format!("cannot create {}: {e}", output.display())))?;
    write_file(&output.join("novelty.csv"), &novelty_csv(&energy, &novelty))?;
    write_file(&output.join("pitch.csv"), &track.to_csv())
}
