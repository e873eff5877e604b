use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spiro_core::io::ReportFormat;

#[derive(Debug, Parser)]
#[command(
    name = "spiro",
    version,
    about = "Spirometry and respiration rate from mask microphone audio"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. Any of them may also come from the
/// `--config` file as `name = value` lines.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Dataset manifest (.json or .csv).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// Single WAV recording.
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Trained model: a directory of forced estimators or a CNN file.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Sample rate in Hz for synthesized or trained data.
    #[arg(long, global = true)]
    pub rate: Option<u32>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// `name = value` file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forced-maneuver analysis, training and evaluation.
    Forced {
        #[command(subcommand)]
        cmd: ForcedCmd,
    },
    /// Tidal-breathing classification, respiration rate and studies.
    Tidal {
        #[command(subcommand)]
        cmd: TidalCmd,
    },
    /// Battery-life estimate for the mask device.
    Battery(BatteryArgs),
    /// Train at position L1, report errors at every other position.
    Positions(ModelArgs),
    /// Write synthetic recordings or a whole synthetic dataset.
    Synth {
        #[command(subcommand)]
        cmd: SynthCmd,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// linear, rf or svr.
    #[arg(long, default_value = "rf")]
    pub kind: String,
    /// pef, fev1 or fvc; all three when absent.
    #[arg(long)]
    pub target: Option<String>,
    /// Upper bound on forward-selected features.
    #[arg(long, default_value_t = 10)]
    pub max_features: usize,
}

#[derive(Debug, Subcommand)]
pub enum ForcedCmd {
    /// Flow curves, shape verdict and PEF/FEV1/FVC for one recording.
    Analyze,
    /// Fit one estimator per target on a manifest.
    Train(ModelArgs),
    /// Nested leave-one-subject-out evaluation.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        /// Select features once on all subjects instead of inside each fold.
        #[arg(long)]
        global_sfs: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum TidalCmd {
    /// Per-window labels and the 90 % vote.
    Classify,
    /// Respiration rate of one recording or of every tidal manifest entry.
    Rate {
        /// Estimate even when the classifier is missing, uncertain or
        /// disagrees.
        #[arg(long)]
        force: bool,
    },
    /// Train the window classifier on the synthetic corpus.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Search window length, offset and FFT size by cross-validation.
        #[arg(long)]
        tune: bool,
    },
    /// Accuracy and rate error at 16, 8, 4, 2 and 1 kHz.
    Study {
        #[command(flatten)]
        corpus: CorpusArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    #[arg(long, default_value_t = 12)]
    pub per_class: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct BatteryArgs {
    #[arg(long, default_value_t = crate::battery::IDLE_MA)]
    pub idle_ma: f64,
    #[arg(long, default_value_t = crate::battery::SAMPLING_MA)]
    pub sampling_ma: f64,
    #[arg(long, default_value_t = crate::battery::CLASSIFY_MA)]
    pub classify_ma: f64,
    /// Seconds spent recording per measurement.
    #[arg(long, default_value_t = crate::battery::SAMPLING_S)]
    pub sampling_s: f64,
    /// Seconds spent classifying per measurement (back-solved default).
    #[arg(long, default_value_t = crate::battery::classify_s_default())]
    pub classify_s: f64,
    /// Measurements per minute.
    #[arg(long, default_value_t = 1.0)]
    pub per_minute: f64,
    #[arg(long, default_value_t = 11.0)]
    pub active_hours: f64,
    #[arg(long, default_value_t = 240.0)]
    pub capacity_mah: f64,
    /// Also drain idle current outside the active hours.
    #[arg(long)]
    pub idle_drain: bool,
}

#[derive(Debug, Subcommand)]
pub enum SynthCmd {
    /// One forced exhalation.
    Forced {
        #[arg(long, default_value_t = 6.0)]
        pef: f64,
        #[arg(long, default_value_t = 4.0)]
        fvc: f64,
        #[arg(long, default_value_t = 7.0)]
        duration: f64,
    },
    /// Tidal breathing at a fixed rate.
    Breath {
        #[arg(long, default_value_t = 15.0)]
        bpm: f64,
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
        /// Add white noise at this SNR in dB.
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Voiced speech-like syllables.
    Speech {
        #[arg(long, default_value_t = 150.0)]
        f0: f64,
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
    },
    /// White noise.
    Noise {
        #[arg(long, default_value_t = 0.1)]
        std: f64,
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
    },
    /// Chest accelerometer trace (CSV) at a fixed breathing rate.
    Accel {
        #[arg(long, default_value_t = 15.0)]
        bpm: f64,
        #[arg(long, default_value_t = 20.0)]
        duration: f64,
    },
    /// WAV files plus a manifest for several synthetic subjects.
    Dataset {
        #[arg(long, default_value_t = 5)]
        subjects: usize,
        #[arg(long, default_value_t = 3)]
        maneuvers: usize,
        /// Repeat every recording at L1, C1, R1, L3 and R3.
        #[arg(long)]
        positions: bool,
        /// Add tidal recordings with accelerometer ground truth.
        #[arg(long)]
        tidal: bool,
        /// n95 or cloth.
        #[arg(long, default_value = "n95")]
        mask: String,
    },
}
