//! Experiment settings: `key = value` files overridden by command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use clap::Args;
use sha2::{Digest, Sha256};
use streamfuse::decoder::DecodeOptions;
use streamfuse::experiment::{Method, Setup, Strategy};
use streamfuse::simulator::{Emission, Grading};
use streamfuse::{Context, ScenarioKind, TrainConfig};

/// A failure that maps onto a process exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(streamfuse::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        use streamfuse::Error as E;
        match self {
            Failure::Usage(_) => 2,
            Failure::Core(E::InvalidConfig(_) | E::InvalidN { .. } | E::MissingModel | E::ProfileMismatch { .. }) => 2,
            Failure::Core(E::DivergedTraining { .. } | E::DegenerateData(_)) => 4,
            Failure::Core(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => e.fmt(f),
        }
    }
}

impl From<streamfuse::Error> for Failure {
    fn from(e: streamfuse::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(e.into())
    }
}

pub type Outcome<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

/// Every recognised key, in file order.
pub const KEYS: &[&str] = &[
    "scenario",
    "streams",
    "utterances",
    "classes",
    "min_frames",
    "max_frames",
    "self_loop",
    "alpha_true",
    "alpha_other",
    "max_mix",
    "max_smear",
    "max_offset",
    "failed",
    "seed",
    "method",
    "n",
    "context",
    "epochs",
    "learning_rate",
    "batch_size",
    "momentum",
    "hidden",
    "bottleneck",
    "decode_floor",
    "hybrid",
    "sweep",
];

/// Settings that may be given as flags. `--learning-rate` overrides the
/// `learning_rate` key of `--config`, and so on for every key.
#[derive(Debug, Clone, Default, Args)]
pub struct Settings {
    /// `key = value` settings file
    #[arg(long, value_name = "FILE")]
    pub config: Option<std::path::PathBuf>,
    /// ldc_like, hrm_like or custom
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    streams: Option<String>,
    #[arg(long)]
    utterances: Option<String>,
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    min_frames: Option<String>,
    #[arg(long)]
    max_frames: Option<String>,
    /// HMM self-loop probability
    #[arg(long)]
    self_loop: Option<String>,
    #[arg(long)]
    alpha_true: Option<String>,
    #[arg(long)]
    alpha_other: Option<String>,
    #[arg(long)]
    max_mix: Option<String>,
    #[arg(long)]
    max_smear: Option<String>,
    #[arg(long)]
    max_offset: Option<String>,
    /// Failed streams in hrm_like
    #[arg(long)]
    failed: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// equal, entropy, m_measure, delta_m, autoencoder, oracle or max_n
    #[arg(long)]
    method: Option<String>,
    /// Keep only the n heaviest streams per frame
    #[arg(long)]
    n: Option<String>,
    /// Autoencoder context as `-left,right`, e.g. -16,12
    #[arg(long, allow_hyphen_values = true)]
    context: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    learning_rate: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    momentum: Option<String>,
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    bottleneck: Option<String>,
    #[arg(long)]
    decode_floor: Option<String>,
    /// Divide posteriors by state priors before decoding (true/false)
    #[arg(long)]
    hybrid: Option<String>,
    /// Also evaluate n-best truncation for every n
    #[arg(long)]
    sweep: bool,
}

impl Settings {
    fn flags(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("scenario", self.scenario.clone()),
            ("streams", self.streams.clone()),
            ("utterances", self.utterances.clone()),
            ("classes", self.classes.clone()),
            ("min_frames", self.min_frames.clone()),
            ("max_frames", self.max_frames.clone()),
            ("self_loop", self.self_loop.clone()),
            ("alpha_true", self.alpha_true.clone()),
            ("alpha_other", self.alpha_other.clone()),
            ("max_mix", self.max_mix.clone()),
            ("max_smear", self.max_smear.clone()),
            ("max_offset", self.max_offset.clone()),
            ("failed", self.failed.clone()),
            ("seed", self.seed.clone()),
            ("method", self.method.clone()),
            ("n", self.n.clone()),
            ("context", self.context.clone()),
            ("epochs", self.epochs.clone()),
            ("learning_rate", self.learning_rate.clone()),
            ("batch_size", self.batch_size.clone()),
            ("momentum", self.momentum.clone()),
            ("hidden", self.hidden.clone()),
            ("bottleneck", self.bottleneck.clone()),
            ("decode_floor", self.decode_floor.clone()),
            ("hybrid", self.hybrid.clone()),
            ("sweep", self.sweep.then(|| "true".to_string())),
        ]
    }
}

fn defaults() -> BTreeMap<String, String> {
    let setup = Setup::default();
    let train = TrainConfig::default();
    let pairs: [(&str, String); 24] = [
        ("scenario", ScenarioKind::HrmLike.to_string()),
        ("utterances", "50".into()),
        ("classes", setup.classes.to_string()),
        ("min_frames", setup.min_frames.to_string()),
        ("max_frames", setup.max_frames.to_string()),
        ("self_loop", setup.self_loop.to_string()),
        ("alpha_true", setup.emission.alpha_true.to_string()),
        ("alpha_other", setup.emission.alpha_other.to_string()),
        ("max_mix", setup.grading.max_mix.to_string()),
        ("max_smear", setup.grading.max_smear.to_string()),
        ("max_offset", setup.grading.max_offset.to_string()),
        ("failed", setup.grading.failed.to_string()),
        ("seed", "1".into()),
        ("method", Method::Entropy.to_string()),
        ("context", "-8,5".into()),
        ("epochs", train.epochs.to_string()),
        ("learning_rate", train.learning_rate.to_string()),
        ("batch_size", train.batch_size.to_string()),
        ("momentum", train.momentum.to_string()),
        ("hidden", streamfuse::aemonitor::HIDDEN_WIDTH.to_string()),
        ("bottleneck", streamfuse::aemonitor::BOTTLENECK_WIDTH.to_string()),
        ("decode_floor", setup.decode.floor.to_string()),
        ("hybrid", setup.decode.hybrid.to_string()),
        ("sweep", "false".into()),
    ];
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Reads `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str, path: &Path) -> Outcome<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{}:{}", path.display(), i + 1);
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("{}: expected `key = value`, got {line:?}", at()));
        };
        let (k, v) = (k.trim(), v.trim());
        if out.iter().any(|(seen, _)| seen == k) {
            return usage(format!("{}: duplicate key {k:?}", at()));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// How attention weights are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Plain(Method),
    /// Entropy weights truncated to the `n` best streams.
    MaxN,
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodChoice::Plain(m) => m.fmt(f),
            MethodChoice::MaxN => f.write_str("max_n"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    pub streams: Option<usize>,
    pub utterances: usize,
    pub setup: Setup,
    pub seed: u64,
    pub method: MethodChoice,
    pub n: Option<usize>,
    pub context: Context,
    pub train: TrainConfig,
    pub hidden: usize,
    pub bottleneck: usize,
    pub sweep: bool,
    entries: BTreeMap<String, String>,
}

struct Reader<'a>(&'a BTreeMap<String, String>);

impl Reader<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Outcome<T> {
        self.opt(key)?
            .ok_or_else(|| Failure::Usage(format!("missing setting {key:?}")))
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Outcome<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Failure::Usage(format!("invalid value {v:?} for {key:?}"))),
        }
    }
}

pub fn parse_context(text: &str) -> Option<Context> {
    let (l, r) = text.split_once(',')?;
    let l: i64 = l.trim().parse().ok()?;
    let r: i64 = r.trim().parse().ok()?;
    if l > 0 || r < 0 {
        return None;
    }
    Some(Context::new(l.unsigned_abs() as usize, r as usize))
}

impl ExperimentConfig {
    /// Defaults, then the config file, then flags.
    pub fn resolve(settings: &Settings) -> Outcome<Self> {
        let mut entries = defaults();
        if let Some(path) = &settings.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_pairs(&text, path)? {
                if !KEYS.contains(&k.as_str()) {
                    return usage(format!("{}: unknown key {k:?}", path.display()));
                }
                entries.insert(k, v);
            }
        }
        for (k, v) in settings.flags() {
            if let Some(v) = v {
                entries.insert(k.to_string(), v);
            }
        }
        Self::from_entries(entries)
    }

    fn from_entries(entries: BTreeMap<String, String>) -> Outcome<Self> {
        let r = Reader(&entries);
        let scenario: String = r.get("scenario")?;
        let scenario = scenario.parse().map_err(Failure::Usage)?;
        let method: String = r.get("method")?;
        let method = match method.as_str() {
            "max_n" => MethodChoice::MaxN,
            m => MethodChoice::Plain(m.parse().map_err(Failure::Usage)?),
        };
        let context: String = r.get("context")?;
        let context = parse_context(&context)
            .ok_or_else(|| Failure::Usage(format!("context {context:?} is not `-left,right`")))?;

        let setup = Setup {
            classes: r.get("classes")?,
            self_loop: r.get("self_loop")?,
            min_frames: r.get("min_frames")?,
            max_frames: r.get("max_frames")?,
            emission: Emission {
                alpha_true: r.get("alpha_true")?,
                alpha_other: r.get("alpha_other")?,
            },
            grading: Grading {
                max_mix: r.get("max_mix")?,
                max_smear: r.get("max_smear")?,
                max_offset: r.get("max_offset")?,
                failed: r.get("failed")?,
            },
            decode: DecodeOptions {
                floor: r.get("decode_floor")?,
                hybrid: r.get("hybrid")?,
            },
        };

        let seed = r.get("seed")?;
        let train = TrainConfig {
            learning_rate: r.get("learning_rate")?,
            epochs: r.get("epochs")?,
            batch_size: r.get("batch_size")?,
            momentum: r.get("momentum")?,
            seed,
            ..TrainConfig::default()
        };
        let cfg = Self {
            scenario,
            streams: r.opt("streams")?,
            utterances: r.get("utterances")?,
            setup,
            seed,
            method,
            n: r.opt("n")?,
            context,
            train,
            hidden: r.get("hidden")?,
            bottleneck: r.get("bottleneck")?,
            sweep: r.get("sweep")?,
            entries,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Outcome<()> {
        if self.method == MethodChoice::MaxN && self.n.is_none() {
            return usage("method max_n needs n");
        }
        if self.n == Some(0) {
            return usage("n must be at least 1");
        }
        if !(self.setup.decode.floor > 0.0 && self.setup.decode.floor < 1.0) {
            return usage(format!("decode_floor {} outside (0, 1)", self.setup.decode.floor));
        }
        if self.hidden == 0 || self.bottleneck == 0 {
            return usage("layer widths must be positive");
        }
        self.train.validate()?;
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        match (self.method, self.n) {
            (MethodChoice::MaxN, Some(n)) => Strategy::n_best(Method::Entropy, n),
            (MethodChoice::Plain(m), Some(n)) => Strategy::n_best(m, n),
            (MethodChoice::Plain(m), None) => Strategy::plain(m),
            (MethodChoice::MaxN, None) => unreachable!("validated"),
        }
    }

    /// SHA-256 over every resolved setting, one `key=value` line each in key
    /// order. Paths are not settings, so moving a corpus keeps its hash.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        hex::encode(h.finalize())
    }

    /// The resolved settings in config-file syntax.
    pub fn to_text(&self) -> String {
        let mut s = format!("# config {}\n", self.hash());
        for k in KEYS {
            if let Some(v) = self.entries.get(*k) {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    }
}
