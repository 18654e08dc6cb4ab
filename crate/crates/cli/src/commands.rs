//! The four subcommands.
//!
//! Corpus directory layout:
//!
//! ```text
//! manifest.txt              scenario, profiles, utterance list, config hash
//! config.txt                resolved settings of the simulate run
//! hmm.txt                   decoding HMM
//! labels/utt0000.lab        one class per frame
//! streams/utt0000_s00.satn  posterior stream 0 of utterance 0
//! ```
//!
//! `fuse` writes `fused/<id>.satn`, `schedules/<id>.satw` and `fuse.txt`
//! into its output directory; `evaluate` adds `report.tsv` there.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use streamfuse::experiment::{
    attention, decode_and_score, n_sweep, prepare, single_stream_reports, Method, Resources, Strategy,
};
use streamfuse::io::{self, Manifest, UtteranceRecord};
use streamfuse::simulator::{Corpus, CorpusUtterance};
use streamfuse::{
    build_scenario, fuse, n_best_truncate, train_ae, AeModel, Architecture, ErrorReport, HmmModel, MMeasureConfig,
    PosteriorStream, StreamSet,
};

use crate::config::{parse_pairs, ExperimentConfig, Failure, Outcome};

fn stream_path(dir: &Path, id: &str, stream: usize) -> PathBuf {
    dir.join("streams").join(format!("{id}_s{stream:02}.satn"))
}

fn label_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("labels").join(format!("{id}.lab"))
}

fn data_error(msg: String) -> Failure {
    Failure::Core(std::io::Error::new(std::io::ErrorKind::InvalidData, msg).into())
}

pub struct LoadedCorpus {
    pub manifest: Manifest,
    pub hmm: HmmModel,
    pub corpus: Corpus,
}

pub fn load_corpus(dir: &Path) -> Outcome<LoadedCorpus> {
    let manifest = Manifest::read(&dir.join("manifest.txt"))?;
    let hmm = io::read_hmm(&dir.join("hmm.txt"))?;
    if hmm.num_states() != manifest.classes {
        return Err(data_error(format!(
            "hmm.txt has {} states, manifest says {} classes",
            hmm.num_states(),
            manifest.classes
        )));
    }
    let scenario = manifest.scenario.parse().map_err(data_error)?;
    let mut utterances = Vec::with_capacity(manifest.utterances.len());
    for rec in &manifest.utterances {
        let labels = io::read_labels(&label_path(dir, &rec.id), manifest.classes)?;
        if labels.len() != rec.frames {
            return Err(data_error(format!(
                "{}: {} labels, manifest says {} frames",
                rec.id,
                labels.len(),
                rec.frames
            )));
        }
        let streams = (0..manifest.streams)
            .map(|i| io::read_stream(&stream_path(dir, &rec.id, i)))
            .collect::<streamfuse::Result<Vec<_>>>()?;
        utterances.push(CorpusUtterance {
            id: rec.id.clone(),
            labels,
            streams: StreamSet::new(streams),
            oracle: rec.oracle,
        });
    }
    let corpus = Corpus {
        scenario,
        profiles: manifest.profiles.clone(),
        utterances,
    };
    Ok(LoadedCorpus { manifest, hmm, corpus })
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Outcome<String> {
    let streams = cfg
        .streams
        .ok_or_else(|| Failure::Usage("simulate needs --streams (or `streams` in the config)".into()))?;
    let hmm = cfg.setup.hmm()?;
    let spec = cfg.setup.corpus_spec(cfg.utterances, streams, cfg.seed);
    let corpus = build_scenario(cfg.scenario, &spec, &hmm, None, &cfg.setup.grading)?;

    fs::create_dir_all(out.join("streams"))?;
    fs::create_dir_all(out.join("labels"))?;
    let hash = cfg.hash();
    fs::write(out.join("config.txt"), cfg.to_text())?;
    io::write_hmm(&out.join("hmm.txt"), &hmm)?;
    for utt in &corpus.utterances {
        io::write_labels(&label_path(out, &utt.id), &utt.labels)?;
        for (i, s) in utt.streams.streams().iter().enumerate() {
            io::write_stream(&stream_path(out, &utt.id, i), s)?;
        }
    }
    let manifest = Manifest {
        scenario: cfg.scenario.to_string(),
        streams,
        classes: cfg.setup.classes,
        seed: cfg.seed,
        config_hash: hash.clone(),
        profiles: corpus.profiles.clone(),
        utterances: corpus
            .utterances
            .iter()
            .map(|u| UtteranceRecord {
                id: u.id.clone(),
                frames: u.labels.len(),
                oracle: u.oracle,
            })
            .collect(),
    };
    manifest.write(&out.join("manifest.txt"))?;

    let frames: usize = manifest.utterances.iter().map(|u| u.frames).sum();
    let mut s = format!(
        "{} corpus: {} utterances x {streams} streams, {frames} frames, {} classes\n",
        cfg.scenario, cfg.utterances, cfg.setup.classes
    );
    let _ = writeln!(
        s,
        "oracle stream {}, failed streams {:?}",
        corpus.utterances[0].oracle,
        corpus.failed_streams()
    );
    let _ = writeln!(s, "config {hash}");
    Ok(s)
}

/// Loss log path next to a model file: `model.stae` -> `model.loss.tsv`.
pub fn loss_log_path(model: &Path) -> PathBuf {
    model.with_extension("loss.tsv")
}

pub fn train(cfg: &ExperimentConfig, corpus_dir: &Path, model_path: &Path) -> Outcome<String> {
    let loaded = load_corpus(corpus_dir)?;
    let data: Vec<PosteriorStream> = loaded
        .corpus
        .utterances
        .iter()
        .map(|u| u.streams.stream(u.oracle).clone())
        .collect();
    let arch = Architecture::with_widths(cfg.context, cfg.hidden, cfg.bottleneck)?;
    let (model, log) = train_ae(&data, &cfg.train, &arch)?;
    io::write_model(model_path, &model)?;

    let hash = cfg.hash();
    let mut tsv = format!("# config {hash}\nepoch\tloss\n0\t{}\n", log.initial_loss);
    for (e, l) in log.epoch_losses.iter().enumerate() {
        let _ = writeln!(tsv, "{}\t{l}", e + 1);
    }
    fs::write(loss_log_path(model_path), tsv)?;

    let c = model.context();
    Ok(format!(
        "trained on {} oracle streams, context -{},{}: loss {:.4} -> {:.4} over {} epochs\nconfig {hash}\n",
        data.len(),
        c.left,
        c.right,
        log.initial_loss,
        log.final_loss(),
        log.epoch_losses.len()
    ))
}

fn load_model(path: Option<&Path>, needed: bool) -> Outcome<Option<AeModel>> {
    match path {
        Some(p) => Ok(Some(io::read_model(p)?)),
        None if needed => Err(streamfuse::Error::MissingModel.into()),
        None => Ok(None),
    }
}

pub fn fuse_corpus(cfg: &ExperimentConfig, corpus_dir: &Path, out: &Path, model: Option<&Path>) -> Outcome<String> {
    let loaded = load_corpus(corpus_dir)?;
    let strategy = cfg.strategy();
    let model = load_model(model, strategy.method == Method::Autoencoder)?;
    let m_config = MMeasureConfig::default();
    let res = Resources {
        model: model.as_ref(),
        m_config: &m_config,
        decode: cfg.setup.decode,
    };

    fs::create_dir_all(out.join("fused"))?;
    fs::create_dir_all(out.join("schedules"))?;
    for utt in &loaded.corpus.utterances {
        let p = prepare(utt)?;
        let mut sched = attention(strategy.method, &p.streams, p.oracle, &res)?;
        if let Some(n) = strategy.n_best {
            sched = n_best_truncate(&sched, n)?;
        }
        let fused = fuse(&p.streams, &sched)?;
        io::write_stream(&out.join("fused").join(format!("{}.satn", utt.id)), &fused)?;
        io::write_schedule(&out.join("schedules").join(format!("{}.satw", utt.id)), &sched)?;
    }
    let hash = cfg.hash();
    let n = strategy.n_best.map_or_else(|| "all".to_string(), |n| n.to_string());
    fs::write(
        out.join("fuse.txt"),
        format!(
            "# config {hash}\nmethod = {}\nweights = {}\nn = {n}\ncorpus_config = {}\n",
            cfg.method, strategy.method, loaded.manifest.config_hash
        ),
    )?;
    Ok(format!(
        "fused {} utterances with {strategy}\nconfig {hash}\n",
        loaded.corpus.utterances.len()
    ))
}

/// Report columns, in order.
pub const REPORT_HEADER: &str =
    "system\tkind\ttoken_error_rate\tframe_error_rate\tref_tokens\tsubstitutions\tinsertions\tdeletions\tframes\tframe_errors";

fn report_row(system: &str, kind: &str, r: &ErrorReport) -> String {
    format!(
        "{system}\t{kind}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.token_error_rate(),
        r.frame_error_rate(),
        r.ref_tokens,
        r.substitutions,
        r.insertions,
        r.deletions,
        r.frames,
        r.frame_errors
    )
}

fn fused_label(fused_dir: &Path) -> Outcome<String> {
    let path = fused_dir.join("fuse.txt");
    let text = fs::read_to_string(&path)?;
    let pairs = parse_pairs(&text, &path).map_err(|e| data_error(e.to_string()))?;
    let get = |k: &str| pairs.iter().find(|(key, _)| key == k).map(|(_, v)| v.clone());
    let (Some(weights), Some(n)) = (get("weights"), get("n")) else {
        return Err(data_error(format!("{}: missing weights or n", path.display())));
    };
    Ok(if n == "all" {
        weights
    } else {
        format!("{weights}/max{n}")
    })
}

pub fn evaluate(
    cfg: &ExperimentConfig,
    corpus_dir: &Path,
    fused_dir: &Path,
    report: &Path,
    model: Option<&Path>,
) -> Outcome<String> {
    let loaded = load_corpus(corpus_dir)?;
    let hmm = &loaded.hmm;
    let opts = cfg.setup.decode;
    let mut rows: Vec<(String, &str, ErrorReport)> = Vec::new();

    for (i, r) in single_stream_reports(&loaded.corpus, hmm, opts)?
        .into_iter()
        .enumerate()
    {
        rows.push((format!("stream_{i:02}"), "single", r));
    }

    let mut fused_total = ErrorReport::default();
    for utt in &loaded.corpus.utterances {
        let p = prepare(utt)?;
        let fused = io::read_stream(&fused_dir.join("fused").join(format!("{}.satn", utt.id)))?;
        if fused.len() != p.labels.len() {
            return Err(data_error(format!(
                "{}: fused stream has {} frames, aligned corpus has {}",
                utt.id,
                fused.len(),
                p.labels.len()
            )));
        }
        fused_total.accumulate(&decode_and_score(&fused, &p.labels, hmm, opts)?);
    }
    rows.push((fused_label(fused_dir)?, "fused", fused_total));

    if cfg.sweep {
        let method = cfg.strategy().method;
        let model = load_model(model, method == Method::Autoencoder)?;
        let m_config = MMeasureConfig::default();
        let res = Resources {
            model: model.as_ref(),
            m_config: &m_config,
            decode: opts,
        };
        for (i, r) in n_sweep(&loaded.corpus, hmm, method, &res)?.into_iter().enumerate() {
            rows.push((Strategy::n_best(method, i + 1).to_string(), "sweep", r));
        }
    }

    let hash = cfg.hash();
    let mut tsv = format!("# config {hash}\n{REPORT_HEADER}\n");
    for (system, kind, r) in &rows {
        tsv.push_str(&report_row(system, kind, r));
        tsv.push('\n');
    }
    fs::write(report, tsv)?;

    let width = rows.iter().map(|(s, _, _)| s.len()).max().unwrap_or(0).max(6);
    let mut text = format!("{:<width$}  {:<6}  {:>8}  {:>8}\n", "system", "kind", "TER %", "FER %");
    for (system, kind, r) in &rows {
        let _ = writeln!(
            text,
            "{system:<width$}  {kind:<6}  {:>8.2}  {:>8.2}",
            100.0 * r.token_error_rate(),
            100.0 * r.frame_error_rate()
        );
    }
    let _ = writeln!(text, "config {hash}");
    Ok(text)
}
