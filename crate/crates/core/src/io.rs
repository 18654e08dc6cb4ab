//! File formats.
//!
//! Binary files are little-endian and start with a four-byte magic and a
//! `u16` version:
//!
//! | file      | magic  | header after version                                   | payload        |
//! |-----------|--------|--------------------------------------------------------|----------------|
//! | stream    | `SATN` | `C: u32, T: u32, stream_id: u32, offset: i32, dtype: u8` | `T x C` f32    |
//! | schedule  | `SATW` | `M: u32, T: u32, dtype: u8`                            | `T x M` f32    |
//! | AE model  | `STAE` | see [`encode_model`]                                   | f64 parameters |
//!
//! Text files: the corpus manifest, label files (one class index per line)
//! and HMM files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::aemonitor::{Activation, AeModel, FrontEnd, Layer, Network, Pca, SplicePlan};
use crate::decoder::{default_labels, HmmModel};
use crate::error::{Error, Result};
use crate::simulator::CorruptionProfile;
use crate::stream::{AttentionSchedule, PosteriorStream};

pub const STREAM_MAGIC: [u8; 4] = *b"SATN";
pub const SCHEDULE_MAGIC: [u8; 4] = *b"SATW";
pub const MODEL_MAGIC: [u8; 4] = *b"STAE";
pub const FORMAT_VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;

/// Rows read back with a sum this close to one keep their values exactly as
/// stored, which covers single-precision rounding of a valid row.
pub const KEEP_SLACK: f64 = 2e-6;
/// Rows further than this from summing to one are rejected on read; rows in
/// between are renormalized.
pub const READ_TOLERANCE: f64 = 1e-5;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::PayloadTruncated {
                expected: self.pos.saturating_add(n),
                found: self.bytes.len(),
            }),
        }
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or(Error::PayloadTruncated {
            expected: usize::MAX,
            found: self.bytes.len(),
        })?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    /// `n` f32 values widened to f64. Checks the exact remaining length so
    /// short and long payloads are told apart.
    fn f32_payload(&mut self, n: usize) -> Result<Vec<f64>> {
        let need = n.saturating_mul(4);
        let remaining = self.bytes.len() - self.pos;
        if remaining < need {
            return Err(Error::PayloadTruncated {
                expected: self.pos.saturating_add(need),
                found: self.bytes.len(),
            });
        }
        let bytes = self.take(need)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }

    fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found: [u8; 4] = match self.bytes.get(..4) {
            Some(b) => b.try_into().unwrap(),
            None => {
                let mut f = [0u8; 4];
                f[..self.bytes.len()].copy_from_slice(self.bytes);
                return Err(Error::BadMagic { expected, found: f });
            }
        };
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        self.pos = 4;
        let version = self.u16()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        let extra = self.bytes.len() - self.pos;
        if extra > 0 {
            return Err(Error::TrailingBytes { extra });
        }
        Ok(())
    }
}

fn header(magic: [u8; 4]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} {v} does not fit the file format")))
}

fn put_f32s(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 4);
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn put_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_stream(stream: &PosteriorStream) -> Result<Vec<u8>> {
    let mut out = header(STREAM_MAGIC);
    out.extend_from_slice(&to_u32(stream.classes(), "class count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(stream.len(), "frame count")?.to_le_bytes());
    out.extend_from_slice(&stream.stream_id().to_le_bytes());
    out.extend_from_slice(&stream.frame_offset().to_le_bytes());
    out.push(DTYPE_F32);
    put_f32s(&mut out, stream.as_slice());
    Ok(out)
}

/// Parses a stream file. Rows that drifted from the simplex by single
/// precision rounding are accepted; anything further off is rejected.
pub fn decode_stream(bytes: &[u8]) -> Result<PosteriorStream> {
    let mut r = Reader::new(bytes);
    r.magic(STREAM_MAGIC)?;
    let classes = r.u32()? as usize;
    let frames = r.u32()? as usize;
    let stream_id = r.u32()?;
    let offset = r.i32()?;
    let dtype = r.u8()?;
    if dtype != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(dtype));
    }
    let data = r.f32_payload(frames.saturating_mul(classes))?;
    r.finish()?;
    let mut stream = PosteriorStream::new(stream_id, offset, classes, data)?;
    stream.renormalize(KEEP_SLACK, READ_TOLERANCE)?;
    Ok(stream)
}

pub fn write_stream(path: &Path, stream: &PosteriorStream) -> Result<()> {
    fs::write(path, encode_stream(stream)?)?;
    Ok(())
}

pub fn read_stream(path: &Path) -> Result<PosteriorStream> {
    decode_stream(&fs::read(path)?)
}

pub fn encode_schedule(schedule: &AttentionSchedule) -> Result<Vec<u8>> {
    let mut out = header(SCHEDULE_MAGIC);
    out.extend_from_slice(&to_u32(schedule.num_streams(), "stream count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(schedule.len(), "frame count")?.to_le_bytes());
    out.push(DTYPE_F32);
    put_f32s(&mut out, schedule.as_slice());
    Ok(out)
}

pub fn decode_schedule(bytes: &[u8]) -> Result<AttentionSchedule> {
    let mut r = Reader::new(bytes);
    r.magic(SCHEDULE_MAGIC)?;
    let streams = r.u32()? as usize;
    let frames = r.u32()? as usize;
    let dtype = r.u8()?;
    if dtype != DTYPE_F32 {
        return Err(Error::UnsupportedDtype(dtype));
    }
    let mut data = r.f32_payload(frames.saturating_mul(streams))?;
    r.finish()?;
    if streams == 0 {
        return Err(Error::InvalidSchedule("schedule with zero streams".into()));
    }
    for (row, w) in data.chunks_exact_mut(streams).enumerate() {
        let sum: f64 = w.iter().sum();
        if w.iter().any(|v| !(0.0..=1.0).contains(v)) || (sum - 1.0).abs() > READ_TOLERANCE {
            return Err(Error::InvalidSimplex { row, sum });
        }
        if (sum - 1.0).abs() > KEEP_SLACK {
            w.iter_mut().for_each(|v| *v /= sum);
        }
    }
    if frames == 0 {
        return Err(Error::InvalidSchedule("schedule with zero frames".into()));
    }
    Ok(AttentionSchedule::from_rows_unchecked(streams, data))
}

pub fn write_schedule(path: &Path, schedule: &AttentionSchedule) -> Result<()> {
    fs::write(path, encode_schedule(schedule)?)?;
    Ok(())
}

pub fn read_schedule(path: &Path) -> Result<AttentionSchedule> {
    decode_schedule(&fs::read(path)?)
}

/// Serialises an autoencoder model at full precision.
///
/// After magic and version:
///
/// ```text
/// context_left u32, context_right u32
/// C u32, K u32, logit_clamp f64
/// mean [C] f64, basis [C x K] f64, variances [K] f64
/// layers u32, then per layer:
///     n_offsets u32, offsets [n] i32,
///     inputs u32, outputs u32, activation u8,
///     weights [inputs x outputs] f64, bias [outputs] f64
/// ```
pub fn encode_model(model: &AeModel) -> Result<Vec<u8>> {
    let mut out = header(MODEL_MAGIC);
    let ctx = model.context();
    out.extend_from_slice(&to_u32(ctx.left, "context")?.to_le_bytes());
    out.extend_from_slice(&to_u32(ctx.right, "context")?.to_le_bytes());
    let fe = model.front_end();
    let pca = fe.pca();
    out.extend_from_slice(&to_u32(pca.input_dims(), "class count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(pca.dims(), "PCA dimension")?.to_le_bytes());
    out.extend_from_slice(&fe.logit_clamp().to_le_bytes());
    put_f64s(&mut out, pca.mean().iter().copied());
    put_f64s(&mut out, pca.basis().iter().copied());
    put_f64s(&mut out, pca.variances().iter().copied());
    let net = model.network();
    out.extend_from_slice(&to_u32(net.layers().len(), "layer count")?.to_le_bytes());
    for (layer, offsets) in net.layers().iter().zip(net.plan().layers()) {
        out.extend_from_slice(&to_u32(offsets.len(), "offset count")?.to_le_bytes());
        for o in offsets {
            out.extend_from_slice(&o.to_le_bytes());
        }
        out.extend_from_slice(&to_u32(layer.inputs(), "layer inputs")?.to_le_bytes());
        out.extend_from_slice(&to_u32(layer.outputs(), "layer outputs")?.to_le_bytes());
        out.push(layer.activation().code());
        put_f64s(&mut out, layer.weights().iter().copied());
        put_f64s(&mut out, layer.bias().iter().copied());
    }
    Ok(out)
}

pub fn decode_model(bytes: &[u8]) -> Result<AeModel> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let left = r.u32()? as usize;
    let right = r.u32()? as usize;
    let c = r.u32()? as usize;
    let k = r.u32()? as usize;
    let clamp = r.f64()?;
    let mean = Array1::from(r.f64s(c)?);
    let basis = Array2::from_shape_vec((c, k), r.f64s(c.saturating_mul(k))?)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    let variances = Array1::from(r.f64s(k)?);
    let front_end = FrontEnd::new(Pca::new(mean, basis, variances)?, clamp)?;
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::new();
    let mut plan = Vec::new();
    for _ in 0..n_layers {
        let n = r.u32()? as usize;
        let offsets = (0..n).map(|_| r.i32()).collect::<Result<Vec<_>>>()?;
        let inputs = r.u32()? as usize;
        let outputs = r.u32()? as usize;
        let code = r.u8()?;
        let activation = Activation::from_code(code)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown activation code {code}")))?;
        let weights = Array2::from_shape_vec((inputs, outputs), r.f64s(inputs.saturating_mul(outputs))?)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        let bias = Array1::from(r.f64s(outputs)?);
        layers.push(Layer::new(weights, bias, activation)?);
        plan.push(offsets);
    }
    r.finish()?;
    let network = Network::new(layers, SplicePlan::new(plan)?)?;
    let model = AeModel::new(front_end, network)?;
    let ctx = model.context();
    if (ctx.left, ctx.right) != (left, right) {
        return Err(Error::InvalidConfig(format!(
            "model header claims context -{left},{right} but its layers span {ctx}"
        )));
    }
    Ok(model)
}

pub fn write_model(path: &Path, model: &AeModel) -> Result<()> {
    fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn read_model(path: &Path) -> Result<AeModel> {
    decode_model(&fs::read(path)?)
}

/// Per-utterance entry of a corpus manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    pub id: String,
    pub frames: usize,
    pub oracle: usize,
}

/// Description of a simulated corpus on disk.
///
/// ```text
/// # comment
/// corpus  scenario=hrm_like  streams=12  classes=10  seed=7  config=<hash>
/// profile stream=0  mix=0.1  smear=0  fail=0  offset=-2
/// utt     id=utt0000  frames=187  oracle=4
/// ```
///
/// Fields are tab separated `key=value` pairs after a record keyword.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub scenario: String,
    pub streams: usize,
    pub classes: usize,
    pub seed: u64,
    pub config_hash: String,
    pub profiles: Vec<CorruptionProfile>,
    pub utterances: Vec<UtteranceRecord>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# streamfuse corpus manifest\n");
        let _ = writeln!(
            s,
            "corpus\tscenario={}\tstreams={}\tclasses={}\tseed={}\tconfig={}",
            self.scenario, self.streams, self.classes, self.seed, self.config_hash
        );
        for (i, p) in self.profiles.iter().enumerate() {
            let _ = writeln!(
                s,
                "profile\tstream={i}\tmix={}\tsmear={}\tfail={}\toffset={}",
                p.mix,
                p.smear,
                u8::from(p.fail),
                p.offset
            );
        }
        for u in &self.utterances {
            let _ = writeln!(s, "utt\tid={}\tframes={}\toracle={}", u.id, u.frames, u.oracle);
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut corpus: Option<(String, usize, usize, u64, String)> = None;
        let mut profiles: Vec<CorruptionProfile> = Vec::new();
        let mut utterances = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: String| Error::parse(path, line_no, m);
            let mut tokens = line.split_whitespace();
            let kind = tokens.next().unwrap();
            let mut fields = Fields::new(tokens, kind, &err)?;
            match kind {
                "corpus" => {
                    if corpus.is_some() {
                        return Err(err("duplicate corpus record".into()));
                    }
                    corpus = Some((
                        fields.take("scenario")?,
                        fields.number("streams")?,
                        fields.number("classes")?,
                        fields.number("seed")?,
                        fields.take("config")?,
                    ));
                }
                "profile" => {
                    let stream: usize = fields.number("stream")?;
                    if stream != profiles.len() {
                        return Err(err(format!(
                            "expected profile for stream {}, got {stream}",
                            profiles.len()
                        )));
                    }
                    let fail: u8 = fields.number("fail")?;
                    let p = CorruptionProfile {
                        mix: fields.number("mix")?,
                        smear: fields.number("smear")?,
                        fail: match fail {
                            0 => false,
                            1 => true,
                            _ => return Err(err(format!("fail flag must be 0 or 1, got {fail}"))),
                        },
                        offset: fields.number("offset")?,
                    };
                    p.validate().map_err(|e| err(e.to_string()))?;
                    profiles.push(p);
                }
                "utt" => utterances.push(UtteranceRecord {
                    id: fields.take("id")?,
                    frames: fields.number("frames")?,
                    oracle: fields.number("oracle")?,
                }),
                other => return Err(err(format!("unknown record type {other:?}"))),
            }
            fields.finish()?;
        }
        let (scenario, streams, classes, seed, config_hash) =
            corpus.ok_or_else(|| Error::parse(path, 0, "missing corpus record"))?;
        if profiles.len() != streams {
            return Err(Error::parse(
                path,
                0,
                format!("{} profiles for {streams} streams", profiles.len()),
            ));
        }
        Ok(Self {
            scenario,
            streams,
            classes,
            seed,
            config_hash,
            profiles,
            utterances,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

struct Fields<'e, E: Fn(String) -> Error> {
    pairs: Vec<(&'e str, &'e str)>,
    kind: &'e str,
    err: &'e E,
}

impl<'e, E: Fn(String) -> Error> Fields<'e, E> {
    fn new(tokens: impl Iterator<Item = &'e str>, kind: &'e str, err: &'e E) -> Result<Self> {
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        for t in tokens {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| err(format!("field {t:?} is not key=value")))?;
            if pairs.iter().any(|(seen, _)| *seen == k) {
                return Err(err(format!("duplicate field {k:?}")));
            }
            pairs.push((k, v));
        }
        Ok(Self { pairs, kind, err })
    }

    fn take(&mut self, key: &str) -> Result<String> {
        match self.pairs.iter().position(|(k, _)| *k == key) {
            Some(i) => Ok(self.pairs.remove(i).1.to_string()),
            None => Err((self.err)(format!("{} record lacks field {key:?}", self.kind))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.take(key)?;
        v.parse()
            .map_err(|_| (self.err)(format!("field {key:?} has invalid value {v:?}")))
    }

    fn finish(&self) -> Result<()> {
        match self.pairs.first() {
            Some((k, _)) => Err((self.err)(format!("unknown field {k:?} in {} record", self.kind))),
            None => Ok(()),
        }
    }
}

/// One class index per line.
pub fn labels_to_text(labels: &[usize]) -> String {
    let mut s = String::with_capacity(labels.len() * 3);
    for l in labels {
        let _ = writeln!(s, "{l}");
    }
    s
}

pub fn parse_labels(text: &str, path: &Path, classes: usize) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: usize = l
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("invalid label {:?}", l.trim())))?;
            if v >= classes {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("label {v} out of range for {classes} classes"),
                ));
            }
            Ok(v)
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    fs::write(path, labels_to_text(labels))?;
    Ok(())
}

pub fn read_labels(path: &Path, classes: usize) -> Result<Vec<usize>> {
    parse_labels(&fs::read_to_string(path)?, path, classes)
}

/// ```text
/// states 3
/// labels a b c
/// priors p0 p1 p2
/// row a00 a01 a02
/// ...
/// ```
pub fn hmm_to_text(hmm: &HmmModel) -> String {
    let n = hmm.num_states();
    let mut s = format!("states {n}\nlabels {}\npriors", hmm.labels().join(" "));
    for p in hmm.priors() {
        let _ = write!(s, " {p}");
    }
    s.push('\n');
    for i in 0..n {
        s.push_str("row");
        for a in hmm.transition_row(i) {
            let _ = write!(s, " {a}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_hmm(text: &str, path: &Path) -> Result<HmmModel> {
    let mut states: Option<usize> = None;
    let mut labels: Option<Vec<String>> = None;
    let mut priors: Option<Vec<f64>> = None;
    let mut rows: Vec<f64> = Vec::new();
    let mut row_count = 0;
    let floats = |toks: std::str::SplitWhitespace<'_>, line: usize| -> Result<Vec<f64>> {
        toks.map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("invalid number {t:?}")))
        })
        .collect()
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next().unwrap() {
            "states" => {
                let v = toks.next().and_then(|t| t.parse().ok());
                states = Some(v.ok_or_else(|| Error::parse(path, line_no, "invalid state count"))?);
            }
            "labels" => labels = Some(toks.map(str::to_string).collect()),
            "priors" => priors = Some(floats(toks, line_no)?),
            "row" => {
                rows.extend(floats(toks, line_no)?);
                row_count += 1;
            }
            other => return Err(Error::parse(path, line_no, format!("unknown HMM field {other:?}"))),
        }
    }
    let n = states.ok_or_else(|| Error::parse(path, 0, "missing state count"))?;
    let priors = priors.ok_or_else(|| Error::parse(path, 0, "missing priors"))?;
    if row_count != n || n.checked_mul(n) != Some(rows.len()) {
        return Err(Error::parse(
            path,
            0,
            format!("expected {n} transition rows of {n} values"),
        ));
    }
    HmmModel::new(rows, priors, labels.unwrap_or_else(|| default_labels(n)))
}

pub fn write_hmm(path: &Path, hmm: &HmmModel) -> Result<()> {
    fs::write(path, hmm_to_text(hmm))?;
    Ok(())
}

pub fn read_hmm(path: &Path) -> Result<HmmModel> {
    parse_hmm(&fs::read_to_string(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn stream() -> PosteriorStream {
        PosteriorStream::from_frames(3, &[[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
            .unwrap()
            .with_frame_offset(-2)
    }

    #[test]
    fn stream_header_layout() {
        let bytes = encode_stream(&stream()).unwrap();
        assert_eq!(&bytes[..4], b"SATN");
        assert_eq!(bytes.len(), 23 + 2 * 3 * 4);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 2);
        assert_eq!(i32::from_le_bytes(bytes[18..22].try_into().unwrap()), -2);
    }

    #[test]
    fn stream_round_trip_matches_f32() {
        let s = stream();
        let back = decode_stream(&encode_stream(&s).unwrap()).unwrap();
        assert_eq!(back.stream_id(), 3);
        assert_eq!(back.frame_offset(), -2);
        for (a, b) in back.as_slice().iter().zip(s.as_slice()) {
            assert_eq!(*a, *b as f32 as f64);
        }
    }

    #[test]
    fn corrupt_headers_are_reported() {
        let bytes = encode_stream(&stream()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_stream(&bad), Err(Error::BadMagic { .. })));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_stream(&bad), Err(Error::VersionUnsupported(9))));
        assert!(matches!(
            decode_stream(&bytes[..bytes.len() - 1]),
            Err(Error::PayloadTruncated { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode_stream(&long), Err(Error::TrailingBytes { extra: 1 })));
        let mut bad = bytes;
        bad[22] = 7;
        assert!(matches!(decode_stream(&bad), Err(Error::UnsupportedDtype(7))));
        assert!(matches!(decode_stream(b"SA"), Err(Error::BadMagic { .. })));
    }

    #[test]
    fn off_simplex_payload_is_rejected() {
        let mut bytes = encode_stream(&stream()).unwrap();
        bytes[23..27].copy_from_slice(&0.9f32.to_le_bytes());
        assert!(matches!(
            decode_stream(&bytes),
            Err(Error::InvalidSimplex { row: 0, .. })
        ));
    }

    #[test]
    fn schedule_round_trip() {
        let s = AttentionSchedule::new(2, vec![0.25, 0.75, 1.0, 0.0]).unwrap();
        let back = decode_schedule(&encode_schedule(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            scenario: "hrm_like".into(),
            streams: 2,
            classes: 5,
            seed: 42,
            config_hash: "00ff".into(),
            profiles: vec![
                CorruptionProfile::clean(),
                CorruptionProfile {
                    mix: 0.1 + 0.2,
                    smear: 3,
                    fail: true,
                    offset: -1,
                },
            ],
            utterances: vec![UtteranceRecord {
                id: "utt0000".into(),
                frames: 100,
                oracle: 0,
            }],
        };
        let p = PathBuf::from("m.txt");
        assert_eq!(Manifest::parse(&m.to_text(), &p).unwrap(), m);
    }

    #[test]
    fn manifest_unknown_field_names_the_line() {
        let text = "# header\ncorpus\tscenario=x\tstreams=0\tclasses=3\tseed=1\tconfig=aa\nutt\tid=u\tframes=3\toracle=0\tcolour=red\n";
        match Manifest::parse(text, Path::new("m.txt")) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("colour"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn labels_and_hmm_round_trip() {
        let p = Path::new("x");
        assert_eq!(parse_labels(&labels_to_text(&[0, 4, 2]), p, 5).unwrap(), vec![0, 4, 2]);
        assert!(parse_labels("1\n7\n", p, 5).is_err());
        let hmm = HmmModel::self_loop(4, 0.85).unwrap();
        assert_eq!(parse_hmm(&hmm_to_text(&hmm), p).unwrap(), hmm);
    }
}
