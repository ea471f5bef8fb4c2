//! Synthetic sinusoid-in-noise data, datasets and the CSV exchange format.
//!
//! CSV layout: one row per `(sample, channel)`, header
//! `sample_id,label,channel_id,t0,t1,...`. Labels are 1-based.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labelled multichannel series, `series[[channel, t]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: u64,
    /// Class label in `1..=N_c`.
    pub label: usize,
    pub series: Array2<f64>,
}

impl Sample {
    pub fn channels(&self) -> usize {
        self.series.nrows()
    }

    pub fn len(&self) -> usize {
        self.series.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.series.ncols() == 0
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        let ds = Self { samples };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn channels(&self) -> Option<usize> {
        self.samples.first().map(Sample::channels)
    }

    /// Largest label present.
    pub fn n_classes(&self) -> usize {
        self.samples.iter().map(|s| s.label).max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(ch) = self.channels() else { return Ok(()) };
        for s in &self.samples {
            if s.channels() != ch {
                return Err(Error::Schema(format!("sample {} has {} channels, expected {ch}", s.id, s.channels())));
            }
            if s.label == 0 {
                return Err(Error::Schema(format!("sample {} has label 0; labels start at 1", s.id)));
            }
        }
        Ok(())
    }

    /// Keep only samples whose label is in `labels`, relabelled `1..` in the given order.
    pub fn select_classes(&self, labels: &[usize]) -> Dataset {
        let samples = self
            .samples
            .iter()
            .filter_map(|s| {
                labels.iter().position(|&l| l == s.label).map(|i| Sample { label: i + 1, ..s.clone() })
            })
            .collect();
        Dataset { samples }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset { samples: indices.iter().map(|&i| self.samples[i].clone()).collect() }
    }

    pub fn class_counts(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for s in &self.samples {
            *out.entry(s.label).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SplitDataset {
    pub train: Dataset,
    pub test: Dataset,
}

/// Parameters of the three-class sinusoid task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    /// Sinusoid frequency per class in Hz; `None` is a noise-only class.
    pub frequencies: Vec<Option<f64>>,
    pub length: usize,
    pub trials_per_class: usize,
    /// Target SNR interval in dB, sampled uniformly per trial.
    pub snr_db: [f64; 2],
    /// Amplitude interval, sampled uniformly per trial.
    pub amplitude: [f64; 2],
    /// Seconds per step.
    pub tau: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            frequencies: vec![Some(15.0), Some(20.0), None],
            length: 900,
            trials_per_class: 300,
            snr_db: [-1.0, -0.5],
            amplitude: [0.5, 1.5],
            tau: 0.01,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn n_classes(&self) -> usize {
        self.frequencies.len()
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.frequencies.is_empty() || self.length == 0 || self.trials_per_class == 0 {
            return bad("synthetic spec needs at least one class, step and trial");
        }
        if !(self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.snr_db[0] <= self.snr_db[1]) || !(self.amplitude[0] <= self.amplitude[1]) || !(self.amplitude[0] > 0.0) {
            return bad("snr and amplitude intervals must be ordered, amplitude positive");
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return bad("test fraction must be in [0, 1)");
        }
        Ok(())
    }
}

/// Signal and noise components of one generated trial.
#[derive(Clone, Debug)]
pub struct Trial {
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
    pub target_snr_db: f64,
}

impl Trial {
    pub fn series(&self) -> Vec<f64> {
        self.signal.iter().zip(&self.noise).map(|(s, n)| s + n).collect()
    }

    /// `10·log10(P_signal / P_noise)`; negative infinity for noise-only trials.
    pub fn measured_snr_db(&self) -> f64 {
        10.0 * (power(&self.signal) / power(&self.noise)).log10()
    }
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// One trial: `a·sin(2πf·kτ + φ)` plus Gaussian noise scaled to the drawn SNR.
///
/// Noise-only classes get the noise power a sinusoid of the drawn amplitude
/// would have been paired with, so the classes differ only in content.
pub fn synthesize_trial<R: Rng>(spec: &SyntheticSpec, frequency: Option<f64>, rng: &mut R) -> Trial {
    let a = rng.random_range(spec.amplitude[0]..=spec.amplitude[1]);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let snr_db = rng.random_range(spec.snr_db[0]..=spec.snr_db[1]);
    let raw: Vec<f64> = (0..spec.length).map(|_| rng.sample(StandardNormal)).collect();
    let signal: Vec<f64> = match frequency {
        Some(f) => (0..spec.length)
            .map(|k| a * (std::f64::consts::TAU * f * k as f64 * spec.tau + phase).sin())
            .collect(),
        None => vec![0.0; spec.length],
    };
    let signal_power = match frequency {
        Some(_) => power(&signal),
        None => 0.5 * a * a,
    };
    let target_noise = signal_power / 10f64.powf(snr_db / 10.0);
    let scale = (target_noise / power(&raw)).sqrt();
    Trial { signal, noise: raw.into_iter().map(|v| v * scale).collect(), target_snr_db: snr_db }
}

/// Generate all trials and split them 80/20 (by default) within each class.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SplitDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut all = Vec::with_capacity(spec.n_classes() * spec.trials_per_class);
    let mut id = 0u64;
    for (c, &freq) in spec.frequencies.iter().enumerate() {
        for _ in 0..spec.trials_per_class {
            let trial = synthesize_trial(spec, freq, &mut rng);
            let series = Array2::from_shape_vec((1, spec.length), trial.series()).expect("shape");
            all.push(Sample { id, label: c + 1, series });
            id += 1;
        }
    }
    Ok(stratified_split(Dataset { samples: all }, spec.test_fraction, &mut rng))
}

/// Per-class shuffle, then the first `round(fraction·n_class)` go to test.
pub fn stratified_split<R: Rng>(data: Dataset, test_fraction: f64, rng: &mut R) -> SplitDataset {
    let mut by_class: BTreeMap<usize, Vec<Sample>> = BTreeMap::new();
    for s in data.samples {
        by_class.entry(s.label).or_default().push(s);
    }
    let mut out = SplitDataset::default();
    for (_, mut group) in by_class {
        group.shuffle(rng);
        let n_test = (group.len() as f64 * test_fraction).round() as usize;
        let train = group.split_off(n_test);
        out.test.samples.extend(group);
        out.train.samples.extend(train);
    }
    out.train.samples.sort_by_key(|s| s.id);
    out.test.samples.sort_by_key(|s| s.id);
    out
}

/// What to do when series lengths differ within a file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthPolicy {
    #[default]
    Strict,
    Truncate,
    Pad,
}

impl std::str::FromStr for LengthPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Self::Strict),
            "truncate" => Ok(Self::Truncate),
            "pad" => Ok(Self::Pad),
            _ => Err(Error::InvalidParameter(format!("unknown length policy '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Expected channels per sample; inferred from the first sample if unset.
    pub channels: Option<usize>,
    pub length_policy: LengthPolicy,
}

const ID_COLUMNS: [&str; 3] = ["sample_id", "label", "channel_id"];

pub fn write_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let width = data.samples.iter().map(Sample::len).max().unwrap_or(0);
    let mut header: Vec<String> = ID_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..width).map(|t| format!("t{t}")));
    w.write_record(&header)?;
    for s in &data.samples {
        for (ch, row) in s.series.rows().into_iter().enumerate() {
            let mut rec = vec![s.id.to_string(), s.label.to_string(), ch.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(data: &Dataset, path: &Path) -> Result<()> {
    write_csv(data, std::fs::File::create(path)?)
}

/// Parse the CSV layout. Rows of a sample must be contiguous and channel ids
/// must run `0..channels`.
pub fn read_csv<R: Read>(input: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).has_headers(false).from_reader(input);
    let mut records = rdr.records();
    let header = match records.next() {
        None => return Ok(Dataset::default()),
        Some(h) => h?,
    };
    for (i, want) in ID_COLUMNS.iter().enumerate() {
        if header.get(i).map(str::trim) != Some(*want) {
            return Err(Error::Parse { line: 1, message: format!("header column {} must be '{want}'", i + 1) });
        }
    }
    // (id, label, rows)
    let mut raw: Vec<(u64, usize, Vec<Vec<f64>>)> = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() == 1 && rec.get(0).map(str::trim) == Some("") {
            continue;
        }
        let perr = |message: String| Error::Parse { line, message };
        if rec.len() < 3 {
            return Err(perr(format!("expected at least 3 columns, found {}", rec.len())));
        }
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let id: u64 = field(0).parse().map_err(|_| perr(format!("bad sample_id '{}'", field(0))))?;
        let label: usize = field(1).parse().map_err(|_| perr(format!("bad label '{}'", field(1))))?;
        if label == 0 {
            return Err(perr("labels start at 1".into()));
        }
        let ch: usize = field(2).parse().map_err(|_| perr(format!("bad channel_id '{}'", field(2))))?;
        let mut values = Vec::with_capacity(rec.len() - 3);
        for (j, v) in rec.iter().enumerate().skip(3) {
            let v = v.trim();
            if v.is_empty() {
                break;
            }
            let x: f64 = v.parse().map_err(|_| perr(format!("bad value '{v}' in column {}", j + 1)))?;
            if !x.is_finite() {
                return Err(perr(format!("non-finite value in column {}", j + 1)));
            }
            values.push(x);
        }
        match raw.last_mut() {
            Some((last_id, last_label, rows)) if *last_id == id => {
                if *last_label != label {
                    return Err(perr(format!("sample {id} changes label")));
                }
                if ch != rows.len() {
                    return Err(Error::Schema(format!("line {line}: sample {id} channel {ch} out of order")));
                }
                rows.push(values);
            }
            _ => {
                if raw.iter().any(|(i, _, _)| *i == id) {
                    return Err(perr(format!("rows of sample {id} are not contiguous")));
                }
                if ch != 0 {
                    return Err(Error::Schema(format!("line {line}: sample {id} starts at channel {ch}")));
                }
                raw.push((id, label, vec![values]));
            }
        }
    }
    let expected = schema.channels.or_else(|| raw.first().map(|r| r.2.len()));
    if let Some(ch) = expected {
        if let Some((id, _, rows)) = raw.iter().find(|r| r.2.len() != ch) {
            return Err(Error::Schema(format!("sample {id} has {} channels, expected {ch}", rows.len())));
        }
    }
    let lengths = raw.iter().flat_map(|r| r.2.iter().map(Vec::len));
    let (min_len, max_len) = lengths.fold((usize::MAX, 0), |(lo, hi), l| (lo.min(l), hi.max(l)));
    let target = match schema.length_policy {
        LengthPolicy::Strict if !raw.is_empty() && min_len != max_len => {
            return Err(Error::Schema(format!("series lengths range {min_len}..{max_len}; use truncate or pad")));
        }
        LengthPolicy::Truncate if !raw.is_empty() => min_len,
        _ => max_len,
    };
    let samples = raw
        .into_iter()
        .map(|(id, label, rows)| {
            let mut series = Array2::zeros((rows.len(), target));
            for (c, row) in rows.iter().enumerate() {
                for (t, v) in row.iter().take(target).enumerate() {
                    series[[c, t]] = *v;
                }
            }
            Sample { id, label, series }
        })
        .collect();
    Dataset::new(samples)
}

pub fn ingest_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    read_csv(std::fs::File::open(path)?, schema)
}

pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";

pub fn write_split(dir: &Path, data: &SplitDataset) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_csv_file(&data.train, &dir.join(TRAIN_FILE))?;
    write_csv_file(&data.test, &dir.join(TEST_FILE))
}

/// Read `train.csv` and `test.csv` from a directory; a missing file reads as empty.
pub fn read_split(dir: &Path, schema: &CsvSchema) -> Result<SplitDataset> {
    let load = |name: &str| {
        let p = dir.join(name);
        if p.exists() {
            ingest_csv(&p, schema)
        } else {
            Ok(Dataset::default())
        }
    };
    Ok(SplitDataset { train: load(TRAIN_FILE)?, test: load(TEST_FILE)? })
}
