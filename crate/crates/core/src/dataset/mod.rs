//! Training data: excitation synthesis, amplifier targets, splits, windowing
//! and WAV I/O.

mod excitation;
mod wav;
mod window;

pub use excitation::{generate_excitation, synth_note, PEAK_LEVEL};
pub use wav::{decode_wav, encode_wav, read_wav, write_wav};
pub use window::{tensorize, tensorize_block, Tensorize, WindowBatch, WindowSource};

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use crate::amp::{amp_process, AmpParams, MAX_GAIN_KNOB};
use crate::error::{Error, Result};

pub const SUPPORTED_SAMPLE_RATES: [u32; 3] = [8_000, 16_000, 44_100];

/// Mono audio.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if !SUPPORTED_SAMPLE_RATES.contains(&sample_rate) {
            return Err(Error::invalid(format!(
                "sample rate {sample_rate} Hz not supported (expected one of {SUPPORTED_SAMPLE_RATES:?})"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// One contiguous pass of the excitation through the amplifier at a fixed knob.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GainSegment {
    pub start: usize,
    /// exclusive
    pub end: usize,
    pub gain_knob: f64,
}

impl GainSegment {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
    Validation,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Validation => "validation",
        }
    }
}

/// Index ranges of each split, one range per gain segment, in segment order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<Range<usize>>,
    pub test: Vec<Range<usize>>,
    pub validation: Vec<Range<usize>>,
}

impl Splits {
    pub fn ranges(&self, split: Split) -> &[Range<usize>] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
            Split::Validation => &self.validation,
        }
    }
}

/// Aligned columns `[x[n], g[n], target[n]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: AudioSignal,
    /// Knob position divided by 10, constant within each segment.
    pub g: Vec<f64>,
    pub target: AudioSignal,
    pub segments: Vec<GainSegment>,
    pub splits: Option<Splits>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.x.sample_rate
    }

    pub fn split_ranges(&self, split: Split) -> Result<&[Range<usize>]> {
        self.splits
            .as_ref()
            .map(|s| s.ranges(split))
            .ok_or_else(|| Error::invalid("dataset has not been split"))
    }

    /// Start of the segment containing `n`; windows never read across it.
    pub fn segment_start(&self, n: usize) -> usize {
        let i = self.segments.partition_point(|s| s.end <= n);
        self.segments.get(i).map_or(0, |s| s.start)
    }

    pub fn gain_at(&self, n: usize) -> Option<f64> {
        let i = self.segments.partition_point(|s| s.end <= n);
        self.segments.get(i).map(|s| s.gain_knob)
    }

    fn validate(&self) -> Result<()> {
        let n = self.x.len();
        if self.g.len() != n || self.target.len() != n {
            return Err(Error::DimensionMismatch {
                context: "dataset columns",
                expected: n,
                found: self.g.len().min(self.target.len()),
            });
        }
        if self.x.sample_rate != self.target.sample_rate {
            return Err(Error::invalid("x and target sample rates differ"));
        }
        let mut at = 0;
        for s in &self.segments {
            if s.start != at || s.end < s.start {
                return Err(Error::invalid("gain segments must tile the signal in order"));
            }
            at = s.end;
        }
        if at != n {
            return Err(Error::invalid(format!("gain segments cover {at} of {n} samples")));
        }
        Ok(())
    }
}

/// Runs the excitation through the amplifier once per gain value and
/// concatenates the passes.
pub fn build_dataset(excitation: &AudioSignal, gain_values: &[f64], amp: &AmpParams) -> Result<Dataset> {
    if gain_values.is_empty() {
        return Err(Error::invalid("at least one gain value is required"));
    }
    let n = excitation.len();
    let total = n * gain_values.len();
    let mut x = Vec::with_capacity(total);
    let mut g = Vec::with_capacity(total);
    let mut target = Vec::with_capacity(total);
    let mut segments = Vec::with_capacity(gain_values.len());
    for &knob in gain_values {
        let params = AmpParams {
            gain_knob: knob,
            ..*amp
        };
        let y = amp_process(&excitation.samples, &params)?;
        segments.push(GainSegment {
            start: x.len(),
            end: x.len() + n,
            gain_knob: knob,
        });
        x.extend_from_slice(&excitation.samples);
        g.extend(std::iter::repeat_n(knob / MAX_GAIN_KNOB, n));
        target.extend_from_slice(&y);
    }
    Ok(Dataset {
        x: AudioSignal::new(x, excitation.sample_rate)?,
        g,
        target: AudioSignal::new(target, excitation.sample_rate)?,
        segments,
        splits: None,
    })
}

pub const DEFAULT_SPLIT_RATIOS: (f64, f64, f64) = (0.70, 0.15, 0.15);

/// Splits every gain segment into contiguous train/test/validation ranges.
/// Each range must hold at least `num_step + 1` samples.
pub fn split_dataset(mut ds: Dataset, ratios: (f64, f64, f64), num_step: usize) -> Result<Dataset> {
    let (a, b, c) = ratios;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios {ratios:?} must be positive and sum to 1"
        )));
    }
    ds.validate()?;
    let mut splits = Splits::default();
    for seg in &ds.segments {
        let n = seg.len();
        let n_train = (n as f64 * a).round() as usize;
        let n_train_test = ((n as f64 * (a + b)).round() as usize).max(n_train);
        let train = seg.start..seg.start + n_train;
        let test = seg.start + n_train..seg.start + n_train_test;
        let validation = seg.start + n_train_test..seg.end;
        for (name, r) in [("train", &train), ("test", &test), ("validation", &validation)] {
            if r.len() < num_step + 1 {
                return Err(Error::EmptySplit {
                    split: name,
                    min_len: num_step + 1,
                });
            }
        }
        splits.train.push(train);
        splits.test.push(test);
        splits.validation.push(validation);
    }
    ds.splits = Some(splits);
    Ok(ds)
}

pub fn segments_to_text(segments: &[GainSegment]) -> String {
    let mut out = String::new();
    for s in segments {
        let _ = writeln!(out, "{},{},{}", s.start, s.end, s.gain_knob);
    }
    out
}

pub fn segments_from_text(text: &str) -> Result<Vec<GainSegment>> {
    let bad = |line: &str| Error::Parse {
        what: "gain segment file",
        detail: format!("expected `start_sample,end_sample,gain_knob`, got `{line}`"),
    };
    let mut out = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad(line));
        }
        let start = parts[0].parse().map_err(|_| bad(line))?;
        let end = parts[1].parse().map_err(|_| bad(line))?;
        let gain_knob: f64 = parts[2].parse().map_err(|_| bad(line))?;
        if end < start || !(0.0..=MAX_GAIN_KNOB).contains(&gain_knob) {
            return Err(bad(line));
        }
        out.push(GainSegment { start, end, gain_knob });
    }
    Ok(out)
}

pub const X_FILE: &str = "x.wav";
pub const TARGET_FILE: &str = "target.wav";
pub const GAINS_FILE: &str = "gains.txt";

/// Writes `x.wav`, `target.wav` and `gains.txt` into `dir`.
pub fn export_dataset(dir: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_wav(dir.join(X_FILE), &ds.x)?;
    write_wav(dir.join(TARGET_FILE), &ds.target)?;
    let path = dir.join(GAINS_FILE);
    std::fs::write(&path, segments_to_text(&ds.segments)).map_err(|e| Error::io(&path, e))
}

/// Reads a directory written by [`export_dataset`]. The result is unsplit.
pub fn import_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let x = read_wav(dir.join(X_FILE))?;
    let target = read_wav(dir.join(TARGET_FILE))?;
    let path = dir.join(GAINS_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let segments = segments_from_text(&text)?;
    let mut g = vec![0.0; x.len()];
    for s in &segments {
        if s.end > g.len() {
            return Err(Error::invalid("gain segment extends past the end of x.wav"));
        }
        g[s.range()].fill(s.gain_knob / MAX_GAIN_KNOB);
    }
    let ds = Dataset {
        x,
        g,
        target,
        segments,
        splits: None,
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Rng;

    fn ramp(n: usize) -> AudioSignal {
        AudioSignal::new((0..n).map(|i| (i as f64 / n as f64) - 0.5).collect(), 8_000).unwrap()
    }

    #[test]
    fn audio_signal_contract() {
        assert!(AudioSignal::new(vec![0.0], 22_050).is_err());
        assert!(AudioSignal::new(vec![f64::NAN], 8_000).is_err());
        assert_eq!(ramp(8_000).duration_s(), 1.0);
    }

    #[test]
    fn single_gain_dataset() {
        let ex = ramp(100);
        let ds = build_dataset(&ex, &[5.0], &AmpParams::default()).unwrap();
        assert_eq!(ds.len(), 100);
        assert!(ds.g.iter().all(|&g| g == 0.5));
        let oracle = amp_process(&ex.samples, &AmpParams::with_gain(5.0)).unwrap();
        assert_eq!(ds.target.samples, oracle);
    }

    #[test]
    fn three_gain_dataset() {
        let ex = ramp(50);
        let ds = build_dataset(&ex, &[2.0, 5.0, 8.0], &AmpParams::default()).unwrap();
        assert_eq!(ds.len(), 150);
        let mut levels: Vec<f64> = ds.g.clone();
        levels.dedup();
        assert_eq!(levels, vec![0.2, 0.5, 0.8]);
        for (k, gain) in [2.0, 5.0, 8.0].into_iter().enumerate() {
            let oracle = amp_process(&ex.samples, &AmpParams::with_gain(gain)).unwrap();
            assert_eq!(&ds.target.samples[k * 50..(k + 1) * 50], &oracle[..]);
            assert_eq!(&ds.x.samples[k * 50..(k + 1) * 50], &ex.samples[..]);
        }
        assert_eq!(ds.segment_start(0), 0);
        assert_eq!(ds.segment_start(49), 0);
        assert_eq!(ds.segment_start(50), 50);
        assert_eq!(ds.segment_start(149), 100);
        assert_eq!(ds.gain_at(120), Some(8.0));
    }

    #[test]
    fn empty_gain_list_rejected() {
        assert!(build_dataset(&ramp(10), &[], &AmpParams::default()).is_err());
    }

    #[test]
    fn default_split_arithmetic() {
        let ds = build_dataset(&ramp(1000), &[5.0], &AmpParams::default()).unwrap();
        let ds = split_dataset(ds, DEFAULT_SPLIT_RATIOS, 10).unwrap();
        let s = ds.splits.as_ref().unwrap();
        assert_eq!(s.train, vec![0..700]);
        assert_eq!(s.test, vec![700..850]);
        assert_eq!(s.validation, vec![850..1000]);
    }

    #[test]
    fn splits_partition_every_gain_pass() {
        let ds = build_dataset(&ramp(997), &[2.0, 5.0, 8.0], &AmpParams::default()).unwrap();
        let ds = split_dataset(ds, DEFAULT_SPLIT_RATIOS, 32).unwrap();
        let s = ds.splits.clone().unwrap();
        let mut covered = vec![0u8; ds.len()];
        for split in [Split::Train, Split::Test, Split::Validation] {
            let ranges = s.ranges(split);
            assert_eq!(ranges.len(), 3);
            let mut gains: Vec<f64> = ranges.iter().map(|r| ds.gain_at(r.start).unwrap()).collect();
            gains.dedup();
            assert_eq!(gains, vec![2.0, 5.0, 8.0]);
            for r in ranges {
                assert_eq!(ds.gain_at(r.end - 1), ds.gain_at(r.start));
                for i in r.clone() {
                    covered[i] += 1;
                }
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn split_errors() {
        let ds = build_dataset(&ramp(100), &[5.0], &AmpParams::default()).unwrap();
        assert!(matches!(
            split_dataset(ds.clone(), DEFAULT_SPLIT_RATIOS, 15),
            Err(Error::EmptySplit { split: "test", .. })
        ));
        assert!(split_dataset(ds.clone(), (0.5, 0.5, 0.5), 1).is_err());
        assert!(split_dataset(ds, (1.0, 0.0, 0.0), 1).is_err());
    }

    #[test]
    fn segment_text_round_trip() {
        let segs = vec![
            GainSegment { start: 0, end: 10, gain_knob: 2.0 },
            GainSegment { start: 10, end: 20, gain_knob: 7.25 },
        ];
        let text = segments_to_text(&segs);
        assert_eq!(text, "0,10,2\n10,20,7.25\n");
        assert_eq!(segments_from_text(&text).unwrap(), segs);
        assert!(segments_from_text("0,10").is_err());
        assert!(segments_from_text("0,10,11").is_err());
    }

    #[test]
    fn export_import() {
        let mut rng = Rng::new(3);
        let ex = generate_excitation(0.05, 8_000, &mut rng).unwrap();
        let ds = build_dataset(&ex, &[2.0, 8.0], &AmpParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_dataset(dir.path(), &ds).unwrap();
        let back = import_dataset(dir.path()).unwrap();
        assert_eq!(back.segments, ds.segments);
        assert_eq!(back.g, ds.g);
        for (a, b) in back.x.samples.iter().zip(&ds.x.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }
}
