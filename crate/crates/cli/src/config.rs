//! Run configuration: a flat `key = value` file, with command-line flags
//! layered on top.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use seqmatch::blur::BlurSpec;
use seqmatch::matching::DEFAULT_HALF_WINDOW;
use seqmatch::{CropRect, SlopeConfig};

/// Everything a command needs to know, fully resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub reference_dir: Option<PathBuf>,
    pub query_dir: Option<PathBuf>,
    /// Prebuilt reference store; takes precedence over `reference_dir`.
    pub reference_store: Option<PathBuf>,
    pub reference_crop: Option<CropRect>,
    pub query_crop: Option<CropRect>,
    pub rx: usize,
    pub ry: usize,
    pub n_p: usize,
    pub sequence_length: usize,
    pub half_window: usize,
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
    /// Reference frames per query frame; derived from spacings or frame
    /// counts when unset.
    pub v_av: Option<f64>,
    pub threshold: f64,
    pub fp_tolerance: f64,
    /// Mean distance between consecutive frames, meters.
    pub reference_spacing: Option<f64>,
    pub query_spacing: Option<f64>,
    pub ground_truth: Option<PathBuf>,
    /// Learn query frames as they arrive and match each against the ones
    /// before it, instead of against a separate reference traverse.
    pub online: bool,
    pub serial: bool,
    pub exposures_ms: Vec<f64>,
    pub source_fps: f64,
    pub histogram_bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let slopes = SlopeConfig::default();
        Self {
            reference_dir: None,
            query_dir: None,
            reference_store: None,
            reference_crop: None,
            query_crop: None,
            rx: 64,
            ry: 32,
            n_p: 8,
            sequence_length: 50,
            half_window: DEFAULT_HALF_WINDOW,
            v_min: slopes.v_min,
            v_max: slopes.v_max,
            v_step: slopes.v_step,
            v_av: None,
            threshold: f64::INFINITY,
            fp_tolerance: seqmatch::eval::DEFAULT_FP_TOLERANCE,
            reference_spacing: None,
            query_spacing: None,
            ground_truth: None,
            online: false,
            serial: false,
            exposures_ms: vec![66.0, 500.0, 1000.0, 2000.0, 5000.0],
            source_fps: 15.0,
            histogram_bins: 100,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("{key}: expected true or false, got {value:?}"),
    }
}

fn parse_crop(key: &str, value: &str) -> Result<Option<CropRect>> {
    if value == "none" {
        return Ok(None);
    }
    let parts: Vec<usize> = value
        .split(',')
        .map(|p| parse_num(key, p.trim()))
        .collect::<Result<_>>()?;
    match parts[..] {
        [x0, y0, w, h] => Ok(Some(CropRect::new(x0, y0, w, h))),
        _ => bail!("{key}: expected x0,y0,width,height, got {value:?}"),
    }
}

fn parse_opt_f64(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "auto" || value == "none" {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

fn fmt_crop(c: &Option<CropRect>) -> String {
    match c {
        Some(c) => format!("{},{},{},{}", c.x0, c.y0, c.width, c.height),
        None => "none".into(),
    }
}

fn fmt_opt_f64(v: Option<f64>, none: &str) -> String {
    v.map_or_else(|| none.to_string(), |x| x.to_string())
}

impl RunConfig {
    /// Sets one key. Paths are taken as given.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let path = || (!value.is_empty() && value != "none").then(|| PathBuf::from(value));
        match key {
            "reference_dir" => self.reference_dir = path(),
            "query_dir" => self.query_dir = path(),
            "reference_store" => self.reference_store = path(),
            "ground_truth" => self.ground_truth = path(),
            "reference_crop" => self.reference_crop = parse_crop(key, value)?,
            "query_crop" => self.query_crop = parse_crop(key, value)?,
            "rx" => self.rx = parse_num(key, value)?,
            "ry" => self.ry = parse_num(key, value)?,
            "n_p" => self.n_p = parse_num(key, value)?,
            "sequence_length" => self.sequence_length = parse_num(key, value)?,
            "half_window" => self.half_window = parse_num(key, value)?,
            "v_min" => self.v_min = parse_num(key, value)?,
            "v_max" => self.v_max = parse_num(key, value)?,
            "v_step" => self.v_step = parse_num(key, value)?,
            "v_av" => self.v_av = parse_opt_f64(key, value)?,
            "threshold" => self.threshold = parse_num(key, value)?,
            "fp_tolerance" => self.fp_tolerance = parse_num(key, value)?,
            "reference_spacing" => self.reference_spacing = parse_opt_f64(key, value)?,
            "query_spacing" => self.query_spacing = parse_opt_f64(key, value)?,
            "online" => self.online = parse_bool(key, value)?,
            "serial" => self.serial = parse_bool(key, value)?,
            "exposures_ms" => {
                self.exposures_ms = value
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| parse_num(key, p.trim()))
                    .collect::<Result<_>>()?
            }
            "source_fps" => self.source_fps = parse_num(key, value)?,
            "histogram_bins" => self.histogram_bins = parse_num(key, value)?,
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", no + 1))?;
            self.set(key.trim(), value)
                .with_context(|| format!("line {}", no + 1))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    /// Every key in a fixed order; floats use the shortest text that reads
    /// back to the same value.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or("none".into(), |p| p.display().to_string())
        };
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("reference_dir", path(&self.reference_dir));
        line("query_dir", path(&self.query_dir));
        line("reference_store", path(&self.reference_store));
        line("ground_truth", path(&self.ground_truth));
        line("reference_crop", fmt_crop(&self.reference_crop));
        line("query_crop", fmt_crop(&self.query_crop));
        line("rx", self.rx.to_string());
        line("ry", self.ry.to_string());
        line("n_p", self.n_p.to_string());
        line("sequence_length", self.sequence_length.to_string());
        line("half_window", self.half_window.to_string());
        line("v_min", self.v_min.to_string());
        line("v_max", self.v_max.to_string());
        line("v_step", self.v_step.to_string());
        line("v_av", fmt_opt_f64(self.v_av, "auto"));
        line("threshold", self.threshold.to_string());
        line("fp_tolerance", self.fp_tolerance.to_string());
        line(
            "reference_spacing",
            fmt_opt_f64(self.reference_spacing, "none"),
        );
        line("query_spacing", fmt_opt_f64(self.query_spacing, "none"));
        line("online", self.online.to_string());
        line("serial", self.serial.to_string());
        line(
            "exposures_ms",
            self.exposures_ms
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        line("source_fps", self.source_fps.to_string());
        line("histogram_bins", self.histogram_bins.to_string());
        out
    }

    pub fn slopes(&self, v_av: f64) -> SlopeConfig {
        SlopeConfig {
            v_min: self.v_min,
            v_max: self.v_max,
            v_step: self.v_step,
            v_av,
        }
    }

    pub fn execution(&self) -> seqmatch::Execution {
        if self.serial {
            seqmatch::Execution::Serial
        } else {
            seqmatch::Execution::Parallel
        }
    }

    /// Checks the settings that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.n_p == 0
            || self.rx == 0
            || self.ry == 0
            || !self.rx.is_multiple_of(self.n_p)
            || !self.ry.is_multiple_of(self.n_p)
        {
            bail!(
                "template size {}x{} must be divisible by the patch side {}",
                self.rx,
                self.ry,
                self.n_p
            );
        }
        if self.sequence_length == 0 {
            bail!("sequence_length must be at least 1");
        }
        if self.half_window == 0 {
            bail!("half_window must be at least 1");
        }
        self.slopes(self.v_av.unwrap_or(1.0))
            .validate()
            .map_err(|e| anyhow!("{e}"))?;
        if self.threshold.is_nan() {
            bail!("threshold must be a number");
        }
        if self.fp_tolerance.is_nan() || self.fp_tolerance < 0.0 {
            bail!("fp_tolerance must be non-negative");
        }
        for (name, v) in [
            ("reference_spacing", self.reference_spacing),
            ("query_spacing", self.query_spacing),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    bail!("{name} must be positive");
                }
            }
        }
        if self.histogram_bins == 0 {
            bail!("histogram_bins must be at least 1");
        }
        Ok(())
    }

    /// Blur windows for the configured exposures, each at most one sequence
    /// long.
    pub fn blur_specs(&self) -> Result<Vec<BlurSpec>> {
        if self.exposures_ms.is_empty() {
            bail!("exposures_ms is empty");
        }
        self.exposures_ms
            .iter()
            .map(|&ms| {
                let spec = BlurSpec::new(ms, self.source_fps).map_err(|e| anyhow!("{e}"))?;
                if spec.window() > self.sequence_length {
                    bail!(
                        "{ms} ms at {} fps spans {} frames, longer than the sequence length {}",
                        self.source_fps,
                        spec.window(),
                        self.sequence_length
                    );
                }
                Ok(spec)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn every_key_round_trips() {
        let mut cfg = RunConfig {
            reference_dir: Some("data/day".into()),
            query_dir: Some("data/night".into()),
            reference_store: Some("day.sqsm".into()),
            reference_crop: Some(CropRect::new(0, 10, 640, 320)),
            query_crop: Some(CropRect::new(4, 0, 320, 240)),
            rx: 64,
            ry: 48,
            sequence_length: 20,
            half_window: 7,
            v_min: 0.8,
            v_max: 1.25,
            v_step: 0.05,
            v_av: Some(0.1 + 0.2),
            threshold: -1.3333333333333333,
            fp_tolerance: 2.5,
            reference_spacing: Some(13.1),
            query_spacing: Some(1.0 / 3.0),
            ground_truth: Some("gt.csv".into()),
            online: true,
            serial: true,
            exposures_ms: vec![66.0, 132.5],
            source_fps: 29.97,
            histogram_bins: 20,
            ..Default::default()
        };
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
        cfg.threshold = f64::NEG_INFINITY;
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn comments_and_unknown_keys() {
        let cfg = RunConfig::parse("# day run\n\nrx = 32\n  ry=16 \n").unwrap();
        assert_eq!((cfg.rx, cfg.ry), (32, 16));
        assert!(RunConfig::parse("speed = 3").is_err());
        assert!(RunConfig::parse("rx 32").is_err());
        assert!(RunConfig::parse("reference_crop = 1,2,3").is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad = RunConfig {
            rx: 60,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            v_min: 1.3,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = RunConfig {
            query_spacing: Some(0.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn blur_windows_must_fit_a_sequence() {
        let cfg = RunConfig::default();
        assert!(cfg.blur_specs().is_err());
        let cfg = RunConfig {
            sequence_length: 80,
            ..Default::default()
        };
        let windows: Vec<usize> = cfg
            .blur_specs()
            .unwrap()
            .iter()
            .map(|s| s.window())
            .collect();
        assert_eq!(windows, vec![1, 8, 15, 30, 75]);
    }
}
