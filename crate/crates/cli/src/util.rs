//! Shared helpers: roll loading, schedule parsing, and the resolved-config
//! banner every command prints before doing work.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vrae_core::data::PianoRoll;
use vrae_core::latentops::FeedbackPolicy;
use vrae_core::optimizer::LrSchedule;

/// Print the fully resolved configuration, one `key = value` per line, so a
/// run can be reproduced from its log alone.
pub fn print_config(command: &str, entries: &[(&str, String)]) {
    println!("vrae {command} configuration:");
    for (key, value) in entries {
        println!("  {key} = {value}");
    }
}

pub fn show_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(v) => v.to_string(),
        None => "none".to_string(),
    }
}

pub fn show_paths(paths: &[PathBuf]) -> String {
    let shown: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
    shown.join(",")
}

/// Load roll files, labelling each by its file stem.
pub fn load_rolls(paths: &[PathBuf]) -> Result<Vec<(PianoRoll, String)>> {
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let roll = PianoRoll::read_text(&mut BufReader::new(file))
            .with_context(|| format!("reading {}", path.display()))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        out.push((roll, label));
    }
    Ok(out)
}

/// Parse `epoch:rate,epoch:rate,...`, optionally prefixed with `geometric:`
/// to interpolate geometrically between the points.
pub fn parse_schedule(spec: &str) -> Result<LrSchedule> {
    let (geometric, body) = match spec.strip_prefix("geometric:") {
        Some(rest) => (true, rest),
        None => (false, spec),
    };
    let mut points = Vec::new();
    for part in body.split(',') {
        let (epoch, rate) = part
            .split_once(':')
            .with_context(|| format!("schedule entry {part:?} is not epoch:rate"))?;
        let epoch: usize = epoch
            .trim()
            .parse()
            .with_context(|| format!("bad epoch in schedule entry {part:?}"))?;
        let rate: f64 = rate
            .trim()
            .parse()
            .with_context(|| format!("bad rate in schedule entry {part:?}"))?;
        points.push((epoch, rate));
    }
    let sched = if geometric {
        LrSchedule::geometric(points)?
    } else {
        LrSchedule::step(points)?
    };
    Ok(sched)
}

pub fn describe_schedule(s: &LrSchedule) -> String {
    let points: Vec<String> = s
        .points()
        .iter()
        .map(|(e, r)| format!("{e}:{r}"))
        .collect();
    format!(
        "{}{}",
        if s.is_geometric() { "geometric:" } else { "" },
        points.join(",")
    )
}

pub fn parse_policy(name: &str, threshold: f64, seed: u64) -> Result<FeedbackPolicy> {
    let policy = match name {
        "sample" => FeedbackPolicy::Sample { seed },
        "threshold" => FeedbackPolicy::Threshold { threshold },
        "expectation" => FeedbackPolicy::Expectation,
        other => bail!("unknown policy {other:?}; available: sample, threshold, expectation"),
    };
    Ok(policy)
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("creating directory {}", path.display()))?;
    Ok(())
}
