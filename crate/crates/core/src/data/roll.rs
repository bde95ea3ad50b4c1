//! Binary piano rolls: construction from note events, pitch pruning,
//! windowing, and the text file format.

use std::io::{BufRead, Write};

use crate::data::midi::NoteEvent;
use crate::error::{Error, Result};

/// Guard against float rounding when an event boundary lands exactly on a
/// frame boundary, measured in frame units.
const FRAME_EPS: f64 = 1e-9;

/// Time x pitch binary matrix. A cell is 1 when the pitch sounds at any
/// point during the frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PianoRoll {
    frames: usize,
    dims: usize,
    cells: Vec<u8>,
    rate: f64,
    pitch_map: Vec<u8>,
}

impl PianoRoll {
    pub fn new(frames: usize, dims: usize, rate: f64, pitch_map: Vec<u8>) -> Result<Self> {
        if pitch_map.len() != dims {
            return Err(Error::Shape(format!(
                "pitch map has {} entries for {} dimensions",
                pitch_map.len(),
                dims
            )));
        }
        if !pitch_map.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArg("pitch map must be strictly increasing".into()));
        }
        Ok(PianoRoll {
            frames,
            dims,
            cells: vec![0; frames * dims],
            rate,
            pitch_map,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn pitch_map(&self) -> &[u8] {
        &self.pitch_map
    }

    pub fn get(&self, t: usize, d: usize) -> u8 {
        self.cells[t * self.dims + d]
    }

    pub fn set(&mut self, t: usize, d: usize, v: u8) {
        debug_assert!(v <= 1);
        self.cells[t * self.dims + d] = v;
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        &self.cells[t * self.dims..(t + 1) * self.dims]
    }

    /// Number of active cells in each pitch column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.dims];
        for t in 0..self.frames {
            for (d, &c) in self.frame(t).iter().enumerate() {
                counts[d] += c as usize;
            }
        }
        counts
    }

    /// Serialize in the text roll format:
    /// a header line `VRAE-ROLL v1 T=<int> D=<int> rate=<float> pitches=<comma-list>`
    /// followed by T lines of D '0'/'1' characters, each newline-terminated.
    pub fn write_text(&self, w: &mut impl Write) -> Result<()> {
        let pitches = self
            .pitch_map
            .iter()
            .map(|p| p.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(
            w,
            "VRAE-ROLL v1 T={} D={} rate={} pitches={}",
            self.frames, self.dims, self.rate, pitches
        )?;
        let mut line = Vec::with_capacity(self.dims + 1);
        for t in 0..self.frames {
            line.clear();
            line.extend(self.frame(t).iter().map(|&c| if c == 0 { b'0' } else { b'1' }));
            line.push(b'\n');
            w.write_all(&line)?;
        }
        Ok(())
    }

    pub fn read_text(r: &mut impl BufRead) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let header = header.trim_end_matches('\n');
        let mut parts = header.split(' ');
        if parts.next() != Some("VRAE-ROLL") || parts.next() != Some("v1") {
            return Err(Error::RollFormat(format!("bad header line: {header:?}")));
        }
        let mut t_val: Option<usize> = None;
        let mut d_val: Option<usize> = None;
        let mut rate: Option<f64> = None;
        let mut pitches: Option<Vec<u8>> = None;
        for part in parts {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::RollFormat(format!("bad header field: {part:?}")))?;
            match key {
                "T" => t_val = Some(parse_field(value, "T")?),
                "D" => d_val = Some(parse_field(value, "D")?),
                "rate" => rate = Some(parse_field(value, "rate")?),
                "pitches" => {
                    let list = if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|p| parse_field(p, "pitches"))
                            .collect::<Result<Vec<u8>>>()?
                    };
                    pitches = Some(list);
                }
                other => {
                    return Err(Error::RollFormat(format!("unknown header field {other:?}")))
                }
            }
        }
        let (frames, dims, rate, pitch_map) = match (t_val, d_val, rate, pitches) {
            (Some(t), Some(d), Some(r), Some(p)) => (t, d, r, p),
            _ => return Err(Error::RollFormat("incomplete header".into())),
        };
        let mut roll = PianoRoll::new(frames, dims, rate, pitch_map)?;
        let mut line = String::new();
        for t in 0..frames {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::RollFormat(format!(
                    "expected {frames} rows, file ends after {t}"
                )));
            }
            let row = line.trim_end_matches('\n');
            if row.len() != dims {
                return Err(Error::RollFormat(format!(
                    "row {t} has {} cells, expected {dims}",
                    row.len()
                )));
            }
            for (d, ch) in row.bytes().enumerate() {
                match ch {
                    b'0' => {}
                    b'1' => roll.set(t, d, 1),
                    other => {
                        return Err(Error::RollFormat(format!(
                            "row {t} contains byte 0x{other:02X}"
                        )))
                    }
                }
            }
        }
        Ok(roll)
    }
}

fn parse_field<T: std::str::FromStr>(value: &str, name: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::RollFormat(format!("cannot parse {name}={value:?}")))
}

/// Sample note events onto a frame grid. Frame t covers [t/rate, (t+1)/rate)
/// and a cell is set when the note interval overlaps the frame at all, so
/// notes shorter than one frame still land somewhere.
pub fn to_piano_roll(events: &[NoteEvent], rate: f64) -> Result<PianoRoll> {
    if rate <= 0.0 || !rate.is_finite() {
        return Err(Error::InvalidArg(format!("rate must be positive, got {rate}")));
    }
    let pitch_map: Vec<u8> = (0..128).collect();
    let mut spans = Vec::with_capacity(events.len());
    let mut frames = 0usize;
    for ev in events {
        if ev.offset <= ev.onset {
            return Err(Error::InvalidArg(format!(
                "note offset {} not after onset {}",
                ev.offset, ev.onset
            )));
        }
        let first = (ev.onset * rate + FRAME_EPS).floor().max(0.0) as usize;
        let end = (ev.offset * rate - FRAME_EPS).ceil().max(0.0) as usize;
        let end = end.max(first + 1); // sub-epsilon notes still occupy a frame
        spans.push((first, end, ev.pitch as usize));
        frames = frames.max(end);
    }
    let mut roll = PianoRoll::new(frames, 128, rate, pitch_map)?;
    for (first, end, pitch) in spans {
        for t in first..end {
            roll.set(t, pitch, 1);
        }
    }
    Ok(roll)
}

/// Drop pitch columns with fewer than `min_active` active cells summed over
/// all rolls. Retained columns keep their order and content.
pub fn prune_pitches(
    rolls: &[PianoRoll],
    min_active: usize,
) -> Result<(Vec<PianoRoll>, Vec<u8>)> {
    let first = rolls
        .first()
        .ok_or_else(|| Error::EmptyData("no rolls to prune".into()))?;
    for r in rolls {
        if r.dims != first.dims || r.rate != first.rate || r.pitch_map != first.pitch_map {
            return Err(Error::Shape(
                "rolls must share rate and pitch dimensions to be pruned together".into(),
            ));
        }
    }
    let mut totals = vec![0usize; first.dims];
    for roll in rolls {
        for (d, c) in roll.column_counts().into_iter().enumerate() {
            totals[d] += c;
        }
    }
    let keep: Vec<usize> = (0..first.dims)
        .filter(|&d| totals[d] >= min_active)
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyData(format!(
            "no pitch reaches {min_active} active frames"
        )));
    }
    let kept_pitches: Vec<u8> = keep.iter().map(|&d| first.pitch_map[d]).collect();
    let mut out = Vec::with_capacity(rolls.len());
    for roll in rolls {
        let mut pruned =
            PianoRoll::new(roll.frames, keep.len(), roll.rate, kept_pitches.clone())?;
        for t in 0..roll.frames {
            for (new_d, &old_d) in keep.iter().enumerate() {
                pruned.set(t, new_d, roll.get(t, old_d));
            }
        }
        out.push(pruned);
    }
    Ok((out, kept_pitches))
}

/// Cut a roll into complete windows starting at 0, stride, 2*stride, ...
/// With `limit`, at most that many windows are taken from this roll.
pub fn segment(
    roll: &PianoRoll,
    window: usize,
    stride: usize,
    limit: Option<usize>,
) -> Result<Vec<PianoRoll>> {
    if window == 0 {
        return Err(Error::InvalidArg("window must be at least 1".into()));
    }
    if stride == 0 || stride > window {
        return Err(Error::InvalidArg(format!(
            "stride must be in [1, window], got stride={stride} window={window}"
        )));
    }
    let mut out = Vec::new();
    let mut start = 0usize;
    let cap = limit.unwrap_or(usize::MAX);
    while start + window <= roll.frames && out.len() < cap {
        let mut w = PianoRoll::new(window, roll.dims, roll.rate, roll.pitch_map.clone())?;
        for t in 0..window {
            for d in 0..roll.dims {
                w.set(t, d, roll.get(start + t, d));
            }
        }
        out.push(w);
        start += stride;
    }
    Ok(out)
}
