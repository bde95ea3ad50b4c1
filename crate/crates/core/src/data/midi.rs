//! Standard MIDI File ingestion and the inverse export used for round trips.
//!
//! Supported input: format 0 and format 1 files with ticks-per-quarter-note
//! division. Tracks are merged into one note stream, note-on with velocity 0
//! counts as note-off, and ticks become absolute seconds through the tempo
//! map (120 BPM before the first tempo event). SMPTE division and format 2
//! files are rejected.

use crate::error::{Error, Result};
use crate::data::roll::PianoRoll;

const DEFAULT_US_PER_QN: u32 = 500_000;

/// One note with absolute times in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct NoteEvent {
    pub onset: f64,
    pub offset: f64,
    pub pitch: u8,
}

/// Parse result: events plus non-fatal oddities encountered on the way.
#[derive(Clone, Debug, Default)]
pub struct ParsedMidi {
    pub events: Vec<NoteEvent>,
    pub warnings: Vec<String>,
}

pub fn read_midi(bytes: &[u8]) -> Result<ParsedMidi> {
    let mut cur = Cursor::new(bytes);
    let magic = cur.take(4)?;
    if magic != b"MThd" {
        return Err(Error::Midi("missing MThd header chunk".into()));
    }
    let header_len = cur.u32()?;
    if header_len < 6 {
        return Err(Error::Midi(format!("header chunk length {header_len} < 6")));
    }
    let format = cur.u16()?;
    let ntrks = cur.u16()?;
    let division = cur.u16()?;
    cur.skip(header_len as usize - 6)?;

    if format > 1 {
        return Err(Error::UnsupportedMidi(format!("SMF format {format}")));
    }
    if division & 0x8000 != 0 {
        return Err(Error::UnsupportedMidi("SMPTE division".into()));
    }
    if division == 0 {
        return Err(Error::Midi("division of 0 ticks per quarter note".into()));
    }
    let tpqn = division as f64;

    let mut warnings = Vec::new();
    let mut tempo_changes: Vec<(u64, u32)> = Vec::new();
    let mut notes_ticks: Vec<(u64, u64, u8)> = Vec::new();
    let mut tracks_seen = 0u16;

    while !cur.at_end() {
        let chunk_id = cur.take(4)?;
        let chunk_len = cur.u32()? as usize;
        let chunk = cur.take(chunk_len)?;
        if chunk_id != b"MTrk" {
            // Unknown chunk types are skipped per the SMF spec.
            continue;
        }
        tracks_seen += 1;
        parse_track(chunk, &mut tempo_changes, &mut notes_ticks, &mut warnings)?;
    }
    if tracks_seen != ntrks {
        warnings.push(format!(
            "header declares {ntrks} tracks, found {tracks_seen}"
        ));
    }

    tempo_changes.sort_by_key(|&(tick, _)| tick);
    let clock = TempoMap::new(tempo_changes, tpqn);

    let mut events: Vec<NoteEvent> = Vec::with_capacity(notes_ticks.len());
    notes_ticks.sort_by_key(|&(on, off, pitch)| (on, off, pitch));
    for (on_tick, off_tick, pitch) in notes_ticks {
        let onset = clock.seconds_at(on_tick);
        let offset = clock.seconds_at(off_tick);
        if offset > onset {
            events.push(NoteEvent { onset, offset, pitch });
        } else {
            warnings.push(format!(
                "dropped zero-length note (pitch {pitch} at tick {on_tick})"
            ));
        }
    }
    Ok(ParsedMidi { events, warnings })
}

fn parse_track(
    data: &[u8],
    tempo_changes: &mut Vec<(u64, u32)>,
    notes: &mut Vec<(u64, u64, u8)>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    let mut cur = Cursor::new(data);
    let mut tick: u64 = 0;
    let mut running_status: Option<u8> = None;
    // Open note-ons per (channel, pitch), matched first-in-first-out.
    let mut open: Vec<Vec<u64>> = vec![Vec::new(); 16 * 128];
    let mut saw_end = false;

    while !cur.at_end() {
        tick += cur.vlq()?;
        let first = cur.u8()?;
        let status = if first & 0x80 != 0 {
            if first < 0xF0 {
                running_status = Some(first);
            }
            first
        } else {
            cur.back();
            running_status.ok_or_else(|| {
                Error::Midi(format!(
                    "data byte 0x{first:02X} with no running status at tick {tick}"
                ))
            })?
        };

        match status {
            0x80..=0x8F => {
                let pitch = cur.data_byte()?;
                let _vel = cur.data_byte()?;
                close_note(status & 0x0F, pitch, tick, &mut open, notes, warnings);
            }
            0x90..=0x9F => {
                let pitch = cur.data_byte()?;
                let vel = cur.data_byte()?;
                if vel == 0 {
                    close_note(status & 0x0F, pitch, tick, &mut open, notes, warnings);
                } else {
                    open[(status & 0x0F) as usize * 128 + pitch as usize].push(tick);
                }
            }
            0xA0..=0xBF | 0xE0..=0xEF => {
                cur.data_byte()?;
                cur.data_byte()?;
            }
            0xC0..=0xDF => {
                cur.data_byte()?;
            }
            0xFF => {
                let meta_type = cur.u8()?;
                let len = cur.vlq()? as usize;
                let body = cur.take(len)?;
                match meta_type {
                    0x51 => {
                        if len != 3 {
                            return Err(Error::Midi(format!(
                                "tempo meta event of length {len}"
                            )));
                        }
                        let us = u32::from(body[0]) << 16 | u32::from(body[1]) << 8
                            | u32::from(body[2]);
                        tempo_changes.push((tick, us));
                    }
                    0x2F => {
                        saw_end = true;
                        break;
                    }
                    _ => {}
                }
                running_status = None;
            }
            0xF0 | 0xF7 => {
                let len = cur.vlq()? as usize;
                cur.skip(len)?;
                running_status = None;
            }
            other => {
                return Err(Error::Midi(format!(
                    "unexpected status byte 0x{other:02X} at tick {tick}"
                )));
            }
        }
    }
    if !saw_end {
        warnings.push("track chunk without end-of-track meta event".into());
    }

    for (slot, on_ticks) in open.iter().enumerate() {
        for &on_tick in on_ticks {
            let pitch = (slot % 128) as u8;
            warnings.push(format!(
                "note-on (pitch {pitch}) with no note-off, closed at track end"
            ));
            notes.push((on_tick, tick, pitch));
        }
    }
    Ok(())
}

fn close_note(
    channel: u8,
    pitch: u8,
    tick: u64,
    open: &mut [Vec<u64>],
    notes: &mut Vec<(u64, u64, u8)>,
    warnings: &mut Vec<String>,
) {
    let queue = &mut open[channel as usize * 128 + pitch as usize];
    if queue.is_empty() {
        warnings.push(format!(
            "note-off (pitch {pitch}) with no open note at tick {tick}"
        ));
    } else {
        let on_tick = queue.remove(0);
        notes.push((on_tick, tick, pitch));
    }
}

/// Piecewise-constant tempo map; converts absolute ticks to seconds.
struct TempoMap {
    // (tick, seconds at that tick, us per quarter note from that tick on)
    segments: Vec<(u64, f64, u32)>,
    tpqn: f64,
}

impl TempoMap {
    fn new(changes: Vec<(u64, u32)>, tpqn: f64) -> Self {
        let mut segments = vec![(0u64, 0.0f64, DEFAULT_US_PER_QN)];
        for (tick, us) in changes {
            let sec = seconds_within(&segments, tick, tpqn);
            let last = segments.last_mut().unwrap();
            if last.0 == tick {
                last.2 = us;
            } else {
                segments.push((tick, sec, us));
            }
        }
        TempoMap { segments, tpqn }
    }

    fn seconds_at(&self, tick: u64) -> f64 {
        seconds_within(&self.segments, tick, self.tpqn)
    }
}

fn seconds_within(segments: &[(u64, f64, u32)], tick: u64, tpqn: f64) -> f64 {
    let idx = match segments.binary_search_by_key(&tick, |s| s.0) {
        Ok(i) => i,
        Err(i) => i - 1,
    };
    let (start_tick, start_sec, us) = segments[idx];
    start_sec + (tick - start_tick) as f64 * us as f64 / (tpqn * 1e6)
}

/// Export a roll as a minimal single-track format-0 file, the inverse of
/// ingestion: each run of active cells becomes one note at velocity 80.
///
/// Timing uses a 60 BPM tempo with ticks-per-quarter equal to the frame
/// rate, so one tick is exactly one frame. The rate must therefore be a
/// positive integer no larger than 32767.
pub fn write_midi(roll: &PianoRoll) -> Result<Vec<u8>> {
    let rate = roll.rate();
    if rate <= 0.0 || rate.fract() != 0.0 || rate > 32767.0 {
        return Err(Error::InvalidArg(format!(
            "SMF export requires an integer frame rate in [1, 32767], got {rate}"
        )));
    }
    let tpqn = rate as u16;

    // (tick, kind, pitch): note-offs (kind 0) sort before note-ons at a tick.
    let mut msgs: Vec<(u64, u8, u8)> = Vec::new();
    for (col, &pitch) in roll.pitch_map().iter().enumerate() {
        let mut run_start: Option<usize> = None;
        for t in 0..=roll.frames() {
            let active = t < roll.frames() && roll.get(t, col) != 0;
            match (run_start, active) {
                (None, true) => run_start = Some(t),
                (Some(s), false) => {
                    msgs.push((s as u64, 1, pitch));
                    msgs.push((t as u64, 0, pitch));
                    run_start = None;
                }
                _ => {}
            }
        }
    }
    msgs.sort_unstable();

    let mut track: Vec<u8> = Vec::new();
    // Tempo: 1e6 us per quarter note (60 BPM).
    track.extend_from_slice(&[0x00, 0xFF, 0x51, 0x03, 0x0F, 0x42, 0x40]);
    let mut prev_tick = 0u64;
    for (tick, kind, pitch) in msgs {
        push_vlq(&mut track, tick - prev_tick);
        prev_tick = tick;
        match kind {
            0 => track.extend_from_slice(&[0x80, pitch, 0x40]),
            _ => track.extend_from_slice(&[0x90, pitch, 0x50]),
        }
    }
    track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(track.len() + 22);
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&tpqn.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

fn push_vlq(out: &mut Vec<u8>, mut v: u64) {
    let mut stack = [0u8; 10];
    let mut n = 0;
    loop {
        stack[n] = (v & 0x7F) as u8;
        v >>= 7;
        n += 1;
        if v == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let byte = stack[i] | if i > 0 { 0x80 } else { 0 };
        out.push(byte);
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.data.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Midi(format!(
                "truncated file: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn skip(&mut self, n: usize) -> Result<()> {
        self.take(n).map(|_| ())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn back(&mut self) {
        self.pos -= 1;
    }

    fn data_byte(&mut self) -> Result<u8> {
        let b = self.u8()?;
        if b & 0x80 != 0 {
            return Err(Error::Midi(format!(
                "status byte 0x{b:02X} where a data byte was expected"
            )));
        }
        Ok(b)
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn vlq(&mut self) -> Result<u64> {
        let mut v: u64 = 0;
        for _ in 0..10 {
            let b = self.u8()?;
            v = (v << 7) | u64::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::Midi("variable-length quantity too long".into()))
    }
}
