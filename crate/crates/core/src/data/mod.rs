//! MIDI ingestion, piano rolls, and dataset assembly.

pub mod dataset;
pub mod midi;
pub mod roll;

pub use dataset::{build_dataset, Dataset};
pub use midi::{read_midi, write_midi, NoteEvent, ParsedMidi};
pub use roll::{prune_pitches, segment, to_piano_roll, PianoRoll};
