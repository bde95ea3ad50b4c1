//! Windowed training sequences assembled from pruned rolls.

use crate::data::roll::{segment, PianoRoll};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Fixed-shape training windows with per-window song labels.
///
/// When `reverse_input` is on, the encoder consumes each window's frames in
/// reverse order while the decoder target keeps the original order; the
/// reversed copies are materialized once here.
#[derive(Clone, Debug)]
pub struct Dataset {
    targets: Vec<Matrix>,
    reversed: Option<Vec<Matrix>>,
    labels: Vec<String>,
    window_len: usize,
    dims: usize,
    rate: f64,
    pitch_map: Vec<u8>,
    reverse_input: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn window_len(&self) -> usize {
        self.window_len
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

    pub fn reverse_input(&self) -> bool {
        self.reverse_input
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// (encoder view, decoder target) for sequence `i`.
    pub fn views(&self, i: usize) -> (&Matrix, &Matrix) {
        let target = &self.targets[i];
        match &self.reversed {
            Some(rev) => (&rev[i], target),
            None => (target, target),
        }
    }

    pub fn target(&self, i: usize) -> &Matrix {
        &self.targets[i]
    }
}

fn window_to_matrix(w: &PianoRoll) -> Matrix {
    Matrix::from_fn(w.frames(), w.dims(), |t, d| f64::from(w.get(t, d)))
}

fn reverse_frames(m: &Matrix) -> Matrix {
    let t = m.rows();
    Matrix::from_fn(t, m.cols(), |r, c| m.get(t - 1 - r, c))
}

/// Window every roll and concatenate, tagging each window with its song
/// label. `limit` caps the number of windows taken per roll.
pub fn build_dataset(
    rolls: &[(PianoRoll, String)],
    window: usize,
    stride: usize,
    limit: Option<usize>,
    reverse_input: bool,
) -> Result<Dataset> {
    let (first, _) = rolls
        .first()
        .ok_or_else(|| Error::EmptyData("no rolls to build a dataset from".into()))?;
    let dims = first.dims();
    let rate = first.rate();
    let pitch_map = first.pitch_map().to_vec();
    for (roll, label) in rolls {
        if roll.dims() != dims || roll.pitch_map() != pitch_map.as_slice() {
            return Err(Error::Shape(format!(
                "roll {label:?} has a different pitch dimension; prune rolls together first"
            )));
        }
    }

    let mut targets = Vec::new();
    let mut labels = Vec::new();
    for (roll, label) in rolls {
        for w in segment(roll, window, stride, limit)? {
            targets.push(window_to_matrix(&w));
            labels.push(label.clone());
        }
    }
    if targets.is_empty() {
        return Err(Error::EmptyData(format!(
            "no complete windows of {window} frames in any roll"
        )));
    }
    let reversed = reverse_input.then(|| targets.iter().map(reverse_frames).collect());
    Ok(Dataset {
        targets,
        reversed,
        labels,
        window_len: window,
        dims,
        rate,
        pitch_map,
        reverse_input,
    })
}
