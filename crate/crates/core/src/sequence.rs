//! Slope-constrained search for coherent trajectories through the
//! difference matrix.
//!
//! A trajectory starts at some row of the oldest column and advances
//! `slope * v_av` rows per column; its score is the mean of the cells it
//! visits. The search is exhaustive over every start row and every slope
//! on the configured grid.

use rayon::prelude::*;

use crate::matching::{Cell, DifferenceMatrix};
use crate::{round_half_up, Error, Execution, Result};

/// Allowed speed ratios between the query and reference traverses.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
    /// Reference frames per query frame at equal speed.
    pub v_av: f64,
}

impl Default for SlopeConfig {
    fn default() -> Self {
        Self {
            v_min: 0.84,
            v_max: 1.19,
            v_step: 0.04,
            v_av: 1.0,
        }
    }
}

impl SlopeConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.v_min > 0.0
            && self.v_min <= self.v_max
            && self.v_step > 0.0
            && self.v_av > 0.0
            && [self.v_min, self.v_max, self.v_step, self.v_av]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad slope configuration {self:?}")))
        }
    }

    /// `v_min, v_min + v_step, ...` up to and including `v_max`.
    pub fn slopes(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let s = self.v_min + k as f64 * self.v_step;
            if s > self.v_max + 1e-9 {
                break;
            }
            out.push(s);
            k += 1;
        }
        out
    }
}

/// Best trajectory found for the sequence ending at the newest column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceMatch {
    /// Query frame at the middle of the sequence.
    pub query_center_index: usize,
    /// Reference row the trajectory passes through at the middle column.
    pub reference_center_index: usize,
    /// Reference row in the oldest column.
    pub reference_start_index: usize,
    pub slope: f64,
    /// Mean normalized difference along the trajectory; infinite when no
    /// trajectory fits inside the matrix.
    pub score: f64,
    pub accepted: bool,
}

impl SequenceMatch {
    /// Same match re-thresholded at `s_m`.
    pub fn with_threshold(mut self, s_m: f64) -> Self {
        self.accepted = self.score < s_m;
        self
    }
}

#[inline]
fn row_at(start_row: usize, step: f64, t: usize) -> f64 {
    round_half_up(start_row as f64 + step * t as f64)
}

/// Mean score along the line `row(t) = round(start_row + slope * v_av * t)`
/// over every column of `matrix`.
///
/// `None` when the line leaves the matrix or touches padding.
pub fn trajectory_score(
    matrix: &DifferenceMatrix,
    start_row: usize,
    slope: f64,
    v_av: f64,
) -> Option<f64> {
    let n = matrix.width();
    if n == 0 || start_row >= matrix.column_len(0) {
        return None;
    }
    let step = slope * v_av;
    let mut sum = 0.0;
    for t in 0..n {
        let row = row_at(start_row, step, t);
        if !(0.0..matrix.height() as f64).contains(&row) {
            return None;
        }
        match matrix.cell(row as usize, t)? {
            Cell::Score(v) if !v.is_nan() => sum += v,
            _ => return None,
        }
    }
    Some(sum / n as f64)
}

#[derive(Clone, Copy)]
struct Candidate {
    score: f64,
    start: usize,
    slope_index: usize,
}

impl Candidate {
    /// Lower score wins; ties go to the lower start row, then lower slope.
    fn better_than(&self, other: &Candidate) -> bool {
        (self.score, self.start, self.slope_index) < (other.score, other.start, other.slope_index)
    }
}

fn pick(a: Option<Candidate>, b: Option<Candidate>) -> Option<Candidate> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.better_than(&x) { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn best_from_row(
    matrix: &DifferenceMatrix,
    start: usize,
    slopes: &[f64],
    v_av: f64,
) -> Option<Candidate> {
    slopes
        .iter()
        .enumerate()
        .filter_map(|(slope_index, &slope)| {
            trajectory_score(matrix, start, slope, v_av).map(|score| Candidate {
                score,
                start,
                slope_index,
            })
        })
        .fold(None, |best, c| pick(best, Some(c)))
}

/// Exhaustive argmin over start rows of the oldest column and the slope
/// grid of `cfg`. The match is accepted when its score is below `s_m`.
///
/// Errors with [`Error::NotReady`] until the matrix holds a full sequence.
pub fn best_match(
    matrix: &DifferenceMatrix,
    cfg: &SlopeConfig,
    s_m: f64,
    exec: Execution,
) -> Result<SequenceMatch> {
    if !matrix.is_full() {
        return Err(Error::NotReady {
            have: matrix.width(),
            need: matrix.window(),
        });
    }
    let slopes = cfg.slopes();
    let rows = matrix.column_len(0);
    let best = match exec {
        Execution::Serial => (0..rows)
            .map(|start| best_from_row(matrix, start, &slopes, cfg.v_av))
            .fold(None, pick),
        Execution::Parallel => (0..rows)
            .into_par_iter()
            .map(|start| best_from_row(matrix, start, &slopes, cfg.v_av))
            .reduce(|| None, pick),
    };
    let n = matrix.width();
    let mid = (n - 1) / 2;
    let query_center_index = matrix.oldest_frame().unwrap_or(0) + mid;
    Ok(match best {
        Some(c) => {
            let slope = slopes[c.slope_index];
            SequenceMatch {
                query_center_index,
                reference_center_index: row_at(c.start, slope * cfg.v_av, mid) as usize,
                reference_start_index: c.start,
                slope,
                score: c.score,
                accepted: c.score < s_m,
            }
        }
        None => SequenceMatch {
            query_center_index,
            reference_center_index: 0,
            reference_start_index: 0,
            slope: 0.0,
            score: f64::INFINITY,
            accepted: false,
        },
    })
}
