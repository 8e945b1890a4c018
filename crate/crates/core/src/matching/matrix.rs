use std::collections::VecDeque;

use super::DifferenceVector;
use crate::{Error, Result};

/// One entry of a padded difference matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Score(f64),
    /// Filler below the end of a column that is shorter than the newest.
    Pad,
}

/// The `window` most recent normalized difference vectors, oldest first.
///
/// Columns keep their own length; every column is treated as padded with
/// [`Cell::Pad`] out to the length of the newest one.
#[derive(Clone, Debug)]
pub struct DifferenceMatrix {
    window: usize,
    columns: VecDeque<DifferenceVector>,
}

impl DifferenceMatrix {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        Ok(Self {
            window,
            columns: VecDeque::with_capacity(window),
        })
    }

    /// Appends the vector of the next consecutive frame, evicting the oldest
    /// column once `window` are held.
    pub fn push_column(&mut self, vec: DifferenceVector) -> Result<()> {
        if let Some(last) = self.columns.back() {
            if vec.query_index != last.query_index + 1 {
                return Err(Error::invalid(format!(
                    "frame {} pushed after frame {}",
                    vec.query_index, last.query_index
                )));
            }
            if vec.len() < last.len() {
                return Err(Error::invalid(format!(
                    "column of length {} is shorter than its predecessor ({})",
                    vec.len(),
                    last.len()
                )));
            }
        }
        if self.columns.len() == self.window {
            self.columns.pop_front();
        }
        self.columns.push_back(vec);
        Ok(())
    }

    /// Sequence length the matrix fills up to.
    pub fn window(&self) -> usize {
        self.window
    }

    /// Number of columns currently held.
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn is_full(&self) -> bool {
        self.columns.len() == self.window
    }

    /// Padded column height, the length of the newest column.
    pub fn height(&self) -> usize {
        self.columns.back().map_or(0, |c| c.len())
    }

    /// Frame index of the oldest column.
    pub fn oldest_frame(&self) -> Option<usize> {
        self.columns.front().map(|c| c.query_index)
    }

    pub fn column_len(&self, col: usize) -> usize {
        self.columns[col].len()
    }

    /// `None` outside the padded rectangle.
    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> Option<Cell> {
        let column = self.columns.get(col)?;
        if row >= self.height() {
            return None;
        }
        Some(match column.scores.get(row) {
            Some(&v) => Cell::Score(v),
            None => Cell::Pad,
        })
    }

    /// Score at `(row, col)` when it is neither pad nor out of bounds.
    #[inline]
    pub fn score(&self, row: usize, col: usize) -> Option<f64> {
        self.columns.get(col)?.scores.get(row).copied()
    }

    pub fn padded_column(&self, col: usize) -> Vec<Cell> {
        (0..self.height())
            .map(|r| self.cell(r, col).unwrap_or(Cell::Pad))
            .collect()
    }

    /// Builds a full matrix directly from columns, oldest first, starting at
    /// frame `first_frame`. Mostly useful for tests and offline analysis.
    pub fn from_columns(first_frame: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        let mut m = Self::new(columns.len().max(1))?;
        for (i, scores) in columns.into_iter().enumerate() {
            m.push_column(DifferenceVector {
                query_index: first_frame + i,
                scores,
            })?;
        }
        Ok(m)
    }
}
