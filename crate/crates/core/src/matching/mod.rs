//! Template comparison, difference vectors and the difference matrix.

mod matrix;
mod store;

pub use matrix::{Cell, DifferenceMatrix};
pub use store::TemplateStore;

use rayon::prelude::*;

use crate::imaging::Template;
use crate::{Error, Execution, Result};

/// Default neighborhood half-width, in templates.
pub const DEFAULT_HALF_WINDOW: usize = 10;

/// Mean absolute difference between two equally sized templates.
pub fn sad_difference(a: &Template, b: &Template) -> Result<f64> {
    if a.rx() != b.rx() || a.ry() != b.ry() {
        return Err(Error::invalid(format!(
            "comparing {}x{} with {}x{}",
            a.rx(),
            a.ry(),
            b.rx(),
            b.ry()
        )));
    }
    Ok(sad_unchecked(a.values(), b.values()))
}

#[inline]
fn sad_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    sum / a.len() as f64
}

/// Difference scores of one query frame against a run of templates.
#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceVector {
    pub query_index: usize,
    pub scores: Vec<f64>,
}

impl DifferenceVector {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Scores `query` against every template in `store`, in store order.
///
/// Slot `k` is written independently of the others, so the parallel path
/// is bit-identical to the serial one.
pub fn difference_vector(
    store: &TemplateStore,
    query: &Template,
    exec: Execution,
) -> Result<DifferenceVector> {
    difference_vector_prefix(store, store.len(), query, exec)
}

/// Like [`difference_vector`] but only against the first `count` templates.
pub fn difference_vector_prefix(
    store: &TemplateStore,
    count: usize,
    query: &Template,
    exec: Execution,
) -> Result<DifferenceVector> {
    if !store.matches_geometry(query) {
        return Err(Error::invalid(format!(
            "query is {}x{}, store holds {}x{}",
            query.rx(),
            query.ry(),
            store.rx(),
            store.ry()
        )));
    }
    let templates = &store.templates()[..count.min(store.len())];
    let q = query.values();
    let scores = match exec {
        Execution::Serial => templates
            .iter()
            .map(|t| sad_unchecked(t.values(), q))
            .collect(),
        Execution::Parallel => templates
            .par_iter()
            .map(|t| sad_unchecked(t.values(), q))
            .collect(),
    };
    Ok(DifferenceVector {
        query_index: query.source_index(),
        scores,
    })
}

/// Local contrast enhancement: z-scores every element against the elements
/// within `half_window` places of it.
///
/// Windows are clipped at the ends of the vector; the standard deviation is
/// the sample one (divisor window size minus one). An element whose window
/// holds a single distinct value maps to 0. Vectors shorter than two
/// elements come back unchanged.
pub fn neighborhood_normalize(
    vec: &DifferenceVector,
    half_window: usize,
) -> Result<DifferenceVector> {
    if half_window == 0 {
        return Err(Error::invalid(
            "neighborhood half-window must be at least 1",
        ));
    }
    if vec.len() < 2 {
        return Ok(vec.clone());
    }
    Ok(DifferenceVector {
        query_index: vec.query_index,
        scores: normalize_scores(&vec.scores, half_window),
    })
}

pub(crate) fn normalize_scores(d: &[f64], half_window: usize) -> Vec<f64> {
    let len = d.len();
    (0..len)
        .map(|k| {
            let lo = k.saturating_sub(half_window);
            let hi = (k + half_window).min(len - 1);
            let window = &d[lo..=hi];
            let first = window[0];
            if window.iter().all(|&v| v == first) {
                return 0.0;
            }
            let size = window.len() as f64;
            let mean = window.iter().sum::<f64>() / size;
            let var = window.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (size - 1.0);
            (d[k] - mean) / var.sqrt()
        })
        .collect()
}
