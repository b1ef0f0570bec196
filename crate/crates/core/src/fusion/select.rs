use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionResult {
    pub selected_frame_id: usize,
    /// Row of the candidate matrix that was selected.
    pub selected_row: usize,
    pub latent: Tensor,
    /// `(frame_id, mse)` for every candidate, ascending by distance then id.
    pub ranking: Vec<(usize, f64)>,
}

/// Mean squared difference, summed left to right.
pub(crate) fn row_mse(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc / a.len() as f64
}

/// Picks the candidate row with minimal MSE to `o`; equal distances go to
/// the smaller frame id.
pub fn select_thumbnail(o: &Tensor, candidates: &Tensor, frame_ids: &[usize]) -> Result<SelectionResult> {
    if candidates.ndim() != 2 || o.ndim() != 1 || candidates.shape()[1] != o.numel() {
        return Err(Error::dim("select_thumbnail", o.shape(), candidates.shape()));
    }
    let rows = candidates.shape()[0];
    if rows == 0 {
        return Err(Error::Input("no candidate frames".into()));
    }
    if frame_ids.len() != rows {
        return Err(Error::Input(format!(
            "{} frame ids for {rows} candidate rows",
            frame_ids.len()
        )));
    }
    let d = o.numel();
    let mut order: Vec<(usize, usize, f64)> = candidates
        .data()
        .chunks_exact(d)
        .enumerate()
        .map(|(r, row)| (frame_ids[r], r, row_mse(row, o.data())))
        .collect();
    order.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    let (selected_frame_id, selected_row, _) = order[0];
    Ok(SelectionResult {
        selected_frame_id,
        selected_row,
        latent: o.clone(),
        ranking: order.into_iter().map(|(id, _, e)| (id, e)).collect(),
    })
}
