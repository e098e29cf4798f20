use crate::error::{Error, Result};
use crate::nn::tensor::Tensor2;

/// Maps each input row to a destination group. Groups may be empty.
#[derive(Debug, Clone)]
pub struct GroupIndex {
    pub group_of: Vec<usize>,
    pub group_count: usize,
}

impl GroupIndex {
    pub fn new(group_of: Vec<usize>, group_count: usize) -> Result<Self> {
        if let Some(&bad) = group_of.iter().find(|&&g| g >= group_count) {
            return Err(Error::argument(format!(
                "group id {bad} out of range 0..{group_count}"
            )));
        }
        Ok(GroupIndex {
            group_of,
            group_count,
        })
    }
}

/// Per-group, per-column maximum of the input rows. Empty groups pool to 0.
/// The returned argmax record (usize::MAX for empty slots) routes gradients
/// to the winning row; ties go to the lowest row index.
pub fn max_aggregate(rows: &Tensor2, groups: &GroupIndex) -> Result<(Tensor2, Vec<usize>)> {
    if rows.rows != groups.group_of.len() {
        return Err(Error::argument(format!(
            "{} rows but {} group assignments",
            rows.rows,
            groups.group_of.len()
        )));
    }
    let cols = rows.cols;
    let mut pooled = Tensor2::zeros(groups.group_count, cols);
    let mut argmax = vec![usize::MAX; groups.group_count * cols];
    for (r, &g) in groups.group_of.iter().enumerate() {
        let row = rows.row(r);
        for (c, &v) in row.iter().enumerate() {
            let slot = g * cols + c;
            if argmax[slot] == usize::MAX || v > pooled.data[slot] {
                pooled.data[slot] = v;
                argmax[slot] = r;
            }
        }
    }
    // empty groups keep the 0 fill value
    Ok((pooled, argmax))
}

/// Route pooled gradients back to the argmax rows.
pub fn max_aggregate_backward(
    argmax: &[usize],
    grad_pooled: &Tensor2,
    row_count: usize,
) -> Result<Tensor2> {
    if argmax.len() != grad_pooled.data.len() {
        return Err(Error::argument("argmax length mismatch"));
    }
    let mut grad_rows = Tensor2::zeros(row_count, grad_pooled.cols);
    let cols = grad_pooled.cols;
    for (slot, &r) in argmax.iter().enumerate() {
        if r != usize::MAX {
            let c = slot % cols;
            grad_rows.data[r * cols + c] += grad_pooled.data[slot];
        }
    }
    Ok(grad_rows)
}
