//! Cross-dataset generalization: train on one dataset, test on the others.

use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizationRow {
    pub dataset: String,
    pub self_score: f64,
    /// Row mean without the diagonal; `None` with a single dataset.
    pub mean_others: Option<f64>,
    /// `(self - mean_others) / self`.
    pub drop: Option<f64>,
}

/// `scores[i][j]` is the score of the model trained on dataset `i` and
/// tested on dataset `j`.
pub fn generalization_table(names: &[String], scores: &[Vec<f64>]) -> Result<Vec<GeneralizationRow>> {
    let n = scores.len();
    if names.len() != n {
        return Err(EvalError::NotSquare {
            rows: n,
            cols: names.len(),
        });
    }
    if let Some(row) = scores.iter().find(|r| r.len() != n) {
        return Err(EvalError::NotSquare { rows: n, cols: row.len() });
    }
    Ok(names
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(i, (name, row))| {
            let self_score = row[i];
            let mean_others = (n > 1).then(|| row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum::<f64>() / (n - 1) as f64);
            GeneralizationRow {
                dataset: name.clone(),
                self_score,
                mean_others,
                drop: mean_others.map(|m| (self_score - m) / self_score),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_matrix_has_no_drop() {
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let rows = generalization_table(&names, &vec![vec![0.7; 3]; 3]).unwrap();
        assert!(rows.iter().all(|r| r.drop == Some(0.0)));
    }

    #[test]
    fn single_dataset_is_undefined() {
        let rows = generalization_table(&["a".into()], &[vec![0.8]]).unwrap();
        assert_eq!(rows[0].drop, None);
        assert!(generalization_table(&["a".into(), "b".into()], &[vec![0.8, 0.1], vec![0.2]]).is_err());
    }
}
