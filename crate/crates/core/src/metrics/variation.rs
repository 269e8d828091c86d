use crate::error::{Error, Result};

/// `V_E(p) = 100 / |S| * sum_{i in S} |y_i - y_{i-1}|`, where `y_{i-1}` is
/// the prediction at the previous matrix row. `None` when `S` is empty.
pub fn variation_ve(predictions: &[f64], acute: &[usize]) -> Result<Option<f64>> {
    if acute.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for &i in acute {
        if i == 0 || i >= predictions.len() {
            return Err(Error::argument(format!(
                "acute index {i} outside 1..{}",
                predictions.len()
            )));
        }
        total += (predictions[i] - predictions[i - 1]).abs();
    }
    Ok(Some(100.0 * total / acute.len() as f64))
}

/// Mean over the episodes that had at least one acute row.
pub fn mean_variation(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariationReport {
    pub definition: String,
    /// `(episode_id, V_E(p))` for episodes with a nonempty acute set.
    pub per_episode: Vec<(String, f64)>,
    pub n_p: usize,
    pub v_bar: Option<f64>,
}

/// Builds a report from `(episode_id, predictions, acute rows)` triples.
pub fn variation_report<'a>(
    definition: &str,
    episodes: impl IntoIterator<Item = (&'a str, &'a [f64], &'a [usize])>,
) -> Result<VariationReport> {
    let mut per_episode = Vec::new();
    for (id, y, s) in episodes {
        if let Some(v) = variation_ve(y, s)? {
            per_episode.push((id.to_string(), v));
        }
    }
    let values: Vec<f64> = per_episode.iter().map(|(_, v)| *v).collect();
    Ok(VariationReport {
        definition: definition.to_string(),
        n_p: per_episode.len(),
        v_bar: mean_variation(&values),
        per_episode,
    })
}
