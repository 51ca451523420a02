//! Class-count by feature-count grouping and rounded size recommendations.

use serde::{Deserialize, Serialize};

use crate::analysis::CorpusRow;
use crate::error::{Error, Result};

/// Smallest value of the form `10^M` or `3 * 10^M` (M any integer) that is
/// at least `x`.
pub fn round_up_half_order(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid(format!("cannot round {x}: must be positive and finite")));
    }
    let m = x.log10().floor() as i32;
    let mut best = f64::INFINITY;
    for e in m - 1..=m + 1 {
        for mult in [1.0, 3.0] {
            // Division keeps negative powers correctly rounded.
            let v = if e >= 0 {
                mult * 10f64.powi(e)
            } else {
                mult / 10f64.powi(-e)
            };
            if v >= x && v < best {
                best = v;
            }
        }
    }
    Ok(best)
}

/// Integer form of [`round_up_half_order`] for sizes.
pub fn round_up_size(x: u64) -> Result<u64> {
    Ok(round_up_half_order(x as f64)? as u64)
}

/// Lower median: element `(n - 1) / 2` of the sorted values.
pub fn lower_median(values: &[usize]) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    Some(v[(v.len() - 1) / 2])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCell {
    /// `N_C > class_threshold`.
    pub many_classes: bool,
    /// `N_F > feature_threshold`.
    pub many_features: bool,
    pub members: Vec<String>,
    pub max_stss: Option<u64>,
    pub recommended: Option<u64>,
}

impl GroupCell {
    pub fn count(&self) -> usize {
        self.members.len()
    }
}

/// 2 x 2 grouping of a corpus. Cells are ordered
/// (few classes, few features), (few, many), (many, few), (many, many).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationTable {
    pub class_threshold: usize,
    pub feature_threshold: usize,
    pub cells: Vec<GroupCell>,
}

fn cell_index(many_classes: bool, many_features: bool) -> usize {
    2 * usize::from(many_classes) + usize::from(many_features)
}

/// Groups datasets by `N_C <= class_threshold` and `N_F <= feature_threshold`.
/// Missing thresholds default to the corpus lower medians.
pub fn build_groups(
    corpus: &[CorpusRow],
    class_threshold: Option<usize>,
    feature_threshold: Option<usize>,
) -> Result<RecommendationTable> {
    if corpus.is_empty() {
        return Err(Error::invalid("empty corpus"));
    }
    let ct = match class_threshold {
        Some(t) => t,
        None => lower_median(&corpus.iter().map(|r| r.characteristics.N_C).collect::<Vec<_>>()).unwrap(),
    };
    let ft = match feature_threshold {
        Some(t) => t,
        None => lower_median(&corpus.iter().map(|r| r.characteristics.N_F).collect::<Vec<_>>()).unwrap(),
    };
    let mut cells: Vec<GroupCell> = [(false, false), (false, true), (true, false), (true, true)]
        .iter()
        .map(|&(c, f)| GroupCell {
            many_classes: c,
            many_features: f,
            members: Vec::new(),
            max_stss: None,
            recommended: None,
        })
        .collect();
    for row in corpus {
        let cell = &mut cells[cell_index(row.characteristics.N_C > ct, row.characteristics.N_F > ft)];
        cell.members.push(row.id.clone());
        cell.max_stss = Some(cell.max_stss.map_or(row.stss, |m| m.max(row.stss)));
    }
    for cell in &mut cells {
        cell.recommended = cell.max_stss.map(|m| round_up_size(m.max(1))).transpose()?;
    }
    Ok(RecommendationTable {
        class_threshold: ct,
        feature_threshold: ft,
        cells,
    })
}

impl RecommendationTable {
    pub fn cell(&self, n_classes: usize, n_features: usize) -> &GroupCell {
        &self.cells[cell_index(n_classes > self.class_threshold, n_features > self.feature_threshold)]
    }
}

/// Recommended training set size for a dataset with the given class and
/// feature counts.
pub fn recommend(n_classes: usize, n_features: usize, table: &RecommendationTable) -> Result<u64> {
    if n_classes < 2 || n_features < 1 {
        return Err(Error::invalid("need at least 2 classes and 1 feature"));
    }
    table.cell(n_classes, n_features).recommended.ok_or_else(|| {
        Error::invalid(format!(
            "no recommendation: no corpus dataset has {} {} classes and {} {} features",
            if n_classes > table.class_threshold { ">" } else { "<=" },
            table.class_threshold,
            if n_features > table.feature_threshold { ">" } else { "<=" },
            table.feature_threshold,
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_examples() {
        assert_eq!(round_up_half_order(2044.0).unwrap(), 3000.0);
        assert_eq!(round_up_half_order(2851.0).unwrap(), 3000.0);
        assert_eq!(round_up_half_order(18944.0).unwrap(), 30000.0);
        assert_eq!(round_up_half_order(7598.0).unwrap(), 10000.0);
        assert_eq!(round_up_half_order(1000.0).unwrap(), 1000.0);
        assert_eq!(round_up_half_order(300.0).unwrap(), 300.0);
        assert_eq!(round_up_half_order(301.0).unwrap(), 1000.0);
        assert_eq!(round_up_half_order(0.02).unwrap(), 0.03);
        assert_eq!(round_up_half_order(0.001).unwrap(), 0.001);
        assert!(round_up_half_order(0.0).is_err());
        assert!(round_up_half_order(-3.0).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(lower_median(&[2, 2, 3, 4]), Some(2));
        assert_eq!(lower_median(&[5, 1, 3]), Some(3));
        assert_eq!(lower_median(&[]), None);
    }
}
