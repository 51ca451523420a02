//! Corpus-level analysis: which dataset characteristics drive the sufficient
//! size, and what size to recommend for a new dataset.

mod groups;
mod stepwise;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Characteristics;
use crate::error::{Error, Result};

pub use groups::{
    build_groups, lower_median, recommend, round_up_half_order, round_up_size, GroupCell, RecommendationTable,
};
pub use stepwise::{ols, stepwise_fit, t_test_p_value, OlsFit, SelectedFeature, Step, StepAction, StepwiseModel};

/// Candidate regressors, in tie-break order.
pub const CANDIDATE_FEATURES: [&str; 7] = ["N_CAT", "N_CONT", "N_F", "R_CAT", "N_C", "C_MIN", "I_C"];

pub const DEFAULT_P_ENTER: f64 = 0.05;
pub const DEFAULT_P_REMOVE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub id: String,
    pub characteristics: Characteristics,
    pub stss: u64,
}

impl CorpusRow {
    pub fn feature(&self, name: &str) -> Option<f64> {
        let c = &self.characteristics;
        Some(match name {
            "N_P" => c.N_P as f64,
            "N_F" => c.N_F as f64,
            "N_CAT" => c.N_CAT as f64,
            "N_CONT" => c.N_CONT as f64,
            "R_CAT" => c.R_CAT,
            "N_C" => c.N_C as f64,
            "C_MIN" => c.C_MIN,
            "I_C" => c.I_C,
            _ => return None,
        })
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Deserialize)]
struct CsvRow {
    id: String,
    N_P: usize,
    N_F: usize,
    N_CAT: usize,
    N_CONT: usize,
    R_CAT: f64,
    N_C: usize,
    C_MIN: f64,
    I_C: f64,
    STSS: u64,
}

/// Reads a corpus CSV with columns
/// `id,N_P,N_F,N_CAT,N_CONT,R_CAT,N_C,C_MIN,I_C,STSS`.
pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<CorpusRow> = Vec::new();
    for rec in rdr.deserialize::<CsvRow>() {
        let r = rec?;
        if rows.iter().any(|x| x.id == r.id) {
            return Err(Error::invalid(format!("duplicate corpus id {}", r.id)));
        }
        rows.push(CorpusRow {
            id: r.id,
            characteristics: Characteristics {
                N_P: r.N_P,
                N_F: r.N_F,
                N_CAT: r.N_CAT,
                N_CONT: r.N_CONT,
                R_CAT: r.R_CAT,
                N_C: r.N_C,
                C_MIN: r.C_MIN,
                I_C: r.I_C,
            },
            stss: r.STSS,
        });
    }
    Ok(rows)
}

pub fn load_corpus(path: &Path) -> Result<Vec<CorpusRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

/// Writes rows in the format read by [`parse_corpus`].
pub fn corpus_to_csv(rows: &[CorpusRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "N_P", "N_F", "N_CAT", "N_CONT", "R_CAT", "N_C", "C_MIN", "I_C", "STSS"])?;
    for r in rows {
        let c = &r.characteristics;
        w.write_record([
            r.id.clone(),
            c.N_P.to_string(),
            c.N_F.to_string(),
            c.N_CAT.to_string(),
            c.N_CONT.to_string(),
            format!("{:.3}", c.R_CAT),
            c.N_C.to_string(),
            format!("{:.3}", c.C_MIN),
            format!("{:.3}", c.I_C),
            r.stss.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const REFERENCE_CORPUS: &str = include_str!("../../../../corpus/paper_tables.csv");

/// Built-in 20-dataset reference corpus (characteristics and sizes).
pub fn reference_corpus() -> Vec<CorpusRow> {
    parse_corpus(REFERENCE_CORPUS).expect("embedded corpus is valid")
}

/// Recommendation table built from [`reference_corpus`] with median
/// thresholds.
pub fn default_table() -> RecommendationTable {
    build_groups(&reference_corpus(), None, None).expect("embedded corpus is non-empty")
}

/// Stepwise regression of STSS on the candidate characteristics.
pub fn corpus_stepwise(corpus: &[CorpusRow], p_enter: f64, p_remove: f64) -> Result<StepwiseModel> {
    let names: Vec<String> = CANDIDATE_FEATURES.iter().map(|s| s.to_string()).collect();
    let columns: Vec<Vec<f64>> = CANDIDATE_FEATURES
        .iter()
        .map(|f| corpus.iter().map(|r| r.feature(f).unwrap()).collect())
        .collect();
    let y: Vec<f64> = corpus.iter().map(|r| r.stss as f64).collect();
    stepwise_fit(&names, &columns, &y, p_enter, p_remove)
}
