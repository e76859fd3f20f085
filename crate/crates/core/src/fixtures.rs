//! The ferry case-study model and its causal factors, bundled with the
//! library so tests and the CLI can use them without a file path.

use crate::identification::CausalFactorRecord;
use crate::model::SystemModel;

pub const FERRY_MODEL_JSON: &str = include_str!("../fixtures/ferry.json");
pub const FERRY_FACTORS_JSON: &str = include_str!("../fixtures/ferry_factors.json");

pub fn ferry_model() -> SystemModel {
    SystemModel::from_json_str(FERRY_MODEL_JSON).expect("bundled ferry model parses")
}

pub fn ferry_factors() -> Vec<CausalFactorRecord> {
    serde_json::from_str(FERRY_FACTORS_JSON).expect("bundled causal factors parse")
}
