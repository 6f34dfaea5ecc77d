use serde_json::Value;

use crate::characterize::{CoarseStudyReport, SelfConsistencyReport};
use crate::sdelearn::TrainReport;

use super::files::major;
use super::DataioError;

/// Converts a JSON report to CSV: training reports give one row per epoch,
/// coarse-graining studies one row per time step, and self-consistency
/// reports one row per bin.
pub fn report_to_csv(json: &str) -> Result<String, DataioError> {
    let v: Value = serde_json::from_str(json)?;
    if let Some(ver) = v.get("format_version").and_then(|x| x.as_str()) {
        if major(ver) != "1" {
            return Err(DataioError::VersionMismatch { found: ver.into(), expected: "1.x".into() });
        }
    }
    if v.get("rows").is_some() {
        let r: CoarseStudyReport = serde_json::from_value(v)?;
        return Ok(r.to_csv());
    }
    if v.get("bins").is_some() && v.get("epsilon").is_some() {
        let r: SelfConsistencyReport = serde_json::from_value(v)?;
        return Ok(r.to_csv());
    }
    if v.get("epochs").is_some() {
        let r: TrainReport = serde_json::from_value(v)?;
        return Ok(train_csv(&r));
    }
    Err(DataioError::Invalid("unrecognized report document".into()))
}

pub fn train_csv(r: &TrainReport) -> String {
    let mut s = String::from("epoch,train_loss,val_loss\n");
    for e in &r.epochs {
        s.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_loss));
    }
    s
}
