//! Evaluation report: JSON schema (fixed key order) and text rendering with
//! the Ø / ± columns used throughout the result tables.

use crate::error::{Error, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Hyperparameters of the evaluated model, as reported.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperparameterInfo {
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svm_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hp_set: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lstm_hidden: Option<usize>,
}

/// Everything that pins down a run: seeds, schema versions, code version.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConfigFingerprint {
    pub crate_version: String,
    pub seed_folds: u64,
    pub seed_train: u64,
    pub folds: usize,
    pub feature_schema: String,
    pub feature_config: String,
    pub players: usize,
    pub clips: usize,
}

/// Cross-validation result for one experiment. Serialized with this exact
/// key order; `generated_at_unix` is the only field excluded from
/// byte-for-byte determinism comparisons.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub task: String,
    pub subset: String,
    pub feature: String,
    pub model: String,
    pub hyperparameters: HyperparameterInfo,
    pub per_fold_uar: Vec<f64>,
    pub uar_mean: f64,
    pub uar_std: f64,
    /// Row-major 2x2 counts per fold, class order fixed by the task.
    pub per_fold_confusion: Vec<Vec<u64>>,
    pub fold_test_counts: Vec<usize>,
    pub class_names: Vec<String>,
    pub fingerprint: ConfigFingerprint,
    pub generated_at_unix: u64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: EvalReport = serde_json::from_str(text)?;
        Ok(report)
    }

    /// Load and check the schema version.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let report = Self::from_json(&std::fs::read_to_string(path)?)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                expected: REPORT_SCHEMA_VERSION,
                got: report.schema_version,
                path: path.to_path_buf(),
            });
        }
        Ok(report)
    }

    /// The report with the timestamp zeroed, for determinism comparisons.
    pub fn without_timestamp(&self) -> Self {
        let mut copy = self.clone();
        copy.generated_at_unix = 0;
        copy
    }

    /// Per-fold table plus the Ø / ± summary line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "task={} subset={} feature={} model={}{}\n",
            self.task,
            self.subset,
            self.feature,
            self.model,
            self.hyperparameters
                .hp_set
                .as_ref()
                .map(|h| format!(" hp={h}"))
                .or_else(|| self.hyperparameters.c_value.map(|c| format!(" C={c:.0e}")))
                .unwrap_or_default()
        ));
        out.push_str("fold    UAR [%]    test clips\n");
        for (i, (uar, n)) in self.per_fold_uar.iter().zip(&self.fold_test_counts).enumerate() {
            out.push_str(&format!("{:<7} {:>7.1}    {n}\n", i + 1, 100.0 * uar));
        }
        out.push_str(&format!(
            "Ø {:.1} %  ± {:.1} %\n",
            100.0 * self.uar_mean,
            100.0 * self.uar_std
        ));
        out
    }
}

/// Merge reports into one comparison table, grouped by task, sorted by mean
/// UAR within each group, best row per (task, subset) marked with `*`.
pub fn render_comparison(reports: &[EvalReport]) -> String {
    let mut tasks: Vec<String> = Vec::new();
    for r in reports {
        if !tasks.contains(&r.task) {
            tasks.push(r.task.clone());
        }
    }

    let mut out = String::new();
    for task in &tasks {
        let mut rows: Vec<&EvalReport> = reports.iter().filter(|r| &r.task == task).collect();
        rows.sort_by(|a, b| {
            b.uar_mean
                .partial_cmp(&a.uar_mean)
                .unwrap()
                .then(a.uar_std.partial_cmp(&b.uar_std).unwrap())
        });
        let mut best: Vec<(String, f64)> = Vec::new();
        for r in &rows {
            let key = r.subset.clone();
            if !best.iter().any(|(s, _)| *s == key) {
                best.push((key, r.uar_mean));
            }
        }
        out.push_str(&format!("== task: {task} ==\n"));
        out.push_str(&format!(
            "{:<1} {:<10} {:<22} {:<22} {:>7} {:>7}\n",
            " ", "subset", "feature", "model/hp", "Ø [%]", "± [%]"
        ));
        for r in rows {
            let is_best = best
                .iter()
                .any(|(s, u)| *s == r.subset && (*u - r.uar_mean).abs() < 1e-15);
            let hp = r
                .hyperparameters
                .hp_set
                .clone()
                .or_else(|| r.hyperparameters.c_value.map(|c| format!("C={c:.0e}")))
                .unwrap_or_default();
            out.push_str(&format!(
                "{:<1} {:<10} {:<22} {:<22} {:>7.1} {:>7.1}\n",
                if is_best { "*" } else { " " },
                r.subset,
                r.feature,
                format!("{} {hp}", r.model),
                100.0 * r.uar_mean,
                100.0 * r.uar_std,
            ));
        }
        out.push('\n');
    }
    out
}

pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
