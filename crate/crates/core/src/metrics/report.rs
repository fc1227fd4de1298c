use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mcs_score, ted, tk_score, MetricConfig};
use crate::tree::AttributeTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub sample_id: String,
    pub ted: usize,
    pub mcs: f64,
    pub tk: f64,
}

/// Aggregate means for one explanation method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub method: String,
    pub samples: usize,
    pub ted: f64,
    pub mcs: f64,
    pub tk: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mscd: Option<f64>,
}

/// Per-sample plausibility scores of one method against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub rows: Vec<MetricRow>,
    pub mscd: Option<f64>,
}

impl MetricReport {
    /// Scores every `(sample_id, predicted, ground_truth)` triple. Rows keep
    /// the input order.
    pub fn evaluate(
        method: &str,
        pairs: &[(String, &AttributeTree, &AttributeTree)],
        cfg: &MetricConfig,
    ) -> MetricReport {
        let rows = pairs
            .par_iter()
            .map(|(id, pred, gt)| MetricRow {
                sample_id: id.clone(),
                ted: ted(pred, gt),
                mcs: mcs_score(pred, gt),
                tk: tk_score(pred, gt, cfg),
            })
            .collect();
        MetricReport {
            method: method.to_string(),
            rows,
            mscd: None,
        }
    }

    pub fn with_mscd(mut self, mscd: f64) -> MetricReport {
        self.mscd = Some(mscd);
        self
    }

    pub fn summary(&self) -> MetricSummary {
        let n = self.rows.len();
        let mean = |f: &dyn Fn(&MetricRow) -> f64| {
            if n == 0 {
                0.0
            } else {
                self.rows.iter().map(f).sum::<f64>() / n as f64
            }
        };
        MetricSummary {
            method: self.method.clone(),
            samples: n,
            ted: mean(&|r| r.ted as f64),
            mcs: mean(&|r| r.mcs),
            tk: mean(&|r| r.tk),
            mscd: self.mscd,
        }
    }

    /// CSV with header `sample_id,ted,mcs,tk`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sample_id,ted,mcs,tk\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_field(&r.sample_id),
                r.ted,
                r.mcs,
                r.tk
            ));
        }
        out
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_tree;

    #[test]
    fn identical_predictions_score_perfectly() {
        let a = parse_tree(r#"{"name":"A","children":[{"name":"B"},{"name":"C"}]}"#).unwrap();
        let b = parse_tree(r#"{"name":"A","children":[{"name":"B"}]}"#).unwrap();
        let report = MetricReport::evaluate(
            "lvx",
            &[("s1".into(), &a, &a), ("s,2".into(), &b, &b)],
            &MetricConfig::default(),
        );
        let s = report.summary();
        assert_eq!((s.ted, s.mcs, s.tk), (0.0, 100.0, 100.0));
        let csv = report.to_csv();
        assert_eq!(
            csv,
            "sample_id,ted,mcs,tk\ns1,0,100,100\n\"s,2\",0,100,100\n"
        );
    }

    #[test]
    fn summary_is_row_mean() {
        let a = parse_tree(r#"{"name":"A","children":[{"name":"B"},{"name":"C"}]}"#).unwrap();
        let b = parse_tree(r#"{"name":"A","children":[{"name":"B"}]}"#).unwrap();
        let report = MetricReport::evaluate(
            "x",
            &[("1".into(), &a, &b), ("2".into(), &b, &b)],
            &MetricConfig::default(),
        );
        let s = report.summary();
        let rows = &report.rows;
        assert!((s.mcs - (rows[0].mcs + rows[1].mcs) / 2.0).abs() < 1e-9);
        assert!((s.ted - 0.5).abs() < 1e-12);
    }
}
