//! Tables, figures and a Markdown summary built from analysis results.
//!
//! Rendering is pure: the same results give byte-identical artifacts, each
//! stamped with the run's manifest hash.

pub mod svg;
pub mod table;

use serde::{Deserialize, Serialize};

use crate::analysis::Results;
use crate::runner::{Measure, RateSeries};
use crate::stats::Aggregation;

pub use svg::{render_curves, render_heatmap, render_imum_chart, Zones};
pub use table::{
    render_cross_model_table, render_imum_table, render_item_mum_table, render_model_table,
    render_tradeoff_table, Table,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    #[serde(default)]
    pub zones: Option<Zones>,
}

/// One file of the report, with a path relative to the report directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub path: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    pub manifest: String,
    pub artifacts: Vec<Artifact>,
}

impl ReportBundle {
    pub fn get(&self, path: &str) -> Option<&str> {
        self.artifacts
            .iter()
            .find(|a| a.path == path)
            .map(|a| a.content.as_str())
    }

    /// Writes every artifact below `dir`, creating subdirectories.
    pub fn write_to(&self, dir: &std::path::Path) -> crate::Result<()> {
        for a in &self.artifacts {
            let p = dir.join(&a.path);
            if let Some(parent) = p.parent() {
                std::fs::create_dir_all(parent).map_err(|e| crate::Error::io(parent, e))?;
            }
            std::fs::write(&p, &a.content).map_err(|e| crate::Error::io(&p, e))?;
        }
        Ok(())
    }
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn push_table(out: &mut Vec<Artifact>, md: &mut String, t: &Table, manifest: &str) {
    let stem = file_safe(&t.name);
    out.push(Artifact {
        path: format!("tables/{stem}.csv"),
        content: t.to_csv(manifest),
    });
    out.push(Artifact {
        path: format!("tables/{stem}.txt"),
        content: t.to_text(manifest),
    });
    md.push_str(&format!("### {}\n\n{}\n", t.title, t.to_markdown()));
}

/// Builds every table and figure. Measures or evaluators absent from the
/// results get a placeholder section in `report.md` rather than an error.
pub fn render_report(results: &Results, series: &[RateSeries], cfg: &ReportConfig) -> ReportBundle {
    let manifest = results.manifest.as_str();
    let mut out = Vec::new();
    let mut md = format!(
        "# Modulation report\n\nmanifest: `{manifest}`  \ntau: {}\n\n",
        results.options.tau
    );
    let evals = results.evaluators();
    md.push_str(&format!(
        "Evaluators: {}\n\n",
        if evals.is_empty() { "none".to_string() } else { evals.join(", ") }
    ));

    for measure in Measure::ALL {
        md.push_str(&format!("## {measure}\n\n"));
        let present: Vec<&str> = evals
            .iter()
            .copied()
            .filter(|e| results.series.iter().any(|s| s.measure == measure && s.evaluator_id == *e))
            .collect();
        if present.is_empty() {
            md.push_str(&format!("_No {measure} results: run the {measure} task to fill this section._\n\n"));
            continue;
        }
        for e in &present {
            push_table(&mut out, &mut md, &render_model_table(results, measure, e), manifest);
        }
        if present.len() >= 2 {
            push_table(&mut out, &mut md, &render_cross_model_table(results, measure), manifest);
        } else {
            md.push_str("_Cross-model comparison needs at least two evaluators._\n\n");
        }
        push_table(&mut out, &mut md, &render_imum_table(results, measure), manifest);

        out.push(Artifact {
            path: format!("figures/heatmap_{measure}.svg"),
            content: render_heatmap(results, measure, manifest),
        });
        md.push_str(&format!("![adjusted R² {measure}](figures/heatmap_{measure}.svg)\n\n"));
        for s in series.iter().filter(|s| s.measure == measure) {
            let r = results.get(measure, &s.evaluator_id, s.strategy);
            out.push(Artifact {
                path: format!(
                    "figures/curves/{}_{measure}_{}.svg",
                    file_safe(&s.evaluator_id),
                    s.strategy.key()
                ),
                content: render_curves(s, r, results.options.tau, cfg.zones.as_ref(), manifest),
            });
        }
        for m in results
            .mum
            .iter()
            .filter(|m| m.measure == measure && m.aggregation == Aggregation::AcrossModels)
        {
            out.push(Artifact {
                path: format!("figures/imum_{measure}_{}.svg", m.strategy.key()),
                content: render_imum_chart(m, manifest),
            });
        }
    }

    md.push_str("## Per-item thresholds\n\n");
    if results.item_imums.is_empty() {
        md.push_str("_No per-item estimates available._\n\n");
    } else {
        push_table(&mut out, &mut md, &render_item_mum_table(results), manifest);
    }

    md.push_str("## Trade-off\n\n");
    if results.tradeoffs.is_empty() {
        md.push_str("_Needs both detection and understanding results for an evaluator._\n\n");
    } else {
        push_table(&mut out, &mut md, &render_tradeoff_table(results), manifest);
    }

    let failed: Vec<_> = results.series.iter().filter(|s| s.error.is_some()).collect();
    if !failed.is_empty() {
        md.push_str("## Unfitted series\n\n");
        for s in failed {
            md.push_str(&format!(
                "- {} {} {}: {}\n",
                s.evaluator_id,
                s.measure,
                s.strategy,
                s.error.as_deref().unwrap_or_default()
            ));
        }
        md.push('\n');
    }
    out.push(Artifact {
        path: "report.md".into(),
        content: md,
    });
    out.sort_by(|a, b| a.path.cmp(&b.path));
    ReportBundle {
        manifest: manifest.to_string(),
        artifacts: out,
    }
}
