//! Result tables rendered as CSV, aligned text and Markdown.

use crate::analysis::{Results, SeriesResult};
use crate::runner::Measure;
use crate::stats::{majority_class, Aggregation};
use crate::strategy::Strategy;

pub const CENSORED_MARK: &str = "†";
pub const SIGNIFICANT_MARK: &str = "*";
pub const MISSING: &str = "missing";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem, e.g. `model_detection_mock-a`.
    pub name: String,
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

pub fn num(x: f64) -> String {
    format!("{x:.4}")
}

/// Understanding curves are stored with the same sign convention as
/// detection; tables show their steepness negated so that a falling
/// understanding curve reads with a negative k.
pub fn display_k(measure: Measure, k: f64) -> f64 {
    match measure {
        Measure::Detection => k,
        Measure::Understanding => -k,
    }
}

fn imum_cell(r: &SeriesResult) -> String {
    match &r.imum {
        Some(im) if im.censored => format!("{}{CENSORED_MARK}", num(im.value)),
        Some(im) => num(im.value),
        None => MISSING.into(),
    }
}

impl Table {
    pub fn to_csv(&self, manifest: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("header");
        for r in &self.rows {
            w.write_record(r).expect("row");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8");
        crate::runner::manifest_comment(manifest) + &body
    }

    pub fn to_text(&self, manifest: &str) -> String {
        let cols = self.headers.len();
        let width = |i: usize| {
            self.rows
                .iter()
                .map(|r| r.get(i).map_or(0, |c| c.chars().count()))
                .chain([self.headers[i].chars().count()])
                .max()
                .unwrap_or(0)
        };
        let widths: Vec<usize> = (0..cols).map(width).collect();
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = format!("{}\nmanifest: {manifest}\n\n", self.title);
        out.push_str(&line(&self.headers));
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        for n in &self.notes {
            out.push_str(&format!("\n{n}"));
        }
        if !self.notes.is_empty() {
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let esc = |s: &String| s.replace('|', "\\|");
        let mut out = format!("| {} |\n", self.headers.iter().map(esc).collect::<Vec<_>>().join(" | "));
        out.push_str(&format!("|{}\n", "---|".repeat(self.headers.len())));
        for r in &self.rows {
            out.push_str(&format!("| {} |\n", r.iter().map(esc).collect::<Vec<_>>().join(" | ")));
        }
        for n in &self.notes {
            out.push_str(&format!("\n{n}\n"));
        }
        out
    }
}

/// One row per strategy: k, IMUM, R², adj R², RMSE, fit class, ρ, p.
pub fn render_model_table(results: &Results, measure: Measure, evaluator_id: &str) -> Table {
    let headers = ["Strategy", "k", "IMUM", "R²", "adj R²", "RMSE", "Fit", "ρ", "p"]
        .map(String::from)
        .to_vec();
    let rows = Strategy::ALL
        .iter()
        .map(|&s| {
            let mut row = vec![s.label().to_string()];
            match results.get(measure, evaluator_id, s) {
                Some(r) if r.fit.is_some() => {
                    let f = r.fit.as_ref().unwrap();
                    let sp = r.spearman.as_ref();
                    row.extend([
                        num(display_k(measure, f.k)),
                        imum_cell(r),
                        num(f.r2),
                        num(f.adj_r2),
                        num(f.rmse),
                        f.fit_class.to_string(),
                        sp.map_or(MISSING.into(), |x| num(x.rho)),
                        sp.map_or(MISSING.into(), |x| num(x.p_value)),
                    ]);
                }
                _ => row.extend(std::iter::repeat_n(MISSING.to_string(), 8)),
            }
            row
        })
        .collect();
    Table {
        name: format!("model_{}_{}", measure, evaluator_id),
        title: format!("{evaluator_id}: {measure}, two-parameter logistic fit and Spearman rank correlation"),
        headers,
        rows,
        notes: vec![
            format!("{CENSORED_MARK} censored: the tau crossing lies outside the fit bounds, or no observed rate fell below tau."),
            format!(
                "tau = {}; {measure} k shown {}.",
                results.options.tau,
                if measure == Measure::Understanding { "with flipped sign" } else { "as fitted" }
            ),
        ],
    }
}

/// Strategies × evaluators grid of adjusted R² with significance marks,
/// the majority fit class and per-row/column significance counts.
pub fn render_cross_model_table(results: &Results, measure: Measure) -> Table {
    let evals = results.evaluators();
    let mut headers = vec!["Strategy".to_string()];
    headers.extend(evals.iter().map(|e| e.to_string()));
    headers.extend(["Maj.".to_string(), "Sig.".to_string()]);
    let mut col_sig = vec![0usize; evals.len()];
    let mut col_n = vec![0usize; evals.len()];
    let mut rows = Vec::new();
    for s in Strategy::ALL {
        let mut row = vec![s.label().to_string()];
        let mut classes = Vec::new();
        let (mut sig, mut n) = (0, 0);
        for (i, e) in evals.iter().enumerate() {
            match results.get(measure, e, s).and_then(|r| Some((r.fit.as_ref()?, r.spearman.as_ref()?))) {
                Some((f, sp)) => {
                    classes.push(f.fit_class);
                    n += 1;
                    col_n[i] += 1;
                    if sp.significant {
                        sig += 1;
                        col_sig[i] += 1;
                    }
                    let mark = if sp.significant { SIGNIFICANT_MARK } else { "" };
                    row.push(format!("{}{mark}", num(f.adj_r2)));
                }
                None => row.push(MISSING.into()),
            }
        }
        row.push(majority_class(&classes).map_or(MISSING.into(), |c| c.to_string()));
        row.push(format!("{sig}/{n}"));
        rows.push(row);
    }
    let mut total = vec!["Total".to_string()];
    total.extend(col_sig.iter().zip(&col_n).map(|(s, n)| format!("{s}/{n}")));
    total.push(String::new());
    total.push(format!("{}/{}", col_sig.iter().sum::<usize>(), col_n.iter().sum::<usize>()));
    rows.push(total);
    Table {
        name: format!("cross_model_{measure}"),
        title: format!("{measure}: adjusted R² with majority fit class and Spearman significance"),
        headers,
        rows,
        notes: vec![format!(
            "{SIGNIFICANT_MARK} Spearman p < 0.05. Majority ties resolve to the weaker class."
        )],
    }
}

/// Strategies × evaluators IMUM grid with the across-models MUM.
pub fn render_imum_table(results: &Results, measure: Measure) -> Table {
    let evals = results.evaluators();
    let mut headers = vec!["Strategy".to_string()];
    headers.extend(evals.iter().map(|e| e.to_string()));
    headers.push("MUM (median)".into());
    let rows = Strategy::ALL
        .iter()
        .map(|&s| {
            let mut row = vec![s.label().to_string()];
            for e in &evals {
                row.push(results.get(measure, e, s).map_or(MISSING.into(), imum_cell));
            }
            row.push(
                match results.mum_for(measure, s, Aggregation::AcrossModels).first() {
                    Some(m) if m.censored => format!("{}{CENSORED_MARK}", num(m.value)),
                    Some(m) => num(m.value),
                    None => MISSING.into(),
                },
            );
            row
        })
        .collect();
    Table {
        name: format!("imum_{measure}"),
        title: format!("{measure}: IMUM per evaluator (tau = {})", results.options.tau),
        headers,
        rows,
        notes: vec![format!("{CENSORED_MARK} censored at the fit bound.")],
    }
}

/// Across-items MUM (mean of per-item estimates) per evaluator.
pub fn render_item_mum_table(results: &Results) -> Table {
    let headers = ["Task", "Evaluator", "Strategy", "MUM (items)", "Items", "Censored"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    for m in results.mum.iter().filter(|m| m.aggregation == Aggregation::AcrossItems) {
        rows.push(vec![
            m.measure.to_string(),
            m.evaluator_id.clone().unwrap_or_default(),
            m.strategy.label().to_string(),
            if m.censored { format!("{}{CENSORED_MARK}", num(m.value)) } else { num(m.value) },
            m.inputs.len().to_string(),
            m.censored_count.to_string(),
        ]);
    }
    Table {
        name: "mum_items".into(),
        title: "Per-item thresholds averaged over items".into(),
        headers,
        rows,
        notes: vec![format!("{} item series excluded.", results.excluded_items.len())],
    }
}

/// Evader optimum `d*` per evaluator and strategy.
pub fn render_tradeoff_table(results: &Results) -> Table {
    let headers = ["Evaluator", "Strategy", "d*", "U·(1−D)", "Curves"]
        .map(String::from)
        .to_vec();
    let rows = results
        .tradeoffs
        .iter()
        .map(|t| {
            vec![
                t.evaluator_id.clone(),
                t.strategy.label().to_string(),
                format!("{:.2}", t.result.d_star),
                num(t.result.objective),
                if t.fitted { "fitted" } else { "interpolated" }.to_string(),
            ]
        })
        .collect();
    Table {
        name: "tradeoff".into(),
        title: "Detection–understanding trade-off optimum".into(),
        headers,
        rows,
        notes: vec![format!("grid step {}", results.options.tradeoff_step)],
    }
}
