//! The pipeline commands.
//!
//! Output directory layout:
//!
//! ```text
//! <out>/manifest.json
//! <out>/rankings.jsonl                 validation and importance rankings
//! <out>/dataset.jsonl                  modulated items
//! <out>/build_trials.jsonl             raw ranking-evaluator trials
//! <out>/cache/                         response cache (unless cache_dir is set)
//! <out>/runs/<evaluator>/<task>.csv    rate series
//! <out>/runs/<evaluator>/<task>.outcomes.jsonl
//! <out>/runs/<evaluator>/<task>.trials.jsonl
//! <out>/population/series.csv          simulated population, if configured
//! <out>/population/sweep.csv
//! <out>/fit/results.json, fit/fits.csv
//! <out>/report/                        tables, figures, report.md
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mumkit_core::analysis::{analyze, AnalysisOptions, Results};
use mumkit_core::corpus::{load_corpus, rank_importance, save_rankings, validate_baseline, RankingRecord};
use mumkit_core::evaluator::cache::ResponseCache;
use mumkit_core::evaluator::prompt::PromptTemplates;
use mumkit_core::evaluator::remote::RemoteBackend;
use mumkit_core::evaluator::Backend;
use mumkit_core::mockpop::{simulate_population_detection, simulate_population_understanding, sweep_common_ground, sweep_to_csv};
use mumkit_core::modulation::{audit_meaning, load_audit};
use mumkit_core::report::{render_report, ReportConfig};
use mumkit_core::runner::{
    manifest_comment, read_series_csv, run_detection, run_understanding, series_to_csv, ItemOutcome, RunOptions,
    RunResult,
};
use mumkit_core::text::tokenize;
use mumkit_core::{
    build_dataset, Corpus, Evaluator, EvaluatorConfig, Lexicon, Measure, MockBackend, ModulatedDataset, RateSeries,
    TriggerLexicon, Validation,
};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::lock::DirLock;
use crate::manifest::{check_artifact, check_hash, EvaluatorEntry, Manifest, MANIFEST_FILE, MANIFEST_FORMAT};

/// Which measures `run` and `replay` execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TaskSel {
    Detect,
    Understand,
    #[default]
    Both,
}

impl TaskSel {
    pub fn measures(self) -> Vec<Measure> {
        match self {
            TaskSel::Detect => vec![Measure::Detection],
            TaskSel::Understand => vec![Measure::Understanding],
            TaskSel::Both => Measure::ALL.to_vec(),
        }
    }
}

impl std::str::FromStr for TaskSel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "detect" | "detection" => Ok(TaskSel::Detect),
            "understand" | "understanding" => Ok(TaskSel::Understand),
            "both" => Ok(TaskSel::Both),
            _ => Err(format!("unknown task `{s}` (detect, understand, both)")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub evaluators: Vec<String>,
    pub task: TaskSel,
    pub offline: bool,
    pub force: bool,
}

/// Result of a successful (or partially successful) command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Summary {
    pub lines: Vec<String>,
    /// Evaluators that failed; non-empty means exit code 2.
    pub failed: Vec<String>,
}

impl Summary {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            failed: Vec::new(),
        }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }
}

/// Everything loaded once per command.
pub struct Context {
    pub cfg: RunConfig,
    pub flags: Flags,
    pub out: PathBuf,
    pub corpus: Corpus,
    pub lexicon: Arc<Lexicon>,
    pub manifest: Manifest,
    cache: Arc<ResponseCache>,
}

fn write(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p).map_err(|e| CliError::usage(format!("cannot create {}: {e}", p.display())))?;
    }
    std::fs::write(path, content).map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn jsonl<T: serde::Serialize>(rows: &[T], manifest: &str) -> String {
    let mut out = manifest_comment(manifest);
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("row serializes"));
        out.push('\n');
    }
    out
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path, src: &str) -> Result<Vec<T>, CliError> {
    src.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CliError::usage(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

fn triggers_path(cfg: &RunConfig, e: &EvaluatorConfig) -> Option<PathBuf> {
    e.triggers
        .as_ref()
        .map(|t| cfg.resolve(Path::new(t)))
        .or_else(|| cfg.triggers.as_ref().map(|t| cfg.resolve(t)))
}

fn load_triggers(cfg: &RunConfig, e: &EvaluatorConfig) -> Result<Option<TriggerLexicon>, CliError> {
    if !e.is_mock() {
        return Ok(None);
    }
    let p = triggers_path(cfg, e).ok_or_else(|| CliError::usage(format!("mock evaluator `{}` has no triggers", e.id)))?;
    Ok(Some(TriggerLexicon::load(&p)?))
}

fn file_hash(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(mumkit_core::hashing::sha256_hex(bytes)[..16].to_string())
}

impl Context {
    /// Validates the config, loads the inputs and computes the manifest.
    pub fn new(cfg: RunConfig, flags: Flags) -> Result<Self, CliError> {
        cfg.validate()?;
        let corpus = load_corpus(&cfg.resolve(&cfg.corpus))?;
        let lexicon = Arc::new(Lexicon::load(&cfg.resolve(&cfg.lexicon))?);
        let mut evaluators = Vec::new();
        for e in cfg.evaluators() {
            let prompts_hash = PromptTemplates::load(&cfg.base_dir, &e.prompts)?.hash();
            let triggers_version = load_triggers(&cfg, &e)?.map(|t| t.version());
            evaluators.push(EvaluatorEntry {
                config: e,
                prompts_hash,
                triggers_version,
            });
        }
        let population = cfg.population.as_ref().map(|p| {
            serde_json::to_string(&(p, &cfg.sweep)).expect("population serializes")
        });
        let manifest = Manifest {
            format: MANIFEST_FORMAT.to_string(),
            hash: String::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            corpus_version: corpus.content_version(),
            lexicon_version: lexicon.version().to_string(),
            seed: cfg.seed,
            similarity_threshold: cfg.similarity_threshold,
            audit_drop: cfg.audit_drop,
            audit_hash: cfg.audit.as_ref().map(|a| file_hash(&cfg.resolve(a))).transpose()?,
            degraded_fraction: cfg.degraded_fraction,
            rankings_evaluator: cfg.ranking_evaluator()?.id,
            evaluators,
            population,
        }
        .seal();
        let out = cfg.out_dir();
        let cache = Arc::new(ResponseCache::on_disk(cfg.cache_dir())?);
        for id in &flags.evaluators {
            if !cfg.evaluators.iter().any(|e| &e.id == id) {
                return Err(CliError::usage(format!("unknown evaluator `{id}`")));
            }
        }
        let ctx = Self {
            cfg,
            flags,
            out,
            corpus,
            lexicon,
            manifest,
            cache,
        };
        if ctx.flags.offline {
            if let Some(e) = ctx.selected().iter().find(|e| !e.is_mock()) {
                return Err(CliError::usage(format!(
                    "--offline: evaluator `{}` calls a remote endpoint",
                    e.id
                )));
            }
        }
        Ok(ctx)
    }

    pub fn hash(&self) -> &str {
        &self.manifest.hash
    }

    /// Evaluators picked by `--evaluator`, or all of them.
    pub fn selected(&self) -> Vec<EvaluatorConfig> {
        self.cfg
            .evaluators()
            .into_iter()
            .filter(|e| self.flags.evaluators.is_empty() || self.flags.evaluators.contains(&e.id))
            .collect()
    }

    fn evaluator(&self, e: &EvaluatorConfig, cache_only: bool) -> Result<Evaluator, CliError> {
        let templates = PromptTemplates::load(&self.cfg.base_dir, &e.prompts)?;
        let backend: Box<dyn Backend> = if e.is_mock() {
            let triggers = load_triggers(&self.cfg, e)?.expect("mock has triggers");
            let cg = e.common_ground.clone().expect("validated mock has common ground");
            let vocab: Vec<String> = self
                .corpus
                .items
                .iter()
                .flat_map(|it| tokenize(&it.text).into_iter().map(|t| t.surface.to_string()).collect::<Vec<_>>())
                .collect();
            Box::new(MockBackend::new(self.lexicon.clone(), Arc::new(triggers), cg).with_vocabulary(vocab))
        } else {
            if self.flags.offline {
                return Err(CliError::usage(format!("--offline: evaluator `{}` is remote", e.id)));
            }
            Box::new(RemoteBackend::new(e)?)
        };
        Ok(Evaluator::new(e.clone(), templates, backend)
            .with_cache(self.cache.clone())
            .cache_only(cache_only))
    }

    /// Refuses to work on an output directory built under another manifest.
    fn check_manifest(&self, require: bool) -> Result<(), CliError> {
        match Manifest::load(&self.out)? {
            Some(m) => check_hash(&self.out.join(MANIFEST_FILE), Some(&m.hash), self.hash(), self.flags.force),
            None if require => Err(CliError::usage(format!(
                "{} has no {MANIFEST_FILE}; run `mumkit build` first",
                self.out.display()
            ))),
            None => Ok(()),
        }
    }

    fn load_dataset(&self) -> Result<ModulatedDataset, CliError> {
        let path = self.out.join("dataset.jsonl");
        if !path.is_file() {
            return Err(CliError::usage(format!("missing {}; run `mumkit build` first", path.display())));
        }
        check_artifact(&path, &read(&path)?, self.hash(), self.flags.force)?;
        Ok(ModulatedDataset::load(&path)?)
    }

    fn run_options(&self) -> RunOptions {
        RunOptions {
            similarity_threshold: self.cfg.similarity_threshold,
            audit_drop: self.cfg.audit_drop,
            degraded_fraction: self.cfg.degraded_fraction,
        }
    }

    fn run_dir(&self, evaluator_id: &str) -> PathBuf {
        self.out.join("runs").join(evaluator_id)
    }
}

/// Validates and ranks the corpus with the ranking evaluator, then
/// modulates every passing item.
pub fn cmd_build(ctx: &Context) -> Result<Summary, CliError> {
    let _lock = DirLock::acquire(&ctx.out, "build")?;
    ctx.check_manifest(false)?;
    let mut s = Summary::new();
    let ranker_cfg = ctx.cfg.ranking_evaluator()?;
    let ranker = ctx.evaluator(&ranker_cfg, false)?;
    let mut corpus = ctx.corpus.clone();
    let mut records = Vec::new();
    for item in corpus.items.iter_mut() {
        for w in &item.warnings {
            log::warn!("{}: {w}", item.id);
        }
        let v = validate_baseline(item, &ranker)?;
        item.validated = if v.passed { Validation::Passed } else { Validation::Failed };
        if v.passed {
            *item = rank_importance(item, &ranker)?;
            if item.ranking_flagged {
                log::warn!("{}: ranking padded with unvoted content words", item.id);
            }
        } else {
            log::warn!("{}: failed baseline validation and is excluded", item.id);
        }
        records.push(RankingRecord {
            corpus_version: ctx.corpus.content_version(),
            item_id: item.id.clone(),
            evaluator_id: ranker_cfg.id.clone(),
            validated: item.validated,
            validation_trials: v.trials,
            important_words: item.important_words.clone(),
            flagged: item.ranking_flagged,
        });
    }
    let passed = corpus.items.iter().filter(|i| i.validated == Validation::Passed).count();
    let mut dataset = build_dataset(&corpus, &ctx.lexicon, ctx.cfg.seed)?;
    if let Some(a) = &ctx.cfg.audit {
        audit_meaning(&mut dataset, &load_audit(&ctx.cfg.resolve(a))?)?;
    }

    let rankings = ctx.out.join("rankings.jsonl");
    save_rankings(&rankings, &records)?;
    let body = read(&rankings)?;
    write(&rankings, &(manifest_comment(ctx.hash()) + &body))?;
    write(&ctx.out.join("dataset.jsonl"), &(manifest_comment(ctx.hash()) + &dataset.to_jsonl()))?;
    write(&ctx.out.join("build_trials.jsonl"), &jsonl(&ranker.take_trials(), ctx.hash()))?;
    write(&ctx.out.join(MANIFEST_FILE), &ctx.manifest.to_json())?;

    s.line(format!("manifest {}", ctx.hash()));
    s.line(format!("items passed validation: {passed}/{}", corpus.len()));
    s.line(format!("modulated items: {}", dataset.len()));
    s.line(format!("dataset version: {}", dataset.version()));
    Ok(s)
}

fn write_run(ctx: &Context, id: &str, m: Measure, r: &RunResult, trials: &[mumkit_core::TrialRecord]) -> Result<(), CliError> {
    let dir = ctx.run_dir(id);
    write(&dir.join(format!("{m}.csv")), &series_to_csv(&r.series, ctx.hash()))?;
    write(&dir.join(format!("{m}.outcomes.jsonl")), &jsonl(&r.outcomes, ctx.hash()))?;
    write(&dir.join(format!("{m}.trials.jsonl")), &jsonl(trials, ctx.hash()))?;
    Ok(())
}

fn execute_task(ev: &Evaluator, ds: &ModulatedDataset, m: Measure, opts: &RunOptions) -> mumkit_core::Result<RunResult> {
    match m {
        Measure::Detection => run_detection(ds, ev, opts),
        Measure::Understanding => run_understanding(ds, ev, opts),
    }
}

/// Runs the selected tasks for every selected evaluator. A failing
/// evaluator does not stop the others; it is reported and the command
/// exits with the partial-failure code.
pub fn cmd_run(ctx: &Context) -> Result<Summary, CliError> {
    let _lock = DirLock::acquire(&ctx.out, "run")?;
    ctx.check_manifest(true)?;
    let ds = ctx.load_dataset()?;
    let opts = ctx.run_options();
    let mut s = Summary::new();
    for e in ctx.selected() {
        let ev = match ctx.evaluator(&e, false) {
            Ok(ev) => ev,
            Err(err) => {
                log::error!("evaluator `{}`: {err}", e.id);
                s.line(format!("{}: failed to start: {err}", e.id));
                s.failed.push(e.id.clone());
                continue;
            }
        };
        let mut failed = false;
        for m in ctx.flags.task.measures() {
            match execute_task(&ev, &ds, m, &opts) {
                Ok(r) => {
                    let fails = r.failures();
                    let trials = ev.take_trials();
                    if fails == r.outcomes.len() {
                        log::error!("evaluator `{}` {m}: every item failed", e.id);
                        s.line(format!("{} {m}: every item failed", e.id));
                        failed = true;
                        continue;
                    }
                    if fails > 0 {
                        failed = true;
                        log::warn!("evaluator `{}` {m}: {fails} item(s) failed", e.id);
                    }
                    write_run(ctx, &e.id, m, &r, &trials)?;
                    s.line(format!(
                        "{} {m}: {} series, {} outcomes, {fails} failed",
                        e.id,
                        r.series.len(),
                        r.outcomes.len()
                    ));
                }
                Err(err) => {
                    log::error!("evaluator `{}` {m}: {err}", e.id);
                    s.line(format!("{} {m}: {err}", e.id));
                    failed = true;
                }
            }
        }
        s.line(format!("{}: {} backend call(s)", e.id, ev.backend_calls()));
        if failed {
            s.failed.push(e.id.clone());
        }
    }
    if ctx.flags.evaluators.is_empty() {
        if let Some(p) = &ctx.cfg.population {
            let mut series = Vec::new();
            if ctx.flags.task != TaskSel::Understand {
                let e = &ctx.cfg.evaluators()[0];
                let trig = match load_triggers(&ctx.cfg, e)? {
                    Some(t) => t,
                    None => match &ctx.cfg.triggers {
                        Some(t) => TriggerLexicon::load(&ctx.cfg.resolve(t))?,
                        None => return Err(CliError::usage("population detection needs `triggers`")),
                    },
                };
                series.extend(simulate_population_detection(p, &ds, &trig)?);
            }
            if ctx.flags.task != TaskSel::Detect {
                series.extend(simulate_population_understanding(p, &ds)?);
            }
            write(&ctx.out.join("population/series.csv"), &series_to_csv(&series, ctx.hash()))?;
            s.line(format!("population: {} agents, {} series", p.size, series.len()));
            if let Some(sw) = &ctx.cfg.sweep {
                let sweep = sweep_common_ground(p, &sw.means, sw.strategy, &ds, ctx.cfg.bounds().1)?;
                write(&ctx.out.join("population/sweep.csv"), &sweep_to_csv(&sweep, ctx.hash()))?;
                s.line(format!(
                    "sweep over {}: {} point(s), x0 {}",
                    sw.strategy,
                    sweep.rows.len(),
                    if sweep.monotone { "monotone" } else { "NOT monotone" }
                ));
            }
        }
    }
    Ok(s)
}

/// Rate series and outcomes of every evaluator that has run files.
fn collect_runs(ctx: &Context) -> Result<(Vec<RateSeries>, Vec<ItemOutcome>), CliError> {
    let mut series = Vec::new();
    let mut outcomes = Vec::new();
    for e in ctx.selected() {
        for m in Measure::ALL {
            let dir = ctx.run_dir(&e.id);
            let csv = dir.join(format!("{m}.csv"));
            if !csv.is_file() {
                log::warn!("no {m} series for `{}` ({} missing); skipped", e.id, csv.display());
                continue;
            }
            let (hash, ss) = read_series_csv(&csv)?;
            check_hash(&csv, hash.as_deref(), ctx.hash(), ctx.flags.force)?;
            series.extend(ss);
            let op = dir.join(format!("{m}.outcomes.jsonl"));
            if op.is_file() {
                let src = read(&op)?;
                check_artifact(&op, &src, ctx.hash(), ctx.flags.force)?;
                outcomes.extend(read_jsonl::<ItemOutcome>(&op, &src)?);
            } else {
                log::warn!("{} missing; per-item estimates skipped", op.display());
            }
        }
    }
    Ok((series, outcomes))
}

pub fn analysis_options(cfg: &RunConfig) -> AnalysisOptions {
    let (d, u) = cfg.bounds();
    AnalysisOptions {
        tau: cfg.tau,
        detection_bounds: d,
        understanding_bounds: u,
        tradeoff_step: cfg.tradeoff_step,
    }
}

fn fits_csv(results: &Results, manifest: &str) -> String {
    let mut out = manifest_comment(manifest);
    out.push_str("task,evaluator,strategy,k,x0,r2,adj_r2,rmse,fit_class,rho,p_value,imum,censored,degraded,error\n");
    for r in &results.series {
        let f = r.fit.as_ref();
        let sp = r.spearman.as_ref();
        let cell = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.measure,
            r.evaluator_id,
            r.strategy,
            cell(f.map(|f| f.k)),
            cell(f.map(|f| f.x0)),
            cell(f.map(|f| f.r2)),
            cell(f.map(|f| f.adj_r2)),
            cell(f.map(|f| f.rmse)),
            f.map(|f| f.fit_class.to_string()).unwrap_or_default(),
            cell(sp.map(|s| s.rho)),
            cell(sp.map(|s| s.p_value)),
            cell(r.imum.as_ref().map(|i| i.value)),
            r.imum.as_ref().map(|i| i.censored.to_string()).unwrap_or_default(),
            r.degraded,
            r.error.as_deref().unwrap_or_default().replace([',', '\n'], ";"),
        ));
    }
    out
}

/// Fits, rank tests, thresholds, aggregates and trade-offs.
pub fn cmd_fit(ctx: &Context) -> Result<Summary, CliError> {
    let _lock = DirLock::acquire(&ctx.out, "fit")?;
    ctx.check_manifest(true)?;
    let (series, outcomes) = collect_runs(ctx)?;
    if series.is_empty() {
        return Err(CliError::usage(format!(
            "no rate series under {}; run `mumkit run` first",
            ctx.out.join("runs").display()
        )));
    }
    let results = analyze(&series, &outcomes, &analysis_options(&ctx.cfg), ctx.hash())?;
    let json = serde_json::to_string_pretty(&results).expect("results serialize") + "\n";
    write(&ctx.out.join("fit/results.json"), &json)?;
    write(&ctx.out.join("fit/fits.csv"), &fits_csv(&results, ctx.hash()))?;
    let mut s = Summary::new();
    let failed = results.series.iter().filter(|r| r.error.is_some()).count();
    let degenerate = results
        .series
        .iter()
        .filter(|r| r.fit.as_ref().is_some_and(|f| f.degenerate))
        .count();
    s.line(format!(
        "{} fit(s), {failed} unfitted, {degenerate} degenerate; {} MUM estimate(s); {} trade-off(s)",
        results.series.len(),
        results.mum.len(),
        results.tradeoffs.len()
    ));
    if !results.excluded_items.is_empty() {
        s.line(format!("{} item series excluded from per-item estimates", results.excluded_items.len()));
    }
    Ok(s)
}

/// Renders tables, figures and `report.md` from the fit results.
pub fn cmd_report(ctx: &Context) -> Result<Summary, CliError> {
    let _lock = DirLock::acquire(&ctx.out, "report")?;
    ctx.check_manifest(true)?;
    let rp = ctx.out.join("fit/results.json");
    if !rp.is_file() {
        return Err(CliError::usage(format!("missing input {}; run `mumkit fit` first", rp.display())));
    }
    let results: Results =
        serde_json::from_str(&read(&rp)?).map_err(|e| CliError::usage(format!("{}: {e}", rp.display())))?;
    check_hash(&rp, Some(&results.manifest), ctx.hash(), ctx.flags.force)?;
    let (series, _) = collect_runs(ctx)?;
    let bundle = render_report(
        &results,
        &series,
        &ReportConfig {
            zones: ctx.cfg.zones.clone(),
        },
    );
    let dir = ctx.out.join("report");
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| CliError::usage(format!("cannot clear {}: {e}", dir.display())))?;
    }
    bundle.write_to(&dir)?;
    let mut s = Summary::new();
    s.line(format!("{} artifact(s) in {}", bundle.artifacts.len(), dir.display()));
    Ok(s)
}

/// Re-executes the recorded runs from the cache alone and compares the
/// results with what is on disk.
pub fn cmd_replay(ctx: &Context) -> Result<Summary, CliError> {
    let _lock = DirLock::acquire(&ctx.out, "replay")?;
    ctx.check_manifest(true)?;
    let ds = ctx.load_dataset()?;
    let opts = ctx.run_options();
    let mut s = Summary::new();
    let mut divergent = BTreeSet::new();
    for e in ctx.selected() {
        let ev = ctx.evaluator(&e, true)?;
        for m in ctx.flags.task.measures() {
            let csv = ctx.run_dir(&e.id).join(format!("{m}.csv"));
            if !csv.is_file() {
                continue;
            }
            let stored = read(&csv)?;
            check_artifact(&csv, &stored, ctx.hash(), ctx.flags.force)?;
            let r = execute_task(&ev, &ds, m, &opts)?;
            if let Some(o) = r.outcomes.iter().find(|o| o.error.is_some()) {
                return Err(CliError::invariant(format!(
                    "replay of `{}` {m}: {}",
                    e.id,
                    o.error.as_deref().unwrap_or_default()
                )));
            }
            if series_to_csv(&r.series, ctx.hash()) == stored {
                s.line(format!("{} {m}: identical", e.id));
            } else {
                s.line(format!("{} {m}: DIVERGED", e.id));
                divergent.insert(format!("{} {m}", e.id));
            }
        }
        if ev.backend_calls() != 0 {
            return Err(CliError::invariant(format!("replay of `{}` reached the backend", e.id)));
        }
    }
    if !divergent.is_empty() {
        return Err(CliError::invariant(format!(
            "replay diverged for: {}",
            divergent.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(s)
}
