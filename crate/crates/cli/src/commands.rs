use crate::config::{RunConfig, ThresholdKind};
use crate::provenance::Provenance;
use crate::CliError;
use datquant::classify::{cross_validate, oob_importance, CvConfig, CvReport, Dataset, ImportanceReport};
use datquant::features::{feature_kind, sbr_features, FeatureKind, FeatureTable, IMAGE_FEATURES, SBR_FEATURES};
use datquant::io::{
    load_manifest, load_sbr_table, read_volume, write_raw, write_sbr_table, Group, ManifestEntry, SbrRecord,
    STANDARD_DIMS,
};
use datquant::phantom::{generate_cohort, synthetic_sbr, PhantomSpec, PhantomTruth, SLICES};
use datquant::pipeline::{volume_features, ExtractOptions};
use datquant::preprocess::{slice_area_profile, SliceWindow};
use datquant::segment::AUTO_FALLBACK;
use datquant::stats::{group_summary, screen_features, FeatureScreen, GroupSummary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, text).map_err(CliError::io(path))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(&r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

/// Shortest round-trip decimal, switching to exponent form for very small or
/// very large magnitudes.
fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn read_table(path: &Path) -> Result<FeatureTable<f64>, CliError> {
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    Ok(FeatureTable::read_csv(std::io::BufReader::new(file))?)
}

fn seeded(cfg: &RunConfig) -> (RunConfig, bool) {
    let mut cfg = cfg.clone();
    let generated = cfg.resolve_seed();
    if generated {
        log::warn!("no seed given; using generated seed {}", cfg.seed_or_zero());
    }
    (cfg, generated)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub label: Group,
    pub threshold: Option<f64>,
    /// `override`, `fixed` or `auto`.
    pub threshold_source: Option<String>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractProvenance {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub slices: SliceWindow,
    pub with_sbr: bool,
    pub n_subjects: usize,
    pub n_failed: usize,
    pub subjects: Vec<SubjectRecord>,
}

#[derive(Debug, Clone)]
pub struct ExtractOutcome {
    pub table: FeatureTable<f64>,
    pub provenance: ExtractProvenance,
    pub table_path: PathBuf,
    pub provenance_path: PathBuf,
    /// Written only when some subject failed.
    pub failures_path: Option<PathBuf>,
}

impl ExtractOutcome {
    pub fn failed(&self) -> usize {
        self.provenance.n_failed
    }
}

type SubjectResult = Result<(Vec<f64>, f64, &'static str, Vec<String>), String>;

fn extract_subject(
    entry: &ManifestEntry,
    opts: &ExtractOptions,
    mode: ThresholdKind,
    sbr: Option<&HashMap<String, SbrRecord>>,
) -> SubjectResult {
    let (override_t, source) = match (entry.threshold_override, mode) {
        (Some(t), _) => (Some(t), "override"),
        (None, ThresholdKind::PerSubject) => {
            return Err("per-subject threshold mode needs a manifest threshold_override".into())
        }
        (None, ThresholdKind::Fixed) => (None, "fixed"),
        (None, ThresholdKind::Auto) => (None, "auto"),
    };
    let vol = read_volume::<f64>(&entry.path).map_err(|e| e.to_string())?;
    let mut f = volume_features(&vol, override_t, opts).map_err(|e| e.to_string())?;
    if vol.dims() != STANDARD_DIMS {
        f.warnings.push(format!("volume dims {:?} differ from the standard {STANDARD_DIMS:?} grid", vol.dims()));
    }
    let mut values = f.values.to_vec();
    if let Some(sbr) = sbr {
        let rec = sbr
            .get(&entry.subject_id)
            .ok_or_else(|| "no SBR record for subject".to_string())?;
        values.extend(sbr_features(rec).map_err(|e| format!("SBR: {e}"))?);
    }
    Ok((values, f.threshold, source, f.warnings))
}

/// Runs the per-subject pipeline over a manifest and writes the feature
/// table, `<out>.provenance.json` and, if any subject failed,
/// `<out>.failures.csv`. Failed subjects are left out of the table.
pub fn cmd_extract(manifest: &Path, sbr: Option<&Path>, out: &Path, cfg: &RunConfig) -> Result<ExtractOutcome, CliError> {
    cfg.validate()?;
    let entries = load_manifest(manifest)?.entries;
    if entries.is_empty() {
        return Err(CliError::Invalid(format!("{} lists no subjects", manifest.display())));
    }
    let sbr_map = match sbr {
        Some(p) => {
            let recs = load_sbr_table(p)?;
            let map: HashMap<String, SbrRecord> = recs.into_iter().map(|r| (r.subject_id.clone(), r)).collect();
            for id in map.keys() {
                if !entries.iter().any(|e| &e.subject_id == id) {
                    log::warn!("SBR record {id} has no manifest entry");
                }
            }
            Some(map)
        }
        None => None,
    };
    let opts = cfg.extract_options();
    let mode = cfg.threshold.mode;
    let results: Vec<SubjectResult> = pool(cfg.workers)?.install(|| {
        entries
            .par_iter()
            .map(|e| extract_subject(e, &opts, mode, sbr_map.as_ref()))
            .collect()
    });

    let mut table = FeatureTable::<f64>::new(sbr.is_some());
    let mut subjects = Vec::with_capacity(entries.len());
    for (entry, res) in entries.iter().zip(results) {
        let mut rec = SubjectRecord {
            subject_id: entry.subject_id.clone(),
            label: entry.label,
            threshold: None,
            threshold_source: None,
            warnings: Vec::new(),
            error: None,
        };
        match res {
            Ok((values, t, source, warnings)) => {
                for w in &warnings {
                    log::info!("{}: {w}", entry.subject_id);
                }
                table.push(entry.subject_id.clone(), entry.label, values);
                rec.threshold = Some(t);
                rec.threshold_source = Some(source.to_string());
                rec.warnings = warnings;
            }
            Err(e) => {
                log::error!("{}: {e}", entry.subject_id);
                rec.error = Some(e);
            }
        }
        subjects.push(rec);
    }

    let mut inputs = vec![manifest];
    inputs.extend(sbr);
    let n_failed = subjects.iter().filter(|s| s.error.is_some()).count();
    let provenance = ExtractProvenance {
        provenance: Provenance::new("extract", cfg, false, &inputs)?,
        slices: cfg.slices,
        with_sbr: sbr.is_some(),
        n_subjects: entries.len(),
        n_failed,
        subjects,
    };
    write_text(out, &table.to_csv_string())?;
    let provenance_path = out.with_extension("provenance.json");
    write_json(&provenance_path, &provenance)?;
    let failures_path = if n_failed > 0 {
        let rows = provenance
            .subjects
            .iter()
            .filter_map(|s| {
                s.error
                    .as_ref()
                    .map(|e| vec![s.subject_id.clone(), s.label.to_string(), e.clone()])
            })
            .collect();
        let p = out.with_extension("failures.csv");
        write_text(&p, &csv_text(&["subject_id", "label", "error"], rows))?;
        Some(p)
    } else {
        None
    };
    log::info!("extracted {} of {} subjects", table.rows.len(), entries.len());
    Ok(ExtractOutcome {
        table,
        provenance,
        table_path: out.to_path_buf(),
        provenance_path,
        failures_path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsOutcome {
    pub provenance: Provenance,
    pub summary: GroupSummary,
    pub screen: FeatureScreen,
}

fn stat_cells(m: Option<datquant::stats::MeanSd>) -> [String; 2] {
    match m {
        Some(m) => [num(m.mean), num(m.sd)],
        None => [String::new(), String::new()],
    }
}

/// Group means and sds, rank-sum p-values and the significance screen of
/// every column: `<out>.csv` and `<out>.json`.
pub fn cmd_stats(table_path: &Path, out: &Path, cfg: &RunConfig) -> Result<StatsOutcome, CliError> {
    cfg.validate()?;
    let table = read_table(table_path)?;
    let summary = group_summary(&table.matrix(), &table.labels(), &table.columns)?;
    let screen = screen_features(&summary, cfg.alpha);
    let rows = summary
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let mut r = vec![(j + 1).to_string(), f.name.clone()];
            r.extend(stat_cells(f.normal));
            r.extend(stat_cells(f.swedd));
            r.extend(stat_cells(f.pd));
            r.push(opt(f.p1));
            r.push(num(f.p2));
            r.push(screen.kept.contains(&j).to_string());
            r
        })
        .collect();
    let header = [
        "number", "feature", "normal_mean", "normal_sd", "swedd_mean", "swedd_sd", "pd_mean", "pd_sd", "p1", "p2",
        "significant",
    ];
    write_text(&out.with_extension("csv"), &csv_text(&header, rows))?;
    let outcome = StatsOutcome {
        provenance: Provenance::new("stats", cfg, false, &[table_path])?,
        summary,
        screen,
    };
    write_json(&out.with_extension("json"), &outcome)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub provenance: Provenance,
    /// Columns that passed the screen and were fed to the classifiers.
    pub features: Vec<String>,
    pub screen: FeatureScreen,
    pub reports: Vec<CvReport>,
}

/// Screens the image columns (plus SBR if configured) on PD vs the rest,
/// then runs every configured classifier under repeated stratified k-fold.
/// Normal and SWEDD together form the negative class. Writes a
/// one row per classifier to `<out>.csv` and the full report to `<out>.json`.
pub fn cmd_cv(table_path: &Path, out: &Path, cfg: &RunConfig) -> Result<CvOutcome, CliError> {
    cfg.validate()?;
    let (cfg, generated) = seeded(cfg);
    let table = read_table(table_path)?;
    let n_cols = if cfg.cv.include_sbr { table.columns.len() } else { IMAGE_FEATURES };
    let matrix: Vec<Vec<f64>> = table.rows.iter().map(|r| r.values[..n_cols].to_vec()).collect();
    let labels = table.labels();
    let summary = group_summary(&matrix, &labels, &table.columns[..n_cols])?;
    let screen = screen_features(&summary, cfg.alpha);
    if screen.kept.is_empty() {
        return Err(CliError::Invalid(format!("no feature passes the screen at alpha = {}", cfg.alpha)));
    }
    let y: Vec<bool> = labels.iter().map(|g| g.is_deficit()).collect();
    let data = Dataset::new(&matrix, y, table.columns[..n_cols].to_vec())?.select_columns(&screen.kept);
    let cv = CvConfig {
        k: cfg.cv.k,
        repeats: cfg.cv.repeats,
        seed: cfg.seed_or_zero(),
        workers: cfg.workers,
    };
    let mut reports = Vec::new();
    for c in cfg.classifiers() {
        log::info!("cross-validating {} on {} features", c.name(), data.n_cols());
        reports.push(cross_validate(&data, &c, &cv)?);
    }
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.classifier.clone()];
            for m in [r.accuracy, r.sensitivity, r.specificity, r.auc] {
                row.push(num(m.mean));
                row.push(num(m.sd));
            }
            row
        })
        .collect();
    let header = [
        "classifier",
        "accuracy",
        "accuracy_sd",
        "sensitivity",
        "sensitivity_sd",
        "specificity",
        "specificity_sd",
        "auc",
        "auc_sd",
    ];
    write_text(&out.with_extension("csv"), &csv_text(&header, rows))?;
    let outcome = CvOutcome {
        provenance: Provenance::new("cv", &cfg, generated, &[table_path])?,
        features: data.column_ids().to_vec(),
        screen,
        reports,
    };
    write_json(&out.with_extension("json"), &outcome)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub rank: usize,
    /// 1-based column number in the feature table.
    pub number: usize,
    pub name: String,
    pub kind: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceOutcome {
    pub provenance: Provenance,
    /// Second-best SBR feature, when the table carries SBR columns.
    pub reference: Option<Reference>,
    pub shape_above_reference: Option<usize>,
    pub surface_above_reference: Option<usize>,
    pub ranking: Vec<RankedFeature>,
    pub report: ImportanceReport,
}

fn kind_name(k: FeatureKind) -> &'static str {
    match k {
        FeatureKind::Shape => "shape",
        FeatureKind::Surface => "surface",
        FeatureKind::Sbr => "sbr",
    }
}

/// Out-of-bag permutation importance of every table column. Writes
/// `<out>.json` and the plot data `<out>.csv` (one row per column, in column
/// order).
pub fn cmd_importance(table_path: &Path, out: &Path, cfg: &RunConfig) -> Result<ImportanceOutcome, CliError> {
    cfg.validate()?;
    let (cfg, generated) = seeded(cfg);
    let table = read_table(table_path)?;
    let y: Vec<bool> = table.labels().iter().map(|g| g.is_deficit()).collect();
    let data = Dataset::new(&table.matrix(), y, table.columns.clone())?;
    let report = oob_importance(&data, &cfg.importance, cfg.seed_or_zero(), cfg.workers)?;
    let ranking: Vec<RankedFeature> = report
        .ranking()
        .into_iter()
        .enumerate()
        .map(|(r, j)| RankedFeature {
            rank: r + 1,
            number: j + 1,
            name: report.column_ids[j].clone(),
            kind: kind_name(feature_kind(j)).into(),
            score: report.scores[j],
        })
        .collect();
    let reference = table.has_sbr().then(|| {
        let sbr: Vec<&RankedFeature> = ranking.iter().filter(|f| f.kind == "sbr").collect();
        debug_assert_eq!(sbr.len(), SBR_FEATURES);
        Reference {
            name: sbr[1].name.clone(),
            score: sbr[1].score,
        }
    });
    let above = |kind: &str| {
        reference
            .as_ref()
            .map(|r| ranking.iter().filter(|f| f.kind == kind && f.score > r.score).count())
    };
    let outcome = ImportanceOutcome {
        provenance: Provenance::new("importance", &cfg, generated, &[table_path])?,
        shape_above_reference: above("shape"),
        surface_above_reference: above("surface"),
        reference,
        ranking,
        report,
    };
    let mut plot: Vec<&RankedFeature> = outcome.ranking.iter().collect();
    plot.sort_by_key(|f| f.number);
    let rows = plot
        .into_iter()
        .map(|f| vec![f.number.to_string(), f.name.clone(), f.kind.clone(), num(f.score), f.rank.to_string()])
        .collect();
    write_text(&out.with_extension("csv"), &csv_text(&["number", "feature", "kind", "score", "rank"], rows))?;
    write_json(&out.with_extension("json"), &outcome)?;
    Ok(outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhantomCounts {
    pub normal: usize,
    pub swedd: usize,
    pub pd: usize,
}

impl Default for PhantomCounts {
    fn default() -> Self {
        Self {
            normal: 100,
            swedd: 40,
            pd: 200,
        }
    }
}

impl PhantomCounts {
    fn of(&self, g: Group) -> usize {
        match g {
            Group::Normal => self.normal,
            Group::Swedd => self.swedd,
            Group::Pd => self.pd,
        }
    }
}

fn truth_row(t: &PhantomTruth) -> Vec<String> {
    let mut row = vec![
        t.subject_id.clone(),
        t.group.to_string(),
        num(t.uptake),
        num(t.posterior_loss),
        num(t.asymmetry),
    ];
    for s in [t.left, t.right] {
        row.extend([s.length, s.angle, s.head_width, s.tail_width, s.peak, s.loss].map(num));
    }
    row
}

/// Writes a calibrated phantom study into `dir`: raw volumes under
/// `volumes/`, `manifest.csv`, `truth.csv`, `sbr.csv` (unless disabled) and a
/// `run.toml` that points `extract` at them with the phantom slice window.
pub fn cmd_phantom(dir: &Path, counts: PhantomCounts, with_sbr: bool, cfg: &RunConfig) -> Result<RunConfig, CliError> {
    let (cfg, generated) = seeded(cfg);
    let seed = cfg.seed_or_zero();
    let vol_dir = dir.join("volumes");
    std::fs::create_dir_all(&vol_dir).map_err(CliError::io(&vol_dir))?;
    let pool = pool(cfg.workers)?;
    let (mut manifest, mut truth, mut sbr) = (Vec::new(), Vec::new(), Vec::new());
    for group in Group::ALL {
        let spec = PhantomSpec::calibrated(group, counts.of(group), seed);
        let cohort = pool.install(|| generate_cohort::<f32>(&spec))?;
        pool.install(|| {
            cohort.par_iter().try_for_each(|s| write_raw(&s.volume, vol_dir.join(&s.truth.subject_id)))
        })?;
        for (i, s) in cohort.iter().enumerate() {
            let id = &s.truth.subject_id;
            manifest.push(vec![id.clone(), format!("volumes/{id}.json"), group.to_string()]);
            truth.push(truth_row(&s.truth));
            sbr.push(synthetic_sbr(&s.truth, seed, i as u64));
        }
        log::info!("wrote {} {group} phantoms", cohort.len());
    }
    write_text(&dir.join("manifest.csv"), &csv_text(&["subject_id", "path", "label"], manifest))?;
    let side_cols = ["length", "angle", "head_width", "tail_width", "peak", "loss"];
    let mut header: Vec<String> = ["subject_id", "group", "uptake", "posterior_loss", "asymmetry"]
        .map(String::from)
        .to_vec();
    for side in ["left", "right"] {
        header.extend(side_cols.iter().map(|c| format!("{side}_{c}")));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_text(&dir.join("truth.csv"), &csv_text(&header, truth))?;
    if with_sbr {
        write_sbr_table(&sbr, dir.join("sbr.csv"))?;
    }
    let run = RunConfig {
        seed: Some(seed),
        slices: SliceWindow::new(0, SLICES - 1),
        manifest: Some("manifest.csv".into()),
        sbr: with_sbr.then(|| "sbr.csv".into()),
        workers: 0,
        ..cfg
    };
    let mut text = format!(
        "# phantom study, {} Normal / {} SWEDD / {} PD, seed {seed}{}\n",
        counts.normal,
        counts.swedd,
        counts.pd,
        if generated { " (generated)" } else { "" }
    );
    text.push_str(&run.to_toml());
    write_text(&dir.join("run.toml"), &text)?;
    Ok(run)
}

/// Above-threshold pixel count of every slice in `slices` (all slices when
/// absent), written as `slice,area` CSV.
pub fn cmd_area_profile(
    volume: &Path,
    threshold: Option<f64>,
    slices: Option<SliceWindow>,
    out: &Path,
) -> Result<Vec<(usize, usize)>, CliError> {
    let t = threshold.unwrap_or(AUTO_FALLBACK);
    if !(t > 0.0 && t < 1.0) {
        return Err(CliError::Invalid(format!("threshold must lie in (0, 1), got {t}")));
    }
    let vol = read_volume::<f64>(volume)?;
    let w = slices.unwrap_or_else(|| SliceWindow::new(0, vol.nz() - 1));
    let profile = slice_area_profile(&vol, t, w.indices())?;
    let rows = profile.iter().map(|(z, a)| vec![z.to_string(), a.to_string()]).collect();
    write_text(out, &csv_text(&["slice", "area"], rows))?;
    Ok(profile)
}
