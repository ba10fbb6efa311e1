//! End-to-end runs behind the CLI subcommands.
//!
//! Output files follow `<dataset>_<model>_<panel>_<groups>.<ext>` under the
//! manifest's output directory, split into `stats/`, `fairness/` and
//! `report/`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cam::{load_model, ActivationMap, ImageTensor, ScoreCam};
use crate::demographics::Demographics;
use crate::error::{Error, IoContext, Result};
use crate::fairness::{FairnessReport, DEFAULT_ALPHA, DEFAULT_TARGETS};
use crate::grid::Grid;
use crate::io::{
    encode_amap_archive, load_face_image, read_amap_archive, read_scores_csv, CohortDef, CohortManifest,
};
use crate::render::{self, Colormap, Plot, RenderSpec};
use crate::stats::{
    compute_damv, compute_spatial_profile, value_histogram_in, Cohort, CohortStatistics, SpatialProfile, DEFAULT_BINS,
};

/// Validated run settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub alpha: f64,
    pub targets: Vec<f64>,
    pub bins: usize,
    pub colormap: Colormap,
    pub threads: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            targets: DEFAULT_TARGETS.to_vec(),
            bins: DEFAULT_BINS,
            colormap: Colormap::default(),
            threads: None,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha {} must lie in [0, 1]", self.alpha)));
        }
        if self.targets.is_empty() || self.targets.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return Err(Error::InvalidArgument("target FMRs must be non-empty and lie in (0, 1]".into()));
        }
        if self.bins == 0 {
            return Err(Error::InvalidArgument("bins must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
    }

    fn output_dir(&self, manifest: &CohortManifest) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| manifest.output_dir())
    }

    fn render_spec(&self) -> RenderSpec {
        RenderSpec { colormap: self.colormap, ..RenderSpec::default() }
    }
}

fn file_name(m: &CohortManifest, panel: &str, groups: &str, ext: &str) -> String {
    format!("{}_{}_{panel}_{groups}.{ext}", m.dataset, m.model)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).io_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, bytes).io_context(|| format!("writing {}", path.display()))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).io_context(|| format!("reading {}", path.display()))
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

// ---------------------------------------------------------------------------
// cam

/// Images to run Score-CAM on.
#[derive(Debug, Clone)]
pub enum ImageInputs {
    /// Every `*.png` in a directory, in file-name order, tagged with the
    /// given demographics.
    Dir { path: PathBuf, demographics: Demographics },
    /// CSV with header `path,ethnicity,gender`; paths relative to the list.
    List(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ImageJob {
    pub path: PathBuf,
    pub sample_id: String,
    pub demographics: Demographics,
}

impl ImageInputs {
    pub fn jobs(&self) -> Result<Vec<ImageJob>> {
        match self {
            ImageInputs::Dir { path, demographics } => {
                let mut files: Vec<PathBuf> = std::fs::read_dir(path)
                    .io_context(|| format!("listing {}", path.display()))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
                    .collect();
                files.sort();
                Ok(files
                    .into_iter()
                    .map(|p| ImageJob { sample_id: sample_id(&p), path: p, demographics: *demographics })
                    .collect())
            }
            ImageInputs::List(list) => {
                let base = list.parent().map(Path::to_path_buf).unwrap_or_default();
                let file = std::fs::File::open(list).io_context(|| format!("opening {}", list.display()))?;
                let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
                let err = |line: u64, message: String| Error::Csv { line, message };
                let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
                let col = |name: &str| {
                    headers.iter().position(|h| h == name).ok_or_else(|| err(1, format!("missing column {name:?}")))
                };
                let (pc, ec, gc) = (col("path")?, col("ethnicity")?, col("gender")?);
                let mut jobs = Vec::new();
                for rec in reader.records() {
                    let rec = rec.map_err(|e| err(e.position().map(|p| p.line()).unwrap_or(0), e.to_string()))?;
                    let line = rec.position().map(|p| p.line()).unwrap_or(0);
                    let field = |c: usize| rec.get(c).unwrap_or("");
                    let path = base.join(field(pc));
                    let demographics = Demographics {
                        ethnicity: field(ec).parse().map_err(|e: Error| err(line, e.to_string()))?,
                        gender: field(gc).parse().map_err(|e: Error| err(line, e.to_string()))?,
                    };
                    jobs.push(ImageJob { sample_id: sample_id(&path), path, demographics });
                }
                Ok(jobs)
            }
        }
    }
}

fn sample_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Debug, Clone, Serialize)]
pub struct CamSummary {
    pub written: usize,
    pub bytes: u64,
    pub skipped: Vec<(PathBuf, String)>,
}

/// Symmetrized Score-CAM for every image, written as one archive.
///
/// Without `skip_bad` the first failing image aborts the run; with it,
/// failures are collected in [`CamSummary::skipped`].
pub fn run_cam(
    model_path: &Path,
    inputs: &ImageInputs,
    archive: &Path,
    skip_bad: bool,
    cfg: &RunConfig,
    progress: &(dyn Fn(usize, usize, &Path) + Sync),
) -> Result<CamSummary> {
    cfg.validate()?;
    let model = load_model(&read_file(model_path)?)?;
    let jobs = inputs.jobs()?;
    if jobs.is_empty() {
        return Err(Error::InvalidArgument("no input images found".into()));
    }
    let engine = ScoreCam::new(&model);
    let done = std::sync::atomic::AtomicUsize::new(0);
    let results: Vec<Result<ActivationMap>> = cfg.pool()?.install(|| {
        jobs.par_iter()
            .map(|job| {
                let r = load_face_image(&job.path)
                    .and_then(|img| engine.activation_map(&img, job.sample_id.clone(), job.demographics))
                    .map_err(|e| match e {
                        e @ Error::Image { .. } => e,
                        e => Error::Image { path: job.path.clone(), message: e.to_string() },
                    });
                let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(k, jobs.len(), &job.path);
                r
            })
            .collect()
    });
    let mut maps = Vec::with_capacity(jobs.len());
    let mut skipped = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(m) => maps.push(m),
            Err(e) if skip_bad => skipped.push((job.path.clone(), e.to_string())),
            Err(e) => return Err(e),
        }
    }
    if maps.is_empty() {
        return Err(Error::InvalidArgument("every input image failed".into()));
    }
    let bytes = encode_amap_archive(&maps)?;
    write_file(archive, &bytes)?;
    Ok(CamSummary { written: maps.len(), bytes: bytes.len() as u64, skipped })
}

// ---------------------------------------------------------------------------
// stats

/// Loads every cohort of the manifest, reading each archive once.
pub fn load_cohorts(m: &CohortManifest) -> Result<Vec<Cohort>> {
    let mut cache: BTreeMap<PathBuf, Vec<ActivationMap>> = BTreeMap::new();
    let mut cohorts = Vec::with_capacity(m.cohorts.len());
    for def in &m.cohorts {
        let path = m.resolve(&def.archive);
        if !cache.contains_key(&path) {
            let file = std::fs::File::open(&path).io_context(|| format!("opening {}", path.display()))?;
            let maps = read_amap_archive(std::io::BufReader::new(file)).map_err(|e| match e {
                Error::Io { .. } => e,
                e => Error::Manifest(format!("{}: {e}", path.display())),
            })?;
            cache.insert(path.clone(), maps);
        }
        let maps: Vec<ActivationMap> = cache[&path].iter().filter(|a| def.filter.accepts(a)).cloned().collect();
        cohorts.push(Cohort::new(def.label.clone(), maps)?);
    }
    Ok(cohorts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRange {
    pub min: f64,
    pub max: f64,
}

impl From<&Grid> for GridRange {
    fn from(g: &Grid) -> Self {
        Self { min: g.min(), max: g.max() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub label: String,
    pub n: usize,
    pub mam: GridRange,
    pub amv: GridRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub groups: String,
    pub damv: GridRange,
    pub damv_total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub dataset: String,
    pub model: String,
    pub reference: String,
    pub cohorts: Vec<CohortSummary>,
    pub comparisons: Vec<ComparisonSummary>,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
}

fn pair_label(other: &str, reference: &str) -> String {
    format!("{other}-{reference}")
}

fn stats_dir(out: &Path) -> PathBuf {
    out.join("stats")
}

fn single_map_archive(id: String, grid: Grid, def: &CohortDef) -> Result<Vec<u8>> {
    let d = Demographics {
        ethnicity: def.filter.ethnicity.unwrap_or(crate::Ethnicity::Unknown),
        gender: def.filter.gender.unwrap_or(crate::Gender::Unknown),
    };
    encode_amap_archive(&[ActivationMap::new(id, grid, d)?])
}

/// MAM and AM-V per cohort, D-AM-V and spatial profiles for each cohort
/// against the reference, and a JSON summary.
pub fn run_stats(m: &CohortManifest, cfg: &RunConfig) -> Result<StatsSummary> {
    cfg.validate()?;
    let cohorts = load_cohorts(m)?;
    let stats: Vec<CohortStatistics> =
        cfg.pool()?.install(|| cohorts.par_iter().map(CohortStatistics::compute).collect::<Result<_>>())?;
    let out = stats_dir(&cfg.output_dir(m));
    let mut files = Vec::new();
    let mut emit = |name: String, bytes: Vec<u8>| -> Result<()> {
        write_file(&out.join(&name), &bytes)?;
        files.push(name);
        Ok(())
    };

    for (def, s) in m.cohorts.iter().zip(&stats) {
        emit(file_name(m, "mam", &def.label, "amap"), single_map_archive(format!("MAM_{}", def.label), s.mam.clone(), def)?)?;
        emit(file_name(m, "amv", &def.label, "amap"), single_map_archive(format!("AMV_{}", def.label), s.amv.clone(), def)?)?;
    }

    let ref_idx = m.cohorts.iter().position(|c| c.label == m.reference).expect("validated");
    let reference = &stats[ref_idx];
    let ref_profile = compute_spatial_profile(&reference.amv, &reference.group_label);
    let mut comparisons = Vec::new();
    let mut warnings = Vec::new();
    for (def, s) in m.cohorts.iter().zip(&stats) {
        if def.label == m.reference {
            continue;
        }
        let pair = pair_label(&def.label, &m.reference);
        let damv = compute_damv(s, reference)?;
        emit(file_name(m, "damv", &pair, "amap"), single_map_archive(format!("DAMV_{pair}"), damv.clone(), def)?)?;
        let profile = compute_spatial_profile(&s.amv, &s.group_label);
        emit(file_name(m, "profiles", &pair, "csv"), profiles_csv(&ref_profile, &profile).into_bytes())?;
        comparisons.push(ComparisonSummary { groups: pair, damv_total: damv.sum(), damv: GridRange::from(&damv) });
    }
    if comparisons.is_empty() {
        warnings.push(format!("only the reference cohort {:?} is defined; no D-AM-V computed", m.reference));
    }
    let summary_name = file_name(m, "summary", "stats", "json");
    files.push(summary_name.clone());
    let summary = StatsSummary {
        dataset: m.dataset.clone(),
        model: m.model.clone(),
        reference: m.reference.clone(),
        cohorts: stats
            .iter()
            .map(|s| CohortSummary {
                label: s.group_label.clone(),
                n: s.n,
                mam: GridRange::from(&s.mam),
                amv: GridRange::from(&s.amv),
            })
            .collect(),
        comparisons,
        warnings,
        files,
    };
    write_file(&out.join(summary_name), &to_json(&summary)?)?;
    Ok(summary)
}

fn profiles_csv(reference: &SpatialProfile, other: &SpatialProfile) -> String {
    use std::fmt::Write;
    let (r, o) = (&reference.group_label, &other.group_label);
    let mut csv = format!("index,{r}_s_x,{o}_s_x,{r}_s_y,{o}_s_y\n");
    for i in 0..reference.s_x.len().max(reference.s_y.len()) {
        let get = |v: &[f64]| v.get(i).map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{i},{},{},{},{}", get(&reference.s_x), get(&other.s_x), get(&reference.s_y), get(&other.s_y));
    }
    csv
}

// ---------------------------------------------------------------------------
// fairness

fn fairness_dir(out: &Path) -> PathBuf {
    out.join("fairness")
}

/// Calibrates thresholds at every target, computes per-group rates, FDR and
/// FDR AUC over all score groups, and writes the report with its curve plot.
pub fn run_fairness(m: &CohortManifest, cfg: &RunConfig) -> Result<FairnessReport> {
    cfg.validate()?;
    let Some(scores_path) = &m.scores else {
        return Err(Error::Manifest("no score CSV configured (\"scores\")".into()));
    };
    let path = m.resolve(scores_path);
    let file = std::fs::File::open(&path).io_context(|| format!("opening {}", path.display()))?;
    let scores = read_scores_csv(std::io::BufReader::new(file))?;
    let groups = scores.groups();
    let report = scores.fdr_curve(&groups, &cfg.targets, cfg.alpha)?;
    let out = fairness_dir(&cfg.output_dir(m));
    write_file(&out.join(file_name(m, "fairness", "all", "json")), &to_json(&report)?)?;
    let plot = render::render_fdr_curve(&report)?;
    write_plot(&out, &file_name(m, "fdr", "all", "svg"), &plot)?;
    Ok(report)
}

fn write_plot(dir: &Path, svg_name: &str, plot: &Plot) -> Result<()> {
    write_file(&dir.join(svg_name), plot.svg.as_bytes())?;
    write_file(&dir.join(svg_name.replace(".svg", ".csv")), plot.csv.as_bytes())
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportIndex {
    pub dataset: String,
    pub model: String,
    pub reference: String,
    pub artifacts: Vec<String>,
}

fn read_single_grid(path: &Path, prerequisite: &str) -> Result<Grid> {
    if !path.is_file() {
        return Err(Error::Manifest(format!(
            "missing {}; run `fairscope {prerequisite}` first",
            path.display()
        )));
    }
    let mut maps = read_amap_archive(&read_file(path)?[..])?;
    if maps.len() != 1 {
        return Err(Error::Manifest(format!("{} should hold exactly one map", path.display())));
    }
    Ok(maps.remove(0).into_grid())
}

fn span<'a>(grids: impl IntoIterator<Item = &'a Grid>) -> (f64, f64) {
    grids.into_iter().fold((0.0f64, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g.min()), hi.max(g.max())))
}

/// Renders the figure bundle from `stats` (and `fairness`, when scores are
/// configured) outputs. Heatmap panels of one kind share a value range
/// across every group in the report.
pub fn run_report(m: &CohortManifest, cfg: &RunConfig) -> Result<ReportIndex> {
    cfg.validate()?;
    let out = cfg.output_dir(m);
    let stats = stats_dir(&out);
    let mut mam = BTreeMap::new();
    let mut amv = BTreeMap::new();
    for def in &m.cohorts {
        mam.insert(def.label.clone(), read_single_grid(&stats.join(file_name(m, "mam", &def.label, "amap")), "stats")?);
        amv.insert(def.label.clone(), read_single_grid(&stats.join(file_name(m, "amv", &def.label, "amap")), "stats")?);
    }
    let others: Vec<&CohortDef> = m.comparison_cohorts().collect();
    let mut damv = BTreeMap::new();
    for def in &others {
        let pair = pair_label(&def.label, &m.reference);
        let g = read_single_grid(&stats.join(file_name(m, "damv", &pair, "amap")), "stats")?;
        damv.insert(pair, g);
    }
    let fairness = match &m.scores {
        Some(_) => {
            let path = fairness_dir(&out).join(file_name(m, "fairness", "all", "json"));
            if !path.is_file() {
                return Err(Error::Manifest(format!(
                    "missing {}; run `fairscope fairness` first",
                    path.display()
                )));
            }
            Some(serde_json::from_slice::<FairnessReport>(&read_file(&path)?)?)
        }
        None => None,
    };

    let reference = m.reference.as_str();
    let (w, h) = mam[reference].dims();
    let face = match &m.overlay_image {
        Some(p) => {
            let img = load_face_image(&m.resolve(p))?;
            if (img.width(), img.height()) != (w, h) {
                return Err(Error::Shape("overlay image does not match the map size".into()));
            }
            img
        }
        None => ImageTensor::filled(3, h, w, 0.5),
    };
    let base = cfg.render_spec();
    let mam_spec = base.with_range(span(mam.values()));
    let amv_spec = base.with_range(span(amv.values()));
    let damv_spec = base.with_range(span(damv.values()));

    enum Artifact {
        Png(String, Vec<u8>),
        Plot(String, Plot),
    }
    type Task<'a> = Box<dyn Fn() -> Result<Artifact> + Send + Sync + 'a>;
    let mut tasks: Vec<Task> = Vec::new();
    for def in &others {
        let o = def.label.as_str();
        let pair = pair_label(o, reference);
        let name = |panel: &str, ext: &str| file_name(m, panel, &pair, ext);
        let (mr, mo, ar, ao) = (&mam[reference], &mam[o], &amv[reference], &amv[o]);
        let d = &damv[&pair];
        let (face, mam_spec, amv_spec, damv_spec) = (&face, &mam_spec, &amv_spec, &damv_spec);
        let bins = cfg.bins;
        let n = name("mam", "png");
        tasks.push(Box::new(move || Ok(Artifact::Png(n.clone(), render::render_heatmap_row(&[mr, mo], mam_spec)?))));
        let n = name("mam-overlay", "png");
        tasks.push(Box::new(move || Ok(Artifact::Png(n.clone(), render::render_overlay_row(face, &[mr, mo], mam_spec)?))));
        let n = name("mam-hist", "svg");
        let title = format!("MAM values: {o} vs {reference}");
        tasks.push(Box::new(move || {
            let (lo, hi) = span([mr, mo]);
            let (hr, ho) = (value_histogram_in(mr, bins, lo, hi)?, value_histogram_in(mo, bins, lo, hi)?);
            Ok(Artifact::Plot(n.clone(), render::render_histograms(&title, &[(reference, &hr), (o, &ho)])?))
        }));
        let n = name("amv", "png");
        tasks.push(Box::new(move || Ok(Artifact::Png(n.clone(), render::render_heatmap_row(&[ar, ao], amv_spec)?))));
        let n = name("amv-hist", "svg");
        let title = format!("AM-V values: {o} vs {reference}");
        tasks.push(Box::new(move || {
            let (lo, hi) = span([ar, ao]);
            let (hr, ho) = (value_histogram_in(ar, bins, lo, hi)?, value_histogram_in(ao, bins, lo, hi)?);
            Ok(Artifact::Plot(n.clone(), render::render_histograms(&title, &[(reference, &hr), (o, &ho)])?))
        }));
        let n = name("damv", "png");
        tasks.push(Box::new(move || Ok(Artifact::Png(n.clone(), render::render_heatmap(d, damv_spec)?))));
        let n = name("damv-overlay", "png");
        tasks.push(Box::new(move || Ok(Artifact::Png(n.clone(), render::render_overlay(face, d, damv_spec)?))));
        let (nx, ny) = (name("s_x", "svg"), name("s_y", "svg"));
        tasks.push(Box::new(move || {
            let plots = render::render_profiles(
                &compute_spatial_profile(ar, reference),
                &compute_spatial_profile(ao, o),
            )?;
            Ok(Artifact::Plot(nx.clone(), plots.s_x))
        }));
        tasks.push(Box::new(move || {
            let plots = render::render_profiles(
                &compute_spatial_profile(ar, reference),
                &compute_spatial_profile(ao, o),
            )?;
            Ok(Artifact::Plot(ny.clone(), plots.s_y))
        }));
    }
    if let Some(report) = &fairness {
        let n = file_name(m, "fdr", "all", "svg");
        tasks.push(Box::new(move || Ok(Artifact::Plot(n.clone(), render::render_fdr_curve(report)?))));
    }

    let artifacts: Vec<Artifact> = cfg.pool()?.install(|| tasks.par_iter().map(|t| t()).collect::<Result<_>>())?;
    let dir = out.join("report");
    let mut names = Vec::new();
    for a in &artifacts {
        match a {
            Artifact::Png(name, bytes) => {
                write_file(&dir.join(name), bytes)?;
                names.push(name.clone());
            }
            Artifact::Plot(name, plot) => {
                write_plot(&dir, name, plot)?;
                names.push(name.clone());
                names.push(name.replace(".svg", ".csv"));
            }
        }
    }
    names.sort();
    let index = ReportIndex {
        dataset: m.dataset.clone(),
        model: m.model.clone(),
        reference: m.reference.clone(),
        artifacts: names,
    };
    write_file(&dir.join("index.json"), &to_json(&index)?)?;
    Ok(index)
}
