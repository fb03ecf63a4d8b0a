//! Command execution: turns a validated scenario plus a subcommand into
//! files on disk.
//!
//! Outputs are deterministic: reports carry no timestamps, random baselines
//! are seeded, and image formation is bit-stable across thread counts, so a
//! rerun with the same scenario and seed reproduces every file byte for
//! byte. The synthesized topology is cached in `synthesized.csv`; commands
//! other than `synthesize` reuse it when present instead of solving again.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nfsas::{
    compare_images, image_point_scene, psf_analyze, resolution, synthesize_sequential,
    ArrayTopology, ImageField, ImageGrid, PassDiagnostics, PsfReport, Scene, Side,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::formats;
use crate::generators;
use crate::scenario::{NamedScene, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synthesize,
    Image,
    Psf,
    Metrics,
    Compare,
}

/// Command-line overrides applied on top of the scenario's `[output]` and
/// `[comparison]` settings.
#[derive(Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    /// Replaces the seed of every random baseline.
    pub seed: Option<u64>,
    pub dynamic_range_db: Option<f64>,
}

pub fn run(scn: &Scenario, command: Command, ov: &Overrides) -> Result<()> {
    let out_dir = ov.out.clone().unwrap_or_else(|| scn.out_dir.clone());
    fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let dr = ov.dynamic_range_db.unwrap_or(scn.dynamic_range_db);
    match command {
        Command::Synthesize => {
            synthesize(scn, &out_dir, true)?;
            Ok(())
        }
        Command::Image => image_command(scn, &out_dir, ov),
        Command::Psf => psf_command(scn, &out_dir, ov),
        Command::Metrics => metrics_command(scn, &out_dir, ov, dr),
        Command::Compare => compare_command(scn, &out_dir, ov, dr),
    }
}

#[derive(Serialize)]
struct PassJson {
    pass: usize,
    side: String,
    candidates: usize,
    selected: usize,
    residual_sq: f64,
    epsilon: f64,
    residual_ratio: f64,
    l1_norm: f64,
    iterations: usize,
    converged: bool,
}

impl PassJson {
    fn from(d: &PassDiagnostics) -> Self {
        PassJson {
            pass: d.pass,
            side: d.side.to_string(),
            candidates: d.candidates,
            selected: d.selected,
            residual_sq: d.residual_sq,
            epsilon: d.epsilon,
            residual_ratio: d.residual_sq / d.epsilon,
            l1_norm: d.l1_norm,
            iterations: d.iterations,
            converged: d.converged,
        }
    }
}

#[derive(Serialize)]
struct SynthesisReport {
    scenario: String,
    resolution_x_m: f64,
    resolution_z_m: f64,
    grid_m_x: usize,
    grid_m_z: usize,
    full_tx: usize,
    full_rx: usize,
    selected_tx: usize,
    selected_rx: usize,
    element_reduction_percent: f64,
    passes: Vec<PassJson>,
}

fn element_reduction_percent(full: &ArrayTopology, sparse: &ArrayTopology) -> f64 {
    let all = (full.n_tx() + full.n_rx()) as f64;
    let kept = (sparse.n_tx() + sparse.n_rx()) as f64;
    100.0 * (all - kept) / all
}

/// Run the synthesis program, or load its cached result when `force` is
/// false and `synthesized.csv` already exists.
fn synthesize(scn: &Scenario, out_dir: &Path, force: bool) -> Result<ArrayTopology> {
    let csv = out_dir.join("synthesized.csv");
    if !force && csv.exists() {
        log::info!("reusing synthesized topology {}", csv.display());
        return formats::read_topology(&csv);
    }
    let sampling = scn.sampling()?;
    let (dx, dz) = resolution(&scn.resolution_spec())?;
    log::info!(
        "synthesis grid {} x {} at ({:.4} m, {:.4} m)",
        sampling.m_x(),
        sampling.m_z(),
        dx,
        dz
    );
    let t0 = Instant::now();
    let (topo, passes) = synthesize_sequential(
        &scn.full,
        &sampling,
        &scn.freqs,
        scn.apodization,
        &scn.cfg,
        scn.order,
        scn.rounds,
    )?;
    log::info!(
        "synthesis finished in {:.1} s: {} tx + {} rx of {} + {}",
        t0.elapsed().as_secs_f64(),
        topo.n_tx(),
        topo.n_rx(),
        scn.full.n_tx(),
        scn.full.n_rx()
    );
    formats::write_topology(&csv, &topo)?;
    let report = SynthesisReport {
        scenario: scn.name.clone(),
        resolution_x_m: dx,
        resolution_z_m: dz,
        grid_m_x: sampling.m_x(),
        grid_m_z: sampling.m_z(),
        full_tx: scn.full.n_tx(),
        full_rx: scn.full.n_rx(),
        selected_tx: topo.n_tx(),
        selected_rx: topo.n_rx(),
        element_reduction_percent: element_reduction_percent(&scn.full, &topo),
        passes: passes.iter().map(PassJson::from).collect(),
    };
    formats::write_json(&out_dir.join("synthesis.json"), &report)?;
    Ok(topo)
}

/// All topologies a command can render: the dense array, the synthesized
/// one, and any configured baselines.
fn variants(
    scn: &Scenario,
    out_dir: &Path,
    ov: &Overrides,
) -> Result<Vec<(String, ArrayTopology)>> {
    let mut list = vec![
        ("full".to_string(), scn.full.clone()),
        ("synthesized".to_string(), synthesize(scn, out_dir, false)?),
    ];
    let cmp = &scn.comparison;
    if cmp.eq_rx.is_some() || cmp.eq_tx.is_some() {
        let mut topo = scn.full.clone();
        if let Some(eq) = cmp.eq_rx {
            let side = generators::equally_spaced(scn.full.rx(), eq.nx, eq.nz, eq.pitch)?;
            topo = topo.with_side(Side::Rx, side)?;
        }
        if let Some(eq) = cmp.eq_tx {
            let side = generators::equally_spaced(scn.full.tx(), eq.nx, eq.nz, eq.pitch)?;
            topo = topo.with_side(Side::Tx, side)?;
        }
        list.push(("equally_spaced".to_string(), topo));
    }
    if cmp.random_rx.is_some() || cmp.random_tx.is_some() {
        let mut topo = scn.full.clone();
        if let Some(r) = cmp.random_rx {
            let seed = ov.seed.unwrap_or(r.seed);
            let side = generators::random_subset(scn.full.rx(), r.count, seed)?;
            topo = topo.with_side(Side::Rx, side)?;
        }
        if let Some(r) = cmp.random_tx {
            let seed = ov.seed.unwrap_or(r.seed);
            let side = generators::random_subset(scn.full.tx(), r.count, seed)?;
            topo = topo.with_side(Side::Tx, side)?;
        }
        list.push(("random".to_string(), topo));
    }
    Ok(list)
}

fn require_scenes(scn: &Scenario) -> Result<&[NamedScene]> {
    if scn.scenes.is_empty() {
        return Err(CliError::validation(
            "scene",
            "this command needs at least one [[scene]] block",
        ));
    }
    Ok(&scn.scenes)
}

fn render(
    scene: &Scene,
    topo: &ArrayTopology,
    scn: &Scenario,
    grid: &ImageGrid,
) -> Result<ImageField> {
    Ok(image_point_scene(scene, topo, &scn.freqs, grid)?)
}

fn write_image_pair(
    out_dir: &Path,
    scene: &str,
    variant: &str,
    image: &ImageField,
) -> Result<()> {
    formats::write_image(&out_dir.join(format!("image_{scene}_{variant}.nfim")), image)?;
    formats::write_magnitude_csv(&out_dir.join(format!("image_{scene}_{variant}.csv")), image)
}

fn image_command(scn: &Scenario, out_dir: &Path, ov: &Overrides) -> Result<()> {
    let scenes = require_scenes(scn)?;
    let grid = scn.display_grid()?;
    for (variant, topo) in variants(scn, out_dir, ov)? {
        for ns in scenes {
            let img = render(&ns.scene, &topo, scn, &grid)?;
            write_image_pair(out_dir, &ns.name, &variant, &img)?;
            log::info!("imaged scene {:?} with {} elements ({variant})", ns.name, topo.n_tx() + topo.n_rx());
        }
    }
    Ok(())
}

fn opt_db(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Serialize)]
struct SidelobeJson {
    x_m: f64,
    z_m: f64,
    level_db: f64,
}

#[derive(Serialize)]
struct PsfJson {
    topology: String,
    scene: String,
    peak_x_m: f64,
    peak_z_m: f64,
    peak_offset_m: f64,
    mainlobe_width_x_m: Option<f64>,
    mainlobe_width_z_m: Option<f64>,
    peak_sidelobe_level_db: Option<f64>,
    grating_lobe_level_db: Option<f64>,
    sidelobes: Vec<SidelobeJson>,
}

impl PsfJson {
    fn from(topology: &str, scene: &str, r: &PsfReport) -> Self {
        PsfJson {
            topology: topology.to_string(),
            scene: scene.to_string(),
            peak_x_m: r.peak_position.x,
            peak_z_m: r.peak_position.z,
            peak_offset_m: r.peak_offset_m,
            mainlobe_width_x_m: r.mainlobe_width_x,
            mainlobe_width_z_m: r.mainlobe_width_z,
            peak_sidelobe_level_db: opt_db(r.peak_sidelobe_level_db),
            grating_lobe_level_db: opt_db(r.grating_lobe_level_db),
            sidelobes: r
                .sidelobes
                .iter()
                .map(|s| SidelobeJson {
                    x_m: s.position.x,
                    z_m: s.position.z,
                    level_db: s.level_db,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct PsfDoc {
    scenario: String,
    reports: Vec<PsfJson>,
}

fn single_point(ns: &NamedScene) -> Result<nfsas::Point3> {
    match ns.scene.scatterers() {
        [only] => Ok(only.position),
        _ => Err(CliError::validation(
            format!("scene.{}", ns.name),
            "point-spread analysis needs exactly one scatterer",
        )),
    }
}

fn psf_command(scn: &Scenario, out_dir: &Path, ov: &Overrides) -> Result<()> {
    let scenes = require_scenes(scn)?;
    let grid = scn.display_grid()?;
    let mut reports = Vec::new();
    for (variant, topo) in variants(scn, out_dir, ov)? {
        for ns in scenes {
            let target = single_point(ns)?;
            let img = render(&ns.scene, &topo, scn, &grid)?;
            let report = psf_analyze(&img, target)?;
            log::info!(
                "psf {variant}/{}: width_x {:?}, psl {:.2} dB",
                ns.name,
                report.mainlobe_width_x,
                report.peak_sidelobe_level_db
            );
            reports.push(PsfJson::from(&variant, &ns.name, &report));
        }
    }
    formats::write_json(
        &out_dir.join("psf.json"),
        &PsfDoc {
            scenario: scn.name.clone(),
            reports,
        },
    )
}

#[derive(Serialize)]
struct MetricsEntry {
    topology: String,
    scene: String,
    rmse: f64,
    psnr_db: f64,
    ssim: f64,
    entropy_bits: f64,
}

#[derive(Serialize)]
struct MetricsDoc {
    scenario: String,
    baseline: String,
    dynamic_range_db: f64,
    entries: Vec<MetricsEntry>,
}

fn metrics_entries(
    scn: &Scenario,
    list: &[(String, ArrayTopology)],
    dr: f64,
) -> Result<Vec<MetricsEntry>> {
    let scenes = require_scenes(scn)?;
    let grid = scn.display_grid()?;
    let mut entries = Vec::new();
    for ns in scenes {
        let baseline = render(&ns.scene, &scn.full, scn, &grid)?;
        for (variant, topo) in list {
            if variant == "full" {
                continue;
            }
            let img = render(&ns.scene, topo, scn, &grid)?;
            let m = compare_images(&img, &baseline, dr)?;
            entries.push(MetricsEntry {
                topology: variant.clone(),
                scene: ns.name.clone(),
                rmse: m.rmse,
                psnr_db: m.psnr_db,
                ssim: m.ssim,
                entropy_bits: m.entropy_bits,
            });
        }
    }
    Ok(entries)
}

fn metrics_command(scn: &Scenario, out_dir: &Path, ov: &Overrides, dr: f64) -> Result<()> {
    let list = variants(scn, out_dir, ov)?;
    let entries = metrics_entries(scn, &list, dr)?;
    formats::write_json(
        &out_dir.join("metrics.json"),
        &MetricsDoc {
            scenario: scn.name.clone(),
            baseline: "full".into(),
            dynamic_range_db: dr,
            entries,
        },
    )
}

#[derive(Serialize)]
struct ElementsEntry {
    topology: String,
    tx: usize,
    rx: usize,
    element_reduction_percent: f64,
}

#[derive(Serialize)]
struct CompareDoc {
    scenario: String,
    dynamic_range_db: f64,
    elements: Vec<ElementsEntry>,
    psf: Vec<PsfJson>,
    metrics: Vec<MetricsEntry>,
}

/// Full side-by-side report: every topology imaged over every scene, PSF
/// characterization where scenes are single points, and display metrics
/// against the dense array.
fn compare_command(scn: &Scenario, out_dir: &Path, ov: &Overrides, dr: f64) -> Result<()> {
    let scenes = require_scenes(scn)?;
    let grid = scn.display_grid()?;
    let list = variants(scn, out_dir, ov)?;

    let mut psf = Vec::new();
    for (variant, topo) in &list {
        for ns in scenes {
            let img = render(&ns.scene, topo, scn, &grid)?;
            write_image_pair(out_dir, &ns.name, variant, &img)?;
            if let [only] = ns.scene.scatterers() {
                psf.push(PsfJson::from(variant, &ns.name, &psf_analyze(&img, only.position)?));
            }
        }
    }
    let metrics = metrics_entries(scn, &list, dr)?;
    let elements = list
        .iter()
        .map(|(name, topo)| ElementsEntry {
            topology: name.clone(),
            tx: topo.n_tx(),
            rx: topo.n_rx(),
            element_reduction_percent: element_reduction_percent(&scn.full, topo),
        })
        .collect();
    formats::write_json(
        &out_dir.join("compare.json"),
        &CompareDoc {
            scenario: scn.name.clone(),
            dynamic_range_db: dr,
            elements,
            psf,
            metrics,
        },
    )
}
