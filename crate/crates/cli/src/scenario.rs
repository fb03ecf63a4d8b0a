//! Scenario files: a TOML description of one imaging experiment.
//!
//! A scenario names the frequency sweep, the imaging region, the dense
//! candidate topology, synthesis settings, optional comparison baselines,
//! scenes to image, and output options. Parsing is strict: unknown keys are
//! rejected with the offending line number, and invalid values are reported
//! with a dotted field path (for example `synthesis.select_top_n`).
//!
//! Distances are meters, frequencies gigahertz, angles degrees. The aperture
//! sits in the plane y = 0; scenes live in the image plane y = r0.

use std::fs;
use std::path::{Path, PathBuf};

use nfsas::{
    Apodization, ArrayTopology, Complex64, Element, Epsilon, FrequencyGrid, ImageGrid,
    OptimizeOrder, Point3, ResolutionSpec, SamplingGrid, Scatterer, Scene, Selection, Side,
    SynthesisConfig, sampling_grid, subtended_angles,
};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::formats;
use crate::generators::{self, Axis};

const REQUIRED_SECTIONS: [&str; 5] = ["frequency", "region", "topology", "synthesis", "output"];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    frequency: FrequencySec,
    region: RegionSec,
    topology: TopologySec,
    #[serde(default)]
    reference: ReferenceSec,
    synthesis: SynthesisSec,
    comparison: Option<ComparisonSec>,
    #[serde(default, rename = "scene")]
    scenes: Vec<SceneSec>,
    output: OutputSec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrequencySec {
    f_start_ghz: Option<f64>,
    f_stop_ghz: Option<f64>,
    n_steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionSec {
    r0_m: Option<f64>,
    d_x_m: Option<f64>,
    #[serde(default)]
    d_z_m: f64,
    beamwidth_x_deg: Option<f64>,
    beamwidth_z_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySec {
    tx: GeneratorSec,
    rx: GeneratorSec,
}

/// One side's generator. `kind` selects the layout; the other fields are
/// kind-specific and anything irrelevant to the chosen kind is rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorSec {
    kind: Option<String>,
    count: Option<usize>,
    pitch_m: Option<f64>,
    axis: Option<String>,
    #[serde(default)]
    center_x_m: f64,
    #[serde(default)]
    center_z_m: f64,
    nx: Option<usize>,
    nz: Option<usize>,
    spacing_m: Option<f64>,
    path: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceSec {
    apodization: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthesisSec {
    epsilon_rel: Option<f64>,
    epsilon_abs: Option<f64>,
    reweight_iterations: Option<usize>,
    reweight_delta: Option<f64>,
    select_top_n: Option<usize>,
    select_threshold: Option<f64>,
    #[serde(default)]
    uniform_selected_weights: bool,
    order: Option<String>,
    rounds: Option<usize>,
    max_iterations: Option<usize>,
    tolerance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComparisonSec {
    equally_spaced_rx: Option<EqSec>,
    equally_spaced_tx: Option<EqSec>,
    random_rx: Option<RandSec>,
    random_tx: Option<RandSec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EqSec {
    nx: Option<usize>,
    #[serde(default = "one")]
    nz: usize,
    pitch_m: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandSec {
    count: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneSec {
    name: Option<String>,
    points: Option<Vec<PointSec>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointSec {
    x_m: Option<f64>,
    #[serde(default)]
    z_m: f64,
    #[serde(default = "unit")]
    reflectivity: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSec {
    dir: Option<String>,
    dynamic_range_db: Option<f64>,
    display_pitch_m: Option<f64>,
}

/// A fully validated scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// File stem, used in report headers.
    pub name: String,
    pub freqs: FrequencyGrid,
    /// Dense candidate topology; synthesis thins this out.
    pub full: ArrayTopology,
    pub r0: f64,
    pub d_x: f64,
    pub d_z: f64,
    /// Optional caps on the aperture angles, radians.
    pub beamwidth_x: Option<f64>,
    pub beamwidth_z: Option<f64>,
    pub apodization: Apodization,
    pub cfg: SynthesisConfig,
    pub order: OptimizeOrder,
    pub rounds: usize,
    pub comparison: Comparison,
    pub scenes: Vec<NamedScene>,
    pub out_dir: PathBuf,
    pub dynamic_range_db: f64,
    pub display_pitch: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NamedScene {
    pub name: String,
    pub scene: Scene,
}

#[derive(Debug, Clone, Default)]
pub struct Comparison {
    pub eq_rx: Option<EqSpec>,
    pub eq_tx: Option<EqSpec>,
    pub random_rx: Option<RandSpec>,
    pub random_tx: Option<RandSpec>,
}

#[derive(Debug, Clone, Copy)]
pub struct EqSpec {
    pub nx: usize,
    pub nz: usize,
    pub pitch: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RandSpec {
    pub count: usize,
    pub seed: u64,
}

fn line_of(text: &str, offset: usize) -> usize {
    1 + text[..offset.min(text.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
}

fn toml_error(path: &Path, text: &str, e: toml::de::Error) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    }
}

fn req<T>(value: Option<T>, field: &str) -> Result<T> {
    value.ok_or_else(|| CliError::validation(field, "missing required value"))
}

fn positive(value: f64, field: &str) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CliError::validation(
            field,
            format!("must be positive and finite, got {value}"),
        ))
    }
}

/// Load and validate a scenario file.
pub fn load(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    from_str(&text, path)
}

/// Parse scenario text. `path` provides error context and the base directory
/// for `kind = "file"` topology references.
pub fn from_str(text: &str, path: &Path) -> Result<Scenario> {
    let table: toml::Table = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
    let mut missing: Vec<String> = REQUIRED_SECTIONS
        .iter()
        .filter(|s| !table.contains_key(**s))
        .map(|s| s.to_string())
        .collect();
    if let Some(topo) = table.get("topology").and_then(|v| v.as_table()) {
        for side in ["tx", "rx"] {
            if !topo.contains_key(side) {
                missing.push(format!("topology.{side}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(CliError::validation(
            "scenario",
            format!("missing required sections: {}", missing.join(", ")),
        ));
    }
    let file: ScenarioFile = toml::from_str(text).map_err(|e| toml_error(path, text, e))?;
    validate(file, path)
}

fn validate(file: ScenarioFile, path: &Path) -> Result<Scenario> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());

    let f_start = positive(
        req(file.frequency.f_start_ghz, "frequency.f_start_ghz")?,
        "frequency.f_start_ghz",
    )?;
    let f_stop = positive(
        req(file.frequency.f_stop_ghz, "frequency.f_stop_ghz")?,
        "frequency.f_stop_ghz",
    )?;
    let n_steps = req(file.frequency.n_steps, "frequency.n_steps")?;
    let freqs = FrequencyGrid::new(f_start * 1e9, f_stop * 1e9, n_steps)
        .map_err(|e| CliError::validation("frequency", e.to_string()))?;

    let r0 = positive(req(file.region.r0_m, "region.r0_m")?, "region.r0_m")?;
    let d_x = positive(req(file.region.d_x_m, "region.d_x_m")?, "region.d_x_m")?;
    let d_z = file.region.d_z_m;
    if !(d_z.is_finite() && d_z >= 0.0) {
        return Err(CliError::validation(
            "region.d_z_m",
            format!("must be zero or positive, got {d_z}"),
        ));
    }
    let beamwidth = |deg: Option<f64>, field: &str| -> Result<Option<f64>> {
        match deg {
            None => Ok(None),
            Some(v) => {
                if v.is_finite() && v > 0.0 && v <= 180.0 {
                    Ok(Some(v.to_radians()))
                } else {
                    Err(CliError::validation(
                        field,
                        format!("must be in (0, 180] degrees, got {v}"),
                    ))
                }
            }
        }
    };
    let beamwidth_x = beamwidth(file.region.beamwidth_x_deg, "region.beamwidth_x_deg")?;
    let beamwidth_z = beamwidth(file.region.beamwidth_z_deg, "region.beamwidth_z_deg")?;

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let tx = build_side(&file.topology.tx, Side::Tx, base)?;
    let rx = build_side(&file.topology.rx, Side::Rx, base)?;
    let full =
        ArrayTopology::new(tx, rx).map_err(|e| CliError::validation("topology", e.to_string()))?;

    let apodization = match file.reference.apodization.as_deref() {
        None | Some("hamming") => Apodization::Hamming,
        Some("uniform") => Apodization::Uniform,
        Some(other) => {
            return Err(CliError::validation(
                "reference.apodization",
                format!("unknown window {other:?} (expected \"uniform\" or \"hamming\")"),
            ))
        }
    };

    let (cfg, order, rounds) = build_synthesis(&file.synthesis)?;

    let comparison = match file.comparison {
        None => Comparison::default(),
        Some(sec) => build_comparison(sec, &full)?,
    };

    let mut scenes = Vec::with_capacity(file.scenes.len());
    for (i, sec) in file.scenes.iter().enumerate() {
        scenes.push(build_scene(sec, i, r0)?);
    }
    for (i, a) in scenes.iter().enumerate() {
        if scenes[..i].iter().any(|b| b.name == a.name) {
            return Err(CliError::validation(
                "scene.name",
                format!("duplicate scene name {:?}", a.name),
            ));
        }
    }

    let dir = req(file.output.dir, "output.dir")?;
    if dir.is_empty() {
        return Err(CliError::validation("output.dir", "must not be empty"));
    }
    let dynamic_range_db = match file.output.dynamic_range_db {
        None => 15.0,
        Some(v) => positive(v, "output.dynamic_range_db")?,
    };
    let display_pitch = match file.output.display_pitch_m {
        None => None,
        Some(v) => Some(positive(v, "output.display_pitch_m")?),
    };

    Ok(Scenario {
        name,
        freqs,
        full,
        r0,
        d_x,
        d_z,
        beamwidth_x,
        beamwidth_z,
        apodization,
        cfg,
        order,
        rounds,
        comparison,
        scenes,
        out_dir: PathBuf::from(dir),
        dynamic_range_db,
        display_pitch,
    })
}

/// Reject generator fields that the chosen kind does not read, so typos in a
/// scenario fail loudly instead of being silently ignored.
fn forbid_unused(sec: &GeneratorSec, kind: &str, side: Side) -> Result<()> {
    let unused: &[(&str, bool)] = &[
        ("count", sec.count.is_some()),
        ("pitch_m", sec.pitch_m.is_some()),
        ("axis", sec.axis.is_some()),
        ("nx", sec.nx.is_some()),
        ("nz", sec.nz.is_some()),
        ("spacing_m", sec.spacing_m.is_some()),
        ("path", sec.path.is_some()),
    ];
    let allowed: &[&str] = match kind {
        "linear" => &["count", "pitch_m", "axis"],
        "planar" => &["nx", "nz", "pitch_m"],
        "corners" => &["spacing_m"],
        "file" => &["path"],
        _ => &[],
    };
    for (name, present) in unused {
        if *present && !allowed.contains(name) {
            return Err(CliError::validation(
                format!("topology.{side}.{name}"),
                format!("not used by kind {kind:?}"),
            ));
        }
    }
    Ok(())
}

fn build_side(sec: &GeneratorSec, side: Side, base: &Path) -> Result<Vec<Element>> {
    let field = |name: &str| format!("topology.{side}.{name}");
    let kind = req(sec.kind.as_deref(), &field("kind"))?;
    forbid_unused(sec, kind, side)?;
    match kind {
        "linear" => {
            let count = req(sec.count, &field("count"))?;
            let pitch = req(sec.pitch_m, &field("pitch_m"))?;
            let axis = match sec.axis.as_deref() {
                None | Some("x") => Axis::X,
                Some("z") => Axis::Z,
                Some(other) => {
                    return Err(CliError::validation(
                        field("axis"),
                        format!("unknown axis {other:?} (expected \"x\" or \"z\")"),
                    ))
                }
            };
            generators::linear(count, pitch, axis, sec.center_x_m, sec.center_z_m)
        }
        "planar" => {
            let nx = req(sec.nx, &field("nx"))?;
            let nz = req(sec.nz, &field("nz"))?;
            let pitch = req(sec.pitch_m, &field("pitch_m"))?;
            generators::planar(nx, nz, pitch, sec.center_x_m, sec.center_z_m)
        }
        "corners" => {
            let spacing = req(sec.spacing_m, &field("spacing_m"))?;
            if sec.center_x_m != 0.0 || sec.center_z_m != 0.0 {
                let sq = generators::corners(spacing)?;
                return sq
                    .into_iter()
                    .map(|e| {
                        Ok(Element::at(
                            Point3::new(
                                e.position.x + sec.center_x_m,
                                0.0,
                                e.position.z + sec.center_z_m,
                            )
                            .map_err(CliError::Lib)?,
                        ))
                    })
                    .collect();
            }
            generators::corners(spacing)
        }
        "file" => {
            let rel = req(sec.path.as_deref(), &field("path"))?;
            let topo = formats::read_topology(&base.join(rel))?;
            Ok(topo.side(side).to_vec())
        }
        other => Err(CliError::validation(
            field("kind"),
            format!(
                "unknown generator {other:?} (expected \"linear\", \"planar\", \"corners\" or \"file\")"
            ),
        )),
    }
}

fn build_synthesis(sec: &SynthesisSec) -> Result<(SynthesisConfig, OptimizeOrder, usize)> {
    let epsilon = match (sec.epsilon_rel, sec.epsilon_abs) {
        (Some(_), Some(_)) => {
            return Err(CliError::validation(
                "synthesis.epsilon_rel",
                "epsilon_rel and epsilon_abs are mutually exclusive",
            ))
        }
        (Some(eta), None) => Epsilon::RelativeToRef(positive(eta, "synthesis.epsilon_rel")?),
        (None, Some(eps)) => Epsilon::Absolute(positive(eps, "synthesis.epsilon_abs")?),
        (None, None) => Epsilon::RelativeToRef(1e-2),
    };
    let selection = match (sec.select_top_n, sec.select_threshold) {
        (Some(_), Some(_)) => {
            return Err(CliError::validation(
                "synthesis.select_top_n",
                "select_top_n and select_threshold are mutually exclusive",
            ))
        }
        (Some(n), None) => Selection::TopN(n),
        (None, Some(tau)) => Selection::Threshold(positive(tau, "synthesis.select_threshold")?),
        (None, None) => Selection::Threshold(0.01),
    };
    let tolerance = match sec.tolerance {
        None => 1e-6,
        Some(v) => positive(v, "synthesis.tolerance")?,
    };
    let cfg = SynthesisConfig {
        epsilon,
        reweight_iterations: sec.reweight_iterations.unwrap_or(3),
        reweight_delta: sec.reweight_delta,
        selection,
        uniform_selected_weights: sec.uniform_selected_weights,
        max_iterations: sec.max_iterations.unwrap_or(4000),
        primal_tol: tolerance,
        dual_tol: tolerance,
    };
    cfg.validate()
        .map_err(|e| CliError::validation("synthesis", e.to_string()))?;
    let order = match sec.order.as_deref() {
        None | Some("rx_first") => OptimizeOrder::RxFirst,
        Some("tx_first") => OptimizeOrder::TxFirst,
        Some(other) => {
            return Err(CliError::validation(
                "synthesis.order",
                format!("unknown order {other:?} (expected \"rx_first\" or \"tx_first\")"),
            ))
        }
    };
    let rounds = sec.rounds.unwrap_or(1);
    if rounds < 1 {
        return Err(CliError::validation(
            "synthesis.rounds",
            "must be at least 1",
        ));
    }
    Ok((cfg, order, rounds))
}

fn build_comparison(sec: ComparisonSec, full: &ArrayTopology) -> Result<Comparison> {
    let eq = |s: Option<EqSec>, field: &str| -> Result<Option<EqSpec>> {
        match s {
            None => Ok(None),
            Some(e) => {
                let nx = req(e.nx, &format!("comparison.{field}.nx"))?;
                let pitch = positive(
                    req(e.pitch_m, &format!("comparison.{field}.pitch_m"))?,
                    &format!("comparison.{field}.pitch_m"),
                )?;
                if nx == 0 || e.nz == 0 {
                    return Err(CliError::validation(
                        format!("comparison.{field}.nx"),
                        "grid dimensions must be at least 1",
                    ));
                }
                Ok(Some(EqSpec {
                    nx,
                    nz: e.nz,
                    pitch,
                }))
            }
        }
    };
    let rand = |s: Option<RandSec>, field: &str, limit: usize| -> Result<Option<RandSpec>> {
        match s {
            None => Ok(None),
            Some(r) => {
                let count = req(r.count, &format!("comparison.{field}.count"))?;
                let seed = req(r.seed, &format!("comparison.{field}.seed"))?;
                if count == 0 || count > limit {
                    return Err(CliError::validation(
                        format!("comparison.{field}.count"),
                        format!("must be between 1 and {limit}"),
                    ));
                }
                Ok(Some(RandSpec { count, seed }))
            }
        }
    };
    Ok(Comparison {
        eq_rx: eq(sec.equally_spaced_rx, "equally_spaced_rx")?,
        eq_tx: eq(sec.equally_spaced_tx, "equally_spaced_tx")?,
        random_rx: rand(sec.random_rx, "random_rx", full.rx().len())?,
        random_tx: rand(sec.random_tx, "random_tx", full.tx().len())?,
    })
}

fn build_scene(sec: &SceneSec, index: usize, r0: f64) -> Result<NamedScene> {
    let ctx = format!("scene[{index}]");
    let name = req(sec.name.clone(), &format!("{ctx}.name"))?;
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(CliError::validation(
            format!("{ctx}.name"),
            format!("{name:?} is not a valid scene name (use letters, digits, _ or -)"),
        ));
    }
    let points = req(sec.points.as_ref(), &format!("{ctx}.points"))?;
    if points.is_empty() {
        return Err(CliError::validation(
            format!("{ctx}.points"),
            "must contain at least one point",
        ));
    }
    let mut scatterers = Vec::with_capacity(points.len());
    for (j, p) in points.iter().enumerate() {
        let x = req(p.x_m, &format!("{ctx}.points[{j}].x_m"))?;
        if !(x.is_finite() && p.z_m.is_finite() && p.reflectivity.is_finite()) {
            return Err(CliError::validation(
                format!("{ctx}.points[{j}]"),
                "coordinates and reflectivity must be finite",
            ));
        }
        scatterers.push(Scatterer {
            position: Point3::new(x, r0, p.z_m).map_err(CliError::Lib)?,
            reflectivity: Complex64::new(p.reflectivity, 0.0),
        });
    }
    let scene =
        Scene::new(scatterers).map_err(|e| CliError::validation(format!("{ctx}.points"), e.to_string()))?;
    Ok(NamedScene { name, scene })
}

impl Scenario {
    /// Aperture angles from the dense topology, optionally capped by the
    /// configured beamwidths, combined with the band center wavelength.
    pub fn resolution_spec(&self) -> ResolutionSpec {
        let (tx_x, tx_z) = subtended_angles(self.full.tx(), self.r0);
        let (rx_x, rx_z) = subtended_angles(self.full.rx(), self.r0);
        let cap = |theta: f64, limit: Option<f64>| match limit {
            Some(l) => theta.min(l),
            None => theta,
        };
        ResolutionSpec {
            theta_x_tx: cap(tx_x, self.beamwidth_x),
            theta_x_rx: cap(rx_x, self.beamwidth_x),
            theta_z_tx: cap(tx_z, self.beamwidth_z),
            theta_z_rx: cap(rx_z, self.beamwidth_z),
            lambda_c: self.freqs.center_wavelength(),
            d_x: self.d_x,
            d_z: self.d_z,
        }
    }

    /// Reference grid at the resolution pitch.
    pub fn sampling(&self) -> Result<SamplingGrid> {
        Ok(sampling_grid(&self.resolution_spec(), self.r0)?)
    }

    /// Fine grid for rendered images: wavelength/8 pixels for line regions,
    /// wavelength/4 for planar ones, unless the scenario fixes a pitch.
    /// Pixel counts are forced odd so a pixel sits exactly on the region
    /// center.
    pub fn display_grid(&self) -> Result<ImageGrid> {
        let lambda = self.freqs.center_wavelength();
        let planar = self.d_z > 0.0;
        let pitch = self
            .display_pitch
            .unwrap_or(if planar { lambda / 4.0 } else { lambda / 8.0 });
        let count = |extent: f64| {
            let n = (extent / pitch).floor() as usize + 1;
            if n.is_multiple_of(2) {
                n + 1
            } else {
                n
            }
        };
        let n_x = count(self.d_x);
        let n_z = if planar { count(self.d_z) } else { 1 };
        Ok(ImageGrid::rect(self.r0, 0.0, 0.0, n_x, n_z, pitch, pitch)?)
    }

    pub fn scene(&self, name: &str) -> Option<&NamedScene> {
        self.scenes.iter().find(|s| s.name == name)
    }
}
