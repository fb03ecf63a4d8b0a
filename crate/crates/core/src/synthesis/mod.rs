//! Sparse-array synthesis: resolution-driven sampling grids, reference
//! patterns from a dense apodized array, the l1 weight-selection program,
//! iterative reweighting, sequential tx/rx alternation, and the
//! subset-residual check backing the synthesis guarantee.
//!
//! The synthesis loop fits a sparse weight vector w so that the candidate
//! array's image of the reference scene matches the dense array's image
//! E_ref within a residual budget epsilon, while minimizing the l1 norm
//! of w. Elements whose weights survive selection form the synthesized
//! array.

mod solver;

pub use solver::FEASIBILITY_SLACK;

use crate::imaging::{bp_image, build_sensing_matrix};
use crate::scatter::forward_scatter;
use crate::{
    ArrayTopology, Complex64, Element, Error, FrequencyGrid, ImageGrid, Point3, Result, Scene,
    ScatteredField, SensingMatrix, Side,
};

/// Angle floor for degenerate apertures (collinear or single elements),
/// radians. Keeps the resolution formulas finite; the affected axis then
/// contributes essentially nothing to resolution.
pub const MIN_APERTURE_ANGLE: f64 = 1e-6;

/// Relative magnitude threshold used when counting the support of a
/// weight vector.
pub const SUPPORT_REL_THRESHOLD: f64 = 1e-6;

/// Aperture angles and region extents feeding the resolution formulas.
///
/// Each theta is the smaller of the angle subtended by the array
/// aperture and the antenna beamwidth, per axis and per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionSpec {
    pub theta_x_tx: f64,
    pub theta_x_rx: f64,
    pub theta_z_tx: f64,
    pub theta_z_rx: f64,
    /// Center wavelength, meters.
    pub lambda_c: f64,
    /// Imaging-region extent along x, meters.
    pub d_x: f64,
    /// Imaging-region extent along z, meters; 0 collapses z to one row.
    pub d_z: f64,
}

impl ResolutionSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [
            ("theta_x_tx", self.theta_x_tx),
            ("theta_x_rx", self.theta_x_rx),
            ("theta_z_tx", self.theta_z_tx),
            ("theta_z_rx", self.theta_z_rx),
        ] {
            if !(t > 0.0 && t <= std::f64::consts::PI) {
                return Err(Error::InvalidInput(format!(
                    "{name} must lie in (0, pi], got {t}"
                )));
            }
        }
        if !(self.lambda_c > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda_c must be positive, got {}",
                self.lambda_c
            )));
        }
        if !(self.d_x > 0.0) {
            return Err(Error::InvalidInput(format!(
                "d_x must be positive, got {}",
                self.d_x
            )));
        }
        if !(self.d_z >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "d_z must be nonnegative, got {}",
                self.d_z
            )));
        }
        Ok(())
    }
}

/// Angles subtended at range r0 by the element extents along x and z,
/// floored at MIN_APERTURE_ANGLE for degenerate axes.
pub fn subtended_angles(elements: &[Element], r0: f64) -> (f64, f64) {
    let extent = |pick: fn(&Element) -> f64| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in elements {
            let v = pick(e);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (hi - lo).max(0.0)
    };
    let angle = |d: f64| (2.0 * (d / (2.0 * r0)).atan()).max(MIN_APERTURE_ANGLE);
    (angle(extent(|e| e.position.x)), angle(extent(|e| e.position.z)))
}

/// Achievable resolutions (delta_x, delta_z):
/// delta = lambda_c / (2 (sin(theta_tx/2) + sin(theta_rx/2))).
pub fn resolution(spec: &ResolutionSpec) -> Result<(f64, f64)> {
    spec.validate()?;
    let d = |t_tx: f64, t_rx: f64| {
        spec.lambda_c / (2.0 * ((t_tx / 2.0).sin() + (t_rx / 2.0).sin()))
    };
    Ok((
        d(spec.theta_x_tx, spec.theta_x_rx),
        d(spec.theta_z_tx, spec.theta_z_rx),
    ))
}

/// Reference sampling grid: uniform pixels at the resolution pitch,
/// centered on the region, on the plane y = r0.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingGrid {
    m_x: usize,
    m_z: usize,
    delta_x: f64,
    delta_z: f64,
    grid: ImageGrid,
}

impl SamplingGrid {
    pub fn m_x(&self) -> usize {
        self.m_x
    }

    pub fn m_z(&self) -> usize {
        self.m_z
    }

    pub fn delta_x(&self) -> f64 {
        self.delta_x
    }

    pub fn delta_z(&self) -> f64 {
        self.delta_z
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn positions(&self) -> &[Point3] {
        self.grid.positions()
    }
}

/// Minimum admissible sampling counts M = floor(D / delta) + 1 per axis.
pub fn sampling_grid(spec: &ResolutionSpec, r0: f64) -> Result<SamplingGrid> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "range must be positive, got {r0}"
        )));
    }
    let (delta_x, delta_z) = resolution(spec)?;
    let m_x = (spec.d_x / delta_x).floor() as usize + 1;
    let m_z = if spec.d_z > 0.0 {
        (spec.d_z / delta_z).floor() as usize + 1
    } else {
        1
    };
    let grid = ImageGrid::rect(r0, 0.0, 0.0, m_x, m_z, delta_x, delta_z)?;
    Ok(SamplingGrid {
        m_x,
        m_z,
        delta_x,
        delta_z,
        grid,
    })
}

/// Aperture weighting applied to the referenced (dense) array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Apodization {
    Uniform,
    Hamming,
}

/// Window weights over the elements' aperture, separable per axis;
/// degenerate axes contribute a factor of 1.
pub fn apodized_side(elements: &[Element], apod: Apodization) -> Vec<Element> {
    let window = |u: f64| match apod {
        Apodization::Uniform => 1.0,
        Apodization::Hamming => 0.54 - 0.46 * (2.0 * std::f64::consts::PI * u).cos(),
    };
    let axis = |pick: fn(&Element) -> f64| {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for e in elements {
            let v = pick(e);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi - lo)
    };
    let (x0, wx) = axis(|e| e.position.x);
    let (z0, wz) = axis(|e| e.position.z);
    elements
        .iter()
        .map(|e| {
            let fx = if wx > 1e-9 {
                window((e.position.x - x0) / wx)
            } else {
                1.0
            };
            let fz = if wz > 1e-9 {
                window((e.position.z - z0) / wz)
            } else {
                1.0
            };
            Element {
                position: e.position,
                weight: Complex64::new(fx * fz, 0.0),
            }
        })
        .collect()
}

fn distinct_coords(elements: &[Element], pick: fn(&Element) -> f64) -> usize {
    let mut coords: Vec<f64> = elements.iter().map(pick).collect();
    coords.sort_by(f64::total_cmp);
    let mut count = 0;
    let mut last = f64::NEG_INFINITY;
    for c in coords {
        if count == 0 || c - last > 1e-9 {
            count += 1;
            last = c;
        }
    }
    count
}

/// The reference image E_ref of point targets tiling the sampling grid,
/// together with how it was produced.
#[derive(Debug, Clone)]
pub struct ReferencePattern {
    grid: SamplingGrid,
    e_ref: Vec<Complex64>,
    /// Referenced topology with the weights actually used (apodization
    /// applied to the optimized side, fixed side's weights kept).
    referenced: ArrayTopology,
    apodization: Apodization,
    optimized: Side,
    freqs: FrequencyGrid,
}

impl ReferencePattern {
    pub fn grid(&self) -> &SamplingGrid {
        &self.grid
    }

    pub fn e_ref(&self) -> &[Complex64] {
        &self.e_ref
    }

    pub fn referenced(&self) -> &ArrayTopology {
        &self.referenced
    }

    pub fn apodization(&self) -> Apodization {
        self.apodization
    }

    pub fn optimized(&self) -> Side {
        self.optimized
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn len(&self) -> usize {
        self.e_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e_ref.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.e_ref.iter().map(|v| v.norm_sqr()).sum()
    }
}

fn nyquist_warn(topology: &ArrayTopology, freqs: &FrequencyGrid) {
    let limit = freqs.min_wavelength() / 4.0;
    for (name, els) in [("tx", topology.tx()), ("rx", topology.rx())] {
        if els.len() < 2 {
            continue;
        }
        let mut worst: f64 = 0.0;
        for (i, a) in els.iter().enumerate() {
            let mut nearest = f64::INFINITY;
            for (j, b) in els.iter().enumerate() {
                if i != j {
                    nearest = nearest.min(a.position.distance(&b.position));
                }
            }
            worst = worst.max(nearest);
        }
        if worst > limit * (1.0 + 1e-9) {
            log::warn!(
                "referenced {name} pitch {:.4e} m exceeds lambda_min/4 = {:.4e} m; \
                 the reference pattern may itself carry grating lobes",
                worst,
                limit
            );
        }
    }
}

/// Weights used for the reference image: the optimized side is replaced
/// by the apodization window (tx only when it is more than a 2-element
/// line per axis), the other side keeps its current weights.
fn apply_reference_weights(
    referenced: &ArrayTopology,
    optimized: Side,
    apod: Apodization,
) -> Result<ArrayTopology> {
    let side = referenced.side(optimized);
    let apply = match optimized {
        Side::Rx => true,
        Side::Tx => {
            distinct_coords(side, |e| e.position.x) > 2
                || distinct_coords(side, |e| e.position.z) > 2
        }
    };
    if apply {
        referenced.with_side(optimized, apodized_side(side, apod))
    } else {
        Ok(referenced.clone())
    }
}

/// Builds the reference pattern and also returns the simulated field of
/// the reference scene, which the sensing matrix shares.
pub fn reference_pattern_and_field(
    referenced: &ArrayTopology,
    optimized: Side,
    apodization: Apodization,
    grid: &SamplingGrid,
    freqs: &FrequencyGrid,
) -> Result<(ReferencePattern, ScatteredField)> {
    nyquist_warn(referenced, freqs);
    let scene = Scene::unit_points(grid.positions());
    let field = forward_scatter(&scene, referenced, freqs)?;
    let weighted = apply_reference_weights(referenced, optimized, apodization)?;
    let image = bp_image(&field, &weighted, grid.grid())?;
    Ok((
        ReferencePattern {
            grid: grid.clone(),
            e_ref: image.values().to_vec(),
            referenced: weighted,
            apodization,
            optimized,
            freqs: freqs.clone(),
        },
        field,
    ))
}

/// Reference image of unit point targets at every sampling-grid pixel,
/// imaged by the dense referenced array with apodized weights.
pub fn reference_pattern(
    referenced: &ArrayTopology,
    optimized: Side,
    apodization: Apodization,
    grid: &SamplingGrid,
    freqs: &FrequencyGrid,
) -> Result<ReferencePattern> {
    Ok(reference_pattern_and_field(referenced, optimized, apodization, grid, freqs)?.0)
}

/// Image of an arbitrary point scene over the pattern's sampling grid,
/// formed by the same referenced array and code path that produced
/// E_ref. With the full reference scene this reproduces E_ref bit for
/// bit.
pub fn reference_field_for_scene(
    pattern: &ReferencePattern,
    scene: &Scene,
) -> Result<Vec<Complex64>> {
    let field = forward_scatter(scene, pattern.referenced(), pattern.freqs())?;
    let image = bp_image(&field, pattern.referenced(), pattern.grid().grid())?;
    Ok(image.values().to_vec())
}

/// Residual budget for the fit ||E_ref - B w||^2 <= epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    /// Absolute bound, in squared image units.
    Absolute(f64),
    /// Fraction eta of ||E_ref||^2.
    RelativeToRef(f64),
}

/// How surviving elements are picked from the weight vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    /// Keep |w_n| >= tau * max|w|, tau in (0, 1].
    Threshold(f64),
    /// Keep the n largest |w_n|; ties break toward the lower index.
    TopN(usize),
}

/// Synthesis program configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub epsilon: Epsilon,
    /// Total number of weighted solves; 1 means plain l1.
    pub reweight_iterations: usize,
    /// Reweighting stabilizer; None picks 1e-3 * max|w| of the first
    /// iterate.
    pub reweight_delta: Option<f64>,
    pub selection: Selection,
    /// Replace retained weights by 1 instead of the synthesized values.
    pub uniform_selected_weights: bool,
    pub max_iterations: usize,
    pub primal_tol: f64,
    pub dual_tol: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            epsilon: Epsilon::RelativeToRef(1e-2),
            reweight_iterations: 3,
            reweight_delta: None,
            selection: Selection::Threshold(0.01),
            uniform_selected_weights: false,
            max_iterations: 4000,
            primal_tol: 1e-6,
            dual_tol: 1e-6,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        match self.epsilon {
            Epsilon::Absolute(e) if !(e > 0.0) => {
                return Err(Error::InvalidInput(format!(
                    "epsilon must be positive, got {e}"
                )))
            }
            Epsilon::RelativeToRef(h) if !(h > 0.0) => {
                return Err(Error::InvalidInput(format!(
                    "relative epsilon must be positive, got {h}"
                )))
            }
            _ => {}
        }
        match self.selection {
            Selection::Threshold(t) if !(t > 0.0 && t <= 1.0) => {
                return Err(Error::InvalidInput(format!(
                    "selection threshold must lie in (0, 1], got {t}"
                )))
            }
            Selection::TopN(0) => {
                return Err(Error::InvalidInput("top_n must be at least 1".into()))
            }
            _ => {}
        }
        if let Some(d) = self.reweight_delta {
            if !(d > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "reweight_delta must be positive, got {d}"
                )));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidInput("max_iterations must be at least 1".into()));
        }
        if !(self.primal_tol > 0.0 && self.dual_tol > 0.0) {
            return Err(Error::InvalidInput("solver tolerances must be positive".into()));
        }
        Ok(())
    }

    /// The absolute residual budget for a given ||E_ref||^2.
    pub fn resolve_epsilon(&self, ref_norm_sq: f64) -> Result<f64> {
        self.validate()?;
        let eps = match self.epsilon {
            Epsilon::Absolute(e) => e,
            Epsilon::RelativeToRef(h) => h * ref_norm_sq,
        };
        if !(eps > 0.0) {
            return Err(Error::InvalidInput(
                "resolved epsilon is zero; reference pattern has no energy".into(),
            ));
        }
        Ok(eps)
    }
}

/// Outcome of one synthesis solve.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    /// Continuous weights over the candidate elements.
    pub w: Vec<Complex64>,
    /// Candidate element positions (column order of the sensing matrix).
    pub candidates: Vec<Point3>,
    /// Which side the weights belong to.
    pub optimized: Side,
    /// Indices retained by the configured selection rule, sorted.
    pub selected: Vec<usize>,
    /// Achieved ||E_ref - B w||^2.
    pub residual_sq: f64,
    /// Resolved absolute residual budget.
    pub epsilon: f64,
    pub l1_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Best feasible objective so far per iteration of the final solve.
    pub objective_trace: Vec<f64>,
    /// Plain l1 norm after each reweighted solve.
    pub reweight_l1: Vec<f64>,
    /// Support count after each reweighted solve.
    pub reweight_support: Vec<usize>,
}

/// Number of entries above SUPPORT_REL_THRESHOLD times the peak modulus.
pub fn support_count(w: &[Complex64]) -> usize {
    let max = w.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    w.iter()
        .filter(|v| v.norm() > SUPPORT_REL_THRESHOLD * max)
        .count()
}

/// Indices picked by a selection rule; empty when w is identically zero.
pub fn selection_indices(w: &[Complex64], selection: &Selection) -> Vec<usize> {
    let max = w.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Vec::new();
    }
    match *selection {
        Selection::Threshold(tau) => (0..w.len())
            .filter(|&i| w[i].norm() >= tau * max)
            .collect(),
        Selection::TopN(n) => {
            let mut idx: Vec<usize> = (0..w.len()).collect();
            idx.sort_by(|&a, &b| w[b].norm().total_cmp(&w[a].norm()).then(a.cmp(&b)));
            idx.truncate(n.min(w.len()));
            idx.sort_unstable();
            idx
        }
    }
}

fn check_pattern(b: &SensingMatrix, pattern: &ReferencePattern) -> Result<()> {
    if b.n_pixels() != pattern.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} matrix rows for {} reference samples",
            b.n_pixels(),
            pattern.len()
        )));
    }
    if b.grid().rect_meta() != pattern.grid().grid().rect_meta() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn finish_result(
    b: &SensingMatrix,
    target: &[Complex64],
    cfg: &SynthesisConfig,
    eps: f64,
    inner: solver::InnerSolve,
    reweight_l1: Vec<f64>,
    reweight_support: Vec<usize>,
) -> Result<SynthesisResult> {
    let residual_sq = b.residual_sq(target, &inner.w)?;
    let l1_norm = inner.w.iter().map(|v| v.norm()).sum();
    let selected = selection_indices(&inner.w, &cfg.selection);
    Ok(SynthesisResult {
        selected,
        candidates: b.candidates().to_vec(),
        optimized: b.optimized(),
        residual_sq,
        epsilon: eps,
        l1_norm,
        iterations: inner.iterations,
        converged: inner.converged,
        objective_trace: inner.objective_trace,
        reweight_l1,
        reweight_support,
        w: inner.w,
    })
}

/// min ||w||_1 subject to ||target - B w||^2 <= epsilon, for an explicit
/// target vector.
pub fn solve_l1_raw(
    b: &SensingMatrix,
    target: &[Complex64],
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    let ref_norm_sq: f64 = target.iter().map(|v| v.norm_sqr()).sum();
    let eps = cfg.resolve_epsilon(ref_norm_sq)?;
    let ws = solver::Workspace::new(b)?;
    let ones = vec![1.0; b.n_candidates()];
    let inner = ws.solve(
        target,
        eps,
        &ones,
        cfg.max_iterations,
        cfg.primal_tol,
        cfg.dual_tol,
    )?;
    let l1: f64 = inner.w.iter().map(|v| v.norm()).sum();
    let support = support_count(&inner.w);
    finish_result(b, target, cfg, eps, inner, vec![l1], vec![support])
}

/// min ||w||_1 subject to ||E_ref - B w||^2 <= epsilon.
pub fn solve_l1(
    b: &SensingMatrix,
    pattern: &ReferencePattern,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    check_pattern(b, pattern)?;
    solve_l1_raw(b, pattern.e_ref(), cfg)
}

/// Iteratively reweighted l1 with weights 1 / (|w_n| + delta), for an
/// explicit target vector. reweight_iterations = 1 reduces to
/// solve_l1_raw exactly.
pub fn reweighted_l1_raw(
    b: &SensingMatrix,
    target: &[Complex64],
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    if cfg.reweight_iterations < 1 {
        return Err(Error::InvalidInput(
            "reweight_iterations must be at least 1".into(),
        ));
    }
    let ref_norm_sq: f64 = target.iter().map(|v| v.norm_sqr()).sum();
    let eps = cfg.resolve_epsilon(ref_norm_sq)?;
    let ws = solver::Workspace::new(b)?;
    let mut u = vec![1.0; b.n_candidates()];
    let mut delta = cfg.reweight_delta;
    let mut reweight_l1 = Vec::new();
    let mut reweight_support = Vec::new();
    let mut last: Option<solver::InnerSolve> = None;
    for i in 0..cfg.reweight_iterations {
        let inner = ws.solve(
            target,
            eps,
            &u,
            cfg.max_iterations,
            cfg.primal_tol,
            cfg.dual_tol,
        )?;
        reweight_l1.push(inner.w.iter().map(|v| v.norm()).sum());
        reweight_support.push(support_count(&inner.w));
        if i + 1 < cfg.reweight_iterations {
            let max = inner.w.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if max > 0.0 {
                let d = *delta.get_or_insert(1e-3 * max);
                u = inner.w.iter().map(|v| 1.0 / (v.norm() + d)).collect();
            }
        }
        last = Some(inner);
    }
    finish_result(
        b,
        target,
        cfg,
        eps,
        last.expect("at least one reweight iteration"),
        reweight_l1,
        reweight_support,
    )
}

/// Iteratively reweighted l1 against a reference pattern.
pub fn reweighted_l1(
    b: &SensingMatrix,
    pattern: &ReferencePattern,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    check_pattern(b, pattern)?;
    reweighted_l1_raw(b, pattern.e_ref(), cfg)
}

/// Elements surviving the selection rule, with synthesized (or uniform)
/// weights.
pub fn select_elements(result: &SynthesisResult, cfg: &SynthesisConfig) -> Result<Vec<Element>> {
    cfg.validate()?;
    let indices = selection_indices(&result.w, &cfg.selection);
    if indices.is_empty() {
        return Err(Error::EmptySelection);
    }
    Ok(indices
        .iter()
        .map(|&i| Element {
            position: result.candidates[i],
            weight: if cfg.uniform_selected_weights {
                Complex64::new(1.0, 0.0)
            } else {
                result.w[i]
            },
        })
        .collect())
}

/// Which side the first synthesis pass optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeOrder {
    RxFirst,
    TxFirst,
}

/// Per-pass summary emitted by synthesize_sequential.
#[derive(Debug, Clone)]
pub struct PassDiagnostics {
    pub pass: usize,
    pub side: Side,
    pub candidates: usize,
    pub selected: usize,
    pub residual_sq: f64,
    pub epsilon: f64,
    pub l1_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternating synthesis: each pass holds one side fixed, rebuilds the
/// reference pattern against it, solves the reweighted program over the
/// full candidate set of the other side, and keeps the selected
/// elements. `rounds` counts passes, so rounds = 1 with RxFirst
/// synthesizes the receive side only.
pub fn synthesize_sequential(
    full: &ArrayTopology,
    grid: &SamplingGrid,
    freqs: &FrequencyGrid,
    apodization: Apodization,
    cfg: &SynthesisConfig,
    order: OptimizeOrder,
    rounds: usize,
) -> Result<(ArrayTopology, Vec<PassDiagnostics>)> {
    if rounds < 1 {
        return Err(Error::InvalidInput("rounds must be at least 1".into()));
    }
    cfg.validate()?;
    let mut current = full.clone();
    let mut side = match order {
        OptimizeOrder::RxFirst => Side::Rx,
        OptimizeOrder::TxFirst => Side::Tx,
    };
    let mut diagnostics = Vec::with_capacity(rounds);
    for pass in 1..=rounds {
        // candidate set: the full dense side; the other side stays as
        // currently synthesized (weights included)
        let referenced = current.with_side(side, full.side(side).to_vec())?;
        let (pattern, field) =
            reference_pattern_and_field(&referenced, side, apodization, grid, freqs)?;
        let b = build_sensing_matrix(&field, side.opposite(), &referenced, grid.grid())?;
        let result = reweighted_l1(&b, &pattern, cfg)?;
        if !result.converged {
            log::warn!(
                "pass {pass} ({side}): solver stopped after {} iterations without meeting tolerances",
                result.iterations
            );
        }
        let elements = select_elements(&result, cfg)?;
        diagnostics.push(PassDiagnostics {
            pass,
            side,
            candidates: result.candidates.len(),
            selected: elements.len(),
            residual_sq: result.residual_sq,
            epsilon: result.epsilon,
            l1_norm: result.l1_norm,
            iterations: result.iterations,
            converged: result.converged,
        });
        current = current.with_side(side, elements)?;
        side = side.opposite();
    }
    Ok((current, diagnostics))
}

/// Residual of the synthesized weights against a subset of the reference
/// targets: rebuilds the reference image and sensing matrix from the
/// sub-scene alone and evaluates ||E'_ref - B' w||^2.
///
/// `context` must be the topology the master sensing matrix was built
/// from (fixed side weighted, optimized side the full candidate set).
/// With the full index set this reproduces the master residual exactly.
pub fn lemma1_check(
    result: &SynthesisResult,
    pattern: &ReferencePattern,
    context: &ArrayTopology,
    fixed_side: Side,
    subset: &[usize],
) -> Result<f64> {
    let full_scene = Scene::unit_points(pattern.grid().positions());
    let sub = full_scene.subset(subset)?;
    let e_sub = reference_field_for_scene(pattern, &sub)?;
    let field = forward_scatter(&sub, context, pattern.freqs())?;
    let b_sub = build_sensing_matrix(&field, fixed_side, context, pattern.grid().grid())?;
    b_sub.residual_sq(&e_sub, &result.w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z).unwrap()
    }

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    fn spec_30deg() -> ResolutionSpec {
        ResolutionSpec {
            theta_x_tx: deg(30.0),
            theta_x_rx: deg(30.0),
            theta_z_tx: deg(30.0),
            theta_z_rx: deg(30.0),
            lambda_c: 9.224e-3,
            d_x: 0.6,
            d_z: 0.6,
        }
    }

    #[test]
    fn resolution_formula_values() {
        let (dx, dz) = resolution(&spec_30deg()).unwrap();
        // lambda/(4 sin 15 deg)
        assert!((dx - 0.008909699821690367).abs() < 1e-15);
        assert_eq!(dx, dz);

        let full = ResolutionSpec {
            theta_x_tx: std::f64::consts::PI,
            theta_x_rx: std::f64::consts::PI,
            ..spec_30deg()
        };
        let (dx, _) = resolution(&full).unwrap();
        assert_eq!(dx, 9.224e-3 / 4.0);

        let bad = ResolutionSpec {
            theta_x_tx: 0.0,
            ..spec_30deg()
        };
        assert!(resolution(&bad).is_err());
    }

    #[test]
    fn sampling_counts() {
        let g = sampling_grid(&spec_30deg(), 1.0).unwrap();
        assert_eq!(g.m_x(), 68);
        assert_eq!(g.m_z(), 68);
        assert_eq!(g.len(), 68 * 68);
        // pixels sit at the resolution pitch, centered on the region
        let meta = g.grid().rect_meta().unwrap();
        assert_eq!(meta.dx, g.delta_x());
        assert!((meta.x0 + 0.5 * 67.0 * g.delta_x()).abs() < 1e-12);

        // D equal to delta gives the minimum two samples
        let (dx, _) = resolution(&spec_30deg()).unwrap();
        let tight = ResolutionSpec {
            d_x: dx,
            d_z: 0.0,
            ..spec_30deg()
        };
        let g = sampling_grid(&tight, 1.0).unwrap();
        assert_eq!(g.m_x(), 2);
        assert_eq!(g.m_z(), 1);
    }

    #[test]
    fn degenerate_aperture_angle_floors() {
        let line: Vec<Element> = (0..5)
            .map(|i| Element::at(p(i as f64 * 0.01, 0.0, 0.0)))
            .collect();
        let (tx_x, tx_z) = subtended_angles(&line, 1.0);
        assert!((tx_x - 2.0 * (0.02f64).atan()).abs() < 1e-15);
        assert_eq!(tx_z, MIN_APERTURE_ANGLE);
    }

    #[test]
    fn hamming_window_shape() {
        let line: Vec<Element> = (0..5)
            .map(|i| Element::at(p(i as f64 * 0.01, 0.0, 0.0)))
            .collect();
        let apod = apodized_side(&line, Apodization::Hamming);
        // edges at 0.08, center at 1.0, symmetric
        assert!((apod[0].weight.re - 0.08).abs() < 1e-12);
        assert!((apod[4].weight.re - 0.08).abs() < 1e-12);
        assert!((apod[2].weight.re - 1.0).abs() < 1e-12);
        assert!((apod[1].weight.re - apod[3].weight.re).abs() < 1e-12);
        let flat = apodized_side(&line, Apodization::Uniform);
        assert!(flat.iter().all(|e| e.weight == Complex64::new(1.0, 0.0)));
    }

    fn small_topology() -> ArrayTopology {
        let tx = vec![
            Element::at(p(-0.26, 0.0, 0.0)),
            Element::at(p(0.26, 0.0, 0.0)),
        ];
        let rx: Vec<Element> = (0..8)
            .map(|i| Element::at(p(-0.07 + 0.02 * i as f64, 0.0, 0.0)))
            .collect();
        ArrayTopology::new(tx, rx).unwrap()
    }

    fn small_grid() -> SamplingGrid {
        let spec = ResolutionSpec {
            theta_x_tx: deg(30.0),
            theta_x_rx: deg(10.0),
            theta_z_tx: MIN_APERTURE_ANGLE,
            theta_z_rx: MIN_APERTURE_ANGLE,
            lambda_c: 9.224e-3,
            d_x: 0.2,
            d_z: 0.0,
        };
        sampling_grid(&spec, 1.0).unwrap()
    }

    fn small_freqs() -> FrequencyGrid {
        FrequencyGrid::new(30e9, 35e9, 5).unwrap()
    }

    #[test]
    fn single_pixel_reference() {
        let spec = ResolutionSpec {
            theta_x_tx: deg(30.0),
            theta_x_rx: deg(30.0),
            theta_z_tx: deg(30.0),
            theta_z_rx: deg(30.0),
            lambda_c: 9.224e-3,
            d_x: 4e-3, // below one resolution cell
            d_z: 0.0,
        };
        let grid = sampling_grid(&spec, 1.0).unwrap();
        assert_eq!(grid.len(), 1);
        let topo = small_topology();
        let pattern =
            reference_pattern(&topo, Side::Rx, Apodization::Hamming, &grid, &small_freqs())
                .unwrap();
        assert_eq!(pattern.len(), 1);
        // same value the weighted topology images at that pixel
        let scene = Scene::unit_points(grid.positions());
        let again = reference_field_for_scene(&pattern, &scene).unwrap();
        assert_eq!(pattern.e_ref()[0], again[0]);
        assert!(pattern.e_ref()[0].norm() > 0.0);
    }

    #[test]
    fn hamming_lowers_edge_response() {
        // dense rx line so the outer pixels sit well outside the
        // mainlobe: aperture 0.5 m puts the first null near 18 mm
        let tx = vec![
            Element::at(p(-0.26, 0.0, 0.0)),
            Element::at(p(0.26, 0.0, 0.0)),
        ];
        let rx: Vec<Element> = (0..26)
            .map(|i| Element::at(p(-0.25 + 0.02 * i as f64, 0.0, 0.0)))
            .collect();
        let topo = ArrayTopology::new(tx, rx).unwrap();
        let grid = small_grid();
        let freqs = small_freqs();
        let ham =
            reference_pattern(&topo, Side::Rx, Apodization::Hamming, &grid, &freqs).unwrap();
        let uni =
            reference_pattern(&topo, Side::Rx, Apodization::Uniform, &grid, &freqs).unwrap();
        // image a centered point target with both weightings and compare
        // the worst sidelobe over the outer quarters of the region
        let center = Scene::unit_points(&[grid.positions()[grid.len() / 2]]);
        let eh = reference_field_for_scene(&ham, &center).unwrap();
        let eu = reference_field_for_scene(&uni, &center).unwrap();
        let tail = |e: &[Complex64]| {
            let peak = e.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let n = e.len();
            let worst = e
                .iter()
                .enumerate()
                .filter(|(i, _)| *i < n / 4 || *i >= n - n / 4)
                .map(|(_, v)| v.norm())
                .fold(0.0, f64::max);
            worst / peak
        };
        assert!(tail(&eh) < tail(&eu), "{} vs {}", tail(&eh), tail(&eu));
    }

    #[test]
    fn reference_doubles_with_reflectivity() {
        let topo = small_topology();
        let grid = small_grid();
        let pattern =
            reference_pattern(&topo, Side::Rx, Apodization::Hamming, &grid, &small_freqs())
                .unwrap();
        let pts = [grid.positions()[0], grid.positions()[2]];
        let one = Scene::unit_points(&pts);
        let two = Scene::new(
            pts.iter()
                .map(|&position| crate::Scatterer {
                    position,
                    reflectivity: Complex64::new(2.0, 0.0),
                })
                .collect(),
        )
        .unwrap();
        let e1 = reference_field_for_scene(&pattern, &one).unwrap();
        let e2 = reference_field_for_scene(&pattern, &two).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert_eq!(b.re.to_bits(), (2.0 * a.re).to_bits());
            assert_eq!(b.im.to_bits(), (2.0 * a.im).to_bits());
        }
    }

    #[test]
    fn selection_rules() {
        let w = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(1e-9, 0.0),
        ];
        assert_eq!(selection_indices(&w, &Selection::Threshold(0.01)), vec![0, 1]);
        let tied = vec![Complex64::new(0.3, 0.0), Complex64::new(0.0, 0.3)];
        assert_eq!(selection_indices(&tied, &Selection::TopN(1)), vec![0]);
        assert_eq!(
            selection_indices(&w, &Selection::TopN(5)),
            vec![0, 1, 2],
            "top_n larger than the vector keeps everything"
        );
        let zero = vec![Complex64::new(0.0, 0.0); 3];
        assert!(selection_indices(&zero, &Selection::Threshold(0.5)).is_empty());
    }

    fn synthetic_matrix(entries: Array2<Complex64>) -> SensingMatrix {
        let m = entries.nrows();
        let n = entries.ncols();
        let grid = ImageGrid::from_points(
            (0..m).map(|i| p(i as f64 * 0.01, 1.0, 0.0)).collect(),
        )
        .unwrap();
        let candidates = (0..n).map(|i| p(i as f64 * 0.02, 0.0, 0.0)).collect();
        SensingMatrix::from_parts(entries, grid, candidates, Side::Rx).unwrap()
    }

    fn cfg_abs(eps: f64) -> SynthesisConfig {
        SynthesisConfig {
            epsilon: Epsilon::Absolute(eps),
            reweight_iterations: 1,
            max_iterations: 4000,
            ..SynthesisConfig::default()
        }
    }

    #[test]
    fn identity_sensing_recovers_basis_vector() {
        let n = 4;
        let mut entries = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
        for i in 0..n {
            entries[(i, i)] = Complex64::new(1.0, 0.0);
        }
        let b = synthetic_matrix(entries);
        let mut target = vec![Complex64::new(0.0, 0.0); n];
        target[0] = Complex64::new(1.0, 0.0);
        let r = solve_l1_raw(&b, &target, &cfg_abs(1e-12)).unwrap();
        assert!(r.converged);
        assert!((r.w[0].norm() - 1.0).abs() < 1e-4, "w0 = {}", r.w[0]);
        for i in 1..n {
            assert!(r.w[i].norm() < 1e-6);
        }
        assert!((r.l1_norm - 1.0).abs() < 1e-4);
        assert!(r.residual_sq <= 1e-12 * (1.0 + FEASIBILITY_SLACK));
        assert_eq!(r.selected, vec![0]);
    }

    #[test]
    fn generous_epsilon_returns_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let entries = Array2::from_shape_fn((5, 7), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let b = synthetic_matrix(entries);
        let target: Vec<Complex64> = (0..5)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let y_sq: f64 = target.iter().map(|v| v.norm_sqr()).sum();
        let r = solve_l1_raw(&b, &target, &cfg_abs(y_sq)).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.l1_norm, 0.0);
        assert!(r.w.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        assert!(r.selected.is_empty());
    }

    #[test]
    fn unreachable_target_is_infeasible() {
        let mut entries = Array2::from_elem((3, 2), Complex64::new(0.0, 0.0));
        entries[(0, 0)] = Complex64::new(1.0, 0.0);
        entries[(1, 1)] = Complex64::new(1.0, 0.0);
        let b = synthetic_matrix(entries);
        let target = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        match solve_l1_raw(&b, &target, &cfg_abs(0.5)) {
            Err(Error::Infeasible {
                min_residual_sq,
                epsilon,
            }) => {
                assert!((min_residual_sq - 1.0).abs() < 1e-6);
                assert_eq!(epsilon, 0.5);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    /// Random instance with a planted 2-sparse solution.
    fn planted(
        rng: &mut ChaCha8Rng,
        m: usize,
        n: usize,
    ) -> (SensingMatrix, Vec<Complex64>, Vec<Complex64>, [usize; 2]) {
        let entries = Array2::from_shape_fn((m, n), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let i = rng.gen_range(0..n);
        let j = loop {
            let j = rng.gen_range(0..n);
            if j != i {
                break j;
            }
        };
        let mut w0 = vec![Complex64::new(0.0, 0.0); n];
        for &k in &[i, j] {
            let mag = rng.gen_range(0.5..1.5);
            let ph = rng.gen_range(0.0..std::f64::consts::TAU);
            w0[k] = Complex64::from_polar(mag, ph);
        }
        let mut y = vec![Complex64::new(0.0, 0.0); m];
        for r in 0..m {
            for c in 0..n {
                y[r] += entries[(r, c)] * w0[c];
            }
        }
        let support = if i < j { [i, j] } else { [j, i] };
        (synthetic_matrix(entries), y, w0, support)
    }

    #[test]
    fn planted_sparse_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (b, y, w0, support) = planted(&mut rng, 8, 12);
        let y_sq: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let r = solve_l1_raw(&b, &y, &cfg_abs(1e-8 * y_sq)).unwrap();
        assert!(r.converged);
        assert_eq!(
            selection_indices(&r.w, &Selection::Threshold(0.01)),
            support.to_vec()
        );
        let err: f64 = r
            .w
            .iter()
            .zip(&w0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale: f64 = w0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-3 * scale, "relative error {}", err / scale);
    }

    #[test]
    fn reweight_once_equals_plain_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let (b, y, _, _) = planted(&mut rng, 8, 12);
        let y_sq: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let cfg = cfg_abs(1e-8 * y_sq);
        let plain = solve_l1_raw(&b, &y, &cfg).unwrap();
        let once = reweighted_l1_raw(&b, &y, &cfg).unwrap();
        assert_eq!(plain.w, once.w);
        assert_eq!(plain.residual_sq, once.residual_sq);
        assert_eq!(plain.iterations, once.iterations);
    }

    #[test]
    fn enormous_delta_makes_reweighting_inert() {
        let mut rng = ChaCha8Rng::seed_from_u64(79);
        let (b, y, _, _) = planted(&mut rng, 8, 12);
        let y_sq: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let first = solve_l1_raw(&b, &y, &cfg_abs(1e-8 * y_sq)).unwrap();
        let max = first.w.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let cfg = SynthesisConfig {
            reweight_iterations: 2,
            reweight_delta: Some(max * 1e6),
            ..cfg_abs(1e-8 * y_sq)
        };
        let two = reweighted_l1_raw(&b, &y, &cfg).unwrap();
        // weights agree to ~1e-6 relative after normalization; allow an
        // order of magnitude for solver sensitivity
        for (a, b) in two.w.iter().zip(&first.w) {
            assert!((a - b).norm() <= 1e-5 * max, "drift {}", (a - b).norm() / max);
        }
    }

    #[test]
    fn reweighting_keeps_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let (b, y, _, _) = planted(&mut rng, 8, 12);
        let y_sq: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let cfg = SynthesisConfig {
            reweight_iterations: 3,
            ..cfg_abs(1e-6 * y_sq)
        };
        let r = reweighted_l1_raw(&b, &y, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.residual_sq <= r.epsilon * (1.0 + FEASIBILITY_SLACK));
        assert_eq!(r.reweight_l1.len(), 3);
        assert_eq!(r.reweight_support.len(), 3);
    }

    #[test]
    fn scaling_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        let (b, y, _, _) = planted(&mut rng, 6, 10);
        let y_sq: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let cfg = cfg_abs(1e-6 * y_sq);
        let base = solve_l1_raw(&b, &y, &cfg).unwrap();

        let alpha = Complex64::new(2.0, -1.0);
        let ys: Vec<Complex64> = y.iter().map(|v| alpha * v).collect();
        let cfg_s = cfg_abs(1e-6 * y_sq * alpha.norm_sqr());
        let scaled = solve_l1_raw(&b, &ys, &cfg_s).unwrap();

        let scale: f64 = base.w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        for (a, b) in scaled.w.iter().zip(&base.w) {
            assert!((a - alpha * b).norm() <= 1e-4 * alpha.norm() * scale);
        }
        assert_eq!(base.selected, scaled.selected);
    }

    #[test]
    fn objective_trace_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(82);
        let (b, y, _, _) = planted(&mut rng, 8, 12);
        let y_sq: f64 = y.iter().map(|v| v.norm_sqr()).sum();
        let r = solve_l1_raw(&b, &y, &cfg_abs(1e-4 * y_sq)).unwrap();
        assert!(!r.objective_trace.is_empty());
        for w in r.objective_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(r.objective_trace.last().unwrap().is_finite());
    }

    #[test]
    fn optimality_matches_exhaustive_support_oracle() {
        // instances large enough that the planted support is the unique
        // l1 minimizer, so the restricted least-squares oracle is tight
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..3 {
            let (b, y, _, _) = planted(&mut rng, 8, 12);
            let y_sq: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            let eps = 1e-8 * y_sq;
            let cfg = SynthesisConfig {
                primal_tol: 1e-8,
                dual_tol: 1e-8,
                max_iterations: 40000,
                ..cfg_abs(eps)
            };
            let r = solve_l1_raw(&b, &y, &cfg).unwrap();
            let oracle = exhaustive_l1_oracle(b.entries(), &y, eps, 3).unwrap();
            assert!(
                (r.l1_norm - oracle).abs() <= 1e-3 * oracle,
                "solver {} oracle {oracle}",
                r.l1_norm
            );
        }
    }

    /// Minimum l1 over least-squares fits restricted to supports of size
    /// <= k that meet the residual bound. None if no support is feasible.
    fn exhaustive_l1_oracle(
        entries: &Array2<Complex64>,
        y: &[Complex64],
        eps: f64,
        k: usize,
    ) -> Option<f64> {
        let n = entries.ncols();
        let mut best: Option<f64> = None;
        let mut supports: Vec<Vec<usize>> = vec![vec![]];
        for size in 1..=k {
            let mut stack = vec![(0usize, Vec::new())];
            while let Some((start, cur)) = stack.pop() {
                if cur.len() == size {
                    supports.push(cur);
                    continue;
                }
                for i in start..n {
                    let mut next = cur.clone();
                    next.push(i);
                    stack.push((i + 1, next));
                }
            }
        }
        for s in supports {
            if let Some(l1) = support_ls_l1(entries, y, &s, eps) {
                best = Some(best.map_or(l1, |b: f64| b.min(l1)));
            }
        }
        best
    }

    fn support_ls_l1(
        entries: &Array2<Complex64>,
        y: &[Complex64],
        support: &[usize],
        eps: f64,
    ) -> Option<f64> {
        let m = entries.nrows();
        let k = support.len();
        if k == 0 {
            let r: f64 = y.iter().map(|v| v.norm_sqr()).sum();
            return (r <= eps).then_some(0.0);
        }
        // normal equations on the restricted columns
        let mut g = Array2::from_elem((k, k), Complex64::new(0.0, 0.0));
        let mut rhs = vec![Complex64::new(0.0, 0.0); k];
        for r in 0..m {
            for (a, &ca) in support.iter().enumerate() {
                let va = entries[(r, ca)];
                rhs[a] += va.conj() * y[r];
                for (bb, &cb) in support.iter().enumerate() {
                    g[(a, bb)] += va.conj() * entries[(r, cb)];
                }
            }
        }
        for i in 0..k {
            g[(i, i)] += Complex64::new(1e-12, 0.0);
        }
        let chol = super::solver::Cholesky::factor(&g).ok()?;
        let w = chol.solve(&rhs);
        let mut resid = 0.0;
        for r in 0..m {
            let mut acc = y[r];
            for (a, &ca) in support.iter().enumerate() {
                acc -= entries[(r, ca)] * w[a];
            }
            resid += acc.norm_sqr();
        }
        (resid <= eps * (1.0 + 1e-9)).then(|| w.iter().map(|v| v.norm()).sum())
    }

    #[test]
    fn sequential_single_pass_shrinks_rx_only() {
        let topo = small_topology();
        let grid = small_grid();
        let freqs = small_freqs();
        let cfg = SynthesisConfig {
            epsilon: Epsilon::RelativeToRef(0.05),
            reweight_iterations: 2,
            selection: Selection::TopN(4),
            max_iterations: 3000,
            ..SynthesisConfig::default()
        };
        let (out, diags) = synthesize_sequential(
            &topo,
            &grid,
            &freqs,
            Apodization::Hamming,
            &cfg,
            OptimizeOrder::RxFirst,
            1,
        )
        .unwrap();
        assert_eq!(out.n_rx(), 4);
        assert_eq!(out.tx(), topo.tx(), "tx untouched in a single rx pass");
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].side, Side::Rx);
        assert_eq!(diags[0].candidates, 8);
        assert_eq!(diags[0].selected, 4);
        if diags[0].converged {
            assert!(diags[0].residual_sq <= diags[0].epsilon * (1.0 + FEASIBILITY_SLACK));
        }
    }

    #[test]
    fn lemma_subsets() {
        let topo = small_topology();
        let grid = small_grid();
        let freqs = small_freqs();
        let (pattern, field) =
            reference_pattern_and_field(&topo, Side::Rx, Apodization::Hamming, &grid, &freqs)
                .unwrap();
        let b = build_sensing_matrix(&field, Side::Tx, &topo, grid.grid()).unwrap();
        let cfg = SynthesisConfig {
            epsilon: Epsilon::RelativeToRef(0.05),
            reweight_iterations: 1,
            max_iterations: 3000,
            ..SynthesisConfig::default()
        };
        let result = solve_l1(&b, &pattern, &cfg).unwrap();
        assert!(result.converged);

        // full set reproduces the master residual bit for bit
        let all: Vec<usize> = (0..grid.len()).collect();
        let full = lemma1_check(&result, &pattern, &topo, Side::Tx, &all).unwrap();
        assert_eq!(full.to_bits(), result.residual_sq.to_bits());

        // empty subset carries no energy
        let none = lemma1_check(&result, &pattern, &topo, Side::Tx, &[]).unwrap();
        assert_eq!(none, 0.0);

        // out-of-range index is rejected
        assert!(matches!(
            lemma1_check(&result, &pattern, &topo, Side::Tx, &[grid.len()]),
            Err(Error::SubsetOutOfRange { .. })
        ));
    }

    #[test]
    fn relative_epsilon_resolution() {
        let cfg = SynthesisConfig {
            epsilon: Epsilon::RelativeToRef(0.1),
            ..SynthesisConfig::default()
        };
        assert_eq!(cfg.resolve_epsilon(4.0).unwrap(), 0.4);
        let abs = SynthesisConfig {
            epsilon: Epsilon::Absolute(2.5),
            ..SynthesisConfig::default()
        };
        assert_eq!(abs.resolve_epsilon(4.0).unwrap(), 2.5);
        assert!(cfg.resolve_epsilon(0.0).is_err());
    }
}
