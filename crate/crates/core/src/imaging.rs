//! Back-projection image formation and sensing-matrix assembly.
//!
//! A pixel value is the delay-and-sum of the scattered samples with the
//! propagation phase removed and the two-way spherical spreading restored:
//! each element contributes 4 pi d e^{+jkd} times its complex weight. The
//! sensing matrix factors the same sum so that one side's weights appear
//! as an explicit vector: bp_image == B * w for the candidate side's
//! weights, exactly by construction. That identity is the module's oracle
//! and everything here is arranged to preserve it.
//!
//! Pixels are independent, so the per-pixel loops run under rayon while
//! every inner reduction keeps a fixed sequential order; outputs are
//! bit-identical for any thread count.

use ndarray::Array2;
use rayon::prelude::*;

use crate::scatter::MIN_STANDOFF;
use crate::{
    ArrayTopology, Complex64, Element, Error, FrequencyGrid, Point3, Result, Scene,
    ScatteredField, Side,
};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Rectangular layout of an image grid: n_x columns by n_z rows on the
/// plane y = r0, pixel (ix, iz) at (x0 + ix dx, r0, z0 + iz dz), stored
/// row-major with z outer (index m = iz * n_x + ix).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectMeta {
    pub n_x: usize,
    pub n_z: usize,
    pub r0: f64,
    pub x0: f64,
    pub z0: f64,
    pub dx: f64,
    pub dz: f64,
}

/// Pixel positions to image on, optionally with rectangular layout
/// metadata (required by PSF analysis and the binary image format).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    positions: Vec<Point3>,
    rect: Option<RectMeta>,
}

impl ImageGrid {
    pub fn from_points(positions: Vec<Point3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(Self {
            positions,
            rect: None,
        })
    }

    /// Uniform rectangular grid centered at (center_x, center_z) on the
    /// plane y = r0. Degenerate axes (count 1) take pitch 0.
    pub fn rect(
        r0: f64,
        center_x: f64,
        center_z: f64,
        n_x: usize,
        n_z: usize,
        dx: f64,
        dz: f64,
    ) -> Result<Self> {
        if n_x == 0 || n_z == 0 {
            return Err(Error::EmptyInput);
        }
        let dx = if n_x == 1 { 0.0 } else { dx };
        let dz = if n_z == 1 { 0.0 } else { dz };
        if !(dx.is_finite() && dz.is_finite()) || (n_x > 1 && dx <= 0.0) || (n_z > 1 && dz <= 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "bad pixel pitch ({dx}, {dz})"
            )));
        }
        let dx = if n_x == 1 { 0.0 } else { dx };
        let dz = if n_z == 1 { 0.0 } else { dz };
        let x0 = center_x - 0.5 * (n_x.max(1) - 1) as f64 * dx;
        let z0 = center_z - 0.5 * (n_z.max(1) - 1) as f64 * dz;
        Self::rect_from_origin(r0, x0, z0, n_x, n_z, dx, dz)
    }

    /// Rectangular grid anchored at its lowest-coordinate pixel instead of its
    /// center. Positions are exactly `origin + index * pitch`, so a grid
    /// rebuilt from stored origin and pitch values reproduces the original
    /// pixel coordinates bit for bit.
    pub fn rect_from_origin(
        r0: f64,
        x0: f64,
        z0: f64,
        n_x: usize,
        n_z: usize,
        dx: f64,
        dz: f64,
    ) -> Result<Self> {
        if n_x == 0 || n_z == 0 {
            return Err(Error::EmptyInput);
        }
        let dx = if n_x == 1 { 0.0 } else { dx };
        let dz = if n_z == 1 { 0.0 } else { dz };
        if !(dx.is_finite() && dz.is_finite()) || (n_x > 1 && dx <= 0.0) || (n_z > 1 && dz <= 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "bad pixel pitch ({dx}, {dz})"
            )));
        }
        let mut positions = Vec::with_capacity(n_x * n_z);
        for iz in 0..n_z {
            for ix in 0..n_x {
                positions.push(Point3::new(
                    x0 + ix as f64 * dx,
                    r0,
                    z0 + iz as f64 * dz,
                )?);
            }
        }
        Ok(Self {
            positions,
            rect: Some(RectMeta {
                n_x,
                n_z,
                r0,
                x0,
                z0,
                dx,
                dz,
            }),
        })
    }

    pub fn with_rect_meta(positions: Vec<Point3>, rect: RectMeta) -> Result<Self> {
        if positions.len() != rect.n_x * rect.n_z {
            return Err(Error::DimensionMismatch(format!(
                "{} positions for {} x {} rect",
                positions.len(),
                rect.n_x,
                rect.n_z
            )));
        }
        Ok(Self {
            positions,
            rect: Some(rect),
        })
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn position(&self, m: usize) -> Point3 {
        self.positions[m]
    }

    pub fn rect_meta(&self) -> Option<&RectMeta> {
        self.rect.as_ref()
    }
}

/// A complex image: one value per grid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField {
    grid: ImageGrid,
    values: Vec<Complex64>,
}

impl ImageField {
    pub fn new(grid: ImageGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} pixels",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidInput("non-finite image value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Index of the largest-magnitude pixel; first wins on ties.
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        let mut best_mag = -1.0;
        for (m, v) in self.values.iter().enumerate() {
            let mag = v.norm();
            if mag > best_mag {
                best_mag = mag;
                best = m;
            }
        }
        best
    }
}

/// Dense map from candidate-element weights to image samples: M pixel rows
/// by N candidate columns, assembled with the fixed side's weights baked
/// in so that bp_image of the same field equals entries * w for the
/// candidate side's weight vector w.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    entries: Array2<Complex64>,
    grid: ImageGrid,
    candidates: Vec<Point3>,
    optimized: Side,
}

impl SensingMatrix {
    /// Wraps an explicit matrix. Rows must match the grid and columns
    /// the candidate positions.
    pub fn from_parts(
        entries: Array2<Complex64>,
        grid: ImageGrid,
        candidates: Vec<Point3>,
        optimized: Side,
    ) -> Result<Self> {
        if entries.nrows() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrix rows for {} grid pixels",
                entries.nrows(),
                grid.len()
            )));
        }
        if entries.ncols() != candidates.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} matrix columns for {} candidates",
                entries.ncols(),
                candidates.len()
            )));
        }
        if entries.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidInput(
                "sensing matrix entries must be finite".into(),
            ));
        }
        Ok(Self {
            entries,
            grid,
            candidates,
            optimized,
        })
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn candidates(&self) -> &[Point3] {
        &self.candidates
    }

    /// Which side the columns index (the side being optimized).
    pub fn optimized(&self) -> Side {
        self.optimized
    }

    pub fn n_pixels(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_candidates(&self) -> usize {
        self.entries.ncols()
    }

    /// entries * w.
    pub fn apply(&self, w: &[Complex64]) -> Result<Vec<Complex64>> {
        if w.len() != self.n_candidates() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} candidates",
                w.len(),
                self.n_candidates()
            )));
        }
        let mut out = Vec::with_capacity(self.n_pixels());
        for row in self.entries.outer_iter() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (b, &wn) in row.iter().zip(w) {
                acc += b * wn;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// entries^H * v (conjugate transpose applied to a pixel vector).
    pub fn adjoint_apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.n_pixels() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for {} pixels",
                v.len(),
                self.n_pixels()
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.n_candidates()];
        for (row, &vm) in self.entries.outer_iter().zip(v) {
            for (o, &b) in out.iter_mut().zip(row.iter()) {
                *o += b.conj() * vm;
            }
        }
        Ok(out)
    }

    /// || target - entries * w ||^2, the squared fit residual.
    ///
    /// Single shared implementation so independently rebuilt subsets can
    /// reproduce a master residual bit for bit.
    pub fn residual_sq(&self, target: &[Complex64], w: &[Complex64]) -> Result<f64> {
        if target.len() != self.n_pixels() {
            return Err(Error::DimensionMismatch(format!(
                "{} target samples for {} pixels",
                target.len(),
                self.n_pixels()
            )));
        }
        let bw = self.apply(w)?;
        let mut acc = 0.0;
        for (t, b) in target.iter().zip(&bw) {
            acc += (t - b).norm_sqr();
        }
        Ok(acc)
    }
}

/// Uniform wavenumber stepping for the phasor recurrence.
fn k_step(ks: &[f64]) -> (f64, f64) {
    let k0 = ks[0];
    let dk = if ks.len() > 1 {
        (ks[ks.len() - 1] - k0) / (ks.len() - 1) as f64
    } else {
        0.0
    };
    (k0, dk)
}

/// Delay-and-sum image of a scattered field on the given grid.
///
/// Both sides' element weights multiply their contributions; the fixed
/// summation order per pixel is (tx, rx) pairs outer, frequency inner.
pub fn bp_image(
    field: &ScatteredField,
    topology: &ArrayTopology,
    grid: &ImageGrid,
) -> Result<ImageField> {
    field.check_shape(topology)?;
    let ks = field.freqs().wavenumbers();
    let (k0, dk) = k_step(&ks);
    let n_freq = ks.len();
    let tx = topology.tx();
    let rx = topology.rx();
    let n_rx = rx.len();
    let s = field
        .data()
        .as_slice()
        .expect("field tensor is standard layout");

    let values: Vec<Complex64> = grid
        .positions()
        .par_iter()
        .map_init(
            || (vec![0.0; tx.len()], vec![0.0; n_rx]),
            |(d_t, d_r), pos| {
                for (t, e) in tx.iter().enumerate() {
                    d_t[t] = pos.distance(&e.position);
                }
                for (r, e) in rx.iter().enumerate() {
                    d_r[r] = pos.distance(&e.position);
                }
                let mut acc = Complex64::new(0.0, 0.0);
                for (t, et) in tx.iter().enumerate() {
                    let a_t = et.weight * (FOUR_PI * d_t[t]);
                    let base = t * n_rx;
                    for (r, er) in rx.iter().enumerate() {
                        let amp = a_t * (er.weight * (FOUR_PI * d_r[r]));
                        let d = d_t[t] + d_r[r];
                        let mut cur = amp * Complex64::from_polar(1.0, k0 * d);
                        let step = Complex64::from_polar(1.0, dk * d);
                        let mut idx = base + r;
                        for _ in 0..n_freq {
                            acc += cur * s[idx];
                            cur *= step;
                            idx += tx.len() * n_rx;
                        }
                    }
                }
                acc
            },
        )
        .collect();
    ImageField::new(grid.clone(), values)
}

/// Assembles the sensing matrix with one side fixed (its weights baked
/// into the entries) and the other side's elements as columns.
///
/// `fixed_side` names the side whose weights are baked in; the opposite
/// side is being optimized and its weights are deliberately NOT applied.
pub fn build_sensing_matrix(
    field: &ScatteredField,
    fixed_side: Side,
    topology: &ArrayTopology,
    grid: &ImageGrid,
) -> Result<SensingMatrix> {
    field.check_shape(topology)?;
    let ks = field.freqs().wavenumbers();
    let (k0, dk) = k_step(&ks);
    let n_freq = ks.len();
    let fixed = topology.side(fixed_side);
    let cand = topology.side(fixed_side.opposite());
    let n_rx = topology.n_rx();
    let n_tx = topology.n_tx();
    let s = field
        .data()
        .as_slice()
        .expect("field tensor is standard layout");
    let freq_stride = n_tx * n_rx;

    // sample index for (freq 0, fixed f, candidate n) and its layout
    let flat0 = |f: usize, n: usize| -> usize {
        match fixed_side {
            Side::Tx => f * n_rx + n,
            Side::Rx => n * n_rx + f,
        }
    };

    let rows: Vec<Vec<Complex64>> = grid
        .positions()
        .par_iter()
        .map_init(
            || (vec![0.0; fixed.len()], vec![0.0; cand.len()]),
            |(d_f, d_c), pos| {
                for (f, e) in fixed.iter().enumerate() {
                    d_f[f] = pos.distance(&e.position);
                }
                for (n, e) in cand.iter().enumerate() {
                    d_c[n] = pos.distance(&e.position);
                }
                let mut row = vec![Complex64::new(0.0, 0.0); cand.len()];
                for (n, entry) in row.iter_mut().enumerate() {
                    let a_c = FOUR_PI * d_c[n];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (f, ef) in fixed.iter().enumerate() {
                        let amp = ef.weight * (FOUR_PI * d_f[f]) * a_c;
                        let d = d_f[f] + d_c[n];
                        let mut cur = amp * Complex64::from_polar(1.0, k0 * d);
                        let step = Complex64::from_polar(1.0, dk * d);
                        let mut idx = flat0(f, n);
                        for _ in 0..n_freq {
                            acc += cur * s[idx];
                            cur *= step;
                            idx += freq_stride;
                        }
                    }
                    *entry = acc;
                }
                row
            },
        )
        .collect();

    let mut entries = Array2::from_elem((grid.len(), cand.len()), Complex64::new(0.0, 0.0));
    for (m, row) in rows.iter().enumerate() {
        for (n, &v) in row.iter().enumerate() {
            entries[(m, n)] = v;
        }
    }
    Ok(SensingMatrix {
        entries,
        grid: grid.clone(),
        candidates: cand.iter().map(|e| e.position).collect(),
        optimized: fixed_side.opposite(),
    })
}

/// Back-projected image of a point-scatterer scene, skipping the full
/// per-pair field tensor.
///
/// Mathematically identical to bp_image(forward_scatter(..)): the two-way
/// sum factors into independent tx and rx sums per scatterer because the
/// spreading amplitudes cancel pairwise. Cost per pixel is
/// O(Q (n_tx + n_rx) n_freq) instead of O(n_tx n_rx n_freq), which makes
/// dense-array PSF grids tractable.
pub fn image_point_scene(
    scene: &Scene,
    topology: &ArrayTopology,
    freqs: &FrequencyGrid,
    grid: &ImageGrid,
) -> Result<ImageField> {
    let ks = freqs.wavenumbers();
    let (k0, dk) = k_step(&ks);
    let n_freq = ks.len();
    let tx = topology.tx();
    let rx = topology.rx();

    for (q, s) in scene.scatterers().iter().enumerate() {
        for (i, e) in topology.tx().iter().enumerate() {
            if e.position.distance(&s.position) <= MIN_STANDOFF {
                return Err(Error::CoincidentGeometry {
                    scatterer: q,
                    element: format!("tx[{i}]"),
                });
            }
        }
        for (i, e) in topology.rx().iter().enumerate() {
            if e.position.distance(&s.position) <= MIN_STANDOFF {
                return Err(Error::CoincidentGeometry {
                    scatterer: q,
                    element: format!("rx[{i}]"),
                });
            }
        }
    }

    // element-to-scatterer ranges, indexed [q][element]
    let d_tq: Vec<Vec<f64>> = scene
        .scatterers()
        .iter()
        .map(|s| tx.iter().map(|e| e.position.distance(&s.position)).collect())
        .collect();
    let d_rq: Vec<Vec<f64>> = scene
        .scatterers()
        .iter()
        .map(|s| rx.iter().map(|e| e.position.distance(&s.position)).collect())
        .collect();

    let values: Vec<Complex64> = grid
        .positions()
        .par_iter()
        .map_init(
            || {
                (
                    vec![Complex64::new(0.0, 0.0); n_freq],
                    vec![Complex64::new(0.0, 0.0); n_freq],
                )
            },
            |(tx_sum, rx_sum), pos| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (q, sc) in scene.scatterers().iter().enumerate() {
                    tx_sum.fill(Complex64::new(0.0, 0.0));
                    rx_sum.fill(Complex64::new(0.0, 0.0));
                    for (t, et) in tx.iter().enumerate() {
                        let d_m = pos.distance(&et.position);
                        let delta = d_m - d_tq[q][t];
                        let mut cur =
                            et.weight * (d_m / d_tq[q][t]) * Complex64::from_polar(1.0, k0 * delta);
                        let step = Complex64::from_polar(1.0, dk * delta);
                        for v in tx_sum.iter_mut() {
                            *v += cur;
                            cur *= step;
                        }
                    }
                    for (r, er) in rx.iter().enumerate() {
                        let d_m = pos.distance(&er.position);
                        let delta = d_m - d_rq[q][r];
                        let mut cur =
                            er.weight * (d_m / d_rq[q][r]) * Complex64::from_polar(1.0, k0 * delta);
                        let step = Complex64::from_polar(1.0, dk * delta);
                        for v in rx_sum.iter_mut() {
                            *v += cur;
                            cur *= step;
                        }
                    }
                    let mut per_q = Complex64::new(0.0, 0.0);
                    for (a, b) in tx_sum.iter().zip(rx_sum.iter()) {
                        per_q += a * b;
                    }
                    acc += sc.reflectivity * per_q;
                }
                acc
            },
        )
        .collect();
    ImageField::new(grid.clone(), values)
}

/// Per-pixel maximum of |E| across range slices. The output carries the
/// first slice's grid and real-valued magnitudes.
pub fn project_max_range(volume: &[ImageField]) -> Result<ImageField> {
    let first = volume.first().ok_or(Error::EmptyInput)?;
    let shape = |f: &ImageField| f.grid().rect_meta().map(|r| (r.n_x, r.n_z));
    let want = shape(first);
    for f in volume {
        if f.len() != first.len() || shape(f) != want {
            return Err(Error::GridMismatch);
        }
    }
    let mut mags = vec![0.0f64; first.len()];
    for f in volume {
        for (mx, v) in mags.iter_mut().zip(f.values()) {
            let mag = v.norm();
            if mag > *mx {
                *mx = mag;
            }
        }
    }
    ImageField::new(
        first.grid().clone(),
        mags.into_iter().map(|m| Complex64::new(m, 0.0)).collect(),
    )
}

/// Convenience: all elements of one side as a scene-free topology with a
/// single active candidate (used to check column extraction).
pub fn single_candidate(topology: &ArrayTopology, side: Side, n: usize) -> Result<ArrayTopology> {
    let elements = topology.side(side);
    let e = elements
        .get(n)
        .ok_or_else(|| Error::InvalidInput(format!("candidate {n} of {}", elements.len())))?;
    topology.with_side(side, vec![Element::at(e.position)])
}
