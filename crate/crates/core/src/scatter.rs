//! Frequency-domain forward scattering model for MIMO apertures.
//!
//! Each sample is the coherent sum over point scatterers of a two-way
//! spherical wave: amplitude sigma / (16 pi^2 d_t d_r) and phase
//! -k (d_t + d_r), where d_t and d_r are the element-to-scatterer ranges.
//! Element weights are not applied here; they belong to imaging and
//! synthesis, which weight the samples on use.
//!
//! The per-frequency phasor is advanced by a single complex multiply per
//! step (the wavenumber grid is uniform), which keeps full sweeps cheap.
//! Parallelism is over (tx, rx) pairs only; every reduction runs in a
//! fixed sequential order, so results are bit-identical for any thread
//! count.

use ndarray::Array3;
use rayon::prelude::*;

use crate::{ArrayTopology, Complex64, Error, FrequencyGrid, Result, Scene};

/// Minimum element-to-scatterer range, meters. Closer pairs have an
/// unbounded amplitude and are rejected.
pub(crate) const MIN_STANDOFF: f64 = 1e-6;

/// Two-way spherical spreading scale 1 / (16 pi^2).
const AMP_SCALE: f64 = 1.0 / (16.0 * std::f64::consts::PI * std::f64::consts::PI);

/// Scattered samples indexed by (frequency, tx element, rx element),
/// together with the frequency grid they were taken on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredField {
    freqs: FrequencyGrid,
    data: Array3<Complex64>,
}

impl ScatteredField {
    pub fn new(freqs: FrequencyGrid, data: Array3<Complex64>) -> Result<Self> {
        if data.dim().0 != freqs.n_steps() {
            return Err(Error::DimensionMismatch(format!(
                "{} frequency planes for a {}-step grid",
                data.dim().0,
                freqs.n_steps()
            )));
        }
        if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidInput("non-finite field sample".into()));
        }
        Ok(Self { freqs, data })
    }

    pub fn zeros(freqs: FrequencyGrid, n_tx: usize, n_rx: usize) -> Self {
        let data = Array3::from_elem(
            (freqs.n_steps(), n_tx, n_rx),
            Complex64::new(0.0, 0.0),
        );
        Self { freqs, data }
    }

    pub fn freqs(&self) -> &FrequencyGrid {
        &self.freqs
    }

    pub fn n_freq(&self) -> usize {
        self.data.dim().0
    }

    pub fn n_tx(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_rx(&self) -> usize {
        self.data.dim().2
    }

    pub fn get(&self, freq: usize, tx: usize, rx: usize) -> Complex64 {
        self.data[(freq, tx, rx)]
    }

    pub fn data(&self) -> &Array3<Complex64> {
        &self.data
    }

    /// Checks the (tx, rx) extents against a topology.
    pub fn check_shape(&self, topology: &ArrayTopology) -> Result<()> {
        let (_, n_tx, n_rx) = self.data.dim();
        if n_tx != topology.n_tx() || n_rx != topology.n_rx() {
            return Err(Error::DimensionMismatch(format!(
                "field is {n_tx} tx x {n_rx} rx, topology is {} tx x {} rx",
                topology.n_tx(),
                topology.n_rx()
            )));
        }
        Ok(())
    }
}

/// Simulates the scattered samples for every (frequency, tx, rx) triple.
///
/// An empty scene yields an all-zero field. Fails if any scatterer sits
/// on top of an element.
pub fn forward_scatter(
    scene: &Scene,
    topology: &ArrayTopology,
    grid: &FrequencyGrid,
) -> Result<ScatteredField> {
    let ks = grid.wavenumbers();
    let n_freq = ks.len();
    let n_tx = topology.n_tx();
    let n_rx = topology.n_rx();

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

    let k0 = ks[0];
    let dk = (ks[n_freq - 1] - k0) / (n_freq - 1) as f64;
    let tx = topology.tx();
    let rx = topology.rx();

    let pairs: Vec<Vec<Complex64>> = (0..n_tx * n_rx)
        .into_par_iter()
        .map(|p| {
            let t = p / n_rx;
            let r = p % n_rx;
            let mut acc = vec![Complex64::new(0.0, 0.0); n_freq];
            for s in scene.scatterers() {
                let d_t = tx[t].position.distance(&s.position);
                let d_r = rx[r].position.distance(&s.position);
                let d = d_t + d_r;
                let amp = s.reflectivity * (AMP_SCALE / (d_t * d_r));
                let step = Complex64::from_polar(1.0, -dk * d);
                let mut cur = amp * Complex64::from_polar(1.0, -k0 * d);
                for a in acc.iter_mut() {
                    *a += cur;
                    cur *= step;
                }
            }
            acc
        })
        .collect();

    let mut data = Array3::from_elem((n_freq, n_tx, n_rx), Complex64::new(0.0, 0.0));
    for t in 0..n_tx {
        for r in 0..n_rx {
            let acc = &pairs[t * n_rx + r];
            for (i, &v) in acc.iter().enumerate() {
                data[(i, t, r)] = v;
            }
        }
    }
    ScatteredField::new(grid.clone(), data)
}
