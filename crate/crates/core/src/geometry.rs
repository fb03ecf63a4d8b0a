//! Geometry primitives: positions, frequency grids, scenes, and array
//! topologies.
//!
//! The aperture lives in the y = 0 plane and the imaging region sits at a
//! positive range y = R0; nothing below enforces that convention, but the
//! generators and scenario files follow it.

use crate::{Complex64, Error, Result};

/// Speed of light in vacuum, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Position tolerance used when checking for duplicate elements, meters.
const DUPLICATE_TOL: f64 = 1e-9;

/// A point in 3-D space, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinates ({x}, {y}, {z})"
            )));
        }
        Ok(Self { x, y, z })
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Wavenumber k = 2 pi f / c for a single frequency in Hz.
pub fn wavenumber(f_hz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_hz / SPEED_OF_LIGHT
}

/// A uniform stepped-frequency grid, inclusive of both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    f_start: f64,
    f_stop: f64,
    n_steps: usize,
}

impl FrequencyGrid {
    pub fn new(f_start: f64, f_stop: f64, n_steps: usize) -> Result<Self> {
        if !(f_start.is_finite() && f_stop.is_finite()) {
            return Err(Error::InvalidInput("non-finite frequency".into()));
        }
        if !(f_start > 0.0) {
            return Err(Error::InvalidInput(format!(
                "f_start must be positive, got {f_start}"
            )));
        }
        if !(f_stop > f_start) {
            return Err(Error::InvalidInput(format!(
                "f_stop ({f_stop}) must exceed f_start ({f_start})"
            )));
        }
        if n_steps < 2 {
            return Err(Error::InvalidInput(format!(
                "n_steps must be at least 2, got {n_steps}"
            )));
        }
        Ok(Self {
            f_start,
            f_stop,
            n_steps,
        })
    }

    pub fn f_start(&self) -> f64 {
        self.f_start
    }

    pub fn f_stop(&self) -> f64 {
        self.f_stop
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Center frequency (f_start + f_stop) / 2.
    pub fn f_center(&self) -> f64 {
        0.5 * (self.f_start + self.f_stop)
    }

    /// Center wavenumber k_c = 2 pi f_center / c.
    pub fn center_wavenumber(&self) -> f64 {
        wavenumber(self.f_center())
    }

    /// Center wavelength lambda_c = c / f_center.
    pub fn center_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_center()
    }

    /// Shortest wavelength on the grid, c / f_stop.
    pub fn min_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f_stop
    }

    /// The i-th frequency; endpoints are hit exactly.
    pub fn frequency(&self, i: usize) -> f64 {
        let t = i as f64 / (self.n_steps - 1) as f64;
        self.f_start * (1.0 - t) + self.f_stop * t
    }

    /// All frequencies, uniformly spaced from f_start to f_stop inclusive.
    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_steps).map(|i| self.frequency(i)).collect()
    }

    /// All wavenumbers k_i = 2 pi f_i / c, strictly increasing.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n_steps)
            .map(|i| wavenumber(self.frequency(i)))
            .collect()
    }
}

/// A point scatterer with complex reflectivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position: Point3,
    pub reflectivity: Complex64,
}

/// A collection of point scatterers. May be empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    scatterers: Vec<Scatterer>,
}

impl Scene {
    pub fn new(scatterers: Vec<Scatterer>) -> Result<Self> {
        for (q, s) in scatterers.iter().enumerate() {
            if !(s.reflectivity.re.is_finite() && s.reflectivity.im.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "scatterer {q} has non-finite reflectivity"
                )));
            }
        }
        Ok(Self { scatterers })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// Unit-reflectivity scatterers at the given positions.
    pub fn unit_points(positions: &[Point3]) -> Self {
        Self {
            scatterers: positions
                .iter()
                .map(|&position| Scatterer {
                    position,
                    reflectivity: Complex64::new(1.0, 0.0),
                })
                .collect(),
        }
    }

    pub fn scatterers(&self) -> &[Scatterer] {
        &self.scatterers
    }

    pub fn len(&self) -> usize {
        self.scatterers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }

    /// The sub-scene formed by the given scatterer indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Scene> {
        let mut scatterers = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = self.scatterers.get(i).ok_or(Error::SubsetOutOfRange {
                index: i,
                len: self.scatterers.len(),
            })?;
            scatterers.push(*s);
        }
        Ok(Scene { scatterers })
    }
}

/// Which side of the MIMO array an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Tx,
    Rx,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Tx => Side::Rx,
            Side::Rx => Side::Tx,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Tx => write!(f, "tx"),
            Side::Rx => write!(f, "rx"),
        }
    }
}

/// An array element: a position plus a complex excitation weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub position: Point3,
    pub weight: Complex64,
}

impl Element {
    /// Element with unit weight.
    pub fn at(position: Point3) -> Self {
        Self {
            position,
            weight: Complex64::new(1.0, 0.0),
        }
    }
}

/// Transmit and receive element sets with complex weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayTopology {
    tx: Vec<Element>,
    rx: Vec<Element>,
}

impl ArrayTopology {
    pub fn new(tx: Vec<Element>, rx: Vec<Element>) -> Result<Self> {
        if tx.is_empty() || rx.is_empty() {
            return Err(Error::InvalidInput(
                "topology needs at least one tx and one rx element".into(),
            ));
        }
        Self::check_side("tx", &tx)?;
        Self::check_side("rx", &rx)?;
        Ok(Self { tx, rx })
    }

    fn check_side(name: &str, elements: &[Element]) -> Result<()> {
        for (i, e) in elements.iter().enumerate() {
            if !(e.weight.re.is_finite() && e.weight.im.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name}[{i}] has non-finite weight"
                )));
            }
        }
        for i in 0..elements.len() {
            for j in (i + 1)..elements.len() {
                if elements[i].position.distance(&elements[j].position) <= DUPLICATE_TOL {
                    return Err(Error::InvalidInput(format!(
                        "duplicate {name} positions at indices {i} and {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn tx(&self) -> &[Element] {
        &self.tx
    }

    pub fn rx(&self) -> &[Element] {
        &self.rx
    }

    pub fn side(&self, side: Side) -> &[Element] {
        match side {
            Side::Tx => &self.tx,
            Side::Rx => &self.rx,
        }
    }

    pub fn n_tx(&self) -> usize {
        self.tx.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx.len()
    }

    /// The same topology with the tx and rx roles exchanged.
    pub fn swapped(&self) -> ArrayTopology {
        ArrayTopology {
            tx: self.rx.clone(),
            rx: self.tx.clone(),
        }
    }

    /// Replace one side's elements, keeping the other untouched.
    pub fn with_side(&self, side: Side, elements: Vec<Element>) -> Result<ArrayTopology> {
        match side {
            Side::Tx => ArrayTopology::new(elements, self.rx.clone()),
            Side::Rx => ArrayTopology::new(self.tx.clone(), elements),
        }
    }

    /// Replace one side's weights, positions unchanged.
    pub fn with_weights(&self, side: Side, weights: &[Complex64]) -> Result<ArrayTopology> {
        let current = self.side(side);
        if weights.len() != current.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} {side} elements",
                weights.len(),
                current.len()
            )));
        }
        let elements = current
            .iter()
            .zip(weights)
            .map(|(e, &weight)| Element {
                position: e.position,
                weight,
            })
            .collect();
        self.with_side(side, elements)
    }
}
