//! Element layout generators for scenario topologies and baselines.
//!
//! All generators place elements in the aperture plane y = 0 with unit
//! weights, ordered deterministically (z-outer, x-inner for grids). The
//! baseline helpers derive sparse comparison arrays from a dense side:
//! an equally spaced grid centered on the dense aperture, and a seeded
//! random subset.

use nfsas::{Element, Point3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Result};

/// In-plane axis for linear arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Z,
}

fn check_pitch(field: &str, count: usize, pitch: f64) -> Result<()> {
    if count > 1 && !(pitch > 0.0 && pitch.is_finite()) {
        return Err(CliError::validation(
            field,
            format!("pitch must be positive, got {pitch}"),
        ));
    }
    Ok(())
}

fn element(x: f64, z: f64) -> Result<Element> {
    Ok(Element::at(Point3::new(x, 0.0, z).map_err(CliError::Lib)?))
}

/// `count` elements along one axis at `pitch`, centered on
/// `(center_x, center_z)`.
pub fn linear(
    count: usize,
    pitch: f64,
    axis: Axis,
    center_x: f64,
    center_z: f64,
) -> Result<Vec<Element>> {
    if count == 0 {
        return Err(CliError::validation("count", "count must be at least 1"));
    }
    check_pitch("pitch_m", count, pitch)?;
    let first = -0.5 * (count - 1) as f64 * pitch;
    (0..count)
        .map(|i| {
            let u = first + i as f64 * pitch;
            match axis {
                Axis::X => element(center_x + u, center_z),
                Axis::Z => element(center_x, center_z + u),
            }
        })
        .collect()
}

/// `nx` by `nz` grid at a common pitch, centered on `(center_x, center_z)`,
/// z-outer order.
pub fn planar(
    nx: usize,
    nz: usize,
    pitch: f64,
    center_x: f64,
    center_z: f64,
) -> Result<Vec<Element>> {
    if nx == 0 || nz == 0 {
        return Err(CliError::validation("nx", "grid dimensions must be at least 1"));
    }
    check_pitch("pitch_m", nx.max(nz), pitch)?;
    let x0 = center_x - 0.5 * (nx - 1) as f64 * pitch;
    let z0 = center_z - 0.5 * (nz - 1) as f64 * pitch;
    let mut out = Vec::with_capacity(nx * nz);
    for iz in 0..nz {
        for ix in 0..nx {
            out.push(element(x0 + ix as f64 * pitch, z0 + iz as f64 * pitch)?);
        }
    }
    Ok(out)
}

/// Four elements on the corners of a square with the given side length,
/// centered on the origin.
pub fn corners(spacing: f64) -> Result<Vec<Element>> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(CliError::validation(
            "spacing_m",
            format!("spacing must be positive, got {spacing}"),
        ));
    }
    planar(2, 2, spacing, 0.0, 0.0)
}

fn extent_center(elements: &[Element], pick: fn(&Element) -> f64) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in elements {
        let v = pick(e);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    0.5 * (lo + hi)
}

/// Equally spaced baseline: an `nx` by `nz` grid at `pitch`, centered on the
/// bounding box of the dense side it stands in for.
pub fn equally_spaced(full: &[Element], nx: usize, nz: usize, pitch: f64) -> Result<Vec<Element>> {
    if full.is_empty() {
        return Err(CliError::validation(
            "comparison",
            "cannot center a baseline on an empty side",
        ));
    }
    planar(
        nx,
        nz,
        pitch,
        extent_center(full, |e| e.position.x),
        extent_center(full, |e| e.position.z),
    )
}

/// Random baseline: `count` distinct elements drawn from the dense side with
/// a seeded generator. Indices are sorted so output order is stable.
pub fn random_subset(full: &[Element], count: usize, seed: u64) -> Result<Vec<Element>> {
    if count == 0 || count > full.len() {
        return Err(CliError::validation(
            "comparison",
            format!(
                "random baseline needs between 1 and {} elements, got {count}",
                full.len()
            ),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..full.len()).collect();
    // Partial Fisher-Yates: after i swaps the first i entries are a uniform
    // draw without replacement.
    for i in 0..count {
        let j = rng.gen_range(i..indices.len());
        indices.swap(i, j);
    }
    indices.truncate(count);
    indices.sort_unstable();
    Ok(indices.into_iter().map(|i| full[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_is_symmetric_about_center() {
        let e = linear(17, 0.0313, Axis::X, 0.0, 0.1).unwrap();
        assert_eq!(e.len(), 17);
        let span = e.last().unwrap().position.x - e[0].position.x;
        assert!((span - 16.0 * 0.0313).abs() < 1e-12);
        for (a, b) in e.iter().zip(e.iter().rev()) {
            assert!((a.position.x + b.position.x).abs() < 1e-12);
            assert_eq!(a.position.z, 0.1);
            assert_eq!(a.position.y, 0.0);
        }
    }

    #[test]
    fn linear_z_axis_and_single_element() {
        let e = linear(3, 0.005, Axis::Z, 0.2, 0.0).unwrap();
        assert!(e.iter().all(|el| el.position.x == 0.2));
        assert!((e[2].position.z - e[0].position.z - 0.01).abs() < 1e-15);
        let one = linear(1, 0.0, Axis::X, -0.26, 0.0).unwrap();
        assert_eq!(one[0].position.x, -0.26);
        assert!(linear(0, 0.01, Axis::X, 0.0, 0.0).is_err());
        assert!(linear(2, 0.0, Axis::X, 0.0, 0.0).is_err());
    }

    #[test]
    fn corners_square() {
        let e = corners(0.6).unwrap();
        assert_eq!(e.len(), 4);
        for el in &e {
            assert!((el.position.x.abs() - 0.3).abs() < 1e-15);
            assert!((el.position.z.abs() - 0.3).abs() < 1e-15);
        }
        // z-outer order: (-,-), (+,-), (-,+), (+,+)
        assert!(e[0].position.x < 0.0 && e[0].position.z < 0.0);
        assert!(e[1].position.x > 0.0 && e[1].position.z < 0.0);
        assert!(e[3].position.x > 0.0 && e[3].position.z > 0.0);
    }

    #[test]
    fn equally_spaced_spans_dense_aperture_within_one_pitch() {
        let full = linear(26, 0.02, Axis::X, 0.0, 0.0).unwrap();
        let eq = equally_spaced(&full, 17, 1, 0.0313).unwrap();
        assert_eq!(eq.len(), 17);
        let span = |e: &[Element]| {
            e.iter().map(|el| el.position.x).fold(f64::NEG_INFINITY, f64::max)
                - e.iter().map(|el| el.position.x).fold(f64::INFINITY, f64::min)
        };
        assert!((span(&eq) - span(&full)).abs() < 0.0313);
        let center = |e: &[Element]| extent_center(e, |el| el.position.x);
        assert!((center(&eq) - center(&full)).abs() < 1e-12);
    }

    #[test]
    fn random_subset_is_seeded_and_distinct() {
        let full = linear(26, 0.02, Axis::X, 0.0, 0.0).unwrap();
        let a = random_subset(&full, 17, 7).unwrap();
        let b = random_subset(&full, 17, 7).unwrap();
        let c = random_subset(&full, 17, 8).unwrap();
        assert_eq!(a.len(), 17);
        let xs = |e: &[Element]| e.iter().map(|el| el.position.x.to_bits()).collect::<Vec<_>>();
        assert_eq!(xs(&a), xs(&b));
        assert_ne!(xs(&a), xs(&c));
        let mut seen = xs(&a);
        seen.dedup();
        assert_eq!(seen.len(), 17, "elements must be distinct");
        let mut sorted = a.iter().map(|el| el.position.x).collect::<Vec<_>>();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(xs(&a), sorted.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn random_subset_bounds() {
        let full = linear(5, 0.02, Axis::X, 0.0, 0.0).unwrap();
        assert!(random_subset(&full, 0, 1).is_err());
        assert!(random_subset(&full, 6, 1).is_err());
        let all = random_subset(&full, 5, 1).unwrap();
        for (a, b) in all.iter().zip(&full) {
            assert_eq!(a.position.x.to_bits(), b.position.x.to_bits());
        }
    }
}
