//! On-disk formats: the topology CSV, the NFIM binary image container, a
//! plain-text magnitude export, and JSON reports.
//!
//! Every writer goes through [`atomic_write`]: the payload lands in a
//! temporary sibling file that is renamed over the target, so readers never
//! observe a half-written file. Floats in text formats are printed with
//! Rust's shortest round-trip formatting; parsing the file back yields the
//! exact same bit patterns.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nfsas::{ArrayTopology, Complex64, Element, ImageField, ImageGrid, Point3};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const TOPOLOGY_HEADER: &str = "role,x_m,y_m,z_m,weight_re,weight_im";

/// Magic bytes at the start of every NFIM image file.
pub const NFIM_MAGIC: [u8; 4] = *b"NFIM";
pub const NFIM_VERSION: u32 = 1;
/// magic + version + two u32 dims + five f64 grid parameters.
pub const NFIM_HEADER_LEN: usize = 4 + 4 + 4 + 4 + 5 * 8;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::io(path, e)
}

/// Write `bytes` to `path` via a temporary file in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp: PathBuf = path.to_path_buf();
    let name = path
        .file_name()
        .ok_or_else(|| CliError::validation("output", "output path has no file name"))?
        .to_string_lossy()
        .into_owned();
    tmp.set_file_name(format!("{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

/// Serialize a topology as CSV: header, then one row per element, transmit
/// side first, each side in element order.
pub fn write_topology(path: &Path, topology: &ArrayTopology) -> Result<()> {
    let mut out = String::with_capacity(64 * (topology.tx().len() + topology.rx().len() + 1));
    out.push_str(TOPOLOGY_HEADER);
    out.push('\n');
    for (role, elements) in [("tx", topology.tx()), ("rx", topology.rx())] {
        for e in elements {
            let p = e.position;
            out.push_str(&format!(
                "{role},{},{},{},{},{}\n",
                p.x, p.y, p.z, e.weight.re, e.weight.im
            ));
        }
    }
    atomic_write(path, out.as_bytes())
}

fn parse_field(path: &Path, line: usize, name: &str, text: &str) -> Result<f64> {
    // f64::from_str accepts "inf"/"nan"; positions and weights must be finite.
    let value: f64 = text.parse().map_err(|_| CliError::Parse {
        path: path.to_path_buf(),
        line: Some(line),
        message: format!("bad {name} value {text:?}"),
    })?;
    if !value.is_finite() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: Some(line),
            message: format!("non-finite {name} value {text:?}"),
        });
    }
    Ok(value)
}

/// Read a topology CSV written by [`write_topology`].
///
/// Role tokens are matched exactly: `"tx "` or `"TX"` are parse errors, not
/// aliases. Rows may appear in any order; each side keeps file order.
pub fn read_topology(path: &Path) -> Result<ArrayTopology> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TOPOLOGY_HEADER => {}
        Some((_, header)) => {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: Some(1),
                message: format!("expected header {TOPOLOGY_HEADER:?}, found {header:?}"),
            })
        }
        None => {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: Some(1),
                message: "empty topology file".into(),
            })
        }
    }
    let mut tx = Vec::new();
    let mut rx = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line: Some(line),
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let side = match fields[0] {
            "tx" => &mut tx,
            "rx" => &mut rx,
            other => {
                return Err(CliError::Parse {
                    path: path.to_path_buf(),
                    line: Some(line),
                    message: format!("unknown role {other:?} (expected \"tx\" or \"rx\")"),
                })
            }
        };
        let x = parse_field(path, line, "x_m", fields[1])?;
        let y = parse_field(path, line, "y_m", fields[2])?;
        let z = parse_field(path, line, "z_m", fields[3])?;
        let re = parse_field(path, line, "weight_re", fields[4])?;
        let im = parse_field(path, line, "weight_im", fields[5])?;
        side.push(Element {
            position: Point3::new(x, y, z)?,
            weight: Complex64::new(re, im),
        });
    }
    Ok(ArrayTopology::new(tx, rx)?)
}

/// Write a complex image in the NFIM container.
///
/// Layout, all little-endian: magic `NFIM`, version u32, n_x u32, n_z u32,
/// then r0, x0, z0, dx, dz as f64, then n_x * n_z (re, im) f64 pairs in
/// row-major order with z as the outer index.
pub fn write_image(path: &Path, image: &ImageField) -> Result<()> {
    let meta = image.grid().rect_meta().ok_or_else(|| {
        CliError::validation("image", "only rectangular grids can be serialized")
    })?;
    let n_x = u32::try_from(meta.n_x)
        .map_err(|_| CliError::validation("image", "grid too large for NFIM"))?;
    let n_z = u32::try_from(meta.n_z)
        .map_err(|_| CliError::validation("image", "grid too large for NFIM"))?;
    let mut bytes = Vec::with_capacity(NFIM_HEADER_LEN + 16 * image.values().len());
    bytes.extend_from_slice(&NFIM_MAGIC);
    bytes.extend_from_slice(&NFIM_VERSION.to_le_bytes());
    bytes.extend_from_slice(&n_x.to_le_bytes());
    bytes.extend_from_slice(&n_z.to_le_bytes());
    for v in [meta.r0, meta.x0, meta.z0, meta.dx, meta.dz] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in image.values() {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    atomic_write(path, &bytes)
}

/// Read an NFIM image back into an [`ImageField`].
pub fn read_image(path: &Path) -> Result<ImageField> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 4 || bytes[..4] != NFIM_MAGIC {
        return Err(CliError::MagicMismatch {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < NFIM_HEADER_LEN {
        return Err(CliError::TruncatedFile {
            path: path.to_path_buf(),
        });
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let f64_at = |off: usize| f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != NFIM_VERSION {
        return Err(CliError::UnsupportedVersion {
            path: path.to_path_buf(),
            version,
        });
    }
    let n_x = u32_at(8) as usize;
    let n_z = u32_at(12) as usize;
    let r0 = f64_at(16);
    let x0 = f64_at(24);
    let z0 = f64_at(32);
    let dx = f64_at(40);
    let dz = f64_at(48);
    let n_pixels = n_x
        .checked_mul(n_z)
        .ok_or_else(|| CliError::validation("image", "pixel count overflow"))?;
    let expected = NFIM_HEADER_LEN + 16 * n_pixels;
    if bytes.len() < expected {
        return Err(CliError::TruncatedFile {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() > expected {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: None,
            message: format!(
                "{} trailing bytes after the declared payload",
                bytes.len() - expected
            ),
        });
    }
    let mut values = Vec::with_capacity(n_pixels);
    for m in 0..n_pixels {
        let off = NFIM_HEADER_LEN + 16 * m;
        values.push(Complex64::new(f64_at(off), f64_at(off + 8)));
    }
    let grid = ImageGrid::rect_from_origin(r0, x0, z0, n_x, n_z, dx, dz)?;
    Ok(ImageField::new(grid, values)?)
}

/// Plain-text magnitude export: one `x_m,z_m,magnitude` row per pixel, in
/// grid order. Meant for quick plotting, not round-tripping.
pub fn write_magnitude_csv(path: &Path, image: &ImageField) -> Result<()> {
    let mut out = String::with_capacity(32 * (image.values().len() + 1));
    out.push_str("x_m,z_m,magnitude\n");
    for (p, v) in image.grid().positions().iter().zip(image.values()) {
        out.push_str(&format!("{},{},{}\n", p.x, p.z, v.norm()));
    }
    atomic_write(path, out.as_bytes())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: None,
        message: format!("JSON encoding failed: {e}"),
    })?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nfsas::ImageGrid;

    fn sample_topology() -> ArrayTopology {
        let tx = vec![
            Element {
                position: Point3::new(-0.26, 0.0, 0.0).unwrap(),
                weight: Complex64::new(1.0, 0.0),
            },
            Element {
                position: Point3::new(0.26, 0.0, 0.0).unwrap(),
                weight: Complex64::new(0.5, -0.25),
            },
        ];
        let rx = vec![
            Element {
                position: Point3::new(0.1234567890123456, 0.0, -0.02).unwrap(),
                weight: Complex64::new(-1.0 / 3.0, 1e-307),
            },
            Element {
                position: Point3::new(0.2, 0.0, 0.02).unwrap(),
                weight: Complex64::new(0.0, 0.0),
            },
        ];
        ArrayTopology::new(tx, rx).unwrap()
    }

    #[test]
    fn topology_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("topo.csv");
        let topo = sample_topology();
        write_topology(&path, &topo).unwrap();
        let back = read_topology(&path).unwrap();
        assert_eq!(topo.tx().len(), back.tx().len());
        assert_eq!(topo.rx().len(), back.rx().len());
        for (a, b) in topo
            .tx()
            .iter()
            .chain(topo.rx())
            .zip(back.tx().iter().chain(back.rx()))
        {
            assert_eq!(a.position.x.to_bits(), b.position.x.to_bits());
            assert_eq!(a.position.y.to_bits(), b.position.y.to_bits());
            assert_eq!(a.position.z.to_bits(), b.position.z.to_bits());
            assert_eq!(a.weight.re.to_bits(), b.weight.re.to_bits());
            assert_eq!(a.weight.im.to_bits(), b.weight.im.to_bits());
        }
    }

    #[test]
    fn topology_rejects_padded_role_token() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("topo.csv");
        let text = format!("{TOPOLOGY_HEADER}\ntx ,0,0,0,1,0\nrx,0.1,0,0,1,0\n");
        fs::write(&path, text).unwrap();
        let err = read_topology(&path).unwrap_err();
        match err {
            CliError::Parse { line, .. } => assert_eq!(line, Some(2)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn topology_rejects_wrong_header_and_field_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("topo.csv");
        fs::write(&path, "role,x,y,z\n").unwrap();
        assert!(matches!(
            read_topology(&path).unwrap_err(),
            CliError::Parse { line: Some(1), .. }
        ));
        fs::write(&path, format!("{TOPOLOGY_HEADER}\ntx,0,0,0,1\n")).unwrap();
        assert!(matches!(
            read_topology(&path).unwrap_err(),
            CliError::Parse { line: Some(2), .. }
        ));
    }

    fn sample_image() -> ImageField {
        let grid = ImageGrid::rect(1.0, 0.0, 0.0, 2, 2, 0.01, 0.02).unwrap();
        let values = vec![
            Complex64::new(1.0, -2.0),
            Complex64::new(0.5, 0.25),
            Complex64::new(-1e-12, 3.0),
            Complex64::new(0.0, 0.0),
        ];
        ImageField::new(grid, values).unwrap()
    }

    #[test]
    fn nfim_two_by_two_is_120_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.nfim");
        write_image(&path, &sample_image()).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 120);
    }

    #[test]
    fn nfim_round_trip_preserves_values_and_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.nfim");
        let img = sample_image();
        write_image(&path, &img).unwrap();
        let back = read_image(&path).unwrap();
        assert_eq!(img.values().len(), back.values().len());
        for (a, b) in img.values().iter().zip(back.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        for (p, q) in img
            .grid()
            .positions()
            .iter()
            .zip(back.grid().positions())
        {
            assert_eq!(p.x.to_bits(), q.x.to_bits());
            assert_eq!(p.y.to_bits(), q.y.to_bits());
            assert_eq!(p.z.to_bits(), q.z.to_bits());
        }
        assert_eq!(img.grid().rect_meta(), back.grid().rect_meta());
    }

    #[test]
    fn nfim_rejects_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.nfim");
        write_image(&path, &sample_image()).unwrap();
        let bytes = fs::read(&path).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        fs::write(&path, &bad).unwrap();
        assert!(matches!(
            read_image(&path).unwrap_err(),
            CliError::MagicMismatch { .. }
        ));

        fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(
            read_image(&path).unwrap_err(),
            CliError::TruncatedFile { .. }
        ));

        fs::write(&path, &bytes[..30]).unwrap();
        assert!(matches!(
            read_image(&path).unwrap_err(),
            CliError::TruncatedFile { .. }
        ));

        let mut vers = bytes.clone();
        vers[4] = 9;
        fs::write(&path, &vers).unwrap();
        assert!(matches!(
            read_image(&path).unwrap_err(),
            CliError::UnsupportedVersion { version: 9, .. }
        ));
    }

    #[test]
    fn atomic_write_replaces_existing_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        atomic_write(&path, b"old").unwrap();
        atomic_write(&path, b"new").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"new");
        assert!(!dir.path().join("report.json.tmp").exists());
    }
}
