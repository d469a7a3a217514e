//! Field files: raw little-endian `f64` values in x-fastest node order with
//! components interleaved per node, plus a JSON sidecar at `<path>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::field::check_dims;
use crate::geometry::{GridDomain, MaskSpec, MetricField, ScalarField, Sym3, VectorField};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    #[serde(rename = "box")]
    pub bounds: [[f64; 2]; 3],
    pub components: usize,
    pub mask_spec: MaskSpec,
    pub layout: String,
}

impl FieldHeader {
    pub fn for_domain(dom: &GridDomain, components: usize) -> Self {
        let (lo, hi) = (dom.lo(), dom.hi());
        FieldHeader {
            dims: dom.dims(),
            spacing: dom.spacing(),
            bounds: [[lo[0], hi[0]], [lo[1], hi[1]], [lo[2], hi[2]]],
            components,
            mask_spec: dom.mask().clone(),
            layout: "f64-le, x-fastest, components interleaved".into(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `data` (`len · components` values, interleaved) and its sidecar.
pub fn write_raw(path: &Path, dom: &GridDomain, components: usize, data: &[f64]) -> Result<()> {
    if data.len() != dom.len() * components {
        return Err(Error::InvalidArgument(format!(
            "field data has {} values, expected {}",
            data.len(),
            dom.len() * components
        )));
    }
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let header = FieldHeader::for_domain(dom, components);
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&header)?)?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<(FieldHeader, Vec<f64>)> {
    let header: FieldHeader = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    let n = header.dims.iter().product::<usize>() * header.components;
    if bytes.len() != 8 * n {
        return Err(Error::InvalidArgument(format!(
            "{}: {} bytes, expected {}",
            path.display(),
            bytes.len(),
            8 * n
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, data))
}

fn expect_components(h: &FieldHeader, c: usize) -> Result<()> {
    if h.components != c {
        return Err(Error::InvalidArgument(format!(
            "field file has {} components, expected {c}",
            h.components
        )));
    }
    Ok(())
}

pub fn write_scalar(path: &Path, dom: &GridDomain, f: &ScalarField) -> Result<()> {
    f.check(dom)?;
    write_raw(path, dom, 1, f.values())
}

pub fn write_vector(path: &Path, dom: &GridDomain, u: &VectorField) -> Result<()> {
    u.check(dom)?;
    let flat: Vec<f64> = u.values().iter().flatten().copied().collect();
    write_raw(path, dom, 3, &flat)
}

/// Reads a scalar field, checking its grid against `dom`.
pub fn read_scalar(path: &Path, dom: &GridDomain) -> Result<ScalarField> {
    let (h, data) = read_raw(path)?;
    expect_components(&h, 1)?;
    check_dims(dom.dims(), h.dims)?;
    ScalarField::from_vec(h.dims, data)
}

pub fn read_vector(path: &Path, dom: &GridDomain) -> Result<VectorField> {
    let (h, data) = read_raw(path)?;
    expect_components(&h, 3)?;
    check_dims(dom.dims(), h.dims)?;
    let v = data.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    VectorField::from_vec(h.dims, v)
}

/// Writes a metric field as 6 components `g₁₁ g₁₂ g₁₃ g₂₂ g₂₃ g₃₃` per node.
pub fn write_metric(path: &Path, dom: &GridDomain, g: &MetricField) -> Result<()> {
    check_dims(dom.dims(), g.dims())?;
    let flat: Vec<f64> = g.values().iter().flat_map(|m| m.0).collect();
    write_raw(path, dom, 6, &flat)
}

pub fn read_metric(path: &Path, dom: &GridDomain) -> Result<MetricField> {
    let (h, data) = read_raw(path)?;
    expect_components(&h, 6)?;
    check_dims(dom.dims(), h.dims)?;
    let vals = data
        .chunks_exact(6)
        .map(|c| Sym3([c[0], c[1], c[2], c[3], c[4], c[5]]))
        .collect();
    MetricField::from_values(h.dims, vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_and_vector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = GridDomain::unit_box(6).unwrap();
        let a = ScalarField::from_fn(&d, |x| x[0] - 0.1 * x[2] + 1e-17);
        let u = VectorField::from_fn(&d, |x| [x[0], x[1] * x[2], -1.0 / 3.0]);
        let (pa, pu) = (dir.path().join("a.bin"), dir.path().join("u.bin"));
        write_scalar(&pa, &d, &a).unwrap();
        write_vector(&pu, &d, &u).unwrap();
        assert_eq!(read_scalar(&pa, &d).unwrap(), a);
        assert_eq!(read_vector(&pu, &d).unwrap(), u);
        assert!(read_vector(&pa, &d).is_err());
        let (h, _) = read_raw(&pu).unwrap();
        assert_eq!(h.components, 3);
        assert_eq!(h.mask_spec, MaskSpec::Box);
        let other = GridDomain::unit_box(7).unwrap();
        assert!(read_scalar(&pa, &other).is_err());
    }

    #[test]
    fn metric_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = GridDomain::unit_box(5).unwrap();
        let g = MetricField::from_preset(&d, &crate::geometry::MetricPreset::GenericSmooth { amplitude: 0.3 }).unwrap();
        let p = dir.path().join("g.bin");
        write_metric(&p, &d, &g).unwrap();
        assert_eq!(read_metric(&p, &d).unwrap().values(), g.values());
    }
}
