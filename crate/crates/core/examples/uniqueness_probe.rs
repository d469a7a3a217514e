//! How well surface data pins down a harmonic quaternion field.

use quatfield::analysis::{probe_basis, uniqueness_probe, SurfacePatch};
use quatfield::control::Dictionary;
use quatfield::elliptic::DirichletOperator;
use quatfield::{GridDomain, MetricField};

fn main() -> quatfield::Result<()> {
    let dom = GridDomain::unit_box(21)?;
    let g = MetricField::flat(&dom);
    let op = DirichletOperator::assemble(&g, &dom)?;
    let dict = Dictionary::standard(&dom, 16, 7);
    let ws = op.harmonic_extensions(&dict.controls[1..])?;

    let basis = probe_basis(&dom, &g, &ws)?;
    let patch = SurfacePatch::central(&dom, 2)?;
    let r = uniqueness_probe(&dom, &g, &basis, &patch)?;
    println!("{} basis fields, surface/volume ratio {:.3e}", basis.len(), r.ratio);
    Ok(())
}
