//! Approximating a quaternion field by polynomials in harmonic building blocks.

use quatfield::control::Dictionary;
use quatfield::density::{approximate_in_algebra, represent, FrameCover};
use quatfield::elliptic::DirichletOperator;
use quatfield::geometry::SmoothRandom;
use quatfield::{GridDomain, MetricField, QuaternionField};

fn main() -> quatfield::Result<()> {
    let dom = GridDomain::unit_box(17)?;
    let g = MetricField::flat(&dom);
    let op = DirichletOperator::assemble(&g, &dom)?;
    let dict = Dictionary::standard(&dom, 40, 7);
    let fields = op.harmonic_extensions(&dict.controls)?;

    let cover = FrameCover::from_fields(&op, &dict.controls, &fields)?;
    println!("{} balls, partition defect {:.1e}", cover.len(), cover.partition_defect(&dom));

    let p = QuaternionField::new(SmoothRandom::new(7, 4).sample(&dom), SmoothRandom::vector(7, 4, &dom))?;
    let rep = represent(&p, &cover, &g, &dom)?;
    println!("frame representation error {:.1e}", rep.error);
    for a in approximate_in_algebra(&p, &cover, &rep, &fields, &g, &dom, &[1, 2, 3])? {
        println!("degree {}: objective {:.4e}, sup error {:.3e}", a.degree, a.objective, a.sup_error);
    }
    Ok(())
}
