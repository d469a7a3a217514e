//! A harmonic quaternion field taking prescribed values at two points.

use quatfield::control::{separate, Dictionary, PointTarget};
use quatfield::elliptic::DirichletOperator;
use quatfield::{GridDomain, MetricField};

fn main() -> quatfield::Result<()> {
    let dom = GridDomain::unit_box(17)?;
    let op = DirichletOperator::assemble(&MetricField::flat(&dom), &dom)?;
    let dict = Dictionary::standard(&dom, 40, 7);
    let a = PointTarget { node: dom.nearest_node([0.35, 0.4, 0.5]), value: 1.0, vector: [0.5, -0.25, 0.75] };
    let b = PointTarget { node: dom.nearest_node([0.65, 0.6, 0.45]), value: -0.5, vector: [0.0, 1.0, -0.5] };

    let s = separate(&op, &dict.controls, a, b)?;
    println!("endpoint errors {:.2e} / {:.2e} (allowed {:.2e})", s.endpoint_errors[0], s.endpoint_errors[1], s.tolerance);
    println!("membership residuals {:.2e} / {:.2e}", s.membership.0, s.membership.1);
    println!("at a: {:?}", s.field.at(a.node));
    Ok(())
}
