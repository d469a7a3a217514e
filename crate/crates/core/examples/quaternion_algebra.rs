//! Pointwise quaternion products under a non-flat metric.

use quatfield::geometry::MetricPreset;
use quatfield::quaternion::{field_mul, qmul, qnorm, sup_norm, Quaternion};
use quatfield::{GridDomain, MetricField, QuaternionField};

fn main() -> quatfield::Result<()> {
    let dom = GridDomain::unit_box(9)?;
    let g = MetricField::from_preset(&dom, &MetricPreset::GenericSmooth { amplitude: 0.3 })?;
    let node = dom.nearest_node([0.3, 0.6, 0.5]);

    let p = Quaternion::new(0.5, [1.0, -0.5, 0.25], node);
    let q = Quaternion::new(-1.0, [0.0, 2.0, 1.0], node);
    let pq = qmul(&p, &q, &g)?;
    println!("p q = {pq:?}");
    println!("|pq| = {:.12}, |p||q| = {:.12}", qnorm(&pq, &g), qnorm(&p, &g) * qnorm(&q, &g));

    let u = Quaternion::new(0.0, p.vector, node);
    println!("u² = {:?} (scalar is -g(u,u))", qmul(&u, &u, &g)?);

    let field = QuaternionField::random(&dom, 1);
    let sq = field_mul(&field, &field, &g)?;
    println!("sup|p²| = {:.6}, sup|p|² = {:.6}", sup_norm(&dom, &sq, &g), sup_norm(&dom, &field, &g).powi(2));
    Ok(())
}
