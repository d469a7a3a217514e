//! Dirichlet fields of a cavity and circulation around a column.

use quatfield::analysis::{angle_field, circulation, dirichlet_basis, LoopSpec};
use quatfield::elliptic::DirichletOperator;
use quatfield::{GridDomain, MaskSpec, MetricField};

fn main() -> quatfield::Result<()> {
    let cavity = GridDomain::build([0.0; 3], [1.0; 3], [17; 3], MaskSpec::BoxMinusBox { lo: [0.375; 3], hi: [0.625; 3] })?;
    let op = DirichletOperator::assemble(&MetricField::flat(&cavity), &cavity)?;
    let b = dirichlet_basis(&op)?;
    println!("cavity: {} Dirichlet field(s), capacity {:.4}, net flux {:.1e}", b.fields.len(), b.capacity[0], b.total_flux[0]);

    let column = GridDomain::build([0.0; 3], [1.0; 3], [33; 3], MaskSpec::BoxMinusColumn { lo: [0.4375; 2], hi: [0.5625; 2] })?;
    let g = MetricField::flat(&column);
    let u = angle_field(&column, &g, 2, [0.5, 0.5]);
    let c = circulation(&column, &g, &u, &LoopSpec { axis: 2, level: 16, lo: [8, 8], hi: [24, 24] })?;
    println!("column: circulation of dθ around the hole {c:.5} (2π = {:.5})", std::f64::consts::TAU);
    Ok(())
}
