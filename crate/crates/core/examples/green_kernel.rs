//! Green columns and the discrete Poisson kernel.

use quatfield::elliptic::{DirichletOperator, KernelKind, NormalStencil};
use quatfield::geometry::MetricPreset;
use quatfield::{GridDomain, MetricField};

fn main() -> quatfield::Result<()> {
    let dom = GridDomain::unit_box(17)?;
    let g = MetricField::from_preset(&dom, &MetricPreset::ConformalSine { amplitude: 0.3 })?;
    let op = DirichletOperator::assemble(&g, &dom)?;

    let x = dom.nearest_node([0.3, 0.5, 0.6]);
    let y = dom.nearest_node([0.7, 0.4, 0.5]);
    let (gx, gy) = (op.green_column(x)?, op.green_column(y)?);
    println!("G(x,y) = {:.6e}, G(y,x) = {:.6e}", gy.field.get(x), gx.field.get(y));

    for n in [17, 33] {
        let dom = GridDomain::unit_box(n)?;
        let op = DirichletOperator::assemble(&MetricField::flat(&dom), &dom)?;
        let k = op.poisson_kernel_with(dom.nearest_node([0.4, 0.55, 0.6]), KernelKind::Value, NormalStencil::SecondOrder)?;
        println!("n={n}: kernel total {:.6} (exact 1)", k.total());
    }
    Ok(())
}
