//! Solving the Dirichlet problem and checking the maximum principle.

use quatfield::control::harmonic_polynomial;
use quatfield::elliptic::{manufactured_error, BoundaryControl, DirichletOperator};
use quatfield::geometry::MetricPreset;
use quatfield::{GridDomain, MetricField, ScalarField};

fn main() -> quatfield::Result<()> {
    let dom = GridDomain::unit_box(25)?;
    let g = MetricField::from_preset(&dom, &MetricPreset::ConformalSine { amplitude: 0.3 })?;
    let op = DirichletOperator::assemble(&g, &dom)?;

    let f = BoundaryControl::from_fn(&dom, |x| harmonic_polynomial(4, x));
    let zero = ScalarField::zeros(&dom);
    let s = op.solve_report(&zero, &f)?;
    let inner = dom.interior_nodes().iter().map(|&n| s.field.get(n));
    let (lo, hi) = inner.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    println!("{} CG iterations, residual {:.2e}", s.iterations, s.residual);
    println!("interior range [{lo:.4}, {hi:.4}] inside boundary sup {:.4}", f.sup());

    for n in [9, 17, 33] {
        let (h, e) = manufactured_error(&MetricPreset::Flat, n)?;
        println!("manufactured n={n:>2} h={h:.4} error {e:.3e}");
    }
    Ok(())
}
