//! Recovering the metric from harmonic functions alone.

use quatfield::control::Dictionary;
use quatfield::elliptic::DirichletOperator;
use quatfield::geometry::MetricPreset;
use quatfield::recovery::{calibrate, compare, recover_metric, ScaleMode};
use quatfield::{GridDomain, MetricField};

fn main() -> quatfield::Result<()> {
    let dom = GridDomain::unit_box(21)?;
    let g = MetricField::from_preset(&dom, &MetricPreset::ConformalSine { amplitude: 0.3 })?;
    let op = DirichletOperator::assemble(&g, &dom)?;
    let dict = Dictionary::standard(&dom, 41, 7);
    let samples = op.harmonic_extensions(&dict.controls[1..])?;

    let raw = recover_metric(&dom, &samples, ScaleMode::Drift)?;
    let anchor = dom.nearest_node([0.5; 3]);
    let res = calibrate(&raw, anchor, g.at(anchor))?;
    let cmp = compare(&res, &g);
    println!("{} nodes, max relative error {:.2e}, scale spread {:.2e}", cmp.errors.len(), cmp.max_error, cmp.scale_spread);
    Ok(())
}
