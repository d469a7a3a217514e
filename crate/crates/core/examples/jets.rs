//! Second-order jets of harmonic functions span a hyperplane orthogonal to the
//! Laplace jet.

use quatfield::control::Dictionary;
use quatfield::elliptic::DirichletOperator;
use quatfield::geometry::MetricPreset;
use quatfield::jets::{jet_rank, laplace_jet, stacked_jets, JetFitter};
use quatfield::{GridDomain, MetricField};

fn main() -> quatfield::Result<()> {
    let dom = GridDomain::unit_box(25)?;
    let g = MetricField::from_preset(&dom, &MetricPreset::ConformalSine { amplitude: 0.3 })?;
    let op = DirichletOperator::assemble(&g, &dom)?;
    let dict = Dictionary::standard(&dom, 30, 7);
    let fields = op.harmonic_extensions(&dict.controls)?;

    let a = dom.nearest_node([0.5; 3]);
    let stack = stacked_jets(&JetFitter::new(&dom), &dom, &fields, a)?;
    let r = jet_rank(&stack, 1e-3);
    let lambda = laplace_jet(&dom, &g, a)?;
    println!("rank {} of 10", r.rank);
    let sv: Vec<String> = r.singular_values.iter().map(|s| format!("{s:.2e}")).collect();
    println!("singular values {}", sv.join(" "));
    println!("|cos(null, laplace jet)| = {:.6}", r.null_vector.cosine(&lambda).abs());
    Ok(())
}
