//! Steering the value and gradient of a harmonic function at chosen points.

use quatfield::control::{ma_matrix, random_points, solve_control, verify_control, Dictionary, PointTarget};
use quatfield::elliptic::DirichletOperator;
use quatfield::{GridDomain, MetricField};

fn main() -> quatfield::Result<()> {
    let dom = GridDomain::unit_box(17)?;
    let op = DirichletOperator::assemble(&MetricField::flat(&dom), &dom)?;
    let dict = Dictionary::standard(&dom, 30, 5);
    let points = random_points(&dom, 2, 5)?;

    let m = ma_matrix(&op, &points, &dict.controls)?;
    println!("rank {} of {}", m.rank(1e-3), 4 * points.len());

    let targets = [
        PointTarget { node: points[0], value: 1.0, vector: [0.0, 0.5, -0.5] },
        PointTarget { node: points[1], value: -0.5, vector: [1.0, 0.0, 0.25] },
    ];
    let sol = solve_control(&m, &targets)?;
    let got = verify_control(&op, &points, &sol.control)?;
    println!("achieved (w, ∇w) at the points: {got:.4?}");
    Ok(())
}
