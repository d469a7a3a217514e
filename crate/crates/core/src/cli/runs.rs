use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{DomainConfig, ExperimentConfig, StencilName, StudyKind};
use super::{Cell, Experiment, Outputs};
use crate::analysis::{
    angle_field, circulation, dirichlet_basis, probe_basis, surface_identity_check, uniqueness_probe, LoopSpec,
    SurfacePatch,
};
use crate::control::{
    ma_matrix_from_fields, random_points, separate, solve_control, verify_control, Dictionary, PointTarget,
    RANK_THRESHOLD,
};
use crate::density::{approximate_in_algebra, represent, scalar_separation_check, FrameCover};
use crate::elliptic::{
    export_green, export_kernel, manufactured_error, BoundaryControl, DirichletOperator, KernelKind, NormalStencil,
};
use crate::geometry::io::{write_metric, write_raw, write_scalar, write_vector};
use crate::geometry::{GridDomain, MetricField, ScalarField, SmoothRandom};
use crate::jets::{jet_control_from_fields, jet_rank, laplace_jet, stacked_jets, Jet2, JetFitter};
use crate::quaternion::QuaternionField;
use crate::recovery::{calibrate, compare, recover_metric};
use crate::{Error, Result};

struct Setup {
    dom: GridDomain,
    g: MetricField,
    op: DirichletOperator,
}

fn setup(cfg: &ExperimentConfig, n: usize) -> Result<Setup> {
    let dom = cfg.domain.build(n)?;
    let g = cfg.metric.build(&dom)?;
    let op = DirichletOperator::assemble(&g, &dom)?;
    Ok(Setup { dom, g, op })
}

fn dictionary_seed(cfg: &ExperimentConfig, seed: u64) -> u64 {
    cfg.dictionary.seed.unwrap_or(seed)
}

fn ratio_cell(prev: Option<f64>, e: f64) -> Cell {
    match prev {
        Some(p) if e > 0.0 => Cell::Float(p / e),
        _ => Cell::Empty,
    }
}

pub(super) fn dispatch(exp: Experiment, cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    match exp {
        Experiment::Solve => solve(cfg, seed, out),
        Experiment::Green => green(cfg, out),
        Experiment::Control => control(cfg, seed, out),
        Experiment::Separate => separation(cfg, seed, out),
        Experiment::Jets => jets(cfg, seed, out),
        Experiment::Density => density(cfg, seed, out),
        Experiment::Recover => recover(cfg, seed, out),
        Experiment::Analyze => analyze(cfg, seed, out),
        Experiment::Convergence => convergence(cfg, seed, out),
    }
}

fn solve(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let mut rows = Vec::new();
    for &n in &cfg.resolution {
        let Setup { dom, op, .. } = setup(cfg, n)?;
        let idx = cfg.solve.control_index;
        if idx >= cfg.dictionary.size {
            return Err(Error::Config(format!(
                "solve.control_index {idx} exceeds dictionary size {}",
                cfg.dictionary.size
            )));
        }
        let dict = Dictionary::standard(&dom, idx + 1, dictionary_seed(cfg, seed));
        let f = &dict.controls[idx];
        let s = op.solve_report(&ScalarField::zeros(&dom), f)?;
        let unit = op.harmonic_extension(&BoundaryControl::constant(&dom, 1.0))?;
        let interior = dom.interior_nodes();
        let unit_defect = interior.iter().map(|&i| (unit.get(i) - 1.0).abs()).fold(0.0, f64::max);
        let (wmin, wmax) = interior
            .iter()
            .map(|&i| s.field.get(i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let (fmin, fmax) = f
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        write_scalar(&out.path(&format!("w_n{n}.bin")), &dom, &s.field)?;
        write_metric(&out.path(&format!("metric_n{n}.bin")), &dom, op.metric())?;
        rows.push(vec![
            n.into(),
            dom.h().into(),
            s.iterations.into(),
            s.residual.into(),
            wmin.into(),
            wmax.into(),
            fmin.into(),
            fmax.into(),
            unit_defect.into(),
        ]);
    }
    out.csv(
        "solve.csv",
        &[
            "n",
            "h",
            "iterations",
            "residual",
            "interior_min",
            "interior_max",
            "boundary_min",
            "boundary_max",
            "unit_defect",
        ],
        &rows,
    )
}

fn stencil(s: StencilName) -> NormalStencil {
    match s {
        StencilName::SecondOrder => NormalStencil::SecondOrder,
        StencilName::ThirdOrder => NormalStencil::ThirdOrder,
        StencilName::Discrete => NormalStencil::Discrete,
    }
}

fn green(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let gc = &cfg.green;
    let mut rows = Vec::new();
    for &n in &cfg.resolution {
        let Setup { dom, op, .. } = setup(cfg, n)?;
        let y = dom.nearest_node(gc.source);
        let x = dom.nearest_node(gc.kernel_point);
        let col = op.green_column(y)?;
        let col_x = op.green_column(x)?;
        let (gxy, gyx) = (col.field.get(x), col_x.field.get(y));
        let symmetry = (gxy - gyx).abs() / gxy.abs().max(gyx.abs()).max(f64::MIN_POSITIVE);
        let trace = dom.boundary_nodes().iter().map(|&b| col.field.get(b).abs()).fold(0.0, f64::max);
        let kind = match gc.direction {
            None => KernelKind::Value,
            Some(d) if d < 3 => {
                let mut e = [0.0; 3];
                e[d] = 1.0;
                KernelKind::Gradient { direction: e }
            }
            Some(d) => return Err(Error::Config(format!("green.direction {d} is not an axis"))),
        };
        let kernel = op.poisson_kernel_with(x, kind, stencil(gc.stencil))?;
        export_green(&out.path(&format!("green_n{n}.bin")), &op, &col)?;
        export_kernel(&out.path(&format!("kernel_n{n}.bin")), &op, &kernel)?;
        // Reproduction of a harmonic extension through the kernel.
        let f = Dictionary::standard(&dom, 5, 0).controls[4].clone();
        let w = op.harmonic_extension(&f)?;
        let exact = match kind {
            KernelKind::Value => w.get(x),
            KernelKind::Gradient { direction } => {
                let h = dom.spacing();
                (0..3)
                    .filter(|&a| direction[a] != 0.0)
                    .map(|a| {
                        let p = dom.step(x, a, 1).expect("inside");
                        let m = dom.step(x, a, -1).expect("inside");
                        direction[a] * (w.get(p) - w.get(m)) / (2.0 * h[a])
                    })
                    .sum()
            }
        };
        let reproduced = kernel.apply(&f);
        rows.push(vec![
            n.into(),
            dom.h().into(),
            symmetry.into(),
            trace.into(),
            kernel.total().into(),
            (reproduced - exact).abs().into(),
        ]);
    }
    out.csv(
        "green.csv",
        &["n", "h", "symmetry_defect", "boundary_trace", "kernel_total", "reproduction_error"],
        &rows,
    )
}

#[derive(Serialize)]
struct ControlRecord {
    n: usize,
    points: Vec<usize>,
    positions: Vec<[f64; 3]>,
    rank: usize,
    full_rank: usize,
    singular_values: Vec<f64>,
    threshold: f64,
    defect: f64,
    closed_loop_defect: f64,
    control_norm: f64,
    status: crate::control::ControlStatus,
}

fn control_points(cfg: &ExperimentConfig, dom: &GridDomain, seed: u64) -> Result<Vec<usize>> {
    if cfg.control.points.is_empty() {
        random_points(dom, cfg.control.n_points, seed)
    } else {
        Ok(cfg.control.points.iter().map(|&x| dom.nearest_node(x)).collect())
    }
}

fn control(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for &n in &cfg.resolution {
        let Setup { dom, op, .. } = setup(cfg, n)?;
        let dict = Dictionary::standard(&dom, cfg.dictionary.size, dictionary_seed(cfg, seed));
        let fields = op.harmonic_extensions(&dict.controls)?;
        let points = control_points(cfg, &dom, seed)?;
        let m = ma_matrix_from_fields(&op, &points, &dict.controls, &fields)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let targets: Vec<PointTarget> = points
            .iter()
            .map(|&p| PointTarget {
                node: p,
                value: rng.gen_range(-1.0..=1.0),
                vector: [(); 3].map(|_| rng.gen_range(-1.0..=1.0)),
            })
            .collect();
        let sol = solve_control(&m, &targets)?;
        let closed = verify_control(&op, &points, &sol.control)?;
        let rhs: Vec<f64> = targets
            .iter()
            .flat_map(|t| [t.value, t.vector[0], t.vector[1], t.vector[2]])
            .collect();
        let num: f64 = closed.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = rhs.iter().map(|b| b * b).sum::<f64>().sqrt();
        write_scalar(&out.path(&format!("control_n{n}.bin")), &dom, &sol.control.to_field(&dom))?;
        let s1 = m.singular_values.first().copied().unwrap_or(0.0);
        for (k, s) in m.singular_values.iter().enumerate() {
            rows.push(vec![n.into(), (k + 1).into(), (*s).into(), (s / s1).into()]);
        }
        records.push(ControlRecord {
            n,
            positions: points.iter().map(|&p| dom.position(p)).collect(),
            points,
            rank: m.rank(RANK_THRESHOLD),
            full_rank: 4 * targets.len(),
            singular_values: m.singular_values.clone(),
            threshold: RANK_THRESHOLD,
            defect: sol.defect,
            closed_loop_defect: num / den.max(f64::MIN_POSITIVE),
            control_norm: sol.control_norm,
            status: sol.status,
        });
    }
    out.csv("control_spectrum.csv", &["n", "index", "sigma", "ratio"], &rows)?;
    out.json("control.json", &records)
}

fn separation(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let sc = &cfg.separate;
    let mut records = Vec::new();
    for &n in &cfg.resolution {
        let Setup { dom, op, .. } = setup(cfg, n)?;
        let dict = Dictionary::standard(&dom, cfg.dictionary.size, dictionary_seed(cfg, seed));
        let target = |x: [f64; 3], h: [f64; 4]| PointTarget {
            node: dom.nearest_node(x),
            value: h[0],
            vector: [h[1], h[2], h[3]],
        };
        let s = separate(&op, &dict.controls, target(sc.a, sc.h_a), target(sc.b, sc.h_b))?;
        s.field.write(&out.path(&format!("separated_n{n}.bin")), &dom)?;
        records.push(json!({
            "n": n,
            "endpoint_errors": s.endpoint_errors,
            "tolerance": s.tolerance,
            "success": s.success(),
            "membership": [s.membership.0, s.membership.1],
            "divcurl_residual": s.divcurl_residual,
            "scalar_defect": s.scalar_control.defect,
            "gradient_defect": s.gradient_control.defect,
            "note": s.compatibility_note,
        }));
    }
    out.json("separate.json", &records)
}

fn jets(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let jc = &cfg.jets;
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for &n in &cfg.resolution {
        let Setup { dom, g, op } = setup(cfg, n)?;
        let dict = Dictionary::standard(&dom, cfg.dictionary.size, dictionary_seed(cfg, seed));
        let fields = op.harmonic_extensions(&dict.controls)?;
        let fitter = JetFitter::new(&dom);
        for (pi, &x) in jc.points.iter().enumerate() {
            let a = dom.nearest_node(x);
            let stack = stacked_jets(&fitter, &dom, &fields, a)?;
            let jr = jet_rank(&stack, jc.threshold);
            let lambda = laplace_jet(&dom, &g, a)?;
            let s1 = jr.singular_values[0];
            for (k, s) in jr.singular_values.iter().enumerate() {
                rows.push(vec![n.into(), pi.into(), (k + 1).into(), (*s).into(), (s / s1).into()]);
            }
            // Target: the 2-jet of x¹x², projected off the Laplace jet.
            let mut hess = [[0.0; 3]; 3];
            hess[0][1] = 1.0;
            hess[1][0] = 1.0;
            let raw = Jet2::from_derivatives(0.0, [0.0; 3], hess);
            let pairing = raw.dot(&lambda) / lambda.dot(&lambda);
            let target = raw.sub(&lambda.scale(pairing));
            let jc_res = jet_control_from_fields(&op, &fitter, a, &target, &dict.controls, &fields)?;
            records.push(json!({
                "n": n,
                "point": pi,
                "node": a,
                "position": dom.position(a),
                "rank": jr.rank,
                "threshold": jc.threshold,
                "cosine": jr.null_vector.cosine(&lambda).abs(),
                "null_vector": jr.null_vector.0,
                "laplace_jet": lambda.0,
                "target_projection": pairing,
                "jet_control_defect": jc_res.defect,
            }));
        }
    }
    out.csv("jets_spectrum.csv", &["n", "point", "index", "sigma", "ratio"], &rows)?;
    out.json("jets.json", &records)
}

/// Smooth seeded quaternion target for representation experiments.
fn smooth_target(dom: &GridDomain, seed: u64) -> Result<QuaternionField> {
    QuaternionField::new(SmoothRandom::new(seed, 4).sample(dom), SmoothRandom::vector(seed, 4, dom))
}

fn random_pairs(dom: &GridDomain, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let nodes = dom.domain_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut out = Vec::with_capacity(count);
    while out.len() < count && nodes.len() > 1 {
        let (i, j) = (rng.gen_range(0..nodes.len()), rng.gen_range(0..nodes.len()));
        if i != j {
            out.push((nodes[i], nodes[j]));
        }
    }
    out
}

fn density(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let dc = &cfg.density;
    if dc.max_degree == 0 {
        return Err(Error::Config("density.max_degree must be at least 1".into()));
    }
    let mut records = Vec::new();
    let mut rows = Vec::new();
    for &n in &cfg.resolution {
        let Setup { dom, g, op } = setup(cfg, n)?;
        let dict = Dictionary::standard(&dom, cfg.dictionary.size, dictionary_seed(cfg, seed));
        let fields = op.harmonic_extensions(&dict.controls)?;
        let pairs = random_pairs(&dom, dc.pairs, seed);
        let sep = scalar_separation_check(&op, &pairs, &dict.controls)?;
        let cover = FrameCover::from_fields(&op, &dict.controls, &fields)?;
        let p = smooth_target(&dom, seed)?;
        let rep = represent(&p, &cover, &g, &dom)?;
        let degrees: Vec<usize> = (1..=dc.max_degree).collect();
        let approx = approximate_in_algebra(&p, &cover, &rep, &fields, &g, &dom, &degrees)?;
        for a in &approx {
            rows.push(vec![
                n.into(),
                a.degree.into(),
                a.objective.into(),
                a.sup_error.into(),
                a.element.depth.into(),
            ]);
        }
        if let Some(last) = approx.last() {
            out.json(&format!("algebra_n{n}.json"), &last.element)?;
        }
        let nonincreasing = approx.windows(2).all(|w| w[1].objective <= w[0].objective);
        records.push(json!({
            "n": n,
            "balls": cover.len(),
            "radii": cover.balls.iter().map(|b| b.radius).collect::<Vec<_>>(),
            "max_frame_cond": cover.balls.iter().map(|b| b.max_cond).fold(0.0, f64::max),
            "partition_defect": cover.partition_defect(&dom),
            "represent_error": rep.error,
            "separation": {
                "pass": sep.pass,
                "min_coverage": sep.min_coverage,
                "min_margin": sep.pairs.iter().map(|m| m.margin).fold(f64::INFINITY, f64::min),
            },
            "objective_nonincreasing": nonincreasing,
        }));
    }
    out.csv("density.csv", &["n", "degree", "objective", "sup_error", "depth"], &rows)?;
    out.json("density.json", &records)
}

fn load_samples(dir: &std::path::Path, dom: &GridDomain, count: usize) -> Result<Vec<ScalarField>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    files.sort();
    if files.len() < count {
        return Err(Error::Config(format!(
            "{} holds {} sample files, {count} requested",
            dir.display(),
            files.len()
        )));
    }
    files
        .iter()
        .take(count)
        .map(|p| crate::geometry::io::read_scalar(p, dom))
        .collect()
}

fn recover(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let rc = &cfg.recover;
    let mut records = Vec::new();
    for &n in &cfg.resolution {
        let Setup { dom, g, op } = setup(cfg, n)?;
        let harmonics = match &rc.samples_dir {
            Some(dir) => load_samples(dir, &dom, rc.samples)?,
            None => {
                let dict = Dictionary::standard(&dom, rc.samples, dictionary_seed(cfg, seed));
                op.harmonic_extensions(&dict.controls)?
            }
        };
        let raw = recover_metric(&dom, &harmonics, rc.mode)?;
        let anchor = dom.nearest_node(rc.anchor);
        let res = calibrate(&raw, anchor, g.at(anchor))?;
        let cmp = compare(&res, &g);
        let mut data = vec![0.0; 6 * dom.len()];
        for (&node, m) in res.nodes.iter().zip(&res.metric) {
            data[6 * node..6 * node + 6].copy_from_slice(&m.0);
        }
        write_raw(&out.path(&format!("recovered_n{n}.bin")), &dom, 6, &data)?;
        let rows: Vec<Vec<Cell>> = res
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &node)| {
                let x = dom.position(node);
                vec![
                    node.into(),
                    x[0].into(),
                    x[1].into(),
                    x[2].into(),
                    res.residual[i].into(),
                    cmp.errors[i].into(),
                    cmp.scales[i].into(),
                ]
            })
            .collect();
        out.csv(
            &format!("recover_n{n}.csv"),
            &["node", "x", "y", "z", "residual", "error", "scale"],
            &rows,
        )?;
        records.push(json!({
            "n": n,
            "samples": harmonics.len(),
            "mode": rc.mode,
            "anchor": anchor,
            "calibration": res.calibration,
            "recovered_nodes": res.nodes.len(),
            "max_residual": res.residual.iter().copied().fold(0.0, f64::max),
            "max_error": cmp.max_error,
            "scale_spread": cmp.scale_spread,
            "flagged": cmp.flagged,
            "integrability": res.integrability,
        }));
    }
    out.json("recover.json", &records)
}

fn analyze(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let ac = &cfg.analyze;
    let mut records: Vec<Value> = Vec::new();
    for &n in &cfg.resolution {
        let Setup { dom, g, op } = setup(cfg, n)?;
        match &cfg.domain {
            DomainConfig::BoxMinusBox { .. } => {
                let b = dirichlet_basis(&op)?;
                for (i, d) in b.fields.iter().enumerate() {
                    write_vector(&out.path(&format!("dirichlet_n{n}_{i}.bin")), &dom, d)?;
                }
                records.push(json!({
                    "n": n,
                    "kind": "dirichlet_fields",
                    "count": b.fields.len(),
                    "rot_residual": b.rot_residual,
                    "div_residual": b.div_residual,
                    "tangential": b.tangential,
                    "total_flux": b.total_flux,
                    "capacity": b.capacity,
                    "quadrature_flux": b.quadrature_flux,
                }));
            }
            DomainConfig::BoxMinusColumn { column_lo, column_hi, .. } => {
                let center = [0.5 * (column_lo[0] + column_hi[0]), 0.5 * (column_lo[1] + column_hi[1])];
                let u = angle_field(&dom, &g, 2, center);
                let [nx, ny, nz] = dom.dims();
                let (ilo, ihi) = (dom.nearest_node([column_lo[0], column_lo[1], 0.0]), dom.nearest_node([column_hi[0], column_hi[1], 0.0]));
                let (clo, chi) = (dom.coords_of(ilo), dom.coords_of(ihi));
                let around = LoopSpec {
                    axis: 2,
                    level: nz / 2,
                    lo: [clo[0].saturating_sub(clo[0] / 2), clo[1].saturating_sub(clo[1] / 2)],
                    hi: [chi[0] + (nx - 1 - chi[0]) / 2, chi[1] + (ny - 1 - chi[1]) / 2],
                };
                let off = LoopSpec {
                    axis: 2,
                    level: nz / 2,
                    lo: [1, 1],
                    hi: [(clo[0] - 1).max(2), (clo[1] - 1).max(2)],
                };
                let c_around = circulation(&dom, &g, &u, &around)?;
                let c_off = circulation(&dom, &g, &u, &off)?;
                write_vector(&out.path(&format!("angle_field_n{n}.bin")), &dom, &u)?;
                records.push(json!({
                    "n": n,
                    "kind": "circulation",
                    "around_column": around,
                    "circulation": c_around,
                    "expected": std::f64::consts::TAU,
                    "relative_error": (c_around - std::f64::consts::TAU).abs() / std::f64::consts::TAU,
                    "off_column": off,
                    "off_circulation": c_off,
                }));
            }
            DomainConfig::Box { .. } => {
                let axis = ac.patch_axis;
                if axis > 2 {
                    return Err(Error::Config(format!("analyze.patch_axis {axis} is not an axis")));
                }
                let dict = Dictionary::standard(&dom, ac.probe_fields + 1, dictionary_seed(cfg, seed));
                let ws = op.harmonic_extensions(&dict.controls[1..])?;
                let basis = probe_basis(&dom, &g, &ws)?;
                let patch = SurfacePatch::central(&dom, axis)?;
                let report = uniqueness_probe(&dom, &g, &basis, &patch)?;
                let rows: Vec<Vec<Cell>> = report
                    .table
                    .iter()
                    .map(|r| vec![r.field.into(), r.sup_on_patch.into(), r.sup_on_domain.into(), r.ratio.into()])
                    .collect();
                out.csv(
                    &format!("certificate_n{n}.csv"),
                    &["field", "sup_on_patch", "sup_on_domain", "ratio"],
                    &rows,
                )?;
                let surface = if g.is_flat() {
                    let v = SmoothRandom::vector(seed, 4, &dom);
                    Some(surface_identity_check(&dom, &g, &v, &patch)?)
                } else {
                    None
                };
                records.push(json!({
                    "n": n,
                    "kind": "uniqueness_probe",
                    "basis_size": basis.len(),
                    "patch_nodes": patch.nodes.len(),
                    "ratio": report.ratio,
                    "sigma_min": report.sigma_min,
                    "sigma_max": report.sigma_max,
                    "dependent_basis": report.dependent_basis,
                    "note": report.note,
                    "surface_identity_residual": surface,
                }));
            }
        }
    }
    out.json("analyze.json", &records)
}

fn convergence(cfg: &ExperimentConfig, seed: u64, out: &mut Outputs) -> Result<()> {
    let study = cfg.convergence.study;
    let mut rows = Vec::new();
    let mut prev = None;
    for &n in &cfg.resolution {
        let (h, err) = match study {
            StudyKind::Manufactured => {
                if !matches!(cfg.domain, DomainConfig::Box { .. }) {
                    return Err(Error::Config("the manufactured study runs on the unit box".into()));
                }
                let preset = cfg
                    .metric
                    .preset()
                    .ok_or_else(|| Error::Config("the manufactured study needs a metric preset".into()))?;
                manufactured_error(preset, n)?
            }
            StudyKind::Calculus => {
                let dom = cfg.domain.build(n)?;
                let g = cfg.metric.build(&dom)?;
                let (a, b) = crate::geometry::ops::calculus_residuals(&dom, &g, seed)?;
                (dom.h(), a.max(b))
            }
            StudyKind::PoissonRowSum => {
                let Setup { dom, op, .. } = setup(cfg, n)?;
                let x = dom.nearest_node(cfg.green.kernel_point);
                let k = op.poisson_kernel_with(x, KernelKind::Value, stencil(cfg.green.stencil))?;
                (dom.h(), (k.total() - 1.0).abs())
            }
            StudyKind::Conformal => {
                let dom = cfg.domain.build(n)?;
                let g = cfg.metric.build(&dom)?;
                (dom.h(), crate::recovery::conformal_study_residual(&dom, &g)?)
            }
        };
        rows.push(vec![n.into(), h.into(), err.into(), ratio_cell(prev, err)]);
        prev = Some(err);
    }
    out.csv("convergence.csv", &["n", "h", "error", "ratio"], &rows)?;
    out.json("convergence.json", &json!({ "study": study }))
}
