use std::f64::consts::PI;

use hhx_core::constants::*;
use hhx_core::domain::{voxelize, GeometrySpec};
use hhx_core::grid_calculus::{Cell, Edge, Face, Field, FieldKind, Flavor, Kind, Mesh};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn cube(n: usize) -> Mesh {
    Mesh::new(&voxelize(&GeometrySpec::cuboid([1.0; 3], 1.0 / n as f64)).unwrap())
}

fn tight() -> EigenConfig {
    EigenConfig {
        tol: 1e-9,
        ..EigenConfig::default()
    }
}

fn dense<S: Kind, T: Kind>(m: &Mesh, apply: impl Fn(&Field<S>) -> Field<T>) -> DMatrix<f64> {
    let ns = S::KIND.len(m.dims());
    let nt = T::KIND.len(m.dims());
    let mut a = DMatrix::zeros(nt, ns);
    for j in 0..ns {
        let mut e = vec![0.0; ns];
        e[j] = 1.0;
        let y = apply(&m.field_from_vec(Flavor::Natural, e).unwrap());
        for (i, v) in y.data().iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    a
}

fn support_indices(m: &Mesh, kind: FieldKind, fl: Flavor) -> Vec<usize> {
    m.support(kind, fl).iter().enumerate().filter_map(|(i, &s)| s.then_some(i)).collect()
}

/// `M_t^{1/2} A M_s^{-1/2}` restricted to the given rows and columns.
fn scaled(m: &Mesh, a: &DMatrix<f64>, rows: &[usize], tk: FieldKind, cols: &[usize], sk: FieldKind) -> DMatrix<f64> {
    let wt = m.weights(tk);
    let ws = m.weights(sk);
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        a[(rows[r], cols[c])] * wt[rows[r]].sqrt() / ws[cols[c]].sqrt()
    })
}

fn sorted_eigenvalues(s: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

#[test]
fn maxwell_matches_dense_eigensolve_on_6_cubed() {
    let m = cube(6);
    let c = dense::<Edge, Face>(&m, |e| m.rot(e).unwrap());
    let faces: Vec<usize> = (0..FieldKind::Face.len(m.dims())).collect();
    let e_int = support_indices(&m, FieldKind::Edge, Flavor::Essential);
    let f_int = support_indices(&m, FieldKind::Face, Flavor::Essential);

    // tangential: ||C x||^2 on interior edges, gradients of interior nodes span the kernel
    let b = scaled(&m, &c, &faces, FieldKind::Face, &e_int, FieldKind::Edge);
    let ev = sorted_eigenvalues(b.transpose() * &b);
    let kernel = m.support_size(FieldKind::Node, Flavor::Essential);
    assert!(ev[kernel - 1].abs() < 1e-8, "{}", ev[kernel - 1]);
    let lambda_t = ev[kernel];

    // normal: ||C* y||^2 on interior faces, dual gradients of cells modulo constants span the kernel
    let b = scaled(&m, &c, &f_int, FieldKind::Face, &e_int, FieldKind::Edge);
    let ev = sorted_eigenvalues(&b * b.transpose());
    let kernel = m.support_size(FieldKind::Cell, Flavor::Natural) - 1;
    assert!(ev[kernel - 1].abs() < 1e-8, "{}", ev[kernel - 1]);
    let lambda_n = ev[kernel];

    let h = 1.0 / 6.0;
    let closed = 2.0 * 4.0 * (PI * h / 2.0).sin().powi(2) / (h * h);
    assert!((lambda_t - closed).abs() < 1e-9 * closed);
    assert!((lambda_n - closed).abs() < 1e-9 * closed);

    let t = estimate_maxwell(&m, MaxwellFlavor::Tangential, &tight()).unwrap();
    let n = estimate_maxwell(&m, MaxwellFlavor::Normal, &tight()).unwrap();
    assert!((t.lambda - lambda_t).abs() < 1e-8 * lambda_t, "{} vs {lambda_t}", t.lambda);
    assert!((n.lambda - lambda_n).abs() < 1e-8 * lambda_n, "{} vs {lambda_n}", n.lambda);
    assert!(t.constraint_residual < 1e-8 && n.constraint_residual < 1e-8);
}

/// Smallest eigenvalue of the Neumann cell Laplacian with zero mean on every
/// slab, by shifting the slab indicators out of the way.
fn dense_specialized(m: &Mesh, axis: usize, count: usize) -> f64 {
    let d = dense::<Face, Cell>(m, |f| m.div(f).unwrap());
    let cells = support_indices(m, FieldKind::Cell, Flavor::Natural);
    let f_int = support_indices(m, FieldKind::Face, Flavor::Essential);
    let b = scaled(m, &d, &cells, FieldKind::Cell, &f_int, FieldKind::Face);
    let mut s = &b * b.transpose();
    let dims = m.dims();
    let w = m.weights(FieldKind::Cell);
    let width = dims[axis] / count;
    let shift = 1e3 * s.diagonal().max();
    for g in 0..count {
        let mut v = DVector::zeros(cells.len());
        for (r, &c) in cells.iter().enumerate() {
            let p = [c % dims[0], (c / dims[0]) % dims[1], c / (dims[0] * dims[1])];
            if p[axis] / width == g {
                v[r] = w[c].sqrt();
            }
        }
        let v = v.normalize();
        s += shift * &v * v.transpose();
    }
    sorted_eigenvalues(s)[0]
}

#[test]
fn specialized_poincare_matches_dense_eigensolve_on_8_cubed() {
    let m = cube(8);
    let mut prev = f64::INFINITY;
    for n in [1, 2, 4, 8] {
        let want = dense_specialized(&m, 0, n);
        let got = estimate_specialized_poincare(&m, 0, n, &tight()).unwrap();
        assert!((got.lambda - want).abs() < 1e-8 * want, "N={n}: {} vs {want}", got.lambda);
        assert!(got.constraint_residual < 1e-8);
        assert!(got.value <= prev * (1.0 + 1e-9), "N={n}");
        prev = got.value;
    }
    // the cos(pi x_2) mode survives every x_1-slab constraint
    let h = 0.125;
    let closed = 4.0 * (PI * h / 2.0).sin().powi(2) / (h * h);
    assert!((dense_specialized(&m, 0, 8) - closed).abs() < 1e-9 * closed);
}

#[test]
fn poincare_and_friedrichs_match_closed_forms() {
    for n in [4, 8] {
        let m = cube(n);
        let h = 1.0 / n as f64;
        let s = 4.0 * (PI * h / 2.0).sin().powi(2) / (h * h);
        let cp = estimate_poincare(&m, &tight()).unwrap();
        assert!((cp.lambda - s).abs() < 1e-8 * s);
        let cf = estimate_friedrichs(&m, &tight()).unwrap();
        assert!((cf.lambda - 3.0 * s).abs() < 1e-8 * s);
        assert!(cf.value < cp.value);
    }
}

#[test]
fn grid_eigenvalues_approach_the_continuum_from_below() {
    let a = estimate_poincare(&cube(8), &tight()).unwrap().lambda;
    let b = estimate_poincare(&cube(16), &tight()).unwrap().lambda;
    assert!(a < b && b < PI * PI);
    let extrapolated = richardson((1.0 / 8.0, a), (1.0 / 16.0, b), 2.0);
    assert!((extrapolated - PI * PI).abs() < (b - PI * PI).abs());
}

#[test]
fn box_mixed_constants_order() {
    let m = Mesh::new(&voxelize(&GeometrySpec::cuboid([2.0, 1.0, 1.0], 0.125)).unwrap());
    let cfg = tight();
    let cp = estimate_poincare(&m, &cfg).unwrap();
    let cmt = estimate_mixed_maxwell(&m, MaxwellFlavor::Tangential, &cfg).unwrap();
    let cmn = estimate_mixed_maxwell(&m, MaxwellFlavor::Normal, &cfg).unwrap();
    let cm = estimate_maxwell(&m, MaxwellFlavor::Tangential, &cfg).unwrap();
    assert!(cmt.value <= cmn.value);
    assert!((cmn.value - cp.value).abs() < 1e-8 * cp.value);
    // the lowest box cavity mode has wave numbers (1/2, 1, 0) and (1/2, 0, 1)
    let h: f64 = 0.125;
    let s = |k: f64| 4.0 * (PI * h * k / 2.0).sin().powi(2) / (h * h);
    let want = s(0.5) + s(1.0);
    assert!((cm.lambda - want).abs() < 1e-8 * want, "{} vs {want}", cm.lambda);
}

#[test]
fn report_on_a_small_cube() {
    let m = cube(8);
    let rep = bounds_report(&m, &ConstantRequest::all(vec![(0, 1), (0, 2), (0, 4)]), &EigenConfig::default()).unwrap();
    assert!(rep.improvement);
    assert!(rep.warnings.is_empty());
    for row in &rep.inequalities {
        assert!(row.pass, "{row:?}");
    }
    let csv = rep.to_csv();
    assert_eq!(csv.lines().count(), 1 + 6 + rep.estimates.len() + rep.inequalities.len());
    let json = serde_json::to_string(&rep).unwrap();
    let back: BoundsReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rep);
}
