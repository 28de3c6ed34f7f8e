use fcfv_core::adaptivity::{target_sizes, ExponentMode, IndicatorField};
use fcfv_core::mesh::{cell_geometry, distort, generate_structured, DomainBox, SimplicialMesh};
use fcfv_core::norms::face_points;
use fcfv_core::poisson::{self, PoissonProblem};
use fcfv_core::smalldense::{build_me, invert_cellmatrix, projection_vector};
use fcfv_core::{Point, Variant};
use proptest::prelude::*;
use std::sync::Arc;

fn coord() -> impl Strategy<Value = f64> {
    -2.0..2.0f64
}

fn point() -> impl Strategy<Value = Point> {
    (coord(), coord(), coord()).prop_map(|(x, y, z)| [x, y, z])
}

/// A random simplex, as a one-cell mesh, rejected when badly shaped.
fn simplex(dim: usize) -> impl Strategy<Value = SimplicialMesh> {
    prop::collection::vec(point(), dim + 1).prop_filter_map("degenerate simplex", move |mut pts| {
        for p in pts.iter_mut() {
            p[2] = if dim == 2 { 0.0 } else { p[2] };
        }
        let mesh = SimplicialMesh::new(dim, pts, vec![(0..=dim).collect()]).ok()?;
        let g = cell_geometry(&mesh, 0).ok()?;
        let inradius_ratio = g.volume * dim as f64 / g.perimeter() / g.h;
        (inradius_ratio > 1e-3).then_some(mesh)
    })
}

fn any_simplex() -> impl Strategy<Value = SimplicialMesh> {
    prop_oneof![simplex(2), simplex(3)]
}

fn taus(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-2..1e3f64, n)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn face_projection_preserves_face_integral(
        mesh in any_simplex(),
        a in coord(),
        b in point(),
    ) {
        let dim = mesh.dim();
        let u = |x: &Point| a + (0..dim).map(|d| b[d] * x[d]).sum::<f64>();
        let g = cell_geometry(&mesh, 0).unwrap();
        let mut nodal = [0.0; 4];
        for (i, &v) in mesh.cell(0).iter().enumerate() {
            nodal[i] = u(mesh.vertex(v));
        }
        for (j, &f) in mesh.cell_faces(0).iter().enumerate() {
            let projected = g.face_areas[j] * projection_vector(dim + 1, j).dot(&nodal);
            let quadrature: f64 = face_points(&mesh, f).map(|(x, w)| w * u(&x)).sum::<f64>() * g.face_areas[j];
            let scale = g.face_areas[j] * (a.abs() + b.iter().map(|c| c.abs() * 2.0).sum::<f64>());
            prop_assert!((projected - quadrature).abs() <= 1e-12 * scale.max(projected.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn inverse_is_an_involution(mesh in any_simplex(), t in taus(4), second in any::<bool>()) {
        let g = cell_geometry(&mesh, 0).unwrap();
        let variant = if second { Variant::Second } else { Variant::First };
        let m = build_me(&g, &t[..g.n_faces()], variant).unwrap();
        let back = invert_cellmatrix(&invert_cellmatrix(&m).unwrap()).unwrap();
        let scale = m.max_abs();
        for i in 0..m.n {
            for j in 0..m.n {
                prop_assert!((back.get(i, j) - m.get(i, j)).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn projected_matrix_is_spd(mesh in any_simplex(), t in taus(4)) {
        let g = cell_geometry(&mesh, 0).unwrap();
        let m = build_me(&g, &t[..g.n_faces()], Variant::Second).unwrap();
        prop_assert!(m.is_symmetric(1e-13 * m.max_abs()));
        prop_assert!(m.cholesky().is_some());
    }

    #[test]
    fn row_sums_match_face_weights(mesh in any_simplex(), t in taus(4), second in any::<bool>()) {
        let g = cell_geometry(&mesh, 0).unwrap();
        let n = g.n_faces();
        let variant = if second { Variant::Second } else { Variant::First };
        let m = build_me(&g, &t[..n], variant).unwrap();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| m.get(i, j)).sum();
            let expected: f64 = (0..n).filter(|&k| k != i).map(|k| t[k] * g.face_areas[k] / g.nodes_per_face() as f64).sum();
            prop_assert!(rel(row, expected) < 1e-12);
        }
    }

    #[test]
    fn larger_indicator_never_grows_target(
        h in 1e-3..1.0f64,
        eps in 1e-4..1e-1f64,
        e1 in 0.0..1.0f64,
        e2 in 0.0..1.0f64,
        dim in 2usize..=3,
        paper in any::<bool>(),
    ) {
        let mode = if paper { ExponentMode::Paper } else { ExponentMode::Richardson };
        let field = IndicatorField { dim, values: vec![e1.min(e2), e1.max(e2)], h: vec![h, h] };
        let hs = target_sizes(&field, eps, mode).unwrap();
        prop_assert!(hs[0] >= hs[1]);
        prop_assert!(hs.iter().all(|&x| x > 0.0 && x >= h / 4.0 && x <= 2.0 * h));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn distorted_meshes_stay_valid(dim in 2usize..=3, n in 1usize..5, fraction in 0.0..0.45f64, seed in any::<u64>()) {
        let m = distort(&generate_structured(dim, n, DomainBox::unit()).unwrap(), fraction, seed).unwrap();
        let mut volume = 0.0;
        for e in 0..m.n_cells() {
            let g = cell_geometry(&m, e).unwrap();
            prop_assert!(g.volume > 0.0);
            let c = g.closure_defect();
            prop_assert!(c.iter().all(|x| x.abs() < 1e-12 * g.perimeter()));
            volume += g.volume;
        }
        prop_assert!((volume - 1.0).abs() < 1e-12);
        let interior = (0..m.n_faces()).filter(|&f| m.face_cells(f).1.is_some()).count();
        prop_assert_eq!(interior, m.n_interior_faces());
        prop_assert_eq!(2 * m.n_interior_faces() + m.n_boundary_faces(), m.n_cells() * (dim + 1));
    }

    #[test]
    fn second_order_reproduces_linear_fields(
        n in 1usize..5,
        seed in any::<u64>(),
        a in coord(),
        b in point(),
    ) {
        let mesh = distort(&generate_structured(2, n, DomainBox::unit()).unwrap(), 0.3, seed).unwrap();
        let exact = move |x: &Point| a + b[0] * x[0] + b[1] * x[1];
        let problem = PoissonProblem::dirichlet_only(mesh, Arc::new(|_| 0.0), Arc::new(exact));
        let sol = poisson::solve(&problem, Variant::Second).unwrap();
        let scale = a.abs() + b[0].abs() + b[1].abs();
        for e in 0..problem.mesh.n_cells() {
            for (i, &v) in problem.mesh.cell(e).iter().enumerate() {
                prop_assert!((sol.u[e][i] - exact(problem.mesh.vertex(v))).abs() < 1e-9 * scale.max(1.0));
            }
            prop_assert!((sol.q[e][0] + b[0]).abs() < 1e-9 * scale.max(1.0));
            prop_assert!((sol.q[e][1] + b[1]).abs() < 1e-9 * scale.max(1.0));
        }
    }
}
