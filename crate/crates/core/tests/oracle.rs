mod common;

use common::{edge_oracle, element_oracle, random_params, random_triangle, rel_diff};
use maxnit_core::assembly::{edge_nitsche_blocks, local_element_matrix, EdgeGeometry, Formulation, Params, Terms};
use maxnit_core::mesh::{gen_lshape, map_to_curved_l, powell_sabin_refine};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const TOL: f64 = 1e-12;

fn outward_normal(tri: [[f64; 2]; 3], edge: [usize; 2]) -> [f64; 2] {
    let (a, b) = (tri[edge[0]], tri[edge[1]]);
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    // counter-clockwise triangle: the outward normal is the edge direction turned clockwise
    [d[1] / len, -d[0] / len]
}

#[test]
fn element_matrices_match_oracle() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..100 {
        let tri = random_triangle(&mut rng);
        let params = random_params(&mut rng);
        let ours = local_element_matrix(tri, &params, &Terms::for_params(&params)).unwrap();
        let d = rel_diff(&ours, &element_oracle(tri, &params));
        assert!(d < TOL, "triangle {tri:?}: relative difference {d:e}");
    }
}

#[test]
fn edge_matrices_match_oracle() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..100 {
        let tri = random_triangle(&mut rng);
        let params = random_params(&mut rng);
        let k = rng.gen_range(0..3);
        let edge = [k, (k + 1) % 3];
        let a = tri[edge[0]];
        let b = tri[edge[1]];
        let geom = EdgeGeometry {
            tri,
            edge,
            normal: outward_normal(tri, edge),
            length: (b[0] - a[0]).hypot(b[1] - a[1]),
            local_h: rng.gen_range(0.05..1.0),
        };
        let ours = edge_nitsche_blocks(&geom, &params, &Terms::for_params(&params)).unwrap();
        let expected = edge_oracle(tri, edge, geom.normal, geom.local_h, &params);
        let d = rel_diff(&ours, &expected);
        assert!(d < TOL, "edge {edge:?} of {tri:?}: relative difference {d:e}");
    }
}

#[test]
fn mesh_edges_match_oracle() {
    // edges taken from a real mesh exercise the normal and local_h bookkeeping
    let mesh = powell_sabin_refine(&map_to_curved_l(&gen_lshape(4).unwrap()).unwrap()).unwrap();
    let params = Params::stabilised(0.5, 0.1);
    for e in mesh.boundary_edges() {
        let geom = EdgeGeometry::from_mesh(&mesh, e).unwrap();
        let tri = mesh.triangle_points(e.triangle);
        assert!((geom.local_h - mesh.triangles()[e.triangle].h).abs() < 1e-15);
        let n = outward_normal(tri, geom.edge);
        assert!((n[0] - e.normal[0]).abs() < 1e-12 && (n[1] - e.normal[1]).abs() < 1e-12);
        let ours = edge_nitsche_blocks(&geom, &params, &Terms::for_params(&params)).unwrap();
        let d = rel_diff(&ours, &edge_oracle(tri, geom.edge, e.normal, geom.local_h, &params));
        assert!(d < TOL, "{d:e}");
    }
}

#[test]
fn galerkin_element_drops_stabilisation() {
    let mut rng = StdRng::seed_from_u64(3);
    let tri = random_triangle(&mut rng);
    let params = Params::stabilised(1.0, 1.0).with_formulation(Formulation::GalerkinNitsche);
    let ours = local_element_matrix(tri, &params, &Terms::for_params(&params)).unwrap();
    let full = element_oracle(tri, &params);
    let stab = element_oracle(tri, &Params { c_u: 0.0, ..params });
    // pressure block is pure stabilisation; the u-u block loses only div-div
    for i in 0..9 {
        for j in 0..9 {
            let expected = if i % 3 == 2 && j % 3 == 2 { 0.0 } else { stab[i][j] };
            assert!((ours[i][j] - expected).abs() < 1e-12 * (1.0 + full[i][j].abs()), "({i},{j})");
        }
    }
}
