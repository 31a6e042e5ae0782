mod common;

use common::*;
use exitgame::grid::{build_grid, GridSpec, NodeRole};
use exitgame::problem::*;
use proptest::prelude::*;

#[test]
fn three_by_three_roles() {
    let g = grid(&zero_game(), &[3, 3]);
    assert_eq!(g.role_counts(), [1, 2, 2, 4]);
    let centre = g.node_at(&[0.5, 0.5]).unwrap();
    assert_eq!(g.role(centre), NodeRole::Interior);
    assert_eq!(g.role(g.node_at(&[0.0, 0.5]).unwrap()), NodeRole::XFace);
    assert_eq!(g.role(g.node_at(&[0.5, 1.0]).unwrap()), NodeRole::YFace);
    assert_eq!(g.role(g.node_at(&[1.0, 1.0]).unwrap()), NodeRole::Corner);
}

#[test]
fn two_by_two_is_all_corners() {
    assert_eq!(grid(&zero_game(), &[2, 2]).role_counts(), [0, 0, 0, 4]);
}

#[test]
fn role_counts_sum_to_node_count() {
    let g = grid(&zero_game(), &[7, 4]);
    assert_eq!(g.role_counts().iter().sum::<usize>(), g.len());
    // 5 interior x-nodes × 2 interior y-nodes, and so on
    assert_eq!(g.role_counts(), [10, 4, 10, 4]);
}

#[test]
fn too_few_nodes_is_rejected() {
    assert!(build_grid(&zero_game(), &GridSpec::new(vec![1, 3])).is_err());
    assert!(build_grid(&zero_game(), &GridSpec::new(vec![3])).is_err());
}

#[test]
fn interpolation_at_nodes_returns_node_values() {
    let mut g = grid(&zero_game(), &[5, 4]);
    let vals: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
    g.set_values(vals.clone()).unwrap();
    for i in 0..g.len() {
        assert_eq!(g.interpolate(&g.coords(i)).unwrap(), vals[i]);
    }
}

#[test]
fn outside_points_are_errors() {
    let g = grid(&zero_game(), &[3, 3]);
    assert!(g.interpolate(&[1.1, 0.5]).is_err());
}

fn affine_grid(c: [f64; 3], nodes: [usize; 2]) -> exitgame::ValueGrid {
    let mut g = grid(&zero_game(), &nodes);
    let v = (0..g.len()).map(|i| {
        let z = g.coords(i);
        c[0] + c[1] * z[0] + c[2] * z[1]
    });
    let v: Vec<f64> = v.collect();
    g.set_values(v).unwrap();
    g
}

proptest! {
    #[test]
    fn affine_fields_are_reproduced(c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, c2 in -5.0f64..5.0,
                                    nx in 2usize..9, ny in 2usize..9, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let g = affine_grid([c0, c1, c2], [nx, ny]);
        let v = g.interpolate(&[x, y]).unwrap();
        prop_assert!((v - (c0 + c1 * x + c2 * y)).abs() < 1e-12);
    }

    #[test]
    fn constants_are_reproduced(c in -10.0f64..10.0, x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let g = affine_grid([c, 0.0, 0.0], [6, 3]);
        prop_assert!((g.interpolate(&[x, y]).unwrap() - c).abs() < 1e-14);
    }

    #[test]
    fn interpolation_is_monotone_and_nonexpansive(
        u in prop::collection::vec(-3.0f64..3.0, 20),
        d in prop::collection::vec(0.0f64..2.0, 20),
        x in 0.0f64..=1.0, y in 0.0f64..=1.0,
    ) {
        let g = grid(&zero_game(), &[5, 4]);
        let v: Vec<f64> = u.iter().zip(&d).map(|(a, b)| a + b).collect();
        let iu = g.interpolate_with(&u, &[x, y]).unwrap();
        let iv = g.interpolate_with(&v, &[x, y]).unwrap();
        let sup = d.iter().cloned().fold(0.0, f64::max);
        prop_assert!(iu <= iv + 1e-12);
        prop_assert!(iv - iu <= sup + 1e-12);
    }
}

#[test]
fn multi_index_round_trips() {
    let p = GameProblem::new(
        BoxDomain::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap(),
        unit(),
        Dynamics::new(XDrift::Decoupled(drift(|_, _| vec![0.0, 0.0])), drift(|_, _| vec![0.0]), 1.0, 1.0).unwrap(),
        ControlSet::new(vec![vec![0.0, 0.0]]).unwrap(),
        scalars(&[0.0]),
        Costs::constant(0.0, 0.0, 0.0, 0.0, 1.0).unwrap(),
    )
    .unwrap();
    let g = grid(&p, &[4, 3, 5]);
    for i in 0..g.len() {
        assert_eq!(g.flat_index(&g.multi_index(i)), i);
    }
    // interior nodes: 2 × 1 × 3
    assert_eq!(g.role_counts()[0], 6);
}
