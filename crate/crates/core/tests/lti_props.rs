use crone_core::lti::{
    lag_lead_power_sections, logspace, oustaloup_cells, tf_to_ss, unwrap, Cascade, RationalTf,
};
use proptest::prelude::*;

fn poly_from_roots(roots: &[f64], lead: f64) -> Vec<f64> {
    let mut p = vec![lead];
    for r in roots {
        let mut next = vec![0.0; p.len() + 1];
        for (i, c) in p.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * r;
        }
        p = next;
    }
    p
}

proptest! {
    #[test]
    fn realization_matches_rational_eval(
        poles in prop::collection::vec(-1e3f64..-1e-1, 1..5),
        zeros in prop::collection::vec(-1e3f64..1e3, 0..4),
        k in 0.1f64..10.0,
        w in 1e-2f64..1e4,
    ) {
        prop_assume!(zeros.len() <= poles.len());
        let tf = RationalTf::new(poly_from_roots(&zeros, k), poly_from_roots(&poles, 1.0)).unwrap();
        let ss = tf_to_ss(&tf).unwrap();
        let (a, b) = (tf.eval(w), ss.eval(w));
        prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1e-12));
    }

    #[test]
    fn series_is_product(
        p1 in -1e2f64..-1e-1, p2 in -1e2f64..-1e-1, z in -1e2f64..1e2, w in 1e-2f64..1e3,
    ) {
        let a = RationalTf::new(poly_from_roots(&[z], 2.0), poly_from_roots(&[p1], 1.0)).unwrap();
        let b = RationalTf::new(vec![1.0], poly_from_roots(&[p2], 1.0)).unwrap();
        let s = a.series(&b);
        let expect = a.eval(w) * b.eval(w);
        prop_assert!((s.eval(w) - expect).norm() <= 1e-10 * expect.norm());
    }

    #[test]
    fn oustaloup_cells_interlace(nu in 0.05f64..0.95, cells in 2usize..8) {
        let c = oustaloup_cells(10.0, 1e4, nu, cells);
        prop_assert_eq!(c.len(), cells);
        for (i, (z, p)) in c.iter().enumerate() {
            prop_assert!(z < p);
            if i + 1 < c.len() {
                prop_assert!(*p < c[i + 1].0);
            }
        }
    }

    #[test]
    fn power_split_realization_agrees(exp in 0.0f64..2.0, w in 1.0f64..1e5) {
        let sections = lag_lead_power_sections(2.0 * std::f64::consts::PI * 12.5, 2.0 * std::f64::consts::PI * 800.0, exp, 4).unwrap();
        let c = Cascade::new(sections);
        let ss = c.to_ss();
        let (a, b) = (c.eval(w), ss.eval(w));
        prop_assert!((a - b).norm() <= 1e-9 * a.norm());
    }
}

#[test]
fn unwrap_removes_jumps() {
    let raw: Vec<f64> = (0..50)
        .map(|k| {
            let p = -0.3 * k as f64;
            (p + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI
        })
        .collect();
    let u = unwrap(raw);
    for w in u.windows(2) {
        assert!((w[1] - w[0] + 0.3).abs() < 1e-12);
    }
}

#[test]
fn logspace_endpoints() {
    let g = logspace(1.0, 1e3, 4);
    assert_eq!(g.len(), 4);
    assert!((g[0] - 1.0).abs() < 1e-12 && (g[3] - 1e3).abs() < 1e-9 && (g[1] - 10.0).abs() < 1e-9);
}
