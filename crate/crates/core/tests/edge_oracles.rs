use std::f64::consts::PI;

use kitaev_edge::edgetheory as th;
use kitaev_edge::hamiltonian::{assemble, CouplingParams, GaugeConfig};
use kitaev_edge::lattice::{build_strip, EdgeKind, Periodicity, SQRT3};
use kitaev_edge::spectra::*;

const KAPPA: f64 = 0.027;

fn model(kind: EdgeKind, rows: usize, per: Periodicity, p: &CouplingParams) -> BlochModel {
    let g = build_strip(kind, rows, 2, per).unwrap();
    let a = assemble(&g, p, &GaugeConfig::uniform(&g)).unwrap();
    BlochModel::new(&g, &a).unwrap()
}

fn strip(kind: EdgeKind, rows: usize, p: &CouplingParams) -> BlochModel {
    model(kind, rows, Periodicity::PeriodicX, p)
}

#[test]
fn torus_gap_isotropic_and_anisotropic() {
    let grid: Vec<f64> = (0..96).map(|k| 2.0 * PI * k as f64 / 96.0).collect();
    let p = CouplingParams::isotropic(1.0, KAPPA);
    let m = model(EdgeKind::Zigzag, 64, Periodicity::Torus, &p);
    let gap = minimal_energy(&m, &grid);
    assert!((gap / (6.0 * SQRT3 * KAPPA) - 1.0).abs() < 0.02, "{gap}");
    let p = CouplingParams {
        kappa: [0.01, 0.02, 0.035],
        ..Default::default()
    };
    let m = model(EdgeKind::Zigzag, 64, Periodicity::Torus, &p);
    let gap = minimal_energy(&m, &grid);
    assert!((gap / th::bulk_gap(p.kappa) - 1.0).abs() < 0.02, "{gap}");
}

#[test]
fn zigzag_zero_boundary_field_branch() {
    let m = strip(EdgeKind::Zigzag, 80, &CouplingParams::isotropic(1.0, KAPPA));
    // near the ends of the interval the branch penetrates deep before merging with the continuum
    let sel = BranchSelector {
        edge: Edge::Top,
        depth: 16,
        threshold: 0.4,
    };
    let z = zero_crossing(&m, sel, 2.8, 3.5).unwrap();
    assert!((z - PI).abs() < 1e-6);
    for k in -19..=19 {
        let q = PI + k as f64 * PI / 60.0;
        let e = branch_energy(&m, sel, q).unwrap();
        let t = th::zigzag_zero_field_energy(q, [KAPPA; 3]);
        assert!(
            (e.abs() - t.abs()).abs() <= 0.05 * t.abs() + 1e-12,
            "q={q} {e} {t}"
        );
    }
    let v = group_velocity(&m, sel, PI, 0.01).unwrap();
    assert!((v.abs() / 0.324 - 1.0).abs() < 0.03, "{v}");
    // the bottom edge runs the other way
    let vb = group_velocity(
        &m,
        BranchSelector {
            edge: Edge::Bottom,
            ..sel
        },
        PI,
        0.01,
    )
    .unwrap();
    assert!((v + vb).abs() < 1e-6);
}

#[test]
fn zero_field_velocity_is_linear_in_kappa() {
    let sel = BranchSelector::zigzag_top();
    let v: Vec<f64> = [0.005, 0.01]
        .iter()
        .map(|&k| {
            group_velocity(
                &strip(EdgeKind::Zigzag, 60, &CouplingParams::isotropic(1.0, k)),
                sel,
                PI,
                0.01,
            )
            .unwrap()
        })
        .collect();
    assert!((v[1] / v[0] - 2.0).abs() < 0.05, "{v:?}");
}

#[test]
fn zigzag_uniform_field_branch() {
    let h = 0.1;
    let m = strip(
        EdgeKind::Zigzag,
        40,
        &CouplingParams::isotropic(1.0, KAPPA).with_h_b(h),
    );
    let sel = BranchSelector::zigzag_top();
    let qmax = 2.0 * PI / 3.0 - 3.0 * th::bulk_gap([KAPPA; 3]);
    for k in 1..=10 {
        let q = qmax * k as f64 / 10.0 - 1e-9;
        let e = branch_energy(&m, sel, q).unwrap();
        let t = th::zigzag_single_mode_energy(q, h, [KAPPA; 3], 1.0).unwrap();
        assert!((e - t).abs() <= 0.1 * t.abs(), "q={q} {e} {t}");
    }
    let v = group_velocity(&m, sel, 0.0, 0.01).unwrap();
    let r = th::zigzag_vgr_uniform_field(h, [KAPPA; 3], 1.0);
    assert!((v / r.branch_slope - 1.0).abs() < 0.1, "{v} {r:?}");
    assert!((v / r.closed_form - 1.0).abs() > 0.1);
}

#[test]
fn uniform_field_mode_lives_on_one_parity() {
    let m = strip(
        EdgeKind::Zigzag,
        40,
        &CouplingParams::isotropic(1.0, KAPPA).with_h_b(0.05),
    );
    let (_, w) = branch_mode(&m, BranchSelector::zigzag_top(), 0.2).unwrap();
    let odd: f64 = w.iter().skip(1).step_by(2).sum();
    let even: f64 = w.iter().skip(2).step_by(2).sum();
    assert!(even.min(odd) < 0.02 * even.max(odd), "{odd} {even}");
}

#[test]
fn two_mode_splitting() {
    let h = 0.1;
    let m = strip(
        EdgeKind::Zigzag,
        80,
        &CouplingParams::isotropic(1.0, 1e-4).with_h_b(h),
    );
    for q in [2.2, 2.3, 5.0 * PI / 6.0, 2.9, PI, 3.6, 4.0] {
        let (t, _) = th::zigzag_two_mode_energy(q, h).unwrap();
        let (e, _) = m.eigen(q);
        let near = e
            .iter()
            .filter(|x| **x > 0.0)
            .map(|x| (x - t).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(near < 0.05 * t, "q={q} {t} {near}");
    }
}

#[test]
fn armchair_velocity_and_decay() {
    let delta = th::bulk_gap([KAPPA; 3]);
    for hb in [0.05, 0.1, 0.2, 0.4, 1.0] {
        let m = strip(
            EdgeKind::Armchair,
            200,
            &CouplingParams::isotropic(1.0, KAPPA).with_h_b(hb),
        );
        let sel = BranchSelector {
            edge: Edge::Top,
            depth: 100,
            threshold: 0.9,
        };
        let v = group_velocity(&m, sel, 0.0, 0.002).unwrap();
        let t = th::armchair_vgr(hb, delta, 1.0);
        assert!((v / t - 1.0).abs() < 0.1, "h_b={hb}: {v} vs {t}");
    }
    let m = strip(
        EdgeKind::Armchair,
        200,
        &CouplingParams::isotropic(1.0, KAPPA),
    );
    let bands = strip_band_structure(&m, &[0.0]);
    let zero = (0..m.bands())
        .min_by(|&a, &b| bands.bands[0][a].abs().total_cmp(&bands.bands[0][b].abs()))
        .unwrap();
    let xi = decay_length(&bands.row_weights[0][zero], &bands.row_y, Edge::Top, 3).unwrap();
    assert!(
        (xi / th::armchair_decay_length(delta, 1.0) - 1.0).abs() < 0.15,
        "{xi}"
    );
}

#[test]
fn armchair_continuum_touches_near_zero_momentum() {
    let m = strip(
        EdgeKind::Armchair,
        120,
        &CouplingParams::isotropic(1.0, KAPPA).with_h_b(0.3),
    );
    let grid = uniform_grid(64, SQRT3);
    let bands = strip_band_structure(&m, &grid);
    let edges = classify_edge_branch(&bands, 30, 0.5);
    let mut best = (f64::INFINITY, 0.0);
    for (k, q) in grid.iter().enumerate() {
        for (b, e) in bands.bands[k].iter().enumerate() {
            let is_edge = edges.iter().any(|r| r.qx == *q && r.band == b);
            if !is_edge && e.abs() < best.0 {
                best = (e.abs(), *q);
            }
        }
    }
    assert!(best.1.abs() < 0.15, "{best:?}");
}

#[test]
fn delocalized_modes_have_proportional_edge_weight() {
    let m = strip(EdgeKind::Zigzag, 40, &CouplingParams::isotropic(1.0, KAPPA));
    let bands = strip_band_structure(&m, &[0.5]);
    let top = bands.bands[0].len() - 1;
    let w: f64 = bands.row_weights[0][top][1..=4].iter().sum();
    assert!(w < 0.15, "{w}");
    let recs = classify_edge_branch(&bands, 4, 0.5);
    assert!(recs.iter().all(|r| r.edge_weight <= 1.0 + 1e-12));
}

#[test]
fn continuum_converges_with_width() {
    let p = CouplingParams::isotropic(1.0, KAPPA);
    let q = 0.4;
    let bulk = (0..400)
        .map(|k| bulk_energy([q, -PI + 2.0 * PI * k as f64 / 400.0 * 2.0 / SQRT3], &p))
        .fold(f64::INFINITY, f64::min);
    let mut last = f64::INFINITY;
    for rows in [20, 40, 80] {
        let m = strip(EdgeKind::Zigzag, rows, &p);
        let bands = strip_band_structure(&m, &[q]);
        let edges = classify_edge_branch(&bands, 4, 0.5);
        let min = (0..m.bands())
            .filter(|b| !edges.iter().any(|r| r.band == *b))
            .map(|b| bands.bands[0][b].abs())
            .fold(f64::INFINITY, f64::min);
        let gap = (min - bulk).abs();
        assert!(gap <= last + 1e-12, "rows={rows}: {min} vs bulk {bulk}");
        last = gap;
    }
}
