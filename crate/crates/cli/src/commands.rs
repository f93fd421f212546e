use std::f64::consts::PI;

use kitaev_edge::disorder::{fidelity_sweep, is_monotone_trend, SweepResult};
use kitaev_edge::edgetheory as theory;
use kitaev_edge::hamiltonian::{assemble, GaugeConfig};
use kitaev_edge::lattice::{build_strip, EdgeKind, Periodicity};
use kitaev_edge::protocols::{
    analytic_swap_with, external_slots, full_swap_gate, record_trajectory, transfer_between_spins,
    transfer_schedule, EdgeSetup, PulseShape, SwapSpec, SwapTiming, TransferSpec,
};
use kitaev_edge::spectra::{
    branch_energy, classify_edge_branch, group_velocity, minimal_energy, strip_band_structure,
    uniform_grid, write_band_csv, BlochModel, BranchSelector, Edge,
};
use serde::Serialize;

use crate::config::{kind_name, CouplingSection, Format, PulseMode, RunConfig};
use crate::output::Writer;
use crate::CliError;

/// What a command reports back to `main`.
#[derive(Debug, Default)]
pub struct Status {
    pub threshold_failed: Option<String>,
    pub warnings: Vec<String>,
}

fn write_csv(
    out: &mut Writer,
    cfg: &RunConfig,
    name: &str,
    fill: impl FnOnce(&mut Vec<u8>) -> kitaev_edge::error::Result<()>,
) -> Result<(), CliError> {
    if cfg.output.wants(Format::Csv) {
        out.csv(name, fill)?;
    }
    Ok(())
}

fn write_json<T: Serialize>(
    out: &mut Writer,
    cfg: &RunConfig,
    name: &str,
    value: &T,
) -> Result<(), CliError> {
    if cfg.output.wants(Format::Json) {
        out.json(name, value)?;
    }
    Ok(())
}

fn table(
    buf: &mut Vec<u8>,
    head: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> kitaev_edge::error::Result<()> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(head)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct SpectrumSummary {
    edge_kind: &'static str,
    rows: usize,
    periodicity: Periodicity,
    delta: f64,
    minimal_energy: f64,
    crossing_qx: Option<f64>,
    v_gr: Option<f64>,
    edge_modes: usize,
    warnings: Vec<String>,
}

pub fn spectrum(cfg: &RunConfig, out: &mut Writer) -> Result<Status, CliError> {
    let l = &cfg.lattice;
    let kind = l.strip_kind()?;
    if l.periodicity == Periodicity::Open {
        return Err(CliError::config(
            "spectrum needs a periodic strip (periodic-x or torus)".into(),
        ));
    }
    let s = &cfg.spectrum;
    let g = build_strip(kind, l.rows, l.length, l.periodicity)?;
    let a = assemble(&g, &cfg.couplings.params(&g), &GaugeConfig::uniform(&g))?;
    let model = BlochModel::new(&g, &a)?;
    let period = g.strip.as_ref().map(|i| i.period).unwrap_or(1.0);
    let grid = uniform_grid(s.points, period);
    let bands = strip_band_structure(&model, &grid);
    write_csv(out, cfg, "bands.csv", |w| {
        write_band_csv(&bands, s.edge_depth, w)
    })?;

    let mut status = Status::default();
    let (records, crossing, v_gr) = if l.periodicity == Periodicity::Torus {
        (Vec::new(), None, None)
    } else {
        let records = classify_edge_branch(&bands, s.edge_depth, s.edge_threshold);
        let field_free = cfg.couplings.h_z == 0.0 && cfg.couplings.h_b == 0.0;
        let [lo, hi] = s
            .crossing_window
            .unwrap_or(if kind == EdgeKind::Zigzag && field_free {
                [PI - 0.5, PI + 0.5]
            } else {
                [-0.5, 0.5]
            });
        let sel = BranchSelector {
            edge: Edge::Top,
            depth: s.edge_depth,
            threshold: s.edge_threshold,
        };
        match kitaev_edge::spectra::zero_crossing(&model, sel, lo, hi) {
            Ok(q) => match group_velocity(&model, sel, q, s.velocity_step) {
                Ok(v) => (records, Some(q), Some(v)),
                Err(e) => {
                    status
                        .warnings
                        .push(format!("no velocity at the crossing: {e}"));
                    (records, Some(q), None)
                }
            },
            Err(e) => {
                status.warnings.push(format!(
                    "no edge-branch zero crossing in [{lo:.3}, {hi:.3}]: {e}"
                ));
                (records, None, None)
            }
        }
    };
    write_csv(out, cfg, "edge_branch.csv", |w| {
        table(
            w,
            &[
                "qx",
                "band",
                "energy",
                "edge_weight",
                "decay_length",
                "which_edge",
                "ambiguous",
            ],
            records.iter().map(|r| {
                vec![
                    r.qx.to_string(),
                    r.band.to_string(),
                    r.energy.to_string(),
                    r.edge_weight.to_string(),
                    opt(r.decay_length),
                    r.which_edge.as_str().to_string(),
                    r.ambiguous.to_string(),
                ]
            }),
        )
    })?;
    let summary = SpectrumSummary {
        edge_kind: kind_name(kind),
        rows: l.rows,
        periodicity: l.periodicity,
        delta: theory::bulk_gap(cfg.couplings.kappa3()),
        minimal_energy: minimal_energy(&model, &grid),
        crossing_qx: crossing,
        v_gr,
        edge_modes: records.len(),
        warnings: status.warnings.clone(),
    };
    write_json(out, cfg, "spectrum.json", &summary)?;
    Ok(status)
}

fn sample_setup(cfg: &RunConfig) -> Result<EdgeSetup, CliError> {
    let p = &cfg.protocol;
    if p.spins.len() < 2 {
        return Err(CliError::config(format!(
            "protocol.spins needs two spin positions, got {}",
            p.spins.len()
        )));
    }
    let shape = cfg.lattice.finite_shape()?;
    let plain = CouplingSection {
        h_z: 0.0,
        ..cfg.couplings.clone()
    };
    let first = EdgeSetup::finite_with_spins(
        shape,
        &p.spins,
        plain.params(&kitaev_edge::lattice::build_finite(shape)?),
    )?;
    // h_z acts only on the b_z left free after attaching the spins
    let params = cfg.couplings.params(&first.graph);
    let setup = EdgeSetup::new(first.graph.clone(), params, first.gauge.clone())?;
    match &p.gauge {
        Some(u) => Ok(setup.with_external_gauge(u)?),
        None => Ok(setup),
    }
}

fn transfer_spec(cfg: &RunConfig) -> TransferSpec {
    let p = &cfg.protocol;
    let mut spec = TransferSpec::matched(0, 1, p.lambda);
    spec.shape = match p.pulse {
        PulseMode::Rectangular => PulseShape::Rectangular,
        PulseMode::Matched => PulseShape::Matched {
            gamma: None,
            window: p.window,
        },
    };
    spec.travel_allowance = p.travel_time;
    spec.autotune = p.autotune;
    spec.dt = p.dt;
    spec
}

pub fn transfer(cfg: &RunConfig, out: &mut Writer) -> Result<Status, CliError> {
    let setup = sample_setup(cfg)?;
    let spec = transfer_spec(cfg);
    let rep = transfer_between_spins(&setup, &spec)?;
    write_json(out, cfg, "transfer.json", &rep)?;
    if let Some(every) = cfg.protocol.trajectory_every {
        let sched = transfer_schedule(&setup, &spec, rep.timings["travel_allowance"])?;
        let traj = record_trajectory(&setup, &sched, setup.external(0)?.c, every)?;
        write_csv(out, cfg, "trajectory.csv", |w| traj.write_csv(w, 1e-6))?;
    }
    let mut status = Status {
        warnings: rep.warnings.clone(),
        ..Default::default()
    };
    if rep.fidelity[0] < cfg.protocol.threshold {
        status.threshold_failed = Some(format!(
            "transfer fidelity {:.4} below {}",
            rep.fidelity[0], cfg.protocol.threshold
        ));
    }
    Ok(status)
}

#[derive(Serialize)]
struct SwapOutput {
    timing: SwapTiming,
    report: kitaev_edge::protocols::FidelityReport,
    map: kitaev_edge::protocols::SwapMap,
    deviation_from_ideal: f64,
}

pub fn swap(cfg: &RunConfig, out: &mut Writer) -> Result<Status, CliError> {
    let p = &cfg.protocol;
    if p.lambda <= 0.0 {
        return Err(CliError::config("swap needs lambda > 0".into()));
    }
    let setup = sample_setup(cfg)?;
    if setup.graph.externals.len() != 2 {
        return Err(CliError::config("swap needs exactly two spins".into()));
    }
    let timing = SwapTiming::calibrate(&setup, p.lambda, p.swap_window, p.dt)?;
    let spec = SwapSpec {
        lambda: p.lambda,
        sequence: p.sequence,
        timing,
        window: p.swap_window,
        dt: p.dt,
        field: p.local_field,
    };
    let (report, map) = full_swap_gate(&setup, &spec)?;
    let u = [setup.gauge.external[0], setup.gauge.external[1]];
    let deviation = map.deviation_from(
        &analytic_swap_with(u, timing.signs, p.sequence),
        &external_slots(),
    );
    let min = report.min_fidelity();
    write_json(
        out,
        cfg,
        "swap.json",
        &SwapOutput {
            timing,
            report,
            map,
            deviation_from_ideal: deviation,
        },
    )?;
    let mut status = Status::default();
    if min < p.threshold {
        status.threshold_failed = Some(format!("swap fidelity {min:.4} below {}", p.threshold));
    }
    Ok(status)
}

#[derive(Serialize)]
struct DisorderOutput {
    travel_time: f64,
    monotone: bool,
    sweeps: Vec<SweepResult>,
}

pub fn disorder(cfg: &RunConfig, out: &mut Writer, seed: u64) -> Result<Status, CliError> {
    let setup = sample_setup(cfg)?;
    // calibrate the delay once on the clean sample
    let clean = transfer_between_spins(&setup, &transfer_spec(cfg))?;
    let mut spec = transfer_spec(cfg);
    spec.travel_allowance = Some(clean.timings["travel_allowance"]);
    spec.autotune = false;
    let base = cfg.disorder.spec(seed);
    let mut sweeps = Vec::new();
    for &s in &cfg.disorder.spreads {
        let r = fidelity_sweep(&setup, &spec, &base.with_spread(s), cfg.protocol.threshold)?;
        write_csv(out, cfg, &format!("disorder_spread_{s}.csv"), |w| {
            r.write_csv(w)
        })?;
        sweeps.push(r);
    }
    let monotone = is_monotone_trend(&sweeps);
    write_csv(out, cfg, "trend.csv", |w| {
        table(
            w,
            &["spread", "mean", "std_dev", "worst", "failed"],
            sweeps.iter().map(|r| {
                vec![
                    r.spread.to_string(),
                    r.mean.to_string(),
                    r.std_dev.to_string(),
                    r.worst.to_string(),
                    r.failed().to_string(),
                ]
            }),
        )
    })?;
    let mut status = Status::default();
    for r in &sweeps {
        let flagged = r
            .samples
            .iter()
            .filter(|s| s.status != kitaev_edge::disorder::SampleStatus::Ok)
            .count();
        if flagged > 0 {
            status.warnings.push(format!(
                "spread {}: {flagged} samples failed or flipped a coupling sign",
                r.spread
            ));
        }
    }
    if !monotone {
        status.threshold_failed = Some("mean fidelity does not decrease with spread".into());
    }
    write_json(
        out,
        cfg,
        "disorder.json",
        &DisorderOutput {
            travel_time: spec.travel_allowance.unwrap_or(f64::NAN),
            monotone,
            sweeps,
        },
    )?;
    Ok(status)
}

#[derive(Serialize)]
struct TheorySummary {
    delta: f64,
    zero_field_speed: f64,
    uniform_field_velocity: theory::UniformFieldVelocity,
    h_z: f64,
    armchair_decay_length: f64,
    /// Largest gap between the anisotropic and isotropic single-mode forms at equal κ.
    isotropic_reduction_error: f64,
    strip_max_relative_residual: Option<f64>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn theory_tables(cfg: &RunConfig, out: &mut Writer) -> Result<Status, CliError> {
    let c = &cfg.couplings;
    let t = &cfg.theory;
    let k3 = c.kappa3();
    let j = c.jz;
    let delta = theory::bulk_gap(k3);
    let h = if c.h_z != 0.0 { c.h_z } else { t.h_z };
    let mut status = Status::default();
    if c.jx != c.jy || c.jy != c.jz {
        status
            .warnings
            .push("edge formulas assume equal J; using Jz".into());
    }

    let two = linspace(2.0 * PI / 3.0, 4.0 * PI / 3.0, t.points);
    write_csv(out, cfg, "zigzag_two_mode.csv", |w| {
        table(
            w,
            &["qx", "e_plus", "e_minus"],
            two.iter().map(|&q| {
                let (a, b) = theory::zigzag_two_mode_energy(q, h).expect("inside the interval");
                vec![q.to_string(), a.to_string(), b.to_string()]
            }),
        )
    })?;

    let edge = 2.0 * PI / 3.0 - 3.0 * delta / j.abs();
    let single: Vec<f64> = if edge > 0.0 {
        linspace(-edge, edge, t.points + 2)[1..=t.points].to_vec()
    } else {
        Vec::new()
    };
    if single.is_empty() {
        status
            .warnings
            .push("single-mode window is empty for this gap".into());
    }
    let iso = k3[0] == k3[1] && k3[1] == k3[2];
    let mut reduction: f64 = 0.0;
    let mut rows = Vec::new();
    for &q in &single {
        let e = theory::zigzag_single_mode_energy(q, h, k3, j)?;
        let ei = if iso {
            Some(theory::zigzag_single_mode_energy_isotropic(q, h, k3[0], j)?)
        } else {
            None
        };
        let m = k3.iter().sum::<f64>() / 3.0;
        reduction = reduction.max(
            (theory::zigzag_single_mode_energy(q, h, [m; 3], j)?
                - theory::zigzag_single_mode_energy_isotropic(q, h, m, j)?)
            .abs(),
        );
        rows.push(vec![q.to_string(), e.to_string(), opt(ei)]);
    }
    write_csv(out, cfg, "zigzag_single_mode.csv", |w| {
        table(w, &["qx", "energy", "energy_isotropic"], rows)
    })?;

    let zero = linspace(0.0, 2.0 * PI, t.points);
    write_csv(out, cfg, "zigzag_zero_field.csv", |w| {
        table(
            w,
            &["qx", "energy", "slope"],
            zero.iter().map(|&q| {
                vec![
                    q.to_string(),
                    theory::zigzag_zero_field_energy(q, k3).to_string(),
                    theory::zigzag_zero_field_slope(q, k3).to_string(),
                ]
            }),
        )
    })?;

    write_csv(out, cfg, "armchair_velocity.csv", |w| {
        table(
            w,
            &["h_b", "v_gr"],
            t.h_b_values.iter().map(|&hb| {
                vec![
                    hb.to_string(),
                    theory::armchair_vgr(hb, delta, j).to_string(),
                ]
            }),
        )
    })?;
    let ys: Vec<f64> = (1..=t.points).map(|k| 0.5 * k as f64).collect();
    write_csv(out, cfg, "armchair_profile.csv", |w| {
        table(
            w,
            &["y", "c_even", "c_odd", "b"],
            ys.iter().map(|&y| {
                let p = theory::armchair_mode_profile(y, delta, j, c.h_b);
                vec![
                    y.to_string(),
                    p.c[0].to_string(),
                    p.c[1].to_string(),
                    p.b[0].to_string(),
                ]
            }),
        )
    })?;

    let mut strip_residual = None;
    if t.strip_rows > 0 {
        let g = build_strip(EdgeKind::Zigzag, t.strip_rows, 1, Periodicity::PeriodicX)?;
        let params = CouplingSection {
            h_z: h,
            ..c.clone()
        }
        .params(&g);
        let model = BlochModel::new(&g, &assemble(&g, &params, &GaugeConfig::uniform(&g))?)?;
        let mut rows = Vec::new();
        let mut worst: f64 = 0.0;
        for &q in &single {
            let f = theory::zigzag_single_mode_energy(q, h, k3, j)?;
            let s = branch_energy(&model, BranchSelector::zigzag_top(), q);
            let rel = s.map(|s| (s.abs() - f.abs()).abs() / f.abs().max(1e-12));
            if let (Some(r), true) = (rel, f.abs() > 1e-3 * delta) {
                worst = worst.max(r);
            }
            rows.push(vec![q.to_string(), f.to_string(), opt(s), opt(rel)]);
        }
        write_csv(out, cfg, "zigzag_single_mode_vs_strip.csv", |w| {
            table(w, &["qx", "formula", "strip", "relative_residual"], rows)
        })?;
        strip_residual = Some(worst);
    }

    let summary = TheorySummary {
        delta,
        zero_field_speed: theory::zigzag_zero_field_speed(k3),
        uniform_field_velocity: theory::zigzag_vgr_uniform_field(h, k3, j),
        h_z: h,
        armchair_decay_length: theory::armchair_decay_length(delta, j),
        isotropic_reduction_error: reduction,
        strip_max_relative_residual: strip_residual,
    };
    write_json(out, cfg, "theory.json", &summary)?;
    Ok(status)
}
