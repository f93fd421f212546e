//! Majorana exchange pulses, write/read to the edge, spin-to-spin transfer and
//! the three-round SWAP built from them.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    self, propagate_sparse, unit_vector, Override, PulseSchedule, Segment, Trajectory,
};
use crate::edgetheory;
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{
    assemble, CouplingMatrix, CouplingParams, ExternalModes, GaugeConfig, Term,
};
use crate::lattice::{build_finite, FiniteShape, Flavor, LatticeGraph, LinkKind};

/// A finite sample with external spins and its assembled generator.
#[derive(Clone, Debug)]
pub struct EdgeSetup {
    pub graph: LatticeGraph,
    pub params: CouplingParams,
    pub gauge: GaugeConfig,
    pub base: CouplingMatrix,
}

impl EdgeSetup {
    pub fn new(graph: LatticeGraph, params: CouplingParams, gauge: GaugeConfig) -> Result<Self> {
        let base = assemble(&graph, &params, &gauge)?;
        Ok(Self {
            graph,
            params,
            gauge,
            base,
        })
    }

    /// Hexagonal sample with spins attached on the top edge at the given x positions.
    pub fn hexagon_with_spins(side: usize, xs: &[f64], params: CouplingParams) -> Result<Self> {
        Self::finite_with_spins(FiniteShape::Hexagon { side }, xs, params)
    }

    pub fn finite_with_spins(
        shape: FiniteShape,
        xs: &[f64],
        params: CouplingParams,
    ) -> Result<Self> {
        let mut g = build_finite(shape)?;
        let top = (0..g.num_sites())
            .map(|s| g.position(s)[1])
            .fold(f64::NEG_INFINITY, f64::max);
        for &x in xs {
            let s = g
                .nearest_boundary_site([x, top], Some(LinkKind::Z))
                .ok_or_else(|| Error::Invalid("no boundary site with a free b_z".into()))?;
            if g.externals.iter().any(|e| e.site == s) {
                return invalid(format!("two spins on the same site {s}"));
            }
            g = g.attach_external_spin(s)?;
        }
        let gauge = GaugeConfig::uniform(&g);
        Self::new(g, params, gauge)
    }

    pub fn with_external_gauge(&self, u: &[i8]) -> Result<Self> {
        if u.len() != self.graph.externals.len() {
            return invalid("one gauge value per external spin expected");
        }
        let mut gauge = self.gauge.clone();
        gauge.external = u.to_vec();
        Self::new(self.graph.clone(), self.params.clone(), gauge)
    }

    pub fn spin_site(&self, spin: usize) -> usize {
        self.graph.externals[spin].site
    }

    pub fn external(&self, spin: usize) -> Result<&ExternalModes> {
        self.base
            .externals
            .get(spin)
            .ok_or_else(|| Error::Invalid(format!("no external spin {spin}")))
    }

    /// Lattice sites within `depth` links of the boundary.
    pub fn edge_band(&self, depth: usize) -> Vec<bool> {
        let n = self.graph.num_sites();
        let mut adj = vec![Vec::new(); n];
        for l in &self.graph.links {
            adj[l.site_a].push(l.site_b);
            adj[l.site_b].push(l.site_a);
        }
        let mut dist = vec![usize::MAX; n];
        let mut q = VecDeque::new();
        for &s in &self.graph.boundary_sites {
            dist[s] = 0;
            q.push_back(s);
        }
        while let Some(s) = q.pop_front() {
            for &t in &adj[s] {
                if dist[t] == usize::MAX {
                    dist[t] = dist[s] + 1;
                    q.push_back(t);
                }
            }
        }
        dist.iter().map(|&d| d <= depth).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// Constant between `start` and `start + duration`.
    Rect { start: f64, duration: f64 },
    /// Rate `Γ/2 (1 + tanh(Γ (t - center)/2))` on `[from, until)`.
    Rising {
        center: f64,
        gamma: f64,
        from: f64,
        until: f64,
    },
    /// Rate `Γ/2 (1 - tanh(Γ (t - center)/2))` on `[from, until)`.
    Falling {
        center: f64,
        gamma: f64,
        from: f64,
        until: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseTarget {
    /// The `zz` coupling to the edge.
    Coupling,
    /// A local field on the spin.
    Field(Flavor),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub spin: usize,
    pub target: PulseTarget,
    /// Peak strength (λ or h).
    pub strength: f64,
    pub envelope: Envelope,
    /// Emission rate produced by `strength` held constant; shaped envelopes
    /// scale the coupling as `sqrt(Γ(t)/gamma_ref)`.
    pub gamma_ref: f64,
}

impl Pulse {
    pub fn rect(
        spin: usize,
        target: PulseTarget,
        strength: f64,
        start: f64,
        duration: f64,
    ) -> Self {
        Self {
            spin,
            target,
            strength,
            envelope: Envelope::Rect { start, duration },
            gamma_ref: 1.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let shaped = |g: f64| self.strength * (g / self.gamma_ref).clamp(0.0, 1.0).sqrt();
        match self.envelope {
            Envelope::Rect { start, duration } => {
                if t >= start && t < start + duration {
                    self.strength
                } else {
                    0.0
                }
            }
            Envelope::Rising {
                center,
                gamma,
                from,
                until,
            } if t >= from && t < until => {
                shaped(gamma / 2.0 * (1.0 + (gamma * (t - center) / 2.0).tanh()))
            }
            Envelope::Falling {
                center,
                gamma,
                from,
                until,
            } if t >= from && t < until => {
                shaped(gamma / 2.0 * (1.0 - (gamma * (t - center) / 2.0).tanh()))
            }
            _ => 0.0,
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self.envelope {
            Envelope::Rect { start, duration } => vec![start, start + duration],
            Envelope::Rising { from, until, .. } | Envelope::Falling { from, until, .. } => {
                vec![from, until]
            }
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self.envelope, Envelope::Rect { .. })
    }

    fn as_override(&self, v: f64) -> Override {
        match self.target {
            PulseTarget::Coupling => Override::ExternalCoupling {
                spin: self.spin,
                lambda: v,
            },
            PulseTarget::Field(axis) => Override::ExternalField {
                spin: self.spin,
                axis,
                h: v,
            },
        }
    }
}

/// Piecewise-constant schedule on `[t0, t1)`: pulse switching times are kept
/// exact, intervals with shaped pulses are split into steps of at most `dt`.
pub fn schedule_from_pulses(
    pulses: &[Pulse],
    t0: f64,
    t1: f64,
    dt: f64,
    base_scale: f64,
) -> PulseSchedule {
    let mut cuts: Vec<f64> = pulses
        .iter()
        .flat_map(|p| p.breakpoints())
        .filter(|&t| t > t0 && t < t1)
        .collect();
    cuts.push(t0);
    cuts.push(t1);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut s = PulseSchedule::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let active: Vec<&Pulse> = pulses
            .iter()
            .filter(|p| p.value(mid) != 0.0 || !p.is_constant())
            .collect();
        let smooth = active
            .iter()
            .any(|p| !p.is_constant() && p.value(mid) != 0.0);
        let steps = if smooth {
            ((b - a) / dt).ceil().max(1.0) as usize
        } else {
            1
        };
        let h = (b - a) / steps as f64;
        for k in 0..steps {
            let t = a + (k as f64 + 0.5) * h;
            let mut acc: BTreeMap<(usize, u8), (Pulse, f64)> = BTreeMap::new();
            for p in &active {
                let v = p.value(t);
                if v != 0.0 {
                    let key = (
                        p.spin,
                        match p.target {
                            PulseTarget::Coupling => 0,
                            PulseTarget::Field(f) => 1 + f.index() as u8,
                        },
                    );
                    acc.entry(key).or_insert((**p, 0.0)).1 += v;
                }
            }
            let overrides = acc.values().map(|(p, v)| p.as_override(*v)).collect();
            s.push(Segment {
                duration: h,
                base_scale,
                overrides,
            });
        }
    }
    s
}

/// Where the tracked modes ended up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub protocol: String,
    /// Labels of the tracked initial modes.
    pub tracked: Vec<String>,
    /// Labels of the target slots (same order as `tracked`).
    pub targets: Vec<String>,
    /// `mode_map[i][j]`: amplitude of tracked mode `j` on target slot `i`.
    pub mode_map: Vec<Vec<f64>>,
    /// `|overlap|` of each tracked mode with its target.
    pub fidelity: Vec<f64>,
    /// Sign of each overlap.
    pub signs: Vec<f64>,
    pub gauge_factors: Vec<i8>,
    pub timings: BTreeMap<String, f64>,
    /// Per tracked mode: weight on external spins, inside the edge band and
    /// deeper in the lattice. The three add up to one.
    pub captured: Vec<f64>,
    pub residual_edge: Vec<f64>,
    pub leakage: Vec<f64>,
    /// Weight above the bulk gap left on the lattice (worst tracked mode),
    /// when measured.
    pub gap_leakage: Option<f64>,
    pub stages: Vec<StageReport>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub fidelity: f64,
}

impl FidelityReport {
    pub fn min_fidelity(&self) -> f64 {
        self.fidelity.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_leakage(&self) -> f64 {
        self.leakage.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_residual_edge(&self) -> f64 {
        self.residual_edge.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Depth (in links) of the boundary band counted as edge.
pub const EDGE_BAND: usize = 3;

#[derive(Clone, Debug)]
struct Tracked {
    label: String,
    target_label: String,
    target: usize,
}

struct RunOutcome {
    finals: Vec<Vec<f64>>,
}

fn run_tracked(setup: &EdgeSetup, schedule: &PulseSchedule, modes: &[usize]) -> Result<RunOutcome> {
    let finals = modes
        .par_iter()
        .map(|&m| {
            let mut v = unit_vector(setup.base.dim, m);
            propagate_sparse(&setup.base, schedule, &mut v, |_, _| {})?;
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutcome { finals })
}

fn build_report(
    setup: &EdgeSetup,
    protocol: &str,
    tracked: &[Tracked],
    out: &RunOutcome,
) -> FidelityReport {
    let band = setup.edge_band(EDGE_BAND);
    let n = setup.graph.num_sites();
    let (mut captured, mut residual, mut leakage) = (Vec::new(), Vec::new(), Vec::new());
    for v in &out.finals {
        let (mut ext, mut edge, mut bulk) = (0.0, 0.0, 0.0);
        for (m, x) in v.iter().enumerate() {
            match setup.graph.mode_site(m) {
                Some(s) if s < n && band[s] => edge += x * x,
                Some(s) if s < n => bulk += x * x,
                _ => ext += x * x,
            }
        }
        captured.push(ext);
        residual.push(edge);
        leakage.push(bulk);
    }
    let mode_map: Vec<Vec<f64>> = tracked
        .iter()
        .map(|t| out.finals.iter().map(|v| v[t.target]).collect())
        .collect();
    let amps: Vec<f64> = tracked
        .iter()
        .zip(&out.finals)
        .map(|(t, v)| v[t.target])
        .collect();
    FidelityReport {
        protocol: protocol.to_string(),
        tracked: tracked.iter().map(|t| t.label.clone()).collect(),
        targets: tracked.iter().map(|t| t.target_label.clone()).collect(),
        mode_map,
        fidelity: amps.iter().map(|a| a.abs()).collect(),
        signs: amps.iter().map(|a| a.signum()).collect(),
        gauge_factors: setup.gauge.external.clone(),
        timings: BTreeMap::new(),
        captured,
        residual_edge: residual,
        leakage,
        gap_leakage: None,
        stages: Vec::new(),
        warnings: Vec::new(),
    }
}

/// Chebyshev order of the above-gap filter.
const GAP_FILTER_ORDER: usize = 12000;

fn gap_leakage(setup: &EdgeSetup, finals: &[Vec<f64>]) -> Result<f64> {
    let gap = setup.params.bulk_gap();
    let mut worst: f64 = 0.0;
    for v in finals {
        worst = worst.max(dynamics::weight_above(
            &setup.base,
            v,
            gap,
            GAP_FILTER_ORDER,
        )?);
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WriteOptions {
    pub lambda: f64,
    /// Defaults to a quarter rotation `π/(4λ)`.
    pub duration: Option<f64>,
    /// Freeze the lattice during the pulse (point-swap limit).
    pub frozen: bool,
    /// Require λ below the bulk gap.
    pub adiabatic: bool,
}

impl WriteOptions {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            duration: None,
            frozen: false,
            adiabatic: false,
        }
    }
}

/// Rectangular `zz` pulse writing the external c mode onto its edge site.
pub fn write_to_edge(setup: &EdgeSetup, spin: usize, opts: WriteOptions) -> Result<FidelityReport> {
    let ext = *setup.external(spin)?;
    if opts.lambda <= 0.0 {
        return invalid("λ must be positive");
    }
    if opts.adiabatic && 2.0 * opts.lambda >= setup.params.bulk_gap() {
        return Err(Error::Physics(format!(
            "coupling λ = {} exceeds the bulk gap {:.4}; adiabatic writing impossible",
            opts.lambda,
            setup.params.bulk_gap()
        )));
    }
    let duration = opts.duration.unwrap_or(PI / (4.0 * opts.lambda));
    let pulse = Pulse::rect(spin, PulseTarget::Coupling, opts.lambda, 0.0, duration);
    let sched = schedule_from_pulses(
        &[pulse],
        0.0,
        duration,
        duration,
        if opts.frozen { 0.0 } else { 1.0 },
    );
    let out = run_tracked(setup, &sched, &[ext.c])?;
    let site = setup.spin_site(spin);
    let tracked = [Tracked {
        label: format!("c{spin}"),
        target_label: format!("edge site {site}"),
        target: ext.partner,
    }];
    let mut rep = build_report(setup, "write_to_edge", &tracked, &out);
    rep.gap_leakage = Some(gap_leakage(setup, &out.finals)?);
    rep.timings.insert("pulse".into(), duration);
    // also report what stayed on the spin
    rep.stages.push(StageReport {
        name: "returned to spin".into(),
        fidelity: out.finals[0][ext.c].abs(),
    });
    Ok(rep)
}

/// Local field pulse rotating the external `c` into `b_axis` by `angle`.
pub fn local_b_exchange(
    setup: &EdgeSetup,
    spin: usize,
    axis: Flavor,
    angle: f64,
) -> Result<FidelityReport> {
    let ext = *setup.external(spin)?;
    let b = match axis {
        LinkKind::X => ext.bx,
        LinkKind::Y => ext.by,
        LinkKind::Z => None,
    }
    .ok_or_else(|| {
        Error::Invalid(format!(
            "b_{} of spin {spin} is consumed by a link",
            axis.as_str()
        ))
    })?;
    let h = 0.5;
    let mut sched = PulseSchedule::new();
    if angle != 0.0 {
        sched.push(
            Segment::new(angle.abs() / (2.0 * h))
                .frozen()
                .with(Override::ExternalField {
                    spin,
                    axis,
                    h: h * angle.signum(),
                }),
        );
    }
    let out = run_tracked(setup, &sched, &[ext.c, b])?;
    let tracked = [
        Tracked {
            label: format!("c{spin}"),
            target_label: format!("b{}{spin}", axis.as_str()),
            target: b,
        },
        Tracked {
            label: format!("b{}{spin}", axis.as_str()),
            target_label: format!("c{spin}"),
            target: ext.c,
        },
    ];
    let mut rep = build_report(setup, "local_b_exchange", &tracked, &out);
    rep.mode_map = vec![
        vec![out.finals[0][ext.c], out.finals[1][ext.c]],
        vec![out.finals[0][b], out.finals[1][b]],
    ];
    rep.targets = vec![format!("c{spin}"), format!("b{}{spin}", axis.as_str())];
    rep.timings.insert("pulse".into(), sched.total_time());
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseShape {
    /// Two quarter-rotation rectangular pulses.
    Rectangular,
    /// Rising emission and falling capture envelopes, each active for
    /// `window` on either side of its centre; `gamma = None` uses the
    /// calibrated emission rate at `λ`.
    Matched { gamma: Option<f64>, window: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferSpec {
    pub from: usize,
    pub to: usize,
    pub lambda: f64,
    pub shape: PulseShape,
    /// Delay between the emission and capture pulses; `None` uses the edge
    /// distance over the zero-boundary-field velocity.
    pub travel_allowance: Option<f64>,
    /// Maximize the arrival overlap within ±20% of the allowance.
    pub autotune: bool,
    pub dt: f64,
}

impl TransferSpec {
    pub fn matched(from: usize, to: usize, lambda: f64) -> Self {
        Self {
            from,
            to,
            lambda,
            shape: PulseShape::Matched {
                gamma: None,
                window: 90.0,
            },
            travel_allowance: None,
            autotune: false,
            dt: 0.5,
        }
    }
}

/// Emission rate of the edge under a constant coupling `λ`, from the amplitude
/// left on the spin after a quarter-rotation time.
pub fn calibrate_emission_rate(setup: &EdgeSetup, spin: usize, lambda: f64) -> Result<f64> {
    let ext = *setup.external(spin)?;
    let t = PI / (4.0 * lambda);
    let sched = PulseSchedule::new()
        .then(Segment::new(t).with(Override::ExternalCoupling { spin, lambda }));
    let mut v = unit_vector(setup.base.dim, ext.c);
    propagate_sparse(&setup.base, &sched, &mut v, |_, _| {})?;
    let a = v[ext.c].abs().max(1e-300);
    Ok(-2.0 * a.ln() / t)
}

/// Nominal delay: counter-clockwise edge distance over the chiral speed.
pub fn nominal_travel_time(setup: &EdgeSetup, from: usize, to: usize) -> Result<f64> {
    let d = setup
        .graph
        .perimeter_distance(setup.spin_site(from), setup.spin_site(to))?;
    let v = edgetheory::zigzag_zero_field_speed(setup.params.kappa);
    if v == 0.0 {
        return Err(Error::Physics("edge velocity vanishes for κ = 0".into()));
    }
    Ok(d / v)
}

fn rising(center: f64, gamma: f64, window: f64) -> Envelope {
    Envelope::Rising {
        center,
        gamma,
        from: center - window,
        until: center + window,
    }
}

fn falling(center: f64, gamma: f64, window: f64) -> Envelope {
    Envelope::Falling {
        center,
        gamma,
        from: center - window,
        until: center + window,
    }
}

fn transfer_pulses(
    spec: &TransferSpec,
    gamma: f64,
    gamma_ref: f64,
    tau: f64,
) -> (Vec<Pulse>, f64, f64) {
    match spec.shape {
        PulseShape::Rectangular => {
            let w = PI / (4.0 * spec.lambda);
            let p = vec![
                Pulse::rect(spec.from, PulseTarget::Coupling, spec.lambda, 0.0, w),
                Pulse::rect(spec.to, PulseTarget::Coupling, spec.lambda, tau, w),
            ];
            (p, 0.0, tau + w)
        }
        PulseShape::Matched { window, .. } => {
            let pulse = |spin, envelope| Pulse {
                spin,
                target: PulseTarget::Coupling,
                strength: spec.lambda,
                envelope,
                gamma_ref,
            };
            let p = vec![
                pulse(spec.from, rising(0.0, gamma, window)),
                pulse(spec.to, falling(tau, gamma, window)),
            ];
            (p, -window, tau + window)
        }
    }
}

/// Golden-section maximization on `[a, b]`.
fn maximize(
    mut a: f64,
    mut b: f64,
    tol: f64,
    f: impl Fn(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc > fd { (c, fc) } else { (d, fd) })
}

/// Sends `c` of spin `from` to spin `to` along the edge.
pub fn transfer_between_spins(setup: &EdgeSetup, spec: &TransferSpec) -> Result<FidelityReport> {
    let (_, e2) = check_transfer(setup, spec)?;
    let tau0 = match spec.travel_allowance {
        Some(t) => t,
        None => nominal_travel_time(setup, spec.from, spec.to)?,
    };
    let gammas = emission_rates(setup, spec)?;
    let run = |tau: f64| -> Result<(f64, RunOutcome, PulseSchedule)> {
        let sched = build_transfer_schedule(spec, gammas, tau);
        let out = run_tracked(setup, &sched, &[setup.external(spec.from)?.c])?;
        Ok((out.finals[0][e2.c].abs(), out, sched))
    };
    let tau = if spec.autotune && spec.lambda > 0.0 {
        maximize(0.8 * tau0, 1.2 * tau0, 0.01 * tau0, |t| run(t).map(|r| r.0))?.0
    } else {
        tau0
    };
    let (_, out, sched) = run(tau)?;
    let tracked = [Tracked {
        label: format!("c{}", spec.from),
        target_label: format!("c{}", spec.to),
        target: e2.c,
    }];
    let mut rep = build_report(setup, "transfer_between_spins", &tracked, &out);
    rep.timings.insert("travel_allowance".into(), tau);
    rep.timings.insert("nominal_travel".into(), tau0);
    rep.timings.insert("total".into(), sched.total_time());
    if gammas.0 > 0.0 {
        rep.timings.insert("gamma".into(), gammas.0);
    }
    if spec.lambda == 0.0 {
        rep.warnings
            .push("λ = 0 leaves the spins decoupled from the edge; nothing is transferred".into());
    }
    rep.stages.push(StageReport {
        name: "arrival".into(),
        fidelity: rep.fidelity[0],
    });
    Ok(rep)
}

fn check_transfer(
    setup: &EdgeSetup,
    spec: &TransferSpec,
) -> Result<(ExternalModes, ExternalModes)> {
    if spec.from == spec.to || setup.spin_site(spec.from) == setup.spin_site(spec.to) {
        return invalid("transfer needs two distinct spin locations");
    }
    let pair = (*setup.external(spec.from)?, *setup.external(spec.to)?);
    if !(spec.lambda >= 0.0 && spec.dt > 0.0) {
        return invalid("λ must be >= 0 and dt positive");
    }
    Ok(pair)
}

fn emission_rates(setup: &EdgeSetup, spec: &TransferSpec) -> Result<(f64, f64)> {
    Ok(match spec.shape {
        PulseShape::Matched { gamma, .. } if spec.lambda > 0.0 => {
            let cal = calibrate_emission_rate(setup, spec.from, spec.lambda)?;
            (gamma.unwrap_or(cal), cal)
        }
        _ => (0.0, 1.0),
    })
}

fn build_transfer_schedule(
    spec: &TransferSpec,
    (gamma, gamma_ref): (f64, f64),
    tau: f64,
) -> PulseSchedule {
    if spec.lambda == 0.0 {
        return PulseSchedule::new().then(Segment::new(tau));
    }
    let (pulses, t0, t1) = transfer_pulses(spec, gamma, gamma_ref, tau);
    schedule_from_pulses(&pulses, t0, t1, spec.dt, 1.0)
}

/// Pulse schedule of a transfer with a fixed travel allowance `tau`.
pub fn transfer_schedule(
    setup: &EdgeSetup,
    spec: &TransferSpec,
    tau: f64,
) -> Result<PulseSchedule> {
    check_transfer(setup, spec)?;
    Ok(build_transfer_schedule(
        spec,
        emission_rates(setup, spec)?,
        tau,
    ))
}

/// Density snapshots of one mode under a schedule, roughly every `every` time
/// units of schedule time (counted from its start).
pub fn record_trajectory(
    setup: &EdgeSetup,
    schedule: &PulseSchedule,
    mode: usize,
    every: f64,
) -> Result<Trajectory> {
    let mut traj = Trajectory::default();
    let mut v = unit_vector(setup.base.dim, mode);
    traj.record(0.0, &v, &setup.graph);
    let mut next = every;
    propagate_sparse(&setup.base, schedule, &mut v, |t, v| {
        if t + 1e-9 >= next {
            traj.record(t, v, &setup.graph);
            while next <= t + 1e-9 {
                next += every;
            }
        }
    })?;
    Ok(traj)
}

// ---------------------------------------------------------------------------
// Three-round SWAP

/// Named single-particle slots of two spins and their edge locations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    C(usize),
    Bx(usize),
    By(usize),
    Edge(usize),
}

impl Slot {
    pub fn label(&self) -> String {
        match self {
            Slot::C(s) => format!("c{}", s + 1),
            Slot::Bx(s) => format!("bx{}", s + 1),
            Slot::By(s) => format!("by{}", s + 1),
            Slot::Edge(s) => format!("psi{}", s + 1),
        }
    }

    pub fn external(spin: usize) -> [Slot; 3] {
        [Slot::C(spin), Slot::Bx(spin), Slot::By(spin)]
    }
}

/// Signed permutation of slots (unlisted slots map to themselves).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SignedPerm {
    pub map: BTreeMap<Slot, (i8, Slot)>,
}

impl SignedPerm {
    /// Exchange `a -> -u b`, `b -> u a`.
    pub fn exchange(a: Slot, b: Slot, u: i8) -> Self {
        let mut map = BTreeMap::new();
        map.insert(a, (-u, b));
        map.insert(b, (u, a));
        Self { map }
    }

    pub fn image(&self, s: Slot) -> (i8, Slot) {
        self.map.get(&s).copied().unwrap_or((1, s))
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &SignedPerm) -> SignedPerm {
        let mut keys: Vec<Slot> = self.map.keys().chain(next.map.keys()).copied().collect();
        keys.sort();
        keys.dedup();
        let mut map = BTreeMap::new();
        for k in keys {
            let (s1, m) = self.image(k);
            let (s2, t) = next.image(m);
            if !(s1 * s2 == 1 && t == k) {
                map.insert(k, (s1 * s2, t));
            }
        }
        SignedPerm { map }
    }
}

/// Order of the local exchanges between transfer rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapSequence {
    /// Round, `h_x` exchanges, round, `h_y` exchanges, round.
    Literal,
    /// Each round followed by `h_x` then `h_y` exchanges; ends flavor-aligned.
    FlavorPreserving,
}

impl SwapSequence {
    /// Local exchanges after each of the three rounds.
    pub fn locals(self) -> [Vec<Flavor>; 3] {
        match self {
            SwapSequence::Literal => [vec![LinkKind::X], vec![LinkKind::Y], vec![]],
            SwapSequence::FlavorPreserving => [
                vec![LinkKind::X, LinkKind::Y],
                vec![LinkKind::X, LinkKind::Y],
                vec![LinkKind::X, LinkKind::Y],
            ],
        }
    }
}

/// Edge transport sign of each leg (s1 -> s2, s2 -> s1); their product is -1
/// for a flux-free loop.
pub const LEG_SIGNS: [i8; 2] = [-1, 1];

fn leg(from: usize, to: usize, sign: i8) -> SignedPerm {
    let mut m = BTreeMap::new();
    m.insert(Slot::Edge(from), (sign, Slot::Edge(to)));
    SignedPerm { map: m }
}

/// One round: exchange at s1, transport, exchange at s2, transport, exchange at s1.
pub fn analytic_round(u: [i8; 2]) -> SignedPerm {
    analytic_round_with(u, LEG_SIGNS)
}

pub fn analytic_round_with(u: [i8; 2], legs: [i8; 2]) -> SignedPerm {
    SignedPerm::exchange(Slot::C(0), Slot::Edge(0), u[0])
        .then(&leg(0, 1, legs[0]))
        .then(&SignedPerm::exchange(Slot::C(1), Slot::Edge(1), u[1]))
        .then(&leg(1, 0, legs[1]))
        .then(&SignedPerm::exchange(Slot::C(0), Slot::Edge(0), u[0]))
}

/// Leg signs implied by the signs of two one-way transfers `c_1 -> c_2` and
/// `c_2 -> c_1`.
pub fn leg_signs_from_transfers(u: [i8; 2], transfer: [i8; 2]) -> [i8; 2] {
    let one_way = |from: usize, to: usize| {
        let p = SignedPerm::exchange(Slot::C(from), Slot::Edge(from), u[from])
            .then(&leg(from, to, 1))
            .then(&SignedPerm::exchange(Slot::C(to), Slot::Edge(to), u[to]));
        p.image(Slot::C(from)).0
    };
    [transfer[0] * one_way(0, 1), transfer[1] * one_way(1, 0)]
}

fn local_exchange(f: Flavor) -> SignedPerm {
    let b = |s| {
        if f == LinkKind::X {
            Slot::Bx(s)
        } else {
            Slot::By(s)
        }
    };
    SignedPerm::exchange(Slot::C(0), b(0), 1).then(&SignedPerm::exchange(Slot::C(1), b(1), 1))
}

/// Composed signed permutation of the full three-round sequence.
pub fn analytic_swap(u: [i8; 2], seq: SwapSequence) -> SignedPerm {
    analytic_swap_with(u, LEG_SIGNS, seq)
}

pub fn analytic_swap_with(u: [i8; 2], legs: [i8; 2], seq: SwapSequence) -> SignedPerm {
    let mut p = SignedPerm::default();
    for locals in seq.locals() {
        p = p.then(&analytic_round_with(u, legs));
        for f in locals {
            p = p.then(&local_exchange(f));
        }
    }
    p
}

/// Image of `σ_α` of spin 1 (as a product of two Majoranas) under a slot map:
/// returns the target spin, the flavor of the resulting `σ`, and its sign, or
/// `None` when the image is not a single-spin Pauli operator.
pub fn pauli_image(p: &SignedPerm, spin: usize, alpha: Flavor) -> Option<(usize, Flavor, i8)> {
    // σ_x = i b_x c, σ_y = i b_y c, and with D = 1, i b_x b_y = σ_z... here
    // only products of an external b and c are tracked
    let b = if alpha == LinkKind::X {
        Slot::Bx(spin)
    } else {
        Slot::By(spin)
    };
    let (sb, tb) = p.image(b);
    let (sc, tc) = p.image(Slot::C(spin));
    let spin_of = |s: Slot| match s {
        Slot::C(k) | Slot::Bx(k) | Slot::By(k) | Slot::Edge(k) => k,
    };
    let (k1, k2) = (spin_of(tb), spin_of(tc));
    if k1 != k2 || matches!(tb, Slot::Edge(_)) || matches!(tc, Slot::Edge(_)) {
        return None;
    }
    // i x y for two distinct Majoranas of one spin, written as ± σ
    let sign = sb * sc;
    match (tb, tc) {
        (Slot::Bx(_), Slot::C(_)) => Some((k1, LinkKind::X, sign)),
        (Slot::C(_), Slot::Bx(_)) => Some((k1, LinkKind::X, -sign)),
        (Slot::By(_), Slot::C(_)) => Some((k1, LinkKind::Y, sign)),
        (Slot::C(_), Slot::By(_)) => Some((k1, LinkKind::Y, -sign)),
        // i b_x b_y = σ_z on the physical subspace (D = 1)
        (Slot::Bx(_), Slot::By(_)) => Some((k1, LinkKind::Z, sign)),
        (Slot::By(_), Slot::Bx(_)) => Some((k1, LinkKind::Z, -sign)),
        _ => None,
    }
}

/// Two spins on an idealized chiral ring of `k` Majoranas.
#[derive(Clone, Debug)]
pub struct RingModel {
    pub k: usize,
    /// Ring positions of the two spins.
    pub sites: [usize; 2],
    pub matrix: CouplingMatrix,
}

impl RingModel {
    /// Ring whose generator moves every mode by one site per unit time, with
    /// the antiperiodic boundary of a flux-free loop. `d` is the distance from
    /// spin 1 to spin 2 along the direction of motion.
    pub fn new(k: usize, d: usize, u: [i8; 2]) -> Result<Self> {
        if k < 4 || d == 0 || d >= k {
            return invalid("ring needs k >= 4 and 0 < d < k");
        }
        // spin 2 sits at 0 so the antiperiodic seam lies on the s1 -> s2 leg
        let sites = [k - d, 0];
        let kf = k as f64;
        let thetas: Vec<f64> = (0..k)
            .map(|m| PI * (2.0 * m as f64 + 1.0) / kf - PI)
            .collect();
        let mut terms = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                // A_ij chosen so that exp(A) sends e_j to e_{j+1}
                let v: f64 = thetas
                    .iter()
                    .map(|t| t * (t * (i as f64 - j as f64)).sin())
                    .sum::<f64>()
                    / kf;
                if v.abs() > 1e-15 {
                    terms.push(Term {
                        i,
                        j,
                        value: v,
                        wrap: 0,
                    });
                }
            }
        }
        let dim = k + 6;
        let externals = (0..2)
            .map(|s| ExternalModes {
                c: k + 3 * s,
                bx: Some(k + 3 * s + 1),
                by: Some(k + 3 * s + 2),
                partner: sites[s],
                u: u[s],
            })
            .collect();
        Ok(Self {
            k,
            sites,
            matrix: CouplingMatrix::from_terms(dim, terms).with_externals(externals),
        })
    }

    pub fn slot_mode(&self, s: Slot) -> usize {
        match s {
            Slot::C(e) => self.k + 3 * e,
            Slot::Bx(e) => self.k + 3 * e + 1,
            Slot::By(e) => self.k + 3 * e + 2,
            Slot::Edge(e) => self.sites[e],
        }
    }

    /// Frozen-edge SWAP schedule: instantaneous-limit exchanges (lattice frozen)
    /// separated by exact transport.
    pub fn swap_schedule(&self, seq: SwapSequence, lambda: f64) -> PulseSchedule {
        let d = (self.k + self.sites[0] - self.sites[1]) % self.k;
        let d = (self.k - d) % self.k;
        let ex = |spin: usize| {
            Segment::new(PI / (4.0 * lambda))
                .frozen()
                .with(Override::ExternalCoupling { spin, lambda })
        };
        let loc = |f: Flavor| {
            Segment::new(PI / (4.0 * lambda))
                .frozen()
                .with(Override::ExternalField {
                    spin: 0,
                    axis: f,
                    h: lambda,
                })
                .with(Override::ExternalField {
                    spin: 1,
                    axis: f,
                    h: lambda,
                })
        };
        let mut s = PulseSchedule::new();
        for locals in seq.locals() {
            s.push(ex(0));
            s.push(Segment::new(d as f64));
            s.push(ex(1));
            s.push(Segment::new((self.k - d) as f64));
            s.push(ex(0));
            for f in locals {
                s.push(loc(f));
            }
        }
        s
    }
}

/// Measured restricted map of the six external Majoranas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapMap {
    pub slots: Vec<String>,
    /// `map[i][j]`: amplitude of initial slot `j` on slot `i`.
    pub map: Vec<Vec<f64>>,
}

impl SwapMap {
    /// Largest deviation from a signed permutation.
    pub fn deviation_from(&self, p: &SignedPerm, order: &[Slot]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, s) in order.iter().enumerate() {
            let (sign, t) = p.image(*s);
            for (i, r) in order.iter().enumerate() {
                let want = if *r == t { f64::from(sign) } else { 0.0 };
                worst = worst.max((self.map[i][j] - want).abs());
            }
        }
        worst
    }
}

pub fn external_slots() -> Vec<Slot> {
    let mut v = Slot::external(0).to_vec();
    v.extend(Slot::external(1));
    v
}

/// Frozen-ring SWAP: returns the measured six-mode map.
pub fn frozen_ring_swap(ring: &RingModel, seq: SwapSequence, lambda: f64) -> Result<SwapMap> {
    let sched = ring.swap_schedule(seq, lambda);
    let slots = external_slots();
    let o = crate::dynamics::evolve(&sched, &ring.matrix)?;
    let map = slots
        .iter()
        .map(|r| {
            slots
                .iter()
                .map(|c| o.get(ring.slot_mode(*r), ring.slot_mode(*c)))
                .collect()
        })
        .collect();
    Ok(SwapMap {
        slots: slots.iter().map(|s| s.label()).collect(),
        map,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapTiming {
    /// Travel time s1 → s2 along the short arc.
    pub leg1: f64,
    /// Travel time s2 → s1 along the rest of the loop.
    pub leg2: f64,
    /// Edge transport sign of each leg in the sample's gauge.
    pub signs: [i8; 2],
}

impl SwapTiming {
    /// Tunes both legs with one-way matched transfers; the long leg starts
    /// from the measured loop period.
    pub fn calibrate(setup: &EdgeSetup, lambda: f64, window: f64, dt: f64) -> Result<Self> {
        let tuned = |from, to, guess| -> Result<(f64, i8)> {
            let mut spec = TransferSpec::matched(from, to, lambda);
            spec.shape = PulseShape::Matched {
                gamma: None,
                window,
            };
            spec.travel_allowance = guess;
            spec.autotune = true;
            spec.dt = dt;
            let r = transfer_between_spins(setup, &spec)?;
            Ok((
                r.timings["travel_allowance"],
                if r.signs[0] < 0.0 { -1 } else { 1 },
            ))
        };
        let (leg1, t1) = tuned(0, 1, None)?;
        let probe = travel_time_probe(
            &setup.graph,
            &setup.params,
            &setup.gauge,
            ProbeOptions::default(),
        )?;
        let (leg2, t2) = tuned(1, 0, Some(probe.period - leg1))?;
        let signs =
            leg_signs_from_transfers([setup.gauge.external[0], setup.gauge.external[1]], [t1, t2]);
        Ok(Self { leg1, leg2, signs })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwapSpec {
    pub lambda: f64,
    pub sequence: SwapSequence,
    pub timing: SwapTiming,
    pub window: f64,
    pub dt: f64,
    /// Strength of the local field pulses.
    pub field: f64,
}

/// Pulses of the full realistic SWAP on a sample with two spins.
///
/// In every round each spin first emits its `c` with a rising envelope and
/// then captures the packet of the other spin with a falling one, so the loop
/// period `leg1 + leg2` has to fit four half-windows.
pub fn swap_pulses(spec: &SwapSpec, gamma: f64) -> Result<(Vec<Pulse>, f64, f64)> {
    let w = spec.window;
    let SwapTiming { leg1, leg2, .. } = spec.timing;
    if !(w > 0.0 && spec.field > 0.0 && leg1 > 0.0 && leg2 > 0.0) {
        return invalid("window, field and legs must be positive");
    }
    if leg1 + leg2 < 4.0 * w {
        return invalid(format!(
            "loop period {:.2} is shorter than four windows ({:.2})",
            leg1 + leg2,
            4.0 * w
        ));
    }
    let local = PI / (4.0 * spec.field);
    let coupling = |spin, envelope| Pulse {
        spin,
        target: PulseTarget::Coupling,
        strength: spec.lambda,
        envelope,
        gamma_ref: gamma,
    };
    // offsets of the round start and end relative to the s1 emission centre
    let lead = w.max(3.0 * w - leg1);
    let tail = leg1 + leg2 - w;
    let mut pulses = Vec::new();
    let mut t = 0.0;
    for locals in spec.sequence.locals() {
        let a = t + lead;
        pulses.push(coupling(0, rising(a, gamma, w)));
        pulses.push(coupling(1, rising(a + leg1 - 2.0 * w, gamma, w)));
        pulses.push(coupling(1, falling(a + leg1, gamma, w)));
        pulses.push(coupling(0, falling(a + leg1 - 2.0 * w + leg2, gamma, w)));
        t = a + tail;
        for f in locals {
            for spin in 0..2 {
                pulses.push(Pulse::rect(
                    spin,
                    PulseTarget::Field(f),
                    spec.field,
                    t,
                    local,
                ));
            }
            t += local;
        }
    }
    Ok((pulses, 0.0, t))
}

/// Realistic SWAP on a sample; the report tracks all six external Majoranas.
pub fn full_swap_gate(setup: &EdgeSetup, spec: &SwapSpec) -> Result<(FidelityReport, SwapMap)> {
    if setup.graph.externals.len() != 2 {
        return invalid("the SWAP needs exactly two spins");
    }
    let gamma = calibrate_emission_rate(setup, 0, spec.lambda)?;
    let (pulses, t0, t1) = swap_pulses(spec, gamma)?;
    let sched = schedule_from_pulses(&pulses, t0, t1, spec.dt, 1.0);
    let slots = external_slots();
    let mode = |s: Slot| -> Result<usize> {
        let e = setup.external(match s {
            Slot::C(k) | Slot::Bx(k) | Slot::By(k) | Slot::Edge(k) => k,
        })?;
        Ok(match s {
            Slot::C(_) => e.c,
            Slot::Bx(_) => e.bx.expect("external b_x"),
            Slot::By(_) => e.by.expect("external b_y"),
            Slot::Edge(_) => e.partner,
        })
    };
    let modes: Vec<usize> = slots.iter().map(|s| mode(*s)).collect::<Result<_>>()?;
    let out = run_tracked(setup, &sched, &modes)?;
    let map: Vec<Vec<f64>> = modes
        .iter()
        .map(|&r| out.finals.iter().map(|v| v[r]).collect())
        .collect();
    let ideal = analytic_swap_with(
        [setup.gauge.external[0], setup.gauge.external[1]],
        spec.timing.signs,
        spec.sequence,
    );
    let tracked: Vec<Tracked> = slots
        .iter()
        .map(|s| {
            let (_, t) = ideal.image(*s);
            Tracked {
                label: s.label(),
                target_label: t.label(),
                target: mode(t).expect("slot"),
            }
        })
        .collect();
    let mut rep = build_report(setup, "full_swap_gate", &tracked, &out);
    rep.timings.insert("leg1".into(), spec.timing.leg1);
    rep.timings.insert("leg2".into(), spec.timing.leg2);
    rep.timings.insert("total".into(), sched.total_time());
    rep.timings.insert("gamma".into(), gamma);
    Ok((
        rep,
        SwapMap {
            slots: slots.iter().map(|s| s.label()).collect(),
            map,
        },
    ))
}

// ---------------------------------------------------------------------------
// Travel time around the perimeter

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub period: f64,
    pub peak_overlap: f64,
    pub perimeter: f64,
    /// Energy width of the launched packet.
    pub sigma: f64,
    pub start_site: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Energy width of the packet; defaults to a quarter of the bulk gap.
    pub sigma: Option<f64>,
    pub dt: f64,
    pub max_time: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            sigma: None,
            dt: 0.5,
            max_time: 600.0,
        }
    }
}

/// Launches a zero-energy edge packet at the top of the sample and returns the
/// time of its first return (largest self-overlap after it has left).
pub fn travel_time_probe(
    graph: &LatticeGraph,
    params: &CouplingParams,
    gauge: &GaugeConfig,
    opts: ProbeOptions,
) -> Result<ProbeResult> {
    let a = assemble(graph, params, gauge)?;
    let sigma = opts.sigma.unwrap_or(params.bulk_gap() / 4.0);
    if sigma <= 0.0 {
        return Err(Error::Physics(
            "gapless bulk: no energy window for an edge packet".into(),
        ));
    }
    let top = (0..graph.num_sites())
        .map(|s| graph.position(s)[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let cx = (0..graph.num_sites())
        .map(|s| graph.position(s)[0])
        .sum::<f64>()
        / graph.num_sites() as f64;
    let start = graph
        .nearest_boundary_site([cx, top], None)
        .ok_or_else(|| Error::Invalid("sample has no boundary".into()))?;
    let v0 = unit_vector(a.dim, graph.c_mode(start));

    // φ = ∫ g(t) exp(A t) v0 dt with g(t) = exp(-σ² t²/2): a Gaussian energy filter
    let dt = opts.dt;
    let half = (4.0 / sigma / dt).ceil() as usize;
    let step = PulseSchedule::new().then(Segment::new(dt));
    let back = step.reversed();
    let mut phi = v0.clone();
    for (sched, sgn) in [(&step, 1.0), (&back, -1.0)] {
        let mut v = v0.clone();
        for k in 1..=half {
            propagate_sparse(&a, sched, &mut v, |_, _| {})?;
            let t = sgn * k as f64 * dt;
            let g = (-0.5 * sigma * sigma * t * t).exp();
            for (p, x) in phi.iter_mut().zip(&v) {
                *p += g * x;
            }
        }
    }
    let norm = phi.iter().map(|x| x * x).sum::<f64>().sqrt();
    for p in phi.iter_mut() {
        *p /= norm;
    }

    let mut v = phi.clone();
    let mut series = vec![(0.0, 1.0)];
    let steps = (opts.max_time / dt).ceil() as usize;
    let mut left = false;
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=steps {
        propagate_sparse(&a, &step, &mut v, |_, _| {})?;
        let o = crate::dynamics::overlap(&phi, &v).abs();
        series.push((k as f64 * dt, o));
        if o < 0.1 {
            left = true;
        }
        if left && o > 0.5 {
            if best.is_none_or(|(_, b)| o > b) {
                best = Some((k, o));
            } else {
                break;
            }
        }
    }
    let Some((k, peak)) = best else {
        let max_after = series.iter().skip(1).map(|p| p.1).fold(0.0, f64::max);
        return Err(Error::Physics(format!(
            "packet did not return within t = {}: largest later self-overlap {max_after:.3} (packet dispersed or left the window)",
            opts.max_time
        )));
    };
    // parabolic refinement around the sampled peak
    let (y0, y1, y2) = (
        series[k - 1].1,
        series[k].1,
        series.get(k + 1).map_or(series[k].1, |p| p.1),
    );
    let den = y0 - 2.0 * y1 + y2;
    let shift = if den.abs() > 1e-15 {
        0.5 * (y0 - y2) / den
    } else {
        0.0
    };
    Ok(ProbeResult {
        period: (k as f64 + shift.clamp(-1.0, 1.0)) * dt,
        peak_overlap: peak,
        perimeter: graph.perimeter_length(),
        sigma,
        start_site: start,
    })
}
