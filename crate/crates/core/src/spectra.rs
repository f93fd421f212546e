//! Bulk dispersion, strip band structures and edge-branch analysis.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{CouplingMatrix, CouplingParams, Term};
use crate::lattice::{BOwner, LatticeGraph, ModeLabel, Periodicity, Sublattice, SQRT3};
use crate::linalg;

const N1: [f64; 2] = [0.5, SQRT3 / 2.0];
const N2: [f64; 2] = [-0.5, SQRT3 / 2.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BulkDispersion {
    pub q: [Complex64; 2],
    pub f: Complex64,
    pub delta: Complex64,
    /// `sqrt(f(q) f(-q) + Δ²)`; real and non-negative for real q.
    pub energy: Complex64,
}

fn dot(q: [Complex64; 2], n: [f64; 2]) -> Complex64 {
    q[0] * n[0] + q[1] * n[1]
}

fn f_of(q: [Complex64; 2], p: &CouplingParams) -> Complex64 {
    let i = Complex64::i();
    2.0 * (p.j[0] * (i * dot(q, N1)).exp() + p.j[1] * (i * dot(q, N2)).exp() + p.j[2])
}

/// Bulk quantities at a (possibly complex) momentum.
pub fn bulk_dispersion(q: [Complex64; 2], p: &CouplingParams) -> BulkDispersion {
    let f = f_of(q, p);
    let fm = f_of([-q[0], -q[1]], p);
    let (q1, q2) = (dot(q, N1), dot(q, N2));
    let delta =
        4.0 * (p.kappa[1] * q1.sin() + p.kappa[0] * (-q2).sin() + p.kappa[2] * (q2 - q1).sin());
    let energy = (f * fm + delta * delta).sqrt();
    BulkDispersion {
        q,
        f,
        delta,
        energy,
    }
}

pub fn bulk_energy(q: [f64; 2], p: &CouplingParams) -> f64 {
    bulk_dispersion([Complex64::from(q[0]), Complex64::from(q[1])], p)
        .energy
        .re
}

/// The two nodes `±q*` of `f`, which exist inside the gapless phase.
pub fn node_locations(p: &CouplingParams) -> Result<[[f64; 2]; 2]> {
    let [jx, jy, jz] = p.j;
    if !p.is_b_phase() || jx == 0.0 || jy == 0.0 {
        return Err(Error::Physics(
            "couplings violate the triangle inequalities: gapped A-phase".into(),
        ));
    }
    let c = ((jz * jz - jx * jx - jy * jy) / (2.0 * jx * jy)).clamp(-1.0, 1.0);
    let phi = c.acos();
    let mut out = [[0.0; 2]; 2];
    for (k, s) in [1.0, -1.0].into_iter().enumerate() {
        let ph = s * phi;
        let w = Complex64::new(jx * ph.cos() + jy, jx * ph.sin());
        let theta2 = (-jz / w).arg();
        let theta1 = theta2 + ph;
        out[k] = [theta1 - theta2, (theta1 + theta2) / SQRT3];
    }
    Ok(out)
}

/// Bloch transform of a periodic strip generator along the edge.
#[derive(Clone, Debug)]
pub struct BlochModel {
    /// Mode indices of the unit cell at cell index 0, one per orbital.
    pub orbitals: Vec<usize>,
    /// Transverse row of each orbital.
    pub orbital_row: Vec<usize>,
    pub orbital_is_b: Vec<bool>,
    /// Orbitals with no coupling at all (flat zero modes); excluded from `matrix`.
    pub decoupled: Vec<usize>,
    pub rows: usize,
    /// Distance of each row from the outside of the first edge.
    pub row_y: Vec<f64>,
    period: f64,
    active: Vec<usize>,
    hops: Vec<(usize, usize, f64, i64)>,
}

impl BlochModel {
    pub fn new(graph: &LatticeGraph, matrix: &CouplingMatrix) -> Result<Self> {
        let Some(info) = graph.strip.as_ref() else {
            return invalid("Bloch transform needs a strip");
        };
        if graph.periodicity == Periodicity::Open {
            return invalid(
                "open strips have no Bloch momentum; diagonalize the finite matrix instead",
            );
        }
        if !graph.externals.is_empty() {
            return invalid("external spins break translation symmetry");
        }
        let n = graph.num_sites();
        let dim = matrix.dim;
        let mut cell = vec![0usize; dim];
        let mut key = vec![(false, 0usize, Sublattice::Even, 0usize); dim];
        for m in 0..dim {
            let (site, is_b, flavor) = match graph.mode_label(m) {
                ModeLabel::C(s) => (s, false, 0),
                ModeLabel::B(BOwner::Site(s), f) => (s, true, f.index()),
                _ => unreachable!("no externals"),
            };
            cell[m] = info.cell[site];
            key[m] = (is_b, info.row[site], graph.sites[site].sublattice, flavor);
        }
        let orbitals: Vec<usize> = (0..dim).filter(|&m| cell[m] == 0).collect();
        let mut orb_of = vec![usize::MAX; dim];
        for m in 0..dim {
            orb_of[m] = orbitals
                .iter()
                .position(|&o| key[o] == key[m])
                .ok_or_else(|| Error::Invalid("strip is not translation invariant".into()))?;
        }
        let mut touched = vec![false; orbitals.len()];
        let mut hops = Vec::new();
        let l = info.length as i64;
        for &Term { i, j, value, wrap } in &matrix.terms {
            for (a, b, v, w) in [(i, j, value, wrap), (j, i, -value, -wrap)] {
                touched[orb_of[a]] = true;
                if cell[a] == 0 {
                    let d = cell[b] as i64 + w * l - cell[a] as i64;
                    hops.push((orb_of[a], orb_of[b], v, d));
                }
            }
        }
        let active: Vec<usize> = (0..orbitals.len()).filter(|&o| touched[o]).collect();
        let decoupled = (0..orbitals.len()).filter(|&o| !touched[o]).collect();
        let mut pos = vec![usize::MAX; orbitals.len()];
        for (k, &o) in active.iter().enumerate() {
            pos[o] = k;
        }
        let hops = hops
            .into_iter()
            .map(|(a, b, v, d)| (pos[a], pos[b], v, d))
            .collect();
        let orbital_row: Vec<usize> = orbitals.iter().map(|&m| key[m].1).collect();
        let row_y = row_depths(graph, n);
        Ok(Self {
            orbital_is_b: orbitals.iter().map(|&m| key[m].0).collect(),
            orbitals,
            orbital_row,
            decoupled,
            rows: info.rows,
            row_y,
            period: info.period,
            active,
            hops,
        })
    }

    /// Number of coupled bands.
    pub fn bands(&self) -> usize {
        self.active.len()
    }

    /// Row of each coupled band orbital.
    pub fn active_rows(&self) -> Vec<usize> {
        self.active.iter().map(|&o| self.orbital_row[o]).collect()
    }

    /// `h(q) = i Σ_d A(0, d) e^{i q d}` over the coupled orbitals.
    pub fn matrix(&self, q: f64) -> DMatrix<Complex64> {
        let n = self.active.len();
        let mut h = DMatrix::zeros(n, n);
        for &(a, b, v, d) in &self.hops {
            let ph = Complex64::new(0.0, q * self.period * d as f64).exp();
            h[(a, b)] += Complex64::new(0.0, v) * ph;
        }
        h
    }

    pub fn eigen(&self, q: f64) -> (Vec<f64>, DMatrix<Complex64>) {
        linalg::eigh(self.matrix(q))
    }

    /// Weight of every eigenvector on each row (rows are 1-based, index 0 unused).
    pub fn row_weights(&self, vectors: &DMatrix<Complex64>) -> Vec<Vec<f64>> {
        let rows = self.active_rows();
        (0..vectors.ncols())
            .map(|k| {
                let mut w = vec![0.0; self.rows + 1];
                for (i, &r) in rows.iter().enumerate() {
                    w[r] += vectors[(i, k)].norm_sqr();
                }
                w
            })
            .collect()
    }
}

/// Transverse distance of every row from the first non-existent row outside edge 1.
fn row_depths(graph: &LatticeGraph, n: usize) -> Vec<f64> {
    let info = graph.strip.as_ref().expect("strip");
    let mut y = vec![0.0; info.rows + 1];
    match graph.edge_kind {
        crate::lattice::EdgeKind::Armchair => {
            for (r, v) in y.iter_mut().enumerate() {
                *v = r as f64 / 2.0;
            }
        }
        _ => {
            // zigzag: measured down from the top row, which sits one row spacing
            // (1/(2√3)) inside the missing row above it
            let mut top = f64::NEG_INFINITY;
            let mut per_row = vec![0.0; info.rows + 1];
            for s in 0..n {
                let p = graph.position(s)[1];
                per_row[info.row[s]] = p;
                if info.row[s] == 1 {
                    top = top.max(p);
                }
            }
            for r in 1..=info.rows {
                y[r] = top - per_row[r] + 1.0 / (2.0 * SQRT3);
            }
        }
    }
    y
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandStructure {
    pub qx: Vec<f64>,
    /// Per-q ascending eigenvalues of the coupled bands.
    pub bands: Vec<Vec<f64>>,
    /// Per-q, per-band weight on each row (1-based).
    pub row_weights: Vec<Vec<Vec<f64>>>,
    pub rows: usize,
    pub row_y: Vec<f64>,
    /// Flat zero-energy bands of orbitals with no coupling.
    pub decoupled_bands: usize,
}

pub fn uniform_grid(points: usize, period: f64) -> Vec<f64> {
    let width = 2.0 * PI / period;
    (0..points)
        .map(|k| -width / 2.0 + width * k as f64 / points as f64)
        .collect()
}

pub fn strip_band_structure(model: &BlochModel, qx_grid: &[f64]) -> BandStructure {
    let per_q: Vec<(Vec<f64>, Vec<Vec<f64>>)> = qx_grid
        .par_iter()
        .map(|&q| {
            let (e, v) = model.eigen(q);
            (e, model.row_weights(&v))
        })
        .collect();
    let (bands, row_weights) = per_q.into_iter().unzip();
    BandStructure {
        qx: qx_grid.to_vec(),
        bands,
        row_weights,
        rows: model.rows,
        row_y: model.row_y.clone(),
        decoupled_bands: model.decoupled.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    /// Row 1 side: the top zigzag edge or the left armchair edge.
    Top,
    Bottom,
}

impl Edge {
    pub fn as_str(self) -> &'static str {
        match self {
            Edge::Top => "top",
            Edge::Bottom => "bottom",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeModeRecord {
    pub qx: f64,
    pub band: usize,
    pub energy: f64,
    pub edge_weight: f64,
    pub decay_length: Option<f64>,
    pub which_edge: Edge,
    /// Weight split between both edges near the threshold.
    pub ambiguous: bool,
}

fn edge_weights(w: &[f64], rows: usize, depth: usize) -> (f64, f64) {
    let d = depth.min(rows);
    let top = w[1..=d].iter().sum();
    let bot = w[rows + 1 - d..=rows].iter().sum();
    (top, bot)
}

/// Edge-localized modes: weight within `depth` rows of an edge at least `threshold`.
pub fn classify_edge_branch(
    bands: &BandStructure,
    depth: usize,
    threshold: f64,
) -> Vec<EdgeModeRecord> {
    let mut out = Vec::new();
    for (k, &q) in bands.qx.iter().enumerate() {
        for (b, w) in bands.row_weights[k].iter().enumerate() {
            let (top, bot) = edge_weights(w, bands.rows, depth);
            let (edge, weight) = if top >= bot {
                (Edge::Top, top)
            } else {
                (Edge::Bottom, bot)
            };
            let ambiguous = top.min(bot) > 0.25 || (weight - threshold).abs() < 0.05;
            if weight >= threshold || ambiguous {
                out.push(EdgeModeRecord {
                    qx: q,
                    band: b,
                    energy: bands.bands[k][b],
                    edge_weight: weight,
                    decay_length: decay_length(w, &bands.row_y, edge, 2),
                    which_edge: edge,
                    ambiguous,
                });
            }
        }
    }
    out
}

/// Exponential decay length of a row-weight profile measured from `edge`.
/// Weights are summed in blocks of `block` rows, then `ln(weight)` is fitted
/// linearly in the depth; the amplitude decay length is `-2 / slope`.
pub fn decay_length(w: &[f64], row_y: &[f64], edge: Edge, block: usize) -> Option<f64> {
    let rows = w.len() - 1;
    let block = block.max(1);
    let order: Vec<usize> = match edge {
        Edge::Top => (1..=rows).collect(),
        Edge::Bottom => (1..=rows).rev().collect(),
    };
    let y_of = |r: usize| match edge {
        Edge::Top => row_y[r],
        Edge::Bottom => row_y[rows] + row_y[1] - row_y[r],
    };
    // fit over the near half, skipping numerically empty blocks
    let half = order.len() / 2;
    let mut pts = Vec::new();
    for chunk in order[..half].chunks(block) {
        if chunk.len() < block {
            break;
        }
        let s: f64 = chunk.iter().map(|&r| w[r]).sum();
        let y = chunk.iter().map(|&r| y_of(r)).sum::<f64>() / block as f64;
        if s > 1e-14 {
            pts.push((y, s.ln()));
        }
    }
    if pts.len() < 3 {
        return None;
    }
    let slope = linear_slope(&pts);
    (slope < 0.0).then(|| -2.0 / slope)
}

pub(crate) fn linear_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// How to pick the chiral branch at a given momentum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSelector {
    pub edge: Edge,
    pub depth: usize,
    pub threshold: f64,
}

impl BranchSelector {
    pub fn zigzag_top() -> Self {
        Self {
            edge: Edge::Top,
            depth: 4,
            threshold: 0.5,
        }
    }
}

/// Energy and row profile of the selected edge mode closest to zero energy.
pub fn branch_mode(model: &BlochModel, sel: BranchSelector, q: f64) -> Option<(f64, Vec<f64>)> {
    let (e, v) = model.eigen(q);
    let w = model.row_weights(&v);
    let mut best: Option<(f64, usize)> = None;
    for (k, wk) in w.iter().enumerate() {
        let (top, bot) = edge_weights(wk, model.rows, sel.depth);
        let weight = match sel.edge {
            Edge::Top => top,
            Edge::Bottom => bot,
        };
        if weight >= sel.threshold && best.is_none_or(|(be, _)| e[k].abs() < be.abs()) {
            best = Some((e[k], k));
        }
    }
    best.map(|(en, k)| (en, w[k].clone()))
}

pub fn branch_energy(model: &BlochModel, sel: BranchSelector, q: f64) -> Option<f64> {
    branch_mode(model, sel, q).map(|m| m.0)
}

/// Slope dε/dq of the selected branch at `q0` by a Richardson-refined
/// central difference with step `h`.
pub fn group_velocity(model: &BlochModel, sel: BranchSelector, q0: f64, h: f64) -> Result<f64> {
    let e = |q: f64| {
        branch_energy(model, sel, q).ok_or_else(|| {
            Error::Physics(format!(
                "no edge mode at q = {q:.4}: window reaches the continuum, use a smaller step"
            ))
        })
    };
    let d1 = (e(q0 + h)? - e(q0 - h)?) / (2.0 * h);
    let d2 = (e(q0 + 2.0 * h)? - e(q0 - 2.0 * h)?) / (4.0 * h);
    Ok((4.0 * d1 - d2) / 3.0)
}

/// Zero crossing of the selected branch inside `[lo, hi]`, by bisection.
pub fn zero_crossing(model: &BlochModel, sel: BranchSelector, lo: f64, hi: f64) -> Result<f64> {
    let e = |q: f64| {
        branch_energy(model, sel, q)
            .ok_or_else(|| Error::Physics(format!("no edge mode at q = {q:.4}")))
    };
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (e(a)?, e(b)?);
    if fa * fb > 0.0 {
        return Err(Error::Physics(
            "branch does not change sign in the bracket".into(),
        ));
    }
    for _ in 0..60 {
        let mut m = 0.5 * (a + b);
        // edges on both sides are degenerate where their branches meet; step off that point
        let fm = match branch_energy(model, sel, m) {
            Some(f) => f,
            None if b - a < 1e-6 * (hi - lo) => return Ok(m),
            None => {
                m += 0.01 * (b - a);
                e(m)?
            }
        };
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
        if b - a < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Rows `qx,band_index,energy,edge_weight,which_edge`; the edge weight is taken
/// within `depth` rows of the heavier edge.
pub fn write_band_csv<W: std::io::Write>(bands: &BandStructure, depth: usize, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["qx", "band_index", "energy", "edge_weight", "which_edge"])?;
    for (k, q) in bands.qx.iter().enumerate() {
        for (b, e) in bands.bands[k].iter().enumerate() {
            let (top, bot) = edge_weights(&bands.row_weights[k][b], bands.rows, depth);
            let (edge, weight) = if top >= bot {
                (Edge::Top, top)
            } else {
                (Edge::Bottom, bot)
            };
            out.write_record([
                q.to_string(),
                b.to_string(),
                e.to_string(),
                weight.to_string(),
                edge.as_str().to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Smallest excitation energy over a q grid of a torus (or any periodic) model.
pub fn minimal_energy(model: &BlochModel, qx_grid: &[f64]) -> f64 {
    qx_grid
        .par_iter()
        .map(|&q| {
            linalg::eigvalsh(model.matrix(q))
                .iter()
                .fold(f64::INFINITY, |m, e| m.min(e.abs()))
        })
        .reduce(|| f64::INFINITY, f64::min)
}
