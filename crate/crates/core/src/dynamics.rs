//! Real-time evolution of Majorana mode vectors under piecewise-constant generators.
//!
//! A mode vector `v` evolves as `v -> exp(A t) v` on each segment.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::CouplingMatrix;
use crate::lattice::{BOwner, Flavor, LatticeGraph, LinkKind, ModeLabel};
use crate::linalg;
use crate::sparse::expmv;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Override {
    /// `λ σ^e_z σ^i_z` between an external spin and its edge site.
    ExternalCoupling { spin: usize, lambda: f64 },
    /// Extra `δh_z` on a lattice site with a free b_z.
    SiteField { site: usize, delta_h: f64 },
    /// Local field on an external spin along x or y.
    ExternalField { spin: usize, axis: Flavor, h: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    /// Multiplier of the lattice generator (0 freezes the sample).
    pub base_scale: f64,
    pub overrides: Vec<Override>,
}

impl Segment {
    pub fn new(duration: f64) -> Self {
        Self {
            duration,
            base_scale: 1.0,
            overrides: Vec::new(),
        }
    }

    pub fn with(mut self, o: Override) -> Self {
        self.overrides.push(o);
        self
    }

    pub fn frozen(mut self) -> Self {
        self.base_scale = 0.0;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub segments: Vec<Segment>,
}

impl PulseSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: Segment) -> &mut Self {
        self.segments.push(s);
        self
    }

    pub fn then(mut self, s: Segment) -> Self {
        self.segments.push(s);
        self
    }

    pub fn extend(&mut self, other: &PulseSchedule) {
        self.segments.extend(other.segments.iter().cloned());
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Midpoint sampling of a smooth protocol on `[t0, t1)` with `steps` segments.
    pub fn sampled(
        t0: f64,
        t1: f64,
        steps: usize,
        f: impl Fn(f64) -> (f64, Vec<Override>),
    ) -> Self {
        let dt = (t1 - t0) / steps as f64;
        let segments = (0..steps)
            .map(|k| {
                let (base_scale, overrides) = f(t0 + (k as f64 + 0.5) * dt);
                Segment {
                    duration: dt,
                    base_scale,
                    overrides,
                }
            })
            .collect();
        Self { segments }
    }

    /// Schedule undoing this one: segments in reverse order with negated generators.
    pub fn reversed(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| Segment {
                duration: s.duration,
                base_scale: -s.base_scale,
                overrides: s.overrides.iter().map(|o| o.negated()).collect(),
            })
            .collect();
        Self { segments }
    }
}

impl Override {
    fn negated(&self) -> Self {
        match *self {
            Override::ExternalCoupling { spin, lambda } => Override::ExternalCoupling {
                spin,
                lambda: -lambda,
            },
            Override::SiteField { site, delta_h } => Override::SiteField {
                site,
                delta_h: -delta_h,
            },
            Override::ExternalField { spin, axis, h } => {
                Override::ExternalField { spin, axis, h: -h }
            }
        }
    }

    /// Generator entry `(i, j, A_ij)` added by this override.
    pub fn entry(&self, base: &CouplingMatrix) -> Result<(usize, usize, f64)> {
        match *self {
            Override::ExternalCoupling { spin, lambda } => {
                let e = base
                    .externals
                    .get(spin)
                    .ok_or_else(|| Error::Invalid(format!("no external spin {spin}")))?;
                Ok((e.c, e.partner, 2.0 * lambda * f64::from(e.u)))
            }
            Override::SiteField { site, delta_h } => {
                let b = base.site_bz.get(site).copied().flatten().ok_or_else(|| {
                    Error::Invalid(format!("site {site} has no free b_z for a δh_z field"))
                })?;
                Ok((site, b, 2.0 * delta_h))
            }
            Override::ExternalField { spin, axis, h } => {
                let e = base
                    .externals
                    .get(spin)
                    .ok_or_else(|| Error::Invalid(format!("no external spin {spin}")))?;
                let b = match axis {
                    LinkKind::X => e.bx,
                    LinkKind::Y => e.by,
                    LinkKind::Z => None,
                };
                let b = b.ok_or_else(|| {
                    Error::Invalid(format!(
                        "external spin {spin} has no free b_{}",
                        axis.as_str()
                    ))
                })?;
                Ok((e.c, b, 2.0 * h))
            }
        }
    }
}

fn segment_entries(base: &CouplingMatrix, seg: &Segment) -> Result<Vec<(usize, usize, f64)>> {
    if !(seg.duration > 0.0 && seg.duration.is_finite()) {
        return invalid(format!(
            "segment duration must be positive, got {}",
            seg.duration
        ));
    }
    seg.overrides.iter().map(|o| o.entry(base)).collect()
}

/// Dense generator of one segment.
pub fn segment_generator(base: &CouplingMatrix, seg: &Segment) -> Result<DMatrix<f64>> {
    let mut a = base.dense() * seg.base_scale;
    for (i, j, v) in segment_entries(base, seg)? {
        a[(i, j)] += v;
        a[(j, i)] -= v;
    }
    if (&a + a.transpose()).amax() != 0.0 {
        return Err(Error::Numerical(
            "effective generator is not antisymmetric".into(),
        ));
    }
    Ok(a)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionMatrix {
    pub o: DMatrix<f64>,
}

impl EvolutionMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            o: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.o.nrows()
    }

    pub fn orthogonality_defect(&self) -> f64 {
        linalg::orthogonality_defect(&self.o)
    }

    pub fn determinant(&self) -> f64 {
        self.o.determinant()
    }

    /// Entry `O_ij`: amplitude on mode `i` of a vector started on mode `j`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.o[(i, j)]
    }

    pub fn compose(&self, later: &EvolutionMatrix) -> EvolutionMatrix {
        EvolutionMatrix {
            o: &later.o * &self.o,
        }
    }
}

/// Exact `O = Π exp(A_seg t_seg)` with later segments acting last.
pub fn evolve(schedule: &PulseSchedule, base: &CouplingMatrix) -> Result<EvolutionMatrix> {
    let mut o = DMatrix::identity(base.dim, base.dim);
    for seg in &schedule.segments {
        let a = segment_generator(base, seg)?;
        o = linalg::expm_antisymmetric(&a, seg.duration) * o;
    }
    Ok(EvolutionMatrix { o })
}

pub fn propagate(v: &[f64], o: &EvolutionMatrix) -> Result<Vec<f64>> {
    if v.len() != o.dim() {
        return invalid(format!(
            "vector of length {} against a {}-mode evolution",
            v.len(),
            o.dim()
        ));
    }
    Ok((&o.o * DVector::from_column_slice(v)).as_slice().to_vec())
}

pub fn overlap(v: &[f64], w: &[f64]) -> f64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum()
}

pub fn fidelity(v: &[f64], w: &[f64]) -> f64 {
    overlap(v, w).abs()
}

pub fn unit_vector(dim: usize, mode: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[mode] = 1.0;
    v
}

/// Sparse propagation of a single vector; `observer(t, v)` runs after every segment.
pub fn propagate_sparse(
    base: &CouplingMatrix,
    schedule: &PulseSchedule,
    v: &mut [f64],
    mut observer: impl FnMut(f64, &[f64]),
) -> Result<()> {
    if v.len() != base.dim {
        return invalid(format!(
            "vector of length {} against {} modes",
            v.len(),
            base.dim
        ));
    }
    let a = base.csr();
    let base_norm = a.norm_inf();
    let mut t = 0.0;
    for seg in &schedule.segments {
        let extra = segment_entries(base, seg)?;
        let s = seg.base_scale;
        let mut extra_norm = vec![0.0; base.dim];
        for &(i, j, x) in &extra {
            extra_norm[i] += x.abs();
            extra_norm[j] += x.abs();
        }
        let norm = s.abs() * base_norm + extra_norm.iter().fold(0.0f64, |m, x| m.max(*x));
        let apply = |x: &[f64], y: &mut [f64]| {
            a.mul_scaled(s, x, y);
            for &(i, j, val) in &extra {
                y[i] += val * x[j];
                y[j] -= val * x[i];
            }
        };
        expmv(apply, norm, seg.duration, v);
        t += seg.duration;
        observer(t, v);
    }
    Ok(())
}

/// Weight of `v` on single-particle energies `|ε| > cutoff` of the static
/// generator, from a Jackson-damped Chebyshev expansion of a step in `−A²`.
pub fn weight_above(base: &CouplingMatrix, v: &[f64], cutoff: f64, order: usize) -> Result<f64> {
    if v.len() != base.dim {
        return invalid(format!(
            "vector of length {} against {} modes",
            v.len(),
            base.dim
        ));
    }
    let a = base.csr();
    // spectrum of −A² lies in [0, r]
    let r = a.norm_inf().powi(2) * 1.0001;
    if r == 0.0 || cutoff * cutoff >= r {
        return Ok(0.0);
    }
    let n = v.len();
    let mut tmp = vec![0.0; n];
    // y = (2/r)(−A²)x − x
    let apply = |x: &[f64], y: &mut [f64], tmp: &mut [f64]| {
        a.mul_scaled(1.0, x, tmp);
        a.mul_scaled(-2.0 / r, tmp, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi -= xi;
        }
    };
    let y0 = 2.0 * cutoff * cutoff / r - 1.0;
    let theta = y0.acos();
    let big_n = order as f64 + 1.0;
    let jackson = |k: f64| {
        ((big_n - k) * (PI * k / big_n).cos() + (PI * k / big_n).sin() / (PI / big_n).tan()) / big_n
    };
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let mut prev = v.to_vec();
    let mut cur = vec![0.0; n];
    let mut next = vec![0.0; n];
    apply(&prev, &mut cur, &mut tmp);
    let mut w = theta / PI * dot(v, v);
    for k in 1..=order {
        let kf = k as f64;
        w += jackson(kf) * 2.0 * (kf * theta).sin() / (kf * PI) * dot(v, &cur);
        apply(&cur, &mut next, &mut tmp);
        for (nx, p) in next.iter_mut().zip(&prev) {
            *nx = 2.0 * *nx - p;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(w)
}

/// Squared amplitudes grouped per site; all weights add up to the squared norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    pub c: Vec<f64>,
    /// Free b flavors (x, y, z) of each site.
    pub b: Vec<[f64; 3]>,
    /// (c, b_x, b_y) of each external spin.
    pub external: Vec<[f64; 3]>,
}

impl DensityMap {
    pub fn total(&self) -> f64 {
        self.c.iter().sum::<f64>()
            + self.b.iter().flatten().sum::<f64>()
            + self.external.iter().flatten().sum::<f64>()
    }

    pub fn site_weight(&self, site: usize) -> f64 {
        self.c[site] + self.b[site].iter().sum::<f64>()
    }

    pub fn lattice_weight(&self) -> f64 {
        (0..self.c.len()).map(|s| self.site_weight(s)).sum()
    }
}

pub fn snapshot_density(v: &[f64], graph: &LatticeGraph) -> DensityMap {
    let n = graph.num_sites();
    let mut d = DensityMap {
        c: vec![0.0; n],
        b: vec![[0.0; 3]; n],
        external: vec![[0.0; 3]; graph.externals.len()],
    };
    for (m, x) in v.iter().enumerate() {
        let w = x * x;
        match graph.mode_label(m) {
            ModeLabel::C(s) => d.c[s] += w,
            ModeLabel::ExternalC(e) => d.external[e][0] += w,
            ModeLabel::B(BOwner::Site(s), f) => d.b[s][f.index()] += w,
            ModeLabel::B(BOwner::External(e), f) => d.external[e][1 + f.index()] += w,
        }
    }
    d
}

/// Records site densities at chosen times for export.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub frames: Vec<(f64, DensityMap)>,
}

impl Trajectory {
    pub fn record(&mut self, t: f64, v: &[f64], graph: &LatticeGraph) {
        self.frames.push((t, snapshot_density(v, graph)));
    }

    /// CSV `time,site,weight`; external spins appear as `e0`, `e1`, ...
    pub fn write_csv<W: Write>(&self, w: W, min_weight: f64) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time", "site", "weight"])?;
        for (t, d) in &self.frames {
            for s in 0..d.c.len() {
                let x = d.site_weight(s);
                if x >= min_weight {
                    out.write_record([t.to_string(), s.to_string(), x.to_string()])?;
                }
            }
            for (e, x) in d.external.iter().enumerate() {
                let x: f64 = x.iter().sum();
                if x >= min_weight {
                    out.write_record([t.to_string(), format!("e{e}"), x.to_string()])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}
