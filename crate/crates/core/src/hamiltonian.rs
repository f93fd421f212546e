//! Quadratic Majorana generator `A` with `H = (i/4) Σ A_jk c_j c_k`.
//!
//! Links contribute `A_{E,O} = 2 J u`, κ-triples `A_{j,l} = 2 κ sign u_jk u_kl`, and a
//! field component acting on a free b flavor `A_{c,b} = 2 h`. The Heisenberg
//! equation reads `dc/dt = A c`, and excitation energies are the eigenvalues of `iA`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{BOwner, LatticeGraph, LinkKind};
use crate::sparse::Csr;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteField {
    pub site: usize,
    /// (h_x, h_y, h_z)
    pub field: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    /// (J_x, J_y, J_z)
    pub j: [f64; 3],
    /// (κ_x, κ_y, κ_z); a triple uses the component of the link kind missing at its center.
    pub kappa: [f64; 3],
    /// Field on every free b flavor of the lattice boundary.
    pub h_b: f64,
    pub site_fields: Vec<SiteField>,
    /// Drop κ-triples centered on sites whose matching b flavor is free.
    pub suppress_edge_kappa: bool,
    /// Per-link, per-triple and per-site multipliers (empty = all ones).
    pub link_scale: Vec<f64>,
    pub triple_scale: Vec<f64>,
    pub field_scale: Vec<f64>,
}

impl Default for CouplingParams {
    fn default() -> Self {
        Self {
            j: [1.0; 3],
            kappa: [0.0; 3],
            h_b: 0.0,
            site_fields: Vec::new(),
            suppress_edge_kappa: false,
            link_scale: Vec::new(),
            triple_scale: Vec::new(),
            field_scale: Vec::new(),
        }
    }
}

impl CouplingParams {
    pub fn isotropic(j: f64, kappa: f64) -> Self {
        Self {
            j: [j; 3],
            kappa: [kappa; 3],
            ..Self::default()
        }
    }

    pub fn with_h_b(mut self, h_b: f64) -> Self {
        self.h_b = h_b;
        self
    }

    /// Triangle inequalities of the gapless phase.
    pub fn is_b_phase(&self) -> bool {
        let [x, y, z] = self.j.map(f64::abs);
        x <= y + z && y <= x + z && z <= x + y
    }

    /// Bulk gap `2√3 |κx + κy + κz|` (the isotropic value is `6√3 κ`).
    pub fn bulk_gap(&self) -> f64 {
        2.0 * crate::lattice::SQRT3 * self.kappa.iter().sum::<f64>().abs()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaugeConfig {
    pub links: Vec<i8>,
    /// u of each external-spin z-link.
    pub external: Vec<i8>,
}

impl GaugeConfig {
    pub fn uniform(graph: &LatticeGraph) -> Self {
        Self {
            links: vec![1; graph.links.len()],
            external: vec![1; graph.externals.len()],
        }
    }

    pub fn flip(&mut self, link: usize) {
        self.links[link] = -self.links[link];
    }
}

/// One generator entry `A_ij += value` (and `A_ji -= value`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub i: usize,
    pub j: usize,
    pub value: f64,
    /// Periods crossed from `i` to `j` (for Bloch transforms of periodic strips).
    pub wrap: i64,
}

/// Mode indices of an attached external spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalModes {
    pub c: usize,
    pub bx: Option<usize>,
    pub by: Option<usize>,
    /// c mode of the lattice site it couples to.
    pub partner: usize,
    pub u: i8,
}

#[derive(Clone, Debug)]
pub struct CouplingMatrix {
    pub dim: usize,
    pub terms: Vec<Term>,
    pub externals: Vec<ExternalModes>,
    /// b_z mode of each site, where free (target of δh_z).
    pub site_bz: Vec<Option<usize>>,
    csr: Csr,
}

impl CouplingMatrix {
    /// Generator from explicit terms with no lattice attached.
    pub fn from_terms(dim: usize, terms: Vec<Term>) -> Self {
        let csr = Csr::antisymmetric(dim, terms.iter().map(|t| (t.i, t.j, t.value)));
        Self {
            dim,
            terms,
            externals: Vec::new(),
            site_bz: Vec::new(),
            csr,
        }
    }

    pub fn with_externals(mut self, externals: Vec<ExternalModes>) -> Self {
        self.externals = externals;
        self
    }

    pub fn csr(&self) -> &Csr {
        &self.csr
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.csr.get(i, j)
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.csr.triplets() {
            a[(i, j)] = v;
        }
        a
    }

    /// Sorted eigenvalues of `iA`.
    pub fn spectrum(&self) -> Vec<f64> {
        crate::linalg::eigvalsh(crate::linalg::times_i(&self.dense()))
    }

    /// CSV `row,col,value` of all nonzeros.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["row", "col", "value"])?;
        for (i, j, v) in self.csr.triplets() {
            wr.write_record([i.to_string(), j.to_string(), format!("{v:.17e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn scale(v: &[f64], k: usize) -> f64 {
    v.get(k).copied().unwrap_or(1.0)
}

fn check_len(name: &str, v: &[f64], n: usize) -> Result<()> {
    if !v.is_empty() && v.len() != n {
        return invalid(format!("{name} has {} entries, expected {n}", v.len()));
    }
    Ok(())
}

pub fn assemble(
    graph: &LatticeGraph,
    params: &CouplingParams,
    gauge: &GaugeConfig,
) -> Result<CouplingMatrix> {
    let n = graph.num_sites();
    if gauge.links.len() != graph.links.len() || gauge.external.len() != graph.externals.len() {
        return invalid("gauge configuration does not match the lattice");
    }
    if gauge
        .links
        .iter()
        .chain(&gauge.external)
        .any(|&u| u != 1 && u != -1)
    {
        return invalid("gauge values must be ±1");
    }
    check_len("link_scale", &params.link_scale, graph.links.len())?;
    check_len("triple_scale", &params.triple_scale, graph.triples.len())?;
    check_len("field_scale", &params.field_scale, n)?;
    if params
        .j
        .iter()
        .chain(&params.kappa)
        .chain([&params.h_b])
        .any(|x| !x.is_finite())
    {
        return invalid("couplings must be finite");
    }

    let mut terms =
        Vec::with_capacity(graph.links.len() + graph.triples.len() + graph.free_b_modes.len());
    for (k, l) in graph.links.iter().enumerate() {
        let v = 2.0
            * params.j[l.kind.index()]
            * f64::from(gauge.links[k])
            * scale(&params.link_scale, k);
        terms.push(Term {
            i: l.site_a,
            j: l.site_b,
            value: v,
            wrap: l.wrap,
        });
    }
    for (k, t) in graph.triples.iter().enumerate() {
        let kappa = params.kappa[t.kind.index()];
        if kappa == 0.0 {
            continue;
        }
        if params.suppress_edge_kappa && graph.link_at(t.center_k, t.kind).is_none() {
            continue;
        }
        let u = f64::from(gauge.links[t.links[0]] * gauge.links[t.links[1]]);
        let v = 2.0 * kappa * f64::from(t.chirality_sign) * u * scale(&params.triple_scale, k);
        terms.push(Term {
            i: t.outer_j,
            j: t.outer_l,
            value: v,
            wrap: t.wrap,
        });
    }

    let table = graph.b_mode_table();
    if params.h_b != 0.0 {
        for f in &graph.free_b_modes {
            if let BOwner::Site(s) = f.owner {
                let b = table[s][f.flavor.index()].expect("free flavor has a mode");
                let v = 2.0 * params.h_b * scale(&params.field_scale, s);
                terms.push(Term {
                    i: s,
                    j: b,
                    value: v,
                    wrap: 0,
                });
            }
        }
    }
    for sf in &params.site_fields {
        if sf.site >= n {
            return invalid(format!("field on missing site {}", sf.site));
        }
        for kind in LinkKind::ALL {
            let h = sf.field[kind.index()];
            if h == 0.0 {
                continue;
            }
            let b = table[sf.site][kind.index()].ok_or_else(|| {
                Error::Invalid(format!(
                    "field h_{} on site {} acts on a linked b flavor (outside the quadratic sector)",
                    kind.as_str(),
                    sf.site
                ))
            })?;
            let v = 2.0 * h * scale(&params.field_scale, sf.site);
            terms.push(Term {
                i: sf.site,
                j: b,
                value: v,
                wrap: 0,
            });
        }
    }

    let externals = graph
        .externals
        .iter()
        .enumerate()
        .map(|(e, x)| ExternalModes {
            c: graph.external_c_mode(e),
            bx: graph.b_mode(BOwner::External(e), LinkKind::X),
            by: graph.b_mode(BOwner::External(e), LinkKind::Y),
            partner: graph.c_mode(x.site),
            u: gauge.external[e],
        })
        .collect();
    let site_bz = table.iter().map(|t| t[LinkKind::Z.index()]).collect();
    let dim = graph.mode_count();
    let csr = Csr::antisymmetric(dim, terms.iter().map(|t| (t.i, t.j, t.value)));
    Ok(CouplingMatrix {
        dim,
        terms,
        externals,
        site_bz,
        csr,
    })
}

/// Wilson-loop value of every plaquette, in the order of `graph.plaquettes`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluxPattern {
    pub values: Vec<i8>,
}

impl FluxPattern {
    pub fn flipped(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == -1)
            .map(|(k, _)| k)
            .collect()
    }
}

pub fn flux_pattern(gauge: &GaugeConfig, graph: &LatticeGraph) -> FluxPattern {
    let values = graph
        .plaquettes
        .iter()
        .map(|p| p.links.iter().map(|&l| gauge.links[l]).product())
        .collect();
    FluxPattern { values }
}

/// Flips u along a dual path so that exactly the two plaquettes change flux.
pub fn insert_flux_pair(
    gauge: &GaugeConfig,
    graph: &LatticeGraph,
    a: usize,
    b: usize,
) -> Result<GaugeConfig> {
    if a == b {
        return invalid("flux pair needs two distinct plaquettes");
    }
    let mut g = gauge.clone();
    for l in graph.dual_path(a, b)? {
        g.flip(l);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{
        build_finite, build_strip, EdgeKind, FiniteShape, Periodicity, SiteCoord, Sublattice,
    };

    #[test]
    fn z_dimer() {
        // one z-link, no triples: the single-link matrix of the generator
        let a = CouplingMatrix::from_terms(
            2,
            vec![Term {
                i: 0,
                j: 1,
                value: 2.0,
                wrap: 0,
            }],
        );
        let e = a.spectrum();
        assert!((e[0] + 2.0).abs() < 1e-14 && (e[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn strip_matrix_is_antisymmetric_and_paired() {
        let g = build_strip(EdgeKind::Zigzag, 6, 5, Periodicity::PeriodicX).unwrap();
        let p = CouplingParams::isotropic(1.0, 0.05).with_h_b(0.2);
        let a = assemble(&g, &p, &GaugeConfig::uniform(&g)).unwrap();
        assert!(a.csr().is_antisymmetric());
        let e = a.spectrum();
        let n = e.len();
        for k in 0..n {
            assert!((e[k] + e[n - 1 - k]).abs() < 1e-10);
        }
    }

    #[test]
    fn gauge_flip_keeps_spectrum_of_small_sample() {
        let g = build_finite(FiniteShape::Hexagon { side: 1 }).unwrap();
        let p = CouplingParams::isotropic(1.0, 0.1);
        let mut u = GaugeConfig::uniform(&g);
        let e0 = assemble(&g, &p, &u).unwrap().spectrum();
        // flipping a link of a single hexagon changes its flux, so flip twice at one site (a gauge move)
        let s = g.links[0].site_a;
        for k in LinkKind::ALL {
            if let Some(l) = g.link_at(s, k) {
                u.flip(l);
            }
        }
        assert_eq!(flux_pattern(&u, &g).values, vec![1]);
        let e1 = assemble(&g, &p, &u).unwrap().spectrum();
        for (x, y) in e0.iter().zip(&e1) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn field_on_linked_flavor_is_rejected() {
        let g = build_strip(EdgeKind::Zigzag, 4, 3, Periodicity::PeriodicX).unwrap();
        let mut p = CouplingParams::isotropic(1.0, 0.0);
        let edge = g.boundary_sites[0];
        p.site_fields.push(SiteField {
            site: edge,
            field: [0.1, 0.0, 0.0],
        });
        assert!(assemble(&g, &p, &GaugeConfig::uniform(&g)).is_err());
        p.site_fields[0].field = [0.0, 0.0, 0.1];
        let a = assemble(&g, &p, &GaugeConfig::uniform(&g)).unwrap();
        let b = g.b_mode(BOwner::Site(edge), LinkKind::Z).unwrap();
        assert_eq!(a.get(edge, b), 0.2);
    }

    #[test]
    fn flux_locality() {
        let g = build_finite(FiniteShape::Hexagon { side: 4 }).unwrap();
        let u = GaugeConfig::uniform(&g);
        assert!(flux_pattern(&u, &g).values.iter().all(|&v| v == 1));
        let lp = g.link_plaquettes();
        let inner = (0..g.links.len()).find(|&l| lp[l].len() == 2).unwrap();
        let mut v = u.clone();
        v.flip(inner);
        let mut want = lp[inner].clone();
        want.sort();
        assert_eq!(flux_pattern(&v, &g).flipped(), want);

        // a horizontal run of z-links is a flux string: only its end plaquettes flip
        let mut w = u.clone();
        let mut count = 0;
        for (k, l) in g.links.iter().enumerate() {
            let c = g.sites[l.site_a];
            if l.kind == LinkKind::Z
                && c.cell_x + c.cell_y == 0
                && (-2..=1).contains(&(c.cell_x - c.cell_y))
            {
                w.flip(k);
                count += 1;
            }
        }
        assert!(count >= 2);
        assert_eq!(flux_pattern(&w, &g).flipped().len(), 2);
    }

    #[test]
    fn flux_pair_insertion() {
        let g = build_finite(FiniteShape::Hexagon { side: 6 }).unwrap();
        let u = GaugeConfig::uniform(&g);
        assert!(insert_flux_pair(&u, &g, 3, 3).is_err());
        let a = g.nearest_plaquette([-4.0, 0.5]).unwrap();
        let b = g.nearest_plaquette([4.0, 3.0]).unwrap();
        let v = insert_flux_pair(&u, &g, a, b).unwrap();
        let mut want = vec![a, b];
        want.sort();
        assert_eq!(flux_pattern(&v, &g).flipped(), want);
        let lp = g.link_plaquettes();
        let shared = (0..g.links.len()).find(|&l| lp[l].len() == 2).unwrap();
        let w = insert_flux_pair(&u, &g, lp[shared][0], lp[shared][1]).unwrap();
        assert_eq!(w.links.iter().filter(|&&x| x == -1).count(), 1);
    }

    #[test]
    fn triple_sign_gives_positive_mass_at_node() {
        // Bloch phase of the triple terms on a torus: Δ(q) = 4[κ sin(q·n1) - κ sin(q·n2) + κ sin(q·(n2-n1))]
        let g = build_strip(EdgeKind::Zigzag, 8, 3, Periodicity::Torus).unwrap();
        let kappa = 0.1;
        let a = assemble(
            &g,
            &CouplingParams {
                j: [0.0; 3],
                kappa: [kappa; 3],
                ..Default::default()
            },
            &GaugeConfig::uniform(&g),
        )
        .unwrap();
        // every even site has six next-nearest couplings of magnitude 2κ
        let e0 = g.find(SiteCoord::new(0, 0, Sublattice::Even)).unwrap();
        let nnn: Vec<f64> = (0..g.num_sites())
            .map(|j| a.get(e0, j))
            .filter(|v| *v != 0.0)
            .collect();
        assert_eq!(nnn.len(), 6);
        assert!(nnn.iter().all(|v| (v.abs() - 2.0 * kappa).abs() < 1e-15));
    }
}
