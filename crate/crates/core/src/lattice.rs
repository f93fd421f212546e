//! Honeycomb lattices: periodic strips, tori and finite flakes.
//!
//! Sites carry Bravais coordinates `(a, b)` with position `a n1 + b n2`,
//! `n1 = (1/2, √3/2)`, `n2 = (-1/2, √3/2)`. Odd sites sit `1/√3` below their
//! even partner, so the z-link is vertical. Links always point from the even
//! to the odd site: x joins `E(R)` to `O(R + n1)`, y joins `E(R)` to
//! `O(R + n2)` and z joins `E(R)` to `O(R)`.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sublattice {
    Even,
    Odd,
}

/// Link direction. The same label names the b-flavor that pairs along it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    X,
    Y,
    Z,
}

pub type Flavor = LinkKind;

impl LinkKind {
    pub const ALL: [LinkKind; 3] = [LinkKind::X, LinkKind::Y, LinkKind::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    fn shift(self) -> (i64, i64) {
        match self {
            LinkKind::X => (1, 0),
            LinkKind::Y => (0, 1),
            LinkKind::Z => (0, 0),
        }
    }

    /// The kind different from both arguments (which must differ).
    pub fn third(a: LinkKind, b: LinkKind) -> LinkKind {
        LinkKind::ALL
            .into_iter()
            .find(|&k| k != a && k != b)
            .expect("distinct kinds")
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkKind::X => "x",
            LinkKind::Y => "y",
            LinkKind::Z => "z",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteCoord {
    /// Bravais coordinate along n1.
    pub cell_x: i64,
    /// Bravais coordinate along n2.
    pub cell_y: i64,
    pub sublattice: Sublattice,
}

impl SiteCoord {
    pub fn new(cell_x: i64, cell_y: i64, sublattice: Sublattice) -> Self {
        Self {
            cell_x,
            cell_y,
            sublattice,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        let (a, b) = (self.cell_x as f64, self.cell_y as f64);
        let mut y = (a + b) * SQRT3 / 2.0;
        if self.sublattice == Sublattice::Odd {
            y -= 1.0 / SQRT3;
        }
        [(a - b) / 2.0, y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkRecord {
    /// Even endpoint.
    pub site_a: usize,
    /// Odd endpoint.
    pub site_b: usize,
    pub kind: LinkKind,
    /// Number of periods crossed going from `site_a` to `site_b`.
    pub wrap: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripleRecord {
    pub outer_j: usize,
    pub center_k: usize,
    pub outer_l: usize,
    pub chirality_sign: i8,
    /// Link kind absent at the center; selects the κ component.
    pub kind: LinkKind,
    /// Periods crossed going from `outer_j` to `outer_l`.
    pub wrap: i64,
    /// Links (j, k) and (k, l); the coupling carries the product of their u.
    pub links: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeKind {
    Zigzag,
    Armchair,
    Hexagon,
    Rectangle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Periodicity {
    PeriodicX,
    Open,
    /// Periodic along and across the strip (zigzag only); a bulk torus.
    Torus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BOwner {
    Site(usize),
    External(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FreeB {
    pub owner: BOwner,
    pub flavor: Flavor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalSpin {
    /// Lattice site whose b_z pairs with the external b_z.
    pub site: usize,
}

/// Transverse bookkeeping of a strip: row of every site (1 = outermost top or
/// left row) and its unit-cell index along the edge.
#[derive(Clone, Debug, PartialEq)]
pub struct StripInfo {
    pub rows: usize,
    pub length: usize,
    /// Length of the translation vector along the edge.
    pub period: f64,
    pub row: Vec<usize>,
    pub cell: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plaquette {
    /// Bravais coordinate of the lowest even vertex.
    pub anchor: (i64, i64),
    pub links: [usize; 6],
    pub center: [f64; 2],
}

/// Label of a single Majorana mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModeLabel {
    C(usize),
    ExternalC(usize),
    B(BOwner, Flavor),
}

#[derive(Clone, Copy, Debug)]
enum Canon {
    Open,
    /// Reduce along `(pa, pb)` with the cell key `(a ± b)/2`.
    Strip {
        pa: i64,
        pb: i64,
        len: i64,
        sum_key: bool,
    },
    /// Zigzag torus: chains `a + b` modulo `chains`, then along x.
    Torus {
        chains: i64,
        len: i64,
    },
}

impl Canon {
    fn reduce(&self, c: SiteCoord) -> (SiteCoord, i64) {
        match *self {
            Canon::Open => (c, 0),
            Canon::Strip {
                pa,
                pb,
                len,
                sum_key,
            } => {
                let (a, b) = (c.cell_x, c.cell_y);
                let key2 = if sum_key { a + b } else { a - b };
                // cell coordinate is key2/2 (+1/4 to break ties); floor over len
                let w = (2 * key2 + 1).div_euclid(4 * len);
                (
                    SiteCoord::new(a - w * len * pa, b - w * len * pb, c.sublattice),
                    w,
                )
            }
            Canon::Torus { chains, len } => {
                let (mut a, mut b) = (c.cell_x, c.cell_y);
                let chain = match c.sublattice {
                    Sublattice::Even => a + b,
                    Sublattice::Odd => a + b - 1,
                };
                let n = chain.div_euclid(chains);
                a -= n * chains / 2;
                b -= n * chains / 2;
                let key2 = a - b;
                let w = (2 * key2 + 1).div_euclid(4 * len);
                (SiteCoord::new(a - w * len, b + w * len, c.sublattice), w)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatticeGraph {
    pub sites: Vec<SiteCoord>,
    pub links: Vec<LinkRecord>,
    pub triples: Vec<TripleRecord>,
    pub edge_kind: EdgeKind,
    pub periodicity: Periodicity,
    pub boundary_sites: Vec<usize>,
    pub free_b_modes: Vec<FreeB>,
    pub externals: Vec<ExternalSpin>,
    pub strip: Option<StripInfo>,
    pub plaquettes: Vec<Plaquette>,
    link_at: Vec<[Option<usize>; 3]>,
    index: HashMap<SiteCoord, usize>,
    canon: Canon,
}

impl LatticeGraph {
    fn from_sites(
        sites: Vec<SiteCoord>,
        canon: Canon,
        edge_kind: EdgeKind,
        periodicity: Periodicity,
        strip: Option<StripInfo>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(sites.len());
        for (i, s) in sites.iter().enumerate() {
            let (c, _) = canon.reduce(*s);
            if index.insert(c, i).is_some() {
                return invalid(format!("duplicate site {c:?}"));
            }
        }
        let n = sites.len();
        let mut links = Vec::new();
        let mut link_at = vec![[None; 3]; n];
        for (i, s) in sites.iter().enumerate() {
            if s.sublattice != Sublattice::Even {
                continue;
            }
            for kind in LinkKind::ALL {
                let (da, db) = kind.shift();
                let (t, w) = canon.reduce(SiteCoord::new(
                    s.cell_x + da,
                    s.cell_y + db,
                    Sublattice::Odd,
                ));
                if let Some(&o) = index.get(&t) {
                    link_at[i][kind.index()] = Some(links.len());
                    link_at[o][kind.index()] = Some(links.len());
                    links.push(LinkRecord {
                        site_a: i,
                        site_b: o,
                        kind,
                        wrap: w,
                    });
                }
            }
        }

        let mut adj: Vec<Vec<(usize, LinkKind, i64, usize)>> = vec![Vec::new(); n];
        for (li, l) in links.iter().enumerate() {
            adj[l.site_a].push((l.site_b, l.kind, l.wrap, li));
            adj[l.site_b].push((l.site_a, l.kind, -l.wrap, li));
        }
        let mut triples = Vec::new();
        for (k, nb) in adj.iter().enumerate() {
            for p in 0..nb.len() {
                for q in p + 1..nb.len() {
                    let (j, kj, wj, lj) = nb[p];
                    let (l, kl, wl, ll) = nb[q];
                    let wrap = wl - wj;
                    if j == l && wrap == 0 {
                        continue;
                    }
                    let cyclic = matches!(
                        (kj, kl),
                        (LinkKind::X, LinkKind::Y)
                            | (LinkKind::Y, LinkKind::Z)
                            | (LinkKind::Z, LinkKind::X)
                    );
                    triples.push(TripleRecord {
                        outer_j: j,
                        center_k: k,
                        outer_l: l,
                        chirality_sign: if cyclic { 1 } else { -1 },
                        kind: LinkKind::third(kj, kl),
                        wrap,
                        links: [lj, ll],
                    });
                }
            }
        }

        let mut boundary_sites = Vec::new();
        let mut free_b_modes = Vec::new();
        for (i, slots) in link_at.iter().enumerate() {
            if slots.iter().any(Option::is_none) {
                boundary_sites.push(i);
            }
            for kind in LinkKind::ALL {
                if slots[kind.index()].is_none() {
                    free_b_modes.push(FreeB {
                        owner: BOwner::Site(i),
                        flavor: kind,
                    });
                }
            }
        }

        let mut g = LatticeGraph {
            sites,
            links,
            triples,
            edge_kind,
            periodicity,
            boundary_sites,
            free_b_modes,
            externals: Vec::new(),
            strip,
            plaquettes: Vec::new(),
            link_at,
            index,
            canon,
        };
        g.plaquettes = g.find_plaquettes();
        Ok(g)
    }

    fn find_plaquettes(&self) -> Vec<Plaquette> {
        let mut out = Vec::new();
        for (i, s) in self.sites.iter().enumerate() {
            if s.sublattice != Sublattice::Even {
                continue;
            }
            let (a, b) = (s.cell_x, s.cell_y);
            let e1 = self.find(SiteCoord::new(a + 1, b, Sublattice::Even));
            let e2 = self.find(SiteCoord::new(a, b + 1, Sublattice::Even));
            let (Some(e1), Some(e2)) = (e1, e2) else {
                continue;
            };
            let want = [
                (i, LinkKind::X),
                (e1, LinkKind::Z),
                (e1, LinkKind::Y),
                (e2, LinkKind::X),
                (e2, LinkKind::Z),
                (i, LinkKind::Y),
            ];
            let mut links = [0usize; 6];
            let mut ok = true;
            for (slot, (site, kind)) in links.iter_mut().zip(want) {
                match self.link_at[site][kind.index()] {
                    Some(l) => *slot = l,
                    None => ok = false,
                }
            }
            let distinct: BTreeSet<usize> = links.iter().copied().collect();
            if !ok || distinct.len() != 6 {
                continue;
            }
            let p = s.position();
            out.push(Plaquette {
                anchor: (a, b),
                links,
                center: [p[0], p[1] + 1.0 / SQRT3],
            });
        }
        out
    }

    /// Dense index of a (possibly unreduced) coordinate.
    pub fn find(&self, c: SiteCoord) -> Option<usize> {
        self.index.get(&self.canon.reduce(c).0).copied()
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn position(&self, site: usize) -> [f64; 2] {
        self.sites[site].position()
    }

    pub fn link_at(&self, site: usize, kind: LinkKind) -> Option<usize> {
        self.link_at[site][kind.index()]
    }

    pub fn degree(&self, site: usize) -> usize {
        self.link_at[site].iter().filter(|l| l.is_some()).count()
    }

    /// Plaquettes containing each link.
    pub fn link_plaquettes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.links.len()];
        for (p, pl) in self.plaquettes.iter().enumerate() {
            for &l in &pl.links {
                out[l].push(p);
            }
        }
        out
    }

    /// Shortest dual path between two plaquettes, as the list of links crossed.
    pub fn dual_path(&self, from: usize, to: usize) -> Result<Vec<usize>> {
        let np = self.plaquettes.len();
        if from >= np || to >= np {
            return invalid(format!("plaquette index out of range ({np} plaquettes)"));
        }
        let lp = self.link_plaquettes();
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; np];
        let mut seen = vec![false; np];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(p) = queue.pop_front() {
            if p == to {
                break;
            }
            for &l in &self.plaquettes[p].links {
                for &q in &lp[l] {
                    if !seen[q] {
                        seen[q] = true;
                        prev[q] = Some((p, l));
                        queue.push_back(q);
                    }
                }
            }
        }
        if !seen[to] {
            return Err(Error::Physics(format!(
                "no dual path between plaquettes {from} and {to}"
            )));
        }
        let mut path = Vec::new();
        let mut cur = to;
        while let Some((p, l)) = prev[cur] {
            path.push(l);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// Plaquette whose center is closest to `point`.
    pub fn nearest_plaquette(&self, point: [f64; 2]) -> Option<usize> {
        nearest(self.plaquettes.iter().map(|p| p.center), point)
    }

    /// Boundary site closest to `point`, optionally requiring a free b flavor.
    pub fn nearest_boundary_site(&self, point: [f64; 2], free: Option<Flavor>) -> Option<usize> {
        let cands: Vec<usize> = self
            .boundary_sites
            .iter()
            .copied()
            .filter(|&s| free.is_none_or(|f| self.b_mode(BOwner::Site(s), f).is_some()))
            .collect();
        nearest(cands.iter().map(|&s| self.position(s)), point).map(|k| cands[k])
    }

    /// Boundary sites of a finite sample ordered counter-clockwise around its centroid.
    pub fn perimeter_order(&self) -> Vec<usize> {
        let n = self.sites.len() as f64;
        let (mut cx, mut cy) = (0.0, 0.0);
        for i in 0..self.sites.len() {
            let p = self.position(i);
            cx += p[0] / n;
            cy += p[1] / n;
        }
        let mut b: Vec<(f64, usize)> = self
            .boundary_sites
            .iter()
            .map(|&s| {
                let p = self.position(s);
                ((p[1] - cy).atan2(p[0] - cx), s)
            })
            .collect();
        b.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        b.into_iter().map(|(_, s)| s).collect()
    }

    /// Counter-clockwise path length along the boundary from `from` to `to`.
    pub fn perimeter_distance(&self, from: usize, to: usize) -> Result<f64> {
        let order = self.perimeter_order();
        let pos = |s: usize| order.iter().position(|&x| x == s);
        let (Some(i), Some(j)) = (pos(from), pos(to)) else {
            return invalid("perimeter distance needs two boundary sites");
        };
        let m = order.len();
        let mut d = 0.0;
        let mut k = i;
        while k != j {
            let (p, q) = (self.position(order[k]), self.position(order[(k + 1) % m]));
            d += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            k = (k + 1) % m;
        }
        Ok(d)
    }

    pub fn perimeter_length(&self) -> f64 {
        let order = self.perimeter_order();
        let m = order.len();
        (0..m)
            .map(|k| {
                let (p, q) = (self.position(order[k]), self.position(order[(k + 1) % m]));
                ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
            })
            .sum()
    }

    /// Couples an external spin to a boundary site through a z-link between the
    /// external b_z and the site's free b_z.
    pub fn attach_external_spin(&self, site: usize) -> Result<LatticeGraph> {
        if site >= self.sites.len() {
            return invalid(format!("site {site} out of range"));
        }
        if !self.boundary_sites.contains(&site) {
            return invalid(format!("site {site} is not on the boundary"));
        }
        let pos = self
            .free_b_modes
            .iter()
            .position(|f| f.owner == BOwner::Site(site) && f.flavor == LinkKind::Z)
            .ok_or_else(|| Error::Invalid(format!("site {site} has no free b_z")))?;
        let mut g = self.clone();
        g.free_b_modes.remove(pos);
        let e = g.externals.len();
        g.externals.push(ExternalSpin { site });
        g.free_b_modes.push(FreeB {
            owner: BOwner::External(e),
            flavor: LinkKind::X,
        });
        g.free_b_modes.push(FreeB {
            owner: BOwner::External(e),
            flavor: LinkKind::Y,
        });
        Ok(g)
    }

    /// Majorana mode count: site c's, external c's, free b's.
    pub fn mode_count(&self) -> usize {
        self.sites.len() + self.externals.len() + self.free_b_modes.len()
    }

    pub fn c_mode(&self, site: usize) -> usize {
        site
    }

    pub fn external_c_mode(&self, spin: usize) -> usize {
        self.sites.len() + spin
    }

    pub fn b_mode(&self, owner: BOwner, flavor: Flavor) -> Option<usize> {
        let base = self.sites.len() + self.externals.len();
        self.free_b_modes
            .iter()
            .position(|f| f.owner == owner && f.flavor == flavor)
            .map(|k| base + k)
    }

    /// Free-b mode index for every (site, flavor); `None` where the flavor is linked.
    pub fn b_mode_table(&self) -> Vec<[Option<usize>; 3]> {
        let base = self.sites.len() + self.externals.len();
        let mut t = vec![[None; 3]; self.sites.len()];
        for (k, f) in self.free_b_modes.iter().enumerate() {
            if let BOwner::Site(s) = f.owner {
                t[s][f.flavor.index()] = Some(base + k);
            }
        }
        t
    }

    pub fn mode_label(&self, m: usize) -> ModeLabel {
        let n = self.sites.len();
        let e = self.externals.len();
        if m < n {
            ModeLabel::C(m)
        } else if m < n + e {
            ModeLabel::ExternalC(m - n)
        } else {
            let f = self.free_b_modes[m - n - e];
            ModeLabel::B(f.owner, f.flavor)
        }
    }

    /// Lattice site a mode lives on; `None` for external-spin modes.
    pub fn mode_site(&self, m: usize) -> Option<usize> {
        match self.mode_label(m) {
            ModeLabel::C(s) | ModeLabel::B(BOwner::Site(s), _) => Some(s),
            _ => None,
        }
    }

    /// CSV `site_a,site_b,kind`.
    pub fn write_adjacency_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["site_a", "site_b", "kind"])?;
        for l in &self.links {
            wr.write_record([
                l.site_a.to_string(),
                l.site_b.to_string(),
                l.kind.as_str().to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn nearest(points: impl Iterator<Item = [f64; 2]>, target: [f64; 2]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (k, p) in points.enumerate() {
        let d = (p[0] - target[0]).powi(2) + (p[1] - target[1]).powi(2);
        if best.is_none_or(|(bd, _)| d < bd - 1e-12) {
            best = Some((d, k));
        }
    }
    best.map(|(_, k)| k)
}

/// Zigzag or armchair strip, `rows` transverse rows by `length` cells.
///
/// Zigzag rows count downward from the top edge: odd rows are odd-sublattice
/// sites, and `rows` must be even. Armchair rows are vertical columns counted
/// from the left edge, two sites per cell and column.
pub fn build_strip(
    edge_kind: EdgeKind,
    rows: usize,
    length: usize,
    periodicity: Periodicity,
) -> Result<LatticeGraph> {
    if rows < 2 {
        return invalid("a strip needs at least 2 rows");
    }
    if length < 1 {
        return invalid("a strip needs at least 1 cell");
    }
    let (r, l) = (rows as i64, length as i64);
    let mut sites = Vec::new();
    let mut row = Vec::new();
    let mut cell = Vec::new();
    match edge_kind {
        EdgeKind::Zigzag => {
            if !rows.is_multiple_of(2) {
                return invalid("zigzag strips need an even number of rows");
            }
            let chains = r / 2;
            if periodicity == Periodicity::Torus && chains % 2 != 0 {
                return invalid("a zigzag torus needs rows divisible by 4");
            }
            for rr in 1..=r {
                let k = chains - 1 - (rr - 1) / 2;
                for m in 0..l {
                    let (kk, sub) = if rr % 2 == 1 {
                        (k + 1, Sublattice::Odd)
                    } else {
                        (k, Sublattice::Even)
                    };
                    let p = kk.rem_euclid(2);
                    sites.push(SiteCoord::new(
                        (kk + 2 * m + p) / 2,
                        (kk - 2 * m - p) / 2,
                        sub,
                    ));
                    row.push(rr as usize);
                    cell.push(m as usize);
                }
            }
            let canon = match periodicity {
                Periodicity::Open => Canon::Open,
                Periodicity::PeriodicX => Canon::Strip {
                    pa: 1,
                    pb: -1,
                    len: l,
                    sum_key: false,
                },
                Periodicity::Torus => Canon::Torus { chains, len: l },
            };
            let info = StripInfo {
                rows,
                length,
                period: 1.0,
                row,
                cell,
            };
            LatticeGraph::from_sites(sites, canon, edge_kind, periodicity, Some(info))
        }
        EdgeKind::Armchair => {
            if periodicity == Periodicity::Torus {
                return invalid("armchair tori are not supported");
            }
            if periodicity == Periodicity::PeriodicX && length < 2 {
                return invalid("periodic armchair strips need at least 2 cells");
            }
            for j in 1..=r {
                let c = j - 1;
                for m in 0..l {
                    let p = c.rem_euclid(2);
                    let (a, b) = ((c + 2 * m + p) / 2, (2 * m + p - c) / 2);
                    for sub in [Sublattice::Even, Sublattice::Odd] {
                        sites.push(SiteCoord::new(a, b, sub));
                        row.push(j as usize);
                        cell.push(m as usize);
                    }
                }
            }
            let canon = match periodicity {
                Periodicity::Open => Canon::Open,
                _ => Canon::Strip {
                    pa: 1,
                    pb: 1,
                    len: l,
                    sum_key: true,
                },
            };
            let info = StripInfo {
                rows,
                length,
                period: SQRT3,
                row,
                cell,
            };
            LatticeGraph::from_sites(sites, canon, edge_kind, periodicity, Some(info))
        }
        other => invalid(format!("{other:?} is not a strip edge kind")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FiniteShape {
    /// Zigzag-edged hexagon with `side` plaquettes per side (6·side² sites).
    Hexagon { side: usize },
    /// `width` plaquettes per row, `height` rows, alternate rows shifted by half a cell.
    Rectangle { width: usize, height: usize },
}

/// Finite open sample built as a union of hexagonal plaquettes.
pub fn build_finite(shape: FiniteShape) -> Result<LatticeGraph> {
    let mut anchors = Vec::new();
    let kind = match shape {
        FiniteShape::Hexagon { side } => {
            if side < 1 {
                return invalid("hexagon side must be at least 1");
            }
            let n = side as i64;
            for a in -n..=n {
                for b in -n..=n {
                    if a.abs().max(b.abs()).max((a + b).abs()) < n {
                        anchors.push((a, b));
                    }
                }
            }
            EdgeKind::Hexagon
        }
        FiniteShape::Rectangle { width, height } => {
            if width < 1 || height < 1 {
                return invalid("rectangle needs at least one plaquette");
            }
            for s in 0..height as i64 {
                for t in 0..width as i64 {
                    let a = t + s.div_euclid(2);
                    anchors.push((a, s - a));
                }
            }
            EdgeKind::Rectangle
        }
    };
    let mut set = BTreeSet::new();
    for (a, b) in anchors {
        for (da, db, sub) in [
            (0, 0, Sublattice::Even),
            (1, 0, Sublattice::Odd),
            (1, 0, Sublattice::Even),
            (1, 1, Sublattice::Odd),
            (0, 1, Sublattice::Even),
            (0, 1, Sublattice::Odd),
        ] {
            set.insert(SiteCoord::new(a + da, b + db, sub));
        }
    }
    LatticeGraph::from_sites(
        set.into_iter().collect(),
        Canon::Open,
        kind,
        Periodicity::Open,
        None,
    )
}
