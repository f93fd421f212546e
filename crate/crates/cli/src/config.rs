//! Run configuration. Energies are in units of J.

use std::path::PathBuf;

use kitaev_edge::disorder::{DisorderSpec, Distribution};
use kitaev_edge::hamiltonian::{CouplingParams, SiteField};
use kitaev_edge::lattice::{EdgeKind, FiniteShape, LatticeGraph, LinkKind, Periodicity};
use kitaev_edge::protocols::SwapSequence;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub lattice: LatticeSection,
    #[serde(default)]
    pub couplings: CouplingSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub disorder: DisorderSection,
    #[serde(default)]
    pub theory: TheorySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    /// zigzag | armchair strips, hexagon | rectangle samples. Strip commands
    /// default to zigzag, sample commands to hexagon.
    pub edge_kind: Option<EdgeKind>,
    pub rows: usize,
    pub length: usize,
    pub periodicity: Periodicity,
    /// Hexagon side in plaquettes.
    pub side: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            edge_kind: None,
            rows: 40,
            length: 1,
            periodicity: Periodicity::PeriodicX,
            side: 20,
            width: 30,
            height: 20,
        }
    }
}

impl LatticeSection {
    pub fn finite_shape(&self) -> Result<FiniteShape, CliError> {
        match self.edge_kind.unwrap_or(EdgeKind::Hexagon) {
            EdgeKind::Hexagon => Ok(FiniteShape::Hexagon { side: self.side }),
            EdgeKind::Rectangle => Ok(FiniteShape::Rectangle {
                width: self.width,
                height: self.height,
            }),
            k => Err(CliError::config(format!(
                "this command needs a finite sample (hexagon or rectangle), got {}",
                kind_name(k)
            ))),
        }
    }

    pub fn strip_kind(&self) -> Result<EdgeKind, CliError> {
        match self.edge_kind.unwrap_or(EdgeKind::Zigzag) {
            k @ (EdgeKind::Zigzag | EdgeKind::Armchair) => Ok(k),
            k => Err(CliError::config(format!(
                "this command needs a zigzag or armchair strip, got {}",
                kind_name(k)
            ))),
        }
    }
}

pub fn kind_name(k: EdgeKind) -> &'static str {
    match k {
        EdgeKind::Zigzag => "zigzag",
        EdgeKind::Armchair => "armchair",
        EdgeKind::Hexagon => "hexagon",
        EdgeKind::Rectangle => "rectangle",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingSection {
    #[serde(rename = "Jx")]
    pub jx: f64,
    #[serde(rename = "Jy")]
    pub jy: f64,
    #[serde(rename = "Jz")]
    pub jz: f64,
    /// Isotropic κ; ignored when `kappa_xyz` is given.
    pub kappa: f64,
    pub kappa_xyz: Option<[f64; 3]>,
    /// Field on the free b_z of every boundary site.
    pub h_z: f64,
    /// Field on every free b flavor of the boundary.
    pub h_b: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            jx: 1.0,
            jy: 1.0,
            jz: 1.0,
            kappa: 0.027,
            kappa_xyz: None,
            h_z: 0.0,
            h_b: 0.0,
        }
    }
}

impl CouplingSection {
    pub fn kappa3(&self) -> [f64; 3] {
        self.kappa_xyz.unwrap_or([self.kappa; 3])
    }

    pub fn params(&self, graph: &LatticeGraph) -> CouplingParams {
        let mut p = CouplingParams {
            j: [self.jx, self.jy, self.jz],
            kappa: self.kappa3(),
            h_b: self.h_b,
            ..Default::default()
        };
        if self.h_z != 0.0 {
            for s in 0..graph.num_sites() {
                if graph
                    .b_mode(kitaev_edge::lattice::BOwner::Site(s), LinkKind::Z)
                    .is_some()
                {
                    p.site_fields.push(SiteField {
                        site: s,
                        field: [0.0, 0.0, self.h_z],
                    });
                }
            }
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    /// Points of the qx grid over one period.
    pub points: usize,
    /// Rows counted as "edge" from each side.
    pub edge_depth: usize,
    /// Minimal weight within `edge_depth` for an edge mode.
    pub edge_threshold: f64,
    /// Window `[lo, hi]` searched for the zero crossing of the branch.
    pub crossing_window: Option<[f64; 2]>,
    /// Step of the finite-difference velocity.
    pub velocity_step: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        Self {
            points: 121,
            edge_depth: 4,
            edge_threshold: 0.5,
            crossing_window: None,
            velocity_step: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseMode {
    Rectangular,
    Matched,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    /// x positions of the spins along the top edge.
    pub spins: Vec<f64>,
    pub lambda: f64,
    pub pulse: PulseMode,
    /// Half-width of the matched envelopes.
    pub window: f64,
    /// Delay between emission and capture; the nominal d/v when absent.
    pub travel_time: Option<f64>,
    pub autotune: bool,
    pub dt: f64,
    /// Minimal acceptable fidelity.
    pub threshold: f64,
    /// Snapshot spacing of the trajectory CSV; no trajectory when absent.
    pub trajectory_every: Option<f64>,
    pub sequence: SwapSequence,
    /// Envelope half-width of the SWAP; must fit four times into the loop period.
    pub swap_window: f64,
    /// Strength of the local field pulses in the SWAP.
    pub local_field: f64,
    /// Gauge values u of the spin couplings.
    pub gauge: Option<Vec<i8>>,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            spins: vec![6.5, -7.5],
            lambda: 0.1,
            pulse: PulseMode::Matched,
            window: 90.0,
            travel_time: None,
            autotune: true,
            dt: 0.5,
            threshold: 0.95,
            trajectory_every: None,
            sequence: SwapSequence::FlavorPreserving,
            swap_window: 65.0,
            local_field: 0.5,
            gauge: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisorderSection {
    pub spreads: Vec<f64>,
    pub distribution: Distribution,
    pub samples: usize,
    pub seed: u64,
}

impl Default for DisorderSection {
    fn default() -> Self {
        Self {
            spreads: vec![0.0, 0.05, 0.1, 0.2],
            distribution: Distribution::Uniform,
            samples: 20,
            seed: 1,
        }
    }
}

impl DisorderSection {
    pub fn spec(&self, seed: u64) -> DisorderSpec {
        DisorderSpec {
            relative_spread: 0.0,
            distribution: self.distribution,
            seed,
            samples: self.samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheorySection {
    pub points: usize,
    /// Field used for the zigzag tables when `couplings.h_z` is zero.
    pub h_z: f64,
    /// Armchair boundary fields tabulated for the velocity.
    pub h_b_values: Vec<f64>,
    /// Rows of a zigzag strip compared against the single-mode branch; none when 0.
    pub strip_rows: usize,
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            points: 61,
            h_z: 0.1,
            h_b_values: vec![0.0, 0.05, 0.1, 0.2, 0.4, 1.0],
            strip_rows: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let c: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::config(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::config(m.to_string()));
        let c = &self.couplings;
        if [c.jx, c.jy, c.jz, c.kappa, c.h_z, c.h_b]
            .iter()
            .chain(c.kappa3().iter())
            .any(|x| !x.is_finite())
        {
            return bad("couplings must be finite");
        }
        let p = &self.protocol;
        if !(p.lambda >= 0.0
            && p.dt > 0.0
            && p.window > 0.0
            && p.swap_window > 0.0
            && p.local_field > 0.0)
        {
            return bad(
                "protocol: lambda must be >= 0; dt, window, swap_window and local_field positive",
            );
        }
        if self.spectrum.points < 2 || self.theory.points < 2 {
            return bad("grids need at least two points");
        }
        if self.disorder.samples == 0
            || self.disorder.spreads.iter().any(|s| s.is_nan() || *s < 0.0)
        {
            return bad("disorder: samples >= 1 and spreads >= 0 required");
        }
        Ok(())
    }
}
