//! Static parameter disorder and fidelity statistics over samples.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{flux_pattern, CouplingParams};
use crate::lattice::LatticeGraph;
use crate::protocols::{transfer_between_spins, EdgeSetup, TransferSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    /// δ uniform on `[−spread, spread]`.
    #[default]
    Uniform,
    /// δ normal with σ = spread, truncated at 3σ.
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSpec {
    pub relative_spread: f64,
    #[serde(default)]
    pub distribution: Distribution,
    pub seed: u64,
    pub samples: usize,
}

impl DisorderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.relative_spread >= 0.0 && self.relative_spread.is_finite()) {
            return invalid(format!(
                "spread must be finite and >= 0, got {}",
                self.relative_spread
            ));
        }
        if self.samples == 0 {
            return invalid("at least one sample is needed");
        }
        Ok(())
    }

    pub fn with_spread(self, relative_spread: f64) -> Self {
        Self {
            relative_spread,
            ..self
        }
    }
}

/// One disordered parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub index: usize,
    pub params: CouplingParams,
    /// Multipliers that came out non-positive; such couplings flip sign and
    /// may move the sample into another phase.
    pub sign_flips: usize,
}

fn draw(rng: &mut ChaCha8Rng, spec: &DisorderSpec) -> f64 {
    let s = spec.relative_spread;
    if s == 0.0 {
        return 0.0;
    }
    match spec.distribution {
        Distribution::Uniform => rng.random_range(-s..=s),
        Distribution::Gaussian => {
            let n = Normal::new(0.0, s).expect("positive σ");
            loop {
                let x: f64 = n.sample(rng);
                if x.abs() <= 3.0 * s {
                    return x;
                }
            }
        }
    }
}

/// Multiplies every link, triple and site parameter by `1 + δ`; the
/// realization depends only on `(seed, index)`.
pub fn sample(
    graph: &LatticeGraph,
    params: &CouplingParams,
    spec: &DisorderSpec,
    index: usize,
) -> Result<Realization> {
    spec.validate()?;
    if index >= spec.samples {
        return invalid(format!(
            "sample index {index} out of range ({} samples)",
            spec.samples
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64);
    let mut flips = 0;
    let mut scales = |old: &[f64], len: usize| -> Vec<f64> {
        (0..len)
            .map(|k| {
                let m = 1.0 + draw(&mut rng, spec);
                if m <= 0.0 {
                    flips += 1;
                }
                old.get(k).copied().unwrap_or(1.0) * m
            })
            .collect()
    };
    let mut p = params.clone();
    p.link_scale = scales(&params.link_scale, graph.links.len());
    p.triple_scale = scales(&params.triple_scale, graph.triples.len());
    p.field_scale = scales(&params.field_scale, graph.num_sites());
    Ok(Realization {
        index,
        params: p,
        sign_flips: flips,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStatus {
    Ok,
    /// Some coupling changed sign; the fidelity is still recorded.
    SignFlip,
    Failed,
}

impl SampleStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleStatus::Ok => "ok",
            SampleStatus::SignFlip => "sign_flip",
            SampleStatus::Failed => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub index: usize,
    pub fidelity: f64,
    pub travel_time: f64,
    pub status: SampleStatus,
    /// Flux pattern unchanged by the disorder.
    pub flux_ok: bool,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub spread: f64,
    pub baseline: f64,
    pub samples: Vec<SampleOutcome>,
    pub mean: f64,
    pub std_dev: f64,
    pub worst: f64,
}

impl SweepResult {
    /// Summary statistics over the samples that did not fail.
    pub fn from_samples(spread: f64, baseline: f64, mut samples: Vec<SampleOutcome>) -> Self {
        samples.sort_by_key(|s| s.index);
        let f: Vec<f64> = samples
            .iter()
            .filter(|s| s.status != SampleStatus::Failed)
            .map(|s| s.fidelity)
            .collect();
        let n = f.len() as f64;
        let (mean, std_dev, worst) = if f.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = f.iter().sum::<f64>() / n;
            let var = if f.len() > 1 {
                f.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            (
                mean,
                var.sqrt(),
                f.iter().copied().fold(f64::INFINITY, f64::min),
            )
        };
        Self {
            spread,
            baseline,
            samples,
            mean,
            std_dev,
            worst,
        }
    }

    pub fn failed(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.status == SampleStatus::Failed)
            .count()
    }

    /// CSV `sample_index,fidelity,travel_time,status`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["sample_index", "fidelity", "travel_time", "status"])?;
        for s in &self.samples {
            wr.write_record([
                s.index.to_string(),
                s.fidelity.to_string(),
                s.travel_time.to_string(),
                s.status.as_str().to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn run_sample(
    setup: &EdgeSetup,
    protocol: &TransferSpec,
    disorder: &DisorderSpec,
    index: usize,
) -> SampleOutcome {
    let failed = |msg: String| SampleOutcome {
        index,
        fidelity: f64::NAN,
        travel_time: f64::NAN,
        status: SampleStatus::Failed,
        flux_ok: true,
        message: Some(msg),
    };
    let r = match sample(&setup.graph, &setup.params, disorder, index) {
        Ok(r) => r,
        Err(e) => return failed(e.to_string()),
    };
    let noisy = match EdgeSetup::new(setup.graph.clone(), r.params, setup.gauge.clone()) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let flux_ok =
        flux_pattern(&noisy.gauge, &noisy.graph) == flux_pattern(&setup.gauge, &setup.graph);
    match transfer_between_spins(&noisy, protocol) {
        Ok(rep) => SampleOutcome {
            index,
            fidelity: rep.fidelity[0],
            travel_time: rep
                .timings
                .get("travel_allowance")
                .copied()
                .unwrap_or(f64::NAN),
            status: if r.sign_flips > 0 {
                SampleStatus::SignFlip
            } else {
                SampleStatus::Ok
            },
            flux_ok,
            message: (r.sign_flips > 0).then(|| format!("{} couplings changed sign", r.sign_flips)),
        },
        Err(e) => SampleOutcome {
            flux_ok,
            ..failed(e.to_string())
        },
    }
}

/// Transfer fidelity of a clean baseline, which must reach `threshold`.
pub fn baseline_fidelity(
    setup: &EdgeSetup,
    protocol: &TransferSpec,
    threshold: f64,
) -> Result<f64> {
    let f = transfer_between_spins(setup, protocol)?.fidelity[0];
    if f < threshold {
        return Err(Error::Physics(format!(
            "baseline fidelity {f:.4} is below the threshold {threshold}"
        )));
    }
    Ok(f)
}

/// Runs the transfer on every disorder sample in parallel.
pub fn fidelity_sweep(
    setup: &EdgeSetup,
    protocol: &TransferSpec,
    disorder: &DisorderSpec,
    threshold: f64,
) -> Result<SweepResult> {
    disorder.validate()?;
    let baseline = baseline_fidelity(setup, protocol, threshold)?;
    let outcomes: Vec<SampleOutcome> = (0..disorder.samples)
        .into_par_iter()
        .map(|k| run_sample(setup, protocol, disorder, k))
        .collect();
    Ok(SweepResult::from_samples(
        disorder.relative_spread,
        baseline,
        outcomes,
    ))
}

/// One sweep per spread value.
pub fn spread_trend(
    setup: &EdgeSetup,
    protocol: &TransferSpec,
    disorder: &DisorderSpec,
    spreads: &[f64],
    threshold: f64,
) -> Result<Vec<SweepResult>> {
    spreads
        .iter()
        .map(|&s| fidelity_sweep(setup, protocol, &disorder.with_spread(s), threshold))
        .collect()
}

/// Mean fidelity never rises with spread, except for at most one step whose
/// rise stays within the larger of the two standard errors.
pub fn is_monotone_trend(trend: &[SweepResult]) -> bool {
    let mut inversions = 0;
    for w in trend.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if b.mean > a.mean {
            let se = |r: &SweepResult| {
                let n = (r.samples.len() - r.failed()).max(1) as f64;
                r.std_dev / n.sqrt()
            };
            if b.mean - a.mean > se(a).max(se(b)) {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_finite, FiniteShape};

    fn graph() -> LatticeGraph {
        build_finite(FiniteShape::Hexagon { side: 8 }).unwrap()
    }

    #[test]
    fn zero_spread_is_identity() {
        let g = graph();
        let p = CouplingParams::isotropic(1.0, 0.027);
        let spec = DisorderSpec {
            relative_spread: 0.0,
            distribution: Distribution::Uniform,
            seed: 1,
            samples: 3,
        };
        let r = sample(&g, &p, &spec, 2).unwrap();
        assert!(r
            .params
            .link_scale
            .iter()
            .chain(&r.params.triple_scale)
            .all(|&x| x == 1.0));
        assert_eq!(r.sign_flips, 0);
        assert!(sample(&g, &p, &spec, 3).is_err());
    }

    #[test]
    fn realizations_are_reproducible_and_distinct() {
        let g = graph();
        let p = CouplingParams::isotropic(1.0, 0.027);
        let spec = DisorderSpec {
            relative_spread: 0.1,
            distribution: Distribution::Gaussian,
            seed: 9,
            samples: 4,
        };
        let a = sample(&g, &p, &spec, 1).unwrap();
        assert_eq!(a, sample(&g, &p, &spec, 1).unwrap());
        assert_ne!(
            a.params.link_scale,
            sample(&g, &p, &spec, 2).unwrap().params.link_scale
        );
        assert!(a
            .params
            .link_scale
            .iter()
            .all(|&x| (x - 1.0).abs() <= 0.3 + 1e-12));
    }

    #[test]
    fn uniform_spread_statistics() {
        let g = graph();
        assert!(g.links.len() >= 300);
        let p = CouplingParams::isotropic(1.0, 0.027);
        let spec = DisorderSpec {
            relative_spread: 0.1,
            distribution: Distribution::Uniform,
            seed: 5,
            samples: 4,
        };
        let mut xs = Vec::new();
        for k in 0..4 {
            xs.extend(sample(&g, &p, &spec, k).unwrap().params.link_scale);
        }
        assert!(xs.len() >= 1000);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd / (0.1 / 3f64.sqrt()) - 1.0).abs() < 0.1, "{sd}");
    }

    #[test]
    fn large_spread_is_flagged() {
        let g = graph();
        let p = CouplingParams::isotropic(1.0, 0.027);
        let spec = DisorderSpec {
            relative_spread: 1.5,
            distribution: Distribution::Uniform,
            seed: 2,
            samples: 1,
        };
        assert!(sample(&g, &p, &spec, 0).unwrap().sign_flips > 0);
        let bad = DisorderSpec {
            relative_spread: -0.1,
            ..spec
        };
        assert!(sample(&g, &p, &bad, 0).is_err());
    }

    #[test]
    fn trend_rule() {
        let sweep = |mean: f64, sd: f64| SweepResult {
            spread: 0.0,
            baseline: 1.0,
            samples: vec![],
            mean,
            std_dev: sd,
            worst: mean,
        };
        assert!(is_monotone_trend(&[
            sweep(0.98, 0.0),
            sweep(0.95, 0.01),
            sweep(0.9, 0.02)
        ]));
        assert!(is_monotone_trend(&[
            sweep(0.98, 0.0),
            sweep(0.95, 0.05),
            sweep(0.955, 0.05),
            sweep(0.9, 0.02)
        ]));
        assert!(!is_monotone_trend(&[sweep(0.9, 0.001), sweep(0.95, 0.001)]));
    }
}
