//! Benchmark model generators. Deterministic in their seed; the PRNG and
//! its stream order are documented in [`crate::rng`].

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::rng::SplitMix64;
use crate::systems::LdqoSystem;

/// Output functional for the heat chain.
#[derive(Debug, Clone)]
pub enum HeatOutputWeight {
    /// `y = (mean temperature)^2`: `M = c^T c` with `c = (1/n) 1^T`.
    AverageTemperature,
    /// Weighted sum of squared node temperatures, weights `1/k` at the
    /// given k nodes.
    NodeSquares(Vec<usize>),
}

/// Semi-discretized 1-D heat equation with Dirichlet boundaries:
/// `A = (diffusivity / h^2) tridiag(1, -2, 1)`, `h = 1/(n+1)`, inputs
/// injected at the listed nodes.
pub fn gen_heat1d(
    n: usize,
    diffusivity: f64,
    input_nodes: &[usize],
    weight: &HeatOutputWeight,
) -> Result<LdqoSystem> {
    if n < 2 {
        return Err(Error::invalid("heat1d needs n >= 2"));
    }
    if !diffusivity.is_finite() || diffusivity <= 0.0 {
        return Err(Error::invalid("diffusivity must be positive"));
    }
    if input_nodes.is_empty() {
        return Err(Error::invalid("heat1d needs at least one input node"));
    }
    let h = 1.0 / (n as f64 + 1.0);
    let scale = diffusivity / (h * h);
    let a = DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            -2.0 * scale
        } else if i.abs_diff(j) == 1 {
            scale
        } else {
            0.0
        }
    });
    let mut b = DenseMatrix::zeros(n, input_nodes.len());
    for (col, &node) in input_nodes.iter().enumerate() {
        if node >= n {
            return Err(Error::invalid(format!(
                "input node {node} out of range for n = {n}"
            )));
        }
        b[(node, col)] = scale;
    }
    let m = match weight {
        HeatOutputWeight::AverageTemperature => {
            let c = DenseMatrix::from_fn(1, n, |_, _| 1.0 / n as f64);
            c.tr_mul(&c)
        }
        HeatOutputWeight::NodeSquares(nodes) => {
            if nodes.is_empty() {
                return Err(Error::invalid("NodeSquares needs at least one node"));
            }
            let w = 1.0 / nodes.len() as f64;
            let mut m = DenseMatrix::zeros(n, n);
            for &node in nodes {
                if node >= n {
                    return Err(Error::invalid(format!(
                        "weight node {node} out of range for n = {n}"
                    )));
                }
                m[(node, node)] = w;
            }
            m
        }
    };
    LdqoSystem::new(a, b, m)
}

/// Mass-spring-damper chain in first-order form.
#[derive(Debug, Clone)]
pub struct MsdConfig {
    /// Number of masses; state dimension is twice this.
    pub masses: usize,
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Mass the external force acts on.
    pub forcing_node: usize,
    /// How many state components enter the squared-output sum.
    pub weighted_states: usize,
    pub seed: u64,
}

impl Default for MsdConfig {
    fn default() -> Self {
        Self {
            masses: 10,
            mass: 1.0,
            stiffness: 1.0,
            damping: 0.4,
            forcing_node: 0,
            weighted_states: 10,
            seed: 1,
        }
    }
}

/// First-order realization of `mass q'' + damping q' + K q = f u` on a
/// chain (springs to both walls), with `M` a diagonal weighted sum of
/// squares over seed-selected state components, weights summing to one.
pub fn gen_msd_chain(cfg: &MsdConfig) -> Result<LdqoSystem> {
    let k = cfg.masses;
    if k == 0 {
        return Err(Error::invalid("msd chain needs at least one mass"));
    }
    if [cfg.mass, cfg.stiffness, cfg.damping]
        .iter()
        .any(|v| !v.is_finite() || *v <= 0.0)
    {
        return Err(Error::invalid("mass, stiffness and damping must be positive"));
    }
    if cfg.forcing_node >= k {
        return Err(Error::invalid(format!(
            "forcing node {} out of range for {} masses",
            cfg.forcing_node, k
        )));
    }
    let n = 2 * k;
    if cfg.weighted_states == 0 || cfg.weighted_states > n {
        return Err(Error::invalid(format!(
            "weighted_states must lie in 1..={n}"
        )));
    }
    let km = cfg.stiffness / cfg.mass;
    let dm = cfg.damping / cfg.mass;
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..k {
        a[(i, k + i)] = 1.0;
        a[(k + i, i)] = -2.0 * km;
        if i > 0 {
            a[(k + i, i - 1)] = km;
        }
        if i + 1 < k {
            a[(k + i, i + 1)] = km;
        }
        a[(k + i, k + i)] = -dm;
    }
    let mut b = DenseMatrix::zeros(n, 1);
    b[(k + cfg.forcing_node, 0)] = 1.0 / cfg.mass;

    // seed-selected distinct state indices, equal weights summing to 1
    let mut rng = SplitMix64::new(cfg.seed);
    let mut chosen = Vec::with_capacity(cfg.weighted_states);
    let mut available: Vec<usize> = (0..n).collect();
    for _ in 0..cfg.weighted_states {
        let pick = rng.next_index(available.len());
        chosen.push(available.swap_remove(pick));
    }
    let w = 1.0 / cfg.weighted_states as f64;
    let mut m = DenseMatrix::zeros(n, n);
    for idx in chosen {
        m[(idx, idx)] = w;
    }
    LdqoSystem::new(a, b, m)
}

/// Random stable LD_QO system: `A = S - alpha I` with standard-normal `S`
/// scaled by `1/sqrt(n)` and `alpha` shifting the spectral abscissa to
/// -0.5; `B` standard normal; `M = G^T G / n` (PSD) or the symmetrized
/// `G` when `indefinite` is set.
///
/// Draw order for a given seed: `A` entries row-major, then `B` row-major,
/// then `G` row-major.
pub fn gen_random_stable(n: usize, m: usize, seed: u64, indefinite: bool) -> Result<LdqoSystem> {
    if n == 0 || m == 0 {
        return Err(Error::invalid("n and m must be at least 1"));
    }
    let mut rng = SplitMix64::new(seed);
    let g = DenseMatrix::from_fn(n, n, |_, _| rng.next_normal() / (n as f64).sqrt());
    let alpha = linalg::spectral_abscissa(&g)?;
    let a = DenseMatrix::from_fn(n, n, |i, j| {
        g[(i, j)] - if i == j { alpha + 0.5 } else { 0.0 }
    });
    let b = DenseMatrix::from_fn(n, m, |_, _| rng.next_normal());
    let gm = DenseMatrix::from_fn(n, n, |_, _| rng.next_normal());
    let weight = if indefinite {
        gm.symmetrized()
    } else {
        gm.tr_mul(&gm).scale(1.0 / n as f64)
    };
    LdqoSystem::new(a, b, weight)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_chain_has_known_tridiagonal_spectrum() {
        let sys = gen_heat1d(3, 1.0, &[0], &HeatOutputWeight::AverageTemperature).unwrap();
        let schur = linalg::real_schur(sys.a()).unwrap();
        let mut eigs: Vec<f64> = schur.eigenvalues().iter().map(|e| e.0).collect();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h2 = 16.0; // 1/h^2 for n = 3
        let mut expected: Vec<f64> = (1..=3)
            .map(|k| h2 * (-2.0 + 2.0 * (k as f64 * std::f64::consts::PI / 4.0).cos()))
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, x) in eigs.iter().zip(&expected) {
            assert!((e - x).abs() < 1e-10 * h2, "{e} vs {x}");
        }
        assert!(eigs.iter().all(|&e| e < 0.0));
    }

    #[test]
    fn heat_chain_single_input_is_controllable() {
        // Strict positivity is resolvable in f64 only for short chains; the
        // Gramian spectrum of the heat chain decays like 1e-3 per node.
        let sys = gen_heat1d(8, 0.5, &[0], &HeatOutputWeight::AverageTemperature).unwrap();
        sys.require_stable().unwrap();
        let (p, _) = crate::gramians::controllability_gramian(&sys, 1e-12).unwrap();
        let (vals, _) = linalg::sym_eigen(&p).unwrap();
        assert!(*vals.last().unwrap() > 0.0, "P should be positive definite");
        // longer chains stay PSD to round-off
        let sys = gen_heat1d(20, 0.5, &[0], &HeatOutputWeight::AverageTemperature).unwrap();
        let (p, _) = crate::gramians::controllability_gramian(&sys, 1e-12).unwrap();
        let (vals, _) = linalg::sym_eigen(&p).unwrap();
        assert!(*vals.last().unwrap() > -1e-12 * vals[0]);
    }

    #[test]
    fn single_mass_chain_is_a_damped_oscillator() {
        let cfg = MsdConfig {
            masses: 1,
            weighted_states: 2,
            ..Default::default()
        };
        let sys = gen_msd_chain(&cfg).unwrap();
        assert_eq!(sys.order(), 2);
        assert_eq!(sys.a()[(0, 1)], 1.0);
        assert!(sys.a()[(1, 0)] < 0.0);
        sys.require_stable().unwrap();
    }

    #[test]
    fn msd_weights_sum_to_one() {
        let cfg = MsdConfig {
            masses: 25,
            weighted_states: 17,
            seed: 1,
            ..Default::default()
        };
        let sys = gen_msd_chain(&cfg).unwrap();
        assert!((sys.m().trace() - 1.0).abs() < 1e-12);
        // diagonal with exactly 17 nonzero entries
        let nonzero = (0..50).filter(|&i| sys.m()[(i, i)] != 0.0).count();
        assert_eq!(nonzero, 17);
    }

    #[test]
    fn random_stable_is_deterministic_and_hurwitz() {
        let a = gen_random_stable(10, 2, 4, false).unwrap();
        let b = gen_random_stable(10, 2, 4, false).unwrap();
        assert_eq!(a.a().data(), b.a().data());
        assert_eq!(a.b().data(), b.b().data());
        assert_eq!(a.m().data(), b.m().data());
        for seed in 0..100 {
            let sys = gen_random_stable(6, 1, seed, false).unwrap();
            sys.require_stable().unwrap();
        }
    }

    #[test]
    fn indefinite_flag_produces_an_indefinite_weight() {
        let sys = gen_random_stable(8, 1, 5, true).unwrap();
        let (vals, _) = linalg::sym_eigen(sys.m()).unwrap();
        assert!(vals[0] > 0.0 && *vals.last().unwrap() < 0.0);
    }
}
