//! Signal vectors β = b ∘ μ.

use gscreen::model::{MuLaw, SignalSpec};
use nalgebra::DVector;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::SimError;

/// Probability of the point mass at τ in the mixture magnitude law.
pub const MIXTURE_POINT_MASS: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalLaw {
    /// iid Bernoulli(ε) support, every magnitude τ.
    IidEqual { random_signs: bool },
    /// iid Bernoulli(ε) support, mixture magnitudes and random signs.
    IidMixture,
    /// Blocks of two: a 2(1−η)ε fraction of blocks holds one signal and a 2ηε fraction holds two.
    BlockPairs,
    /// Blocks of four: a 4(1−η)ε fraction holds one signal and a 4ηε fraction holds two to four,
    /// uniformly over all such position patterns.
    BlockQuads,
}

impl SignalLaw {
    pub fn block_size(&self) -> Option<usize> {
        match self {
            Self::BlockPairs => Some(2),
            Self::BlockQuads => Some(4),
            _ => None,
        }
    }

    fn mu_law(&self, tau: f64) -> MuLaw {
        match self {
            Self::IidEqual { .. } => MuLaw::Equal { tau },
            _ => MuLaw::ChiSquareMixture {
                tau,
                point_mass: MIXTURE_POINT_MASS,
            },
        }
    }
}

fn mixture_magnitude<R: Rng + ?Sized>(tau: f64, rng: &mut R) -> f64 {
    if rng.random::<f64>() < MIXTURE_POINT_MASS {
        tau
    } else {
        let z: f64 = rng.sample(StandardNormal);
        tau * (1.0 + z * z / 6.0)
    }
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn check_fraction(name: &str, value: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(SimError::InvalidParameter(format!("{name} = {value} is outside [0, 1]")))
    }
}

/// Draws β under `law`; `eta` is the share of multi-signal blocks for the block laws.
pub fn gen_signal<R: Rng + ?Sized>(
    law: SignalLaw,
    eps_p: f64,
    tau_p: f64,
    p: usize,
    eta: Option<f64>,
    rng: &mut R,
) -> Result<SignalSpec, SimError> {
    check_fraction("eps_p", eps_p)?;
    let mut beta = DVector::zeros(p);
    match (law, law.block_size()) {
        (SignalLaw::IidEqual { random_signs }, _) => {
            for j in 0..p {
                if rng.random::<f64>() < eps_p {
                    let sign = if random_signs { random_sign(rng) } else { 1.0 };
                    beta[j] = sign * tau_p;
                }
            }
        }
        (SignalLaw::IidMixture, _) => {
            for j in 0..p {
                if rng.random::<f64>() < eps_p {
                    beta[j] = random_sign(rng) * mixture_magnitude(tau_p, rng);
                }
            }
        }
        (_, Some(size)) => {
            let eta = eta.unwrap_or(0.0);
            check_fraction("eta", eta)?;
            if p % size != 0 {
                return Err(SimError::InvalidParameter(format!(
                    "p = {p} is not a multiple of the block size {size}"
                )));
            }
            let blocks = p / size;
            let scale = size as f64 * eps_p * blocks as f64;
            let singles = ((1.0 - eta) * scale).round() as usize;
            let multis = (eta * scale).round() as usize;
            check_fraction("share of signal blocks", size as f64 * eps_p)?;
            if singles + multis > blocks {
                return Err(SimError::InvalidParameter("more signal blocks than blocks".into()));
            }
            let mut order: Vec<usize> = (0..blocks).collect();
            order.shuffle(rng);
            let patterns: Vec<Vec<usize>> = (0u32..(1 << size))
                .filter(|m| m.count_ones() >= 2)
                .map(|m| (0..size).filter(|&i| m & (1 << i) != 0).collect())
                .collect();
            for (rank, &b) in order.iter().take(singles + multis).enumerate() {
                let positions = if rank < singles {
                    vec![rng.random_range(0..size)]
                } else {
                    patterns.choose(rng).expect("patterns exist for size >= 2").clone()
                };
                for i in positions {
                    beta[b * size + i] = random_sign(rng) * mixture_magnitude(tau_p, rng);
                }
            }
        }
        (_, None) => unreachable!("non-block laws are matched above"),
    }
    Ok(SignalSpec::new(beta, law.mu_law(tau_p))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_law_magnitudes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = gen_signal(SignalLaw::IidEqual { random_signs: false }, 0.05, 6.0, 2000, None, &mut rng).unwrap();
        assert!(s.signal_count() > 50);
        assert!(s.support.iter().all(|&j| s.beta[j] == 6.0));
        let signed = gen_signal(SignalLaw::IidEqual { random_signs: true }, 0.05, 6.0, 2000, None, &mut rng).unwrap();
        assert!(signed.support.iter().all(|&j| signed.beta[j].abs() == 6.0));
        assert!(signed.support.iter().any(|&j| signed.beta[j] < 0.0));
    }

    #[test]
    fn mixture_law_is_at_least_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = gen_signal(SignalLaw::IidMixture, 0.1, 7.0, 5000, None, &mut rng).unwrap();
        assert!(s.within_strength(7.0, f64::INFINITY));
        let at_tau = s.support.iter().filter(|&&j| s.beta[j].abs() == 7.0).count() as f64;
        let share = at_tau / s.signal_count() as f64;
        assert!((share - MIXTURE_POINT_MASS).abs() < 0.05, "{share}");
        let negative = s.support.iter().filter(|&&j| s.beta[j] < 0.0).count() as f64;
        assert!((negative / s.signal_count() as f64 - 0.5).abs() < 0.06);
    }

    #[test]
    fn block_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = 4000;
        let eps = 0.02;
        let none = gen_signal(SignalLaw::BlockPairs, eps, 6.0, p, Some(0.0), &mut rng).unwrap();
        let per_block = |s: &SignalSpec, size: usize| -> Vec<usize> {
            (0..p / size).map(|b| (0..size).filter(|&i| s.beta[b * size + i] != 0.0).count()).collect()
        };
        let counts = per_block(&none, 2);
        assert!(counts.iter().all(|&c| c <= 1));
        assert_eq!(counts.iter().sum::<usize>(), (2.0 * eps * 2000.0f64).round() as usize);
        let some = gen_signal(SignalLaw::BlockPairs, eps, 6.0, p, Some(0.25), &mut rng).unwrap();
        let counts = per_block(&some, 2);
        assert_eq!(counts.iter().filter(|&&c| c == 2).count(), 20);
        assert_eq!(counts.iter().filter(|&&c| c == 1).count(), 60);
        let quads = gen_signal(SignalLaw::BlockQuads, eps, 6.0, p, Some(0.5), &mut rng).unwrap();
        let counts = per_block(&quads, 4);
        assert_eq!(counts.iter().filter(|&&c| c == 1).count(), 40);
        assert_eq!(counts.iter().filter(|&&c| c >= 2).count(), 40);
        assert!(gen_signal(SignalLaw::BlockPairs, eps, 6.0, p, Some(1.5), &mut rng).is_err());
    }
}
