//! Correlation matrix generators.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::SimError;

/// Attempts at drawing a positive definite sparse random matrix before giving up.
pub const RANDOM_SPARSE_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OmegaKind {
    Identity,
    /// 2×2 blocks with off-diagonal `h0`, the sign alternating from block to block.
    Block2 { h0: f64 },
    /// 4×4 blocks with 0.4 on the first off-diagonals and 0.05 beyond, signed by position.
    Block4,
    /// Tridiagonal, first off-diagonal repeating (0.4, 0.4, −0.4).
    TridiagBlock,
    /// As [`OmegaKind::TridiagBlock`] plus a second off-diagonal repeating (0.05, −0.05).
    Pentadiag,
    /// Random symmetric pattern of density k/p, trimmed to at most `k` off-diagonal nonzeros per
    /// row, each entry divided by the larger absolute row sum of its row and column, scaled by `a`.
    RandomSparse { k: usize, a: f64 },
}

impl OmegaKind {
    /// Size of the diagonal blocks for block-diagonal kinds.
    pub fn block_size(&self) -> Option<usize> {
        match self {
            Self::Block2 { .. } => Some(2),
            Self::Block4 => Some(4),
            _ => None,
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, Self::RandomSparse { .. })
    }
}

const TRIDIAG_PATTERN: [f64; 3] = [0.4, 0.4, -0.4];
const SECOND_DIAG_PATTERN: [f64; 2] = [0.05, -0.05];

/// Entry (i, j) of the 4×4 block, 0-based.
fn block4_entry(i: usize, j: usize) -> f64 {
    // The defining formula uses 1-based positions: i + j there is i + j + 2 here.
    let s = (i + j + 2) as f64;
    match i.abs_diff(j) {
        0 => 1.0,
        1 => 0.4 * (6.0 - s).signum(),
        _ => 0.05 * (5.5 - s).signum(),
    }
}

pub fn gen_omega<R: Rng + ?Sized>(
    kind: OmegaKind,
    p: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>, SimError> {
    if let Some(b) = kind.block_size() {
        if p % b != 0 {
            return Err(SimError::InvalidParameter(format!(
                "p = {p} is not a multiple of the block size {b}"
            )));
        }
    }
    let mut omega = DMatrix::identity(p, p);
    match kind {
        OmegaKind::Identity => {}
        OmegaKind::Block2 { h0 } => {
            if !(h0.abs() < 1.0) {
                return Err(SimError::InvalidParameter(format!("|h0| = {h0} must be below 1")));
            }
            for b in 0..p / 2 {
                let h = if b % 2 == 0 { h0 } else { -h0 };
                omega[(2 * b, 2 * b + 1)] = h;
                omega[(2 * b + 1, 2 * b)] = h;
            }
        }
        OmegaKind::Block4 => {
            for b in 0..p / 4 {
                for i in 0..4 {
                    for j in 0..4 {
                        omega[(4 * b + i, 4 * b + j)] = block4_entry(i, j);
                    }
                }
            }
        }
        OmegaKind::TridiagBlock | OmegaKind::Pentadiag => {
            for i in 0..p.saturating_sub(1) {
                let v = TRIDIAG_PATTERN[i % 3];
                omega[(i, i + 1)] = v;
                omega[(i + 1, i)] = v;
            }
            if kind == OmegaKind::Pentadiag {
                for i in 0..p.saturating_sub(2) {
                    let v = SECOND_DIAG_PATTERN[i % 2];
                    omega[(i, i + 2)] = v;
                    omega[(i + 2, i)] = v;
                }
            }
        }
        OmegaKind::RandomSparse { k, a } => {
            if !(a > 0.0 && a < 1.0) || k == 0 {
                return Err(SimError::InvalidParameter(format!(
                    "random sparse needs k >= 1 and a in (0, 1), got k = {k}, a = {a}"
                )));
            }
            for _ in 0..RANDOM_SPARSE_RETRIES {
                let candidate = random_sparse(p, k, a, rng);
                if candidate.clone().cholesky().is_some() {
                    return Ok(candidate);
                }
            }
            return Err(SimError::NotPositiveDefinite("random sparse correlation"));
        }
    }
    Ok(omega)
}

fn random_sparse<R: Rng + ?Sized>(p: usize, k: usize, a: f64, rng: &mut R) -> DMatrix<f64> {
    let density = k as f64 / p as f64;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
    for i in 0..p {
        for j in i + 1..p {
            if rng.random::<f64>() < density {
                let v: f64 = rng.sample(StandardNormal);
                rows[i].push((j, v));
                rows[j].push((i, v));
            }
        }
    }
    // Trim rows to k entries, removing the mirror entry with each dropped one.
    for i in 0..p {
        if rows[i].len() > k {
            rows[i].shuffle(rng);
            let dropped: Vec<usize> = rows[i].drain(k..).map(|(j, _)| j).collect();
            for j in dropped {
                rows[j].retain(|&(c, _)| c != i);
            }
        }
    }
    let sums: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|(_, v)| v.abs()).sum())
        .collect();
    let mut omega = DMatrix::identity(p, p);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            omega[(i, j)] = a * v / sums[i].max(sums[j]);
        }
    }
    omega
}
