//! Sign-Hamming error of an estimate.

use gscreen::model::sign_mismatches;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HammingScore {
    pub distance: usize,
    /// Distance over the number of true signals; equals the distance when there are none.
    pub ratio: f64,
    pub signals: usize,
}

impl HammingScore {
    /// No true signals, so `ratio` is the raw distance.
    pub fn ratio_undefined(&self) -> bool {
        self.signals == 0
    }
}

pub fn hamming(beta_hat: &DVector<f64>, beta: &DVector<f64>) -> HammingScore {
    let distance = sign_mismatches(beta_hat, beta);
    let signals = beta.iter().filter(|&&b| b != 0.0).count();
    let ratio = if signals == 0 {
        distance as f64
    } else {
        distance as f64 / signals as f64
    };
    HammingScore {
        distance,
        ratio,
        signals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let beta = DVector::from_vec(vec![1.0, 0.0, -2.0, 3.0, 0.0, 4.0, 5.0]);
        let same = hamming(&beta, &beta);
        assert_eq!((same.distance, same.ratio), (0, 0.0));
        let zero = hamming(&DVector::zeros(7), &beta);
        assert_eq!((zero.distance, zero.ratio), (5, 1.0));
        let mut flipped = beta.clone();
        flipped[2] = 2.0;
        assert_eq!(hamming(&flipped, &beta).distance, 1);
        let null = hamming(&beta, &DVector::zeros(7));
        assert!(null.ratio_undefined());
        assert_eq!(null.ratio, 5.0);
    }
}
