use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed-set class distribution of one instance, fused by running average.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticBelief {
    probs: Vec<f64>,
    frame_count: u32,
}

impl SemanticBelief {
    /// Uniform distribution with no evidence.
    pub fn uniform(n_classes: usize) -> Self {
        assert!(n_classes > 0, "belief needs at least one class");
        Self {
            probs: vec![1.0 / n_classes as f64; n_classes],
            frame_count: 0,
        }
    }

    /// Belief from explicit probabilities (renormalized) and update count.
    pub fn from_probs(probs: Vec<f64>, frame_count: u32) -> Result<Self> {
        let probs = normalized(probs)?;
        Ok(Self { probs, frame_count })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn frame_count(&self) -> u32 {
        self.frame_count
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    /// Folds one normalized measurement likelihood into the belief:
    /// `p_t = (l + (t - 1) * p_{t-1}) / t` with `t` the new update count.
    /// The prediction step is the identity under a uniform control input.
    pub fn update(&mut self, likelihood: &[f64]) {
        assert_eq!(likelihood.len(), self.probs.len(), "class count mismatch");
        let t = self.frame_count as f64;
        for (p, l) in self.probs.iter_mut().zip(likelihood) {
            *p = (l + t * *p) / (t + 1.0);
        }
        renormalize(&mut self.probs);
        self.frame_count += 1;
    }

    /// Class with the largest probability; ties go to the lowest index.
    pub fn predict_class(&self) -> Result<usize> {
        if self.frame_count == 0 {
            return Err(Error::NoEvidence);
        }
        Ok(argmax(&self.probs))
    }

    /// Largest class probability.
    pub fn confidence(&self) -> f64 {
        self.probs.iter().copied().fold(0.0, f64::max)
    }

    /// Update-count weighted average of two beliefs; counts add.
    pub fn fuse(&self, other: &SemanticBelief) -> SemanticBelief {
        assert_eq!(self.probs.len(), other.probs.len(), "class count mismatch");
        let (ta, tb) = (self.frame_count as f64, other.frame_count as f64);
        let total = ta + tb;
        let mut probs: Vec<f64> = if total > 0.0 {
            self.probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (ta * a + tb * b) / total)
                .collect()
        } else {
            self.probs.clone()
        };
        renormalize(&mut probs);
        SemanticBelief {
            probs,
            frame_count: self.frame_count + other.frame_count,
        }
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn renormalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

/// Scales a nonnegative vector to sum 1; an all-zero vector becomes uniform.
pub fn normalized(mut v: Vec<f64>) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidParameter("empty probability vector".into()));
    }
    if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidParameter(
            "probabilities must be finite and nonnegative".into(),
        ));
    }
    renormalize(&mut v);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn first_update_takes_measurement() {
        let mut b = SemanticBelief::uniform(2);
        b.update(&[0.818, 0.182]);
        assert!(close(b.probs(), &[0.818, 0.182], 1e-12));
        assert_eq!(b.frame_count(), 1);
    }

    #[test]
    fn second_update_is_equal_weight_average() {
        let mut b = SemanticBelief::from_probs(vec![1.0, 0.0], 1).unwrap();
        b.update(&[0.0, 1.0]);
        assert!(close(b.probs(), &[0.5, 0.5], 1e-12));
        assert_eq!(b.frame_count(), 2);
    }

    #[test]
    fn repeated_measurement_is_fixed_point() {
        let l = [0.2, 0.5, 0.3];
        let mut b = SemanticBelief::uniform(3);
        for _ in 0..10 {
            b.update(&l);
        }
        assert!(close(b.probs(), &l, 1e-9));
    }

    #[test]
    fn predict_argmax_and_ties() {
        let b = SemanticBelief::from_probs(vec![0.1, 0.7, 0.2], 1).unwrap();
        assert_eq!(b.predict_class().unwrap(), 1);
        let t = SemanticBelief::from_probs(vec![0.5, 0.5], 3).unwrap();
        assert_eq!(t.predict_class().unwrap(), 0);
    }

    #[test]
    fn predict_without_evidence_fails() {
        assert!(matches!(
            SemanticBelief::uniform(4).predict_class(),
            Err(Error::NoEvidence)
        ));
    }

    #[test]
    fn fuse_weights_by_count() {
        let a = SemanticBelief::from_probs(vec![1.0, 0.0], 3).unwrap();
        let b = SemanticBelief::from_probs(vec![0.0, 1.0], 1).unwrap();
        let f = a.fuse(&b);
        assert!(close(f.probs(), &[0.75, 0.25], 1e-12));
        assert_eq!(f.frame_count(), 4);
    }

    #[test]
    fn rejects_negative() {
        assert!(SemanticBelief::from_probs(vec![-0.1, 1.1], 1).is_err());
    }
}
