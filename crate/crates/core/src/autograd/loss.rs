//! Pixel losses. Both are means over every element, accumulated in f64.

use std::fmt;
use std::str::FromStr;

use crate::error::Result;
use crate::tensor::{check_same_shape, Tensor};

/// Which pixel loss a training stage optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    L1,
    Mse,
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(LossKind::L1),
            "mse" | "l2" => Ok(LossKind::Mse),
            other => Err(format!("unknown loss `{other}` (expected L1 or MSE)")),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::L1 => "L1",
            LossKind::Mse => "MSE",
        })
    }
}

pub fn l1_loss(pred: &Tensor, target: &Tensor) -> Result<f32> {
    check_same_shape("l1_loss", pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t).abs() as f64)
        .sum();
    Ok((sum / pred.len() as f64) as f32)
}

pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f32> {
    check_same_shape("mse_loss", pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = (p - t) as f64;
            d * d
        })
        .sum();
    Ok((sum / pred.len() as f64) as f32)
}

pub fn loss(kind: LossKind, pred: &Tensor, target: &Tensor) -> Result<f32> {
    match kind {
        LossKind::L1 => l1_loss(pred, target),
        LossKind::Mse => mse_loss(pred, target),
    }
}

/// `seed · sign(pred − target) / count`; zero where they are equal.
pub(crate) fn l1_grad(pred: &Tensor, target: &Tensor, seed: f32) -> Tensor {
    let scale = seed / pred.len() as f32;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            if d > 0.0 {
                scale
            } else if d < 0.0 {
                -scale
            } else {
                0.0
            }
        })
        .collect();
    Tensor::new(pred.shape(), data).expect("shape checked in forward")
}

/// `seed · 2(pred − target) / count`.
pub(crate) fn mse_grad(pred: &Tensor, target: &Tensor, seed: f32) -> Tensor {
    let scale = 2.0 * seed / pred.len() as f32;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| scale * (p - t))
        .collect();
    Tensor::new(pred.shape(), data).expect("shape checked in forward")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::GradTape;

    fn pair() -> (Tensor, Tensor) {
        (
            Tensor::new([1, 1, 1, 2], vec![0.0, 2.0]).unwrap(),
            Tensor::new([1, 1, 1, 2], vec![1.0, 0.0]).unwrap(),
        )
    }

    #[test]
    fn l1_values() {
        let (p, t) = pair();
        assert_eq!(l1_loss(&p, &t).unwrap(), 1.5);
        assert_eq!(l1_loss(&p, &p).unwrap(), 0.0);
        assert!(l1_loss(&p, &Tensor::zeros([1, 1, 2, 1])).is_err());
    }

    #[test]
    fn mse_values() {
        let (p, t) = pair();
        assert_eq!(mse_loss(&p, &t).unwrap(), 2.5);
        assert_eq!(mse_loss(&t, &t).unwrap(), 0.0);
        assert!(mse_loss(&p, &Tensor::zeros([2, 1, 1, 1])).is_err());
    }

    /// Central differences on the loss written out in f64.
    fn fd_grad(pred: &[f64], target: &[f64], f: impl Fn(&[f64], &[f64]) -> f64) -> Vec<f64> {
        let h = 1e-3;
        (0..pred.len())
            .map(|i| {
                let mut p = pred.to_vec();
                p[i] += h;
                let up = f(&p, target);
                p[i] -= 2.0 * h;
                let down = f(&p, target);
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn tape_grad(kind: LossKind, p: &Tensor, t: &Tensor) -> Vec<f32> {
        let mut tape = GradTape::new();
        let pv = tape.param(p.clone());
        let tv = tape.constant(t.clone());
        let l = match kind {
            LossKind::L1 => tape.l1_loss(pv, tv).unwrap(),
            LossKind::Mse => tape.mse_loss(pv, tv).unwrap(),
        };
        tape.backward(l, 1.0).unwrap().get(pv).unwrap().data().to_vec()
    }

    #[test]
    fn l1_gradient_matches_finite_differences() {
        let p = Tensor::new([1, 1, 2, 3], vec![0.5, -0.2, 0.9, 0.1, 0.3, -0.7]).unwrap();
        let t = Tensor::new([1, 1, 2, 3], vec![0.1, 0.2, 0.4, 0.6, -0.3, 0.0]).unwrap();
        let pd: Vec<f64> = p.data().iter().map(|&v| v as f64).collect();
        let td: Vec<f64> = t.data().iter().map(|&v| v as f64).collect();
        let oracle = fd_grad(&pd, &td, |p, t| {
            p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64
        });
        for (a, b) in tape_grad(LossKind::L1, &p, &t).iter().zip(oracle) {
            assert!((*a as f64 - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let p = Tensor::new([1, 1, 2, 2], vec![0.5, -0.25, 0.75, 0.125]).unwrap();
        let t = Tensor::new([1, 1, 2, 2], vec![0.0, 0.5, -0.5, 1.0]).unwrap();
        let pd: Vec<f64> = p.data().iter().map(|&v| v as f64).collect();
        let td: Vec<f64> = t.data().iter().map(|&v| v as f64).collect();
        let oracle = fd_grad(&pd, &td, |p, t| {
            p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64
        });
        for (a, b) in tape_grad(LossKind::Mse, &p, &t).iter().zip(oracle) {
            assert!((*a as f64 - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn loss_kind_parses() {
        assert_eq!("L1".parse::<LossKind>().unwrap(), LossKind::L1);
        assert_eq!("mse".parse::<LossKind>().unwrap(), LossKind::Mse);
        assert_eq!("L2".parse::<LossKind>().unwrap(), LossKind::Mse);
        assert!("huber".parse::<LossKind>().is_err());
    }
}
