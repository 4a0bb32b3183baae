//! Double-double word products and top eigenpairs.
//!
//! Long products in SO0(2, n+1) are badly non-normal and their top eigenvalue
//! is ill-conditioned; evaluating them in f64 costs up to seven digits on
//! words of length 6 in the fourth symmetric power.

use nalgebra::{DMatrix, DVector};
use twofloat::TwoFloat;

use crate::bilinear::sign;

/// Square matrix with double-double entries, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HpMat {
    pub d: usize,
    pub a: Vec<TwoFloat>,
}

impl HpMat {
    pub fn from_f64(m: &DMatrix<f64>) -> Self {
        let d = m.nrows();
        let a = (0..d * d).map(|k| TwoFloat::from(m[(k / d, k % d)])).collect();
        HpMat { d, a }
    }

    pub fn identity(d: usize) -> Self {
        let a = (0..d * d).map(|k| TwoFloat::from(if k / d == k % d { 1.0 } else { 0.0 })).collect();
        HpMat { d, a }
    }

    pub fn mul(&self, o: &HpMat) -> HpMat {
        let d = self.d;
        let mut a = vec![TwoFloat::from(0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let x = self.a[i * d + k];
                if x.hi() == 0.0 {
                    continue;
                }
                for j in 0..d {
                    a[i * d + j] += x * o.a[k * d + j];
                }
            }
        }
        HpMat { d, a }
    }

    pub fn mul_vec(&self, v: &[TwoFloat]) -> Vec<TwoFloat> {
        let d = self.d;
        (0..d)
            .map(|i| {
                let mut s = TwoFloat::from(0.0);
                for j in 0..d {
                    s += self.a[i * d + j] * v[j];
                }
                s
            })
            .collect()
    }

    /// `Q M^T Q`, exact.
    pub fn q_adjoint(&self) -> HpMat {
        let d = self.d;
        let a = (0..d * d)
            .map(|k| {
                let (i, j) = (k / d, k % d);
                let x = self.a[j * d + i];
                if sign(i) * sign(j) > 0.0 {
                    x
                } else {
                    -x
                }
            })
            .collect();
        HpMat { d, a }
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        let d = self.d;
        DMatrix::from_fn(d, d, |i, j| self.a[i * d + j].hi())
    }
}

pub(crate) fn qdot_hp(u: &[TwoFloat], v: &[TwoFloat]) -> TwoFloat {
    let mut s = TwoFloat::from(0.0);
    for (i, (a, b)) in u.iter().zip(v).enumerate() {
        if sign(i) > 0.0 {
            s += *a * *b;
        } else {
            s -= *a * *b;
        }
    }
    s
}

fn normalize_max(v: &mut [TwoFloat]) -> bool {
    let mut big = TwoFloat::from(0.0);
    for x in v.iter() {
        if x.abs() > big.abs() {
            big = *x;
        }
    }
    if big.hi() == 0.0 || !big.hi().is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= big;
    }
    true
}

/// Power iteration from `v0` until the iterate stops moving.
pub(crate) fn power(m: &HpMat, v0: &DVector<f64>, max_iter: usize) -> Option<Vec<TwoFloat>> {
    let mut v: Vec<TwoFloat> = v0.iter().map(|x| TwoFloat::from(*x)).collect();
    if !normalize_max(&mut v) {
        return None;
    }
    for _ in 0..max_iter {
        let mut w = m.mul_vec(&v);
        if !normalize_max(&mut w) {
            return None;
        }
        let step = w.iter().zip(&v).map(|(a, b)| (*a - *b).abs().hi()).fold(0.0, f64::max);
        v = w;
        if step < 1e-26 {
            break;
        }
    }
    Some(v)
}

/// Top eigenvalue from the two-sided Rayleigh quotient `q(v-, M v+) / q(v-, v+)`.
pub(crate) fn rayleigh(m: &HpMat, vp: &[TwoFloat], vm: &[TwoFloat]) -> Option<TwoFloat> {
    let den = qdot_hp(vm, vp);
    if den.hi() == 0.0 {
        return None;
    }
    let num = qdot_hp(vm, &m.mul_vec(vp));
    let lam = num / den;
    lam.hi().is_finite().then_some(lam)
}

/// `ln |x|` for a double-double, accurate to double-double relative precision of x.
pub(crate) fn ln_abs(x: TwoFloat) -> f64 {
    let x = x.abs();
    x.hi().ln() + x.lo() / x.hi()
}

pub(crate) fn to_dvector(v: &[TwoFloat]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|x| x.hi() + x.lo()))
}
