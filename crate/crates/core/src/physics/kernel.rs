//! Wendland C2 smoothing kernel with support radius `2h`.

use std::f64::consts::PI;

use crate::real::Real;

/// Normalization constant `α_d` for `d ∈ {2, 3}`.
pub fn wendland_alpha(h: f64, dim: usize) -> f64 {
    match dim {
        2 => 7.0 / (4.0 * PI * h * h),
        3 => 21.0 / (16.0 * PI * h * h * h),
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Precomputed Wendland C2 kernel for one smoothing length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WendlandC2<R> {
    h: R,
    inv_h: R,
    alpha: R,
}

impl<R: Real> WendlandC2<R> {
    pub fn new(h: R, dim: usize) -> Self {
        Self {
            h,
            inv_h: h.recip(),
            alpha: R::lit(wendland_alpha(h.as_f64(), dim)),
        }
    }

    pub fn h(&self) -> R {
        self.h
    }

    pub fn cutoff(&self) -> R {
        self.h + self.h
    }

    #[inline(always)]
    pub fn w(&self, r: R) -> R {
        let q = r * self.inv_h;
        let two = R::lit(2.0);
        if q >= two {
            return R::zero();
        }
        let t = R::one() - q * R::lit(0.5);
        let t2 = t * t;
        self.alpha * t2 * t2 * (two * q + R::one())
    }

    /// Radial derivative `dW/dr`.
    #[inline(always)]
    pub fn dw(&self, r: R) -> R {
        let q = r * self.inv_h;
        if q >= R::lit(2.0) {
            return R::zero();
        }
        let t = R::one() - q * R::lit(0.5);
        -R::lit(5.0) * self.alpha * q * t * t * t * self.inv_h
    }
}

pub fn kernel_w<R: Real>(r: R, h: R, dim: usize) -> R {
    WendlandC2::new(h, dim).w(r)
}

pub fn kernel_grad_w<R: Real>(r: R, h: R, dim: usize) -> R {
    WendlandC2::new(h, dim).dw(r)
}
