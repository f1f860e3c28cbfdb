use serde::{Deserialize, Serialize};

use crate::error::{Result, XcrError};

/// Integration window `[r1, r2]` inside the data domain `[t0, tmax]`.
///
/// Evaluating `X(t - tau)` for every `t` in the window stays inside the
/// domain exactly when `tau` lies in [`SubintervalSpec::shift_range`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubintervalSpec {
    pub r1: f64,
    pub r2: f64,
    pub t0: f64,
    pub tmax: f64,
}

impl SubintervalSpec {
    pub fn new(r1: f64, r2: f64, t0: f64, tmax: f64) -> Result<Self> {
        let spec = Self { r1, r2, t0, tmax };
        let fail = |reason: &str| {
            Err(XcrError::InvalidWindow {
                r1,
                r2,
                t0,
                tmax,
                reason: reason.to_string(),
            })
        };
        if ![r1, r2, t0, tmax].iter().all(|v| v.is_finite()) {
            return fail("bounds must be finite");
        }
        if !(t0 <= r1 && r1 < r2 && r2 <= tmax) {
            return fail("need t0 <= r1 < r2 <= tmax");
        }
        Ok(spec)
    }

    /// The whole domain as a window. Its shift range is degenerate.
    pub fn full(t0: f64, tmax: f64) -> Result<Self> {
        Self::new(t0, tmax, t0, tmax)
    }

    pub fn length(&self) -> f64 {
        self.r2 - self.r1
    }

    /// Admissible shifts `(lo, hi) = (-(tmax - r2), r1 - t0)`; fails unless
    /// `lo < 0 < hi`.
    pub fn shift_range(&self) -> Result<(f64, f64)> {
        let lo = -(self.tmax - self.r2);
        let hi = self.r1 - self.t0;
        if lo < 0.0 && hi > 0.0 {
            Ok((lo, hi))
        } else {
            Err(XcrError::RangeDegenerate { lo, hi })
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.r1 && t <= self.r2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_range_from_remainders() {
        let w = SubintervalSpec::new(10.0, 40.0, 0.0, 50.0).unwrap();
        assert_eq!(w.shift_range().unwrap(), (-10.0, 10.0));
        let w = SubintervalSpec::new(9.0, 18.0, 0.0, 20.0).unwrap();
        assert_eq!(w.shift_range().unwrap(), (-2.0, 9.0));
    }

    #[test]
    fn invalid_windows() {
        assert!(SubintervalSpec::new(5.0, 5.0, 0.0, 10.0).is_err());
        assert!(SubintervalSpec::new(-1.0, 5.0, 0.0, 10.0).is_err());
        assert!(SubintervalSpec::new(1.0, 11.0, 0.0, 10.0).is_err());
        let full = SubintervalSpec::full(0.0, 10.0).unwrap();
        assert!(matches!(full.shift_range(), Err(XcrError::RangeDegenerate { .. })));
    }
}
