use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Fraction of tokens still masked at progress `t`: `cos(πt/2)`.
pub fn mask_schedule(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("schedule step {t} outside [0, 1]")));
    }
    Ok((FRAC_PI_2 * t).cos().clamp(0.0, 1.0))
}

/// Number of tokens that stay masked after iteration `i` of `n` over `len` tokens.
pub fn masked_after(i: usize, n: usize, len: usize) -> usize {
    let frac = mask_schedule((i + 1) as f64 / n as f64).expect("step within range");
    ((frac * len as f64).floor() as usize).min(len.saturating_sub(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(mask_schedule(0.0).unwrap(), 1.0);
        assert!(mask_schedule(1.0).unwrap().abs() < 1e-15);
        assert!((mask_schedule(0.5).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(mask_schedule(1.2).is_err());
        assert!(mask_schedule(f64::NAN).is_err());
    }

    #[test]
    fn last_iteration_unmasks_everything() {
        assert_eq!(masked_after(9, 10, 16), 0);
        assert!(masked_after(0, 10, 16) < 16);
    }

    proptest! {
        #[test]
        fn monotone_decreasing(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (flo, fhi) = (mask_schedule(lo).unwrap(), mask_schedule(hi).unwrap());
            prop_assert!(fhi <= flo);
            prop_assert!((0.0..=1.0).contains(&flo));
        }
    }
}
