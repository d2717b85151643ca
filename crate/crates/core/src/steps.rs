//! `⌊n^t⌋` with an exactness guard for near-integer powers.

use num_bigint::BigUint;

const MAX_EXACT: f64 = (1u64 << 62) as f64;

/// Small-denominator rational `a/b` equal to `t` within 1e-12.
fn as_rational(t: f64) -> Option<(u32, u32)> {
    (1..=64u32).find_map(|b| {
        let a = (t * b as f64).round();
        ((t - a / b as f64).abs() < 1e-12 && a >= 0.0).then_some((a as u32, b))
    })
}

/// `⌊n^t⌋` for `t ∈ [0, 1]`.
///
/// The power is formed from logarithms; when the result lands within 1e-9
/// (relative) of an integer `r`, the floor is decided by comparing `r^b`
/// with `n^a` in exact integer arithmetic, where `t = a/b`.
pub fn floor_pow(n: u64, t: f64) -> u64 {
    if t <= 0.0 || n <= 1 {
        return if n == 0 && t > 0.0 { 0 } else { 1 };
    }
    if t >= 1.0 {
        return n;
    }
    let y = (t * (n as f64).ln()).exp();
    let r = y.round();
    if (y - r).abs() < 1e-9 * y && r < MAX_EXACT && r >= 1.0 {
        let r = r as u64;
        if let Some((a, b)) = as_rational(t) {
            let lhs = BigUint::from(r).pow(b);
            let rhs = BigUint::from(n).pow(a);
            return if lhs <= rhs { r } else { r - 1 };
        }
        return if y >= r as f64 { r } else { r - 1 };
    }
    (y.floor() as u64).clamp(1, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_integer_powers() {
        assert_eq!(floor_pow(100, 0.5), 10);
        assert_eq!(floor_pow(1000, 1.0 / 3.0), 10);
        assert_eq!(floor_pow(1_000_000, 0.5), 1000);
        assert_eq!(floor_pow(10_000_000_000_000_000, 0.25), 10_000);
        assert_eq!(floor_pow(10_000_000_000_000_000, 0.75), 1_000_000_000_000);
        assert_eq!(floor_pow(6, 0.5), 2);
        assert_eq!(floor_pow(16, 0.5), 4);
        assert_eq!(floor_pow(99, 0.5), 9);
        assert_eq!(floor_pow(101, 0.5), 10);
    }

    #[test]
    fn endpoints() {
        assert_eq!(floor_pow(12345, 0.0), 1);
        assert_eq!(floor_pow(12345, 1.0), 12345);
        assert_eq!(floor_pow(1, 0.7), 1);
    }

    #[test]
    fn monotone_in_t() {
        let n = 987_654_321;
        let mut last = 0;
        for i in 0..=1000 {
            let v = floor_pow(n, i as f64 / 1000.0);
            assert!(v >= last);
            last = v;
        }
    }
}
