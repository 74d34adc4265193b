//! Seeded randomness shared by the protocols: a k-wise independent hash
//! family (degree-(k-1) polynomials over GF(2^w)) and per-node Bernoulli
//! sampling that every node can evaluate locally from a common seed.

use alloc::vec::Vec;
use core::fmt;

use crate::graph::NodeId;

/// `ceil(log2(n))`, with `ceil_log2(1) == 0`.
#[inline]
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// SplitMix64 step; the permutation behind all derived seeds.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from `(seed, tag)`.
#[inline]
pub fn derive(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Seeded coin with success probability `p`, computable by anyone who knows
/// `(seed, key)`. Used for joins and sampling so nothing is centralized.
#[inline]
pub fn bernoulli(seed: u64, key: u64, p: f64) -> bool {
    if p >= 1.0 {
        return true;
    }
    if p <= 0.0 {
        return false;
    }
    let threshold = (p * 18_446_744_073_709_551_616.0) as u64;
    splitmix64(seed ^ splitmix64(key)) < threshold
}

/// Membership indicator per node: node `v` is included independently with
/// probability `p`, decided by `bernoulli(seed, v)`.
pub fn sample_subset(n: u32, p: f64, seed: u64) -> Vec<bool> {
    (1..=n).map(|v| bernoulli(seed, v as u64, p)).collect()
}

/// Members of [`sample_subset`] as a sorted ID list.
pub fn sample_members(n: u32, p: f64, seed: u64) -> Vec<NodeId> {
    (1..=n).filter(|&v| bernoulli(seed, v as u64, p)).collect()
}

// ---------------------------------------------------------------------------
// GF(2^w) arithmetic, w <= 64.
// ---------------------------------------------------------------------------

/// Carry-less multiplication of two w-bit polynomials (w <= 64).
#[inline]
fn clmul(a: u64, b: u64) -> u128 {
    let mut acc: u128 = 0;
    let mut b = b;
    let a = a as u128;
    let mut shift = 0;
    while b != 0 {
        let tz = b.trailing_zeros();
        shift += tz;
        acc ^= a << shift;
        b >>= tz + 1;
        shift += 1;
    }
    acc
}

/// Reduces a product (degree < 2w) modulo the field polynomial
/// `x^w + low`, returning a w-bit residue.
#[inline]
fn reduce(mut prod: u128, w: u32, low: u64) -> u64 {
    let poly: u128 = (1u128 << w) | low as u128;
    let mut deg = 127 - prod.leading_zeros();
    while prod != 0 && deg >= w {
        prod ^= poly << (deg - w);
        if prod == 0 {
            break;
        }
        deg = 127 - prod.leading_zeros();
    }
    prod as u64
}

#[inline]
fn gf_mul(a: u64, b: u64, w: u32, low: u64) -> u64 {
    if a == 0 || b == 0 {
        return 0;
    }
    reduce(clmul(a, b), w, low)
}

fn poly_deg(p: u128) -> i32 {
    if p == 0 {
        -1
    } else {
        (127 - p.leading_zeros()) as i32
    }
}

fn poly_mod(mut a: u128, b: u128) -> u128 {
    let db = poly_deg(b);
    loop {
        let da = poly_deg(a);
        if da < db {
            return a;
        }
        a ^= b << (da - db) as u32;
    }
}

fn poly_gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = poly_mod(a, b);
        a = b;
        b = r;
    }
    a
}

/// Rabin irreducibility test for `f = x^w + low` over GF(2).
fn is_irreducible(w: u32, low: u64) -> bool {
    if w == 1 {
        return true; // x + 1 and x are both irreducible; we only probe low=1
    }
    // x^(2^j) mod f via repeated squaring of the residue.
    let pow_x = |j: u32| -> u64 {
        let mut p: u64 = 0b10;
        for _ in 0..j {
            p = gf_mul(p, p, w, low);
        }
        p
    };
    if pow_x(w) != 0b10 {
        return false;
    }
    let f: u128 = (1u128 << w) | low as u128;
    let mut rem = w;
    let mut d = 2;
    while d * d <= rem {
        if rem % d == 0 {
            let g = pow_x(w / d) ^ 0b10;
            if poly_gcd(f, g as u128) != 1 {
                return false;
            }
            while rem % d == 0 {
                rem /= d;
            }
        }
        d += 1;
    }
    if rem > 1 && rem != w {
        let g = pow_x(w / rem) ^ 0b10;
        if poly_gcd(f, g as u128) != 1 {
            return false;
        }
    } else if rem == w {
        // w itself prime: the only proper divisor exponent is w/w = 1.
        let g = pow_x(1) ^ 0b10;
        if poly_gcd(f, g as u128) != 1 {
            return false;
        }
    }
    true
}

/// Smallest irreducible polynomial of degree `w` over GF(2), returned as the
/// low-order mask (the polynomial is `x^w + mask`). Canonical per width, so
/// every instance of the artifact reduces by the same table.
pub fn field_polynomial(w: u32) -> u64 {
    assert!((1..=64).contains(&w), "field width {w} outside 1..=64");
    let mut low: u64 = 1;
    loop {
        if is_irreducible(w, low) {
            return low;
        }
        low += 2; // constant term must be 1 for irreducibility
    }
}

// ---------------------------------------------------------------------------
// Hash family.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RandError {
    WrongSeedLength { expected_bits: usize, got_bytes: usize },
    KeyOutOfRange { key: u64, a: u32 },
}

impl fmt::Display for RandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RandError::WrongSeedLength {
                expected_bits,
                got_bytes,
            } => write!(
                f,
                "seed must carry exactly {expected_bits} bits ({} bytes), got {got_bytes} bytes",
                (expected_bits + 7) / 8
            ),
            RandError::KeyOutOfRange { key, a } => {
                write!(f, "key {key} does not fit in {a} input bits")
            }
        }
    }
}

/// One member of the k-wise independent family `h: {0,1}^a -> {0,1}^b`.
///
/// The seed's `k * max(a,b)` bits are read LSB-first as `k` coefficients of a
/// degree-(k-1) polynomial over GF(2^max(a,b)); evaluation zero-extends the
/// key to field width and truncates the result to `b` bits.
#[derive(Debug, Clone)]
pub struct HashFamilyMember {
    a: u32,
    b: u32,
    w: u32,
    low: u64,
    coeffs: Vec<u64>,
}

impl HashFamilyMember {
    pub fn new(a: u32, b: u32, k: u32, seed: &[u8]) -> Result<Self, RandError> {
        assert!(a >= 1 && a <= 64 && b >= 1 && b <= 64 && k >= 1);
        let w = a.max(b);
        let expected_bits = (k * w) as usize;
        if seed.len() != (expected_bits + 7) / 8 {
            return Err(RandError::WrongSeedLength {
                expected_bits,
                got_bytes: seed.len(),
            });
        }
        let bit = |i: usize| -> u64 { ((seed[i / 8] >> (i % 8)) & 1) as u64 };
        let coeffs = (0..k)
            .map(|j| {
                let mut c = 0u64;
                for t in 0..w {
                    c |= bit((j * w + t) as usize) << t;
                }
                c
            })
            .collect();
        Ok(HashFamilyMember {
            a,
            b,
            w,
            low: field_polynomial(w),
            coeffs,
        })
    }

    /// Draws the required `k * max(a,b)` seed bits from `rng`.
    pub fn from_rng(a: u32, b: u32, k: u32, rng: &mut impl rand::RngCore) -> Self {
        let w = a.max(b);
        let bytes = ((k * w) as usize + 7) / 8;
        let mut seed = alloc::vec![0u8; bytes];
        rng.fill_bytes(&mut seed);
        Self::new(a, b, k, &seed).expect("seed length is correct by construction")
    }

    pub fn input_bits(&self) -> u32 {
        self.a
    }

    pub fn output_bits(&self) -> u32 {
        self.b
    }

    /// Polynomial evaluation (Horner) followed by truncation to `b` bits.
    pub fn eval(&self, key: u64) -> Result<u64, RandError> {
        if self.a < 64 && key >> self.a != 0 {
            return Err(RandError::KeyOutOfRange { key, a: self.a });
        }
        let mut acc = 0u64;
        for &c in self.coeffs.iter().rev() {
            acc = gf_mul(acc, key, self.w, self.low) ^ c;
        }
        Ok(if self.b == 64 {
            acc
        } else {
            acc & ((1u64 << self.b) - 1)
        })
    }

    /// Maps a key to a node ID as `1 + (h(key) mod n)`.
    pub fn eval_to_node(&self, key: u64, n: u32) -> Result<NodeId, RandError> {
        Ok(1 + (self.eval(key)? % n as u64) as u32)
    }
}

/// Independence degree used when hashing token labels to intermediates:
/// `max(2, 3c * ceil(log2 n))` with `c = 2`.
pub fn routing_independence(n: u32) -> u32 {
    (6 * ceil_log2(n as u64)).max(2)
}

/// Output width for node targeting: `ceil(log2 n) + 8` keeps the modulo bias
/// under 1 percent.
pub fn node_hash_bits(n: u32) -> u32 {
    (ceil_log2(n as u64) + 8).min(64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn known_field_polynomials() {
        // Spot checks against the standard low-weight table.
        assert_eq!(field_polynomial(1), 1); // x + 1
        assert_eq!(field_polynomial(2), 0b11); // x^2+x+1
        assert_eq!(field_polynomial(8), 0x1B); // x^8+x^4+x^3+x+1
        assert_eq!(field_polynomial(16), 0b101011); // x^16+x^5+x^3+x+1
        assert_eq!(field_polynomial(32), 0b10001101); // x^32+x^7+x^3+x^2+1
        assert_eq!(field_polynomial(64), 0b11011); // x^64+x^4+x^3+x+1
    }

    #[test]
    fn gf_mul_is_commutative_and_distributive() {
        let w = 8;
        let low = field_polynomial(w);
        for a in [0u64, 1, 2, 87, 255] {
            for b in [0u64, 1, 3, 19, 200] {
                assert_eq!(gf_mul(a, b, w, low), gf_mul(b, a, w, low));
                for c in [5u64, 130] {
                    assert_eq!(
                        gf_mul(a, b ^ c, w, low),
                        gf_mul(a, b, w, low) ^ gf_mul(a, c, w, low)
                    );
                }
            }
        }
    }

    #[test]
    fn degree_zero_polynomial_is_constant() {
        // k = 1: h(x) = c0 for every x.
        let h = HashFamilyMember::new(4, 4, 1, &[0b1010]).unwrap();
        for x in 0..16 {
            assert_eq!(h.eval(x).unwrap(), 0b1010);
        }
    }

    #[test]
    fn zero_seed_is_zero_function() {
        let h = HashFamilyMember::new(8, 8, 4, &[0, 0, 0, 0]).unwrap();
        for x in 0..=255u64 {
            assert_eq!(h.eval(x).unwrap(), 0);
        }
    }

    #[test]
    fn eval_is_deterministic() {
        let seed = [0xDE, 0xAD];
        let h1 = HashFamilyMember::new(4, 4, 3, &seed).unwrap();
        let h2 = HashFamilyMember::new(4, 4, 3, &seed).unwrap();
        for _ in 0..3 {
            assert_eq!(h1.eval(5).unwrap(), h2.eval(5).unwrap());
        }
    }

    #[test]
    fn rejects_wrong_seed_length() {
        assert!(matches!(
            HashFamilyMember::new(8, 8, 4, &[0; 3]),
            Err(RandError::WrongSeedLength { .. })
        ));
    }

    #[test]
    fn rejects_out_of_range_key() {
        let h = HashFamilyMember::new(2, 2, 2, &[0b1010]).unwrap();
        assert!(matches!(h.eval(4), Err(RandError::KeyOutOfRange { .. })));
    }

    #[test]
    fn pairwise_independence_exhaustive() {
        // For k = 2 and all widths a = b <= 2: over all seeds, the pair
        // (h(x), h(y)) for distinct keys x, y is exactly uniform.
        for w in 1..=2u32 {
            let seed_bits = 2 * w;
            let keys: Vec<u64> = (0..(1u64 << w)).collect();
            for &x in &keys {
                for &y in &keys {
                    if x == y {
                        continue;
                    }
                    let mut counts = vec![0u32; 1 << (2 * w)];
                    for s in 0..(1u64 << seed_bits) {
                        let h = HashFamilyMember::new(w, w, 2, &[s as u8]).unwrap();
                        let hx = h.eval(x).unwrap();
                        let hy = h.eval(y).unwrap();
                        counts[((hx << w) | hy) as usize] += 1;
                    }
                    // Each of the 2^(2w) output pairs exactly once per 2^(2w) seeds.
                    assert!(counts.iter().all(|&c| c == 1), "w={w} x={x} y={y}");
                }
            }
        }
    }

    #[test]
    fn sample_subset_extremes() {
        assert!(sample_subset(16, 1.0, 7).iter().all(|&x| x));
        assert!(sample_subset(16, 0.0, 7).iter().all(|&x| !x));
    }

    #[test]
    fn sample_subset_concentrates() {
        // Chernoff regime: |W| within [pn/2, 2pn] across 50 seeds.
        let n = 4096u32;
        let p = 1.0 / 16.0;
        let expect = (p * n as f64) as usize;
        for seed in 0..50u64 {
            let size = sample_members(n, p, seed).len();
            assert!(size >= expect / 2 && size <= 2 * expect, "seed {seed}: {size}");
        }
    }

    #[test]
    fn node_mapping_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = HashFamilyMember::from_rng(20, node_hash_bits(1000), 8, &mut rng);
        for key in 0..2000u64 {
            let v = h.eval_to_node(key, 1000).unwrap();
            assert!((1..=1000).contains(&v));
        }
    }
}
