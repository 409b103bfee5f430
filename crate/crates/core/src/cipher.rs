//! The two-pass XOR / mod-256 cipher.
//!
//! Confusion I chains the plaintext into an intermediate sequence `t`
//! seeded by `c0`; Confusion II chains `t` into the ciphertext, seeded by
//! the last element of `t`. Indices in comments are 1-based to match the
//! usual presentation; slices are 0-based.

use crate::error::{check_len, Error, Result};

#[inline]
pub fn modadd(a: u8, b: u8) -> u8 {
    a.wrapping_add(b)
}

#[inline]
pub fn modsub(a: u8, b: u8) -> u8 {
    a.wrapping_sub(b)
}

fn check_inputs(data: &[u8], k: &[u8]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::LengthTooShort { min: 1, actual: 0 });
    }
    check_len(data.len(), k.len())
}

fn check_c0(c0: u8) -> Result<()> {
    if c0 == 0 {
        return Err(Error::InvalidKey("c0 must lie in [1, 255]".into()));
    }
    Ok(())
}

/// `t(1) = p(1) ^ k(1) ^ (c0 + k(1))`, `t(i) = p(i) ^ k(i-1) ^ (t(i-1) + k(i))`.
pub fn confusion1(p: &[u8], k: &[u8], c0: u8) -> Result<Vec<u8>> {
    check_inputs(p, k)?;
    check_c0(c0)?;
    let mut t = Vec::with_capacity(p.len());
    t.push(p[0] ^ k[0] ^ modadd(c0, k[0]));
    for i in 1..p.len() {
        let prev = t[i - 1];
        t.push(p[i] ^ k[i - 1] ^ modadd(prev, k[i]));
    }
    Ok(t)
}

/// `c(1) = t(1) ^ k(1) ^ (t(L) + k(1))`, `c(i) = t(i) ^ k(i-1) ^ (c(i-1) + k(i))`.
pub fn confusion2(t: &[u8], k: &[u8]) -> Result<Vec<u8>> {
    check_inputs(t, k)?;
    let last = t[t.len() - 1];
    let mut c = Vec::with_capacity(t.len());
    c.push(t[0] ^ k[0] ^ modadd(last, k[0]));
    for i in 1..t.len() {
        let prev = c[i - 1];
        c.push(t[i] ^ k[i - 1] ^ modadd(prev, k[i]));
    }
    Ok(c)
}

pub fn encrypt(p: &[u8], k: &[u8], c0: u8) -> Result<Vec<u8>> {
    let t = confusion1(p, k, c0)?;
    confusion2(&t, k)
}

/// For `L = 1`, `c(1) = t(1) ^ k(1) ^ (t(1) + k(1))` is the carry vector of
/// `t(1) + k(1)`: always even and many-to-one. Returns the smallest `t(1)`
/// consistent with `c(1)`.
fn single_intermediate(c1: u8, k1: u8) -> Result<u8> {
    (0..=255u8)
        .find(|t| t ^ k1 ^ modadd(*t, k1) == c1)
        .ok_or_else(|| Error::Format(format!("single-byte ciphertext {c1} has no preimage under k(1) = {k1}")))
}

/// Undoes Confusion II back to front, then Confusion I back to front.
/// A single-byte ciphertext has several preimages in general; the smallest
/// intermediate value is chosen, so `encrypt(decrypt(c)) == c` still holds.
pub fn decrypt(c: &[u8], k: &[u8], c0: u8) -> Result<Vec<u8>> {
    check_inputs(c, k)?;
    check_c0(c0)?;
    let n = c.len();
    let mut t = vec![0u8; n];
    if n == 1 {
        t[0] = single_intermediate(c[0], k[0])?;
    } else {
        for i in (1..n).rev() {
            t[i] = c[i] ^ k[i - 1] ^ modadd(c[i - 1], k[i]);
        }
        t[0] = c[0] ^ k[0] ^ modadd(t[n - 1], k[0]);
    }

    let mut p = vec![0u8; n];
    for i in (1..n).rev() {
        p[i] = t[i] ^ k[i - 1] ^ modadd(t[i - 1], k[i]);
    }
    p[0] = t[0] ^ k[0] ^ modadd(c0, k[0]);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: [u8; 4] = [1, 2, 3, 4];
    const K: [u8; 4] = [10, 20, 30, 40];

    #[test]
    fn modular_ops() {
        assert_eq!(modadd(0, 17), 17);
        assert_eq!(modadd(200, 100), 44);
        assert_eq!(modadd(255, 255), 254);
        assert_eq!(modsub(17, 17), 0);
        assert_eq!(modsub(5, 10), 251);
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(modsub(modadd(a, b), b), a);
            }
        }
    }

    #[test]
    fn reference_vector() {
        let t = confusion1(&P, &K, 3).unwrap();
        assert_eq!(t, vec![6, 18, 39, 85]);
        assert_eq!(confusion2(&t, &K).unwrap(), vec![83, 127, 174, 157]);
        assert_eq!(encrypt(&P, &K, 3).unwrap(), vec![83, 127, 174, 157]);
        assert_eq!(decrypt(&[83, 127, 174, 157], &K, 3).unwrap(), P.to_vec());
        let flipped: Vec<u8> = K.iter().map(|k| k ^ 0x80).collect();
        assert_eq!(flipped, vec![138, 148, 158, 168]);
        assert_eq!(encrypt(&P, &flipped, 3).unwrap(), vec![83, 127, 174, 157]);
    }

    #[test]
    fn degenerate_inputs() {
        assert_eq!(confusion1(&[0], &[0], 3).unwrap(), vec![3]);
        assert_eq!(confusion1(&[0; 4], &[0; 4], 1).unwrap(), vec![1; 4]);
        assert_eq!(confusion2(&[5], &[0]).unwrap(), vec![0]);
        assert_eq!(confusion2(&[0; 6], &[0; 6]).unwrap(), vec![0; 6]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            encrypt(&[1, 2, 3], &[1, 2], 3),
            Err(Error::LengthMismatch { expected: 3, actual: 2 })
        ));
        assert!(matches!(encrypt(&[1], &[1], 0), Err(Error::InvalidKey(_))));
        assert!(decrypt(&[], &[], 3).is_err());
        assert!(confusion2(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn single_byte_decrypt_returns_a_preimage() {
        for k in 0..=255u8 {
            for p in 0..=255u8 {
                let c = encrypt(&[p], &[k], 7).unwrap();
                assert_eq!(c[0] & 1, 0);
                let back = decrypt(&c, &[k], 7).unwrap();
                assert_eq!(encrypt(&back, &[k], 7).unwrap(), c);
            }
        }
        assert!(decrypt(&[1], &[0], 7).is_err());
    }
}
