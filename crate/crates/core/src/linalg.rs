//! Exact matrix inversion over the supported finite base rings.
//!
//! Z/m is handled by CRT over its prime-power factors with unit-pivot
//! Gauss-Jordan in each local factor (an invertible matrix over a local ring
//! always offers a unit pivot). Matrix rings are flattened to the base ring;
//! product-with-opposite splits componentwise, with the opposite component
//! inverted through a transpose.

use crate::rings::{Elem, FiniteRing, RingSpec};

/// Inverse of a d x d matrix with entries in `ring`, row major.
/// Returns None when the matrix is not invertible.
pub fn invert(ring: &FiniteRing, d: usize, entries: &[Elem]) -> Option<Vec<Elem>> {
    assert_eq!(entries.len(), d * d);
    match ring.spec() {
        RingSpec::IntegersMod { m } | RingSpec::PrimeField { p: m } => {
            let a: Vec<u64> = entries.iter().map(|&e| e as u64).collect();
            invert_zm(*m, d, &a).map(|v| v.into_iter().map(|x| x as Elem).collect())
        }
        RingSpec::Matrix { dim, inner } => {
            let k = *dim as usize;
            let q = inner_modulus(inner);
            let big = d * k;
            let mut flat = vec![0u64; big * big];
            for i in 0..d {
                for j in 0..d {
                    let block = ring.matrix_entries(entries[i * d + j]);
                    for r in 0..k {
                        for c in 0..k {
                            flat[(i * k + r) * big + (j * k + c)] = block[r * k + c] as u64;
                        }
                    }
                }
            }
            let inv_flat = invert_zm(q, big, &flat)?;
            let mut out = vec![0u32; d * d];
            for i in 0..d {
                for j in 0..d {
                    let mut block = vec![0u32; k * k];
                    for r in 0..k {
                        for c in 0..k {
                            block[r * k + c] = inv_flat[(i * k + r) * big + (j * k + c)] as u32;
                        }
                    }
                    out[i * d + j] = ring.matrix_from_entries(&block);
                }
            }
            Some(out)
        }
        RingSpec::ProductWithOpposite { inner } => {
            let q = inner_modulus(inner);
            let s = inner.size() as u32;
            let mut first = vec![0u64; d * d];
            let mut second_t = vec![0u64; d * d];
            for i in 0..d {
                for j in 0..d {
                    let e = entries[i * d + j];
                    first[i * d + j] = (e / s) as u64;
                    // transpose of the opposite component
                    second_t[j * d + i] = (e % s) as u64;
                }
            }
            let inv_first = invert_zm(q, d, &first)?;
            let inv_second_t = invert_zm(q, d, &second_t)?;
            let mut out = vec![0u32; d * d];
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] =
                        inv_first[i * d + j] as u32 * s + inv_second_t[j * d + i] as u32;
                }
            }
            Some(out)
        }
    }
}

fn inner_modulus(spec: &RingSpec) -> u64 {
    match spec {
        RingSpec::IntegersMod { m } => *m,
        RingSpec::PrimeField { p } => *p,
        _ => unreachable!("nesting depth is limited to base rings"),
    }
}

fn prime_power_factors(mut m: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            let mut q = 1;
            while m.is_multiple_of(p) {
                q *= p;
                m /= p;
            }
            out.push(q);
        }
        p += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

fn smallest_prime_factor(q: u64) -> u64 {
    let mut p = 2;
    while p * p <= q {
        if q.is_multiple_of(p) {
            return p;
        }
        p += 1;
    }
    q
}

fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    let (mut t, mut new_t) = (0i128, 1i128);
    let (mut r, mut new_r) = (m as i128, (a % m) as i128);
    while new_r != 0 {
        let quot = r / new_r;
        (t, new_t) = (new_t, t - quot * new_t);
        (r, new_r) = (new_r, r - quot * new_r);
    }
    if r != 1 {
        return None;
    }
    Some(((t % m as i128 + m as i128) % m as i128) as u64)
}

/// Gauss-Jordan with unit pivots over Z/q where q = p^e is a prime power.
fn invert_local(q: u64, p: u64, d: usize, a: &[u64]) -> Option<Vec<u64>> {
    let mut work: Vec<u64> = a.iter().map(|&x| x % q).collect();
    let mut inv: Vec<u64> = vec![0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1 % q;
    }
    for col in 0..d {
        let pivot_row = (col..d).find(|&r| !work[r * d + col].is_multiple_of(p))?;
        if pivot_row != col {
            for c in 0..d {
                work.swap(col * d + c, pivot_row * d + c);
                inv.swap(col * d + c, pivot_row * d + c);
            }
        }
        let pivot_inv = mod_inverse(work[col * d + col], q)?;
        for c in 0..d {
            work[col * d + c] = work[col * d + c] * pivot_inv % q;
            inv[col * d + c] = inv[col * d + c] * pivot_inv % q;
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let factor = work[r * d + col];
            if factor == 0 {
                continue;
            }
            for c in 0..d {
                work[r * d + c] = (work[r * d + c] + q - factor * work[col * d + c] % q) % q;
                inv[r * d + c] = (inv[r * d + c] + q - factor * inv[col * d + c] % q) % q;
            }
        }
    }
    Some(inv)
}

/// Inverse over Z/m by CRT over the prime-power factors of m.
fn invert_zm(m: u64, d: usize, a: &[u64]) -> Option<Vec<u64>> {
    let factors = prime_power_factors(m);
    if factors.len() == 1 {
        return invert_local(m, smallest_prime_factor(m), d, a);
    }
    let mut partial: Vec<Vec<u64>> = Vec::with_capacity(factors.len());
    for &q in &factors {
        partial.push(invert_local(q, smallest_prime_factor(q), d, a)?);
    }
    // CRT combine entrywise
    let mut out = vec![0u64; d * d];
    for idx in 0..d * d {
        let mut x = 0u64;
        for (f, inv_f) in factors.iter().zip(&partial) {
            let others = m / f;
            let coeff = mod_inverse(others % f, *f)?;
            x = (x + inv_f[idx] % f * (others % m) % m * coeff) % m;
        }
        out[idx] = x;
    }
    Some(out)
}
