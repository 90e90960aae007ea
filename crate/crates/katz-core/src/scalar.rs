//! Exact arithmetic in cyclotomic-rational coefficient fields.
//!
//! A [`Scalar`] is an element of `Q(zeta_N)` stored in the power basis
//! `1, zeta, ..., zeta^{phi(N)-1}`, reduced modulo the N-th cyclotomic
//! polynomial. Every value is normalized to its minimal conductor, so
//! structural equality coincides with field equality and the derived
//! ordering is total. Rational components use arbitrary-precision integers.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use num::{BigInt, BigRational, Integer, One, Signed, Zero};
use once_cell::sync::Lazy;

use crate::error::{Error, Result};

/// Exact rational number with arbitrary-precision components.
pub type Rat = BigRational;

/// Shorthand for a small rational.
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// Parse a fraction string of the form `p` or `p/q` (decimal, optional sign).
pub fn rat_from_str(s: &str) -> Result<Rat> {
    let bad = || Error::Parse(format!("malformed fraction {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (s, None),
    };
    let num: BigInt = num.trim().parse().map_err(|_| bad())?;
    let den: BigInt = match den {
        Some(d) => d.trim().parse().map_err(|_| bad())?,
        None => BigInt::one(),
    };
    if den.is_zero() {
        return Err(bad());
    }
    Ok(Rat::new(num, den))
}

/// Print a rational as `p` or `p/q` with the denominator positive and reduced.
pub fn rat_to_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Maximum conductor the engine will promote to, read once from
/// `KATZ_MAX_CONDUCTOR` (default 1024).
pub fn conductor_cap() -> u32 {
    static CAP: Lazy<u32> = Lazy::new(|| {
        std::env::var("KATZ_MAX_CONDUCTOR")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(1024)
    });
    *CAP
}

fn check_cap(n: u64) -> Result<u32> {
    let cap = conductor_cap();
    if n == 0 || n > cap as u64 {
        return Err(Error::ConductorTooSmall { needed: n, cap });
    }
    Ok(n as u32)
}

/// Euler totient.
pub fn euler_phi(mut n: u32) -> usize {
    let mut result = n as u64;
    let mut p = 2u32;
    while (p as u64) * (p as u64) <= n as u64 {
        if n % p == 0 {
            while n % p == 0 {
                n /= p;
            }
            result = result / p as u64 * (p as u64 - 1);
        }
        p += 1;
    }
    if n > 1 {
        result = result / n as u64 * (n as u64 - 1);
    }
    result as usize
}

fn divisors(n: u32) -> Vec<u32> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u32;
    while (d as u64) * (d as u64) <= n as u64 {
        if n % d == 0 {
            small.push(d);
            if d != n / d {
                large.push(n / d);
            }
        }
        d += 1;
    }
    large.reverse();
    small.extend(large);
    small
}

// ---- Polynomial helpers (little-endian coefficient vectors over Q) ----

fn poly_trim(v: &mut Vec<Rat>) {
    while v.last().map_or(false, |c| c.is_zero()) {
        v.pop();
    }
}

fn poly_mul(a: &[Rat], b: &[Rat]) -> Vec<Rat> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Rat::zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if !bj.is_zero() {
                out[i + j] += ai * bj;
            }
        }
    }
    poly_trim(&mut out);
    out
}

/// Remainder of `a` modulo the monic polynomial `m`.
fn poly_rem(mut a: Vec<Rat>, m: &[Rat]) -> Vec<Rat> {
    let deg_m = m.len() - 1;
    while a.len() > deg_m {
        let lead = a.pop().unwrap();
        if lead.is_zero() {
            continue;
        }
        let shift = a.len() - deg_m;
        for (i, mi) in m.iter().take(deg_m).enumerate() {
            if !mi.is_zero() {
                a[shift + i] -= &lead * mi;
            }
        }
    }
    poly_trim(&mut a);
    a
}

/// Quotient of `a` by the monic polynomial `m`, assuming exact division.
fn poly_div_exact(mut a: Vec<Rat>, m: &[Rat]) -> Vec<Rat> {
    let deg_m = m.len() - 1;
    if a.len() <= deg_m {
        return Vec::new();
    }
    let mut q = vec![Rat::zero(); a.len() - deg_m];
    while a.len() > deg_m {
        let lead = a.pop().unwrap();
        if lead.is_zero() {
            continue;
        }
        let shift = a.len() - deg_m;
        q[shift] = lead.clone();
        for (i, mi) in m.iter().take(deg_m).enumerate() {
            if !mi.is_zero() {
                a[shift + i] -= &lead * mi;
            }
        }
    }
    poly_trim(&mut a);
    debug_assert!(a.is_empty(), "inexact cyclotomic division");
    q
}

/// Inverse of `a` modulo the monic irreducible polynomial `m`.
fn poly_inv_mod(a: &[Rat], m: &[Rat]) -> Vec<Rat> {
    // Extended Euclid over Q[x]: maintain r = s*a + t*m and return s when
    // r becomes a nonzero constant.
    let mut r0: Vec<Rat> = m.to_vec();
    let mut r1: Vec<Rat> = a.to_vec();
    let mut s0: Vec<Rat> = Vec::new();
    let mut s1: Vec<Rat> = vec![Rat::one()];
    while r1.len() > 1 {
        // Divide r0 by r1.
        let mut rem = r0.clone();
        let mut quo = vec![Rat::zero(); rem.len().saturating_sub(r1.len()) + 1];
        let lead_inv = {
            let l = r1.last().unwrap();
            Rat::one() / l
        };
        while rem.len() >= r1.len() && !rem.is_empty() {
            let lead = rem.last().unwrap() * &lead_inv;
            let shift = rem.len() - r1.len();
            quo[shift] = lead.clone();
            for (i, c) in r1.iter().enumerate() {
                let v = &lead * c;
                rem[shift + i] -= v;
            }
            poly_trim(&mut rem);
        }
        poly_trim(&mut quo);
        // s_new = s0 - quo * s1
        let qs = poly_mul(&quo, &s1);
        let mut s_new = s0.clone();
        if s_new.len() < qs.len() {
            s_new.resize(qs.len(), Rat::zero());
        }
        for (i, c) in qs.iter().enumerate() {
            s_new[i] -= c;
        }
        poly_trim(&mut s_new);
        r0 = r1;
        r1 = rem;
        s0 = s1;
        s1 = s_new;
    }
    let c = r1.first().expect("element not invertible").clone();
    assert!(!c.is_zero(), "inverse of zero");
    let inv = Rat::one() / c;
    s1.iter().map(|x| x * &inv).collect()
}

// ---- Cyclotomic polynomial cache ----

static CYCLOTOMIC: Lazy<Mutex<HashMap<u32, std::sync::Arc<Vec<Rat>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Monic N-th cyclotomic polynomial, little-endian over Q.
fn cyclotomic(n: u32) -> std::sync::Arc<Vec<Rat>> {
    if let Some(p) = CYCLOTOMIC.lock().unwrap().get(&n) {
        return p.clone();
    }
    let poly = compute_cyclotomic(n);
    let arc = std::sync::Arc::new(poly);
    CYCLOTOMIC.lock().unwrap().insert(n, arc.clone());
    arc
}

fn compute_cyclotomic(n: u32) -> Vec<Rat> {
    if n == 1 {
        return vec![-Rat::one(), Rat::one()];
    }
    // x^n - 1 divided by the product of all lower cyclotomic polynomials.
    let mut num = vec![Rat::zero(); n as usize + 1];
    num[0] = -Rat::one();
    num[n as usize] = Rat::one();
    for d in divisors(n) {
        if d < n {
            let cd = cyclotomic(d);
            num = poly_div_exact(num, &cd);
        }
    }
    num
}

// ---- Basis-change cache used for conductor minimization ----

// For divisor d of n, the coordinates of zeta_n^{i*(n/d)} (i < phi(d))
// expressed in the conductor-n power basis.
static EMBED_BASIS: Lazy<Mutex<HashMap<(u32, u32), std::sync::Arc<Vec<Vec<Rat>>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn embed_basis(n: u32, d: u32) -> std::sync::Arc<Vec<Vec<Rat>>> {
    if let Some(b) = EMBED_BASIS.lock().unwrap().get(&(n, d)) {
        return b.clone();
    }
    let modulus = cyclotomic(n);
    let phi_n = modulus.len() - 1;
    let step = (n / d) as usize;
    let mut basis = Vec::with_capacity(euler_phi(d));
    for i in 0..euler_phi(d) {
        let mut p = vec![Rat::zero(); i * step + 1];
        *p.last_mut().unwrap() = Rat::one();
        let mut r = poly_rem(p, &modulus);
        r.resize(phi_n, Rat::zero());
        basis.push(r);
    }
    let arc = std::sync::Arc::new(basis);
    EMBED_BASIS.lock().unwrap().insert((n, d), arc.clone());
    arc
}

/// Solve `basis * x = rhs` over Q, if a solution exists.
fn solve_in_span(basis: &[Vec<Rat>], rhs: &[Rat]) -> Option<Vec<Rat>> {
    let rows = rhs.len();
    let cols = basis.len();
    // Augmented column-major system assembled row-major.
    let mut m: Vec<Vec<Rat>> = (0..rows)
        .map(|r| {
            let mut row: Vec<Rat> = basis.iter().map(|b| b[r].clone()).collect();
            row.push(rhs[r].clone());
            row
        })
        .collect();
    let mut pivot_cols = Vec::new();
    let mut row = 0usize;
    for col in 0..cols {
        let Some(p) = (row..rows).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = Rat::one() / &m[row][col];
        for c in col..=cols {
            m[row][c] = &m[row][c] * &inv;
        }
        for r in 0..rows {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in col..=cols {
                    let v = &f * &m[row][c];
                    m[r][c] -= v;
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == rows {
            break;
        }
    }
    // Inconsistent if any zero-row has nonzero rhs.
    for r in row..rows {
        if !m[r][cols].is_zero() {
            return None;
        }
    }
    let mut x = vec![Rat::zero(); cols];
    for (i, &c) in pivot_cols.iter().enumerate() {
        x[c] = m[i][cols].clone();
    }
    Some(x)
}

// ---- Scalar ----

/// An element of `Q(zeta_N)` in canonical (minimal-conductor) form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Scalar {
    conductor: u32,
    coords: Vec<Rat>,
}

impl Scalar {
    fn normalized(conductor: u32, mut coords: Vec<Rat>) -> Scalar {
        let phi = euler_phi(conductor);
        coords.resize(phi, Rat::zero());
        let mut s = Scalar { conductor, coords };
        s.minimize();
        s
    }

    /// Reduce to the minimal conductor representing the same field element.
    fn minimize(&mut self) {
        if self.conductor == 1 {
            return;
        }
        if self.coords.iter().skip(1).all(|c| c.is_zero()) {
            self.coords.truncate(1);
            self.conductor = 1;
            return;
        }
        for d in divisors(self.conductor) {
            if d == self.conductor || euler_phi(d) > self.coords.len() {
                continue;
            }
            let basis = embed_basis(self.conductor, d);
            if let Some(x) = solve_in_span(&basis, &self.coords) {
                self.conductor = d;
                self.coords = x;
                return;
            }
        }
    }

    pub fn zero() -> Scalar {
        Scalar { conductor: 1, coords: vec![Rat::zero()] }
    }

    pub fn one() -> Scalar {
        Scalar { conductor: 1, coords: vec![Rat::one()] }
    }

    pub fn from_rat(r: Rat) -> Scalar {
        Scalar { conductor: 1, coords: vec![r] }
    }

    pub fn from_int(n: i64) -> Scalar {
        Scalar::from_rat(rat(n, 1))
    }

    pub fn rational(n: i64, d: i64) -> Scalar {
        Scalar::from_rat(rat(n, d))
    }

    /// Construct from raw power-basis coordinates at the given conductor.
    pub fn from_coords(conductor: u32, coords: Vec<Rat>) -> Result<Scalar> {
        check_cap(conductor as u64)?;
        let phi = euler_phi(conductor);
        if coords.len() != phi {
            return Err(Error::Parse(format!(
                "expected {phi} coordinates at conductor {conductor}, got {}",
                coords.len()
            )));
        }
        Ok(Scalar::normalized(conductor, coords))
    }

    /// The primitive root of unity `zeta_n`.
    pub fn root_of_unity(n: u32) -> Result<Scalar> {
        check_cap(n as u64)?;
        let phi = euler_phi(n);
        let mut coords = vec![Rat::zero(); phi];
        if phi == 1 {
            // zeta_1 = 1, zeta_2 = -1.
            coords[0] = if n == 1 { Rat::one() } else { -Rat::one() };
        } else {
            coords[1] = Rat::one();
        }
        Ok(Scalar::normalized(n, coords))
    }

    /// `zeta_n^j`, with the exponent taken modulo n.
    pub fn root_of_unity_pow(n: u32, j: i64) -> Result<Scalar> {
        let j = j.rem_euclid(n as i64) as u32;
        let z = Scalar::root_of_unity(n)?;
        Ok(z.pow(j as i64))
    }

    pub fn conductor(&self) -> u32 {
        self.conductor
    }

    pub fn is_zero(&self) -> bool {
        self.conductor == 1 && self.coords[0].is_zero()
    }

    /// True iff the value is a rational integer.
    pub fn is_integer(&self) -> bool {
        self.conductor == 1 && self.coords[0].is_integer()
    }

    /// The value as a rational, when it lies in Q.
    pub fn as_rational(&self) -> Option<&Rat> {
        if self.conductor == 1 {
            Some(&self.coords[0])
        } else {
            None
        }
    }

    /// Power-basis coordinates of this element at conductor `n`.
    ///
    /// Errors with `IncompatibleConductor` unless the minimal conductor
    /// divides `n`.
    pub fn coords_at(&self, n: u32) -> Result<Vec<Rat>> {
        if n == 0 || n % self.conductor != 0 {
            return Err(Error::IncompatibleConductor { found: self.conductor, target: n });
        }
        check_cap(n as u64)?;
        if n == self.conductor {
            return Ok(self.coords.clone());
        }
        let modulus = cyclotomic(n);
        let phi_n = modulus.len() - 1;
        let step = (n / self.conductor) as usize;
        let mut p = vec![Rat::zero(); (self.coords.len() - 1) * step + 1];
        for (i, c) in self.coords.iter().enumerate() {
            if !c.is_zero() {
                p[i * step] = c.clone();
            }
        }
        let mut r = poly_rem(p, &modulus);
        r.resize(phi_n, Rat::zero());
        Ok(r)
    }

    /// Same field element viewed at conductor `n` (the public embedding).
    pub fn embed(&self, n: u32) -> Result<ScalarAt> {
        Ok(ScalarAt { conductor: n, coords: self.coords_at(n)? })
    }

    fn binop(&self, other: &Scalar, f: impl Fn(&Rat, &Rat) -> Rat) -> Scalar {
        let n = lcm_u32(self.conductor, other.conductor);
        let a = self.coords_at(n).expect("lcm promotion cannot fail");
        let b = other.coords_at(n).expect("lcm promotion cannot fail");
        let coords = a.iter().zip(&b).map(|(x, y)| f(x, y)).collect();
        Scalar::normalized(n, coords)
    }

    pub fn add(&self, other: &Scalar) -> Scalar {
        self.binop(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Scalar) -> Scalar {
        self.binop(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Scalar) -> Scalar {
        let n = lcm_u32(self.conductor, other.conductor);
        let a = self.coords_at(n).expect("lcm promotion cannot fail");
        let b = other.coords_at(n).expect("lcm promotion cannot fail");
        let modulus = cyclotomic(n);
        let phi_n = modulus.len() - 1;
        let mut r = poly_rem(poly_mul(&a, &b), &modulus);
        r.resize(phi_n, Rat::zero());
        Scalar::normalized(n, r)
    }

    pub fn neg(&self) -> Scalar {
        Scalar {
            conductor: self.conductor,
            coords: self.coords.iter().map(|c| -c).collect(),
        }
    }

    pub fn inv(&self) -> Result<Scalar> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        if self.conductor == 1 {
            return Ok(Scalar::from_rat(Rat::one() / &self.coords[0]));
        }
        let modulus = cyclotomic(self.conductor);
        let mut a = self.coords.clone();
        poly_trim(&mut a);
        let mut r = poly_inv_mod(&a, &modulus);
        r.resize(self.coords.len(), Rat::zero());
        Ok(Scalar::normalized(self.conductor, r))
    }

    pub fn div(&self, other: &Scalar) -> Result<Scalar> {
        Ok(self.mul(&other.inv()?))
    }

    pub fn pow(&self, e: i64) -> Scalar {
        if e < 0 {
            return self.inv().expect("negative power of zero").pow(-e);
        }
        let mut result = Scalar::one();
        let mut base = self.clone();
        let mut e = e as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        result
    }

    /// Double this value (used by residue bookkeeping).
    pub fn scale(&self, r: &Rat) -> Scalar {
        Scalar {
            conductor: self.conductor,
            coords: self.coords.iter().map(|c| c * r).collect(),
        }
        .also_minimize()
    }

    fn also_minimize(mut self) -> Scalar {
        self.minimize();
        self
    }

    /// Exact k-th root, when one exists inside a cyclotomic-rational field.
    ///
    /// Handles rationals (exact roots, and arbitrary square roots via Gauss
    /// sums) and root-of-unity multiples of rationals. Anything else lies
    /// outside every `Q(zeta_N)` or outside the supported fragment and is
    /// rejected with `FieldExtensionRequired`.
    pub fn nth_root(&self, k: u32) -> Result<Scalar> {
        assert!(k >= 1);
        if k == 1 || self.is_zero() {
            return Ok(self.clone());
        }
        if let Some(q) = self.as_rational() {
            return rational_nth_root(q, k);
        }
        // Try zeta_n^j * rational.
        let n = self.conductor;
        for j in 0..n {
            let zj = Scalar::root_of_unity_pow(n, j as i64)?;
            let q = self.div(&zj)?;
            if let Some(qr) = q.as_rational() {
                let root_q = rational_nth_root(qr, k)?;
                let nk = check_cap(n as u64 * k as u64)?;
                let zroot = Scalar::root_of_unity_pow(nk, j as i64)?;
                return Ok(zroot.mul(&root_q));
            }
        }
        Err(Error::FieldExtensionRequired(format!("{k}-th root of {self}")))
    }
}

fn lcm_u32(a: u32, b: u32) -> u32 {
    let l = (a as u64) * (b as u64) / (a as u64).gcd(&(b as u64));
    u32::try_from(l).expect("conductor overflow")
}

/// Exact integer k-th root when `v` is a perfect k-th power.
fn exact_root_bigint(v: &BigInt, k: u32) -> Option<BigInt> {
    if v.is_zero() || v.is_one() {
        return Some(v.clone());
    }
    let r = v.nth_root(k);
    if num::pow::pow(r.clone(), k as usize) == *v {
        Some(r)
    } else {
        None
    }
}

/// Square root of a positive rational as an exact cyclotomic value,
/// via Gauss sums on the square-free part.
fn sqrt_positive_rational(q: &Rat) -> Result<Scalar> {
    debug_assert!(q.is_positive());
    // sqrt(n/d) = sqrt(n*d)/d.
    let nd = q.numer() * q.denom();
    let mut square = BigInt::one();
    let mut squarefree: Vec<u64> = Vec::new();
    let mut rest = nd.clone();
    let mut p = BigInt::from(2u32);
    while &p * &p <= rest {
        let mut e = 0u32;
        while (&rest % &p).is_zero() {
            rest /= &p;
            e += 1;
        }
        if e > 0 {
            square *= num::pow::pow(p.clone(), (e / 2) as usize);
            if e % 2 == 1 {
                let pu: u64 = p
                    .to_string()
                    .parse()
                    .map_err(|_| Error::FieldExtensionRequired(format!("sqrt({q})")))?;
                squarefree.push(pu);
            }
        }
        p += 1;
    }
    if rest > BigInt::one() {
        let pu: u64 = rest
            .to_string()
            .parse()
            .map_err(|_| Error::FieldExtensionRequired(format!("sqrt({q})")))?;
        squarefree.push(pu);
    }
    let mut root = Scalar::from_rat(Rat::new(square, q.denom().clone()));
    for p in squarefree {
        root = root.mul(&sqrt_prime(p)?);
    }
    Ok(root)
}

/// sqrt(p) for a prime p, as an element of `Q(zeta_{4p})` (or `Q(zeta_8)` for 2).
fn sqrt_prime(p: u64) -> Result<Scalar> {
    if p == 2 {
        // zeta_8 + zeta_8^-1.
        let z = Scalar::root_of_unity(8)?;
        return Ok(z.add(&z.pow(7)));
    }
    // The result lives in Q(zeta_{4p}) in the worst case.
    check_cap(4 * p)?;
    // Quadratic Gauss sum g = sum_a (a|p) zeta_p^a satisfies g^2 = (-1)^((p-1)/2) p.
    let n = check_cap(p)?;
    let mut g = Scalar::zero();
    for a in 1..p {
        let term = Scalar::root_of_unity_pow(n, a as i64)?;
        g = if legendre(a, p) == 1 { g.add(&term) } else { g.sub(&term) };
    }
    if p % 4 == 1 {
        Ok(g)
    } else {
        // g^2 = -p, so sqrt(p) = g / zeta_4.
        let zeta4 = Scalar::root_of_unity(4)?;
        g.div(&zeta4)
    }
}

fn legendre(mut a: u64, p: u64) -> i32 {
    // Euler criterion by fast modular exponentiation.
    a %= p;
    let mut result: u64 = 1;
    let mut base = a % p;
    let mut e = (p - 1) / 2;
    while e > 0 {
        if e & 1 == 1 {
            result = result * base % p;
        }
        base = base * base % p;
        e >>= 1;
    }
    if result == 1 {
        1
    } else {
        -1
    }
}

fn rational_nth_root(q: &Rat, k: u32) -> Result<Scalar> {
    // Split k = 2^a * m with m odd; the odd part must produce a rational.
    let mut m = k;
    let mut halvings = 0u32;
    while m % 2 == 0 {
        m /= 2;
        halvings += 1;
    }
    let abs = q.abs();
    let mut value: Scalar = if m > 1 {
        let num = exact_root_bigint(abs.numer(), m);
        let den = exact_root_bigint(abs.denom(), m);
        match (num, den) {
            (Some(n), Some(d)) => Scalar::from_rat(Rat::new(n, d)),
            _ => {
                return Err(Error::FieldExtensionRequired(format!(
                    "{m}-th root of {} is not rational",
                    rat_to_string(q)
                )))
            }
        }
    } else {
        Scalar::from_rat(abs.clone())
    };
    for _ in 0..halvings {
        let r = value
            .as_rational()
            .ok_or_else(|| {
                Error::FieldExtensionRequired(format!(
                    "iterated square root of {} leaves the supported fields",
                    rat_to_string(q)
                ))
            })?
            .clone();
        debug_assert!(!r.is_negative());
        value = match exact_root_bigint(r.numer(), 2).zip(exact_root_bigint(r.denom(), 2)) {
            Some((n, d)) => Scalar::from_rat(Rat::new(n, d)),
            None => sqrt_positive_rational(&r)?,
        };
    }
    if q.is_negative() {
        // Absorb the sign into a root of unity of order 2k.
        let z = Scalar::root_of_unity(check_cap(2 * k as u64)?)?;
        Ok(value.mul(&z))
    } else {
        Ok(value)
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        self.conductor
            .cmp(&other.conductor)
            .then_with(|| self.coords.cmp(&other.coords))
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(q) = self.as_rational() {
            return write!(f, "{}", rat_to_string(q));
        }
        let mut first = true;
        for (i, c) in self.coords.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if i == 0 {
                write!(f, "{}", rat_to_string(c))?;
            } else if i == 1 {
                write!(f, "{}*zeta{}", rat_to_string(c), self.conductor)?;
            } else {
                write!(f, "{}*zeta{}^{}", rat_to_string(c), self.conductor, i)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// A scalar viewed at an explicit (possibly non-minimal) conductor.
///
/// This is the serialization form: datum files declare one conductor and
/// store all coordinates at it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarAt {
    pub conductor: u32,
    pub coords: Vec<Rat>,
}

impl ScalarAt {
    pub fn to_scalar(&self) -> Result<Scalar> {
        Scalar::from_coords(self.conductor, self.coords.clone())
    }
}

/// A scalar considered modulo integer shifts.
///
/// The canonical representative keeps the rational coordinate in `[0, 1)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ResidueClass(Scalar);

impl ResidueClass {
    pub fn new(s: &Scalar) -> ResidueClass {
        let shift = s.coords[0].floor();
        let mut coords = s.coords.clone();
        coords[0] -= shift;
        ResidueClass(Scalar { conductor: s.conductor, coords })
    }

    /// The canonical representative with rational part in `[0, 1)`.
    pub fn representative(&self) -> &Scalar {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Display for ResidueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod Z)", self.0)
    }
}

impl fmt::Debug for ResidueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Does the difference of two scalars lie in Z?
pub fn congruent_mod_z(a: &Scalar, b: &Scalar) -> bool {
    a.sub(b).is_integer()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zeta(n: u32) -> Scalar {
        Scalar::root_of_unity(n).unwrap()
    }

    #[test]
    fn rational_arithmetic() {
        let half = Scalar::rational(1, 2);
        let one = Scalar::one();
        assert_eq!(half.add(&one), Scalar::rational(3, 2));
        assert_eq!(half.mul(&Scalar::rational(2, 3)), Scalar::rational(1, 3));
        assert_eq!(half.div(&Scalar::rational(1, 4)).unwrap(), Scalar::from_int(2));
        assert_eq!(Scalar::zero().div(&half).unwrap(), Scalar::zero());
        assert_eq!(half.div(&Scalar::zero()), Err(Error::DivisionByZero));
    }

    #[test]
    fn cyclotomic_identities() {
        // 1 + zeta3 + zeta3^2 = 0.
        let z3 = zeta(3);
        let sum = Scalar::one().add(&z3).add(&z3.pow(2));
        assert!(sum.is_zero());
        assert_eq!(z3.add(&z3.pow(2)), Scalar::from_int(-1));
        // zeta4^2 = -1.
        let z4 = zeta(4);
        assert_eq!(z4.mul(&z4), Scalar::from_int(-1));
        // zeta6 = -zeta3^2 lives at conductor 3 after minimization... but its
        // field is Q(zeta3), so the minimal conductor is 3.
        assert_eq!(zeta(6).conductor(), 3);
        assert_eq!(zeta(6).pow(6), Scalar::one());
    }

    #[test]
    fn is_integer_checks() {
        assert!(Scalar::from_int(3).is_integer());
        assert!(!Scalar::rational(1, 2).is_integer());
        assert!(!zeta(3).is_integer());
        let a = zeta(5).add(&Scalar::rational(7, 3));
        assert!(a.sub(&a).is_integer());
    }

    #[test]
    fn embed_and_compatibility() {
        let half = Scalar::rational(1, 2);
        let at6 = half.embed(6).unwrap();
        assert_eq!(at6.coords.len(), euler_phi(6));
        assert_eq!(at6.coords[0], rat(1, 2));
        // zeta3 = zeta6^2: at conductor 6 with modulus x^2 - x + 1 this is
        // zeta6 - 1.
        let z3at6 = zeta(3).embed(6).unwrap();
        assert_eq!(z3at6.coords, vec![rat(-1, 1), rat(1, 1)]);
        assert_eq!(
            zeta(4).embed(6),
            Err(Error::IncompatibleConductor { found: 4, target: 6 })
        );
        // Embedding then arithmetic commutes with arithmetic then embedding.
        let a = zeta(3).add(&Scalar::rational(2, 5));
        let b = zeta(3).pow(2).sub(&Scalar::one());
        let direct = a.mul(&b).embed(12).unwrap();
        let promoted = ScalarAt {
            conductor: 12,
            coords: a.mul(&b).coords_at(12).unwrap(),
        };
        assert_eq!(direct, promoted);
    }

    #[test]
    fn field_axioms_randomized() {
        // Deterministic pseudo-random triples over a couple of conductors.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let sample = |seed: u64| -> Scalar {
            let n = [1u32, 3, 4, 5, 8, 12][(seed % 6) as usize];
            let phi = euler_phi(n);
            let coords: Vec<Rat> = (0..phi)
                .map(|i| {
                    let v = ((seed >> (8 + i)) % 7) as i64 - 3;
                    let d = ((seed >> (20 + i)) % 3) as i64 + 1;
                    rat(v, d)
                })
                .collect();
            Scalar::from_coords(n, coords).unwrap()
        };
        for _ in 0..60 {
            let a = sample(next());
            let b = sample(next());
            let c = sample(next());
            assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
            assert_eq!(a.mul(&b).mul(&c), a.mul(&b.mul(&c)));
            assert_eq!(a.mul(&b.add(&c)), a.mul(&b).add(&a.mul(&c)));
            assert_eq!(a.mul(&b), b.mul(&a));
            if !a.is_zero() {
                assert_eq!(a.mul(&a.inv().unwrap()), Scalar::one());
            }
        }
    }

    #[test]
    fn residue_classes() {
        let a = Scalar::rational(1, 3);
        let b = Scalar::rational(7, 3);
        assert_eq!(ResidueClass::new(&a), ResidueClass::new(&b));
        assert_ne!(ResidueClass::new(&a), ResidueClass::new(&Scalar::rational(2, 3)));
        assert!(ResidueClass::new(&Scalar::from_int(5)).is_zero());
        let c = zeta(3).add(&Scalar::rational(5, 2));
        let d = zeta(3).add(&Scalar::rational(1, 2));
        assert_eq!(ResidueClass::new(&c), ResidueClass::new(&d));
    }

    #[test]
    fn roots() {
        assert_eq!(Scalar::from_int(8).nth_root(3).unwrap(), Scalar::from_int(2));
        assert_eq!(
            Scalar::rational(4, 9).nth_root(2).unwrap(),
            Scalar::rational(2, 3)
        );
        // sqrt(2) via the conductor-8 Gauss construction squares back.
        let r2 = Scalar::from_int(2).nth_root(2).unwrap();
        assert_eq!(r2.mul(&r2), Scalar::from_int(2));
        let r3 = Scalar::from_int(3).nth_root(2).unwrap();
        assert_eq!(r3.mul(&r3), Scalar::from_int(3));
        let rm5 = Scalar::from_int(-5).nth_root(2).unwrap();
        assert_eq!(rm5.mul(&rm5), Scalar::from_int(-5));
        // Cube root of 2 is not abelian.
        assert!(matches!(
            Scalar::from_int(2).nth_root(3),
            Err(Error::FieldExtensionRequired(_))
        ));
        // Roots of zeta-multiples.
        let v = zeta(3).mul(&Scalar::from_int(4));
        let r = v.nth_root(2).unwrap();
        assert_eq!(r.mul(&r), v);
        let neg = Scalar::from_int(-8).nth_root(3).unwrap();
        assert_eq!(neg.pow(3), Scalar::from_int(-8));
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!(rat_from_str("3").unwrap(), rat(3, 1));
        assert_eq!(rat_from_str("-3/2").unwrap(), rat(-3, 2));
        assert_eq!(rat_to_string(&rat(4, 6)), "2/3");
        assert!(rat_from_str("3/").is_err());
        assert!(rat_from_str("1/0").is_err());
        assert!(rat_from_str("x").is_err());
    }

    #[test]
    fn minimal_conductor_is_canonical() {
        // The same field element entered at different conductors compares equal.
        let a = Scalar::from_coords(12, vec![rat(1, 2), rat(0, 1), rat(0, 1), rat(0, 1)]).unwrap();
        assert_eq!(a, Scalar::rational(1, 2));
        assert_eq!(a.conductor(), 1);
        // zeta12^2 = zeta6 generates Q(zeta3).
        let z = zeta(12).pow(2);
        assert_eq!(z.conductor(), 3);
    }
}
