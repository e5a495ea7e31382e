//! Univariate polynomials over the rationals.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `3`, `-1/2`, or `7/4`.
pub fn parse_rational(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            Some(Q::new(n.trim().parse().ok()?, d))
        }
        None => Some(Q::from_integer(s.parse().ok()?)),
    }
}

/// A point of the real projective line.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Point {
    Finite(Q),
    Infinity,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Point::Finite(x) => write!(f, "{x}"),
            Point::Infinity => write!(f, "inf"),
        }
    }
}

/// Coefficients from the constant term upward, with no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<Q>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Q>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_ints(c: &[i64]) -> Self {
        Poly::new(c.iter().map(|&x| q(x)).collect())
    }

    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Q) -> Self {
        Poly::new(vec![c])
    }

    /// `x - r`
    pub fn linear_root(r: &Q) -> Self {
        Poly::new(vec![-r.clone(), Q::one()])
    }

    pub fn from_roots(lead: Q, roots: &[Q]) -> Self {
        roots.iter().fold(Poly::constant(lead), |acc, r| &acc * &Poly::linear_root(r))
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    /// Coefficient of `x^i`, zero past the degree.
    pub fn coeff(&self, i: usize) -> Q {
        self.coeffs.get(i).cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Q {
        self.coeffs.last().cloned().unwrap_or_else(Q::zero)
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.coeffs.iter().rev().fold(Q::zero(), |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * q(i as i64))
                .collect(),
        )
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let l = self.leading();
        Poly::new(self.coeffs.iter().map(|c| c / &l).collect())
    }

    pub fn scale(&self, k: &Q) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "division by the zero polynomial");
        let dd = d.coeffs.len() - 1;
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return (Poly::zero(), self.clone());
        }
        let mut quo = vec![Q::zero(); r.len() - dd];
        let lead = d.leading();
        for i in (dd..r.len()).rev() {
            let c = &r[i] / &lead;
            if c.is_zero() {
                continue;
            }
            for (j, dc) in d.coeffs.iter().enumerate() {
                r[i - dd + j] -= &c * dc;
            }
            quo[i - dd] = c;
        }
        r.truncate(dd);
        (Poly::new(quo), Poly::new(r))
    }

    /// Monic greatest common divisor.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn squarefree(&self) -> bool {
        self.gcd(&self.derivative()).degree() == Some(0)
    }

    fn sturm_chain(&self) -> Vec<Poly> {
        let mut chain = vec![self.clone(), self.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                return chain;
            }
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            chain.push(-r);
        }
    }

    fn sign_at(&self, x: &Bound) -> i32 {
        match x {
            Bound::Finite(v) => sign(&self.eval(v)),
            Bound::PlusInfinity => sign(&self.leading()),
            Bound::MinusInfinity => {
                let s = sign(&self.leading());
                if self.degree().unwrap_or(0).is_multiple_of(2) { s } else { -s }
            }
        }
    }

    /// Distinct real roots in the open interval `(lo, hi)`; endpoints must not be roots.
    pub fn count_real_roots(&self, lo: &Bound, hi: &Bound) -> usize {
        if self.is_zero() || self.degree() == Some(0) {
            return 0;
        }
        let chain = self.sturm_chain();
        variations(&chain, lo).saturating_sub(variations(&chain, hi))
    }

    /// Distinct real roots of a nonzero polynomial.
    pub fn count_all_real_roots(&self) -> usize {
        self.count_real_roots(&Bound::MinusInfinity, &Bound::PlusInfinity)
    }

    /// Rational roots, sorted and without repetition.
    ///
    /// Real roots are isolated by Sturm bisection until each interval is shorter
    /// than `1/a_n^2`; such an interval holds at most one rational with
    /// denominator dividing `a_n`, which is then tested exactly.
    pub fn rational_roots(&self) -> Vec<Q> {
        let mut out = Vec::new();
        if self.degree().unwrap_or(0) == 0 {
            return out;
        }
        let mut p = self.div_rem(&self.gcd(&self.derivative())).0;
        'restart: loop {
            if p.degree().unwrap_or(0) == 0 {
                break;
            }
            let ints = p.integer_coefficients();
            let an = ints[ints.len() - 1].abs();
            let dens = divisors(&an);
            let width = Q::new(BigInt::one(), &an * &an);
            let lead = p.leading();
            let bound = p.coeffs.iter().map(|c| (c / &lead).abs()).fold(Q::zero(), |a, b| a.max(b)) + Q::one();
            let chain = p.sturm_chain();
            let count = |lo: &Q, hi: &Q| {
                variations(&chain, &Bound::Finite(lo.clone())).saturating_sub(variations(&chain, &Bound::Finite(hi.clone())))
            };
            let mut stack = vec![(-bound.clone(), bound)];
            while let Some((lo, hi)) = stack.pop() {
                let n = count(&lo, &hi);
                if n == 0 {
                    continue;
                }
                if n == 1 && &hi - &lo < width {
                    for d in &dens {
                        let dq = Q::from_integer(d.clone());
                        let num = (&lo * &dq).floor() + Q::one();
                        let r = num / dq;
                        if r < hi && p.eval(&r).is_zero() {
                            out.push(r.clone());
                            p = p.div_rem(&Poly::linear_root(&r)).0;
                            continue 'restart;
                        }
                    }
                    continue;
                }
                let mid = (&lo + &hi) / q(2);
                if p.eval(&mid).is_zero() {
                    out.push(mid.clone());
                    p = p.div_rem(&Poly::linear_root(&mid)).0;
                    continue 'restart;
                }
                stack.push((lo, mid.clone()));
                stack.push((mid, hi));
            }
            break;
        }
        out.sort();
        out
    }

    /// Integer multiple with coprime integer coefficients.
    pub fn integer_coefficients(&self) -> Vec<BigInt> {
        let l = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self.coeffs.iter().map(|c| (c * Q::from_integer(l.clone())).to_integer()).collect();
        let g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        if g.is_zero() {
            return ints;
        }
        ints.into_iter().map(|c| c / &g).collect()
    }
}

fn variations(chain: &[Poly], x: &Bound) -> usize {
    let signs: Vec<i32> = chain.iter().map(|p| p.sign_at(x)).filter(|&s| s != 0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn divisors(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = BigInt::one();
    while &d * &d <= n {
        if (&n % &d).is_zero() {
            let e = &n / &d;
            if e != d {
                large.push(e);
            }
            small.push(d.clone());
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

pub fn sign(x: &Q) -> i32 {
    if x.is_positive() {
        1
    } else if x.is_negative() {
        -1
    } else {
        0
    }
}

/// Endpoint for root counting on the real line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    MinusInfinity,
    Finite(Q),
    PlusInfinity,
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let n = self.coeffs.len().max(o.coeffs.len());
        Poly::new((0..n).map(|i| self.coeff(i) + o.coeff(i)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &(-o.clone())
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.into_iter().map(|c| -c).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        if self.is_zero() || o.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Q::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            first = false;
            let unit = a.is_one() && i > 0;
            if !unit {
                write!(f, "{a}")?;
            }
            match i {
                0 => {}
                1 => write!(f, "{}x", if unit { "" } else { "*" })?,
                _ => write!(f, "{}x^{i}", if unit { "" } else { "*" })?,
            }
        }
        Ok(())
    }
}
