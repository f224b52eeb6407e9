//! p-adic tools for diagonal quadratic forms: valuations, square classes,
//! Hilbert symbols, anisotropy, integral representation over `Z_p`, and
//! `p^e Z_p`-universality.
//!
//! Representation over `Z_p` is decided by a congruence search modulo `p^e`
//! for increasing `e`. Every table involved is invariant under multiplication
//! by unit squares, so residues are grouped into square classes
//! (valuation plus unit class) and the search runs on classes instead of on
//! the `p^e` individual residues.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{is_prime, legendre, smallest_nonresidue};
use crate::error::{Error, Result};
use crate::polygonal::DiagonalQuadraticForm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationSplit {
    pub p: u64,
    pub ord: u32,
    pub unit: i128,
}

fn check_prime(p: u64) -> Result<()> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{p} is not prime")))
    }
}

/// Writes `n = p^ord * unit` with `p` not dividing `unit`.
pub fn ord_unit(n: i128, p: u64) -> Result<ValuationSplit> {
    check_prime(p)?;
    if n == 0 {
        return Err(Error::Domain("the valuation of 0 is infinite".into()));
    }
    Ok(split(n, p))
}

fn split(mut n: i128, p: u64) -> ValuationSplit {
    let q = p as i128;
    let mut ord = 0;
    while n % q == 0 {
        n /= q;
        ord += 1;
    }
    ValuationSplit { p, ord, unit: n }
}

fn ord_big(n: &BigInt, p: u64) -> (u32, BigInt) {
    let q = BigInt::from(p);
    let mut n = n.clone();
    let mut ord = 0;
    loop {
        let (quot, rem) = n.div_rem(&q);
        if !rem.is_zero() {
            return (ord, n);
        }
        n = quot;
        ord += 1;
    }
}

fn ord_of(n: i128, p: u64) -> u32 {
    split(n, p).ord
}

/// Is the `p`-adic unit `u` a square in `Z_p^x`? For `p = 2` this is `u = 1 (mod 8)`.
pub fn is_square_unit(u: i128, p: u64) -> Result<bool> {
    check_prime(p)?;
    if u % p as i128 == 0 {
        return Err(Error::Domain(format!("{u} is not a {p}-adic unit")));
    }
    Ok(unit_is_square(u, p))
}

fn unit_is_square(u: i128, p: u64) -> bool {
    if p == 2 {
        u.rem_euclid(8) == 1
    } else {
        legendre(u, p) == 1
    }
}

/// Is the nonzero integer `n` a square in `Q_p`?
pub fn is_padic_square(n: i128, p: u64) -> Result<bool> {
    let s = ord_unit(n, p)?;
    Ok(s.ord % 2 == 0 && unit_is_square(s.unit, p))
}

fn hilbert_split(a: ValuationSplit, b: ValuationSplit) -> i8 {
    let p = a.p;
    let (alpha, beta) = (a.ord as i128, b.ord as i128);
    let (u, v) = (a.unit, b.unit);
    let exponent = if p == 2 {
        let eps = |x: i128| ((x.rem_euclid(8) - 1) / 2) % 2;
        let omega = |x: i128| {
            let r = x.rem_euclid(8);
            ((r * r - 1) / 8) % 2
        };
        eps(u) * eps(v) + alpha * omega(v) + beta * omega(u)
    } else {
        let mut e = alpha * beta * ((p as i128 - 1) / 2);
        if beta % 2 == 1 && legendre(u, p) == -1 {
            e += 1;
        }
        if alpha % 2 == 1 && legendre(v, p) == -1 {
            e += 1;
        }
        e
    };
    if exponent % 2 == 0 {
        1
    } else {
        -1
    }
}

/// The Hilbert symbol `(a, b)_p`: `+1` iff `z^2 = a x^2 + b y^2` has a
/// nontrivial solution over `Q_p`.
pub fn hilbert_symbol(a: i128, b: i128, p: u64) -> Result<i8> {
    Ok(hilbert_split(ord_unit(a, p)?, ord_unit(b, p)?))
}

/// Closed-form anisotropy test over `Q_p` (equivalently `Z_p`) for ranks 1 to 4,
/// by discriminant and Hasse invariant.
pub fn is_anisotropic(q: &DiagonalQuadraticForm, p: u64) -> Result<bool> {
    check_prime(p)?;
    let splits: Vec<ValuationSplit> = q.coeffs().iter().map(|&a| split(a as i128, p)).collect();
    let n = splits.len();
    if !(1..=4).contains(&n) {
        return Err(Error::Unsupported(format!("anisotropy test for rank {n}")));
    }
    let minus_one = split(-1, p);
    let disc_ord: u32 = splits.iter().map(|s| s.ord).sum();
    let disc_unit_square = if p == 2 {
        splits.iter().fold(1i128, |acc, s| (acc * s.unit).rem_euclid(8)) == 1
    } else {
        splits.iter().map(|s| legendre(s.unit, p)).product::<i8>() == 1
    };
    let disc_is_square = disc_ord % 2 == 0 && disc_unit_square;
    let mut hasse = 1i8;
    for i in 0..n {
        for j in i + 1..n {
            hasse *= hilbert_split(splits[i], splits[j]);
        }
    }
    let minus_one_pair = hilbert_split(minus_one, minus_one);
    Ok(match n {
        1 => true,
        // -a1 a2 is a square iff the binary form is a hyperbolic plane
        2 => {
            let d = split(-(splits[0].unit * splits[1].unit), p);
            let ord = splits[0].ord + splits[1].ord;
            !(ord % 2 == 0 && unit_is_square(d.unit, p))
        }
        3 => {
            // (-1, -d) = (-1, -1) * prod (-1, a_i)
            let symbol = splits.iter().fold(minus_one_pair, |acc, &s| acc * hilbert_split(minus_one, s));
            symbol != hasse
        }
        _ => disc_is_square && hasse == -minus_one_pair,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnisotropyPattern {
    /// `<a p^(2r1+1), a u p^(2r2+1), b p^(2r3), b u' p^(2r4)>` with `-u, -u'` non-residues.
    NondyadicTwoTwo,
    /// `<a1 2^(2r1), a2 2^(2r2), a3 2^(2r3+1), a4 2^(2r4+1)>`.
    DyadicTwoTwo,
    /// `<a1 4^r1, a2 4^r2, a3 4^r3, a4 4^r4>` with `a_i` congruent mod 4 and sum not 0 mod 8.
    DyadicFourEven,
}

/// Normal-form data for a quaternary form that is anisotropic at `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnisotropyWitness {
    pub p: u64,
    pub kind: AnisotropyPattern,
    /// Coefficient indices grouped by the pattern; for the 2+2 kinds the first
    /// group is the odd-valuation pair (non-dyadic) or even-valuation pair (dyadic).
    pub grouping: Vec<Vec<usize>>,
    /// Unit parts of the four coefficients, in input order.
    pub units: [i128; 4],
    /// Unit ratios `(u, u')` within each pair, reduced mod `p` (or mod 8 at 2).
    /// Zero for the four-even dyadic kind.
    pub ratios: (i128, i128),
    /// `r_i` with `ord_p(a_i) = 2 r_i` or `2 r_i + 1`.
    pub exponents: [u32; 4],
}

/// Tries to match a quaternary form against the anisotropic normal forms.
///
/// At odd `p` a match happens exactly when the form is anisotropic. At `p = 2`
/// the matcher abstains (returns `None`) when the 2+2 congruences are
/// ambiguous (`a3 + a4 = 0 mod 4`) or when their literal reading disagrees with
/// the Hasse-invariant test.
pub fn match_anisotropic_pattern(q: &DiagonalQuadraticForm, p: u64) -> Option<AnisotropyWitness> {
    if q.rank() != 4 || !is_prime(p) {
        return None;
    }
    let splits: Vec<ValuationSplit> = q.coeffs().iter().map(|&a| split(a as i128, p)).collect();
    let units = [splits[0].unit, splits[1].unit, splits[2].unit, splits[3].unit];
    let exponents = [splits[0].ord / 2, splits[1].ord / 2, splits[2].ord / 2, splits[3].ord / 2];
    let odd: Vec<usize> = (0..4).filter(|&i| splits[i].ord % 2 == 1).collect();
    let even: Vec<usize> = (0..4).filter(|&i| splits[i].ord % 2 == 0).collect();

    if p != 2 {
        if odd.len() != 2 {
            return None;
        }
        let pm = p as i128;
        let ratio = |i: usize, j: usize| {
            let inv = modinv(units[i].rem_euclid(pm), pm);
            (units[j].rem_euclid(pm) * inv).rem_euclid(pm)
        };
        let (u, u_prime) = (ratio(odd[0], odd[1]), ratio(even[0], even[1]));
        if legendre(-u, p) != -1 || legendre(-u_prime, p) != -1 {
            return None;
        }
        return Some(AnisotropyWitness {
            p,
            kind: AnisotropyPattern::NondyadicTwoTwo,
            grouping: vec![odd, even],
            units,
            ratios: (u, u_prime),
            exponents,
        });
    }

    let m4 = |x: i128| x.rem_euclid(4);
    let witness = match odd.len() {
        0 => {
            let same_mod4 = units.iter().all(|&a| m4(a) == m4(units[0]));
            let sum: i128 = units.iter().sum();
            (same_mod4 && sum.rem_euclid(8) != 0).then(|| AnisotropyWitness {
                p,
                kind: AnisotropyPattern::DyadicFourEven,
                grouping: vec![vec![0, 1, 2, 3]],
                units,
                ratios: (0, 0),
                exponents,
            })
        }
        2 => {
            let (a1, a2) = (units[even[0]], units[even[1]]);
            let (a3, a4) = (units[odd[0]], units[odd[1]]);
            if (a3 + a4).rem_euclid(4) == 0 {
                return None;
            }
            let half = m4((a3 + a4) / 2);
            let literal = [a1, a2, a3, a4].iter().all(|&a| m4(a) == half);
            let ratio = |x: i128, y: i128| (y * modinv(x.rem_euclid(8), 8)).rem_euclid(8);
            literal.then(|| AnisotropyWitness {
                p,
                kind: AnisotropyPattern::DyadicTwoTwo,
                grouping: vec![even.clone(), odd.clone()],
                units,
                ratios: (ratio(a1, a2), ratio(a3, a4)),
                exponents,
            })
        }
        _ => None,
    }?;
    // the closed form has the last word at p = 2
    matches!(is_anisotropic(q, 2), Ok(true)).then_some(witness)
}

fn modinv(a: i128, m: i128) -> i128 {
    let e = a.extended_gcd(&m);
    debug_assert_eq!(e.gcd, 1);
    e.x.rem_euclid(m)
}

// State of a partial assignment: bit 0 = some coordinate is a unit,
// bit 1 = some coordinate carries a Hensel certificate.
const STATE_UNIT: u8 = 1;
const STATE_CERT: u8 = 2;
// Masks are sets of states (bit s set iff state s is reachable).
const MASK_HAS_UNIT: u8 = (1 << 1) | (1 << 3);
const MASK_HAS_CERT: u8 = (1 << 2) | (1 << 3);

fn combine_masks(a: u8, b: u8) -> u8 {
    let mut out = 0;
    for s in 0..4 {
        if a & (1 << s) == 0 {
            continue;
        }
        for t in 0..4 {
            if b & (1 << t) != 0 {
                out |= 1 << (s | t);
            }
        }
    }
    out
}

/// Orbit of a residue modulo `p^e` under multiplication by unit squares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Class {
    Zero,
    /// `p^ord * u`; `tag` is the Legendre class (0 square, 1 non-square) at odd
    /// `p`, and `u mod 2^min(3, e - ord)` at `p = 2`.
    Unit {
        ord: u32,
        tag: u8,
    },
}

/// Valuation and unit class of a nonzero target, independent of the level.
#[derive(Debug, Clone, Copy)]
struct UnitData {
    ord: u32,
    /// `u mod 8` at `p = 2`, Legendre class at odd `p`.
    tag: u8,
}

struct Level {
    e: u32,
    index: HashMap<Class, usize>,
    total: Vec<u8>,
}

/// Decides representation `sum a_i x_i^2 = N` over `Z_p` for a fixed form and prime.
pub struct ZpRepresenter {
    p: u64,
    coeffs: Vec<u64>,
    /// `max_i ord_p(2 a_i)`
    two_ord: u32,
    depth: u32,
    levels: Vec<Level>,
}

const MAX_DEPTH: u32 = 120;

impl ZpRepresenter {
    pub fn new(q: &DiagonalQuadraticForm, p: u64) -> Result<Self> {
        check_prime(p)?;
        let two = u32::from(p == 2);
        let two_ord = q.coeffs().iter().map(|&a| split(a as i128, p).ord + two).max().unwrap_or(0);
        let depth = (2 * two_ord + 1).max(2);
        if depth > MAX_DEPTH {
            return Err(Error::Unsupported(format!("congruence depth {depth} over Z_{p}")));
        }
        let mut this = Self { p, coeffs: q.coeffs().to_vec(), two_ord, depth, levels: Vec::new() };
        this.levels = (1..=depth).map(|e| this.build_level(e)).collect();
        Ok(this)
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    /// Search depth after which every surviving residue solution either carries
    /// a certificate or vanishes modulo `p`.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    fn classes_at(&self, e: u32) -> Vec<Class> {
        let mut out = vec![Class::Zero];
        for ord in 0..e {
            if self.p == 2 {
                let modulus = 1u8 << (e - ord).min(3);
                out.extend((1..modulus).step_by(2).map(|tag| Class::Unit { ord, tag }));
            } else {
                out.extend([0, 1].map(|tag| Class::Unit { ord, tag }));
            }
        }
        out
    }

    fn class_of(&self, t: UnitData, e: u32) -> Class {
        if t.ord >= e {
            Class::Zero
        } else if self.p == 2 {
            Class::Unit { ord: t.ord, tag: t.tag % (1u8 << (e - t.ord).min(3)) }
        } else {
            Class::Unit { ord: t.ord, tag: t.tag }
        }
    }

    fn unit_data(&self, n: i128) -> UnitData {
        let s = split(n, self.p);
        let tag = if self.p == 2 { s.unit.rem_euclid(8) as u8 } else { u8::from(legendre(s.unit, self.p) == -1) };
        UnitData { ord: s.ord, tag }
    }

    /// Classes reachable as `x + y` with `x` in `c1` and `y` in `c2`.
    fn add_classes(&self, c1: Class, c2: Class, e: u32) -> Vec<Class> {
        match (c1, c2) {
            (Class::Zero, c) | (c, Class::Zero) => vec![c],
            (Class::Unit { ord: j1, tag: t1 }, Class::Unit { ord: j2, tag: t2 }) => {
                if self.p == 2 {
                    self.add_dyadic(j1, t1, j2, t2, e)
                } else {
                    self.add_odd(j1, t1, j2, t2, e)
                }
            }
        }
    }

    fn add_odd(&self, j1: u32, t1: u8, j2: u32, t2: u8, e: u32) -> Vec<Class> {
        if j1 != j2 {
            let (ord, tag) = if j1 < j2 { (j1, t1) } else { (j2, t2) };
            return vec![Class::Unit { ord, tag }];
        }
        let p = self.p;
        let rep = |tag: u8| if tag == 0 { 1 } else { smallest_nonresidue(p) };
        let r1 = rep(t1);
        let tag_of = |x: u64| u8::from(legendre(x as i128, p) == -1);
        let mut out = BTreeSet::new();
        // x + y = 0 (mod p) is reachable iff -r1 lies in the class of y; the
        // sum then runs over every multiple of p^(j+1)
        if tag_of(p - r1) == t2 {
            out.insert(Class::Zero);
            for ord in j1 + 1..e {
                out.insert(Class::Unit { ord, tag: 0 });
                out.insert(Class::Unit { ord, tag: 1 });
            }
        }
        let mut seen = [false; 2];
        for v in 1..p {
            if tag_of(v) != t2 || (r1 + v) % p == 0 {
                continue;
            }
            let t = tag_of((r1 + v) % p) as usize;
            if !seen[t] {
                seen[t] = true;
                out.insert(Class::Unit { ord: j1, tag: t as u8 });
            }
            if seen[0] && seen[1] {
                break;
            }
        }
        out.into_iter().collect()
    }

    fn add_dyadic(&self, j1: u32, t1: u8, j2: u32, t2: u8, e: u32) -> Vec<Class> {
        // x = 2^j1 t1 is a fixed representative; y = 2^j2 (t2 + 2^k2 s) for all s
        let base = j1.min(j2);
        let width = e - base;
        let k2 = (e - j2).min(3);
        let pow = |k: u32| if k >= 128 { 0u128 } else { 1u128 << k };
        let mask = |v: u128| if width >= 128 { v } else { v & (pow(width) - 1) };
        let x = mask(pow(j1 - base).wrapping_mul(t1 as u128).wrapping_add(pow(j2 - base).wrapping_mul(t2 as u128)));
        let k = j2 - base + k2;
        let mut out = BTreeSet::new();
        let lift = |y: u128, out: &mut BTreeSet<Class>| {
            if y == 0 {
                out.insert(Class::Zero);
            } else {
                let o = y.trailing_zeros();
                let prec = (width - o).min(3);
                out.insert(Class::Unit { ord: base + o, tag: ((y >> o) % (1u128 << prec)) as u8 });
            }
        };
        if k >= width {
            lift(x, &mut out);
            return out.into_iter().collect();
        }
        let low = x % pow(k);
        if low != 0 {
            // valuation fixed by the low bits; the unit part is free above bit k - o
            let o = low.trailing_zeros();
            let prec = (width - o).min(3);
            let fixed = (k - o).min(prec);
            let t0 = ((low >> o) % (1u128 << fixed)) as u8;
            for tag in (1..(1u8 << prec)).step_by(2) {
                if tag % (1u8 << fixed) == t0 {
                    out.insert(Class::Unit { ord: base + o, tag });
                }
            }
        } else {
            out.insert(Class::Zero);
            for o in k..width {
                let prec = (width - o).min(3);
                for tag in (1..(1u8 << prec)).step_by(2) {
                    out.insert(Class::Unit { ord: base + o, tag });
                }
            }
        }
        out.into_iter().collect()
    }

    /// Class masks of `a x^2` over all residues `x` modulo `p^e`.
    fn coordinate_masks(&self, a: u64, e: u32, index: &HashMap<Class, usize>, len: usize) -> Vec<u8> {
        let mut masks = vec![0u8; len];
        let s = self.unit_data(a as i128);
        let two = u32::from(self.p == 2);
        // x = 0 modulo p^e
        masks[index[&Class::Zero]] |= 1;
        for j in 0..e {
            let value = UnitData { ord: s.ord + 2 * j, tag: s.tag };
            let class = self.class_of(value, e);
            let mut state = 0;
            if j == 0 {
                state |= STATE_UNIT;
            }
            if e > 2 * (two + s.ord + j) {
                state |= STATE_CERT;
            }
            masks[index[&class]] |= 1 << state;
        }
        masks
    }

    fn build_level(&self, e: u32) -> Level {
        let classes = self.classes_at(e);
        let index: HashMap<Class, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let len = classes.len();
        let sums: Vec<Vec<Vec<usize>>> = classes
            .iter()
            .map(|&c1| {
                classes.iter().map(|&c2| self.add_classes(c1, c2, e).into_iter().map(|c| index[&c]).collect()).collect()
            })
            .collect();
        let mut total = self.coordinate_masks(self.coeffs[0], e, &index, len);
        for &a in &self.coeffs[1..] {
            let coord = self.coordinate_masks(a, e, &index, len);
            let mut next = vec![0u8; len];
            for (i, &m1) in total.iter().enumerate() {
                if m1 == 0 {
                    continue;
                }
                for (j, &m2) in coord.iter().enumerate() {
                    if m2 == 0 {
                        continue;
                    }
                    let m = combine_masks(m1, m2);
                    for &k in &sums[i][j] {
                        next[k] |= m;
                    }
                }
            }
            total = next;
        }
        Level { e, index, total }
    }

    /// Does the form represent `n` over `Z_p`?
    pub fn represents(&self, n: &BigInt) -> Result<bool> {
        if n.is_zero() {
            return Ok(true);
        }
        let (ord, unit) = ord_big(n, self.p);
        let tag = if self.p == 2 {
            unit.mod_floor(&BigInt::from(8)).to_u8().expect("residue mod 8")
        } else {
            let r = unit.mod_floor(&BigInt::from(self.p)).to_i128().expect("residue mod p");
            u8::from(legendre(r, self.p) == -1)
        };
        self.represents_split(UnitData { ord, tag })
    }

    pub fn represents_i128(&self, n: i128) -> Result<bool> {
        if n == 0 {
            return Ok(true);
        }
        self.represents_split(self.unit_data(n))
    }

    fn represents_split(&self, mut target: UnitData) -> Result<bool> {
        'descend: loop {
            let cap = target.ord + 2 * self.two_ord + 5;
            for level in &self.levels {
                if level.e > cap {
                    return Err(Error::Undecided { p: self.p, depth: level.e, cap });
                }
                let class = self.class_of(target, level.e);
                let mask = level.total[level.index[&class]];
                if mask == 0 {
                    return Ok(false);
                }
                if mask & MASK_HAS_CERT != 0 {
                    return Ok(true);
                }
                if level.e == self.depth {
                    // every solution is 0 mod p, so x = p x' and N/p^2 must be represented
                    if mask & MASK_HAS_UNIT != 0 || target.ord < 2 {
                        return Err(Error::Undecided { p: self.p, depth: level.e, cap });
                    }
                    target.ord -= 2;
                    continue 'descend;
                }
            }
            unreachable!("levels end at the search depth");
        }
    }
}

/// Does `sum a_i x_i^2 = n` have a solution in `Z_p`?
pub fn represents_over_zp(q: &DiagonalQuadraticForm, n: &BigInt, p: u64) -> Result<bool> {
    ZpRepresenter::new(q, p)?.represents(n)
}

/// Unit square-class representatives: `{1, least non-residue}` or `{1, 3, 5, 7}`.
pub fn unit_class_representatives(p: u64) -> Vec<u64> {
    if p == 2 {
        vec![1, 3, 5, 7]
    } else {
        vec![1, smallest_nonresidue(p)]
    }
}

/// Does the form represent every element of `p^e Z_p`?
///
/// Representability depends only on the square class of the target, and if
/// `N` is represented then so is `p^2 N`, so it suffices to check the
/// targets `u p^j` for unit class representatives `u` and `e <= j <= e + J`.
pub fn is_pe_universal(q: &DiagonalQuadraticForm, p: u64, e: u32) -> Result<bool> {
    let solver = ZpRepresenter::new(q, p)?;
    let max_ord = q.coeffs().iter().map(|&a| ord_of(a as i128, p)).max().unwrap_or(0);
    let span = max_ord + 2 * u32::from(p == 2) + 1;
    let reps = unit_class_representatives(p);
    for j in e..=e + span {
        let power = num_traits::pow(BigInt::from(p), j as usize);
        for &u in &reps {
            if !solver.represents(&(&power * u))? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn ord_capped(n: i128, p: u64, cap: u32) -> u32 {
    if n == 0 {
        return cap;
    }
    split(n, p).ord.min(cap)
}

/// Valuation descent for anisotropic forms: if `ord_p(Q(x)) >= r` (odd `p`)
/// or `>= r + 2` (`p = 2`), then `ord_p(a_i x_i^2) >= r` for every `i`.
/// Returns whether the implication holds for this `x` and `r`.
pub fn descent_holds(q: &DiagonalQuadraticForm, p: u64, x: &[i128], r: u32) -> bool {
    let slack = if p == 2 { 2 } else { 0 };
    let need = r + slack;
    let terms: Option<Vec<i128>> =
        q.coeffs().iter().zip(x).map(|(&a, &xi)| xi.checked_mul(xi).and_then(|s| s.checked_mul(a as i128))).collect();
    let fast = terms.as_ref().and_then(|t| t.iter().try_fold(0i128, |acc, &v| acc.checked_add(v)));
    match (terms, fast) {
        (Some(terms), Some(sum)) => ord_capped(sum, p, need) < need || terms.iter().all(|&t| ord_capped(t, p, r) >= r),
        _ => {
            let big_terms: Vec<BigInt> = q
                .coeffs()
                .iter()
                .zip(x)
                .map(|(&a, &xi)| BigInt::from(a) * BigInt::from(xi) * BigInt::from(xi))
                .collect();
            let big_ord = |n: &BigInt, cap: u32| if n.is_zero() { cap } else { ord_big(n, p).0.min(cap) };
            let sum: BigInt = big_terms.iter().sum();
            big_ord(&sum, need) < need || big_terms.iter().all(|t| big_ord(t, r) >= r)
        }
    }
}

/// Sign-free `Q(x)` used by callers that only need its valuation.
pub fn ord_p_of_value(q: &DiagonalQuadraticForm, x: &[i128], p: u64) -> Option<u32> {
    let v = q.value(x);
    if v.is_zero() {
        None
    } else {
        Some(ord_big(&v.abs(), p).0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dq(a: &[u64]) -> DiagonalQuadraticForm {
        DiagonalQuadraticForm::new(a.to_vec()).unwrap()
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(ord_unit(12, 2).unwrap(), ValuationSplit { p: 2, ord: 2, unit: 3 });
        assert_eq!(ord_unit(7, 3).unwrap(), ValuationSplit { p: 3, ord: 0, unit: 7 });
        assert_eq!(ord_unit(-45, 3).unwrap(), ValuationSplit { p: 3, ord: 2, unit: -5 });
        assert!(ord_unit(0, 3).is_err());
        assert!(ord_unit(10, 4).is_err());
    }

    #[test]
    fn square_unit_examples() {
        for p in [2, 3, 5, 7, 11] {
            assert!(is_square_unit(1, p).unwrap());
        }
        assert!(is_square_unit(17, 2).unwrap());
        assert!(!is_square_unit(5, 2).unwrap());
        assert!(!is_square_unit(2, 3).unwrap());
        assert!(is_square_unit(-1, 5).unwrap());
        assert!(is_square_unit(6, 2).is_err());
    }

    #[test]
    fn hilbert_examples() {
        for p in [2, 3, 5, 7] {
            for b in [-7i128, -1, 2, 3, 10, 12] {
                assert_eq!(hilbert_symbol(1, b, p).unwrap(), 1);
            }
        }
        assert_eq!(hilbert_symbol(-1, -1, 2).unwrap(), -1);
        assert_eq!(hilbert_symbol(-1, -1, 5).unwrap(), 1);
        assert_eq!(hilbert_symbol(-1, -1, 3).unwrap(), 1);
        assert_eq!(hilbert_symbol(2, 3, 3).unwrap(), -1);
        assert!(hilbert_symbol(0, 3, 3).is_err());
    }

    #[test]
    fn anisotropy_examples() {
        assert!(is_anisotropic(&dq(&[1, 1, 1, 1]), 2).unwrap());
        assert!(!is_anisotropic(&dq(&[1, 1, 1, 1]), 3).unwrap());
        assert!(is_anisotropic(&dq(&[5, 35, 6, 15]), 3).unwrap());
        assert!(!is_anisotropic(&dq(&[1, 2, 3, 6]), 3).unwrap());
        assert!(!is_anisotropic(&dq(&[1, 2, 3, 6]), 5).unwrap());
        assert!(is_anisotropic(&dq(&[7]), 7).unwrap());
        assert!(is_anisotropic(&dq(&[1, 1]), 3).unwrap());
        assert!(!is_anisotropic(&dq(&[1, 1]), 5).unwrap());
        assert!(is_anisotropic(&dq(&[1, 1, 1]), 2).unwrap());
        assert!(!is_anisotropic(&dq(&[1, 1, 1]), 3).unwrap());
        assert!(is_anisotropic(&dq(&[1, 1, 1, 1, 1]), 2).is_err());
    }

    #[test]
    fn pattern_examples() {
        let w = match_anisotropic_pattern(&dq(&[1, 1, 3, 3]), 3).expect("pattern at 3");
        assert_eq!(w.kind, AnisotropyPattern::NondyadicTwoTwo);
        assert_eq!(w.grouping, vec![vec![2, 3], vec![0, 1]]);
        assert_eq!(w.ratios, (1, 1));
        assert_eq!(w.exponents, [0, 0, 0, 0]);
        assert!(match_anisotropic_pattern(&dq(&[1, 1, 1, 1]), 3).is_none());
        assert!(match_anisotropic_pattern(&dq(&[1, 2, 3, 6]), 5).is_none());
        let w = match_anisotropic_pattern(&dq(&[1, 1, 1, 1]), 2).expect("four-even pattern");
        assert_eq!(w.kind, AnisotropyPattern::DyadicFourEven);
        let w = match_anisotropic_pattern(&dq(&[1, 1, 2, 2]), 2).expect("2+2 pattern");
        assert_eq!(w.kind, AnisotropyPattern::DyadicTwoTwo);
        assert_eq!(w.grouping, vec![vec![0, 1], vec![2, 3]]);
        // literal congruences hold but the discriminant 20 is not a square
        assert!(match_anisotropic_pattern(&dq(&[1, 5, 2, 2]), 2).is_none());
        // a3 + a4 = 0 (mod 4): ambiguous, abstain
        assert!(match_anisotropic_pattern(&dq(&[3, 1, 2, 6]), 2).is_none());
    }

    #[test]
    fn pattern_agrees_with_closed_form_at_odd_primes() {
        for p in [3u64, 5, 7] {
            for a in 1..=12u64 {
                for b in a..=12 {
                    for c in 1..=12u64 {
                        for d in c..=12 {
                            let q = dq(&[a, b, c, d]);
                            let closed = is_anisotropic(&q, p).unwrap();
                            assert_eq!(match_anisotropic_pattern(&q, p).is_some(), closed, "{q} at {p}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn representation_examples() {
        let big = |n: i64| BigInt::from(n);
        assert!(represents_over_zp(&dq(&[1, 1, 1, 1]), &big(7), 2).unwrap());
        assert!(!represents_over_zp(&dq(&[1, 1]), &big(3), 3).unwrap());
        assert!(represents_over_zp(&dq(&[5, 35, 6, 15]), &big(669), 3).unwrap());
        // x^2 + y^2 + z^2 misses 7 (mod 8) and 4^k(8l+7)
        let three = dq(&[1, 1, 1]);
        for n in 1..200i64 {
            let mut t = n;
            while t % 4 == 0 {
                t /= 4;
            }
            assert_eq!(represents_over_zp(&three, &big(n), 2).unwrap(), t % 8 != 7, "n={n}");
        }
        assert!(represents_over_zp(&three, &big(0), 2).unwrap());
    }

    #[test]
    fn huge_targets_descend_by_valuation() {
        let q = dq(&[1, 1, 3, 3]);
        let s = ZpRepresenter::new(&q, 3).unwrap();
        let big = num_traits::pow(BigInt::from(3), 801) * 2;
        // 2 * 3^801 = 3 * (2 * 9^400): odd valuation, unit 2 represented by 3<1,1>
        assert!(s.represents(&big).unwrap());
        let big = num_traits::pow(BigInt::from(3), 800) * 3 * 3;
        assert!(s.represents(&big).unwrap());
    }

    #[test]
    fn pe_universality_examples() {
        assert!(is_pe_universal(&dq(&[1, 1, 1, 1]), 3, 0).unwrap());
        assert!(is_pe_universal(&dq(&[1, 1, 2, 2]), 2, 0).unwrap());
        assert!(is_pe_universal(&dq(&[5, 35, 6, 15]), 3, 1).unwrap());
        // <1,1,1> is not universal over Z_2
        assert!(!is_pe_universal(&dq(&[1, 1, 1]), 2, 0).unwrap());
        assert!(!is_pe_universal(&dq(&[1, 9, 9, 9]), 3, 0).unwrap());
    }

    #[test]
    fn descent_examples() {
        let q = dq(&[1, 1, 1, 1]);
        assert!(descent_holds(&q, 2, &[0, 0, 0, 0], 3));
        assert!(descent_holds(&q, 2, &[2, 2, 2, 2], 2));
        assert!(descent_holds(&dq(&[5, 35, 6, 15]), 3, &[3, 3, 3, 3], 2));
        // isotropic at 5: 1 + 4 = 5 breaks the odd-p implication
        assert!(!descent_holds(&dq(&[1, 1, 1, 1]), 5, &[1, 2, 0, 0], 1));
    }

    /// Residue classes enumerated from scratch must agree with the analytic
    /// addition used to build the tables.
    #[test]
    fn class_addition_matches_enumeration() {
        for (p, max_e) in [(2u64, 8u32), (3, 5), (5, 3), (7, 3)] {
            let solver = ZpRepresenter::new(&dq(&[1, p.pow(max_e / 2)]), p).unwrap();
            for e in 1..=max_e.min(solver.depth()) {
                let modulus = p.pow(e);
                let classify = |w: u64| -> Class {
                    if w % modulus == 0 {
                        return Class::Zero;
                    }
                    let s = solver.unit_data(w as i128);
                    solver.class_of(s, e)
                };
                let classes = solver.classes_at(e);
                let members: Vec<Vec<u64>> =
                    classes.iter().map(|&c| (0..modulus).filter(|&w| classify(w) == c).collect()).collect();
                for (i, &c1) in classes.iter().enumerate() {
                    for (j, &c2) in classes.iter().enumerate() {
                        let mut brute = BTreeSet::new();
                        for &w1 in &members[i] {
                            for &w2 in &members[j] {
                                brute.insert(classify((w1 + w2) % modulus));
                            }
                        }
                        let fast: BTreeSet<Class> = solver.add_classes(c1, c2, e).into_iter().collect();
                        assert_eq!(fast, brute, "p={p} e={e} {c1:?}+{c2:?}");
                    }
                }
            }
        }
    }

    /// Residue masks of partial sums, enumerated over every residue modulo `p^e`.
    fn brute_sum_masks(c: &[i128], p: u64, e: u32) -> Vec<u8> {
        let modulus = p.pow(e) as i128;
        let two = u32::from(p == 2);
        let mut total = vec![0u8; modulus as usize];
        total[0] = 1;
        for &a in c {
            let mut coord = vec![0u8; modulus as usize];
            for x in 0..modulus {
                let mut state = 0;
                if x % p as i128 != 0 {
                    state |= STATE_UNIT;
                }
                if x != 0 && e > 2 * (two + ord_of(a, p) + ord_of(x, p)) {
                    state |= STATE_CERT;
                }
                coord[(a * x * x).rem_euclid(modulus) as usize] |= 1 << state;
            }
            let values: Vec<(usize, u8)> =
                coord.iter().enumerate().filter(|(_, &m)| m != 0).map(|(v, &m)| (v, m)).collect();
            let mut next = vec![0u8; modulus as usize];
            for (r, &m1) in total.iter().enumerate() {
                if m1 == 0 {
                    continue;
                }
                for &(v, m2) in &values {
                    next[(r + v) % modulus as usize] |= combine_masks(m1, m2);
                }
            }
            total = next;
        }
        total
    }

    fn brute_isotropic(c: &[i128], p: u64) -> bool {
        let two = u32::from(p == 2);
        let e = 2 * c.iter().map(|&a| ord_of(a, p)).max().unwrap() + 2 * two + 3;
        brute_sum_masks(c, p, e)[0] & MASK_HAS_CERT != 0
    }

    /// Solvable modulo `p^E` with `E = ord_p(N) + 2 max ord_p(2 a_i) + 1`, which
    /// forces a liftable solution.
    fn brute_represents(c: &[u64], n: u64, p: u64) -> bool {
        if n == 0 {
            return true;
        }
        let two = u32::from(p == 2);
        let d = c.iter().map(|&a| ord_of(a as i128, p) + two).max().unwrap();
        let e = ord_of(n as i128, p) + 2 * d + 1;
        let modulus = p.pow(e);
        let c: Vec<i128> = c.iter().map(|&a| a as i128).collect();
        brute_sum_masks(&c, p, e)[(n % modulus) as usize] != 0
    }

    #[test]
    fn representation_matches_residue_enumeration() {
        let forms: [&[u64]; 8] = [&[1, 1], &[1, 2], &[1, 3], &[1, 1, 1], &[1, 2, 6], &[3, 5], &[1, 4], &[2, 3, 9]];
        for c in forms {
            let q = dq(c);
            for p in [2u64, 3, 5] {
                let solver = ZpRepresenter::new(&q, p).unwrap();
                for n in 0..=60u64 {
                    let fast = solver.represents_i128(n as i128).unwrap();
                    assert_eq!(fast, brute_represents(c, n, p), "{q} n={n} p={p}");
                }
            }
        }
    }

    #[test]
    fn hilbert_matches_residue_enumeration() {
        for p in [2u64, 3, 5] {
            let values: Vec<i128> = (-12..=12).filter(|&a: &i128| a != 0 && ord_of(a, p) <= 1).collect();
            for &a in &values {
                for &b in &values {
                    let brute = if brute_isotropic(&[1, -a, -b], p) { 1 } else { -1 };
                    assert_eq!(hilbert_symbol(a, b, p).unwrap(), brute, "({a},{b})_{p}");
                }
            }
        }
    }

    #[test]
    fn anisotropy_matches_residue_enumeration_small() {
        for p in [2u64, 3] {
            for a in 1..=6u64 {
                for b in a..=6 {
                    for c in b..=6 {
                        let q3 = dq(&[a, b, c]);
                        let brute = brute_isotropic(&[a as i128, b as i128, c as i128], p);
                        assert_eq!(is_anisotropic(&q3, p).unwrap(), !brute, "{q3} at {p}");
                    }
                    let q2 = dq(&[a, b]);
                    assert_eq!(is_anisotropic(&q2, p).unwrap(), !brute_isotropic(&[a as i128, b as i128], p));
                }
            }
        }
    }

    fn prime() -> impl Strategy<Value = u64> {
        prop::sample::select(vec![2u64, 3, 5, 7, 11, 13])
    }

    fn nonzero() -> impl Strategy<Value = i128> {
        (1i128..500, any::<bool>()).prop_map(|(v, neg)| if neg { -v } else { v })
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn hilbert_is_bilinear(a in nonzero(), b in nonzero(), c in nonzero(), p in prime()) {
            let ab = hilbert_symbol(a * b, c, p).unwrap();
            prop_assert_eq!(ab, hilbert_symbol(a, c, p).unwrap() * hilbert_symbol(b, c, p).unwrap());
            prop_assert_eq!(hilbert_symbol(a, b, p).unwrap(), hilbert_symbol(b, a, p).unwrap());
            prop_assert_eq!(hilbert_symbol(a, -a, p).unwrap(), 1);
        }

        #[test]
        fn representation_depends_on_square_class(
            c in prop::collection::vec(1u64..40, 1..=4),
            n in 1u64..5000,
            t in 1u64..60,
            p in prime(),
        ) {
            prop_assume!(t % p != 0);
            let q = dq(&c);
            let solver = ZpRepresenter::new(&q, p).unwrap();
            let n2 = BigInt::from(n) * t * t;
            prop_assert_eq!(solver.represents(&BigInt::from(n)).unwrap(), solver.represents(&n2).unwrap());
            let scaled = BigInt::from(n) * p * p;
            if solver.represents(&BigInt::from(n)).unwrap() {
                prop_assert!(solver.represents(&scaled).unwrap());
            }
        }

        #[test]
        fn odd_pattern_is_sound(c in prop::collection::vec(1u64..200, 4), p in prop::sample::select(vec![3u64, 5, 7, 11])) {
            let q = dq(&c);
            if match_anisotropic_pattern(&q, p).is_some() {
                prop_assert!(is_anisotropic(&q, p).unwrap());
            }
        }
    }
}
