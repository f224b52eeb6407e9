//! Explicit families of integers that an m-gonal form represents locally but
//! not globally.
//!
//! A family is `N_n = (p^(2kn) theta(N_0) - offset) / scale`, where `theta` is
//! the shift of the form, the quaternary quadratic form is anisotropic at `p`,
//! and `p^k = 1 (mod scale)`. Anisotropy forces every solution of the shifted
//! equation for `N_n` to be divisible by `p^(kn)`, and dividing it out gives a
//! solution for `N_0`, which is excluded by a size argument.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{is_prime, multiplicative_order, odd_primes_from, prime_factors, split_u64};
use crate::error::{Error, Result};
use crate::global::{represents_globally, DEFAULT_CAP};
use crate::locrep::{is_locally_universal, represents_locally};
use crate::padic::{descent_holds, is_anisotropic, is_pe_universal};
use crate::polygonal::{decimal, DiagonalQuadraticForm, MGonalForm, ShiftKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    OddPrime,
    Dyadic,
}

impl Branch {
    fn shift_kind(self) -> ShiftKind {
        match self {
            Branch::OddPrime => ShiftKind::Generic,
            Branch::Dyadic => ShiftKind::Dyadic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterexampleFamily {
    pub m: u64,
    pub coeffs: Vec<u64>,
    pub p: u64,
    pub branch: Branch,
    #[serde(rename = "N0")]
    pub n0: u64,
    pub k: u64,
    #[serde(with = "decimal")]
    pub theta0: BigInt,
    pub scale: u64,
    #[serde(with = "decimal")]
    pub offset: BigInt,
}

impl CounterexampleFamily {
    fn build(f: &MGonalForm, p: u64, branch: Branch, n0: u64, k: u64) -> Result<Self> {
        let t = f.shift_u64(n0, branch.shift_kind())?;
        let fam = Self {
            m: f.m(),
            coeffs: f.coeffs().to_vec(),
            p,
            branch,
            n0,
            k,
            theta0: t.theta,
            scale: t.scale,
            offset: t.offset,
        };
        fam.validate()?;
        Ok(fam)
    }

    pub fn form(&self) -> Result<MGonalForm> {
        MGonalForm::new(self.m, self.coeffs.clone())
    }

    /// `p^(2k)`: the factor by which `theta` grows from one member to the next.
    pub fn base(&self) -> BigInt {
        num_traits::pow(BigInt::from(self.p), 2 * self.k as usize)
    }

    /// The power of `p` that `theta(N_0)` must be divisible by.
    pub fn theta_modulus(&self) -> Result<u64> {
        let max_ord = max_ord(&self.coeffs, self.p);
        let e = match self.branch {
            Branch::OddPrime => max_ord,
            Branch::Dyadic => max_ord + 1,
        };
        self.p.checked_pow(e).ok_or(Error::Overflow("theta modulus"))
    }

    /// Checks the congruences that make every member a positive integer and
    /// the anisotropy the non-representation argument rests on.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Construction(msg));
        let f = self.form()?;
        if f.rank() != 4 {
            return fail(format!("family forms have rank 4, got {}", f.rank()));
        }
        if !is_prime(self.p) || (self.branch == Branch::Dyadic) != (self.p == 2) {
            return fail(format!("prime {} does not match the {:?} branch", self.p, self.branch));
        }
        if self.branch == Branch::Dyadic && self.m % 4 != 0 {
            return fail(format!("dyadic families need m = 0 (mod 4), got m = {}", self.m));
        }
        let t = f.shift_u64(self.n0, self.branch.shift_kind())?;
        if t.theta != self.theta0 || t.offset != self.offset || t.scale != self.scale {
            return fail("theta0, scale or offset disagree with the form".into());
        }
        let unit_step = self.scale == 1 || (self.base() % self.scale).is_one();
        if self.k == 0 || !unit_step {
            return fail(format!("p^(2k) = {}^{} is not 1 mod {}", self.p, 2 * self.k, self.scale));
        }
        if !(&self.theta0 % self.theta_modulus()?).is_zero() {
            return fail(format!("theta0 = {} is not divisible by {}", self.theta0, self.theta_modulus()?));
        }
        if !is_anisotropic(&f.quadratic(), self.p)? {
            return fail(format!("{} is isotropic at {}", f.quadratic(), self.p));
        }
        Ok(())
    }

    pub fn member(&self, n: u64) -> BigInt {
        let base = self.base();
        let grown = num_traits::pow(base, n as usize) * &self.theta0;
        let (q, r) = (grown - &self.offset).div_rem(&BigInt::from(self.scale));
        debug_assert!(r.is_zero(), "validated families are integral");
        q
    }
}

pub fn family_member(fam: &CounterexampleFamily, n: u64) -> BigInt {
    fam.member(n)
}

fn max_ord(coeffs: &[u64], p: u64) -> u32 {
    coeffs.iter().map(|&a| split_u64(a, p).0).max().unwrap_or(0)
}

fn coefficient_primes(coeffs: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = coeffs.iter().flat_map(|&a| prime_factors(a)).collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// The smallest prime at which `q` is anisotropic. Only 2 and the odd primes
/// dividing the coefficients can qualify: at any other odd prime the form
/// contains a unimodular ternary subform, which is isotropic.
pub fn find_aniso_prime(q: &DiagonalQuadraticForm) -> Result<Option<u64>> {
    let mut candidates = vec![2u64];
    candidates.extend(coefficient_primes(q.coeffs()).into_iter().filter(|&p| p != 2));
    for p in candidates {
        if is_anisotropic(q, p)? {
            return Ok(Some(p));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thm1Plan {
    pub coeffs: Vec<u64>,
    pub p: u64,
    pub branch: Branch,
    /// Odd primes at which the quadratic form is not universal.
    pub t_primes: Vec<u64>,
    pub max_ord: u32,
    pub m: u64,
    pub m_lower_bound: u64,
    /// Inclusive window searched for `N_0`.
    pub n0_window: (u64, u64),
    pub family: CounterexampleFamily,
}

/// Builds a family for a primitive quaternary form that is anisotropic at
/// some prime, choosing the smallest admissible `m`, `N_0` and `k`.
///
/// An odd anisotropic prime is preferred; the dyadic branch is used only
/// when the form is isotropic at every odd prime. Returns `None` when the
/// form is isotropic everywhere.
pub fn thm1_construct(coeffs: &[u64]) -> Result<Option<Thm1Plan>> {
    if coeffs.len() != 4 {
        return Err(Error::Domain(format!("expected four coefficients, got {}", coeffs.len())));
    }
    let q = DiagonalQuadraticForm::new(coeffs.to_vec())?;
    if !q.is_primitive() {
        return Err(Error::NonPrimitive { coeffs: coeffs.to_vec(), gcd: crate::arith::gcd_all(coeffs) });
    }
    let odd_primes: Vec<u64> = coefficient_primes(coeffs).into_iter().filter(|&p| p != 2).collect();
    let mut t_primes = Vec::new();
    for &p in &odd_primes {
        if !is_pe_universal(&q, p, 0)? {
            t_primes.push(p);
        }
    }
    let mut odd_aniso = None;
    for &p in &odd_primes {
        if is_anisotropic(&q, p)? {
            odd_aniso = Some(p);
            break;
        }
    }
    let (p, branch) = match odd_aniso {
        Some(p) => (p, Branch::OddPrime),
        None if is_anisotropic(&q, 2)? => (2, Branch::Dyadic),
        None => return Ok(None),
    };
    let sum: u64 = coeffs.iter().sum();
    let max_ord = max_ord(coeffs, p);
    let window = match branch {
        Branch::OddPrime => p.pow(max_ord),
        Branch::Dyadic => 2u64.pow(max_ord + 1),
    };
    let m_lower_bound = sum + window + 4;
    let others: Vec<u64> = t_primes.iter().copied().filter(|&t| t != p).collect();
    let period: u64 = others.iter().product::<u64>() * if branch == Branch::OddPrime { 2 * p } else { 4 };
    let admissible = |m: u64| {
        let congruence = match branch {
            Branch::OddPrime => m % 2 == 1 && (m - 4) % p == 0,
            Branch::Dyadic => m % 4 == 0,
        };
        congruence && others.iter().all(|&t| (m - 2) % t == 0)
    };
    let m = (m_lower_bound..m_lower_bound + period)
        .find(|&m| admissible(m))
        .ok_or_else(|| Error::Construction("no admissible m in one period".into()))?;
    let f = MGonalForm::new(m, coeffs.to_vec())?;
    let kind = branch.shift_kind();
    let n0_window = (sum + 1, sum + window);
    let mut n0 = None;
    for n in n0_window.0..=n0_window.1 {
        if (f.shift_u64(n, kind)?.theta % window).is_zero() {
            n0 = Some(n);
            break;
        }
    }
    let n0 = n0.ok_or_else(|| Error::Construction(format!("no N0 in {n0_window:?} with theta = 0 mod {window}")))?;
    let scale = f.shift_u64(n0, kind)?.scale;
    let k =
        multiplicative_order(p, scale).ok_or_else(|| Error::Construction(format!("{p} is not a unit mod {scale}")))?;
    check_base_member(&f, n0)?;
    let family = CounterexampleFamily::build(&f, p, branch, n0, k)?;
    Ok(Some(Thm1Plan { coeffs: coeffs.to_vec(), p, branch, t_primes, max_ord, m, m_lower_bound, n0_window, family }))
}

fn check_base_member(f: &MGonalForm, n0: u64) -> Result<()> {
    if represents_globally(f, n0, DEFAULT_CAP.max(n0))?.is_represented() {
        return Err(Error::Construction(format!("N0 = {n0} is represented by {f}")));
    }
    if !represents_locally(f, &BigInt::from(n0))? {
        return Err(Error::Construction(format!("N0 = {n0} is not locally represented by {f}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Thm2Case {
    OddQ,
    PowerOfTwo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thm2Plan {
    pub m: u64,
    pub case: Thm2Case,
    /// Primes dividing `m - 2`.
    pub t_primes: Vec<u64>,
    pub q: Option<u64>,
    /// `(p, r(p))` for `p` in `t_primes`.
    pub exponents: Vec<(u64, u32)>,
    pub p_prime: Option<u64>,
    pub p_double_prime: Option<u64>,
    pub dyadic_primes: Option<[u64; 4]>,
    /// Candidates skipped because they failed local universality.
    pub rejected_candidates: u32,
    pub family: CounterexampleFamily,
}

/// Choices that override the smallest-admissible policy of [`thm2_construct`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thm2Options {
    pub q: Option<u64>,
    pub exponents: Option<Vec<u32>>,
    pub p_prime: Option<u64>,
    pub p_double_prime: Option<u64>,
    pub dyadic_primes: Option<[u64; 4]>,
    /// Skip this many otherwise valid candidates, giving further forms.
    pub skip: usize,
}

const CANDIDATE_LIMIT: usize = 400;

/// Builds a locally universal quaternary m-gonal form together with a family
/// of integers it does not represent.
pub fn thm2_construct(m: u64, opts: &Thm2Options) -> Result<Thm2Plan> {
    if m < 7 {
        return Err(Error::Domain(format!("m must be at least 7, got {m}")));
    }
    let t_primes = prime_factors(m - 2);
    let odd_divisors: Vec<u64> = prime_factors(m - 4).into_iter().filter(|&p| p != 2).collect();
    if opts.q.is_some() || !odd_divisors.is_empty() {
        let q = match opts.q {
            Some(q) if odd_divisors.contains(&q) => q,
            Some(q) => return Err(Error::Domain(format!("q = {q} is not an odd prime divisor of m - 4 = {}", m - 4))),
            None => odd_divisors[0],
        };
        thm2_odd(m, q, t_primes, opts)
    } else {
        thm2_power_of_two(m, t_primes, opts)
    }
}

fn thm2_exponents(t_primes: &[u64], q: u64, given: Option<&Vec<u32>>) -> Result<Vec<u32>> {
    let product = |r: &[u32]| -> Option<u64> {
        t_primes.iter().zip(r).try_fold(1u64, |acc, (&p, &e)| acc.checked_mul(p.checked_pow(e)?))
    };
    let r = match given {
        Some(r) => {
            if r.len() != t_primes.len() || r.contains(&0) {
                return Err(Error::Domain(format!("need one positive exponent for each of {t_primes:?}")));
            }
            r.clone()
        }
        None => {
            let mut r = vec![1u32; t_primes.len()];
            while product(&r).ok_or(Error::Overflow("exponent product"))? <= q {
                r[0] += 1;
            }
            r
        }
    };
    match product(&r) {
        Some(v) if v > q => Ok(r),
        Some(v) => Err(Error::Domain(format!("prod p^r(p) = {v} must exceed q = {q}"))),
        None => Err(Error::Overflow("exponent product")),
    }
}

fn thm2_odd(m: u64, q: u64, t_primes: Vec<u64>, opts: &Thm2Options) -> Result<Thm2Plan> {
    let r = thm2_exponents(&t_primes, q, opts.exponents.as_ref())?;
    let big_p: u64 = t_primes.iter().zip(&r).map(|(&p, &e)| p.pow(e)).product();
    let nonres = |x: u64| crate::arith::legendre(-(x as i128), q) == -1;
    let firsts = |cond: &dyn Fn(u64) -> bool, fixed: Option<u64>| -> Vec<u64> {
        match fixed {
            Some(v) => vec![v],
            None => odd_primes_from(3).filter(|&v| v != q && cond(v)).take(CANDIDATE_LIMIT).collect(),
        }
    };
    let firsts_prime = firsts(&|v| nonres(v), opts.p_prime);
    let firsts_double = firsts(&|v| nonres(2 * v), opts.p_double_prime);
    for &v in opts.p_prime.iter().chain(&opts.p_double_prime) {
        if !is_prime(v) || v == 2 || v == q {
            return Err(Error::Domain(format!("{v} must be an odd prime different from q = {q}")));
        }
    }

    let mut pairs: Vec<(usize, usize)> = (0..firsts_prime.len())
        .flat_map(|i| (0..firsts_double.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| firsts_prime[i] != firsts_double[j])
        .collect();
    pairs.sort_by_key(|&(i, j)| (i + j, i));

    let mut rejected = 0u32;
    let mut skipped = 0usize;
    for (i, j) in pairs.into_iter().take(CANDIDATE_LIMIT) {
        let (pp, ppp) = (firsts_prime[i], firsts_double[j]);
        let coeffs = vec![big_p, pp * big_p, 2 * q, ppp * q];
        let f = MGonalForm::new(m, coeffs.clone())?;
        if !is_anisotropic(&f.quadratic(), q)? {
            return Err(Error::Construction(format!("{} is isotropic at q = {q}", f.quadratic())));
        }
        if !is_locally_universal(&f)? {
            rejected += 1;
            continue;
        }
        if skipped < opts.skip {
            skipped += 1;
            continue;
        }
        let mut n0 = None;
        for n in 1..=q {
            if (f.shift_u64(n, ShiftKind::Generic)?.theta % q).is_zero() {
                n0 = Some(n);
                break;
            }
        }
        let n0 = n0.ok_or_else(|| Error::Construction(format!("no N0 in [1, {q}] with theta = 0 mod {q}")))?;
        let scale = 8 * (m - 2);
        let k = multiplicative_order(q, scale)
            .ok_or_else(|| Error::Construction(format!("{q} is not a unit mod {scale}")))?;
        check_base_member(&f, n0)?;
        let family = CounterexampleFamily::build(&f, q, Branch::OddPrime, n0, k)?;
        return Ok(Thm2Plan {
            m,
            case: Thm2Case::OddQ,
            exponents: t_primes.iter().copied().zip(r).collect(),
            t_primes,
            q: Some(q),
            p_prime: Some(pp),
            p_double_prime: Some(ppp),
            dyadic_primes: None,
            rejected_candidates: rejected,
            family,
        });
    }
    Err(Error::Construction(format!("no admissible (p', p'') among the first {CANDIDATE_LIMIT} candidates")))
}

fn thm2_power_of_two(m: u64, t_primes: Vec<u64>, opts: &Thm2Options) -> Result<Thm2Plan> {
    debug_assert!((m - 4).is_power_of_two() && m - 4 >= 4);
    let pool: Vec<u64> = match opts.dyadic_primes {
        Some(ps) => {
            let mut sorted = ps.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != 4 || ps.iter().any(|&v| !is_prime(v) || v % 8 != 1) {
                return Err(Error::Domain(format!("{ps:?} must be four distinct primes = 1 (mod 8)")));
            }
            ps.to_vec()
        }
        None => odd_primes_from(3).filter(|&v| v % 8 == 1).take(CANDIDATE_LIMIT + 4).collect(),
    };
    let mut rejected = 0u32;
    let mut skipped = 0usize;
    for window in pool.windows(4) {
        let primes = [window[0], window[1], window[2], window[3]];
        let f = MGonalForm::new(m, primes.to_vec())?;
        if !is_anisotropic(&f.quadratic(), 2)? {
            return Err(Error::Construction(format!("{} is isotropic at 2", f.quadratic())));
        }
        if !is_locally_universal(&f)? {
            rejected += 1;
            continue;
        }
        if skipped < opts.skip {
            skipped += 1;
            continue;
        }
        let mut n0 = None;
        for n in 1..=4 {
            if (f.shift_u64(n, ShiftKind::Dyadic)?.theta % 4u32).is_zero() {
                n0 = Some(n);
                break;
            }
        }
        let n0 = n0.ok_or_else(|| Error::Construction("no N0 in [1, 4] with theta = 0 mod 4".into()))?;
        let scale = (m - 2) / 2;
        let k = multiplicative_order(2, scale)
            .ok_or_else(|| Error::Construction(format!("2 is not a unit mod {scale}")))?;
        check_base_member(&f, n0)?;
        let family = CounterexampleFamily::build(&f, 2, Branch::Dyadic, n0, k)?;
        return Ok(Thm2Plan {
            m,
            case: Thm2Case::PowerOfTwo,
            t_primes,
            q: None,
            exponents: Vec::new(),
            p_prime: None,
            p_double_prime: None,
            dyadic_primes: Some(primes),
            rejected_candidates: rejected,
            family,
        });
    }
    Err(Error::Construction("no locally universal choice of four primes = 1 (mod 8)".into()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GlobalCheck {
    NotRepresented { nodes_visited: u64 },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberCheck {
    pub n: u64,
    #[serde(with = "decimal")]
    pub value: BigInt,
    pub locally_represented: bool,
    pub global: GlobalCheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub family: CounterexampleFamily,
    pub n_max: u64,
    pub global_cap: u64,
    pub members: Vec<MemberCheck>,
    pub skipped: Vec<u64>,
    /// Number of `(x, r)` pairs on which the valuation descent was checked.
    pub descent_samples: u64,
}

/// Checks members `N_0..=N_{n_max}`: each must be locally represented and,
/// when it is at most `global_cap`, not globally represented. The valuation
/// descent that drives the argument is spot-checked on a box of vectors.
pub fn verify_family(fam: &CounterexampleFamily, n_max: u64, global_cap: u64) -> Result<VerificationReport> {
    fam.validate()?;
    let f = fam.form()?;
    let mut members = Vec::new();
    let mut skipped = Vec::new();
    for n in 0..=n_max {
        let value = fam.member(n);
        let fail = |reason: &str| Error::Verification { n, reason: format!("N_{n} = {value}: {reason}") };
        if n > 0 && value <= fam.member(n - 1) {
            return Err(fail("members are not increasing"));
        }
        if !represents_locally(&f, &value)? {
            return Err(fail("not locally represented"));
        }
        let global = match value.to_u64().filter(|&v| v <= global_cap) {
            Some(v) => {
                let cert = represents_globally(&f, v, global_cap)?;
                if cert.is_represented() {
                    return Err(fail(&format!("globally represented: {:?}", cert.decision)));
                }
                GlobalCheck::NotRepresented { nodes_visited: cert.nodes_visited }
            }
            None => {
                skipped.push(n);
                GlobalCheck::Skipped { reason: format!("above the global search cap {global_cap}") }
            }
        };
        members.push(MemberCheck { n, value, locally_represented: true, global });
    }
    let descent_samples = check_descent(fam, n_max)?;
    Ok(VerificationReport { family: fam.clone(), n_max, global_cap, members, skipped, descent_samples })
}

fn check_descent(fam: &CounterexampleFamily, n_max: u64) -> Result<u64> {
    let q = fam.form()?.quadratic();
    let p = fam.p;
    let reach: i128 = (p as i128 * p as i128).min(4);
    let r_max = (2 * fam.k * n_max + max_ord(&fam.coeffs, p) as u64).min(8) as u32;
    let mut samples = 0u64;
    let range = -reach..=reach;
    for x0 in range.clone() {
        for x1 in range.clone() {
            for x2 in range.clone() {
                for x3 in range.clone() {
                    let x = [x0, x1, x2, x3];
                    for r in 0..=r_max {
                        samples += 1;
                        if !descent_holds(&q, p, &x, r) {
                            return Err(Error::Verification {
                                n: 0,
                                reason: format!("valuation descent fails at x = {x:?}, r = {r}"),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dq(a: &[u64]) -> DiagonalQuadraticForm {
        DiagonalQuadraticForm::new(a.to_vec()).unwrap()
    }

    #[test]
    fn aniso_prime_examples() {
        assert_eq!(find_aniso_prime(&dq(&[1, 1, 1, 1])).unwrap(), Some(2));
        assert_eq!(find_aniso_prime(&dq(&[5, 35, 6, 15])).unwrap(), Some(3));
        assert_eq!(find_aniso_prime(&dq(&[1, 1, 3, 3])).unwrap(), Some(3));
        assert_eq!(find_aniso_prime(&dq(&[1, 1, 1, 2])).unwrap(), None);
        // unimodular quaternary forms are isotropic at odd primes
        for a in 1..=6u64 {
            for b in 1..=6u64 {
                let f = dq(&[1, a, b, 7]);
                assert!(!is_anisotropic(&f, 11).unwrap() && !is_anisotropic(&f, 13).unwrap());
            }
        }
    }

    #[test]
    fn thm1_on_four_squares() {
        let plan = thm1_construct(&[1, 1, 1, 1]).unwrap().expect("anisotropic at 2");
        assert_eq!(plan.branch, Branch::Dyadic);
        assert_eq!(plan.m, 12);
        let fam = &plan.family;
        assert_eq!((fam.n0, fam.k, fam.scale), (6, 4, 5));
        assert_eq!(fam.theta0, BigInt::from(46));
        assert_eq!(fam.offset, BigInt::from(16));
        assert_eq!(fam.member(1), BigInt::from(2352));
        assert_eq!(fam.member(2), BigInt::from(602928));
    }

    #[test]
    fn thm1_odd_branch() {
        let plan = thm1_construct(&[1, 1, 3, 3]).unwrap().expect("anisotropic at 3");
        assert_eq!(plan.branch, Branch::OddPrime);
        assert_eq!(plan.p, 3);
        assert_eq!(plan.m, 19);
        assert_eq!(plan.family.n0, 9);
        assert_eq!(plan.family.k, 16);
        assert!(plan.t_primes.is_empty());
        let report = verify_family(&plan.family, 1, 1_000_000).unwrap();
        assert_eq!(report.skipped, vec![1]);
    }

    #[test]
    fn thm1_rejects_bad_input() {
        assert!(thm1_construct(&[1, 1, 1]).is_err());
        assert!(matches!(thm1_construct(&[2, 2, 4, 6]), Err(Error::NonPrimitive { .. })));
        assert_eq!(thm1_construct(&[1, 1, 1, 2]).unwrap(), None);
    }

    #[test]
    fn thm2_at_seven() {
        let plan = thm2_construct(7, &Thm2Options::default()).unwrap();
        assert_eq!(plan.case, Thm2Case::OddQ);
        assert_eq!(plan.q, Some(3));
        assert_eq!(plan.t_primes, vec![5]);
        assert_eq!((plan.p_prime, plan.p_double_prime), (Some(7), Some(5)));
        let fam = &plan.family;
        assert_eq!(fam.coeffs, vec![5, 35, 6, 15]);
        assert_eq!((fam.n0, fam.k, fam.scale), (3, 4, 40));
        assert_eq!(fam.theta0, BigInt::from(669));
        assert_eq!(fam.offset, BigInt::from(549));
        assert_eq!(fam.member(1), BigInt::from(109719));
        assert_eq!(fam.member(2), BigInt::from(719956395u64));
    }

    #[test]
    fn thm2_power_of_two_case() {
        let plan = thm2_construct(8, &Thm2Options::default()).unwrap();
        assert_eq!(plan.case, Thm2Case::PowerOfTwo);
        assert_eq!(plan.dyadic_primes, Some([17, 41, 73, 89]));
        let fam = &plan.family;
        assert_eq!((fam.n0, fam.k, fam.scale), (4, 2, 3));
        assert_eq!(fam.theta0, BigInt::from(232));
        assert_eq!(fam.member(1), BigInt::from(1164));
    }

    #[test]
    fn thm2_at_nine() {
        let plan = thm2_construct(9, &Thm2Options::default()).unwrap();
        assert_eq!(plan.q, Some(5));
        assert_eq!(plan.t_primes, vec![7]);
    }

    #[test]
    fn thm2_overrides_give_other_forms() {
        let a = thm2_construct(7, &Thm2Options::default()).unwrap();
        let b = thm2_construct(7, &Thm2Options { skip: 1, ..Default::default() }).unwrap();
        assert_ne!(a.family.coeffs, b.family.coeffs);
        let c = thm2_construct(7, &Thm2Options { p_prime: Some(13), p_double_prime: Some(11), ..Default::default() })
            .unwrap();
        assert_eq!(c.family.coeffs, vec![5, 65, 6, 33]);
        assert!(thm2_construct(7, &Thm2Options { q: Some(5), ..Default::default() }).is_err());
        assert!(thm2_construct(6, &Thm2Options::default()).is_err());
    }

    #[test]
    fn families_are_integral_and_increasing() {
        let mut fams: Vec<CounterexampleFamily> =
            (7..=16).map(|m| thm2_construct(m, &Thm2Options::default()).unwrap().family).collect();
        fams.push(thm1_construct(&[1, 1, 1, 1]).unwrap().unwrap().family);
        for fam in fams {
            let scale = BigInt::from(fam.scale);
            for n in 0..=50u64 {
                let grown = num_traits::pow(fam.base(), n as usize) * &fam.theta0 - &fam.offset;
                assert!((&grown % &scale).is_zero(), "{fam:?} n={n}");
                assert!(fam.member(n + 1) > fam.member(n));
            }
        }
    }

    #[test]
    fn family_json_round_trip() {
        let fam = thm2_construct(7, &Thm2Options::default()).unwrap().family;
        let text = serde_json::to_string(&fam).unwrap();
        assert!(text.contains("\"N0\":3") && text.contains("\"theta0\":\"669\""));
        let back: CounterexampleFamily = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fam);
    }

    #[test]
    fn tampered_families_fail_validation() {
        let mut fam = thm2_construct(7, &Thm2Options::default()).unwrap().family;
        fam.k = 3;
        assert!(fam.validate().is_err());
        let mut fam = thm2_construct(7, &Thm2Options::default()).unwrap().family;
        fam.n0 = 4;
        assert!(fam.validate().is_err());
    }

    #[test]
    fn verify_small_members() {
        let fam = thm1_construct(&[1, 1, 1, 1]).unwrap().unwrap().family;
        let report = verify_family(&fam, 2, DEFAULT_CAP).unwrap();
        assert!(report.skipped.is_empty());
        assert_eq!(report.members.len(), 3);
        let fam = thm2_construct(8, &Thm2Options::default()).unwrap().family;
        verify_family(&fam, 2, DEFAULT_CAP).unwrap();
    }
}
