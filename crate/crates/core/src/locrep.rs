//! Local representability of integers by m-gonal forms, prime by prime.
//!
//! At an odd prime dividing `m - 2`, and at 2 when `m` is not `0 mod 4`, an
//! m-gonal form is universal. Everywhere else the shift `N -> theta(N)` turns
//! the question into integral representation by the diagonal quadratic form.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{is_perfect_square, prime_factors};
use crate::error::{Error, Result};
use crate::padic::{is_pe_universal, ZpRepresenter};
use crate::polygonal::{MGonalForm, ShiftKind, ShiftedTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    #[serde(rename = "case1-odd-p-divides-m2")]
    OddPDividesM2,
    #[serde(rename = "case2-dyadic-m-not-0-mod4")]
    DyadicMNot0Mod4,
    #[serde(rename = "case3-odd-generic")]
    OddGeneric,
    #[serde(rename = "case4-dyadic-m-0-mod4")]
    DyadicM0Mod4,
}

impl Route {
    pub fn for_prime(m: u64, p: u64) -> Route {
        match (p == 2, p != 2 && (m - 2) % p == 0, m % 4 == 0) {
            (true, _, false) => Route::DyadicMNot0Mod4,
            (true, _, true) => Route::DyadicM0Mod4,
            (false, true, _) => Route::OddPDividesM2,
            (false, false, _) => Route::OddGeneric,
        }
    }

    /// The shift used on this route, or `None` where the form is universal.
    pub fn shift_kind(self) -> Option<ShiftKind> {
        match self {
            Route::OddPDividesM2 | Route::DyadicMNot0Mod4 => None,
            Route::OddGeneric => Some(ShiftKind::Generic),
            Route::DyadicM0Mod4 => Some(ShiftKind::Dyadic),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalVerdict {
    pub p: u64,
    pub represented: bool,
    pub route: Route,
    pub theta_used: Option<ShiftedTarget>,
}

pub fn represents_locally_at(f: &MGonalForm, n: &BigInt, p: u64) -> Result<LocalVerdict> {
    let solver = PrimeCheck::new(f, p)?;
    solver.verdict(f, n)
}

/// One prime's worth of precomputed state.
struct PrimeCheck {
    p: u64,
    route: Route,
    solver: Option<ZpRepresenter>,
}

impl PrimeCheck {
    fn new(f: &MGonalForm, p: u64) -> Result<Self> {
        let route = Route::for_prime(f.m(), p);
        let solver = match route.shift_kind() {
            None => None,
            Some(_) => Some(ZpRepresenter::new(&f.quadratic(), p)?),
        };
        Ok(Self { p, route, solver })
    }

    fn verdict(&self, f: &MGonalForm, n: &BigInt) -> Result<LocalVerdict> {
        if n.sign() == num_bigint::Sign::Minus {
            return Err(Error::Domain("targets must be non-negative".into()));
        }
        let (represented, theta_used) = match (self.route.shift_kind(), &self.solver) {
            (Some(kind), Some(solver)) => {
                let target = f.shift(n, kind)?;
                assert!(target.scale % self.p != 0, "shift scale must be a unit on this route");
                (solver.represents(&target.theta)?, Some(target))
            }
            _ => (true, None),
        };
        Ok(LocalVerdict { p: self.p, represented, route: self.route, theta_used })
    }
}

/// `{2}` together with the odd primes dividing `m - 2` or some coefficient.
/// At any other prime a form of rank at least 3 is universal.
pub fn relevant_primes(f: &MGonalForm) -> Vec<u64> {
    let mut primes = BTreeSet::from([2u64]);
    primes.extend(prime_factors(f.m() - 2));
    for &a in f.coeffs() {
        primes.extend(prime_factors(a));
    }
    primes.into_iter().collect()
}

/// Local verdicts at every prime that can matter for `n`.
///
/// For rank at most 2 the odd primes dividing `theta(n)` are added, since a
/// unimodular binary form can fail to represent multiples of `p`.
pub fn local_verdicts(f: &MGonalForm, n: &BigInt) -> Result<Vec<LocalVerdict>> {
    let primes = primes_for_target(f, n)?;
    primes.into_iter().map(|p| represents_locally_at(f, n, p)).collect()
}

fn primes_for_target(f: &MGonalForm, n: &BigInt) -> Result<Vec<u64>> {
    let mut primes: BTreeSet<u64> = relevant_primes(f).into_iter().collect();
    if f.rank() <= 2 {
        let theta = f.shift(n, ShiftKind::Generic)?.theta;
        if !theta.is_zero() {
            let t = theta
                .to_u64()
                .ok_or_else(|| Error::Unsupported("factoring theta beyond 64 bits for rank <= 2".into()))?;
            primes.extend(prime_factors(t).into_iter().filter(|&p| p != 2));
        }
    }
    Ok(primes.into_iter().collect())
}

/// A rank-one form `<1>` locally represents `N` only when `theta(N)` is a
/// perfect square: a non-square is a non-residue at infinitely many primes.
fn rank_one_square(f: &MGonalForm, n: &BigInt) -> Result<bool> {
    let t = f.shift(n, ShiftKind::Generic)?;
    let a = f.coeffs()[0] as u128;
    match t.theta.to_u128().and_then(|v| v.checked_mul(a)) {
        Some(v) => Ok(is_perfect_square(v)),
        None => {
            let v = &t.theta * BigInt::from(a);
            let r = v.sqrt();
            Ok(&r * &r == v)
        }
    }
}

pub fn represents_locally(f: &MGonalForm, n: &BigInt) -> Result<bool> {
    if f.rank() == 1 && !rank_one_square(f, n)? {
        return Ok(false);
    }
    for v in local_verdicts(f, n)? {
        if !v.represented {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeUniversality {
    pub p: u64,
    pub route: Route,
    pub universal: bool,
}

/// Universality over `Z_p` at each relevant prime. On the shifted routes the
/// map `N -> theta(N)` is an affine bijection of `Z_p`, so the form is
/// universal exactly when the quadratic form is.
pub fn universality_by_prime(f: &MGonalForm) -> Result<Vec<PrimeUniversality>> {
    let q = f.quadratic();
    relevant_primes(f)
        .into_iter()
        .map(|p| {
            let route = Route::for_prime(f.m(), p);
            let universal = match route.shift_kind() {
                None => true,
                Some(kind) => {
                    let scale = f.shift_u64(0, kind)?.scale;
                    assert!(scale % p != 0, "shift scale must be a unit on this route");
                    is_pe_universal(&q, p, 0)?
                }
            };
            Ok(PrimeUniversality { p, route, universal })
        })
        .collect()
}

/// Universal over every `Z_p`. Forms of rank at most 2 never are: infinitely
/// many primes see an anisotropic unimodular binary form.
pub fn is_locally_universal(f: &MGonalForm) -> Result<bool> {
    if f.rank() <= 2 {
        return Ok(false);
    }
    Ok(universality_by_prime(f)?.iter().all(|u| u.universal))
}

/// Precomputed local checks for repeated queries against one form.
pub struct LocalChecker {
    form: MGonalForm,
    primes: Vec<PrimeCheck>,
}

impl LocalChecker {
    pub fn new(f: &MGonalForm) -> Result<Self> {
        let primes = relevant_primes(f).into_iter().map(|p| PrimeCheck::new(f, p)).collect::<Result<_>>()?;
        Ok(Self { form: f.clone(), primes })
    }

    pub fn form(&self) -> &MGonalForm {
        &self.form
    }

    pub fn represents(&self, n: &BigInt) -> Result<bool> {
        Ok(self.first_failure(n)?.is_none())
    }

    pub fn represents_u64(&self, n: u64) -> Result<bool> {
        self.represents(&BigInt::from(n))
    }

    /// The first prime at which `n` is not represented, if any. Rank-one
    /// failures of the square condition are reported at the prime 0.
    pub fn first_failure(&self, n: &BigInt) -> Result<Option<u64>> {
        let f = &self.form;
        if f.rank() == 1 && !rank_one_square(f, n)? {
            return Ok(Some(0));
        }
        for check in &self.primes {
            if !check.verdict(f, n)?.represented {
                return Ok(Some(check.p));
            }
        }
        if f.rank() <= 2 {
            let known: BTreeSet<u64> = self.primes.iter().map(|c| c.p).collect();
            for p in primes_for_target(f, n)? {
                if !known.contains(&p) && !PrimeCheck::new(f, p)?.verdict(f, n)?.represented {
                    return Ok(Some(p));
                }
            }
        }
        Ok(None)
    }
}
