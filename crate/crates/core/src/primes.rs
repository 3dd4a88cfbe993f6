//! Exact integer-arithmetic substrate: sieve-backed prime tables, Chebyshev's
//! theta function, the prime-power ladder with its step function `h` and
//! deviation `r`, and arithmetic profiles of integers.
//!
//! Theta is always computed exactly from the sieve, never from asymptotic
//! formulas. Factoring beyond the sieve limit falls back to trial division by
//! tabled primes, which is exact for `n` up to `limit^2`.

use crate::{Error, Result};
use std::io::{Read, Write};

/// Euler-Mascheroni constant, full double precision.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_6;

/// `exp(-EULER_GAMMA)`, the base rung of the ladder.
pub const EXP_NEG_GAMMA: f64 = 0.561_459_483_566_885_1;

/// Hard memory bound for [`PrimeTable::build`] (the per-integer least-factor
/// table dominates at 4 bytes per integer).
pub const MAX_TABLE_LIMIT: u64 = 1 << 31;

/// Largest ladder coverage we allow; the sieve behind the ladder grows like
/// `exp(t_max)`.
pub const MAX_LADDER_T: f64 = 18.0;

const CACHE_MAGIC: &[u8; 4] = b"PDC1";

/// Sieve-backed tables: primes, theta prefix sums, least prime factors.
#[derive(Clone, Debug)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
    /// `theta_prefix[i]` = sum of `ln p` over the first `i` primes.
    theta_prefix: Vec<f64>,
    /// Least prime factor of `n` for `2 <= n <= limit`; 0 below 2.
    smallest_factor: Vec<u32>,
}

impl PrimeTable {
    pub fn build(limit: u64) -> Result<PrimeTable> {
        if !(2..=MAX_TABLE_LIMIT).contains(&limit) {
            return Err(Error::Capacity(format!(
                "prime table limit {limit} outside [2, {MAX_TABLE_LIMIT}]"
            )));
        }
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut i = 2usize;
        while i * i <= n {
            if spf[i] == 0 {
                let mut m = i * i;
                while m <= n {
                    if spf[m] == 0 {
                        spf[m] = i as u32;
                    }
                    m += i;
                }
            }
            i += 1;
        }
        let mut primes = Vec::new();
        let mut theta_prefix = Vec::new();
        theta_prefix.push(0.0);
        // Kahan summation keeps the prefix error far below the 1e-12 * i budget.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for v in 2..=n {
            if spf[v] == 0 {
                spf[v] = v as u32;
            }
            if spf[v] == v as u32 {
                primes.push(v as u64);
                let y = (v as f64).ln() - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
                theta_prefix.push(sum);
            }
        }
        Ok(PrimeTable {
            limit,
            primes,
            theta_prefix,
            smallest_factor: spf,
        })
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn prime_count(&self) -> usize {
        self.primes.len()
    }

    /// Least prime factor for `2 <= n <= limit`.
    pub fn smallest_factor(&self, n: u64) -> Option<u64> {
        if n < 2 || n > self.limit {
            None
        } else {
            Some(self.smallest_factor[n as usize] as u64)
        }
    }

    /// Chebyshev theta: exact partial sum of `ln p` over primes `p <= y`.
    pub fn theta(&self, y: f64) -> Result<f64> {
        if !(0.0..=self.limit as f64).contains(&y) {
            return Err(Error::Range(format!(
                "theta argument {y} outside [0, {}]",
                self.limit
            )));
        }
        let k = self.primes.partition_point(|&p| p as f64 <= y);
        Ok(self.theta_prefix[k])
    }

    /// Smallest element of {1} union {primes} whose theta value reaches
    /// `u * theta(y)`; equals 1 exactly when `theta(y) = 0`.
    pub fn extra_prime(&self, u: f64, y: f64) -> Result<u64> {
        if !(0.0 < u && u < 1.0) {
            return Err(Error::Domain(format!("extra_prime u={u} not in (0,1)")));
        }
        if y <= 0.0 || y > self.limit as f64 {
            return Err(Error::Range(format!(
                "extra_prime y={y} outside (0, {}]",
                self.limit
            )));
        }
        let th = self.theta(y)?;
        if th == 0.0 {
            return Ok(1);
        }
        let target = u * th;
        // First index i with theta_prefix[i] >= target; prefix[0] = 0 < target.
        let i = self.theta_prefix.partition_point(|&t| t < target);
        Ok(self.primes[i - 1])
    }

    fn factorize(&self, n: u64) -> Result<Vec<(u64, u32)>> {
        if n == 0 {
            return Err(Error::Domain("factorize(0)".into()));
        }
        let mut factors: Vec<(u64, u32)> = Vec::new();
        if n <= self.limit {
            let mut m = n as usize;
            while m > 1 {
                let p = self.smallest_factor[m] as u64;
                let mut e = 0;
                while m as u64 % p == 0 {
                    m /= p as usize;
                    e += 1;
                }
                factors.push((p, e));
            }
        } else {
            if n > self.limit.saturating_mul(self.limit) {
                return Err(Error::Capacity(format!(
                    "cannot factor {n} with sieve limit {}",
                    self.limit
                )));
            }
            let mut m = n;
            for &p in &self.primes {
                if p * p > m {
                    break;
                }
                if m % p == 0 {
                    let mut e = 0;
                    while m % p == 0 {
                        m /= p;
                        e += 1;
                    }
                    factors.push((p, e));
                }
            }
            if m > 1 {
                // Leftover cofactor has no prime factor <= sqrt(n): prime.
                factors.push((m, 1));
                factors.sort_unstable();
            }
        }
        Ok(factors)
    }

    /// Full arithmetic profile of `n`: non-increasing prime sequence,
    /// square-full part, square-free part, omega counts.
    pub fn arith_profile(&self, n: u64) -> Result<ArithProfile> {
        let factors = self.factorize(n)?;
        let mut prime_seq = Vec::new();
        let mut s = 1u64;
        let mut flat = 1u64;
        let mut big_omega = 0u32;
        for &(p, e) in &factors {
            big_omega += e;
            if e >= 2 {
                s *= p.pow(e);
            } else {
                flat *= p;
            }
            for _ in 0..e {
                prime_seq.push(p);
            }
        }
        prime_seq.sort_unstable_by(|a, b| b.cmp(a));
        Ok(ArithProfile {
            n,
            omega: factors.len() as u32,
            big_omega,
            prime_seq,
            factors,
            s,
            flat,
        })
    }

    /// Write the sieve to a versioned binary cache: magic "PDC1", little-endian
    /// u64 limit, then the primality bitset over `[0, limit]` (LSB-first).
    pub fn write_cache<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&self.limit.to_le_bytes())?;
        let nbytes = (self.limit as usize + 8) / 8;
        let mut bits = vec![0u8; nbytes];
        for &p in &self.primes {
            bits[(p / 8) as usize] |= 1 << (p % 8);
        }
        w.write_all(&bits)?;
        Ok(())
    }

    /// Load a sieve cache written by [`PrimeTable::write_cache`]. The
    /// least-factor table is re-derived from the primality bits.
    pub fn read_cache<R: Read>(r: &mut R) -> Result<PrimeTable> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Format("bad sieve cache magic".into()));
        }
        let mut lim = [0u8; 8];
        r.read_exact(&mut lim)?;
        let limit = u64::from_le_bytes(lim);
        if !(2..=MAX_TABLE_LIMIT).contains(&limit) {
            return Err(Error::Format(format!("cache limit {limit} out of range")));
        }
        let nbytes = (limit as usize + 8) / 8;
        let mut bits = vec![0u8; nbytes];
        r.read_exact(&mut bits)?;
        let n = limit as usize;
        let mut spf = vec![0u32; n + 1];
        let mut primes = Vec::new();
        let mut theta_prefix = vec![0.0f64];
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for v in 2..=n {
            if bits[v / 8] & (1 << (v % 8)) != 0 {
                primes.push(v as u64);
                let y = (v as f64).ln() - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
                theta_prefix.push(sum);
                if spf[v] == 0 {
                    spf[v] = v as u32;
                }
                let mut m = v;
                while m <= n {
                    if spf[m] == 0 {
                        spf[m] = v as u32;
                    }
                    m += v;
                }
            }
        }
        Ok(PrimeTable {
            limit,
            primes,
            theta_prefix,
            smallest_factor: spf,
        })
    }
}

/// Prime factorization data of one integer, with its square-full split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArithProfile {
    pub n: u64,
    /// Primes of `n` with multiplicity, non-increasing; empty for n = 1.
    pub prime_seq: Vec<u64>,
    /// `(p, e)` pairs, ascending in `p`.
    pub factors: Vec<(u64, u32)>,
    /// Largest square-full divisor.
    pub s: u64,
    /// `n / s`, square-free and coprime to `s`.
    pub flat: u64,
    pub omega: u32,
    pub big_omega: u32,
}

impl ArithProfile {
    /// Exponent of `p` in `n`.
    pub fn valuation(&self, p: u64) -> u32 {
        self.factors
            .iter()
            .find(|&&(q, _)| q == p)
            .map_or(0, |&(_, e)| e)
    }

    /// All divisors, unsorted.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let len = divs.len();
            let mut pw = 1u64;
            for _ in 0..e {
                pw *= p;
                for i in 0..len {
                    divs.push(divs[i] * pw);
                }
            }
        }
        divs
    }
}

/// The prime-power ladder: prime powers `q_j`, their exponents, and the
/// thresholds `lambda_j = exp(-gamma + sum_{i<=j} 1/(v_i q_i))` with
/// `lambda_0 = exp(-gamma)`. The step function `h` maps `t` in the rung
/// `(lambda_{j-1}, lambda_j]` to `ln q_j`, and `r(t) = |h(t) - t|`.
#[derive(Clone, Debug)]
pub struct PrimeLadder {
    /// Prime powers, ascending; `q[j-1]` pairs with rung `j`.
    q: Vec<u64>,
    v: Vec<u8>,
    log_q: Vec<f64>,
    /// `lambda[0] = exp(-gamma)`; `lambda[j]` closes rung `j`.
    lambda: Vec<f64>,
    r_sup: f64,
    envelope_c: f64,
    tail_c: f64,
}

impl PrimeLadder {
    /// Build the ladder covering `(0, t_max]` (the last rung may extend
    /// slightly beyond `t_max`).
    pub fn build(t_max: f64) -> Result<PrimeLadder> {
        if !(1.0..=MAX_LADDER_T).contains(&t_max) {
            return Err(Error::Capacity(format!(
                "ladder t_max {t_max} outside [1, {MAX_LADDER_T}]"
            )));
        }
        let mut sieve_limit = (t_max.exp() * 1.15 + 64.0) as u64;
        loop {
            let ladder = Self::build_with_sieve(sieve_limit)?;
            if *ladder.lambda.last().unwrap() > t_max {
                return Ok(ladder);
            }
            sieve_limit = sieve_limit * 3 / 2;
        }
    }

    fn build_with_sieve(limit: u64) -> Result<PrimeLadder> {
        let n = limit as usize;
        // Plain bitset sieve; the ladder needs no factor table.
        let mut composite = vec![0u64; n / 64 + 1];
        let is_set = |bits: &[u64], i: usize| bits[i / 64] & (1 << (i % 64)) != 0;
        let mut i = 2usize;
        while i * i <= n {
            if !is_set(&composite, i) {
                let mut m = i * i;
                while m <= n {
                    composite[m / 64] |= 1 << (m % 64);
                    m += i;
                }
            }
            i += 1;
        }
        let mut powers: Vec<(u64, u8)> = Vec::new();
        for p in 2..=limit {
            if !is_set(&composite, p as usize) {
                let mut pw = p;
                let mut e = 1u8;
                loop {
                    powers.push((pw, e));
                    match pw.checked_mul(p) {
                        Some(next) if next <= limit => {
                            pw = next;
                            e += 1;
                        }
                        _ => break,
                    }
                }
            }
        }
        powers.sort_unstable();
        let m = powers.len();
        let mut q = Vec::with_capacity(m);
        let mut v = Vec::with_capacity(m);
        let mut log_q = Vec::with_capacity(m);
        let mut lambda = Vec::with_capacity(m + 1);
        lambda.push(EXP_NEG_GAMMA);
        let mut mert = 0.0f64;
        let mut comp = 0.0f64;
        for (pw, e) in powers {
            let y = 1.0 / (e as f64 * pw as f64) - comp;
            let t = mert + y;
            comp = (t - mert) - y;
            mert = t;
            q.push(pw);
            v.push(e);
            log_q.push((pw as f64).ln());
            lambda.push((-EULER_GAMMA + mert).exp());
        }
        let mut ladder = PrimeLadder {
            q,
            v,
            log_q,
            lambda,
            r_sup: 0.0,
            envelope_c: 0.0,
            tail_c: 0.0,
        };
        ladder.measure_envelopes();
        Ok(ladder)
    }

    /// Within each rung r(t) = |log q - t| is piecewise linear, so suprema are
    /// attained at rung endpoints; below lambda_0, r(t) = t peaks at lambda_0.
    fn measure_envelopes(&mut self) {
        let env = |t: f64| t.min(1.0 / (t * t));
        let mut r_sup = self.lambda[0];
        let mut c = 1.0f64; // r(t)/t = 1 on (0, lambda_0]
        let tail_lo = 0.5 * self.coverage();
        let mut tail_c = 0.0f64;
        for j in 0..self.q.len() {
            let (lo, hi) = (self.lambda[j], self.lambda[j + 1]);
            let lq = self.log_q[j];
            for t in [lo, hi, lq.clamp(lo, hi)] {
                if t <= lo && t != lo {
                    continue;
                }
                let r = (lq - t).abs();
                r_sup = r_sup.max(r);
                c = c.max(r / env(t));
                if t >= tail_lo {
                    tail_c = tail_c.max(r * t * t);
                }
            }
        }
        self.r_sup = r_sup;
        self.envelope_c = c;
        self.tail_c = tail_c;
    }

    /// Largest `t` the ladder can evaluate.
    pub fn coverage(&self) -> f64 {
        *self.lambda.last().unwrap()
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda[0]
    }

    /// Exact supremum of `r(t)` over the coverage.
    pub fn r_sup(&self) -> f64 {
        self.r_sup
    }

    /// Measured constant in `r(t) <= c * min(t, t^-2)`.
    pub fn envelope_c(&self) -> f64 {
        self.envelope_c
    }

    /// Envelope constant `sup r(t) t^2` measured on the top half of coverage;
    /// used to extrapolate tail bounds past the ladder.
    pub fn tail_c(&self) -> f64 {
        self.tail_c
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn q_values(&self) -> &[u64] {
        &self.q
    }

    pub fn lambda_values(&self) -> &[f64] {
        &self.lambda
    }

    /// Rung index for `t`: `None` below `lambda_0`, else `Some(j-1)` indexing
    /// into the prime-power arrays.
    fn rung(&self, t: f64) -> Result<Option<usize>> {
        if t <= 0.0 {
            return Err(Error::Domain(format!("step function argument {t} <= 0")));
        }
        if t > self.coverage() {
            return Err(Error::Range(format!(
                "t={t} beyond ladder coverage {}; rebuild with larger t_max",
                self.coverage()
            )));
        }
        if t <= self.lambda[0] {
            return Ok(None);
        }
        let j = self.lambda.partition_point(|&l| l < t);
        Ok(Some(j - 1))
    }

    /// Step function value and deviation: `(h(t), |h(t) - t|)`.
    pub fn step_h(&self, t: f64) -> Result<(f64, f64)> {
        match self.rung(t)? {
            None => Ok((0.0, t)),
            Some(i) => {
                let h = self.log_q[i];
                Ok((h, (h - t).abs()))
            }
        }
    }

    /// Deviation `r(t)` alone.
    pub fn r(&self, t: f64) -> Result<f64> {
        Ok(self.step_h(t)?.1)
    }

    /// The prime power `exp(h(t))` as an exact integer (1 below the ladder).
    pub fn q_at(&self, t: f64) -> Result<u64> {
        match self.rung(t)? {
            None => Ok(1),
            Some(i) => Ok(self.q[i]),
        }
    }

    /// Like [`q_at`](Self::q_at) but maps arguments beyond coverage to `None`
    /// ("a prime power too large to matter") instead of an error.
    pub fn q_at_or_big(&self, t: f64) -> Result<Option<u64>> {
        if t > self.coverage() {
            Ok(None)
        } else {
            self.q_at(t).map(Some)
        }
    }

    /// Dump the ladder as CSV with columns `j,q_j,v_j,lambda_j`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "j,q_j,v_j,lambda_j")?;
        for j in 0..self.q.len() {
            writeln!(
                w,
                "{},{},{},{:.17}",
                j + 1,
                self.q[j],
                self.v[j],
                self.lambda[j + 1]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> PrimeTable {
        PrimeTable::build(1000).unwrap()
    }

    #[test]
    fn small_prime_lists() {
        let t = PrimeTable::build(10).unwrap();
        assert_eq!(t.primes(), &[2, 3, 5, 7]);
        let t2 = PrimeTable::build(2).unwrap();
        assert_eq!(t2.primes(), &[2]);
    }

    #[test]
    fn pi_of_one_million_against_reference_sieve() {
        // Independent oracle: a plain boolean Eratosthenes sieve.
        let limit = 1_000_000usize;
        let mut is_comp = vec![false; limit + 1];
        let mut count = 0u64;
        for i in 2..=limit {
            if !is_comp[i] {
                count += 1;
                let mut m = i * i;
                while m <= limit {
                    is_comp[m] = true;
                    m += i;
                }
            }
        }
        assert_eq!(count, 78498);
        let t = PrimeTable::build(limit as u64).unwrap();
        assert_eq!(t.prime_count() as u64, count);
    }

    #[test]
    fn theta_small_values() {
        let t = table();
        assert_eq!(t.theta(1.0).unwrap(), 0.0);
        assert!((t.theta(2.0).unwrap() - 2.0f64.ln()).abs() < 1e-15);
        let expected = 210.0f64.ln(); // 2*3*5*7
        assert!((t.theta(10.0).unwrap() - expected).abs() < 1e-12);
        assert!(t.theta(1000.5).is_err());
    }

    #[test]
    fn theta_prefix_error_budget() {
        let t = PrimeTable::build(1_000_000).unwrap();
        // Recompute a few prefix values in f64 pairwise summation order.
        let mut exact = 0.0f64;
        for (i, &p) in t.primes().iter().enumerate() {
            exact += (p as f64).ln();
            if i % 10_000 == 0 {
                let got = t.theta_prefix[i + 1];
                assert!((got - exact).abs() <= 1e-12 * (i as f64 + 1.0) + 1e-12);
            }
        }
    }

    #[test]
    fn extra_prime_examples() {
        let t = table();
        // theta(y) = 0 for y < 2
        assert_eq!(t.extra_prime(0.37, 1.5).unwrap(), 1);
        // u=0.5, y=10: theta(10)=ln 210≈5.347, target≈2.674; theta(3)=ln6≈1.79,
        // theta(5)=ln30≈3.40 -> p=5
        assert_eq!(t.extra_prime(0.5, 10.0).unwrap(), 5);
        assert_eq!(t.extra_prime(0.99, 10.0).unwrap(), 7);
        assert!(t.extra_prime(0.0, 10.0).is_err());
        assert!(t.extra_prime(0.5, 0.0).is_err());
    }

    #[test]
    fn extra_prime_monotone_in_u() {
        let t = table();
        let y = 123.0;
        let mut last = 0;
        for i in 1..100 {
            let u = i as f64 / 100.0;
            let p = t.extra_prime(u, y).unwrap();
            assert!(p >= last);
            assert!(p as f64 <= y);
            last = p;
        }
    }

    #[test]
    fn arith_profile_examples() {
        let t = table();
        let p12 = t.arith_profile(12).unwrap();
        assert_eq!(p12.prime_seq, vec![3, 2, 2]);
        assert_eq!((p12.s, p12.flat, p12.omega, p12.big_omega), (4, 3, 2, 3));
        let p1 = t.arith_profile(1).unwrap();
        assert!(p1.prime_seq.is_empty());
        assert_eq!((p1.s, p1.flat), (1, 1));
        let p360 = t.arith_profile(360).unwrap();
        assert_eq!((p360.s, p360.flat), (72, 5));
        assert!(t.arith_profile(0).is_err());
    }

    #[test]
    fn profile_beyond_limit_by_trial_division() {
        let t = PrimeTable::build(250).unwrap();
        // 9973 is prime and above the limit but below limit^2.
        let p = t.arith_profile(9973).unwrap();
        assert_eq!(p.prime_seq, vec![9973]);
        let q = t.arith_profile(9973 * 4).unwrap();
        assert_eq!(q.prime_seq, vec![9973, 2, 2]);
        assert_eq!(q.s, 4);
        // Beyond limit^2 is a capacity error, not a wrong answer.
        assert!(t.arith_profile(250 * 250 + 1).is_err());
    }

    #[test]
    fn profile_product_identity_and_squarefull_bruteforce() {
        let t = PrimeTable::build(100_000).unwrap();
        for n in 1..=10_000u64 {
            let p = t.arith_profile(n).unwrap();
            assert_eq!(p.prime_seq.iter().product::<u64>().max(1), n);
            assert_eq!(p.s * p.flat, n);
            assert_eq!(gcd(p.s, p.flat), 1);
            // Brute-force largest square-full divisor.
            let mut best = 1;
            for d in 1..=n {
                if n % d == 0 && is_squarefull(d) {
                    best = best.max(d);
                }
            }
            assert_eq!(p.s, best, "n={n}");
        }
        // Spot-check the identity further up.
        for n in (10_001..100_000u64).step_by(997) {
            let p = t.arith_profile(n).unwrap();
            assert_eq!(p.prime_seq.iter().product::<u64>(), n);
        }
    }

    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    fn is_squarefull(mut d: u64) -> bool {
        if d == 1 {
            return true;
        }
        let mut p = 2;
        while p * p <= d {
            if d % p == 0 {
                let mut e = 0;
                while d % p == 0 {
                    d /= p;
                    e += 1;
                }
                if e < 2 {
                    return false;
                }
            }
            p += 1;
        }
        d == 1
    }

    #[test]
    fn divisors_of_profile() {
        let t = table();
        let mut d = t.arith_profile(12).unwrap().divisors();
        d.sort_unstable();
        assert_eq!(d, vec![1, 2, 3, 4, 6, 12]);
    }

    #[test]
    fn ladder_first_prime_powers_and_lambdas() {
        let l = PrimeLadder::build(3.0).unwrap();
        assert_eq!(&l.q_values()[..7], &[2, 3, 4, 5, 7, 8, 9]);
        assert!((l.lambda0() - (-EULER_GAMMA).exp()).abs() < 1e-15);
        assert!((l.lambda0() - 0.561459).abs() < 1e-6);
        let lambda1 = (-EULER_GAMMA + 0.5f64).exp();
        assert!((l.lambda_values()[1] - lambda1).abs() < 1e-15);
        assert!((lambda1 - 0.92569).abs() < 1e-5);
    }

    #[test]
    fn ladder_is_strictly_increasing_and_covers() {
        let l = PrimeLadder::build(10.0).unwrap();
        assert!(l.coverage() > 10.0);
        for w in l.lambda_values().windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn step_h_examples() {
        let l = PrimeLadder::build(3.0).unwrap();
        let (h, r) = l.step_h(0.3).unwrap();
        assert_eq!(h, 0.0);
        assert!((r - 0.3).abs() < 1e-15);
        let (h, _) = l.step_h(0.7).unwrap();
        assert!((h - 2.0f64.ln()).abs() < 1e-15);
        // lambda_2 = exp(-gamma + 1/2 + 1/3) ≈ 1.2919; t = ln 3 ≈ 1.0986 lies
        // in rung 2, so h = ln 3 and r ≈ 0.
        let lambda2 = (-EULER_GAMMA + 0.5 + 1.0 / 3.0f64).exp();
        assert!((lambda2 - 1.2919).abs() < 1e-4);
        assert!((l.lambda_values()[2] - lambda2).abs() < 1e-15);
        let t = 3.0f64.ln();
        let (h, r) = l.step_h(t).unwrap();
        assert!((h - t).abs() < 1e-15);
        assert!(r < 1e-15);
        assert!(l.step_h(0.0).is_err());
        assert!(l.step_h(1e9).is_err());
    }

    #[test]
    fn q_at_matches_step_h() {
        let l = PrimeLadder::build(8.0).unwrap();
        for i in 1..2000 {
            let t = i as f64 * 4e-3;
            let q = l.q_at(t).unwrap();
            let (h, _) = l.step_h(t).unwrap();
            if q == 1 {
                assert_eq!(h, 0.0);
            } else {
                assert!((h - (q as f64).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn r_sup_is_lambda0_and_envelope_finite() {
        let l = PrimeLadder::build(14.0).unwrap();
        // r(t) = t on (0, lambda_0] peaks at lambda_0, and no rung deviation
        // beats it.
        assert!((l.r_sup() - l.lambda0()).abs() < 1e-12);
        assert!(l.envelope_c().is_finite() && l.envelope_c() >= 1.0);
        assert!(l.tail_c() > 0.0 && l.tail_c() < 10.0);
        // Dense grid: r(t) <= c * min(t, t^-2).
        let c = l.envelope_c() + 1e-9;
        let mut t = 1e-3;
        while t < l.coverage() {
            let r = l.r(t).unwrap();
            assert!(r <= c * t.min(1.0 / (t * t)) + 1e-12, "t={t}");
            t *= 1.01;
        }
    }

    #[test]
    fn lambda_tracks_log_q_with_decreasing_decade_envelope() {
        let l = PrimeLadder::build(14.0).unwrap();
        // Measure C with |lambda_j - ln q_j| <= C / (ln q_j)^2 over q >= 100,
        // and require per-decade maxima of the raw gap to decrease.
        let mut c_measured = 0.0f64;
        let mut decade_max = [0.0f64; 7]; // decades 10^2.. / 10^3.. / ...
        for j in 0..l.len() {
            let q = l.q_values()[j];
            if q < 100 {
                continue;
            }
            let gap = (l.lambda_values()[j + 1] - (q as f64).ln()).abs();
            let lq = (q as f64).ln();
            c_measured = c_measured.max(gap * lq * lq);
            let dec = (q as f64).log10().floor() as usize - 2;
            if dec < decade_max.len() {
                decade_max[dec] = decade_max[dec].max(gap);
            }
        }
        assert!(c_measured.is_finite() && c_measured > 0.0);
        let used: Vec<f64> = decade_max.iter().copied().filter(|&x| x > 0.0).collect();
        assert!(used.len() >= 3);
        for w in used.windows(2) {
            assert!(w[1] < w[0], "decade envelope must decrease: {used:?}");
        }
    }

    #[test]
    fn sieve_cache_roundtrip() {
        let t = PrimeTable::build(5000).unwrap();
        let mut buf = Vec::new();
        t.write_cache(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"PDC1");
        let back = PrimeTable::read_cache(&mut buf.as_slice()).unwrap();
        assert_eq!(back.limit(), t.limit());
        assert_eq!(back.primes(), t.primes());
        assert_eq!(back.smallest_factor, t.smallest_factor);
        for i in 0..t.theta_prefix.len() {
            assert!((back.theta_prefix[i] - t.theta_prefix[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn ladder_csv_has_expected_shape() {
        let l = PrimeLadder::build(2.0).unwrap();
        let mut out = Vec::new();
        l.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "j,q_j,v_j,lambda_j");
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "1");
        assert_eq!(first[1], "2");
        assert_eq!(first[2], "1");
    }

    #[test]
    fn gamma_constant_consistency() {
        assert!((EXP_NEG_GAMMA.ln() + EULER_GAMMA).abs() < 1e-15);
    }
}
