//! Exact rational arithmetic on i128 with overflow detection.
//!
//! Used where mass functions must sum to one exactly. Operations return
//! `None` on overflow so callers can fall back to tracked floating point.

/// Reduced fraction with positive denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rat {
    num: i128,
    den: i128,
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rat {
    pub const ZERO: Rat = Rat { num: 0, den: 1 };
    pub const ONE: Rat = Rat { num: 1, den: 1 };

    pub fn new(num: i128, den: i128) -> Rat {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Rat {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn from_int(n: i128) -> Rat {
        Rat { num: n, den: 1 }
    }

    pub fn numer(&self) -> i128 {
        self.num
    }

    pub fn denom(&self) -> i128 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn checked_add(&self, o: &Rat) -> Option<Rat> {
        let g = gcd(self.den, o.den);
        let (da, db) = (self.den / g, o.den / g);
        // lcm = da * o.den
        let lcm = da.checked_mul(o.den)?;
        let left = self.num.checked_mul(db)?;
        let right = o.num.checked_mul(da)?;
        let num = left.checked_add(right)?;
        Some(Rat::new(num, lcm))
    }

    pub fn checked_sub(&self, o: &Rat) -> Option<Rat> {
        self.checked_add(&Rat {
            num: -o.num,
            den: o.den,
        })
    }

    pub fn checked_mul(&self, o: &Rat) -> Option<Rat> {
        let g1 = gcd(self.num, o.den).max(1);
        let g2 = gcd(o.num, self.den).max(1);
        let num = (self.num / g1).checked_mul(o.num / g2)?;
        let den = (self.den / g2).checked_mul(o.den / g1)?;
        Some(Rat::new(num, den))
    }

    pub fn checked_div(&self, o: &Rat) -> Option<Rat> {
        assert!(o.num != 0, "division by zero rational");
        self.checked_mul(&Rat::new(o.den, o.num))
    }

    /// Positive part `max(self, 0)`.
    pub fn pos_part(&self) -> Rat {
        if self.num > 0 {
            *self
        } else {
            Rat::ZERO
        }
    }
}

impl std::cmp::PartialOrd for Rat {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl std::cmp::Ord for Rat {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reduced with positive denominators; compare via i128 cross products
        // when safe, falling back to f64 (only relevant near overflow).
        match (self.num.checked_mul(other.den), other.num.checked_mul(self.den)) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => self
                .to_f64()
                .partial_cmp(&other.to_f64())
                .unwrap_or(std::cmp::Ordering::Equal),
        }
    }
}
