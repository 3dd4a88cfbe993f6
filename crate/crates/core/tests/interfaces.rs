//! External file-format contracts: sieve cache, ladder CSV, empirical-law
//! cache, window CSV, and report serialization.

use pdc_core::coupling::{Capped, EmpiricalDist};
use pdc_core::pd::{sample_r_window, window_csv};
use pdc_core::primes::{PrimeLadder, PrimeTable};
use pdc_core::rng::derive_stream;
use pdc_core::stats::StatReport;

#[test]
fn sieve_cache_bit_layout() {
    let t = PrimeTable::build(64).unwrap();
    let mut buf = Vec::new();
    t.write_cache(&mut buf).unwrap();
    // Magic, then little-endian u64 limit, then LSB-first primality bits.
    assert_eq!(&buf[..4], b"PDC1");
    assert_eq!(u64::from_le_bytes(buf[4..12].try_into().unwrap()), 64);
    let bits = &buf[12..];
    let is_set = |n: usize| bits[n / 8] & (1 << (n % 8)) != 0;
    for n in 0..=64usize {
        let prime = t.primes().binary_search(&(n as u64)).is_ok();
        assert_eq!(is_set(n), prime, "bit {n}");
    }
    // Round trip.
    let back = PrimeTable::read_cache(&mut buf.as_slice()).unwrap();
    assert_eq!(back.primes(), t.primes());
    // Corrupt magic is rejected.
    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(PrimeTable::read_cache(&mut bad.as_slice()).is_err());
}

#[test]
fn ladder_csv_columns() {
    let l = PrimeLadder::build(3.0).unwrap();
    let mut out = Vec::new();
    l.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0], vec!["j", "q_j", "v_j", "lambda_j"]);
    // First rungs: q = 2,3,4 with v = 1,1,2.
    assert_eq!(rows[1][..3], ["1", "2", "1"]);
    assert_eq!(rows[2][..3], ["2", "3", "1"]);
    assert_eq!(rows[3][..3], ["3", "4", "2"]);
    let lam: f64 = rows[1][3].parse().unwrap();
    assert!((lam - l.lambda_values()[1]).abs() < 1e-15);
}

#[test]
fn mu_cache_text_layout() {
    let mut d = EmpiricalDist::new_empty(5);
    for v in [1u64, 1, 3, 5] {
        d.record(Capped::Exact(v));
    }
    d.record(Capped::Over);
    let mut buf = Vec::new();
    d.write_cache(&mut buf, 99).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,n_samples,seed");
    assert_eq!(lines[1], "5,5,99");
    assert_eq!(lines[2], "value,count");
    assert_eq!(lines[3], "1,2");
    assert_eq!(lines[4], "3,1");
    assert_eq!(lines[5], "5,1");
    assert_eq!(lines[6], "overflow,1");
    let (back, seed) = EmpiricalDist::read_cache(buf.as_slice()).unwrap();
    assert_eq!(seed, 99);
    assert_eq!(back, d);
    // Truncated cache is rejected.
    let short = &buf[..buf.len() - 12];
    assert!(EmpiricalDist::read_cache(short).is_err());
}

#[test]
fn window_csv_columns() {
    let mut s = derive_stream(1, &[("wcsv", 0)]);
    let win = sample_r_window(&mut s, 0.5, 5.0);
    let mut out = Vec::new();
    window_csv(&win, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "W,Y");
    assert_eq!(lines.count(), win.points.len());
}

#[test]
fn stat_report_serialization() {
    let r = StatReport::new("theta", 2.25, 0.01, 1000, "mean").with_oracle(2.23, 0.005);
    assert_eq!(StatReport::csv_header(), "name,estimate,stderr,n,oracle,oracle_err");
    let row = r.csv_row();
    let cols: Vec<&str> = row.split(',').collect();
    assert_eq!(cols.len(), 6);
    assert_eq!(cols[0], "theta");
    assert_eq!(cols[3], "1000");
    // Without an oracle the trailing fields stay empty.
    let bare = StatReport::new("x", 1.0, 0.0, 1, "mean").csv_row();
    assert!(bare.ends_with(",,"));
}
