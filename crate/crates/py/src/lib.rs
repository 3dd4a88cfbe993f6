//! Python extension module exposing the main types and operations: prime
//! tables and the prime-power ladder, stick-breaking and window samplers,
//! the coupling pipeline, k-factorizations with their exact laws, and the
//! Dirichlet/Beta helpers.
//!
//! Build with `cargo build --release -p pdc-py`, then import the produced
//! `libpdcoupling.so` as `pdcoupling` (see python/smoke_test.py).

use pdc_core::coupling::{self, Capped};
use pdc_core::dirichlet;
use pdc_core::kfact;
use pdc_core::pd;
use pdc_core::primes;
use pdc_core::rng::{self, UnitRand};
use pdc_core::stats;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyAny, PyDict};

fn err(e: pdc_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Deterministic random stream derived from a seed and a label path.
#[pyclass]
struct Stream {
    inner: rng::Stream,
}

#[pymethods]
impl Stream {
    #[new]
    #[pyo3(signature = (seed, labels=None))]
    fn new(seed: u64, labels: Option<Vec<(String, u64)>>) -> Stream {
        let labels = labels.unwrap_or_else(|| vec![("py".to_string(), 0)]);
        let refs: Vec<(&str, u64)> = labels.iter().map(|(s, i)| (s.as_str(), *i)).collect();
        Stream {
            inner: rng::derive_stream(seed, &refs),
        }
    }

    fn next_unit(&mut self) -> f64 {
        self.inner.next_unit()
    }

    fn next_below(&mut self, n: u64) -> u64 {
        self.inner.next_below(n)
    }
}

/// Sieve-backed prime table with exact theta sums.
#[pyclass]
struct PrimeTable {
    inner: primes::PrimeTable,
}

#[pymethods]
impl PrimeTable {
    #[new]
    fn new(limit: u64) -> PyResult<PrimeTable> {
        Ok(PrimeTable {
            inner: primes::PrimeTable::build(limit).map_err(err)?,
        })
    }

    #[getter]
    fn limit(&self) -> u64 {
        self.inner.limit()
    }

    #[getter]
    fn prime_count(&self) -> usize {
        self.inner.prime_count()
    }

    fn primes_up_to(&self, bound: u64) -> Vec<u64> {
        self.inner
            .primes()
            .iter()
            .copied()
            .take_while(|&p| p <= bound)
            .collect()
    }

    fn theta(&self, y: f64) -> PyResult<f64> {
        self.inner.theta(y).map_err(err)
    }

    fn extra_prime(&self, u: f64, y: f64) -> PyResult<u64> {
        self.inner.extra_prime(u, y).map_err(err)
    }

    fn arith_profile<'py>(&self, py: Python<'py>, n: u64) -> PyResult<Bound<'py, PyDict>> {
        let p = self.inner.arith_profile(n).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("n", p.n)?;
        d.set_item("prime_seq", &p.prime_seq)?;
        d.set_item("factors", &p.factors)?;
        d.set_item("s", p.s)?;
        d.set_item("flat", p.flat)?;
        d.set_item("omega", p.omega)?;
        d.set_item("big_omega", p.big_omega)?;
        Ok(d)
    }

    fn rho_half(&self, n: u64) -> PyResult<u64> {
        Ok(kfact::rho_half(&self.inner.arith_profile(n).map_err(err)?))
    }
}

/// Prime-power ladder with its step function.
#[pyclass]
struct PrimeLadder {
    inner: primes::PrimeLadder,
}

#[pymethods]
impl PrimeLadder {
    #[new]
    fn new(t_max: f64) -> PyResult<PrimeLadder> {
        Ok(PrimeLadder {
            inner: primes::PrimeLadder::build(t_max).map_err(err)?,
        })
    }

    #[getter]
    fn coverage(&self) -> f64 {
        self.inner.coverage()
    }

    #[getter]
    fn lambda0(&self) -> f64 {
        self.inner.lambda0()
    }

    #[getter]
    fn r_sup(&self) -> f64 {
        self.inner.r_sup()
    }

    fn first_prime_powers(&self, count: usize) -> Vec<u64> {
        self.inner.q_values().iter().copied().take(count).collect()
    }

    fn step_h(&self, t: f64) -> PyResult<(f64, f64)> {
        self.inner.step_h(t).map_err(err)
    }

    fn q_at(&self, t: f64) -> PyResult<u64> {
        self.inner.q_at(t).map_err(err)
    }

    fn theta_mgf(&self, alpha: f64) -> PyResult<(f64, f64)> {
        let m = pd::theta_mgf_numeric(&self.inner, alpha).map_err(err)?;
        Ok((m.value, m.quad_err + m.tail_bound))
    }
}

/// Empirical law of M with the pooled overflow atom.
#[pyclass]
struct MuHat {
    inner: coupling::EmpiricalDist,
}

#[pymethods]
impl MuHat {
    #[getter]
    fn x(&self) -> u64 {
        self.inner.x()
    }

    #[getter]
    fn n_samples(&self) -> u64 {
        self.inner.n_samples()
    }

    fn mass(&self, value: u64) -> f64 {
        self.inner.mass(value)
    }

    #[getter]
    fn overflow_mass(&self) -> f64 {
        self.inner.overflow_mass()
    }

    fn tv_to_uniform(&self) -> PyResult<f64> {
        coupling::tv_distance(&self.inner, &coupling::EmpiricalDist::uniform(self.inner.x()))
            .map_err(err)
    }

    fn write_cache(&self, path: String, seed: u64) -> PyResult<()> {
        let mut buf = Vec::new();
        self.inner.write_cache(&mut buf, seed).map_err(err)?;
        std::fs::write(path, buf).map_err(|e| err(e.into()))
    }

    #[staticmethod]
    fn read_cache(path: String) -> PyResult<(MuHat, u64)> {
        let data = std::fs::read(path).map_err(|e| err(e.into()))?;
        let (dist, seed) = coupling::EmpiricalDist::read_cache(data.as_slice()).map_err(err)?;
        Ok((MuHat { inner: dist }, seed))
    }
}

/// The total-variation-optimal pairing against the uniform law.
#[pyclass]
struct Transport {
    inner: coupling::TvTransport,
}

#[pymethods]
impl Transport {
    #[new]
    fn new(mu: &MuHat) -> PyResult<Transport> {
        Ok(Transport {
            inner: coupling::TvTransport::to_uniform(&mu.inner).map_err(err)?,
        })
    }

    #[getter]
    fn dtv(&self) -> f64 {
        self.inner.dtv()
    }

    fn apply(&self, m: u64, a: f64, b: f64) -> Option<u64> {
        self.inner.apply(Capped::Exact(m), a, b).exact()
    }
}

#[pyfunction]
fn estimate_mu(
    x: u64,
    n_samples: u64,
    seed: u64,
    table: &PrimeTable,
    ladder: &PrimeLadder,
) -> PyResult<MuHat> {
    Ok(MuHat {
        inner: coupling::estimate_mu(x, n_samples, seed, &table.inner, &ladder.inner)
            .map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (stream, log_x, tail_tol=None))]
fn sample_gem(stream: &mut Stream, log_x: f64, tail_tol: Option<f64>) -> (Vec<f64>, f64) {
    let g = pd::sample_gem(
        &mut stream.inner,
        log_x,
        tail_tol.unwrap_or(pd::DEFAULT_TAIL_TOL),
    );
    (g.sticks, g.remainder)
}

fn capped_to_py(c: Capped) -> Option<u64> {
    c.exact()
}

#[pyfunction]
fn sample_m<'py>(
    py: Python<'py>,
    stream: &mut Stream,
    x: u64,
    table: &PrimeTable,
    ladder: &PrimeLadder,
) -> PyResult<Bound<'py, PyDict>> {
    let ms = coupling::sample_m(&mut stream.inner, x, &table.inner, &ladder.inner).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("sticks", &ms.gem.sticks)?;
    d.set_item("remainder", ms.gem.remainder)?;
    d.set_item("v", &ms.v)?;
    d.set_item("q_seq", &ms.q_seq)?;
    d.set_item("j", capped_to_py(ms.j))?;
    d.set_item("p_extra", ms.p_extra)?;
    d.set_item("m", capped_to_py(ms.m))?;
    d.set_item("theta", ms.theta.value)?;
    d.set_item("theta_tail_bound", ms.theta.tail_bound)?;
    Ok(d)
}

#[pyfunction]
fn sample_coupled<'py>(
    py: Python<'py>,
    stream: &mut Stream,
    x: u64,
    transport: &Transport,
    table: &PrimeTable,
    ladder: &PrimeLadder,
) -> PyResult<Bound<'py, PyDict>> {
    let cs = coupling::sample_coupled(
        &mut stream.inner,
        x,
        &transport.inner,
        &table.inner,
        &ladder.inner,
    )
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("n", cs.n)?;
    d.set_item("m", capped_to_py(cs.ms.m))?;
    d.set_item("j", capped_to_py(cs.ms.j))?;
    d.set_item("p_extra", cs.ms.p_extra)?;
    d.set_item("l1", cs.l1)?;
    d.set_item("theta", cs.ms.theta.value)?;
    d.set_item("m_equals_n", cs.m_equals_n)?;
    d.set_item("prime_seq", &cs.prof_n.prime_seq)?;
    d.set_item("s", cs.prof_n.s)?;
    if cs.m_equals_n {
        d.set_item("l1_bound_ok", coupling::l1_bound_check(&cs).map_err(err)?)?;
    }
    Ok(d)
}

#[pyfunction]
fn jstar_pmf(j: u64, x: u64, table: &PrimeTable) -> PyResult<(f64, f64)> {
    let p = coupling::jstar_pmf_numeric(j, x, &table.inner).map_err(err)?;
    Ok((p.value, p.err))
}

#[pyfunction]
fn sample_jstar(stream: &mut Stream, ladder: &PrimeLadder, x: u64) -> PyResult<u64> {
    Ok(coupling::sample_jstar(&mut stream.inner, &ladder.inner, x)
        .map_err(err)?
        .0)
}

fn build_spec(k: usize, family: &str, alpha: Option<Vec<f64>>) -> PyResult<kfact::FactorSpec> {
    match family {
        "uniform" => kfact::FactorSpec::uniform(k),
        "recursive" => kfact::FactorSpec::recursive(k),
        "multinomial" => {
            let alpha =
                alpha.ok_or_else(|| PyValueError::new_err("multinomial needs alpha"))?;
            kfact::FactorSpec::multinomial(&alpha)
        }
        other => Err(pdc_core::Error::Config(format!("unknown family {other}"))),
    }
    .map_err(err)
}

#[pyfunction]
fn tau_k(n: u64, k: usize, table: &PrimeTable) -> PyResult<u128> {
    Ok(kfact::tau_k(&table.inner.arith_profile(n).map_err(err)?, k))
}

#[pyfunction]
#[pyo3(signature = (stream, n, k, family, x, table, alpha=None))]
fn sample_kfact<'py>(
    py: Python<'py>,
    stream: &mut Stream,
    n: u64,
    k: usize,
    family: &str,
    x: u64,
    table: &PrimeTable,
    alpha: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = build_spec(k, family, alpha)?;
    let prof = table.inner.arith_profile(n).map_err(err)?;
    let kf = kfact::sample_kfact(&mut stream.inner, &spec, &prof, x).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("d", &kf.d)?;
    d.set_item("delta", &kf.delta)?;
    d.set_item("delta_star", &kf.delta_star)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (k, family, x, u, table, alpha=None))]
fn exact_joint_law(
    k: usize,
    family: &str,
    x: u64,
    u: Vec<f64>,
    table: &PrimeTable,
    alpha: Option<Vec<f64>>,
) -> PyResult<(f64, bool, f64)> {
    let spec = build_spec(k, family, alpha)?;
    let law = kfact::exact_joint_law(&spec, x, &u, &table.inner).map_err(err)?;
    Ok((law.value, law.exact, law.err))
}

#[pyfunction]
fn rho_psi(sticks: Vec<f64>, remainder: f64) -> (f64, f64) {
    let i = kfact::rho_psi(&sticks, remainder);
    (i.lo, i.hi)
}

#[pyfunction]
fn beta_cdf(a: f64, b: f64, u: f64) -> PyResult<f64> {
    dirichlet::beta_cdf(a, b, u).map_err(err)
}

#[pyfunction]
fn sample_dirichlet(stream: &mut Stream, alpha: Vec<f64>) -> PyResult<Vec<f64>> {
    let params = dirichlet::DirichletParams::new(&alpha).map_err(err)?;
    Ok(dirichlet::sample_dirichlet(&mut stream.inner, &params))
}

#[pyfunction]
fn dirichlet_cdf(
    stream: &mut Stream,
    alpha: Vec<f64>,
    u: Vec<f64>,
    budget: u64,
) -> PyResult<(f64, f64)> {
    let params = dirichlet::DirichletParams::new(&alpha).map_err(err)?;
    let r = dirichlet::dirichlet_cdf(&mut stream.inner, &params, &u, budget).map_err(err)?;
    Ok((r.estimate, r.stderr))
}

/// One colored-partition draw: GEM sticks colored i.i.d. by alpha, per-color
/// sums returned.
#[pyfunction]
fn dt_sample(stream: &mut Stream, alpha: Vec<f64>) -> PyResult<Vec<f64>> {
    let gem = pd::sample_gem(&mut stream.inner, 1.0, dirichlet::DT_TAIL_TOL);
    let (v, rem) = pd::sort_to_pd(&gem);
    let colors = dirichlet::draw_colors(&mut stream.inner, v.len(), &alpha);
    dirichlet::dt_partition(&v, rem, &colors, alpha.len()).map_err(err)
}

#[pyfunction]
fn ks_test(mut samples: Vec<f64>, cdf: Bound<'_, PyAny>) -> PyResult<(f64, f64)> {
    let n = samples.len() as u64;
    let d = stats::ks_stat(&mut samples, |x| {
        cdf.call1((x,))
            .and_then(|v| v.extract::<f64>())
            .unwrap_or(f64::NAN)
    })
    .map_err(err)?;
    Ok((d, stats::ks_pvalue(d, n)))
}

#[pymodule]
fn pdcoupling(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Stream>()?;
    m.add_class::<PrimeTable>()?;
    m.add_class::<PrimeLadder>()?;
    m.add_class::<MuHat>()?;
    m.add_class::<Transport>()?;
    m.add_function(wrap_pyfunction!(estimate_mu, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gem, m)?)?;
    m.add_function(wrap_pyfunction!(sample_m, m)?)?;
    m.add_function(wrap_pyfunction!(sample_coupled, m)?)?;
    m.add_function(wrap_pyfunction!(jstar_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(sample_jstar, m)?)?;
    m.add_function(wrap_pyfunction!(tau_k, m)?)?;
    m.add_function(wrap_pyfunction!(sample_kfact, m)?)?;
    m.add_function(wrap_pyfunction!(exact_joint_law, m)?)?;
    m.add_function(wrap_pyfunction!(rho_psi, m)?)?;
    m.add_function(wrap_pyfunction!(beta_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(sample_dirichlet, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(dt_sample, m)?)?;
    m.add_function(wrap_pyfunction!(ks_test, m)?)?;
    Ok(())
}
