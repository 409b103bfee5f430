//! Python bindings: key handling, the cipher, the known-plaintext attacks
//! and PGM input/output. Byte sequences cross the boundary as `bytes`.

use hcbreak::analysis;
use hcbreak::attacks::{self, FinalCheck, Kpa1Options, Kpa2Options};
use hcbreak::chaos::{self, HyperState};
use hcbreak::imageio::{self, GrayImage};
use hcbreak::{cipher, AttackReport, CandidateKeystream, Error};
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

create_exception!(
    pyhcbreak,
    DivergenceError,
    PyValueError,
    "The chaotic trajectory left the bounded region."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Divergence { .. } => DivergenceError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Initial state, discarded transient `n0` and seed byte `c0`.
#[pyclass(name = "SecretKey", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
pub struct PySecretKey(pub chaos::SecretKey);

#[pymethods]
impl PySecretKey {
    #[new]
    fn new(x0: f64, y0: f64, z0: f64, w0: f64, n0: u64, c0: u8) -> PyResult<Self> {
        chaos::SecretKey::new(HyperState::new(x0, y0, z0, w0), n0, c0)
            .map(PySecretKey)
            .map_err(to_py)
    }

    /// Parses "x0,y0,z0,w0,n0,c0" (commas or whitespace).
    #[staticmethod]
    fn parse(record: &str) -> PyResult<Self> {
        record.trim().parse().map(PySecretKey).map_err(to_py)
    }

    #[staticmethod]
    fn reference() -> Self {
        PySecretKey(chaos::SecretKey::reference())
    }

    #[getter]
    fn initial(&self) -> (f64, f64, f64, f64) {
        let s = self.0.initial;
        (s.x, s.y, s.z, s.w)
    }

    #[getter]
    fn n0(&self) -> u64 {
        self.0.n0
    }

    #[getter]
    fn c0(&self) -> u8 {
        self.0.c0
    }

    fn record(&self) -> String {
        self.0.to_record()
    }

    fn keystream<'py>(&self, py: Python<'py>, length: usize) -> PyResult<Bound<'py, PyBytes>> {
        keystream(py, self, length)
    }

    fn __repr__(&self) -> String {
        format!("SecretKey('{}')", self.0.to_record())
    }
}

/// One surviving guess of a known-plaintext attack.
#[pyclass(name = "Candidate", frozen)]
pub struct PyCandidate(CandidateKeystream);

#[pymethods]
impl PyCandidate {
    #[getter]
    fn k_l1(&self) -> u8 {
        self.0.k_l1
    }

    #[getter]
    fn k_l(&self) -> u8 {
        self.0.k_l
    }

    #[getter]
    fn implied_c0(&self) -> u8 {
        self.0.implied_c0
    }

    #[getter]
    fn passed_eq3(&self) -> Option<bool> {
        self.0.passed_eq3
    }

    #[getter]
    fn passed_eq5(&self) -> bool {
        self.0.passed_eq5
    }

    #[getter]
    fn score(&self) -> Option<f64> {
        self.0.score
    }

    #[getter]
    fn keystream<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.0.keystream)
    }

    /// Whether `k` equals this keystream up to a global top-bit flip.
    fn same_class(&self, k: &[u8]) -> bool {
        self.0.same_class(k)
    }

    /// Decrypts `cipher`; `c0` defaults to the value implied by the known pair.
    #[pyo3(signature = (cipher, c0=None))]
    fn decrypt<'py>(&self, py: Python<'py>, cipher: &[u8], c0: Option<u8>) -> PyResult<Bound<'py, PyBytes>> {
        let p = self.0.apply(cipher, c0).map_err(to_py)?;
        Ok(PyBytes::new(py, &p))
    }

    fn __repr__(&self) -> String {
        format!(
            "Candidate(k_l1={}, k_l={}, implied_c0={})",
            self.0.k_l1, self.0.k_l, self.0.implied_c0
        )
    }
}

#[pyclass(name = "AttackReport", frozen)]
pub struct PyAttackReport(AttackReport);

#[pymethods]
impl PyAttackReport {
    #[getter]
    fn attack(&self) -> &str {
        &self.0.attack
    }

    #[getter]
    fn length(&self) -> usize {
        self.0.length
    }

    #[getter]
    fn guesses_tested(&self) -> u64 {
        self.0.guesses_tested
    }

    #[getter]
    fn work_ops(&self) -> u64 {
        self.0.work_ops
    }

    #[getter]
    fn wall_time_ms(&self) -> f64 {
        self.0.elapsed.as_secs_f64() * 1e3
    }

    #[getter]
    fn notes(&self) -> Vec<String> {
        self.0.notes.clone()
    }

    #[getter]
    fn candidates(&self) -> Vec<PyCandidate> {
        self.0.candidates.iter().cloned().map(PyCandidate).collect()
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    fn __len__(&self) -> usize {
        self.0.candidates.len()
    }
}

#[pyfunction]
fn keystream<'py>(py: Python<'py>, key: &PySecretKey, length: usize) -> PyResult<Bound<'py, PyBytes>> {
    let ks = chaos::keystream(&key.0, length).map_err(to_py)?;
    Ok(PyBytes::new(py, ks.as_bytes()))
}

#[pyfunction]
fn quantize(v: f64) -> u8 {
    chaos::quantize(v)
}

#[pyfunction]
fn encrypt<'py>(py: Python<'py>, plain: &[u8], k: &[u8], c0: u8) -> PyResult<Bound<'py, PyBytes>> {
    let c = cipher::encrypt(plain, k, c0).map_err(to_py)?;
    Ok(PyBytes::new(py, &c))
}

#[pyfunction]
fn decrypt<'py>(py: Python<'py>, cipher_bytes: &[u8], k: &[u8], c0: u8) -> PyResult<Bound<'py, PyBytes>> {
    let p = cipher::decrypt(cipher_bytes, k, c0).map_err(to_py)?;
    Ok(PyBytes::new(py, &p))
}

/// Encrypts with the keystream derived from `key`.
#[pyfunction]
fn encrypt_with_key<'py>(py: Python<'py>, plain: &[u8], key: &PySecretKey) -> PyResult<Bound<'py, PyBytes>> {
    let ks = chaos::keystream(&key.0, plain.len()).map_err(to_py)?;
    encrypt(py, plain, &ks, key.0.c0)
}

#[pyfunction]
fn decrypt_with_key<'py>(py: Python<'py>, cipher_bytes: &[u8], key: &PySecretKey) -> PyResult<Bound<'py, PyBytes>> {
    let ks = chaos::keystream(&key.0, cipher_bytes.len()).map_err(to_py)?;
    decrypt(py, cipher_bytes, &ks, key.0.c0)
}

/// One known plaintext/ciphertext pair.
#[pyfunction]
#[pyo3(signature = (plain, cipher, c0=None, require_both=true))]
fn kpa_one(
    py: Python<'_>,
    plain: &[u8],
    cipher: &[u8],
    c0: Option<u8>,
    require_both: bool,
) -> PyResult<PyAttackReport> {
    let opts = Kpa1Options { c0, require_both };
    py.detach(|| attacks::kpa_one(plain, cipher, &opts))
        .map(PyAttackReport)
        .map_err(to_py)
}

/// Two known pairs under the same keystream.
#[pyfunction]
#[pyo3(signature = (plain1, cipher1, plain2, cipher2, c0=None, either_final=false))]
fn kpa_two(
    py: Python<'_>,
    plain1: &[u8],
    cipher1: &[u8],
    plain2: &[u8],
    cipher2: &[u8],
    c0: Option<u8>,
    either_final: bool,
) -> PyResult<PyAttackReport> {
    let opts = Kpa2Options {
        final_check: if either_final {
            FinalCheck::Either
        } else {
            FinalCheck::Both
        },
        c0,
    };
    py.detach(|| attacks::kpa_two(plain1, cipher1, plain2, cipher2, &opts))
        .map(PyAttackReport)
        .map_err(to_py)
}

type PositionPairs = (usize, Vec<(u8, u8)>);

/// Candidate `(t, k)` pairs per 1-based position for an all-zero plaintext.
#[pyfunction]
#[pyo3(signature = (cipher, c0=None))]
fn cpa_candidates(cipher: &[u8], c0: Option<u8>) -> PyResult<Vec<PositionPairs>> {
    let report = attacks::cpa_fatih(cipher, c0).map_err(to_py)?;
    Ok(report.positions.into_iter().map(|p| (p.position, p.pairs)).collect())
}

#[pyfunction]
fn score_recovery(reference: &[u8], recovered: &[u8]) -> PyResult<f64> {
    attacks::score_recovery(reference, recovered).map_err(to_py)
}

/// Exhaustive check of the top-bit addition identity for `bits`-bit words.
#[pyfunction]
fn top_bit_identity_holds(bits: u32) -> PyResult<bool> {
    analysis::prop2_identity(bits).map(|r| r.passed()).map_err(to_py)
}

#[pyfunction]
fn flip_equivalence(plain: &[u8], k: &[u8], c0: u8) -> PyResult<bool> {
    analysis::keystream_flip_equivalence(plain, k, c0).map_err(to_py)
}

/// Returns `(width, height, pixels)`.
#[pyfunction]
fn read_pgm<'py>(py: Python<'py>, path: &str) -> PyResult<(usize, usize, Bound<'py, PyBytes>)> {
    let img = imageio::load_pgm(path).map_err(to_py)?;
    Ok((img.width, img.height, PyBytes::new(py, &img.pixels)))
}

#[pyfunction]
fn write_pgm(path: &str, width: usize, height: usize, pixels: &[u8]) -> PyResult<()> {
    let img = GrayImage::new(width, height, pixels.to_vec()).map_err(to_py)?;
    imageio::save_pgm(path, &img).map_err(to_py)
}

#[pymodule]
pub fn pyhcbreak(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    m.add_class::<PySecretKey>()?;
    m.add_class::<PyCandidate>()?;
    m.add_class::<PyAttackReport>()?;
    m.add_function(wrap_pyfunction!(keystream, m)?)?;
    m.add_function(wrap_pyfunction!(quantize, m)?)?;
    m.add_function(wrap_pyfunction!(encrypt, m)?)?;
    m.add_function(wrap_pyfunction!(decrypt, m)?)?;
    m.add_function(wrap_pyfunction!(encrypt_with_key, m)?)?;
    m.add_function(wrap_pyfunction!(decrypt_with_key, m)?)?;
    m.add_function(wrap_pyfunction!(kpa_one, m)?)?;
    m.add_function(wrap_pyfunction!(kpa_two, m)?)?;
    m.add_function(wrap_pyfunction!(cpa_candidates, m)?)?;
    m.add_function(wrap_pyfunction!(score_recovery, m)?)?;
    m.add_function(wrap_pyfunction!(top_bit_identity_holds, m)?)?;
    m.add_function(wrap_pyfunction!(flip_equivalence, m)?)?;
    m.add_function(wrap_pyfunction!(read_pgm, m)?)?;
    m.add_function(wrap_pyfunction!(write_pgm, m)?)?;
    Ok(())
}
