//! Python bindings: parsing, curation, training, sampling, search and
//! evaluation. Structured results come back as plain dicts and lists.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use blockmol::chem::{descriptors as mol_descriptors, fingerprint, parse_smiles, tanimoto as fp_tanimoto, tokenize as tokenize_smiles, DEFAULT_WIDTH};
use blockmol::curate::{curate_stream, CurationConfig};
use blockmol::decode::{generate, DecodeConfig, TokenChoice};
use blockmol::diffusion::{train, Checkpoint, Sampling, TrainOptions};
use blockmol::fragment::{pad_and_partition, FragmentConfig};
use blockmol::metrics::standard_metrics;
use blockmol::oracle::{builtin_profile, SurrogateOracle};
use blockmol::search::{run_search, GateConfig, SearchConfig, SearchError};
use blockmol::vocab::Vocab;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hands serializable data to Python through `json.loads`.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyfunction]
fn tokenize(smiles: &str) -> PyResult<Vec<String>> {
    let toks = tokenize_smiles(smiles).map_err(value_err)?;
    Ok(toks.texts().into_iter().map(str::to_string).collect())
}

/// `(valid, error message)` for one SMILES string.
#[pyfunction]
fn validate(smiles: &str) -> (bool, Option<String>) {
    match parse_smiles(smiles) {
        Ok(_) => (true, None),
        Err(e) => (false, Some(e.to_string())),
    }
}

#[pyfunction]
fn descriptors(py: Python<'_>, smiles: &str) -> PyResult<Py<PyAny>> {
    let mol = parse_smiles(smiles).map_err(value_err)?;
    to_py(py, &mol_descriptors(&mol))
}

#[pyfunction]
fn tanimoto(a: &str, b: &str) -> PyResult<f64> {
    let fp = |s: &str| -> PyResult<_> { fingerprint(&parse_smiles(s).map_err(value_err)?, DEFAULT_WIDTH).map_err(value_err) };
    fp_tanimoto(&fp(a)?, &fp(b)?).map_err(value_err)
}

/// Survivors in input order and the curation report.
#[pyfunction]
fn curate(py: Python<'_>, smiles: Vec<String>) -> PyResult<(Vec<String>, Py<PyAny>)> {
    let (kept, report) = curate_stream(smiles.iter().map(String::as_str), &CurationConfig::default());
    Ok((kept, to_py(py, &report)?))
}

#[pyfunction]
#[pyo3(signature = (n, seed=42, max_tokens=70))]
fn toy_corpus(n: usize, seed: u64, max_tokens: usize) -> Vec<String> {
    blockmol::toy::toy_corpus(n, max_tokens, seed).0
}

/// Standard metrics of a sample set under the surrogate oracle for `target`.
#[pyfunction]
#[pyo3(signature = (smiles, target="parp1"))]
fn evaluate(py: Python<'_>, smiles: Vec<String>, target: &str) -> PyResult<Py<PyAny>> {
    let profile = builtin_profile(target).map_err(value_err)?;
    let threshold = profile.threshold_ds;
    let mut oracle = SurrogateOracle::new(profile);
    let report = standard_metrics(&smiles, &mut oracle, threshold, &GateConfig::default()).map_err(value_err)?;
    to_py(py, &report)
}

/// A trained predictor with its vocabulary and block layout.
#[pyclass(name = "Model")]
struct PyModel {
    ckpt: Checkpoint,
}

#[pymethods]
impl PyModel {
    /// Trains on `smiles`; lines that fail to tokenize or do not fit are skipped.
    #[staticmethod]
    #[pyo3(signature = (smiles, epochs=30, seed=42, length=72, block=8))]
    fn train(py: Python<'_>, smiles: Vec<String>, epochs: usize, seed: u64, length: usize, block: usize) -> PyResult<Self> {
        let frag = FragmentConfig::new(length, block).map_err(value_err)?;
        py.detach(|| {
            let seqs: Vec<_> = smiles.iter().filter_map(|s| tokenize_smiles(s).ok()).collect();
            let vocab = Vocab::from_corpus(seqs.iter());
            let tensors: Vec<_> = seqs
                .iter()
                .filter_map(|t| vocab.encode(t).ok().and_then(|ids| pad_and_partition(&ids, frag).ok()))
                .collect();
            let opts = TrainOptions { epochs, seed, ..TrainOptions::default() };
            let report = train(&tensors, vocab.len(), &opts).map_err(value_err)?;
            Ok(Self { ckpt: Checkpoint::new(vocab, frag, report.params, seed, report.epoch_losses) })
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Checkpoint::load(path.as_ref()).map(|ckpt| Self { ckpt }).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.ckpt.save(path.as_ref()).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[getter]
    fn epoch_losses(&self) -> Vec<f64> {
        self.ckpt.epoch_losses.clone()
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.ckpt.vocab.len()
    }

    /// Decodes `n` molecules; each entry is `(smiles, valid)`.
    #[pyo3(signature = (n, seed=42, stochastic=false, prefix=None, temperature=1.1, nucleus=1.0))]
    fn sample(
        &self,
        py: Python<'_>,
        n: usize,
        seed: u64,
        stochastic: bool,
        prefix: Option<&str>,
        temperature: f64,
        nucleus: f64,
    ) -> PyResult<Vec<(String, bool)>> {
        let cfg = DecodeConfig {
            length: self.ckpt.fragment.length(),
            window: self.ckpt.fragment.length(),
            batch: n,
            seed,
            sampling: Sampling { temperature, nucleus },
            choice: if stochastic { TokenChoice::Sample } else { TokenChoice::Greedy },
            ..DecodeConfig::default()
        };
        let prefix = prefix.map(|p| self.ckpt.vocab.encode_smiles(p)).transpose().map_err(value_err)?;
        let out = py.detach(|| generate(&self.ckpt.params, &cfg, prefix.as_deref())).map_err(value_err)?;
        out.iter()
            .map(|g| {
                let s = self.ckpt.vocab.decode(&g.body).map_err(value_err)?;
                let ok = g.completed && parse_smiles(&s).is_ok();
                Ok((s, ok))
            })
            .collect()
    }

    /// Gated tree search against the surrogate oracle for `target`.
    #[pyo3(signature = (target="parp1", iterations=1000, seed=42, qed_min=0.5, sa_max=5.0))]
    fn search(&self, py: Python<'_>, target: &str, iterations: usize, seed: u64, qed_min: f64, sa_max: f64) -> PyResult<Py<PyAny>> {
        let profile = builtin_profile(target).map_err(value_err)?;
        let mut cfg = SearchConfig { iterations, seed, ..SearchConfig::default() };
        cfg.gate.qed_min = qed_min;
        cfg.gate.sa_max = sa_max;
        cfg.decode.length = self.ckpt.fragment.length();
        cfg.decode.window = self.ckpt.fragment.length();
        let result = py.detach(|| {
            let mut oracle = SurrogateOracle::new(profile);
            run_search(&self.ckpt.params, &self.ckpt.vocab, &cfg, &mut oracle)
        });
        match result {
            Ok(r) => to_py(py, &r),
            Err(SearchError::OracleUnavailable { partial, .. }) => to_py(py, &*partial),
            Err(e) => Err(value_err(e)),
        }
    }
}

#[pymodule]
#[pyo3(name = "blockmol")]
fn blockmol_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(descriptors, m)?)?;
    m.add_function(wrap_pyfunction!(tanimoto, m)?)?;
    m.add_function(wrap_pyfunction!(curate, m)?)?;
    m.add_function(wrap_pyfunction!(toy_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}
