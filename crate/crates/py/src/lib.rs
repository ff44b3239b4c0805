//! Python bindings: corpus indexing, the verifying engine, the comparison
//! systems and the citation and answer metrics.

use std::path::PathBuf;
use std::sync::Mutex;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyTypeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyList, PyString};

use attest_core::backends::{
    CompletionBackend, CompletionRequest, CompletionResponse, ContainmentJudge, EntailmentJudge, EntailmentVerdict,
    RemoteJudge, RetryPolicy, ScriptedLlm,
};
use attest_core::baselines::{BaselineSystem, Baselines};
use attest_core::config::{BaselineConfig, EngineConfig};
use attest_core::corpus::{LexicalIndex, Retriever};
use attest_core::eval;
use attest_core::pipeline::Engine;
use attest_core::prompts::Templates;
use attest_core::response::{renumber_citations, VerifiedResponse};
use attest_core::text::whitespace_tokens;
use attest_core::verification;
use attest_core::{AnswerUnit, BackendError, Document, Error, Question};

create_exception!(attest, AttestError, PyException);

fn to_py(e: Error) -> PyErr {
    AttestError::new_err(e.to_string())
}

#[pyclass(name = "Document", module = "attest", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyDocument {
    inner: Document,
}

#[pymethods]
impl PyDocument {
    #[new]
    #[pyo3(signature = (id, text, title = String::new()))]
    fn new(id: String, text: String, title: String) -> PyResult<Self> {
        if id.is_empty() || text.trim().is_empty() {
            return Err(PyValueError::new_err("document id and text must be non-empty"));
        }
        Ok(Self {
            inner: Document::new(id, title, text),
        })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn title(&self) -> &str {
        &self.inner.title
    }

    #[getter]
    fn text(&self) -> &str {
        &self.inner.text
    }

    fn __repr__(&self) -> String {
        format!("Document(id={:?}, title={:?}, text={:?})", self.inner.id, self.inner.title, self.inner.text)
    }
}

fn documents(docs: Vec<PyDocument>) -> Vec<Document> {
    docs.into_iter().map(|d| d.inner).collect()
}

/// BM25 index over a document collection.
#[pyclass(name = "Index", module = "attest", frozen)]
struct PyIndex {
    inner: LexicalIndex,
}

#[pymethods]
impl PyIndex {
    #[new]
    fn new(documents_: Vec<PyDocument>) -> PyResult<Self> {
        Ok(Self {
            inner: LexicalIndex::build(documents(documents_)).map_err(to_py)?,
        })
    }

    /// Build from a JSONL corpus file of `{"id", "title", "text"}` records.
    #[staticmethod]
    fn from_corpus(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: LexicalIndex::from_corpus_file(&path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: LexicalIndex::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    /// Up to `n` `(document, score)` pairs, best first.
    #[pyo3(signature = (query, n = 5))]
    fn retrieve(&self, query: &str, n: usize) -> PyResult<Vec<(PyDocument, f64)>> {
        let hits = self.inner.retrieve(query, n).map_err(to_py)?;
        Ok(hits
            .into_iter()
            .map(|h| (PyDocument { inner: h.document }, h.score))
            .collect())
    }

    fn get(&self, id: &str) -> Option<PyDocument> {
        use attest_core::DocumentLookup;
        self.inner.document(id).map(|d| PyDocument { inner: d.clone() })
    }

    #[getter]
    fn fingerprint(&self) -> &str {
        self.inner.fingerprint()
    }

    fn __len__(&self) -> usize {
        self.inner.documents().len()
    }
}

/// The deterministic containment judge: entailed iff every content word of
/// the hypothesis occurs in the premise.
#[pyclass(name = "ContainmentJudge", module = "attest", frozen)]
struct PyContainmentJudge;

#[pymethods]
impl PyContainmentJudge {
    #[new]
    fn new() -> Self {
        Self
    }

    /// `(entailed, score)`.
    fn judge(&self, premise: &str, hypothesis: &str) -> (bool, f64) {
        let v = ContainmentJudge::verdict(premise, hypothesis);
        (v.entailed, v.score)
    }
}

/// Holds the first Python exception raised inside a callback so that it can
/// be re-raised unchanged once the run unwinds.
#[derive(Default)]
struct Raised(Mutex<Option<PyErr>>);

impl Raised {
    fn keep(&self, err: PyErr) -> BackendError {
        let msg = err.to_string();
        self.0.lock().unwrap().get_or_insert(err);
        BackendError::Transport(format!("python callback raised {msg}"))
    }

    fn take(&self) -> Option<PyErr> {
        self.0.lock().unwrap().take()
    }
}

/// A Python callable `prompt -> str` used as the completion model.
struct CallbackLlm {
    callable: Py<PyAny>,
    raised: Raised,
}

impl CompletionBackend for CallbackLlm {
    fn name(&self) -> String {
        "python:callable".into()
    }

    fn complete_raw(&self, req: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let text = Python::attach(|py| {
            self.callable
                .bind(py)
                .call1((req.prompt.as_str(),))
                .and_then(|out| out.extract::<String>())
        })
        .map_err(|e| self.raised.keep(e))?;
        Ok(CompletionResponse {
            prompt_tokens: whitespace_tokens(&req.prompt),
            completion_tokens: whitespace_tokens(&text),
            text,
        })
    }
}

/// A Python callable `(premise, hypothesis) -> bool | float` used as the
/// judge. A float is read as the entailment score, entailed at 0.5 or above.
struct CallbackJudge {
    callable: Py<PyAny>,
    raised: Raised,
}

impl EntailmentJudge for CallbackJudge {
    fn name(&self) -> String {
        "python:callable".into()
    }

    fn judge_raw(&self, premise: &str, hypothesis: &str) -> Result<EntailmentVerdict, BackendError> {
        Python::attach(|py| {
            let out = self.callable.bind(py).call1((premise, hypothesis))?;
            if let Ok(b) = out.extract::<bool>() {
                return Ok(EntailmentVerdict {
                    entailed: b,
                    score: b as u8 as f64,
                });
            }
            let score: f64 = out.extract()?;
            Ok(EntailmentVerdict {
                entailed: score >= 0.5,
                score,
            })
        })
        .map_err(|e| self.raised.keep(e))
    }
}

enum Llm {
    Script(ScriptedLlm),
    Callback(CallbackLlm),
}

impl Llm {
    fn from_py(obj: &Bound<'_, PyAny>) -> PyResult<Self> {
        if obj.is_instance_of::<PyList>() {
            return Ok(Llm::Script(ScriptedLlm::new(obj.extract::<Vec<String>>()?)));
        }
        if obj.is_callable() {
            return Ok(Llm::Callback(CallbackLlm {
                callable: obj.clone().unbind(),
                raised: Raised::default(),
            }));
        }
        Err(PyTypeError::new_err("llm must be a list of completions or a callable prompt -> str"))
    }

    fn backend(&self) -> &dyn CompletionBackend {
        match self {
            Llm::Script(s) => s,
            Llm::Callback(c) => c,
        }
    }

    fn raised(&self) -> Option<PyErr> {
        match self {
            Llm::Script(_) => None,
            Llm::Callback(c) => c.raised.take(),
        }
    }
}

enum Judge {
    Containment(ContainmentJudge),
    Remote(RemoteJudge),
    Callback(CallbackJudge),
}

impl Judge {
    /// `None` for the containment judge, a URL for the entailment service,
    /// or a callable.
    fn from_py(obj: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let Some(obj) = obj else {
            return Ok(Judge::Containment(ContainmentJudge::new()));
        };
        if obj.is_instance_of::<PyContainmentJudge>() {
            return Ok(Judge::Containment(ContainmentJudge::new()));
        }
        if obj.is_instance_of::<PyString>() {
            let url: String = obj.extract()?;
            let judge = RemoteJudge::new(url, 0.5, RetryPolicy::default());
            judge.health().map_err(|e| AttestError::new_err(format!("entailment service unavailable: {e}")))?;
            return Ok(Judge::Remote(judge));
        }
        if obj.is_callable() {
            return Ok(Judge::Callback(CallbackJudge {
                callable: obj.clone().unbind(),
                raised: Raised::default(),
            }));
        }
        Err(PyTypeError::new_err("judge must be None, a ContainmentJudge, a service URL or a callable"))
    }

    fn backend(&self) -> &dyn EntailmentJudge {
        match self {
            Judge::Containment(j) => j,
            Judge::Remote(j) => j,
            Judge::Callback(j) => j,
        }
    }

    fn raised(&self) -> Option<PyErr> {
        match self {
            Judge::Callback(j) => j.raised.take(),
            _ => None,
        }
    }
}

fn fail(err: Error, llm: Option<&Llm>, judge: &Judge) -> PyErr {
    llm.and_then(Llm::raised).or_else(|| judge.raised()).unwrap_or_else(|| to_py(err))
}

fn response_to_py<'py>(py: Python<'py>, resp: VerifiedResponse, trace: bool) -> PyResult<Bound<'py, PyAny>> {
    let resp = if trace { resp } else { resp.without_trace() };
    let text = serde_json::to_string(&resp).map_err(|e| AttestError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn units(raw: Vec<(String, Vec<String>)>) -> Vec<AnswerUnit> {
    raw.into_iter().map(|(claim, cites)| AnswerUnit::new(claim, cites)).collect()
}

/// Answer `question` with the verifying engine. Returns the response as a
/// dict with `units`, `token_usage` and, when `trace` is set, `trace`.
#[pyfunction]
#[pyo3(signature = (
    question, index, llm, judge = None, *, max_trials = 3, query_count = 2, docs_per_query = 3,
    initial_docs = 5, question_id = "q", trace = false
))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    question: &str,
    index: &PyIndex,
    llm: &Bound<'py, PyAny>,
    judge: Option<&Bound<'py, PyAny>>,
    max_trials: usize,
    query_count: usize,
    docs_per_query: usize,
    initial_docs: usize,
    question_id: &str,
    trace: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let config = EngineConfig {
        max_trials,
        query_count,
        docs_per_query,
        initial_docs,
        ..EngineConfig::default()
    };
    let (llm, judge) = (Llm::from_py(llm)?, Judge::from_py(judge)?);
    let templates = Templates::default();
    let engine = Engine::new(llm.backend(), judge.backend(), &index.inner, &templates, &config);
    let resp = engine
        .run(&Question::new(question_id, question))
        .map_err(|f| fail(f.error, Some(&llm), &judge))?;
    response_to_py(py, resp, trace)
}

/// Answer `question` with one of the single-pass systems: `vanilla`,
/// `summ`, `snippet` or `rerank`.
#[pyfunction]
#[pyo3(signature = (system, question, index, llm, judge = None, *, question_id = "q"))]
fn baseline<'py>(
    py: Python<'py>,
    system: &str,
    question: &str,
    index: &PyIndex,
    llm: &Bound<'py, PyAny>,
    judge: Option<&Bound<'py, PyAny>>,
    question_id: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let system = match system {
        "vanilla" => BaselineSystem::Vanilla,
        "summ" => BaselineSystem::Summ,
        "snippet" => BaselineSystem::Snippet,
        "rerank" => BaselineSystem::Rerank,
        other => return Err(PyValueError::new_err(format!("unknown system `{other}`"))),
    };
    let (llm, judge) = (Llm::from_py(llm)?, Judge::from_py(judge)?);
    let templates = Templates::default();
    let config = BaselineConfig::default();
    let resp = Baselines::new(llm.backend(), &index.inner, &templates, &config)
        .run(system, judge.backend(), &Question::new(question_id, question))
        .map_err(|e| fail(e, Some(&llm), &judge))?;
    response_to_py(py, resp, false)
}

/// Citation `(recall, precision)` of `(claim, [doc ids])` units whose ids
/// resolve against `index`.
#[pyfunction]
#[pyo3(signature = (units_, index, judge = None))]
fn citation_scores(
    units_: Vec<(String, Vec<String>)>,
    index: &PyIndex,
    judge: Option<&Bound<'_, PyAny>>,
) -> PyResult<(f64, f64)> {
    let judge = Judge::from_py(judge)?;
    let scores = eval::score_citations(judge.backend(), &index.inner, &units(units_), None)
        .map_err(|e| fail(e, None, &judge))?;
    Ok((scores.recall(), scores.precision()))
}

#[pyfunction]
fn citation_f1(recall: f64, precision: f64) -> f64 {
    eval::citation_f1(recall, precision)
}

#[pyfunction]
fn normalize_answer(text: &str) -> String {
    eval::normalize_answer(text)
}

#[pyfunction]
fn exact_match(prediction: &str, golds: Vec<String>) -> f64 {
    eval::exact_match(prediction, &golds)
}

#[pyfunction]
fn token_f1(prediction: &str, golds: Vec<String>) -> f64 {
    eval::token_f1(prediction, &golds)
}

#[pyfunction]
fn rouge_l(prediction: &str, golds: Vec<String>) -> f64 {
    eval::rouge_l(prediction, &golds)
}

/// Leave-one-out reduction of `documents` to a minimal set that still
/// entails `claim`.
#[pyfunction]
#[pyo3(signature = (claim, documents_, judge = None))]
fn simplify(claim: &str, documents_: Vec<PyDocument>, judge: Option<&Bound<'_, PyAny>>) -> PyResult<Vec<PyDocument>> {
    let judge = Judge::from_py(judge)?;
    let kept = verification::simplify(judge.backend(), claim, &documents(documents_))
        .map_err(|e| fail(e, None, &judge))?;
    Ok(kept.into_iter().map(|inner| PyDocument { inner }).collect())
}

/// Render `(claim, [doc ids])` units as text with `[n]` markers numbered by
/// first citation. Returns `(text, [(n, id, title), ...])`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn renumber(units_: Vec<(String, Vec<String>)>, index: &PyIndex) -> PyResult<(String, Vec<(usize, String, String)>)> {
    let resp = VerifiedResponse::new("q", units(units_));
    let rendered = renumber_citations(&resp, &index.inner).map_err(to_py)?;
    let refs = rendered.references.into_iter().map(|r| (r.index, r.id, r.title)).collect();
    Ok((rendered.text, refs))
}

#[pymodule]
fn attest(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AttestError", m.py().get_type::<AttestError>())?;
    m.add_class::<PyDocument>()?;
    m.add_class::<PyIndex>()?;
    m.add_class::<PyContainmentJudge>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    m.add_function(wrap_pyfunction!(citation_scores, m)?)?;
    m.add_function(wrap_pyfunction!(citation_f1, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_answer, m)?)?;
    m.add_function(wrap_pyfunction!(exact_match, m)?)?;
    m.add_function(wrap_pyfunction!(token_f1, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_l, m)?)?;
    m.add_function(wrap_pyfunction!(simplify, m)?)?;
    m.add_function(wrap_pyfunction!(renumber, m)?)?;
    Ok(())
}
