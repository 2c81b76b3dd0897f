use std::fmt;
use std::path::Path;

use pg_forge_core::corpus_vert::VertError;
use pg_forge_core::greek_text::GreekTextError;
use pg_forge_core::layout_eval::LayoutEvalError;
use pg_forge_core::layout_model::LayoutError;
use pg_forge_core::ocr_eval::EvalError;
use pg_forge_core::pipeline::PipelineError;
use pg_forge_core::text_pipeline::TextPipelineError;

/// Failure classes and their exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Parse = 2,
    Validation = 3,
    Io = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Failure,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn fail(kind: Failure, error: impl Into<anyhow::Error>) -> CliError {
    CliError {
        kind,
        error: error.into(),
    }
}

pub fn validation(msg: impl fmt::Display) -> CliError {
    fail(Failure::Validation, anyhow::anyhow!("{msg}"))
}

pub fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| fail(Failure::Io, anyhow::Error::new(e).context(path.display().to_string()))
}

impl From<GreekTextError> for CliError {
    fn from(e: GreekTextError) -> Self {
        let kind = match e {
            GreekTextError::Io(_) => Failure::Io,
            _ => Failure::Parse,
        };
        fail(kind, e)
    }
}

impl From<LayoutError> for CliError {
    fn from(e: LayoutError) -> Self {
        let kind = match e {
            LayoutError::Io { .. } => Failure::Io,
            LayoutError::DegeneratePolygon => Failure::Validation,
            _ => Failure::Parse,
        };
        fail(kind, e)
    }
}

impl From<LayoutEvalError> for CliError {
    fn from(e: LayoutEvalError) -> Self {
        match e {
            LayoutEvalError::Layout(inner) => inner.into(),
            e => fail(Failure::Validation, e),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        let kind = match e {
            EvalError::Io { .. } => Failure::Io,
            EvalError::Manifest { .. } => Failure::Parse,
            _ => Failure::Validation,
        };
        fail(kind, e)
    }
}

impl From<VertError> for CliError {
    fn from(e: VertError) -> Self {
        let kind = match e {
            VertError::Io(_) => Failure::Io,
            VertError::MalformedVert { .. } | VertError::MalformedLexicon { .. } => Failure::Parse,
            _ => Failure::Validation,
        };
        fail(kind, e)
    }
}

impl From<TextPipelineError> for CliError {
    fn from(e: TextPipelineError) -> Self {
        fail(Failure::Validation, e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let PipelineError::Page { path, source } = e;
        let inner: CliError = source.into();
        CliError {
            kind: inner.kind,
            error: inner.error.context(path.display().to_string()),
        }
    }
}
