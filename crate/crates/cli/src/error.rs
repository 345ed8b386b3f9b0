use std::fmt;

use orthobench::Error;

/// Process exit status classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Validation = 2,
    Runtime = 3,
    Service = 4,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Config,
    Corpus,
    Sample,
    Embed,
    Grid,
    Label,
    Report,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Corpus => "corpus",
            Stage::Sample => "sample",
            Stage::Embed => "embed",
            Stage::Grid => "grid",
            Stage::Label => "label",
            Stage::Report => "report",
        }
    }

    fn hint(self) -> &'static str {
        match self {
            Stage::Config => "fix the configuration file or flags; `orthobench pipeline --help` lists every option",
            Stage::Corpus => "check corpus paths, the file format and the id/corpus/text field names",
            Stage::Sample => "lower the effect size or k_max, or supply n_per_cluster directly",
            Stage::Embed => "vector files must cover every sampled prompt id; for services check the endpoint and token variable",
            Stage::Grid => "inspect the per-trial failures; drop infeasible cells or narrow the k range",
            Stage::Label => "pass --labels-from-file to label clusters offline",
            Stage::Report => "check that the output directory is writable",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub stage: Stage,
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn validation(stage: Stage, message: String) -> Self {
        Self {
            stage,
            kind: ExitKind::Validation,
            message,
        }
    }

    /// Classifies a library error raised while running `stage`.
    pub fn from_core(stage: Stage, e: Error) -> Self {
        let kind = if e.is_service() {
            ExitKind::Service
        } else if matches!(stage, Stage::Config | Stage::Corpus) {
            ExitKind::Validation
        } else {
            match e {
                Error::InvalidParameter(_) if stage == Stage::Sample => ExitKind::Validation,
                _ => ExitKind::Runtime,
            }
        };
        Self {
            stage,
            kind,
            message: e.to_string(),
        }
    }

    pub fn code(&self) -> u8 {
        self.kind.code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} stage failed: {}\nhint: {}",
            self.stage.name(),
            self.message,
            self.stage.hint()
        )
    }
}

impl std::error::Error for CliError {}

pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, CliError>;
}

impl<T> StageExt<T> for orthobench::Result<T> {
    fn stage(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(stage, e))
    }
}
