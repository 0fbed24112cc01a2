use marl_core::runtime::RuntimeError;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("comparison parity: {0}")]
    Parity(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Runtime(RuntimeError),
}

impl From<RuntimeError> for BenchError {
    fn from(e: RuntimeError) -> Self {
        match e {
            RuntimeError::Config(msg) => BenchError::Config(msg),
            RuntimeError::Env(env) if matches!(env, marl_core::envsim::EnvError::InvalidSpec(_)) => {
                BenchError::Config(env.to_string())
            }
            e => BenchError::Runtime(e),
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}

impl BenchError {
    /// Process exit status. Usage errors are reported by the argument parser
    /// with status 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 3,
            BenchError::Runtime(_) => 4,
            BenchError::Io(_) => 5,
            BenchError::Parity(_) => 6,
        }
    }
}
