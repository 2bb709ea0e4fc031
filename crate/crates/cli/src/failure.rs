use std::fmt;

/// Exit status classes: bad input or usage is 1, a defect in this program is 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Input,
    Internal,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Input => 1,
            Kind::Internal => 2,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

pub trait Classify<T> {
    fn input(self) -> Outcome<T>;
    fn internal(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Outcome<T> {
        self.map_err(|e| Failure {
            kind: Kind::Input,
            error: e.into(),
        })
    }

    fn internal(self) -> Outcome<T> {
        self.map_err(|e| Failure {
            kind: Kind::Internal,
            error: e.into(),
        })
    }
}

pub fn input_error(msg: impl fmt::Display) -> Failure {
    Failure {
        kind: Kind::Input,
        error: anyhow::anyhow!("{msg}"),
    }
}

pub fn internal_error(msg: impl fmt::Display) -> Failure {
    Failure {
        kind: Kind::Internal,
        error: anyhow::anyhow!("{msg}"),
    }
}
