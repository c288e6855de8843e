use std::fmt;

use serde::Serialize;

/// Failure of a command, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or inconsistent input.
    Input(String),
    /// A computation could not be carried out.
    Compute(String),
    /// The command ran but one of its checks failed.
    Assertion(Vec<String>),
}

impl CliError {
    pub fn input(msg: impl fmt::Display) -> Self {
        Self::Input(msg.to_string())
    }

    pub fn compute(msg: impl fmt::Display) -> Self {
        Self::Compute(msg.to_string())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Input(_) => 2,
            Self::Compute(_) => 3,
            Self::Assertion(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Input(_) => "invalid_input",
            Self::Compute(_) => "computation",
            Self::Assertion(_) => "assertion",
        }
    }

    fn message(&self) -> String {
        match self {
            Self::Input(m) | Self::Compute(m) => m.clone(),
            Self::Assertion(failed) => failed.join("; "),
        }
    }

    /// `{"error": {"kind": ..., "message": ...}}`.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        let env = Envelope { error: Body { kind: self.kind(), message: self.message() } };
        serde_json::to_string(&env).expect("error body serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_is_machine_readable() {
        let e = CliError::Assertion(vec!["a".into(), "b".into()]);
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "assertion");
        assert_eq!(v["error"]["message"], "a; b");
        assert_eq!(e.exit_code(), 4);
        assert_eq!(CliError::input("x").exit_code(), 2);
        assert_eq!(CliError::compute("x").exit_code(), 3);
    }
}
