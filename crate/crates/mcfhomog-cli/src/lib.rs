//! Config-driven scenario runner behind the `mcfhomog` binary.

pub mod config;
pub mod run;

pub use config::{ConfigError, RunConfig, Scenario};
pub use run::{explain, output_dir, prepare, run, Manifest, Options, Prepared};

/// Machine-readable class of a failure, used in the single-line error report.
pub fn error_kind(e: &anyhow::Error) -> &'static str {
    if e.downcast_ref::<ConfigError>().is_some() {
        return "config";
    }
    use mcfhomog::Error as E;
    match e.downcast_ref::<E>() {
        Some(E::HypothesisViolation { .. }) => "hypothesis",
        Some(E::Parameter(_)) => "parameter",
        Some(E::Cfl { .. }) => "cfl",
        Some(E::Blowup { .. }) => "blowup",
        Some(E::Budget { .. }) => "budget",
        Some(E::Geometry(_)) => "geometry",
        Some(E::Precondition(_)) => "precondition",
        Some(E::Domain(_)) => "domain",
        Some(E::Resource { .. }) => "resource",
        Some(E::NotApplicable(_)) => "not_applicable",
        Some(E::Undecided(_)) => "undecided",
        Some(E::Internal(_)) => "internal",
        Some(E::Io(_)) => "io",
        None => "runtime",
    }
}

/// Validation failures exit with 2, failures during a run with 1.
pub fn exit_code(kind: &str) -> i32 {
    match kind {
        "config" | "hypothesis" | "parameter" | "cfl" | "geometry" | "precondition" | "domain" | "not_applicable" => 2,
        _ => 1,
    }
}

/// `error kind=<kind> reason=<message>` on one line.
pub fn error_line(e: &anyhow::Error) -> String {
    let msg = format!("{e:#}").replace(['\n', '\r'], " ");
    format!("error kind={} reason={msg}", error_kind(e))
}
