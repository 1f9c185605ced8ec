mod data;
mod elephant;
mod eval;
mod misc;

use std::io::Write;
use std::path::Path;

use freebies::{Error, Result};
use serde::Serialize;

use crate::args::{Command, ElephantCommand, EvalCommand};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Mixup(a) => data::mixup(&a),
        Command::Augment(a) => data::augment(&a),
        Command::Schedule(a) => misc::schedule(&a),
        Command::Shapes(a) => misc::shapes(&a),
        Command::Targets(a) => misc::targets(&a),
        Command::SyncbnCheck(a) => misc::syncbn_check(&a),
        Command::Eval(EvalCommand::Map(a)) => eval::map(&a),
        Command::Eval(EvalCommand::Delta(a)) => eval::delta(&a),
        Command::Elephant(ElephantCommand::Gen(a)) => elephant::gen(&a),
        Command::Elephant(ElephantCommand::Eval(a)) => elephant::eval(&a),
        Command::Version => misc::version(),
    }
}

/// Every report carries the toolkit version, the command and its effective
/// configuration ahead of the command-specific fields.
#[derive(Serialize)]
pub(crate) struct Report<'a, C: Serialize, B: Serialize> {
    pub toolkit_version: &'static str,
    pub command: &'a str,
    pub config: &'a C,
    #[serde(flatten)]
    pub body: B,
}

pub(crate) fn report<'a, C: Serialize, B: Serialize>(command: &'a str, config: &'a C, body: B) -> Report<'a, C, B> {
    Report {
        toolkit_version: freebies::VERSION,
        command,
        config,
        body,
    }
}

pub(crate) fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).expect("reports serialize");
    print_text(&(s + "\n"))
}

pub(crate) fn print_text(s: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(s.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Output trees must start empty so the manifest describes only this run.
pub(crate) fn fresh_dir(path: &Path) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if path.exists() {
        if std::fs::read_dir(path).map_err(io)?.next().is_some() {
            return Err(domain(format!("output directory {} is not empty", path.display())));
        }
        return Ok(());
    }
    std::fs::create_dir_all(path).map_err(io)
}
