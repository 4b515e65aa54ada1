//! Merging a JSON config file into the command line.
//!
//! The file holds one object. Keys name long flags (`-` or `_` both work)
//! of the global options or of the invoked subcommand; a key equal to a
//! subcommand name may hold an object that applies to that subcommand only.
//! Flags given on the command line win over the file.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, CommandFactory, FromArgMatches};
use serde_json::{Map, Value};

use crate::args::Cli;
use crate::error::CliError;

#[derive(Debug)]
pub enum ParseFailure {
    Clap(clap::Error),
    Cli(CliError),
}

impl From<clap::Error> for ParseFailure {
    fn from(e: clap::Error) -> Self {
        ParseFailure::Clap(e)
    }
}

impl From<CliError> for ParseFailure {
    fn from(e: CliError) -> Self {
        ParseFailure::Cli(e)
    }
}

pub fn parse(argv: Vec<OsString>) -> Result<Cli, ParseFailure> {
    let cmd = Cli::command();
    let matches = cmd.clone().try_get_matches_from(&argv)?;
    let Some(path) = matches.get_one::<std::path::PathBuf>("config") else {
        return Ok(Cli::from_arg_matches(&matches)?);
    };
    let entries = read_config(path)?;
    let (sub_name, sub_matches) = matches.subcommand().expect("subcommand is required");
    let sub_cmd = cmd.find_subcommand(sub_name).expect("matched subcommand exists");
    let sub_names: Vec<&str> = cmd.get_subcommands().map(|c| c.get_name()).collect();

    let mut extra: Vec<OsString> = Vec::new();
    let mut apply = |key: &str, value: &Value| -> Result<bool, CliError> {
        let long = key.replace('_', "-");
        if long == "config" {
            return Err(CliError::Input(format!(
                "{}: `config` cannot be set from a config file",
                path.display()
            )));
        }
        let found = cmd
            .get_arguments()
            .filter(|a| a.is_global_set())
            .map(|a| (a, &matches))
            .chain(sub_cmd.get_arguments().map(|a| (a, sub_matches)))
            .find(|(a, _)| a.get_long() == Some(long.as_str()));
        let Some((arg, m)) = found else {
            return Ok(false);
        };
        if given_on_command_line(m, arg.get_id().as_str()) {
            return Ok(true);
        }
        let flag = format!("--{long}");
        let scalar = |v: &Value| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            _ => Err(CliError::Input(format!(
                "{}: unsupported value for `{key}`",
                path.display()
            ))),
        };
        match (arg.get_action(), value) {
            (ArgAction::SetTrue, Value::Bool(b)) => {
                if *b {
                    extra.push(flag.into());
                }
            }
            (ArgAction::SetTrue, _) => {
                return Err(CliError::Input(format!(
                    "{}: `{key}` must be true or false",
                    path.display()
                )));
            }
            (_, Value::Array(items)) => {
                for item in items {
                    extra.push(format!("{flag}={}", scalar(item)?).into());
                }
            }
            (_, v) => extra.push(format!("{flag}={}", scalar(v)?).into()),
        }
        Ok(true)
    };

    for (key, value) in &entries {
        if sub_names.contains(&key.as_str()) {
            match value {
                Value::Object(inner) if key == sub_name => {
                    for (k, v) in inner {
                        if !apply(k, v)? {
                            return Err(unknown(path, &format!("{key}.{k}")).into());
                        }
                    }
                }
                Value::Object(_) => {}
                _ => return Err(CliError::Input(format!("{}: `{key}` must be an object", path.display())).into()),
            }
        } else if !apply(key, value)? {
            return Err(unknown(path, key).into());
        }
    }
    if extra.is_empty() {
        return Ok(Cli::from_arg_matches(&matches)?);
    }
    let mut merged = argv;
    merged.extend(extra);
    let matches = cmd.try_get_matches_from(merged)?;
    Ok(Cli::from_arg_matches(&matches)?)
}

fn given_on_command_line(m: &ArgMatches, id: &str) -> bool {
    matches!(m.value_source(id), Some(ValueSource::CommandLine))
}

fn unknown(path: &Path, key: &str) -> CliError {
    CliError::Input(format!("{}: unknown config key `{key}`", path.display()))
}

fn read_config(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    match serde_json::from_str::<Value>(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Input(format!(
            "{}: config must be a JSON object",
            path.display()
        ))),
        Err(e) => Err(CliError::Input(format!("{}: {e}", path.display()))),
    }
}
