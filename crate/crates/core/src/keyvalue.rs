//! Small helpers for the flat `key=value` text formats.

use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) fn split_pair(line: &str) -> Result<(&str, &str)> {
    line.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::Config(format!("expected key=value, got {line:?}")))
}

pub(crate) fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
}

pub(crate) fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean {v:?} for {key}"))),
    }
}

pub(crate) fn parse_array<const N: usize>(key: &str, v: &str) -> Result<[usize; N]> {
    let items = v
        .split(',')
        .map(|s| parse_value::<usize>(key, s.trim()))
        .collect::<Result<Vec<_>>>()?;
    items
        .try_into()
        .map_err(|items: Vec<usize>| Error::Config(format!("{key} needs {N} values, got {}", items.len())))
}

pub(crate) fn join(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
