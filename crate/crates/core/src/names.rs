//! Parsing of stable `name(key=value,...)` identifiers.

use crate::error::{Error, Result};
use std::str::FromStr;

/// Splits `name(k=v,...)` into the name and its key/value pairs.
pub fn parse_call(s: &str) -> Result<(String, Vec<(String, String)>)> {
    let s = s.trim();
    let Some(open) = s.find('(') else {
        return Ok((s.to_string(), Vec::new()));
    };
    if !s.ends_with(')') {
        return Err(Error::Parse(format!("unbalanced parentheses in {s:?}")));
    }
    let name = s[..open].trim().to_string();
    let inner = &s[open + 1..s.len() - 1];
    let mut args = Vec::new();
    for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got {part:?} in {s:?}")))?;
        args.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok((name, args))
}

pub struct Args {
    owner: String,
    args: Vec<(String, String)>,
}

impl Args {
    pub fn new(owner: &str, args: Vec<(String, String)>) -> Self {
        Args { owner: owner.to_string(), args }
    }

    pub fn take<T: FromStr>(&mut self, keys: &[&str], default: Option<T>) -> Result<T> {
        if let Some(pos) = self.args.iter().position(|(k, _)| keys.contains(&k.as_str())) {
            let (k, v) = self.args.remove(pos);
            return v
                .parse()
                .map_err(|_| Error::Parse(format!("bad value {v:?} for {k} in {}", self.owner)));
        }
        default.ok_or_else(|| Error::Parse(format!("{} needs parameter {}", self.owner, keys[0])))
    }

    pub fn finish(self) -> Result<()> {
        match self.args.first() {
            None => Ok(()),
            Some((k, _)) => Err(Error::Parse(format!("unknown parameter {k:?} for {}", self.owner))),
        }
    }
}

