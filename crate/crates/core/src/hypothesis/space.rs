use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered, named parameters that hypotheses are written against.
///
/// Aliases let several spellings resolve to one parameter, e.g. both
/// `Del_with_Im` and `Im_with_Del` for one correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    names: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    aliases: Vec<(String, usize)>,
}

/// `letter (letter | digit | '_' | '.')*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl ParameterSpace {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::invalid("parameter space is empty"));
        }
        for (i, n) in names.iter().enumerate() {
            if !is_identifier(n) {
                return Err(Error::invalid(format!("`{n}` is not a valid parameter name")));
            }
            if names[..i].contains(n) {
                return Err(Error::invalid(format!("duplicate parameter name `{n}`")));
            }
        }
        Ok(ParameterSpace { names, aliases: Vec::new() })
    }

    pub fn with_alias(mut self, alias: impl Into<String>, index: usize) -> Result<Self> {
        let alias = alias.into();
        if index >= self.names.len() || !is_identifier(&alias) {
            return Err(Error::invalid(format!("bad alias `{alias}`")));
        }
        if self.index_of(&alias).is_some() {
            return Err(Error::invalid(format!("alias `{alias}` already names a parameter")));
        }
        self.aliases.push((alias, index));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .or_else(|| self.aliases.iter().find(|(a, _)| a == name).map(|(_, i)| *i))
    }

    /// Reorders the space, keeping aliases attached to their parameters.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut out = ParameterSpace::new(order.iter().map(|&i| self.names[i].clone()))?;
        for (a, i) in &self.aliases {
            let j = order.iter().position(|k| k == i).expect("permutation");
            out.aliases.push((a.clone(), j));
        }
        Ok(out)
    }
}
