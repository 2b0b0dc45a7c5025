//! Tiny INI reader: `[section]` headers, `key = value` pairs, `#`/`;` comments.
//!
//! Keys before the first header land in the unnamed section `""`. Order of
//! sections and keys is preserved; a repeated key overwrites the earlier value.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ini {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl Ini {
    pub fn parse(text: &str) -> Result<Self> {
        let mut ini = Ini { sections: vec![(String::new(), Vec::new())] };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", lineno + 1)))?;
                ini.sections.push((name.trim().to_string(), Vec::new()));
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            let entries = &mut ini.sections.last_mut().expect("always one section").1;
            match entries.iter_mut().find(|(ek, _)| *ek == k) {
                Some(e) => e.1 = v,
                None => entries.push((k, v)),
            }
        }
        Ok(ini)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sections in file order (the unnamed leading section included).
    pub fn sections(&self) -> impl Iterator<Item = (&str, &[(String, String)])> {
        self.sections.iter().map(|(n, e)| (n.as_str(), e.as_slice()))
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .rev()
            .filter(|(n, _)| n == section)
            .find_map(|(_, e)| e.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let ini = Ini::parse("top = 1\n# c\n[a]\nx = hello world\n; c\n[b.c]\ny=2\nx = 3\n").unwrap();
        assert_eq!(ini.get("", "top"), Some("1"));
        assert_eq!(ini.get("a", "x"), Some("hello world"));
        assert_eq!(ini.get("b.c", "x"), Some("3"));
        assert_eq!(ini.get("a", "y"), None);
        assert_eq!(ini.sections().count(), 3);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Ini::parse("[oops\n").is_err());
        assert!(Ini::parse("no equals sign\n").is_err());
    }
}
