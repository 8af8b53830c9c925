//! Flat `key = value` experiment files with `[section]` headers.
//!
//! ```text
//! # comment
//! [schedule]
//! alpha = 1.0
//! h = 16
//! xi = 0.5
//! ```
//!
//! Lists are whitespace separated; matrix rows are separated by `;`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecFile {
    entries: Vec<Entry>,
    sections: Vec<(String, usize)>,
    base_dir: PathBuf,
}

fn spec_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Spec { line, msg: msg.into() }
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = SpecFile::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| spec_err(line, "section header must end with `]`"))?
                    .trim()
                    .to_string();
                if name.is_empty() {
                    return Err(spec_err(line, "empty section name"));
                }
                if out.sections.iter().any(|(s, _)| *s == name) {
                    return Err(spec_err(line, format!("section [{name}] appears twice")));
                }
                out.sections.push((name.clone(), line));
                current = Some(name);
                continue;
            }
            let (k, v) = body.split_once('=').ok_or_else(|| spec_err(line, "expected `key = value`"))?;
            let section = current.clone().ok_or_else(|| spec_err(line, "key outside of any [section]"))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(spec_err(line, "empty key"));
            }
            if out.entries.iter().any(|e| e.section == section && e.key == key) {
                return Err(spec_err(line, format!("key `{key}` repeated in [{section}]")));
            }
            out.entries.push(Entry { section, key, value: v.trim().to_string(), line });
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut spec = Self::parse(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(spec)
    }

    /// Resolves a path written in the spec relative to the spec's directory.
    pub fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() { p.to_path_buf() } else { self.base_dir.join(p) }
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.iter().any(|(s, _)| s == section)
    }

    pub fn section_line(&self, section: &str) -> usize {
        self.sections.iter().find(|(s, _)| s == section).map_or(0, |(_, l)| *l)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }

    /// Line of `key` if present, else of the section header.
    pub fn line_of(&self, section: &str, key: &str) -> usize {
        self.get(section, key).map_or_else(|| self.section_line(section), |e| e.line)
    }

    pub fn require_section(&self, section: &str) -> Result<()> {
        if self.has_section(section) {
            Ok(())
        } else {
            Err(spec_err(0, format!("missing section [{section}]")))
        }
    }

    /// Rejects keys of `section` not in `allowed`.
    pub fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<()> {
        for e in self.entries.iter().filter(|e| e.section == section) {
            if !allowed.contains(&e.key.as_str()) {
                return Err(spec_err(e.line, format!("unknown key `{}` in [{section}]", e.key)));
            }
        }
        Ok(())
    }

    pub fn str_opt(&self, section: &str, key: &str) -> Option<&str> {
        self.get(section, key).map(|e| e.value.as_str())
    }

    pub fn str_req(&self, section: &str, key: &str) -> Result<&str> {
        self.str_opt(section, key)
            .ok_or_else(|| spec_err(self.section_line(section), format!("[{section}] needs `{key}`")))
    }

    pub fn parse_opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| spec_err(e.line, format!("cannot parse `{}` for `{key}`", e.value))),
        }
    }

    pub fn parse_req<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.parse_opt(section, key)?
            .ok_or_else(|| spec_err(self.section_line(section), format!("[{section}] needs `{key}`")))
    }

    pub fn list_opt<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| spec_err(e.line, format!("cannot parse `{t}` in `{key}`"))))
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    pub fn list_req<T: FromStr>(&self, section: &str, key: &str) -> Result<Vec<T>> {
        self.list_opt(section, key)?
            .ok_or_else(|| spec_err(self.section_line(section), format!("[{section}] needs `{key}`")))
    }

    pub fn matrix_opt(&self, section: &str, key: &str) -> Result<Option<DMatrix<f64>>> {
        let Some(e) = self.get(section, key) else { return Ok(None) };
        let rows: Vec<Vec<f64>> = e
            .value
            .split(';')
            .map(|r| {
                r.split_whitespace()
                    .map(|t| t.parse().map_err(|_| spec_err(e.line, format!("cannot parse `{t}` in `{key}`"))))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let nc = rows.first().map_or(0, Vec::len);
        if nc == 0 || rows.iter().any(|r| r.len() != nc) {
            return Err(spec_err(e.line, format!("`{key}` must be a non-empty rectangular matrix")));
        }
        let flat: Vec<f64> = rows.concat();
        Ok(Some(DMatrix::from_row_slice(rows.len(), nc, &flat)))
    }

    pub fn bool_opt(&self, section: &str, key: &str) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(false),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                v => Err(spec_err(e.line, format!("expected true or false for `{key}`, got `{v}`"))),
            },
        }
    }

    /// Attaches the line of `section.key` to an error raised while building from it.
    pub fn at(&self, section: &str, key: &str) -> impl Fn(Error) -> Error + '_ {
        let line = self.line_of(section, key);
        move |e| match e {
            Error::Spec { .. } => e,
            other => spec_err(line, other.to_string()),
        }
    }
}
