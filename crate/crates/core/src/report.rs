//! Ordered `key=value` reports with pass/fail checks.

use std::fmt;
use std::io::Write;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
    checks: Vec<(String, bool)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl fmt::Display) {
        let key = key.into();
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        let value = value.to_string().replace('\n', " ");
        self.entries.push((key, value));
    }

    pub fn extend(&mut self, prefix: &str, pairs: impl IntoIterator<Item = (String, String)>) {
        for (k, v) in pairs {
            self.push(format!("{prefix}.{k}"), v);
        }
    }

    /// Records `check.<name>=PASS|FAIL`.
    pub fn check(&mut self, name: &str, pass: bool) {
        self.push(format!("check.{name}"), if pass { "PASS" } else { "FAIL" });
        self.checks.push((name.to_string(), pass));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn checks(&self) -> &[(String, bool)] {
        &self.checks
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect()
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "{self}")
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}
