//! Serializable report document shared by every command.

use crate::error::Result;
use crate::props::{Status, Verdict};
use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::io::Write;

pub const TOOL: &str = "proxlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// One named check: its status plus the full supporting record.
#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub data: Value,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, status: Status, data: impl Serialize) -> Result<Self> {
        Ok(CheckResult { name: name.into(), status, data: serde_json::to_value(data)? })
    }

    pub fn verdict(name: impl Into<String>, v: &Verdict) -> Result<Self> {
        Self::new(name, v.status, v)
    }

    pub fn flag(name: impl Into<String>, pass: bool, data: impl Serialize) -> Result<Self> {
        Self::new(name, if pass { Status::Pass } else { Status::Fail }, data)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportDocument {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: BTreeMap<String, Value>,
    pub checks: Vec<CheckResult>,
    pub provenance: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
}

impl ReportDocument {
    pub fn new(command: &str) -> Self {
        ReportDocument {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            inputs: BTreeMap::new(),
            checks: Vec::new(),
            provenance: BTreeMap::new(),
            generated_at: None,
        }
    }

    pub fn input(&mut self, key: &str, v: impl Serialize) -> Result<()> {
        self.inputs.insert(key.into(), serde_json::to_value(v)?);
        Ok(())
    }

    pub fn setting(&mut self, key: &str, v: impl Serialize) -> Result<()> {
        self.provenance.insert(key.into(), serde_json::to_value(v)?);
        Ok(())
    }

    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    /// Seconds since the Unix epoch.
    pub fn stamp(&mut self) {
        let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
        self.generated_at = Some(format!("unix:{secs}"));
    }

    pub fn count(&self, s: Status) -> usize {
        self.checks.iter().filter(|c| c.status == s).count()
    }

    pub fn status_of(&self, name: &str) -> Option<Status> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.status)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    /// One line per check.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "pass",
                Status::Fail => "FAIL",
                Status::Inconclusive => "inconclusive",
            };
            out.push_str(&format!("{tag:>12}  {}\n", c.name));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_serialization() {
        let mut a = ReportDocument::new("x");
        a.input("z", 1).unwrap();
        a.input("a", "b").unwrap();
        a.push(CheckResult::verdict("v", &Verdict::new(Status::Pass, 3.0).with("k", f64::NAN)).unwrap());
        let s1 = a.to_json().unwrap();
        let s2 = a.clone().to_json().unwrap();
        assert_eq!(s1, s2);
        assert!(s1.find("\"a\"").unwrap() < s1.find("\"z\"").unwrap());
        assert!(!s1.contains("generated_at"));
        a.stamp();
        assert!(a.to_json().unwrap().contains("generated_at"));
        assert_eq!(a.count(Status::Pass), 1);
    }
}
