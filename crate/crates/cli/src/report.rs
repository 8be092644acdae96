//! Deterministic run reports: inputs, seed, assertions and output.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assertion {
    pub tag: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<u64>,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub inputs: Value,
    pub assertions: Vec<Assertion>,
    pub output: Value,
}

impl Report {
    pub fn new(command: impl Into<String>, seed: u64, inputs: Value) -> Self {
        Self { command: command.into(), seed, inputs, assertions: Vec::new(), output: Value::Null }
    }

    pub fn check(&mut self, tag: &str, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { tag: tag.into(), index: None, passed, detail: detail.into() });
    }

    pub fn check_at(&mut self, tag: &str, index: u64, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { tag: tag.into(), index: Some(index), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    /// Pretty JSON with assertions ordered by tag, then index.
    pub fn to_json(&self) -> String {
        let mut sorted = self.clone();
        sorted.assertions.sort_by(|a, b| (&a.tag, a.index).cmp(&(&b.tag, b.index)));
        let mut s = serde_json::to_string_pretty(&sorted).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Per-index rows written as CSV.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("fields are UTF-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assertions_sorted_on_output() {
        let mut r = Report::new("x", 3, Value::Null);
        r.check_at("b", 2, true, "");
        r.check("a", false, "bad");
        r.check_at("b", 1, true, "");
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        let tags: Vec<_> = v["assertions"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| format!("{}{}", a["tag"].as_str().unwrap(), a["index"]))
            .collect();
        assert_eq!(tags, ["anull", "b1", "b2"]);
        assert!(!r.passed());
        assert_eq!(v["seed"], 3);
    }

    #[test]
    fn csv_has_header() {
        let mut t = Table::new(&["i", "hit"]);
        t.push(vec!["0".into(), "true".into()]);
        assert_eq!(t.to_csv().unwrap(), "i,hit\n0,true\n");
    }
}
