//! Named pass/fail checks and their plain-text rendering.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    /// Passes iff `measured <= threshold`.
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            // + 0.0 turns -0.0 into 0.0 for stable rendering
            measured: measured + 0.0,
            threshold,
            pass: measured <= threshold,
            detail: String::new(),
        }
    }

    /// Passes iff `measured >= threshold`.
    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            measured: measured + 0.0,
            threshold,
            pass: measured >= threshold,
            detail: String::new(),
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
            pass,
            detail: detail.into(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Ordered collection of checks plus free-form provenance and tables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    pub provenance: Vec<(String, String)>,
    pub tables: Vec<(String, Vec<String>, Vec<Vec<f64>>)>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.provenance.push((key.into(), value.to_string()));
    }

    pub fn table(&mut self, name: impl Into<String>, header: &[&str], rows: Vec<Vec<f64>>) {
        self.tables
            .push((name.into(), header.iter().map(|s| s.to_string()).collect(), rows));
    }

    pub fn overall_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Deterministic text form: same content, same bytes.
    pub fn render(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# {}", self.title).unwrap();
        writeln!(s, "overall: {}", if self.overall_pass() { "PASS" } else { "FAIL" }).unwrap();
        writeln!(s).unwrap();
        writeln!(s, "[checks]").unwrap();
        for c in &self.checks {
            write!(
                s,
                "{} {} measured={:e} threshold={:e}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.threshold
            )
            .unwrap();
            if !c.detail.is_empty() {
                write!(s, " ({})", c.detail).unwrap();
            }
            writeln!(s).unwrap();
        }
        for (name, header, rows) in &self.tables {
            writeln!(s).unwrap();
            writeln!(s, "[table {name}]").unwrap();
            writeln!(s, "{}", header.join(",")).unwrap();
            for row in rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                writeln!(s, "{}", cells.join(",")).unwrap();
            }
        }
        if !self.provenance.is_empty() {
            writeln!(s).unwrap();
            writeln!(s, "[provenance]").unwrap();
            for (k, v) in &self.provenance {
                writeln!(s, "{k} = {v}").unwrap();
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overall_is_conjunction() {
        let mut r = Report::new("t");
        assert!(r.overall_pass());
        r.push(Check::at_most("a", 1.0, 2.0));
        assert!(r.overall_pass());
        r.push(Check::at_least("b", 1.0, 2.0));
        assert!(!r.overall_pass());
        assert!(r.render().contains("overall: FAIL"));
        assert_eq!(r.failures().count(), 1);
    }
}
