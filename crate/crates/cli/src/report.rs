use std::fmt::Display;

/// Human lines followed by a `key=value` block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    lines: Vec<String>,
    pairs: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    /// A `label: value` row, padded for alignment.
    pub fn row(&mut self, label: &str, value: impl Display) {
        self.lines.push(format!("{label:<22}{value}"));
    }

    pub fn kv(&mut self, key: impl Into<String>, value: impl Display) {
        self.pairs.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            out.push_str(l);
            out.push('\n');
        }
        out.push('\n');
        for (k, v) in &self.pairs {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

/// Reads the `key=value` block of rendered output.
pub fn parse_kv(output: &str) -> Vec<(String, String)> {
    let block = output.rsplit_once("\n\n").map_or(output, |(_, b)| b);
    block
        .lines()
        .filter_map(|l| l.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}
