//! Structured reports and plot-data tables.
//!
//! Every report starts with the command name and the full resolved
//! configuration. The generation time sits alone on a line beginning with
//! `# generated:` so that two runs can be compared byte for byte once that
//! line is dropped.

use crate::config::ReportFormat;
use crate::metrics::{BoxplotStats, StatsSummary};

pub const TIMESTAMP_PREFIX: &str = "# generated:";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].len())
                    .chain([self.header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    pub title: String,
    pub entries: Vec<(String, String)>,
    pub tables: Vec<Table>,
}

impl Section {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Self::default()
        }
    }

    pub fn entry(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub config_toml: String,
    pub seed: u64,
    pub sections: Vec<Section>,
}

impl Report {
    pub fn new(command: &str, config_toml: String, seed: u64) -> Self {
        Self {
            command: command.into(),
            config_toml,
            seed,
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, s: Section) {
        self.sections.push(s);
    }

    pub fn section(&self, title: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.title == title)
    }

    /// Renders the report. `generated` is the Unix time written on the
    /// timestamp line; `None` omits the line.
    pub fn render(&self, format: ReportFormat, generated: Option<u64>) -> String {
        match format {
            ReportFormat::Text => self.render_text(generated),
            ReportFormat::Csv => self.render_csv(generated),
        }
    }

    fn render_text(&self, generated: Option<u64>) -> String {
        let mut out = format!("erpalign report: {}\nseed: {}\n", self.command, self.seed);
        if let Some(t) = generated {
            out.push_str(&format!("{TIMESTAMP_PREFIX} {t}\n"));
        }
        out.push_str("\n[config]\n");
        out.push_str(&self.config_toml);
        if !self.config_toml.ends_with('\n') {
            out.push('\n');
        }
        for s in &self.sections {
            out.push_str(&format!("\n[{}]\n", s.title));
            for (k, v) in &s.entries {
                out.push_str(&format!("{k}: {v}\n"));
            }
            for t in &s.tables {
                out.push('\n');
                out.push_str(&t.to_text());
            }
        }
        out
    }

    fn render_csv(&self, generated: Option<u64>) -> String {
        let mut out = format!("# erpalign report: {}\n# seed: {}\n", self.command, self.seed);
        if let Some(t) = generated {
            out.push_str(&format!("{TIMESTAMP_PREFIX} {t}\n"));
        }
        for line in self.config_toml.lines() {
            out.push_str(&format!("# config: {line}\n"));
        }
        for s in &self.sections {
            if !s.entries.is_empty() {
                out.push_str("section,key,value\n");
                for (k, v) in &s.entries {
                    out.push_str(&format!("{},{},{}\n", s.title, k, v));
                }
            }
            for t in &s.tables {
                out.push_str(&format!("# table: {}\n", s.title));
                out.push_str(&t.to_csv());
            }
        }
        out
    }
}

/// Drops the timestamp line, leaving the deterministic part of a report.
pub fn strip_timestamp(report: &str) -> String {
    report
        .lines()
        .filter(|l| !l.starts_with(TIMESTAMP_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect()
}

pub fn num(x: f64) -> String {
    format!("{x:.6}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "undefined".into())
}

pub fn stats_table(rows: &[(&str, &StatsSummary)]) -> Table {
    let mut t = Table::new(&[
        "measure", "mean", "std", "v", "median", "q25", "q75", "max", "min",
    ]);
    for (name, s) in rows {
        t.push(vec![
            name.to_string(),
            num(s.mean),
            num(s.std),
            opt_num(s.v),
            num(s.median),
            num(s.q25),
            num(s.q75),
            num(s.max),
            num(s.min),
        ]);
    }
    t
}

/// Five-number summaries plus outliers (`;`-separated), one row per box.
pub fn boxplot_table(rows: &[(&str, &BoxplotStats)]) -> Table {
    let mut t = Table::new(&[
        "series",
        "whisker_low",
        "q25",
        "median",
        "q75",
        "whisker_high",
        "outliers",
    ]);
    for (name, b) in rows {
        let outliers: Vec<String> = b.outliers.iter().map(|&o| num(o)).collect();
        t.push(vec![
            name.to_string(),
            num(b.whisker_low),
            num(b.q25),
            num(b.median),
            num(b.q75),
            num(b.whisker_high),
            outliers.join(";"),
        ]);
    }
    t
}
