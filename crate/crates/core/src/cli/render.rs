//! Text reports and CSV tables. Every number is printed in shortest
//! round-trip form, so parsing the output recovers the exact values.

use std::fmt::Write as _;

use crate::function::SampledFunction;
use crate::grid::PointSet;
use crate::value::ExtendedValue;

pub fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v:?}")
    }
}

pub fn ext(v: ExtendedValue) -> String {
    num(v.to_f64())
}

pub fn point(p: &[f64]) -> String {
    format!("({})", p.iter().map(|&c| num(c)).collect::<Vec<_>>().join(", "))
}

/// `key = value` lines grouped under `[title]` headers.
#[derive(Default)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn section(&mut self, title: &str) -> &mut Self {
        if !self.text.is_empty() {
            self.text.push('\n');
        }
        let _ = writeln!(self.text, "[{title}]");
        self
    }

    pub fn field(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.text, "{key} = {value}");
        self
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.field(key, num(v))
    }

    pub fn finish(self) -> String {
        self.text
    }
}

pub fn header(prefix: &str, dimension: usize) -> Vec<String> {
    (1..=dimension).map(|i| format!("{prefix}_{i}")).collect()
}

/// One row per point of `domain`: its coordinates, then one column per function.
pub fn table(domain: &PointSet, prefix: &str, columns: &[(&str, &SampledFunction)]) -> String {
    let mut cols = header(prefix, domain.dimension());
    cols.extend(columns.iter().map(|(name, _)| name.to_string()));
    let mut out = cols.join(",");
    out.push('\n');
    for (i, p) in domain.iter().enumerate() {
        let mut fields: Vec<String> = p.iter().map(|&c| num(c)).collect();
        fields.extend(columns.iter().map(|(_, f)| ext(f.value(i))));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}
