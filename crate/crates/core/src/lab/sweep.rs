use std::collections::BTreeMap;

use serde::Serialize;

/// One record of an experiment: parameters in, named scalars out.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepRow {
    pub id: String,
    pub params: BTreeMap<String, f64>,
    pub outputs: BTreeMap<String, f64>,
    pub flags: Vec<String>,
}

impl SweepRow {
    pub fn new(id: impl Into<String>) -> Self {
        SweepRow { id: id.into(), ..Default::default() }
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn output(mut self, key: &str, value: f64) -> Self {
        self.outputs.insert(key.to_string(), value);
        self
    }

    pub fn flag(mut self, flag: impl Into<String>) -> Self {
        self.flags.push(flag.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.outputs.get(key).or_else(|| self.params.get(key)).copied()
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Tagged rows plus free-form metadata (fractal, p, σ, window, seed, …).
/// All rows share the same parameter and output names.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SweepTable {
    pub experiment: String,
    pub metadata: BTreeMap<String, String>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn new(experiment: impl Into<String>) -> Self {
        SweepTable { experiment: experiment.into(), ..Default::default() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    /// Panics if the row's keys differ from those of earlier rows.
    pub fn push(&mut self, row: SweepRow) {
        if let Some(first) = self.rows.first() {
            assert!(
                first.params.keys().eq(row.params.keys()) && first.outputs.keys().eq(row.outputs.keys()),
                "incomplete row {:?} in table {}",
                row.id,
                self.experiment
            );
        }
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, key: &str) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.get(key)).collect()
    }

    pub fn param_names(&self) -> Vec<String> {
        self.rows.first().map(|r| r.params.keys().cloned().collect()).unwrap_or_default()
    }

    pub fn output_names(&self) -> Vec<String> {
        self.rows.first().map(|r| r.outputs.keys().cloned().collect()).unwrap_or_default()
    }

    /// Header and rows as strings, ready for a CSV writer.
    pub fn records(&self) -> (Vec<String>, Vec<Vec<String>>) {
        let params = self.param_names();
        let outputs = self.output_names();
        let mut header = vec!["experiment".to_string(), "id".to_string()];
        header.extend(params.iter().cloned());
        header.extend(outputs.iter().cloned());
        header.push("flags".to_string());
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut rec = vec![self.experiment.clone(), r.id.clone()];
                rec.extend(params.iter().map(|k| format_number(r.params[k])));
                rec.extend(outputs.iter().map(|k| format_number(r.outputs[k])));
                rec.push(r.flags.join(";"));
                rec
            })
            .collect();
        (header, rows)
    }
}

/// Locale-free, round-trip number formatting.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x == 0.0 {
        "0".into()
    } else if (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
