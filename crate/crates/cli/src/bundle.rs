use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use fock_erasure::fitstats::FitResult;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// One plot-ready curve or table: equal-length named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// Non-finite entries are stored as JSON `null`.
    #[serde(with = "nan_as_null")]
    pub values: Vec<f64>,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.is_finite().then_some(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v = Vec::<Option<f64>>::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

impl Series {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            columns: Vec::new(),
        }
    }

    pub fn column(mut self, name: &str, values: impl IntoIterator<Item = f64>) -> Self {
        self.columns.push(Column {
            name: name.to_string(),
            values: values.into_iter().collect(),
        });
        self
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        writeln!(w, "{}", header.join(","))?;
        let rows = self.columns.iter().map(|c| c.values.len()).max().unwrap_or(0);
        for i in 0..rows {
            let row: Vec<String> = self
                .columns
                .iter()
                .map(|c| c.values.get(i).map_or(String::new(), |v| v.to_string()))
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Everything one `run` produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub version: String,
    pub timestamp: String,
    pub seed: u64,
    pub experiment: String,
    pub config: ExperimentConfig,
    /// Headline scalars, keyed by metric name (rates in 1/s).
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub fits: Vec<FitResult>,
    #[serde(default)]
    pub series: Vec<Series>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ResultBundle {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            seed: config.seed,
            experiment: config.experiment.name().to_string(),
            config: config.clone(),
            metrics: BTreeMap::new(),
            fits: Vec::new(),
            series: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    /// Writes `<stem>.json` and one `<stem>_<series>.csv` per series.
    pub fn write(&self, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let stem = self.config.stem();
        let mut written = Vec::new();
        let json = dir.join(format!("{stem}.json"));
        fs::write(&json, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", json.display()))?;
        written.push(json);
        for s in &self.series {
            let path = dir.join(format!("{stem}_{}.csv", s.name));
            let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            s.write_csv(std::io::BufWriter::new(file))?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let s = Series::new("x").column("m", [0.0, 1.0]).column("p", [1.0, 0.5]);
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "m,p\n0,1\n1,0.5\n");
    }
}
