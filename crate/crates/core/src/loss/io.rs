//! Caching of loss samples: one value per line (CSV) or raw little-endian
//! f64 (binary), each with a JSON sidecar holding the seed and model.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{LossSample, SeedRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    Csv,
    Binary,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    format: SampleFormat,
    m: usize,
    #[serde(flatten)]
    record: SeedRecord,
}

/// Path of the sidecar written next to `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl LossSample {
    pub fn save(&self, path: &Path, format: SampleFormat) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        match format {
            SampleFormat::Csv => {
                for v in self.values() {
                    writeln!(w, "{v}")?;
                }
            }
            SampleFormat::Binary => {
                for v in self.values() {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        w.flush()?;
        let sidecar = Sidecar {
            format,
            m: self.len(),
            record: self.record().clone(),
        };
        std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    /// Reads a sample and its sidecar; the value count must match.
    pub fn load(path: &Path) -> Result<Self> {
        let sidecar: Sidecar =
            serde_json::from_reader(BufReader::new(File::open(sidecar_path(path))?))?;
        let values = match sidecar.format {
            SampleFormat::Csv => {
                let mut rdr = csv::ReaderBuilder::new()
                    .has_headers(false)
                    .from_path(path)?;
                let mut out = Vec::with_capacity(sidecar.m);
                for rec in rdr.records() {
                    let rec = rec?;
                    let field = rec.get(0).unwrap_or("");
                    out.push(
                        field
                            .trim()
                            .parse::<f64>()
                            .map_err(|e| Error::Format(format!("{field:?}: {e}")))?,
                    );
                }
                out
            }
            SampleFormat::Binary => {
                let mut bytes = Vec::new();
                BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
                if bytes.len() % 8 != 0 {
                    return Err(Error::Format(
                        "binary sample length is not a multiple of 8".into(),
                    ));
                }
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect()
            }
        };
        if values.len() != sidecar.m {
            return Err(Error::Format(format!(
                "sidecar says m = {} but file has {} values",
                sidecar.m,
                values.len()
            )));
        }
        LossSample::from_values(values, sidecar.record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{simulate_total_losses, PortfolioParams, SeverityModel};

    #[test]
    fn round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let s = simulate_total_losses(
            &PortfolioParams::default(),
            &SeverityModel::Lognormal {
                log_mean: 1.71,
                log_sd: 1.09,
            },
            1000,
            3,
        )
        .unwrap();
        for (name, fmt) in [
            ("a.csv", SampleFormat::Csv),
            ("a.bin", SampleFormat::Binary),
        ] {
            let p = dir.path().join(name);
            s.save(&p, fmt).unwrap();
            assert_eq!(LossSample::load(&p).unwrap(), s);
        }
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = LossSample::from_values(
            vec![1.0, 2.0],
            SeedRecord {
                seed: 1,
                model: None,
            },
        )
        .unwrap();
        s.save(&p, SampleFormat::Csv).unwrap();
        std::fs::write(&p, "1\n2\n3\n").unwrap();
        assert!(matches!(LossSample::load(&p), Err(Error::Format(_))));
    }
}
