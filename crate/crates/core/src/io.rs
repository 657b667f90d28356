//! File formats. CSV floats are written with 17 significant digits so every
//! value parses back to the same `f64`; JSON uses the shortest round-trip
//! representation.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{is_valid_generator, predicted_probabilities, Generator, PredictedState};
use crate::invariance::SweepReport;
use crate::linalg::CMatrix;
use crate::multinomial::{FrequencyVector, TrialCounts};
use crate::tomography::{FitResult, PredictionDataset, Record};
use crate::transform::TransformRow;

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, what: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: {what} `{field}` is not a number")))
}

fn parse_u64(field: &str, what: &str, line: usize) -> Result<u64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: {what} `{field}` is not a non-negative integer")))
}

/// Writes `bytes` to `path` through a temporary sibling and a rename, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

fn csv_records<R: Read>(reader: R, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let got: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if got.len() < header.len() || got.iter().zip(header).any(|(a, b)| a != b) {
        return Err(Error::Parse(format!(
            "expected header `{}`, got `{}`",
            header.join(","),
            got.join(",")
        )));
    }
    r.records().map(|rec| rec.map_err(Error::from)).collect()
}

/// `outcome_index,count,frequency`.
pub fn counts_csv(counts: &TrialCounts) -> Result<Vec<u8>> {
    let n = counts.trials() as f64;
    csv_bytes(
        &["outcome_index", "count", "frequency"],
        counts
            .counts()
            .iter()
            .enumerate()
            .map(|(j, &l)| vec![j.to_string(), l.to_string(), fmt_f64(l as f64 / n)]),
    )
}

/// `nu,chi,zeta,re_psi,im_psi`.
pub fn transform_csv(rows: &[TransformRow]) -> Result<Vec<u8>> {
    csv_bytes(
        &["nu", "chi", "zeta", "re_psi", "im_psi"],
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.nu),
                fmt_f64(r.chi),
                fmt_f64(r.zeta),
                fmt_f64(r.re_psi),
                fmt_f64(r.im_psi),
            ]
        }),
    )
}

pub const SWEEP_HEADER: [&str; 7] = ["p", "N", "transform", "exact_sd", "mc_sd", "target_sd", "rel_departure"];

/// `p,N,transform,exact_sd,mc_sd,target_sd,rel_departure`; `mc_sd` is empty
/// when no Monte Carlo check was run.
pub fn sweep_csv(reports: &[&SweepReport]) -> Result<Vec<u8>> {
    let rows = reports.iter().flat_map(|rep| {
        rep.rows.iter().map(move |row| {
            vec![
                fmt_f64(row.p),
                rep.trials.to_string(),
                rep.transform.name().to_string(),
                fmt_f64(row.exact_sd),
                row.mc_sd.map(fmt_f64).unwrap_or_default(),
                fmt_f64(row.target_sd),
                fmt_f64(row.rel_departure),
            ]
        })
    });
    csv_bytes(&SWEEP_HEADER, rows)
}

/// `value,prob`.
pub fn distribution_csv(table: &[(f64, f64)]) -> Result<Vec<u8>> {
    csv_bytes(
        &["value", "prob"],
        table.iter().map(|(v, p)| vec![fmt_f64(*v), fmt_f64(*p)]),
    )
}

/// `t,outcome_index,re_phi,im_phi,P`.
pub fn trace_csv(states: &[PredictedState]) -> Result<Vec<u8>> {
    let rows = states.iter().flat_map(|st| {
        let p = predicted_probabilities(st);
        st.amplitudes().iter().zip(p).enumerate().map(move |(s, (a, ps))| {
            vec![
                fmt_f64(st.time()),
                s.to_string(),
                fmt_f64(a.re),
                fmt_f64(a.im),
                fmt_f64(ps),
            ]
        })
    });
    csv_bytes(&["t", "outcome_index", "re_phi", "im_phi", "P"], rows)
}

/// `time,N,nu_1,...,nu_K`.
pub fn dataset_csv(dataset: &PredictionDataset) -> Result<Vec<u8>> {
    let mut header = vec!["time".to_string(), "N".to_string()];
    header.extend((1..=dataset.order()).map(|j| format!("nu_{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_bytes(
        &header,
        dataset.records().iter().map(|r| {
            let mut row = vec![fmt_f64(r.time), r.trials.to_string()];
            row.extend(r.frequencies.freqs().iter().map(|v| fmt_f64(*v)));
            row
        }),
    )
}

pub fn read_dataset<R: Read>(reader: R) -> Result<PredictionDataset> {
    let mut r = csv::Reader::from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let order = header.len().saturating_sub(2);
    let valid = header.len() >= 4
        && header[0] == "time"
        && header[1] == "N"
        && header[2..]
            .iter()
            .enumerate()
            .all(|(j, h)| *h == format!("nu_{}", j + 1));
    if !valid {
        return Err(Error::Parse(format!(
            "dataset header must be `time,N,nu_1,...,nu_K` with K >= 2, got `{}`",
            header.join(",")
        )));
    }
    let mut records = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != order + 2 {
            return Err(Error::Parse(format!(
                "line {line}: expected {} fields, got {}",
                order + 2,
                rec.len()
            )));
        }
        let time = parse_f64(&rec[0], "time", line)?;
        let trials = parse_u64(&rec[1], "N", line)?;
        let freqs = (2..rec.len())
            .map(|c| parse_f64(&rec[c], "frequency", line))
            .collect::<Result<Vec<_>>>()?;
        records.push(Record {
            time,
            trials,
            frequencies: FrequencyVector::new(freqs, trials)?,
        });
    }
    PredictionDataset::new(records)
}

pub fn load_dataset(path: &Path) -> Result<PredictionDataset> {
    let f = fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(f)
}

/// A `K × K` complex matrix as row-major `[re, im]` pairs, with a flag
/// recording whether it satisfies the generator constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorFile {
    pub dimension: usize,
    pub entries: Vec<[f64; 2]>,
    #[serde(default)]
    pub valid: bool,
}

impl GeneratorFile {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let k = m.nrows();
        let mut entries = Vec::with_capacity(k * k);
        for s in 0..k {
            for j in 0..m.ncols() {
                entries.push([m[(s, j)].re, m[(s, j)].im]);
            }
        }
        Self {
            dimension: k,
            entries,
            valid: is_valid_generator(m),
        }
    }

    pub fn matrix(&self) -> Result<CMatrix> {
        let k = self.dimension;
        if self.entries.len() != k * k {
            return Err(Error::DimensionMismatch {
                expected: k * k,
                got: self.entries.len(),
            });
        }
        Ok(CMatrix::from_fn(k, k, |s, j| {
            let [re, im] = self.entries[s * k + j];
            Complex64::new(re, im)
        }))
    }

    /// The matrix as a validated generator; the stored flag is ignored.
    pub fn generator(&self) -> Result<Generator> {
        Generator::new(self.matrix()?)
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn from_json<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("{what}: {e}")))
}

pub fn generator_json(generator: &Generator) -> Result<Vec<u8>> {
    json_bytes(&GeneratorFile::from_matrix(generator.matrix()))
}

pub fn read_generator_json(text: &str) -> Result<Generator> {
    from_json::<GeneratorFile>(text, "generator")?.generator()
}

pub fn fit_json(fit: &FitResult) -> Result<Vec<u8>> {
    json_bytes(fit)
}

pub fn read_fit_json(text: &str) -> Result<FitResult> {
    from_json(text, "fit result")
}

/// Any serializable value as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    json_bytes(value)
}

/// Parses `value,prob` rows back, for checks and plotting scripts.
pub fn read_distribution<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    csv_records(reader, &["value", "prob"])?
        .iter()
        .enumerate()
        .map(|(i, rec)| Ok((parse_f64(&rec[0], "value", i + 2)?, parse_f64(&rec[1], "prob", i + 2)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{generator_from_params, GeneratorParams};
    use crate::multinomial::TrialCounts;

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn counts_layout() {
        let c = TrialCounts::new(vec![3, 1], 4).unwrap();
        let s = String::from_utf8(counts_csv(&c).unwrap()).unwrap();
        assert_eq!(s.lines().next(), Some("outcome_index,count,frequency"));
        assert_eq!(s.lines().nth(1), Some("0,3,7.5000000000000000e-1"));
    }

    #[test]
    fn dataset_round_trip() {
        let records = vec![
            Record {
                time: 0.0,
                trials: 10,
                frequencies: FrequencyVector::new(vec![0.3, 0.7], 10).unwrap(),
            },
            Record {
                time: 0.25,
                trials: 10,
                frequencies: FrequencyVector::new(vec![1.0 / 3.0, 2.0 / 3.0], 10).unwrap(),
            },
        ];
        let ds = PredictionDataset::new(records).unwrap();
        let bytes = dataset_csv(&ds).unwrap();
        let back = read_dataset(bytes.as_slice()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(dataset_csv(&back).unwrap(), bytes);
    }

    #[test]
    fn dataset_rejects_bad_input() {
        assert!(matches!(
            read_dataset("t,N,a,b\n0,1,0.5,0.5\n".as_bytes()),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            read_dataset("time,N,nu_1,nu_2\n0,10,0.5,0.4\n".as_bytes()),
            Err(Error::InvalidProbabilities(_))
        ));
        assert!(read_dataset("time,N,nu_1,nu_2\n0,10,x,0.5\n".as_bytes()).is_err());
    }

    #[test]
    fn generator_round_trip() {
        let g =
            generator_from_params(&GeneratorParams::new(vec![0.3, -0.2, 1.1, 0.4, 0.0, 0.7, -0.5, 0.25], 3).unwrap());
        let bytes = generator_json(&g).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("\"valid\": true"));
        assert_eq!(read_generator_json(&text).unwrap(), g);
        let bad = r#"{"dimension":2,"entries":[[1,0],[0,0],[0,0],[0,0]],"valid":true}"#;
        assert!(read_generator_json(bad).is_err());
        let flag = GeneratorFile::from_matrix(&CMatrix::identity(2, 2));
        assert!(!flag.valid);
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/out.csv");
        write_atomic(&p, b"first\n").unwrap();
        write_atomic(&p, b"second\n").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"second\n");
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn distribution_round_trip() {
        let t = vec![(0.0, 0.25), (0.5, 0.5), (1.0, 0.25)];
        assert_eq!(read_distribution(distribution_csv(&t).unwrap().as_slice()).unwrap(), t);
    }
}
