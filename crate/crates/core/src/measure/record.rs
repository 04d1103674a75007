use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classification reported at the end of a shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FinalLabel {
    /// Fock level 0..=3 from the cascaded or photon-number-resolved readout.
    Fock(u8),
    ZeroL,
    OneL,
    Erasure,
}

impl FinalLabel {
    pub fn is_logical(self) -> bool {
        matches!(self, FinalLabel::Fock(0 | 2) | FinalLabel::ZeroL | FinalLabel::OneL)
    }

    pub fn is_erasure(self) -> bool {
        !self.is_logical()
    }

    /// Logical reading: `Some(false)` for 0_L, `Some(true)` for 1_L.
    pub fn logical_value(self) -> Option<bool> {
        match self {
            FinalLabel::Fock(0) | FinalLabel::ZeroL => Some(false),
            FinalLabel::Fock(2) | FinalLabel::OneL => Some(true),
            _ => None,
        }
    }
}

impl fmt::Display for FinalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FinalLabel::Fock(n) => write!(f, "{n}"),
            FinalLabel::ZeroL => f.write_str("0L"),
            FinalLabel::OneL => f.write_str("1L"),
            FinalLabel::Erasure => f.write_str("E"),
        }
    }
}

impl FromStr for FinalLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "0L" => Ok(FinalLabel::ZeroL),
            "1L" => Ok(FinalLabel::OneL),
            "E" => Ok(FinalLabel::Erasure),
            _ => match s.parse::<u8>() {
                Ok(n) if n <= 3 => Ok(FinalLabel::Fock(n)),
                _ => Err(Error::InvalidState(format!("unknown label `{s}`"))),
            },
        }
    }
}

impl Serialize for FinalLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FinalLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One Monte Carlo shot: check outcomes in time order and the final readout.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "RecordRepr", try_from = "RecordRepr")]
pub struct ShotRecord {
    check_bits: Vec<bool>,
    final_label: FinalLabel,
}

impl ShotRecord {
    pub fn new(check_bits: Vec<bool>, final_label: FinalLabel) -> Self {
        Self {
            check_bits,
            final_label,
        }
    }

    pub fn check_bits(&self) -> &[bool] {
        &self.check_bits
    }

    /// `true` iff any check reported '1'.
    pub fn erased(&self) -> bool {
        self.check_bits.iter().any(|&b| b)
    }

    pub fn final_label(&self) -> FinalLabel {
        self.final_label
    }

    pub fn bit_string(&self) -> String {
        self.check_bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordRepr {
    check_bits: String,
    erased: bool,
    final_label: FinalLabel,
}

impl From<ShotRecord> for RecordRepr {
    fn from(r: ShotRecord) -> Self {
        Self {
            check_bits: r.bit_string(),
            erased: r.erased(),
            final_label: r.final_label,
        }
    }
}

impl TryFrom<RecordRepr> for ShotRecord {
    type Error = Error;

    fn try_from(r: RecordRepr) -> Result<Self> {
        let bits = r
            .check_bits
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::InvalidState(format!("bad check bit `{c}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let rec = ShotRecord::new(bits, r.final_label);
        if rec.erased() != r.erased {
            return Err(Error::InvalidState(
                "erased flag disagrees with check bits".into(),
            ));
        }
        Ok(rec)
    }
}

fn io_err(e: impl fmt::Display) -> Error {
    Error::Numerical(format!("i/o: {e}"))
}

/// One JSON object per line.
pub fn write_shots_ndjson<W: Write>(records: &[ShotRecord], mut w: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(io_err)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    Ok(())
}

pub fn read_shots_ndjson<R: BufRead>(r: R) -> Result<Vec<ShotRecord>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io_err)?);
    }
    Ok(out)
}

/// CSV with columns `shot_index, check_bits, erased, final_label`.
pub fn write_shots_csv<W: Write>(records: &[ShotRecord], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["shot_index", "check_bits", "erased", "final_label"])
        .map_err(io_err)?;
    for (i, r) in records.iter().enumerate() {
        wtr.write_record([
            i.to_string(),
            r.bit_string(),
            r.erased().to_string(),
            r.final_label.to_string(),
        ])
        .map_err(io_err)?;
    }
    wtr.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erased_follows_bits() {
        assert!(!ShotRecord::new(vec![false, false], FinalLabel::Fock(2)).erased());
        assert!(ShotRecord::new(vec![false, true], FinalLabel::Fock(0)).erased());
        assert!(!ShotRecord::new(vec![], FinalLabel::ZeroL).erased());
    }

    #[test]
    fn ndjson_round_trip_and_consistency_check() {
        let recs = vec![
            ShotRecord::new(vec![false, true, false], FinalLabel::Fock(1)),
            ShotRecord::new(vec![false], FinalLabel::OneL),
        ];
        let mut buf = Vec::new();
        write_shots_ndjson(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"check_bits":"010","erased":true,"final_label":"1"}"#));
        assert_eq!(read_shots_ndjson(&buf[..]).unwrap(), recs);
        let bad = r#"{"check_bits":"00","erased":true,"final_label":"0"}"#;
        assert!(read_shots_ndjson(bad.as_bytes()).is_err());
    }

    #[test]
    fn csv_layout() {
        let recs = vec![ShotRecord::new(vec![true], FinalLabel::Erasure)];
        let mut buf = Vec::new();
        write_shots_csv(&recs, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "shot_index,check_bits,erased,final_label\n0,1,true,E\n"
        );
    }
}
