//! CSV tables of generation records and per-epoch losses.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::engine::GenerationRecord;
use crate::error::{Error, Result};
use crate::io::format::sig6;
use crate::metrics::MetricTriple;

pub const RECORDS_HEADER: &str =
    "replicate,generation,x_raw,c_raw,s_raw,x,c,s,loss_dec,loss_enc,loss_auto,ms";
pub const LOSSES_HEADER: &str = "replicate,generation,network,epoch,loss";

/// One parsed line of the records table. Losses are final-epoch means.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRow {
    pub replicate: usize,
    pub generation: usize,
    pub raw: MetricTriple,
    pub corrected: MetricTriple,
    pub loss_dec: Option<f64>,
    pub loss_enc: Option<f64>,
    pub loss_auto: Option<f64>,
    pub ms: Option<f64>,
}

impl MetricRow {
    pub fn from_record(r: &GenerationRecord, timing: bool) -> Self {
        MetricRow {
            replicate: r.replicate,
            generation: r.generation,
            raw: r.raw,
            corrected: r.corrected,
            loss_dec: r.losses.last_decoder(),
            loss_enc: r.losses.last_encoder(),
            loss_auto: r.losses.last_auto(),
            ms: timing.then_some(r.duration_ms),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Network {
    Decoder,
    Encoder,
    Auto,
}

impl Network {
    pub const ALL: [Network; 3] = [Network::Decoder, Network::Encoder, Network::Auto];

    pub fn name(self) -> &'static str {
        match self {
            Network::Decoder => "decoder",
            Network::Encoder => "encoder",
            Network::Auto => "auto",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Network::ALL.into_iter().find(|n| n.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossRow {
    pub replicate: usize,
    pub generation: usize,
    pub network: Network,
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
}

/// Flattens per-epoch losses, ordered by (replicate, generation, network, epoch).
pub fn loss_rows(records: &[GenerationRecord]) -> Vec<LossRow> {
    let mut rows = Vec::new();
    for r in records {
        let series = [
            (Network::Decoder, &r.losses.decoder),
            (Network::Encoder, &r.losses.encoder),
            (Network::Auto, &r.losses.auto),
        ];
        for (network, values) in series {
            for (e, &loss) in values.iter().flatten().enumerate() {
                rows.push(LossRow {
                    replicate: r.replicate,
                    generation: r.generation,
                    network,
                    epoch: e + 1,
                    loss,
                });
            }
        }
    }
    rows.sort_by_key(|l| (l.replicate, l.generation, l.network, l.epoch));
    rows
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn opt(v: Option<f64>) -> String {
    v.map(sig6).unwrap_or_default()
}

/// Serializes rows sorted by (replicate, generation).
pub fn metrics_csv(rows: &[MetricRow]) -> Result<Vec<u8>> {
    let mut sorted: Vec<&MetricRow> = rows.iter().collect();
    sorted.sort_by_key(|r| (r.replicate, r.generation));
    let mut w = writer(Vec::new());
    w.write_record(RECORDS_HEADER.split(','))?;
    for r in sorted {
        w.write_record([
            r.replicate.to_string(),
            r.generation.to_string(),
            sig6(r.raw.x),
            sig6(r.raw.c),
            sig6(r.raw.s),
            sig6(r.corrected.x),
            sig6(r.corrected.c),
            sig6(r.corrected.s),
            opt(r.loss_dec),
            opt(r.loss_enc),
            opt(r.loss_auto),
            opt(r.ms),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<buffer>", e.into_error()))
}

pub fn losses_csv(rows: &[LossRow]) -> Result<Vec<u8>> {
    let mut w = writer(Vec::new());
    w.write_record(LOSSES_HEADER.split(','))?;
    for r in rows {
        w.write_record([
            r.replicate.to_string(),
            r.generation.to_string(),
            r.network.name().to_string(),
            r.epoch.to_string(),
            sig6(r.loss),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<buffer>", e.into_error()))
}

/// Writes the records table; the `ms` column is filled only with `timing`.
pub fn write_records(records: &[GenerationRecord], path: &Path, timing: bool) -> Result<()> {
    let rows: Vec<MetricRow> = records
        .iter()
        .map(|r| MetricRow::from_record(r, timing))
        .collect();
    write_bytes(path, &metrics_csv(&rows)?)
}

pub fn write_losses(records: &[GenerationRecord], path: &Path) -> Result<()> {
    write_bytes(path, &losses_csv(&loss_rows(records))?)
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

struct Table<'a> {
    path: &'a Path,
    records: Vec<(usize, csv::StringRecord)>,
}

fn parse_table<'a>(text: &str, path: &'a Path, header: &str) -> Result<Table<'a>> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let first = text.lines().next().unwrap_or("");
    if first.trim_end_matches('\r') != header {
        return Err(perr(1, format!("expected header `{header}`")));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            perr(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        records.push((line, rec));
    }
    Ok(Table { path, records })
}

impl Table<'_> {
    fn field<T: std::str::FromStr>(
        &self,
        line: usize,
        rec: &csv::StringRecord,
        i: usize,
        name: &str,
    ) -> Result<T> {
        rec.get(i).unwrap_or("").parse().map_err(|_| Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: format!("bad `{name}` value `{}`", rec.get(i).unwrap_or("")),
        })
    }

    fn optional(
        &self,
        line: usize,
        rec: &csv::StringRecord,
        i: usize,
        name: &str,
    ) -> Result<Option<f64>> {
        match rec.get(i) {
            None | Some("") => Ok(None),
            Some(_) => self.field(line, rec, i, name).map(Some),
        }
    }
}

pub fn parse_records(text: &str, path: &Path) -> Result<Vec<MetricRow>> {
    let t = parse_table(text, path, RECORDS_HEADER)?;
    let names: Vec<&str> = RECORDS_HEADER.split(',').collect();
    let mut rows = Vec::with_capacity(t.records.len());
    for (line, rec) in &t.records {
        let f = |i: usize| t.field::<f64>(*line, rec, i, names[i]);
        let o = |i: usize| t.optional(*line, rec, i, names[i]);
        rows.push(MetricRow {
            replicate: t.field(*line, rec, 0, names[0])?,
            generation: t.field(*line, rec, 1, names[1])?,
            raw: MetricTriple {
                x: f(2)?,
                c: f(3)?,
                s: f(4)?,
            },
            corrected: MetricTriple {
                x: f(5)?,
                c: f(6)?,
                s: f(7)?,
            },
            loss_dec: o(8)?,
            loss_enc: o(9)?,
            loss_auto: o(10)?,
            ms: o(11)?,
        });
    }
    Ok(rows)
}

pub fn read_records(path: &Path) -> Result<Vec<MetricRow>> {
    parse_records(&read_text(path)?, path)
}

pub fn parse_losses(text: &str, path: &Path) -> Result<Vec<LossRow>> {
    let t = parse_table(text, path, LOSSES_HEADER)?;
    let mut rows = Vec::with_capacity(t.records.len());
    for (line, rec) in &t.records {
        let name = rec.get(2).unwrap_or("");
        let network = Network::parse(name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: *line,
            message: format!("unknown network `{name}`"),
        })?;
        rows.push(LossRow {
            replicate: t.field(*line, rec, 0, "replicate")?,
            generation: t.field(*line, rec, 1, "generation")?,
            network,
            epoch: t.field(*line, rec, 3, "epoch")?,
            loss: t.field(*line, rec, 4, "loss")?,
        });
    }
    Ok(rows)
}

pub fn read_losses(path: &Path) -> Result<Vec<LossRow>> {
    parse_losses(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EpochLosses;

    fn record(rep: usize, g: usize) -> GenerationRecord {
        GenerationRecord {
            replicate: rep,
            generation: g,
            raw: MetricTriple {
                x: 0.123456789,
                c: 1.0,
                s: 0.0,
            },
            corrected: MetricTriple {
                x: 0.5,
                c: 2.0 / 3.0,
                s: 1e-7,
            },
            losses: EpochLosses {
                decoder: Some(vec![0.25, 0.125]),
                encoder: None,
                auto: Some(vec![5.0, 4.0]),
            },
            duration_ms: 12.5,
        }
    }

    #[test]
    fn header_only_when_empty() {
        let bytes = metrics_csv(&[]).unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            format!("{RECORDS_HEADER}\n")
        );
    }

    #[test]
    fn rows_sorted_and_absent_losses_empty() {
        let recs = [record(1, 1), record(0, 2), record(0, 1)];
        let rows: Vec<_> = recs
            .iter()
            .map(|r| MetricRow::from_record(r, false))
            .collect();
        let text = String::from_utf8(metrics_csv(&rows).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "0,1,0.123457,1,0,0.5,0.666667,1e-07,0.125,,4,");
        assert!(lines[2].starts_with("0,2,"));
        assert!(lines[3].starts_with("1,1,"));
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    #[test]
    fn round_trip_at_six_digits() {
        let rows = vec![MetricRow::from_record(&record(3, 7), true)];
        let text = String::from_utf8(metrics_csv(&rows).unwrap()).unwrap();
        let back = parse_records(&text, Path::new("r.csv")).unwrap();
        assert_eq!(back.len(), 1);
        let b = &back[0];
        assert_eq!((b.replicate, b.generation), (3, 7));
        assert!((b.raw.x - 0.123457).abs() < 1e-12);
        assert!((b.corrected.c - 0.666667).abs() < 1e-12);
        assert_eq!(b.loss_enc, None);
        assert_eq!(b.ms, Some(12.5));
    }

    #[test]
    fn losses_flatten_and_parse() {
        let rows = loss_rows(&[record(0, 1)]);
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2].network, Network::Auto);
        assert_eq!(rows[2].epoch, 1);
        let text = String::from_utf8(losses_csv(&rows).unwrap()).unwrap();
        assert_eq!(parse_losses(&text, Path::new("l.csv")).unwrap(), rows);
    }

    #[test]
    fn wrong_header_rejected() {
        let err = parse_records("a,b\n1,2\n", Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
