//! Score CSV: header `pair_id,group,kind,score`, one comparison per row.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::fairness::{ComparisonScoreSet, PairKind, ScoreEntry};

pub const HEADER: [&str; 4] = ["pair_id", "group", "kind", "score"];

pub fn read_scores_csv<R: Read>(source: R) -> Result<ComparisonScoreSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers().map_err(|e| csv_error(&e, 1))?.clone();
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(HEADER) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| Error::Csv {
            line: 1,
            message: format!("missing column {name:?}"),
        })?;
    }
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |k: usize| {
            record.get(columns[k]).ok_or_else(|| Error::Csv { line, message: format!("missing {} field", HEADER[k]) })
        };
        let kind = match field(2)? {
            "genuine" => PairKind::Genuine,
            "imposter" => PairKind::Imposter,
            other => return Err(Error::Csv { line, message: format!("unknown kind {other:?}") }),
        };
        let raw = field(3)?;
        let score: f64 = raw
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| Error::Csv { line, message: format!("unparseable score {raw:?}") })?;
        entries.push(ScoreEntry { pair_id: field(0)?.to_string(), group: field(1)?.to_string(), kind, score });
    }
    ComparisonScoreSet::new(entries)
}

pub fn write_scores_csv<W: Write>(entries: &[ScoreEntry], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Csv { line: 0, message: e.to_string() };
    writer.write_record(HEADER).map_err(io)?;
    for e in entries {
        let kind = match e.kind {
            PairKind::Genuine => "genuine",
            PairKind::Imposter => "imposter",
        };
        writer.write_record([e.pair_id.as_str(), e.group.as_str(), kind, &e.score.to_string()]).map_err(io)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: &csv::Error, fallback_line: u64) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(fallback_line);
    Error::Csv { line, message: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_line_fixture() {
        let text = "pair_id,group,kind,score\n\
                    p1,C-C,genuine,0.81\n\
                    p2,C-C,imposter,0.12\n\
                    p3,E-E,genuine,0.77\n\
                    p4,E-E,imposter,-0.05\n";
        let set = read_scores_csv(text.as_bytes()).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.groups(), vec!["C-C".to_string(), "E-E".to_string()]);
        assert_eq!(set.fmr("E-E", -0.05).unwrap(), 1.0);
        assert_eq!(set.entries()[3].score, -0.05);
    }

    #[test]
    fn bad_kind_names_line() {
        let text = "pair_id,group,kind,score\np1,C-C,genuine,0.8\np2,C-C,genuin,0.1\n";
        match read_scores_csv(text.as_bytes()) {
            Err(Error::Csv { line: 3, message }) => assert!(message.contains("genuin")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_score_and_missing_column() {
        let text = "pair_id,group,kind,score\np1,C-C,genuine,abc\n";
        assert!(matches!(read_scores_csv(text.as_bytes()), Err(Error::Csv { line: 2, .. })));
        let text = "pair_id,group,score\np1,C-C,0.3\n";
        assert!(matches!(read_scores_csv(text.as_bytes()), Err(Error::Csv { line: 1, .. })));
    }

    #[test]
    fn header_only_is_empty() {
        let set = read_scores_csv("pair_id,group,kind,score\n".as_bytes()).unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn write_then_read() {
        let entries = vec![
            ScoreEntry { pair_id: "a".into(), group: "m-m".into(), kind: PairKind::Genuine, score: 0.1 + 0.2 },
            ScoreEntry { pair_id: "b".into(), group: "f-f".into(), kind: PairKind::Imposter, score: -1e-7 },
        ];
        let mut buf = Vec::new();
        write_scores_csv(&entries, &mut buf).unwrap();
        let set = read_scores_csv(&buf[..]).unwrap();
        assert_eq!(set.entries(), &entries[..]);
    }
}
