//! Sequence and metrics CSV formats.
//!
//! Reals are written as the shortest decimal that parses back to the same
//! double, so a write/read cycle is exact. Lines end in LF.

use crate::error::{Error, Result};
use crate::metrics::MetricsRow;
use crate::pointset::{CirclePointSet, Provenance};

pub const SEQUENCE_HEADER: [&str; 3] = ["index", "angle", "provenance"];
pub const METRICS_HEADER: [&str; 10] = [
    "N",
    "d_l1",
    "d_l2_sq",
    "d_linf",
    "f_l1",
    "f_l2_sq",
    "logpot_l1",
    "logpot_l2_sq",
    "a_N",
    "pair_energy",
];

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// `index,angle,provenance` rows in insertion order.
pub fn sequence_to_csv(set: &CirclePointSet) -> Result<String> {
    let mut w = writer();
    w.write_record(SEQUENCE_HEADER).map_err(csv_error)?;
    for (i, p) in set.points().iter().enumerate() {
        w.write_record([i.to_string(), p.angle.to_string(), p.provenance.name().to_string()])
            .map_err(csv_error)?;
    }
    finish(w)
}

/// Parses a sequence CSV. Indices must run 0, 1, 2, ... and angles must be
/// distinct points of `[0, 1)`; errors carry the 1-based line number.
pub fn sequence_from_csv(text: &str) -> Result<CirclePointSet> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut records = r.records();
    match records.next() {
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty input, expected header `index,angle,provenance`".into(),
            })
        }
        Some(rec) => {
            let rec = rec.map_err(csv_error)?;
            if rec.iter().ne(SEQUENCE_HEADER) {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `index,angle,provenance`, got `{}`", join(&rec)),
                });
            }
        }
    }
    let mut set = CirclePointSet::new();
    for (expected, rec) in records.enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(expected as u64 + 2, |p| p.line());
        let parse_error = |message: String| Error::Parse { line, message };
        if rec.len() != 3 {
            return Err(parse_error(format!("expected 3 fields, got {}", rec.len())));
        }
        let index: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| parse_error(format!("bad index `{}`", &rec[0])))?;
        if index != expected {
            return Err(parse_error(format!("index {index} out of sequence, expected {expected}")));
        }
        let angle: f64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| parse_error(format!("bad angle `{}`", &rec[1])))?;
        let provenance: Provenance = rec[2]
            .trim()
            .parse()
            .map_err(|e: Error| parse_error(e.to_string()))?;
        set.push(angle, provenance).map_err(|e| match e {
            Error::Distinctness { .. } | Error::Domain(_) => parse_error(e.to_string()),
            other => other,
        })?;
    }
    Ok(set)
}

fn join(rec: &csv::StringRecord) -> String {
    rec.iter().collect::<Vec<_>>().join(",")
}

/// Metrics rows under `METRICS_HEADER`.
pub fn metrics_to_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = writer();
    w.write_record(METRICS_HEADER).map_err(csv_error)?;
    for r in rows {
        let fields = [
            r.d_l1,
            r.d_l2_sq,
            r.d_linf,
            r.f_l1,
            r.f_l2_sq,
            r.logpot_l1,
            r.logpot_l2_sq,
            r.a_n,
            r.pair_energy,
        ];
        let mut record = vec![r.n.to_string()];
        record.extend(fields.iter().map(f64::to_string));
        w.write_record(&record).map_err(csv_error)?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{prefix_metrics, PrefixSelector};
    use proptest::prelude::*;

    #[test]
    fn sequence_round_trip_and_format() {
        let mut s = CirclePointSet::new();
        s.push(0.0, Provenance::Seed).unwrap();
        s.push(0.5, Provenance::Greedy).unwrap();
        s.push(0.1, Provenance::Manual).unwrap();
        let text = sequence_to_csv(&s).unwrap();
        assert_eq!(text, "index,angle,provenance\n0,0,seed\n1,0.5,greedy\n2,0.1,manual\n");
        assert_eq!(sequence_from_csv(&text).unwrap(), s);
    }

    #[test]
    fn kronecker_first_element_prints_shortest() {
        let x = 2f64.sqrt() - 1.0;
        assert_eq!(x.to_string(), "0.41421356237309515");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let cases = [
            ("", 1),
            ("index,angle\n", 1),
            ("index,angle,provenance\n0,0.1,seed\n2,0.2,seed\n", 3),
            ("index,angle,provenance\n0,abc,seed\n", 2),
            ("index,angle,provenance\n0,0.1,seed\n1,0.7,alien\n", 3),
            ("index,angle,provenance\n0,0.1,seed\n1,0.1,seed\n", 3),
            ("index,angle,provenance\n0,1.5,seed\n", 2),
            ("index,angle,provenance\n0,0.1\n", 2),
        ];
        for (text, line) in cases {
            match sequence_from_csv(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?} gave {other:?}"),
            }
        }
    }

    #[test]
    fn header_only_is_an_empty_set() {
        assert!(sequence_from_csv("index,angle,provenance\n").unwrap().is_empty());
    }

    #[test]
    fn metrics_csv_layout() {
        let s = CirclePointSet::from_angles(&[0.0, 0.5], Provenance::Seed).unwrap();
        let rows = prefix_metrics(&s, PrefixSelector::All).unwrap();
        let text = metrics_to_csv(&rows).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), METRICS_HEADER.join(","));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "1");
        assert_eq!(first[4].parse::<f64>().unwrap(), 0.25);
        assert_eq!(first[5].parse::<f64>().unwrap(), rows[0].f_l2_sq);
        assert_eq!(lines.count(), 1);
        assert!(text.ends_with('\n') && !text.contains('\r'));
    }

    proptest! {
        #[test]
        fn sequence_csv_is_exact(raw in prop::collection::vec(0.0f64..1.0, 0..50)) {
            let mut s = CirclePointSet::new();
            for x in raw {
                let _ = s.push(x, Provenance::Greedy);
            }
            let back = sequence_from_csv(&sequence_to_csv(&s).unwrap()).unwrap();
            prop_assert_eq!(back.angles(), s.angles());
        }
    }
}
