//! Segment-level F1, multi-run summaries and per-epoch entropy series.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::NULL_LABELS;
use crate::error::{Error, Result};

/// How label strings map to segments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentScheme {
    /// `B-x` opens a segment, `I-x` continues one of type `x` (or opens it if none is open).
    Bio,
    /// A maximal run of one non-null label is a segment.
    Raw,
}

impl fmt::Display for SegmentScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentScheme::Bio => "BIO",
            SegmentScheme::Raw => "raw",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl SegmentCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    /// Percent, 0 when there is nothing to score.
    pub fn f1(&self) -> f64 {
        let denom = self.gold + self.predicted;
        if denom == 0 {
            0.0
        } else {
            200.0 * self.correct as f64 / denom as f64
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        100.0 * a as f64 / b as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub scheme: SegmentScheme,
    pub overall: SegmentCounts,
    pub per_label: BTreeMap<String, SegmentCounts>,
}

impl F1Report {
    pub fn f1(&self) -> f64 {
        self.overall.f1()
    }
}

impl fmt::Display for F1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = &self.overall;
        writeln!(
            f,
            "segments ({} scheme): gold {} predicted {} correct {}",
            self.scheme, o.gold, o.predicted, o.correct
        )?;
        writeln!(f, "precision {:.2} recall {:.2} F1 {:.2}", o.precision(), o.recall(), o.f1())?;
        for (label, c) in &self.per_label {
            writeln!(
                f,
                "  {label:<24} P {:6.2} R {:6.2} F1 {:6.2} ({}/{}/{})",
                c.precision(),
                c.recall(),
                c.f1(),
                c.correct,
                c.predicted,
                c.gold
            )?;
        }
        Ok(())
    }
}

fn is_null(label: &str) -> bool {
    NULL_LABELS.contains(&label)
}

/// BIO when every non-null label in the inventory carries a `B-` or `I-` prefix.
pub fn detect_scheme<'a>(labels: impl IntoIterator<Item = &'a str>) -> SegmentScheme {
    let mut any = false;
    for l in labels.into_iter().filter(|l| !is_null(l)) {
        any = true;
        if !(l.starts_with("B-") || l.starts_with("I-")) {
            return SegmentScheme::Raw;
        }
    }
    if any {
        SegmentScheme::Bio
    } else {
        SegmentScheme::Raw
    }
}

/// `(start, end_exclusive, type)` for one sentence.
pub fn segments(labels: &[String], scheme: SegmentScheme) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    let mut open: Option<(usize, String)> = None;
    for (i, l) in labels.iter().enumerate() {
        let (starts, kind) = if is_null(l) {
            (false, None)
        } else {
            match scheme {
                SegmentScheme::Raw => {
                    let cont = matches!(&open, Some((_, t)) if t == l);
                    (!cont, Some(l.as_str()))
                }
                SegmentScheme::Bio => {
                    let (prefix, t) = l.split_at(2);
                    let cont = prefix == "I-" && matches!(&open, Some((_, o)) if o == t);
                    (!cont, Some(t))
                }
            }
        };
        if kind.is_none() || starts {
            if let Some((s, t)) = open.take() {
                out.push((s, i, t));
            }
        }
        if starts {
            open = Some((i, kind.unwrap_or_default().to_string()));
        }
    }
    if let Some((s, t)) = open {
        out.push((s, labels.len(), t));
    }
    out
}

/// Segment F1 over paired gold and predicted label sequences.
pub fn score_f1(gold: &[Vec<String>], predicted: &[Vec<String>]) -> Result<F1Report> {
    if gold.len() != predicted.len() {
        return Err(Error::contract(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            predicted.len()
        )));
    }
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if g.len() != p.len() {
            return Err(Error::contract(format!("sentence {i}: {} gold labels, {} predicted", g.len(), p.len())));
        }
    }
    let scheme = detect_scheme(gold.iter().chain(predicted).flatten().map(String::as_str));
    let mut overall = SegmentCounts::default();
    let mut per_label: BTreeMap<String, SegmentCounts> = BTreeMap::new();
    for (g, p) in gold.iter().zip(predicted) {
        let gs = segments(g, scheme);
        let ps = segments(p, scheme);
        for s in &gs {
            overall.gold += 1;
            per_label.entry(s.2.clone()).or_default().gold += 1;
        }
        for s in &ps {
            overall.predicted += 1;
            let entry = per_label.entry(s.2.clone()).or_default();
            entry.predicted += 1;
            if gs.contains(s) {
                overall.correct += 1;
                entry.correct += 1;
            }
        }
    }
    Ok(F1Report {
        scheme,
        overall,
        per_label,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
}

pub fn summarize_runs(scores: &[f64]) -> Result<RunSummary> {
    if scores.is_empty() {
        return Err(Error::contract("no runs to summarize"));
    }
    Ok(RunSummary {
        runs: scores.len(),
        max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: scores.iter().copied().fold(f64::INFINITY, f64::min),
        mean: scores.iter().sum::<f64>() / scores.len() as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub epoch: usize,
    /// Mean per-word negative log-likelihood, natural log.
    pub nll: f64,
    pub log10_nll: f64,
}

/// Training-set entropy per epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EntropySeries {
    pub points: Vec<EntropyPoint>,
}

impl EntropySeries {
    pub fn push(&mut self, nll: f64) {
        self.points.push(EntropyPoint {
            epoch: self.points.len() + 1,
            nll,
            log10_nll: nll.log10(),
        });
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.nll)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.points {
            w.serialize(p).map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("writing entropy series", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let points = r
            .deserialize()
            .collect::<std::result::Result<Vec<EntropyPoint>, _>>()
            .map_err(|e| Error::Format(e.to_string()))?;
        Ok(EntropySeries { points })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn boundary_error_fixture() {
        let gold = vec![labels("O B-a I-a O B-b"), labels("B-c O"), labels("O O B-a")];
        let pred = vec![labels("O B-a O O B-b"), labels("B-c O"), labels("O O B-a")];
        let r = score_f1(&gold, &pred).unwrap();
        assert_eq!(r.scheme, SegmentScheme::Bio);
        assert_eq!(
            r.overall,
            SegmentCounts {
                gold: 4,
                predicted: 4,
                correct: 3
            }
        );
        assert_eq!(r.f1(), 75.0);
        assert_eq!(r.per_label["a"], SegmentCounts { gold: 2, predicted: 2, correct: 1 });
        assert_eq!(r.per_label["b"].f1(), 100.0);
    }

    #[test]
    fn identical_sequences_score_perfectly() {
        let gold = vec![labels("B-x I-x O B-y"), labels("O O")];
        let r = score_f1(&gold, &gold).unwrap();
        assert_eq!(r.f1(), 100.0);
        assert_eq!(r.overall.precision(), 100.0);
    }

    #[test]
    fn all_null_predictions_score_zero() {
        let gold = vec![labels("B-x I-x O B-y")];
        let pred = vec![labels("O O O O")];
        let r = score_f1(&gold, &pred).unwrap();
        assert_eq!(r.overall.predicted, 0);
        assert_eq!(r.f1(), 0.0);
        let empty = score_f1(&[labels("O")], &[labels("O")]).unwrap();
        assert_eq!(empty.f1(), 0.0);
    }

    #[test]
    fn bio_segment_rules() {
        let s = segments(&labels("I-a I-a B-a I-b O I-b"), SegmentScheme::Bio);
        assert_eq!(
            s,
            vec![
                (0, 2, "a".into()),
                (2, 3, "a".into()),
                (3, 4, "b".into()),
                (5, 6, "b".into())
            ]
        );
    }

    #[test]
    fn raw_scheme_groups_runs() {
        let l = labels("fromloc fromloc O toloc toloc toloc - fromloc");
        assert_eq!(detect_scheme(l.iter().map(String::as_str)), SegmentScheme::Raw);
        let s = segments(&l, SegmentScheme::Raw);
        assert_eq!(s, vec![(0, 2, "fromloc".into()), (3, 6, "toloc".into()), (7, 8, "fromloc".into())]);
        let pred = vec![labels("fromloc O O toloc toloc toloc - fromloc")];
        let r = score_f1(&[l], &pred).unwrap();
        assert_eq!(r.overall, SegmentCounts { gold: 3, predicted: 3, correct: 2 });
        assert!(format!("{r}").contains("raw scheme"));
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(score_f1(&[labels("O")], &[]).is_err());
        assert!(score_f1(&[labels("O O")], &[labels("O")]).is_err());
    }

    #[test]
    fn run_summary() {
        let s = summarize_runs(&[94.0, 95.5, 94.5]).unwrap();
        assert_eq!((s.runs, s.max, s.min), (3, 95.5, 94.0));
        assert!((s.mean - 94.666_666_666_666_67).abs() < 1e-12);
        assert!(summarize_runs(&[]).is_err());
    }

    #[test]
    fn entropy_csv_round_trip() {
        let mut e = EntropySeries::default();
        for v in [2.302585092994046, 0.123456789012345678, 1e-7] {
            e.push(v);
        }
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,nll,log10_nll\n1,"));
        let back = EntropySeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.points[2].log10_nll, -7.0);
    }
}
