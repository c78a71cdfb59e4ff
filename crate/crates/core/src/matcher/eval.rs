use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::Model;
use crate::deptree::{DepTree, WH_WORDS};
use crate::error::Result;
use crate::kb::TripleStore;
use crate::pipeline::Example;

pub const LENGTH_BUCKETS: [&str; 3] = ["SHORT", "MID", "LONG"];

/// SHORT up to 4 tokens, MID 5 to 7, LONG 8 and more; punctuation is not
/// counted.
pub fn length_bucket(tree: &DepTree) -> &'static str {
    match tree.tokens().iter().filter(|t| !t.is_punct()).count() {
        0..=4 => "SHORT",
        5..=7 => "MID",
        _ => "LONG",
    }
}

/// The question's wh-word (lowercased), or `other`.
pub fn wh_bucket(tree: &DepTree) -> String {
    let form = tree.token(tree.answer_word()).form.to_lowercase();
    if WH_WORDS.contains(&form.as_str()) {
        form
    } else {
        "other".to_string()
    }
}

/// Index of the highest score; the first one wins ties.
pub fn select(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuestionResult {
    pub id: String,
    pub candidates: usize,
    pub chosen: Option<usize>,
    pub score: Option<f64>,
    pub f1: f64,
    pub wh: String,
    pub length: &'static str,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GroupStat {
    pub count: usize,
    pub mean_f1: f64,
    /// Questions that had no candidate at all (scored 0).
    pub no_candidates: usize,
}

impl GroupStat {
    fn of<'a>(results: impl Iterator<Item = &'a QuestionResult>) -> Self {
        let mut s = GroupStat::default();
        let mut sum = 0.0;
        for r in results {
            s.count += 1;
            sum += r.f1;
            s.no_candidates += usize::from(r.candidates == 0);
        }
        if s.count > 0 {
            s.mean_f1 = sum / s.count as f64;
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Sorted by question id.
    pub results: Vec<QuestionResult>,
    pub overall: GroupStat,
    pub by_wh: BTreeMap<String, GroupStat>,
    /// Always all three buckets, empty ones with count 0.
    pub by_length: Vec<(&'static str, GroupStat)>,
}

fn rows(out: &mut String, bucket: &str, s: &GroupStat) {
    let _ = writeln!(out, "mean_f1\t{bucket}\t{:.6}", s.mean_f1);
    let _ = writeln!(out, "count\t{bucket}\t{}", s.count);
    let _ = writeln!(out, "no_candidates\t{bucket}\t{}", s.no_candidates);
}

impl EvalReport {
    pub fn from_results(mut results: Vec<QuestionResult>) -> Self {
        results.sort_by(|a, b| a.id.cmp(&b.id));
        let overall = GroupStat::of(results.iter());
        let mut whs: Vec<&str> = results.iter().map(|r| r.wh.as_str()).collect();
        whs.sort_unstable();
        whs.dedup();
        let by_wh =
            whs.into_iter().map(|w| (w.to_string(), GroupStat::of(results.iter().filter(|r| r.wh == w)))).collect();
        let by_length =
            LENGTH_BUCKETS.iter().map(|&b| (b, GroupStat::of(results.iter().filter(|r| r.length == b)))).collect();
        Self { results, overall, by_wh, by_length }
    }

    /// `metric<TAB>bucket<TAB>value` rows.
    pub fn overall_tsv(&self) -> String {
        let mut out = String::from("metric\tbucket\tvalue\n");
        rows(&mut out, "overall", &self.overall);
        out
    }

    pub fn by_type_tsv(&self) -> String {
        let mut out = String::from("metric\tbucket\tvalue\n");
        for (w, s) in &self.by_wh {
            rows(&mut out, w, s);
        }
        out
    }

    pub fn by_length_tsv(&self) -> String {
        let mut out = String::from("metric\tbucket\tvalue\n");
        for (b, s) in &self.by_length {
            rows(&mut out, b, s);
        }
        out
    }

    /// One line per question: id, candidate count, chosen index, score, f1.
    pub fn per_question_tsv(&self) -> String {
        let mut out = String::from("id\tcandidates\tchosen\tscore\tf1\n");
        for r in &self.results {
            let chosen = r.chosen.map_or("-".to_string(), |c| c.to_string());
            let score = r.score.map_or("-".to_string(), |s| format!("{s:.6}"));
            let _ = writeln!(out, "{}\t{}\t{chosen}\t{score}\t{:.6}", r.id, r.candidates, r.f1);
        }
        out
    }

    /// Human-readable summary.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>6} {:>8}", "bucket", "count", "mean F1");
        let mut line = |name: &str, s: &GroupStat| {
            let _ = writeln!(out, "{name:<14} {:>6} {:>8.4}", s.count, s.mean_f1);
        };
        line("overall", &self.overall);
        for (w, s) in &self.by_wh {
            line(&format!("wh:{w}"), s);
        }
        for (b, s) in &self.by_length {
            line(&format!("len:{b}"), s);
        }
        out
    }
}

/// Picks each question's top-scoring candidate and averages its f1.
pub fn evaluate(model: &Model, examples: &[Example], store: &TripleStore) -> Result<EvalReport> {
    let mut results = Vec::with_capacity(examples.len());
    for ex in examples {
        let prepared = model.prepare(ex, store)?;
        let scores: Vec<f64> = model.score_all(&prepared)?.into_iter().map(|b| b.total).collect();
        let chosen = select(&scores);
        results.push(QuestionResult {
            id: ex.question.id.clone(),
            candidates: scores.len(),
            chosen,
            score: chosen.map(|c| scores[c]),
            f1: chosen.map_or(0.0, |c| ex.candidates[c].f1),
            wh: wh_bucket(&ex.tree),
            length: length_bucket(&ex.tree),
        });
    }
    Ok(EvalReport::from_results(results))
}
