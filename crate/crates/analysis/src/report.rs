//! Markdown and CSV renderings. Output depends only on the corpus, so two
//! runs over the same logs produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write;

use woz_core::fsm::DaType;
use woz_core::log::DialogueLog;
use woz_core::session::questionnaire::QUESTIONS;

use crate::corpus::{
    correlations, da_frequency, da_type_distribution, interaction_stats, survey_stats, AnalysisError, CorpusStats,
    DaTypeDistribution, SurveyStats,
};
use crate::describe::{Sd, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Markdown,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReportOptions {
    pub format: Format,
    pub sd: Sd,
    pub top_k: usize,
    /// Add resolved and not resolved columns to the interaction table.
    pub split_resolved: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { format: Format::Markdown, sd: Sd::Population, top_k: 10, split_resolved: false }
    }
}

/// Everything computed for one corpus.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub stats: CorpusStats,
    pub split: Option<(Option<CorpusStats>, Option<CorpusStats>)>,
    pub distribution: DaTypeDistribution,
    pub frequency: Vec<(String, u64)>,
    pub correlations: BTreeMap<DaType, f64>,
    pub survey: SurveyStats,
}

pub fn analyze(
    logs: &[DialogueLog],
    map: &BTreeMap<String, DaType>,
    opts: &ReportOptions,
) -> Result<Analysis, AnalysisError> {
    let stats = interaction_stats(logs, map, opts.sd)?;
    let split = opts.split_resolved.then(|| {
        let part = |want: bool| {
            let subset: Vec<DialogueLog> = logs.iter().filter(|l| l.resolved() == want).cloned().collect();
            interaction_stats(&subset, map, opts.sd).ok()
        };
        (part(false), part(true))
    });
    Ok(Analysis {
        distribution: da_type_distribution(logs, map)?,
        frequency: da_frequency(logs, None),
        correlations: correlations(&stats.records),
        survey: survey_stats(&stats.records, opts.sd),
        split,
        stats,
    })
}

fn ms(s: &Option<Summary>) -> String {
    s.as_ref().map_or_else(|| "n/a".into(), |s| format!("{:.2} ({:.2})", s.mean, s.sd))
}

fn pct(s: &Option<Summary>) -> String {
    s.as_ref().map_or_else(|| "n/a".into(), |s| format!("{:.2}% ({:.2}%)", s.mean, s.sd))
}

fn mmm(s: &Option<Summary>) -> String {
    s.as_ref()
        .map_or_else(|| "n/a".into(), |s| format!("{}/{}/{} ({:.2})", trim(s.mean), trim(s.median), trim(s.mode), s.sd))
}

/// Two decimals, without trailing zeros.
fn trim(x: f64) -> String {
    let s = format!("{x:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn num(x: Option<f64>) -> String {
    x.map_or_else(String::new, |x| format!("{x}"))
}

type Row = (&'static str, fn(&CorpusStats) -> String);

const TABLE2: [Row; 7] = [
    ("Number of Turns", |s| ms(&Some(s.turns.clone()))),
    ("Number of Operator Turns", |s| ms(&Some(s.operator_turns.clone()))),
    ("Number of Assistant Turns", |s| ms(&Some(s.wizard_turns.clone()))),
    ("Operator Turn Length (words)", |s| ms(&s.operator_turn_length)),
    ("Assistant % typed Utterances", |s| pct(&s.typed_percent)),
    ("Duration (s)", |s| ms(&Some(s.duration_s.clone()))),
    ("Success rate", |s| format!("{:.2}% ({}/{})", s.success_rate * 100.0, s.resolved, s.dialogues)),
];

fn table2_columns(a: &Analysis) -> Vec<(String, Option<&CorpusStats>)> {
    let mut cols = vec![(format!("Dialogues ({})", a.stats.dialogues), Some(&a.stats))];
    if let Some((no, yes)) = &a.split {
        cols.push(("Not Resolved".into(), no.as_ref()));
        cols.push(("Resolved".into(), yes.as_ref()));
    }
    cols
}

fn md_table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
    out.push_str(&line(header));
    out.push_str(&line(&header.iter().map(|_| "---".to_string()).collect::<Vec<_>>()));
    for r in rows {
        out.push_str(&line(r));
    }
}

fn csv_line(cells: &[String]) -> String {
    let esc = |c: &String| {
        if c.contains([',', '"', '\n']) {
            format!("\"{}\"", c.replace('"', "\"\""))
        } else {
            c.clone()
        }
    };
    format!("{}\n", cells.iter().map(esc).collect::<Vec<_>>().join(","))
}

fn table2_rows(a: &Analysis) -> (Vec<String>, Vec<Vec<String>>) {
    let cols = table2_columns(a);
    let mut header = vec!["Feature".to_string()];
    header.extend(cols.iter().map(|(h, _)| h.clone()));
    let rows = TABLE2
        .iter()
        .map(|(name, f)| {
            let mut row = vec![name.to_string()];
            row.extend(cols.iter().map(|(_, s)| s.map_or_else(|| "n/a".into(), f)));
            row
        })
        .collect();
    (header, rows)
}

fn table3_rows(a: &Analysis) -> Vec<Vec<String>> {
    DaType::ALL
        .iter()
        .map(|t| {
            vec![
                t.label().to_string(),
                a.distribution.counts[t].to_string(),
                format!("{:.2}", a.distribution.percent[t]),
                a.correlations.get(t).map_or_else(|| "n/a".into(), |r| format!("{r:.3}")),
            ]
        })
        .collect()
}

fn table4_rows(a: &Analysis) -> Vec<Vec<String>> {
    a.survey
        .questions
        .iter()
        .enumerate()
        .map(|(i, q)| {
            let mark = if q.significant() { "*" } else { "" };
            let test = q.test.as_ref();
            vec![
                format!("Q{}. {}", i + 1, QUESTIONS[i]),
                mmm(&q.all),
                mmm(&q.not_resolved),
                format!("{}{mark}", mmm(&q.resolved)),
                test.map_or_else(|| "n/a".into(), |t| format!("{}", t.u_a)),
                test.map_or_else(|| "n/a".into(), |t| format!("{}", t.u_b)),
                test.map_or_else(|| "n/a".into(), |t| format!("{:.4}", t.p)),
            ]
        })
        .collect()
}

const TABLE4_HEADER: [&str; 7] =
    ["Question", "All", "Not Resolved", "Resolved", "U (resolved)", "U (not resolved)", "p (one-tailed)"];

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Rendered files by name.
pub fn render(a: &Analysis, opts: &ReportOptions) -> BTreeMap<&'static str, String> {
    let mut files = BTreeMap::new();
    let (t2_header, t2_rows) = table2_rows(a);
    let t3_header = strings(&["DA type", "Count", "Percent", "r with success"]);
    let t4_header = strings(&TABLE4_HEADER);

    let csv = |header: &[String], rows: &[Vec<String>]| {
        let mut s = csv_line(header);
        for r in rows {
            s.push_str(&csv_line(r));
        }
        s
    };
    files.insert("table2.csv", csv(&t2_header, &t2_rows));
    files.insert("table3.csv", csv(&t3_header, &table3_rows(a)));
    files.insert("table4.csv", csv(&t4_header, &table4_rows(a)));
    let freq: Vec<Vec<String>> = a.frequency.iter().map(|(act, c)| vec![act.clone(), c.to_string()]).collect();
    files.insert("da_freq.csv", csv(&strings(&["dialogue_act", "count"]), &freq));
    let records: Vec<Vec<String>> = a
        .stats
        .records
        .iter()
        .map(|r| {
            vec![
                r.session_id.clone(),
                r.turns.to_string(),
                r.operator_turns.to_string(),
                r.wizard_turns.to_string(),
                num(r.operator_turn_len_mean),
                num(r.typed_fraction),
                (r.resolved as u8).to_string(),
                format!("{}", r.duration_s),
            ]
            .into_iter()
            .chain(r.da_type_counts.values().map(|c| c.to_string()))
            .collect()
        })
        .collect();
    files.insert(
        "records.csv",
        csv(
            &strings(&[
                "session",
                "turns",
                "operator_turns",
                "wizard_turns",
                "operator_turn_length",
                "wizard_typed_fraction",
                "resolved",
                "duration_s",
                "request",
                "interaction",
                "action",
                "update",
            ]),
            &records,
        ),
    );

    if opts.format == Format::Markdown {
        let mut md = String::new();
        let sd = match opts.sd {
            Sd::Population => "population",
            Sd::Sample => "sample",
        };
        let _ = writeln!(md, "# Corpus report\n");
        let _ = writeln!(
            md,
            "{} dialogues, {} resolved. Standard deviations are {sd} SDs.\n",
            a.stats.dialogues, a.stats.resolved
        );
        let _ = writeln!(md, "## Interaction features\n\nMean (SD).\n");
        md_table(&mut md, &t2_header, &t2_rows);
        let _ = writeln!(md, "\n## Dialogue act types\n\nPredefined assistant messages only; r is the point-biserial correlation of per-dialogue counts with success.\n");
        md_table(&mut md, &t3_header, &table3_rows(a));
        let _ = writeln!(md, "\n## Top {} assistant dialogue acts\n", opts.top_k);
        let top: Vec<Vec<String>> = freq.iter().take(opts.top_k).cloned().collect();
        md_table(&mut md, &strings(&["Dialogue act", "Count"]), &top);
        let _ = writeln!(
            md,
            "\n## Questionnaire\n\n{} answered ({} resolved). Mean/Median/Mode (SD); Q3 is reversed so higher is better. * marks p < 0.05 (Mann-Whitney U, resolved greater).\n",
            a.survey.answered, a.survey.answered_resolved
        );
        md_table(&mut md, &t4_header, &table4_rows(a));
        files.insert("report.md", md);
    }
    files
}
