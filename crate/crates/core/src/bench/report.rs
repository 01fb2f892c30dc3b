//! Aggregation of episode logs into a fixed-width results table.

use crate::env::EpisodeRecord;
use crate::error::{Error, Result};
use crate::planners::PlannerKind;
use crate::terrain::ScenarioFamily;

/// Aggregates of one (scenario, planner) group.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub planner: String,
    pub n_instances: usize,
    pub successes: usize,
    /// Percent.
    pub success_rate: f64,
    /// Seconds over successful episodes; `None` without successes.
    pub total_time: Option<(f64, f64)>,
    /// Percent over completed episodes (at least one step); `None` if there are none.
    pub lambda: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
}

/// Parses line-delimited JSON episode records; blank lines are ignored.
pub fn parse_log(text: &str) -> Result<Vec<EpisodeRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format(format!("log line {}: {e}", i + 1)))
        })
        .collect()
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

fn scenario_label(key: &str) -> String {
    key.parse::<ScenarioFamily>()
        .map(|f| f.label().to_string())
        .unwrap_or_else(|_| key.to_string())
}

fn planner_label(key: &str) -> String {
    key.parse::<PlannerKind>()
        .map(|k| k.label().to_string())
        .unwrap_or_else(|_| key.to_string())
}

/// Groups records by (scenario, planner) in order of first appearance.
pub fn aggregate(records: &[EpisodeRecord]) -> Result<BenchmarkReport> {
    if records.is_empty() {
        return Err(Error::Data("episode log is empty".into()));
    }
    let mut groups: Vec<((&str, &str), Vec<&EpisodeRecord>)> = Vec::new();
    for r in records {
        let key = (r.scenario.as_str(), r.planner.as_str());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    let rows = groups
        .into_iter()
        .map(|((scenario, planner), g)| {
            let successes = g.iter().filter(|r| r.success).count();
            let times: Vec<f64> = g.iter().filter(|r| r.success).map(|r| r.total_time_s).collect();
            let lambdas: Vec<f64> = g
                .iter()
                .filter(|r| r.n_steps > 0)
                .map(|r| 100.0 * r.avg_traversability)
                .collect();
            ReportRow {
                scenario: scenario_label(scenario),
                planner: planner_label(planner),
                n_instances: g.len(),
                successes,
                success_rate: 100.0 * successes as f64 / g.len() as f64,
                total_time: mean_std(&times),
                lambda: mean_std(&lambdas),
            }
        })
        .collect();
    Ok(BenchmarkReport { rows })
}

/// Integral rates print without decimals, others with one.
pub fn format_rate(rate: f64) -> String {
    if (rate - rate.round()).abs() < 1e-9 {
        format!("{rate:.0}")
    } else {
        format!("{rate:.1}")
    }
}

fn format_stat(s: Option<(f64, f64)>) -> String {
    match s {
        Some((m, sd)) => format!("{m:.1} ± {sd:.1}"),
        None => "-".to_string(),
    }
}

pub const FOOTER: &str = "T_total: mean ± std over successful episodes only. \
λ̄: mean ± std over all episodes that took at least one step, including failures. \
Standard deviations use divisor n.";

impl BenchmarkReport {
    /// One section per planner with Scenario, Succ., T_total and λ̄ columns.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut planners: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !planners.contains(&r.planner.as_str()) {
                planners.push(&r.planner);
            }
        }
        for (i, planner) in planners.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&format!("Planner: {planner}\n"));
            // the combining macron takes no column, hence 15
            out.push_str(&format!(
                "{:<10}{:<10}{:<16}{:<15}{}\n",
                "Scenario", "Succ.[%]", "T_total[s]", "λ̄[%]", "N"
            ));
            for r in self.rows.iter().filter(|r| r.planner == *planner) {
                out.push_str(&format!(
                    "{:<10}{:<10}{:<16}{:<14}{}\n",
                    r.scenario,
                    format_rate(r.success_rate),
                    format_stat(r.total_time),
                    format_stat(r.lambda),
                    r.n_instances
                ));
            }
        }
        out.push('\n');
        out.push_str(FOOTER);
        out.push('\n');
        out
    }
}
