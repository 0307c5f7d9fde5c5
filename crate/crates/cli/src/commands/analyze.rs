use super::create_dir;
use crate::args::AnalyzeArgs;
use crate::records::*;
use crate::{usage, CliError, CliResult};
use anyhow::Context;
use signkit_core::diagnostics::analysis_report;
use std::fs;

pub fn run(a: AnalyzeArgs) -> CliResult<()> {
    if a.bins == 0 {
        return usage("--bins must be at least 1");
    }
    let outcomes = read_outcomes(&a.outcomes)?;
    if outcomes.is_empty() {
        return Err(CliError::Data(anyhow::anyhow!(
            "{} has no outcome rows, so both presence groups are empty",
            a.outcomes.display()
        )));
    }
    let report = analysis_report(&outcomes, a.bins);
    create_dir(&a.out)?;
    let path = a.out.join(REPORT_FILE);
    let mut text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    write_histogram(&a.out.join(HIST_FILE), &report.histogram)?;
    print!("{}", report.summary());
    if let Some(reason) = &report.test_skipped_reason {
        eprintln!("notice: rank-sum test skipped ({reason}); report written without it");
    }
    Ok(())
}
