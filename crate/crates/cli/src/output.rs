//! Read-only subcommands over a dataset: reports, export, selection, validation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use kitgi_core::{
    decode_record, emit_report, encode_record, load_dataset, save_dataset, select_improved,
    validate_complete, validate_record, GenerationCondition, STEM_RULES,
};
use log::warn;

use crate::args::{ExportArgs, ReportArgs, SelectArgs, ValidateArgs};
use crate::config::Config;
use crate::failure::Failure;

/// Writes `lines` newline-terminated to `out`, or to stdout.
pub fn write_lines(out: Option<&Path>, lines: &[String]) -> Result<(), Failure> {
    let mut text = String::new();
    for line in lines {
        text.push_str(line);
        text.push('\n');
    }
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
            }
            fs::write(path, text).map_err(|e| Failure::io(path, e))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e)),
    }
}

pub fn report(dataset: &Path, config: &Config, args: &ReportArgs) -> Result<(), Failure> {
    let out_dir = args
        .out_dir
        .clone()
        .or_else(|| config.report.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("report"));
    let records = load_dataset(dataset)?;
    let (report, files) = emit_report(&records, &out_dir)?;

    let r = &report.relations;
    say!("records: {}", report.records);
    say!(
        "relations: retrieved {}, removed {}, remaining {}",
        r.retrieved,
        r.removed,
        r.remaining
    );
    for (name, dist) in [
        ("retrieved", &report.distribution_retrieved),
        ("filtered", &report.distribution_filtered),
    ] {
        if let Some(d) = dist {
            let top: Vec<String> = d
                .percentages
                .iter()
                .take(3)
                .map(|(t, p)| format!("{t} {p}%"))
                .collect();
            say!("{name} distribution: {}", top.join(", "));
        }
    }
    for condition in GenerationCondition::ALL {
        let token = condition.token();
        match report.matrix(condition) {
            Some(c) => {
                let m = &c.matrix;
                say!(
                    "{token}: n11={} n10={} n01={} n00={} | both correct {}%, commonsense {}%, coverage {}%, coverage fail {}%",
                    m.n11,
                    m.n10,
                    m.n01,
                    m.n00,
                    c.rates.both_correct,
                    c.rates.commonsense_rate,
                    c.rates.coverage_rate,
                    c.rates.coverage_fail_rate
                );
            }
            None => say!(
                "{token}: {} records unannotated",
                report.unannotated.get(token).copied().unwrap_or(0)
            ),
        }
    }
    for file in files {
        say!("wrote {}", file.display());
    }
    Ok(())
}

pub fn export_kitgi(dataset: &Path, args: &ExportArgs) -> Result<(), Failure> {
    let records = load_dataset(dataset)?;
    let total = records.len();
    let mut complete = Vec::with_capacity(total);
    let mut incomplete = 0;
    for record in records {
        let violations = validate_complete(&record);
        if violations.is_empty() {
            complete.push(record);
        } else {
            incomplete += 1;
            let codes: Vec<String> = violations.iter().map(|v| format!("{:?}", v.code)).collect();
            eprintln!("error: {}: incomplete: {}", record.id(), codes.join(", "));
        }
    }
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    save_dataset(&complete, &args.out)?;
    say!(
        "{}: exported {} of {total} records",
        args.out.display(),
        complete.len()
    );
    if incomplete > 0 {
        return Err(Failure::User(format!(
            "{incomplete} of {total} records are incomplete and were not exported"
        )));
    }
    Ok(())
}

pub fn select(dataset: &Path, args: &SelectArgs) -> Result<(), Failure> {
    let records = load_dataset(dataset)?;
    let ids = select_improved(&records)?;
    write_lines(args.out.as_deref(), &ids)?;
    if args.out.is_some() {
        say!(
            "{} of {} records improved with knowledge",
            ids.len(),
            records.len()
        );
    }
    Ok(())
}

/// Checks each line: parse, invariants, and that re-encoding reproduces it.
pub fn validate(dataset: &Path, args: &ValidateArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(dataset).map_err(|e| Failure::io(dataset, e))?;
    let mut checked = 0;
    let mut problems = 0;
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        checked += 1;
        let line_no = i + 1;
        let record = match decode_record(line, line_no) {
            Ok(r) => r,
            Err(e) => {
                problems += 1;
                eprintln!("error: {e}");
                continue;
            }
        };
        let violations = if args.complete {
            validate_complete(&record)
        } else {
            validate_record(&record)
        };
        for v in &violations {
            eprintln!("error: line {line_no}: {}: {v}", record.id());
        }
        problems += violations.len();
        if encode_record(&record) != line {
            warn!("line {line_no}: {} is not in canonical form", record.id());
        }
    }
    say!(
        "{}: {checked} records checked, {problems} problems",
        dataset.display()
    );
    if problems > 0 {
        return Err(Failure::User(format!(
            "{problems} problems in {}",
            dataset.display()
        )));
    }
    Ok(())
}

pub fn stem_rules() {
    say!("order\tsuffix\treplacement\tcondition\texample");
    for (i, rule) in STEM_RULES.iter().enumerate() {
        let replacement = if rule.replacement.is_empty() {
            "(none)"
        } else {
            rule.replacement
        };
        say!(
            "{}\t{}\t{replacement}\t{}\t{} -> {}",
            i + 1,
            rule.suffix,
            rule.condition,
            rule.example.0,
            rule.example.1
        );
    }
}
