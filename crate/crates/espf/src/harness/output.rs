//! CSV and summary emission, plus the EWM CSV reader used by the plotting
//! verb. Floats are written at 17 significant digits so identical runs are
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::monitor::{EwmRecord, Regime, SURROGATE_COLUMNS};

use super::run::{ClaimsRow, RunOutput, RunSummary};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("csv line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, OutputError> {
    match tok {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|e| OutputError::Parse {
            line,
            reason: format!("bad float `{tok}`: {e}"),
        }),
    }
}

pub const EWM_HEADER: &str = "step,t_days,log_det_mvee,regime,h_pi,w_ep,prune_count,sigma_k,necessity,surprisal,info,alpha_c,n_target,pcrb_floor,pcrb_satisfied";

pub fn ewm_csv(records: &[EwmRecord]) -> String {
    let mut s = String::with_capacity(64 + records.len() * 256);
    s.push_str(EWM_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.t_days),
            fmt_f64(r.log_det_mvee),
            r.regime.as_str(),
            fmt_f64(r.h_pi),
            fmt_f64(r.w_ep),
            r.prune_count,
            fmt_f64(r.sigma_k),
            fmt_f64(r.necessity),
            fmt_f64(r.surprisal),
            fmt_f64(r.info),
            fmt_f64(r.alpha_c),
            r.n_target,
            fmt_f64(r.pcrb_floor),
            r.pcrb_satisfied,
        );
    }
    s
}

/// Parses the EWM CSV format back into records (used by `plot`; also the
/// fuzzing surface for the reader).
pub fn parse_ewm_csv(text: &str) -> Result<Vec<EwmRecord>, OutputError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == EWM_HEADER => {}
        Some((_, other)) => {
            return Err(OutputError::Parse {
                line: 1,
                reason: format!("unexpected header `{other}`"),
            })
        }
        None => return Err(OutputError::Parse { line: 1, reason: "empty input".into() }),
    }
    let mut out = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = raw.split(',').collect();
        if cols.len() != 15 {
            return Err(OutputError::Parse {
                line,
                reason: format!("expected 15 columns, got {}", cols.len()),
            });
        }
        let parse_usize = |tok: &str| -> Result<usize, OutputError> {
            tok.parse::<usize>().map_err(|e| OutputError::Parse {
                line,
                reason: format!("bad integer `{tok}`: {e}"),
            })
        };
        let regime = match cols[3] {
            "contraction" => Regime::Contraction,
            "diffusion" => Regime::Diffusion,
            other => {
                return Err(OutputError::Parse {
                    line,
                    reason: format!("unknown regime `{other}`"),
                })
            }
        };
        let pcrb_satisfied = match cols[14].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(OutputError::Parse {
                    line,
                    reason: format!("bad boolean `{other}`"),
                })
            }
        };
        out.push(EwmRecord {
            step: parse_usize(cols[0])?,
            t_days: parse_f64(cols[1], line)?,
            log_det_mvee: parse_f64(cols[2], line)?,
            regime,
            h_pi: parse_f64(cols[4], line)?,
            w_ep: parse_f64(cols[5], line)?,
            prune_count: parse_usize(cols[6])?,
            sigma_k: parse_f64(cols[7], line)?,
            necessity: parse_f64(cols[8], line)?,
            surprisal: parse_f64(cols[9], line)?,
            info: parse_f64(cols[10], line)?,
            alpha_c: parse_f64(cols[11], line)?,
            n_target: parse_usize(cols[12])?,
            pcrb_floor: parse_f64(cols[13], line)?,
            pcrb_satisfied,
        });
    }
    Ok(out)
}

pub const CLAIMS_HEADER: &str = "step,sigma_k,log_det,n_target,regime,claim_a_rand,claim_a_rand_gap,claim_a_swap,claim_a_swap_gap,claim_b_rand,claim_b_rand_gap,claim_b_swap,claim_b_swap_gap";

fn pf(pass: bool) -> &'static str {
    if pass {
        "P"
    } else {
        "F"
    }
}

pub fn claims_csv(rows: &[ClaimsRow]) -> String {
    let mut s = String::with_capacity(64 + rows.len() * 192);
    s.push_str(CLAIMS_HEADER);
    s.push('\n');
    for c in rows {
        let (a_swap, a_swap_gap) = match c.report.claim_a_vs_swap {
            Some(o) => (pf(o.pass), fmt_f64(o.gap)),
            None => ("-", "-".into()),
        };
        let (b_swap, b_swap_gap) = match c.report.claim_b_vs_swap {
            Some(o) => (pf(o.pass), fmt_f64(o.gap)),
            None => ("-", "-".into()),
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.step,
            fmt_f64(c.sigma_k),
            fmt_f64(c.log_det),
            c.n_target,
            c.regime.as_str(),
            pf(c.report.claim_a_vs_random.pass),
            fmt_f64(c.report.claim_a_vs_random.gap),
            a_swap,
            a_swap_gap,
            pf(c.report.claim_b_vs_random.pass),
            fmt_f64(c.report.claim_b_vs_random.gap),
            b_swap,
            b_swap_gap,
        );
    }
    s
}

pub fn summary_text(s: &RunSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scenario.name = {}", s.scenario);
    let _ = writeln!(out, "steps.total = {}", s.steps);
    let _ = writeln!(out, "steps.with_measurement = {}", s.measurement_steps);
    let _ = writeln!(out, "regime.contraction_steps = {}", s.contraction_steps);
    let _ = writeln!(out, "regime.diffusion_steps = {}", s.diffusion_steps);
    let _ = writeln!(out, "prune.median = {}", fmt_f64(s.prune_median));
    let _ = writeln!(out, "prune.max = {}", s.prune_max);
    let _ = writeln!(out, "pcrb.violations = {}", s.pcrb_violations);
    let _ = writeln!(out, "surprisal.p95 = {}", fmt_f64(s.surprisal_p95));
    let _ = writeln!(out, "necessity.p95 = {}", fmt_f64(s.necessity_p95));
    let _ = writeln!(out, "claims.evaluated = {}", s.claims_evaluated);
    let _ = writeln!(out, "claims.a_vs_random_pass = {}", s.claim_a_rand_pass);
    let _ = writeln!(out, "claims.b_vs_random_pass = {}", s.claim_b_rand_pass);
    let _ = writeln!(out, "claims.a_vs_swap_pass = {}", s.claim_a_swap_pass);
    let _ = writeln!(out, "claims.a_vs_swap_evaluated = {}", s.claim_a_swap_evaluated);
    let _ = writeln!(out, "claims.b_vs_swap_pass = {}", s.claim_b_swap_pass);
    let _ = writeln!(out, "claims.b_vs_swap_evaluated = {}", s.claim_b_swap_evaluated);
    let _ = writeln!(out, "claims.max_swap_gap_a_nats = {}", fmt_f64(s.max_swap_gap_a));
    let _ = writeln!(out, "claims.max_swap_gap_b_nats = {}", fmt_f64(s.max_swap_gap_b));
    let _ = writeln!(out, "claims.contraction_steps = {}", s.contraction_claims);
    let _ = writeln!(
        out,
        "claims.contraction_b_vs_random_pass = {}",
        s.contraction_claim_b_rand_pass
    );
    let _ = writeln!(out, "surrogate_columns = {}", SURROGATE_COLUMNS.join(","));
    let _ = writeln!(out, "note.cd_state = drag coefficient is carried as state but the nominal force model has no atmosphere; it exercises an unobservable coordinate");
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    fs::write(path, contents).map_err(|source| OutputError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes ewm.csv, claims.csv, summary.txt, and the resolved config echo
/// into `dir` (created if needed).
pub fn emit_outputs(
    run: &RunOutput,
    config_echo: &str,
    dir: &Path,
) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    write_file(&dir.join("ewm.csv"), &ewm_csv(&run.ewm))?;
    write_file(&dir.join("claims.csv"), &claims_csv(&run.claims))?;
    write_file(&dir.join("summary.txt"), &summary_text(&run.summary))?;
    write_file(&dir.join("config.resolved.cfg"), config_echo)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{ClaimOutcome, ComparatorReport};

    fn record(step: usize) -> EwmRecord {
        EwmRecord {
            step,
            t_days: 0.1 * step as f64,
            log_det_mvee: -3.5,
            regime: Regime::Contraction,
            h_pi: 1.25,
            w_ep: 0.8,
            prune_count: 12,
            sigma_k: 0.97,
            necessity: 0.01,
            surprisal: 0.1,
            info: 0.095,
            alpha_c: 2.2,
            n_target: 94,
            pcrb_floor: 1.0,
            pcrb_satisfied: true,
        }
    }

    #[test]
    fn empty_run_header_only() {
        let csv = ewm_csv(&[]);
        assert_eq!(csv.trim(), EWM_HEADER);
        assert_eq!(parse_ewm_csv(&csv).unwrap().len(), 0);
    }

    #[test]
    fn ewm_roundtrip() {
        let records = vec![record(1), record(2)];
        let csv = ewm_csv(&records);
        let back = parse_ewm_csv(&csv).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(parse_ewm_csv("").is_err());
        assert!(parse_ewm_csv("bogus header\n").is_err());
        let mut csv = ewm_csv(&[record(1)]);
        csv.push_str("1,2,3\n");
        assert!(parse_ewm_csv(&csv).is_err());
    }

    #[test]
    fn claims_rows_have_table_columns() {
        let row = ClaimsRow {
            step: 35,
            sigma_k: 0.349,
            log_det: -104.08,
            n_target: 52,
            regime: Regime::Contraction,
            report: ComparatorReport {
                claim_a_vs_random: ClaimOutcome { pass: true, gap: 2.4 },
                claim_a_vs_swap: Some(ClaimOutcome { pass: true, gap: 0.0 }),
                claim_b_vs_random: ClaimOutcome { pass: true, gap: 1.1 },
                claim_b_vs_swap: Some(ClaimOutcome { pass: false, gap: -0.02 }),
            },
        };
        let csv = claims_csv(&[row]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CLAIMS_HEADER);
        let data = lines.next().unwrap();
        assert!(data.starts_with("35,"));
        assert!(data.contains(",52,contraction,P,"));
        assert!(data.contains(",F,"));
    }

    #[test]
    fn summary_mentions_surrogates() {
        let s = RunSummary { scenario: "nominal".into(), ..Default::default() };
        let text = summary_text(&s);
        assert!(text.contains("surrogate_columns = necessity,w_ep,alpha_c"));
    }
}
