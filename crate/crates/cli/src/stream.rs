//! `elond stream`: one decision per input line, with resumable checkpoints.
//!
//! Input lines are `kind,value[,u]` where `kind` is `e` or `p` and `u` is an
//! optional uniform draw for the randomized procedures. A line holding just
//! `!snapshot` writes a checkpoint. Blank lines and lines starting with `#`
//! are ignored.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use elond::{DiscountSequence, OnlineProcedure, ProcedureKind, ProcedureSnapshot, Statistic, UniformSource};

use crate::config::{SeedSpec, DEFAULT_SEED};
use crate::simulate::DrawModeArg;

pub const OUTPUT_HEADER: &str = "t,alpha_t,rejected,discovery_count";
pub const SNAPSHOT_DIRECTIVE: &str = "!snapshot";

#[derive(Debug, Args)]
pub struct StreamArgs {
    /// lond, r-lond, e-lond, u-elond, ur-lond or lord*.
    #[arg(long, required_unless_present = "resume")]
    pub procedure: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// LORD* initial wealth.
    #[arg(long)]
    pub w0: Option<f64>,
    /// LORD* conflict lag.
    #[arg(long, default_value_t = 0)]
    pub lag: usize,
    /// Comma-separated explicit discount terms; the default is 1/(t(t+1)).
    #[arg(long, value_delimiter = ',')]
    pub discount: Option<Vec<f64>>,
    /// Seed of the uniform draws used when a line carries no `u`.
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long, value_enum, default_value = "independent")]
    pub draw_mode: DrawModeArg,
    /// Read statistics from this file instead of stdin.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Checkpoint file written on `!snapshot` and at end of input.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Resume from a checkpoint; procedure settings come from the file.
    #[arg(long, conflicts_with_all = ["procedure", "w0", "discount", "seed"])]
    pub resume: Option<PathBuf>,
    /// Omit the header row.
    #[arg(long)]
    pub no_header: bool,
}

/// A procedure together with its draw source and checkpoint target.
pub struct StreamState {
    procedure: OnlineProcedure,
    uniforms: Option<UniformSource>,
    snapshot_path: Option<PathBuf>,
}

impl StreamState {
    pub fn from_args(args: &StreamArgs) -> Result<Self> {
        if let Some(path) = &args.resume {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let snap = ProcedureSnapshot::from_json(&text).with_context(|| format!("in {}", path.display()))?;
            let procedure = OnlineProcedure::restore(&snap)?;
            let uniforms = match (procedure.kind().is_randomized(), snap.rng) {
                (true, Some(cursor)) => Some(UniformSource::from_cursor(cursor)),
                (true, None) => bail!("snapshot of a randomized procedure lacks its draw cursor"),
                (false, _) => None,
            };
            return Ok(StreamState {
                procedure,
                uniforms,
                snapshot_path: args.snapshot.clone(),
            });
        }
        let name = args.procedure.as_deref().ok_or_else(|| anyhow!("--procedure is required"))?;
        let mut kind = ProcedureKind::parse(name)?;
        if let ProcedureKind::LordStar { w0, lag } = &mut kind {
            *lag = args.lag;
            if let Some(v) = args.w0 {
                *w0 = v;
            }
        } else if args.w0.is_some() {
            bail!("--w0 applies to LORD* only");
        }
        let discount = match &args.discount {
            Some(terms) => DiscountSequence::explicit(terms.clone())?,
            None => DiscountSequence::Default,
        };
        let procedure = OnlineProcedure::new(kind, args.alpha, discount)?;
        let seed = match &args.seed {
            Some(s) => SeedSpec::parse(s)?,
            None => SeedSpec::Fixed(DEFAULT_SEED),
        }
        .resolve();
        let uniforms = kind
            .is_randomized()
            .then(|| UniformSource::new(seed, args.draw_mode.into()));
        Ok(StreamState {
            procedure,
            uniforms,
            snapshot_path: args.snapshot.clone(),
        })
    }

    pub fn snapshot(&self) -> Result<ProcedureSnapshot> {
        Ok(self.procedure.snapshot(self.uniforms.as_ref().map(UniformSource::cursor))?)
    }

    fn write_snapshot(&self) -> Result<()> {
        let path = self
            .snapshot_path
            .as_deref()
            .ok_or_else(|| anyhow!("no --snapshot path was given"))?;
        write_atomically(path, &self.snapshot()?.to_json())
    }

    /// Parses and tests one line. `Ok(None)` means nothing was tested.
    pub fn process_line(&mut self, line: &str) -> Result<Option<String>> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return Ok(None);
        }
        if line == SNAPSHOT_DIRECTIVE {
            self.write_snapshot()?;
            return Ok(None);
        }
        let (statistic, u) = parse_line(line)?;
        let kind = self.procedure.kind();
        if statistic.kind_name() != expected_kind(kind) {
            bail!("{} takes {}s, got a {}", kind.name(), expected_kind(kind), statistic.kind_name());
        }
        let u = match (kind.is_randomized(), u) {
            (true, Some(u)) => Some(u),
            // Draw only once the line is known to be valid.
            (true, None) => self.uniforms.as_mut().map(UniformSource::next_uniform),
            (false, Some(_)) => bail!("{} is not randomized; drop the third field", kind.name()),
            (false, None) => None,
        };
        let record = self.procedure.process(statistic, u)?;
        Ok(Some(format!(
            "{},{},{},{}",
            record.index,
            record.level.get(),
            record.rejected,
            self.procedure.discovery_count()
        )))
    }
}

fn expected_kind(kind: ProcedureKind) -> &'static str {
    if kind.takes_e_values() {
        "e-value"
    } else {
        "p-value"
    }
}

fn parse_line(line: &str) -> Result<(Statistic, Option<f64>)> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if !(2..=3).contains(&fields.len()) {
        bail!("expected `kind,value[,u]`, got {} fields", fields.len());
    }
    let value: f64 = fields[1].parse().map_err(|_| anyhow!("`{}` is not a number", fields[1]))?;
    let statistic = match fields[0].to_ascii_lowercase().as_str() {
        "e" => Statistic::e_value(value)?,
        "p" => Statistic::p_value(value)?,
        other => bail!("statistic kind must be `e` or `p`, got `{other}`"),
    };
    let u = match fields.get(2) {
        None => None,
        Some(s) => {
            let u: f64 = s.parse().map_err(|_| anyhow!("`{s}` is not a number"))?;
            if !(u > 0.0 && u <= 1.0) {
                bail!("uniform draw must lie in (0, 1], got {u}");
            }
            Some(u)
        }
    };
    Ok((statistic, u))
}

fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

/// Processes every line of `input`. Bad lines are reported on `err` and
/// skipped without touching the procedure state. Returns the count of bad lines.
pub fn run(
    state: &mut StreamState,
    input: impl BufRead,
    mut out: impl Write,
    mut err: impl Write,
    header: bool,
) -> Result<usize> {
    if header {
        writeln!(out, "{OUTPUT_HEADER}")?;
    }
    let mut bad = 0;
    for (n, line) in input.lines().enumerate() {
        let line = line.context("reading input")?;
        match state.process_line(&line) {
            Ok(Some(row)) => {
                writeln!(out, "{row}")?;
                out.flush()?;
            }
            Ok(None) => {}
            Err(e) => {
                bad += 1;
                writeln!(err, "line {}: {e:#}", n + 1)?;
            }
        }
    }
    if state.snapshot_path.is_some() {
        state.write_snapshot()?;
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(procedure: &str) -> StreamArgs {
        StreamArgs {
            procedure: Some(procedure.into()),
            alpha: 0.05,
            w0: None,
            lag: 0,
            discount: None,
            seed: None,
            draw_mode: DrawModeArg::Independent,
            input: None,
            snapshot: None,
            resume: None,
            no_header: false,
        }
    }

    fn lines(procedure: &str, input: &str) -> (Vec<String>, String) {
        let mut state = StreamState::from_args(&args(procedure)).unwrap();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        run(&mut state, input.as_bytes(), &mut out, &mut err, false).unwrap();
        let out = String::from_utf8(out).unwrap();
        (out.lines().map(String::from).collect(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn e_value_at_threshold_is_rejected() {
        let (out, _) = lines("e-lond", "e,40\n");
        assert_eq!(out, ["1,0.025,true,1"]);
    }

    #[test]
    fn lond_keeps_large_p_value() {
        let (out, _) = lines("lond", "p,0.5\n");
        assert_eq!(out, ["1,0.025,false,0"]);
    }

    #[test]
    fn malformed_lines_are_skipped_without_state_change() {
        let (out, err) = lines("e-lond", "e,40\nbogus\np,0.1\ne,-1\ne,1,0.5\n# note\n\ne,0.5\n");
        assert_eq!(out.len(), 2);
        assert!(out[1].starts_with("2,"), "{out:?}");
        assert_eq!(err.lines().count(), 4, "{err}");
        assert!(err.contains("line 2"));
    }

    #[test]
    fn randomized_procedures_use_supplied_draws() {
        // U-eLOND at t = 1 with u = 0.5 doubles the e-LOND level.
        let (out, _) = lines("u-elond", "e,1,0.5\n");
        assert_eq!(out, ["1,0.05,false,0"]);
    }

    #[test]
    fn snapshot_directive_needs_a_path() {
        let (out, err) = lines("e-lond", "!snapshot\ne,1\n");
        assert_eq!(out.len(), 1);
        assert!(err.contains("--snapshot"));
    }
}
