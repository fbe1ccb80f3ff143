use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::error::{Error, Result};
use crate::sigraph::{
    export_action_space, filter_action_space, identify_conflicts, import_action_space, update_model,
    Alpha, ConflictReport, ConflictRule, ConflictThresholds, DesignSample, Granularities,
    OperationCombo, SigModel,
};

/// Everything a design-time cycle reads besides the model and samples.
#[derive(Debug, Clone)]
pub struct DesignContext<'a> {
    pub rules: &'a [ConflictRule],
    pub granularities: &'a Granularities,
    pub thresholds: ConflictThresholds,
    pub alpha: Alpha,
    pub desired: [f64; 3],
    pub recent_steps: usize,
    /// Off in the assisted-no-conflict scheme.
    pub identify_conflicts: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleOutcome {
    pub sg_score: f64,
    /// The SG score was at or below the threshold and conflicts were checked.
    pub checked: bool,
    pub report: Option<ConflictReport>,
    pub triggered: Vec<String>,
    pub relaxed: Vec<String>,
    pub space_before: usize,
    pub space_after: usize,
    /// New action-space file, written only when filtering changed the space.
    pub exported: Option<PathBuf>,
    /// Wall-clock seconds for the whole cycle, export included.
    #[serde(skip)]
    pub latency_s: f64,
}

/// One design-time pass: reweight the graph from `samples`, propagate
/// scores and, when the SG score is at or below the threshold, identify
/// conflicts, filter `space` with the triggered rules and export the result
/// to `export.0` stamped with `export.1`.
pub fn design_time_cycle(
    ctx: &DesignContext,
    model: &mut SigModel,
    samples: &[DesignSample],
    space: &[OperationCombo],
    export: Option<(&Path, &str)>,
) -> Result<CycleOutcome> {
    let start = Instant::now();
    update_model(model, samples, ctx.desired, ctx.granularities, ctx.recent_steps)?;
    let mut out = CycleOutcome {
        sg_score: model.sg_score,
        checked: false,
        report: None,
        triggered: Vec::new(),
        relaxed: Vec::new(),
        space_before: space.len(),
        space_after: space.len(),
        exported: None,
        latency_s: 0.0,
    };
    if ctx.identify_conflicts && model.needs_conflict_check() {
        let report = identify_conflicts(samples, &ctx.thresholds, ctx.alpha)?;
        let filtered = filter_action_space(space, &report, ctx.rules);
        out.checked = true;
        out.triggered = filtered.triggered;
        out.relaxed = filtered.relaxed;
        out.space_after = filtered.combos.len();
        if filtered.combos.len() < space.len() {
            if let Some((path, generated_at)) = export {
                export_action_space(&filtered.combos, path, generated_at, &report.digest())?;
                out.exported = Some(path.to_path_buf());
            }
        }
        out.report = Some(report);
    }
    out.latency_s = start.elapsed().as_secs_f64();
    tracing::debug!(sg_score = out.sg_score, checked = out.checked, latency_s = out.latency_s, "design-time cycle");
    Ok(out)
}

/// Reads design samples back from a training log.
pub fn read_training_log(path: &Path) -> Result<Vec<DesignSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, detail: String| Error::Malformed {
        path: path.to_path_buf(),
        detail: format!("line {line}: {detail}"),
    };
    let mut lines = text.lines().enumerate();
    let header: Vec<&str> = lines.next().map(|(_, h)| h.split(',').collect()).unwrap_or_default();
    let col = |name: &str| header.iter().position(|h| *h == name).ok_or_else(|| bad(1, format!("missing column `{name}`")));
    let (ie, ic, it, ir, ik) = (col("energy_w")?, col("throughput_bps")?, col("delay_ttis")?, col("reward")?, col("combo")?);
    let mut out = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(bad(i + 1, format!("{} fields, expected {}", fields.len(), header.len())));
        }
        let num = |j: usize| fields[j].parse::<f64>().map_err(|e| bad(i + 1, format!("{}: {e}", header[j])));
        out.push(DesignSample {
            energy_w: num(ie)?,
            throughput_bps: num(ic)?,
            delay_ttis: num(it)?,
            reward: num(ir)?,
            combo: OperationCombo::parse_compact(fields[ik]).map_err(|e| bad(i + 1, e.to_string()))?,
        });
    }
    Ok(out)
}

/// Loads an action-space file and hands it to the agent. A file that fails
/// to load leaves the agent on its old space.
pub fn swap_action_space(agent: &mut Agent, path: &Path) -> Result<()> {
    let combos = import_action_space(path).map_err(|e| {
        tracing::error!(path = %path.display(), "action-space swap rejected: {e}");
        e
    })?;
    if combos.is_empty() {
        tracing::error!(path = %path.display(), "action-space swap rejected: empty space");
        return Err(Error::EmptyActionSpace);
    }
    agent.swap_space(combos)
}
