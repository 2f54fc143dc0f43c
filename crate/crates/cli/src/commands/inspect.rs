use crate::config::resolve;
use crate::error::{CliError, Result};
use crate::output::{self, config_value, metadata};
use crate::Globals;
use fqa_core::manifest::write_json;
use fqa_core::model::{count_flops, count_params, NetworkSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::{Path, PathBuf};

#[derive(Debug, Default, clap::Args, Serialize, Deserialize)]
#[serde(default)]
pub struct InspectArgs {
    /// Checkpoint whose network is described.
    #[arg(long, conflicts_with = "arch")]
    pub model: Option<PathBuf>,
    /// Built-in architecture instead of a checkpoint: tinyfqnet or recognizer.
    #[arg(long)]
    pub arch: Option<String>,
    /// Embedding width of `--arch recognizer`.
    #[arg(long)]
    pub embedding_dim: Option<usize>,
    /// Identities of `--arch recognizer`.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Input side in pixels (default: the network's own).
    #[arg(long)]
    pub size: Option<usize>,
    /// Also write the trace and counts as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub seed: Option<u64>,
}

fn shape(s: &[usize]) -> String {
    s.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
}

pub fn inspect(g: &Globals, a: InspectArgs) -> Result<()> {
    let a = resolve(g, &a)?;
    let (spec, source): (NetworkSpec, Option<&Path>) = match (&a.model, a.arch.as_deref()) {
        (Some(m), None) => (output::checkpoint(m)?.network.spec().clone(), Some(m.as_path())),
        (None, Some("tinyfqnet")) => (NetworkSpec::tinyfqnet(), None),
        (None, Some("recognizer")) => (
            NetworkSpec::recognizer(a.embedding_dim.unwrap_or(64), a.classes.unwrap_or(32)),
            None,
        ),
        (None, Some(other)) => {
            return Err(CliError::Usage(format!(
                "--arch: unknown architecture `{other}` (expected tinyfqnet or recognizer)"
            )))
        }
        _ => return Err(CliError::Usage("give exactly one of --model and --arch".into())),
    };
    let size = a.size.unwrap_or(spec.input_size);
    let stages = spec.stage_shapes(size)?;
    let params = count_params(&spec)?;
    let flops = count_flops(&spec, size, size)?;

    println!("input {}", shape(&[spec.in_channels, size, size]));
    println!("{:<10} output", "stage");
    for (name, s) in &stages {
        println!("{name:<10} {}", shape(s));
    }
    println!();
    println!("{:<24} {:>14} {:>10} {:>12}", "layer", "output", "params", "MACs");
    for l in &flops.layers {
        println!("{:<24} {:>14} {:>10} {:>12}", l.name, shape(&l.output), l.params, l.macs);
    }
    println!();
    println!("residual blocks {} of {}", spec.num_residual_blocks(), spec.blocks.len());
    println!("parameters {} (+{} BN buffers)", params.params, params.buffers);
    println!("MACs {}  FLOPs {}  elementwise {}", flops.macs, flops.flops, flops.elementwise);

    if let Some(out) = &a.out {
        let inputs: Vec<(&str, &Path)> = source.map(|m| vec![("model", m)]).unwrap_or_default();
        let meta = metadata("inspect", config_value(&a), &inputs)?;
        let stages: Vec<_> = stages.iter().map(|(name, s)| json!({ "stage": name, "output": s })).collect();
        write_json(
            out,
            &json!({
                "metadata": meta,
                "input_size": size,
                "stages": stages,
                "residual_blocks": spec.num_residual_blocks(),
                "params": params,
                "flops": flops,
            }),
        )?;
    }
    Ok(())
}
