//! Run manifests: the resolved command, sweep grid and seeds of one
//! invocation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use tmt_core::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Simulate,
    Split,
    Threshold,
    Epl,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::Split => "split",
            Command::Threshold => "threshold",
            Command::Epl => "epl",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    LoadX,
    /// x under the skewed model: the fraction of active ToRs.
    ActiveFractionX,
    Phi,
    /// Number of demand-aware switches; the rotor count absorbs the change.
    KC,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::LoadX => "load_x",
            SweepVar::ActiveFractionX => "active_fraction_x",
            SweepVar::Phi => "phi",
            SweepVar::KC => "k_c",
        }
    }
}

impl FromStr for SweepVar {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "load_x" => SweepVar::LoadX,
            "active_fraction_x" => SweepVar::ActiveFractionX,
            "phi" => SweepVar::Phi,
            "k_c" => SweepVar::KC,
            _ => bail!("unknown sweep variable `{s}` (expected load_x, active_fraction_x, phi or k_c)"),
        })
    }
}

/// `var=start:stop:step`, inclusive of `stop`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
    text: String,
}

impl Sweep {
    /// Checks every grid value against the variable's domain for `config`.
    pub fn validate(&self, config: &RunConfig) -> Result<()> {
        for &v in &self.values {
            match self.var {
                SweepVar::LoadX | SweepVar::ActiveFractionX | SweepVar::Phi => {
                    ensure!((0.0..=1.0).contains(&v), "{} = {v} is outside [0, 1]", self.var.name());
                }
                SweepVar::KC => {
                    let free = config.k_rotor + config.k_demand_aware;
                    ensure!(
                        v.fract() == 0.0 && v >= 0.0 && v <= free as f64,
                        "k_c = {v} must be an integer in [0, {free}]"
                    );
                }
            }
        }
        Ok(())
    }

    /// `config` with this sweep's variable set to `value`.
    pub fn apply(&self, config: &RunConfig, value: f64) -> RunConfig {
        let mut c = config.clone();
        match self.var {
            SweepVar::LoadX => c.load_x = value,
            SweepVar::ActiveFractionX => {
                c.load_x = value;
                c.traffic_model = tmt_core::TrafficModel::Skewed;
            }
            SweepVar::Phi => {
                c.phi = value;
                c.phi_m = value;
            }
            SweepVar::KC => {
                let free = c.k_rotor + c.k_demand_aware;
                c.k_demand_aware = value as usize;
                c.k_rotor = free - c.k_demand_aware;
            }
        }
        c
    }
}

impl FromStr for Sweep {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (var, range) = s.split_once('=').context("sweep must look like var=start:stop:step")?;
        let var: SweepVar = var.trim().parse()?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number `{p}` in sweep"))
            })
            .collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else {
            bail!("sweep range must be start:stop:step, got `{range}`");
        };
        ensure!(start.is_finite() && stop.is_finite(), "sweep bounds must be finite");
        ensure!(step > 0.0 && step.is_finite(), "sweep step must be positive");
        ensure!(stop >= start, "sweep stop {stop} is below start {start}");
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        ensure!(count <= 100_000, "sweep has {count} points");
        // snap to 12 decimals so 0.1 + 2·0.1 prints as 0.3
        let values = (0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Ok(Sweep {
            var,
            values,
            text: s.to_string(),
        })
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub config: RunConfig,
    pub sweep: Option<Sweep>,
    pub seeds: usize,
    pub out: Option<PathBuf>,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.seeds >= 1, "at least one seed is required");
        if let Some(s) = &self.sweep {
            s.validate(&self.config)?;
        }
        Ok(())
    }

    /// One resolved config per grid point, in grid order.
    pub fn points(&self) -> Vec<RunConfig> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| s.apply(&self.config, v)).collect(),
            None => vec![self.config.clone()],
        }
    }

    /// Manifest file contents. Contains no timestamps or absolute paths
    /// beyond what the caller supplied, so reruns write identical bytes.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command = {}\n", self.command.name()));
        out.push_str(&format!(
            "config = {}\n",
            self.config_path
                .as_ref()
                .map_or("-".into(), |p| p.display().to_string())
        ));
        out.push_str(&format!("profile = {}\n", self.config.profile));
        match &self.sweep {
            Some(s) => {
                out.push_str(&format!("sweep = {s}\n"));
                let grid: Vec<String> = s.values.iter().map(|v| v.to_string()).collect();
                out.push_str(&format!("grid = {}\n", grid.join(",")));
            }
            None => out.push_str("sweep = -\n"),
        }
        out.push_str(&format!("seeds = {}\n", self.seeds));
        out
    }
}
