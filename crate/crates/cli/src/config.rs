//! The run configuration: one TOML document drives every command.
//!
//! Loading starts from the built-in defaults, merges the user's file on top,
//! then applies `--set section.key=value` overrides; unknown keys anywhere
//! are rejected. Every kernel section is validated up front, so a bad value
//! fails before any work is done.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use seqtensor::classify::SvmConfig;
use seqtensor::dataio::SynthConfig;
use seqtensor::dck::plus::DckPlusConfig;
use seqtensor::dck::DckConfig;
use seqtensor::epn::EpnConfig;
use seqtensor::sck::plus::{ChannelMap, ExtraChannel, SckPlusConfig, SubsequenceScheme};
use seqtensor::sck::SckConfig;
use seqtensor::{Error, PivotGrid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Sck,
    Dck,
    SckPlus,
    DckPlus,
    Fusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub z: usize,
    pub sigma: f64,
}

impl GridSpec {
    const fn new(z: usize, sigma: f64) -> Self {
        Self { z, sigma }
    }

    fn build(&self, lo: f64, hi: f64, field: &str) -> Result<PivotGrid> {
        PivotGrid::new(lo, hi, self.z, self.sigma).map_err(|e| Error::Config(format!("{field}: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocess {
    /// Joint subtracted from every frame; absent to skip centering.
    pub hip: Option<usize>,
    /// Rescale bones (binary-tree topology rooted at joint 0) to the
    /// dataset's median lengths.
    pub limb_normalize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SckSection {
    pub beta1: f64,
    pub beta2: f64,
    pub joint_grid: GridSpec,
    pub time_grid: GridSpec,
    pub order: usize,
    pub epn: EpnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DckSection {
    pub disp_grid: GridSpec,
    pub time_grid: GridSpec,
    pub sigma4: f64,
    pub joint_subset: Option<Vec<usize>>,
    /// `0` picks the largest joint-to-joint coordinate gap in the dataset.
    pub disp_scale: f64,
    pub velocity: bool,
    pub epn: EpnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Rbf,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraSpec {
    pub weight: f64,
    pub dim: usize,
    pub map: MapKind,
    /// Pivot grid on `[0, hi]` for `rbf` maps.
    pub grid: Option<GridSpec>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SckPlusSection {
    pub joint_weight: f64,
    pub joint_grid: GridSpec,
    pub extra: Vec<ExtraSpec>,
    pub beta2: f64,
    pub beta3: f64,
    pub beta4: f64,
    pub snippet_grid: GridSpec,
    pub position_grid: GridSpec,
    pub length_grid: GridSpec,
    pub lengths: Vec<usize>,
    pub stride: usize,
    pub order: usize,
    pub epn: EpnConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DckPlusSection {
    pub tau: usize,
    pub stride: usize,
    pub pos_grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    /// Test-side subjects; absent to hold out every second subject id.
    pub held_out: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub map: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub sequences: usize,
    pub joints: usize,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub sequences: usize,
    pub frames: usize,
    pub joints: usize,
    pub dck_sequences: usize,
    pub dck_frames: usize,
    pub dck_joints: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Kernel,
    pub seed: u64,
    pub fusion_weight: f64,
    pub synth: SynthConfig,
    pub preprocess: Preprocess,
    pub sck: SckSection,
    pub dck: DckSection,
    pub sck_plus: SckPlusSection,
    pub dck_plus: DckPlusSection,
    pub svm: SvmConfig,
    pub split: SplitSection,
    pub eval: EvalSection,
    pub verify: VerifySection,
    pub bench: BenchSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Sck,
            seed: 42,
            fusion_weight: 0.5,
            synth: SynthConfig::default(),
            preprocess: Preprocess { hip: None, limb_normalize: false },
            sck: SckSection {
                beta1: 0.5,
                beta2: 0.5,
                joint_grid: GridSpec::new(5, 0.6),
                time_grid: GridSpec::new(6, 0.5),
                order: 3,
                epn: EpnConfig::slice(0.36),
            },
            dck: DckSection {
                disp_grid: GridSpec::new(5, 0.6),
                time_grid: GridSpec::new(5, 0.5),
                sigma4: 5.0,
                joint_subset: None,
                disp_scale: 0.0,
                velocity: false,
                epn: EpnConfig::hosvd(0.85),
            },
            sck_plus: SckPlusSection {
                joint_weight: 0.4,
                joint_grid: GridSpec::new(5, 0.6),
                extra: Vec::new(),
                beta2: 0.3,
                beta3: 0.2,
                beta4: 0.1,
                snippet_grid: GridSpec::new(5, 0.5),
                position_grid: GridSpec::new(5, 0.5),
                length_grid: GridSpec::new(3, 0.5),
                lengths: vec![8, 10, 12, 14, 16, 18, 20],
                stride: 2,
                order: 3,
                epn: EpnConfig::hosvd(0.36),
            },
            dck_plus: DckPlusSection { tau: 8, stride: 4, pos_grid: GridSpec::new(5, 0.5) },
            svm: SvmConfig::default(),
            split: SplitSection { held_out: None },
            eval: EvalSection { map: false },
            verify: VerifySection { sequences: 6, joints: 3, frames: 5 },
            bench: BenchSection {
                sequences: 200,
                frames: 50,
                joints: 8,
                dck_sequences: 10,
                dck_frames: 20,
                dck_joints: 3,
            },
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Applies one `dotted.key=value` override. Values are parsed as TOML
/// (numbers, booleans, arrays) and fall back to plain strings.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{spec}` is not key=value")))?;
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(config_err(format!("bad override key `{path}`")));
    }
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut cur = table;
    for k in parents {
        let entry = cur.entry(k.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("`{k}` in `{path}` is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = Table::try_from(Self::default()).map_err(config_err)?;
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)?;
            let user: Table = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
            merge(&mut table, user);
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = Value::Table(table).try_into().map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fusion_weight) {
            return Err(config_err(format!("fusion_weight must lie in [0, 1], got {}", self.fusion_weight)));
        }
        self.synth.validate()?;
        self.svm.validate()?;
        self.sck_config()?;
        self.dck_config(1.0)?;
        self.sck_plus_config()?;
        self.dck_plus_config(1.0)?;
        Ok(())
    }

    pub fn sck_config(&self) -> Result<SckConfig> {
        let s = &self.sck;
        SckConfig::new(
            s.beta1,
            s.beta2,
            s.joint_grid.build(-1.0, 1.0, "sck.joint_grid")?,
            s.time_grid.build(0.0, 1.0, "sck.time_grid")?,
            s.order,
            s.epn,
        )
        .map_err(|e| prefixed("sck", e))
    }

    /// `auto_scale` replaces a zero `disp_scale`.
    pub fn dck_config(&self, auto_scale: f64) -> Result<DckConfig> {
        let d = &self.dck;
        let cfg = DckConfig {
            disp_grid: d.disp_grid.build(-1.0, 1.0, "dck.disp_grid")?,
            time_grid: d.time_grid.build(0.0, 1.0, "dck.time_grid")?,
            sigma4: d.sigma4,
            joint_subset: d.joint_subset.clone(),
            disp_scale: if d.disp_scale == 0.0 { auto_scale } else { d.disp_scale },
            velocity: d.velocity,
            epn: d.epn,
        };
        cfg.validate().map_err(|e| prefixed("dck", e))?;
        Ok(cfg)
    }

    pub fn sck_plus_config(&self) -> Result<SckPlusConfig> {
        let s = &self.sck_plus;
        let extra = s
            .extra
            .iter()
            .enumerate()
            .map(|(q, e)| {
                let map = match e.map {
                    MapKind::Linear => ChannelMap::Linear,
                    MapKind::Rbf => {
                        let g = e.grid.unwrap_or(GridSpec::new(5, 0.5));
                        ChannelMap::Rbf(g.build(0.0, e.hi.unwrap_or(1.0), &format!("sck_plus.extra[{q}].grid"))?)
                    }
                };
                Ok(ExtraChannel { weight: e.weight, dim: e.dim, map })
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = SckPlusConfig {
            joint_weight: s.joint_weight,
            joint_grid: s.joint_grid.build(-1.0, 1.0, "sck_plus.joint_grid")?,
            extra,
            beta2: s.beta2,
            beta3: s.beta3,
            beta4: s.beta4,
            snippet_grid: s.snippet_grid.build(0.0, 1.0, "sck_plus.snippet_grid")?,
            position_grid: s.position_grid.build(0.0, 1.0, "sck_plus.position_grid")?,
            length_grid: s.length_grid.build(0.0, 1.0, "sck_plus.length_grid")?,
            scheme: SubsequenceScheme { lengths: s.lengths.clone(), stride: s.stride },
            order: s.order,
            epn: s.epn,
        };
        cfg.validate().map_err(|e| prefixed("sck_plus", e))?;
        Ok(cfg)
    }

    pub fn dck_plus_config(&self, auto_scale: f64) -> Result<DckPlusConfig> {
        let p = &self.dck_plus;
        let cfg = DckPlusConfig {
            base: DckConfig { velocity: true, ..self.dck_config(auto_scale)? },
            tau: p.tau,
            stride: p.stride,
            pos_grid: p.pos_grid.build(0.0, 1.0, "dck_plus.pos_grid")?,
        };
        cfg.validate().map_err(|e| prefixed("dck_plus", e))?;
        Ok(cfg)
    }
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::Config(m) | Error::InvalidArgument(m) => Error::Config(format!("[{section}] {m}")),
        other => other,
    }
}
