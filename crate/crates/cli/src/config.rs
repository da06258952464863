//! TOML run configuration with sections `problem`, `kernel`, `policy`, `surrogate`
//! and `execution`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use qvs::campaigns::{CampaignConfig, PolicyKind};
use qvs::surrogates::{ClassifierConfig, GpConfig, LengthscaleGrid};
use qvs::{KernelSpec, Order};

use crate::dataset::Dataset;
use crate::error::{CliError, CliResult};
use crate::generate::{self, Generator, GeneratorParams, Problem};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub kernel: KernelConfig,
    pub policy: PolicyConfig,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
    #[serde(default)]
    pub execution: ExecutionConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// CSV dataset; relative paths resolve against the config file.
    pub dataset: Option<PathBuf>,
    pub generator: Option<Generator>,
    /// Seed for the generator; defaults to `execution.base_seed`.
    pub seed: Option<u64>,
    /// Initial items (pools) or points (continuous) drawn per repeat.
    #[serde(default = "default_initial")]
    pub initial: usize,
    /// Observations at or above this value count as discoveries in value problems.
    pub threshold: Option<f64>,
    /// `[problem.params]`: generator knobs.
    #[serde(default)]
    pub params: GeneratorParams,
}

fn default_initial() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default = "default_family")]
    pub family: String,
    pub lengthscale: Option<f64>,
    pub max_distance: Option<f64>,
}

fn default_family() -> String {
    "gaussian".into()
}

impl KernelConfig {
    pub fn spec(&self) -> CliResult<KernelSpec> {
        kernel_spec(&self.family, self.lengthscale, self.max_distance)
    }
}

/// Builds a kernel, rejecting parameters that belong to a different family.
pub fn kernel_spec(
    family: &str,
    lengthscale: Option<f64>,
    max_distance: Option<f64>,
) -> CliResult<KernelSpec> {
    let spec =
        match family {
            "gaussian" => {
                if max_distance.is_some() {
                    return Err(CliError::config(
                        "max_distance applies only to the distance-derived kernel",
                    ));
                }
                KernelSpec::gaussian(
                    lengthscale
                        .ok_or_else(|| CliError::config("gaussian kernel needs a lengthscale"))?,
                )?
            }
            "cosine" => {
                if lengthscale.is_some() || max_distance.is_some() {
                    return Err(CliError::config("the cosine kernel takes no parameters"));
                }
                KernelSpec::Cosine
            }
            "distance-derived" => {
                if lengthscale.is_some() {
                    return Err(CliError::config(
                        "lengthscale applies only to the gaussian kernel",
                    ));
                }
                KernelSpec::distance_derived(max_distance.ok_or_else(|| {
                    CliError::config("distance-derived kernel needs max_distance")
                })?)?
            }
            other => {
                return Err(CliError::config(format!(
                "unknown kernel family `{other}` (expected gaussian, cosine or distance-derived)"
            )))
            }
        };
    Ok(spec)
}

/// An order written either as a number or as a string such as `"inf"`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OrderToken {
    Number(f64),
    Text(String),
}

impl OrderToken {
    pub fn order(&self) -> CliResult<Order> {
        match self {
            OrderToken::Number(q) if q.is_infinite() && *q > 0.0 => Ok(Order::Infinity),
            OrderToken::Number(q) => Ok(Order::new(*q)?),
            OrderToken::Text(s) => Ok(s.parse()?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub names: Vec<String>,
    #[serde(default = "default_q")]
    pub q: Vec<OrderToken>,
    #[serde(default = "default_eval_q")]
    pub eval_q: Vec<OrderToken>,
    pub batch_size: usize,
    pub budget: usize,
    #[serde(default = "default_regions")]
    pub regions: usize,
    pub tau: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_q() -> Vec<OrderToken> {
    vec![OrderToken::Number(1.0)]
}

fn default_eval_q() -> Vec<OrderToken> {
    ["0", "1", "inf"]
        .iter()
        .map(|s| OrderToken::Text(s.to_string()))
        .collect()
}

fn default_regions() -> usize {
    1
}

fn default_beta() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub k_neighbors: usize,
    pub smoothing: f64,
    pub noise_variance: f64,
    pub jitter: f64,
    /// Fixed GP lengthscale; when unset the lengthscale is fitted on a grid.
    pub gp_lengthscale: Option<f64>,
    /// Explicit fitting grid; otherwise `grid_count` multiples of the median distance.
    pub lengthscale_grid: Option<Vec<f64>>,
    pub grid_count: usize,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        let g = GpConfig::default();
        SurrogateConfig {
            k_neighbors: c.k_neighbors,
            smoothing: c.smoothing,
            noise_variance: g.noise_variance,
            jitter: g.jitter,
            gp_lengthscale: None,
            lengthscale_grid: None,
            grid_count: 8,
        }
    }
}

impl SurrogateConfig {
    fn gp(&self) -> CliResult<GpConfig> {
        let grid = match (&self.gp_lengthscale, &self.lengthscale_grid) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "set gp_lengthscale or lengthscale_grid, not both",
                ))
            }
            (Some(_), None) => LengthscaleGrid::Fixed,
            (None, Some(g)) => LengthscaleGrid::Explicit(g.clone()),
            (None, None) => LengthscaleGrid::Relative {
                count: self.grid_count,
            },
        };
        let gp = GpConfig {
            lengthscale: self.gp_lengthscale.unwrap_or(1.0),
            noise_variance: self.noise_variance,
            jitter: self.jitter,
            grid,
            ..GpConfig::default()
        };
        gp.validate()?;
        Ok(gp)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExecutionConfig {
    pub repeats: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub jobs: usize,
}

impl Default for ExecutionConfig {
    fn default() -> Self {
        ExecutionConfig {
            repeats: 10,
            base_seed: 0,
            output_dir: PathBuf::from("results"),
            jobs: 1,
        }
    }
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub set: Vec<String>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text, &overrides.set)?;
        if let Some(seed) = overrides.seed {
            cfg.execution.base_seed = seed;
        }
        if let Some(jobs) = overrides.jobs {
            cfg.execution.jobs = jobs;
        }
        if let Some(dir) = &overrides.output_dir {
            cfg.execution.output_dir = dir.clone();
        }
        if let Some(d) = &cfg.problem.dataset {
            if d.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.problem.dataset = Some(base.join(d));
            }
        }
        Ok(cfg)
    }

    /// Parses TOML text, then applies `section.key=value` assignments.
    pub fn parse(text: &str, set: &[String]) -> CliResult<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::config(e.to_string()))?;
        for assignment in set {
            apply_override(&mut table, assignment)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(e.to_string()))
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::config(format!("override `{assignment}` is not section.key=value"))
    })?;
    let path: Vec<&str> = key.trim().split('.').collect();
    let Some((field, sections)) = path.split_last().filter(|(_, s)| !s.is_empty()) else {
        return Err(CliError::config(format!(
            "override key `{key}` is not section.key"
        )));
    };
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut current = table;
    for section in sections {
        let entry = current
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let toml::Value::Table(next) = entry else {
            return Err(CliError::config(format!("`{section}` is not a section")));
        };
        current = next;
    }
    current.insert(field.to_string(), value);
    Ok(())
}

/// What a policy needs from the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Binary,
    Real,
    Continuous,
}

pub fn mode_of(policy: PolicyKind) -> Option<Mode> {
    match policy {
        PolicyKind::QvsAs | PolicyKind::OnestepAs | PolicyKind::DiversityBlindAs => {
            Some(Mode::Binary)
        }
        PolicyKind::QvsBayesoptDiscrete | PolicyKind::Ucb => Some(Mode::Real),
        PolicyKind::QvsBayesoptTr | PolicyKind::Turbo | PolicyKind::Robot => Some(Mode::Continuous),
        PolicyKind::Random => None,
    }
}

/// One campaign variant: a policy and, for order-aware policies, its order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub policy: PolicyKind,
    pub q: Option<Order>,
}

/// A validated configuration with its problem materialized.
pub struct Plan {
    pub config: RunConfig,
    pub problem: Problem,
    pub mode: Mode,
    pub spec: KernelSpec,
    pub cells: Vec<Cell>,
    pub eval_orders: Vec<Order>,
    pub q_values: Vec<Order>,
    pub template: CampaignConfig,
}

impl Plan {
    pub fn new(config: RunConfig) -> CliResult<Self> {
        let spec = config.kernel.spec()?;
        let policies: Vec<PolicyKind> = config
            .policy
            .names
            .iter()
            .map(|n| n.parse::<PolicyKind>().map_err(CliError::from))
            .collect::<CliResult<_>>()?;
        if policies.is_empty() {
            return Err(CliError::config("policy.names is empty"));
        }
        let q_values = orders(&config.policy.q, "policy.q")?;
        let eval_orders = orders(&config.policy.eval_q, "policy.eval_q")?;

        let problem = load_problem(&config)?;
        let mode = match &problem {
            Problem::Binary(_) => Mode::Binary,
            Problem::Real(_) => Mode::Real,
            Problem::Continuous(_) => Mode::Continuous,
        };
        for &p in &policies {
            if mode_of(p).is_some_and(|m| m != mode) {
                return Err(CliError::config(format!(
                    "policy {p} does not apply to a {mode:?} problem"
                )));
            }
        }

        let ex = &config.execution;
        if ex.repeats == 0 {
            return Err(CliError::config("execution.repeats must be at least 1"));
        }
        if ex.jobs == 0 {
            return Err(CliError::config("execution.jobs must be at least 1"));
        }
        if let Some(n) = problem.pool_size() {
            let need = config.problem.initial + config.policy.budget;
            if need > n {
                return Err(CliError::config(format!(
                    "initial ({}) plus budget ({}) exceeds the pool of {n} items",
                    config.problem.initial, config.policy.budget
                )));
            }
        }
        if policies.contains(&PolicyKind::Robot) && config.policy.tau.is_none() {
            return Err(CliError::config("robot requires policy.tau"));
        }
        if policies.contains(&PolicyKind::OnestepAs) && config.policy.batch_size != 1 {
            return Err(CliError::config(
                "onestep-as is sequential; set policy.batch_size = 1",
            ));
        }

        let s = &config.surrogate;
        let mut template = CampaignConfig::new(
            config.policy.budget,
            config.policy.batch_size,
            Order::COUNT,
            0,
        );
        template.regions = config.policy.regions;
        template.tau = config.policy.tau;
        template.beta = config.policy.beta;
        template.classifier = ClassifierConfig {
            k_neighbors: s.k_neighbors,
            smoothing: s.smoothing,
        };
        template.gp = s.gp()?;
        template.validate()?;

        let mut cells = Vec::new();
        for &policy in &policies {
            if policy.uses_order() {
                cells.extend(q_values.iter().map(|&q| Cell { policy, q: Some(q) }));
            } else {
                cells.push(Cell { policy, q: None });
            }
        }
        Ok(Plan {
            config,
            problem,
            mode,
            spec,
            cells,
            eval_orders,
            q_values,
            template,
        })
    }

    pub fn campaign_config(&self, cell: Cell, seed: u64) -> CampaignConfig {
        CampaignConfig {
            order: cell.q.unwrap_or(Order::COUNT),
            seed,
            ..self.template.clone()
        }
    }
}

fn orders(tokens: &[OrderToken], what: &str) -> CliResult<Vec<Order>> {
    if tokens.is_empty() {
        return Err(CliError::config(format!("{what} is empty")));
    }
    tokens.iter().map(OrderToken::order).collect()
}

fn load_problem(config: &RunConfig) -> CliResult<Problem> {
    let p = &config.problem;
    match (&p.dataset, p.generator) {
        (Some(path), None) => {
            if p.params != GeneratorParams::default() {
                return Err(CliError::config(
                    "generator parameters given alongside a dataset",
                ));
            }
            let data = Dataset::read(path)?;
            match (data.labels, data.values) {
                (Some(labels), None) => Ok(Problem::Binary(qvs::problems::BinaryPool::new(
                    data.points,
                    labels,
                )?)),
                (None, Some(values)) => Ok(Problem::Real(qvs::problems::RealPool::new(
                    data.points,
                    values,
                )?)),
                (Some(_), Some(_)) => {
                    Err(CliError::config("dataset has both label and value columns"))
                }
                (None, None) => Err(CliError::config(
                    "dataset needs a label or value column for campaigns",
                )),
            }
        }
        (None, Some(g)) => {
            generate::build(g, &p.params, p.seed.unwrap_or(config.execution.base_seed))
        }
        (Some(_), Some(_)) => Err(CliError::config(
            "set problem.dataset or problem.generator, not both",
        )),
        (None, None) => Err(CliError::config("problem needs a dataset or a generator")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[problem]
generator = "two-cluster-binary"
initial = 4

[problem.params]
pool_size = 60

[kernel]
lengthscale = 0.5

[policy]
names = ["qvs-as", "random"]
q = [0, 1, "inf"]
batch_size = 2
budget = 6

[execution]
repeats = 2
"#;

    #[test]
    fn parses_and_expands_cells() {
        let plan = Plan::new(RunConfig::parse(BASE, &[]).unwrap()).unwrap();
        assert_eq!(plan.cells.len(), 4);
        assert_eq!(plan.cells[2].q, Some(Order::Infinity));
        assert_eq!(
            plan.cells[3],
            Cell {
                policy: PolicyKind::Random,
                q: None
            }
        );
        assert_eq!(plan.mode, Mode::Binary);
        assert_eq!(
            plan.eval_orders,
            vec![Order::COUNT, Order::SHANNON, Order::Infinity]
        );
    }

    #[test]
    fn overrides_replace_scalars_and_lists() {
        let set = [
            "policy.budget=8".to_string(),
            "kernel.family=cosine".into(),
            "kernel.lengthscale=0.2".into(),
        ];
        let cfg = RunConfig::parse(BASE, &set[..1]).unwrap();
        assert_eq!(cfg.policy.budget, 8);
        let cfg = RunConfig::parse(BASE, &["policy.names=[\"random\"]".to_string()]).unwrap();
        assert_eq!(cfg.policy.names, vec!["random"]);
        let cfg = RunConfig::parse(BASE, &set[1..2]).unwrap();
        assert!(
            cfg.kernel.spec().is_err(),
            "cosine with a lengthscale must be rejected"
        );
        assert!(RunConfig::parse(BASE, &["budget=3".to_string()]).is_err());
        let cfg = RunConfig::parse(BASE, &["problem.params.pool_size=80".to_string()]).unwrap();
        assert_eq!(cfg.problem.params.pool_size, Some(80));
    }

    #[test]
    fn validation_failures_are_config_errors() {
        for set in [
            "policy.names=[\"turbo\"]",
            "policy.budget=100",
            "policy.names=[\"robot\"]",
            "execution.repeats=0",
            "policy.q=[-1]",
            "problem.generator=\"nope\"",
            "policy.mystery=1",
        ] {
            let err = RunConfig::parse(BASE, &[set.to_string()])
                .and_then(Plan::new)
                .err();
            assert_eq!(err.map(|e| e.exit_code()), Some(2), "{set}");
        }
    }

    #[test]
    fn kernel_families_take_their_own_parameters() {
        assert!(kernel_spec("gaussian", Some(1.0), None).is_ok());
        assert!(kernel_spec("gaussian", None, None).is_err());
        assert!(kernel_spec("distance-derived", None, Some(2.0)).is_ok());
        assert!(kernel_spec("distance-derived", Some(1.0), Some(2.0)).is_err());
        assert!(kernel_spec("cosine", None, None).is_ok());
        assert!(kernel_spec("laplace", None, None).is_err());
    }
}
