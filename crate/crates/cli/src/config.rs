//! Key=value run configuration: built-in defaults, then an optional config
//! file, then command-line overrides.

use std::path::Path;

use hoss_core::trainer::{toy_preset, NegativePhase};
use hoss_core::{BiasSign, BlockShape, MfConfig, MfInit, TrainConfig};

use crate::error::CliError;

/// Parse `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected key=value, got {line:?}", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_pairs(&text, &path.display().to_string())
}

/// A `--set key=value` argument.
pub fn parse_set(arg: &str) -> Result<(String, String), String> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got {arg:?}"))
}

fn bad(key: &str, value: &str, want: &str) -> CliError {
    CliError::Usage(format!("{key}={value}: expected {want}"))
}

pub fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad(key, value, "a number"))
}

pub fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "on" | "yes" => Ok(true),
        "false" | "0" | "off" | "no" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

/// A settings group that can be overridden key by key and rendered back.
pub trait Settings {
    /// Returns `Ok(false)` for keys this group does not own.
    fn apply(&mut self, key: &str, value: &str) -> Result<bool, CliError>;
    fn pairs(&self) -> Vec<(&'static str, String)>;

    fn render(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    fn apply_all(&mut self, pairs: &[(String, String)]) -> Result<(), CliError> {
        for (k, v) in pairs {
            if !self.apply(k, v)? {
                return Err(CliError::Usage(format!("unknown configuration key {k:?}")));
            }
        }
        Ok(())
    }
}

/// Mean-field settings shared by training and every inference command.
impl Settings for MfConfig {
    fn apply(&mut self, key: &str, value: &str) -> Result<bool, CliError> {
        match key {
            "mf_tol" => self.tol = parse_num(key, value)?,
            "mf_max_sweeps" => self.max_sweeps = parse_num(key, value)?,
            "mf_damping" => self.damping = parse_num(key, value)?,
            "mf_init" => {
                self.init = match value {
                    "bias-sigmoid" => MfInit::BiasSigmoid,
                    "uniform-half" => MfInit::UniformHalf,
                    _ => return Err(bad(key, value, "bias-sigmoid or uniform-half")),
                }
            }
            "bias_sign" => {
                self.bias_sign = match value {
                    "energy" => BiasSign::Energy,
                    "displayed" => BiasSign::Displayed,
                    _ => return Err(bad(key, value, "energy or displayed")),
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("mf_tol", self.tol.to_string()),
            ("mf_max_sweeps", self.max_sweeps.to_string()),
            ("mf_damping", self.damping.to_string()),
            (
                "mf_init",
                match self.init {
                    MfInit::BiasSigmoid => "bias-sigmoid",
                    MfInit::UniformHalf => "uniform-half",
                }
                .into(),
            ),
            (
                "bias_sign",
                match self.bias_sign {
                    BiasSign::Energy => "energy",
                    BiasSign::Displayed => "displayed",
                }
                .into(),
            ),
        ]
    }
}

/// Everything that determines a training run, apart from file paths.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub train: TrainConfig,
    /// Write the checkpoint every this many epochs (0: only at the end).
    pub checkpoint_every: usize,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        match name {
            "default" => Ok(Self {
                preset: name.into(),
                k: 1,
                m: 3,
                n: 5,
                train: TrainConfig::default(),
                checkpoint_every: 0,
            }),
            "toy" => {
                let (shape, train) = toy_preset();
                Ok(Self {
                    preset: name.into(),
                    k: shape.k,
                    m: shape.m,
                    n: shape.n,
                    train,
                    checkpoint_every: 0,
                })
            }
            _ => Err(bad("preset", name, "default or toy")),
        }
    }

    /// Start from the preset named in `pairs` (last one wins), then apply
    /// every pair in order.
    pub fn resolve(pairs: &[(String, String)]) -> Result<Self, CliError> {
        let preset = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "preset")
            .map_or("default", |(_, v)| v.as_str());
        let mut cfg = Self::preset(preset)?;
        cfg.apply_all(pairs)?;
        cfg.train
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn shape(&self, d: usize) -> Result<BlockShape, CliError> {
        BlockShape::new(d, self.k, self.m, self.n).map_err(|e| CliError::Usage(e.to_string()))
    }
}

impl Settings for RunConfig {
    fn apply(&mut self, key: &str, value: &str) -> Result<bool, CliError> {
        if self.train.mf.apply(key, value)? {
            return Ok(true);
        }
        let t = &mut self.train;
        match key {
            "preset" => self.preset = value.into(),
            "k" => self.k = parse_num(key, value)?,
            "m" => self.m = parse_num(key, value)?,
            "n" => self.n = parse_num(key, value)?,
            "checkpoint_every" => self.checkpoint_every = parse_num(key, value)?,
            "lr" => t.lr = parse_num(key, value)?,
            "lr_decay" => t.lr_decay = parse_num(key, value)?,
            "epochs" => t.epochs = parse_num(key, value)?,
            "minibatch" => t.minibatch = parse_num(key, value)?,
            "seed" => t.seed = parse_num(key, value)?,
            "chains" => t.gibbs.n_chains = parse_num(key, value)?,
            "gibbs_steps" => t.gibbs.steps_per_update = parse_num(key, value)?,
            "chain_seed" => t.gibbs.seed = parse_num(key, value)?,
            "negative_phase" => {
                t.negative_phase = match value {
                    "pcd" => NegativePhase::Persistent,
                    _ => match value.strip_prefix("cd-").map(str::parse) {
                        Some(Ok(k)) => NegativePhase::ContrastiveDivergence { k },
                        _ => return Err(bad(key, value, "pcd or cd-<steps>")),
                    },
                }
            }
            "mu_min" => t.mu_min = parse_num(key, value)?,
            "alpha_min" => t.alpha_min = parse_num(key, value)?,
            "alpha_max" => t.alpha_max = parse_num(key, value)?,
            "lambda_min" => t.lambda_min = parse_num(key, value)?,
            "learn_lambda" => t.learn_lambda = parse_bool(key, value)?,
            "center" => t.center_data = parse_bool(key, value)?,
            "clamp_f" => t.clamp_f = parse_bool(key, value)?,
            "init_w_std" => t.init.w_std = parse_num(key, value)?,
            "init_mu" => t.init.mu = parse_num(key, value)?,
            "init_alpha" => t.init.alpha = parse_num(key, value)?,
            "init_f_bias" => t.init.f_bias = parse_num(key, value)?,
            "init_g_bias" => t.init.g_bias = parse_num(key, value)?,
            "init_h_bias" => t.init.h_bias = parse_num(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let mut out = vec![
            ("preset", self.preset.clone()),
            ("k", self.k.to_string()),
            ("m", self.m.to_string()),
            ("n", self.n.to_string()),
            ("checkpoint_every", self.checkpoint_every.to_string()),
            ("lr", t.lr.to_string()),
            ("lr_decay", t.lr_decay.to_string()),
            ("epochs", t.epochs.to_string()),
            ("minibatch", t.minibatch.to_string()),
            ("seed", t.seed.to_string()),
            ("chains", t.gibbs.n_chains.to_string()),
            ("gibbs_steps", t.gibbs.steps_per_update.to_string()),
            ("chain_seed", t.gibbs.seed.to_string()),
            (
                "negative_phase",
                match t.negative_phase {
                    NegativePhase::Persistent => "pcd".into(),
                    NegativePhase::ContrastiveDivergence { k } => format!("cd-{k}"),
                },
            ),
            ("mu_min", t.mu_min.to_string()),
            ("alpha_min", t.alpha_min.to_string()),
            ("alpha_max", t.alpha_max.to_string()),
            ("lambda_min", t.lambda_min.to_string()),
            ("learn_lambda", t.learn_lambda.to_string()),
            ("center", t.center_data.to_string()),
            ("clamp_f", t.clamp_f.to_string()),
            ("init_w_std", t.init.w_std.to_string()),
            ("init_mu", t.init.mu.to_string()),
            ("init_alpha", t.init.alpha.to_string()),
            ("init_f_bias", t.init.f_bias.to_string()),
            ("init_g_bias", t.init.g_bias.to_string()),
            ("init_h_bias", t.init.h_bias.to_string()),
        ];
        out.extend(t.mf.pairs());
        out
    }
}

/// Settings of the `gen-toy` command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySettings(pub hoss_core::ToyConfig);

impl Settings for ToySettings {
    fn apply(&mut self, key: &str, value: &str) -> Result<bool, CliError> {
        match key {
            "n" => self.0.n_samples = parse_num(key, value)?,
            "sigma" => self.0.noise_sigma = parse_num(key, value)?,
            "seed" => self.0.seed = parse_num(key, value)?,
            "include_empty" => self.0.include_empty = parse_bool(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("n", self.0.n_samples.to_string()),
            ("sigma", self.0.noise_sigma.to_string()),
            ("seed", self.0.seed.to_string()),
            ("include_empty", self.0.include_empty.to_string()),
        ]
    }
}

/// Prefix every line with `# `.
pub fn as_comments(text: &str) -> String {
    text.lines().map(|l| format!("# {l}\n")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_skip_comments_and_blanks() {
        let p = parse_pairs("# hi\n\nlr = 0.5\nepochs=3\n", "x").unwrap();
        assert_eq!(p, vec![("lr".into(), "0.5".into()), ("epochs".into(), "3".into())]);
        assert!(parse_pairs("oops\n", "x").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = RunConfig::preset("toy").unwrap();
        cfg.apply_all(&[("lr".into(), "0.125".into()), ("negative_phase".into(), "cd-3".into())])
            .unwrap();
        let back = RunConfig::resolve(&parse_pairs(&cfg.render(), "t").unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn later_pairs_override() {
        let cfg = RunConfig::resolve(&[("epochs".into(), "3".into()), ("epochs".into(), "7".into())]).unwrap();
        assert_eq!(cfg.train.epochs, 7);
    }

    #[test]
    fn unknown_and_malformed_keys_are_usage_errors() {
        assert!(matches!(RunConfig::resolve(&[("bogus".into(), "1".into())]), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::resolve(&[("lr".into(), "fast".into())]), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::resolve(&[("lr".into(), "-1".into())]), Err(CliError::Usage(_))));
    }
}
