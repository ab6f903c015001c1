use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use shakg::decoder::TemplateSet;
use shakg::encoders::Vocabulary;
use shakg::env::{bundled_templates, miniquest_vocabulary, MiniQuest, WorldSpec};
use shakg::trainer::{parse_kv, TrainConfig};

pub const THREADS_VAR: &str = "SHAKG_THREADS";
pub const CONFIG_ECHO: &str = "config.cfg";

/// Training settings plus the files a run reads and writes.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// `None` selects the bundled MiniQuest asset.
    pub world: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Write a greedy trace of the final agent after training.
    pub trace: bool,
}

fn resolve(base: &Path, value: &str) -> PathBuf {
    let p = PathBuf::from(value);
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Reads a `key = value` file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = RunConfig::default();
        for (k, v) in parse_kv(&text).with_context(|| format!("in {}", path.display()))? {
            cfg.set(&k, &v, base)
                .with_context(|| format!("in {}", path.display()))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        match key {
            "world" => self.world = Some(resolve(base, value)),
            "templates" => self.templates = Some(resolve(base, value)),
            "vocab" => self.vocab = Some(resolve(base, value)),
            "out" => self.out = Some(resolve(base, value)),
            "trace" => {
                self.trace = value
                    .parse()
                    .with_context(|| format!("bad value `{value}` for `trace`"))?
            }
            _ => self.train.set(key, value)?,
        }
        Ok(())
    }

    /// Applies `SHAKG_THREADS` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(THREADS_VAR) {
            self.train
                .set("threads", &v)
                .with_context(|| format!("in {THREADS_VAR}"))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        for (name, p) in [("world", &self.world), ("templates", &self.templates), ("vocab", &self.vocab)] {
            if let Some(p) = p {
                if !p.is_file() {
                    bail!("{name} file {} does not exist", p.display());
                }
            }
        }
        Ok(())
    }

    pub fn load_world(&self) -> Result<(MiniQuest, Vocabulary)> {
        let spec = match &self.world {
            Some(p) => WorldSpec::load(p).with_context(|| format!("world {}", p.display()))?,
            None => WorldSpec::miniquest(),
        };
        let templates = match &self.templates {
            Some(p) => TemplateSet::load(p).with_context(|| format!("templates {}", p.display()))?,
            None => bundled_templates(),
        };
        let vocab = match &self.vocab {
            Some(p) => Vocabulary::load(p).with_context(|| format!("vocab {}", p.display()))?,
            None => miniquest_vocabulary(),
        };
        Ok((MiniQuest::new(spec, templates)?, vocab))
    }

    pub fn to_kv_string(&self) -> String {
        let mut s = self.train.to_kv_string();
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("bundled".to_string(), |p| p.display().to_string());
        s.push_str(&format!("world = {}\n", path(&self.world)));
        s.push_str(&format!("templates = {}\n", path(&self.templates)));
        s.push_str(&format!("vocab = {}\n", path(&self.vocab)));
        s.push_str(&format!("trace = {}\n", self.trace));
        s
    }
}
