//! Run configuration: defaults, the line-oriented `key = value` file
//! format, command-line overrides, and validation.

use anyhow::{anyhow, bail, Context, Result};
use limitfem::{Domain, MaterialParams, Model, NewtonConfig, TemperatureCase};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub domain: Domain,
    pub temperature_case: TemperatureCase,
    pub model: Model,
    pub refinements: u32,
    pub lambda: f64,
    pub mu: f64,
    pub a: f64,
    pub beta: f64,
    pub k: f64,
    pub g: f64,
    pub alpha_t: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub outdir: PathBuf,
    pub workers: usize,
    pub export_vtk: bool,
    pub export_csv: bool,
    pub export_profile: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = MaterialParams::default();
        RunConfig {
            domain: Domain::Example1,
            temperature_case: TemperatureCase::Case1,
            model: Model::Nonlinear,
            refinements: 7,
            lambda: m.lambda,
            mu: m.mu,
            a: m.a,
            beta: m.beta,
            k: m.k,
            g: m.g,
            alpha_t: m.alpha_t,
            tol: 1e-8,
            max_iter: 50,
            outdir: PathBuf::from("out"),
            workers: 1,
            export_vtk: true,
            export_csv: false,
            export_profile: true,
        }
    }
}

fn parse_domain(s: &str) -> Result<Domain> {
    match s {
        "example1" => Ok(Domain::Example1),
        "example2" => Ok(Domain::Example2),
        other => bail!("unknown domain '{other}' (expected example1 or example2)"),
    }
}

fn parse_case(n: u32) -> Result<TemperatureCase> {
    match n {
        1 => Ok(TemperatureCase::Case1),
        2 => Ok(TemperatureCase::Case2),
        other => bail!("unknown temperature case {other} (expected 1 or 2)"),
    }
}

fn parse_model(s: &str) -> Result<Model> {
    match s {
        "linear" => Ok(Model::Linear),
        "nonlinear" => Ok(Model::Nonlinear),
        other => bail!("unknown model '{other}' (expected linear or nonlinear)"),
    }
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("expected a boolean, got '{other}'"),
    }
}

impl RunConfig {
    pub fn domain_str(&self) -> &'static str {
        match self.domain {
            Domain::Example1 => "example1",
            Domain::Example2 => "example2",
        }
    }

    pub fn case_number(&self) -> u32 {
        match self.temperature_case {
            TemperatureCase::Case1 => 1,
            TemperatureCase::Case2 => 2,
        }
    }

    pub fn material(&self) -> MaterialParams {
        MaterialParams {
            lambda: self.lambda,
            mu: self.mu,
            a: self.a,
            beta: self.beta,
            k: self.k,
            g: self.g,
            alpha_t: self.alpha_t,
        }
    }

    pub fn newton(&self) -> NewtonConfig {
        NewtonConfig {
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    /// Subdirectory name for one experiment's outputs.
    pub fn run_dir_name(&self) -> String {
        format!(
            "{}_case{}_{}",
            self.domain_str(),
            self.case_number(),
            self.model.as_str()
        )
    }

    /// Apply one `key = value` pair; `where_` names the source for errors.
    fn set(&mut self, key: &str, value: &str, where_: &str) -> Result<()> {
        let ctx = |what: &str| format!("{where_}: invalid {what} for key '{key}'");
        match key {
            "domain" => self.domain = parse_domain(value).with_context(|| ctx("domain"))?,
            "case" => {
                let n: u32 = value.parse().with_context(|| ctx("integer"))?;
                self.temperature_case = parse_case(n).with_context(|| ctx("case"))?;
            }
            "model" => self.model = parse_model(value).with_context(|| ctx("model"))?,
            "refinements" => self.refinements = value.parse().with_context(|| ctx("integer"))?,
            "lambda" => self.lambda = value.parse().with_context(|| ctx("number"))?,
            "mu" => self.mu = value.parse().with_context(|| ctx("number"))?,
            "a" => self.a = value.parse().with_context(|| ctx("number"))?,
            "beta" => self.beta = value.parse().with_context(|| ctx("number"))?,
            "k" => self.k = value.parse().with_context(|| ctx("number"))?,
            "g" => self.g = value.parse().with_context(|| ctx("number"))?,
            "alpha_t" => self.alpha_t = value.parse().with_context(|| ctx("number"))?,
            "tol" => self.tol = value.parse().with_context(|| ctx("number"))?,
            "max_iter" => self.max_iter = value.parse().with_context(|| ctx("integer"))?,
            "outdir" => self.outdir = PathBuf::from(value),
            "workers" => self.workers = value.parse().with_context(|| ctx("integer"))?,
            "vtk" => self.export_vtk = parse_bool(value).with_context(|| ctx("boolean"))?,
            "csv" => self.export_csv = parse_bool(value).with_context(|| ctx("boolean"))?,
            "profile" => self.export_profile = parse_bool(value).with_context(|| ctx("boolean"))?,
            other => bail!("{where_}: unknown key '{other}'"),
        }
        Ok(())
    }

    fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.merge_str(&text, &path.display().to_string())
    }

    fn merge_str(&mut self, text: &str, source: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key = value", source, lineno + 1))?;
            self.set(key.trim(), value.trim(), &format!("{}:{}", source, lineno + 1))?;
        }
        Ok(())
    }

    /// Defaults, then the config file, then command-line flags, then the
    /// LIMITFEM_OUTDIR fallback; validated at the end.
    pub fn from_sources(over: &crate::Overrides) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut outdir_explicit = false;
        if let Some(path) = &over.config {
            let before = cfg.outdir.clone();
            cfg.merge_file(path)?;
            outdir_explicit = cfg.outdir != before;
        }
        if let Some(d) = &over.domain {
            cfg.domain = parse_domain(d)?;
        }
        if let Some(c) = over.case {
            cfg.temperature_case = parse_case(c)?;
        }
        if let Some(m) = &over.model {
            cfg.model = parse_model(m)?;
        }
        if let Some(r) = over.refinements {
            cfg.refinements = r;
        }
        if let Some(b) = over.beta {
            cfg.beta = b;
        }
        if let Some(a) = over.a {
            cfg.a = a;
        }
        if let Some(t) = over.tol {
            cfg.tol = t;
        }
        if let Some(m) = over.max_iter {
            cfg.max_iter = m;
        }
        if let Some(w) = over.workers {
            cfg.workers = w;
        }
        if let Some(o) = &over.outdir {
            cfg.outdir = o.clone();
        } else if !outdir_explicit {
            if let Ok(env_dir) = std::env::var("LIMITFEM_OUTDIR") {
                if !env_dir.is_empty() {
                    cfg.outdir = PathBuf::from(env_dir);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model == Model::Nonlinear && !(self.beta > 0.0) {
            bail!("the nonlinear model requires beta > 0 (got beta = {})", self.beta);
        }
        if self.domain == Domain::Example2 && self.refinements == 0 {
            bail!("example2 needs refinements >= 1 for the slit");
        }
        if !(self.tol > 0.0) {
            bail!("tol must be positive");
        }
        if self.max_iter == 0 {
            bail!("max_iter must be at least 1");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        self.material()
            .validate()
            .map_err(|e| anyhow!("{e}"))?;
        Ok(())
    }

    /// Serialize the effective configuration in the config-file format;
    /// re-parsing the result reproduces this config exactly.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut push = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        push("domain", self.domain_str().into());
        push("case", self.case_number().to_string());
        push("model", self.model.as_str().into());
        push("refinements", self.refinements.to_string());
        push("lambda", format!("{:e}", self.lambda));
        push("mu", format!("{:e}", self.mu));
        push("a", format!("{:e}", self.a));
        push("beta", format!("{:e}", self.beta));
        push("k", format!("{:e}", self.k));
        push("g", format!("{:e}", self.g));
        push("alpha_t", format!("{:e}", self.alpha_t));
        push("tol", format!("{:e}", self.tol));
        push("max_iter", self.max_iter.to_string());
        push("outdir", self.outdir.display().to_string());
        push("workers", self.workers.to_string());
        push("vtk", self.export_vtk.to_string());
        push("csv", self.export_csv.to_string());
        push("profile", self.export_profile.to_string());
        s
    }

    /// Parse a config-file string over the defaults.
    #[cfg(test)]
    pub fn from_str_over_defaults(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        cfg.merge_str(text, "config")?;
        Ok(cfg)
    }
}
