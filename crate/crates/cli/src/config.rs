//! Flat `key = value` config files and the small string formats accepted on
//! the command line.

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use lili::data::{Effect, FeatureKind, Schema};

/// Values read from `--config`. Keys are the long flag names without dashes.
#[derive(Debug, Default)]
pub struct ConfigFile {
    values: HashMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key = value", n + 1))?;
            values.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(Self { values })
    }

    /// The flag value when given, else the config value, else `None`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key `{key}`: {e}")))
            .transpose()
    }

    pub fn pick_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// Switches are on when passed or set to `true` in the file.
    pub fn switch(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        match self.values.get(key).map(String::as_str) {
            None | Some("false") => Ok(false),
            Some("true") => Ok(true),
            Some(v) => bail!("config key `{key}`: expected true or false, got `{v}`"),
        }
    }
}

/// `treatment=t,outcome=y,counterfactual=ycf|none,categorical=a;b,drop=c;d`.
pub fn parse_schema(s: &str) -> Result<Schema> {
    let mut schema = Schema::default();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("schema entry `{part}` is not key=value"))?;
        let list = || value.split(';').map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        match key.trim() {
            "treatment" => schema.treatment = value.to_string(),
            "outcome" => schema.outcome = value.to_string(),
            "counterfactual" => schema.counterfactual = (value != "none").then(|| value.to_string()),
            "categorical" => schema.kinds.extend(list().map(|c| (c, FeatureKind::Categorical))),
            "continuous" => schema.kinds.extend(list().map(|c| (c, FeatureKind::Continuous))),
            "drop" => schema.drop.extend(list()),
            other => bail!("unknown schema key `{other}`"),
        }
    }
    Ok(schema)
}

/// `const:TAU` or `linear:FEATURE:INTERCEPT:SLOPE`.
pub fn parse_effect(s: &str) -> Result<Effect> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| v.parse::<f64>().map_err(|_| anyhow!("bad number `{v}` in effect `{s}`"));
    match parts.as_slice() {
        ["const", tau] => Ok(Effect::Constant { tau: num(tau)? }),
        ["linear", f, a, b] => Ok(Effect::Linear {
            feature: f.parse().map_err(|_| anyhow!("bad feature index in effect `{s}`"))?,
            intercept: num(a)?,
            slope: num(b)?,
        }),
        _ => bail!("effect must be const:TAU or linear:FEATURE:INTERCEPT:SLOPE, got `{s}`"),
    }
}

/// Comma-separated integers.
pub fn parse_grid(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| anyhow!("bad grid value `{v}`")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let cfg = ConfigFile::parse("# run\nk = 40\nmin_leaf=25\nhonesty = true\n").unwrap();
        assert_eq!(cfg.pick_or(None::<usize>, "k", 50).unwrap(), 40);
        assert_eq!(cfg.pick_or(Some(10usize), "k", 50).unwrap(), 10);
        assert_eq!(cfg.pick_or(None::<usize>, "min-leaf", 50).unwrap(), 25);
        assert_eq!(cfg.pick_or(None::<f64>, "pi", 0.1).unwrap(), 0.1);
        assert!(cfg.switch(false, "honesty").unwrap());
        assert!(ConfigFile::parse("k 4").is_err());
        assert!(cfg.pick::<f64>(None, "missing").unwrap().is_none());
        assert!(ConfigFile::parse("k = x").unwrap().pick::<usize>(None, "k").is_err());
    }

    #[test]
    fn schema_strings() {
        let s = parse_schema("treatment=treatment,outcome=y_factual,counterfactual=y_cfactual,drop=mu0;mu1,categorical=x7").unwrap();
        assert_eq!(s.treatment, "treatment");
        assert_eq!(s.counterfactual.as_deref(), Some("y_cfactual"));
        assert_eq!(s.drop, vec!["mu0", "mu1"]);
        assert_eq!(s.kinds["x7"], FeatureKind::Categorical);
        assert_eq!(parse_schema("counterfactual=none").unwrap().counterfactual, None);
        assert!(parse_schema("colour=red").is_err());
    }

    #[test]
    fn effects_and_grids() {
        assert_eq!(parse_effect("const:2").unwrap(), Effect::Constant { tau: 2.0 });
        assert_eq!(
            parse_effect("linear:1:0.5:2").unwrap(),
            Effect::Linear { feature: 1, intercept: 0.5, slope: 2.0 }
        );
        assert!(parse_effect("quadratic").is_err());
        assert_eq!(parse_grid("10, 20,30").unwrap(), vec![10, 20, 30]);
        assert!(parse_grid("10,x").is_err());
    }
}
