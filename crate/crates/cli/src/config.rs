//! `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use radial_cmc::{BoundaryData, CapDomain, CmcConfig};

/// How the subsolution is supplied.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsolutionSpec {
    /// `u_bar` constant; the boundary data must equal it.
    Constant(f64),
    /// Interior graph of the equal-curvature pair over the cap `r = sin(theta_max)` at height `h`.
    Example1 { h: f64 },
    /// Field file written by a previous run.
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub domain: CapDomain,
    pub phi: BoundaryData,
    pub subsolution: SubsolutionSpec,
    pub h_target: f64,
    pub n_theta: usize,
    pub n_phi: usize,
    pub solver: CmcConfig,
    pub out_dir: PathBuf,
}

const KEYS: &[&str] = &[
    "theta_max",
    "r",
    "axis",
    "phi",
    "phi_modes",
    "subsolution",
    "h_target",
    "n_theta",
    "n_phi",
    "residual_tol",
    "max_newton_iters",
    "t_step_init",
    "t_step_min",
    "t_step_max",
    "max_c_doublings",
    "eps_strip",
    "certify",
    "out",
];

/// Raw key-value pairs; later insertions win.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
    /// Directory relative paths in the file are resolved against.
    base: Option<PathBuf>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            map.set(k.trim(), v.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut map = Self::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        map.base = path.parent().map(Path::to_path_buf);
        Ok(map)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("unknown key {key:?}");
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// `KEY=VALUE`
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| anyhow!("expected KEY=VALUE, got {pair:?}"))?;
        self.set(k.trim(), v.trim())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|_| anyhow!("{key}: cannot parse {v:?}")))
            .transpose()
    }

    pub fn build(&self) -> Result<RunConfig> {
        let axis = match self.get("axis") {
            Some(v) => {
                let parts = v.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>()?;
                <[f64; 3]>::try_from(parts).map_err(|_| anyhow!("axis needs three components"))?
            }
            None => [0.0, 0.0, 1.0],
        };
        let theta_max = match (self.num::<f64>("theta_max")?, self.num::<f64>("r")?) {
            (Some(t), None) => t,
            (None, Some(r)) => {
                if !(r > 0.0 && r < 1.0) {
                    bail!("r must lie in (0, 1)");
                }
                r.asin()
            }
            (Some(_), Some(_)) => bail!("give either theta_max or r, not both"),
            (None, None) => bail!("missing domain: set theta_max or r"),
        };
        let domain = CapDomain::with_axis(axis, theta_max)?;

        let modes = match self.get("phi_modes") {
            Some(v) => parse_modes(v)?,
            None => Vec::new(),
        };
        let phi = BoundaryData::with_modes(self.num("phi")?.unwrap_or(0.0), modes)?;

        let subsolution = match self.get("subsolution").unwrap_or("constant:0") {
            s if s.starts_with("constant:") => SubsolutionSpec::Constant(parse_tail(s, "constant:")?),
            s if s.starts_with("example1:") => SubsolutionSpec::Example1 { h: parse_tail(s, "example1:")? },
            s if s.starts_with("file:") => {
                let raw = PathBuf::from(&s["file:".len()..]);
                let path = match (&self.base, raw.is_relative()) {
                    (Some(base), true) => base.join(raw),
                    _ => raw,
                };
                if !path.is_file() {
                    bail!("subsolution file {} does not exist", path.display());
                }
                SubsolutionSpec::File(path)
            }
            s => bail!("subsolution must be constant:<c>, example1:<h> or file:<path>, got {s:?}"),
        };

        let h_target: f64 = self.num("h_target")?.ok_or_else(|| anyhow!("missing h_target"))?;
        if !(h_target > 0.0) {
            bail!("h_target must be positive");
        }

        let mut solver = CmcConfig::default();
        if let Some(v) = self.num("residual_tol")? {
            solver.plan.solve.residual_tol = v;
        }
        if let Some(v) = self.num("max_newton_iters")? {
            solver.plan.solve.max_newton_iters = v;
        }
        if let Some(v) = self.num("t_step_init")? {
            solver.plan.t_step_init = v;
        }
        if let Some(v) = self.num("t_step_min")? {
            solver.plan.t_step_min = v;
        }
        if let Some(v) = self.num("t_step_max")? {
            solver.plan.t_step_max = v;
        }
        if let Some(v) = self.num("max_c_doublings")? {
            solver.max_c_doublings = v;
        }
        solver.eps_strip = self.num("eps_strip")?;
        if let Some(v) = self.num("certify")? {
            solver.certify = v;
        }
        solver.plan.validate()?;

        Ok(RunConfig {
            domain,
            phi,
            subsolution,
            h_target,
            n_theta: self.num("n_theta")?.unwrap_or(32),
            n_phi: self.num("n_phi")?.unwrap_or(64),
            solver,
            out_dir: PathBuf::from(self.get("out").unwrap_or("out")),
        })
    }
}

fn parse_tail(s: &str, prefix: &str) -> Result<f64> {
    s[prefix.len()..].trim().parse().map_err(|_| anyhow!("bad number in {s:?}"))
}

/// `k:a:b` triples separated by whitespace or commas.
fn parse_modes(v: &str) -> Result<Vec<(u32, f64, f64)>> {
    v.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|t| {
            let parts: Vec<&str> = t.split(':').collect();
            match parts.as_slice() {
                [k, a, b] => Ok((k.parse()?, a.parse()?, b.parse()?)),
                _ => bail!("Fourier mode must be k:a:b, got {t:?}"),
            }
        })
        .collect()
}

/// `NTHETA,NPHI`
pub fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(',').ok_or_else(|| anyhow!("grid must be NTHETA,NPHI"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}
