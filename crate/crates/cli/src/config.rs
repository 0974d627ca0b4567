//! Flat `key = value` experiment configuration with dotted section prefixes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flowplate::ambient::{AmbientFlow, VerticalProfile};
use flowplate::diffops::FluidParams;
use flowplate::evolve::Scheme;
use flowplate::grid::BoxDomain;

/// Every accepted key with its default value.
const DEFAULTS: &[(&str, &str)] = &[
    ("domain.lx", "1"),
    ("domain.ly", "1"),
    ("domain.lz", "1"),
    ("grid.n", "9"),
    ("ambient.family", "channel"),
    ("ambient.amplitude", "1"),
    ("ambient.profile", "cosine"),
    ("fluid.nu", "1"),
    ("fluid.lambda", "0.5"),
    ("fluid.eta", "0.1"),
    ("scheme.alpha", "auto"),
    ("scheme.epsilon", "auto"),
    ("scheme.xi", "10, 100, 1000"),
    ("scheme.include_lower_order", "false"),
    ("scheme.deterministic_sums", "false"),
    ("identities.resolutions", "9, 17, 33"),
    ("identities.plate_resolutions", "17, 33, 65"),
    ("commutator.resolutions", "17, 33"),
    ("dirichlet.resolutions", "9, 17, 25"),
    ("dirichlet.probes", "20"),
    ("resolvent.samples", "20"),
    ("lemma.xi", "10, 100, 1000, 10000"),
    ("ellipticity.xi", "0.1, 1, 10, 100, 1000"),
    ("growth.n", "8"),
    ("growth.times", "0.25, 0.5, 1, 2, 5"),
    ("simulate.dt", "0.01"),
    ("simulate.t_final", "0.5"),
    ("simulate.scheme", "implicit-euler"),
    ("run.seed", "0"),
    ("run.out", "out"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setting {
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Zero,
    Channel,
    Swirl,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Effective value of every key, for the run manifest.
    pub echo: BTreeMap<String, String>,
    pub domain: BoxDomain,
    pub grid_n: usize,
    pub family: Family,
    pub amplitude: f64,
    pub profile: VerticalProfile,
    pub params: FluidParams,
    pub alpha: Setting,
    pub epsilon: Setting,
    pub xi: Vec<f64>,
    pub include_lower_order: bool,
    pub deterministic_sums: bool,
    pub identity_resolutions: Vec<usize>,
    pub plate_resolutions: Vec<usize>,
    pub commutator_resolutions: Vec<usize>,
    pub dirichlet_resolutions: Vec<usize>,
    pub dirichlet_probes: usize,
    pub resolvent_samples: usize,
    pub lemma_xi: Vec<f64>,
    pub ellipticity_xi: Vec<f64>,
    pub growth_n: usize,
    pub growth_times: Vec<f64>,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub out: PathBuf,
}

/// Raw value with the line it came from (`None` for defaults).
struct Entry {
    value: String,
    line: Option<usize>,
}

struct Raw(BTreeMap<&'static str, Entry>);

impl Raw {
    fn location(&self, key: &str) -> String {
        match self.0[key].line {
            Some(l) => format!("{key} (line {l})"),
            None => key.to_string(),
        }
    }

    fn fail(&self, key: &str, msg: impl fmt::Display) -> ConfigError {
        ConfigError(format!("{}: {msg}", self.location(key)))
    }

    fn str(&self, key: &str) -> &str {
        &self.0[key].value
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.str(key)
            .parse()
            .map_err(|_| self.fail(key, format!("cannot parse {:?}", self.str(key))))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        let items: Vec<T> = self
            .str(key)
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| self.fail(key, format!("cannot parse list entry {:?}", s.trim())))
            })
            .collect::<Result<_, _>>()?;
        if items.is_empty() {
            return Err(self.fail(key, "list is empty"));
        }
        Ok(items)
    }

    fn setting(&self, key: &str) -> Result<Setting, ConfigError> {
        if self.str(key) == "auto" {
            Ok(Setting::Auto)
        } else {
            let v: f64 = self.parse(key)?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(self.fail(key, "must be nonnegative or \"auto\""));
            }
            Ok(Setting::Value(v))
        }
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.parse(key)?;
        if !(v.is_finite() && v > 0.0) {
            return Err(self.fail(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn ascending(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v: Vec<f64> = self.list(key)?;
        if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(self.fail(key, "must be positive and strictly ascending"));
        }
        Ok(v)
    }

    fn resolutions(&self, key: &str, min_len: usize) -> Result<Vec<usize>, ConfigError> {
        let v: Vec<usize> = self.list(key)?;
        if v.len() < min_len || v.windows(2).any(|w| w[1] <= w[0]) {
            return Err(self.fail(
                key,
                format!("needs at least {min_len} strictly ascending entries"),
            ));
        }
        Ok(v)
    }
}

impl ExperimentConfig {
    pub fn defaults() -> Self {
        Self::parse("").expect("defaults are valid")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw: BTreeMap<&'static str, Entry> = DEFAULTS
            .iter()
            .map(|&(k, v)| {
                (
                    k,
                    Entry {
                        value: v.to_string(),
                        line: None,
                    },
                )
            })
            .collect();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                ConfigError(format!(
                    "line {lineno}: expected `key = value`, got {content:?}"
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let known = DEFAULTS
                .iter()
                .map(|(k, _)| *k)
                .find(|k| *k == key)
                .ok_or_else(|| ConfigError(format!("line {lineno}: unknown key {key:?}")))?;
            let entry = raw.get_mut(known).expect("defaults cover known keys");
            if let Some(prev) = entry.line {
                return Err(ConfigError(format!(
                    "line {lineno}: key {key:?} already set on line {prev}"
                )));
            }
            *entry = Entry {
                value: value.to_string(),
                line: Some(lineno),
            };
        }
        Self::from_raw(&Raw(raw))
    }

    fn from_raw(r: &Raw) -> Result<Self, ConfigError> {
        let domain = BoxDomain::new(
            r.positive("domain.lx")?,
            r.positive("domain.ly")?,
            r.positive("domain.lz")?,
        )
        .map_err(|e| ConfigError(e.to_string()))?;
        let family = match r.str("ambient.family") {
            "zero" => Family::Zero,
            "channel" => Family::Channel,
            "swirl" => Family::Swirl,
            other => {
                return Err(r.fail(
                    "ambient.family",
                    format!("expected zero, channel or swirl, got {other:?}"),
                ))
            }
        };
        let profile = match r.str("ambient.profile") {
            "uniform" => VerticalProfile::Uniform,
            "cosine" => VerticalProfile::Cosine,
            other => {
                return Err(r.fail(
                    "ambient.profile",
                    format!("expected uniform or cosine, got {other:?}"),
                ))
            }
        };
        let amplitude: f64 = r.parse("ambient.amplitude")?;
        if !amplitude.is_finite() {
            return Err(r.fail("ambient.amplitude", "must be finite"));
        }
        let params = FluidParams::new(
            r.parse("fluid.nu")?,
            r.parse("fluid.lambda")?,
            r.parse("fluid.eta")?,
        )
        .map_err(|e| ConfigError(e.to_string()))?;
        let scheme = match r.str("simulate.scheme") {
            "implicit-euler" => Scheme::ImplicitEuler,
            "trapezoid" => Scheme::Trapezoid,
            other => {
                return Err(r.fail(
                    "simulate.scheme",
                    format!("expected implicit-euler or trapezoid, got {other:?}"),
                ))
            }
        };
        let grid_n: usize = r.parse("grid.n")?;
        let growth_n: usize = r.parse("growth.n")?;
        for (key, n) in [("grid.n", grid_n), ("growth.n", growth_n)] {
            if n < flowplate::grid::MIN_NODES {
                return Err(r.fail(
                    key,
                    format!("must be at least {}", flowplate::grid::MIN_NODES),
                ));
            }
        }
        let growth_times: Vec<f64> = r.list("growth.times")?;
        if growth_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(r.fail("growth.times", "must be nonnegative"));
        }
        let echo =
            r.0.iter()
                .map(|(k, e)| (k.to_string(), e.value.clone()))
                .collect();
        Ok(Self {
            echo,
            domain,
            grid_n,
            family,
            amplitude,
            profile,
            params,
            alpha: r.setting("scheme.alpha")?,
            epsilon: r.setting("scheme.epsilon")?,
            xi: r.ascending("scheme.xi")?,
            include_lower_order: r.parse("scheme.include_lower_order")?,
            deterministic_sums: r.parse("scheme.deterministic_sums")?,
            identity_resolutions: r.resolutions("identities.resolutions", 2)?,
            plate_resolutions: r.resolutions("identities.plate_resolutions", 2)?,
            commutator_resolutions: r.resolutions("commutator.resolutions", 2)?,
            dirichlet_resolutions: r.resolutions("dirichlet.resolutions", 2)?,
            dirichlet_probes: r.parse("dirichlet.probes")?,
            resolvent_samples: r.parse("resolvent.samples")?,
            lemma_xi: r.ascending("lemma.xi")?,
            ellipticity_xi: r.ascending("ellipticity.xi")?,
            growth_n,
            growth_times,
            dt: r.positive("simulate.dt")?,
            t_final: r.positive("simulate.t_final")?,
            scheme,
            seed: r.parse("run.seed")?,
            out: PathBuf::from(r.str("run.out")),
        })
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.echo.insert("run.seed".into(), seed.to_string());
    }

    pub fn set_out(&mut self, out: PathBuf) {
        self.echo
            .insert("run.out".into(), out.display().to_string());
        self.out = out;
    }

    pub fn flow(&self) -> AmbientFlow {
        match self.family {
            Family::Zero => AmbientFlow::zero(self.domain),
            Family::Channel => AmbientFlow::channel(self.domain, self.amplitude),
            Family::Swirl => AmbientFlow::swirl(self.domain, self.amplitude, self.profile),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let c = ExperimentConfig::defaults();
        assert_eq!(c.grid_n, 9);
        assert_eq!(c.family, Family::Channel);
        assert_eq!(c.alpha, Setting::Auto);
        assert_eq!(c.identity_resolutions, vec![9, 17, 33]);
        assert_eq!(c.echo.len(), DEFAULTS.len());
    }

    #[test]
    fn overrides_and_comments() {
        let c = ExperimentConfig::parse(
            "# comment\nambient.family = zero\n\nfluid.nu = 2.5 # inline\nscheme.epsilon = 0.25\n",
        )
        .unwrap();
        assert_eq!(c.family, Family::Zero);
        assert_eq!(c.params.nu, 2.5);
        assert_eq!(c.epsilon, Setting::Value(0.25));
        assert_eq!(c.echo["fluid.nu"], "2.5");
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let e = ExperimentConfig::parse("grid.n = 9\nfluid.mu = 1\n").unwrap_err();
        assert!(e.0.contains("fluid.mu") && e.0.contains("line 2"), "{e}");
    }

    #[test]
    fn negative_viscosity_names_nu() {
        let e = ExperimentConfig::parse("fluid.nu = -1\n").unwrap_err();
        assert!(e.0.contains("nu"), "{e}");
    }

    #[test]
    fn bad_value_names_key_and_line() {
        let e = ExperimentConfig::parse("\n\nscheme.xi = 10, ten\n").unwrap_err();
        assert!(e.0.contains("scheme.xi") && e.0.contains("line 3"), "{e}");
    }

    #[test]
    fn duplicate_and_malformed_lines() {
        assert!(ExperimentConfig::parse("grid.n = 9\ngrid.n = 11\n")
            .unwrap_err()
            .0
            .contains("line 2"));
        assert!(ExperimentConfig::parse("grid.n 9\n")
            .unwrap_err()
            .0
            .contains("line 1"));
    }

    #[test]
    fn grid_below_stencil_width() {
        let e = ExperimentConfig::parse("grid.n = 3\n").unwrap_err();
        assert!(e.0.contains("grid.n"), "{e}");
    }

    #[test]
    fn xi_list_must_ascend() {
        assert!(ExperimentConfig::parse("ellipticity.xi = 10, 1\n").is_err());
    }
}
