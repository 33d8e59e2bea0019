//! Flat key-value run configuration.
//!
//! One `key = value` per line, `#` starts a comment, keys match the
//! `RunConfig` field names. Unknown keys are rejected so typos fail loudly
//! instead of silently running defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Initial condition selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IcKind {
    Zero,
    /// The standard Gaussian pulse, at rest.
    Gaussian,
    /// `cos(pi x) cos(pi y)` fundamental mode (pinned walls).
    CavityDirichlet,
    /// `sin(pi x) sin(pi y)` fundamental mode (reflecting walls).
    CavityNeumann,
    /// Radial drum mode `J0(z r / R)`.
    BesselMode,
    /// Two opposite smooth lobes.
    DoubleCircleBump,
}

/// Boundary condition applied at both ends (1D) or all walls (rectangle).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    Dirichlet,
    Neumann,
    Periodic,
    Outflow,
}

/// 1D mesh family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshKind {
    Uniform,
    /// Four abutting blocks: uniform, clustered, uniform, clustered, with
    /// node counts N, 2N, 2N, N.
    Composite,
}

/// 2D geometry selector; shape parameters live in their own keys.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeomKind {
    Rectangle,
    Circle,
    DoubleCircle,
    QuarterCircle,
    Slit,
}

/// Forcing selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    None,
    /// Oscillating plane source on the screen of the slit geometry, with
    /// angular frequency `2 pi c / aperture`.
    SlitPlane,
}

/// Everything a run needs, resolved from a config file.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub dimension: u8,
    pub beta: f64,
    pub c: f64,
    pub cfl: f64,
    /// Explicit step override; otherwise `dt = cfl * max cell width / c`.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub ic: IcKind,
    pub bc: BcKind,
    pub mesh: MeshKind,
    pub a: f64,
    pub b: f64,
    /// 1D resolution: cells for a uniform mesh, the first block's count for
    /// the composite mesh (blocks carry N, 2N, 2N, N).
    pub n: usize,
    /// Number of abutting subdomains for the decomposed 1D run; 1 is
    /// monolithic.
    pub subdomains: usize,
    pub geometry: Option<GeomKind>,
    pub lx: f64,
    pub ly: f64,
    pub r: f64,
    pub gamma: f64,
    pub period: f64,
    pub aperture: f64,
    pub height: f64,
    pub dx: f64,
    pub dy: f64,
    pub source: SourceKind,
    pub snapshot_times: Vec<f64>,
    pub output_dir: PathBuf,
}

fn cfg_err(msg: String) -> Error {
    Error::Config(msg)
}

/// Parsed key-value lines with consumption tracking.
struct Raw {
    map: BTreeMap<String, String>,
}

impl Raw {
    fn parse(text: &str) -> Result<Raw> {
        let mut map = BTreeMap::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(i) => &raw_line[..i],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                cfg_err(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(cfg_err(format!("line {}: empty key or value", lineno + 1)));
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(cfg_err(format!("duplicate key `{key}`")));
            }
        }
        Ok(Raw { map })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn take_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<f64>()
                .map_err(|_| cfg_err(format!("`{key}`: not a number: {v}"))),
        }
    }

    fn take_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| cfg_err(format!("`{key}`: not a count: {v}"))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.map.keys().next() {
            return Err(cfg_err(format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<RunConfig> {
        let mut raw = Raw::parse(text)?;

        let dimension = raw.take_usize("dimension", 0)? as u8;
        if dimension != 1 && dimension != 2 {
            return Err(cfg_err("`dimension` must be 1 or 2".into()));
        }
        let beta = raw.take_f64("beta", 2.0)?;
        if !(beta > 0.0 && beta <= 2.0) {
            return Err(cfg_err(format!("`beta` must lie in (0, 2], got {beta}")));
        }
        let c = raw.take_f64("c", 1.0)?;
        let cfl = raw.take_f64("cfl", 1.0)?;
        if !(c > 0.0 && cfl > 0.0) {
            return Err(cfg_err("`c` and `cfl` must be positive".into()));
        }
        let dt = match raw.take("dt") {
            None => None,
            Some(v) => Some(
                v.parse::<f64>()
                    .map_err(|_| cfg_err(format!("`dt`: not a number: {v}")))?,
            ),
        };
        if matches!(dt, Some(d) if !(d > 0.0)) {
            return Err(cfg_err("`dt` must be positive".into()));
        }
        let t_final = raw.take_f64("t_final", f64::NAN)?;
        if !(t_final > 0.0) {
            return Err(cfg_err("`t_final` is required and must be positive".into()));
        }

        let ic = match raw.take("ic").as_deref() {
            None => return Err(cfg_err("`ic` is required".into())),
            Some("zero") => IcKind::Zero,
            Some("gaussian") => IcKind::Gaussian,
            Some("cavity_dirichlet") => IcKind::CavityDirichlet,
            Some("cavity_neumann") => IcKind::CavityNeumann,
            Some("bessel_mode") => IcKind::BesselMode,
            Some("double_circle_bump") => IcKind::DoubleCircleBump,
            Some(v) => return Err(cfg_err(format!("unknown `ic` kind: {v}"))),
        };
        let bc = match raw.take("bc").as_deref() {
            None => BcKind::Dirichlet,
            Some("dirichlet") => BcKind::Dirichlet,
            Some("neumann") => BcKind::Neumann,
            Some("periodic") => BcKind::Periodic,
            Some("outflow") => BcKind::Outflow,
            Some(v) => return Err(cfg_err(format!("unknown `bc` kind: {v}"))),
        };
        let mesh = match raw.take("mesh").as_deref() {
            None => MeshKind::Uniform,
            Some("uniform") => MeshKind::Uniform,
            Some("composite") => MeshKind::Composite,
            Some(v) => return Err(cfg_err(format!("unknown `mesh` kind: {v}"))),
        };
        let geometry = match raw.take("geometry").as_deref() {
            None => None,
            Some("rectangle") => Some(GeomKind::Rectangle),
            Some("circle") => Some(GeomKind::Circle),
            Some("double_circle") => Some(GeomKind::DoubleCircle),
            Some("quarter_circle") => Some(GeomKind::QuarterCircle),
            Some("slit") => Some(GeomKind::Slit),
            Some(v) => return Err(cfg_err(format!("unknown `geometry` kind: {v}"))),
        };
        let source = match raw.take("source").as_deref() {
            None => SourceKind::None,
            Some("none") => SourceKind::None,
            Some("slit_plane") => SourceKind::SlitPlane,
            Some(v) => return Err(cfg_err(format!("unknown `source` kind: {v}"))),
        };

        let a = raw.take_f64("a", -1.0)?;
        let b = raw.take_f64("b", 1.0)?;
        let n = raw.take_usize("n", 0)?;
        let subdomains = raw.take_usize("subdomains", 1)?;
        let lx = raw.take_f64("lx", 1.0)?;
        let ly = raw.take_f64("ly", 1.0)?;
        let r = raw.take_f64("r", 1.0)?;
        let gamma = raw.take_f64("gamma", 0.2)?;
        let period = raw.take_f64("period", 1.0)?;
        let aperture = raw.take_f64("aperture", 0.1)?;
        let height = raw.take_f64("height", 1.0)?;
        let dx = raw.take_f64("dx", 0.0)?;
        let dy = raw.take_f64("dy", dx)?;

        let snapshot_times = match raw.take("snapshot_times") {
            None => Vec::new(),
            Some(v) => {
                let mut times = Vec::new();
                for part in v.split(',') {
                    let t: f64 = part
                        .trim()
                        .parse()
                        .map_err(|_| cfg_err(format!("`snapshot_times`: bad entry {part}")))?;
                    times.push(t);
                }
                times.sort_by(|p, q| p.partial_cmp(q).unwrap());
                times
            }
        };
        let output_dir = PathBuf::from(raw.take("output_dir").unwrap_or_else(|| "out".into()));

        raw.finish()?;

        let cfg = RunConfig {
            dimension,
            beta,
            c,
            cfl,
            dt,
            t_final,
            ic,
            bc,
            mesh,
            a,
            b,
            n,
            subdomains,
            geometry,
            lx,
            ly,
            r,
            gamma,
            period,
            aperture,
            height,
            dx,
            dy,
            source,
            snapshot_times,
            output_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        match self.dimension {
            1 => {
                if self.n < 2 {
                    return Err(cfg_err("1D runs require `n` of at least 2".into()));
                }
                if !(self.b > self.a) {
                    return Err(cfg_err("`a` must lie left of `b`".into()));
                }
                if self.subdomains == 0 {
                    return Err(cfg_err("`subdomains` must be at least 1".into()));
                }
                if self.geometry.is_some() {
                    return Err(cfg_err("`geometry` is a 2D key".into()));
                }
                if !matches!(self.ic, IcKind::Gaussian | IcKind::Zero) {
                    return Err(cfg_err("1D runs take `ic = gaussian` or `zero`".into()));
                }
            }
            _ => {
                let geom = self
                    .geometry
                    .ok_or_else(|| cfg_err("2D runs require `geometry`".into()))?;
                if !(self.dx > 0.0 && self.dy > 0.0) {
                    return Err(cfg_err("2D runs require positive `dx` (and `dy`)".into()));
                }
                if matches!(self.bc, BcKind::Periodic | BcKind::Outflow)
                    && matches!(geom, GeomKind::Rectangle)
                {
                    return Err(cfg_err(
                        "rectangle walls support `bc = dirichlet` or `neumann`".into(),
                    ));
                }
                if matches!(self.source, SourceKind::SlitPlane)
                    && !matches!(geom, GeomKind::Slit)
                {
                    return Err(cfg_err("`source = slit_plane` needs `geometry = slit`".into()));
                }
            }
        }
        Ok(())
    }

    /// Time step for a given largest cell width.
    pub fn resolve_dt(&self, max_width: f64) -> f64 {
        match self.dt {
            Some(d) => d,
            None => self.cfl * max_width / self.c,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_1d_config() {
        let cfg = RunConfig::from_str(
            "# pulse bouncing between pinned ends\n\
             dimension = 1\n\
             mesh = composite\n\
             n = 20\n\
             ic = gaussian\n\
             bc = dirichlet\n\
             cfl = 0.1  # trailing comment\n\
             t_final = 2.0\n",
        )
        .unwrap();
        assert_eq!(cfg.dimension, 1);
        assert_eq!(cfg.mesh, MeshKind::Composite);
        assert_eq!(cfg.n, 20);
        assert_eq!(cfg.beta, 2.0);
        assert_eq!(cfg.cfl, 0.1);
        assert_eq!(cfg.subdomains, 1);
        assert!(cfg.dt.is_none());
        assert!((cfg.resolve_dt(0.05) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn parses_a_2d_config_with_snapshots() {
        let cfg = RunConfig::from_str(
            "dimension = 2\n\
             geometry = slit\n\
             ic = zero\n\
             source = slit_plane\n\
             dx = 0.005\n\
             t_final = 2.01\n\
             cfl = 2\n\
             snapshot_times = 1.01, 0.31, 0.51\n\
             output_dir = results\n",
        )
        .unwrap();
        assert_eq!(cfg.geometry, Some(GeomKind::Slit));
        assert_eq!(cfg.dy, 0.005);
        assert_eq!(cfg.snapshot_times, vec![0.31, 0.51, 1.01]);
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
    }

    #[test]
    fn explicit_dt_overrides_the_cfl_rule() {
        let cfg = RunConfig::from_str(
            "dimension = 2\n\
             geometry = double_circle\n\
             ic = double_circle_bump\n\
             r = 0.3\n\
             dx = 0.007\n\
             dy = 0.0043333333333333335\n\
             dt = 0.008666666666666667\n\
             t_final = 0.29\n",
        )
        .unwrap();
        assert_eq!(cfg.resolve_dt(123.0), 0.008666666666666667);
    }

    #[test]
    fn rejects_unknown_and_malformed_keys() {
        assert!(RunConfig::from_str("dimension = 1\nic = gaussian\nn = 8\nt_final = 1\nwhat = 3\n").is_err());
        assert!(RunConfig::from_str("dimension\n").is_err());
        assert!(RunConfig::from_str("dimension = 3\n").is_err());
        assert!(RunConfig::from_str("dimension = 1\nic = gaussian\nn = 8\nt_final = 1\nn = 9\n").is_err());
        assert!(RunConfig::from_str("dimension = 1\nic = gaussian\nn = 8\n").is_err());
        assert!(RunConfig::from_str("dimension = 2\nic = zero\ndx = 0.1\nt_final = 1\n").is_err());
        assert!(
            RunConfig::from_str("dimension = 1\nic = cavity_dirichlet\nn = 8\nt_final = 1\n")
                .is_err()
        );
    }

    #[test]
    fn beta_gate_matches_the_stability_interval() {
        let base = "dimension = 1\nic = gaussian\nn = 8\nt_final = 1\n";
        assert!(RunConfig::from_str(&format!("{base}beta = 2.0\n")).is_ok());
        assert!(RunConfig::from_str(&format!("{base}beta = 2.5\n")).is_err());
        assert!(RunConfig::from_str(&format!("{base}beta = 0\n")).is_err());
    }
}
