//! Study configuration and its flat `key = value` file format.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::forms::FormParams;
use crate::geometry::GeometryMode;
use crate::solver::CONDITION_SEED;

use super::examples::{example_by_id, Example};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometryArg {
    /// Isoparametric deformation of degree `k`.
    Ho,
    /// Polygonal zero set of the P1 level set.
    P1,
}

impl GeometryArg {
    pub fn mode(self) -> GeometryMode {
        match self {
            GeometryArg::Ho => GeometryMode::HighOrder,
            GeometryArg::P1 => GeometryMode::P1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GeometryArg::Ho => "ho",
            GeometryArg::P1 => "p1",
        }
    }
}

impl std::str::FromStr for GeometryArg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ho" => Ok(GeometryArg::Ho),
            "p1" => Ok(GeometryArg::P1),
            _ => Err(Error::Config(format!("geometry must be ho or p1, got {s:?}"))),
        }
    }
}

/// Everything a study needs. Defaults reproduce the reference setup:
/// Example 1, `k = 2`, `k_lambda = 1`, `h0 = 0.3`, levels 0 to 5,
/// `gamma_n = 40`, `gamma_gp = gamma_lambda = 0.1`.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub example: u32,
    pub k: usize,
    pub k_lambda: usize,
    pub h0: f64,
    pub min_level: usize,
    pub max_level: usize,
    pub gamma_n: f64,
    pub gamma_gp: f64,
    pub gamma_lambda: f64,
    pub geometry: GeometryArg,
    pub order_volume: Option<usize>,
    pub order_gp: Option<usize>,
    pub curl_sign: f64,
    pub condest: bool,
    pub cond_tol: f64,
    pub seed: u64,
    pub sweep_h: f64,
    pub sweep_steps: usize,
    pub out: Option<PathBuf>,
    pub vtk: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            example: 1,
            k: 2,
            k_lambda: 1,
            h0: 0.3,
            min_level: 0,
            max_level: 5,
            gamma_n: 40.0,
            gamma_gp: 0.1,
            gamma_lambda: 0.1,
            geometry: GeometryArg::Ho,
            order_volume: None,
            order_gp: None,
            curl_sign: -1.0,
            condest: false,
            cond_tol: 1e-6,
            seed: CONDITION_SEED,
            sweep_h: 0.1,
            sweep_steps: 100,
            out: None,
            vtk: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("cannot parse {key} = {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("cannot parse {key} = {v:?} as a boolean"))),
    }
}

impl StudyConfig {
    pub fn form_params(&self) -> FormParams {
        let mut p = FormParams::new(self.k);
        p.k_lambda = self.k_lambda;
        p.gamma_n = self.gamma_n;
        p.gamma_gp = self.gamma_gp;
        p.gamma_lambda = self.gamma_lambda;
        if let Some(o) = self.order_volume {
            p.order_volume = o;
        }
        if let Some(o) = self.order_gp {
            p.order_gp = o;
        }
        p.curl_sign = self.curl_sign;
        p
    }

    pub fn example(&self) -> Result<Box<dyn Example>> {
        example_by_id(self.example).ok_or_else(|| Error::Config(format!("unknown example {}", self.example)))
    }

    /// File stem of the study outputs.
    pub fn name(&self) -> String {
        format!("example{}_k{}_kl{}_{}", self.example, self.k, self.k_lambda, self.geometry.as_str())
    }

    pub fn validate(&self) -> Result<()> {
        self.form_params().validate()?;
        self.example()?;
        if !(self.h0 > 0.0) || !(self.sweep_h > 0.0) {
            return Err(Error::Config("mesh sizes must be positive".into()));
        }
        if self.min_level > self.max_level {
            return Err(Error::Config(format!("empty level range {}..={}", self.min_level, self.max_level)));
        }
        if self.sweep_steps == 0 {
            return Err(Error::Config("sweep needs at least one step".into()));
        }
        Ok(())
    }

    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "example" => self.example = parse(key, v)?,
            "k" => self.k = parse(key, v)?,
            "k_lambda" => self.k_lambda = parse(key, v)?,
            "h0" => self.h0 = parse(key, v)?,
            "min_level" => self.min_level = parse(key, v)?,
            "max_level" => self.max_level = parse(key, v)?,
            "levels" => {
                let (a, b) = v
                    .split_once("..")
                    .ok_or_else(|| Error::Config(format!("levels must look like 0..4, got {v:?}")))?;
                self.min_level = parse(key, a)?;
                self.max_level = parse(key, b.trim_start_matches('='))?;
            }
            "gamma_n" => self.gamma_n = parse(key, v)?,
            "gamma_gp" => self.gamma_gp = parse(key, v)?,
            "gamma_lambda" => self.gamma_lambda = parse(key, v)?,
            "geometry" | "geom" => self.geometry = v.parse()?,
            "order_volume" => self.order_volume = Some(parse(key, v)?),
            "order_gp" => self.order_gp = Some(parse(key, v)?),
            "curl_sign" => self.curl_sign = parse(key, v)?,
            "condest" => self.condest = parse_bool(key, v)?,
            "cond_tol" => self.cond_tol = parse(key, v)?,
            "seed" => {
                self.seed = match v.strip_prefix("0x") {
                    Some(hex) => u64::from_str_radix(hex, 16).map_err(|_| Error::Config(format!("bad seed {v:?}")))?,
                    None => parse(key, v)?,
                }
            }
            "sweep_h" => self.sweep_h = parse(key, v)?,
            "sweep_steps" => self.sweep_steps = parse(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "vtk" => self.vtk = parse_bool(key, v)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn from_str_with_defaults(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_str(text)?;
        Ok(c)
    }

    /// The resolved configuration in the file format (round-trips through [`Self::apply_str`]).
    pub fn to_key_values(&self) -> String {
        let p = self.form_params();
        let mut s = String::new();
        let _ = writeln!(s, "example = {}", self.example);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "k_lambda = {}", self.k_lambda);
        let _ = writeln!(s, "h0 = {}", self.h0);
        let _ = writeln!(s, "min_level = {}", self.min_level);
        let _ = writeln!(s, "max_level = {}", self.max_level);
        let _ = writeln!(s, "gamma_n = {}", self.gamma_n);
        let _ = writeln!(s, "gamma_gp = {}", self.gamma_gp);
        let _ = writeln!(s, "gamma_lambda = {}", self.gamma_lambda);
        let _ = writeln!(s, "geometry = {}", self.geometry.as_str());
        let _ = writeln!(s, "order_volume = {}", p.order_volume);
        let _ = writeln!(s, "order_gp = {}", p.order_gp);
        let _ = writeln!(s, "curl_sign = {}", self.curl_sign);
        let _ = writeln!(s, "condest = {}", self.condest);
        let _ = writeln!(s, "cond_tol = {}", self.cond_tol);
        let _ = writeln!(s, "seed = {:#x}", self.seed);
        let _ = writeln!(s, "sweep_h = {}", self.sweep_h);
        let _ = writeln!(s, "sweep_steps = {}", self.sweep_steps);
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {}", o.display());
        }
        let _ = writeln!(s, "vtk = {}", self.vtk);
        s
    }
}
