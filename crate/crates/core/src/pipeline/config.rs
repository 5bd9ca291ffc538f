//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. A `preset = desk|full`
//! line resets all keys to that preset before later keys are applied.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::coupling::{CouplingMode, LbfgsSettings, TransientSettings};
use crate::rom::BasisSizes;
use crate::solvers::Parameter;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub h: f64,
    pub x_gamma: f64,
    pub u_bar_min: f64,
    pub u_bar_max: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub training_size: usize,
    pub seed: u64,
    pub dt: f64,
    pub t_final: f64,
    pub modes: BasisSizes,
    pub mode: CouplingMode,
    pub test: Parameter,
    pub out: PathBuf,
    pub lbfgs: LbfgsSettings,
    pub warm_start: bool,
    pub workers: usize,
}

impl RunConfig {
    /// Desk scale: h = 0.5 (about 3.2k monolithic DoFs), 8 training
    /// parameters and 20 steps.
    pub fn desk() -> Self {
        Self {
            preset: "desk".into(),
            h: 0.5,
            x_gamma: 9.0,
            u_bar_min: 0.5,
            u_bar_max: 4.5,
            nu_min: 0.4,
            nu_max: 2.0,
            training_size: 8,
            seed: 2024,
            dt: 0.01,
            t_final: 0.2,
            modes: BasisSizes { u1: 30, u2: 12, p1: 5, p2: 5, g: 10 },
            mode: CouplingMode::Fff,
            test: Parameter::new(4.5, 0.4),
            out: PathBuf::from("out"),
            lbfgs: LbfgsSettings::default(),
            warm_start: true,
            workers: 1,
        }
    }

    /// Full scale: h = 1/6 (about 28.7k monolithic DoFs), 64 training
    /// parameters, 100 steps.
    pub fn full() -> Self {
        Self { preset: "full".into(), h: 1.0 / 6.0, training_size: 64, t_final: 1.0, ..Self::desk() }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            _ => Err(Error::Config(format!("unknown preset '{name}' (expected desk or full)"))),
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn transient(&self) -> TransientSettings {
        TransientSettings { steps: self.steps(), lbfgs: self.lbfgs, warm_start: self.warm_start, evaluate_zero_control: true }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::desk();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(k.trim(), v.trim()).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets one key; values accept plain numbers and fractions like `1/6`.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num(v: &str) -> std::result::Result<f64, String> {
            let parsed = match v.split_once('/') {
                Some((a, b)) => a.trim().parse::<f64>().ok().zip(b.trim().parse::<f64>().ok()).map(|(a, b)| a / b),
                None => v.parse::<f64>().ok(),
            };
            parsed.filter(|x| x.is_finite()).ok_or_else(|| format!("'{v}' is not a number"))
        }
        fn int<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse::<T>().map_err(|_| format!("'{v}' is not a non-negative integer"))
        }
        match key {
            "preset" => *self = Self::preset(value).map_err(|e| e.to_string())?,
            "h" => self.h = num(value)?,
            "x_gamma" => self.x_gamma = num(value)?,
            "u_bar_min" => self.u_bar_min = num(value)?,
            "u_bar_max" => self.u_bar_max = num(value)?,
            "nu_min" => self.nu_min = num(value)?,
            "nu_max" => self.nu_max = num(value)?,
            "training_size" => self.training_size = int(value)?,
            "seed" => self.seed = int(value)?,
            "dt" => self.dt = num(value)?,
            "t_final" => self.t_final = num(value)?,
            "modes_u1" => self.modes.u1 = int(value)?,
            "modes_u2" => self.modes.u2 = int(value)?,
            "modes_p1" => self.modes.p1 = int(value)?,
            "modes_p2" => self.modes.p2 = int(value)?,
            "modes_g" => self.modes.g = int(value)?,
            "mode" => self.mode = value.parse().map_err(|e: Error| e.to_string())?,
            "test_u_bar" => self.test.u_bar = num(value)?,
            "test_nu" => self.test.nu = num(value)?,
            "out" => self.out = PathBuf::from(value),
            "gtol" => self.lbfgs.gtol = num(value)?,
            "ftol" => self.lbfgs.ftol = num(value)?,
            "max_iterations" => self.lbfgs.max_iterations = int(value)?,
            "memory" => self.lbfgs.memory = int(value)?,
            "c1" => self.lbfgs.c1 = num(value)?,
            "c2" => self.lbfgs.c2 = num(value)?,
            "max_line_search" => self.lbfgs.max_line_search = int(value)?,
            "warm_start" => {
                self.warm_start = value.parse().map_err(|_| format!("'{value}' is not true or false"))?
            }
            "workers" => self.workers = int(value)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.h > 0.0) {
            return fail(format!("h = {} must be positive", self.h));
        }
        if !(self.u_bar_min <= self.u_bar_max && self.nu_min <= self.nu_max && self.nu_min > 0.0) {
            return fail("parameter box is empty or has non-positive viscosity".into());
        }
        if !(self.dt > 0.0) {
            return fail(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_final >= self.dt) {
            return fail(format!("t_final = {} must be at least dt", self.t_final));
        }
        let m = &self.modes;
        if [m.u1, m.u2, m.p1, m.p2, m.g].contains(&0) {
            return fail("mode counts must be positive".into());
        }
        if self.training_size == 0 {
            return fail("training_size must be positive".into());
        }
        if !(self.test.nu > 0.0) {
            return fail("test viscosity must be positive".into());
        }
        let l = &self.lbfgs;
        if l.memory == 0 || l.max_line_search == 0 || !(0.0 < l.c1 && l.c1 < l.c2 && l.c2 < 1.0) {
            return fail("optimiser needs memory ≥ 1, max_line_search ≥ 1 and 0 < c1 < c2 < 1".into());
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` reproduces the configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let m = &self.modes;
        let l = &self.lbfgs;
        let _ = writeln!(s, "preset = {}", self.preset);
        for (k, v) in [
            ("h", format!("{:?}", self.h)),
            ("x_gamma", format!("{:?}", self.x_gamma)),
            ("u_bar_min", format!("{:?}", self.u_bar_min)),
            ("u_bar_max", format!("{:?}", self.u_bar_max)),
            ("nu_min", format!("{:?}", self.nu_min)),
            ("nu_max", format!("{:?}", self.nu_max)),
            ("training_size", self.training_size.to_string()),
            ("seed", self.seed.to_string()),
            ("dt", format!("{:?}", self.dt)),
            ("t_final", format!("{:?}", self.t_final)),
            ("modes_u1", m.u1.to_string()),
            ("modes_u2", m.u2.to_string()),
            ("modes_p1", m.p1.to_string()),
            ("modes_p2", m.p2.to_string()),
            ("modes_g", m.g.to_string()),
            ("mode", self.mode.to_string()),
            ("test_u_bar", format!("{:?}", self.test.u_bar)),
            ("test_nu", format!("{:?}", self.test.nu)),
            ("out", self.out.display().to_string()),
            ("gtol", format!("{:?}", l.gtol)),
            ("ftol", format!("{:?}", l.ftol)),
            ("max_iterations", l.max_iterations.to_string()),
            ("memory", l.memory.to_string()),
            ("c1", format!("{:?}", l.c1)),
            ("c2", format!("{:?}", l.c2)),
            ("max_line_search", l.max_line_search.to_string()),
            ("warm_start", self.warm_start.to_string()),
            ("workers", self.workers.to_string()),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    /// Keys that determine the offline artifacts.
    pub fn offline_key(&self) -> String {
        format!(
            "h={:?} x_gamma={:?} box=[{:?},{:?}]x[{:?},{:?}] training={} seed={} dt={:?} t_final={:?} modes={}/{}/{}/{}/{}",
            self.h,
            self.x_gamma,
            self.u_bar_min,
            self.u_bar_max,
            self.nu_min,
            self.nu_max,
            self.training_size,
            self.seed,
            self.dt,
            self.t_final,
            self.modes.u1,
            self.modes.u2,
            self.modes.p1,
            self.modes.p2,
            self.modes.g
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::full();
        c.mode = CouplingMode::Frr;
        c.seed = 99;
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap().to_text(), c.to_text());
    }

    #[test]
    fn presets_and_overrides() {
        let c = RunConfig::parse("preset = full\nseed = 5 # comment\nh = 1/6\n").unwrap();
        assert_eq!(c.preset, "full");
        assert_eq!(c.seed, 5);
        assert_eq!(c.steps(), 100);
        assert!((c.h - 1.0 / 6.0).abs() < 1e-16);
        assert_eq!(RunConfig::desk().steps(), 20);
    }

    #[test]
    fn invalid_configs_rejected() {
        for bad in [
            "dt = 0",
            "t_final = 0.001",
            "u_bar_min = 5",
            "modes_g = 0",
            "mode = XYZ",
            "colour = red",
            "h",
            "nu_min = -1",
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
