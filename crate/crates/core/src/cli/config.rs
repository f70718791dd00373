//! Scenario files: flat INI sections, `key = value`, units in key names.
//!
//! Unknown sections and keys are errors. `#` and `;` start comment lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::biphoton::ModeProfile;
use crate::cavity::CavityParams;
use crate::event_sim::ChopperConfig;

pub const CONFIG_DIR_ENV: &str = "HGPAIR_CONFIG_DIR";

const EMBEDDED: &[(&str, &str)] = &[
    ("fig2a", include_str!("../../scenarios/fig2a.ini")),
    ("fig2b", include_str!("../../scenarios/fig2b.ini")),
];

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("missing key `{key}` in [{section}]")]
    MissingKey { section: String, key: String },
    #[error("bad value `{value}` for `{key}` in [{section}]")]
    BadValue { section: String, key: String, value: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario `{0}` not found (file, ${CONFIG_DIR_ENV} or built-in)")]
    NotFound(String),
    #[error("reading {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str) -> Result<Sections, ConfigError> {
    let mut out: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let syntax = |msg: &str| ConfigError::Syntax { line: n + 1, msg: msg.to_string() };
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| syntax("unterminated section header"))?.trim();
            if out.contains_key(name) {
                return Err(syntax("duplicate section"));
            }
            out.insert(name.to_string(), BTreeMap::new());
            current = Some(name.to_string());
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
        let section = current.as_ref().ok_or_else(|| syntax("key outside any section"))?;
        let map = out.get_mut(section).expect("section inserted");
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(syntax("duplicate key"));
        }
    }
    Ok(out)
}

/// Consumes keys of one section; anything left over is rejected.
struct Section {
    name: String,
    keys: BTreeMap<String, String>,
}

impl Section {
    fn take(sections: &mut Sections, name: &str) -> Result<Self, ConfigError> {
        let keys = sections
            .remove(name)
            .ok_or_else(|| ConfigError::MissingKey { section: name.to_string(), key: "(section)".to_string() })?;
        Ok(Self { name: name.to_string(), keys })
    }

    fn raw(&mut self, key: &str) -> Result<String, ConfigError> {
        self.keys.remove(key).ok_or_else(|| ConfigError::MissingKey { section: self.name.clone(), key: key.to_string() })
    }

    fn get<T: FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        let value = self.raw(key)?;
        value.parse().map_err(|_| ConfigError::BadValue { section: self.name.clone(), key: key.to_string(), value })
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.keys.into_keys().next() {
            Some(key) => Err(ConfigError::UnknownKey { section: self.name, key }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// 45° petals, relative LG phase π/2.
    Diagonal,
    /// 0° petals, relative LG phase 0.
    Horizontal,
}

impl Orientation {
    pub fn theta_rel(self) -> f64 {
        match self {
            Orientation::Diagonal => std::f64::consts::FRAC_PI_2,
            Orientation::Horizontal => 0.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Orientation::Diagonal => "diagonal",
            Orientation::Horizontal => "horizontal",
        }
    }
}

impl FromStr for Orientation {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "diagonal" => Ok(Orientation::Diagonal),
            "horizontal" => Ok(Orientation::Horizontal),
            _ => Err(()),
        }
    }
}

fn parse_profile(s: &str) -> Option<ModeProfile> {
    match s {
        "uniform" => Some(ModeProfile::Uniform),
        "sinc_squared" => Some(ModeProfile::SincSquared),
        _ => None,
    }
}

fn profile_label(p: ModeProfile) -> &'static str {
    match p {
        ModeProfile::Uniform => "uniform",
        ModeProfile::SincSquared => "sinc_squared",
    }
}

/// Background rate per detector: fixed, or chosen so the detected data
/// reach `design_g2_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DarkRate {
    Auto,
    Fixed(f64),
}

impl FromStr for DarkRate {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        if s == "auto" {
            return Ok(DarkRate::Auto);
        }
        s.parse().map(DarkRate::Fixed).map_err(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiphotonSection {
    pub bandwidth_mhz: f64,
    pub phase_matching_bandwidth_ghz: f64,
    pub profile: ModeProfile,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSection {
    /// Pair rate summed over all longitudinal modes, gate open.
    pub pair_rate_hz: f64,
    pub efficiency_signal: f64,
    pub efficiency_idler: f64,
    pub design_g2_0: f64,
    pub pump_power_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSection {
    pub jitter_sigma_ps: f64,
    pub dead_time_ns: f64,
    pub dark_rate_hz: DarkRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub duration_s: f64,
    pub bin_ns: f64,
    pub range_ns: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Targets {
    pub bandwidth_mhz: f64,
    pub bandwidth_rel_tol: f64,
    pub fwhm_ns: f64,
    pub fwhm_rel_tol: f64,
    pub g2_0: f64,
    /// Allowed deviation of the central bin in statistical standard errors.
    pub g2_0_sigma_tol: f64,
    pub brightness_per_s_mhz_mw: f64,
    pub brightness_rel_tol: f64,
    pub require_nonclassical: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub orientation: Orientation,
    pub waist_mm: f64,
    pub cavity: CavityParams,
    pub biphoton: BiphotonSection,
    pub source: SourceSection,
    pub detectors: DetectorSection,
    pub chopper: ChopperConfig,
    pub run: RunSection,
    pub targets: Targets,
}

fn bad_value(section: &str, key: &str, value: String) -> ConfigError {
    ConfigError::BadValue { section: section.to_string(), key: key.to_string(), value }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut all = parse_sections(text)?;

        let mut s = Section::take(&mut all, "scenario")?;
        let name = s.raw("name")?;
        let orientation = s.get("orientation")?;
        let waist_mm = s.get("waist_mm")?;
        s.finish()?;

        let mut s = Section::take(&mut all, "cavity")?;
        let cavity = CavityParams {
            optical_path_mm: s.get("optical_path_mm")?,
            output_transmission: s.get("output_transmission")?,
            input_transmission: s.get("input_transmission")?,
            residual_loss: s.get("residual_loss")?,
            mirror_roc_mm: s.get("mirror_roc_mm")?,
            crystal_length_mm: s.get("crystal_length_mm")?,
            crystal_index: s.get("crystal_index")?,
        };
        s.finish()?;

        let mut s = Section::take(&mut all, "biphoton")?;
        let bandwidth_mhz = s.get("bandwidth_mhz")?;
        let phase_matching_bandwidth_ghz = s.get("phase_matching_bandwidth_ghz")?;
        let raw = s.raw("profile")?;
        let profile = parse_profile(&raw).ok_or_else(|| bad_value("biphoton", "profile", raw))?;
        s.finish()?;
        let biphoton = BiphotonSection { bandwidth_mhz, phase_matching_bandwidth_ghz, profile };

        let mut s = Section::take(&mut all, "source")?;
        let source = SourceSection {
            pair_rate_hz: s.get("pair_rate_hz")?,
            efficiency_signal: s.get("efficiency_signal")?,
            efficiency_idler: s.get("efficiency_idler")?,
            design_g2_0: s.get("design_g2_0")?,
            pump_power_mw: s.get("pump_power_mw")?,
        };
        s.finish()?;

        let mut s = Section::take(&mut all, "detectors")?;
        let detectors = DetectorSection {
            jitter_sigma_ps: s.get("jitter_sigma_ps")?,
            dead_time_ns: s.get("dead_time_ns")?,
            dark_rate_hz: s.get("dark_rate_hz")?,
        };
        s.finish()?;

        let mut s = Section::take(&mut all, "chopper")?;
        let chopper = ChopperConfig { period_ms: s.get("period_ms")?, duty: s.get("duty")? };
        s.finish()?;

        let mut s = Section::take(&mut all, "run")?;
        let run = RunSection {
            duration_s: s.get("duration_s")?,
            bin_ns: s.get("bin_ns")?,
            range_ns: s.get("range_ns")?,
            seed: s.get("seed")?,
            output_dir: PathBuf::from(s.raw("output_dir")?),
        };
        s.finish()?;

        let mut s = Section::take(&mut all, "targets")?;
        let targets = Targets {
            bandwidth_mhz: s.get("bandwidth_mhz")?,
            bandwidth_rel_tol: s.get("bandwidth_rel_tol")?,
            fwhm_ns: s.get("fwhm_ns")?,
            fwhm_rel_tol: s.get("fwhm_rel_tol")?,
            g2_0: s.get("g2_0")?,
            g2_0_sigma_tol: s.get("g2_0_sigma_tol")?,
            brightness_per_s_mhz_mw: s.get("brightness_per_s_mhz_mw")?,
            brightness_rel_tol: s.get("brightness_rel_tol")?,
            require_nonclassical: s.get("require_nonclassical")?,
        };
        s.finish()?;

        if let Some(extra) = all.into_keys().next() {
            return Err(ConfigError::UnknownSection(extra));
        }
        let cfg = Self { name, orientation, waist_mm, cavity, biphoton, source, detectors, chopper, run, targets };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        if self.name.is_empty() || self.name.contains(char::is_whitespace) {
            return Err(ConfigError::Invalid(format!("scenario name `{}`", self.name)));
        }
        if !(self.waist_mm > 0.0) {
            return Err(ConfigError::Invalid(format!("waist_mm = {}", self.waist_mm)));
        }
        self.cavity.validate().map_err(|e| invalid(&e))?;
        self.chopper.validate().map_err(|e| invalid(&e))?;
        let positive = [
            ("bandwidth_mhz", self.biphoton.bandwidth_mhz),
            ("phase_matching_bandwidth_ghz", self.biphoton.phase_matching_bandwidth_ghz),
            ("pair_rate_hz", self.source.pair_rate_hz),
            ("pump_power_mw", self.source.pump_power_mw),
            ("duration_s", self.run.duration_s),
            ("bin_ns", self.run.bin_ns),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(ConfigError::Invalid(format!("{k} = {v}")));
        }
        for (k, v) in [("efficiency_signal", self.source.efficiency_signal), ("efficiency_idler", self.source.efficiency_idler)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ConfigError::Invalid(format!("{k} = {v}")));
            }
        }
        if !(self.source.design_g2_0 > 1.0) {
            return Err(ConfigError::Invalid(format!("design_g2_0 = {}", self.source.design_g2_0)));
        }
        if self.detectors.jitter_sigma_ps < 0.0 || self.detectors.dead_time_ns < 0.0 {
            return Err(ConfigError::Invalid("negative detector timing".into()));
        }
        if let DarkRate::Fixed(d) = self.detectors.dark_rate_hz {
            if !(d >= 0.0) {
                return Err(ConfigError::Invalid(format!("dark_rate_hz = {d}")));
            }
        }
        if !(self.run.range_ns >= 10.0 * self.run.bin_ns) {
            return Err(ConfigError::Invalid(format!("range_ns = {} below 10 bins", self.run.range_ns)));
        }
        Ok(())
    }

    /// Canonical text form; parsing it yields `self` again.
    pub fn to_ini(&self) -> String {
        let mut o = String::new();
        let c = &self.cavity;
        let b = &self.biphoton;
        let s = &self.source;
        let d = &self.detectors;
        let r = &self.run;
        let t = &self.targets;
        let dark = match d.dark_rate_hz {
            DarkRate::Auto => "auto".to_string(),
            DarkRate::Fixed(v) => format!("{v:?}"),
        };
        // `{:?}` keeps a decimal point and round-trips exactly
        let _ = write!(
            o,
            "[scenario]\nname = {}\norientation = {}\nwaist_mm = {:?}\n\n\
             [cavity]\noptical_path_mm = {:?}\noutput_transmission = {:?}\ninput_transmission = {:?}\nresidual_loss = {:?}\n\
             mirror_roc_mm = {:?}\ncrystal_length_mm = {:?}\ncrystal_index = {:?}\n\n\
             [biphoton]\nbandwidth_mhz = {:?}\nphase_matching_bandwidth_ghz = {:?}\nprofile = {}\n\n\
             [source]\npair_rate_hz = {:?}\nefficiency_signal = {:?}\nefficiency_idler = {:?}\ndesign_g2_0 = {:?}\npump_power_mw = {:?}\n\n\
             [detectors]\njitter_sigma_ps = {:?}\ndead_time_ns = {:?}\ndark_rate_hz = {}\n\n\
             [chopper]\nperiod_ms = {:?}\nduty = {:?}\n\n\
             [run]\nduration_s = {:?}\nbin_ns = {:?}\nrange_ns = {:?}\nseed = {}\noutput_dir = {}\n\n\
             [targets]\nbandwidth_mhz = {:?}\nbandwidth_rel_tol = {:?}\nfwhm_ns = {:?}\nfwhm_rel_tol = {:?}\ng2_0 = {:?}\n\
             g2_0_sigma_tol = {:?}\nbrightness_per_s_mhz_mw = {:?}\nbrightness_rel_tol = {:?}\nrequire_nonclassical = {}\n",
            self.name,
            self.orientation.label(),
            self.waist_mm,
            c.optical_path_mm,
            c.output_transmission,
            c.input_transmission,
            c.residual_loss,
            c.mirror_roc_mm,
            c.crystal_length_mm,
            c.crystal_index,
            b.bandwidth_mhz,
            b.phase_matching_bandwidth_ghz,
            profile_label(b.profile),
            s.pair_rate_hz,
            s.efficiency_signal,
            s.efficiency_idler,
            s.design_g2_0,
            s.pump_power_mw,
            d.jitter_sigma_ps,
            d.dead_time_ns,
            dark,
            self.chopper.period_ms,
            self.chopper.duty,
            r.duration_s,
            r.bin_ns,
            r.range_ns,
            r.seed,
            r.output_dir.display(),
            t.bandwidth_mhz,
            t.bandwidth_rel_tol,
            t.fwhm_ns,
            t.fwhm_rel_tol,
            t.g2_0,
            t.g2_0_sigma_tol,
            t.brightness_per_s_mhz_mw,
            t.brightness_rel_tol,
            t.require_nonclassical,
        );
        o
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), msg: e.to_string() })?;
        Self::parse(&text)
    }

    /// Resolves `name` as a file path, then `<$HGPAIR_CONFIG_DIR>/<name>.ini`,
    /// then a built-in scenario.
    pub fn load(name: &str) -> Result<Self, ConfigError> {
        let direct = Path::new(name);
        if direct.is_file() {
            return Self::from_file(direct);
        }
        if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
            let candidate = Path::new(&dir).join(format!("{name}.ini"));
            if candidate.is_file() {
                return Self::from_file(&candidate);
            }
        }
        match builtin_text(name) {
            Some(text) => Self::parse(text),
            None => Err(ConfigError::NotFound(name.to_string())),
        }
    }
}

pub fn builtin_text(name: &str) -> Option<&'static str> {
    EMBEDDED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    EMBEDDED.iter().map(|(n, _)| *n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse_and_roundtrip() {
        for name in builtin_names() {
            let cfg = ScenarioConfig::parse(builtin_text(name).unwrap()).unwrap();
            assert_eq!(cfg.name, name);
            let again = ScenarioConfig::parse(&cfg.to_ini()).unwrap();
            assert_eq!(again, cfg);
            assert_eq!(again.to_ini(), cfg.to_ini());
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = builtin_text("fig2a").unwrap().replace("[chopper]", "[chopper]\nphase_deg = 3");
        assert_eq!(
            ScenarioConfig::parse(&text),
            Err(ConfigError::UnknownKey { section: "chopper".into(), key: "phase_deg".into() })
        );
    }

    #[test]
    fn unknown_section_rejected() {
        let text = format!("{}\n[extras]\nx = 1\n", builtin_text("fig2a").unwrap());
        assert_eq!(ScenarioConfig::parse(&text), Err(ConfigError::UnknownSection("extras".into())));
    }

    #[test]
    fn missing_and_bad_values() {
        let text = builtin_text("fig2b").unwrap().replace("duty = 0.5", "");
        assert!(matches!(ScenarioConfig::parse(&text), Err(ConfigError::MissingKey { .. })));
        let text = builtin_text("fig2b").unwrap().replace("duty = 0.5", "duty = half");
        assert!(matches!(ScenarioConfig::parse(&text), Err(ConfigError::BadValue { .. })));
        let text = builtin_text("fig2b").unwrap().replace("duty = 0.5", "duty = 1.5");
        assert!(matches!(ScenarioConfig::parse(&text), Err(ConfigError::Invalid(_))));
        assert!(matches!(parse_sections("k = v"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_sections("[a]\nk = 1\nk = 2"), Err(ConfigError::Syntax { line: 3, .. })));
    }

    #[test]
    fn orientation_labels() {
        assert_eq!("diagonal".parse::<Orientation>(), Ok(Orientation::Diagonal));
        assert_eq!(Orientation::Horizontal.theta_rel(), 0.0);
        assert!("vertical".parse::<Orientation>().is_err());
    }
}
