//! Experiment configuration: a flat `key = value` text file.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so typos surface immediately.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::overhead::OverheadSpec;
use crate::basis::BasisSource;
use crate::channel::{ArrayGeometry, ScenarioConfig};
use crate::codebook::{QuantScheme, QuantizerSpec, Type1Params};
use crate::feedback::{Estimation, Grouping, TargetSource};
use crate::solvers::SolverOptions;
use crate::{Result, SenseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Type1Baseline,
    MmUnconstrained,
    PdEvd,
    PdEvdMecs,
    MecsSgda,
    /// Carrier-by-carrier MM on per-carrier flat problems.
    CbycMmUnconstrained,
    /// Carrier-by-carrier MECS-SGDA on per-carrier flat problems.
    CbycMecsSgda,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Type1Baseline,
        Algorithm::MmUnconstrained,
        Algorithm::PdEvd,
        Algorithm::PdEvdMecs,
        Algorithm::MecsSgda,
        Algorithm::CbycMmUnconstrained,
        Algorithm::CbycMecsSgda,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Type1Baseline => "type1_baseline",
            Algorithm::MmUnconstrained => "mm_unconstrained",
            Algorithm::PdEvd => "pd_evd",
            Algorithm::PdEvdMecs => "pd_evd_mecs",
            Algorithm::MecsSgda => "mecs_sgda",
            Algorithm::CbycMmUnconstrained => "cbyc_mm_unconstrained",
            Algorithm::CbycMecsSgda => "cbyc_mecs_sgda",
        }
    }

    pub fn is_carrier_by_carrier(&self) -> bool {
        matches!(self, Algorithm::CbycMmUnconstrained | Algorithm::CbycMecsSgda)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = SenseError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                SenseError::Config(format!("unknown algorithm `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PrecoderKind {
    Hybrid,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    /// Externally generated CSI; trial `i` targets user `i mod nUE`.
    pub dataset: Option<PathBuf>,
    pub codebook: Type1Params,
    pub basis: BasisSource,
    /// Flat basis dimension `L`.
    pub basis_dim: usize,
    /// Multi-carrier spatial dimension `L̃`.
    pub spatial_dim: usize,
    /// Multi-carrier delay taps `ñ_L`.
    pub delay_taps: usize,
    pub t_values: Vec<usize>,
    /// Precoder draws per trial.
    pub draws: usize,
    pub algorithms: Vec<Algorithm>,
    pub quantizer: Option<QuantizerSpec>,
    pub estimation: Estimation,
    pub targets: TargetSource,
    pub precoder: PrecoderKind,
    pub sigma_w: f64,
    pub grouping: Grouping,
    pub trials: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub solver: SolverOptions,
    pub overhead: OverheadSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            dataset: None,
            codebook: Type1Params { n1: 8, n2: 2, o1: 4, o2: 4 },
            basis: BasisSource::RuCsi,
            basis_dim: 5,
            spatial_dim: 5,
            delay_taps: 5,
            t_values: vec![1, 2, 3, 4],
            draws: 10,
            algorithms: vec![Algorithm::Type1Baseline, Algorithm::MmUnconstrained, Algorithm::MecsSgda],
            quantizer: Some(QuantizerSpec::four_bit(QuantScheme::Db)),
            estimation: Estimation::Exact,
            targets: TargetSource::Reported,
            precoder: PrecoderKind::Hybrid,
            sigma_w: 1.0,
            grouping: Grouping::PerCarrier,
            trials: 50,
            seed: 1,
            threads: None,
            solver: SolverOptions::default(),
            overhead: OverheadSpec::default(),
        }
    }
}

fn bad(line: usize, key: &str, value: &str, expect: &str) -> SenseError {
    SenseError::Config(format!("line {line}: `{key} = {value}` is invalid; expected {expect}"))
}

fn num<T: FromStr>(line: usize, key: &str, value: &str, expect: &str) -> Result<T> {
    value.parse().map_err(|_| bad(line, key, value, expect))
}

fn flag(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(line, key, value, "true or false")),
    }
}

fn list<T: FromStr>(line: usize, key: &str, value: &str, expect: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(line, key, s, expect))
        .collect()
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| SenseError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        // Relative dataset paths are resolved against the config file.
        if let (Some(ds), Some(dir)) = (&cfg.dataset, path.parent()) {
            if ds.is_relative() {
                cfg.dataset = Some(dir.join(ds));
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let mut codebook_set = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| SenseError::Config(format!("line {line}: expected `key = value`, got `{content}`")))?;
            let s = &mut c.scenario;
            match key {
                "seed" => c.seed = num(line, key, value, "an unsigned integer")?,
                "trials" => c.trials = num(line, key, value, "a positive integer")?,
                "draws" => c.draws = num(line, key, value, "a positive integer")?,
                "threads" => c.threads = Some(num(line, key, value, "a positive integer")?),
                "t_values" => c.t_values = list(line, key, value, "comma-separated round counts")?,
                "algorithms" => {
                    c.algorithms = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(Algorithm::from_str)
                        .collect::<Result<_>>()?
                }
                "quantizer" => {
                    c.quantizer = match value {
                        "none" => None,
                        v => Some(v.parse()?),
                    }
                }
                "estimation" => {
                    c.estimation = match value {
                        "exact" => Estimation::Exact,
                        v => match v.strip_prefix("snr:") {
                            Some(db) => Estimation::SnrDb(num(line, key, db, "`exact` or `snr:<dB>`")?),
                            None => return Err(bad(line, key, value, "`exact` or `snr:<dB>`")),
                        },
                    }
                }
                "targets" => {
                    c.targets = match value {
                        "reported" => TargetSource::Reported,
                        "raw" => TargetSource::Raw,
                        _ => return Err(bad(line, key, value, "`reported` or `raw`")),
                    }
                }
                "precoder" => {
                    c.precoder = match value {
                        "hybrid" => PrecoderKind::Hybrid,
                        "gaussian" => PrecoderKind::Gaussian,
                        _ => return Err(bad(line, key, value, "`hybrid` or `gaussian`")),
                    }
                }
                "sigma_w" => c.sigma_w = num(line, key, value, "a positive number")?,
                "basis" => c.basis = value.parse()?,
                "basis_dim" => c.basis_dim = num(line, key, value, "a positive integer")?,
                "spatial_dim" => c.spatial_dim = num(line, key, value, "a positive integer")?,
                "delay_taps" => c.delay_taps = num(line, key, value, "a positive integer")?,
                "grouping" => {
                    c.grouping = match value {
                        "per_carrier" => Grouping::PerCarrier,
                        v => match v.strip_prefix("group:") {
                            Some(n) => Grouping::Groups(num(line, key, n, "`per_carrier` or `group:<n>`")?),
                            None => return Err(bad(line, key, value, "`per_carrier` or `group:<n>`")),
                        },
                    }
                }
                "codebook" => {
                    let v: Vec<usize> = list(line, key, value, "N1,N2,O1,O2")?;
                    if v.len() != 4 {
                        return Err(bad(line, key, value, "N1,N2,O1,O2"));
                    }
                    c.codebook = Type1Params { n1: v[0], n2: v[1], o1: v[2], o2: v[3] };
                    codebook_set = true;
                }
                "dataset" => c.dataset = Some(PathBuf::from(value)),
                "array_h" => s.geometry.n_horizontal = num(line, key, value, "a positive integer")?,
                "array_v" => s.geometry.n_vertical = num(line, key, value, "a positive integer")?,
                "dual_polarized" => s.geometry.dual_polarized = flag(line, key, value)?,
                "spacing_h" => s.geometry.spacing_h = num(line, key, value, "spacing in wavelengths")?,
                "spacing_v" => s.geometry.spacing_v = num(line, key, value, "spacing in wavelengths")?,
                "area_size" => s.area_size = num(line, key, value, "meters")?,
                "n_ru" => s.n_ru = num(line, key, value, "a count")?,
                "ru_pool" => s.ru_pool = num(line, key, value, "a count")?,
                "n_paths" => s.n_paths = num(line, key, value, "a positive integer")?,
                "n_dominant" => s.n_dominant = num(line, key, value, "a count")?,
                "weak_path_power" => s.weak_path_power = num(line, key, value, "a nonnegative number")?,
                "jitter_per_meter" => s.jitter_per_meter = num(line, key, value, "radians per meter")?,
                "n_carriers" => s.n_carriers = num(line, key, value, "a positive integer")?,
                "bandwidth" => s.bandwidth = num(line, key, value, "Hz")?,
                "delay_spread_taps" => s.delay_spread_taps = num(line, key, value, "taps")?,
                "normalize" => s.normalize = flag(line, key, value)?,
                "type2_beams" => {
                    s.type2_beams = match value {
                        "none" => None,
                        v => Some(num(line, key, v, "a beam count or `none`")?),
                    }
                }
                "type2_quantized" => s.type2_quantized = flag(line, key, value)?,
                "inner_tol" => c.solver.inner_tol = num(line, key, value, "a positive number")?,
                "inner_max_iters" => c.solver.inner_max_iters = num(line, key, value, "a positive integer")?,
                "outer_max_iters" => c.solver.outer_max_iters = num(line, key, value, "a positive integer")?,
                "dual_step" => c.solver.dual_step = Some(num(line, key, value, "a positive number")?),
                "sgda_p" => c.solver.sgda.p = Some(num(line, key, value, "a positive number")?),
                "sgda_s1" => c.solver.sgda.s1 = Some(num(line, key, value, "a positive number")?),
                "sgda_s2" => c.solver.sgda.s2 = num(line, key, value, "a positive number")?,
                "sgda_beta" => c.solver.sgda.beta_avg = num(line, key, value, "a number in (0, 1]")?,
                "sgda_max_iters" => c.solver.sgda.max_iters = num(line, key, value, "a positive integer")?,
                "overhead_carriers" => c.overhead.n_carriers = num(line, key, value, "a positive integer")?,
                "overhead_pmi_group" => c.overhead.pmi_group = num(line, key, value, "a positive integer")?,
                "overhead_cqi_group" => c.overhead.cqi_group = num(line, key, value, "a positive integer")?,
                "overhead_pmi_bits" => c.overhead.pmi_bits = num(line, key, value, "bits")?,
                "overhead_cqi_bits" => c.overhead.cqi_bits = num(line, key, value, "bits")?,
                "overhead_rounds" => c.overhead.rounds = num(line, key, value, "a positive integer")?,
                "type2_wideband_bits" => c.overhead.type2_wideband_bits = num(line, key, value, "bits")?,
                "type2_subband_bits" => c.overhead.type2_subband_bits = num(line, key, value, "bits")?,
                "type2_subband_size" => c.overhead.type2_subband_size = num(line, key, value, "carriers")?,
                other => return Err(SenseError::Config(format!("line {line}: unknown key `{other}`"))),
            }
        }
        if !codebook_set {
            let g = &c.scenario.geometry;
            c.codebook = Type1Params { n1: g.n_horizontal, n2: g.n_vertical, o1: 4, o2: 4 };
        }
        c.validate()?;
        Ok(c)
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.scenario.geometry
    }

    pub fn multicarrier(&self) -> bool {
        self.scenario.n_carriers > 1
    }

    pub fn max_rounds(&self) -> usize {
        self.t_values.iter().copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: &str| Err(SenseError::Config(m.to_string()));
        if self.t_values.is_empty() || self.t_values.contains(&0) {
            return cfg("t_values must list at least one positive round count");
        }
        if self.algorithms.is_empty() {
            return cfg("algorithms must list at least one algorithm");
        }
        if self.trials == 0 || self.draws == 0 {
            return cfg("trials and draws must be at least 1");
        }
        if !(self.sigma_w > 0.0) {
            return cfg("sigma_w must be positive");
        }
        if self.threads == Some(0) {
            return cfg("threads must be at least 1");
        }
        self.solver.validate()?;
        if let Some(q) = &self.quantizer {
            q.validate().map_err(|e| SenseError::Config(e.to_string()))?;
        }
        if self.dataset.is_none() {
            let needs_rus = !matches!(self.basis, BasisSource::Identity | BasisSource::TuPaths);
            let mut sc = self.scenario.clone();
            sc.require_rus = needs_rus;
            sc.validate()?;
            if self.basis == BasisSource::RuType2 && sc.type2_beams.is_none() {
                return cfg("basis = ru_type2 needs type2_beams");
            }
        }
        let ports = self.codebook.ports();
        let m = self.geometry().ports();
        if self.dataset.is_none() && ports > m {
            return Err(SenseError::Config(format!(
                "codebook has {ports} ports but the array only has {m} antennas"
            )));
        }
        if self.multicarrier() {
            if self.delay_taps == 0 || self.delay_taps > self.scenario.n_carriers {
                return cfg("delay_taps must be in 1..=n_carriers");
            }
            if let Grouping::Groups(n) = self.grouping {
                if n == 0 || self.scenario.n_carriers % n != 0 {
                    return cfg("grouping size must divide n_carriers");
                }
                if self.algorithms.iter().any(Algorithm::is_carrier_by_carrier) {
                    return cfg("carrier-by-carrier algorithms need grouping = per_carrier");
                }
            }
        } else if self.algorithms.iter().any(Algorithm::is_carrier_by_carrier) {
            return cfg("carrier-by-carrier algorithms need n_carriers > 1");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "
            # sweep
            seed = 7
            trials = 3
            draws = 2
            t_values = 1, 2,4
            algorithms = type1_baseline, mm_unconstrained, mecs_sgda
            quantizer = linear:4:3.35:28.89
            estimation = snr:5
            array_h = 4
            array_v = 2
            basis_dim = 3
            n_paths = 8   # trailing comment
        ";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.t_values, vec![1, 2, 4]);
        assert_eq!(c.algorithms.len(), 3);
        assert_eq!(c.estimation, Estimation::SnrDb(5.0));
        assert_eq!(c.quantizer.unwrap().scheme, QuantScheme::Linear);
        assert_eq!(c.codebook, Type1Params { n1: 4, n2: 2, o1: 4, o2: 4 });
        assert_eq!(c.scenario.n_paths, 8);
    }

    #[test]
    fn rejects_bad_input_with_line_numbers() {
        let err = ExperimentConfig::parse("trials = 2\nbogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("bogus"), "{err}");
        let err = ExperimentConfig::parse("trials = many\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        assert!(ExperimentConfig::parse("t_values =\n").is_err());
        assert!(ExperimentConfig::parse("algorithms = magic\n").is_err());
        assert!(ExperimentConfig::parse("n_ru = 0\n").is_err());
        assert!(ExperimentConfig::parse("n_ru = 0\nbasis = identity\n").is_ok());
        assert!(ExperimentConfig::parse("algorithms = cbyc_mecs_sgda\n").is_err());
        assert!(ExperimentConfig::parse("no equals sign\n").is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
    }
}
