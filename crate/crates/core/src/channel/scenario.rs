//! Synthetic spatially consistent scenarios.
//!
//! A local area shares one scatterer set (angles, delays, powers). Each user
//! sees those paths with its own random phases, and with angles shifted by a
//! smooth linear function of its offset from the area centre:
//! `Δφ_ℓ = s · <x - c, e_ℓ>` for a per-path random unit direction `e_ℓ` and
//! jitter scale `s` in rad/m. Nearby users therefore share nearly the same
//! angular structure.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gen_flat_channel, gen_multicarrier_channel, ArrayGeometry, ChannelRealization, Path, PathSet};
use crate::codebook::{build_type2_surrogate, Type2Options};
use crate::linalg::rng_from_seed;
use crate::{CMatrix, Result, SenseError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub geometry: ArrayGeometry,
    /// Side length of the square area in metres.
    pub area_size: f64,
    pub area_center: [f64; 2],
    /// Number of reference users kept (the nearest ones to the target).
    pub n_ru: usize,
    /// Reference users dropped in the area before nearest-first selection.
    pub ru_pool: usize,
    /// Total number of paths `n_L`.
    pub n_paths: usize,
    /// Number of strong paths; the rest are scaled by `weak_path_power`.
    pub n_dominant: usize,
    pub weak_path_power: f64,
    /// Angle perturbation in radians per metre of offset from the centre.
    pub jitter_per_meter: f64,
    /// Subcarriers; 1 selects a flat-fading channel.
    pub n_carriers: usize,
    pub bandwidth: f64,
    /// Path delays are drawn uniformly in `[0, delay_spread_taps / B]`.
    pub delay_spread_taps: f64,
    pub normalize: bool,
    /// Attach Type-II surrogate codewords with this many beams to each RU.
    pub type2_beams: Option<usize>,
    pub type2_quantized: bool,
    /// Fail when no reference users would be produced.
    pub require_rus: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            geometry: ArrayGeometry {
                n_horizontal: 8,
                n_vertical: 2,
                dual_polarized: true,
                spacing_h: 0.5,
                spacing_v: 0.5,
            },
            area_size: 30.0,
            area_center: [0.0, 0.0],
            n_ru: 10,
            ru_pool: 10,
            n_paths: 6,
            n_dominant: 3,
            weak_path_power: 0.05,
            jitter_per_meter: 0.005,
            n_carriers: 1,
            bandwidth: 1.0e6,
            delay_spread_taps: 3.0,
            normalize: true,
            type2_beams: Some(4),
            type2_quantized: false,
            require_rus: true,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.require_rus && self.n_ru == 0 {
            return Err(SenseError::Config(
                "n_ru = 0 but reference users are required for basis construction".into(),
            ));
        }
        if self.ru_pool < self.n_ru {
            return Err(SenseError::Config("ru_pool must be at least n_ru".into()));
        }
        if self.n_paths == 0 {
            return Err(SenseError::Config("n_paths must be at least 1".into()));
        }
        if self.n_dominant > self.n_paths {
            return Err(SenseError::Config("n_dominant cannot exceed n_paths".into()));
        }
        if !(self.area_size >= 0.0 && self.area_size.is_finite()) {
            return Err(SenseError::Config("area_size must be finite and nonnegative".into()));
        }
        if !(self.jitter_per_meter >= 0.0 && self.jitter_per_meter.is_finite()) {
            return Err(SenseError::Config("jitter_per_meter must be nonnegative".into()));
        }
        if self.n_carriers == 0 || !(self.bandwidth > 0.0) {
            return Err(SenseError::Config("need n_carriers >= 1 and bandwidth > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub position: [f64; 2],
    pub channel: ChannelRealization,
    /// Ground-truth path parameters, when known.
    pub paths: Option<PathSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceUser {
    pub position: [f64; 2],
    pub channel: ChannelRealization,
    /// Type-II codeword per carrier column, `M x n_C`.
    pub type2: Option<CMatrix>,
}

impl ReferenceUser {
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        distance(self.position, p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub tu: UserChannel,
    /// Reference users, nearest to the target first.
    pub rus: Vec<ReferenceUser>,
    pub seed: u64,
}

impl Scenario {
    pub fn geometry(&self) -> &ArrayGeometry {
        &self.tu.channel.geometry
    }

    /// `M x n_R` matrix of the RU channels on carrier `k`.
    pub fn ru_csi_matrix(&self, k: usize) -> CMatrix {
        stack_columns(self.rus.iter().map(|r| r.channel.matrix.column(k).into_owned()))
    }

    /// `M x n_R` matrix of the RU Type-II codewords on carrier `k`, if every
    /// RU carries one.
    pub fn ru_type2_matrix(&self, k: usize) -> Option<CMatrix> {
        let cols: Option<Vec<_>> = self
            .rus
            .iter()
            .map(|r| r.type2.as_ref().map(|t| t.column(k).into_owned()))
            .collect();
        cols.map(|c| stack_columns(c.into_iter()))
    }

    /// Keeps only the `n` reference users closest to the target.
    pub fn keep_nearest(&mut self, n: usize) {
        sort_by_distance(&mut self.rus, self.tu.position);
        self.rus.truncate(n);
    }

    /// Re-targets a pool of users: user `index` becomes the target and all
    /// others become reference users sorted nearest-first. Type-II codewords
    /// are dropped from the new target.
    pub fn retarget(users: &[ReferenceUser], index: usize, seed: u64) -> Result<Scenario> {
        let tu = users
            .get(index)
            .ok_or_else(|| SenseError::invalid(format!("no user with index {index}")))?;
        let mut rus: Vec<ReferenceUser> = users
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, u)| u.clone())
            .collect();
        sort_by_distance(&mut rus, tu.position);
        Ok(Scenario {
            tu: UserChannel {
                position: tu.position,
                channel: tu.channel.clone(),
                paths: None,
            },
            rus,
            seed,
        })
    }
}

fn stack_columns(cols: impl Iterator<Item = crate::CVector>) -> CMatrix {
    let cols: Vec<_> = cols.collect();
    CMatrix::from_columns(&cols)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn sort_by_distance(rus: &mut [ReferenceUser], p: [f64; 2]) {
    rus.sort_by(|a, b| a.distance_to(p).partial_cmp(&b.distance_to(p)).unwrap());
}

struct Scatterer {
    power: f64,
    delay: f64,
    azimuth: f64,
    elevation: f64,
    dir_az: [f64; 2],
    dir_el: [f64; 2],
}

fn unit_direction<R: Rng>(rng: &mut R) -> [f64; 2] {
    let a: f64 = rng.random_range(0.0..2.0 * PI);
    [a.cos(), a.sin()]
}

/// Draws a scenario; a pure function of `(config, seed)`.
pub fn gen_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let scatterers: Vec<Scatterer> = (0..config.n_paths)
        .map(|i| {
            let strong = i < config.n_dominant;
            let power = if strong {
                rng.random_range(0.5..1.0)
            } else {
                config.weak_path_power * rng.random_range(0.0..1.0)
            };
            Scatterer {
                power,
                delay: rng.random_range(0.0..=config.delay_spread_taps) / config.bandwidth,
                azimuth: rng.random_range(-PI / 3.0..PI / 3.0),
                elevation: PI / 2.0 + rng.random_range(-0.2..0.2),
                dir_az: unit_direction(&mut rng),
                dir_el: unit_direction(&mut rng),
            }
        })
        .collect();

    let half = config.area_size / 2.0;
    let c = config.area_center;
    let draw_user = |rng: &mut crate::linalg::SenseRng| -> Result<([f64; 2], PathSet)> {
        let pos = if half > 0.0 {
            [c[0] + rng.random_range(-half..half), c[1] + rng.random_range(-half..half)]
        } else {
            c
        };
        let off = [pos[0] - c[0], pos[1] - c[1]];
        let paths = scatterers
            .iter()
            .map(|s| {
                let daz = config.jitter_per_meter * (off[0] * s.dir_az[0] + off[1] * s.dir_az[1]);
                let del = config.jitter_per_meter * (off[0] * s.dir_el[0] + off[1] * s.dir_el[1]);
                Path {
                    power: s.power,
                    phase: rng.random_range(0.0..2.0 * PI),
                    delay: s.delay,
                    azimuth: s.azimuth + daz,
                    elevation: s.elevation + del,
                }
            })
            .collect();
        Ok((pos, PathSet::new(paths)?))
    };

    let (tu_pos, tu_paths) = draw_user(&mut rng)?;
    let mut pool = Vec::with_capacity(config.ru_pool);
    for _ in 0..config.ru_pool {
        pool.push(draw_user(&mut rng)?);
    }

    let realize = |paths: &PathSet| -> Result<ChannelRealization> {
        if config.n_carriers == 1 {
            let h = gen_flat_channel(&config.geometry, paths, config.normalize)?;
            Ok(ChannelRealization {
                matrix: CMatrix::from_columns(&[h]),
                geometry: config.geometry,
                bandwidth: None,
            })
        } else {
            gen_multicarrier_channel(
                &config.geometry,
                paths,
                config.n_carriers,
                config.bandwidth,
                config.normalize,
            )
        }
    };

    let tu = UserChannel {
        position: tu_pos,
        channel: realize(&tu_paths)?,
        paths: Some(tu_paths),
    };
    let type2_opts = Type2Options {
        quantize: config.type2_quantized,
    };
    let mut rus = pool
        .iter()
        .map(|(pos, paths)| {
            let channel = realize(paths)?;
            let type2 = match config.type2_beams {
                Some(nb) => {
                    let cols = channel
                        .matrix
                        .column_iter()
                        .map(|col| {
                            build_type2_surrogate(&col.into_owned(), nb, &config.geometry, type2_opts)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Some(CMatrix::from_columns(&cols))
                }
                None => None,
            };
            Ok(ReferenceUser {
                position: *pos,
                channel,
                type2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    sort_by_distance(&mut rus, tu_pos);
    rus.truncate(config.n_ru);
    Ok(Scenario { tu, rus, seed })
}
