//! Trace files and the synthetic workload generator.
//!
//! A trace is newline-delimited JSON: one header object, then one
//! [`VideoRecord`] per line, sorted by `start_period`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, TimeDelta};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, Zipf};
use serde::{Deserialize, Serialize};

use crate::domain::{
    BroadcasterLocation, DemandVector, RawFeatures, Region, RegionId, VideoRecord,
    DEFAULT_DURATION_PERIODS, DEFAULT_VIDEO_SIZE_GB,
};
use crate::error::{Error, Result};
use crate::geo::{nearest_region, GeoPoint};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub schema_version: u32,
    pub region_count: usize,
    #[serde(default)]
    pub region_names: Vec<String>,
}

impl TraceHeader {
    pub fn for_regions(regions: &[Region]) -> Self {
        TraceHeader {
            schema_version: SCHEMA_VERSION,
            region_count: regions.len(),
            region_names: regions.iter().map(|r| r.name.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<VideoRecord>,
}

impl Trace {
    /// Records arriving in `period`.
    pub fn arrivals(&self, period: u32) -> &[VideoRecord] {
        let lo = self.records.partition_point(|r| r.start_period < period);
        let hi = self.records.partition_point(|r| r.start_period <= period);
        &self.records[lo..hi]
    }

    pub fn last_period(&self) -> u32 {
        self.records.last().map_or(0, |r| r.start_period)
    }
}

fn validate_record(rec: &VideoRecord, n: usize) -> std::result::Result<(), String> {
    if rec.start_period < 1 {
        return Err("start_period must be >= 1".into());
    }
    if rec.duration_periods < 1 {
        return Err("duration_periods must be >= 1".into());
    }
    if !(rec.size_gb > 0.0 && rec.size_gb.is_finite()) {
        return Err(format!("size_gb {} must be positive", rec.size_gb));
    }
    if rec.broadcaster_region >= n {
        return Err(format!(
            "broadcaster_region {} out of range for {n} regions",
            rec.broadcaster_region
        ));
    }
    if let BroadcasterLocation::Region { region } = rec.features.broadcaster_location {
        if region >= n {
            return Err(format!("broadcaster_location region {region} out of range"));
        }
    }
    if let Some(actual) = &rec.actual_viewers {
        if actual.len() != n {
            return Err(format!(
                "actual_viewers has {} entries, expected {n}",
                actual.len()
            ));
        }
    }
    Ok(())
}

pub fn load_trace(path: &Path) -> Result<Trace> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let fail = |line: usize, message: String| Error::Trace {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut lines = BufReader::new(file).lines().enumerate();
    let header: TraceHeader = loop {
        match lines.next() {
            None => return Err(fail(1, "missing header".into())),
            Some((i, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line)
                    .map_err(|e| fail(i + 1, format!("bad header: {e}")))?;
            }
        }
    };
    if header.schema_version != SCHEMA_VERSION {
        return Err(fail(
            1,
            format!("unsupported schema_version {}", header.schema_version),
        ));
    }

    let mut records: Vec<VideoRecord> = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VideoRecord =
            serde_json::from_str(&line).map_err(|e| fail(i + 1, e.to_string()))?;
        validate_record(&rec, header.region_count).map_err(|m| fail(i + 1, m))?;
        if let Some(prev) = records.last() {
            if rec.start_period < prev.start_period {
                return Err(fail(i + 1, "records are not sorted by start_period".into()));
            }
        }
        if !ids.insert(rec.video_id.clone()) {
            return Err(fail(i + 1, format!("duplicate video_id {}", rec.video_id)));
        }
        records.push(rec);
    }
    Ok(Trace { header, records })
}

pub fn save_trace(path: &Path, trace: &Trace) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    serde_json::to_writer(&mut out, &trace.header)?;
    out.write_all(b"\n").map_err(io)?;
    for rec in &trace.records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    /// Demand multiplier.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Mean Poisson arrivals per period.
    pub videos_per_period: f64,
    /// Power-law exponent of per-region popularity (> 1).
    pub popularity_exponent: f64,
    /// Largest popularity rank value drawn.
    pub max_popularity: u64,
    /// Viewers per unit of popularity.
    pub viewers_per_unit: f64,
    /// Share of viewers in the broadcaster's own region.
    pub locality: f64,
    /// Where the remaining viewers come from; one weight per region.
    pub global_mix: Vec<f64>,
    pub n_broadcasters: usize,
    /// Probability that a video uses its broadcaster's usual category.
    pub category_loyalty: f64,
    pub categories: Vec<Category>,
    /// Demand multiplier per four-hour time-of-day period.
    pub time_of_day: [f64; 6],
    /// Relative half-width of the uniform noise on total viewers.
    pub noise: f64,
    pub start_date: NaiveDate,
    pub duration_periods: u32,
    pub size_gb: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(n_regions: usize, seed: u64) -> Self {
        let global_mix = if n_regions == 10 {
            vec![0.12, 0.06, 0.08, 0.04, 0.12, 0.08, 0.12, 0.10, 0.18, 0.10]
        } else {
            vec![1.0; n_regions]
        };
        let categories = [
            ("gaming", 1.6),
            ("news", 1.2),
            ("music", 1.0),
            ("sports", 1.4),
            ("talk", 0.7),
            ("education", 0.5),
            ("travel", 0.8),
            ("food", 0.6),
        ]
        .into_iter()
        .map(|(name, weight)| Category {
            name: name.into(),
            weight,
        })
        .collect();
        GeneratorConfig {
            videos_per_period: 80.0,
            popularity_exponent: 1.5,
            max_popularity: 8,
            viewers_per_unit: 12.0,
            locality: 0.6,
            global_mix,
            n_broadcasters: 200,
            category_loyalty: 0.85,
            categories,
            time_of_day: [0.5, 0.4, 0.8, 1.0, 1.3, 1.1],
            noise: 0.35,
            start_date: NaiveDate::from_ymd_opt(2018, 7, 3).expect("valid date"),
            duration_periods: DEFAULT_DURATION_PERIODS,
            size_gb: DEFAULT_VIDEO_SIZE_GB,
            seed,
        }
    }

    pub fn validate(&self, n_regions: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.locality) || !(0.0..=1.0).contains(&self.category_loyalty) {
            return bad("locality and category_loyalty must lie in [0, 1]".into());
        }
        if !(self.popularity_exponent > 1.0) {
            return bad(format!(
                "popularity exponent {} must exceed 1",
                self.popularity_exponent
            ));
        }
        if !(self.videos_per_period >= 0.0) || !self.videos_per_period.is_finite() {
            return bad("videos_per_period must be finite and >= 0".into());
        }
        if self.global_mix.len() != n_regions
            || self.global_mix.iter().any(|w| !(*w >= 0.0))
            || self.global_mix.iter().sum::<f64>() <= 0.0
        {
            return bad("global_mix needs one non-negative weight per region".into());
        }
        if self.n_broadcasters == 0 || self.categories.is_empty() || self.max_popularity == 0 {
            return bad("need at least one broadcaster, category and popularity level".into());
        }
        if !(0.0..1.0).contains(&self.noise) || self.duration_periods < 1 || !(self.size_gb > 0.0) {
            return bad("noise must lie in [0, 1), duration >= 1, size > 0".into());
        }
        Ok(())
    }
}

struct Broadcaster {
    name: String,
    location: GeoPoint,
    region: RegionId,
    category: usize,
}

/// Synthetic trace over periods `1..=periods`. Expected demand is a function
/// of the broadcaster's region, the category and the time of day; the noise
/// is a bounded multiplier on the total plus the multinomial regional split.
pub fn generate(cfg: &GeneratorConfig, periods: u32, regions: &[Region]) -> Result<Trace> {
    let n = regions.len();
    if n == 0 {
        return Err(Error::EmptyRegionSet);
    }
    cfg.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mix_total: f64 = cfg.global_mix.iter().sum();
    let mix: Vec<f64> = cfg.global_mix.iter().map(|w| w / mix_total).collect();
    let zipf = Zipf::new(cfg.max_popularity as f64, cfg.popularity_exponent)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    let popularity: Vec<f64> = (0..n).map(|_| zipf.sample(&mut rng)).collect();

    let mut broadcasters = Vec::with_capacity(cfg.n_broadcasters);
    for i in 0..cfg.n_broadcasters {
        let home = pick_weighted(&mut rng, &mix);
        let location = GeoPoint::new(
            (regions[home].lat + rng.random_range(-1.0..1.0)).clamp(-90.0, 90.0),
            (regions[home].lon + rng.random_range(-1.0..1.0)).clamp(-180.0, 180.0),
        );
        broadcasters.push(Broadcaster {
            name: format!("broadcaster-{i:03}"),
            location,
            region: nearest_region(location, regions)?,
            category: rng.random_range(0..cfg.categories.len()),
        });
    }

    let arrivals = if cfg.videos_per_period > 0.0 {
        Some(Poisson::new(cfg.videos_per_period).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    } else {
        None
    };
    let origin: NaiveDateTime = cfg
        .start_date
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists");

    let mut records = Vec::new();
    for t in 1..=periods {
        let count = arrivals.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for j in 0..count {
            let who = &broadcasters[rng.random_range(0..broadcasters.len())];
            let category = if rng.random_bool(cfg.category_loyalty) {
                who.category
            } else {
                rng.random_range(0..cfg.categories.len())
            };
            let created_time = origin
                + TimeDelta::hours(i64::from(t) - 1)
                + TimeDelta::minutes(rng.random_range(0..60));
            let bucket = chrono::Timelike::hour(&created_time) as usize / 4;
            let noise = 1.0 + cfg.noise * rng.random_range(-1.0..=1.0);
            let expected = popularity[who.region]
                * cfg.viewers_per_unit
                * cfg.categories[category].weight
                * cfg.time_of_day[bucket]
                * noise;
            let total = expected.round().max(0.0) as u64;

            let shares: Vec<f64> = (0..n)
                .map(|r| {
                    cfg.locality * f64::from(u8::from(r == who.region))
                        + (1.0 - cfg.locality) * mix[r]
                })
                .collect();
            let actual = multinomial(&mut rng, total, &shares)?;

            records.push(VideoRecord {
                video_id: format!("v{t:04}-{j:04}"),
                broadcaster_region: who.region,
                start_period: t,
                duration_periods: cfg.duration_periods,
                size_gb: cfg.size_gb,
                features: RawFeatures {
                    broadcaster_name: who.name.clone(),
                    content_category: cfg.categories[category].name.clone(),
                    created_time,
                    created_day: created_time.weekday(),
                    broadcaster_location: BroadcasterLocation::Point {
                        lat: who.location.lat,
                        lon: who.location.lon,
                    },
                },
                actual_viewers: Some(actual),
            });
        }
    }
    Ok(Trace {
        header: TraceHeader::for_regions(regions),
        records,
    })
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let mut u = rng.random::<f64>();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

/// Splits `total` over categories with probabilities `shares` (summing to 1)
/// by sequential conditional binomials.
fn multinomial<R: Rng>(rng: &mut R, total: u64, shares: &[f64]) -> Result<DemandVector> {
    let mut counts = vec![0; shares.len()];
    let mut left = total;
    let mut mass = 1.0;
    for (i, &s) in shares.iter().enumerate() {
        if left == 0 {
            break;
        }
        let last = shares[i + 1..].iter().all(|&x| x == 0.0);
        let c = if last || mass <= s {
            left
        } else if s <= 0.0 {
            0
        } else {
            Binomial::new(left, (s / mass).min(1.0))
                .map_err(|e| Error::InvalidConfig(e.to_string()))?
                .sample(rng)
        };
        counts[i] = c;
        left -= c;
        mass -= s;
    }
    Ok(DemandVector::new(counts))
}
