//! Seeded generator of two-community interaction datasets with ground-truth
//! behavioral classes.
//!
//! Each user belongs to one class. A class fixes how the user's activity is
//! drawn, how it splits between the two communities, and how concentrated it
//! is on the sources of each community.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Open01};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InputFormat, InteractionDataset, InteractionRecord};

const FRACTION_TOL: f64 = 1e-9;

/// Bounded power law `p(N) ∝ N^(−exponent)` on `[min, max]`, rounded to an
/// integer number of interactions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityLaw {
    pub min: f64,
    pub max: f64,
    pub exponent: f64,
}

impl ActivityLaw {
    fn sample(&self, rng: &mut ChaCha8Rng) -> u64 {
        let u: f64 = rng.random();
        let x = if (self.exponent - 1.0).abs() < 1e-12 {
            self.min * (self.max / self.min).powf(u)
        } else {
            let e = 1.0 - self.exponent;
            (self.min.powf(e) + u * (self.max.powf(e) - self.min.powf(e))).powf(1.0 / e)
        };
        x.round().max(1.0) as u64
    }
}

/// How a class divides its interactions between the two communities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Split {
    /// Every interaction goes to one community (index into `communities`).
    Single { community: usize },
    /// The minority community gets a share drawn from a truncated
    /// exponential on `[lo, hi]` with scale `decay`. With `minority: None`
    /// the minority side is picked by a fair coin per user.
    Mixed {
        minority: Option<usize>,
        lo: f64,
        hi: f64,
        decay: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    pub name: String,
    pub fraction: f64,
    pub split: Split,
    pub activity: ActivityLaw,
    /// Per community, the range of the Zipf exponent used to concentrate a
    /// user's interactions on their favorite sources. Higher is more
    /// concentrated.
    pub concentration: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_sources_per_community: usize,
    /// Community labels; the first one plays the positive role.
    pub communities: [String; 2],
    /// Must equal the total fraction of classes with a mixed split.
    pub cross_community_fraction: f64,
    /// Source `k` of a community (0-based) is picked as a favorite with
    /// weight `(k + 1)^(−source_popularity_exponent)`.
    pub source_popularity_exponent: f64,
    pub classes: Vec<ClassProfile>,
    pub seed: u64,
}

impl SynthConfig {
    pub fn positive_community(&self) -> &str {
        &self.communities[0]
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_users == 0 {
            return bad("n_users must be at least 1".into());
        }
        if self.n_sources_per_community == 0 {
            return bad("n_sources_per_community must be at least 1".into());
        }
        if self.communities[0] == self.communities[1] || self.communities.iter().any(|c| c.is_empty()) {
            return bad("community labels must be distinct and non-empty".into());
        }
        if !(self.source_popularity_exponent.is_finite() && self.source_popularity_exponent >= 0.0) {
            return bad("source_popularity_exponent must be finite and non-negative".into());
        }
        if self.classes.is_empty() {
            return bad("at least one class is required".into());
        }
        let mut names = std::collections::BTreeSet::new();
        let mut total = 0.0;
        let mut mixed = 0.0;
        for c in &self.classes {
            if !names.insert(c.name.as_str()) || c.name.is_empty() {
                return bad(format!("class name {:?} is empty or repeated", c.name));
            }
            if !(c.fraction.is_finite() && c.fraction >= 0.0) {
                return bad(format!("class {} has fraction {}", c.name, c.fraction));
            }
            total += c.fraction;
            let a = &c.activity;
            if !(a.min >= 1.0 && a.max >= a.min && a.max.is_finite() && a.exponent.is_finite()) {
                return bad(format!("class {} needs 1 <= activity.min <= activity.max", c.name));
            }
            for r in &c.concentration {
                if !(r[0].is_finite() && r[1].is_finite() && 0.0 <= r[0] && r[0] <= r[1]) {
                    return bad(format!("class {} has concentration range {r:?}", c.name));
                }
            }
            match c.split {
                Split::Single { community } if community > 1 => {
                    return bad(format!("class {} targets community {community}", c.name));
                }
                Split::Single { .. } => {}
                Split::Mixed { minority, lo, hi, decay } => {
                    if minority.is_some_and(|m| m > 1) {
                        return bad(format!("class {} has minority community out of range", c.name));
                    }
                    if !(0.0 < lo && lo <= hi && hi <= 0.5) {
                        return bad(format!("class {} needs 0 < lo <= hi <= 0.5", c.name));
                    }
                    if !(decay.is_finite() && decay > 0.0) {
                        return bad(format!("class {} needs a positive decay", c.name));
                    }
                    mixed += c.fraction;
                }
            }
        }
        if (total - 1.0).abs() > FRACTION_TOL {
            return bad(format!("class fractions sum to {total}, expected 1"));
        }
        if !(0.0..=1.0).contains(&self.cross_community_fraction)
            || (mixed - self.cross_community_fraction).abs() > FRACTION_TOL
        {
            return bad(format!(
                "cross_community_fraction {} does not match the mixed-class total {mixed}",
                self.cross_community_fraction
            ));
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Calibrated two-community profile: 1,000 users, 10 + 10 sources, an
/// anti:pro interaction volume near 17:1 and 18.8% of users active in both
/// communities.
///
/// | class | share | communities | activity |
/// |---|---|---|---|
/// | `anti_polarized` | 33.5% | anti only | 50..2000, exponent 0.5 |
/// | `pro_polarized` | 47.7% | pro only | 10..80, exponent 2.5 |
/// | `balanced_intermediate` | 4.5% | minority share 0.24..0.5 | 100..400, exponent 2 |
/// | `anti_leaning_intermediate` | 14.3% | pro share 0.02..0.24 | 60..600, exponent 1.5 |
pub fn paper_profile() -> SynthConfig {
    let (pro, anti) = (0, 1);
    SynthConfig {
        n_users: 1000,
        n_sources_per_community: 10,
        communities: ["pro".into(), "anti".into()],
        cross_community_fraction: 0.188,
        source_popularity_exponent: 0.5,
        classes: vec![
            ClassProfile {
                name: "anti_polarized".into(),
                fraction: 0.335,
                split: Split::Single { community: anti },
                activity: ActivityLaw { min: 50.0, max: 2000.0, exponent: 0.5 },
                concentration: [[0.0, 0.0], [2.0, 4.0]],
            },
            ClassProfile {
                name: "pro_polarized".into(),
                fraction: 0.477,
                split: Split::Single { community: pro },
                activity: ActivityLaw { min: 10.0, max: 80.0, exponent: 2.5 },
                concentration: [[0.5, 2.0], [0.0, 0.0]],
            },
            ClassProfile {
                name: "balanced_intermediate".into(),
                fraction: 0.045,
                split: Split::Mixed { minority: None, lo: 0.24, hi: 0.5, decay: 0.2 },
                activity: ActivityLaw { min: 100.0, max: 400.0, exponent: 2.0 },
                concentration: [[0.5, 1.2], [0.5, 1.2]],
            },
            ClassProfile {
                name: "anti_leaning_intermediate".into(),
                fraction: 0.143,
                split: Split::Mixed { minority: Some(pro), lo: 0.02, hi: 0.24, decay: 0.2 },
                activity: ActivityLaw { min: 60.0, max: 600.0, exponent: 1.5 },
                concentration: [[4.0, 6.0], [0.5, 1.2]],
            },
        ],
        seed: 0,
    }
}

/// Class of every generated user.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub classes: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn class_of(&self, user_id: &str) -> Option<&str> {
        self.classes.get(user_id).map(String::as_str)
    }

    pub fn class_sizes(&self) -> BTreeMap<String, usize> {
        let mut sizes = BTreeMap::new();
        for c in self.classes.values() {
            *sizes.entry(c.clone()).or_insert(0) += 1;
        }
        sizes
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["user_id", "class"])?;
        for (u, c) in &self.classes {
            w.write_record([u, c])?;
        }
        w.flush().map_err(|e| Error::io("<ground truth csv>", e))?;
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` over `fractions`.
fn quotas(n: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut q: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - q.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        q[i] += 1;
        left -= 1;
    }
    q
}

/// Minority share from a truncated exponential on `[lo, hi]` at quantile `u`.
fn minority_share(lo: f64, hi: f64, decay: f64, u: f64) -> f64 {
    lo - decay * (1.0 - u * (1.0 - (-(hi - lo) / decay).exp())).ln()
}

/// Generate a dataset and its ground truth. Identical configs give identical
/// output.
pub fn generate(cfg: &SynthConfig) -> Result<(InteractionDataset, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n_users;
    let ns = cfg.n_sources_per_community;

    let fractions: Vec<f64> = cfg.classes.iter().map(|c| c.fraction).collect();
    let mut labels: Vec<usize> = quotas(n, &fractions)
        .iter()
        .enumerate()
        .flat_map(|(c, &q)| std::iter::repeat_n(c, q))
        .collect();
    labels.shuffle(&mut rng);

    // Stratified share quantiles per mixed class: one value per user at the
    // centre of each of q equal strata, handed out in random order.
    let mut quantile = vec![0.5; n];
    for (c, class) in cfg.classes.iter().enumerate() {
        if !matches!(class.split, Split::Mixed { .. }) {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&u| labels[u] == c).collect();
        let q = members.len();
        let mut strata: Vec<f64> = (0..q).map(|i| (i as f64 + 0.5) / q as f64).collect();
        strata.shuffle(&mut rng);
        for (&u, s) in members.iter().zip(strata) {
            quantile[u] = s;
        }
    }

    let popularity: Vec<f64> = (0..ns)
        .map(|k| ((k + 1) as f64).powf(-cfg.source_popularity_exponent).ln())
        .collect();
    let width = n.to_string().len().max(4);
    let src_width = ns.to_string().len().max(2);
    let user_id = |u: usize| format!("u{:0width$}", u + 1);
    let source_id = |c: usize, k: usize| format!("{}_{:0src_width$}", cfg.communities[c], k + 1);

    let mut records = Vec::new();
    let mut truth = GroundTruth::default();
    for u in 0..n {
        let class = &cfg.classes[labels[u]];
        let mut total = class.activity.sample(&mut rng);
        let per_community: [u64; 2] = match class.split {
            Split::Single { community } => {
                let mut v = [0, 0];
                v[community] = total;
                v
            }
            Split::Mixed { minority, lo, hi, decay } => {
                total = total.max(2);
                let share = minority_share(lo, hi, decay, quantile[u]);
                let minority = minority.unwrap_or_else(|| rng.random_range(0..2));
                let m = ((share * total as f64).round() as u64).clamp(1, total - 1);
                let mut v = [total - m, total - m];
                v[minority] = m;
                v
            }
        };

        for (c, &m) in per_community.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let [lo_s, hi_s] = class.concentration[c];
            let s = lo_s + (hi_s - lo_s) * rng.random::<f64>();
            // favorite order: popularity-weighted sampling without
            // replacement via Gumbel keys
            let keys: Vec<f64> = popularity
                .iter()
                .map(|&lp| {
                    let g: f64 = rng.sample(Open01);
                    lp - (-g.ln()).ln()
                })
                .collect();
            let mut order: Vec<usize> = (0..ns).collect();
            order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]).then(a.cmp(&b)));
            let mut weights = vec![0.0; ns];
            for (rank, &k) in order.iter().enumerate() {
                weights[k] = ((rank + 1) as f64).powf(-s);
            }
            let pick = WeightedIndex::new(&weights)
                .map_err(|e| Error::InvalidConfig(format!("source weights: {e}")))?;
            let mut counts = vec![0u64; ns];
            for _ in 0..m {
                counts[pick.sample(&mut rng)] += 1;
            }
            for (k, &cnt) in counts.iter().enumerate() {
                if cnt > 0 {
                    records.push(InteractionRecord::new(
                        user_id(u),
                        source_id(c, k),
                        cfg.communities[c].clone(),
                        cnt,
                    ));
                }
            }
        }
        truth.classes.insert(user_id(u), class.name.clone());
    }

    let ds = InteractionDataset::from_records(records)?;
    Ok((ds, truth))
}

/// Write the dataset in `format` plus a `ground_truth.csv` and the config
/// used, into `dir`. Returns the dataset path.
pub fn write_outputs(
    dir: impl AsRef<Path>,
    cfg: &SynthConfig,
    ds: &InteractionDataset,
    truth: &GroundTruth,
    format: InputFormat,
) -> Result<std::path::PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data_path = dir.join(match format {
        InputFormat::Csv => "interactions.csv",
        InputFormat::Jsonl => "interactions.jsonl",
    });
    let create = |p: &Path| std::fs::File::create(p).map(std::io::BufWriter::new).map_err(|e| Error::io(p, e));
    match format {
        InputFormat::Csv => ds.write_csv(create(&data_path)?)?,
        InputFormat::Jsonl => ds.write_jsonl(create(&data_path)?)?,
    }
    truth.write_csv(create(&dir.join("ground_truth.csv"))?)?;
    let cfg_path = dir.join("synth_config.json");
    let mut w = create(&cfg_path)?;
    serde_json::to_writer_pretty(&mut w, cfg)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&cfg_path, e))?;
    Ok(data_path)
}
