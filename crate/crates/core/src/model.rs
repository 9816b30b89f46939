//! Interaction records, the dense user × source count matrix, and file
//! ingestion.
//!
//! A dataset is built from `(user, source, community, count)` records. Records
//! with a zero count are dropped, duplicate `(user, source)` pairs are summed,
//! and every registry (users, sources, communities) is sorted
//! lexicographically so that the result does not depend on row order.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observation: `user_id` interacted `count` times with `source_id`,
/// which belongs to `community_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub user_id: String,
    pub source_id: String,
    pub community_id: String,
    pub count: u64,
}

impl InteractionRecord {
    pub fn new(
        user_id: impl Into<String>,
        source_id: impl Into<String>,
        community_id: impl Into<String>,
        count: u64,
    ) -> Self {
        Self {
            user_id: user_id.into(),
            source_id: source_id.into(),
            community_id: community_id.into(),
            count,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl InputFormat {
    /// Guess the format from a file extension (`.jsonl`/`.ndjson` → JSONL,
    /// anything else → CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => InputFormat::Jsonl,
            _ => InputFormat::Csv,
        }
    }
}

impl FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputFormat::Csv),
            "jsonl" => Ok(InputFormat::Jsonl),
            other => Err(Error::InvalidConfig(format!("unknown input format `{other}`"))),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputFormat::Csv => "csv",
            InputFormat::Jsonl => "jsonl",
        })
    }
}

/// Immutable user × source interaction counts with entity registries.
///
/// Invariants established at construction:
/// * every source belongs to exactly one community;
/// * every user row sums to a positive total;
/// * every source has been interacted with by at least one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionDataset {
    users: Vec<String>,
    sources: Vec<String>,
    communities: Vec<String>,
    source_community: Vec<usize>,
    sources_by_community: Vec<Vec<usize>>,
    /// Row-major `users.len() × sources.len()`.
    counts: Vec<u64>,
    user_totals: Vec<u64>,
    source_populations: Vec<usize>,
}

impl InteractionDataset {
    /// Aggregate records into a dataset.
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = InteractionRecord>,
    {
        let mut cells: BTreeMap<(String, String), u64> = BTreeMap::new();
        let mut source_map: BTreeMap<String, String> = BTreeMap::new();

        for rec in records {
            if rec.count == 0 {
                continue;
            }
            match source_map.get(&rec.source_id) {
                Some(existing) if *existing != rec.community_id => {
                    return Err(Error::CommunityConflict {
                        source_id: rec.source_id,
                        first: existing.clone(),
                        second: rec.community_id,
                    });
                }
                Some(_) => {}
                None => {
                    source_map.insert(rec.source_id.clone(), rec.community_id.clone());
                }
            }
            let cell = cells.entry((rec.user_id, rec.source_id)).or_insert(0);
            *cell = cell.checked_add(rec.count).ok_or_else(|| {
                Error::Inconsistent("interaction count overflows u64".to_string())
            })?;
        }

        if cells.is_empty() {
            return Err(Error::EmptyDataset);
        }

        let mut users: Vec<String> = cells.keys().map(|(u, _)| u.clone()).collect();
        users.dedup();
        let sources: Vec<String> = source_map.keys().cloned().collect();
        let mut communities: Vec<String> = source_map.values().cloned().collect();
        communities.sort();
        communities.dedup();

        let source_community: Vec<usize> = source_map
            .values()
            .map(|c| communities.binary_search(c).expect("registered community"))
            .collect();
        let mut sources_by_community = vec![Vec::new(); communities.len()];
        for (m, &c) in source_community.iter().enumerate() {
            sources_by_community[c].push(m);
        }

        let n_sources = sources.len();
        let mut counts = vec![0u64; users.len() * n_sources];
        for ((u, s), n) in &cells {
            let ui = users.binary_search(u).expect("registered user");
            let si = sources.binary_search(s).expect("registered source");
            counts[ui * n_sources + si] = *n;
        }

        let user_totals = counts.chunks(n_sources).map(|row| row.iter().sum()).collect();
        let mut source_populations = vec![0usize; n_sources];
        for row in counts.chunks(n_sources) {
            for (m, &c) in row.iter().enumerate() {
                if c > 0 {
                    source_populations[m] += 1;
                }
            }
        }

        Ok(Self {
            users,
            sources,
            communities,
            source_community,
            sources_by_community,
            counts,
            user_totals,
            source_populations,
        })
    }

    /// Read and validate a CSV or JSONL interaction file.
    pub fn ingest(path: impl AsRef<Path>, format: InputFormat) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let records = match format {
            InputFormat::Csv => read_csv(file)?,
            InputFormat::Jsonl => read_jsonl(BufReader::new(file))?,
        };
        Self::from_records(records)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn n_communities(&self) -> usize {
        self.communities.len()
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn communities(&self) -> &[String] {
        &self.communities
    }

    pub fn user_index(&self, user_id: &str) -> Result<usize> {
        self.users
            .binary_search_by(|u| u.as_str().cmp(user_id))
            .map_err(|_| Error::UnknownUser(user_id.to_string()))
    }

    pub fn source_index(&self, source_id: &str) -> Option<usize> {
        self.sources.binary_search_by(|s| s.as_str().cmp(source_id)).ok()
    }

    pub fn community_index(&self, community_id: &str) -> Result<usize> {
        self.communities
            .binary_search_by(|c| c.as_str().cmp(community_id))
            .map_err(|_| Error::UnknownCommunity(community_id.to_string()))
    }

    /// Counts `N_{u,m}` of one user over all sources, in source registry order.
    pub fn row(&self, user: usize) -> &[u64] {
        let n = self.sources.len();
        &self.counts[user * n..(user + 1) * n]
    }

    pub fn count(&self, user: usize, source: usize) -> u64 {
        self.counts[user * self.sources.len() + source]
    }

    /// `N_u`, the user's total number of interactions.
    pub fn user_total(&self, user: usize) -> u64 {
        self.user_totals[user]
    }

    /// `|U_m|`, the number of users with at least one interaction on `source`.
    pub fn source_population(&self, source: usize) -> usize {
        self.source_populations[source]
    }

    pub fn community_of(&self, source: usize) -> usize {
        self.source_community[source]
    }

    /// Source indices belonging to a community, ascending.
    pub fn sources_in(&self, community: usize) -> &[usize] {
        &self.sources_by_community[community]
    }

    /// `N_{u,c}` for every community, in community registry order.
    pub fn community_totals(&self, user: usize) -> Vec<u64> {
        let mut totals = vec![0u64; self.communities.len()];
        for (m, &c) in self.row(user).iter().enumerate() {
            totals[self.source_community[m]] += c;
        }
        totals
    }

    /// `N_{u,c}` keyed by community id. Communities the user never touched
    /// are present with a zero count.
    pub fn community_counts(&self, user_id: &str) -> Result<BTreeMap<String, u64>> {
        let u = self.user_index(user_id)?;
        Ok(self
            .communities
            .iter()
            .cloned()
            .zip(self.community_totals(u))
            .collect())
    }

    /// Total interactions per community over the whole dataset.
    pub fn community_volumes(&self) -> Vec<u64> {
        let mut vol = vec![0u64; self.communities.len()];
        for u in 0..self.users.len() {
            for (c, n) in self.community_totals(u).into_iter().enumerate() {
                vol[c] += n;
            }
        }
        vol
    }

    /// Positive cells as records, ordered by user then source.
    pub fn records(&self) -> impl Iterator<Item = InteractionRecord> + '_ {
        (0..self.users.len()).flat_map(move |u| {
            self.row(u)
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(move |(m, &c)| {
                    InteractionRecord::new(
                        self.users[u].clone(),
                        self.sources[m].clone(),
                        self.communities[self.source_community[m]].clone(),
                        c,
                    )
                })
        })
    }

    /// Serialize in the same CSV layout `ingest` reads.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["user_id", "source_id", "community_id", "count"])?;
        for rec in self.records() {
            w.write_record([
                rec.user_id.as_str(),
                rec.source_id.as_str(),
                rec.community_id.as_str(),
                rec.count.to_string().as_str(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut writer, &rec)?;
            writer
                .write_all(b"\n")
                .map_err(|e| Error::io("<jsonl writer>", e))?;
        }
        Ok(())
    }
}

/// Parse CSV records. A header with `user_id`, `source_id` and `community_id`
/// is required; `count` is optional and defaults to 1.
pub fn read_csv<R: Read>(reader: R) -> Result<Vec<InteractionRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| Error::Parse {
        line: 1,
        message: format!("missing required column `{name}`"),
    };
    let user_col = column("user_id").ok_or_else(|| missing("user_id"))?;
    let source_col = column("source_id").ok_or_else(|| missing("source_id"))?;
    let community_col = column("community_id").ok_or_else(|| missing("community_id"))?;
    let count_col = column("count");

    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize, name: &str| -> Result<String> {
            match row.get(idx) {
                Some(v) if !v.is_empty() => Ok(v.to_string()),
                _ => Err(Error::Parse {
                    line,
                    message: format!("empty `{name}`"),
                }),
            }
        };
        let count = match count_col.and_then(|i| row.get(i)) {
            None | Some("") => 1,
            Some(raw) => parse_count(raw, line)?,
        };
        out.push(InteractionRecord {
            user_id: field(user_col, "user_id")?,
            source_id: field(source_col, "source_id")?,
            community_id: field(community_col, "community_id")?,
            count,
        });
    }
    Ok(out)
}

fn parse_count(raw: &str, line: u64) -> Result<u64> {
    raw.parse::<u64>().map_err(|_| Error::Parse {
        line,
        message: format!("count `{raw}` is not a non-negative integer"),
    })
}

#[derive(Deserialize)]
struct JsonRow {
    user_id: String,
    source_id: String,
    community_id: String,
    #[serde(default)]
    count: Option<u64>,
}

/// Parse JSONL records, one object per line. Blank lines are skipped.
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<InteractionRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        for (name, v) in [
            ("user_id", &row.user_id),
            ("source_id", &row.source_id),
            ("community_id", &row.community_id),
        ] {
            if v.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("empty `{name}`"),
                });
            }
        }
        out.push(InteractionRecord {
            user_id: row.user_id,
            source_id: row.source_id,
            community_id: row.community_id,
            count: row.count.unwrap_or(1),
        });
    }
    Ok(out)
}
