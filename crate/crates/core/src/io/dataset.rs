//! User/item edge lists: parsing, id remapping, canonical form and
//! summary statistics.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::{Graph, Partition};

const CANONICAL_MAGIC: &str = "# unilink edge list";
const HEADER_WORDS: &[&str] = &[
    "user", "users", "user_id", "userid", "uid", "item", "items", "item_id", "itemid", "iid", "u", "i",
    "source", "target", "src", "dst", "from", "to", "node", "id",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeFormat {
    /// Guess from the widest data line.
    #[default]
    Auto,
    /// One `user<delim>item` pair per line; tab, comma or spaces.
    Pairs,
    /// `user item item ...` per line.
    AdjacencyList,
}

impl FromStr for EdgeFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "pairs" | "edges" => Ok(Self::Pairs),
            "adjacency_list" | "adjacency" | "adj" => Ok(Self::AdjacencyList),
            _ => Err(Error::InvalidConfig(format!("unknown edge-list format `{s}`"))),
        }
    }
}

/// A bipartite graph plus the original ids of its users and items.
/// Users occupy nodes `0..U`, items `U..U+I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub users: Vec<String>,
    pub items: Vec<String>,
}

impl Dataset {
    /// Builds the graph from `(user id, item id)` pairs with ids remapped in
    /// sorted order.
    pub fn from_id_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(Error::EmptyInput("edge list".into()));
        }
        let (users, user_idx) = index_ids(pairs.iter().map(|e| e.0).collect());
        let (items, item_idx) = index_ids(pairs.iter().map(|e| e.1).collect());
        let u = users.len();
        let partition = Partition {
            num_users: u,
            num_items: items.len(),
        };
        let graph = Graph::new(
            u + items.len(),
            pairs.iter().map(|(a, b)| (user_idx[*a], u + item_idx[*b])),
            Some(partition),
        )?;
        Ok(Self { graph, users, items })
    }

    pub fn partition(&self) -> Partition {
        Partition {
            num_users: self.users.len(),
            num_items: self.items.len(),
        }
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.users[user]
    }

    pub fn item_id(&self, item: usize) -> &str {
        &self.items[item]
    }

    /// `(user id, item id)` for every edge, sorted by node index.
    pub fn original_edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        let u = self.users.len();
        self.graph
            .edges()
            .iter()
            .map(move |&(a, b)| (self.users[a].as_str(), self.items[b - u].as_str()))
    }

    pub fn stats(&self) -> DatasetStats {
        stats(&self.graph)
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    let sep: &[char] = if line.contains('\t') {
        &['\t']
    } else if line.contains(',') {
        &[',']
    } else {
        &[' ']
    };
    line.split(sep).map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn looks_like_header(first: &[&str], rest_numeric: bool) -> bool {
    let words = first
        .iter()
        .all(|f| HEADER_WORDS.contains(&f.to_ascii_lowercase().as_str()));
    let first_numeric = first.iter().all(|f| f.parse::<f64>().is_ok());
    words || (!first_numeric && rest_numeric)
}

/// Ids sort numerically when every id is an integer, lexicographically
/// otherwise, so that remapping is independent of input order.
fn index_ids(ids: BTreeSet<&str>) -> (Vec<String>, HashMap<String, usize>) {
    let mut sorted: Vec<String> = ids.into_iter().map(str::to_string).collect();
    if sorted.iter().all(|s| s.parse::<u64>().is_ok()) {
        sorted.sort_by_key(|s| s.parse::<u64>().unwrap_or(0));
    }
    let lookup = sorted.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    (sorted, lookup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CanonicalHeader {
    users: usize,
    items: usize,
    edges: usize,
}

/// Parses an edge list from memory. `source` names the input in errors.
pub fn parse_edge_list(text: &str, format: EdgeFormat, source: &str) -> Result<(Dataset, Option<String>)> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut declared: Option<(CanonicalHeader, String)> = None;
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(h) = parse_canonical_header(comment) {
                declared = Some(h);
            }
            continue;
        }
        rows.push((idx + 1, split_fields(line)));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(source.to_string()));
    }

    let rest_numeric = rows.len() > 1
        && rows[1..]
            .iter()
            .all(|(_, f)| f.iter().all(|x| x.parse::<f64>().is_ok()));
    if looks_like_header(&rows[0].1, rest_numeric) {
        rows.remove(0);
    }
    let format = match format {
        EdgeFormat::Auto if rows.iter().any(|(_, f)| f.len() > 2) => EdgeFormat::AdjacencyList,
        EdgeFormat::Auto => EdgeFormat::Pairs,
        f => f,
    };

    let mut raw_edges: Vec<(&str, &str)> = Vec::new();
    for (line, fields) in &rows {
        match format {
            EdgeFormat::Pairs => {
                if fields.len() != 2 {
                    return Err(parse_err(*line, format!("expected 2 fields, found {}", fields.len())));
                }
                raw_edges.push((fields[0], fields[1]));
            }
            _ => {
                // A user listed without items has nothing to learn from and
                // is dropped.
                raw_edges.extend(fields.iter().skip(1).map(|item| (fields[0], *item)));
            }
        }
    }
    if raw_edges.is_empty() {
        return Err(Error::EmptyInput(source.to_string()));
    }

    let dataset = Dataset::from_id_pairs(raw_edges)?;

    if let Some((header, checksum)) = declared {
        let found = CanonicalHeader {
            users: dataset.users.len(),
            items: dataset.items.len(),
            edges: dataset.graph.num_edges(),
        };
        if header != found {
            return Err(Error::StatsMismatch(format!(
                "{source}: header declares {header:?}, file contains {found:?}"
            )));
        }
        let actual = checksum_of(&canonical_body(&dataset));
        if actual != checksum {
            return Err(Error::StatsMismatch(format!(
                "{source}: checksum {checksum} does not match contents {actual}"
            )));
        }
        return Ok((dataset, Some(checksum)));
    }
    Ok((dataset, None))
}

pub fn load_edge_list(path: &Path, format: EdgeFormat) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_edge_list(&text, format, &path.display().to_string())?.0)
}

fn parse_canonical_header(comment: &str) -> Option<(CanonicalHeader, String)> {
    let mut users = None;
    let mut items = None;
    let mut edges = None;
    let mut sha = None;
    for token in comment.split_whitespace() {
        let (k, v) = token.split_once('=')?;
        match k {
            "users" => users = v.parse().ok(),
            "items" => items = v.parse().ok(),
            "edges" => edges = v.parse().ok(),
            "sha256" => sha = Some(v.to_string()),
            _ => {}
        }
    }
    Some((
        CanonicalHeader {
            users: users?,
            items: items?,
            edges: edges?,
        },
        sha?,
    ))
}

fn canonical_body(dataset: &Dataset) -> String {
    let mut body = String::new();
    for (u, i) in dataset.original_edges() {
        let _ = writeln!(body, "{u}\t{i}");
    }
    body
}

fn checksum_of(body: &str) -> String {
    hex::encode(Sha256::digest(body.as_bytes()))
}

/// Sorted tab-separated pairs preceded by a comment header with the counts
/// and the SHA-256 of the body.
pub fn canonical_form(dataset: &Dataset) -> String {
    let body = canonical_body(dataset);
    format!(
        "{CANONICAL_MAGIC}\n# users={} items={} edges={} sha256={}\n{body}",
        dataset.users.len(),
        dataset.items.len(),
        dataset.graph.num_edges(),
        checksum_of(&body)
    )
}

/// SHA-256 of the canonical body.
pub fn dataset_checksum(dataset: &Dataset) -> String {
    checksum_of(&canonical_body(dataset))
}

pub fn write_canonical(dataset: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, canonical_form(dataset)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub nodes: usize,
    pub links: usize,
    pub users: Option<usize>,
    pub items: Option<usize>,
    /// `|E| / (|U|·|I|)` for bipartite graphs, `|E| / (n(n-1)/2)` otherwise.
    pub density: f64,
}

pub fn stats(graph: &Graph) -> DatasetStats {
    let n = graph.num_nodes();
    let e = graph.num_edges();
    match graph.partition() {
        Some(p) => DatasetStats {
            nodes: n,
            links: e,
            users: Some(p.num_users),
            items: Some(p.num_items),
            density: e as f64 / (p.num_users as f64 * p.num_items as f64),
        },
        None => DatasetStats {
            nodes: n,
            links: e,
            users: None,
            items: None,
            density: e as f64 / (n as f64 * (n as f64 - 1.0) / 2.0),
        },
    }
}

/// Published dataset statistics to certify a local copy against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedStats {
    pub nodes: usize,
    pub links: usize,
    /// Density in percent, as usually printed.
    pub density_percent: f64,
    /// Allowed absolute deviation in percentage points.
    #[serde(default = "ExpectedStats::default_tolerance")]
    pub density_tolerance: f64,
}

impl ExpectedStats {
    /// Amazon Electronics reviews.
    pub const ELECT: Self = Self {
        nodes: 2957,
        links: 35931,
        density_percent: 1.645,
        density_tolerance: 5e-4,
    };

    /// Last.fm listening data.
    pub const LASTFM: Self = Self {
        nodes: 6381,
        links: 52668,
        density_percent: 0.620,
        density_tolerance: 5e-4,
    };

    /// Half a unit in the third decimal of a percentage.
    fn default_tolerance() -> f64 {
        5e-4
    }
}

/// Fails with every mismatching statistic listed.
pub fn verify_stats(graph: &Graph, expected: &ExpectedStats) -> Result<DatasetStats> {
    let found = stats(graph);
    let mut problems = Vec::new();
    if found.nodes != expected.nodes {
        problems.push(format!("nodes: computed {}, expected {}", found.nodes, expected.nodes));
    }
    if found.links != expected.links {
        problems.push(format!("links: computed {}, expected {}", found.links, expected.links));
    }
    let pct = 100.0 * found.density;
    if (pct - expected.density_percent).abs() > expected.density_tolerance + 1e-12 {
        problems.push(format!(
            "density: computed {pct:.4}%, expected {}%",
            expected.density_percent
        ));
    }
    if problems.is_empty() {
        Ok(found)
    } else {
        Err(Error::StatsMismatch(problems.join("; ")))
    }
}
