//! Named groups of states of a user-supplied discrete linear system, for
//! cluster-to-cluster transfers and per-state zoom-in.

use std::collections::HashSet;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::infotransfer;
use crate::io;
use crate::sysmodel::{LinearSystem, Partition};

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub name: String,
    pub states: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    a: DMatrix<f64>,
    state_names: Vec<String>,
    clusters: Vec<Cluster>,
}

/// One ranked transfer.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedTransfer {
    pub source: String,
    pub target: String,
    pub value: f64,
}

impl ClusterModel {
    pub fn new(a: DMatrix<f64>, state_names: Vec<String>, clusters: Vec<Cluster>) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!("matrix must be square, got {}x{}", n, a.ncols())));
        }
        if state_names.len() != n {
            return Err(Error::DimensionMismatch(format!("{} names for {n} states", state_names.len())));
        }
        let mut names = HashSet::new();
        let mut used = HashSet::new();
        for c in &clusters {
            if c.states.is_empty() {
                return Err(Error::InvalidArgument(format!("cluster '{}' is empty", c.name)));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::NameError(format!("cluster '{}' is defined twice", c.name)));
            }
            for &s in &c.states {
                if s >= n {
                    return Err(Error::IndexError { index: s, dim: n });
                }
                if !used.insert(s) {
                    return Err(Error::NameError(format!(
                        "state '{}' is listed more than once (cluster '{}')",
                        state_names[s], c.name
                    )));
                }
            }
        }
        Ok(Self { a, state_names, clusters })
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn state_names(&self) -> &[String] {
        &self.state_names
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn cluster(&self, name: &str) -> Result<&Cluster> {
        self.clusters
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| Error::NameError(format!("unknown cluster '{name}'")))
    }

    fn system(&self, sigma: f64) -> Result<LinearSystem> {
        LinearSystem::new(self.a.clone(), sigma)
    }

    /// Partition from one cluster (or state list) to another; every other
    /// state conditions.
    pub fn partition(&self, source: &[usize], target: &[usize]) -> Result<Partition> {
        Partition::from_source_target(source, target, self.a.nrows())
    }

    /// Steady-state transfer between two named clusters.
    pub fn cluster_transfer(&self, source: &str, target: &str, sigma: f64, tol: f64) -> Result<f64> {
        let part = self.partition(&self.cluster(source)?.states, &self.cluster(target)?.states)?;
        self.transfer(&self.system(sigma)?, &part, tol)
    }

    /// A target that does not read the source has zero transfer at every
    /// step, whatever the covariance; this also covers marginally stable
    /// systems with no steady state.
    fn transfer(&self, sys: &LinearSystem, part: &Partition, tol: f64) -> Result<f64> {
        let coupling = crate::sysmodel::extract_block(&self.a, part.y(), part.x1())?;
        if coupling.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        infotransfer::steady_state_transfer(sys, part, tol)
    }

    /// Transfers between all ordered cluster pairs (optionally only into
    /// `target`), sorted by decreasing value, ties by name.
    pub fn rank_clusters(&self, target: Option<&str>, sigma: f64, tol: f64) -> Result<Vec<RankedTransfer>> {
        if let Some(t) = target {
            self.cluster(t)?;
        }
        let mut out = Vec::new();
        for s in &self.clusters {
            for t in &self.clusters {
                if s.name == t.name || target.is_some_and(|name| name != t.name) {
                    continue;
                }
                out.push(RankedTransfer {
                    source: s.name.clone(),
                    target: t.name.clone(),
                    value: self.cluster_transfer(&s.name, &t.name, sigma, tol)?,
                });
            }
        }
        sort_ranked(&mut out);
        Ok(out)
    }

    /// Transfer from each individual state of `cluster` into `target`.
    pub fn zoom(&self, cluster: &str, target: &str, sigma: f64, tol: f64) -> Result<Vec<RankedTransfer>> {
        let members = &self.cluster(cluster)?.states;
        let target_states = &self.cluster(target)?.states;
        let sys = self.system(sigma)?;
        let mut out = Vec::with_capacity(members.len());
        for &s in members {
            let part = self.partition(&[s], target_states)?;
            out.push(RankedTransfer {
                source: self.state_names[s].clone(),
                target: target.to_string(),
                value: self.transfer(&sys, &part, tol)?,
            });
        }
        sort_ranked(&mut out);
        Ok(out)
    }
}

fn sort_ranked(v: &mut [RankedTransfer]) {
    v.sort_by(|a, b| {
        b.value
            .total_cmp(&a.value)
            .then_with(|| a.source.cmp(&b.source))
            .then_with(|| a.target.cmp(&b.target))
    });
}

/// Parses lines `name: m1,m2,...` where each member is a state index or a
/// state name. Blank lines and lines starting with `#` are ignored.
pub fn parse_clusters(text: &str, state_names: &[String]) -> Result<Vec<Cluster>> {
    let mut clusters = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (name, members) = trimmed.split_once(':').ok_or_else(|| Error::ParseError {
            line,
            message: "expected 'name: member,member,...'".into(),
        })?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::ParseError { line, message: "empty cluster name".into() });
        }
        let mut states = Vec::new();
        for token in members.split(',').map(str::trim) {
            if token.is_empty() {
                return Err(Error::ParseError { line, message: format!("empty member in cluster '{name}'") });
            }
            let index = match token.parse::<usize>() {
                Ok(i) => i,
                Err(_) => state_names
                    .iter()
                    .position(|s| s == token)
                    .ok_or_else(|| Error::NameError(format!("unknown state '{token}' (line {line})")))?,
            };
            states.push(index);
        }
        clusters.push(Cluster { name: name.to_string(), states });
    }
    if clusters.is_empty() {
        return Err(Error::InvalidArgument("no clusters defined".into()));
    }
    Ok(clusters)
}

/// Reads a matrix CSV (optionally headed by state names) and a clusters file.
pub fn load_cluster_model(matrix_file: impl AsRef<Path>, clusters_file: impl AsRef<Path>) -> Result<ClusterModel> {
    let table = io::read_labeled_matrix_csv(matrix_file)?;
    let n = table.values.nrows();
    let names = table
        .names
        .unwrap_or_else(|| (0..n).map(|i| format!("z{i}")).collect());
    let text = std::fs::read_to_string(clusters_file)?;
    let clusters = parse_clusters(&text, &names)?;
    ClusterModel::new(table.values, names, clusters)
}
