use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::linalg::SparsePrecision;
use crate::{Error, Result};

/// Region neighbourhood structure for Markov random field effects.
///
/// Text format: one line per region, `label: neighbour1,neighbour2,...`.
/// Regions without neighbours (islands) are written as `label:`. Blank
/// lines and lines starting with `#` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMap {
    regions: Vec<String>,
    index: HashMap<String, usize>,
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyMap {
    /// Builds from region labels and, per region, its neighbour labels.
    pub fn new(entries: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut index = HashMap::new();
        let mut regions = Vec::with_capacity(entries.len());
        for (label, _) in &entries {
            if index.insert(label.clone(), regions.len()).is_some() {
                return Err(Error::invalid(format!("region '{label}' listed twice")));
            }
            regions.push(label.clone());
        }
        let mut neighbors = Vec::with_capacity(entries.len());
        for (label, nbrs) in &entries {
            let mut ids = Vec::with_capacity(nbrs.len());
            for nb in nbrs {
                let id = *index.get(nb).ok_or_else(|| Error::UnknownRegion(nb.clone()))?;
                if nb == label {
                    return Err(Error::invalid(format!("region '{label}' lists itself as a neighbour")));
                }
                if !ids.contains(&id) {
                    ids.push(id);
                }
            }
            ids.sort_unstable();
            neighbors.push(ids);
        }
        for (s, nbrs) in neighbors.iter().enumerate() {
            for &r in nbrs {
                if neighbors[r].binary_search(&s).is_err() {
                    return Err(Error::AsymmetricAdjacency(regions[s].clone(), regions[r].clone()));
                }
            }
        }
        Ok(Self {
            regions,
            index,
            neighbors,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (label, rest) = line.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("expected 'label: neighbours', got '{line}'"),
            })?;
            let label = label.trim();
            if label.is_empty() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "empty region label".into(),
                });
            }
            let nbrs = rest
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            entries.push((label.to_string(), nbrs));
        }
        Self::new(entries)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, label) in self.regions.iter().enumerate() {
            let nbrs: Vec<&str> = self.neighbors[s].iter().map(|&r| self.regions[r].as_str()).collect();
            let _ = writeln!(out, "{label}: {}", nbrs.join(","));
        }
        out
    }

    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn neighbors(&self, s: usize) -> &[usize] {
        &self.neighbors[s]
    }

    pub fn degree(&self, s: usize) -> usize {
        self.neighbors[s].len()
    }

    pub fn is_island(&self, s: usize) -> bool {
        self.neighbors[s].is_empty()
    }

    /// Connected-component label of every region.
    pub fn components(&self) -> Vec<usize> {
        let n = self.n_regions();
        let mut comp = vec![usize::MAX; n];
        let mut next = 0;
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            comp[s] = next;
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn n_components(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    /// Graph Laplacian diag(N_s) − adjacency.
    pub fn laplacian(&self) -> SparsePrecision {
        let mut trip = Vec::new();
        for s in 0..self.n_regions() {
            trip.push((s, s, self.degree(s) as f64));
            for &r in &self.neighbors[s] {
                if r > s {
                    trip.push((s, r, -1.0));
                }
            }
        }
        SparsePrecision::from_triplets(self.n_regions(), &trip).expect("valid by construction")
    }
}
