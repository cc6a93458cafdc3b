//! Census records, distinctness groups and report writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::OutputFormat;
use crate::error::Result;
use crate::index::{Classification, IndexReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ParallelScan,
    Descent,
    MountainPass,
    Sweep,
    Shooting,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::ParallelScan => "parallel_scan",
            Provenance::Descent => "descent",
            Provenance::MountainPass => "mountain_pass",
            Provenance::Sweep => "sweep",
            Provenance::Shooting => "shooting",
        }
    }
}

/// A converged closed geodesic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicRecord {
    pub id: usize,
    pub provenance: Provenance,
    /// Task that produced the record.
    pub source: String,
    pub degree: i64,
    /// Lifted `(θ, z)` nodes of the broken geodesic.
    pub nodes: Vec<[f64; 2]>,
    pub length: f64,
    pub energy: f64,
    pub mean_z: f64,
    pub z_range: [f64; 2],
    pub relative_gradient: f64,
    pub index: IndexReport,
    pub group: usize,
    /// Densely sampled image, for polyline output.
    #[serde(skip)]
    pub image: Vec<[f64; 2]>,
}

/// One equivalence class under "not geometrically distinct".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub id: usize,
    pub members: Vec<usize>,
    /// Member used for the group's numbers: a scanned parallel if present,
    /// otherwise the smallest relative gradient.
    pub representative: usize,
    pub energy: f64,
    pub degree: i64,
    pub classification: Classification,
}

/// Outcome of one census task, kept whether or not it produced a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskLog {
    pub task: String,
    pub status: String,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSummary {
    pub description: String,
    pub mode: String,
    pub window: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub surface: SurfaceSummary,
    pub records: Vec<GeodesicRecord>,
    pub groups: Vec<GroupSummary>,
    pub tasks: Vec<TaskLog>,
}

/// Disjoint-set forest with path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the sets; the smaller root index survives.
    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

impl CensusReport {
    pub fn group(&self, id: usize) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.id == id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,provenance,degree,length,energy,ind_omega,nullity,mind,class\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{:?},{:?},{},{},{:?},{}",
                r.id,
                r.provenance.name(),
                r.degree,
                r.length,
                r.energy,
                r.index.ind_omega(),
                r.index.nullity(),
                r.index.mind,
                r.index.classification.name()
            );
        }
        s
    }

    /// Writes the requested formats into `dir`; returns the written paths.
    pub fn write(&self, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for f in formats {
            match f {
                OutputFormat::Json => {
                    let p = dir.join("census.json");
                    std::fs::write(&p, self.to_json())?;
                    written.push(p);
                }
                OutputFormat::Csv => {
                    let p = dir.join("census.csv");
                    std::fs::write(&p, self.to_csv())?;
                    written.push(p);
                }
                OutputFormat::Polyline => {
                    for r in &self.records {
                        let p = dir.join(format!("geodesic_{:03}.txt", r.id));
                        let mut s = String::new();
                        for x in &r.image {
                            let _ = writeln!(s, "{:?} {:?}", x[0], x[1]);
                        }
                        std::fs::write(&p, s)?;
                        written.push(p);
                    }
                }
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn union_find_is_an_equivalence(n in 1usize..30, pairs in proptest::collection::vec((0usize..30, 0usize..30), 0..40)) {
            let mut uf = UnionFind::new(n);
            let pairs: Vec<_> = pairs.into_iter().filter(|(a, b)| *a < n && *b < n).collect();
            for (a, b) in &pairs {
                uf.union(*a, *b);
            }
            for (a, b) in &pairs {
                prop_assert_eq!(uf.find(*a), uf.find(*b));
            }
            for a in 0..n {
                let r = uf.find(a);
                prop_assert!(r <= a);
                prop_assert_eq!(uf.find(r), r);
            }
        }
    }
}
