use serde::{Deserialize, Serialize};

use super::{Forest, Graph, GraphBuilder};
use crate::error::{Error, Result};

/// `{"n": .., "edges": [[x, y, rate], ..], "labels": [..]}`
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl GraphJson {
    pub fn from_graph(g: &Graph) -> Self {
        Self {
            n: g.n(),
            edges: g.edges().collect(),
            labels: g.labels().map(<[String]>::to_vec),
        }
    }

    pub fn into_graph(self) -> Result<Graph> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("graph needs at least one vertex".into()));
        }
        let mut b = GraphBuilder::new(self.n);
        if let Some(l) = self.labels {
            b = b.labels(l);
        }
        for (x, y, r) in self.edges {
            b.insert(x, y, r)?;
        }
        b.build()
    }

    pub fn parse(s: &str) -> Result<Graph> {
        serde_json::from_str::<Self>(s)?.into_graph()
    }
}

/// `{"n": .., "parent": [int | null, ..], "roots": [..], "q": .., "seed": ..}`
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ForestJson {
    pub n: usize,
    pub parent: Vec<Option<usize>>,
    pub roots: Vec<usize>,
    pub q: Option<f64>,
    pub seed: Option<u64>,
}

impl ForestJson {
    pub fn new(f: &Forest, q: Option<f64>, seed: Option<u64>) -> Self {
        Self {
            n: f.n(),
            parent: f.parents().to_vec(),
            roots: f.roots().to_vec(),
            q,
            seed,
        }
    }

    pub fn into_forest(self) -> Result<Forest> {
        if self.parent.len() != self.n {
            return Err(Error::InvalidForest(format!(
                "n = {} but {} parent entries",
                self.n,
                self.parent.len()
            )));
        }
        let f = Forest::from_parents(self.parent)?;
        if f.roots() != self.roots.as_slice() {
            return Err(Error::InvalidForest("roots do not match parent array".into()));
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_round_trip() {
        let s = r#"{"n": 2, "edges": [[0, 1, 2.5], [1, 0, 1.0]]}"#;
        let g = GraphJson::parse(s).unwrap();
        assert_eq!(g.rate(0, 1), 2.5);
        let back = serde_json::to_string(&GraphJson::from_graph(&g)).unwrap();
        assert_eq!(GraphJson::parse(&back).unwrap(), g);
    }

    #[test]
    fn forest_round_trip() {
        let f = Forest::from_parents(vec![None, Some(0), Some(1)]).unwrap();
        let j = serde_json::to_string(&ForestJson::new(&f, Some(0.1), Some(3))).unwrap();
        assert!(j.contains("\"parent\":[null,0,1]"));
        let back: ForestJson = serde_json::from_str(&j).unwrap();
        assert_eq!(back.into_forest().unwrap(), f);
    }
}
