use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GbtModel, Tree, TrainingConfig, TreeNode};
use crate::error::{Error, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Struct-of-arrays tree encoding. Leaves have `feature`, `left` and `right`
/// set to -1.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    feature: Vec<i64>,
    threshold: Vec<f64>,
    left: Vec<i64>,
    right: Vec<i64>,
    default_left: Vec<bool>,
    leaf: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    schema_version: u32,
    kind: String,
    base_score: f64,
    feature_count: usize,
    config: TrainingConfig,
    trees: Vec<TreeRecord>,
}

fn encode(tree: &Tree) -> TreeRecord {
    let n = tree.nodes.len();
    let mut r = TreeRecord {
        feature: Vec::with_capacity(n),
        threshold: Vec::with_capacity(n),
        left: Vec::with_capacity(n),
        right: Vec::with_capacity(n),
        default_left: Vec::with_capacity(n),
        leaf: Vec::with_capacity(n),
    };
    for node in &tree.nodes {
        match *node {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                default_left,
            } => {
                r.feature.push(feature as i64);
                r.threshold.push(threshold);
                r.left.push(left as i64);
                r.right.push(right as i64);
                r.default_left.push(default_left);
                r.leaf.push(0.0);
            }
            TreeNode::Leaf { weight } => {
                r.feature.push(-1);
                r.threshold.push(0.0);
                r.left.push(-1);
                r.right.push(-1);
                r.default_left.push(true);
                r.leaf.push(weight);
            }
        }
    }
    r
}

fn decode(t: usize, r: TreeRecord, feature_count: usize) -> Result<Tree> {
    let n = r.feature.len();
    let err = |node: usize, message: String| Error::Model { tree: t, node, message };
    if [r.threshold.len(), r.left.len(), r.right.len(), r.default_left.len(), r.leaf.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(err(0, "node arrays have different lengths".into()));
    }
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let node = if r.feature[i] < 0 {
            if r.left[i] != -1 || r.right[i] != -1 {
                return Err(err(i, "leaf has children".into()));
            }
            TreeNode::Leaf { weight: r.leaf[i] }
        } else {
            let child = |c: i64| usize::try_from(c).map_err(|_| err(i, format!("child index {c} invalid")));
            TreeNode::Split {
                feature: r.feature[i] as usize,
                threshold: r.threshold[i],
                left: child(r.left[i])?,
                right: child(r.right[i])?,
                default_left: r.default_left[i],
            }
        };
        nodes.push(node);
    }
    let tree = Tree { nodes };
    tree.validate(feature_count, usize::MAX)
        .map_err(|(node, message)| err(node, message))?;
    Ok(tree)
}

impl GbtModel {
    pub fn to_json_string(&self) -> Result<String> {
        let rec = ModelRecord {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: "gbt".into(),
            base_score: self.base_score,
            feature_count: self.feature_count,
            config: self.config.clone(),
            trees: self.trees.iter().map(encode).collect(),
        };
        serde_json::to_string(&rec).map_err(|e| Error::parse("gbt model", e))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let rec: ModelRecord = serde_json::from_str(s).map_err(|e| Error::parse("gbt model", e))?;
        if rec.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::parse(
                "gbt model",
                format!("unsupported schema_version {}", rec.schema_version),
            ));
        }
        if rec.kind != "gbt" {
            return Err(Error::parse("gbt model", format!("kind {:?} is not gbt", rec.kind)));
        }
        if !(rec.base_score > 0.0 && rec.base_score < 1.0) {
            return Err(Error::parse("gbt model", "base_score outside (0, 1)"));
        }
        let trees = rec
            .trees
            .into_iter()
            .enumerate()
            .map(|(t, r)| decode(t, r, rec.feature_count))
            .collect::<Result<Vec<_>>>()?;
        Ok(GbtModel {
            trees,
            base_score: rec.base_score,
            feature_count: rec.feature_count,
            config: rec.config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureMatrix;
    use crate::gbt::{predict_proba, train};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn empty_model_round_trips() {
        let m = GbtModel::empty(89, TrainingConfig::default());
        assert_eq!(GbtModel::from_json_str(&m.to_json_string().unwrap()).unwrap(), m);
    }

    #[test]
    fn trained_model_round_trips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rows: Vec<Vec<f32>> = (0..1000).map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<u8> = rows.iter().map(|r| u8::from(r[0].sin() + r[3] * r[4] > 0.1)).collect();
        let x = FeatureMatrix::from_rows(&rows, Some(labels)).unwrap();
        let m = train(&x, &TrainingConfig::default()).unwrap();
        assert_eq!(m.trees.len(), 40);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        m.save(&path).unwrap();
        let back = GbtModel::load(&path).unwrap();
        assert_eq!(back, m);
        let (p, q) = (predict_proba(&m, &x).unwrap(), predict_proba(&back, &x).unwrap());
        assert!(p.iter().zip(&q).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let m = GbtModel::empty(3, TrainingConfig::default());
        let s = m.to_json_string().unwrap();
        assert!(GbtModel::from_json_str(&s[..s.len() / 2]).is_err());
    }

    #[test]
    fn bad_node_is_named() {
        let s = r#"{"schema_version":1,"kind":"gbt","base_score":0.5,"feature_count":2,"config":{},
            "trees":[{"feature":[0,-1,-1],"threshold":[0.5,0,0],"left":[1,-1,-1],"right":[5,-1,-1],
            "default_left":[true,true,true],"leaf":[0,1,2]}]}"#;
        match GbtModel::from_json_str(s) {
            Err(Error::Model { tree: 0, node: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let s = s.replace("\"feature\":[0,", "\"feature\":[7,").replace("[5,-1,-1]", "[2,-1,-1]");
        assert!(matches!(
            GbtModel::from_json_str(&s),
            Err(Error::Model { tree: 0, node: 0, .. })
        ));
    }
}
