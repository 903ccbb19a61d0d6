//! Hierarchical category ontology and source-tag mapping.
//!
//! Config format (JSON):
//!
//! ```json
//! {
//!   "nodes":    [{"name": "Text"}, {"name": "Text_Main", "parent": "Text"}],
//!   "mappings": [{"corpus": "endp", "tag": "Primary Text Region", "target": "Text_Main"}],
//!   "phrases":  {"MainZone": "main text block zone"}
//! }
//! ```
//!
//! Nodes without a parent are level 1. Node order in the file is kept and
//! used for category ids after label expansion.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{CategoryDef, CorpusDataset, CorpusId, LabelPath};
use crate::error::{Error, Result};

/// The ontology shipped with the toolkit.
pub const DEFAULT_ONTOLOGY: &str = include_str!("../data/default_ontology.json");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyNode {
    pub name: String,
    pub parent: Option<String>,
    pub level: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagMapping {
    pub corpus: CorpusId,
    pub tag: String,
    pub target: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeConfig {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OntologyConfig {
    nodes: Vec<NodeConfig>,
    #[serde(default)]
    mappings: Vec<TagMapping>,
    #[serde(default)]
    phrases: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct Ontology {
    nodes: Vec<OntologyNode>,
    index: HashMap<String, usize>,
    mappings: Vec<TagMapping>,
    mapping_index: HashMap<(CorpusId, String), usize>,
    phrases: BTreeMap<String, String>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.mappings == other.mappings && self.phrases == other.phrases
    }
}

/// Parses and validates an ontology config.
pub fn load_ontology(text: &[u8]) -> Result<Ontology> {
    let cfg: OntologyConfig =
        serde_json::from_slice(text).map_err(|e| Error::Ontology(format!("malformed config: {e}")))?;

    let mut index = HashMap::new();
    for (i, n) in cfg.nodes.iter().enumerate() {
        if n.name.is_empty() {
            return Err(Error::Ontology("node with empty name".into()));
        }
        if index.insert(n.name.clone(), i).is_some() {
            return Err(Error::Ontology(format!("duplicate node name {:?}", n.name)));
        }
    }
    for n in &cfg.nodes {
        if let Some(p) = &n.parent {
            if !index.contains_key(p) {
                return Err(Error::Ontology(format!("node {:?} has unknown parent {p:?}", n.name)));
            }
        }
    }

    // levels by walking to the root; a walk longer than the node count is a cycle
    let mut nodes = Vec::with_capacity(cfg.nodes.len());
    for n in &cfg.nodes {
        let mut level = 1u32;
        let mut cur = n.parent.as_deref();
        while let Some(p) = cur {
            level += 1;
            if level as usize > cfg.nodes.len() {
                return Err(Error::Ontology(format!("cycle through node {:?}", n.name)));
            }
            cur = cfg.nodes[index[p]].parent.as_deref();
        }
        nodes.push(OntologyNode { name: n.name.clone(), parent: n.parent.clone(), level });
    }

    let mut mapping_index = HashMap::new();
    for (i, m) in cfg.mappings.iter().enumerate() {
        if !index.contains_key(&m.target) {
            return Err(Error::Ontology(format!(
                "mapping ({}, {:?}) targets unknown node {:?}",
                m.corpus, m.tag, m.target
            )));
        }
        if mapping_index.insert((m.corpus, m.tag.clone()), i).is_some() {
            return Err(Error::Ontology(format!("duplicate mapping for ({}, {:?})", m.corpus, m.tag)));
        }
    }

    Ok(Ontology { nodes, index, mappings: cfg.mappings, mapping_index, phrases: cfg.phrases })
}

impl Ontology {
    pub fn default_ontology() -> Ontology {
        load_ontology(DEFAULT_ONTOLOGY.as_bytes()).expect("shipped ontology is valid")
    }

    /// Serializes back to the config format.
    pub fn to_json(&self) -> String {
        let cfg = OntologyConfig {
            nodes: self.nodes.iter().map(|n| NodeConfig { name: n.name.clone(), parent: n.parent.clone() }).collect(),
            mappings: self.mappings.clone(),
            phrases: self.phrases.clone(),
        };
        serde_json::to_string_pretty(&cfg).expect("serializable")
    }

    pub fn nodes(&self) -> &[OntologyNode] {
        &self.nodes
    }

    pub fn mappings(&self) -> &[TagMapping] {
        &self.mappings
    }

    pub fn node(&self, name: &str) -> Option<&OntologyNode> {
        self.index.get(name).map(|&i| &self.nodes[i])
    }

    pub fn children<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a OntologyNode> + 'a {
        self.nodes.iter().filter(move |n| n.parent.as_deref() == Some(name))
    }

    /// Root-to-node path for a node name.
    pub fn path(&self, name: &str) -> Result<LabelPath> {
        let mut node = self.node(name).ok_or_else(|| Error::Ontology(format!("unknown node {name:?}")))?;
        let mut labels = vec![node.name.clone()];
        while let Some(p) = &node.parent {
            node = &self.nodes[self.index[p]];
            labels.push(node.name.clone());
        }
        labels.reverse();
        Ok(LabelPath(labels))
    }

    /// Ancestor of `name` at `depth`; nodes shallower than `depth` map to
    /// themselves.
    pub fn ancestor_at(&self, name: &str, depth: u32) -> Result<String> {
        Ok(self.path(name)?.at_depth(depth).to_string())
    }

    pub fn map_tag(&self, corpus: CorpusId, tag: &str) -> Result<LabelPath> {
        match self.mapping_index.get(&(corpus, tag.to_string())) {
            Some(&i) => self.path(&self.mappings[i].target),
            None => Err(Error::Unmapped(vec![(corpus.to_string(), tag.to_string())])),
        }
    }

    /// Prose label for a tag; the tag itself when none is configured.
    pub fn descriptive_phrase(&self, tag: &str) -> String {
        self.phrases.get(tag).cloned().unwrap_or_else(|| tag.to_string())
    }

    pub fn has_phrase(&self, tag: &str) -> bool {
        self.phrases.contains_key(tag)
    }

    /// Copy of `ds` whose categories carry their configured phrase.
    pub fn attach_phrases(&self, ds: &CorpusDataset) -> CorpusDataset {
        let mut out = ds.clone();
        for c in &mut out.categories {
            if let Some(p) = self.phrases.get(&c.name) {
                c.phrase = Some(p.clone());
            }
        }
        out
    }

    /// Registry over a set of node names: every node on their paths, in
    /// ontology order.
    pub(crate) fn registry_for<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<Vec<CategoryDef>> {
        let mut wanted: HashSet<String> = HashSet::new();
        for n in names {
            wanted.extend(self.path(n)?.0);
        }
        Ok(self
            .nodes
            .iter()
            .filter(|n| wanted.contains(&n.name))
            .enumerate()
            .map(|(i, n)| CategoryDef {
                id: i,
                name: n.name.clone(),
                phrase: self.phrases.get(&n.name).cloned(),
                level: Some(n.level),
                parent: n.parent.clone(),
            })
            .collect())
    }
}

/// Attaches the full ontology path to every instance and replaces the
/// category registry with the ontology nodes reachable from the mapped
/// tags. Fails listing every unmapped `(corpus, tag)` pair.
pub fn expand_labels(ds: &CorpusDataset, o: &Ontology) -> Result<CorpusDataset> {
    let mut unmapped: BTreeSet<(String, String)> = BTreeSet::new();
    let mut out = ds.clone();
    for img in &mut out.images {
        for inst in &mut img.instances {
            match o.map_tag(img.source_corpus, &inst.source_tag) {
                Ok(p) => inst.labels = Some(p),
                Err(_) => {
                    unmapped.insert((img.source_corpus.to_string(), inst.source_tag.clone()));
                }
            }
        }
    }
    if !unmapped.is_empty() {
        return Err(Error::Unmapped(unmapped.into_iter().collect()));
    }
    let leaves: BTreeSet<String> =
        out.images.iter().flat_map(|i| i.instances.iter().map(|x| x.category().to_string())).collect();
    out.categories = o.registry_for(leaves.iter().map(String::as_str))?;
    Ok(out)
}

pub fn descriptive_phrase(o: &Ontology, tag: &str) -> String {
    o.descriptive_phrase(tag)
}

pub fn map_tag(o: &Ontology, corpus: CorpusId, tag: &str) -> Result<LabelPath> {
    o.map_tag(corpus, tag)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phrases_attach_to_source_categories() {
        let o = Ontology::default_ontology();
        let mut ds = CorpusDataset::empty(CorpusId::Catmus);
        ds.categories = vec![CategoryDef::new(0, "DropCapitalZone"), CategoryDef::new(1, "Unknown")];
        let ds = o.attach_phrases(&ds);
        assert_eq!(ds.categories[0].phrase.as_deref(), Some("ornate drop capital letter zone"));
        assert_eq!(ds.categories[1].phrase, None);
    }

    #[test]
    fn default_loads() {
        let o = Ontology::default_ontology();
        let tops: Vec<_> = o.nodes().iter().filter(|n| n.level == 1).map(|n| n.name.as_str()).collect();
        assert_eq!(tops, ["Text", "Decoration", "Initial", "Numbering", "Marks", "Damage"]);
        assert_eq!(o.path("Initial_Ms_Simple").unwrap().0, ["Initial", "Initial_Manuscript", "Initial_Ms_Simple"]);
    }

    #[test]
    fn tag_paths() {
        let o = Ontology::default_ontology();
        assert_eq!(
            o.map_tag(CorpusId::Horae, "Simple Initial").unwrap().0,
            ["Initial", "Initial_Manuscript", "Initial_Ms_Simple"]
        );
        assert_eq!(o.map_tag(CorpusId::Endp, "Page Number").unwrap().0, ["Numbering", "Numbering_Page"]);
        assert_eq!(o.map_tag(CorpusId::Catmus, "QuireMarksZone").unwrap().0, ["Marks", "Marks_Quire"]);
        match o.map_tag(CorpusId::Endp, "MainZone") {
            Err(Error::Unmapped(v)) => assert_eq!(v, vec![("endp".to_string(), "MainZone".to_string())]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_node() {
        let o = load_ontology(br#"{"nodes":[{"name":"Only"}]}"#).unwrap();
        assert_eq!(o.nodes().len(), 1);
        assert_eq!(o.nodes()[0].level, 1);
    }

    #[test]
    fn load_errors_name_offender() {
        let cases: [(&[u8], &str); 4] = [
            (br#"{"nodes":[{"name":"A","parent":"B"},{"name":"B","parent":"A"}]}"#, "cycle"),
            (br#"{"nodes":[{"name":"A"},{"name":"A"}]}"#, "duplicate node name \"A\""),
            (br#"{"nodes":[{"name":"A","parent":"Z"}]}"#, "unknown parent \"Z\""),
            (br#"{"nodes":[{"name":"A"}],"mappings":[{"corpus":"endp","tag":"t","target":"Q"}]}"#, "unknown node \"Q\""),
        ];
        for (doc, needle) in cases {
            let e = load_ontology(doc).unwrap_err().to_string();
            assert!(e.contains(needle), "{e} lacks {needle}");
        }
    }

    #[test]
    fn phrases() {
        let o = Ontology::default_ontology();
        assert_eq!(o.descriptive_phrase("DropCapitalZone"), "ornate drop capital letter zone");
        assert_eq!(o.descriptive_phrase("NoSuchZone"), "NoSuchZone");
    }

    #[test]
    fn save_round_trip() {
        let o = Ontology::default_ontology();
        let again = load_ontology(o.to_json().as_bytes()).unwrap();
        assert_eq!(o, again);
        assert_eq!(o.to_json(), again.to_json());
    }
}
