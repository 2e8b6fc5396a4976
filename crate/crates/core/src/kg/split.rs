use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_tsv, KnowledgeGraph, Triplet, Vocab};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    Transductive,
    Inductive,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transductive" => Ok(Self::Transductive),
            "inductive" => Ok(Self::Inductive),
            other => Err(Error::Config(format!("unknown split mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Train,
    Valid,
    Test,
}

/// `(head, relation, ?)` together with every known answer.
///
/// Head-prediction queries are expressed through the inverse relation, so `(?, r, v)`
/// becomes `(v, r + R, ?)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub head: usize,
    pub relation: usize,
    pub positive_tails: Vec<usize>,
    pub provenance: Provenance,
}

impl Query {
    /// Groups triplets into tail queries `(h, r, ?)` and inverse queries `(t, r + R, ?)`,
    /// ordered by `(head, relation)`.
    pub fn group(triplets: &[Triplet], num_base_relations: usize, provenance: Provenance) -> Vec<Query> {
        let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for t in triplets {
            groups.entry((t.head, t.relation)).or_default().push(t.tail);
            groups
                .entry((t.tail, t.relation + num_base_relations))
                .or_default()
                .push(t.head);
        }
        groups
            .into_iter()
            .map(|((head, relation), mut tails)| {
                tails.sort_unstable();
                tails.dedup();
                Query {
                    head,
                    relation,
                    positive_tails: tails,
                    provenance,
                }
            })
            .collect()
    }
}

/// Known-true answers per `(head, relation)` over the augmented relation space.
#[derive(Debug, Clone, Default)]
pub struct FilterSet {
    answers: HashMap<(usize, usize), Vec<usize>>,
}

impl FilterSet {
    pub fn new<'a, I>(sources: I, num_base_relations: usize) -> Self
    where
        I: IntoIterator<Item = &'a [Triplet]>,
    {
        let mut answers: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for list in sources {
            for t in list {
                answers.entry((t.head, t.relation)).or_default().push(t.tail);
                answers
                    .entry((t.tail, t.relation + num_base_relations))
                    .or_default()
                    .push(t.head);
            }
        }
        for v in answers.values_mut() {
            v.sort_unstable();
            v.dedup();
        }
        Self { answers }
    }

    pub fn answers(&self, head: usize, relation: usize) -> &[usize] {
        self.answers
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, head: usize, relation: usize, tail: usize) -> bool {
        self.answers(head, relation).binary_search(&tail).is_ok()
    }
}

/// Graph, queries and vocabulary used at test time. In inductive mode the entities
/// are disjoint from training and only relations are shared.
#[derive(Debug, Clone)]
pub struct TestSplit {
    pub entities: Vocab,
    pub facts: Vec<Triplet>,
    pub queries: Vec<Triplet>,
    pub graph: KnowledgeGraph,
    pub filter: FilterSet,
}

#[derive(Debug, Clone)]
pub struct SplitBundle {
    pub mode: SplitMode,
    pub entities: Vocab,
    pub relations: Vocab,
    pub train: Vec<Triplet>,
    pub valid: Vec<Triplet>,
    /// Graph over training facts; used for training and validation.
    pub train_graph: KnowledgeGraph,
    pub valid_filter: FilterSet,
    pub test: TestSplit,
}

impl SplitBundle {
    /// Loads `train.txt`, `valid.txt`, `test.txt` from `dir`.
    ///
    /// In inductive mode the test graph comes from a sibling `<dir>_ind/` directory
    /// (its `train.txt` holds the facts, `test.txt` the queries) or, failing that,
    /// from `<dir>/test_graph.txt` with queries in `<dir>/test.txt`.
    pub fn load(dir: &Path, mode: SplitMode) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "dataset directory {} does not exist",
                dir.display()
            )));
        }
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        let train = load_tsv(&dir.join("train.txt"), &mut entities, &mut relations)?;
        entities.freeze();
        relations.freeze();
        let valid = load_tsv(&dir.join("valid.txt"), &mut entities, &mut relations)?;
        let num_rel = relations.len();
        let train_graph = KnowledgeGraph::from_facts(entities.len(), num_rel, &train)?;

        let test = match mode {
            SplitMode::Transductive => {
                let queries = load_tsv(&dir.join("test.txt"), &mut entities, &mut relations)?;
                let filter = FilterSet::new([&train[..], &valid[..], &queries[..]], num_rel);
                TestSplit {
                    entities: entities.clone(),
                    facts: train.clone(),
                    queries,
                    graph: train_graph.clone(),
                    filter,
                }
            }
            SplitMode::Inductive => {
                let (facts_path, queries_path) = inductive_paths(dir)?;
                let mut test_entities = Vocab::new();
                let facts = load_tsv(&facts_path, &mut test_entities, &mut relations)?;
                test_entities.freeze();
                let queries = load_tsv(&queries_path, &mut test_entities, &mut relations)?;
                let graph = KnowledgeGraph::from_facts(test_entities.len(), num_rel, &facts)?;
                let filter = FilterSet::new([&facts[..], &queries[..]], num_rel);
                TestSplit {
                    entities: test_entities,
                    facts,
                    queries,
                    graph,
                    filter,
                }
            }
        };
        let valid_filter = match mode {
            SplitMode::Transductive => {
                FilterSet::new([&train[..], &valid[..], &test.queries[..]], num_rel)
            }
            SplitMode::Inductive => FilterSet::new([&train[..], &valid[..]], num_rel),
        };
        Ok(Self {
            mode,
            entities,
            relations,
            train,
            valid,
            train_graph,
            valid_filter,
            test,
        })
    }

    pub fn num_base_relations(&self) -> usize {
        self.relations.len()
    }

    /// Filter over training facts only, used to reject false negatives while sampling.
    pub fn train_filter(&self) -> FilterSet {
        FilterSet::new([&self.train[..]], self.num_base_relations())
    }
}

fn inductive_paths(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let sibling = dir.with_file_name(format!("{name}_ind"));
    if sibling.is_dir() {
        return Ok((sibling.join("train.txt"), sibling.join("test.txt")));
    }
    let graph = dir.join("test_graph.txt");
    if graph.is_file() {
        return Ok((graph, dir.join("test.txt")));
    }
    Err(Error::Config(format!(
        "inductive split needs {} or {}",
        sibling.display(),
        graph.display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    #[test]
    fn transductive_uses_frozen_train_vocab() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path();
        write(d, "train.txt", "a\tr\tb\nb\ts\tc\n");
        write(d, "valid.txt", "a\ts\tc\n");
        write(d, "test.txt", "c\tr\ta\n");
        let b = SplitBundle::load(d, SplitMode::Transductive).unwrap();
        assert_eq!(b.entities.len(), 3);
        assert_eq!(b.train_graph.num_edges(), 4);
        assert_eq!(b.test.queries, vec![Triplet::new(2, 0, 0)]);
        assert!(b.test.filter.contains(0, 1, 2));

        write(d, "test.txt", "c\tr\tzzz\n");
        assert!(SplitBundle::load(d, SplitMode::Transductive).is_err());
    }

    #[test]
    fn inductive_builds_fresh_entity_vocab() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path().join("toy");
        let ind = tmp.path().join("toy_ind");
        fs::create_dir_all(&d).unwrap();
        fs::create_dir_all(&ind).unwrap();
        write(&d, "train.txt", "a\tr\tb\nb\ts\tc\n");
        write(&d, "valid.txt", "a\ts\tc\n");
        write(&d, "test.txt", "a\tr\tc\n");
        write(&ind, "train.txt", "x\tr\ty\ny\ts\tz\nz\tr\tw\n");
        write(&ind, "test.txt", "x\ts\tz\n");
        let b = SplitBundle::load(&d, SplitMode::Inductive).unwrap();
        assert_eq!(b.test.entities.len(), 4);
        assert_eq!(b.test.graph.num_edges(), 6);
        assert_eq!(b.test.queries, vec![Triplet::new(0, 1, 2)]);
        // relation vocabulary is shared and frozen
        write(&ind, "test.txt", "x\tnew_rel\tz\n");
        assert!(SplitBundle::load(&d, SplitMode::Inductive).is_err());
    }

    #[test]
    fn missing_directory_is_a_config_error() {
        let err = SplitBundle::load(Path::new("/definitely/not/here"), SplitMode::Inductive)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn grouping_covers_both_directions() {
        let qs = Query::group(
            &[Triplet::new(0, 0, 1), Triplet::new(0, 0, 2)],
            1,
            Provenance::Test,
        );
        assert_eq!(qs.len(), 3);
        assert_eq!(qs[0].positive_tails, vec![1, 2]);
        assert_eq!((qs[1].head, qs[1].relation, &qs[1].positive_tails[..]), (1, 1, &[0][..]));
    }
}
