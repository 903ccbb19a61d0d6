//! Reading sources from disk and persisting the canonical dataset JSON.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{parse_coco, parse_page_xml, CategoryPolicy, CorpusDataset, CorpusId};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    /// A PAGE XML file or a directory searched recursively for `*.xml`.
    PageXml,
    Coco,
    /// Canonical dataset JSON written by [`save_dataset`].
    Dataset,
}

impl fmt::Display for SourceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceFormat::PageXml => "page-xml",
            SourceFormat::Coco => "coco",
            SourceFormat::Dataset => "dataset",
        })
    }
}

impl FromStr for SourceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "page-xml" | "page" => Ok(SourceFormat::PageXml),
            "coco" => Ok(SourceFormat::Coco),
            "dataset" => Ok(SourceFormat::Dataset),
            _ => Err(Error::Config(format!("unknown source format {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: CorpusDataset,
    pub warnings: Vec<String>,
}

fn collect_xml(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
        entries.sort();
        for e in entries {
            collect_xml(&e, out)?;
        }
    } else if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("xml")) {
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// PAGE XML documents under `paths`, in sorted path order.
pub fn page_xml_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if !p.exists() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("{} does not exist", p.display()),
            )));
        }
        collect_xml(p, &mut files)?;
    }
    files.sort();
    files.dedup();
    Ok(files)
}

/// Parses every PAGE XML document under `paths` into one dataset. Images
/// are ordered by file path; warnings carry the file name.
pub fn ingest_page_xml(
    paths: &[PathBuf],
    policy: &CategoryPolicy,
    corpus: CorpusId,
    exec: Execution,
) -> Result<Loaded> {
    let files = page_xml_files(paths)?;
    if files.is_empty() {
        return Err(Error::Empty("no input documents".into()));
    }
    let parsed = par::map(exec, &files, |f| -> Result<_> {
        let bytes = fs::read(f)?;
        parse_page_xml(&bytes, policy, corpus).map_err(|e| match e {
            Error::Io(e) => Error::Io(e),
            other => Error::Invalid(format!("{}: {other}", f.display())),
        })
    });
    let mut images = Vec::with_capacity(files.len());
    let mut warnings = Vec::new();
    for (f, page) in files.iter().zip(parsed) {
        let page = page?;
        warnings.extend(page.warnings.into_iter().map(|w| format!("{}: {w}", f.display())));
        images.push(page.image);
    }
    let dataset = CorpusDataset::assemble(corpus, images, policy.order.as_deref());
    Ok(Loaded { dataset, warnings })
}

pub fn ingest_coco(path: &Path, corpus: CorpusId) -> Result<Loaded> {
    let parsed = parse_coco(&fs::read(path)?, corpus)?;
    Ok(Loaded { dataset: parsed.dataset, warnings: parsed.warnings })
}

pub fn save_dataset(ds: &CorpusDataset) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(ds)?;
    out.push(b'\n');
    Ok(out)
}

pub fn load_dataset(bytes: &[u8]) -> Result<CorpusDataset> {
    Ok(serde_json::from_slice(bytes)?)
}

/// Guesses the format of `path`: directories and `.xml` files are PAGE XML;
/// JSON with an `annotations` array is COCO, anything else JSON a dataset.
pub fn detect_format(path: &Path) -> Result<SourceFormat> {
    if path.is_dir() || path.extension().is_some_and(|x| x.eq_ignore_ascii_case("xml")) {
        return Ok(SourceFormat::PageXml);
    }
    let v: serde_json::Value = serde_json::from_slice(&fs::read(path)?)?;
    if v.get("annotations").is_some() {
        Ok(SourceFormat::Coco)
    } else {
        Ok(SourceFormat::Dataset)
    }
}

/// Loads `paths` in the given or detected format. COCO and dataset inputs
/// take exactly one path.
pub fn load_source(
    paths: &[PathBuf],
    format: Option<SourceFormat>,
    corpus: CorpusId,
    policy: &CategoryPolicy,
    exec: Execution,
) -> Result<Loaded> {
    let Some(first) = paths.first() else {
        return Err(Error::Empty("no input documents".into()));
    };
    let format = match format {
        Some(f) => f,
        None => detect_format(first)?,
    };
    if format != SourceFormat::PageXml && paths.len() != 1 {
        return Err(Error::Config(format!("{format} input takes a single file, got {}", paths.len())));
    }
    match format {
        SourceFormat::PageXml => ingest_page_xml(paths, policy, corpus, exec),
        SourceFormat::Coco => ingest_coco(first, corpus),
        SourceFormat::Dataset => Ok(Loaded { dataset: load_dataset(&fs::read(first)?)?, warnings: Vec::new() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAGE: &str = r#"<PcGts xmlns="http://schema.primaresearch.org/PAGE/gts/pagecontent/2019-07-15">
      <Page imageFilename="NAME.jpg" imageWidth="100" imageHeight="80">
        <TextRegion type="paragraph" custom="structure {type:Page Number;}"><Coords points="1,1 20,1 20,9 1,9"/></TextRegion>
      </Page></PcGts>"#;

    #[test]
    fn directory_ingest_is_sorted_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("b.xml"), PAGE.replace("NAME", "b")).unwrap();
        fs::write(dir.path().join("sub/a.xml"), PAGE.replace("NAME", "a")).unwrap();
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let paths = [dir.path().to_path_buf()];
        let seq = ingest_page_xml(&paths, &CategoryPolicy::default(), CorpusId::Endp, Execution::Sequential).unwrap();
        let par = ingest_page_xml(&paths, &CategoryPolicy::default(), CorpusId::Endp, Execution::Parallel).unwrap();
        assert_eq!(seq.dataset, par.dataset);
        let ids: Vec<_> = seq.dataset.images.iter().map(|i| i.image_id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert_eq!(seq.dataset.categories[0].name, "Page Number");
        let again = load_dataset(&save_dataset(&seq.dataset).unwrap()).unwrap();
        assert_eq!(again, seq.dataset);
    }

    #[test]
    fn empty_input() {
        let dir = tempfile::tempdir().unwrap();
        let e = ingest_page_xml(&[dir.path().to_path_buf()], &CategoryPolicy::default(), CorpusId::Endp, Execution::Sequential)
            .unwrap_err();
        assert!(e.to_string().contains("no input documents"));
    }
}
