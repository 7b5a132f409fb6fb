//! Versioned JSON documents for inner families and decompositions, bound
//! together by a content hash, plus CSV writers.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decompose::{Decomposition, TraceRow};
use crate::error::{KstError, Result};
use crate::globaldec::GlobalDecomposition;
use crate::inner::InnerFamily;

pub const FORMAT_VERSION: u32 = 1;
const INNER_FORMAT: &str = "kst-inner-family";
const DECOMP_FORMAT: &str = "kst-decomposition";

/// SHA-256 of the compact JSON encoding. Field order is fixed by the type
/// definitions and every number is a canonical string, so the encoding is
/// canonical.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnerFamilyDocument {
    pub format: String,
    pub version: u32,
    pub hash: String,
    pub family: InnerFamily,
}

impl InnerFamilyDocument {
    pub fn new(family: InnerFamily) -> Result<Self> {
        Ok(InnerFamilyDocument {
            format: INNER_FORMAT.into(),
            version: FORMAT_VERSION,
            hash: content_hash(&family)?,
            family,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "data")]
pub enum DecompositionBody {
    Compact(Decomposition),
    Global(GlobalDecomposition),
}

impl DecompositionBody {
    pub fn outer(&self) -> &[crate::pwl::PiecewiseLinear] {
        match self {
            DecompositionBody::Compact(d) => &d.outer,
            DecompositionBody::Global(g) => &g.outer,
        }
    }

    pub fn phi_depth(&self) -> usize {
        match self {
            DecompositionBody::Compact(d) => d.phi_depth,
            DecompositionBody::Global(g) => g.phi_depth,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            DecompositionBody::Compact(d) => d.m,
            DecompositionBody::Global(g) => g.m,
        }
    }

    pub fn target(&self) -> &str {
        match self {
            DecompositionBody::Compact(d) => &d.target,
            DecompositionBody::Global(g) => &g.target,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDocument {
    pub format: String,
    pub version: u32,
    pub inner_hash: String,
    /// Where the inner family was loaded from, if it came from a file.
    pub inner_path: Option<String>,
    pub body: DecompositionBody,
    /// `g_q` breakpoints as floats, for inspection only.
    pub outer_f64: Vec<Vec<(f64, f64)>>,
}

impl DecompositionDocument {
    pub fn new(inner: &InnerFamilyDocument, inner_path: Option<String>, body: DecompositionBody) -> Self {
        let outer_f64 = body
            .outer()
            .iter()
            .map(|g| g.points.iter().map(|(x, y)| (x.to_f64(), y.to_f64())).collect())
            .collect();
        DecompositionDocument {
            format: DECOMP_FORMAT.into(),
            version: FORMAT_VERSION,
            inner_hash: inner.hash.clone(),
            inner_path,
            body,
            outer_f64,
        }
    }

    /// Errors unless this document was made with `inner`.
    pub fn check_inner(&self, inner: &InnerFamilyDocument) -> Result<()> {
        if self.inner_hash != inner.hash {
            return Err(KstError::HashMismatch {
                expected: self.inner_hash.clone(),
                found: inner.hash.clone(),
            });
        }
        Ok(())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// Parses, then checks the format tag and version before the full decode.
fn read_versioned<T: for<'de> Deserialize<'de>>(path: &Path, format: &str) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let found_format = value.get("format").and_then(|v| v.as_str());
    if found_format != Some(format) {
        return Err(KstError::Malformed(format!(
            "{}: expected a {format} document, found {found_format:?}",
            path.display()
        )));
    }
    let version = value
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| KstError::Malformed(format!("{}: missing version", path.display())))?;
    if version != FORMAT_VERSION as u64 {
        return Err(KstError::Version {
            found: version as u32,
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| KstError::Malformed(format!("{}: {e}", path.display())))
}

pub fn save_inner(path: &Path, doc: &InnerFamilyDocument) -> Result<()> {
    write_json(path, doc)
}

/// Loads and re-hashes; a document whose content no longer matches its
/// recorded hash is malformed.
pub fn load_inner(path: &Path) -> Result<InnerFamilyDocument> {
    let doc: InnerFamilyDocument = read_versioned(path, INNER_FORMAT)?;
    let actual = content_hash(&doc.family)?;
    if actual != doc.hash {
        return Err(KstError::Malformed(format!(
            "{}: recorded hash {} but content hashes to {actual}",
            path.display(),
            doc.hash
        )));
    }
    Ok(doc)
}

pub fn save_decomposition(path: &Path, doc: &DecompositionDocument) -> Result<()> {
    write_json(path, doc)
}

pub fn load_decomposition(path: &Path) -> Result<DecompositionDocument> {
    read_versioned(path, DECOMP_FORMAT)
}

/// Loads a decomposition and checks it against `inner`.
pub fn load_decomposition_for(path: &Path, inner: &InnerFamilyDocument) -> Result<DecompositionDocument> {
    let doc = load_decomposition(path)?;
    doc.check_inner(inner)?;
    Ok(doc)
}

/// Columns `r, k_r, M_r` (float), plus the exact value.
pub fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["r", "k_r", "M_r", "M_r_exact"])?;
    for row in trace {
        w.write_record([
            row.r.to_string(),
            row.k.to_string(),
            format!("{:e}", row.m_r.to_f64()),
            row.m_r.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;
    use crate::decompose::{decompose_compact, DecomposeConfig, Stop};
    use crate::exactnum::Rational;
    use crate::inner::{BuildConfig, Mode};
    use crate::targets::builtin;

    fn doc() -> &'static InnerFamilyDocument {
        static CELL: OnceLock<InnerFamilyDocument> = OnceLock::new();
        CELL.get_or_init(|| {
            let fam = InnerFamily::build(&BuildConfig::new(2, 1, Mode::Faithful)).unwrap().0;
            InnerFamilyDocument::new(fam).unwrap()
        })
    }

    #[test]
    fn inner_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        save_inner(&a, doc()).unwrap();
        let loaded = load_inner(&a).unwrap();
        assert_eq!(&loaded, doc());
        save_inner(&b, &loaded).unwrap();
        assert!(fs::read(&a).unwrap() == fs::read(&b).unwrap(), "documents differ");
    }

    #[test]
    fn rationals_stay_exact() {
        let s = serde_json::to_string(&Rational::new(1, 3)).unwrap();
        assert_eq!(serde_json::from_str::<Rational>(&s).unwrap(), Rational::new(1, 3));
        let text = serde_json::to_string(doc()).unwrap();
        assert!(text.contains("\"epsilon\":\"1/"));
    }

    #[test]
    fn tampering_and_versions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        let mut d = doc().clone();
        d.family.levels[0].functions[0].numerators[1] += 1u32;
        save_inner(&p, &d).unwrap();
        assert!(matches!(load_inner(&p), Err(KstError::Malformed(_))));

        let mut v: serde_json::Value = serde_json::to_value(doc()).unwrap();
        v["version"] = 99.into();
        fs::write(&p, serde_json::to_vec(&v).unwrap()).unwrap();
        assert!(matches!(load_inner(&p), Err(KstError::Version { found: 99, .. })));

        fs::write(&p, b"{\"format\": \"something-else\"}").unwrap();
        assert!(matches!(load_inner(&p), Err(KstError::Malformed(_))));
        fs::write(&p, b"not json").unwrap();
        assert!(matches!(load_inner(&p), Err(KstError::Json(_))));
    }

    #[test]
    fn decomposition_round_trip_and_hash_binding() {
        let fam1 = InnerFamily::build(&BuildConfig::new(1, 2, Mode::Faithful)).unwrap().0;
        let inner = InnerFamilyDocument::new(fam1).unwrap();
        let h = builtin("pyramid_bump", 1).unwrap();
        let mut config = DecomposeConfig::new(1, Stop::Rounds(1));
        config.lattice_per_axis = 21;
        let d = decompose_compact(&inner.family, &h, &config).unwrap();
        let doc = DecompositionDocument::new(&inner, Some("fam.json".into()), DecompositionBody::Compact(d));

        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("d.json");
        let b = dir.path().join("e.json");
        save_decomposition(&a, &doc).unwrap();
        let loaded = load_decomposition_for(&a, &inner).unwrap();
        save_decomposition(&b, &loaded).unwrap();
        assert!(fs::read(&a).unwrap() == fs::read(&b).unwrap(), "documents differ");

        assert!(matches!(
            load_decomposition_for(&a, doc_m2()),
            Err(KstError::HashMismatch { .. })
        ));

        let csv_path = dir.path().join("t.csv");
        if let DecompositionBody::Compact(d) = &loaded.body {
            write_trace_csv(&csv_path, &d.trace).unwrap();
        }
        let text = fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("r,k_r,M_r,M_r_exact\n0,1,1e0,1/1\n"));
    }

    fn doc_m2() -> &'static InnerFamilyDocument {
        doc()
    }
}
