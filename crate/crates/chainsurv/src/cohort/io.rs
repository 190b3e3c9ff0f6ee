//! Cohort persistence: a CSV manifest pointing at per-sample `.f32t`
//! feature files.
//!
//! `.f32t` layout (little-endian): magic `F32T`, u32 n_tokens, u32 dim, then
//! `n_tokens * dim` f32 values row-major. Values are widened to f64 in
//! memory and rounded back to f32 on write, so a save/load round trip is
//! bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{ChainSet, Cohort, CohortSample, Modality, ModalityChain, SurvivalLabel};

const MAGIC: &[u8; 4] = b"F32T";
pub const MANIFEST_HEADER: &str =
    "id,cancer_type,time,censorship,gene_file,meth_file,path_local_file,path_global_file";

pub fn read_f32t(path: &Path) -> Result<ModalityChain> {
    let bytes = fs::read(path)
        .map_err(|e| Error::validation(format!("cannot read `{}`: {e}", path.display())))?;
    let mut cursor = &bytes[..];
    let mut magic = [0u8; 4];
    cursor
        .read_exact(&mut magic)
        .map_err(|_| Error::validation(format!("`{}`: truncated header", path.display())))?;
    if &magic != MAGIC {
        return Err(Error::validation(format!(
            "`{}`: bad magic bytes {magic:?}",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    cursor.read_exact(&mut u32buf).map_err(|_| {
        Error::validation(format!("`{}`: truncated token count", path.display()))
    })?;
    let n_tokens = u32::from_le_bytes(u32buf) as usize;
    cursor
        .read_exact(&mut u32buf)
        .map_err(|_| Error::validation(format!("`{}`: truncated dim", path.display())))?;
    let dim = u32::from_le_bytes(u32buf) as usize;
    let expected = n_tokens
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::validation(format!("`{}`: size overflow", path.display())))?;
    if cursor.len() != expected {
        return Err(Error::validation(format!(
            "`{}`: payload is {} bytes, header implies {expected}",
            path.display(),
            cursor.len()
        )));
    }
    let mut values = Vec::with_capacity(n_tokens * dim);
    for chunk in cursor.chunks_exact(4) {
        values.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    ModalityChain::new(dim, values)
        .map_err(|e| Error::validation(format!("`{}`: {e}", path.display())))
}

pub fn write_f32t(path: &Path, chain: &ModalityChain) -> Result<()> {
    let mut out = Vec::with_capacity(12 + chain.values().len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(chain.n_tokens() as u32).to_le_bytes());
    out.extend_from_slice(&(chain.dim() as u32).to_le_bytes());
    for &v in chain.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

/// Load a cohort from its manifest. Relative feature paths resolve against
/// the manifest's directory. Every structural invariant is checked here.
pub fn load_cohort(manifest_path: &Path) -> Result<Cohort> {
    let text = fs::read_to_string(manifest_path).map_err(|e| {
        Error::validation(format!("cannot read manifest `{}`: {e}", manifest_path.display()))
    })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == MANIFEST_HEADER => {}
        Some(h) => {
            return Err(Error::validation(format!(
                "manifest header mismatch: got `{}`",
                h.trim()
            )))
        }
        None => return Err(Error::validation("empty cohort")),
    }

    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(Error::validation(format!(
                "manifest line {}: expected 8 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let id = fields[0].to_string();
        let sample_err =
            |msg: String| Error::validation(format!("sample `{id}`: {msg}"));
        let cancer_type = fields[1].to_string();
        if cancer_type.is_empty() {
            return Err(sample_err("empty cancer_type".into()));
        }
        let time: f64 = fields[2]
            .parse()
            .map_err(|_| sample_err(format!("bad time `{}`", fields[2])))?;
        let censorship: u8 = fields[3]
            .parse()
            .map_err(|_| sample_err(format!("bad censorship `{}`", fields[3])))?;
        let label = SurvivalLabel::new(time, censorship)
            .map_err(|e| sample_err(e.to_string()))?;

        let mut chains: Vec<ModalityChain> = Vec::with_capacity(4);
        for (modality, field) in Modality::ALL.iter().zip(&fields[4..8]) {
            let path: PathBuf = if Path::new(field).is_absolute() {
                PathBuf::from(field)
            } else {
                base.join(field)
            };
            let chain = read_f32t(&path)
                .map_err(|e| sample_err(format!("{} chain: {e}", modality.key())))?;
            chains.push(chain);
        }
        let [gene, meth, path_local, path_global]: [ModalityChain; 4] =
            chains.try_into().expect("exactly four chains");
        let chains = ChainSet::new(gene, meth, path_local, path_global)
            .map_err(|e| sample_err(e.to_string()))?;
        samples.push(CohortSample {
            id,
            cancer_type,
            chains,
            label,
        });
    }
    if samples.is_empty() {
        return Err(Error::validation("empty cohort"));
    }
    Cohort::from_samples(samples)
}

/// Write manifest + feature files into `dir`; returns the manifest path.
pub fn save_cohort(cohort: &Cohort, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let manifest_path = dir.join("manifest.csv");
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    for s in cohort.samples() {
        let mut files = Vec::with_capacity(4);
        for m in Modality::ALL {
            let fname = format!("{}_{}.f32t", s.id, m.key());
            write_f32t(&dir.join(&fname), s.chains.get(m))?;
            files.push(fname);
        }
        manifest.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.id,
            s.cancer_type,
            s.label.time,
            s.label.censorship,
            files[0],
            files[1],
            files[2],
            files[3],
        ));
    }
    fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::tests::sample;

    fn tmpdir() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tmpdir();
        // values that are exactly representable in f32
        let mut s = sample("p1", 24.5, 0);
        let values: Vec<f64> = (0..6 * 4).map(|i| (i as f32 * 0.25 - 1.5) as f64).collect();
        s.chains.set(Modality::Gene, ModalityChain::new(4, values).unwrap());
        let cohort = Cohort::from_samples(vec![s, sample("p2", 3.25, 1)]).unwrap();
        let manifest = save_cohort(&cohort, dir.path()).unwrap();
        let loaded = load_cohort(&manifest).unwrap();
        assert_eq!(loaded.len(), 2);
        for (a, b) in cohort.samples().iter().zip(loaded.samples()) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.label.time, b.label.time);
            assert_eq!(a.label.censorship, b.label.censorship);
            for m in Modality::ALL {
                assert_eq!(a.chains.get(m).values(), b.chains.get(m).values());
            }
        }
    }

    #[test]
    fn empty_manifest_is_rejected() {
        let dir = tmpdir();
        let path = dir.path().join("manifest.csv");
        std::fs::write(&path, format!("{MANIFEST_HEADER}\n")).unwrap();
        let err = load_cohort(&path).unwrap_err();
        assert!(err.to_string().contains("empty cohort"), "{err}");
    }

    #[test]
    fn bad_magic_names_the_sample() {
        let dir = tmpdir();
        let cohort = Cohort::from_samples(vec![sample("p1", 24.5, 0)]).unwrap();
        let manifest = save_cohort(&cohort, dir.path()).unwrap();
        std::fs::write(dir.path().join("p1_gene.f32t"), b"NOPE\x01\x00\x00\x00").unwrap();
        let err = load_cohort(&manifest).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("p1") && msg.contains("magic"), "{msg}");
    }

    #[test]
    fn missing_file_names_the_sample() {
        let dir = tmpdir();
        let cohort = Cohort::from_samples(vec![sample("p1", 24.5, 0)]).unwrap();
        let manifest = save_cohort(&cohort, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("p1_meth.f32t")).unwrap();
        let err = load_cohort(&manifest).unwrap_err();
        assert!(err.to_string().contains("p1"), "{err}");
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let dir = tmpdir();
        let path = dir.path().join("bad.f32t");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"F32T");
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 8]); // should be 24 bytes
        std::fs::write(&path, bytes).unwrap();
        assert!(read_f32t(&path).is_err());
    }
}
