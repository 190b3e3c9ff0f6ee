//! Cohort model: per-patient modality chains plus survival labels, with
//! loading, quantile time-binning, and cross-validation splitting.

mod bins;
mod folds;
mod io;

pub use bins::assign_time_bins;
pub use folds::{kfold_split, FoldSplit};
pub use io::{load_cohort, read_f32t, save_cohort, write_f32t};

use crate::error::{Error, Result};

/// The four traction chains, in canonical interleaving order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Gene,
    Meth,
    PathLocal,
    PathGlobal,
}

impl Modality {
    pub const ALL: [Modality; 4] = [
        Modality::Gene,
        Modality::Meth,
        Modality::PathLocal,
        Modality::PathGlobal,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Modality::Gene => "gene",
            Modality::Meth => "meth",
            Modality::PathLocal => "path_local",
            Modality::PathGlobal => "path_global",
        }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        match key {
            "gene" => Ok(Modality::Gene),
            "meth" => Ok(Modality::Meth),
            "path_local" => Ok(Modality::PathLocal),
            "path_global" => Ok(Modality::PathGlobal),
            other => Err(Error::validation(format!("unknown modality `{other}`"))),
        }
    }

    /// Index into per-modality arrays, matching `ALL` order.
    pub fn index(self) -> usize {
        match self {
            Modality::Gene => 0,
            Modality::Meth => 1,
            Modality::PathLocal => 2,
            Modality::PathGlobal => 3,
        }
    }
}

/// Ordered token list for one modality; every token is a `dim`-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityChain {
    dim: usize,
    /// Row-major `n_tokens x dim`.
    values: Vec<f64>,
}

impl ModalityChain {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("chain dim must be positive"));
        }
        if values.is_empty() || values.len() % dim != 0 {
            return Err(Error::validation(format!(
                "chain value count {} is not a positive multiple of dim {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("chain contains non-finite values"));
        }
        Ok(ModalityChain { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_tokens(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Keep only the tokens at `indices` (strictly increasing).
    pub fn subsample(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::validation("subsample: must keep at least 1 token"));
        }
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            if i >= self.n_tokens() {
                return Err(Error::validation(format!(
                    "subsample: index {i} out of range"
                )));
            }
            values.extend_from_slice(self.token(i));
        }
        ModalityChain::new(self.dim, values)
    }
}

/// Per-modality chains of one patient, addressed by [`Modality`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSet {
    chains: [ModalityChain; 4],
}

impl ChainSet {
    pub fn new(
        gene: ModalityChain,
        meth: ModalityChain,
        path_local: ModalityChain,
        path_global: ModalityChain,
    ) -> Result<Self> {
        let chains = [gene, meth, path_local, path_global];
        let dim = chains[0].dim();
        if chains.iter().any(|c| c.dim() != dim) {
            return Err(Error::validation("all chains must share a token dim"));
        }
        Ok(ChainSet { chains })
    }

    pub fn get(&self, m: Modality) -> &ModalityChain {
        &self.chains[m.index()]
    }

    pub fn set(&mut self, m: Modality, chain: ModalityChain) {
        self.chains[m.index()] = chain;
    }

    pub fn dim(&self) -> usize {
        self.chains[0].dim()
    }
}

/// Survival outcome. `censorship = 1` means censored: the event was NOT
/// observed and `time` is only a lower bound on survival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalLabel {
    /// Observed time in months, strictly positive.
    pub time: f64,
    /// 1 = censored (no observed event), 0 = event observed.
    pub censorship: u8,
    /// Discrete interval index in `[0, n_bins)`; assigned by
    /// [`assign_time_bins`] before training.
    pub time_bin: Option<usize>,
}

impl SurvivalLabel {
    pub fn new(time: f64, censorship: u8) -> Result<Self> {
        if !(time > 0.0) || !time.is_finite() {
            return Err(Error::validation(format!(
                "survival time must be positive and finite, got {time}"
            )));
        }
        if censorship > 1 {
            return Err(Error::validation(format!(
                "censorship must be 0 or 1, got {censorship}"
            )));
        }
        Ok(SurvivalLabel {
            time,
            censorship,
            time_bin: None,
        })
    }

    pub fn is_censored(&self) -> bool {
        self.censorship == 1
    }
}

#[derive(Debug, Clone)]
pub struct CohortSample {
    pub id: String,
    pub cancer_type: String,
    pub chains: ChainSet,
    pub label: SurvivalLabel,
}

/// Validated collection of samples; immutable once built, safe to share.
#[derive(Debug, Clone, Default)]
pub struct Cohort {
    samples: Vec<CohortSample>,
    /// Interior bin edges from the most recent [`assign_time_bins`] call.
    bin_edges: Option<Vec<f64>>,
}

/// Expected chain structure used to cross-check a cohort against a run
/// configuration.
#[derive(Debug, Clone, Copy)]
pub struct ChainDims {
    pub n_gene: usize,
    pub n_meth: usize,
    pub dim: usize,
}

impl Cohort {
    pub fn from_samples(samples: Vec<CohortSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation("empty cohort"));
        }
        let first = &samples[0];
        let dim = first.chains.dim();
        let n_gene = first.chains.get(Modality::Gene).n_tokens();
        let n_meth = first.chains.get(Modality::Meth).n_tokens();
        for s in &samples {
            Self::validate_sample(s, dim, n_gene, n_meth)?;
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &samples {
            if !seen.insert(s.id.clone()) {
                return Err(Error::validation(format!("duplicate sample id `{}`", s.id)));
            }
        }
        Ok(Cohort {
            samples,
            bin_edges: None,
        })
    }

    fn validate_sample(s: &CohortSample, dim: usize, n_gene: usize, n_meth: usize) -> Result<()> {
        let err = |msg: String| Error::validation(format!("sample `{}`: {msg}", s.id));
        if s.chains.dim() != dim {
            return Err(err(format!(
                "token dim {} differs from cohort dim {dim}",
                s.chains.dim()
            )));
        }
        let got_gene = s.chains.get(Modality::Gene).n_tokens();
        if got_gene != n_gene {
            return Err(err(format!("gene chain has {got_gene} tokens, expected {n_gene}")));
        }
        let got_meth = s.chains.get(Modality::Meth).n_tokens();
        if got_meth != n_meth {
            return Err(err(format!("meth chain has {got_meth} tokens, expected {n_meth}")));
        }
        let got_global = s.chains.get(Modality::PathGlobal).n_tokens();
        if got_global != 1 {
            return Err(err(format!(
                "path_global chain has {got_global} tokens, expected exactly 1"
            )));
        }
        if s.chains.get(Modality::PathLocal).n_tokens() == 0 {
            return Err(err("path_local chain is empty".to_string()));
        }
        Ok(())
    }

    /// Check the cohort against the chain structure a run expects.
    pub fn check_dims(&self, dims: &ChainDims) -> Result<()> {
        for s in &self.samples {
            Self::validate_sample(s, dims.dim, dims.n_gene, dims.n_meth)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[CohortSample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &CohortSample {
        &self.samples[i]
    }

    pub fn dim(&self) -> usize {
        self.samples[0].chains.dim()
    }

    pub fn n_gene(&self) -> usize {
        self.samples[0].chains.get(Modality::Gene).n_tokens()
    }

    pub fn n_meth(&self) -> usize {
        self.samples[0].chains.get(Modality::Meth).n_tokens()
    }

    pub fn bin_edges(&self) -> Option<&[f64]> {
        self.bin_edges.as_deref()
    }

    pub(crate) fn set_bin_edges(&mut self, edges: Vec<f64>) {
        self.bin_edges = Some(edges);
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [CohortSample] {
        &mut self.samples
    }

    /// Cap every path_local chain at `max_tokens` by deterministic uniform
    /// subsampling keyed on (seed, sample id); kept tokens stay in order.
    pub fn cap_path_local(&mut self, max_tokens: usize, seed: u64) -> Result<()> {
        use rand::seq::index::sample as index_sample;
        use rand::SeedableRng;
        if max_tokens == 0 {
            return Err(Error::validation("path_local cap must be positive"));
        }
        for s in &mut self.samples {
            let chain = s.chains.get(Modality::PathLocal);
            let n = chain.n_tokens();
            if n <= max_tokens {
                continue;
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                seed ^ crate::util::fnv1a64(s.id.as_bytes()),
            );
            let mut keep: Vec<usize> = index_sample(&mut rng, n, max_tokens).into_vec();
            keep.sort_unstable();
            let capped = chain.subsample(&keep)?;
            s.chains.set(Modality::PathLocal, capped);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn chain(n: usize, dim: usize, fill: f64) -> ModalityChain {
        ModalityChain::new(dim, vec![fill; n * dim]).unwrap()
    }

    pub(crate) fn sample(id: &str, time: f64, cens: u8) -> CohortSample {
        CohortSample {
            id: id.to_string(),
            cancer_type: "SYNTH".to_string(),
            chains: ChainSet::new(chain(6, 4, 0.1), chain(8, 4, 0.2), chain(5, 4, 0.3), chain(1, 4, 0.4))
                .unwrap(),
            label: SurvivalLabel::new(time, cens).unwrap(),
        }
    }

    #[test]
    fn empty_cohort_rejected() {
        assert!(matches!(
            Cohort::from_samples(vec![]),
            Err(crate::Error::Validation(msg)) if msg.contains("empty cohort")
        ));
    }

    #[test]
    fn inconsistent_gene_length_names_the_sample() {
        let good = sample("s1", 10.0, 0);
        let mut bad = sample("s2", 12.0, 0);
        bad.chains.set(Modality::Gene, chain(5, 4, 0.1));
        let err = Cohort::from_samples(vec![good, bad]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("s2") && msg.contains("gene"), "{msg}");
    }

    #[test]
    fn check_dims_reports_config_mismatch() {
        let cohort = Cohort::from_samples(vec![sample("s1", 10.0, 0)]).unwrap();
        let err = cohort
            .check_dims(&ChainDims {
                n_gene: 7,
                n_meth: 8,
                dim: 4,
            })
            .unwrap_err();
        assert!(err.to_string().contains("s1"), "{err}");
    }

    #[test]
    fn path_global_must_be_single_token() {
        let mut bad = sample("s1", 10.0, 0);
        bad.chains.set(Modality::PathGlobal, chain(2, 4, 0.4));
        assert!(Cohort::from_samples(vec![bad]).is_err());
    }

    #[test]
    fn label_validation() {
        assert!(SurvivalLabel::new(0.0, 0).is_err());
        assert!(SurvivalLabel::new(-3.0, 0).is_err());
        assert!(SurvivalLabel::new(f64::NAN, 0).is_err());
        assert!(SurvivalLabel::new(5.0, 2).is_err());
        assert!(SurvivalLabel::new(5.0, 1).unwrap().is_censored());
    }

    #[test]
    fn cap_path_local_is_deterministic_and_ordered() {
        let mut c1 = Cohort::from_samples(vec![sample("s1", 10.0, 0)]).unwrap();
        let mut c2 = Cohort::from_samples(vec![sample("s1", 10.0, 0)]).unwrap();
        // give the chain distinguishable tokens
        let values: Vec<f64> = (0..5 * 4).map(|i| i as f64).collect();
        let distinct = ModalityChain::new(4, values).unwrap();
        c1.samples_mut()[0].chains.set(Modality::PathLocal, distinct.clone());
        c2.samples_mut()[0].chains.set(Modality::PathLocal, distinct);
        c1.cap_path_local(3, 99).unwrap();
        c2.cap_path_local(3, 99).unwrap();
        let a = c1.sample(0).chains.get(Modality::PathLocal);
        let b = c2.sample(0).chains.get(Modality::PathLocal);
        assert_eq!(a, b);
        assert_eq!(a.n_tokens(), 3);
        // order preserved: first components strictly increasing
        let firsts: Vec<f64> = (0..3).map(|i| a.token(i)[0]).collect();
        assert!(firsts.windows(2).all(|w| w[0] < w[1]));
    }
}
