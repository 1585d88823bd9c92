use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use bitextkit_core::adapt::{LossParams, TrainConfig};
use bitextkit_core::alignkit::{CkaVariant, LanguageGroupSpec};
use bitextkit_core::corpus::FilterPolicy;
use bitextkit_core::evalsuite::ClassifierConfig;
use bitextkit_core::miner::MinerConfig;
use bitextkit_core::providers::{ProviderConfig, ProviderKind};
use bitextkit_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageProvider {
    pub kind: ProviderKind,
    /// Mock settings.
    pub dimension: usize,
    pub noise_scale: f64,
    /// `text<TAB>concept` file for the mock.
    pub concept_map: Option<PathBuf>,
    /// Vector TSV for the file provider.
    pub vectors: Option<PathBuf>,
    pub http: ProviderConfig,
}

impl Default for StageProvider {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            dimension: 256,
            noise_scale: 0.0,
            concept_map: None,
            vectors: None,
            http: ProviderConfig::default(),
        }
    }
}

impl StageProvider {
    fn validate(&self, key: &str) -> Result<()> {
        match self.kind {
            ProviderKind::Mock => {
                if self.dimension < 2 {
                    return invalid(format!("{key}.dimension = {}, must be >= 2", self.dimension));
                }
                if !(0.0..1.0).contains(&self.noise_scale) {
                    return invalid(format!("{key}.noise_scale = {}, must be in [0, 1)", self.noise_scale));
                }
            }
            ProviderKind::File => {
                if self.vectors.is_none() {
                    return invalid(format!("{key}.vectors must be set for the file provider"));
                }
            }
            ProviderKind::Http => self.http.validate().map_err(|e| prefixed(&format!("{key}.http"), e))?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Providers {
    pub article: StageProvider,
    pub sentence: StageProvider,
    /// Used by training, evaluation and CKA.
    pub eval: StageProvider,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub min_doc_chars: usize,
    pub min_sentence_chars: usize,
    pub min_sentence_words: usize,
    /// Reject sentences identified as another language.
    pub lang_gate: bool,
    /// Languages the identifier knows.
    pub languages: Vec<String>,
    /// Directory of `<lang>.txt` seed texts replacing the shipped ones.
    pub langid_seed_dir: Option<PathBuf>,
}

impl CorpusSection {
    pub fn filter(&self) -> FilterPolicy {
        FilterPolicy {
            min_doc_chars: self.min_doc_chars,
            min_sentence_chars: self.min_sentence_chars,
            min_sentence_words: self.min_sentence_words,
            lang_gate: self.lang_gate,
        }
    }
}

impl Default for CorpusSection {
    fn default() -> Self {
        let f = FilterPolicy::default();
        Self {
            min_doc_chars: f.min_doc_chars,
            min_sentence_chars: f.min_sentence_chars,
            min_sentence_words: f.min_sentence_words,
            lang_gate: f.lang_gate,
            languages: ["lb", "en", "fr"].iter().map(|s| s.to_string()).collect(),
            langid_seed_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Offline,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub kind: GeneratorKind,
    /// Restricts language-specific offline rules.
    pub lang: Option<String>,
    pub endpoint_url: String,
    pub model_id: String,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::Offline,
            lang: Some("lb".to_string()),
            endpoint_url: "https://api.openai.com/v1/chat/completions".to_string(),
            model_id: "gpt-4o".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CkaSection {
    pub variant: CkaVariant,
    /// Require Flores devtest row counts.
    pub flores: bool,
}

impl Default for CkaSection {
    fn default() -> Self {
        Self { variant: CkaVariant::Paper, flores: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub providers: Providers,
    pub corpus: CorpusSection,
    pub miner: MinerConfig,
    pub train: TrainConfig,
    pub loss: LossParams,
    pub classifier: ClassifierConfig,
    pub groups: LanguageGroupSpec,
    pub cka: CkaSection,
    pub generator: GeneratorSection,
    /// Directory relative paths in this file are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            providers: Providers::default(),
            corpus: CorpusSection::default(),
            miner: MinerConfig::default(),
            train: TrainConfig::default(),
            loss: LossParams::default(),
            classifier: ClassifierConfig::default(),
            groups: LanguageGroupSpec::default(),
            cka: CkaSection::default(),
            generator: GeneratorSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

fn invalid<T>(msg: String) -> Result<T> {
    Err(Error::InvalidConfig(msg))
}

fn prefixed(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidConfig(msg) if msg.starts_with(section) => Error::InvalidConfig(msg),
        Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{section}.{msg}")),
        other => other,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {}", e.message())))
    }

    /// Reads and validates a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// The top-level seed drives every seeded stage.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        for (key, p) in [
            ("providers.article", &self.providers.article),
            ("providers.sentence", &self.providers.sentence),
            ("providers.eval", &self.providers.eval),
        ] {
            p.validate(key)?;
        }
        let f = &self.corpus;
        for (key, v) in [
            ("min_doc_chars", f.min_doc_chars),
            ("min_sentence_chars", f.min_sentence_chars),
            ("min_sentence_words", f.min_sentence_words),
        ] {
            if v == 0 {
                return invalid(format!("corpus.{key} = 0, must be >= 1"));
            }
        }
        if self.corpus.languages.is_empty() {
            return invalid("corpus.languages must list at least one language".to_string());
        }
        self.miner.validate().map_err(|e| prefixed("miner", e))?;
        self.train.validate().map_err(|e| prefixed("train", e))?;
        self.loss.validate().map_err(|e| prefixed("loss", e))?;
        self.classifier.validate()?;
        self.groups.validate()?;
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }

    pub fn stage_mut(&mut self, stage: &str) -> Option<&mut StageProvider> {
        match stage {
            "article" => Some(&mut self.providers.article),
            "sentence" => Some(&mut self.providers.sentence),
            "eval" => Some(&mut self.providers.eval),
            _ => None,
        }
    }
}
