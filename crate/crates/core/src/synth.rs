//! Synthetic worlds with known ground truth: a planted trilingual news
//! corpus for the mining pipeline, rotated vector spaces for adapter
//! training and a four-language setup for alignment analytics.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::Document;
use crate::embed::{dot, normalize_slice, EmbeddingMatrix};
use crate::error::Result;

pub const PLANTED_ARTICLES: usize = 50;
pub const PLANTED_SENTENCES: usize = 5;
/// Start of the synthetic timeline, 2024-01-01T00:00:00Z.
pub const EPOCH: i64 = 1_704_067_200;

const HOUR: i64 = 3600;
const DAY: i64 = 24 * HOUR;

const NAMES: [&str; 8] =
    ["Jean Muller", "Anne Weber", "Marc Schmit", "Lisa Hoffmann", "Paul Wagner", "Claire Thill", "Tom Kieffer", "Sara Reuter"];
const PLACES: [&str; 8] = ["Ettelbruck", "Diekirch", "Wiltz", "Remich", "Echternach", "Clervaux", "Differdange", "Dudelange"];

// One row per planted sentence template: lb, en, fr.
const PARALLEL: [[&str; 3]; 7] = [
    [
        "{name} huet e Mëttwoch zu {place} {num} nei Wunnenge fir jonk Famillje virgestallt.",
        "On Wednesday {name} presented {num} new homes for young families in {place}.",
        "Mercredi, {name} a présenté à {place} {num} nouveaux logements pour les jeunes familles.",
    ],
    [
        "De Gemengerot vun {place} huet {num} Euro fir déi nei Schoul gestëmmt.",
        "The council of {place} voted {num} euros for the new school.",
        "Le conseil communal de {place} a voté {num} euros pour la nouvelle école.",
    ],
    [
        "No der Reunioun sot {name}, datt d'Regierung de Projet mat {num} Leit ënnerstëtzt.",
        "After the meeting {name} said that the government supports the project with {num} people.",
        "Après la réunion, {name} a dit que le gouvernement soutient le projet avec {num} personnes.",
    ],
    [
        "Zu {place} goufen dëst Joer {num} Accidenter op der Strooss gezielt.",
        "This year {num} accidents were counted on the roads of {place}.",
        "Cette année, {num} accidents ont été comptés sur les routes de {place}.",
    ],
    [
        "{name} wëll an den nächste Méint {num} zousätzlech Beem ronderëm {place} planzen.",
        "In the coming months {name} wants to plant {num} additional trees around {place}.",
        "Dans les prochains mois, {name} veut planter {num} arbres supplémentaires autour de {place}.",
    ],
    [
        "D'Police vun {place} huet e Sonndeg {num} Chaufferen op der Autobunn kontrolléiert.",
        "On Sunday the police of {place} checked {num} drivers on the motorway.",
        "Dimanche, la police de {place} a contrôlé {num} conducteurs sur l'autoroute.",
    ],
    [
        "Fir {name} ass et wichteg, datt {num} Bierger vun {place} hir Meenung soen.",
        "For {name} it is important that {num} citizens of {place} give their opinion.",
        "Pour {name}, il est important que {num} citoyens de {place} donnent leur avis.",
    ],
];

// Second wording of the lb templates, used for planted paraphrases.
const LB_REWORDED: [&str; 7] = [
    "E Mëttwoch goufen zu {place} vum {name} {num} nei Wunnenge fir jonk Famillje presentéiert.",
    "Fir déi nei Schoul huet de Gemengerot vun {place} {num} Euro bewëllegt.",
    "Nom Treffen huet {name} gesot, datt d'Regierung de Projet mat {num} Leit ënnerstëtze wäert.",
    "Dëst Joer sinn op de Stroosse vun {place} {num} Accidenter gezielt ginn.",
    "An den nächste Méint sollen op Initiativ vum {name} {num} Beem ronderëm {place} geplanzt ginn.",
    "E Sonndeg goufen {num} Chaufferen op der Autobunn vun der Police vun {place} kontrolléiert.",
    "Dem {name} no ass et wichteg, datt {num} Bierger vun {place} hir Meenung matdeelen.",
];

// Sentences with no counterpart in any other document.
const FILLER: [[&str; 2]; 3] = [
    [
        "D'Wieder gëtt muer zu {place} méi kal, sou datt {num} Leit léiwer doheem bleiwen.",
        "An der Stad sinn dëse Summer {num} nei Weeër fir d'Vëlosfuerer gebaut ginn.",
    ],
    [
        "The weather in {place} will turn colder tomorrow and {num} people will stay at home.",
        "This summer {num} new lanes for cyclists have been built in the city.",
    ],
    [
        "Demain, il fera plus froid à {place} et {num} personnes resteront à la maison.",
        "Cet été, {num} nouvelles pistes pour les cyclistes ont été construites en ville.",
    ],
];

fn fill(template: &str, name: &str, place: &str, num: usize) -> String {
    template.replace("{name}", name).replace("{place}", place).replace("{num}", &num.to_string())
}

fn lang_index(lang: &str) -> usize {
    match lang {
        "lb" => 0,
        "en" => 1,
        _ => 2,
    }
}

/// Planted news collections with their answer keys.
///
/// `lb` holds 50 articles with a translated counterpart (25 in `en`, 25 in
/// `fr`, published two hours later) plus unpaired articles; each pair shares
/// five translated sentences and has two unrelated filler sentences per side.
/// `mono_lb` holds pairs of Luxembourgish articles whose sentences reword
/// each other. `concepts` maps every planted text (bodies and sentences) to
/// a shared key, so a mock provider embeds counterparts identically.
#[derive(Debug, Clone)]
pub struct PlantedWorld {
    pub lb: Vec<Document>,
    pub en: Vec<Document>,
    pub fr: Vec<Document>,
    pub mono_lb: Vec<Document>,
    pub concepts: BTreeMap<String, String>,
    /// `(lb sentence, en/fr sentence)` of every planted translation.
    pub parallel_key: BTreeSet<(String, String)>,
    /// Unordered planted paraphrase pairs, stored with the smaller text first.
    pub paraphrase_key: BTreeSet<(String, String)>,
    /// Planted article pairs `(lb id, en/fr id)`.
    pub article_key: BTreeSet<(String, String)>,
}

impl PlantedWorld {
    pub fn concept_map(&self) -> HashMap<String, String> {
        self.concepts.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

struct Sentences {
    next_num: usize,
}

impl Sentences {
    fn num(&mut self) -> usize {
        self.next_num += 7;
        self.next_num
    }
}

pub fn planted_world() -> PlantedWorld {
    let mut w = PlantedWorld {
        lb: Vec::new(),
        en: Vec::new(),
        fr: Vec::new(),
        mono_lb: Vec::new(),
        concepts: BTreeMap::new(),
        parallel_key: BTreeSet::new(),
        paraphrase_key: BTreeSet::new(),
        article_key: BTreeSet::new(),
    };
    let mut nums = Sentences { next_num: 100 };
    let filler = |lang: &str, i: usize, k: usize, num: usize| {
        fill(FILLER[lang_index(lang)][k % 2], NAMES[(i + k) % 8], PLACES[(i * 3 + k) % 8], num)
    };

    for i in 0..PLANTED_ARTICLES {
        let tgt_lang = if i % 2 == 0 { "en" } else { "fr" };
        let t = EPOCH + i as i64 * 3 * DAY;
        let mut lb_sents = Vec::new();
        let mut tgt_sents = Vec::new();
        for j in 0..PLANTED_SENTENCES {
            let template = PARALLEL[(i + j) % PARALLEL.len()];
            let (name, place, num) = (NAMES[(i + 2 * j) % 8], PLACES[(i + j) % 8], nums.num());
            let lb = fill(template[0], name, place, num);
            let tgt = fill(template[lang_index(tgt_lang)], name, place, num);
            let key = format!("sent-{i:02}-{j}");
            w.concepts.insert(lb.clone(), key.clone());
            w.concepts.insert(tgt.clone(), key);
            w.parallel_key.insert((lb.clone(), tgt.clone()));
            lb_sents.push(lb);
            tgt_sents.push(tgt);
        }
        // fillers go second and last so planted sentences are not contiguous
        lb_sents.insert(1, filler("lb", i, 0, nums.num()));
        lb_sents.push(filler("lb", i, 1, nums.num()));
        tgt_sents.insert(2, filler(tgt_lang, i, 0, nums.num()));
        tgt_sents.push(filler(tgt_lang, i, 1, nums.num()));

        let lb_doc = Document::new(format!("lb-{i:03}"), "lb", t, lb_sents.join(" "));
        let tgt_doc = Document::new(format!("{tgt_lang}-{i:03}"), tgt_lang, t + 2 * HOUR, tgt_sents.join(" "));
        let key = format!("article-{i:02}");
        w.concepts.insert(lb_doc.body.clone(), key.clone());
        w.concepts.insert(tgt_doc.body.clone(), key);
        w.article_key.insert((lb_doc.id.clone(), tgt_doc.id.clone()));
        w.lb.push(lb_doc);
        if tgt_lang == "en" {
            w.en.push(tgt_doc);
        } else {
            w.fr.push(tgt_doc);
        }
    }

    // Unpaired articles, some published inside another article's window.
    for i in 0..10 {
        let t = EPOCH + (i as i64 * 5 + 1) * DAY + 5 * HOUR;
        for lang in ["lb", "en", "fr"] {
            let body: Vec<String> = (0..4).map(|k| filler(lang, i + 11, k, nums.num())).collect();
            let doc = Document::new(format!("{lang}-x{i:02}"), lang, t, body.join(" "));
            match lang {
                "lb" => w.lb.push(doc),
                "en" => w.en.push(doc),
                _ => w.fr.push(doc),
            }
        }
    }

    // Paraphrase pairs within Luxembourgish.
    for i in 0..10 {
        let t = EPOCH + i as i64 * 4 * DAY;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for j in 0..3 {
            let k = (i + j) % PARALLEL.len();
            let (name, place, num) = (NAMES[(i + j) % 8], PLACES[(2 * i + j) % 8], nums.num());
            let first = fill(PARALLEL[k][0], name, place, num);
            let second = fill(LB_REWORDED[k], name, place, num);
            let key = format!("para-{i:02}-{j}");
            w.concepts.insert(first.clone(), key.clone());
            w.concepts.insert(second.clone(), key);
            let pair = if first < second { (first.clone(), second.clone()) } else { (second.clone(), first.clone()) };
            w.paraphrase_key.insert(pair);
            a.push(first);
            b.push(second);
        }
        a.push(filler("lb", i + 20, 0, nums.num()));
        b.push(filler("lb", i + 20, 1, nums.num()));
        let da = Document::new(format!("lbm-{i:02}a"), "lb", t, a.join(" "));
        let db = Document::new(format!("lbm-{i:02}b"), "lb", t + 3 * HOUR, b.join(" "));
        let key = format!("mono-{i:02}");
        w.concepts.insert(da.body.clone(), key.clone());
        w.concepts.insert(db.body.clone(), key);
        w.mono_lb.push(da);
        w.mono_lb.push(db);
    }
    w
}

/// `n` sentences translated into lb, en and fr (in that order), drawn from
/// the planted templates with numbers disjoint from [`planted_world`].
pub fn parallel_sentences(n: usize) -> Vec<[String; 3]> {
    (0..n)
        .map(|i| {
            let (name, place, num) = (NAMES[i % 8], PLACES[(i / 8 + i) % 8], 10_000 + 3 * i);
            let t = PARALLEL[i % PARALLEL.len()];
            [fill(t[0], name, place, num), fill(t[1], name, place, num), fill(t[2], name, place, num)]
        })
        .collect()
}

/// `n` standard-normal values.
pub fn gaussian(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn unit_gaussian(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        if let Ok(v) = normalize_slice(&gaussian(n, rng)) {
            return v.into_inner();
        }
    }
}

/// Orthonormalizes the columns of a row-major `m x m` matrix (modified
/// Gram-Schmidt) and returns the orthogonal factor, row-major.
fn orthonormal_columns(mut a: Vec<f64>, m: usize) -> Vec<f64> {
    for j in 0..m {
        for p in 0..j {
            let d: f64 = (0..m).map(|r| a[r * m + j] * a[r * m + p]).sum();
            for r in 0..m {
                a[r * m + j] -= d * a[r * m + p];
            }
        }
        let n = (0..m).map(|r| a[r * m + j].powi(2)).sum::<f64>().sqrt();
        for r in 0..m {
            a[r * m + j] /= n;
        }
    }
    a
}

/// Haar-ish random orthogonal matrix, row-major.
pub fn random_orthogonal(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    orthonormal_columns(gaussian(m * m, rng), m)
}

/// Orthogonal matrix close to the identity: orthonormalized `I + S` for a
/// random skew-symmetric `S` with entries of size `scale`.
pub fn near_identity_rotation(m: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g = gaussian(m * m, rng);
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] = scale * (g[i * m + j] - g[j * m + i]) / std::f64::consts::SQRT_2;
        }
        a[i * m + i] += 1.0;
    }
    orthonormal_columns(a, m)
}

/// Row-major product `a (p x q) * b (q x r)`.
pub fn matmul(a: &[f64], b: &[f64], p: usize, q: usize, r: usize) -> Vec<f64> {
    let mut out = vec![0.0; p * r];
    for i in 0..p {
        for k in 0..q {
            let x = a[i * q + k];
            for j in 0..r {
                out[i * r + j] += x * b[k * r + j];
            }
        }
    }
    out
}

/// `M v` for row-major `M`.
pub fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    m.chunks_exact(v.len()).map(|row| dot(row, v)).collect()
}

fn matrix(dim: usize, rows: Vec<Vec<f64>>) -> Result<EmbeddingMatrix> {
    let ids = (0..rows.len()).map(|i| i.to_string()).collect();
    EmbeddingMatrix::from_flat(dim, rows.concat(), ids)
}

/// Row-aligned source/target vectors related by one fixed rotation.
#[derive(Debug, Clone)]
pub struct RotatedPairs {
    pub train_src: EmbeddingMatrix,
    pub train_tgt: EmbeddingMatrix,
    pub heldout_src: EmbeddingMatrix,
    pub heldout_tgt: EmbeddingMatrix,
    pub rotation: Vec<f64>,
}

/// Sources are random unit vectors on the first half of the coordinates;
/// each target is `normalize(R s + noise * u)` for a fixed random rotation
/// `R` of the whole space and a random unit `u`.
pub fn rotated_pairs(n_train: usize, n_heldout: usize, dim: usize, noise: f64, seed: u64) -> Result<RotatedPairs> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotation = random_orthogonal(dim, &mut rng);
    let half = dim / 2;
    let make = |n: usize, rng: &mut ChaCha8Rng| -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
        let mut src = Vec::with_capacity(n);
        let mut tgt = Vec::with_capacity(n);
        for _ in 0..n {
            let mut s = unit_gaussian(half, rng);
            s.resize(dim, 0.0);
            let mut t = mat_vec(&rotation, &s);
            let u = unit_gaussian(dim, rng);
            t.iter_mut().zip(&u).for_each(|(x, e)| *x += noise * e);
            tgt.push(normalize_slice(&t)?.into_inner());
            src.push(s);
        }
        Ok((matrix(dim, src)?, matrix(dim, tgt)?))
    };
    let (train_src, train_tgt) = make(n_train, &mut rng)?;
    let (heldout_src, heldout_tgt) = make(n_heldout, &mut rng)?;
    Ok(RotatedPairs { train_src, train_tgt, heldout_src, heldout_tgt, rotation })
}

/// Four languages over `k` shared content dimensions. Each language maps
/// content through its family rotation (one for `H1`/`H2`, another for
/// `L1`/`L2`) composed with a small language-specific rotation. High-resource
/// rows add weak noise on a second block of `k` coordinates, low-resource
/// rows add strong noise on a third block.
pub struct FourLanguageWorld {
    pub content_dim: usize,
    rotations: BTreeMap<String, Vec<f64>>,
    hr_noise: f64,
    lr_noise: f64,
    rng: ChaCha8Rng,
}

pub const FOUR_LANGUAGES: [&str; 4] = ["H1", "H2", "L1", "L2"];

impl FourLanguageWorld {
    pub fn new(content_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = content_dim;
        let rh = random_orthogonal(k, &mut rng);
        let rl = random_orthogonal(k, &mut rng);
        let mut rotations = BTreeMap::new();
        for lang in FOUR_LANGUAGES {
            let family = if lang.starts_with('H') { &rh } else { &rl };
            let own = near_identity_rotation(k, 0.05, &mut rng);
            rotations.insert(lang.to_string(), matmul(family, &own, k, k, k));
        }
        Self { content_dim, rotations, hr_noise: 0.3, lr_noise: 1.0, rng }
    }

    pub fn dim(&self) -> usize {
        3 * self.content_dim
    }

    /// Random unit content vectors.
    pub fn content(&mut self, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|_| unit_gaussian(self.content_dim, &mut self.rng)).collect()
    }

    /// Unit-normalized embeddings of `content` in `lang`.
    pub fn embed(&mut self, lang: &str, content: &[Vec<f64>]) -> Result<EmbeddingMatrix> {
        let k = self.content_dim;
        let rot = self.rotations[lang].clone();
        let high = lang.starts_with('H');
        let mut rows = Vec::with_capacity(content.len());
        for c in content {
            let mut x = vec![0.0; 3 * k];
            x[..k].copy_from_slice(&mat_vec(&rot, c));
            let junk = unit_gaussian(k, &mut self.rng);
            let (offset, scale) = if high { (k, self.hr_noise) } else { (2 * k, self.lr_noise) };
            x[offset..offset + k].iter_mut().zip(&junk).for_each(|(v, j)| *v = scale * j);
            rows.push(normalize_slice(&x)?.into_inner());
        }
        matrix(3 * k, rows)
    }
}

/// Deterministic shuffle helper for fixtures.
pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut out = items.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}
