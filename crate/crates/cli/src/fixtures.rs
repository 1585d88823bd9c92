//! The synthetic fixture set shipped under `fixtures/`. Regenerate with
//! `bitextkit synth-fixtures --out crates/cli/fixtures`.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use bitextkit_core::corpus::write_documents;
use bitextkit_core::evalsuite::{TemplateSet, LB_LABELS};
use bitextkit_core::miner::{write_benchmark, BenchmarkItem};
use bitextkit_core::providers::{
    generate_adversarial, mock_embed, write_concept_tsv, write_vector_tsv, MockSpec, OfflineTransform, VectorRecord,
};
use bitextkit_core::synth::{parallel_sentences, planted_world};
use bitextkit_core::Result;

pub const CKA_ROWS: usize = 40;

const PIPELINE_TOML: &str = r#"# Planted pipeline run: every stage uses the noise-free mock embedder,
# which gives translated sentences identical vectors via concepts.tsv.
seed = 42

[providers.article]
concept_map = "concepts.tsv"

[providers.sentence]
concept_map = "concepts.tsv"

[providers.eval]
concept_map = "concepts.tsv"

[classifier]
epochs = 100

[groups]
hr = ["en", "fr"]
lr = ["lb"]
"#;

// Topic words per language, in LB_LABELS order.
const TOPICS: [[&str; 7]; 3] = [
    ["Technologie", "Reesen", "Politik", "Gesondheet", "Ennerhalung", "Geographie", "Sport"],
    ["technology", "travel", "politics", "health", "entertainment", "geography", "sport"],
    ["technologie", "voyages", "politique", "santé", "divertissement", "géographie", "sport"],
];

fn topic_sentence(lang: usize, topic: usize, i: usize) -> String {
    let word = TOPICS[lang][topic];
    match lang {
        0 => format!("Den Artikel Nummer {i} beschäftegt sech mam Thema {word}."),
        1 => format!("Article number {i} deals with the topic of {word}."),
        _ => format!("L'article numéro {i} traite du thème {word}."),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, content)?;
    Ok(())
}

fn labeled_tsv(rows: &[(String, usize)], labels: &[&str]) -> String {
    let mut s = String::from("text\tlabel\n");
    for (text, label) in rows {
        s.push_str(&format!("{text}\t{}\n", labels[*label]));
    }
    s
}

pub fn write_fixtures(out: &Path) -> Result<()> {
    let world = planted_world();
    let mut concepts: HashMap<String, String> = world.concept_map();

    for (name, docs) in [("lb", &world.lb), ("en", &world.en), ("fr", &world.fr), ("mono_lb", &world.mono_lb)] {
        let mut buf = Vec::new();
        write_documents(&mut buf, docs, None)?;
        std::fs::create_dir_all(out.join("raw"))?;
        std::fs::write(out.join("raw").join(format!("{name}.jsonl")), buf)?;
    }
    write_file(&out.join("pipeline.toml"), PIPELINE_TOML)?;

    // Zero-shot classification: filled templates and documents of a topic
    // share a concept.
    let templates = TemplateSet::luxembourgish();
    let mut zsc_rows = Vec::new();
    for (k, label) in LB_LABELS.iter().enumerate() {
        for t in 0..templates.templates().len() {
            concepts.insert(templates.fill(t, label), format!("zsc-{k}"));
        }
        for i in 0..3 {
            let text = topic_sentence(0, k, 100 + 3 * k + i);
            concepts.insert(text.clone(), format!("zsc-{k}"));
            zsc_rows.push((text, k));
        }
    }
    write_file(&out.join("zsc/docs.tsv"), &labeled_tsv(&zsc_rows, &LB_LABELS))?;
    write_file(&out.join("zsc/labels.txt"), &(LB_LABELS.join("\n") + "\n"))?;

    // Transfer: sentences of one topic share a concept across languages.
    let langs = ["lb", "en", "fr"];
    let mut n = 0;
    let mut split_rows = |lang: usize, per_class: usize| {
        let mut rows = Vec::new();
        for _ in 0..per_class {
            for k in 0..LB_LABELS.len() {
                n += 1;
                let text = topic_sentence(lang, k, 1000 + n);
                concepts.insert(text.clone(), format!("topic-{k}"));
                rows.push((text, k));
            }
        }
        rows
    };
    let mut transfer_files = Vec::new();
    for (li, lang) in langs.iter().enumerate() {
        transfer_files.push((format!("{lang}.train.tsv"), split_rows(li, 3)));
        transfer_files.push((format!("{lang}.dev.tsv"), split_rows(li, 1)));
    }
    transfer_files.push(("lb.test.tsv".to_string(), split_rows(0, 2)));
    for (name, rows) in &transfer_files {
        write_file(&out.join("transfer").join(name), &labeled_tsv(rows, &LB_LABELS))?;
    }
    write_file(&out.join("transfer/labels.txt"), &(LB_LABELS.join("\n") + "\n"))?;

    // Paraphrase: three planted triples whose negatives have no concept.
    let generator = OfflineTransform::for_language("lb");
    let mut items = Vec::new();
    for (a, b) in world.paraphrase_key.iter().take(3) {
        let negative = generate_adversarial(a, b, &generator)?;
        items.push(BenchmarkItem { anchor: a.clone(), paraphrase: b.clone(), not_paraphrase: negative.text });
    }
    let mut buf = Vec::new();
    write_benchmark(&mut buf, &items, None)?;
    write_file(&out.join("paraphrase/triples.jsonl"), &String::from_utf8(buf).expect("utf-8"))?;

    // CKA: row-aligned translations and two identical vector files.
    let rows = parallel_sentences(CKA_ROWS);
    for (li, lang) in langs.iter().enumerate() {
        let mut text = String::new();
        for (i, r) in rows.iter().enumerate() {
            concepts.insert(r[li].clone(), format!("cka-{i:02}"));
            text.push_str(&r[li]);
            text.push('\n');
        }
        write_file(&out.join("cka").join(format!("{lang}.txt")), &text)?;
    }
    let lb: Vec<String> = rows.iter().map(|r| r[0].clone()).collect();
    let m = mock_embed(&lb, &MockSpec::new(32, 0.0))?;
    let records: Vec<VectorRecord> = lb
        .iter()
        .enumerate()
        .map(|(i, t)| VectorRecord { id: format!("s{i:03}"), text: t.clone(), vector: m.row(i).iter().map(|&v| v as f32).collect() })
        .collect();
    for name in ["vectors_a.tsv", "vectors_b.tsv"] {
        let mut buf = Vec::new();
        write_vector_tsv(&mut buf, &records, None)?;
        write_file(&out.join("cka").join(name), &String::from_utf8(buf).expect("utf-8"))?;
    }

    let mut buf = Vec::new();
    write_concept_tsv(&mut buf, &concepts, None)?;
    let mut f = std::fs::File::create(out.join("concepts.tsv"))?;
    f.write_all(&buf)?;
    Ok(())
}
