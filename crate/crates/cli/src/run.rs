use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use loclin::lexicon::{dataset_from_words, Provenance};
use loclin::mapper::{load_map, save_map, train};
use loclin::neighborhoods::write_growth_tsv;
use loclin::seed::derive_seed;
use loclin::*;
use serde_json::json;

use crate::args::*;

/// A problem with how the tool was invoked rather than with the data.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// Anchor words can hold characters that do not belong in file names.
fn file_safe(word: &str) -> String {
    word.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn load_space(path: &Path, limit: Option<usize>, normalize: bool) -> Result<EmbeddingSpace> {
    let (space, stats) = load_embeddings(path, limit, normalize)?;
    eprintln!(
        "{}: {} words, dim {} ({} malformed, {} duplicate, {} zero lines skipped)",
        path.display(),
        stats.kept,
        space.dim(),
        stats.malformed,
        stats.duplicates,
        stats.zero_vectors
    );
    Ok(space)
}

fn load_spaces(a: &SpaceArgs) -> Result<(EmbeddingSpace, EmbeddingSpace)> {
    let normalize = !a.no_normalize;
    Ok((
        load_space(&a.src_emb, a.max_vocab, normalize)?,
        load_space(&a.tgt_emb, a.max_vocab, normalize)?,
    ))
}

fn load_lex(path: &Path) -> Result<BilingualLexicon> {
    let (lex, stats) = load_lexicon(path)?;
    eprintln!(
        "{}: {} pairs over {} source words ({} malformed, {} duplicate lines)",
        path.display(),
        stats.pairs,
        lex.len(),
        stats.malformed,
        stats.duplicates
    );
    Ok(lex)
}

/// Resolves inputs to absolute paths, writes the snapshot, then runs.
pub fn execute(mut cmd: Command) -> Result<()> {
    if let Command::Rerun(r) = cmd {
        let text = fs::read_to_string(&r.config)
            .map_err(|e| usage(format!("cannot read {}: {e}", r.config.display())))?;
        let mut recorded: Command = serde_json::from_str(&text).map_err(|e| {
            usage(format!(
                "{} is not a config snapshot: {e}",
                r.config.display()
            ))
        })?;
        if let Some(out) = r.out {
            recorded.set_out(out);
        }
        return execute(recorded);
    }
    for path in cmd.inputs_mut() {
        *path = fs::canonicalize(&*path)
            .map_err(|e| usage(format!("input {}: {e}", path.display())))?;
    }
    let out = cmd
        .out()
        .cloned()
        .expect("every runnable command has an output directory");
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_json(&out.join("config.json"), &cmd)?;
    match cmd {
        Command::Neighborhood(a) => neighborhood(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Experiment(a) => experiment(&a),
        Command::Translate(a) => translate(&a),
        Command::Synth(a) => synth(&a),
        Command::Diagnose(a) => diagnose(&a),
        Command::Rerun(_) => unreachable!(),
    }
}

fn neighborhood(a: &NeighborhoodArgs) -> Result<()> {
    let src = load_space(&a.src_emb, a.max_vocab, !a.no_normalize)?;
    for anchor in &a.anchors {
        let profile = growth_profile(&src, anchor, &a.thresholds)?;
        let name = file_safe(anchor);
        write_with(&a.out.join(format!("growth_{name}.tsv")), |w| {
            write_growth_tsv(w, &profile)
        })?;
        for (s, n) in &profile {
            println!("{anchor}\t{s}\t{n}");
        }
        if let Some(s) = a.s {
            let hood = build_neighborhood(&src, anchor, s)?;
            write_with(&a.out.join(format!("members_{name}.tsv")), |w| {
                writeln!(w, "word\tcosine")?;
                for (word, c) in &hood.members {
                    writeln!(w, "{word}\t{c:.6}")?;
                }
                Ok(())
            })?;
        }
    }
    Ok(())
}

fn all_pairs(
    lex: &BilingualLexicon,
    src: &EmbeddingSpace,
    tgt: &EmbeddingSpace,
) -> Result<TranslationDataset> {
    let (ds, stats) = dataset_from_words(
        lex.iter().map(|(s, _)| s),
        lex,
        src,
        tgt,
        Provenance::Global,
    );
    eprintln!(
        "lexicon coverage: {} usable of {} ({} source, {} target words missing)",
        stats.kept, stats.candidates, stats.not_in_source_vocab, stats.no_target_in_vocab
    );
    if ds.is_empty() {
        return Err(
            Error::EmptyDataset("no lexicon pair has both words in vocabulary".into()).into(),
        );
    }
    Ok(ds)
}

fn train_cmd(a: &TrainArgs) -> Result<()> {
    let (src, tgt) = load_spaces(&a.spaces)?;
    let lex = load_lex(&a.lexicon)?;
    let cfg = a.train.config();
    let all = all_pairs(&lex, &src, &tgt)?;
    let (train_set, test_set) = if a.test_size > 0 {
        let (tr, te) = split_dataset(&all, a.test_size, derive_seed(a.train.seed, 1))?;
        (tr, Some(te))
    } else {
        (all, None)
    };
    let global = train(a.train.trainer, &train_set, &tgt, &cfg)?;
    write_with(&a.out.join("train.tsv"), |w| train_set.write_tsv(w))?;
    if let Some(te) = &test_set {
        write_with(&a.out.join("test.tsv"), |w| te.write_tsv(w))?;
    }

    let mut summary = json!({
        "train_size": train_set.len(),
        "final_loss": global.provenance.final_loss,
    });
    let atlas = match &a.anchors {
        None => {
            save_map(&global, a.out.join("map.txt"))?;
            None
        }
        Some(anchors) => {
            let train_words: HashSet<&str> = train_set.sources().collect();
            let mut entries = Vec::new();
            let mut local = Vec::new();
            for (i, anchor) in anchors.iter().enumerate() {
                let hood = build_neighborhood(&src, anchor, a.s)?;
                let words = hood.words().filter(|w| train_words.contains(w));
                let provenance = Provenance::Neighborhood {
                    anchor: anchor.clone(),
                    threshold: a.s,
                };
                let (ds, _) = dataset_from_words(words, &lex, &src, &tgt, provenance);
                if ds.len() < a.min_train.max(1) {
                    eprintln!(
                        "warning: skipped anchor {anchor:?}: {} training pairs",
                        ds.len()
                    );
                    continue;
                }
                let tc = TrainConfig {
                    seed: derive_seed(a.train.seed, 0x10_000 + i as u64),
                    ..cfg.clone()
                };
                let map = train(a.train.trainer, &ds, &tgt, &tc)?.with_anchor(anchor);
                local.push(json!({ "anchor": anchor, "train_size": ds.len() }));
                entries.push(AtlasEntry {
                    anchor: anchor.clone(),
                    anchor_vector: hood.anchor_vector,
                    map,
                });
            }
            summary["local"] = json!(local);
            let atlas = MapAtlas::new(entries, Some(global.clone()))?;
            atlas.save(a.out.join("atlas"))?;
            Some(atlas)
        }
    };
    if let Some(te) = &test_set {
        summary["test_size"] = json!(te.len());
        summary["global_p1"] = json!(precision_at_k(&global, te, &tgt, 1)?);
        summary[format!("global_p{}", a.k)] = json!(precision_at_k(&global, te, &tgt, a.k)?);
        if let Some(atlas) = &atlas {
            summary["atlas_p1"] = json!(atlas_precision_at_k(atlas, te, &tgt, 1)?);
            summary[format!("atlas_p{}", a.k)] = json!(atlas_precision_at_k(atlas, te, &tgt, a.k)?);
        }
    }
    println!("{}", serde_json::to_string(&summary)?);
    write_json(&a.out.join("train.json"), &summary)
}

fn write_report(out: &Path, report: &ExperimentReport) -> Result<()> {
    write_with(&out.join("report.tsv"), |w| report.write_tsv(w))?;
    write_with(&out.join("report.jsonl"), |w| report.write_jsonl(w))?;
    write_with(&out.join("scatter.tsv"), |w| report.write_scatter(w))?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(())
}

fn summary_json(report: &ExperimentReport) -> serde_json::Value {
    json!({
        "rows": report.rows.len(),
        "skipped": report.skipped,
        "global_train_size": report.global_train_size,
        "pearson_map_cosine_vs_acc_m_x0": report.pearson_simvacc,
        "spearman_map_cosine_vs_acc_m_x0": report.spearman_simvacc,
        "spearman_anchor_cosine_vs_map_cosine": report.spearman_anchor_map,
        "warnings": report.warnings,
    })
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let (src, tgt) = load_spaces(&a.spaces)?;
    let lex = load_lex(&a.lexicon)?;
    let cfg = ExperimentConfig {
        anchors: a.anchors.clone(),
        threshold: a.s,
        trainer: a.train.trainer,
        train: a.train.config(),
        test_size: a.test_size,
        seed: a.train.seed,
        k: a.k,
        min_train: a.min_train,
        split_mode: a.split.into(),
        single_reference: a.single_ref,
        jobs: a.jobs,
    };
    let run = run_experiment(&src, &tgt, &lex, &cfg)?;
    write_report(&a.out, &run.report)?;
    write_json(&a.out.join("summary.json"), &summary_json(&run.report))?;

    let data = a.out.join("datasets");
    fs::create_dir_all(&data).with_context(|| format!("creating {}", data.display()))?;
    for (i, (entry, (tr, te))) in run.local.iter().zip(&run.splits).enumerate() {
        let stem = format!("{i:02}_{}", file_safe(&entry.anchor));
        write_with(&data.join(format!("{stem}.train.tsv")), |w| tr.write_tsv(w))?;
        write_with(&data.join(format!("{stem}.test.tsv")), |w| te.write_tsv(w))?;
    }
    write_with(&data.join("global.train.tsv"), |w| {
        run.global_train.write_tsv(w)
    })?;
    MapAtlas::new(run.local, Some(run.global))?.save(a.out.join("atlas"))?;

    run.report.write_tsv(std::io::stdout().lock())?;
    Ok(())
}

fn translate(a: &TranslateArgs) -> Result<()> {
    let (src, tgt) = load_spaces(&a.spaces)?;
    let lex = a.lexicon.as_deref().map(load_lex).transpose()?;
    let atlas = match (&a.map, &a.atlas) {
        (Some(m), None) => MapAtlas::new(vec![], Some(load_map(m)?))?,
        (None, Some(dir)) => MapAtlas::load(dir, &src)?,
        _ => return Err(usage("give exactly one of --map and --atlas")),
    };
    let words: Vec<String> = if let Some(ws) = &a.words {
        ws.clone()
    } else if let Some(file) = &a.words_file {
        fs::read_to_string(file)
            .with_context(|| format!("reading {}", file.display()))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_owned)
            .collect()
    } else if let Some(lex) = &lex {
        lex.iter().map(|(s, _)| s.to_owned()).collect()
    } else {
        return Err(usage(
            "nothing to translate: give --words, --words-file or --lexicon",
        ));
    };

    let (mut scored, mut hits1, mut hitsk, mut unknown) = (0usize, 0usize, 0usize, 0usize);
    write_with(&a.out.join("translations.tsv"), |w| {
        writeln!(w, "source\tmap\trank\ttarget\tcosine")?;
        for word in &words {
            if !src.contains(word) {
                unknown += 1;
                continue;
            }
            let t = piecewise_translate(&atlas, word, &src, &tgt, a.k)
                .map_err(|e| std::io::Error::other(e.to_string()))?;
            for (rank, h) in t.hits.iter().enumerate() {
                writeln!(
                    w,
                    "{word}\t{}\t{}\t{}\t{:.6}",
                    t.choice.label(),
                    rank + 1,
                    h.word,
                    h.score
                )?;
            }
            let gold = lex.as_ref().and_then(|l| l.targets(word));
            if let Some(gold) = gold.filter(|g| g.iter().any(|t| tgt.contains(t))) {
                scored += 1;
                let hit = |n: usize| t.hits.iter().take(n).any(|h| gold.contains(&h.word));
                hits1 += hit(1) as usize;
                hitsk += hit(a.k) as usize;
            }
        }
        Ok(())
    })?;
    if unknown > 0 {
        eprintln!("warning: {unknown} words not in the source vocabulary");
    }
    let mut summary = json!({ "words": words.len() - unknown, "unknown": unknown });
    if scored > 0 {
        let pct = |h: usize| 100.0 * h as f64 / scored as f64;
        summary["scored"] = json!(scored);
        summary["p1"] = json!(pct(hits1));
        summary[format!("p{}", a.k)] = json!(pct(hitsk));
    }
    println!("{}", serde_json::to_string(&summary)?);
    write_json(&a.out.join("summary.json"), &summary)
}

fn synth(a: &SynthArgs) -> Result<()> {
    let cfg = a.world.config(a.seed);
    let world = generate_world(&cfg)?;
    let out = &a.out;
    loclin::embeddings::write_embeddings(&world.src, out.join("src.vec"))?;
    loclin::embeddings::write_embeddings(&world.tgt, out.join("tgt.vec"))?;
    write_with(&out.join("src-tgt.txt"), |w| world.lexicon.write(w))?;
    let anchors = world.cluster_anchors();
    write_with(&out.join("anchors.txt"), |w| {
        writeln!(w, "{}", anchors.join(","))
    })?;
    write_with(&out.join("regions.tsv"), |w| {
        writeln!(w, "word\tregion")?;
        for (word, r) in world.src.words().iter().zip(&world.region_labels) {
            writeln!(w, "{word}\t{r}")?;
        }
        Ok(())
    })?;
    save_map(&world.global_map(), out.join("generator.txt"))?;
    write_json(&out.join("world.json"), &cfg)?;
    println!(
        "{} word pairs, dim {}, anchors {}",
        world.src.len(),
        world.src.dim(),
        anchors.join(",")
    );
    Ok(())
}

fn diagnose(a: &DiagnoseArgs) -> Result<()> {
    let world = generate_world(&a.world.config(a.train.seed))?;
    let anchors = a.anchors.clone().unwrap_or_else(|| world.cluster_anchors());
    let cfg = ExperimentConfig {
        train: a.train.config(),
        test_size: a.test_size,
        seed: a.train.seed,
        k: a.k,
        min_train: a.min_train,
        jobs: a.jobs,
        ..ExperimentConfig::default()
    };
    let r = locality_diagnostic(&world, &anchors, a.s, a.train.trainer, &cfg)?;
    write_report(&a.out, &r.experiment)?;
    write_with(&a.out.join("pairs.tsv"), |w| r.write_pairs_tsv(w))?;
    let mut summary = summary_json(&r.experiment);
    summary["min_pair_map_cosine"] = json!(r.min_map_cosine);
    summary["spearman_pair_anchor_cosine_vs_map_cosine"] = json!(r.spearman_pairs);
    println!("{}", serde_json::to_string(&summary)?);
    write_json(&a.out.join("summary.json"), &summary)
}

/// Error category and exit code: 2 for invocation problems, 1 otherwise.
pub fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return ("usage", 2);
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            let code = if matches!(e, Error::InvalidArgument(_)) {
                2
            } else {
                1
            };
            return (e.category(), code);
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return ("io", 1);
        }
    }
    ("runtime", 1)
}

pub fn one_line(err: &anyhow::Error) -> String {
    format!("{err:#}").replace(['\n', '\r'], " ")
}
