use std::fs;
use std::path::{Path, PathBuf};

use texret_core::classify::{cross_validate, load_model, save_model};
use texret_core::evaluation::{compare_schemes, evaluate as run_evaluation, reports_csv, EvalConfig, Scheme};
use texret_core::features::{build_index, image_features};
use texret_core::ingest::{build_dataset, generate_synthetic_dataset, load_image};
use texret_core::retrieval::{query_ml, query_traditional};
use texret_core::transform::{dump_decomposition, rct_plus};
use texret_core::{
    ClassifierSpec, Dataset, DatasetManifest, Error, FeatureMethod, LabeledIndex, Metric, RctPlusConfig, Result,
    RetrievalParams, Similarity, SvmParams,
};

use crate::args::{
    ClassifierArgs, DecompArgs, DecomposeArgs, EvaluateArgs, IndexArgs, IngestArgs, QueryArgs, TrainArgs,
};
use crate::output::{atomic_file, has_extension, replace_dir, write_file};

const DATASET_LISTING: &str = "dataset.tsv";

fn decomp_config(a: &DecompArgs) -> Result<RctPlusConfig> {
    let directions = match a.directions[..] {
        [d] => vec![d; a.levels],
        _ => a.directions.clone(),
    };
    let config = RctPlusConfig {
        levels: a.levels,
        directions,
        sigma0: a.sigma0,
        critically_sampled: a.sampled,
    };
    config.validate()?;
    Ok(config)
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest = if path.is_dir() {
        path.join(DATASET_LISTING)
    } else {
        path.to_path_buf()
    };
    build_dataset(&DatasetManifest::read(&manifest)?)
}

/// `<classes>x<tiles>@<size>`.
fn parse_synthetic(spec: &str) -> Result<(usize, usize, usize)> {
    let bad = || Error::Config(format!("synthetic spec {spec:?} must look like 8x16@128"));
    let (counts, size) = spec.split_once('@').ok_or_else(bad)?;
    let (classes, tiles) = counts.split_once('x').ok_or_else(bad)?;
    let n = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    Ok((n(classes)?, n(tiles)?, n(size)?))
}

pub fn ingest(a: &IngestArgs) -> Result<()> {
    let dataset = match (&a.manifest, &a.synthetic) {
        (Some(m), _) => build_dataset(&DatasetManifest::read(m)?)?,
        (None, Some(spec)) => {
            let (classes, tiles, size) = parse_synthetic(spec)?;
            generate_synthetic_dataset(classes, tiles, size, a.seed)?
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let ours = |p: &Path| has_extension(p, "pgm") || p.file_name().is_some_and(|n| n == DATASET_LISTING);
    replace_dir(&a.out, ours, |tmp| dataset.write_to_dir(tmp).map(|_| ()))?;
    println!(
        "{} images in {} classes written to {}",
        dataset.len(),
        dataset.classes.len(),
        a.out.display()
    );
    Ok(())
}

pub fn index(a: &IndexArgs) -> Result<()> {
    let method: FeatureMethod = a.method.parse()?;
    let config = decomp_config(&a.decomp)?;
    let dataset = load_dataset(&a.dataset)?;
    let index = build_index(&dataset, &config, method)?;
    write_file(&a.out, &index.to_text()?)?;
    println!(
        "{} entries x {} values ({method}) written to {}",
        index.len(),
        index.entries.first().map_or(0, |e| e.features.len()),
        a.out.display()
    );
    Ok(())
}

fn similarity(metric: Option<&str>, no_approx_term: bool, method: FeatureMethod) -> Result<Similarity> {
    let metric = match metric {
        Some(m) => m.parse()?,
        None => Metric::for_method(method),
    };
    metric.check_method(method)?;
    Ok(Similarity {
        metric,
        approx_term: !no_approx_term,
    })
}

fn classifier_spec(algo: &str, a: &ClassifierArgs, method: FeatureMethod, seed: u64) -> Result<ClassifierSpec> {
    match algo.to_ascii_lowercase().as_str() {
        "knn" => Ok(ClassifierSpec::Knn {
            k: a.k,
            similarity: similarity(a.metric.as_deref(), a.no_approx_term, method)?,
        }),
        "svm" => {
            let params = SvmParams {
                c: a.c,
                epochs: a.epochs,
                seed,
            };
            params.validate()?;
            Ok(ClassifierSpec::Svm(params))
        }
        _ => Err(Error::Config(format!("unknown algorithm {algo:?} (expected knn or svm)"))),
    }
}

fn cv_folds(cv: usize) -> Result<Option<usize>> {
    match cv {
        0 => Ok(None),
        1 => Err(Error::Config("cross-validation needs at least 2 folds".into())),
        n => Ok(Some(n)),
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let folds = cv_folds(a.cv)?;
    let index = LabeledIndex::load(&a.index)?;
    let spec = classifier_spec(&a.algo, &a.classifier, index.method, a.seed)?;
    if let Some(n) = folds {
        let report = cross_validate(&index, &spec, n, a.seed)?;
        println!(
            "cv_accuracy={:.4} folds={n} stratified={}",
            report.mean_accuracy, report.assignment.stratified
        );
    }
    let model = spec.train(&index)?;
    let index_path = fs::canonicalize(&a.index).map_err(|e| Error::Io {
        path: a.index.clone(),
        source: e,
    })?;
    atomic_file(&a.out, |tmp| save_model(&model, Some(&index_path), tmp))?;
    println!("model written to {}", a.out.display());
    Ok(())
}

pub fn query(a: &QueryArgs) -> Result<()> {
    let ml = match a.scheme.to_ascii_lowercase().as_str() {
        "trad" | "traditional" => false,
        "ml" => true,
        _ => return Err(Error::Config(format!("unknown scheme {:?} (expected trad or ml)", a.scheme))),
    };
    if ml && a.model.is_none() {
        return Err(Error::Config("the ml scheme needs --model".into()));
    }
    let index = LabeledIndex::load(&a.index)?;
    let (features, query_id) = match (&a.id, &a.image) {
        (Some(id), _) => {
            let e = index
                .get(id)
                .ok_or_else(|| Error::Config(format!("no image with id {id:?} in the index")))?;
            (e.features.clone(), Some(id.as_str()))
        }
        (None, Some(path)) => (image_features(&load_image(path)?, &index.config, index.method)?, None),
        (None, None) => unreachable!("clap requires a query"),
    };
    let params = RetrievalParams {
        n: a.n,
        similarity: similarity(a.metric.as_deref(), a.no_approx_term, index.method)?,
        include_self: a.include_self,
        classifier_excludes_self: false,
    };
    let result = match &a.model {
        Some(model_path) if ml => {
            let model = load_model(model_path)?;
            query_ml(&model, &index, &features, query_id, &params)?
        }
        _ => query_traditional(&index, &features, query_id, &params)?,
    };
    match &a.out {
        Some(path) => write_file(path, &result.to_text()),
        None => {
            print!("{}", result.to_text());
            Ok(())
        }
    }
}

fn parse_schemes(values: &[String]) -> Result<Vec<Scheme>> {
    let mut out = Vec::new();
    for v in values {
        match v.to_ascii_lowercase().as_str() {
            "all" => out.extend(Scheme::ALL),
            "ml" => out.extend([Scheme::KnnCbir, Scheme::SvmCbir]),
            other => out.push(other.parse()?),
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn parse_methods(values: &[String]) -> Result<Vec<FeatureMethod>> {
    let mut out = Vec::new();
    for v in values {
        if v.eq_ignore_ascii_case("all") {
            out.extend(FeatureMethod::ALL);
        } else {
            out.push(v.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut schemes = parse_schemes(&a.scheme)?;
    let compared = match &a.compare {
        None => None,
        Some(pair) => {
            if parse_schemes(&pair[..1])? != [Scheme::Traditional] {
                return Err(Error::Config("the --compare baseline must be trad".into()));
            }
            let against = parse_schemes(&pair[1..])?;
            if against.contains(&Scheme::Traditional) {
                return Err(Error::Config("compare trad against knn, svm or ml".into()));
            }
            schemes.extend(against.iter().copied().chain([Scheme::Traditional]));
            schemes.sort();
            schemes.dedup();
            Some(against)
        }
    };
    let folds = cv_folds(a.cv)?;
    let methods = parse_methods(&a.method)?;

    let indexes = match (&a.index, &a.dataset) {
        (Some(path), _) => {
            let index = LabeledIndex::load(path)?;
            let explicit = !a.method.iter().any(|m| m.eq_ignore_ascii_case("all"));
            if explicit && !methods.contains(&index.method) {
                return Err(Error::Config(format!("{} holds {} features", path.display(), index.method)));
            }
            vec![index]
        }
        (None, Some(path)) => {
            let config = decomp_config(&a.decomp)?;
            let dataset = load_dataset(path)?;
            methods
                .iter()
                .map(|&m| build_index(&dataset, &config, m))
                .collect::<Result<Vec<_>>>()?
        }
        (None, None) => unreachable!("clap requires an input"),
    };

    let mut reports = Vec::new();
    for index in &indexes {
        for &scheme in &schemes {
            let knn_similarity = similarity(a.classifier.metric.as_deref(), a.classifier.no_approx_term, index.method)?;
            let config = EvalConfig {
                scheme,
                n: a.n,
                similarity: Some(similarity(a.rank_metric.as_deref(), a.classifier.no_approx_term, index.method)?),
                knn_k: a.classifier.k,
                knn_similarity: Some(knn_similarity),
                svm: SvmParams {
                    c: a.classifier.c,
                    epochs: a.classifier.epochs,
                    seed: a.seed,
                },
                seed: a.seed,
                train_per_class: a.train_per_class,
                held_out_only: a.held_out_only,
                pool_training_only: a.pool_training_only,
                include_self: a.include_self,
                classifier_excludes_self: a.knn_exclude_self,
                cv_folds: folds,
            };
            reports.push(run_evaluation(index, &config)?);
        }
    }
    let comparison = match &compared {
        None => None,
        Some(against) => {
            let picked: Vec<_> = reports
                .iter()
                .filter(|r| r.scheme == Scheme::Traditional || against.contains(&r.scheme))
                .cloned()
                .collect();
            Some(compare_schemes(&picked)?)
        }
    };

    write_file(&a.out, &reports_csv(&reports))?;
    if let Some(dir) = &a.per_query {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        for r in &reports {
            let path: PathBuf = dir.join(format!("{}_{}.csv", r.scheme, r.method));
            write_file(&path, &r.per_query_csv())?;
        }
    }
    println!("{:<8}{:<13}{:>8}{:>8}{:>10}{:>9}", "method", "scheme", "AR%", "false", "accuracy", "queries");
    for r in &reports {
        println!(
            "{:<8}{:<13}{:>8.2}{:>8}{:>10}{:>9}",
            r.method.to_string(),
            r.scheme.to_string(),
            r.ar_percent,
            r.false_predictions.map(|f| f.to_string()).unwrap_or_else(|| "-".into()),
            r.accuracy.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into()),
            r.n_queries()
        );
    }
    if let Some(table) = comparison {
        println!();
        print!("{}", table.to_text());
        if let Some(path) = &a.compare_out {
            write_file(path, &table.to_csv())?;
        }
    }
    Ok(())
}

pub fn decompose(a: &DecomposeArgs) -> Result<()> {
    let config = decomp_config(&a.decomp)?;
    let img = load_image(&a.image)?;
    let decomp = rct_plus(&img, &config)?;
    replace_dir(&a.out, |p| has_extension(p, "rctp"), |tmp| dump_decomposition(&decomp, tmp).map(|_| ()))?;
    println!("{} subbands written to {}", decomp.subbands.len(), a.out.display());
    Ok(())
}
