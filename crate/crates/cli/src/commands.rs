//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde_json::json;

use pcdiff_core::data::{load_csv, load_pc, save_pc_with_meta};
use pcdiff_core::metrics::{
    chamfer, fitted_sigma_report, jsd_baselines, jsd_sets, mean_std, outlier_trim,
    sigma_rows_to_csv, MetricsReport,
};
use pcdiff_core::rng::{stream, Rng};
use pcdiff_core::translation::{reconstruct_cycle, translate};
use pcdiff_core::{gen_lines, gen_shapes, normalize, train_dpm, Dataset, Dpm};

use crate::config::{DatasetKind, RunConfig, TOOL_VERSION};
use crate::svg::{scatter, Series};

fn ensure_out_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn base_meta(cfg: &RunConfig) -> BTreeMap<String, serde_json::Value> {
    let mut meta = BTreeMap::new();
    meta.insert("seed".to_string(), json!(cfg.seed));
    meta.insert("config_hash".to_string(), json!(cfg.hash()));
    meta.insert("tool_version".to_string(), json!(TOOL_VERSION));
    meta
}

pub fn gen_data(cfg: &RunConfig) -> anyhow::Result<()> {
    ensure_out_dir(&cfg.out_dir)?;
    let mut written = Vec::new();
    match cfg.dataset {
        DatasetKind::Lines => {
            for noisy in [false, true] {
                let ds = gen_lines(cfg.n_events, cfg.n_points, cfg.seed, noisy)?;
                written.push(write_dataset(cfg, &ds)?);
            }
        }
        DatasetKind::Shapes => {
            for noisy in [false, true] {
                let ds =
                    gen_shapes(cfg.n_events, cfg.n_points, cfg.seed, noisy, cfg.shape_noise_sigma)?;
                written.push(write_dataset(cfg, &ds)?);
            }
        }
        DatasetKind::Csv => {
            let path = cfg.csv_path.as_ref().expect("validated");
            let ds = load_csv(path)?;
            written.push(write_dataset(cfg, &ds)?);
        }
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn write_dataset(cfg: &RunConfig, ds: &Dataset) -> anyhow::Result<PathBuf> {
    let path = cfg.out_dir.join(format!("{}.pcds", ds.domain_label));
    let mut meta = base_meta(cfg);
    meta.insert("n_events".to_string(), json!(ds.n_events()));
    meta.insert("n_points".to_string(), json!(cfg.n_points));
    if let Some(labels) = &ds.class_labels {
        let prisms = labels.iter().filter(|&&l| l == 0).count();
        meta.insert("class_0_count".to_string(), json!(prisms));
        meta.insert("class_1_count".to_string(), json!(labels.len() - prisms));
    }
    if cfg.dataset == DatasetKind::Shapes {
        meta.insert("noise_sigma".to_string(), json!(cfg.shape_noise_sigma));
    }
    save_pc_with_meta(ds, &path, meta)?;
    Ok(path)
}

pub fn train(cfg: &RunConfig, data: &Path) -> anyhow::Result<()> {
    ensure_out_dir(&cfg.out_dir)?;
    let ds = load_pc(data)?;
    let (normed, _) = normalize(&ds)?;
    let result = train_dpm(&normed, &cfg.train_config(), cfg.seed)?;

    let ckpt = cfg.out_dir.join(format!("{}.dpm", ds.domain_label));
    result
        .dpm
        .save_with_meta(&ckpt, Some(cfg.seed), Some(cfg.hash()), Some(TOOL_VERSION.into()))?;

    let mut csv = String::from("iter,loss\n");
    for (i, loss) in result.losses.iter().enumerate() {
        if i % 100 == 0 || i + 1 == result.losses.len() {
            csv.push_str(&format!("{i},{loss}\n"));
        }
    }
    let loss_path = cfg.out_dir.join(format!("{}-loss.csv", ds.domain_label));
    std::fs::write(&loss_path, csv)?;
    println!("wrote {}", ckpt.display());
    println!("wrote {}", loss_path.display());
    Ok(())
}

pub fn cmd_translate(
    cfg: &RunConfig,
    src: &Path,
    tgt: &Path,
    input: &Path,
) -> anyhow::Result<()> {
    ensure_out_dir(&cfg.out_dir)?;
    let dpm_src = Dpm::load(src)?;
    let dpm_tgt = Dpm::load(tgt)?;
    let ds = load_pc(input)?;

    let mut events = Vec::with_capacity(ds.n_events());
    for (i, event) in ds.events.iter().enumerate() {
        let event_seed = Rng::substream(cfg.seed, stream::TRANSLATE, i as u64).next_u64();
        events.push(translate(&dpm_src, &dpm_tgt, event, event_seed)?.output);
    }
    let mut out_ds = Dataset::new(
        events,
        format!("{}-to-{}", dpm_src.domain_label, dpm_tgt.domain_label),
    )?;
    out_ds.class_labels = ds.class_labels.clone();

    let mut meta = base_meta(cfg);
    meta.insert("source_model".to_string(), json!(dpm_src.domain_label));
    meta.insert("target_model".to_string(), json!(dpm_tgt.domain_label));
    meta.insert("input_file".to_string(), json!(input.display().to_string()));
    meta.insert(
        "event_seed_rule".to_string(),
        json!("substream(seed, TRANSLATE, event_index).next_u64()"),
    );
    let path = cfg.out_dir.join(format!("{}.pcds", out_ds.domain_label));
    save_pc_with_meta(&out_ds, &path, meta)?;
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cycle(cfg: &RunConfig, model_a: &Path, model_b: &Path, input: &Path) -> anyhow::Result<()> {
    ensure_out_dir(&cfg.out_dir)?;
    let dpm_a = Dpm::load(model_a)?;
    let dpm_b = Dpm::load(model_b)?;
    let ds = load_pc(input)?;

    let mut events = Vec::with_capacity(ds.n_events());
    let mut cds = Vec::with_capacity(ds.n_events());
    for (i, event) in ds.events.iter().enumerate() {
        let event_seed = Rng::substream(cfg.seed, stream::TRANSLATE, i as u64).next_u64();
        let (back, cd) = reconstruct_cycle(&dpm_a, &dpm_b, event, event_seed)?;
        events.push(back);
        cds.push(cd);
    }
    let mut out_ds = Dataset::new(events, format!("{}-cycled", ds.domain_label))?;
    out_ds.class_labels = ds.class_labels.clone();

    let (mean, std) = mean_std(&cds);
    let mut meta = base_meta(cfg);
    meta.insert("cd_reco_mean".to_string(), json!(mean));
    meta.insert("cd_reco_std".to_string(), json!(std));
    let path = cfg.out_dir.join(format!("{}.pcds", out_ds.domain_label));
    save_pc_with_meta(&out_ds, &path, meta)?;

    let mut csv = String::from("event,cd\n");
    for (i, cd) in cds.iter().enumerate() {
        csv.push_str(&format!("{i},{cd}\n"));
    }
    let cd_path = cfg.out_dir.join(format!("{}-cd.csv", out_ds.domain_label));
    std::fs::write(&cd_path, csv)?;
    println!("wrote {}", path.display());
    println!("wrote {}", cd_path.display());
    Ok(())
}

pub struct EvaluateArgs<'a> {
    pub translated: &'a Path,
    pub reference: &'a Path,
    pub source: Option<&'a Path>,
    pub cycled: Option<&'a Path>,
    pub fitted_sigma: bool,
}

pub fn evaluate(cfg: &RunConfig, args: &EvaluateArgs<'_>) -> anyhow::Result<()> {
    ensure_out_dir(&cfg.out_dir)?;
    let translated = load_pc(args.translated)?;
    let reference = load_pc(args.reference)?;

    let mut report = MetricsReport {
        jsd_trans: Some(jsd_sets(
            &translated.events,
            &reference.events,
            cfg.jsd_resolution,
        )?),
        seed: Some(cfg.seed),
        config_hash: Some(cfg.hash()),
        tool_version: Some(TOOL_VERSION.into()),
        ..Default::default()
    };
    let (in_domain, rand) = jsd_baselines(&reference.events, cfg.jsd_resolution, cfg.seed)?;
    report.jsd_in_domain = Some(in_domain);
    report.jsd_rand = Some(rand);

    let source = args.source.map(load_pc).transpose()?;
    if let (Some(source_ds), Some(cycled_path)) = (&source, args.cycled) {
        let cycled = load_pc(cycled_path)?;
        if cycled.n_events() != source_ds.n_events() {
            anyhow::bail!(
                "cycled file has {} events, source has {}",
                cycled.n_events(),
                source_ds.n_events()
            );
        }
        let cds: Vec<f64> = source_ds
            .events
            .iter()
            .zip(&cycled.events)
            .map(|(a, b)| chamfer(a, b))
            .collect::<Result<_, _>>()?;
        let (mean, std) = mean_std(&cds);
        report.cd_reco_mean = Some(mean);
        report.cd_reco_std = Some(std);
        let (kept, _) = outlier_trim(&cds, cfg.keep_fraction)?;
        report.cd_clean_mean = Some(mean_std(&kept).0);
    }

    if args.fitted_sigma {
        let (rows, warnings) = fitted_sigma_report(&translated, cfg.sigma_bins)?;
        for w in &warnings {
            eprintln!("warning: {w}");
        }
        std::fs::write(
            cfg.out_dir.join("fitted-sigma.csv"),
            sigma_rows_to_csv(&rows),
        )?;
        report.rows = rows;
    }

    report.validate()?;
    std::fs::write(cfg.out_dir.join("report.csv"), report.to_csv())?;
    std::fs::write(cfg.out_dir.join("report.json"), report.to_json()?)?;

    // Before/after projections of a few sample events.
    if let Some(source_ds) = &source {
        let samples = source_ds.n_events().min(3);
        for (axes, name) in [((0usize, 2usize), "xz"), ((1, 2), "yz")] {
            for i in 0..samples {
                let path = cfg.out_dir.join(format!("scatter-{name}-event{i}.svg"));
                scatter(
                    &path,
                    &[
                        Series {
                            cloud: &source_ds.events[i],
                            color: "#7f7f7f",
                            label: "before",
                        },
                        Series {
                            cloud: &translated.events[i],
                            color: "#d62728",
                            label: "after",
                        },
                    ],
                    axes,
                    &format!("event {i}: {name} projection"),
                )?;
            }
        }
    }
    println!("wrote {}", cfg.out_dir.join("report.csv").display());
    println!("wrote {}", cfg.out_dir.join("report.json").display());
    Ok(())
}
