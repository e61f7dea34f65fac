use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qcnn_lab::augment::augment_sample;
use qcnn_lab::datasets::write_pgm;
use qcnn_lab::harness::{
    compare_da, comparison_files, experiment_files, load_dataset, run_experiment, write_outputs,
    ConfigMap, ExperimentConfig,
};
use qcnn_lab::seeding::augment_rng;
use qcnn_lab::{selftest, Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "qcnn-lab",
    version,
    about = "QCNN and CNN training on tiny image datasets"
)]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the QCNN for every configured class pair and N.
    TrainQcnn(RunArgs),
    /// Train the classical CNN baseline.
    TrainCnn(RunArgs),
    /// Train without and with augmentation and tabulate the accuracy change.
    CompareDa(RunArgs),
    /// Write original and augmented samples as PGM images.
    AugmentPreview(RunArgs),
    /// Run the numerical self-checks.
    Selftest,
}

macro_rules! overrides {
    ($($field:ident => $key:literal),* $(,)?) => {
        #[derive(Args, Default)]
        struct Overrides {
            $(
                #[arg(long, value_name = "VALUE", alias = $key)]
                $field: Option<String>,
            )*
        }

        impl Overrides {
            fn pairs(&self) -> Vec<(&'static str, &Option<String>)> {
                vec![$(($key, &self.$field)),*]
            }
        }
    };
}

overrides! {
    model => "model",
    dataset => "dataset",
    digits_path => "digits_path",
    idx_images => "idx_images",
    idx_labels => "idx_labels",
    pgm_dir => "pgm_dir",
    class_map => "class_map",
    resize => "resize",
    class_a => "class_a",
    class_b => "class_b",
    n_per_class => "n_per_class",
    n_test => "n_test",
    epochs => "epochs",
    repetitions => "repetitions",
    base_seed => "base_seed",
    augment => "augment",
    max_rotation => "max_rotation",
    contrast_lo => "contrast_lo",
    contrast_hi => "contrast_hi",
    n_qubits => "n_qubits",
    depth => "depth",
    lr0 => "lr0",
    lr_decay => "lr_decay",
    adam_beta1 => "adam_beta1",
    adam_beta2 => "adam_beta2",
    adam_eps => "adam_eps",
    preview_count => "preview_count",
    preview_draws => "preview_draws",
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

impl RunArgs {
    fn config_map(&self) -> Result<ConfigMap, Error> {
        let mut map = match &self.config {
            Some(p) => ConfigMap::load(p)?,
            None => ConfigMap::default(),
        };
        for (key, value) in self.overrides.pairs() {
            if let Some(v) = value {
                map.set(key, v.clone())?;
            }
        }
        Ok(map)
    }
}

fn resolve(
    args: &RunArgs,
    model: Option<&str>,
    default_augment: Option<&str>,
) -> Result<ExperimentConfig, Error> {
    let mut map = args.config_map()?;
    if let Some(m) = model {
        if args.overrides.model.is_none() {
            map.set("model", m)?;
        }
    }
    if let Some(a) = default_augment {
        if map.get("augment").is_none() {
            map.set("augment", a)?;
        }
    }
    ExperimentConfig::from_map(&map)
}

fn train(args: &RunArgs, model: &str) -> Result<(), Error> {
    let cfg = resolve(args, Some(model), None)?;
    let data = load_dataset(&cfg)?;
    let runs = run_experiment(&cfg, &data)?;
    for run in &runs {
        println!(
            "{}v{} N={}: mean final test accuracy {:.4}",
            cfg.class_a,
            run.class_b,
            run.n_per_class,
            run.mean_final_test_acc()
        );
    }
    write_outputs(
        &args.out,
        &cfg,
        experiment_files(&cfg, &runs, Path::new("")),
    )
}

fn compare(args: &RunArgs) -> Result<(), Error> {
    let cfg = resolve(args, None, Some("default"))?;
    let data = load_dataset(&cfg)?;
    let outcome = compare_da(&cfg, &data)?;
    print!("{}", outcome.table.to_text());
    write_outputs(&args.out, &cfg, comparison_files(&cfg, &outcome))
}

fn preview(args: &RunArgs) -> Result<(), Error> {
    let cfg = resolve(args, None, Some("default"))?;
    let data = load_dataset(&cfg)?;
    let augment = cfg
        .augment
        .clone()
        .unwrap_or_else(|| cfg.dataset.augment_recipe());
    let mut images = Vec::new();
    for (i, sample) in data.samples.iter().take(cfg.preview_count).enumerate() {
        images.push((format!("sample{i}_orig.pgm"), sample.clone()));
        for j in 0..cfg.preview_draws {
            let mut rng = augment_rng(cfg.base_seed, j, i);
            images.push((
                format!("sample{i}_aug{j}.pgm"),
                augment_sample(sample, &augment, &mut rng),
            ));
        }
    }
    write_outputs(&args.out, &cfg, Vec::new())?;
    for (name, img) in &images {
        write_pgm(img, args.out.join(name))?;
    }
    println!("wrote {} images to {}", images.len(), args.out.display());
    Ok(())
}

fn run_selftest() -> Result<bool, Error> {
    let checks = selftest::run()?;
    let mut all = true;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        all &= c.passed;
    }
    Ok(all)
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
    {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::TrainQcnn(a) => train(a, "qcnn"),
        Command::TrainCnn(a) => train(a, "cnn"),
        Command::CompareDa(a) => compare(a),
        Command::AugmentPreview(a) => preview(a),
        Command::Selftest => match run_selftest() {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(3),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
