use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use graph_quant::classifiers::{enq_predict, label_prop_predict, load_predictions, save_predictions};
use graph_quant::graph::{load_graph, load_vertex_list, save_graph, save_vertex_list};
use graph_quant::harness::aggregate::{aggregate, write_summary_to, GroupKey};
use graph_quant::harness::config::ExperimentConfig;
use graph_quant::harness::experiment::{read_rows, run_experiment, write_rows, write_rows_to};
use graph_quant::shift::{
    generate_sbm, sample_bfs, sample_pps, sample_rw, uniform_split, write_samples, PpsParams, StructuralParams,
    WalkParams, DEFAULT_SAMPLE_SIZE, DEFAULT_SEEDS_PER_LABEL, DEFAULT_WALK_ALPHA, DEFAULT_WALK_LEN,
    DEFAULT_ZIPF_EXPONENT,
};
use graph_quant::{quantify, ErrorKind, Graph, QuantifierSpec};

#[derive(Parser)]
#[command(name = "gquant", version, about = "Quantification on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct GraphArgs {
    /// Edge list file.
    #[arg(long)]
    edges: PathBuf,
    /// Labels file, one integer per vertex.
    #[arg(long)]
    labels: PathBuf,
    /// Optional features file, one comma-separated row per vertex.
    #[arg(long)]
    features: Option<PathBuf>,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph> {
        Ok(load_graph(&self.edges, Some(&self.labels), self.features.as_deref())?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampler {
    Pps,
    Bfs,
    Rw,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Enq,
    LabelProp,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stochastic block model graph.
    GenGraph {
        /// Block sizes, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        blocks: Vec<usize>,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        /// Label of each block; defaults to the block index.
        #[arg(long, value_delimiter = ',')]
        block_labels: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// Split vertices into classifier-train, quantifier-train and test lists.
    Split {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.15, 0.8])]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Draw shifted samples from a pool of vertices.
    SampleShift {
        #[command(flatten)]
        graph: GraphArgs,
        /// Pool vertex list (usually the test split).
        #[arg(long)]
        pool: PathBuf,
        #[arg(long, value_enum)]
        sampler: Sampler,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
        sample_size: usize,
        /// PPS only; defaults to 10·K.
        #[arg(long)]
        num_dists: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_ZIPF_EXPONENT)]
        zipf_exponent: f64,
        #[arg(long, default_value_t = DEFAULT_SEEDS_PER_LABEL)]
        seeds_per_label: usize,
        #[arg(long, default_value_t = DEFAULT_WALK_LEN)]
        walk_len: usize,
        #[arg(long, default_value_t = DEFAULT_WALK_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Predict labels for every vertex from a labeled training list.
    Classify {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        train: PathBuf,
        #[arg(long, value_enum, default_value = "enq")]
        method: Method,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
        #[arg(long, default_value_t = 0.9)]
        damping: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the label distribution of one sample and print it as JSON.
    Quantify {
        #[command(flatten)]
        graph: GraphArgs,
        /// Quantifier-train vertex list.
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        sample: PathBuf,
        /// Method name such as `acc`, `pacc+sis` or `acc+sis+nacc`.
        #[arg(long, default_value = "acc")]
        method: String,
    },
    /// Run an experiment config and write the result CSV.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output path of the config; stdout when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Summarize a result CSV.
    Aggregate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = ["dataset".to_string(), "shift".to_string(), "classifier".to_string()])]
        group_by: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenGraph {
            blocks,
            p_in,
            p_out,
            block_labels,
            seed,
            edges,
            labels,
        } => {
            let g = generate_sbm(&blocks, p_in, p_out, block_labels.as_deref(), seed)?;
            save_graph(&g, &edges, Some(&labels), None)?;
            eprintln!("wrote {} vertices, {} edges", g.n(), g.num_edges());
        }
        Command::Split {
            graph,
            fractions,
            seed,
            out_dir,
        } => {
            let g = graph.load()?;
            let fractions: [f64; 3] = fractions
                .try_into()
                .map_err(|_| graph_quant::Error::Parameter("exactly three fractions are required".into()))?;
            let split = uniform_split(&g, fractions, seed)?;
            fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
            save_vertex_list(&out_dir.join("classifier_train.txt"), &split.classifier_train)?;
            save_vertex_list(&out_dir.join("quantifier_train.txt"), &split.quantifier_train)?;
            save_vertex_list(&out_dir.join("test.txt"), &split.test)?;
        }
        Command::SampleShift {
            graph,
            pool,
            sampler,
            sample_size,
            num_dists,
            zipf_exponent,
            seeds_per_label,
            walk_len,
            alpha,
            seed,
            out_dir,
        } => {
            let g = graph.load()?;
            let pool = load_vertex_list(&pool)?;
            let structural = StructuralParams {
                seeds_per_label,
                sample_size,
            };
            let samples = match sampler {
                Sampler::Pps => {
                    let k = g.num_classes();
                    let params = PpsParams {
                        num_dists: num_dists.unwrap_or(10 * k),
                        sample_size,
                        zipf_exponent,
                    };
                    sample_pps(&g.labeled(&pool)?, k, params, seed)?
                }
                Sampler::Bfs => sample_bfs(&g, &pool, structural, seed)?,
                Sampler::Rw => sample_rw(&g, &pool, structural, WalkParams { walk_len, alpha }, seed)?,
            };
            let files = write_samples(&out_dir, &samples)?;
            eprintln!("wrote {} samples to {}", files.len(), out_dir.display());
        }
        Command::Classify {
            graph,
            train,
            method,
            iterations,
            damping,
            out,
        } => {
            let g = graph.load()?;
            let train = g.labeled(&load_vertex_list(&train)?)?;
            let k = g.num_classes();
            let preds = match method {
                Method::Enq => enq_predict(&g, &train, k)?,
                Method::LabelProp => label_prop_predict(&g, &train, k, iterations, damping)?,
            };
            save_predictions(&out, &preds)?;
        }
        Command::Quantify {
            graph,
            train,
            predictions,
            sample,
            method,
        } => {
            let spec: QuantifierSpec = method.parse()?;
            let g = graph.load()?;
            let train = g.labeled(&load_vertex_list(&train)?)?;
            let preds = load_predictions(&predictions, g.n(), g.num_classes())?;
            let sample = load_vertex_list(&sample)?;
            let est = quantify(&spec, &g, &train, &sample, &preds)?;
            let out = json!({
                "method": spec.display_name(),
                "q": est.q,
                "diagnostics": est.diagnostics,
                "flags": est.diagnostics.flags(),
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Command::Experiment { config, output } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = run_experiment(&cfg)?;
            match output.or(cfg.output.clone()) {
                Some(path) => write_rows_to(&path, &rows)?,
                None => write_rows(std::io::stdout().lock(), &rows)?,
            }
            let failed = rows.iter().filter(|r| !r.error.is_empty()).count();
            eprintln!("{} rows, {} failed", rows.len(), failed);
        }
        Command::Aggregate {
            input,
            output,
            group_by,
        } => {
            let keys = group_by
                .iter()
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.parse())
                .collect::<graph_quant::Result<Vec<GroupKey>>>()?;
            let rows = read_rows(Path::new(&input))?;
            let summary = aggregate(&rows, &keys)?;
            write_summary_to(&output, &summary)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<graph_quant::Error>() {
        Some(e) => match e.kind() {
            ErrorKind::Config => 1,
            ErrorKind::Data => 2,
            ErrorKind::Internal => 3,
        },
        None => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
