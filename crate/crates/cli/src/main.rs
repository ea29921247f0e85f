// SPDX-License-Identifier: Apache-2.0
//! `fsmreg` command-line front end.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fsmreg::eval::{
    confusion_for_labels, generate_synthetic, loocv_suite, loocv_with_progress, DesignMetrics, GroundTruth,
    LabeledDesign, MetricsReport, SynthSpec,
};
use fsmreg::gate::{load_model, save_model, train_with_progress, Activation, Corpus, CHECKPOINT_VERSION};
use fsmreg::netlist::{load_netlist, load_tech_library, TechLibrary};
use fsmreg::pipeline::{
    build_corpus, label_design, LabelsDoc, MappedDoc, PathsDoc, PipelineConfig, PreparedDesign, SCHEMAS,
};
use fsmreg::ErrorClass;

#[derive(Parser, Debug)]
#[command(name = "fsmreg", about = "Identify FSM state registers in gate-level netlists", disable_version_flag = true)]
struct Cli {
    /// Seed for initialization, shuffling and clustering [default: 0]
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory [default: .]
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML or JSON configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the tool, schema and checkpoint versions
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a netlist and map it onto generic cells (writes mapped.json)
    Map {
        netlist: PathBuf,
        #[command(flatten)]
        lib: LibraryArg,
    },
    /// Extract register path structures (writes paths.json)
    Extract {
        mapped: PathBuf,
        /// Backward search depth [default: 6]
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Train the embedding model (writes model.ckpt and loss.csv)
    Train {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Embed and label registers (writes labels.json)
    Classify {
        model: PathBuf,
        paths: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Score labels against ground truth (writes metrics.csv and metrics.json)
    Eval {
        #[arg(required = true, num_args = 2.., value_names = ["LABELS", "TRUTH"])]
        files: Vec<PathBuf>,
    },
    /// Leave-one-out evaluation over a corpus directory or the built-in suite
    Loocv {
        /// Directory of design subdirectories, each with netlist.v and truth.json
        #[arg(required_unless_present = "suite")]
        corpus: Option<PathBuf>,
        /// Use the built-in 19-design synthetic suite
        #[arg(long, conflicts_with = "corpus")]
        suite: bool,
        #[command(flatten)]
        lib: LibraryArg,
        /// Backward search depth [default: 6]
        #[arg(long)]
        depth: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Generate a synthetic netlist with ground truth (writes netlist.v, truth.json, library.json)
    Gen {
        #[arg(long, default_value_t = SynthSpec::default().fsm_states)]
        fsm: usize,
        #[arg(long, default_value_t = SynthSpec::default().data_regs)]
        data: usize,
        #[arg(long, default_value_t = SynthSpec::default().datapath_width)]
        width: usize,
        #[arg(long, default_value_t = SynthSpec::default().comb_depth)]
        comb_depth: usize,
        #[arg(long, default_value_t = SynthSpec::default().fanin_max)]
        fanin_max: usize,
        /// Write the built-in 19-design suite as subdirectories instead
        #[arg(long)]
        suite: bool,
    },
}

#[derive(Args, Debug)]
struct LibraryArg {
    /// Technology library JSON [default: built-in library]
    #[arg(long)]
    library: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// [default: 200]
    #[arg(long)]
    epochs: Option<usize>,
    /// [default: 0.01]
    #[arg(long)]
    lr: Option<f64>,
    /// [default: 5e-4]
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Global gradient norm limit [default: 5]
    #[arg(long)]
    clip: Option<f64>,
    /// Attention heads per layer [default: 4]
    #[arg(long)]
    heads: Option<usize>,
    /// relu, leaky_relu, elu, tanh or identity [default: elu]
    #[arg(long)]
    activation: Option<String>,
    /// Activation of the embedding and reconstruction layers [default: identity]
    #[arg(long)]
    output_activation: Option<String>,
    /// Weight of the edge-reconstruction loss [default: 0]
    #[arg(long)]
    structure_weight: Option<f64>,
    /// Train on every path structure, including structural duplicates
    #[arg(long)]
    no_dedup: bool,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    /// Embedding distance threshold [default: 1e-3]
    #[arg(long)]
    t1: Option<f64>,
    /// Groups smaller than this are state registers [default: 4]
    #[arg(long)]
    t2: Option<usize>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<fsmreg::Error> for CliError {
    fn from(e: fsmreg::Error) -> Self {
        match e.class() {
            ErrorClass::Numerical => CliError::Numerical(e.to_string()),
            ErrorClass::Input => CliError::Input(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn with_path(path: &Path) -> impl Fn(fsmreg::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Input(m) if !m.contains(&path.display().to_string()) => {
            CliError::Input(format!("{}: {m}", path.display()))
        }
        other => other,
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> CliResult<PipelineConfig> {
    let Some(path) = path else {
        return Ok(PipelineConfig::default());
    };
    let text = read(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

struct Context {
    config: PipelineConfig,
    out: PathBuf,
}

impl Context {
    fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn library(&self, arg: &LibraryArg) -> CliResult<TechLibrary> {
        match arg.library.as_ref().or(self.config.tech_library.as_ref()) {
            Some(path) => load_tech_library(path).map_err(with_path(path)),
            None => Ok(TechLibrary::builtin()),
        }
    }

    fn apply_train(&mut self, t: &TrainArgs) -> CliResult<()> {
        let c = &mut self.config.train;
        if let Some(v) = t.epochs {
            c.epochs = v;
        }
        if let Some(v) = t.lr {
            c.learning_rate = v;
        }
        if let Some(v) = t.weight_decay {
            c.weight_decay = v;
        }
        if let Some(v) = t.clip {
            c.gradient_clip = v;
        }
        if let Some(v) = t.heads {
            c.heads = v;
        }
        if let Some(v) = &t.activation {
            c.activation = v.parse::<Activation>().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if let Some(v) = &t.output_activation {
            c.output_activation = v.parse::<Activation>().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if let Some(v) = t.structure_weight {
            c.structure_weight = v;
        }
        if t.no_dedup {
            c.dedup = false;
        }
        Ok(())
    }

    fn apply_thresholds(&mut self, t: &ThresholdArgs) {
        if let Some(v) = t.t1 {
            self.config.t1 = v;
        }
        if let Some(v) = t.t2 {
            self.config.t2 = v;
        }
    }

    fn validate(&self) -> CliResult<()> {
        self.config.validate().map_err(|e| CliError::Usage(e.to_string()))
    }
}

fn load_paths(path: &Path) -> CliResult<PreparedDesign> {
    let doc = PathsDoc::from_json(&read(path)?).map_err(with_path(path))?;
    PreparedDesign::from_doc(&doc).map_err(with_path(path))
}

fn prepare_verilog(path: &Path, lib: &TechLibrary, walk_length: usize) -> CliResult<PreparedDesign> {
    let netlist = load_netlist(&read(path)?, lib).map_err(with_path(path))?;
    Ok(PreparedDesign::from_netlist(&netlist, walk_length)?)
}

fn write_report(ctx: &Context, report: &MetricsReport) -> CliResult<()> {
    write(&ctx.output("metrics.csv"), report.to_csv())?;
    write(&ctx.output("metrics.json"), report.to_json())?;
    print!("{}", report.to_table());
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.version {
        println!("fsmreg {}", env!("CARGO_PKG_VERSION"));
        for s in SCHEMAS {
            println!("schema {s}");
        }
        println!("checkpoint FSMREG-GATE {CHECKPOINT_VERSION}");
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Usage("no command given; see --help".into()));
    };
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out = Some(out);
    }
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(|e| CliError::Input(format!("cannot create {}: {e}", out.display())))?;
    let mut ctx = Context { config, out };

    match command {
        Command::Map { netlist, lib } => {
            let lib = ctx.library(&lib)?;
            let mapped = load_netlist(&read(&netlist)?, &lib).map_err(with_path(&netlist))?;
            let target = ctx.output("mapped.json");
            write(&target, MappedDoc::new(mapped).to_json())?;
            eprintln!("wrote {}", target.display());
        }
        Command::Extract { mapped, depth } => {
            if let Some(d) = depth {
                ctx.config.walk_length = d;
            }
            ctx.validate()?;
            let doc = MappedDoc::from_json(&read(&mapped)?).map_err(with_path(&mapped))?;
            let design = PreparedDesign::from_netlist(&doc.netlist, ctx.config.walk_length)?;
            let target = ctx.output("paths.json");
            write(&target, design.to_doc().to_json())?;
            eprintln!("wrote {} ({} registers)", target.display(), design.structures.len());
        }
        Command::Train { paths, train } => {
            ctx.apply_train(&train)?;
            ctx.validate()?;
            let designs = paths.iter().map(|p| load_paths(p)).collect::<CliResult<Vec<_>>>()?;
            let indexed: Vec<(usize, &PreparedDesign)> = designs.iter().enumerate().collect();
            let tc = ctx.config.train_config();
            let corpus = build_corpus::<f64>(&indexed, tc.dedup)?;
            let Corpus { samples, .. } = &corpus.corpus;
            eprintln!(
                "training on {} samples ({} path structures)",
                samples.len(),
                corpus.members.len()
            );
            let outcome = train_with_progress(samples, &tc, |_, _| {})?;
            let mut csv = String::from("epoch,mean_loss\n");
            for (i, l) in outcome.loss_trace.iter().enumerate() {
                csv.push_str(&format!("{},{l}\n", i + 1));
            }
            write(&ctx.output("loss.csv"), csv)?;
            let target = ctx.output("model.ckpt");
            save_model(&outcome.model, &target).map_err(with_path(&target))?;
            eprintln!(
                "loss {:.6} -> {:.6}; wrote {}",
                outcome.initial_loss,
                outcome.final_loss,
                target.display()
            );
        }
        Command::Classify {
            model,
            paths,
            thresholds,
        } => {
            ctx.apply_thresholds(&thresholds);
            ctx.validate()?;
            let model = load_model::<f64>(&model).map_err(with_path(&model))?;
            let design = load_paths(&paths)?;
            let labels = label_design(&model, &design, ctx.config.t1, ctx.config.t2, ctx.config.seed)?;
            let target = ctx.output("labels.json");
            write(&target, labels.to_json())?;
            let state = labels.registers.iter().filter(|r| r.label == fsmreg::RegisterLabel::State).count();
            eprintln!(
                "{} registers, {state} labeled STATE; wrote {}",
                labels.registers.len(),
                target.display()
            );
        }
        Command::Eval { files } => {
            if files.len() % 2 != 0 {
                return Err(CliError::Usage("eval expects LABELS TRUTH pairs".into()));
            }
            let mut rows = Vec::new();
            for pair in files.chunks(2) {
                let labels = LabelsDoc::from_json(&read(&pair[0])?).map_err(with_path(&pair[0]))?;
                let truth = GroundTruth::from_json_str(&read(&pair[1])?).map_err(with_path(&pair[1]))?;
                let counts = confusion_for_labels(&labels, &truth).map_err(with_path(&pair[0]))?;
                rows.push(DesignMetrics::new(labels.design.clone(), counts));
            }
            write_report(&ctx, &MetricsReport::new(rows))?;
        }
        Command::Loocv {
            corpus,
            suite,
            lib,
            depth,
            train,
            thresholds,
        } => {
            if let Some(d) = depth {
                ctx.config.walk_length = d;
            }
            ctx.apply_train(&train)?;
            ctx.apply_thresholds(&thresholds);
            ctx.validate()?;
            let lib = ctx.library(&lib)?;
            let walk = ctx.config.walk_length;
            let mut designs = Vec::new();
            if suite {
                for spec in loocv_suite() {
                    let g = generate_synthetic(&spec)?;
                    let netlist = load_netlist(&g.verilog, &lib)?;
                    designs.push(LabeledDesign {
                        design: PreparedDesign::from_netlist(&netlist, walk)?,
                        truth: g.truth,
                    });
                }
            } else {
                let dir = corpus.expect("clap requires a corpus without --suite");
                let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
                    .map_err(|e| CliError::Input(format!("cannot read {}: {e}", dir.display())))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_dir())
                    .collect();
                entries.sort();
                for sub in entries {
                    let truth_path = sub.join("truth.json");
                    let design = prepare_verilog(&sub.join("netlist.v"), &lib, walk)?;
                    let truth = GroundTruth::from_json_str(&read(&truth_path)?).map_err(with_path(&truth_path))?;
                    designs.push(LabeledDesign { design, truth });
                }
            }
            let labels_dir = ctx.output("labels");
            std::fs::create_dir_all(&labels_dir)
                .map_err(|e| CliError::Input(format!("cannot create {}: {e}", labels_dir.display())))?;
            let mut failure = None;
            let result = loocv_with_progress(&designs, &ctx.config, |fold| {
                eprintln!(
                    "{}: recall {} precision {} accuracy {}",
                    fold.held_out, fold.metrics.metrics.recall, fold.metrics.metrics.precision, fold.metrics.metrics.accuracy
                );
                if let Err(e) = write(&labels_dir.join(format!("{}.json", fold.held_out)), fold.labels.to_json()) {
                    failure.get_or_insert(e);
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            write_report(&ctx, &result.report)?;
        }
        Command::Gen {
            fsm,
            data,
            width,
            comb_depth,
            fanin_max,
            suite,
        } => {
            let specs = if suite {
                loocv_suite()
            } else {
                vec![SynthSpec {
                    seed: ctx.config.seed,
                    fsm_states: fsm,
                    data_regs: data,
                    datapath_width: width,
                    comb_depth,
                    fanin_max,
                }]
            };
            for spec in specs {
                let g = generate_synthetic(&spec).map_err(|e| CliError::Usage(e.to_string()))?;
                let dir = if suite { ctx.output(&g.name) } else { ctx.out.clone() };
                std::fs::create_dir_all(&dir)
                    .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
                write(&dir.join("netlist.v"), &g.verilog)?;
                write(&dir.join("truth.json"), g.truth.to_json_string())?;
                write(&dir.join("library.json"), TechLibrary::builtin().to_json_string())?;
                eprintln!("wrote {} to {}", g.name, dir.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
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
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
