use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use twistor_fibers::fiber::{dual_graph, Stage, IDENTITY_ROLES, RELABELED};
use twistor_fibers::pipeline::{
    run_pipeline_partial, search_label_choices, verify_final_fibers, PipelineError, PipelineOptions, StepError,
};
use twistor_fibers::projective::{assemble_model, ConformalInvariant, ProjectiveModel};
use twistor_fibers::report::{
    catalog_from_text, catalog_to_text, classify_report, failure_record, final_line, model_report, stage_catalog,
    trace_report, verification_report, Record, Report,
};
use twistor_fibers::torus::{expected_catalog, type_one, type_two, ExpectedCatalog};

const USAGE: u8 = 2;
const MODEL: u8 = 3;
const PIPELINE: u8 = 4;

#[derive(Parser)]
#[command(name = "twistor-fibers", version, about = "Fibers, flops and small resolutions of a degenerate toric fibration")]
struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, ValueEnum)]
enum ActionType {
    #[value(name = "I")]
    One,
    #[value(name = "II")]
    Two,
}

#[derive(Subcommand)]
enum Command {
    /// List equivalence classes of isotropy sequences of length 2n.
    Classify { n: usize },
    /// Build the projective model for a parameter tuple.
    Build(ModelArgs),
    /// Print the expected fiber catalog of an action type.
    Catalog {
        #[arg(long = "type", value_enum, default_value = "I")]
        action: ActionType,
    },
    /// Run the six steps and verify the final fibers.
    Run(RunArgs),
    /// Run and print only the verification of the final fibers.
    Verify(RunArgs),
    /// Run and verify every choice of section labels.
    Search(RunArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Six increasing rationals separated by commas.
    #[arg(long, allow_hyphen_values = true)]
    invariant: String,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "type", value_enum, default_value = "I")]
    action: ActionType,
    /// Swap the roles of the parameters: 1<->4, 2<->3, 5<->6.
    #[arg(long)]
    relabel: bool,
    /// Read the expected catalog from a file instead of computing it.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Write one dual graph per stage and fiber.
    #[arg(long)]
    emit_dot: Option<PathBuf>,
    /// Write one catalog file per stage.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl ToString) -> Failure {
    Failure { code, message: message.to_string() }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let mut report = Report::default();
    let result = dispatch(&cli.command, &mut report);
    let out = match cli.format {
        Format::Text => report.text(),
        Format::Structured => report.structured(),
    };
    print!("{out}");
    match result {
        Ok(Some(line)) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: &Command, report: &mut Report) -> Result<Option<String>, Failure> {
    match cmd {
        Command::Classify { n } => {
            report.extend(classify_report(*n).map_err(|e| fail(USAGE, e))?);
            Ok(None)
        }
        Command::Build(args) => {
            let model = load_model(args)?;
            report.extend(model_report(&model));
            Ok(None)
        }
        Command::Catalog { action } => {
            let c = expected_catalog(&sequence(*action)).map_err(|e| fail(PIPELINE, e))?;
            print!("{}", catalog_to_text(&c));
            Ok(None)
        }
        Command::Run(args) => run(args, report, true),
        Command::Verify(args) => run(args, report, false),
        Command::Search(args) => search(args, report),
    }
}

fn sequence(a: ActionType) -> twistor_fibers::torus::IsotropySequence {
    match a {
        ActionType::One => type_one(),
        ActionType::Two => type_two(),
    }
}

fn load_model(args: &ModelArgs) -> Result<ProjectiveModel, Failure> {
    let ci = ConformalInvariant::parse(&args.invariant).map_err(|e| fail(USAGE, e))?;
    assemble_model(&ci).map_err(|e| fail(MODEL, e))
}

fn stage_failure(stage: Stage, msg: impl ToString) -> PipelineError {
    PipelineError { stage, error: StepError::PreconditionViolation(msg.to_string()) }
}

fn load_catalog(args: &RunArgs) -> Result<ExpectedCatalog, PipelineError> {
    match &args.catalog {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| stage_failure(Stage::X1, format!("{}: {e}", path.display())))?;
            catalog_from_text(&text).map_err(|e| stage_failure(Stage::X1, format!("{}: {e}", path.display())))
        }
        None => expected_catalog(&sequence(args.action)).map_err(|e| stage_failure(Stage::X1, e)),
    }
}

fn options(args: &RunArgs) -> PipelineOptions {
    PipelineOptions { roles: if args.relabel { RELABELED } else { IDENTITY_ROLES }, ..PipelineOptions::default() }
}

fn pipeline_failure(e: &PipelineError, report: &mut Report) -> Failure {
    report.push(failure_record(e));
    fail(PIPELINE, e)
}

fn run(args: &RunArgs, report: &mut Report, full: bool) -> Result<Option<String>, Failure> {
    let model = load_model(&args.model)?;
    let catalog = load_catalog(args).map_err(|e| pipeline_failure(&e, report))?;
    let (trace, err) = run_pipeline_partial(&model, &catalog, &options(args));
    if full {
        report.extend(trace_report(&trace));
    }
    if let Some(dir) = &args.emit_dot {
        write_dir(dir, &trace.snapshots, |stage, fs| {
            fs.fibers().map(|f| (format!("{stage}_{}.dot", f.fiber), dual_graph(f).to_dot(stage))).collect()
        })?;
    }
    if let Some(dir) = &args.out_dir {
        write_dir(dir, &trace.snapshots, |stage, fs| vec![(format!("{stage}.txt"), stage_catalog(stage, fs).structured())])?;
    }
    if let Some(e) = err {
        return Err(pipeline_failure(&e, report));
    }
    let v = verify_final_fibers(&trace, &catalog);
    report.extend(verification_report(&v));
    if !v.pass {
        let bad: Vec<String> = v.fibers.iter().filter(|f| !f.pass).map(|f| f.fiber.to_string()).collect();
        let e = PipelineError {
            stage: Stage::Zhat,
            error: StepError::Assertion {
                name: "final fibers match the catalog".into(),
                expected: "all".into(),
                actual: format!("mismatch in {}", if bad.is_empty() { "global checks".into() } else { bad.join(",") }),
            },
        };
        return Err(pipeline_failure(&e, report));
    }
    Ok(Some(final_line(v.node_count, v.pass)))
}

type Files = Vec<(String, String)>;

fn write_dir(
    dir: &Path,
    snapshots: &[(Stage, twistor_fibers::fiber::FiberSpaceModel)],
    files: impl Fn(Stage, &twistor_fibers::fiber::FiberSpaceModel) -> Files,
) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| fail(USAGE, format!("{}: {e}", dir.display())))?;
    for (stage, fs_model) in snapshots {
        for (name, body) in files(*stage, fs_model) {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| fail(USAGE, format!("{}: {e}", path.display())))?;
        }
    }
    Ok(())
}

fn search(args: &RunArgs, report: &mut Report) -> Result<Option<String>, Failure> {
    let model = load_model(&args.model)?;
    let catalog = load_catalog(args).map_err(|e| pipeline_failure(&e, report))?;
    let results = search_label_choices(&model, &catalog, options(args).roles);
    let passing = results.iter().filter(|(_, r)| matches!(r, Ok(v) if v.pass)).count();
    for (labels, r) in &results {
        let rec = Record::new("label-choice").with("labels", labels);
        report.push(match r {
            Ok(v) => rec.with("pass", v.pass).with("nodes", v.node_count),
            Err(e) => rec.with("pass", false).with("stage", e.stage).with("error", &e.error),
        });
    }
    report.push(Record::new("search").with("choices", results.len()).with("passing", passing));
    if passing == 0 {
        return Err(fail(PIPELINE, "no label choice passes"));
    }
    Ok(None)
}
