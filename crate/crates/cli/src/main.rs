use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use sdpl::check::axioms::{run_axioms, AxiomConfig};
use sdpl::check::blowup::blowup;
use sdpl::check::corpus::{find, CORPUS};
use sdpl::check::soundness::{check_parsed, ProgramReport, SoundnessConfig};
use sdpl::interp::{denote_typed, FunAssignment, InterpretationStructure, DEFAULT_FUEL};
use sdpl::opsem::{decode, eval, symbolic_eval, FunEnv, OpsemConfig, DEFAULT_BUDGET};
use sdpl::symdiff::{expand_rd_fully, RdMode, SymDiffError};
use sdpl::syntax::{parse_program, term_to_json, NameSupply, Program};
use sdpl::transforms::{bind_point, bind_point_symbolic, check_equivalence, rewrite, Rule, SampleSpec};
use sdpl::typing::{typecheck, FunContext};

/// Type checker, interpreters and differentiation tools for sdpl programs.
#[derive(Parser)]
#[command(name = "sdpl", version)]
struct Cli {
    /// Print JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the type of a program, `params → result`.
    Check {
        file: PathBuf,
        /// Dump the program body as a JSON syntax tree.
        #[arg(long)]
        ast: bool,
    },
    /// Evaluate a program at a point.
    Run(EvalArgs),
    /// Evaluate a program at a point, printing the trace term over its
    /// parameters.
    Trace(EvalArgs),
    /// Expand every `rd` of a program into its symbolic derivative. With
    /// `--at`, differentiate the trace recorded at that point instead.
    Diff {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long, default_value = "optimized")]
        mode: RdMode,
        /// Print call and node counts.
        #[arg(long)]
        stats: bool,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate the denotation of a program at a point.
    Denote {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
    },
    /// Apply a source transformation everywhere it matches.
    Transform {
        file: PathBuf,
        #[arg(long)]
        rule: Rule,
    },
    /// Apply a source transformation and compare the result against the
    /// original at sampled inputs.
    VerifyTransform {
        file: PathBuf,
        #[arg(long)]
        rule: Rule,
        #[command(flatten)]
        sample: SampleArgs,
        /// Inputs are drawn from [-range, range].
        #[arg(long, default_value_t = 3.0)]
        range: f64,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: usize,
        #[arg(long, default_value_t = 100_000)]
        budget: u64,
    },
    /// Check the reverse-derivative axioms on generated maps.
    Axioms {
        /// Points per map.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 50)]
        maps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Tolerance against finite differences.
        #[arg(long, default_value_t = 1e-4)]
        fd_tol: f64,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Check that evaluation, denotation and the trace agree. Without files,
    /// runs the built-in corpus; names from the corpus are accepted too.
    Soundness {
        programs: Vec<String>,
        /// Points per program.
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        fuel: usize,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        /// Input range for programs given as files.
        #[arg(long, default_value_t = 3.0)]
        range: f64,
    },
    /// Call counts of both differentiation modes on chains of lets, as CSV.
    BenchBlowup {
        #[arg(long, value_delimiter = ',', default_value = "8,12,16")]
        depths: Vec<usize>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

#[derive(Args)]
struct EvalArgs {
    file: PathBuf,
    /// Parameter values, comma separated, pairs flattened.
    #[arg(long, allow_hyphen_values = true, default_value = "")]
    at: String,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Offset for fresh names, so traces are reproducible.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "optimized")]
    mode: RdMode,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

enum Failure {
    /// Bad input: exit 1.
    User(String),
    /// A checked property does not hold: exit 2.
    Property,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure::User(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    // Derivatives of derivatives nest deeply.
    let worker = std::thread::Builder::new().stack_size(512 << 20).spawn(move || run(&cli));
    match worker.map(|h| h.join()) {
        Ok(Ok(Ok(()))) => ExitCode::SUCCESS,
        Ok(Ok(Err(Failure::Property))) => ExitCode::from(2),
        Ok(Ok(Err(Failure::User(msg)))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        _ => ExitCode::from(101),
    }
}

fn run(cli: &Cli) -> Outcome {
    let i = InterpretationStructure::standard();
    let out = Printer { json: cli.json };
    match &cli.cmd {
        Cmd::Check { file, ast } => {
            let prog = load(&i, file)?;
            let ty = typecheck(&i.sig, &FunContext::new(), &prog.params, &prog.body)?;
            let sig = format!("{} → {ty}", prog.params.as_type());
            if *ast {
                out.json(&json!({ "type": sig, "ast": term_to_json(&prog.body) }));
            } else {
                out.emit(&sig, json!({ "type": sig }));
            }
            Ok(())
        }
        Cmd::Run(a) => {
            let prog = load(&i, &a.file)?;
            let rho = bind_point(&i, &prog.params, &point(&a.at)?).ok_or_else(|| arity(&prog))?;
            let cfg = OpsemConfig { budget: a.budget, mode: a.mode, seed: a.seed };
            match eval(&rho, &FunEnv::new(), &i, &prog.body, &cfg) {
                Ok(v) => out.emit(&v.to_string(), json!({ "value": v.to_string() })),
                Err(e) => {
                    out.emit(&format!("{}: {e}", e.kind()), json!({ "error": e.kind(), "message": e.to_string() }));
                    return Err(Failure::User(format!("evaluation failed: {}", e.kind())));
                }
            }
            Ok(())
        }
        Cmd::Trace(a) => {
            let prog = load(&i, &a.file)?;
            let rho = bind_point_symbolic(&i, &prog.params, &point(&a.at)?).ok_or_else(|| arity(&prog))?;
            let cfg = OpsemConfig { budget: a.budget, mode: a.mode, seed: a.seed };
            let (trace, value) = symbolic_eval(&rho, &FunEnv::new(), &i, &prog.body, &cfg)
                .map_err(|e| format!("evaluation failed: {}: {e}", e.kind()))?;
            out.emit(&trace.to_string(), json!({ "trace": term_to_json(&trace), "value": value.to_string() }));
            Ok(())
        }
        Cmd::Diff { file, at, mode, stats, budget, seed } => {
            let prog = load(&i, file)?;
            typecheck(&i.sig, &FunContext::new(), &prog.params, &prog.body)?;
            let (term, counts) = match at {
                Some(at) => {
                    let rho = bind_point_symbolic(&i, &prog.params, &point(at)?).ok_or_else(|| arity(&prog))?;
                    let cfg = OpsemConfig { budget: *budget, mode: *mode, seed: *seed };
                    let (trace, _) = symbolic_eval(&rho, &FunEnv::new(), &i, &prog.body, &cfg)
                        .map_err(|e| format!("evaluation failed: {}: {e}", e.kind()))?;
                    (trace, None)
                }
                None => {
                    let mut supply = NameSupply::avoiding([&prog.body]);
                    supply.reserve_below(*seed);
                    let (t, s) = expand_rd_fully(&i.sig, &FunContext::new(), &prog.params, &prog.body, *mode, &mut supply)
                        .map_err(|e| match e {
                            SymDiffError::NotATraceTerm(_) => {
                                format!("{e}\n(control flow under rd is resolved at a point; pass --at)")
                            }
                            e => e.to_string(),
                        })?;
                    (t, Some(s))
                }
            };
            if cli.json {
                let mut v = json!({ "term": term_to_json(&term) });
                if let (true, Some(s)) = (*stats, &counts) {
                    v["stats"] = serde_json::to_value(s)?;
                }
                out.json(&v);
            } else {
                println!("{term}");
                if let (true, Some(s)) = (*stats, &counts) {
                    println!("calls: {}\nnodes: {}", s.recursive_call_count, s.output_node_count);
                }
            }
            Ok(())
        }
        Cmd::Denote { file, at, fuel } => {
            let prog = load(&i, file)?;
            let x = point(at)?;
            let (f, ty) = denote_typed(&i, &FunAssignment::new(), &prog.params, &prog.body, *fuel)?;
            if x.len() != f.dom() {
                return Err(arity(&prog).into());
            }
            match f.eval(&x)? {
                Some(v) => {
                    let shown = decode(&ty, &v).map_or_else(|| format!("{v:?}"), |t| t.to_string());
                    out.emit(&shown, json!({ "defined": true, "value": v }));
                }
                None => out.emit("undefined", json!({ "defined": false })),
            }
            Ok(())
        }
        Cmd::Transform { file, rule } => {
            let prog = load(&i, file)?;
            let mut supply = NameSupply::avoiding([&prog.body]);
            let (body, n) = rewrite(&i.sig, *rule, &prog.body, &mut supply);
            let shown = Program { params: prog.params.clone(), body };
            if cli.json {
                out.json(&json!({ "rewrites": n, "program": shown.to_string(), "ast": term_to_json(&shown.body) }));
            } else {
                println!("{shown}");
                eprintln!("{n} rewrite(s)");
            }
            Ok(())
        }
        Cmd::VerifyTransform { file, rule, sample, range, fuel, budget } => {
            let prog = load(&i, file)?;
            let mut supply = NameSupply::avoiding([&prog.body]);
            let (body, n) = rewrite(&i.sig, *rule, &prog.body, &mut supply);
            if n == 0 {
                return Err(Failure::User(format!("rule {rule} does not match anywhere in {}", file.display())));
            }
            let spec = SampleSpec {
                samples: sample.samples,
                seed: sample.seed,
                range: *range,
                tol: positive(sample.tol, "--tol")?,
                fuel: *fuel,
                budget: *budget,
            };
            let r = check_equivalence(&i, &prog.params, &prog.body, &body, &spec);
            if cli.json {
                out.json(&json!({ "rule": rule.to_string(), "rewrites": n, "report": r }));
            } else {
                println!("rule: {rule} ({n} rewrite(s))");
                println!("points: {} sampled, {} defined", r.points_sampled, r.points_defined);
                println!("max deviation: {:e}", r.max_deviation);
                println!("definedness agrees: {}", r.definedness_agrees);
                println!(
                    "operational: {} checked, {} out of budget, max deviation {:e}",
                    r.operational_checked, r.operational_out_of_fuel, r.operational_max_deviation
                );
                if let Some(e) = &r.error {
                    println!("error: {e}");
                }
                for x in &r.counterexamples {
                    println!("counterexample: {x:?}");
                }
                println!("{}", if r.passed { "PASS" } else { "FAIL" });
            }
            verdict(r.passed)
        }
        Cmd::Axioms { samples, maps, seed, tol, fd_tol, depth } => {
            let cfg = AxiomConfig {
                maps: *maps,
                points: *samples,
                seed: *seed,
                depth: *depth,
                tol: positive(*tol, "--tol")?,
                fd_tol: positive(*fd_tol, "--fd-tol")?,
            };
            let r = run_axioms(&cfg);
            if cli.json {
                out.json(&serde_json::to_value(&r)?);
            } else {
                println!("{:<6} {:>8} {:>6} {:>8} {:>9} {:>10}  result", "axiom", "checked", "failed", "skipped", "abstained", "max dev");
                for row in &r.rows {
                    println!(
                        "{:<6} {:>8} {:>6} {:>8} {:>9} {:>10.2e}  {}",
                        row.name,
                        row.checked,
                        row.failed,
                        row.skipped,
                        row.abstained,
                        row.max_deviation,
                        if row.passed() { "pass" } else { "FAIL" }
                    );
                    if let Some(c) = &row.counterexample {
                        println!("       {c}");
                    }
                }
            }
            verdict(r.passed())
        }
        Cmd::Soundness { programs, samples, seed, tol, fuel, budget, range } => {
            let cfg = SoundnessConfig { points: *samples, seed: *seed, tol: positive(*tol, "--tol")?, fuel: *fuel, budget: *budget };
            let mut reports: Vec<ProgramReport> = Vec::new();
            if programs.is_empty() {
                for e in CORPUS {
                    reports.push(check_parsed(&i, e.name, &e.program(&i.sig), (e.lo, e.hi), &cfg));
                }
            }
            for p in programs {
                let r = match find(p) {
                    Some(e) => check_parsed(&i, e.name, &e.program(&i.sig), (e.lo, e.hi), &cfg),
                    None => check_parsed(&i, p, &load(&i, Path::new(p))?, (-range, *range), &cfg),
                };
                reports.push(r);
            }
            let passed = reports.iter().all(ProgramReport::passed);
            if cli.json {
                out.json(&serde_json::to_value(&reports)?);
            } else {
                println!("{:<16} {:>6} {:>9} {:>9} {:>6} {:>8} {:>10}  result", "program", "points", "evaluated", "undefined", "fuel", "boundary", "max dev");
                for r in &reports {
                    println!(
                        "{:<16} {:>6} {:>9} {:>9} {:>6} {:>8} {:>10.2e}  {}",
                        r.name,
                        r.points,
                        r.evaluated,
                        r.undefined,
                        r.out_of_fuel,
                        r.boundary_rejected,
                        r.max_deviation,
                        if r.passed() { "pass" } else { "FAIL" }
                    );
                    for f in &r.failures {
                        println!("    {f}");
                    }
                }
            }
            verdict(passed)
        }
        Cmd::BenchBlowup { depths, tol } => {
            let rows = blowup(&i, depths, positive(*tol, "--tol")?);
            if cli.json {
                out.json(&serde_json::to_value(&rows)?);
            } else {
                println!("depth,standard_calls,optimized_calls");
                for r in &rows {
                    println!("{},{},{}", r.depth, r.standard_calls, r.optimized_calls);
                }
            }
            for r in rows.iter().filter(|r| !r.passed) {
                eprintln!(
                    "depth {}: standard {} vs optimized {} vs oracle {}{}",
                    r.depth,
                    r.standard_value,
                    r.optimized_value,
                    r.oracle_value,
                    r.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
                );
            }
            verdict(rows.iter().all(|r| r.passed))
        }
    }
}

struct Printer {
    json: bool,
}

impl Printer {
    fn emit(&self, text: &str, json: Value) {
        if self.json {
            self.json(&json);
        } else {
            println!("{text}");
        }
    }

    fn json(&self, v: &Value) {
        println!("{}", serde_json::to_string_pretty(v).expect("values serialize"));
    }
}

fn load(i: &InterpretationStructure, file: &Path) -> Result<Program, Failure> {
    let src = fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    parse_program(&src, &i.sig).map_err(|e| Failure::User(format!("{}:{e}", file.display())))
}

fn point(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .map(|c| c.parse::<f64>().map_err(|_| format!("`{c}` is not a number")))
        .collect()
}

fn arity(prog: &Program) -> String {
    let names: Vec<String> = prog.params.iter().map(|(x, t)| format!("{x}:{t}")).collect();
    format!("--at must give one number per real coordinate of the parameters ({})", names.join(", "))
}

fn positive(x: f64, flag: &str) -> Result<f64, String> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{flag} must be positive"))
    }
}

fn verdict(ok: bool) -> Outcome {
    if ok {
        Ok(())
    } else {
        Err(Failure::Property)
    }
}
