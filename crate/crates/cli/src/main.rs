//! Command-line front end: factorize permutations, verify certificates,
//! analyze inputs, export path systems and subdivisions, regenerate the
//! oracle fixtures, and run quick timing comparisons.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sepfactor::factor::{
    bound_f, factor_almost_mixed_free, factor_avoiding, verify_certificate,
    FactorizationCertificate,
};
use sepfactor::minor::{
    adjacency_matrix, almost_mixed_number_with_cap, find_minor_with_cap, mixed_free_order,
    MinorKind, DEFAULT_DIVISION_CAP,
};
use sepfactor::pathsys::{
    build_path_system, build_subdivision, check_path_system_gridfree, OrderedGraph,
    PathSystemGraph,
};
use sepfactor::perm::{Biorder, Permutation};
use sepfactor::separable::{is_separable, separable_index_oracle};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sepfactor", about = "Factorize pattern-avoiding permutations into separable factors")]
struct Cli {
    /// Seed for every randomized generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Feasibility cap for exhaustive searches (overrides SEPFACTOR_CAPS).
    #[arg(long, global = true)]
    caps: Option<u128>,
    /// Verification level applied to produced certificates.
    #[arg(long, global = true, value_enum, default_value_t = VerifyLevel::Spot)]
    verify: VerifyLevel,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyLevel {
    Off,
    Spot,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Factor a permutation into separable permutations.
    Factorize(FactorizeArgs),
    /// Check a certificate file.
    Verify { certificate: PathBuf },
    /// Report separability, minor numbers, and a third order.
    Analyze { input: PathBuf },
    /// Export the path system of a certificate.
    Pathsys(PathsysArgs),
    /// Build the ordered subdivision of a graph.
    Subdivide(SubdivideArgs),
    /// Recompute an oracle fixture suite.
    Oracle {
        suite: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time the factorization pipeline on seeded inputs.
    Bench {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
    },
}

#[derive(Args)]
struct FactorizeArgs {
    input: PathBuf,
    /// Pattern the input must avoid, e.g. "2 4 1 3".
    #[arg(long)]
    avoid: Option<String>,
    /// Direct almost-mixed-free mode at this parameter.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PathsysArgs {
    certificate: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Grid-freeness target parameter (searches grids up to 3r + 2).
    #[arg(long, default_value_t = 1)]
    r: usize,
}

#[derive(Args)]
struct SubdivideArgs {
    graph: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // Must precede the first parallel call for the pool to honor it.
        std::env::set_var("RAYON_NUM_THREADS", t.to_string());
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cap(cli: &Cli) -> u128 {
    cli.caps
        .or_else(|| {
            std::env::var("SEPFACTOR_CAPS")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(DEFAULT_DIVISION_CAP)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Factorize(args) => cmd_factorize(cli, args),
        Command::Verify { certificate } => cmd_verify(cli, certificate),
        Command::Analyze { input } => cmd_analyze(cli, input),
        Command::Pathsys(args) => cmd_pathsys(cli, args),
        Command::Subdivide(args) => cmd_subdivide(cli, args),
        Command::Oracle { suite, output } => cmd_oracle(cli, suite, output.as_deref()),
        Command::Bench { n, reps } => cmd_bench(cli, *n, *reps),
    }
}

fn read_permutation(path: &std::path::Path) -> Result<Permutation> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    parse_permutation(&text)
}

fn parse_permutation(text: &str) -> Result<Permutation> {
    let images: Vec<usize> = text
        .split_whitespace()
        .map(|tok| tok.parse().map_err(|_| anyhow!("bad integer {tok:?}")))
        .collect::<Result<_>>()?;
    Ok(Permutation::new(images)?)
}

fn write_output(path: Option<&std::path::Path>, content: &str) -> Result<()> {
    match path {
        // Atomic per output: write to a sibling temp file, then rename.
        Some(p) => {
            let tmp = p.with_extension("tmp");
            std::fs::write(&tmp, content)?;
            std::fs::rename(&tmp, p)?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn cmd_factorize(cli: &Cli, args: &FactorizeArgs) -> Result<ExitCode> {
    let p = read_permutation(&args.input)?;
    let cert = match (&args.avoid, args.k) {
        (Some(avoid), None) => {
            let pi = parse_permutation(avoid)?;
            match factor_avoiding(&p, &pi) {
                Ok(c) => c,
                Err(sepfactor::error::Error::PatternPresent { positions }) => {
                    eprintln!("input contains the pattern at positions {positions:?}");
                    return Ok(ExitCode::from(2));
                }
                Err(e) => return Err(e.into()),
            }
        }
        (None, Some(k)) => factor_almost_mixed_free(&Biorder::from_permutation(&p), k)?,
        _ => bail!("exactly one of --avoid or --k is required"),
    };
    write_output(args.output.as_deref(), &(cert.to_json() + "\n"))?;
    let pass = match cli.verify {
        VerifyLevel::Off => true,
        VerifyLevel::Spot => verify_certificate(&cert).pass(),
        VerifyLevel::Full => cert.verified && verify_certificate(&cert).pass(),
    };
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_verify(cli: &Cli, path: &std::path::Path) -> Result<ExitCode> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cert = FactorizationCertificate::from_json(&text)?;
    let report = verify_certificate(&cert);
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("product matches:    {}", report.product_matches);
        println!("all separable:      {}", report.all_separable);
        println!("count within bound: {}", report.count_within_bound);
    }
    Ok(if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_analyze(cli: &Cli, input: &std::path::Path) -> Result<ExitCode> {
    let p = read_permutation(input)?;
    let b = Biorder::from_permutation(&p);
    let cap = cap(cli);
    let separable = is_separable(&p);
    let amn = match almost_mixed_number_with_cap(&b, cap) {
        Ok(k) => serde_json::json!(k),
        Err(_) => serde_json::json!("cap-exceeded"),
    };
    let m = adjacency_matrix(&b);
    let mut largest_grid = 0usize;
    let mut grid_capped = false;
    for k in 1..=p.len() {
        match find_minor_with_cap(&m, k, MinorKind::Grid, cap) {
            Ok(Some(_)) => largest_grid = k,
            Ok(None) => break,
            Err(_) => {
                grid_capped = true;
                break;
            }
        }
    }
    let grid = if grid_capped {
        serde_json::json!("cap-exceeded")
    } else {
        serde_json::json!(largest_grid)
    };
    let third = mixed_free_order(&b, 32);
    let value = serde_json::json!({
        "n": p.len(),
        "input": p.images(),
        "separable": separable,
        "almost_mixed_number": amn,
        "largest_grid": grid,
        "third_order": third.order,
        "third_order_k": third.k,
        "third_order_verified": third.verified,
    });
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        println!("separable:           {}", if separable { "yes" } else { "no" });
        println!("almost-mixed number: {amn}");
        println!("largest grid:        {grid}");
        println!(
            "third order:         {:?} (k = {}, verified = {})",
            third.order, third.k, third.verified
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn path_system_text(ps: &PathSystemGraph) -> String {
    let mut edges = Vec::new();
    for i in 1..=ps.m() {
        for (x, y) in ps.matching(i) {
            edges.push((ps.canonical_index(i - 1, x), ps.canonical_index(i, y)));
        }
    }
    edges.sort_unstable();
    let mut out = format!("{} {}\n", ps.vertex_count(), edges.len());
    for (u, v) in edges {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

fn cmd_pathsys(cli: &Cli, args: &PathsysArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.certificate)
        .with_context(|| format!("reading {}", args.certificate.display()))?;
    let cert = FactorizationCertificate::from_json(&text)?;
    if cert.factors.is_empty() {
        bail!("certificate has no factors; nothing to draw");
    }
    let application: Vec<Permutation> = cert.factors.iter().rev().cloned().collect();
    let ps = build_path_system(&application)?;
    write_output(args.output.as_deref(), &path_system_text(&ps))?;
    if let Some(dot) = &args.dot {
        write_output(Some(dot), &ps.to_dot())?;
    }
    match check_path_system_gridfree(&ps, args.r) {
        Ok(report) => {
            if cli.json {
                let value = serde_json::json!({
                    "layers": ps.m() + 1,
                    "vertices": ps.vertex_count(),
                    "target": report.target,
                    "gridfree": report.gridfree,
                    "largest_grid": report.largest_found,
                });
                eprintln!("{}", serde_json::to_string_pretty(&value)?);
            } else {
                eprintln!(
                    "layers: {}, vertices: {}; no {}-grid: {} (largest found: {})",
                    ps.m() + 1,
                    ps.vertex_count(),
                    report.target,
                    report.gridfree,
                    report.largest_found
                );
            }
        }
        Err(sepfactor::error::Error::CapExceeded { estimate, cap }) => {
            eprintln!(
                "grid search skipped: {estimate} divisions exceed cap {cap} (set --caps to raise)"
            );
        }
        Err(e) => return Err(e.into()),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_subdivide(cli: &Cli, args: &SubdivideArgs) -> Result<ExitCode> {
    let text = std::fs::read_to_string(&args.graph)
        .with_context(|| format!("reading {}", args.graph.display()))?;
    let g = OrderedGraph::from_text(&text)?;
    let (sub, m) = build_subdivision(&g)?;
    write_output(args.output.as_deref(), &sub.to_text())?;
    if let Some(dot) = &args.dot {
        write_output(Some(dot), &sub.to_dot())?;
    }
    if cli.json {
        let value = serde_json::json!({
            "m": m,
            "vertices": sub.n(),
            "edges": sub.edges().len(),
        });
        eprintln!("{}", serde_json::to_string_pretty(&value)?);
    } else {
        eprintln!("m = {m}; {} vertices, {} edges", sub.n(), sub.edges().len());
    }
    Ok(ExitCode::SUCCESS)
}

fn all_permutations(n: usize) -> Vec<Permutation> {
    sepfactor::separable::enumerate_all(n).expect("n >= 1")
}

fn cmd_oracle(_cli: &Cli, suite: &str, output: Option<&std::path::Path>) -> Result<ExitCode> {
    let value = match suite {
        "sep-index-s4" => {
            let entries: Vec<serde_json::Value> = all_permutations(4)
                .iter()
                .map(|p| {
                    let index = separable_index_oracle(p, 4).expect("within oracle cap");
                    serde_json::json!({
                        "permutation": p.images(),
                        "separable_index": index,
                    })
                })
                .collect();
            serde_json::json!({ "suite": suite, "entries": entries })
        }
        "minors-s5" => {
            let entries: Vec<serde_json::Value> = all_permutations(5)
                .iter()
                .map(|p| {
                    let b = Biorder::from_permutation(p);
                    serde_json::json!({
                        "permutation": p.images(),
                        "almost_mixed_number": almost_mixed_number_with_cap(&b, DEFAULT_DIVISION_CAP).unwrap(),
                    })
                })
                .collect();
            serde_json::json!({ "suite": suite, "entries": entries })
        }
        "schroeder" => {
            // Count avoiders of both 2413 and 3142 by direct pattern search.
            let p2413 = Permutation::new(vec![2, 4, 1, 3])?;
            let p3142 = Permutation::new(vec![3, 1, 4, 2])?;
            let counts: Vec<usize> = (1..=5)
                .map(|n| {
                    all_permutations(n)
                        .iter()
                        .filter(|p| {
                            p.contains_pattern(&p2413).is_none()
                                && p.contains_pattern(&p3142).is_none()
                        })
                        .count()
                })
                .collect();
            serde_json::json!({ "suite": suite, "counts": counts })
        }
        "shuffle" => {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(_cli.seed);
            let mut entries = Vec::new();
            for j in 1..=4usize {
                let m = 1usize << j;
                let n = 8 * m;
                let mut assign: Vec<usize> = (0..n).map(|i| i % m).collect();
                assign.shuffle(&mut rng);
                let mut classes: Vec<Vec<usize>> = vec![Vec::new(); m];
                for (x, &c) in assign.iter().enumerate() {
                    classes[c].push(x + 1);
                }
                let mut o2 = Vec::new();
                for c in &classes {
                    o2.extend(c.iter().copied());
                }
                let b = Biorder::from_orders(&(1..=n).collect::<Vec<_>>(), &o2)?;
                let lists = vec![Vec::new(); m];
                let factors =
                    sepfactor::factor::factor_shuffle_with_lists(&b, &classes, lists)?;
                entries.push(serde_json::json!({
                    "classes": m,
                    "n": n,
                    "factors": factors.len(),
                    "bound": 2 * j,
                }));
            }
            serde_json::json!({ "suite": suite, "entries": entries })
        }
        "bounds" => {
            let table: Vec<serde_json::Value> = (2..=8usize)
                .map(|k| serde_json::json!({ "k": k, "bound_f": bound_f(k).unwrap() }))
                .collect();
            serde_json::json!({ "suite": suite, "table": table })
        }
        _ => bail!("unknown suite {suite:?}; expected one of sep-index-s4, minors-s5, schroeder, shuffle, bounds"),
    };
    let content = serde_json::to_string_pretty(&value)? + "\n";
    write_output(output, &content)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(cli: &Cli, n: usize, reps: usize) -> Result<ExitCode> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.seed);
    let mut rows = Vec::new();
    for rep in 0..reps {
        // Seeded 321-avoiding input: a merge of two increasing runs.
        let half = n / 2;
        let mut lo = 1..=half;
        let mut hi = half + 1..=n;
        let mut images = Vec::with_capacity(n);
        while images.len() < n {
            let take_hi = rng.gen_bool(0.5);
            match if take_hi { hi.next() } else { lo.next() } {
                Some(x) => images.push(x),
                None => {
                    images.extend(&mut lo);
                    images.extend(&mut hi);
                }
            }
        }
        let p = Permutation::new(images)?;
        let start = std::time::Instant::now();
        let cert = sepfactor::factor::factor_pipeline(&p)?;
        let elapsed = start.elapsed();
        rows.push(serde_json::json!({
            "rep": rep,
            "n": n,
            "factors": cert.factors.len(),
            "millis": elapsed.as_millis() as u64,
        }));
    }
    if cli.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({ "runs": rows }))?
        );
    } else {
        for row in &rows {
            println!(
                "rep {}: n = {}, {} factors, {} ms",
                row["rep"], row["n"], row["factors"], row["millis"]
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
