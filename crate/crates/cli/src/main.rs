//! `assign`: JSON front end for assign-core.
//!
//! Exit status 0 when the computation succeeds or the checked property holds,
//! 1 when a checked property fails (the witness is in the output), 2 on
//! input or usage errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use assign_core::apda::{apda_equals_fpttc, rounds_to_value, run_apda, run_apda_rule};
use assign_core::audit::{
    audit_report_to_value, characterization_report_to_value, check_dual_ownership,
    check_dual_ownership_reachable, check_weak_serial_dictatorship,
    check_weak_serial_dictatorship_reachable, verify_characterizations,
};
use assign_core::json::{
    allocation_to_value, domain_from_value, parse_market_with_priorities,
    parse_profile, profile_to_value,
};
use assign_core::mechanism::{verdict_to_value, Mechanism, Property};
use assign_core::priority::{analyze_structure, structure_report_to_value};
use assign_core::search::{search_mechanism, Requirements, SearchOptions};
use assign_core::ttc::{run_fpttc, run_rule, trace_to_value};
use assign_core::{Market, PreferenceDomain, PriorityStructure, RuleTable};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "assign", version, about = "Priority-based assignment rules and mechanisms")]
struct Cli {
    /// Worker threads for profile enumeration (0 = all cores).
    #[arg(long, global = true, env = "ASSIGN_JOBS", default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a rule at one profile.
    Run {
        rule: RuleKind,
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Include the step or round records.
        #[arg(long)]
        trace: bool,
    },
    /// Structural report of a priority structure.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
    /// Audit a rule over a domain, or sweep the characterizations.
    Audit {
        #[command(subcommand)]
        what: AuditCommand,
    },
    /// Run, verify or synthesize game trees.
    Mech {
        #[command(subcommand)]
        what: MechCommand,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum RuleKind {
    Fpttc,
    Apda,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    Structure {
        #[arg(long)]
        market: PathBuf,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum AuditCheck {
    DualOwnership,
    Wsd,
    ApdaEquivalence,
}

#[derive(Subcommand)]
enum AuditCommand {
    Rule {
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        check: AuditCheck,
        /// `no-outside`, `with-outside`, or a domain file.
        #[arg(long, default_value = "with-outside")]
        domain: String,
        /// Enumerate distinct executions instead of profiles (full domains only).
        #[arg(long)]
        reachable: bool,
    },
    Theorems {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        /// Largest n or m attempted.
        #[arg(long, default_value_t = 3)]
        limit: usize,
    },
}

#[derive(Args)]
struct RuleSource {
    /// Market with priorities defining the rule.
    #[arg(long)]
    market: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fpttc")]
    rule: RuleKind,
}

#[derive(Subcommand)]
enum MechCommand {
    Run {
        #[arg(long)]
        mechanism: PathBuf,
        #[arg(long)]
        profile: PathBuf,
    },
    Verify {
        #[arg(long)]
        mechanism: PathBuf,
        /// Comma separated: valid, osp, sosp, simple, implements.
        #[arg(long, default_value = "valid,osp,sosp,simple")]
        props: String,
        #[command(flatten)]
        source: RuleSource,
    },
    Search {
        #[command(flatten)]
        source: RuleSource,
        /// `no-outside`, `with-outside`, or a domain file.
        #[arg(long)]
        domain: String,
        /// Comma separated subset of simple, osp, sosp.
        #[arg(long)]
        require: String,
        #[arg(long, default_value_t = SearchOptions::default().max_profiles)]
        max_profiles: usize,
        /// Also consider moves with a single outgoing edge.
        #[arg(long)]
        allow_single_edge: bool,
    },
}

struct Output {
    value: Value,
    holds: bool,
}

impl Output {
    fn ok(value: Value) -> Self {
        Self { value, holds: true }
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_market(path: &Path) -> anyhow::Result<(Market, PriorityStructure)> {
    parse_market_with_priorities(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn load_domain(market: &Market, spec: &str) -> anyhow::Result<PreferenceDomain> {
    match spec {
        "no-outside" => Ok(PreferenceDomain::no_outside(market)),
        "with-outside" => Ok(PreferenceDomain::with_outside(market)),
        path => {
            let v: Value = serde_json::from_str(&read(Path::new(path))?)
                .with_context(|| format!("parsing {path}"))?;
            Ok(domain_from_value(market, &v)?)
        }
    }
}

fn load_mechanism(path: &Path) -> anyhow::Result<Mechanism> {
    Mechanism::parse(&read(path)?, None).with_context(|| format!("parsing {}", path.display()))
}

fn tabulate(kind: RuleKind, m: &Market, s: &PriorityStructure, d: &PreferenceDomain) -> anyhow::Result<RuleTable> {
    Ok(match kind {
        RuleKind::Fpttc => run_rule(m, s, d)?,
        RuleKind::Apda => run_apda_rule(m, s, d)?,
    })
}

/// Priorities from `--market`, checked against the names in `market`.
fn priorities_for(market: &Market, path: &Path) -> anyhow::Result<PriorityStructure> {
    let (other, s) = load_market(path)?;
    if other.agent_names() != market.agent_names() || other.object_names() != market.object_names() {
        bail!("{} names different agents or objects", path.display());
    }
    Ok(s)
}

fn run(cli: Cli) -> anyhow::Result<Output> {
    match cli.command {
        Command::Run {
            rule,
            market,
            profile,
            trace,
        } => {
            let (m, s) = load_market(&market)?;
            let p = parse_profile(&m, &read(&profile)?)?;
            let value = match (rule, trace) {
                (RuleKind::Fpttc, false) => allocation_to_value(&m, &run_fpttc(&m, &s, &p)?.allocation),
                (RuleKind::Fpttc, true) => {
                    let t = run_fpttc(&m, &s, &p)?;
                    let steps = trace_to_value(&m, &t)["steps"].take();
                    json!({"allocation": allocation_to_value(&m, &t.allocation), "trace": steps})
                }
                (RuleKind::Apda, false) => allocation_to_value(&m, &run_apda(&m, &s, &p)?.0),
                (RuleKind::Apda, true) => {
                    let (a, rounds) = run_apda(&m, &s, &p)?;
                    json!({"allocation": allocation_to_value(&m, &a), "trace": rounds_to_value(&m, &rounds)})
                }
            };
            Ok(Output::ok(value))
        }
        Command::Analyze {
            what: AnalyzeCommand::Structure { market },
        } => {
            let (m, s) = load_market(&market)?;
            Ok(Output::ok(structure_report_to_value(&m, &analyze_structure(&s)?)))
        }
        Command::Audit {
            what:
                AuditCommand::Rule {
                    market,
                    check,
                    domain,
                    reachable,
                },
        } => {
            let (m, s) = load_market(&market)?;
            let d = load_domain(&m, &domain)?;
            match check {
                AuditCheck::DualOwnership | AuditCheck::Wsd => {
                    let r = match (check, reachable) {
                        (AuditCheck::DualOwnership, false) => check_dual_ownership(&m, &s, &d)?,
                        (AuditCheck::DualOwnership, true) => check_dual_ownership_reachable(&m, &s, &d)?,
                        (_, false) => check_weak_serial_dictatorship(&m, &s, &d)?,
                        (_, true) => check_weak_serial_dictatorship_reachable(&m, &s, &d)?,
                    };
                    Ok(Output {
                        holds: r.holds,
                        value: audit_report_to_value(&m, &r),
                    })
                }
                AuditCheck::ApdaEquivalence => {
                    if reachable {
                        bail!("--reachable applies to dual-ownership and wsd");
                    }
                    let r = apda_equals_fpttc(&m, &s, &d)?;
                    let witness = r.witness.as_ref().map(|w| {
                        json!({
                            "profile": profile_to_value(&m, &w.profile),
                            "fpttc": allocation_to_value(&m, &w.fpttc),
                            "apda": allocation_to_value(&m, &w.apda),
                        })
                    });
                    Ok(Output {
                        holds: r.equal,
                        value: json!({
                            "property": "apda-equivalence",
                            "holds": r.equal,
                            "profiles_checked": r.profiles_checked,
                            "witness": witness,
                        }),
                    })
                }
            }
        }
        Command::Audit {
            what: AuditCommand::Theorems { n, m, limit },
        } => {
            let r = verify_characterizations(n, m, limit)?;
            Ok(Output {
                holds: r.holds(),
                value: characterization_report_to_value(&r),
            })
        }
        Command::Mech {
            what: MechCommand::Run { mechanism, profile },
        } => {
            let g = load_mechanism(&mechanism)?;
            let p = parse_profile(g.market(), &read(&profile)?)?;
            Ok(Output::ok(allocation_to_value(g.market(), &g.run(&p)?)))
        }
        Command::Mech {
            what: MechCommand::Verify {
                mechanism,
                props,
                source,
            },
        } => {
            let g = load_mechanism(&mechanism)?;
            let props = props
                .split(',')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(Property::parse)
                .collect::<Result<Vec<_>, _>>()?;
            let rule = match (&source.market, props.contains(&Property::Implements)) {
                (Some(path), _) => {
                    let s = priorities_for(g.market(), path)?;
                    Some(tabulate(source.rule, g.market(), &s, g.domain())?)
                }
                (None, true) => bail!("`implements` needs --market with priorities"),
                (None, false) => None,
            };
            let verdicts = g.verify(&props, rule.as_ref())?;
            let mut out = serde_json::Map::new();
            for v in &verdicts {
                out.insert(v.property.as_str().into(), verdict_to_value(g.market(), v));
            }
            Ok(Output {
                holds: verdicts.iter().all(|v| v.holds),
                value: Value::Object(out),
            })
        }
        Command::Mech {
            what:
                MechCommand::Search {
                    source,
                    domain,
                    require,
                    max_profiles,
                    allow_single_edge,
                },
        } => {
            let Some(path) = &source.market else {
                bail!("search needs --market with priorities");
            };
            let (m, s) = load_market(path)?;
            let d = load_domain(&m, &domain)?;
            let rule = tabulate(source.rule, &m, &s, &d)?;
            let opts = SearchOptions {
                max_profiles,
                allow_single_edge,
                ..Default::default()
            };
            let out = search_mechanism(&m, &rule, &d, Requirements::parse(&require)?, &opts)?;
            Ok(match out.mechanism {
                Some(g) => Output::ok(json!({
                    "result": "found",
                    "states_explored": out.states_explored,
                    "mechanism": g.to_value(),
                })),
                None => Output {
                    holds: false,
                    value: json!({"result": "none", "states_explored": out.states_explored}),
                },
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 2 } else { 0 });
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("assign: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(out) => {
            println!("{}", serde_json::to_string_pretty(&out.value).expect("values serialize"));
            ExitCode::from(if out.holds { 0 } else { 1 })
        }
        Err(e) => {
            println!("{}", json!({"error": format!("{e:#}")}));
            eprintln!("assign: {e:#}");
            ExitCode::from(2)
        }
    }
}
