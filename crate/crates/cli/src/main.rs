//! `oddform`: builds instances from JSON configs, runs the verification
//! suites, enumerates form parameters and orbits, checks sandwich
//! containments and reproduces the worked M_2(F_2) scenario.

mod config;
mod report;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use oddform_core::action::{
    conj_form_parameter, orbits, run_example_174, sampled_group_elements, theorem47_check,
    theorem47_exhaustive_n1, verify_action_laws, verify_lemma46_agreement,
    involution_invariant_ideals,
};
use oddform_core::congruence::{
    eu_generators, in_principal, in_principal_bruteforce, verify_lemma134, verify_lemma37,
    verify_lemma38, verify_lemma71, ElementaryMove, Level,
};
use oddform_core::formparam::{
    enumerate_form_parameters, enumerate_relative_form_parameters, verify_lemma7, verify_remark10,
};
use oddform_core::rings::{Elem, ElemSet};
use oddform_core::sandwich::{
    builtin_subgroup, is_e_normal, random_unitary, sandwich_check, SubgroupHandle, Verdict,
};
use oddform_core::unitary::{
    enumerate_unitary_group, is_unitary, is_unitary_bruteforce, verify_lemma15, verify_relations,
    FormsContext, GenWord, UMatrix, ValueSampling,
};

use config::{build_context, InstanceConfig};
use report::{Check, Report, Status};

#[derive(Parser)]
#[command(name = "oddform", version, about = "odd-dimensional unitary group verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Instance configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report output path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every sampled sweep.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Global bound for closures and enumerations.
    #[arg(long, global = true, default_value_t = 1 << 21)]
    cap: u64,
    /// Exit 3 when any check is truncated.
    #[arg(long, global = true)]
    strict: bool,
    /// Render matrices with readable ring elements in witnesses.
    #[arg(long, global = true)]
    pretty: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite against the configured instance.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Enumerate form parameters or relative form parameters.
    Enumerate {
        #[arg(long, value_enum, default_value_t = What::FormParameters)]
        what: What,
        /// Ideal as comma-separated element indices (relative mode).
        #[arg(long)]
        ideal: Option<String>,
    },
    /// Reachability partition of ROFP(I) under supplied witnesses.
    Orbits {
        #[arg(long)]
        ideal: Option<String>,
        /// JSON file with witnesses (matrices or generator words).
        #[arg(long)]
        witnesses: Option<PathBuf>,
    },
    /// Level extraction, E-normality and sandwich containments.
    Sandwich {
        /// JSON subgroup description or a builtin name.
        #[arg(long)]
        subgroup: String,
    },
    /// Reproduce the worked M_2(F_2) scenario end to end.
    ReproExample174,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Quasimodule,
    Relations,
    Membership,
    Congruence,
    Action,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    FormParameters,
    Relative,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum WitnessEntry {
    Word(GenWord),
    Entries(Vec<Elem>),
}

#[derive(Debug, Deserialize)]
struct WitnessFile {
    witnesses: Vec<WitnessEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SubgroupFile {
    Builtin { name: String },
    Generators { generators: Vec<GenWord>, #[serde(default)] cap: Option<usize> },
}

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(cli));
}

fn load_config(cli: &Cli) -> Result<InstanceConfig, String> {
    let path = cli.config.as_ref().ok_or("this command needs --config")?;
    let text = std::fs::read_to_string(path).map_err(|e| format!("reading config: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("parsing config: {e}"))
}

fn parse_ideal(ctx: &FormsContext, spec: &Option<String>) -> Result<ElemSet, String> {
    let r = ctx.ring();
    match spec {
        None => Ok(ElemSet::from_iter(r.size(), [r.zero()])),
        Some(s) => {
            let mut gens = Vec::new();
            for part in s.split(',').filter(|p| !p.trim().is_empty()) {
                let idx: Elem =
                    part.trim().parse().map_err(|e| format!("bad ideal element: {e}"))?;
                if idx >= r.size() {
                    return Err(format!("ideal element {idx} out of range"));
                }
                gens.push(idx);
            }
            Ok(oddform_core::rings::involution_invariant_ideal(
                r,
                ctx.quad().involution(),
                &gens,
            ))
        }
    }
}

fn emit(cli: &Cli, report: &Report) -> i32 {
    let json = serde_json::to_string_pretty(report).expect("reports serialize");
    match &cli.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                eprintln!("writing report: {e}");
                return 2;
            }
        }
        None => println!("{json}"),
    }
    if report.any_fail() {
        1
    } else if cli.strict && report.any_truncated() {
        3
    } else {
        0
    }
}

fn run(cli: Cli) -> i32 {
    let started = Instant::now();
    match &cli.command {
        Command::ReproExample174 => {
            let outcome = match run_example_174(3, cli.seed) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("scenario failed to run: {e}");
                    return 2;
                }
            };
            let mut checks = Vec::new();
            for (name, ok) in &outcome.checks {
                checks.push(if *ok {
                    Check::pass(name, 1)
                } else {
                    Check::fail(name, 1, "assertion failed".into())
                });
            }
            let detail = serde_json::json!({
                "orbit_blocks": outcome.orbit_blocks,
                "forcing_note": outcome.forcing_note,
            });
            let report = Report {
                command: "repro-example174".into(),
                instance: "m2f2-transpose-mu0-dmax-n3".into(),
                seed: cli.seed,
                cap: cli.cap,
                checks,
                detail: Some(detail),
                timing_ms: started.elapsed().as_millis(),
            };
            emit(&cli, &report)
        }
        Command::Verify { suite } => {
            let cfg = match load_config(&cli) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let ctx = match build_context(&cfg, cli.cap) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let mut checks = Vec::new();
            let run_all = matches!(suite, Suite::All);
            if run_all || matches!(suite, Suite::Quasimodule) {
                suite_quasimodule(&ctx, &cli, &mut checks);
            }
            if run_all || matches!(suite, Suite::Relations) {
                suite_relations(&ctx, &cli, &mut checks);
            }
            if run_all || matches!(suite, Suite::Membership) {
                suite_membership(&ctx, &cli, &mut checks);
            }
            if run_all || matches!(suite, Suite::Congruence) {
                suite_congruence(&ctx, &cli, &mut checks);
            }
            if run_all || matches!(suite, Suite::Action) {
                suite_action(&ctx, &cli, &mut checks);
            }
            let report = Report {
                command: "verify".into(),
                instance: ctx.digest().into(),
                seed: cli.seed,
                cap: cli.cap,
                checks,
                detail: None,
                timing_ms: started.elapsed().as_millis(),
            };
            emit(&cli, &report)
        }
        Command::Enumerate { what, ideal } => {
            let cfg = match load_config(&cli) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let ctx = match build_context(&cfg, cli.cap) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let mut relative_ideal = None;
            let listing = match what {
                What::FormParameters => {
                    enumerate_form_parameters(ctx.quad(), cli.cap as usize)
                }
                What::Relative => {
                    let i = match parse_ideal(&ctx, ideal) {
                        Ok(i) => i,
                        Err(e) => {
                            eprintln!("config error: {e}");
                            return 2;
                        }
                    };
                    let out =
                        enumerate_relative_form_parameters(ctx.form_ring(), &i, cli.cap as usize);
                    relative_ideal = Some(i);
                    out
                }
            };
            let sets = match listing {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("enumeration overflow: {e}");
                    return 4;
                }
            };
            let entries: Vec<serde_json::Value> = sets
                .iter()
                .map(|s| {
                    let mut v = serde_json::json!({
                        "size": s.len(),
                        "points": s.to_pairs(),
                    });
                    if cli.pretty {
                        let r = ctx.ring();
                        v["rendered"] = serde_json::json!(s
                            .iter()
                            .map(|p| format!("({}, {})", r.render(p.x), r.render(p.y)))
                            .collect::<Vec<_>>());
                    }
                    if let Some(ideal_set) = &relative_ideal {
                        let ds = oddform_core::formparam::derived_sets(
                            ctx.form_ring(),
                            ideal_set,
                            s,
                        );
                        let arr = |e: &ElemSet| e.iter().collect::<Vec<_>>();
                        v["derived"] = serde_json::json!({
                            "j_delta": arr(&ds.j_delta),
                            "i_tilde": arr(&ds.i_tilde),
                            "i0": arr(&ds.i0),
                            "i_tilde0": arr(&ds.i_tilde0),
                            "j_omega": arr(&ds.j_omega),
                            "lambda_delta": arr(&ds.lambda_delta),
                            "gamma_omega": arr(&ds.gamma_omega),
                        });
                    }
                    v
                })
                .collect();
            let report = Report {
                command: "enumerate".into(),
                instance: ctx.digest().into(),
                seed: cli.seed,
                cap: cli.cap,
                checks: vec![Check::pass("enumeration", sets.len())],
                detail: Some(serde_json::json!({ "count": sets.len(), "parameters": entries })),
                timing_ms: started.elapsed().as_millis(),
            };
            emit(&cli, &report)
        }
        Command::Orbits { ideal, witnesses } => {
            let cfg = match load_config(&cli) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let ctx = match build_context(&cfg, cli.cap) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let ideal_set = match parse_ideal(&ctx, ideal) {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let mut mats: Vec<UMatrix> = Vec::new();
            if let Some(path) = witnesses {
                let text = match std::fs::read_to_string(path) {
                    Ok(t) => t,
                    Err(e) => {
                        eprintln!("reading witnesses: {e}");
                        return 2;
                    }
                };
                let file: WitnessFile = match serde_json::from_str(&text) {
                    Ok(f) => f,
                    Err(e) => {
                        eprintln!("parsing witnesses: {e}");
                        return 2;
                    }
                };
                for entry in file.witnesses {
                    let m = match entry {
                        WitnessEntry::Word(w) => match w.build(&ctx) {
                            Ok(m) => m,
                            Err(e) => {
                                eprintln!("bad witness word: {e}");
                                return 2;
                            }
                        },
                        WitnessEntry::Entries(v) => {
                            if v.len() != ctx.dim() * ctx.dim() {
                                eprintln!("witness matrix has wrong size");
                                return 2;
                            }
                            UMatrix::from_entries(&ctx, v)
                        }
                    };
                    match is_unitary(&ctx, &m) {
                        Ok(c) if c.ok => mats.push(m),
                        _ => {
                            eprintln!("witness is not unitary");
                            return 2;
                        }
                    }
                }
            }
            let partition = match orbits(&ctx, &ideal_set, &mats, cli.cap as usize) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("enumeration overflow: {e}");
                    return 4;
                }
            };
            let digest_of = |s: &oddform_core::formparam::PointSet| -> String {
                use sha2::{Digest, Sha256};
                let mut h = Sha256::new();
                for (x, y) in s.to_pairs() {
                    h.update(x.to_le_bytes());
                    h.update(y.to_le_bytes());
                }
                h.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect()
            };
            let blocks: Vec<serde_json::Value> = partition
                .blocks
                .iter()
                .zip(&partition.exact)
                .map(|(b, exact)| {
                    serde_json::json!({
                        "members": b,
                        "digests": b
                            .iter()
                            .map(|&i| digest_of(&partition.lattice[i]))
                            .collect::<Vec<_>>(),
                        "sizes": b.iter().map(|&i| partition.lattice[i].len()).collect::<Vec<_>>(),
                        "exact_orbit": exact,
                    })
                })
                .collect();
            let witnesses_json: Vec<serde_json::Value> = partition
                .witnesses
                .iter()
                .map(|((a, b), w)| serde_json::json!({ "from": a, "to": b, "by": w }))
                .collect();
            let report = Report {
                command: "orbits".into(),
                instance: ctx.digest().into(),
                seed: cli.seed,
                cap: cli.cap,
                checks: vec![Check::pass(&partition.label, partition.lattice.len())],
                detail: Some(serde_json::json!({
                    "label": partition.label,
                    "lattice_size": partition.lattice.len(),
                    "blocks": blocks,
                    "witnesses": witnesses_json,
                })),
                timing_ms: started.elapsed().as_millis(),
            };
            emit(&cli, &report)
        }
        Command::Sandwich { subgroup } => {
            let cfg = match load_config(&cli) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let ctx = match build_context(&cfg, cli.cap) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return 2;
                }
            };
            let handle = match load_subgroup(&ctx, subgroup, cli.cap as usize) {
                Ok(h) => h,
                Err(e) => {
                    eprintln!("subgroup error: {e}");
                    return 2;
                }
            };
            let eu = eu_generators(&ctx);
            let mut checks = Vec::new();
            match is_e_normal(&ctx, &handle, &eu, 32, cli.seed) {
                Ok(Verdict::Verified { note }) => {
                    checks.push(Check { id: "e-normal".into(), status: Status::Pass, cases: eu.len(), witness: Some(note) });
                }
                Ok(Verdict::Refuted { witness }) => checks.push(Check::fail("e-normal", eu.len(), witness)),
                Ok(Verdict::Truncated { note }) => checks.push(Check::truncated("e-normal", eu.len(), note)),
                Err(e) => checks.push(Check::fail("e-normal", 0, e.to_string())),
            }
            let mut detail = None;
            match sandwich_check(&ctx, &handle, &eu, 64, cli.seed) {
                Ok(rep) => {
                    checks.push(verdict_check("eu-level-contained-in-h", &rep.lower));
                    checks.push(verdict_check("h-contained-in-cu-level", &rep.upper));
                    detail = Some(serde_json::json!({
                        "level": {
                            "ideal": rep.level.level.ideal().iter().collect::<Vec<_>>(),
                            "omega": rep.level.level.omega().to_pairs(),
                        },
                    }));
                }
                Err(e) => checks.push(Check::fail("sandwich", 0, e.to_string())),
            }
            let report = Report {
                command: "sandwich".into(),
                instance: ctx.digest().into(),
                seed: cli.seed,
                cap: cli.cap,
                checks,
                detail,
                timing_ms: started.elapsed().as_millis(),
            };
            emit(&cli, &report)
        }
    }
}

fn verdict_check(id: &str, v: &Verdict) -> Check {
    match v {
        Verdict::Verified { note } => {
            Check { id: id.into(), status: Status::Pass, cases: 1, witness: Some(note.clone()) }
        }
        Verdict::Refuted { witness } => Check::fail(id, 1, witness.clone()),
        Verdict::Truncated { note } => Check::truncated(id, 1, note.clone()),
    }
}

fn load_subgroup(
    ctx: &FormsContext,
    spec: &str,
    cap: usize,
) -> Result<SubgroupHandle, String> {
    if let Ok(path) = std::fs::read_to_string(spec) {
        let file: SubgroupFile = serde_json::from_str(&path).map_err(|e| e.to_string())?;
        match file {
            SubgroupFile::Builtin { name } => builtin_subgroup(ctx, &name).map_err(|e| e.to_string()),
            SubgroupFile::Generators { generators, cap: file_cap } => {
                let mut gens = Vec::new();
                for w in generators {
                    gens.push(w.build(ctx).map_err(|e| e.to_string())?);
                }
                Ok(SubgroupHandle::from_generators("file", gens, file_cap.unwrap_or(cap)))
            }
        }
    } else {
        builtin_subgroup(ctx, spec).map_err(|e| e.to_string())
    }
}

fn small_group(ctx: &FormsContext, cli: &Cli) -> (Vec<UMatrix>, bool) {
    if ctx.n() == 1 {
        if let Ok(group) = enumerate_unitary_group(ctx, cli.cap) {
            return (group, true);
        }
    }
    (sampled_group_elements(ctx, 24, 6, cli.seed), false)
}

fn suite_quasimodule(ctx: &FormsContext, cli: &Cli, checks: &mut Vec<Check>) {
    let l7 = verify_lemma7(ctx.quad(), cli.seed);
    for (name, ok) in &l7.items {
        checks.push(if *ok {
            Check::pass(&format!("lemma7/{name}"), 1)
        } else {
            Check::fail(&format!("lemma7/{name}"), 1, "identity failed".into())
        });
    }
    let r10 = verify_remark10(ctx.form_ring());
    for (name, ok) in &r10.items {
        checks.push(if *ok {
            Check::pass(&format!("remark10/{name}"), 1)
        } else {
            Check::fail(&format!("remark10/{name}"), 1, "property failed".into())
        });
    }
    let l15 = verify_lemma15(ctx, cli.cap, 512, cli.seed);
    checks.push(Check::from_flags("lemma15", l15.cases, &l15.failures));
}

fn suite_relations(ctx: &FormsContext, cli: &Cli, checks: &mut Vec<Check>) {
    if ctx.n() < 3 {
        checks.push(Check::truncated(
            "relations",
            0,
            "all index patterns need n >= 3".into(),
        ));
        return;
    }
    let sampling = if ctx.ring().size() <= 4 {
        ValueSampling::Exhaustive
    } else {
        ValueSampling::Sampled { count: 4, seed: cli.seed }
    };
    let report = verify_relations(ctx, sampling);
    for entry in &report.entries {
        checks.push(Check::from_flags(&format!("relation/{}", entry.id), entry.cases, &entry.failures));
    }
}

fn suite_membership(ctx: &FormsContext, cli: &Cli, checks: &mut Vec<Check>) {
    let d = ctx.dim() as u32;
    let total = (ctx.ring().size() as u64).checked_pow(d * d);
    match total {
        Some(t) if t <= cli.cap && ctx.n() == 1 => {
            // oracle equivalence over every invertible matrix
            let mut cases = 0usize;
            let mut failures = Vec::new();
            let s = ctx.ring().size() as u64;
            for code in 0..t {
                let mut rest = code;
                let mut entries = vec![0u32; (d * d) as usize];
                for slot in entries.iter_mut() {
                    *slot = (rest % s) as u32;
                    rest /= s;
                }
                let m = UMatrix::from_entries(ctx, entries);
                if !m.is_invertible(ctx) {
                    continue;
                }
                cases += 1;
                let fast = is_unitary(ctx, &m).map(|c| c.ok).unwrap_or(false);
                let slow = is_unitary_bruteforce(ctx, &m, cli.cap).unwrap_or(false);
                if fast != slow && failures.len() < 5 {
                    failures.push(format!("disagreement at code {code}"));
                }
            }
            checks.push(Check::from_flags("membership-oracle-equivalence", cases, &failures));
        }
        _ => {
            // sampled: generated unitaries must satisfy the column criterion
            let gens = eu_generators(ctx);
            let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(cli.seed);
            let mut cases = 0usize;
            let mut failures = Vec::new();
            for _ in 0..64 {
                let m = random_unitary(ctx, &gens, 8, &mut rng);
                cases += 1;
                match is_unitary(ctx, &m) {
                    Ok(c) if c.ok => {}
                    _ => {
                        if failures.len() < 5 {
                            failures.push("generated element failed the criterion".into());
                        }
                    }
                }
            }
            checks.push(Check::from_flags("membership-generated-sample", cases, &failures));
            checks.push(Check::truncated(
                "membership-oracle-equivalence",
                0,
                "full matrix enumeration out of reach at this size".into(),
            ));
        }
    }
}

fn suite_congruence(ctx: &FormsContext, cli: &Cli, checks: &mut Vec<Check>) {
    let (group, exhaustive) = small_group(ctx, cli);
    let vector_space = (ctx.ring().size() as u64).checked_pow(ctx.dim() as u32);
    let abs_level = Level::absolute(ctx);
    let zero_level = Level::zero(ctx);
    for (name, level) in [("absolute", &abs_level), ("zero", &zero_level)] {
        match vector_space {
            Some(v) if v.saturating_mul(v) <= cli.cap => {
                match verify_lemma37(ctx, level, cli.cap) {
                    Ok(rep) => checks.push(Check::from_flags(
                        &format!("lemma37/{name}"),
                        rep.cases,
                        &rep.failures,
                    )),
                    Err(e) => checks.push(Check::truncated(
                        &format!("lemma37/{name}"),
                        0,
                        e.to_string(),
                    )),
                }
                match verify_lemma38(ctx, level, &group, cli.cap) {
                    Ok(rep) => checks.push(Check::from_flags(
                        &format!("lemma38/{name}"),
                        rep.cases,
                        &rep.failures,
                    )),
                    Err(e) => checks.push(Check::truncated(
                        &format!("lemma38/{name}"),
                        0,
                        e.to_string(),
                    )),
                }
            }
            _ => {
                checks.push(Check::truncated(
                    &format!("lemma37/{name}"),
                    0,
                    "vector space too large".into(),
                ));
            }
        }
    }
    {
        // coordinate characterization at the maximal relative parameter
        let r = ctx.ring();
        let zero = ElemSet::from_iter(r.size(), [r.zero()]);
        let omax = oddform_core::formparam::omega_max(ctx.form_ring(), &zero);
        match oddform_core::formparam::OddFormIdeal::certify(ctx.form_ring(), zero, omax) {
            Ok(ideal) => {
                let max_level = Level::new(ctx, ideal);
                let rep = oddform_core::congruence::verify_remark40(ctx, &max_level, &group);
                checks.push(Check::from_flags("remark40", rep.cases, &rep.failures));
            }
            Err(e) => checks.push(Check::truncated("remark40", 0, e.to_string())),
        }
    }
    if exhaustive {
        match verify_lemma134(ctx, &zero_level, &group) {
            Ok(rep) => checks.push(Check::from_flags("lemma134", rep.cases, &rep.failures)),
            Err(e) => checks.push(Check::truncated("lemma134", 0, e.to_string())),
        }
        // principal membership against the literal predicate
        let mut cases = 0usize;
        let mut failures = Vec::new();
        for m in &group {
            cases += 1;
            let fast = in_principal(ctx, &zero_level, m).ok;
            let slow = in_principal_bruteforce(ctx, &zero_level, m, cli.cap).unwrap_or(!fast);
            if fast != slow && failures.len() < 5 {
                failures.push("principal membership disagreement".into());
            }
        }
        checks.push(Check::from_flags("lemma39-vs-def36", cases, &failures));
    } else {
        checks.push(Check::truncated("lemma134", 0, "full group not enumerable".into()));
    }
    // commutator column identities on sampled pairs
    let mut rng = <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(cli.seed ^ 0x71);
    if ctx.n() >= 3 {
        let gens = eu_generators(ctx);
        let mut cases = 0usize;
        let mut failures = Vec::new();
        use rand::Rng;
        for _ in 0..25 {
            let sigma = random_unitary(ctx, &gens, 5, &mut rng);
            let hb = ctx.theta_hb();
            let i = hb[rng.gen_range(0..hb.len())];
            let mut j = hb[rng.gen_range(0..hb.len())];
            while j == i || j == -i {
                j = hb[rng.gen_range(0..hb.len())];
            }
            let x = rng.gen_range(0..ctx.ring().size());
            let mv = if rng.gen_bool(0.5) {
                ElementaryMove::Short { i, j, x }
            } else {
                let pts = ctx.delta_signed(-oddform_core::unitary::eps(i)).points();
                let a = pts[rng.gen_range(0..pts.len())];
                ElementaryMove::Extra { i, a }
            };
            match verify_lemma71(ctx, &sigma, mv) {
                Ok(rep) => {
                    cases += rep.cases;
                    failures.extend(rep.failures);
                }
                Err(e) => failures.push(e.to_string()),
            }
        }
        checks.push(Check::from_flags("lemma71", cases, &failures));
    } else {
        checks.push(Check::truncated("lemma71", 0, "needs n >= 3".into()));
    }
}

fn suite_action(ctx: &FormsContext, cli: &Cli, checks: &mut Vec<Check>) {
    let (group, exhaustive) = small_group(ctx, cli);
    for ideal in involution_invariant_ideals(ctx) {
        let tag = format!("|I|={}", ideal.len());
        match verify_action_laws(ctx, &ideal, &group, cli.cap as usize) {
            Ok(rep) => {
                checks.push(Check::from_flags(&format!("action-laws/{tag}"), rep.cases, &rep.failures))
            }
            Err(e) => checks.push(Check::truncated(&format!("action-laws/{tag}"), 0, e.to_string())),
        }
        match verify_lemma46_agreement(ctx, &ideal, &group, cli.cap as usize) {
            Ok(rep) => checks.push(Check::from_flags(
                &format!("lemma46-agreement/{tag}"),
                rep.cases,
                &rep.failures,
            )),
            Err(e) => checks.push(Check::truncated(
                &format!("lemma46-agreement/{tag}"),
                0,
                e.to_string(),
            )),
        }
        if exhaustive {
            match theorem47_exhaustive_n1(ctx, cli.cap) {
                Ok(rep) => {
                    checks.push(Check::from_flags("theorem47-exhaustive", rep.cases, &rep.failures))
                }
                Err(e) => checks.push(Check::truncated("theorem47-exhaustive", 0, e.to_string())),
            }
            break; // the exhaustive sweep already covers every ideal
        } else {
            let lattice = match enumerate_relative_form_parameters(
                ctx.form_ring(),
                &ideal,
                cli.cap as usize,
            ) {
                Ok(l) => l,
                Err(e) => {
                    checks.push(Check::truncated(&format!("theorem47/{tag}"), 0, e.to_string()));
                    continue;
                }
            };
            let mut cases = 0usize;
            let mut failures = Vec::new();
            for omega in lattice.iter().take(6) {
                for sigma in group.iter().take(6) {
                    match theorem47_check(ctx, &ideal, sigma, omega, None) {
                        Ok(rep) => {
                            cases += rep.cases;
                            failures.extend(rep.failures);
                        }
                        Err(e) => failures.push(e.to_string()),
                    }
                }
            }
            checks.push(Check::from_flags(&format!("theorem47/{tag}"), cases, &failures));
        }
    }
    let _ = conj_form_parameter; // referenced by the congruence cross-checks
}
