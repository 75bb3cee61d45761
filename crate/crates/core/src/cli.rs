//! Command-line front end. Every report is deterministic JSON (pretty
//! printed); exit codes are 0 = success/valid, 1 = countermodel or failed
//! verification, 2 = usage or input error.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fixedbitset::FixedBitSet;
use serde::Serialize;
use serde_json::json;

use crate::formula::{parse, Formula, FormulaTree};
use crate::kripke::{as_pba, enumerate_pba_structures, frame_properties, pba_frame, quotient_clusters, to_dot, Frame, Model};
use crate::labeling::{hybrid_labeling, product_labeling, verify_on, Labeling, TranslationChecker};
use crate::multiverse::{control_axioms_on, independence_on, ControlFamily, MState, Multiverse, RatchetBounds, Regime, TButtons};
use crate::posets::seq::{index_of, seq_of};
use crate::posets::{self, ad_code, avoid_basic_open, coding_certificate, coding_schedule, rasiowa_sikorski, PYCondition, PyPoset, RealHandle, SetHandle};
use crate::random::Corpus;
use crate::theories::s42_decide;

#[derive(Debug, Parser)]
#[command(name = "mlf", version, about = "Finite models for the modal logic of forcing")]
pub struct Cli {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a formula and print its canonical rendering and tree.
    Parse { formula: String },
    /// Bounded S4.2 refutation search over pre-Boolean-algebras.
    Decide {
        formula: String,
        #[arg(long = "m", default_value_t = 3)]
        m_max: usize,
        #[arg(long = "c", default_value_t = 3)]
        cluster_max: usize,
    },
    /// Enumerate pBA frames or inspect a frame file.
    Frames {
        #[command(subcommand)]
        action: FramesAction,
    },
    /// Build a control-statement multiverse and check its axioms.
    Multiverse {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_enum, default_value_t = MultiverseReport::Axioms)]
        report: MultiverseReport,
    },
    /// Verify a product or hybrid labeling of a uniform pBA.
    VerifyLabeling {
        #[command(flatten)]
        labeling: LabelingArgs,
    },
    /// Check the valuation translation on seeded random formulas.
    TranslateCheck {
        #[command(flatten)]
        labeling: LabelingArgs,
        #[arg(long, default_value_t = 200)]
        formulas: usize,
        #[arg(long, default_value_t = 3)]
        atoms: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also check every formula up to this modal depth over one atom.
        #[arg(long)]
        exhaustive_depth: Option<usize>,
    },
    /// Forcing-poset combinatorics.
    Posets {
        #[command(subcommand)]
        action: PosetsAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum FramesAction {
    /// All pBAs of base size `m` with clusters of size at most `c`.
    Enumerate {
        #[arg(long = "m")]
        m: usize,
        #[arg(long = "c")]
        c: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Frame properties, clusters and pBA recognition for a frame file.
    Check {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Debug, Subcommand)]
pub enum PosetsAction {
    /// Table of the sequence enumeration.
    SeqTable {
        #[arg(long, default_value_t = 32)]
        count: u128,
    },
    /// First elements of the almost-disjoint code of a real.
    AdCode {
        /// `head;cycle`, e.g. `1,2;0` for 1,2,0,0,…
        real: String,
        #[arg(long, default_value_t = 8)]
        count: usize,
    },
    /// A basic open avoiding all given reals.
    Avoid { reals: Vec<String> },
    /// Build a coding chain over ℙ_Y and certify it.
    Coding {
        #[arg(long, default_value_t = 4)]
        handles: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [0usize, 2])]
        coded: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 20)]
        growth: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MultiverseReport {
    Axioms,
    Independence,
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelingRegime {
    Product,
    Hybrid,
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    /// JSON family file; overrides the inline flags.
    #[arg(long)]
    pub family: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub buttons: u32,
    #[arg(long, default_value_t = 0)]
    pub switches: u32,
    #[arg(long, default_value_t = 0)]
    pub nswitch: u32,
    /// `alpha_max,k_max`
    #[arg(long)]
    pub ratchet: Option<String>,
    #[arg(long)]
    pub t_buttons: Option<u32>,
    #[arg(long)]
    pub unbounded: bool,
    #[arg(long)]
    pub hybrid: bool,
    #[arg(long)]
    pub sw_decoupled: bool,
}

#[derive(Debug, Clone, Args)]
pub struct LabelingArgs {
    /// `m=<base size>,n=<cluster size>`
    #[arg(long)]
    pub pba: String,
    #[arg(long, value_enum, default_value_t = LabelingRegime::Product)]
    pub regime: LabelingRegime,
    #[arg(long, default_value_t = 8)]
    pub t_buttons: u32,
    #[arg(long)]
    pub sw_decoupled: bool,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

struct Output {
    body: String,
    code: i32,
}

fn json_out<T: Serialize>(value: &T, code: i32) -> Output {
    let mut body = serde_json::to_string_pretty(value).expect("reports serialize");
    body.push('\n');
    Output { body, code }
}

/// Runs the CLI on `args` (including the program name).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(stdout, "{e}")
            } else {
                write!(stderr, "{e}")
            };
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(out) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &out.body).map_err(|e| e.to_string()),
                None => stdout.write_all(out.body.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => out.code,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    2
                }
            }
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn formula_arg(text: &str) -> Result<Formula, Failure> {
    parse(text).map_err(|e| usage(format!("{e}")))
}

fn dispatch(cmd: &Command) -> Result<Output, Failure> {
    match cmd {
        Command::Parse { formula } => {
            let f = formula_arg(formula)?;
            Ok(json_out(
                &json!({
                    "input": formula,
                    "rendered": f.to_string(),
                    "modal_depth": f.modal_depth(),
                    "size": f.size(),
                    "atoms": f.atoms(),
                    "tree": FormulaTree::from(f.clone()),
                }),
                0,
            ))
        }
        Command::Decide {
            formula,
            m_max,
            cluster_max,
        } => {
            let f = formula_arg(formula)?;
            let outcome = s42_decide(&f, *m_max, *cluster_max);
            let code = i32::from(outcome.is_countermodel());
            Ok(json_out(
                &json!({ "formula": f.to_string(), "result": outcome }),
                code,
            ))
        }
        Command::Frames { action } => frames(action),
        Command::Multiverse { family, report } => {
            let fam = family_from(family)?;
            let mv = Multiverse::build(&fam, MState::default()).map_err(|e| usage(e.to_string()))?;
            Ok(match report {
                MultiverseReport::Axioms => {
                    let r = control_axioms_on(&mv);
                    let code = i32::from(!r.all_pass);
                    json_out(&json!({ "family": fam, "report": r }), code)
                }
                MultiverseReport::Independence => {
                    let r = independence_on(&mv);
                    let code = i32::from(!r.pass);
                    json_out(&json!({ "family": fam, "report": r }), code)
                }
                MultiverseReport::Model => json_out(
                    &json!({ "family": fam, "initial": mv.state_id(mv.initial), "model": mv.model }),
                    0,
                ),
            })
        }
        Command::VerifyLabeling { labeling } => {
            let (lab, mv) = build_labeling(labeling)?;
            let r = verify_on(&lab, &mv).map_err(|e| usage(e.to_string()))?;
            let code = i32::from(!r.all_pass());
            Ok(json_out(
                &json!({ "family": mv.family, "labeling": lab, "report": r }),
                code,
            ))
        }
        Command::TranslateCheck {
            labeling,
            formulas,
            atoms,
            depth,
            seed,
            exhaustive_depth,
        } => translate_check(labeling, *formulas, *atoms, *depth, *seed, *exhaustive_depth),
        Command::Posets { action } => posets_cmd(action),
    }
}

fn frames(action: &FramesAction) -> Result<Output, Failure> {
    match action {
        FramesAction::Enumerate { m, c, format } => {
            let structures: Vec<_> = enumerate_pba_structures(*m, *c).collect();
            match format {
                Format::Json => {
                    let items: Vec<_> = structures
                        .iter()
                        .map(|s| json!({ "cluster_sizes": s.cluster_sizes(), "frame": s.to_frame() }))
                        .collect();
                    Ok(json_out(&json!({ "m": m, "c": c, "count": items.len(), "frames": items }), 0))
                }
                Format::Dot => Ok(Output {
                    body: structures.iter().map(|s| to_dot(&s.to_frame())).collect(),
                    code: 0,
                }),
            }
        }
        FramesAction::Check { input, format } => {
            let text = std::fs::read_to_string(input).map_err(|e| usage(format!("{}: {e}", input.display())))?;
            let frame: Frame = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", input.display())))?;
            if *format == Format::Dot {
                return Ok(Output {
                    body: to_dot(&frame),
                    code: 0,
                });
            }
            let names = |cls: &Vec<Vec<usize>>| -> Vec<Vec<String>> {
                cls.iter()
                    .map(|c| c.iter().map(|&w| frame.worlds()[w].clone()).collect())
                    .collect()
            };
            let clusters = quotient_clusters(&frame).map(|q| names(&q.classes)).ok();
            let pba = match as_pba(&frame) {
                Ok(s) => json!({ "ok": true, "base_size": s.base_size, "cluster_sizes": s.cluster_sizes() }),
                Err(e) => json!({ "ok": false, "reason": e.to_string() }),
            };
            Ok(json_out(
                &json!({ "properties": frame_properties(&frame), "clusters": clusters, "pba": pba }),
                0,
            ))
        }
    }
}

fn family_from(a: &FamilyArgs) -> Result<ControlFamily, Failure> {
    if let Some(path) = &a.family {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        return serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())));
    }
    let ratchet = match &a.ratchet {
        None => None,
        Some(spec) => {
            let (x, k) = spec
                .split_once(',')
                .ok_or_else(|| usage("--ratchet expects alpha_max,k_max"))?;
            let parse = |s: &str| s.trim().parse::<u16>().map_err(|_| usage("--ratchet expects numbers"));
            Some(RatchetBounds {
                alpha_max: parse(x)?,
                k_max: parse(k)?,
            })
        }
    };
    Ok(ControlFamily {
        buttons: a.buttons,
        switches: a.switches,
        nswitch: a.nswitch,
        ratchet,
        t_buttons: a.t_buttons.map(|count| TButtons {
            count,
            unbounded: a.unbounded || a.hybrid,
        }),
        regime: if a.hybrid {
            Regime::HybridAdversarial {
                sw_decoupled: a.sw_decoupled,
            }
        } else {
            Regime::Independent
        },
        rewire: BTreeMap::new(),
    })
}

fn parse_pba(spec: &str) -> Result<(usize, usize), Failure> {
    let mut m = None;
    let mut n = None;
    for part in spec.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("--pba: expected key=value, got {part:?}")))?;
        let v: usize = v.trim().parse().map_err(|_| usage(format!("--pba: bad number {v:?}")))?;
        match k.trim() {
            "m" => m = Some(v),
            "n" => n = Some(v),
            other => return Err(usage(format!("--pba: unknown key {other:?}"))),
        }
    }
    let (m, n) = (m.unwrap_or(0), n.unwrap_or(1));
    if m > 5 || n == 0 || n > 8 {
        return Err(usage("--pba: need m <= 5 and 1 <= n <= 8"));
    }
    Ok((m, n))
}

fn build_labeling(a: &LabelingArgs) -> Result<(Labeling, Multiverse), Failure> {
    let (m, n) = parse_pba(&a.pba)?;
    let pba = pba_frame(m, &vec![n; 1 << m]);
    let arity = if n == 1 { 0 } else { n as u32 };
    let (fam, lab) = match a.regime {
        LabelingRegime::Product => {
            let fam = ControlFamily::independent(m as u32, 0, arity);
            let lab = product_labeling(&pba, &fam);
            (fam, lab)
        }
        LabelingRegime::Hybrid => {
            let fam = ControlFamily::hybrid(m as u32, arity, a.t_buttons, a.sw_decoupled);
            let lab = hybrid_labeling(&pba, &fam);
            (fam, lab)
        }
    };
    let lab = lab.map_err(|e| usage(e.to_string()))?;
    let mv = Multiverse::build(&fam, MState::default()).map_err(|e| usage(e.to_string()))?;
    Ok((lab, mv))
}

/// Random valuation of `atoms` over `n` worlds.
pub fn random_valuation(corpus: &mut Corpus, atoms: &[&str], n: usize) -> BTreeMap<String, FixedBitSet> {
    atoms
        .iter()
        .map(|a| {
            let mut set = FixedBitSet::with_capacity(n);
            for w in 0..n {
                set.set(w, corpus.below(2) == 1);
            }
            (a.to_string(), set)
        })
        .collect()
}

pub fn model_with(frame: &Frame, valuation: BTreeMap<String, FixedBitSet>) -> Model {
    let mut model = Model::new(frame.clone());
    for (a, set) in valuation {
        model.set_bits(&a, set);
    }
    model
}

pub const ATOM_NAMES: [&str; 6] = ["p", "q", "r", "s", "u", "v"];

fn translate_check(
    args: &LabelingArgs,
    count: usize,
    atoms: usize,
    depth: usize,
    seed: u64,
    exhaustive_depth: Option<usize>,
) -> Result<Output, Failure> {
    if atoms == 0 || atoms > ATOM_NAMES.len() {
        return Err(usage(format!("--atoms must be in 1..={}", ATOM_NAMES.len())));
    }
    let (lab, mv) = build_labeling(args)?;
    let frame = lab.frame.clone();
    let checker = TranslationChecker::on(lab, mv).map_err(|e| usage(e.to_string()))?;
    let names = &ATOM_NAMES[..atoms];
    let mut corpus = Corpus::new(seed);
    let mut failures = Vec::new();
    for i in 0..count {
        let f = corpus.formula(names, depth);
        let model = model_with(&frame, random_valuation(&mut corpus, names, frame.len()));
        if !checker.check(&model, &f) {
            failures.push(json!({ "index": i, "formula": f.to_string() }));
        }
    }
    let exhaustive = match exhaustive_depth {
        None => None,
        Some(d) => {
            if frame.len() > 16 {
                return Err(usage("exhaustive mode supports at most 16 worlds"));
            }
            let mut classes = 0;
            let mut bad_valuations = 0;
            for bits in 0u32..1 << frame.len() {
                let mut set = FixedBitSet::with_capacity(frame.len());
                for w in 0..frame.len() {
                    set.set(w, bits >> w & 1 == 1);
                }
                let model = model_with(&frame, [("p".to_string(), set)].into_iter().collect());
                let r = checker.check_all_formulas(&model, d);
                classes += r.classes;
                if !r.ok() {
                    bad_valuations += 1;
                }
            }
            Some(json!({ "depth": d, "valuations": 1u64 << frame.len(), "classes": classes, "failing_valuations": bad_valuations }))
        }
    };
    let ok = failures.is_empty()
        && exhaustive
            .as_ref()
            .is_none_or(|e| e["failing_valuations"].as_u64() == Some(0));
    Ok(json_out(
        &json!({
            "seed": seed,
            "formulas": count,
            "atoms": atoms,
            "depth": depth,
            "failures": failures,
            "exhaustive": exhaustive,
            "pass": ok,
        }),
        i32::from(!ok),
    ))
}

/// `head;cycle` with comma-separated values; `cycle` may be omitted for a
/// finite known prefix written `known:v,v,…`.
pub fn parse_real(spec: &str) -> Result<RealHandle, String> {
    let nums = |s: &str| -> Result<Vec<u64>, String> {
        if s.trim().is_empty() {
            return Ok(vec![]);
        }
        s.split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|_| format!("bad value {x:?} in {spec:?}")))
            .collect()
    };
    if let Some(rest) = spec.strip_prefix("known:") {
        return Ok(RealHandle::Known(nums(rest)?));
    }
    let (head, cycle) = spec
        .split_once(';')
        .ok_or_else(|| format!("expected head;cycle, got {spec:?}"))?;
    let cycle = nums(cycle)?;
    if cycle.is_empty() {
        return Err(format!("empty cycle in {spec:?}"));
    }
    Ok(RealHandle::periodic(nums(head)?, cycle))
}

/// `count` distinct eventually-zero reals `⟨i, 0, 0, …⟩`.
pub fn coding_handles(count: usize) -> Vec<RealHandle> {
    (0..count as u64).map(|i| RealHandle::eventually(vec![i], 0)).collect()
}

fn posets_cmd(action: &PosetsAction) -> Result<Output, Failure> {
    match action {
        PosetsAction::SeqTable { count } => {
            let rows: Vec<_> = (0..*count).map(|i| json!({ "index": i, "seq": seq_of(i) })).collect();
            Ok(json_out(&json!({ "order": "weight = sum + length, then lexicographic", "rows": rows }), 0))
        }
        PosetsAction::AdCode { real, count } => {
            let f = parse_real(real).map_err(usage)?;
            let code = ad_code(&f, *count).map_err(|e| usage(e.to_string()))?;
            Ok(json_out(&json!({ "real": f, "code": code }), 0))
        }
        PosetsAction::Avoid { reals } => {
            let rs = reals.iter().map(|r| parse_real(r)).collect::<Result<Vec<_>, _>>().map_err(usage)?;
            let s = avoid_basic_open(&rs).map_err(|e| usage(e.to_string()))?;
            let index = index_of(&s);
            Ok(json_out(&json!({ "reals": rs, "open": s, "index": index }), 0))
        }
        PosetsAction::Coding {
            handles,
            coded,
            steps,
            growth,
        } => {
            let a: BTreeSet<usize> = coded.iter().copied().collect();
            if a.iter().any(|&i| i >= *handles) {
                return Err(usage("--coded index out of range"));
            }
            let poset = PyPoset::new(coding_handles(*handles).into_iter().map(SetHandle::Code).collect());
            let denses = coding_schedule(*handles, &a, *steps);
            let chain = rasiowa_sikorski(&poset, PYCondition::default(), &denses).map_err(|e| usage(e.to_string()))?;
            let audit = posets::audit_chain(&poset, &chain, &denses).map_err(|e| usage(e.to_string()))?;
            let report = coding_certificate(&poset, &chain, &a, *growth).map_err(|e| usage(e.to_string()))?;
            let code = i32::from(!(report.certified && audit.ok()));
            Ok(json_out(
                &json!({
                    "handles": poset.handles,
                    "final_condition": {
                        "s": chain.last().s,
                        "t": chain.last().t,
                    },
                    "audit_ok": audit.ok(),
                    "certificate": report,
                }),
                code,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("mlf").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn decide_exit_codes() {
        let (code, out, _) = run_str(&["decide", "<>[]p -> []<>p", "--m", "2", "--c", "2"]);
        assert_eq!(code, 0);
        assert!(out.contains("valid_up_to_bound"));
        let (code, out, _) = run_str(&["decide", "<>p -> []<>p", "--m", "1", "--c", "1"]);
        assert_eq!(code, 1);
        assert!(out.contains("countermodel"));
        let (code, _, err) = run_str(&["decide", "p &"]);
        assert_eq!(code, 2);
        assert!(err.contains("offset 3"));
    }

    #[test]
    fn usage_errors() {
        assert_eq!(run_str(&["nonsense"]).0, 2);
        assert_eq!(run_str(&["verify-labeling", "--pba", "m=x"]).0, 2);
    }

    #[test]
    fn verify_labeling_hybrid() {
        let (code, out, _) = run_str(&["verify-labeling", "--pba", "m=2,n=2", "--regime", "hybrid"]);
        assert_eq!(code, 0, "{out}");
    }

    #[test]
    fn deterministic_output() {
        let args = ["translate-check", "--pba", "m=1,n=2", "--formulas", "20", "--seed", "9"];
        let (c1, a, _) = run_str(&args);
        let (c2, b, _) = run_str(&args);
        assert_eq!((c1, &a), (c2, &b));
        assert_eq!(c1, 0, "{a}");
    }

    #[test]
    fn parse_real_forms() {
        assert_eq!(parse_real("1,2;0").unwrap(), RealHandle::eventually(vec![1, 2], 0));
        assert_eq!(parse_real(";3").unwrap(), RealHandle::constant(3));
        assert_eq!(parse_real("known:1,2").unwrap(), RealHandle::Known(vec![1, 2]));
        assert!(parse_real("1,2").is_err());
    }
}
