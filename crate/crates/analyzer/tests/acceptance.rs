//! Acceptance run for the analyzer on the 3×3 key-lock fixtures
//! (gap 0.05, discount 0.95, horizon 20).
//!
//! Prints one PASS/FAIL line per criterion. Layout A necessity is known not
//! to hold for these dynamics (see `keylock_oracle.rs`): it is reported as
//! FAIL and does not abort the run. Any other failure exits non-zero.

use std::process::ExitCode;
use std::time::Instant;

use delf_analyzer::reactive::enumeration_size;
use delf_analyzer::{
    action_indices, aggregated_return, best_reactive_return, enumerate_reactive, evaluate_reactive,
    is_necessary_action, is_necessary_observation, is_sufficient_action, Criterion, KeyLockLayout,
    ObservationProjection, TabularMdp,
};

const GAMMA: f64 = 0.95;
const HORIZON: usize = 20;
const BUDGET: u128 = 10_000_000;

/// Criteria whose failure is expected and explained in the project notes.
const KNOWN_UNATTAINABLE: &[&str] = &["layout A full projection necessary"];

struct Report {
    unexpected: usize,
}

impl Report {
    fn line(&mut self, name: &str, ok: bool, detail: String) {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok && !KNOWN_UNATTAINABLE.contains(&name) {
            self.unexpected += 1;
        }
    }
}

fn build(layout: KeyLockLayout) -> TabularMdp {
    layout.build(GAMMA, HORIZON).expect("key-lock layouts are valid")
}

fn attribute_subsets() -> Vec<Vec<&'static str>> {
    let names = ["x", "y", "has_key"];
    (0..8u32)
        .map(|mask| names.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, n)| *n).collect())
        .collect()
}

/// Largest disagreement between aggregated value iteration and the reactive
/// optimum over every Markov-consistent projection of `mdp`, plus how many
/// projections were compared. Enumeration is the reference where it fits the
/// budget; beyond it the certified policy is replayed on the full MDP.
fn aggregation_gap(mdp: &TabularMdp) -> (f64, usize) {
    let mut projections: Vec<ObservationProjection> = attribute_subsets()
        .iter()
        .map(|attrs| ObservationProjection::from_attributes(mdp, attrs).unwrap())
        .collect();
    projections.push(ObservationProjection::identity(mdp));
    let mut worst = 0.0f64;
    let mut compared = 0;
    for proj in &projections {
        let Some(lumped) = aggregated_return(mdp, proj) else { continue };
        let reference = match enumeration_size(mdp, proj) {
            Some(n) if n <= BUDGET => enumerate_reactive(mdp, proj, BUDGET).unwrap().value,
            _ => {
                let outcome = best_reactive_return(mdp, proj, BUDGET).unwrap();
                evaluate_reactive(mdp, proj, &outcome.policy)
            }
        };
        worst = worst.max((lumped - reference).abs());
        compared += 1;
    }
    (worst, compared)
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut report = Report { unexpected: 0 };
    let c = Criterion::default();
    let a = build(KeyLockLayout::layout_a());
    let b = build(KeyLockLayout::layout_b());

    let full_a = ObservationProjection::all_attributes(&a);
    let nec_a = is_necessary_observation(&a, &full_a, &c).unwrap();
    report.line(
        "layout A full projection sufficient",
        nec_a.verdict.sufficient,
        format!("best {:.6} vs optimal {:.6}", nec_a.verdict.best_reactive_return, nec_a.verdict.optimal_return),
    );
    let removals: Vec<String> = nec_a
        .removals
        .iter()
        .map(|r| {
            format!(
                "-{} {} ({:.6})",
                r.attribute,
                if r.verdict.sufficient { "sufficient" } else { "insufficient" },
                r.verdict.best_reactive_return
            )
        })
        .collect();
    report.line("layout A full projection necessary", nec_a.necessary, removals.join(", "));

    let full_b = ObservationProjection::all_attributes(&b);
    let nec_b = is_necessary_observation(&b, &full_b, &c).unwrap();
    let no_key = nec_b.removals.iter().find(|r| r.attribute == "has_key").unwrap();
    report.line(
        "layout B has_key removable",
        no_key.verdict.sufficient && !nec_b.necessary,
        format!("best without has_key {:.6} vs optimal {:.6}", no_key.verdict.best_reactive_return, no_key.verdict.optimal_return),
    );

    let all_a = action_indices(&a, &["N", "E", "S", "W"]).unwrap();
    let act_a = is_necessary_action(&a, &all_a, &c).unwrap();
    report.line(
        "layout A action set necessary",
        act_a.necessary,
        format!("{} single removals insufficient", act_a.removals.iter().filter(|r| !r.verdict.sufficient).count()),
    );

    let es = action_indices(&b, &["E", "S"]).unwrap();
    let act_b = is_sufficient_action(&b, &es, &c).unwrap();
    report.line(
        "layout B {E,S} sufficient",
        act_b.sufficient,
        format!("restricted {:.6} vs optimal {:.6}", act_b.restricted_return.unwrap_or(f64::NAN), act_b.optimal_return),
    );

    let mut worst = 0.0f64;
    let mut compared = 0;
    for layout in [KeyLockLayout::layout_a(), KeyLockLayout::layout_b()] {
        let (gap, n) = aggregation_gap(&build(layout));
        worst = worst.max(gap);
        compared += n;
    }
    report.line(
        "aggregation agrees with enumeration",
        compared > 0 && worst <= 1e-9,
        format!("{compared} Markov-consistent projections, max gap {worst:.3e}"),
    );

    let elapsed = started.elapsed().as_secs_f64();
    report.line("analyzer suite under 60 s", elapsed < 60.0, format!("{elapsed:.2} s"));

    if report.unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
