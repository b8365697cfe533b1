mod common;

use minilang::{run_test, ExecutionLimits};
use slicegen::context::build_context;
use slicegen::extraction::{extract_payload, PayloadKind};
use slicegen::gateway::Gateway;
use slicegen::isolate::{split_tests, CandidateState, TestCandidate};
use slicegen::prompting::PromptAssets;
use slicegen::repair::{apply_rule_fixes, self_debug_loop, strip_assertions, AttemptResult, FixContext, RuleFix};

use common::{fixtures, proj_a_focal, FnTransport};

fn recorded_tests(dir: &str, file: &str) -> Vec<(String, String)> {
    let raw = std::fs::read_to_string(fixtures().join("proj-a/responses").join(dir).join(file)).unwrap();
    let payload = extract_payload(&raw, PayloadKind::TestFile).unwrap();
    split_tests(payload.test_source().unwrap()).unwrap()
}

#[test]
fn stripping_never_loses_coverage() {
    let (program, _) = proj_a_focal("grades.mini", "grade_report");
    let limits = ExecutionLimits::default();
    let mut checked = 0;
    for file in ["generate-1.md", "generate-2.md", "generate-3.md"] {
        for (name, src) in recorded_tests("grades.mini__grade_report", file) {
            let before = run_test(&program, &src, &limits);
            if before.status != minilang::Status::CompileError {
                let stripped = strip_assertions(&src);
                assert_eq!(stripped.warning, None, "{name}");
                let after = run_test(&program, &stripped.source, &limits);
                let (lines_b, arms_b) = before.coverage.footprint();
                let (lines_a, arms_a) = after.coverage.footprint();
                assert!(lines_b.is_subset(&lines_a) && arms_b.is_subset(&arms_a), "{name}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 5, "{checked}");
}

#[test]
fn rule_fixes_run_in_a_fixed_order() {
    let (program, _) = proj_a_focal("shipping.mini", "shipping_cost");
    let src = "fn test_a() {\n    assert(helper(1) == 2);\n";
    let (fixed, rules, warning) = apply_rule_fixes(src, &program);
    assert_eq!(
        rules,
        [
            RuleFix::BalanceBrackets,
            RuleFix::InjectPreamble,
            RuleFix::StripAssertions
        ]
    );
    assert_eq!(warning, None);
    assert!(
        run_test(&program, &fixed, &ExecutionLimits::default()).passed(),
        "{fixed}"
    );
}

#[test]
fn unusable_fix_replies_abandon_the_candidate() {
    let (program, focal) = proj_a_focal("shipping.mini", "shipping_cost");
    let ctx = build_context(&program, &focal, 1);
    let assets = PromptAssets::load_default().unwrap();
    let transport = FnTransport::new(|_| Ok("I could not find the problem.".into()));
    let gateway = Gateway::live("m", transport.clone(), 1);
    let fx = FixContext {
        program: &program,
        focal: &focal,
        context: &ctx,
        assets: &assets,
        gateway: &gateway,
        limits: ExecutionLimits::default(),
        max_rounds: 10,
    };
    let src = "fn test_a() {\n    let xs: [int] = [];\n    print(shipping_cost(1, 1, false, xs) / 0);\n}\n";
    let initial = run_test(&program, src, &fx.limits);
    let r = self_debug_loop(
        TestCandidate::new("c".into(), 1, "test_a".into(), src.into()),
        &initial,
        &fx,
    );
    assert_eq!(r.candidate.state, CandidateState::Abandoned);
    assert_eq!((r.attempts.len(), r.llm_calls, transport.count()), (1, 4, 4));
    assert_eq!(r.attempts[0].result, AttemptResult::Abandoned);
    assert!(r.candidate.abandon_reason.as_deref().unwrap().contains("4 attempts"));

    let one_round = FixContext { max_rounds: 1, ..fx };
    let r = self_debug_loop(
        TestCandidate::new("c".into(), 1, "test_a".into(), src.into()),
        &initial,
        &one_round,
    );
    assert_eq!((r.attempts.len(), transport.count()), (1, 4));
}
