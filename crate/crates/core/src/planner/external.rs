use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use super::{parse_plan, Plan, PlanError, SearchStats};
use crate::pddl::{print_domain, print_problem, DomainDef, ProblemDef};

/// Command template for an external PDDL planner. `{domain}`, `{problem}` and
/// `{plan}` are replaced with file paths; the planner must write its plan to
/// `{plan}` in the usual one-step-per-line format.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalPlanner {
    pub command: String,
}

/// Runs the external planner in a scratch directory and parses its plan.
pub fn plan_external(
    planner: &ExternalPlanner,
    domain: &DomainDef,
    problem: &ProblemDef,
) -> Result<Plan, PlanError> {
    let started = Instant::now();
    let ext = |m: String| PlanError::External(m);
    let dir = tempfile::tempdir().map_err(|e| ext(format!("temp dir: {e}")))?;
    let path = |name: &str| -> PathBuf { dir.path().join(name) };
    std::fs::write(path("domain.pddl"), print_domain(domain)).map_err(|e| ext(e.to_string()))?;
    std::fs::write(path("problem.pddl"), print_problem(problem)).map_err(|e| ext(e.to_string()))?;

    let argv: Vec<String> = planner
        .command
        .split_whitespace()
        .map(|a| {
            a.replace("{domain}", &path("domain.pddl").to_string_lossy())
                .replace("{problem}", &path("problem.pddl").to_string_lossy())
                .replace("{plan}", &path("plan.txt").to_string_lossy())
        })
        .collect();
    let (prog, args) = argv
        .split_first()
        .ok_or_else(|| ext("empty planner command".into()))?;
    let out = Command::new(prog)
        .args(args)
        .current_dir(dir.path())
        .output()
        .map_err(|e| ext(format!("{prog}: {e}")))?;
    let stats = SearchStats {
        wall_s: started.elapsed().as_secs_f64(),
        ..SearchStats::default()
    };
    let text = match std::fs::read_to_string(path("plan.txt")) {
        Ok(t) => t,
        Err(_) if out.status.success() => {
            return Err(ext("planner exited without writing a plan".into()))
        }
        Err(_) => return Err(PlanError::Unsolvable { stats }),
    };
    let actions = parse_plan(domain, &text).map_err(|e| ext(e.to_string()))?;
    Ok(Plan {
        actions,
        source_scene: String::new(),
        stats,
    })
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::pddl::{grocery_domain, parse_problem};
    use crate::planner::validate_plan;
    use std::os::unix::fs::PermissionsExt;

    #[test]
    fn fake_planner_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let script = dir.path().join("fake.sh");
        std::fs::write(&script, "#!/bin/sh\ngrep -q '(on o box)' \"$2\" || exit 3\nprintf '(pick o table)\\n(place o box)\\n; cost = 2\\n' > \"$3\"\n").unwrap();
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
        let d = grocery_domain();
        let p = parse_problem(
            "(define (problem p) (:domain grocery) (:objects o table box)
              (:init (on o table) (topfree o) (topfree box) (inbox box) (handempty)) (:goal (on o box)))",
            &d,
        )
        .unwrap();
        let planner = ExternalPlanner {
            command: format!("{} {{domain}} {{problem}} {{plan}}", script.display()),
        };
        let plan = plan_external(&planner, &d, &p).unwrap();
        assert_eq!(plan.len(), 2);
        assert!(validate_plan(&p, &plan.actions).is_ok());

        let missing = ExternalPlanner {
            command: "/nonexistent/planner {domain}".into(),
        };
        assert!(matches!(
            plan_external(&missing, &d, &p),
            Err(PlanError::External(_))
        ));
    }
}
