use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conjugate::{conjugate_back, g_conjugate, young_violation};
use crate::coupling::{evaluate_coupling, verify_coupling, CouplingSample, CouplingSpec, CouplingVerdict};
use crate::duality::Duality;
use crate::expr::Bindings;
use crate::function::SampledFunction;
use crate::gapfn::{check_ep_assumptions, check_monotone, ep_gap, gap_minimize, vip_gap, BifunctionSample, EpAssumptions, OperatorGraphSample, VIP_NOTE};
use crate::grid::{build_grid, PointSet};
use crate::lagrangian::{lagrange_sample, minimax_check, saddle_report};
use crate::perturbation::{perturbation_duality_report, PerturbationFunction};
use crate::stability::{run_stability_experiment, SequenceExperiment};
use crate::tol::ToleranceConfig;
use crate::value::ExtendedValue;

use super::render::{ext, header, num, point, table, Report};
use super::spec::{load_spec, OperatorSource, ProblemSpec};
use super::{CliError, Command, Flags, GapKind};

/// What a command produced: exit code, stdout text and CSV files (name, contents).
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub files: Vec<(String, String)>,
}

struct Produced {
    pass: bool,
    report: String,
    files: Vec<(String, String)>,
}

/// Runs one command. With `flags.threads` set the work runs on a dedicated
/// pool of that size; with `flags.out` set the CSVs are written there.
pub fn run(command: &Command, flags: &Flags) -> Outcome {
    let result = match flags.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(command, flags)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} threads: {e}"))),
        },
        None => dispatch(command, flags),
    };
    let result = result.and_then(|p| {
        if let Some(dir) = &flags.out {
            write_files(dir, &p.files)?;
        }
        Ok(p)
    });
    match result {
        Ok(p) => {
            let mut stdout = p.report;
            if flags.out.is_none() {
                for (name, body) in &p.files {
                    stdout.push_str(&format!("\n--- {name}\n{body}"));
                }
            }
            Outcome { code: if p.pass { 0 } else { 1 }, stdout, files: p.files }
        }
        Err(e) => Outcome { code: e.exit_code(), stdout: format!("error: {e}\n"), files: Vec::new() },
    }
}

fn write_files(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn dispatch(command: &Command, flags: &Flags) -> Result<Produced, CliError> {
    if let Command::Selfcheck = command {
        return selfcheck(flags.seed);
    }
    let path = match command {
        Command::CheckCoupling(p)
        | Command::Conjugate(p)
        | Command::Duality(p)
        | Command::Saddle(p)
        | Command::Perturb(p)
        | Command::Gap(_, p)
        | Command::Stability(p) => p,
        Command::Selfcheck => unreachable!("handled above"),
    };
    let mut spec = load_spec(path)?;
    if let Some(t) = flags.tol {
        spec.tolerances = spec.tolerances.with_zero_tol(t)?;
    }
    match command {
        Command::CheckCoupling(_) => check_coupling(&spec),
        Command::Conjugate(_) => conjugate(&spec),
        Command::Duality(_) => duality(&spec),
        Command::Saddle(_) => saddle(&spec),
        Command::Perturb(_) => perturb(&spec),
        Command::Gap(GapKind::Vip, _) => gap_vip(&spec),
        Command::Gap(GapKind::Ep, _) => gap_ep(&spec),
        Command::Stability(_) => stability(&spec),
        Command::Selfcheck => unreachable!("handled above"),
    }
}

fn coupling(spec: &ProblemSpec) -> Result<CouplingSample, CliError> {
    Ok(evaluate_coupling(&spec.coupling, &spec.a, &spec.b)?)
}

fn problem(r: &mut Report, spec: &ProblemSpec) {
    r.section("problem")
        .field("f", &spec.f_expr)
        .field("coupling", &spec.coupling)
        .field("primal_points", spec.a.len())
        .field("dual_points", spec.b.len())
        .num("zero_tol", spec.tolerances.zero_tol);
}

fn verdict_fields(r: &mut Report, v: &CouplingVerdict, a: &PointSet, b: &PointSet) {
    r.num("d1_inf", v.d1_inf)
        .field("d1_arg_x", point(a.point(v.d1_arg.0)))
        .field("d1_arg_y", point(b.point(v.d1_arg.1)))
        .field("d1_pass", v.d1_pass)
        .field("has_zero", v.has_zero)
        .field("d2_checked", v.d2_checked);
    if v.d2_checked {
        r.num("d2_max_violation", v.d2_max_violation).field("d2_pass", v.d2_pass);
    }
    r.field("d2_note", CouplingVerdict::D2_NOTE)
        .num("max_row_min", v.max_row_min)
        .field("zero_slices_pass", v.zero_slices_pass);
}

fn check_coupling(spec: &ProblemSpec) -> Result<Produced, CliError> {
    let g = coupling(spec)?;
    let v = verify_coupling(&g, &spec.tolerances, spec.check_d2)?;
    let mut r = Report::default();
    problem(&mut r, spec);
    r.section("coupling");
    verdict_fields(&mut r, &v, &spec.a, &spec.b);
    let pass = v.d1_pass && (!v.d2_checked || v.d2_pass);
    r.section("verdict").field("pass", pass);
    Ok(Produced { pass, report: r.finish(), files: Vec::new() })
}

fn conjugate(spec: &ProblemSpec) -> Result<Produced, CliError> {
    let g = coupling(spec)?;
    let fg = g_conjugate(&spec.f, &g)?;
    let fgg = conjugate_back(&fg.function, &g)?.function.with_label("f^gg");
    let young = young_violation(&spec.f, &fg.function, &g)?;
    let bound = spec.f.effective_domain().all(|i| fgg.value(i) <= spec.f.value(i));
    let mut r = Report::default();
    problem(&mut r, spec);
    r.section("conjugate").num("young_violation", young).field("biconjugate_below_f", bound);
    let pass = young <= 0.0 && bound;
    r.section("verdict").field("pass", pass);
    let files = vec![
        ("f_g.csv".to_string(), table(&spec.b, "y", &[("f_g", &fg.function)])),
        ("f_gg.csv".to_string(), table(&spec.a, "x", &[("f", &spec.f), ("f_gg", &fgg)])),
    ];
    Ok(Produced { pass, report: r.finish(), files })
}

fn duality(spec: &ProblemSpec) -> Result<Produced, CliError> {
    let tol = &spec.tolerances;
    let g = coupling(spec)?;
    let d = Duality::new(&spec.f, &g)?;
    let m = d.membership(tol);
    let s = d.solve(tol);
    let lemma = d.biconjugate_lemma(tol)?;
    let cert = d.certificate_at(s.primal_index, s.dual_index, tol);

    let mut r = Report::default();
    problem(&mut r, spec);
    r.section("membership")
        .field("f_g_proper", m.f_g_proper)
        .num("inf_f", m.inf_f)
        .num("inf_f_g", m.inf_f_g)
        .num("inf_gamma", m.inf_gamma)
        .field("member", m.member);
    r.section("duality")
        .num("primal_value", s.primal_value)
        .field("primal_arg", point(&s.primal_arg))
        .num("dual_value", s.dual_value)
        .field("dual_arg", point(&s.dual_arg))
        .num("gap", s.gap)
        .field("weak_duality", s.weak_duality_holds);
    r.section("certificate")
        .field("x", point(&s.primal_arg))
        .field("y", point(&s.dual_arg))
        .field("gamma", ext(cert.gamma))
        .field("certified", cert.certified);
    r.section("biconjugate_lemma")
        .num("inf_f_gg", lemma.inf_f_gg)
        .field("inf_match", lemma.inf_match)
        .field("argmin_transfer", lemma.argmin_transfer)
        .field("pointwise_bound", lemma.pointwise_bound);
    let pass = m.member && s.gap.abs() <= tol.zero_tol && lemma.inf_match && lemma.argmin_transfer && cert.certified;
    r.section("verdict").field("pass", pass);
    Ok(Produced { pass, report: r.finish(), files: Vec::new() })
}

fn saddle(spec: &ProblemSpec) -> Result<Produced, CliError> {
    let g = coupling(spec)?;
    let rep = saddle_report(&spec.f, &g, &spec.tolerances)?;
    let mut r = Report::default();
    problem(&mut r, spec);
    r.section("minimax")
        .num("supinf", rep.supinf)
        .num("infsup", rep.infsup)
        .num("minimax_gap", rep.minimax_gap);
    r.section("saddle")
        .field("member", rep.member)
        .field("zero_slices_pass", rep.zero_slices_pass)
        .field("saddle_points", rep.saddle_points.len())
        .field("all_saddles_pass", rep.saddle_points.iter().all(|s| s.passes()))
        .field("primal_solutions", rep.primal_solutions.len())
        .field("dual_solutions", rep.dual_solutions.len())
        .field("converse_holds", rep.converse_holds)
        .field("equivalence", rep.equivalence.map_or("not claimed".to_string(), |b| b.to_string()));
    let pass = rep.member && rep.all_checks_pass();
    r.section("verdict").field("pass", pass);

    let (n, m) = (spec.a.dimension(), spec.b.dimension());
    let mut cols = header("x", n);
    cols.extend(header("y", m));
    cols.extend(["x0_in_dom_f", "y0_dual_optimal", "biconj_touch", "primal_dual_equiv"].map(String::from));
    let mut csv = cols.join(",") + "\n";
    for s in &rep.saddle_points {
        let mut fields: Vec<String> = spec.a.point(s.x_index).iter().chain(spec.b.point(s.y_index)).map(|&c| num(c)).collect();
        fields.extend([s.x0_in_dom_f, s.y0_dual_optimal, s.biconj_touch, s.primal_dual_equiv].map(|b| b.to_string()));
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    Ok(Produced { pass, report: r.finish(), files: vec![("saddles.csv".into(), csv)] })
}

fn perturb(spec: &ProblemSpec) -> Result<Produced, CliError> {
    let p = spec.perturbation.as_ref().ok_or_else(|| CliError::Usage("perturb needs a [perturbation] section".into()))?;
    let phi = PerturbationFunction::from_fn(spec.a.clone(), p.u.clone(), "phi", |x, u| {
        Ok(ExtendedValue::finite(p.phi.eval_real(&Bindings { x, u, ..Bindings::default() })?)?)
    })?;
    let rep = perturbation_duality_report(&phi, &p.u_star, &spec.tolerances)?;
    let mut r = Report::default();
    r.section("problem")
        .field("phi", &p.phi)
        .field("x_points", spec.a.len())
        .field("u_points", p.u.len())
        .field("u_star_points", p.u_star.len())
        .num("zero_tol", rep.zero_tol);
    r.section("perturbation")
        .num("alpha", rep.alpha)
        .num("beta", rep.beta)
        .field("beta_arg", point(&rep.beta_arg))
        .num("gap", rep.gap)
        .num("h_biconjugate_at_origin", rep.h_biconjugate_at_origin)
        .num("identity_violation", rep.identity_violation);
    let pass = rep.identity_violation <= rep.zero_tol && rep.no_gap();
    r.section("verdict").field("pass", pass);

    let dim = spec.a.dimension();
    let mut cols = header("x", dim);
    cols.extend(header("u_star", p.u_star.dimension()));
    cols.push("gap".into());
    let mut csv = cols.join(",") + "\n";
    let gd = rep.gap_function.domain();
    for (i, pt) in gd.iter().enumerate() {
        let mut fields: Vec<String> = pt.iter().map(|&c| num(c)).collect();
        fields.push(ext(rep.gap_function.value(i)));
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    let files = vec![("h_star.csv".into(), table(&p.u_star, "u_star", &[("h_star", &rep.h_star)])), ("gap.csv".into(), csv)];
    Ok(Produced { pass, report: r.finish(), files })
}

fn solutions(r: &mut Report, gap: &SampledFunction, tol: &ToleranceConfig) -> Result<bool, CliError> {
    let sol = gap_minimize(gap, tol)?;
    r.field("solutions", sol.len());
    for (n, &i) in sol.iter().enumerate().take(20) {
        r.field(&format!("solution_{}", n + 1), point(gap.domain().point(i)));
    }
    Ok(!sol.is_empty())
}

fn gap_vip(spec: &ProblemSpec) -> Result<Produced, CliError> {
    let source = spec
        .gap
        .as_ref()
        .and_then(|g| g.operator.as_ref())
        .ok_or_else(|| CliError::Usage("gap vip needs `graph` or `operator` in [gap]".into()))?;
    let graph = match source {
        OperatorSource::Graph(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            OperatorGraphSample::from_csv(&text)?
        }
        OperatorSource::Expressions { components, c } => OperatorGraphSample::from_fn(c, |y| {
            let env = Bindings { y, ..Bindings::default() };
            components.iter().map(|e| Ok(e.eval_real(&env)?)).collect()
        })?,
    };
    let tol = &spec.tolerances;
    let mut r = Report::default();
    r.section("problem").field("graph_pairs", graph.len()).field("x_points", spec.a.len()).num("zero_tol", tol.zero_tol);
    r.section("monotone");
    let monotone = if graph.len() >= 2 {
        let m = check_monotone(&graph)?;
        r.num("max_violation", m.max_violation);
        if let Some((p, q)) = m.worst_pair {
            r.field("worst_pair", format!("{} {}", point(graph.y(p)), point(graph.y(q))));
        }
        m.max_violation <= tol.zero_tol
    } else {
        r.field("max_violation", "not checked (single pair)");
        true
    };
    let h = vip_gap(&graph, &spec.a)?;
    r.section("gap").field("note", VIP_NOTE);
    let found = solutions(&mut r, &h, tol)?;
    let pass = monotone && found;
    r.section("verdict").field("pass", pass);
    Ok(Produced { pass, report: r.finish(), files: vec![("gap.csv".into(), table(&spec.a, "x", &[("gap", &h)]))] })
}

fn gap_ep(spec: &ProblemSpec) -> Result<Produced, CliError> {
    let expr = spec
        .gap
        .as_ref()
        .and_then(|g| g.bifunction.as_ref())
        .ok_or_else(|| CliError::Usage("gap ep needs `bifunction` in [gap]".into()))?;
    let tol = &spec.tolerances;
    let bf = BifunctionSample::from_fn(spec.a.clone(), |x, y| Ok(expr.eval_real(&Bindings::xy(x, y))?))?;
    let a = check_ep_assumptions(&bf, tol);
    let g = ep_gap(&bf)?;
    let mut r = Report::default();
    r.section("problem").field("bifunction", expr).field("k_points", spec.a.len()).num("zero_tol", tol.zero_tol);
    r.section("assumptions").num("max_diag", a.max_diag).field("diag_zero", a.diag_zero);
    match a.convexity_violation {
        Some(v) => r.num("convexity_violation", v).field("convex_in_y", v <= tol.convexity_tol),
        None => r.field("convex_in_y", "not checked (K is not a Cartesian grid)"),
    };
    r.field("semicontinuity", EpAssumptions::SEMICONTINUITY_NOTE);
    r.section("gap");
    let found = solutions(&mut r, &g, tol)?;
    let pass = a.diag_zero && a.convex_in_y != Some(false) && found;
    r.section("verdict").field("pass", pass);
    Ok(Produced { pass, report: r.finish(), files: vec![("gap.csv".into(), table(&spec.a, "y", &[("gap", &g)]))] })
}

fn stability(spec: &ProblemSpec) -> Result<Produced, CliError> {
    let st = spec.stability.as_ref().ok_or_else(|| CliError::Usage("stability needs a [stability] section".into()))?;
    let exp = SequenceExperiment {
        base_f: spec.f.clone(),
        base_g: coupling(spec)?,
        k_values: st.k_values.clone(),
        family: st.family.clone(),
    };
    let rep = run_stability_experiment(&exp, &spec.tolerances)?;
    let show = |v: Option<bool>| v.map_or("n/a".to_string(), |b| b.to_string());
    let mut r = Report::default();
    problem(&mut r, spec);
    r.section("stability")
        .field("rows", rep.rows.len())
        .field("limit_member", rep.limit_member)
        .field("limit_d2", show(rep.limit_d2))
        .field("conjugate_bound", rep.conjugate_bound)
        .field("distances_decrease", show(rep.distances_decrease));
    let pass = rep.passes();
    r.section("verdict").field("pass", pass);
    Ok(Produced { pass, report: r.finish(), files: vec![("stability.csv".into(), rep.to_csv())] })
}

/// Exact invariants on seeded random instances: Young's inequality is tight,
/// `f^gg <= f`, `(f^gg)^g = f^g`, weak duality and weak minimax.
fn selfcheck(seed: u64) -> Result<Produced, CliError> {
    const INSTANCES: usize = 25;
    let tol = ToleranceConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures: Vec<String> = Vec::new();
    for n in 0..INSTANCES {
        let na = rng.gen_range(2..=40);
        let nb = rng.gen_range(2..=30);
        let a = Arc::new(build_grid(1, &[(-1.0, 1.0, na)])?);
        let b = Arc::new(build_grid(1, &[(0.0, 1.0, nb)])?);
        let fv: Vec<f64> = (0..na).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let f = SampledFunction::from_reals(a.clone(), "f", fv)?;
        let gv: Vec<f64> = (0..na * nb).map(|_| rng.gen_range(0.0..3.0)).collect();
        let g = CouplingSample::from_matrix(a.clone(), b.clone(), gv, CouplingSpec::Matrix)?;

        let fg = g_conjugate(&f, &g)?.function;
        let fgg = conjugate_back(&fg, &g)?.function;
        let fggg = g_conjugate(&fgg, &g)?.function;
        let d = Duality::new(&f, &g)?.solve(&tol);
        let mm = minimax_check(&lagrange_sample(&f, &g)?, &tol)?;
        let checks = [
            ("young_tight", young_violation(&f, &fg, &g)? == 0.0),
            ("biconjugate_below_f", (0..na).all(|i| fgg.value(i) <= f.value(i))),
            ("triconjugate", fggg.values() == fg.values()),
            ("weak_duality", d.gap >= 0.0),
            ("weak_minimax", mm.supinf <= mm.infsup),
        ];
        failures.extend(checks.iter().filter(|(_, ok)| !ok).map(|(name, _)| format!("instance {n}: {name}")));
    }
    let mut r = Report::default();
    r.section("selfcheck").field("seed", seed).field("instances", INSTANCES).field("failures", failures.len());
    for f in &failures {
        r.field("failed", f);
    }
    let pass = failures.is_empty();
    r.section("verdict").field("pass", pass);
    Ok(Produced { pass, report: r.finish(), files: Vec::new() })
}
