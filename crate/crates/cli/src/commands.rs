use anyhow::{anyhow, bail, Context, Result};
use ivkkt::calculus::{self, ConvexityPlan, ProbeReport, CONVEXITY_TOL};
use ivkkt::kkt::{
    search_multipliers, verify_certificate, Certificate, KktContext, KktError, ParetoClass, ProbeScope,
    SearchOutcome, Theorem, Verdict, VerdictKind, VerifyOptions, ACTIVE_TOL, ALL_CLASSES, FEAS_TOL,
};
use ivkkt::manifold::{CoordBox, Point};
use ivkkt::oracle::{classify, ClassVerdict, GridSpec, OracleError};
use ivkkt::problem::{self, registry, ProblemFile};
use ivkkt::sampling::Sampler;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::Report;
use crate::{CheckArgs, Common, DerivsArgs, OracleArgs, ProbeArgs, PropsArgs, SearchArgs};
use crate::{EXIT_INFEASIBLE, EXIT_OK, EXIT_UNVERIFIED, EXIT_VIOLATED};

type CmdResult = Result<(i32, Report)>;

struct Loaded {
    file: ProblemFile,
    pbar: Point,
}

fn load(common: &Common) -> Result<Loaded> {
    let mut file = problem::load(&common.problem).with_context(|| format!("loading `{}`", common.problem))?;
    if let Some(b) = &common.sample_box {
        let bx: CoordBox = b.parse().map_err(|e| anyhow!("--box: {e}"))?;
        if bx.dim() != file.spec.manifold.coord_dim() {
            bail!(
                "--box has {} ranges, the manifold needs {}",
                bx.dim(),
                file.spec.manifold.coord_dim()
            );
        }
        file.spec.sample_box = bx;
    }
    let pbar = match &common.candidate {
        Some(s) => s.parse::<Point>().map_err(|e| anyhow!("--candidate: {e}"))?,
        None => file
            .candidate
            .clone()
            .ok_or_else(|| anyhow!("problem `{}` has no candidate; pass --candidate", file.name))?,
    };
    file.spec
        .manifold
        .check_point(&pbar)
        .map_err(|e| anyhow!("--candidate: {e}"))?;
    Ok(Loaded { file, pbar })
}

fn scope(file: &ProblemFile, args: &ProbeArgs) -> Result<ProbeScope> {
    match &args.scope {
        Some(s) => s.parse().map_err(|e: String| anyhow!(e)),
        None => Ok(file.spec.probe_scope),
    }
}

fn options(args: &ProbeArgs) -> VerifyOptions {
    VerifyOptions {
        tol: args.tol,
        check_hypotheses: !args.no_hypotheses,
        alphas: args.alphas,
    }
}

/// Reports an infeasible candidate as a violation; other errors propagate.
fn infeasible(report: &mut Report, err: &KktError) -> bool {
    if let KktError::Infeasible { name, value, tol } = err {
        report.row("verdict:", "violated (candidate infeasible)");
        report.kv("verdict", "violated");
        report.kv("violation.condition", format!("{name} <= {tol:e}"));
        report.kv("violation.residual", format!("{:e}", -value));
        true
    } else {
        false
    }
}

fn select_certificate(args: &CheckArgs, file: &ProblemFile) -> Result<Certificate> {
    let theorem = args
        .theorem
        .as_deref()
        .map(|t| t.parse::<Theorem>().map_err(|e| anyhow!("--theorem: {e}")))
        .transpose()?;
    if let Some(text) = &args.cert {
        let full = match theorem {
            Some(t) if !text.contains("theorem=") => format!("theorem={t} {text}"),
            _ => text.clone(),
        };
        let cert: Certificate = full.parse().map_err(|e| anyhow!("--cert: {e}"))?;
        if let Some(t) = theorem {
            if cert.theorem != t {
                bail!("--theorem {t} disagrees with the certificate's theorem {}", cert.theorem);
            }
        }
        return Ok(cert);
    }
    match theorem {
        Some(t) => file
            .certificate_for(t)
            .cloned()
            .ok_or_else(|| anyhow!("problem `{}` has no {t} certificate; pass --cert", file.name)),
        None => match file.certificates.as_slice() {
            [one] => Ok(one.clone()),
            [] => bail!("problem `{}` has no certificate; pass --cert", file.name),
            _ => bail!("problem `{}` has several certificates; pass --theorem", file.name),
        },
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| format!("{v:e}"))
}

fn verdict_report(report: &mut Report, v: &Verdict, verbose: bool) {
    report.row("theorem:", v.theorem);
    report.row("claimed class:", v.claimed_class);
    report.row("probes:", format!("{} ({} scope, seed {})", v.probes, v.scope, v.seed));
    report.row("tolerance:", format!("{:e}", v.tol));
    let active: Vec<String> = v.active.iter().map(|u| (u + 1).to_string()).collect();
    report.row("active constraints:", active.join(","));
    report.row("min residual:", fmt_opt(v.min_residual));
    if v.min_strict.is_some() {
        report.row("min strict value:", fmt_opt(v.min_strict));
    }
    if let Some(viol) = &v.violation {
        report.row("violated:", &viol.condition);
        if let Some(k) = viol.probe {
            report.row("  at probe:", k);
        }
        if let Some(s) = &viol.source {
            report.row("  toward:", format!("{s:.6}"));
        }
        report.row("  residual:", format!("{:e}", viol.residual));
    }
    if !v.gh_conditions.is_empty() {
        let max_abs = gh_max_abs(v);
        report.row("gH condition max |.|:", format!("{max_abs:e}"));
        if verbose {
            for (k, c) in v.gh_conditions.iter().enumerate() {
                report.line(format!("  probe {:>4}  {c}", k + 1));
            }
        }
    }
    for h in &v.hypotheses {
        let status = match &h.report.witness {
            None => format!("holds on {} samples", h.report.checks),
            Some(w) => format!("violated: {w}"),
        };
        report.row("hypothesis:", format!("{}: {status}", h.description));
    }
    for w in &v.warnings {
        report.row("warning:", w);
    }
    report.row("verdict:", v.kind);

    report.kv("verdict", v.kind);
    report.kv("theorem", v.theorem);
    report.kv("class", v.claimed_class);
    report.kv("probes", v.probes);
    report.kv("seed", v.seed);
    report.kv("scope", v.scope);
    report.kv("tol", format!("{:e}", v.tol));
    report.kv("min_residual", fmt_opt(v.min_residual));
    if v.min_strict.is_some() {
        report.kv("min_strict", fmt_opt(v.min_strict));
    }
    report.kv("active", active.join(","));
    if let Some(viol) = &v.violation {
        report.kv("violation.condition", &viol.condition);
        if let Some(k) = viol.probe {
            report.kv("violation.probe", k);
        }
        if let Some(s) = &viol.source {
            report.kv("violation.source", s);
        }
        report.kv("violation.residual", format!("{:e}", viol.residual));
    }
    if !v.gh_conditions.is_empty() {
        report.kv("gh_max_abs", format!("{:e}", gh_max_abs(v)));
    }
    if let Some(a) = v.forms_agree {
        report.kv("forms_agree", a);
    }
    let failed = v.hypotheses.iter().filter(|h| !h.report.holds()).count();
    report.kv("hypotheses.checked", v.hypotheses.len());
    report.kv("hypotheses.failed", failed);
    report.kv("warnings", v.warnings.len());
}

fn gh_max_abs(v: &Verdict) -> f64 {
    v.gh_conditions
        .iter()
        .map(|c| c.lo().abs().max(c.hi().abs()))
        .fold(0.0, f64::max)
}

fn verdict_code(kind: VerdictKind) -> i32 {
    match kind {
        VerdictKind::Certified => EXIT_OK,
        VerdictKind::HypothesesUnverified => EXIT_UNVERIFIED,
        VerdictKind::Violated => EXIT_VIOLATED,
    }
}

pub fn check(args: &CheckArgs) -> CmdResult {
    let Loaded { file, pbar } = load(&args.common)?;
    let cert = select_certificate(args, &file)?;
    cert.check_shape(file.spec.l(), file.spec.t())?;
    let scope = scope(&file, &args.probe)?;
    let mut report = Report::new();
    report.row("problem:", &file.name);
    report.row("candidate:", &pbar);
    report.row("certificate:", &cert);
    let ctx = match KktContext::sampled(&file.spec, &pbar, args.probe.probes, args.common.seed, scope) {
        Ok(ctx) => ctx,
        Err(e) if infeasible(&mut report, &e) => return Ok((EXIT_VIOLATED, report)),
        Err(e) => return Err(e.into()),
    };
    let v = verify_certificate(&ctx, &cert, &options(&args.probe))?;
    verdict_report(&mut report, &v, args.verbose);
    report.kv("cert", &cert);
    Ok((verdict_code(v.kind), report))
}

pub fn search(args: &SearchArgs) -> CmdResult {
    let Loaded { file, pbar } = load(&args.common)?;
    let theorem: Theorem = args.theorem.parse().map_err(|e| anyhow!("--theorem: {e}"))?;
    let scope = scope(&file, &args.probe)?;
    let mut report = Report::new();
    report.row("problem:", &file.name);
    report.row("candidate:", &pbar);
    let ctx = match KktContext::sampled(&file.spec, &pbar, args.probe.probes, args.common.seed, scope) {
        Ok(ctx) => ctx,
        Err(e @ KktError::Infeasible { .. }) => {
            report.row("search:", format!("infeasible: {e}"));
            report.kv("search", "infeasible");
            report.kv("theorem", theorem);
            report.kv("reason", e);
            return Ok((EXIT_INFEASIBLE, report));
        }
        Err(e) => return Err(e.into()),
    };
    match search_multipliers(&ctx, theorem, &options(&args.probe))? {
        SearchOutcome::Found { certificate, verdict } => {
            report.row("certificate:", &certificate);
            verdict_report(&mut report, &verdict, false);
            report.kv("search", "found");
            report.kv("cert", &certificate);
            Ok((EXIT_OK, report))
        }
        SearchOutcome::Infeasible(f) => {
            report.row("theorem:", f.theorem);
            report.row("LP solves:", f.attempts);
            report.row("best phase-1:", fmt_opt(f.best_phase1));
            report.row("search:", format!("infeasible: {}", f.reason));
            report.kv("search", "infeasible");
            report.kv("theorem", f.theorem);
            report.kv("attempts", f.attempts);
            report.kv("best_phase1", fmt_opt(f.best_phase1));
            report.kv("reason", &f.reason);
            Ok((EXIT_INFEASIBLE, report))
        }
    }
}

fn parse_classes(s: &str) -> Result<Vec<ParetoClass>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let add: Vec<ParetoClass> = match part.to_ascii_lowercase().as_str() {
            "lu" => ALL_CLASSES.into_iter().filter(|c| c.is_lu()).collect(),
            "cw" => ALL_CLASSES.into_iter().filter(|c| !c.is_lu()).collect(),
            "all" => ALL_CLASSES.to_vec(),
            _ => vec![part.parse().map_err(|e| anyhow!("--classes: {e}"))?],
        };
        for c in add {
            if !out.contains(&c) {
                out.push(c);
            }
        }
    }
    if out.is_empty() {
        bail!("--classes selects no class");
    }
    Ok(out)
}

pub fn oracle(args: &OracleArgs) -> CmdResult {
    let Loaded { file, pbar } = load(&args.common)?;
    let classes = parse_classes(&args.classes)?;
    let mut grid = GridSpec::new(file.spec.sample_box.clone(), args.grid)?;
    if args.jitter {
        grid = grid.with_jitter(args.common.seed);
    }
    let mut report = Report::new();
    report.row("problem:", &file.name);
    report.row("candidate:", &pbar);
    let verdict = match classify(&file.spec, &pbar, &grid, &classes) {
        Ok(v) => v,
        Err(OracleError::Kkt(e)) if infeasible(&mut report, &e) => return Ok((EXIT_VIOLATED, report)),
        Err(e) => return Err(e.into()),
    };
    report.row("grid:", format!("{} per axis over {}", args.grid, file.spec.sample_box));
    report.row(
        "points:",
        format!(
            "{} total, {} feasible, {} invalid",
            verdict.total, verdict.feasible, verdict.invalid
        ),
    );
    report.row("phi(candidate):", &verdict.candidate_phi);
    report.kv("grid", args.grid);
    report.kv("total", verdict.total);
    report.kv("feasible", verdict.feasible);
    report.kv("invalid", verdict.invalid);
    report.kv("phi", &verdict.candidate_phi);
    for (class, cv) in &verdict.classes {
        match cv {
            ClassVerdict::HoldsOnGrid => {
                report.row(&format!("{class}:"), "holds-on-grid");
                report.kv(class.name(), "holds-on-grid");
            }
            ClassVerdict::Refuted(w) => {
                report.row(
                    &format!("{class}:"),
                    format!("refuted by grid point {} at {:.6}, phi = {}", w.index, w.point, w.phi),
                );
                report.kv(class.name(), "refuted");
                report.kv(format!("{}.witness", class.name()), &w.point);
                report.kv(format!("{}.witness_index", class.name()), w.index);
                report.kv(format!("{}.witness_phi", class.name()), &w.phi);
            }
        }
    }
    let code = if verdict.all_hold() { EXIT_OK } else { EXIT_VIOLATED };
    Ok((code, report))
}

pub fn derivs(args: &DerivsArgs) -> CmdResult {
    let Loaded { file, pbar } = load(&args.common)?;
    let spec = &file.spec;
    let m = spec.manifold;
    let mut targets = Vec::new();
    for t in &args.target {
        let q: Point = t.parse().map_err(|e| anyhow!("--target `{t}`: {e}"))?;
        m.check_point(&q).map_err(|e| anyhow!("--target `{t}`: {e}"))?;
        targets.push(q);
    }
    if args.random > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(args.common.seed);
        let ranges = spec.sample_box.ranges();
        let mut drawn = 0;
        let mut attempts = 0;
        while drawn < args.random {
            attempts += 1;
            if attempts > args.random * 100 {
                bail!("could not draw {} valid targets from the sample box", args.random);
            }
            let coords: Vec<f64> = ranges.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
            if let Ok(q) = m.point_from_coords(&coords) {
                targets.push(q);
                drawn += 1;
            }
        }
    }
    if targets.is_empty() {
        bail!("no targets: pass --target or --random");
    }
    let mut report = Report::new();
    report.row("problem:", &file.name);
    report.row("candidate:", &pbar);
    report.kv("candidate", &pbar);
    report.kv("targets", targets.len());
    for (k, q) in targets.iter().enumerate() {
        let n = k + 1;
        let w = m.log_map(&pbar, q)?;
        report.line(format!("target {n}: {q:.6}"));
        report.kv(format!("target.{n}"), q);
        for o in &spec.objectives {
            let (dl, du) = calculus::weak_dir_deriv(&o.f, &pbar, &w)?;
            let gh = calculus::gh_dir_deriv(&o.f, &pbar, &w)?;
            report.line(format!("  {:<8} dL = {dl:>14.9}  dU = {du:>14.9}  gH = {gh}", o.name));
            report.kv(format!("target.{n}.{}.dL", o.name), dl);
            report.kv(format!("target.{n}.{}.dU", o.name), du);
            report.kv(format!("target.{n}.{}.gh", o.name), gh);
        }
        for c in &spec.constraints {
            let d = calculus::dir_deriv(&c.f, &pbar, &w)?;
            report.line(format!("  {:<8} d  = {d:>14.9}", c.name));
            report.kv(format!("target.{n}.{}.d", c.name), d);
        }
    }
    Ok((EXIT_OK, report))
}

fn probe_entry(report: &mut Report, key: &str, label: &str, r: &ProbeReport) {
    match &r.witness {
        None => {
            report.line(format!("  {label:<34} holds on {} samples", r.checks));
            report.kv(key, "holds-on-samples");
        }
        Some(w) => {
            report.line(format!("  {label:<34} violated: {w}"));
            report.kv(key, "violated");
            if let Some(c) = w.component {
                report.kv(format!("{key}.component"), c);
            }
            report.kv(format!("{key}.p"), &w.p);
            report.kv(format!("{key}.q"), &w.q);
            if let Some(a) = w.alpha {
                report.kv(format!("{key}.alpha"), a);
            }
            if let Some(e) = &w.error {
                report.kv(format!("{key}.error"), e);
            } else {
                report.kv(format!("{key}.lhs"), w.lhs);
                report.kv(format!("{key}.rhs"), w.rhs);
            }
        }
    }
}

pub fn props(args: &PropsArgs) -> CmdResult {
    use calculus::Bound;
    let Loaded { file, pbar } = load(&args.common)?;
    let spec = &file.spec;
    let sampler = Sampler::new(spec.manifold, spec.sample_box.clone(), args.common.seed);
    let valid = |p: &Point| spec.evaluates_at(p);
    let plan = ConvexityPlan::sample(&sampler, args.pairs, args.alphas, valid, spec.anchors.clone());
    let points = sampler.points(args.probes, |p| spec.evaluates_at(p));
    let mut report = Report::new();
    report.row("problem:", &file.name);
    report.row("candidate:", &pbar);
    report.row(
        "samples:",
        format!(
            "{} anchors, {} pairs x {} alphas, {} pseudo-convexity points (seed {})",
            plan.anchors.len(),
            plan.pairs.len(),
            plan.alphas.len(),
            points.len(),
            args.common.seed
        ),
    );
    report.kv("seed", args.common.seed);
    report.kv("pairs", plan.pairs.len());
    report.kv("points", points.len());
    for o in &spec.objectives {
        report.line(format!("{}:", o.name));
        let n = &o.name;
        probe_entry(
            &mut report,
            &format!("{n}.lu_convex"),
            "LU-convex",
            &calculus::lu_convexity_probe(&o.f, &plan, CONVEXITY_TOL),
        );
        probe_entry(
            &mut report,
            &format!("{n}.cw_convex"),
            "CW-convex",
            &calculus::cw_convexity_probe(&o.f, &plan, CONVEXITY_TOL),
        );
        for b in [Bound::Lower, Bound::Upper, Bound::Center, Bound::HalfWidth] {
            let tag = b.tag();
            probe_entry(
                &mut report,
                &format!("{n}.{tag}.pseudo_convex"),
                &format!("{} pseudo-convex at candidate", b.name()),
                &calculus::bound_pseudoconvexity_probe(&o.f, b, &pbar, &points, false),
            );
            probe_entry(
                &mut report,
                &format!("{n}.{tag}.strict_pseudo_convex"),
                &format!("{} strictly pseudo-convex", b.name()),
                &calculus::bound_pseudoconvexity_probe(&o.f, b, &pbar, &points, true),
            );
        }
    }
    for c in &spec.constraints {
        report.line(format!("{}:", c.name));
        let n = &c.name;
        probe_entry(
            &mut report,
            &format!("{n}.convex"),
            "convex",
            &calculus::convexity_probe(&c.f, &plan, CONVEXITY_TOL),
        );
        probe_entry(
            &mut report,
            &format!("{n}.strict_pseudo_convex"),
            "strictly pseudo-convex at candidate",
            &calculus::pseudoconvexity_probe(&c.f, &pbar, &points, true),
        );
    }
    if let Ok(values) = spec.check_feasible(&pbar, FEAS_TOL) {
        let active: Vec<String> = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() <= ACTIVE_TOL)
            .map(|(u, _)| (u + 1).to_string())
            .collect();
        report.kv("candidate.feasible", true);
        report.kv("active", active.join(","));
    } else {
        report.kv("candidate.feasible", false);
    }
    Ok((EXIT_OK, report))
}

pub fn list() -> Report {
    let mut report = Report::new();
    for (name, summary, _) in registry::BUILTINS {
        report.line(format!("{name:<24}{summary}"));
    }
    report.kv("problems", registry::names().collect::<Vec<_>>().join(","));
    report
}
