//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 4 7`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use urnfield::ctime::{compare_laws, sample_discrete, sample_embedded, RefreshSchedule};
use urnfield::mc::{run_ensemble, EnsembleConfig, ModelConfig};
use urnfield::meanfield::{
    beta_violations, eigenvalues, field, find_equilibria, lemma_violations, lyapunov,
    lyapunov_closed, solve_sm, solve_um, um_stability_margin, ModelParams, StabilityClass,
};
use urnfield::rng::{derive_seed, stream};
use urnfield::urn_sim::run_coupled;
use urnfield::ReinforcementSeq;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mp(m: u32, p: f64) -> ModelParams {
    ModelParams::new(m, p).unwrap()
}

fn gradient_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = stream(101);
    let mut worst = 0.0f64;
    let h = 1e-3;
    for m in [2, 3, 5] {
        for p in [0.0, 0.3, 0.5] {
            let pr = mp(m, p);
            let l = |x: f64, y: f64| lyapunov(&pr, x, y);
            for _ in 0..100 {
                let x = 0.01 + 0.98 * rng.random::<f64>();
                let y = 0.01 + 0.98 * rng.random::<f64>();
                let dx = (-l(x + 2.0 * h, y) + 8.0 * l(x + h, y) - 8.0 * l(x - h, y)
                    + l(x - 2.0 * h, y))
                    / (12.0 * h);
                let dy = (-l(x, y + 2.0 * h) + 8.0 * l(x, y + h) - 8.0 * l(x, y - h)
                    + l(x, y - 2.0 * h))
                    / (12.0 * h);
                let (f1, f2) = field(&pr, x, y);
                worst = worst.max((dx - f1).abs()).max((dy - f2).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-6 && secs < 1.0,
        format!("max |grad L - F| = {worst:.2e}, {secs:.2} s"),
    )
}

fn closed_form_lyapunov() -> Outcome {
    let mut rng = stream(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (x, y, p) = (
            rng.random::<f64>(),
            rng.random::<f64>(),
            rng.random::<f64>(),
        );
        for m in [2, 3] {
            let diff = lyapunov(&mp(m, p), x, y) - lyapunov_closed(m, p, x, y).unwrap();
            worst = worst.max(diff.abs());
        }
    }
    check(
        worst < 1e-8,
        format!("max |L_quad - L_closed| = {worst:.2e}"),
    )
}

fn eigenvalue_anchors() -> Outcome {
    let mut worst = 0.0f64;
    for m in 2..=10 {
        for p in [0.0, 0.25, 0.5, 0.75] {
            let pr = mp(m, p);
            worst = worst
                .max((eigenvalues(&pr, 0.5, 0.5).1 - (m as f64 - 1.0)).abs())
                .max((eigenvalues(&pr, 0.0, 0.0).1 + 1.0).abs())
                .max((eigenvalues(&pr, 1.0, 1.0).1 + 1.0).abs());
        }
    }
    check(worst < 1e-9, format!("max anchor error = {worst:.2e}"))
}

fn equilibria_without_interaction() -> Outcome {
    let v = [0.0, 0.5, 1.0];
    let want: Vec<[f64; 2]> = v
        .iter()
        .flat_map(|&x| v.iter().map(move |&y| [x, y]))
        .collect();
    let mut counts = Vec::new();
    let mut all = true;
    for m in [2, 3, 5] {
        let got: Vec<[f64; 2]> = find_equilibria(&mp(m, 0.0), 128, 1e-10)
            .unwrap()
            .iter()
            .map(|e| e.location)
            .collect();
        all &= got == want;
        counts.push(format!("m={m}: {}", got.len()));
    }
    check(all, counts.join(", "))
}

fn m2_threshold() -> Outcome {
    let crit = 1.0 - std::f64::consts::SQRT_2 / 2.0;
    let margin = |p: f64| um_stability_margin(&mp(2, p)).unwrap().margin;
    let (mut lo, mut hi) = (0.2, 0.4);
    if !(margin(lo) < 0.0 && margin(hi) > 0.0) {
        return Err("margin does not change sign on [0.2, 0.4]".into());
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if margin(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let found = 0.5 * (lo + hi);
    let mut worst_u = 0.0f64;
    for k in 0..100 {
        let p = 0.49 * k as f64 / 99.0;
        let closed = (1.0 - (1.0 - 2.0 * p).sqrt()) / 2.0;
        worst_u = worst_u.max((solve_um(&mp(2, p), 1e-13).unwrap() - closed).abs());
    }
    check(
        (found - crit).abs() < 1e-6 && worst_u < 1e-10,
        format!(
            "sign change at {found:.9} (|diff| {:.1e}), max |u_2 - closed| = {worst_u:.1e}",
            (found - crit).abs()
        ),
    )
}

fn supercritical_classification() -> Outcome {
    let mut off = 0;
    let mut bad = Vec::new();
    for m in [3, 5] {
        for p in [0.5, 0.6] {
            for e in find_equilibria(&mp(m, p), 128, 1e-10).unwrap() {
                if e.location == [0.0, 0.0] || e.location == [1.0, 1.0] {
                    continue;
                }
                off += 1;
                if e.class != StabilityClass::Unstable {
                    bad.push(format!("m={m} p={p} {:?} {:?}", e.location, e.class));
                }
            }
        }
    }
    check(
        bad.is_empty(),
        format!(
            "{off} off-corner equilibria, {} not unstable {bad:?}",
            bad.len()
        ),
    )
}

fn sm_convergence() -> Outcome {
    let start = Instant::now();
    let mut dists = Vec::new();
    for m in [20, 30, 40] {
        let s = solve_sm(&mp(m, 0.3), None).map_err(|e| format!("m={m}: {e}"))?;
        if s.class != StabilityClass::StrictlyStable {
            return Err(format!("m={m}: s_m classified {:?}", s.class));
        }
        dists.push((s.location[0] - 0.3).hypot(s.location[1] - 1.0));
    }
    let secs = start.elapsed().as_secs_f64();
    let decreasing = dists.windows(2).all(|w| w[1] < w[0]);
    check(
        decreasing && dists[2] < 0.05 && secs < 1.0,
        format!(
            "|s_m - (0.3,1)| = {:.2e}, {:.2e}, {:.2e}; {secs:.2} s",
            dists[0], dists[1], dists[2]
        ),
    )
}

fn inequality_grids() -> Outcome {
    let lemma: usize = (3..=12).map(|m| lemma_violations(m, 10_000)).sum();
    let beta: usize = (2..=12).map(|m| beta_violations(m, 10_000)).sum();
    check(
        lemma == 0 && beta == 0,
        format!("lemma violations {lemma}, beta violations {beta}"),
    )
}

fn coupling_pathwise() -> Outcome {
    let seq = Arc::new(ReinforcementSeq::monomial(2).unwrap());
    let mut total = 0;
    for p in [0.2, 0.8] {
        for seed in 0..100 {
            total += run_coupled([1, 1], [1, 1], p, seq.clone(), seed, 10_000, 1000)
                .unwrap()
                .violations;
        }
    }
    check(
        total == 0,
        format!("{total} violations over 200 coupled runs"),
    )
}

fn embedding_law() -> Outcome {
    let a = [1u64, 1];
    let ks = [1u64, 2, 3];
    let n = 100_000;
    let seq = Arc::new(ReinforcementSeq::monomial(2).unwrap());
    let mut passes = [0usize; 3];
    let mut min_p = [1.0f64; 3];
    for rep in 0..100u64 {
        let e = sample_embedded(
            2,
            &a,
            2,
            &seq,
            derive_seed(0xE4B, 2 * rep),
            n,
            &ks,
            RefreshSchedule::Delayed,
        )
        .unwrap();
        let u = sample_discrete(2, &a, 2, &seq, derive_seed(0xE4B, 2 * rep + 1), n, &ks).unwrap();
        for j in 0..3 {
            let pv = compare_laws(&e.by_k[j], &u.by_k[j]).unwrap().p_value;
            min_p[j] = min_p[j].min(pv);
            if pv > 1e-3 {
                passes[j] += 1;
            }
        }
    }
    let varied = Arc::new(ReinforcementSeq::exponential(10.0).unwrap());
    let e = sample_embedded(2, &a, 2, &varied, 77, n, &[3], RefreshSchedule::EveryJump).unwrap();
    let u = sample_discrete(2, &a, 2, &varied, 78, n, &[3]).unwrap();
    let control = compare_laws(&e.by_k[0], &u.by_k[0]).unwrap().p_value;
    check(
        passes.iter().all(|&c| c >= 99) && control < 1e-3,
        format!(
            "p > 1e-3 in {}/{}/{} of 100 for k = 1/2/3 (min p {:.1e}/{:.1e}/{:.1e}); broken refresh p = {control:.1e}",
            passes[0], passes[1], passes[2], min_p[0], min_p[1], min_p[2]
        ),
    )
}

fn multicolor(nc: usize, seq: ReinforcementSeq, seed: u64) -> EnsembleConfig {
    EnsembleConfig::new(
        ModelConfig::Multicolor {
            nc,
            d: 1,
            m: None,
            seq: Some(seq),
            a: None,
        },
        100_000,
        500,
        seed,
    )
}

fn monopoly_at_p1() -> Outcome {
    let cubic = || ReinforcementSeq::polynomial(&[1.0, 3.0, 3.0, 1.0]).unwrap();
    let mut lines = Vec::new();
    let mut ok = true;
    for nc in [2, 3] {
        for (name, seq) in [
            ("(n+1)^3", cubic()),
            (
                "interleaved quartic",
                ReinforcementSeq::interleaved_quartic(),
            ),
        ] {
            let f = run_ensemble(&multicolor(nc, seq, 1100 + nc as u64))
                .unwrap()
                .monopoly;
            ok &= f.frequency >= 0.95 && f.interval.0 > 0.5;
            lines.push(format!(
                "Nc={nc} {name}: {:.3} [{:.3}, {:.3}]",
                f.frequency, f.interval.0, f.interval.1
            ));
        }
    }
    let lin = run_ensemble(&multicolor(2, ReinforcementSeq::monomial(1).unwrap(), 1199))
        .unwrap()
        .monopoly;
    ok &= lin.frequency <= 0.05;
    lines.push(format!("W(n)=n control: {:.3}", lin.frequency));
    check(ok, lines.join("; "))
}

fn ium(m: u32, p: f64, n_runs: u64, seed: u64) -> EnsembleConfig {
    EnsembleConfig::new(
        ModelConfig::Ium {
            d: 2,
            p,
            m: Some(m),
            seq: None,
            b0: Some(vec![1, 1]),
            r0: Some(vec![1, 1]),
        },
        100_000,
        n_runs,
        seed,
    )
}

fn non_domination() -> Outcome {
    let r = run_ensemble(&ium(2, 0.2, 1000, 1200)).unwrap();
    let u = solve_um(&mp(2, 0.2), 1e-13).unwrap();
    let cell = |loc: [f64; 2]| {
        r.targets
            .iter()
            .find(|t| {
                (t.location[0] - loc[0]).abs() < 1e-8 && (t.location[1] - loc[1]).abs() < 1e-8
            })
            .map(|t| t.hits)
    };
    let mut ok = true;
    let mut lines = Vec::new();
    for (name, loc) in [
        ("(u,1-u)", [u, 1.0 - u]),
        ("(0,0)", [0.0, 0.0]),
        ("(1,1)", [1.0, 1.0]),
    ] {
        match cell(loc) {
            Some(h) => {
                ok &= h.interval.0 > 0.0;
                lines.push(format!(
                    "{name}: {} [{:.3}, {:.3}]",
                    h.count, h.interval.0, h.interval.1
                ));
            }
            None => {
                ok = false;
                lines.push(format!("{name}: not an equilibrium"));
            }
        }
    }
    if let Some(h) = cell([1.0 - u, u]) {
        lines.push(format!("(1-u,u): {}", h.count));
    }
    lines.push(format!("unresolved {}", r.unresolved));
    check(ok, lines.join(", "))
}

fn domination_supercritical() -> Outcome {
    let r = run_ensemble(&ium(3, 0.55, 500, 1300)).unwrap();
    let d = r.domination;
    check(
        d.frequency >= 0.95,
        format!(
            "domination {:.3} [{:.3}, {:.3}], unresolved {}",
            d.frequency, d.interval.0, d.interval.1, r.unresolved
        ),
    )
}

fn invoke(args: &[String]) -> Result<(), String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("urnfield".to_string()).chain(args.iter().cloned());
    match urnfield_cli::run(argv, &mut out, &mut err) {
        0 => Ok(()),
        code => Err(format!(
            "{args:?} exited {code}: {}",
            String::from_utf8_lossy(&err)
        )),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let write = |name: &str, text: &str| {
        let p = root.join(name);
        std::fs::write(&p, text).unwrap();
        p.display().to_string()
    };
    let mc = write(
        "mc.json",
        r#"{"schema":1,"model":{"kind":"ium","p":0.2,"m":2},"n_steps":2000,"n_runs":20,"seed":9}"#,
    );
    let scan = write(
        "scan.json",
        r#"{"schema":1,"m":3,"p_grid":[0.1,0.6],"base":{"schema":1,"model":{"kind":"ium","p":0.0,"m":3},"n_steps":1000,"n_runs":10,"seed":2}}"#,
    );
    let seq = write(
        "seq.json",
        &ReinforcementSeq::interleaved_quartic().to_json(),
    );
    let commands: Vec<Vec<&str>> = vec![
        vec!["field", "--m", "3", "--p", "0.4", "--resolution", "21"],
        vec!["equilibria", "--m", "3", "--p", "0.4", "--format", "json"],
        vec!["um", "--m", "3", "--p", "0.1"],
        vec!["sm", "--m", "30", "--p", "0.3"],
        vec![
            "simulate", "--model", "ium", "--m", "3", "--p", "0.2", "--steps", "10000",
        ],
        vec![
            "simulate",
            "--model",
            "multicolor",
            "--m",
            "3",
            "--nc",
            "3",
            "--steps",
            "5000",
        ],
        vec![
            "simulate",
            "--model",
            "sequential",
            "--m",
            "2",
            "--steps",
            "5000",
        ],
        vec![
            "simulate",
            "--model",
            "embedding",
            "--m",
            "2",
            "--d",
            "2",
            "--steps",
            "5000",
            "--format",
            "json",
        ],
        vec![
            "simulate", "--model", "coupled", "--m", "2", "--p", "0.4", "--steps", "5000",
        ],
        vec!["mc", "--config", &mc],
        vec!["mc", "--config", &mc, "--format", "csv"],
        vec!["scan", "--config", &scan],
        vec!["check-w", "--seq", &seq],
        vec!["embed-test", "--m", "2", "--k", "3", "--samples", "2000"],
    ];
    let mut differing = Vec::new();
    for (i, cmd) in commands.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = root.join(format!("out_{i}_{rep}"));
            let mut args: Vec<String> = cmd.iter().map(|s| s.to_string()).collect();
            args.extend(["--seed", "7", "--out"].map(String::from));
            args.push(out.display().to_string());
            invoke(&args)?;
            outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
            manifest_digest(&out)?;
        }
        if outputs[0] != outputs[1] {
            differing.push(cmd[0].to_string());
        }
    }
    check(
        differing.is_empty(),
        format!(
            "{} invocations repeated, differing: {differing:?}",
            commands.len()
        ),
    )
}

fn manifest_digest(out: &Path) -> Result<(), String> {
    let path = format!("{}.manifest.json", out.display());
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let m: urnfield_cli::Manifest = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    if m.outputs.len() != 1
        || m.outputs[0].bytes != std::fs::metadata(out).map_err(|e| e.to_string())?.len()
    {
        return Err(format!("{path}: manifest does not describe its output"));
    }
    Ok(())
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 14] = [
        (1, "gradient identity", gradient_identity),
        (2, "closed-form Lyapunov", closed_form_lyapunov),
        (3, "eigenvalue anchors", eigenvalue_anchors),
        (4, "equilibria at p = 0", equilibria_without_interaction),
        (5, "m = 2 stability threshold", m2_threshold),
        (
            6,
            "classification for p >= 1/2",
            supercritical_classification,
        ),
        (7, "s_m convergence", sm_convergence),
        (8, "inequality grids", inequality_grids),
        (9, "coupling pathwise", coupling_pathwise),
        (10, "embedding law", embedding_law),
        (11, "monopoly at p = 1", monopoly_at_p1),
        (12, "non-domination at small p", non_domination),
        (13, "domination for p >= 1/2", domination_supercritical),
        (14, "CLI determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {id:>2} {tag} {name}: {detail} [{secs:.1} s]");
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
