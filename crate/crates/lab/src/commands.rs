//! One function per subcommand. Each writes its files under the output
//! directory, appends a manifest entry and returns a short human summary.

use std::path::Path;
use std::sync::Mutex;

use qcrystal_core::anharmonicity::{theta_star_phi4, AnharmonicityProfile};
use qcrystal_core::correlation::corr_bound_table;
use qcrystal_core::lattice_green::{green_j, green_j_brillouin, GreenResult};
use qcrystal_core::oscillator::{matsubara_u, solve_spectrum_for_beta, thermal_q2};
use qcrystal_core::pimc::{analytic_comparisons, merge_reports, run_chain_with, SimReport};
use qcrystal_core::thresholds::classify_with;
use qcrystal_core::{MatsubaraTable, SpectrumResult};
use serde::Serialize;

use crate::acceptance;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{num, vec_label, write_json, write_tsv, Run};

/// Environment variable with the worker-thread count for independent chains.
pub const THREADS_ENV: &str = "QCRYSTAL_THREADS";

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub beta: f64,
    pub spectrum: SpectrumResult,
    pub thermal_q2: f64,
    pub matsubara: MatsubaraTable,
}

fn spectrum_at_beta(cfg: &RunConfig) -> Result<(SpectrumResult, MatsubaraTable), CliError> {
    let spec = cfg.oscillator()?;
    let beta = cfg.lattice.beta;
    let s = solve_spectrum_for_beta(&spec, beta, cfg.spectrum.n_levels, cfg.spectrum.tol)
        .map_err(|e| CliError::domain("oscillator", e))?;
    let t = matsubara_u(&s, beta, cfg.spectrum.max_kappa)
        .map_err(|e| CliError::domain("oscillator", e))?;
    Ok((s, t))
}

pub fn spectrum(cfg: RunConfig, out: &Path) -> Result<String, CliError> {
    let (s, t) = spectrum_at_beta(&cfg)?;
    let beta = cfg.lattice.beta;
    let q2 = thermal_q2(&s, beta).map_err(|e| CliError::domain("oscillator", e))?;
    let mut run = Run::new("spectrum", out, cfg, None);
    let levels: Vec<Vec<String>> = s
        .energies
        .iter()
        .enumerate()
        .map(|(n, e)| vec![n.to_string(), num(*e), num(e - s.energies[0])])
        .collect();
    write_tsv(&run.file("levels.tsv"), &["n", "E_n", "E_n-E_0"], &levels)?;
    let k = t.max_kappa as i64;
    let rows: Vec<Vec<String>> = (-k..=k)
        .map(|kappa| {
            vec![
                kappa.to_string(),
                num(t.frequency(kappa)),
                num(t.value(kappa)),
                num(t.majorant(kappa)),
            ]
        })
        .collect();
    write_tsv(
        &run.file("matsubara.tsv"),
        &["kappa", "k", "u_hat", "majorant"],
        &rows,
    )?;
    let summary = format!(
        "gap {:.12} (levels {}-{}), rigidity {:.12}, <q^2>(beta={beta}) = {q2:.12}",
        s.gap,
        s.gap_index,
        s.gap_index + 1,
        s.rigidity
    );
    let report = SpectrumReport {
        beta,
        spectrum: s,
        thermal_q2: q2,
        matsubara: t,
    };
    write_json(&run.file("spectrum.json"), &report)?;
    run.finish("ok")?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ThetaStarReport {
    pub spin_dim: usize,
    pub theta_star: f64,
    /// Present for the scalar series computation.
    pub profile: Option<AnharmonicityProfile>,
}

pub fn theta_star(cfg: RunConfig, out: &Path) -> Result<String, CliError> {
    let spec = cfg.oscillator()?;
    let report = if spec.spin_dim == 1 {
        let p = AnharmonicityProfile::new(&spec.anharm_coeffs, spec.rigidity_a)
            .map_err(|e| CliError::domain("anharmonicity", e))?;
        ThetaStarReport {
            spin_dim: 1,
            theta_star: p.theta_star,
            profile: Some(p),
        }
    } else {
        if spec.anharm_coeffs.len() != 2 {
            return Err(CliError::config(
                "[oscillator] vector models need anharm_coeffs = [-b, b2]".into(),
            ));
        }
        let t = theta_star_phi4(
            spec.rigidity_a,
            -spec.anharm_coeffs[0],
            spec.anharm_coeffs[1],
            spec.spin_dim,
        )
        .map_err(|e| CliError::domain("anharmonicity", e))?;
        ThetaStarReport {
            spin_dim: spec.spin_dim,
            theta_star: t,
            profile: None,
        }
    };
    let mut run = Run::new("theta-star", out, cfg, None);
    write_json(&run.file("theta_star.json"), &report)?;
    run.finish("ok")?;
    Ok(format!("theta* = {:.15}", report.theta_star))
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenEntry {
    pub laplace_bessel: GreenResult,
    pub brillouin: Option<GreenResult>,
}

pub fn green(cfg: RunConfig, out: &Path) -> Result<String, CliError> {
    let tol = cfg.green.tol;
    let mut entries = Vec::new();
    for &d in &cfg.green.dimensions {
        let lb = green_j(d, tol).map_err(|e| CliError::domain("lattice_green", e))?;
        let bz = if cfg.green.cross_check {
            Some(
                green_j_brillouin(d, tol.max(1e-10))
                    .map_err(|e| CliError::domain("lattice_green", e))?,
            )
        } else {
            None
        };
        entries.push(GreenEntry {
            laplace_bessel: lb,
            brillouin: bz,
        });
    }
    let mut run = Run::new("green", out, cfg, None);
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|e| {
            let mut r = vec![
                e.laplace_bessel.dimension.to_string(),
                num(e.laplace_bessel.value),
                num(e.laplace_bessel.abs_error_estimate),
            ];
            if let Some(b) = &e.brillouin {
                r.push(num(b.value));
                r.push(num(b.abs_error_estimate));
            }
            r
        })
        .collect();
    let header: &[&str] = if entries.iter().any(|e| e.brillouin.is_some()) {
        &["d", "J", "error", "J_brillouin", "error_brillouin"]
    } else {
        &["d", "J", "error"]
    };
    write_tsv(&run.file("green.tsv"), header, &rows)?;
    write_json(&run.file("green.json"), &entries)?;
    run.finish("ok")?;
    Ok(entries
        .iter()
        .map(|e| {
            format!(
                "J({}) = {:.12} ± {:.1e}",
                e.laplace_bessel.dimension,
                e.laplace_bessel.value,
                e.laplace_bessel.abs_error_estimate
            )
        })
        .collect::<Vec<_>>()
        .join("\n"))
}

pub fn classify(cfg: RunConfig, out: &Path) -> Result<String, CliError> {
    let model = cfg.lattice_model()?;
    let spec = cfg.oscillator()?;
    let c = classify_with(&model, &spec, &cfg.classify_options())
        .map_err(|e| CliError::domain("thresholds", e))?;
    let mut run = Run::new("classify", out, cfg, None);
    write_json(&run.file("classification.json"), &c)?;
    run.finish("ok")?;
    let verdict = serde_json::to_value(c.verdict).expect("verdict serializes");
    let mut s = format!(
        "verdict {}: R_m - J0 = {:.6e}",
        verdict.as_str().unwrap_or("?"),
        c.stability_margin
    );
    if let Some(t) = c.transition_margin {
        s.push_str(&format!(", 8m theta*^2 J - J(d) = {t:.6e}"));
    }
    if let Some(b) = c.beta_star {
        s.push_str(&format!(", beta* = {b:.10}"));
    }
    Ok(s)
}

pub fn corr_bound(cfg: RunConfig, out: &Path) -> Result<String, CliError> {
    let (_, table) = spectrum_at_beta(&cfg)?;
    let offsets = cfg.corr_offsets()?;
    let d = cfg.lattice.dimension;
    let box_size = cfg.corr_bound.finite_box.then_some(cfg.lattice.box_size);
    let tab = corr_bound_table(
        &offsets,
        &cfg.corr_bound.dtaus,
        &table,
        &cfg.coupling(),
        d,
        box_size,
        cfg.corr_bound.tol,
    )
    .map_err(|e| CliError::domain("correlation_bounds", e))?;
    let mut run = Run::new("corr-bound", out, cfg, None);
    let mut rows = Vec::new();
    for (o, row) in tab.offsets.iter().zip(&tab.values) {
        for (t, y) in tab.dtaus.iter().zip(row) {
            rows.push(vec![vec_label(o), num(*t), num(*y)]);
        }
    }
    write_tsv(&run.file("corr_bound.tsv"), &["offset", "dtau", "Y"], &rows)?;
    write_json(&run.file("corr_bound.json"), &tab)?;
    run.finish("ok")?;
    Ok(format!(
        "Y(0,0) = {:.10}, stability margin {:.4e}, {} rows",
        tab.values[0][0],
        tab.margin,
        rows.len()
    ))
}

/// Worker threads for independent chains: `QCRYSTAL_THREADS`, else the machine's parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Run all chains of `cfg` on up to `threads` workers and merge them in chain order,
/// so the result does not depend on the thread count.
pub fn run_simulation(
    cfg: &qcrystal_core::pimc::SimConfig,
    threads: usize,
) -> Result<SimReport, CliError> {
    let analytic = analytic_comparisons(cfg);
    let n = cfg.chains;
    let slots: Vec<Mutex<Option<qcrystal_core::Result<SimReport>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    std::thread::scope(|scope| {
        for _ in 0..threads.clamp(1, n) {
            scope.spawn(|| loop {
                let i = {
                    let mut g = next.lock().unwrap();
                    let i = *g;
                    *g += 1;
                    i
                };
                if i >= n {
                    break;
                }
                let r = run_chain_with(cfg, i as u64, &analytic);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    let mut reports = Vec::with_capacity(n);
    for s in slots {
        let r = s.into_inner().unwrap().expect("every chain ran");
        reports.push(r.map_err(|e| CliError::domain("pimc", e))?);
    }
    merge_reports(&reports).map_err(|e| CliError::domain("pimc", e))
}

pub fn simulate(cfg: RunConfig, out: &Path) -> Result<String, CliError> {
    let sim = cfg.sim_config()?;
    let report = run_simulation(&sim, thread_count())?;
    let mut run = Run::new("simulate", out, cfg, Some(sim.seed));
    write_json(&run.file("simulate.json"), &report)?;
    let est = |e: &qcrystal_core::pimc::Estimate| vec![num(e.mean), num(e.error)];
    let rows: Vec<Vec<String>> = report
        .duhamel
        .iter()
        .map(|o| [vec![vec_label(&o.offset)], est(&o.estimate)].concat())
        .collect();
    write_tsv(&run.file("duhamel.tsv"), &["offset", "D", "error"], &rows)?;
    let rows: Vec<Vec<String>> = report
        .infrared
        .iter()
        .map(|e| {
            let p = e
                .momentum
                .iter()
                .map(|x| num(*x))
                .collect::<Vec<_>>()
                .join(",");
            let bound = e.bound.map_or("inf".to_string(), num);
            [vec![p], est(&e.estimate), vec![bound]].concat()
        })
        .collect();
    write_tsv(
        &run.file("infrared.tsv"),
        &["momentum", "D_hat", "error", "bound"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = report
        .lag_moments
        .iter()
        .map(|l| {
            [
                vec![l.lag.to_string(), num(l.tau)],
                est(&l.estimate),
                vec![num(l.free_bound), l.exact.map_or("nan".into(), num)],
            ]
            .concat()
        })
        .collect();
    write_tsv(
        &run.file("lags.tsv"),
        &["lag", "tau", "moment", "error", "free_bound", "exact"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| vec![c.name.clone(), c.passed.to_string(), c.detail.clone()])
        .collect();
    write_tsv(
        &run.file("checks.tsv"),
        &["check", "passed", "detail"],
        &rows,
    )?;
    run.finish(if report.all_passed() {
        "ok"
    } else {
        "checks failed"
    })?;
    let mut s = format!(
        "<x^2>/nu = {:.6} ± {:.1e}, P = {:.6} ± {:.1e}, acceptance {:.3}/{:.3}",
        report.q2_per_component.mean,
        report.q2_per_component.error,
        report.order_parameter.mean,
        report.order_parameter.error,
        report.acceptance.local_rate(),
        report.acceptance.loop_rate()
    );
    for c in &report.checks {
        s.push_str(&format!(
            "\n  [{}] {}: {}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    Ok(s)
}

pub fn verify(cfg: RunConfig, out: &Path, only: &[usize]) -> Result<String, CliError> {
    let results = acceptance::run(only, &mut |r| println!("{}", r.line()));
    let mut run = Run::new("verify", out, cfg, None);
    write_json(&run.file("verify.json"), &results)?;
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.id.to_string(),
                r.passed.to_string(),
                format!("{:.2}", r.seconds),
                r.detail.clone(),
            ]
        })
        .collect();
    write_tsv(
        &run.file("verify.tsv"),
        &["criterion", "passed", "seconds", "detail"],
        &rows,
    )?;
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| r.id.to_string())
        .collect();
    run.finish(if failed.is_empty() { "ok" } else { "failed" })?;
    if failed.is_empty() {
        Ok(format!("all {} criteria passed", results.len()))
    } else {
        Err(CliError::Failed(format!("criteria {}", failed.join(", "))))
    }
}
