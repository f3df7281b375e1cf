//! Executes validated experiments and writes their CSV artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use cachecast::analysis::{policy_success_prob, success_prob};
use cachecast::content::{binomial, decompose_marginals, Combination, KSubsets, Popularity};
use cachecast::optimize::{design, gradient_projection, waterfill_marginals, GradientOptions};
use cachecast::policy::{baseline, BaselineId, CachePolicy};
use cachecast::sim::{monte_carlo, SimConfig};
use cachecast::{NetworkConfig, Snr};

use crate::csvout::{write_atomic, write_csv, Header};
use crate::spec::{Mode, PolicyChoice, PolicyKind, PopularitySpec, Resolved, SweepParam};

/// Runs a validated experiment (reproduce targets are dispatched by the
/// preset module instead).
pub fn run(r: &Resolved, out_dir: &Path) -> Result<()> {
    match r.mode {
        Mode::Analyze => analyze(r, out_dir),
        Mode::Optimize => optimize(r, out_dir),
        Mode::Simulate => simulate(r, out_dir),
        Mode::Sweep => sweep(r, out_dir),
        Mode::Reproduce => bail!("reproduce targets are handled by their presets"),
    }
}

// ===========================================================================
// Policy realization
// ===========================================================================

/// A policy made concrete: optimization-backed kinds are solved into an
/// explicit caching distribution, reference kinds pass through.
pub struct Realized {
    pub policy: CachePolicy,
    /// Wall-clock seconds spent designing (zero for non-designed kinds).
    pub seconds: f64,
    /// Free-form solver note (candidate counts, iterations, ...).
    pub note: String,
}

pub fn realize_policy(
    choice: &PolicyChoice,
    pop: &Popularity,
    cfg: &NetworkConfig,
) -> Result<Realized> {
    let start = Instant::now();
    let (policy, note) = match choice.kind {
        PolicyKind::Designed => {
            let d = design(pop, cfg, choice.candidate_budget)?;
            let note = format!(
                "candidates={} exhaustive={} closed_form_marginals={}",
                d.candidates, d.exhaustive, d.closed_form_marginals
            );
            (CachePolicy::Distribution(d.distribution), note)
        }
        PolicyKind::Waterfill => {
            let wf = waterfill_marginals(pop, cfg)?;
            let dist = decompose_marginals(&wf.marginals)?;
            let note = format!(
                "closed_form={} support={}",
                wf.closed_form,
                dist.entries().len()
            );
            (CachePolicy::Distribution(dist), note)
        }
        PolicyKind::Gradient => {
            let (candidates, init) = full_candidate_set(cfg, choice.candidate_budget)?;
            let opts = GradientOptions {
                max_iters: choice.max_iters,
                step: choice.step,
            };
            let g = gradient_projection(&candidates, &init, pop, cfg, &opts)?;
            let note = format!(
                "iterations={} candidates={}",
                g.trace.len().saturating_sub(1),
                candidates.len()
            );
            (CachePolicy::Distribution(g.distribution), note)
        }
        PolicyKind::Explicit => {
            let d = choice
                .explicit
                .clone()
                .ok_or_else(|| anyhow!("explicit policy was not loaded during validation"))?;
            (CachePolicy::Distribution(d), String::new())
        }
        PolicyKind::MostPopular => (CachePolicy::MostPopular, String::new()),
        PolicyKind::PopularitySampled => (CachePolicy::PopularitySampled, String::new()),
        PolicyKind::UniformRandom => (CachePolicy::UniformRandom, String::new()),
    };
    Ok(Realized {
        policy,
        seconds: start.elapsed().as_secs_f64(),
        note,
    })
}

/// Every size-K combination of the catalog plus uniform initial weights,
/// for whole-simplex gradient ascent. Refuses catalogs whose combination
/// count exceeds the candidate budget.
pub fn full_candidate_set(
    cfg: &NetworkConfig,
    budget: usize,
) -> Result<(Vec<Combination>, Vec<f64>)> {
    let count = binomial(cfg.catalog_size, cfg.cache_size);
    if count > budget.max(1) as f64 {
        bail!(
            "gradient ascent enumerates all C({}, {}) = {count:.0} cache combinations, which \
             exceeds the candidate budget of {budget}; raise policy.candidate_budget or use \
             the two-step designed policy",
            cfg.catalog_size,
            cfg.cache_size,
        );
    }
    let candidates: Vec<Combination> =
        KSubsets::new((0..cfg.catalog_size as u32).collect(), cfg.cache_size)
            .map(Combination::new)
            .collect::<cachecast::Result<_>>()?;
    let init = vec![1.0 / candidates.len() as f64; candidates.len()];
    Ok((candidates, init))
}

// ===========================================================================
// Shared helpers
// ===========================================================================

pub fn header_for(r: &Resolved, extra: Vec<String>) -> Header {
    Header {
        seed: r.sim.seed,
        config_json: r.normalized_json().to_string(),
        extra,
    }
}

/// Output stem: the configured `output` (minus a `.csv` suffix) or a
/// default, under the output directory.
pub fn stem(out_dir: &Path, output: &Option<String>, default: &str) -> PathBuf {
    let name = output.as_deref().unwrap_or(default);
    out_dir.join(name.strip_suffix(".csv").unwrap_or(name))
}

pub fn csv_at(stem: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}.csv", stem.display()))
}

pub fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn approx_note(exact: bool) -> Vec<String> {
    if exact {
        Vec::new()
    } else {
        vec![
            "note: analytical value treats per-file cache presence as independent \
             (sampling with replacement); Monte Carlo is authoritative"
                .to_string(),
        ]
    }
}

// ===========================================================================
// analyze / optimize / simulate
// ===========================================================================

fn analyze(r: &Resolved, out_dir: &Path) -> Result<()> {
    let pop = r.base_popularity()?;
    let realized = realize_policy(&r.policy, &pop, &r.network)?;
    let (body, q, exact) = match &realized.policy {
        CachePolicy::Distribution(d) => {
            let rep = success_prob(d, &pop, &r.network)?;
            (rep.to_csv(), rep.q, true)
        }
        other => {
            let ev = policy_success_prob(other, &pop, &r.network)?;
            let mut body = String::from("file,a_n,T_n,q_n\n");
            writeln!(body, "all,1,{},{}", r.network.cache_size, ev.q)?;
            (body, ev.q, ev.exact)
        }
    };
    let path = csv_at(&stem(out_dir, &r.output, "analyze"), "");
    write_csv(&path, &header_for(r, approx_note(exact)), &body)?;
    println!(
        "analyze[{}]: q = {q:.6}{}",
        r.policy.kind.name(),
        if exact { "" } else { " (approximate)" }
    );
    if !realized.note.is_empty() {
        println!("  design: {} ({:.3}s)", realized.note, realized.seconds);
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn optimize(r: &Resolved, out_dir: &Path) -> Result<()> {
    let pop = r.base_popularity()?;
    let realized = realize_policy(&r.policy, &pop, &r.network)?;
    let CachePolicy::Distribution(dist) = &realized.policy else {
        bail!("optimization did not produce a distribution");
    };
    let rep = success_prob(dist, &pop, &r.network)?;
    let base = stem(out_dir, &r.output, "optimize");
    let csv = csv_at(&base, "");
    let dist_path = PathBuf::from(format!("{}_distribution.txt", base.display()));
    write_csv(&csv, &header_for(r, vec![]), &rep.to_csv())?;
    write_atomic(&dist_path, &dist.to_text())?;
    println!(
        "optimize[{}]: q = {:.6} in {:.3}s  ({})",
        r.policy.kind.name(),
        rep.q,
        realized.seconds,
        realized.note
    );
    println!("wrote {} and {}", csv.display(), dist_path.display());
    Ok(())
}

fn simulate(r: &Resolved, out_dir: &Path) -> Result<()> {
    let pop = r.base_popularity()?;
    let realized = realize_policy(&r.policy, &pop, &r.network)?;
    let mc = monte_carlo(&realized.policy, &pop, &r.network, &r.sim)?;

    // The analytical reference: per-file success when the request is pinned,
    // otherwise the overall success probability.
    let (q_an, exact) = match r.sim.pinned_request {
        None => {
            let ev = policy_success_prob(&realized.policy, &pop, &r.network)?;
            (Some(ev.q), ev.exact)
        }
        Some(f) => match &realized.policy {
            CachePolicy::Distribution(d) => {
                let rep = success_prob(d, &pop, &r.network)?;
                (Some(rep.per_file[f as usize]), true)
            }
            _ => (None, true),
        },
    };

    let mut body = String::from(
        "policy,q_analytical,analytical_exact,q_mc,ci95_mc,effective_share,\
         q_mc_unicast,ci95_mc_unicast\n",
    );
    writeln!(
        body,
        "{},{},{},{},{},{},{},{}",
        realized.policy.label(),
        opt_cell(q_an),
        exact,
        mc.q,
        mc.ci_halfwidth,
        mc.effective as f64 / mc.realizations as f64,
        opt_cell(mc.q_unicast),
        opt_cell(mc.ci_unicast_halfwidth),
    )?;
    let path = csv_at(&stem(out_dir, &r.output, "simulate"), "");
    write_csv(&path, &header_for(r, approx_note(exact)), &body)?;
    match q_an {
        Some(q) => println!(
            "simulate[{}]: q_mc = {:.4} ± {:.4} vs analytical {q:.4} ({} realizations)",
            realized.policy.label(),
            mc.q,
            mc.ci_halfwidth,
            mc.realizations
        ),
        None => println!(
            "simulate[{}]: q_mc = {:.4} ± {:.4} ({} realizations)",
            realized.policy.label(),
            mc.q,
            mc.ci_halfwidth,
            mc.realizations
        ),
    }
    println!("wrote {}", path.display());
    Ok(())
}

// ===========================================================================
// Sweeps
// ===========================================================================

/// One network parameter varied over a grid; rows ready for a CSV body.
pub struct SweepTable {
    pub header: String,
    pub body: String,
}

/// Evaluates the primary policy (and optionally the reference baselines)
/// analytically and by Monte Carlo at every grid point.
///
/// Optimization-backed policies are re-designed at each point, so sweeps
/// over the cache size or the popularity law remain meaningful. The same
/// seed drives the Monte Carlo at every point (common random numbers),
/// which sharpens comparisons along the grid.
#[allow(clippy::too_many_arguments)]
pub fn sweep_table(
    param: SweepParam,
    values: &[f64],
    base: &NetworkConfig,
    pop_spec: &PopularitySpec,
    primary: &PolicyChoice,
    include_baselines: bool,
    sim: &SimConfig,
    tag: &str,
) -> Result<SweepTable> {
    let mut labels: Vec<&'static str> = vec![primary.kind.name()];
    let mut baseline_policies: Vec<CachePolicy> = Vec::new();
    if include_baselines {
        for id in [
            BaselineId::MostPopular,
            BaselineId::PopularitySampled,
            BaselineId::UniformRandom,
        ] {
            let p = baseline(id);
            if p.label() != labels[0] {
                labels.push(p.label());
                baseline_policies.push(p);
            }
        }
    }

    let mut header = String::from(param.name());
    for l in &labels {
        write!(header, ",q_{l},q_{l}_mc,ci95_{l}")?;
        if sim.measure_unicast {
            write!(header, ",q_{l}_mc_unicast,ci95_{l}_unicast")?;
        }
    }
    header.push('\n');

    let mut body = String::new();
    for &x in values {
        let (cfg, pop) = apply_param(param, x, base, pop_spec)?;
        let realized = realize_policy(primary, &pop, &cfg)?;
        let mut policies: Vec<(&str, &CachePolicy)> = vec![(labels[0], &realized.policy)];
        for (i, p) in baseline_policies.iter().enumerate() {
            policies.push((labels[i + 1], p));
        }
        write!(body, "{x}")?;
        for (label, policy) in policies {
            let an = policy_success_prob(policy, &pop, &cfg)?;
            let mc = monte_carlo(policy, &pop, &cfg, sim)?;
            write!(body, ",{},{},{}", an.q, mc.q, mc.ci_halfwidth)?;
            if sim.measure_unicast {
                write!(
                    body,
                    ",{},{}",
                    opt_cell(mc.q_unicast),
                    opt_cell(mc.ci_unicast_halfwidth)
                )?;
            }
            println!(
                "{tag}{}={x} {label}: q={:.4}{} mc={:.4}±{:.4}",
                param.name(),
                an.q,
                if an.exact { "" } else { "~" },
                mc.q,
                mc.ci_halfwidth
            );
        }
        body.push('\n');
    }
    Ok(SweepTable { header, body })
}

/// Applies one grid value to the base configuration and rebuilds the
/// popularity law for it.
pub fn apply_param(
    param: SweepParam,
    x: f64,
    base: &NetworkConfig,
    pop_spec: &PopularitySpec,
) -> Result<(NetworkConfig, Popularity)> {
    let mut cfg = base.clone();
    let mut gamma_override = None;
    match param {
        SweepParam::SnrDb => cfg.snr = Snr::from_db(x),
        SweepParam::BsDensity => cfg.bs_density = x,
        SweepParam::UserDensity => cfg.user_density = x,
        SweepParam::CacheSize => cfg.cache_size = x as usize,
        SweepParam::CatalogSize => cfg.catalog_size = x as usize,
        SweepParam::ZipfGamma => gamma_override = Some(x),
        SweepParam::TargetRate => cfg.target_rate_bps = x,
        SweepParam::Bandwidth => cfg.bandwidth_hz = x,
        SweepParam::PathLossExponent => cfg.path_loss_exp = x,
    }
    cfg.validate()?;
    let pop = match gamma_override {
        Some(g) => Popularity::zipf(cfg.catalog_size, g)?,
        None => pop_spec.build(cfg.catalog_size)?,
    };
    Ok((cfg, pop))
}

fn sweep(r: &Resolved, out_dir: &Path) -> Result<()> {
    let sw = r
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow!("sweep mode without a sweep section"))?;
    let table = sweep_table(
        sw.parameter,
        &sw.values,
        &r.network,
        &r.popularity,
        &r.policy,
        sw.include_baselines,
        &r.sim,
        "",
    )?;
    let path = csv_at(&stem(out_dir, &r.output, "sweep"), "");
    let grid = format!(
        "grid: {} = {:?}",
        sw.parameter.name(),
        sw.values
    );
    write_csv(
        &path,
        &header_for(r, vec![grid]),
        &format!("{}{}", table.header, table.body),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}
