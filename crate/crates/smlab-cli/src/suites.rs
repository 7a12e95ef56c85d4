//! Named suites driven by `[suite.<name>]` sections.

use std::path::Path;

use num_complex::Complex64;
use smlab::calculus::{Extension, MultiplierFunction};
use smlab::estimates::*;
use smlab::operators::PotentialSpec;

use crate::build::OperatorPool;
use crate::config::{Config, Section};
use crate::CliError;

fn cfg_err(s: &Section, key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("line {}: [{}] {key}: {msg}", s.line_of(key), s.name))
}

/// Multiplier named by `function` (with its parameters) in a suite section.
fn multiplier(s: &Section) -> Result<MultiplierFunction, CliError> {
    Ok(match s.str("function")? {
        "bochner_riesz" => MultiplierFunction::bochner_riesz(s.f64("delta")?),
        "bochner_riesz_even" => MultiplierFunction::BochnerRiesz { delta: s.f64("delta")?, extension: Extension::Even },
        "zero" => MultiplierFunction::Zero,
        "bump" => MultiplierFunction::Bump { center: s.f64("center")?, width: s.f64("width")? },
        "f_a" => MultiplierFunction::Fa { a: s.f64("a")? },
        "gaussian" => MultiplierFunction::Gaussian,
        other => return Err(cfg_err(s, "function", format!("unknown function '{other}'"))),
    })
}

fn indices(s: &Section, key: &str, n: usize) -> Result<Option<Vec<usize>>, CliError> {
    let Some(v) = s.list_opt(key)? else { return Ok(None) };
    v.iter()
        .map(|&x| {
            if x < 0.0 || x.fract() != 0.0 || x as usize >= n {
                Err(cfg_err(s, key, format!("{x} is not a point index below {n}")))
            } else {
                Ok(x as usize)
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

/// Keys accepted by each suite besides `space` and `tol.*`.
fn keys(name: &str) -> Option<&'static [&'static str]> {
    Some(match name {
        "rsk" => &["sigma", "t_grid", "window", "kappa_predicted"],
        "heat2inf" => &["t_grid", "window", "kappa_predicted", "kappa_rsk", "compare_rsk"],
        "ondiag" => &["t_grid", "n", "m", "small_window", "large_window"],
        "wave" => &["xi_grid", "t_grid", "sigma", "kappa", "t_window", "doubling_dim"],
        "multiplier" => &["function", "delta", "center", "width", "a", "s", "t_grid", "kappa", "second_space", "dyadic_ell_max"],
        "resolvent_sector" => &["radii", "angles", "sigma", "kappa", "second_space"],
        "spectrum_probe" => &["rho", "gap", "sigma", "kappa", "eps"],
        "schrodinger" => &["t_grid", "alpha", "n", "window", "subcritical_eps", "resonance_window"],
        "dg" => &["t_grid", "centers", "ball_radius", "gaps", "speed", "n1", "n2", "volume_crossover"],
        "locality" => &["function", "a", "r_grid", "slack", "speed"],
        "subordination" => &["a_values", "xi_grid", "quad_tol", "envelope_window"],
        _ => return None,
    })
}

/// Runs `[suite.<name>]`. `out` is consulted for earlier reports (`compare_rsk`).
pub fn run_suite(cfg: &Config, name: &str, pool: &mut OperatorPool, out: &Path) -> Result<SuiteReport, CliError> {
    let allowed = keys(name).ok_or_else(|| {
        CliError::Config(format!("unknown suite '{name}'; expected one of {}", SUITE_NAMES.join(", ")))
    })?;
    let s = cfg.require(&format!("suite.{name}"))?;
    let mut all: Vec<&str> = allowed.to_vec();
    all.extend(["space", "tol.*"]);
    s.allow(&all)?;
    let space_name = s.str_opt("space").unwrap_or("space");

    if name == "subordination" {
        let opts = SubordinationOptions {
            quad_tol: s.f64_or("quad_tol", 1e-9)?,
            residual_tol: s.tol("residual", 1e-6)?,
            envelope_window: match s.str_opt("envelope_window") {
                Some("none") => None,
                _ => s.window_opt("envelope_window")?.or(Some((20.0, 200.0))),
            },
            envelope_tol: s.tol("envelope", 0.05)?,
        };
        return Ok(suite_subordination(&s.list("a_values")?, &s.list("xi_grid")?, &opts)?);
    }

    let built = pool.get(space_name)?;
    let op = &built.op;
    let report = match name {
        "rsk" => suite_rsk(
            op,
            s.f64("sigma")?,
            &s.grid("t_grid")?,
            &RskOptions {
                window: s.window_opt("window")?,
                kappa_predicted: s.f64_or("kappa_predicted", 0.0)?,
                kappa_tol: s.tol("kappa", 0.15)?,
            },
        )?,
        "heat2inf" => {
            let mut kappa_rsk = s.f64_opt("kappa_rsk")?;
            if s.bool_or("compare_rsk", false)? && kappa_rsk.is_none() {
                let p = out.join("rsk.json");
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| cfg_err(s, "compare_rsk", format!("needs {} from an earlier rsk run: {e}", p.display())))?;
                let r = SuiteReport::from_json(&text)?;
                kappa_rsk = r.fits.get("kappa").map(|f| f.slope);
            }
            suite_heat2inf(
                op,
                &s.grid("t_grid")?,
                &Heat2InfOptions {
                    window: s.window_opt("window")?,
                    kappa_predicted: s.f64_or("kappa_predicted", 0.0)?,
                    kappa_tol: s.tol("kappa", 0.15)?,
                    kappa_rsk,
                    agreement_tol: s.tol("agreement", 0.15)?,
                },
            )?
        }
        "ondiag" => {
            let d = OndiagOptions::default();
            let large = match s.str_opt("large_window") {
                Some("none") => None,
                _ => s.window_opt("large_window")?.or(d.large_window),
            };
            suite_ondiag(
                op,
                &s.grid("t_grid")?,
                s.usize("n")?,
                s.usize("m")?,
                &OndiagOptions {
                    small_window: s.window_opt("small_window")?.unwrap_or(d.small_window),
                    large_window: large,
                    slope_tol: s.tol("slope", d.slope_tol)?,
                },
            )?
        }
        "wave" => suite_wave(
            op,
            &s.list("xi_grid")?,
            &s.grid("t_grid")?,
            s.f64("sigma")?,
            s.f64("kappa")?,
            &WaveOptions {
                t_window: s.window_opt("t_window")?,
                xi_tol: s.tol("xi_growth", 0.25)?,
                kappa_tol: s.tol("t_growth", 0.15)?,
                doubling_dim: s.f64_opt("doubling_dim")?,
            },
        )?,
        "multiplier" => {
            let f = multiplier(s)?;
            let second = s.str_opt("second_space").map(|n| pool.get(n)).transpose()?;
            let mut ops = vec![op];
            if let Some(b) = &second {
                ops.push(&b.op);
            }
            suite_multiplier(
                &ops,
                &f,
                s.f64("s")?,
                &s.grid("t_grid")?,
                s.f64_or("kappa", 0.0)?,
                &MultiplierOptions {
                    stability_tol: s.tol("stability", 0.25)?,
                    dyadic_ell_max: s.usize_opt("dyadic_ell_max")?.map(|v| v as u32),
                },
            )?
        }
        "resolvent_sector" => {
            let second = s.str_opt("second_space").map(|n| pool.get(n)).transpose()?;
            let mut ops = vec![op];
            if let Some(b) = &second {
                ops.push(&b.op);
            }
            let mut z = Vec::new();
            for &r in &s.grid("radii")? {
                for &th in &s.list("angles")? {
                    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&th) {
                        return Err(cfg_err(s, "angles", "angles must lie in [0, π/2)"));
                    }
                    z.push(Complex64::from_polar(r, th));
                }
            }
            suite_resolvent_sector(
                &ops,
                &z,
                s.f64("sigma")?,
                s.f64_or("kappa", 0.0)?,
                &SectorOptions { slope_tol: s.tol("slope", 0.5)?, stability_tol: s.tol("stability", 0.25)? },
            )?
        }
        "spectrum_probe" => {
            let d = ProbeOptions::default();
            suite_spectrum_probe(
                op,
                s.f64("rho")?,
                s.f64("gap")?,
                &ProbeOptions {
                    sigma: s.f64_or("sigma", d.sigma)?,
                    kappa: s.f64_or("kappa", d.kappa)?,
                    eps: s.f64_or("eps", d.eps)?,
                    psi_tol: s.tol("psi", d.psi_tol)?,
                },
            )?
        }
        "schrodinger" => {
            let n = match s.usize_opt("n")? {
                Some(n) => n,
                None => op.space().lattice().map(|l| l.shape.len()).ok_or_else(|| cfg_err(s, "n", "needed off lattices"))?,
            };
            let alpha = match s.f64_opt("alpha")? {
                Some(a) => a,
                None => built.spec.map(|p| PotentialSpec::resonance_index(n, p.c)).unwrap_or(0.0),
            };
            let d = SchrodingerOptions::default();
            let eps = match s.str_opt("subcritical_eps") {
                Some("none") => None,
                _ if built.spec.is_none() => None,
                _ => Some(s.f64_or("subcritical_eps", 0.1)?),
            };
            suite_schrodinger(
                op,
                &s.grid("t_grid")?,
                alpha,
                n,
                &SchrodingerOptions {
                    window: s.window_opt("window")?,
                    exponent_tol: s.tol("exponent", d.exponent_tol)?,
                    residual_tol: s.tol("residual", d.residual_tol)?,
                    subcritical_eps: eps,
                    resonance_window: s.window_opt("resonance_window")?,
                },
            )?
        }
        "dg" => {
            let n = op.len();
            let centers = indices(s, "centers", n)?.unwrap_or_else(|| vec![0, n / 2, n - 1]);
            let pairs = pair_schedule(op.space(), &centers, s.f64_or("ball_radius", 1.0)?, &s.grid("gaps")?)?;
            let d = DgOptions::default();
            suite_dg_decay(
                op,
                &s.grid("t_grid")?,
                &pairs,
                &DgOptions {
                    speed: s.f64_opt("speed")?,
                    n1: s.f64_or("n1", 0.0)?,
                    n2: s.f64_or("n2", 0.0)?,
                    rate_floor: s.tol("rate_floor", d.rate_floor)?,
                    prefactor_tol: s.tol("prefactor", d.prefactor_tol)?,
                    volume_crossover: s.f64_opt("volume_crossover")?,
                    ..d
                },
            )?
        }
        "locality" => {
            let f = match s.str_opt("function") {
                None => MultiplierFunction::Fa { a: s.f64_or("a", 2.0)? },
                Some(_) => multiplier(s)?,
            };
            let d = LocalityOptions::default();
            suite_locality(
                op,
                &f,
                &s.grid("r_grid")?,
                &LocalityOptions {
                    speed: s.f64_opt("speed")?,
                    slack: s.f64_or("slack", d.slack)?,
                    leak_tol: s.tol("leak", d.leak_tol)?,
                    ..d
                },
            )?
        }
        _ => unreachable!("suite names are checked above"),
    };
    Ok(report)
}
