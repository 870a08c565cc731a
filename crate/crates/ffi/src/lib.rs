//! C ABI for the planning toolkit.
//!
//! The surface is coarse-grained: open a run from a TOML configuration,
//! derive the candidate graph, fit trends, solve a model, and read the
//! results back as JSON strings. Handles are opaque; every call returns a
//! status code and failures leave a message retrievable with
//! [`co2net_last_error`]. Strings returned by the library are owned by the
//! caller and must be released with [`co2net_string_free`].

use co2net::config::LoadedConfig;
use co2net::engine::{BestCosts, EngineError, PlanSolution, Planner, PlanningInstance};
use co2net::graph::{build_candidate_graph, CandidateGraph};
use co2net::layers::compose_raster;
use co2net::milp::adapter::SolveStatus;
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Outcome of an API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Co2netStatus {
    Ok = 0,
    /// A pointer argument was null or otherwise unusable.
    Usage = 1,
    /// The configuration or an input document failed validation.
    Validation = 3,
    /// A file could not be read.
    Io = 4,
    /// The requested model is infeasible.
    Infeasible = 5,
    /// The solver budget ran out without a usable incumbent.
    SolverLimit = 6,
    /// An internal error; details via `co2net_last_error`.
    Internal = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// An opened run: the parsed configuration plus lazily built state.
pub struct Co2netRun {
    loaded: LoadedConfig,
    graph: Option<CandidateGraph>,
    best: Option<BestCosts>,
}

impl Co2netRun {
    fn graph(&mut self) -> Result<&CandidateGraph, Co2netStatus> {
        if self.graph.is_none() {
            let layers = self.loaded.resolved_layers().map_err(|e| {
                set_error(e.to_string());
                Co2netStatus::Validation
            })?;
            let raster = compose_raster(&layers, &self.loaded.config.grid).map_err(|e| {
                set_error(e.to_string());
                Co2netStatus::Validation
            })?;
            let graph =
                build_candidate_graph(&raster, &self.loaded.config.nodes).map_err(|e| {
                    set_error(e.to_string());
                    Co2netStatus::Validation
                })?;
            self.graph = Some(graph);
        }
        Ok(self.graph.as_ref().unwrap())
    }

    fn instance(&mut self) -> Result<PlanningInstance, Co2netStatus> {
        let graph = self.graph()?.clone();
        self.loaded.config.instance(graph).map_err(|e| {
            set_error(e.to_string());
            Co2netStatus::Validation
        })
    }
}

fn engine_status(e: &EngineError) -> Co2netStatus {
    match e {
        EngineError::Infeasible { .. } | EngineError::RecourseInfeasible { .. } => {
            Co2netStatus::Infeasible
        }
        EngineError::NoIncumbent => Co2netStatus::SolverLimit,
        _ => Co2netStatus::Validation,
    }
}

fn plan_status(plan: &PlanSolution) -> Co2netStatus {
    match plan.status {
        SolveStatus::TimeLimit | SolveStatus::Feasible => Co2netStatus::SolverLimit,
        _ => Co2netStatus::Ok,
    }
}

fn write_string(out: *mut *mut c_char, text: String) -> Co2netStatus {
    let Ok(cstring) = CString::new(text) else {
        set_error("output contained an interior NUL".into());
        return Co2netStatus::Internal;
    };
    unsafe { *out = cstring.into_raw() };
    Co2netStatus::Ok
}

fn guarded(f: impl FnOnce() -> Co2netStatus) -> Co2netStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".into());
            Co2netStatus::Internal
        }
    }
}

/// ABI revision of this header.
#[no_mangle]
pub extern "C" fn co2net_abi_version() -> u32 {
    1
}

/// Returns and clears the last error message, or null when none is pending.
/// The caller owns the string.
#[no_mangle]
pub extern "C" fn co2net_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow_mut()
            .take()
            .map_or(std::ptr::null_mut(), CString::into_raw)
    })
}

/// Releases a string returned by this library. Null is ignored.
#[no_mangle]
pub extern "C" fn co2net_string_free(s: *mut c_char) {
    if !s.is_null() {
        unsafe {
            drop(CString::from_raw(s));
        }
    }
}

/// Opens a run from a TOML configuration file. On success `*out` owns the
/// handle, to be released with [`co2net_run_close`].
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string and `out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn co2net_run_open(
    config_path: *const c_char,
    out: *mut *mut Co2netRun,
) -> Co2netStatus {
    guarded(|| {
        clear_error();
        if config_path.is_null() || out.is_null() {
            set_error("null argument".into());
            return Co2netStatus::Usage;
        }
        let path = match unsafe { CStr::from_ptr(config_path) }.to_str() {
            Ok(path) => path,
            Err(_) => {
                set_error("config path is not valid UTF-8".into());
                return Co2netStatus::Usage;
            }
        };
        match LoadedConfig::from_path(Path::new(path)) {
            Ok(loaded) => {
                let run = Box::new(Co2netRun {
                    loaded,
                    graph: None,
                    best: None,
                });
                unsafe { *out = Box::into_raw(run) };
                Co2netStatus::Ok
            }
            Err(e) => {
                let status = match &e {
                    co2net::config::ConfigError::Io { .. } => Co2netStatus::Io,
                    _ => Co2netStatus::Validation,
                };
                set_error(e.to_string());
                status
            }
        }
    })
}

/// Releases a run handle. Null is ignored.
///
/// # Safety
/// `run` must have come from [`co2net_run_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn co2net_run_close(run: *mut Co2netRun) {
    if !run.is_null() {
        unsafe {
            drop(Box::from_raw(run));
        }
    }
}

/// Hex SHA-256 of the loaded configuration bytes.
///
/// # Safety
/// `run` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn co2net_config_hash(
    run: *mut Co2netRun,
    out: *mut *mut c_char,
) -> Co2netStatus {
    guarded(|| {
        clear_error();
        let Some(run) = (unsafe { run.as_mut() }) else {
            set_error("null handle".into());
            return Co2netStatus::Usage;
        };
        if out.is_null() {
            set_error("null output pointer".into());
            return Co2netStatus::Usage;
        }
        write_string(out, run.loaded.hash.clone())
    })
}

/// Builds (or returns the cached) candidate graph as a JSON document with
/// nodes, per-scenario demands and arcs.
///
/// # Safety
/// `run` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn co2net_build_graph(
    run: *mut Co2netRun,
    out: *mut *mut c_char,
) -> Co2netStatus {
    guarded(|| {
        clear_error();
        let Some(run) = (unsafe { run.as_mut() }) else {
            set_error("null handle".into());
            return Co2netStatus::Usage;
        };
        if out.is_null() {
            set_error("null output pointer".into());
            return Co2netStatus::Usage;
        }
        let hash = run.loaded.hash.clone();
        let scenarios = run.loaded.config.scenario_set();
        let graph = match run.graph() {
            Ok(graph) => graph,
            Err(status) => return status,
        };
        let doc = graph.to_document(Some(&scenarios), Some(hash));
        match serde_json::to_string_pretty(&doc) {
            Ok(text) => write_string(out, text),
            Err(e) => {
                set_error(e.to_string());
                Co2netStatus::Internal
            }
        }
    })
}

/// The piecewise-linear trend table (pinned or fitted) as JSON.
///
/// # Safety
/// `run` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn co2net_fit_trends(
    run: *mut Co2netRun,
    out: *mut *mut c_char,
) -> Co2netStatus {
    guarded(|| {
        clear_error();
        let Some(run) = (unsafe { run.as_mut() }) else {
            set_error("null handle".into());
            return Co2netStatus::Usage;
        };
        if out.is_null() {
            set_error("null output pointer".into());
            return Co2netStatus::Usage;
        }
        match run.loaded.config.trend_table() {
            Ok(trends) => match serde_json::to_string_pretty(&trends) {
                Ok(text) => write_string(out, text),
                Err(e) => {
                    set_error(e.to_string());
                    Co2netStatus::Internal
                }
            },
            Err(e) => {
                set_error(e.to_string());
                Co2netStatus::Validation
            }
        }
    })
}

fn solve_inner(
    run: &mut Co2netRun,
    model: &str,
    scenario: Option<&str>,
) -> Result<PlanSolution, Co2netStatus> {
    let instance = run.instance()?;
    let planner = Planner::new(
        &instance,
        run.loaded.config.solver_backend(),
        run.loaded.config.solve_options(),
    );
    let default_scenario = instance.scenarios.initial.clone();
    let scenario = scenario.unwrap_or(&default_scenario);
    let result = match model {
        "m1" => planner.solve_m1(scenario),
        "m2" => planner.solve_m2(scenario),
        "regret" => {
            if run.best.is_none() {
                run.best = Some(planner.best_costs().map_err(|e| {
                    set_error(e.to_string());
                    engine_status(&e)
                })?);
            }
            planner.solve_min_max_regret(run.best.as_ref().unwrap())
        }
        other => {
            set_error(format!("unknown model {other} (m1, m2, regret)"));
            return Err(Co2netStatus::Usage);
        }
    };
    let mut plan = result.map_err(|e| {
        set_error(e.to_string());
        engine_status(&e)
    })?;
    plan.config_hash = Some(run.loaded.hash.clone());
    Ok(plan)
}

/// Solves `model` ("m1", "m2" or "regret") and returns the plan as JSON.
/// `scenario` may be null; m1/m2 then use the initial scenario and the
/// regret model always spans all scenarios. A solver that stops on its
/// budget still writes the incumbent but returns `SOLVER_LIMIT`.
///
/// # Safety
/// `run` must be a live handle; `model` a valid NUL-terminated string;
/// `scenario` null or valid; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn co2net_solve(
    run: *mut Co2netRun,
    model: *const c_char,
    scenario: *const c_char,
    out: *mut *mut c_char,
) -> Co2netStatus {
    guarded(|| {
        clear_error();
        let Some(run) = (unsafe { run.as_mut() }) else {
            set_error("null handle".into());
            return Co2netStatus::Usage;
        };
        if model.is_null() || out.is_null() {
            set_error("null argument".into());
            return Co2netStatus::Usage;
        }
        let Ok(model) = (unsafe { CStr::from_ptr(model) }).to_str() else {
            set_error("model is not valid UTF-8".into());
            return Co2netStatus::Usage;
        };
        let scenario = if scenario.is_null() {
            None
        } else {
            match unsafe { CStr::from_ptr(scenario) }.to_str() {
                Ok(s) => Some(s),
                Err(_) => {
                    set_error("scenario is not valid UTF-8".into());
                    return Co2netStatus::Usage;
                }
            }
        };
        match solve_inner(run, model, scenario) {
            Ok(plan) => {
                let budget = plan_status(&plan);
                match serde_json::to_string_pretty(&plan) {
                    Ok(text) => {
                        let wrote = write_string(out, text);
                        if wrote != Co2netStatus::Ok {
                            wrote
                        } else {
                            budget
                        }
                    }
                    Err(e) => {
                        set_error(e.to_string());
                        Co2netStatus::Internal
                    }
                }
            }
            Err(status) => status,
        }
    })
}

/// Solves every model and returns the comparison report as JSON:
/// per-scenario totals for m1/m2/regret plus potential, regret, benefit and
/// the system regret.
///
/// # Safety
/// `run` must be a live handle, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn co2net_report(
    run: *mut Co2netRun,
    out: *mut *mut c_char,
) -> Co2netStatus {
    guarded(|| {
        clear_error();
        let Some(run) = (unsafe { run.as_mut() }) else {
            set_error("null handle".into());
            return Co2netStatus::Usage;
        };
        if out.is_null() {
            set_error("null output pointer".into());
            return Co2netStatus::Usage;
        }
        let instance = match run.instance() {
            Ok(instance) => instance,
            Err(status) => return status,
        };
        let planner = Planner::new(
            &instance,
            run.loaded.config.solver_backend(),
            run.loaded.config.solve_options(),
        );
        let best = match planner.best_costs() {
            Ok(best) => best,
            Err(e) => {
                set_error(e.to_string());
                return engine_status(&e);
            }
        };
        let ids: Vec<String> = instance.scenarios.ids().map(str::to_string).collect();
        let mut totals: Vec<(String, f64, f64, f64)> = Vec::new();
        let regret_plan = match planner.solve_min_max_regret(&best) {
            Ok(plan) => plan,
            Err(e) => {
                set_error(e.to_string());
                return engine_status(&e);
            }
        };
        for id in &ids {
            let m2 = match planner.solve_m2(id) {
                Ok(plan) => plan,
                Err(e) => {
                    set_error(e.to_string());
                    return engine_status(&e);
                }
            };
            totals.push((
                id.clone(),
                best.totals_eur[id],
                m2.objective_eur,
                regret_plan.scenarios[id].breakdown.total,
            ));
        }
        let report = co2net::economics::regret_report(&totals);
        let doc = serde_json::json!({
            "config_hash": run.loaded.hash,
            "totals_eur": totals
                .iter()
                .map(|(id, m1, m2, r)| {
                    serde_json::json!({ "scenario": id, "z_m1": m1, "z_m2": m2, "z_regret": r })
                })
                .collect::<Vec<_>>(),
            "report": report,
            "system_regret_eur": report.system_regret,
        });
        match serde_json::to_string_pretty(&doc) {
            Ok(text) => write_string(out, text),
            Err(e) => {
                set_error(e.to_string());
                Co2netStatus::Internal
            }
        }
    })
}
