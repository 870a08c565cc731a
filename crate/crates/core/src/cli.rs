//! Command-line workflow: rasterize, route, fit trends, solve, report,
//! export — all driven by one TOML configuration.
//!
//! Exit codes: 0 success, 2 usage (clap), 3 validation, 4 I/O,
//! 5 infeasible, 6 solver budget exhausted.

use crate::config::{ConfigError, LoadedConfig};
use crate::engine::{BestCosts, EngineError, PlanSolution, Planner, PlanningInstance};
use crate::export::{solution_breakdown_csv, solution_geojson};
use crate::graph::{build_candidate_graph, CandidateGraph, GraphDocument, GraphError};
use crate::layers::compose_raster;
use crate::milp::adapter::SolveStatus;
use crate::milp::bnb::BranchBoundSolver;
use crate::raster::RasterMap;
use crate::report::{regret_report_csv, render_tables, system_costs_csv};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_INFEASIBLE: i32 = 5;
pub const EXIT_SOLVER_LIMIT: i32 = 6;

#[derive(Parser)]
#[command(
    name = "co2net",
    about = "Plan CO2 pipeline networks: raster routing, cost trends and \
             regret-minimizing network design",
    version
)]
struct Cli {
    /// Path to the run configuration (TOML).
    #[arg(short, long, global = true, default_value = "co2net.toml")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compose the penalty raster and derive the candidate graph.
    Route,
    /// Fit the piecewise-linear cost trends and pin them to a file.
    FitTrends,
    /// Solve an optimization model over the candidate graph.
    Solve {
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Restrict m1/m2 to one scenario (default: every scenario).
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Export a solved plan as GeoJSON or a cost-breakdown CSV.
    Export {
        /// Path to a solution document written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, value_enum)]
        format: FormatArg,
    },
    /// Solve every model and print the comparison tables.
    Report,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    M1,
    M2,
    Regret,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Geojson,
    Csv,
}

/// Errors paired with their exit code.
#[derive(Debug)]
struct CliFailure {
    code: i32,
    message: String,
}

impl CliFailure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliFailure {
    fn from(e: ConfigError) -> Self {
        let code = match &e {
            ConfigError::Io { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        CliFailure::new(code, e.to_string())
    }
}

impl From<GraphError> for CliFailure {
    fn from(e: GraphError) -> Self {
        CliFailure::new(EXIT_VALIDATION, e.to_string())
    }
}

impl From<EngineError> for CliFailure {
    fn from(e: EngineError) -> Self {
        let code = match &e {
            EngineError::Infeasible { .. } | EngineError::RecourseInfeasible { .. } => {
                EXIT_INFEASIBLE
            }
            EngineError::NoIncumbent => EXIT_SOLVER_LIMIT,
            _ => EXIT_VALIDATION,
        };
        CliFailure::new(code, e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> CliFailure {
    CliFailure::new(EXIT_IO, format!("{}: {e}", path.display()))
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Clap renders its own message; keep its exit code semantics
            // (0 for --help/--version, 2 for usage errors).
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliFailure> {
    let workspace = Workspace::load(&cli.config)?;
    match &cli.command {
        Command::Route => workspace.cmd_route(),
        Command::FitTrends => workspace.cmd_fit_trends(),
        Command::Solve { model, scenario } => workspace.cmd_solve(*model, scenario.as_deref()),
        Command::Export { solution, format } => workspace.cmd_export(solution, *format),
        Command::Report => workspace.cmd_report(),
    }
}

/// Serialized alongside each cached artifact so stale caches are rebuilt.
#[derive(Serialize, Deserialize)]
struct CachedBest {
    config_hash: String,
    best: BestCosts,
}

struct Workspace {
    loaded: LoadedConfig,
    out_dir: PathBuf,
}

impl Workspace {
    fn load(config_path: &Path) -> Result<Self, CliFailure> {
        let loaded = LoadedConfig::from_path(config_path)?;
        let dir = &loaded.config.output.dir;
        let out_dir = if dir.is_absolute() {
            dir.clone()
        } else {
            loaded.base_dir.join(dir)
        };
        Ok(Self { loaded, out_dir })
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliFailure> {
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| io_failure(&self.out_dir, e))?;
        let path = self.out_path(name);
        std::fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliFailure> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliFailure::new(EXIT_IO, e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    fn raster(&self) -> Result<RasterMap, CliFailure> {
        let layers = self.loaded.resolved_layers()?;
        Ok(compose_raster(&layers, &self.loaded.config.grid)
            .map_err(ConfigError::from)?)
    }

    fn build_graph(&self) -> Result<CandidateGraph, CliFailure> {
        let raster = self.raster()?;
        Ok(build_candidate_graph(&raster, &self.loaded.config.nodes)?)
    }

    /// The candidate graph, from the cache when its provenance hash still
    /// matches, otherwise rebuilt and persisted.
    fn graph(&self) -> Result<CandidateGraph, CliFailure> {
        let path = self.out_path("graph.json");
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(doc) = serde_json::from_str::<GraphDocument>(&text) {
                if doc.config_hash.as_deref() == Some(self.loaded.hash.as_str()) {
                    return Ok(CandidateGraph::from_document(&doc)?);
                }
            }
        }
        let graph = self.build_graph()?;
        let doc = graph.to_document(
            Some(&self.loaded.config.scenario_set()),
            Some(self.loaded.hash.clone()),
        );
        self.write_json("graph.json", &doc)?;
        Ok(graph)
    }

    fn instance(&self) -> Result<PlanningInstance, CliFailure> {
        let graph = self.graph()?;
        Ok(self.loaded.config.instance(graph)?)
    }

    fn planner<'a>(
        &self,
        instance: &'a PlanningInstance,
    ) -> Planner<'a, BranchBoundSolver> {
        Planner::new(
            instance,
            self.loaded.config.solver_backend(),
            self.loaded.config.solve_options(),
        )
    }

    /// Perfect-information baselines, cached beside the run.
    fn best_costs(&self, instance: &PlanningInstance) -> Result<BestCosts, CliFailure> {
        let path = self.out_path("best_costs.json");
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(cached) = serde_json::from_str::<CachedBest>(&text) {
                if cached.config_hash == self.loaded.hash {
                    return Ok(cached.best);
                }
            }
        }
        let best = self.planner(instance).best_costs()?;
        self.write_json(
            "best_costs.json",
            &CachedBest {
                config_hash: self.loaded.hash.clone(),
                best: best.clone(),
            },
        )?;
        Ok(best)
    }

    fn load_solution(&self, name: &str) -> Option<PlanSolution> {
        let text = std::fs::read_to_string(self.out_path(name)).ok()?;
        let plan: PlanSolution = serde_json::from_str(&text).ok()?;
        (plan.config_hash.as_deref() == Some(self.loaded.hash.as_str())).then_some(plan)
    }

    fn store_solution(&self, name: &str, plan: &mut PlanSolution) -> Result<(), CliFailure> {
        plan.config_hash = Some(self.loaded.hash.clone());
        self.write_json(name, plan)?;
        Ok(())
    }

    fn cmd_route(&self) -> Result<i32, CliFailure> {
        let raster = self.raster()?;
        self.write("raster.asc", &raster.to_ascii_grid())?;
        let graph = self.build_graph()?;
        let doc = graph.to_document(
            Some(&self.loaded.config.scenario_set()),
            Some(self.loaded.hash.clone()),
        );
        let path = self.write_json("graph.json", &doc)?;
        println!(
            "graph: {} nodes, {} arcs, total length {:.3} km -> {}",
            graph.nodes.len(),
            graph.arcs.len(),
            graph.total_undirected_length_km(),
            path.display()
        );
        Ok(EXIT_OK)
    }

    fn cmd_fit_trends(&self) -> Result<i32, CliFailure> {
        let trends = self.loaded.config.trend_table()?;
        #[derive(Serialize)]
        struct PinnedDoc<'a> {
            config_hash: &'a str,
            pinned: &'a [crate::trends::Trend],
        }
        let doc = toml::to_string_pretty(&PinnedDoc {
            config_hash: &self.loaded.hash,
            pinned: &trends,
        })
        .map_err(|e| CliFailure::new(EXIT_IO, e.to_string()))?;
        let path = self.write("trends.toml", &doc)?;
        println!("{:>3} {:>14} {:>14} {:>10} {:>10}", "c", "slope", "intercept", "q_min", "q_max");
        for (c, t) in trends.iter().enumerate() {
            println!(
                "{c:>3} {:>14.2} {:>14.2} {:>10.4} {:>10.4}",
                t.slope, t.intercept, t.q_min, t.q_max
            );
        }
        println!("pinned trend table -> {}", path.display());
        Ok(EXIT_OK)
    }

    fn solve_status_code(&self, plans: &[&PlanSolution]) -> i32 {
        if plans
            .iter()
            .any(|p| matches!(p.status, SolveStatus::TimeLimit | SolveStatus::Feasible))
        {
            EXIT_SOLVER_LIMIT
        } else {
            EXIT_OK
        }
    }

    fn print_plan(&self, name: &str, plan: &PlanSolution) {
        println!(
            "{name}: objective {:.3} Mio EUR (status {:?}, gap {})",
            plan.objective_eur / 1.0e6,
            plan.status,
            plan.gap
                .map_or_else(|| "n/a".into(), |g| format!("{g:.2e}")),
        );
        print!("{}", solution_breakdown_csv(plan));
    }

    fn cmd_solve(&self, model: ModelArg, scenario: Option<&str>) -> Result<i32, CliFailure> {
        let instance = self.instance()?;
        let planner = self.planner(&instance);
        let ids: Vec<String> = match scenario {
            Some(id) => vec![id.to_string()],
            None => instance.scenarios.ids().map(str::to_string).collect(),
        };
        let mut solved: Vec<PlanSolution> = Vec::new();
        match model {
            ModelArg::M1 => {
                for id in &ids {
                    let name = format!("solution_m1_{id}.json");
                    let mut plan = match self.load_solution(&name) {
                        Some(plan) => plan,
                        None => planner.solve_m1(id)?,
                    };
                    self.store_solution(&name, &mut plan)?;
                    self.print_plan(&format!("m1 {id}"), &plan);
                    solved.push(plan);
                }
            }
            ModelArg::M2 => {
                for id in &ids {
                    let name = format!("solution_m2_{id}.json");
                    let mut plan = match self.load_solution(&name) {
                        Some(plan) => plan,
                        None => planner.solve_m2(id)?,
                    };
                    self.store_solution(&name, &mut plan)?;
                    self.print_plan(&format!("m2 {id}"), &plan);
                    solved.push(plan);
                }
            }
            ModelArg::Regret => {
                let name = "solution_regret.json";
                let mut plan = match self.load_solution(name) {
                    Some(plan) => plan,
                    None => {
                        let best = self.best_costs(&instance)?;
                        planner.solve_min_max_regret(&best)?
                    }
                };
                self.store_solution(name, &mut plan)?;
                println!(
                    "regret: x = {:.3} Mio EUR",
                    plan.regret_eur.unwrap_or(f64::NAN) / 1.0e6
                );
                self.print_plan("regret", &plan);
                solved.push(plan);
            }
        }
        Ok(self.solve_status_code(&solved.iter().collect::<Vec<_>>()))
    }

    fn cmd_export(&self, solution: &Path, format: FormatArg) -> Result<i32, CliFailure> {
        let text = std::fs::read_to_string(solution).map_err(|e| io_failure(solution, e))?;
        let plan: PlanSolution = serde_json::from_str(&text)
            .map_err(|e| CliFailure::new(EXIT_VALIDATION, format!("bad solution file: {e}")))?;
        let graph = self.graph()?;
        let stem = solution
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("solution");
        match format {
            FormatArg::Geojson => {
                let doc = solution_geojson(&graph, &plan);
                let path = self.write_json(&format!("{stem}.geojson"), &doc)?;
                println!("geojson -> {}", path.display());
            }
            FormatArg::Csv => {
                let csv = solution_breakdown_csv(&plan);
                let path = self.write(&format!("{stem}_breakdown.csv"), &csv)?;
                println!("csv -> {}", path.display());
            }
        }
        Ok(EXIT_OK)
    }

    fn cmd_report(&self) -> Result<i32, CliFailure> {
        let instance = self.instance()?;
        let planner = self.planner(&instance);
        let best = self.best_costs(&instance)?;
        let ids: Vec<String> = instance.scenarios.ids().map(str::to_string).collect();

        let mut statuses: Vec<PlanSolution> = Vec::new();
        let mut m2_totals = std::collections::BTreeMap::new();
        for id in &ids {
            let name = format!("solution_m2_{id}.json");
            let mut plan = match self.load_solution(&name) {
                Some(plan) => plan,
                None => planner.solve_m2(id)?,
            };
            self.store_solution(&name, &mut plan)?;
            m2_totals.insert(id.clone(), plan.objective_eur);
            statuses.push(plan);
        }
        let mut regret_plan = match self.load_solution("solution_regret.json") {
            Some(plan) => plan,
            None => planner.solve_min_max_regret(&best)?,
        };
        self.store_solution("solution_regret.json", &mut regret_plan)?;

        let totals: Vec<(String, f64, f64, f64)> = ids
            .iter()
            .map(|id| {
                (
                    id.clone(),
                    best.totals_eur[id],
                    m2_totals[id],
                    regret_plan.scenarios[id].breakdown.total,
                )
            })
            .collect();
        let report = crate::economics::regret_report(&totals);
        print!("{}", render_tables(&totals, &report));
        self.write("system_costs.csv", &system_costs_csv(&totals))?;
        self.write("regret_report.csv", &regret_report_csv(&report))?;
        statuses.push(regret_plan);
        Ok(self.solve_status_code(&statuses.iter().collect::<Vec<_>>()))
    }
}
