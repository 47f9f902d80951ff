// Command-line front end: wires scenario files to the cell, macro, micro,
// and study pipelines.  Every subcommand validates the scenario, writes its
// data products into an output directory, and always writes manifest.json
// with the resolved parameters and stage timings.
//
// Exit codes: 0 success, 2 usage (unknown flag, malformed flag value),
// 3 scenario parse/validation failure, 4 solver failure, 5 rate-assertion
// failure, 1 anything else.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "thinlayer/cell_problems.hpp"
#include "thinlayer/io.hpp"
#include "thinlayer/macro_solver.hpp"
#include "thinlayer/micro_solver.hpp"
#include "thinlayer/scenario.hpp"
#include "thinlayer/study.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace thinlayer;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitSolver = 4;
constexpr int kExitRates = 5;

class StageClock {
  public:
    void start(const std::string& stage) {
        stage_ = stage;
        t0_ = std::chrono::steady_clock::now();
    }
    void stop() {
        if (stage_.empty())
            return;
        timings_[stage_] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        stage_.clear();
    }
    json to_json() const {
        json j = json::object();
        for (const auto& [k, v] : timings_)
            j[k] = v;
        return j;
    }

  private:
    std::map<std::string, double> timings_;
    std::string stage_;
    std::chrono::steady_clock::time_point t0_;
};

fs::path resolve_out_dir(const std::string& scenario_path, const std::string& out_flag) {
    if (!out_flag.empty())
        return fs::path(out_flag);
    const fs::path p(scenario_path);
    return p.parent_path() / (p.stem().string() + "_out");
}

void write_manifest(const fs::path& out_dir, const std::string& command, const std::string& scenario_path,
                    const Scenario* sc, const json& params, const std::vector<std::string>& outputs,
                    const StageClock& clock) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["scenario"]["path"] = scenario_path;
    if (sc != nullptr) {
        m["scenario"]["name"] = sc->name;
        m["scenario"]["digest"] = sc->digest;
    }
    m["parameters"] = params;
    m["outputs"] = outputs;
    m["timings_seconds"] = clock.to_json();
    write_json_file((out_dir / "manifest.json").string(), m);
}

/// Parses the scenario and runs the whole validation suite; prints
/// diagnostics to stderr.  Returns 0 or kExitValidation.
int load_scenario(const std::string& path, Scenario& sc, ValidationReport& report) {
    try {
        sc = parse_scenario_file(path);
    } catch (const ParseError& e) {
        std::cerr << "error: " << path << ": " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    report = validate(sc);
    if (!report.ok()) {
        for (const Diagnostic& d : report.diagnostics)
            std::cerr << "validation " << d.code << " [" << d.key << "]: " << d.message << '\n';
        return kExitValidation;
    }
    return 0;
}

std::vector<double> parse_time_list(const std::string& text, bool& ok) {
    std::vector<double> out;
    ok = true;
    if (text.empty())
        return out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size()) {
            ok = false;
            return {};
        }
        out.push_back(v);
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    return out;
}

std::vector<int> parse_epsilon_list(const std::string& text, bool& ok) {
    std::vector<int> out;
    ok = true;
    if (text.empty())
        return out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t comma = text.find(',', pos);
        const std::string tok = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            out.push_back(parse_inverse_epsilon(tok, SourcePos{1, static_cast<int>(pos) + 1}));
        } catch (const ParseError& e) {
            std::cerr << "error: --epsilons: " << e.message() << '\n';
            ok = false;
            return {};
        }
        if (comma == std::string::npos)
            break;
        pos = comma + 1;
    }
    return out;
}

std::string snapshot_name(const char* prefix, std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03zu.csv", prefix, index);
    return buf;
}

int run_validate(const std::string& scenario_path, const std::string& out_flag) {
    const fs::path out_dir = resolve_out_dir(scenario_path, out_flag);
    fs::create_directories(out_dir);
    StageClock clock;
    clock.start("validate");
    Scenario sc;
    ValidationReport report;
    const int rc = load_scenario(scenario_path, sc, report);
    clock.stop();
    write_manifest(out_dir, "validate", scenario_path, sc.digest.empty() ? nullptr : &sc,
                   json{{"scenario", scenario_path}}, {}, clock);
    if (rc != 0)
        return rc;
    std::cout << "scenario '" << sc.name << "' valid; digest " << sc.digest << '\n';
    std::cout << "  coercivity minimum " << format_g17(report.coercivity_min) << '\n';
    for (const auto& [key, bound] : report.lipschitz_bounds)
        std::cout << "  Lipschitz bound " << key << " = " << format_g17(bound) << '\n';
    return 0;
}

int run_cell(const std::string& scenario_path, int resolution, int stripe_length, const std::string& out_flag) {
    const fs::path out_dir = resolve_out_dir(scenario_path, out_flag);
    fs::create_directories(out_dir);
    StageClock clock;

    clock.start("validate");
    Scenario sc;
    ValidationReport report;
    const int rc = load_scenario(scenario_path, sc, report);
    clock.stop();
    if (rc != 0) {
        write_manifest(out_dir, "cell", scenario_path, nullptr, json::object(), {}, clock);
        return rc;
    }
    const int res = resolution > 0 ? resolution : sc.resolution;
    const int len = stripe_length > 0 ? stripe_length : sc.stripe_length;

    clock.start("cells");
    const CellData cells = build_cell_data([&sc](double y1, double y2) { return sc.layer_coefficient(y1, y2); },
                                           sc.D_plus, sc.D_minus, res, len);
    clock.stop();

    clock.start("write");
    write_text_file((out_dir / "cell.csv").string(), cell_csv_text(cells));
    write_text_file((out_dir / "slab_energies.csv").string(), slab_energies_csv_text(cells));
    write_field_csv((out_dir / "w1.csv").string(), cells.cell_grid, cells.w1);
    write_field_csv((out_dir / "w2.csv").string(), cells.cell_grid, cells.w2);
    write_field_csv((out_dir / "bl_plus.csv").string(), cells.bl_plus.grid, cells.bl_plus.w);
    write_field_csv((out_dir / "bl_minus.csv").string(), cells.bl_minus.grid, cells.bl_minus.w);
    clock.stop();

    write_manifest(out_dir, "cell", scenario_path, &sc,
                   json{{"resolution", res}, {"stripe_length", len}},
                   {"cell.csv", "slab_energies.csv", "w1.csv", "w2.csv", "bl_plus.csv", "bl_minus.csv"}, clock);
    std::cout << "D* = " << format_g17(cells.d_star) << ", omega+ = " << format_g17(cells.bl_plus.decay.omega)
              << ", omega- = " << format_g17(cells.bl_minus.decay.omega)
              << ", compatibility defect = " << format_g17(cells.compatibility_defect) << '\n';
    return 0;
}

int run_macro(const std::string& scenario_path, int cells_per_unit, int cell_resolution, double dt,
              const std::string& snapshots_flag, const std::string& out_flag) {
    const fs::path out_dir = resolve_out_dir(scenario_path, out_flag);
    fs::create_directories(out_dir);
    StageClock clock;

    bool ok = true;
    std::vector<double> snapshot_times = parse_time_list(snapshots_flag, ok);
    if (!ok) {
        std::cerr << "error: --snapshots expects a comma-separated list of times\n";
        return kExitUsage;
    }

    clock.start("validate");
    Scenario sc;
    ValidationReport report;
    const int rc = load_scenario(scenario_path, sc, report);
    clock.stop();
    if (rc != 0) {
        write_manifest(out_dir, "macro", scenario_path, nullptr, json::object(), {}, clock);
        return rc;
    }
    if (snapshot_times.empty())
        snapshot_times.push_back(sc.T);
    const int cell_res = cell_resolution > 0 ? cell_resolution : sc.resolution;
    const int cpu = cells_per_unit > 0 ? cells_per_unit : 8 * cell_res;

    clock.start("cells");
    const CellData cells = build_cell_data([&sc](double y1, double y2) { return sc.layer_coefficient(y1, y2); },
                                           sc.D_plus, sc.D_minus, cell_res, sc.stripe_length);
    clock.stop();

    clock.start("solve");
    const StructuredGrid grid = build_macro_grid(sc.H, sc.sigma_len, cpu);
    const MacroSystem sys = assemble_macro(sc, cells.d_star, grid);
    const MacroState initial = macro_initial_state(sys);
    const double mass_initial = macro_total_mass(sys, initial.c);
    const MacroRunResult run = solve_macro(sys, sc.T, dt, snapshot_times);
    const double mass_final = macro_total_mass(sys, run.final_state.c);
    clock.stop();

    clock.start("write");
    std::vector<std::string> outputs;
    json snaps = json::array();
    for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
        const std::string name = snapshot_name("macro", k);
        write_field_csv((out_dir / name).string(), grid, run.snapshots[k].c);
        outputs.push_back(name);
        snaps.push_back({{"file", name}, {"t", run.snapshots[k].t}});
    }
    json summary;
    summary["steps"] = run.steps;
    summary["dt"] = sc.T / static_cast<double>(run.steps);
    summary["cg_iterations"] = run.total_cg_iterations;
    summary["d_star"] = cells.d_star;
    summary["mass_initial"] = mass_initial;
    summary["mass_final"] = mass_final;
    summary["mass_drift_abs"] = std::abs(mass_final - mass_initial);
    summary["snapshots"] = snaps;
    write_json_file((out_dir / "macro.json").string(), summary);
    outputs.push_back("macro.json");
    clock.stop();

    write_manifest(out_dir, "macro", scenario_path, &sc,
                   json{{"cells_per_unit", cpu}, {"cell_resolution", cell_res}, {"dt", dt}},
                   outputs, clock);
    std::cout << "macro run: " << run.steps << " steps, mass drift "
              << format_g17(std::abs(mass_final - mass_initial)) << '\n';
    return 0;
}

int run_micro(const std::string& scenario_path, const std::string& epsilon_flag, int resolution, double dt_flag,
              const std::string& snapshots_flag, const std::string& out_flag) {
    const fs::path out_dir = resolve_out_dir(scenario_path, out_flag);
    fs::create_directories(out_dir);
    StageClock clock;

    bool ok = true;
    std::vector<double> snapshot_times = parse_time_list(snapshots_flag, ok);
    if (!ok) {
        std::cerr << "error: --snapshots expects a comma-separated list of times\n";
        return kExitUsage;
    }
    int inv_epsilon = 0;
    if (!epsilon_flag.empty()) {
        try {
            inv_epsilon = parse_inverse_epsilon(epsilon_flag, SourcePos{1, 1});
        } catch (const ParseError& e) {
            std::cerr << "error: --epsilon: " << e.message() << '\n';
            return kExitUsage;
        }
    }

    clock.start("validate");
    Scenario sc;
    ValidationReport report;
    const int rc = load_scenario(scenario_path, sc, report);
    clock.stop();
    if (rc != 0) {
        write_manifest(out_dir, "micro", scenario_path, nullptr, json::object(), {}, clock);
        return rc;
    }
    if (inv_epsilon == 0) {
        if (!sc.inv_epsilon) {
            std::cerr << "error: no --epsilon given and the scenario sets none\n";
            return kExitUsage;
        }
        inv_epsilon = *sc.inv_epsilon;
    }
    if (snapshot_times.empty())
        snapshot_times.push_back(sc.T);
    const int res = resolution > 0 ? resolution : sc.resolution;
    const LayerGeometry geom = LayerGeometry::create(sc.H, sc.sigma_len, inv_epsilon);
    const double dt = dt_flag > 0.0 ? dt_flag : default_step_size(geom.epsilon());

    clock.start("solve");
    const MicroSystem sys = assemble_micro(sc, geom, res);
    const MicroRunResult run = solve_micro(sys, sc.T, dt, snapshot_times);
    clock.stop();

    clock.start("write");
    std::vector<std::string> outputs;
    json snaps = json::array();
    for (std::size_t k = 0; k < run.snapshots.size(); ++k) {
        const std::string name = snapshot_name("micro", k);
        write_field_csv((out_dir / name).string(), sys.grid, run.snapshots[k].c);
        outputs.push_back(name);
        snaps.push_back({{"file", name}, {"t", run.snapshots[k].t}});
    }
    json summary;
    summary["inv_epsilon"] = inv_epsilon;
    summary["resolution"] = res;
    summary["steps"] = run.steps;
    summary["dt"] = sc.T / static_cast<double>(run.steps);
    summary["cg_iterations"] = run.total_cg_iterations;
    summary["mass_initial"] = run.mass_initial;
    summary["mass_final"] = run.mass_final;
    summary["mass_drift_abs"] = std::abs(run.mass_final - run.mass_initial);
    summary["snapshots"] = snaps;
    write_json_file((out_dir / "micro.json").string(), summary);
    outputs.push_back("micro.json");
    clock.stop();

    write_manifest(out_dir, "micro", scenario_path, &sc,
                   json{{"inv_epsilon", inv_epsilon}, {"resolution", res}, {"dt", dt}}, outputs, clock);
    std::cout << "micro run: " << run.steps << " steps, mass drift "
              << format_g17(std::abs(run.mass_final - run.mass_initial)) << '\n';
    return 0;
}

int run_study_cmd(const std::string& scenario_path, const std::string& epsilons_flag, int resolution,
                  int stripe_length, int jobs, const std::string& assert_rates_flag, const std::string& out_flag) {
    const fs::path out_dir = resolve_out_dir(scenario_path, out_flag);
    fs::create_directories(out_dir);
    StageClock clock;

    bool ok = true;
    const std::vector<int> invs = parse_epsilon_list(epsilons_flag, ok);
    if (!ok)
        return kExitUsage;
    std::vector<double> assert_rates = parse_time_list(assert_rates_flag, ok);
    if (!ok || (!assert_rates_flag.empty() && assert_rates.size() != 2)) {
        std::cerr << "error: --assert-rates expects two comma-separated lower bounds, e.g. 0.4,0.8\n";
        return kExitUsage;
    }

    clock.start("validate");
    Scenario sc;
    ValidationReport report;
    const int rc = load_scenario(scenario_path, sc, report);
    clock.stop();
    if (rc != 0) {
        write_manifest(out_dir, "study", scenario_path, nullptr, json::object(), {}, clock);
        return rc;
    }

    StudyOptions opt;
    opt.inv_epsilons = invs;
    opt.resolution = resolution;
    opt.stripe_length = stripe_length;
    opt.jobs = jobs;

    clock.start("study");
    const StudyReport rep = run_study(sc, opt, [](const std::string& line) { std::cout << "[study] " << line << '\n'; });
    clock.stop();

    clock.start("write");
    write_study_csv((out_dir / "study.csv").string(), rep);
    write_json_file((out_dir / "study.json").string(), study_json(rep));
    clock.stop();

    write_manifest(out_dir, "study", scenario_path, &sc,
                   json{{"inv_epsilons", rep.points.empty() ? json::array() : [&] {
                             json a = json::array();
                             for (const auto& p : rep.points)
                                 a.push_back(p.inv_epsilon);
                             return a;
                         }()},
                        {"resolution", rep.resolution},
                        {"stripe_length", rep.stripe_length},
                        {"jobs", jobs},
                        {"dt", rep.dt}},
                   {"study.csv", "study.json"}, clock);

    std::cout << "D* = " << format_g17(rep.d_star) << ", p1 = " << format_g17(rep.rate[0])
              << (rep.excluded_finest[0] ? " (finest point excluded: discretization-limited)" : "")
              << ", p2 = " << format_g17(rep.rate[1])
              << (rep.excluded_finest[1] ? " (finest point excluded: discretization-limited)" : "") << '\n';

    if (!assert_rates.empty()) {
        if (!(rep.rate[0] >= assert_rates[0]) || !(rep.rate[1] >= assert_rates[1])) {
            std::cerr << "rate assertion failed: p1 = " << format_g17(rep.rate[0]) << " (need >= "
                      << format_g17(assert_rates[0]) << "), p2 = " << format_g17(rep.rate[1]) << " (need >= "
                      << format_g17(assert_rates[1]) << ")\n";
            return kExitRates;
        }
        std::cout << "rate assertion passed\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thin-layer homogenization toolkit"};
    app.require_subcommand(1);

    std::string scenario_path, out_flag, epsilons_flag, epsilon_flag, snapshots_flag, assert_rates_flag;
    int resolution = 0, stripe_length = 0, cells_per_unit = 0, jobs = 0;
    double dt = 0.0;

    CLI::App* cmd_validate = app.add_subcommand("validate", "Parse a scenario and run the assumption checks");
    cmd_validate->add_option("scenario", scenario_path, "scenario file")->required();
    cmd_validate->add_option("--out", out_flag, "output directory");

    CLI::App* cmd_cell = app.add_subcommand("cell", "Solve the unit-cell and boundary-layer problems");
    cmd_cell->add_option("scenario", scenario_path, "scenario file")->required();
    cmd_cell->add_option("--resolution", resolution, "cell resolution");
    cmd_cell->add_option("--stripe-length", stripe_length, "boundary-layer truncation length");
    cmd_cell->add_option("--out", out_flag, "output directory");

    CLI::App* cmd_macro = app.add_subcommand("macro", "Solve the effective interface problem");
    cmd_macro->add_option("scenario", scenario_path, "scenario file")->required();
    cmd_macro->add_option("--resolution", cells_per_unit, "grid cells per unit length");
    cmd_macro->add_option("--cell-resolution", resolution, "cell resolution for the effective tensor");
    cmd_macro->add_option("--dt", dt, "time step")->default_val(1e-3);
    cmd_macro->add_option("--snapshots", snapshots_flag, "comma-separated snapshot times");
    cmd_macro->add_option("--out", out_flag, "output directory");

    CLI::App* cmd_micro = app.add_subcommand("micro", "Solve the resolved thin-layer problem");
    cmd_micro->add_option("scenario", scenario_path, "scenario file")->required();
    cmd_micro->add_option("--epsilon", epsilon_flag, "layer half-thickness (unit fraction, e.g. 1/8)");
    cmd_micro->add_option("--resolution", resolution, "per-period lattice resolution");
    cmd_micro->add_option("--dt", dt, "time step (default min(1e-3, eps^2/4))");
    cmd_micro->add_option("--snapshots", snapshots_flag, "comma-separated snapshot times");
    cmd_micro->add_option("--out", out_flag, "output directory");

    CLI::App* cmd_study = app.add_subcommand("study", "Run an epsilon sweep and fit convergence rates");
    cmd_study->add_option("scenario", scenario_path, "scenario file")->required();
    cmd_study->add_option("--epsilons", epsilons_flag, "comma-separated epsilon list, e.g. 1/4,1/8,1/16");
    cmd_study->add_option("--resolution", resolution, "per-period lattice resolution");
    cmd_study->add_option("--stripe-length", stripe_length, "boundary-layer truncation length");
    cmd_study->add_option("--jobs", jobs, "parallel epsilon points (default: all cores)");
    cmd_study->add_option("--assert-rates", assert_rates_flag, "lower bounds p1,p2; exit 5 if not met");
    cmd_study->add_option("--out", out_flag, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (cmd_validate->parsed())
            return run_validate(scenario_path, out_flag);
        if (cmd_cell->parsed())
            return run_cell(scenario_path, resolution, stripe_length, out_flag);
        if (cmd_macro->parsed())
            return run_macro(scenario_path, cells_per_unit, resolution, dt, snapshots_flag, out_flag);
        if (cmd_micro->parsed())
            return run_micro(scenario_path, epsilon_flag, resolution, dt, snapshots_flag, out_flag);
        if (cmd_study->parsed())
            return run_study_cmd(scenario_path, epsilons_flag, resolution, stripe_length, jobs, assert_rates_flag,
                                 out_flag);
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << '\n';
        return kExitSolver;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
