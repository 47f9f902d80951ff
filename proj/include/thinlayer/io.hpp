#pragma once

// Output writers.  CSV files are the deterministic data products: '.'
// decimal separator, '\n' line endings, 17 significant digits (doubles
// round-trip), no wall-clock content, fixed row order.  JSON summaries may
// carry runtimes and solver statistics and are not byte-stable.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "thinlayer/cell_problems.hpp"
#include "thinlayer/grid.hpp"
#include "thinlayer/study.hpp"

namespace thinlayer {

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out)
        throw std::runtime_error("write failed: " + path);
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline std::string study_csv_text(const StudyReport& rep) {
    std::string s =
        "inv_epsilon,epsilon,steps,"
        "err1_bulk_plus,err1_bulk_minus,err1_layer,composite1,"
        "err2_bulk_plus,err2_bulk_minus,err2_layer,composite2,"
        "linf_l2_1,linf_l2_2,apriori,jump_max_1,jump_max_2,mass_initial,mass_final\n";
    for (const ErrorReport& p : rep.points) {
        s += std::to_string(p.inv_epsilon) + ',' + format_g17(p.epsilon) + ',' + std::to_string(p.steps);
        for (double v : {p.bulk_plus[0], p.bulk_minus[0], p.layer[0], p.composite[0], p.bulk_plus[1],
                         p.bulk_minus[1], p.layer[1], p.composite[1], p.linf_l2[0], p.linf_l2[1], p.apriori,
                         p.jump_max[0], p.jump_max[1], p.mass_initial, p.mass_final})
            s += ',' + format_g17(v);
        s += '\n';
    }
    return s;
}

inline void write_study_csv(const std::string& path, const StudyReport& rep) {
    write_text_file(path, study_csv_text(rep));
}

inline nlohmann::json study_json(const StudyReport& rep) {
    nlohmann::json j;
    j["scenario"] = rep.scenario_name;
    j["digest"] = rep.scenario_digest;
    j["resolution"] = rep.resolution;
    j["stripe_length"] = rep.stripe_length;
    j["macro_cells_per_unit"] = rep.macro_cells_per_unit;
    j["T"] = rep.T;
    j["dt"] = rep.dt;
    j["d_star"] = rep.d_star;
    j["omega_plus"] = rep.omega_plus;
    j["omega_minus"] = rep.omega_minus;
    j["compatibility_defect"] = rep.compatibility_defect;
    j["rates"] = {{"p1", rep.rate[0]},
                  {"p2", rep.rate[1]},
                  {"residual1", rep.rate_residual[0]},
                  {"residual2", rep.rate_residual[1]},
                  {"points_used1", rep.rate_points_used[0]},
                  {"points_used2", rep.rate_points_used[1]},
                  {"discretization_limited1", rep.discretization_limited[0]},
                  {"discretization_limited2", rep.discretization_limited[1]},
                  {"excluded_finest1", rep.excluded_finest[0]},
                  {"excluded_finest2", rep.excluded_finest[1]}};
    j["apriori_slope"] = rep.apriori_slope;
    j["seconds_total"] = rep.seconds_total;
    nlohmann::json pts = nlohmann::json::array();
    for (const ErrorReport& p : rep.points) {
        pts.push_back({{"inv_epsilon", p.inv_epsilon},
                       {"epsilon", p.epsilon},
                       {"steps", p.steps},
                       {"err1", {{"bulk_plus", p.bulk_plus[0]}, {"bulk_minus", p.bulk_minus[0]}, {"layer", p.layer[0]}}},
                       {"err2", {{"bulk_plus", p.bulk_plus[1]}, {"bulk_minus", p.bulk_minus[1]}, {"layer", p.layer[1]}}},
                       {"composite1", p.composite[0]},
                       {"composite2", p.composite[1]},
                       {"linf_l2_1", p.linf_l2[0]},
                       {"linf_l2_2", p.linf_l2[1]},
                       {"apriori", p.apriori},
                       {"jump_max_1", p.jump_max[0]},
                       {"jump_max_2", p.jump_max[1]},
                       {"mass_initial", p.mass_initial},
                       {"mass_final", p.mass_final},
                       {"micro_cg_iterations", p.micro_cg},
                       {"macro_cg_iterations", p.macro_cg},
                       {"seconds", p.seconds}});
    }
    j["points"] = pts;
    return j;
}

/// Nodal field dump: one row per node, vertical-major to match the node
/// numbering.
inline std::string field_csv_text(const StructuredGrid& g, const std::vector<double>& values) {
    std::string s = "x1,x2,value\n";
    for (int j = 0; j < g.vert_nodes(); ++j)
        for (int i = 0; i < g.tan_nodes(); ++i)
            s += format_g17(g.tan_coord(i)) + ',' + format_g17(g.vert_coord(j)) + ',' +
                 format_g17(values[static_cast<std::size_t>(g.node(i, j))]) + '\n';
    return s;
}

inline void write_field_csv(const std::string& path, const StructuredGrid& g, const std::vector<double>& values) {
    write_text_file(path, field_csv_text(g, values));
}

/// Cell-problem summary row; j is the tangential direction index (the only
/// corrector direction in dimension 2).
inline std::string cell_csv_text(const CellData& cells) {
    std::string s =
        "j,resolution,D_star_11,omega_plus,omega_minus,"
        "residual_w1,residual_bl_plus,residual_bl_minus,residual_w2\n";
    s += "1," + std::to_string(cells.resolution) + ',' + format_g17(cells.d_star) + ',' +
         format_g17(cells.bl_plus.decay.omega) + ',' + format_g17(cells.bl_minus.decay.omega);
    for (double v : {cells.residual_w1, cells.bl_plus.report.relative_residual,
                     cells.bl_minus.report.relative_residual, cells.residual_w2})
        s += ',' + format_g17(v);
    s += '\n';
    return s;
}

inline std::string slab_energies_csv_text(const CellData& cells) {
    std::string s = "side,band,energy\n";
    for (std::size_t k = 0; k < cells.bl_plus.slab_energies.size(); ++k)
        s += "plus," + std::to_string(k) + ',' + format_g17(cells.bl_plus.slab_energies[k]) + '\n';
    for (std::size_t k = 0; k < cells.bl_minus.slab_energies.size(); ++k)
        s += "minus," + std::to_string(k) + ',' + format_g17(cells.bl_minus.slab_energies[k]) + '\n';
    return s;
}

}  // namespace thinlayer
